//! Monte Carlo experiment harness.
//!
//! Runs batches of sessions under chosen attack/noise/ECC configurations,
//! estimates probabilities with binomial confidence intervals, and compares
//! them against the protocol's closed-form predictions. Every simulated
//! point is produced without reference to the formula it is checked against;
//! the two paths meet only in the [`ComparisonRow`].
//!
//! Trial i draws its randomness from a stream derived from
//! `(master_seed, i)`, so results are byte-identical regardless of execution
//! order or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    self, AttackModel, detection_prob_intercept, dos_decoy_pass_prob, entangle_decoy_pass_prob,
    id_b1_guess_prob, impersonate_alice_detection_prob, impersonate_bob_acceptance_prob,
    mitm_detection_prob, p_corr_bound,
};
use crate::ecc::{logical_error_rate, RepetitionCode};
use crate::noise::{predicted_success, transmit_bit, ChannelModel};
use crate::protocol::{
    BitString, PartyIdentities, ProtocolConfig, SessionOutcome, SessionSetup, SessionStatus,
};
use crate::rng::{RandomSource, SessionRng};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("cannot estimate from an empty outcome list")]
    EmptyOutcomes,
    #[error("unknown quantity id {0:?}")]
    UnknownQuantity(String),
    #[error("invalid parameters for {id}: {reason}")]
    InvalidParams { id: String, reason: String },
    #[error("protocol error: {0}")]
    Protocol(#[from] crate::protocol::ProtocolError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed report: {0}")]
    MalformedReport(String),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

// ---------------------------------------------------------------------------
// Scenario and trial running
// ---------------------------------------------------------------------------

/// A batch of identically configured sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ProtocolConfig,
    pub identities: PartyIdentities,
    pub attack: AttackModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecc: Option<RepetitionCode>,
    pub trials: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(AnalysisError::InvalidParams {
                id: "scenario".into(),
                reason: "trials must be at least 1".into(),
            });
        }
        self.config.validate()?;
        self.identities.validate(self.config.k)?;
        Ok(())
    }
}

/// Run every trial of a scenario. Trial i seeds its own random stream from
/// `(master_seed, i)` and draws the trial's message (n uniform bits) before
/// anything else, so callers can reproduce it independently.
pub fn run_trials(scenario: &Scenario, master_seed: u64) -> Result<Vec<SessionOutcome>> {
    scenario.validate()?;
    (0..scenario.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SessionRng::for_trial(master_seed, i as u64);
            let message = BitString::random(scenario.config.n, &mut rng);
            let mut setup = SessionSetup::new(&scenario.config, &scenario.identities)
                .attack(scenario.attack.clone());
            setup.channel = scenario.channel;
            setup.ecc = scenario.ecc;
            setup.run(&message, &mut rng).map_err(AnalysisError::from)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Estimation
// ---------------------------------------------------------------------------

/// A Bernoulli point estimate with its normal-approximation 95% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub point: f64,
    pub stderr: f64,
    pub n_trials: usize,
    pub ci95: (f64, f64),
}

impl EstimateWithCI {
    pub fn from_counts(successes: u64, total: u64) -> Self {
        assert!(total > 0, "estimate needs at least one sample");
        let p = successes as f64 / total as f64;
        let stderr = (p * (1.0 - p) / total as f64).sqrt();
        let half = 1.96 * stderr;
        Self {
            point: p,
            stderr,
            n_trials: total as usize,
            ci95: ((p - half).max(0.0), (p + half).min(1.0)),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci95.0 <= value && value <= self.ci95.1
    }
}

/// Estimate the probability of `predicate` over session outcomes.
pub fn estimate<F>(outcomes: &[SessionOutcome], predicate: F) -> Result<EstimateWithCI>
where
    F: Fn(&SessionOutcome) -> bool,
{
    if outcomes.is_empty() {
        return Err(AnalysisError::EmptyOutcomes);
    }
    let hits = outcomes.iter().filter(|o| predicate(o)).count() as u64;
    Ok(EstimateWithCI::from_counts(hits, outcomes.len() as u64))
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

/// Every closed-form prediction the simulator is checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum Quantity {
    /// `1 − (1/2)^{k/2}`
    ImpersonateAliceDetect { k: usize },
    /// `(1/2)^k`
    ImpersonateBobAccept { k: usize },
    /// `(3/4)^k`
    IdB1Guess { k: usize },
    /// `1 − (3/4)^m`
    InterceptDetect { m: usize },
    /// `3/4`, independent of θ₀
    InterceptDecoySurvival,
    /// `1/(N · C(l, n))`
    PCorr { l: usize, n: usize },
    /// `(F + 1/2)/2`
    EntangleDecoyPass { fidelity: f64 },
    /// `1 − ((F+1/2)/2)^m`
    EntangleDetect { fidelity: f64, m: usize },
    /// `(1 + w₁² + (w₂²+w₄²)/2)/2`
    DosDecoyPass { weights: [f64; 4] },
    /// `1 − p''^m`
    DosDetect { weights: [f64; 4], m: usize },
    /// `1/2`
    MitmDecoyPass,
    /// `1 − 2^{−m}`
    MitmDetect { m: usize },
    /// `(1 − p_error)^{γn}`
    PredictedSuccess { n: usize, p_error: f64, gamma: f64 },
    /// `Σ_{j≥⌈d/2⌉} C(d,j) p^j (1−p)^{d−j}`
    EccLogicalRate { distance: usize, p: f64 },
}

impl Quantity {
    pub fn id(&self) -> &'static str {
        match self {
            Quantity::ImpersonateAliceDetect { .. } => "impersonate_alice_detect",
            Quantity::ImpersonateBobAccept { .. } => "impersonate_bob_accept",
            Quantity::IdB1Guess { .. } => "id_b1_guess",
            Quantity::InterceptDetect { .. } => "intercept_detect",
            Quantity::InterceptDecoySurvival => "intercept_decoy_survival",
            Quantity::PCorr { .. } => "p_corr",
            Quantity::EntangleDecoyPass { .. } => "entangle_decoy_pass",
            Quantity::EntangleDetect { .. } => "entangle_detect",
            Quantity::DosDecoyPass { .. } => "dos_decoy_pass",
            Quantity::DosDetect { .. } => "dos_detect",
            Quantity::MitmDecoyPass => "mitm_decoy_pass",
            Quantity::MitmDetect { .. } => "mitm_detect",
            Quantity::PredictedSuccess { .. } => "predicted_success",
            Quantity::EccLogicalRate { .. } => "ecc_logical_rate",
        }
    }

    /// Exact evaluation of the formula. No simulation anywhere downstream of
    /// this call.
    pub fn value(&self) -> f64 {
        match self {
            Quantity::ImpersonateAliceDetect { k } => impersonate_alice_detection_prob(*k),
            Quantity::ImpersonateBobAccept { k } => impersonate_bob_acceptance_prob(*k),
            Quantity::IdB1Guess { k } => id_b1_guess_prob(*k),
            Quantity::InterceptDetect { m } => detection_prob_intercept(*m),
            Quantity::InterceptDecoySurvival => 0.75,
            Quantity::PCorr { l, n } => p_corr_bound(360, *l, *n).0,
            Quantity::EntangleDecoyPass { fidelity } => entangle_decoy_pass_prob(*fidelity),
            Quantity::EntangleDetect { fidelity, m } => {
                adversary::entangle_detection_prob(*fidelity, *m)
            }
            Quantity::DosDecoyPass { weights } => dos_decoy_pass_prob(weights),
            Quantity::DosDetect { weights, m } => adversary::dos_detection_prob(weights, *m),
            Quantity::MitmDecoyPass => 0.5,
            Quantity::MitmDetect { m } => mitm_detection_prob(*m),
            Quantity::PredictedSuccess { n, p_error, gamma } => {
                predicted_success(*n as f64, *p_error, *gamma)
            }
            Quantity::EccLogicalRate { distance, p } => logical_error_rate(*distance, *p),
        }
    }
}

/// Evaluate a closed form from its string id and a JSON parameter object,
/// e.g. `closed_form("intercept_detect", &json!({"m": 4}))`.
pub fn closed_form(id: &str, params: &serde_json::Value) -> Result<f64> {
    let mut object = match params {
        serde_json::Value::Object(map) => map.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        other => {
            return Err(AnalysisError::InvalidParams {
                id: id.into(),
                reason: format!("expected an object of parameters, got {other}"),
            })
        }
    };
    object.insert("id".into(), serde_json::Value::String(id.into()));
    let quantity: Quantity = serde_json::from_value(serde_json::Value::Object(object))
        .map_err(|e| {
            if e.to_string().contains("unknown variant") {
                AnalysisError::UnknownQuantity(id.into())
            } else {
                AnalysisError::InvalidParams { id: id.into(), reason: e.to_string() }
            }
        })?;
    Ok(quantity.value())
}

// ---------------------------------------------------------------------------
// Comparison suite
// ---------------------------------------------------------------------------

/// One closed-form quantity checked against its Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub quantity: String,
    pub params: String,
    pub closed_form: f64,
    pub simulated: EstimateWithCI,
    pub within_tolerance: bool,
}

/// Pass rule shared by the whole suite: agree within `max(3σ, 0.01)`.
pub fn within_tolerance(closed_form: f64, est: &EstimateWithCI) -> bool {
    (closed_form - est.point).abs() <= (3.0 * est.stderr).max(0.01)
}

fn make_row(quantity: &Quantity, params: String, est: EstimateWithCI) -> ComparisonRow {
    let cf = quantity.value();
    let pass = within_tolerance(cf, &est);
    ComparisonRow {
        quantity: quantity.id().into(),
        params,
        closed_form: cf,
        simulated: est,
        within_tolerance: pass,
    }
}

/// Integer-count Monte Carlo over independent per-trial streams. Each trial
/// contributes (successes, attempts); the sums are order-independent, so the
/// result does not depend on the rayon thread count.
fn mc_counts<F>(trials: usize, master_seed: u64, stream_base: u64, trial_fn: F) -> (u64, u64)
where
    F: Fn(&mut SessionRng) -> (u64, u64) + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SessionRng::for_trial(master_seed, stream_base + i as u64);
            trial_fn(&mut rng)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

const STREAM_STRIDE: u64 = 1 << 33;

/// Count of decoy comparisons that matched, recovered from the outcome's
/// error rate (the rate is mismatches / comparisons exactly).
fn decoy_passes(outcome: &SessionOutcome, comparisons: usize) -> u64 {
    let mismatches = (outcome.decoy_error_rate * comparisons as f64).round() as u64;
    comparisons as u64 - mismatches
}

/// Run the fixed comparison grid: impersonation at k ∈ {4,8},
/// intercept-and-resend at m ∈ {1,4,8} × θ₀ ∈ {360°,45°,137°},
/// entangle-and-measure at F ∈ {0.6,0.8,1.0}, three DoS weight vectors,
/// man-in-the-middle at m ∈ {2,6,10}, and the distance-3 repetition code.
pub fn comparison_suite(master_seed: u64, trials_per_row: usize) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    let mut stream_base = 0u64;
    let mut next_base = || {
        let base = stream_base;
        stream_base += STREAM_STRIDE;
        base
    };

    for k in [4usize, 8] {
        let config = ProtocolConfig::noiseless(4, 0, k, 2, 0);
        let quantity = Quantity::ImpersonateAliceDetect { k };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let trial = adversary::impersonate_alice_session(&config, rng).expect("valid config");
            (
                u64::from(trial.outcome.status == SessionStatus::AbortedAuthA),
                1,
            )
        });
        rows.push(make_row(
            &quantity,
            format!("k={k}"),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    for k in [4usize, 8] {
        let config = ProtocolConfig::noiseless(4, 0, k, 2, 0);
        let quantity = Quantity::ImpersonateBobAccept { k };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let trial = adversary::impersonate_bob_session(&config, rng).expect("valid config");
            (u64::from(trial.outcome.r_match == Some(true)), 1)
        });
        rows.push(make_row(
            &quantity,
            format!("k={k}"),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    for k in [4usize, 8] {
        let config = ProtocolConfig::noiseless(4, 0, k, 2, 0);
        let quantity = Quantity::IdB1Guess { k };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let trial = adversary::impersonate_bob_session(&config, rng).expect("valid config");
            (u64::from(trial.eve.guessed_id_b1 == trial.true_id_b1), 1)
        });
        rows.push(make_row(
            &quantity,
            format!("k={k}"),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    for m in [1usize, 4, 8] {
        for theta0 in [360u16, 45, 137] {
            let config = ProtocolConfig::noiseless(4, 0, 4, m, 0);
            let quantity = Quantity::InterceptDetect { m };
            let attack = AttackModel::InterceptResend { theta0: Some(theta0) };
            let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
                let outcome = attack_trial(&config, &attack, rng);
                (
                    u64::from(outcome.status == SessionStatus::AbortedSecurityCheck),
                    1,
                )
            });
            rows.push(make_row(
                &quantity,
                format!("m={m} theta0={theta0}"),
                EstimateWithCI::from_counts(hits, total),
            ));
        }
    }

    for fidelity in [0.6, 0.8, 1.0] {
        let m = 8usize;
        let config = ProtocolConfig::noiseless(4, 0, 4, m, 0);
        let quantity = Quantity::EntangleDecoyPass { fidelity };
        let attack = AttackModel::EntangleMeasure { fidelity };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let outcome = attack_trial(&config, &attack, rng);
            (decoy_passes(&outcome, m), m as u64)
        });
        rows.push(make_row(
            &quantity,
            format!("F={fidelity}"),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    let dos_vectors: [[f64; 4]; 3] = [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.5, 0.5, 0.5, 0.5],
    ];
    for weights in dos_vectors {
        let m = 8usize;
        let config = ProtocolConfig::noiseless(4, 0, 4, m, 0);
        let quantity = Quantity::DosDecoyPass { weights };
        let attack = AttackModel::Dos { weights };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let outcome = attack_trial(&config, &attack, rng);
            (decoy_passes(&outcome, m), m as u64)
        });
        rows.push(make_row(
            &quantity,
            format!("w=({},{},{},{})", weights[0], weights[1], weights[2], weights[3]),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    for m in [2usize, 6, 10] {
        let config = ProtocolConfig::noiseless(4, 0, 4, m, 0);
        let quantity = Quantity::MitmDetect { m };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let outcome = attack_trial(&config, &AttackModel::Mitm, rng);
            (
                u64::from(outcome.status == SessionStatus::AbortedSecurityCheck),
                1,
            )
        });
        rows.push(make_row(
            &quantity,
            format!("m={m}"),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    {
        let (distance, p) = (3usize, 0.1f64);
        let quantity = Quantity::EccLogicalRate { distance, p };
        let (hits, total) = mc_counts(trials_per_row, master_seed, next_base(), |rng| {
            let outcomes: Vec<u8> = (0..distance).map(|_| u8::from(rng.chance(p))).collect();
            let decoded = crate::ecc::decode_majority(&outcomes).expect("odd distance");
            (u64::from(decoded == 1), 1)
        });
        rows.push(make_row(
            &quantity,
            format!("d={distance} p={p}"),
            EstimateWithCI::from_counts(hits, total),
        ));
    }

    Ok(rows)
}

/// One session with fresh identities and message, for detection statistics.
fn attack_trial(
    config: &ProtocolConfig,
    attack: &AttackModel,
    rng: &mut SessionRng,
) -> SessionOutcome {
    let identities = PartyIdentities::random(config.k, rng);
    let message = BitString::random(config.n, rng);
    SessionSetup::new(config, &identities)
        .attack(attack.clone())
        .run(&message, rng)
        .expect("suite configurations are valid")
}

// ---------------------------------------------------------------------------
// Channel-length sweep
// ---------------------------------------------------------------------------

/// Estimate transmission success for each channel length by running
/// `trials` single-qubit transmissions per point.
pub fn sweep_channel_length(
    lengths: &[usize],
    channel: &ChannelModel,
    bit: u8,
    theta: u16,
    trials: usize,
    master_seed: u64,
) -> Result<Vec<(usize, EstimateWithCI)>> {
    {
        let mut sorted: Vec<usize> = lengths.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != lengths.len() {
            return Err(AnalysisError::InvalidParams {
                id: "sweep".into(),
                reason: "channel lengths must be distinct".into(),
            });
        }
    }
    lengths
        .iter()
        .enumerate()
        .map(|(idx, &n_gates)| {
            let ch = ChannelModel { n_gates, ..*channel };
            let (hits, total) = mc_counts(
                trials,
                master_seed,
                idx as u64 * STREAM_STRIDE,
                |rng| {
                    let out = transmit_bit(bit, theta as f64, &ch, rng).expect("valid channel");
                    (u64::from(out == bit), 1)
                },
            );
            Ok((n_gates, EstimateWithCI::from_counts(hits, total)))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// A comparison report plus the effective configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    quantity: String,
    params: String,
    closed_form: f64,
    point: f64,
    stderr: f64,
    ci_low: f64,
    ci_high: f64,
    n_trials: usize,
    pass: bool,
}

impl From<&ComparisonRow> for CsvRow {
    fn from(row: &ComparisonRow) -> Self {
        CsvRow {
            quantity: row.quantity.clone(),
            params: row.params.clone(),
            closed_form: row.closed_form,
            point: row.simulated.point,
            stderr: row.simulated.stderr,
            ci_low: row.simulated.ci95.0,
            ci_high: row.simulated.ci95.1,
            n_trials: row.simulated.n_trials,
            pass: row.within_tolerance,
        }
    }
}

impl From<CsvRow> for ComparisonRow {
    fn from(row: CsvRow) -> Self {
        ComparisonRow {
            quantity: row.quantity,
            params: row.params,
            closed_form: row.closed_form,
            simulated: EstimateWithCI {
                point: row.point,
                stderr: row.stderr,
                n_trials: row.n_trials,
                ci95: (row.ci_low, row.ci_high),
            },
            within_tolerance: row.pass,
        }
    }
}

/// Serialize a report. CSV carries the configuration echo as a leading
/// `# config: {...}` comment line; JSON embeds it as a field.
pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        ReportFormat::Csv => {
            let mut out = String::new();
            if let Some(config) = &report.config {
                out.push_str(&format!("# config: {}\n", serde_json::to_string(config)?));
            }
            let mut writer = csv::Writer::from_writer(Vec::new());
            for row in &report.rows {
                writer.serialize(CsvRow::from(row))?;
            }
            let bytes = writer
                .into_inner()
                .map_err(|e| AnalysisError::MalformedReport(e.to_string()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
            Ok(out)
        }
    }
}

/// Write a report to a file.
pub fn write_report(report: &Report, format: ReportFormat, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, emit_report(report, format)?)?;
    Ok(())
}

/// Parse a report previously produced by [`emit_report`].
pub fn parse_report(text: &str, format: ReportFormat) -> Result<Report> {
    match format {
        ReportFormat::Json => Ok(serde_json::from_str(text)?),
        ReportFormat::Csv => {
            let mut config = None;
            let mut body = String::new();
            for line in text.lines() {
                if let Some(rest) = line.strip_prefix("# config: ") {
                    config = Some(serde_json::from_str(rest)?);
                } else {
                    body.push_str(line);
                    body.push('\n');
                }
            }
            let mut reader = csv::Reader::from_reader(body.as_bytes());
            let rows = reader
                .deserialize::<CsvRow>()
                .map(|r| r.map(ComparisonRow::from))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(Report { config, rows })
        }
    }
}
