//! Command-line frontend.
//!
//! Subcommands: `run` a single session, `attack` detection experiments,
//! `suite` for the full closed-form comparison grid, `sweep` for
//! channel-length curves, `ecc` calculators, and `fit-gamma` for the
//! success-exponent fit. `--seed` (or the `QSDC_SEED` environment variable)
//! fully determines all outputs.
//!
//! Exit codes: 0 on completion — a session aborted because eavesdropping was
//! detected is a successful result — 1 on internal errors, 2 on usage errors.

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;
use std::path::PathBuf;

use crate::adversary::AttackModel;
use crate::analysis::{self, ComparisonRow, Quantity, Report, ReportFormat, Scenario};
use crate::ecc::{self, RepetitionCode};
use crate::noise::{ChannelModel, DeviceModel, ErrorKind};
use crate::protocol::{BitString, PartyIdentities, ProtocolConfig, SessionSetup, SessionStatus};
use crate::rng::SessionRng;

const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(
    name = "qsdc",
    version,
    about = "Simulator and analysis lab for single-basis QSDC with mutual authentication",
    subcommand_required = true,
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one protocol session and print the outcome
    Run(RunArgs),
    /// Estimate an attack's detection statistics over many sessions
    Attack(AttackArgs),
    /// Run the full closed-form comparison suite
    Suite(SuiteArgs),
    /// Sweep transmission success against channel length
    Sweep(SweepArgs),
    /// Repetition-code error-rate and threshold calculators
    Ecc(EccArgs),
    /// Fit the success exponent from (length, success) samples
    FitGamma(FitGammaArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Random seed; falls back to $QSDC_SEED, then 0
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON configuration file; flags take precedence over its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Message bits to transmit
    #[arg(long)]
    pub message: Option<String>,
    /// Alice's identity bits
    #[arg(long)]
    pub id_a: Option<String>,
    /// Bob's identity bits
    #[arg(long)]
    pub id_b: Option<String>,
    /// Encoding angle in degrees (1..=360); drawn randomly when omitted
    #[arg(long)]
    pub theta: Option<u16>,
    /// Alice's random masking bits r; drawn randomly when omitted
    #[arg(long)]
    pub r: Option<String>,
    /// Number of check bits
    #[arg(long, short = 'c', default_value_t = 0)]
    pub check_bits: usize,
    /// Number of decoy photons
    #[arg(long, short = 'm', default_value_t = 4)]
    pub decoys: usize,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Attack model: none, impersonate-alice, impersonate-bob,
    /// intercept-resend, entangle-measure, dos, mitm
    #[arg(long)]
    pub model: String,
    /// Number of sessions
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Decoy count
    #[arg(long, short = 'm', default_value_t = 4)]
    pub m: usize,
    /// Identity length
    #[arg(long, short = 'k', default_value_t = 4)]
    pub k: usize,
    /// Intercept basis angle θ₀ (intercept-resend; random when omitted)
    #[arg(long)]
    pub theta0: Option<u16>,
    /// Fidelity F (entangle-measure)
    #[arg(long)]
    pub fidelity: Option<f64>,
    /// Pauli weights w1,w2,w3,w4 (dos)
    #[arg(long)]
    pub weights: Option<String>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Monte Carlo trials per comparison row
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Channel lengths, comma separated
    #[arg(long, default_value = "100,150,200,250,300,350,400")]
    pub lengths: String,
    /// Bit value to transmit
    #[arg(long, default_value_t = 0)]
    pub bit: u8,
    /// Encoding angle in degrees
    #[arg(long, default_value_t = 7)]
    pub theta: u16,
    /// Transmissions per length
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Error kind: bit-flip, amplitude-damping, depolarizing
    #[arg(long, default_value = "bit-flip")]
    pub noise: String,
    /// Per-gate error probability
    #[arg(long, default_value_t = 0.001)]
    pub gate_error: f64,
    /// Readout error probability
    #[arg(long, default_value_t = 0.0)]
    pub readout: f64,
    /// Relaxation time T1 in microseconds
    #[arg(long, default_value_t = 100.0)]
    pub t1: f64,
    /// Fit γ from the sweep and print it
    #[arg(long, default_value_t = true)]
    pub fit: bool,
}

#[derive(Debug, Args)]
pub struct EccArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Code distance (odd)
    #[arg(long, default_value_t = 3)]
    pub distance: usize,
    /// Physical flip probability
    #[arg(long)]
    pub p: f64,
    /// Also print the longest channel meeting this success threshold
    #[arg(long)]
    pub success_threshold: Option<f64>,
    /// γ for the channel-length bound
    #[arg(long, default_value_t = 0.18)]
    pub gamma: f64,
    /// Per-gate error for the channel-length bound
    #[arg(long, default_value_t = 0.001)]
    pub p_error: f64,
}

#[derive(Debug, Args)]
pub struct FitGammaArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// CSV file with columns n,success
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Generate a synthetic sweep from this γ₀ instead of reading a file
    #[arg(long)]
    pub gamma0: Option<f64>,
    /// Per-gate error probability of the model being fitted
    #[arg(long, default_value_t = 0.001)]
    pub p_error: f64,
    /// Trials per synthetic point
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
}

/// Optional JSON configuration document mirroring the scenario field names.
#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    config: Option<ProtocolConfig>,
    identities: Option<PartyIdentities>,
    attack: Option<AttackModel>,
    channel: Option<ChannelModel>,
    ecc: Option<RepetitionCode>,
    trials: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Internal(String),
}

impl From<analysis::AnalysisError> for CliError {
    fn from(e: analysis::AnalysisError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<crate::protocol::ProtocolError> for CliError {
    fn from(e: crate::protocol::ProtocolError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Run a parsed command line; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Attack(args) => cmd_attack(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Ecc(args) => cmd_ecc(args),
        Command::FitGamma(args) => cmd_fit_gamma(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn resolve_seed(explicit: Option<u64>) -> u64 {
    explicit
        .or_else(|| {
            std::env::var("QSDC_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(DEFAULT_SEED)
}

fn load_config_file(path: &Option<PathBuf>) -> CliResult<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("malformed config {}: {e}", p.display())))
        }
    }
}

fn parse_bits(label: &str, s: &str) -> CliResult<BitString> {
    s.parse()
        .map_err(|e| CliError::Usage(format!("invalid {label}: {e}")))
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let file = load_config_file(&args.common.config)?;

    let identities = match (&args.id_a, &args.id_b) {
        (Some(a), Some(b)) => PartyIdentities::new(parse_bits("id-a", a)?, parse_bits("id-b", b)?),
        (None, None) => file
            .identities
            .clone()
            .ok_or_else(|| CliError::Usage("provide --id-a/--id-b or a config file".into()))?,
        _ => return Err(CliError::Usage("provide both --id-a and --id-b".into())),
    };
    let message = match &args.message {
        Some(m) => parse_bits("message", m)?,
        None => return Err(CliError::Usage("--message is required".into())),
    };

    let config = file.config.clone().unwrap_or(ProtocolConfig {
        n: message.len(),
        c: args.check_bits,
        k: identities.id_a.len(),
        m: args.decoys,
        decoy_error_threshold: 0.0,
        auth_error_threshold: 0.0,
        check_bit_error_threshold: 0.0,
        seed,
    });

    let mut setup = SessionSetup::new(&config, &identities);
    if let Some(attack) = file.attack.clone() {
        setup = setup.attack(attack);
    }
    setup.channel = file.channel;
    setup.ecc = file.ecc;
    if let Some(theta) = args.theta {
        setup = setup.force_theta(theta);
    }
    if let Some(r) = &args.r {
        setup = setup.force_r(parse_bits("r", r)?);
    }

    let mut rng = SessionRng::new(seed);
    let outcome = setup.run(&message, &mut rng)?;

    match outcome.status {
        SessionStatus::Delivered => println!(
            "Delivered M={}",
            outcome.recovered_message.as_ref().expect("delivered")
        ),
        status => println!("Aborted: {status:?} (decoy error rate {:.4})", outcome.decoy_error_rate),
    }
    if let Some(path) = &args.common.out {
        let doc = serde_json::to_string_pretty(&outcome)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(path, doc)?;
        println!("transcript written to {}", path.display());
    }
    Ok(())
}

fn parse_weights(s: &str) -> CliResult<[f64; 4]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("invalid weights: {e}")))?;
    if parts.len() != 4 {
        return Err(CliError::Usage("weights need exactly four components".into()));
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

fn cmd_attack(args: AttackArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let file = load_config_file(&args.common.config)?;

    let attack = match args.model.as_str() {
        "none" => AttackModel::None,
        "impersonate-alice" => AttackModel::ImpersonateAlice,
        "impersonate-bob" => AttackModel::ImpersonateBob,
        "intercept-resend" => AttackModel::InterceptResend { theta0: args.theta0 },
        "entangle-measure" => AttackModel::EntangleMeasure {
            fidelity: args
                .fidelity
                .ok_or_else(|| CliError::Usage("entangle-measure needs --fidelity".into()))?,
        },
        "dos" => AttackModel::Dos {
            weights: parse_weights(
                args.weights
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("dos needs --weights".into()))?,
            )?,
        },
        "mitm" => AttackModel::Mitm,
        other => return Err(CliError::Usage(format!("unknown attack model {other:?}"))),
    };
    attack
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let config = file.config.clone().unwrap_or(ProtocolConfig::noiseless(
        4,
        0,
        args.k,
        args.m,
        seed,
    ));
    let identities = file.identities.clone().unwrap_or_else(|| {
        let mut rng = SessionRng::for_trial(seed, u64::MAX);
        PartyIdentities::random(config.k, &mut rng)
    });
    let trials = file.trials.unwrap_or(args.trials);
    let scenario = Scenario {
        config: config.clone(),
        identities,
        attack: attack.clone(),
        channel: file.channel,
        ecc: file.ecc,
        trials,
    };
    let outcomes = analysis::run_trials(&scenario, seed)?;

    let (quantity, est) = match &attack {
        AttackModel::None => {
            let est = analysis::estimate(&outcomes, |o| o.status == SessionStatus::Delivered)?;
            println!(
                "honest delivery rate: {:.5} ± {:.5} over {trials} sessions",
                est.point, est.stderr
            );
            report_out(&args.common, &scenario, &[])?;
            return Ok(());
        }
        AttackModel::ImpersonateAlice => (
            Quantity::ImpersonateAliceDetect { k: config.k },
            analysis::estimate(&outcomes, |o| o.status == SessionStatus::AbortedAuthA)?,
        ),
        AttackModel::ImpersonateBob => (
            Quantity::ImpersonateBobAccept { k: config.k },
            analysis::estimate(&outcomes, |o| o.r_match == Some(true))?,
        ),
        AttackModel::InterceptResend { .. } => (
            Quantity::InterceptDetect { m: config.m },
            analysis::estimate(&outcomes, |o| o.status == SessionStatus::AbortedSecurityCheck)?,
        ),
        AttackModel::EntangleMeasure { fidelity } => (
            Quantity::EntangleDetect { fidelity: *fidelity, m: config.m },
            analysis::estimate(&outcomes, |o| o.status == SessionStatus::AbortedSecurityCheck)?,
        ),
        AttackModel::Dos { weights } => (
            Quantity::DosDetect { weights: *weights, m: config.m },
            analysis::estimate(&outcomes, |o| o.status == SessionStatus::AbortedSecurityCheck)?,
        ),
        AttackModel::Mitm => (
            Quantity::MitmDetect { m: config.m },
            analysis::estimate(&outcomes, |o| o.status == SessionStatus::AbortedSecurityCheck)?,
        ),
    };

    let closed = quantity.value();
    let pass = analysis::within_tolerance(closed, &est);
    println!(
        "{} [{}]: simulated {:.5} ± {:.5}, closed form {:.5} -> {}",
        quantity.id(),
        args.model,
        est.point,
        est.stderr,
        closed,
        if pass { "PASS" } else { "FAIL" }
    );
    let row = ComparisonRow {
        quantity: quantity.id().into(),
        params: format!("model={} k={} m={}", args.model, config.k, config.m),
        closed_form: closed,
        simulated: est,
        within_tolerance: pass,
    };
    report_out(&args.common, &scenario, &[row])?;
    Ok(())
}

fn report_out(common: &CommonArgs, scenario: &Scenario, rows: &[ComparisonRow]) -> CliResult<()> {
    let Some(path) = &common.out else {
        return Ok(());
    };
    let report = Report {
        config: Some(json!({
            "seed": resolve_seed(common.seed),
            "scenario": scenario,
        })),
        rows: rows.to_vec(),
    };
    analysis::write_report(&report, common.format, path)?;
    println!("report written to {}", path.display());
    Ok(())
}

fn cmd_suite(args: SuiteArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let rows = analysis::comparison_suite(seed, args.trials)?;
    let mut failed = 0;
    for row in &rows {
        let verdict = if row.within_tolerance { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:<26} {:<28} closed {:.6} simulated {:.6} ± {:.6}",
            row.quantity, row.params, row.closed_form, row.simulated.point, row.simulated.stderr
        );
        if !row.within_tolerance {
            failed += 1;
        }
    }
    println!(
        "{} of {} comparisons within tolerance",
        rows.len() - failed,
        rows.len()
    );
    if let Some(path) = &args.common.out {
        let report = Report {
            config: Some(json!({"seed": seed, "trials": args.trials})),
            rows,
        };
        analysis::write_report(&report, args.common.format, path)?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let lengths: Vec<usize> = args
        .lengths
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("invalid lengths: {e}")))?;
    let error_kind = match args.noise.as_str() {
        "bit-flip" => ErrorKind::BitFlip,
        "amplitude-damping" => ErrorKind::AmplitudeDamping,
        "depolarizing" => ErrorKind::Depolarizing,
        other => return Err(CliError::Usage(format!("unknown noise kind {other:?}"))),
    };
    let channel = ChannelModel {
        n_gates: 0,
        error_kind,
        device: DeviceModel {
            gate_error: args.gate_error,
            readout_error: args.readout,
            t1_us: args.t1,
            ..DeviceModel::default()
        },
    };
    channel
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let points =
        analysis::sweep_channel_length(&lengths, &channel, args.bit, args.theta, args.trials, seed)?;

    let mut lines = String::from("n,point,stderr,ci_low,ci_high,n_trials\n");
    for (n, est) in &points {
        println!("n={n:<6} success {:.5} ± {:.5}", est.point, est.stderr);
        lines.push_str(&format!(
            "{n},{},{},{},{},{}\n",
            est.point, est.stderr, est.ci95.0, est.ci95.1, est.n_trials
        ));
    }
    if args.fit && points.len() >= 2 && args.gate_error > 0.0 {
        let samples: Vec<(f64, f64)> = points
            .iter()
            .filter(|(_, est)| est.point > 0.0)
            .map(|(n, est)| (*n as f64, est.point))
            .collect();
        match crate::noise::fit_gamma(&samples, args.gate_error) {
            Ok((gamma, rms)) => println!("fitted gamma = {gamma:.5} (log-domain RMS {rms:.3e})"),
            Err(e) => println!("gamma fit unavailable: {e}"),
        }
    }
    if let Some(path) = &args.common.out {
        match args.common.format {
            ReportFormat::Csv => std::fs::write(path, lines)?,
            ReportFormat::Json => {
                let doc: Vec<_> = points
                    .iter()
                    .map(|(n, est)| json!({"n": n, "estimate": est}))
                    .collect();
                std::fs::write(
                    path,
                    serde_json::to_string_pretty(&doc)
                        .map_err(|e| CliError::Internal(e.to_string()))?,
                )?;
            }
        }
        println!("sweep written to {}", path.display());
    }
    Ok(())
}

fn cmd_ecc(args: EccArgs) -> CliResult<()> {
    if args.distance % 2 == 0 || args.distance == 0 {
        return Err(CliError::Usage(format!(
            "distance {} must be odd and positive",
            args.distance
        )));
    }
    if !(0.0..=1.0).contains(&args.p) {
        return Err(CliError::Usage(format!("p = {} is not a probability", args.p)));
    }
    let rate = ecc::logical_error_rate(args.distance, args.p);
    println!("logical error rate (d={}, p={}): {rate:.6}", args.distance, args.p);
    let helps = ecc::threshold_check(args.p);
    println!(
        "distance-3 threshold check: p {} 1/3 -> repetition {}",
        if helps { "<" } else { ">=" },
        if helps { "helps" } else { "does not help" }
    );
    if let Some(threshold) = args.success_threshold {
        if !(0.0 < threshold && threshold <= 1.0) {
            return Err(CliError::Usage("success threshold must be in (0,1]".into()));
        }
        let n = ecc::max_channel_length(args.gamma, args.p_error, threshold);
        println!(
            "longest channel with success >= {threshold} at gamma={}, p_error={}: {n} gates",
            args.gamma, args.p_error
        );
    }
    Ok(())
}

fn cmd_fit_gamma(args: FitGammaArgs) -> CliResult<()> {
    let seed = resolve_seed(args.common.seed);
    let samples: Vec<(f64, f64)> = match (&args.input, args.gamma0) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)?;
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(text.as_bytes());
            let mut samples = Vec::new();
            for record in reader.deserialize::<(f64, f64)>() {
                let (n, success) =
                    record.map_err(|e| CliError::Usage(format!("bad sample row: {e}")))?;
                samples.push((n, success));
            }
            samples
        }
        (None, Some(gamma0)) => {
            let lengths = [100, 150, 200, 250, 300, 350, 400];
            let mut rng = SessionRng::new(seed);
            let sweep = crate::noise::synthetic_success_sweep(
                gamma0,
                args.p_error,
                &lengths,
                args.trials,
                &mut rng,
            );
            for (n, s) in &sweep {
                println!("n={n:<6} synthetic success {s:.5}");
            }
            sweep
        }
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --input or --gamma0".into(),
            ))
        }
    };
    let (gamma, rms) = crate::noise::fit_gamma(&samples, args.p_error)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    println!("fitted gamma = {gamma:.6} (log-domain RMS {rms:.3e})");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn weights_parsing() {
        assert_eq!(parse_weights("1,0,0,0").unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(
            parse_weights("0.5, 0.5, 0.5, 0.5").unwrap(),
            [0.5, 0.5, 0.5, 0.5]
        );
        assert!(parse_weights("1,2,3").is_err());
        assert!(parse_weights("a,b,c,d").is_err());
    }

    #[test]
    fn seed_resolution_prefers_explicit() {
        assert_eq!(resolve_seed(Some(9)), 9);
    }
}
