//! Command-line front end. [`run`] parses arguments, resolves parameters and
//! dispatches to the experiment drivers; the `fdmimo` binary is a thin wrapper.
//!
//! Parameter precedence, lowest first: built-in defaults, `--config` file,
//! `FDMIMO_*` environment variables, `--set key=value`, named flags.
//!
//! Exit codes: 0 success, 1 a validation check failed, 2 usage or config error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{standard_probes, LimitReport};
use crate::error::{Error, Result};
use crate::geometry::{drop_users, CellLattice};
use crate::linkbudget::{assemble_link_budget, random_link_budget, LinkBudget};
use crate::montecarlo::{
    run_experiment, sweep_bits, write_sweep_csv, Aggregation, DuplexMode, RunOptions, SqinrReport,
};
use crate::oracle::{
    empirical_sqinr, filter_moments, reference_scenario, reference_scenario_full_resolution, OracleOptions,
};
use crate::params::{Quantizer, Resolution, SystemParams};
use crate::sqinr::{sinr_hd_full_res, sqinr_hardening};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "fdmimo", version, about = "Full-duplex massive-MIMO uplink simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML parameter file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Parameter override `key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// SI transmit power P_SI in watts.
    #[arg(long)]
    pub si_power: Option<f64>,
    /// SI channel power μ_SI² in dB.
    #[arg(long, allow_negative_numbers = true)]
    pub si_gain_db: Option<f64>,
    /// BS antennas N_a.
    #[arg(long)]
    pub antennas: Option<usize>,
    /// Uplink users per cell.
    #[arg(long)]
    pub ul_users: Option<usize>,
    /// Downlink users per cell K_d.
    #[arg(long)]
    pub dl_users: Option<usize>,
    /// BS antenna gain in dB.
    #[arg(long, allow_negative_numbers = true)]
    pub antenna_gain_db: Option<f64>,
    /// Coherence tile N_c in symbols.
    #[arg(long)]
    pub coherence_tile: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-cell average SQINR CDF over user drops (cdf.csv).
    SimulateCdf {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10_000)]
        drops: usize,
        /// cell-mean | per-user
        #[arg(long, default_value = "cell-mean")]
        aggregation: Aggregation,
        /// full | half
        #[arg(long, default_value = "full")]
        duplex: DuplexMode,
    },
    /// Spectral efficiency versus converter resolution on shared drops (sweep.csv).
    SweepBits {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10_000)]
        drops: usize,
        /// Comma-separated resolutions; `full` for infinite resolution.
        #[arg(long, default_value = "1,2,3,4,5,full")]
        bits: String,
        #[arg(long, default_value = "cell-mean")]
        aggregation: Aggregation,
    },
    /// Full-duplex versus half-duplex on the same drops (hd_baseline.csv).
    HdBaseline {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 10_000)]
        drops: usize,
    },
    /// Convergence probes of the closed form toward its limits (asymptotics.csv).
    Asymptotics {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Oracle, identity and limit checks (validate.csv); exit 1 on failure.
    #[command(alias = "validate")]
    ValidateOracle {
        #[command(flatten)]
        common: CommonArgs,
        /// Fewer samples and looser tolerances.
        #[arg(long)]
        quick: bool,
    },
    /// Print the resolved parameters as TOML.
    PrintConfig {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Re-run the job recorded in a manifest.
    Rerun {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// A fully resolved job: everything needed to reproduce its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    SimulateCdf {
        drops: usize,
        aggregation: Aggregation,
        duplex: DuplexMode,
    },
    SweepBits {
        drops: usize,
        bits: Vec<Resolution>,
        aggregation: Aggregation,
    },
    HdBaseline {
        drops: usize,
    },
    Asymptotics,
    ValidateOracle {
        quick: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub job: Job,
    pub params: SystemParams,
    pub seed: u64,
    pub tool_version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(File::open(path)?)?)
    }
}

/// Applies config file, environment, `--set` and named flags over the defaults.
pub fn resolve_params<I>(common: &CommonArgs, env: I) -> Result<SystemParams>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut p = match &common.config {
        Some(path) => SystemParams::load(path)?,
        None => SystemParams::default(),
    };
    p.apply_env(env)?;
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--set expects key=value, got `{kv}`")))?;
        p.set(k.trim(), v.trim())?;
    }
    if let Some(v) = common.si_power {
        p.si_power_w = v;
    }
    if let Some(v) = common.si_gain_db {
        p.si_channel_gain_db = v;
    }
    if let Some(v) = common.antennas {
        p.num_antennas = v;
    }
    if let Some(v) = common.ul_users {
        p.users_ul_per_cell = v;
    }
    if let Some(v) = common.dl_users {
        p.users_dl_per_cell = v;
    }
    if let Some(v) = common.antenna_gain_db {
        p.bs_antenna_gain_db = v;
    }
    if let Some(v) = common.coherence_tile {
        p.coherence_tile = v;
    }
    p.validate()?;
    Ok(p)
}

/// Parses a comma-separated resolution list, dropping repeats with a warning.
pub fn parse_bits_list(s: &str) -> Result<Vec<Resolution>> {
    let mut out: Vec<Resolution> = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let r: Resolution = item.parse()?;
        if out.contains(&r) {
            eprintln!("warning: duplicate bits entry `{item}` ignored");
        } else {
            out.push(r);
        }
    }
    if out.is_empty() {
        return Err(Error::Usage("--bits is empty".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    ReportOnly,
}

impl CheckStatus {
    fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::ReportOnly => "report-only",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub predicted: f64,
    pub empirical: f64,
    pub relative_error: f64,
    pub tolerance: Option<f64>,
    pub status: CheckStatus,
}

impl ValidationCheck {
    fn compare(name: &str, predicted: f64, empirical: f64, tolerance: f64) -> Self {
        let relative_error = (empirical - predicted).abs() / predicted.abs();
        ValidationCheck {
            name: name.to_string(),
            predicted,
            empirical,
            relative_error,
            tolerance: Some(tolerance),
            status: if relative_error <= tolerance {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
        }
    }

    fn from_limit(r: &LimitReport) -> Self {
        let last = r.probe_values.last().map_or(f64::NAN, |p| p.1);
        ValidationCheck {
            name: format!("limit-{}", r.limit.name()),
            predicted: r.limit_value,
            empirical: last,
            relative_error: r.relative_gap,
            tolerance: r.limit.tolerance(),
            status: match (r.asserted, r.converged) {
                (false, _) => CheckStatus::ReportOnly,
                (true, true) => CheckStatus::Pass,
                (true, false) => CheckStatus::Fail,
            },
        }
    }
}

/// Largest relative deviation of the hardening SQINR from the full-resolution
/// expressions over `count` random budgets: `(vs. full-resolution SE form,
/// vs. half-duplex SINR with INR = 0)`.
pub fn reduction_identity_errors(count: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut fd, mut hd): (f64, f64) = (0.0, 0.0);
    for _ in 0..count {
        let mut lb = random_link_budget(&mut rng);
        lb.uplink = Quantizer::full();
        lb.downlink = Quantizer::full();
        for k in 0..lb.users_in_cell_of_interest() {
            let closed = sqinr_hardening(&lb, k)?.sqinr;
            let reduced = crate::asymptotics::full_resolution_sqinr(&lb, k)?;
            fd = fd.max((closed - reduced).abs() / reduced);
        }
        lb.inr = 0.0;
        for k in 0..lb.users_in_cell_of_interest() {
            let closed = sqinr_hardening(&lb, k)?.sqinr;
            let eq = sinr_hd_full_res(&lb, k)?;
            hd = hd.max((closed - eq).abs() / eq);
        }
    }
    Ok((fd, hd))
}

fn drop_budget(params: &SystemParams, seed: u64) -> Result<LinkBudget> {
    let lattice = CellLattice::from_params(params);
    assemble_link_budget(&drop_users(&lattice, params, seed, 0)?, params)
}

/// Limit probes on drop 0 of `params`, user 0.
pub fn limit_probes(params: &SystemParams, seed: u64) -> Result<Vec<LimitReport>> {
    standard_probes(&drop_budget(params, seed)?, 0)
}

/// The full validation suite. `quick` uses roughly a fifth of the samples
/// and widens the sampled tolerances: filter moments 5 %, oracle 15 % with
/// quantization and 10 % at full resolution.
pub fn run_validation(params: &SystemParams, seed: u64, quick: bool) -> Result<Vec<ValidationCheck>> {
    let (draws, realizations, budgets) = if quick { (20_000, 2_000, 100) } else { (100_000, 10_000, 1000) };
    let (tol_moments, tol_oracle, tol_full) = if quick { (0.05, 0.15, 0.10) } else { (0.02, 0.10, 0.05) };
    let mut checks = Vec::new();

    let lb = reference_scenario(100);
    let na = lb.num_antennas as f64;
    let m = filter_moments(&lb, 0, draws, seed)?;
    checks.push(ValidationCheck::compare("filter-norm2", na, m.norm2, tol_moments));
    checks.push(ValidationCheck::compare("filter-norm4", na * na + na, m.norm4, tol_moments));
    checks.push(ValidationCheck::compare("filter-independent-gain", na, m.independent_gain, tol_moments));

    let opts = OracleOptions {
        seed,
        ..OracleOptions::default()
    };
    let lb = reference_scenario(128);
    let est = empirical_sqinr(&lb, 0, realizations, &opts)?;
    checks.push(ValidationCheck::compare(
        "oracle-hardening",
        sqinr_hardening(&lb, 0)?.sqinr,
        est.sqinr,
        tol_oracle,
    ));
    let lb = reference_scenario_full_resolution(128);
    let est = empirical_sqinr(&lb, 0, realizations, &opts)?;
    checks.push(ValidationCheck::compare(
        "oracle-full-resolution",
        sinr_hd_full_res(&lb, 0)?,
        est.sqinr,
        tol_full,
    ));

    let (fd, hd) = reduction_identity_errors(budgets, seed)?;
    for (name, err) in [("identity-full-resolution", fd), ("identity-half-duplex", hd)] {
        checks.push(ValidationCheck {
            name: name.into(),
            predicted: 0.0,
            empirical: err,
            relative_error: err,
            tolerance: Some(1e-12),
            status: if err <= 1e-12 { CheckStatus::Pass } else { CheckStatus::Fail },
        });
    }

    for r in limit_probes(params, seed)? {
        checks.push(ValidationCheck::from_limit(&r));
    }
    Ok(checks)
}

fn write_checks_csv(checks: &[ValidationCheck], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "predicted", "empirical", "relative_error", "tolerance", "status"])?;
    for c in checks {
        w.write_record([
            c.name.clone(),
            c.predicted.to_string(),
            c.empirical.to_string(),
            c.relative_error.to_string(),
            c.tolerance.map_or(String::new(), |t| t.to_string()),
            c.status.label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn print_summary(label: &str, r: &SqinrReport) {
    println!(
        "{label:<6} se_gross={:.6} se_effective={:.6} p5={:.3} dB p50={:.3} dB p95={:.3} dB",
        r.se_gross,
        r.se_effective,
        r.quantile_db(0.05),
        r.quantile_db(0.5),
        r.quantile_db(0.95)
    );
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// What a job produced: files written into the output directory and whether
/// every asserted check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub outputs: Vec<String>,
    pub passed: bool,
}

/// Runs `job` and writes its CSV outputs into `out`. Does not write a manifest.
pub fn execute(job: &Job, params: &SystemParams, seed: u64, out: &Path) -> Result<Outcome> {
    params.validate()?;
    fs::create_dir_all(out)?;
    let mut passed = true;
    let outputs = match job {
        Job::SimulateCdf {
            drops,
            aggregation,
            duplex,
        } => {
            let opts = RunOptions {
                duplex: *duplex,
                aggregation: *aggregation,
            };
            let r = run_experiment(params, *drops, seed, opts)?;
            r.write_cdf_csv(create(&out.join("cdf.csv"))?)?;
            print_summary(&duplex.to_string(), &r);
            vec!["cdf.csv".to_string()]
        }
        Job::SweepBits {
            drops,
            bits,
            aggregation,
        } => {
            let opts = RunOptions {
                aggregation: *aggregation,
                ..RunOptions::default()
            };
            let rows = sweep_bits(params, bits, *drops, seed, opts)?;
            write_sweep_csv(&rows, create(&out.join("sweep.csv"))?)?;
            for (b, r) in &rows {
                print_summary(&b.to_string(), r);
            }
            vec!["sweep.csv".to_string()]
        }
        Job::HdBaseline { drops } => {
            let fd = run_experiment(params, *drops, seed, RunOptions::default())?;
            let hd = run_experiment(
                params,
                *drops,
                seed,
                RunOptions {
                    duplex: DuplexMode::Half,
                    ..RunOptions::default()
                },
            )?;
            let mut w = csv::Writer::from_writer(create(&out.join("hd_baseline.csv"))?);
            w.write_record(["mode", "se_gross", "se_effective", "p5_db", "p50_db", "p95_db"])?;
            for (mode, r) in [("full", &fd), ("half", &hd)] {
                w.write_record([
                    mode.to_string(),
                    r.se_gross.to_string(),
                    r.se_effective.to_string(),
                    r.quantile_db(0.05).to_string(),
                    r.quantile_db(0.5).to_string(),
                    r.quantile_db(0.95).to_string(),
                ])?;
                print_summary(mode, r);
            }
            w.flush()?;
            vec!["hd_baseline.csv".to_string()]
        }
        Job::Asymptotics => {
            let reports = limit_probes(params, seed)?;
            let mut w = csv::Writer::from_writer(create(&out.join("asymptotics.csv"))?);
            w.write_record(["limit", "limit_value", "last_driver", "last_probe", "relative_gap", "asserted", "converged"])?;
            println!("{:<26} {:>14} {:>14} {:>12} {:>9}", "limit", "limit value", "last probe", "gap", "asserted");
            for r in &reports {
                let (driver, value) = *r.probe_values.last().expect("non-empty schedule");
                w.write_record([
                    r.limit.name().to_string(),
                    r.limit_value.to_string(),
                    driver.to_string(),
                    value.to_string(),
                    r.relative_gap.to_string(),
                    r.asserted.to_string(),
                    r.converged.to_string(),
                ])?;
                println!(
                    "{:<26} {:>14.6e} {:>14.6e} {:>12.3e} {:>9}",
                    r.limit.name(),
                    r.limit_value,
                    value,
                    r.relative_gap,
                    if r.asserted { "yes" } else { "report" }
                );
                if let Some(g) = r.estimated_csi_gap {
                    println!("{:<26} estimated-CSI gap {g:.3e} (report-only)", "");
                }
            }
            w.flush()?;
            vec!["asymptotics.csv".to_string()]
        }
        Job::ValidateOracle { quick } => {
            let checks = run_validation(params, seed, *quick)?;
            println!(
                "{:<28} {:>14} {:>14} {:>11} {:>9} {:>11}",
                "check", "predicted", "empirical", "rel. error", "tol", "status"
            );
            for c in &checks {
                println!(
                    "{:<28} {:>14.6e} {:>14.6e} {:>11.3e} {:>9} {:>11}",
                    c.name,
                    c.predicted,
                    c.empirical,
                    c.relative_error,
                    c.tolerance.map_or("-".to_string(), |t| format!("{t:.0e}")),
                    c.status.label()
                );
            }
            passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
            write_checks_csv(&checks, &out.join("validate.csv"))?;
            vec!["validate.csv".to_string()]
        }
    };
    Ok(Outcome { outputs, passed })
}

/// Runs `job` and records a manifest next to its outputs.
pub fn execute_with_manifest(job: &Job, params: &SystemParams, seed: u64, out: &Path) -> Result<Outcome> {
    let outcome = execute(job, params, seed, out)?;
    let manifest = RunManifest {
        job: job.clone(),
        params: params.clone(),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        outputs: outcome.outputs.clone(),
    };
    let mut f = create(&out.join(MANIFEST_FILE))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f)?;
    f.flush()?;
    Ok(outcome)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(0) => Err(Error::Usage("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(e.to_string()))?
            .install(f),
    }
}

fn dispatch(command: Command) -> Result<bool> {
    let env = || std::env::vars();
    let (job, common) = match command {
        Command::PrintConfig { common } => {
            print!("{}", resolve_params(&common, env())?.to_toml_string());
            return Ok(true);
        }
        Command::Rerun { manifest, out, threads } => {
            let m = RunManifest::load(&manifest)?;
            let outcome = with_threads(threads, || execute_with_manifest(&m.job, &m.params, m.seed, &out))?;
            return Ok(outcome.passed);
        }
        Command::SimulateCdf {
            common,
            drops,
            aggregation,
            duplex,
        } => (
            Job::SimulateCdf {
                drops,
                aggregation,
                duplex,
            },
            common,
        ),
        Command::SweepBits {
            common,
            drops,
            bits,
            aggregation,
        } => (
            Job::SweepBits {
                drops,
                bits: parse_bits_list(&bits)?,
                aggregation,
            },
            common,
        ),
        Command::HdBaseline { common, drops } => (Job::HdBaseline { drops }, common),
        Command::Asymptotics { common } => (Job::Asymptotics, common),
        Command::ValidateOracle { common, quick } => (Job::ValidateOracle { quick }, common),
    };
    let params = resolve_params(&common, env())?;
    let outcome = with_threads(common.threads, || execute_with_manifest(&job, &params, common.seed, &common.out))?;
    Ok(outcome.passed)
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("error: validation failed");
            EXIT_VALIDATION
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
