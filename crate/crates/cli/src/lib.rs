//! Command implementations behind the `ghb` binary.

pub mod config;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ghb_core::fisher::{fisher_per_photon_curve, threshold_map, FisherOptions, PhotonReference};
use ghb_core::inference::{
    bootstrap_fisher, fit_rates, klyshko_calibrate, phase_from_coupler, BootstrapOptions, FitOptions, FixedMask,
};
use ghb_core::io;
use ghb_core::optimal::{optimal_state, qfi_curve};
use ghb_core::oracle::oracle_check;
use ghb_core::rates::{fringe_table, Provenance};
use ghb_core::Error;

pub use config::RunConfig;

/// Tolerance of the oracle agreement check.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NotHermitian { .. } | Error::NegativeEigenvalue { .. } | Error::StateSpaceOverflow { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "ghb", version, about = "Heralded photon-number-state interferometry")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sweep grid as `start:stop:step` (phase or efficiency, per command).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub grid: Option<String>,
    /// Leave the generation time out of CSV headers.
    #[arg(long, global = true)]
    pub no_header_timestamp: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// QFI against signal loss for every N-photon probe, plus the optimal envelope.
    QfiCurve(QfiArgs),
    /// Loss-optimal N-photon state at one efficiency.
    OptimalState(OptimalArgs),
    /// Modeled rate table for one herald outcome over a phase grid.
    Fringes(ProbeArgs),
    /// Fisher information per detected photon over a phase grid.
    Fisher(FisherArgs),
    /// Fit the rate model to a rate table.
    Fit(FitArgs),
    /// Monte-Carlo band on the Fisher curve of a fit.
    Bootstrap(BootstrapArgs),
    /// Klyshko-like efficiency calibration from joint distributions.
    Calibrate(DataArgs),
    /// Interferometer phase from coupler splitting ratios.
    PhaseMap(DataArgs),
    /// Maximum F_tilde over efficiency and overlap.
    ThresholdMap(ThresholdArgs),
    /// Compare the factorized models against the brute-force oracle.
    OracleCheck(OracleArgs),
}

fn parse_probe(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once(',').ok_or("expected h1,h2")?;
    Ok([
        a.trim().parse().map_err(|_| format!("bad h1 {a:?}"))?,
        b.trim().parse().map_err(|_| format!("bad h2 {b:?}"))?,
    ])
}

#[derive(Debug, Args)]
pub struct QfiArgs {
    #[arg(long)]
    pub photons: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OptimalArgs {
    #[arg(long)]
    pub photons: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// Herald outcome as `h1,h2`.
    #[arg(long, value_parser = parse_probe)]
    pub probe: Option<[usize; 2]>,
    /// Treat the sources as perfectly overlapping.
    #[arg(long)]
    pub indistinguishable: bool,
    #[arg(long)]
    pub max_outcome: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FisherArgs {
    #[command(flatten)]
    pub probe: ProbeArgs,
    #[arg(long)]
    pub postselect: bool,
    /// Divide by photons inside the interferometer instead of detected ones.
    #[arg(long)]
    pub inside: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Rate table CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub indistinguishable: bool,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fit result JSON.
    #[arg(long)]
    pub fit: Option<PathBuf>,
    #[arg(long)]
    pub n_sets: Option<usize>,
    #[arg(long, value_parser = parse_probe)]
    pub probe: Option<[usize; 2]>,
    #[arg(long)]
    pub postselect: bool,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_parser = parse_probe)]
    pub probe: Option<[usize; 2]>,
    #[arg(long, allow_hyphen_values = true)]
    pub overlap_grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub cases: Option<usize>,
}

impl Cli {
    pub fn command_name(&self) -> &'static str {
        match self.command {
            Command::QfiCurve(_) => "qfi-curve",
            Command::OptimalState(_) => "optimal-state",
            Command::Fringes(_) => "fringes",
            Command::Fisher(_) => "fisher",
            Command::Fit(_) => "fit",
            Command::Bootstrap(_) => "bootstrap",
            Command::Calibrate(_) => "calibrate",
            Command::PhaseMap(_) => "phase-map",
            Command::ThresholdMap(_) => "threshold-map",
            Command::OracleCheck(_) => "oracle-check",
        }
    }

    /// Configuration carried by the flags alone.
    fn flag_config(&self) -> RunConfig {
        let mut c = RunConfig {
            seed: self.seed,
            grid: self.grid.clone(),
            ..RunConfig::default()
        };
        let indistinguishable = |flag: bool| flag.then_some(false);
        match &self.command {
            Command::QfiCurve(a) => c.photons = a.photons,
            Command::OptimalState(a) => {
                c.photons = a.photons;
                c.eta = a.eta;
            }
            Command::Fringes(a) => {
                c.probe = a.probe;
                c.distinguishable = indistinguishable(a.indistinguishable);
                c.max_outcome = a.max_outcome;
            }
            Command::Fisher(a) => {
                c.probe = a.probe.probe;
                c.distinguishable = indistinguishable(a.probe.indistinguishable);
                c.max_outcome = a.probe.max_outcome;
                c.postselect = a.postselect.then_some(true);
                c.reference = a.inside.then_some(PhotonReference::InsideInterferometer);
            }
            Command::Fit(a) => {
                c.data = a.data.clone();
                c.distinguishable = indistinguishable(a.indistinguishable);
            }
            Command::Bootstrap(a) => {
                c.data = a.data.clone();
                c.fit = a.fit.clone();
                c.n_sets = a.n_sets;
                c.probe = a.probe;
                c.postselect = a.postselect.then_some(true);
            }
            Command::Calibrate(a) | Command::PhaseMap(a) => c.data = a.data.clone(),
            Command::ThresholdMap(a) => {
                c.lambda = a.lambda;
                c.probe = a.probe;
                c.overlap_grid = a.overlap_grid.clone();
            }
            Command::OracleCheck(a) => c.cases = a.cases,
        }
        c
    }

    /// File values overridden by flags, validated.
    pub fn effective_config(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => RunConfig::from_json(&fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        let cfg = file.merged(self.flag_config());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs the command, writing its output to `--out` or `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.effective_config()?;
    let mut buf: Vec<u8> = Vec::new();
    let outcome = execute(cli, &cfg, &mut buf);
    // partial output of a numerical failure is still written
    if outcome.is_ok() || matches!(outcome, Err(CliError::Numerical(_))) {
        match &cli.out {
            Some(path) => fs::write(path, &buf)?,
            None => stdout.write_all(&buf)?,
        }
    }
    outcome
}

fn fisher_options(cfg: &RunConfig) -> FisherOptions {
    FisherOptions {
        postselect: cfg.postselect.unwrap_or(false),
        distinguishable: cfg.distinguishable.unwrap_or(true),
        reference: cfg.reference.unwrap_or_default(),
        max_outcome: cfg.max_outcome,
        ..FisherOptions::default()
    }
}

const PHASE_GRID: &str = "-pi:pi:0.05pi";

/// `cfg` with the defaults the command will use filled in, for the header.
fn resolved(command: &Command, cfg: &RunConfig) -> RunConfig {
    let mut r = cfg.clone();
    let phase_command = matches!(
        command,
        Command::Fringes(_) | Command::Fisher(_) | Command::Bootstrap(_)
    );
    if phase_command || matches!(command, Command::Fit(_)) {
        r.params = Some(cfg.params());
        r.distinguishable = Some(cfg.distinguishable.unwrap_or(true));
    }
    if phase_command {
        r.probe.get_or_insert([1, 1]);
        r.grid.get_or_insert_with(|| PHASE_GRID.into());
    }
    match command {
        Command::QfiCurve(_) => {
            r.photons = Some(cfg.photons());
            r.grid.get_or_insert_with(|| "0:1:0.01".into());
        }
        Command::OptimalState(_) => {
            r.photons = Some(cfg.photons());
            r.eta.get_or_insert(1.0);
        }
        Command::Fisher(_) => {
            r.postselect.get_or_insert(false);
            r.reference.get_or_insert_with(PhotonReference::default);
        }
        Command::Fit(_) => {
            r.fixed.get_or_insert_with(FixedMask::default);
        }
        Command::Bootstrap(_) => {
            r.seed = Some(cfg.seed());
            r.n_sets.get_or_insert(50);
            r.postselect.get_or_insert(false);
        }
        Command::ThresholdMap(_) => {
            r.probe.get_or_insert([7, 1]);
            r.lambda.get_or_insert(0.75);
            r.grid.get_or_insert_with(|| "0.5:1:0.01".into());
            r.overlap_grid.get_or_insert_with(|| "0.7:1:0.05".into());
        }
        Command::OracleCheck(_) => {
            r.seed = Some(cfg.seed());
            r.cases.get_or_insert(200);
        }
        _ => {}
    }
    r
}

fn execute(cli: &Cli, cfg: &RunConfig, out: &mut Vec<u8>) -> Result<(), CliError> {
    let effective = resolved(&cli.command, cfg);
    let header = io::header_comment(cli.command_name(), &effective.to_json(), !cli.no_header_timestamp);
    match &cli.command {
        Command::QfiCurve(_) => {
            let n = cfg.photons();
            let grid = cfg.grid_or("0:1:0.01")?;
            let rows = qfi_curve(n, &grid, true)?;
            out.write_all(header.as_bytes())?;
            writeln!(out, "eta_s,delta,h1,h2,Q,Q_per_detected_photon")?;
            for r in rows {
                let f = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{:.12e},{}",
                    r.eta_s,
                    r.delta.map(|d| d.to_string()).unwrap_or_else(|| "optimal".into()),
                    f(r.h1),
                    f(r.h2),
                    r.qfi,
                    r.qfi_per_detected_photon
                        .map(|q| format!("{q:.12e}"))
                        .unwrap_or_default()
                )?;
            }
        }
        Command::OptimalState(_) => {
            let eta = cfg.eta.unwrap_or(1.0);
            let res = optimal_state(cfg.photons(), eta, eta)?;
            io::write_json(out, &res)?;
        }
        Command::Fringes(_) => {
            let (h1, h2) = cfg.probe();
            let grid = cfg.grid_or(PHASE_GRID)?;
            let table = fringe_table(
                h1,
                h2,
                &grid,
                &cfg.params(),
                cfg.distinguishable.unwrap_or(true),
                cfg.max_outcome,
            )?;
            out.write_all(header.as_bytes())?;
            io::write_rate_table(out, &table)?;
        }
        Command::Fisher(_) => {
            let (h1, h2) = cfg.probe();
            let grid = cfg.grid_or(PHASE_GRID)?;
            let curve = fisher_per_photon_curve(h1, h2, &grid, &cfg.params(), fisher_options(cfg))?;
            out.write_all(header.as_bytes())?;
            io::write_fisher_curve(out, &curve)?;
        }
        Command::Fit(_) => {
            let data = io::read_rate_table(fs::File::open(cfg.required_path("data")?)?, Provenance::Measured)?;
            let mask = cfg.fixed.unwrap_or_default();
            let fit = fit_rates(
                &data,
                &cfg.params(),
                mask,
                cfg.distinguishable.unwrap_or(true),
                FitOptions::default(),
            )?;
            io::write_json(out, &fit)?;
            if !fit.converged {
                return Err(CliError::Numerical(format!(
                    "fit did not converge in {} iterations",
                    fit.iterations
                )));
            }
        }
        Command::Bootstrap(_) => {
            let data = io::read_rate_table(fs::File::open(cfg.required_path("data")?)?, Provenance::Measured)?;
            let fit = io::read_fit_result(&fs::read_to_string(cfg.required_path("fit")?)?)?;
            let mut options = BootstrapOptions::new(cfg.seed(), cfg.probe(), cfg.grid_or(PHASE_GRID)?);
            options.n_sets = cfg.n_sets.unwrap_or(50);
            options.fisher = fisher_options(cfg);
            let res = bootstrap_fisher(&fit, &data, &options)?;
            out.write_all(header.as_bytes())?;
            let summary = serde_json::json!({
                "seed": res.seed,
                "n_sets": res.n_sets,
                "dropped": res.dropped,
                "degenerate_band": res.degenerate_band,
                "parameter_mean": res.parameter_mean,
                "parameter_std": res.parameter_std,
            });
            writeln!(out, "# bootstrap: {summary}")?;
            io::write_fisher_curve(out, &res.curve)?;
        }
        Command::Calibrate(_) => {
            let dists = io::read_joint_distributions(fs::File::open(cfg.required_path("data")?)?)?;
            let res = klyshko_calibrate(&dists)?;
            io::write_json(out, &res)?;
        }
        Command::PhaseMap(_) => {
            let samples = io::read_coupler_samples(fs::File::open(cfg.required_path("data")?)?)?;
            let points = phase_from_coupler(&samples)?;
            out.write_all(header.as_bytes())?;
            io::write_phase_map(out, &points)?;
        }
        Command::ThresholdMap(_) => {
            let probe = cfg.probe.map(|[a, b]| (a, b)).unwrap_or((7, 1));
            let lambda = cfg.lambda.unwrap_or(0.75);
            let eta_grid = cfg.grid_or("0.5:1:0.01")?;
            if eta_grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0 + 1e-12)) {
                return Err(CliError::Validation(
                    "field `grid`: efficiencies must lie in (0, 1]".into(),
                ));
            }
            let eta_grid: Vec<f64> = eta_grid.into_iter().map(|e| e.min(1.0)).collect();
            let rows = threshold_map(probe.0, probe.1, lambda, &eta_grid, &cfg.overlap_grid()?)?;
            out.write_all(header.as_bytes())?;
            writeln!(out, "eta,M,max_F_tilde")?;
            for r in rows {
                writeln!(out, "{},{},{:.12e}", r.eta, r.overlap, r.max_f_tilde)?;
            }
        }
        Command::OracleCheck(_) => {
            let report = oracle_check(cfg.seed(), cfg.cases.unwrap_or(200))?;
            io::write_json(out, &report)?;
            if !report.passes(ORACLE_TOLERANCE) {
                return Err(CliError::Numerical(format!(
                    "oracle deviation above {ORACLE_TOLERANCE}: rate {:e}, qfi {:e}",
                    report.max_rate_deviation, report.max_qfi_deviation
                )));
            }
        }
    }
    Ok(())
}
