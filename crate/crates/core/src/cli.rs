//! Command-line front end. Exit codes: 0 on success, 1 for invalid input or
//! usage, 2 when the numbers themselves fail (infeasible model, singular
//! system, non-finite values).

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{default_gamma, Estimator, FitResult, SolverConfig};
use crate::gof::{empirical_null_quantiles, goodness_of_fit, write_acf_csv, write_ks_csv, Confidence, GofOptions};
use crate::harness::{
    cross_validate_gamma, fit_estimator, gamma_grid_around, mse_sweep, rsc_sweep, ExperimentConfig, DEFAULT_D2,
};
use crate::io::{bin_events, read_event_times, read_spike_file, write_spike_file};
use crate::likelihood::Statistics;
use crate::model::{ConstraintSet, GlmParameters, Link, SpikeTrain};
use crate::simulate::{rate_sequence, simulate, SimulationConfig};
use crate::spectral::{default_grid, lag_frequency, power_spectral_density};

#[derive(Parser, Debug)]
#[command(name = "selfexcite", version, about = "Sparse self-exciting binary GLMs: simulate, fit, validate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a spike train from parameters in JSON.
    Simulate(SimulateArgs),
    /// Estimate the history kernel from a spike file.
    Fit(FitArgs),
    /// Time-rescaling KS and ACF tests of a fit.
    Gof(GofArgs),
    /// Spectral density of a parameter or fit file.
    Psd(PsdArgs),
    /// Experiment sweeps driven by a JSON configuration.
    Bench {
        #[command(subcommand)]
        kind: BenchKind,
    },
}

#[derive(Subcommand, Debug)]
enum BenchKind {
    /// Median MSE against record length for each estimator.
    Mse(BenchArgs),
    /// Restricted strong convexity probes at the true kernel.
    Rsc(BenchArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Parameters JSON: {"mu": .., "theta": [..], "link": {"kind": "linear"}}.
    #[arg(long)]
    params: PathBuf,
    /// Simulation config JSON; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Seconds per bin.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Spike file, or event times with --events.
    spikes: PathBuf,
    /// Read one event time (seconds) per line and bin it.
    #[arg(long, requires_all = ["delta", "history"])]
    events: bool,
    /// Bin width for --events.
    #[arg(long)]
    delta: Option<f64>,
    /// History length p; re-splits a spike file's pre-history.
    #[arg(long)]
    history: Option<usize>,
}

impl InputArgs {
    fn load(&self) -> Result<SpikeTrain> {
        if self.events {
            let times = read_event_times(BufReader::new(File::open(&self.spikes)?))?;
            let (Some(delta), Some(p)) = (self.delta, self.history) else {
                return Err(Error::InvalidInput("--events needs --delta and --history".into()));
            };
            return bin_events(&times, delta, p, None);
        }
        let train = read_spike_file(BufReader::new(File::open(&self.spikes)?))?;
        match self.history {
            Some(p) if p != train.p() => train.with_history_len(p),
            _ => Ok(train),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum EstimatorArg {
    Ml,
    L1,
    Pomp,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum StatisticsArg {
    Bernoulli,
    Poisson,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value = "l1")]
    estimator: EstimatorArg,
    /// A number, `auto` (d2 sqrt(ln p / n)) or `cv` (two-fold search around auto).
    #[arg(long, default_value = "auto")]
    gamma: String,
    #[arg(long, default_value_t = DEFAULT_D2)]
    d2: f64,
    #[arg(long, default_value_t = 2)]
    folds: usize,
    #[arg(long, default_value_t = 3)]
    s_star: usize,
    /// linear, log or logistic:<C>.
    #[arg(long, default_value = "linear")]
    link: String,
    #[arg(long)]
    unconstrained: bool,
    #[arg(long)]
    estimate_baseline: bool,
    /// Known baseline (or the starting value with --estimate-baseline).
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pi_min: f64,
    #[arg(long, default_value_t = 0.49)]
    pi_max: f64,
    #[arg(long, value_enum, default_value = "bernoulli")]
    statistics: StatisticsArg,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GofArgs {
    #[command(flatten)]
    input: InputArgs,
    /// FitResult JSON written by `fit`.
    #[arg(long)]
    fit: PathBuf,
    #[arg(long, default_value = "0.95")]
    confidence: String,
    #[arg(long, default_value_t = 2)]
    max_lag: usize,
    /// Reference spike file whose rescaled intervals replace the exponential null.
    #[arg(long)]
    null: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PsdArgs {
    /// Parameters JSON or FitResult JSON.
    input: PathBuf,
    #[arg(long, default_value_t = 0.001)]
    delta: f64,
    #[arg(long, default_value_t = crate::spectral::DEFAULT_GRID_POINTS)]
    grid: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// ExperimentConfig JSON.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Gof(a) => cmd_gof(a),
        Command::Psd(a) => cmd_psd(a),
        Command::Bench { kind: BenchKind::Mse(a) } => cmd_bench(a, false),
        Command::Bench { kind: BenchKind::Rsc(a) } => cmd_bench(a, true),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let params: GlmParameters = read_json(&a.params)?;
    let mut config = match &a.config {
        Some(path) => read_json::<SimulationConfig>(path)?,
        None => {
            let n = a.n.ok_or_else(|| Error::InvalidInput("--n is required without --config".into()))?;
            SimulationConfig::new(n, 0)
        }
    };
    if let Some(n) = a.n {
        config.n = n;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    if let Some(b) = a.burn_in {
        config.burn_in = Some(b);
    }
    if let Some(d) = a.delta {
        config.delta = d;
    }
    let train = simulate(&params, &config)?;
    let mut w = create(&a.out, "spikes.txt")?;
    write_spike_file(&train, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let train = a.input.load()?;
    let link: Link = a.link.parse()?;
    let constraints = if a.unconstrained {
        ConstraintSet::unconstrained()
    } else {
        ConstraintSet::new(a.pi_min, a.pi_max)?
    };
    if a.mu.is_none() && !a.estimate_baseline {
        return Err(Error::InvalidInput("pass --mu <baseline> or --estimate-baseline".into()));
    }
    let mut solver = SolverConfig {
        baseline: a.mu,
        estimate_baseline: a.estimate_baseline,
        statistics: match a.statistics {
            StatisticsArg::Bernoulli => Statistics::Bernoulli,
            StatisticsArg::Poisson => Statistics::Poisson,
        },
        ..SolverConfig::default()
    };
    if let Some(m) = a.max_iters {
        solver.max_iters = m;
    }
    let estimator = match a.estimator {
        EstimatorArg::Ml => Estimator::Ml,
        EstimatorArg::L1 => Estimator::L1,
        EstimatorArg::Pomp => Estimator::Pomp,
    };
    let auto = default_gamma(train.n(), train.p(), a.d2);
    let gamma = match a.gamma.as_str() {
        "auto" => auto,
        "cv" if estimator == Estimator::L1 => {
            let grid = gamma_grid_around(auto, 4);
            cross_validate_gamma(&train, &grid, a.folds, link, &constraints, &solver)?.best_gamma
        }
        "cv" => auto,
        v => v
            .parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("--gamma must be a number, auto or cv, got {v:?}")))?,
    };
    let fit = fit_estimator(estimator, &train, gamma, a.s_star, link, &constraints, &solver)?;
    write_json(&a.out, "fit.json", &fit)
}

fn cmd_gof(a: GofArgs) -> Result<()> {
    let fit: FitResult = read_json(&a.fit)?;
    let p = fit.params.p();
    let train = a.input.load()?;
    let train = if train.p() == p { train } else { train.with_history_len(p)? };
    let rates = rate_sequence(&fit.params, &train)?;
    let null = match &a.null {
        Some(path) => {
            let reference = read_spike_file(BufReader::new(File::open(path)?))?;
            let reference = if reference.p() == p { reference } else { reference.with_history_len(p)? };
            let r = rate_sequence(&fit.params, &reference)?;
            Some(empirical_null_quantiles(&reference, &r)?)
        }
        None => None,
    };
    let options = GofOptions { confidence: a.confidence.parse::<Confidence>()?, max_lag: a.max_lag };
    let (report, ks) = goodness_of_fit(&train, &rates, &options, null.as_ref())?;
    write_json(&a.out, "gof.json", &report)?;
    let mut w = create(&a.out, "gof_ks.csv")?;
    write_ks_csv(&ks, &mut w)?;
    w.flush()?;
    let mut w = create(&a.out, "gof_acf.csv")?;
    write_acf_csv(&report, &mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SpectrumSidecar {
    dc_mass: f64,
    peak_frequency_hz: Option<f64>,
    lag_frequency_hz: Option<f64>,
    stationary_rate: f64,
    innovation_variance: f64,
    delta: f64,
}

fn cmd_psd(a: PsdArgs) -> Result<()> {
    let value: serde_json::Value = read_json(&a.input)?;
    let params: GlmParameters = match value.get("params") {
        Some(inner) => serde_json::from_value(inner.clone())?,
        None => serde_json::from_value(value)?,
    };
    if !params.link.is_linear() {
        return Err(Error::InvalidInput("the closed-form spectrum needs the linear link".into()));
    }
    let spectrum = power_spectral_density(&params, &default_grid(a.grid), a.delta)?;
    let mut w = create(&a.out, "spectrum.csv")?;
    writeln!(w, "omega,frequency_hz,density")?;
    for (&om, d) in spectrum.omega_grid.iter().zip(&spectrum.density) {
        writeln!(w, "{om},{},{d}", om / (2.0 * std::f64::consts::PI * a.delta))?;
    }
    w.flush()?;
    let sidecar = SpectrumSidecar {
        dc_mass: spectrum.dc_mass,
        peak_frequency_hz: spectrum.peak_frequency_hz,
        lag_frequency_hz: lag_frequency(&params.theta, a.delta),
        stationary_rate: spectrum.stationary_rate,
        innovation_variance: spectrum.innovation_variance,
        delta: a.delta,
    };
    write_json(&a.out, "spectrum.json", &sidecar)
}

fn cmd_bench(a: BenchArgs, rsc: bool) -> Result<()> {
    let mut config: ExperimentConfig = read_json(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let out = a
        .out
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if rsc {
        write_json(&out, "rsc.json", &rsc_sweep(&config)?)
    } else {
        let table = mse_sweep(&config)?;
        let mut w = create(&out, "mse.csv")?;
        table.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}
