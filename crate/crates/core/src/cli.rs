//! Command-line front end: `design`, `grid` and `measure`.
//!
//! Angles accept `pi` expressions, plain radians or a `deg` suffix. For all
//! subcommands `--theta`/`--phi` name the target state `|θ,φ⟩` reached from
//! `|0⟩`; builtin pulses are driven at phase `φ + π/2`, which produces that
//! azimuth. Data goes to files or stdout, diagnostics to stderr.
//!
//! The worker count is read from `ROBUSTPULSE_THREADS`; outputs do not
//! depend on it.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::design::{design_pulse, DesignOutcome, DesignProblem, EnsembleSpec, Initialization};
use crate::fidelity::{sweep_grid_with, threshold_mask, FidelityConvention, Preparation, TargetRotation};
use crate::io;
use crate::measure::{fit_fringe, run_calibration, run_ramsey_experiment, run_transfer_experiment, ExperimentConfig};
use crate::pulses::{Bb1Placement, CompositeFamily, CompositeSpec};
use crate::qubit::{AreaErrorMode, ErrorParams, PulseSequence, DEFAULT_RABI};
use crate::Error;

pub const THREADS_ENV: &str = "ROBUSTPULSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "robustpulse", version, about = "Design and evaluate error-resistant single-qubit pulses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a piecewise-constant pulse over an (f, g) error ensemble.
    Design(DesignArgs),
    /// Sweep fidelity over an (f, g) grid and apply a threshold mask.
    Grid(GridArgs),
    /// Emulate the transfer or Ramsey measurement procedure.
    Measure(MeasureArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GModeArg {
    Amplitude,
    Duration,
}

impl From<GModeArg> for AreaErrorMode {
    fn from(m: GModeArg) -> Self {
        match m {
            GModeArg::Amplitude => AreaErrorMode::AmplitudeScale,
            GModeArg::Duration => AreaErrorMode::DurationScale,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Random,
    Rect,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Target polar angle.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: String,
    /// Target azimuth.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi: String,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// Step duration in µs.
    #[arg(long = "step-us", default_value_t = 0.5)]
    pub step_us: f64,
    /// Nominal Rabi frequency in rad/µs.
    #[arg(long, default_value_t = DEFAULT_RABI)]
    pub rabi: f64,
    #[arg(long = "f-range", default_value = "-1,1", allow_hyphen_values = true)]
    pub f_range: String,
    #[arg(long = "f-samples", default_value_t = 9)]
    pub f_samples: usize,
    #[arg(long = "g-range", default_value = "-0.4,0.4", allow_hyphen_values = true)]
    pub g_range: String,
    #[arg(long = "g-samples", default_value_t = 5)]
    pub g_samples: usize,
    #[arg(long = "g-mode", value_enum, default_value_t = GModeArg::Amplitude)]
    pub g_mode: GModeArg,
    #[arg(long = "max-amplitude", default_value_t = 1.0)]
    pub max_amplitude: f64,
    #[arg(long = "max-iter", default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pulse file output (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// "iteration,cost" log output.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BuiltinArg {
    Rect,
    Corpse,
    Scrofulous,
    Bb1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlacementArg {
    Before,
    After,
    Split,
}

impl From<PlacementArg> for Bb1Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Before => Bb1Placement::WBefore,
            PlacementArg::After => Bb1Placement::WAfter,
            PlacementArg::Split => Bb1Placement::Split,
        }
    }
}

#[derive(Debug, Args)]
pub struct PulseSource {
    /// Builtin pulse.
    #[arg(long, value_enum, conflicts_with = "pulse_file")]
    pub builtin: Option<BuiltinArg>,
    /// Pulse file to evaluate.
    #[arg(long = "pulse-file")]
    pub pulse_file: Option<PathBuf>,
    /// Target polar angle (rotation angle of builtin pulses).
    #[arg(long, default_value = "pi", allow_hyphen_values = true)]
    pub theta: String,
    /// Target azimuth.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub phi: String,
    /// BB1 placement of the correction block.
    #[arg(long, value_enum, default_value_t = PlacementArg::Split)]
    pub placement: PlacementArg,
    /// Nominal Rabi frequency for builtin pulses, rad/µs.
    #[arg(long, default_value_t = DEFAULT_RABI)]
    pub rabi: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Auto,
    State,
    Contrast,
    Bloch,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub source: PulseSource,
    /// `start:stop:step` or comma list.
    #[arg(long = "f-axis", default_value = "-1:1:0.25", allow_hyphen_values = true)]
    pub f_axis: String,
    #[arg(long = "g-axis", default_value = "-0.4:0.4:0.1", allow_hyphen_values = true)]
    pub g_axis: String,
    #[arg(long = "g-mode", value_enum, default_value_t = GModeArg::Amplitude)]
    pub g_mode: GModeArg,
    /// Ground-state preparation population a0 (a1 = 1 − a0).
    #[arg(long, default_value_t = 1.0)]
    pub a0: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Auto)]
    pub convention: ConventionArg,
    /// Mask threshold on F/Fm; defaults to 0.96 for π targets, 0.90 otherwise.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Grid CSV output (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "mask-out")]
    pub mask_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MeasureMode {
    Transfer,
    Ramsey,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub source: PulseSource,
    #[arg(long, value_enum, default_value_t = MeasureMode::Transfer)]
    pub mode: MeasureMode,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub f: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub g: f64,
    #[arg(long = "g-mode", value_enum, default_value_t = GModeArg::Amplitude)]
    pub g_mode: GModeArg,
    #[arg(long, default_value_t = 700)]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub phases: usize,
    #[arg(long, default_value_t = 1.0)]
    pub a0: f64,
    #[arg(long = "flip-prob", default_value_t = 0.0)]
    pub flip_prob: f64,
    /// Transfer or fringe CSV output (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fit CSV output (ramsey mode).
    #[arg(long = "fit-out")]
    pub fit_out: Option<PathBuf>,
    /// Direct-readout CSV output (ramsey mode).
    #[arg(long = "direct-out")]
    pub direct_out: Option<PathBuf>,
}

/// Exit status of a CLI invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Failure = 1,
    NoImprovement = 2,
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => stdout.write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn flag<T>(name: &str, r: crate::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| anyhow!("{name}: {e}"))
}

fn load_source(src: &PulseSource) -> anyhow::Result<(PulseSequence, TargetRotation)> {
    let theta = flag("--theta", io::parse_angle(&src.theta))?;
    let phi = flag("--phi", io::parse_angle(&src.phi))?;
    if !(src.rabi.is_finite() && src.rabi > 0.0) {
        bail!("--rabi: must be > 0");
    }
    let drive_phase = phi + FRAC_PI_2;
    let target = TargetRotation::from_drive(theta, drive_phase);
    let seq = match (&src.builtin, &src.pulse_file) {
        (Some(b), None) => {
            let family = match b {
                BuiltinArg::Rect => CompositeFamily::Rectangular,
                BuiltinArg::Corpse => CompositeFamily::CorpsePi,
                BuiltinArg::Scrofulous => CompositeFamily::ScrofulousPi,
                BuiltinArg::Bb1 => CompositeFamily::Bb1,
            };
            let spec = CompositeSpec::new(family, theta, drive_phase).with_placement(src.placement.into());
            flag("--theta", spec.build(src.rabi))?
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("--pulse-file: reading {}", path.display()))?;
            flag("--pulse-file", io::parse_pulse_file(&text))?.sequence
        }
        _ => bail!("exactly one of --builtin or --pulse-file is required"),
    };
    Ok((seq, target))
}

fn preparation(a0: f64) -> anyhow::Result<Preparation> {
    flag("--a0", Preparation::from_a0(a0))
}

fn run_design(args: &DesignArgs, stdout: &mut dyn Write) -> anyhow::Result<ExitStatus> {
    let theta = flag("--theta", io::parse_angle(&args.theta))?;
    let phi = flag("--phi", io::parse_angle(&args.phi))?;
    if args.steps == 0 {
        bail!("--steps: must be >= 1");
    }
    if !(args.step_us.is_finite() && args.step_us > 0.0) {
        bail!("--step-us: must be > 0");
    }
    if args.f_samples == 0 {
        bail!("--f-samples: must be >= 1");
    }
    if args.g_samples == 0 {
        bail!("--g-samples: must be >= 1");
    }
    let f_range = flag("--f-range", io::parse_range(&args.f_range))?;
    let g_range = flag("--g-range", io::parse_range(&args.g_range))?;
    if g_range.0 <= -1.0 {
        bail!("--g-range: g must exceed -1");
    }
    if !(args.max_amplitude.is_finite() && args.max_amplitude > 0.0) {
        bail!("--max-amplitude: must be > 0");
    }
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        bail!("--tol: must be >= 0");
    }
    if !(args.rabi.is_finite() && args.rabi > 0.0) {
        bail!("--rabi: must be > 0");
    }
    let ensemble = flag(
        "--f-range",
        EnsembleSpec::uniform_box(f_range, args.f_samples, g_range, args.g_samples, args.g_mode.into()),
    )?;
    let mut problem = DesignProblem::new(TargetRotation::new(theta, phi), args.steps, args.step_us, ensemble);
    problem.rabi_nominal = args.rabi;
    problem.max_amplitude = args.max_amplitude;
    problem.max_iterations = args.max_iter;
    problem.convergence_tol = args.tol;
    let init = match args.init {
        InitArg::Random => Initialization::Random(args.seed),
        InitArg::Rect => Initialization::Rectangular,
    };
    let report = design_pulse(&problem, init).map_err(|e| anyhow!("{e}"))?;
    let comment = format!(
        "designed theta={} phi={} steps={} mean_fidelity={}",
        io::fmt_num(theta),
        io::fmt_num(phi),
        args.steps,
        io::fmt_num(report.final_cost())
    );
    write_output(args.out.as_deref(), &io::write_pulse_file(&report.sequence, Some(&comment)), stdout)?;
    if let Some(log) = &args.log {
        write_output(Some(log), &io::log_csv(&report.cost_history), stdout)?;
    }
    eprintln!(
        "design: {:?} after {} iterations, mean fidelity {:.6}",
        report.outcome,
        report.cost_history.len() - 1,
        report.final_cost()
    );
    Ok(match report.outcome {
        DesignOutcome::NoImprovement => {
            eprintln!("design: {}", Error::NoImprovement);
            ExitStatus::NoImprovement
        }
        _ => ExitStatus::Success,
    })
}

fn run_grid(args: &GridArgs, stdout: &mut dyn Write) -> anyhow::Result<ExitStatus> {
    let (seq, target) = load_source(&args.source)?;
    let f_axis = flag("--f-axis", io::parse_axis(&args.f_axis))?;
    let g_axis = flag("--g-axis", io::parse_axis(&args.g_axis))?;
    let prep = preparation(args.a0)?;
    let convention = match args.convention {
        ConventionArg::Auto => FidelityConvention::for_target(&target),
        ConventionArg::State => FidelityConvention::StateOverlap,
        ConventionArg::Contrast => FidelityConvention::TransferContrast,
        ConventionArg::Bloch => FidelityConvention::BlochDirection,
    };
    let ratio = args
        .ratio
        .unwrap_or(if (target.theta - PI).abs() < 1e-9 { 0.96 } else { 0.90 });
    if !ratio.is_finite() {
        bail!("--ratio: must be finite");
    }
    let grid = flag(
        "--f-axis/--g-axis",
        sweep_grid_with(&seq, &target, &prep, &f_axis, &g_axis, args.g_mode.into(), convention),
    )?;
    write_output(args.out.as_deref(), &io::grid_csv(&grid), stdout)?;
    if let Some(path) = &args.mask_out {
        let mask = flag("--ratio", threshold_mask(&grid, ratio))?;
        write_output(Some(path), &io::mask_csv(&mask), stdout)?;
    }
    Ok(ExitStatus::Success)
}

fn run_measure(args: &MeasureArgs, stdout: &mut dyn Write) -> anyhow::Result<ExitStatus> {
    let (seq, _target) = load_source(&args.source)?;
    if args.shots == 0 {
        bail!("--shots: must be >= 1");
    }
    if args.phases < 3 {
        bail!("--phases: must be >= 3");
    }
    if !(0.0..=1.0).contains(&args.flip_prob) {
        bail!("--flip-prob: must lie in [0, 1]");
    }
    if !(args.f.is_finite() && args.g.is_finite() && args.g > -1.0) {
        bail!("--f/--g: must be finite with g > -1");
    }
    let cfg = ExperimentConfig {
        shots_per_point: args.shots,
        prep: preparation(args.a0)?,
        n_phases: args.phases,
        rng_seed: args.seed,
        detection_flip_prob: args.flip_prob,
    };
    let errors = ErrorParams::new(args.f, args.g).with_mode(args.g_mode.into());
    match args.mode {
        MeasureMode::Transfer => {
            let a = run_transfer_experiment(&seq, &errors, &cfg).map_err(|e| anyhow!("{e}"))?;
            let cal = run_calibration(&cfg, seq.rabi_nominal(), 1).map_err(|e| anyhow!("{e}"))?;
            write_output(args.out.as_deref(), &io::transfer_csv(&a, &cal), stdout)?;
        }
        MeasureMode::Ramsey => {
            let data = run_ramsey_experiment(&seq, &errors, &cfg).map_err(|e| anyhow!("{e}"))?;
            write_output(args.out.as_deref(), &io::fringe_csv(&data), stdout)?;
            if let (Some(path), Some((c, n))) = (&args.direct_out, data.direct) {
                write_output(Some(path), &io::direct_csv(c, n), stdout)?;
            }
            match fit_fringe(&data) {
                Ok(fit) => {
                    if let Some(path) = &args.fit_out {
                        write_output(Some(path), &io::fit_csv(&fit), stdout)?;
                    }
                }
                Err(e @ Error::FitDegenerate { .. }) => {
                    eprintln!("measure: {e}");
                    if let (Some(path), Error::FitDegenerate { theta_m }) = (&args.fit_out, e) {
                        let text = format!(
                            "theta_m,phi_m,sigma_theta,sigma_phi\n{},nan,nan,nan\n",
                            io::fmt_num(theta_m)
                        );
                        write_output(Some(path), &text, stdout)?;
                    }
                }
                Err(e) => bail!("fit: {e}"),
            }
        }
    }
    Ok(ExitStatus::Success)
}

fn worker_count() -> anyhow::Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow!("{THREADS_ENV}: expected a positive integer, got {v:?}"))?;
            if n == 0 {
                bail!("{THREADS_ENV}: must be >= 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Executes a parsed command.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> anyhow::Result<ExitStatus> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("creating worker pool")?;
    let mut buf: Vec<u8> = Vec::new();
    let status = pool.install(|| match &cli.command {
        Command::Design(a) => run_design(a, &mut buf),
        Command::Grid(a) => run_grid(a, &mut buf),
        Command::Measure(a) => run_measure(a, &mut buf),
    })?;
    stdout.write_all(&buf).context("writing stdout")?;
    stdout.flush().context("writing stdout")?;
    Ok(status)
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitStatus::Failure as i32 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(status) => status as i32,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitStatus::Failure as i32
        }
    }
}
