//! Command-line driver: argument parsing, experiment execution and report
//! emission.
//!
//! Every run is determined by an [`ExperimentConfig`] (a subcommand with
//! its arguments plus the master seed). Reports embed that config, so a
//! report's `config` field can be fed back through `--config`.

mod input;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::branching::{recommend_floor, simulate_generation, MeasureSampler, DEFAULT_MISS_PROBABILITY};
use crate::error::{Error, Result};
use crate::martingale::ShiftSampler;
use crate::point_measure::PointMeasure;
use crate::reproduction::ReproductionLaw;
use crate::rng::{try_replicate, StreamKey};
use crate::sdppp::max_cdf_curve;
use crate::stats::Estimate;
use crate::test_function::{default_battery, TestFunction};
use crate::verifier::{
    extract_decoration, fit_shift_family, log_spaced, smoothing_iterate, verify_fixed_point, FixedPointOptions,
    GridFunction, Verdict,
};

use input::{check_case, martingale_shift, parse_alpha, parse_law, parse_target, resolve, Target};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "sdppp",
    version,
    about = "Branching-stable point processes: simulation and verification"
)]
pub struct Cli {
    /// Master seed; every replicate stream is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for reports and CSV files; relative input paths resolve here too.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Run the experiment described in a JSON file (a report's `config` field).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

/// A subcommand with all of its arguments.
#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Critical exponent and regular/boundary classification of a law.
    Classify(ClassifyArgs),
    /// Generation-n positions of a branching random walk.
    SimulateBrw(SimulateBrwArgs),
    /// Draws of the random shift S.
    SampleShift(SampleShiftArgs),
    /// Draws of a shifted decorated Poisson point process.
    SampleSdppp(SampleSdpppArgs),
    /// Statistical test of E = Z * E in law.
    VerifyFixedPoint(VerifyArgs),
    /// Decoration recovery by conditioning on a high maximum.
    ExtractDecoration(ExtractArgs),
    /// Smoothing-transform iteration and its fit to the shift family.
    Smoothing(SmoothingArgs),
    /// Empirical against semi-analytic law of the maximum.
    MaxLaw(MaxLawArgs),
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ClassifyArgs {
    /// Reproduction law as inline JSON or a JSON file.
    #[arg(long)]
    pub law: String,
    /// A number, or `auto` for the critical exponent.
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    #[arg(long, default_value = "classify.json")]
    pub report: String,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SimulateBrwArgs {
    #[arg(long)]
    pub law: String,
    #[arg(long)]
    pub generations: usize,
    /// Killing barrier; omitted means no killing.
    #[arg(long, allow_hyphen_values = true)]
    pub barrier: Option<f64>,
    /// Only atoms at or above this level are written; defaults to the barrier.
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value = "brw.csv")]
    pub out: String,
    #[arg(long, default_value = "simulate-brw.json")]
    pub report: String,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SampleShiftArgs {
    #[arg(long)]
    pub law: String,
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    /// `auto`, `regular` or `boundary`; a mismatch with the law is an error.
    #[arg(long, default_value = "auto")]
    pub case: String,
    #[arg(long, default_value_t = 12)]
    pub generations: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value = "shift.csv")]
    pub out: String,
    #[arg(long, default_value = "sample-shift.json")]
    pub report: String,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SampleSdpppArgs {
    #[arg(long)]
    pub alpha: f64,
    /// `const:v` or `martingale:<law>,n,case`.
    #[arg(long)]
    pub shift: String,
    /// Mixture decoration as inline JSON or a JSON file; Dirac at 0 if omitted.
    #[arg(long)]
    pub decoration: Option<String>,
    /// Intensity scale c.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub floor: f64,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value = "sdppp.csv")]
    pub out: String,
    #[arg(long, default_value = "sample-sdppp.json")]
    pub report: String,
}

/// Law, exponent and shift settings shared by the experiments on a target.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TargetArgs {
    #[arg(long)]
    pub law: String,
    /// Exponent of the target's Poisson intensity; the shift always uses
    /// the critical exponent of the law.
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    /// `cox`, `sdppp:<decoration>`, `file:<csv>` or `ppp:<rate>`.
    #[arg(long, default_value = "cox")]
    pub target: String,
    /// Generations of the martingale standing in for S.
    #[arg(long, default_value_t = 12)]
    pub generations: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub significance: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub bias_budget: f64,
    /// Per-replicate truncation miss probability.
    #[arg(long, default_value_t = DEFAULT_MISS_PROBABILITY)]
    pub miss_probability: f64,
    /// Test functions as inline JSON or a JSON file; the built-in battery if omitted.
    #[arg(long)]
    pub battery: Option<String>,
    /// Target floor; defaults to the floor the verifier requires.
    #[arg(long, allow_hyphen_values = true)]
    pub floor: Option<f64>,
    #[arg(long, default_value = "verify-fixed-point.json")]
    pub report: String,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct ExtractArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    /// Increasing conditioning levels, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,1,2,3,4,5,6"
    )]
    pub levels: Vec<f64>,
    /// Window width W; defaults to 5 / alpha.
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long, default_value_t = crate::verifier::MIN_CONDITIONED)]
    pub min_conditioned: usize,
    #[arg(long, default_value = "decoration.csv")]
    pub out: String,
    #[arg(long, default_value = "extract-decoration.json")]
    pub report: String,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct SmoothingArgs {
    #[arg(long)]
    pub law: String,
    #[arg(long, default_value = "auto")]
    pub alpha: String,
    #[arg(long, default_value_t = 81)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub t_min: f64,
    #[arg(long, default_value_t = 1e4)]
    pub t_max: f64,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Offspring draws averaged in each application of the transform.
    #[arg(long, default_value_t = 100_000)]
    pub mc_reps: usize,
    #[arg(long, default_value_t = 12)]
    pub generations: usize,
    /// Shift draws used for the fitted family.
    #[arg(long, default_value_t = 20_000)]
    pub shift_reps: usize,
    #[arg(long, default_value = "smoothing.csv")]
    pub out: String,
    #[arg(long, default_value = "smoothing.json")]
    pub report: String,
}

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct MaxLawArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub target: TargetArgs,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, allow_hyphen_values = true, default_value_t = -3.0)]
    pub x_min: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 7.0)]
    pub x_max: f64,
    #[arg(long, default_value_t = 0.02)]
    pub step: f64,
    #[arg(long, default_value = "max-law.csv")]
    pub out: String,
    #[arg(long, default_value = "max-law.json")]
    pub report: String,
}

/// Everything a run depends on. Thread count and output directory are
/// deliberately absent: they do not change results.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(flatten)]
    pub command: Command,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Classify(_) => "classify",
            Command::SimulateBrw(_) => "simulate-brw",
            Command::SampleShift(_) => "sample-shift",
            Command::SampleSdppp(_) => "sample-sdppp",
            Command::VerifyFixedPoint(_) => "verify-fixed-point",
            Command::ExtractDecoration(_) => "extract-decoration",
            Command::Smoothing(_) => "smoothing",
            Command::MaxLaw(_) => "max-law",
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidLaw(_)
        | Error::InvalidArgument(_)
        | Error::NoCriticalRoot(_)
        | Error::NotCritical { .. }
        | Error::WrongCase { .. }
        | Error::UnnormalizedDecoration
        | Error::InsufficientSamples { .. }
        | Error::Truncation { .. } => EXIT_CONFIG,
        _ => EXIT_ERROR,
    }
}

/// Parses `args` and runs the experiment, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let config = match (&cli.config, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut config: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            config
        }
        (None, Some(command)) => ExperimentConfig {
            seed: cli.seed.unwrap_or(0),
            command,
        },
        (Some(_), Some(_)) => return Err(Error::Config("give either --config or a subcommand, not both".into())),
        (None, None) => return Err(Error::Config("no subcommand given (see --help)".into())),
    };
    std::fs::create_dir_all(&cli.out_dir)?;
    with_threads(cli.threads, || run(&config, &cli.out_dir))
}

#[cfg(feature = "parallel")]
fn with_threads(threads: Option<usize>, f: impl FnOnce() -> Result<i32> + Send) -> Result<i32> {
    match threads {
        None => f(),
        Some(0) => Err(Error::Config("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads(_threads: Option<usize>, f: impl FnOnce() -> Result<i32>) -> Result<i32> {
    f()
}

/// Runs one experiment, writing its report and data under `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<i32> {
    let key = StreamKey::new(config.seed).derive(config.command.name());
    let (code, resolved, tests, verdict, results) = match &config.command {
        Command::Classify(a) => classify(a, out_dir)?,
        Command::SimulateBrw(a) => simulate_brw(a, out_dir, key)?,
        Command::SampleShift(a) => sample_shift(a, out_dir, key)?,
        Command::SampleSdppp(a) => sample_sdppp(a, out_dir, key)?,
        Command::VerifyFixedPoint(a) => verify(a, out_dir, key)?,
        Command::ExtractDecoration(a) => extract(a, out_dir, key)?,
        Command::Smoothing(a) => smoothing(a, out_dir, key)?,
        Command::MaxLaw(a) => max_law(a, out_dir, key)?,
    };
    let report = json!({
        "command": config.command.name(),
        "config": config,
        "resolved": resolved,
        "tests": tests,
        "verdict": verdict,
        "seeds": {"master": config.seed, "stream_key": key.raw()},
        "bias_budget": results.get("bias_budget").cloned().unwrap_or(Value::Null),
        "results": results,
    });
    write_json(&resolve(out_dir, report_name(&config.command)), &report)?;
    Ok(code)
}

fn report_name(c: &Command) -> &str {
    match c {
        Command::Classify(a) => &a.report,
        Command::SimulateBrw(a) => &a.report,
        Command::SampleShift(a) => &a.report,
        Command::SampleSdppp(a) => &a.report,
        Command::VerifyFixedPoint(a) => &a.report,
        Command::ExtractDecoration(a) => &a.report,
        Command::Smoothing(a) => &a.report,
        Command::MaxLaw(a) => &a.report,
    }
}

/// Exit code, resolved settings, test list, verdict and detailed results.
type Outcome = (i32, Value, Value, Value, Value);

fn complete(resolved: Value, results: Value) -> Outcome {
    (EXIT_PASS, resolved, json!([]), json!("complete"), results)
}

fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Config(format!("serialization: {e}")))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Config(format!("serialization: {e}")))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// One row per draw: `replicate,floor,atoms...`.
fn write_measures(path: &Path, draws: &[PointMeasure]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["replicate", "floor", "atoms"]).map_err(csv_err)?;
    for (i, d) in draws.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(d.to_csv_fields());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn classify(a: &ClassifyArgs, base: &Path) -> Result<Outcome> {
    let law = parse_law(&a.law, base)?;
    let alpha = parse_alpha(&a.alpha, &law)?;
    let report = law.classify(alpha);
    println!("case={} alpha={:.12}", report.case, report.alpha);
    Ok(complete(
        json!({"law": law, "description": law.description(), "alpha": alpha}),
        to_value(&report)?,
    ))
}

fn simulate_brw(a: &SimulateBrwArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    let law = parse_law(&a.law, base)?;
    let barrier = a.barrier.unwrap_or(f64::NEG_INFINITY);
    let threshold = a.threshold.unwrap_or(barrier).max(barrier);
    let draws = try_replicate(key, a.reps, |_, rng| {
        let z = simulate_generation(&law, a.generations, barrier, rng)?;
        Ok((z.len(), z.truncate(threshold)))
    })?;
    let sizes: Vec<f64> = draws.iter().map(|d| d.0 as f64).collect();
    let measures: Vec<PointMeasure> = draws.into_iter().map(|d| d.1).collect();
    write_measures(&resolve(base, &a.out), &measures)?;
    let maxima: Vec<f64> = measures
        .iter()
        .map(PointMeasure::max_atom)
        .filter(|x| x.is_finite())
        .collect();
    Ok(complete(
        json!({"law": law, "barrier": barrier, "threshold": threshold}),
        json!({
            "reps": a.reps,
            "population": Estimate::from_samples(&sizes)?,
            "max_atom": if maxima.is_empty() { Value::Null } else { to_value(&Estimate::from_samples(&maxima)?)? },
            "extinct_above_threshold": a.reps - maxima.len(),
        }),
    ))
}

fn sample_shift(a: &SampleShiftArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    let law = parse_law(&a.law, base)?;
    let alpha = parse_alpha(&a.alpha, &law)?;
    let case = check_case(&a.case, &law, alpha)?;
    let shift = ShiftSampler::martingale(law, alpha, a.generations, crate::martingale::DEFAULT_MIN_GENERATIONS)?;
    let draws = try_replicate(key, a.reps, |_, rng| shift.sample_with_clamp(rng))?;
    write_rows(
        &resolve(base, &a.out),
        &["replicate", "value", "clamped"],
        draws
            .iter()
            .enumerate()
            .map(|(i, (v, c))| vec![i.to_string(), v.to_string(), c.to_string()]),
    )?;
    let values: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let clamped = draws.iter().filter(|d| d.1).count();
    Ok(complete(
        json!({"law": law, "alpha": alpha, "case": case, "shift": shift}),
        json!({
            "mean": Estimate::from_samples(&values)?,
            "clamp_fraction": clamped as f64 / a.reps as f64,
            "generations_used": shift.generations_used(),
        }),
    ))
}

fn sample_sdppp(a: &SampleSdpppArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    if !(a.c > 0.0 && a.c.is_finite()) {
        return Err(Error::Config(format!("intensity scale c = {} must be positive", a.c)));
    }
    let shift = input::parse_shift(&a.shift, base)?.scaled(a.c);
    let deco = input::parse_decoration(a.decoration.as_deref(), base)?;
    let sampler = crate::sdppp::sdppp_sampler(shift.clone(), a.alpha, deco, a.floor)?;
    let draws = try_replicate(key, a.reps, |_, rng| sampler.sample(rng))?;
    write_measures(&resolve(base, &a.out), &draws)?;
    let counts: Vec<f64> = draws.iter().map(|d| d.len() as f64).collect();
    Ok(complete(
        json!({"sampler": sampler.description(), "shift": shift, "floor": a.floor}),
        json!({"reps": a.reps, "atoms_per_draw": Estimate::from_samples(&counts)?}),
    ))
}

/// The target sampler with its shift, exponent and resolved settings.
struct ResolvedTarget {
    law: ReproductionLaw,
    alpha: f64,
    target: Target,
    shift: Option<ShiftSampler>,
}

impl ResolvedTarget {
    fn new(a: &TargetArgs, base: &Path) -> Result<Self> {
        let law = parse_law(&a.law, base)?;
        let alpha = parse_alpha(&a.alpha, &law)?;
        let target = parse_target(&a.target, base)?;
        if !(a.c > 0.0 && a.c.is_finite()) {
            return Err(Error::Config(format!("intensity scale c = {} must be positive", a.c)));
        }
        let shift = if target.needs_shift() {
            Some(martingale_shift(law, a.generations, "auto")?.scaled(a.c))
        } else {
            None
        };
        Ok(ResolvedTarget {
            law,
            alpha,
            target,
            shift,
        })
    }

    fn sampler(&self, floor: f64) -> Result<MeasureSampler> {
        let unit = ShiftSampler::constant(1.0)?;
        self.target
            .sampler(self.shift.as_ref().unwrap_or(&unit), self.alpha, floor)
    }

    fn describe(&self, sampler: &MeasureSampler) -> Value {
        json!({
            "law": self.law,
            "alpha": self.alpha,
            "case": self.shift.as_ref().and_then(ShiftSampler::case),
            "target": sampler.description(),
            "floor": sampler.declared_floor(),
            "generations_used": self.shift.as_ref().map(ShiftSampler::generations_used),
        })
    }
}

fn parse_battery(spec: Option<&str>, base: &Path) -> Result<Vec<TestFunction>> {
    let Some(spec) = spec else {
        return Ok(default_battery());
    };
    let text = if spec.trim_start().starts_with('[') {
        spec.to_string()
    } else {
        let path = resolve(base, spec);
        std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?
    };
    let battery: Vec<TestFunction> = serde_json::from_str(&text).map_err(|e| Error::Config(format!("battery: {e}")))?;
    if let Some(phi) = battery.iter().find(|phi| !phi.is_valid()) {
        return Err(Error::Config(format!("invalid test function {}", phi.id())));
    }
    Ok(battery)
}

fn verify(a: &VerifyArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    let rt = ResolvedTarget::new(&a.target, base)?;
    let battery = parse_battery(a.battery.as_deref(), base)?;
    let options = FixedPointOptions {
        reps: a.reps,
        significance: a.significance,
        bias_budget: a.bias_budget,
        miss_probability: a.miss_probability,
        ..FixedPointOptions::default()
    };
    let lowest = battery
        .iter()
        .map(TestFunction::left_edge)
        .chain(options.count_thresholds.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let floor = match a.floor {
        Some(f) => f,
        None => recommend_floor(lowest, &rt.law, 1, options.miss_probability)?,
    };
    let sampler = rt.sampler(floor)?;
    let report = verify_fixed_point(&rt.law, &sampler, &battery, &options, key)?;
    let code = match report.verdict {
        Verdict::Pass => EXIT_PASS,
        Verdict::Fail => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    println!("verdict={}", to_value(&report.verdict)?.as_str().unwrap_or_default());
    Ok((
        code,
        rt.describe(&sampler),
        to_value(&report.tests)?,
        to_value(&report.verdict)?,
        to_value(&report)?,
    ))
}

fn extract(a: &ExtractArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    let rt = ResolvedTarget::new(&a.target, base)?;
    let window = a.window.unwrap_or(5.0 / rt.alpha);
    let lowest = a.levels.first().copied().unwrap_or(0.0) - window;
    let sampler = rt.sampler(lowest)?;
    let ex = extract_decoration(&sampler, &a.levels, window, a.reps, a.min_conditioned, key)?;
    let grid: Vec<f64> = (0..=100).map(|i| window * i as f64 / 100.0).collect();
    let mut rows = Vec::new();
    for level in &ex.levels {
        for (g, p) in grid.iter().zip(level.gap_cdf(&grid)) {
            rows.push(vec![level.z.to_string(), g.to_string(), p.to_string()]);
        }
    }
    write_rows(&resolve(base, &a.out), &["z", "gap", "cdf"], rows)?;
    let levels: Vec<Value> = ex
        .levels
        .iter()
        .map(|l| {
            json!({
                "z": l.z,
                "conditioned": l.conditioned,
                "count_histogram": l.count_histogram,
                "second_atom_probability": l.second_atom_probability,
            })
        })
        .collect();
    Ok(complete(
        rt.describe(&sampler),
        json!({
            "window": window,
            "levels": levels,
            "dropped": ex.dropped,
            "count_tv": ex.count_tv,
            "gap_ks": ex.gap_ks,
        }),
    ))
}

fn smoothing(a: &SmoothingArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    let law = parse_law(&a.law, base)?;
    let alpha = parse_alpha(&a.alpha, &law)?;
    if !(a.points >= 2 && a.t_min > 0.0 && a.t_max > a.t_min) {
        return Err(Error::Config("grid needs points >= 2 and 0 < t-min < t-max".into()));
    }
    let f0 = GridFunction::from_fn(log_spaced(a.t_min, a.t_max, a.points), |t| (-t).exp())?;
    let run = smoothing_iterate(
        &MeasureSampler::offspring(law),
        &f0,
        a.iterations,
        a.mc_reps,
        key.derive("iterate"),
    )?;
    let shift = ShiftSampler::martingale(law, alpha, a.generations, crate::martingale::DEFAULT_MIN_GENERATIONS)?;
    let shifts = shift.sample_batch(a.shift_reps, key.derive("shift"))?.values;
    let fit = fit_shift_family(&run.result, alpha, &shifts)?;
    let fitted = |t: f64| shifts.iter().map(|s| (-fit.h * s * t.powf(alpha)).exp()).sum::<f64>() / shifts.len() as f64;
    write_rows(
        &resolve(base, &a.out),
        &["t", "f", "fitted"],
        run.result
            .nodes()
            .iter()
            .zip(run.result.values())
            .map(|(&t, f)| vec![t.to_string(), f.to_string(), fitted(t).to_string()]),
    )?;
    Ok(complete(
        json!({"law": law, "alpha": alpha, "case": shift.case(), "generations_used": shift.generations_used()}),
        json!({"residuals": run.residuals, "fit": fit}),
    ))
}

fn max_law(a: &MaxLawArgs, base: &Path, key: StreamKey) -> Result<Outcome> {
    let rt = ResolvedTarget::new(&a.target, base)?;
    let Some(shift) = rt.shift.clone() else {
        return Err(Error::Config("max-law needs a cox or sdppp target".into()));
    };
    if !(a.step > 0.0 && a.x_max > a.x_min) {
        return Err(Error::Config("grid needs step > 0 and x-max > x-min".into()));
    }
    let sampler = rt.sampler(a.x_min)?;
    let mut maxima = try_replicate(key.derive("target"), a.reps, |_, rng| {
        Ok(sampler.sample(rng)?.max_atom())
    })?;
    maxima.sort_by(f64::total_cmp);
    let shifts = shift.sample_batch(a.reps, key.derive("shift"))?.values;
    let steps = ((a.x_max - a.x_min) / a.step).round() as usize;
    let xs: Vec<f64> = (0..=steps).map(|i| a.x_min + a.step * i as f64).collect();
    // The shift already carries the intensity scale.
    let semi = max_cdf_curve(1.0, &shifts, rt.alpha, &xs)?;
    let mut sup: f64 = 0.0;
    let mut rows = Vec::with_capacity(xs.len());
    for (&x, e) in xs.iter().zip(&semi) {
        let emp = maxima.partition_point(|&m| m <= x) as f64 / maxima.len() as f64;
        sup = sup.max((emp - e.mean).abs());
        rows.push(vec![
            x.to_string(),
            emp.to_string(),
            e.mean.to_string(),
            e.std_error.to_string(),
        ]);
    }
    write_rows(
        &resolve(base, &a.out),
        &["x", "empirical", "semi_analytic", "std_error"],
        rows,
    )?;
    Ok(complete(
        rt.describe(&sampler),
        json!({"sup_distance": sup, "reps": a.reps}),
    ))
}
