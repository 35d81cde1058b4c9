//! The `sdkf` command-line driver.
//!
//! Every command writes its files atomically into the output directory
//! (`--out`, else `$SDKF_OUT_DIR`, else `sdkf-out`) together with a
//! `manifest-<command>.txt` recording the configuration, seed and version.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
//! failures (and on a failed `oracle-check`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::catalog::{builtin, builtin_models, builtin_names, BuiltinModel};
use crate::error::Error;
use crate::estimate::{fmt_f64, FilterTrace, StateEstimate};
use crate::filter_cd::{cd_run, euler_limit_check, write_summary, IntegratorConfig, Scheme};
use crate::filter_discrete::Variant;
use crate::linalg::{Matrix, Vector};
use crate::model::{ContinuousDiscreteModel, DiscreteLinearModel, NonlinearModel, StateDynamics, SystemModel};
use crate::model_file::{FileModel, ModelFile};
use crate::sim::{
    monte_carlo_compare, run_replicate, run_variant, simulate_cd, simulate_discrete, CompareSetup,
    NoiseDistribution, PriorSpec, TrajectoryData,
};
use crate::wls_oracle::{compare_with_trace, oracle_filter, write_equivalence_csv, OracleConfig};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SDKF_OUT_DIR";

/// Largest relative oracle/filter difference `oracle-check` accepts.
pub const ORACLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "sdkf", version, about = "State-dependent process noise Kalman filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in models.
    Models,
    /// Simulate a trajectory and its measurements.
    Simulate(SimulateArgs),
    /// Run a filter on simulated or supplied measurements.
    Filter(FilterArgs),
    /// Monte Carlo comparison of the covariance-update and fixed-β filters.
    Compare(CompareArgs),
    /// Check the recursive filter against the least-squares oracle.
    OracleCheck(OracleArgs),
    /// Euler limit check of the continuous-discrete time update.
    LimitCheck(LimitArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Built-in model name or path to a model file.
    #[arg(long)]
    model: String,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum NoiseArg {
    Gaussian,
    Uniform,
}

impl From<NoiseArg> for NoiseDistribution {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseDistribution::Gaussian,
            NoiseArg::Uniform => NoiseDistribution::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    CovarianceUpdate,
    FixedBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PriorArg {
    /// `Σ_{1|0} = 0`
    Zero,
    /// `Σ_{1|0} = I`
    Unit,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of samples (continuous models: the first N sample times).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    noise: NoiseArg,
    /// Euler–Maruyama step for continuous models (default: smallest gap / 100).
    #[arg(long)]
    em_step: Option<f64>,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = VariantArg::CovarianceUpdate)]
    variant: VariantArg,
    /// Fixed process noise scale β (fixed-beta variant).
    #[arg(long, required_if_eq("variant", "fixed-beta"))]
    beta: Option<f64>,
    /// Trajectory CSV to filter; simulated from --seed when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    noise: NoiseArg,
    /// Prior mean x̂_{1|0}, comma separated (default: the model's initial state).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    prior_mean: Option<Vec<f64>>,
    /// Prior covariance Σ_{1|0} = v·I.
    #[arg(long, default_value_t = 1.0)]
    prior_var: f64,
    /// Integration step for continuous models (default: smallest gap / 100).
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, value_enum, default_value_t = SchemeArg::Rk4)]
    scheme: SchemeArg,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// β of the fixed-noise filter.
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 500)]
    replicates: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseArg::Gaussian)]
    noise: NoiseArg,
    #[arg(long, value_enum, default_value_t = PriorArg::Zero)]
    prior: PriorArg,
    #[arg(long, default_value_t = 20)]
    max_lag: usize,
    /// Leading steps left out of the MSE.
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Last step index k; k + 1 measurements are filtered.
    #[arg(long, default_value_t = 20)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    prior_var: f64,
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[command(flatten)]
    common: Common,
    /// Steps Δt to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025,0.0125")]
    dts: Vec<f64>,
    /// Length of the propagation interval.
    #[arg(long, default_value_t = 1.0)]
    span: f64,
    #[arg(long, default_value_t = 1.0)]
    prior_var: f64,
}

/// Why a command failed, and the exit status it maps to.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Parse `argv` (including the program name), run the command and return
/// the process exit status.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn dispatch(command: Command) -> CmdResult<()> {
    match command {
        Command::Models => {
            for m in builtin_models() {
                println!("{:<18} {}", m.name, m.description);
            }
            Ok(())
        }
        Command::Simulate(a) => simulate(a),
        Command::Filter(a) => filter(a),
        Command::Compare(a) => compare(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::LimitCheck(a) => limit_check(a),
    }
}

/// A model resolved from `--model`.
#[derive(Debug, Clone)]
enum Loaded {
    Discrete(DiscreteLinearModel),
    Continuous(ContinuousDiscreteModel),
    Nonlinear(NonlinearModel),
}

#[derive(Debug, Clone)]
struct Resolved {
    id: String,
    model: Loaded,
    x0: Vector,
    /// Canonical model text for the manifest (file-backed or linear models).
    text: Option<String>,
}

impl Resolved {
    fn dim(&self) -> usize {
        match &self.model {
            Loaded::Discrete(m) => m.state_dim(),
            Loaded::Continuous(m) => m.state_dim(),
            Loaded::Nonlinear(m) => m.state_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match &self.model {
            Loaded::Discrete(m) => m.c.nrows(),
            Loaded::Continuous(m) => m.c.nrows(),
            Loaded::Nonlinear(m) => m.output_matrix().nrows(),
        }
    }

    fn system(&self, cmd: &str) -> CmdResult<SystemModel> {
        match &self.model {
            Loaded::Discrete(m) => Ok(SystemModel::Linear(m.clone())),
            Loaded::Nonlinear(m) => Ok(SystemModel::Nonlinear(m.clone())),
            Loaded::Continuous(_) => Err(Failure::Usage(format!(
                "--model: {cmd} needs a discrete-time model, '{}' is continuous-discrete",
                self.id
            ))),
        }
    }
}

fn resolve_model(spec: &str) -> CmdResult<Resolved> {
    if let Some(named) = builtin(spec) {
        let (model, text) = match named.model {
            BuiltinModel::Discrete(m) => {
                let text = ModelFile {
                    model: FileModel::Discrete(m.clone()),
                    x0: Some(named.x0.clone()),
                }
                .to_text();
                (Loaded::Discrete(m), Some(text))
            }
            BuiltinModel::Continuous(m) => {
                let text = ModelFile {
                    model: FileModel::Continuous(m.clone()),
                    x0: Some(named.x0.clone()),
                }
                .to_text();
                (Loaded::Continuous(m), Some(text))
            }
            BuiltinModel::Nonlinear(m) => (Loaded::Nonlinear(m), None),
        };
        return Ok(Resolved {
            id: spec.to_string(),
            model,
            x0: named.x0,
            text,
        });
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(Failure::Usage(format!(
            "--model: '{spec}' is neither a built-in model nor a readable file; built-in models: {}",
            builtin_names().join(", ")
        )));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("--model: cannot read '{spec}': {e}")))?;
    let file = ModelFile::parse(&text).map_err(|e| Failure::Usage(format!("--model: {e}")))?;
    let canonical = file.to_text();
    let (model, n) = match file.model {
        FileModel::Discrete(m) => {
            let n = m.state_dim();
            (Loaded::Discrete(m), n)
        }
        FileModel::Continuous(m) => {
            let n = m.state_dim();
            (Loaded::Continuous(m), n)
        }
    };
    Ok(Resolved {
        id: spec.to_string(),
        model,
        x0: file.x0.unwrap_or_else(|| Vector::zeros(n)),
        text: Some(canonical),
    })
}

fn out_dir(flag: &Option<PathBuf>) -> CmdResult<PathBuf> {
    let dir = match flag {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("sdkf-out")),
    };
    fs::create_dir_all(&dir)
        .map_err(|e| Failure::Usage(format!("--out: cannot create '{}': {e}", dir.display())))?;
    Ok(dir)
}

/// Write `name` inside `dir` through a temporary file and a rename.
fn write_atomic<F>(dir: &Path, name: &str, body: F) -> CmdResult<PathBuf>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    let target = dir.join(name);
    tmp.persist(&target).map_err(|e| Failure::from(e.error))?;
    Ok(target)
}

/// Key/value record of a run; no timestamps, so identical runs produce
/// identical manifests.
struct Manifest {
    lines: Vec<(String, String)>,
    outputs: Vec<String>,
    model_text: Option<String>,
}

impl Manifest {
    fn new(command: &str, model: &Resolved) -> Self {
        let mut m = Self {
            lines: Vec::new(),
            outputs: Vec::new(),
            model_text: model.text.clone(),
        };
        m.set("sdkf_version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m.set("model", &model.id);
        m.set("rng", "ChaCha20, streams seeded by SplitMix64(master_seed, index)");
        m
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn output(&mut self, path: &Path) {
        if let Some(name) = path.file_name() {
            self.outputs.push(name.to_string_lossy().into_owned());
        }
    }

    fn write(&self, dir: &Path, command: &str) -> CmdResult<PathBuf> {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "outputs={}", self.outputs.join(","));
        if let Some(text) = &self.model_text {
            let _ = writeln!(s, "\n[model]");
            s.push_str(text);
        }
        write_atomic(dir, &format!("manifest-{command}.txt"), |w| w.write_all(s.as_bytes()))
    }
}

fn finite_nonneg(flag: &str, v: f64) -> CmdResult<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("{flag} must be a finite non-negative number, got {v}")))
    }
}

fn positive(flag: &str, v: f64) -> CmdResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Failure::Usage(format!("{flag} must be a finite positive number, got {v}")))
    }
}

/// The first `n` sample times of a continuous model.
fn truncate_samples(model: &ContinuousDiscreteModel, n: Option<usize>) -> CmdResult<ContinuousDiscreteModel> {
    let Some(n) = n else {
        return Ok(model.clone());
    };
    if n == 0 || n > model.sample_times.len() {
        return Err(Failure::Usage(format!(
            "--n must be between 1 and {} for this model",
            model.sample_times.len()
        )));
    }
    let mut m = model.clone();
    m.sample_times.truncate(n);
    Ok(m)
}

fn default_step(model: &ContinuousDiscreteModel) -> f64 {
    IntegratorConfig::for_model(model).step
}

fn simulate_resolved(
    model: &Resolved,
    n: Option<usize>,
    seed: u64,
    noise: NoiseDistribution,
    em_step: Option<f64>,
) -> CmdResult<(TrajectoryData, Option<ContinuousDiscreteModel>)> {
    let data = match &model.model {
        Loaded::Continuous(m) => {
            let m = truncate_samples(m, n)?;
            let h = match em_step {
                Some(h) => positive("--em-step", h)?,
                None => default_step(&m),
            };
            return Ok((simulate_cd(&m, &model.x0, seed, h, noise)?, Some(m)));
        }
        Loaded::Discrete(m) => simulate_discrete(m, &model.x0, n.unwrap_or(100), seed, noise)?,
        Loaded::Nonlinear(m) => simulate_discrete(m, &model.x0, n.unwrap_or(100), seed, noise)?,
    };
    Ok((data, None))
}

fn simulate(a: SimulateArgs) -> CmdResult<()> {
    let model = resolve_model(&a.common.model)?;
    if a.n == Some(0) {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let dir = out_dir(&a.common.out)?;
    let (data, _) = simulate_resolved(&model, a.n, a.seed, a.noise.into(), a.em_step)?;
    let data = data.with_model_id(model.id.clone());
    let mut manifest = Manifest::new("simulate", &model);
    manifest.set("seed", a.seed);
    manifest.set("n", data.len());
    manifest.set("noise", format!("{:?}", a.noise).to_lowercase());
    if let Some(h) = a.em_step {
        manifest.set("em_step", fmt_f64(h));
    }
    manifest.set("x0", join(&model.x0));
    manifest.set("true_path_clamped", data.clamped);
    let p = write_atomic(&dir, "trajectory.csv", |w| data.write_csv(w))?;
    manifest.output(&p);
    manifest.write(&dir, "simulate")?;
    println!("wrote {} samples to {}", data.len(), p.display());
    Ok(())
}

fn join(v: &Vector) -> String {
    v.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn prior_estimate(model: &Resolved, mean: &Option<Vec<f64>>, var: f64) -> CmdResult<StateEstimate> {
    let n = model.dim();
    let var = finite_nonneg("--prior-var", var)?;
    let xhat = match mean {
        None => model.x0.clone(),
        Some(v) if v.len() == n => Vector::from_column_slice(v),
        Some(v) if v.len() == 1 => Vector::from_element(n, v[0]),
        Some(v) => {
            return Err(Failure::Usage(format!(
                "--prior-mean has {} entries, the model has {n} states",
                v.len()
            )))
        }
    };
    Ok(StateEstimate::new(xhat, Matrix::identity(n, n) * var, 1))
}

fn filter(a: FilterArgs) -> CmdResult<()> {
    let model = resolve_model(&a.common.model)?;
    let variant = match a.variant {
        VariantArg::CovarianceUpdate => Variant::CovarianceUpdate,
        VariantArg::FixedBeta => {
            let beta = a.beta.ok_or_else(|| Failure::Usage("--beta is required with --variant fixed-beta".into()))?;
            Variant::FixedBeta(finite_nonneg("--beta", beta)?)
        }
    };
    if matches!(model.model, Loaded::Continuous(_)) && variant != Variant::CovarianceUpdate {
        return Err(Failure::Usage(
            "--variant: continuous-discrete models support only covariance-update".into(),
        ));
    }
    if a.n == Some(0) {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let init = prior_estimate(&model, &a.prior_mean, a.prior_var)?;
    let input_text = match &a.input {
        Some(p) => Some(
            fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("--input: cannot read '{}': {e}", p.display())))?,
        ),
        None => None,
    };
    let dir = out_dir(&a.common.out)?;

    let mut manifest = Manifest::new("filter", &model);
    manifest.set("variant", variant.label());
    manifest.set("prior_mean", join(&init.xhat));
    manifest.set("prior_var", fmt_f64(a.prior_var));

    let data = match &input_text {
        Some(text) => {
            manifest.set("input", a.input.as_ref().map(|p| p.display().to_string()).unwrap_or_default());
            let mut d = TrajectoryData::read_csv(text, model.dim(), model.output_dim())
                .map_err(|e| Failure::Usage(format!("--input: {e}")))?;
            if let Some(n) = a.n {
                if n > d.len() {
                    return Err(Failure::Usage(format!("--n exceeds the {} rows of --input", d.len())));
                }
                d.states.truncate(n);
                d.measurements.truncate(n);
            }
            d
        }
        None => {
            manifest.set("seed", a.seed);
            manifest.set("noise", format!("{:?}", a.noise).to_lowercase());
            simulate_resolved(&model, a.n, a.seed, a.noise.into(), None)?.0
        }
    };
    manifest.set("n", data.len());

    let trace: FilterTrace = match &model.model {
        Loaded::Continuous(m) => {
            let m = truncate_samples(m, Some(data.len()))?;
            let step = match a.step {
                Some(h) => positive("--step", h)?,
                None => default_step(&m),
            };
            let scheme = match a.scheme {
                SchemeArg::Rk4 => Scheme::RungeKutta4,
                SchemeArg::Euler => Scheme::Euler,
            };
            manifest.set("step", fmt_f64(step));
            manifest.set("scheme", format!("{:?}", a.scheme).to_lowercase());
            let trace = cd_run(&m, &data.measurements, &init, &IntegratorConfig { step, scheme })?;
            let p = write_atomic(&dir, "summary.txt", |w| write_summary(&trace, w))?;
            manifest.output(&p);
            trace
        }
        _ => run_variant(&model.system("filter")?, &data.measurements, &init, variant)?,
    };
    let p = write_atomic(&dir, "trace.csv", |w| trace.write_csv(w))?;
    manifest.output(&p);
    manifest.set("clamp_count", trace.clamp_count);
    manifest.write(&dir, "filter")?;
    println!("filtered {} samples ({}), wrote {}", trace.len(), variant.label(), p.display());
    Ok(())
}

fn compare(a: CompareArgs) -> CmdResult<()> {
    let model = resolve_model(&a.common.model)?;
    let beta = finite_nonneg("--beta", a.beta)?;
    if a.replicates == 0 {
        return Err(Failure::Usage("--replicates must be at least 1".into()));
    }
    if a.n <= a.max_lag + 1 {
        return Err(Failure::Usage(format!("--n must exceed --max-lag + 1 (= {})", a.max_lag + 1)));
    }
    if a.burn_in >= a.n {
        return Err(Failure::Usage("--burn-in must be smaller than --n".into()));
    }
    let system = model.system("compare")?;
    let dim = model.dim();
    let dir = out_dir(&a.common.out)?;
    let setup = CompareSetup {
        model: system,
        model_id: model.id.clone(),
        x1: model.x0.clone(),
        prior: match a.prior {
            PriorArg::Zero => PriorSpec::zero_covariance(dim),
            PriorArg::Unit => PriorSpec::unit_covariance(dim),
        },
        noise: a.noise.into(),
        max_lag: a.max_lag,
        burn_in: a.burn_in,
    };
    let filters = [Variant::CovarianceUpdate, Variant::FixedBeta(beta)];
    let report = monte_carlo_compare(&setup, &filters, a.replicates, a.n, a.seed)?;

    let mut manifest = Manifest::new("compare", &model);
    manifest.set("seed", a.seed);
    manifest.set("replicates", a.replicates);
    manifest.set("n", a.n);
    manifest.set("beta", fmt_f64(beta));
    manifest.set("noise", format!("{:?}", a.noise).to_lowercase());
    manifest.set("prior", format!("{:?}", a.prior).to_lowercase());
    manifest.set("max_lag", a.max_lag);
    manifest.set("burn_in", a.burn_in);
    manifest.set("x1", join(&model.x0));

    let p = write_atomic(&dir, "report.txt", |w| report.write_table(w))?;
    manifest.output(&p);
    let p = write_atomic(&dir, "report.csv", |w| report.write_csv(w))?;
    manifest.output(&p);

    // One trajectory with both filters' estimates, for plotting.
    let run = run_replicate(&setup, &filters, a.n, a.seed, 0)?;
    let p = write_atomic(&dir, "figure1.csv", |w| {
        let mut header = vec!["k".to_string(), "x_true".into(), "y".into()];
        header.extend(filters.iter().map(|f| format!("xhat_{}", f.label())));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..run.truth.len() {
            let mut row = vec![
                (k + 1).to_string(),
                fmt_f64(run.truth.states[k][0]),
                fmt_f64(run.truth.measurements[k][0]),
            ];
            row.extend(run.traces.iter().map(|t| fmt_f64(t.steps[k].posterior.xhat[0])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    manifest.output(&p);
    manifest.write(&dir, "compare")?;

    let mut table = Vec::new();
    report.write_table(&mut table)?;
    print!("{}", String::from_utf8_lossy(&table));
    Ok(())
}

fn oracle_check(a: OracleArgs) -> CmdResult<()> {
    let model = resolve_model(&a.common.model)?;
    let system = model.system("oracle-check")?;
    let init = prior_estimate(&model, &None, a.prior_var)?;
    let dir = out_dir(&a.common.out)?;
    let dynamics = system.dynamics();
    let data = simulate_discrete(dynamics, &model.x0, a.horizon + 1, a.seed, NoiseDistribution::Gaussian)?;
    let trace = run_variant(&system, &data.measurements, &init, Variant::CovarianceUpdate)?;
    let oracle = oracle_filter(dynamics, &data.measurements, &init, &OracleConfig::default())?;
    let rows = compare_with_trace(&oracle, &trace)?;
    let max = rows.iter().map(|r| r.max_delta()).fold(0.0, f64::max);

    let mut manifest = Manifest::new("oracle-check", &model);
    manifest.set("seed", a.seed);
    manifest.set("horizon", a.horizon);
    manifest.set("prior_var", fmt_f64(a.prior_var));
    manifest.set("tolerance", fmt_f64(ORACLE_TOLERANCE));
    manifest.set("max_relative_delta", fmt_f64(max));
    let p = write_atomic(&dir, "equivalence.csv", |w| write_equivalence_csv(&rows, w))?;
    manifest.output(&p);
    manifest.write(&dir, "oracle-check")?;

    println!("max relative delta {max:e} over {} steps (tolerance {ORACLE_TOLERANCE:e})", rows.len());
    if max <= ORACLE_TOLERANCE {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "oracle and filter differ by {max:e}, above {ORACLE_TOLERANCE:e}"
        )))
    }
}

fn limit_check(a: LimitArgs) -> CmdResult<()> {
    let model = resolve_model(&a.common.model)?;
    let Loaded::Continuous(m) = &model.model else {
        return Err(Failure::Usage(format!(
            "--model: limit-check needs a continuous-discrete model, '{}' is discrete-time",
            model.id
        )));
    };
    let span = positive("--span", a.span)?;
    if a.dts.is_empty() {
        return Err(Failure::Usage("--dts needs at least one step".into()));
    }
    for &dt in &a.dts {
        positive("--dts", dt)?;
        if dt > span {
            return Err(Failure::Usage(format!("--dts: step {dt} exceeds --span {span}")));
        }
    }
    let init = prior_estimate(&model, &None, a.prior_var)?;
    let dir = out_dir(&a.common.out)?;
    let table = euler_limit_check(&m.dynamics, &init, 0.0, span, &a.dts)?;

    let mut manifest = Manifest::new("limit-check", &model);
    manifest.set("dts", a.dts.iter().map(|&d| fmt_f64(d)).collect::<Vec<_>>().join(","));
    manifest.set("span", fmt_f64(span));
    manifest.set("prior_var", fmt_f64(a.prior_var));
    let p = write_atomic(&dir, "limit.csv", |w| table.write_csv(w))?;
    manifest.output(&p);
    manifest.write(&dir, "limit-check")?;

    for r in &table.rows {
        println!("dt {:<10} sigma error {:e}  mean error {:e}", fmt_f64(r.dt), r.sigma_error, r.mean_error);
    }
    let ratios: Vec<String> = table.sigma_ratios().iter().map(|r| format!("{r:.3}")).collect();
    println!("covariance error ratios: {}", ratios.join(" "));
    Ok(())
}
