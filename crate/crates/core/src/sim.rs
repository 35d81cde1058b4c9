//! Seeded simulation, Monte Carlo comparison of filters, and the statistics
//! used to judge them.
//!
//! Random numbers come from ChaCha20 (`rand_chacha::ChaCha20Rng`). Each
//! replicate gets its own generator seeded by a SplitMix64 hash of
//! `(master_seed, stream index)`, so results do not depend on the order or
//! thread on which replicates run.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fmt_f64, FilterTrace, StateEstimate};
use crate::filter_discrete::{run_filter, Variant};
use crate::filter_nonlinear::nl_run_variant;
use crate::linalg::{psd_factor, Matrix, Vector};
use crate::model::{eval_g, ContinuousDiscreteModel, StateDynamics, SystemModel};

/// Distribution of the unit-variance noise draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
    /// Uniform on `[−√3, √3]` (zero mean, unit variance).
    Uniform,
}

impl NoiseDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseDistribution::Gaussian => rng.sample(StandardNormal),
            NoiseDistribution::Uniform => {
                let s3 = 3.0_f64.sqrt();
                rng.random_range(-s3..s3)
            }
        }
    }

    fn vector<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vector {
        Vector::from_iterator(len, (0..len).map(|_| self.sample(rng)))
    }
}

/// SplitMix64 finalizer applied to `master ⊕ golden·(index+1)`.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ 0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// A simulated path and its measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryData {
    /// True states `x_1 … x_N`.
    pub states: Vec<Vector>,
    /// Measurements `y_1 … y_N`.
    pub measurements: Vec<Vector>,
    /// Sample instants (continuous-discrete simulations).
    pub times: Option<Vec<f64>>,
    pub seed: u64,
    pub model_id: String,
    /// `g²` was floored somewhere on the true path.
    pub clamped: bool,
}

impl TrajectoryData {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    /// CSV with columns `k[,t],x_true_*,y_*`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        let m = self.measurements.first().map_or(0, |y| y.len());
        let mut header = vec!["k".to_string()];
        if self.times.is_some() {
            header.push("t".into());
        }
        header.extend((0..n).map(|i| format!("x_true_{i}")));
        header.extend((0..m).map(|i| format!("y_{i}")));
        writeln!(out, "{}", header.join(","))?;
        for (k, (x, y)) in self.states.iter().zip(&self.measurements).enumerate() {
            let mut row = vec![(k + 1).to_string()];
            if let Some(t) = &self.times {
                row.push(fmt_f64(t[k]));
            }
            row.extend(x.iter().map(|&v| fmt_f64(v)));
            row.extend(y.iter().map(|&v| fmt_f64(v)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Parse the CSV written by [`write_csv`](Self::write_csv) given the
    /// state and output dimensions.
    pub fn read_csv(text: &str, n: usize, m: usize) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty trajectory file".into(),
        })?;
        let timed = header.split(',').nth(1) == Some("t");
        let offset = 1 + usize::from(timed);
        let mut states = Vec::new();
        let mut measurements = Vec::new();
        let mut times = Vec::new();
        for (i, line) in lines.enumerate() {
            let vals: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })?;
            if vals.len() != offset + n + m {
                return Err(Error::Parse {
                    line: i + 2,
                    message: format!("expected {} columns, found {}", offset + n + m, vals.len()),
                });
            }
            if timed {
                times.push(vals[1]);
            }
            states.push(Vector::from_row_slice(&vals[offset..offset + n]));
            measurements.push(Vector::from_row_slice(&vals[offset + n..]));
        }
        Ok(Self {
            states,
            measurements,
            times: timed.then_some(times),
            seed: 0,
            model_id: String::new(),
            clamped: false,
        })
    }
}

/// `L` with `L L' = Σ` (Cholesky when positive definite).
fn noise_factor(sigma: &Matrix) -> Matrix {
    match sigma.clone().cholesky() {
        Some(c) => c.unpack(),
        None => psd_factor(sigma, 1e-14),
    }
}

/// Simulate `x_{k+1} = f(x_k) + G(x_k) v_k`, `y_k = C x_k + w_k` from
/// `x_1 = x0`, with `G` evaluated at the true state.
pub fn simulate_discrete<M: StateDynamics + ?Sized>(
    model: &M,
    x0: &Vector,
    n: usize,
    seed: u64,
    noise: NoiseDistribution,
) -> Result<TrajectoryData> {
    if n == 0 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    if x0.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, model has {} states",
            x0.len(),
            model.state_dim()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let fv = noise_factor(model.process_noise());
    let fw = noise_factor(model.measurement_noise());
    let c = model.output_matrix();
    let mut x = x0.clone();
    let mut clamped = false;
    let mut states = Vec::with_capacity(n);
    let mut measurements = Vec::with_capacity(n);
    for k in 1..=n {
        let w = &fw * noise.vector(&mut rng, fw.ncols());
        let v = &fv * noise.vector(&mut rng, fv.ncols());
        measurements.push(c * &x + w);
        states.push(x.clone());
        if k == n {
            break;
        }
        let g = model.gain(&x);
        clamped |= g.clamped;
        x = model.drift(&x) + g.diag.component_mul(&v);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState {
                context: format!("in simulation at step {}", k + 1),
            });
        }
    }
    Ok(TrajectoryData {
        states,
        measurements,
        times: None,
        seed,
        model_id: String::new(),
        clamped,
    })
}

/// Euler–Maruyama path of `dx = (A0 + A1x)dt + G(x)dβ` started from
/// `x(t_1) = x0`, measured at every sample instant.
pub fn simulate_cd(
    model: &ContinuousDiscreteModel,
    x0: &Vector,
    seed: u64,
    em_step: f64,
    noise: NoiseDistribution,
) -> Result<TrajectoryData> {
    if !(em_step > 0.0) {
        return Err(Error::Config(format!("em_step must be positive, got {em_step}")));
    }
    let dynamics = &model.dynamics;
    if x0.len() != dynamics.state_dim() {
        return Err(Error::Dimension("x0 length differs from the state dimension".into()));
    }
    let mut rng = rng_from_seed(seed);
    let fv = noise_factor(&dynamics.sigma_v);
    let fw = noise_factor(&model.sigma_w);
    let times = &model.sample_times;
    let mut x = x0.clone();
    let mut clamped = false;
    let mut states = Vec::with_capacity(times.len());
    let mut measurements = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        if k > 0 {
            let gap = t - times[k - 1];
            let steps = (gap / em_step).round().max(1.0);
            if (steps * em_step - gap).abs() > 1e-9 * gap.max(1.0) {
                return Err(Error::Config(format!(
                    "em_step {em_step} does not divide the sample gap {gap}"
                )));
            }
            let h = gap / steps;
            let sqrt_h = h.sqrt();
            for _ in 0..steps as usize {
                let g = eval_g(&dynamics.gsq, &x);
                clamped |= g.clamped;
                let xi = &fv * noise.vector(&mut rng, fv.ncols());
                x = &x + dynamics.drift(&x) * h + g.diag.component_mul(&xi) * sqrt_h;
            }
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteState {
                    context: format!("in simulation at t = {t}"),
                });
            }
        }
        let w = &fw * noise.vector(&mut rng, fw.ncols());
        measurements.push(&model.c * &x + w);
        states.push(x.clone());
    }
    Ok(TrajectoryData {
        states,
        measurements,
        times: Some(times.clone()),
        seed,
        model_id: String::new(),
        clamped,
    })
}

/// Mean over steps `k > burn_in` of `‖x̂_{k|k} − x_k‖²`.
pub fn mse(trace: &FilterTrace, truth: &TrajectoryData, burn_in: usize) -> Result<f64> {
    if trace.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: trace.len(),
            right: truth.len(),
        });
    }
    if burn_in >= trace.len() {
        return Err(Error::Config(format!(
            "burn-in {burn_in} leaves no steps out of {}",
            trace.len()
        )));
    }
    let total: f64 = trace.steps[burn_in..]
        .iter()
        .zip(&truth.states[burn_in..])
        .map(|(s, x)| (&s.posterior.xhat - x).norm_squared())
        .sum();
    Ok(total / (trace.len() - burn_in) as f64)
}

/// Sample autocorrelations `ρ(0), …, ρ(max_lag)`.
pub fn autocorrelation(seq: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = seq.len();
    if n <= max_lag {
        return Err(Error::Config(format!(
            "sequence of length {n} is too short for lag {max_lag}"
        )));
    }
    let mean = seq.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = seq.iter().map(|v| v - mean).collect();
    let c0: f64 = centered.iter().map(|v| v * v).sum();
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(Error::DegenerateSequence);
    }
    Ok((0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                return 1.0;
            }
            centered[..n - lag]
                .iter()
                .zip(&centered[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / c0
        })
        .collect())
}

/// Whiteness of a sequence by its sample autocorrelations.
#[derive(Debug, Clone, PartialEq)]
pub struct Whiteness {
    /// Per output component, `ρ(0..=max_lag)`.
    pub autocorrelations: Vec<Vec<f64>>,
    /// `1.96/√N`
    pub bound: f64,
    /// Share of `(component, lag ≥ 1)` pairs with `|ρ| ≤ bound`.
    pub pass_fraction: f64,
}

/// Whiteness of scalar sequences: lags `1..=max_lag` within `±1.96/√N`.
pub fn whiteness_of(series: &[Vec<f64>], max_lag: usize) -> Result<Whiteness> {
    let n = series.first().map_or(0, |s| s.len());
    let bound = 1.96 / (n as f64).sqrt();
    let mut autocorrelations = Vec::with_capacity(series.len());
    let mut passed = 0usize;
    for s in series {
        let rho = autocorrelation(s, max_lag)?;
        passed += rho[1..].iter().filter(|r| r.abs() <= bound).count();
        autocorrelations.push(rho);
    }
    let total = series.len() * max_lag;
    Ok(Whiteness {
        autocorrelations,
        bound,
        pass_fraction: if total == 0 { 1.0 } else { passed as f64 / total as f64 },
    })
}

/// Normalized innovations `L_k⁻¹ e_k` with `L_k L_k' = S_k`, one series per
/// output component.
pub fn normalized_innovations(trace: &FilterTrace) -> Result<Vec<Vec<f64>>> {
    let m = trace.steps.first().map_or(0, |s| s.innovation.len());
    let mut series = vec![Vec::with_capacity(trace.len()); m];
    for s in &trace.steps {
        let chol = s
            .innovation_cov
            .clone()
            .cholesky()
            .ok_or(Error::SingularInnovation {
                step: s.prior.index,
            })?;
        let u = chol
            .l()
            .solve_lower_triangular(&s.innovation)
            .ok_or(Error::SingularInnovation {
                step: s.prior.index,
            })?;
        for (i, v) in u.iter().enumerate() {
            series[i].push(*v);
        }
    }
    Ok(series)
}

pub fn innovation_whiteness(trace: &FilterTrace, max_lag: usize) -> Result<Whiteness> {
    whiteness_of(&normalized_innovations(trace)?, max_lag)
}

/// How the filter prior `x̂_{1|0}`, `Σ_{1|0}` is formed in each replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    /// `x̂_{1|0}` is drawn from `N(0, mean_sd²·I)`.
    pub mean_sd: f64,
    /// `Σ_{1|0}`
    pub cov: Matrix,
}

impl PriorSpec {
    /// `x̂_{1|0} ~ N(0, I)` with `Σ_{1|0} = 0`.
    pub fn zero_covariance(n: usize) -> Self {
        Self {
            mean_sd: 1.0,
            cov: Matrix::zeros(n, n),
        }
    }

    /// `x̂_{1|0} ~ N(0, I)` with `Σ_{1|0} = I`.
    pub fn unit_covariance(n: usize) -> Self {
        Self {
            mean_sd: 1.0,
            cov: Matrix::identity(n, n),
        }
    }
}

/// Everything a Monte Carlo comparison needs besides the filters.
#[derive(Debug, Clone)]
pub struct CompareSetup {
    pub model: SystemModel,
    pub model_id: String,
    /// True initial state `x_1`.
    pub x1: Vector,
    pub prior: PriorSpec,
    pub noise: NoiseDistribution,
    pub max_lag: usize,
    pub burn_in: usize,
}

/// One replicate: trajectory, filter prior, and each filter's trace.
#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub truth: TrajectoryData,
    pub init: StateEstimate,
    pub traces: Vec<FilterTrace>,
}

/// Run a filter variant on either model family.
pub fn run_variant(
    model: &SystemModel,
    measurements: &[Vector],
    init: &StateEstimate,
    variant: Variant,
) -> Result<FilterTrace> {
    match model {
        SystemModel::Linear(m) => run_filter(m, measurements, init, variant),
        SystemModel::Nonlinear(m) => nl_run_variant(m, measurements, init, variant),
    }
}

/// Simulate replicate `index` and run every filter on it.
pub fn run_replicate(
    setup: &CompareSetup,
    filters: &[Variant],
    n: usize,
    master_seed: u64,
    index: usize,
) -> Result<ReplicateRun> {
    let dynamics = setup.model.dynamics();
    let path_seed = replicate_seed(master_seed, 2 * index as u64);
    let truth = simulate_discrete(dynamics, &setup.x1, n, path_seed, setup.noise)?
        .with_model_id(setup.model_id.clone());
    let mut prior_rng = rng_from_seed(replicate_seed(master_seed, 2 * index as u64 + 1));
    let dim = dynamics.state_dim();
    let mean = Vector::from_iterator(
        dim,
        (0..dim).map(|_| setup.prior.mean_sd * prior_rng.sample::<f64, _>(StandardNormal)),
    );
    let init = StateEstimate::new(mean, setup.prior.cov.clone(), 1);
    let traces = filters
        .iter()
        .map(|&v| run_variant(&setup.model, &truth.measurements, &init, v))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateRun {
        truth,
        init,
        traces,
    })
}

/// Per-filter aggregate over replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    pub label: String,
    pub mse: Vec<f64>,
    pub mean_mse: f64,
    pub se_mse: f64,
    /// `1.96 · se_mse`
    pub half_width: f64,
    /// Mean MSE over replicates whose true path never floored `g²`.
    pub unmarked_mean_mse: f64,
    pub pass_fraction: Vec<f64>,
    pub mean_pass_fraction: f64,
    /// Replicate-averaged `ρ(0..=max_lag)` of the first output component.
    pub mean_autocorrelation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub model_id: String,
    pub replicates: usize,
    pub n: usize,
    pub master_seed: u64,
    pub max_lag: usize,
    pub filters: Vec<FilterSummary>,
    /// Replicates whose true path floored `g²`.
    pub marked: Vec<usize>,
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ComparisonReport {
    /// Mean and standard error of the per-replicate difference
    /// `mse[a] − mse[b]`.
    pub fn paired_difference(&self, a: usize, b: usize) -> (f64, f64) {
        let d: Vec<f64> = self.filters[a]
            .mse
            .iter()
            .zip(&self.filters[b].mse)
            .map(|(x, y)| x - y)
            .collect();
        mean_and_se(&d)
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "model {} | replicates {} | N {} | seed {} | marked {}",
            self.model_id,
            self.replicates,
            self.n,
            self.master_seed,
            self.marked.len()
        )?;
        writeln!(
            out,
            "{:<24} {:>14} {:>12} {:>12} {:>14}",
            "filter", "mean MSE", "+/- 95%", "whiteness", "MSE unmarked"
        )?;
        for f in &self.filters {
            writeln!(
                out,
                "{:<24} {:>14.6} {:>12.6} {:>12.4} {:>14.6}",
                f.label, f.mean_mse, f.half_width, f.mean_pass_fraction, f.unmarked_mean_mse
            )?;
        }
        if self.filters.len() >= 2 {
            let (d, se) = self.paired_difference(0, 1);
            writeln!(
                out,
                "paired MSE difference ({} - {}): {:.6} (se {:.6})",
                self.filters[0].label, self.filters[1].label, d, se
            )?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let lags: Vec<String> = (0..=self.max_lag).map(|l| format!("rho_{l}")).collect();
        writeln!(
            out,
            "filter,replicates,n,mean_mse,se_mse,half_width,unmarked_mean_mse,mean_pass_fraction,{}",
            lags.join(",")
        )?;
        for f in &self.filters {
            let rho: Vec<String> = f.mean_autocorrelation.iter().map(|&r| fmt_f64(r)).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                f.label,
                self.replicates,
                self.n,
                fmt_f64(f.mean_mse),
                fmt_f64(f.se_mse),
                fmt_f64(f.half_width),
                fmt_f64(f.unmarked_mean_mse),
                fmt_f64(f.mean_pass_fraction),
                rho.join(",")
            )?;
        }
        Ok(())
    }
}

struct ReplicateStats {
    mse: Vec<f64>,
    pass: Vec<f64>,
    rho: Vec<Vec<f64>>,
    marked: bool,
}

/// Run `replicates` independent simulations and compare the filters on each.
pub fn monte_carlo_compare(
    setup: &CompareSetup,
    filters: &[Variant],
    replicates: usize,
    n: usize,
    master_seed: u64,
) -> Result<ComparisonReport> {
    if replicates == 0 {
        return Err(Error::Config("replicates must be at least 1".into()));
    }
    if filters.is_empty() {
        return Err(Error::Config("no filters to compare".into()));
    }
    let stats: Vec<ReplicateStats> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let tag = |e: Error| Error::Replicate {
                replicate: r,
                source: Box::new(e),
            };
            let run = run_replicate(setup, filters, n, master_seed, r).map_err(tag)?;
            let mut mse_v = Vec::with_capacity(filters.len());
            let mut pass = Vec::with_capacity(filters.len());
            let mut rho = Vec::with_capacity(filters.len());
            for trace in &run.traces {
                mse_v.push(mse(trace, &run.truth, setup.burn_in).map_err(tag)?);
                let w = innovation_whiteness(trace, setup.max_lag).map_err(tag)?;
                pass.push(w.pass_fraction);
                rho.push(w.autocorrelations[0].clone());
            }
            Ok(ReplicateStats {
                mse: mse_v,
                pass,
                rho,
                marked: run.truth.clamped,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let marked: Vec<usize> = stats
        .iter()
        .enumerate()
        .filter(|(_, s)| s.marked)
        .map(|(i, _)| i)
        .collect();
    let summaries = filters
        .iter()
        .enumerate()
        .map(|(f, variant)| {
            let mse_v: Vec<f64> = stats.iter().map(|s| s.mse[f]).collect();
            let pass: Vec<f64> = stats.iter().map(|s| s.pass[f]).collect();
            let (mean_mse, se_mse) = mean_and_se(&mse_v);
            let unmarked: Vec<f64> = stats
                .iter()
                .filter(|s| !s.marked)
                .map(|s| s.mse[f])
                .collect();
            let mut rho = vec![0.0; setup.max_lag + 1];
            for s in &stats {
                for (acc, r) in rho.iter_mut().zip(&s.rho[f]) {
                    *acc += r;
                }
            }
            rho.iter_mut().for_each(|r| *r /= replicates as f64);
            FilterSummary {
                label: variant.label(),
                mean_mse,
                se_mse,
                half_width: 1.96 * se_mse,
                unmarked_mean_mse: if unmarked.is_empty() {
                    f64::NAN
                } else {
                    unmarked.iter().sum::<f64>() / unmarked.len() as f64
                },
                mean_pass_fraction: pass.iter().sum::<f64>() / replicates as f64,
                pass_fraction: pass,
                mse: mse_v,
                mean_autocorrelation: rho,
            }
        })
        .collect();
    Ok(ComparisonReport {
        model_id: setup.model_id.clone(),
        replicates,
        n,
        master_seed,
        max_lag: setup.max_lag,
        filters: summaries,
        marked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::estimate::TraceStep;

    #[test]
    fn noiseless_recursion() {
        let mut model = catalog::example_sec3();
        model.sigma_v = Matrix::zeros(1, 1);
        model.sigma_w = Matrix::zeros(1, 1);
        let t = simulate_discrete(&model, &Vector::from_element(1, 1.0), 3, 7, NoiseDistribution::Gaussian)
            .unwrap();
        assert_eq!(t.states[0][0], 1.0);
        assert!((t.states[1][0] - 1.99).abs() < 1e-14);
        assert!((t.states[2][0] - 2.9701).abs() < 1e-14);
        for (x, y) in t.states.iter().zip(&t.measurements) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let model = catalog::example_sec3();
        let x0 = Vector::from_element(1, 1.0);
        let a = simulate_discrete(&model, &x0, 50, 11, NoiseDistribution::Gaussian).unwrap();
        let b = simulate_discrete(&model, &x0, 50, 11, NoiseDistribution::Gaussian).unwrap();
        let c = simulate_discrete(&model, &x0, 50, 12, NoiseDistribution::Gaussian).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn replicate_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| replicate_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn mse_examples() {
        let truth = TrajectoryData {
            states: vec![Vector::from_element(1, 1.0), Vector::from_element(1, 2.0)],
            measurements: vec![Vector::zeros(1); 2],
            times: None,
            seed: 0,
            model_id: String::new(),
            clamped: false,
        };
        let trace_with = |offset: f64| FilterTrace {
            steps: truth
                .states
                .iter()
                .map(|x| {
                    let e = StateEstimate::new(x.add_scalar(offset), Matrix::zeros(1, 1), 1);
                    TraceStep {
                        prior: e.clone(),
                        posterior: e,
                        innovation: Vector::zeros(1),
                        innovation_cov: Matrix::identity(1, 1),
                        gain: Matrix::zeros(1, 1),
                    }
                })
                .collect(),
            ..FilterTrace::default()
        };
        assert_eq!(mse(&trace_with(0.0), &truth, 0).unwrap(), 0.0);
        assert!((mse(&trace_with(0.3), &truth, 0).unwrap() - 0.09).abs() < 1e-15);
        let mut short = trace_with(0.0);
        short.steps.pop();
        assert!(matches!(mse(&short, &truth, 0), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn autocorrelation_lag_zero_is_one() {
        let mut rng = rng_from_seed(3);
        let xs: Vec<f64> = (0..100).map(|_| rng.sample(StandardNormal)).collect();
        let rho = autocorrelation(&xs, 5).unwrap();
        assert_eq!(rho[0], 1.0);
        assert!(rho[1..].iter().all(|r| r.abs() < 1.0));
    }

    #[test]
    fn constant_sequence_is_degenerate() {
        assert_eq!(autocorrelation(&[2.0; 30], 3), Err(Error::DegenerateSequence));
    }

    #[test]
    fn short_sequence_is_rejected() {
        assert!(autocorrelation(&[1.0, 2.0, 3.0], 3).is_err());
    }

    #[test]
    fn uniform_noise_has_unit_variance() {
        let mut rng = rng_from_seed(5);
        let xs: Vec<f64> = (0..200_000).map(|_| NoiseDistribution::Uniform.sample(&mut rng)).collect();
        let (mean, _) = mean_and_se(&xs);
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
        assert!(xs.iter().all(|x| x.abs() <= 3.0_f64.sqrt()));
    }

    #[test]
    fn em_step_must_divide_gaps() {
        let model = catalog::birth_death_cle();
        let err = simulate_cd(&model, &Vector::from_element(1, 100.0), 1, 0.3, NoiseDistribution::Gaussian);
        assert!(err.is_err());
        let ok = simulate_cd(&model, &Vector::from_element(1, 100.0), 1, 0.25, NoiseDistribution::Gaussian)
            .unwrap();
        assert_eq!(ok.len(), 50);
        assert_eq!(ok.times.as_ref().unwrap()[0], 1.0);
    }

    #[test]
    fn trajectory_csv_round_trip() {
        let model = catalog::example_sec3();
        let t = simulate_discrete(&model, &Vector::from_element(1, 1.0), 20, 9, NoiseDistribution::Gaussian)
            .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = TrajectoryData::read_csv(std::str::from_utf8(&buf).unwrap(), 1, 1).unwrap();
        assert_eq!(back.states, t.states);
        assert_eq!(back.measurements, t.measurements);
    }
}
