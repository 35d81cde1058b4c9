//! Continuous-discrete filter: mean and covariance ODEs between samples,
//! the discrete measurement update at each sample instant.
//!
//! Between samples
//!
//! ```text
//! dx̂/dt = A0 + A1 x̂
//! dΣ/dt = A1 Σ + Σ A1' + G(x̂) Σv G(x̂)
//! ```
//!
//! with `G` evaluated along the evolving estimate.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::estimate::{FilterTrace, StateEstimate, TraceStep};
use crate::filter_discrete::{measurement_update_full, time_update};
use crate::linalg::{all_finite, max_abs, max_abs_vec, symmetrize, Matrix, Vector};
use crate::model::{eval_g, ContinuousDiscreteModel, ContinuousDynamics, DiscreteLinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    RungeKutta4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step: f64,
    pub scheme: Scheme,
}

impl IntegratorConfig {
    pub fn rk4(step: f64) -> Self {
        Self {
            step,
            scheme: Scheme::RungeKutta4,
        }
    }

    pub fn euler(step: f64) -> Self {
        Self {
            step,
            scheme: Scheme::Euler,
        }
    }

    /// RK4 with a hundredth of the smallest sample gap (0.01 for a single sample).
    pub fn for_model(model: &ContinuousDiscreteModel) -> Self {
        let gap = model.min_gap();
        Self::rk4(if gap.is_finite() { gap / 100.0 } else { 0.01 })
    }
}

/// Result of one inter-sample propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagation {
    pub estimate: StateEstimate,
    pub clamp_count: usize,
    pub steps: usize,
}

struct Derivative {
    dx: Vector,
    dsigma: Matrix,
    clamped: bool,
}

fn rhs(dynamics: &ContinuousDynamics, x: &Vector, sigma: &Matrix) -> Derivative {
    let g = eval_g(&dynamics.gsq, x);
    let a_sigma = &dynamics.a1 * sigma;
    Derivative {
        dx: dynamics.drift(x),
        dsigma: &a_sigma + a_sigma.transpose() + g.scale_noise(&dynamics.sigma_v),
        clamped: g.clamped,
    }
}

/// Integrate without the final symmetrization.
fn integrate(
    dynamics: &ContinuousDynamics,
    x0: &Vector,
    sigma0: &Matrix,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<(Vector, Matrix, usize, usize)> {
    let span = t1 - t0;
    if !(span >= 0.0) {
        return Err(Error::Config(format!("time update needs t1 >= t0, got {t0} -> {t1}")));
    }
    if span == 0.0 {
        return Ok((x0.clone(), sigma0.clone(), 0, 0));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::Config(format!("integration step must be positive, got {}", cfg.step)));
    }
    if cfg.step > span * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge {
            step: cfg.step,
            interval: span,
        });
    }
    let n = ((span / cfg.step) - 1e-9).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut x = x0.clone();
    let mut sigma = sigma0.clone();
    let mut clamps = 0;
    for i in 0..n {
        match cfg.scheme {
            Scheme::Euler => {
                let d = rhs(dynamics, &x, &sigma);
                clamps += usize::from(d.clamped);
                x += &d.dx * h;
                sigma += &d.dsigma * h;
            }
            Scheme::RungeKutta4 => {
                let k1 = rhs(dynamics, &x, &sigma);
                let k2 = rhs(dynamics, &(&x + &k1.dx * (h / 2.0)), &(&sigma + &k1.dsigma * (h / 2.0)));
                let k3 = rhs(dynamics, &(&x + &k2.dx * (h / 2.0)), &(&sigma + &k2.dsigma * (h / 2.0)));
                let k4 = rhs(dynamics, &(&x + &k3.dx * h), &(&sigma + &k3.dsigma * h));
                clamps += [&k1, &k2, &k3, &k4].iter().filter(|k| k.clamped).count();
                x += (&k1.dx + &k2.dx * 2.0 + &k3.dx * 2.0 + &k4.dx) * (h / 6.0);
                sigma += (&k1.dsigma + &k2.dsigma * 2.0 + &k3.dsigma * 2.0 + &k4.dsigma) * (h / 6.0);
            }
        }
        if !x.iter().all(|v| v.is_finite()) || !all_finite(&sigma) {
            return Err(Error::NonFiniteState {
                context: format!("at t = {}", t0 + (i + 1) as f64 * h),
            });
        }
    }
    Ok((x, sigma, clamps, n))
}

/// Propagate `post` from `t0` to `t1`.
pub fn cd_time_update(
    post: &StateEstimate,
    dynamics: &ContinuousDynamics,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Propagation> {
    if t1 == t0 {
        return Ok(Propagation {
            estimate: post.clone(),
            clamp_count: 0,
            steps: 0,
        });
    }
    let (x, mut sigma, clamp_count, steps) = integrate(dynamics, &post.xhat, &post.sigma, t0, t1, cfg)?;
    symmetrize(&mut sigma);
    Ok(Propagation {
        estimate: StateEstimate::at_time(x, sigma, post.index + 1, t1),
        clamp_count,
        steps,
    })
}

/// Filter the measurements taken at `model.sample_times`, starting from the
/// prior `init` at the first sample instant.
pub fn cd_run(
    model: &ContinuousDiscreteModel,
    measurements: &[Vector],
    init: &StateEstimate,
    cfg: &IntegratorConfig,
) -> Result<FilterTrace> {
    let times = &model.sample_times;
    if measurements.len() != times.len() {
        return Err(Error::LengthMismatch {
            left: measurements.len(),
            right: times.len(),
        });
    }
    let mut trace = FilterTrace::default();
    let mut prior = StateEstimate {
        time: Some(times[0]),
        ..init.clone()
    };
    for (k, y) in measurements.iter().enumerate() {
        let step = measurement_update_full(&prior, y, &model.c, &model.sigma_w)
            .map_err(|e| e.at_step(init.index + k))?;
        let next = match times.get(k + 1) {
            Some(&t_next) => {
                let p = cd_time_update(&step.posterior, &model.dynamics, times[k], t_next, cfg)?;
                trace.clamp_count += p.clamp_count;
                trace.integration_steps += p.steps;
                Some(p.estimate)
            }
            None => None,
        };
        trace.steps.push(TraceStep {
            prior,
            posterior: step.posterior,
            innovation: step.innovation,
            innovation_cov: step.innovation_cov,
            gain: step.gain,
        });
        match next {
            Some(p) => prior = p,
            None => break,
        }
    }
    Ok(trace)
}

/// Integration diagnostics written next to a continuous-discrete trace.
pub fn write_summary<W: Write>(trace: &FilterTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "clamp_count={}", trace.clamp_count)?;
    writeln!(out, "integration_steps={}", trace.integration_steps)?;
    writeln!(out, "samples={}", trace.len())
}

/// Error of the Euler discretization at one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitRow {
    /// Step actually used (the interval divided into a whole number of steps).
    pub dt: f64,
    pub steps: usize,
    pub sigma_error: f64,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitTable {
    pub rows: Vec<LimitRow>,
    pub reference: StateEstimate,
}

impl LimitTable {
    /// `error(Δt_i) / error(Δt_{i+1})` for the covariance.
    pub fn sigma_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].sigma_error / w[1].sigma_error)
            .collect()
    }

    pub fn mean_ratios(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| w[0].mean_error / w[1].mean_error)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "dt,steps,sigma_error,mean_error")?;
        for r in &self.rows {
            writeln!(out, "{:?},{},{:?},{:?}", r.dt, r.steps, r.sigma_error, r.mean_error)?;
        }
        Ok(())
    }
}

/// The discrete model obtained over one step `Δt`:
/// `x⁺ = A0Δt + (I + ΔtA1)x + ΔtG(x)v`, `cov(v) = Σv/Δt`.
pub fn euler_discretization(dynamics: &ContinuousDynamics, dt: f64) -> DiscreteLinearModel {
    let n = dynamics.state_dim();
    DiscreteLinearModel {
        a0: &dynamics.a0 * dt,
        a1: Matrix::identity(n, n) + &dynamics.a1 * dt,
        c: Matrix::identity(n, n),
        gsq: dynamics.gsq.scaled(dt * dt),
        sigma_v: &dynamics.sigma_v / dt,
        sigma_w: Matrix::identity(n, n),
    }
}

/// Compare repeated discrete time updates on the Euler discretization with
/// the ODE solution (RK4 at a step 1/64 of the finest `Δt`).
pub fn euler_limit_check(
    dynamics: &ContinuousDynamics,
    post: &StateEstimate,
    t0: f64,
    t1: f64,
    dts: &[f64],
) -> Result<LimitTable> {
    let span = t1 - t0;
    let finest = dts.iter().cloned().fold(f64::INFINITY, f64::min).min(span);
    let reference = cd_time_update(post, dynamics, t0, t1, &IntegratorConfig::rk4(finest / 64.0))?
        .estimate;
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        let steps = (span / dt).round().max(1.0) as usize;
        let dt = span / steps as f64;
        let disc = euler_discretization(dynamics, dt);
        let mut est = post.clone();
        for _ in 0..steps {
            est = time_update(&est, &disc);
        }
        rows.push(LimitRow {
            dt,
            steps,
            sigma_error: max_abs(&(&est.sigma - &reference.sigma)),
            mean_error: max_abs_vec(&(&est.xhat - &reference.xhat)),
        });
    }
    Ok(LimitTable { rows, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffineVariance;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn dyn1(a0: f64, a1: f64, gsq: [f64; 2], sv: f64) -> ContinuousDynamics {
        ContinuousDynamics {
            a0: Vector::from_element(1, a0),
            a1: scalar(a1),
            gsq: AffineVariance::new(Matrix::from_row_slice(1, 2, &gsq)).unwrap(),
            sigma_v: scalar(sv),
        }
    }

    #[test]
    fn zero_length_interval_is_identity() {
        let d = dyn1(10.0, -0.1, [10.0, 0.1], 1.0);
        let post = StateEstimate::at_time(Vector::from_element(1, 3.0), scalar(2.0), 1, 5.0);
        let p = cd_time_update(&post, &d, 5.0, 5.0, &IntegratorConfig::rk4(0.1)).unwrap();
        assert_eq!(p.estimate, post);
    }

    #[test]
    fn constant_integrand_is_linear_in_time() {
        let d = ContinuousDynamics {
            a0: Vector::zeros(2),
            a1: Matrix::zeros(2, 2),
            gsq: AffineVariance::constant(&[3.0, 3.0]),
            sigma_v: Matrix::identity(2, 2) * 0.25,
        };
        let post = StateEstimate::new(Vector::zeros(2), Matrix::identity(2, 2), 1);
        let p = cd_time_update(&post, &d, 0.0, 2.0, &IntegratorConfig::rk4(0.1)).unwrap();
        let want = Matrix::identity(2, 2) * (1.0 + 3.0 * 0.25 * 2.0);
        assert!(max_abs(&(p.estimate.sigma - want)) < 1e-13);
    }

    #[test]
    fn scalar_birth_death_reference() {
        // closed form: x(1) = 100 − 50e^{−0.1}, Σ(1) = 100 − 50e^{−0.1} − 49e^{−0.2}
        let d = dyn1(10.0, -0.1, [10.0, 0.1], 1.0);
        let post = StateEstimate::new(Vector::from_element(1, 50.0), scalar(1.0), 1);
        let p = cd_time_update(&post, &d, 0.0, 1.0, &IntegratorConfig::rk4(0.01)).unwrap();
        assert!((p.estimate.xhat[0] - 54.758_129_098_202_02).abs() < 1e-10);
        assert!((p.estimate.sigma[(0, 0)] - 14.640_322_197_380_91).abs() < 1e-10);
        assert_eq!(p.steps, 100);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let d = dyn1(0.0, 0.0, [1.0, 0.0], 1.0);
        let post = StateEstimate::new(Vector::zeros(1), scalar(1.0), 1);
        let err = cd_time_update(&post, &d, 0.0, 0.5, &IntegratorConfig::rk4(1.0)).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn blow_up_is_non_finite() {
        let d = dyn1(0.0, 800.0, [1.0, 0.0], 1.0);
        let post = StateEstimate::new(Vector::from_element(1, 1.0), scalar(1.0), 1);
        let err = cd_time_update(&post, &d, 0.0, 100.0, &IntegratorConfig::euler(0.5)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }));
    }

    #[test]
    fn covariance_ode_keeps_symmetry_before_symmetrization() {
        let d = ContinuousDynamics {
            a0: Vector::from_vec(vec![1.0, -2.0, 0.5]),
            a1: Matrix::from_row_slice(3, 3, &[-0.3, 0.2, 0.1, 0.05, -0.7, 0.3, -0.2, 0.1, -0.4]),
            gsq: AffineVariance::new(Matrix::from_row_slice(
                3,
                4,
                &[5.0, 0.1, 0.0, 0.0, 4.0, 0.0, 0.2, 0.0, 6.0, 0.0, 0.0, 0.3],
            ))
            .unwrap(),
            sigma_v: Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.5, 2.0])),
        };
        let s0 = Matrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 3.0]);
        let (_, s1, _, _) =
            integrate(&d, &Vector::from_vec(vec![1.0, 2.0, 3.0]), &s0, 0.0, 3.0, &IntegratorConfig::rk4(0.01))
                .unwrap();
        assert!(crate::linalg::is_symmetric(&s1, 1e-10));
    }

    #[test]
    fn single_euler_step_equals_one_discrete_update() {
        let d = dyn1(1.0, -0.5, [100.0, 1.0], 1.0);
        let post = StateEstimate::new(Vector::from_element(1, 3.0), scalar(2.0), 1);
        let table = euler_limit_check(&d, &post, 0.0, 0.4, &[0.4]).unwrap();
        let direct = time_update(&post, &euler_discretization(&d, 0.4));
        // x⁺ = 0.4 + 0.8·3, Σ⁺ = 0.64·2 + 0.4·(100 + 3)
        assert!((direct.xhat[0] - 2.8).abs() < 1e-14);
        assert!((direct.sigma[(0, 0)] - (1.28 + 41.2)).abs() < 1e-12);
        assert_eq!(table.rows[0].steps, 1);
        let err = (direct.sigma[(0, 0)] - table.reference.sigma[(0, 0)]).abs();
        assert_eq!(table.rows[0].sigma_error, err);
    }

    #[test]
    fn single_sample_run_keeps_prior() {
        let model = ContinuousDiscreteModel::new(
            dyn1(10.0, -0.1, [10.0, 0.1], 1.0),
            scalar(1.0),
            scalar(1.0),
            vec![2.0],
        )
        .unwrap();
        let init = StateEstimate::new(Vector::from_element(1, 80.0), scalar(0.0), 1);
        let trace = cd_run(&model, &[Vector::from_element(1, 90.0)], &init, &IntegratorConfig::rk4(0.01))
            .unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.steps[0].posterior.xhat, init.xhat);
        assert_eq!(trace.steps[0].posterior.time, Some(2.0));
    }
}
