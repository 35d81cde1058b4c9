//! Shared helpers: random models, independently coded reference filters, and
//! property checks used by both the proptest suites and the acceptance run.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdkf::estimate::FilterTrace;
use sdkf::filter_cd::{cd_run, IntegratorConfig};
use sdkf::filter_discrete::{run_filter, Variant};
use sdkf::filter_nonlinear::nl_run;
use sdkf::linalg::{is_psd, is_symmetric, max_abs, min_eigenvalue, rel_diff, rel_diff_vec, spectral_norm_sym};
use sdkf::model::{
    central_difference_jacobian, AffineVariance, ContinuousDiscreteModel, ContinuousDynamics,
    DiscreteLinearModel, NonlinearModel,
};
use sdkf::sim::{simulate_discrete, NoiseDistribution};
use sdkf::wls_oracle::{
    build_measurement_cost, build_time_cost, newton_solve, OracleConfig, QuadraticCost, StackedTrajectory,
};
use sdkf::StateEstimate;

pub type M = DMatrix<f64>;
pub type V = DVector<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> M {
    M::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

/// Random matrix with spectral norm `radius`.
fn contraction(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> M {
    let m = uniform(rng, n, n, -1.0, 1.0);
    let s = m.clone().svd(false, false).singular_values[0];
    m * (radius / s)
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> M {
    let b = uniform(rng, n, n, -1.0, 1.0);
    &b * b.transpose() + M::identity(n, n) * 0.5
}

fn positive_diag(rng: &mut ChaCha8Rng, n: usize) -> M {
    M::from_diagonal(&V::from_fn(n, |_, _| rng.random_range(0.5..2.0)))
}

/// Stable discrete model. With `affine`, `g²` depends on the state and can
/// go negative (exercising the floor); otherwise `G` is constant.
pub fn random_discrete(seed: u64, n: usize, m: usize, affine: bool) -> DiscreteLinearModel {
    let mut r = rng(seed);
    let a0 = V::from_fn(n, |_, _| r.random_range(-1.0..1.0));
    let radius = r.random_range(0.3..0.95);
    let a1 = contraction(&mut r, n, radius);
    let c = uniform(&mut r, m, n, -1.0, 1.0) + M::identity(m, n);
    let mut coeffs = M::zeros(n, n + 1);
    for i in 0..n {
        coeffs[(i, 0)] = r.random_range(0.5..3.0);
        if affine {
            for j in 1..=n {
                coeffs[(i, j)] = r.random_range(-1.0..1.0);
            }
        }
    }
    let sigma_v = positive_diag(&mut r, n);
    let sigma_w = spd(&mut r, m);
    DiscreteLinearModel::new(a0, a1, c, AffineVariance::new(coeffs).unwrap(), sigma_v, sigma_w).unwrap()
}

/// Stable continuous-discrete model with constant `G` and irregular sample gaps.
pub fn random_cd(seed: u64, n: usize, m: usize, samples: usize) -> ContinuousDiscreteModel {
    let mut r = rng(seed);
    let a0 = V::from_fn(n, |_, _| r.random_range(-1.0..1.0));
    let a1 = contraction(&mut r, n, 0.5) - M::identity(n, n) * 0.6;
    let mut coeffs = M::zeros(n, n + 1);
    for i in 0..n {
        coeffs[(i, 0)] = r.random_range(0.5..3.0);
    }
    let sigma_v = positive_diag(&mut r, n);
    let c = uniform(&mut r, m, n, -1.0, 1.0) + M::identity(m, n);
    let sigma_w = spd(&mut r, m);
    let mut t = 0.0;
    let times = (0..samples)
        .map(|_| {
            let now = t;
            t += r.random_range(0.5..1.5);
            now
        })
        .collect();
    let dynamics = ContinuousDynamics {
        a0,
        a1,
        gsq: AffineVariance::new(coeffs).unwrap(),
        sigma_v,
    };
    ContinuousDiscreteModel::new(dynamics, c, sigma_w, times).unwrap()
}

pub fn unit_prior(n: usize, seed: u64) -> StateEstimate {
    let mut r = rng(seed ^ 0x5eed);
    StateEstimate::new(V::from_fn(n, |_, _| r.random_range(-1.0..1.0)), M::identity(n, n), 1)
}

pub fn measurements(model: &DiscreteLinearModel, steps: usize, seed: u64) -> Vec<V> {
    let x0 = V::zeros(model.state_dim());
    simulate_discrete(model, &x0, steps, seed, NoiseDistribution::Gaussian)
        .unwrap()
        .measurements
}

/// Arbitrary data around the output scale; any sequence serves a reduction check.
pub fn cd_measurements(model: &ContinuousDiscreteModel, seed: u64) -> Vec<V> {
    let mut r = rng(seed.wrapping_add(3));
    let m = model.c.nrows();
    (0..model.sample_times.len())
        .map(|_| V::from_fn(m, |_, _| r.random_range(-3.0..3.0)))
        .collect()
}

/// Constant process noise `G Σv G`.
fn constant_q(gsq: &AffineVariance, sigma_v: &M) -> M {
    let g = gsq.offset().map(f64::sqrt);
    M::from_fn(sigma_v.nrows(), sigma_v.ncols(), |i, j| g[i] * sigma_v[(i, j)] * g[j])
}

/// Prior and posterior moments from a reference filter.
pub struct Reference {
    pub prior: Vec<(V, M)>,
    pub posterior: Vec<(V, M)>,
}

fn textbook_update(x: &V, p: &M, y: &V, c: &M, r: &M) -> (V, M) {
    let s = c * p * c.transpose() + r;
    let k = p * c.transpose() * s.try_inverse().expect("invertible innovation covariance");
    let n = p.nrows();
    (x + &k * (y - c * x), (M::identity(n, n) - &k * c) * p)
}

/// Textbook Kalman filter with constant `Q`, explicit inverse and the
/// `(I − KC)P` covariance form.
pub fn textbook_kf(model: &DiscreteLinearModel, ys: &[V], x: &V, p: &M) -> Reference {
    let q = constant_q(&model.gsq, &model.sigma_v);
    let (mut x, mut p) = (x.clone(), p.clone());
    let mut out = Reference {
        prior: vec![],
        posterior: vec![],
    };
    for y in ys {
        out.prior.push((x.clone(), p.clone()));
        let (xu, pu) = textbook_update(&x, &p, y, &model.c, &model.sigma_w);
        out.posterior.push((xu.clone(), pu.clone()));
        x = &model.a0 + &model.a1 * xu;
        p = &model.a1 * pu * model.a1.transpose() + &q;
    }
    out
}

/// Exact discretization over `dt` by matrix exponentials (Van Loan):
/// returns `Φ`, the integrated input `Γ` and `Qd`.
pub fn van_loan(a: &M, a0: &V, q: &M, dt: f64) -> (M, V, M) {
    let n = a.nrows();
    let mut big = M::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(-a));
    big.view_mut((0, n), (n, n)).copy_from(q);
    big.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    let e = (big * dt).exp();
    let phi = e.view((n, n), (n, n)).transpose();
    let qd = &phi * e.view((0, n), (n, n));
    let mut aug = M::zeros(n + 1, n + 1);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, 1)).copy_from(a0);
    let ea = (aug * dt).exp();
    let gamma = ea.view((0, n), (n, 1)).column(0).into_owned();
    (phi, gamma, qd)
}

/// Continuous-discrete Kalman filter with exact inter-sample transitions.
pub fn van_loan_kf(model: &ContinuousDiscreteModel, ys: &[V], x: &V, p: &M) -> Reference {
    let d = &model.dynamics;
    let q = constant_q(&d.gsq, &d.sigma_v);
    let (mut x, mut p) = (x.clone(), p.clone());
    let mut out = Reference {
        prior: vec![],
        posterior: vec![],
    };
    for (k, y) in ys.iter().enumerate() {
        out.prior.push((x.clone(), p.clone()));
        let (xu, pu) = textbook_update(&x, &p, y, &model.c, &model.sigma_w);
        out.posterior.push((xu.clone(), pu.clone()));
        if let Some(t) = model.sample_times.get(k + 1) {
            let (phi, gamma, qd) = van_loan(&d.a1, &d.a0, &q, t - model.sample_times[k]);
            x = &phi * xu + gamma;
            p = &phi * pu * phi.transpose() + qd;
        }
    }
    out
}

/// Normwise relative difference between a filter trace and a reference over
/// the whole run: the largest deviation of each quantity (prior mean, prior
/// covariance, posterior mean, posterior covariance) divided by that
/// quantity's largest magnitude over the run. Per-step ratios would blow up
/// at steps where an estimate happens to pass near zero.
pub fn max_rel_delta(trace: &FilterTrace, reference: &Reference) -> f64 {
    assert_eq!(trace.len(), reference.posterior.len());
    let mut dev = [0.0f64; 4];
    let mut scale = [0.0f64; 4];
    for (s, ((xp, pp), (xu, pu))) in trace
        .steps
        .iter()
        .zip(reference.prior.iter().zip(&reference.posterior))
    {
        let pairs = [
            (max_abs_v(&(&s.prior.xhat - xp)), max_abs_v(xp).max(max_abs_v(&s.prior.xhat))),
            (max_abs(&(&s.prior.sigma - pp)), max_abs(pp).max(max_abs(&s.prior.sigma))),
            (max_abs_v(&(&s.posterior.xhat - xu)), max_abs_v(xu).max(max_abs_v(&s.posterior.xhat))),
            (max_abs(&(&s.posterior.sigma - pu)), max_abs(pu).max(max_abs(&s.posterior.sigma))),
        ];
        for (i, (d, m)) in pairs.into_iter().enumerate() {
            dev[i] = dev[i].max(d);
            scale[i] = scale[i].max(m);
        }
    }
    dev.iter()
        .zip(&scale)
        .map(|(&d, &m)| if d == 0.0 { 0.0 } else { d / m })
        .fold(0.0, f64::max)
}

fn max_abs_v(v: &V) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn discrete_reduction_delta(seed: u64, n: usize, m: usize, steps: usize) -> f64 {
    let model = random_discrete(seed, n, m, false);
    let ys = measurements(&model, steps, seed);
    let init = unit_prior(n, seed);
    let trace = run_filter(&model, &ys, &init, Variant::CovarianceUpdate).unwrap();
    max_rel_delta(&trace, &textbook_kf(&model, &ys, &init.xhat, &init.sigma))
}

pub fn cd_reduction_delta(seed: u64, n: usize, m: usize, samples: usize) -> f64 {
    let model = random_cd(seed, n, m, samples);
    let ys = cd_measurements(&model, seed);
    let init = unit_prior(n, seed);
    let trace = cd_run(&model, &ys, &init, &IntegratorConfig::for_model(&model)).unwrap();
    max_rel_delta(&trace, &van_loan_kf(&model, &ys, &init.xhat, &init.sigma))
}

// ---- property checks (Err carries the reason) ----

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Every prior and posterior covariance is symmetric and PSD, and the
/// measurement update never increases it.
pub fn check_covariances(seed: u64, n: usize, m: usize) -> Check {
    let model = random_discrete(seed, n, m, true);
    let ys = measurements(&model, 30, seed);
    let init = unit_prior(n, seed);
    let trace = run_filter(&model, &ys, &init, Variant::CovarianceUpdate).map_err(|e| e.to_string())?;
    for (k, s) in trace.steps.iter().enumerate() {
        for (name, sig) in [("prior", &s.prior.sigma), ("posterior", &s.posterior.sigma)] {
            ensure(is_symmetric(sig, 1e-12), || format!("{name} not symmetric at step {k}"))?;
            ensure(is_psd(sig, 1e-10), || {
                format!("{name} not PSD at step {k}: min eig {}", min_eigenvalue(sig))
            })?;
        }
        let drop = &s.prior.sigma - &s.posterior.sigma;
        let scale = spectral_norm_sym(&s.prior.sigma).max(1e-300);
        ensure(min_eigenvalue(&drop) >= -1e-10 * scale, || {
            format!("posterior exceeds prior at step {k}: min eig {}", min_eigenvalue(&drop))
        })?;
    }
    Ok(())
}

/// Oracle cost for a random model over `horizon` transitions, with the
/// running estimates taken from the filter.
pub fn random_cost(seed: u64, n: usize, m: usize, horizon: usize) -> (DiscreteLinearModel, QuadraticCost) {
    let model = random_discrete(seed, n, m, true);
    let ys = measurements(&model, horizon + 1, seed);
    let init = unit_prior(n, seed);
    let trace = run_filter(&model, &ys, &init, Variant::CovarianceUpdate).unwrap();
    let cfg = OracleConfig::default();
    let mut cost = QuadraticCost::with_prior(&init.xhat, &init.sigma);
    for (j, y) in ys.iter().enumerate() {
        if j > 0 {
            cost = build_time_cost(&cost, &model, &trace.steps[j - 1].posterior.xhat, &cfg).unwrap();
        }
        cost = build_measurement_cost(&cost, y, &model.c, &model.sigma_w).unwrap();
    }
    (model, cost)
}

/// The Hessian assembled from every term vanishes outside the block
/// tridiagonal band and equals the banded storage.
pub fn check_block_tridiagonal(seed: u64, n: usize, m: usize, horizon: usize) -> Check {
    let (_, cost) = random_cost(seed, n, m, horizon);
    let full = cost.dense_hessian_from_terms();
    let offs = cost.block_offsets();
    let block_of = |i: usize| offs.iter().rposition(|&o| o <= i).unwrap();
    for i in 0..full.nrows() {
        for j in 0..full.ncols() {
            if block_of(i).abs_diff(block_of(j)) > 1 && full[(i, j)] != 0.0 {
                return Err(format!("entry ({i}, {j}) outside the band is {}", full[(i, j)]));
            }
        }
    }
    let d = rel_diff(&full, &cost.dense_hessian());
    ensure(d < 1e-12, || format!("banded Hessian differs by {d:e}"))
}

/// One Newton step from an arbitrary start lands on the minimizer. When the
/// filter floored a gain, the `1/g²` weights make the Hessian ill-conditioned
/// and the second step is only required to sit at the roundoff level
/// `64·ε·cond(H)`.
pub fn check_one_step_newton(seed: u64, n: usize, m: usize, horizon: usize) -> Check {
    let (model, cost) = random_cost(seed, n, m, horizon);
    let mut r = rng(seed.wrapping_add(17));
    let z0 = StackedTrajectory {
        states: (0..=horizon)
            .map(|_| V::from_fn(n, |_, _| r.random_range(-50.0..50.0)))
            .collect(),
    };
    let sol = newton_solve(&cost, &z0).map_err(|e| e.to_string())?;
    let ratio = sol.gradient_norm_end / (1.0 + sol.gradient_norm_start);
    let clamped = {
        let ys = measurements(&model, horizon + 1, seed);
        let init = unit_prior(n, seed);
        run_filter(&model, &ys, &init, Variant::CovarianceUpdate).unwrap().clamp_count > 0
    };
    let tol = if clamped {
        let sv = cost.dense_hessian().svd(false, false).singular_values;
        1e-9f64.max(64.0 * f64::EPSILON * sv.max() / sv.min())
    } else {
        1e-9
    };
    ensure(ratio < tol, || format!("gradient after one step {ratio:e} (tolerance {tol:e})"))?;
    ensure(sol.second_step < tol, || {
        format!("second step {:e} (tolerance {tol:e})", sol.second_step)
    })
}

/// Analytic gradient and Hessian against central differences of the cost.
pub fn check_derivatives(seed: u64, n: usize, m: usize, horizon: usize) -> Check {
    let (_, cost) = random_cost(seed, n, m, horizon);
    let mut r = rng(seed.wrapping_add(29));
    let dims: Vec<usize> = (0..=horizon).map(|b| cost.block_dim(b)).collect();
    let point: Vec<V> = dims
        .iter()
        .map(|&d| V::from_fn(d, |_, _| r.random_range(-2.0..2.0)))
        .collect();
    let flat = |blocks: &[V]| -> V {
        V::from_iterator(dims.iter().sum(), blocks.iter().flat_map(|b| b.iter().copied()))
    };
    let unflat = |z: &V| -> Vec<V> {
        let mut at = 0;
        dims.iter()
            .map(|&d| {
                let b = z.rows(at, d).into_owned();
                at += d;
                b
            })
            .collect()
    };
    let z = flat(&point);
    let grad = flat(&cost.gradient(&point));
    let h = 1e-4;
    let total = z.len();
    let mut fd_grad = V::zeros(total);
    let mut fd_hess = M::zeros(total, total);
    for i in 0..total {
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[i] += h;
        zm[i] -= h;
        fd_grad[i] = (cost.value(&unflat(&zp)) - cost.value(&unflat(&zm))) / (2.0 * h);
        let gp = flat(&cost.gradient(&unflat(&zp)));
        let gm = flat(&cost.gradient(&unflat(&zm)));
        fd_hess.set_column(i, &((gp - gm) / (2.0 * h)));
    }
    let dg = rel_diff_vec(&grad, &fd_grad);
    ensure(dg < 1e-6, || format!("gradient differs from finite differences by {dg:e}"))?;
    let dh = rel_diff(&cost.dense_hessian(), &fd_hess);
    ensure(dh < 1e-6, || format!("Hessian differs from finite differences by {dh:e}"))
}

/// A linear model run through the nonlinear filter gives the linear filter.
pub fn check_nonlinear_reduction(seed: u64, n: usize, m: usize) -> Check {
    let model = random_discrete(seed, n, m, true);
    let ys = measurements(&model, 30, seed);
    let init = unit_prior(n, seed);
    let lin = run_filter(&model, &ys, &init, Variant::CovarianceUpdate).map_err(|e| e.to_string())?;
    let nl = nl_run(&NonlinearModel::from_linear(&model), &ys, &init).map_err(|e| e.to_string())?;
    for (k, (a, b)) in lin.steps.iter().zip(&nl.steps).enumerate() {
        let d = rel_diff_vec(&a.posterior.xhat, &b.posterior.xhat).max(rel_diff(&a.posterior.sigma, &b.posterior.sigma));
        ensure(d < 1e-12, || format!("nonlinear filter departs from the linear one at step {k}: {d:e}"))?;
    }
    Ok(())
}

/// Central-difference Jacobian of a smooth map against its analytic one.
pub fn check_fd_jacobian(seed: u64, n: usize) -> Check {
    let mut r = rng(seed);
    let a = uniform(&mut r, n, n, -1.0, 1.0);
    let b = uniform(&mut r, n, n, -0.1, 0.1);
    let x = V::from_fn(n, |_, _| r.random_range(-10.0..10.0));
    // f(x) = A x + (B x)∘(B x) + sin(x)
    let f = |x: &V| -> V {
        let bx = &b * x;
        &a * x + bx.component_mul(&bx) + x.map(f64::sin)
    };
    let bx = &b * &x;
    let exact = &a + M::from_diagonal(&(bx * 2.0)) * &b + M::from_diagonal(&x.map(f64::cos));
    let fd = central_difference_jacobian(f, &x);
    let d = max_abs(&(&fd - &exact)) / (1.0 + max_abs(&exact));
    ensure(d < 1e-6, || format!("finite-difference Jacobian off by {d:e}"))
}
