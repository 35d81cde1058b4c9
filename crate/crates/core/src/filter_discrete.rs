//! Discrete-time filter with the process noise covariance recomputed from the
//! posterior estimate, and the fixed-β Kalman filter it is compared against.

use crate::error::{Error, Result};
use crate::estimate::{FilterTrace, StateEstimate, TraceStep};
use crate::linalg::{symmetrize, Matrix, Vector};
use crate::model::{eval_g, DiscreteLinearModel};

/// Posterior plus the quantities produced along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementStep {
    pub posterior: StateEstimate,
    pub innovation: Vector,
    pub innovation_cov: Matrix,
    pub gain: Matrix,
}

/// BLUE measurement update.
///
/// `K = Σ⁻C'(CΣ⁻C' + Σw)⁻¹`, `x̂ = x̂⁻ + K(y − Cx̂⁻)`,
/// `Σ = Σ⁻ − Σ⁻C'(CΣ⁻C' + Σw)⁻¹CΣ⁻`. The innovation covariance is inverted
/// through its Cholesky factor; failure to factor is `SingularInnovation`.
pub fn measurement_update_full(
    prior: &StateEstimate,
    y: &Vector,
    c: &Matrix,
    sigma_w: &Matrix,
) -> Result<MeasurementStep> {
    let n = prior.dim();
    let m = c.nrows();
    if c.ncols() != n || y.len() != m || sigma_w.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "measurement update: state {n}, C {:?}, y {}, Sigma_w {:?}",
            c.shape(),
            y.len(),
            sigma_w.shape()
        )));
    }
    let c_sigma = c * &prior.sigma;
    let mut s = &c_sigma * c.transpose() + sigma_w;
    symmetrize(&mut s);
    let chol = s
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnovation { step: prior.index })?;
    // K' = S⁻¹ C Σ⁻
    let gain = chol.solve(&c_sigma).transpose();
    let innovation = y - c * &prior.xhat;
    let xhat = &prior.xhat + &gain * &innovation;
    let mut sigma = &prior.sigma - &gain * &c_sigma;
    symmetrize(&mut sigma);
    Ok(MeasurementStep {
        posterior: StateEstimate {
            xhat,
            sigma,
            index: prior.index,
            time: prior.time,
        },
        innovation,
        innovation_cov: s,
        gain,
    })
}

pub fn measurement_update(
    prior: &StateEstimate,
    y: &Vector,
    c: &Matrix,
    sigma_w: &Matrix,
) -> Result<StateEstimate> {
    measurement_update_full(prior, y, c, sigma_w).map(|s| s.posterior)
}

/// Time update; the second value reports whether `g²` was floored.
pub fn propagate(post: &StateEstimate, model: &DiscreteLinearModel) -> (StateEstimate, bool) {
    let gain = eval_g(&model.gsq, &post.xhat);
    let xhat = &model.a0 + &model.a1 * &post.xhat;
    let mut sigma = &model.a1 * &post.sigma * model.a1.transpose() + gain.scale_noise(&model.sigma_v);
    symmetrize(&mut sigma);
    (StateEstimate::new(xhat, sigma, post.index + 1), gain.clamped)
}

/// `x̂⁺ = A0 + A1x̂`, `Σ⁺ = A1ΣA1' + G(x̂)ΣvG(x̂)` with `G` taken at the
/// posterior estimate.
pub fn time_update(post: &StateEstimate, model: &DiscreteLinearModel) -> StateEstimate {
    propagate(post, model).0
}

/// Linear model whose process noise gain is the constant `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedNoiseModel {
    pub model: DiscreteLinearModel,
    pub beta: f64,
}

impl FixedNoiseModel {
    pub fn new(model: DiscreteLinearModel, beta: f64) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidModel(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self { model, beta })
    }
}

/// `Σ⁺ = A1ΣA1' + β²Σv`
pub fn kf_fixed_time_update(post: &StateEstimate, fixed: &FixedNoiseModel) -> StateEstimate {
    let model = &fixed.model;
    let xhat = &model.a0 + &model.a1 * &post.xhat;
    let mut sigma =
        &model.a1 * &post.sigma * model.a1.transpose() + &model.sigma_v * (fixed.beta * fixed.beta);
    symmetrize(&mut sigma);
    StateEstimate::new(xhat, sigma, post.index + 1)
}

/// How the process noise covariance is formed in the time update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `G(x̂_{k|k}) Σv G(x̂_{k|k})`, recomputed every step.
    CovarianceUpdate,
    /// `β² Σv`
    FixedBeta(f64),
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::CovarianceUpdate => "covariance-update".into(),
            Variant::FixedBeta(b) => format!("fixed-beta({b})"),
        }
    }
}

/// Run the filter over `measurements`, starting from the prior `init`
/// (`x̂_{1|0}`, `Σ_{1|0}`). Each step measures first, then propagates.
pub fn run_filter(
    model: &DiscreteLinearModel,
    measurements: &[Vector],
    init: &StateEstimate,
    variant: Variant,
) -> Result<FilterTrace> {
    if measurements.is_empty() {
        return Err(Error::Config("at least one measurement is required".into()));
    }
    let fixed = match variant {
        Variant::FixedBeta(beta) => Some(FixedNoiseModel::new(model.clone(), beta)?),
        Variant::CovarianceUpdate => None,
    };
    let mut trace = FilterTrace::default();
    let mut prior = init.clone();
    for (i, y) in measurements.iter().enumerate() {
        let step = measurement_update_full(&prior, y, &model.c, &model.sigma_w)
            .map_err(|e| e.at_step(init.index + i))?;
        let next = match &fixed {
            Some(f) => kf_fixed_time_update(&step.posterior, f),
            None => {
                let (next, clamped) = propagate(&step.posterior, model);
                trace.clamp_count += usize::from(clamped);
                next
            }
        };
        trace.steps.push(TraceStep {
            prior,
            posterior: step.posterior,
            innovation: step.innovation,
            innovation_cov: step.innovation_cov,
            gain: step.gain,
        });
        prior = next;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::linalg::{max_abs, max_abs_vec};
    use crate::model::AffineVariance;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn est(x: &[f64], sigma: Matrix) -> StateEstimate {
        StateEstimate::new(Vector::from_row_slice(x), sigma, 1)
    }

    #[test]
    fn zero_prior_covariance_ignores_measurement() {
        let prior = est(&[3.0, -1.0], Matrix::zeros(2, 2));
        let c = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let post = measurement_update(&prior, &Vector::from_element(1, 42.0), &c, &scalar(1.0))
            .unwrap();
        assert_eq!(post.xhat, prior.xhat);
        assert_eq!(post.sigma, Matrix::zeros(2, 2));
    }

    #[test]
    fn scalar_measurement_update() {
        let prior = est(&[0.0], scalar(1.0));
        let post =
            measurement_update(&prior, &Vector::from_element(1, 2.0), &scalar(1.0), &scalar(1.0))
                .unwrap();
        assert!((post.xhat[0] - 1.0).abs() < 1e-15);
        assert!((post.sigma[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_state_measurement_update() {
        // S = 3, K = (2/3, 1/3)
        let prior = est(&[0.0, 0.0], Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]));
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let post =
            measurement_update(&prior, &Vector::from_element(1, 3.0), &c, &scalar(1.0)).unwrap();
        let want_x = Vector::from_vec(vec![2.0, 1.0]);
        let want_s = Matrix::from_row_slice(2, 2, &[2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 8.0 / 3.0]);
        assert!(max_abs_vec(&(post.xhat - want_x)) < 1e-15);
        assert!(max_abs(&(post.sigma - want_s)) < 1e-15);
    }

    #[test]
    fn singular_innovation_is_reported() {
        let prior = est(&[0.0], scalar(0.0));
        let err = measurement_update(&prior, &Vector::from_element(1, 1.0), &scalar(1.0), &scalar(0.0))
            .unwrap_err();
        assert_eq!(err, Error::SingularInnovation { step: 1 });
    }

    #[test]
    fn sec3_time_update_examples() {
        let model = catalog::example_sec3();
        let out = time_update(&est(&[0.0], scalar(0.0)), &model);
        assert_eq!(out.xhat[0], 1.0);
        assert_eq!(out.sigma[(0, 0)], 100.0);
        assert_eq!(out.index, 2);

        let out = time_update(&est(&[21.0], scalar(2.0)), &model);
        assert!((out.xhat[0] - 21.79).abs() < 1e-12);
        assert!((out.sigma[(0, 0)] - 122.9602).abs() < 1e-12);
    }

    #[test]
    fn pure_noise_time_update() {
        let model = DiscreteLinearModel::new(
            Vector::zeros(2),
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            AffineVariance::constant(&[1.0, 1.0]),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
        )
        .unwrap();
        let out = time_update(&est(&[5.0, -2.0], Matrix::identity(2, 2) * 7.0), &model);
        assert_eq!(out.sigma, Matrix::identity(2, 2));
        assert_eq!(out.xhat, Vector::zeros(2));
    }

    #[test]
    fn fixed_beta_time_update() {
        let model = catalog::example_sec3();
        let f = FixedNoiseModel::new(model.clone(), 0.1).unwrap();
        let out = kf_fixed_time_update(&est(&[0.0], scalar(1.0)), &f);
        assert!((out.sigma[(0, 0)] - 0.9901).abs() < 1e-15);

        let f = FixedNoiseModel::new(model.clone(), 0.0).unwrap();
        let out = kf_fixed_time_update(&est(&[0.0], scalar(3.0)), &f);
        assert_eq!(out.sigma[(0, 0)], 0.99 * 3.0 * 0.99);

        let f = FixedNoiseModel::new(model, 10.0).unwrap();
        let out = kf_fixed_time_update(&est(&[0.0], scalar(0.0)), &f);
        assert_eq!(out.sigma[(0, 0)], 100.0);
    }

    #[test]
    fn negative_beta_rejected() {
        assert!(FixedNoiseModel::new(catalog::example_sec3(), -0.1).is_err());
    }

    #[test]
    fn single_step_with_zero_prior() {
        let model = catalog::example_sec3();
        let init = est(&[0.3], scalar(0.0));
        let trace =
            run_filter(&model, &[Vector::from_element(1, 5.0)], &init, Variant::CovarianceUpdate)
                .unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.steps[0].posterior.xhat, init.xhat);
        assert_eq!(trace.steps[0].posterior.sigma, init.sigma);
    }

    #[test]
    fn empty_measurements_rejected() {
        let model = catalog::example_sec3();
        assert!(run_filter(&model, &[], &est(&[0.0], scalar(1.0)), Variant::CovarianceUpdate).is_err());
    }

    #[test]
    fn error_carries_step_index() {
        // Step 1 collapses Σ to 0; with no process noise and a noiseless
        // sensor the innovation covariance at step 2 is exactly 0.
        let mut model = catalog::example_sec3();
        model.sigma_w = scalar(0.0);
        model.sigma_v = scalar(0.0);
        let ys = vec![Vector::from_element(1, 1.0); 3];
        let err = run_filter(&model, &ys, &est(&[0.0], scalar(1.0)), Variant::CovarianceUpdate)
            .unwrap_err();
        assert_eq!(err, Error::SingularInnovation { step: 2 });
    }

    #[test]
    fn gain_identity_holds() {
        let model = catalog::example_sec3();
        let prior = est(&[4.0], scalar(9.0));
        let step = measurement_update_full(&prior, &Vector::from_element(1, 7.0), &model.c, &model.sigma_w)
            .unwrap();
        let alt = &step.posterior.sigma * model.c.transpose() * model.sigma_w.clone().try_inverse().unwrap();
        assert!(crate::linalg::rel_diff(&alt, &step.gain) < 1e-12);
    }
}
