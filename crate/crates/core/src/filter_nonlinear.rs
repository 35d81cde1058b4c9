//! Filter for nonlinear drift with diagonal state-dependent noise gains.
//! Drift Jacobian and gains are both taken at the posterior estimate; the
//! measurement update is the linear one.

use crate::error::{Error, Result};
use crate::estimate::{FilterTrace, StateEstimate, TraceStep};
use crate::filter_discrete::{measurement_update_full, Variant};
use crate::linalg::{all_finite, symmetrize, Vector};
use crate::model::StateDynamics;

fn propagate<M: StateDynamics + ?Sized>(
    post: &StateEstimate,
    model: &M,
    variant: Variant,
) -> Result<(StateEstimate, bool)> {
    let xhat = model.drift(&post.xhat);
    let df = model.drift_jacobian(&post.xhat);
    if !xhat.iter().all(|v| v.is_finite()) || !all_finite(&df) {
        return Err(Error::NonFiniteState {
            context: format!("in drift at step {}", post.index),
        });
    }
    let (noise, clamped) = match variant {
        Variant::CovarianceUpdate => {
            let g = model.gain(&post.xhat);
            (g.scale_noise(model.process_noise()), g.clamped)
        }
        Variant::FixedBeta(beta) => (model.process_noise() * (beta * beta), false),
    };
    let mut sigma = &df * &post.sigma * df.transpose() + noise;
    symmetrize(&mut sigma);
    Ok((StateEstimate::new(xhat, sigma, post.index + 1), clamped))
}

/// `x̂⁺ = f(x̂)`, `Σ⁺ = Df(x̂) Σ Df(x̂)' + G(x̂) Σv G(x̂)`.
pub fn nl_time_update<M: StateDynamics + ?Sized>(
    post: &StateEstimate,
    model: &M,
) -> Result<StateEstimate> {
    propagate(post, model, Variant::CovarianceUpdate).map(|(e, _)| e)
}

/// Extended Kalman filter time update with fixed process noise `β²Σv`.
pub fn nl_fixed_time_update<M: StateDynamics + ?Sized>(
    post: &StateEstimate,
    model: &M,
    beta: f64,
) -> Result<StateEstimate> {
    propagate(post, model, Variant::FixedBeta(beta)).map(|(e, _)| e)
}

pub fn nl_run<M: StateDynamics + ?Sized>(
    model: &M,
    measurements: &[Vector],
    init: &StateEstimate,
) -> Result<FilterTrace> {
    nl_run_variant(model, measurements, init, Variant::CovarianceUpdate)
}

/// Measurement-first recursion from the prior `init`, as in
/// [`run_filter`](crate::filter_discrete::run_filter).
pub fn nl_run_variant<M: StateDynamics + ?Sized>(
    model: &M,
    measurements: &[Vector],
    init: &StateEstimate,
    variant: Variant,
) -> Result<FilterTrace> {
    if measurements.is_empty() {
        return Err(Error::Config("at least one measurement is required".into()));
    }
    if let Variant::FixedBeta(beta) = variant {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidModel(format!("beta must be >= 0, got {beta}")));
        }
    }
    let mut trace = FilterTrace::default();
    let mut prior = init.clone();
    for (i, y) in measurements.iter().enumerate() {
        let step = measurement_update_full(
            &prior,
            y,
            model.output_matrix(),
            model.measurement_noise(),
        )
        .map_err(|e| e.at_step(init.index + i))?;
        let (next, clamped) = propagate(&step.posterior, model, variant)?;
        trace.clamp_count += usize::from(clamped);
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
    use crate::filter_discrete::time_update;
    use crate::linalg::Matrix;
    use crate::model::NonlinearModel;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn linear_drift_reduces_to_discrete_time_update() {
        let lin = catalog::example_sec3();
        let nl = NonlinearModel::from_linear(&lin);
        let post = StateEstimate::new(Vector::from_element(1, 21.0), scalar(2.0), 4);
        let a = nl_time_update(&post, &nl).unwrap();
        let b = time_update(&post, &lin);
        assert_eq!(a, b);
    }

    #[test]
    fn square_drift_hand_jacobian() {
        let m = NonlinearModel::new(
            1,
            |x: &Vector| x.map(|v| v * v),
            |x: &Vector| Vector::zeros(x.len()),
            scalar(1.0),
            scalar(0.0),
            scalar(1.0),
        )
        .unwrap()
        .with_jacobian(|x: &Vector| scalar(2.0 * x[0]));
        let post = StateEstimate::new(Vector::from_element(1, 3.0), scalar(1.0), 1);
        let out = nl_time_update(&post, &m).unwrap();
        assert_eq!(out.xhat[0], 9.0);
        assert_eq!(out.sigma[(0, 0)], 36.0);
    }

    #[test]
    fn logistic_time_update() {
        // f(50) = 52.5, Df(50) = 1, g²(50) = 50
        let post = StateEstimate::new(Vector::from_element(1, 50.0), scalar(4.0), 1);
        let out = nl_time_update(&post, &catalog::logistic()).unwrap();
        assert!((out.xhat[0] - 52.5).abs() < 1e-12);
        assert!((out.sigma[(0, 0)] - 54.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_drift_is_an_error() {
        let m = NonlinearModel::new(
            1,
            |x: &Vector| x.map(|v| 1.0 / v),
            |x: &Vector| x.map(|_| 1.0),
            scalar(1.0),
            scalar(1.0),
            scalar(1.0),
        )
        .unwrap();
        let post = StateEstimate::new(Vector::from_element(1, 0.0), scalar(1.0), 1);
        assert!(matches!(
            nl_time_update(&post, &m),
            Err(Error::NonFiniteState { .. })
        ));
    }

    #[test]
    fn degenerate_single_step() {
        let init = StateEstimate::new(Vector::from_element(1, 10.0), scalar(0.0), 1);
        let trace = nl_run(&catalog::logistic(), &[Vector::from_element(1, 30.0)], &init).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.steps[0].posterior.xhat, init.xhat);
        assert_eq!(trace.steps[0].posterior.sigma, init.sigma);
    }
}
