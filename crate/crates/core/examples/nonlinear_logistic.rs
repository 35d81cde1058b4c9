// Logistic growth with Poisson-like noise, `g²(x) = x`.

use sdkf::catalog::{logistic, LOGISTIC_X0};
use sdkf::filter_discrete::Variant;
use sdkf::filter_nonlinear::nl_run_variant;
use sdkf::linalg::{Matrix, Vector};
use sdkf::sim::{mse, simulate_discrete, NoiseDistribution};
use sdkf::StateEstimate;

pub fn run() -> sdkf::Result<()> {
    let model = logistic();
    let truth = simulate_discrete(&model, &Vector::from_element(1, 5.0), 80, 2, NoiseDistribution::Gaussian)?;
    let init = StateEstimate::new(Vector::from_element(1, LOGISTIC_X0), Matrix::from_element(1, 1, 25.0), 1);

    for variant in [Variant::CovarianceUpdate, Variant::FixedBeta(1.0), Variant::FixedBeta(5.0)] {
        let trace = nl_run_variant(&model, &truth.measurements, &init, variant)?;
        println!("{:<20} MSE {:8.3}", variant.label(), mse(&trace, &truth, 10)?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
