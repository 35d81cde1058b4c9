// Innovation autocorrelations of the covariance-update filter.

use sdkf::catalog::{example_sec3, EXAMPLE_SEC3_X1};
use sdkf::filter_discrete::{run_filter, Variant};
use sdkf::linalg::{Matrix, Vector};
use sdkf::sim::{innovation_whiteness, simulate_discrete, NoiseDistribution};
use sdkf::StateEstimate;

pub fn run() -> sdkf::Result<()> {
    let model = example_sec3();
    let truth = simulate_discrete(&model, &Vector::from_element(1, EXAMPLE_SEC3_X1), 500, 9, NoiseDistribution::Uniform)?;
    let init = StateEstimate::new(Vector::zeros(1), Matrix::from_element(1, 1, 1.0), 1);

    for variant in [Variant::CovarianceUpdate, Variant::FixedBeta(0.1)] {
        let trace = run_filter(&model, &truth.measurements, &init, variant)?;
        let w = innovation_whiteness(&trace, 10)?;
        let rho: Vec<String> = w.autocorrelations[0][1..].iter().map(|r| format!("{r:+.2}")).collect();
        println!("{:<18} pass {:.2}  rho(1..10) = {}", variant.label(), w.pass_fraction, rho.join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
