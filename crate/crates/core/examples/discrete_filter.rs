// Filter the scalar model `x⁺ = 1 + 0.99x + √(100 + x) v`, `y = x + w`.

use sdkf::catalog::{example_sec3, EXAMPLE_SEC3_X1};
use sdkf::filter_discrete::{run_filter, Variant};
use sdkf::linalg::{Matrix, Vector};
use sdkf::sim::{simulate_discrete, NoiseDistribution};
use sdkf::StateEstimate;

pub fn run() -> sdkf::Result<()> {
    let model = example_sec3();
    let truth = simulate_discrete(&model, &Vector::from_element(1, EXAMPLE_SEC3_X1), 20, 1, NoiseDistribution::Gaussian)?;

    let init = StateEstimate::new(Vector::zeros(1), Matrix::from_element(1, 1, 1.0), 1);
    let trace = run_filter(&model, &truth.measurements, &init, Variant::CovarianceUpdate)?;

    println!("{:>3} {:>10} {:>10} {:>10} {:>10}", "k", "x", "y", "xhat", "Sigma");
    for (k, step) in trace.steps.iter().enumerate() {
        println!(
            "{:>3} {:>10.3} {:>10.3} {:>10.3} {:>10.4}",
            k + 1,
            truth.states[k][0],
            truth.measurements[k][0],
            step.posterior.xhat[0],
            step.posterior.sigma[(0, 0)]
        );
    }
    trace.write_csv(std::io::sink()).map_err(|e| sdkf::Error::Config(e.to_string()))?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
