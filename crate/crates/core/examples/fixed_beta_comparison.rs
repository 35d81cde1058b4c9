// Recomputing the process noise from the estimate against a Kalman filter
// with fixed `β² Σv`, over many simulated replicates.

use sdkf::catalog::{example_sec3, EXAMPLE_SEC3_X1};
use sdkf::filter_discrete::Variant;
use sdkf::linalg::Vector;
use sdkf::model::SystemModel;
use sdkf::sim::{monte_carlo_compare, CompareSetup, NoiseDistribution, PriorSpec};

pub fn run() -> sdkf::Result<()> {
    let setup = CompareSetup {
        model: SystemModel::Linear(example_sec3()),
        model_id: "example_sec3".into(),
        x1: Vector::from_element(1, EXAMPLE_SEC3_X1),
        // x̂_{1|0} ~ N(0, 1) with Σ_{1|0} = 0
        prior: PriorSpec::zero_covariance(1),
        noise: NoiseDistribution::Gaussian,
        max_lag: 20,
        burn_in: 0,
    };
    let filters = [Variant::CovarianceUpdate, Variant::FixedBeta(0.1), Variant::FixedBeta(10.0)];
    let report = monte_carlo_compare(&setup, &filters, 100, 100, 42)?;
    report
        .write_table(std::io::stdout())
        .map_err(|e| sdkf::Error::Config(e.to_string()))?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
