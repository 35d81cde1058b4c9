// Load a model from the plain-text format and filter with it.

use sdkf::filter_discrete::{run_filter, Variant};
use sdkf::linalg::{Matrix, Vector};
use sdkf::model_file::{FileModel, ModelFile};
use sdkf::sim::{simulate_discrete, NoiseDistribution};
use sdkf::StateEstimate;

const TWO_STATE: &str = include_str!("../models/two_state.model");

pub fn run() -> sdkf::Result<()> {
    let file = ModelFile::parse(TWO_STATE)?;
    let FileModel::Discrete(model) = &file.model else {
        return Err(sdkf::Error::Config("expected a discrete model".into()));
    };
    let x0 = file.x0.clone().unwrap_or_else(|| Vector::zeros(model.state_dim()));
    let truth = simulate_discrete(model, &x0, 30, 4, NoiseDistribution::Gaussian)?;
    let init = StateEstimate::new(x0, Matrix::identity(2, 2), 1);
    let trace = run_filter(model, &truth.measurements, &init, Variant::CovarianceUpdate)?;
    let last = trace.last().expect("30 steps");
    println!("final estimate {:?}", last.posterior.xhat.as_slice());
    println!("final covariance {:?}", last.posterior.sigma.as_slice());
    print!("{}", file.to_text());
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
