// The filter estimates recovered by minimizing the stacked least-squares
// cost over the whole trajectory with a single Newton step.

use sdkf::catalog::example_sec3;
use sdkf::filter_discrete::{run_filter, Variant};
use sdkf::linalg::{Matrix, Vector};
use sdkf::sim::{simulate_discrete, NoiseDistribution};
use sdkf::wls_oracle::{compare_with_trace, oracle_filter, OracleConfig};
use sdkf::StateEstimate;

pub fn run() -> sdkf::Result<()> {
    let model = example_sec3();
    let data = simulate_discrete(&model, &Vector::from_element(1, 1.0), 21, 5, NoiseDistribution::Gaussian)?;
    let init = StateEstimate::new(Vector::zeros(1), Matrix::from_element(1, 1, 1.0), 1);

    let trace = run_filter(&model, &data.measurements, &init, Variant::CovarianceUpdate)?;
    let oracle = oracle_filter(&model, &data.measurements, &init, &OracleConfig::default())?;

    println!("{:>3} {:>12} {:>12} {:>10} {:>12}", "k", "xhat (filter)", "xhat (WLS)", "delta", "|grad| after");
    for row in compare_with_trace(&oracle, &trace)? {
        let k = row.index - init.index;
        println!(
            "{:>3} {:>12.6} {:>12.6} {:>10.1e} {:>12.1e}",
            row.index,
            trace.steps[k].posterior.xhat[0],
            oracle[k].posterior.last_mean[0],
            row.max_delta(),
            row.gradient_norm
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
