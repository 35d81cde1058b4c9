// A birth-death reaction network through its chemical Langevin equation,
// filtered from noisy unit-spaced counts.

use sdkf::catalog::{birth_death_network, BIRTH_DEATH_X0};
use sdkf::filter_cd::{cd_run, IntegratorConfig};
use sdkf::linalg::{Matrix, Vector};
use sdkf::model::{from_cle, ContinuousDiscreteModel};
use sdkf::sim::{simulate_cd, NoiseDistribution};
use sdkf::StateEstimate;

pub fn run() -> sdkf::Result<()> {
    // ∅ → X at rate 10, X → ∅ at rate 0.1·x
    let net = birth_death_network();
    let dynamics = from_cle(&net)?;
    println!(
        "drift {} + {}x, g^2(x) = {} + {}x",
        dynamics.a0[0],
        dynamics.a1[(0, 0)],
        dynamics.gsq.offset()[0],
        dynamics.gsq.slope()[(0, 0)]
    );

    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
    let model = ContinuousDiscreteModel::new(dynamics, Matrix::identity(1, 1), Matrix::from_element(1, 1, 4.0), times)?;
    let truth = simulate_cd(&model, &Vector::from_element(1, 60.0), 3, 0.005, NoiseDistribution::Gaussian)?;

    let init = StateEstimate::new(Vector::from_element(1, BIRTH_DEATH_X0), Matrix::from_element(1, 1, 100.0), 1);
    let trace = cd_run(&model, &truth.measurements, &init, &IntegratorConfig::for_model(&model))?;
    for (k, step) in trace.steps.iter().enumerate() {
        println!(
            "t = {:4.1}  x = {:7.2}  y = {:7.2}  xhat = {:7.2} ± {:5.2}",
            model.sample_times[k],
            truth.states[k][0],
            truth.measurements[k][0],
            step.posterior.xhat[0],
            step.posterior.sigma[(0, 0)].sqrt()
        );
    }
    println!("{} RK4 steps, {} floored gains", trace.integration_steps, trace.clamp_count);
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
