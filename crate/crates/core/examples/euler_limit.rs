// The continuous-discrete time update as the limit of discrete time updates
// on the Euler discretization: the error halves with the step.

use sdkf::catalog::birth_death_cle;
use sdkf::filter_cd::euler_limit_check;
use sdkf::linalg::{Matrix, Vector};
use sdkf::StateEstimate;

pub fn run() -> sdkf::Result<()> {
    let dynamics = birth_death_cle().dynamics;
    let post = StateEstimate::new(Vector::from_element(1, 50.0), Matrix::from_element(1, 1, 4.0), 0);
    let table = euler_limit_check(&dynamics, &post, 0.0, 1.0, &[0.2, 0.1, 0.05, 0.025, 0.0125])?;

    println!("reference: xhat = {:.6}, Sigma = {:.6}", table.reference.xhat[0], table.reference.sigma[(0, 0)]);
    for row in &table.rows {
        println!("dt = {:<7} Sigma error {:.3e}  mean error {:.3e}", row.dt, row.sigma_error, row.mean_error);
    }
    println!("ratios: {:?}", table.sigma_ratios());
    Ok(())
}

#[allow(dead_code)]
fn main() -> sdkf::Result<()> {
    run()
}
