// The asymptotic covariance of the sample SSCM and a quick simulation check.

use std::error::Error;

use nalgebra::DMatrix;
use signshape::oracle::{mc_sampling_distribution, EllipticalSampler, Radial};
use signshape::{asymptotic_cov, QuadratureConfig, Spectrum};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let lambda = Spectrum::new(vec![0.6, 0.4])?;
    let acov = asymptotic_cov(&DMatrix::identity(2, 2), &lambda, &QuadratureConfig::default())?;
    println!("Gamma = {:.5}", acov.gamma);
    println!("W_S   = {:.5}", acov.w);

    let sampler = EllipticalSampler::diagonal(lambda.values(), Radial::Chi, 3)?;
    let sim = mc_sampling_distribution(&sampler, 500, 400)?;
    println!("simulated covariance of sqrt(n) vec(S_n) = {:.5}", sim.emp_cov);
    println!("entrywise standard errors = {:.5}", sim.emp_cov_se);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
