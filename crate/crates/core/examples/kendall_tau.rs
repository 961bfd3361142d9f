// Spatial Kendall's tau and its agreement with the SSCM on elliptical data.

use std::error::Error;

use signshape::oracle::{EllipticalSampler, Radial};
use signshape::{phi, sample_kendall_tau, sample_sscm, Center, DataMatrix, QuadratureConfig, Spectrum};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let tiny = DataMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])?;
    println!("K_n on three points = {:.4}", sample_kendall_tau(&tiny)?.matrix);

    let lambda = Spectrum::new(vec![0.5, 0.3, 0.2])?;
    let sampler = EllipticalSampler::diagonal(lambda.values(), Radial::Chi, 7)?;
    let data = sampler.sample(2000, 0)?;
    let k = sample_kendall_tau(&data)?;
    let s = sample_sscm(&data, &Center::default())?;
    let delta = phi(&lambda, &QuadratureConfig::default())?;
    println!("population diagonal = {:.4?}", delta.values());
    println!("diag K_n = {:.4?}", k.matrix.diagonal().as_slice());
    println!("diag S_n = {:.4?}", s.matrix.diagonal().as_slice());
    println!("{} of {} pairs contributed", k.nonzero_terms, k.total_terms);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
