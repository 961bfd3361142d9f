// Large p: the eigenvalue map at p = 10,000 and the SSCM with p > n.

use std::error::Error;
use std::time::Instant;

use signshape::oracle::{random_spectrum, stream_rng, EllipticalSampler, Radial};
use signshape::{phi, sample_sscm, Center, QuadratureConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let mut rng = stream_rng(5, 0);
    let lambda = random_spectrum(10_000, &mut rng);
    let start = Instant::now();
    let delta = phi(&lambda, &QuadratureConfig::default())?;
    println!(
        "phi at p = {} took {:?}; sum = {:.15}, largest {:.3e} -> {:.3e}",
        lambda.len(),
        start.elapsed(),
        delta.values().iter().sum::<f64>(),
        lambda.values()[0],
        delta.values()[0]
    );

    let sampler = EllipticalSampler::diagonal(&vec![0.01; 100], Radial::Chi, 9)?;
    let data = sampler.sample(20, 0)?;
    let est = sample_sscm(&data, &Center::default())?;
    println!(
        "S_n with n = {}, p = {}: trace {:.15}, rank at most {}",
        data.n(),
        data.p(),
        est.matrix.trace(),
        data.n()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
