// Checking the quadrature against Monte Carlo, including a non-Gaussian radial law.

use std::error::Error;

use signshape::oracle::{mc_delta, mc_delta_with, mc_eta, Radial};
use signshape::{eta_table, phi, QuadratureConfig, Spectrum};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = QuadratureConfig::default();
    let lambda = Spectrum::new(vec![0.5, 0.3, 0.2])?;
    let delta = phi(&lambda, &cfg)?;

    let gauss = mc_delta(&lambda, 200_000, 1)?;
    let shell = mc_delta_with(&lambda, 200_000, 2, Radial::Constant(1.0))?;
    for i in 0..3 {
        println!(
            "delta_{i}: quadrature {:.5}  gaussian {:.5} ± {:.5}  shell {:.5} ± {:.5}",
            delta.values()[i],
            gauss.mean[i],
            gauss.se[i],
            shell.mean[i],
            shell.se[i]
        );
    }

    let eta = eta_table(&lambda, &cfg)?;
    let (mc, se) = mc_eta(&lambda, 200_000, 3)?;
    println!("eta quadrature = {:.5}", eta.entries);
    println!("eta Monte Carlo = {:.5}", mc);
    println!(
        "largest |z| = {:.2}",
        eta.entries.zip_map(&mc, |a, b| a - b).component_div(&se).amax()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
