// The eigenvalue map from shape eigenvalues to SSCM eigenvalues, and back.

use std::error::Error;

use signshape::{eta_table, invert_phi, phi, InversionConfig, QuadratureConfig, Spectrum};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cfg = QuadratureConfig::default();

    let lambda = Spectrum::new(vec![0.9, 0.1])?;
    let delta = phi(&lambda, &cfg)?;
    let closed = 0.9f64.sqrt() / (0.9f64.sqrt() + 0.1f64.sqrt());
    println!("phi(0.9, 0.1) = {:?}, closed form first entry {closed}", delta.values());

    // The map pulls eigenvalues together: ratios shrink.
    let lambda = Spectrum::new(vec![0.6, 0.25, 0.1, 0.05])?;
    let delta = phi(&lambda, &cfg)?;
    for i in 0..3 {
        println!(
            "lambda ratio {:.3}  delta ratio {:.3}",
            lambda.values()[i] / lambda.values()[i + 1],
            delta.values()[i] / delta.values()[i + 1]
        );
    }

    let eta = eta_table(&lambda, &cfg)?;
    println!("eta row sums {:.12?}", eta.row_sums());
    println!("delta        {:.12?}", delta.values());

    let back = invert_phi(&delta, &InversionConfig::default(), &cfg)?;
    println!(
        "inverse: {:?} in {} Newton steps (residual {:.1e})",
        back.lambda.values(),
        back.iterations,
        back.residual
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
