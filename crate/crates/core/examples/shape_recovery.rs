// Recovering the shape matrix from contaminated elliptical data.

use std::error::Error;

use nalgebra::{DMatrix, DVector};
use signshape::oracle::{EllipticalSampler, Radial};
use signshape::{estimate_shape, sample_sscm, Center, DataMatrix, InversionConfig, QuadratureConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // Shape with eigenvalues (0.7, 0.2, 0.1) rotated off the axes.
    let angle = 0.4f64;
    let (c, s) = (angle.cos(), angle.sin());
    let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
    let root = &rot * DMatrix::from_diagonal(&DVector::from_vec(vec![0.7f64.sqrt(), 0.2f64.sqrt(), 0.1f64.sqrt()]));
    let truth = &root * root.transpose();
    let sampler = EllipticalSampler::new(root, Radial::Chi, DVector::from_vec(vec![5.0, -2.0, 1.0]), 11)?;

    let clean = sampler.sample(5000, 0)?;
    let mut rows: Vec<Vec<f64>> = clean.rows().map(<[f64]>::to_vec).collect();
    for row in rows.iter_mut().take(250) {
        *row = vec![1e4, 1e4, -1e4];
    }
    let data = DataMatrix::from_rows(&rows)?;

    let sscm = sample_sscm(&data, &Center::default())?;
    let shape = estimate_shape(&sscm, &InversionConfig::default(), &QuadratureConfig::default())?;
    println!("true shape      = {:.3}", truth);
    println!("estimated shape = {:.3}", shape.matrix);
    println!("SSCM            = {:.3}", sscm.matrix);
    println!("recovered eigenvalues {:.4?}", shape.inversion.lambda.values());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
