// Spatial signs, the spatial median and the sample SSCM.

use std::error::Error;

use signshape::{sample_sscm, spatial_median, spatial_sign, Center, DataMatrix, MedianConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    println!("s((3, 4)) = {:?}", spatial_sign(&[3.0, 4.0])?);
    println!("s((0, 0)) = {:?}", spatial_sign(&[0.0, 0.0])?);

    // One gross outlier barely moves the spatial median.
    let data = DataMatrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0], [1e6, 1e6]])?;
    let median = spatial_median(&data, &MedianConfig::default())?;
    println!(
        "median = {:?} after {} iterations (converged: {})",
        median.location, median.iterations, median.converged
    );

    let est = sample_sscm(&data, &Center::SpatialMedian(MedianConfig::default()))?;
    println!("S_n = {:.4}", est.matrix);
    println!("trace = {:.15}", est.matrix.trace());

    let fixed = sample_sscm(&data, &Center::Fixed(vec![0.0, 0.0]))?;
    println!("S_n centred at the origin = {:.4}", fixed.matrix);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
