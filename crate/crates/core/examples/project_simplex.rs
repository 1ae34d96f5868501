//! Euclidean projection onto the probability simplex.
//!
//! cargo run --example project_simplex

use hybridloc::simplex::{project_bisect, project_sorted_with_certificate};

fn main() -> hybridloc::Result<()> {
    let z = [0.9, 0.6, -0.2, 0.85];
    let (alpha, cert) = project_sorted_with_certificate(&z)?;
    println!("z      = {z:?}");
    println!("P(z)   = {:?}", alpha.as_slice());
    println!("sum    = {}", alpha.as_slice().iter().sum::<f64>());
    // threshold in the input's own coordinates: α_i = max(z_i - τ, 0)
    println!("tau    = {}", cert.offset - cert.lambda);
    println!("active = {} of {}", cert.support, z.len());

    let slow = project_bisect(&z, 1e-12)?;
    let gap = alpha
        .as_slice()
        .iter()
        .zip(slow.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max |sorted - bisection| = {gap:.2e}");
    Ok(())
}
