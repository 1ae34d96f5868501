//! Curvature bounds, the certified step window and the iteration bound for
//! a small two-technology problem under several penalties.
//!
//! cargo run --example step_size

use hybridloc::model::{Axis, AxisEstimateMatrix};
use hybridloc::penalty::{curvature_bounds, PowerPenalty, StepSize};
use hybridloc::solver::iteration_bound;

fn main() -> hybridloc::Result<()> {
    let u = AxisEstimateMatrix::from_rows(
        Axis::X,
        &[vec![0.1, 0.4], vec![1.1, 0.6], vec![2.3, 1.7]],
        &[0.0, 1.0, 2.0],
    )?;
    println!("{:<8} {:>10} {:>10} {:>10} {:>8} {:>8}", "penalty", "l_min", "L_max", "beta", "q", "k");
    for name in ["p2", "p3", "p1.5", "p1.0001"] {
        let penalty: PowerPenalty = name.parse()?;
        let b = curvature_bounds(&penalty, &u, StepSize::Auto)?;
        let k = iteration_bound(b.q, 2, 1e-10).map_or("-".to_string(), |k| k.to_string());
        println!(
            "{name:<8} {:>10.4} {:>10.4} {:>10.4} {:>8.4} {:>8}{}",
            b.l_min,
            b.l_max,
            b.beta,
            b.q,
            k,
            if b.clamp_applied { "  (curvature clamped)" } else { "" }
        );
    }
    Ok(())
}
