//! Fits per-axis fusion weights on a simulated corridor and compares the
//! fused estimate with each technology on its own.
//!
//! cargo run --example fit_hybrid

use hybridloc::fusion::{fit_hybrid, predict};
use hybridloc::penalty::PowerPenalty;
use hybridloc::sim::{generate_corridor_dataset, CorridorConfig};
use hybridloc::solver::SolverConfig;

fn main() -> hybridloc::Result<()> {
    let ds = generate_corridor_dataset(&CorridorConfig { seed: 7, ..Default::default() })?;
    let cfg = SolverConfig::default();

    for penalty in [PowerPenalty::mse(), PowerPenalty::new(3.0)?, PowerPenalty::pseudo_mae(1e-4)?] {
        let model = fit_hybrid(&ds, penalty, &cfg)?;
        let w: Vec<String> = model.weights.x.as_slice().iter().map(|v| format!("{v:.3}")).collect();
        println!("{penalty:<8} alpha_x = [{}]", w.join(", "));
        for f in &model.flags {
            println!("         note: {f}");
        }
    }

    let model = fit_hybrid(&ds, PowerPenalty::mse(), &cfg)?;
    let mut fused = 0.0;
    let mut single = vec![0.0; ds.num_technologies()];
    for r in ds.records() {
        fused += (predict(&model, &r.estimates)?.x - r.true_position.x).powi(2);
        for (s, e) in single.iter_mut().zip(&r.estimates) {
            *s += (e.x - r.true_position.x).powi(2);
        }
    }
    let m = ds.len() as f64;
    println!("\ntraining MSE on x");
    println!("  {:<8} {:>8.2}", "hybrid", fused / m);
    for (name, s) in ds.technologies().iter().zip(&single) {
        println!("  {name:<8} {:>8.2}", s / m);
    }
    Ok(())
}
