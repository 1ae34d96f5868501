//! Training-set error of every method over many simulated corridors, using
//! all fingerprints for both fitting and scoring.
//!
//! cargo run --release --example training_table

use hybridloc::harness::{run_experiment, DatasetSource, ExperimentConfig, Method, OneOrMany};
use hybridloc::sim::CorridorConfig;

fn main() -> hybridloc::Result<()> {
    let methods = [
        (Method::RfidOracle, 3),
        (Method::TwoLevel, 3),
        (Method::Global, 1),
        (Method::Individual("ble".into()), 1),
        (Method::Individual("wifi".into()), 1),
        (Method::Individual("zigbee".into()), 1),
    ];
    let seeds = 50;
    let mut sums = vec![0.0; methods.len()];
    for seed in 0..seeds {
        let mut cfg = ExperimentConfig::new(DatasetSource::Simulate(CorridorConfig::default()));
        cfg.split_fraction = 1.0;
        cfg.methods = vec![Method::Global, Method::TwoLevel, Method::RfidOracle, Method::AllIndividual];
        cfg.sections = OneOrMany::One(3);
        cfg.seed = seed;
        let report = run_experiment(&cfg)?;
        for (s, (m, k)) in sums.iter_mut().zip(&methods) {
            *s += report.mean(m, *k).unwrap_or(f64::NAN);
        }
    }
    println!("{:<18} {:>4} {:>10}", "method", "S", "mean MSE");
    for (s, (m, k)) in sums.iter().zip(&methods) {
        println!("{:<18} {k:>4} {:>10.2}", m.to_string(), s / seeds as f64);
    }
    Ok(())
}
