//! Test-set MAE against the number of sections, for fused per-section
//! weights and for the RFID tag alone (reporting the section midpoint).
//! Writes the report CSV to stdout.
//!
//! cargo run --release --example section_sweep -- [noise_scale]

use hybridloc::harness::{run_experiment, DatasetSource, ExperimentConfig, Method, Metric, OneOrMany};
use hybridloc::sim::{default_technologies, CorridorConfig};

fn main() -> hybridloc::Result<()> {
    let scale: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let technologies = default_technologies()
        .iter()
        .map(|t| t.with_noise_sigma(scale * t.noise_sigma))
        .collect();
    let mut cfg = ExperimentConfig::new(DatasetSource::Simulate(CorridorConfig {
        technologies,
        ..Default::default()
    }));
    cfg.methods = vec![Method::Global, Method::RfidOracle, Method::TwoLevel, Method::RfidMidpoint];
    cfg.sections = OneOrMany::Many((1..=8).collect());
    cfg.metric = Metric::Mae;
    cfg.repetitions = 200;
    cfg.seed = 7;
    let report = run_experiment(&cfg)?;
    report.write_csv(std::io::stdout())?;

    eprintln!("{:>2} {:>12} {:>12} {:>12}", "S", "rfid_oracle", "two_level", "midpoint");
    for s in 1..=8 {
        let v = |m: Method| report.mean(&m, s).unwrap_or(f64::NAN);
        eprintln!(
            "{s:>2} {:>12.2} {:>12.2} {:>12.2}",
            v(Method::RfidOracle),
            v(Method::TwoLevel),
            v(Method::RfidMidpoint)
        );
    }
    Ok(())
}
