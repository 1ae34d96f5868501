//! Section-based fusion: separate weights per corridor section, with the
//! section read from an RFID tag or estimated from a first global fit.
//!
//! cargo run --example sectioned_fusion

use hybridloc::fusion::{fit_sectioned, predict_sectioned, SectionPartition, SectioningMode};
use hybridloc::model::{Axis, Position};
use hybridloc::penalty::PowerPenalty;
use hybridloc::sim::{generate_corridor_dataset, observe_rfid_section, CorridorConfig};
use hybridloc::solver::SolverConfig;

fn main() -> hybridloc::Result<()> {
    let ds = generate_corridor_dataset(&CorridorConfig { seed: 7, ..Default::default() })?;
    let partition = SectionPartition::uniform(Axis::X, 60.0, 3)?;
    let cfg = SolverConfig::default();

    for mode in [SectioningMode::RfidOracle, SectioningMode::TwoLevel] {
        let model = fit_sectioned(&ds, &partition, PowerPenalty::mse(), &cfg, mode)?;
        println!("{mode:?}");
        for (s, sec) in model.sections.iter().enumerate() {
            let (lo, hi) = partition.bounds(s)?;
            let w: Vec<String> = sec.model.weights.x.as_slice().iter().map(|v| format!("{v:.3}")).collect();
            println!("  [{lo:>4.1}, {hi:>4.1})  {:>2} points  alpha_x = [{}]", sec.training_size, w.join(", "));
        }

        let mut sse = 0.0;
        for r in ds.records() {
            let tag = match mode {
                SectioningMode::RfidOracle => Some(observe_rfid_section(&partition, &r.true_position)?),
                SectioningMode::TwoLevel => None,
            };
            sse += (predict_sectioned(&model, &r.estimates, tag)?.x - r.true_position.x).powi(2);
        }
        println!("  training MSE {:.2}", sse / ds.len() as f64);
    }

    // one query: three technologies reporting positions near the middle
    let model = fit_sectioned(&ds, &partition, PowerPenalty::mse(), &cfg, SectioningMode::TwoLevel)?;
    let est = [Position::on_x(33.0), Position::on_x(27.5), Position::on_x(31.0)];
    println!("\nquery {:?} -> {:.2}", est.map(|p| p.x), predict_sectioned(&model, &est, None)?.x);
    Ok(())
}
