//! Simulates RSSI-based distance estimates along a corridor, writes the
//! fingerprints as CSV and recalibrates a path-loss model from raw readings.
//!
//! cargo run --example simulate_corridor -- [seed]

use hybridloc::io::write_fingerprints;
use hybridloc::sim::{
    fit_path_loss, generate_corridor_dataset, point_stream, preset, simulate_rssi, stream_rng, CorridorConfig,
};

fn main() -> hybridloc::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let cfg = CorridorConfig { length: 20.0, grid_step: 2.0, seed, ..Default::default() };
    let ds = generate_corridor_dataset(&cfg)?;
    write_fingerprints(&ds, std::io::stdout())?;

    let wifi = preset("wifi").expect("built-in preset");
    let samples: Vec<(f64, f64)> = (1..=60)
        .map(|k| {
            let d = k as f64;
            (d, simulate_rssi(&wifi, d, &mut stream_rng(seed, point_stream(0, k))))
        })
        .collect();
    let fit = fit_path_loss("wifi", &samples)?;
    eprintln!(
        "wifi truth A={} n={} sigma={}; fitted A={:.2} n={:.3} sigma={:.2}",
        wifi.rssi_at_1m, wifi.exponent_n, wifi.noise_sigma, fit.rssi_at_1m, fit.exponent_n, fit.noise_sigma
    );
    Ok(())
}
