//! Log-distance path-loss simulation of RSSI-based range estimates along a
//! straight corridor.
//!
//! Randomness is drawn from ChaCha8 with the run seed as key and a stream
//! id per draw site, so every point of every technology is reproducible in
//! isolation regardless of evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::SectionPartition;
use crate::model::{FingerprintDataset, FingerprintRecord, Position};

/// Closest distance to a beacon that is ever simulated, in meters.
pub const MIN_DISTANCE: f64 = 0.1;

/// Generator for a given seed and stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id of the draw for technology `tech` at grid point `point`.
pub fn point_stream(tech: usize, point: usize) -> u64 {
    ((tech as u64) << 32) | point as u64
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn uniform01<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw (Box-Muller, cosine branch).
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    let u1 = uniform01(rng);
    let u2 = uniform01(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Log-distance path-loss model:
/// `RSSI(d) = rssi_at_1m - 10 n log10(d) + N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub name: String,
    /// Received power at 1 m, dBm.
    pub rssi_at_1m: f64,
    pub exponent_n: f64,
    /// Shadowing standard deviation, dB.
    pub noise_sigma: f64,
}

impl PathLossParams {
    pub fn new(name: impl Into<String>, rssi_at_1m: f64, exponent_n: f64, noise_sigma: f64) -> Result<Self> {
        let p = PathLossParams {
            name: name.into(),
            rssi_at_1m,
            exponent_n,
            noise_sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(',') {
            return Err(Error::invalid(format!("bad technology name {:?}", self.name)));
        }
        if !self.rssi_at_1m.is_finite() || !(self.exponent_n > 0.0) || !self.exponent_n.is_finite() {
            return Err(Error::invalid(format!("{}: bad path-loss parameters", self.name)));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid(format!("{}: noise sigma must be non-negative", self.name)));
        }
        Ok(())
    }

    /// Noise-free received power at distance `d`.
    pub fn mean_rssi(&self, d: f64) -> f64 {
        self.rssi_at_1m - 10.0 * self.exponent_n * d.max(MIN_DISTANCE).log10()
    }

    pub fn with_noise_sigma(&self, sigma: f64) -> Self {
        PathLossParams {
            noise_sigma: sigma,
            ..self.clone()
        }
    }
}

/// Illustrative parameter sets for three radio technologies. These are
/// typical indoor values, not calibrated measurements.
pub fn preset(name: &str) -> Option<PathLossParams> {
    let (a, n, s) = match name {
        "ble" => (-46.0, 2.2, 4.0),
        "wifi" => (-38.0, 2.0, 3.0),
        "zigbee" => (-44.0, 2.1, 3.5),
        _ => return None,
    };
    Some(PathLossParams {
        name: name.to_string(),
        rssi_at_1m: a,
        exponent_n: n,
        noise_sigma: s,
    })
}

pub fn default_technologies() -> Vec<PathLossParams> {
    ["ble", "wifi", "zigbee"].iter().filter_map(|n| preset(n)).collect()
}

/// One noisy RSSI reading at distance `d`.
pub fn simulate_rssi<R: RngCore>(params: &PathLossParams, d: f64, rng: &mut R) -> f64 {
    params.mean_rssi(d) + params.noise_sigma * standard_normal(rng)
}

/// Distance implied by a reading, clamped to `[0, max_distance]`.
pub fn invert_rssi(params: &PathLossParams, rssi: f64, max_distance: f64) -> f64 {
    let d = 10f64.powf((params.rssi_at_1m - rssi) / (10.0 * params.exponent_n));
    if d.is_nan() {
        return 0.0;
    }
    d.clamp(0.0, max_distance)
}

/// Least-squares fit of `rssi = A - 10 n log10(d)` to `(distance, rssi)`
/// pairs. The noise level is the root mean squared residual.
pub fn fit_path_loss(name: &str, samples: &[(f64, f64)]) -> Result<PathLossParams> {
    if samples.iter().any(|&(d, r)| !(d > 0.0) || !d.is_finite() || !r.is_finite()) {
        return Err(Error::invalid("calibration samples need positive distances and finite readings"));
    }
    let m = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|&(d, _)| -10.0 * d.log10()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = samples.iter().map(|&(_, r)| r).sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if samples.len() < 2 || !(sxx > 1e-12 * m) {
        return Err(Error::degenerate("calibration needs at least two distinct distances"));
    }
    let sxy: f64 = xs.iter().zip(samples).map(|(x, &(_, r))| (x - mx) * (r - my)).sum();
    let n = sxy / sxx;
    let a = my - n * mx;
    let ssr: f64 = xs.iter().zip(samples).map(|(x, &(_, r))| (r - a - n * x).powi(2)).sum();
    if !(n > 0.0) {
        return Err(Error::degenerate("fitted path-loss exponent is not positive"));
    }
    PathLossParams::new(name, a, n, (ssr / m).sqrt())
}

/// Layout and radio setup of a simulated corridor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorConfig {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_technologies")]
    pub technologies: Vec<PathLossParams>,
    #[serde(default)]
    pub seed: u64,
}

fn default_length() -> f64 {
    60.0
}

fn default_grid_step() -> f64 {
    0.915
}

impl Default for CorridorConfig {
    fn default() -> Self {
        CorridorConfig {
            length: default_length(),
            grid_step: default_grid_step(),
            technologies: default_technologies(),
            seed: 0,
        }
    }
}

impl CorridorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(Error::invalid("corridor length must be positive"));
        }
        if !(self.grid_step > 0.0) || self.grid_step > self.length {
            return Err(Error::invalid("grid step must be positive and at most the corridor length"));
        }
        if self.technologies.is_empty() {
            return Err(Error::invalid("at least one technology is required"));
        }
        for t in &self.technologies {
            t.validate()?;
        }
        Ok(())
    }

    /// Distances of the grid points from the beacon. The first point sits
    /// at [`MIN_DISTANCE`] instead of on the beacon.
    pub fn grid(&self) -> Vec<f64> {
        let count = (self.length / self.grid_step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| (k as f64 * self.grid_step).max(MIN_DISTANCE)).collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: CorridorConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Fingerprint dataset for the corridor: one record per grid point with
/// every technology's range estimate on the x axis.
pub fn generate_corridor_dataset(cfg: &CorridorConfig) -> Result<FingerprintDataset> {
    cfg.validate()?;
    let max_d = 2.0 * cfg.length;
    let records = cfg
        .grid()
        .into_iter()
        .enumerate()
        .map(|(k, x)| {
            let estimates = cfg
                .technologies
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let mut rng = stream_rng(cfg.seed, point_stream(i, k));
                    Position::on_x(invert_rssi(t, simulate_rssi(t, x, &mut rng), max_d))
                })
                .collect();
            FingerprintRecord {
                point_id: format!("p{k:03}"),
                true_position: Position::on_x(x),
                estimates,
            }
        })
        .collect();
    let names = cfg.technologies.iter().map(|t| t.name.clone()).collect();
    FingerprintDataset::new(names, records)
}

/// Section reported by error-free RFID border tags for a position.
pub fn observe_rfid_section(partition: &SectionPartition, true_position: &Position) -> Result<usize> {
    let x = true_position.get(partition.axis);
    partition
        .locate(x)
        .ok_or_else(|| Error::invalid(format!("position {x} lies outside the sectioned range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Axis;

    #[test]
    fn noiseless_rssi_and_inverse() {
        let p = PathLossParams::new("t", -40.0, 2.0, 0.0).unwrap();
        let mut rng = stream_rng(0, 0);
        assert!((simulate_rssi(&p, 10.0, &mut rng) + 60.0).abs() < 1e-12);
        assert!((invert_rssi(&p, -60.0, 120.0) - 10.0).abs() < 1e-12);
        assert_eq!(invert_rssi(&p, -200.0, 120.0), 120.0);
        assert!((p.mean_rssi(0.0) - p.mean_rssi(MIN_DISTANCE)).abs() < 1e-15);
    }

    #[test]
    fn fit_recovers_exact_parameters() {
        let samples: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 10.0].iter().map(|&d| (d, -40.0 - 25.0 * f64::log10(d))).collect();
        let p = fit_path_loss("t", &samples).unwrap();
        assert!((p.rssi_at_1m + 40.0).abs() < 1e-9);
        assert!((p.exponent_n - 2.5).abs() < 1e-9);
        assert!(p.noise_sigma < 1e-9);
        assert!(matches!(fit_path_loss("t", &[(2.0, -50.0), (2.0, -52.0)]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn corridor_grid() {
        let cfg = CorridorConfig::default();
        let g = cfg.grid();
        assert_eq!(g.len(), 66);
        assert_eq!(g[0], 0.1);
        assert!((g[65] - 65.0 * 0.915).abs() < 1e-12);
        let ds = generate_corridor_dataset(&cfg).unwrap();
        assert_eq!(ds.len(), 66);
        assert_eq!(ds.num_technologies(), 3);
        for r in ds.records() {
            assert_eq!(r.true_position.y, 0.0);
            for e in &r.estimates {
                assert!(e.x >= 0.0 && e.x <= 120.0 && e.y == 0.0 && e.z == 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let cfg = CorridorConfig { seed: 7, ..Default::default() };
        assert_eq!(generate_corridor_dataset(&cfg).unwrap(), generate_corridor_dataset(&cfg).unwrap());
        let other = CorridorConfig { seed: 8, ..Default::default() };
        assert_ne!(generate_corridor_dataset(&cfg).unwrap(), generate_corridor_dataset(&other).unwrap());
    }

    #[test]
    fn rfid_sections() {
        let part = SectionPartition::uniform(Axis::X, 60.0, 3).unwrap();
        assert_eq!(observe_rfid_section(&part, &Position::on_x(20.0)).unwrap(), 1);
        assert_eq!(observe_rfid_section(&part, &Position::on_x(5.0)).unwrap(), 0);
        assert!(observe_rfid_section(&part, &Position::on_x(61.0)).is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg = CorridorConfig::from_json(r#"{"seed": 3}"#).unwrap();
        assert_eq!(cfg.length, 60.0);
        assert_eq!(cfg.technologies.len(), 3);
        assert!(CorridorConfig::from_json(r#"{"length": -1}"#).is_err());
        assert!(CorridorConfig::from_json(r#"{"lenght": 10}"#).is_err());
    }

    #[test]
    fn normal_draws_have_unit_moments() {
        let mut rng = stream_rng(42, 1);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }
}
