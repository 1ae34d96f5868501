//! The hybrid estimator: per-axis weight fitting, prediction, and the
//! section-based variants.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_axis_matrix, remove_dependent_columns, Axis, FingerprintDataset, Position,
    DEFAULT_RANK_TOL,
};
use crate::penalty::PowerPenalty;
use crate::simplex::CoefficientVector;
use crate::solver::{solve_gpm, AxisObjective, SolverConfig, SolverTrace};

/// Weight vectors for the three axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisWeights {
    pub x: CoefficientVector,
    pub y: CoefficientVector,
    pub z: CoefficientVector,
}

impl AxisWeights {
    pub fn get(&self, axis: Axis) -> &CoefficientVector {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }

    pub fn uniform(n: usize) -> Self {
        AxisWeights {
            x: CoefficientVector::uniform(n),
            y: CoefficientVector::uniform(n),
            z: CoefficientVector::uniform(n),
        }
    }
}

/// A fitted linear hybrid estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub technologies: Vec<String>,
    pub penalty: PowerPenalty,
    pub weights: AxisWeights,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl HybridModel {
    /// Model that always trusts technology `i`.
    pub fn single(technologies: Vec<String>, penalty: PowerPenalty, i: usize) -> Self {
        let n = technologies.len();
        let e = CoefficientVector::unit(n, i);
        HybridModel {
            technologies,
            penalty,
            weights: AxisWeights {
                x: e.clone(),
                y: e.clone(),
                z: e,
            },
            flags: Vec::new(),
        }
    }
}

/// Outcome of fitting one axis.
#[derive(Debug, Clone)]
pub struct AxisFit {
    pub alpha: CoefficientVector,
    /// Technologies dropped as linearly dependent.
    pub removed: Vec<usize>,
    /// Every estimate on this axis was zero; weights are uniform.
    pub degenerate: bool,
    pub trace: Option<SolverTrace>,
}

/// Fits the weights of one axis.
pub fn fit_axis(
    dataset: &FingerprintDataset,
    axis: Axis,
    penalty: PowerPenalty,
    cfg: &SolverConfig,
) -> Result<AxisFit> {
    let n = dataset.num_technologies();
    let u = build_axis_matrix(dataset, axis)?;
    if u.is_all_zero() {
        return Ok(AxisFit {
            alpha: CoefficientVector::uniform(n),
            removed: Vec::new(),
            degenerate: true,
            trace: None,
        });
    }
    let (reduced, removed) = remove_dependent_columns(&u, DEFAULT_RANK_TOL)?;
    let columns = reduced.columns.clone();
    let obj = AxisObjective::new(reduced, penalty);
    let (alpha, trace) = solve_gpm(&obj, cfg)?;
    Ok(AxisFit {
        alpha: alpha.expand(n, &columns),
        removed,
        degenerate: false,
        trace: Some(trace),
    })
}

/// Fits each axis independently.
pub fn fit_hybrid(
    dataset: &FingerprintDataset,
    penalty: PowerPenalty,
    cfg: &SolverConfig,
) -> Result<HybridModel> {
    let mut flags = Vec::new();
    let mut fits = Vec::with_capacity(3);
    for axis in Axis::ALL {
        let fit = fit_axis(dataset, axis, penalty, cfg)?;
        if fit.degenerate {
            flags.push(format!("{axis}: no information, uniform weights"));
        }
        if !fit.removed.is_empty() {
            flags.push(format!("{axis}: dropped dependent technologies {:?}", fit.removed));
        }
        if fit.trace.as_ref().is_some_and(|t| t.clamp_applied) {
            flags.push(format!("{axis}: curvature clamp applied"));
        }
        fits.push(fit.alpha);
    }
    let z = fits.pop().expect("three axes");
    let y = fits.pop().expect("three axes");
    let x = fits.pop().expect("three axes");
    Ok(HybridModel {
        technologies: dataset.technologies().to_vec(),
        penalty,
        weights: AxisWeights { x, y, z },
        flags,
    })
}

/// Coordinate-wise convex combination of the technology estimates.
pub fn predict(model: &HybridModel, estimates: &[Position]) -> Result<Position> {
    if estimates.len() != model.technologies.len() {
        return Err(Error::invalid(format!(
            "expected {} estimates, got {}",
            model.technologies.len(),
            estimates.len()
        )));
    }
    let mut out = Position::default();
    for axis in Axis::ALL {
        let coords: Vec<f64> = estimates.iter().map(|p| p.get(axis)).collect();
        out.set(axis, model.weights.get(axis).combine(&coords));
    }
    Ok(out)
}

/// Ordered, mutually exclusive intervals along one axis. Section `s` is
/// `[b_s, b_{s+1})`; the last section also contains its right end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionPartition {
    pub axis: Axis,
    boundaries: Vec<f64>,
}

impl SectionPartition {
    pub fn new(axis: Axis, boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::invalid("a partition needs at least two boundaries"));
        }
        if boundaries.iter().any(|b| !b.is_finite()) || boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("partition boundaries must be finite and strictly ascending"));
        }
        Ok(SectionPartition { axis, boundaries })
    }

    /// `sections` equal-length sections over `[0, length]`.
    pub fn uniform(axis: Axis, length: f64, sections: usize) -> Result<Self> {
        if sections == 0 || !(length > 0.0) {
            return Err(Error::invalid("need at least one section over a positive length"));
        }
        let mut b: Vec<f64> = (0..=sections).map(|k| length * k as f64 / sections as f64).collect();
        b[sections] = length;
        SectionPartition::new(axis, b)
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn num_sections(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn bounds(&self, section: usize) -> Result<(f64, f64)> {
        if section >= self.num_sections() {
            return Err(Error::invalid(format!(
                "section {section} out of range (have {})",
                self.num_sections()
            )));
        }
        Ok((self.boundaries[section], self.boundaries[section + 1]))
    }

    pub fn width(&self, section: usize) -> Result<f64> {
        self.bounds(section).map(|(a, b)| b - a)
    }

    /// Section containing `x`, or `None` outside the covered range.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let b = &self.boundaries;
        let last = *b.last().expect("non-empty");
        if !(x >= b[0] && x <= last) {
            return None;
        }
        // number of interior boundaries ≤ x
        let s = b[1..b.len() - 1].partition_point(|&v| v <= x);
        Some(s)
    }

    /// Like [`SectionPartition::locate`] but points outside the range go to
    /// the nearest end section.
    pub fn locate_clamped(&self, x: f64) -> usize {
        match self.locate(x) {
            Some(s) => s,
            None if x < self.boundaries[0] => 0,
            None => self.num_sections() - 1,
        }
    }
}

/// How a position is mapped to its section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectioningMode {
    /// The section is read off the global hybrid estimate.
    TwoLevel,
    /// The section is observed without error (RFID border tags).
    RfidOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionModel {
    pub model: HybridModel,
    pub training_size: usize,
    /// The section could not be fitted and uses the global model.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionedModel {
    pub partition: SectionPartition,
    pub mode: SectioningMode,
    pub global: HybridModel,
    pub sections: Vec<SectionModel>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl SectionedModel {
    pub fn technologies(&self) -> &[String] {
        &self.global.technologies
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: SectionedModel = serde_json::from_str(s)?;
        if m.sections.len() != m.partition.num_sections() {
            return Err(Error::invalid("section count does not match partition"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        SectionedModel::from_json(&s)
    }
}

/// Section each training record is assigned to.
pub fn assign_sections(
    dataset: &FingerprintDataset,
    partition: &SectionPartition,
    global: &HybridModel,
    mode: SectioningMode,
) -> Result<Vec<usize>> {
    let axis = partition.axis;
    dataset
        .records()
        .iter()
        .map(|r| match mode {
            SectioningMode::TwoLevel => {
                let p = predict(global, &r.estimates)?;
                Ok(partition.locate_clamped(p.get(axis)))
            }
            SectioningMode::RfidOracle => partition.locate(r.true_position.get(axis)).ok_or_else(|| {
                Error::invalid(format!("record {} lies outside the partition", r.point_id))
            }),
        })
        .collect()
}

/// Fits a global model, splits the training records by section, and fits
/// one model per section. Sections left without a usable fit fall back to
/// the global model.
pub fn fit_sectioned(
    dataset: &FingerprintDataset,
    partition: &SectionPartition,
    penalty: PowerPenalty,
    cfg: &SolverConfig,
    mode: SectioningMode,
) -> Result<SectionedModel> {
    let global = fit_hybrid(dataset, penalty, cfg)?;
    let assignment = assign_sections(dataset, partition, &global, mode)?;
    let mut flags = Vec::new();
    let mut sections = Vec::with_capacity(partition.num_sections());
    for s in 0..partition.num_sections() {
        let idx: Vec<usize> = (0..dataset.len()).filter(|&j| assignment[j] == s).collect();
        if idx.is_empty() {
            flags.push(format!("section {s}: no training data, using global model"));
            sections.push(SectionModel {
                model: global.clone(),
                training_size: 0,
                fallback: true,
            });
            continue;
        }
        let subset = dataset.subset(&idx);
        match fit_hybrid(&subset, penalty, cfg) {
            Ok(model) => sections.push(SectionModel {
                model,
                training_size: idx.len(),
                fallback: false,
            }),
            Err(e) => {
                flags.push(format!("section {s}: fit failed ({e}), using global model"));
                sections.push(SectionModel {
                    model: global.clone(),
                    training_size: idx.len(),
                    fallback: true,
                });
            }
        }
    }
    Ok(SectionedModel {
        partition: partition.clone(),
        mode,
        global,
        sections,
        flags,
    })
}

/// Section whose model [`predict_sectioned`] would use.
pub fn resolve_section(
    model: &SectionedModel,
    estimates: &[Position],
    rfid_section: Option<usize>,
) -> Result<usize> {
    if let Some(s) = rfid_section {
        model.partition.bounds(s)?;
    }
    match model.mode {
        SectioningMode::TwoLevel => {
            let g = predict(&model.global, estimates)?;
            Ok(model.partition.locate_clamped(g.get(model.partition.axis)))
        }
        SectioningMode::RfidOracle => {
            rfid_section.ok_or_else(|| Error::invalid("RFID-sectioned model needs the observed section"))
        }
    }
}

pub fn predict_sectioned(
    model: &SectionedModel,
    estimates: &[Position],
    rfid_section: Option<usize>,
) -> Result<Position> {
    let s = resolve_section(model, estimates, rfid_section)?;
    predict(&model.sections[s].model, estimates)
}

/// Center of `section` on the partition axis, zero on the others.
pub fn rfid_midpoint(partition: &SectionPartition, section: usize) -> Result<Position> {
    let (a, b) = partition.bounds(section)?;
    let mut p = Position::default();
    p.set(partition.axis, 0.5 * (a + b));
    Ok(p)
}
