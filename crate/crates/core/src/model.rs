//! Positions, fingerprint data and the per-axis estimate matrices the
//! solver works on.

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative singular-value threshold used by
/// [`remove_dependent_columns`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        };
        f.write_str(s)
    }
}

/// A point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    /// A point on the x axis, as used by the corridor experiments.
    pub fn on_x(x: f64) -> Self {
        Position { x, y: 0.0, z: 0.0 }
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x,
            Axis::Y => self.y,
            Axis::Z => self.z,
        }
    }

    pub fn set(&mut self, axis: Axis, value: f64) {
        match axis {
            Axis::X => self.x = value,
            Axis::Y => self.y = value,
            Axis::Z => self.z = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One reference point: its surveyed position and what each technology
/// reported there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintRecord {
    pub point_id: String,
    pub true_position: Position,
    /// One estimate per technology, in technology order.
    pub estimates: Vec<Position>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintDataset {
    technologies: Vec<String>,
    records: Vec<FingerprintRecord>,
}

impl FingerprintDataset {
    /// Validates and builds a dataset. Requires at least one technology
    /// and one record, unique point ids, one finite estimate per
    /// technology on every record.
    pub fn new(technologies: Vec<String>, records: Vec<FingerprintRecord>) -> Result<Self> {
        let ds = FingerprintDataset {
            technologies,
            records,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Like [`FingerprintDataset::new`] but allows zero records. Used for
    /// the empty test half of a train/test split.
    pub fn new_allow_empty(
        technologies: Vec<String>,
        records: Vec<FingerprintRecord>,
    ) -> Result<Self> {
        let ds = FingerprintDataset {
            technologies,
            records,
        };
        ds.validate_records()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::invalid("dataset has no records"));
        }
        self.validate_records()
    }

    fn validate_records(&self) -> Result<()> {
        let n = self.technologies.len();
        if n == 0 {
            return Err(Error::invalid("dataset has no technologies"));
        }
        let mut seen = HashSet::with_capacity(self.records.len());
        for rec in &self.records {
            if !seen.insert(rec.point_id.as_str()) {
                return Err(Error::invalid(format!("duplicate point_id {}", rec.point_id)));
            }
            if rec.estimates.len() != n {
                return Err(Error::invalid(format!(
                    "record {} has {} estimates, expected {n}",
                    rec.point_id,
                    rec.estimates.len()
                )));
            }
            if !rec.true_position.is_finite() || rec.estimates.iter().any(|p| !p.is_finite()) {
                return Err(Error::invalid(format!(
                    "record {} has non-finite coordinates",
                    rec.point_id
                )));
            }
        }
        Ok(())
    }

    pub fn technologies(&self) -> &[String] {
        &self.technologies
    }

    pub fn records(&self) -> &[FingerprintRecord] {
        &self.records
    }

    pub fn num_technologies(&self) -> usize {
        self.technologies.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// New dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FingerprintDataset {
        FingerprintDataset {
            technologies: self.technologies.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// New dataset holding the records matching `keep`.
    pub fn filter<F>(&self, mut keep: F) -> FingerprintDataset
    where
        F: FnMut(&FingerprintRecord) -> bool,
    {
        FingerprintDataset {
            technologies: self.technologies.clone(),
            records: self.records.iter().filter(|r| keep(r)).cloned().collect(),
        }
    }

    /// Rebuilds a dataset from the three axis matrices produced by
    /// [`build_axis_matrix`] (in x, y, z order).
    pub fn from_axis_matrices(
        technologies: Vec<String>,
        point_ids: Vec<String>,
        axes: &[AxisEstimateMatrix; 3],
    ) -> Result<Self> {
        let m = point_ids.len();
        for (k, a) in axes.iter().enumerate() {
            if a.axis != Axis::ALL[k] {
                return Err(Error::invalid("axis matrices must be ordered x, y, z"));
            }
            if a.num_fingerprints() != m || a.num_technologies() != technologies.len() {
                return Err(Error::invalid("axis matrix dimensions disagree"));
            }
        }
        let records = point_ids
            .into_iter()
            .enumerate()
            .map(|(j, point_id)| {
                let mut true_position = Position::default();
                let mut estimates = vec![Position::default(); technologies.len()];
                for a in axes {
                    true_position.set(a.axis, a.truth[j]);
                    for (i, est) in estimates.iter_mut().enumerate() {
                        est.set(a.axis, a.entries[(j, i)]);
                    }
                }
                FingerprintRecord {
                    point_id,
                    true_position,
                    estimates,
                }
            })
            .collect();
        FingerprintDataset::new(technologies, records)
    }
}

/// The `M x N` matrix of per-technology estimates on one axis, together with
/// the true coordinates. Entry `(j, i)` is technology `i`'s estimate of
/// fingerprint `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisEstimateMatrix {
    pub axis: Axis,
    pub entries: DMatrix<f64>,
    pub truth: DVector<f64>,
    /// Original technology index of each column. Identity until columns are
    /// dropped by [`remove_dependent_columns`].
    pub columns: Vec<usize>,
}

impl AxisEstimateMatrix {
    /// Builds a matrix from row-major estimates (one row per fingerprint).
    pub fn from_rows(axis: Axis, rows: &[Vec<f64>], truth: &[f64]) -> Result<Self> {
        let m = rows.len();
        if truth.len() != m {
            return Err(Error::invalid("truth length must equal number of rows"));
        }
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("ragged estimate rows"));
        }
        let entries = DMatrix::from_fn(m, n, |j, i| rows[j][i]);
        Self::from_matrix(axis, entries, DVector::from_column_slice(truth))
    }

    pub fn from_matrix(axis: Axis, entries: DMatrix<f64>, truth: DVector<f64>) -> Result<Self> {
        if entries.nrows() != truth.len() {
            return Err(Error::invalid("truth length must equal number of rows"));
        }
        if entries.iter().chain(truth.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite entry in axis matrix"));
        }
        let columns = (0..entries.ncols()).collect();
        Ok(AxisEstimateMatrix {
            axis,
            entries,
            truth,
            columns,
        })
    }

    pub fn num_fingerprints(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_technologies(&self) -> usize {
        self.entries.ncols()
    }

    pub fn is_all_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0)
    }

    /// Smallest and largest estimate on row `j`.
    pub fn row_range(&self, j: usize) -> (f64, f64) {
        self.entries
            .row(j)
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Collects technology estimates and truth on one axis.
pub fn build_axis_matrix(dataset: &FingerprintDataset, axis: Axis) -> Result<AxisEstimateMatrix> {
    if dataset.is_empty() {
        return Err(Error::invalid("dataset has no records"));
    }
    let m = dataset.len();
    let n = dataset.num_technologies();
    let recs = dataset.records();
    let entries = DMatrix::from_fn(m, n, |j, i| recs[j].estimates[i].get(axis));
    let truth = DVector::from_iterator(m, recs.iter().map(|r| r.true_position.get(axis)));
    AxisEstimateMatrix::from_matrix(axis, entries, truth)
}

/// `C = UᵀU`, the Gram matrix of the technology columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(pub DMatrix<f64>);

impl CorrelationMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let c = &self.0;
        (0..c.nrows()).all(|i| (0..i).all(|k| (c[(i, k)] - c[(k, i)]).abs() <= tol))
    }

    /// True when a Cholesky factorization succeeds.
    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn correlation_matrix(u: &AxisEstimateMatrix) -> CorrelationMatrix {
    let e = &u.entries;
    let n = e.ncols();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in i..n {
            let v = e.column(i).dot(&e.column(k));
            c[(i, k)] = v;
            c[(k, i)] = v;
        }
    }
    CorrelationMatrix(c)
}

fn condition_ratio(cols: &DMatrix<f64>) -> f64 {
    let sv = cols.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    min / max
}

/// Drops columns that are numerically dependent on earlier ones.
///
/// Columns are visited in order and kept only if the kept set stays of full
/// column rank, judged by `σ_min / σ_max > tol`. Returns the reduced matrix
/// and the original indices of the dropped columns.
pub fn remove_dependent_columns(
    u: &AxisEstimateMatrix,
    tol: f64,
) -> Result<(AxisEstimateMatrix, Vec<usize>)> {
    if !(tol > 0.0) {
        return Err(Error::invalid("rank tolerance must be positive"));
    }
    if u.is_all_zero() {
        return Err(Error::degenerate("axis matrix is all zeros"));
    }
    let m = u.num_fingerprints();
    let mut kept: Vec<usize> = Vec::new();
    let mut removed = Vec::new();
    for i in 0..u.num_technologies() {
        let mut trial = kept.clone();
        trial.push(i);
        let sub = u.entries.select_columns(trial.iter());
        if trial.len() <= m && condition_ratio(&sub) > tol {
            kept = trial;
        } else {
            removed.push(u.columns[i]);
        }
    }
    let reduced = AxisEstimateMatrix {
        axis: u.axis,
        entries: u.entries.select_columns(kept.iter()),
        truth: u.truth.clone(),
        columns: kept.iter().map(|&i| u.columns[i]).collect(),
    };
    Ok((reduced, removed))
}
