//! Euclidean projection onto the probability simplex
//! `{α : α_i ≥ 0, Σ α_i = 1}`.
//!
//! Writing `c = -z`, the projection of `z` is `α_i = [λ - c_i]⁺` where `λ`
//! is the unique root of the strictly increasing
//! `g(λ) = Σ_i [λ - c_i]⁺ - 1`. [`project_sorted`] finds `λ` exactly from the
//! sorted `c`; [`project_bisect`] brackets it.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance accepted on `Σ α_i = 1` when a vector is built from outside
/// data.
const SUM_TOL: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("coefficient vector is empty"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {s}, not 1")));
        }
        Ok(CoefficientVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform weights need n > 0");
        CoefficientVector(vec![1.0 / n as f64; n])
    }

    /// The vertex `e_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        assert!(i < n, "vertex index out of range");
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        CoefficientVector(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest weight (first on ties).
    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bw), (i, &w)| if w > bw { (i, w) } else { (bi, bw) })
            .0
    }

    /// Scatters a reduced vector back to `n` slots; `columns[k]` is the slot
    /// of entry `k`, the rest are zero.
    pub fn expand(&self, n: usize, columns: &[usize]) -> CoefficientVector {
        let mut w = vec![0.0; n];
        for (k, &c) in columns.iter().enumerate() {
            w[c] = self.0[k];
        }
        CoefficientVector(w)
    }

    /// `Σ α_i x_i`.
    pub fn combine(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(a, v)| a * v).sum()
    }
}

impl Index<usize> for CoefficientVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        CoefficientVector::new(v)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(c: CoefficientVector) -> Vec<f64> {
        c.0
    }
}

/// Witness for the sorted-threshold projection.
///
/// `sorted` is the ascending sequence `m` of the shifted thresholds
/// `c_i = offset - z_i`, so `m_1 = 0`. `support` is the `n` with
/// `m_n ≤ λ ≤ m_{n+1}` (where `m_{N+1} = m_1 + 1`) and
/// `λ = (1 + Σ_{i≤n} m_i) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionCertificate {
    pub offset: f64,
    pub sorted: Vec<f64>,
    pub support: usize,
    pub lambda: f64,
}

impl ProjectionCertificate {
    /// `m_{n+1}` with the wrap-around `m_{N+1} = m_1 + 1`.
    pub fn upper_threshold(&self) -> f64 {
        self.sorted
            .get(self.support)
            .copied()
            .unwrap_or(self.sorted[0] + 1.0)
    }
}

fn check_input(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::invalid("cannot project an empty vector"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("projection input has a non-finite entry"));
    }
    Ok(())
}

/// Shifted thresholds `c_i = max(z) - z_i ≥ 0`.
fn thresholds(z: &[f64]) -> (f64, Vec<f64>) {
    let offset = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (offset, z.iter().map(|v| offset - v).collect())
}

/// `α_i = [λ - c_i]⁺`, then the excess over 1 is spread over the support.
fn weights_at(lambda: f64, c: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = c.iter().map(|ci| (lambda - ci).max(0.0)).collect();
    renormalize(&mut w, c);
    w
}

fn renormalize(w: &mut [f64], c: &[f64]) {
    for _ in 0..8 {
        let s: f64 = w.iter().sum();
        if s == 1.0 {
            return;
        }
        let k = w.iter().filter(|&&v| v > 0.0).count();
        if k == 0 {
            break;
        }
        let d = (s - 1.0) / k as f64;
        for v in w.iter_mut().filter(|v| **v > 0.0) {
            *v = (*v - d).max(0.0);
        }
    }
    if w.iter().all(|&v| v == 0.0) {
        // λ fell below every threshold; only reachable with a huge bisection tolerance
        let best = c
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bc), (i, &ci)| if ci < bc { (i, ci) } else { (bi, bc) })
            .0;
        w[best] = 1.0;
    }
}

/// `g(λ) = Σ_i [λ - c_i]⁺ - 1` with `c = -z`.
pub fn threshold_residual(z: &[f64], lambda: f64) -> f64 {
    z.iter().map(|zi| (lambda + zi).max(0.0)).sum::<f64>() - 1.0
}

/// Exact projection by sorting, `O(N log N)`.
pub fn project_sorted(z: &[f64]) -> Result<CoefficientVector> {
    project_sorted_with_certificate(z).map(|(w, _)| w)
}

/// [`project_sorted`] plus the threshold certificate.
pub fn project_sorted_with_certificate(
    z: &[f64],
) -> Result<(CoefficientVector, ProjectionCertificate)> {
    check_input(z)?;
    let (offset, c) = thresholds(z);
    let mut m = c.clone();
    m.sort_by(f64::total_cmp);
    let big_n = m.len();

    let mut found = None;
    let mut first_below_next = None;
    let mut prefix = 0.0;
    for n in 1..=big_n {
        prefix += m[n - 1];
        let lambda = (1.0 + prefix) / n as f64;
        let next = if n < big_n { m[n] } else { m[0] + 1.0 };
        if lambda <= next {
            if m[n - 1] <= lambda {
                found = Some((n, lambda));
                break;
            }
            first_below_next.get_or_insert((n, lambda));
        }
    }
    let (support, lambda) = found.or(first_below_next).ok_or_else(|| {
        Error::NumericalFailure("no threshold satisfied the sorted-scan bracket".into())
    })?;

    let w = if big_n == 1 { vec![1.0] } else { weights_at(lambda, &c) };
    let cert = ProjectionCertificate {
        offset,
        sorted: m,
        support,
        lambda,
    };
    Ok((CoefficientVector(w), cert))
}

/// Projection by bisection on `g` over the bracket `[min c, 1 + min c]`,
/// `O(N log(1/tol))`. Stops once the bracket is narrower than `tol`.
pub fn project_bisect(z: &[f64], tol: f64) -> Result<CoefficientVector> {
    check_input(z)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("bisection tolerance must be positive"));
    }
    if z.len() == 1 {
        return Ok(CoefficientVector(vec![1.0]));
    }
    let (_, c) = thresholds(z);
    let g = |lambda: f64| c.iter().map(|ci| (lambda - ci).max(0.0)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CoefficientVector(weights_at(0.5 * (lo + hi), &c)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() <= tol
    }

    #[test]
    fn feasible_point_is_fixed() {
        let w = project_sorted(&[0.3, 0.7]).unwrap();
        assert!(close(w.as_slice(), &[0.3, 0.7], 1e-15));
    }

    #[test]
    fn single_coordinate() {
        for z in [-1e9, 0.0, 3.5] {
            assert_eq!(project_sorted(&[z]).unwrap().as_slice(), &[1.0]);
            assert_eq!(project_bisect(&[z], 1e-12).unwrap().as_slice(), &[1.0]);
        }
    }

    #[test]
    fn worked_three_vector() {
        let z = [0.8, 0.6, -0.2];
        let (w, cert) = project_sorted_with_certificate(&z).unwrap();
        assert!(close(w.as_slice(), &[0.6, 0.4, 0.0], 1e-15));
        assert_eq!(cert.support, 2);
        // unshifted: λ = (1 - 0.8 - 0.6) / 2 = -0.2, shifted by max z = 0.8
        assert!((cert.lambda - cert.offset - (-0.2)).abs() < 1e-15);
        let b = project_bisect(&z, 1e-12).unwrap();
        assert!(close(b.as_slice(), &[0.6, 0.4, 0.0], 1e-10));
    }

    #[test]
    fn uniform_and_dominant() {
        for n in 1..10 {
            let z = vec![1.0 / n as f64; n];
            assert!(close(project_bisect(&z, 1e-12).unwrap().as_slice(), &z, 1e-12));
            assert!(close(project_sorted(&z).unwrap().as_slice(), &z, 1e-12));
        }
        assert_eq!(project_sorted(&[10.0, 0.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(project_bisect(&[10.0, 0.0, 0.0], 1e-12).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn ties_are_handled() {
        let w = project_sorted(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!(close(w.as_slice(), &[0.25; 4], 1e-15));
        let w = project_sorted(&[2.0, 2.0, -1.0]).unwrap();
        assert!(close(w.as_slice(), &[0.5, 0.5, 0.0], 1e-15));
    }

    #[test]
    fn large_magnitudes_stay_accurate() {
        let w = project_sorted(&[1e20, 1e20 - 1e5, 0.0]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 0.0, 0.0]);
        let w = project_sorted(&[-1e12 + 0.25, -1e12]).unwrap();
        assert!(close(w.as_slice(), &[0.625, 0.375], 1e-3));
    }

    #[test]
    fn invalid_inputs() {
        assert!(project_sorted(&[]).is_err());
        assert!(project_sorted(&[0.1, f64::NAN]).is_err());
        assert!(project_bisect(&[f64::INFINITY], 1e-9).is_err());
        assert!(project_bisect(&[0.1], 0.0).is_err());
    }

    #[test]
    fn coefficient_vector_validation() {
        assert!(CoefficientVector::new(vec![0.5, 0.5]).is_ok());
        assert!(CoefficientVector::new(vec![0.5, 0.6]).is_err());
        assert!(CoefficientVector::new(vec![1.5, -0.5]).is_err());
        assert!(CoefficientVector::new(vec![]).is_err());
        let e = CoefficientVector::unit(3, 1).expand(5, &[0, 2, 4]);
        assert_eq!(e.as_slice(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        let json = serde_json::to_string(&CoefficientVector::uniform(2)).unwrap();
        assert_eq!(json, "[0.5,0.5]");
        assert!(serde_json::from_str::<CoefficientVector>("[0.9,0.9]").is_err());
    }
}
