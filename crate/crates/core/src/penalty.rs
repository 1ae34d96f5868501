//! Strictly convex scalar penalties and the curvature bounds that certify a
//! constant projected-gradient step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AxisEstimateMatrix;

/// Default radius of the quadratic core used by power penalties with
/// exponent below 2, in meters.
pub const DEFAULT_CORE_RADIUS: f64 = 1e-2;

/// ε used by the pseudo-absolute-error penalty `|t|^(1+ε)`.
pub const PSEUDO_MAE_EPS: f64 = 1e-4;

/// Range of `V''` over an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureRange {
    pub min: f64,
    pub max: f64,
    /// The interval came within the clamp radius of zero, so at least one
    /// bound was evaluated at the radius rather than at the interval itself.
    pub clamped: bool,
}

/// A strictly convex, even penalty `V(t)` with its first two derivatives.
pub trait ConvexPenalty {
    fn value(&self, t: f64) -> f64;
    fn first_derivative(&self, t: f64) -> f64;
    fn second_derivative(&self, t: f64) -> f64;
    /// Smallest and largest `V''` on `[lo, hi]`.
    fn curvature_range(&self, lo: f64, hi: f64) -> CurvatureRange;
}

/// `V(t) = |t|^p` with `p > 1`.
///
/// For `p < 2` the second derivative blows up at the origin, so inside
/// `|t| < core_radius` the penalty is replaced by the quadratic that matches
/// value and slope at the radius. Outside the core the penalty is exactly
/// `|t|^p`. For `p > 2` the value is never modified; the radius only floors
/// the lower curvature bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPenalty {
    exponent: f64,
    core_radius: f64,
}

impl PowerPenalty {
    pub fn new(exponent: f64) -> Result<Self> {
        Self::with_core_radius(exponent, DEFAULT_CORE_RADIUS)
    }

    pub fn with_core_radius(exponent: f64, core_radius: f64) -> Result<Self> {
        if !(exponent > 1.0) || !exponent.is_finite() {
            return Err(Error::invalid(format!("penalty exponent must exceed 1, got {exponent}")));
        }
        if !(core_radius > 0.0) || !core_radius.is_finite() {
            return Err(Error::invalid("core radius must be positive"));
        }
        Ok(PowerPenalty {
            exponent,
            core_radius,
        })
    }

    /// Squared error.
    pub fn mse() -> Self {
        PowerPenalty {
            exponent: 2.0,
            core_radius: DEFAULT_CORE_RADIUS,
        }
    }

    /// `|t|^(1+eps)`, a smooth stand-in for absolute error.
    pub fn pseudo_mae(eps: f64) -> Result<Self> {
        Self::new(1.0 + eps)
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }

    fn is_quadratic(&self) -> bool {
        self.exponent == 2.0
    }

    fn has_core(&self) -> bool {
        self.exponent < 2.0
    }

    // p(p-1)|s|^(p-2) for s > 0
    fn outer_curvature(&self, s: f64) -> f64 {
        let p = self.exponent;
        p * (p - 1.0) * s.powf(p - 2.0)
    }

    fn core_curvature(&self) -> f64 {
        let p = self.exponent;
        p * self.core_radius.powf(p - 2.0)
    }
}

impl ConvexPenalty for PowerPenalty {
    fn value(&self, t: f64) -> f64 {
        let p = self.exponent;
        let s = t.abs();
        if self.is_quadratic() {
            t * t
        } else if self.has_core() && s < self.core_radius {
            let d = self.core_radius;
            0.5 * self.core_curvature() * s * s + (1.0 - 0.5 * p) * d.powf(p)
        } else {
            s.powf(p)
        }
    }

    fn first_derivative(&self, t: f64) -> f64 {
        let p = self.exponent;
        let s = t.abs();
        if self.is_quadratic() {
            2.0 * t
        } else if t == 0.0 {
            0.0
        } else if self.has_core() && s < self.core_radius {
            self.core_curvature() * t
        } else {
            p * t.signum() * s.powf(p - 1.0)
        }
    }

    fn second_derivative(&self, t: f64) -> f64 {
        let s = t.abs();
        if self.is_quadratic() {
            2.0
        } else if self.has_core() && s < self.core_radius {
            self.core_curvature()
        } else if s == 0.0 {
            0.0
        } else {
            self.outer_curvature(s)
        }
    }

    fn curvature_range(&self, lo: f64, hi: f64) -> CurvatureRange {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        if self.is_quadratic() {
            return CurvatureRange {
                min: 2.0,
                max: 2.0,
                clamped: false,
            };
        }
        let near = if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else {
            lo.abs().min(hi.abs())
        };
        let far = lo.abs().max(hi.abs());
        let r = self.core_radius;
        if self.has_core() {
            // V'' is constant on the core and decreasing in |t| outside it.
            let (max, c1) = if near < r {
                (self.core_curvature(), true)
            } else {
                (self.outer_curvature(near), false)
            };
            let (min, c2) = if far < r {
                (self.core_curvature(), true)
            } else {
                (self.outer_curvature(far), false)
            };
            CurvatureRange {
                min,
                max,
                clamped: c1 || c2,
            }
        } else {
            // V'' increasing in |t|; evaluated no closer to zero than r.
            CurvatureRange {
                min: self.outer_curvature(near.max(r)),
                max: self.outer_curvature(far.max(r)),
                clamped: near < r,
            }
        }
    }
}

impl fmt::Display for PowerPenalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_quadratic() {
            f.write_str("p2")
        } else {
            write!(f, "p{}", self.exponent)
        }
    }
}

impl FromStr for PowerPenalty {
    type Err = Error;

    /// Accepts `p2`, `p1+eps:<eps>` or `p<exponent>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(eps) = s.strip_prefix("p1+eps:") {
            let eps: f64 = eps
                .parse()
                .map_err(|_| Error::invalid(format!("bad epsilon in penalty {s:?}")))?;
            if !(eps > 0.0) {
                return Err(Error::invalid("penalty epsilon must be positive"));
            }
            return PowerPenalty::pseudo_mae(eps);
        }
        let p: f64 = s
            .strip_prefix('p')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::invalid(format!("unknown penalty {s:?}")))?;
        PowerPenalty::new(p)
    }
}

/// Step-size choice for the projected-gradient solver.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSize {
    /// Half of the largest certified step.
    #[default]
    Auto,
    Fixed(f64),
}

/// Per-fingerprint curvature bounds and the derived step window.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBounds {
    /// Upper bound on `V''` over each fingerprint's residual interval.
    pub upper: Vec<f64>,
    /// Lower bound on `V''` over the same interval.
    pub lower: Vec<f64>,
    pub l_max: f64,
    pub l_min: f64,
    /// `2 / (N L_max)`; every step strictly below this is certified.
    pub beta_max: f64,
    pub beta: f64,
    pub q: f64,
    pub clamp_applied: bool,
}

/// `max{|1 - β N l_min|, |1 - β N L_max|}`.
pub fn contraction_factor(beta: f64, n: usize, l_min: f64, l_max: f64) -> f64 {
    let n = n as f64;
    (1.0 - beta * n * l_min).abs().max((1.0 - beta * n * l_max).abs())
}

/// Curvature bounds for `penalty` on the residual box spanned by `u`.
///
/// On fingerprint `j` every feasible hybrid residual lies between
/// `min_i û_i^j - u^j` and `max_i û_i^j - u^j`; the bounds are the extreme
/// values of `V''` there.
pub fn curvature_bounds<P: ConvexPenalty>(
    penalty: &P,
    u: &AxisEstimateMatrix,
    step: StepSize,
) -> Result<CurvatureBounds> {
    let m = u.num_fingerprints();
    let n = u.num_technologies();
    if m == 0 || n == 0 {
        return Err(Error::invalid("curvature bounds need a non-empty matrix"));
    }
    let e = &u.entries;
    if let Some(i) = (0..n).find(|&i| e.column(i).iter().all(|&v| v == 0.0)) {
        return Err(Error::degenerate(format!("column {i} is identically zero")));
    }

    let mut upper = Vec::with_capacity(m);
    let mut lower = Vec::with_capacity(m);
    let mut clamp_applied = false;
    for j in 0..m {
        let (lo, hi) = u.row_range(j);
        let r = penalty.curvature_range(lo - u.truth[j], hi - u.truth[j]);
        upper.push(r.max);
        lower.push(r.min);
        clamp_applied |= r.clamped;
    }

    let mut l_max = 0.0f64;
    for i in 0..n {
        for t in i..n {
            let s: f64 = (0..m).map(|j| (e[(j, i)] * e[(j, t)]).abs() * upper[j]).sum();
            l_max = l_max.max(s);
        }
    }
    let l_min = (0..n)
        .map(|i| (0..m).map(|j| e[(j, i)] * e[(j, i)] * lower[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    if !(l_min > 0.0) || !l_max.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "curvature bounds out of range (l_min = {l_min}, L_max = {l_max})"
        )));
    }

    let beta_max = 2.0 / (n as f64 * l_max);
    let beta = match step {
        StepSize::Auto => 0.5 * beta_max,
        StepSize::Fixed(b) => {
            if !(b > 0.0 && b < beta_max) {
                return Err(Error::invalid(format!(
                    "step {b} outside certified window (0, {beta_max})"
                )));
            }
            b
        }
    };
    Ok(CurvatureBounds {
        q: contraction_factor(beta, n, l_min, l_max),
        upper,
        lower,
        l_max,
        l_min,
        beta_max,
        beta,
        clamp_applied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Axis;

    fn p(e: f64) -> PowerPenalty {
        PowerPenalty::new(e).unwrap()
    }

    #[test]
    fn values() {
        assert_eq!(p(2.0).value(3.0), 9.0);
        assert_eq!(p(2.0).value(0.0), 0.0);
        // 2^1.0001 = 2 exp(1e-4 ln 2)
        let expected = 2.0 * (1e-4 * std::f64::consts::LN_2).exp();
        assert!((p(1.0001).value(2.0) - expected).abs() < 1e-14);
        assert!((p(1.0001).value(2.0) - 2.000_138_6).abs() < 1e-7);
    }

    #[test]
    fn quadratic_derivatives() {
        let q = PowerPenalty::mse();
        assert_eq!(q.first_derivative(-1.5), -3.0);
        assert_eq!(q.first_derivative(0.0), 0.0);
        for t in [-7.0, 0.0, 1e-9, 3.0] {
            assert_eq!(q.second_derivative(t), 2.0);
        }
    }

    #[test]
    fn three_halves_derivatives() {
        let v = p(1.5);
        assert!((v.first_derivative(4.0) - 3.0).abs() < 1e-12);
        assert!((v.second_derivative(4.0) - 0.375).abs() < 1e-12);
        let h = 1e-6;
        let fd1 = (v.value(4.0 + h) - v.value(4.0 - h)) / (2.0 * h);
        let fd2 = (v.first_derivative(4.0 + h) - v.first_derivative(4.0 - h)) / (2.0 * h);
        assert!((fd1 - 3.0).abs() < 1e-6);
        assert!((fd2 - 0.375).abs() < 1e-6);
    }

    #[test]
    fn core_is_continuous_at_radius() {
        let v = p(1.0001);
        let r = v.core_radius();
        let below = r * (1.0 - 1e-12);
        assert!((v.value(below) - v.value(r)).abs() < 1e-12);
        assert!((v.first_derivative(below) - v.first_derivative(r)).abs() < 1e-9);
        // outside the core the penalty is untouched
        assert_eq!(v.value(0.5), 0.5f64.powf(1.0001));
        assert!(v.second_derivative(0.0).is_finite());
        assert_eq!(v.second_derivative(0.0), v.core_curvature());
    }

    #[test]
    fn cubic_interval_range() {
        let r = p(3.0).curvature_range(1.0, 2.0);
        assert!((r.max - 12.0).abs() < 1e-12);
        assert!((r.min - 6.0).abs() < 1e-12);
        assert!(!r.clamped);
        let r = p(3.0).curvature_range(-2.0, 1.0);
        assert!(r.clamped);
        assert!(r.min > 0.0);
        assert!((r.max - 12.0).abs() < 1e-12);
    }

    #[test]
    fn sub_quadratic_range_uses_core() {
        let v = p(1.5);
        let r = v.curvature_range(-1.0, 2.0);
        assert!(r.clamped);
        assert_eq!(r.max, v.core_curvature());
        assert!((r.min - v.outer_curvature(2.0)).abs() < 1e-15);
        let r = v.curvature_range(1.0, 4.0);
        assert!(!r.clamped);
        assert!((r.max - 0.75).abs() < 1e-12);
        assert!((r.min - 0.375).abs() < 1e-12);
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("p2".parse::<PowerPenalty>().unwrap(), PowerPenalty::mse());
        let v: PowerPenalty = "p1+eps:0.0001".parse().unwrap();
        assert!((v.exponent() - 1.0001).abs() < 1e-15);
        assert_eq!(v.to_string(), "p1.0001");
        assert_eq!(v.to_string().parse::<PowerPenalty>().unwrap(), v);
        assert_eq!("p3".parse::<PowerPenalty>().unwrap().exponent(), 3.0);
        assert!("p1".parse::<PowerPenalty>().is_err());
        assert!("p1+eps:-1".parse::<PowerPenalty>().is_err());
        assert!("l2".parse::<PowerPenalty>().is_err());
    }

    #[test]
    fn quadratic_bounds_identity() {
        let u = AxisEstimateMatrix::from_rows(Axis::X, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[3.0, -1.0])
            .unwrap();
        let cb = curvature_bounds(&PowerPenalty::mse(), &u, StepSize::Auto).unwrap();
        assert_eq!(cb.upper, vec![2.0, 2.0]);
        assert_eq!(cb.lower, vec![2.0, 2.0]);
        assert_eq!(cb.l_max, 2.0);
        assert_eq!(cb.l_min, 2.0);
        assert_eq!(cb.beta_max, 0.5);
        assert_eq!(cb.beta, 0.25);
        assert_eq!(cb.q, 0.0);
        assert!(!cb.clamp_applied);
    }

    #[test]
    fn explicit_step_outside_window_is_rejected() {
        let u = AxisEstimateMatrix::from_rows(Axis::X, &[vec![1.0, 0.0], vec![0.0, 1.0]], &[0.0, 0.0])
            .unwrap();
        let mse = PowerPenalty::mse();
        assert!(curvature_bounds(&mse, &u, StepSize::Fixed(0.5)).is_err());
        assert!(curvature_bounds(&mse, &u, StepSize::Fixed(0.0)).is_err());
        let cb = curvature_bounds(&mse, &u, StepSize::Fixed(0.1)).unwrap();
        assert!((cb.q - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_column_is_degenerate() {
        let u = AxisEstimateMatrix::from_rows(Axis::X, &[vec![1.0, 0.0], vec![2.0, 0.0]], &[0.0, 0.0])
            .unwrap();
        assert!(matches!(
            curvature_bounds(&PowerPenalty::mse(), &u, StepSize::Auto),
            Err(Error::DegenerateInput(_))
        ));
    }
}
