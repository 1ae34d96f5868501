//! Projected-gradient minimization of a per-axis fusion objective over the
//! probability simplex, plus an exhaustive lattice oracle for validation.
//!
//! The objective on one axis is
//! `f(α) = Σ_j V(Σ_i α_i û_i^j - u^j)`. Starting from uniform weights the
//! solver iterates `α ← P(α - β ∇f(α))` with the constant step `β` taken from
//! [`curvature_bounds`], which makes every step a descent step.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::AxisEstimateMatrix;
use crate::penalty::{curvature_bounds, ConvexPenalty, StepSize};
use crate::simplex::{project_sorted, CoefficientVector};

/// Iteration floor used when no explicit cap is configured.
pub const MIN_ITERATION_CAP: u64 = 100_000;

/// Largest technology count [`solve_oracle`] accepts.
pub const ORACLE_MAX_TECHNOLOGIES: usize = 5;

/// Fusion objective on one axis.
#[derive(Debug, Clone)]
pub struct AxisObjective<P> {
    u: AxisEstimateMatrix,
    penalty: P,
}

impl<P: ConvexPenalty> AxisObjective<P> {
    pub fn new(u: AxisEstimateMatrix, penalty: P) -> Self {
        AxisObjective { u, penalty }
    }

    pub fn matrix(&self) -> &AxisEstimateMatrix {
        &self.u
    }

    pub fn penalty(&self) -> &P {
        &self.penalty
    }

    pub fn num_technologies(&self) -> usize {
        self.u.num_technologies()
    }

    fn check(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.num_technologies() {
            return Err(Error::invalid(format!(
                "weight vector has {} entries, objective has {} technologies",
                alpha.len(),
                self.num_technologies()
            )));
        }
        Ok(())
    }

    /// Hybrid residuals `Uα - u`.
    pub fn residuals(&self, alpha: &[f64]) -> DVector<f64> {
        &self.u.entries * DVector::from_column_slice(alpha) - &self.u.truth
    }

    fn value_unchecked(&self, alpha: &[f64]) -> f64 {
        self.residuals(alpha).iter().map(|&r| self.penalty.value(r)).sum()
    }

    fn gradient_unchecked(&self, alpha: &[f64]) -> DVector<f64> {
        let d = self.residuals(alpha).map(|r| self.penalty.first_derivative(r));
        self.u.entries.tr_mul(&d)
    }

    pub fn objective(&self, alpha: &CoefficientVector) -> Result<f64> {
        self.objective_at(alpha.as_slice())
    }

    /// Objective at an arbitrary point, feasible or not.
    pub fn objective_at(&self, alpha: &[f64]) -> Result<f64> {
        self.check(alpha)?;
        Ok(self.value_unchecked(alpha))
    }

    /// `∂f/∂α_i = Σ_j û_i^j V'(Σ_t α_t û_t^j - u^j)`.
    pub fn gradient(&self, alpha: &CoefficientVector) -> Result<Vec<f64>> {
        self.gradient_at(alpha.as_slice())
    }

    pub fn gradient_at(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.check(alpha)?;
        Ok(self.gradient_unchecked(alpha).as_slice().to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step: StepSize,
    /// Stop once `‖α^{k+1} - α^k‖₂` drops below this.
    pub tolerance: f64,
    /// Hard iteration cap; `None` means `max(10·k_bound, 100000)`.
    pub max_iter: Option<u64>,
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step: StepSize::Auto,
            tolerance: 1e-10,
            max_iter: None,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    IterateFixed,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub k: u64,
    pub alpha: CoefficientVector,
    pub objective: f64,
}

/// What a solve did. With `record_trace` every iterate is kept, otherwise
/// only the first and last.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub iterates: Vec<TraceEntry>,
    pub beta: f64,
    pub q: f64,
    /// Iterations sufficient for the contraction estimate to reach the
    /// tolerance; `None` when `q` rounds to 1.
    pub k_bound: Option<u64>,
    pub iterations: u64,
    pub stop_reason: StopReason,
    /// The axis had no fingerprints and uniform weights were returned.
    pub no_data: bool,
    pub clamp_applied: bool,
}

impl SolverTrace {
    fn trivial(n: usize, objective: f64, no_data: bool) -> Self {
        SolverTrace {
            iterates: vec![TraceEntry {
                k: 0,
                alpha: CoefficientVector::uniform(n),
                objective,
            }],
            beta: 0.0,
            q: 0.0,
            k_bound: Some(0),
            iterations: 0,
            stop_reason: StopReason::IterateFixed,
            no_data,
            clamp_applied: false,
        }
    }

    pub fn final_objective(&self) -> f64 {
        self.iterates.last().map_or(f64::NAN, |e| e.objective)
    }

    /// `‖α^{k+1} - α^k‖ / ‖α^k - α^{k-1}‖` along recorded consecutive
    /// iterates, for comparing the observed contraction with `q`.
    pub fn step_ratios(&self) -> Vec<f64> {
        let steps: Vec<f64> = self
            .iterates
            .windows(2)
            .filter(|w| w[1].k == w[0].k + 1)
            .map(|w| displacement(w[1].alpha.as_slice(), w[0].alpha.as_slice()))
            .collect();
        steps
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }

    /// Writes `k,f,alpha_1..alpha_N` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let n = self.iterates.first().map_or(0, |e| e.alpha.len());
        let mut header = vec!["k".to_string(), "f".to_string()];
        header.extend((1..=n).map(|i| format!("alpha_{i}")));
        wtr.write_record(&header)?;
        for e in &self.iterates {
            let mut row = vec![e.k.to_string(), e.objective.to_string()];
            row.extend(e.alpha.as_slice().iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `⌈ln(√(1 - 1/N) / ε) / ln(1/q)⌉`, floored at zero.
pub fn iteration_bound(q: f64, n: usize, eps: f64) -> Result<u64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("contraction factor {q} outside (0, 1)")));
    }
    if !(eps > 0.0) || n == 0 {
        return Err(Error::invalid("iteration bound needs eps > 0 and n ≥ 1"));
    }
    let ratio = (1.0 - 1.0 / n as f64).sqrt() / eps;
    if ratio <= 1.0 {
        return Ok(0);
    }
    let k = ratio.ln() / (1.0 / q).ln();
    // absorb last-ulp error in the two logarithms
    Ok((k - 1e-9).ceil().max(0.0) as u64)
}

fn bound_for(q: f64, n: usize, eps: f64) -> Option<u64> {
    if q <= 0.0 {
        Some(0)
    } else {
        iteration_bound(q, n, eps).ok()
    }
}

fn displacement(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Runs the gradient-projection iteration from uniform weights.
pub fn solve_gpm<P: ConvexPenalty>(
    obj: &AxisObjective<P>,
    cfg: &SolverConfig,
) -> Result<(CoefficientVector, SolverTrace)> {
    let n = obj.num_technologies();
    if n == 0 {
        return Err(Error::invalid("objective has no technologies"));
    }
    if !(cfg.tolerance > 0.0) {
        return Err(Error::invalid("solver tolerance must be positive"));
    }
    if obj.u.num_fingerprints() == 0 {
        return Ok((CoefficientVector::uniform(n), SolverTrace::trivial(n, 0.0, true)));
    }
    if n == 1 {
        let f = obj.value_unchecked(&[1.0]);
        return Ok((CoefficientVector::uniform(1), SolverTrace::trivial(1, f, false)));
    }

    let bounds = curvature_bounds(&obj.penalty, &obj.u, cfg.step)?;
    let beta = bounds.beta;
    let k_bound = bound_for(bounds.q, n, cfg.tolerance);
    let max_iter = cfg.max_iter.unwrap_or_else(|| {
        k_bound
            .map_or(MIN_ITERATION_CAP, |k| k.saturating_mul(10))
            .max(MIN_ITERATION_CAP)
    });

    let mut alpha = CoefficientVector::uniform(n);
    let mut f = obj.value_unchecked(alpha.as_slice());
    if !f.is_finite() {
        return Err(Error::NumericalFailure("objective is not finite at the start".into()));
    }
    let mut iterates = vec![TraceEntry {
        k: 0,
        alpha: alpha.clone(),
        objective: f,
    }];
    let mut stop_reason = StopReason::MaxIter;
    let mut k = 0;
    while k < max_iter {
        let g = obj.gradient_unchecked(alpha.as_slice());
        let z: Vec<f64> = alpha.as_slice().iter().zip(g.iter()).map(|(a, gi)| a - beta * gi).collect();
        let next = project_sorted(&z).map_err(|e| match e {
            Error::InvalidInput(m) => Error::NumericalFailure(format!("gradient step: {m}")),
            other => other,
        })?;
        let f_next = obj.value_unchecked(next.as_slice());
        if !f_next.is_finite() {
            return Err(Error::NumericalFailure(format!("objective not finite at iteration {}", k + 1)));
        }
        k += 1;
        let step = displacement(next.as_slice(), alpha.as_slice());
        let fixed = next == alpha;
        alpha = next;
        f = f_next;
        if cfg.record_trace {
            iterates.push(TraceEntry {
                k,
                alpha: alpha.clone(),
                objective: f,
            });
        }
        if fixed {
            stop_reason = StopReason::IterateFixed;
            break;
        }
        if step < cfg.tolerance {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }
    if !cfg.record_trace && k > 0 {
        iterates.push(TraceEntry {
            k,
            alpha: alpha.clone(),
            objective: f,
        });
    }
    let trace = SolverTrace {
        iterates,
        beta,
        q: bounds.q,
        k_bound,
        iterations: k,
        stop_reason,
        no_data: false,
        clamp_applied: bounds.clamp_applied,
    };
    Ok((alpha, trace))
}

/// Best point of the simplex lattice with spacing `resolution`.
///
/// Lattice points are `k / K` with `K = round(1 / resolution)` and integer
/// `k_i ≥ 0`, `Σ k_i = K`. The first `N - 2` coordinates are enumerated
/// exhaustively; along the remaining one-dimensional lattice segment the
/// objective is convex, so its lattice minimizer is located by bisection on
/// forward differences instead of a linear scan. The result is the same
/// point a full scan would return up to ties.
pub fn solve_oracle<P: ConvexPenalty>(obj: &AxisObjective<P>, resolution: f64) -> Result<CoefficientVector> {
    let n = obj.num_technologies();
    if n == 0 {
        return Err(Error::invalid("objective has no technologies"));
    }
    if n > ORACLE_MAX_TECHNOLOGIES {
        return Err(Error::Unsupported(format!(
            "lattice oracle supports at most {ORACLE_MAX_TECHNOLOGIES} technologies, got {n}"
        )));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::invalid("oracle resolution must lie in (0, 1]"));
    }
    if n == 1 {
        return Ok(CoefficientVector::uniform(1));
    }
    let steps = (1.0 / resolution).round().max(1.0) as usize;
    let h = 1.0 / steps as f64;
    let e = &obj.u.entries;
    let m = e.nrows();

    let mut best = (f64::INFINITY, vec![0usize; n]);
    let mut counts = vec![0usize; n];
    // partial = Σ_{i<depth} k_i h û_i - u
    let partial = -obj.u.truth.clone();
    enumerate(obj, &mut counts, 0, steps, h, partial, &mut best, m);
    let w = best.1.iter().map(|&k| k as f64 * h).collect::<Vec<_>>();
    // k_i h sums to K h = 1 up to rounding
    let s: f64 = w.iter().sum();
    let w = w.into_iter().map(|v| v / s).collect();
    CoefficientVector::new(w)
}

#[allow(clippy::too_many_arguments)]
fn enumerate<P: ConvexPenalty>(
    obj: &AxisObjective<P>,
    counts: &mut [usize],
    depth: usize,
    remaining: usize,
    h: f64,
    partial: DVector<f64>,
    best: &mut (f64, Vec<usize>),
    m: usize,
) {
    let n = counts.len();
    let e = &obj.u.entries;
    if depth == n - 2 {
        // residual(k) = partial + k h û_a + (remaining - k) h û_b
        let (a, b) = (n - 2, n - 1);
        let eval = |k: usize| -> f64 {
            let ka = k as f64 * h;
            let kb = (remaining - k) as f64 * h;
            (0..m)
                .map(|j| obj.penalty.value(partial[j] + ka * e[(j, a)] + kb * e[(j, b)]))
                .sum()
        };
        let (mut lo, mut hi) = (0usize, remaining);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if eval(mid + 1) >= eval(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let f = eval(lo);
        if f < best.0 {
            counts[a] = lo;
            counts[b] = remaining - lo;
            best.0 = f;
            best.1.copy_from_slice(counts);
        }
        return;
    }
    for k in 0..=remaining {
        counts[depth] = k;
        let next = &partial + e.column(depth) * (k as f64 * h);
        enumerate(obj, counts, depth + 1, remaining - k, h, next, best, m);
    }
    counts[depth] = 0;
}
