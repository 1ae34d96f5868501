//! Independent reference implementations used only by the tests.
#![allow(dead_code)]

use hybridloc::model::{AxisEstimateMatrix, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Best point of the simplex lattice with spacing `1/steps` for a function
/// that is a convex quadratic along every line `α_{N-1} + α_N = const`.
/// `last_pair(prefix, s)` returns the unconstrained minimizer `a` of the
/// last two coordinates `(a, s - a)`; the lattice optimum is at its floor
/// or ceiling.
fn lattice_search<F, G>(n: usize, steps: usize, mut eval: F, mut last_pair: G) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], f64) -> f64,
{
    let h = 1.0 / steps as f64;
    if n == 1 {
        let a = vec![1.0];
        let f = eval(&a);
        return (a, f);
    }
    let mut best = (Vec::new(), f64::INFINITY);
    let mut counts = vec![0usize; n - 2];
    let mut used = 0;
    let mut a = vec![0.0; n];
    loop {
        let rest = steps - used;
        for (x, &c) in a.iter_mut().zip(&counts) {
            *x = c as f64 * h;
        }
        let s = rest as f64 * h;
        let star = last_pair(&a[..n - 2], s).clamp(0.0, s);
        let lo = (star / h).floor() as usize;
        for k in [lo.min(rest), (lo + 1).min(rest)] {
            a[n - 2] = k as f64 * h;
            a[n - 1] = (rest - k) as f64 * h;
            let f = eval(&a);
            if f < best.1 {
                best = (a.clone(), f);
            }
        }
        // odometer over the first n - 2 coordinates, keeping their sum ≤ steps
        let mut i = 0;
        loop {
            if i == counts.len() {
                return best;
            }
            if used < steps {
                counts[i] += 1;
                used += 1;
                break;
            }
            used -= counts[i];
            counts[i] = 0;
            i += 1;
        }
    }
}

/// Lattice minimizer of `‖α - z‖²`.
pub fn lattice_projection(z: &[f64], steps: usize) -> Vec<f64> {
    let n = z.len();
    lattice_search(
        n,
        steps,
        |a| a.iter().zip(z).map(|(x, y)| (x - y).powi(2)).sum(),
        |_, s| 0.5 * (s + z[n - 2] - z[n - 1]),
    )
    .0
}

/// Lattice minimizer of `Σ_j (Σ_i α_i U_ji - u_j)²` given rows of `U`.
pub fn lattice_least_squares(rows: &[Vec<f64>], truth: &[f64], steps: usize) -> (Vec<f64>, f64) {
    let n = rows[0].len();
    let eval = |a: &[f64]| -> f64 {
        rows.iter()
            .zip(truth)
            .map(|(r, t)| (r.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() - t).powi(2))
            .sum()
    };
    lattice_search(n, steps, eval, |prefix, s| {
        // residual = base + a d with a the weight of column n-2
        let mut num = 0.0;
        let mut den = 0.0;
        for (r, t) in rows.iter().zip(truth) {
            let base: f64 = prefix.iter().zip(r).map(|(x, y)| x * y).sum::<f64>() + s * r[n - 1] - t;
            let d = r[n - 2] - r[n - 1];
            num += base * d;
            den += d * d;
        }
        if den == 0.0 {
            0.0
        } else {
            -num / den
        }
    })
}

/// Numerical rank by modified Gram-Schmidt on the columns.
pub fn gram_rank(columns: &[Vec<f64>], tol: f64) -> usize {
    let scale = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in columns {
        let mut v = c.clone();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > tol * scale {
            basis.push(v.iter().map(|x| x / nv).collect());
        }
    }
    basis.len()
}

/// Standard normal draw from the documented generator: ChaCha8 keyed by
/// `seed` on `stream`, two 53-bit uniforms, Box-Muller cosine branch.
pub fn reference_normal(seed: u64, stream: u64) -> f64 {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    g.set_stream(stream);
    let u1 = (g.next_u64() >> 11) as f64 / 9007199254740992.0;
    let u2 = (g.next_u64() >> 11) as f64 / 9007199254740992.0;
    (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random instance with truths in `[0, 1]` and estimates scattered around
/// them by technology-specific bias and noise.
pub fn random_instance<R: Rng>(r: &mut R, m: usize, n: usize) -> AxisEstimateMatrix {
    let truth: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
    let bias: Vec<f64> = (0..n).map(|_| r.random_range(-0.3..0.3)).collect();
    let noise: Vec<f64> = (0..n).map(|_| r.random_range(0.02..0.4)).collect();
    let rows: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| (0..n).map(|i| t + bias[i] + noise[i] * r.random_range(-1.0..1.0)).collect())
        .collect();
    AxisEstimateMatrix::from_rows(Axis::X, &rows, &truth).unwrap()
}

pub fn rows_of(u: &AxisEstimateMatrix) -> Vec<Vec<f64>> {
    (0..u.num_fingerprints())
        .map(|j| u.entries.row(j).iter().copied().collect())
        .collect()
}
