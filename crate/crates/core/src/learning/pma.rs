//! Policy mirror ascent: per state, maximise
//! `⟨u, q(s,·)⟩ + λ H(u) - ‖u - π(s)‖² / (2η)` over the probability simplex.
//!
//! Without entropy the maximiser is the Euclidean projection of
//! `π(s) + η q(s,·)` onto the simplex. With entropy the optimum is interior
//! and is found from the KKT conditions: for a multiplier `ν`, each
//! coordinate solves `λ ln u + u/η = c_a - ν` (strictly increasing in `u`),
//! and `ν` is chosen so the coordinates sum to one.

use std::cmp::Ordering;

use crate::types::{entropy_unchecked, renormalise, Policy, QTable};

/// λ below this is treated as zero.
const LAMBDA_EPS: f64 = 1e-12;
const MAX_OUTER: usize = 200;
const MAX_INNER: usize = 100;

/// Euclidean projection onto the probability simplex (sort-based).
/// Ties are ordered by ascending index.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "projection of an empty vector");
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].partial_cmp(&v[i]).unwrap_or(Ordering::Equal));

    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        cumsum += v[i];
        let candidate = (cumsum - 1.0) / (rank + 1) as f64;
        if v[i] - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    renormalise(&mut out);
    out
}

pub fn pma_objective(u: &[f64], q_row: &[f64], pi_row: &[f64], eta: f64, lambda: f64) -> f64 {
    let linear: f64 = u.iter().zip(q_row).map(|(a, b)| a * b).sum();
    let dist2: f64 = u.iter().zip(pi_row).map(|(a, b)| (a - b) * (a - b)).sum();
    linear + entropy_unchecked(u, lambda) - dist2 / (2.0 * eta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    pub u: Vec<f64>,
    pub converged: bool,
}

/// Maximiser of [`pma_objective`] for one state.
pub fn pma_row(q_row: &[f64], pi_row: &[f64], eta: f64, lambda: f64) -> RowSolution {
    assert_eq!(q_row.len(), pi_row.len());
    if lambda < LAMBDA_EPS {
        let shifted: Vec<f64> = pi_row.iter().zip(q_row).map(|(p, q)| p + eta * q).collect();
        return RowSolution {
            u: project_simplex(&shifted),
            converged: true,
        };
    }
    entropic_row(q_row, pi_row, eta, lambda)
}

/// Solves `λ ln u + u/η = c` for `u > 0`, returned with `ln u`.
fn invert_coordinate(c: f64, eta: f64, lambda: f64) -> (f64, f64) {
    // Newton in y = ln u on the convex increasing g(y) = λy + e^y/η - c,
    // started to the right of the root so iterates decrease monotonically.
    // c/λ always bounds the root from above; ln(ηc) does when ηc ≥ 1, and 0
    // does when ηc ≤ 1. Taking the smallest keeps exp(y) finite.
    let bound = if eta * c >= 1.0 { (eta * c).ln() } else { 0.0 };
    let mut y = (c / lambda).min(bound);
    for _ in 0..MAX_INNER {
        let ey = y.exp();
        let g = lambda * y + ey / eta - c;
        let step = g / (lambda + ey / eta);
        y -= step;
        if step.abs() <= 1e-15 * y.abs().max(1.0) {
            break;
        }
    }
    (y.exp(), y)
}

fn entropic_row(q_row: &[f64], pi_row: &[f64], eta: f64, lambda: f64) -> RowSolution {
    let n = q_row.len();
    let c: Vec<f64> = q_row
        .iter()
        .zip(pi_row)
        .map(|(q, p)| q - lambda + p / eta)
        .collect();
    let phi_uniform = lambda * (1.0 / n as f64).ln() + 1.0 / (n as f64 * eta);
    let c_min = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // S(ν) = Σ u_a(ν) is decreasing; S(lo) >= 1 >= S(hi).
    let (mut lo, mut hi) = (c_min - phi_uniform, c_max - phi_uniform);

    let mut u = vec![1.0 / n as f64; n];
    let mut nu = 0.5 * (lo + hi);
    let mut best_gap = f64::INFINITY;
    let mut best = u.clone();
    let mut converged = false;

    for _ in 0..MAX_OUTER {
        let mut sum = 0.0;
        let mut slope = 0.0;
        for (a, &ca) in c.iter().enumerate() {
            let (ua, _) = invert_coordinate(ca - nu, eta, lambda);
            u[a] = ua;
            sum += ua;
            slope += 1.0 / (lambda / ua + 1.0 / eta);
        }
        let gap = sum - 1.0;
        if gap.abs() < best_gap {
            best_gap = gap.abs();
            best.copy_from_slice(&u);
        }
        if gap.abs() <= 1e-14 {
            converged = true;
            break;
        }
        if gap > 0.0 {
            lo = nu;
        } else {
            hi = nu;
        }
        if hi - lo <= 1e-15 * nu.abs().max(1.0) {
            converged = best_gap <= 1e-10;
            break;
        }
        // Newton step on S(ν) - 1 = 0, kept inside the bracket.
        let newton = nu + gap / slope;
        nu = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    renormalise(&mut best);
    RowSolution {
        u: best,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmaOutcome {
    pub policy: Policy,
    /// States whose entropic solve hit the iteration cap (best iterate kept).
    pub unconverged_rows: usize,
}

/// Applies the mirror-ascent step to every state independently.
pub fn pma_update(q: &QTable, pi: &Policy, eta: f64, lambda: f64) -> PmaOutcome {
    assert!(eta > 0.0 && lambda >= 0.0);
    let mut policy = pi.clone();
    let mut unconverged_rows = 0;
    for s in 0..pi.n_states() {
        let sol = pma_row(q.row(s), pi.row(s), eta, lambda);
        if !sol.converged {
            unconverged_rows += 1;
        }
        policy.set_row(s, &sol.u);
    }
    PmaOutcome {
        policy,
        unconverged_rows,
    }
}
