//! Nonnegativity-constrained convex quadratic minimization:
//! minimize 1/2 w' Q w - b' w over w >= 0.
//!
//! The solver runs projected gradient with Barzilai-Borwein steps and an
//! exact-segment monotone safeguard, interleaved with an active-set polish
//! that solves the reduced linear system on the free set. Initialization is
//! w = 0 and all tie-breaking is by lowest index, so runs are deterministic.
//!
//! KKT structure at the solution: with g = Q w - b, the gradient vanishes on
//! the support (w_i > 0) and is nonnegative where w_i = 0. For the energy
//! quadratic forms this encodes "potential equality on the support,
//! inequality off it", which is what equilibrium measures and balayage need.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Problem statement. `tol_kkt` is relative to `max(1, ||b||_inf)`.
pub struct Nnqp {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub tol_kkt: f64,
    pub max_iter: usize,
}

pub const DEFAULT_TOL_KKT: f64 = 1e-8;

impl Nnqp {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n || b.len() != n {
            return Err(Error::InvalidInput("nnqp dimensions disagree".into()));
        }
        let mut max_abs = 0.0f64;
        let mut max_asym = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                max_abs = max_abs.max(q[(i, j)].abs());
                max_asym = max_asym.max((q[(i, j)] - q[(j, i)]).abs());
            }
            max_abs = max_abs.max(q[(i, i)].abs());
        }
        if max_asym > 1e-10 * max_abs.max(1.0) {
            return Err(Error::InvalidInput("nnqp matrix must be symmetric".into()));
        }
        Ok(Nnqp {
            q,
            b,
            tol_kkt: DEFAULT_TOL_KKT,
            max_iter: 50 * n.max(1),
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_kkt = tol;
        self
    }

    pub fn with_max_iter(mut self, it: usize) -> Self {
        self.max_iter = it;
        self
    }
}

/// Solver output. `w >= 0` exactly (projections clamp to 0.0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NnqpSolution {
    pub w: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Largest diagonal jitter added to a near-singular reduced system
    /// (0 when none was needed).
    pub jitter_used: f64,
    /// Objective after every accepted step; non-increasing.
    pub objective_history: Vec<f64>,
}

/// KKT residual of the iterate: dual feasibility where w = 0,
/// complementarity elsewhere, scaled by max(1, ||b||_inf).
pub fn kkt_residual(w: &DVector<f64>, g: &DVector<f64>, scale: f64) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let term = if w[i] == 0.0 {
            (-g[i]).max(0.0)
        } else {
            (g[i] * w[i]).abs()
        };
        worst = worst.max(term);
    }
    worst / scale
}

/// Fixed-order parallel mat-vec: rows in parallel, each row summed serially,
/// so results are identical for any thread count.
fn matvec(q: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    let n = q.nrows();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                acc += q[(i, j)] * v[j];
            }
            acc
        })
        .collect();
    DVector::from_vec(out)
}

pub fn solve_nnqp(problem: &Nnqp) -> NnqpSolution {
    solve_nnqp_with_factor(problem, None)
}

/// Variant that reuses a pre-computed Cholesky factor of the full matrix for
/// polish steps whose free set is everything (the common equilibrium case).
pub fn solve_nnqp_with_factor(
    problem: &Nnqp,
    full_factor: Option<&Cholesky<f64, Dyn>>,
) -> NnqpSolution {
    let n = problem.b.len();
    let q = &problem.q;
    let b = &problem.b;
    let scale = b.amax().max(1.0);
    let tol = problem.tol_kkt;

    let mut w = DVector::zeros(n);
    let mut g = -b.clone();
    let mut f = 0.0f64;
    let mut history = vec![f];
    let mut jitter_used = 0.0f64;

    let max_diag = (0..n).map(|i| q[(i, i)]).fold(f64::MIN, f64::max);
    let tau0 = if max_diag > 0.0 { 1.0 / max_diag } else { 1.0 };
    let mut tau = tau0;

    let mut iterations = 0usize;
    let mut converged = false;
    let mut stalled = false;

    while iterations < problem.max_iter {
        if kkt_residual(&w, &g, scale) <= tol {
            converged = true;
            break;
        }
        iterations += 1;

        let do_polish = stalled || iterations % 20 == 8;
        if do_polish {
            stalled = false;
            if let Some((w_new, g_new, f_new, jit)) =
                polish(q, b, &w, &g, tol * scale, full_factor)
            {
                if f_new <= f + 1e-12 * (1.0 + f.abs()) {
                    w = w_new;
                    g = g_new;
                    f = f_new;
                    jitter_used = jitter_used.max(jit);
                    history.push(f);
                    continue;
                }
            }
        }

        // Projected Barzilai-Borwein step with exact line search on the
        // segment [w, P(w - tau g)] (feasible by convexity, monotone).
        let mut w_trial = DVector::zeros(n);
        for i in 0..n {
            w_trial[i] = (w[i] - tau * g[i]).max(0.0);
        }
        let s = &w_trial - &w;
        let s_norm2 = s.norm_squared();
        if s_norm2 == 0.0 {
            // No coordinate can move: either optimal or the step length
            // collapsed; force a polish next round.
            stalled = true;
            tau = (tau * 4.0).min(1e10 * tau0);
            continue;
        }
        let y = matvec(q, &s);
        let gs = g.dot(&s);
        let sy = s.dot(&y);
        let theta = if sy > 0.0 {
            (-gs / sy).clamp(0.0, 1.0)
        } else {
            1.0
        };
        if theta == 0.0 {
            stalled = true;
            tau = (tau * 0.25).max(1e-10 * tau0);
            continue;
        }
        f += theta * gs + 0.5 * theta * theta * sy;
        w.axpy(theta, &s, 1.0);
        // Clamp tiny negatives from rounding; weights stay exactly >= 0.
        for i in 0..n {
            if w[i] < 0.0 {
                w[i] = 0.0;
            }
        }
        g.axpy(theta, &y, 1.0);
        history.push(f);

        tau = if sy > 0.0 {
            (s_norm2 / sy).clamp(1e-10 * tau0, 1e10 * tau0)
        } else {
            tau0
        };
    }

    if !converged {
        // One last polish attempt before giving up.
        if let Some((w_new, g_new, f_new, jit)) = polish(q, b, &w, &g, tol * scale, full_factor) {
            if f_new <= f + 1e-12 * (1.0 + f.abs()) {
                w = w_new;
                g = g_new;
                f = f_new;
                jitter_used = jitter_used.max(jit);
                history.push(f);
            }
        }
        converged = kkt_residual(&w, &g, scale) <= tol;
    }

    let residual = kkt_residual(&w, &g, scale);
    NnqpSolution {
        w: w.iter().copied().collect(),
        kkt_residual: residual,
        iterations,
        objective: f,
        converged,
        jitter_used,
        objective_history: history,
    }
}

/// Active-set polish: solve the reduced system on the free set, dropping all
/// blocking coordinates per round, then grow the free set where dual
/// feasibility is violated. The caller accepts the result only if the
/// objective did not increase, which guards the batched updates.
/// Returns (w, g, objective, jitter).
fn polish(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    w0: &DVector<f64>,
    g0: &DVector<f64>,
    tol_abs: f64,
    full_factor: Option<&Cholesky<f64, Dyn>>,
) -> Option<(DVector<f64>, DVector<f64>, f64, f64)> {
    let n = b.len();
    let mut free: Vec<bool> = (0..n).map(|i| w0[i] > 0.0 || g0[i] < 0.0).collect();
    if !free.iter().any(|f| *f) {
        return None;
    }
    let mut jitter_total = 0.0f64;
    let mut last: Option<DVector<f64>> = None;

    for _round in 0..80 {
        let idx: Vec<usize> = (0..n).filter(|i| free[*i]).collect();
        if idx.is_empty() {
            return None;
        }
        let (x, jit) = solve_reduced(q, b, &idx, full_factor)?;
        jitter_total = jitter_total.max(jit);

        if x.iter().any(|v| *v < 0.0) {
            for (k, &i) in idx.iter().enumerate() {
                if x[k] < 0.0 {
                    free[i] = false;
                }
            }
            continue;
        }

        let mut w = DVector::zeros(n);
        for (k, &i) in idx.iter().enumerate() {
            w[i] = x[k];
        }
        let g = matvec(q, &w) - b;
        let mut grew = false;
        for i in 0..n {
            if !free[i] && g[i] < -tol_abs {
                free[i] = true;
                grew = true;
            }
        }
        if grew {
            last = Some(w);
            continue;
        }
        let f = 0.5 * w.dot(&(&g + b)) - b.dot(&w);
        return Some((w, g, f, jitter_total));
    }

    // Round budget exhausted: hand back the last clean iterate, if any.
    last.map(|w| {
        let g = matvec(q, &w) - b;
        let f = 0.5 * w.dot(&(&g + b)) - b.dot(&w);
        (w, g, f, jitter_total)
    })
}

/// Solve Q_FF x = b_F, adding diagonal jitter 1e-12 tr/n (escalating) when
/// the reduced system is numerically singular.
fn solve_reduced(
    q: &DMatrix<f64>,
    b: &DVector<f64>,
    idx: &[usize],
    full_factor: Option<&Cholesky<f64, Dyn>>,
) -> Option<(DVector<f64>, f64)> {
    let m = idx.len();
    if m == b.len() {
        if let Some(factor) = full_factor {
            return Some((factor.solve(b), 0.0));
        }
    }
    let mut sub = DMatrix::zeros(m, m);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            sub[(r, c)] = q[(i, j)];
        }
    }
    let rhs = DVector::from_fn(m, |r, _| b[idx[r]]);
    let trace: f64 = (0..m).map(|k| sub[(k, k)]).sum();
    let mut jitter = 0.0f64;
    for attempt in 0..6 {
        let mut mat = sub.clone();
        if attempt > 0 {
            jitter = 1e-12 * trace / m as f64 * 10f64.powi(attempt - 1);
            for k in 0..m {
                mat[(k, k)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(mat) {
            return Some((chol.solve(&rhs), jitter));
        }
    }
    None
}
