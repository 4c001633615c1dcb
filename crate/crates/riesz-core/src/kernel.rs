//! Riesz kernel evaluation, regularization, potentials, Gram matrices, and
//! energy inner products: the quadratic-form substrate for equilibrium and
//! balayage solves.
//!
//! The singular diagonal is mollified by distance capping,
//! `k_delta(x, y) = max(|x - y|, delta)^(alpha - n)`, which leaves
//! off-support evaluations exact and caps an atom's self-interaction at the
//! surface value of a charged sphere of its cell radius. Positive
//! definiteness of the capped form is not assumed; every assembled Gram
//! matrix carries an eigenvalue monitor and assembly fails if it trips.

use crate::error::{Error, Result};
use crate::geometry::{Point, PointCloud};
use crate::measure::DiscreteMeasure;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Kernel order parameters: dimension n >= 2 and order alpha in (0, 2],
/// alpha < n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszParams {
    pub n: usize,
    pub alpha: f64,
}

impl RieszParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("n must be >= 2, got {n}")));
        }
        if !(alpha > 0.0 && alpha <= 2.0 && alpha < n as f64) {
            return Err(Error::InvalidInput(format!(
                "alpha must satisfy 0 < alpha <= 2 and alpha < n, got {alpha} (n = {n})"
            )));
        }
        Ok(RieszParams { n, alpha })
    }

    /// Newtonian case in R^3.
    pub fn newtonian() -> Self {
        RieszParams { n: 3, alpha: 2.0 }
    }

    /// The kernel exponent alpha - n (negative).
    pub fn exponent(&self) -> f64 {
        self.alpha - self.n as f64
    }
}

/// `|x - y|^(alpha - n)`. Rejects coincident points (infinite value).
pub fn kernel_eval(params: &RieszParams, x: &Point, y: &Point) -> Result<f64> {
    let d = x.dist(y);
    if d == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(d.powf(params.exponent()))
}

/// `max(|x - y|, delta)^(alpha - n)`; coincides with the exact kernel for
/// |x - y| >= delta.
pub fn regularized_kernel(params: &RieszParams, x: &Point, y: &Point, delta: f64) -> f64 {
    x.dist(y).max(delta).powf(params.exponent())
}

fn kernel_of_dist(params: &RieszParams, d: f64, delta: f64) -> f64 {
    d.max(delta).powf(params.exponent())
}

/// Regularized potential of a discrete measure at a point: each atom is
/// capped at its own cell radius.
pub fn potential(mu: &DiscreteMeasure, p: &Point, params: &RieszParams) -> f64 {
    mu.cloud
        .points
        .iter()
        .zip(&mu.cloud.cell_radii)
        .zip(&mu.weights)
        .map(|((x, d), w)| w * kernel_of_dist(params, p.dist(x), *d))
        .sum()
}

/// Exact (unregularized) potential. Atoms coinciding with `p` make it +inf;
/// callers evaluate off the support.
pub fn potential_exact(mu: &DiscreteMeasure, p: &Point, params: &RieszParams) -> f64 {
    mu.cloud
        .points
        .iter()
        .zip(&mu.weights)
        .map(|(x, w)| {
            let d = p.dist(x);
            if d == 0.0 && *w == 0.0 {
                0.0
            } else {
                w * d.powf(params.exponent())
            }
        })
        .sum()
}

/// Potential field over a probe cloud. Probes evaluate in parallel; each
/// probe's atom sum keeps a fixed (index) order, so results do not depend on
/// the thread count.
#[derive(Debug, Clone)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub probes: PointCloud,
    pub source: DiscreteMeasure,
}

pub fn potential_batch(
    mu: &DiscreteMeasure,
    probes: &PointCloud,
    params: &RieszParams,
) -> PotentialField {
    let values: Vec<f64> = probes
        .points
        .par_iter()
        .map(|p| potential(mu, p, params))
        .collect();
    PotentialField {
        values,
        probes: probes.clone(),
        source: mu.clone(),
    }
}

/// Regularized mutual energy: sum over atom pairs with the cap at the mean of
/// the two cell radii. Symmetric; includes the (capped) diagonal when the two
/// measures share atoms.
pub fn energy(mu: &DiscreteMeasure, nu: &DiscreteMeasure, params: &RieszParams) -> f64 {
    let mut total = 0.0;
    for ((x, dx), wx) in mu
        .cloud
        .points
        .iter()
        .zip(&mu.cloud.cell_radii)
        .zip(&mu.weights)
    {
        let mut row = 0.0;
        for ((y, dy), wy) in nu
            .cloud
            .points
            .iter()
            .zip(&nu.cloud.cell_radii)
            .zip(&nu.weights)
        {
            row += wy * kernel_of_dist(params, x.dist(y), 0.5 * (dx + dy));
        }
        total += wx * row;
    }
    total
}

/// Exact mutual energy on pairwise-distinct atoms; coincident pairs (the
/// diagonal of a self-energy) are skipped because a point atom's exact
/// self-energy is infinite.
pub fn energy_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, params: &RieszParams) -> f64 {
    let mut total = 0.0;
    for (x, wx) in mu.cloud.points.iter().zip(&mu.weights) {
        let mut row = 0.0;
        for (y, wy) in nu.cloud.points.iter().zip(&nu.weights) {
            let d = x.dist(y);
            if d > 0.0 {
                row += wy * d.powf(params.exponent());
            }
        }
        total += wx * row;
    }
    total
}

/// Regularized kernel matrix of a point cloud, with the near-positive-
/// definiteness monitor evaluated at assembly.
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub cloud: PointCloud,
    pub params: RieszParams,
    /// Smallest-eigenvalue estimate (inverse iteration when the factorization
    /// succeeds; otherwise a certified lower bound just above the rejection
    /// threshold).
    pub lambda_min_est: f64,
    /// Largest-eigenvalue estimate (power iteration).
    pub lambda_max_est: f64,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Solve G x = b with the assembly-time factorization, if it exists.
    pub fn solve_full(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        self.chol.as_ref().map(|c| c.solve(b))
    }

    /// The assembly-time Cholesky factor (absent only when the matrix passed
    /// the monitor merely as near-positive-definite).
    pub fn factor(&self) -> Option<&Cholesky<f64, Dyn>> {
        self.chol.as_ref()
    }

    /// Content hash of (cloud, params, regularization policy), hex-encoded.
    pub fn content_hash(cloud: &PointCloud, params: &RieszParams) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"riesz-gram-capmean-v1");
        hasher.update(params.n.to_le_bytes());
        hasher.update(params.alpha.to_le_bytes());
        for (p, d) in cloud.points.iter().zip(&cloud.cell_radii) {
            for c in &p.coords {
                hasher.update(c.to_le_bytes());
            }
            hasher.update(d.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Binary cache dump: hash-keyed, bit-exact entries. Purely an
    /// optimization; a cache miss or mismatch recomputes.
    pub fn save_cache(&self, path: &std::path::Path) -> Result<()> {
        let hash = Self::content_hash(&self.cloud, &self.params);
        let n = self.size();
        let mut bytes = Vec::with_capacity(16 + 64 + 8 * n * n);
        bytes.extend_from_slice(b"RGRAM1\0\0");
        bytes.extend_from_slice(hash.as_bytes());
        bytes.extend_from_slice(&(n as u64).to_le_bytes());
        bytes.extend_from_slice(&self.lambda_min_est.to_le_bytes());
        bytes.extend_from_slice(&self.lambda_max_est.to_le_bytes());
        for j in 0..n {
            for i in 0..n {
                bytes.extend_from_slice(&self.entries[(i, j)].to_le_bytes());
            }
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }

    /// Load a cached Gram for exactly this (cloud, params); `Ok(None)` on any
    /// mismatch so the caller recomputes.
    pub fn load_cache(
        path: &std::path::Path,
        cloud: &PointCloud,
        params: &RieszParams,
    ) -> Result<Option<GramMatrix>> {
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(_) => return Ok(None),
        };
        if bytes.len() < 8 + 64 + 8 + 16 || &bytes[..8] != b"RGRAM1\0\0" {
            return Ok(None);
        }
        let hash = String::from_utf8_lossy(&bytes[8..72]).to_string();
        if hash != Self::content_hash(cloud, params) {
            return Ok(None);
        }
        let n = u64::from_le_bytes(bytes[72..80].try_into().unwrap()) as usize;
        if n != cloud.len() || bytes.len() != 96 + 8 * n * n {
            return Ok(None);
        }
        let lambda_min = f64::from_le_bytes(bytes[80..88].try_into().unwrap());
        let lambda_max = f64::from_le_bytes(bytes[88..96].try_into().unwrap());
        let mut entries = DMatrix::zeros(n, n);
        let mut off = 96;
        for j in 0..n {
            for i in 0..n {
                entries[(i, j)] = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
                off += 8;
            }
        }
        let chol = Cholesky::new(entries.clone());
        Ok(Some(GramMatrix {
            entries,
            cloud: cloud.clone(),
            params: *params,
            lambda_min_est: lambda_min,
            lambda_max_est: lambda_max,
            chol,
        }))
    }
}

/// Assemble the regularized Gram matrix of a cloud. Entry (i, j) caps at the
/// mean of the two cell radii; the diagonal is `delta_i^(alpha - n)`.
/// Rows assemble in parallel with entries computed independently, so the
/// result is identical for any thread count. Duplicate points are rejected.
pub fn gram(cloud: &PointCloud, params: &RieszParams) -> Result<GramMatrix> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty cloud has no gram matrix".into()));
    }
    if cloud.dim() != params.n {
        return Err(Error::DimensionMismatch {
            expected: params.n,
            got: cloud.dim(),
        });
    }

    let mut data = vec![0.0f64; n * n];
    let points = &cloud.points;
    let radii = &cloud.cell_radii;
    let exponent = params.exponent();
    let dup = std::sync::Mutex::new(None::<(usize, usize)>);
    data.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            if i == j {
                *slot = radii[i].powf(exponent);
            } else {
                let d = points[i].dist(&points[j]);
                if d == 0.0 {
                    let mut guard = dup.lock().unwrap();
                    if guard.is_none() {
                        *guard = Some((i.min(j), i.max(j)));
                    }
                }
                *slot = d.max(0.5 * (radii[i] + radii[j])).powf(exponent);
            }
        }
    });
    if let Some((i, j)) = dup.into_inner().unwrap() {
        return Err(Error::DuplicatePoints(i, j));
    }

    // Row-major data of a symmetric matrix doubles as column-major storage.
    let entries = DMatrix::from_vec(n, n, data);

    let lambda_max = power_iteration(&entries);
    let chol = Cholesky::new(entries.clone());
    let (lambda_min, chol) = match chol {
        Some(c) => (inverse_iteration(&entries, &c), Some(c)),
        None => {
            // Not PD. Certify the monitor bound with a shifted factorization:
            // success of G + eps I means lambda_min > -eps.
            let eps = 0.99e-10 * lambda_max;
            let shifted = {
                let mut m = entries.clone();
                for i in 0..n {
                    m[(i, i)] += eps;
                }
                Cholesky::new(m)
            };
            match shifted {
                Some(_) => (-eps, None),
                None => {
                    return Err(Error::IndefiniteGram(format!(
                        "smallest eigenvalue below -1e-10 * lambda_max (lambda_max ~ {lambda_max:.3e})"
                    )))
                }
            }
        }
    };

    Ok(GramMatrix {
        entries,
        cloud: cloud.clone(),
        params: *params,
        lambda_min_est: lambda_min,
        lambda_max_est: lambda_max,
        chol,
    })
}

fn start_vector(n: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.7).sin());
    v.normalize_mut();
    v
}

fn power_iteration(m: &DMatrix<f64>) -> f64 {
    let mut v = start_vector(m.nrows());
    let mut lambda = 0.0;
    for _ in 0..20 {
        let w = m * &v;
        lambda = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / norm;
    }
    lambda.abs()
}

fn inverse_iteration(m: &DMatrix<f64>, chol: &Cholesky<f64, Dyn>) -> f64 {
    let mut v = start_vector(m.nrows());
    for _ in 0..60 {
        let w = chol.solve(&v);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
    }
    v.dot(&(m * &v))
}
