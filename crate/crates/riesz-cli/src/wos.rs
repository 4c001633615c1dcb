//! Walk-on-spheres Monte Carlo estimator for Newtonian (alpha = 2, n = 3)
//! hit probabilities and capacities.
//!
//! This is the independent stochastic oracle the deterministic pipeline is
//! cross-validated against; it lives behind the CLI so the main library stays
//! free of random components. A walk jumps on spheres of radius equal to a
//! certified lower bound of the distance to the target; outside the target's
//! bounding sphere, the classical return/escape split (return probability
//! R0/r, conditioned re-entry on the exterior hitting kernel) keeps the
//! estimator unbiased on the unbounded domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Profile of a rotation-body target, axis = x1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HornProfile {
    /// rho(t) = t^-s.
    Power { s: f64 },
    /// rho(t) = exp(-t^s).
    Exp { s: f64 },
}

impl HornProfile {
    fn rho(&self, t: f64) -> f64 {
        match self {
            HornProfile::Power { s } => (-s * t.ln()).exp(),
            HornProfile::Exp { s } => (-t.powf(*s)).exp(),
        }
    }
}

/// Geometric target of a walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WosTarget {
    Ball { center: [f64; 3], radius: f64 },
    /// Rotation body about the x1 axis, truncated to |x| <= clip_radius.
    Horn {
        profile: HornProfile,
        clip_radius: f64,
    },
}

/// Precomputed geometry for fast certified distance lower bounds.
pub struct PreparedTarget {
    target: WosTarget,
    /// Profile polyline (t, rho) plus a global sag bound, for horns.
    polyline: Vec<(f64, f64)>,
    sag: f64,
    bounding_radius: f64,
    base_disk_radius: f64,
}

impl PreparedTarget {
    pub fn new(target: WosTarget) -> Self {
        match &target {
            WosTarget::Ball { center, radius } => {
                let bound = norm3(center) + radius;
                PreparedTarget {
                    target,
                    polyline: Vec::new(),
                    sag: 0.0,
                    bounding_radius: bound,
                    base_disk_radius: 0.0,
                }
            }
            WosTarget::Horn {
                profile,
                clip_radius,
            } => {
                let r = *clip_radius;
                // March t until the lateral surface exits the clip ball.
                let t_min = match profile {
                    HornProfile::Power { s } if *s > 0.0 => r.powf(-1.0 / s) * 0.5,
                    _ => 1e-9,
                };
                let n_nodes = 6000usize;
                let mut nodes = Vec::with_capacity(2 * n_nodes);
                for i in 0..=n_nodes {
                    let a = i as f64 / n_nodes as f64;
                    nodes.push(t_min * (r / t_min).powf(a));
                    nodes.push(1e-6 + (r - 1e-6) * a);
                }
                nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
                nodes.dedup();
                let polyline: Vec<(f64, f64)> = nodes
                    .into_iter()
                    .map(|t| (t, profile.rho(t).min(2.0 * r)))
                    .collect();
                // Sag: worst chord-to-curve deviation, checked at midpoints.
                let mut sag = 0.0f64;
                for w in polyline.windows(2) {
                    let tm = 0.5 * (w[0].0 + w[1].0);
                    let chord = 0.5 * (w[0].1 + w[1].1);
                    sag = sag.max((profile.rho(tm).min(2.0 * r) - chord).abs());
                }
                let base = match profile {
                    HornProfile::Power { s } if *s > 0.0 => r,
                    _ => 1.0f64.min(r),
                };
                PreparedTarget {
                    target,
                    polyline,
                    sag,
                    bounding_radius: r,
                    base_disk_radius: base,
                }
            }
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        self.bounding_radius
    }

    fn contains(&self, p: &[f64; 3]) -> bool {
        match &self.target {
            WosTarget::Ball { center, radius } => dist3(p, center) <= *radius,
            WosTarget::Horn { profile, clip_radius } => {
                if norm3(p) > *clip_radius {
                    return false;
                }
                let t = p[0];
                if t < 0.0 {
                    return false;
                }
                let r2 = p[1] * p[1] + p[2] * p[2];
                if r2 == 0.0 {
                    return true;
                }
                if t == 0.0 {
                    return match profile {
                        HornProfile::Power { s } if *s > 0.0 => true,
                        _ => r2 <= 1.0,
                    };
                }
                let ln_rho = match profile {
                    HornProfile::Power { s } => -s * t.ln(),
                    HornProfile::Exp { s } => -t.powf(*s),
                };
                0.5 * r2.ln() <= ln_rho
            }
        }
    }

    /// Certified lower bound on the distance from `p` to the target
    /// (0 when inside).
    pub fn distance(&self, p: &[f64; 3]) -> f64 {
        match &self.target {
            WosTarget::Ball { center, radius } => (dist3(p, center) - radius).max(0.0),
            WosTarget::Horn { clip_radius, .. } => {
                if self.contains(p) {
                    return 0.0;
                }
                let d_clip = (norm3(p) - clip_radius).max(0.0);
                let pt = p[0];
                let pr = (p[1] * p[1] + p[2] * p[2]).sqrt();
                // Base face: disk of base_disk_radius in the plane t = 0.
                let d_base = {
                    let dr = (pr - self.base_disk_radius).max(0.0);
                    (pt * pt + dr * dr).sqrt()
                };
                // Lateral sheet: nearest point on the profile polyline in the
                // (t, r) half-plane, minus the chord sag.
                let d_lat = (self.polyline_distance(pt, pr) - self.sag).max(0.0);
                // Distance to the intersection of the body with the clip
                // ball is at least the larger of the two separations.
                d_base.min(d_lat).max(d_clip)
            }
        }
    }

    fn polyline_distance(&self, pt: f64, pr: f64) -> f64 {
        // Coarse scan, then exact segment distances in a refinement window.
        let n = self.polyline.len();
        let stride = (n / 64).max(1);
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        let mut i = 0;
        while i < n {
            let (t, r) = self.polyline[i];
            let d = ((pt - t).powi(2) + (pr - r).powi(2)).sqrt();
            if d < best {
                best = d;
                best_i = i;
            }
            i += stride;
        }
        let lo = best_i.saturating_sub(2 * stride);
        let hi = (best_i + 2 * stride).min(n - 1);
        let mut exact = f64::INFINITY;
        for k in lo..hi {
            let (t0, r0) = self.polyline[k];
            let (t1, r1) = self.polyline[k + 1];
            exact = exact.min(segment_distance(pt, pr, t0, r0, t1, r1));
        }
        // The coarse minimum is itself a valid point distance.
        exact.min(best)
    }
}

fn segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

fn norm3(p: &[f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WosParams {
    pub walks: usize,
    pub eps: f64,
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for WosParams {
    fn default() -> Self {
        WosParams {
            walks: 200_000,
            eps: 1e-7,
            seed: 42,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WosEstimate {
    pub value: f64,
    pub std_error: f64,
    pub hits: u64,
    pub walks: usize,
    /// Walks cut off by the step budget (counted as misses).
    pub truncated: u64,
}

/// Probability that Brownian motion started at `source` ever hits the target.
/// For the Newtonian kernel this equals the mass of the balayage of a unit
/// Dirac at the source onto the target.
pub fn hit_probability(
    target: &PreparedTarget,
    source: [f64; 3],
    params: &WosParams,
) -> WosEstimate {
    let r0 = target.bounding_radius() * (1.0 + 1e-12);
    let results: Vec<(bool, bool)> = (0..params.walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ (i as u64).wrapping_mul(0x9e37));
            walk(target, source, r0, params, &mut rng)
        })
        .collect();
    let hits = results.iter().filter(|(h, _)| *h).count() as u64;
    let truncated = results.iter().filter(|(_, t)| *t).count() as u64;
    let p = hits as f64 / params.walks as f64;
    WosEstimate {
        value: p,
        std_error: (p * (1.0 - p) / params.walks as f64).sqrt(),
        hits,
        walks: params.walks,
        truncated,
    }
}

/// Newtonian capacity via the spherical-mean identity: the average hit
/// probability over a launch sphere of radius R enclosing the target equals
/// capacity / R exactly.
pub fn capacity(target: &PreparedTarget, params: &WosParams) -> WosEstimate {
    let r0 = target.bounding_radius() * (1.0 + 1e-12);
    let r_launch = 2.0 * r0;
    let results: Vec<(bool, bool)> = (0..params.walks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ (i as u64).wrapping_mul(0x9e37));
            let dir = sample_unit(&mut rng);
            let source = [r_launch * dir[0], r_launch * dir[1], r_launch * dir[2]];
            walk(target, source, r0, params, &mut rng)
        })
        .collect();
    let hits = results.iter().filter(|(h, _)| *h).count() as u64;
    let truncated = results.iter().filter(|(_, t)| *t).count() as u64;
    let p = hits as f64 / params.walks as f64;
    let se = (p * (1.0 - p) / params.walks as f64).sqrt();
    WosEstimate {
        value: r_launch * p,
        std_error: r_launch * se,
        hits,
        walks: params.walks,
        truncated,
    }
}

/// One walk: (hit, truncated).
fn walk(
    target: &PreparedTarget,
    mut x: [f64; 3],
    r0: f64,
    params: &WosParams,
    rng: &mut ChaCha8Rng,
) -> (bool, bool) {
    for _ in 0..params.max_steps {
        let d = target.distance(&x);
        if d < params.eps {
            return (true, false);
        }
        let r = norm3(&x);
        if r > r0 {
            // Escape to infinity with probability 1 - r0/r; otherwise
            // re-enter on the bounding sphere with the exterior hitting
            // density.
            if rng.gen::<f64>() > r0 / r {
                return (false, false);
            }
            x = reenter(&x, r, r0, rng);
            continue;
        }
        let dir = sample_unit(rng);
        x[0] += d * dir[0];
        x[1] += d * dir[1];
        x[2] += d * dir[2];
    }
    (false, true)
}

/// Conditioned re-entry point on the sphere |y| = r0 for a walker at radius
/// r > r0: exact inverse-CDF sampling of the exterior hitting density
/// (r^2 - r0^2) / (4 pi r0 |x - y|^3) normalized by r0/r.
fn reenter(x: &[f64; 3], r: f64, r0: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let xi = rng.gen::<f64>();
    let inv_sqrt_u = 2.0 * r0 * xi / (r * r - r0 * r0) + 1.0 / (r + r0);
    let u = inv_sqrt_u.powi(-2);
    let t = ((r * r + r0 * r0 - u) / (2.0 * r * r0)).clamp(-1.0, 1.0);
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    // Orthonormal frame around the radial direction.
    let e3 = [x[0] / r, x[1] / r, x[2] / r];
    let pick = if e3[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let mut e1 = [
        e3[1] * pick[2] - e3[2] * pick[1],
        e3[2] * pick[0] - e3[0] * pick[2],
        e3[0] * pick[1] - e3[1] * pick[0],
    ];
    let n1 = norm3(&e1);
    for c in &mut e1 {
        *c /= n1;
    }
    let e2 = [
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    ];
    let s = (1.0 - t * t).max(0.0).sqrt();
    [
        r0 * (t * e3[0] + s * (phi.cos() * e1[0] + phi.sin() * e2[0])),
        r0 * (t * e3[1] + s * (phi.cos() * e1[1] + phi.sin() * e2[1])),
        r0 * (t * e3[2] + s * (phi.cos() * e1[2] + phi.sin() * e2[2])),
    ]
}

fn sample_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [
            2.0 * rng.gen::<f64>() - 1.0,
            2.0 * rng.gen::<f64>() - 1.0,
            2.0 * rng.gen::<f64>() - 1.0,
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if n2 > 1e-9 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
