//! Inner balayage of a discrete measure onto a compact target: discretize the
//! target, project onto the nonnegative cone in the energy norm, and verify
//! the structural identities (on-set potential equality, global domination,
//! mass never created). Exhaustion drives nested truncations K growing toward
//! an unbounded set and tracks mass ratios and pointwise potential
//! monotonicity.

use crate::error::{Error, Result};
use crate::geometry::{self, Point, PointCloud, Region, SampleMode};
use crate::kernel::{self, gram, RieszParams};
use crate::measure::DiscreteMeasure;
use crate::nnqp::{self, Nnqp, NnqpSolution};
use crate::rng::SplitMix64;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sampling and tolerance knobs shared by sweep-family operations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub resolution: usize,
    pub seed: u64,
    pub tol_kkt: f64,
    /// Relative slack allowed on the swept-mass bound.
    pub tol_mass: f64,
    /// Sampling mode override; default is surface for alpha = 2, volume
    /// otherwise.
    pub mode: Option<SampleMode>,
    /// Number of off-region probes for the domination statistics.
    pub domination_probes: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            resolution: 1000,
            seed: 42,
            tol_kkt: nnqp::DEFAULT_TOL_KKT,
            tol_mass: 1e-6,
            mode: None,
            domination_probes: 200,
        }
    }
}

pub fn default_mode(params: &RieszParams) -> SampleMode {
    if params.alpha == 2.0 {
        SampleMode::Surface
    } else {
        SampleMode::Volume
    }
}

/// Compact summary of an NNQP run, carried in results and reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverMeta {
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub jitter_used: f64,
    pub objective: f64,
}

impl From<&NnqpSolution> for SolverMeta {
    fn from(s: &NnqpSolution) -> Self {
        SolverMeta {
            iterations: s.iterations,
            kkt_residual: s.kkt_residual,
            converged: s.converged,
            jitter_used: s.jitter_used,
            objective: s.objective,
        }
    }
}

/// Gap statistics over a probe or grid set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GapStats {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Max of |gap| relative to the local reference value.
    pub max_rel: f64,
}

impl GapStats {
    pub(crate) fn from_gaps(gaps: &[f64], refs: &[f64]) -> GapStats {
        if gaps.is_empty() {
            return GapStats::default();
        }
        let mut max_abs = 0.0f64;
        let mut sum = 0.0f64;
        let mut max_rel = 0.0f64;
        for (g, r) in gaps.iter().zip(refs) {
            let a = g.abs();
            max_abs = max_abs.max(a);
            sum += a;
            max_rel = max_rel.max(a / r.abs().max(1e-300));
        }
        GapStats {
            max_abs,
            mean_abs: sum / gaps.len() as f64,
            max_rel,
        }
    }
}

/// Output of one sweep: the discrete swept measure plus the diagnostics the
/// structural identities are judged by.
#[derive(Debug, Clone)]
pub struct BalayageResult {
    pub swept: DiscreteMeasure,
    pub source_mass: f64,
    pub swept_mass: f64,
    /// kappa(swept) - kappa(source) over the whole target grid. Inactive
    /// nodes may carry positive slack (the projection's >= side); active
    /// nodes match at solver precision.
    pub on_set_match: GapStats,
    /// kappa(swept) - kappa(source) over the support (active set) only.
    pub on_support_match: GapStats,
    /// max(kappa(swept) - kappa(source), 0) over off-region probes.
    pub off_set_domination: GapStats,
    pub solver: SolverMeta,
    pub scale: f64,
    /// swept_mass <= source_mass (1 + tol_mass)?
    pub mass_bound_ok: bool,
}

impl BalayageResult {
    pub fn mass_ratio(&self) -> f64 {
        if self.source_mass > 0.0 {
            self.swept_mass / self.source_mass
        } else {
            0.0
        }
    }
}

/// Sweep a finitely supported measure onto a bounded target region.
pub fn sweep(
    sigma: &DiscreteMeasure,
    target: &Region,
    params: &RieszParams,
    cfg: &SweepConfig,
) -> Result<BalayageResult> {
    let mode = cfg.mode.unwrap_or_else(|| default_mode(params));
    let cloud = geometry::sample(target, cfg.resolution, mode, cfg.seed)?;
    sweep_onto_cloud(sigma, &cloud, Some(target), params, cfg)
}

/// Core sweep worker on a pre-built target cloud. `region`, when given, is
/// used only for placing off-region domination probes.
pub fn sweep_onto_cloud(
    sigma: &DiscreteMeasure,
    cloud: &PointCloud,
    region: Option<&Region>,
    params: &RieszParams,
    cfg: &SweepConfig,
) -> Result<BalayageResult> {
    let source_mass = sigma.total_mass();
    if cloud.is_empty() {
        return Ok(BalayageResult {
            swept: DiscreteMeasure::empty(cloud.tag),
            source_mass,
            swept_mass: 0.0,
            on_set_match: GapStats::default(),
            on_support_match: GapStats::default(),
            off_set_domination: GapStats::default(),
            solver: SolverMeta {
                iterations: 0,
                kkt_residual: 0.0,
                converged: true,
                jitter_used: 0.0,
                objective: 0.0,
            },
            scale: 1.0,
            mass_bound_ok: true,
        });
    }

    let g = gram(cloud, params)?;
    let b_vals: Vec<f64> = cloud
        .points
        .par_iter()
        .map(|p| kernel::potential(sigma, p, params))
        .collect();
    let b = DVector::from_vec(b_vals);
    let scale = b.amax().max(1.0);

    let problem = Nnqp {
        q: g.entries.clone(),
        b: b.clone(),
        tol_kkt: cfg.tol_kkt,
        max_iter: 50 * cloud.len(),
    };
    let sol = nnqp::solve_nnqp_with_factor(&problem, g.factor());

    let w = DVector::from_vec(sol.w.clone());
    let swept = DiscreteMeasure::new(cloud.clone(), sol.w.clone())?;
    let swept_mass = swept.total_mass();

    // On-set gap = Q w - b at the grid, i.e. the potential mismatch.
    let grid_gap = &g.entries * &w - &b;
    let gaps: Vec<f64> = grid_gap.iter().copied().collect();
    let refs: Vec<f64> = b.iter().copied().collect();
    let on_set_match = GapStats::from_gaps(&gaps, &refs);
    let (sup_gaps, sup_refs): (Vec<f64>, Vec<f64>) = gaps
        .iter()
        .zip(&refs)
        .zip(&sol.w)
        .filter(|(_, w)| **w > 0.0)
        .map(|((g, r), _)| (*g, *r))
        .unzip();
    let on_support_match = GapStats::from_gaps(&sup_gaps, &sup_refs);

    // Domination probes outside the region, away from all atoms.
    let probes = off_region_probes(cloud, region, sigma, cfg.domination_probes, cfg.seed ^ 0x0ff);
    let mut dom_gaps = Vec::with_capacity(probes.len());
    let mut dom_refs = Vec::with_capacity(probes.len());
    for p in &probes {
        let src = kernel::potential(sigma, p, params);
        let swp = kernel::potential(&swept, p, params);
        dom_gaps.push((swp - src).max(0.0));
        dom_refs.push(src);
    }
    let off_set_domination = GapStats::from_gaps(&dom_gaps, &dom_refs);

    let mass_bound_ok = swept_mass <= source_mass * (1.0 + cfg.tol_mass);

    Ok(BalayageResult {
        swept,
        source_mass,
        swept_mass,
        on_set_match,
        on_support_match,
        off_set_domination,
        solver: SolverMeta::from(&sol),
        scale,
        mass_bound_ok,
    })
}

/// Deterministic probes outside the target: points on concentric shells
/// around the cloud, at least 2 cell radii away from every atom.
fn off_region_probes(
    cloud: &PointCloud,
    region: Option<&Region>,
    sigma: &DiscreteMeasure,
    count: usize,
    seed: u64,
) -> Vec<Point> {
    if cloud.is_empty() {
        return Vec::new();
    }
    let n = cloud.dim();
    let center = {
        let mut c = vec![0.0; n];
        for p in &cloud.points {
            for (k, v) in p.coords.iter().enumerate() {
                c[k] += v / cloud.len() as f64;
            }
        }
        Point::new(c)
    };
    let r_max = cloud
        .points
        .iter()
        .map(|p| p.dist(&center))
        .fold(0.0f64, f64::max)
        .max(1e-12);

    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 80 * count {
        attempts += 1;
        let dir = rng.unit_vector(n);
        let radius = r_max * (1.05 + 3.0 * rng.next_f64());
        let p = Point::new(
            center
                .coords
                .iter()
                .zip(&dir)
                .map(|(c, d)| c + radius * d)
                .collect(),
        );
        if let Some(reg) = region {
            if geometry::contains_fast(reg, &p) {
                continue;
            }
        }
        let clear = cloud
            .points
            .iter()
            .zip(&cloud.cell_radii)
            .all(|(q, d)| p.dist(q) >= 2.0 * d)
            && sigma
                .cloud
                .points
                .iter()
                .zip(&sigma.cloud.cell_radii)
                .all(|(q, d)| p.dist(q) >= 2.0 * d);
        if clear {
            out.push(p);
        }
    }
    out
}

/// Projection idempotence harness: sweep, then sweep the swept measure onto
/// the same cloud; the weights must agree within 10 tol scale.
#[derive(Debug, Clone)]
pub struct IdempotenceReport {
    pub gap: f64,
    pub tol: f64,
    pub first: BalayageResult,
    pub second: BalayageResult,
}

pub fn sweep_idempotence_check(
    sigma: &DiscreteMeasure,
    target: &Region,
    params: &RieszParams,
    cfg: &SweepConfig,
) -> Result<IdempotenceReport> {
    let mode = cfg.mode.unwrap_or_else(|| default_mode(params));
    let cloud = geometry::sample(target, cfg.resolution, mode, cfg.seed)?;
    let first = sweep_onto_cloud(sigma, &cloud, Some(target), params, cfg)?;
    let second = sweep_onto_cloud(&first.swept, &cloud, Some(target), params, cfg)?;
    let gap = first
        .swept
        .weights
        .iter()
        .zip(&second.swept.weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let tol = 10.0 * cfg.tol_kkt * first.scale.max(second.scale);
    Ok(IdempotenceReport {
        gap,
        tol,
        first,
        second,
    })
}

/// Symmetry of the sweep in the energy pairing:
/// kappa(mu^A, nu) vs kappa(nu^A, mu) on a shared target cloud.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

pub fn symmetry_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    target: &Region,
    params: &RieszParams,
    cfg: &SweepConfig,
) -> Result<SymmetryReport> {
    let mode = cfg.mode.unwrap_or_else(|| default_mode(params));
    // Each side discretizes the target independently; on a shared cloud the
    // two sides coincide by the algebra of the shared quadratic form and the
    // comparison would not measure discretization error at all. Deriving the
    // cloud seed from the measure content keeps equal measures on equal
    // clouds, so the mu = nu case stays exactly symmetric.
    let cloud_mu = geometry::sample(target, cfg.resolution, mode, cfg.seed ^ measure_tag(mu))?;
    let cloud_nu = geometry::sample(target, cfg.resolution, mode, cfg.seed ^ measure_tag(nu))?;
    let mu_swept = sweep_onto_cloud(mu, &cloud_mu, Some(target), params, cfg)?;
    let nu_swept = sweep_onto_cloud(nu, &cloud_nu, Some(target), params, cfg)?;
    let lhs = kernel::energy(&mu_swept.swept, nu, params);
    let rhs = kernel::energy(&nu_swept.swept, mu, params);
    Ok(SymmetryReport {
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

/// Content fingerprint of a measure, for deterministic per-measure seeds.
fn measure_tag(mu: &DiscreteMeasure) -> u64 {
    let mut acc = mu.len() as u64;
    for ((p, d), w) in mu
        .cloud
        .points
        .iter()
        .zip(&mu.cloud.cell_radii)
        .zip(&mu.weights)
    {
        for c in &p.coords {
            acc = acc.rotate_left(7) ^ c.to_bits();
        }
        acc = acc.rotate_left(7) ^ d.to_bits() ^ w.to_bits().rotate_left(17);
    }
    SplitMix64::new(acc ^ 0x7a6).next_u64()
}

/// Trace of sweeps onto a nested family of truncations K_1 c K_2 c ... c A.
#[derive(Debug, Clone)]
pub struct ExhaustionTrace {
    pub truncation_radii: Vec<f64>,
    pub results: Vec<BalayageResult>,
    pub mass_ratios: Vec<f64>,
    /// Fixed probe set shared by all stages.
    pub probes: Vec<Point>,
    /// Potentials of the stage sweeps at the fixed probes.
    pub stage_probe_potentials: Vec<Vec<f64>>,
    /// Max pointwise potential decrease between consecutive stages (>= 0;
    /// exact monotone growth gives 0).
    pub potential_monotonicity: f64,
    pub flagged_nonconverged: bool,
}

impl ExhaustionTrace {
    pub fn final_ratio(&self) -> f64 {
        *self.mass_ratios.last().unwrap_or(&0.0)
    }

    pub fn final_increment(&self) -> f64 {
        let k = self.mass_ratios.len();
        if k < 2 {
            return f64::NAN;
        }
        self.mass_ratios[k - 1] - self.mass_ratios[k - 2]
    }

    /// CSV export: `R,sweptMass,massRatio,maxOnSetGap,offSetSlack,converged`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("R,sweptMass,massRatio,maxOnSetGap,offSetSlack,converged\n");
        for (k, res) in self.results.iter().enumerate() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                self.truncation_radii[k],
                res.swept_mass,
                self.mass_ratios[k],
                res.on_set_match.max_abs,
                res.off_set_domination.max_abs,
                res.solver.converged
            ));
        }
        out
    }
}

/// Build the nested truncation clouds of `family` at the given radii: each
/// stage is the previous one plus a sampled annular shell, so stages share
/// points exactly and monotonicity comparisons compare like with like.
pub fn nested_truncation_clouds(
    family: &Region,
    radii: &[f64],
    per_shell: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    let n = family.dim()?;
    let origin = Point::new(vec![0.0; n]);
    let mut clouds: Vec<PointCloud> = Vec::with_capacity(radii.len());
    let mut r_prev = 0.0;
    for (k, &r) in radii.iter().enumerate() {
        let shell = Region::AnnulusClip {
            inner: Box::new(family.clone()),
            center: origin.clone(),
            r_lo: r_prev,
            r_hi: r,
        };
        let shell_cloud = geometry::sample(&shell, per_shell, mode, seed.wrapping_add(k as u64))?;
        let cloud = match clouds.last() {
            Some(prev) => prev.union_deduped(&shell_cloud),
            None => shell_cloud,
        };
        clouds.push(cloud);
        r_prev = r;
    }
    Ok(clouds)
}

/// Sweep a fixed source onto growing truncations of an unbounded family.
/// `cfg.resolution` is the per-shell sample budget.
pub fn exhaustion_sweep(
    sigma: &DiscreteMeasure,
    family: &Region,
    radii: &[f64],
    params: &RieszParams,
    cfg: &SweepConfig,
) -> Result<ExhaustionTrace> {
    if radii.len() < 2 {
        return Err(Error::InvalidInput(
            "exhaustion needs at least two truncation radii".into(),
        ));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "truncation radii must be strictly increasing".into(),
        ));
    }
    let mode = cfg.mode.unwrap_or_else(|| default_mode(params));
    let clouds = nested_truncation_clouds(family, radii, cfg.resolution, mode, cfg.seed)?;

    let probes = exhaustion_probes(&clouds, sigma, radii, params.n, cfg.seed ^ 0xabc);

    let n = family.dim()?;
    let origin = Point::new(vec![0.0; n]);
    let mut results = Vec::with_capacity(radii.len());
    let mut stage_pots = Vec::with_capacity(radii.len());
    for (k, cloud) in clouds.iter().enumerate() {
        let trunc = Region::AnnulusClip {
            inner: Box::new(family.clone()),
            center: origin.clone(),
            r_lo: 0.0,
            r_hi: radii[k],
        };
        let res = sweep_onto_cloud(sigma, cloud, Some(&trunc), params, cfg)?;
        let pots: Vec<f64> = probes
            .par_iter()
            .map(|p| kernel::potential(&res.swept, p, params))
            .collect();
        stage_pots.push(pots);
        results.push(res);
    }

    let source_mass = sigma.total_mass();
    let mass_ratios: Vec<f64> = results
        .iter()
        .map(|r| {
            if source_mass > 0.0 {
                r.swept_mass / source_mass
            } else {
                0.0
            }
        })
        .collect();
    let mut worst_drop = 0.0f64;
    for w in stage_pots.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            worst_drop = worst_drop.max(a - b);
        }
    }
    let flagged = results.iter().any(|r| !r.solver.converged);

    Ok(ExhaustionTrace {
        truncation_radii: radii.to_vec(),
        results,
        mass_ratios,
        probes,
        stage_probe_potentials: stage_pots,
        potential_monotonicity: worst_drop,
        flagged_nonconverged: flagged,
    })
}

/// Fixed probes for exhaustion monotonicity: concentric shells spanning the
/// truncation range, kept clear of every stage atom by two cell radii.
fn exhaustion_probes(
    clouds: &[PointCloud],
    sigma: &DiscreteMeasure,
    radii: &[f64],
    n: usize,
    seed: u64,
) -> Vec<Point> {
    let r_last = *radii.last().unwrap();
    let r_first = radii[0];
    let mut rng = SplitMix64::new(seed);
    let shells = [
        0.15 * r_first,
        0.5 * r_first,
        1.0 * r_first,
        0.5 * r_last,
        1.5 * r_last,
    ];
    let biggest = clouds.last().unwrap();
    let mut out = Vec::new();
    for &r in &shells {
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < 13 && attempts < 600 {
            attempts += 1;
            let dir = rng.unit_vector(n);
            let p = Point::new(dir.iter().map(|d| r * d).collect());
            let clear = biggest
                .points
                .iter()
                .zip(&biggest.cell_radii)
                .all(|(q, d)| p.dist(q) >= 2.0 * d)
                && sigma
                    .cloud
                    .points
                    .iter()
                    .zip(&sigma.cloud.cell_radii)
                    .all(|(q, d)| p.dist(q) >= 2.0 * d);
            if clear {
                out.push(p);
                found += 1;
            }
        }
    }
    out
}
