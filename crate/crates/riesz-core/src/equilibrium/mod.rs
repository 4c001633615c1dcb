//! Equilibrium measures and capacity of compact discretized sets, plus
//! exhaustion of equilibrium measures for unbounded sets.
//!
//! The discrete equilibrium problem is the linear-term NNQP
//! minimize 1/2 w' G w - 1' w over w >= 0: at the optimum the potential is 1
//! on the support and >= 1 on the whole grid, and mass = energy = capacity
//! falls out of the KKT conditions directly.

mod wiener;

pub use wiener::{
    classify_terms, wiener_series, ClassifyConfig, Classification, FitModel, WienerMode,
    WienerReport, WienerTerm,
};

use crate::balayage::{GapStats, SolverMeta};
use crate::error::{Error, Result};
use crate::geometry::{self, Point, PointCloud, Region, SampleMode};
use crate::kernel::{self, gram, RieszParams};
use crate::measure::DiscreteMeasure;
use crate::nnqp::{self, Nnqp};
use crate::rng::SplitMix64;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Knobs for equilibrium solves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumConfig {
    pub seed: u64,
    pub tol_kkt: f64,
    pub mode: Option<SampleMode>,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        EquilibriumConfig {
            seed: 42,
            tol_kkt: nnqp::DEFAULT_TOL_KKT,
            mode: None,
        }
    }
}

/// Discrete equilibrium measure of a sampled compact, with the capacity
/// identities' residuals.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub gamma: DiscreteMeasure,
    /// Total weight of gamma; equals the energy at KKT.
    pub capacity: f64,
    pub energy_value: f64,
    /// Statistics of kappa(gamma) - 1 over the grid (signed min) and over the
    /// support (absolute max).
    pub potential_on_set: OnSetPotential,
    pub solver: SolverMeta,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OnSetPotential {
    /// min over all grid points of kappa(gamma) - 1 (dual feasibility slack;
    /// should be >= -tol).
    pub min_slack: f64,
    /// max over support points of |kappa(gamma) - 1|.
    pub max_support_dev: f64,
    /// max over all grid points of kappa(gamma) - 1.
    pub max_excess: f64,
}

/// Equilibrium measure on an explicit cloud. An empty cloud is the empty set:
/// capacity 0, empty measure.
pub fn equilibrium_on_cloud(
    cloud: &PointCloud,
    params: &RieszParams,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumResult> {
    if cloud.is_empty() {
        return Ok(EquilibriumResult {
            gamma: DiscreteMeasure::empty(cloud.tag),
            capacity: 0.0,
            energy_value: 0.0,
            potential_on_set: OnSetPotential::default(),
            solver: SolverMeta {
                iterations: 0,
                kkt_residual: 0.0,
                converged: true,
                jitter_used: 0.0,
                objective: 0.0,
            },
        });
    }
    let g = gram(cloud, params)?;
    let n = cloud.len();
    let b = DVector::from_element(n, 1.0);
    let problem = Nnqp {
        q: g.entries.clone(),
        b: b.clone(),
        tol_kkt: cfg.tol_kkt,
        max_iter: 50 * n,
    };
    let sol = nnqp::solve_nnqp_with_factor(&problem, g.factor());

    let w = DVector::from_vec(sol.w.clone());
    let gamma = DiscreteMeasure::new(cloud.clone(), sol.w.clone())?;
    let capacity = gamma.total_mass();
    let energy_value = w.dot(&(&g.entries * &w));

    let pot = &g.entries * &w;
    let mut min_slack = f64::INFINITY;
    let mut max_support_dev = 0.0f64;
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..n {
        let slack = pot[i] - 1.0;
        min_slack = min_slack.min(slack);
        max_excess = max_excess.max(slack);
        if w[i] > 0.0 {
            max_support_dev = max_support_dev.max(slack.abs());
        }
    }

    Ok(EquilibriumResult {
        gamma,
        capacity,
        energy_value,
        potential_on_set: OnSetPotential {
            min_slack,
            max_support_dev,
            max_excess,
        },
        solver: SolverMeta::from(&sol),
    })
}

/// Equilibrium measure of a bounded region at the given resolution.
pub fn equilibrium_measure(
    region: &Region,
    resolution: usize,
    params: &RieszParams,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumResult> {
    let mode = cfg
        .mode
        .unwrap_or_else(|| crate::balayage::default_mode(params));
    let cloud = geometry::sample(region, resolution, mode, cfg.seed)?;
    equilibrium_on_cloud(&cloud, params, cfg)
}

/// Inner capacity of a bounded region: the total mass of its equilibrium
/// measure.
pub fn capacity(
    region: &Region,
    resolution: usize,
    params: &RieszParams,
    cfg: &EquilibriumConfig,
) -> Result<f64> {
    Ok(equilibrium_measure(region, resolution, params, cfg)?.capacity)
}

/// Trace of equilibrium solves on nested truncations of an unbounded set.
#[derive(Debug, Clone)]
pub struct EquilibriumExhaustionTrace {
    pub truncation_radii: Vec<f64>,
    pub results: Vec<EquilibriumResult>,
    pub capacities: Vec<f64>,
    pub probes: Vec<Point>,
    pub stage_probe_potentials: Vec<Vec<f64>>,
    /// Max pointwise potential decrease between consecutive stages.
    pub potential_monotonicity: f64,
    /// Set when the thinness classifier says the equilibrium measure of the
    /// full set need not exist (the set is not thin at infinity).
    pub equilibrium_may_not_exist: bool,
    pub thinness: Classification,
    pub flagged_nonconverged: bool,
}

impl EquilibriumExhaustionTrace {
    pub fn final_capacity_increment(&self) -> f64 {
        let k = self.capacities.len();
        if k < 2 {
            return f64::NAN;
        }
        self.capacities[k - 1] - self.capacities[k - 2]
    }
}

/// Equilibrium measures of nested truncations, with capacity monotonicity and
/// pointwise potential growth diagnostics. `per_shell` points are sampled per
/// annular shell; stage clouds nest exactly.
pub fn equilibrium_exhaustion(
    region: &Region,
    radii: &[f64],
    per_shell: usize,
    params: &RieszParams,
    cfg: &EquilibriumConfig,
) -> Result<EquilibriumExhaustionTrace> {
    if radii.is_empty() {
        return Err(Error::InvalidInput("no truncation radii".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(
            "truncation radii must be strictly increasing".into(),
        ));
    }
    let mode = cfg
        .mode
        .unwrap_or_else(|| crate::balayage::default_mode(params));
    let clouds =
        crate::balayage::nested_truncation_clouds(region, radii, per_shell, mode, cfg.seed)?;

    // Thinness pre-classification with a light series run.
    let origin = Point::new(vec![0.0; params.n]);
    let thinness = match wiener_series(
        region,
        WienerMode::Thinness,
        &origin,
        2.0,
        1..=6,
        per_shell.min(400),
        params,
        &ClassifyConfig::default(),
        cfg.seed ^ 0x711,
    ) {
        Ok(report) => report.classification,
        Err(_) => Classification::Inconclusive,
    };
    let equilibrium_may_not_exist = thinness == Classification::Divergent;

    let probes = exhaustion_probe_shells(&clouds, radii, params.n, cfg.seed ^ 0xeee);
    let mut results = Vec::with_capacity(clouds.len());
    let mut stage_pots = Vec::with_capacity(clouds.len());
    for cloud in &clouds {
        let res = equilibrium_on_cloud(cloud, params, cfg)?;
        let pots: Vec<f64> = probes
            .par_iter()
            .map(|p| kernel::potential(&res.gamma, p, params))
            .collect();
        stage_pots.push(pots);
        results.push(res);
    }
    let capacities: Vec<f64> = results.iter().map(|r| r.capacity).collect();
    let mut worst_drop = 0.0f64;
    for w in stage_pots.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            worst_drop = worst_drop.max(a - b);
        }
    }
    let flagged = results.iter().any(|r| !r.solver.converged);

    Ok(EquilibriumExhaustionTrace {
        truncation_radii: radii.to_vec(),
        results,
        capacities,
        probes,
        stage_probe_potentials: stage_pots,
        potential_monotonicity: worst_drop,
        equilibrium_may_not_exist,
        thinness,
        flagged_nonconverged: flagged,
    })
}

fn exhaustion_probe_shells(
    clouds: &[PointCloud],
    radii: &[f64],
    n: usize,
    seed: u64,
) -> Vec<Point> {
    let r_last = *radii.last().unwrap();
    let mut rng = SplitMix64::new(seed);
    let shells = [0.3 * radii[0], radii[0], 0.5 * r_last, 2.0 * r_last];
    let biggest = clouds.last().unwrap();
    let mut out = Vec::new();
    for &r in &shells {
        let mut found = 0usize;
        let mut attempts = 0usize;
        while found < 12 && attempts < 600 {
            attempts += 1;
            let dir = rng.unit_vector(n);
            let p = Point::new(dir.iter().map(|d| r * d).collect());
            let clear = biggest
                .points
                .iter()
                .zip(&biggest.cell_radii)
                .all(|(q, d)| p.dist(q) >= 2.0 * d);
            if clear {
                out.push(p);
                found += 1;
            }
        }
    }
    out
}

/// Statistics of the Frostman bound: max of kappa(gamma) over probes in all
/// of space (the equilibrium potential should not exceed 1 by more than the
/// discretization error).
pub fn frostman_excess(
    result: &EquilibriumResult,
    params: &RieszParams,
    probes: usize,
    seed: u64,
) -> GapStats {
    let cloud = &result.gamma.cloud;
    if cloud.is_empty() {
        return GapStats::default();
    }
    let n = cloud.dim();
    let center = Point::new(vec![0.0; n]);
    let r_max = cloud
        .points
        .iter()
        .map(|p| p.dist(&center))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut rng = SplitMix64::new(seed);
    let mut gaps = Vec::new();
    let mut refs = Vec::new();
    let mut attempts = 0usize;
    while gaps.len() < probes && attempts < 100 * probes {
        attempts += 1;
        let dir = rng.unit_vector(n);
        let radius = r_max * (0.05 + 2.5 * rng.next_f64());
        let p = Point::new(dir.iter().map(|d| radius * d).collect());
        let clear = cloud
            .points
            .iter()
            .zip(&cloud.cell_radii)
            .all(|(q, d)| p.dist(q) >= 2.0 * d);
        if clear {
            let v = kernel::potential(&result.gamma, &p, params);
            gaps.push((v - 1.0).max(0.0));
            refs.push(1.0);
        }
    }
    GapStats::from_gaps(&gaps, &refs)
}
