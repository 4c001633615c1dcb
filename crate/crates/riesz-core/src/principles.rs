//! Verifiers and named experiments for positivity-of-mass behavior: the
//! classical principle (potential domination everywhere implies mass
//! domination), its strengthening to sets that are not thin at infinity, the
//! sharpness construction on a thin set, the on-set variant for measures
//! carried by the set itself, and the domination/maximum principles.
//!
//! Experiments never assert limit statements; they assert threshold-based
//! signatures (mass-ratio plateau vs approach to one, series decay patterns)
//! with every threshold in one config block.

use crate::balayage::{self, SweepConfig};
use crate::equilibrium::{
    self, wiener_series, Classification, ClassifyConfig, EquilibriumConfig, WienerMode,
};
use crate::error::{Error, Result};
use crate::geometry::{self, Point, PointCloud, Region, SampleMode};
use crate::kernel::{self, RieszParams};
use crate::measure::DiscreteMeasure;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};
use serde_json::json;

/// Tolerances of a positivity-of-mass check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PomTolerance {
    /// Pointwise slack, relative to the dominating potential.
    pub rel: f64,
    /// Pointwise absolute slack.
    pub abs: f64,
    /// Relative slack on the mass inequality.
    pub mass: f64,
}

impl Default for PomTolerance {
    fn default() -> Self {
        PomTolerance {
            rel: 0.02,
            abs: 0.0,
            mass: 1e-6,
        }
    }
}

/// Verdict of a pointwise-domination / mass-domination check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PomVerdict {
    /// kappa(mu) <= kappa(nu) + tol at every kept probe?
    pub pointwise_holds: bool,
    pub violating_probes: Vec<usize>,
    /// Probes dropped for sitting within two cell radii of an atom.
    pub excluded_probes: usize,
    pub mass_mu: f64,
    pub mass_nu: f64,
    pub mass_inequality_holds: bool,
    pub max_pointwise_excess: f64,
    pub tolerances: PomTolerance,
}

/// Check the hypothesis kappa(mu) <= kappa(nu) on a probe set and compare
/// total masses. Reports; never raises on a violated hypothesis.
pub fn pom_verify(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    probes: &PointCloud,
    tol: &PomTolerance,
) -> Result<PomVerdict> {
    if probes.is_empty() {
        return Err(Error::InvalidInput("empty probe cloud".into()));
    }
    let params = RieszParams::new(probes.dim(), 2.0_f64.min(probes.dim() as f64 - 1.0))?;
    pom_verify_with(mu, nu, probes, tol, &params)
}

pub fn pom_verify_with(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    probes: &PointCloud,
    tol: &PomTolerance,
    params: &RieszParams,
) -> Result<PomVerdict> {
    // Below an atom's granularity length, potentials of a discrete measure
    // carry no pointwise information. For regular layouts that length is
    // twice the cell radius. Collapsed thin-segment beads carry cell radii
    // deliberately far below the sample spacing, and the field between the
    // beads of a one-dimensional chain ripples at order one, so there the
    // nearest-neighbor distance sets the exclusion instead.
    let radii = |m: &DiscreteMeasure| -> Vec<f64> {
        let pts = &m.cloud.points;
        pts.iter()
            .enumerate()
            .zip(&m.cloud.cell_radii)
            .map(|((i, p), d)| {
                let nn = pts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, q)| p.dist(q))
                    .fold(f64::INFINITY, f64::min);
                let nn = if nn.is_finite() { nn } else { 0.0 };
                if *d < 0.4 * nn {
                    nn.max(2.0 * d)
                } else {
                    2.0 * d
                }
            })
            .collect()
    };
    let mu_excl = radii(mu);
    let nu_excl = radii(nu);

    // A probe coinciding with an atom (inside half its cell radius) reads the
    // canonical capped value of the grid and is always meaningful; a probe in
    // the near-field ring between that and the granularity radius sees only
    // discretization ripple and is dropped.
    let status_ok = |p: &Point, m: &DiscreteMeasure, excl: &[f64]| -> bool {
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, q) in m.cloud.points.iter().enumerate() {
            let d = p.dist(q);
            if d < nearest.0 {
                nearest = (d, i);
            }
        }
        if !nearest.0.is_finite() {
            return true;
        }
        if nearest.0 <= 0.5 * m.cloud.cell_radii[nearest.1] {
            return true;
        }
        m.cloud
            .points
            .iter()
            .zip(excl)
            .all(|(q, r)| p.dist(q) >= *r)
    };

    let mut kept = Vec::new();
    let mut excluded = 0usize;
    for p in &probes.points {
        if status_ok(p, mu, &mu_excl) && status_ok(p, nu, &nu_excl) {
            kept.push(p.clone());
        } else {
            excluded += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidInput(
            "all probes sit within two cell radii of an atom".into(),
        ));
    }

    let mut violating = Vec::new();
    let mut max_excess = f64::NEG_INFINITY;
    for (i, p) in kept.iter().enumerate() {
        let pm = kernel::potential(mu, p, params);
        let pn = kernel::potential(nu, p, params);
        let excess = pm - pn - tol.rel * pn.abs() - tol.abs;
        max_excess = max_excess.max(pm - pn);
        if excess > 0.0 {
            violating.push(i);
        }
    }
    let mass_mu = mu.total_mass();
    let mass_nu = nu.total_mass();
    Ok(PomVerdict {
        pointwise_holds: violating.is_empty(),
        violating_probes: violating,
        excluded_probes: excluded,
        mass_mu,
        mass_nu,
        mass_inequality_holds: mass_mu <= mass_nu * (1.0 + tol.mass),
        max_pointwise_excess: max_excess,
        tolerances: tol.clone(),
    })
}

/// Domination / complete maximum principle check: if
/// kappa(mu) <= kappa(nu) + q holds at the support-side probes, it must hold
/// (within `tol`) at the global probes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub hypothesis_met: bool,
    pub max_support_violation: f64,
    pub max_global_violation: f64,
    pub holds: bool,
    pub q_const: f64,
    pub tol: f64,
}

pub fn domination_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    q_const: f64,
    probes_support: &PointCloud,
    probes_global: &PointCloud,
    tol: f64,
    params: &RieszParams,
) -> Result<DominationReport> {
    if q_const < 0.0 {
        return Err(Error::InvalidInput("q_const must be >= 0".into()));
    }
    let violation = |p: &Point| {
        kernel::potential(mu, p, params) - kernel::potential(nu, p, params) - q_const
    };
    let max_support = probes_support
        .points
        .iter()
        .map(|p| violation(p))
        .fold(f64::NEG_INFINITY, f64::max);
    let hypothesis_met = max_support <= tol;
    let max_global = probes_global
        .points
        .iter()
        .map(|p| violation(p))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(DominationReport {
        hypothesis_met,
        max_support_violation: max_support,
        max_global_violation: max_global,
        holds: hypothesis_met && max_global <= tol,
        q_const,
        tol,
    })
}

// ---------------------------------------------------------------------------
// Named experiments
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    F1MassRetention,
    F2MassLoss,
    Sharpness,
    OnsetPom,
    BallBenchmarks,
    KelvinIdentities,
    ThinnessAtlas,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::F1MassRetention,
        ExperimentName::F2MassLoss,
        ExperimentName::Sharpness,
        ExperimentName::OnsetPom,
        ExperimentName::BallBenchmarks,
        ExperimentName::KelvinIdentities,
        ExperimentName::ThinnessAtlas,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::F1MassRetention => "f1-mass-retention",
            ExperimentName::F2MassLoss => "f2-mass-loss",
            ExperimentName::Sharpness => "sharpness",
            ExperimentName::OnsetPom => "onset-pom",
            ExperimentName::BallBenchmarks => "ball-benchmarks",
            ExperimentName::KelvinIdentities => "kelvin-identities",
            ExperimentName::ThinnessAtlas => "thinness-atlas",
        }
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .iter()
            .find(|n| n.as_str() == s)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment '{s}'")))
    }
}

/// One config block for every preset: sampling scales, seeds, and all
/// pass/fail thresholds. Defaults document the suite's operating point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: RieszParams,
    pub seed: u64,
    /// Point budget for single-compact solves (ball benchmarks, sharpness).
    pub resolution: usize,
    /// Per-shell budget for exhaustion stages.
    pub shell_resolution: usize,
    /// Per-slice budget for Wiener series.
    pub slice_resolution: usize,
    pub truncation_radii: Vec<f64>,
    pub q: f64,
    pub j_max: u32,
    /// Source for the F-body experiments: a unit mollified Dirac here.
    pub source_point: Vec<f64>,
    pub dirac_delta: f64,
    pub ball_capacity_rtol: f64,
    pub sweep_mass_rtol: f64,
    /// Fraction of swept mass required within two cell radii of the sphere.
    pub boundary_mass_min: f64,
    pub kelvin_rtol: f64,
    pub kelvin_trials: usize,
    pub f1_final_ratio_min: f64,
    pub f2_final_ratio_max: f64,
    pub f2_final_increment_max: f64,
    pub onset_gap_rtol: f64,
    pub sharpness_min_deficit: f64,
    pub onset_trials: usize,
    pub mass_tol: f64,
    pub monotonicity_tol: f64,
    pub identity_tol: f64,
    pub classify: ClassifyConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: RieszParams::newtonian(),
            seed: 42,
            resolution: 2000,
            shell_resolution: 700,
            slice_resolution: 400,
            truncation_radii: vec![8.0, 16.0, 32.0],
            q: 2.0,
            j_max: 7,
            source_point: vec![-1.0, 0.0, 0.0],
            dirac_delta: 0.01,
            ball_capacity_rtol: 0.02,
            sweep_mass_rtol: 0.02,
            boundary_mass_min: 0.99,
            kelvin_rtol: 1e-8,
            kelvin_trials: 100,
            f1_final_ratio_min: 0.9,
            f2_final_ratio_max: 0.8,
            f2_final_increment_max: 0.02,
            onset_gap_rtol: 0.02,
            sharpness_min_deficit: 0.05,
            onset_trials: 20,
            mass_tol: 1e-6,
            monotonicity_tol: 1e-6,
            identity_tol: 1e-6,
            classify: ClassifyConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    Pass,
    Fail,
    Inconclusive,
}

/// Full record of one experiment run: config echo, per-stage outputs, and a
/// conclusion that is a pure function of the stage outputs and thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub inputs: ExperimentConfig,
    pub stages: serde_json::Value,
    pub conclusion: Conclusion,
    pub wall_ms: u128,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn source_measure(cfg: &ExperimentConfig) -> Result<DiscreteMeasure> {
    DiscreteMeasure::mollified_dirac(Point::new(cfg.source_point.clone()), 1.0, cfg.dirac_delta)
}

fn sweep_cfg(cfg: &ExperimentConfig, resolution: usize, salt: u64) -> SweepConfig {
    SweepConfig {
        resolution,
        seed: cfg.seed ^ salt,
        tol_mass: cfg.mass_tol,
        ..SweepConfig::default()
    }
}

/// Run a named experiment. Stage outputs are recorded first; the conclusion
/// is then computed from them by [`conclude`].
pub fn run_experiment(name: ExperimentName, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    let stages = match name {
        ExperimentName::F1MassRetention => stage_exhaustion(cfg, Region::rotation_body_power(1.0))?,
        ExperimentName::F2MassLoss => stage_exhaustion(cfg, Region::rotation_body_exp(1.0))?,
        ExperimentName::Sharpness => stage_sharpness(cfg)?,
        ExperimentName::OnsetPom => stage_onset_pom(cfg)?,
        ExperimentName::BallBenchmarks => stage_ball_benchmarks(cfg)?,
        ExperimentName::KelvinIdentities => stage_kelvin(cfg)?,
        ExperimentName::ThinnessAtlas => stage_atlas(cfg)?,
    };
    let conclusion = conclude(name, &stages, cfg);
    Ok(ExperimentReport {
        name: name.as_str().to_string(),
        inputs: cfg.clone(),
        stages,
        conclusion,
        wall_ms: start.elapsed().as_millis(),
    })
}

/// Pure conclusion function: reads only recorded stage outputs and config
/// thresholds.
pub fn conclude(
    name: ExperimentName,
    stages: &serde_json::Value,
    cfg: &ExperimentConfig,
) -> Conclusion {
    let get = |key: &str| stages.get(key);
    let as_f64 = |key: &str| get(key).and_then(serde_json::Value::as_f64);
    let as_bool = |key: &str| get(key).and_then(serde_json::Value::as_bool);

    if let Some(false) = as_bool("all_converged") {
        return Conclusion::Inconclusive;
    }

    let pass = |ok: bool| if ok { Conclusion::Pass } else { Conclusion::Fail };

    match name {
        ExperimentName::F1MassRetention => {
            let (Some(final_ratio), Some(drop), Some(ratio_drop)) = (
                as_f64("final_ratio"),
                as_f64("potential_monotonicity"),
                as_f64("max_ratio_decrease"),
            ) else {
                return Conclusion::Inconclusive;
            };
            pass(
                final_ratio >= cfg.f1_final_ratio_min
                    && drop <= cfg.monotonicity_tol
                    && ratio_drop <= cfg.monotonicity_tol,
            )
        }
        ExperimentName::F2MassLoss => {
            let (Some(final_ratio), Some(final_inc), Some(gap), Some(drop)) = (
                as_f64("final_ratio"),
                as_f64("final_increment"),
                as_f64("final_on_set_gap_rel"),
                as_f64("potential_monotonicity"),
            ) else {
                return Conclusion::Inconclusive;
            };
            pass(
                final_ratio <= cfg.f2_final_ratio_max
                    && final_inc <= cfg.f2_final_increment_max
                    && final_inc >= -cfg.monotonicity_tol
                    && gap <= cfg.onset_gap_rtol
                    && drop <= cfg.monotonicity_tol
                    && 1.0 - final_ratio >= cfg.sharpness_min_deficit,
            )
        }
        ExperimentName::Sharpness => {
            let (Some(pointwise), Some(mass_mu), Some(mass_nu)) = (
                as_bool("pointwise_holds"),
                as_f64("mass_mu"),
                as_f64("mass_nu"),
            ) else {
                return Conclusion::Inconclusive;
            };
            pass(pointwise && mass_nu < mass_mu * (1.0 - cfg.sharpness_min_deficit))
        }
        ExperimentName::OnsetPom => {
            let (Some(trials), Some(held)) = (as_f64("trials"), as_f64("mass_inequality_held"))
            else {
                return Conclusion::Inconclusive;
            };
            pass(trials > 0.0 && held == trials)
        }
        ExperimentName::BallBenchmarks => {
            let keys = [
                "capacity_r1_err",
                "capacity_r2_err",
                "sweep_d2_err",
                "sweep_d4_err",
            ];
            let errs: Option<Vec<f64>> = keys.iter().map(|k| as_f64(k)).collect();
            let (Some(errs), Some(boundary), Some(fcap)) = (
                errs,
                as_f64("boundary_mass_fraction"),
                as_f64("max_fcap_residual"),
            ) else {
                return Conclusion::Inconclusive;
            };
            let cap_ok = errs[0] <= cfg.ball_capacity_rtol && errs[1] <= cfg.ball_capacity_rtol;
            let sweep_ok = errs[2] <= cfg.sweep_mass_rtol && errs[3] <= cfg.sweep_mass_rtol;
            pass(
                cap_ok
                    && sweep_ok
                    && boundary >= cfg.boundary_mass_min
                    && fcap <= cfg.identity_tol,
            )
        }
        ExperimentName::KelvinIdentities => {
            let Some(worst) = as_f64("max_rel_error") else {
                return Conclusion::Inconclusive;
            };
            pass(worst <= cfg.kelvin_rtol)
        }
        ExperimentName::ThinnessAtlas => {
            let Some(rows) = get("rows").and_then(serde_json::Value::as_array) else {
                return Conclusion::Inconclusive;
            };
            let mut ok = true;
            for row in rows {
                let got = row.get("classification").and_then(serde_json::Value::as_str);
                let want = row.get("expected").and_then(serde_json::Value::as_str);
                match (got, want) {
                    (Some(g), Some(w)) => {
                        if g == "inconclusive" {
                            return Conclusion::Inconclusive;
                        }
                        ok &= g == w;
                    }
                    _ => return Conclusion::Inconclusive,
                }
            }
            pass(ok)
        }
    }
}

fn stage_exhaustion(cfg: &ExperimentConfig, family: Region) -> Result<serde_json::Value> {
    let sigma = source_measure(cfg)?;
    let scfg = sweep_cfg(cfg, cfg.shell_resolution, 0x1);
    let trace = balayage::exhaustion_sweep(
        &sigma,
        &family,
        &cfg.truncation_radii,
        &cfg.params,
        &scfg,
    )?;
    let max_ratio_decrease = trace
        .mass_ratios
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0f64, f64::max);
    let final_gap = trace
        .results
        .last()
        .map(|r| r.on_set_match.max_rel)
        .unwrap_or(f64::NAN);
    Ok(json!({
        "all_converged": !trace.flagged_nonconverged,
        "radii": trace.truncation_radii,
        "mass_ratios": trace.mass_ratios,
        "final_ratio": trace.final_ratio(),
        "final_increment": trace.final_increment(),
        "max_ratio_decrease": max_ratio_decrease,
        "potential_monotonicity": trace.potential_monotonicity,
        "final_on_set_gap_rel": final_gap,
        "mass_bounds_ok": trace.results.iter().all(|r| r.mass_bound_ok),
        "trace_csv": trace.to_csv(),
    }))
}

fn stage_sharpness(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let sigma = source_measure(cfg)?;
    let family = Region::rotation_body_exp(1.0);
    let scfg = sweep_cfg(cfg, cfg.shell_resolution, 0x2);
    let trace =
        balayage::exhaustion_sweep(&sigma, &family, &cfg.truncation_radii, &cfg.params, &scfg)?;
    let last = trace
        .results
        .last()
        .ok_or_else(|| Error::InvalidInput("empty trace".into()))?;
    // Probes on the thin set: the target grid itself, where the discrete
    // rendering of "equal nearly everywhere on A" lives.
    let verdict = pom_verify_with(
        &sigma,
        &last.swept,
        &last.swept.cloud,
        &PomTolerance {
            rel: cfg.onset_gap_rtol,
            abs: 0.0,
            mass: cfg.mass_tol,
        },
        &cfg.params,
    )?;
    let (pointwise, excess, excluded) = (
        verdict.pointwise_holds,
        verdict.max_pointwise_excess,
        verdict.excluded_probes,
    );
    Ok(json!({
        "all_converged": !trace.flagged_nonconverged,
        "pointwise_holds": pointwise,
        "max_pointwise_excess": excess,
        "excluded_probes": excluded,
        "mass_mu": sigma.total_mass(),
        "mass_nu": last.swept_mass,
        "on_set_gap_rel": last.on_set_match.max_rel,
    }))
}

fn stage_onset_pom(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let mut rng = SplitMix64::new(cfg.seed ^ 0x05e7);
    let mut held = 0usize;
    let mut all_converged = true;
    let mut worst_excess_ratio = f64::NEG_INFINITY;
    let mut rows = Vec::new();
    for trial in 0..cfg.onset_trials {
        // Random compact K: a sphere with seeded center and radius.
        let center = Point::new(vec![
            4.0 * (rng.next_f64() - 0.5),
            4.0 * (rng.next_f64() - 0.5),
            4.0 * (rng.next_f64() - 0.5),
        ]);
        let radius = 0.5 + 1.5 * rng.next_f64();
        let region = Region::ball(center, radius);
        let cloud = geometry::sample(
            &region,
            240,
            SampleMode::Surface,
            cfg.seed ^ (trial as u64),
        )?;
        // Random positive weights on K.
        let weights: Vec<f64> = (0..cloud.len()).map(|_| 0.1 + rng.next_f64()).collect();
        let nu = DiscreteMeasure::new(cloud.clone(), weights)?;
        // Sub-cloud K' of K: keep a seeded subset of the atoms.
        let keep: Vec<usize> = (0..cloud.len())
            .filter(|_| rng.next_f64() < 0.55)
            .collect();
        if keep.len() < 8 {
            continue;
        }
        let sub = PointCloud::new(
            keep.iter().map(|&i| cloud.points[i].clone()).collect(),
            keep.iter().map(|&i| cloud.cell_radii[i]).collect(),
            cloud.tag,
        )?;
        let scfg = sweep_cfg(cfg, 0, 0x30 + trial as u64);
        let res = balayage::sweep_onto_cloud(&nu, &sub, Some(&region), &cfg.params, &scfg)?;
        all_converged &= res.solver.converged;
        let ok = res.swept_mass <= nu.total_mass() * (1.0 + cfg.mass_tol);
        if ok {
            held += 1;
        }
        worst_excess_ratio = worst_excess_ratio.max(res.swept_mass / nu.total_mass() - 1.0);
        rows.push(json!({
            "trial": trial,
            "mass_nu": nu.total_mass(),
            "mass_mu": res.swept_mass,
            "held": ok,
        }));
    }
    Ok(json!({
        "all_converged": all_converged,
        "trials": rows.len(),
        "mass_inequality_held": held,
        "worst_excess_ratio": worst_excess_ratio,
        "rows": rows,
    }))
}

fn stage_ball_benchmarks(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let params = &cfg.params;
    let ecfg = EquilibriumConfig {
        seed: cfg.seed,
        ..EquilibriumConfig::default()
    };
    let ball1 = Region::unit_ball(params.n);
    let eq1 = equilibrium::equilibrium_measure(&ball1, cfg.resolution, params, &ecfg)?;
    let ball2 = Region::ball(Point::new(vec![0.0; params.n]), 2.0);
    let eq2 = equilibrium::equilibrium_measure(&ball2, cfg.resolution, params, &ecfg)?;
    let scale_exp = params.n as f64 - params.alpha;
    let expected_c2 = 2.0f64.powf(scale_exp);

    let mut all_converged = eq1.solver.converged && eq2.solver.converged;
    let fcap1 = (eq1.capacity - eq1.energy_value).abs().max(
        (eq2.capacity - eq2.energy_value).abs(),
    );

    // Balayage closed form: exterior unit Dirac at distance d onto the unit
    // ball sweeps mass (1/d)^(n - alpha).
    let mut sweep_errs = Vec::new();
    let mut boundary_fraction = f64::NAN;
    for (k, d) in [2.0f64, 4.0].iter().enumerate() {
        let mut src = vec![0.0; params.n];
        src[0] = *d;
        let sigma = DiscreteMeasure::mollified_dirac(Point::new(src), 1.0, cfg.dirac_delta)?;
        let scfg = sweep_cfg(cfg, cfg.resolution, 0x40 + k as u64);
        let res = balayage::sweep(&sigma, &ball1, params, &scfg)?;
        all_converged &= res.solver.converged;
        let expected = d.powf(-scale_exp);
        sweep_errs.push((res.swept_mass - expected).abs() / expected);
        if k == 0 {
            // Support-location check on a volume-sampled solid ball: the
            // swept measure must sit against the boundary sphere.
            let vcfg = SweepConfig {
                mode: Some(SampleMode::Volume),
                ..sweep_cfg(cfg, cfg.resolution, 0x50)
            };
            let vres = balayage::sweep(&sigma, &ball1, params, &vcfg)?;
            all_converged &= vres.solver.converged;
            let near: f64 = vres
                .swept
                .cloud
                .points
                .iter()
                .zip(&vres.swept.cloud.cell_radii)
                .zip(&vres.swept.weights)
                .filter(|((p, dl), _)| (p.norm() - 1.0).abs() <= 2.0 * **dl)
                .map(|(_, w)| *w)
                .sum();
            boundary_fraction = near / vres.swept_mass.max(1e-300);
        }
    }

    Ok(json!({
        "all_converged": all_converged,
        "capacity_r1": eq1.capacity,
        "capacity_r2": eq2.capacity,
        "capacity_r1_err": (eq1.capacity - 1.0).abs(),
        "capacity_r2_err": (eq2.capacity - expected_c2).abs() / expected_c2,
        "sweep_d2_err": sweep_errs[0],
        "sweep_d4_err": sweep_errs[1],
        "boundary_mass_fraction": boundary_fraction,
        "max_fcap_residual": fcap1,
        "fcap2_support_dev": eq1.potential_on_set.max_support_dev.max(eq2.potential_on_set.max_support_dev),
    }))
}

fn stage_kelvin(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let params = &cfg.params;
    let n = params.n;
    let mut rng = SplitMix64::new(cfg.seed ^ 0x6e1);
    let center = Point::new(vec![0.0; n]);
    let inv = geometry::Inversion::new(center.clone());
    let mut worst = 0.0f64;
    for _ in 0..cfg.kelvin_trials {
        let atoms = 2 + (rng.next_u64() % 10) as usize;
        let mut points = Vec::new();
        let mut radii = Vec::new();
        let mut weights = Vec::new();
        for _ in 0..atoms {
            let dir = rng.unit_vector(n);
            let r = 0.4 + 2.6 * rng.next_f64();
            points.push(Point::new(dir.iter().map(|d| r * d).collect()));
            radii.push(1e-3 + 1e-3 * rng.next_f64());
            weights.push(0.1 + rng.next_f64());
        }
        let cloud = PointCloud::new(points, radii, SampleMode::Volume)?;
        let nu = DiscreteMeasure::new(cloud, weights)?;
        let star = nu.kelvin_transform(&inv, params)?;

        // Involution.
        let back = star.kelvin_transform(&inv, params)?;
        for (a, b) in back.cloud.points.iter().zip(&nu.cloud.points) {
            worst = worst.max(a.dist(b) / b.norm().max(1e-12));
        }
        for (a, b) in back.weights.iter().zip(&nu.weights) {
            worst = worst.max((a - b).abs() / b.abs().max(1e-12));
        }
        // Mass-potential duality: nu(R^n) = kappa(nu*)(center).
        let mass = nu.total_mass();
        let pot = kernel::potential_exact(&star, &center, params);
        worst = worst.max((mass - pot).abs() / mass);
        // Energy identity on distinct atoms.
        let e = kernel::energy_exact(&nu, &nu, params);
        let e_star = kernel::energy_exact(&star, &star, params);
        worst = worst.max((e - e_star).abs() / e.abs().max(1e-12));
        // Potential transform at a probe off the support.
        let probe = Point::new(
            rng.unit_vector(n)
                .iter()
                .map(|d| (0.3 + 2.0 * rng.next_f64()) * d)
                .collect(),
        );
        if nu.cloud.points.iter().all(|p| p.dist(&probe) > 1e-3) && probe.norm() > 1e-3 {
            let lhs = kernel::potential_exact(&star, &inv.invert(&probe)?, params);
            let rhs =
                probe.norm().powf(-params.exponent()) * kernel::potential_exact(&nu, &probe, params);
            worst = worst.max((lhs - rhs).abs() / rhs.abs().max(1e-12));
        }
    }
    Ok(json!({
        "all_converged": true,
        "trials": cfg.kelvin_trials,
        "max_rel_error": worst,
    }))
}

fn stage_atlas(cfg: &ExperimentConfig) -> Result<serde_json::Value> {
    let origin = Point::new(vec![0.0; cfg.params.n]);
    let mut rows = Vec::new();
    let cases: Vec<(Region, WienerMode, &str, String)> = vec![
        (Region::rotation_body_power(0.0), WienerMode::Thinness, "divergent", "F1 s=0".into()),
        (Region::rotation_body_power(1.0), WienerMode::Thinness, "divergent", "F1 s=1".into()),
        (Region::rotation_body_power(2.0), WienerMode::Thinness, "divergent", "F1 s=2".into()),
        (Region::rotation_body_exp(0.5), WienerMode::Thinness, "convergent", "F2 s=0.5".into()),
        (Region::rotation_body_exp(1.0), WienerMode::Thinness, "convergent", "F2 s=1".into()),
        (Region::rotation_body_exp(2.0), WienerMode::Thinness, "convergent", "F2 s=2".into()),
        (Region::rotation_body_exp(0.5), WienerMode::Finiteness, "divergent", "F2 s=0.5".into()),
        (Region::rotation_body_exp(1.0), WienerMode::Finiteness, "divergent", "F2 s=1".into()),
        (Region::rotation_body_exp(2.0), WienerMode::Finiteness, "convergent", "F2 s=2".into()),
    ];
    let mut all_converged = true;
    for (region, mode, expected, label) in cases {
        let report = wiener_series(
            &region,
            mode,
            &origin,
            cfg.q,
            1..=cfg.j_max,
            cfg.slice_resolution,
            &cfg.params,
            &cfg.classify,
            cfg.seed,
        );
        match report {
            Ok(rep) => {
                let class = match rep.classification {
                    Classification::Convergent => "convergent",
                    Classification::Divergent => "divergent",
                    Classification::Inconclusive => "inconclusive",
                };
                rows.push(json!({
                    "label": label,
                    "mode": format!("{:?}", mode),
                    "expected": expected,
                    "classification": class,
                    "terms": rep.terms.iter().map(|t| t.term).collect::<Vec<_>>(),
                    "fit": rep.fitted,
                }));
            }
            Err(e) => {
                all_converged = false;
                rows.push(json!({
                    "label": label,
                    "mode": format!("{:?}", mode),
                    "expected": expected,
                    "error": e.to_string(),
                }));
            }
        }
    }
    Ok(json!({
        "all_converged": all_converged,
        "rows": rows,
    }))
}

/// Write a report atomically (temp file + rename) as pretty JSON.
pub fn write_report_atomic(report: &ExperimentReport, path: &std::path::Path) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, report.to_json())?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
