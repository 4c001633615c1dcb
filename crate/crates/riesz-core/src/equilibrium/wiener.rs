//! Wiener-type series over annular slices: thinness at infinity, regularity
//! at a point, and capacity finiteness, with a model-fit classifier.
//!
//! Convergence of an infinite series is not decidable from finitely many
//! terms, so the classifier fits the computed terms (geometric and power-law
//! models), applies configurable margins, and reports `inconclusive` when the
//! evidence is weak or the fits disagree.

use super::{equilibrium_on_cloud, EquilibriumConfig};
use crate::error::{Error, Result};
use crate::geometry::{self, Point, Region};
use crate::kernel::RieszParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::RangeInclusive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WienerMode {
    /// Series sum c(A_j) / q^(j (n - alpha)) with q > 1 over slices
    /// q^j <= |x - y| < q^(j+1); converges iff the set is thin at infinity.
    Thinness,
    /// Same series with q in (0, 1) over shrinking annuli around y;
    /// diverges iff y is a regular point.
    Regularity,
    /// Plain sum of slice capacities with q > 1; converges iff the set has
    /// finite capacity.
    Finiteness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FitModel {
    /// t_j ~ C ratio^j.
    Geometric { ratio: f64, r2: f64, log_rms: f64 },
    /// t_j ~ C j^(-exponent).
    PowerLaw { exponent: f64, r2: f64, log_rms: f64 },
}

impl FitModel {
    pub fn r2(&self) -> f64 {
        match self {
            FitModel::Geometric { r2, .. } | FitModel::PowerLaw { r2, .. } => *r2,
        }
    }

    /// Root-mean-square residual of the fit in log space: the relative
    /// per-term misfit. Unlike R^2 it stays meaningful for near-constant
    /// sequences, whose variance is ~0.
    pub fn log_rms(&self) -> f64 {
        match self {
            FitModel::Geometric { log_rms, .. } | FitModel::PowerLaw { log_rms, .. } => *log_rms,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WienerTerm {
    pub j: u32,
    pub r_lo: f64,
    pub r_hi: f64,
    pub slice_capacity: f64,
    pub term: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WienerReport {
    pub mode: WienerMode,
    pub q: f64,
    pub center: Point,
    pub terms: Vec<WienerTerm>,
    pub partial_sums: Vec<f64>,
    /// The better-fitting of the two decay models, if any fit was possible.
    pub fitted: Option<FitModel>,
    /// Both fits, for diagnostics.
    pub geometric_fit: Option<FitModel>,
    pub power_fit: Option<FitModel>,
    pub classification: Classification,
}

impl WienerReport {
    /// CSV export: `j,rLo,rHi,sliceCapacity,term,partialSum`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,rLo,rHi,sliceCapacity,term,partialSum\n");
        for (t, s) in self.terms.iter().zip(&self.partial_sums) {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                t.j, t.r_lo, t.r_hi, t.slice_capacity, t.term, s
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Margins and quality thresholds of the series classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Geometric verdicts need the ratio at least this far below 1.
    pub geometric_margin: f64,
    /// Power-law exponents within this of 1 still count as divergent.
    pub power_margin: f64,
    /// Minimum goodness of fit for any verdict.
    pub min_r2: f64,
    /// A fit whose log-space rms residual is below this also counts as good,
    /// regardless of R^2 (which degenerates on near-constant sequences).
    pub max_log_rms: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            geometric_margin: 0.1,
            power_margin: 0.3,
            min_r2: 0.95,
            max_log_rms: 0.15,
        }
    }
}

/// Compute the Wiener-type series of `region` around `center`.
///
/// Slice capacities solve independently (in parallel); the report assembly is
/// deterministic. Empty slices contribute zero terms; an all-zero series is
/// convergent (the set is bounded).
#[allow(clippy::too_many_arguments)]
pub fn wiener_series(
    region: &Region,
    mode: WienerMode,
    center: &Point,
    q: f64,
    j_range: RangeInclusive<u32>,
    resolution: usize,
    params: &RieszParams,
    classify_cfg: &ClassifyConfig,
    seed: u64,
) -> Result<WienerReport> {
    match mode {
        WienerMode::Thinness | WienerMode::Finiteness => {
            if !(q > 1.0) {
                return Err(Error::InvalidInput(
                    "thinness/finiteness series require q > 1".into(),
                ));
            }
        }
        WienerMode::Regularity => {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::InvalidInput(
                    "regularity series require q in (0, 1)".into(),
                ));
            }
        }
    }
    center.validate()?;
    let n = region.dim()?;
    if center.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: center.dim(),
        });
    }

    let js: Vec<u32> = j_range.collect();
    let mode_sample = crate::balayage::default_mode(params);
    let slices: Vec<(u32, f64, f64, Region)> = js
        .iter()
        .map(|&j| {
            let (r_lo, r_hi) = match mode {
                WienerMode::Thinness | WienerMode::Finiteness => {
                    (q.powi(j as i32), q.powi(j as i32 + 1))
                }
                // Shrinking annuli: q^(j+1) < |x - y| <= q^j rendered as the
                // half-open clip [q^(j+1), q^j); the boundary circle is a
                // capacity-null difference.
                WienerMode::Regularity => (q.powi(j as i32 + 1), q.powi(j as i32)),
            };
            let slice = Region::AnnulusClip {
                inner: Box::new(region.clone()),
                center: center.clone(),
                r_lo,
                r_hi,
            };
            (j, r_lo, r_hi, slice)
        })
        .collect();

    let capacities: Vec<Result<f64>> = slices
        .par_iter()
        .map(|(j, _, _, slice)| {
            let cloud = geometry::sample(slice, resolution, mode_sample, seed ^ u64::from(*j))?;
            let cfg = EquilibriumConfig {
                seed: seed ^ u64::from(*j),
                ..EquilibriumConfig::default()
            };
            let res = equilibrium_on_cloud(&cloud, params, &cfg)?;
            if !res.solver.converged {
                return Err(Error::NotConverged(format!(
                    "slice j={j} equilibrium solve (residual {:.2e})",
                    res.solver.kkt_residual
                )));
            }
            Ok(res.capacity)
        })
        .collect();

    let weight_exp = params.n as f64 - params.alpha;
    let mut terms = Vec::with_capacity(js.len());
    let mut partial_sums = Vec::with_capacity(js.len());
    let mut acc = 0.0;
    for ((j, r_lo, r_hi, _), cap) in slices.iter().zip(capacities) {
        let c = cap?;
        let term = match mode {
            WienerMode::Thinness | WienerMode::Regularity => {
                c / q.powf(f64::from(*j) * weight_exp)
            }
            WienerMode::Finiteness => c,
        };
        acc += term;
        terms.push(WienerTerm {
            j: *j,
            r_lo: *r_lo,
            r_hi: *r_hi,
            slice_capacity: c,
            term,
        });
        partial_sums.push(acc);
    }

    let (classification, fitted, geometric_fit, power_fit) = classify_terms(&terms, classify_cfg);

    Ok(WienerReport {
        mode,
        q,
        center: center.clone(),
        terms,
        partial_sums,
        fitted,
        geometric_fit,
        power_fit,
        classification,
    })
}

/// Pure classification of a term sequence: fit geometric and power-law decay
/// models, pick the better fit, and apply the configured margins.
pub fn classify_terms(
    terms: &[WienerTerm],
    cfg: &ClassifyConfig,
) -> (
    Classification,
    Option<FitModel>,
    Option<FitModel>,
    Option<FitModel>,
) {
    let positive: Vec<(f64, f64)> = terms
        .iter()
        .filter(|t| t.term > 0.0 && t.term.is_finite())
        .map(|t| (f64::from(t.j), t.term))
        .collect();

    if positive.is_empty() {
        // No mass in any slice: the set is bounded within the probed range.
        return (Classification::Convergent, None, None, None);
    }
    if positive.len() < 3 {
        let trailing_zero = terms.iter().rev().take(2).all(|t| t.term == 0.0);
        let class = if trailing_zero {
            Classification::Convergent
        } else {
            Classification::Inconclusive
        };
        return (class, None, None, None);
    }

    let xs_geo: Vec<f64> = positive.iter().map(|(j, _)| *j).collect();
    let ys: Vec<f64> = positive.iter().map(|(_, t)| t.ln()).collect();
    let geo = linear_fit(&xs_geo, &ys).map(|(slope, r2, rms)| FitModel::Geometric {
        ratio: slope.exp(),
        r2,
        log_rms: rms,
    });
    let pow = if positive.iter().all(|(j, _)| *j >= 1.0) {
        let xs_pow: Vec<f64> = positive.iter().map(|(j, _)| j.ln()).collect();
        linear_fit(&xs_pow, &ys).map(|(slope, r2, rms)| FitModel::PowerLaw {
            exponent: -slope,
            r2,
            log_rms: rms,
        })
    } else {
        None
    };

    let good = |m: &FitModel| m.r2() >= cfg.min_r2 || m.log_rms() <= cfg.max_log_rms;

    // Prefer the smaller log-space residual; it compares the two models on
    // equal footing.
    let chosen = match (&geo, &pow) {
        (Some(g), Some(p)) => {
            if g.log_rms() <= p.log_rms() {
                Some(*g)
            } else {
                Some(*p)
            }
        }
        (Some(g), None) => Some(*g),
        (None, Some(p)) => Some(*p),
        (None, None) => None,
    };

    let classification = match chosen {
        None => Classification::Inconclusive,
        Some(model) => {
            if !good(&model) {
                Classification::Inconclusive
            } else {
                let verdict = verdict_of(&model, cfg);
                // Two good fits of comparable quality but opposite verdicts:
                // the evidence does not decide.
                if let (Some(g), Some(p)) = (&geo, &pow) {
                    if good(g)
                        && good(p)
                        && verdict_of(g, cfg) != verdict_of(p, cfg)
                        && g.log_rms().max(p.log_rms())
                            <= 1.2 * g.log_rms().min(p.log_rms()) + 1e-12
                    {
                        return (Classification::Inconclusive, chosen, geo, pow);
                    }
                }
                verdict
            }
        }
    };

    (classification, chosen, geo, pow)
}

fn verdict_of(model: &FitModel, cfg: &ClassifyConfig) -> Classification {
    match model {
        FitModel::Geometric { ratio, .. } => {
            if *ratio <= 1.0 - cfg.geometric_margin {
                Classification::Convergent
            } else {
                // Ratio near or above 1: terms do not vanish geometrically;
                // the tail sum of the fitted model diverges.
                Classification::Divergent
            }
        }
        FitModel::PowerLaw { exponent, .. } => {
            if *exponent <= 1.0 + cfg.power_margin {
                Classification::Divergent
            } else {
                Classification::Convergent
            }
        }
    }
}

/// Least-squares line y = a + s x; returns (slope, r2, rms residual).
/// `None` for fewer than three points or a degenerate x spread.
fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 3 {
        return None;
    }
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let pred = mean_y + slope * (x - mean_x);
            (y - pred) * (y - pred)
        })
        .sum();
    let r2 = if ss_tot <= 1e-300 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).max(0.0)
    };
    Some((slope, r2, (ss_res / n).sqrt()))
}
