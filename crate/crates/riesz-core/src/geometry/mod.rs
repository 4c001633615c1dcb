//! Region descriptors for subsets of R^n: membership tests, sphere inversion,
//! annular slicing, and deterministic samplers.
//!
//! Regions are small algebraic descriptor trees (balls, half-spaces, rotation
//! bodies, complements, intersections, annular clips). All numerics downstream
//! operate on compact sets only, so unbounded descriptors must be clipped with
//! [`annular_slice`] or an explicit [`Region::AnnulusClip`] before sampling.

mod sampler;

pub use sampler::{sample, PointCloud, SampleMode};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point of R^n. Coordinates are plain Euclidean, dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "ambient dimension must be >= 2, got {}",
                self.coords.len()
            )));
        }
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Radial profile of a rotation body: the cross-section radius as a function
/// of the (nonnegative) axial coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// rho(t) = t^(-s), s >= 0. For s > 0 the radius blows up as t -> 0, so
    /// the body contains the whole hyperplane {t = 0}.
    PowerDecay { s: f64 },
    /// rho(t) = exp(-t^s), s > 0.
    ExpDecay { s: f64 },
}

impl Profile {
    /// ln rho(t) for t > 0, computed analytically so it stays finite even
    /// where rho itself under/overflows f64.
    pub fn ln_rho(&self, t: f64) -> f64 {
        match self {
            Profile::PowerDecay { s } => -s * t.ln(),
            Profile::ExpDecay { s } => -t.powf(*s),
        }
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.ln_rho(t).exp()
    }

    /// d rho / dt, via rho'(t) = rho(t) * (ln rho)'(t).
    pub fn drho(&self, t: f64) -> f64 {
        let rho = self.rho(t);
        match self {
            Profile::PowerDecay { s } => -s * rho / t,
            Profile::ExpDecay { s } => -s * t.powf(s - 1.0) * rho,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::PowerDecay { s } if *s >= 0.0 && s.is_finite() => Ok(()),
            Profile::ExpDecay { s } if *s > 0.0 && s.is_finite() => Ok(()),
            _ => Err(Error::InvalidInput("invalid rotation-body profile".into())),
        }
    }
}

/// Algebraic set descriptor standing in for A, a subset of R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Closed solid ball {|x - center| <= radius}.
    Ball { center: Point, radius: f64 },
    /// Closed half-space {normal . x >= offset}, with unit normal.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// The sphere {|x - center| = radius} (a surface, no interior).
    SphereShell { center: Point, radius: f64 },
    /// Solid of revolution {t >= 0, r_perp <= rho(t)} about a coordinate
    /// axis, where t is the axial coordinate. Defined for n = 3 only.
    RotationBody { profile: Profile, axis: usize },
    Complement { inner: Box<Region> },
    Intersection { parts: Vec<Region> },
    /// inner intersected with the half-open annulus {r_lo <= |x - center| < r_hi}.
    AnnulusClip {
        inner: Box<Region>,
        center: Point,
        r_lo: f64,
        r_hi: f64,
    },
}

/// Relative tolerance for membership on measure-zero surfaces (sphere shells).
const SHELL_TOL: f64 = 1e-9;

impl Region {
    pub fn ball(center: Point, radius: f64) -> Region {
        Region::Ball { center, radius }
    }

    pub fn unit_ball(n: usize) -> Region {
        Region::Ball {
            center: Point::new(vec![0.0; n]),
            radius: 1.0,
        }
    }

    /// The paper-style rotation body with power-law profile on the first axis.
    pub fn rotation_body_power(s: f64) -> Region {
        Region::RotationBody {
            profile: Profile::PowerDecay { s },
            axis: 0,
        }
    }

    /// The paper-style rotation body with exponential profile on the first axis.
    pub fn rotation_body_exp(s: f64) -> Region {
        Region::RotationBody {
            profile: Profile::ExpDecay { s },
            axis: 0,
        }
    }

    pub fn complement(inner: Region) -> Region {
        Region::Complement {
            inner: Box::new(inner),
        }
    }

    /// Ambient dimension implied by the descriptor tree.
    pub fn dim(&self) -> Result<usize> {
        match self {
            Region::Ball { center, .. } | Region::SphereShell { center, .. } => Ok(center.dim()),
            Region::HalfSpace { normal, .. } => Ok(normal.len()),
            Region::RotationBody { .. } => Ok(3),
            Region::Complement { inner } => inner.dim(),
            Region::Intersection { parts } => {
                let mut dim = None;
                for p in parts {
                    let d = p.dim()?;
                    match dim {
                        None => dim = Some(d),
                        Some(d0) if d0 != d => {
                            return Err(Error::DimensionMismatch {
                                expected: d0,
                                got: d,
                            })
                        }
                        _ => {}
                    }
                }
                dim.ok_or_else(|| Error::InvalidInput("empty intersection".into()))
            }
            Region::AnnulusClip { inner, center, .. } => {
                let d = inner.dim()?;
                if d != center.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: center.dim(),
                    });
                }
                Ok(d)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim()?;
        if n < 2 {
            return Err(Error::InvalidInput("ambient dimension must be >= 2".into()));
        }
        self.validate_inner(n)
    }

    fn validate_inner(&self, n: usize) -> Result<()> {
        match self {
            Region::Ball { center, radius } | Region::SphereShell { center, radius } => {
                center.validate()?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidInput("radius must be positive".into()));
                }
                Ok(())
            }
            Region::HalfSpace { normal, offset } => {
                let norm = normal.iter().map(|c| c * c).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput("half-space normal must be unit".into()));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidInput("half-space offset not finite".into()));
                }
                Ok(())
            }
            Region::RotationBody { profile, axis } => {
                if n != 3 {
                    return Err(Error::InvalidInput(
                        "rotation bodies are defined for n = 3 only".into(),
                    ));
                }
                if *axis >= 3 {
                    return Err(Error::InvalidInput("rotation axis out of range".into()));
                }
                profile.validate()
            }
            Region::Complement { inner } => inner.validate_inner(n),
            Region::Intersection { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidInput("empty intersection".into()));
                }
                for p in parts {
                    p.validate_inner(n)?;
                }
                Ok(())
            }
            Region::AnnulusClip {
                inner,
                center,
                r_lo,
                r_hi,
            } => {
                center.validate()?;
                if !(*r_lo >= 0.0 && r_hi.is_finite() && r_hi > r_lo) {
                    return Err(Error::InvalidInput(
                        "annulus clip requires 0 <= r_lo < r_hi < inf".into(),
                    ));
                }
                inner.validate_inner(n)
            }
        }
    }

    fn contains_unchecked(&self, p: &Point) -> bool {
        match self {
            Region::Ball { center, radius } => p.dist(center) <= *radius,
            Region::HalfSpace { normal, offset } => {
                let dot: f64 = normal.iter().zip(&p.coords).map(|(a, b)| a * b).sum();
                dot >= *offset
            }
            Region::SphereShell { center, radius } => {
                (p.dist(center) - radius).abs() <= SHELL_TOL * radius.max(1.0)
            }
            Region::RotationBody { profile, axis } => {
                let t = p.coords[*axis];
                if t < 0.0 {
                    return false;
                }
                let r2: f64 = p
                    .coords
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i != axis)
                    .map(|(_, c)| c * c)
                    .sum();
                if r2 == 0.0 {
                    return true;
                }
                if t == 0.0 {
                    // rho(0) is +inf for power decay with s > 0, 1 otherwise.
                    return match profile {
                        Profile::PowerDecay { s } if *s > 0.0 => true,
                        _ => r2 <= 1.0,
                    };
                }
                // Compare in log scale: r_perp <= rho(t).
                0.5 * r2.ln() <= profile.ln_rho(t)
            }
            Region::Complement { inner } => !inner.contains_unchecked(p),
            Region::Intersection { parts } => parts.iter().all(|r| r.contains_unchecked(p)),
            Region::AnnulusClip {
                inner,
                center,
                r_lo,
                r_hi,
            } => {
                let d = p.dist(center);
                *r_lo <= d && d < *r_hi && inner.contains_unchecked(p)
            }
        }
    }

    /// Whether the descriptor denotes a bounded set.
    pub fn is_bounded(&self) -> bool {
        match self {
            Region::Ball { .. } | Region::SphereShell { .. } | Region::AnnulusClip { .. } => true,
            Region::HalfSpace { .. } | Region::RotationBody { .. } | Region::Complement { .. } => {
                false
            }
            Region::Intersection { parts } => parts.iter().any(|r| r.is_bounded()),
        }
    }

    /// A sphere enclosing the region (center, radius). Only defined for
    /// bounded descriptors.
    pub fn bounding_sphere(&self) -> Result<(Point, f64)> {
        match self {
            Region::Ball { center, radius } | Region::SphereShell { center, radius } => {
                Ok((center.clone(), *radius))
            }
            Region::AnnulusClip { center, r_hi, .. } => Ok((center.clone(), *r_hi)),
            Region::Intersection { parts } => {
                let mut best: Option<(Point, f64)> = None;
                for p in parts.iter().filter(|r| r.is_bounded()) {
                    let (c, r) = p.bounding_sphere()?;
                    if best.as_ref().map_or(true, |(_, br)| r < *br) {
                        best = Some((c, r));
                    }
                }
                best.ok_or(Error::UnboundedRegion)
            }
            _ => Err(Error::UnboundedRegion),
        }
    }
}

/// Membership test: true iff `p` satisfies the descriptor predicate.
pub fn contains(region: &Region, p: &Point) -> Result<bool> {
    let n = region.dim()?;
    if p.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.dim(),
        });
    }
    Ok(region.contains_unchecked(p))
}

/// Membership without the per-call dimension check, for validated inner loops.
pub(crate) fn contains_fast(region: &Region, p: &Point) -> bool {
    region.contains_unchecked(p)
}

/// Inversion with respect to the unit sphere centered at `center`:
/// x* lies on the ray from the center through x with |x - c| |x* - c| = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inversion {
    pub center: Point,
}

impl Inversion {
    pub fn new(center: Point) -> Self {
        Inversion { center }
    }

    pub fn invert(&self, p: &Point) -> Result<Point> {
        if p.dim() != self.center.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.center.dim(),
                got: p.dim(),
            });
        }
        let d2: f64 = p
            .coords
            .iter()
            .zip(&self.center.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 == 0.0 {
            return Err(Error::InversionPole);
        }
        let coords = p
            .coords
            .iter()
            .zip(&self.center.coords)
            .map(|(a, b)| b + (a - b) / d2)
            .collect();
        Ok(Point::new(coords))
    }
}

/// The j-th annulus of the geometric family `q^j <= |x - y| < q^(j+1)`,
/// intersected with `region`. Requires q > 1; shrinking families (q < 1,
/// regularity at a point) are assembled directly by the Wiener machinery.
pub fn annular_slice(region: &Region, y: &Point, q: f64, j: u32) -> Result<Region> {
    if !(q > 1.0) {
        return Err(Error::InvalidInput(format!(
            "annular_slice requires q > 1, got {q}"
        )));
    }
    y.validate()?;
    let r_lo = q.powi(j as i32);
    let r_hi = q.powi(j as i32 + 1);
    Ok(Region::AnnulusClip {
        inner: Box::new(region.clone()),
        center: y.clone(),
        r_lo,
        r_hi,
    })
}
