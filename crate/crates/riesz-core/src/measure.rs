//! Discrete positive measures: weighted, mollified point clouds standing in
//! for positive Radon measures with finite support, plus the exact Kelvin
//! transform under sphere inversion.

use crate::error::{Error, Result};
use crate::geometry::{contains, Inversion, Point, PointCloud, Region, SampleMode};
use crate::kernel::RieszParams;
use serde::{Deserialize, Serialize};

/// A finitely supported positive measure: atom i sits at `cloud.points[i]`
/// with mass `weights[i] >= 0` and mollification radius `cloud.cell_radii[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub cloud: PointCloud,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(cloud: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if cloud.len() != weights.len() {
            return Err(Error::InvalidInput(
                "weights length must match cloud length".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        Ok(DiscreteMeasure { cloud, weights })
    }

    pub fn empty(tag: SampleMode) -> Self {
        DiscreteMeasure {
            cloud: PointCloud::empty(tag),
            weights: Vec::new(),
        }
    }

    /// Uniform weights summing to `mass` on a cloud.
    pub fn uniform(cloud: PointCloud, mass: f64) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::InvalidInput(
                "uniform measure needs a nonempty cloud".into(),
            ));
        }
        let w = mass / cloud.len() as f64;
        let weights = vec![w; cloud.len()];
        DiscreteMeasure::new(cloud, weights)
    }

    /// Single mollified atom of the given positive mass at `p`.
    pub fn mollified_dirac(p: Point, mass: f64, delta: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidInput("dirac mass must be positive".into()));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput("dirac radius must be positive".into()));
        }
        p.validate()?;
        let cloud = PointCloud::new(vec![p], vec![delta], SampleMode::Volume)?;
        DiscreteMeasure::new(cloud, vec![mass])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Atoms with strictly positive weight: the support of the measure.
    pub fn support(&self) -> impl Iterator<Item = (&Point, f64, f64)> {
        self.cloud
            .points
            .iter()
            .zip(&self.cloud.cell_radii)
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|((p, d), w)| (p, *d, *w))
    }

    /// Restriction to a region: keeps exactly the atoms whose points satisfy
    /// the membership predicate, weights unchanged.
    pub fn restrict(&self, region: &Region) -> Result<DiscreteMeasure> {
        let mut points = Vec::new();
        let mut radii = Vec::new();
        let mut weights = Vec::new();
        for ((p, d), w) in self
            .cloud
            .points
            .iter()
            .zip(&self.cloud.cell_radii)
            .zip(&self.weights)
        {
            if contains(region, p)? {
                points.push(p.clone());
                radii.push(*d);
                weights.push(*w);
            }
        }
        Ok(DiscreteMeasure {
            cloud: PointCloud {
                points,
                cell_radii: radii,
                tag: self.cloud.tag,
            },
            weights,
        })
    }

    /// Kelvin transform under inversion in the unit sphere at `inv.center`:
    /// an atom at x with weight w maps to J(x) with weight w |x - y|^(alpha-n).
    /// Cell radii scale by the local metric factor 1/|x - y|^2 of the
    /// inversion, keeping regularization consistent with the image geometry.
    pub fn kelvin_transform(
        &self,
        inv: &Inversion,
        params: &RieszParams,
    ) -> Result<DiscreteMeasure> {
        let mut points = Vec::with_capacity(self.len());
        let mut radii = Vec::with_capacity(self.len());
        let mut weights = Vec::with_capacity(self.len());
        for ((p, d), w) in self
            .cloud
            .points
            .iter()
            .zip(&self.cloud.cell_radii)
            .zip(&self.weights)
        {
            let r = p.dist(&inv.center);
            if r == 0.0 {
                return Err(Error::InversionPole);
            }
            points.push(inv.invert(p)?);
            radii.push(d / (r * r));
            weights.push(w * r.powf(params.exponent()));
        }
        Ok(DiscreteMeasure {
            cloud: PointCloud {
                points,
                cell_radii: radii,
                tag: self.cloud.tag,
            },
            weights,
        })
    }

    /// CSV with header `x1,...,xn,delta,weight`, >= 15 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.cloud.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",delta,weight\n");
        for ((p, d), w) in self
            .cloud
            .points
            .iter()
            .zip(&self.cloud.cell_radii)
            .zip(&self.weights)
        {
            for c in &p.coords {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{d:.17e},{w:.17e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, tag: SampleMode) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 4 || cols[cols.len() - 2] != "delta" || cols[cols.len() - 1] != "weight" {
            return Err(Error::Parse("expected header x1,...,xn,delta,weight".into()));
        }
        let n = cols.len() - 2;
        let mut points = Vec::new();
        let mut radii = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
                })
                .collect::<Result<_>>()?;
            if vals.len() != n + 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields",
                    lineno + 2,
                    n + 2
                )));
            }
            points.push(Point::new(vals[..n].to_vec()));
            radii.push(vals[n]);
            weights.push(vals[n + 1]);
        }
        let cloud = PointCloud::new(points, radii, tag)?;
        DiscreteMeasure::new(cloud, weights)
    }
}

/// Hahn-Jordan style split of a signed measure into positive and negative
/// parts; potentials evaluate as the difference of the parts' potentials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignedDecomposition {
    pub plus: DiscreteMeasure,
    pub minus: DiscreteMeasure,
}

impl SignedDecomposition {
    pub fn new(plus: DiscreteMeasure, minus: DiscreteMeasure) -> Self {
        SignedDecomposition { plus, minus }
    }

    pub fn total(&self) -> f64 {
        self.plus.total_mass() - self.minus.total_mass()
    }

    pub fn potential_at(&self, p: &Point, params: &RieszParams) -> f64 {
        crate::kernel::potential(&self.plus, p, params)
            - crate::kernel::potential(&self.minus, p, params)
    }
}
