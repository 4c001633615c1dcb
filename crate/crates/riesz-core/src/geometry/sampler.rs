//! Deterministic samplers turning bounded region descriptors into mollified
//! point clouds.
//!
//! Surface mode decomposes the region boundary into primitive patches
//! (spheres, plane disks, rotation-body lateral surfaces), allocates the point
//! budget by retained area, and lays out each patch with its own quadrature
//! grid. Cell radii follow the local sample spacing, except on rotation-body
//! segments too thin to resolve as rings: those collapse onto the axis and
//! carry the capacity radius of the prolate spheroid with the segment's
//! half-length and the true local tube radius, so thin-needle energies stay
//! faithful at coarse resolution.

use super::{contains_fast, Point, Profile, Region};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Which carrier the sample stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    Surface,
    Volume,
}

/// A weighted-free, mollified point cloud: the discretization carrier for a
/// compact set. `cell_radii[i]` is the mollification radius of point i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub cell_radii: Vec<f64>,
    pub tag: SampleMode,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, cell_radii: Vec<f64>, tag: SampleMode) -> Result<Self> {
        if points.len() != cell_radii.len() {
            return Err(Error::InvalidInput(
                "points and cell radii length mismatch".into(),
            ));
        }
        if cell_radii.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidInput("cell radii must be positive".into()));
        }
        for p in &points {
            p.validate()?;
        }
        Ok(PointCloud {
            points,
            cell_radii,
            tag,
        })
    }

    pub fn empty(tag: SampleMode) -> Self {
        PointCloud {
            points: Vec::new(),
            cell_radii: Vec::new(),
            tag,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// O(n^2) scan; +inf for clouds with fewer than two points.
    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let d = self.points[i].dist(&self.points[j]);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// Concatenate two clouds, dropping points of `other` that land inside a
    /// kept point's cap radius (used to build nested exhaustion clouds from
    /// shells). Pairs closer than the mean cell radius would make the capped
    /// kernel block singular.
    pub fn union_deduped(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        let mut radii = self.cell_radii.clone();
        for (p, d) in other.points.iter().zip(&other.cell_radii) {
            // Shells meet at clip spheres where both sides sampled the same
            // surface; drop anything whose mollification shell overlaps a
            // kept point's.
            let collides = points
                .iter()
                .zip(&radii)
                .any(|(q, dq)| p.dist(q) < 0.95 * (dq + *d));
            if !collides {
                points.push(p.clone());
                radii.push(*d);
            }
        }
        PointCloud {
            points,
            cell_radii: radii,
            tag: self.tag,
        }
    }

    /// CSV with header `x1,...,xn,delta`, >= 15 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",delta\n");
        for (p, d) in self.points.iter().zip(&self.cell_radii) {
            for c in &p.coords {
                out.push_str(&format!("{c:.17e},"));
            }
            out.push_str(&format!("{d:.17e}\n"));
        }
        out
    }

    pub fn from_csv(text: &str, tag: SampleMode) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.last() != Some(&"delta") || cols.len() < 3 {
            return Err(Error::Parse("expected header x1,...,xn,delta".into()));
        }
        let n = cols.len() - 1;
        let mut points = Vec::new();
        let mut radii = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
                })
                .collect::<Result<_>>()?;
            if vals.len() != n + 1 {
                return Err(Error::Parse(format!(
                    "line {}: expected {} fields",
                    lineno + 2,
                    n + 1
                )));
            }
            points.push(Point::new(vals[..n].to_vec()));
            radii.push(vals[n]);
        }
        PointCloud::new(points, radii, tag)
    }
}

// ---------------------------------------------------------------------------
// Deterministic pseudo-randomness (splitmix64): used only for lattice offsets
// and grid phases so clouds vary with the seed but stay bit-reproducible.
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct SplitMix64(u64);

impl SplitMix64 {
    fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

// ---------------------------------------------------------------------------
// Public entry point
// ---------------------------------------------------------------------------

/// Sample a bounded region into a mollified point cloud.
///
/// Deterministic for fixed `(region, resolution, mode, seed)`. Every returned
/// point satisfies `contains(region, p)`. An empty region yields an empty
/// cloud; an unbounded region is rejected.
pub fn sample(
    region: &Region,
    resolution: usize,
    mode: SampleMode,
    seed: u64,
) -> Result<PointCloud> {
    region.validate()?;
    if !region.is_bounded() {
        return Err(Error::UnboundedRegion);
    }
    if resolution == 0 {
        return Ok(PointCloud::empty(mode));
    }
    let n = region.dim()?;
    match mode {
        SampleMode::Volume => sample_volume(region, n, resolution, seed),
        SampleMode::Surface => {
            if n > 3 {
                return Err(Error::InvalidInput(
                    "surface sampling is implemented for n <= 3; use volume mode".into(),
                ));
            }
            sample_surface(region, n, resolution, seed)
        }
    }
}

// ---------------------------------------------------------------------------
// Volume mode: rejection-sampled lattice
// ---------------------------------------------------------------------------

fn sample_volume(region: &Region, n: usize, target: usize, seed: u64) -> Result<PointCloud> {
    let (center, radius) = region.bounding_sphere()?;
    let mut rng = SplitMix64::new(seed ^ 0x5eed_0001);

    // Pilot pass estimates the fill fraction of the bounding box.
    let pilot_per_axis = 14usize;
    let pilot_h = 2.0 * radius / pilot_per_axis as f64;
    let mut hits = 0usize;
    let mut total = 0usize;
    let mut idx = vec![0usize; n];
    loop {
        let p = Point::new(
            (0..n)
                .map(|k| center.coords[k] - radius + (idx[k] as f64 + 0.5) * pilot_h)
                .collect(),
        );
        total += 1;
        if contains_fast(region, &p) {
            hits += 1;
        }
        if !advance(&mut idx, pilot_per_axis) {
            break;
        }
    }
    if hits == 0 {
        return Ok(PointCloud::empty(SampleMode::Volume));
    }
    let fill = hits as f64 / total as f64;
    let box_vol = (2.0 * radius).powi(n as i32);
    let mut h = (fill * box_vol / target as f64).powf(1.0 / n as f64);

    for _pass in 0..2 {
        let offset: Vec<f64> = (0..n).map(|_| rng.next_f64() * h).collect();
        let cloud = lattice_pass(region, n, &center, radius, h, &offset);
        let count = cloud.len();
        if count == 0 {
            // Region thinner than the lattice: nothing to collect.
            return Ok(PointCloud::empty(SampleMode::Volume));
        }
        let ratio = count as f64 / target as f64;
        if (0.75..=1.3).contains(&ratio) || _pass == 1 {
            let radii = vec![h / 2.0; count];
            return PointCloud::new(cloud, radii, SampleMode::Volume);
        }
        h *= ratio.powf(1.0 / n as f64);
    }
    unreachable!()
}

fn lattice_pass(
    region: &Region,
    n: usize,
    center: &Point,
    radius: f64,
    h: f64,
    offset: &[f64],
) -> Vec<Point> {
    let steps = ((2.0 * radius) / h).ceil() as usize + 1;
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let coords: Vec<f64> = (0..n)
            .map(|k| center.coords[k] - radius + offset[k] + idx[k] as f64 * h)
            .collect();
        let p = Point::new(coords);
        if p.dist(center) <= radius && contains_fast(region, &p) {
            out.push(p);
        }
        if !advance(&mut idx, steps) {
            break;
        }
    }
    out
}

fn advance(idx: &mut [usize], limit: usize) -> bool {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < limit {
            return true;
        }
        idx[k] = 0;
    }
    false
}

// ---------------------------------------------------------------------------
// Surface mode: primitive boundary patches
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum Patch {
    /// Full sphere (n = 3) or circle (n = 2), filtered by region membership.
    Sphere { center: Point, radius: f64 },
    /// Annular patch of a plane, laid out on a log-polar grid.
    PlaneDisk {
        origin: Point,
        normal: Vec<f64>,
        r_lo: f64,
        r_hi: f64,
    },
    /// Lateral surface of a rotation body, parameterized by arc length.
    RotationLateral { profile: Profile, axis: usize },
}

impl Patch {
    /// Realization priority class: intrinsically parameterized surfaces win
    /// over clip-on spheres when overlapping candidates collide.
    fn rank(&self) -> u8 {
        match self {
            Patch::RotationLateral { .. } => 0,
            Patch::PlaneDisk { .. } => 1,
            Patch::Sphere { .. } => 2,
        }
    }
}

/// Radial clip constraints accumulated while walking the descriptor tree.
#[derive(Clone, Default)]
struct ClipCtx {
    clips: Vec<(Point, f64, f64)>,
}

fn collect_patches(region: &Region, ctx: &ClipCtx, bound: &(Point, f64), out: &mut Vec<Patch>) {
    match region {
        Region::Ball { center, radius } | Region::SphereShell { center, radius } => {
            out.push(Patch::Sphere {
                center: center.clone(),
                radius: *radius,
            });
        }
        Region::HalfSpace { normal, offset } => {
            // Boundary plane clipped to the bounding sphere.
            let (c_b, r_b) = bound;
            let d: f64 = normal
                .iter()
                .zip(&c_b.coords)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                - offset;
            let plane_r2 = r_b * r_b - d * d;
            if plane_r2 > 0.0 {
                let origin = Point::new(
                    c_b.coords
                        .iter()
                        .zip(normal)
                        .map(|(c, nk)| c - d * nk)
                        .collect(),
                );
                out.push(Patch::PlaneDisk {
                    origin,
                    normal: normal.clone(),
                    r_lo: 0.0,
                    r_hi: plane_r2.sqrt(),
                });
            }
        }
        Region::RotationBody { profile, axis } => {
            out.push(Patch::RotationLateral {
                profile: profile.clone(),
                axis: *axis,
            });
            // Base face at t = 0: the full hyperplane for exploding power
            // profiles, the unit disk otherwise.
            let (c_b, r_b) = bound;
            let mut normal = vec![0.0; 3];
            normal[*axis] = 1.0;
            let d = c_b.coords[*axis];
            let plane_r2 = r_b * r_b - d * d;
            if plane_r2 > 0.0 {
                let mut origin = c_b.clone();
                origin.coords[*axis] = 0.0;
                let cap = match profile {
                    Profile::PowerDecay { s } if *s > 0.0 => f64::INFINITY,
                    _ => 1.0,
                };
                out.push(Patch::PlaneDisk {
                    origin,
                    normal,
                    r_lo: 0.0,
                    r_hi: plane_r2.sqrt().min(cap),
                });
            }
        }
        Region::Complement { inner } => collect_patches(inner, ctx, bound, out),
        Region::Intersection { parts } => {
            for p in parts {
                collect_patches(p, ctx, bound, out);
            }
        }
        Region::AnnulusClip {
            inner,
            center,
            r_lo,
            r_hi,
        } => {
            if *r_lo > 0.0 {
                out.push(Patch::Sphere {
                    center: center.clone(),
                    radius: *r_lo,
                });
            }
            out.push(Patch::Sphere {
                center: center.clone(),
                radius: *r_hi,
            });
            let mut inner_ctx = ctx.clone();
            inner_ctx.clips.push((center.clone(), *r_lo, *r_hi));
            collect_patches(inner, &inner_ctx, bound, out);
        }
    }
}

/// Keep a surface candidate if it, or a hair-offset version of it along the
/// given outward direction, belongs to the region, and if it actually sits on
/// the region's boundary: a candidate whose +-(delta/2) normal offsets both
/// stay inside is interior (e.g. a sphere swallowed by a union) and is
/// rejected. The hair offsets place points of half-open or complemented
/// boundaries just inside the set, so sampler soundness (`contains` = true)
/// holds exactly.
fn accept(region: &Region, p: Point, outward: &[f64], delta: f64) -> Option<Point> {
    let offset = |q: &Point, step: f64| {
        Point::new(
            q.coords
                .iter()
                .zip(outward)
                .map(|(c, o)| c + step * o)
                .collect(),
        )
    };
    let kept = if contains_fast(region, &p) {
        Some(p)
    } else {
        let scale = 1e-9 * p.norm().max(1.0);
        [-scale, scale]
            .into_iter()
            .map(|s| offset(&p, s))
            .find(|q| contains_fast(region, q))
    };
    let q = kept?;
    let step = 0.5 * delta;
    if contains_fast(region, &offset(&q, step)) && contains_fast(region, &offset(&q, -step)) {
        return None;
    }
    Some(q)
}

fn sample_surface(region: &Region, n: usize, target: usize, seed: u64) -> Result<PointCloud> {
    let bound = region.bounding_sphere()?;
    let mut patches = Vec::new();
    collect_patches(region, &ClipCtx::default(), &bound, &mut patches);

    // Fast path: a bare ball/shell keeps the full spherical layout, so the
    // requested resolution is met exactly.
    if patches.len() == 1 {
        if let Patch::Sphere { center, radius } = &patches[0] {
            if matches!(region, Region::Ball { .. } | Region::SphereShell { .. }) {
                let (pts, radii) = sphere_layout(n, center, *radius, target, seed, 0);
                let mut points = Vec::with_capacity(pts.len());
                let mut deltas = Vec::with_capacity(pts.len());
                for (p, d) in pts.into_iter().zip(radii) {
                    let outward: Vec<f64> = p
                        .coords
                        .iter()
                        .zip(&center.coords)
                        .map(|(a, b)| (a - b) / radius)
                        .collect();
                    if let Some(q) = accept(region, p, &outward, d) {
                        points.push(q);
                        deltas.push(d);
                    }
                }
                return PointCloud::new(points, deltas, SampleMode::Surface);
            }
        }
    }

    // Pass 1: estimate each patch's retained weight.
    let mut infos: Vec<PatchInfo> = patches
        .iter()
        .enumerate()
        .map(|(k, p)| patch_info(region, p, &bound, seed ^ (k as u64) << 8))
        .collect();

    let resolved_area: f64 = infos.iter().map(|i| i.area).sum();
    let arc_total: f64 = infos.iter().map(|i| i.arc).sum();
    let h_guess = if resolved_area > 0.0 {
        (resolved_area / target as f64).sqrt()
    } else if arc_total > 0.0 {
        arc_total / target as f64
    } else {
        return Ok(PointCloud::empty(SampleMode::Surface));
    };
    for info in &mut infos {
        info.weight = info.area + info.arc * h_guess;
    }
    let total_weight: f64 = infos.iter().map(|i| i.weight).sum();
    if total_weight <= 0.0 {
        return Ok(PointCloud::empty(SampleMode::Surface));
    }

    // Pass 2: realize patches with proportional budgets. Intrinsic surfaces
    // (lateral, then planes) realize before clip spheres, so the class-aware
    // dedupe keeps them when patches overlap.
    let mut order: Vec<usize> = (0..patches.len()).collect();
    order.sort_by_key(|&k| (patches[k].rank(), k));
    let mut points = Vec::new();
    let mut radii = Vec::new();
    let mut ids = Vec::new();
    for &k in &order {
        let (patch, info) = (&patches[k], &infos[k]);
        if info.weight <= 0.0 {
            continue;
        }
        let budget = ((target as f64 * info.weight / total_weight).round() as usize).max(4);
        let before = points.len();
        realize_patch(
            region,
            patch,
            info,
            &bound,
            budget,
            seed ^ ((k as u64) << 8),
            &mut points,
            &mut radii,
        );
        ids.resize(points.len(), k as u32);
        debug_assert!(points.len() >= before);
    }

    dedupe(&mut points, &mut radii, &ids);
    PointCloud::new(points, radii, SampleMode::Surface)
}

struct PatchInfo {
    /// Retained genuine surface area (pilot estimate).
    area: f64,
    /// Retained arc length of collapsed (sub-resolution) rotation segments.
    arc: f64,
    weight: f64,
    /// Marching table for lateral patches: (t, rho, cumulative arc, active).
    march: Vec<MarchNode>,
}

#[derive(Clone, Copy)]
struct MarchNode {
    t: f64,
    seg_arc: f64,
    active: bool,
}

fn patch_info(region: &Region, patch: &Patch, bound: &(Point, f64), seed: u64) -> PatchInfo {
    match patch {
        Patch::Sphere { center, radius } => {
            let pilot = 512;
            let (pts, ds) = sphere_layout(center.dim(), center, *radius, pilot, seed, 1);
            let kept = pts
                .into_iter()
                .zip(&ds)
                .filter(|(p, d)| {
                    let outward: Vec<f64> = p
                        .coords
                        .iter()
                        .zip(&center.coords)
                        .map(|(a, b)| (a - b) / radius)
                        .collect();
                    accept(region, p.clone(), &outward, **d).is_some()
                })
                .count();
            let full_area = if center.dim() == 2 {
                2.0 * std::f64::consts::PI * radius
            } else {
                4.0 * std::f64::consts::PI * radius * radius
            };
            PatchInfo {
                area: full_area * kept as f64 / pilot as f64,
                arc: 0.0,
                weight: 0.0,
                march: Vec::new(),
            }
        }
        Patch::PlaneDisk {
            origin,
            normal,
            r_lo,
            r_hi,
        } => {
            let (lo, hi) = plane_window(origin, normal, *r_lo, *r_hi, region);
            if hi <= lo {
                return PatchInfo {
                    area: 0.0,
                    arc: 0.0,
                    weight: 0.0,
                    march: Vec::new(),
                };
            }
            let pilot = 512;
            let (pts, ds) = plane_layout(origin, normal, lo, hi, pilot, seed);
            let kept = pts
                .into_iter()
                .zip(&ds)
                .filter(|(p, d)| accept(region, p.clone(), normal, **d).is_some())
                .count();
            let area = std::f64::consts::PI * (hi * hi - lo * lo);
            PatchInfo {
                area: area * kept as f64 / pilot as f64,
                arc: 0.0,
                weight: 0.0,
                march: Vec::new(),
            }
        }
        Patch::RotationLateral { profile, axis } => {
            let march = march_profile(region, profile, *axis, bound);
            let mut area = 0.0;
            let mut arc = 0.0;
            for node in &march {
                if node.active {
                    let rho = profile.rho(node.t);
                    let circ = 2.0 * std::f64::consts::PI * rho;
                    // Genuine area where the ring is wide, arc where it is a
                    // needle; the split threshold is refined at realization.
                    area += circ.min(1e300) * node.seg_arc;
                    arc += node.seg_arc;
                }
            }
            PatchInfo {
                area,
                arc,
                weight: 0.0,
                march,
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn realize_patch(
    region: &Region,
    patch: &Patch,
    info: &PatchInfo,
    _bound: &(Point, f64),
    budget: usize,
    seed: u64,
    points: &mut Vec<Point>,
    radii: &mut Vec<f64>,
) {
    match patch {
        Patch::Sphere { center, radius } => {
            let frac = if info.area > 0.0 {
                let full = if center.dim() == 2 {
                    2.0 * std::f64::consts::PI * radius
                } else {
                    4.0 * std::f64::consts::PI * radius * radius
                };
                (info.area / full).clamp(1e-4, 1.0)
            } else {
                return;
            };
            let generate = ((budget as f64 / frac).round() as usize).clamp(budget, 60_000);
            let (pts, ds) = sphere_layout(center.dim(), center, *radius, generate, seed, 2);
            for (p, d) in pts.into_iter().zip(ds) {
                let outward: Vec<f64> = p
                    .coords
                    .iter()
                    .zip(&center.coords)
                    .map(|(a, b)| (a - b) / radius)
                    .collect();
                if let Some(q) = accept(region, p, &outward, d) {
                    points.push(q);
                    radii.push(d);
                }
            }
        }
        Patch::PlaneDisk {
            origin,
            normal,
            r_lo,
            r_hi,
        } => {
            let (lo, hi) = plane_window(origin, normal, *r_lo, *r_hi, region);
            if hi <= lo {
                return;
            }
            let (pts, ds) = plane_layout(origin, normal, lo, hi, budget, seed);
            for (p, d) in pts.into_iter().zip(ds) {
                if let Some(q) = accept(region, p, normal, d) {
                    points.push(q);
                    radii.push(d);
                }
            }
        }
        Patch::RotationLateral { profile, axis } => {
            realize_lateral(region, profile, *axis, &info.march, budget, seed, points, radii);
        }
    }
}

// --- sphere layout ---------------------------------------------------------

/// Fibonacci layout on the sphere (n = 3) or uniform angles on the circle
/// (n = 2). Cell radius = half the mean sample spacing of the layout.
fn sphere_layout(
    n: usize,
    center: &Point,
    radius: f64,
    count: usize,
    seed: u64,
    stream: u64,
) -> (Vec<Point>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed ^ (stream << 32) ^ 0x5eed_0002);
    let phase = rng.next_f64() * std::f64::consts::TAU;
    let mut pts = Vec::with_capacity(count);
    if count == 0 {
        return (pts, Vec::new());
    }
    let delta;
    if n == 2 {
        let step = std::f64::consts::TAU / count as f64;
        for i in 0..count {
            let a = phase + i as f64 * step;
            pts.push(Point::new(vec![
                center.coords[0] + radius * a.cos(),
                center.coords[1] + radius * a.sin(),
            ]));
        }
        delta = 0.5 * radius * step;
    } else {
        let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        for i in 0..count {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r_xy = (1.0 - z * z).sqrt();
            let a = phase + golden * i as f64;
            pts.push(Point::new(vec![
                center.coords[0] + radius * r_xy * a.cos(),
                center.coords[1] + radius * r_xy * a.sin(),
                center.coords[2] + radius * z,
            ]));
        }
        delta = 0.5 * (4.0 * std::f64::consts::PI * radius * radius / count as f64).sqrt();
    }
    let ds = vec![delta; pts.len()];
    (pts, ds)
}

// --- plane layout ----------------------------------------------------------

/// Tighten the radial window of a plane patch against the annular clips of
/// the region (exact when clip centers project onto the grid origin).
fn plane_window(origin: &Point, normal: &[f64], r_lo: f64, r_hi: f64, region: &Region) -> (f64, f64) {
    let mut lo = r_lo;
    let mut hi = r_hi;
    let mut clips = Vec::new();
    gather_clips(region, &mut clips);
    for (c, c_lo, c_hi) in clips {
        let d_perp: f64 = normal
            .iter()
            .zip(c.coords.iter().zip(&origin.coords))
            .map(|(nk, (ck, ok))| nk * (ck - ok))
            .sum();
        // In-plane distance from the grid origin to the projected clip center.
        let proj_offset = {
            let d2: f64 = c
                .coords
                .iter()
                .zip(&origin.coords)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2 - d_perp * d_perp).max(0.0).sqrt()
        };
        let s_hi2 = c_hi * c_hi - d_perp * d_perp;
        if s_hi2 <= 0.0 {
            return (0.0, 0.0);
        }
        let s_hi = s_hi2.sqrt();
        let s_lo = (c_lo * c_lo - d_perp * d_perp).max(0.0).sqrt();
        // Conservative when the projection is off-center.
        hi = hi.min(proj_offset + s_hi);
        if proj_offset < s_lo {
            lo = lo.max(s_lo - proj_offset);
        }
    }
    (lo, hi)
}

fn gather_clips(region: &Region, out: &mut Vec<(Point, f64, f64)>) {
    match region {
        Region::AnnulusClip {
            inner,
            center,
            r_lo,
            r_hi,
        } => {
            out.push((center.clone(), *r_lo, *r_hi));
            gather_clips(inner, out);
        }
        Region::Complement { inner } => gather_clips(inner, out),
        Region::Intersection { parts } => {
            for p in parts {
                gather_clips(p, out);
            }
        }
        _ => {}
    }
}

/// Log-polar grid on the plane annulus [lo, hi] around `origin` (n = 3).
/// Cells are near-square in (log r, angle), so resolution is graded toward
/// the center, which is where sweep sources concentrate harmonic mass.
fn plane_layout(
    origin: &Point,
    normal: &[f64],
    lo: f64,
    hi: f64,
    count: usize,
    seed: u64,
) -> (Vec<Point>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed ^ 0x5eed_0003);
    let (u, v) = plane_basis(normal);
    let r0 = if lo > 0.0 { lo } else { hi * 1e-2 };
    let span = (hi / r0).ln().max(1e-6);
    let lambda = (std::f64::consts::TAU * span / count.max(8) as f64).sqrt();
    let rings = (span / lambda).ceil().max(1.0) as usize;
    let m = ((std::f64::consts::TAU / lambda).round() as usize).max(5);
    let mut pts = Vec::new();
    let mut ds = Vec::new();
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let base_phase = rng.next_f64() * std::f64::consts::TAU;
    for k in 0..rings {
        let r = r0 * ((k as f64 + 0.5) * span / rings as f64).exp();
        if r >= hi {
            continue;
        }
        let phase = base_phase + golden * k as f64;
        let delta = 0.5 * (r * span / rings as f64).min(std::f64::consts::TAU * r / m as f64);
        for i in 0..m {
            let a = phase + std::f64::consts::TAU * i as f64 / m as f64;
            let coords: Vec<f64> = origin
                .coords
                .iter()
                .enumerate()
                .map(|(d, o)| o + r * (a.cos() * u[d] + a.sin() * v[d]))
                .collect();
            pts.push(Point::new(coords));
            ds.push(delta);
        }
    }
    if lo == 0.0 {
        pts.push(origin.clone());
        ds.push(0.5 * r0);
    }
    (pts, ds)
}

fn plane_basis(normal: &[f64]) -> (Vec<f64>, Vec<f64>) {
    // Pick the coordinate axis least aligned with the normal.
    let k = (0..3)
        .min_by(|&a, &b| normal[a].abs().partial_cmp(&normal[b].abs()).unwrap())
        .unwrap();
    let mut e = vec![0.0; 3];
    e[k] = 1.0;
    let mut u = cross(&e, normal);
    let nu = (u.iter().map(|c| c * c).sum::<f64>()).sqrt();
    for c in &mut u {
        *c /= nu;
    }
    let v = cross(normal, &u);
    (u, v)
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

// --- rotation-body lateral layout -------------------------------------------

/// Capacity radius of the prolate spheroid with semi-axes (a, b), b given
/// through its logarithm so exponentially thin tubes stay representable.
/// A mollified atom with this cell radius has the self-energy of the spheroid,
/// which is what a segment of a thin tube contributes to the energy form.
fn spheroid_capacity(a: f64, ln_b: f64) -> f64 {
    let b = ln_b.exp();
    if b >= a {
        return a;
    }
    let e = (a * a - b * b).max(0.0).sqrt();
    let denom = (a + e).ln() - ln_b;
    (e / denom).clamp(f64::MIN_POSITIVE, a)
}

fn march_profile(
    region: &Region,
    profile: &Profile,
    axis: usize,
    bound: &(Point, f64),
) -> Vec<MarchNode> {
    let (c_b, r_b) = bound;
    let t_max = (c_b.norm() + r_b) * (1.0 + 1e-9);
    // Smallest axial coordinate at which the lateral surface can still lie
    // inside the bounding sphere.
    let t_min = match profile {
        Profile::PowerDecay { s } if *s > 0.0 => t_max.powf(-1.0 / s).min(t_max) * 0.99,
        _ => 0.0,
    };
    let grid_n = 4000usize;
    let mut ts: Vec<f64> = Vec::with_capacity(2 * grid_n);
    let log_start = if t_min > 0.0 { t_min } else { t_max * 1e-8 };
    for i in 0..=grid_n {
        ts.push(log_start * (t_max / log_start).powf(i as f64 / grid_n as f64));
        ts.push(t_max * i as f64 / grid_n as f64);
    }
    ts.retain(|t| *t > 0.0 && *t <= t_max);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();

    let mut nodes = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let tm = 0.5 * (t0 + t1);
        let rho0 = profile.rho(t0).min(1e300);
        let rho1 = profile.rho(t1).min(1e300);
        let seg = ((t1 - t0).powi(2) + (rho1 - rho0).powi(2)).sqrt();
        let active = ring_active(region, profile, axis, tm);
        nodes.push(MarchNode {
            t: tm,
            seg_arc: seg,
            active,
        });
    }
    nodes
}

fn ring_active(region: &Region, profile: &Profile, axis: usize, t: f64) -> bool {
    let rho = profile.rho(t);
    for angle in [0.0, 1.5707963267948966, std::f64::consts::PI, 4.71238898038469] {
        let p = ring_point(axis, t, rho, angle);
        if contains_fast(region, &p) {
            return true;
        }
        // Hair inside the surface, for half-open clip boundaries.
        let p_in = ring_point(axis, t, rho * (1.0 - 1e-9), angle);
        if contains_fast(region, &p_in) {
            return true;
        }
    }
    // Degenerate tube: test the axis itself.
    rho < 1e-12 && contains_fast(region, &ring_point(axis, t, 0.0, 0.0))
}

fn ring_point(axis: usize, t: f64, rho: f64, angle: f64) -> Point {
    let mut coords = vec![0.0; 3];
    coords[axis] = t;
    let others: Vec<usize> = (0..3).filter(|i| *i != axis).collect();
    coords[others[0]] = rho * angle.cos();
    coords[others[1]] = rho * angle.sin();
    Point::new(coords)
}

#[allow(clippy::too_many_arguments)]
fn realize_lateral(
    region: &Region,
    profile: &Profile,
    axis: usize,
    march: &[MarchNode],
    budget: usize,
    seed: u64,
    points: &mut Vec<Point>,
    radii: &mut Vec<f64>,
) {
    let total_arc: f64 = march.iter().filter(|n| n.active).map(|n| n.seg_arc).sum();
    if total_arc <= 0.0 {
        return;
    }

    // Find the station spacing whose total point count matches the budget.
    let count_for = |ds: f64| -> usize {
        stations(march, ds)
            .iter()
            .map(|st| ring_count(profile, st.t, ds, budget))
            .sum()
    };
    let mut lo = total_arc / (20.0 * budget as f64);
    let mut hi = total_arc * 2.0;
    for _ in 0..50 {
        let mid = (lo * hi).sqrt();
        if count_for(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ds = hi;

    let mut rng = SplitMix64::new(seed ^ 0x5eed_0004);
    let base_phase = rng.next_f64() * std::f64::consts::TAU;
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    for (si, st) in stations(march, ds).iter().enumerate() {
        let rho = profile.rho(st.t);
        let m = ring_count(profile, st.t, ds, budget);
        if m == 1 {
            // Sub-resolution tube: collapse the ring onto the axis and let the
            // cell radius carry the segment's spheroid capacity.
            let p = ring_point(axis, st.t, 0.0, 0.0);
            if contains_fast(region, &p) {
                points.push(p);
                radii.push(spheroid_capacity(0.5 * st.span, profile.ln_rho(st.t)));
            }
            continue;
        }
        let phase = base_phase + golden * si as f64;
        let ring_spacing = 2.0 * rho * (std::f64::consts::PI / m as f64).sin();
        let delta = 0.5 * ring_spacing.min(st.span);
        for i in 0..m {
            let a = phase + std::f64::consts::TAU * i as f64 / m as f64;
            let p = ring_point(axis, st.t, rho, a);
            let outward = {
                let mut o = vec![0.0; 3];
                let others: Vec<usize> = (0..3).filter(|k| *k != axis).collect();
                o[others[0]] = a.cos();
                o[others[1]] = a.sin();
                o
            };
            if let Some(q) = accept(region, p, &outward, delta) {
                points.push(q);
                radii.push(delta);
            }
        }
    }
}

struct Station {
    t: f64,
    span: f64,
}

/// Arc-length-uniform station centers within the active intervals.
fn stations(march: &[MarchNode], ds: f64) -> Vec<Station> {
    let mut out = Vec::new();
    let mut run: Vec<&MarchNode> = Vec::new();
    let flush = |run: &mut Vec<&MarchNode>, out: &mut Vec<Station>| {
        if run.is_empty() {
            return;
        }
        let arc: f64 = run.iter().map(|n| n.seg_arc).sum();
        let k = ((arc / ds).round() as usize).max(1);
        let step = arc / k as f64;
        let mut want = 0.5 * step;
        let mut acc = 0.0;
        let mut idx = 0;
        for _ in 0..k {
            while idx < run.len() && acc + run[idx].seg_arc < want {
                acc += run[idx].seg_arc;
                idx += 1;
            }
            let node = run[idx.min(run.len() - 1)];
            out.push(Station {
                t: node.t,
                span: step,
            });
            want += step;
        }
        run.clear();
    };
    for node in march {
        if node.active {
            run.push(node);
        } else {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);
    out
}

fn ring_count(profile: &Profile, t: f64, ds: f64, cap: usize) -> usize {
    let circ = 2.0 * std::f64::consts::PI * profile.rho(t).min(1e300);
    if circ < 3.0 * ds {
        1
    } else {
        ((circ / ds).round() as usize).clamp(3, cap.max(3))
    }
}

// --- assembly ---------------------------------------------------------------

fn dedupe(points: &mut Vec<Point>, radii: &mut Vec<f64>, ids: &[u32]) {
    let mut keep = vec![true; points.len()];
    for i in 0..points.len() {
        if !keep[i] {
            continue;
        }
        for j in (i + 1)..points.len() {
            if !keep[j] {
                continue;
            }
            // Within one patch, only pairs inside the mean cap radius are
            // fatal (they make the capped kernel block singular). Across
            // patches, surfaces can double-cover the same thin sheet or meet
            // at creases with interleaved points, so anything with
            // overlapping mollification shells collapses onto the earlier
            // (intrinsic) patch.
            let tol = if ids[i] == ids[j] {
                0.4995 * (radii[i] + radii[j])
            } else {
                0.95 * (radii[i] + radii[j])
            };
            if points[i].dist(&points[j]) < tol {
                keep[j] = false;
            }
        }
    }
    let mut p_new = Vec::with_capacity(points.len());
    let mut r_new = Vec::with_capacity(points.len());
    for (k, (p, r)) in points.drain(..).zip(radii.drain(..)).enumerate() {
        if keep[k] {
            p_new.push(p);
            r_new.push(r);
        }
    }
    *points = p_new;
    *radii = r_new;
}
