//! Shared builders for the criterion benchmarks.

use riesz_core::geometry::{sample, Region, SampleMode};
use riesz_core::PointCloud;

/// Unit-sphere cloud of the given size, fixed seed.
pub fn sphere_cloud(n: usize) -> PointCloud {
    sample(&Region::unit_ball(3), n, SampleMode::Surface, 42).expect("sample sphere")
}
