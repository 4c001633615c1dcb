//! Membership, inversion, slicing, and sampler contract tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_core::geometry::{
    annular_slice, contains, sample, Inversion, Point, Region, SampleMode,
};

fn p3(x: f64, y: f64, z: f64) -> Point {
    Point::new(vec![x, y, z])
}

#[test]
fn ball_contains_center() {
    let ball = Region::unit_ball(3);
    assert!(contains(&ball, &p3(0.0, 0.0, 0.0)).unwrap());
}

#[test]
fn power_body_membership_by_direct_substitution() {
    // rho(4) = 1/4, and 0.2^2 = 0.04 <= 0.0625.
    let f1 = Region::rotation_body_power(1.0);
    assert!(contains(&f1, &p3(4.0, 0.2, 0.0)).unwrap());
}

#[test]
fn exp_body_membership_by_direct_substitution() {
    // rho(2) = e^-2 ~ 0.1353, and 0.04 > 0.0183.
    let f2 = Region::rotation_body_exp(1.0);
    assert!(!contains(&f2, &p3(2.0, 0.2, 0.0)).unwrap());
}

#[test]
fn membership_rejects_dimension_mismatch() {
    let ball = Region::unit_ball(3);
    assert!(contains(&ball, &Point::new(vec![0.0, 0.0])).is_err());
}

#[test]
fn inversion_maps_radius_two_to_half() {
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let q = inv.invert(&p3(2.0, 0.0, 0.0)).unwrap();
    assert!(q.dist(&p3(0.5, 0.0, 0.0)) < 1e-15);
}

#[test]
fn inversion_fixes_unit_sphere() {
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let q = inv.invert(&p3(1.0, 0.0, 0.0)).unwrap();
    assert!(q.dist(&p3(1.0, 0.0, 0.0)) < 1e-15);
}

#[test]
fn inversion_is_an_involution() {
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let p = p3(0.3, -1.2, 0.7);
    let back = inv.invert(&inv.invert(&p).unwrap()).unwrap();
    assert!(back.dist(&p) <= 1e-14 * p.norm());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let center = p3(0.4, -0.3, 1.1);
    let inv = Inversion::new(center.clone());
    for _ in 0..200 {
        let p = p3(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        if p.dist(&center) < 1e-3 {
            continue;
        }
        let back = inv.invert(&inv.invert(&p).unwrap()).unwrap();
        assert!(back.dist(&p) <= 1e-12 * p.norm().max(1.0));
    }
}

#[test]
fn inversion_pole_is_rejected() {
    let inv = Inversion::new(p3(1.0, 2.0, 3.0));
    assert!(inv.invert(&p3(1.0, 2.0, 3.0)).is_err());
}

#[test]
fn far_annulus_of_a_ball_is_empty() {
    let ball = Region::unit_ball(3);
    let slice = annular_slice(&ball, &p3(0.0, 0.0, 0.0), 2.0, 3).unwrap();
    // rLo = 8, rHi = 16: no point of the unit ball survives.
    let cloud = sample(&slice, 200, SampleMode::Surface, 1).unwrap();
    assert!(cloud.is_empty());
    let cloud_v = sample(&slice, 200, SampleMode::Volume, 1).unwrap();
    assert!(cloud_v.is_empty());
}

#[test]
fn f1_meets_every_annulus() {
    let f1 = Region::rotation_body_power(1.0);
    let slice = annular_slice(&f1, &p3(0.0, 0.0, 0.0), 2.0, 2).unwrap();
    let cloud = sample(&slice, 200, SampleMode::Surface, 1).unwrap();
    assert!(!cloud.is_empty());
}

#[test]
fn halfspace_slice_is_the_half_annulus() {
    let hs = Region::HalfSpace {
        normal: vec![1.0, 0.0, 0.0],
        offset: 0.0,
    };
    let slice = annular_slice(&hs, &p3(0.0, 0.0, 0.0), 2.0, 0).unwrap();
    for (p, want) in [
        (p3(1.5, 0.0, 0.0), true),   // inside: 1 <= |x| < 2, x1 >= 0
        (p3(-1.5, 0.0, 0.0), false), // wrong side
        (p3(0.0, 2.5, 0.0), false),  // outside the annulus
        (p3(0.0, 1.5, 0.0), true),   // on the x1 = 0 face
    ] {
        assert_eq!(contains(&slice, &p).unwrap(), want, "point {:?}", p.coords);
    }
}

#[test]
fn annular_slice_rejects_small_q() {
    let ball = Region::unit_ball(3);
    assert!(annular_slice(&ball, &p3(0.0, 0.0, 0.0), 0.5, 1).is_err());
}

#[test]
fn fibonacci_sphere_layout_contract() {
    let ball = Region::unit_ball(3);
    let cloud = sample(&ball, 500, SampleMode::Surface, 9).unwrap();
    assert_eq!(cloud.len(), 500);
    for p in &cloud.points {
        assert!((p.norm() - 1.0).abs() < 1e-12);
    }
    // Oracle: direct pairwise-distance scan of the emitted cloud.
    assert!(cloud.min_pairwise_distance() > 0.05);
    let expected_delta = 0.5 * (4.0 * std::f64::consts::PI / 500.0).sqrt();
    for d in &cloud.cell_radii {
        assert!((d - expected_delta).abs() < 1e-12);
    }
}

#[test]
fn clipped_exp_body_sample_satisfies_both_conditions() {
    let f2 = Region::rotation_body_exp(1.0);
    let slice = annular_slice(&f2, &p3(0.0, 0.0, 0.0), 2.0, 2).unwrap();
    let cloud = sample(&slice, 200, SampleMode::Surface, 3).unwrap();
    assert!(!cloud.is_empty());
    for p in &cloud.points {
        assert!(contains(&f2, p).unwrap(), "body inequality at {:?}", p.coords);
        let r = p.norm();
        assert!((4.0..8.0).contains(&r), "annulus bound violated: |x| = {r}");
    }
}

#[test]
fn sampler_soundness_across_region_zoo() {
    let regions = vec![
        Region::unit_ball(3),
        Region::SphereShell {
            center: p3(0.5, 0.0, -0.5),
            radius: 2.0,
        },
        annular_slice(&Region::rotation_body_power(1.0), &p3(0.0, 0.0, 0.0), 2.0, 1).unwrap(),
        annular_slice(&Region::rotation_body_exp(0.5), &p3(0.0, 0.0, 0.0), 2.0, 1).unwrap(),
        Region::AnnulusClip {
            inner: Box::new(Region::complement(Region::unit_ball(3))),
            center: p3(0.0, 0.0, 0.0),
            r_lo: 0.0,
            r_hi: 3.0,
        },
        Region::Intersection {
            parts: vec![
                Region::unit_ball(3),
                Region::HalfSpace {
                    normal: vec![0.0, 0.0, 1.0],
                    offset: 0.0,
                },
            ],
        },
    ];
    for (k, region) in regions.iter().enumerate() {
        for mode in [SampleMode::Surface, SampleMode::Volume] {
            let cloud = sample(region, 300, mode, 17 + k as u64).unwrap();
            for p in &cloud.points {
                assert!(
                    contains(region, p).unwrap(),
                    "region {k} {mode:?} point {:?}",
                    p.coords
                );
            }
            assert!(cloud.min_pairwise_distance() > 0.0);
        }
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let slice = annular_slice(&Region::rotation_body_exp(1.0), &p3(0.0, 0.0, 0.0), 2.0, 1).unwrap();
    let a = sample(&slice, 250, SampleMode::Surface, 99).unwrap();
    let b = sample(&slice, 250, SampleMode::Surface, 99).unwrap();
    assert_eq!(a, b);
    let c = sample(&slice, 250, SampleMode::Surface, 100).unwrap();
    assert_ne!(a, c);
}

#[test]
fn unbounded_region_is_rejected() {
    assert!(sample(&Region::rotation_body_exp(1.0), 100, SampleMode::Surface, 1).is_err());
    assert!(sample(
        &Region::HalfSpace {
            normal: vec![1.0, 0.0, 0.0],
            offset: 0.0
        },
        100,
        SampleMode::Volume,
        1
    )
    .is_err());
}

#[test]
fn annular_slices_partition_sampled_points() {
    // Every sampled point of the region lands in exactly one annular slice
    // covering its radial extent.
    let region = Region::ball(p3(0.0, 0.0, 0.0), 7.0);
    let cloud = sample(&region, 400, SampleMode::Volume, 21).unwrap();
    let y = p3(0.0, 0.0, 0.0);
    for p in &cloud.points {
        let mut hits = 0;
        for j in 0..6 {
            let slice = annular_slice(&region, &y, 2.0, j).unwrap();
            if contains(&slice, p).unwrap() {
                hits += 1;
            }
        }
        // Points inside |x| < 1 fall below every slice with j >= 0.
        let expected = usize::from(p.dist(&y) >= 1.0);
        assert_eq!(hits, expected, "point {:?}", p.coords);
    }
}

#[test]
fn volume_sampling_hits_requested_count_roughly() {
    let ball = Region::unit_ball(3);
    let cloud = sample(&ball, 500, SampleMode::Volume, 4).unwrap();
    assert!(
        (350..=700).contains(&cloud.len()),
        "got {} points",
        cloud.len()
    );
    for (p, d) in cloud.points.iter().zip(&cloud.cell_radii) {
        assert!(p.norm() <= 1.0);
        assert!(*d > 0.0);
    }
}

#[test]
fn point_cloud_csv_round_trip() {
    let ball = Region::unit_ball(3);
    let cloud = sample(&ball, 64, SampleMode::Surface, 8).unwrap();
    let csv = cloud.to_csv();
    assert!(csv.starts_with("x1,x2,x3,delta\n"));
    let back = riesz_core::PointCloud::from_csv(&csv, SampleMode::Surface).unwrap();
    assert_eq!(cloud, back);
}
