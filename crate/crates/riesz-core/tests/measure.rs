//! Measure operations and the Kelvin transform identities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_core::geometry::{sample, Inversion, Point, PointCloud, Region, SampleMode};
use riesz_core::kernel::{energy_exact, potential, potential_exact, RieszParams};
use riesz_core::measure::{DiscreteMeasure, SignedDecomposition};

fn p3(x: f64, y: f64, z: f64) -> Point {
    Point::new(vec![x, y, z])
}

fn cloud_of(points: Vec<Point>, delta: f64) -> PointCloud {
    let n = points.len();
    PointCloud::new(points, vec![delta; n], SampleMode::Volume).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, atoms: usize) -> DiscreteMeasure {
    let points: Vec<Point> = (0..atoms)
        .map(|_| {
            // Atoms bounded away from the origin (the inversion center).
            let r = 0.4 + 2.6 * rng.gen::<f64>();
            let theta = rng.gen::<f64>() * std::f64::consts::TAU;
            let z: f64 = rng.gen_range(-1.0..1.0);
            let s = (1.0 - z * z).sqrt();
            p3(r * s * theta.cos(), r * s * theta.sin(), r * z)
        })
        .collect();
    let weights: Vec<f64> = (0..atoms).map(|_| 0.1 + rng.gen::<f64>()).collect();
    DiscreteMeasure::new(cloud_of(points, 1e-3), weights).unwrap()
}

#[test]
fn total_mass_is_the_weight_sum() {
    let m = DiscreteMeasure::new(
        cloud_of(vec![p3(0.0, 0.0, 0.0), p3(1.0, 0.0, 0.0)], 0.1),
        vec![0.5, 0.5],
    )
    .unwrap();
    assert_eq!(m.total_mass(), 1.0);

    let empty = DiscreteMeasure::empty(SampleMode::Volume);
    assert_eq!(empty.total_mass(), 0.0);

    let m = DiscreteMeasure::new(
        cloud_of(
            vec![p3(0.0, 0.0, 0.0), p3(1.0, 0.0, 0.0), p3(2.0, 0.0, 0.0)],
            0.1,
        ),
        vec![1.0, 2.0, 3.0],
    )
    .unwrap();
    assert_eq!(m.total_mass(), 6.0);
}

#[test]
fn mollified_dirac_contract() {
    let d = DiscreteMeasure::mollified_dirac(p3(2.0, 0.0, 0.0), 1.0, 0.01).unwrap();
    assert_eq!(d.total_mass(), 1.0);
    assert_eq!(d.len(), 1);

    assert!(DiscreteMeasure::mollified_dirac(p3(0.0, 0.0, 0.0), 0.0, 0.01).is_err());

    let d2 = DiscreteMeasure::mollified_dirac(p3(2.0, 0.0, 0.0), 1.0, 0.01).unwrap();
    assert_eq!(d, d2);
}

#[test]
fn restriction_keeps_exactly_the_member_atoms() {
    let sphere_cloud = sample(&Region::unit_ball(3), 60, SampleMode::Surface, 5).unwrap();
    let mu = DiscreteMeasure::uniform(sphere_cloud, 1.0).unwrap();

    // Superset: unchanged.
    let big = Region::ball(p3(0.0, 0.0, 0.0), 2.0);
    assert_eq!(mu.restrict(&big).unwrap(), mu);

    // Disjoint: empty.
    let far = DiscreteMeasure::mollified_dirac(p3(3.0, 0.0, 0.0), 1.0, 0.01).unwrap();
    assert!(far.restrict(&Region::unit_ball(3)).unwrap().is_empty());

    // Mixed support: only the inner atom survives.
    let mixed = DiscreteMeasure::new(
        cloud_of(vec![p3(0.5, 0.0, 0.0), p3(1.5, 0.0, 0.0)], 0.01),
        vec![1.0, 2.0],
    )
    .unwrap();
    let kept = mixed.restrict(&Region::unit_ball(3)).unwrap();
    assert_eq!(kept.len(), 1);
    assert_eq!(kept.weights, vec![1.0]);
    assert!(kept.total_mass() <= mixed.total_mass());
}

#[test]
fn kelvin_weight_map_frozen_example() {
    let params = RieszParams::newtonian();
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let nu = DiscreteMeasure::mollified_dirac(p3(2.0, 0.0, 0.0), 1.0, 0.01).unwrap();
    let star = nu.kelvin_transform(&inv, &params).unwrap();
    assert!(star.cloud.points[0].dist(&p3(0.5, 0.0, 0.0)) < 1e-15);
    assert!((star.weights[0] - 0.5).abs() < 1e-15);
}

#[test]
fn kelvin_mass_potential_duality_by_hand() {
    // nu = {1 at (2,0,0), 2 at (0,3,0)}: potential of nu* at the center is
    // 0.5 * 2 + (2/3) * 1.5 = 3.0 = nu(R^3).
    let params = RieszParams::newtonian();
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let nu = DiscreteMeasure::new(
        cloud_of(vec![p3(2.0, 0.0, 0.0), p3(0.0, 3.0, 0.0)], 0.01),
        vec![1.0, 2.0],
    )
    .unwrap();
    let star = nu.kelvin_transform(&inv, &params).unwrap();
    let pot = potential_exact(&star, &p3(0.0, 0.0, 0.0), &params);
    assert!((pot - 3.0).abs() < 1e-14);
    assert!((nu.total_mass() - pot).abs() < 1e-14);
}

#[test]
fn kelvin_rejects_atom_at_center() {
    let params = RieszParams::newtonian();
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let nu = DiscreteMeasure::mollified_dirac(p3(0.0, 0.0, 0.0), 1.0, 0.01).unwrap();
    assert!(nu.kelvin_transform(&inv, &params).is_err());
}

#[test]
fn kelvin_involution_on_random_measures() {
    let params = RieszParams::newtonian();
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let atoms = 2 + (rng.gen::<u32>() % 9) as usize;
        let nu = random_measure(&mut rng, atoms);
        let back = nu
            .kelvin_transform(&inv, &params)
            .unwrap()
            .kelvin_transform(&inv, &params)
            .unwrap();
        for (a, b) in back.cloud.points.iter().zip(&nu.cloud.points) {
            assert!(a.dist(b) <= 1e-10 * b.norm());
        }
        for (a, b) in back.weights.iter().zip(&nu.weights) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
        for (a, b) in back.cloud.cell_radii.iter().zip(&nu.cloud.cell_radii) {
            assert!((a - b).abs() <= 1e-10 * b);
        }
    }
}

#[test]
fn kelvin_mass_potential_identity_on_random_measures() {
    let params = RieszParams::newtonian();
    let center = p3(0.0, 0.0, 0.0);
    let inv = Inversion::new(center.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let atoms = 3 + (rng.gen::<u32>() % 8) as usize;
        let nu = random_measure(&mut rng, atoms);
        let star = nu.kelvin_transform(&inv, &params).unwrap();
        let pot = potential_exact(&star, &center, &params);
        assert!((pot - nu.total_mass()).abs() <= 1e-10 * nu.total_mass());
    }
}

#[test]
fn kelvin_energy_identity_on_random_measures() {
    let params = RieszParams::newtonian();
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..100 {
        let atoms = 3 + (rng.gen::<u32>() % 8) as usize;
        let nu = random_measure(&mut rng, atoms);
        let star = nu.kelvin_transform(&inv, &params).unwrap();
        let e = energy_exact(&nu, &nu, &params);
        let e_star = energy_exact(&star, &star, &params);
        assert!((e - e_star).abs() <= 1e-8 * e.abs().max(1e-12));
    }
}

#[test]
fn kelvin_potential_transform_at_probes() {
    let params = RieszParams::newtonian();
    let inv = Inversion::new(p3(0.0, 0.0, 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for _ in 0..100 {
        let nu = random_measure(&mut rng, 4);
        let star = nu.kelvin_transform(&inv, &params).unwrap();
        // Probe off the support and away from the center.
        let x = p3(
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.2..2.0),
            rng.gen_range(-2.0..-0.2),
        );
        if nu.cloud.points.iter().any(|p| p.dist(&x) < 1e-2) {
            continue;
        }
        let lhs = potential_exact(&star, &inv.invert(&x).unwrap(), &params);
        let rhs = x.norm().powf(-params.exponent()) * potential_exact(&nu, &x, &params);
        assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs());
    }
}

#[test]
fn signed_decomposition_potential_is_the_difference() {
    let params = RieszParams::newtonian();
    let plus = DiscreteMeasure::mollified_dirac(p3(1.0, 0.0, 0.0), 2.0, 0.01).unwrap();
    let minus = DiscreteMeasure::mollified_dirac(p3(-1.0, 0.0, 0.0), 1.0, 0.01).unwrap();
    let xi = SignedDecomposition::new(plus.clone(), minus.clone());
    assert_eq!(xi.total(), 1.0);
    let probe = p3(0.0, 2.0, 0.0);
    let want = potential(&plus, &probe, &params) - potential(&minus, &probe, &params);
    assert_eq!(xi.potential_at(&probe, &params), want);
}

#[test]
fn measure_csv_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(113);
    let mu = random_measure(&mut rng, 7);
    let csv = mu.to_csv();
    assert!(csv.starts_with("x1,x2,x3,delta,weight\n"));
    let back = DiscreteMeasure::from_csv(&csv, SampleMode::Volume).unwrap();
    assert_eq!(mu, back);
}
