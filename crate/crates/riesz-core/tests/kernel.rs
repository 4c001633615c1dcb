//! Kernel, potential, Gram, and energy contract tests.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_core::geometry::{sample, Point, PointCloud, Region, SampleMode};
use riesz_core::kernel::{
    energy, gram, kernel_eval, potential, regularized_kernel, GramMatrix, RieszParams,
};
use riesz_core::measure::DiscreteMeasure;

fn p3(x: f64, y: f64, z: f64) -> Point {
    Point::new(vec![x, y, z])
}

fn newton() -> RieszParams {
    RieszParams::newtonian()
}

#[test]
fn kernel_values_by_direct_substitution() {
    let params = newton();
    let v = kernel_eval(&params, &p3(0.0, 0.0, 0.0), &p3(2.0, 0.0, 0.0)).unwrap();
    assert!((v - 0.5).abs() < 1e-15);

    let params = RieszParams::new(3, 1.0).unwrap();
    let v = kernel_eval(&params, &p3(0.0, 0.0, 0.0), &p3(4.0, 0.0, 0.0)).unwrap();
    assert!((v - 0.0625).abs() < 1e-15);
}

#[test]
fn kernel_homogeneity_under_scaling() {
    let params = newton();
    let x = p3(0.4, -0.7, 1.1);
    let y = p3(-0.2, 0.5, 0.3);
    let t = 3.0;
    let tx = Point::new(x.coords.iter().map(|c| t * c).collect());
    let ty = Point::new(y.coords.iter().map(|c| t * c).collect());
    let lhs = kernel_eval(&params, &tx, &ty).unwrap();
    let rhs = t.powf(params.exponent()) * kernel_eval(&params, &x, &y).unwrap();
    assert!((lhs - rhs).abs() <= 1e-14 * rhs);
    assert!((t.powf(params.exponent()) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn kernel_rejects_coincident_points() {
    assert!(kernel_eval(&newton(), &p3(1.0, 2.0, 3.0), &p3(1.0, 2.0, 3.0)).is_err());
}

#[test]
fn regularized_kernel_caps_inside_delta() {
    let params = newton();
    let o = p3(0.0, 0.0, 0.0);
    assert!((regularized_kernel(&params, &o, &p3(2.0, 0.0, 0.0), 0.1) - 0.5).abs() < 1e-15);
    assert!((regularized_kernel(&params, &o, &o, 0.1) - 10.0).abs() < 1e-12);
    assert!((regularized_kernel(&params, &o, &p3(0.05, 0.0, 0.0), 0.1) - 10.0).abs() < 1e-12);
}

#[test]
fn potential_of_point_masses() {
    let params = newton();
    let unit = DiscreteMeasure::mollified_dirac(p3(0.0, 0.0, 0.0), 1.0, 0.1).unwrap();
    assert!((potential(&unit, &p3(2.0, 0.0, 0.0), &params) - 0.5).abs() < 1e-15);
    // Evaluation on the atom returns the capped value.
    assert!((potential(&unit, &p3(0.0, 0.0, 0.0), &params) - 10.0).abs() < 1e-12);

    let cloud = PointCloud::new(
        vec![p3(1.0, 0.0, 0.0), p3(-1.0, 0.0, 0.0)],
        vec![0.1, 0.1],
        SampleMode::Volume,
    )
    .unwrap();
    let two = DiscreteMeasure::new(cloud, vec![1.0, 1.0]).unwrap();
    assert!((potential(&two, &p3(0.0, 0.0, 0.0), &params) - 2.0).abs() < 1e-15);
}

#[test]
fn gram_frozen_two_point_example() {
    let params = newton();
    let cloud = PointCloud::new(
        vec![p3(0.0, 0.0, 0.0), p3(2.0, 0.0, 0.0)],
        vec![0.1, 0.1],
        SampleMode::Volume,
    )
    .unwrap();
    let g = gram(&cloud, &params).unwrap();
    let want = DMatrix::from_row_slice(2, 2, &[10.0, 0.5, 0.5, 10.0]);
    assert!((&g.entries - &want).amax() < 1e-12);

    let single = PointCloud::new(vec![p3(0.0, 0.0, 0.0)], vec![0.1], SampleMode::Volume).unwrap();
    let g1 = gram(&single, &params).unwrap();
    assert!((g1.entries[(0, 0)] - 10.0).abs() < 1e-12);
}

#[test]
fn gram_rejects_duplicate_points() {
    let cloud = PointCloud::new(
        vec![p3(0.0, 0.0, 0.0), p3(0.0, 0.0, 0.0)],
        vec![0.1, 0.1],
        SampleMode::Volume,
    )
    .unwrap();
    assert!(gram(&cloud, &newton()).is_err());
}

#[test]
fn sphere_gram_is_positive_definite_by_eigensolve() {
    // Oracle: dense symmetric eigensolve on the assembled matrix, checked
    // against the assembly-time monitor estimates.
    let params = newton();
    let cloud = sample(&Region::unit_ball(3), 500, SampleMode::Surface, 2).unwrap();
    let g = gram(&cloud, &params).unwrap();
    let eig = SymmetricEigen::new(g.entries.clone());
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    assert!(min > 0.0, "smallest eigenvalue {min}");
    assert!(g.lambda_min_est > 0.0);
    // The monitor is an iterative estimate; it must land within a factor of
    // two of the dense eigensolve.
    assert!(
        g.lambda_min_est >= 0.5 * min && g.lambda_min_est <= 2.0 * min,
        "monitor {} vs eigensolve {min}",
        g.lambda_min_est
    );
    assert!(g.lambda_max_est <= 1.001 * max && g.lambda_max_est >= 0.5 * max);
}

#[test]
fn energy_quadratic_form_arithmetic() {
    let params = newton();
    let cloud = PointCloud::new(
        vec![p3(0.0, 0.0, 0.0), p3(2.0, 0.0, 0.0)],
        vec![0.1, 0.1],
        SampleMode::Volume,
    )
    .unwrap();
    let mu = DiscreteMeasure::new(cloud, vec![1.0, 1.0]).unwrap();
    assert!((energy(&mu, &mu, &params) - 21.0).abs() < 1e-12);

    let a = DiscreteMeasure::mollified_dirac(p3(0.0, 0.0, 0.0), 1.0, 0.1).unwrap();
    let b = DiscreteMeasure::mollified_dirac(p3(2.0, 0.0, 0.0), 1.0, 0.1).unwrap();
    assert!((energy(&a, &b, &params) - 0.5).abs() < 1e-15);
}

#[test]
fn energy_is_symmetric_and_cauchy_schwarz_holds() {
    let params = newton();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..40 {
        let make = |rng: &mut ChaCha8Rng| {
            let m = 2 + (rng.gen::<u32>() % 6) as usize;
            let pts: Vec<Point> = (0..m)
                .map(|_| {
                    p3(
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                        rng.gen_range(-2.0..2.0),
                    )
                })
                .collect();
            let deltas = vec![0.05; m];
            let ws: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            DiscreteMeasure::new(PointCloud::new(pts, deltas, SampleMode::Volume).unwrap(), ws)
                .unwrap()
        };
        let mu = make(&mut rng);
        let nu = make(&mut rng);
        let e_mn = energy(&mu, &nu, &params);
        let e_nm = energy(&nu, &mu, &params);
        assert!((e_mn - e_nm).abs() <= 1e-14 * e_mn.abs().max(1.0));
        let e_mm = energy(&mu, &mu, &params);
        let e_nn = energy(&nu, &nu, &params);
        assert!(e_mm >= 0.0);
        assert!(e_mn * e_mn <= e_mm * e_nn * (1.0 + 1e-12));
    }
}

#[test]
fn potentials_increase_with_weights() {
    // Monotone convergence shape: increasing weight vectors give pointwise
    // increasing potentials, exactly.
    let params = newton();
    let cloud = sample(&Region::unit_ball(3), 100, SampleMode::Surface, 6).unwrap();
    let probes = [p3(1.5, 0.2, 0.0), p3(0.0, 0.0, 0.0), p3(0.3, 0.8, -0.2)];
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut weights = vec![0.0; cloud.len()];
    let mut last = vec![0.0; probes.len()];
    for _stage in 0..6 {
        for w in weights.iter_mut() {
            *w += rng.gen_range(0.0..0.1);
        }
        let mu = DiscreteMeasure::new(cloud.clone(), weights.clone()).unwrap();
        for (k, probe) in probes.iter().enumerate() {
            let v = potential(&mu, probe, &params);
            assert!(v >= last[k]);
            last[k] = v;
        }
    }
}

#[test]
fn refinement_shrinks_discretization_error() {
    // Uniform unit-mass measure on the unit sphere has exact potential 2/3 at
    // radius 1.5 (shell evaluation). Quadrature error must drop by at least
    // 1.5x when the cell radius halves (4x the points).
    let params = newton();
    let probe = p3(1.5, 0.0, 0.0);
    let errs: Vec<f64> = [500usize, 2000]
        .iter()
        .map(|&n| {
            let cloud = sample(&Region::unit_ball(3), n, SampleMode::Surface, 12).unwrap();
            let mu = DiscreteMeasure::uniform(cloud, 1.0).unwrap();
            (potential(&mu, &probe, &params) - 2.0 / 3.0).abs()
        })
        .collect();
    assert!(
        errs[1] <= errs[0] / 1.5,
        "errors did not shrink: {errs:?}"
    );
}

#[test]
fn gram_cache_round_trip_is_bit_exact() {
    let params = newton();
    let cloud = sample(&Region::unit_ball(3), 120, SampleMode::Surface, 3).unwrap();
    let g = gram(&cloud, &params).unwrap();
    let dir = std::env::temp_dir().join("riesz_gram_cache_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("g.bin");
    g.save_cache(&path).unwrap();
    let loaded = GramMatrix::load_cache(&path, &cloud, &params)
        .unwrap()
        .expect("cache hit");
    assert_eq!(g.entries, loaded.entries);

    // A different cloud must miss.
    let other = sample(&Region::unit_ball(3), 121, SampleMode::Surface, 3).unwrap();
    assert!(GramMatrix::load_cache(&path, &other, &params)
        .unwrap()
        .is_none());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn params_validation_enforces_admissible_range() {
    assert!(RieszParams::new(3, 2.0).is_ok());
    assert!(RieszParams::new(2, 1.5).is_ok());
    assert!(RieszParams::new(3, 0.0).is_err());
    assert!(RieszParams::new(3, 2.5).is_err());
    assert!(RieszParams::new(2, 2.0).is_err()); // alpha < n fails
    assert!(RieszParams::new(1, 0.5).is_err());
}

#[test]
fn potential_batch_matches_serial_evaluation() {
    let params = newton();
    let cloud = sample(&Region::unit_ball(3), 200, SampleMode::Surface, 15).unwrap();
    let mu = DiscreteMeasure::uniform(cloud, 2.0).unwrap();
    let probes = sample(&Region::ball(p3(0.0, 0.0, 0.0), 3.0), 150, SampleMode::Volume, 16).unwrap();
    let field = riesz_core::kernel::potential_batch(&mu, &probes, &params);
    assert_eq!(field.values.len(), probes.len());
    for (v, p) in field.values.iter().zip(&probes.points) {
        assert!(*v >= 0.0);
        assert_eq!(*v, potential(&mu, p, &params));
    }
}
