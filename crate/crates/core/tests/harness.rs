mod common;

use std::f64::consts::PI;

use acdisc::charts::ZeroCoefficient;
use acdisc::constants::Constants;
use acdisc::disc::holder::DiscRegion;
use acdisc::disc::{solve_attached_disc, DiscGrid, SolverOptions};
use acdisc::harness::bounds::{boundary_rho_integral, half_disc_map, half_disc_map_derivative};
use acdisc::harness::sector::lower_mean_by_quadrature;
use acdisc::harness::study::DiscSpec;
use acdisc::harness::{
    bootstrap_check, differential_bound_check, half_holder_check, sector_mean_check, theorem_scaling_study, ArcData,
    ExperimentConfig, InequalityRecord,
};
use acdisc::par::Execution;
use acdisc::Error;
use common::*;
use num_complex::Complex64;
use rand::Rng;

fn random_arcs(r: &mut rand_chacha::ChaCha8Rng) -> ArcData {
    let count = r.random_range(1..4);
    ArcData {
        arcs: (0..count)
            .map(|_| {
                let a = r.random_range(PI..2.0 * PI);
                let b = r.random_range(PI..2.0 * PI);
                (a.min(b), a.max(b).max(a.min(b) + 1e-3).min(2.0 * PI), r.random_range(0.0..2.0))
            })
            .collect(),
    }
}

fn sector_point(r: &mut rand_chacha::ChaCha8Rng, alpha: f64) -> Complex64 {
    Complex64::from_polar(r.random_range(1e-3..1.0), r.random_range(alpha + 1e-9..PI - alpha))
}

#[test]
fn sector_bound_holds_for_poisson_extensions() {
    let mut r = rng(51);
    let mut checked = 0;
    for _ in 0..20 {
        let data = random_arcs(&mut r);
        let alpha = r.random_range(0.05..1.5);
        let samples: Vec<Complex64> = (0..50).map(|_| sector_point(&mut r, alpha)).collect();
        let phi = |z: Complex64| data.value(z);
        let mean = data.lower_mean();
        assert!((mean - lower_mean_by_quadrature(&phi, 20_000)).abs() < 1e-3 * (1.0 + mean));
        let recs = sector_mean_check(&phi, mean, alpha, &samples, 1e-9).unwrap();
        assert!(recs.iter().all(|x| x.passed));
        checked += recs.len();
    }
    assert_eq!(checked, 1000);
}

#[test]
fn sector_check_rejects_bad_inputs() {
    let data = ArcData {
        arcs: vec![(PI, 1.5 * PI, 1.0)],
    };
    let phi = |z: Complex64| data.value(z);
    let inside = [Complex64::new(0.0, 0.5)];
    assert!(matches!(
        sector_mean_check(&phi, data.lower_mean(), 0.0, &inside, 1e-9),
        Err(Error::PreconditionFailed(_))
    ));
    assert!(matches!(
        sector_mean_check(&phi, data.lower_mean(), 0.3, &[Complex64::new(0.5, -0.1)], 1e-9),
        Err(Error::PreconditionFailed(_))
    ));
    let positive_on_top = |z: Complex64| 1.0 + z.im;
    assert!(sector_mean_check(&positive_on_top, 1.0, 0.3, &inside, 1e-9).is_err());
}

#[test]
fn boundary_integral_by_change_of_variables() {
    let grid = DiscGrid::new(48);
    let sol = solve_attached_disc(&ZeroCoefficient(1), &[0.0, 0.0], &[0.5, 0.0], &grid, &SolverOptions::default())
        .unwrap();
    // ∫ ρ(g∘F⁻¹) dθ over the lower circle = ∫_0^π ρ(g(e^{is})) |F'(e^{is})| ds.
    let m = 200_000;
    let h = PI / m as f64;
    let oracle: f64 = (0..m)
        .map(|i| {
            let z = Complex64::from_polar(1.0, (i as f64 + 0.5) * h);
            (0.5 * z.im).powi(2) * half_disc_map_derivative(z).norm()
        })
        .sum::<f64>()
        * h;
    let lib = boundary_rho_integral(&grid, &sol, 4096);
    assert!((lib - oracle).abs() < 1e-3 * oracle, "{lib} vs {oracle}");
    // the upper arc goes to the lower circle
    let w = half_disc_map(Complex64::from_polar(1.0, 1.0));
    assert!((w.norm() - 1.0).abs() < 1e-12 && w.im < 0.0);
}

#[test]
fn differential_bound_holds_on_flat_discs() {
    let c = Constants::builtin();
    let grid = DiscGrid::new(32);
    for d in [0.2, 0.5] {
        let sol = solve_attached_disc(&ZeroCoefficient(1), &[0.0, 0.0], &[d, 0.0], &grid, &SolverOptions::default())
            .unwrap();
        let recs = differential_bound_check(&grid, &sol, 2.0, 0.0, 0.25, 1e-9, c, "flat").unwrap();
        assert!(!recs.is_empty());
        assert!(recs.iter().all(|r| r.passed));
        assert!(differential_bound_check(&grid, &sol, 0.0, 0.0, 0.25, 1e-9, c, "flat").is_err());
    }
}

#[test]
fn half_holder_rhs_scales_with_inverse_root_curvature() {
    let c = Constants::builtin();
    let grid = DiscGrid::new(24);
    let sol = solve_attached_disc(&ZeroCoefficient(1), &[0.1, 0.0], &[0.3, 0.0], &grid, &SolverOptions::default())
        .unwrap();
    let at = |lambda: f64| {
        half_holder_check(&grid, &sol, 0.0, 0.25, lambda, 1e-9, c, 3, Execution::Sequential, "flat").unwrap()
    };
    let (a, b) = (at(2.0), at(8.0));
    assert_eq!(a.seminorm, b.seminorm);
    assert_eq!(a.record.rhs, 2.0 * b.record.rhs);
    let expected = c.c_tilde_effective * a.sup_norm / 2f64.sqrt();
    assert!((a.record.rhs - expected).abs() <= 1e-15 * expected);
    assert!(a.record.passed);
}

#[test]
fn inequality_records_and_bootstrap_fit() {
    assert!(InequalityRecord::new("x", 1.0, 1.0 - 1e-9, 1e-6, String::new()).passed);
    assert!(!InequalityRecord::new("x", 1.0, 0.9, 1e-6, String::new()).passed);
    assert!(InequalityRecord::new("x", 5.0, f64::INFINITY, 0.0, String::new()).passed);
    assert!(!InequalityRecord::new("x", f64::NAN, 1.0, 0.0, String::new()).passed);
    let (fit, recs) = bootstrap_check(&[(2.0, 1.0), (3.0, 1.0)], &[(3.2, 1.0), (3.4, 1.0)]);
    assert_eq!(fit, 3.0);
    assert!(recs[0].passed && !recs[1].passed);
}

#[test]
fn small_study_is_deterministic_and_passes() {
    let config = ExperimentConfig {
        amplitudes: vec![0.0, 0.02],
        discs: vec![DiscSpec {
            anchor: vec![0.0, 0.0],
            direction: vec![0.3, 0.0],
        }],
        grid: 24,
        k_region: DiscRegion::UpperHalf { radius: 0.5 },
        ..ExperimentConfig::default()
    };
    let c = Constants::builtin();
    let a = theorem_scaling_study(&config, c).unwrap();
    let b = theorem_scaling_study(&config, c).unwrap();
    assert!(a.failures.is_empty(), "{:?}", a.failures);
    assert!(a.all_passed(), "{}", a.csv());
    assert_eq!(a.csv(), b.csv());
    assert_eq!(a.rows.len(), 2);
    // curvature decreases as the amplitude grows
    assert!(a.rows[1].lambda_e <= a.rows[0].lambda_e);
    let sequential = ExperimentConfig {
        execution: Execution::Sequential,
        ..config
    };
    assert_eq!(theorem_scaling_study(&sequential, c).unwrap().csv(), a.csv());
}
