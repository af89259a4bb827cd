mod common;

use acdisc::acs::{structure_from_h, tangent_lift, HField, StructureField};
use acdisc::charts::{
    build_tamed_chart, pushforward, q_coefficient, q_from_structure, taming_ratio, AffineChart, Chart, Coefficient,
    StructureCoefficient, TameOptions, ZeroCoefficient,
};
use acdisc::linalg::{cop_norm, j_st, op_norm, CVector, Mat};
use acdisc::poly::{ComplexPolyMatrix, Polynomial};
use acdisc::region::DomainSpec;
use acdisc::Error;
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;

/// `H = 0.05xy + 0.03y + i(0.04x² + 0.05y²)`, which vanishes on `{y = 0}` up to the `x²` term.
fn perturbed() -> StructureField {
    let mut h = ComplexPolyMatrix::zeros(1);
    h.re.set(
        0,
        0,
        Polynomial::monomial(vec![1, 1], 0.05).add(&Polynomial::monomial(vec![0, 1], 0.03)),
    );
    h.im.set(
        0,
        0,
        Polynomial::monomial(vec![2, 0], 0.04).add(&Polynomial::monomial(vec![0, 2], 0.05)),
    );
    structure_from_h(HField::Poly(h), &DomainSpec::unit_ball(1), 0.25).unwrap()
}

#[test]
fn standard_structure_gets_the_identity_chart() {
    let j = StructureField::standard(1);
    let chart = build_tamed_chart(&j, &[0.0, 0.0], 0.05, &TameOptions::default()).unwrap();
    assert_eq!(chart.t, 1.0);
    let mut r = rng(21);
    for _ in 0..100 {
        let x = ball_point(&mut r, 2, 1.0);
        let z = chart.forward(&x);
        assert!((z[0] - x[0]).abs() < 1e-14 && (z[1] - x[1]).abs() < 1e-14);
        assert_eq!(cop_norm(&chart.q_real(&x).unwrap()), 0.0);
    }
    assert_eq!(q_from_structure(&j_st(2), &[0.0; 4]).unwrap(), acdisc::linalg::CMat::zeros(2, 2));
}

#[test]
fn tamed_chart_bounds_deviation_by_distance_to_the_slice() {
    let j = perturbed();
    let p = [0.1, 0.0];
    let eps = 0.05;
    let chart = build_tamed_chart(&j, &p, eps, &TameOptions::default()).unwrap();
    assert!(chart.deviation_c1 <= eps);
    assert!(chart.slice_residual < 1e-10);
    let c = chart.taming_constant;
    assert!(c.is_finite() && c > 0.0);

    let mut r = rng(22);
    let zj = chart.structure();
    let mut worst: f64 = 0.0;
    for _ in 0..2000 {
        let x = ball_point(&mut r, 2, 1.0);
        if x[1].abs() < 1e-3 {
            continue;
        }
        let dev = op_norm(&(zj.value(&x) - j_st(1)));
        let q = cop_norm(&chart.q_real(&x).unwrap());
        worst = worst.max(dev.max(q) / x[1].abs());
    }
    // independent samples: the grid sup may undershoot slightly
    assert!(worst <= 1.1 * c * eps, "{worst} vs {}", c * eps);

    for i in 0..=20 {
        let x = [-1.0 + 0.1 * i as f64, 0.0];
        assert!(cop_norm(&chart.q_real(&x).unwrap()) < 1e-10);
    }
}

#[test]
fn chart_structure_is_the_differential_conjugate() {
    let j = perturbed();
    let chart = build_tamed_chart(&j, &[0.1, 0.0], 0.05, &TameOptions::default()).unwrap();
    let mut r = rng(23);
    for _ in 0..50 {
        let x = ball_point(&mut r, 2, 0.9);
        let q = chart.inverse(&x).unwrap();
        let back = chart.forward(&q);
        assert!((back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10);
        let dz = chart.differential(&q);
        let expected = &dz * j.value(&q) * dz.clone().try_inverse().unwrap();
        assert!((chart.structure().value(&x) - expected).norm() < 1e-7);
    }
}

#[test]
fn tiny_epsilon_cannot_be_tamed() {
    let mut h = ComplexPolyMatrix::zeros(1);
    h.re.set(0, 0, Polynomial::monomial(vec![0, 1], 0.2));
    h.im.set(0, 0, Polynomial::monomial(vec![1, 1], 0.2));
    let j = structure_from_h(HField::Poly(h), &DomainSpec::unit_ball(1), 0.25).unwrap();
    let opts = TameOptions {
        max_halvings: 6,
        ..TameOptions::default()
    };
    assert!(matches!(build_tamed_chart(&j, &[0.0, 0.0], 1e-9, &opts), Err(Error::CannotTame(_))));
    assert!(matches!(
        build_tamed_chart(&j, &[0.0, 0.3], 0.05, &opts),
        Err(Error::PreconditionFailed(_))
    ));
}

#[test]
fn taming_ratio_of_scaled_structure() {
    let j = perturbed();
    let chart = build_tamed_chart(&j, &[0.1, 0.0], 0.05, &TameOptions::default()).unwrap();
    let ratio = taming_ratio(&chart, 21).unwrap();
    assert!(ratio <= chart.taming_constant * chart.epsilon + 1e-12);
    assert_eq!(taming_ratio(&ZeroCoefficient(1), 11).unwrap(), 0.0);
}

#[test]
fn singular_pushforward_rejected() {
    let j = StructureField::standard(1);
    assert!(matches!(pushforward(&j, &Mat::zeros(2, 2)), Err(Error::SingularMatrix(_))));
}

#[test]
fn affine_chart_pushes_structure_and_scalars() {
    let mut r = rng(24);
    let (j, _) = admissible_structure(&mut r, 1, &DomainSpec::unit_ball(1), 0.05);
    let m = mat(2, &[1.2, 0.1, -0.2, 0.9]);
    let center = vec![0.1, -0.2];
    let chart = AffineChart::new(&j, m.clone(), center.clone()).unwrap();
    let u = acdisc::levi::ScalarField::polynomial(2, random_quadratic(&mut r, 2));
    let pulled = chart.pull_scalar(&u);
    for _ in 0..20 {
        let q = ball_point(&mut r, 2, 0.8);
        let x = chart.forward(&q);
        assert!((pulled.value(&x) - u.value(&q)).abs() < 1e-12);
        let expected = &m * j.value(&q) * chart.m_inv.clone();
        assert!((chart.structure().value(&x) - expected).norm() < 1e-12);
        let zn: f64 = x.iter().map(|v| v * v).sum();
        assert!((chart.squared_norm_field().value(&q) - zn).abs() < 1e-12);
    }
}

#[test]
fn q_coefficient_matches_direct_structure_evaluation() {
    let j = perturbed();
    let chart = AffineChart::identity(&j);
    let coef = StructureCoefficient(j.clone());
    let x = [0.3, -0.2];
    let w = CVector::from_vec(vec![Complex64::new(0.3, -0.2)]);
    assert!((q_coefficient(&chart, &x).unwrap() - coef.q(&w).unwrap()).norm() < 1e-14);
    // |Q| < 1 is needed for the disc equation to be elliptic
    assert!(cop_norm(&coef.q(&w).unwrap()) < 1.0);
}

#[test]
fn tangent_lift_projects_onto_the_base_normalization() {
    let mut r = rng(25);
    let (j, _) = admissible_structure(&mut r, 1, &DomainSpec::unit_ball(1), 0.05);
    let lift = tangent_lift(&j);
    let id = Mat::identity(4, 4);
    for _ in 0..50 {
        let q = ball_point(&mut r, 2, 0.9);
        let lifted = lift.include(&q);
        let m = lift.lifted.value(&lifted);
        assert!(op_norm(&(&m * &m + &id)) < 1e-10);
        let through = lift.project(&lift.phi_c(&lifted).unwrap());
        let direct = lift.phi(&q).unwrap();
        assert!((through[0] - direct[0]).abs() < 1e-10 && (through[1] - direct[1]).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_charts_invert(a in 0.5..2.0f64, b in -0.5..0.5f64, c in -0.5..0.5f64, d in 0.5..2.0f64,
                            x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let j = StructureField::standard(1);
        let chart = AffineChart::new(&j, mat(2, &[a, b, c, d]), vec![0.2, 0.1]).unwrap();
        let back = chart.inverse(&chart.forward(&[x, y])).unwrap();
        prop_assert!((back[0] - x).abs() < 1e-12 && (back[1] - y).abs() < 1e-12);
    }
}
