mod common;

use std::sync::Arc;

use acdisc::acs::{deviation_pointwise, structure_from_h, HField, StructureField};
use acdisc::constants::Constants;
use acdisc::levi::cutoff::{FnCutoff, K_SAMPLES};
use acdisc::levi::form::levi_quadratic;
use acdisc::levi::psh::{epsilon_m, PshBuilderParams};
use acdisc::levi::{Cutoff, DefaultBlend};
use acdisc::region::Region;
use acdisc::levi::scalar::Profile;
use acdisc::levi::{
    defining_rho, k_constant, lambda0, levi_matrix, levi_perturbation_bound, minimal_curvature, psh_deflate,
    psh_log_builder, Lambda0Options, ScalarField,
};
use acdisc::linalg::{j_st, sym_eigen, Mat, Vector};
use acdisc::poly::{ComplexPolyMatrix, Polynomial};
use acdisc::region::DomainSpec;
use acdisc::Error;
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn poly_field(rng: &mut rand_chacha::ChaCha8Rng, dim: usize) -> ScalarField {
    ScalarField::polynomial(dim, random_quadratic(rng, dim))
}

#[test]
fn levi_form_matches_exterior_derivative_of_dc() {
    let mut r = rng(11);
    for n in [1, 2] {
        let dim = 2 * n;
        let d = DomainSpec::unit_ball(n);
        for _ in 0..4 {
            let (j, _) = admissible_structure(&mut r, n, &d, 0.2);
            let fields = [poly_field(&mut r, dim), ScalarField::squared_norm(ball_point(&mut r, dim, 0.5))];
            for u in &fields {
                for _ in 0..25 {
                    let p = ball_point(&mut r, dim, 1.0);
                    let x: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
                    let lib = levi_quadratic(&j, u, &p, &x);
                    let oracle = levi_by_exterior_derivative(&j, u, &p, &x);
                    assert!((lib - oracle).abs() < 1e-6 * (1.0 + oracle.abs()), "{lib} vs {oracle}");
                }
            }
        }
    }
}

#[test]
fn levi_matrix_polarizes_the_quadratic_form() {
    let mut r = rng(12);
    let d = DomainSpec::unit_ball(2);
    let (j, _) = admissible_structure(&mut r, 2, &d, 0.1);
    let u = poly_field(&mut r, 4);
    for _ in 0..1000 {
        let p = ball_point(&mut r, 4, 1.0);
        let x = Vector::from_vec((0..4).map(|_| r.random_range(-1.0..1.0)).collect());
        let m = levi_matrix(&j, &u, &p).matrix;
        let direct = levi_quadratic(&j, &u, &p, x.as_slice());
        assert!((x.dot(&(&m * &x)) - direct).abs() < 1e-10 * (1.0 + direct.abs()));
    }
}

#[test]
fn standard_fields_have_constant_levi_matrices() {
    let j = StructureField::standard(2);
    let p = [0.1, -0.3, 0.2, 0.4];
    let m = levi_matrix(&j, &ScalarField::squared_norm(vec![0.5, 0.0, 0.0, -0.2]), &p).matrix;
    assert!((m - Mat::identity(4, 4) * 4.0).norm() < 1e-13);
    let e = levi_matrix(&j, &ScalarField::sum_y_squared(2), &p);
    assert!((e.min_eig - 2.0).abs() < 1e-13 && (e.max_eig - 2.0).abs() < 1e-13);
}

#[test]
fn linear_change_of_variables_is_equivariant() {
    let mut r = rng(13);
    let d = DomainSpec::unit_ball(1);
    let (j, _) = admissible_structure(&mut r, 1, &d, 0.1);
    let u = poly_field(&mut r, 2);
    for _ in 0..50 {
        let p = Mat::from_fn(2, 2, |a, b| if a == b { 1.0 } else { 0.0 } + r.random_range(-0.3..0.3));
        let offset = vec![r.random_range(-0.2..0.2), r.random_range(-0.2..0.2)];
        let jp = j.pushforward_affine(&p, &offset).unwrap();
        let up = u.compose_affine(p.clone(), offset.clone());
        let x = ball_point(&mut r, 2, 0.5);
        let v = vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let image = &p * Vector::from_column_slice(&x) + Vector::from_column_slice(&offset);
        let pv = &p * Vector::from_column_slice(&v);
        let lhs = levi_quadratic(&jp, &up, &x, &v);
        let rhs = levi_quadratic(&j, &u, image.as_slice(), pv.as_slice());
        assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }
}

#[test]
fn rank_one_perturbation_of_identity_has_two_eigenvalues() {
    let mut r = rng(14);
    for _ in 0..100 {
        let v = Vector::from_vec((0..4).map(|_| r.random_range(-0.7..0.7)).collect());
        let lam = r.random_range(0.5..3.0);
        let m = (Mat::identity(4, 4) - &v * v.transpose()) * lam;
        let (vals, _) = sym_eigen(&m);
        let low = lam * (1.0 - v.norm_squared());
        assert!((vals[0] - low).abs() < 1e-12);
        for e in &vals[1..] {
            assert!((e - lam).abs() < 1e-12);
        }
    }
}

#[test]
fn perturbation_bound_never_exceeds_the_smallest_eigenvalue() {
    let mut r = rng(15);
    let d = DomainSpec::unit_ball(1);
    let (j, _) = admissible_structure(&mut r, 1, &d, 0.05);
    let fields = [
        ScalarField::squared_norm(vec![0.0, 0.0]),
        ScalarField::radial(vec![0.1, 0.0], Profile::Norm),
        poly_field(&mut r, 2),
    ];
    for u in &fields {
        for _ in 0..1000 {
            let p = ball_point(&mut r, 2, 1.0);
            if u.value(&p).is_nan() {
                continue;
            }
            let bound = levi_perturbation_bound(&j, u, &p);
            let min = levi_matrix(&j, u, &p).min_eig;
            assert!(bound <= min + 1e-10, "{bound} > {min} at {p:?}");
        }
    }
    let s = StructureField::standard(1);
    let u = ScalarField::squared_norm(vec![0.0, 0.0]);
    assert!((levi_perturbation_bound(&s, &u, &[0.3, 0.1]) - 4.0).abs() < 1e-13);
}

#[test]
fn perturbation_bound_reduces_to_the_classical_displays() {
    let mut r = rng(16);
    let d = DomainSpec::unit_ball(2);
    let (j, _) = admissible_structure(&mut r, 2, &d, 0.05);
    let origin = vec![0.0; 4];
    let p = [0.3, 0.0, -0.4, 0.0];
    let np = 0.5;
    let (h0, h1) = deviation_pointwise(&j, &p);
    let norm = levi_perturbation_bound(&j, &ScalarField::radial(origin.clone(), Profile::Norm), &p);
    let expected = 1.0 / np - 2.0 / np * h0 - 2.0 * (1.0 + h0) * h1;
    assert!((norm - expected).abs() < 1e-12, "{norm} vs {expected}");
    let log = levi_perturbation_bound(&j, &ScalarField::radial(origin.clone(), Profile::LogNorm), &p);
    let expected = -2.0 / (np * np) * h0 - h0 * h0 / (np * np) - 2.0 / np * (1.0 + h0) * h1;
    assert!((log - expected).abs() < 1e-12, "{log} vs {expected}");
    let sq = levi_perturbation_bound(&j, &ScalarField::radial(origin, Profile::SquaredNorm), &p);
    let expected = 4.0 - 4.0 * h0 - 4.0 * np * (1.0 + h0) * h1;
    assert!((sq - expected).abs() < 1e-12, "{sq} vs {expected}");
}

#[test]
fn squared_distance_levi_form_is_sandwiched_for_small_deviation() {
    let mut r = rng(17);
    let d = DomainSpec::unit_ball(1);
    let eps = epsilon_m(1.0).unwrap();
    for _ in 0..5 {
        let (j, _) = admissible_structure(&mut r, 1, &d, eps);
        for _ in 0..200 {
            let u = ScalarField::squared_norm(ball_point(&mut r, 2, 1.0));
            let x = ball_point(&mut r, 2, 1.0);
            let v = unit_vector(&mut r, 2);
            let l = levi_quadratic(&j, &u, &x, &v);
            assert!((3.5..=4.5).contains(&l), "{l}");
        }
    }
}

#[test]
fn lambda0_of_deflated_squared_norm() {
    let j = StructureField::standard(1);
    let d = DomainSpec::unit_ball(1);
    let w = ScalarField::squared_norm(vec![0.0, 0.0]);
    let p = vec![0.2, -0.1];
    let opts = Lambda0Options::default();
    let (deflated, cert) = psh_deflate(&w, 0.8, &p, &j, &d, &opts).unwrap();
    assert!((cert.guaranteed - 0.4).abs() < 1e-9);
    // For J_st both squares have constant Levi matrix 4I.
    assert!((cert.lambda0_output.value - (4.0 - 0.8 * 4.0)).abs() < 1e-9);
    let fine = d.refined(4);
    let brute = fine
        .samples()
        .iter()
        .map(|x| levi_matrix(&j, &deflated, x).min_eig)
        .fold(f64::INFINITY, f64::min);
    assert!((brute - cert.lambda0_output.value).abs() < 1e-9);

    let (same, _) = psh_deflate(&w, 0.0, &p, &j, &d, &opts).unwrap();
    assert_eq!(same.value(&[0.3, 0.4]), w.value(&[0.3, 0.4]));
    assert!(matches!(
        psh_deflate(&w, 2.0 / 9.0 * 4.0 + 0.01, &p, &j, &d, &opts),
        Err(Error::DeltaTooLarge { .. })
    ));
}

#[test]
fn epsilon_m_values() {
    assert_eq!(epsilon_m(1.0).unwrap(), 1.0 / 64.0);
    assert_eq!(epsilon_m(0.5).unwrap(), 1.0 / 48.0);
    assert_eq!(epsilon_m(2.0).unwrap(), 1.0 / 192.0);
    assert!(matches!(epsilon_m(0.0), Err(Error::NonPositive(_))));
    let mut last = f64::INFINITY;
    for i in 1..200 {
        let e = epsilon_m(0.05 * i as f64).unwrap();
        assert!(e <= last);
        last = e;
    }
}

/// The blend written out from its definition, without the library's closed-form derivatives.
fn blend(x: f64) -> f64 {
    if x <= 1.0 / 3.0 {
        return x;
    }
    if x >= 2.0 / 3.0 {
        return 1.0;
    }
    let s = 3.0 * (x - 1.0 / 3.0);
    let (a, b) = ((-1.0 / s).exp(), (-1.0 / (1.0 - s)).exp());
    let sigma = a / (a + b);
    (1.0 - sigma) * x + sigma
}

#[test]
fn cutoff_constant_matches_dense_sampling() {
    let k = k_constant(&DefaultBlend).unwrap();
    let step = 1e-5;
    let samples = 20 * K_SAMPLES;
    let mut sup: f64 = 0.0;
    for i in 0..=samples {
        let x = 1.0 / 3.0 + (1.0 - 1.0 / 3.0) * i as f64 / samples as f64;
        // one-sided at the left end, where θ switches to the identity
        let (t, t1, t2) = if i == 0 {
            (x, 1.0, 0.0)
        } else {
            let (a, b, c) = (blend(x - step), blend(x), blend(x + step));
            (b, (c - a) / (2.0 * step), (c - 2.0 * b + a) / (step * step))
        };
        sup = sup.max((t1 / t).abs()).max(((t2 * t - t1 * t1) / (t * t)).abs());
    }
    let oracle = 4.0 * sup;
    assert!((k - oracle).abs() < 1e-3 * oracle, "{k} vs {oracle}");
    assert_eq!(k, Constants::builtin().k);
    assert!(k >= 36.0);
}

#[test]
fn invalid_cutoff_rejected() {
    let bad = FnCutoff {
        name: "rescaled".into(),
        f: Arc::new(|x: f64| {
            let (t, t1, t2) = DefaultBlend.eval(x / 2.0);
            (t, t1 / 2.0, t2 / 4.0)
        }),
    };
    assert!(matches!(k_constant(&bad), Err(Error::InvalidCutoff(_))));
}

/// `H` quadratic with no constant term, so `J(0) = J_st`.
fn vanishing_structure(amp: f64) -> StructureField {
    let mut h = ComplexPolyMatrix::zeros(1);
    h.re.set(0, 0, Polynomial::monomial(vec![1, 1], amp).add(&Polynomial::monomial(vec![0, 1], 0.5 * amp)));
    h.im.set(0, 0, Polynomial::monomial(vec![2, 0], amp).add(&Polynomial::monomial(vec![1, 0], -0.3 * amp)));
    structure_from_h(HField::Poly(h), &DomainSpec::unit_ball(1), 0.25).unwrap()
}

fn admissible_vanishing() -> StructureField {
    let d = DomainSpec::unit_ball(1);
    let eps = epsilon_m(1.0).unwrap();
    let mut amp = 0.01;
    loop {
        let j = vanishing_structure(amp);
        if acdisc::acs::deviation_c1(&j, &d).0 <= eps {
            return j;
        }
        amp *= 0.8;
    }
}

#[test]
fn barrier_has_the_stated_local_lower_bounds() {
    let k = Constants::builtin().k;
    let d = DomainSpec::unit_ball(1);
    let (a, r) = (2.0, 0.5);
    let params = PshBuilderParams {
        p: vec![0.0, 0.0],
        r,
        a,
        b: k,
        theta: Arc::new(DefaultBlend),
    };
    let mut rg = rng(18);
    for j in [StructureField::standard(1), admissible_vanishing()] {
        let (u, cert) = psh_log_builder(&params, &j, &d, &Lambda0Options::default()).unwrap();
        assert!(cert.lambda0.value > 0.0);
        for _ in 0..500 {
            let x = ball_point(&mut rg, 2, 1.0);
            let dist = norm_sq(&x).sqrt();
            if dist < 1e-3 {
                continue;
            }
            let min = levi_matrix(&j, &u, &x).min_eig;
            if dist >= r {
                assert!(min >= a / (2.0 * dist) - 1e-9, "{min} at {dist}");
            }
            if dist <= r / 3f64.sqrt() {
                assert!(min >= (a - 1.0) / (2.0 * dist) - 1e-9, "{min} at {dist}");
            }
        }
    }
}

#[test]
fn barrier_preconditions_are_named() {
    let d = DomainSpec::unit_ball(1);
    let params = PshBuilderParams {
        p: vec![0.0, 0.0],
        r: 0.5,
        a: 1.0,
        b: 1.0,
        theta: Arc::new(DefaultBlend),
    };
    match psh_log_builder(&params, &StructureField::standard(1), &d, &Lambda0Options::default()) {
        Err(Error::PreconditionFailed(msg)) => assert!(msg.contains("A = 1") && msg.contains("below k")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn minimal_curvature_examples() {
    let opts = Lambda0Options::default();
    let s = StructureField::standard(1);
    let one = minimal_curvature(std::slice::from_ref(&s), &opts).unwrap();
    assert!((one.value - 2.0).abs() < 1e-6);
    let two = minimal_curvature(&[s.clone(), s.clone()], &opts).unwrap();
    assert_eq!(one.value, two.value);

    let mut r = rng(19);
    let (j, _) = admissible_structure(&mut r, 1, &DomainSpec::unit_ball(1), 0.01);
    let m = minimal_curvature(std::slice::from_ref(&j), &opts).unwrap();
    assert!((m.value - 2.0).abs() <= 0.3);
    let direct = lambda0(&j, &ScalarField::sum_y_squared(1), &DomainSpec::unit_ball(1), &opts).value;
    assert_eq!(m.value, direct);
    assert!(matches!(minimal_curvature(&[], &opts), Err(Error::EmptyAtlas)));
}

#[test]
fn defining_function_examples() {
    let opts = Lambda0Options::default();
    let d = DomainSpec::ball_with_resolution(vec![0.0, 0.0], 1.0, 21).unwrap();
    let j = StructureField::standard(1);
    let y = ScalarField::polynomial(2, Polynomial::variable(2, 1));
    let flat = defining_rho(std::slice::from_ref(&y), &j, &d, &opts).unwrap();
    for x in [-0.5, 0.0, 0.7] {
        assert_eq!(flat.rho.value(&[x, 0.0]), 0.0);
        assert_eq!(flat.rho.gradient(&[x, 0.0]).norm(), 0.0);
    }
    let tilted = ScalarField::polynomial(2, Polynomial::variable(2, 1).add(&Polynomial::monomial(vec![2, 0], -0.1)));
    let t = defining_rho(&[tilted], &j, &d, &opts).unwrap();
    assert!(t.tube_radius > 0.0 && t.tube_lambda0 > 0.0);

    let j2 = StructureField::standard(2);
    let d2 = DomainSpec::ball_with_resolution(vec![0.0; 4], 1.0, 5).unwrap();
    let y1 = ScalarField::polynomial(4, Polynomial::variable(4, 2));
    assert!(matches!(
        defining_rho(&[y1.clone(), y1], &j2, &d2, &opts),
        Err(Error::DegenerateDefiningFunctions(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lambda0_is_homogeneous_in_the_function(c in 0.1..10.0f64, seed in 0u64..1000) {
        let mut r = rng(seed);
        let (j, _) = admissible_structure(&mut r, 1, &DomainSpec::unit_ball(1), 0.05);
        let u = ScalarField::squared_norm(vec![0.0, 0.0]).shifted(0.0);
        let d = DomainSpec::ball_with_resolution(vec![0.0, 0.0], 1.0, 11).unwrap();
        let opts = Lambda0Options::default();
        let base = lambda0(&j, &u, &d, &opts).value;
        let scaled = lambda0(&j, &ScalarField::combination(2, 0.0, vec![(c, u)]), &d, &opts).value;
        prop_assert!((scaled - c * base).abs() < 1e-9 * c * base.abs());
    }

    #[test]
    fn shrinking_the_domain_never_lowers_lambda0(radius in 0.2..0.9f64, seed in 0u64..1000) {
        let mut r = rng(seed);
        let (j, _) = admissible_structure(&mut r, 1, &DomainSpec::unit_ball(1), 0.05);
        let u = poly_field(&mut r, 2);
        let opts = Lambda0Options::default();
        let big = lambda0(&j, &u, &DomainSpec::unit_ball(1), &opts).value;
        let small = lambda0(&j, &u, &DomainSpec::ball(vec![0.0, 0.0], radius).unwrap(), &opts).value;
        prop_assert!(small >= big - 1e-9, "{} < {}", small, big);
    }

    #[test]
    fn levi_form_is_quadratic_in_the_vector(t in -3.0..3.0f64, seed in 0u64..1000) {
        let mut r = rng(seed);
        let (j, _) = admissible_structure(&mut r, 1, &DomainSpec::unit_ball(1), 0.1);
        let u = poly_field(&mut r, 2);
        let p = ball_point(&mut r, 2, 1.0);
        let x = unit_vector(&mut r, 2);
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        let a = levi_quadratic(&j, &u, &p, &tx);
        let b = t * t * levi_quadratic(&j, &u, &p, &x);
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
    }
}

#[test]
fn standard_structure_is_its_own_deviation_zero() {
    let j = StructureField::standard(1);
    assert_eq!(j.value(&[0.2, 0.3]), j_st(1));
}
