use super::*;
use crate::envelope::{compute_enveloping_algebra, decompose_system, DEFAULT_CAP};
use crate::expr::{parse_node, parse_rational, q, vars, Node, Var};
use crate::sampling::RationalSampler;
use crate::vfield::{TimeSystem, VectorField};
use proptest::prelude::*;

fn system(vs: &[&str], rhs: &[&str]) -> TimeSystem {
    let nodes: Vec<Node> = rhs.iter().map(|s| parse_node(s).unwrap()).collect();
    TimeSystem::from_rhs(Var::new("t"), vars(vs), &nodes).unwrap()
}

fn field(vs: &[&str], comps: &[&str]) -> VectorField {
    let v = vars(vs);
    VectorField::new(v.clone(), comps.iter().map(|s| parse_rational(s, &v).unwrap()).collect()).unwrap()
}

fn automorphic(s: &TimeSystem, p: &GroupPresentation) -> AutomorphicSystem {
    let e = compute_enveloping_algebra(s, DEFAULT_CAP, 3).unwrap();
    let d = decompose_system(s, &e).unwrap();
    let m = Matching::by_fundamental_fields(&e, p).unwrap();
    build_automorphic_system(&e, &d, p, &m).unwrap()
}

fn constant(p: GroupPresentation, f: &[f64]) -> AutomorphicSystem {
    let c = f.iter().map(|&v| Arc::new(move |_t: f64| v) as CoefficientFn).collect();
    AutomorphicSystem::new(p, c).unwrap()
}

fn riccati() -> (EnvelopingAlgebra, Decomposition) {
    let s = system(&["x"], &["1 + t*x + t^2*x^2"]);
    let e = compute_enveloping_algebra(&s, DEFAULT_CAP, 1).unwrap();
    let d = decompose_system(&s, &e).unwrap();
    (e, d)
}

#[test]
fn builtins_validate_and_round_trip() {
    for name in ["SL(2)-Mobius", "Affine(1)", "GL(1)", "GL(2)", "GL(3)"] {
        let p = GroupPresentation::builtin(name).unwrap();
        p.validate(7).unwrap();
        assert_eq!(GroupPresentation::from_text(&p.to_text()).unwrap(), p, "{name}");
    }
    assert!(matches!(GroupPresentation::builtin("SO(3)"), Err(AutoError::UnknownPresentation(_))));
}

#[test]
fn sl2_fundamental_fields_are_the_riccati_basis() {
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let f = p.fundamental_fields(&vars(&["x"])).unwrap();
    assert_eq!(f, vec![field(&["x"], &["1"]), field(&["x"], &["x"]), field(&["x"], &["x^2"])]);
    let c = &p.constants;
    assert_eq!(*c.get(0, 1, 0), q(1));
    assert_eq!(*c.get(0, 2, 1), q(2));
    assert_eq!(*c.get(1, 2, 2), q(1));
}

#[test]
fn fundamental_fields_bracket_like_the_table() {
    for name in ["SL(2)-Mobius", "Affine(1)", "GL(2)"] {
        let p = GroupPresentation::builtin(name).unwrap();
        let vs: Vec<Var> = (1..=p.point_dim()).map(|i| Var::new(format!("x{i}"))).collect();
        let f = p.fundamental_fields(&vs).unwrap();
        for i in 0..p.s() {
            for j in 0..p.s() {
                let terms: Vec<_> = (0..p.s()).map(|k| (p.constants.get(i, j, k).clone(), &f[k])).collect();
                let want = VectorField::linear_combination(&vs, &terms).unwrap();
                assert_eq!(f[i].lie_bracket(&f[j]).unwrap(), want, "{name} ({i},{j})");
            }
        }
    }
}

#[test]
fn gl_table_is_the_elementary_commutator() {
    let p = GroupPresentation::builtin("GL(2)").unwrap();
    let idx = |i: usize, j: usize| 2 * i + j;
    for (i, j, k, l) in (0..16).map(|n| (n >> 3 & 1, n >> 2 & 1, n >> 1 & 1, n & 1)) {
        // [E_ij, E_kl] = E_kj d_li - E_il d_jk
        let mut want = [q(0), q(0), q(0), q(0)];
        if l == i {
            want[idx(k, j)] += q(1);
        }
        if j == k {
            want[idx(i, l)] -= q(1);
        }
        for (m, w) in want.iter().enumerate() {
            assert_eq!(p.constants.get(idx(i, j), idx(k, l), m), w);
        }
    }
}

#[test]
fn riccati_identity_bijection_matches() {
    let (e, d) = riccati();
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let a = build_automorphic_system(&e, &d, &p, &Matching::bijection(&[0, 1, 2])).unwrap();
    let m = a.matrix_at(1.5);
    assert!((m[(0, 1)] - 1.0).abs() < 1e-15);
    assert!((m[(0, 0)] - 0.75).abs() < 1e-15);
    assert!((m[(1, 0)] + 2.25).abs() < 1e-15);
    assert_eq!(Matching::by_fundamental_fields(&e, &p).unwrap(), Matching::bijection(&[0, 1, 2]));
}

#[test]
fn swapped_generators_mismatch() {
    let (e, d) = riccati();
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let err = build_automorphic_system(&e, &d, &p, &Matching::bijection(&[1, 0, 2])).unwrap_err();
    assert!(matches!(err, AutoError::StructureConstantMismatch { .. }), "{err:?}");
}

#[test]
fn flipped_cartan_generator_mismatches() {
    let (e, d) = riccati();
    let mut p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    for r in &mut p.generators[1] {
        for x in r.iter_mut() {
            *x = -x.clone();
        }
    }
    // the declared table no longer matches the generators
    assert!(matches!(GroupPresentation::from_text(&p.to_text()), Err(AutoError::InvalidPresentation(_))));
    let mut text: String = p.to_text().lines().filter(|l| !l.starts_with('[')).map(|l| format!("{l}\n")).collect();
    text.push_str("[A1, A2] = -A1\n[A1, A3] = -2*A2\n[A2, A3] = -A3\n");
    let recomputed = GroupPresentation::from_text(&text).unwrap();
    let err = build_automorphic_system(&e, &d, &recomputed, &Matching::bijection(&[0, 1, 2])).unwrap_err();
    assert!(matches!(err, AutoError::StructureConstantMismatch { i: 0, j: 1, k: 0 }), "{err:?}");
}

#[test]
fn linear_system_into_gl2() {
    let s = system(&["x1", "x2"], &["t*x1 + x2", "t^2*x1 + (t - 1)*x2"]);
    let p = GroupPresentation::builtin("GL(2)").unwrap();
    let a = automorphic(&s, &p);
    let m = a.matrix_at(1.25);
    let want = DMatrix::from_row_slice(2, 2, &[1.25, 1.0, 1.5625, 0.25]);
    assert!((m - want).amax() < 1e-12);
}

#[test]
fn presentation_format_errors() {
    let bad = [
        ("d = 2\naction = mobius\nA1 = [[0, 1], [0, 0]]\n", 0),
        ("name = g\nd = 2\naction = spin\nA1 = [[0, 1], [0, 0]]\n", 3),
        ("name = g\nd = 2\naction = linear\nA1 = [[0, 1], [0]]\n", 4),
        ("name = g\nd = 1\naction = linear\nA1 = [[1]]\n[A1, A2] = A1\n", 5),
    ];
    for (text, line) in bad {
        match GroupPresentation::from_text(text) {
            Err(AutoError::Format { line: l, .. }) => assert_eq!(l, line, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn constant_generator_matches_expm() {
    let p = GroupPresentation::builtin("GL(2)").unwrap();
    let a = constant(p, &[0.3, -1.1, 0.7, 0.2]);
    let sol = solve_automorphic(&a, (0.0, 1.5), 1e-12, 10).unwrap();
    let m = a.matrix_at(0.0);
    for (t, s) in sol.times().iter().zip(sol.states()) {
        assert!((s - (&m * *t).exp()).amax() < 1e-9, "t = {t}");
    }
}

#[test]
fn scalar_multiple_matches_antiderivative() {
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let c: Vec<CoefficientFn> = vec![Arc::new(f64::cos), Arc::new(|_| 0.0), Arc::new(|t: f64| -t.cos())];
    let a = AutomorphicSystem::new(p, c).unwrap();
    let sol = solve_automorphic(&a, (0.0, 3.0), 1e-11, 30).unwrap();
    let gen = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    for (t, s) in sol.times().iter().zip(sol.states()) {
        assert!((s - (&gen * t.sin()).exp()).amax() < 1e-8, "t = {t}");
    }
}

#[test]
fn zero_coefficients_stay_at_identity() {
    let a = constant(GroupPresentation::builtin("GL(3)").unwrap(), &[0.0; 9]);
    let sol = solve_automorphic(&a, (0.0, 4.0), 1e-10, 8).unwrap();
    assert!(sol.states().iter().all(|s| *s == DMatrix::identity(3, 3)));
    assert_eq!(act_solution(a.presentation(), &sol, &[1.0, 2.0, 3.0]).unwrap()[8], vec![1.0, 2.0, 3.0]);
}

#[test]
fn riccati_tan_from_the_action() {
    let s = system(&["x"], &["1 + x^2"]);
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let a = automorphic(&s, &p);
    let sol = solve_automorphic(&a, (0.0, 1.5), 1e-10, 30).unwrap();
    let xs = act_solution(&p, &sol, &[0.0]).unwrap();
    for (t, x) in sol.times().iter().zip(&xs) {
        assert!((x[0] - t.tan()).abs() < 1e-7 * (1.0 + t.tan().powi(2)), "t = {t}");
    }
}

#[test]
fn rotation_acts_on_first_unit_vector() {
    let s = system(&["x1", "x2"], &["x2", "-x1"]);
    let p = GroupPresentation::builtin("GL(2)").unwrap();
    let a = automorphic(&s, &p);
    let sol = solve_automorphic(&a, (0.0, 5.0), 1e-11, 50).unwrap();
    for (t, x) in sol.times().iter().zip(act_solution(&p, &sol, &[1.0, 0.0]).unwrap()) {
        assert!((x[0] - t.cos()).abs() < 1e-8 && (x[1] + t.sin()).abs() < 1e-8, "t = {t}");
    }
}

#[test]
fn action_pole_is_reported() {
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let a = constant(p.clone(), &[1.0, 0.0, 1.0]);
    let sol = solve_automorphic(&a, (0.0, std::f64::consts::FRAC_PI_2), 1e-10, 4).unwrap();
    match act_solution(&p, &sol, &[0.0]) {
        Err(AutoError::ActionPole { t }) => assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
}

#[test]
fn right_translates_are_constant_related() {
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let a = automorphic(&system(&["x"], &["1 + t*x + t^2*x^2"]), &p);
    let sigma = solve_automorphic(&a, (1.0, 2.0), 1e-10, 20).unwrap();
    let lambda = p.random_element(5);
    let tau = solve_automorphic(&a.clone().with_initial(lambda.clone()), (1.0, 2.0), 1e-10, 20).unwrap();
    assert!(check_translation_constancy(&sigma, &tau).unwrap() < 1e-9);
    assert!(check_translation_constancy(&sigma, &sigma).unwrap() < 1e-14);
    assert!(sigma.det_drift < 1e-8 && tau.det_drift < 1e-8);
    let res = solution_residual(&a, &sigma).unwrap();
    // derivative of a fourth-order interpolant: about 40-90 x tol
    assert!(res < 1e-8, "{res}");

    let other = automorphic(&system(&["x"], &["1 - t*x + x^2"]), &p);
    let rho = solve_automorphic(&other, (1.0, 2.0), 1e-10, 20).unwrap();
    assert!(check_translation_constancy(&sigma, &rho).unwrap() > 1e-3);
}

#[test]
fn singular_matrix_is_reported() {
    let a = constant(GroupPresentation::builtin("GL(2)").unwrap(), &[0.0; 4]).with_initial(DMatrix::zeros(2, 2));
    let s = solve_automorphic(&a, (0.0, 1.0), 1e-10, 2).unwrap();
    assert!(matches!(check_translation_constancy(&s, &s), Err(AutoError::SingularMatrix { t }) if t == 0.0));
}

#[test]
fn group_law_superposition() {
    let p = GroupPresentation::builtin("SL(2)-Mobius").unwrap();
    let a = automorphic(&system(&["x"], &["1 + t*x + t^2*x^2"]), &p);
    let sigma = solve_automorphic(&a, (1.0, 2.0), 1e-10, 10).unwrap();
    let lambda = p.random_element(11);
    let x0 = [0.3];
    let moved = p.act(&lambda, &x0).unwrap();
    for s in sigma.states() {
        let lhs = p.act(s, &moved).unwrap();
        let rhs = p.act(&(s * &lambda), &x0).unwrap();
        assert!((lhs[0] - rhs[0]).abs() < 1e-9);
    }
}

fn exact_matrix(seed: u64, n: usize) -> ExactMatrix {
    let mut r = RationalSampler::new(seed, 0);
    (0..n).map(|_| (0..n).map(|_| r.rational()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn right_translations_are_an_anti_morphism(a in any::<u64>(), b in any::<u64>(), n in 1usize..4) {
        let lambda = RightTranslation(exact_matrix(a, n));
        let mu = RightTranslation(exact_matrix(b, n));
        let composite = lambda.after(&mu);
        prop_assert_eq!(composite.element(), &lambda.apply(mu.element()));
        let sigma = exact_matrix(a ^ b, n);
        prop_assert_eq!(composite.apply(&sigma), lambda.apply(&mu.apply(&sigma)));
    }
}
