use lcsbench::calculus::{DiffeoMap, KForm};
use lcsbench::expr::{fd_partial, Expr, Var};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

const DIM: usize = 3;

/// Smooth expressions in `x1..x3`, kept small enough that FD stays accurate.
fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..DIM).prop_map(Expr::x),
        (-4i32..=4).prop_map(|k| Expr::num(f64::from(k) * 0.5)),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            inner.clone().prop_map(|a| (a * 0.25).sin().exp()),
            inner.clone().prop_map(|a| a.powi(2)),
            inner.prop_map(|a| -a),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..1.0f64, DIM)
}

fn vector() -> impl Strategy<Value = DVector<f64>> {
    point().prop_map(DVector::from_vec)
}

fn one_form() -> impl Strategy<Value = KForm> {
    proptest::collection::vec(expr(), DIM).prop_map(KForm::one_form)
}

fn two_form() -> impl Strategy<Value = KForm> {
    proptest::collection::vec(expr(), 3).prop_map(|c| {
        let idx = [vec![0, 1], vec![0, 2], vec![1, 2]];
        KForm::from_terms(DIM, 2, idx.into_iter().zip(c).collect())
    })
}

/// Maps with polynomial components, so compositions stay cheap.
fn map() -> impl Strategy<Value = DiffeoMap> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64, 0..DIM, 0..DIM), DIM).prop_map(|rows| {
        let comps = rows
            .into_iter()
            .enumerate()
            .map(|(i, (a, b, j, k))| Expr::x(i) + a * Expr::x(j) * Expr::x(k) + b)
            .collect();
        DiffeoMap::new(DIM, comps)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 128,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn print_parse_round_trip(e in expr(), p in point()) {
        let text = e.to_string();
        let back = Expr::parse(&text).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        let (a, b) = (e.eval(&p).unwrap(), back.eval(&p).unwrap());
        prop_assert!(close(a, b, 1e-12), "{text}: {a} vs {b}");
    }

    #[test]
    fn derivative_matches_finite_difference(e in expr(), p in point(), i in 0..DIM) {
        let exact = e.diff(Var::Coord(i)).eval(&p).unwrap();
        let fd = fd_partial(&e, &p, i).unwrap();
        prop_assert!(close(exact, fd, 1e-5), "d/dx{} {e}: {exact} vs {fd}", i + 1);
    }

    #[test]
    fn wedge_is_graded_commutative(a in one_form(), b in one_form(), c in two_form(), p in point()) {
        let e = DMatrix::identity(DIM, DIM);
        let ab = a.wedge(&b).add(&b.wedge(&a));
        prop_assert!(ab.values_at(&p).unwrap().max_on_basis(&e) < 1e-12);
        let ac = a.wedge(&c).sub(&c.wedge(&a));
        prop_assert!(ac.values_at(&p).unwrap().max_on_basis(&e) < 1e-12);
        prop_assert!(a.wedge(&a).values_at(&p).unwrap().max_on_basis(&e) < 1e-12);
    }

    #[test]
    fn d_squared_vanishes(f in expr(), a in one_form(), p in point(), u in vector(), v in vector(), w in vector()) {
        let ddf = KForm::function(DIM, f).d().d();
        prop_assert!(ddf.eval_on(&p, &[u.clone(), v.clone()]).unwrap().abs() < 1e-9);
        let dda = a.d().d();
        prop_assert!(dda.eval_on(&p, &[u, v, w]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pullback_is_functorial(a in two_form(), phi in map(), psi in map(), p in point(), u in vector(), v in vector()) {
        let vs = [u, v];
        let lhs = psi.compose(&phi).pullback(&a).eval_on(&p, &vs).unwrap();
        let rhs = phi.pullback(&psi.pullback(&a)).eval_on(&p, &vs).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
        let pointwise = psi.compose(&phi).pullback_at(&a, &p, &vs).unwrap();
        prop_assert!(close(lhs, pointwise, 1e-10), "{lhs} vs {pointwise}");
    }

    #[test]
    fn pullback_commutes_with_d(a in one_form(), phi in map(), p in point(), u in vector(), v in vector()) {
        let vs = [u, v];
        let lhs = phi.pullback(&a.d()).eval_on(&p, &vs).unwrap();
        let rhs = phi.pullback(&a).d().eval_on(&p, &vs).unwrap();
        prop_assert!(close(lhs, rhs, 1e-9), "{lhs} vs {rhs}");
    }
}
