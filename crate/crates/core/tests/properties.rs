//! Randomised invariants of the algebraic layers.

use logdef::defalg::{DiffOp, LieElement, QuadraticLie, RhoSeriesOp};
use logdef::groups::GroupElement;
use logdef::poly::Poly;
use logdef::qpoly::MixedExpansion;
use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use proptest::prelude::*;

type C = Complex<f64>;
type Exact = QuadraticLie<BigRational>;

const NQ: usize = 4;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn exact_quad(weight: i64) -> impl Strategy<Value = Exact> {
    prop::array::uniform3((-20i64..=20, 1i64..=7)).prop_map(move |c| QuadraticLie::new(weight, c.map(|(n, d)| rat(n, d))))
}

fn complex() -> impl Strategy<Value = C> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex::new(re, im))
}

fn float_quad(weight: i64) -> impl Strategy<Value = QuadraticLie<C>> {
    prop::array::uniform3(complex()).prop_map(move |p| QuadraticLie::new(weight, p))
}

/// Products of `T^n` and `S`.
fn sl2z() -> impl Strategy<Value = GroupElement> {
    prop::collection::vec(-3i64..=3, 1..=4).prop_map(|ns| {
        let s = GroupElement::new(0, -1, 1, 0).unwrap();
        ns.iter().fold(GroupElement::identity(), |g, &n| g.mul(&GroupElement::translation(n)).mul(&s))
    })
}

/// Words in generators of `Γ₀(5)`.
fn gamma0_5() -> impl Strategy<Value = GroupElement> {
    let gens = [GroupElement::translation(1), GroupElement::new(2, -1, 5, -2).unwrap(), GroupElement::new(1, 0, 5, 1).unwrap()];
    prop::collection::vec((0usize..3, any::<bool>()), 1..=5).prop_map(move |w| {
        w.iter().fold(GroupElement::identity(), |g, &(i, inv)| g.mul(&if inv { gens[i].inverse() } else { gens[i] }))
    })
}

fn expansion() -> impl Strategy<Value = MixedExpansion<f64>> {
    prop::collection::vec(prop::collection::vec(complex(), 1..=3), NQ).prop_map(|terms| {
        MixedExpansion::from_terms(NQ, terms.into_iter().map(Poly::from_coeffs).collect())
    })
}

fn lie0() -> impl Strategy<Value = LieElement<f64>> {
    (expansion(), expansion()).prop_map(|(d, s)| LieElement::new(0, d, s))
}

fn upper() -> impl Strategy<Value = C> {
    (-0.5f64..0.5, 0.6f64..1.5).prop_map(|(re, im)| Complex::new(re, im))
}

fn lie_diff(a: &LieElement<f64>, b: &LieElement<f64>) -> f64 {
    a.max_abs_diff(b) / a.max_magnitude().max(b.max_magnitude()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_bracket_is_antisymmetric(x in exact_quad(4), y in exact_quad(4)) {
        let xy = x.bracket(&y).unwrap();
        let yx = y.bracket(&x).unwrap();
        prop_assert!(xy.add(&yx).unwrap().is_zero());
    }

    #[test]
    fn exact_jacobi(x in exact_quad(2), y in exact_quad(2), z in exact_quad(2)) {
        let a = x.bracket(&y.bracket(&z).unwrap()).unwrap();
        let b = y.bracket(&z.bracket(&x).unwrap()).unwrap();
        let c = z.bracket(&x.bracket(&y).unwrap()).unwrap();
        prop_assert!(a.add(&b).unwrap().add(&c).unwrap().is_zero());
    }

    #[test]
    fn exact_slash_is_a_right_action(x in exact_quad(4), g in sl2z(), h in sl2z()) {
        prop_assert_eq!(x.slash(&g).slash(&h), x.slash(&g.mul(&h)));
        prop_assert_eq!(x.slash(&GroupElement::identity()), x.clone());
    }

    #[test]
    fn exact_slash_is_equivariant(x in exact_quad(4), y in exact_quad(4), g in sl2z()) {
        let lhs = x.slash(&g).bracket(&y.slash(&g)).unwrap();
        prop_assert_eq!(lhs, x.bracket(&y).unwrap().slash(&g));
    }

    #[test]
    fn exact_phi_commutes_with_bracket_and_slash(x in exact_quad(0), y in exact_quad(0), g in sl2z(), k in 1i64..10) {
        let lhs = x.bracket(&y).unwrap().phi_k(k).unwrap();
        prop_assert_eq!(lhs, x.phi_k(k).unwrap().bracket(&y.phi_k(k).unwrap()).unwrap());
        prop_assert_eq!(x.slash(&g).phi_k(k).unwrap(), x.phi_k(k).unwrap().slash(&g));
    }

    #[test]
    fn minus_identity_acts_trivially(x in exact_quad(4)) {
        prop_assert_eq!(x.slash(&GroupElement::minus_identity()), x);
    }

    #[test]
    fn lie_bracket_antisymmetry_and_jacobi(x in lie0(), y in lie0(), z in lie0()) {
        let xy = x.bracket(&y).unwrap();
        let yx = y.bracket(&x).unwrap();
        prop_assert!(lie_diff(&xy, &yx.scale(Complex::new(-1.0, 0.0))) < 1e-12);
        let j = x.bracket(&y.bracket(&z).unwrap()).unwrap()
            .add(&y.bracket(&z.bracket(&x).unwrap()).unwrap()).unwrap()
            .add(&z.bracket(&x.bracket(&y).unwrap()).unwrap()).unwrap();
        prop_assert!(j.max_magnitude() < 1e-9 * x.max_magnitude().max(1.0).powi(3) * 100.0);
    }

    #[test]
    fn bracket_is_the_operator_commutator(x in lie0(), y in lie0(), k in 0i64..9) {
        let (xk, yk) = (x.phi_k(k).unwrap(), y.phi_k(k).unwrap());
        let (a, b) = (DiffOp::from_lie(&xk), DiffOp::from_lie(&yk));
        let commutator = a.compose(&b).sub(&b.compose(&a));
        let image = DiffOp::from_lie(&x.bracket(&y).unwrap().phi_k(k).unwrap());
        let scale = commutator.max_magnitude().max(1.0);
        prop_assert!(commutator.max_abs_diff(&image) / scale < 1e-12);
    }

    #[test]
    fn restricted_slash_matches_operator_slash(q in float_quad(4), g in gamma0_5(), tau in upper()) {
        prop_assume!(g.c() != 0);
        let x = q.to_lie_element(NQ);
        let exact = x.slash_poly(&g).unwrap();
        prop_assert!(exact.shape_defect() < 1e-12);
        let point = x.slash_eval(&g, tau, 1e-6).unwrap();
        let expected = exact.eval(tau).unwrap();
        prop_assert!(point.dist(&expected) < 1e-9 * (1.0 + exact.max_magnitude()));
    }

    #[test]
    fn group_laws(g in sl2z(), h in sl2z(), k in sl2z(), tau in upper()) {
        prop_assert_eq!(g.mul(&h).mul(&k), g.mul(&h.mul(&k)));
        prop_assert_eq!(g.mul(&g.inverse()), GroupElement::identity());
        let gh = g.mul(&h);
        let ht = h.mobius(tau).unwrap();
        let j = g.automorphy(ht) * h.automorphy(tau);
        prop_assert!((gh.automorphy(tau) - j).norm() < 1e-9 * j.norm().max(1.0));
        let lhs = gh.mobius(tau).unwrap();
        let rhs = g.mobius(ht).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
    }

    #[test]
    fn gamma0_is_closed(g in gamma0_5(), h in gamma0_5()) {
        prop_assert!(g.mul(&h).is_member(5));
        prop_assert!(g.inverse().is_member(5));
    }

    #[test]
    fn expansion_ring_laws(a in expansion(), b in expansion(), c in expansion()) {
        prop_assert!(a.mul(&b).approx_eq(&b.mul(&a), 1e-12));
        prop_assert!(a.mul(&b.add(&c)).approx_eq(&a.mul(&b).add(&a.mul(&c)), 1e-12));
        let leibniz = a.differentiate().mul(&b).add(&a.mul(&b.differentiate()));
        let d = a.mul(&b).differentiate();
        prop_assert!(d.max_abs_diff(&leibniz) < 1e-9 * d.max_magnitude().max(1.0));
    }

    #[test]
    fn cusp_integral_inverts_the_derivative(a in expansion()) {
        let mut terms: Vec<_> = a.terms().to_vec();
        terms[0] = Poly::zero();
        let f = MixedExpansion::from_terms(NQ, terms);
        let back = f.integrate_to_cusp().unwrap().differentiate();
        prop_assert!(back.add(&f).max_abs_diff(&MixedExpansion::zero(NQ)) < 1e-9 * f.max_magnitude().max(1.0));
    }
}

fn two_var_lie(qs: &[QuadraticLie<C>]) -> RhoSeriesOp<f64> {
    let idx = [vec![1, 0], vec![0, 1], vec![1, 1], vec![2, 0]];
    let terms: Vec<_> = idx.iter().zip(qs).map(|(m, q)| (m.clone(), q.to_lie_element(NQ))).collect();
    RhoSeriesOp::from_lie(2, 3, NQ, &terms).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bch_stays_lie_valued(
        x in prop::collection::vec(float_quad(4), 4),
        y in prop::collection::vec(float_quad(4), 4),
    ) {
        let (a, b) = (two_var_lie(&x), two_var_lie(&y));
        let z = a.bch(&b);
        prop_assert!(z.is_ok(), "{:?}", z.err());
        prop_assert!(z.unwrap().is_lie_valued());
    }

    #[test]
    fn bch_low_orders(x in float_quad(4), y in float_quad(4)) {
        let a = RhoSeriesOp::from_lie(2, 2, NQ, &[(vec![1, 0], x.to_lie_element(NQ))]).unwrap();
        let b = RhoSeriesOp::from_lie(2, 2, NQ, &[(vec![0, 1], y.to_lie_element(NQ))]).unwrap();
        let z = a.bch(&b).unwrap();
        let half = x.bracket(&y).unwrap().scale(&Complex::new(0.5, 0.0));
        let expected = RhoSeriesOp::from_lie(2, 2, NQ, &[
            (vec![1, 0], x.to_lie_element(NQ)),
            (vec![0, 1], y.to_lie_element(NQ)),
            (vec![1, 1], half.to_lie_element(NQ)),
        ]).unwrap();
        prop_assert!(z.scaled_diff(&expected) < 1e-12);
    }

    #[test]
    fn exp_log_roundtrip_to_order_four(qs in prop::collection::vec(float_quad(4), 4)) {
        let x = RhoSeriesOp::from_quadratics(4, NQ, 4, &qs).unwrap();
        let e = x.exp_op().unwrap();
        let scale = e.max_magnitude().max(1.0);
        prop_assert!(e.log_op().unwrap().scaled_diff(&x) / scale < 1e-12);
        let id = RhoSeriesOp::identity(1, 4, 4, NQ).unwrap();
        prop_assert!(e.compose(&e.inverse().unwrap()).unwrap().scaled_diff(&id) / scale < 1e-12);
    }
}
