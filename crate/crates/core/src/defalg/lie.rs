//! First order differential operators `f∂ + g` of a fixed weight, their
//! bracket, the weight shift `f∂ + g ↦ f∂ + (k/2)f′ + g`, and the slash
//! action, both exactly on quadratic-polynomial elements and pointwise on
//! general ones.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::mmv::slot_matrix;
use crate::poly::Poly;
use crate::qpoly::MixedExpansion;
use crate::scalar::{Field, Real};

use super::jet::{automorphy_jet, mobius_jet, Jet};

/// `f∂_τ + g` acting on weight-`k` functions.
#[derive(Clone, Debug, PartialEq)]
pub struct LieElement<R: Real> {
    weight: i64,
    d: MixedExpansion<R>,
    s: MixedExpansion<R>,
    poly_restricted: bool,
}

impl<R: Real> LieElement<R> {
    pub fn new(weight: i64, d: MixedExpansion<R>, s: MixedExpansion<R>) -> Self {
        LieElement { weight, d, s, poly_restricted: false }
    }

    /// `2p∂ + kp′` for a quadratic `p = p₀ + p₁τ + p₂τ²`.
    pub fn from_quadratic(weight: i64, p: &[Complex<R>; 3], nq: usize) -> Self {
        QuadraticLie::new(weight, *p).to_lie_element(nq)
    }

    pub fn zero(weight: i64, nq: usize) -> Self {
        LieElement { weight, d: MixedExpansion::zero(nq), s: MixedExpansion::zero(nq), poly_restricted: true }
    }

    pub fn weight(&self) -> i64 {
        self.weight
    }
    pub fn coeff_d(&self) -> &MixedExpansion<R> {
        &self.d
    }
    pub fn coeff_s(&self) -> &MixedExpansion<R> {
        &self.s
    }
    pub fn is_poly_restricted(&self) -> bool {
        self.poly_restricted
    }

    /// Marks the element restricted after checking the shape
    /// `d = 2p`, `deg p ≤ 2`, `s = (k/2)d′` to `tol`.
    pub fn into_restricted(mut self, tol: f64) -> Result<Self> {
        self.check_shape(tol)?;
        self.poly_restricted = true;
        Ok(self)
    }

    /// Distance from the restricted shape: size of the `q`-dependent and
    /// above-quadratic parts of `d`, and of `s − (k/2)d′`.
    pub fn shape_defect(&self) -> f64 {
        let head = self.d.term(0);
        let beyond = head.coeffs().iter().skip(3).map(|c| c.norm().as_f64()).fold(0.0, f64::max);
        let q_part = self.d.terms().iter().skip(1).map(|t| t.max_magnitude()).fold(0.0, f64::max);
        let expected = self.d.differentiate().scale_real(R::from_int(self.weight) / R::lit(2.0));
        beyond.max(q_part).max(self.s.max_abs_diff(&expected))
    }

    fn check_shape(&self, tol: f64) -> Result<()> {
        let defect = self.shape_defect();
        if defect > tol {
            return Err(Error::NotRestricted);
        }
        Ok(())
    }

    fn check_weight(&self, o: &Self) -> Result<()> {
        if self.weight != o.weight {
            return Err(Error::WeightMismatch(self.weight, o.weight));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_weight(o)?;
        Ok(LieElement {
            weight: self.weight,
            d: self.d.add(&o.d),
            s: self.s.add(&o.s),
            poly_restricted: self.poly_restricted && o.poly_restricted,
        })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(Complex::new(-R::one(), R::zero())))
    }

    pub fn scale(&self, c: Complex<R>) -> Self {
        LieElement { weight: self.weight, d: self.d.scale(c), s: self.s.scale(c), poly_restricted: self.poly_restricted }
    }

    /// `[f∂+g, r∂+s] = (fr′ − rf′)∂ + fs′ − rg′`.
    pub fn bracket(&self, o: &Self) -> Result<Self> {
        self.check_weight(o)?;
        let (f, g, r, s) = (&self.d, &self.s, &o.d, &o.s);
        let d = f.mul(&r.differentiate()).sub(&r.mul(&f.differentiate()));
        let sc = f.mul(&s.differentiate()).sub(&r.mul(&g.differentiate()));
        Ok(LieElement { weight: self.weight, d, s: sc, poly_restricted: self.poly_restricted && o.poly_restricted })
    }

    /// `f∂ + g ↦ f∂ + (k/2)f′ + g` from weight 0 to weight `k`.
    pub fn phi_k(&self, k: i64) -> Result<Self> {
        if self.weight != 0 {
            return Err(Error::WeightMismatch(self.weight, 0));
        }
        let s = self.s.add(&self.d.differentiate().scale_real(R::from_int(k) / R::lit(2.0)));
        Ok(LieElement { weight: k, d: self.d.clone(), s, poly_restricted: self.poly_restricted })
    }

    /// Quadratic `p` with `d = 2p`; requires the restricted shape.
    pub fn to_quadratic(&self) -> Result<QuadraticLie<Complex<R>>> {
        if !self.poly_restricted {
            return Err(Error::NotRestricted);
        }
        let half = R::lit(0.5);
        let p0 = self.d.term(0);
        Ok(QuadraticLie::new(self.weight, [p0.coeff(0) * half, p0.coeff(1) * half, p0.coeff(2) * half]))
    }

    /// Exact slash of a restricted element.
    pub fn slash_poly(&self, g: &GroupElement) -> Result<Self> {
        Ok(self.to_quadratic()?.slash(g).to_lie_element(self.d.nq()))
    }

    /// Values and derivatives of both coefficients at `w`, to `order`.
    pub fn jet_at(&self, w: Complex<R>, order: usize) -> Result<PointJet<R>> {
        Ok(PointJet {
            weight: self.weight,
            d: Jet::from_derivatives(&self.d.derivatives_at(w, order)?),
            s: Jet::from_derivatives(&self.s.derivatives_at(w, order)?),
        })
    }

    /// Pointwise `(a‖γ)(τ) = j^{−k}·a(γτ, ∂_{γτ})·j^k`:
    /// `∂`-coefficient `j²f(γτ)`, scalar `k·c·j·f(γτ) + g(γτ)`.
    pub fn slash_eval(&self, g: &GroupElement, tau: Complex<R>, min_imag: f64) -> Result<PointOp<R>> {
        Ok(self.slash_jet(g, tau, 0, min_imag)?.value())
    }

    /// Jet of `a‖γ` at `τ`.
    pub fn slash_jet(&self, g: &GroupElement, tau: Complex<R>, order: usize, min_imag: f64) -> Result<PointJet<R>> {
        let w = g.mobius_guarded(tau, min_imag)?;
        Ok(self.jet_at(w, order)?.slash(g, tau))
    }

    /// Value at `τ` of the unslashed element.
    pub fn eval(&self, tau: Complex<R>) -> Result<PointOp<R>> {
        Ok(PointOp { d: self.d.evaluate(tau)?, s: self.s.evaluate(tau)? })
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.d.max_abs_diff(&o.d).max(self.s.max_abs_diff(&o.s))
    }

    pub fn max_magnitude(&self) -> f64 {
        self.d.max_magnitude().max(self.s.max_magnitude())
    }
}

/// An operator `d·∂ + s` frozen at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointOp<R: Real> {
    pub d: Complex<R>,
    pub s: Complex<R>,
}

impl<R: Real> PointOp<R> {
    pub fn dist(&self, o: &Self) -> f64 {
        (self.d - o.d).norm().max((self.s - o.s).norm()).as_f64()
    }
}

/// Coefficient jets of an operator field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointJet<R: Real> {
    pub weight: i64,
    pub d: Jet<R>,
    pub s: Jet<R>,
}

impl<R: Real> PointJet<R> {
    pub fn value(&self) -> PointOp<R> {
        PointOp { d: self.d.value(), s: self.s.value() }
    }

    pub fn order(&self) -> usize {
        self.d.order().min(self.s.order())
    }

    /// Given jets at `γτ`, returns the jets of the slashed field at `τ`.
    pub fn slash(&self, g: &GroupElement, tau: Complex<R>) -> PointJet<R> {
        let order = self.order();
        let inner = mobius_jet(g, tau, order);
        let f = self.d.compose(&inner);
        let gg = self.s.compose(&inner);
        let j = automorphy_jet(g, tau, order);
        let d = j.mul(&j).mul(&f);
        let kc = Complex::new(R::from_int(self.weight * g.c()), R::zero());
        let s = j.mul(&f).scale(kc).add(&gg);
        PointJet { weight: self.weight, d, s }
    }

    /// Pointwise bracket; the result is one order lower.
    pub fn bracket(&self, o: &Self) -> Result<PointJet<R>> {
        if self.weight != o.weight {
            return Err(Error::WeightMismatch(self.weight, o.weight));
        }
        let n = self.order().min(o.order());
        if n == 0 {
            return Err(Error::Incompatible("bracket needs first derivatives".into()));
        }
        let (f, g, r, s) = (self.d.truncate(n), self.s.truncate(n), o.d.truncate(n), o.s.truncate(n));
        let d = f.mul(&r.differentiate()).sub(&r.mul(&f.differentiate()));
        let sc = f.mul(&s.differentiate()).sub(&r.mul(&g.differentiate()));
        let lower = |j: Jet<R>| j.truncate(n - 1);
        Ok(PointJet { weight: self.weight, d: lower(d), s: lower(sc) })
    }

    /// Pointwise weight shift; one order lower.
    pub fn phi_k(&self, k: i64) -> Result<PointJet<R>> {
        if self.weight != 0 {
            return Err(Error::WeightMismatch(self.weight, 0));
        }
        let n = self.order();
        if n == 0 {
            return Err(Error::Incompatible("weight shift needs first derivatives".into()));
        }
        let half_k = Complex::new(R::from_int(k) / R::lit(2.0), R::zero());
        let s = self.s.truncate(n - 1).add(&self.d.differentiate().scale(half_k));
        Ok(PointJet { weight: k, d: self.d.truncate(n - 1), s })
    }

    pub fn add(&self, o: &Self) -> PointJet<R> {
        PointJet { weight: self.weight, d: self.d.add(&o.d), s: self.s.add(&o.s) }
    }

    pub fn sub(&self, o: &Self) -> PointJet<R> {
        PointJet { weight: self.weight, d: self.d.sub(&o.d), s: self.s.sub(&o.s) }
    }

    pub fn scale(&self, c: Complex<R>) -> PointJet<R> {
        PointJet { weight: self.weight, d: self.d.scale(c), s: self.s.scale(c) }
    }
}

/// `2p∂ + kp′` with `p = p₀ + p₁τ + p₂τ²` over an exact or floating field.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticLie<F> {
    pub weight: i64,
    pub p: [F; 3],
}

impl<F: Field> QuadraticLie<F> {
    pub fn new(weight: i64, p: [F; 3]) -> Self {
        QuadraticLie { weight, p }
    }

    pub fn zero(weight: i64) -> Self {
        QuadraticLie { weight, p: [F::zero(), F::zero(), F::zero()] }
    }

    fn poly(&self) -> Poly<F> {
        Poly::from_coeffs(self.p.to_vec())
    }

    fn check_weight(&self, o: &Self) -> Result<()> {
        if self.weight != o.weight {
            return Err(Error::WeightMismatch(self.weight, o.weight));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_weight(o)?;
        Ok(QuadraticLie {
            weight: self.weight,
            p: [self.p[0].clone() + o.p[0].clone(), self.p[1].clone() + o.p[1].clone(), self.p[2].clone() + o.p[2].clone()],
        })
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(&-F::one()))
    }

    pub fn scale(&self, c: &F) -> Self {
        QuadraticLie { weight: self.weight, p: self.p.clone().map(|x| x * c.clone()) }
    }

    /// `[2p∂ + kp′, 2q∂ + kq′] = 2r∂ + kr′` with `r = 2(pq′ − p′q)`.
    pub fn bracket(&self, o: &Self) -> Result<Self> {
        self.check_weight(o)?;
        let (p, q) = (self.poly(), o.poly());
        let r = (&(&p * &q.derivative()) - &(&p.derivative() * &q)).scale(&F::from_int(2));
        debug_assert!(r.degree().is_none_or(|d| d <= 2));
        Ok(QuadraticLie { weight: self.weight, p: [r.coeff(0), r.coeff(1), r.coeff(2)] })
    }

    /// `p ↦ j_γ²·p(γτ)`, the same right action as on the tensor slots.
    pub fn slash(&self, g: &GroupElement) -> Self {
        let m = slot_matrix(g);
        let p = std::array::from_fn(|row| {
            (0..3).fold(F::zero(), |acc, n| acc + F::from_int(m[row][n]) * self.p[n].clone())
        });
        QuadraticLie { weight: self.weight, p }
    }

    /// Weight shift from 0 to `k`; the quadratic is unchanged.
    pub fn phi_k(&self, k: i64) -> Result<Self> {
        if self.weight != 0 {
            return Err(Error::WeightMismatch(self.weight, 0));
        }
        Ok(QuadraticLie { weight: k, p: self.p.clone() })
    }

    /// `(2p(τ), kp′(τ))`.
    pub fn eval(&self, tau: &F) -> (F, F) {
        let p = self.poly();
        (F::from_int(2) * p.eval(tau), F::from_int(self.weight) * p.derivative().eval(tau))
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        (0..3).map(|i| (self.p[i].clone() - o.p[i].clone()).magnitude()).fold(0.0, f64::max)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.p.iter().map(Field::magnitude).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.p.iter().all(|x| x.is_zero())
    }
}

impl<R: Real> QuadraticLie<Complex<R>> {
    pub fn to_lie_element(&self, nq: usize) -> LieElement<R> {
        let p = Poly::from_coeffs(self.p.to_vec());
        let two = Complex::new(R::lit(2.0), R::zero());
        let d = MixedExpansion::from_poly(nq, p.scale(&two));
        let s = MixedExpansion::from_poly(nq, p.derivative().scale(&Complex::new(R::from_int(self.weight), R::zero())));
        LieElement { weight: self.weight, d, s, poly_restricted: true }
    }
}

impl<R: Real> From<&QuadraticLie<Complex<R>>> for [Complex<R>; 3] {
    fn from(q: &QuadraticLie<Complex<R>>) -> Self {
        q.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cx;

    type L = LieElement<f64>;
    const NQ: usize = 8;

    fn poly_elem(weight: i64, d: &[f64], s: &[f64]) -> L {
        let mk = |c: &[f64]| MixedExpansion::from_poly(NQ, Poly::from_coeffs(c.iter().map(|&x| cx(x, 0.0)).collect()));
        L::new(weight, mk(d), mk(s))
    }

    #[test]
    fn bracket_examples() {
        let dt = poly_elem(0, &[1.0], &[]);
        let t2 = poly_elem(0, &[0.0, 0.0, 1.0], &[]);
        let b = dt.bracket(&t2).unwrap();
        assert!(b.max_abs_diff(&poly_elem(0, &[0.0, 2.0], &[])) < 1e-15);
        let a = poly_elem(3, &[0.5, 1.0], &[2.0, 0.0, 1.0]);
        assert!(a.bracket(&a).unwrap().max_magnitude() < 1e-15);
        assert!(matches!(dt.bracket(&a), Err(Error::WeightMismatch(0, 3))));
    }

    #[test]
    fn restricted_bracket_closed_form() {
        let k = 4;
        let p = [cx(1.0, 0.5), cx(-2.0, 0.0), cx(0.25, 1.0)];
        let q = [cx(0.0, 1.0), cx(3.0, -1.0), cx(-1.0, 0.0)];
        let a = L::from_quadratic(k, &p, NQ);
        let b = L::from_quadratic(k, &q, NQ);
        let br = a.bracket(&b).unwrap();
        // 4(pq′ − p′q)∂ + 2k(pq″ − p″q)
        let pp = Poly::from_coeffs(p.to_vec());
        let qq = Poly::from_coeffs(q.to_vec());
        let w = &(&pp * &qq.derivative()) - &(&pp.derivative() * &qq);
        let w2 = &(&pp * &qq.derivative().derivative()) - &(&pp.derivative().derivative() * &qq);
        let expected = L::new(
            k,
            MixedExpansion::from_poly(NQ, w.scale(&cx(4.0, 0.0))),
            MixedExpansion::from_poly(NQ, w2.scale(&cx(2.0 * k as f64, 0.0))),
        );
        assert!(br.max_abs_diff(&expected) < 1e-13);
        assert!(br.is_poly_restricted());
        assert!(br.shape_defect() < 1e-13);
    }

    #[test]
    fn slash_poly_examples() {
        let g = GroupElement::new(2, -1, 5, -2).unwrap();
        let a = L::from_quadratic(4, &[cx(1.0, 0.0), cx(0.5, 0.0), cx(0.0, 2.0)], NQ);
        assert_eq!(a.slash_poly(&GroupElement::identity()).unwrap(), a);
        // k = 0, p = 1: 2∂ ↦ 2(cτ+d)²∂
        let one = L::from_quadratic(0, &[cx(1.0, 0.0), cx(0.0, 0.0), cx(0.0, 0.0)], NQ);
        let img = one.slash_poly(&g).unwrap();
        let expected = poly_elem(0, &[2.0 * 4.0, 2.0 * -20.0, 2.0 * 25.0], &[]);
        assert!(img.max_abs_diff(&expected) < 1e-13);
        assert!(a.slash_poly(&g).unwrap().shape_defect() < 1e-12);
        let general = poly_elem(0, &[1.0, 0.0, 0.0, 1.0], &[]);
        assert!(matches!(general.slash_poly(&g), Err(Error::NotRestricted)));
    }

    #[test]
    fn phi_examples() {
        let t2 = poly_elem(0, &[0.0, 0.0, 1.0], &[]);
        let img = t2.phi_k(4).unwrap();
        assert!(img.max_abs_diff(&poly_elem(4, &[0.0, 0.0, 1.0], &[0.0, 4.0])) < 1e-15);
        assert_eq!(t2.phi_k(0).unwrap(), t2);
        assert!(img.phi_k(2).is_err());
    }

    #[test]
    fn scalar_only_slash_is_composition() {
        let g = GroupElement::new(2, -1, 5, -2).unwrap();
        let e = crate::modforms::eisenstein2_level::<f64>(5, 64).unwrap();
        let a = L::new(0, MixedExpansion::zero(64), e.clone());
        let tau = Complex::new(0.4, 0.2);
        let v = a.slash_eval(&g, tau, 0.05).unwrap();
        assert!(v.d.norm() < 1e-15);
        assert!((v.s - e.evaluate(g.mobius(tau).unwrap()).unwrap()).norm() < 1e-13);
    }

    #[test]
    fn slash_eval_agrees_with_slash_poly() {
        let g = GroupElement::new(1, 0, 5, 1).unwrap();
        let a = L::from_quadratic(4, &[cx(1.0, -1.0), cx(0.5, 0.0), cx(-0.3, 2.0)], NQ);
        let tau = Complex::new(-0.2, 0.2);
        let pointwise = a.slash_eval(&g, tau, 0.05).unwrap();
        let exact = a.slash_poly(&g).unwrap().eval(tau).unwrap();
        assert!(pointwise.dist(&exact) < 1e-12);
    }

    #[test]
    fn exact_rational_algebra() {
        use num_bigint::BigInt;
        use num_rational::BigRational;
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let a = QuadraticLie::new(0, [r(1, 2), r(-3, 1), r(2, 7)]);
        let g = GroupElement::new(2, -1, 5, -2).unwrap();
        let h = GroupElement::new(1, 0, 5, 1).unwrap();
        let lhs = a.slash(&g).slash(&h);
        let rhs = a.slash(&g.mul(&h));
        assert_eq!(lhs, rhs);
        let b = QuadraticLie::new(0, [r(0, 1), r(1, 3), r(-1, 1)]);
        assert_eq!(a.bracket(&b).unwrap(), b.bracket(&a).unwrap().scale(&r(-1, 1)));
        assert_eq!(a.bracket(&b).unwrap().slash(&g), a.slash(&g).bracket(&b.slash(&g)).unwrap());
    }
}
