//! Truncated Taylor expansions at a point, used to evaluate slashed
//! operators together with their derivatives.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::groups::GroupElement;
use crate::scalar::Real;

/// `Σᵢ cᵢεⁱ` with `cᵢ = f⁽ⁱ⁾/i!`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<R: Real> {
    c: Vec<Complex<R>>,
}

impl<R: Real> Jet<R> {
    pub fn from_taylor(c: Vec<Complex<R>>) -> Self {
        assert!(!c.is_empty(), "jet needs at least a value");
        Jet { c }
    }

    /// From `[f, f′, f″, …]`.
    pub fn from_derivatives(d: &[Complex<R>]) -> Self {
        let mut fact = R::one();
        let c = d
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if i > 0 {
                    fact = fact * R::from_int(i as i64);
                }
                *v / fact
            })
            .collect();
        Jet::from_taylor(c)
    }

    pub fn constant(v: Complex<R>, order: usize) -> Self {
        let mut c = vec![Complex::zero(); order + 1];
        c[0] = v;
        Jet { c }
    }

    /// `p + ε`.
    pub fn variable(p: Complex<R>, order: usize) -> Self {
        let mut c = Self::constant(p, order).c;
        if order >= 1 {
            c[1] = Complex::one();
        }
        Jet { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> Complex<R> {
        self.c[0]
    }

    pub fn taylor(&self) -> &[Complex<R>] {
        &self.c
    }

    /// `f⁽ⁱ⁾` at the base point.
    pub fn derivative(&self, i: usize) -> Complex<R> {
        let fact = (1..=i).fold(R::one(), |f, k| f * R::from_int(k as i64));
        self.c[i] * fact
    }

    pub fn truncate(&self, order: usize) -> Self {
        Jet { c: self.c[..=order.min(self.order())].to_vec() }
    }

    fn zip(&self, o: &Self, f: impl Fn(Complex<R>, Complex<R>) -> Complex<R>) -> Self {
        let n = self.c.len().min(o.c.len());
        Jet { c: (0..n).map(|i| f(self.c[i], o.c[i])).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex<R>) -> Self {
        Jet { c: self.c.iter().map(|x| *x * s).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.c.len().min(o.c.len());
        let mut c = vec![Complex::zero(); n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] = c[i + j] + self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }

    /// `d/dε`, one order lower.
    pub fn differentiate(&self) -> Self {
        if self.c.len() == 1 {
            return Jet { c: vec![Complex::zero()] };
        }
        Jet { c: (1..self.c.len()).map(|i| self.c[i] * R::from_int(i as i64)).collect() }
    }

    /// `self(inner(ε) − inner(0))`: the outer jet is taken at `inner(0)`.
    pub fn compose(&self, inner: &Self) -> Self {
        let n = self.c.len().min(inner.c.len());
        let mut shift = inner.truncate(n - 1);
        shift.c[0] = Complex::zero();
        let mut out = Jet::constant(self.c[0], n - 1);
        let mut power = Jet::constant(Complex::one(), n - 1);
        for i in 1..n {
            power = power.mul(&shift);
            out = out.add(&power.scale(self.c[i]));
        }
        out
    }
}

/// Jet of `ε ↦ γ(τ + ε)`.
pub fn mobius_jet<R: Real>(g: &GroupElement, tau: Complex<R>, order: usize) -> Jet<R> {
    let j = g.automorphy(tau);
    let w = g.mobius_unchecked(tau);
    let mc = -R::from_int(g.c());
    let mut c = vec![w];
    // γ(τ+ε) − γτ = Σ_{m≥0} (−c)^m ε^{m+1} / j^{m+2}
    let mut num = Complex::<R>::one();
    let mut den = j * j;
    for _ in 0..order {
        c.push(num / den);
        num = num * mc;
        den = den * j;
    }
    Jet::from_taylor(c)
}

/// Jet of `ε ↦ j_γ(τ + ε)`.
pub fn automorphy_jet<R: Real>(g: &GroupElement, tau: Complex<R>, order: usize) -> Jet<R> {
    let mut c = vec![Complex::zero(); order + 1];
    c[0] = g.automorphy(tau);
    if order >= 1 {
        c[1] = Complex::new(R::from_int(g.c()), R::zero());
    }
    Jet::from_taylor(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn composition_matches_chain_rule() {
        // f(w) = w², inner(ε) = (p + ε)³
        let p = c(0.3, 0.8);
        let inner = Jet::variable(p, 3).mul(&Jet::variable(p, 3)).mul(&Jet::variable(p, 3));
        let w = inner.value();
        let outer = Jet::variable(w, 3).mul(&Jet::variable(w, 3));
        let comp = outer.compose(&inner);
        // (p+ε)^6
        let direct = (0..5).fold(Jet::variable(p, 3), |acc, _| acc.mul(&Jet::variable(p, 3)));
        for i in 0..=3 {
            assert!((comp.taylor()[i] - direct.taylor()[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn mobius_jet_matches_finite_differences() {
        let g = GroupElement::new(2, -1, 5, -2).unwrap();
        let tau = c(0.4, 0.2);
        let jet = mobius_jet(&g, tau, 2);
        let h = 1e-5;
        let f = |t: Complex<f64>| g.mobius_unchecked(t);
        let d1 = (f(tau + h) - f(tau - h)) / (2.0 * h);
        assert!((jet.derivative(1) - d1).norm() < 1e-6 * d1.norm().max(1.0));
        let d2 = (f(tau + h) - f(tau) * 2.0 + f(tau - h)) / (h * h);
        assert!((jet.derivative(2) - d2).norm() < 1e-3 * d2.norm().max(1.0));
    }
}
