//! Pairs `(C, Φ)` acting on cocycles by `A_γ ↦ C‖γ · Φ(A_γ) · C⁻¹`, with
//! `Φ` a letterwise rescaling of the `ρ` variables.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::scalar::Real;

use super::ops::{MultiIndex, RhoSeriesOp};

/// `ρᵢ ↦ Σ_{l≥1} λ_{i,l} ρᵢˡ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LetterScaling<R: Real> {
    lambdas: Vec<Vec<Complex<R>>>,
}

impl<R: Real> LetterScaling<R> {
    /// `lambdas[i][l−1] = λ_{i,l}`.
    pub fn new(lambdas: Vec<Vec<Complex<R>>>) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::Unsupported("a scaling needs at least one variable".into()));
        }
        Ok(LetterScaling { lambdas })
    }

    pub fn identity(n_vars: usize) -> Self {
        LetterScaling { lambdas: vec![vec![Complex::one()]; n_vars] }
    }

    /// `ρ ↦ λ₁ρ + λ₂ρ²` in one variable.
    pub fn single(l1: Complex<R>, l2: Complex<R>) -> Self {
        LetterScaling { lambdas: vec![vec![l1, l2]] }
    }

    pub fn n_vars(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambda(&self, letter: usize, power: usize) -> Complex<R> {
        self.lambdas.get(letter).and_then(|v| v.get(power.wrapping_sub(1))).copied().unwrap_or_else(Complex::zero)
    }

    /// Coefficients of `sᵢ(ρ)ᵉ` up to degree `max`.
    fn power_series(&self, letter: usize, e: u32, max: usize) -> Vec<Complex<R>> {
        let mut s = vec![Complex::zero(); max + 1];
        for l in 1..=max {
            s[l] = self.lambda(letter, l);
        }
        let mut acc = vec![Complex::zero(); max + 1];
        acc[0] = Complex::one();
        for _ in 0..e {
            acc = truncated_mul(&acc, &s, max);
        }
        acc
    }

    /// Image of `ρ^m` as a list of monomials with coefficients.
    pub fn monomial_image(&self, m: &[u32], max: usize) -> Vec<(MultiIndex, Complex<R>)> {
        let mut out: Vec<(MultiIndex, Complex<R>)> = vec![(Vec::new(), Complex::one())];
        for (i, &e) in m.iter().enumerate() {
            let ser = self.power_series(i, e, max);
            let mut next = Vec::new();
            for (idx, c) in &out {
                let used: usize = idx.iter().map(|&x| x as usize).sum();
                for (d, v) in ser.iter().enumerate() {
                    if used + d > max || v.is_zero() {
                        continue;
                    }
                    let mut k = idx.clone();
                    k.push(d as u32);
                    next.push((k, *c * *v));
                }
            }
            out = next;
        }
        out
    }

    /// `self ∘ o`, i.e. `o` applied first.
    pub fn compose(&self, o: &Self, max: usize) -> Result<Self> {
        if self.n_vars() != o.n_vars() {
            return Err(Error::Incompatible("scalings in different numbers of variables".into()));
        }
        // substitute ρ ↦ sᵢ(ρ) into the series of `o`
        let lambdas = (0..self.n_vars())
            .map(|i| {
                let mut acc = vec![Complex::zero(); max + 1];
                for l in 1..=max {
                    let c = o.lambda(i, l);
                    if c.is_zero() {
                        continue;
                    }
                    let p = self.power_series(i, l as u32, max);
                    for (a, b) in acc.iter_mut().zip(&p) {
                        *a = *a + c * *b;
                    }
                }
                acc[1..].to_vec()
            })
            .collect();
        Ok(LetterScaling { lambdas })
    }
}

fn truncated_mul<R: Real>(a: &[Complex<R>], b: &[Complex<R>], max: usize) -> Vec<Complex<R>> {
    let mut out = vec![Complex::zero(); max + 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate().take(max + 1 - i) {
            out[i + j] = out[i + j] + *x * *y;
        }
    }
    out
}

/// `(C, Φ)` with `C` group-valued with restricted logarithm.
#[derive(Clone, Debug)]
pub struct MonoidElement<R: Real> {
    pub c: RhoSeriesOp<R>,
    pub phi: LetterScaling<R>,
}

impl<R: Real> MonoidElement<R> {
    pub fn identity(n_vars: usize, rho_max: usize, nq: usize) -> Result<Self> {
        Ok(MonoidElement { c: RhoSeriesOp::identity(n_vars, rho_max, 0, nq)?, phi: LetterScaling::identity(n_vars) })
    }

    /// `C‖γ · Φ(A_γ) · C⁻¹`.
    pub fn act(&self, a: &RhoSeriesOp<R>, g: &GroupElement, tol: f64) -> Result<RhoSeriesOp<R>> {
        let left = self.c.slash_restricted(g, tol)?;
        left.compose(&a.substitute(&self.phi)?)?.compose(&self.c.inverse()?)
    }

    /// `(C₁, Φ₁)(C₂, Φ₂) = (C₁Φ₁(C₂), Φ₁∘Φ₂)`.
    pub fn product(&self, o: &Self) -> Result<Self> {
        let c = self.c.compose(&o.c.substitute(&self.phi)?)?;
        Ok(MonoidElement { c, phi: self.phi.compose(&o.phi, self.c.rho_max())? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defalg::QuadraticLie;
    use crate::scalar::cx;

    const NQ: usize = 4;

    fn group_series(p1: [f64; 3], p2: [f64; 3]) -> RhoSeriesOp<f64> {
        let q = |p: [f64; 3]| QuadraticLie::new(0, p.map(|x| cx(x, 0.0)));
        let mut log = std::collections::BTreeMap::new();
        log.insert(vec![1], q(p1));
        log.insert(vec![2], q(p2));
        RhoSeriesOp::from_log_quadratics(1, 2, 0, NQ, &log).unwrap()
    }

    #[test]
    fn scaling_substitution() {
        let phi = LetterScaling::single(cx(2.0, 0.0), cx(3.0, 0.0));
        let img = phi.monomial_image(&[1], 2);
        assert_eq!(img, vec![(vec![0], cx(0.0, 0.0)), (vec![1], cx(2.0, 0.0)), (vec![2], cx(3.0, 0.0))].into_iter().filter(|(_, c)| *c != cx(0.0, 0.0)).collect::<Vec<_>>());
        let sq = phi.monomial_image(&[2], 2);
        assert_eq!(sq, vec![(vec![2], cx(4.0, 0.0))]);
        let id = LetterScaling::<f64>::identity(1);
        assert_eq!(phi.compose(&id, 2).unwrap(), phi);
        assert_eq!(id.compose(&phi, 2).unwrap(), phi);
    }

    #[test]
    fn trivial_action() {
        let g = GroupElement::new(2, -1, 5, -2).unwrap();
        let a = group_series([1.0, 0.5, -2.0], [0.0, 1.0, 3.0]);
        let e = MonoidElement::identity(1, 2, NQ).unwrap();
        assert!(e.act(&a, &g, 1e-9).unwrap().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn action_of_product() {
        let g = GroupElement::new(1, 0, 5, 1).unwrap();
        let a = group_series([1.0, 0.5, -2.0], [0.0, 1.0, 3.0]);
        let m1 = MonoidElement { c: group_series([0.2, -1.0, 0.1], [0.3, 0.0, 0.0]), phi: LetterScaling::single(cx(2.0, 0.0), cx(-1.0, 0.0)) };
        let m2 = MonoidElement { c: group_series([0.0, 0.7, 0.4], [-0.1, 0.2, 0.0]), phi: LetterScaling::single(cx(0.5, 0.5), cx(1.5, 0.0)) };
        let two_steps = m1.act(&m2.act(&a, &g, 1e-9).unwrap(), &g, 1e-9).unwrap();
        let once = m1.product(&m2).unwrap().act(&a, &g, 1e-9).unwrap();
        assert!(two_steps.scaled_diff(&once) < 1e-12);
    }
}
