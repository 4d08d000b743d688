//! The coefficient ring of truncated `q`-series whose coefficients are
//! polynomials in `τ`, with `q = e^{2πiτ}`.
//!
//! Terms above the stored length are zero; terms above `nq` are discarded by
//! every operation. A pure polynomial (only the `q⁰` term) therefore costs no
//! more than a polynomial regardless of `nq`.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::scalar::{nome, two_pi_i, Real};

pub type CPoly<R> = Poly<Complex<R>>;

#[derive(Clone, Debug, PartialEq)]
pub struct MixedExpansion<R: Real> {
    nq: usize,
    terms: Vec<CPoly<R>>,
}

impl<R: Real> MixedExpansion<R> {
    pub fn zero(nq: usize) -> Self {
        MixedExpansion { nq, terms: Vec::new() }
    }

    pub fn one(nq: usize) -> Self {
        Self::constant(nq, Complex::one())
    }

    pub fn constant(nq: usize, c: Complex<R>) -> Self {
        Self::from_poly(nq, Poly::constant(c))
    }

    pub fn from_poly(nq: usize, p: CPoly<R>) -> Self {
        Self::from_terms(nq, vec![p])
    }

    /// The coordinate function `τ`.
    pub fn tau(nq: usize) -> Self {
        Self::from_poly(nq, Poly::monomial(1, Complex::one()))
    }

    /// `p(τ)·qⁿ`.
    pub fn q_term(nq: usize, n: usize, p: CPoly<R>) -> Self {
        if n > nq {
            return Self::zero(nq);
        }
        let mut terms = vec![Poly::zero(); n];
        terms.push(p);
        Self::from_terms(nq, terms)
    }

    /// `Σ aₙqⁿ` with constant coefficients; `coeffs[n]` multiplies `qⁿ`.
    pub fn from_q_coeffs(nq: usize, coeffs: &[Complex<R>]) -> Self {
        Self::from_terms(nq, coeffs.iter().map(|c| Poly::constant(*c)).collect())
    }

    pub fn from_terms(nq: usize, mut terms: Vec<CPoly<R>>) -> Self {
        terms.truncate(nq + 1);
        while terms.last().is_some_and(|p| p.is_zero()) {
            terms.pop();
        }
        MixedExpansion { nq, terms }
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    /// Coefficient polynomial of `qⁿ`.
    pub fn term(&self, n: usize) -> CPoly<R> {
        self.terms.get(n).cloned().unwrap_or_else(Poly::zero)
    }

    pub fn terms(&self) -> &[CPoly<R>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when only the `q⁰` term is present.
    pub fn is_polynomial(&self) -> bool {
        self.terms.len() <= 1
    }

    pub fn is_cuspidal(&self) -> bool {
        self.term(0).is_zero()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.iter().filter_map(|p| p.degree()).max()
    }

    /// Largest coefficient magnitude over all terms.
    pub fn max_magnitude(&self) -> f64 {
        self.terms.iter().map(|p| p.max_magnitude()).fold(0.0, f64::max)
    }

    pub fn truncate(&self, nq: usize) -> Self {
        Self::from_terms(nq, self.terms.clone())
    }

    fn zip(&self, other: &Self, f: impl Fn(&CPoly<R>, &CPoly<R>) -> CPoly<R>) -> Self {
        let nq = self.nq.min(other.nq);
        let n = self.terms.len().max(other.terms.len()).min(nq + 1);
        Self::from_terms(nq, (0..n).map(|i| f(&self.term(i), &other.term(i))).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        Self::from_terms(self.nq, self.terms.iter().map(|p| -p).collect())
    }

    pub fn scale(&self, c: Complex<R>) -> Self {
        Self::from_terms(self.nq, self.terms.iter().map(|p| p.scale(&c)).collect())
    }

    pub fn scale_real(&self, c: R) -> Self {
        self.scale(Complex::new(c, R::zero()))
    }

    /// Product truncated at the smaller `nq`.
    pub fn mul(&self, other: &Self) -> Self {
        let nq = self.nq.min(other.nq);
        if self.is_zero() || other.is_zero() {
            return Self::zero(nq);
        }
        let len = (self.terms.len() + other.terms.len() - 1).min(nq + 1);
        let mut out = vec![Poly::zero(); len];
        for (i, a) in self.terms.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.terms.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Self::from_terms(nq, out)
    }

    /// Multiplies by `τ^k`.
    pub fn mul_tau_pow(&self, k: usize) -> Self {
        Self::from_terms(self.nq, self.terms.iter().map(|p| p.shift(k)).collect())
    }

    /// `d/dτ`, with `dq/dτ = 2πi·q`.
    pub fn differentiate(&self) -> Self {
        let tpi = two_pi_i::<R>();
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(n, p)| {
                let dp = p.derivative();
                if n == 0 {
                    dp
                } else {
                    &dp + &p.scale(&(tpi * R::from_int(n as i64)))
                }
            })
            .collect();
        Self::from_terms(self.nq, terms)
    }

    pub fn derivative_n(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |f, _| f.differentiate())
    }

    /// `G(τ) = ∫_τ^{i∞} F(z) dz`, termwise in closed form.
    ///
    /// For `α = 2πin`, `∫_τ^{i∞} z^j e^{αz} dz = -e^{ατ} Σ_{m=0}^{j} (-1)^m j!/(j-m)! τ^{j-m} / α^{m+1}`.
    pub fn integrate_to_cusp(&self) -> Result<Self> {
        if !self.is_cuspidal() {
            return Err(Error::Divergent);
        }
        let tpi = two_pi_i::<R>();
        let mut terms = vec![Poly::zero()];
        for (n, p) in self.terms.iter().enumerate().skip(1) {
            let alpha = tpi * R::from_int(n as i64);
            let inv = Complex::<R>::one() / alpha;
            let deg = p.coeffs().len();
            let mut out = vec![Complex::zero(); deg];
            for (j, pj) in p.coeffs().iter().enumerate() {
                if pj.is_zero() {
                    continue;
                }
                // falling factorial j!/(j-m)! times (-1)^m / α^{m+1}
                let mut factor = -inv;
                for m in 0..=j {
                    out[j - m] = out[j - m] + *pj * factor;
                    factor = -factor * R::from_int((j - m) as i64) * inv;
                }
            }
            terms.push(Poly::from_coeffs(out));
        }
        Ok(Self::from_terms(self.nq, terms))
    }

    /// `Σₙ pₙ(τ) e^{2πinτ}`.
    pub fn evaluate(&self, tau: Complex<R>) -> Result<Complex<R>> {
        self.evaluate_with_bound(tau).map(|(v, _)| v)
    }

    /// Value together with the truncation bound `|q|^{nq+1}·B`, where `B`
    /// bounds the growth of the stored coefficients.
    pub fn evaluate_with_bound(&self, tau: Complex<R>) -> Result<(Complex<R>, R)> {
        if !(tau.im > R::zero()) {
            return Err(Error::NotUpperHalfPlane { re: tau.re.as_f64(), im: tau.im.as_f64() });
        }
        let q = nome(tau);
        let mut acc = Complex::zero();
        for p in self.terms.iter().rev() {
            acc = acc * q + p.eval(&tau);
        }
        let bound = self.truncation_bound(tau, q);
        Ok((acc, bound))
    }

    fn truncation_bound(&self, tau: Complex<R>, q: Complex<R>) -> R {
        let len = self.terms.len();
        if len <= 1 || len <= self.nq {
            return R::zero();
        }
        // Extrapolate from the largest of the trailing coefficients.
        let tail = len.saturating_sub(8).max(1);
        let mut b = R::zero();
        for n in tail..len {
            let v = self.terms[n].eval(&tau).norm();
            if v > b {
                b = v;
            }
        }
        let aq = q.norm();
        let growth = R::from_int((self.nq + 1) as i64).powi(3);
        let geo = R::one() / (R::one() - aq);
        aq.powi((self.nq + 1) as i32) * b * growth * geo
    }

    /// `[f(τ), f′(τ), …, f^{(order)}(τ)]`.
    pub fn derivatives_at(&self, tau: Complex<R>, order: usize) -> Result<Vec<Complex<R>>> {
        let mut f = self.clone();
        let mut out = Vec::with_capacity(order + 1);
        for i in 0..=order {
            out.push(f.evaluate(tau)?);
            if i < order {
                f = f.differentiate();
            }
        }
        Ok(out)
    }

    /// Largest coefficientwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.terms.len().max(other.terms.len());
        (0..n)
            .map(|i| (&self.term(i) - &other.term(i)).max_magnitude())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Largest coefficientwise relative difference, each coefficient measured
    /// against the larger of the two magnitudes (entries where both vanish are
    /// skipped).
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        let n = self.terms.len().max(other.terms.len());
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let a = self.term(i);
            let b = other.term(i);
            let m = a.coeffs().len().max(b.coeffs().len());
            for j in 0..m {
                let x = a.coeff(j);
                let y = b.coeff(j);
                let scale = x.norm().max(y.norm()).as_f64();
                if scale > 0.0 {
                    worst = worst.max((x - y).norm().as_f64() / scale);
                }
            }
        }
        worst
    }

    /// Checks the degree bound `2 + 3·depth` used for iterated integrals.
    pub fn check_degree(&self, depth: usize) -> Result<()> {
        let bound = 2 + 3 * depth;
        match self.max_degree() {
            Some(d) if d > bound => Err(Error::DegreeBound { degree: d, bound }),
            _ => Ok(()),
        }
    }

    /// Converts the coefficients to another precision through `f64`.
    pub fn cast<S: Real>(&self) -> MixedExpansion<S> {
        MixedExpansion::from_terms(
            self.nq,
            self.terms
                .iter()
                .map(|p| p.map(|c| Complex::new(S::lit(c.re.as_f64()), S::lit(c.im.as_f64()))))
                .collect(),
        )
    }

    /// `{"nq": n, "terms": [[n, [[re, im], …]], …]}` with zero terms omitted.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(n, p)| {
                let cs: Vec<Value> =
                    p.coeffs().iter().map(|c| json!([fmt15(c.re.as_f64()), fmt15(c.im.as_f64())])).collect();
                json!([n, cs])
            })
            .collect();
        json!({ "nq": self.nq, "terms": terms })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::Parse(format!("expansion: {m}"));
        let nq = v.get("nq").and_then(Value::as_u64).ok_or_else(|| bad("missing nq"))? as usize;
        let mut terms: Vec<CPoly<R>> = Vec::new();
        for t in v.get("terms").and_then(Value::as_array).ok_or_else(|| bad("missing terms"))? {
            let n = t.get(0).and_then(Value::as_u64).ok_or_else(|| bad("term exponent"))? as usize;
            if n > nq {
                return Err(bad("exponent above nq"));
            }
            let cs = t.get(1).and_then(Value::as_array).ok_or_else(|| bad("term coefficients"))?;
            let mut coeffs = Vec::with_capacity(cs.len());
            for c in cs {
                let re = c.get(0).and_then(Value::as_f64).ok_or_else(|| bad("coefficient"))?;
                let im = c.get(1).and_then(Value::as_f64).ok_or_else(|| bad("coefficient"))?;
                coeffs.push(Complex::new(R::lit(re), R::lit(im)));
            }
            if terms.len() <= n {
                terms.resize(n + 1, Poly::zero());
            }
            terms[n] = Poly::from_coeffs(coeffs);
        }
        Ok(Self::from_terms(nq, terms))
    }
}

/// Rounds to 15 significant digits for reproducible output.
pub fn fmt15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}
