//! Differential operators `Σⱼ cⱼ∂ʲ` and truncated `ρ`-series of them.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_traits::One;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::qpoly::MixedExpansion;
use crate::scalar::{binomial, Real};

use super::lie::{LieElement, QuadraticLie};

/// Relative size below which higher `∂`-powers count as roundoff.
pub const LIE_TOL: f64 = 1e-10;

/// Largest supported total `ρ`-degree.
pub const MAX_RHO: usize = 4;

/// `Σⱼ cⱼ(τ,q)∂_τʲ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp<R: Real> {
    nq: usize,
    coeffs: Vec<MixedExpansion<R>>,
}

impl<R: Real> DiffOp<R> {
    pub fn zero(nq: usize) -> Self {
        DiffOp { nq, coeffs: Vec::new() }
    }

    pub fn identity(nq: usize) -> Self {
        Self::multiplication(MixedExpansion::one(nq))
    }

    pub fn multiplication(c: MixedExpansion<R>) -> Self {
        DiffOp::from_coeffs(c.nq(), vec![c])
    }

    pub fn from_coeffs(nq: usize, coeffs: Vec<MixedExpansion<R>>) -> Self {
        let mut op = DiffOp { nq, coeffs };
        op.trim();
        op
    }

    /// `d∂ + s`.
    pub fn from_lie(a: &LieElement<R>) -> Self {
        DiffOp::from_coeffs(a.coeff_d().nq(), vec![a.coeff_s().clone(), a.coeff_d().clone()])
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(MixedExpansion::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn coeffs(&self) -> &[MixedExpansion<R>] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> MixedExpansion<R> {
        self.coeffs.get(j).cloned().unwrap_or_else(|| MixedExpansion::zero(self.nq))
    }

    /// Highest `∂`-power with a nonzero coefficient; `None` for zero.
    pub fn order(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        DiffOp::from_coeffs(self.nq.min(o.nq), (0..n).map(|j| self.coeff(j).add(&o.coeff(j))).collect())
    }

    pub fn sub(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        DiffOp::from_coeffs(self.nq.min(o.nq), (0..n).map(|j| self.coeff(j).sub(&o.coeff(j))).collect())
    }

    pub fn scale(&self, c: Complex<R>) -> Self {
        DiffOp::from_coeffs(self.nq, self.coeffs.iter().map(|x| x.scale(c)).collect())
    }

    /// `self ∘ o`, with `∂ⁱ∘b = Σ_l binom(i,l) b⁽ˡ⁾ ∂^{i−l}`.
    pub fn compose(&self, o: &Self) -> Self {
        let nq = self.nq.min(o.nq);
        if self.is_zero() || o.is_zero() {
            return DiffOp::zero(nq);
        }
        let mut out = vec![MixedExpansion::zero(nq); self.coeffs.len() + o.coeffs.len() - 1];
        for (j, b) in o.coeffs.iter().enumerate() {
            if b.is_zero() {
                continue;
            }
            let mut deriv = b.clone();
            for l in 0..self.coeffs.len() {
                for (i, a) in self.coeffs.iter().enumerate().skip(l) {
                    if a.is_zero() {
                        continue;
                    }
                    let c = a.mul(&deriv).scale_real(R::from_int(binomial(i as u32, l as u32)));
                    out[i - l + j] = out[i - l + j].add(&c);
                }
                deriv = deriv.differentiate();
            }
        }
        DiffOp::from_coeffs(nq, out)
    }

    /// `Σⱼ cⱼ f⁽ʲ⁾`.
    pub fn apply(&self, f: &MixedExpansion<R>) -> MixedExpansion<R> {
        let mut acc = MixedExpansion::zero(self.nq.min(f.nq()));
        let mut deriv = f.clone();
        for (j, c) in self.coeffs.iter().enumerate() {
            if j > 0 {
                deriv = deriv.differentiate();
            }
            acc = acc.add(&c.mul(&deriv));
        }
        acc
    }

    /// Back to `d∂ + s` when the order is at most one.
    pub fn to_lie(&self, weight: i64) -> Result<LieElement<R>> {
        if self.order().is_some_and(|o| o > 1) {
            return Err(Error::LieClosure { index: Vec::new(), order: self.order().unwrap_or(0) });
        }
        Ok(LieElement::new(weight, self.coeff(1), self.coeff(0)))
    }

    pub fn is_polynomial(&self) -> bool {
        self.coeffs.iter().all(MixedExpansion::is_polynomial)
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let n = self.coeffs.len().max(o.coeffs.len());
        (0..n).map(|j| self.coeff(j).max_abs_diff(&o.coeff(j))).fold(0.0, f64::max)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.coeffs.iter().map(MixedExpansion::max_magnitude).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(self.coeffs.iter().map(MixedExpansion::to_json).collect())
    }
}

/// Exponent vector of a monomial in `ρ₁,…,ρₙ`.
pub type MultiIndex = Vec<u32>;

fn total(m: &[u32]) -> usize {
    m.iter().map(|&x| x as usize).sum()
}

/// `Σ_m A_m ρ^m` truncated at total degree `rho_max`, operators of weight `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RhoSeriesOp<R: Real> {
    n_vars: usize,
    rho_max: usize,
    weight: i64,
    nq: usize,
    coeffs: BTreeMap<MultiIndex, DiffOp<R>>,
}

impl<R: Real> RhoSeriesOp<R> {
    pub fn zero(n_vars: usize, rho_max: usize, weight: i64, nq: usize) -> Result<Self> {
        if rho_max > MAX_RHO {
            return Err(Error::Unsupported(format!("rho order {rho_max} above {MAX_RHO}")));
        }
        if n_vars == 0 {
            return Err(Error::Unsupported("a series needs at least one variable".into()));
        }
        Ok(RhoSeriesOp { n_vars, rho_max, weight, nq, coeffs: BTreeMap::new() })
    }

    pub fn identity(n_vars: usize, rho_max: usize, weight: i64, nq: usize) -> Result<Self> {
        let mut s = Self::zero(n_vars, rho_max, weight, nq)?;
        s.coeffs.insert(vec![0; n_vars], DiffOp::identity(nq));
        Ok(s)
    }

    /// `Σ_m X_m ρ^m` from Lie coefficients, all of the same weight.
    pub fn from_lie(n_vars: usize, rho_max: usize, nq: usize, terms: &[(MultiIndex, LieElement<R>)]) -> Result<Self> {
        let weight = terms.first().map_or(0, |(_, x)| x.weight());
        let mut s = Self::zero(n_vars, rho_max, weight, nq)?;
        for (m, x) in terms {
            if x.weight() != weight {
                return Err(Error::WeightMismatch(weight, x.weight()));
            }
            s.set(m.clone(), DiffOp::from_lie(x))?;
        }
        Ok(s)
    }

    /// Single-variable series `Σ_m X_m ρ^m` from quadratic Lie coefficients.
    pub fn from_quadratics(rho_max: usize, nq: usize, weight: i64, terms: &[QuadraticLie<Complex<R>>]) -> Result<Self> {
        let mut s = Self::zero(1, rho_max, weight, nq)?;
        for (i, q) in terms.iter().enumerate() {
            if q.weight != weight {
                return Err(Error::WeightMismatch(weight, q.weight));
            }
            s.set(vec![i as u32 + 1], DiffOp::from_lie(&q.to_lie_element(nq)))?;
        }
        Ok(s)
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }
    pub fn rho_max(&self) -> usize {
        self.rho_max
    }
    pub fn weight(&self) -> i64 {
        self.weight
    }
    pub fn nq(&self) -> usize {
        self.nq
    }

    pub fn coefficient(&self, m: &[u32]) -> DiffOp<R> {
        self.coeffs.get(m).cloned().unwrap_or_else(|| DiffOp::zero(self.nq))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &DiffOp<R>)> {
        self.coeffs.iter()
    }

    /// Stores a coefficient; indices beyond `rho_max` are dropped.
    pub fn set(&mut self, m: MultiIndex, op: DiffOp<R>) -> Result<()> {
        if m.len() != self.n_vars {
            return Err(Error::Incompatible(format!("index {m:?} for {} variables", self.n_vars)));
        }
        if total(&m) > self.rho_max {
            return Ok(());
        }
        if op.is_zero() {
            self.coeffs.remove(&m);
        } else {
            self.coeffs.insert(m, op);
        }
        Ok(())
    }

    fn check_compatible(&self, o: &Self) -> Result<()> {
        if self.n_vars != o.n_vars || self.rho_max != o.rho_max {
            return Err(Error::Incompatible(format!(
                "series in {} variables to order {} against {} variables to order {}",
                self.n_vars, self.rho_max, o.n_vars, o.rho_max
            )));
        }
        if self.weight != o.weight {
            return Err(Error::WeightMismatch(self.weight, o.weight));
        }
        Ok(())
    }

    fn empty(&self) -> Self {
        RhoSeriesOp { coeffs: BTreeMap::new(), nq: self.nq, ..*self }
    }

    fn with_coeffs(&self, coeffs: BTreeMap<MultiIndex, DiffOp<R>>) -> Self {
        let coeffs = coeffs.into_iter().filter(|(_, op)| !op.is_zero()).collect();
        RhoSeriesOp { coeffs, ..self.empty() }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_compatible(o)?;
        let mut out = self.coeffs.clone();
        for (m, op) in &o.coeffs {
            let cur = out.remove(m).unwrap_or_else(|| DiffOp::zero(self.nq));
            out.insert(m.clone(), cur.add(op));
        }
        Ok(self.with_coeffs(out))
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(-Complex::<R>::one()))
    }

    pub fn scale(&self, c: Complex<R>) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|(m, op)| (m.clone(), op.scale(c))).collect())
    }

    /// `ρ`-graded composition `self ∘ o`.
    pub fn compose(&self, o: &Self) -> Result<Self> {
        self.check_compatible(o)?;
        let mut out: BTreeMap<MultiIndex, DiffOp<R>> = BTreeMap::new();
        for (m1, a) in &self.coeffs {
            for (m2, b) in &o.coeffs {
                if total(m1) + total(m2) > self.rho_max {
                    continue;
                }
                let m: MultiIndex = m1.iter().zip(m2).map(|(x, y)| x + y).collect();
                let c = a.compose(b);
                let cur = out.remove(&m).unwrap_or_else(|| DiffOp::zero(self.nq));
                out.insert(m, cur.add(&c));
            }
        }
        let r = self.with_coeffs(out);
        r.check_order_bound()?;
        Ok(r)
    }

    /// Operator order of each coefficient is at most its total degree.
    pub fn check_order_bound(&self) -> Result<()> {
        for (m, op) in &self.coeffs {
            if let Some(ord) = op.order() {
                if ord > total(m) {
                    return Err(Error::OrderBound { index: m.clone(), order: ord });
                }
            }
        }
        Ok(())
    }

    /// Every coefficient has order at most one.
    pub fn is_lie_valued(&self) -> bool {
        self.coeffs.values().all(|op| op.order().is_none_or(|o| o <= 1))
    }

    /// Drops `∂ʲ` terms with `j ≥ 2` that sit at roundoff level, failing
    /// when one exceeds `LIE_TOL` relative to the largest coefficient.
    pub fn lie_part(&self) -> Result<Self> {
        let scale = self.max_magnitude().max(1.0);
        let mut out = self.coeffs.clone();
        for (m, op) in out.iter_mut() {
            if op.coeffs.len() <= 2 {
                continue;
            }
            for (j, c) in op.coeffs.iter().enumerate().skip(2) {
                if c.max_magnitude() > LIE_TOL * scale {
                    return Err(Error::LieClosure { index: m.clone(), order: j });
                }
            }
            op.coeffs.truncate(2);
            op.trim();
        }
        Ok(self.with_coeffs(out))
    }

    pub fn constant_term(&self) -> DiffOp<R> {
        self.coefficient(&vec![0; self.n_vars])
    }

    /// Largest deviation of the constant term from `target`.
    fn constant_defect(&self, target: &DiffOp<R>) -> f64 {
        self.constant_term().max_abs_diff(target)
    }

    /// `Σⱼ xʲ/j!`; `x` must have a vanishing constant term.
    pub fn exp_op(&self) -> Result<Self> {
        if !self.constant_term().is_zero() {
            return Err(Error::Flag("exp needs a vanishing constant term".into()));
        }
        let one = Self::identity(self.n_vars, self.rho_max, self.weight, self.nq)?;
        let mut acc = one.clone();
        let mut power = one;
        let mut fact = R::one();
        for j in 1..=self.rho_max {
            power = power.compose(self)?;
            fact = fact * R::from_int(j as i64);
            acc = acc.add(&power.scale(Complex::new(R::one() / fact, R::zero())))?;
        }
        Ok(acc)
    }

    /// `Σⱼ (−1)^{j+1}(A − 1)ʲ/j`; `A` must have constant term 1.
    pub fn log_op(&self) -> Result<Self> {
        let one = Self::identity(self.n_vars, self.rho_max, self.weight, self.nq)?;
        let defect = self.constant_defect(&DiffOp::identity(self.nq));
        if defect > 1e-12 {
            return Err(Error::Flag(format!("log needs constant term 1, off by {defect:e}")));
        }
        let mut y = self.sub(&one)?;
        y.coeffs.remove(&vec![0; self.n_vars]);
        let mut acc = self.empty();
        let mut power = one;
        for j in 1..=self.rho_max {
            power = power.compose(&y)?;
            let sign = if j % 2 == 1 { R::one() } else { -R::one() };
            acc = acc.add(&power.scale(Complex::new(sign / R::from_int(j as i64), R::zero())))?;
        }
        Ok(acc)
    }

    /// `log(exp(x)·exp(y))`, asserting Lie closure when both inputs are
    /// Lie-valued.
    pub fn bch(&self, y: &Self) -> Result<Self> {
        let z = self.exp_op()?.compose(&y.exp_op()?)?.log_op()?;
        if self.is_lie_valued() && y.is_lie_valued() {
            return z.lie_part();
        }
        Ok(z)
    }

    /// Inverse of a series with constant term 1.
    pub fn inverse(&self) -> Result<Self> {
        self.log_op()?.scale(-Complex::<R>::one()).exp_op()
    }

    /// Applies the operator series to a `ρ`-series of functions.
    pub fn apply(&self, f: &BTreeMap<MultiIndex, MixedExpansion<R>>) -> BTreeMap<MultiIndex, MixedExpansion<R>> {
        let mut out: BTreeMap<MultiIndex, MixedExpansion<R>> = BTreeMap::new();
        for (m1, a) in &self.coeffs {
            for (m2, g) in f {
                if total(m1) + total(m2) > self.rho_max {
                    continue;
                }
                let m: MultiIndex = m1.iter().zip(m2).map(|(x, y)| x + y).collect();
                let v = a.apply(g);
                let cur = out.remove(&m).unwrap_or_else(|| MixedExpansion::zero(v.nq()));
                out.insert(m, cur.add(&v));
            }
        }
        out
    }

    /// Applies to a function sitting in degree zero.
    pub fn apply_to(&self, f: &MixedExpansion<R>) -> BTreeMap<MultiIndex, MixedExpansion<R>> {
        let mut input = BTreeMap::new();
        input.insert(vec![0; self.n_vars], f.clone());
        self.apply(&input)
    }

    /// `ρᵢ ↦ Σ_l λ_{i,l} ρᵢˡ` applied to every monomial.
    pub fn substitute(&self, phi: &super::monoid::LetterScaling<R>) -> Result<Self> {
        if phi.n_vars() != self.n_vars {
            return Err(Error::Incompatible(format!("scaling in {} variables for a series in {}", phi.n_vars(), self.n_vars)));
        }
        let mut out: BTreeMap<MultiIndex, DiffOp<R>> = BTreeMap::new();
        for (m, op) in &self.coeffs {
            for (mm, c) in phi.monomial_image(m, self.rho_max) {
                let cur = out.remove(&mm).unwrap_or_else(|| DiffOp::zero(self.nq));
                out.insert(mm, cur.add(&op.scale(c)));
            }
        }
        Ok(self.with_coeffs(out))
    }

    /// Quadratic form of each logarithm coefficient, for series whose
    /// logarithm has the restricted shape.
    pub fn log_quadratics(&self, tol: f64) -> Result<BTreeMap<MultiIndex, QuadraticLie<Complex<R>>>> {
        let log = self.log_op()?.lie_part()?;
        log.coeffs
            .iter()
            .map(|(m, op)| {
                let x = op.to_lie(self.weight)?;
                if x.shape_defect() > tol * x.max_magnitude().max(1.0) {
                    return Err(Error::NotRestricted);
                }
                Ok((m.clone(), x.into_restricted(f64::INFINITY)?.to_quadratic()?))
            })
            .collect()
    }

    /// Rebuilds `exp(Σ_m X_m ρ^m)` from quadratic log coefficients.
    pub fn from_log_quadratics(
        n_vars: usize,
        rho_max: usize,
        weight: i64,
        nq: usize,
        log: &BTreeMap<MultiIndex, QuadraticLie<Complex<R>>>,
    ) -> Result<Self> {
        let mut x = Self::zero(n_vars, rho_max, weight, nq)?;
        for (m, q) in log {
            x.set(m.clone(), DiffOp::from_lie(&q.to_lie_element(nq)))?;
        }
        x.exp_op()
    }

    /// Slash of a group-valued series whose logarithm lies in the restricted
    /// algebra: `exp(x)‖γ = exp(x‖γ)`.
    pub fn slash_restricted(&self, g: &GroupElement, tol: f64) -> Result<Self> {
        let log = self.log_quadratics(tol)?;
        let slashed: BTreeMap<_, _> = log.into_iter().map(|(m, q)| (m, q.slash(g))).collect();
        Self::from_log_quadratics(self.n_vars, self.rho_max, self.weight, self.nq, &slashed)
    }

    /// Largest coefficient difference divided by `max(1, largest entry)`.
    pub fn scaled_diff(&self, o: &Self) -> f64 {
        let scale = self.max_magnitude().max(o.max_magnitude()).max(1.0);
        self.max_abs_diff(o) / scale
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let mut keys: Vec<&MultiIndex> = self.coeffs.keys().chain(o.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().map(|m| self.coefficient(m).max_abs_diff(&o.coefficient(m))).fold(0.0, f64::max)
    }

    pub fn max_magnitude(&self) -> f64 {
        self.coeffs.values().map(DiffOp::max_magnitude).fold(0.0, f64::max)
    }

    /// `{"n_vars","rho_max","weight","terms":[[index, [expansion per ∂-order]], …]}`.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self.coeffs.iter().map(|(m, op)| json!([m, op.to_json()])).collect();
        json!({"n_vars": self.n_vars, "rho_max": self.rho_max, "weight": self.weight, "terms": terms})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |name: &str| v.get(name).and_then(Value::as_u64).ok_or_else(|| Error::Parse(format!("missing {name}")));
        let n_vars = field("n_vars")? as usize;
        let rho_max = field("rho_max")? as usize;
        let weight = v.get("weight").and_then(Value::as_i64).ok_or_else(|| Error::Parse("missing weight".into()))?;
        let terms = v.get("terms").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing terms".into()))?;
        let mut nq = 0;
        let mut parsed = Vec::new();
        for t in terms {
            let m: MultiIndex = serde_json::from_value(t[0].clone()).map_err(|e| Error::Parse(e.to_string()))?;
            let ops = t[1].as_array().ok_or_else(|| Error::Parse("operator must be an array".into()))?;
            let coeffs = ops.iter().map(MixedExpansion::from_json).collect::<Result<Vec<_>>>()?;
            nq = coeffs.first().map_or(nq, MixedExpansion::nq);
            parsed.push((m, coeffs));
        }
        let mut s = Self::zero(n_vars, rho_max, weight, nq)?;
        for (m, coeffs) in parsed {
            s.set(m, DiffOp::from_coeffs(nq, coeffs))?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use crate::scalar::cx;

    const NQ: usize = 6;

    fn poly(c: &[f64]) -> MixedExpansion<f64> {
        MixedExpansion::from_poly(NQ, Poly::from_coeffs(c.iter().map(|&x| cx(x, 0.0)).collect()))
    }

    fn d_op(c: &[&[f64]]) -> DiffOp<f64> {
        DiffOp::from_coeffs(NQ, c.iter().map(|x| poly(x)).collect())
    }

    #[test]
    fn leibniz_example() {
        let d = d_op(&[&[], &[1.0]]);
        let t = d_op(&[&[0.0, 1.0]]);
        assert_eq!(d.compose(&t), d_op(&[&[1.0], &[0.0, 1.0]]));
        let id = DiffOp::identity(NQ);
        assert_eq!(d.compose(&id), d);
    }

    #[test]
    fn exp_and_log() {
        let x = d_op(&[&[0.5], &[1.0, 0.0, 1.0]]);
        let mut s = RhoSeriesOp::zero(1, 2, 0, NQ).unwrap();
        s.set(vec![1], x.clone()).unwrap();
        let e = s.exp_op().unwrap();
        assert_eq!(e.coefficient(&[0]), DiffOp::identity(NQ));
        assert_eq!(e.coefficient(&[1]), x);
        assert!(e.coefficient(&[2]).max_abs_diff(&x.compose(&x).scale(cx(0.5, 0.0))) < 1e-14);
        assert!(e.log_op().unwrap().max_abs_diff(&s) < 1e-14);
        let one = RhoSeriesOp::<f64>::identity(1, 2, 0, NQ).unwrap();
        assert!(one.log_op().unwrap().coeffs.is_empty());
        assert!(matches!(one.exp_op(), Err(Error::Flag(_))));
        assert!(matches!(s.log_op(), Err(Error::Flag(_))));
    }

    #[test]
    fn bch_order_two() {
        let x = LieElement::new(0, poly(&[1.0]), poly(&[]));
        let y = LieElement::new(0, poly(&[0.0, 0.0, 1.0]), poly(&[0.0, 3.0]));
        let sx = RhoSeriesOp::from_lie(1, 2, NQ, &[(vec![1], x.clone())]).unwrap();
        let sy = RhoSeriesOp::from_lie(1, 2, NQ, &[(vec![1], y.clone())]).unwrap();
        let z = sx.bch(&sy).unwrap();
        let half = x.bracket(&y).unwrap().scale(cx(0.5, 0.0));
        assert!(z.coefficient(&[2]).max_abs_diff(&DiffOp::from_lie(&half)) < 1e-14);
        assert!(z.coefficient(&[1]).max_abs_diff(&DiffOp::from_lie(&x.add(&y).unwrap())) < 1e-14);
        assert!(sx.bch(&sx.scale(cx(-1.0, 0.0))).unwrap().max_magnitude() < 1e-14);
    }

    #[test]
    fn order_bound_is_enforced() {
        let mut s = RhoSeriesOp::<f64>::zero(1, 2, 0, NQ).unwrap();
        s.set(vec![1], d_op(&[&[], &[], &[1.0]])).unwrap();
        assert!(matches!(s.check_order_bound(), Err(Error::OrderBound { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let x = LieElement::new(4, poly(&[1.0, 2.0]), poly(&[0.0, 3.0]));
        let s = RhoSeriesOp::from_lie(1, 3, NQ, &[(vec![1], x)]).unwrap().exp_op().unwrap();
        let back = RhoSeriesOp::from_json(&s.to_json()).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-14 * s.max_magnitude());
    }
}
