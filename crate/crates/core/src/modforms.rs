//! Cusp forms from eta quotients or coefficient files, the level-`N` weight-2
//! Eisenstein combination, Eichler integrals and period polynomials.

use std::path::Path;

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::linalg::{fit_quadratic, QuadraticFit};
use crate::poly::Poly;
use crate::qpoly::MixedExpansion;
use crate::scalar::{cx_int, Real};

/// A holomorphic cusp form given by its `q`-expansion `Σ_{n≥1} aₙqⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CuspForm<R: Real> {
    weight: u32,
    level: i64,
    /// `coeffs[n]` multiplies `qⁿ`; `coeffs[0] = 0`.
    coeffs: Vec<Complex<R>>,
    label: String,
}

/// `q`-expansion of `∏ η(mτ)^e` up to `q^{nq}`; entry `n` multiplies `qⁿ`.
pub fn eta_product(factors: &[(i64, i64)], nq: usize) -> Result<Vec<i64>> {
    let mut shift: i64 = 0;
    for &(m, e) in factors {
        if m <= 0 || e <= 0 {
            return Err(Error::EtaFactor { m, e });
        }
        shift += m * e;
    }
    if shift % 24 != 0 {
        return Err(Error::FractionalPower { num: shift });
    }
    let shift = (shift / 24) as usize;
    let mut out = vec![0i64; nq + 1];
    if shift > nq {
        return Ok(out);
    }
    let len = nq - shift + 1;
    let mut series = vec![0i128; len];
    series[0] = 1;
    for &(m, e) in factors {
        let m = m as usize;
        for _ in 0..e {
            let mut k = m;
            while k < len {
                // multiply by (1 - q^k)
                for i in (k..len).rev() {
                    series[i] -= series[i - k];
                }
                k += m;
            }
        }
    }
    for (i, v) in series.into_iter().enumerate() {
        out[i + shift] = i64::try_from(v).map_err(|_| Error::Overflow)?;
    }
    Ok(out)
}

impl<R: Real> CuspForm<R> {
    /// From `q`-coefficients `a₁, a₂, …`.
    pub fn from_coefficients(weight: u32, level: i64, a: &[Complex<R>], label: impl Into<String>) -> Result<Self> {
        if weight == 0 || !weight.is_multiple_of(2) {
            return Err(Error::Config { field: "form.weight".into(), message: format!("{weight} is not a positive even integer") });
        }
        if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::Parse("non-finite coefficient".into()));
        }
        let mut coeffs = Vec::with_capacity(a.len() + 1);
        coeffs.push(Complex::zero());
        coeffs.extend_from_slice(a);
        Ok(CuspForm { weight, level, coeffs, label: label.into() })
    }

    /// From a full expansion `a₀, a₁, …`; rejects `a₀ ≠ 0`.
    pub fn from_expansion_coeffs(weight: u32, level: i64, all: &[Complex<R>], label: impl Into<String>) -> Result<Self> {
        match all.first() {
            Some(a0) if !a0.is_zero() => Err(Error::NotCuspidal),
            Some(_) => Self::from_coefficients(weight, level, &all[1..], label),
            None => Self::from_coefficients(weight, level, &[], label),
        }
    }

    /// `∏ η(mτ)^e`, weight `Σe/2`.
    pub fn from_eta(factors: &[(i64, i64)], level: i64, nq: usize, label: impl Into<String>) -> Result<Self> {
        let a = eta_product(factors, nq)?;
        let total: i64 = factors.iter().map(|f| f.1).sum();
        if total % 2 != 0 {
            return Err(Error::Config { field: "form.eta".into(), message: "odd total exponent gives odd weight".into() });
        }
        let all: Vec<Complex<R>> = a.iter().map(|&x| cx_int(x)).collect();
        Self::from_expansion_coeffs((total / 2) as u32, level, &all, label)
    }

    /// `η(τ)⁴η(5τ)⁴`, weight 4 and level 5.
    pub fn default_level5(nq: usize) -> Self {
        Self::from_eta(&[(1, 4), (5, 4)], 5, nq, "eta(z)^4 eta(5z)^4").expect("valid eta quotient")
    }

    pub fn zero(weight: u32, level: i64, nq: usize) -> Self {
        Self::from_coefficients(weight, level, &vec![Complex::zero(); nq], "zero").expect("valid")
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }
    pub fn level(&self) -> i64 {
        self.level
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn nq(&self) -> usize {
        self.coeffs.len() - 1
    }
    /// `aₙ` for `n ≥ 0`, zero beyond the stored range.
    pub fn coefficient(&self, n: usize) -> Complex<R> {
        self.coeffs.get(n).copied().unwrap_or_else(Complex::zero)
    }

    pub fn expansion(&self) -> MixedExpansion<R> {
        MixedExpansion::from_q_coeffs(self.nq(), &self.coeffs)
    }

    pub fn with_nq(&self, nq: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(nq + 1, Complex::zero());
        CuspForm { coeffs, ..self.clone() }
    }

    pub fn cast<S: Real>(&self) -> CuspForm<S> {
        CuspForm {
            weight: self.weight,
            level: self.level,
            coeffs: self.coeffs.iter().map(|c| Complex::new(S::lit(c.re.as_f64()), S::lit(c.im.as_f64()))).collect(),
            label: self.label.clone(),
        }
    }

    pub fn evaluate(&self, tau: Complex<R>) -> Result<Complex<R>> {
        self.expansion().evaluate(tau)
    }

    /// Parses the coefficient file format: `#`-prefixed `key = value` header
    /// lines for `weight`, `level` and `label`, then one coefficient per line
    /// (`re` or `re im`, separated by whitespace or a comma), starting at `a₁`.
    pub fn parse_coefficient_file(text: &str) -> Result<Self> {
        let mut weight = None;
        let mut level = None;
        let mut label = String::from("unnamed");
        let mut a = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                let Some((k, v)) = h.split_once('=') else { continue };
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "weight" => weight = Some(v.parse::<u32>().map_err(|e| Error::Parse(format!("weight: {e}")))?),
                    "level" => level = Some(v.parse::<i64>().map_err(|e| Error::Parse(format!("level: {e}")))?),
                    "label" => label = v.to_string(),
                    _ => {}
                }
                continue;
            }
            let parts: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)));
            let c = match parts.as_slice() {
                [re] => Complex::new(R::lit(num(re)?), R::zero()),
                [re, im] => Complex::new(R::lit(num(re)?), R::lit(num(im)?)),
                _ => return Err(Error::Parse(format!("line {}: expected one or two numbers", lineno + 1))),
            };
            a.push(c);
        }
        let weight = weight.ok_or_else(|| Error::Parse("coefficient file header lacks weight".into()))?;
        let level = level.ok_or_else(|| Error::Parse("coefficient file header lacks level".into()))?;
        Self::from_coefficients(weight, level, &a, label)
    }

    pub fn load_coefficient_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse_coefficient_file(&text)
    }

    pub fn to_coefficient_file(&self) -> String {
        let mut s = format!("# weight = {}\n# level = {}\n# label = {}\n", self.weight, self.level, self.label);
        for c in &self.coeffs[1..] {
            s.push_str(&format!("{:.15e} {:.15e}\n", c.re.as_f64(), c.im.as_f64()));
        }
        s
    }
}

/// `E₂(τ) − N·E₂(Nτ)` with `E₂ = 1 − 24Σσ₁(n)qⁿ`.
pub fn eisenstein2_level<R: Real>(level: i64, nq: usize) -> Result<MixedExpansion<R>> {
    if level < 2 {
        return Err(Error::Config { field: "level".into(), message: "must be at least 2".into() });
    }
    let sigma1 = |n: usize| -> i64 { (1..=n).filter(|d| n.is_multiple_of(*d)).map(|d| d as i64).sum() };
    let n_level = level as usize;
    let mut c = vec![0i64; nq + 1];
    c[0] = 1 - level;
    for n in 1..=nq {
        c[n] -= 24 * sigma1(n);
        if n % n_level == 0 {
            c[n] += 24 * level * sigma1(n / n_level);
        }
    }
    let coeffs: Vec<Complex<R>> = c.iter().map(|&x| cx_int(x)).collect();
    Ok(MixedExpansion::from_q_coeffs(nq, &coeffs))
}

/// `∫_τ^{i∞} h(z) z^j dz`.
pub fn cusp_moment<R: Real>(h: &MixedExpansion<R>, j: usize) -> Result<MixedExpansion<R>> {
    h.mul_tau_pow(j).integrate_to_cusp()
}

/// `h̃(τ) = ∫_τ^{i∞} h(z)(τ−z)² dz = τ²I₀ − 2τI₁ + I₂`.
pub fn eichler_integral<R: Real>(h: &CuspForm<R>) -> Result<MixedExpansion<R>> {
    eichler_of_expansion(&h.expansion(), h.weight())
}

/// Eichler integral `∫_τ^{i∞} F(z)(τ−z)^{k−2} dz` of a cuspidal expansion.
pub fn eichler_of_expansion<R: Real>(f: &MixedExpansion<R>, weight: u32) -> Result<MixedExpansion<R>> {
    if !f.is_cuspidal() {
        return Err(Error::NotCuspidal);
    }
    let w = weight.checked_sub(2).ok_or(Error::Unsupported("weight below 2".into()))? as usize;
    let mut acc = MixedExpansion::zero(f.nq());
    for j in 0..=w {
        // (τ − z)^w = Σ_j binom(w, j) τ^{w−j} (−z)^j
        let b = crate::scalar::binomial(w as u32, j as u32) * if j % 2 == 0 { 1 } else { -1 };
        let term = cusp_moment(f, j)?.mul_tau_pow(w - j).scale(cx_int(b));
        acc = acc.add(&term);
    }
    Ok(acc)
}

/// `j_γ(τ)²h̃(γτ) − h̃(τ)` at one point.
pub fn period_value<R: Real>(htilde: &MixedExpansion<R>, g: &GroupElement, tau: Complex<R>, min_imag: f64) -> Result<Complex<R>> {
    let w = g.mobius_guarded(tau, min_imag)?;
    let j = g.automorphy(tau);
    Ok(j * j * htilde.evaluate(w)? - htilde.evaluate(tau)?)
}

/// Quadratic fit of `τ ↦ j_γ(τ)²h̃(γτ) − h̃(τ)`; the residual is the largest
/// absolute deviation at the samples.
pub fn period_polynomial_of<R: Real>(
    htilde: &MixedExpansion<R>,
    g: &GroupElement,
    samples: &[Complex<R>],
    min_imag: f64,
) -> Result<QuadraticFit<R>> {
    if samples.len() < 6 {
        return Err(Error::Config { field: "samples".into(), message: format!("period fit needs at least 6 points, got {}", samples.len()) });
    }
    let values = samples.iter().map(|t| period_value(htilde, g, *t, min_imag)).collect::<Result<Vec<_>>>()?;
    fit_quadratic(samples, &values)
}

/// Period polynomial of `h` at `γ`, failing when the fit residual exceeds
/// `tol`.
pub fn period_polynomial<R: Real>(
    h: &CuspForm<R>,
    g: &GroupElement,
    samples: &[Complex<R>],
    tol: f64,
    min_imag: f64,
) -> Result<QuadraticFit<R>> {
    let ht = eichler_integral(h)?;
    let fit = period_polynomial_of(&ht, g, samples, min_imag)?;
    if fit.residual > tol {
        return Err(Error::Residual { what: format!("period polynomial fit at {g}"), residual: fit.residual, tolerance: tol });
    }
    Ok(fit)
}

/// `−2h′h̃ + sign·4hh̃′`; `sign = +1` is the combination used by default.
pub fn rankin_cohen_signed<R: Real>(h: &MixedExpansion<R>, htilde: &MixedExpansion<R>, sign: i64) -> MixedExpansion<R> {
    let a = h.differentiate().mul(htilde).scale(cx_int(-2));
    let b = h.mul(&htilde.differentiate()).scale(cx_int(4 * sign));
    a.add(&b)
}

/// `−2h′h̃ + 4hh̃′` for a weight-4 cusp form.
pub fn rankin_cohen_combination<R: Real>(h: &CuspForm<R>) -> Result<MixedExpansion<R>> {
    if h.weight() != 4 {
        return Err(Error::WeightMismatch(h.weight() as i64, 4));
    }
    let ht = eichler_integral(h)?;
    Ok(rankin_cohen_signed(&h.expansion(), &ht, 1))
}

/// `|j_γ(τ)^{−k}F(γτ) − F(τ)|`.
pub fn modularity_residual<R: Real>(f: &MixedExpansion<R>, weight: i32, g: &GroupElement, tau: Complex<R>, min_imag: f64) -> Result<f64> {
    let w = g.mobius_guarded(tau, min_imag)?;
    let j = g.automorphy(tau);
    Ok((f.evaluate(w)? * j.powi(-weight) - f.evaluate(tau)?).norm().as_f64())
}

/// Degree-`≤ 2` polynomial in `τ` from coefficients `[c₀, c₁, c₂]`.
pub fn quadratic_expansion<R: Real>(nq: usize, c: &[Complex<R>; 3]) -> MixedExpansion<R> {
    MixedExpansion::from_poly(nq, Poly::from_coeffs(c.to_vec()))
}
