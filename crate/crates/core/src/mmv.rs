//! Iterated Eichler integrals.
//!
//! Functional values `Λ_τ(h₁,…,h_d; n₁,…,n_d) = ∫_τ^{i∞} h₁(z₁)z₁^{n₁} Λ_{z₁}(h₂,…; n₂,…) dz₁`
//! are elements of the coefficient ring. Their generating series `I(τ)` is an
//! [`IteratedSeries`]: a word `(i₁,…,i_r)` carries a tensor over `r` copies of
//! the quadratic polynomials in `x`, flattened with the first slot most
//! significant. Letter `i₁` is integrated closest to `τ`.
//!
//! The canonical cocycle `(I(γτ)‖γ)⁻¹·I(τ)` is independent of `τ` and its
//! entries are the classical values `Λ_γ = Λ_{γ⁻¹∞}` up to the per-letter
//! normalisation and binomial bookkeeping of `(x − z)²`.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::modforms::{eichler_integral, period_polynomial_of, CuspForm};
use crate::qpoly::MixedExpansion;
use crate::quadrature::integrate_ray;
use crate::scalar::{binomial, cx_int, two_pi_i, Real};

/// Largest supported word length.
pub const MAX_DEPTH: usize = 4;

/// Dimension of one tensor slot (quadratic polynomials).
pub const SLOT_DIM: usize = 3;

/// A word with its power exponents; letters index an alphabet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MmvKey {
    pub letters: Vec<usize>,
    pub powers: Vec<u32>,
}

impl MmvKey {
    pub fn new(letters: Vec<usize>, powers: Vec<u32>) -> Result<Self> {
        if letters.len() != powers.len() {
            return Err(Error::Incompatible(format!("{} letters but {} powers", letters.len(), powers.len())));
        }
        Ok(MmvKey { letters, powers })
    }

    pub fn depth(&self) -> usize {
        self.letters.len()
    }

    fn tail(&self) -> MmvKey {
        MmvKey { letters: self.letters[1..].to_vec(), powers: self.powers[1..].to_vec() }
    }
}

/// `Λ_τ(h₁,…,h_d; n₁,…,n_d)`; the empty key gives `1`.
pub fn mmv_functional<R: Real>(forms: &[&CuspForm<R>], powers: &[u32], nq: usize) -> Result<MixedExpansion<R>> {
    if forms.len() != powers.len() {
        return Err(Error::Incompatible(format!("{} forms but {} powers", forms.len(), powers.len())));
    }
    let mut acc = MixedExpansion::one(nq);
    for (h, &n) in forms.iter().zip(powers).rev() {
        let hx = h.expansion();
        if !hx.is_cuspidal() {
            return Err(Error::NotCuspidal);
        }
        acc = hx.mul_tau_pow(n as usize).mul(&acc).integrate_to_cusp()?;
    }
    Ok(acc)
}

/// Memoised functional values over a fixed alphabet; suffixes are shared.
pub struct MmvTable<'a, R: Real> {
    alphabet: &'a [CuspForm<R>],
    nq: usize,
    cache: HashMap<MmvKey, MixedExpansion<R>>,
}

impl<'a, R: Real> MmvTable<'a, R> {
    pub fn new(alphabet: &'a [CuspForm<R>], nq: usize) -> Result<Self> {
        if alphabet.iter().any(|h| !h.expansion().is_cuspidal()) {
            return Err(Error::NotCuspidal);
        }
        Ok(MmvTable { alphabet, nq, cache: HashMap::new() })
    }

    pub fn get(&mut self, key: &MmvKey) -> Result<MixedExpansion<R>> {
        if key.depth() == 0 {
            return Ok(MixedExpansion::one(self.nq));
        }
        if let Some(v) = self.cache.get(key) {
            return Ok(v.clone());
        }
        let rest = self.get(&key.tail())?;
        let h = self
            .alphabet
            .get(key.letters[0])
            .ok_or_else(|| Error::Incompatible(format!("letter {} outside alphabet", key.letters[0])))?;
        let v = h.expansion().truncate(self.nq).mul_tau_pow(key.powers[0] as usize).mul(&rest).integrate_to_cusp()?;
        v.check_degree(key.depth())?;
        self.cache.insert(key.clone(), v.clone());
        Ok(v)
    }

    /// Fills the cache for all keys, in parallel by depth.
    pub fn prefetch(&mut self, keys: &[MmvKey]) -> Result<()> {
        let max_depth = keys.iter().map(MmvKey::depth).max().unwrap_or(0);
        for depth in 1..=max_depth {
            let mut needed: Vec<MmvKey> = keys
                .iter()
                .filter(|k| k.depth() >= depth)
                .map(|k| {
                    let s = k.depth() - depth;
                    MmvKey { letters: k.letters[s..].to_vec(), powers: k.powers[s..].to_vec() }
                })
                .filter(|k| !self.cache.contains_key(k))
                .collect();
            needed.sort();
            needed.dedup();
            let cache = &self.cache;
            let alphabet = self.alphabet;
            let nq = self.nq;
            let computed: Vec<(MmvKey, MixedExpansion<R>)> = needed
                .into_par_iter()
                .map(|k| {
                    let rest = if depth == 1 { MixedExpansion::one(nq) } else { cache[&k.tail()].clone() };
                    let h = alphabet
                        .get(k.letters[0])
                        .ok_or_else(|| Error::Incompatible(format!("letter {} outside alphabet", k.letters[0])))?;
                    let v = h.expansion().truncate(nq).mul_tau_pow(k.powers[0] as usize).mul(&rest).integrate_to_cusp()?;
                    v.check_degree(depth)?;
                    Ok((k, v))
                })
                .collect::<Result<_>>()?;
            self.cache.extend(computed);
        }
        Ok(())
    }
}

/// Entries an [`IteratedSeries`] can carry.
pub trait SeriesEntry: Clone + Send + Sync {
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale_int(&self, k: i64) -> Self;
    fn magnitude(&self) -> f64;
}

impl<R: Real> SeriesEntry for Complex<R> {
    fn zero_like(&self) -> Self {
        Complex::zero()
    }
    fn one_like(&self) -> Self {
        Complex::one()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale_int(&self, k: i64) -> Self {
        self * R::from_int(k)
    }
    fn magnitude(&self) -> f64 {
        self.norm().as_f64()
    }
}

impl<R: Real> SeriesEntry for MixedExpansion<R> {
    fn zero_like(&self) -> Self {
        MixedExpansion::zero(self.nq())
    }
    fn one_like(&self) -> Self {
        MixedExpansion::one(self.nq())
    }
    fn add(&self, o: &Self) -> Self {
        MixedExpansion::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        MixedExpansion::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        MixedExpansion::mul(self, o)
    }
    fn scale_int(&self, k: i64) -> Self {
        self.scale(cx_int(k))
    }
    fn magnitude(&self) -> f64 {
        self.max_magnitude()
    }
}

/// Flat tensor index of `(n₁,…,n_r)`, first slot most significant.
pub fn flat_index(indices: &[usize]) -> usize {
    indices.iter().fold(0, |acc, &n| acc * SLOT_DIM + n)
}

/// Inverse of [`flat_index`] for a tensor with `r` slots.
pub fn tensor_indices(flat: usize, r: usize) -> Vec<usize> {
    let mut out = vec![0; r];
    let mut f = flat;
    for slot in (0..r).rev() {
        out[slot] = f % SLOT_DIM;
        f /= SLOT_DIM;
    }
    out
}

/// Matrix of the weight `−2` right action on quadratics:
/// `xⁿ ↦ (ax+b)ⁿ(cx+d)^{2−n}`; column `n` holds the image of `xⁿ`.
pub fn slot_matrix(g: &GroupElement) -> [[i64; 3]; 3] {
    let (a, b, c, d) = (g.a(), g.b(), g.c(), g.d());
    [[d * d, b * d, b * b], [2 * c * d, a * d + b * c, 2 * a * b], [c * c, a * c, a * a]]
}

/// Applies the slot action of `γ` to every slot of a flat tensor.
pub fn slash_tensor<E: SeriesEntry>(t: &[E], r: usize, g: &GroupElement) -> Vec<E> {
    let m = slot_matrix(g);
    let mut cur = t.to_vec();
    for slot in 0..r {
        let stride = SLOT_DIM.pow((r - 1 - slot) as u32);
        let mut next: Vec<E> = cur.iter().map(|e| e.zero_like()).collect();
        for (flat, out) in next.iter_mut().enumerate() {
            let digit = (flat / stride) % SLOT_DIM;
            let base = flat - digit * stride;
            let mut acc = cur[base].zero_like();
            for n in 0..SLOT_DIM {
                let coef = m[digit][n];
                if coef != 0 {
                    acc = acc.add(&cur[base + n * stride].scale_int(coef));
                }
            }
            *out = acc;
        }
        cur = next;
    }
    cur
}

/// Depth-truncated noncommutative series with tensor coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct IteratedSeries<E> {
    letters: Vec<String>,
    depth_max: usize,
    coeffs: BTreeMap<Vec<usize>, Vec<E>>,
}

impl<E: SeriesEntry> IteratedSeries<E> {
    /// The unit series `1`.
    pub fn unit(letters: Vec<String>, depth_max: usize, one: E) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Vec::new(), vec![one]);
        IteratedSeries { letters, depth_max, coeffs }
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }
    pub fn depth_max(&self) -> usize {
        self.depth_max
    }

    pub fn one(&self) -> &E {
        &self.coeffs[&Vec::new()][0]
    }

    pub fn coefficient(&self, word: &[usize]) -> Option<&[E]> {
        self.coeffs.get(word).map(Vec::as_slice)
    }

    pub fn entry(&self, word: &[usize], indices: &[usize]) -> Option<&E> {
        self.coeffs.get(word).and_then(|t| t.get(flat_index(indices)))
    }

    pub fn words(&self) -> impl Iterator<Item = (&Vec<usize>, &Vec<E>)> {
        self.coeffs.iter()
    }

    /// Sets a word coefficient; the tensor must have `3^|word|` entries.
    pub fn set(&mut self, word: Vec<usize>, tensor: Vec<E>) -> Result<()> {
        if word.len() > self.depth_max {
            return Err(Error::Incompatible(format!("word of length {} above depth {}", word.len(), self.depth_max)));
        }
        if tensor.len() != SLOT_DIM.pow(word.len() as u32) {
            return Err(Error::Incompatible(format!("tensor of size {} for a word of length {}", tensor.len(), word.len())));
        }
        if word.iter().any(|&i| i >= self.letters.len()) {
            return Err(Error::Incompatible("letter outside alphabet".into()));
        }
        self.coeffs.insert(word, tensor);
        Ok(())
    }

    fn check_compatible(&self, o: &Self) -> Result<()> {
        if self.letters != o.letters || self.depth_max != o.depth_max {
            return Err(Error::Incompatible("series over different alphabets or depths".into()));
        }
        Ok(())
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_compatible(o)?;
        let mut out = self.clone();
        for (w, t) in &o.coeffs {
            let merged = match out.coeffs.get(w) {
                Some(s) => s.iter().zip(t).map(|(x, y)| x.add(y)).collect(),
                None => t.clone(),
            };
            out.coeffs.insert(w.clone(), merged);
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for t in out.coeffs.values_mut() {
            for e in t.iter_mut() {
                *e = e.scale_int(-1);
            }
        }
        out
    }

    /// Concatenation product: `(AB)[w] = Σ_{w=uv} A[u] ⊗ B[v]`.
    pub fn product(&self, o: &Self) -> Result<Self> {
        self.check_compatible(o)?;
        let mut out: BTreeMap<Vec<usize>, Vec<E>> = BTreeMap::new();
        let Some(zero) = self.coeffs.values().chain(o.coeffs.values()).flatten().next().map(SeriesEntry::zero_like) else {
            return Ok(IteratedSeries { letters: self.letters.clone(), depth_max: self.depth_max, coeffs: out });
        };
        for (u, tu) in &self.coeffs {
            for (v, tv) in &o.coeffs {
                if u.len() + v.len() > self.depth_max {
                    continue;
                }
                let mut w = u.clone();
                w.extend_from_slice(v);
                let size = tu.len() * tv.len();
                let slot = out.entry(w).or_insert_with(|| vec![zero.clone(); size]);
                for (i, a) in tu.iter().enumerate() {
                    for (j, b) in tv.iter().enumerate() {
                        let k = i * tv.len() + j;
                        slot[k] = slot[k].add(&a.mul(b));
                    }
                }
            }
        }
        Ok(IteratedSeries { letters: self.letters.clone(), depth_max: self.depth_max, coeffs: out })
    }

    /// Truncated geometric series; requires the empty-word coefficient to be
    /// `1` within `tol`.
    pub fn inverse(&self, tol: f64) -> Result<Self> {
        let one = self.one().clone();
        let unit_defect = one.sub(&one.one_like()).magnitude();
        if unit_defect > tol {
            return Err(Error::Flag(format!("series inverse needs unit constant term, defect {unit_defect:e}")));
        }
        let unit = IteratedSeries::unit(self.letters.clone(), self.depth_max, one.one_like());
        let mut nil = self.clone();
        nil.coeffs.remove(&Vec::new());
        let neg_nil = nil.neg();
        let mut acc = unit.clone();
        let mut power = unit.clone();
        for _ in 0..self.depth_max {
            power = power.product(&neg_nil)?;
            acc = acc.add(&power)?;
        }
        Ok(acc)
    }

    /// Slot action of `γ` on every word coefficient.
    pub fn slash(&self, g: &GroupElement) -> Self {
        let mut out = self.clone();
        for (w, t) in out.coeffs.iter_mut() {
            *t = slash_tensor(t, w.len(), g);
        }
        out
    }

    pub fn map<F: SeriesEntry>(&self, f: impl Fn(&E) -> F) -> IteratedSeries<F> {
        IteratedSeries {
            letters: self.letters.clone(),
            depth_max: self.depth_max,
            coeffs: self.coeffs.iter().map(|(w, t)| (w.clone(), t.iter().map(&f).collect())).collect(),
        }
    }

    pub fn try_map<F: SeriesEntry>(&self, f: impl Fn(&E) -> Result<F>) -> Result<IteratedSeries<F>> {
        let mut coeffs = BTreeMap::new();
        for (w, t) in &self.coeffs {
            coeffs.insert(w.clone(), t.iter().map(&f).collect::<Result<Vec<_>>>()?);
        }
        Ok(IteratedSeries { letters: self.letters.clone(), depth_max: self.depth_max, coeffs })
    }

    /// Largest entrywise difference over all words (missing words count as
    /// zero).
    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        let words: std::collections::BTreeSet<&Vec<usize>> = self.coeffs.keys().chain(o.coeffs.keys()).collect();
        for w in words {
            match (self.coeffs.get(w), o.coeffs.get(w)) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        worst = worst.max(x.sub(y).magnitude());
                    }
                }
                (Some(t), None) | (None, Some(t)) => {
                    for x in t {
                        worst = worst.max(x.magnitude());
                    }
                }
                (None, None) => {}
            }
        }
        worst
    }

    /// Largest entry magnitude of the words of a given length.
    pub fn max_entry_at_depth(&self, depth: usize) -> f64 {
        self.coeffs
            .iter()
            .filter(|(w, _)| w.len() == depth)
            .flat_map(|(_, t)| t.iter().map(SeriesEntry::magnitude))
            .fold(0.0, f64::max)
    }

    /// Difference measured per depth relative to `max(1, largest entry)`.
    pub fn scaled_diff(&self, o: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for depth in 0..=self.depth_max {
            let scale = self.max_entry_at_depth(depth).max(o.max_entry_at_depth(depth)).max(1.0);
            let mut d: f64 = 0.0;
            for (w, a) in self.coeffs.iter().filter(|(w, _)| w.len() == depth) {
                match o.coeffs.get(w) {
                    Some(b) => a.iter().zip(b).for_each(|(x, y)| d = d.max(x.sub(y).magnitude())),
                    None => a.iter().for_each(|x| d = d.max(x.magnitude())),
                }
            }
            for (w, b) in o.coeffs.iter().filter(|(w, _)| w.len() == depth) {
                if !self.coeffs.contains_key(w) {
                    b.iter().for_each(|x| d = d.max(x.magnitude()));
                }
            }
            worst = worst.max(d / scale);
        }
        worst
    }
}

impl<R: Real> IteratedSeries<MixedExpansion<R>> {
    pub fn evaluate(&self, tau: Complex<R>) -> Result<IteratedSeries<Complex<R>>> {
        self.try_map(|e| e.evaluate(tau))
    }
}

/// Default per-letter normalisation `(2πi)^{k−1}` for weight `k = 4`.
pub fn default_normalization<R: Real>() -> Complex<R> {
    two_pi_i::<R>().powi(3)
}

/// `I(τ)` up to `depth_max` with the default normalisation.
pub fn iterated_series<R: Real>(
    alphabet: &[CuspForm<R>],
    depth_max: usize,
    nq: usize,
) -> Result<IteratedSeries<MixedExpansion<R>>> {
    let norms = vec![default_normalization::<R>(); alphabet.len()];
    iterated_series_with(alphabet, depth_max, nq, &norms, MAX_DEPTH)
}

/// `I(τ)` with explicit per-letter normalisations and depth guard.
///
/// The entry of word `(i₁,…,i_r)` at `(n₁,…,n_r)` is
/// `Π_j N_{i_j}·binom(2,n_j)·(−1)^{n_j} · Λ_τ(h_{i₁},…; 2−n₁,…)`.
pub fn iterated_series_with<R: Real>(
    alphabet: &[CuspForm<R>],
    depth_max: usize,
    nq: usize,
    normalization: &[Complex<R>],
    depth_guard: usize,
) -> Result<IteratedSeries<MixedExpansion<R>>> {
    if depth_max > depth_guard {
        return Err(Error::Unsupported(format!("depth {depth_max} above guard {depth_guard}")));
    }
    if normalization.len() != alphabet.len() {
        return Err(Error::Incompatible("one normalisation per letter required".into()));
    }
    if let Some(h) = alphabet.iter().find(|h| h.weight() != 4) {
        return Err(Error::WeightMismatch(h.weight() as i64, 4));
    }
    let letters: Vec<String> = alphabet.iter().map(|h| h.label().to_string()).collect();
    let mut series = IteratedSeries::unit(letters, depth_max, MixedExpansion::one(nq));
    let mut words: Vec<Vec<usize>> = vec![Vec::new()];
    let mut keys = Vec::new();
    let mut all_words = Vec::new();
    for _ in 0..depth_max {
        words = words
            .iter()
            .flat_map(|w| (0..alphabet.len()).map(move |i| {
                let mut v = w.clone();
                v.push(i);
                v
            }))
            .collect();
        for w in &words {
            for flat in 0..SLOT_DIM.pow(w.len() as u32) {
                let idx = tensor_indices(flat, w.len());
                keys.push(MmvKey { letters: w.clone(), powers: idx.iter().map(|&n| (2 - n) as u32).collect() });
            }
        }
        all_words.extend(words.iter().cloned());
    }
    let mut table = MmvTable::new(alphabet, nq)?;
    table.prefetch(&keys)?;
    for w in all_words {
        let mut tensor = Vec::with_capacity(SLOT_DIM.pow(w.len() as u32));
        for flat in 0..SLOT_DIM.pow(w.len() as u32) {
            let idx = tensor_indices(flat, w.len());
            let key = MmvKey { letters: w.clone(), powers: idx.iter().map(|&n| (2 - n) as u32).collect() };
            let mut factor = Complex::<R>::one();
            for (&letter, &n) in w.iter().zip(&idx) {
                let sign = if n % 2 == 0 { 1 } else { -1 };
                factor = factor * normalization[letter] * R::from_int(sign * binomial(2, n as u32));
            }
            tensor.push(table.get(&key)?.scale(factor));
        }
        series.set(w, tensor)?;
    }
    Ok(series)
}

/// Result of [`canonical_cocycle`].
#[derive(Clone, Debug)]
pub struct CanonicalCocycle<R: Real> {
    pub mean: IteratedSeries<Complex<R>>,
    pub samples: Vec<IteratedSeries<Complex<R>>>,
    /// Largest pairwise difference between samples, per depth relative to
    /// `max(1, largest entry)`.
    pub deviation: f64,
}

/// `(I(γτ)‖γ)⁻¹·I(τ)` at each sample, with its `τ`-independence certificate.
pub fn canonical_cocycle<R: Real>(
    series: &IteratedSeries<MixedExpansion<R>>,
    g: &GroupElement,
    samples: &[Complex<R>],
    min_imag: f64,
) -> Result<CanonicalCocycle<R>> {
    if samples.len() < 3 {
        return Err(Error::Config { field: "samples".into(), message: "canonical cocycle needs at least 3 points".into() });
    }
    let values: Vec<IteratedSeries<Complex<R>>> = samples
        .par_iter()
        .map(|&tau| {
            let w = g.mobius_guarded(tau, min_imag)?;
            let at_image = series.evaluate(w)?.slash(g);
            let at_tau = series.evaluate(tau)?;
            at_image.inverse(1e-9)?.product(&at_tau)
        })
        .collect::<Result<_>>()?;
    let mut deviation: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            deviation = deviation.max(values[i].scaled_diff(&values[j]));
        }
    }
    let count = R::from_int(values.len() as i64);
    let mut mean = values[0].clone();
    for v in &values[1..] {
        mean = mean.add(v)?;
    }
    let mean = mean.map(|e| e / count);
    Ok(CanonicalCocycle { mean, samples: values, deviation })
}

/// As [`canonical_cocycle`], failing when the deviation exceeds `tol`.
pub fn canonical_cocycle_checked<R: Real>(
    series: &IteratedSeries<MixedExpansion<R>>,
    g: &GroupElement,
    samples: &[Complex<R>],
    min_imag: f64,
    tol: f64,
) -> Result<CanonicalCocycle<R>> {
    let c = canonical_cocycle(series, g, samples, min_imag)?;
    if c.deviation > tol {
        return Err(Error::Residual { what: format!("tau-independence of the canonical cocycle at {g}"), residual: c.deviation, tolerance: tol });
    }
    Ok(c)
}

/// Classical value `Λ_γ(h; n)` for `n ≤ 2` from the period polynomial:
/// `p_γ(x) = −(x²Λ_γ(h;0) − 2xΛ_γ(h;1) + Λ_γ(h;2))`.
pub fn classical_from_period<R: Real>(period: &[Complex<R>; 3], n: u32) -> Result<Complex<R>> {
    match n {
        0 => Ok(-period[2]),
        1 => Ok(period[1] / R::lit(2.0)),
        2 => Ok(-period[0]),
        _ => Err(Error::Unsupported(format!("power {n} is outside the period polynomial"))),
    }
}

/// `Λ_γ(h₁,…; n₁,…)` for depth at most 2.
///
/// Depth-1 values with `n ≤ 2` come from a period polynomial fit at
/// `samples`; everything else uses [`classical_quadrature`].
pub fn mmv_classical<R: Real>(
    forms: &[&CuspForm<R>],
    powers: &[u32],
    g: &GroupElement,
    samples: &[Complex<R>],
    min_imag: f64,
    tol: f64,
) -> Result<Complex<R>> {
    if forms.len() != powers.len() {
        return Err(Error::Incompatible("forms and powers differ in length".into()));
    }
    match forms.len() {
        0 => Ok(Complex::one()),
        _ if g.c() == 0 => Ok(Complex::zero()),
        1 if powers[0] <= 2 => {
            let ht = eichler_integral(forms[0])?;
            let fit = period_polynomial_of(&ht, g, samples, min_imag)?;
            classical_from_period(&fit.coeffs, powers[0])
        }
        1 | 2 => classical_quadrature(forms, powers, g, tol),
        d => Err(Error::Unsupported(format!("classical values of depth {d}"))),
    }
}

/// Quadrature route to `Λ_γ`, depth at most 2.
///
/// The path `γ⁻¹∞ → i∞` is split at `τ₀ = −d/c + i/|c|`. The cusp-adjacent
/// leg is mapped by `γ` onto the vertical ray from `γτ₀`, where the pulled
/// back integrand is `h(u)·(a − cu)^{2−n}(du − b)^n`; the other leg is the
/// vertical ray from `τ₀`.
pub fn classical_quadrature<R: Real>(forms: &[&CuspForm<R>], powers: &[u32], g: &GroupElement, tol: f64) -> Result<Complex<R>> {
    if forms.len() != powers.len() {
        return Err(Error::Incompatible("forms and powers differ in length".into()));
    }
    if forms.is_empty() {
        return Ok(Complex::one());
    }
    if g.c() == 0 {
        return Ok(Complex::zero());
    }
    if forms.len() > 2 {
        return Err(Error::Unsupported(format!("quadrature of depth {}", forms.len())));
    }
    let c = g.c();
    let tau0 = Complex::new(R::from_int(-g.d()) / R::from_int(c), R::one() / R::from_int(c.abs()));
    let image = g.mobius(tau0)?;
    let expansions: Vec<MixedExpansion<R>> = forms.iter().map(|h| h.expansion()).collect();
    let (a, b, d) = (R::from_int(g.a()), R::from_int(g.b()), R::from_int(g.d()));
    let cr = R::from_int(c);
    let direct = |k: usize, z: Complex<R>| -> Complex<R> {
        expansions[k].evaluate(z).unwrap_or_else(|_| Complex::zero()) * z.powu(powers[k])
    };
    let pulled = |k: usize, u: Complex<R>| -> Complex<R> {
        let n = powers[k] as i32;
        let jinv = -u * cr + a;
        let num = u * d - b;
        let h = expansions[k].evaluate(u).unwrap_or_else(|_| Complex::zero());
        h * jinv.powi(2 - n) * num.powi(n)
    };
    let inner_tol = tol / 10.0;
    if forms.len() == 1 {
        let leg_a = integrate_ray(|u| pulled(0, u), image, inner_tol)?.value;
        let leg_b = integrate_ray(|z| direct(0, z), tau0, inner_tol)?.value;
        return Ok(-leg_a + leg_b);
    }
    let a1 = -integrate_ray(|u| pulled(0, u), image, inner_tol)?.value;
    let b2 = integrate_ray(|z| direct(1, z), tau0, inner_tol)?.value;
    let a12 = integrate_ray(
        |u1| {
            let inner = integrate_ray(|u2| pulled(0, u2), u1, inner_tol / 10.0).map(|e| e.value).unwrap_or_else(|_| Complex::zero());
            pulled(1, u1) * inner
        },
        image,
        inner_tol,
    )?
    .value;
    let b12 = integrate_ray(
        |z1| {
            let inner = integrate_ray(|z2| direct(1, z2), z1, inner_tol / 10.0).map(|e| e.value).unwrap_or_else(|_| Complex::zero());
            direct(0, z1) * inner
        },
        tau0,
        inner_tol,
    )?
    .value;
    Ok(a12 + a1 * b2 + b12)
}

/// Classical value read off a canonical cocycle entry by undoing the
/// normalisation and binomial factors; `powers[j] ≤ 2`.
pub fn classical_from_cocycle<R: Real>(
    cocycle: &IteratedSeries<Complex<R>>,
    word: &[usize],
    powers: &[u32],
    normalization: &[Complex<R>],
) -> Result<Complex<R>> {
    if powers.iter().any(|&p| p > 2) || word.len() != powers.len() {
        return Err(Error::Unsupported("powers above 2 are not cocycle entries".into()));
    }
    let idx: Vec<usize> = powers.iter().map(|&p| 2 - p as usize).collect();
    let e = cocycle.entry(word, &idx).ok_or_else(|| Error::Incompatible("word not present".into()))?;
    let mut factor = Complex::<R>::one();
    for (&letter, &n) in word.iter().zip(&idx) {
        let sign = if n % 2 == 0 { 1 } else { -1 };
        factor = factor * normalization[letter] * R::from_int(sign * binomial(2, n as u32));
    }
    Ok(*e / factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{default_tau_samples, sample_points, DEFAULT_MIN_IMAG};
    use crate::modforms::eichler_integral;
    use crate::scalar::cx;

    fn h(nq: usize) -> CuspForm<f64> {
        CuspForm::default_level5(nq)
    }

    #[test]
    fn empty_key_is_one() {
        let v = mmv_functional::<f64>(&[], &[], 32).unwrap();
        assert_eq!(v, MixedExpansion::one(32));
    }

    #[test]
    fn derivative_of_depth_one_value() {
        let f = h(32);
        for n in 0..4 {
            let l = mmv_functional(&[&f], &[n], 32).unwrap();
            let target = f.expansion().mul_tau_pow(n as usize).neg();
            assert!(l.differentiate().approx_eq(&target, 1e-12));
        }
    }

    #[test]
    fn constant_term_diverges() {
        let e = crate::modforms::eisenstein2_level::<f64>(5, 8).unwrap();
        assert_eq!(e.mul_tau_pow(1).integrate_to_cusp(), Err(Error::Divergent));
    }

    #[test]
    fn slot_matrix_examples() {
        let id = GroupElement::identity();
        let t = vec![cx::<f64>(1.0, 2.0), cx(3.0, 0.0), cx(-1.0, 0.5)];
        assert_eq!(slash_tensor(&t, 1, &id), t);
        assert_eq!(slash_tensor(&t, 1, &GroupElement::minus_identity()), t);
        // x² under T: (x+1)² = 1 + 2x + x²
        let x2 = vec![cx::<f64>(0.0, 0.0), cx(0.0, 0.0), cx(1.0, 0.0)];
        let img = slash_tensor(&x2, 1, &GroupElement::translation(1));
        assert_eq!(img, vec![cx(1.0, 0.0), cx(2.0, 0.0), cx(1.0, 0.0)]);
    }

    #[test]
    fn tensor_index_roundtrip() {
        for r in 0..4 {
            for f in 0..SLOT_DIM.pow(r as u32) {
                assert_eq!(flat_index(&tensor_indices(f, r)), f);
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let letters = vec!["a".to_string(), "b".to_string()];
        let one = cx::<f64>(1.0, 0.0);
        let unit = IteratedSeries::unit(letters.clone(), 2, one);
        assert_eq!(unit.inverse(1e-12).unwrap(), unit);
        let mut a = unit.clone();
        a.set(vec![0], vec![cx(1.0, 0.0), cx(2.0, 0.0), cx(0.0, 1.0)]).unwrap();
        a.set(vec![1, 0], (0..9).map(|k| cx(k as f64, -1.0)).collect()).unwrap();
        let inv = a.inverse(1e-12).unwrap();
        let prod = a.product(&inv).unwrap();
        assert!(prod.max_abs_diff(&unit) < 1e-12);
        // 1 − A + A·A on the nilpotent part at depth 2
        let mut nil = a.clone();
        nil.set(vec![], vec![cx(0.0, 0.0)]).unwrap();
        let expected = unit.add(&nil.neg()).unwrap().add(&nil.product(&nil).unwrap()).unwrap();
        assert!(inv.max_abs_diff(&expected) < 1e-12);
        let mut bad = unit.clone();
        bad.set(vec![], vec![cx(2.0, 0.0)]).unwrap();
        assert!(bad.inverse(1e-12).is_err());
    }

    #[test]
    fn contracting_depth_one_reproduces_eichler_integral() {
        let f = h(64);
        let s = iterated_series_with(std::slice::from_ref(&f), 1, 64, &[cx(1.0, 0.0)], MAX_DEPTH).unwrap();
        let t = s.coefficient(&[0]).unwrap();
        // Σ_n t[n] τⁿ
        let contracted = t[0].add(&t[1].mul_tau_pow(1)).add(&t[2].mul_tau_pow(2));
        let ht = eichler_integral(&f).unwrap();
        assert!(contracted.approx_eq(&ht, 1e-15));
    }

    #[test]
    fn depth_guard() {
        let f = h(8);
        assert!(matches!(iterated_series(&[f], 5, 8), Err(Error::Unsupported(_))));
    }

    #[test]
    fn translation_cocycle_vanishes_at_depth_one() {
        let f = h(128);
        let s = iterated_series(&[f], 2, 128).unwrap();
        let t = GroupElement::translation(1);
        let pts: Vec<Complex<f64>> = default_tau_samples();
        let c = canonical_cocycle(&s, &t, &pts, DEFAULT_MIN_IMAG).unwrap();
        assert!(c.mean.coefficient(&[0]).unwrap().iter().all(|e| e.norm() < 1e-10));
        assert!(c.deviation < 1e-10);
    }

    #[test]
    fn classical_values_vanish_for_translations() {
        let f = h(32);
        let t = GroupElement::translation(3);
        let v = mmv_classical(&[&f], &[1], &t, &default_tau_samples(), DEFAULT_MIN_IMAG, 1e-10).unwrap();
        assert_eq!(v, Complex::zero());
        assert!(matches!(mmv_classical(&[&f, &f, &f], &[0, 0, 0], &GroupElement::new(1, 0, 5, 1).unwrap(), &[], 0.05, 1e-8), Err(Error::Unsupported(_))));
    }

    #[test]
    fn depth_one_routes_agree() {
        let f = h(128);
        let g = GroupElement::new(2, -1, 5, -2).unwrap();
        let pts = sample_points(&g, &default_tau_samples(), 8, DEFAULT_MIN_IMAG).unwrap();
        for n in 0..=2 {
            let via_period = mmv_classical(&[&f], &[n], &g, &pts, DEFAULT_MIN_IMAG, 1e-10).unwrap();
            let via_quad = classical_quadrature(&[&f], &[n], &g, 1e-11).unwrap();
            assert!((via_period - via_quad).norm() < 1e-6, "n={n}: {via_period} vs {via_quad}");
        }
    }
}
