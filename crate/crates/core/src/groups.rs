//! Elements of `SL₂(ℤ)`, congruence membership, Möbius action and automorphy
//! factors, plus deterministic sampling of words in a finite seed set.
//!
//! Verification elsewhere in the crate quantifies over sampled elements. Every
//! evaluation point `τ` used for an element `γ` must keep both `ℑτ` and
//! `ℑ(γτ)` above a precision guard; [`sample_points`] produces such points.

use std::fmt;

use num_complex::Complex;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Longest word produced by [`sample_words`].
pub const MAX_WORD_LENGTH: usize = 12;

/// Default lower bound on imaginary parts of evaluation points.
pub const DEFAULT_MIN_IMAG: f64 = 0.05;

/// A 2×2 integer matrix of determinant one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[i64; 4]")]
pub struct GroupElement {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
}

impl TryFrom<[i64; 4]> for GroupElement {
    type Error = Error;
    fn try_from(m: [i64; 4]) -> Result<Self> {
        GroupElement::new(m[0], m[1], m[2], m[3])
    }
}

impl From<GroupElement> for [i64; 4] {
    fn from(g: GroupElement) -> Self {
        g.entries()
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl GroupElement {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let det = a
            .checked_mul(d)
            .zip(b.checked_mul(c))
            .and_then(|(x, y)| x.checked_sub(y))
            .ok_or(Error::Overflow)?;
        if det != 1 {
            return Err(Error::Determinant { a, b, c, d, det });
        }
        Ok(GroupElement { a, b, c, d })
    }

    pub fn identity() -> Self {
        GroupElement { a: 1, b: 0, c: 0, d: 1 }
    }

    pub fn minus_identity() -> Self {
        GroupElement { a: -1, b: 0, c: 0, d: -1 }
    }

    /// `[[1, n], [0, 1]]`.
    pub fn translation(n: i64) -> Self {
        GroupElement { a: 1, b: n, c: 0, d: 1 }
    }

    pub fn a(&self) -> i64 {
        self.a
    }
    pub fn b(&self) -> i64 {
        self.b
    }
    pub fn c(&self) -> i64 {
        self.c
    }
    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn entries(&self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn inverse(&self) -> Self {
        GroupElement { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn checked_mul(&self, o: &GroupElement) -> Result<Self> {
        let dot = |x: i64, y: i64, z: i64, w: i64| -> Result<i64> {
            x.checked_mul(y)
                .zip(z.checked_mul(w))
                .and_then(|(p, q)| p.checked_add(q))
                .ok_or(Error::Overflow)
        };
        Ok(GroupElement {
            a: dot(self.a, o.a, self.b, o.c)?,
            b: dot(self.a, o.b, self.b, o.d)?,
            c: dot(self.c, o.a, self.d, o.c)?,
            d: dot(self.c, o.b, self.d, o.d)?,
        })
    }

    /// Product; panics on overflow, which [`sample_words`] rules out.
    pub fn mul(&self, o: &GroupElement) -> Self {
        self.checked_mul(o).expect("group element overflow")
    }

    pub fn is_member(&self, level: i64) -> bool {
        let det_ok = self
            .a
            .checked_mul(self.d)
            .zip(self.b.checked_mul(self.c))
            .is_some_and(|(x, y)| x.checked_sub(y) == Some(1));
        det_ok && level > 0 && self.c % level == 0
    }

    /// `cτ + d`.
    pub fn automorphy<R: Real>(&self, tau: Complex<R>) -> Complex<R> {
        tau * R::from_int(self.c) + R::from_int(self.d)
    }

    /// `(aτ + b)/(cτ + d)`; rejects points off the upper half plane.
    pub fn mobius<R: Real>(&self, tau: Complex<R>) -> Result<Complex<R>> {
        if !(tau.im > R::zero()) {
            return Err(Error::NotUpperHalfPlane { re: tau.re.as_f64(), im: tau.im.as_f64() });
        }
        Ok(self.mobius_unchecked(tau))
    }

    pub(crate) fn mobius_unchecked<R: Real>(&self, tau: Complex<R>) -> Complex<R> {
        let num = tau * R::from_int(self.a) + R::from_int(self.b);
        num / self.automorphy(tau)
    }

    /// Image of `τ` with the precision guard applied to both `τ` and `γτ`.
    pub fn mobius_guarded<R: Real>(&self, tau: Complex<R>, min_imag: f64) -> Result<Complex<R>> {
        check_guard(tau, min_imag)?;
        let w = self.mobius(tau)?;
        check_guard(w, min_imag)?;
        Ok(w)
    }

    /// Image of the cusp `∞`, `None` when it is `∞` itself.
    pub fn cusp_image(&self) -> Option<(i64, i64)> {
        (self.c != 0).then_some((self.a, self.c))
    }
}

pub fn check_guard<R: Real>(tau: Complex<R>, min_imag: f64) -> Result<()> {
    if tau.im.as_f64() < min_imag {
        return Err(Error::PrecisionGuard { re: tau.re.as_f64(), im: tau.im.as_f64(), min: min_imag });
    }
    Ok(())
}

pub fn automorphy_j<R: Real>(g: &GroupElement, tau: Complex<R>) -> Complex<R> {
    g.automorphy(tau)
}

pub fn mobius<R: Real>(g: &GroupElement, tau: Complex<R>) -> Result<Complex<R>> {
    g.mobius(tau)
}

pub fn is_member(g: &GroupElement, level: i64) -> bool {
    g.is_member(level)
}

/// A congruence subgroup `Γ₀(N)` together with the seeds words are drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupContext {
    level: i64,
    seeds: Vec<GroupElement>,
    label: String,
}

impl GroupContext {
    pub fn new(level: i64, seeds: Vec<GroupElement>, label: impl Into<String>) -> Result<Self> {
        if level <= 0 {
            return Err(Error::Config { field: "group.level".into(), message: "must be positive".into() });
        }
        if let Some(bad) = seeds.iter().find(|g| !g.is_member(level)) {
            return Err(Error::NotMember(bad.to_string(), level));
        }
        Ok(GroupContext { level, seeds, label: label.into() })
    }

    /// `Γ₀(5)` seeded with `T`, `[[2,-1],[5,-2]]` and `[[1,0],[5,1]]`.
    pub fn gamma0_5() -> Self {
        let seeds = vec![
            GroupElement::translation(1),
            GroupElement { a: 2, b: -1, c: 5, d: -2 },
            GroupElement { a: 1, b: 0, c: 5, d: 1 },
        ];
        GroupContext::new(5, seeds, "Gamma0(5)").expect("default seeds are members")
    }

    pub fn level(&self) -> i64 {
        self.level
    }
    pub fn seeds(&self) -> &[GroupElement] {
        &self.seeds
    }
    pub fn label(&self) -> &str {
        &self.label
    }
}

fn random_word(ctx: &GroupContext, rng: &mut ChaCha8Rng, max_length: usize) -> Result<GroupElement> {
    let len = rng.gen_range(1..=max_length);
    let mut g = GroupElement::identity();
    for _ in 0..len {
        let s = ctx.seeds[rng.gen_range(0..ctx.seeds.len())];
        let s = if rng.gen_bool(0.5) { s } else { s.inverse() };
        g = g.checked_mul(&s)?;
    }
    Ok(g)
}

/// Deterministic products of seeds and their inverses of length at most
/// `max_length` (capped at [`MAX_WORD_LENGTH`]).
pub fn sample_words(ctx: &GroupContext, count: usize, max_length: usize, seed: u64) -> Result<Vec<GroupElement>> {
    if ctx.seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    if count == 0 || max_length == 0 {
        return Err(Error::Config { field: "sampling".into(), message: "count and max_length must be at least 1".into() });
    }
    let max_length = max_length.min(MAX_WORD_LENGTH);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_word(ctx, &mut rng, max_length)).collect()
}

/// Elements admit evaluation points under the guard iff `|c| ≤ 1/min_imag`.
pub fn is_evaluable(g: &GroupElement, max_c: i64) -> bool {
    g.c.abs() <= max_c
}

/// Distinct sampled words with `|c| ≤ max_c`, always starting with `T`.
pub fn sample_evaluable(
    ctx: &GroupContext,
    count: usize,
    max_length: usize,
    max_c: i64,
    seed: u64,
) -> Result<Vec<GroupElement>> {
    if ctx.seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let max_length = max_length.clamp(1, MAX_WORD_LENGTH);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![GroupElement::translation(1)];
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 200 * count.max(10) {
            return Err(Error::Config {
                field: "sampling.max_c".into(),
                message: format!("could not find {count} elements with |c| <= {max_c}"),
            });
        }
        let g = random_word(ctx, &mut rng, max_length)?;
        if is_evaluable(&g, max_c) && !out.contains(&g) && g.c != 0 {
            out.push(g);
        }
    }
    out.truncate(count);
    Ok(out)
}

/// Pairs `(γ, δ)` with `γ`, `δ` and `γδ` all evaluable.
pub fn sample_pairs(
    ctx: &GroupContext,
    count: usize,
    max_length: usize,
    max_c: i64,
    seed: u64,
) -> Result<Vec<(GroupElement, GroupElement)>> {
    if ctx.seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let max_length = max_length.clamp(1, MAX_WORD_LENGTH);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 500 * count.max(10) {
            return Err(Error::Config {
                field: "sampling.max_c".into(),
                message: format!("could not find {count} pairs with |c| <= {max_c}"),
            });
        }
        let g = random_word(ctx, &mut rng, max_length)?;
        let h = random_word(ctx, &mut rng, max_length)?;
        let Ok(gh) = g.checked_mul(&h) else { continue };
        if [g, h, gh].iter().all(|x| is_evaluable(x, max_c)) && (g.c != 0 || h.c != 0) {
            out.push((g, h));
        }
    }
    Ok(out)
}

/// Default evaluation points for elements fixing `∞`.
pub fn default_tau_samples() -> Vec<Complex<f64>> {
    vec![Complex::new(0.1, 0.9), Complex::new(-0.2, 1.1), Complex::new(0.05, 0.75)]
}

// Offsets (u, v) around the point where ℑτ = ℑγτ, in units of 1/|c|.
const LENS_PATTERN: [(f64, f64); 16] = [
    (0.0, 1.0),
    (0.3, 0.95),
    (-0.3, 1.05),
    (0.1, 0.85),
    (-0.15, 1.15),
    (0.2, 1.1),
    (-0.2, 0.9),
    (0.05, 1.2),
    (0.4, 1.0),
    (-0.4, 1.0),
    (0.15, 0.8),
    (-0.1, 1.25),
    (0.25, 1.2),
    (-0.25, 0.85),
    (0.12, 1.05),
    (-0.05, 0.95),
];

/// Points `τ` at which both `τ` and `γτ` satisfy the precision guard.
///
/// For `c = 0` the given base points are used (padded by vertical shifts).
/// Otherwise base points are kept when feasible and the rest are replaced by
/// points near `-d/c + i/|c|`.
pub fn sample_points(g: &GroupElement, base: &[Complex<f64>], count: usize, min_imag: f64) -> Result<Vec<Complex<f64>>> {
    let feasible = |t: &Complex<f64>| t.im >= min_imag && g.mobius_unchecked(*t).im >= min_imag;
    let mut out: Vec<Complex<f64>> = Vec::with_capacity(count);
    if g.c == 0 {
        out.extend(base.iter().copied().filter(|t| t.im >= min_imag).take(count));
        let mut k = 0;
        while out.len() < count {
            let b = base.get(k % base.len().max(1)).copied().unwrap_or(Complex::new(0.0, 1.0));
            let t = Complex::new(b.re + 0.037 * (k + 1) as f64, b.im.max(min_imag) * (1.0 + 0.13 * (k + 1) as f64));
            out.push(t);
            k += 1;
        }
        return Ok(out);
    }
    let s = 1.0 / g.c.abs() as f64;
    if s < min_imag {
        return Err(Error::PrecisionGuard { re: -(g.d as f64) / g.c as f64, im: s, min: min_imag });
    }
    out.extend(base.iter().copied().filter(feasible).take(count));
    let x0 = -(g.d as f64) / g.c as f64;
    let margin = 1.02;
    for &(u, v) in LENS_PATTERN.iter() {
        if out.len() >= count {
            break;
        }
        let t = Complex::new(x0 + s * u, s * v);
        if t.im >= margin * min_imag && g.mobius_unchecked(t).im >= margin * min_imag {
            out.push(t);
        }
    }
    // Shrink the pattern toward the balanced point when the lens is narrow.
    let mut shrink = 0.5;
    while out.len() < count && shrink > 1e-3 {
        for &(u, v) in LENS_PATTERN.iter().skip(1) {
            if out.len() >= count {
                break;
            }
            let t = Complex::new(x0 + s * u * shrink, s * (1.0 + (v - 1.0) * shrink));
            let im_ok = t.im >= min_imag && g.mobius_unchecked(t).im >= min_imag;
            if im_ok && !out.iter().any(|p| (p - t).norm() < 1e-9) {
                out.push(t);
            }
        }
        shrink *= 0.5;
    }
    if out.len() < count {
        return Err(Error::PrecisionGuard { re: x0, im: s, min: min_imag });
    }
    debug_assert!(out.iter().all(feasible));
    Ok(out)
}

pub(crate) fn to_real_point<R: Real>(t: Complex<f64>) -> Complex<R> {
    Complex::new(R::lit(t.re), R::lit(t.im))
}

/// `ℑτ / |j_γ(τ)|²`, the imaginary part of `γτ`.
pub fn image_imag<R: Real>(g: &GroupElement, tau: Complex<R>) -> R {
    let j = g.automorphy(tau);
    if j.is_zero() {
        return R::zero();
    }
    tau.im / j.norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn construction_checks_determinant() {
        assert!(GroupElement::new(1, 1, 0, 1).is_ok());
        assert!(matches!(GroupElement::new(1, 1, 1, 1), Err(Error::Determinant { det: 0, .. })));
    }

    #[test]
    fn mobius_examples() {
        let t = GroupElement::translation(1);
        assert_eq!(t.mobius(c(0.0, 1.0)).unwrap(), c(1.0, 1.0));
        let id = GroupElement::identity();
        assert_eq!(id.mobius(c(0.3, 0.7)).unwrap(), c(0.3, 0.7));
        let u = GroupElement::new(2, -1, 5, -2).unwrap();
        let w = u.mobius(c(0.0, 1.0)).unwrap();
        assert!((w - c(12.0 / 29.0, 1.0 / 29.0)).norm() < 1e-15);
        assert!(u.mobius(c(0.0, -1.0)).is_err());
        assert!(u.mobius(c(0.0, 0.0)).is_err());
    }

    #[test]
    fn automorphy_examples() {
        let t = GroupElement::translation(1);
        assert_eq!(t.automorphy(c(0.4, 2.0)), c(1.0, 0.0));
        let u = GroupElement::new(2, -1, 5, -2).unwrap();
        assert_eq!(u.automorphy(c(0.0, 1.0)), c(-2.0, 5.0));
        let tu = t.mul(&u);
        assert_eq!(tu.entries(), [7, -3, 5, -2]);
        assert_eq!(tu.automorphy(c(0.0, 1.0)), c(-2.0, 5.0));
    }

    #[test]
    fn membership_examples() {
        assert!(GroupElement::translation(1).is_member(5));
        assert!(!GroupElement::new(0, -1, 1, 0).unwrap().is_member(5));
        assert!(GroupElement::new(2, -1, 5, -2).unwrap().is_member(5));
    }

    #[test]
    fn context_rejects_non_members() {
        let s = GroupElement::new(0, -1, 1, 0).unwrap();
        assert!(matches!(GroupContext::new(5, vec![s], "x"), Err(Error::NotMember(_, 5))));
    }

    #[test]
    fn sampling_is_deterministic_and_closed() {
        let ctx = GroupContext::gamma0_5();
        let a = sample_words(&ctx, 3, 4, 7).unwrap();
        let b = sample_words(&ctx, 3, 4, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|g| g.is_member(5)));
        let one = sample_words(&ctx, 1, 1, 99).unwrap();
        let seeds_and_inverses: Vec<_> = ctx.seeds().iter().flat_map(|s| [*s, s.inverse()]).collect();
        assert!(seeds_and_inverses.contains(&one[0]));
    }

    #[test]
    fn empty_seed_set_is_rejected() {
        let ctx = GroupContext::new(5, vec![], "empty").unwrap();
        assert_eq!(sample_words(&ctx, 1, 1, 0), Err(Error::EmptySeeds));
    }

    #[test]
    fn sample_points_respect_guard() {
        let ctx = GroupContext::gamma0_5();
        let gs = sample_evaluable(&ctx, 10, 6, 10, 3).unwrap();
        for g in gs {
            let pts = sample_points(&g, &default_tau_samples(), 8, DEFAULT_MIN_IMAG).unwrap();
            assert_eq!(pts.len(), 8);
            for t in pts {
                assert!(t.im >= DEFAULT_MIN_IMAG);
                assert!(g.mobius(t).unwrap().im >= DEFAULT_MIN_IMAG);
            }
        }
        let far = GroupElement::new(1, 0, 25, 1).unwrap();
        assert!(sample_points(&far, &default_tau_samples(), 6, DEFAULT_MIN_IMAG).is_err());
    }

    #[test]
    fn pairs_are_evaluable() {
        let ctx = GroupContext::gamma0_5();
        let pairs = sample_pairs(&ctx, 20, 5, 10, 11).unwrap();
        assert_eq!(pairs.len(), 20);
        for (g, h) in pairs {
            assert!(g.mul(&h).c().abs() <= 10);
        }
    }
}
