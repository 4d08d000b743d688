//! The deformation pipeline driven by a weight-4 cusp form `h`.
//!
//! First order data is `a¹_γ = 2p_γ∂`, `b¹ = 2h̃∂`. The second order section
//! coefficient is `b² = f∂` with
//! `f = −∫_τ^{i∞} (−2h′h̃ + σ·4hh̃′)(z)(τ−z)² dz`; the sign `σ` is fixed by
//! requiring `j_γ²f(γτ) − f(τ) − 2(p_γh̃′ − p_γ′h̃)` to be a quadratic
//! polynomial, which is then `a²_γ`'s `∂`-coefficient. All group-level
//! objects are weight-0 data pushed to weight `k` by `φ_k`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::defalg::{solve_linear_coboundary, LetterScaling, LieElement, MonoidElement, MultiIndex, QuadraticLie, RhoSeriesOp};
use crate::error::{Error, Result};
use crate::groups::{sample_points, to_real_point, GroupElement};
use crate::linalg::{fit_quadratic, lstsq};
use crate::mmv::{canonical_cocycle, iterated_series, mmv_functional, tensor_indices, IteratedSeries, SLOT_DIM};
use crate::modforms::{eichler_integral, eichler_of_expansion, modularity_residual, period_polynomial_of, rankin_cohen_signed, CuspForm};
use crate::poly::Poly;
use crate::qpoly::MixedExpansion;
use crate::report::{Least, Report, Worst};
use crate::scalar::{cx, cx_int, to_c64, Real};

type Quad<R> = QuadraticLie<Complex<R>>;

/// Named tolerances with defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances(pub BTreeMap<String, f64>);

pub const TOLERANCE_NAMES: [(&str, f64); 19] = [
    ("period_fit", 1e-8),
    ("order1_coboundary", 1e-8),
    ("order1_cocycle", 1e-8),
    ("f_two_path", 1e-8),
    ("p2_fit", 1e-6),
    ("order2_cocycle", 1e-6),
    ("order2_section", 1e-6),
    ("uniqueness", 1e-3),
    ("transformation", 1e-6),
    ("homomorphism", 1e-10),
    ("canonical_tau", 1e-6),
    ("canonical_shape", 1e-8),
    ("canonical_cocycle", 1e-6),
    ("canonical_proportional", 1e-6),
    ("canonical_constant", 1e-5),
    ("match_order1", 1e-6),
    ("match_order2", 1e-6),
    ("nontrivial_class", 1e-3),
    ("constructed_coboundary", 1e-9),
];

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(TOLERANCE_NAMES.iter().map(|(n, v)| (n.to_string(), *v)).collect())
    }
}

impl Tolerances {
    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or_else(|| panic!("unknown tolerance {name}"))
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !self.0.contains_key(name) {
            return Err(Error::Config { field: format!("tolerances.{name}"), message: "unknown tolerance name".into() });
        }
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config { field: format!("tolerances.{name}"), message: "tolerances must be positive".into() });
        }
        self.0.insert(name.to_string(), value);
        Ok(())
    }
}

/// Sample sets shared by every sweep.
#[derive(Clone, Debug)]
pub struct Settings {
    pub gammas: Vec<GroupElement>,
    pub pairs: Vec<(GroupElement, GroupElement)>,
    pub tau_samples: Vec<Complex<f64>>,
    /// Points per period-polynomial fit.
    pub fit_points: usize,
    pub min_imag: f64,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl Settings {
    /// Every element touched by the samples: `γ`, and `γ`, `δ`, `γδ` of each
    /// pair.
    pub fn elements(&self) -> Vec<GroupElement> {
        let mut s: BTreeSet<GroupElement> = self.gammas.iter().copied().collect();
        for (g, h) in &self.pairs {
            s.extend([*g, *h, g.mul(h)]);
        }
        s.into_iter().collect()
    }

    fn points<R: Real>(&self, g: &GroupElement, count: usize) -> Result<Vec<Complex<R>>> {
        Ok(sample_points(g, &self.tau_samples, count, self.min_imag)?.into_iter().map(to_real_point).collect())
    }
}

fn scaled(diff: f64, scale: f64) -> f64 {
    diff / scale.max(1.0)
}

fn fmt_c<R: Real>(z: Complex<R>) -> String {
    let z = to_c64(z);
    format!("{:.4}{:+.4}i", z.re, z.im)
}

#[derive(Clone, Debug)]
pub struct DeformationPackage<R: Real> {
    pub h: CuspForm<R>,
    pub htilde: MixedExpansion<R>,
    pub order: usize,
    /// `a¹_γ = 2p_γ∂`, stored as `p_γ`.
    pub a1: BTreeMap<GroupElement, Quad<R>>,
    /// `b¹ = 2h̃∂`.
    pub b1: LieElement<R>,
    /// `a²_γ`, stored as half its `∂`-coefficient.
    pub a2: BTreeMap<GroupElement, Quad<R>>,
    /// `b² = f∂`.
    pub b2: Option<LieElement<R>>,
    /// `σ` in the Rankin–Cohen combination selected for `f`.
    pub rc_sign: i64,
    pub report: Report,
}

impl<R: Real> DeformationPackage<R> {
    pub fn verified(&self) -> bool {
        self.report.passed()
    }

    pub fn nq(&self) -> usize {
        self.htilde.nq()
    }

    /// `log A_γ` as a one-variable series at weight `k`.
    pub fn log_cocycle(&self, g: &GroupElement, k: i64) -> Result<RhoSeriesOp<R>> {
        let a1 = self.a1.get(g).ok_or_else(|| Error::NotMember(format!("{g} not sampled"), 0))?;
        let mut terms = vec![a1.phi_k(k)?];
        if self.order >= 2 {
            let a2 = self.a2.get(g).ok_or_else(|| Error::NotMember(format!("{g} not sampled"), 0))?;
            terms.push(a2.phi_k(k)?);
        }
        RhoSeriesOp::from_quadratics(self.order, self.nq(), k, &terms)
    }

    /// `A_γ = exp(φ_k(a¹)ρ + φ_k(a²)ρ²)`.
    pub fn cocycle(&self, g: &GroupElement, k: i64) -> Result<RhoSeriesOp<R>> {
        self.log_cocycle(g, k)?.exp_op()
    }

    /// `B = exp(φ_k(b¹)ρ + φ_k(b²)ρ²)`.
    pub fn section(&self, k: i64) -> Result<RhoSeriesOp<R>> {
        let mut terms = vec![(vec![1], self.b1.phi_k(k)?)];
        if let Some(b2) = &self.b2 {
            terms.push((vec![2], b2.phi_k(k)?));
        }
        RhoSeriesOp::from_lie(1, self.order, self.nq(), &terms)?.exp_op()
    }

    pub fn to_json(&self) -> Value {
        let quad = |q: &Quad<R>| {
            Value::Array(q.p.iter().map(|z| json!([crate::report::number(to_c64(*z).re), crate::report::number(to_c64(*z).im)])).collect())
        };
        let a1: Vec<Value> = self.a1.iter().map(|(g, q)| json!({"gamma": g.entries(), "p": quad(q)})).collect();
        let a2: Vec<Value> = self.a2.iter().map(|(g, q)| json!({"gamma": g.entries(), "p": quad(q)})).collect();
        json!({
            "form": self.h.label(),
            "weight": self.h.weight(),
            "level": self.h.level(),
            "nq": self.nq(),
            "order": self.order,
            "rc_sign": self.rc_sign,
            "a1": a1,
            "a2": a2,
            "verified": self.verified(),
        })
    }
}

/// Period polynomial fits of `h̃` at every element; returns `p_γ` and the
/// worst fit residual.
fn period_fits<R: Real>(htilde: &MixedExpansion<R>, settings: &Settings) -> Result<(BTreeMap<GroupElement, Quad<R>>, Worst)> {
    let fits: Vec<(GroupElement, Quad<R>, f64)> = settings
        .elements()
        .par_iter()
        .map(|g| {
            let pts = settings.points::<R>(g, settings.fit_points)?;
            let fit = period_polynomial_of(htilde, g, &pts, settings.min_imag)?;
            Ok((*g, QuadraticLie::new(0, fit.coeffs), fit.residual))
        })
        .collect::<Result<_>>()?;
    let mut worst = Worst::new();
    let mut map = BTreeMap::new();
    for (g, q, r) in fits {
        worst.update(scaled(r, q.max_magnitude()), || format!("gamma={g}"));
        map.insert(g, q);
    }
    Ok((map, worst))
}

/// First order data `(2p_γ∂, 2h̃∂)` with coboundary and cocycle residuals.
pub fn first_order_data<R: Real>(h: &CuspForm<R>, settings: &Settings) -> Result<DeformationPackage<R>> {
    if h.weight() != 4 {
        return Err(Error::WeightMismatch(h.weight() as i64, 4));
    }
    let tol = &settings.tolerances;
    let htilde = eichler_integral(h)?;
    let nq = htilde.nq();
    let b1 = LieElement::new(0, htilde.scale(cx_int(2)), MixedExpansion::zero(nq));
    let (a1, fit_worst) = period_fits(&htilde, settings)?;
    let mut report = Report::new();
    report.below("period_fit", fit_worst, tol.get("period_fit"));

    let cob: Vec<Worst> = settings
        .elements()
        .par_iter()
        .map(|g| {
            let mut w = Worst::new();
            for tau in settings.points::<R>(g, settings.tau_samples.len())? {
                let lhs = b1.slash_eval(g, tau, settings.min_imag)?;
                let rhs = b1.eval(tau)?;
                let (d, s) = a1[g].eval(&tau);
                let dd = (lhs.d - rhs.d - d).norm().as_f64().max((lhs.s - rhs.s - s).norm().as_f64());
                w.update(scaled(dd, d.norm().as_f64()), || format!("gamma={g} tau={}", fmt_c(tau)));
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    report.below("order1_coboundary", cob.into_iter().fold(Worst::new(), Worst::merge), tol.get("order1_coboundary"));

    let mut w = Worst::new();
    for (g, d) in &settings.pairs {
        let lhs = &a1[&g.mul(d)];
        let rhs = a1[g].slash(d).add(&a1[d])?;
        w.update(scaled(lhs.max_abs_diff(&rhs), lhs.max_magnitude()), || format!("gamma={g} delta={d}"));
    }
    report.below("order1_cocycle", w, tol.get("order1_cocycle"));

    Ok(DeformationPackage { h: h.clone(), htilde, order: 1, a1, b1, a2: BTreeMap::new(), b2: None, rc_sign: 0, report })
}

/// `f_σ = −∫_τ^{i∞} (−2h′h̃ + σ·4hh̃′)(z)(τ−z)² dz`.
pub fn section_coefficient<R: Real>(h: &CuspForm<R>, sign: i64) -> Result<MixedExpansion<R>> {
    let ht = eichler_integral(h)?;
    let rc = rankin_cohen_signed(&h.expansion(), &ht, sign);
    Ok(eichler_of_expansion(&rc, 4)?.neg())
}

/// `f_σ` as a combination of depth-two functional values `Λ(h,h;a,b)`.
pub fn section_coefficient_lambda<R: Real>(h: &CuspForm<R>, sign: i64) -> Result<MixedExpansion<R>> {
    let nq = h.nq();
    let l = |a: u32, b: u32| mmv_functional(&[h, h], &[a, b], nq);
    let t = |e: &MixedExpansion<R>, k: usize| e.mul_tau_pow(k);
    let a = t(&l(1, 0)?.sub(&l(0, 1)?), 2)
        .sub(&t(&l(2, 0)?.sub(&l(1, 1)?), 1).scale(cx_int(2)))
        .add(&l(3, 0)?.sub(&l(2, 1)?))
        .scale(cx_int(2));
    let b = t(&l(2, 0)?.sub(&l(1, 1)?.scale(cx_int(2))).add(&l(0, 2)?), 1)
        .sub(&l(3, 0)?.sub(&l(2, 1)?.scale(cx_int(2))).add(&l(1, 2)?));
    Ok(a.scale(cx_int(-(2 + 4 * sign))).add(&b.scale(cx_int(4))))
}

/// `12τ²(Λ₁₀ − Λ₀₁) − 4τ(7Λ₂₀ − 8Λ₁₁ + Λ₀₂) + 4(4Λ₃₀ − 3Λ₂₁ − Λ₁₂)`, with
/// `Λ_ab = Λ_τ(h,h;a,b)`, exactly as it is usually displayed.
pub fn section_coefficient_displayed<R: Real>(h: &CuspForm<R>) -> Result<MixedExpansion<R>> {
    let nq = h.nq();
    let l = |a: u32, b: u32| mmv_functional(&[h, h], &[a, b], nq);
    let quad = l(1, 0)?.sub(&l(0, 1)?).mul_tau_pow(2).scale(cx_int(12));
    let lin = l(2, 0)?.scale(cx_int(7)).sub(&l(1, 1)?.scale(cx_int(8))).add(&l(0, 2)?).mul_tau_pow(1).scale(cx_int(-4));
    let cst = l(3, 0)?.scale(cx_int(4)).sub(&l(2, 1)?.scale(cx_int(3))).sub(&l(1, 2)?).scale(cx_int(4));
    Ok(quad.add(&lin).add(&cst))
}

/// Values `j_γ²f(γτ) − f(τ) − 2(p h̃′ − p′h̃)(τ)` at the fit points of `γ`.
fn second_order_values<R: Real>(
    f: &MixedExpansion<R>,
    htilde: &MixedExpansion<R>,
    htilde_d: &MixedExpansion<R>,
    p: &Quad<R>,
    g: &GroupElement,
    pts: &[Complex<R>],
    min_imag: f64,
) -> Result<Vec<Complex<R>>> {
    let pp = Poly::from_coeffs(p.p.to_vec());
    let dp = pp.derivative();
    pts.iter()
        .map(|&tau| {
            let w = g.mobius_guarded(tau, min_imag)?;
            let j = g.automorphy(tau);
            let corr = pp.eval(&tau) * htilde_d.evaluate(tau)? - dp.eval(&tau) * htilde.evaluate(tau)?;
            Ok(j * j * f.evaluate(w)? - f.evaluate(tau)? - corr * R::lit(2.0))
        })
        .collect()
}

/// Quadratic fits of the second order values; `a²_γ` stored as half the
/// fitted `∂`-coefficient.
fn second_order_fits<R: Real>(
    pkg: &DeformationPackage<R>,
    f: &MixedExpansion<R>,
    settings: &Settings,
) -> Result<(BTreeMap<GroupElement, Quad<R>>, Worst)> {
    let htilde_d = pkg.htilde.differentiate();
    let fits: Vec<(GroupElement, Quad<R>, f64)> = settings
        .elements()
        .par_iter()
        .map(|g| {
            let pts = settings.points::<R>(g, settings.fit_points)?;
            let vals = second_order_values(f, &pkg.htilde, &htilde_d, &pkg.a1[g], g, &pts, settings.min_imag)?;
            let scale = vals.iter().map(|v| v.norm().as_f64()).fold(0.0, f64::max);
            let fit = fit_quadratic(&pts, &vals)?;
            let half = R::lit(0.5);
            Ok((*g, QuadraticLie::new(0, fit.coeffs.map(|c| c * half)), scaled(fit.residual, scale)))
        })
        .collect::<Result<_>>()?;
    let mut worst = Worst::new();
    let mut map = BTreeMap::new();
    for (g, q, r) in fits {
        worst.update(r, || format!("gamma={g}"));
        map.insert(g, q);
    }
    Ok((map, worst))
}

/// Extends first order data to order two and records every order-two
/// residual.
pub fn second_order_data<R: Real>(h: &CuspForm<R>, settings: &Settings) -> Result<DeformationPackage<R>> {
    let mut pkg = first_order_data(h, settings)?;
    let tol = &settings.tolerances;
    let nq = pkg.nq();

    let candidates: Vec<(i64, MixedExpansion<R>, BTreeMap<GroupElement, Quad<R>>, Worst)> = [-1i64, 1]
        .into_iter()
        .map(|sign| {
            let f = section_coefficient(h, sign)?;
            let (a2, w) = second_order_fits(&pkg, &f, settings)?;
            Ok((sign, f, a2, w))
        })
        .collect::<Result<_>>()?;
    for (sign, _, _, w) in &candidates {
        pkg.report.note(&format!("p2_fit_sign_{}", if *sign > 0 { "plus" } else { "minus" }), w.value);
    }
    let (sign, f, a2, fit_worst) = candidates
        .into_iter()
        .min_by(|a, b| a.3.value.partial_cmp(&b.3.value).unwrap_or(std::cmp::Ordering::Equal))
        .expect("two candidates");
    pkg.rc_sign = sign;
    pkg.report.below("p2_fit", fit_worst, tol.get("p2_fit"));

    let via_lambda = section_coefficient_lambda(h, sign)?;
    let scale = f.max_magnitude().max(via_lambda.max_magnitude());
    let mut two = Worst::new();
    two.update(scaled(f.max_abs_diff(&via_lambda), scale), || format!("sign={sign}"));
    pkg.report.below("f_two_path", two, tol.get("f_two_path"));
    let displayed = section_coefficient_displayed(h)?;
    let literal = section_coefficient(h, 1)?;
    pkg.report.note("f_displayed_vs_integral_plus", scaled(displayed.max_abs_diff(&literal), literal.max_magnitude()));
    pkg.report.note("f_displayed_vs_integral_selected", scaled(displayed.max_abs_diff(&f), f.max_magnitude()));
    pkg.report.note("f_displayed_vs_negated_plus", scaled(displayed.max_abs_diff(&literal.neg()), literal.max_magnitude()));

    pkg.order = 2;
    pkg.b2 = Some(LieElement::new(0, f, MixedExpansion::zero(nq)));
    pkg.a2 = a2;

    let mut w = Worst::new();
    for (g, d) in &settings.pairs {
        let lhs = &pkg.a2[&g.mul(d)];
        let g_d = pkg.a1[g].slash(d);
        let half = Complex::new(R::lit(0.5), R::zero());
        let rhs = pkg.a2[g].slash(d).add(&pkg.a2[d])?.add(&g_d.bracket(&pkg.a1[d])?.scale(&half))?;
        w.update(scaled(lhs.max_abs_diff(&rhs), lhs.max_magnitude()), || format!("gamma={g} delta={d}"));
    }
    pkg.report.below("order2_cocycle", w, tol.get("order2_cocycle"));

    let section = section_residual(&pkg, pkg.b2.as_ref().expect("set above"), settings)?;
    pkg.report.below("order2_section", section, tol.get("order2_section"));

    let margin = uniqueness_margin(&pkg, settings)?;
    pkg.report.above("uniqueness", margin, tol.get("uniqueness"));
    Ok(pkg)
}

/// Worst pointwise `|a²_γ − (b²‖γ − b² − ½[b¹‖γ, b¹])|` over the samples,
/// with the bracket evaluated through first order jets.
pub fn section_residual<R: Real>(pkg: &DeformationPackage<R>, b2: &LieElement<R>, settings: &Settings) -> Result<Worst> {
    let half = Complex::new(R::lit(0.5), R::zero());
    let parts: Vec<Worst> = settings
        .gammas
        .par_iter()
        .map(|g| {
            let mut w = Worst::new();
            for tau in settings.points::<R>(g, settings.tau_samples.len())? {
                let br = pkg.b1.slash_jet(g, tau, 1, settings.min_imag)?.bracket(&pkg.b1.jet_at(tau, 1)?)?.value();
                let lhs = b2.slash_eval(g, tau, settings.min_imag)?;
                let rhs = b2.eval(tau)?;
                let (d, s) = pkg.a2[g].eval(&tau);
                let ed = lhs.d - rhs.d - br.d * half;
                let es = lhs.s - rhs.s - br.s * half;
                let dd = (ed - d).norm().as_f64().max((es - s).norm().as_f64());
                w.update(scaled(dd, ed.norm().as_f64()), || format!("gamma={g} tau={}", fmt_c(tau)));
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().fold(Worst::new(), Worst::merge))
}

/// Smallest section residual after replacing `b²` by `b² + r∂` for five
/// random quadratics `r`.
pub fn uniqueness_margin<R: Real>(pkg: &DeformationPackage<R>, settings: &Settings) -> Result<Least> {
    let b2 = pkg.b2.as_ref().ok_or(Error::Unsupported("uniqueness check needs order two".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let mut least = Least::new();
    for trial in 0..5 {
        let r: [Complex<R>; 3] = std::array::from_fn(|_| cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let pert = LieElement::new(0, MixedExpansion::from_poly(pkg.nq(), Poly::from_coeffs(r.to_vec())), MixedExpansion::zero(pkg.nq()));
        let w = section_residual(pkg, &b2.add(&pert)?, settings)?;
        least.update(w.value, || format!("trial={trial} {}", w.witness));
    }
    Ok(least)
}

/// `B^{(k)}(f)` as a map from `ρ`-degree to expansion.
pub fn deform_form<R: Real>(f: &MixedExpansion<R>, k: i64, pkg: &DeformationPackage<R>) -> Result<BTreeMap<MultiIndex, MixedExpansion<R>>> {
    if !pkg.verified() {
        return Err(Error::Flag(format!("package is unverified: {}", pkg.report.failures().join(", "))));
    }
    Ok(pkg.section(k)?.apply_to(f))
}

/// Product of two `ρ`-series of functions, truncated at `rho_max`.
pub fn series_product<R: Real>(
    a: &BTreeMap<MultiIndex, MixedExpansion<R>>,
    b: &BTreeMap<MultiIndex, MixedExpansion<R>>,
    rho_max: usize,
) -> BTreeMap<MultiIndex, MixedExpansion<R>> {
    let mut out: BTreeMap<MultiIndex, MixedExpansion<R>> = BTreeMap::new();
    for (m1, x) in a {
        for (m2, y) in b {
            let m: MultiIndex = m1.iter().zip(m2).map(|(u, v)| u + v).collect();
            if m.iter().map(|&e| e as usize).sum::<usize>() > rho_max {
                continue;
            }
            let v = x.mul(y);
            let cur = out.remove(&m).unwrap_or_else(|| MixedExpansion::zero(v.nq()));
            out.insert(m, cur.add(&v));
        }
    }
    out
}

/// Per-order worst relative difference of two `ρ`-series of functions.
pub fn series_rel_diff<R: Real>(a: &BTreeMap<MultiIndex, MixedExpansion<R>>, b: &BTreeMap<MultiIndex, MixedExpansion<R>>) -> f64 {
    let keys: BTreeSet<&MultiIndex> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .map(|m| {
            let x = a.get(m).cloned().unwrap_or_else(|| MixedExpansion::zero(1));
            let y = b.get(m).cloned().unwrap_or_else(|| MixedExpansion::zero(1));
            scaled(x.max_abs_diff(&y), x.max_magnitude().max(y.max_magnitude()))
        })
        .fold(0.0, f64::max)
}

/// `|B(f)(γτ) − j^k·(A_γ B(f))(τ)|` per `ρ`-order, relative to the size of
/// the left side, worst over the samples.
pub fn verify_transformation<R: Real>(
    f: &MixedExpansion<R>,
    k: i64,
    pkg: &DeformationPackage<R>,
    g: &GroupElement,
    taus: &[Complex<R>],
    min_imag: f64,
) -> Result<Vec<Worst>> {
    let scale = taus.iter().map(|t| f.evaluate(*t).map(|v| v.norm().as_f64())).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    for tau in taus {
        let r = modularity_residual(f, k as i32, g, *tau, min_imag)?;
        if r > 1e-8 * scale.max(1e-300) {
            return Err(Error::Residual { what: format!("weight-{k} modularity of the input at {g}"), residual: r, tolerance: 1e-8 });
        }
    }
    let bf = deform_form(f, k, pkg)?;
    let abf = pkg.cocycle(g, k)?.apply(&bf);
    let mut per_order = vec![Worst::new(); pkg.order + 1];
    for tau in taus {
        let w = g.mobius_guarded(*tau, min_imag)?;
        let jk = g.automorphy(*tau).powi(k as i32);
        for (m, worst) in per_order.iter_mut().enumerate() {
            let idx = vec![m as u32];
            let lhs = bf.get(&idx).map(|e| e.evaluate(w)).transpose()?.unwrap_or(Complex::new(R::zero(), R::zero()));
            let rhs = abf.get(&idx).map(|e| e.evaluate(*tau)).transpose()?.unwrap_or(Complex::new(R::zero(), R::zero())) * jk;
            let d = (lhs - rhs).norm().as_f64() / lhs.norm().as_f64().max(rhs.norm().as_f64()).max(1e-300);
            worst.update(d, || format!("gamma={g} tau={} order={m}", fmt_c(*tau)));
        }
    }
    Ok(per_order)
}

/// Universal family checks: the product law at weight 8 and the
/// transformation law at weights 4 and 8.
pub fn universal_family_report<R: Real>(pkg: &DeformationPackage<R>, settings: &Settings) -> Result<Report> {
    let tol = &settings.tolerances;
    let h = pkg.h.expansion();
    let hh = h.mul(&h);
    let lhs = deform_form(&hh, 8, pkg)?;
    let bh = deform_form(&h, 4, pkg)?;
    let rhs = series_product(&bh, &bh, pkg.order);
    let mut report = Report::new();
    let mut w = Worst::new();
    w.update(series_rel_diff(&lhs, &rhs), || "f=g=h".into());
    report.below("homomorphism", w, tol.get("homomorphism"));

    let cases: Vec<(GroupElement, i64)> = settings.gammas.iter().flat_map(|g| [(*g, 4), (*g, 8)]).collect();
    let worst: Vec<Worst> = cases
        .par_iter()
        .map(|(g, k)| {
            let f = if *k == 4 { &h } else { &hh };
            let taus = settings.points::<R>(g, settings.tau_samples.len())?;
            let per = verify_transformation(f, *k, pkg, g, &taus, settings.min_imag)?;
            Ok(per.into_iter().fold(Worst::new(), Worst::merge))
        })
        .collect::<Result<_>>()?;
    report.below("transformation", worst.into_iter().fold(Worst::new(), Worst::merge), tol.get("transformation"));
    Ok(report)
}

/// Sends the word `(i₁,…,i_r)` with tensor entry at `(n₁,…,n_r)` to
/// `(τ^{n₁}∂)∘⋯∘(τ^{n_r}∂)` times `ρ_{i₁}⋯ρ_{i_r}`.
pub fn d_map<R: Real>(cocycle: &IteratedSeries<Complex<R>>, nq: usize) -> Result<RhoSeriesOp<R>> {
    use crate::defalg::DiffOp;
    let n_vars = cocycle.letters().len();
    let mut out = RhoSeriesOp::zero(n_vars, cocycle.depth_max(), 0, nq)?;
    let monomial = |n: usize| {
        let c = MixedExpansion::from_poly(nq, Poly::monomial(n, Complex::new(R::one(), R::zero())));
        DiffOp::from_coeffs(nq, vec![MixedExpansion::zero(nq), c])
    };
    for (word, tensor) in cocycle.words() {
        let mut idx = vec![0u32; n_vars];
        for &l in word {
            idx[l] += 1;
        }
        let mut acc = out.coefficient(&idx);
        for (flat, entry) in tensor.iter().enumerate() {
            let ns = tensor_indices(flat, word.len());
            let op = ns.iter().fold(DiffOp::identity(nq), |acc, &n| acc.compose(&monomial(n)));
            acc = acc.add(&op.scale(*entry));
        }
        debug_assert_eq!(tensor.len(), SLOT_DIM.pow(word.len() as u32));
        out.set(idx, acc)?;
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct CanonicalData<R: Real> {
    /// `D𝒞_γ` for every sampled element.
    pub ops: BTreeMap<GroupElement, RhoSeriesOp<R>>,
    /// Quadratic coefficients of `log D𝒞_γ` per `ρ`-degree.
    pub logs: BTreeMap<GroupElement, BTreeMap<MultiIndex, Quad<R>>>,
    /// Fitted `κ_γ` with `log D𝒞_γ|_ρ ≈ κ_γ·p_γ` (as quadratics).
    pub constants: BTreeMap<GroupElement, Complex<R>>,
    pub report: Report,
}

/// `D𝒞_γ` for every sampled element, with `τ`-independence, shape, cocycle
/// and proportionality checks.
pub fn canonical_deformation<R: Real>(
    h: &CuspForm<R>,
    depth: usize,
    a1: &BTreeMap<GroupElement, Quad<R>>,
    settings: &Settings,
) -> Result<CanonicalData<R>> {
    let tol = &settings.tolerances;
    let nq = h.nq();
    let series = iterated_series(std::slice::from_ref(h), depth, nq)?;
    let elements = settings.elements();
    let computed: Vec<(GroupElement, RhoSeriesOp<R>, f64)> = elements
        .par_iter()
        .map(|g| {
            let taus = settings.points::<R>(g, settings.tau_samples.len())?;
            let c = canonical_cocycle(&series, g, &taus, settings.min_imag)?;
            Ok((*g, d_map(&c.mean, nq)?, c.deviation))
        })
        .collect::<Result<_>>()?;
    let mut report = Report::new();
    let mut tau_w = Worst::new();
    let mut ops = BTreeMap::new();
    for (g, op, dev) in computed {
        tau_w.update(dev, || format!("gamma={g}"));
        ops.insert(g, op);
    }
    report.below("canonical_tau", tau_w, tol.get("canonical_tau"));

    let mut shape = Worst::new();
    let mut logs = BTreeMap::new();
    for (g, op) in &ops {
        let log = op.log_op()?;
        let lie = log.lie_part();
        let defect = match &lie {
            Ok(l) => l.terms().map(|(_, d)| d.to_lie(0).map_or(f64::INFINITY, |x| x.shape_defect())).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        shape.update(scaled(defect, log.max_magnitude()), || format!("gamma={g}"));
        if let Ok(q) = op.log_quadratics(f64::INFINITY) {
            logs.insert(*g, q);
        }
    }
    report.below("canonical_shape", shape, tol.get("canonical_shape"));

    let mut cw = Worst::new();
    for (g, d) in &settings.pairs {
        let gd = g.mul(d);
        match ops[g].slash_restricted(d, f64::INFINITY).and_then(|s| s.compose(&ops[d])) {
            Ok(rhs) => cw.update(ops[&gd].scaled_diff(&rhs), || format!("gamma={g} delta={d}")),
            Err(e) => cw.update(f64::INFINITY, || format!("gamma={g} delta={d}: {e}")),
        }
    }
    report.below("canonical_cocycle", cw, tol.get("canonical_cocycle"));

    let mut constants = BTreeMap::new();
    let mut prop = Worst::new();
    for g in settings.gammas.iter().filter(|g| g.c() != 0) {
        let (Some(log), Some(p)) = (logs.get(g), a1.get(g)) else { continue };
        let x = log.get(&vec![1]).cloned().unwrap_or_else(|| QuadraticLie::zero(0));
        let num = (0..3).fold(Complex::new(R::zero(), R::zero()), |s, i| s + x.p[i] * p.p[i].conj());
        let den = (0..3).fold(R::zero(), |s, i| s + p.p[i].norm_sqr());
        let kappa = num / den;
        let fitted = p.scale(&kappa);
        prop.update(x.max_abs_diff(&fitted) / x.max_magnitude().max(1e-300), || format!("gamma={g}"));
        constants.insert(*g, kappa);
    }
    report.below("canonical_proportional", prop, tol.get("canonical_proportional"));
    let mut stab = Worst::new();
    if !constants.is_empty() {
        let count = R::from_int(constants.len() as i64);
        let mean = constants.values().fold(Complex::new(R::zero(), R::zero()), |s, k| s + *k) / count;
        for (g, k) in &constants {
            stab.update(((*k - mean).norm() / mean.norm()).as_f64(), || format!("gamma={g}"));
        }
        let mean = to_c64(mean);
        report.note("canonical_constant_re", mean.re);
        report.note("canonical_constant_im", mean.im);
    } else {
        stab.update(f64::INFINITY, || "no element with c != 0".into());
    }
    report.below("canonical_constant", stab, tol.get("canonical_constant"));
    Ok(CanonicalData { ops, logs, constants, report })
}

/// Result of [`match_cocycles_order2`].
#[derive(Clone, Debug)]
pub struct CocycleMatch<R: Real> {
    pub scaling: LetterScaling<R>,
    pub c: [Quad<R>; 2],
    /// Residuals of the order-1 and order-2 least-squares solves, relative
    /// to the size of the target coefficients at that order (and of the
    /// transported source term at order two).
    pub residuals: [f64; 2],
    /// Scaled difference between the transformed source and the target.
    pub image_residual: f64,
}

/// Finds `(C, Φ)` with `C = exp(c₁ρ + c₂ρ²)`, `Φ(ρ) = λ₁ρ + λ₂ρ²`, such that
/// `C‖γ·Φ(S_γ)·C⁻¹ = T_γ` at order two, from the logarithm coefficients of
/// the source `S` and the target `T`.
pub fn match_cocycles_order2<R: Real>(
    target: &BTreeMap<GroupElement, [Quad<R>; 2]>,
    source: &BTreeMap<GroupElement, [Quad<R>; 2]>,
    nq: usize,
) -> Result<CocycleMatch<R>> {
    let gammas: Vec<GroupElement> = target.keys().filter(|g| source.contains_key(g)).copied().collect();
    if gammas.len() < 3 {
        return Err(Error::Config { field: "gammas".into(), message: "matching needs at least 3 common elements".into() });
    }
    // Unknowns (λ, c₀, c₁, c₂) with rows λ·x_γ + (M_γ − I)c = v_γ.
    let solve = |rhs: &dyn Fn(&GroupElement) -> Result<Quad<R>>, x: &dyn Fn(&GroupElement) -> Quad<R>| -> Result<(Complex<R>, Quad<R>, f64)> {
        let mut rows = Vec::new();
        let mut b = Vec::new();
        for g in &gammas {
            let m = crate::mmv::slot_matrix(g);
            let xv = x(g);
            let v = rhs(g)?;
            for i in 0..3 {
                let mut row = vec![xv.p[i]];
                row.extend((0..3).map(|n| Complex::new(R::from_int(m[i][n] - i64::from(i == n)), R::zero())));
                rows.push(row);
                b.push(v.p[i]);
            }
        }
        let sol = lstsq(&rows, &b)?;
        Ok((sol.x[0], QuadraticLie::new(0, [sol.x[1], sol.x[2], sol.x[3]]), sol.residual))
    };
    let norm = |f: &dyn Fn(&GroupElement) -> Quad<R>| {
        gammas.iter().flat_map(|g| f(g).p).map(|z| z.norm_sqr().as_f64()).sum::<f64>().sqrt()
    };
    let relative = |abs: f64, scale: f64| if scale == 0.0 { abs } else { abs / scale };
    let (l1, c1, r1) = solve(&|g| Ok(target[g][0].clone()), &|g| source[g][0].clone())?;
    let r1 = relative(r1, norm(&|g| target[g][0].clone()));
    let half = Complex::new(R::lit(0.5), R::zero());
    let rhs2 = |g: &GroupElement| -> Result<Quad<R>> {
        let u1 = c1.slash(g);
        let v1 = source[g][0].scale(&l1);
        let w1 = c1.scale(&-Complex::new(R::one(), R::zero()));
        let br = u1.bracket(&v1)?.add(&u1.bracket(&w1)?)?.add(&v1.bracket(&w1)?)?;
        target[g][1].sub(&source[g][1].scale(&(l1 * l1)))?.sub(&br.scale(&half))
    };
    let (l2, c2, r2) = solve(&rhs2, &|g| source[g][0].clone())?;
    let r2 = relative(r2, norm(&|g| target[g][1].clone()).max(norm(&|g| source[g][1].scale(&(l1 * l1)))));
    let scaling = LetterScaling::single(l1, l2);
    let mut log_c = BTreeMap::new();
    log_c.insert(vec![1], c1.clone());
    log_c.insert(vec![2], c2.clone());
    let m = MonoidElement { c: RhoSeriesOp::from_log_quadratics(1, 2, 0, nq, &log_c)?, phi: scaling.clone() };
    let mut image_residual: f64 = 0.0;
    for g in &gammas {
        let s = RhoSeriesOp::from_quadratics(2, nq, 0, &source[g])?.exp_op()?;
        let t = RhoSeriesOp::from_quadratics(2, nq, 0, &target[g])?.exp_op()?;
        image_residual = image_residual.max(m.act(&s, g, f64::INFINITY)?.scaled_diff(&t));
    }
    Ok(CocycleMatch { scaling, c: [c1, c2], residuals: [r1, r2], image_residual })
}

/// Matches the package cocycle against the canonical one and records the
/// residuals.
pub fn match_report<R: Real>(pkg: &DeformationPackage<R>, canon: &CanonicalData<R>, settings: &Settings) -> Result<(CocycleMatch<R>, Report)> {
    let zero = QuadraticLie::zero(0);
    let target: BTreeMap<GroupElement, [Quad<R>; 2]> = pkg.a1.iter().filter_map(|(g, a1)| pkg.a2.get(g).map(|a2| (*g, [a1.clone(), a2.clone()]))).collect();
    let source: BTreeMap<GroupElement, [Quad<R>; 2]> = canon
        .logs
        .iter()
        .map(|(g, l)| (*g, [l.get(&vec![1]).cloned().unwrap_or_else(|| zero.clone()), l.get(&vec![2]).cloned().unwrap_or_else(|| zero.clone())]))
        .collect();
    let m = match_cocycles_order2(&target, &source, pkg.nq())?;
    let mut report = Report::new();
    let mut w1 = Worst::new();
    w1.update(m.residuals[0], || format!("lambda1={}", fmt_c(m.scaling.lambda(0, 1))));
    report.below("match_order1", w1, settings.tolerances.get("match_order1"));
    let mut w2 = Worst::new();
    w2.update(m.residuals[1].max(m.image_residual), || format!("lambda2={}", fmt_c(m.scaling.lambda(0, 2))));
    report.below("match_order2", w2, settings.tolerances.get("match_order2"));
    report.note("match_image_residual", m.image_residual);
    Ok((m, report))
}

/// Negative and positive controls for the linear coboundary solver.
pub fn coboundary_controls<R: Real>(pkg: &DeformationPackage<R>, settings: &Settings) -> Result<Report> {
    let values: Vec<(GroupElement, [Complex<R>; 3])> = pkg.a1.iter().map(|(g, q)| (*g, q.p)).collect();
    let sol = solve_linear_coboundary(&values)?;
    let mut report = Report::new();
    let mut least = Least::new();
    least.update(sol.residual, || "period polynomial cocycle".into());
    report.above("nontrivial_class", least, settings.tolerances.get("nontrivial_class"));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0xc0b0);
    let mut w = Worst::new();
    for trial in 0..5 {
        let c0 = QuadraticLie::new(0, std::array::from_fn(|_| cx::<R>(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
        let vals: Vec<_> = pkg.a1.keys().map(|g| Ok((*g, c0.slash(g).sub(&c0)?.p))).collect::<Result<_>>()?;
        let s = solve_linear_coboundary(&vals)?;
        let err = (0..3).map(|i| (s.c[i] - c0.p[i]).norm().as_f64()).fold(s.residual, f64::max);
        w.update(err, || format!("trial={trial}"));
    }
    report.below("constructed_coboundary", w, settings.tolerances.get("constructed_coboundary"));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{default_tau_samples, sample_evaluable, sample_pairs, GroupContext, DEFAULT_MIN_IMAG};

    fn settings(gammas: usize, pairs: usize) -> Settings {
        let ctx = GroupContext::gamma0_5();
        Settings {
            gammas: sample_evaluable(&ctx, gammas, 4, 10, 7).unwrap(),
            pairs: sample_pairs(&ctx, pairs, 3, 10, 7).unwrap(),
            tau_samples: default_tau_samples(),
            fit_points: 8,
            min_imag: DEFAULT_MIN_IMAG,
            seed: 7,
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn translation_has_zero_first_order_value() {
        let h = CuspForm::<f64>::default_level5(64);
        let pkg = first_order_data(&h, &settings(3, 2)).unwrap();
        assert!(pkg.a1[&GroupElement::translation(1)].max_magnitude() < 1e-12);
        assert!(pkg.verified(), "{:?}", pkg.report);
    }

    #[test]
    fn zero_form_gives_zero_package() {
        let h = CuspForm::<f64>::zero(4, 5, 32);
        let pkg = second_order_data(&h, &settings(3, 2)).unwrap();
        assert!(pkg.a1.values().chain(pkg.a2.values()).all(|q| q.is_zero()));
        assert!(pkg.b2.unwrap().coeff_d().is_zero());
    }

    #[test]
    fn deform_low_orders() {
        let h = CuspForm::<f64>::default_level5(64);
        let pkg = second_order_data(&h, &settings(3, 3)).unwrap();
        assert!(pkg.verified(), "{:?}", pkg.report.failures());
        let f = h.expansion();
        let b = deform_form(&f, 4, &pkg).unwrap();
        assert!(b[&vec![0]].max_abs_diff(&f) == 0.0);
        let expected = pkg.htilde.mul(&f.differentiate()).scale(cx_int(2)).add(&pkg.htilde.differentiate().mul(&f).scale(cx_int(4)));
        assert!(b[&vec![1]].max_abs_diff(&expected) < 1e-12 * expected.max_magnitude());
    }

    #[test]
    fn d_map_of_unit_is_identity() {
        let unit = IteratedSeries::unit(vec!["h".into()], 2, Complex::new(1.0, 0.0));
        let op = d_map::<f64>(&unit, 4).unwrap();
        assert_eq!(op, RhoSeriesOp::identity(1, 2, 0, 4).unwrap());
    }

    #[test]
    fn matching_identical_and_rescaled() {
        let h = CuspForm::<f64>::default_level5(48);
        let pkg = second_order_data(&h, &settings(5, 3)).unwrap();
        let logs: BTreeMap<_, _> = pkg.a1.iter().map(|(g, a1)| (*g, [a1.clone(), pkg.a2[g].clone()])).collect();
        let m = match_cocycles_order2(&logs, &logs, 4).unwrap();
        assert!((m.scaling.lambda(0, 1) - cx(1.0, 0.0)).norm() < 1e-9);
        assert!(m.scaling.lambda(0, 2).norm() < 1e-9);
        assert!(m.image_residual < 1e-9);
        let s = cx::<f64>(-0.7, 1.9);
        let scaled: BTreeMap<_, _> = logs.iter().map(|(g, [x1, x2])| (*g, [x1.scale(&s), x2.scale(&(s * s))])).collect();
        let m = match_cocycles_order2(&scaled, &logs, 4).unwrap();
        assert!((m.scaling.lambda(0, 1) - s).norm() < 1e-9);
        assert!(m.scaling.lambda(0, 2).norm() < 1e-9);
        assert!(m.image_residual < 1e-9);
    }
}
