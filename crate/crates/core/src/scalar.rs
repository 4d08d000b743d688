//! Scalar traits.
//!
//! [`Real`] is the floating component type of every complex coefficient in
//! the analytic part of the crate. It is implemented for `f32`, `f64` and the
//! double-double [`TwoFloat`]. The double-double implementation overrides the
//! transcendental kernels because the ones shipped with `twofloat` are only
//! accurate to about `1e-17`.
//!
//! [`Field`] is the coefficient type of exact quadratic-polynomial Lie algebra
//! computations; it is implemented for the complex types above and for
//! [`BigRational`].

use std::fmt::Debug;
use std::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, Zero};
use twofloat::TwoFloat;

pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Unit roundoff of the arithmetic.
    fn unit_roundoff() -> Self;

    fn pi() -> Self {
        Self::PI()
    }

    fn exp_real(self) -> Self {
        self.exp()
    }

    fn sin_cos_real(self) -> (Self, Self) {
        self.sin_cos()
    }

    /// Short name used in reports.
    fn precision_name() -> &'static str;
}

impl Real for f32 {
    fn unit_roundoff() -> Self {
        f32::EPSILON / 2.0
    }
    fn precision_name() -> &'static str {
        "f32"
    }
}

impl Real for f64 {
    fn unit_roundoff() -> Self {
        f64::EPSILON / 2.0
    }
    fn precision_name() -> &'static str {
        "f64"
    }
}

const DD_PI: (f64, f64) = (std::f64::consts::PI, 1.2246467991473532e-16);
const DD_HALF_PI: (f64, f64) = (std::f64::consts::FRAC_PI_2, 6.123233995736766e-17);
const DD_LN2: (f64, f64) = (std::f64::consts::LN_2, 2.3190468138462996e-17);

fn dd(pair: (f64, f64)) -> TwoFloat {
    TwoFloat::new_add(pair.0, pair.1)
}

fn dd_exp(x: TwoFloat) -> TwoFloat {
    let hi = x.hi();
    if hi < -745.0 {
        return TwoFloat::from(0.0);
    }
    if hi > 709.0 {
        return TwoFloat::from(f64::INFINITY);
    }
    let k = (hi / DD_LN2.0).round();
    let r = (x - dd(DD_LN2) * k) / 64.0;
    let mut sum = TwoFloat::from(1.0);
    let mut term = TwoFloat::from(1.0);
    for n in 1..24 {
        term = term * r / (n as f64);
        sum += term;
        if term.hi().abs() < 1e-36 {
            break;
        }
    }
    for _ in 0..6 {
        sum = sum * sum;
    }
    sum * 2f64.powi(k as i32)
}

fn dd_sin_cos(x: TwoFloat) -> (TwoFloat, TwoFloat) {
    let n = (x.hi() / DD_HALF_PI.0).round();
    let r = x - dd(DD_HALF_PI) * n;
    let r2 = r * r;
    let mut s = r;
    let mut c = TwoFloat::from(1.0);
    let mut ts = r;
    let mut tc = TwoFloat::from(1.0);
    for m in 1..20 {
        let m = m as f64;
        ts = -ts * r2 / ((2.0 * m) * (2.0 * m + 1.0));
        tc = -tc * r2 / ((2.0 * m - 1.0) * (2.0 * m));
        s += ts;
        c += tc;
        if ts.hi().abs() < 1e-36 && tc.hi().abs() < 1e-36 {
            break;
        }
    }
    match (n as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

impl Real for TwoFloat {
    fn lit(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn unit_roundoff() -> Self {
        TwoFloat::from(1.0e-32)
    }
    fn pi() -> Self {
        dd(DD_PI)
    }
    fn exp_real(self) -> Self {
        dd_exp(self)
    }
    fn sin_cos_real(self) -> (Self, Self) {
        dd_sin_cos(self)
    }
    fn precision_name() -> &'static str {
        "double-double"
    }
}

/// Complex number from `f64` parts.
pub fn cx<R: Real>(re: f64, im: f64) -> Complex<R> {
    Complex::new(R::lit(re), R::lit(im))
}

pub fn cx_int<R: Real>(n: i64) -> Complex<R> {
    Complex::new(R::from_int(n), R::zero())
}

/// `2πi`.
pub fn two_pi_i<R: Real>() -> Complex<R> {
    Complex::new(R::zero(), R::pi() + R::pi())
}

/// Complex exponential built on the precision-aware real kernels.
pub fn cexp<R: Real>(z: Complex<R>) -> Complex<R> {
    let m = z.re.exp_real();
    let (s, c) = z.im.sin_cos_real();
    Complex::new(m * c, m * s)
}

/// `e^{2πiτ}`.
pub fn nome<R: Real>(tau: Complex<R>) -> Complex<R> {
    cexp(two_pi_i::<R>() * tau)
}

pub fn to_c64<R: Real>(z: Complex<R>) -> Complex<f64> {
    Complex::new(z.re.as_f64(), z.im.as_f64())
}

pub fn from_c64<R: Real>(z: Complex<f64>) -> Complex<R> {
    Complex::new(R::lit(z.re), R::lit(z.im))
}

pub fn binomial(n: u32, k: u32) -> i64 {
    if k > n {
        return 0;
    }
    let mut acc: i64 = 1;
    for i in 0..k as i64 {
        acc = acc * (n as i64 - i) / (i + 1);
    }
    acc
}

/// Coefficient field for exact quadratic-polynomial algebra.
pub trait Field: Clone + PartialEq + Debug + Num + Neg<Output = Self> + Send + Sync {
    fn from_int(n: i64) -> Self;
    /// Magnitude used to report residuals.
    fn magnitude(&self) -> f64;
}

impl<R: Real> Field for Complex<R> {
    fn from_int(n: i64) -> Self {
        cx_int(n)
    }
    fn magnitude(&self) -> f64 {
        self.norm().as_f64()
    }
}

macro_rules! real_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn from_int(n: i64) -> Self {
                <$t as Real>::from_int(n)
            }
            fn magnitude(&self) -> f64 {
                self.abs().as_f64()
            }
        }
    )*};
}

real_field!(f32, f64, TwoFloat);

impl Field for BigRational {
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn magnitude(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let r = self.abs();
        let num: f64 = r.numer().to_string().parse().unwrap_or(f64::INFINITY);
        let den: f64 = r.denom().to_string().parse().unwrap_or(f64::INFINITY);
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::excessive_precision)]
    fn double_double_exp_matches_reference_digits() {
        // e = 2.718281828459045235360287471352662497757
        let e = TwoFloat::from(1.0).exp_real();
        let tail = e - TwoFloat::from(std::f64::consts::E);
        let expected_tail = 2.35360287471352662497757e-16 - 0.0000000000000000907955982984276;
        assert!((tail.hi() - expected_tail).abs() < 1e-30, "{tail:?}");
        let x = TwoFloat::from(-5.3);
        let prod = x.exp_real() * (-x).exp_real() - TwoFloat::from(1.0);
        assert!(prod.hi().abs() < 1e-29, "{prod:?}");
    }

    #[test]
    fn double_double_sin_cos_identities() {
        for &v in &[0.1, 1.3, -2.7, 40.1234, -811.5] {
            let (s, c) = TwoFloat::from(v).sin_cos_real();
            let one = s * s + c * c - TwoFloat::from(1.0);
            assert!(one.hi().abs() < 1e-29, "{v}: {one:?}");
            assert!((s.hi() - v.sin()).abs() < 1e-12);
        }
        let (s, _) = <TwoFloat as Real>::pi().sin_cos_real();
        assert!(s.hi().abs() < 1e-30);
    }

    #[test]
    fn nome_at_i() {
        let q = nome::<f64>(Complex::new(0.0, 1.0));
        assert!((q.re - (-2.0 * std::f64::consts::PI).exp()).abs() < 1e-18);
        assert!(q.im.abs() < 1e-18);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(2, 0), 1);
        assert_eq!(binomial(2, 1), 2);
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(2, 3), 0);
    }

    #[test]
    fn rational_magnitude() {
        let r = BigRational::new(BigInt::from(-3), BigInt::from(4));
        assert_eq!(r.magnitude(), 0.75);
    }
}
