//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands,
//! on real intervals and on vertical rays `w₀ → w₀ + i∞` in the upper half
//! plane.

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_SEGMENTS: usize = 4000;

#[derive(Clone, Copy, Debug)]
pub struct Estimate<R: Real> {
    pub value: Complex<R>,
    pub error: R,
}

fn gk15<R: Real, F: FnMut(R) -> Complex<R>>(f: &mut F, a: R, b: R) -> (Complex<R>, R) {
    let half = (b - a) / R::lit(2.0);
    let mid = (a + b) / R::lit(2.0);
    let fc = f(mid);
    let mut kron = fc * R::lit(WGK[7]);
    let mut gauss = fc * R::lit(WG[3]);
    for i in 0..7 {
        let dx = half * R::lit(XGK[i]);
        let s = f(mid - dx) + f(mid + dx);
        kron = kron + s * R::lit(WGK[i]);
        if i % 2 == 1 {
            gauss = gauss + s * R::lit(WG[i / 2]);
        }
    }
    let value = kron * half;
    let err = ((kron - gauss) * half).norm();
    (value, err)
}

/// `∫_a^b f(t) dt` to absolute tolerance `tol`.
pub fn integrate<R: Real, F: FnMut(R) -> Complex<R>>(mut f: F, a: R, b: R, tol: f64) -> Result<Estimate<R>> {
    let mut segments = vec![(a, b, gk15(&mut f, a, b))];
    loop {
        let total_err: R = segments.iter().fold(R::zero(), |s, seg| s + seg.2 .1);
        if total_err.as_f64() <= tol {
            break;
        }
        if segments.len() >= MAX_SEGMENTS {
            return Err(Error::Residual {
                what: "quadrature error estimate".into(),
                residual: total_err.as_f64(),
                tolerance: tol,
            });
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.partial_cmp(&y.1 .2 .1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("nonempty");
        let (lo, hi, _) = segments.swap_remove(idx);
        let mid = (lo + hi) / R::lit(2.0);
        segments.push((lo, mid, gk15(&mut f, lo, mid)));
        segments.push((mid, hi, gk15(&mut f, mid, hi)));
    }
    let value = segments.iter().fold(Complex::zero(), |s, seg| s + seg.2 .0);
    let error = segments.iter().fold(R::zero(), |s, seg| s + seg.2 .1);
    Ok(Estimate { value, error })
}

/// `∫_{w₀}^{w₀+i∞} g(w) dw` for integrands decaying toward the cusp.
///
/// The ray is cut into segments of doubling length until two consecutive
/// segment contributions fall below `tol/100`.
pub fn integrate_ray<R: Real, F: FnMut(Complex<R>) -> Complex<R>>(
    mut g: F,
    w0: Complex<R>,
    tol: f64,
) -> Result<Estimate<R>> {
    let i = Complex::new(R::zero(), R::one());
    let mut total = Complex::<R>::zero();
    let mut error = R::zero();
    let mut lo = R::zero();
    let mut width = R::lit(0.25);
    let mut quiet = 0;
    for _ in 0..64 {
        let hi = lo + width;
        let est = integrate(|t| g(w0 + i * t), lo, hi, tol / 16.0)?;
        total = total + est.value;
        error = error + est.error;
        if est.value.norm().as_f64() < tol / 100.0 {
            quiet += 1;
            if quiet >= 2 {
                return Ok(Estimate { value: total * i, error });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width = width * R::lit(2.0);
    }
    Err(Error::Residual { what: "ray quadrature did not converge".into(), residual: total.norm().as_f64(), tolerance: tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_and_oscillatory() {
        let est = integrate(|t: f64| Complex::new(t * t, 0.0), 0.0, 3.0, 1e-13).unwrap();
        assert!((est.value.re - 9.0).abs() < 1e-13);
        let est = integrate(|t: f64| Complex::new(0.0, t).exp(), 0.0, 20.0, 1e-12).unwrap();
        let exact = (Complex::new(0.0, 20.0).exp() - 1.0) / Complex::new(0.0, 1.0);
        assert!((est.value - exact).norm() < 1e-11);
    }

    #[test]
    fn ray_integral_of_nome() {
        // ∫_τ^{i∞} e^{2πiz} dz = -e^{2πiτ}/(2πi)
        let tau = Complex::new(0.2, 0.3);
        let tpi = Complex::new(0.0, 2.0 * PI);
        let est = integrate_ray(|z: Complex<f64>| (tpi * z).exp(), tau, 1e-14).unwrap();
        let exact = -(tpi * tau).exp() / tpi;
        assert!((est.value - exact).norm() < 1e-13);
    }
}
