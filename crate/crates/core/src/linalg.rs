//! Small dense complex least-squares solves.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct LstsqSolution<R: Real> {
    pub x: Vec<Complex<R>>,
    /// `‖Ax − b‖₂`.
    pub residual: f64,
    /// `‖b‖₂`.
    pub rhs_norm: f64,
}

/// Minimises `‖Ax − b‖₂` by modified Gram–Schmidt with one
/// reorthogonalisation pass. `rows[i]` is row `i` of `A`.
pub fn lstsq<R: Real>(rows: &[Vec<Complex<R>>], rhs: &[Complex<R>]) -> Result<LstsqSolution<R>> {
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    if m < n || rhs.len() != m || n == 0 {
        return Err(Error::RankDeficient(format!("{m} equations for {n} unknowns")));
    }
    let mut q: Vec<Vec<Complex<R>>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut r = vec![vec![Complex::<R>::zero(); n]; n];
    let col_norms: Vec<R> = q.iter().map(|c| norm(c)).collect();
    let max_norm = col_norms.iter().fold(R::zero(), |a, &b| a.max(b));
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let proj = dot(&q[k], &q[j]);
                r[k][j] = r[k][j] + proj;
                let qk = q[k].clone();
                for (x, y) in q[j].iter_mut().zip(qk.iter()) {
                    *x = *x - *y * proj;
                }
            }
        }
        let nj = norm(&q[j]);
        if nj <= max_norm * R::lit(1e-13) {
            return Err(Error::RankDeficient(format!("column {j} is dependent on the previous columns")));
        }
        r[j][j] = Complex::new(nj, R::zero());
        for x in q[j].iter_mut() {
            *x = *x / nj;
        }
    }
    let mut qtb: Vec<Complex<R>> = (0..n).map(|k| dot(&q[k], rhs)).collect();
    let mut x = vec![Complex::<R>::zero(); n];
    for j in (0..n).rev() {
        let mut s = qtb[j];
        for k in j + 1..n {
            s = s - r[j][k] * x[k];
        }
        x[j] = s / r[j][j];
        qtb[j] = s;
    }
    let residual = rows
        .iter()
        .zip(rhs)
        .map(|(row, b)| {
            let ax = row.iter().zip(&x).fold(Complex::<R>::zero(), |s, (a, xi)| s + *a * *xi);
            (ax - *b).norm_sqr()
        })
        .fold(R::zero(), |s, v| s + v)
        .sqrt()
        .as_f64();
    Ok(LstsqSolution { x, residual, rhs_norm: norm(rhs).as_f64() })
}

fn dot<R: Real>(a: &[Complex<R>], b: &[Complex<R>]) -> Complex<R> {
    a.iter().zip(b).fold(Complex::zero(), |s, (x, y)| s + x.conj() * *y)
}

fn norm<R: Real>(a: &[Complex<R>]) -> R {
    a.iter().fold(R::zero(), |s, x| s + x.norm_sqr()).sqrt()
}

/// Quadratic `c₀ + c₁τ + c₂τ²` fitted to samples, with the largest absolute
/// deviation at the samples.
#[derive(Clone, Debug)]
pub struct QuadraticFit<R: Real> {
    pub coeffs: [Complex<R>; 3],
    pub residual: f64,
}

/// Least-squares quadratic through `(τᵢ, vᵢ)`, fitted in a centred and scaled
/// variable and expanded back to the monomial basis.
pub fn fit_quadratic<R: Real>(points: &[Complex<R>], values: &[Complex<R>]) -> Result<QuadraticFit<R>> {
    if points.len() < 3 || points.len() != values.len() {
        return Err(Error::RankDeficient(format!("{} samples for a quadratic fit", points.len())));
    }
    let count = R::from_int(points.len() as i64);
    let center = points.iter().fold(Complex::zero(), |s, p| s + *p) / count;
    let scale = points.iter().map(|p| (*p - center).norm()).fold(R::zero(), |a, b| a.max(b));
    let scale = if scale > R::zero() { scale } else { R::one() };
    let rows: Vec<Vec<Complex<R>>> = points
        .iter()
        .map(|p| {
            let t = (*p - center) / scale;
            vec![Complex::one(), t, t * t]
        })
        .collect();
    let sol = lstsq(&rows, values)?;
    // β₀ + β₁(τ−m)/s + β₂(τ−m)²/s²
    let b1 = sol.x[1] / scale;
    let b2 = sol.x[2] / (scale * scale);
    let two = R::lit(2.0);
    let c2 = b2;
    let c1 = b1 - b2 * center * two;
    let c0 = sol.x[0] - b1 * center + b2 * center * center;
    let coeffs = [c0, c1, c2];
    let residual = points
        .iter()
        .zip(values)
        .map(|(p, v)| (coeffs[0] + coeffs[1] * *p + coeffs[2] * *p * *p - *v).norm().as_f64())
        .fold(0.0, f64::max);
    Ok(QuadraticFit { coeffs, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn exact_quadratic_is_recovered() {
        let pts = [c(0.1, 0.9), c(-0.3, 0.2), c(0.5, 0.5), c(0.0, 1.3), c(0.7, 0.1)];
        let coeffs = [c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 1.0)];
        let vals: Vec<_> = pts.iter().map(|p| coeffs[0] + coeffs[1] * p + coeffs[2] * p * p).collect();
        let fit = fit_quadratic(&pts, &vals).unwrap();
        for k in 0..3 {
            assert!((fit.coeffs[k] - coeffs[k]).norm() < 1e-12);
        }
        assert!(fit.residual < 1e-13);
    }

    #[test]
    fn non_polynomial_data_has_residual() {
        let pts: Vec<_> = (0..6).map(|i| c(0.1 * i as f64, 0.5)).collect();
        let vals: Vec<_> = pts.iter().map(|p| p * p * p).collect();
        assert!(fit_quadratic(&pts, &vals).unwrap().residual > 1e-4);
    }

    #[test]
    fn dependent_columns_are_rejected() {
        let rows = vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]];
        assert!(matches!(lstsq(&rows, &[c(1.0, 0.0), c(0.0, 0.0)]), Err(Error::RankDeficient(_))));
    }
}
