//! Least-squares solve of `v_γ = c‖γ − c` for a quadratic `c`.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::groups::GroupElement;
use crate::linalg::lstsq;
use crate::mmv::slot_matrix;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct CoboundarySolution<R: Real> {
    pub c: [Complex<R>; 3],
    /// `‖(M_γ − I)c − v‖ / ‖v‖` over all γ; zero for a zero cocycle.
    pub residual: f64,
    pub absolute: f64,
}

fn system<R: Real>(values: &[(GroupElement, [Complex<R>; 3])]) -> (Vec<Vec<Complex<R>>>, Vec<Complex<R>>) {
    let mut rows = Vec::with_capacity(3 * values.len());
    let mut rhs = Vec::with_capacity(3 * values.len());
    for (g, v) in values {
        let m = slot_matrix(g);
        for (i, vi) in v.iter().enumerate() {
            rows.push((0..3).map(|n| Complex::new(R::from_int(m[i][n] - i64::from(i == n)), R::zero())).collect());
            rhs.push(*vi);
        }
    }
    (rows, rhs)
}

/// Returns `c` and the relative residual; at least three `γ` are needed.
pub fn solve_linear_coboundary<R: Real>(values: &[(GroupElement, [Complex<R>; 3])]) -> Result<CoboundarySolution<R>> {
    if values.len() < 3 {
        return Err(Error::Config { field: "gammas".into(), message: format!("coboundary solve needs at least 3 elements, got {}", values.len()) });
    }
    let (rows, rhs) = system(values);
    let sol = match lstsq(&rows, &rhs) {
        Ok(s) => s,
        Err(Error::RankDeficient(_)) => return Err(Error::RankDeficient(invariant_direction(&rows))),
        Err(e) => return Err(e),
    };
    let residual = if sol.rhs_norm == 0.0 { 0.0 } else { sol.residual / sol.rhs_norm };
    Ok(CoboundarySolution { c: [sol.x[0], sol.x[1], sol.x[2]], residual, absolute: sol.residual })
}

/// Describes a quadratic fixed by every sampled `γ`.
fn invariant_direction<R: Real>(rows: &[Vec<Complex<R>>]) -> String {
    for free in (0..3).rev() {
        let cols: Vec<usize> = (0..3).filter(|&k| k != free).collect();
        let sub: Vec<Vec<Complex<R>>> = rows.iter().map(|r| cols.iter().map(|&k| r[k]).collect()).collect();
        let rhs: Vec<Complex<R>> = rows.iter().map(|r| -r[free]).collect();
        if let Ok(s) = lstsq(&sub, &rhs) {
            if s.residual <= 1e-10 * s.rhs_norm.max(1.0) {
                let mut v = [Complex::<R>::zero(); 3];
                v[free] = Complex::one();
                for (k, x) in cols.iter().zip(&s.x) {
                    v[*k] = *x;
                }
                let f = |z: Complex<R>| format!("{:.6}{:+.6}i", z.re.as_f64(), z.im.as_f64());
                return format!("invariant quadratic ({}) + ({})x + ({})x^2", f(v[0]), f(v[1]), f(v[2]));
            }
        }
    }
    "sampled elements fix a subspace of dimension at least two".into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::defalg::QuadraticLie;
    use crate::scalar::cx;

    fn gammas() -> Vec<GroupElement> {
        vec![GroupElement::translation(1), GroupElement::new(2, -1, 5, -2).unwrap(), GroupElement::new(1, 0, 5, 1).unwrap()]
    }

    #[test]
    fn constructed_coboundary() {
        let c0 = QuadraticLie::<Complex<f64>>::new(0, [cx(1.0, 2.0), cx(-0.5, 0.0), cx(0.25, -1.0)]);
        let vals: Vec<_> = gammas().into_iter().map(|g| (g, c0.slash(&g).sub(&c0).unwrap().p)).collect();
        let s = solve_linear_coboundary(&vals).unwrap();
        assert!(s.residual < 1e-12);
        for k in 0..3 {
            assert!((s.c[k] - c0.p[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_cocycle() {
        let vals: Vec<_> = gammas().into_iter().map(|g| (g, [Complex::<f64>::zero(); 3])).collect();
        let s = solve_linear_coboundary(&vals).unwrap();
        assert_eq!(s.residual, 0.0);
        assert!(s.c.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn translations_alone_fix_constants() {
        let vals = vec![(GroupElement::translation(1), [Complex::<f64>::zero(); 3]); 3];
        match solve_linear_coboundary(&vals) {
            Err(Error::RankDeficient(msg)) => assert!(msg.contains("invariant quadratic"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }
}
