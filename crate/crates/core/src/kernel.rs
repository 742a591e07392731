//! The Dunkl kernel `E_k(ix, y)` for `Z_2^d` as a product of rank-one kernels.

use crate::error::{invalid, DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::special::{kernel_parts, normalized_bessel};
use num_complex::Complex64;

pub use crate::special::normalized_bessel as bessel_j;

/// Rank-one kernel as a function of `t = xy`; `k` is assumed valid.
#[inline]
pub(crate) fn rank_one(k: f64, t: f64) -> Complex64 {
    if k == 0.0 {
        return Complex64::new(t.cos(), t.sin());
    }
    let (e, o) = kernel_parts(k - 0.5, t.abs()).expect("series within range");
    Complex64::new(e, if t < 0.0 { -o } else { o })
}

/// Even and odd parts `(j_{k-1/2}(t), t/(2k+1) j_{k+1/2}(t))` for `t >= 0`.
#[inline]
pub(crate) fn rank_one_parts(k: f64, t: f64) -> (f64, f64) {
    if k == 0.0 {
        return (t.cos(), t.sin());
    }
    kernel_parts(k - 0.5, t).expect("series within range")
}

/// `E_k(ix, y) = j_{k-1/2}(xy) + i xy/(2k+1) j_{k+1/2}(xy)`.
pub fn dunkl_kernel_1d(k: f64, x: f64, y: f64) -> Result<Complex64> {
    if !(k >= 0.0) || !k.is_finite() {
        return invalid(format!("multiplicity must be non-negative, got {k}"));
    }
    let t = x * y;
    if !t.is_finite() {
        return invalid("non-finite kernel argument");
    }
    if k == 0.0 {
        return Ok(Complex64::new(t.cos(), t.sin()));
    }
    let ta = t.abs();
    let even = normalized_bessel(k - 0.5, ta)?;
    let odd = normalized_bessel(k + 0.5, ta)? * ta / (2.0 * k + 1.0);
    Ok(Complex64::new(even, if t < 0.0 { -odd } else { odd }))
}

pub fn dunkl_kernel(setup: &ReflectionSetup, x: &[f64], y: &[f64]) -> Result<Complex64> {
    setup.check_point(x)?;
    setup.check_point(y)?;
    let mut acc = Complex64::new(1.0, 0.0);
    for i in 0..setup.dim() {
        acc *= dunkl_kernel_1d(setup.k()[i], x[i], y[i])?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBoundReport {
    pub fd_value: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub ok: bool,
}

/// Central finite difference of `z -> E_k(ix, z)` against `|x|^{|α|}`.
pub fn kernel_derivative_bound_check(
    setup: &ReflectionSetup,
    x: &[f64],
    z: &[f64],
    alpha: &[u32],
    h: f64,
) -> Result<DerivativeBoundReport> {
    setup.check_point(x)?;
    setup.check_point(z)?;
    if alpha.len() != setup.dim() {
        return invalid("multi-index length must equal the dimension");
    }
    let order: u32 = alpha.iter().sum();
    if order > 3 {
        return invalid("finite differences limited to order 3");
    }
    if !(h > 0.0) {
        return invalid("step must be positive");
    }
    let roundoff = 1e-14 * 4f64.powi(order as i32) / h.powi(order as i32);
    if roundoff > 1e-3 {
        return Err(DunklError::InvalidParameter(format!(
            "step {h} too small for order {order}: cancellation dominates"
        )));
    }
    // tensor product of one-dimensional stencils
    let stencils: Vec<Vec<(f64, f64)>> = alpha.iter().map(|&a| stencil(a, h)).collect();
    let mut idx = vec![0usize; setup.dim()];
    let mut acc = Complex64::new(0.0, 0.0);
    'outer: loop {
        let mut zz = z.to_vec();
        let mut coef = 1.0;
        for i in 0..setup.dim() {
            let (off, c) = stencils[i][idx[i]];
            zz[i] += off;
            coef *= c;
        }
        acc += dunkl_kernel(setup, x, &zz)? * coef;
        for i in 0..setup.dim() {
            idx[i] += 1;
            if idx[i] < stencils[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    let xn = crate::geometry::norm(x);
    let bound = xn.powi(order as i32);
    let tolerance = xn.powi(order as i32 + 2) * h * h + roundoff;
    let fd_value = acc.norm();
    Ok(DerivativeBoundReport {
        fd_value,
        bound,
        tolerance,
        ok: fd_value <= bound + tolerance,
    })
}

fn stencil(order: u32, h: f64) -> Vec<(f64, f64)> {
    match order {
        0 => vec![(0.0, 1.0)],
        1 => vec![(-h, -0.5 / h), (h, 0.5 / h)],
        2 => vec![(-h, 1.0 / (h * h)), (0.0, -2.0 / (h * h)), (h, 1.0 / (h * h))],
        _ => {
            let c = 0.5 / (h * h * h);
            vec![(-2.0 * h, -c), (-h, 2.0 * c), (h, -2.0 * c), (2.0 * h, c)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Power-series solution of the rank-one eigenproblem
    /// `f'(t) + k (f(t) - f(-t))/t = i f(t)` with `f(0)=1`:
    /// coefficients `a_{n+1} (n + 1 + k(1 - (-1)^{n+1})) = i a_n`.
    fn ode_series(k: f64, t: f64) -> Complex64 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 0..400 {
            let m = (n + 1) as f64;
            let denom = m + if (n + 1) % 2 == 1 { 2.0 * k } else { 0.0 };
            term = term * Complex64::i() * t / denom;
            sum += term;
        }
        sum
    }

    #[test]
    fn classical_case() {
        let v = dunkl_kernel_1d(0.0, PI, 1.0).unwrap();
        assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert_eq!(dunkl_kernel_1d(1.3, 0.0, 5.0).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn matches_eigenfunction_series() {
        for &k in &[0.5, 1.0, 2.5, 0.3] {
            for &t in &[1.0, -2.0, 6.0, 10.0, -14.0] {
                let v = dunkl_kernel_1d(k, t, 1.0).unwrap();
                let o = ode_series(k, t);
                assert!((v - o).norm() < 1e-8, "k={k} t={t} {v} {o}");
            }
        }
    }

    #[test]
    fn product_structure() {
        let s = ReflectionSetup::new(vec![1.0, 0.5]).unwrap();
        let v = dunkl_kernel(&s, &[1.0, 2.0], &[0.3, -1.0]).unwrap();
        let want = ode_series(1.0, 0.3) * ode_series(0.5, -2.0);
        assert!((v - want).norm() < 1e-10);
        let s0 = ReflectionSetup::uniform(2, 0.0).unwrap();
        let v = dunkl_kernel(&s0, &[1.0, 2.0], &[0.3, -1.0]).unwrap();
        assert!((v - Complex64::from_polar(1.0, 0.3 - 2.0)).norm() < 1e-14);
    }

    #[test]
    fn derivative_checks() {
        let s0 = ReflectionSetup::uniform(1, 0.0).unwrap();
        let r = kernel_derivative_bound_check(&s0, &[1.7], &[0.4], &[1], 1e-4).unwrap();
        assert!((r.fd_value - 1.7).abs() < 1e-6 && r.ok);
        let s1 = ReflectionSetup::uniform(1, 1.0).unwrap();
        let r = kernel_derivative_bound_check(&s1, &[2.0], &[0.7], &[1], 1e-4).unwrap();
        assert!(r.ok, "{r:?}");
        let r = kernel_derivative_bound_check(&s1, &[2.0], &[0.7], &[0], 1e-4).unwrap();
        assert!(r.fd_value <= 1.0 + 1e-12);
        assert!(kernel_derivative_bound_check(&s1, &[2.0], &[0.7], &[3], 1e-6).is_err());
        assert!(kernel_derivative_bound_check(&s1, &[2.0], &[0.7], &[4], 1e-2).is_err());
    }
}
