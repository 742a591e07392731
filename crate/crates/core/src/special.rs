//! Special functions: normalized Bessel functions, Riemann and Hurwitz zeta.

use crate::error::{DunklError, Result};
use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 30.0;
const MAX_TERMS: usize = 200;
const MILLER_CAP: usize = 160;

/// Normalized Bessel function `j_a(t) = Γ(a+1) (2/t)^a J_a(t)`, even in `t`.
pub fn normalized_bessel(alpha: f64, t: f64) -> Result<f64> {
    if !(alpha >= -0.5) || !alpha.is_finite() {
        return Err(DunklError::InvalidParameter(format!(
            "bessel order {alpha} below -1/2"
        )));
    }
    let t = t.abs();
    if t < SERIES_LIMIT {
        series(alpha, t)
    } else if t < ASYMPTOTIC_LIMIT {
        Ok(miller(alpha, t).0)
    } else {
        Ok(hankel(alpha, t))
    }
}

/// Returns `(j_a(t), t/(2a+2) j_{a+1}(t))` for `t >= 0`, the even and odd
/// parts of the rank-one kernel with multiplicity `a + 1/2`.
pub(crate) fn kernel_parts(alpha: f64, t: f64) -> Result<(f64, f64)> {
    debug_assert!(t >= 0.0);
    if t < SERIES_LIMIT {
        let even = series(alpha, t)?;
        let odd = series(alpha + 1.0, t)? * t / (2.0 * alpha + 2.0);
        Ok((even, odd))
    } else if t < ASYMPTOTIC_LIMIT {
        Ok(miller(alpha, t))
    } else {
        let even = hankel(alpha, t);
        let odd = hankel(alpha + 1.0, t) * t / (2.0 * alpha + 2.0);
        Ok((even, odd))
    }
}

fn series(alpha: f64, t: f64) -> Result<f64> {
    let q = -0.25 * t * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..=MAX_TERMS {
        term *= q / (m as f64 * (alpha + m as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            return Ok(sum);
        }
    }
    Err(DunklError::SeriesNonConvergence {
        alpha,
        t,
        terms: MAX_TERMS,
    })
}

/// Backward recurrence for `J_{a+n}`, normalized with the Neumann series
/// `(t/2)^a = Σ (a+2n) Γ(a+n)/n! J_{a+2n}(t)`.
fn miller(alpha: f64, t: f64) -> (f64, f64) {
    let top = ((t + 15.0 + (40.0 * t).sqrt()) as usize).min(MILLER_CAP - 2);
    let mut f = [0.0f64; MILLER_CAP];
    f[top] = 1e-30;
    f[top + 1] = 0.0;
    for n in (1..=top).rev() {
        f[n - 1] = 2.0 * (alpha + n as f64) / t * f[n] - f[n + 1];
        if f[n - 1].abs() > 1e250 {
            for v in f[n - 1..=top + 1].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let mut s = f[0];
    let mut r = 1.0;
    let mut i = 1;
    while 2 * i <= top {
        s += (alpha + 2.0 * i as f64) * r * f[2 * i];
        r *= (alpha + i as f64) / (i as f64 + 1.0);
        i += 1;
    }
    (f[0] / s, f[1] / s)
}

fn hankel(alpha: f64, t: f64) -> f64 {
    let mu = 4.0 * alpha * alpha;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kk = k as f64;
        a *= (mu - (2.0 * kk - 1.0).powi(2)) / (kk * 8.0 * t);
        let mag = a.abs();
        if mag > last || mag < 1e-17 {
            break;
        }
        last = mag;
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    let chi = t - (0.5 * alpha + 0.25) * PI;
    let j = (2.0 / (PI * t)).sqrt() * (p * chi.cos() - q * chi.sin());
    let log_scale = ln_gamma(alpha + 1.0) + alpha * (2.0 / t).ln();
    log_scale.exp() * j
}

const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Riemann zeta on the real line, `s != 1`.
pub fn riemann_zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return -0.5;
    }
    if s < 0.5 {
        let reflected = riemann_zeta(1.0 - s);
        return 2f64.powf(s)
            * PI.powf(s - 1.0)
            * (0.5 * PI * s).sin()
            * gamma(1.0 - s)
            * reflected;
    }
    let n = 12usize;
    let nf = n as f64;
    let mut sum: f64 = (1..n).map(|i| (i as f64).powf(-s)).sum();
    sum += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s);
    let mut rising = s;
    let mut fact = 2.0;
    let mut npow = nf.powf(-s - 1.0);
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        sum += b / fact * rising * npow;
        let m = 2.0 * (j as f64 + 1.0);
        rising *= (s + m - 1.0) * (s + m);
        fact *= (m + 1.0) * (m + 2.0);
        npow /= nf * nf;
    }
    sum
}

/// Hurwitz zeta at shift one half: `Σ_{n≥0} (n+1/2)^{-s} = (2^s - 1) ζ(s)`.
pub fn hurwitz_zeta_half(s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    (2f64.powf(s) - 1.0) * riemann_zeta(s)
}
