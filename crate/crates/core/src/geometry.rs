//! The doubling measure space `(R^d, |x-y|, μ_k)` for the reflection group `Z_2^d`.

use crate::error::{invalid, DunklError, Result};
use crate::special::gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root system `Z_2^d` with one multiplicity per coordinate reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSetup {
    d: usize,
    k: Vec<f64>,
    gamma_k: f64,
    d_k: f64,
    c_k: f64,
    c_axis: Vec<f64>,
}

impl ReflectionSetup {
    pub fn new(k: Vec<f64>) -> Result<Self> {
        if k.is_empty() {
            return invalid("dimension must be positive");
        }
        if k.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return invalid("multiplicities must be finite and non-negative");
        }
        let c_axis: Vec<f64> = k
            .iter()
            .map(|&ki| 1.0 / (2f64.powf(2.0 * ki + 0.5) * gamma(ki + 0.5)))
            .collect();
        let gamma_k = k.iter().map(|v| 2.0 * v).sum::<f64>();
        Ok(Self {
            d: k.len(),
            gamma_k,
            d_k: k.len() as f64 + gamma_k,
            c_k: c_axis.iter().product(),
            c_axis,
            k,
        })
    }

    pub fn uniform(d: usize, k: f64) -> Result<Self> {
        Self::new(vec![k; d])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn gamma_k(&self) -> f64 {
        self.gamma_k
    }

    pub fn d_k(&self) -> f64 {
        self.d_k
    }

    pub fn c_k(&self) -> f64 {
        self.c_k
    }

    /// One-dimensional normalization factor of axis `i`.
    pub fn c_axis(&self, i: usize) -> f64 {
        self.c_axis[i]
    }

    /// Number of group elements, `2^d`.
    pub fn group_order(&self) -> usize {
        1 << self.d
    }

    /// Exponent `n = ⌊d_k⌋ + 2`.
    pub fn lp_exponent(&self) -> u32 {
        self.d_k.floor() as u32 + 2
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(DunklError::InvalidParameter(format!(
                "point of dimension {} in a setup of dimension {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist2(&self.center, x) < self.radius * self.radius
    }

    pub fn dilate(&self, factor: f64) -> Ball {
        Ball {
            center: self.center.clone(),
            radius: self.radius * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub truncation_radius: f64,
    pub nodes_per_axis: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            truncation_radius: 12.0,
            nodes_per_axis: 512,
        }
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `h_k(x) = Π |√2 x_i|^{2k_i}`.
pub fn weight_density(setup: &ReflectionSetup, x: &[f64]) -> f64 {
    setup
        .k
        .iter()
        .zip(x)
        .map(|(&ki, &xi)| {
            if ki == 0.0 {
                1.0
            } else {
                (2f64.sqrt() * xi.abs()).powf(2.0 * ki)
            }
        })
        .product()
}

/// Exact μ_k-measure of the slab `a <= x_axis <= b` for the one-dimensional factor.
pub fn axis_measure(setup: &ReflectionSetup, axis: usize, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let ki = setup.k[axis];
    let e = 2.0 * ki + 1.0;
    let g = |t: f64| t.signum() * t.abs().powf(e) / e;
    setup.c_axis[axis] * 2f64.powf(ki) * (g(b) - g(a))
}

/// μ_k of a finite union of balls: exact along the last axis, midpoint rule over the others.
pub fn union_measure(setup: &ReflectionSetup, balls: &[Ball], nodes_per_axis: usize) -> f64 {
    if balls.is_empty() {
        return 0.0;
    }
    let d = setup.d;
    let last = d - 1;
    if d == 1 {
        let mut iv: Vec<(f64, f64)> = balls
            .iter()
            .map(|b| (b.center[0] - b.radius, b.center[0] + b.radius))
            .collect();
        return merged_measure(setup, last, &mut iv);
    }
    let n = nodes_per_axis.max(2);
    let lo: Vec<f64> = (0..last)
        .map(|i| {
            balls
                .iter()
                .map(|b| b.center[i] - b.radius)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let hi: Vec<f64> = (0..last)
        .map(|i| {
            balls
                .iter()
                .map(|b| b.center[i] + b.radius)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let steps: Vec<f64> = (0..last).map(|i| (hi[i] - lo[i]) / n as f64).collect();
    let total = n.pow(last as u32);
    let mut sum = 0.0;
    let mut y = vec![0.0; last];
    let mut iv = Vec::with_capacity(balls.len());
    for flat in 0..total {
        let mut rem = flat;
        let mut dens = 1.0;
        for i in (0..last).rev() {
            let idx = rem % n;
            rem /= n;
            y[i] = lo[i] + (idx as f64 + 0.5) * steps[i];
            dens *= setup.c_axis[i] * (2f64.sqrt() * y[i].abs()).powf(2.0 * setup.k[i]);
        }
        iv.clear();
        for b in balls {
            let r2 = b.radius * b.radius
                - (0..last).map(|i| (y[i] - b.center[i]).powi(2)).sum::<f64>();
            if r2 > 0.0 {
                let s = r2.sqrt();
                iv.push((b.center[last] - s, b.center[last] + s));
            }
        }
        if !iv.is_empty() {
            sum += dens * merged_measure(setup, last, &mut iv);
        }
    }
    sum * steps.iter().product::<f64>()
}

fn merged_measure(setup: &ReflectionSetup, axis: usize, iv: &mut [(f64, f64)]) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let (mut cur_a, mut cur_b) = iv[0];
    for &(a, b) in iv.iter().skip(1) {
        if a > cur_b {
            total += axis_measure(setup, axis, cur_a, cur_b);
            cur_a = a;
            cur_b = b;
        } else if b > cur_b {
            cur_b = b;
        }
    }
    total + axis_measure(setup, axis, cur_a, cur_b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeReport {
    pub volume: f64,
    /// `r^d Π (|x_i| + r)^{2k_i}`.
    pub asymptotic: f64,
    pub ratio: f64,
}

/// Frozen two-sided window for `volume / asymptotic` across the calibration family.
pub const VOLUME_ASYMPTOTIC_WINDOW: (f64, f64) = (0.05, 20.0);

pub fn ball_volume(
    setup: &ReflectionSetup,
    ball: &Ball,
    spec: &QuadratureSpec,
) -> Result<VolumeReport> {
    setup.check_point(&ball.center)?;
    if !(ball.radius > 0.0) {
        return invalid("non-positive radius");
    }
    if spec.nodes_per_axis == 0 {
        return invalid("quadrature resolution must be positive");
    }
    let volume = union_measure(setup, std::slice::from_ref(ball), spec.nodes_per_axis);
    let r = ball.radius;
    let asymptotic = r.powi(setup.d as i32)
        * setup
            .k
            .iter()
            .zip(&ball.center)
            .map(|(&ki, &ci)| (ci.abs() + r).powf(2.0 * ki))
            .product::<f64>();
    Ok(VolumeReport {
        volume,
        asymptotic,
        ratio: volume / asymptotic,
    })
}

/// Fast μ_k(B(x, r)); exact for `d = 1`.
pub(crate) fn ball_measure(setup: &ReflectionSetup, center: &[f64], r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let ball = Ball {
        center: center.to_vec(),
        radius: r,
    };
    union_measure(setup, std::slice::from_ref(&ball), 256)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRatioReport {
    pub ratio: f64,
    pub lower_bound_exponent_ok: bool,
    pub upper_bound_exponent_ok: bool,
}

/// Frozen comparability constant for the two-radius volume bound; calibrated by
/// [`calibrate_volume_ratio_constant`] over the documented sample.
pub const VOLUME_RATIO_CONSTANT: f64 = 0.25;

pub fn volume_ratio_check(
    setup: &ReflectionSetup,
    x: &[f64],
    r1: f64,
    r2: f64,
) -> Result<VolumeRatioReport> {
    setup.check_point(x)?;
    if !(r1 > 0.0) || r1 >= r2 {
        return invalid(format!("need 0 < r1 < r2, got r1={r1}, r2={r2}"));
    }
    let ratio = ball_measure(setup, x, r1) / ball_measure(setup, x, r2);
    let q = r1 / r2;
    let c = VOLUME_RATIO_CONSTANT;
    Ok(VolumeRatioReport {
        ratio,
        lower_bound_exponent_ok: ratio >= c * q.powf(setup.d_k) * (1.0 - 1e-9),
        upper_bound_exponent_ok: ratio <= q.powi(setup.d as i32) / c * (1.0 + 1e-9),
    })
}

/// Largest `C` such that `C q^{d_k} <= ratio <= q^d / C` over 100 seeded configurations.
pub fn calibrate_volume_ratio_constant(setup: &ReflectionSetup, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = f64::INFINITY;
    for _ in 0..100 {
        let x: Vec<f64> = (0..setup.d).map(|_| rng.gen_range(-6.0..6.0)).collect();
        let r2 = 10f64.powf(rng.gen_range(-2.0..1.0));
        let r1 = r2 * 10f64.powf(rng.gen_range(-2.0..-0.01));
        let ratio = ball_measure(setup, &x, r1) / ball_measure(setup, &x, r2);
        let q = r1 / r2;
        c = c
            .min(ratio / q.powf(setup.d_k))
            .min(q.powi(setup.d as i32) / ratio);
    }
    c
}

/// `min_σ |σ(x) - y|` over all coordinate sign patterns.
pub fn orbit_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| {
            let m = (a.abs() - b.abs()).abs();
            m * m
        })
        .sum::<f64>()
        .sqrt()
}

pub fn sign_flip(x: &[f64], sigma: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| if sigma >> i & 1 == 1 { -v } else { v })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSet {
    pub balls: Vec<Ball>,
    pub measure: f64,
}

pub fn orbit_of_ball(setup: &ReflectionSetup, ball: &Ball, nodes_per_axis: usize) -> Result<OrbitSet> {
    setup.check_point(&ball.center)?;
    let balls = orbit_images(setup, ball);
    let measure = union_measure(setup, &balls, nodes_per_axis);
    Ok(OrbitSet { balls, measure })
}

pub(crate) fn orbit_images(setup: &ReflectionSetup, ball: &Ball) -> Vec<Ball> {
    let mut out: Vec<Ball> = Vec::new();
    for s in 0..setup.group_order() {
        let c = sign_flip(&ball.center, s);
        if !out.iter().any(|b| b.center == c) {
            out.push(Ball {
                center: c,
                radius: ball.radius,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lhs: f64,
    /// `[max_{n != s} d_G(x, y_n)]^{-eps}`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Integrates `[Σ_n μ_k(B(x, d_G(x,y_n)))]^{-1} [max_n d_G(x,y_n)]^{-eps}` over `y_s`
/// on `[-R, R]^d` and compares against `[max_{n≠s} d_G(x,y_n)]^{-eps}`.
pub fn volume_integral_lemma_check(
    setup: &ReflectionSetup,
    x: &[f64],
    partners: &[Vec<f64>],
    s: usize,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<LemmaReport> {
    setup.check_point(x)?;
    if partners.len() < 2 {
        return invalid("need at least two points");
    }
    if s >= partners.len() {
        return invalid("index s out of range");
    }
    if !(eps > 0.0) {
        return invalid("eps must be positive");
    }
    for p in partners {
        setup.check_point(p)?;
    }
    let others: Vec<f64> = partners
        .iter()
        .enumerate()
        .filter(|(n, _)| *n != s)
        .map(|(_, p)| orbit_distance(x, p))
        .collect();
    let t = others.iter().cloned().fold(0.0, f64::max);
    if t <= 0.0 {
        return Err(DunklError::Degenerate(
            "all partner points lie in the orbit of x".into(),
        ));
    }
    let fixed_volume: f64 = others.iter().map(|&r| ball_measure(setup, x, r)).sum();
    let rr = spec.truncation_radius;
    let n = spec.nodes_per_axis.max(2);
    let h = 2.0 * rr / n as f64;
    let d = setup.d;
    let table = RadialVolumeTable::new(setup, x, h * 0.25, 2.0 * rr * (d as f64).sqrt() + norm(x));
    let total = n.pow(d as u32);
    let mut lhs = 0.0;
    let mut y = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for i in (0..d).rev() {
            y[i] = -rr + ((rem % n) as f64 + 0.5) * h;
            rem /= n;
            w *= setup.c_axis[i] * (2f64.sqrt() * y[i].abs()).powf(2.0 * setup.k[i]) * h;
        }
        let ds = orbit_distance(x, &y);
        let vol = fixed_volume + table.eval(ds);
        lhs += w / vol * ds.max(t).powf(-eps);
    }
    let rhs = t.powf(-eps);
    Ok(LemmaReport {
        lhs,
        rhs,
        ratio: lhs / rhs,
    })
}

/// μ_k(B(x, ρ)) as a function of ρ: exact in one dimension, log-log interpolated otherwise.
struct RadialVolumeTable {
    exact: Option<(ReflectionSetup, Vec<f64>)>,
    log_r: Vec<f64>,
    log_v: Vec<f64>,
}

impl RadialVolumeTable {
    fn new(setup: &ReflectionSetup, x: &[f64], rmin: f64, rmax: f64) -> Self {
        if setup.d == 1 {
            return Self {
                exact: Some((setup.clone(), x.to_vec())),
                log_r: vec![],
                log_v: vec![],
            };
        }
        let m = 240;
        let (a, b) = (rmin.ln(), rmax.ln());
        let log_r: Vec<f64> = (0..m).map(|i| a + (b - a) * i as f64 / (m - 1) as f64).collect();
        let log_v = log_r
            .iter()
            .map(|&lr| ball_measure(setup, x, lr.exp()).ln())
            .collect();
        Self {
            exact: None,
            log_r,
            log_v,
        }
    }

    fn eval(&self, r: f64) -> f64 {
        if let Some((s, x)) = &self.exact {
            return ball_measure(s, x, r);
        }
        if r <= 0.0 {
            return 0.0;
        }
        let lr = r.ln();
        let m = self.log_r.len();
        let step = self.log_r[1] - self.log_r[0];
        let pos = ((lr - self.log_r[0]) / step).clamp(0.0, (m - 1) as f64 - 1e-9);
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        if lr < self.log_r[0] {
            // small-ball regime: extrapolate with the local exponent
            let slope = (self.log_v[1] - self.log_v[0]) / step;
            return (self.log_v[0] + slope * (lr - self.log_r[0])).exp();
        }
        (self.log_v[i] * (1.0 - f) + self.log_v[i + 1] * f).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn setup_derived_quantities() {
        let s = ReflectionSetup::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(s.d_k(), 2.0);
        assert!((s.c_k() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let s = ReflectionSetup::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(s.gamma_k(), 3.0);
        assert_eq!(s.d_k(), 5.0);
        assert_eq!(s.lp_exponent(), 7);
        assert!(ReflectionSetup::new(vec![-0.1]).is_err());
        assert!(ReflectionSetup::new(vec![]).is_err());
    }

    #[test]
    fn normalization_matches_quadrature() {
        for &k in &[0.0, 0.3, 0.5, 1.0, 2.5] {
            let s = ReflectionSetup::uniform(1, k).unwrap();
            // substitute x = u^2 style clustering: plain fine midpoint on [0, 40]
            let n = 400_000;
            let h = 40.0 / n as f64;
            let integral: f64 = 2.0
                * (0..n)
                    .map(|i| {
                        let x = (i as f64 + 0.5) * h;
                        (-x * x / 2.0).exp() * (2f64.sqrt() * x).powf(2.0 * k)
                    })
                    .sum::<f64>()
                * h;
            let tol = if k < 0.5 { 1e-4 } else { 1e-8 };
            assert!((1.0 / s.c_k() - integral).abs() / integral < tol, "k={k}");
        }
    }

    #[test]
    fn density_examples() {
        let s = ReflectionSetup::uniform(3, 0.0).unwrap();
        assert_eq!(weight_density(&s, &[1.0, -2.0, 7.0]), 1.0);
        let s = ReflectionSetup::uniform(1, 1.0).unwrap();
        assert!((weight_density(&s, &[1.0]) - 2.0).abs() < 1e-15);
        let s = ReflectionSetup::new(vec![0.5, 1.0]).unwrap();
        let want = (2f64.sqrt() * 1.0).powf(1.0) * (2f64.sqrt() * 2.0).powf(2.0);
        assert!((weight_density(&s, &[1.0, 2.0]) - want).abs() < 1e-12);
        assert_eq!(weight_density(&s, &[-1.0, 2.0]), weight_density(&s, &[1.0, -2.0]));
    }

    #[test]
    fn ball_volume_examples() {
        let spec = QuadratureSpec::default();
        let s0 = ReflectionSetup::uniform(1, 0.0).unwrap();
        let v = ball_volume(&s0, &Ball::new(vec![0.0], 1.0).unwrap(), &spec).unwrap();
        assert!((v.volume - 2.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        let s1 = ReflectionSetup::uniform(1, 1.0).unwrap();
        let v = ball_volume(&s1, &Ball::new(vec![0.0], 1.0).unwrap(), &spec).unwrap();
        let n = 1_000_000;
        let h = 2.0 / n as f64;
        let oracle: f64 = s1.c_k()
            * (0..n)
                .map(|i| {
                    let t = -1.0 + (i as f64 + 0.5) * h;
                    2.0 * t * t
                })
                .sum::<f64>()
            * h;
        assert!((v.volume - oracle).abs() < 1e-8);
        assert!(Ball::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn two_dimensional_volume_matches_polar_oracle() {
        // k=0: area π r^2 / (2π)
        let s = ReflectionSetup::uniform(2, 0.0).unwrap();
        let v = ball_volume(&s, &Ball::new(vec![0.3, -0.2], 1.5).unwrap(), &QuadratureSpec::default())
            .unwrap();
        let want = PI * 1.5 * 1.5 / (2.0 * PI);
        assert!((v.volume - want).abs() / want < 1e-4);
        // origin-centred, k=(1,1): homogeneity r^{d_k}
        let s = ReflectionSetup::uniform(2, 1.0).unwrap();
        let a = ball_measure(&s, &[0.0, 0.0], 1.0);
        let b = ball_measure(&s, &[0.0, 0.0], 2.0);
        assert!((b / a - 2f64.powf(6.0)).abs() / 64.0 < 1e-4);
    }

    #[test]
    fn volume_ratio_examples() {
        let s0 = ReflectionSetup::uniform(1, 0.0).unwrap();
        let r = volume_ratio_check(&s0, &[2.0], 0.5, 2.0).unwrap();
        assert!((r.ratio - 0.25).abs() < 1e-13);
        let s = ReflectionSetup::uniform(1, 1.5).unwrap();
        let r = volume_ratio_check(&s, &[0.0], 0.5, 2.0).unwrap();
        assert!((r.ratio - 0.25f64.powf(4.0)).abs() < 1e-13);
        let r = volume_ratio_check(&s, &[3.0], 0.1, 1.0).unwrap();
        assert!(r.lower_bound_exponent_ok && r.upper_bound_exponent_ok);
        assert!(volume_ratio_check(&s, &[3.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn frozen_ratio_constant_covers_calibration() {
        for &k in &[0.0, 0.25, 0.5, 1.0, 2.5] {
            let s = ReflectionSetup::uniform(1, k).unwrap();
            let c = calibrate_volume_ratio_constant(&s, 7);
            assert!(c >= VOLUME_RATIO_CONSTANT, "k={k}: calibrated {c}");
        }
        let s = ReflectionSetup::new(vec![0.5, 1.0]).unwrap();
        assert!(calibrate_volume_ratio_constant(&s, 7) >= VOLUME_RATIO_CONSTANT);
    }

    #[test]
    fn orbit_distance_examples() {
        assert_eq!(orbit_distance(&[1.5], &[1.5]), 0.0);
        assert_eq!(orbit_distance(&[1.0], &[-1.0]), 0.0);
        assert!((orbit_distance(&[1.0, 2.0], &[-1.0, 3.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn orbit_examples() {
        let s = ReflectionSetup::uniform(1, 1.0).unwrap();
        let b = Ball::new(vec![0.0], 0.7).unwrap();
        let o = orbit_of_ball(&s, &b, 128).unwrap();
        assert_eq!(o.balls.len(), 1);
        assert!((o.measure - ball_measure(&s, &[0.0], 0.7)).abs() < 1e-15);
        let b = Ball::new(vec![5.0], 0.1).unwrap();
        let o = orbit_of_ball(&s, &b, 128).unwrap();
        let m = ball_measure(&s, &[5.0], 0.1);
        assert!(o.measure >= m && o.measure <= 2.0 * m + 1e-15);
        let s0 = ReflectionSetup::uniform(1, 0.0).unwrap();
        let b = Ball::new(vec![0.05], 0.1).unwrap();
        let o = orbit_of_ball(&s0, &b, 128).unwrap();
        assert!(o.measure < 2.0 * ball_measure(&s0, &[0.05], 0.1));
    }

    #[test]
    fn lemma_check_is_stable_and_homogeneous() {
        let s = ReflectionSetup::uniform(1, 0.0).unwrap();
        let pts = vec![vec![0.0], vec![1.0]];
        let a = volume_integral_lemma_check(
            &s,
            &[0.0],
            &pts,
            0,
            1.0,
            &QuadratureSpec { truncation_radius: 200.0, nodes_per_axis: 200_000 },
        )
        .unwrap();
        let b = volume_integral_lemma_check(
            &s,
            &[0.0],
            &pts,
            0,
            1.0,
            &QuadratureSpec { truncation_radius: 400.0, nodes_per_axis: 400_000 },
        )
        .unwrap();
        assert!(a.ratio.is_finite());
        assert!((a.ratio - b.ratio).abs() / b.ratio < 0.05);
        let pts2 = vec![vec![0.0], vec![2.0]];
        let c = volume_integral_lemma_check(
            &s,
            &[0.0],
            &pts2,
            0,
            1.0,
            &QuadratureSpec { truncation_radius: 200.0, nodes_per_axis: 200_000 },
        )
        .unwrap();
        assert!((c.rhs / a.rhs - 0.5).abs() < 1e-15);
        let dup = volume_integral_lemma_check(
            &s,
            &[0.0],
            &[vec![0.0], vec![1.0], vec![1.0]],
            0,
            1.0,
            &QuadratureSpec { truncation_radius: 200.0, nodes_per_axis: 200_000 },
        )
        .unwrap();
        assert!(dup.ratio <= a.ratio && dup.ratio >= 0.25 * a.ratio);
        assert!(volume_integral_lemma_check(
            &s,
            &[1.0],
            &[vec![0.0], vec![-1.0]],
            0,
            1.0,
            &QuadratureSpec::default()
        )
        .is_err());
    }
}
