//! Multilinear Hardy-Littlewood and sharp maximal functions over finite ball
//! families, Muckenhoupt-type constants and weighted norm probes.
//!
//! Every supremum over balls is taken over a finite [`BallFamily`] laid out on
//! a quadrature grid, so all values are lower bounds for the true quantities.

use crate::bilinear::{BilinearSymbol, DirectPlan};
use crate::error::{invalid, DunklError, Result};
use crate::geometry::{dist2, sign_flip, Ball};
use crate::grid::{Grid, GridFunction, Side};
use crate::transform::Transform;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

type C64 = Complex64;
type WeightFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Denominators below this are masked out of pointwise ratios.
pub const DIVISION_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    /// `|x|^a`.
    Power(f64),
    /// `Π |x_i|^{a_i}`.
    Product(Vec<f64>),
    Custom,
}

/// A nonnegative weight `w(x)`.
#[derive(Clone)]
pub struct WeightSpec {
    kind: WeightKind,
    invariant: bool,
    f: Arc<WeightFn>,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("kind", &self.kind)
            .field("invariant", &self.invariant)
            .finish()
    }
}

impl WeightSpec {
    pub fn power(a: f64) -> Self {
        Self {
            kind: WeightKind::Power(a),
            invariant: true,
            f: Arc::new(move |x| {
                if a == 0.0 {
                    1.0
                } else {
                    x.iter().map(|v| v * v).sum::<f64>().sqrt().powf(a)
                }
            }),
        }
    }

    pub fn product(a: Vec<f64>) -> Self {
        let e = a.clone();
        Self {
            kind: WeightKind::Product(a),
            invariant: true,
            f: Arc::new(move |x| {
                x.iter()
                    .zip(&e)
                    .map(|(v, &p)| if p == 0.0 { 1.0 } else { v.abs().powf(p) })
                    .product()
            }),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::custom(true, move |_| c)
    }

    pub fn custom(invariant: bool, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            kind: WeightKind::Custom,
            invariant,
            f: Arc::new(f),
        }
    }

    /// `c·w`.
    pub fn scaled(&self, c: f64) -> Self {
        let f = self.f.clone();
        Self {
            kind: WeightKind::Custom,
            invariant: self.invariant,
            f: Arc::new(move |x| c * f(x)),
        }
    }

    /// `Π w_j^{e_j}`.
    pub fn combine(parts: &[(WeightSpec, f64)]) -> Self {
        let parts: Vec<(Arc<WeightFn>, f64)> = parts.iter().map(|(w, e)| (w.f.clone(), *e)).collect();
        let invariant = true;
        Self::custom(invariant, move |x| parts.iter().map(|(f, e)| f(x).powf(*e)).product())
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// Values on the grid nodes; rejects negative or non-finite values and,
    /// for flagged weights, any asymmetry under the sign flips.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        let vals: Vec<f64> = (0..grid.len()).map(|i| self.eval(&grid.point(i))).collect();
        if let Some(i) = vals.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(DunklError::InvalidParameter(format!(
                "weight is {} at {:?}",
                vals[i],
                grid.point(i)
            )));
        }
        if self.invariant {
            let g = 1usize << grid.dim();
            for (i, &v) in vals.iter().enumerate() {
                let x = grid.point(i);
                for s in 1..g {
                    let u = self.eval(&sign_flip(&x, s));
                    if (u - v).abs() > 1e-12 * v.abs().max(u.abs()) {
                        return Err(DunklError::Hypothesis(format!(
                            "weight flagged invariant differs under reflection at {:?}",
                            grid.point(i)
                        )));
                    }
                }
            }
        }
        Ok(vals)
    }

    /// `∫_{|x|<1} w dμ_k` by the grid quadrature.
    pub fn unit_ball_mass(&self, grid: &Grid) -> f64 {
        let q = grid.weights();
        (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                if x.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                    self.eval(&x) * q[i]
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Default centre density: spacing `r/8` at radius `r`.
pub const DEFAULT_LEVEL: u32 = 4;

#[derive(Debug, Clone)]
struct FamilyBall {
    ball: Ball,
    nodes: Vec<u32>,
    mass: f64,
}

/// Finite ball family on a quadrature grid: dyadic radii `r_max·2^{-i}` down to
/// `r_min`, centres on the lattice of spacing `r/(2s)`, `s` the refinement level.
#[derive(Debug, Clone)]
pub struct BallFamily {
    grid: Arc<Grid>,
    r_min: f64,
    r_max: f64,
    level: u32,
    radii: Vec<f64>,
    balls: Vec<FamilyBall>,
}

impl BallFamily {
    /// Family at [`DEFAULT_LEVEL`].
    pub fn lattice(grid: Arc<Grid>, r_min: f64, r_max: f64) -> Result<Self> {
        Self::with_level(grid, r_min, r_max, DEFAULT_LEVEL)
    }

    pub fn with_level(grid: Arc<Grid>, r_min: f64, r_max: f64, level: u32) -> Result<Self> {
        if !(r_min > 0.0) || !(r_max >= r_min) || !r_max.is_finite() || level == 0 {
            return invalid(format!("bad ball family radii [{r_min}, {r_max}] at level {level}"));
        }
        let s = level as f64;
        let mut radii = Vec::new();
        let mut i = 0;
        loop {
            let r = r_max * 2f64.powi(-i);
            if r < r_min * (1.0 - 1e-12) {
                break;
            }
            radii.push(r);
            i += 1;
        }
        let d = grid.dim();
        let extent: Vec<f64> = grid.axes().iter().map(|a| a.radius).collect();
        let mut balls = Vec::new();
        for &r in &radii {
            let step = r / (2.0 * s);
            let counts: Vec<i64> = extent.iter().map(|e| (e / step).floor() as i64).collect();
            let total: i64 = counts.iter().map(|c| 2 * c + 1).product();
            let mut c = vec![0.0; d];
            for flat in 0..total {
                let mut rem = flat;
                for i in (0..d).rev() {
                    let w = 2 * counts[i] + 1;
                    c[i] = ((rem % w) - counts[i]) as f64 * step;
                    rem /= w;
                }
                let ball = Ball::new(c.clone(), r)?;
                let nodes = nodes_in_ball(&grid, &ball);
                if nodes.is_empty() {
                    continue;
                }
                let q = grid.weights();
                let mass = nodes.iter().map(|&i| q[i as usize]).sum();
                balls.push(FamilyBall { ball, nodes, mass });
            }
        }
        if balls.is_empty() {
            return Err(DunklError::Degenerate("ball family contains no grid node".into()));
        }
        Ok(Self {
            grid,
            r_min,
            r_max,
            level,
            radii,
            balls,
        })
    }

    /// Twice as dense centres at every radius; contains `self`.
    pub fn refined(&self) -> Result<Self> {
        Self::with_level(self.grid.clone(), self.r_min, self.r_max, self.level * 2)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn balls(&self) -> impl Iterator<Item = &Ball> {
        self.balls.iter().map(|b| &b.ball)
    }

    /// Whether every node lies in some family ball of every radius.
    pub fn covers_grid(&self) -> bool {
        for &r in &self.radii {
            let mut hit = vec![false; self.grid.len()];
            for b in self.balls.iter().filter(|b| b.ball.radius == r) {
                for &i in &b.nodes {
                    hit[i as usize] = true;
                }
            }
            if hit.iter().any(|h| !h) {
                return false;
            }
        }
        true
    }

    fn average(&self, b: &FamilyBall, v: &[f64]) -> f64 {
        let q = self.grid.weights();
        b.nodes.iter().map(|&i| v[i as usize] * q[i as usize]).sum::<f64>() / b.mass
    }

    fn infimum(&self, b: &FamilyBall, v: &[f64]) -> f64 {
        b.nodes.iter().map(|&i| v[i as usize]).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise supremum over the balls containing each node of per-ball values.
    fn scatter_max(&self, per_ball: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0f64; self.grid.len()];
        for (b, &v) in self.balls.iter().zip(per_ball) {
            for &i in &b.nodes {
                let o = &mut out[i as usize];
                if v > *o {
                    *o = v;
                }
            }
        }
        out
    }

    fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(&f.grid, &self.grid) && !f.grid.compatible(&self.grid) {
            return Err(DunklError::GridMismatch("function not on the ball family's grid".into()));
        }
        Ok(())
    }
}

fn nodes_in_ball(grid: &Grid, ball: &Ball) -> Vec<u32> {
    let d = grid.dim();
    let ranges: Vec<(usize, usize)> = (0..d)
        .map(|i| {
            let nodes = &grid.axis(i).nodes;
            let lo = nodes.partition_point(|&x| x <= ball.center[i] - ball.radius);
            let hi = nodes.partition_point(|&x| x < ball.center[i] + ball.radius);
            (lo, hi)
        })
        .collect();
    if ranges.iter().any(|(a, b)| a >= b) {
        return Vec::new();
    }
    let shape = grid.shape();
    let r2 = ball.radius * ball.radius;
    let mut out = Vec::new();
    let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
    let mut p = vec![0.0; d];
    loop {
        let mut flat = 0;
        for i in 0..d {
            p[i] = grid.axis(i).nodes[idx[i]];
            flat = flat * shape[i] + idx[i];
        }
        if dist2(&p, &ball.center) < r2 {
            out.push(flat as u32);
        }
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < ranges[i].1 {
                break;
            }
            idx[i] = ranges[i].0;
        }
    }
}

fn real_output(grid: &Arc<Grid>, v: Vec<f64>) -> Result<GridFunction> {
    GridFunction::new(
        grid.clone(),
        v.into_iter().map(|x| C64::new(x, 0.0)).collect(),
        Side::Space,
    )
}

/// `sup_{B ∋ x} Π_j avg_B |f_j|`; with one input this is the Hardy-Littlewood maximal function.
pub fn maximal(fs: &[&GridFunction], family: &BallFamily) -> Result<GridFunction> {
    if fs.is_empty() {
        return invalid("maximal function needs at least one input");
    }
    for f in fs {
        family.check_grid(f)?;
    }
    let abs: Vec<Vec<f64>> = fs.iter().map(|f| f.abs()).collect();
    let per_ball: Vec<f64> = family
        .balls
        .par_iter()
        .map(|b| abs.iter().map(|a| family.average(b, a)).product())
        .collect();
    real_output(&family.grid, family.scatter_max(&per_ball))
}

/// `(sup_{B ∋ x} avg_B | |f|^ε - avg_B |f|^ε |)^{1/ε}`.
pub fn sharp_maximal(f: &GridFunction, eps: f64, family: &BallFamily) -> Result<GridFunction> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("sharp maximal exponent must lie in (0, 1], got {eps}"));
    }
    family.check_grid(f)?;
    let g: Vec<f64> = f.abs().iter().map(|v| v.powf(eps)).collect();
    let q = family.grid.weights();
    let per_ball: Vec<f64> = family
        .balls
        .par_iter()
        .map(|b| {
            let a = family.average(b, &g);
            b.nodes
                .iter()
                .map(|&i| (g[i as usize] - a).abs() * q[i as usize])
                .sum::<f64>()
                / b.mass
        })
        .collect();
    let m = family.scatter_max(&per_ball);
    real_output(&family.grid, m.into_iter().map(|v| v.powf(1.0 / eps)).collect())
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Finite-family `A_p` constant `max_B avg w · (avg w^{1-p'})^{p-1}`, or
/// `max_B avg w / inf_B w` for `p = 1`.
pub fn ap_constant(w: &WeightSpec, p: f64, family: &BallFamily) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return invalid(format!("A_p needs p >= 1, got {p}"));
    }
    let wv = w.sample(&family.grid)?;
    if p == 1.0 {
        return max_over(family, |b| {
            let inf = family.infimum(b, &wv);
            let avg = family.average(b, &wv);
            if avg == 0.0 {
                return Err(DunklError::Degenerate(format!(
                    "weight vanishes on the ball {:?}",
                    b.ball
                )));
            }
            Ok(avg / inf)
        });
    }
    let e = 1.0 - conjugate(p);
    let dual: Vec<f64> = wv.iter().map(|v| v.powf(e)).collect();
    max_over(family, |b| {
        Ok(family.average(b, &wv) * family.average(b, &dual).powf(p - 1.0))
    })
}

fn max_over(family: &BallFamily, f: impl Fn(&FamilyBall) -> Result<f64> + Sync + Send) -> Result<f64> {
    let vals: Result<Vec<f64>> = family.balls.par_iter().map(f).collect();
    Ok(vals?.into_iter().fold(0.0, |a, v| if v.is_nan() { f64::INFINITY } else { a.max(v) }))
}

/// `1/p = Σ 1/p_j`.
pub fn joint_exponent(ps: &[f64]) -> Result<f64> {
    if ps.is_empty() || ps.iter().any(|p| !(*p >= 1.0) || !p.is_finite()) {
        return invalid(format!("exponents must be finite and at least 1, got {ps:?}"));
    }
    Ok(1.0 / ps.iter().map(|p| 1.0 / p).sum::<f64>())
}

fn check_vector(ws: &[WeightSpec], ps: &[f64]) -> Result<f64> {
    if ws.len() != ps.len() {
        return invalid(format!("{} weights for {} exponents", ws.len(), ps.len()));
    }
    joint_exponent(ps)
}

/// `max_B (avg v)^{1/p} Π_j (avg w_j^{1-p_j'})^{1/p_j'}`, `(inf_B w_j)^{-1}` when `p_j = 1`.
pub fn multi_ap_constant(v: &WeightSpec, ws: &[WeightSpec], ps: &[f64], family: &BallFamily) -> Result<f64> {
    let p = check_vector(ws, ps)?;
    let vv = v.sample(&family.grid)?;
    let factors: Vec<(Vec<f64>, f64)> = ws
        .iter()
        .zip(ps)
        .map(|(w, &pj)| {
            let s = w.sample(&family.grid)?;
            if pj == 1.0 {
                Ok((s, 1.0))
            } else {
                let pc = conjugate(pj);
                Ok((s.iter().map(|x| x.powf(1.0 - pc)).collect(), pc))
            }
        })
        .collect::<Result<_>>()?;
    max_over(family, |b| {
        let mut c = family.average(b, &vv).powf(1.0 / p);
        for ((vals, pc), &pj) in factors.iter().zip(ps) {
            c *= if pj == 1.0 {
                1.0 / family.infimum(b, vals)
            } else {
                family.average(b, vals).powf(1.0 / pc)
            };
        }
        Ok(c)
    })
}

/// `max_B (avg v)^{1/p} Π_j (avg w_j^{-t p_j'/p_j})^{1/(t p_j')}`.
pub fn bump_constant(
    v: &WeightSpec,
    ws: &[WeightSpec],
    ps: &[f64],
    t: f64,
    family: &BallFamily,
) -> Result<f64> {
    if !(t > 1.0) || !t.is_finite() {
        return invalid(format!("bump parameter must exceed 1, got {t}"));
    }
    let p = check_vector(ws, ps)?;
    if ps.iter().any(|&pj| pj <= 1.0) {
        return invalid("bump condition needs every p_j > 1");
    }
    let vv = v.sample(&family.grid)?;
    let factors: Vec<(Vec<f64>, f64)> = ws
        .iter()
        .zip(ps)
        .map(|(w, &pj)| {
            let pc = conjugate(pj);
            let e = -t * pc / pj;
            Ok((w.sample(&family.grid)?.iter().map(|x| x.powf(e)).collect(), t * pc))
        })
        .collect::<Result<_>>()?;
    max_over(family, |b| {
        let mut c = family.average(b, &vv).powf(1.0 / p);
        for (vals, e) in &factors {
            c *= family.average(b, vals).powf(1.0 / e);
        }
        Ok(c)
    })
}

/// Smallest `p` in `1, 2, 4, 8, 16` with a finite `A_p` constant below `cap`.
pub fn a_infinity_proxy(w: &WeightSpec, family: &BallFamily, cap: f64) -> Result<Option<(f64, f64)>> {
    for p in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let c = ap_constant(w, p, family)?;
        if c.is_finite() && c < cap {
            return Ok(Some((p, c)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowUpReport {
    pub coarse: f64,
    pub fine: f64,
    pub growth: f64,
    pub fired: bool,
}

/// Growth threshold of the blow-up detector.
pub const BLOW_UP_GROWTH: f64 = 10.0;

/// Compares `ap_constant` on families with smallest radius `r_min` and
/// `r_min/shrink`, each on a grid whose spacing is `r_min/nodes_per_rmin`.
pub fn blow_up_detector(
    setup: &crate::geometry::ReflectionSetup,
    w: &WeightSpec,
    p: f64,
    r_min: f64,
    r_max: f64,
    shrink: f64,
) -> Result<BlowUpReport> {
    let value = |r: f64| -> Result<f64> {
        let radius = 2.0 * r_max;
        let n = ((2.0 * radius / r * 2.0).round() as usize + 1) & !1;
        let g = Grid::new(setup, radius, n)?;
        ap_constant(w, p, &BallFamily::lattice(g, r, r_max)?)
    };
    let coarse = value(r_min)?;
    let fine = value(r_min / shrink)?;
    let growth = fine / coarse;
    Ok(BlowUpReport {
        coarse,
        fine,
        growth,
        fired: !(growth < BLOW_UP_GROWTH),
    })
}

/// `(Σ |f|^p w q)^{1/p}`.
pub fn weighted_norm(f: &GridFunction, w: &WeightSpec, p: f64) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return invalid(format!("norm exponent must be positive, got {p}"));
    }
    let wv = w.sample(&f.grid)?;
    let q = f.grid.weights();
    let s: f64 = f
        .values
        .iter()
        .zip(wv.iter().zip(q))
        .map(|(v, (w, q))| v.norm().powf(p) * w * q)
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `max_t t · (Σ_{|f|>t} w q)^{1/p}` over `t_grid`.
pub fn weak_norm(f: &GridFunction, w: &WeightSpec, p: f64, t_grid: &[f64]) -> Result<f64> {
    if !(p > 0.0) || !p.is_finite() {
        return invalid(format!("norm exponent must be positive, got {p}"));
    }
    if t_grid.is_empty() {
        return invalid("weak norm needs a nonempty level grid");
    }
    let wv = w.sample(&f.grid)?;
    let q = f.grid.weights();
    let mut pairs: Vec<(f64, f64)> = f
        .values
        .iter()
        .zip(wv.iter().zip(q))
        .map(|(v, (w, q))| (v.norm(), w * q))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut ts: Vec<f64> = t_grid.to_vec();
    ts.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut k = 0;
    let mut best = 0.0f64;
    for t in ts {
        while k < pairs.len() && pairs[k].0 > t {
            acc += pairs[k].1;
            k += 1;
        }
        best = best.max(t * acc.powf(1.0 / p));
    }
    Ok(best)
}

/// `count` levels spaced logarithmically over `[1e-6, 1e6]·scale`.
pub fn log_levels(scale: f64, count: usize) -> Vec<f64> {
    let n = count.max(2);
    (0..n)
        .map(|i| scale * 10f64.powf(-6.0 + 12.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// Default weak-norm level grid for `f`.
pub fn default_levels(f: &GridFunction) -> Vec<f64> {
    log_levels(f.sup_norm().max(f64::MIN_POSITIVE), 2401)
}

fn reflected(f: &GridFunction, sigma: usize) -> GridFunction {
    let vals = (0..f.len()).map(|i| f.values[f.grid.reflect_index(i, sigma)]).collect();
    GridFunction {
        grid: f.grid.clone(),
        values: vals,
        side: f.side,
    }
}

/// Points whose denominator falls below this fraction of its peak are masked:
/// there the numerator is the rounding floor of the bilinear apply.
pub const SHARP_RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SharpDominationReport {
    pub max_ratio: f64,
    pub argmax: Vec<f64>,
    pub masked: usize,
    pub ratios: Vec<f64>,
}

/// Pointwise `M^#_ν(T_m(f1,f2)) / Σ_{σ1,σ2} M(f1∘σ1, f2∘σ2)` on the family's grid.
pub fn sharp_domination_probe(
    t: &Transform,
    m: &BilinearSymbol,
    f1: &GridFunction,
    f2: &GridFunction,
    nu: f64,
    family: &BallFamily,
) -> Result<SharpDominationReport> {
    if !(nu > 0.0 && nu < 0.5) {
        return invalid(format!("nu must lie in (0, 1/2), got {nu}"));
    }
    let out = DirectPlan::new(t, m)?.apply(t, f1, f2)?;
    sharp_domination_from(&out, f1, f2, nu, family)
}

/// As [`sharp_domination_probe`] with `T_m(f1,f2)` already computed.
pub fn sharp_domination_from(
    out: &GridFunction,
    f1: &GridFunction,
    f2: &GridFunction,
    nu: f64,
    family: &BallFamily,
) -> Result<SharpDominationReport> {
    let num = sharp_maximal(out, nu, family)?;
    let g = 1usize << f1.grid.dim();
    let mut den = vec![0.0; f1.len()];
    for s1 in 0..g {
        let a = reflected(f1, s1);
        for s2 in 0..g {
            let b = reflected(f2, s2);
            let m = maximal(&[&a, &b], family)?;
            for (d, v) in den.iter_mut().zip(&m.values) {
                *d += v.re;
            }
        }
    }
    let floor = DIVISION_FLOOR.max(SHARP_RELATIVE_FLOOR * den.iter().cloned().fold(0.0, f64::max));
    let mut ratios = vec![f64::NAN; den.len()];
    let mut masked = 0;
    let mut best = (0.0f64, 0usize);
    for (i, (&dv, nv)) in den.iter().zip(&num.values).enumerate() {
        if dv < floor {
            masked += 1;
            continue;
        }
        let r = nv.re / dv;
        ratios[i] = r;
        if r > best.0 {
            best = (r, i);
        }
    }
    Ok(SharpDominationReport {
        max_ratio: best.0,
        argmax: if masked == den.len() { Vec::new() } else { f1.grid.point(best.1) },
        masked,
        ratios,
    })
}

/// Weights and exponents for a bilinear weighted inequality.
#[derive(Debug, Clone)]
pub struct WeightConfig {
    pub v: WeightSpec,
    pub w: [WeightSpec; 2],
    pub p: [f64; 2],
}

impl WeightConfig {
    /// One-weight form `v = Π w_j^{p/p_j}`.
    pub fn one_weight(w: [WeightSpec; 2], p: [f64; 2]) -> Result<Self> {
        let pp = joint_exponent(&p)?;
        let v = WeightSpec::combine(&[(w[0].clone(), pp / p[0]), (w[1].clone(), pp / p[1])]);
        Ok(Self { v, w, p })
    }

    pub fn is_weak(&self) -> bool {
        self.p.contains(&1.0)
    }

    pub fn target_exponent(&self) -> f64 {
        joint_exponent(&self.p).expect("validated exponents")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRow {
    pub pair: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedProbeReport {
    pub weak: bool,
    pub class_constant: f64,
    pub rows: Vec<WeightedRow>,
    pub max_ratio: f64,
}

/// Largest class constant accepted as finite by the probes.
pub const CLASS_CAP: f64 = 1e6;

/// `‖T_m(f1,f2)‖_{L^p(v)} / Π ‖f_j‖_{L^{p_j}(w_j)}`, with the weak norm on the
/// left when some `p_j = 1`. Refuses configurations failing the class check.
pub fn weighted_inequality_probe(
    t: &Transform,
    m: &BilinearSymbol,
    cfg: &WeightConfig,
    pairs: &[(GridFunction, GridFunction)],
    family: &BallFamily,
) -> Result<WeightedProbeReport> {
    let class_constant = multi_ap_constant(&cfg.v, &cfg.w, &cfg.p, family)?;
    if !(class_constant.is_finite() && class_constant < CLASS_CAP) {
        return Err(DunklError::Hypothesis(format!(
            "weights fail the multiple A_p check (constant {class_constant})"
        )));
    }
    let plan = DirectPlan::new(t, m)?;
    let p = cfg.target_exponent();
    let weak = cfg.is_weak();
    let mut rows = Vec::with_capacity(pairs.len());
    for (n, (f1, f2)) in pairs.iter().enumerate() {
        let out = plan.apply(t, f1, f2)?;
        let lhs = if weak {
            weak_norm(&out, &cfg.v, p, &default_levels(&out))?
        } else {
            weighted_norm(&out, &cfg.v, p)?
        };
        let rhs = weighted_norm(f1, &cfg.w[0], cfg.p[0])? * weighted_norm(f2, &cfg.w[1], cfg.p[1])?;
        if !(rhs > 0.0) {
            return Err(DunklError::Degenerate(format!("test pair {n} has zero weighted norm")));
        }
        rows.push(WeightedRow {
            pair: n,
            lhs,
            rhs,
            ratio: lhs / rhs,
        });
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(WeightedProbeReport {
        weak,
        class_constant,
        rows,
        max_ratio,
    })
}

impl WeightedProbeReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pair", "kind", "lhs", "rhs", "ratio"])?;
        let kind = if self.weak { "weak" } else { "strong" };
        for r in &self.rows {
            w.write_record([
                r.pair.to_string(),
                kind.to_string(),
                format!("{:.12e}", r.lhs),
                format!("{:.12e}", r.rhs),
                format!("{:.12e}", r.ratio),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl SharpDominationReport {
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = grid.dim();
        let mut head: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        head.push("ratio".into());
        w.write_record(&head)?;
        for (i, r) in self.ratios.iter().enumerate() {
            let mut row: Vec<String> = grid.point(i).iter().map(|v| format!("{v:.12e}")).collect();
            row.push(if r.is_nan() { "masked".into() } else { format!("{r:.12e}") });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pairs `f1 = e^{-a|x-c|²} cos(ω·x)`, `f2 = e^{-b|x+c'|²}` with seeded parameters.
pub fn gaussian_test_pairs(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<(GridFunction, GridFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    (0..count)
        .map(|_| {
            let a = rng.gen_range(0.4..1.5);
            let b = rng.gen_range(0.4..1.5);
            let c1: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let c2: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let om: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..3.0)).collect();
            let f1 = GridFunction::from_real(grid.clone(), Side::Space, |x| {
                let r2 = dist2(x, &c1);
                let ph: f64 = x.iter().zip(&om).map(|(p, q)| p * q).sum();
                (-a * r2).exp() * ph.cos()
            });
            let f2 = GridFunction::from_real(grid.clone(), Side::Space, |x| (-b * dist2(x, &c2)).exp());
            (f1, f2)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_measure, ReflectionSetup};

    fn grid(k: f64, r: f64, n: usize) -> Arc<Grid> {
        Grid::new(&ReflectionSetup::uniform(1, k).unwrap(), r, n).unwrap()
    }

    #[test]
    fn constants_are_fixed_by_maximal() {
        let g = grid(1.0, 4.0, 128);
        let fam = BallFamily::lattice(g.clone(), 0.25, 2.0).unwrap();
        assert!(fam.covers_grid());
        let c = GridFunction::from_real(g.clone(), Side::Space, |_| 3.0);
        let m = maximal(&[&c], &fam).unwrap();
        assert!(m.values.iter().all(|v| (v.re - 3.0).abs() < 1e-12));
        let c2 = GridFunction::from_real(g, Side::Space, |_| 0.5);
        let m = maximal(&[&c, &c2], &fam).unwrap();
        assert!(m.values.iter().all(|v| (v.re - 1.5).abs() < 1e-12));
        let s = sharp_maximal(&c, 0.5, &fam).unwrap();
        assert!(s.sup_norm() < 1e-12);
        assert!(BallFamily::lattice(grid(0.0, 1.0, 16), 2.0, 1.0).is_err());
    }

    #[test]
    fn maximal_matches_denser_family() {
        let g = grid(0.0, 4.0, 256);
        let f = GridFunction::from_real(g.clone(), Side::Space, |x| {
            crate::littlewood_paley::smooth_step((1.0 - x[0].abs()) * 4.0)
        });
        let fam = BallFamily::with_level(g.clone(), 0.1, 4.0, 8).unwrap();
        let dense = BallFamily::with_level(g.clone(), 0.1, 4.0, 32).unwrap();
        let a = maximal(&[&f], &fam).unwrap();
        let b = maximal(&[&f], &dense).unwrap();
        for (i, (p, q)) in a.values.iter().zip(&b.values).enumerate() {
            assert!(p.re <= q.re + 1e-12);
            if g.point(i)[0].abs() >= 2.0 {
                continue;
            }
            assert!(q.re - p.re <= 0.05 * q.re, "{} {}", p.re, q.re);
        }
    }

    #[test]
    fn sharp_maximal_of_small_perturbation_is_small() {
        let g = grid(1.0, 4.0, 128);
        let fam = BallFamily::lattice(g.clone(), 0.25, 2.0).unwrap();
        let f = GridFunction::from_real(g, Side::Space, |x| 2.0 + 1e-3 * x[0].sin());
        let s = sharp_maximal(&f, 1.0, &fam).unwrap();
        assert!(s.sup_norm() < 2e-3 && s.sup_norm() > 0.0);
        assert!(sharp_maximal(&f, 0.0, &fam).is_err());
    }

    #[test]
    fn sharp_maximal_step_against_best_ball() {
        let g = grid(0.0, 2.0, 64);
        let fam = BallFamily::lattice(g.clone(), 0.25, 1.0).unwrap();
        let f = GridFunction::from_real(g.clone(), Side::Space, |x| if x[0] > 0.3 { 1.0 } else { 0.0 });
        let s = sharp_maximal(&f, 1.0, &fam).unwrap();
        let v = f.abs();
        let q = g.weights();
        let mut best = 0.0f64;
        for b in fam.balls() {
            let idx: Vec<usize> = (0..g.len()).filter(|&i| b.contains(&g.point(i))).collect();
            let m: f64 = idx.iter().map(|&i| q[i]).sum();
            let a: f64 = idx.iter().map(|&i| v[i] * q[i]).sum::<f64>() / m;
            let o: f64 = idx.iter().map(|&i| (v[i] - a).abs() * q[i]).sum::<f64>() / m;
            best = best.max(o);
        }
        assert!((s.sup_norm() - best).abs() < 1e-12);
        assert!((best - 0.5).abs() < 0.05);
    }

    #[test]
    fn ap_of_constant_weight_is_one() {
        let g = grid(1.0, 4.0, 128);
        let fam = BallFamily::lattice(g, 0.1, 2.0).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert_eq!(ap_constant(&WeightSpec::constant(1.0), p, &fam).unwrap(), 1.0);
        }
        assert!(ap_constant(&WeightSpec::constant(1.0), 0.5, &fam).is_err());
        let w = WeightSpec::power(0.5);
        let a = ap_constant(&w, 2.0, &fam).unwrap();
        let b = ap_constant(&w.scaled(7.0), 2.0, &fam).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        assert!(a >= 1.0);
        let zero = WeightSpec::custom(true, |x| if x[0].abs() < 1.0 { 0.0 } else { 1.0 });
        assert!(ap_constant(&zero, 1.0, &fam).is_err());
    }

    #[test]
    fn invariance_flag_is_checked() {
        let g = grid(0.0, 2.0, 32);
        let w = WeightSpec::custom(true, |x| 1.0 + x[0].max(0.0));
        assert!(w.sample(&g).is_err());
        assert!(WeightSpec::custom(false, |x| 1.0 + x[0].max(0.0)).sample(&g).is_ok());
        assert!(WeightSpec::power(0.3).unit_ball_mass(&g).is_finite());
    }

    #[test]
    fn multi_and_bump_constants() {
        let g = grid(1.0, 4.0, 256);
        let fam = BallFamily::lattice(g, 0.1, 2.0).unwrap();
        let one = WeightSpec::constant(1.0);
        let ws = [one.clone(), one.clone()];
        assert!((multi_ap_constant(&one, &ws, &[2.0, 2.0], &fam).unwrap() - 1.0).abs() < 1e-12);
        assert!((bump_constant(&one, &ws, &[2.0, 2.0], 1.1, &fam).unwrap() - 1.0).abs() < 1e-12);
        let cs = [WeightSpec::constant(2.0), WeightSpec::constant(5.0)];
        let v = WeightSpec::constant(2f64.powf(0.5) * 5f64.powf(0.5));
        assert!((multi_ap_constant(&v, &cs, &[2.0, 2.0], &fam).unwrap() - 1.0).abs() < 1e-12);
        let cfg = WeightConfig::one_weight([WeightSpec::power(0.3), WeightSpec::power(0.3)], [2.0, 2.0]).unwrap();
        let a = multi_ap_constant(&cfg.v, &cfg.w, &cfg.p, &fam).unwrap();
        let b = bump_constant(&cfg.v, &cfg.w, &cfg.p, 1.1, &fam).unwrap();
        assert!(a.is_finite() && b >= a * (1.0 - 1e-12));
        assert!(multi_ap_constant(&one, &ws, &[2.0], &fam).is_err());
        assert!(bump_constant(&one, &ws, &[2.0, 2.0], 1.0, &fam).is_err());
    }

    #[test]
    fn blow_up_detector_separates_exponents() {
        let s = ReflectionSetup::uniform(1, 0.0).unwrap();
        let bad = blow_up_detector(&s, &WeightSpec::power(1.5), 2.0, 0.01, 1.0, 100.0).unwrap();
        let good = blow_up_detector(&s, &WeightSpec::power(0.5), 2.0, 0.01, 1.0, 100.0).unwrap();
        assert!(bad.fired, "{bad:?}");
        assert!(!good.fired, "{good:?}");
        assert!((good.growth - 1.0).abs() < 0.1, "{good:?}");
    }

    #[test]
    fn weak_norm_against_level_sets() {
        let s = ReflectionSetup::uniform(1, 0.0).unwrap();
        let g = Grid::new(&s, 6.0, 4096).unwrap();
        let f = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0]).exp());
        let one = WeightSpec::constant(1.0);
        let levels = log_levels(1.0, 4001);
        for p in [0.5, 1.0, 2.0] {
            let weak = weak_norm(&f, &one, p, &levels).unwrap();
            let strong = weighted_norm(&f, &one, p).unwrap();
            assert!(weak <= strong);
            let want = levels
                .iter()
                .filter(|&&t| t < 1.0)
                .map(|&t| {
                    let r = (-t.ln()).sqrt();
                    t * axis_measure(&s, 0, -r, r).powf(1.0 / p)
                })
                .fold(0.0, f64::max);
            assert!((weak - want).abs() < 5e-3 * want, "{p}: {weak} {want}");
        }
        assert!(weak_norm(&f, &one, 1.0, &[]).is_err());
        assert!((weighted_norm(&f, &one, 2.0).unwrap() - f.l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn sharp_domination_is_sign_invariant() {
        let g = grid(1.0, 6.0, 64);
        let t = Transform::square(g.clone());
        let fam = BallFamily::lattice(g.clone(), 0.4, 3.0).unwrap();
        let pairs = gaussian_test_pairs(&g, 1, 5);
        let (f1, f2) = &pairs[0];
        let m = BilinearSymbol::one();
        let a = sharp_domination_probe(&t, &m, f1, f2, 0.25, &fam).unwrap();
        assert!(a.max_ratio.is_finite() && a.max_ratio > 0.0);
        let n1 = f1.map(|v| -v);
        let n2 = f2.map(|v| -v);
        let b = sharp_domination_probe(&t, &m, &n1, &n2, 0.25, &fam).unwrap();
        assert!((a.max_ratio - b.max_ratio).abs() < 1e-9 * a.max_ratio);
        let z = GridFunction::zeros(g, Side::Space);
        let c = sharp_domination_probe(&t, &m, &z, &z, 0.25, &fam).unwrap();
        assert_eq!(c.masked, z.len());
        assert!(sharp_domination_probe(&t, &m, f1, f2, 0.5, &fam).is_err());
    }

    #[test]
    fn trivial_weights_give_cauchy_schwarz() {
        let g = grid(1.0, 8.0, 128);
        let t = Transform::square(g.clone());
        let fam = BallFamily::lattice(g.clone(), 0.5, 4.0).unwrap();
        let one = WeightSpec::constant(1.0);
        let cfg = WeightConfig {
            v: one.clone(),
            w: [one.clone(), one],
            p: [2.0, 2.0],
        };
        let pairs = gaussian_test_pairs(&g, 3, 2);
        let r = weighted_inequality_probe(&t, &BilinearSymbol::one(), &cfg, &pairs, &fam).unwrap();
        assert!(r.max_ratio <= 1.0 + 1e-6, "{r:?}");
        let bad = WeightConfig {
            v: WeightSpec::constant(1.0),
            w: [WeightSpec::custom(true, |x| (x[0].abs() - 1.0).max(0.0)), WeightSpec::power(0.0)],
            p: [2.0, 2.0],
        };
        assert!(matches!(
            weighted_inequality_probe(&t, &BilinearSymbol::one(), &bad, &pairs, &fam),
            Err(DunklError::Hypothesis(_))
        ));
    }
}
