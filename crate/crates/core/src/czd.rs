//! Calderón-Zygmund decomposition over the dyadic cubes of the truncation box.

use crate::error::{invalid, DunklError, Result};
use crate::geometry::{sign_flip, union_measure, Ball};
use crate::grid::{Grid, GridFunction, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::sync::Arc;

type C64 = Complex64;

/// Quadrature nodes per transverse axis for ball measures in `d >= 2`.
pub const MEASURE_NODES: usize = 256;
pub const SPLIT_TOL: f64 = 1e-12;
pub const MEAN_TOL: f64 = 1e-10;

/// Dyadic cube of the truncation box at `level`, with integer position `index`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicCube {
    pub level: u32,
    pub index: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DyadicCube {
    pub fn centre(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Circumscribed ball.
    pub fn ball(&self) -> Ball {
        let r = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.25 * (b - a) * (b - a))
            .sum::<f64>()
            .sqrt();
        Ball {
            center: self.centre(),
            radius: r,
        }
    }

    fn node_range(&self, grid: &Grid, axis: usize) -> (usize, usize) {
        let n = grid.axis(axis).len() >> self.level;
        (self.index[axis] * n, (self.index[axis] + 1) * n)
    }

    fn nodes(&self, grid: &Grid) -> Vec<usize> {
        let d = grid.dim();
        let shape = grid.shape();
        let ranges: Vec<(usize, usize)> = (0..d).map(|i| self.node_range(grid, i)).collect();
        let mut out = Vec::new();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(idx.iter().zip(&shape).fold(0, |acc, (i, n)| acc * n + i));
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

    fn children(&self, grid: &Grid) -> Vec<DyadicCube> {
        let d = self.index.len();
        (0..1usize << d)
            .map(|mask| {
                let index: Vec<usize> = (0..d).map(|i| 2 * self.index[i] + ((mask >> i) & 1)).collect();
                cube_at(grid, self.level + 1, index)
            })
            .collect()
    }

    fn parent(&self, grid: &Grid) -> Option<DyadicCube> {
        if self.level == 0 {
            return None;
        }
        Some(cube_at(grid, self.level - 1, self.index.iter().map(|i| i / 2).collect()))
    }
}

fn cube_at(grid: &Grid, level: u32, index: Vec<usize>) -> DyadicCube {
    let d = grid.dim();
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for i in 0..d {
        let r = grid.axis(i).radius;
        let side = 2.0 * r / (1u64 << level) as f64;
        lo[i] = -r + side * index[i] as f64;
        hi[i] = lo[i] + side;
    }
    DyadicCube { level, index, lo, hi }
}

/// Finest level at which every cube holds a whole number of nodes per axis.
pub fn max_level(grid: &Grid) -> u32 {
    grid.axes().iter().map(|a| a.len().trailing_zeros()).min().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BadPiece {
    pub cube: DyadicCube,
    pub ball: Ball,
    pub nodes: Vec<usize>,
    /// `b = (f - avg_Q f) 1_Q` on `nodes`.
    pub values: Vec<C64>,
    pub average: C64,
    /// μ_k-average of `|f|` over the cube.
    pub abs_average: f64,
    pub ball_measure: f64,
    pub l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CzConstants {
    /// `max ‖b_n‖₁ / (λ μ_k(B_n))`.
    pub c_b: f64,
    /// `λ Σ μ_k(B_n) / ‖f‖₁`.
    pub c_sum: f64,
    /// `‖g‖_∞ / λ`.
    pub c_good: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CZDecomposition {
    pub f: GridFunction,
    pub lambda: f64,
    pub good: GridFunction,
    pub pieces: Vec<BadPiece>,
    pub constants: CzConstants,
}

fn l1(grid: &Grid, nodes: &[usize], v: impl Fn(usize) -> f64) -> f64 {
    let q = grid.weights();
    nodes.iter().map(|&i| v(i) * q[i]).sum()
}

fn ball_measure(grid: &Grid, b: &Ball) -> f64 {
    union_measure(grid.setup(), std::slice::from_ref(b), MEASURE_NODES)
}

/// Stopping time over the dyadic cubes of the grid's box at height `lambda`.
pub fn cz_decompose(f: &GridFunction, lambda: f64) -> Result<CZDecomposition> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid(format!("height must be positive, got {lambda}"));
    }
    if f.side != Side::Space {
        return invalid("decomposition needs a space-side function");
    }
    let grid = f.grid.clone();
    let q = grid.weights();
    let top = max_level(&grid);
    let abs = f.abs();
    let mut good = f.values.clone();
    let mut pieces = Vec::new();
    let mut stack = vec![cube_at(&grid, 0, vec![0; grid.dim()])];
    while let Some(cube) = stack.pop() {
        let nodes = cube.nodes(&grid);
        let mass: f64 = nodes.iter().map(|&i| q[i]).sum();
        let abs_average = l1(&grid, &nodes, |i| abs[i]) / mass;
        if abs_average > lambda {
            let average = nodes.iter().map(|&i| f.values[i] * q[i]).sum::<C64>() / mass;
            let values: Vec<C64> = nodes.iter().map(|&i| f.values[i] - average).collect();
            for &i in &nodes {
                good[i] = average;
            }
            let ball = cube.ball();
            let l1n = nodes.iter().zip(&values).map(|(&i, v)| v.norm() * q[i]).sum();
            pieces.push(BadPiece {
                ball_measure: ball_measure(&grid, &ball),
                cube,
                ball,
                nodes,
                values,
                average,
                abs_average,
                l1: l1n,
            });
        } else if cube.level < top {
            let mut ch = cube.children(&grid);
            ch.reverse();
            stack.extend(ch);
        }
    }
    let good = GridFunction::new(grid, good, Side::Space)?;
    let constants = constants_of(f, lambda, &good, &pieces);
    Ok(CZDecomposition {
        f: f.clone(),
        lambda,
        good,
        pieces,
        constants,
    })
}

fn constants_of(f: &GridFunction, lambda: f64, good: &GridFunction, pieces: &[BadPiece]) -> CzConstants {
    let f1 = f.lp_norm(1.0);
    let c_b = pieces
        .iter()
        .map(|p| p.l1 / (lambda * p.ball_measure))
        .fold(0.0, f64::max);
    let c_sum = if f1 > 0.0 {
        lambda * pieces.iter().map(|p| p.ball_measure).sum::<f64>() / f1
    } else {
        0.0
    };
    CzConstants {
        c_b,
        c_sum,
        c_good: good.sup_norm() / lambda,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CzReport {
    pub constants: CzConstants,
    pub pieces: usize,
    pub split_error: f64,
    /// Largest `|∫ b_n dμ_k| / ∫_Q |f| dμ_k` over pieces.
    pub max_mean_ratio: f64,
    /// `(‖g‖₁ + Σ‖b_n‖₁) / ‖f‖₁`.
    pub l1_ratio: f64,
    /// Largest `avg_Q |f| / λ` over the parents of selected cubes.
    pub max_parent_ratio: f64,
    /// Smallest `avg_Q |f| / λ` over selected cubes.
    pub min_selected_ratio: f64,
}

fn breach<T>(msg: String) -> Result<T> {
    Err(DunklError::Invariant(msg))
}

/// Recomputes every property of `dec` from its raw data and fails on the first breach.
pub fn cz_verify(dec: &CZDecomposition) -> Result<CzReport> {
    let f = &dec.f;
    let grid = &f.grid;
    let q = grid.weights();
    let abs = f.abs();
    let lambda = dec.lambda;
    let mut owner = vec![usize::MAX; f.len()];
    let mut max_mean_ratio = 0.0f64;
    let mut max_parent_ratio = 0.0f64;
    let mut min_selected_ratio = f64::INFINITY;
    let mut pieces = dec.pieces.clone();
    for (n, p) in pieces.iter_mut().enumerate() {
        if p.nodes.len() != p.values.len() {
            return breach(format!("piece {n} has mismatched node and value counts"));
        }
        let want = p.cube.nodes(grid);
        if want != p.nodes {
            return breach(format!("piece {n} is not supported on its cube"));
        }
        for &i in &p.nodes {
            let x = grid.point(i);
            if !p.ball.contains(&x) {
                return breach(format!("piece {n} leaves its ball at {x:?}"));
            }
            if owner[i] != usize::MAX {
                return breach(format!("pieces {} and {n} overlap", owner[i]));
            }
            owner[i] = n;
        }
        let l1n: f64 = p.nodes.iter().zip(&p.values).map(|(&i, v)| v.norm() * q[i]).sum();
        let mean: C64 = p.nodes.iter().zip(&p.values).map(|(&i, v)| v * q[i]).sum();
        let f_on_cube = l1(grid, &p.nodes, |i| abs[i]);
        if f_on_cube > 0.0 {
            let r = mean.norm() / f_on_cube;
            if r > MEAN_TOL {
                return breach(format!("piece {n} has mean {r:.3e} relative to the mass of f on its cube"));
            }
            max_mean_ratio = max_mean_ratio.max(r);
        }
        let mass: f64 = p.nodes.iter().map(|&i| q[i]).sum();
        let avg = f_on_cube / mass;
        if !(avg > lambda) {
            return breach(format!("piece {n} has average {avg} not above the height {lambda}"));
        }
        min_selected_ratio = min_selected_ratio.min(avg / lambda);
        if let Some(parent) = p.cube.parent(grid) {
            let pn = parent.nodes(grid);
            let pm: f64 = pn.iter().map(|&i| q[i]).sum();
            let pa = l1(grid, &pn, |i| abs[i]) / pm;
            if pa > lambda {
                return breach(format!("piece {n} is not maximal: parent average {pa} exceeds {lambda}"));
            }
            max_parent_ratio = max_parent_ratio.max(pa / lambda);
        }
        p.l1 = l1n;
        p.ball_measure = ball_measure(grid, &p.ball);
    }
    let mut recon: Vec<C64> = dec.good.values.clone();
    for p in &pieces {
        for (&i, v) in p.nodes.iter().zip(&p.values) {
            recon[i] += v;
        }
    }
    let scale = f.sup_norm().max(1.0);
    let split_error = recon
        .iter()
        .zip(&f.values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if split_error > SPLIT_TOL * scale {
        return breach(format!("f differs from g + Σ b by {split_error:.3e}"));
    }
    let f1 = f.lp_norm(1.0);
    let total = dec.good.lp_norm(1.0) + pieces.iter().map(|p| p.l1).sum::<f64>();
    let l1_ratio = if f1 > 0.0 { total / f1 } else { 0.0 };
    if l1_ratio > 3.0 {
        return breach(format!("‖g‖₁ + Σ‖b‖₁ is {l1_ratio} times ‖f‖₁"));
    }
    Ok(CzReport {
        constants: constants_of(f, lambda, &dec.good, &pieces),
        pieces: pieces.len(),
        split_error,
        max_mean_ratio,
        l1_ratio,
        max_parent_ratio,
        min_selected_ratio: if pieces.is_empty() { 0.0 } else { min_selected_ratio },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnlargedBalls {
    pub factor: f64,
    pub balls: Vec<Ball>,
    /// μ_k of the union of the reflection orbits of the dilated balls.
    pub orbit_measure: f64,
    /// `λ · orbit_measure / ‖f‖₁`.
    pub constant: f64,
}

pub fn enlarged_balls(dec: &CZDecomposition, factor: f64) -> Result<EnlargedBalls> {
    if !(factor >= 1.0) {
        return invalid(format!("dilation factor must be at least 1, got {factor}"));
    }
    let grid = &dec.f.grid;
    let balls: Vec<Ball> = dec.pieces.iter().map(|p| p.ball.dilate(factor)).collect();
    let g = 1usize << grid.dim();
    let mut orbit: Vec<Ball> = Vec::with_capacity(balls.len() * g);
    for b in &balls {
        for s in 0..g {
            let c = sign_flip(&b.center, s);
            if !orbit.iter().any(|o| o.radius == b.radius && o.center == c) {
                orbit.push(Ball {
                    center: c,
                    radius: b.radius,
                });
            }
        }
    }
    let orbit_measure = union_measure(grid.setup(), &orbit, MEASURE_NODES);
    let f1 = dec.f.lp_norm(1.0);
    Ok(EnlargedBalls {
        factor,
        balls,
        orbit_measure,
        constant: if f1 > 0.0 { dec.lambda * orbit_measure / f1 } else { 0.0 },
    })
}

impl CZDecomposition {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.f.grid.dim();
        let mut head = vec!["piece".to_string(), "level".to_string()];
        for i in 0..d {
            head.push(format!("lo{i}"));
            head.push(format!("hi{i}"));
        }
        for i in 0..d {
            head.push(format!("centre{i}"));
        }
        head.extend(["radius", "ball_measure", "b_l1", "abs_avg", "avg_re", "avg_im"].map(String::from));
        w.write_record(&head)?;
        for (n, p) in self.pieces.iter().enumerate() {
            let mut row = vec![n.to_string(), p.cube.level.to_string()];
            for i in 0..d {
                row.push(format!("{:.12e}", p.cube.lo[i]));
                row.push(format!("{:.12e}", p.cube.hi[i]));
            }
            for c in &p.ball.center {
                row.push(format!("{c:.12e}"));
            }
            for v in [
                p.ball.radius,
                p.ball_measure,
                p.l1,
                p.abs_average,
                p.average.re,
                p.average.im,
            ] {
                row.push(format!("{v:.12e}"));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sums of one to three Gaussian bumps well inside the box, with heights `λ`
/// chosen between 5% and 50% of the sup norm.
pub fn cz_test_family(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<(GridFunction, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let r = grid.axes().iter().map(|a| a.radius).fold(f64::INFINITY, f64::min);
    (0..count)
        .map(|_| {
            let bumps: Vec<(f64, f64, Vec<f64>)> = (0..rng.gen_range(1..=3))
                .map(|_| {
                    let h = rng.gen_range(0.5..4.0);
                    let s = rng.gen_range(0.05..0.6) * r / 8.0;
                    let c = (0..d).map(|_| rng.gen_range(-0.4..0.4) * r).collect();
                    (h, s, c)
                })
                .collect();
            let f = GridFunction::from_real(grid.clone(), Side::Space, |x| {
                bumps
                    .iter()
                    .map(|(h, s, c)| {
                        let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                        h * (-r2 / (2.0 * s * s)).exp()
                    })
                    .sum()
            });
            let lambda = f.sup_norm() * rng.gen_range(0.05..0.5);
            (f, lambda)
        })
        .collect()
}
