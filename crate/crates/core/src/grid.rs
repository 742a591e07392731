//! Midpoint-shifted tensor grids carrying μ_k quadrature weights, and sampled functions.

use crate::error::{invalid, DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::special::hurwitz_zeta_half;
use num_complex::Complex64;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub radius: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub step: f64,
}

impl Axis {
    /// `n` midpoint nodes on `[-R, R]` with weights for `c 2^k |x|^{2k} dx`.
    ///
    /// For non-integer `k` the plain midpoint rule has an `O(h^{2k+1})` error from
    /// the cusp at the origin; the leading three terms of its asymptotic expansion
    /// are removed by folding an even extrapolation of the integrand into the six
    /// nodes nearest zero.
    pub fn new(k: f64, c_axis: f64, radius: f64, n: usize) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return invalid(format!("node count must be even and at least 8, got {n}"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return invalid(format!("truncation radius must be positive, got {radius}"));
        }
        let h = 2.0 * radius / n as f64;
        let scale = c_axis * 2f64.powf(k);
        let nodes: Vec<f64> = (0..n).map(|i| -radius + (i as f64 + 0.5) * h).collect();
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&x| {
                if k == 0.0 {
                    scale * h
                } else {
                    scale * x.abs().powf(2.0 * k) * h
                }
            })
            .collect();
        if k.fract() != 0.0 {
            let sig = [0.25, 2.25, 6.25];
            let z = [
                hurwitz_zeta_half(-2.0 * k),
                hurwitz_zeta_half(-2.0 * k - 2.0),
                hurwitz_zeta_half(-2.0 * k - 4.0),
            ];
            for m in 0..3 {
                let (a, b) = match m {
                    0 => (sig[1], sig[2]),
                    1 => (sig[0], sig[2]),
                    _ => (sig[0], sig[1]),
                };
                let den = (sig[m] - a) * (sig[m] - b);
                // ℓ_m(σ) = (σ-a)(σ-b)/den
                let l0 = a * b / den;
                let l1 = -(a + b) / den;
                let l2 = 1.0 / den;
                let delta = -scale * h.powf(2.0 * k + 1.0) * (z[0] * l0 + z[1] * l1 + z[2] * l2);
                weights[n / 2 + m] += delta;
                weights[n / 2 - 1 - m] += delta;
            }
        }
        Ok(Self {
            radius,
            nodes,
            weights,
            step: h,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn same_nodes(&self, other: &Axis) -> bool {
        self.nodes == other.nodes
    }
}

/// Tensor grid, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    setup: ReflectionSetup,
    axes: Vec<Axis>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(setup: &ReflectionSetup, radius: f64, n: usize) -> Result<Arc<Self>> {
        let d = setup.dim();
        Self::with_axes(setup, &vec![radius; d], &vec![n; d])
    }

    pub fn with_axes(setup: &ReflectionSetup, radii: &[f64], counts: &[usize]) -> Result<Arc<Self>> {
        if radii.len() != setup.dim() || counts.len() != setup.dim() {
            return invalid("one radius and node count per axis required");
        }
        let axes = (0..setup.dim())
            .map(|i| Axis::new(setup.k()[i], setup.c_axis(i), radii[i], counts[i]))
            .collect::<Result<Vec<_>>>()?;
        let mut weights = vec![1.0];
        for ax in &axes {
            let mut next = Vec::with_capacity(weights.len() * ax.len());
            for &w in &weights {
                for &v in &ax.weights {
                    next.push(w * v);
                }
            }
            weights = next;
        }
        Ok(Arc::new(Self {
            setup: setup.clone(),
            axes,
            weights,
        }))
    }

    pub fn setup(&self) -> &ReflectionSetup {
        &self.setup
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len()).collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for i in (0..self.dim()).rev() {
            let n = self.axes[i].len();
            idx[i] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(flat, &mut p);
        p
    }

    pub fn point_into(&self, mut flat: usize, p: &mut [f64]) {
        for i in (0..self.dim()).rev() {
            let n = self.axes[i].len();
            p[i] = self.axes[i].nodes[flat % n];
            flat /= n;
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat index of the node `σ(x)` for a sign pattern `σ`.
    pub fn reflect_index(&self, flat: usize, sigma: usize) -> usize {
        let idx = self.multi_index(flat);
        let mut out = 0;
        for (i, &v) in idx.iter().enumerate() {
            let n = self.axes[i].len();
            let j = if sigma >> i & 1 == 1 { n - 1 - v } else { v };
            out = out * n + j;
        }
        out
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.setup == other.setup
            && self.axes.len() == other.axes.len()
            && self.axes.iter().zip(&other.axes).all(|(a, b)| a.same_nodes(b))
    }

    /// μ_k of the truncation box, summed from the weights.
    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Space,
    Frequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Arc<Grid>,
    pub values: Vec<Complex64>,
    pub side: Side,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>, side: Side) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(DunklError::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, side })
    }

    pub fn zeros(grid: Arc<Grid>, side: Side) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
            side,
        }
    }

    pub fn from_fn(grid: Arc<Grid>, side: Side, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let mut p = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.point_into(i, &mut p);
                f(&p)
            })
            .collect();
        Self { grid, values, side }
    }

    pub fn from_real(grid: Arc<Grid>, side: Side, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, side, |x| Complex64::new(f(x), 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.compatible(&other.grid) {
            Ok(())
        } else {
            Err(DunklError::GridMismatch("functions live on different grids".into()))
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            side: self.side,
        }
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            side: self.side,
        })
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// `(Σ |f|^p w)^{1/p}` with the μ_k weights.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v.norm().powf(p) * w)
            .sum();
        s.powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `∫ f conj(g) dμ_k`.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| a * b.conj() * w)
            .sum())
    }

    /// Relative weighted L² distance `‖self - other‖₂ / ‖other‖₂`.
    pub fn rel_l2_distance(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.grid.weights())
            .map(|((a, b), w)| (a - b).norm_sqr() * w)
            .sum();
        Ok((num / other.l2_norm().powi(2)).sqrt())
    }

    /// CSV with columns `x1..xd, re, im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.grid.dim()).map(|i| format!("x{i}")).collect();
        header.push("re".into());
        header.push("im".into());
        wr.write_record(&header)?;
        let mut p = vec![0.0; self.grid.dim()];
        for (i, v) in self.values.iter().enumerate() {
            self.grid.point_into(i, &mut p);
            let mut rec: Vec<String> = p.iter().map(|c| format!("{c:.17e}")).collect();
            rec.push(format!("{:.17e}", v.re));
            rec.push(format!("{:.17e}", v.im));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    #[test]
    fn nodes_avoid_hyperplanes() {
        let s = ReflectionSetup::uniform(1, 0.5).unwrap();
        let g = Grid::new(&s, 12.0, 64).unwrap();
        assert!(g.axis(0).nodes.iter().all(|&x| x != 0.0));
        assert!(Grid::new(&s, 12.0, 63).is_err());
        assert!(Grid::new(&s, 12.0, 6).is_err());
    }

    #[test]
    fn corrected_weights_integrate_singular_moments() {
        for &k in &[0.25, 0.5, 1.0, 1.5, 2.5] {
            let s = ReflectionSetup::uniform(1, k).unwrap();
            let g = Grid::new(&s, 12.0, 2048).unwrap();
            let got: f64 = g
                .axis(0)
                .nodes
                .iter()
                .zip(g.weights())
                .map(|(&x, &w)| (-x * x).exp() * w)
                .sum();
            let want = s.c_axis(0) * 2f64.powf(k) * gamma(k + 0.5);
            assert!((got - want).abs() / want < 1e-12, "k={k} {got} {want}");
        }
    }

    #[test]
    fn total_weight_matches_box_measure() {
        let s = ReflectionSetup::new(vec![0.5, 1.0]).unwrap();
        let g = Grid::new(&s, 3.0, 64).unwrap();
        let want = crate::geometry::axis_measure(&s, 0, -3.0, 3.0)
            * crate::geometry::axis_measure(&s, 1, -3.0, 3.0);
        assert!((g.total_measure() - want).abs() / want < 1e-3);
    }

    #[test]
    fn reflect_index_mirrors_points() {
        let s = ReflectionSetup::uniform(2, 0.0).unwrap();
        let g = Grid::new(&s, 2.0, 8).unwrap();
        for i in 0..g.len() {
            for sig in 0..4 {
                let p = g.point(i);
                let q = g.point(g.reflect_index(i, sig));
                let r = crate::geometry::sign_flip(&p, sig);
                assert_eq!(q, r);
            }
        }
    }

    #[test]
    fn norms_use_weights() {
        let s = ReflectionSetup::uniform(1, 0.0).unwrap();
        let g = Grid::new(&s, 10.0, 400).unwrap();
        let f = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0] / 2.0).exp());
        // ∫ e^{-x²} dx / √(2π) = √π/√(2π)
        let want = (0.5f64).sqrt();
        assert!((f.l2_norm().powi(2) - want).abs() < 1e-12);
    }
}
