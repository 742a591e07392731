//! Discrete Dunkl transform on tensor grids, with the derived spectral operators.

use crate::error::{invalid, DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::grid::{Grid, GridFunction, Side};
use crate::kernel::{rank_one, rank_one_parts};
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

type C64 = Complex64;

/// Even/odd split of one axis kernel on the positive half-grids.
///
/// `c[i][j] = j_{k-1/2}(ξ_i x_j)` and `s[i][j]` the odd part, for the positive
/// frequency node `i` and positive space node `j`.
#[derive(Debug, Clone)]
pub struct AxisKernel {
    pub(crate) nq: usize,
    pub(crate) nx: usize,
    pub(crate) c: Vec<f64>,
    pub(crate) s: Vec<f64>,
    ct: Option<Vec<f64>>,
    st: Option<Vec<f64>>,
    pub(crate) wq: Vec<f64>,
    pub(crate) wx: Vec<f64>,
    pub(crate) qs: Vec<f64>,
}

impl AxisKernel {
    fn new(k: f64, space: &crate::grid::Axis, freq: &crate::grid::Axis) -> Self {
        let nx = space.len() / 2;
        let nq = freq.len() / 2;
        let xs: Vec<f64> = space.nodes[nx..].to_vec();
        let qs: Vec<f64> = freq.nodes[nq..].to_vec();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = qs
            .par_iter()
            .map(|&q| {
                let mut cr = Vec::with_capacity(nx);
                let mut sr = Vec::with_capacity(nx);
                for &x in &xs {
                    let (e, o) = rank_one_parts(k, q * x);
                    cr.push(e);
                    sr.push(o);
                }
                (cr, sr)
            })
            .collect();
        let mut c = Vec::with_capacity(nq * nx);
        let mut s = Vec::with_capacity(nq * nx);
        for (cr, sr) in rows {
            c.extend(cr);
            s.extend(sr);
        }
        let symmetric = space.same_nodes(freq);
        let (ct, st) = if symmetric {
            (None, None)
        } else {
            (Some(transpose(&c, nq, nx)), Some(transpose(&s, nq, nx)))
        };
        Self {
            nq,
            nx,
            c,
            s,
            ct,
            st,
            wq: freq.weights[nq..].to_vec(),
            wx: space.weights[nx..].to_vec(),
            qs,
        }
    }

    /// Row `j` of the transposed even kernel (fixed space node, all frequencies).
    #[inline]
    pub(crate) fn ct_row(&self, j: usize) -> &[f64] {
        match &self.ct {
            Some(t) => &t[j * self.nq..(j + 1) * self.nq],
            None => &self.c[j * self.nq..(j + 1) * self.nq],
        }
    }

    #[inline]
    pub(crate) fn st_row(&self, j: usize) -> &[f64] {
        match &self.st {
            Some(t) => &t[j * self.nq..(j + 1) * self.nq],
            None => &self.s[j * self.nq..(j + 1) * self.nq],
        }
    }

    /// `E_k(i x_a, ξ_b)` for full-axis indices `a` (space) and `b` (frequency).
    pub fn value(&self, a: usize, b: usize) -> C64 {
        let (pa, na) = half_index(a, self.nx);
        let (pb, nb) = half_index(b, self.nq);
        let e = self.c[pb * self.nx + pa];
        let o = self.s[pb * self.nx + pa];
        if na ^ nb {
            C64::new(e, -o)
        } else {
            C64::new(e, o)
        }
    }

    fn forward_line(&self, input: &[C64], out: &mut [C64], parallel: bool) {
        let nx = self.nx;
        let mut er = vec![0.0; nx];
        let mut ei = vec![0.0; nx];
        let mut or = vec![0.0; nx];
        let mut oi = vec![0.0; nx];
        for j in 0..nx {
            let p = input[nx + j];
            let m = input[nx - 1 - j];
            let w = self.wx[j];
            er[j] = (p.re + m.re) * w;
            ei[j] = (p.im + m.im) * w;
            or[j] = (p.re - m.re) * w;
            oi[j] = (p.im - m.im) * w;
        }
        let row = |i: usize| {
            let a = dot2(&self.c[i * nx..(i + 1) * nx], &er, &ei);
            let b = dot2(&self.s[i * nx..(i + 1) * nx], &or, &oi);
            (a, b)
        };
        let pairs: Vec<((f64, f64), (f64, f64))> = if parallel {
            (0..self.nq).into_par_iter().map(row).collect()
        } else {
            (0..self.nq).map(row).collect()
        };
        let nq = self.nq;
        for (i, (a, b)) in pairs.into_iter().enumerate() {
            // a - i b and a + i b
            out[nq + i] = C64::new(a.0 + b.1, a.1 - b.0);
            out[nq - 1 - i] = C64::new(a.0 - b.1, a.1 + b.0);
        }
    }

    fn inverse_line(&self, input: &[C64], out: &mut [C64], parallel: bool) {
        let nq = self.nq;
        let mut er = vec![0.0; nq];
        let mut ei = vec![0.0; nq];
        let mut or = vec![0.0; nq];
        let mut oi = vec![0.0; nq];
        for i in 0..nq {
            let p = input[nq + i];
            let m = input[nq - 1 - i];
            let w = self.wq[i];
            er[i] = (p.re + m.re) * w;
            ei[i] = (p.im + m.im) * w;
            or[i] = (p.re - m.re) * w;
            oi[i] = (p.im - m.im) * w;
        }
        let row = |j: usize| {
            let a = dot2(self.ct_row(j), &er, &ei);
            let b = dot2(self.st_row(j), &or, &oi);
            (a, b)
        };
        let pairs: Vec<((f64, f64), (f64, f64))> = if parallel {
            (0..self.nx).into_par_iter().map(row).collect()
        } else {
            (0..self.nx).map(row).collect()
        };
        let nx = self.nx;
        for (j, (a, b)) in pairs.into_iter().enumerate() {
            out[nx + j] = C64::new(a.0 - b.1, a.1 + b.0);
            out[nx - 1 - j] = C64::new(a.0 + b.1, a.1 - b.0);
        }
    }
}

#[inline]
fn half_index(a: usize, half: usize) -> (usize, bool) {
    if a >= half {
        (a - half, false)
    } else {
        (half - 1 - a, true)
    }
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = m[i * cols + j];
        }
    }
    t
}

/// `(Σ r_i a_i, Σ r_i b_i)` with a fixed four-lane summation order.
#[inline]
pub(crate) fn dot2(r: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = r.len().min(a.len()).min(b.len());
    let (r, a, b) = (&r[..n], &a[..n], &b[..n]);
    let mut sa = [0.0f64; 4];
    let mut sb = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        for l in 0..4 {
            let i = 4 * c + l;
            sa[l] += r[i] * a[i];
            sb[l] += r[i] * b[i];
        }
    }
    for i in 4 * chunks..n {
        sa[0] += r[i] * a[i];
        sb[0] += r[i] * b[i];
    }
    ((sa[0] + sa[1]) + (sa[2] + sa[3]), (sb[0] + sb[1]) + (sb[2] + sb[3]))
}

/// Precomputed forward/inverse transform between a space grid and a frequency grid.
#[derive(Debug, Clone)]
pub struct Transform {
    setup: ReflectionSetup,
    space: Arc<Grid>,
    freq: Arc<Grid>,
    axes: Vec<AxisKernel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

impl Transform {
    pub fn new(space: Arc<Grid>, freq: Arc<Grid>) -> Result<Self> {
        if space.setup() != freq.setup() {
            return Err(DunklError::GridMismatch(
                "space and frequency grids use different setups".into(),
            ));
        }
        let axes = (0..space.dim())
            .map(|i| AxisKernel::new(space.setup().k()[i], space.axis(i), freq.axis(i)))
            .collect();
        Ok(Self {
            setup: space.setup().clone(),
            space,
            freq,
            axes,
        })
    }

    /// Transform whose frequency grid coincides with the space grid.
    pub fn square(grid: Arc<Grid>) -> Self {
        Self::new(grid.clone(), grid).expect("identical grids")
    }

    pub fn setup(&self) -> &ReflectionSetup {
        &self.setup
    }

    pub fn space_grid(&self) -> &Arc<Grid> {
        &self.space
    }

    pub fn freq_grid(&self) -> &Arc<Grid> {
        &self.freq
    }

    pub fn axis_kernel(&self, i: usize) -> &AxisKernel {
        &self.axes[i]
    }

    fn check(&self, f: &GridFunction, side: Side) -> Result<()> {
        let g = match side {
            Side::Space => &self.space,
            Side::Frequency => &self.freq,
        };
        if f.side != side {
            return Err(DunklError::GridMismatch(format!(
                "expected a {side:?}-side function, got {:?}",
                f.side
            )));
        }
        if !(Arc::ptr_eq(&f.grid, g) || f.grid.compatible(g)) {
            return Err(DunklError::GridMismatch("grid does not match the plan".into()));
        }
        Ok(())
    }

    /// `F_k f(ξ) = Σ f(x) E_k(-iξ, x) w(x)`.
    pub fn forward(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f, Side::Space)?;
        let v = self.apply(&f.values, Direction::Forward);
        GridFunction::new(self.freq.clone(), v, Side::Frequency)
    }

    /// `f(x) = Σ F(ξ) E_k(iξ, x) w(ξ)`.
    pub fn inverse(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f, Side::Frequency)?;
        let v = self.apply(&f.values, Direction::Inverse);
        GridFunction::new(self.space.clone(), v, Side::Space)
    }

    pub fn forward_values(&self, v: &[C64]) -> Vec<C64> {
        self.apply(v, Direction::Forward)
    }

    pub fn inverse_values(&self, v: &[C64]) -> Vec<C64> {
        self.apply(v, Direction::Inverse)
    }

    fn apply(&self, data: &[C64], dir: Direction) -> Vec<C64> {
        let d = self.axes.len();
        let (from, to) = match dir {
            Direction::Forward => (&self.space, &self.freq),
            Direction::Inverse => (&self.freq, &self.space),
        };
        let mut shape = from.shape();
        let target = to.shape();
        if d == 1 {
            let mut out = vec![C64::new(0.0, 0.0); target[0]];
            match dir {
                Direction::Forward => self.axes[0].forward_line(data, &mut out, true),
                Direction::Inverse => self.axes[0].inverse_line(data, &mut out, true),
            }
            return out;
        }
        let mut cur = data.to_vec();
        for a in 0..d {
            let lin = shape[a];
            let lout = target[a];
            let outer: usize = shape[..a].iter().product();
            let inner: usize = shape[a + 1..].iter().product();
            let ker = &self.axes[a];
            let lines: Vec<Vec<C64>> = (0..outer * inner)
                .into_par_iter()
                .map(|li| {
                    let (o, i) = (li / inner, li % inner);
                    let line: Vec<C64> = (0..lin).map(|l| cur[(o * lin + l) * inner + i]).collect();
                    let mut res = vec![C64::new(0.0, 0.0); lout];
                    match dir {
                        Direction::Forward => ker.forward_line(&line, &mut res, false),
                        Direction::Inverse => ker.inverse_line(&line, &mut res, false),
                    }
                    res
                })
                .collect();
            let mut next = vec![C64::new(0.0, 0.0); outer * lout * inner];
            for (li, res) in lines.into_iter().enumerate() {
                let (o, i) = (li / inner, li % inner);
                for (l, v) in res.into_iter().enumerate() {
                    next[(o * lout + l) * inner + i] = v;
                }
            }
            cur = next;
            shape[a] = lout;
        }
        cur
    }

    /// `|‖F_k f‖₂ - ‖f‖₂| / ‖f‖₂`.
    pub fn plancherel_defect(&self, f: &GridFunction) -> Result<f64> {
        let n = f.l2_norm();
        if n == 0.0 {
            return invalid("Plancherel defect of the zero function is undefined");
        }
        let ff = self.forward(f)?;
        Ok((ff.l2_norm() - n).abs() / n)
    }

    /// `τ_x f = F^{-1}(E_k(ix, ·) F_k f)`.
    pub fn translate(&self, f: &GridFunction, x: &[f64]) -> Result<GridFunction> {
        self.setup.check_point(x)?;
        let mut ff = self.forward(f)?;
        let k = self.setup.k().to_vec();
        let mut p = vec![0.0; self.setup.dim()];
        for (i, v) in ff.values.iter_mut().enumerate() {
            self.freq.point_into(i, &mut p);
            let e: C64 = (0..k.len()).map(|a| rank_one(k[a], x[a] * p[a])).product();
            *v *= e;
        }
        self.inverse(&ff)
    }

    /// `f *_k g` via `F_k(f *_k g) = F_k f · F_k g`.
    pub fn convolve(&self, f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
        f.same_grid(g)?;
        let a = self.forward(f)?;
        let b = self.forward(g)?;
        let prod = a.zip_with(&b, |u, v| u * v)?;
        self.inverse(&prod)
    }

    /// `m_t(D_k) f = F^{-1}(m(tξ) F_k f)`.
    pub fn linear_multiplier(
        &self,
        m: &(dyn Fn(&[f64]) -> C64 + Sync),
        t: f64,
        f: &GridFunction,
    ) -> Result<GridFunction> {
        let ff = self.forward(f)?;
        self.multiplier_on_spectrum(m, t, &ff)
    }

    fn multiplier_on_spectrum(
        &self,
        m: &(dyn Fn(&[f64]) -> C64 + Sync),
        t: f64,
        ff: &GridFunction,
    ) -> Result<GridFunction> {
        let mut out = ff.clone();
        let mut p = vec![0.0; self.setup.dim()];
        for (i, v) in out.values.iter_mut().enumerate() {
            self.freq.point_into(i, &mut p);
            for c in p.iter_mut() {
                *c *= t;
            }
            *v *= m(&p);
        }
        self.inverse(&out)
    }

    /// Pointwise `sup_t |m_t(D_k) f|` over `t_grid` and its L² ratio to `‖f‖₂`.
    pub fn maximal_multiplier_sweep(
        &self,
        m: &(dyn Fn(&[f64]) -> C64 + Sync),
        f: &GridFunction,
        t_grid: &[f64],
    ) -> Result<MaximalSweep> {
        if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0)) {
            return invalid("t grid must be nonempty and positive");
        }
        let hyp = check_decay_hypotheses(m, self.setup.dim(), self.freq.axis(0).radius)?;
        let ff = self.forward(f)?;
        let mut sup = vec![0.0f64; f.len()];
        for &t in t_grid {
            let g = self.multiplier_on_spectrum(m, t, &ff)?;
            for (s, v) in sup.iter_mut().zip(&g.values) {
                *s = s.max(v.norm());
            }
        }
        let sup_fn = GridFunction::new(
            self.space.clone(),
            sup.iter().map(|&v| C64::new(v, 0.0)).collect(),
            Side::Space,
        )?;
        let n = f.l2_norm();
        Ok(MaximalSweep {
            ratio: if n > 0.0 { sup_fn.l2_norm() / n } else { 0.0 },
            sup: sup_fn,
            c_m: hyp.0,
            c_grad: hyp.1,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MaximalSweep {
    pub sup: GridFunction,
    pub ratio: f64,
    /// Observed `sup (1+|ξ|)|m(ξ)|`.
    pub c_m: f64,
    /// Observed `sup (1+|ξ|)|∇m(ξ)|`.
    pub c_grad: f64,
}

/// Probes `(1+r)|m|` and `(1+r)|∇m|` along rays far beyond the grid; an envelope that
/// keeps growing past the grid radius means the symbol decays too slowly.
pub fn check_decay_hypotheses(
    m: &(dyn Fn(&[f64]) -> C64 + Sync),
    d: usize,
    grid_radius: f64,
) -> Result<(f64, f64)> {
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[a] = s;
            dirs.push(e);
        }
    }
    if d > 1 {
        dirs.push(vec![1.0 / (d as f64).sqrt(); d]);
    }
    let mut inner = (0.0f64, 0.0f64);
    let mut outer = (0.0f64, 0.0f64);
    for e in &dirs {
        for i in -40..=120 {
            let r = 2f64.powf(i as f64 / 4.0);
            let p: Vec<f64> = e.iter().map(|v| v * r).collect();
            let val = (1.0 + r) * m(&p).norm();
            let hstep = 1e-5 * (1.0 + r);
            let mut g2 = 0.0;
            for a in 0..d {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[a] += hstep;
                pm[a] -= hstep;
                g2 += ((m(&pp) - m(&pm)) / (2.0 * hstep)).norm_sqr();
            }
            let grad = (1.0 + r) * g2.sqrt();
            if !val.is_finite() || !grad.is_finite() {
                return Err(DunklError::Hypothesis(format!(
                    "symbol not finite at radius {r}"
                )));
            }
            let slot = if r <= grid_radius { &mut inner } else { &mut outer };
            slot.0 = slot.0.max(val);
            slot.1 = slot.1.max(grad);
        }
    }
    let slack = |a: f64, b: f64| b <= 2.0 * a + 1e-12;
    if !slack(inner.0, outer.0) {
        return Err(DunklError::Hypothesis(format!(
            "(1+|ξ|)|m| grows from {:.3e} on the grid to {:.3e} beyond it",
            inner.0, outer.0
        )));
    }
    if !slack(inner.1, outer.1) {
        return Err(DunklError::Hypothesis(format!(
            "(1+|ξ|)|∇m| grows from {:.3e} on the grid to {:.3e} beyond it",
            inner.1, outer.1
        )));
    }
    Ok((inner.0.max(outer.0), inner.1.max(outer.1)))
}

/// Builds a plan on the fly; prefer [`Transform`] for repeated use.
pub fn forward(f: &GridFunction, freq_grid: Arc<Grid>) -> Result<GridFunction> {
    Transform::new(f.grid.clone(), freq_grid)?.forward(f)
}

pub fn inverse(f: &GridFunction, space_grid: Arc<Grid>) -> Result<GridFunction> {
    Transform::new(space_grid, f.grid.clone())?.inverse(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ReflectionSetup;

    fn gauss(grid: &Arc<Grid>) -> GridFunction {
        GridFunction::from_real(grid.clone(), Side::Space, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp()
        })
    }

    #[test]
    fn kernel_value_matches_direct() {
        let s = ReflectionSetup::uniform(1, 1.0).unwrap();
        let g = Grid::new(&s, 5.0, 16).unwrap();
        let t = Transform::square(g.clone());
        let ax = g.axis(0);
        for a in 0..16 {
            for b in 0..16 {
                let want = crate::kernel::dunkl_kernel_1d(1.0, ax.nodes[a], ax.nodes[b]).unwrap();
                assert!((t.axis_kernel(0).value(a, b) - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn forward_matches_dense_sum() {
        let s = ReflectionSetup::uniform(1, 0.5).unwrap();
        let sg = Grid::new(&s, 6.0, 40).unwrap();
        let fg = Grid::new(&s, 4.0, 24).unwrap();
        let t = Transform::new(sg.clone(), fg.clone()).unwrap();
        let f = GridFunction::from_fn(sg.clone(), Side::Space, |x| {
            C64::new((-(x[0] - 0.7).powi(2)).exp(), x[0].sin() * (-x[0] * x[0]).exp())
        });
        let ff = t.forward(&f).unwrap();
        for (i, &q) in fg.axis(0).nodes.iter().enumerate() {
            let want: C64 = sg
                .axis(0)
                .nodes
                .iter()
                .zip(&f.values)
                .zip(sg.weights())
                .map(|((&x, &v), &w)| v * crate::kernel::dunkl_kernel_1d(0.5, -q, x).unwrap() * w)
                .sum();
            assert!((ff.values[i] - want).norm() < 1e-13);
        }
        let back = t.inverse(&ff).unwrap();
        for (i, &x) in sg.axis(0).nodes.iter().enumerate() {
            let want: C64 = fg
                .axis(0)
                .nodes
                .iter()
                .zip(&ff.values)
                .zip(fg.weights())
                .map(|((&q, &v), &w)| v * crate::kernel::dunkl_kernel_1d(0.5, q, x).unwrap() * w)
                .sum();
            assert!((back.values[i] - want).norm() < 1e-13);
        }
    }

    #[test]
    fn gaussian_is_fixed_and_round_trips() {
        for &k in &[0.0, 0.5, 1.0] {
            let s = ReflectionSetup::uniform(1, k).unwrap();
            let g = Grid::new(&s, 12.0, 1024).unwrap();
            let t = Transform::square(g.clone());
            let f = gauss(&g);
            let ff = t.forward(&f).unwrap();
            let fix = ff
                .values
                .iter()
                .zip(&f.values)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(fix < 1e-9, "k={k} fixed point {fix}");
            let back = t.inverse(&ff).unwrap();
            let back = GridFunction::new(g.clone(), back.values, Side::Space).unwrap();
            let rt = back.rel_l2_distance(&f).unwrap();
            assert!(rt < 1e-9, "k={k} rt {rt}");
        }
    }

    #[test]
    fn two_dimensional_gaussian() {
        let s = ReflectionSetup::new(vec![0.5, 1.0]).unwrap();
        let g = Grid::new(&s, 8.0, 128).unwrap();
        let t = Transform::square(g.clone());
        let f = gauss(&g);
        let ff = t.forward(&f).unwrap();
        let err = ff
            .values
            .iter()
            .zip(&f.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "{err}");
        assert!(t.plancherel_defect(&f).unwrap() < 1e-8);
    }

    #[test]
    fn side_and_grid_errors() {
        let s = ReflectionSetup::uniform(1, 0.0).unwrap();
        let g = Grid::new(&s, 6.0, 32).unwrap();
        let other = Grid::new(&s, 6.0, 64).unwrap();
        let t = Transform::square(g.clone());
        let f = gauss(&g);
        let ff = t.forward(&f).unwrap();
        assert!(t.forward(&ff).is_err());
        assert!(t.forward(&gauss(&other)).is_err());
        let z = GridFunction::zeros(g.clone(), Side::Space);
        assert!(t.plancherel_defect(&z).is_err());
    }

    #[test]
    fn decay_hypothesis_rejects_slow_symbols() {
        let ok = |x: &[f64]| C64::new(1.0 / (1.0 + x[0].abs()), 0.0);
        assert!(check_decay_hypotheses(&ok, 1, 12.0).is_ok());
        let slow = |x: &[f64]| C64::new(1.0 / (1.0 + x[0].abs()).sqrt(), 0.0);
        assert!(matches!(
            check_decay_hypotheses(&slow, 1, 12.0),
            Err(DunklError::Hypothesis(_))
        ));
    }
}
