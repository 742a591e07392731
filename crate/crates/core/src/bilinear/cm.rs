//! Constructive Coifman–Meyer decomposition of a bilinear symbol into
//! separable modulated pieces, and its fast application.

use super::symbol::BilinearSymbol;
use crate::error::{invalid, DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::grid::{GridFunction, Side};
use crate::littlewood_paley::{build_window, Flavor, Plateau, WindowFamily};
use crate::transform::{dot2, AxisKernel, Transform};
use num_complex::Complex64;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::io::Write;

type C64 = Complex64;

/// Scale gap between a high-frequency slot and its low-frequency partner.
pub const LOW_SHIFT: i32 = 5;
/// Largest `|j1 - j2|` kept in the diagonal branch.
pub const DIAGONAL_SPREAD: i32 = 4;
/// Centre of the one-sided boxes used when `d = 1` slots are split by sign.
pub const SECTOR_CENTRE: f64 = 1.275;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    T1,
    T2,
    T3,
}

impl Branch {
    pub fn label(&self) -> &'static str {
        match self {
            Branch::T1 => "T1",
            Branch::T2 => "T2",
            Branch::T3 => "T3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SlotKind {
    /// Annular window `ψ(ξ/2^s)`.
    Psi,
    /// Low-pass cutoff `χ(ξ/2^s)`.
    Low,
}

/// One factor of a separable block: window kind, dyadic scale and, for
/// `d = 1`, the sign sector (`0` means both signs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub kind: SlotKind,
    pub scale: i32,
    pub sector: i8,
}

impl Slot {
    pub fn label(&self) -> String {
        let base = match self.kind {
            SlotKind::Psi => "psi",
            SlotKind::Low => "low",
        };
        match self.sector {
            1 => format!("{base}+"),
            -1 => format!("{base}-"),
            _ => base.to_string(),
        }
    }

    pub fn period(&self, p: &Periods) -> f64 {
        match (self.kind, self.sector) {
            (SlotKind::Low, _) => p.low,
            (SlotKind::Psi, 0) => p.radial,
            _ => p.sector,
        }
    }

    pub fn centre(&self) -> f64 {
        self.sector as f64 * SECTOR_CENTRE
    }

    #[inline]
    fn sector_weight(&self, u0: f64) -> f64 {
        match self.sector {
            0 => 1.0,
            s => {
                if u0 * s as f64 > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Partition factor at the rescaled point `u = ξ/2^s`.
    fn split_value(&self, w: &Windows, u: &[f64]) -> f64 {
        let r = crate::geometry::norm(u);
        let base = match self.kind {
            SlotKind::Psi => w.psi.eval(r),
            SlotKind::Low => w.psi.low_pass(r),
        };
        base * self.sector_weight(u[0])
    }

    /// Reconstruction window at the rescaled point, equal to 1 where the
    /// partition factor lives.
    fn recon_value(&self, w: &Windows, u: &[f64]) -> f64 {
        let r = crate::geometry::norm(u);
        let base = match self.kind {
            SlotKind::Psi => w.psi_rec.eval(r),
            SlotKind::Low => w.low_rec.eval(r),
        };
        base * self.sector_weight(u[0])
    }

    /// Per-axis extent of the partition factor and of the reconstruction window.
    fn extents(&self, w: &Windows) -> ((f64, f64), (f64, f64)) {
        let (a, r) = match self.kind {
            SlotKind::Psi => (w.psi.support(), w.psi_rec.support()),
            SlotKind::Low => ((0.0, w.psi.support().1), w.low_rec.support()),
        };
        match self.sector {
            0 => ((-a.1, a.1), (-r.1, r.1)),
            1 => (a, r),
            _ => ((-a.1, -a.0), (-r.1, -r.0)),
        }
    }
}

/// Torus periods per slot type, in rescaled frequency units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Periods {
    pub sector: f64,
    pub radial: f64,
    pub low: f64,
}

impl Default for Periods {
    fn default() -> Self {
        Self {
            sector: 1.7,
            radial: 4.2,
            low: 10.24,
        }
    }
}

#[derive(Debug, Clone)]
struct Windows {
    psi: WindowFamily,
    psi_rec: Plateau,
    low_rec: Plateau,
    outer: Plateau,
}

impl Windows {
    fn new() -> Self {
        Self {
            psi: build_window(Flavor::Partition, 2.0).expect("fixed window"),
            psi_rec: Plateau::new(0.45, 0.5, 2.0, 2.1).expect("fixed window"),
            low_rec: Plateau::ball(4.0, 8.0).expect("fixed window"),
            outer: Plateau::new(2f64.powi(-6), 2f64.powi(-5), 32.0, 64.0).expect("fixed window"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmTerm {
    /// Flat lattice index of `n1` in `[-N, N]^d`.
    pub i1: u32,
    pub i2: u32,
    pub c: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmBlock {
    pub branch: Branch,
    /// Scale of the annular factor; the outer projection for `T2`/`T3` uses it.
    pub j: i32,
    pub slots: [Slot; 2],
    /// Sorted by `i1`.
    pub terms: Vec<CmTerm>,
}

#[derive(Debug, Clone)]
pub struct CmOptions {
    /// Quadrature nodes per axis of each torus box; `None` picks by dimension.
    pub quad_nodes: Option<usize>,
    /// Terms with `|c| < prune_rel · max|c|` are dropped.
    pub prune_rel: f64,
    /// Split `d = 1` annular slots by sign; `None` means `d == 1`.
    pub sectors: Option<bool>,
    pub periods: Periods,
    pub audit_samples: usize,
}

impl Default for CmOptions {
    fn default() -> Self {
        Self {
            quad_nodes: None,
            prune_rel: 1e-12,
            sectors: None,
            periods: Periods::default(),
            audit_samples: 36,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CMDecomposition {
    pub dim: usize,
    pub n_trunc: usize,
    pub scales: Vec<i32>,
    pub sectors: bool,
    pub periods: Periods,
    pub blocks: Vec<CmBlock>,
    /// Largest coefficient magnitude before pruning.
    pub max_abs: f64,
    windows: Windows,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayAudit {
    pub exponent: i32,
    /// `max |c| (1 + |n1| + |n2|)^L` over all stored terms.
    pub max_weighted: f64,
    /// The same maximum restricted to each outer scale.
    pub per_scale: Vec<(i32, f64)>,
    /// Least-squares slope of `-log envelope` against `log(1 + |n1| + |n2|)`,
    /// fitted on the upper half of the radii.
    pub fitted_slope: f64,
}

/// Scales `floor(log2 min|ξ|) - 1 ..= ceil(log2 max|ξ|) + 1` for the frequency grid.
pub fn default_scales(t: &Transform) -> Vec<i32> {
    let g = t.freq_grid();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for ax in g.axes() {
        for &q in &ax.nodes {
            lo = lo.min(q.abs());
            hi = hi.max(q.abs());
        }
    }
    hi *= (g.dim() as f64).sqrt();
    (lo.log2().floor() as i32 - 1..=hi.log2().ceil() as i32 + 1).collect()
}

fn check_periods(p: &Periods, w: &Windows, sectors: bool, d: usize) -> Result<()> {
    let mut slots = vec![
        Slot { kind: SlotKind::Low, scale: 0, sector: 0 },
        Slot { kind: SlotKind::Psi, scale: 0, sector: 0 },
    ];
    if sectors {
        slots.push(Slot { kind: SlotKind::Psi, scale: 0, sector: 1 });
    }
    for s in slots {
        if sectors && d == 1 && s.kind == SlotKind::Psi && s.sector == 0 {
            continue;
        }
        let per = s.period(p);
        let ((a0, a1), (r0, r1)) = s.extents(w);
        let c = s.centre();
        let fits = c - per / 2.0 <= a0 && a1 <= c + per / 2.0;
        let no_alias = per >= (a1 - r0).max(r1 - a0);
        if !(per.is_finite() && fits && no_alias) {
            return Err(DunklError::InvalidParameter(format!(
                "period {per} too small for the {} window support",
                s.label()
            )));
        }
    }
    Ok(())
}

fn block_slots(scales: &[i32], sectors: bool) -> Vec<(Branch, i32, [Slot; 2])> {
    let signs: &[i8] = if sectors { &[1, -1] } else { &[0] };
    let psi = |scale, sector| Slot { kind: SlotKind::Psi, scale, sector };
    let mut out = Vec::new();
    for &j in scales {
        for dl in -DIAGONAL_SPREAD..=DIAGONAL_SPREAD {
            for &a in signs {
                for &b in signs {
                    out.push((Branch::T1, j, [psi(j, a), psi(j + dl, b)]));
                }
            }
        }
        let low = Slot { kind: SlotKind::Low, scale: j - LOW_SHIFT, sector: 0 };
        for &a in signs {
            out.push((Branch::T2, j, [psi(j, a), low]));
            out.push((Branch::T3, j, [low, psi(j, a)]));
        }
    }
    out
}

/// Contract axis `axis` of a row-major tensor with an `nout × shape[axis]` table.
fn dft_axis(data: &[C64], shape: &[usize], axis: usize, table: &[C64], nout: usize) -> Vec<C64> {
    let outer: usize = shape[..axis].iter().product();
    let lin = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); outer * nout * inner];
    for o in 0..outer {
        for l in 0..lin {
            let src = &data[(o * lin + l) * inner..(o * lin + l + 1) * inner];
            if src.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                continue;
            }
            for n in 0..nout {
                let t = table[n * lin + l];
                let dst = &mut out[(o * nout + n) * inner..(o * nout + n + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += t * s;
                }
            }
        }
    }
    out
}

fn tensor_points(nodes: &[f64], d: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut f| {
            let mut p = vec![0.0; d];
            for i in (0..d).rev() {
                p[i] = nodes[f % n];
                f /= n;
            }
            p
        })
        .collect()
}

/// Fourier coefficients of `a(u, v) = W1(u) W2(v) m(2^{s1} u, 2^{s2} v)` on
/// the product torus, for `|n1|_∞, |n2|_∞ <= N`.
fn block_coefficients(
    m: &BilinearSymbol,
    w: &Windows,
    p: &Periods,
    slots: &[Slot; 2],
    d: usize,
    nq: usize,
    n_trunc: usize,
) -> Vec<C64> {
    let side = 2 * n_trunc + 1;
    let mut pts = Vec::with_capacity(2);
    let mut wv = Vec::with_capacity(2);
    let mut tables = Vec::with_capacity(2);
    for s in slots {
        let per = s.period(p);
        let c = s.centre();
        let nodes: Vec<f64> = (0..nq)
            .map(|i| c - per / 2.0 + (i as f64 + 0.5) * per / nq as f64)
            .collect();
        let table: Vec<C64> = (0..side)
            .flat_map(|ni| {
                let n = ni as f64 - n_trunc as f64;
                nodes
                    .iter()
                    .map(move |&q| C64::from_polar(1.0 / nq as f64, -2.0 * PI * n * q / per))
            })
            .collect();
        let tp = tensor_points(&nodes, d);
        wv.push(tp.iter().map(|u| s.split_value(w, u)).collect::<Vec<f64>>());
        pts.push(tp);
        tables.push(table);
    }
    let (m1, m2) = (pts[0].len(), pts[1].len());
    let (sc1, sc2) = (2f64.powi(slots[0].scale), 2f64.powi(slots[1].scale));
    let mut a = vec![C64::new(0.0, 0.0); m1 * m2];
    let mut xi = vec![0.0; d];
    let mut eta = vec![0.0; d];
    for i1 in 0..m1 {
        if wv[0][i1] == 0.0 {
            continue;
        }
        for (x, u) in xi.iter_mut().zip(&pts[0][i1]) {
            *x = sc1 * u;
        }
        for i2 in 0..m2 {
            if wv[1][i2] == 0.0 {
                continue;
            }
            for (y, v) in eta.iter_mut().zip(&pts[1][i2]) {
                *y = sc2 * v;
            }
            a[i1 * m2 + i2] = m.eval(&xi, &eta) * (wv[0][i1] * wv[1][i2]);
        }
    }
    let mut shape = vec![nq; 2 * d];
    let mut cur = a;
    for ax in (0..2 * d).rev() {
        let table = if ax < d { &tables[0] } else { &tables[1] };
        cur = dft_axis(&cur, &shape, ax, table, side);
        shape[ax] = side;
    }
    cur
}

/// Decompose `m` into the three branches over the scale set with default options.
pub fn cm_decompose(
    setup: &ReflectionSetup,
    m: &BilinearSymbol,
    scales: &[i32],
    n_trunc: usize,
) -> Result<CMDecomposition> {
    cm_decompose_with(setup, m, scales, n_trunc, &CmOptions::default())
}

pub fn cm_decompose_with(
    setup: &ReflectionSetup,
    m: &BilinearSymbol,
    scales: &[i32],
    n_trunc: usize,
    opts: &CmOptions,
) -> Result<CMDecomposition> {
    let d = setup.dim();
    if n_trunc == 0 {
        return invalid("truncation radius must be at least 1");
    }
    if scales.is_empty() {
        return invalid("scale set is empty");
    }
    if !(opts.prune_rel >= 0.0) {
        return invalid("pruning threshold must be non-negative");
    }
    let sectors = opts.sectors.unwrap_or(d == 1);
    if sectors && d != 1 {
        return invalid("sign sectors are only available for d = 1");
    }
    let nq = opts.quad_nodes.unwrap_or(match d {
        1 => 128,
        2 => 32,
        _ => 12,
    });
    if nq < 2 * n_trunc + 2 {
        return invalid(format!("{nq} quadrature nodes cannot resolve N = {n_trunc}"));
    }
    let windows = Windows::new();
    check_periods(&opts.periods, &windows, sectors, d)?;
    m.derivative_audit(d, opts.audit_samples.max(1), 0)?;
    let mut scales = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    let layout = block_slots(&scales, sectors);
    let coeffs: Vec<Vec<C64>> = layout
        .par_iter()
        .map(|(_, _, slots)| block_coefficients(m, &windows, &opts.periods, slots, d, nq, n_trunc))
        .collect();
    let max_abs = coeffs
        .iter()
        .flat_map(|c| c.iter().map(|v| v.norm()))
        .fold(0.0, f64::max);
    let floor = opts.prune_rel * max_abs;
    let lat = (2 * n_trunc + 1).pow(d as u32);
    let mut blocks = Vec::new();
    for ((branch, j, slots), c) in layout.into_iter().zip(coeffs) {
        let mut terms = Vec::new();
        for i1 in 0..lat {
            for i2 in 0..lat {
                let v = c[i1 * lat + i2];
                if max_abs > 0.0 && v.norm() >= floor && v.norm() > 0.0 {
                    terms.push(CmTerm { i1: i1 as u32, i2: i2 as u32, c: v });
                }
            }
        }
        if !terms.is_empty() {
            blocks.push(CmBlock { branch, j, slots, terms });
        }
    }
    Ok(CMDecomposition {
        dim: d,
        n_trunc,
        scales,
        sectors,
        periods: opts.periods,
        blocks,
        max_abs,
        windows,
    })
}

impl CMDecomposition {
    /// A decomposition without terms; applying it gives zero.
    pub fn empty(dim: usize, n_trunc: usize) -> Self {
        Self {
            dim,
            n_trunc,
            scales: Vec::new(),
            sectors: dim == 1,
            periods: Periods::default(),
            blocks: Vec::new(),
            max_abs: 0.0,
            windows: Windows::new(),
        }
    }

    pub fn term_count(&self) -> usize {
        self.blocks.iter().map(|b| b.terms.len()).sum()
    }

    fn side(&self) -> usize {
        2 * self.n_trunc + 1
    }

    /// Lattice point `n ∈ [-N, N]^d` for a flat index.
    pub fn lattice_point(&self, mut flat: u32) -> Vec<i32> {
        let side = self.side() as u32;
        let mut out = vec![0i32; self.dim];
        for i in (0..self.dim).rev() {
            out[i] = (flat % side) as i32 - self.n_trunc as i32;
            flat /= side;
        }
        out
    }

    fn flat_index(&self, n: &[i32], side: usize, n_trunc: usize) -> u32 {
        n.iter()
            .fold(0usize, |acc, &v| acc * side + (v + n_trunc as i32) as usize) as u32
    }

    /// Restriction to `|n1|_∞, |n2|_∞ <= n`; coefficients do not depend on `N`.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_trunc {
            return invalid(format!("truncation {n} outside 1..={}", self.n_trunc));
        }
        let side = 2 * n + 1;
        let mut out = self.clone();
        out.n_trunc = n;
        for b in out.blocks.iter_mut() {
            b.terms = b
                .terms
                .iter()
                .filter_map(|t| {
                    let p1 = self.lattice_point(t.i1);
                    let p2 = self.lattice_point(t.i2);
                    let inside = p1.iter().chain(&p2).all(|v| v.unsigned_abs() as usize <= n);
                    inside.then(|| CmTerm {
                        i1: self.flat_index(&p1, side, n),
                        i2: self.flat_index(&p2, side, n),
                        c: t.c,
                    })
                })
                .collect();
        }
        out.blocks.retain(|b| !b.terms.is_empty());
        Ok(out)
    }

    /// `Σ_blocks W1(ξ/2^{s1}) W2(η/2^{s2})`; equals 1 where the scale set covers `(ξ, η)`.
    pub fn partition_sum(&self, xi: &[f64], eta: &[f64]) -> f64 {
        let mut seen = std::collections::HashSet::new();
        let mut s = 0.0;
        for (_, _, slots) in block_slots(&self.scales, self.sectors) {
            if !seen.insert(slots) {
                continue;
            }
            let u: Vec<f64> = xi.iter().map(|v| v * 2f64.powi(-slots[0].scale)).collect();
            let v: Vec<f64> = eta.iter().map(|v| v * 2f64.powi(-slots[1].scale)).collect();
            s += slots[0].split_value(&self.windows, &u) * slots[1].split_value(&self.windows, &v);
        }
        s
    }

    fn phases(&self, slot: &Slot, u: &[f64]) -> Vec<C64> {
        let side = self.side();
        let per = slot.period(&self.periods);
        let lat = side.pow(self.dim as u32);
        (0..lat)
            .map(|f| {
                let n = self.lattice_point(f as u32);
                let arg: f64 = n.iter().zip(u).map(|(&a, &b)| a as f64 * b).sum();
                C64::from_polar(1.0, 2.0 * PI * arg / per)
            })
            .collect()
    }

    /// The truncated series evaluated at `(ξ, η)`.
    pub fn reconstruct(&self, xi: &[f64], eta: &[f64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for b in &self.blocks {
            let u: Vec<f64> = xi.iter().map(|v| v * 2f64.powi(-b.slots[0].scale)).collect();
            let v: Vec<f64> = eta.iter().map(|v| v * 2f64.powi(-b.slots[1].scale)).collect();
            let w1 = b.slots[0].recon_value(&self.windows, &u);
            let w2 = b.slots[1].recon_value(&self.windows, &v);
            if w1 == 0.0 || w2 == 0.0 {
                continue;
            }
            let e1 = self.phases(&b.slots[0], &u);
            let e2 = self.phases(&b.slots[1], &v);
            let s: C64 = b
                .terms
                .iter()
                .map(|t| t.c * e1[t.i1 as usize] * e2[t.i2 as usize])
                .sum();
            acc += s * (w1 * w2);
        }
        acc
    }

    pub fn decay_audit(&self, exponent: i32) -> DecayAudit {
        let mut per: BTreeMap<i32, f64> = BTreeMap::new();
        let mut env: BTreeMap<usize, f64> = BTreeMap::new();
        let mut max_weighted = 0.0f64;
        for b in &self.blocks {
            for t in &b.terms {
                let r = 1.0 + crate::geometry::norm(&to_f64(&self.lattice_point(t.i1)))
                    + crate::geometry::norm(&to_f64(&self.lattice_point(t.i2)));
                let v = t.c.norm() * r.powi(exponent);
                max_weighted = max_weighted.max(v);
                let e = per.entry(b.j).or_insert(0.0);
                *e = e.max(v);
                let slot = env.entry(r.floor() as usize).or_insert(0.0);
                *slot = slot.max(t.c.norm());
            }
        }
        let top = env.keys().next_back().copied().unwrap_or(0);
        let pts: Vec<(f64, f64)> = env
            .iter()
            .filter(|(&r, &v)| v > 0.0 && 2 * r >= top)
            .map(|(&r, &v)| ((r as f64).ln(), -v.ln()))
            .collect();
        DecayAudit {
            exponent,
            max_weighted,
            per_scale: per.into_iter().collect(),
            fitted_slope: ols_slope(&pts),
        }
    }

    /// One row per term: branch, scales, windows, lattice points, coefficient.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "branch".to_string(),
            "j".into(),
            "slot1".into(),
            "scale1".into(),
            "slot2".into(),
            "scale2".into(),
        ];
        for i in 0..self.dim {
            header.push(format!("n1_{i}"));
        }
        for i in 0..self.dim {
            header.push(format!("n2_{i}"));
        }
        header.push("re".into());
        header.push("im".into());
        w.write_record(&header)?;
        for b in &self.blocks {
            for t in &b.terms {
                let mut row = vec![
                    b.branch.label().to_string(),
                    b.j.to_string(),
                    b.slots[0].label(),
                    b.slots[0].scale.to_string(),
                    b.slots[1].label(),
                    b.slots[1].scale.to_string(),
                ];
                row.extend(self.lattice_point(t.i1).iter().map(|v| v.to_string()));
                row.extend(self.lattice_point(t.i2).iter().map(|v| v.to_string()));
                row.push(format!("{:e}", t.c.re));
                row.push(format!("{:e}", t.c.im));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn to_f64(v: &[i32]) -> Vec<f64> {
    v.iter().map(|&a| a as f64).collect()
}

fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Input-adaptive pruning: a term is kept when
/// `|c| · ‖W̃1 F f1‖₁ · ‖W̃2 F f2‖₁ >= tau · reference`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContributionPruning {
    pub tau: f64,
    pub reference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct PieceKey {
    input: u8,
    slot: Slot,
    n: u32,
}

struct Engine<'a> {
    t: &'a Transform,
    dec: &'a CMDecomposition,
    spectra: [&'a [C64]; 2],
    pieces: HashMap<PieceKey, Vec<C64>>,
    norms: HashMap<(u8, Slot), f64>,
}

impl<'a> Engine<'a> {
    fn rescaled(&self, slot: &Slot, q: usize, p: &mut [f64]) {
        self.t.freq_grid().point_into(q, p);
        let s = 2f64.powi(-slot.scale);
        for v in p.iter_mut() {
            *v *= s;
        }
    }

    fn slot_norm(&mut self, input: u8, slot: Slot) -> f64 {
        if let Some(&v) = self.norms.get(&(input, slot)) {
            return v;
        }
        let g = self.t.freq_grid();
        let w = g.weights();
        let spec = self.spectra[input as usize];
        let mut p = vec![0.0; g.dim()];
        let mut s = 0.0;
        for q in 0..g.len() {
            self.rescaled(&slot, q, &mut p);
            let r = slot.recon_value(&self.dec.windows, &p);
            if r != 0.0 {
                s += r * spec[q].norm() * w[q];
            }
        }
        self.norms.insert((input, slot), s);
        s
    }

    fn ensure_piece(&mut self, key: PieceKey) {
        if self.pieces.contains_key(&key) {
            return;
        }
        let n = self.dec.lattice_point(key.n);
        let v = if self.dec.dim == 1 {
            self.piece_1d(&key.slot, n[0], self.spectra[key.input as usize])
        } else {
            self.piece_nd(&key.slot, &n, self.spectra[key.input as usize])
        };
        self.pieces.insert(key, v);
    }

    fn piece_1d(&self, slot: &Slot, n: i32, spec: &[C64]) -> Vec<C64> {
        let ax = self.t.axis_kernel(0);
        let w = &self.dec.windows;
        let s = 2f64.powi(-slot.scale);
        let per = slot.period(&self.dec.periods);
        let (lo_r, hi_r) = match slot.kind {
            SlotKind::Psi => w.psi_rec.support(),
            SlotKind::Low => (0.0, w.low_rec.support().1),
        };
        let lo = ax.qs.partition_point(|&q| q * s <= lo_r);
        let hi = ax.qs.partition_point(|&q| q * s < hi_r);
        let (plus, minus) = match slot.sector {
            0 => (1.0, 1.0),
            1 => (1.0, 0.0),
            _ => (0.0, 1.0),
        };
        let nq = ax.nq;
        restricted_inverse(ax, lo, hi, |i| {
            let u = ax.qs[i] * s;
            let r = Slot { sector: 0, ..*slot }.recon_value(w, &[u]);
            let ph = C64::from_polar(1.0, 2.0 * PI * n as f64 * u / per);
            (
                spec[nq + i] * ph * (r * plus),
                spec[nq - 1 - i] * ph.conj() * (r * minus),
            )
        })
    }

    fn piece_nd(&self, slot: &Slot, n: &[i32], spec: &[C64]) -> Vec<C64> {
        let g = self.t.freq_grid();
        let per = slot.period(&self.dec.periods);
        let mut p = vec![0.0; g.dim()];
        let vals: Vec<C64> = (0..g.len())
            .map(|q| {
                self.rescaled(slot, q, &mut p);
                let r = slot.recon_value(&self.dec.windows, &p);
                if r == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let arg: f64 = n.iter().zip(&p).map(|(&a, &b)| a as f64 * b).sum();
                spec[q] * C64::from_polar(r, 2.0 * PI * arg / per)
            })
            .collect();
        self.t.inverse_values(&vals)
    }

    /// `F^{-1}(Φ(ξ/2^j) F b)`.
    fn project(&self, buf: &[C64], j: i32) -> Vec<C64> {
        let spec = self.t.forward_values(buf);
        let outer = self.dec.windows.outer;
        let s = 2f64.powi(-j);
        if self.dec.dim == 1 {
            let ax = self.t.axis_kernel(0);
            let lo = ax.qs.partition_point(|&q| q * s <= outer.lo_out);
            let hi = ax.qs.partition_point(|&q| q * s < outer.hi_out);
            let nq = ax.nq;
            return restricted_inverse(ax, lo, hi, |i| {
                let r = outer.eval(ax.qs[i] * s);
                (spec[nq + i] * r, spec[nq - 1 - i] * r)
            });
        }
        let g = self.t.freq_grid();
        let mut p = vec![0.0; g.dim()];
        let vals: Vec<C64> = (0..g.len())
            .map(|q| {
                g.point_into(q, &mut p);
                spec[q] * outer.eval(crate::geometry::norm(&p) * s)
            })
            .collect();
        self.t.inverse_values(&vals)
    }
}

/// Inverse transform along a single axis of a spectrum that vanishes outside
/// the positive-half index range `lo..hi`; `g(i)` returns the values at `±ξ_i`.
fn restricted_inverse(ax: &AxisKernel, lo: usize, hi: usize, g: impl Fn(usize) -> (C64, C64)) -> Vec<C64> {
    let nx = ax.nx;
    let mut out = vec![C64::new(0.0, 0.0); 2 * nx];
    if hi <= lo {
        return out;
    }
    let len = hi - lo;
    let mut er = vec![0.0; len];
    let mut ei = vec![0.0; len];
    let mut or = vec![0.0; len];
    let mut oi = vec![0.0; len];
    for i in lo..hi {
        let (p, m) = g(i);
        let w = ax.wq[i];
        er[i - lo] = (p.re + m.re) * w;
        ei[i - lo] = (p.im + m.im) * w;
        or[i - lo] = (p.re - m.re) * w;
        oi[i - lo] = (p.im - m.im) * w;
    }
    for j in 0..nx {
        let a = dot2(&ax.ct_row(j)[lo..hi], &er, &ei);
        let b = dot2(&ax.st_row(j)[lo..hi], &or, &oi);
        out[nx + j] = C64::new(a.0 - b.1, a.1 + b.0);
        out[nx - 1 - j] = C64::new(a.0 + b.1, a.1 - b.0);
    }
    out
}

/// Separable synthesis `Σ c · P1_{n1} · P2_{n2}` with the outer projection on `T2`/`T3`.
pub fn cm_apply(
    t: &Transform,
    dec: &CMDecomposition,
    f1: &GridFunction,
    f2: &GridFunction,
) -> Result<GridFunction> {
    apply_impl(t, dec, f1, f2, None)
}

/// [`cm_apply`] restricted to the terms whose estimated contribution clears the threshold.
pub fn cm_apply_pruned(
    t: &Transform,
    dec: &CMDecomposition,
    f1: &GridFunction,
    f2: &GridFunction,
    pruning: ContributionPruning,
) -> Result<GridFunction> {
    apply_impl(t, dec, f1, f2, Some(pruning))
}

fn apply_impl(
    t: &Transform,
    dec: &CMDecomposition,
    f1: &GridFunction,
    f2: &GridFunction,
    pruning: Option<ContributionPruning>,
) -> Result<GridFunction> {
    f1.same_grid(f2)?;
    if f1.side != Side::Space || f2.side != Side::Space {
        return invalid("bilinear inputs must be space-side");
    }
    if dec.dim != t.setup().dim() || !f1.grid.compatible(t.space_grid()) {
        return Err(DunklError::GridMismatch(
            "decomposition, transform and inputs disagree".into(),
        ));
    }
    let s1 = t.forward(f1)?;
    let s2 = t.forward(f2)?;
    let vals = apply_spectra(t, dec, &s1.values, &s2.values, pruning);
    GridFunction::new(t.space_grid().clone(), vals, Side::Space)
}

/// Synthesis from precomputed spectra of the two inputs.
pub fn apply_spectra(
    t: &Transform,
    dec: &CMDecomposition,
    s1: &[C64],
    s2: &[C64],
    pruning: Option<ContributionPruning>,
) -> Vec<C64> {
    let nx = t.space_grid().len();
    let mut out = vec![C64::new(0.0, 0.0); nx];
    let mut proj: BTreeMap<i32, Vec<C64>> = BTreeMap::new();
    let mut eng = Engine {
        t,
        dec,
        spectra: [s1, s2],
        pieces: HashMap::new(),
        norms: HashMap::new(),
    };
    let mut inner = vec![C64::new(0.0, 0.0); nx];
    for b in &dec.blocks {
        let floor = match pruning {
            Some(p) => {
                let a = eng.slot_norm(0, b.slots[0]) * eng.slot_norm(1, b.slots[1]);
                if a == 0.0 {
                    continue;
                }
                p.tau * p.reference / a
            }
            None => 0.0,
        };
        let kept: Vec<&CmTerm> = b.terms.iter().filter(|c| c.c.norm() >= floor).collect();
        if kept.is_empty() {
            continue;
        }
        for c in &kept {
            eng.ensure_piece(PieceKey { input: 0, slot: b.slots[0], n: c.i1 });
            eng.ensure_piece(PieceKey { input: 1, slot: b.slots[1], n: c.i2 });
        }
        let target = match b.branch {
            Branch::T1 => &mut out,
            _ => proj.entry(b.j).or_insert_with(|| vec![C64::new(0.0, 0.0); nx]),
        };
        let mut k = 0;
        while k < kept.len() {
            let i1 = kept[k].i1;
            inner.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            while k < kept.len() && kept[k].i1 == i1 {
                let p2 = &eng.pieces[&PieceKey { input: 1, slot: b.slots[1], n: kept[k].i2 }];
                let c = kept[k].c;
                for (v, p) in inner.iter_mut().zip(p2) {
                    *v += c * p;
                }
                k += 1;
            }
            let p1 = &eng.pieces[&PieceKey { input: 0, slot: b.slots[0], n: i1 }];
            for ((o, p), v) in target.iter_mut().zip(p1).zip(&inner) {
                *o += p * v;
            }
        }
    }
    for (j, buf) in proj {
        let p = eng.project(&buf, j);
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Number of pieces and terms `apply_spectra` would touch under a pruning rule.
pub fn pruned_term_count(
    t: &Transform,
    dec: &CMDecomposition,
    s1: &[C64],
    s2: &[C64],
    pruning: ContributionPruning,
) -> usize {
    let mut eng = Engine {
        t,
        dec,
        spectra: [s1, s2],
        pieces: HashMap::new(),
        norms: HashMap::new(),
    };
    let mut count = 0;
    for b in &dec.blocks {
        let a = eng.slot_norm(0, b.slots[0]) * eng.slot_norm(1, b.slots[1]);
        if a == 0.0 {
            continue;
        }
        let floor = pruning.tau * pruning.reference / a;
        count += b.terms.iter().filter(|c| c.c.norm() >= floor).count();
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::direct::bilinear_apply_direct;
    use crate::grid::Grid;

    fn setup1() -> ReflectionSetup {
        ReflectionSetup::uniform(1, 1.0).unwrap()
    }

    #[test]
    fn period_validation() {
        let s = setup1();
        let mut o = CmOptions::default();
        o.periods.low = 9.0;
        assert!(cm_decompose_with(&s, &BilinearSymbol::product_ratio(), &[0], 2, &o).is_err());
        let mut o = CmOptions::default();
        o.periods.sector = 1.5;
        assert!(cm_decompose_with(&s, &BilinearSymbol::product_ratio(), &[0], 2, &o).is_err());
        assert!(cm_decompose(&s, &BilinearSymbol::product_ratio(), &[0], 0).is_err());
    }

    #[test]
    fn partition_sums_to_one_on_covered_region() {
        let s = setup1();
        let dec = cm_decompose(&s, &BilinearSymbol::one(), &(-6..=6).collect::<Vec<_>>(), 1).unwrap();
        for &(x, y) in &[(1.0, 0.3), (-2.5, 4.0), (0.7, -0.7), (3.0, 0.01), (-0.2, -9.0)] {
            let v = dec.partition_sum(&[x], &[y]);
            assert!((v - 1.0).abs() < 1e-12, "{x} {y} {v}");
        }
    }

    #[test]
    fn reconstruction_improves_with_truncation() {
        let s = setup1();
        let m = BilinearSymbol::product_ratio();
        let full = cm_decompose(&s, &m, &(-4..=4).collect::<Vec<_>>(), 8).unwrap();
        let mut prev = f64::INFINITY;
        for n in [2, 4, 8] {
            let dec = full.truncated(n).unwrap();
            let mut err = 0.0f64;
            for i in 0..40 {
                let th = 2.0 * PI * (i as f64 + 0.3) / 40.0;
                let (x, y) = (1.5 * th.cos(), 1.5 * th.sin());
                let want = m.eval(&[x], &[y]);
                err = err.max((dec.reconstruct(&[x], &[y]) - want).norm());
            }
            assert!(err < prev, "n={n} err={err}");
            prev = err;
        }
        assert!(prev < 1e-2, "{prev}");
    }

    #[test]
    fn single_block_symbol_touches_few_scales() {
        let s = setup1();
        let m = BilinearSymbol::block_bump(1);
        let dec = cm_decompose(&s, &m, &(-6..=6).collect::<Vec<_>>(), 4).unwrap();
        let js: std::collections::BTreeSet<i32> = dec.blocks.iter().map(|b| b.j).collect();
        assert!(js.len() <= 4 && js.iter().all(|j| (j - 1).abs() <= 2), "{js:?}");
    }

    #[test]
    fn empty_decomposition_applies_to_zero() {
        let s = setup1();
        let g = Grid::new(&s, 8.0, 64).unwrap();
        let t = Transform::square(g.clone());
        let f = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0]).exp());
        let out = cm_apply(&t, &CMDecomposition::empty(1, 4), &f, &f).unwrap();
        assert_eq!(out.sup_norm(), 0.0);
        let z = cm_decompose(&s, &BilinearSymbol::zero(), &[0, 1], 2).unwrap();
        assert_eq!(z.term_count(), 0);
    }

    #[test]
    fn restricted_inverse_matches_full_inverse() {
        let s = setup1();
        let g = Grid::new(&s, 10.0, 128).unwrap();
        let t = Transform::square(g.clone());
        let spec: Vec<C64> = g
            .points()
            .iter()
            .map(|p| {
                let r = p[0].abs();
                if (2.0..5.0).contains(&r) {
                    C64::new(p[0].sin(), p[0] * 0.1)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let full = t.inverse_values(&spec);
        let ax = t.axis_kernel(0);
        let lo = ax.qs.partition_point(|&q| q < 2.0);
        let hi = ax.qs.partition_point(|&q| q < 5.0);
        let nq = ax.nq;
        let part = restricted_inverse(ax, lo, hi, |i| (spec[nq + i], spec[nq - 1 - i]));
        for (a, b) in full.iter().zip(&part) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn matches_direct_apply_on_modulated_pair() {
        let s = setup1();
        let g = Grid::new(&s, 12.0, 256).unwrap();
        let t = Transform::square(g.clone());
        let f1 = GridFunction::from_fn(g.clone(), Side::Space, |x| {
            crate::kernel::dunkl_kernel_1d(1.0, x[0], 3.0).unwrap() * (-x[0] * x[0] / 2.0).exp()
        });
        let f2 = GridFunction::from_real(g, Side::Space, |x| (-(x[0] - 1.0).powi(2) / 2.0).exp() * x[0].cos());
        let m = BilinearSymbol::product_ratio();
        let direct = bilinear_apply_direct(&t, &m, &f1, &f2).unwrap();
        let dec = cm_decompose(&s, &m, &default_scales(&t), 8).unwrap();
        let fast = cm_apply(&t, &dec, &f1, &f2).unwrap();
        let err = fast.rel_l2_distance(&direct).unwrap();
        assert!(err < 1e-2, "{err}");
    }
}
