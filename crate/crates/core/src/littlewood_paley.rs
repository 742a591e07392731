//! Smooth dyadic windows, modulated frequency pieces `ψ(u, D_k/2^j)`, square and sup functions.

use crate::error::{invalid, DunklError, Result};
use crate::grid::{GridFunction, Side};
use crate::transform::Transform;
use num_complex::Complex64;
use std::io::Write;

type C64 = Complex64;

fn mollifier(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth monotone transition, 0 for `s <= 0` and 1 for `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = mollifier(s);
        a / (a + mollifier(1.0 - s))
    }
}

/// Radial profile equal to 1 on `[lo_in, hi_in]` and vanishing outside `(lo_out, hi_out)`.
///
/// `lo_in == 0` makes the profile a bump around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plateau {
    pub lo_out: f64,
    pub lo_in: f64,
    pub hi_in: f64,
    pub hi_out: f64,
}

impl Plateau {
    pub fn new(lo_out: f64, lo_in: f64, hi_in: f64, hi_out: f64) -> Result<Self> {
        let ok = lo_out >= 0.0 && lo_in >= lo_out && hi_in > lo_in && hi_out > hi_in;
        if !ok || (lo_in > 0.0 && lo_in == lo_out) {
            return invalid(format!(
                "plateau needs 0 <= lo_out < lo_in < hi_in < hi_out, got {lo_out} {lo_in} {hi_in} {hi_out}"
            ));
        }
        Ok(Self {
            lo_out,
            lo_in,
            hi_in,
            hi_out,
        })
    }

    pub fn ball(hi_in: f64, hi_out: f64) -> Result<Self> {
        Self::new(0.0, 0.0, hi_in, hi_out)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        if t >= self.hi_out || (self.lo_in > 0.0 && t <= self.lo_out) {
            return 0.0;
        }
        let rise = if self.lo_in > 0.0 {
            smooth_step((t - self.lo_out) / (self.lo_in - self.lo_out))
        } else {
            1.0
        };
        rise * (1.0 - smooth_step((t - self.hi_in) / (self.hi_out - self.hi_in)))
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo_out, self.hi_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// `Σ_j ψ(ξ/2^j) = 1`.
    Partition,
    /// `Σ_j ψ(ξ/2^j)² = 1`.
    Plancherel,
    /// 1 on the unit ball, supported in `|ξ| <= r`.
    CompactBump,
    /// 1 on `2/r <= |ξ| <= r/2`, supported in `1/r <= |ξ| <= r`.
    WideBump,
}

impl std::str::FromStr for Flavor {
    type Err = DunklError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "partition" => Ok(Flavor::Partition),
            "plancherel" => Ok(Flavor::Plancherel),
            "compact-bump" => Ok(Flavor::CompactBump),
            "wide-bump" => Ok(Flavor::WideBump),
            _ => Err(DunklError::Config(format!("unknown window flavor '{s}'"))),
        }
    }
}

/// A radial window `ψ` together with the finite scale set it is used on.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFamily {
    pub flavor: Flavor,
    pub r_supp: f64,
    pub scales: Vec<i32>,
    profile: Plateau,
}

pub const DEFAULT_SCALES: (i32, i32) = (-12, 12);

pub fn build_window(flavor: Flavor, r_supp: f64) -> Result<WindowFamily> {
    if !(r_supp > 1.0) || !r_supp.is_finite() {
        return invalid(format!("support parameter must exceed 1, got {r_supp}"));
    }
    let profile = match flavor {
        Flavor::Partition | Flavor::Plancherel => {
            if r_supp * r_supp <= 2.0 {
                return invalid(format!(
                    "telescoping window needs r_supp > sqrt 2, got {r_supp}"
                ));
            }
            Plateau::ball(2.0 / r_supp, r_supp)?
        }
        Flavor::CompactBump => Plateau::ball(1.0, r_supp)?,
        Flavor::WideBump => {
            if r_supp <= 2.0 {
                return invalid(format!("wide bump needs r_supp > 2, got {r_supp}"));
            }
            Plateau::new(1.0 / r_supp, 2.0 / r_supp, r_supp / 2.0, r_supp)?
        }
    };
    Ok(WindowFamily {
        flavor,
        r_supp,
        scales: (DEFAULT_SCALES.0..=DEFAULT_SCALES.1).collect(),
        profile,
    })
}

impl WindowFamily {
    pub fn with_scales(mut self, scales: Vec<i32>) -> Self {
        self.scales = scales;
        self
    }

    fn telescoped(&self, t: f64) -> f64 {
        self.profile.eval(t) - self.profile.eval(2.0 * t)
    }

    /// Base window `ψ(t)` at radius `t = |ξ|`.
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self.flavor {
            Flavor::Partition => self.telescoped(t),
            Flavor::Plancherel => {
                let v = self.telescoped(t);
                if v == 0.0 {
                    return 0.0;
                }
                let l = t.log2();
                let span = self.r_supp.log2().ceil() as i32 + 1;
                let c = l.floor() as i32;
                let mut s = 0.0;
                for i in c - span..=c + span {
                    let w = self.telescoped(t * 2f64.powi(-i));
                    s += w * w;
                }
                v / s.sqrt()
            }
            Flavor::CompactBump | Flavor::WideBump => self.profile.eval(t),
        }
    }

    /// The cutoff `η` the window is built from; for the telescoping flavors
    /// `Σ_{i<=j} ψ(t/2^i) = η(t/2^j)`.
    #[inline]
    pub fn low_pass(&self, t: f64) -> f64 {
        self.profile.eval(t)
    }

    /// `ψ(ξ/2^j)` for the radius `t = |ξ|`.
    #[inline]
    pub fn at_scale(&self, j: i32, t: f64) -> f64 {
        self.eval(t * 2f64.powi(-j))
    }

    /// Radii outside which the base window vanishes.
    pub fn support(&self) -> (f64, f64) {
        match self.flavor {
            Flavor::Partition | Flavor::Plancherel => (1.0 / self.r_supp, self.r_supp),
            _ => self.profile.support(),
        }
    }

    /// Radii on which the scale set sums (or square-sums) to one.
    pub fn covered_annulus(&self) -> Option<(f64, f64)> {
        match self.flavor {
            Flavor::Partition | Flavor::Plancherel => {
                let lo = *self.scales.iter().min()?;
                let hi = *self.scales.iter().max()?;
                let a = self.profile.hi_in;
                let inner = 2f64.powi(lo - 1) * self.r_supp;
                let outer = 2f64.powi(hi) * a;
                (inner < outer).then_some((inner, outer))
            }
            _ => None,
        }
    }

    /// Max of `|Σ_j ψ_j - 1|` (partition) or `|Σ_j ψ_j² - 1|` (plancherel) over samples
    /// in the covered annulus.
    pub fn identity_defect(&self, samples: usize) -> Result<f64> {
        let (lo, hi) = self
            .covered_annulus()
            .ok_or_else(|| DunklError::InvalidParameter("flavor has no covering identity".into()))?;
        let mut worst = 0.0f64;
        for s in 0..samples {
            let t = lo * (hi / lo).powf((s as f64 + 0.5) / samples as f64);
            let sum: f64 = self
                .scales
                .iter()
                .map(|&j| {
                    let v = self.at_scale(j, t);
                    if self.flavor == Flavor::Plancherel {
                        v * v
                    } else {
                        v
                    }
                })
                .sum();
            worst = worst.max((sum - 1.0).abs());
        }
        Ok(worst)
    }

    /// Largest window value on a dense radial sample outside the declared support.
    pub fn support_leak(&self, samples: usize) -> f64 {
        let (lo, hi) = self.support();
        let mut worst = 0.0f64;
        for s in 0..samples {
            let f = s as f64 / samples as f64;
            if lo > 0.0 {
                worst = worst.max(self.eval(lo * f).abs());
            }
            worst = worst.max(self.eval(hi * (1.0 + 4.0 * f)).abs());
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct ModulatedPiece {
    pub j: i32,
    pub u: Vec<f64>,
    pub piece: GridFunction,
}

fn freq_radii(t: &Transform) -> Vec<f64> {
    let g = t.freq_grid();
    let mut p = vec![0.0; g.dim()];
    (0..g.len())
        .map(|i| {
            g.point_into(i, &mut p);
            crate::geometry::norm(&p)
        })
        .collect()
}

fn piece_from_spectrum(
    t: &Transform,
    window: &WindowFamily,
    radii: &[f64],
    spectrum: &GridFunction,
    j: i32,
    u: &[f64],
) -> Result<GridFunction> {
    let g = t.freq_grid();
    let scale = 2f64.powi(-j);
    let mut p = vec![0.0; g.dim()];
    let mut out = spectrum.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        let w = window.at_scale(j, radii[i]);
        if w == 0.0 {
            *v = C64::new(0.0, 0.0);
            continue;
        }
        g.point_into(i, &mut p);
        let phase: f64 = u.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() * scale;
        *v *= C64::from_polar(w, phase);
    }
    t.inverse(&out)
}

fn check_u(t: &Transform, u: &[f64]) -> Result<()> {
    if u.len() != t.setup().dim() {
        return invalid("modulation vector must have the grid dimension");
    }
    Ok(())
}

/// `ψ(u, D_k/2^j) f = F^{-1}(ψ(ξ/2^j) e^{i⟨u,ξ⟩/2^j} F_k f)`.
pub fn lp_piece(
    t: &Transform,
    window: &WindowFamily,
    j: i32,
    u: &[f64],
    f: &GridFunction,
) -> Result<ModulatedPiece> {
    check_u(t, u)?;
    let spectrum = t.forward(f)?;
    let radii = freq_radii(t);
    let piece = piece_from_spectrum(t, window, &radii, &spectrum, j, u)?;
    Ok(ModulatedPiece {
        j,
        u: u.to_vec(),
        piece,
    })
}

/// All pieces over `scales`, sharing one forward transform.
pub fn lp_pieces(
    t: &Transform,
    window: &WindowFamily,
    u: &[f64],
    f: &GridFunction,
    scales: &[i32],
) -> Result<Vec<ModulatedPiece>> {
    check_u(t, u)?;
    if scales.is_empty() {
        return invalid("scale set is empty");
    }
    let spectrum = t.forward(f)?;
    let radii = freq_radii(t);
    scales
        .iter()
        .map(|&j| {
            Ok(ModulatedPiece {
                j,
                u: u.to_vec(),
                piece: piece_from_spectrum(t, window, &radii, &spectrum, j, u)?,
            })
        })
        .collect()
}

fn reduce_pieces(pieces: &[ModulatedPiece], f: &GridFunction, sup: bool) -> GridFunction {
    let mut acc = vec![0.0f64; f.len()];
    for pc in pieces {
        for (a, v) in acc.iter_mut().zip(&pc.piece.values) {
            if sup {
                *a = a.max(v.norm());
            } else {
                *a += v.norm_sqr();
            }
        }
    }
    let values = acc
        .into_iter()
        .map(|a| C64::new(if sup { a } else { a.sqrt() }, 0.0))
        .collect();
    GridFunction {
        grid: f.grid.clone(),
        values,
        side: Side::Space,
    }
}

/// `(Σ_{j∈J} |ψ(u, D_k/2^j) f|²)^{1/2}`.
pub fn square_function(
    t: &Transform,
    window: &WindowFamily,
    u: &[f64],
    f: &GridFunction,
    scales: &[i32],
) -> Result<GridFunction> {
    let pieces = lp_pieces(t, window, u, f, scales)?;
    Ok(reduce_pieces(&pieces, f, false))
}

/// `sup_{j∈J} |ψ(u, D_k/2^j) f|`.
pub fn sup_function(
    t: &Transform,
    window: &WindowFamily,
    u: &[f64],
    f: &GridFunction,
    scales: &[i32],
) -> Result<GridFunction> {
    let pieces = lp_pieces(t, window, u, f, scales)?;
    Ok(reduce_pieces(&pieces, f, true))
}

/// Fraction of `Σ |F_k f|² w` carried by frequencies with `|ξ|` outside `[lo, hi]`.
pub fn spectral_mass_outside(t: &Transform, f: &GridFunction, lo: f64, hi: f64) -> Result<f64> {
    let spec = t.forward(f)?;
    let radii = freq_radii(t);
    let w = t.freq_grid().weights();
    let mut total = 0.0;
    let mut out = 0.0;
    for ((v, &r), &wi) in spec.values.iter().zip(&radii).zip(w) {
        let m = v.norm_sqr() * wi;
        total += m;
        if r < lo || r > hi {
            out += m;
        }
    }
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(out / total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulationRow {
    pub u_norm: f64,
    pub p: f64,
    pub ratio: f64,
}

/// For each `u`, the largest `‖g_u(f)‖_p / ‖f‖_p` over the family.
pub fn modulation_growth_probe(
    t: &Transform,
    window: &WindowFamily,
    family: &[GridFunction],
    p: f64,
    u_list: &[Vec<f64>],
    scales: &[i32],
) -> Result<Vec<ModulationRow>> {
    if u_list.is_empty() {
        return invalid("u list is empty");
    }
    if family.is_empty() {
        return invalid("function family is empty");
    }
    if !(p >= 1.0) {
        return invalid(format!("exponent p must be at least 1, got {p}"));
    }
    let mut rows = Vec::with_capacity(u_list.len());
    for u in u_list {
        let mut ratio = 0.0f64;
        for f in family {
            let n = f.lp_norm(p);
            if n == 0.0 {
                continue;
            }
            let g = square_function(t, window, u, f, scales)?;
            ratio = ratio.max(g.lp_norm(p) / n);
        }
        rows.push(ModulationRow {
            u_norm: crate::geometry::norm(u),
            p,
            ratio,
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log ratio` against `log(1+|u|)`.
pub fn fitted_growth_exponent(rows: &[ModulationRow]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ratio > 0.0)
        .map(|r| ((1.0 + r.u_norm).ln(), r.ratio.ln()))
        .collect();
    if pts.len() < 2 {
        return invalid("need at least two positive rows to fit an exponent");
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("all rows share one |u|");
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Checks `ratio(u) <= c0 (1+|u|)^n` for every row.
pub fn growth_bound_holds(rows: &[ModulationRow], c0: f64, n: u32) -> bool {
    rows.iter()
        .all(|r| r.ratio <= c0 * (1.0 + r.u_norm).powi(n as i32))
}

pub fn write_modulation_csv<W: Write>(rows: &[ModulationRow], out: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["u_norm", "p", "ratio"])?;
    for r in rows {
        wr.write_record([
            format!("{:.17e}", r.u_norm),
            format!("{}", r.p),
            format!("{:.17e}", r.ratio),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ReflectionSetup;
    use crate::grid::Grid;
    use crate::kernel::dunkl_kernel_1d;

    fn modulated(g: &std::sync::Arc<Grid>, k: f64, c: f64) -> GridFunction {
        GridFunction::from_fn(g.clone(), Side::Space, |x| {
            dunkl_kernel_1d(k, x[0], c).unwrap() * (-x[0] * x[0] / 2.0).exp()
        })
    }

    #[test]
    fn partition_telescopes() {
        let w = build_window(Flavor::Partition, 2.0).unwrap();
        let s: f64 = (-10..=10).map(|j| w.at_scale(j, 1.0)).sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(w.eval(4.0), 0.0);
        assert!(w.with_scales((-10..=10).collect()).identity_defect(2000).unwrap() < 1e-12);
    }

    #[test]
    fn plancherel_squares_sum_to_one() {
        let w = build_window(Flavor::Plancherel, 2.0).unwrap();
        assert!(w.identity_defect(3000).unwrap() < 1e-12);
        let w3 = build_window(Flavor::Plancherel, 3.0).unwrap();
        assert!(w3.identity_defect(3000).unwrap() < 1e-12);
    }

    #[test]
    fn bumps_and_infeasible_parameters() {
        let wide = build_window(Flavor::WideBump, 64.0).unwrap();
        assert_eq!(wide.eval(1.0 / 32.0), 1.0);
        assert_eq!(wide.eval(32.0), 1.0);
        assert_eq!(wide.eval(64.0), 0.0);
        assert_eq!(wide.eval(1.0 / 64.0), 0.0);
        let c = build_window(Flavor::CompactBump, 2.0).unwrap();
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(2.0), 0.0);
        assert!(c.support_leak(1000) == 0.0);
        assert!(build_window(Flavor::Partition, 1.3).is_err());
        assert!(build_window(Flavor::WideBump, 1.5).is_err());
        assert!(build_window(Flavor::CompactBump, 1.0).is_err());
    }

    #[test]
    fn smooth_step_is_monotone() {
        let mut last = 0.0;
        for i in 0..=100 {
            let v = smooth_step(i as f64 / 100.0);
            assert!(v >= last);
            last = v;
        }
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pieces_reconstruct_and_localize() {
        let s = ReflectionSetup::uniform(1, 1.0).unwrap();
        let g = Grid::new(&s, 12.0, 512).unwrap();
        let t = Transform::square(g.clone());
        let f = GridFunction::from_real(g.clone(), Side::Space, |x| (-x[0] * x[0] / 2.0).exp());
        let w = build_window(Flavor::Partition, 2.0).unwrap();
        let scales: Vec<i32> = (-12..=12).collect();
        let pieces = lp_pieces(&t, &w, &[0.0], &f, &scales).unwrap();
        let mut sum = GridFunction::zeros(g.clone(), Side::Space);
        for pc in &pieces {
            for (a, b) in sum.values.iter_mut().zip(&pc.piece.values) {
                *a += b;
            }
        }
        assert!(sum.rel_l2_distance(&f).unwrap() < 1e-6);
        let f = modulated(&g, 1.0, 6.0);
        let w3 = build_window(Flavor::Partition, 3.0).unwrap();
        let pc = lp_piece(&t, &w3, 2, &[0.0], &f).unwrap();
        let leak = spectral_mass_outside(&t, &pc.piece, 4.0 / 3.0, 12.0).unwrap();
        assert!(leak < 1e-10, "{leak}");
        let far = lp_piece(&t, &w, -3, &[0.0], &f).unwrap();
        assert!(far.piece.l2_norm() < 1e-8 * f.l2_norm());
    }

    #[test]
    fn plancherel_square_function_preserves_norm() {
        let s = ReflectionSetup::uniform(1, 0.0).unwrap();
        let g = Grid::new(&s, 12.0, 512).unwrap();
        let t = Transform::square(g.clone());
        let f = modulated(&g, 0.0, 6.0);
        let w = build_window(Flavor::Plancherel, 2.0).unwrap();
        let scales: Vec<i32> = (-12..=12).collect();
        let sq = square_function(&t, &w, &[0.0], &f, &scales).unwrap();
        assert!((sq.l2_norm() - f.l2_norm()).abs() / f.l2_norm() < 1e-6);
        let sup = sup_function(&t, &w, &[0.0], &f, &scales).unwrap();
        for (a, b) in sup.values.iter().zip(&sq.values) {
            assert!(a.re <= b.re + 1e-15);
        }
        let one = sup_function(&t, &w, &[0.0], &f, &[0]).unwrap();
        let pc = lp_piece(&t, &w, 0, &[0.0], &f).unwrap();
        for (a, b) in one.values.iter().zip(&pc.piece.values) {
            assert!((a.re - b.norm()).abs() < 1e-15);
        }
    }

    #[test]
    fn exponent_fit_recovers_power_law() {
        let rows: Vec<ModulationRow> = [0.0, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&u: &f64| ModulationRow {
                u_norm: u,
                p: 4.0,
                ratio: 0.7 * (1.0 + u).powf(1.5),
            })
            .collect();
        assert!((fitted_growth_exponent(&rows).unwrap() - 1.5).abs() < 1e-12);
        assert!(growth_bound_holds(&rows, 0.7, 2));
        assert!(!growth_bound_holds(&rows, 0.7, 1));
    }
}
