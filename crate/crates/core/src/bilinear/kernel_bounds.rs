//! The trilinear kernel `K(x, y1, y2)` of a bilinear multiplier, its size and
//! smoothness estimates, and the support check for products of band-limited pieces.

use super::symbol::BilinearSymbol;
use crate::error::{invalid, DunklError, Result};
use crate::geometry::{ball_measure, orbit_distance, ReflectionSetup};
use crate::grid::{Grid, GridFunction, Side};
use crate::kernel::rank_one;
use crate::littlewood_paley::{build_window, spectral_mass_outside, Flavor, WindowFamily};
use crate::transform::{dot2, Transform};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

type C64 = Complex64;

/// Spectral mass allowed outside the declared supports of the inputs.
pub const SUPPORT_PRECONDITION: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SupportCheckReport {
    pub j: i32,
    /// Spectral mass of `f` outside `2^{j+1}/5 <= |ξ| <= 5·2^{j-1}`.
    pub pre_f: f64,
    /// Spectral mass of `g` outside `|η| <= 2^{j-2}`.
    pub pre_g: f64,
    /// Spectral mass of `f·g` outside `2^{j-5} <= |ξ| <= 2^{j+5}`.
    pub outside: f64,
}

/// The spectrum of the product `f·g` is the Dunkl convolution of the two
/// spectra; measure how much of it escapes the annulus `2^{j-5} <= |ξ| <= 2^{j+5}`.
pub fn convolution_support_check(
    t: &Transform,
    f: &GridFunction,
    g: &GridFunction,
    j: i32,
) -> Result<SupportCheckReport> {
    f.same_grid(g)?;
    let s = 2f64.powi(j);
    let pre_f = spectral_mass_outside(t, f, 0.4 * s, 2.5 * s)?;
    let pre_g = spectral_mass_outside(t, g, 0.0, 0.25 * s)?;
    for (name, v) in [("f", pre_f), ("g", pre_g)] {
        if v > SUPPORT_PRECONDITION {
            return Err(DunklError::Hypothesis(format!(
                "spectrum of {name} leaves its declared support (mass {v:e})"
            )));
        }
    }
    let prod = f.zip_with(g, |a, b| a * b)?;
    let outside = spectral_mass_outside(t, &prod, s / 32.0, 32.0 * s)?;
    Ok(SupportCheckReport { j, pre_f, pre_g, outside })
}

/// A pair satisfying the hypotheses of [`convolution_support_check`] at scale `j`,
/// built from smooth radial spectra.
pub fn support_test_pair(t: &Transform, j: i32) -> Result<(GridFunction, GridFunction)> {
    use crate::littlewood_paley::Plateau;
    let s = 2f64.powi(-j);
    let ann = Plateau::new(0.4, 1.0, 1.5, 2.5)?;
    let ball = Plateau::ball(0.02, 0.25)?;
    let freq = t.freq_grid().clone();
    let fa = GridFunction::from_real(freq.clone(), Side::Frequency, |p| {
        ann.eval(crate::geometry::norm(p) * s) * (1.0 + 0.3 * p[0] * s)
    });
    let fb = GridFunction::from_real(freq, Side::Frequency, |p| ball.eval(crate::geometry::norm(p) * s));
    Ok((t.inverse(&fa)?, t.inverse(&fb)?))
}

/// Frequency quadrature used for each dyadic piece `K_j`.
///
/// Piece `j` is evaluated in rescaled variables on the box `[-4, 4]^{2d}`
/// with `n_j = refine · min(max_nodes, oversample · 2^j · reach + min_nodes)`
/// nodes per axis; scales with `2^j (d_G(x,y1) + d_G(x,y2)) > decay_cutoff`
/// are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelQuadrature {
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub oversample: f64,
    /// Largest `|x|_∞ + max(|y1|_∞, |y2|_∞)` the quadrature must resolve.
    pub reach: f64,
    pub decay_cutoff: f64,
    pub refine: usize,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        Self {
            min_nodes: 64,
            max_nodes: 2048,
            oversample: 6.0,
            reach: 3.0,
            decay_cutoff: 64.0,
            refine: 1,
        }
    }
}

/// Radius of the box carrying the rescaled piece `φ`.
const PIECE_BOX: f64 = 4.0;

#[derive(Debug)]
struct ScalePiece {
    reach: f64,
    grid: Arc<Grid>,
    real: Option<Vec<f64>>,
    cplx: Option<Vec<C64>>,
}

/// Evaluates `K = Σ_{j∈J} K_j` for one symbol, caching the sampled pieces.
#[derive(Debug)]
pub struct KernelEvaluator {
    setup: ReflectionSetup,
    m: BilinearSymbol,
    quad: KernelQuadrature,
    scales: Vec<i32>,
    phi: WindowFamily,
    cache: Mutex<HashMap<i32, Arc<ScalePiece>>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: C64,
    /// Scales dropped by the decay cutoff.
    pub skipped: usize,
}

impl KernelEvaluator {
    pub fn new(setup: &ReflectionSetup, m: &BilinearSymbol, scales: Vec<i32>, quad: KernelQuadrature) -> Result<Self> {
        if scales.is_empty() {
            return invalid("scale set is empty");
        }
        if quad.min_nodes < 8 || quad.refine == 0 || !(quad.oversample > 0.0) || !(quad.reach > 0.0) {
            return invalid("kernel quadrature parameters out of range");
        }
        Ok(Self {
            setup: setup.clone(),
            m: m.clone(),
            quad,
            scales,
            phi: build_window(Flavor::Partition, 4.0)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn setup(&self) -> &ReflectionSetup {
        &self.setup
    }

    fn piece(&self, j: i32) -> Result<Arc<ScalePiece>> {
        if let Some(p) = self.cache.lock().expect("cache lock").get(&j) {
            return Ok(p.clone());
        }
        let q = &self.quad;
        let d = self.setup.dim();
        let want = q.oversample * 2f64.powi(j) * q.reach + q.min_nodes as f64;
        let base = (want.ceil() as usize).min(q.max_nodes);
        let base = base + base % 2;
        let reach = (base as f64 - q.min_nodes as f64).max(0.0) / (q.oversample * 2f64.powi(j));
        let n = base * q.refine;
        if n.checked_pow(2 * d as u32).is_none_or(|v| v > 1 << 28) {
            return Err(DunklError::InvalidParameter(format!(
                "kernel piece {j} needs {n} nodes per axis in dimension {d}"
            )));
        }
        let grid = Grid::new(&self.setup, PIECE_BOX, n)?;
        let pts = grid.points();
        let scale = 2f64.powi(j);
        let rows: Vec<Vec<C64>> = pts
            .par_iter()
            .map(|xi| {
                let mut u = vec![0.0; d];
                let mut v = vec![0.0; d];
                pts.iter()
                    .map(|eta| {
                        let r = (crate::geometry::norm(xi).powi(2) + crate::geometry::norm(eta).powi(2)).sqrt();
                        let w = self.phi.eval(r);
                        if w == 0.0 {
                            return C64::new(0.0, 0.0);
                        }
                        for i in 0..d {
                            u[i] = scale * xi[i];
                            v[i] = scale * eta[i];
                        }
                        self.m.eval(&u, &v) * w
                    })
                    .collect()
            })
            .collect();
        let flat: Vec<C64> = rows.into_iter().flatten().collect();
        if flat.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(DunklError::InvalidParameter(format!(
                "symbol '{}' not finite on kernel piece {j}",
                self.m.name()
            )));
        }
        let piece = if self.m.is_real() {
            ScalePiece { reach, grid, real: Some(flat.iter().map(|v| v.re).collect()), cplx: None }
        } else {
            ScalePiece { reach, grid, real: None, cplx: Some(flat) }
        };
        let piece = Arc::new(piece);
        self.cache.lock().expect("cache lock").insert(j, piece.clone());
        Ok(piece)
    }

    /// `K(x, y1, y2)` truncated to the evaluator's scale set.
    pub fn eval(&self, x: &[f64], y1: &[f64], y2: &[f64]) -> Result<KernelValue> {
        self.setup.check_point(x)?;
        self.setup.check_point(y1)?;
        self.setup.check_point(y2)?;
        let sep = orbit_distance(x, y1) + orbit_distance(x, y2);
        if !(sep > 0.0) {
            return Err(DunklError::Degenerate("triple lies on the orbit diagonal".into()));
        }
        let inf = |p: &[f64]| p.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let span = inf(x) + inf(y1).max(inf(y2));
        let d = self.setup.dim();
        let k = self.setup.k();
        let dk = self.setup.d_k();
        let mut total = C64::new(0.0, 0.0);
        let mut skipped = 0;
        for &j in &self.scales {
            let s = 2f64.powi(j);
            if s * sep > self.quad.decay_cutoff {
                skipped += 1;
                continue;
            }
            let piece = self.piece(j)?;
            if span > piece.reach * (1.0 + 1e-12) {
                return Err(DunklError::Degenerate(format!(
                    "triple too close to the orbit diagonal: scale {j} cannot be resolved"
                )));
            }
            let g = &piece.grid;
            let n = g.len();
            let w = g.weights();
            let mut a = vec![C64::new(0.0, 0.0); n];
            let mut br = vec![0.0; n];
            let mut bi = vec![0.0; n];
            let mut p = vec![0.0; d];
            for q in 0..n {
                g.point_into(q, &mut p);
                let mut e1 = C64::new(w[q], 0.0);
                let mut e2 = C64::new(w[q], 0.0);
                for i in 0..d {
                    let ex = rank_one(k[i], p[i] * s * x[i]);
                    e1 *= ex * rank_one(k[i], p[i] * s * y1[i]).conj();
                    e2 *= ex * rank_one(k[i], p[i] * s * y2[i]).conj();
                }
                a[q] = e1;
                br[q] = e2.re;
                bi[q] = e2.im;
            }
            let mut acc = C64::new(0.0, 0.0);
            if let Some(m) = &piece.real {
                for r in 0..n {
                    let (u, v) = dot2(&m[r * n..(r + 1) * n], &br, &bi);
                    acc += a[r] * C64::new(u, v);
                }
            } else if let Some(m) = &piece.cplx {
                for r in 0..n {
                    let row = &m[r * n..(r + 1) * n];
                    let inner: C64 = row.iter().zip(br.iter().zip(&bi)).map(|(c, (u, v))| c * C64::new(*u, *v)).sum();
                    acc += a[r] * inner;
                }
            }
            total += acc * 2f64.powf(2.0 * j as f64 * dk);
        }
        Ok(KernelValue { value: total, skipped })
    }
}

/// `K(x, y1, y2)` with the default quadrature.
pub fn kernel_eval(
    setup: &ReflectionSetup,
    m: &BilinearSymbol,
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
    scales: &[i32],
) -> Result<C64> {
    let ev = KernelEvaluator::new(setup, m, scales.to_vec(), KernelQuadrature::default())?;
    Ok(ev.eval(x, y1, y2)?.value)
}

/// Which argument a smoothness estimate moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moved {
    Y2,
    Y1,
    X,
}

/// `[μ(B(x, d_G(x,y1))) + μ(B(x, d_G(x,y2)))]^{-2}`.
pub fn volume_factor(setup: &ReflectionSetup, x: &[f64], y1: &[f64], y2: &[f64]) -> f64 {
    let v = ball_measure(setup, x, orbit_distance(x, y1)) + ball_measure(setup, x, orbit_distance(x, y2));
    1.0 / (v * v)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    crate::geometry::dist2(a, b).sqrt()
}

/// Right side of the size estimate, without its constant.
pub fn size_bound(setup: &ReflectionSetup, x: &[f64], y1: &[f64], y2: &[f64]) -> f64 {
    volume_factor(setup, x, y1, y2) * (orbit_distance(x, y1) + orbit_distance(x, y2))
        / (euclid(x, y1) + euclid(x, y2))
}

/// `(|K(moved) - K(original)|, bound)` for one smoothness estimate; rejects moves
/// of length at least `max(d_G(x,y1), d_G(x,y2)) / 2`.
pub fn smoothness_pair(
    ev: &KernelEvaluator,
    x: &[f64],
    y1: &[f64],
    y2: &[f64],
    which: Moved,
    to: &[f64],
) -> Result<(f64, f64)> {
    let setup = ev.setup();
    let from = match which {
        Moved::Y2 => y2,
        Moved::Y1 => y1,
        Moved::X => x,
    };
    let delta = euclid(from, to);
    let limit = 0.5 * orbit_distance(x, y1).max(orbit_distance(x, y2));
    if !(delta < limit) {
        return Err(DunklError::InvalidParameter(format!(
            "move of length {delta} is not admissible (limit {limit})"
        )));
    }
    let k0 = ev.eval(x, y1, y2)?.value;
    let k1 = match which {
        Moved::Y2 => ev.eval(x, y1, to)?,
        Moved::Y1 => ev.eval(x, to, y2)?,
        Moved::X => ev.eval(to, y1, y2)?,
    }
    .value;
    let rhs = volume_factor(setup, x, y1, y2) * delta / euclid(x, y1).max(euclid(x, y2));
    Ok(((k1 - k0).norm(), rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec {
    pub count: usize,
    /// Points are drawn from `[-half_width, half_width]^d`.
    pub half_width: f64,
    /// Lower bound on `d_G(x,y1) + d_G(x,y2)`.
    pub min_separation: f64,
    /// Moves have length `fraction · max(d_G)/2`, `fraction < 1`.
    pub perturb_fraction: f64,
    pub scales: Vec<i32>,
    pub quadrature: KernelQuadrature,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            count: 200,
            half_width: 1.0,
            min_separation: 0.75,
            perturb_fraction: 0.5,
            scales: (-8..=8).collect(),
            quadrature: KernelQuadrature::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub x: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    /// Size, then smoothness in `y2`, `y1` and `x`.
    pub lhs: [f64; 4],
    pub rhs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimateReport {
    pub samples: Vec<KernelSample>,
    pub max_ratio: [f64; 4],
    pub finite: bool,
    /// Max ratios on the refined frequency quadrature, when requested.
    pub refined_max_ratio: Option<[f64; 4]>,
    /// Every refined max ratio within a factor 2 of the base one.
    pub refinement_stable: Option<bool>,
}

pub const INEQUALITY_NAMES: [&str; 4] = ["size", "smooth_y2", "smooth_y1", "smooth_x"];

fn draw_samples(setup: &ReflectionSetup, spec: &SampleSpec) -> Vec<[Vec<f64>; 6]> {
    let d = setup.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    let mut tries = 0;
    while out.len() < spec.count && tries < 1000 * spec.count.max(1) {
        tries += 1;
        let mut pt = || -> Vec<f64> { (0..d).map(|_| rng.gen_range(-spec.half_width..spec.half_width)).collect() };
        let (x, y1, y2) = (pt(), pt(), pt());
        let d1 = orbit_distance(&x, &y1);
        let d2 = orbit_distance(&x, &y2);
        if d1 + d2 < spec.min_separation || d1.min(d2) < 0.05 * spec.min_separation {
            continue;
        }
        let len = spec.perturb_fraction * 0.5 * d1.max(d2);
        let mut dir = || -> Vec<f64> {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = crate::geometry::norm(&v).max(1e-300);
            v.into_iter().map(|c| c * len / n).collect()
        };
        let shift = |p: &[f64], v: Vec<f64>| -> Vec<f64> { p.iter().zip(v).map(|(a, b)| a + b).collect() };
        let y2p = shift(&y2, dir());
        let y1p = shift(&y1, dir());
        let xp = shift(&x, dir());
        out.push([x, y1, y2, y2p, y1p, xp]);
    }
    out
}

fn evaluate_samples(
    setup: &ReflectionSetup,
    m: &BilinearSymbol,
    spec: &SampleSpec,
    quad: KernelQuadrature,
) -> Result<(Vec<KernelSample>, [f64; 4])> {
    let ev = KernelEvaluator::new(setup, m, spec.scales.clone(), quad)?;
    let draws = draw_samples(setup, spec);
    let rows: Vec<Result<KernelSample>> = draws
        .par_iter()
        .map(|[x, y1, y2, y2p, y1p, xp]| {
            let k0 = ev.eval(x, y1, y2)?.value.norm();
            let s2 = smoothness_pair(&ev, x, y1, y2, Moved::Y2, y2p)?;
            let s1 = smoothness_pair(&ev, x, y1, y2, Moved::Y1, y1p)?;
            let sx = smoothness_pair(&ev, x, y1, y2, Moved::X, xp)?;
            Ok(KernelSample {
                x: x.clone(),
                y1: y1.clone(),
                y2: y2.clone(),
                lhs: [k0, s2.0, s1.0, sx.0],
                rhs: [size_bound(setup, x, y1, y2), s2.1, s1.1, sx.1],
            })
        })
        .collect();
    let samples = rows.into_iter().collect::<Result<Vec<_>>>()?;
    if samples.is_empty() {
        return Err(DunklError::Degenerate("no admissible sample triples".into()));
    }
    let mut max = [0.0f64; 4];
    for s in &samples {
        for (m, (l, r)) in max.iter_mut().zip(s.lhs.iter().zip(&s.rhs)) {
            *m = m.max(l / r);
        }
    }
    Ok((samples, max))
}

/// Ratios `lhs / rhs` of the size and the three smoothness estimates over a
/// random admissible sample; `refine` also repeats the run on a frequency
/// quadrature twice as fine.
pub fn kernel_bound_report(
    setup: &ReflectionSetup,
    m: &BilinearSymbol,
    spec: &SampleSpec,
    refine: bool,
) -> Result<KernelEstimateReport> {
    if spec.count == 0 {
        return Err(DunklError::Degenerate("empty sample request".into()));
    }
    if !(spec.perturb_fraction > 0.0 && spec.perturb_fraction < 1.0) {
        return invalid("perturbation fraction must lie in (0, 1)");
    }
    let (samples, max_ratio) = evaluate_samples(setup, m, spec, spec.quadrature.clone())?;
    let finite = max_ratio.iter().all(|v| v.is_finite());
    let (refined_max_ratio, refinement_stable) = if refine {
        let mut q = spec.quadrature.clone();
        q.refine *= 2;
        let (_, r) = evaluate_samples(setup, m, spec, q)?;
        let stable = (0..4).all(|i| within_factor(max_ratio[i], r[i], 2.0));
        (Some(r), Some(stable))
    } else {
        (None, None)
    };
    Ok(KernelEstimateReport {
        samples,
        max_ratio,
        finite,
        refined_max_ratio,
        refinement_stable,
    })
}

/// `a` and `b` finite, positive and within a factor `f` of each other.
pub fn within_factor(a: f64, b: f64, f: f64) -> bool {
    a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && a.max(b) < f * a.min(b)
}

impl KernelEstimateReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.samples.first().map_or(0, |s| s.x.len());
        let mut header = Vec::new();
        for p in ["x", "y1", "y2"] {
            for i in 0..d {
                header.push(format!("{p}_{i}"));
            }
        }
        for n in INEQUALITY_NAMES {
            header.push(format!("{n}_lhs"));
            header.push(format!("{n}_rhs"));
        }
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.x.iter().chain(&s.y1).chain(&s.y2).map(|v| v.to_string()).collect();
            for i in 0..4 {
                row.push(format!("{:e}", s.lhs[i]));
                row.push(format!("{:e}", s.rhs[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
