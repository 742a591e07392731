//! Wall-clock comparison of the direct bilinear quadrature with the pruned
//! separable synthesis.

use crate::bilinear::cm::{apply_spectra, pruned_term_count};
use crate::bilinear::{cm_decompose, default_scales, BilinearSymbol, ContributionPruning, DirectPlan};
use crate::error::{DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::grid::{Grid, GridFunction, Side};
use crate::kernel::dunkl_kernel_1d;
use crate::transform::Transform;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

/// Pruning thresholds tried from the most aggressive down; `0` keeps every term.
pub const TAU_LADDER: [f64; 9] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 1e-6, 0.0];
/// Relative L² error the pruned synthesis must stay under.
pub const ACCURACY_TARGET: f64 = 1e-2;
pub const SPEEDUP_TARGET: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub nodes: usize,
    pub radius: f64,
    pub k: f64,
    pub n_trunc: usize,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            nodes: 512,
            radius: 12.0,
            k: 1.0,
            n_trunc: 8,
            repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub tau: f64,
    pub terms: usize,
    pub seconds: f64,
    pub rel_error: f64,
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub nodes: usize,
    pub n_trunc: usize,
    pub plan_seconds: f64,
    pub decompose_seconds: f64,
    pub direct_seconds: f64,
    pub rows: Vec<BenchRow>,
    /// Row with the largest threshold meeting [`ACCURACY_TARGET`].
    pub chosen: Option<usize>,
}

impl BenchReport {
    pub fn best(&self) -> Option<&BenchRow> {
        self.chosen.map(|i| &self.rows[i])
    }

    pub fn passes(&self) -> bool {
        self.best().is_some_and(|r| r.speedup >= SPEEDUP_TARGET)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "tau", "terms", "seconds", "rel_error", "speedup", "chosen"])?;
        w.write_record([
            "direct".to_string(),
            String::new(),
            format!("{}", self.nodes * self.nodes),
            format!("{:.6}", self.direct_seconds),
            "0".into(),
            "1".into(),
            String::new(),
        ])?;
        for (i, r) in self.rows.iter().enumerate() {
            w.write_record([
                "cm".to_string(),
                format!("{:e}", r.tau),
                r.terms.to_string(),
                format!("{:.6}", r.seconds),
                format!("{:.6e}", r.rel_error),
                format!("{:.3}", r.speedup),
                (self.chosen == Some(i)).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The benchmark inputs: a Dunkl-modulated Gaussian and a shifted cosine-Gaussian.
pub fn bench_inputs(grid: &Arc<Grid>, k: f64) -> Result<(GridFunction, GridFunction)> {
    let mut vals = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let x = grid.point(i)[0];
        vals.push(dunkl_kernel_1d(k, x, 3.0)? * (-x * x / 2.0).exp());
    }
    let f1 = GridFunction::new(grid.clone(), vals, Side::Space)?;
    let f2 = GridFunction::from_real(grid.clone(), Side::Space, |x| {
        (-(x[0] - 1.0).powi(2) / 2.0).exp() * x[0].cos()
    });
    Ok((f1, f2))
}

fn best_of<T>(repeats: usize, mut f: impl FnMut() -> T) -> (T, f64) {
    let mut best = f64::INFINITY;
    let mut out = None;
    for _ in 0..repeats.max(1) {
        let t0 = Instant::now();
        let v = f();
        best = best.min(t0.elapsed().as_secs_f64());
        out = Some(v);
    }
    (out.expect("at least one run"), best)
}

/// Times the apply step of both methods on one thread, spectra precomputed.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| DunklError::Io(e.to_string()))?;
    pool.install(|| run_single(cfg))
}

fn run_single(cfg: &BenchConfig) -> Result<BenchReport> {
    let setup = ReflectionSetup::uniform(1, cfg.k)?;
    let grid = Grid::new(&setup, cfg.radius, cfg.nodes)?;
    let t = Transform::square(grid.clone());
    let m = BilinearSymbol::product_ratio();
    let (f1, f2) = bench_inputs(&grid, cfg.k)?;
    let s1 = t.forward(&f1)?;
    let s2 = t.forward(&f2)?;
    let t0 = Instant::now();
    let plan = DirectPlan::new(&t, &m)?;
    let plan_seconds = t0.elapsed().as_secs_f64();
    let (direct, direct_seconds) = best_of(cfg.repeats, || plan.apply_spectra(&t, &s1.values, &s2.values));
    let direct = GridFunction::new(grid.clone(), direct, Side::Space)?;
    let t0 = Instant::now();
    let dec = cm_decompose(&setup, &m, &default_scales(&t), cfg.n_trunc)?;
    let decompose_seconds = t0.elapsed().as_secs_f64();
    let reference = f1.sup_norm() * f2.sup_norm();
    let mut rows = Vec::new();
    let mut chosen = None;
    for &tau in &TAU_LADDER {
        let pruning = (tau > 0.0).then_some(ContributionPruning { tau, reference });
        let (vals, seconds) = best_of(cfg.repeats, || apply_spectra(&t, &dec, &s1.values, &s2.values, pruning));
        let out = GridFunction::new(grid.clone(), vals, Side::Space)?;
        let rel_error = out.rel_l2_distance(&direct)?;
        let terms = match pruning {
            Some(p) => pruned_term_count(&t, &dec, &s1.values, &s2.values, p),
            None => dec.term_count(),
        };
        rows.push(BenchRow {
            tau,
            terms,
            seconds,
            rel_error,
            speedup: direct_seconds / seconds,
        });
        if rel_error < ACCURACY_TARGET {
            chosen = Some(rows.len() - 1);
            break;
        }
    }
    Ok(BenchReport {
        nodes: cfg.nodes,
        n_trunc: cfg.n_trunc,
        plan_seconds,
        decompose_seconds,
        direct_seconds,
        rows,
        chosen,
    })
}
