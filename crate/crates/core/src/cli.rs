//! Subcommand runner behind the `dunkl` binary.

use crate::acceptance;
use crate::bench::{run_bench, BenchConfig};
use crate::bilinear::cm::apply_spectra;
use crate::bilinear::{cm_decompose, default_scales, kernel_bound_report, BilinearSymbol, DirectPlan, SampleSpec};
use crate::config::ExperimentConfig;
use crate::czd::{cz_decompose, cz_test_family, cz_verify, enlarged_balls};
use crate::error::{DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::grid::{Grid, GridFunction, Side};
use crate::kernel::dunkl_kernel;
use crate::littlewood_paley::{build_window, fitted_growth_exponent, modulation_growth_probe, write_modulation_csv, Flavor};
use crate::transform::Transform;
use crate::weights::{
    ap_constant, blow_up_detector, bump_constant, gaussian_test_pairs, multi_ap_constant, sharp_domination_from,
    weighted_inequality_probe, BallFamily, WeightConfig,
};
use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Parser)]
#[command(name = "dunkl", version, about = "Dunkl harmonic analysis experiments on Z_2^d")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the CSV artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; 0 lets rayon decide.
    #[arg(long, global = true, env = "DUNKL_THREADS")]
    pub threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Plancherel, round trip and Gaussian fixed point across multiplicities.
    TransformSelftest,
    /// Modulated square-function growth against |u|.
    LpSweep,
    /// sup over dilations of a radial multiplier.
    MaximalMultiplier,
    /// Separable decomposition table of the bilinear symbol.
    CmDecompose,
    /// Decomposed against direct bilinear apply over truncation radii.
    BilinearCompare,
    /// Size and smoothness ratios of the bilinear kernel on random triples.
    KernelBounds,
    /// A_p, multilinear and bump constants plus the blow-up detector.
    WeightsCheck,
    /// Weighted strong or weak inequality ratios and sharp domination.
    WeightedProbe,
    /// Calderon-Zygmund decompositions of the test family.
    CzDemo,
    /// Direct against decomposed timing table.
    Bench,
    /// The full acceptance suite.
    Accept,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TransformSelftest => "transform-selftest",
            Command::LpSweep => "lp-sweep",
            Command::MaximalMultiplier => "maximal-multiplier",
            Command::CmDecompose => "cm-decompose",
            Command::BilinearCompare => "bilinear-compare",
            Command::KernelBounds => "kernel-bounds",
            Command::WeightsCheck => "weights-check",
            Command::WeightedProbe => "weighted-probe",
            Command::CzDemo => "cz-demo",
            Command::Bench => "bench",
            Command::Accept => "accept",
        }
    }
}

/// Process exit status for an error.
pub fn exit_code(e: &DunklError) -> u8 {
    match e {
        DunklError::Config(_) => 2,
        DunklError::Hypothesis(_) => 3,
        _ => 1,
    }
}

/// What a run produced: files written and a short human summary.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: &'a Path,
    res: RunOutput,
}

impl Ctx<'_> {
    /// Writes `name` under the output directory followed by the metadata block.
    fn artifact(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        body(&mut buf)?;
        writeln!(buf, "# config_hash={}", self.cfg.hash())?;
        writeln!(buf, "# version={}", env!("CARGO_PKG_VERSION"))?;
        let path = self.out.join(name);
        std::fs::write(&path, buf)?;
        self.res.files.push(path);
        Ok(())
    }

    fn say(&mut self, line: String) {
        self.res.summary.push(line);
    }
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

pub fn run(cmd: Command, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(out)?;
    let mut ctx = Ctx {
        cfg,
        out,
        res: RunOutput::default(),
    };
    match cmd {
        Command::TransformSelftest => transform_selftest(&mut ctx)?,
        Command::LpSweep => lp_sweep(&mut ctx)?,
        Command::MaximalMultiplier => maximal_multiplier(&mut ctx)?,
        Command::CmDecompose => cm(&mut ctx)?,
        Command::BilinearCompare => bilinear_compare(&mut ctx)?,
        Command::KernelBounds => kernel_bounds(&mut ctx)?,
        Command::WeightsCheck => weights_check(&mut ctx)?,
        Command::WeightedProbe => weighted_probe(&mut ctx)?,
        Command::CzDemo => cz_demo(&mut ctx)?,
        Command::Bench => bench(&mut ctx)?,
        Command::Accept => accept(&mut ctx)?,
    }
    Ok(ctx.res)
}

fn grid(cfg: &ExperimentConfig) -> Result<(ReflectionSetup, Arc<Grid>)> {
    let s = cfg.reflection_setup()?;
    let g = Grid::new(&s, cfg.grid.radius, cfg.grid.nodes)?;
    Ok((s, g))
}

fn transform_selftest(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &k in &cfg.transform.k_sweep {
        let s = ReflectionSetup::uniform(1, k)?;
        let g = Grid::new(&s, cfg.grid.radius, cfg.grid.nodes)?;
        let t = Transform::square(g.clone());
        let f = GridFunction::from_real(g.clone(), Side::Space, |x| {
            (1.0 + x[0] + 0.3 * x[0] * x[0]) * (-x[0] * x[0] / 2.0).exp()
        });
        let pd = t.plancherel_defect(&f)?;
        let rt = t.inverse(&t.forward(&f)?)?.rel_l2_distance(&f)?;
        let gauss = GridFunction::from_real(g.clone(), Side::Space, |x| (-x[0] * x[0] / 2.0).exp());
        let want = GridFunction::from_real(t.freq_grid().clone(), Side::Frequency, |x| (-x[0] * x[0] / 2.0).exp());
        let fp = t.forward(&gauss)?.rel_l2_distance(&want)?;
        worst = worst.max(pd).max(rt).max(fp);
        rows.push([k, pd, rt, fp]);
    }
    ctx.artifact("transform_selftest.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["k", "plancherel_defect", "round_trip", "fixed_point"])?;
        for r in &rows {
            w.write_record(r.iter().map(|v| format!("{v:.6e}")))?;
        }
        w.flush()?;
        Ok(())
    })?;
    ctx.say(format!("worst defect {worst:.2e}"));
    if worst > acceptance::tol::PLANCHEREL {
        return Err(DunklError::Invariant(format!("transform defect {worst:.2e} exceeds tolerance")));
    }
    Ok(())
}

fn lp_sweep(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (s, g) = grid(cfg)?;
    let t = Transform::square(g.clone());
    let d = s.dim();
    let window = build_window(cfg.lp.flavor.parse::<Flavor>()?, cfg.lp.r_supp)?;
    let mut family = Vec::new();
    for &c in &cfg.lp.family {
        let mut y = vec![0.0; d];
        y[0] = c;
        let vals = g
            .points()
            .iter()
            .map(|x| Ok(dunkl_kernel(&s, x, &y)? * (-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp()))
            .collect::<Result<Vec<_>>>()?;
        family.push(GridFunction::new(g.clone(), vals, Side::Space)?);
    }
    let us: Vec<Vec<f64>> = cfg
        .lp
        .u
        .iter()
        .map(|&u| {
            let mut v = vec![0.0; d];
            v[0] = u;
            v
        })
        .collect();
    let scales: Vec<i32> = (cfg.lp.scales[0]..=cfg.lp.scales[1]).collect();
    let bound = s.d_k().floor() + 2.0;
    let mut all = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for &p in &cfg.lp.p {
        let rows = modulation_growth_probe(&t, &window, &family, p, &us, &scales)?;
        let e = fitted_growth_exponent(&rows)?;
        worst = worst.max(e);
        ctx.say(format!("p={p}: fitted growth exponent {e:.4}"));
        all.extend(rows);
    }
    ctx.artifact("lp_sweep.csv", |buf| write_modulation_csv(&all, buf))?;
    if worst > bound {
        return Err(DunklError::Invariant(format!("growth exponent {worst:.3} exceeds {bound}")));
    }
    Ok(())
}

fn maximal_multiplier(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (_, g) = grid(cfg)?;
    let t = Transform::square(g.clone());
    let m = cfg.maximal_symbol()?;
    let f = GridFunction::from_real(g, Side::Space, |x| {
        (-(x[0] - 1.0).powi(2) / 2.0 - x[1..].iter().map(|v| v * v).sum::<f64>() / 2.0).exp()
    });
    let sweep = t.maximal_multiplier_sweep(&m, &f, &cfg.t_grid())?;
    ctx.artifact("maximal_multiplier.csv", |buf| sweep.sup.write_csv(buf))?;
    ctx.say(format!(
        "L2 ratio {:.6}, sup (1+|xi|)|m| {:.4}, sup (1+|xi|)|grad m| {:.4}",
        sweep.ratio, sweep.c_m, sweep.c_grad
    ));
    Ok(())
}

fn cm(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (s, g) = grid(cfg)?;
    let t = Transform::square(g);
    let m = BilinearSymbol::by_name(&cfg.bilinear.symbol)?;
    let dec = cm_decompose(&s, &m, &default_scales(&t), cfg.bilinear.n_trunc)?;
    ctx.artifact("cm_decomposition.csv", |buf| dec.write_csv(buf))?;
    let audit = dec.decay_audit(6);
    ctx.say(format!(
        "{} terms; max |c|(1+|n|)^6 {:.3e}; tail slope {:.2}",
        dec.term_count(),
        audit.max_weighted,
        audit.fitted_slope
    ));
    Ok(())
}

fn bilinear_compare(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (s, g) = grid(cfg)?;
    if s.dim() != 1 {
        return Err(DunklError::Config("setup.k: bilinear-compare runs in one dimension".into()));
    }
    let t = Transform::square(g.clone());
    let m = BilinearSymbol::by_name(&cfg.bilinear.symbol)?;
    let (f1, f2) = crate::bench::bench_inputs(&g, s.k()[0])?;
    let s1 = t.forward(&f1)?;
    let s2 = t.forward(&f2)?;
    let direct = GridFunction::new(
        g.clone(),
        DirectPlan::new(&t, &m)?.apply_spectra(&t, &s1.values, &s2.values),
        Side::Space,
    )?;
    let n_max = cfg.bilinear.n_list.iter().copied().max().unwrap_or(cfg.bilinear.n_trunc);
    let full = cm_decompose(&s, &m, &default_scales(&t), n_max)?;
    let mut rows = Vec::new();
    for &n in &cfg.bilinear.n_list {
        let dec = full.truncated(n)?;
        let t0 = Instant::now();
        let vals = apply_spectra(&t, &dec, &s1.values, &s2.values, None);
        let secs = t0.elapsed().as_secs_f64();
        let err = GridFunction::new(g.clone(), vals, Side::Space)?.rel_l2_distance(&direct)?;
        rows.push((n, dec.term_count(), err, secs));
    }
    ctx.artifact("bilinear_compare.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["n_trunc", "terms", "rel_error", "seconds"])?;
        for (n, terms, err, secs) in &rows {
            w.write_record([n.to_string(), terms.to_string(), format!("{err:.6e}"), format!("{secs:.4}")])?;
        }
        w.flush()?;
        Ok(())
    })?;
    for (n, _, err, _) in &rows {
        ctx.say(format!("N={n}: relative error {err:.3e}"));
    }
    Ok(())
}

fn kernel_bounds(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let s = cfg.reflection_setup()?;
    let m = BilinearSymbol::by_name(&cfg.kernel.symbol)?;
    let spec = SampleSpec {
        count: cfg.kernel.count,
        scales: (cfg.kernel.scales[0]..=cfg.kernel.scales[1]).collect(),
        seed: cfg.seed,
        ..SampleSpec::default()
    };
    let r = kernel_bound_report(&s, &m, &spec, cfg.kernel.refine)?;
    ctx.artifact("kernel_bounds.csv", |buf| r.write_csv(buf))?;
    ctx.say(format!("max ratios {:?}, refined {:?}", r.max_ratio, r.refined_max_ratio));
    if !r.finite {
        return Err(DunklError::Invariant("kernel bound ratio is not finite".into()));
    }
    Ok(())
}

fn weights_check(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (s, g) = grid(cfg)?;
    let fam = BallFamily::lattice(g, cfg.weights.r_min, cfg.weights.r_max)?;
    let rf = fam.refined()?;
    let w = cfg.weight_specs()?;
    let wc = WeightConfig::one_weight(w.clone(), cfg.weights.p)?;
    let p = cfg.weights.p;
    let t = cfg.weights.bump_t;
    let mut rows: Vec<(String, f64)> = Vec::new();
    for (i, wi) in w.iter().enumerate() {
        rows.push((format!("ap_w{}_p{}", i + 1, p[i]), ap_constant(wi, p[i], &fam)?));
    }
    rows.push(("multi_ap".into(), multi_ap_constant(&wc.v, &wc.w, &wc.p, &fam)?));
    rows.push(("multi_ap_refined".into(), multi_ap_constant(&wc.v, &wc.w, &wc.p, &rf)?));
    rows.push(("bump".into(), bump_constant(&wc.v, &wc.w, &wc.p, t, &fam)?));
    rows.push(("bump_refined".into(), bump_constant(&wc.v, &wc.w, &wc.p, t, &rf)?));
    let p_blow = p[0].max(1.0 + 1e-9);
    let b = blow_up_detector(&s, &w[0], p_blow, cfg.weights.r_min, cfg.weights.r_max, cfg.weights.blow_up_shrink)?;
    rows.push(("blow_up_coarse".into(), b.coarse));
    rows.push(("blow_up_fine".into(), b.fine));
    rows.push(("blow_up_growth".into(), b.growth));
    rows.push(("blow_up_fired".into(), if b.fired { 1.0 } else { 0.0 }));
    ctx.artifact("weights_check.csv", |buf| {
        let mut wr = csv::Writer::from_writer(buf);
        wr.write_record(["quantity", "value"])?;
        for (q, v) in &rows {
            wr.write_record([q.clone(), format!("{v:.10e}")])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    for (q, v) in &rows {
        ctx.say(format!("{q} = {v:.6}"));
    }
    Ok(())
}

fn weighted_probe(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (_, g) = grid(cfg)?;
    let t = Transform::square(g.clone());
    let fam = BallFamily::lattice(g.clone(), cfg.weights.r_min, cfg.weights.r_max)?;
    let m = BilinearSymbol::by_name(&cfg.weights.symbol)?;
    let wc = WeightConfig::one_weight(cfg.weight_specs()?, cfg.weights.p)?;
    let pairs = gaussian_test_pairs(&g, cfg.weights.pairs, cfg.seed);
    let r = weighted_inequality_probe(&t, &m, &wc, &pairs, &fam)?;
    ctx.artifact("weighted_probe.csv", |buf| r.write_csv(buf))?;
    let (f1, f2) = &pairs[0];
    let out = DirectPlan::new(&t, &m)?.apply(&t, f1, f2)?;
    let sd = sharp_domination_from(&out, f1, f2, 0.25, &fam)?;
    ctx.artifact("sharp_domination.csv", |buf| sd.write_csv(&g, buf))?;
    ctx.say(format!(
        "{} max ratio {:.4} (class constant {:.4}); sharp domination {:.4}",
        if r.weak { "weak" } else { "strong" },
        r.max_ratio,
        r.class_constant,
        sd.max_ratio
    ));
    Ok(())
}

fn cz_demo(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let (_, g) = grid(cfg)?;
    let family = cz_test_family(&g, cfg.cz.count, cfg.seed);
    let mut rows = Vec::new();
    for (i, (f, lambda)) in family.iter().enumerate() {
        let dec = cz_decompose(f, *lambda)?;
        let rep = cz_verify(&dec)?;
        let orbit = enlarged_balls(&dec, cfg.cz.dilation)?;
        if i == cfg.cz.index {
            ctx.artifact("cz_decomposition.csv", |buf| dec.write_csv(buf))?;
        }
        rows.push((i, *lambda, rep.pieces, rep.constants, orbit.constant));
    }
    ctx.artifact("cz_summary.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["index", "lambda", "pieces", "c_b", "c_sum", "c_good", "orbit_constant"])?;
        for (i, l, n, c, o) in &rows {
            w.write_record([
                i.to_string(),
                format!("{l:.6e}"),
                n.to_string(),
                format!("{:.6e}", c.c_b),
                format!("{:.6e}", c.c_sum),
                format!("{:.6e}", c.c_good),
                format!("{o:.6e}"),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    let max = |f: fn(&crate::czd::CzConstants) -> f64| rows.iter().map(|r| f(&r.3)).fold(0.0, f64::max);
    ctx.say(format!(
        "{} functions verified; max C_b {:.3}, C_sum {:.3}, C_good {:.3}",
        rows.len(),
        max(|c| c.c_b),
        max(|c| c.c_sum),
        max(|c| c.c_good)
    ));
    Ok(())
}

fn bench(ctx: &mut Ctx) -> Result<()> {
    let b = &ctx.cfg.bench;
    let r = run_bench(&BenchConfig {
        nodes: b.nodes,
        radius: b.radius,
        k: b.k,
        n_trunc: b.n_trunc,
        repeats: b.repeats,
    })?;
    ctx.artifact("bench.csv", |buf| r.write_csv(buf))?;
    match r.best() {
        Some(row) => ctx.say(format!(
            "direct {:.4}s, decomposed {:.4}s ({} terms, error {:.2e}): speedup {:.2}x",
            r.direct_seconds, row.seconds, row.terms, row.rel_error, row.speedup
        )),
        None => ctx.say("no threshold met the accuracy target".into()),
    }
    Ok(())
}

fn accept(ctx: &mut Ctx) -> Result<()> {
    let mut rows = Vec::new();
    for id in 1..=12 {
        let o = acceptance::run(id);
        println!("{}", o.line());
        rows.push(o);
    }
    ctx.artifact("acceptance_summary.csv", |buf| acceptance::write_csv(&rows, buf))?;
    let failed = rows.iter().filter(|o| !o.pass).count();
    ctx.say(format!("{} of 12 criteria passed", 12 - failed));
    if failed > 0 {
        return Err(DunklError::Invariant(format!("{failed} acceptance criteria failed")));
    }
    Ok(())
}
