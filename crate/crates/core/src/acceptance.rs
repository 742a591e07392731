//! The acceptance suite: twelve criteria, each returning PASS or FAIL with its
//! measured numbers. Oracles here are written against plain arrays and closed
//! forms, independently of the library code paths they check.

use crate::bench::{run_bench, BenchConfig};
use crate::bilinear::cm::apply_spectra;
use crate::bilinear::kernel_bounds::{support_test_pair, within_factor};
use crate::bilinear::{
    cm_decompose, convolution_support_check, default_scales, kernel_bound_report, BilinearSymbol, DirectPlan,
    SampleSpec,
};
use crate::czd::{cz_decompose, cz_test_family, cz_verify, CzConstants};
use crate::error::Result;
use crate::geometry::ReflectionSetup;
use crate::grid::{Grid, GridFunction, Side};
use crate::kernel::{dunkl_kernel, kernel_derivative_bound_check};
use crate::littlewood_paley::{build_window, fitted_growth_exponent, modulation_growth_probe, square_function, Flavor, Plateau};
use crate::transform::Transform;
use crate::weights::{
    ap_constant, blow_up_detector, bump_constant, gaussian_test_pairs, multi_ap_constant, sharp_domination_from,
    weighted_inequality_probe, BallFamily, WeightConfig, WeightSpec,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

type C64 = Complex64;

pub const K_SWEEP: [f64; 4] = [0.0, 0.5, 1.0, 2.5];

pub mod tol {
    pub const PLANCHEREL: f64 = 1e-6;
    pub const ROUND_TRIP: f64 = 1e-6;
    /// Below this a defect is at rounding level and no longer required to halve.
    pub const ROUNDOFF_FLOOR: f64 = 1e-13;
    pub const TRANSFORM_SECONDS: f64 = 30.0;
    pub const CLASSICAL_SUP: f64 = 1e-8;
    pub const FIXED_POINT: f64 = 1e-6;
    pub const KERNEL_MODULUS: f64 = 1e-10;
    pub const KERNEL_IDENTITY: f64 = 1e-12;
    pub const PRODUCT: f64 = 1e-5;
    pub const PARTITION: f64 = 1e-12;
    /// Frozen bound on `max |c| (1+|n1|+|n2|)^6`.
    pub const DECAY_WEIGHTED: f64 = 1e4;
    pub const DECAY_EXPONENT: i32 = 6;
    pub const CM_AT_8: f64 = 1e-2;
    pub const SUPPORT_OUTSIDE: f64 = 1e-8;
    pub const CM_SECONDS: f64 = 300.0;
    pub const SPEEDUP: f64 = 5.0;
    pub const KERNEL_FACTOR: f64 = 2.0;
    pub const CZ_ORACLE: f64 = 0.1;
    pub const REFINEMENT: f64 = 0.1;
    pub const BLOW_UP: f64 = 10.0;
    pub const STRONG_PROBE: f64 = 0.6;
    pub const WEAK_PROBE: f64 = 0.3;
    pub const SQUARE_NORM: f64 = 1e-6;
}

/// Frozen CZ constants for the standard family on `[-8, 8]`, 1024 nodes.
pub fn cz_fixture(k: f64) -> CzConstants {
    if k == 0.0 {
        CzConstants {
            c_b: 3.0,
            c_sum: 1.0,
            c_good: 2.0,
        }
    } else {
        CzConstants {
            c_b: 3.5,
            c_sum: 1.0,
            c_good: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: {} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const NAMES: [&str; 12] = [
    "transform self-consistency",
    "classical oracle",
    "gaussian fixed point",
    "kernel axioms",
    "bilinear identity",
    "coifman-meyer engine",
    "performance",
    "kernel bounds",
    "cz decomposition",
    "weights",
    "weighted probes",
    "littlewood-paley",
];

pub fn run(id: u8) -> Outcome {
    let t0 = Instant::now();
    let res = match id {
        1 => transform_self_consistency(),
        2 => classical_oracle(),
        3 => gaussian_fixed_point(),
        4 => kernel_axioms(),
        5 => bilinear_identity(),
        6 => cm_engine(),
        7 => performance(),
        8 => kernel_bounds(),
        9 => cz_criterion(),
        10 => weights_criterion(),
        11 => weighted_probes(),
        12 => littlewood_paley(),
        _ => Ok((false, format!("unknown criterion {id}"))),
    };
    let (pass, detail) = res.unwrap_or_else(|e| (false, format!("error: {e}")));
    Outcome {
        id,
        name: NAMES.get(id as usize - 1).copied().unwrap_or("unknown"),
        pass,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

pub fn run_all() -> Vec<Outcome> {
    (1..=12).map(run).collect()
}

pub fn write_csv<W: Write>(rows: &[Outcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["criterion", "name", "status", "seconds", "detail"])?;
    for r in rows {
        w.write_record([
            r.id.to_string(),
            r.name.to_string(),
            if r.pass { "PASS" } else { "FAIL" }.to_string(),
            format!("{:.2}", r.seconds),
            r.detail.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

type Check = Result<(bool, String)>;

fn setup1(k: f64) -> Result<ReflectionSetup> {
    ReflectionSetup::uniform(1, k)
}

fn transform_defects(k: f64, n: usize) -> Result<(f64, f64)> {
    let g = Grid::new(&setup1(k)?, 12.0, n)?;
    let t = Transform::square(g.clone());
    let f = GridFunction::from_real(g, Side::Space, |x| {
        (1.0 + x[0] + 0.3 * x[0] * x[0]) * (-x[0] * x[0] / 2.0).exp()
    });
    let pd = t.plancherel_defect(&f)?;
    let rt = t.inverse(&t.forward(&f)?)?.rel_l2_distance(&f)?;
    Ok((pd, rt))
}

fn halves(coarse: f64, fine: f64) -> bool {
    coarse <= tol::ROUNDOFF_FLOOR || fine <= 0.5 * coarse
}

fn transform_self_consistency() -> Check {
    let t0 = Instant::now();
    let mut ok = true;
    let mut worst = (0.0f64, 0.0f64);
    for k in K_SWEEP {
        let (p1, r1) = transform_defects(k, 2048)?;
        let (p2, r2) = transform_defects(k, 4096)?;
        ok &= p1 < tol::PLANCHEREL && r1 < tol::ROUND_TRIP && halves(p1, p2) && halves(r1, r2);
        worst = (worst.0.max(p1), worst.1.max(r1));
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < tol::TRANSFORM_SECONDS;
    Ok((
        ok,
        format!(
            "max plancherel {:.2e}, max round trip {:.2e} at N=2048; doubling halves or sits below {:.0e}; {:.1}s",
            worst.0,
            worst.1,
            tol::ROUNDOFF_FLOOR,
            secs
        ),
    ))
}

/// `(2π)^{-1/2} ∫ f(x) e^{-ixξ} dx` by the trapezoid rule on `[-25, 25]`.
fn classical_fourier(f: &dyn Fn(f64) -> f64, xi: f64) -> C64 {
    let n = 20001;
    let h = 50.0 / (n - 1) as f64;
    let mut re = 0.0;
    let mut im = 0.0;
    for i in 0..n {
        let x = -25.0 + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        let v = f(x) * w;
        re += v * (x * xi).cos();
        im -= v * (x * xi).sin();
    }
    C64::new(re, im) * (h / (2.0 * PI).sqrt())
}

fn classical_oracle() -> Check {
    let g = Grid::new(&setup1(0.0)?, 12.0, 2048)?;
    let t = Transform::square(g.clone());
    let mut worst = 0.0f64;
    for (a, b) in [(0.5, 0.0), (1.0, 0.7), (2.0, -1.3), (0.5, 1.5)] {
        let f = move |x: f64| (-a * (x - b) * (x - b)).exp();
        let ff = t.forward(&GridFunction::from_real(g.clone(), Side::Space, |x| f(x[0])))?;
        let freq = t.freq_grid();
        for i in (0..freq.len()).step_by(4) {
            let xi = freq.point(i)[0];
            if xi.abs() > 10.0 {
                continue;
            }
            worst = worst.max((ff.values[i] - classical_fourier(&f, xi)).norm());
        }
    }
    Ok((worst < tol::CLASSICAL_SUP, format!("sup error {worst:.2e} on 4 Gaussians")))
}

fn gaussian_fixed_point() -> Check {
    let mut worst = 0.0f64;
    for k in K_SWEEP {
        let g = Grid::new(&setup1(k)?, 12.0, 2048)?;
        let t = Transform::square(g.clone());
        let gauss = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0] / 2.0).exp());
        let ff = t.forward(&gauss)?;
        let want = GridFunction::from_real(t.freq_grid().clone(), Side::Frequency, |x| (-x[0] * x[0] / 2.0).exp());
        worst = worst.max(ff.rel_l2_distance(&want)?);
    }
    Ok((worst < tol::FIXED_POINT, format!("max relative error {worst:.2e} over k in {K_SWEEP:?}")))
}

fn kernel_axioms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let setups = [
        setup1(0.5)?,
        setup1(1.0)?,
        setup1(2.5)?,
        ReflectionSetup::new(vec![0.5, 1.5])?,
    ];
    let mut modulus = 0.0f64;
    let mut sym = 0.0f64;
    let mut scale = 0.0f64;
    let mut deriv_ok = true;
    for i in 0..10_000 {
        let s = &setups[i % setups.len()];
        let d = s.dim();
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let lam = rng.gen_range(0.25..2.0);
        let e = dunkl_kernel(s, &x, &y)?;
        modulus = modulus.max(e.norm());
        sym = sym.max((e - dunkl_kernel(s, &y, &x)?).norm());
        let lx: Vec<f64> = x.iter().map(|v| v * lam).collect();
        let ly: Vec<f64> = y.iter().map(|v| v * lam).collect();
        scale = scale.max((dunkl_kernel(s, &lx, &y)? - dunkl_kernel(s, &x, &ly)?).norm());
        let mut alpha = vec![0u32; d];
        alpha[i % d] = 1;
        deriv_ok &= kernel_derivative_bound_check(s, &x, &y, &alpha, 1e-4)?.ok;
    }
    let ok = modulus <= 1.0 + tol::KERNEL_MODULUS
        && sym < tol::KERNEL_IDENTITY
        && scale < tol::KERNEL_IDENTITY
        && deriv_ok;
    Ok((
        ok,
        format!(
            "max |E| {modulus:.15}, symmetry {sym:.1e}, scaling {scale:.1e}, first derivatives {}",
            if deriv_ok { "bounded" } else { "violated" }
        ),
    ))
}

fn gaussian_pairs(g: &Arc<Grid>) -> Vec<(GridFunction, GridFunction)> {
    [(0.5, 0.0, 1.0, 0.5), (1.0, 1.0, 0.7, -0.5), (2.0, -0.8, 0.4, 0.3)]
        .iter()
        .map(|&(a, b, c, e)| {
            (
                GridFunction::from_real(g.clone(), Side::Space, move |x| (-a * (x[0] - b).powi(2)).exp()),
                GridFunction::from_real(g.clone(), Side::Space, move |x| (-c * (x[0] - e).powi(2)).exp()),
            )
        })
        .collect()
}

fn bilinear_identity() -> Check {
    let g = Grid::new(&setup1(1.0)?, 12.0, 256)?;
    let t = Transform::square(g.clone());
    let plan = DirectPlan::new(&t, &BilinearSymbol::one())?;
    let mut worst = 0.0f64;
    for (f1, f2) in gaussian_pairs(&g) {
        let out = plan.apply(&t, &f1, &f2)?;
        let prod: Vec<C64> = f1.values.iter().zip(&f2.values).map(|(a, b)| a * b).collect();
        let den = prod.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = out.values.iter().zip(&prod).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(err / den);
    }
    Ok((worst < tol::PRODUCT, format!("max relative sup error {worst:.2e}")))
}

fn cm_engine() -> Check {
    let t0 = Instant::now();
    let s = setup1(1.0)?;
    let g = Grid::new(&s, 12.0, 512)?;
    let t = Transform::square(g.clone());
    let m = BilinearSymbol::product_ratio();
    let scales = default_scales(&t);
    let full = cm_decompose(&s, &m, &scales, 16)?;
    // (a) covered region: each frequency inside the scale range away from its ends
    let lo = 2f64.powi(scales[0] + 3);
    let hi = 2f64.powi(scales[scales.len() - 1] - 3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draw = |rng: &mut ChaCha8Rng| {
        let r = (lo.ln() + rng.gen::<f64>() * (hi / lo).ln()).exp();
        if rng.gen::<bool>() {
            r
        } else {
            -r
        }
    };
    let mut part = 0.0f64;
    for _ in 0..2000 {
        let (x, y) = (draw(&mut rng), draw(&mut rng));
        part = part.max((full.partition_sum(&[x], &[y]) - 1.0).abs());
    }
    let a_ok = part < tol::PARTITION;
    // (b)
    let audit = full.decay_audit(tol::DECAY_EXPONENT);
    let b_ok = audit.max_weighted.is_finite() && audit.max_weighted < tol::DECAY_WEIGHTED;
    // (c)
    let (f1, f2) = crate::bench::bench_inputs(&g, 1.0)?;
    let s1 = t.forward(&f1)?;
    let s2 = t.forward(&f2)?;
    let direct = GridFunction::new(
        g.clone(),
        DirectPlan::new(&t, &m)?.apply_spectra(&t, &s1.values, &s2.values),
        Side::Space,
    )?;
    let mut errs = Vec::new();
    for n in [2, 4, 8, 16] {
        let dec = full.truncated(n)?;
        let out = GridFunction::new(g.clone(), apply_spectra(&t, &dec, &s1.values, &s2.values, None), Side::Space)?;
        errs.push(out.rel_l2_distance(&direct)?);
    }
    let c_ok = errs.windows(2).all(|w| w[1] < w[0]) && errs[2] < tol::CM_AT_8;
    // (d)
    let ss = setup1(1.0)?;
    let space = Grid::new(&ss, 512.0, 8192)?;
    let freq = Grid::new(&ss, 4.0, 1024)?;
    let ts = Transform::new(space, freq)?;
    let (f, h) = support_test_pair(&ts, 0)?;
    let sup = convolution_support_check(&ts, &f, &h, 0)?;
    let d_ok = sup.outside < tol::SUPPORT_OUTSIDE;
    let secs = t0.elapsed().as_secs_f64();
    let ok = a_ok && b_ok && c_ok && d_ok && secs < tol::CM_SECONDS;
    Ok((
        ok,
        format!(
            "(a) partition defect {part:.1e}; (b) max |c|(1+|n|)^6 = {:.3e}; (c) errors {} ; (d) outside mass {:.1e}; {:.0}s",
            audit.max_weighted,
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" > "),
            sup.outside,
            secs
        ),
    ))
}

fn performance() -> Check {
    let r = run_bench(&BenchConfig::default())?;
    let Some(best) = r.best() else {
        return Ok((false, "no threshold reached the accuracy target".into()));
    };
    Ok((
        r.passes(),
        format!(
            "direct {:.3}s, pruned cm {:.4}s with {} terms (tau {:e}, error {:.2e}): speedup {:.1}x",
            r.direct_seconds, best.seconds, best.terms, best.tau, best.rel_error, best.speedup
        ),
    ))
}

fn kernel_bounds() -> Check {
    let s = setup1(1.0)?;
    let m = BilinearSymbol::product_ratio();
    let spec = SampleSpec::default();
    let base = kernel_bound_report(&s, &m, &spec, true)?;
    let wide = SampleSpec {
        scales: (-12..=12).collect(),
        ..spec
    };
    let widened = kernel_bound_report(&s, &m, &wide, false)?;
    let refined = base.refined_max_ratio.unwrap_or([f64::NAN; 4]);
    let widen_ok = (0..4).all(|i| within_factor(base.max_ratio[i], widened.max_ratio[i], tol::KERNEL_FACTOR));
    let refine_ok = (0..4).all(|i| within_factor(base.max_ratio[i], refined[i], tol::KERNEL_FACTOR));
    let fmt = |r: &[f64; 4]| r.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("/");
    Ok((
        base.finite && widen_ok && refine_ok,
        format!(
            "{} triples, max ratios {} ; widened {} ; refined {}",
            base.samples.len(),
            fmt(&base.max_ratio),
            fmt(&widened.max_ratio),
            fmt(&refined)
        ),
    ))
}

/// Classical dyadic stopping time on `[-r, r]` with Lebesgue measure.
pub fn classical_cz_constants(values: &[f64], r: f64, lambda: f64) -> (usize, f64, f64, f64) {
    let n = values.len();
    let h = 2.0 * r / n as f64;
    let mut good = values.to_vec();
    let mut count = 0;
    let mut c_b = 0.0f64;
    let mut sum_len = 0.0;
    let mut stack = vec![(0usize, n)];
    while let Some((a, b)) = stack.pop() {
        let avg = values[a..b].iter().map(|v| v.abs()).sum::<f64>() / (b - a) as f64;
        if avg > lambda {
            let mean = values[a..b].iter().sum::<f64>() / (b - a) as f64;
            let bl1: f64 = values[a..b].iter().map(|v| (v - mean).abs()).sum::<f64>() * h;
            let len = (b - a) as f64 * h;
            c_b = c_b.max(bl1 / (lambda * len));
            sum_len += len;
            good[a..b].iter_mut().for_each(|v| *v = mean);
            count += 1;
        } else if b - a > 1 {
            let mid = (a + b) / 2;
            stack.push((mid, b));
            stack.push((a, mid));
        }
    }
    let f1: f64 = values.iter().map(|v| v.abs()).sum::<f64>() * h;
    let gmax = good.iter().map(|v| v.abs()).fold(0.0, f64::max);
    (count, c_b, lambda * sum_len / f1, gmax / lambda)
}

fn cz_criterion() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    for k in [0.0, 1.0] {
        let g = Grid::new(&setup1(k)?, 8.0, 1024)?;
        let fix = cz_fixture(k);
        let mut worst = CzConstants {
            c_b: 0.0,
            c_sum: 0.0,
            c_good: 0.0,
        };
        let mut oracle_dev = 0.0f64;
        for (f, lambda) in cz_test_family(&g, 20, 2024) {
            let dec = cz_decompose(&f, lambda)?;
            let c = match cz_verify(&dec) {
                Ok(r) => r.constants,
                Err(e) => return Ok((false, format!("k={k}: {e}"))),
            };
            worst.c_b = worst.c_b.max(c.c_b);
            worst.c_sum = worst.c_sum.max(c.c_sum);
            worst.c_good = worst.c_good.max(c.c_good);
            if k == 0.0 {
                let vals: Vec<f64> = f.values.iter().map(|v| v.re).collect();
                let (count, cb, cs, cg) = classical_cz_constants(&vals, 8.0, lambda);
                ok &= count == dec.pieces.len();
                for (a, b) in [(c.c_b, cb), (c.c_sum, cs), (c.c_good, cg)] {
                    oracle_dev = oracle_dev.max((a - b).abs() / b.abs().max(1e-300));
                }
            }
        }
        ok &= worst.c_b <= fix.c_b && worst.c_sum <= fix.c_sum && worst.c_good <= fix.c_good;
        if k == 0.0 {
            ok &= oracle_dev < tol::CZ_ORACLE;
            notes.push(format!("k=0 oracle deviation {oracle_dev:.1e}"));
        }
        notes.push(format!(
            "k={k} C_b {:.2} C_sum {:.2} C_good {:.2}",
            worst.c_b, worst.c_sum, worst.c_good
        ));
    }
    Ok((ok, notes.join("; ")))
}

fn rel_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn weights_criterion() -> Check {
    let s1 = setup1(1.0)?;
    let g = Grid::new(&s1, 8.0, 512)?;
    let fam = BallFamily::lattice(g.clone(), 2.0 * 16.0 / 512.0, 4.0)?;
    let rf = fam.refined()?;
    let one = WeightSpec::constant(1.0);
    let mut ok = true;
    for p in [1.0, 1.5, 2.0, 3.0] {
        ok &= ap_constant(&one, p, &fam)? == 1.0;
    }
    let s0 = setup1(0.0)?;
    let bad = blow_up_detector(&s0, &WeightSpec::power(1.5), 2.0, 0.01, 1.0, 100.0)?;
    let good = blow_up_detector(&s0, &WeightSpec::power(0.5), 2.0, 0.01, 1.0, 100.0)?;
    ok &= bad.fired && !good.fired;
    let mut notes = vec![format!(
        "A_p(1)=1; blow-up growth {:.2} for |x|^1.5, {:.2} for |x|^0.5",
        bad.growth, good.growth
    )];
    for a in [0.3, 0.2] {
        let cfg = WeightConfig::one_weight([WeightSpec::power(a), WeightSpec::power(a)], [2.0, 2.0])?;
        let m1 = multi_ap_constant(&cfg.v, &cfg.w, &cfg.p, &fam)?;
        let m2 = multi_ap_constant(&cfg.v, &cfg.w, &cfg.p, &rf)?;
        let b1 = bump_constant(&cfg.v, &cfg.w, &cfg.p, 1.1, &fam)?;
        let b2 = bump_constant(&cfg.v, &cfg.w, &cfg.p, 1.1, &rf)?;
        ok &= m1.is_finite() && b1.is_finite();
        ok &= rel_change(m1, m2) < tol::REFINEMENT && rel_change(b1, b2) < tol::REFINEMENT;
        notes.push(format!("|x|^{a}: multi {m1:.4}/{m2:.4}, bump {b1:.4}/{b2:.4}"));
    }
    Ok((ok, notes.join("; ")))
}

fn weighted_probes() -> Check {
    let s = setup1(1.0)?;
    let g = Grid::new(&s, 8.0, 256)?;
    let t = Transform::square(g.clone());
    let fam = BallFamily::lattice(g.clone(), 2.0 * 16.0 / 256.0, 4.0)?;
    let rf = fam.refined()?;
    let m = BilinearSymbol::product_ratio();
    let pairs = gaussian_test_pairs(&g, 10, 11);
    let w = [WeightSpec::power(0.2), WeightSpec::power(0.2)];
    let strong = weighted_inequality_probe(&t, &m, &WeightConfig::one_weight(w.clone(), [2.0, 2.0])?, &pairs, &fam)?;
    let weak = weighted_inequality_probe(&t, &m, &WeightConfig::one_weight(w, [1.0, 2.0])?, &pairs, &fam)?;
    let plan = DirectPlan::new(&t, &m)?;
    let (f1, f2) = &pairs[0];
    let out = plan.apply(&t, f1, f2)?;
    let a = sharp_domination_from(&out, f1, f2, 0.25, &fam)?;
    let b = sharp_domination_from(&out, f1, f2, 0.25, &rf)?;
    let sharp_ok = a.max_ratio.is_finite() && a.max_ratio > 0.0 && rel_change(a.max_ratio, b.max_ratio) < tol::REFINEMENT;
    let ok = strong.max_ratio < tol::STRONG_PROBE && weak.max_ratio < tol::WEAK_PROBE && sharp_ok;
    Ok((
        ok,
        format!(
            "strong max {:.4} (< {}), weak max {:.4} (< {}), sharp domination {:.4} / refined {:.4}",
            strong.max_ratio,
            tol::STRONG_PROBE,
            weak.max_ratio,
            tol::WEAK_PROBE,
            a.max_ratio,
            b.max_ratio
        ),
    ))
}

/// `|‖S f‖₂ / ‖f‖₂ - 1|` for inputs with spectrum in `1/4 <= |ξ| <= 8`, so every
/// piece stays well inside the box.
fn band_limited_norm_defect(s: &ReflectionSetup, scales: &[i32]) -> Result<f64> {
    let g = Grid::new(s, 48.0, 2048)?;
    let t = Transform::square(g);
    let pw = build_window(Flavor::Plancherel, 2.0)?;
    let bump = Plateau::new(0.25, 1.0, 2.0, 8.0)?;
    let mut worst = 0.0f64;
    for (a, b) in [(1.0, 0.0), (1.0, 0.5), (0.3, -1.0)] {
        let spec = GridFunction::from_fn(t.freq_grid().clone(), Side::Frequency, |x| {
            C64::new(a + b * x[0], 0.2 * x[0]) * bump.eval(x[0].abs())
        });
        let f = t.inverse(&spec)?;
        let sq = square_function(&t, &pw, &[0.0], &f, scales)?;
        worst = worst.max((sq.l2_norm() / f.l2_norm() - 1.0).abs());
    }
    Ok(worst)
}

fn littlewood_paley() -> Check {
    let mut ok = true;
    let mut notes = Vec::new();
    let us: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 4.0, 8.0].iter().map(|&u| vec![u]).collect();
    let scales: Vec<i32> = (-8..=6).collect();
    for k in [0.0, 1.0] {
        let s = setup1(k)?;
        let g = Grid::new(&s, 24.0, 1024)?;
        let t = Transform::square(g.clone());
        let family: Vec<GridFunction> = [0.0, 2.0, 5.0]
            .iter()
            .map(|&c| -> Result<GridFunction> {
                let vals = (0..g.len())
                    .map(|i| {
                        let x = g.point(i)[0];
                        Ok(crate::kernel::dunkl_kernel_1d(k, x, c)? * (-x * x / 2.0).exp())
                    })
                    .collect::<Result<Vec<_>>>()?;
                GridFunction::new(g.clone(), vals, Side::Space)
            })
            .collect::<Result<_>>()?;
        let norm_err = band_limited_norm_defect(&s, &scales)?;
        let bound = (s.d_k().floor() as u32 + 2) as f64;
        let part = build_window(Flavor::Partition, 2.0)?;
        let mut exps = Vec::new();
        for p in [1.5, 4.0] {
            let rows = modulation_growth_probe(&t, &part, &family, p, &us, &scales)?;
            exps.push(fitted_growth_exponent(&rows)?);
        }
        let emax = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ok &= norm_err < tol::SQUARE_NORM && emax <= bound;
        notes.push(format!("k={k}: norm identity {norm_err:.1e}, growth exponent {emax:.3} <= {bound}"));
    }
    Ok((ok, notes.join("; ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_oracle_recovers_gaussian() {
        let v = classical_fourier(&|x| (-x * x / 2.0).exp(), 1.3);
        assert!((v.re - (-1.3f64 * 1.3 / 2.0).exp()).abs() < 1e-12);
        assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn classical_cz_of_constant_below_height() {
        let (n, cb, cs, cg) = classical_cz_constants(&[1.0; 16], 1.0, 2.0);
        assert_eq!(n, 0);
        assert_eq!((cb, cs), (0.0, 0.0));
        assert_eq!(cg, 0.5);
    }

    #[test]
    fn outcome_lines() {
        let o = Outcome {
            id: 3,
            name: NAMES[2],
            pass: true,
            detail: "x".into(),
            seconds: 0.25,
        };
        assert!(o.line().starts_with("PASS criterion  3 gaussian fixed point"));
    }
}
