use dunkl::czd::{cz_decompose, cz_test_family, cz_verify, enlarged_balls};
use dunkl::weights::*;
use dunkl::*;
use proptest::prelude::*;
use std::sync::Arc;

fn grid(k: f64, r: f64, n: usize) -> Arc<Grid> {
    Grid::new(&ReflectionSetup::uniform(1, k).unwrap(), r, n).unwrap()
}

fn family(g: &Arc<Grid>) -> BallFamily {
    BallFamily::lattice(g.clone(), 0.25, 2.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn maximal_is_monotone_and_homogeneous(c in -2.0f64..2.0, s in 0.1f64..5.0) {
        let g = grid(1.0, 4.0, 64);
        let fam = family(&g);
        let f = GridFunction::from_real(g.clone(), Side::Space, |x| (-(x[0] - c).powi(2)).exp());
        let h = GridFunction::from_real(g.clone(), Side::Space, |x| (-(x[0] - c).powi(2)).exp() + 0.1);
        let mf = maximal(&[&f], &fam).unwrap();
        let mh = maximal(&[&h], &fam).unwrap();
        for (a, b) in mf.values.iter().zip(&mh.values) {
            prop_assert!(a.re <= b.re + 1e-15);
        }
        let scaled = maximal(&[&f.map(|v| v * s)], &fam).unwrap();
        for (a, b) in mf.values.iter().zip(&scaled.values) {
            prop_assert!((a.re * s - b.re).abs() <= 1e-12 * b.re.max(1.0));
        }
    }

    #[test]
    fn ap_constant_is_scale_invariant_and_at_least_one(a in -0.6f64..0.6, c in 0.1f64..10.0, p in 1.2f64..4.0) {
        let g = grid(1.0, 4.0, 64);
        let fam = family(&g);
        let w = WeightSpec::power(a);
        let base = ap_constant(&w, p, &fam).unwrap();
        let scaled = ap_constant(&w.scaled(c), p, &fam).unwrap();
        prop_assert!(base >= 1.0 - 1e-12);
        prop_assert!((base - scaled).abs() < 1e-10 * base);
    }
}

#[test]
fn unweighted_norm_matches_lp_norm() {
    let g = grid(0.5, 6.0, 128);
    let f = GridFunction::from_real(g, Side::Space, |x| (1.0 + x[0]) * (-x[0] * x[0]).exp());
    for p in [1.0, 1.5, 2.0, 3.0] {
        let a = weighted_norm(&f, &WeightSpec::constant(1.0), p).unwrap();
        let b = f.lp_norm(p);
        assert!((a - b).abs() < 1e-12 * b, "p={p}");
    }
}

#[test]
fn weak_norm_is_below_strong_norm() {
    let g = grid(1.0, 6.0, 128);
    let f = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0]).exp());
    let w = WeightSpec::power(0.3);
    for p in [1.0, 2.0] {
        let weak = weak_norm(&f, &w, p, &default_levels(&f)).unwrap();
        let strong = weighted_norm(&f, &w, p).unwrap();
        assert!(weak <= strong * (1.0 + 1e-9), "p={p}: {weak} > {strong}");
    }
}

/// Classical dyadic stopping time on `[-r, r]` with Lebesgue measure.
fn classical_cz(values: &[f64], lambda: f64) -> (usize, Vec<f64>) {
    let mut good = values.to_vec();
    let mut count = 0;
    let mut stack = vec![(0usize, values.len())];
    while let Some((a, b)) = stack.pop() {
        let avg = values[a..b].iter().map(|v| v.abs()).sum::<f64>() / (b - a) as f64;
        if avg > lambda {
            let mean = values[a..b].iter().sum::<f64>() / (b - a) as f64;
            good[a..b].iter_mut().for_each(|v| *v = mean);
            count += 1;
        } else if b - a > 1 {
            stack.push(((a + b) / 2, b));
            stack.push((a, (a + b) / 2));
        }
    }
    (count, good)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn classical_case_matches_lebesgue_stopping_time(seed in 0u64..1000) {
        let g = grid(0.0, 8.0, 256);
        for (f, lambda) in cz_test_family(&g, 3, seed) {
            let dec = cz_decompose(&f, lambda).unwrap();
            let vals: Vec<f64> = f.values.iter().map(|v| v.re).collect();
            let (count, good) = classical_cz(&vals, lambda);
            prop_assert_eq!(count, dec.pieces.len());
            for (a, b) in dec.good.values.iter().zip(&good) {
                prop_assert!((a.re - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decomposition_invariants_hold(k in 0.0f64..2.0, seed in 0u64..1000) {
        let g = grid(k, 8.0, 256);
        for (f, lambda) in cz_test_family(&g, 3, seed) {
            let dec = cz_decompose(&f, lambda).unwrap();
            let rep = cz_verify(&dec).unwrap();
            prop_assert!(rep.split_error < 1e-12);
            prop_assert!(rep.constants.c_sum <= 1.0 + 1e-12);
            prop_assert!(rep.constants.c_good <= 2f64.powf(1.0 + 2.0 * k) + 1e-12);
            let e = enlarged_balls(&dec, 5.0).unwrap();
            prop_assert!(e.constant.is_finite());
        }
    }
}

#[test]
fn height_above_sup_leaves_no_bad_part() {
    let g = grid(1.0, 4.0, 64);
    let f = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0]).exp());
    let dec = cz_decompose(&f, 2.0).unwrap();
    assert!(dec.pieces.is_empty());
    assert_eq!(dec.good.values, f.values);
}
