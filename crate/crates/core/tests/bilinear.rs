use dunkl::bilinear::{cm_decompose, BilinearSymbol, DirectPlan};
use dunkl::*;
use proptest::prelude::*;
use std::sync::Arc;

fn grid(k: f64, n: usize) -> Arc<Grid> {
    Grid::new(&ReflectionSetup::uniform(1, k).unwrap(), 10.0, n).unwrap()
}

fn bump(g: &Arc<Grid>, c: f64, a: f64) -> GridFunction {
    GridFunction::from_real(g.clone(), Side::Space, move |x| (-a * (x[0] - c).powi(2)).exp())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn direct_apply_is_bilinear(re in -2.0f64..2.0, im in -2.0f64..2.0, c in -1.5f64..1.5) {
        let g = grid(1.0, 96);
        let t = Transform::square(g.clone());
        let plan = DirectPlan::new(&t, &BilinearSymbol::product_ratio()).unwrap();
        let f = bump(&g, c, 1.0);
        let h = bump(&g, -0.5, 0.5);
        let q = bump(&g, 0.3, 2.0);
        let a = Complex64::new(re, im);
        let mix = f.zip_with(&h, |u, v| a * u + v).unwrap();
        let lhs = plan.apply(&t, &mix, &q).unwrap();
        let tf = plan.apply(&t, &f, &q).unwrap();
        let th = plan.apply(&t, &h, &q).unwrap();
        let rhs = tf.zip_with(&th, |u, v| a * u + v).unwrap();
        prop_assert!(lhs.rel_l2_distance(&rhs).unwrap() < 1e-12);
    }
}

#[test]
fn unit_symbol_reproduces_the_product() {
    let g = grid(2.0, 128);
    let t = Transform::square(g.clone());
    let plan = DirectPlan::new(&t, &BilinearSymbol::one()).unwrap();
    let f = bump(&g, 0.5, 1.0);
    let h = bump(&g, -1.0, 0.7);
    let out = plan.apply(&t, &f, &h).unwrap();
    let prod = f.zip_with(&h, |u, v| u * v).unwrap();
    assert!(out.rel_l2_distance(&prod).unwrap() < 1e-6);
}

#[test]
fn separable_symbol_is_a_linear_multiplier_times_the_other_input() {
    let g = grid(1.0, 128);
    let t = Transform::square(g.clone());
    let m1 = |xi: &[f64]| Complex64::new((-xi[0] * xi[0] / 4.0).exp(), 0.0);
    let plan = DirectPlan::new(&t, &BilinearSymbol::separable("gauss", m1)).unwrap();
    let f = bump(&g, 0.5, 1.0);
    let h = bump(&g, -0.4, 0.8);
    let out = plan.apply(&t, &f, &h).unwrap();
    let mf = t.linear_multiplier(&m1, 1.0, &f).unwrap();
    let want = mf.zip_with(&h, |u, v| u * v).unwrap();
    assert!(out.rel_l2_distance(&want).unwrap() < 1e-6);
}

#[test]
fn zero_symbol_gives_zero() {
    let g = grid(1.0, 64);
    let t = Transform::square(g.clone());
    let out = DirectPlan::new(&t, &BilinearSymbol::zero())
        .unwrap()
        .apply(&t, &bump(&g, 0.0, 1.0), &bump(&g, 1.0, 1.0))
        .unwrap();
    assert_eq!(out.sup_norm(), 0.0);
}

#[test]
fn decomposition_reconstructs_symbol_in_covered_region() {
    let s = ReflectionSetup::uniform(1, 1.0).unwrap();
    let m = BilinearSymbol::product_ratio();
    let scales: Vec<i32> = (-4..=4).collect();
    let full = cm_decompose(&s, &m, &scales, 12).unwrap();
    let pts = [(0.7, 0.3), (-1.2, 2.0), (3.0, -0.4), (-0.25, -0.9), (1.5, 1.5)];
    let err = |n: usize| {
        let d = full.truncated(n).unwrap();
        pts.iter()
            .map(|&(x, y)| (d.reconstruct(&[x], &[y]) - m.eval(&[x], &[y])).norm())
            .fold(0.0, f64::max)
    };
    let (e2, e6, e12) = (err(2), err(6), err(12));
    assert!(e6 < e2 && e12 < e6, "{e2} {e6} {e12}");
    assert!(e12 < 1e-3, "{e12}");
}

#[test]
fn truncation_keeps_a_subset_of_terms() {
    let s = ReflectionSetup::uniform(1, 0.5).unwrap();
    let full = cm_decompose(&s, &BilinearSymbol::product_ratio(), &[-1, 0, 1], 6).unwrap();
    let mut last = 0;
    for n in 1..=6 {
        let c = full.truncated(n).unwrap().term_count();
        assert!(c >= last);
        last = c;
    }
    assert_eq!(last, full.term_count());
    assert!(full.truncated(7).is_err());
}
