use dunkl::kernel::{dunkl_kernel, dunkl_kernel_1d};
use dunkl::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn e1_closed_form(t: f64) -> Complex64 {
    if t.abs() < 1e-3 {
        return Complex64::new(1.0 - t * t / 6.0, t / 3.0 - t.powi(3) / 30.0);
    }
    Complex64::new(t.sin() / t, (t.sin() - t * t.cos()) / (t * t))
}

#[test]
fn kernel_matches_half_integer_closed_form() {
    for i in -200..=200 {
        let t = i as f64 * 0.173;
        let e = dunkl_kernel_1d(1.0, t, 1.0).unwrap();
        assert!((e - e1_closed_form(t)).norm() < 1e-12, "t={t}");
    }
}

#[test]
fn kernel_at_zero_multiplicity_is_exponential() {
    for &(x, y) in &[(0.3, 2.0), (-4.0, 1.5), (7.0, -7.0)] {
        let e = dunkl_kernel_1d(0.0, x, y).unwrap();
        assert!((e - Complex64::from_polar(1.0, x * y)).norm() < 1e-15);
    }
}

#[test]
fn product_kernel_factorises() {
    let s = ReflectionSetup::new(vec![0.5, 2.0]).unwrap();
    let (x, y) = ([1.2, -0.7], [0.4, 3.1]);
    let e = dunkl_kernel(&s, &x, &y).unwrap();
    let p = dunkl_kernel_1d(0.5, x[0], y[0]).unwrap() * dunkl_kernel_1d(2.0, x[1], y[1]).unwrap();
    assert!((e - p).norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kernel_is_bounded_and_symmetric(k in 0.0f64..4.0, x in -30.0f64..30.0, y in -5.0f64..5.0) {
        let e = dunkl_kernel_1d(k, x, y).unwrap();
        prop_assert!(e.norm() <= 1.0 + 1e-10);
        let f = dunkl_kernel_1d(k, y, x).unwrap();
        prop_assert!((e - f).norm() < 1e-12);
        let g = dunkl_kernel_1d(k, -x, y).unwrap();
        prop_assert!((g - e.conj()).norm() < 1e-12);
    }
}

fn classical_fourier(f: &dyn Fn(f64) -> f64, xi: f64) -> Complex64 {
    let n = 8001;
    let h = 40.0 / (n - 1) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let x = -20.0 + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += Complex64::from_polar(f(x) * w, -x * xi);
    }
    acc * h / (2.0 * PI).sqrt()
}

#[test]
fn classical_case_matches_trapezoid_fourier() {
    let g = Grid::new(&ReflectionSetup::uniform(1, 0.0).unwrap(), 12.0, 512).unwrap();
    let t = Transform::square(g.clone());
    let f = |x: f64| (-(x - 0.5) * (x - 0.5)).exp() * (1.0 + 0.2 * x);
    let ff = t.forward(&GridFunction::from_real(g, Side::Space, |x| f(x[0]))).unwrap();
    for i in (0..512).step_by(16) {
        let xi = t.freq_grid().point(i)[0];
        if xi.abs() < 8.0 {
            assert!((ff.values[i] - classical_fourier(&f, xi)).norm() < 1e-9, "xi={xi}");
        }
    }
}

#[test]
fn two_dimensional_gaussian_is_fixed() {
    let s = ReflectionSetup::new(vec![0.5, 1.0]).unwrap();
    let g = Grid::new(&s, 9.0, 128).unwrap();
    let t = Transform::square(g.clone());
    let gauss = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
    let ff = t.forward(&GridFunction::from_real(g, Side::Space, gauss)).unwrap();
    let want = GridFunction::from_real(t.freq_grid().clone(), Side::Frequency, gauss);
    assert!(ff.rel_l2_distance(&want).unwrap() < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn plancherel_and_round_trip(k in 0.0f64..3.0, c in -2.0f64..2.0, a in 0.4f64..2.0, b in -1.0f64..1.0) {
        let g = Grid::new(&ReflectionSetup::uniform(1, k).unwrap(), 12.0, 1024).unwrap();
        let t = Transform::square(g.clone());
        let f = GridFunction::from_real(g, Side::Space, |x| (1.0 + b * x[0]) * (-a * (x[0] - c).powi(2)).exp());
        prop_assert!(t.plancherel_defect(&f).unwrap() < 1e-8);
        let back = t.inverse(&t.forward(&f).unwrap()).unwrap();
        prop_assert!(back.rel_l2_distance(&f).unwrap() < 1e-6);
    }

    #[test]
    fn transform_is_linear(k in 0.0f64..3.0, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let g = Grid::new(&ReflectionSetup::uniform(1, k).unwrap(), 10.0, 128).unwrap();
        let t = Transform::square(g.clone());
        let f = GridFunction::from_real(g.clone(), Side::Space, |x| (-x[0] * x[0]).exp());
        let h = GridFunction::from_real(g, Side::Space, |x| x[0] * (-(x[0] - 1.0).powi(2)).exp());
        let a = Complex64::new(re, im);
        let lhs = t.forward(&f.zip_with(&h, |u, v| a * u + v).unwrap()).unwrap();
        let ff = t.forward(&f).unwrap();
        let fh = t.forward(&h).unwrap();
        let rhs = ff.zip_with(&fh, |u, v| a * u + v).unwrap();
        prop_assert!(lhs.rel_l2_distance(&rhs).unwrap() < 1e-12);
    }
}

#[test]
fn convolution_with_gaussian_matches_multiplier() {
    let g = Grid::new(&ReflectionSetup::uniform(1, 1.0).unwrap(), 12.0, 256).unwrap();
    let t = Transform::square(g.clone());
    let f = GridFunction::from_real(g.clone(), Side::Space, |x| (1.0 + x[0]) * (-x[0] * x[0]).exp());
    let gauss = GridFunction::from_real(g, Side::Space, |x| (-x[0] * x[0] / 2.0).exp());
    let conv = t.convolve(&f, &gauss).unwrap();
    let mult = t
        .linear_multiplier(&|xi: &[f64]| Complex64::new((-xi[0] * xi[0] / 2.0).exp(), 0.0), 1.0, &f)
        .unwrap();
    assert!(conv.rel_l2_distance(&mult).unwrap() < 1e-10);
}
