use dunkl_ffi::*;
use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

fn transform(k: &[f64], radius: f64, nodes: usize) -> *mut DunklTransform {
    let mut t = ptr::null_mut();
    let s = unsafe { dunkl_transform_new(k.as_ptr(), k.len(), radius, nodes, &mut t) };
    assert_eq!(s, DunklStatus::Ok);
    assert!(!t.is_null());
    t
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { dunkl_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(dunkl_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn gaussian_is_fixed_through_the_c_interface() {
    let t = transform(&[1.0], 12.0, 256);
    let n = unsafe { dunkl_transform_len(t) };
    assert_eq!(n, 256);
    let mut x = vec![0.0; n];
    assert_eq!(unsafe { dunkl_transform_nodes(t, x.as_mut_ptr()) }, DunklStatus::Ok);
    let f: Vec<f64> = x.iter().map(|v| (-v * v / 2.0).exp()).collect();
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    let s = unsafe { dunkl_transform_forward(t, f.as_ptr(), ptr::null(), re.as_mut_ptr(), im.as_mut_ptr()) };
    assert_eq!(s, DunklStatus::Ok);
    for i in 0..n {
        assert!((re[i] - f[i]).abs() < 1e-8 && im[i].abs() < 1e-8);
    }
    let (mut br, mut bi) = (vec![0.0; n], vec![0.0; n]);
    let s = unsafe { dunkl_transform_inverse(t, re.as_ptr(), im.as_ptr(), br.as_mut_ptr(), bi.as_mut_ptr()) };
    assert_eq!(s, DunklStatus::Ok);
    for i in 0..n {
        assert!((br[i] - f[i]).abs() < 1e-8);
    }
    unsafe { dunkl_transform_free(t) };
}

#[test]
fn invalid_arguments_map_to_status_codes() {
    let mut t = ptr::null_mut();
    let k = [-1.0];
    let s = unsafe { dunkl_transform_new(k.as_ptr(), 1, 12.0, 64, &mut t) };
    assert_eq!(s, DunklStatus::InvalidParameter);
    assert!(t.is_null());
    assert!(!last_error().is_empty());
    let s = unsafe { dunkl_transform_new(ptr::null(), 1, 12.0, 64, &mut t) };
    assert_eq!(s, DunklStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { dunkl_transform_len(ptr::null()) }, 0);
    unsafe { dunkl_transform_free(ptr::null_mut()) };
}

#[test]
fn kernel_matches_exponential_at_zero_multiplicity() {
    let (k, x, y) = ([0.0], [1.3], [0.7]);
    let (mut re, mut im) = (0.0, 0.0);
    let s = unsafe { dunkl_kernel_eval(k.as_ptr(), 1, x.as_ptr(), y.as_ptr(), &mut re, &mut im) };
    assert_eq!(s, DunklStatus::Ok);
    assert!((re - (0.91f64).cos()).abs() < 1e-15 && (im - (0.91f64).sin()).abs() < 1e-15);
}

#[test]
fn bilinear_unit_symbol_is_the_product() {
    let t = transform(&[2.0], 10.0, 128);
    let n = unsafe { dunkl_transform_len(t) };
    let mut x = vec![0.0; n];
    unsafe { dunkl_transform_nodes(t, x.as_mut_ptr()) };
    let f1: Vec<f64> = x.iter().map(|v| (-(v - 0.5) * (v - 0.5)).exp()).collect();
    let f2: Vec<f64> = x.iter().map(|v| (-0.7 * (v + 1.0) * (v + 1.0)).exp()).collect();
    let mut p = ptr::null_mut();
    let s = unsafe { dunkl_bilinear_new(t, c"one".as_ptr(), &mut p) };
    assert_eq!(s, DunklStatus::Ok);
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    let s = unsafe {
        dunkl_bilinear_apply(p, t, f1.as_ptr(), ptr::null(), f2.as_ptr(), ptr::null(), re.as_mut_ptr(), im.as_mut_ptr())
    };
    assert_eq!(s, DunklStatus::Ok);
    for i in 0..n {
        assert!((re[i] - f1[i] * f2[i]).abs() < 1e-6 && im[i].abs() < 1e-6);
    }
    let mut q = ptr::null_mut();
    let s = unsafe { dunkl_bilinear_new(t, c"cubic".as_ptr(), &mut q) };
    assert_eq!(s, DunklStatus::Config);
    assert!(last_error().contains("cubic"));
    let other = transform(&[2.0], 10.0, 64);
    let s = unsafe {
        dunkl_bilinear_apply(p, other, f1.as_ptr(), ptr::null(), f2.as_ptr(), ptr::null(), re.as_mut_ptr(), im.as_mut_ptr())
    };
    assert_eq!(s, DunklStatus::GridMismatch);
    unsafe {
        dunkl_bilinear_free(p);
        dunkl_transform_free(other);
        dunkl_transform_free(t);
    }
}

#[test]
fn cz_decomposition_counts_pieces() {
    let t = transform(&[0.0], 4.0, 64);
    let n = unsafe { dunkl_transform_len(t) };
    let mut x = vec![0.0; n];
    unsafe { dunkl_transform_nodes(t, x.as_mut_ptr()) };
    let f: Vec<f64> = x.iter().map(|v| (-4.0 * v * v).exp()).collect();
    let mut good = vec![0.0; n];
    let mut pieces = 0usize;
    let s = unsafe { dunkl_cz_decompose(t, f.as_ptr(), 0.3, good.as_mut_ptr(), &mut pieces) };
    assert_eq!(s, DunklStatus::Ok);
    assert!(pieces > 0);
    assert!(good.iter().all(|g| g.abs() <= 2.0 * 0.3 + 1e-12));
    unsafe { dunkl_transform_free(t) };
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("dunkl.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["dunkl_transform_new", "dunkl_bilinear_apply", "dunkl_cz_decompose", "DUNKL_STATUS_PANIC"] {
        assert!(text.contains(name), "{name}");
    }
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .output()
    else {
        eprintln!("no C compiler; skipping syntax check");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
