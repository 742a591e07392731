//! C interface over the `dunkl` library: opaque transform and bilinear-plan
//! handles, split real/imaginary buffers and integer status codes.

use dunkl::bilinear::{BilinearSymbol, DirectPlan};
use dunkl::czd::cz_decompose;
use dunkl::kernel::dunkl_kernel;
use dunkl::{Complex64, DunklError, Grid, GridFunction, ReflectionSetup, Side, Transform};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DunklStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    GridMismatch = 3,
    NonConvergence = 4,
    Hypothesis = 5,
    Invariant = 6,
    Degenerate = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
}

/// A transform on a square space/frequency grid.
pub struct DunklTransform {
    inner: Transform,
}

/// A direct bilinear quadrature plan bound to the transform it was built on.
pub struct DunklBilinearPlan {
    inner: DirectPlan,
    grid_len: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &DunklError) -> DunklStatus {
    match e {
        DunklError::InvalidParameter(_) => DunklStatus::InvalidParameter,
        DunklError::GridMismatch(_) => DunklStatus::GridMismatch,
        DunklError::SeriesNonConvergence { .. } => DunklStatus::NonConvergence,
        DunklError::Hypothesis(_) => DunklStatus::Hypothesis,
        DunklError::Invariant(_) => DunklStatus::Invariant,
        DunklError::Degenerate(_) => DunklStatus::Degenerate,
        DunklError::Config(_) => DunklStatus::Config,
        DunklError::Io(_) => DunklStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DunklStatus>) -> DunklStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DunklStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside the library".into());
            DunklStatus::Panic
        }
    }
}

fn lift<T>(r: dunkl::Result<T>) -> Result<T, DunklStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn null(what: &str) -> DunklStatus {
    set_error(format!("{what} is null"));
    DunklStatus::NullPointer
}

unsafe fn read_complex(re: *const f64, im: *const f64, n: usize) -> Result<Vec<Complex64>, DunklStatus> {
    if re.is_null() {
        return Err(null("real input"));
    }
    let re = std::slice::from_raw_parts(re, n);
    let im = if im.is_null() { None } else { Some(std::slice::from_raw_parts(im, n)) };
    Ok((0..n)
        .map(|i| Complex64::new(re[i], im.map_or(0.0, |s| s[i])))
        .collect())
}

unsafe fn write_complex(v: &[Complex64], re: *mut f64, im: *mut f64) -> Result<(), DunklStatus> {
    if re.is_null() || im.is_null() {
        return Err(null("output buffer"));
    }
    let re = std::slice::from_raw_parts_mut(re, v.len());
    let im = std::slice::from_raw_parts_mut(im, v.len());
    for (i, c) in v.iter().enumerate() {
        re[i] = c.re;
        im[i] = c.im;
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dunkl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, 0 when there is none.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dunkl_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Builds a transform for multiplicities `k[0..dim]` on `[-radius, radius]^dim`
/// with `nodes` points per axis.
///
/// # Safety
/// `k` must point to `dim` readable doubles and `out` to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn dunkl_transform_new(
    k: *const f64,
    dim: usize,
    radius: f64,
    nodes: usize,
    out: *mut *mut DunklTransform,
) -> DunklStatus {
    guard(|| {
        if k.is_null() {
            return Err(null("k"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let ks = std::slice::from_raw_parts(k, dim).to_vec();
        let setup = lift(ReflectionSetup::new(ks))?;
        let grid = lift(Grid::new(&setup, radius, nodes))?;
        *out = Box::into_raw(Box::new(DunklTransform {
            inner: Transform::square(grid),
        }));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from [`dunkl_transform_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dunkl_transform_free(t: *mut DunklTransform) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of grid points; 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dunkl_transform_len(t: *const DunklTransform) -> usize {
    t.as_ref().map_or(0, |t| t.inner.space_grid().len())
}

/// Writes the space nodes, `dim` coordinates per point, row-major.
///
/// # Safety
/// `coords` must point to `dim * dunkl_transform_len(t)` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dunkl_transform_nodes(t: *const DunklTransform, coords: *mut f64) -> DunklStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        if coords.is_null() {
            return Err(null("coords"));
        }
        let g = t.inner.space_grid();
        let d = g.dim();
        let out = std::slice::from_raw_parts_mut(coords, d * g.len());
        for i in 0..g.len() {
            g.point_into(i, &mut out[i * d..(i + 1) * d]);
        }
        Ok(())
    })
}

unsafe fn apply_transform(
    t: *const DunklTransform,
    re_in: *const f64,
    im_in: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
    forward: bool,
) -> DunklStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        let n = t.inner.space_grid().len();
        let v = read_complex(re_in, im_in, n)?;
        let out = if forward {
            t.inner.forward_values(&v)
        } else {
            t.inner.inverse_values(&v)
        };
        write_complex(&out, re_out, im_out)
    })
}

/// Forward transform of the grid samples. `im_in` may be null for real input.
///
/// # Safety
/// Input buffers must hold `dunkl_transform_len(t)` doubles, outputs likewise writable.
#[no_mangle]
pub unsafe extern "C" fn dunkl_transform_forward(
    t: *const DunklTransform,
    re_in: *const f64,
    im_in: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> DunklStatus {
    apply_transform(t, re_in, im_in, re_out, im_out, true)
}

/// Inverse transform; same buffer contract as [`dunkl_transform_forward`].
///
/// # Safety
/// See [`dunkl_transform_forward`].
#[no_mangle]
pub unsafe extern "C" fn dunkl_transform_inverse(
    t: *const DunklTransform,
    re_in: *const f64,
    im_in: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> DunklStatus {
    apply_transform(t, re_in, im_in, re_out, im_out, false)
}

/// `E_k(ix, y)` for the multiplicities `k[0..dim]`.
///
/// # Safety
/// `k`, `x`, `y` must point to `dim` doubles; `re`, `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dunkl_kernel_eval(
    k: *const f64,
    dim: usize,
    x: *const f64,
    y: *const f64,
    re: *mut f64,
    im: *mut f64,
) -> DunklStatus {
    guard(|| {
        if k.is_null() || x.is_null() || y.is_null() {
            return Err(null("k, x or y"));
        }
        let setup = lift(ReflectionSetup::new(std::slice::from_raw_parts(k, dim).to_vec()))?;
        let e = lift(dunkl_kernel(
            &setup,
            std::slice::from_raw_parts(x, dim),
            std::slice::from_raw_parts(y, dim),
        ))?;
        write_complex(&[e], re, im)
    })
}

/// Plans the direct bilinear quadrature of a named symbol (`one`, `zero`,
/// `product-ratio`, `difference-ratio`).
///
/// # Safety
/// `t` must be a live handle, `symbol` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dunkl_bilinear_new(
    t: *const DunklTransform,
    symbol: *const c_char,
    out: *mut *mut DunklBilinearPlan,
) -> DunklStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        if symbol.is_null() {
            return Err(null("symbol"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(symbol).to_str().map_err(|_| {
            set_error("symbol name is not UTF-8".into());
            DunklStatus::InvalidParameter
        })?;
        let m = lift(BilinearSymbol::by_name(name))?;
        let plan = lift(DirectPlan::new(&t.inner, &m))?;
        *out = Box::into_raw(Box::new(DunklBilinearPlan {
            inner: plan,
            grid_len: t.inner.space_grid().len(),
        }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`dunkl_bilinear_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dunkl_bilinear_free(p: *mut DunklBilinearPlan) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// `T_m(f1, f2)` on the space grid. Null imaginary inputs mean real data.
///
/// # Safety
/// `p` must have been planned on `t`; all buffers hold `dunkl_transform_len(t)` doubles.
#[no_mangle]
pub unsafe extern "C" fn dunkl_bilinear_apply(
    p: *const DunklBilinearPlan,
    t: *const DunklTransform,
    f1_re: *const f64,
    f1_im: *const f64,
    f2_re: *const f64,
    f2_im: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> DunklStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("plan"))?;
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        let n = t.inner.space_grid().len();
        if n != p.grid_len {
            set_error(format!("plan built for {} points, transform has {n}", p.grid_len));
            return Err(DunklStatus::GridMismatch);
        }
        let a = t.inner.forward_values(&read_complex(f1_re, f1_im, n)?);
        let b = t.inner.forward_values(&read_complex(f2_re, f2_im, n)?);
        write_complex(&p.inner.apply_spectra(&t.inner, &a, &b), re_out, im_out)
    })
}

/// Calderon-Zygmund decomposition of real samples at height `lambda`; writes the
/// good part and returns the number of bad cubes in `pieces`.
///
/// # Safety
/// `f` and `good` must hold `dunkl_transform_len(t)` doubles; `pieces` writable.
#[no_mangle]
pub unsafe extern "C" fn dunkl_cz_decompose(
    t: *const DunklTransform,
    f: *const f64,
    lambda: f64,
    good: *mut f64,
    pieces: *mut usize,
) -> DunklStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("transform"))?;
        if good.is_null() || pieces.is_null() {
            return Err(null("output"));
        }
        let g = t.inner.space_grid().clone();
        let vals = read_complex(f, ptr::null(), g.len())?;
        let func = lift(GridFunction::new(g, vals, Side::Space))?;
        let dec = lift(cz_decompose(&func, lambda))?;
        let out = std::slice::from_raw_parts_mut(good, dec.good.len());
        for (o, v) in out.iter_mut().zip(&dec.good.values) {
            *o = v.re;
        }
        *pieces = dec.pieces.len();
        Ok(())
    })
}
