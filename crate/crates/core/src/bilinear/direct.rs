use super::symbol::BilinearSymbol;
use crate::error::{invalid, DunklError, Result};
use crate::grid::{GridFunction, Side};
use crate::transform::{dot2, Transform};
use num_complex::Complex64;
use rayon::prelude::*;

type C64 = Complex64;

#[derive(Debug, Clone)]
enum SymbolMatrix {
    Real(Vec<f64>),
    Complex(Vec<C64>),
}

/// Symbol sampled on all frequency node pairs, reusable across inputs.
#[derive(Debug, Clone)]
pub struct DirectPlan {
    n: usize,
    m: SymbolMatrix,
}

impl DirectPlan {
    pub fn new(t: &Transform, m: &BilinearSymbol) -> Result<Self> {
        let g = t.freq_grid();
        let n = g.len();
        let pts = g.points();
        let d = g.dim();
        let rows: Vec<Vec<C64>> = pts
            .par_iter()
            .map(|xi| pts.iter().map(|eta| m.eval(xi, eta)).collect())
            .collect();
        let mut flat = Vec::with_capacity(n * n);
        for (a, r) in rows.into_iter().enumerate() {
            if let Some(b) = r.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(DunklError::InvalidParameter(format!(
                    "symbol '{}' is not finite at node pair {:?}, {:?} (d={d})",
                    m.name(),
                    pts[a],
                    pts[b]
                )));
            }
            flat.extend(r);
        }
        let m = if m.is_real() {
            SymbolMatrix::Real(flat.iter().map(|v| v.re).collect())
        } else {
            SymbolMatrix::Complex(flat)
        };
        Ok(Self { n, m })
    }

    /// `T_m(f1, f2)` by the double frequency sum at every space node.
    pub fn apply(&self, t: &Transform, f1: &GridFunction, f2: &GridFunction) -> Result<GridFunction> {
        f1.same_grid(f2)?;
        if f1.side != Side::Space || f2.side != Side::Space {
            return invalid("bilinear inputs must be space-side");
        }
        if !std::sync::Arc::ptr_eq(&f1.grid, t.space_grid()) && !f1.grid.compatible(t.space_grid()) {
            return Err(DunklError::GridMismatch("inputs not on the transform's space grid".into()));
        }
        if t.freq_grid().len() != self.n {
            return Err(DunklError::GridMismatch("plan built for another frequency grid".into()));
        }
        let a = t.forward(f1)?;
        let b = t.forward(f2)?;
        let vals = self.apply_spectra(t, &a.values, &b.values);
        GridFunction::new(t.space_grid().clone(), vals, Side::Space)
    }

    /// Same as [`apply`](Self::apply) on precomputed spectra.
    pub fn apply_spectra(&self, t: &Transform, s1: &[C64], s2: &[C64]) -> Vec<C64> {
        let space = t.space_grid();
        let freq = t.freq_grid();
        let n = self.n;
        let d = space.dim();
        let w = freq.weights();
        let xshape = space.shape();
        let qshape = freq.shape();
        (0..space.len())
            .into_par_iter()
            .map_init(
                || {
                    (
                        vec![0.0; n],
                        vec![0.0; n],
                        vec![C64::new(0.0, 0.0); n],
                        vec![0usize; d],
                    )
                },
                |(br, bi, e, xi), x| {
                    let mut r = x;
                    for i in (0..d).rev() {
                        xi[i] = r % xshape[i];
                        r /= xshape[i];
                    }
                    for (q, ev) in e.iter_mut().enumerate() {
                        let mut rq = q;
                        let mut v = C64::new(1.0, 0.0);
                        for i in (0..d).rev() {
                            v *= t.axis_kernel(i).value(xi[i], rq % qshape[i]);
                            rq /= qshape[i];
                        }
                        *ev = v * w[q];
                    }
                    for q in 0..n {
                        let v = s2[q] * e[q];
                        br[q] = v.re;
                        bi[q] = v.im;
                    }
                    let mut acc = C64::new(0.0, 0.0);
                    match &self.m {
                        SymbolMatrix::Real(m) => {
                            for p in 0..n {
                                let a = s1[p] * e[p];
                                if a == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                let (ir, ii) = dot2(&m[p * n..(p + 1) * n], br, bi);
                                acc += a * C64::new(ir, ii);
                            }
                        }
                        SymbolMatrix::Complex(m) => {
                            for p in 0..n {
                                let a = s1[p] * e[p];
                                let row = &m[p * n..(p + 1) * n];
                                let mut inner = C64::new(0.0, 0.0);
                                for q in 0..n {
                                    inner += row[q] * C64::new(br[q], bi[q]);
                                }
                                acc += a * inner;
                            }
                        }
                    }
                    acc
                },
            )
            .collect()
    }
}

/// `T_m(f1,f2)(x) = Σ_{ξ,η} m(ξ,η) F f1(ξ) F f2(η) E(ix,ξ) E(ix,η) w(ξ) w(η)`.
pub fn bilinear_apply_direct(
    t: &Transform,
    m: &BilinearSymbol,
    f1: &GridFunction,
    f2: &GridFunction,
) -> Result<GridFunction> {
    DirectPlan::new(t, m)?.apply(t, f1, f2)
}
