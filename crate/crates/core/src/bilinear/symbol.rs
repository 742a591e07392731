use crate::error::{invalid, DunklError, Result};
use crate::geometry::ReflectionSetup;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::sync::Arc;

type C64 = Complex64;
type SymbolFn = dyn Fn(&[f64], &[f64]) -> C64 + Send + Sync;

/// A bilinear symbol `m(ξ, η)` with its declared regularity order `L`.
#[derive(Clone)]
pub struct BilinearSymbol {
    name: String,
    order: u32,
    real: bool,
    f: Arc<SymbolFn>,
}

impl fmt::Debug for BilinearSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BilinearSymbol")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("real", &self.real)
            .finish()
    }
}

/// Order declared for the smooth degree-zero test symbols.
pub const SMOOTH_ORDER: u32 = 64;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl BilinearSymbol {
    pub fn new(
        name: impl Into<String>,
        order: u32,
        f: impl Fn(&[f64], &[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            order,
            real: false,
            f: Arc::new(f),
        }
    }

    /// A real-valued symbol; the direct apply then uses real arithmetic for `m`.
    pub fn real(
        name: impl Into<String>,
        order: u32,
        f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            order,
            real: true,
            f: Arc::new(move |a, b| C64::new(f(a, b), 0.0)),
        }
    }

    #[inline]
    pub fn eval(&self, xi: &[f64], eta: &[f64]) -> C64 {
        (self.f)(xi, eta)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn with_order(mut self, order: u32) -> Self {
        self.order = order;
        self
    }

    pub fn one() -> Self {
        Self::real("one", SMOOTH_ORDER, |_, _| 1.0)
    }

    pub fn zero() -> Self {
        Self::real("zero", SMOOTH_ORDER, |_, _| 0.0)
    }

    /// `⟨ξ,η⟩ / (|ξ|² + |η|²)`, zero at the origin.
    pub fn product_ratio() -> Self {
        Self::real("product-ratio", SMOOTH_ORDER, |a, b| {
            let s = dot(a, a) + dot(b, b);
            if s > 0.0 {
                dot(a, b) / s
            } else {
                0.0
            }
        })
    }

    /// `(|ξ|² - |η|²) / (|ξ|² + |η|²)`, zero at the origin.
    pub fn difference_ratio() -> Self {
        Self::real("difference-ratio", SMOOTH_ORDER, |a, b| {
            let (x, y) = (dot(a, a), dot(b, b));
            if x + y > 0.0 {
                (x - y) / (x + y)
            } else {
                0.0
            }
        })
    }

    /// `m(ξ, η) = m₁(ξ)`.
    pub fn separable(
        name: impl Into<String>,
        m1: impl Fn(&[f64]) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(name, SMOOTH_ORDER, move |a, _| m1(a))
    }

    /// Smooth bump living in the single block `|ξ|, |η| ~ 2^j`.
    pub fn block_bump(j: i32) -> Self {
        let p = crate::littlewood_paley::Plateau::new(0.55, 0.8, 1.3, 1.8).expect("fixed plateau");
        let s = 2f64.powi(-j);
        Self::real(format!("block-bump-{j}"), SMOOTH_ORDER, move |a, b| {
            p.eval(dot(a, a).sqrt() * s) * p.eval(dot(b, b).sqrt() * s)
        })
    }

    pub fn by_name(id: &str) -> Result<Self> {
        match id {
            "one" => Ok(Self::one()),
            "zero" => Ok(Self::zero()),
            "product-ratio" => Ok(Self::product_ratio()),
            "difference-ratio" => Ok(Self::difference_ratio()),
            _ => Err(DunklError::Config(format!("unknown symbol id '{id}'"))),
        }
    }

    /// Smallest admissible order, `2d + 2⌊d_k⌋ + 5`.
    pub fn required_order(setup: &ReflectionSetup) -> u32 {
        (2 * setup.dim()) as u32 + 2 * setup.d_k().floor() as u32 + 5
    }

    pub fn check_order(&self, setup: &ReflectionSetup) -> Result<()> {
        let need = Self::required_order(setup);
        if self.order < need {
            return Err(DunklError::Hypothesis(format!(
                "symbol '{}' has order {} but the theorem needs at least {need}",
                self.name, self.order
            )));
        }
        Ok(())
    }

    /// Finite-difference audit of `(|ξ|+|η|)^{|α|+|β|} |∂^α_ξ ∂^β_η m|` for
    /// `|α|+|β| <= min(L, 4)` on random points of the dyadic annuli `2^{-4..4}`.
    pub fn derivative_audit(&self, d: usize, samples: usize, seed: u64) -> Result<DerivativeAudit> {
        if d == 0 || samples == 0 {
            return invalid("audit needs a positive dimension and sample count");
        }
        let max_order = self.order.min(4);
        let n = 2 * d;
        let indices = multi_indices(n, max_order);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut per_order = vec![0.0f64; max_order as usize + 1];
        let mut p = vec![0.0; n];
        for s in 0..samples {
            let rho = 2f64.powi((s % 9) as i32 - 4);
            let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l1 = dir[..d].iter().map(|v: &f64| v * v).sum::<f64>().sqrt()
                + dir[d..].iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
            if l1 == 0.0 {
                continue;
            }
            for v in dir.iter_mut() {
                *v *= rho / l1;
            }
            let h = 1e-2 * rho;
            for alpha in &indices {
                let ord: u32 = alpha.iter().sum();
                let mut acc = C64::new(0.0, 0.0);
                let stencils: Vec<Vec<(f64, f64)>> = alpha.iter().map(|&a| stencil(a, h)).collect();
                let mut idx = vec![0usize; n];
                'outer: loop {
                    let mut coef = 1.0;
                    for i in 0..n {
                        let (off, c) = stencils[i][idx[i]];
                        p[i] = dir[i] + off;
                        coef *= c;
                    }
                    acc += self.eval(&p[..d], &p[d..]) * coef;
                    for i in 0..n {
                        idx[i] += 1;
                        if idx[i] < stencils[i].len() {
                            continue 'outer;
                        }
                        idx[i] = 0;
                    }
                    break;
                }
                let v = rho.powi(ord as i32) * acc.norm();
                if !v.is_finite() {
                    return Err(DunklError::Hypothesis(format!(
                        "symbol '{}' derivative of order {ord} is not finite near radius {rho}",
                        self.name
                    )));
                }
                per_order[ord as usize] = per_order[ord as usize].max(v);
            }
        }
        Ok(DerivativeAudit {
            max_order,
            max: per_order.iter().cloned().fold(0.0, f64::max),
            per_order,
            samples,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeAudit {
    pub max_order: u32,
    /// Largest scaled derivative for each total order `0..=max_order`.
    pub per_order: Vec<f64>,
    pub max: f64,
    pub samples: usize,
}

fn multi_indices(n: usize, max_order: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for a in 0..=left {
            cur[i] = a;
            rec(i + 1, left - a, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max_order, &mut cur, &mut out);
    out
}

fn stencil(order: u32, h: f64) -> Vec<(f64, f64)> {
    match order {
        0 => vec![(0.0, 1.0)],
        1 => vec![(-h, -0.5 / h), (h, 0.5 / h)],
        2 => {
            let c = 1.0 / (h * h);
            vec![(-h, c), (0.0, -2.0 * c), (h, c)]
        }
        3 => {
            let c = 0.5 / (h * h * h);
            vec![(-2.0 * h, -c), (-h, 2.0 * c), (h, -2.0 * c), (2.0 * h, c)]
        }
        _ => {
            let c = 1.0 / h.powi(4);
            vec![
                (-2.0 * h, c),
                (-h, -4.0 * c),
                (0.0, 6.0 * c),
                (h, -4.0 * c),
                (2.0 * h, c),
            ]
        }
    }
}
