//! TOML experiment configuration shared by every subcommand.
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected so a misspelled field fails loudly.

use crate::error::{DunklError, Result};
use crate::geometry::ReflectionSetup;
use crate::littlewood_paley::Flavor;
use crate::weights::WeightSpec;
use crate::bilinear::BilinearSymbol;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub setup: SetupSection,
    pub grid: GridSection,
    pub transform: TransformSection,
    pub lp: LpSection,
    pub maximal: MaximalSection,
    pub bilinear: BilinearSection,
    pub kernel: KernelSection,
    pub weights: WeightsSection,
    pub cz: CzSection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetupSection {
    /// One multiplicity per axis; the dimension is its length.
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub radius: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSection {
    /// Multiplicities swept by `transform-selftest` in one dimension.
    pub k_sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LpSection {
    pub flavor: String,
    pub r_supp: f64,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub scales: [i32; 2],
    /// Modulation frequencies of the test family `E_k(ix, c) e^{-|x|²/2}`.
    pub family: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaximalSection {
    /// `gaussian` for `e^{-|ξ|²}` or `cauchy` for `(1+|ξ|²)^{-1}`.
    pub symbol: String,
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilinearSection {
    pub symbol: String,
    pub n_trunc: usize,
    pub n_list: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub symbol: String,
    pub count: usize,
    pub scales: [i32; 2],
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    /// `power:a`, `product:a1,a2,..` or `constant:c`, one per input.
    pub w: [String; 2],
    pub p: [f64; 2],
    pub r_min: f64,
    pub r_max: f64,
    pub bump_t: f64,
    pub symbol: String,
    pub pairs: usize,
    pub blow_up_shrink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CzSection {
    pub count: usize,
    /// Member of the test family written out in full.
    pub index: usize,
    pub dilation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub nodes: usize,
    pub radius: f64,
    pub k: f64,
    pub n_trunc: usize,
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            setup: SetupSection::default(),
            grid: GridSection::default(),
            transform: TransformSection::default(),
            lp: LpSection::default(),
            maximal: MaximalSection::default(),
            bilinear: BilinearSection::default(),
            kernel: KernelSection::default(),
            weights: WeightsSection::default(),
            cz: CzSection::default(),
            bench: BenchSection::default(),
        }
    }
}

impl Default for SetupSection {
    fn default() -> Self {
        Self { k: vec![1.0] }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            radius: 12.0,
            nodes: 512,
        }
    }
}

impl Default for TransformSection {
    fn default() -> Self {
        Self {
            k_sweep: vec![0.0, 0.5, 1.0, 2.5],
        }
    }
}

impl Default for LpSection {
    fn default() -> Self {
        Self {
            flavor: "partition".into(),
            r_supp: 2.0,
            p: vec![1.5, 2.0, 4.0],
            u: vec![0.0, 1.0, 2.0, 4.0, 8.0],
            scales: [-8, 6],
            family: vec![0.0, 2.0, 5.0],
        }
    }
}

impl Default for MaximalSection {
    fn default() -> Self {
        Self {
            symbol: "gaussian".into(),
            t_min: 0.0625,
            t_max: 16.0,
            t_count: 17,
        }
    }
}

impl Default for BilinearSection {
    fn default() -> Self {
        Self {
            symbol: "product-ratio".into(),
            n_trunc: 8,
            n_list: vec![2, 4, 8, 16],
        }
    }
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            symbol: "product-ratio".into(),
            count: 200,
            scales: [-8, 8],
            refine: true,
        }
    }
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self {
            w: ["power:0.2".into(), "power:0.2".into()],
            p: [2.0, 2.0],
            r_min: 0.0625,
            r_max: 4.0,
            bump_t: 1.1,
            symbol: "product-ratio".into(),
            pairs: 10,
            blow_up_shrink: 100.0,
        }
    }
}

impl Default for CzSection {
    fn default() -> Self {
        Self {
            count: 20,
            index: 0,
            dilation: 5.0,
        }
    }
}

impl Default for BenchSection {
    fn default() -> Self {
        let b = crate::bench::BenchConfig::default();
        Self {
            nodes: b.nodes,
            radius: b.radius,
            k: b.k,
            n_trunc: b.n_trunc,
            repeats: b.repeats,
        }
    }
}

fn bad(field: &str, msg: impl std::fmt::Display) -> DunklError {
    DunklError::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| DunklError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DunklError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            DunklError::Config(m) => DunklError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.reflection_setup()?;
        if !(self.grid.radius > 0.0) {
            return Err(bad("grid.radius", "must be positive"));
        }
        if self.grid.nodes < 2 || !self.grid.nodes.is_multiple_of(2) {
            return Err(bad("grid.nodes", "must be an even number >= 2"));
        }
        if self.transform.k_sweep.iter().any(|&k| !(k >= 0.0)) {
            return Err(bad("transform.k_sweep", "multiplicities must be >= 0"));
        }
        self.lp.flavor.parse::<Flavor>().map_err(|e| bad("lp.flavor", e))?;
        if !(self.lp.r_supp > 1.0) {
            return Err(bad("lp.r_supp", "must exceed 1"));
        }
        if self.lp.p.is_empty() || self.lp.p.iter().any(|&p| !(p >= 1.0)) {
            return Err(bad("lp.p", "needs exponents >= 1"));
        }
        if self.lp.u.is_empty() {
            return Err(bad("lp.u", "is empty"));
        }
        if self.lp.scales[0] > self.lp.scales[1] {
            return Err(bad("lp.scales", "lower end exceeds upper end"));
        }
        if self.lp.family.is_empty() {
            return Err(bad("lp.family", "is empty"));
        }
        self.maximal_symbol()?;
        if !(self.maximal.t_min > 0.0 && self.maximal.t_max >= self.maximal.t_min) || self.maximal.t_count == 0 {
            return Err(bad("maximal", "need 0 < t_min <= t_max and t_count >= 1"));
        }
        BilinearSymbol::by_name(&self.bilinear.symbol).map_err(|e| bad("bilinear.symbol", e))?;
        if self.bilinear.n_trunc == 0 || self.bilinear.n_list.contains(&0) {
            return Err(bad("bilinear.n_trunc", "truncation radii must be >= 1"));
        }
        BilinearSymbol::by_name(&self.kernel.symbol).map_err(|e| bad("kernel.symbol", e))?;
        if self.kernel.count == 0 || self.kernel.scales[0] > self.kernel.scales[1] {
            return Err(bad("kernel", "need count >= 1 and an ordered scale range"));
        }
        self.weight_specs()?;
        if self.weights.p.iter().any(|&p| !(p >= 1.0)) {
            return Err(bad("weights.p", "exponents must be >= 1"));
        }
        if !(self.weights.r_min > 0.0 && self.weights.r_max >= self.weights.r_min) {
            return Err(bad("weights.r_min", "need 0 < r_min <= r_max"));
        }
        if !(self.weights.bump_t > 1.0) {
            return Err(bad("weights.bump_t", "must exceed 1"));
        }
        if !(self.weights.blow_up_shrink > 1.0) {
            return Err(bad("weights.blow_up_shrink", "must exceed 1"));
        }
        BilinearSymbol::by_name(&self.weights.symbol).map_err(|e| bad("weights.symbol", e))?;
        if self.weights.pairs == 0 {
            return Err(bad("weights.pairs", "must be >= 1"));
        }
        if self.cz.count == 0 || self.cz.index >= self.cz.count {
            return Err(bad("cz.index", "must be below cz.count"));
        }
        if !(self.cz.dilation >= 1.0) {
            return Err(bad("cz.dilation", "must be >= 1"));
        }
        if self.bench.nodes < 2 || !self.bench.nodes.is_multiple_of(2) || self.bench.n_trunc == 0 || self.bench.repeats == 0 {
            return Err(bad("bench", "need even nodes, n_trunc >= 1 and repeats >= 1"));
        }
        Ok(())
    }

    pub fn reflection_setup(&self) -> Result<ReflectionSetup> {
        if self.setup.k.is_empty() {
            return Err(bad("setup.k", "needs at least one multiplicity"));
        }
        ReflectionSetup::new(self.setup.k.clone()).map_err(|e| bad("setup.k", e))
    }

    pub fn weight_specs(&self) -> Result<[WeightSpec; 2]> {
        Ok([
            parse_weight(&self.weights.w[0]).map_err(|e| bad("weights.w[0]", e))?,
            parse_weight(&self.weights.w[1]).map_err(|e| bad("weights.w[1]", e))?,
        ])
    }

    pub fn maximal_symbol(&self) -> Result<fn(&[f64]) -> num_complex::Complex64> {
        fn gaussian(x: &[f64]) -> num_complex::Complex64 {
            (-x.iter().map(|v| v * v).sum::<f64>()).exp().into()
        }
        fn cauchy(x: &[f64]) -> num_complex::Complex64 {
            (1.0 / (1.0 + x.iter().map(|v| v * v).sum::<f64>())).into()
        }
        match self.maximal.symbol.as_str() {
            "gaussian" => Ok(gaussian),
            "cauchy" => Ok(cauchy),
            s => Err(bad("maximal.symbol", format!("unknown symbol '{s}'"))),
        }
    }

    /// Geometric grid `t_min .. t_max` with `t_count` points.
    pub fn t_grid(&self) -> Vec<f64> {
        let m = &self.maximal;
        if m.t_count == 1 {
            return vec![m.t_min];
        }
        let r = (m.t_max / m.t_min).ln() / (m.t_count - 1) as f64;
        (0..m.t_count).map(|i| m.t_min * (r * i as f64).exp()).collect()
    }
}

/// Parses `power:a`, `product:a1,a2,..` or `constant:c`.
pub fn parse_weight(s: &str) -> Result<WeightSpec> {
    let (kind, args) = s.split_once(':').ok_or_else(|| DunklError::Config(format!("weight '{s}' has no ':'")))?;
    let nums: Vec<f64> = args
        .split(',')
        .map(|a| a.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| DunklError::Config(format!("weight '{s}': {e}")))?;
    match (kind.trim(), nums.as_slice()) {
        ("power", [a]) => Ok(WeightSpec::power(*a)),
        ("constant", [c]) if *c > 0.0 => Ok(WeightSpec::constant(*c)),
        ("product", a) if !a.is_empty() => Ok(WeightSpec::product(a.to_vec())),
        _ => Err(DunklError::Config(format!("weight '{s}' is not power:a, product:a1,.. or constant:c"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(ExperimentConfig::parse("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_field_is_rejected_with_location() {
        let e = ExperimentConfig::parse("[grid]\nnodez = 4\n").unwrap_err();
        let m = e.to_string();
        assert!(m.contains("nodez") && m.contains("line 2"), "{m}");
    }

    #[test]
    fn range_errors_name_the_field() {
        let e = ExperimentConfig::parse("[grid]\nnodes = 7\n").unwrap_err();
        assert!(e.to_string().contains("grid.nodes"));
        let e = ExperimentConfig::parse("[weights]\nw = [\"power:0.2\", \"cube:1\"]\n").unwrap_err();
        assert!(e.to_string().contains("weights.w[1]"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn t_grid_is_geometric() {
        let t = ExperimentConfig::default().t_grid();
        assert_eq!(t.len(), 17);
        assert!((t[0] - 0.0625).abs() < 1e-15 && (t[16] - 16.0).abs() < 1e-12);
        assert!((t[1] / t[0] - t[2] / t[1]).abs() < 1e-12);
    }

    #[test]
    fn weight_strings() {
        assert!(parse_weight("power:0.5").is_ok());
        assert!(parse_weight("product:0.1,0.2").is_ok());
        assert!(parse_weight("constant:0").is_err());
        assert!(parse_weight("power").is_err());
    }
}
