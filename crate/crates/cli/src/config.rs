//! Experiment configuration, read from TOML. Every field has a default, so an
//! empty file describes the parabola preset.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sparse_radon::dyadic::{build_grid_with, GridMode};
use sparse_radon::geometry::{models, CurveFamily, ReachOptions};
use sparse_radon::operators::{CZKernel, Cutoff, Piece, RadonOperator};
use sparse_radon::weights::Weight;
use sparse_radon::{Cloud, DiscreteSHT, DyadicGrid, Metric};

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub cloud: CloudSpec,
    pub grid: GridSpec,
    pub operator: OperatorSpec,
    pub exponents: Exponents,
    pub whitney: WhitneySpec,
    pub cz: CzSpec,
    pub kernel: KernelSpec,
    pub improve: ImproveSpec,
    pub modulus: ModulusSpec,
    pub sparse: SparseSpec,
    pub weight: WeightSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudSpec {
    /// `euclidean`, `parabola`, `heisenberg` or `cc`.
    pub metric: String,
    /// Field system for `cc` clouds; its domain replaces `lo`/`hi`.
    pub system: Option<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub delta: f64,
    /// Standard dyadic intervals; one-dimensional clouds of `2^m` points only.
    pub classical: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorSpec {
    pub curve: String,
    pub kernel: String,
    /// Support radius shared by the kernel and the curve parameters.
    pub radius: f64,
    /// Plateau and support of `ψ₁`, as fractions of the box half-width.
    pub psi1: [f64; 2],
    pub psi2: [f64; 2],
    /// Single-scale piece: `centered-bump` or `bump`.
    pub piece: String,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Exponents {
    pub r: f64,
    pub s: f64,
    pub p: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhitneySpec {
    /// `Ω = {M f > level · ⟨|f|⟩_X}` for a random smooth `f`.
    pub level: f64,
    /// `constrained` or `smallest`.
    pub rule: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CzSpec {
    pub samples: usize,
    /// Height as a multiple of the global average.
    pub level: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub delta: f64,
    pub levels: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImproveSpec {
    /// Smallest `1/s` probed.
    pub lowest: f64,
    pub step: f64,
    /// Spike widths in lattice spacings, coarse first.
    pub widths: Vec<f64>,
    pub adjoint: bool,
    /// Curve for the comparison operator; none skips the contrast.
    pub compare: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusSpec {
    pub system: String,
    pub direction: Vec<f64>,
    pub window: [f64; 2],
    pub count: usize,
    pub widths: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparseSpec {
    pub sigma: f64,
    pub pairs: usize,
    pub blocks: usize,
    /// Point whose containing cube starts the recursion.
    pub start: Vec<f64>,
    pub generation: usize,
    pub whitney: String,
    /// Replace every first input by zero.
    pub zero_first: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSpec {
    /// `power`, `product` or `constant`.
    pub kind: String,
    pub axis: usize,
    pub beta: f64,
    pub betas: Vec<f64>,
    pub value: f64,
    pub tests: usize,
    pub blocks: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            cloud: CloudSpec::default(),
            grid: GridSpec::default(),
            operator: OperatorSpec::default(),
            exponents: Exponents::default(),
            whitney: WhitneySpec::default(),
            cz: CzSpec::default(),
            kernel: KernelSpec::default(),
            improve: ImproveSpec::default(),
            modulus: ModulusSpec::default(),
            sparse: SparseSpec::default(),
            weight: WeightSpec::default(),
        }
    }
}

impl Default for CloudSpec {
    fn default() -> Self {
        CloudSpec { metric: "parabola".into(), system: None, lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0], counts: vec![32, 512] }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { delta: 0.5, classical: false }
    }
}

impl Default for OperatorSpec {
    fn default() -> Self {
        OperatorSpec {
            curve: "parabola".into(),
            kernel: "hilbert".into(),
            radius: 0.25,
            psi1: [0.4, 0.5],
            psi2: [0.85, 0.95],
            piece: "centered-bump".into(),
        }
    }
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents { r: 2.0, s: 4.0, p: 3.2 }
    }
}

impl Default for WhitneySpec {
    fn default() -> Self {
        WhitneySpec { level: 2.0, rule: "smallest".into() }
    }
}

impl Default for CzSpec {
    fn default() -> Self {
        CzSpec { samples: 10, level: 2.0 }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { delta: 0.25, levels: 10 }
    }
}

impl Default for ImproveSpec {
    fn default() -> Self {
        ImproveSpec { lowest: 0.2, step: 0.05, widths: vec![16.0, 8.0, 4.0], adjoint: true, compare: None }
    }
}

impl Default for ModulusSpec {
    fn default() -> Self {
        ModulusSpec { system: "parabola".into(), direction: vec![1.0, 1.0], window: [1e-3, 1e-1], count: 9, widths: vec![16.0, 4.0] }
    }
}

impl Default for SparseSpec {
    fn default() -> Self {
        SparseSpec {
            sigma: 0.5,
            pairs: 2,
            blocks: 16,
            start: vec![0.0, 0.0],
            generation: 1,
            whitney: "constrained".into(),
            zero_first: false,
        }
    }
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec { kind: "power".into(), axis: 0, beta: 0.5, betas: Vec::new(), value: 1.0, tests: 4, blocks: 8 }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    /// Checks that do not need the cloud built.
    pub fn validate(&self) -> Result<()> {
        let c = &self.cloud;
        match c.metric.as_str() {
            "cc" => {
                let Some(sys) = &c.system else { bail!("cloud.metric = \"cc\" needs cloud.system") };
                let dim = models::system_by_name(sys)?.dim();
                if c.counts.len() != dim {
                    bail!("cloud.counts has {} entries but system `{sys}` lives in R^{dim}", c.counts.len());
                }
            }
            "euclidean" | "parabola" | "heisenberg" => {
                if c.lo.len() != c.counts.len() || c.hi.len() != c.counts.len() {
                    bail!("cloud.lo, cloud.hi and cloud.counts must have one entry per axis");
                }
                if c.metric == "parabola" && c.counts.len() != 2 {
                    bail!("the parabola metric lives in R^2");
                }
                if c.metric == "heisenberg" && c.counts.len() != 3 {
                    bail!("the Heisenberg metric lives in R^3");
                }
            }
            other => bail!("unknown cloud.metric `{other}`"),
        }
        if !(self.grid.delta > 0.0 && self.grid.delta < 1.0) {
            bail!("grid.delta = {} must lie in (0, 1)", self.grid.delta);
        }
        let e = self.exponents;
        if !(1.0 <= e.r && e.r < e.p && e.p < e.s) {
            bail!("exponents need 1 <= r < p < s, got r={} p={} s={}", e.r, e.p, e.s);
        }
        if !(self.sparse.sigma > 0.0 && self.sparse.sigma < 1.0) {
            bail!("sparse.sigma = {} must lie in (0, 1)", self.sparse.sigma);
        }
        if self.sparse.blocks == 0 {
            bail!("sparse.blocks must be positive");
        }
        rule(&self.sparse.whitney)?;
        rule(&self.whitney.rule)?;
        if self.whitney.level <= 1.0 || self.cz.level <= 1.0 {
            bail!("whitney.level and cz.level must exceed 1");
        }
        if self.improve.widths.len() < 2 || self.modulus.widths.is_empty() {
            bail!("improve.widths needs two levels and modulus.widths at least one");
        }
        if !(self.modulus.window[0] > 0.0 && self.modulus.window[0] < self.modulus.window[1]) || self.modulus.count < 2 {
            bail!("modulus.window must be an increasing positive range with count >= 2");
        }
        let p = &self.operator.psi1;
        let q = &self.operator.psi2;
        if !(0.0 <= p[0] && p[0] < p[1] && 0.0 <= q[0] && q[0] < q[1]) {
            bail!("cutoffs need 0 <= plateau < support");
        }
        match self.operator.piece.as_str() {
            "centered-bump" | "bump" => {}
            other => bail!("unknown operator.piece `{other}`"),
        }
        match self.weight.kind.as_str() {
            "power" | "product" | "constant" => {}
            other => bail!("unknown weight.kind `{other}`"),
        }
        Ok(())
    }

    pub fn sht(&self) -> Result<Arc<DiscreteSHT>> {
        let c = &self.cloud;
        let sht = match c.metric.as_str() {
            "cc" => {
                let sys = models::system_by_name(c.system.as_deref().unwrap_or_default())?;
                DiscreteSHT::carnot_caratheodory(&sys, c.counts.clone(), &ReachOptions::default())?
            }
            name => {
                let metric = match name {
                    "euclidean" => Metric::Euclidean,
                    "parabola" => Metric::parabola(),
                    _ => Metric::Heisenberg,
                };
                DiscreteSHT::new(Cloud::new(c.lo.clone(), c.hi.clone(), c.counts.clone())?, metric)?
            }
        };
        Ok(Arc::new(sht))
    }

    pub fn grid(&self, sht: Arc<DiscreteSHT>) -> Result<DyadicGrid> {
        let mode = if self.grid.classical { GridMode::Classical } else { GridMode::Greedy };
        Ok(build_grid_with(sht, self.grid.delta, self.seed, mode)?)
    }

    pub fn curve(&self, name: &str) -> Result<CurveFamily> {
        Ok(models::by_name(name)?.with_radius(self.operator.radius))
    }

    pub fn operator(&self, sht: Arc<DiscreteSHT>, curve: &str) -> Result<RadonOperator> {
        let o = &self.operator;
        let kernel = CZKernel::by_name(&o.kernel, o.radius)?;
        let op = RadonOperator::new(sht.clone(), self.curve(curve)?, kernel, self.grid.delta)?;
        let (lo, hi) = (sht.cloud().lo(), sht.cloud().hi());
        Ok(op.with_cutoffs(Cutoff::in_box(lo, hi, o.psi1[0], o.psi1[1]), Cutoff::in_box(lo, hi, o.psi2[0], o.psi2[1]))?)
    }

    pub fn piece(&self) -> Piece {
        match self.operator.piece.as_str() {
            "bump" => Piece::bump(self.operator.radius),
            _ => Piece::centered_bump(self.operator.radius),
        }
    }

    pub fn weight(&self, sht: &DiscreteSHT) -> Result<Weight> {
        let w = &self.weight;
        Ok(match w.kind.as_str() {
            "power" => Weight::power(sht, w.axis, w.beta)?,
            "product" => Weight::product(sht, &w.betas)?,
            _ => Weight::constant(sht, w.value)?,
        })
    }
}

pub fn rule(name: &str) -> Result<sparse_radon::sparse::WhitneyRule> {
    use sparse_radon::sparse::WhitneyRule;
    match name {
        "constrained" => Ok(WhitneyRule::Constrained),
        "smallest" => Ok(WhitneyRule::Smallest),
        other => bail!("unknown Whitney rule `{other}`; expected `constrained` or `smallest`"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_parabola_preset() {
        let cfg: Config = toml::from_str("").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.cloud.metric, "parabola");
        assert_eq!(cfg.cloud.counts, vec![32, 512]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<Config>("[grid]\ndelta = 0.5\nsize = 3\n").is_err());
    }

    #[test]
    fn exponent_order_is_validated() {
        let cfg: Config = toml::from_str("[exponents]\nr = 2.0\np = 1.5\ns = 4.0\n").unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("r < p < s"), "{msg}");
    }

    #[test]
    fn cc_needs_a_system() {
        let cfg: Config = toml::from_str("[cloud]\nmetric = \"cc\"\ncounts = [8, 8]\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
