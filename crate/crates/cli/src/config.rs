//! Run configuration: TOML with strict key checking, one file drives all
//! subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use spinrb_core::affine::{AffineObservable, AffineOperator};
use spinrb_core::model::{LatticeSpec, ModelSpec};
use spinrb_core::offline::GreedyConfig;
use spinrb_core::params::{DomainBox, ParameterGrid, ParameterPoint};
use spinrb_core::truth::TruthConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Rydberg,
    Triangle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    /// Lower/upper box bounds per parameter axis; empty = model default.
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            lo: Vec::new(),
            hi: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridsSection {
    /// Uniform point counts per axis.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Empty = fall back to `test`.
    pub scan: Vec<usize>,
    /// Empty = fall back to `test`.
    pub svd: Vec<usize>,
}

impl Default for GridsSection {
    fn default() -> Self {
        Self {
            train: vec![50, 50],
            test: vec![49, 49],
            scan: Vec::new(),
            svd: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreedySection {
    /// Residual stopping tolerance (absolute, scaled energy units).
    pub tol: f64,
    /// Truth-solve budget.
    pub n_f: usize,
    /// Snapshot truncation threshold relative to the first snapshot block.
    pub compress_tol: f64,
    /// Initial sample; empty = training-grid point nearest the domain
    /// center.
    pub mu_1: Vec<f64>,
    /// Hard cap on the basis size; 0 = unlimited.
    pub max_basis: usize,
}

impl Default for GreedySection {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            n_f: 150,
            compress_tol: 1e-10,
            mu_1: Vec::new(),
            max_basis: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruthSection {
    pub tol_resid: f64,
    pub tol_degeneracy: f64,
    pub max_iter: usize,
    pub dense_cap: usize,
    pub dense_direct: usize,
}

impl Default for TruthSection {
    fn default() -> Self {
        let t = TruthConfig::default();
        Self {
            tol_resid: t.tol_resid,
            tol_degeneracy: t.tol_degeneracy,
            max_iter: t.max_iter,
            dense_cap: t.dense_cap,
            dense_direct: t.dense_direct,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanSection {
    /// Report the occupation profile of the lifted manifold (needs the
    /// stored basis).
    pub occupation: bool,
    /// Momentum indices to report; empty = every momentum on the grid.
    pub momenta: Vec<usize>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            occupation: true,
            momenta: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    /// Basis prefixes to evaluate; empty = every size in the training
    /// history.
    pub prefixes: Vec<usize>,
    /// Emit the per-point error table for the largest prefix.
    pub per_point: bool,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            prefixes: Vec::new(),
            per_point: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelKind,
    pub nx: usize,
    /// Cells in y (triangle lattice only).
    pub ny: usize,
    /// Seed for cold-start blocks; full determinism with fixed config.
    pub seed: u64,
    pub out_dir: String,
    pub domain: DomainSection,
    pub grids: GridsSection,
    pub greedy: GreedySection,
    pub truth: TruthSection,
    pub scan: ScanSection,
    pub validate: ValidateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Rydberg,
            nx: 13,
            ny: 1,
            seed: spinrb_core::truth::COLD_START_SEED,
            out_dir: ".".into(),
            domain: DomainSection::default(),
            grids: GridsSection::default(),
            greedy: GreedySection::default(),
            truth: TruthSection::default(),
            scan: ScanSection::default(),
            validate: ValidateSection::default(),
        }
    }
}

impl RunConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        let mut cfg = Self::default();
        cfg.model = kind;
        if kind == ModelKind::Triangle {
            cfg.nx = 2;
            cfg.ny = 2;
            cfg.grids.train = vec![20, 20, 20];
            cfg.grids.test = vec![19, 19, 19];
            cfg.greedy.n_f = 80;
        }
        cfg
    }

    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn model_spec(&self) -> ModelSpec {
        match self.model {
            ModelKind::Rydberg => ModelSpec::RydbergChain { nx: self.nx },
            ModelKind::Triangle => ModelSpec::TriangleLattice {
                nx: self.nx,
                ny: self.ny,
            },
        }
    }

    fn check(&self) -> anyhow::Result<()> {
        let spec = self.model_spec();
        let dim = spec.parameter_dim();
        spec.lattice().map_err(|e| anyhow::anyhow!("{e}"))?;
        for (name, counts) in [
            ("grids.train", &self.grids.train),
            ("grids.test", &self.grids.test),
        ] {
            if counts.len() != dim {
                anyhow::bail!("{name} must have {dim} axis counts, got {}", counts.len());
            }
        }
        for (name, counts) in [("grids.scan", &self.grids.scan), ("grids.svd", &self.grids.svd)] {
            if !counts.is_empty() && counts.len() != dim {
                anyhow::bail!("{name} must have {dim} axis counts, got {}", counts.len());
            }
        }
        if !self.domain.lo.is_empty() || !self.domain.hi.is_empty() {
            if self.domain.lo.len() != dim || self.domain.hi.len() != dim {
                anyhow::bail!("domain bounds must have {dim} entries per side");
            }
        }
        if !self.greedy.mu_1.is_empty() && self.greedy.mu_1.len() != dim {
            anyhow::bail!("greedy.mu_1 must have {dim} coordinates");
        }
        if self.greedy.tol <= 0.0 {
            anyhow::bail!("greedy.tol must be positive");
        }
        if self.greedy.n_f == 0 {
            anyhow::bail!("greedy.n_f must be positive");
        }
        Ok(())
    }

    pub fn domain_box(&self) -> anyhow::Result<DomainBox> {
        let spec = self.model_spec();
        if self.domain.lo.is_empty() {
            Ok(spec.default_domain())
        } else {
            DomainBox::new(self.domain.lo.clone(), self.domain.hi.clone())
                .map_err(|e| anyhow::anyhow!("{e}"))
        }
    }

    /// Instantiate the operator, lattice and observable with the configured
    /// domain.
    pub fn build_model(
        &self,
    ) -> anyhow::Result<(AffineOperator, LatticeSpec, AffineObservable, ModelSpec)> {
        let spec = self.model_spec();
        let op = spec.operator().map_err(|e| anyhow::anyhow!("{e}"))?;
        let op = op.with_domain(self.domain_box()?);
        let lattice = spec.lattice().map_err(|e| anyhow::anyhow!("{e}"))?;
        let obs = spec.observable().map_err(|e| anyhow::anyhow!("{e}"))?;
        Ok((op, lattice, obs, spec))
    }

    pub fn grid(&self, counts: &[usize]) -> anyhow::Result<ParameterGrid> {
        ParameterGrid::uniform(&self.domain_box()?, counts).map_err(|e| anyhow::anyhow!("{e}"))
    }

    pub fn train_grid(&self) -> anyhow::Result<ParameterGrid> {
        self.grid(&self.grids.train)
    }

    pub fn test_grid(&self) -> anyhow::Result<ParameterGrid> {
        self.grid(&self.grids.test)
    }

    pub fn scan_grid(&self) -> anyhow::Result<ParameterGrid> {
        if self.grids.scan.is_empty() {
            self.test_grid()
        } else {
            self.grid(&self.grids.scan)
        }
    }

    pub fn svd_grid(&self) -> anyhow::Result<ParameterGrid> {
        if self.grids.svd.is_empty() {
            self.test_grid()
        } else {
            self.grid(&self.grids.svd)
        }
    }

    pub fn truth_config(&self) -> TruthConfig {
        TruthConfig {
            tol_resid: self.truth.tol_resid,
            tol_degeneracy: self.truth.tol_degeneracy,
            max_iter: self.truth.max_iter,
            dense_cap: self.truth.dense_cap,
            dense_direct: self.truth.dense_direct,
            degeneracy_step: 4,
            seed: self.seed,
        }
    }

    pub fn greedy_config(&self) -> anyhow::Result<GreedyConfig> {
        let grid = self.train_grid()?;
        let mu_1 = if self.greedy.mu_1.is_empty() {
            let domain = self.domain_box()?;
            let center: Vec<f64> = domain
                .lo()
                .iter()
                .zip(domain.hi())
                .map(|(l, h)| 0.5 * (l + h))
                .collect();
            let center = ParameterPoint::new(center).map_err(|e| anyhow::anyhow!("{e}"))?;
            grid.point(grid.nearest_index(&center))
        } else {
            let p = ParameterPoint::new(self.greedy.mu_1.clone())
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            if grid.index_of(&p).is_none() {
                anyhow::bail!("greedy.mu_1 = {p} is not a training-grid point");
            }
            p
        };
        let mut cfg = GreedyConfig::new(grid, mu_1);
        cfg.tol = self.greedy.tol;
        cfg.max_truth_solves = self.greedy.n_f;
        cfg.compress_tol = self.greedy.compress_tol;
        cfg.max_basis = (self.greedy.max_basis > 0).then_some(self.greedy.max_basis);
        cfg.truth = self.truth_config();
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.nx, 13);
        assert_eq!(back.grids.train, vec![50, 50]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "model = \"rydberg\"\nnx = 8\nbogus_key = 1\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
    }

    #[test]
    fn triangle_defaults() {
        let cfg = RunConfig::default_for(ModelKind::Triangle);
        assert_eq!(cfg.grids.train, vec![20, 20, 20]);
        let g = cfg.train_grid().unwrap();
        assert_eq!(g.len(), 8000);
    }

    #[test]
    fn mu1_defaults_to_center_point() {
        let mut cfg = RunConfig::default();
        cfg.nx = 6;
        cfg.grids.train = vec![5, 5];
        let gc = cfg.greedy_config().unwrap();
        assert_eq!(gc.mu_1.coords(), &[2.5, 2.25]);
    }
}
