//! Experiment configuration: one TOML file per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::capacity::{CapacityKind, ProbeShape};
use crate::classify::Thresholds;
use crate::domain::{DataSpec, DomainSpec, Lattice, Point};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, Multiplier};
use crate::solve::{Init, SolveOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Solve,
    Capacity,
    Wiener,
    Classify,
    Sweep,
    Removability,
    Sharpness,
    UniversalSequence,
    Suite,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::Capacity => "capacity",
            Task::Wiener => "wiener",
            Task::Classify => "classify",
            Task::Sweep => "sweep",
            Task::Removability => "removability",
            Task::Sharpness => "sharpness",
            Task::UniversalSequence => "universal-sequence",
            Task::Suite => "suite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub s: f64,
    pub p: f64,
    #[serde(default)]
    pub multiplier: Multiplier,
    #[serde(default)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub dim: usize,
    pub cells: usize,
    /// The box is `[-half_side, half_side]^dim`.
    #[serde(default = "default_half_side")]
    pub half_side: f64,
}

fn default_half_side() -> f64 {
    2.0
}

/// What the `capacity` task measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CapacityTask {
    /// Log-log slope of ball condenser capacities `cap(B̄(x0, 2^-k), B(x0, 2^{1-k}))`.
    Scaling { ks: Vec<u32> },
    /// Sobolev capacity of a point or slice on three nested grids.
    Probe { shape: ProbeShape },
    /// One capacity of the closed ball `B̄(x0, radius)` (condenser: relative to `B(x0, 2 radius)`).
    Ball { kind: CapacityKind, radius: f64 },
}

impl Default for CapacityTask {
    fn default() -> Self {
        CapacityTask::Scaling { ks: vec![2, 3, 4, 5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    pub kernel: KernelConfig,
    pub lattice: LatticeConfig,
    pub domain: DomainSpec,
    /// Boundary point; defaults to the gallery's distinguished point.
    #[serde(default)]
    pub point: Option<Point>,
    /// Data for the `solve` task; defaults to `min(1, |x - x0|)`.
    #[serde(default)]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub capacity: CapacityTask,
    /// `(s, p)` pairs for `sweep` and `suite`.
    #[serde(default)]
    pub pairs: Vec<(f64, f64)>,
    /// Test data for `universal-sequence`.
    #[serde(default)]
    pub test_data: Vec<DataSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Excluded from the config hash.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Excluded from the config hash.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("<root>").to_string();
            Error::Config {
                field,
                message: e.to_string().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let k = KernelSpec::new(self.kernel.s, self.kernel.p, self.lattice.dim)?.with_multiplier(self.kernel.multiplier)?;
        match self.kernel.lambda {
            Some(l) => k.with_lambda(l),
            None => Ok(k),
        }
    }

    pub fn lattice(&self) -> Result<Lattice> {
        if !(self.lattice.half_side > 0.0 && self.lattice.half_side.is_finite()) {
            return Err(Error::config("lattice.half_side", "half side must be positive"));
        }
        Lattice::centered(self.lattice.dim, self.lattice.half_side, self.lattice.cells)
    }

    /// Solver options with the run seed applied to a random initialisation.
    pub fn solve_options(&self) -> SolveOptions {
        let mut o = self.solver.clone();
        if let Init::Random { seed } = &mut o.init {
            *seed ^= self.seed;
        }
        o
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel_spec()?;
        self.lattice()?;
        let t = &self.thresholds;
        if !(t.delta_reg > 0.0 && t.delta_gap > 0.0 && t.window >= 1) {
            return Err(Error::config("thresholds", "thresholds must be positive and the window at least 1"));
        }
        if !(self.solver.tolerance > 0.0) {
            return Err(Error::config("solver.tolerance", "tolerance must be positive"));
        }
        if self.solver.max_iterations == 0 {
            return Err(Error::config("solver.max_iterations", "need at least one iteration"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "thread count must be positive"));
        }
        if matches!(self.task, Task::Sweep) && self.pairs.is_empty() {
            return Err(Error::config("pairs", "the sweep needs at least one (s, p) pair"));
        }
        if matches!(self.task, Task::UniversalSequence) && self.test_data.is_empty() {
            return Err(Error::config("test_data", "the universal-sequence probe needs test data"));
        }
        for (k, &(s, p)) in self.pairs.iter().enumerate() {
            KernelSpec::new(s, p, self.lattice.dim).map_err(|e| match e {
                Error::Config { message, .. } => Error::config(format!("pairs[{k}]"), message),
                other => other,
            })?;
        }
        if let CapacityTask::Scaling { ks } = &self.capacity {
            if ks.len() < 3 {
                return Err(Error::config("capacity.ks", "the scaling fit needs at least 3 radii"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring output location and thread count.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.threads = None;
        let json = serde_json::to_vec(&c).expect("config serialises");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}
