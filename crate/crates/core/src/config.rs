//! Experiment configuration: one TOML file with every knob resolved to an
//! explicit value, written back next to the run's outputs so nothing stays
//! implicit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{DominanceRule, EvaluatorConfig};
use crate::generator::{GeneratorConfig, InferConfig};
use crate::space::{SearchSpace, Site};

/// One declared decision site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteDecl {
    pub name: String,
    pub cardinality: usize,
}

/// Where cost and quality come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleDecl {
    /// Seeded synthetic landscape; `tradeoff` in [0,1] couples quality to
    /// cost (higher means a stronger coupling, hence a richer frontier).
    Synthetic { seed: u64, tradeoff: f64 },
    /// CSV benchmark file (see the tabular loader for the format).
    Tabular { path: String },
}

impl Default for OracleDecl {
    fn default() -> Self {
        OracleDecl::Synthetic { seed: 0, tradeoff: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorSection {
    pub hidden1: usize,
    pub hidden2: usize,
    pub batch_size: usize,
    pub max_iters: usize,
    pub lr: f64,
    /// Final learning rate of the geometric decay schedule.
    pub lr_final: f64,
    pub tol: f64,
    pub patience: usize,
    pub holdout_frac: f64,
    pub agreement_pairs: usize,
}

impl Default for EvaluatorSection {
    fn default() -> Self {
        let d = EvaluatorConfig::default();
        EvaluatorSection {
            hidden1: d.hidden.0,
            hidden2: d.hidden.1,
            batch_size: d.batch_size,
            max_iters: d.max_iters,
            lr: d.lr,
            lr_final: d.lr_final,
            tol: d.tol,
            patience: d.patience,
            holdout_frac: d.holdout_frac,
            agreement_pairs: d.agreement_pairs,
        }
    }
}

impl EvaluatorSection {
    pub fn to_config(&self, rule: DominanceRule) -> EvaluatorConfig {
        EvaluatorConfig {
            hidden: (self.hidden1, self.hidden2),
            batch_size: self.batch_size,
            max_iters: self.max_iters,
            lr: self.lr,
            lr_final: self.lr_final,
            tol: self.tol,
            patience: self.patience,
            holdout_frac: self.holdout_frac,
            agreement_pairs: self.agreement_pairs,
            rule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSection {
    pub d_h: usize,
    pub token_dim: usize,
    pub lambda: f64,
    /// Traces per budget per step (N).
    pub n: usize,
    pub max_steps: usize,
    pub lr: f64,
    /// Learning rate after the ramp point (last third of training).
    pub lr_late: f64,
    pub baseline_decay: f64,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let d = GeneratorConfig::default();
        GeneratorSection {
            d_h: d.d_h,
            token_dim: d.token_dim,
            lambda: d.lambda,
            n: d.traces_per_budget,
            max_steps: d.max_steps,
            lr: d.lr,
            lr_late: d.lr_late,
            baseline_decay: d.baseline_decay,
        }
    }
}

impl GeneratorSection {
    pub fn to_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            d_h: self.d_h,
            token_dim: self.token_dim,
            lambda: self.lambda,
            traces_per_budget: self.n,
            max_steps: self.max_steps,
            lr: self.lr,
            lr_late: self.lr_late,
            baseline_decay: self.baseline_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceSection {
    pub n_infer: usize,
    pub max_rounds: usize,
}

impl Default for InferenceSection {
    fn default() -> Self {
        let d = InferConfig::default();
        InferenceSection { n_infer: d.n_infer, max_rounds: d.max_rounds }
    }
}

impl InferenceSection {
    pub fn to_config(&self) -> InferConfig {
        InferConfig { n_infer: self.n_infer, max_rounds: self.max_rounds }
    }
}

/// The full experiment configuration with defaults resolved at parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Global seed; every phase derives its own stream from it.
    pub seed: u64,
    pub out_dir: String,
    /// Records sampled for evaluator training (M).
    pub m: usize,
    /// Grid budgets (K).
    pub k: usize,
    /// Budget embedding dimension.
    pub d_b: usize,
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub space: Vec<SiteDecl>,
    pub oracle: OracleDecl,
    pub evaluator: EvaluatorSection,
    pub generator: GeneratorSection,
    pub inference: InferenceSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: "runs/default".to_string(),
            m: 2000,
            k: 10,
            d_b: 64,
            lo_percentile: 1.0,
            hi_percentile: 99.0,
            space: (0..8)
                .map(|i| SiteDecl { name: format!("s{i}"), cardinality: 4 })
                .collect(),
            oracle: OracleDecl::default(),
            evaluator: EvaluatorSection::default(),
            generator: GeneratorSection::default(),
            inference: InferenceSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validated()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Resolved config as TOML; serialize → parse → serialize is byte-stable.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("config serialize: {e}")))
    }

    fn validated(self) -> Result<Self> {
        if self.m < 2 {
            return Err(Error::Config(format!("m must be at least 2, got {}", self.m)));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("k must be at least 2, got {}", self.k)));
        }
        if self.d_b == 0 {
            return Err(Error::Config("d_b must be positive".into()));
        }
        self.search_space()?;
        if let OracleDecl::Synthetic { tradeoff, .. } = self.oracle {
            if !(0.0..=1.0).contains(&tradeoff) {
                return Err(Error::Config(format!("tradeoff must lie in [0,1], got {tradeoff}")));
            }
        }
        Ok(self)
    }

    pub fn search_space(&self) -> Result<SearchSpace> {
        SearchSpace::new(
            self.space
                .iter()
                .map(|s| Site { name: s.name.clone(), cardinality: s.cardinality })
                .collect(),
        )
    }
}

/// FNV-1a over the resolved TOML text; identifies a run's configuration.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let text = cfg.to_toml()?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}
