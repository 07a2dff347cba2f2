//! Declarative experiment configuration (TOML) and problem construction.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgoConfig, Variant};
use crate::dataset::{
    load_libsvm, partition_iid, partition_imbalanced, partition_label_skew, standard_imbalance, Dataset, Label,
    LabelMap, Partition,
};
use crate::error::{Error, Result};
use crate::objective::{generate_logistic, generate_quadratic, LogisticProblem, LogisticSpec, LossModel, QuadraticSpec};

fn default_gamma() -> f64 {
    1e-3
}
fn default_rounds() -> usize {
    100
}
fn default_tolerance() -> f64 {
    1e-8
}
fn default_clients() -> usize {
    10
}
fn default_spread() -> f64 {
    10.0
}
fn default_signal() -> f64 {
    3.0
}
fn default_hessian_spread() -> f64 {
    0.25
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionScheme {
    #[default]
    Iid,
    /// One client with half the data, one with 0.2%, the rest equal.
    Imbalance,
    LabelSkew,
}

impl PartitionScheme {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(Self::Iid),
            "imbalance" => Ok(Self::Imbalance),
            "label-skew" => Ok(Self::LabelSkew),
            _ => Err(Error::InvalidConfig(format!("unknown partition scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    #[serde(default)]
    pub scheme: PartitionScheme,
    /// K. For quadratic problems, the number of client quadratics.
    #[serde(default = "default_clients")]
    pub clients: usize,
    /// Defaults to the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { scheme: PartitionScheme::Iid, clients: default_clients(), seed: None }
    }
}

/// Raw labels mapped to +1 and −1. Unlisted labels go to `other` when set
/// and are a parse error otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelMapConfig {
    #[serde(default)]
    pub positive: Vec<f64>,
    #[serde(default)]
    pub negative: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other: Option<Label>,
}

impl LabelMapConfig {
    pub fn to_label_map(&self) -> LabelMap {
        let entries = self
            .positive
            .iter()
            .map(|&r| (r, Label::Positive))
            .chain(self.negative.iter().map(|&r| (r, Label::Negative)))
            .collect();
        let map = LabelMap::new(entries);
        match self.other {
            Some(l) => map.with_fallback(l),
            None => map,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    SyntheticLogistic {
        examples: usize,
        dim: usize,
        #[serde(default = "default_spread")]
        feature_spread: f64,
        #[serde(default = "default_signal")]
        signal: f64,
        /// Defaults to the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    SyntheticQuadratic {
        dim: usize,
        condition_number: f64,
        #[serde(default)]
        heterogeneity: f64,
        #[serde(default = "default_hessian_spread")]
        hessian_spread: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    Libsvm {
        path: PathBuf,
        /// Default: `+1 → +1`, everything else `→ −1`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_map: Option<LabelMapConfig>,
        /// Seeded subsample of this many examples.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subsample: Option<usize>,
        /// Dimension override; must not be below the largest index.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::SyntheticLogistic {
            examples: 2000,
            dim: 20,
            feature_spread: default_spread(),
            signal: default_signal(),
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// ℓ2 coefficient of the logistic loss.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    /// Maximum aggregation rounds T.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Stop once the relative error reaches this.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Tolerance on `‖∇f(w*)‖` for the logistic reference minimizer;
    /// default `1e−12 · max(1, ‖∇f(0)‖)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_tolerance: Option<f64>,
    #[serde(default, rename = "algorithm")]
    pub algorithms: Vec<AlgoConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: None,
            seed: 0,
            gamma: default_gamma(),
            problem: ProblemConfig::default(),
            partition: PartitionConfig::default(),
            rounds: default_rounds(),
            tolerance: default_tolerance(),
            reference_tolerance: None,
            algorithms: vec![AlgoConfig::new(Variant::FedosaaSvrg), AlgoConfig::new(Variant::FedSvrg)],
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative dataset and output paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let ProblemConfig::Libsvm { path: data, .. } = &mut cfg.problem {
            rebase(data);
        }
        cfg.output.csv.as_mut().map(rebase);
        cfg.output.json.as_mut().map(rebase);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance {} must be positive", self.tolerance));
        }
        if self.rounds == 0 {
            return bad("rounds must be ≥ 1".into());
        }
        if self.partition.clients == 0 {
            return bad("clients must be ≥ 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("no algorithms configured".into());
        }
        for a in &self.algorithms {
            a.validate()?;
        }
        match &self.problem {
            ProblemConfig::Libsvm { path, .. } => {
                if !path.is_file() {
                    return bad(format!("dataset {} not found", path.display()));
                }
                if !(self.gamma > 0.0) {
                    return bad(format!("γ = {} must be positive", self.gamma));
                }
            }
            ProblemConfig::SyntheticLogistic { .. } => {
                if !(self.gamma > 0.0) {
                    return bad(format!("γ = {} must be positive", self.gamma));
                }
            }
            ProblemConfig::SyntheticQuadratic { .. } => {}
        }
        Ok(())
    }

    /// Fills in every defaulted seed so the config alone reproduces a run.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.partition.seed.get_or_insert(self.seed);
        match &mut out.problem {
            ProblemConfig::SyntheticLogistic { seed, .. } | ProblemConfig::SyntheticQuadratic { seed, .. } => {
                seed.get_or_insert(self.seed);
            }
            ProblemConfig::Libsvm { .. } => {}
        }
        out
    }
}

fn partition(data: &Dataset, cfg: &PartitionConfig, seed: u64) -> Result<Partition> {
    let seed = cfg.seed.unwrap_or(seed);
    match cfg.scheme {
        PartitionScheme::Iid => partition_iid(data, cfg.clients, seed),
        PartitionScheme::Imbalance => partition_imbalanced(data, &standard_imbalance(cfg.clients)?, seed),
        PartitionScheme::LabelSkew => partition_label_skew(data, cfg.clients, seed),
    }
}

/// Builds the loss model a config describes.
pub fn build_model(cfg: &ExperimentConfig) -> Result<LossModel> {
    let logistic = |data: Dataset| -> Result<LossModel> {
        let part = partition(&data, &cfg.partition, cfg.seed)?;
        Ok(LossModel::Logistic(LogisticProblem::new(Arc::new(data), part, cfg.gamma)?))
    };
    match &cfg.problem {
        ProblemConfig::SyntheticLogistic { examples, dim, feature_spread, signal, seed } => logistic(generate_logistic(
            &LogisticSpec {
                examples: *examples,
                dim: *dim,
                feature_spread: *feature_spread,
                signal: *signal,
                seed: seed.unwrap_or(cfg.seed),
            },
        )?),
        ProblemConfig::SyntheticQuadratic { dim, condition_number, heterogeneity, hessian_spread, seed } => {
            Ok(generate_quadratic(&QuadraticSpec {
                dim: *dim,
                clients: cfg.partition.clients,
                condition_number: *condition_number,
                heterogeneity: *heterogeneity,
                hessian_spread: *hessian_spread,
                seed: seed.unwrap_or(cfg.seed),
            })?
            .model)
        }
        ProblemConfig::Libsvm { path, label_map, subsample, dim } => {
            let map = label_map.as_ref().map(LabelMapConfig::to_label_map).unwrap_or_default();
            let mut data = load_libsvm(path, &map, *dim)?;
            if let Some(n) = subsample {
                data = data.subsample(*n, cfg.seed)?;
            }
            logistic(data)
        }
    }
}
