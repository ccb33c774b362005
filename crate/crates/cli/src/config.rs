//! JSON experiment configuration: one diff-able file fully determines a run.

use convsep_core::nets::{Arch, GMode, HeadMode};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Experiment,
    Verify,
    Estimate,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Cosine,
    Parity,
    Net,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParityModeCfg {
    KOnly,
    OnePlusK,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataCfg {
    Gaussian,
    File { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerCfg {
    /// Learning rate; must lie in (0, 1] for the analytic models.
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default = "defaults::iters")]
    pub iters: usize,
    /// Minibatch size (net model only).
    #[serde(default = "defaults::batch")]
    pub batch: usize,
    /// Ball radius for projected GD; null disables projection. The parity WS
    /// model defaults to the teacher norm.
    #[serde(default)]
    pub projection_radius: Option<f64>,
    #[serde(default = "defaults::stop_grad_norm")]
    pub stop_grad_norm: f64,
    #[serde(default)]
    pub stop_distance: f64,
    #[serde(default = "defaults::record_every")]
    pub record_every: usize,
}

impl Default for OptimizerCfg {
    fn default() -> Self {
        OptimizerCfg {
            eta: defaults::eta(),
            iters: defaults::iters(),
            batch: defaults::batch(),
            projection_radius: None,
            stop_grad_norm: defaults::stop_grad_norm(),
            stop_distance: 0.0,
            record_every: defaults::record_every(),
        }
    }
}

mod defaults {
    pub fn eta() -> f64 {
        0.5
    }
    pub fn iters() -> usize {
        3000
    }
    pub fn batch() -> usize {
        128
    }
    pub fn stop_grad_norm() -> f64 {
        1e-8
    }
    pub fn record_every() -> usize {
        1
    }
    pub fn samples() -> u64 {
        1_000_000
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Must agree with the CLI subcommand when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<Model>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch: Option<Arch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gmode: Option<GMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<HeadMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity_mode: Option<ParityModeCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0_norm: Option<f64>,
    /// Cosine low-frequency coefficient; defaults to 3 sqrt(k).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_k: Option<f64>,
    #[serde(default)]
    pub optimizer: OptimizerCfg,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Monte Carlo sample count for the estimate command.
    #[serde(default = "defaults::samples")]
    pub samples: u64,
    /// Verify: which checks to run (all when empty).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<String>,
    /// Sweep: per-cell overrides merged onto this configuration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<serde_json::Value>,
}

impl Config {
    pub fn load(path: &std::path::Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
        let cfg: Config = serde_json::from_str(&text)
            .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    pub fn model(&self) -> Model {
        self.model.unwrap_or(Model::Net)
    }

    pub fn arch(&self) -> Arch {
        self.arch.unwrap_or(Arch::Ws)
    }

    pub fn gmode(&self) -> GMode {
        self.gmode.unwrap_or(GMode::Both)
    }

    pub fn head(&self) -> HeadMode {
        self.head.unwrap_or(HeadMode::Known)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(match self.model() {
            Model::Net => 10,
            _ => 3,
        })
    }

    pub fn d(&self) -> usize {
        self.d.unwrap_or(match self.model() {
            Model::Net => match &self.data {
                Some(DataCfg::File { .. }) => 100,
                _ => 75,
            },
            _ => 8,
        })
    }

    /// Teacher norm. The net experiment defaults to 3; the parity model
    /// defaults to the non-degeneracy threshold; the cosine model to 1.
    pub fn u0_norm(&self) -> f64 {
        self.u0_norm.unwrap_or_else(|| match self.model() {
            Model::Net => 3.0,
            Model::Parity => convsep_core::parity::nondegeneracy_threshold(self.k()).sqrt(),
            Model::Cosine => 1.0,
        })
    }

    pub fn parity_mode(&self) -> convsep_core::ParityMode {
        match self.parity_mode.unwrap_or(ParityModeCfg::OnePlusK) {
            ParityModeCfg::KOnly => convsep_core::ParityMode::KOnly,
            ParityModeCfg::OnePlusK => convsep_core::ParityMode::OnePlusK,
        }
    }

    /// Merge a sweep-cell override (a partial JSON object) onto this config.
    pub fn with_overrides(&self, cell: &serde_json::Value) -> anyhow::Result<Config> {
        let mut base = serde_json::to_value(self)?;
        let serde_json::Value::Object(base_map) = &mut base else {
            unreachable!("config serializes to an object")
        };
        base_map.remove("cells");
        let serde_json::Value::Object(cell_map) = cell else {
            anyhow::bail!("sweep cell must be a JSON object, got {cell}");
        };
        for (key, value) in cell_map {
            merge_value(base_map, key, value);
        }
        Ok(serde_json::from_value(base)?)
    }
}

fn merge_value(
    base: &mut serde_json::Map<String, serde_json::Value>,
    key: &str,
    value: &serde_json::Value,
) {
    match (base.get_mut(key), value) {
        (Some(serde_json::Value::Object(dst)), serde_json::Value::Object(src)) => {
            for (k, v) in src {
                merge_value(dst, k, v);
            }
        }
        _ => {
            base.insert(key.to_string(), value.clone());
        }
    }
}
