//! TOML run configuration. Every field is optional; command-line flags win
//! over file values.
//!
//! ```toml
//! seed = 7
//! data = "data.csv"
//! prior_probs = [0.25, 0.25, 0.25, 0.25]
//!
//! [[models]]
//! name = "Ma"
//! spec = "mu2 < mu1 < mu4 < {mu3 = mu5}"
//!
//! [theta0]
//! alpha0 = 2.4
//! sigma0 = 1.1
//!
//! [sampler]
//! prior_draws = 100000
//! mcmc_iters = 55000
//! burnin = 5000
//! quadrature_nodes = 64
//! evidence_method = "quadrature"
//!
//! [scenario]            # simulate only; or `preset = "pop3"`
//! name = "custom"
//! means = [0, 0.5, 1]
//! sds = [1, 1, 1]
//! true_model = "M2"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cip_anova::evidence::EvidenceMethod;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    pub models: Option<Vec<ModelEntry>>,
    pub prior_probs: Option<Vec<f64>>,
    pub theta0: Option<Theta0>,
    pub sampler: Option<SamplerConfig>,
    pub preset: Option<String>,
    pub scenario: Option<ScenarioConfig>,
    pub n_per_group: Option<usize>,
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub spec: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta0 {
    pub alpha0: f64,
    pub sigma0: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub prior_draws: Option<usize>,
    pub mcmc_iters: Option<usize>,
    pub burnin: Option<usize>,
    pub quadrature_nodes: Option<usize>,
    pub chib_iters: Option<usize>,
    pub evidence_method: Option<EvidenceMethod>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub true_model: String,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        // data paths are relative to the config file
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 3
            data = "x.csv"
            prior_probs = [0.5, 0.5]
            [[models]]
            name = "M0"
            spec = "mu1 = mu2"
            [[models]]
            name = "Me"
            spec = "mu1, mu2"
            [theta0]
            alpha0 = 1.0
            sigma0 = 2.0
            [sampler]
            evidence_method = "chib"
            burnin = 10
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.models.as_ref().unwrap().len(), 2);
        let s = cfg.sampler.unwrap();
        assert_eq!(s.evidence_method, Some(EvidenceMethod::Chib));
        assert_eq!(s.burnin, Some(10));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
    }
}
