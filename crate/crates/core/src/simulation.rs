//! Simulation designs, replication studies and the two-mean power table.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::{compare, ComparisonError, ComparisonSettings};
use crate::constraint::{parse_model_spec, ConstraintError, ConstraintModel};
use crate::data::AnovaData;
use crate::gaussian::{normal_sf, RandomSource};

pub const DEFAULT_REPS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("scenario {0}: means and standard deviations differ in length")]
    Shape(String),
    #[error("scenario {0}: standard deviations must be positive")]
    BadSigma(String),
    #[error("scenario {0}: need at least 2 units per group")]
    GroupSize(String),
    #[error("true model {0:?} is not among the compared models")]
    MissingTrueModel(String),
    #[error("replication {rep}: {source}")]
    Replication { rep: usize, source: ComparisonError },
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub name: String,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub n_per_group: usize,
    pub true_model: String,
    pub reps: usize,
    pub base_seed: u64,
}

impl SimScenario {
    pub fn validate(&self) -> Result<(), SimulationError> {
        if self.means.len() != self.sds.len() || self.means.is_empty() {
            return Err(SimulationError::Shape(self.name.clone()));
        }
        if self.sds.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(SimulationError::BadSigma(self.name.clone()));
        }
        if self.n_per_group < 2 {
            return Err(SimulationError::GroupSize(self.name.clone()));
        }
        Ok(())
    }

    pub fn groups(&self) -> usize {
        self.means.len()
    }

    /// max σ² / min σ².
    pub fn variance_ratio(&self) -> f64 {
        let max = self.sds.iter().copied().fold(f64::MIN, f64::max);
        let min = self.sds.iter().copied().fold(f64::MAX, f64::min);
        (max / min).powi(2)
    }
}

pub const M0: &str = "mu1 = mu2 = mu3 = mu4 = mu5";
pub const M2: &str = "mu1 < mu2 < mu3 < mu4 < mu5";
pub const M3: &str = "mu2 < mu1 < mu4 < {mu3 = mu5}";
pub const ME: &str = "mu1, mu2, mu3, mu4, mu5";

/// Models of the homoscedastic study: M0, M2, M3, Me.
pub fn example1_models() -> Vec<ConstraintModel> {
    [("M0", M0), ("M2", M2), ("M3", M3), ("Me", ME)]
        .iter()
        .map(|(n, t)| parse_model_spec(n, t, 5).expect("built-in model"))
        .collect()
}

/// Models of the heteroscedastic study: M0, M2, Me.
pub fn example2_models() -> Vec<ConstraintModel> {
    [("M0", M0), ("M2", M2), ("Me", ME)]
        .iter()
        .map(|(n, t)| parse_model_spec(n, t, 5).expect("built-in model"))
        .collect()
}

fn homoscedastic(pop: &str) -> Option<(Vec<f64>, f64, &'static str)> {
    Some(match pop {
        "1" => (vec![0.0; 5], 1.0, "M0"),
        "2s" => (vec![0.0, 0.2, 0.4, 0.6, 0.8], 1.0, "M2"),
        "2m" => (vec![0.0, 0.3, 0.6, 0.9, 1.2], 1.0, "M2"),
        "2l" => (vec![0.0, 0.4, 0.8, 1.2, 1.6], 1.0, "M2"),
        "3" => (vec![2.23, 1.33, 3.23, 2.33, 3.23], 1.55, "M3"),
        _ => return None,
    })
}

fn heteroscedastic_means(pop: &str) -> Option<(Vec<f64>, &'static str)> {
    Some(match pop {
        "1" => (vec![0.0; 5], "M0"),
        "2s" => (vec![0.0, 0.7, 1.4, 2.1, 2.8], "M2"),
        "2m" => (vec![0.0, 1.1, 2.2, 3.3, 4.4], "M2"),
        "2l" => (vec![0.0, 1.4, 2.8, 4.2, 5.6], "M2"),
        _ => return None,
    })
}

fn heteroscedastic_sds(f: u32) -> Option<Vec<f64>> {
    Some(match f {
        1 => vec![3.0; 5],
        11 => vec![1.4, 2.2, 3.0, 3.8, 4.6],
        25 => vec![1.0, 2.0, 3.0, 4.0, 5.0],
        _ => return None,
    })
}

/// Names accepted by [`preset`].
pub fn preset_names() -> Vec<String> {
    let mut v: Vec<String> = ["pop1", "pop2s", "pop2m", "pop2l", "pop3"].iter().map(|s| s.to_string()).collect();
    for pop in ["1", "2s", "2m", "2l"] {
        for f in [1, 11, 25] {
            v.push(format!("het-pop{pop}-F{f}"));
        }
    }
    v
}

/// Built-in scenario. `pop1`, `pop2s`, `pop2m`, `pop2l`, `pop3` are the
/// homoscedastic designs; `het-pop<p>-F<f>` with p in {1, 2s, 2m, 2l} and
/// f in {1, 11, 25} are the heteroscedastic ones.
pub fn preset(name: &str, n_per_group: usize, reps: usize, base_seed: u64) -> Result<SimScenario, SimulationError> {
    let unknown = || SimulationError::UnknownScenario(name.to_string());
    let (means, sds, truth) = if let Some(rest) = name.strip_prefix("het-pop") {
        let (pop, f) = rest.split_once("-F").ok_or_else(unknown)?;
        let (means, truth) = heteroscedastic_means(pop).ok_or_else(unknown)?;
        let sds = f.parse().ok().and_then(heteroscedastic_sds).ok_or_else(unknown)?;
        (means, sds, truth)
    } else {
        let pop = name.strip_prefix("pop").ok_or_else(unknown)?;
        let (means, sd, truth) = homoscedastic(pop).ok_or_else(unknown)?;
        (means, vec![sd; 5], truth)
    };
    let s = SimScenario {
        name: name.to_string(),
        means,
        sds,
        n_per_group,
        true_model: truth.to_string(),
        reps,
        base_seed,
    };
    s.validate()?;
    Ok(s)
}

/// Model list matching a preset: the heteroscedastic presets use
/// M0, M2, Me; the others add M3.
pub fn preset_models(name: &str) -> Vec<ConstraintModel> {
    if name.starts_with("het-") {
        example2_models()
    } else {
        example1_models()
    }
}

/// Replication `r` of the scenario: y_ij = μ_j + σ_j z_ij.
pub fn generate_scenario(s: &SimScenario, r: usize) -> AnovaData {
    let mut rng = RandomSource::new(s.base_seed, 0).derive(r as u64);
    let samples: Vec<Vec<f64>> = s
        .means
        .iter()
        .zip(&s.sds)
        .map(|(m, sd)| (0..s.n_per_group).map(|_| m + sd * rng.standard_normal()).collect())
        .collect();
    AnovaData::from_groups(&samples).expect("scenario validated")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub scenario: String,
    pub replication: usize,
    pub base_seed: u64,
    pub models: Vec<String>,
    pub log_bf_k0: Vec<f64>,
    pub pmp: Vec<f64>,
    pub top_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub scenario: SimScenario,
    pub models: Vec<String>,
    pub top_counts: Vec<usize>,
    pub top_percent: Vec<f64>,
    pub median_true_pmp: f64,
    pub records: Vec<ReplicationRecord>,
}

impl SummaryTable {
    pub fn percent_of(&self, model: &str) -> Option<f64> {
        self.models.iter().position(|m| m == model).map(|i| self.top_percent[i])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Run every replication (in parallel on the current rayon pool) and
/// aggregate in replication order.
pub fn run_simulation_study(
    s: &SimScenario,
    models: &[ConstraintModel],
    settings: &ComparisonSettings,
) -> Result<SummaryTable, SimulationError> {
    s.validate()?;
    let truth = models
        .iter()
        .position(|m| m.name() == s.true_model)
        .ok_or_else(|| SimulationError::MissingTrueModel(s.true_model.clone()))?;
    let names: Vec<String> = models.iter().map(|m| m.name().to_string()).collect();
    let records = (0..s.reps)
        .into_par_iter()
        .map(|r| {
            let data = generate_scenario(s, r);
            let rng = RandomSource::new(s.base_seed, 1).derive(r as u64);
            let report = compare(&data, models, None, settings, &rng)
                .map_err(|source| SimulationError::Replication { rep: r, source })?;
            Ok(ReplicationRecord {
                scenario: s.name.clone(),
                replication: r,
                base_seed: s.base_seed,
                models: names.clone(),
                log_bf_k0: report.log_bf_k0(),
                top_model: names[report.top_model()].clone(),
                pmp: report.posterior_probs,
            })
        })
        .collect::<Result<Vec<_>, SimulationError>>()?;

    let mut top_counts = vec![0; models.len()];
    for rec in &records {
        let i = names.iter().position(|n| *n == rec.top_model).expect("model name");
        top_counts[i] += 1;
    }
    let reps = records.len().max(1) as f64;
    let true_pmps: Vec<f64> = records.iter().map(|r| r.pmp[truth]).collect();
    Ok(SummaryTable {
        scenario: s.clone(),
        top_percent: top_counts.iter().map(|&c| 100.0 * c as f64 / reps).collect(),
        top_counts,
        median_true_pmp: median(&true_pmps),
        models: names,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub delta: f64,
    pub sigma: f64,
    pub n_per_group: usize,
    pub sd: f64,
    pub power: f64,
}

/// P{Z > z_crit − Δ/sd} with sd = √(2σ²/n) for two groups of size n.
pub fn power(delta: f64, sigma: f64, n_per_group: usize, z_crit: f64) -> PowerRow {
    let sd = (2.0 * sigma * sigma / n_per_group as f64).sqrt();
    PowerRow {
        delta,
        sigma,
        n_per_group,
        sd,
        power: normal_sf(z_crit - delta / sd),
    }
}

/// One row per (Δ, n) pair, Δ outer.
pub fn power_table(deltas: &[f64], sigma: f64, n_per_group: &[usize], z_crit: f64) -> Vec<PowerRow> {
    deltas
        .iter()
        .flat_map(|&d| n_per_group.iter().map(move |&n| power(d, sigma, n, z_crit)))
        .collect()
}

/// Adjacent-mean spacings of the 2s, 2m and 2l populations.
pub const POWER_DELTAS: [f64; 3] = [0.2, 0.3, 0.4];
pub const POWER_SIZES: [usize; 2] = [25, 50];
pub const Z_CRIT: f64 = 1.96;
