//! Full model comparison on one dataset.
//!
//! Each model's Bayes factor against the null is the product of the
//! encompassing-vs-null factor (an evidence ratio) and the
//! constrained-vs-encompassing factor (a region probability ratio), both
//! under the same prior built from one shared θ0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::ConstraintModel;
use crate::data::AnovaData;
use crate::evidence::{log_marginal, null_log_likelihood, EvidenceError, EvidenceResult, EvidenceSettings};
use crate::gaussian::RandomSource;
use crate::posterior::{
    log_bf_constrained_vs_encompassing, region_prob_in, run_posterior_chain, McmcError,
    RegionProbEstimate, Side, DEFAULT_BURNIN, DEFAULT_MCMC_ITERS, DEFAULT_PRIOR_DRAWS,
};
use crate::prior::{cip_sample, estimate_null_params, make_cip, NullParams, PriorError};
use crate::quadrature::log_sum_exp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComparisonError {
    #[error("no models to compare")]
    NoModels,
    #[error("duplicate model name {0:?}")]
    DuplicateName(String),
    #[error("{got} prior probabilities given for {models} models")]
    PriorLength { models: usize, got: usize },
    #[error("prior model probabilities must be positive and sum to 1 (sum = {0})")]
    BadPrior(f64),
    #[error("model {model:?} has {got} groups, data have {expected}")]
    GroupMismatch { model: String, expected: usize, got: usize },
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("model {model:?}: {source}")]
    Prior { model: String, source: PriorError },
    #[error("model {model:?}: {source}")]
    Evidence { model: String, source: EvidenceError },
    #[error("model {model:?}: {source}")]
    Mcmc { model: String, source: McmcError },
    #[error(transparent)]
    Null(#[from] PriorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSettings {
    pub evidence: EvidenceSettings,
    pub prior_draws: usize,
    pub mcmc_iters: usize,
    pub burnin: usize,
    /// Use these null parameters instead of estimating them from the data.
    pub theta0: Option<NullParams>,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        Self {
            evidence: EvidenceSettings::default(),
            prior_draws: DEFAULT_PRIOR_DRAWS,
            mcmc_iters: DEFAULT_MCMC_ITERS,
            burnin: DEFAULT_BURNIN,
            theta0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionDiagnostics {
    pub prior: RegionProbEstimate,
    pub posterior: RegionProbEstimate,
    pub eta_acceptance: f64,
    /// Upper bound on log BF_{c,e} when no posterior draw hit the region.
    pub below_resolution: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfBreakdown {
    pub model: String,
    pub log_bf_e_vs_0: f64,
    pub log_bf_c_vs_e: f64,
    pub log_bf_c_vs_0: f64,
    pub region: Option<RegionDiagnostics>,
    pub evidence: Option<EvidenceResult>,
}

impl BfBreakdown {
    fn assemble(
        model: &str,
        log_bf_e_vs_0: f64,
        log_bf_c_vs_e: f64,
        region: Option<RegionDiagnostics>,
        evidence: Option<EvidenceResult>,
    ) -> Self {
        Self {
            model: model.to_string(),
            log_bf_e_vs_0,
            log_bf_c_vs_e,
            log_bf_c_vs_0: log_bf_e_vs_0 + log_bf_c_vs_e,
            region,
            evidence,
        }
    }
}

/// log BF of `model` against the null model.
pub fn bf_k0(
    data: &AnovaData,
    model: &ConstraintModel,
    theta0: &NullParams,
    settings: &ComparisonSettings,
    rng: &mut RandomSource,
) -> Result<BfBreakdown, ComparisonError> {
    let name = model.name();
    if model.groups() != data.num_groups() {
        return Err(ComparisonError::GroupMismatch {
            model: name.to_string(),
            expected: data.num_groups(),
            got: model.groups(),
        });
    }
    if model.is_null() {
        return Ok(BfBreakdown::assemble(name, 0.0, 0.0, None, None));
    }
    let prior_err = |source| ComparisonError::Prior { model: name.to_string(), source };
    let mcmc_err = |source| ComparisonError::Mcmc { model: name.to_string(), source };

    let spec = make_cip(&model.encompassing_design(), data.group_sizes()).map_err(prior_err)?;
    let y = data.y();
    let mut ev_rng = rng.derive(0);
    let ev = log_marginal(&y, theta0, &spec, &settings.evidence, &mut ev_rng).map_err(|source| {
        ComparisonError::Evidence { model: name.to_string(), source }
    })?;
    let log_bf_e_vs_0 = ev.log_marginal - null_log_likelihood(&y, theta0);

    let region = model.region();
    if region.is_unconstrained() {
        return Ok(BfBreakdown::assemble(name, log_bf_e_vs_0, 0.0, None, Some(ev)));
    }
    let prior_draws = cip_sample(theta0, &spec, settings.prior_draws, &mut rng.derive(1)).map_err(prior_err)?;
    let prior_est = region_prob_in(&prior_draws, &region, Side::Prior).map_err(mcmc_err)?;
    drop(prior_draws);
    let chain = run_posterior_chain(&y, theta0, &spec, settings.mcmc_iters, settings.burnin, &mut rng.derive(2))
        .map_err(mcmc_err)?;
    let post_est = region_prob_in(&chain, &region, Side::Posterior).map_err(mcmc_err)?;
    let rbf = log_bf_constrained_vs_encompassing(&prior_est, &post_est).map_err(mcmc_err)?;
    let diag = RegionDiagnostics {
        prior: prior_est,
        posterior: post_est,
        eta_acceptance: chain.acceptance,
        below_resolution: rbf.below_resolution,
    };
    Ok(BfBreakdown::assemble(name, log_bf_e_vs_0, rbf.log_bf, Some(diag), Some(ev)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub theta0: NullParams,
    pub breakdowns: Vec<BfBreakdown>,
    pub prior_probs: Vec<f64>,
    pub posterior_probs: Vec<f64>,
    /// Name of the model the display Bayes factors are relative to.
    pub display_reference: String,
    pub display_log_bf: Vec<f64>,
}

impl ComparisonReport {
    pub fn index_of(&self, model: &str) -> Option<usize> {
        self.breakdowns.iter().position(|b| b.model == model)
    }

    pub fn pmp(&self, model: &str) -> Option<f64> {
        self.index_of(model).map(|i| self.posterior_probs[i])
    }

    /// Index of the model with the largest posterior probability; ties go
    /// to the earlier model.
    pub fn top_model(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.posterior_probs.iter().enumerate() {
            if p > self.posterior_probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn log_bf_k0(&self) -> Vec<f64> {
        self.breakdowns.iter().map(|b| b.log_bf_c_vs_0).collect()
    }
}

/// Posterior model probabilities `p_k BF_k0 / Σ_l p_l BF_l0`.
pub fn posterior_probabilities(log_bf_k0: &[f64], prior_probs: &[f64]) -> Vec<f64> {
    let terms: Vec<f64> = log_bf_k0
        .iter()
        .zip(prior_probs)
        .map(|(b, p)| b + p.ln())
        .collect();
    let norm = log_sum_exp(terms.iter().copied());
    terms.iter().map(|t| (t - norm).exp()).collect()
}

/// The same probabilities via `(1 + Σ_{l≠k} (p_l/p_k) BF_lk)⁻¹`.
pub fn posterior_probabilities_pairwise(log_bf_k0: &[f64], prior_probs: &[f64]) -> Vec<f64> {
    (0..log_bf_k0.len())
        .map(|k| {
            if log_bf_k0[k] == f64::NEG_INFINITY {
                return 0.0;
            }
            let others = (0..log_bf_k0.len()).filter(|&l| l != k).map(|l| {
                (prior_probs[l] / prior_probs[k]).ln() + log_bf_k0[l] - log_bf_k0[k]
            });
            let rest = log_sum_exp(others);
            // 1/(1 + e^rest) = exp(−log(1 + e^rest))
            (-log_sum_exp([0.0, rest])).exp()
        })
        .collect()
}

fn check_inputs(
    data: &AnovaData,
    models: &[ConstraintModel],
    prior_probs: Option<&[f64]>,
) -> Result<Vec<f64>, ComparisonError> {
    if models.is_empty() {
        return Err(ComparisonError::NoModels);
    }
    for (i, m) in models.iter().enumerate() {
        if models[..i].iter().any(|o| o.name() == m.name()) {
            return Err(ComparisonError::DuplicateName(m.name().to_string()));
        }
        if m.groups() != data.num_groups() {
            return Err(ComparisonError::GroupMismatch {
                model: m.name().to_string(),
                expected: data.num_groups(),
                got: m.groups(),
            });
        }
    }
    match prior_probs {
        None => Ok(vec![1.0 / models.len() as f64; models.len()]),
        Some(p) => {
            if p.len() != models.len() {
                return Err(ComparisonError::PriorLength { models: models.len(), got: p.len() });
            }
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&v| !(v > 0.0) || !v.is_finite()) || (sum - 1.0).abs() > 1e-9 {
                return Err(ComparisonError::BadPrior(sum));
            }
            Ok(p.to_vec())
        }
    }
}

/// Compare `models` on `data`. Prior model probabilities default to
/// uniform. Model `k` draws from `rng.derive(k)`, so results do not depend
/// on scheduling.
pub fn compare(
    data: &AnovaData,
    models: &[ConstraintModel],
    prior_probs: Option<&[f64]>,
    settings: &ComparisonSettings,
    rng: &RandomSource,
) -> Result<ComparisonReport, ComparisonError> {
    let prior_probs = check_inputs(data, models, prior_probs)?;
    let theta0 = match settings.theta0 {
        Some(t) => t,
        None => estimate_null_params(data.responses())?,
    };
    let breakdowns = models
        .par_iter()
        .enumerate()
        .map(|(k, m)| bf_k0(data, m, &theta0, settings, &mut rng.derive(k as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    let log_bf: Vec<f64> = breakdowns.iter().map(|b| b.log_bf_c_vs_0).collect();
    let posterior_probs = posterior_probabilities(&log_bf, &prior_probs);

    let (display_reference, offset) = match models.iter().position(|m| m.is_encompassing()) {
        Some(i) => (models[i].name().to_string(), log_bf[i]),
        None => match models.iter().position(|m| m.is_null()) {
            Some(i) => (models[i].name().to_string(), 0.0),
            None => ("null".to_string(), 0.0),
        },
    };
    Ok(ComparisonReport {
        theta0,
        display_log_bf: log_bf.iter().map(|b| b - offset).collect(),
        breakdowns,
        prior_probs,
        posterior_probs,
        display_reference,
    })
}

/// BF_{lk} = BF_{l0} / BF_{k0}.
pub fn pairwise_bf(report: &ComparisonReport, model_l: &str, model_k: &str) -> Result<f64, ComparisonError> {
    Ok(pairwise_log_bf(report, model_l, model_k)?.exp())
}

pub fn pairwise_log_bf(report: &ComparisonReport, model_l: &str, model_k: &str) -> Result<f64, ComparisonError> {
    let idx = |m: &str| report.index_of(m).ok_or_else(|| ComparisonError::UnknownModel(m.to_string()));
    let (l, k) = (idx(model_l)?, idx(model_k)?);
    let (bl, bk) = (report.breakdowns[l].log_bf_c_vs_0, report.breakdowns[k].log_bf_c_vs_0);
    if bl == bk {
        return Ok(0.0);
    }
    Ok(bl - bk)
}
