//! Conditional intrinsic posterior of (γ, η) for an encompassing model and
//! the relative-belief Bayes factor of an inequality region.
//!
//! The sampler alternates
//!
//! 1. η | γ, y by an independence Metropolis step with the Beta(1/2, 1/2)
//!    prior as proposal, targeting
//!    `η^{-(n+1)/2} (1−η)^{(n+q−1)/2} exp{−[(1−η)·D(γ) + C(γ)/η] / (2σ0²)}`,
//!    with `C(γ) = |y − Zγ|²` and `D(γ) = (γ − α0e)ᵀ W (γ − α0e)`;
//! 2. γ | σ², y ~ N_q(μ_γ, Σ_γ) exactly, with
//!    `Σ_γ = (W/(σ²+σ0²) + ZᵀZ/σ²)⁻¹` and
//!    `μ_γ = Σ_γ (W α0 e/(σ²+σ0²) + Zᵀy/σ²)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{ConstraintModel, InequalityRegion};
use crate::gaussian::{
    arcsine_logpdf, cholesky, eta_to_sigma2, mvn_sample_chol, sample_sigma2_via_eta, NumericError,
    RandomSource,
};
use crate::prior::{CipSpec, NullParams, PriorDraws};

pub const DEFAULT_PRIOR_DRAWS: usize = 100_000;
pub const DEFAULT_MCMC_ITERS: usize = 55_000;
pub const DEFAULT_BURNIN: usize = 5_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McmcError {
    #[error("σ² must be positive, got {0}")]
    BadSigma2(f64),
    #[error("η must lie in (0, 1), got {0}")]
    BadEta(f64),
    #[error("iterations ({iters}) must exceed burn-in ({burnin})")]
    BadChainLength { iters: usize, burnin: usize },
    #[error("no prior draws fell in the region; increase the prior draw count (currently {0})")]
    InsufficientPriorDraws(usize),
    #[error("draws have δ dimension {got}, model expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("no draws to summarize")]
    Empty,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Independence Metropolis-Hastings step. Returns the next state and whether
/// the proposal was accepted.
pub fn independence_mh<S, T, P, D>(
    current: S,
    log_target: T,
    log_proposal: P,
    draw: D,
    rng: &mut RandomSource,
) -> (S, bool)
where
    S: Copy,
    T: Fn(S) -> f64,
    P: Fn(S) -> f64,
    D: FnOnce(&mut RandomSource) -> S,
{
    let proposal = draw(rng);
    let log_ratio = (log_target(proposal) - log_proposal(proposal))
        - (log_target(current) - log_proposal(current));
    if rng.uniform_open().ln() < log_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Sufficient statistics and prior constants for one (y, θ0, spec).
#[derive(Debug, Clone)]
pub struct ConditionalIp<'a> {
    spec: &'a CipSpec,
    alpha0: f64,
    sigma0_sq: f64,
    zty: DVector<f64>,
    yty: f64,
    /// W α0 e
    w_prior_mean: DVector<f64>,
}

impl<'a> ConditionalIp<'a> {
    pub fn new(y: &DVector<f64>, theta0: &NullParams, spec: &'a CipSpec) -> Result<Self, McmcError> {
        if y.len() != spec.n() {
            return Err(McmcError::Dimension {
                expected: spec.n(),
                got: y.len(),
            });
        }
        Ok(Self {
            spec,
            alpha0: theta0.alpha0,
            sigma0_sq: theta0.sigma0_sq(),
            zty: spec.z().tr_mul(y),
            yty: y.dot(y),
            w_prior_mean: spec.w() * spec.prior_mean(theta0),
        })
    }

    fn conditional_parts(
        &self,
        sigma2: f64,
        prior_weight: f64,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>), McmcError> {
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(McmcError::BadSigma2(sigma2));
        }
        let tau = prior_weight / (sigma2 + self.sigma0_sq);
        let precision = self.spec.w() * tau + self.spec.structure().ztz() / sigma2;
        let chol = cholesky(&precision, "γ full-conditional precision")?;
        let cov = chol.inverse();
        let cov = (&cov + cov.transpose()) * 0.5;
        let rhs = &self.w_prior_mean * tau + &self.zty / sigma2;
        let mean = &cov * rhs;
        let l = cholesky(&cov, "γ full-conditional covariance")?.l();
        Ok((mean, cov, l))
    }

    /// (μ_γ, Σ_γ) of γ | σ², y.
    pub fn gamma_conditional(&self, sigma2: f64) -> Result<(DVector<f64>, DMatrix<f64>), McmcError> {
        let (m, c, _) = self.conditional_parts(sigma2, 1.0)?;
        Ok((m, c))
    }

    pub fn residual_ss(&self, gamma: &DVector<f64>) -> f64 {
        let ztz = self.spec.structure().ztz();
        (self.yty - 2.0 * gamma.dot(&self.zty) + gamma.dot(&(ztz * gamma))).max(0.0)
    }

    pub fn prior_quadratic(&self, gamma: &DVector<f64>) -> f64 {
        let mut dev = gamma.clone();
        dev[0] -= self.alpha0;
        dev.dot(&(self.spec.w() * &dev))
    }

    /// Unnormalized log full conditional of η given C(γ) and D(γ).
    pub fn eta_log_target(&self, eta: f64, c: f64, d: f64) -> f64 {
        if !(eta > 0.0 && eta < 1.0) {
            return f64::NEG_INFINITY;
        }
        let n = self.spec.n() as f64;
        let q = self.spec.q() as f64;
        -0.5 * (n + 1.0) * eta.ln() + 0.5 * (n + q - 1.0) * (1.0 - eta).ln()
            - ((1.0 - eta) * d + c / eta) / (2.0 * self.sigma0_sq)
    }

    /// One independence-MH update of η given γ.
    pub fn eta_step(&self, eta: f64, gamma: &DVector<f64>, rng: &mut RandomSource) -> Result<(f64, bool), McmcError> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(McmcError::BadEta(eta));
        }
        let c = self.residual_ss(gamma);
        let d = self.prior_quadratic(gamma);
        let mut err = None;
        let out = independence_mh(
            eta,
            |e| self.eta_log_target(e, c, d),
            arcsine_logpdf,
            |r| match sample_sigma2_via_eta(1.0, r) {
                Ok((e, _)) => e,
                Err(e) => {
                    err = Some(e);
                    eta
                }
            },
            rng,
        );
        match err {
            Some(e) => Err(e.into()),
            None => Ok(out),
        }
    }

    fn least_squares(&self) -> Result<DVector<f64>, McmcError> {
        let chol = cholesky(self.spec.structure().ztz(), "ZᵀZ")?;
        Ok(chol.solve(&self.zty))
    }
}

pub fn gamma_full_conditional(
    sigma2: f64,
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
) -> Result<(DVector<f64>, DMatrix<f64>), McmcError> {
    ConditionalIp::new(y, theta0, spec)?.gamma_conditional(sigma2)
}

pub fn eta_metropolis_step(
    eta_current: f64,
    gamma: &DVector<f64>,
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
    rng: &mut RandomSource,
) -> Result<f64, McmcError> {
    Ok(ConditionalIp::new(y, theta0, spec)?.eta_step(eta_current, gamma, rng)?.0)
}

#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    q: usize,
    gamma: Vec<f64>,
    pub eta: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub acceptance: f64,
    pub burnin: usize,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn gamma(&self, t: usize) -> &[f64] {
        &self.gamma[t * self.q..(t + 1) * self.q]
    }

    pub fn gamma_mean(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.q);
        for t in 0..self.len() {
            acc += DVector::from_column_slice(self.gamma(t));
        }
        acc / self.len() as f64
    }
}

/// Draws of δ = γ[1..] from either the prior or the posterior.
pub trait DeltaDraws {
    fn draw_count(&self) -> usize;
    fn delta_dim(&self) -> usize;
    fn delta_at(&self, t: usize) -> &[f64];
}

impl DeltaDraws for PriorDraws {
    fn draw_count(&self) -> usize {
        self.len()
    }
    fn delta_dim(&self) -> usize {
        self.q() - 1
    }
    fn delta_at(&self, t: usize) -> &[f64] {
        self.delta(t)
    }
}

impl DeltaDraws for PosteriorDraws {
    fn draw_count(&self) -> usize {
        self.len()
    }
    fn delta_dim(&self) -> usize {
        self.q - 1
    }
    fn delta_at(&self, t: usize) -> &[f64] {
        &self.gamma(t)[1..]
    }
}

/// Alternate the η Metropolis step and the exact γ draw; keep the last
/// `iters − burnin` states.
pub fn run_posterior_chain(
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
    iters: usize,
    burnin: usize,
    rng: &mut RandomSource,
) -> Result<PosteriorDraws, McmcError> {
    if iters <= burnin {
        return Err(McmcError::BadChainLength { iters, burnin });
    }
    let cond = ConditionalIp::new(y, theta0, spec)?;
    let q = spec.q();
    let kept = iters - burnin;
    let mut out = PosteriorDraws {
        q,
        gamma: Vec::with_capacity(kept * q),
        eta: Vec::with_capacity(kept),
        sigma2: Vec::with_capacity(kept),
        acceptance: 0.0,
        burnin,
    };
    let mut gamma = cond.least_squares()?;
    let mut eta = 0.5;
    let mut accepted = 0usize;
    for it in 0..iters {
        let (next, acc) = cond.eta_step(eta, &gamma, rng)?;
        eta = next;
        accepted += usize::from(acc);
        let sigma2 = eta_to_sigma2(eta, cond.sigma0_sq);
        let (mean, _, l) = cond.conditional_parts(sigma2, 1.0)?;
        gamma = mvn_sample_chol(&mean, &l, 1.0, rng);
        if it >= burnin {
            out.gamma.extend(gamma.iter());
            out.eta.push(eta);
            out.sigma2.push(sigma2);
        }
    }
    out.acceptance = accepted as f64 / iters as f64;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Prior,
    Posterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionProbEstimate {
    pub estimate: f64,
    pub hits: usize,
    pub total: usize,
    pub side: Side,
}

pub fn region_prob_in<D: DeltaDraws + ?Sized>(
    draws: &D,
    region: &InequalityRegion,
    side: Side,
) -> Result<RegionProbEstimate, McmcError> {
    let total = draws.draw_count();
    if total == 0 {
        return Err(McmcError::Empty);
    }
    if draws.delta_dim() != region.delta_dim() {
        return Err(McmcError::Dimension {
            expected: region.delta_dim(),
            got: draws.delta_dim(),
        });
    }
    let hits = if region.is_unconstrained() {
        total
    } else {
        (0..total)
            .filter(|&t| region.contains_unchecked(draws.delta_at(t)))
            .count()
    };
    Ok(RegionProbEstimate {
        estimate: hits as f64 / total as f64,
        hits,
        total,
        side,
    })
}

pub fn region_prob<D: DeltaDraws + ?Sized>(
    draws: &D,
    model: &ConstraintModel,
    side: Side,
) -> Result<RegionProbEstimate, McmcError> {
    region_prob_in(draws, &model.region(), side)
}

/// log of the posterior-to-prior region probability ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBayesFactor {
    /// −∞ when no posterior draw hit the region.
    pub log_bf: f64,
    /// Set when posterior hits are 0: log(1/(total+1)) − log(prior estimate),
    /// an upper bound at the sampler's resolution.
    pub below_resolution: Option<f64>,
}

pub fn log_bf_constrained_vs_encompassing(
    prior_est: &RegionProbEstimate,
    post_est: &RegionProbEstimate,
) -> Result<RegionBayesFactor, McmcError> {
    if prior_est.hits == 0 {
        return Err(McmcError::InsufficientPriorDraws(prior_est.total));
    }
    let log_prior = prior_est.estimate.ln();
    if post_est.hits == 0 {
        return Ok(RegionBayesFactor {
            log_bf: f64::NEG_INFINITY,
            below_resolution: Some(-((post_est.total + 1) as f64).ln() - log_prior),
        });
    }
    Ok(RegionBayesFactor {
        log_bf: post_est.estimate.ln() - log_prior,
        below_resolution: None,
    })
}
