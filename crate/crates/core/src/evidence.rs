//! Marginal likelihood of an encompassing model under its conditional
//! intrinsic prior, with γ integrated out analytically:
//!
//! ```text
//! m(y | α0, σ0) = ∫_0^1 N_n(y | α0·1, σ0²/(1−η) · (η I + Z W⁻¹ Zᵀ)) Beta(η | 1/2, 1/2) dη
//! ```
//!
//! Two independent estimators: Gauss-Jacobi quadrature whose weight absorbs
//! the Beta(1/2, 1/2) endpoint singularities (the default; two panels split
//! at the posterior mode of η so the rule stays accurate as the integrand
//! sharpens with n), and Chib's
//! Metropolis-Hastings estimator with the Beta prior as independence
//! proposal.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::{arcsine_logpdf, sample_sigma2_via_eta, NumericError, RandomSource, ResidualStats};
use crate::prior::{CipSpec, NullParams};
use crate::quadrature::{log_sum_exp, ArcsineRule, QuadratureError};

pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_CHIB_ITERS: usize = 20_000;
const MODE_GRID: usize = 129;
const CHIB_BATCHES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvidenceError {
    #[error("η = {0} is outside the open unit interval")]
    EtaOutOfRange(f64),
    #[error("integrand is not finite at η = {0}")]
    NonFinite(f64),
    #[error("quadrature needs at least 8 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("Chib estimator needs at least 1000 iterations, got {0}")]
    TooFewIterations(usize),
    #[error("posterior mode of η lies at the boundary of (0, 1)")]
    ModeAtBoundary,
    #[error("Metropolis chain accepted no proposal in {0} iterations")]
    ZeroAcceptance(usize),
    #[error("response vector has length {got}, design has {expected} rows")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceMethod {
    #[default]
    Quadrature,
    Chib,
}

impl std::str::FromStr for EvidenceMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadrature" => Ok(Self::Quadrature),
            "chib" => Ok(Self::Chib),
            other => Err(format!("unknown evidence method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub log_marginal: f64,
    pub method: EvidenceMethod,
    /// Quadrature nodes per panel or Chib iterations N.
    pub nodes_or_iters: usize,
    /// Posterior mode η* (the quadrature split point, or Chib's θ*).
    pub mode_eta: Option<f64>,
    /// Monte Carlo standard error of `log_marginal` (Chib only).
    pub std_error: Option<f64>,
    /// |log m(nodes) − log m(2·nodes)| (quadrature only).
    pub doubling_delta: Option<f64>,
    /// Metropolis acceptance rate (Chib only).
    pub acceptance: Option<f64>,
}

/// Data-dependent pieces of the η integrand for one (y, θ0, spec) triple.
#[derive(Debug, Clone)]
pub struct EtaIntegrand<'a> {
    spec: &'a CipSpec,
    sigma0_sq: f64,
    stats: ResidualStats,
}

impl<'a> EtaIntegrand<'a> {
    pub fn new(y: &DVector<f64>, theta0: &NullParams, spec: &'a CipSpec) -> Result<Self, EvidenceError> {
        if y.len() != spec.n() {
            return Err(EvidenceError::Dimension {
                expected: spec.n(),
                got: y.len(),
            });
        }
        let r = y.map(|v| v - theta0.alpha0);
        Ok(Self {
            spec,
            sigma0_sq: theta0.sigma0_sq(),
            stats: spec.structure().residual_stats(&r),
        })
    }

    /// log N_n(y | α0·1, a·I + b·Z W⁻¹ Zᵀ) with a = σ0²η/(1−η), b = σ0²/(1−η).
    pub fn log_likelihood(&self, eta: f64) -> Result<f64, EvidenceError> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(EvidenceError::EtaOutOfRange(eta));
        }
        let b = self.sigma0_sq / (1.0 - eta);
        let a = eta * b;
        let v = self.spec.structure().logpdf_stats(a, b, &self.stats)?;
        if !v.is_finite() {
            return Err(EvidenceError::NonFinite(eta));
        }
        Ok(v)
    }

    /// Unnormalized log posterior of η: likelihood plus Beta(1/2,1/2) prior.
    pub fn log_posterior_kernel(&self, eta: f64) -> Result<f64, EvidenceError> {
        Ok(self.log_likelihood(eta)? + arcsine_logpdf(eta))
    }
}

pub fn integrand_log(
    eta: f64,
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
) -> Result<f64, EvidenceError> {
    EtaIntegrand::new(y, theta0, spec)?.log_likelihood(eta)
}

fn quadrature_with(integrand: &EtaIntegrand<'_>, rule: &ArcsineRule) -> Result<f64, EvidenceError> {
    let terms = rule
        .etas()
        .iter()
        .zip(rule.log_weights())
        .map(|(&eta, &lw)| Ok(integrand.log_likelihood(eta)? + lw))
        .collect::<Result<Vec<f64>, EvidenceError>>()?;
    Ok(log_sum_exp(terms))
}

pub fn log_marginal_quadrature(
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
    nodes: usize,
) -> Result<EvidenceResult, EvidenceError> {
    if nodes < 8 {
        return Err(EvidenceError::TooFewNodes(nodes));
    }
    let integrand = EtaIntegrand::new(y, theta0, spec)?;
    let split = match find_mode(|eta| integrand.log_posterior_kernel(eta)) {
        Ok(mode) => mode,
        Err(EvidenceError::ModeAtBoundary) => 0.5,
        Err(e) => return Err(e),
    };
    let coarse = quadrature_with(&integrand, &ArcsineRule::split(nodes, split)?)?;
    let fine = quadrature_with(&integrand, &ArcsineRule::split(2 * nodes, split)?)?;
    Ok(EvidenceResult {
        log_marginal: coarse,
        method: EvidenceMethod::Quadrature,
        nodes_or_iters: nodes,
        mode_eta: Some(split),
        std_error: None,
        doubling_delta: Some((coarse - fine).abs()),
        acceptance: None,
    })
}

/// Mode of `f` on (0, 1): bracket on a uniform 129-point grid, then refine by
/// golden-section search between the neighbours of the best grid point.
pub fn find_mode<F>(f: F) -> Result<f64, EvidenceError>
where
    F: Fn(f64) -> Result<f64, EvidenceError>,
{
    let h = 1.0 / (MODE_GRID + 1) as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 1..=MODE_GRID {
        let v = f(i as f64 * h)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    if best.0 == 1 || best.0 == MODE_GRID {
        // the edge cells still have interior room; check the edge itself
        let edge = if best.0 == 1 { h * 1e-6 } else { 1.0 - h * 1e-6 };
        if f(edge)? >= best.1 {
            return Err(EvidenceError::ModeAtBoundary);
        }
    }
    let (mut lo, mut hi) = ((best.0 - 1) as f64 * h, (best.0 + 1) as f64 * h);
    if lo <= 0.0 {
        lo = h * 1e-6;
    }
    if hi >= 1.0 {
        hi = 1.0 - h * 1e-6;
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > 1e-12 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Batch-means variance of the sample mean of an autocorrelated series.
fn batch_means_var(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    if size < 2 {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        return xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ((xs.len() - 1) * xs.len()) as f64;
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / ((batches - 1) * batches) as f64
}

fn iid_mean_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / ((n - 1.0) * n)
}

/// Chib's estimator `ln m = ln f(y|η*) + ln p(η*) − ln p̂(η*|y)` where
/// `p̂(η*|y)` is the ratio of the mean acceptance probability into η* over
/// posterior draws (times the proposal density at η*) and the mean
/// acceptance probability out of η* over proposal draws.
pub fn log_marginal_chib(
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
    iters: usize,
    rng: &mut RandomSource,
) -> Result<EvidenceResult, EvidenceError> {
    if iters < 1000 {
        return Err(EvidenceError::TooFewIterations(iters));
    }
    let integrand = EtaIntegrand::new(y, theta0, spec)?;
    let mode = find_mode(|eta| integrand.log_posterior_kernel(eta))?;
    let loglik_mode = integrand.log_likelihood(mode)?;
    let logprior_mode = arcsine_logpdf(mode);

    // With the prior as independence proposal the acceptance probability
    // from η to η' is min(1, f(y|η')/f(y|η)).
    let draw_prior = |rng: &mut RandomSource| -> Result<f64, EvidenceError> {
        Ok(sample_sigma2_via_eta(1.0, rng)?.0)
    };
    let mut current_ll = loglik_mode;
    let mut accepted = 0usize;
    let mut to_mode = Vec::with_capacity(iters);
    for step in 0..2 * iters {
        let prop = draw_prior(rng)?;
        let prop_ll = integrand.log_likelihood(prop)?;
        let log_u = rng.uniform_open().ln();
        if log_u < prop_ll - current_ll {
            current_ll = prop_ll;
            if step >= iters {
                accepted += 1;
            }
        }
        if step >= iters {
            to_mode.push((loglik_mode - current_ll).min(0.0).exp());
        }
    }
    if accepted == 0 {
        return Err(EvidenceError::ZeroAcceptance(iters));
    }
    let mut from_mode = Vec::with_capacity(iters);
    for _ in 0..iters {
        let prop = draw_prior(rng)?;
        let prop_ll = integrand.log_likelihood(prop)?;
        from_mode.push((prop_ll - loglik_mode).min(0.0).exp());
    }
    let num = to_mode.iter().sum::<f64>() / iters as f64;
    let den = from_mode.iter().sum::<f64>() / iters as f64;
    if !(den > 0.0) {
        return Err(EvidenceError::NonFinite(mode));
    }
    let log_post_at_mode = num.ln() + logprior_mode - den.ln();
    let log_marginal = loglik_mode + logprior_mode - log_post_at_mode;
    let rel_var = batch_means_var(&to_mode, CHIB_BATCHES) / (num * num) + iid_mean_var(&from_mode) / (den * den);
    Ok(EvidenceResult {
        log_marginal,
        method: EvidenceMethod::Chib,
        nodes_or_iters: iters,
        mode_eta: Some(mode),
        std_error: Some(rel_var.sqrt()),
        doubling_delta: None,
        acceptance: Some(accepted as f64 / iters as f64),
    })
}

/// log N_n(y | α0·1, σ0² I), the null-model likelihood at θ0.
pub fn null_log_likelihood(y: &DVector<f64>, theta0: &NullParams) -> f64 {
    let s2 = theta0.sigma0_sq();
    let ss: f64 = y.iter().map(|v| (v - theta0.alpha0).powi(2)).sum();
    -0.5 * y.len() as f64 * (2.0 * PI * s2).ln() - ss / (2.0 * s2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSettings {
    pub method: EvidenceMethod,
    pub nodes: usize,
    pub chib_iters: usize,
}

impl Default for EvidenceSettings {
    fn default() -> Self {
        Self {
            method: EvidenceMethod::Quadrature,
            nodes: DEFAULT_NODES,
            chib_iters: DEFAULT_CHIB_ITERS,
        }
    }
}

pub fn log_marginal(
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
    settings: &EvidenceSettings,
    rng: &mut RandomSource,
) -> Result<EvidenceResult, EvidenceError> {
    match settings.method {
        EvidenceMethod::Quadrature => log_marginal_quadrature(y, theta0, spec, settings.nodes),
        EvidenceMethod::Chib => log_marginal_chib(y, theta0, spec, settings.chib_iters, rng),
    }
}

/// log BF of the encompassing model against the null model, by quadrature.
pub fn log_bf_encompassing_vs_null(
    y: &DVector<f64>,
    theta0: &NullParams,
    spec: &CipSpec,
) -> Result<f64, EvidenceError> {
    let m = log_marginal_quadrature(y, theta0, spec, DEFAULT_NODES)?;
    Ok(m.log_marginal - null_log_likelihood(y, theta0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintModel;
    use crate::gaussian::half_cauchy_logpdf;
    use crate::prior::{estimate_null_params, make_cip};
    use nalgebra::{Cholesky, DMatrix};
    use std::f64::consts::FRAC_PI_2;

    fn dense_logpdf(r: &DVector<f64>, cov: DMatrix<f64>) -> f64 {
        let n = r.len();
        let chol = Cholesky::new(cov).unwrap();
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -0.5 * (n as f64 * (2.0 * PI).ln() + logdet + r.dot(&chol.solve(r)))
    }

    fn synthetic(means: &[f64], per_group: usize, seed: u64) -> (DVector<f64>, Vec<usize>) {
        let mut rng = RandomSource::new(seed, 0);
        let mut y = Vec::new();
        for &m in means {
            for _ in 0..per_group {
                y.push(m + rng.standard_normal());
            }
        }
        (DVector::from_vec(y), vec![per_group; means.len()])
    }

    fn setup(means: &[f64], per_group: usize, seed: u64) -> (DVector<f64>, NullParams, CipSpec) {
        let (y, sizes) = synthetic(means, per_group, seed);
        let theta0 = estimate_null_params(y.as_slice()).unwrap();
        let m = ConstraintModel::encompassing("Me", means.len());
        let spec = make_cip(&m.encompassing_design(), &sizes).unwrap();
        (y, theta0, spec)
    }

    #[test]
    fn integrand_equals_sigma_form() {
        // Eq. in σ: N(y | α0 1, σ² I + (σ² + σ0²) Z W⁻¹ Zᵀ) at σ² = σ0² η/(1−η)
        let (y, t0, spec) = setup(&[0.0, 0.4, 1.0], 4, 3);
        let z = spec.z();
        let r = y.map(|v| v - t0.alpha0);
        for eta in [0.05, 0.3, 0.5, 0.77, 0.99] {
            let s2 = t0.sigma0_sq() * eta / (1.0 - eta);
            let cov = DMatrix::identity(12, 12) * s2 + z * spec.winv() * z.transpose() * (s2 + t0.sigma0_sq());
            let want = dense_logpdf(&r, cov);
            let got = integrand_log(eta, &y, &t0, &spec).unwrap();
            assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "η={eta}");
        }
    }

    #[test]
    fn integrand_null_design_matches_dense() {
        let y = DVector::from_vec(vec![0.3, -0.8, 1.6]);
        let t0 = NullParams::new(0.2, 0.9).unwrap();
        let spec = make_cip(&ConstraintModel::null("M0", 1).encompassing_design(), &[3]).unwrap();
        let eta: f64 = 0.4;
        let b = t0.sigma0_sq() / (1.0 - eta);
        let cov = DMatrix::identity(3, 3) * (eta * b) + DMatrix::from_element(3, 3, 1.0) * spec.winv()[(0, 0)] * b;
        let want = dense_logpdf(&y.map(|v| v - 0.2), cov);
        assert!((integrand_log(eta, &y, &t0, &spec).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn integrand_shift_invariant() {
        let (y, t0, spec) = setup(&[0.0, 1.0], 5, 8);
        let t1 = NullParams::new(t0.alpha0 + 4.0, t0.sigma0).unwrap();
        let y1 = y.map(|v| v + 4.0);
        for eta in [0.1, 0.6] {
            let a = integrand_log(eta, &y, &t0, &spec).unwrap();
            let b = integrand_log(eta, &y1, &t1, &spec).unwrap();
            assert!((a - b).abs() < 1e-10);
        }
        assert!(matches!(
            integrand_log(1.0, &y, &t0, &spec),
            Err(EvidenceError::EtaOutOfRange(_))
        ));
    }

    #[test]
    fn quadrature_matches_brute_force_trapezoid() {
        // q = 1 design; the integrand vanishes fast at both ends, so a fine
        // trapezoid on (ε, 1−ε) in η is an independent oracle.
        let y = DVector::from_vec(vec![0.1, 1.3, -0.4, 0.8, 2.0, -1.1, 0.5, 0.9, 1.7, -0.2, 0.0, 0.6]);
        let t0 = estimate_null_params(y.as_slice()).unwrap();
        let spec = make_cip(&ConstraintModel::null("M0", 2).encompassing_design(), &[6, 6]).unwrap();
        let integrand = EtaIntegrand::new(&y, &t0, &spec).unwrap();
        let eps = 1e-9;
        let m = 1_000_000;
        let h = (1.0 - 2.0 * eps) / m as f64;
        let peak = integrand.log_posterior_kernel(0.5).unwrap();
        let mut s = 0.0;
        for i in 0..=m {
            let eta = eps + i as f64 * h;
            let w = if i == 0 || i == m { 0.5 } else { 1.0 };
            s += w * (integrand.log_posterior_kernel(eta).unwrap() - peak).exp();
        }
        let oracle = peak + (s * h).ln();
        let got = log_marginal_quadrature(&y, &t0, &spec, 64).unwrap();
        assert!((got.log_marginal - oracle).abs() < 1e-6, "{} vs {oracle}", got.log_marginal);
    }

    #[test]
    fn quadrature_equals_sigma_form_integral() {
        // Integrate the σ-form against the half-Cauchy with σ = σ0 tan φ.
        let (y, t0, spec) = setup(&[0.0, 0.7], 5, 21);
        let z = spec.z();
        let r = y.map(|v| v - t0.alpha0);
        let n = y.len();
        let f = |phi: f64| -> f64 {
            if phi <= 0.0 || phi >= FRAC_PI_2 {
                return 0.0;
            }
            let sigma = t0.sigma0 * phi.tan();
            let s2 = sigma * sigma;
            let cov = DMatrix::identity(n, n) * s2 + z * spec.winv() * z.transpose() * (s2 + t0.sigma0_sq());
            let jac = t0.sigma0 / phi.cos().powi(2);
            (dense_logpdf(&r, cov) + half_cauchy_logpdf(sigma, t0.sigma0)).exp() * jac
        };
        let m = 20_000;
        let h = FRAC_PI_2 / m as f64;
        let mut s = 0.0;
        for i in 1..m {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = (s * h / 3.0).ln();
        let got = log_marginal_quadrature(&y, &t0, &spec, 64).unwrap().log_marginal;
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn quadrature_self_converges() {
        for (k, means) in [[0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.3, 0.6, 0.9, 1.2]].iter().enumerate() {
            let (y, t0, spec) = setup(means, 50, 100 + k as u64);
            let res = log_marginal_quadrature(&y, &t0, &spec, 64).unwrap();
            assert!(res.doubling_delta.unwrap() < 1e-8, "{:?}", res);
            // closed-form Gauss-Chebyshev rule with many nodes as a reference
            let integrand = EtaIntegrand::new(&y, &t0, &spec).unwrap();
            let m = 4000;
            let reference = log_sum_exp((1..=m).map(|k| {
                let x = ((2 * k - 1) as f64 * PI / (2 * m) as f64).cos();
                integrand.log_likelihood(0.5 * (1.0 + x)).unwrap() - (m as f64).ln()
            }));
            assert!((res.log_marginal - reference).abs() < 1e-8);
        }
    }

    #[test]
    fn quadrature_scale_relation() {
        let (y, t0, spec) = setup(&[0.0, 0.5, 1.0], 10, 7);
        let c: f64 = 3.5;
        let base = log_marginal_quadrature(&y, &t0, &spec, 64).unwrap().log_marginal;
        let ty = y.map(|v| c * v);
        let tt = NullParams::new(c * t0.alpha0, c * t0.sigma0).unwrap();
        let scaled = log_marginal_quadrature(&ty, &tt, &spec, 64).unwrap().log_marginal;
        assert!((scaled - (base - 30.0 * c.ln())).abs() < 1e-9);
    }

    #[test]
    fn quadrature_rejects_few_nodes() {
        let (y, t0, spec) = setup(&[0.0, 0.5], 3, 7);
        assert_eq!(
            log_marginal_quadrature(&y, &t0, &spec, 4).unwrap_err(),
            EvidenceError::TooFewNodes(4)
        );
    }

    #[test]
    fn chib_agrees_with_quadrature() {
        for seed in 0..3u64 {
            let (y, t0, spec) = setup(&[0.0, 0.5, 1.0], 50, 500 + seed);
            let quad = log_marginal_quadrature(&y, &t0, &spec, 64).unwrap();
            let mut rng = RandomSource::new(seed, 1);
            let chib = log_marginal_chib(&y, &t0, &spec, 20_000, &mut rng).unwrap();
            let se = chib.std_error.unwrap();
            assert!(
                (quad.log_marginal - chib.log_marginal).abs() < 0.05f64.max(3.0 * se),
                "quad {} chib {} se {se}",
                quad.log_marginal,
                chib.log_marginal
            );
        }
    }

    #[test]
    fn chib_is_deterministic() {
        let (y, t0, spec) = setup(&[0.0, 0.5, 1.0], 20, 1);
        let a = log_marginal_chib(&y, &t0, &spec, 2000, &mut RandomSource::new(9, 9)).unwrap();
        let b = log_marginal_chib(&y, &t0, &spec, 2000, &mut RandomSource::new(9, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chib_standard_error_scales_with_root_n() {
        let (y, t0, spec) = setup(&[0.0, 0.5, 1.0], 50, 77);
        // average over a few seeds to damp noise in the SE estimate itself
        let mean_se = |iters: usize| {
            (0..4u64)
                .map(|s| {
                    log_marginal_chib(&y, &t0, &spec, iters, &mut RandomSource::new(s, 2))
                        .unwrap()
                        .std_error
                        .unwrap()
                })
                .sum::<f64>()
                / 4.0
        };
        let ratio = mean_se(4000) / mean_se(16_000);
        assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "ratio {ratio}");
    }

    #[test]
    fn chib_rejects_short_runs() {
        let (y, t0, spec) = setup(&[0.0, 0.5], 3, 7);
        assert!(matches!(
            log_marginal_chib(&y, &t0, &spec, 10, &mut RandomSource::new(0, 0)),
            Err(EvidenceError::TooFewIterations(10))
        ));
    }

    #[test]
    fn bf_favors_cip_when_data_far_from_null() {
        // θ0 held fixed while the data sit 5σ0 above α0.
        let spec = make_cip(&ConstraintModel::null("M0", 2).encompassing_design(), &[5, 5]).unwrap();
        let t0 = NullParams::new(0.0, 1.0).unwrap();
        let (noise, _) = synthetic(&[0.0, 0.0], 5, 4);
        let y = noise.map(|v| 5.0 + 0.3 * v);
        assert!(log_bf_encompassing_vs_null(&y, &t0, &spec).unwrap() > 0.0);
    }

    #[test]
    fn bf_shift_invariant() {
        let (y, t0, spec) = setup(&[0.0, 0.5, 1.0], 8, 12);
        let t1 = NullParams::new(t0.alpha0 - 2.5, t0.sigma0).unwrap();
        let a = log_bf_encompassing_vs_null(&y, &t0, &spec).unwrap();
        let b = log_bf_encompassing_vs_null(&y.map(|v| v - 2.5), &t1, &spec).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn mode_search_finds_interior_peak_and_flags_boundary() {
        let m = find_mode(|x| Ok(-(x - 0.3137).powi(2) * 50.0)).unwrap();
        assert!((m - 0.3137).abs() < 1e-6);
        assert_eq!(find_mode(|x| Ok(-x)), Err(EvidenceError::ModeAtBoundary));
    }
}
