//! Conditional intrinsic prior of an encompassing ANOVA model given the
//! null-model parameters θ0 = (α0, σ0):
//!
//! ```text
//! γ | σ², θ0 ~ N_q(α0·e, (σ² + σ0²) W⁻¹),   W⁻¹ = n/(q+1) · (ZᵀZ)⁻¹
//! σ  | θ0    ~ half-Cauchy(σ0)   ⇔   η = σ²/(σ²+σ0²) ~ Beta(1/2, 1/2)
//! ```
//!
//! with `γ = (α, δ)` and `e = (1, 0, …, 0)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraint::{build_design, ConstraintError, EncompassingDesign};
use crate::gaussian::{
    cholesky, half_cauchy_logpdf, mvn_logpdf, mvn_sample_chol, sample_sigma2_via_eta,
    LowRankStructure, NumericError, RandomSource,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PriorError {
    #[error("responses have zero spread; the null-model scale σ0 would be 0")]
    DegenerateNull,
    #[error("need at least 2 responses, got {0}")]
    TooFewResponses(usize),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("first design column is not the intercept")]
    MissingIntercept,
    #[error("σ must be positive and finite, got {0}")]
    BadSigma(f64),
    #[error("need at least one prior draw")]
    NoDraws,
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Plug-in null-model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullParams {
    pub alpha0: f64,
    pub sigma0: f64,
}

impl NullParams {
    pub fn new(alpha0: f64, sigma0: f64) -> Result<Self, PriorError> {
        if !(sigma0 > 0.0) || !sigma0.is_finite() || !alpha0.is_finite() {
            return Err(PriorError::DegenerateNull);
        }
        Ok(Self { alpha0, sigma0 })
    }

    pub fn sigma0_sq(&self) -> f64 {
        self.sigma0 * self.sigma0
    }
}

/// Maximum-likelihood θ0 under the null model: grand mean and the
/// root mean squared deviation (divisor n).
pub fn estimate_null_params(y: &[f64]) -> Result<NullParams, PriorError> {
    let n = y.len();
    if n < 2 {
        return Err(PriorError::TooFewResponses(n));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sigma0 = (ss / n as f64).sqrt();
    if !(sigma0 > 0.0) {
        return Err(PriorError::DegenerateNull);
    }
    NullParams::new(mean, sigma0)
}

/// The prior's fixed ingredients for one encompassing design and one set of
/// group sizes.
#[derive(Debug, Clone)]
pub struct CipSpec {
    design: EncompassingDesign,
    group_sizes: Vec<usize>,
    structure: LowRankStructure,
    /// Lower Cholesky factor of W⁻¹.
    winv_chol: DMatrix<f64>,
}

impl CipSpec {
    pub fn design(&self) -> &EncompassingDesign {
        &self.design
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn structure(&self) -> &LowRankStructure {
        &self.structure
    }

    pub fn z(&self) -> &DMatrix<f64> {
        self.structure.z()
    }

    pub fn winv(&self) -> &DMatrix<f64> {
        self.structure.winv()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        self.structure.w()
    }

    pub fn n(&self) -> usize {
        self.structure.n()
    }

    pub fn q(&self) -> usize {
        self.structure.q()
    }

    /// The unit vector (1, 0, …, 0).
    pub fn e(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.q());
        e[0] = 1.0;
        e
    }

    /// Prior mean α0·e of γ.
    pub fn prior_mean(&self, theta0: &NullParams) -> DVector<f64> {
        self.e() * theta0.alpha0
    }
}

pub fn make_cip(design: &EncompassingDesign, group_sizes: &[usize]) -> Result<CipSpec, PriorError> {
    let z = build_design(design, group_sizes)?;
    let (n, q) = z.shape();
    if z.column(0).iter().any(|&v| v != 1.0) {
        return Err(PriorError::MissingIntercept);
    }
    let ztz = z.tr_mul(&z);
    let ztz_inv = cholesky(&ztz, "ZᵀZ")
        .map_err(|_| PriorError::RankDeficient)?
        .inverse();
    let winv = ztz_inv * (n as f64 / (q as f64 + 1.0));
    let winv = (&winv + winv.transpose()) * 0.5;
    let winv_chol = cholesky(&winv, "W⁻¹")?.l();
    let structure = LowRankStructure::new(z, winv)?;
    Ok(CipSpec {
        design: design.clone(),
        group_sizes: group_sizes.to_vec(),
        structure,
        winv_chol,
    })
}

/// Log joint prior density of (γ, σ): half-Cauchy(σ | σ0) ×
/// N_q(γ | α0·e, (σ² + σ0²) W⁻¹).
pub fn cip_logpdf(
    gamma: &DVector<f64>,
    sigma: f64,
    theta0: &NullParams,
    spec: &CipSpec,
) -> Result<f64, PriorError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(PriorError::BadSigma(sigma));
    }
    let cov = spec.winv() * (sigma * sigma + theta0.sigma0_sq());
    let normal = mvn_logpdf(gamma, &spec.prior_mean(theta0), &cov)?;
    Ok(half_cauchy_logpdf(sigma, theta0.sigma0) + normal)
}

/// Independent draws from the conditional intrinsic prior, stored row-major.
#[derive(Debug, Clone)]
pub struct PriorDraws {
    q: usize,
    gamma: Vec<f64>,
    pub eta: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl PriorDraws {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn gamma(&self, t: usize) -> &[f64] {
        &self.gamma[t * self.q..(t + 1) * self.q]
    }

    pub fn delta(&self, t: usize) -> &[f64] {
        &self.gamma(t)[1..]
    }

    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.q, &self.gamma)
    }
}

/// Draw η ~ Beta(1/2,1/2), set σ² = σ0²η/(1−η), then γ ~ N_q(α0·e, (σ²+σ0²)W⁻¹).
pub fn cip_sample(
    theta0: &NullParams,
    spec: &CipSpec,
    draws: usize,
    rng: &mut RandomSource,
) -> Result<PriorDraws, PriorError> {
    if draws == 0 {
        return Err(PriorError::NoDraws);
    }
    let q = spec.q();
    let s0 = theta0.sigma0_sq();
    let mean = spec.prior_mean(theta0);
    let mut out = PriorDraws {
        q,
        gamma: Vec::with_capacity(draws * q),
        eta: Vec::with_capacity(draws),
        sigma2: Vec::with_capacity(draws),
    };
    for _ in 0..draws {
        let (eta, sigma2) = sample_sigma2_via_eta(s0, rng)?;
        let g = mvn_sample_chol(&mean, &spec.winv_chol, (sigma2 + s0).sqrt(), rng);
        out.gamma.extend(g.iter());
        out.eta.push(eta);
        out.sigma2.push(sigma2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::ConstraintModel;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn null_params_small_example() {
        let t = estimate_null_params(&[1.0, 3.0]).unwrap();
        assert_relative_eq!(t.alpha0, 2.0);
        assert_relative_eq!(t.sigma0, 1.0);
    }

    #[test]
    fn null_params_errors() {
        assert_eq!(estimate_null_params(&[2.0; 5]), Err(PriorError::DegenerateNull));
        assert_eq!(estimate_null_params(&[2.0]), Err(PriorError::TooFewResponses(1)));
    }

    #[test]
    fn null_params_location_equivariant() {
        let y = [0.3, -1.0, 2.2, 0.9, 1.4];
        let a = estimate_null_params(&y).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + 10.0).collect();
        let b = estimate_null_params(&shifted).unwrap();
        assert_relative_eq!(b.alpha0, a.alpha0 + 10.0, epsilon = 1e-12);
        assert_relative_eq!(b.sigma0, a.sigma0, epsilon = 1e-12);
    }

    #[test]
    fn cip_two_by_two() {
        let m = ConstraintModel::encompassing("Me", 2);
        let spec = make_cip(&m.encompassing_design(), &[1, 1]).unwrap();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]) * (2.0 / 3.0);
        assert!((spec.winv() - want).abs().max() < 1e-14);
        assert_eq!(spec.z() * spec.e(), DVector::from_element(2, 1.0));
    }

    #[test]
    fn cip_null_design() {
        let m = ConstraintModel::null("M0", 3);
        let spec = make_cip(&m.encompassing_design(), &[4, 2, 3]).unwrap();
        assert_eq!(spec.q(), 1);
        assert_relative_eq!(spec.winv()[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn cip_balanced_relabeling_symmetry() {
        let m = ConstraintModel::encompassing("Me", 5);
        let spec = make_cip(&m.encompassing_design(), &[7; 5]).unwrap();
        let w = spec.winv();
        // swapping two non-baseline groups permutes rows and columns of W⁻¹
        let perm = [0usize, 3, 1, 4, 2];
        let permuted = DMatrix::from_fn(5, 5, |i, j| w[(perm[i], perm[j])]);
        assert!((&permuted - w).abs().max() < 1e-13);
    }

    #[test]
    fn cip_logpdf_at_prior_center() {
        let m = ConstraintModel::encompassing("Me", 3);
        let spec = make_cip(&m.encompassing_design(), &[3, 4, 5]).unwrap();
        let t0 = NullParams::new(1.5, 0.8).unwrap();
        let gamma = spec.prior_mean(&t0);
        let got = cip_logpdf(&gamma, t0.sigma0, &t0, &spec).unwrap();
        let cov = spec.winv() * (2.0 * t0.sigma0_sq());
        let want = -(PI * t0.sigma0).ln() + mvn_logpdf(&gamma, &gamma, &cov).unwrap();
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn cip_logpdf_location_structure() {
        let m = ConstraintModel::encompassing("Me", 3);
        let spec = make_cip(&m.encompassing_design(), &[3, 4, 5]).unwrap();
        let t0 = NullParams::new(1.5, 0.8).unwrap();
        let gamma = DVector::from_vec(vec![0.2, -0.4, 1.1]);
        let c = 3.7;
        let t1 = NullParams::new(t0.alpha0 + c, t0.sigma0).unwrap();
        let a = cip_logpdf(&gamma, 1.3, &t0, &spec).unwrap();
        let b = cip_logpdf(&(&gamma + spec.e() * c), 1.3, &t1, &spec).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-12);
        assert!(cip_logpdf(&gamma, 0.0, &t0, &spec).is_err());
    }

    #[test]
    fn cip_logpdf_normalizes_for_q1() {
        // Oracle: σ = σ0·tan φ turns the half-Cauchy into the uniform 2/π on
        // (0, π/2); the inner γ integral is a Simpson rule over ±12 sd.
        let m = ConstraintModel::null("M0", 2);
        let spec = make_cip(&m.encompassing_design(), &[3, 3]).unwrap();
        let t0 = NullParams::new(0.4, 1.3).unwrap();
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, m: usize| {
            let h = (b - a) / m as f64;
            let mut s = f(a) + f(b);
            for i in 1..m {
                s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let outer = |phi: f64| {
            // at both endpoints the half-Cauchy density times dσ/dφ is 2/π
            // and the inner Gaussian integral is 1
            if phi <= 0.0 || phi >= FRAC_PI_2 {
                return std::f64::consts::FRAC_2_PI;
            }
            let sigma = t0.sigma0 * phi.tan();
            let dsigma = t0.sigma0 / phi.cos().powi(2);
            let sd = ((sigma * sigma + t0.sigma0_sq()) * spec.winv()[(0, 0)]).sqrt();
            let inner = simpson(
                &|g: f64| {
                    cip_logpdf(&DVector::from_element(1, g), sigma, &t0, &spec)
                        .unwrap()
                        .exp()
                },
                t0.alpha0 - 12.0 * sd,
                t0.alpha0 + 12.0 * sd,
                400,
            );
            inner * dsigma
        };
        let total = simpson(&outer, 0.0, FRAC_PI_2, 2000);
        assert!((total - 1.0).abs() < 1e-6, "total {total}");
    }

    #[test]
    fn cip_sample_moments_and_symmetry() {
        let m = ConstraintModel::encompassing("Me", 4);
        let spec = make_cip(&m.encompassing_design(), &[10, 10, 10, 10]).unwrap();
        let t0 = NullParams::new(2.0, 1.5).unwrap();
        let mut rng = RandomSource::new(17, 0);
        let t = 100_000;
        let draws = cip_sample(&t0, &spec, t, &mut rng).unwrap();
        assert_eq!(draws.len(), t);
        for i in 0..t {
            let s2 = t0.sigma0_sq() * draws.eta[i] / (1.0 - draws.eta[i]);
            assert!((draws.sigma2[i] - s2).abs() <= 1e-12 * s2.max(1.0));
        }
        // The γ marginal is heavy tailed (Cauchy-scale mixture), so use
        // medians for location and sign counts for symmetry.
        let sign_tol = 4.0 * (0.25 / t as f64).sqrt();
        for j in 0..4 {
            let mut col: Vec<f64> = (0..t).map(|i| draws.gamma(i)[j]).collect();
            col.sort_by(f64::total_cmp);
            let center = if j == 0 { t0.alpha0 } else { 0.0 };
            let below = col.partition_point(|&v| v < center) as f64 / t as f64;
            assert!((below - 0.5).abs() < sign_tol, "coord {j}: {below}");
        }
        let below = draws.sigma2.iter().filter(|&&s| s < t0.sigma0_sq()).count() as f64 / t as f64;
        assert!((below - 0.5).abs() < sign_tol);
    }

    #[test]
    fn cip_sample_conditional_mean_clt() {
        // Conditional on σ², γ is Gaussian; standardizing by the known
        // conditional scale gives an iid N(0, W⁻¹) sample for the CLT check.
        let m = ConstraintModel::encompassing("Me", 3);
        let spec = make_cip(&m.encompassing_design(), &[5, 6, 7]).unwrap();
        let t0 = NullParams::new(-1.0, 0.5).unwrap();
        let mut rng = RandomSource::new(3, 9);
        let t = 100_000;
        let draws = cip_sample(&t0, &spec, t, &mut rng).unwrap();
        let mean = spec.prior_mean(&t0);
        let mut acc = DVector::zeros(3);
        for i in 0..t {
            let scale = (draws.sigma2[i] + t0.sigma0_sq()).sqrt();
            let g = DVector::from_column_slice(draws.gamma(i));
            acc += (g - &mean) / scale;
        }
        acc /= t as f64;
        for j in 0..3 {
            let se = (spec.winv()[(j, j)] / t as f64).sqrt();
            assert!(acc[j].abs() < 4.0 * se, "coord {j}");
        }
    }

    #[test]
    fn cip_sample_rejects_zero_draws() {
        let m = ConstraintModel::null("M0", 2);
        let spec = make_cip(&m.encompassing_design(), &[2, 2]).unwrap();
        let t0 = NullParams::new(0.0, 1.0).unwrap();
        let mut rng = RandomSource::new(0, 0);
        assert_eq!(cip_sample(&t0, &spec, 0, &mut rng).unwrap_err(), PriorError::NoDraws);
    }
}
