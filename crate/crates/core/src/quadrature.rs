//! Gauss-Jacobi quadrature for weights (1 − x)^α (1 + x)^β on [−1, 1].
//!
//! Nodes and weights come from the Golub-Welsch eigenproblem of the Jacobi
//! matrix of the orthonormal Jacobi polynomials.

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("quadrature needs at least 1 node")]
    NoNodes,
    #[error("Jacobi exponents must exceed -1 (alpha={alpha}, beta={beta})")]
    Exponent { alpha: f64, beta: f64 },
    #[error("split point {0} is outside (0, 1)")]
    SplitPoint(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl GaussJacobi {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self, QuadratureError> {
        if n == 0 {
            return Err(QuadratureError::NoNodes);
        }
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(QuadratureError::Exponent { alpha, beta });
        }
        let ab = alpha + beta;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let kf = k as f64;
            jac[(k, k)] = if k == 0 {
                (beta - alpha) / (ab + 2.0)
            } else {
                (beta * beta - alpha * alpha) / ((2.0 * kf + ab) * (2.0 * kf + ab + 2.0))
            };
            if k + 1 < n {
                let m = kf + 1.0;
                let off = if k == 0 {
                    // n(n+α+β)/(2n+α+β−1) = 1 at n = 1; written out to avoid
                    // 0/0 when α + β = −1.
                    2.0 / (ab + 2.0) * ((1.0 + alpha) * (1.0 + beta) / (ab + 3.0)).sqrt()
                } else {
                    let s = 2.0 * m + ab;
                    2.0 / s
                        * (m * (m + alpha) * (m + beta) * (m + ab) / ((s + 1.0) * (s - 1.0))).sqrt()
                };
                jac[(k, k + 1)] = off;
                jac[(k + 1, k)] = off;
            }
        }
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
            + ln_gamma(beta + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let eig = jac.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
            alpha,
            beta,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫_{−1}^{1} (1−x)^α (1+x)^β f(x) dx.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Rule for ∫_0^1 f(η) Beta(η | 1/2, 1/2) dη: Gauss-Jacobi with
/// α = β = −1/2 mapped to (0, 1), weights normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcsineRule {
    etas: Vec<f64>,
    log_weights: Vec<f64>,
}

impl ArcsineRule {
    pub fn new(n: usize) -> Result<Self, QuadratureError> {
        let gj = GaussJacobi::new(n, -0.5, -0.5)?;
        let total: f64 = gj.weights().iter().sum();
        Ok(Self {
            etas: gj.nodes().iter().map(|x| 0.5 * (1.0 + x)).collect(),
            log_weights: gj.weights().iter().map(|w| (w / total).ln()).collect(),
        })
    }

    /// Two-panel rule split at `c` in (0, 1), `n` nodes per panel. On
    /// (0, c) the Jacobi weight absorbs η^{-1/2}, on (c, 1) it absorbs
    /// (1−η)^{-1/2}; the remaining factor is smooth on each panel. Placing
    /// `c` at the integrand's peak clusters nodes around it.
    pub fn split(n: usize, c: f64) -> Result<Self, QuadratureError> {
        if !(c > 0.0 && c < 1.0) {
            return Err(QuadratureError::SplitPoint(c));
        }
        let ln_pi = std::f64::consts::PI.ln();
        let mut etas = Vec::with_capacity(2 * n);
        let mut log_weights = Vec::with_capacity(2 * n);
        let left = GaussJacobi::new(n, 0.0, -0.5)?;
        let half = 0.5 * (0.5 * c).ln();
        for (&x, &w) in left.nodes().iter().zip(left.weights()) {
            let eta = 0.5 * c * (1.0 + x);
            etas.push(eta);
            log_weights.push(w.ln() + half - 0.5 * (1.0 - eta).ln() - ln_pi);
        }
        let right = GaussJacobi::new(n, -0.5, 0.0)?;
        let half = 0.5 * (0.5 * (1.0 - c)).ln();
        for (&x, &w) in right.nodes().iter().zip(right.weights()) {
            let eta = c + 0.5 * (1.0 - c) * (1.0 + x);
            etas.push(eta);
            log_weights.push(w.ln() + half - 0.5 * eta.ln() - ln_pi);
        }
        Ok(Self { etas, log_weights })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }
}

pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use statrs::function::beta::beta;

    #[test]
    fn chebyshev_case_matches_closed_form() {
        for n in [1usize, 2, 7, 64, 128] {
            let gj = GaussJacobi::new(n, -0.5, -0.5).unwrap();
            let mut cheb: Vec<f64> = (1..=n)
                .map(|k| ((2 * k - 1) as f64 * PI / (2 * n) as f64).cos())
                .collect();
            cheb.sort_by(f64::total_cmp);
            for (a, b) in gj.nodes().iter().zip(&cheb) {
                assert!((a - b).abs() < 1e-13, "n={n}: {a} vs {b}");
            }
            for w in gj.weights() {
                assert!((w - PI / n as f64).abs() < 1e-12 * PI, "n={n}: weight {w}");
            }
        }
    }

    #[test]
    fn exact_for_polynomials() {
        // ∫ (1−x)^α (1+x)^β (1+x)^k dx = 2^{α+β+k+1} B(α+1, β+k+1)
        let (alpha, beta_e) = (0.3, -0.6);
        let gj = GaussJacobi::new(6, alpha, beta_e).unwrap();
        for k in 0..12 {
            let got = gj.integrate(|x| (1.0 + x).powi(k));
            let kf = k as f64;
            let want = 2f64.powf(alpha + beta_e + kf + 1.0) * beta(alpha + 1.0, beta_e + kf + 1.0);
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0), "k={k}");
        }
    }

    #[test]
    fn legendre_weights_sum_to_two() {
        let gj = GaussJacobi::new(20, 0.0, 0.0).unwrap();
        assert!((gj.weights().iter().sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn arcsine_rule_moments() {
        // E[η] = 1/2, E[η²] = 3/8 under Beta(1/2, 1/2)
        let rule = ArcsineRule::new(16).unwrap();
        let m1: f64 = rule.etas().iter().zip(rule.log_weights()).map(|(e, w)| e * w.exp()).sum();
        let m2: f64 = rule.etas().iter().zip(rule.log_weights()).map(|(e, w)| e * e * w.exp()).sum();
        assert!((m1 - 0.5).abs() < 1e-14);
        assert!((m2 - 0.375).abs() < 1e-14);
        assert!(rule.etas().iter().all(|&e| e > 0.0 && e < 1.0));
    }

    #[test]
    fn split_rule_moments() {
        for (c, n) in [(0.3, 24), (0.5, 24), (0.8, 24), (0.02, 200), (0.97, 200)] {
            let rule = ArcsineRule::split(n, c).unwrap();
            let m = |k: i32| -> f64 {
                rule.etas().iter().zip(rule.log_weights()).map(|(e, w)| e.powi(k) * w.exp()).sum()
            };
            assert!((m(0) - 1.0).abs() < 1e-13, "c={c}");
            assert!((m(1) - 0.5).abs() < 1e-13, "c={c}");
            assert!((m(2) - 0.375).abs() < 1e-13, "c={c}");
            assert!(rule.etas().iter().all(|&e| e > 0.0 && e < 1.0));
        }
        // P(η < 1/4) = (2/π) asin(1/2) = 1/3, captured exactly by a split there
        let rule = ArcsineRule::split(8, 0.25).unwrap();
        let mass: f64 = rule.etas().iter().zip(rule.log_weights()).filter(|(e, _)| **e < 0.25).map(|(_, w)| w.exp()).sum();
        assert!((mass - 1.0 / 3.0).abs() < 1e-13);
        assert!(ArcsineRule::split(8, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(GaussJacobi::new(0, 0.0, 0.0), Err(QuadratureError::NoNodes));
        assert!(GaussJacobi::new(4, -1.0, 0.0).is_err());
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_sum_exp([0.0, f64::NEG_INFINITY]) - 0.0).abs() < 1e-15);
    }
}
