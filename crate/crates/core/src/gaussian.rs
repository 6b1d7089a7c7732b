//! Numeric kernels: SPD helpers, a low-rank-plus-identity Gaussian density,
//! the Beta(1/2, 1/2) / inverted-beta laws for the error variance, and
//! multivariate normal sampling with a seeded random source.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use statrs::function::beta::ln_beta;
use thiserror::Error;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("matrix is not symmetric positive definite ({0})")]
    NotPositiveDefinite(&'static str),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
}

/// Seeded ChaCha20 stream. `seed` selects the key, `stream` the ChaCha
/// stream id, so workers holding different stream ids never overlap.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha20Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A child source whose key mixes this source's (seed, stream) with
    /// `label`. Pure in its inputs; does not advance `self`.
    pub fn derive(&self, label: u64) -> RandomSource {
        let key = splitmix64(splitmix64(self.seed ^ 0x5bd1_e995) ^ self.stream.rotate_left(17));
        RandomSource::new(splitmix64(key ^ label), label)
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform_open(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>, NumericError> {
    Cholesky::new(m.clone()).ok_or(NumericError::NotPositiveDefinite(what))
}

pub fn chol_logdet(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>, NumericError> {
    let inv = cholesky(m, what)?.inverse();
    // symmetrize away roundoff
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Residual sufficient statistics `(rᵀr, Zᵀr)` for a fixed design.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualStats {
    pub n: usize,
    pub rtr: f64,
    pub ztr: DVector<f64>,
}

impl ResidualStats {
    pub fn new(z: &DMatrix<f64>, r: &DVector<f64>) -> Self {
        Self {
            n: r.len(),
            rtr: r.dot(r),
            ztr: z.tr_mul(r),
        }
    }
}

/// Fixed part of `Σ = a·I_n + b·Z W⁻¹ Zᵀ`: the design and the q×q matrices
/// derived from it, computed once per dataset.
#[derive(Debug, Clone)]
pub struct LowRankStructure {
    z: DMatrix<f64>,
    winv: DMatrix<f64>,
    w: DMatrix<f64>,
    ztz: DMatrix<f64>,
    logdet_winv: f64,
}

impl LowRankStructure {
    pub fn new(z: DMatrix<f64>, winv: DMatrix<f64>) -> Result<Self, NumericError> {
        if winv.nrows() != z.ncols() || winv.ncols() != z.ncols() {
            return Err(NumericError::Dimension(format!(
                "W⁻¹ is {}x{}, design has {} columns",
                winv.nrows(),
                winv.ncols(),
                z.ncols()
            )));
        }
        let chol = cholesky(&winv, "W⁻¹")?;
        let logdet_winv = chol_logdet(&chol);
        let w = chol.inverse();
        let w = (&w + w.transpose()) * 0.5;
        let ztz = z.tr_mul(&z);
        Ok(Self {
            z,
            winv,
            w,
            ztz,
            logdet_winv,
        })
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn winv(&self) -> &DMatrix<f64> {
        &self.winv
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn ztz(&self) -> &DMatrix<f64> {
        &self.ztz
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn residual_stats(&self, r: &DVector<f64>) -> ResidualStats {
        ResidualStats::new(&self.z, r)
    }

    /// Log N_n(r; 0, a·I + b·Z W⁻¹ Zᵀ) in O(q³) from residual statistics.
    ///
    /// With `K = W + (b/a) ZᵀZ`:
    /// `log det Σ = n log a + log det W⁻¹ + log det K` and
    /// `rᵀΣ⁻¹r = (rᵀr − (b/a) (Zᵀr)ᵀ K⁻¹ Zᵀr) / a`.
    pub fn logpdf_stats(&self, a: f64, b: f64, stats: &ResidualStats) -> Result<f64, NumericError> {
        if !(a > 0.0) || !(b >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(NumericError::Domain(format!("variance scales a={a}, b={b}")));
        }
        let s = b / a;
        let k = &self.w + &self.ztz * s;
        let chol = cholesky(&k, "W + (b/a)ZᵀZ")?;
        let logdet = stats.n as f64 * a.ln() + self.logdet_winv + chol_logdet(&chol);
        let solved = chol.solve(&stats.ztr);
        let quad = (stats.rtr - s * stats.ztr.dot(&solved)) / a;
        Ok(-0.5 * (stats.n as f64 * LN_2PI + logdet + quad))
    }

    pub fn gaussian(&self, a: f64, b: f64) -> LowRankGaussian<'_> {
        LowRankGaussian {
            a,
            b,
            structure: self,
        }
    }
}

/// Zero-mean Gaussian with covariance `a·I_n + b·Z W⁻¹ Zᵀ`; never forms an
/// n×n matrix.
#[derive(Debug, Clone, Copy)]
pub struct LowRankGaussian<'a> {
    pub a: f64,
    pub b: f64,
    pub structure: &'a LowRankStructure,
}

impl LowRankGaussian<'_> {
    pub fn logpdf(&self, r: &DVector<f64>) -> Result<f64, NumericError> {
        lowrank_logpdf(r, self)
    }
}

pub fn lowrank_logpdf(r: &DVector<f64>, g: &LowRankGaussian<'_>) -> Result<f64, NumericError> {
    if r.len() != g.structure.n() {
        return Err(NumericError::Dimension(format!(
            "residual has length {}, design has {} rows",
            r.len(),
            g.structure.n()
        )));
    }
    let stats = g.structure.residual_stats(r);
    g.structure.logpdf_stats(g.a, g.b, &stats)
}

pub fn inverted_beta_logpdf(v: f64, a: f64, b: f64, c: f64) -> Result<f64, NumericError> {
    if !(v > 0.0 && a > 0.0 && b > 0.0 && c > 0.0) || !v.is_finite() {
        return Err(NumericError::Domain(format!(
            "InvBeta(v={v} | a={a}, b={b}, c={c})"
        )));
    }
    Ok(b * c.ln() - ln_beta(a, b) + (a - 1.0) * v.ln() - (a + b) * (v + c).ln())
}

/// Log density of Beta(1/2, 1/2) (the arcsine law).
pub fn arcsine_logpdf(eta: f64) -> f64 {
    -PI.ln() - 0.5 * eta.ln() - 0.5 * (1.0 - eta).ln()
}

pub fn arcsine_cdf(eta: f64) -> f64 {
    if eta <= 0.0 {
        0.0
    } else if eta >= 1.0 {
        1.0
    } else {
        2.0 / PI * eta.sqrt().asin()
    }
}

/// Map η ∈ (0,1) to σ² = c·η/(1−η).
#[inline]
pub fn eta_to_sigma2(eta: f64, c: f64) -> f64 {
    c * eta / (1.0 - eta)
}

#[inline]
pub fn sigma2_to_eta(sigma2: f64, c: f64) -> f64 {
    sigma2 / (sigma2 + c)
}

/// One draw of η ~ Beta(1/2, 1/2) by the arcsine map `sin²(πU/2)`, and the
/// implied σ² ~ InvBeta(1/2, 1/2, c). Endpoint draws are resampled.
pub fn sample_sigma2_via_eta(c: f64, rng: &mut RandomSource) -> Result<(f64, f64), NumericError> {
    if !(c > 0.0) {
        return Err(NumericError::Domain(format!("scale c={c}")));
    }
    loop {
        let u = rng.uniform_open();
        let eta = (FRAC_PI_2 * u).sin().powi(2);
        if eta > 0.0 && eta < 1.0 {
            return Ok((eta, eta_to_sigma2(eta, c)));
        }
    }
}

pub fn mvn_logpdf(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> Result<f64, NumericError> {
    let q = x.len();
    if mean.len() != q || cov.nrows() != q || cov.ncols() != q {
        return Err(NumericError::Dimension(format!(
            "x has {q} entries, mean {}, covariance {}x{}",
            mean.len(),
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = cholesky(cov, "covariance")?;
    let dev = x - mean;
    let white = chol
        .l_dirty()
        .solve_lower_triangular(&dev)
        .ok_or(NumericError::NotPositiveDefinite("covariance"))?;
    Ok(-0.5 * (q as f64 * LN_2PI + chol_logdet(&chol) + white.norm_squared()))
}

pub fn mvn_sample(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    rng: &mut RandomSource,
) -> Result<DVector<f64>, NumericError> {
    let chol = cholesky(cov, "covariance")?;
    Ok(mvn_sample_chol(mean, chol.l_dirty(), 1.0, rng))
}

/// `mean + scale · L z` with `L` lower triangular (upper part ignored).
pub fn mvn_sample_chol(
    mean: &DVector<f64>,
    l: &DMatrix<f64>,
    scale: f64,
    rng: &mut RandomSource,
) -> DVector<f64> {
    let q = mean.len();
    let z: Vec<f64> = (0..q).map(|_| rng.standard_normal()).collect();
    let mut out = mean.clone();
    for i in 0..q {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[(i, j)] * z[j];
        }
        out[i] += scale * acc;
    }
    out
}

/// Standard normal upper tail P{Z > x}.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// log(2/(π σ0 (1 + σ²/σ0²))), the half-Cauchy density of σ with scale σ0.
pub fn half_cauchy_logpdf(sigma: f64, sigma0: f64) -> f64 {
    LN_2 - PI.ln() - sigma0.ln() - (1.0 + (sigma / sigma0).powi(2)).ln()
}
