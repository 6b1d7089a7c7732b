//! Fast invariant checks, runnable from the installed binary.

use std::io::Write;

use anyhow::Result;
use cip_anova::comparison::{compare, pairwise_log_bf, ComparisonSettings};
use cip_anova::constraint::{parse_model_spec, ConstraintModel};
use cip_anova::data::AnovaData;
use cip_anova::evidence::log_marginal_quadrature;
use cip_anova::gaussian::{half_cauchy_logpdf, inverted_beta_logpdf, RandomSource};
use cip_anova::posterior::{region_prob, Side};
use cip_anova::prior::{cip_sample, estimate_null_params, make_cip, NullParams};
use cip_anova::quadrature::GaussJacobi;
use cip_anova::simulation::{power_table, POWER_DELTAS, POWER_SIZES, Z_CRIT};

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn chebyshev() -> Result<Check> {
    let n = 64;
    let gj = GaussJacobi::new(n, -0.5, -0.5)?;
    let mut worst: f64 = 0.0;
    for (k, (x, w)) in gj.nodes().iter().zip(gj.weights()).enumerate() {
        let want = ((2 * (n - k) - 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        worst = worst.max((x - want).abs()).max((w - std::f64::consts::PI / n as f64).abs());
    }
    Ok(Check { name: "gauss-jacobi nodes match Chebyshev closed form", pass: worst < 1e-12, detail: format!("max error {worst:.2e}") })
}

fn inverted_beta() -> Result<Check> {
    let sigma0: f64 = 1.7;
    let mut worst: f64 = 0.0;
    for i in 1..=20 {
        let sigma = 0.05 * sigma0 * (i * i) as f64;
        let in_s2 = inverted_beta_logpdf(sigma * sigma, 0.5, 0.5, sigma0 * sigma0)? + (2.0 * sigma).ln();
        worst = worst.max((in_s2 - half_cauchy_logpdf(sigma, sigma0)).abs());
    }
    Ok(Check { name: "inverted beta in σ² equals half-Cauchy in σ", pass: worst < 1e-12, detail: format!("max error {worst:.2e}") })
}

fn cone_symmetry(seed: u64) -> Result<Check> {
    let t = 20_000;
    let spec = make_cip(&ConstraintModel::encompassing("Me", 5).encompassing_design(), &[10; 5])?;
    let draws = cip_sample(&NullParams::new(0.0, 1.0)?, &spec, t, &mut RandomSource::new(seed, 11))?;
    let m = parse_model_spec("M", "mu2 < mu1", 5)?;
    let p = region_prob(&draws, &m, Side::Prior)?.estimate;
    let tol = 4.0 * (0.25 / t as f64).sqrt();
    Ok(Check { name: "prior mass of a half-space is 1/2", pass: (p - 0.5).abs() < tol, detail: format!("{p:.4}") })
}

fn synthetic(seed: u64) -> Result<AnovaData> {
    let mut rng = RandomSource::new(seed, 12);
    let groups: Vec<Vec<f64>> = [0.0, 0.5, 1.0]
        .iter()
        .map(|m| (0..50).map(|_| m + rng.standard_normal()).collect())
        .collect();
    Ok(AnovaData::from_groups(&groups)?)
}

fn quadrature(seed: u64) -> Result<Check> {
    let data = synthetic(seed)?;
    let t0 = estimate_null_params(data.responses())?;
    let spec = make_cip(&ConstraintModel::encompassing("Me", 3).encompassing_design(), data.group_sizes())?;
    let res = log_marginal_quadrature(&data.y(), &t0, &spec, 64)?;
    let d = res.doubling_delta.unwrap_or(f64::INFINITY);
    Ok(Check { name: "quadrature node doubling", pass: d < 1e-8, detail: format!("delta {d:.2e}") })
}

fn coherence(seed: u64) -> Result<Check> {
    let data = synthetic(seed)?;
    let models = vec![
        ConstraintModel::null("M0", 3),
        parse_model_spec("M1", "mu1 < mu2 < mu3", 3)?,
        parse_model_spec("M2", "mu1 < {mu2 = mu3}", 3)?,
        ConstraintModel::encompassing("Me", 3),
    ];
    let settings = ComparisonSettings { prior_draws: 20_000, mcmc_iters: 8_000, burnin: 1_000, ..Default::default() };
    let report = compare(&data, &models, None, &settings, &RandomSource::new(seed, 13))?;
    let sum: f64 = report.posterior_probs.iter().sum();
    let mut worst = (sum - 1.0).abs();
    for l in &models {
        for k in &models {
            for j in &models {
                let lk = pairwise_log_bf(&report, l.name(), k.name())?;
                let kj = pairwise_log_bf(&report, k.name(), j.name())?;
                let lj = pairwise_log_bf(&report, l.name(), j.name())?;
                worst = worst.max((lk + kj - lj).abs());
            }
        }
    }
    Ok(Check { name: "posterior probabilities and pairwise Bayes factors cohere", pass: worst < 1e-12, detail: format!("max error {worst:.2e}") })
}

fn power() -> Result<Check> {
    let want = [0.10, 0.17, 0.19, 0.32, 0.30, 0.52];
    let rows = power_table(&POWER_DELTAS, 1.0, &POWER_SIZES, Z_CRIT);
    let worst = rows.iter().zip(want).map(|(r, w)| (r.power - w).abs()).fold(0.0, f64::max);
    Ok(Check { name: "power table within 0.01 of reference", pass: worst <= 0.01, detail: format!("max deviation {worst:.4}") })
}

/// Print one line per check; true when all pass.
pub fn run(out: &mut dyn Write, seed: u64) -> Result<bool> {
    let checks = [chebyshev()?, inverted_beta()?, cone_symmetry(seed)?, quadrature(seed)?, coherence(seed)?, power()?];
    let mut ok = true;
    for c in &checks {
        writeln!(out, "{} {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        ok &= c.pass;
    }
    Ok(ok)
}
