//! Plain-text tables.

use std::io::{self, Write};

use cip_anova::comparison::ComparisonReport;
use cip_anova::constraint::ConstraintModel;
use cip_anova::simulation::{PowerRow, SummaryTable};

fn fmt_bf(log_bf: f64) -> String {
    if log_bf == f64::NEG_INFINITY {
        return "0".to_string();
    }
    let bf = log_bf.exp();
    if bf.is_finite() && (1e-3..1e6).contains(&bf) {
        format!("{bf:.2}")
    } else {
        format!("exp({log_bf:.2})")
    }
}

pub fn write_comparison(
    out: &mut dyn Write,
    report: &ComparisonReport,
    models: &[ConstraintModel],
    n: usize,
    seed: u64,
) -> io::Result<()> {
    writeln!(
        out,
        "n = {n}, alpha0 = {:.4}, sigma0 = {:.4}, seed = {seed}",
        report.theta0.alpha0, report.theta0.sigma0
    )?;
    let spec_width = models.iter().map(|m| m.to_string().len()).max().unwrap_or(5).max(5);
    let name_width = models.iter().map(|m| m.name().len()).max().unwrap_or(5).max(5);
    let bf_head = format!("BF vs {}", report.display_reference);
    writeln!(
        out,
        "{:<nw$}  {:<sw$}  {:>12}  {:>14}  {:>8}  {:>8}",
        "model",
        "constraints",
        "log BF_k0",
        bf_head,
        "prior",
        "PMP",
        nw = name_width,
        sw = spec_width
    )?;
    for (i, m) in models.iter().enumerate() {
        let b = &report.breakdowns[i];
        writeln!(
            out,
            "{:<nw$}  {:<sw$}  {:>12.4}  {:>14}  {:>8.4}  {:>8.4}",
            m.name(),
            m.to_string(),
            b.log_bf_c_vs_0,
            fmt_bf(report.display_log_bf[i]),
            report.prior_probs[i],
            report.posterior_probs[i],
            nw = name_width,
            sw = spec_width
        )?;
    }
    for b in &report.breakdowns {
        if let Some(r) = &b.region {
            write!(
                out,
                "{}: region prior {}/{}, posterior {}/{}, eta acceptance {:.3}",
                b.model, r.prior.hits, r.prior.total, r.posterior.hits, r.posterior.total, r.eta_acceptance
            )?;
            match r.below_resolution {
                Some(bound) => writeln!(out, ", no posterior hits (log BF_c,e < {bound:.3})")?,
                None => writeln!(out)?,
            }
        }
    }
    Ok(())
}

pub fn write_summary(out: &mut dyn Write, t: &SummaryTable) -> io::Result<()> {
    let s = &t.scenario;
    writeln!(
        out,
        "scenario {}  n_j = {}  reps = {}  seed = {}  true model {}",
        s.name, s.n_per_group, s.reps, s.base_seed, s.true_model
    )?;
    write!(out, "{:>8}", "")?;
    for m in &t.models {
        write!(out, "  {m:>6}")?;
    }
    writeln!(out, "  {:>8}", "PMP_med")?;
    write!(out, "{:>8}", "top %")?;
    for p in &t.top_percent {
        write!(out, "  {p:>6.1}")?;
    }
    writeln!(out, "  {:>8.3}", t.median_true_pmp)?;
    if s.name.starts_with("het-") {
        writeln!(
            out,
            "note: the Me column is the unconstrained model, printed as M_1 in the published heteroscedastic table"
        )?;
    }
    Ok(())
}

pub fn write_power(out: &mut dyn Write, rows: &[PowerRow], label_pops: bool) -> io::Result<()> {
    writeln!(out, "{:>4}  {:>4}  {:>6}  {:>7}  {:>6}", "Pop", "n_j", "Delta", "sd", "Power")?;
    for r in rows {
        let pop = match (label_pops, r.delta) {
            (true, d) if (d - 0.2).abs() < 1e-12 => "2s",
            (true, d) if (d - 0.3).abs() < 1e-12 => "2m",
            (true, d) if (d - 0.4).abs() < 1e-12 => "2l",
            _ => "-",
        };
        writeln!(
            out,
            "{:>4}  {:>4}  {:>6.2}  {:>7.4}  {:>6.3}",
            pop, r.n_per_group, r.delta, r.sd, r.power
        )?;
    }
    Ok(())
}
