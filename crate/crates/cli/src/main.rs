use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cip_anova::comparison::{compare, ComparisonReport, ComparisonSettings};
use cip_anova::constraint::{parse_model_spec, ConstraintModel};
use cip_anova::data::ingest_csv;
use cip_anova::evidence::EvidenceMethod;
use cip_anova::prior::NullParams;
use cip_anova::simulation::{
    power_table, preset, preset_models, preset_names, run_simulation_study, SimScenario, SummaryTable,
    DEFAULT_REPS, POWER_DELTAS, POWER_SIZES, Z_CRIT,
};
use cip_anova::RandomSource;

mod config;
mod report;
mod selftest;

use config::RunConfig;

const DEFAULT_SEED: u64 = 20_110_901;

#[derive(Debug, Parser)]
#[command(name = "cip-anova", version, about = "Bayesian comparison of constrained ANOVA models with conditional intrinsic priors")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Text,
    Records,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Prior draws used for region probabilities.
    #[arg(long, global = true)]
    prior_draws: Option<usize>,
    /// Total posterior chain length, burn-in included.
    #[arg(long, global = true)]
    mcmc_iters: Option<usize>,
    #[arg(long, global = true)]
    burnin: Option<usize>,
    /// Gauss-Jacobi nodes per panel.
    #[arg(long, global = true)]
    quadrature_nodes: Option<usize>,
    #[arg(long, global = true, value_parser = parse_method)]
    evidence_method: Option<EvidenceMethod>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<EvidenceMethod, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare constraint models on a `group,response` CSV file.
    Compare {
        /// Data file (overrides `data` in the config).
        data: Option<PathBuf>,
        /// Model as NAME:SPEC, e.g. "M3:mu2 < mu1 < mu4 < {mu3 = mu5}". Repeatable.
        #[arg(short, long = "model")]
        models: Vec<String>,
        /// Prior model probabilities, comma separated, in model order.
        #[arg(long, value_delimiter = ',')]
        prior_probs: Option<Vec<f64>>,
        /// Fix α0 instead of estimating it (needs --sigma0).
        #[arg(long, requires = "sigma0")]
        alpha0: Option<f64>,
        #[arg(long, requires = "alpha0")]
        sigma0: Option<f64>,
    },
    /// Run a replication study for a built-in or configured scenario.
    Simulate {
        /// Preset name (see --list).
        scenario: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n_per_group: Option<usize>,
        /// List the preset names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Power of excluding equal adjacent means with a 95% interval.
    Power {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, default_value_t = Z_CRIT)]
        z: f64,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn settings(global: &GlobalArgs, cfg: &RunConfig) -> ComparisonSettings {
    let mut s = ComparisonSettings::default();
    let file = cfg.sampler.clone().unwrap_or_default();
    s.prior_draws = global.prior_draws.or(file.prior_draws).unwrap_or(s.prior_draws);
    s.mcmc_iters = global.mcmc_iters.or(file.mcmc_iters).unwrap_or(s.mcmc_iters);
    s.burnin = global.burnin.or(file.burnin).unwrap_or(s.burnin);
    s.evidence.nodes = global.quadrature_nodes.or(file.quadrature_nodes).unwrap_or(s.evidence.nodes);
    s.evidence.chib_iters = file.chib_iters.unwrap_or(s.evidence.chib_iters);
    s.evidence.method = global.evidence_method.or(file.evidence_method).unwrap_or(s.evidence.method);
    s
}

fn parse_models(args: &[String], cfg: &RunConfig, groups: usize) -> Result<Vec<ConstraintModel>> {
    let entries: Vec<(String, String)> = if !args.is_empty() {
        args.iter()
            .enumerate()
            .map(|(i, a)| match a.split_once(':') {
                Some((name, spec)) => (name.trim().to_string(), spec.to_string()),
                None => (format!("M{}", i + 1), a.clone()),
            })
            .collect()
    } else if let Some(ms) = &cfg.models {
        ms.iter().map(|m| (m.name.clone(), m.spec.clone())).collect()
    } else {
        bail!("no models given; use --model NAME:SPEC or a config file with [[models]]");
    };
    entries
        .iter()
        .map(|(name, spec)| parse_model_spec(name, spec, groups).with_context(|| format!("model {name}")))
        .collect()
}

#[derive(Serialize)]
struct ComparisonRecord<'a> {
    kind: &'static str,
    seed: u64,
    data: String,
    models: Vec<(String, String)>,
    settings: &'a ComparisonSettings,
    report: &'a ComparisonReport,
}

fn run_compare(
    global: &GlobalArgs,
    cfg: &RunConfig,
    data: Option<PathBuf>,
    models: &[String],
    prior_probs: Option<Vec<f64>>,
    theta0: Option<(f64, f64)>,
    out: &mut dyn Write,
) -> Result<()> {
    let path = data
        .or_else(|| cfg.data.clone())
        .ok_or_else(|| anyhow!("no data file given"))?;
    let ingested = ingest_csv(&path)?;
    for w in &ingested.warnings {
        eprintln!("warning: {w}");
    }
    let data = ingested.data;
    let models = parse_models(models, cfg, data.num_groups())?;
    let mut s = settings(global, cfg);
    let theta0 = theta0.or(cfg.theta0.map(|t| (t.alpha0, t.sigma0)));
    if let Some((a, sd)) = theta0 {
        s.theta0 = Some(NullParams::new(a, sd)?);
    }
    let seed = global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let probs = prior_probs.or_else(|| cfg.prior_probs.clone());
    let report = compare(&data, &models, probs.as_deref(), &s, &RandomSource::new(seed, 0))?;
    match global.output {
        OutputFormat::Text => report::write_comparison(out, &report, &models, data.n(), seed)?,
        OutputFormat::Records => {
            let rec = ComparisonRecord {
                kind: "comparison",
                seed,
                data: path.display().to_string(),
                models: models.iter().map(|m| (m.name().to_string(), m.to_string())).collect(),
                settings: &s,
                report: &report,
            };
            writeln!(out, "{}", serde_json::to_string(&rec)?)?;
        }
    }
    Ok(())
}

fn scenario_from(
    cfg: &RunConfig,
    name: Option<String>,
    reps: Option<usize>,
    n_per_group: Option<usize>,
    seed: u64,
) -> Result<(SimScenario, Vec<ConstraintModel>)> {
    let reps = reps.or(cfg.reps).unwrap_or(DEFAULT_REPS);
    let n = n_per_group.or(cfg.n_per_group).unwrap_or(25);
    if let Some(name) = name.or_else(|| cfg.preset.clone()) {
        let s = preset(&name, n, reps, seed)?;
        let models = match cfg.models {
            Some(_) => parse_models(&[], cfg, s.groups())?,
            None => preset_models(&name),
        };
        return Ok((s, models));
    }
    let custom = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| anyhow!("no scenario given; name a preset or configure [scenario]"))?;
    let s = SimScenario {
        name: custom.name.clone(),
        means: custom.means.clone(),
        sds: custom.sds.clone(),
        n_per_group: n,
        true_model: custom.true_model.clone(),
        reps,
        base_seed: seed,
    };
    s.validate()?;
    let models = parse_models(&[], cfg, s.groups())?;
    Ok((s, models))
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    kind: &'static str,
    scenario: &'a SimScenario,
    settings: &'a ComparisonSettings,
    models: &'a [String],
    top_counts: &'a [usize],
    top_percent: &'a [f64],
    median_true_pmp: f64,
}

#[derive(Serialize)]
struct ReplicationLine<'a, T: Serialize> {
    kind: &'static str,
    settings: &'a ComparisonSettings,
    #[serde(flatten)]
    record: &'a T,
}

fn write_summary(out: &mut dyn Write, format: OutputFormat, table: &SummaryTable, s: &ComparisonSettings) -> Result<()> {
    match format {
        OutputFormat::Text => report::write_summary(out, table)?,
        OutputFormat::Records => {
            for rec in &table.records {
                let line = ReplicationLine { kind: "replication", settings: s, record: rec };
                writeln!(out, "{}", serde_json::to_string(&line)?)?;
            }
            let summary = SummaryRecord {
                kind: "summary",
                scenario: &table.scenario,
                settings: s,
                models: &table.models,
                top_counts: &table.top_counts,
                top_percent: &table.top_percent,
                median_true_pmp: table.median_true_pmp,
            };
            writeln!(out, "{}", serde_json::to_string(&summary)?)?;
        }
    }
    Ok(())
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load_opt(cli.global.config.as_deref())?;
    let global = &cli.global;
    match cli.command {
        Command::Compare {
            data,
            models,
            prior_probs,
            alpha0,
            sigma0,
        } => run_compare(global, &cfg, data, &models, prior_probs, alpha0.zip(sigma0), out),
        Command::Simulate {
            scenario,
            reps,
            n_per_group,
            list,
        } => {
            if list {
                for name in preset_names() {
                    writeln!(out, "{name}")?;
                }
                return Ok(());
            }
            let seed = global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            let (scenario, models) = scenario_from(&cfg, scenario, reps, n_per_group, seed)?;
            let s = settings(global, &cfg);
            let table = run_simulation_study(&scenario, &models, &s)?;
            write_summary(out, global.output, &table, &s)
        }
        Command::Power { sigma, deltas, sizes, z } => {
            let custom = deltas.is_some();
            let deltas = deltas.unwrap_or_else(|| POWER_DELTAS.to_vec());
            let sizes = sizes.unwrap_or_else(|| POWER_SIZES.to_vec());
            if !(sigma > 0.0) || deltas.iter().any(|d| *d < 0.0) || sizes.contains(&0) {
                bail!("power needs sigma > 0, deltas >= 0 and sizes >= 1");
            }
            let rows = power_table(&deltas, sigma, &sizes, z);
            match global.output {
                OutputFormat::Text => report::write_power(out, &rows, !custom)?,
                OutputFormat::Records => {
                    for r in &rows {
                        writeln!(out, "{}", serde_json::to_string(&serde_json::json!({"kind": "power", "z_crit": z, "row": r}))?)?;
                    }
                }
            }
            Ok(())
        }
        Command::Selftest => {
            let seed = global.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
            if selftest::run(out, seed)? {
                Ok(())
            } else {
                bail!("selftest failed")
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", first.trim());
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| run(cli, &mut buf));
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(&buf);
    let _ = stdout.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
