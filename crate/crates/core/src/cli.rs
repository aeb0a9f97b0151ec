//! Command-line front end and the library functions behind it.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};
use crate::io::{
    self, read_trial_csv, trial_file_name, write_aggregate_csv, write_manifest, write_trial_csv,
    ManifestRow, AGGREGATE_FILE, CONFIG_FILE, MANIFEST_FILE,
};
use crate::metrics::{aggregate_trials, AggregateRow, RunLog};
use crate::orchestrator::run_trial;

/// Default root for run directories when the config names none.
pub const OUTPUT_ROOT_ENV: &str = "NETMFG_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Debug, Parser)]
#[command(name = "netmfg", version, about = "Networked mean-field game learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every trial of one configuration and aggregate.
    Run(RunArgs),
    /// Run a set of configuration variants and write a manifest.
    Sweep(SweepArgs),
    /// Recompute aggregate.csv from the trial files of a run directory.
    Aggregate {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `trials`.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// `key=v1,v2,...`; repeated flags form a cross product.
    #[arg(long, value_parser = parse_assignment)]
    pub vary: Vec<(String, Vec<String>)>,
    /// `key=v1,v2,...`; each value adds one standalone variant.
    #[arg(long, value_parser = parse_assignment)]
    pub also: Vec<(String, Vec<String>)>,
}

fn parse_assignment(s: &str) -> std::result::Result<(String, Vec<String>), String> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=v1,v2,... got `{s}`"))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.iter().any(String::is_empty) {
        return Err(format!("empty value in `{s}`"));
    }
    Ok((key.trim().to_string(), values))
}

/// Where a run writes: the configured directory, or `<root>/<digest>`.
pub fn resolve_output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| {
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
        root.join(cfg.digest())
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&io::read_text(path)?)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub digest: String,
    pub logs: Vec<RunLog>,
    pub aggregate: Vec<AggregateRow>,
}

/// Runs all trials in parallel, writing `trial_<seed>.csv`, `aggregate.csv`
/// and the resolved `config.txt` into `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    io::create_dir(dir)?;
    let mut resolved = cfg.clone();
    resolved.output_dir = Some(dir.to_path_buf());
    io::write_text(&dir.join(CONFIG_FILE), &resolved.serialise())?;

    let opts = cfg.metrics_options();
    let seeds: Vec<u64> = cfg.trial_seeds().collect();
    let logs = seeds
        .par_iter()
        .map(|&seed| {
            let out = run_trial(&cfg.scenario(seed)?, &opts)?;
            write_trial_csv(&out.log, &dir.join(trial_file_name(seed)))?;
            Ok(out.log)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate_trials(&logs)?;
    write_aggregate_csv(&aggregate, &dir.join(AGGREGATE_FILE))?;
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        digest: opts.digest,
        logs,
        aggregate,
    })
}

/// Re-aggregates the trial files of a finished run directory.
pub fn aggregate_dir(dir: &Path) -> Result<Vec<AggregateRow>> {
    let cfg = load_config(&dir.join(CONFIG_FILE))?;
    let digest = cfg.digest();
    let logs = io::trial_files(dir)?
        .into_iter()
        .map(|(seed, path)| read_trial_csv(&path, seed, &digest))
        .collect::<Result<Vec<_>>>()?;
    let rows = aggregate_trials(&logs)?;
    write_aggregate_csv(&rows, &dir.join(AGGREGATE_FILE))?;
    Ok(rows)
}

/// Variant label and the assignments it applies on top of the base config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variant {
    pub label: String,
    pub assignments: Vec<(String, String)>,
}

/// Cross product of `vary`, followed by one variant per `also` value.
/// No assignments at all yields the base config as the single variant.
pub fn expand_variants(vary: &[(String, Vec<String>)], also: &[(String, Vec<String>)]) -> Vec<Variant> {
    let mut product: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in vary {
        product = product
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    let singles = also
        .iter()
        .flat_map(|(key, values)| values.iter().map(move |v| vec![(key.clone(), v.clone())]));
    let mut combos: Vec<Vec<(String, String)>> = if vary.is_empty() && !also.is_empty() {
        Vec::new()
    } else {
        product
    };
    combos.extend(singles);
    combos
        .into_iter()
        .map(|assignments| {
            let label = if assignments.is_empty() {
                "base".to_string()
            } else {
                assignments
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(";")
            };
            Variant { label, assignments }
        })
        .collect()
}

fn dir_name(index: usize, label: &str) -> String {
    let safe: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' { c } else { '-' })
        .collect();
    format!("{index:02}_{safe}")
}

/// Runs every variant into its own subdirectory of `root` and writes the
/// manifest there.
pub fn run_sweep(
    base: &ExperimentConfig,
    vary: &[(String, Vec<String>)],
    also: &[(String, Vec<String>)],
    root: &Path,
) -> Result<Vec<ManifestRow>> {
    let variants = expand_variants(vary, also);
    let mut configs = Vec::with_capacity(variants.len());
    for v in &variants {
        let mut cfg = base.clone();
        for (key, value) in &v.assignments {
            if key == "output_dir" {
                return Err(Error::invalid("output_dir cannot be swept"));
            }
            cfg.set(key, value)
                .map_err(|message| Error::invalid(format!("variant `{}`: {message}", v.label)))?;
        }
        cfg.validate()?;
        configs.push(cfg);
    }
    io::create_dir(root)?;
    let mut rows = Vec::with_capacity(variants.len());
    for (index, (variant, cfg)) in variants.iter().zip(&configs).enumerate() {
        let name = dir_name(index, &variant.label);
        let summary = run_experiment(cfg, &root.join(&name))?;
        rows.push(ManifestRow {
            variant: format!("{index:02}"),
            label: variant.label.clone(),
            digest: summary.digest,
            aggregate: Path::new(&name).join(AGGREGATE_FILE),
        });
    }
    write_manifest(&rows, &root.join(MANIFEST_FILE))?;
    Ok(rows)
}

fn config_for(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = load_config(&args.config)?;
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Executes a parsed command line, returning a one-line report.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Run(args) => {
            let cfg = config_for(&args)?;
            let dir = resolve_output_dir(&cfg);
            let summary = run_experiment(&cfg, &dir)?;
            Ok(format!(
                "{} trial(s) written to {} (digest {})",
                summary.logs.len(),
                summary.dir.display(),
                summary.digest
            ))
        }
        Command::Sweep(args) => {
            let cfg = config_for(&args.run)?;
            let root = resolve_output_dir(&cfg);
            let rows = run_sweep(&cfg, &args.vary, &args.also, &root)?;
            Ok(format!("{} variant(s) written to {}", rows.len(), root.join(MANIFEST_FILE).display()))
        }
        Command::Aggregate { dir } => {
            let rows = aggregate_dir(&dir)?;
            Ok(format!("{} row(s) written to {}", rows.len(), dir.join(AGGREGATE_FILE).display()))
        }
    }
}
