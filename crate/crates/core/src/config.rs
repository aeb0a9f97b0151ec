//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Omitted keys take their
//! defaults; unknown or repeated keys are errors. [`ExperimentConfig::serialise`]
//! writes every key in a fixed order, and the digest hashes that canonical form
//! minus the keys that do not change results (`trials`, `base_seed`,
//! `output_dir`).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::comms::TauSetting;
use crate::env::GameKind;
use crate::error::{Error, Result};
use crate::orchestrator::{MetricsOptions, Scenario};
use crate::types::{GridSpec, Hyperparams, PopulationAdd};

/// Keys in canonical order.
pub const KEYS: &[&str] = &[
    "k",
    "m_pg",
    "m_td",
    "c",
    "l",
    "e",
    "gamma",
    "beta",
    "eta",
    "lambda",
    "tau",
    "beta_schedule",
    "p_inf",
    "delta_mix",
    "n_agents",
    "broadcast_radius_fraction",
    "architecture",
    "algorithm",
    "sigma",
    "fail_prob",
    "population_add",
    "game",
    "targets",
    "grid_width",
    "grid_height",
    "trials",
    "base_seed",
    "exploitability_every",
    "exploitability_loops",
    "output_dir",
];

const NOT_DIGESTED: &[&str] = &["trials", "base_seed", "output_dir"];

/// Hex characters of the sha256 kept in the digest.
const DIGEST_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameChoice {
    Cluster,
    TargetAgreement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Learning parameters; `seed` is overwritten per trial.
    pub hp: Hyperparams,
    pub game: GameChoice,
    /// Target cells (`y * width + x`); `None` places one in each corner.
    pub targets: Option<Vec<usize>>,
    pub grid_width: usize,
    pub grid_height: usize,
    pub trials: usize,
    pub base_seed: u64,
    /// Probe cadence in iterations; 0 disables it.
    pub exploitability_every: usize,
    pub exploitability_loops: usize,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hp: Hyperparams::default(),
            game: GameChoice::Cluster,
            targets: None,
            grid_width: 8,
            grid_height: 8,
            trials: 10,
            base_seed: 0,
            exploitability_every: 2,
            exploitability_loops: 40,
            output_dir: None,
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("cannot parse `{value}`: {e}"))
}

fn parse_float(value: &str) -> std::result::Result<f64, String> {
    let v: f64 = parse_num(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{value}` is not a finite number"))
    }
}

impl ExperimentConfig {
    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let hp = &mut self.hp;
        match key {
            "k" => hp.k = parse_num(value)?,
            "m_pg" => hp.m_pg = parse_num(value)?,
            "m_td" => hp.m_td = parse_num(value)?,
            "c" => hp.c = parse_num(value)?,
            "l" => hp.l = parse_num(value)?,
            "e" => hp.e = parse_num(value)?,
            "gamma" => hp.gamma = parse_float(value)?,
            "beta" => hp.beta = parse_float(value)?,
            "eta" => hp.eta = parse_float(value)?,
            "lambda" => hp.lambda = parse_float(value)?,
            "tau" => {
                hp.tau = match value {
                    "annealed" => TauSetting::Annealed,
                    "max" => TauSetting::Max,
                    other => TauSetting::Fixed(parse_float(other).map_err(|_| {
                        format!("`{other}` is not `annealed`, `max` or a number")
                    })?),
                }
            }
            "beta_schedule" => hp.beta_schedule = value.parse()?,
            "p_inf" => hp.p_inf = parse_float(value)?,
            "delta_mix" => hp.delta_mix = parse_float(value)?,
            "n_agents" => hp.n_agents = parse_num(value)?,
            "broadcast_radius_fraction" => hp.broadcast_radius_fraction = parse_float(value)?,
            "architecture" => hp.architecture = value.parse()?,
            "algorithm" => hp.algorithm = value.parse()?,
            "sigma" => hp.sigma_source = value.parse()?,
            "fail_prob" => hp.fail_prob = parse_float(value)?,
            "population_add" => {
                hp.population_add = match value {
                    "none" => None,
                    spec => {
                        let (at, count) = spec
                            .split_once(':')
                            .ok_or_else(|| format!("expected `k_add:n_add` or `none`, got `{spec}`"))?;
                        Some(PopulationAdd {
                            at_k: parse_num(at.trim())?,
                            count: parse_num(count.trim())?,
                        })
                    }
                }
            }
            "game" => {
                self.game = match value {
                    "cluster" => GameChoice::Cluster,
                    "target_agreement" => GameChoice::TargetAgreement,
                    other => {
                        return Err(format!(
                            "unknown value `{other}` (expected one of: cluster, target_agreement)"
                        ))
                    }
                }
            }
            "targets" => {
                self.targets = match value {
                    "corners" => None,
                    list => Some(
                        list.split(',')
                            .map(|t| parse_num(t.trim()))
                            .collect::<std::result::Result<_, _>>()?,
                    ),
                }
            }
            "grid_width" => self.grid_width = parse_num(value)?,
            "grid_height" => self.grid_height = parse_num(value)?,
            "trials" => self.trials = parse_num(value)?,
            "base_seed" => self.base_seed = parse_num(value)?,
            "exploitability_every" => self.exploitability_every = parse_num(value)?,
            "exploitability_loops" => self.exploitability_loops = parse_num(value)?,
            "output_dir" => {
                self.output_dir = match value {
                    "" => None,
                    path => Some(PathBuf::from(path)),
                }
            }
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Canonical textual value of one key.
    pub fn get(&self, key: &str) -> Option<String> {
        let hp = &self.hp;
        let v = match key {
            "k" => hp.k.to_string(),
            "m_pg" => hp.m_pg.to_string(),
            "m_td" => hp.m_td.to_string(),
            "c" => hp.c.to_string(),
            "l" => hp.l.to_string(),
            "e" => hp.e.to_string(),
            "gamma" => hp.gamma.to_string(),
            "beta" => hp.beta.to_string(),
            "eta" => hp.eta.to_string(),
            "lambda" => hp.lambda.to_string(),
            "tau" => match hp.tau {
                TauSetting::Annealed => "annealed".into(),
                TauSetting::Max => "max".into(),
                TauSetting::Fixed(v) => v.to_string(),
            },
            "beta_schedule" => hp.beta_schedule.to_string(),
            "p_inf" => hp.p_inf.to_string(),
            "delta_mix" => hp.delta_mix.to_string(),
            "n_agents" => hp.n_agents.to_string(),
            "broadcast_radius_fraction" => hp.broadcast_radius_fraction.to_string(),
            "architecture" => hp.architecture.to_string(),
            "algorithm" => hp.algorithm.to_string(),
            "sigma" => hp.sigma_source.to_string(),
            "fail_prob" => hp.fail_prob.to_string(),
            "population_add" => match hp.population_add {
                None => "none".into(),
                Some(p) => format!("{}:{}", p.at_k, p.count),
            },
            "game" => match self.game {
                GameChoice::Cluster => "cluster".into(),
                GameChoice::TargetAgreement => "target_agreement".into(),
            },
            "targets" => match &self.targets {
                None => "corners".into(),
                Some(ts) => ts.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
            },
            "grid_width" => self.grid_width.to_string(),
            "grid_height" => self.grid_height.to_string(),
            "trials" => self.trials.to_string(),
            "base_seed" => self.base_seed.to_string(),
            "exploitability_every" => self.exploitability_every.to_string(),
            "exploitability_loops" => self.exploitability_loops.to_string(),
            "output_dir" => self
                .output_dir
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            _ => return None,
        };
        Some(v)
    }

    /// Every key, one `key = value` line each, in canonical order.
    pub fn serialise(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("canonical key");
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Hex prefix of the sha256 over the sorted result-affecting lines.
    pub fn digest(&self) -> String {
        let mut lines: Vec<String> = KEYS
            .iter()
            .filter(|k| !NOT_DIGESTED.contains(k))
            .map(|k| format!("{k}={}", self.get(k).expect("canonical key")))
            .collect();
        lines.sort();
        let mut hasher = Sha256::new();
        for line in &lines {
            hasher.update(line.as_bytes());
            hasher.update(b"\n");
        }
        let mut hex = hex::encode(hasher.finalize());
        hex.truncate(DIGEST_LEN);
        hex
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid_width, self.grid_height)
    }

    pub fn game_kind(&self) -> Result<GameKind> {
        let grid = self.grid()?;
        Ok(match (self.game, &self.targets) {
            (GameChoice::Cluster, _) => GameKind::Cluster,
            (GameChoice::TargetAgreement, None) => GameKind::target_agreement_corners(&grid),
            (GameChoice::TargetAgreement, Some(ts)) => GameKind::TargetAgreement { targets: ts.clone() },
        })
    }

    /// Scenario for the trial with the given seed.
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        let mut hp = self.hp.clone();
        hp.seed = seed;
        Scenario::new(hp, self.game_kind()?, self.grid()?)
    }

    pub fn trial_seeds(&self) -> impl Iterator<Item = u64> {
        let base = self.base_seed;
        (0..self.trials as u64).map(move |i| base.wrapping_add(i))
    }

    pub fn metrics_options(&self) -> MetricsOptions {
        MetricsOptions {
            exploitability_every: self.exploitability_every,
            exploitability_loops: self.exploitability_loops,
            digest: self.digest(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::range("trials", "must be at least 1"));
        }
        if self.exploitability_every > 0 && self.exploitability_loops == 0 {
            return Err(Error::range("exploitability_loops", "must be at least 1"));
        }
        if self.game == GameChoice::Cluster && self.targets.is_some() {
            return Err(Error::range("targets", "only used by the target_agreement game"));
        }
        self.scenario(self.base_seed).map(|_| ())
    }
}

/// Parses a config file; errors carry the 1-based line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut seen: Vec<(String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
            return Err(Error::Config {
                line,
                message: format!("`{key}` already set on line {first}"),
            });
        }
        cfg.set(key, value).map_err(|message| Error::Config { line, message })?;
        seen.push((key.to_string(), line));
    }
    cfg.validate().map_err(|e| match e {
        Error::Range { key, message } => {
            let message = match seen.iter().find(|(k, _)| *k == key) {
                Some((_, line)) => format!("line {line}: {message}"),
                None => message,
            };
            Error::Range { key, message }
        }
        other => other,
    })?;
    Ok(cfg)
}
