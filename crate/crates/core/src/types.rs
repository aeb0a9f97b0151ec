//! Shared domain vocabulary: grid, actions, policies, Q-tables, the empirical
//! distribution, the entropy regulariser and the hyperparameter record.

use std::fmt;
use std::str::FromStr;

use crate::comms::{TauSchedule, TauSetting};
use crate::error::{Error, Result};
use crate::learning::BetaSchedule;

/// Tolerance on probability-vector sums.
pub const PROB_TOL: f64 = 1e-9;

/// Rectangular grid world. State index is `y * width + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn n_states(&self) -> usize {
        self.width * self.height
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Length of the grid diagonal between the two extreme cell centres.
    pub fn diagonal(&self) -> f64 {
        let w = (self.width - 1) as f64;
        let h = (self.height - 1) as f64;
        (w * w + h * h).sqrt()
    }

    /// The four corner cells, deduplicated for degenerate grids.
    pub fn corners(&self) -> Vec<usize> {
        let (w, h) = (self.width - 1, self.height - 1);
        let mut out = vec![
            self.index(0, 0),
            self.index(w, 0),
            self.index(0, h),
            self.index(w, h),
        ];
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Stay,
    North,
    South,
    East,
    West,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; Action::COUNT] = [
        Action::Stay,
        Action::North,
        Action::South,
        Action::East,
        Action::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

/// Row-stochastic table over (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    /// Builds a policy from a flat row-major table, checking every row.
    pub fn from_table(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("policy needs at least one state and action"));
        }
        if probs.len() != n_states * n_actions {
            return Err(Error::invalid(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                n_states * n_actions
            )));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_probability_vector(row).map_err(|e| {
                Error::invalid(format!("policy row {s}: {e}"))
            })?;
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    /// Overwrites row `s`; the input is clamped to be non-negative and renormalised.
    pub fn set_row(&mut self, s: usize, row: &[f64]) {
        let n = self.n_actions;
        let dst = &mut self.probs[s * n..(s + 1) * n];
        dst.copy_from_slice(row);
        renormalise(dst);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Samples an action index at state `s` by inverse CDF on `u ∈ [0,1)`.
    pub fn sample_with(&self, s: usize, u: f64) -> usize {
        let row = self.row(s);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > 0.0 {
                last_positive = a;
                acc += p;
                if u < acc {
                    return a;
                }
            }
        }
        last_positive
    }
}

/// Per-agent action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }
}

/// Empirical state distribution of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub probs: Vec<f64>,
    pub n_agents: usize,
}

impl EmpiricalDistribution {
    pub fn get(&self, s: usize) -> f64 {
        self.probs[s]
    }
}

/// SARSA tuple `(s, a, r, s', a')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
    pub a_next: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Architecture {
    Centralised,
    Independent,
    Networked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// One online TD update per sampling iteration on the lagged transition.
    Theoretical,
    /// Transitions buffered during sampling, then replayed in shuffled passes.
    Replay,
}

/// How the scalar broadcast alongside each policy is produced in the
/// theoretical algorithm. The replay algorithm always evaluates returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SigmaSource {
    AgentIndex,
    Return,
}

/// Mid-run population growth: `count` agents join at the start of iteration `at_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PopulationAdd {
    pub at_k: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub k: usize,
    pub m_pg: usize,
    pub m_td: usize,
    pub c: usize,
    pub l: usize,
    pub e: usize,
    pub gamma: f64,
    pub beta: f64,
    pub eta: f64,
    pub lambda: f64,
    pub tau: TauSetting,
    pub beta_schedule: BetaScheduleKind,
    pub p_inf: f64,
    pub delta_mix: f64,
    pub n_agents: usize,
    pub broadcast_radius_fraction: f64,
    pub architecture: Architecture,
    pub algorithm: Algorithm,
    pub sigma_source: SigmaSource,
    pub fail_prob: f64,
    pub population_add: Option<PopulationAdd>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaScheduleKind {
    Fixed,
    Theoretical,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            k: 200,
            m_pg: 500,
            m_td: 1,
            c: 1,
            l: 100,
            e: 100,
            gamma: 0.9,
            beta: 0.1,
            eta: 0.01,
            lambda: 0.0,
            tau: TauSetting::Annealed,
            beta_schedule: BetaScheduleKind::Fixed,
            p_inf: 1.0,
            delta_mix: 1.0,
            n_agents: 250,
            broadcast_radius_fraction: 1.0,
            architecture: Architecture::Networked,
            algorithm: Algorithm::Replay,
            sigma_source: SigmaSource::AgentIndex,
            fail_prob: 0.0,
            population_add: None,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::range("gamma", format!("{} is outside [0, 1)", self.gamma)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::range("beta", format!("{} must be > 0", self.beta)));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::range("eta", format!("{} must be > 0", self.eta)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::range("lambda", format!("{} must be >= 0", self.lambda)));
        }
        if let TauSetting::Fixed(v) = self.tau {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::range("tau", format!("{v} must be > 0")));
            }
        }
        for (key, v) in [("p_inf", self.p_inf), ("delta_mix", self.delta_mix)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::range(key, format!("{v} is outside (0, 1]")));
            }
        }
        if self.n_agents == 0 {
            return Err(Error::range("n_agents", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.broadcast_radius_fraction) {
            return Err(Error::range(
                "broadcast_radius_fraction",
                format!("{} is outside [0, 1]", self.broadcast_radius_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.fail_prob) {
            return Err(Error::range(
                "fail_prob",
                format!("{} is outside [0, 1]", self.fail_prob),
            ));
        }
        Ok(())
    }

    /// Communication rounds actually executed per iteration.
    pub fn effective_c(&self) -> usize {
        match self.architecture {
            Architecture::Networked => self.c,
            Architecture::Independent | Architecture::Centralised => 0,
        }
    }

    pub fn tau_schedule(&self) -> TauSchedule {
        match self.tau {
            TauSetting::Annealed => TauSchedule::Annealed { iterations: self.k },
            TauSetting::Fixed(v) => TauSchedule::Fixed(v),
            TauSetting::Max => TauSchedule::Max,
        }
    }

    pub fn beta_schedule(&self) -> Result<BetaSchedule> {
        match self.beta_schedule {
            BetaScheduleKind::Fixed => Ok(BetaSchedule::Fixed(self.beta)),
            BetaScheduleKind::Theoretical => Ok(BetaSchedule::Theoretical {
                t0: crate::learning::t0_of(self.gamma, self.delta_mix, self.p_inf)?,
            }),
        }
    }
}

macro_rules! keyword_enum {
    ($ty:ty { $($variant:path => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self { $($variant => $name),+ };
                f.write_str(s)
            }
        }

        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!(
                        "unknown value `{}` (expected one of: {})",
                        other,
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(Architecture {
    Architecture::Centralised => "centralised",
    Architecture::Independent => "independent",
    Architecture::Networked => "networked",
});

keyword_enum!(Algorithm {
    Algorithm::Theoretical => "theoretical",
    Algorithm::Replay => "replay",
});

keyword_enum!(SigmaSource {
    SigmaSource::AgentIndex => "index",
    SigmaSource::Return => "return",
});

keyword_enum!(BetaScheduleKind {
    BetaScheduleKind::Fixed => "fixed",
    BetaScheduleKind::Theoretical => "theoretical",
});

fn check_probability_vector(u: &[f64]) -> Result<()> {
    if let Some(x) = u.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid(format!("entry {x} is not a probability")));
    }
    let sum: f64 = u.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::invalid(format!("entries sum to {sum}, not 1")));
    }
    Ok(())
}

/// Clamps negatives to zero and rescales to unit sum. An all-zero input
/// becomes uniform.
pub fn renormalise(u: &mut [f64]) {
    for x in u.iter_mut() {
        if !(*x > 0.0) {
            *x = 0.0;
        }
    }
    let sum: f64 = u.iter().sum();
    if sum > 0.0 {
        u.iter_mut().for_each(|x| *x /= sum);
    } else {
        let v = 1.0 / u.len() as f64;
        u.iter_mut().for_each(|x| *x = v);
    }
}

/// Scaled entropy `-λ Σ u log u` with `0 log 0 = 0`.
pub fn entropy_h(u: &[f64], lambda: f64) -> Result<f64> {
    check_probability_vector(u)?;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda {lambda} must be >= 0")));
    }
    Ok(entropy_unchecked(u, lambda))
}

#[inline]
pub(crate) fn entropy_unchecked(u: &[f64], lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let h: f64 = u
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    lambda * h
}

/// Upper bound on any regularised action value: `(1 + λ log|A|) / (1 - γ)`.
pub fn q_max(gamma: f64, lambda: f64, n_actions: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::range("gamma", format!("{gamma} is outside [0, 1)")));
    }
    let h_max = lambda * (n_actions as f64).ln();
    Ok((1.0 + h_max) / (1.0 - gamma))
}

pub fn uniform_policy(n_states: usize, n_actions: usize) -> Policy {
    assert!(n_states >= 1 && n_actions >= 1);
    Policy {
        n_states,
        n_actions,
        probs: vec![1.0 / n_actions as f64; n_states * n_actions],
    }
}

pub fn empirical_distribution(states: &[usize], n_states: usize) -> Result<EmpiricalDistribution> {
    if states.is_empty() {
        return Err(Error::invalid("empirical distribution of an empty population"));
    }
    let mut counts = vec![0usize; n_states];
    for &s in states {
        if s >= n_states {
            return Err(Error::invalid(format!("state {s} out of range 0..{n_states}")));
        }
        counts[s] += 1;
    }
    let n = states.len() as f64;
    Ok(EmpiricalDistribution {
        probs: counts.into_iter().map(|c| c as f64 / n).collect(),
        n_agents: states.len(),
    })
}
