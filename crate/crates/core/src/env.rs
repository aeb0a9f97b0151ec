//! Grid-world dynamics and the two coordination games.
//!
//! Transitions are deterministic and independent of the population; only the
//! reward depends on the empirical distribution. Rewards are evaluated on the
//! pre-move states against the distribution of those same states, then every
//! agent moves.

use crate::error::{Error, Result};
use crate::types::{empirical_distribution, Action, EmpiricalDistribution, GridSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GameKind {
    /// Reward `log μ(s)`: agents gain by gathering anywhere.
    Cluster,
    /// Reward `μ(s)` at a target shared with at least one other agent, `-1` otherwise.
    TargetAgreement { targets: Vec<usize> },
}

impl GameKind {
    /// Target agreement with one target in each grid corner.
    pub fn target_agreement_corners(grid: &GridSpec) -> Self {
        GameKind::TargetAgreement {
            targets: grid.corners(),
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if let GameKind::TargetAgreement { targets } = self {
            if targets.is_empty() {
                return Err(Error::invalid("target agreement needs at least one target"));
            }
            let mut seen = targets.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != targets.len() {
                return Err(Error::invalid("targets must be distinct"));
            }
            if let Some(t) = targets.iter().find(|&&t| t >= grid.n_states()) {
                return Err(Error::invalid(format!("target {t} is outside the grid")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_states: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Distribution of the pre-step states.
    pub distribution: EmpiricalDistribution,
}

/// Moves one cell in the action's direction; moves off the grid leave the state unchanged.
/// North decrements y, South increments y, West decrements x, East increments x.
pub fn step_dynamics(state: usize, action: Action, grid: &GridSpec) -> usize {
    let (x, y) = grid.coords(state);
    let (nx, ny) = match action {
        Action::Stay => (x, y),
        Action::North => (x, y.saturating_sub(1)),
        Action::South => (x, (y + 1).min(grid.height - 1)),
        Action::West => (x.saturating_sub(1), y),
        Action::East => ((x + 1).min(grid.width - 1), y),
    };
    grid.index(nx, ny)
}

pub fn reward_raw(state: usize, mu: &EmpiricalDistribution, game: &GameKind) -> f64 {
    let density = mu.get(state);
    match game {
        GameKind::Cluster => density.ln(),
        GameKind::TargetAgreement { targets } => {
            let on_target = targets.contains(&state);
            // strict: an agent alone on a target is penalised
            if on_target && density * mu.n_agents as f64 > 1.0 + 1e-9 {
                density
            } else {
                -1.0
            }
        }
    }
}

/// Maps a raw reward affinely onto [0,1].
pub fn reward_normalise(raw: f64, game: &GameKind, n_agents: usize) -> f64 {
    let v = match game {
        GameKind::Cluster => {
            if n_agents <= 1 {
                return 0.0;
            }
            let floor = (1.0 / n_agents as f64).ln();
            (raw - floor) / -floor
        }
        GameKind::TargetAgreement { .. } => (raw + 1.0) / 2.0,
    };
    v.clamp(0.0, 1.0)
}

/// Synchronous step of the whole population.
pub fn env_step_all(
    states: &[usize],
    actions: &[Action],
    game: &GameKind,
    grid: &GridSpec,
) -> Result<StepResult> {
    if states.len() != actions.len() {
        return Err(Error::invalid(format!(
            "{} states but {} actions",
            states.len(),
            actions.len()
        )));
    }
    let distribution = empirical_distribution(states, grid.n_states())?;
    let n = states.len();
    let rewards = states
        .iter()
        .map(|&s| reward_normalise(reward_raw(s, &distribution, game), game, n))
        .collect();
    let next_states = states
        .iter()
        .zip(actions)
        .map(|(&s, &a)| step_dynamics(s, a, grid))
        .collect();
    Ok(StepResult {
        next_states,
        rewards,
        distribution,
    })
}
