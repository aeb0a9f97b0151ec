//! Per-agent learning core: TD estimation, mirror-ascent policy updates and
//! the experience-replay buffer.

mod pma;
mod replay;
mod td;

pub use pma::{pma_objective, pma_row, pma_update, project_simplex, PmaOutcome, RowSolution};
pub use replay::{buffer_replay, LagWindow, ReplayBuffer};
pub use td::{beta_at, t0_of, td_update, BetaSchedule};
