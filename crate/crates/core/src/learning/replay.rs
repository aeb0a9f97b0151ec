use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::learning::td::td_update;
use crate::types::{Policy, QTable, Transition};

/// Per-iteration transition store, emptied at the start of every outer iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBuffer {
    transitions: Vec<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            transitions: Vec::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Empties the buffer and sets the capacity for the coming iteration.
    pub fn reset(&mut self, capacity: usize) {
        self.transitions.clear();
        self.capacity = capacity;
    }

    pub fn push(&mut self, zeta: Transition) -> Result<()> {
        if self.transitions.len() >= self.capacity {
            return Err(Error::invalid(format!(
                "replay buffer full ({} transitions)",
                self.capacity
            )));
        }
        self.transitions.push(zeta);
        Ok(())
    }
}

/// `passes` rounds of: shuffle the buffer, then one TD update per stored
/// transition in the shuffled order.
#[allow(clippy::too_many_arguments)]
pub fn buffer_replay<R: Rng + ?Sized>(
    buf: &mut ReplayBuffer,
    q: &mut QTable,
    pi: &Policy,
    passes: usize,
    beta: f64,
    lambda: f64,
    gamma: f64,
    rng: &mut R,
) {
    for _ in 0..passes {
        buf.transitions.shuffle(rng);
        for zeta in &buf.transitions {
            td_update(q, zeta, pi, beta, lambda, gamma);
        }
    }
}

/// Two-step trajectory window yielding the most recent complete SARSA tuple
/// `ζ_{t-2} = (s_{t-2}, a_{t-2}, r_{t-2}, s_{t-1}, a_{t-1})`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LagWindow {
    older: Option<(usize, usize, f64)>,
    newer: Option<(usize, usize, f64)>,
}

impl LagWindow {
    pub fn clear(&mut self) {
        *self = Self::default();
    }

    /// Records the (state, action, reward) of the step just taken.
    pub fn record(&mut self, s: usize, a: usize, r: f64) {
        self.older = self.newer;
        self.newer = Some((s, a, r));
    }

    pub fn latest_complete(&self) -> Option<Transition> {
        let (s, a, r) = self.older?;
        let (s_next, a_next, _) = self.newer?;
        Some(Transition {
            s,
            a,
            r,
            s_next,
            a_next,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::uniform_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeta(i: usize) -> Transition {
        Transition {
            s: i % 4,
            a: i % 5,
            r: (i % 3) as f64 / 2.0,
            s_next: (i + 1) % 4,
            a_next: (i + 2) % 5,
        }
    }

    #[test]
    fn push_semantics() {
        let mut buf = ReplayBuffer::with_capacity(3);
        buf.push(zeta(0)).unwrap();
        assert_eq!(buf.len(), 1);
        buf.push(zeta(1)).unwrap();
        buf.push(zeta(2)).unwrap();
        assert_eq!(buf.len(), 3);
        assert_eq!(buf.transitions(), &[zeta(0), zeta(1), zeta(2)]);
        assert!(buf.push(zeta(3)).is_err());
        buf.reset(5);
        assert!(buf.is_empty());
        assert_eq!(buf.capacity(), 5);
    }

    #[test]
    fn zero_passes_is_identity() {
        let mut buf = ReplayBuffer::with_capacity(10);
        for i in 0..10 {
            buf.push(zeta(i)).unwrap();
        }
        let mut q = QTable::filled(4, 5, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        buffer_replay(&mut buf, &mut q, &uniform_policy(4, 5), 0, 0.1, 0.0, 0.9, &mut rng);
        assert_eq!(q, QTable::filled(4, 5, 10.0));
    }

    #[test]
    fn single_transition_equals_sequential_updates() {
        let pi = uniform_policy(4, 5);
        let mut buf = ReplayBuffer::with_capacity(1);
        buf.push(zeta(1)).unwrap();
        let mut q = QTable::filled(4, 5, 10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        buffer_replay(&mut buf, &mut q, &pi, 7, 0.1, 0.2, 0.9, &mut rng);

        let mut expected = QTable::filled(4, 5, 10.0);
        for _ in 0..7 {
            td_update(&mut expected, &zeta(1), &pi, 0.1, 0.2, 0.9);
        }
        assert_eq!(q, expected);
    }

    #[test]
    fn replay_is_deterministic_per_seed() {
        let pi = uniform_policy(4, 5);
        let run = |seed| {
            let mut buf = ReplayBuffer::with_capacity(50);
            for i in 0..50 {
                buf.push(zeta(i)).unwrap();
            }
            let mut q = QTable::filled(4, 5, 10.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            buffer_replay(&mut buf, &mut q, &pi, 20, 0.1, 0.0, 0.9, &mut rng);
            q
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn lag_window_needs_two_steps() {
        let mut w = LagWindow::default();
        assert!(w.latest_complete().is_none());
        w.record(3, 1, 0.5);
        assert!(w.latest_complete().is_none());
        w.record(4, 2, 0.25);
        assert_eq!(
            w.latest_complete(),
            Some(Transition {
                s: 3,
                a: 1,
                r: 0.5,
                s_next: 4,
                a_next: 2
            })
        );
        w.record(5, 0, 1.0);
        assert_eq!(w.latest_complete().unwrap().s, 4);
        w.clear();
        assert!(w.latest_complete().is_none());
    }
}
