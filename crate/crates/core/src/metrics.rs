//! Evaluation metrics, the per-trial log, and cross-trial aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::orchestrator::{Engine, Learners, RunState, Scenario};
use crate::types::{Algorithm, Policy};

/// Recorded metric names. Variant order is the row order within one `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Exploitability,
    AvgReturn,
    PolicyDivergence,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Exploitability, Metric::AvgReturn, Metric::PolicyDivergence];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Exploitability => "exploitability",
            Metric::AvgReturn => "avg_return",
            Metric::PolicyDivergence => "policy_divergence",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric '{s}'")))
    }
}

/// Metric rows of one trial, at most one per `(k, metric)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub seed: u64,
    pub digest: String,
    rows: BTreeMap<(usize, Metric), f64>,
}

impl RunLog {
    pub fn new(seed: u64, digest: impl Into<String>) -> Self {
        Self {
            seed,
            digest: digest.into(),
            rows: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, k: usize, metric: Metric, value: f64) -> Result<()> {
        if self.rows.insert((k, metric), value).is_some() {
            return Err(Error::invalid(format!("duplicate {metric} at k = {k}")));
        }
        Ok(())
    }

    pub fn get(&self, k: usize, metric: Metric) -> Option<f64> {
        self.rows.get(&(k, metric)).copied()
    }

    /// Rows sorted by `k`, then metric.
    pub fn rows(&self) -> impl Iterator<Item = (usize, Metric, f64)> + '_ {
        self.rows.iter().map(|(&(k, m), &v)| (k, m, v))
    }

    /// `(k, value)` pairs for one metric, ascending in `k`.
    pub fn series(&self, metric: Metric) -> Vec<(usize, f64)> {
        self.rows().filter(|r| r.1 == metric).map(|(k, _, v)| (k, v)).collect()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Mean over agents of the sup-over-states L1 distance to agent 0's policy.
pub fn policy_divergence(policies: &[Policy]) -> Result<f64> {
    let reference = policies
        .first()
        .ok_or_else(|| Error::invalid("policy divergence of an empty population"))?;
    let mut total = 0.0;
    for p in policies {
        if p.n_states() != reference.n_states() || p.n_actions() != reference.n_actions() {
            return Err(Error::invalid("policies over different spaces"));
        }
        let sup = (0..p.n_states())
            .map(|s| {
                p.row(s)
                    .iter()
                    .zip(reference.row(s))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        total += sup;
    }
    Ok(total / policies.len() as f64)
}

pub fn average_return(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(Error::invalid("average return of an empty population"));
    }
    Ok(returns.iter().sum::<f64>() / returns.len() as f64)
}

/// Best-response probe on a fork of `run`: agent 0 alone runs `loops`
/// learning iterations against the frozen population. Returns the best
/// per-loop return of agent 0 minus the mean per-loop return of the others.
/// With a single agent the baseline is its own return in the first loop,
/// before any improvement.
pub fn exploitability_approx(run: &RunState, loops: usize, sc: &Scenario) -> Result<f64> {
    if loops == 0 {
        return Err(Error::range("exploitability_loops", "must be at least 1"));
    }
    let mut fork = run.clone();
    let mut engine = Engine::new(sc, &mut fork)?;
    let deviator = Learners::Only(0);
    let mut best = f64::NEG_INFINITY;
    let mut others_total = 0.0;
    let mut first = None;
    for _ in 0..loops {
        let returns = engine.sample_phase(deviator)?;
        best = best.max(returns[0]);
        first.get_or_insert(returns[0]);
        if returns.len() > 1 {
            others_total += average_return(&returns[1..])?;
        }
        if sc.hp.algorithm == Algorithm::Replay {
            engine.replay_phase(deviator);
        }
        engine.policy_update(deviator, &[]);
    }
    let baseline = if run.n_agents() > 1 {
        others_total / loops as f64
    } else {
        first.unwrap_or(0.0)
    };
    Ok(best - baseline)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub k: usize,
    pub metric: Metric,
    pub mean: f64,
    /// Population standard deviation (divisor = `n_trials`).
    pub std: f64,
    pub n_trials: usize,
}

/// Per `(k, metric)` mean and population std across trials. Keys missing
/// from some trials aggregate over the trials that have them.
pub fn aggregate_trials(logs: &[RunLog]) -> Result<Vec<AggregateRow>> {
    let Some(first) = logs.first() else {
        return Err(Error::invalid("no trials to aggregate"));
    };
    if let Some(other) = logs.iter().find(|l| l.digest != first.digest) {
        return Err(Error::MismatchedConfig {
            expected: first.digest.clone(),
            found: other.digest.clone(),
        });
    }
    let mut grouped: BTreeMap<(usize, Metric), Vec<f64>> = BTreeMap::new();
    // fixed trial order keeps the float sums independent of input order
    let mut ordered: Vec<&RunLog> = logs.iter().collect();
    ordered.sort_by_key(|l| l.seed);
    for log in ordered {
        for (k, m, v) in log.rows() {
            grouped.entry((k, m)).or_default().push(v);
        }
    }
    Ok(grouped
        .into_iter()
        .map(|((k, metric), values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            AggregateRow {
                k,
                metric,
                mean,
                std: var.sqrt(),
                n_trials: values.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::GameKind;
    use crate::types::{uniform_policy, GridSpec, Hyperparams};
    use proptest::prelude::*;

    fn one_hot(n_states: usize, state: usize, action: usize) -> Policy {
        let mut p = uniform_policy(n_states, 5);
        let mut row = vec![0.0; 5];
        row[action] = 1.0;
        p.set_row(state, &row);
        p
    }

    #[test]
    fn divergence_examples() {
        let p = uniform_policy(4, 5);
        assert_eq!(policy_divergence(&[p.clone(), p.clone(), p]).unwrap(), 0.0);
        // one-hot on different actions at one state: sup-L1 distance 2
        let a = one_hot(4, 2, 0);
        let b = one_hot(4, 2, 3);
        assert!((policy_divergence(&[a, b]).unwrap() - 1.0).abs() < 1e-15);
        assert!(policy_divergence(&[]).is_err());
    }

    #[test]
    fn divergence_ignores_order_after_reference() {
        let ps = [one_hot(3, 0, 0), one_hot(3, 1, 2), uniform_policy(3, 5), one_hot(3, 2, 4)];
        let mut swapped = ps.clone();
        swapped.swap(1, 3);
        assert_eq!(policy_divergence(&ps).unwrap(), policy_divergence(&swapped).unwrap());
    }

    #[test]
    fn average_return_examples() {
        assert_eq!(average_return(&[0.0; 4]).unwrap(), 0.0);
        assert_eq!(average_return(&[2.5; 3]).unwrap(), 2.5);
        let geometric = 1.0 + 0.9 + 0.81;
        assert!((average_return(&[geometric]).unwrap() - 2.71).abs() < 1e-12);
        assert!(average_return(&[]).is_err());
    }

    #[test]
    fn log_rejects_duplicates_and_sorts() {
        let mut log = RunLog::new(1, "d");
        log.record(2, Metric::PolicyDivergence, 0.1).unwrap();
        log.record(0, Metric::AvgReturn, 0.5).unwrap();
        log.record(0, Metric::Exploitability, 0.2).unwrap();
        assert!(log.record(0, Metric::AvgReturn, 0.7).is_err());
        let keys: Vec<_> = log.rows().map(|(k, m, _)| (k, m)).collect();
        assert_eq!(
            keys,
            vec![(0, Metric::Exploitability), (0, Metric::AvgReturn), (2, Metric::PolicyDivergence)]
        );
        assert_eq!("avg_return".parse::<Metric>().unwrap(), Metric::AvgReturn);
        assert!("return".parse::<Metric>().is_err());
    }

    #[test]
    fn aggregate_examples() {
        let mut a = RunLog::new(0, "x");
        let mut b = RunLog::new(1, "x");
        a.record(0, Metric::AvgReturn, 1.0).unwrap();
        b.record(0, Metric::AvgReturn, 3.0).unwrap();
        let rows = aggregate_trials(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].mean, rows[0].std, rows[0].n_trials), (2.0, 1.0, 2));

        let single = aggregate_trials(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single[0].std, 0.0);

        let c = RunLog::new(2, "y");
        assert!(matches!(aggregate_trials(&[a, c]), Err(Error::MismatchedConfig { .. })));
        assert!(aggregate_trials(&[]).is_err());
    }

    fn probe_scenario(width: usize, height: usize, n_agents: usize) -> Scenario {
        let hp = Hyperparams {
            n_agents,
            m_pg: 30,
            l: 5,
            e: 5,
            ..Hyperparams::default()
        };
        Scenario::new(hp, GameKind::Cluster, GridSpec::new(width, height).unwrap()).unwrap()
    }

    #[test]
    fn probe_on_single_cell_is_zero() {
        let sc = probe_scenario(1, 1, 5);
        let run = RunState::initial(&sc, 4);
        let value = exploitability_approx(&run, 3, &sc).unwrap();
        assert!(value.abs() < 1e-12);
    }

    #[test]
    fn probe_leaves_run_untouched_and_is_deterministic() {
        let sc = probe_scenario(2, 2, 4);
        let run = RunState::initial(&sc, 11);
        let before = run.clone();
        let a = exploitability_approx(&run, 10, &sc).unwrap();
        let b = exploitability_approx(&run, 10, &sc).unwrap();
        assert_eq!(run, before);
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(exploitability_approx(&run, 0, &sc).is_err());
    }

    #[test]
    fn probe_against_uniform_crowd_is_nonnegative() {
        // uniform population on 2x2: the deviator can only gain by learning
        let sc = probe_scenario(2, 2, 4);
        let mean: f64 = (0..8)
            .map(|seed| exploitability_approx(&RunState::initial(&sc, seed), 10, &sc).unwrap())
            .sum::<f64>()
            / 8.0;
        assert!(mean >= 0.0, "mean probe value {mean}");
    }

    #[test]
    fn probe_bounded_below() {
        let sc = probe_scenario(3, 3, 6);
        let horizon = sc.hp.m_pg as f64;
        let value = exploitability_approx(&RunState::initial(&sc, 2), 4, &sc).unwrap();
        assert!(value >= -horizon);
    }

    fn arb_policy(n_states: usize) -> impl Strategy<Value = Policy> {
        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 5), n_states).prop_map(
            move |rows| {
                let mut p = uniform_policy(n_states, 5);
                for (s, row) in rows.iter().enumerate() {
                    p.set_row(s, row);
                }
                p
            },
        )
    }

    proptest! {
        #[test]
        fn divergence_zero_iff_equal(ps in proptest::collection::vec(arb_policy(3), 1..6)) {
            let d = policy_divergence(&ps).unwrap();
            prop_assert!(d >= 0.0);
            let all_equal = ps.iter().all(|p| {
                p.as_slice().iter().zip(ps[0].as_slice()).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            prop_assert_eq!(d <= 1e-12, all_equal);
        }

        #[test]
        fn aggregate_is_order_invariant(values in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
            let logs: Vec<RunLog> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let mut l = RunLog::new(i as u64, "d");
                    l.record(0, Metric::AvgReturn, v).unwrap();
                    l
                })
                .collect();
            let mut reversed = logs.clone();
            reversed.reverse();
            prop_assert_eq!(aggregate_trials(&logs).unwrap(), aggregate_trials(&reversed).unwrap());
        }
    }
}
