use crate::error::{Error, Result};
use crate::types::{entropy_unchecked, Policy, QTable, Transition};

/// TD learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSchedule {
    Fixed(f64),
    /// `β_m = 2 / ((1 - γ)(t0 + m - 1))`.
    Theoretical { t0: f64 },
}

/// One stochastic TD step on entry `(s, a)` toward the regularised SARSA target
/// `r + h(π(s)) + γ Q(s', a')`.
pub fn td_update(
    q: &mut QTable,
    zeta: &Transition,
    pi: &Policy,
    beta: f64,
    lambda: f64,
    gamma: f64,
) {
    let old = q.get(zeta.s, zeta.a);
    let h = entropy_unchecked(pi.row(zeta.s), lambda);
    let target = zeta.r + h + gamma * q.get(zeta.s_next, zeta.a_next);
    q.set(zeta.s, zeta.a, old - beta * (old - target));
}

pub fn beta_at(schedule: BetaSchedule, m: usize, gamma: f64) -> Result<f64> {
    match schedule {
        BetaSchedule::Fixed(b) => Ok(b),
        BetaSchedule::Theoretical { t0 } => {
            let denom = t0 + m as f64 - 1.0;
            if !(denom > 0.0) {
                return Err(Error::invalid(format!(
                    "theoretical learning rate undefined: t0 + m - 1 = {denom}"
                )));
            }
            Ok(2.0 / ((1.0 - gamma) * denom))
        }
    }
}

/// `t0 = 16 (1 + γ)^2 / ((1 - γ) δ_mix p_inf)^2`.
pub fn t0_of(gamma: f64, delta_mix: f64, p_inf: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::range("gamma", format!("{gamma} is outside [0, 1)")));
    }
    let denom = (1.0 - gamma) * delta_mix * p_inf;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::invalid("t0 denominator is zero"));
    }
    Ok(16.0 * (1.0 + gamma).powi(2) / (denom * denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::uniform_policy;
    use proptest::prelude::*;

    fn zeta(r: f64) -> Transition {
        Transition {
            s: 0,
            a: 1,
            r,
            s_next: 1,
            a_next: 0,
        }
    }

    #[test]
    fn zero_rate_leaves_table() {
        let mut q = QTable::filled(2, 2, 3.0);
        let before = q.clone();
        td_update(&mut q, &zeta(1.0), &uniform_policy(2, 2), 0.0, 0.5, 0.9);
        assert_eq!(q, before);
    }

    #[test]
    fn bellman_fixed_point_is_stationary() {
        let mut q = QTable::filled(2, 2, 0.0);
        q.set(1, 0, 4.0);
        // 1 + 0 + 0.5 * 4
        q.set(0, 1, 3.0);
        let before = q.clone();
        td_update(&mut q, &zeta(1.0), &uniform_policy(2, 2), 0.3, 0.0, 0.5);
        assert_eq!(q, before);
    }

    #[test]
    fn hand_evaluated_step() {
        let mut q = QTable::filled(2, 2, 5.0);
        td_update(&mut q, &zeta(1.0), &uniform_policy(2, 2), 0.1, 0.0, 0.9);
        assert!((q.get(0, 1) - 5.05).abs() < 1e-12);
        // only (s, a) moved
        assert_eq!(q.get(0, 0), 5.0);
        assert_eq!(q.get(1, 0), 5.0);
        assert_eq!(q.get(1, 1), 5.0);
    }

    #[test]
    fn entropy_enters_target() {
        let mut q = QTable::filled(2, 2, 0.0);
        td_update(&mut q, &zeta(0.0), &uniform_policy(2, 2), 1.0, 1.0, 0.9);
        assert!((q.get(0, 1) - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_schedule_examples() {
        assert_eq!(beta_at(BetaSchedule::Fixed(0.1), 0, 0.9).unwrap(), 0.1);
        assert_eq!(beta_at(BetaSchedule::Fixed(0.1), 12345, 0.9).unwrap(), 0.1);
        let t0 = t0_of(0.9, 1.0, 1.0).unwrap();
        assert!((t0 - 5776.0).abs() < 1e-6);
        let b0 = beta_at(BetaSchedule::Theoretical { t0 }, 0, 0.9).unwrap();
        assert!((b0 - 2.0 / (0.1 * 5775.0)).abs() < 1e-15);
        assert!((b0 - 3.46e-3).abs() < 1e-5);
        assert!(beta_at(BetaSchedule::Theoretical { t0: 0.5 }, 0, 0.9).is_err());
        assert!((t0_of(0.0, 1.0, 1.0).unwrap() - 16.0).abs() < 1e-12);
        assert!(t0_of(0.9, 1.0, 0.5).unwrap() > t0);
        assert!(t0_of(0.9, 0.0, 1.0).is_err());
    }

    #[test]
    fn theoretical_rate_strictly_decreasing() {
        let s = BetaSchedule::Theoretical { t0: 16.0 };
        let rates: Vec<f64> = (0..100).map(|m| beta_at(s, m, 0.5).unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
    }

    proptest! {
        #[test]
        fn update_contracts_toward_target(
            old in -20.0f64..20.0, next in -20.0f64..20.0, r in 0.0f64..1.0,
            beta in 0.0001f64..1.0, gamma in 0.0f64..0.99,
        ) {
            let mut q = QTable::filled(2, 2, 0.0);
            q.set(0, 1, old);
            q.set(1, 0, next);
            let target = r + gamma * next;
            td_update(&mut q, &zeta(r), &uniform_policy(2, 2), beta, 0.0, gamma);
            let lhs = (q.get(0, 1) - target).abs();
            let rhs = (1.0 - beta) * (old - target).abs();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs));
        }
    }
}
