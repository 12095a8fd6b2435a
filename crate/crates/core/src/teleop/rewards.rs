//! Shaped per-component rewards for the restoration and arbitration agents.
//!
//! Both agents use the same three-level shape on the magnitude of each
//! error component: a linear penalty above 0.1, a small bonus inside
//! (0.01, 0.1], and the full bonus of 10 at or below 0.01.

pub const PENALTY_THRESHOLD: f64 = 0.1;
pub const BONUS_THRESHOLD: f64 = 0.01;
pub const MAX_REWARD: f64 = 10.0;

pub fn shaped_reward(e: f64) -> f64 {
    let e = e.abs();
    if e > PENALTY_THRESHOLD {
        -10.0 * e
    } else if e > BONUS_THRESHOLD {
        2.0
    } else {
        MAX_REWARD
    }
}

/// Restoration reward on `X_mc − X_mf`.
pub fn reward_r1(e: &[f64]) -> Vec<f64> {
    e.iter().map(|&v| shaped_reward(v)).collect()
}

/// Arbitration reward on `X_sc − X_ref`.
pub fn reward_r2(e: &[f64]) -> Vec<f64> {
    e.iter().map(|&v| shaped_reward(v)).collect()
}

/// Scalar reward handed to an agent: the mean over components.
pub fn mean_reward(components: &[f64]) -> f64 {
    components.iter().sum::<f64>() / components.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn branch_values() {
        assert_eq!(reward_r1(&[0.0, 0.05, -0.2]), vec![10.0, 2.0, -2.0]);
        assert_eq!(reward_r2(&[0.15, 0.005, 0.01]), vec![-1.5, 10.0, 10.0]);
        assert_eq!(shaped_reward(0.1), 2.0);
        assert_eq!(shaped_reward(-0.05), 2.0);
    }

    proptest! {
        #[test]
        fn bounded_and_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let (ra, rb) = (shaped_reward(a), shaped_reward(b));
            prop_assert!(ra <= MAX_REWARD && rb <= MAX_REWARD);
            if a.abs() <= b.abs() {
                prop_assert!(ra >= rb);
            }
        }
    }
}
