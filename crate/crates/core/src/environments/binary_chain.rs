//! Binary-observation process: the next observation lands on 1 with
//! probability p_s under treatment and 1 - p_s under control, independent of
//! the current observation. The treatment arm's reward noise is inflated by
//! delta, which controls the arm-variance imbalance the adaptive designs
//! exploit.

use crate::basis::FeatureMap;
use crate::env::{check_horizon, Cond, Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Observation};

#[derive(Debug, Clone)]
pub struct BinaryChainEnv {
    pub p_s: f64,
    pub delta: f64,
    pub horizon: usize,
    /// Reward mean mu[o][a].
    pub mu: [[f64; 2]; 2],
    /// Base reward noise sd; arm 1 uses s0 + delta.
    pub s0: f64,
    /// P(O_1 = 1).
    pub p_init: f64,
}

impl BinaryChainEnv {
    pub fn new(p_s: f64, delta: f64, horizon: usize) -> Result<Self> {
        if !(0.0 < p_s && p_s < 1.0) {
            return Err(Error::domain(format!("p_s must lie in (0,1), got {p_s}")));
        }
        if delta < 0.0 {
            return Err(Error::domain(format!("delta must be non-negative, got {delta}")));
        }
        Ok(BinaryChainEnv {
            p_s,
            delta,
            horizon,
            mu: [[1.0, 2.0], [2.0, 3.0]], // mu(o,0) = 1 + o, mu(o,1) = 2 + o
            s0: 1.0,
            p_init: 0.5,
        })
    }

    /// Marginal P(O_{t+1} = 1 | A_t = a).
    pub fn next_obs_prob(&self, a: Action) -> f64 {
        match a {
            Action::Treat => self.p_s,
            Action::Control => 1.0 - self.p_s,
        }
    }

    pub fn reward_sd(&self, a: Action) -> f64 {
        self.s0 + self.delta * a.index() as f64
    }

    /// E[mu(O, a)] with O drawn from the post-burn-in marginal under arm a.
    fn stationary_mean(&self, a: Action) -> f64 {
        let q = self.next_obs_prob(a);
        (1.0 - q) * self.mu[0][a.index()] + q * self.mu[1][a.index()]
    }

    fn initial_mean(&self, a: Action) -> f64 {
        (1.0 - self.p_init) * self.mu[0][a.index()] + self.p_init * self.mu[1][a.index()]
    }

    fn mu_gap(&self, a: Action) -> f64 {
        self.mu[1][a.index()] - self.mu[0][a.index()]
    }

    fn value_at(&self, a: Action, t: usize, o: usize) -> f64 {
        self.mu[o][a.index()] + (self.horizon - t) as f64 * self.stationary_mean(a)
    }

    fn td_variance_at(&self, a: Action, t: usize) -> f64 {
        // O_2, ..., O_T are i.i.d. given the arm, so the TD variance splits
        // into reward noise plus the next-observation value spread.
        let sd = self.reward_sd(a);
        let mut var = sd * sd;
        if t < self.horizon {
            let q = self.next_obs_prob(a);
            let gap = self.mu_gap(a);
            var += q * (1.0 - q) * gap * gap;
        }
        var
    }
}

impl Environment for BinaryChainEnv {
    type State = ();

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, rng: &mut SimRng) -> ((), Observation) {
        ((), Observation::Discrete(usize::from(rng.bernoulli(self.p_init))))
    }

    fn step(
        &self,
        _state: &mut (),
        t: usize,
        current: &Observation,
        action: Action,
        rng: &mut SimRng,
    ) -> Result<(f64, Observation)> {
        check_horizon(t, self.horizon)?;
        let o = current.as_discrete().expect("binary chain observation");
        let reward = rng.normal(self.mu[o][action.index()], self.reward_sd(action));
        let next = usize::from(rng.bernoulli(self.next_obs_prob(action)));
        Ok((reward, Observation::Discrete(next)))
    }

    fn feature_map(&self) -> FeatureMap {
        FeatureMap::OneHot { cardinality: 2 }
    }
}

impl GroundTruth for BinaryChainEnv {
    fn true_ate(&self) -> Result<f64> {
        let per_arm = |a: Action| {
            self.initial_mean(a) + (self.horizon - 1) as f64 * self.stationary_mean(a)
        };
        Ok((per_arm(Action::Treat) - per_arm(Action::Control)) / self.horizon as f64)
    }

    fn true_value_function(&self, a: Action, t: usize, cond: Cond) -> Result<f64> {
        check_horizon(t, self.horizon)?;
        let o = cond
            .current_observation()
            .as_discrete()
            .ok_or_else(|| Error::Capability("binary chain expects discrete conditioning".into()))?;
        Ok(self.value_at(a, t, o))
    }

    fn true_td_variance(&self, a: Action, t: usize, _cond: Cond) -> Result<f64> {
        check_horizon(t, self.horizon)?;
        Ok(self.td_variance_at(a, t))
    }

    fn cumulative_reward_variance(&self, a: Action, _o1: &Observation) -> Result<f64> {
        // Independent of O_1: transitions do not depend on the current state.
        let sd = self.reward_sd(a);
        let q = self.next_obs_prob(a);
        let gap = self.mu_gap(a);
        let t = self.horizon as f64;
        Ok(t * sd * sd + (t - 1.0) * q * (1.0 - q) * gap * gap)
    }

    fn arm_td_variance_sum(&self, a: Action) -> Result<f64> {
        Ok((1..=self.horizon).map(|t| self.td_variance_at(a, t)).sum())
    }

    fn init_value_gap_variance(&self) -> Result<f64> {
        let gap_at = |o: usize| self.value_at(Action::Treat, 1, o) - self.value_at(Action::Control, 1, o);
        let d = gap_at(1) - gap_at(0);
        Ok(self.p_init * (1.0 - self.p_init) * d * d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_initial_law_is_point_mass() {
        let mut env = BinaryChainEnv::new(0.8, 0.0, 5).unwrap();
        env.p_init = 1.0;
        let mut rng = SimRng::new(3);
        for _ in 0..20 {
            let (_, o1) = env.reset(&mut rng);
            assert_eq!(o1, Observation::Discrete(1));
        }
    }

    #[test]
    fn initial_frequency_matches_half() {
        let env = BinaryChainEnv::new(0.8, 0.0, 5).unwrap();
        let mut rng = SimRng::new(11);
        let n = 100_000;
        let ones: usize = (0..n)
            .filter(|_| env.reset(&mut rng).1 == Observation::Discrete(1))
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn transition_frequency_matches_p_s() {
        let env = BinaryChainEnv::new(0.8, 0.0, 5).unwrap();
        let mut rng = SimRng::new(5);
        let n = 100_000;
        let mut ones = 0usize;
        for _ in 0..n {
            let (_, next) = env
                .step(&mut (), 1, &Observation::Discrete(0), Action::Treat, &mut rng)
                .unwrap();
            ones += next.as_discrete().unwrap();
        }
        assert!((ones as f64 / n as f64 - 0.8).abs() < 0.01);
    }

    #[test]
    fn zero_noise_rewards_are_deterministic() {
        let mut env = BinaryChainEnv::new(0.8, 0.0, 5).unwrap();
        env.s0 = 0.0;
        let mut rng = SimRng::new(5);
        for _ in 0..10 {
            let (r, _) = env
                .step(&mut (), 2, &Observation::Discrete(1), Action::Control, &mut rng)
                .unwrap();
            assert_eq!(r, env.mu[1][0]);
        }
    }

    #[test]
    fn step_beyond_horizon_errors() {
        let env = BinaryChainEnv::new(0.8, 0.0, 5).unwrap();
        let mut rng = SimRng::new(5);
        let err = env
            .step(&mut (), 6, &Observation::Discrete(0), Action::Treat, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::HorizonExceeded { t: 6, horizon: 5 }));
    }

    #[test]
    fn identical_arms_give_zero_ate() {
        // equal reward means and symmetric transitions (p_s = 0.5)
        let mut env = BinaryChainEnv::new(0.5, 0.0, 10).unwrap();
        env.mu = [[1.0, 1.0], [2.0, 2.0]];
        assert!(env.true_ate().unwrap().abs() < 1e-12);
    }

    #[test]
    fn action_only_means_give_unit_ate() {
        let mut env = BinaryChainEnv::new(0.8, 0.0, 10).unwrap();
        env.mu = [[0.0, 1.0], [0.0, 1.0]]; // mu(o, a) = a
        assert!((env.true_ate().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn terminal_value_is_reward_mean() {
        let env = BinaryChainEnv::new(0.8, 3.0, 7).unwrap();
        let o = Observation::Discrete(1);
        let v = env.true_value_function(Action::Treat, 7, Cond::Obs(&o)).unwrap();
        assert_eq!(v, env.mu[1][1]);
    }

    #[test]
    fn td_variance_is_reward_variance_when_means_flat() {
        let mut env = BinaryChainEnv::new(0.8, 2.0, 7).unwrap();
        env.mu = [[1.0, 2.0], [1.0, 2.0]]; // no O_t dependence
        let o = Observation::Discrete(0);
        let v = env.true_td_variance(Action::Treat, 3, Cond::Obs(&o)).unwrap();
        assert!((v - 9.0).abs() < 1e-12); // (s0 + delta)^2
    }

    #[test]
    fn value_gap_mean_recovers_ate() {
        let env = BinaryChainEnv::new(0.7, 4.0, 12).unwrap();
        let mean_gap: f64 = [0usize, 1]
            .iter()
            .map(|&o| {
                let w = if o == 1 { env.p_init } else { 1.0 - env.p_init };
                let obs = Observation::Discrete(o);
                w * (env.true_value_function(Action::Treat, 1, Cond::Obs(&obs)).unwrap()
                    - env.true_value_function(Action::Control, 1, Cond::Obs(&obs)).unwrap())
            })
            .sum();
        assert!((mean_gap / 12.0 - env.true_ate().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn td_variance_sum_matches_cumulative_variance() {
        // Law of total variance: the per-step TD variances telescope to the
        // cumulative-reward variance.
        let env = BinaryChainEnv::new(0.8, 3.0, 9).unwrap();
        for a in [Action::Control, Action::Treat] {
            let sum = env.arm_td_variance_sum(a).unwrap();
            let cum = env
                .cumulative_reward_variance(a, &Observation::Discrete(0))
                .unwrap();
            assert!((sum - cum).abs() < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_ate_agrees_with_closed_form() {
        let env = BinaryChainEnv::new(0.8, 3.0, 10).unwrap();
        let mc = crate::env::monte_carlo_ate(&env, 40_000, 99);
        assert!((mc - env.true_ate().unwrap()).abs() < 0.03);
    }
}
