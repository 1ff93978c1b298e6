//! Environment contract, ground-truth accessors for oracle computations, and
//! the episode driver.

use crate::basis::FeatureMap;
use crate::designs::{DayPlan, DesignPolicy};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord, Observation};

/// A data-generating process. Environments are immutable after construction;
/// all per-episode mutation lives in `State`, owned by one replicate.
pub trait Environment {
    type State;

    fn horizon(&self) -> usize;

    /// Draw the initial observation and per-episode state.
    fn reset(&self, rng: &mut SimRng) -> (Self::State, Observation);

    /// One transition at step `t` (1-based): the reward for acting in the
    /// current observation and the next observation.
    fn step(
        &self,
        state: &mut Self::State,
        t: usize,
        current: &Observation,
        action: Action,
        rng: &mut SimRng,
    ) -> Result<(f64, Observation)>;

    /// Regression basis matching this environment's observation form.
    fn feature_map(&self) -> FeatureMap;
}

/// Conditioning argument for ground-truth queries: a bare observation (Markov
/// environments) or a full observation-action history prefix ending in the
/// current observation.
#[derive(Debug, Clone, Copy)]
pub enum Cond<'a> {
    Obs(&'a Observation),
    History { observations: &'a [Observation], actions: &'a [Action] },
}

impl<'a> Cond<'a> {
    pub fn current_observation(&self) -> &'a Observation {
        match self {
            Cond::Obs(o) => o,
            Cond::History { observations, .. } => observations.last().expect("non-empty history"),
        }
    }
}

/// Exact (or closed-form) quantities of a data-generating process, used by the
/// oracle and the acceptance suites. Environments without an exact route
/// return a capability error.
pub trait GroundTruth {
    /// ATE = T^-1 sum_t [E^1(R_t) - E^0(R_t)].
    fn true_ate(&self) -> Result<f64>;

    /// V_t^a: expected reward-to-go from step t under the global policy `a`.
    fn true_value_function(&self, a: Action, t: usize, cond: Cond) -> Result<f64>;

    /// Conditional variance of the temporal-difference error at step t under
    /// the global policy `a`.
    fn true_td_variance(&self, a: Action, t: usize, cond: Cond) -> Result<f64>;

    /// sigma_*^2(O_1, a): variance of the cumulative reward given the initial
    /// observation under the global policy `a`.
    fn cumulative_reward_variance(&self, a: Action, o1: &Observation) -> Result<f64>;

    /// sigma_{a*}^2 = sum_t E^a[sigma_t^2(O_t, a)].
    fn arm_td_variance_sum(&self, a: Action) -> Result<f64>;

    /// Var[V_1^1(O_1) - V_1^0(O_1)] over the initial law.
    fn init_value_gap_variance(&self) -> Result<f64>;
}

/// Drive one full day: reset, let the design pick actions, record everything
/// exactly as taken. The realized allocation probability is returned for the
/// estimator.
pub fn run_episode<E: Environment>(
    env: &E,
    design: &mut dyn DesignPolicy,
    day: usize,
    rng: &mut SimRng,
) -> Result<(EpisodeRecord, DayPlan)> {
    let horizon = env.horizon();
    let (mut state, o1) = env.reset(rng);
    let plan = design.plan_day(day, &o1, rng)?;

    let mut observations = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    observations.push(o1);

    for t in 1..=horizon {
        let action = if t == 1 || plan.constant_within_day {
            plan.first_action
        } else {
            design.step_action(t, observations.last().unwrap(), rng)
        };
        let current = observations.last().unwrap().clone();
        let (reward, next) = env.step(&mut state, t, &current, action, rng)?;
        actions.push(action);
        rewards.push(reward);
        observations.push(next);
    }

    let episode = EpisodeRecord { day_index: day, horizon, observations, actions, rewards };
    episode.validate()?;
    Ok((episode, plan))
}

/// Monte Carlo estimate of the ATE by running both global policies, used for
/// environments without an exact ground-truth route. Deterministic given the
/// seed.
pub fn monte_carlo_ate<E: Environment>(env: &E, episodes_per_arm: usize, seed: u64) -> f64 {
    let horizon = env.horizon();
    let mut arm_means = [0.0f64; 2];
    for (k, action) in [(0usize, Action::Control), (1, Action::Treat)] {
        let mut rng = SimRng::substream(seed, k as u64 + 1);
        let mut total = 0.0;
        for _ in 0..episodes_per_arm {
            let (mut state, mut obs) = env.reset(&mut rng);
            for t in 1..=horizon {
                let (r, next) = env
                    .step(&mut state, t, &obs, action, &mut rng)
                    .expect("global policy step within horizon");
                total += r;
                obs = next;
            }
        }
        arm_means[k] = total / (episodes_per_arm as f64 * horizon as f64);
    }
    arm_means[1] - arm_means[0]
}

/// Guard used by environments inside `step`.
pub fn check_horizon(t: usize, horizon: usize) -> Result<()> {
    if t == 0 || t > horizon {
        Err(Error::HorizonExceeded { t, horizon })
    } else {
        Ok(())
    }
}
