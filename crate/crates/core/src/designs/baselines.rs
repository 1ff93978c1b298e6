//! Non-adaptive reference designs: per-step uniform randomization, the
//! half-half global schedule, and a per-step epsilon-greedy rule on a
//! day-level Q estimate.

use crate::error::Result;
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord, Observation};

use super::{AllocationProbability, DayPlan, DesignPolicy};

/// P(A_{i,t} = 1) = 1/2 independently for every step of every day.
#[derive(Debug, Clone, Default)]
pub struct RandomDesign;

impl DesignPolicy for RandomDesign {
    fn name(&self) -> &'static str {
        "random"
    }

    fn plan_day(&mut self, _day: usize, _o1: &Observation, rng: &mut SimRng) -> Result<DayPlan> {
        let first = if rng.bernoulli(0.5) { Action::Treat } else { Action::Control };
        Ok(DayPlan {
            first_action: first,
            probability: AllocationProbability::fitted(0.5),
            constant_within_day: false,
        })
    }

    fn step_action(&mut self, _t: usize, _obs: &Observation, rng: &mut SimRng) -> Action {
        if rng.bernoulli(0.5) {
            Action::Treat
        } else {
            Action::Control
        }
    }

    fn record_episode(&mut self, _episode: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    fn in_restricted_class(&self) -> bool {
        false
    }
}

/// Global treatment for the first ceil(n/2) days, global control after.
#[derive(Debug, Clone)]
pub struct HalfHalfDesign {
    pub n: usize,
}

impl HalfHalfDesign {
    pub fn new(n: usize) -> Self {
        HalfHalfDesign { n }
    }

    pub fn action_for(&self, day: usize) -> Action {
        if day <= self.n.div_ceil(2) {
            Action::Treat
        } else {
            Action::Control
        }
    }
}

impl DesignPolicy for HalfHalfDesign {
    fn name(&self) -> &'static str {
        "half_half"
    }

    fn plan_day(&mut self, day: usize, _o1: &Observation, _rng: &mut SimRng) -> Result<DayPlan> {
        let action = self.action_for(day);
        Ok(DayPlan {
            first_action: action,
            probability: AllocationProbability::deterministic(action),
            constant_within_day: true,
        })
    }

    fn record_episode(&mut self, _episode: &EpisodeRecord) -> Result<()> {
        Ok(())
    }

    fn in_restricted_class(&self) -> bool {
        true
    }
}

/// Per-step epsilon-greedy on a day-level Q estimate. Q(a) is the running mean
/// of the per-day average reward over days whose majority action was a; while
/// either arm has no attributed day the rule falls back to a fair coin. Ties
/// break toward treatment.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyDesign {
    pub epsilon: f64,
    q_sum: [f64; 2],
    q_count: [usize; 2],
}

impl EpsilonGreedyDesign {
    pub fn new(epsilon: f64) -> Self {
        EpsilonGreedyDesign { epsilon, q_sum: [0.0; 2], q_count: [0; 2] }
    }

    fn greedy_arm(&self) -> Option<Action> {
        if self.q_count[0] == 0 || self.q_count[1] == 0 {
            return None;
        }
        let q0 = self.q_sum[0] / self.q_count[0] as f64;
        let q1 = self.q_sum[1] / self.q_count[1] as f64;
        Some(if q1 >= q0 { Action::Treat } else { Action::Control })
    }

    fn draw(&self, rng: &mut SimRng) -> Action {
        match self.greedy_arm() {
            None => {
                if rng.bernoulli(0.5) {
                    Action::Treat
                } else {
                    Action::Control
                }
            }
            Some(greedy) => {
                if rng.bernoulli(self.epsilon) {
                    if rng.bernoulli(0.5) {
                        Action::Treat
                    } else {
                        Action::Control
                    }
                } else {
                    greedy
                }
            }
        }
    }

    /// Marginal P(A = 1) for the next draw.
    fn treat_probability(&self) -> f64 {
        match self.greedy_arm() {
            None => 0.5,
            Some(greedy) => {
                let base = self.epsilon / 2.0;
                if greedy == Action::Treat {
                    1.0 - self.epsilon + base
                } else {
                    base
                }
            }
        }
    }
}

impl DesignPolicy for EpsilonGreedyDesign {
    fn name(&self) -> &'static str {
        "epsilon_greedy"
    }

    fn plan_day(&mut self, _day: usize, _o1: &Observation, rng: &mut SimRng) -> Result<DayPlan> {
        let p1 = self.treat_probability();
        let first = self.draw(rng);
        Ok(DayPlan {
            first_action: first,
            probability: AllocationProbability::fitted(p1),
            constant_within_day: false,
        })
    }

    fn step_action(&mut self, _t: usize, _obs: &Observation, rng: &mut SimRng) -> Action {
        self.draw(rng)
    }

    fn record_episode(&mut self, episode: &EpisodeRecord) -> Result<()> {
        let treats = episode.actions.iter().filter(|a| **a == Action::Treat).count();
        let majority = if 2 * treats >= episode.actions.len() {
            Action::Treat
        } else {
            Action::Control
        };
        let avg = episode.cumulative_reward() / episode.horizon as f64;
        self.q_sum[majority.index()] += avg;
        self.q_count[majority.index()] += 1;
        Ok(())
    }

    fn in_restricted_class(&self) -> bool {
        false
    }
}
