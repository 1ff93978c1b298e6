//! Adaptive design for stationary Markov dynamics: one pooled value fit per
//! arm via least-squares TD with an average-reward offset, a scalar per-arm
//! variance from the stationary TD errors, and the same
//! standard-deviation-proportional day allocation as the other adaptive
//! designs.

use crate::basis::{FeatureMap, LinearModel, RidgeAccumulator, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord, Observation};

use super::{
    burn_in_action, nmdp_allocation_probability, AllocationProbability, DayPlan, DesignPolicy,
};

#[derive(Debug, Clone)]
struct ArmDay {
    /// phi(O_t) for t = 1..=T+1 (terminal observation required).
    features: Vec<Vec<f64>>,
    rewards: Vec<f64>,
}

/// Pooled stationary fit: solving rows [phi(O_t) - phi(O_{t+1}), 1] ~ R_t
/// gives value coefficients plus the average-reward offset eta.
#[derive(Debug, Clone)]
pub struct StationaryFit {
    model: LinearModel,
    dim: usize,
}

impl StationaryFit {
    pub fn value_at(&self, phi: &[f64]) -> f64 {
        self.model.beta[..self.dim]
            .iter()
            .zip(phi)
            .map(|(b, v)| b * v)
            .sum()
    }

    pub fn eta(&self) -> f64 {
        self.model.beta[self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct MdpDesign {
    pub m0: usize,
    pub clip: f64,
    pub sigma_floor: f64,
    feature_map: FeatureMap,
    arm_days: [Vec<ArmDay>; 2],
    sigmas: Option<[f64; 2]>,
}

impl MdpDesign {
    pub fn new(feature_map: FeatureMap, m0: usize, clip: f64, sigma_floor: f64) -> Result<Self> {
        if m0 < 2 {
            return Err(Error::domain(format!("burn-in m0 must be at least 2, got {m0}")));
        }
        if !(0.0 < clip && clip < 0.5) {
            return Err(Error::domain(format!("clip must lie in (0, 0.5), got {clip}")));
        }
        Ok(MdpDesign {
            m0,
            clip,
            sigma_floor,
            feature_map,
            arm_days: [Vec::new(), Vec::new()],
            sigmas: None,
        })
    }

    pub fn fitted_sigmas(&self) -> Option<[f64; 2]> {
        self.sigmas
    }

    pub fn refit(&mut self) -> Result<()> {
        let dim = self.feature_map.len();
        let mut sigmas = [0.0f64; 2];
        for arm in 0..2 {
            let days = &self.arm_days[arm];
            if days.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "need at least 2 days per arm to fit, got {}",
                    days.len()
                )));
            }
            let mut acc = RidgeAccumulator::new(dim + 1);
            let mut row = vec![0.0; dim + 1];
            for day in days {
                let t_max = day.rewards.len();
                for t in 1..=t_max {
                    for j in 0..dim {
                        row[j] = day.features[t - 1][j] - day.features[t][j];
                    }
                    row[dim] = 1.0;
                    acc.add(&row, day.rewards[t - 1]);
                }
            }
            let fit = StationaryFit { model: acc.solve(DEFAULT_RIDGE)?, dim };
            let mut total = 0.0;
            for day in days {
                let mut day_sum = 0.0;
                let t_max = day.rewards.len();
                for t in 1..=t_max {
                    let td = day.rewards[t - 1] - fit.eta() + fit.value_at(&day.features[t])
                        - fit.value_at(&day.features[t - 1]);
                    day_sum += td * td;
                }
                total += day_sum;
            }
            let var = (total / days.len() as f64).max(self.sigma_floor * self.sigma_floor);
            sigmas[arm] = var.sqrt();
        }
        self.sigmas = Some(sigmas);
        Ok(())
    }

    pub fn allocation(&self) -> Result<AllocationProbability> {
        let sigmas = self
            .sigmas
            .ok_or_else(|| Error::State("allocation requested before any fit".into()))?;
        nmdp_allocation_probability(sigmas[1], sigmas[0], self.clip)
    }
}

impl DesignPolicy for MdpDesign {
    fn name(&self) -> &'static str {
        "mdp"
    }

    fn plan_day(&mut self, day: usize, _o1: &Observation, rng: &mut SimRng) -> Result<DayPlan> {
        if let Some(action) = burn_in_action(day, self.m0) {
            return Ok(DayPlan {
                first_action: action,
                probability: AllocationProbability::deterministic(action),
                constant_within_day: true,
            });
        }
        self.refit()?;
        let probability = self.allocation()?;
        let first_action = if rng.bernoulli(probability.p1) {
            Action::Treat
        } else {
            Action::Control
        };
        Ok(DayPlan { first_action, probability, constant_within_day: true })
    }

    fn record_episode(&mut self, episode: &EpisodeRecord) -> Result<()> {
        debug_assert!(episode.constant_actions());
        if !episode.has_terminal_observation() {
            return Err(Error::domain(
                "stationary TD fit requires the terminal observation",
            ));
        }
        let features = episode
            .observations
            .iter()
            .map(|o| self.feature_map.features(o))
            .collect();
        self.arm_days[episode.first_action().index()]
            .push(ArmDay { features, rewards: episode.rewards.clone() });
        Ok(())
    }

    fn in_restricted_class(&self) -> bool {
        true
    }
}
