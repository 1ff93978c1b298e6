//! Adaptive design for non-Markov dynamics: after a deterministic burn-in it
//! assigns the day's constant action with probability proportional to the
//! fitted standard deviation of the cumulative reward given the initial
//! observation, refit every day on strictly prior days.

use crate::basis::{FeatureMap, LinearModel, RidgeAccumulator, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord, Observation};

use super::{
    burn_in_action, nmdp_allocation_probability, AllocationProbability, DayPlan, DesignPolicy,
};

/// Per-arm value and conditional-sd models over initial-observation features.
#[derive(Debug, Clone)]
pub struct SigmaFit {
    pub value: LinearModel,
    variance: LinearModel,
    floor: f64,
}

impl SigmaFit {
    pub fn value_at(&self, phi: &[f64]) -> f64 {
        self.value.predict(phi)
    }

    pub fn sigma_at(&self, phi: &[f64]) -> f64 {
        self.variance.predict(phi).max(self.floor * self.floor).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct NmdpDesign {
    pub m0: usize,
    pub clip: f64,
    pub sigma_floor: f64,
    feature_map: FeatureMap,
    /// (phi(O_1), cumulative reward) per arm, one row per recorded day.
    arm_rows: [Vec<(Vec<f64>, f64)>; 2],
    fit: Option<[SigmaFit; 2]>,
}

impl NmdpDesign {
    pub fn new(feature_map: FeatureMap, m0: usize, clip: f64, sigma_floor: f64) -> Result<Self> {
        if m0 < 2 {
            return Err(Error::domain(format!("burn-in m0 must be at least 2, got {m0}")));
        }
        if !(0.0 < clip && clip < 0.5) {
            return Err(Error::domain(format!("clip must lie in (0, 0.5), got {clip}")));
        }
        Ok(NmdpDesign {
            m0,
            clip,
            sigma_floor,
            feature_map,
            arm_rows: [Vec::new(), Vec::new()],
            fit: None,
        })
    }

    /// Least-squares fit of the cumulative reward on phi(O_1) per arm, then of
    /// the squared residuals on phi(O_1), over all recorded days.
    pub fn refit(&mut self) -> Result<()> {
        let mut fits = Vec::with_capacity(2);
        for rows in &self.arm_rows {
            if rows.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "need at least 2 days per arm to fit, got {}",
                    rows.len()
                )));
            }
            let dim = self.feature_map.len();
            let mut acc = RidgeAccumulator::new(dim);
            for (phi, y) in rows {
                acc.add(phi, *y);
            }
            let value = acc.solve(DEFAULT_RIDGE)?;
            let mut var_acc = RidgeAccumulator::new(dim);
            for (phi, y) in rows {
                let resid = y - value.predict(phi);
                var_acc.add(phi, resid * resid);
            }
            let variance = var_acc.solve(DEFAULT_RIDGE)?;
            fits.push(SigmaFit { value, variance, floor: self.sigma_floor });
        }
        let f1 = fits.pop().expect("two fits");
        let f0 = fits.pop().expect("two fits");
        self.fit = Some([f0, f1]);
        Ok(())
    }

    pub fn fitted(&self) -> Option<&[SigmaFit; 2]> {
        self.fit.as_ref()
    }

    /// The allocation the current fit implies at a given initial observation.
    pub fn allocation_at(&self, o1: &Observation) -> Result<AllocationProbability> {
        let fit = self
            .fit
            .as_ref()
            .ok_or_else(|| Error::State("allocation requested before any fit".into()))?;
        let phi = self.feature_map.features(o1);
        nmdp_allocation_probability(fit[1].sigma_at(&phi), fit[0].sigma_at(&phi), self.clip)
    }
}

impl DesignPolicy for NmdpDesign {
    fn name(&self) -> &'static str {
        "nmdp"
    }

    fn plan_day(&mut self, day: usize, o1: &Observation, rng: &mut SimRng) -> Result<DayPlan> {
        if let Some(action) = burn_in_action(day, self.m0) {
            return Ok(DayPlan {
                first_action: action,
                probability: AllocationProbability::deterministic(action),
                constant_within_day: true,
            });
        }
        self.refit()?;
        let probability = self.allocation_at(o1)?;
        let first_action = if rng.bernoulli(probability.p1) {
            Action::Treat
        } else {
            Action::Control
        };
        Ok(DayPlan { first_action, probability, constant_within_day: true })
    }

    fn record_episode(&mut self, episode: &EpisodeRecord) -> Result<()> {
        debug_assert!(episode.constant_actions());
        let phi = self.feature_map.features(episode.initial_observation());
        let arm = episode.first_action().index();
        self.arm_rows[arm].push((phi, episode.cumulative_reward()));
        Ok(())
    }

    fn in_restricted_class(&self) -> bool {
        true
    }
}
