//! Adaptive design for time-varying Markov dynamics: per-(step, arm)
//! reward-to-go regressions give value fits, temporal-difference errors give a
//! scalar per-arm variance, and the day's constant action is drawn with
//! probability proportional to the per-arm standard deviations. Unlike the
//! non-Markov design the allocation does not depend on the initial
//! observation.

use crate::basis::{FeatureMap, LinearModel, RidgeAccumulator, DEFAULT_RIDGE};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord, Observation};

use super::{
    burn_in_action, nmdp_allocation_probability, AllocationProbability, DayPlan, DesignPolicy,
};

/// One recorded day, featurized once at record time.
#[derive(Debug, Clone)]
struct ArmDay {
    /// phi(O_t) for t = 1..=T, plus phi(O_{T+1}) when recorded.
    features: Vec<Vec<f64>>,
    rewards: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TmdpDesign {
    pub m0: usize,
    pub clip: f64,
    pub sigma_floor: f64,
    feature_map: FeatureMap,
    horizon: usize,
    arm_days: [Vec<ArmDay>; 2],
    sigmas: Option<[f64; 2]>,
}

impl TmdpDesign {
    pub fn new(
        feature_map: FeatureMap,
        horizon: usize,
        m0: usize,
        clip: f64,
        sigma_floor: f64,
    ) -> Result<Self> {
        if m0 < 2 {
            return Err(Error::domain(format!("burn-in m0 must be at least 2, got {m0}")));
        }
        if !(0.0 < clip && clip < 0.5) {
            return Err(Error::domain(format!("clip must lie in (0, 0.5), got {clip}")));
        }
        Ok(TmdpDesign {
            m0,
            clip,
            sigma_floor,
            feature_map,
            horizon,
            arm_days: [Vec::new(), Vec::new()],
            sigmas: None,
        })
    }

    /// Fitted per-arm standard deviations sigma_hat_{a*}, if any fit exists.
    pub fn fitted_sigmas(&self) -> Option<[f64; 2]> {
        self.sigmas
    }

    /// Per-arm: fit V_t by regressing the reward-to-go on phi(O_t) for each t,
    /// then average the day-level sums of squared TD errors. V_{T+1} = 0.
    pub fn refit(&mut self) -> Result<()> {
        let t_max = self.horizon;
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
            // value fits indexed 1..=T; entry T+1 stays None (zero value)
            let mut fits: Vec<Option<LinearModel>> = vec![None; t_max + 2];
            for t in 1..=t_max {
                let mut acc = RidgeAccumulator::new(dim);
                for day in days {
                    let rtg: f64 = day.rewards[t - 1..].iter().sum();
                    acc.add(&day.features[t - 1], rtg);
                }
                fits[t] = Some(acc.solve(DEFAULT_RIDGE)?);
            }
            let predict = |fits: &[Option<LinearModel>], t: usize, phi: &[f64]| -> f64 {
                fits[t].as_ref().map_or(0.0, |m| m.predict(phi))
            };
            let mut total = 0.0;
            for day in days {
                let mut day_sum = 0.0;
                for t in 1..=t_max {
                    let v_here = predict(&fits, t, &day.features[t - 1]);
                    let v_next = if t < t_max || day.features.len() > t_max {
                        predict(&fits, t + 1, &day.features[t])
                    } else {
                        0.0
                    };
                    let td = day.rewards[t - 1] + v_next - v_here;
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

impl DesignPolicy for TmdpDesign {
    fn name(&self) -> &'static str {
        "tmdp"
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
        debug_assert_eq!(episode.horizon, self.horizon);
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

#[cfg(test)]
mod tests {
    use super::*;

    fn day(idx: usize, action: Action, rewards: Vec<f64>) -> EpisodeRecord {
        let t = rewards.len();
        EpisodeRecord {
            day_index: idx,
            horizon: t,
            observations: vec![Observation::Discrete(0); t + 1],
            actions: vec![action; t],
            rewards,
        }
    }

    fn design(t: usize) -> TmdpDesign {
        TmdpDesign::new(FeatureMap::OneHot { cardinality: 2 }, t, 2, 0.05, 1e-3).unwrap()
    }

    #[test]
    fn noiseless_days_hit_sigma_floor() {
        let mut d = design(3);
        for i in 1..=2 {
            d.record_episode(&day(i, Action::Treat, vec![1.0, 1.0, 1.0])).unwrap();
            d.record_episode(&day(i + 2, Action::Control, vec![0.5, 0.5, 0.5])).unwrap();
        }
        d.refit().unwrap();
        let s = d.fitted_sigmas().unwrap();
        assert!((s[0] - 1e-3).abs() < 1e-9);
        assert!((s[1] - 1e-3).abs() < 1e-9);
        assert!((d.allocation().unwrap().p1 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn horizon_one_matches_cumulative_variance_about_mean() {
        // T = 1: the TD error is the residual about the fitted mean, so
        // sigma^2 equals the (biased) sample variance of the day totals.
        let mut d = design(1);
        let ys = [1.0f64, 3.0, 5.0, 7.0];
        for (i, y) in ys.iter().enumerate() {
            d.record_episode(&day(i + 1, Action::Treat, vec![*y])).unwrap();
        }
        d.record_episode(&day(5, Action::Control, vec![2.0])).unwrap();
        d.record_episode(&day(6, Action::Control, vec![2.0])).unwrap();
        d.refit().unwrap();
        let mean = ys.iter().sum::<f64>() / 4.0;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / 4.0;
        let s = d.fitted_sigmas().unwrap();
        assert!((s[1] * s[1] - var).abs() < 1e-6, "got {}", s[1] * s[1]);
    }

    #[test]
    fn unequal_td_noise_shifts_allocation_toward_noisy_arm() {
        let mut d = design(2);
        let mut idx = 0;
        for &r in &[0.0f64, 8.0, 0.0, 8.0] {
            idx += 1;
            d.record_episode(&day(idx, Action::Treat, vec![r, r])).unwrap();
        }
        for &r in &[1.0f64, 2.0, 1.0, 2.0] {
            idx += 1;
            d.record_episode(&day(idx, Action::Control, vec![r, r])).unwrap();
        }
        d.refit().unwrap();
        let p = d.allocation().unwrap();
        assert!(p.p1 > 0.7, "p1={}", p.p1);
    }

    #[test]
    fn burn_in_then_state_error_without_data() {
        let mut d = design(2);
        let mut rng = SimRng::new(2);
        let o = Observation::Discrete(1);
        assert_eq!(d.plan_day(1, &o, &mut rng).unwrap().first_action, Action::Treat);
        assert_eq!(d.plan_day(3, &o, &mut rng).unwrap().first_action, Action::Control);
        assert!(d.plan_day(5, &o, &mut rng).is_err());
    }
}
