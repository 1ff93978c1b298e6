//! Treatment-allocation strategies: three baselines plus the adaptive
//! standard-deviation-proportional designs for non-Markov, time-varying
//! Markov and stationary Markov dynamics.

mod baselines;
mod mdp;
mod nmdp;
mod tmdp;

pub use baselines::{EpsilonGreedyDesign, HalfHalfDesign, RandomDesign};
pub use mdp::MdpDesign;
pub use nmdp::NmdpDesign;
pub use tmdp::TmdpDesign;

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord, Observation};

pub const DEFAULT_CLIP: f64 = 0.05;
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;
pub const DEFAULT_EPSILON: f64 = 0.1;

/// Where a day's allocation probability came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Deterministic schedule (burn-in or half-half); may be 0 or 1.
    BurnInDeterministic,
    /// Fitted adaptive probability, always inside [clip, 1-clip].
    Fitted,
}

/// Probability of assigning action 1 on a given day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationProbability {
    pub p1: f64,
    pub provenance: Provenance,
}

impl AllocationProbability {
    pub fn deterministic(action: Action) -> Self {
        AllocationProbability {
            p1: action.index() as f64,
            provenance: Provenance::BurnInDeterministic,
        }
    }

    pub fn fitted(p1: f64) -> Self {
        AllocationProbability { p1, provenance: Provenance::Fitted }
    }

    /// P(A_1 = a) under this allocation.
    pub fn prob_of(&self, a: Action) -> f64 {
        match a {
            Action::Treat => self.p1,
            Action::Control => 1.0 - self.p1,
        }
    }
}

/// The initial-probability rule: allocate proportionally to the per-arm
/// standard deviations, sigma1 / (sigma0 + sigma1), clipped away from {0,1}.
pub fn nmdp_allocation_probability(
    sigma1: f64,
    sigma0: f64,
    clip: f64,
) -> Result<AllocationProbability> {
    if sigma1 < 0.0 || sigma0 < 0.0 {
        return Err(Error::domain(format!(
            "standard deviations must be non-negative, got ({sigma1}, {sigma0})"
        )));
    }
    if !sigma1.is_finite() || !sigma0.is_finite() {
        return Err(Error::domain("non-finite standard deviation"));
    }
    let total = sigma0 + sigma1;
    let raw = if total == 0.0 { 0.5 } else { sigma1 / total };
    Ok(AllocationProbability::fitted(raw.clamp(clip, 1.0 - clip)))
}

/// A day's allocation decision as taken by a design.
#[derive(Debug, Clone, Copy)]
pub struct DayPlan {
    pub first_action: Action,
    pub probability: AllocationProbability,
    /// All actions of the day equal `first_action` (the design is in the
    /// constant-continuation class for this day).
    pub constant_within_day: bool,
}

/// A sequential allocation rule. Fitting only ever consumes episodes recorded
/// before the day being planned, so cross-fitting holds by construction.
pub trait DesignPolicy {
    fn name(&self) -> &'static str;

    /// Decide the first action of day `day` after seeing its initial
    /// observation. Called exactly once per day, in day order.
    fn plan_day(&mut self, day: usize, o1: &Observation, rng: &mut SimRng) -> Result<DayPlan>;

    /// Action for step t >= 2 of the current day. Only consulted when
    /// `plan_day` returned `constant_within_day: false`.
    fn step_action(&mut self, _t: usize, _obs: &Observation, _rng: &mut SimRng) -> Action {
        unreachable!("constant-within-day design never steps")
    }

    /// Feed back the completed episode so the design can refit.
    fn record_episode(&mut self, episode: &EpisodeRecord) -> Result<()>;

    /// Member of the restricted class after burn-in (constant within-day
    /// continuation).
    fn in_restricted_class(&self) -> bool;
}

/// Deterministic burn-in schedule shared by the adaptive designs: days
/// 1..=m0 run global treatment, days m0+1..=2*m0 global control.
pub(crate) fn burn_in_action(day: usize, m0: usize) -> Option<Action> {
    if day <= m0 {
        Some(Action::Treat)
    } else if day <= 2 * m0 {
        Some(Action::Control)
    } else {
        None
    }
}
