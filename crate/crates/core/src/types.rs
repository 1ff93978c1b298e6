//! Domain types shared by every other module: observations, actions and
//! per-day episode bookkeeping.

use crate::error::{Error, Result};

/// A market observation: either an index into a finite observation space or a
/// fixed-length real vector. The form is fixed per environment.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Observation {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            Observation::Discrete(i) => Some(*i),
            Observation::Continuous(_) => None,
        }
    }

    pub fn as_slice(&self) -> Option<&[f64]> {
        match self {
            Observation::Discrete(_) => None,
            Observation::Continuous(v) => Some(v),
        }
    }
}

/// Binary treatment: 1 applies the new policy, 0 the control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Control,
    Treat,
}

pub const ARMS: [Action; 2] = [Action::Control, Action::Treat];

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Control => 0,
            Action::Treat => 1,
        }
    }

    pub fn from_index(i: usize) -> Action {
        if i == 0 {
            Action::Control
        } else {
            Action::Treat
        }
    }

    pub fn other(self) -> Action {
        match self {
            Action::Control => Action::Treat,
            Action::Treat => Action::Control,
        }
    }
}

/// One day's trajectory of horizon T. `observations` holds T+1 entries when
/// the environment emits the terminal observation, T otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub day_index: usize,
    pub horizon: usize,
    pub observations: Vec<Observation>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
}

impl EpisodeRecord {
    pub fn cumulative_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Sum of rewards from step t (1-based) through T.
    pub fn reward_to_go(&self, t: usize) -> f64 {
        self.rewards[t - 1..].iter().sum()
    }

    pub fn initial_observation(&self) -> &Observation {
        &self.observations[0]
    }

    pub fn first_action(&self) -> Action {
        self.actions[0]
    }

    pub fn has_terminal_observation(&self) -> bool {
        self.observations.len() == self.horizon + 1
    }

    /// Constant action sequence, i.e. the day is a global-policy day.
    pub fn constant_actions(&self) -> bool {
        self.actions.iter().all(|a| *a == self.actions[0])
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.horizon;
        if self.actions.len() != t || self.rewards.len() != t {
            return Err(Error::domain(format!(
                "episode lists must have length T={t}: got {} actions, {} rewards",
                self.actions.len(),
                self.rewards.len()
            )));
        }
        if self.observations.len() != t && self.observations.len() != t + 1 {
            return Err(Error::domain(format!(
                "episode must record T or T+1 observations, got {}",
                self.observations.len()
            )));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::domain("non-finite reward in episode"));
        }
        Ok(())
    }
}

/// Ordered collection of episodes from one experiment run.
#[derive(Debug, Clone, Default)]
pub struct ExperimentLog {
    pub episodes: Vec<EpisodeRecord>,
    pub n: usize,
    pub m0: usize,
}

impl ExperimentLog {
    pub fn new(n: usize, m0: usize) -> Result<Self> {
        if 2 * m0 >= n {
            return Err(Error::domain(format!(
                "adaptive phase must be non-empty: need 2*m0 < n, got m0={m0}, n={n}"
            )));
        }
        Ok(ExperimentLog { episodes: Vec::new(), n, m0 })
    }

    pub fn push(&mut self, episode: EpisodeRecord) -> Result<()> {
        episode.validate()?;
        if let Some(last) = self.episodes.last() {
            if episode.day_index <= last.day_index {
                return Err(Error::domain(format!(
                    "day_index {} not increasing (last {})",
                    episode.day_index, last.day_index
                )));
            }
        }
        self.episodes.push(episode);
        Ok(())
    }
}
