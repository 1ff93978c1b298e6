//! Concrete data-generating processes and a type-erased wrapper used by the
//! benchmark harness.

mod binary_chain;
mod continuous;
mod dispatch;
mod tabular;

pub use binary_chain::BinaryChainEnv;
pub use continuous::{ContinuousEnv, CONTINUOUS_DIM};
pub use dispatch::{DispatchEnv, DispatchState, DriverSupply, ORDERS_PER_DAY, STEPS_PER_DAY};
pub use tabular::{Hist, TabularNmdpEnv};

use crate::basis::FeatureMap;
use crate::env::{Cond, Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Observation};

/// Any shipped environment behind one concrete type, so the harness can hold
/// heterogeneous cells.
#[derive(Debug, Clone)]
pub enum AnyEnv {
    BinaryChain(BinaryChainEnv),
    Continuous(ContinuousEnv),
    Tabular(TabularNmdpEnv),
    Dispatch(DispatchEnv),
}

#[derive(Debug, Clone)]
pub enum AnyState {
    Unit,
    Tabular(Hist),
    Dispatch(DispatchState),
}

impl AnyEnv {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyEnv::BinaryChain(_) => "binary_chain",
            AnyEnv::Continuous(_) => "continuous",
            AnyEnv::Tabular(_) => "tabular",
            AnyEnv::Dispatch(_) => "dispatch",
        }
    }
}

impl Environment for AnyEnv {
    type State = AnyState;

    fn horizon(&self) -> usize {
        match self {
            AnyEnv::BinaryChain(e) => e.horizon(),
            AnyEnv::Continuous(e) => e.horizon(),
            AnyEnv::Tabular(e) => e.horizon(),
            AnyEnv::Dispatch(e) => e.horizon(),
        }
    }

    fn reset(&self, rng: &mut SimRng) -> (AnyState, Observation) {
        match self {
            AnyEnv::BinaryChain(e) => {
                let (_, o) = e.reset(rng);
                (AnyState::Unit, o)
            }
            AnyEnv::Continuous(e) => {
                let (_, o) = e.reset(rng);
                (AnyState::Unit, o)
            }
            AnyEnv::Tabular(e) => {
                let (s, o) = e.reset(rng);
                (AnyState::Tabular(s), o)
            }
            AnyEnv::Dispatch(e) => {
                let (s, o) = e.reset(rng);
                (AnyState::Dispatch(s), o)
            }
        }
    }

    fn step(
        &self,
        state: &mut AnyState,
        t: usize,
        current: &Observation,
        action: Action,
        rng: &mut SimRng,
    ) -> Result<(f64, Observation)> {
        match (self, state) {
            (AnyEnv::BinaryChain(e), AnyState::Unit) => e.step(&mut (), t, current, action, rng),
            (AnyEnv::Continuous(e), AnyState::Unit) => e.step(&mut (), t, current, action, rng),
            (AnyEnv::Tabular(e), AnyState::Tabular(s)) => e.step(s, t, current, action, rng),
            (AnyEnv::Dispatch(e), AnyState::Dispatch(s)) => e.step(s, t, current, action, rng),
            _ => Err(Error::State("episode state does not match environment".into())),
        }
    }

    fn feature_map(&self) -> FeatureMap {
        match self {
            AnyEnv::BinaryChain(e) => e.feature_map(),
            AnyEnv::Continuous(e) => e.feature_map(),
            AnyEnv::Tabular(e) => e.feature_map(),
            AnyEnv::Dispatch(e) => e.feature_map(),
        }
    }
}

macro_rules! delegate_truth {
    ($self:ident, $method:ident $(, $arg:expr)*) => {
        match $self {
            AnyEnv::BinaryChain(e) => e.$method($($arg),*),
            AnyEnv::Continuous(e) => e.$method($($arg),*),
            AnyEnv::Tabular(e) => e.$method($($arg),*),
            AnyEnv::Dispatch(e) => e.$method($($arg),*),
        }
    };
}

impl GroundTruth for AnyEnv {
    fn true_ate(&self) -> Result<f64> {
        delegate_truth!(self, true_ate)
    }

    fn true_value_function(&self, a: Action, t: usize, cond: Cond) -> Result<f64> {
        delegate_truth!(self, true_value_function, a, t, cond)
    }

    fn true_td_variance(&self, a: Action, t: usize, cond: Cond) -> Result<f64> {
        delegate_truth!(self, true_td_variance, a, t, cond)
    }

    fn cumulative_reward_variance(&self, a: Action, o1: &Observation) -> Result<f64> {
        delegate_truth!(self, cumulative_reward_variance, a, o1)
    }

    fn arm_td_variance_sum(&self, a: Action) -> Result<f64> {
        delegate_truth!(self, arm_td_variance_sum, a)
    }

    fn init_value_gap_variance(&self) -> Result<f64> {
        delegate_truth!(self, init_value_gap_variance)
    }
}
