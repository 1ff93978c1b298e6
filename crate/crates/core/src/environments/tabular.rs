//! Small enumerable non-Markov process: explicit conditional tables keyed by
//! the full observation-action history. Everything the oracle needs (values,
//! TD variances, cumulative-reward moments, efficiency bounds) is computed by
//! exhaustive path enumeration.

use std::collections::HashMap;

use crate::basis::FeatureMap;
use crate::env::{check_horizon, Cond, Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Observation};

/// Observation-action history o_1, a_1, ..., a_{t-1}, o_t.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hist {
    pub obs: Vec<usize>,
    pub acts: Vec<Action>,
}

impl Hist {
    pub fn start(o1: usize) -> Self {
        Hist { obs: vec![o1], acts: Vec::new() }
    }

    /// Time index t of the current observation (1-based).
    pub fn t(&self) -> usize {
        self.obs.len()
    }

    pub fn current(&self) -> usize {
        *self.obs.last().expect("non-empty history")
    }

    pub fn extended(&self, a: Action, next_obs: usize) -> Hist {
        let mut h = self.clone();
        h.acts.push(a);
        h.obs.push(next_obs);
        h
    }

    fn key(&self, a: Action) -> Vec<u8> {
        let mut k = Vec::with_capacity(2 * self.obs.len());
        for (i, o) in self.obs.iter().enumerate() {
            k.push(*o as u8);
            if i < self.acts.len() {
                k.push(self.acts[i].index() as u8);
            }
        }
        k.push(a.index() as u8);
        k
    }

    pub fn from_cond(cond: Cond) -> Result<Hist> {
        match cond {
            Cond::Obs(o) => {
                let i = o
                    .as_discrete()
                    .ok_or_else(|| Error::Capability("tabular environment expects discrete observations".into()))?;
                Ok(Hist::start(i))
            }
            Cond::History { observations, actions } => {
                let obs = observations
                    .iter()
                    .map(|o| {
                        o.as_discrete().ok_or_else(|| {
                            Error::Capability("tabular environment expects discrete observations".into())
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                if obs.len() != actions.len() + 1 {
                    return Err(Error::domain("history must end in an observation"));
                }
                Ok(Hist { obs, acts: actions.to_vec() })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularNmdpEnv {
    n_obs: usize,
    horizon: usize,
    init: Vec<f64>,
    transitions: HashMap<Vec<u8>, Vec<f64>>,
    rewards: HashMap<Vec<u8>, Vec<(f64, f64)>>,
}

fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| *x < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{what} must be a probability vector, got {p:?}")));
    }
    Ok(())
}

impl TabularNmdpEnv {
    /// Build from closures giving the conditional laws of every reachable
    /// (history, action) pair. Transition rows and reward supports are
    /// validated to sum to one.
    pub fn from_fn(
        n_obs: usize,
        horizon: usize,
        init: Vec<f64>,
        mut transition: impl FnMut(&Hist, Action) -> Vec<f64>,
        mut reward: impl FnMut(&Hist, Action) -> Vec<(f64, f64)>,
    ) -> Result<Self> {
        if n_obs == 0 || n_obs > 3 || horizon == 0 || horizon > 4 {
            return Err(Error::domain("tabular environments support |O| <= 3 and T <= 4"));
        }
        check_simplex(&init, "initial law")?;
        let mut env = TabularNmdpEnv {
            n_obs,
            horizon,
            init,
            transitions: HashMap::new(),
            rewards: HashMap::new(),
        };
        let mut stack: Vec<Hist> = (0..n_obs).map(Hist::start).collect();
        while let Some(h) = stack.pop() {
            for a in [Action::Control, Action::Treat] {
                let r = reward(&h, a);
                let rp: Vec<f64> = r.iter().map(|(_, p)| *p).collect();
                check_simplex(&rp, "reward law")?;
                env.rewards.insert(h.key(a), r);
                let p = transition(&h, a);
                if p.len() != n_obs {
                    return Err(Error::domain("transition row has wrong arity"));
                }
                check_simplex(&p, "transition row")?;
                env.transitions.insert(h.key(a), p);
                if h.t() < horizon {
                    for o in 0..n_obs {
                        stack.push(h.extended(a, o));
                    }
                }
            }
        }
        Ok(env)
    }

    /// Random instance: dirichlet-like transition rows and two-point reward
    /// laws with history-varying spread.
    pub fn random(n_obs: usize, horizon: usize, rng: &mut SimRng) -> Result<Self> {
        let raw: Vec<f64> = (0..n_obs).map(|_| rng.uniform_in(0.2, 1.0)).collect();
        let total: f64 = raw.iter().sum();
        let init: Vec<f64> = raw.iter().map(|x| x / total).collect();
        // Per-instance spread multiplier so the two arms' reward variances are
        // usually imbalanced.
        let treat_spread = rng.uniform_in(0.5, 3.0);
        let draw = |rng: &mut SimRng, a: Action| {
            let lo = rng.uniform_in(-1.0, 1.0);
            let mult = if a == Action::Treat { treat_spread } else { 1.0 };
            let span = rng.uniform_in(0.5, 3.0) * mult;
            let p_hi = rng.uniform_in(0.2, 0.8);
            vec![(lo, 1.0 - p_hi), (lo + span, p_hi)]
        };
        // Collect the draws eagerly so the closure borrows are simple.
        let mut trans_tab: HashMap<Vec<u8>, Vec<f64>> = HashMap::new();
        let mut reward_tab: HashMap<Vec<u8>, Vec<(f64, f64)>> = HashMap::new();
        let mut stack: Vec<Hist> = (0..n_obs).map(Hist::start).collect();
        while let Some(h) = stack.pop() {
            for a in [Action::Control, Action::Treat] {
                let raw: Vec<f64> = (0..n_obs).map(|_| rng.uniform_in(0.05, 1.0)).collect();
                let total: f64 = raw.iter().sum();
                trans_tab.insert(h.key(a), raw.iter().map(|x| x / total).collect());
                reward_tab.insert(h.key(a), draw(rng, a));
                if h.t() < horizon {
                    for o in 0..n_obs {
                        stack.push(h.extended(a, o));
                    }
                }
            }
        }
        Self::from_fn(
            n_obs,
            horizon,
            init,
            |h, a| trans_tab[&h.key(a)].clone(),
            |h, a| reward_tab[&h.key(a)].clone(),
        )
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn initial_probs(&self) -> &[f64] {
        &self.init
    }

    pub fn transition_probs(&self, h: &Hist, a: Action) -> &[f64] {
        &self.transitions[&h.key(a)]
    }

    pub fn reward_law(&self, h: &Hist, a: Action) -> &[(f64, f64)] {
        &self.rewards[&h.key(a)]
    }

    pub fn reward_mean(&self, h: &Hist, a: Action) -> f64 {
        self.reward_law(h, a).iter().map(|(v, p)| v * p).sum()
    }

    fn reward_moments(&self, h: &Hist, a: Action) -> (f64, f64) {
        let law = self.reward_law(h, a);
        let m1: f64 = law.iter().map(|(v, p)| v * p).sum();
        let m2: f64 = law.iter().map(|(v, p)| v * v * p).sum();
        (m1, m2)
    }

    /// V_t^a(h): expected reward-to-go under the global policy `a`.
    pub fn value(&self, a: Action, h: &Hist) -> f64 {
        let mut v = self.reward_mean(h, a);
        if h.t() < self.horizon {
            for (o, p) in self.transition_probs(h, a).to_vec().iter().enumerate() {
                if *p > 0.0 {
                    v += p * self.value(a, &h.extended(a, o));
                }
            }
        }
        v
    }

    /// Conditional variance of the TD error given (h, A_t = a). Rewards and
    /// next observations are independent given the history by construction.
    pub fn td_variance(&self, a: Action, h: &Hist) -> f64 {
        let (m1, m2) = self.reward_moments(h, a);
        let mut var = m2 - m1 * m1;
        if h.t() < self.horizon {
            let probs = self.transition_probs(h, a).to_vec();
            let mut ev = 0.0;
            let mut ev2 = 0.0;
            for (o, p) in probs.iter().enumerate() {
                if *p > 0.0 {
                    let v = self.value(a, &h.extended(a, o));
                    ev += p * v;
                    ev2 += p * v * v;
                }
            }
            var += ev2 - ev * ev;
        }
        var.max(0.0)
    }

    /// First two moments of the reward-to-go from `h` under global policy `a`.
    fn to_go_moments(&self, a: Action, h: &Hist) -> (f64, f64) {
        let (er, er2) = self.reward_moments(h, a);
        if h.t() == self.horizon {
            return (er, er2);
        }
        let probs = self.transition_probs(h, a).to_vec();
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (o, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                let (c1, c2) = self.to_go_moments(a, &h.extended(a, o));
                s1 += p * c1;
                s2 += p * c2;
            }
        }
        (er + s1, er2 + 2.0 * er * s1 + s2)
    }

    /// Visit every global-arm history prefix with its observation-path
    /// probability P^a(h | O_1), starting from each initial observation.
    pub fn walk_arm_paths(&self, a: Action, mut visit: impl FnMut(&Hist, f64)) {
        fn recurse(
            env: &TabularNmdpEnv,
            a: Action,
            h: &Hist,
            prob: f64,
            visit: &mut impl FnMut(&Hist, f64),
        ) {
            visit(h, prob);
            if h.t() < env.horizon {
                for (o, p) in env.transition_probs(h, a).to_vec().iter().enumerate() {
                    if *p > 0.0 {
                        recurse(env, a, &h.extended(a, o), prob * p, visit);
                    }
                }
            }
        }
        for (o1, p1) in self.init.iter().enumerate() {
            if *p1 > 0.0 {
                recurse(self, a, &Hist::start(o1), *p1, &mut visit);
            }
        }
    }

    /// Marginal P^a(O_t = o) under the global policy `a`.
    pub fn marginal_obs_probs(&self, a: Action, t: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_obs];
        self.walk_arm_paths(a, |h, p| {
            if h.t() == t {
                out[h.current()] += p;
            }
        });
        out
    }
}

impl Environment for TabularNmdpEnv {
    type State = Hist;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, rng: &mut SimRng) -> (Hist, Observation) {
        let o1 = rng.categorical(&self.init);
        (Hist::start(o1), Observation::Discrete(o1))
    }

    fn step(
        &self,
        state: &mut Hist,
        t: usize,
        _current: &Observation,
        action: Action,
        rng: &mut SimRng,
    ) -> Result<(f64, Observation)> {
        check_horizon(t, self.horizon)?;
        let law = self.reward_law(state, action);
        let probs: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
        let reward = law[rng.categorical(&probs)].0;
        let next = rng.categorical(self.transition_probs(state, action));
        *state = state.extended(action, next);
        Ok((reward, Observation::Discrete(next)))
    }

    fn feature_map(&self) -> FeatureMap {
        FeatureMap::OneHot { cardinality: self.n_obs }
    }
}

impl GroundTruth for TabularNmdpEnv {
    fn true_ate(&self) -> Result<f64> {
        let gap: f64 = self
            .init
            .iter()
            .enumerate()
            .map(|(o1, p)| {
                let h = Hist::start(o1);
                p * (self.value(Action::Treat, &h) - self.value(Action::Control, &h))
            })
            .sum();
        Ok(gap / self.horizon as f64)
    }

    fn true_value_function(&self, a: Action, t: usize, cond: Cond) -> Result<f64> {
        let h = Hist::from_cond(cond)?;
        if h.t() != t {
            return Err(Error::domain(format!("history length {} does not match t={t}", h.t())));
        }
        check_horizon(t, self.horizon)?;
        Ok(self.value(a, &h))
    }

    fn true_td_variance(&self, a: Action, t: usize, cond: Cond) -> Result<f64> {
        let h = Hist::from_cond(cond)?;
        if h.t() != t {
            return Err(Error::domain(format!("history length {} does not match t={t}", h.t())));
        }
        check_horizon(t, self.horizon)?;
        Ok(self.td_variance(a, &h))
    }

    fn cumulative_reward_variance(&self, a: Action, o1: &Observation) -> Result<f64> {
        let i = o1
            .as_discrete()
            .ok_or_else(|| Error::Capability("tabular environment expects discrete observations".into()))?;
        let (m1, m2) = self.to_go_moments(a, &Hist::start(i));
        Ok((m2 - m1 * m1).max(0.0))
    }

    fn arm_td_variance_sum(&self, a: Action) -> Result<f64> {
        let mut total = 0.0;
        self.walk_arm_paths(a, |h, p| {
            total += p * self.td_variance(a, h);
        });
        Ok(total)
    }

    fn init_value_gap_variance(&self) -> Result<f64> {
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (o1, p) in self.init.iter().enumerate() {
            let h = Hist::start(o1);
            let d = self.value(Action::Treat, &h) - self.value(Action::Control, &h);
            m1 += p * d;
            m2 += p * d * d;
        }
        Ok((m2 - m1 * m1).max(0.0))
    }
}
