//! Linear-Gaussian process with three continuous observation components.
//! Observations follow O_{t+1} = B_a O_t + noise; rewards are linear in the
//! observation. delta_s inflates the treatment arm's transition noise and
//! delta its reward noise.

use nalgebra::{DMatrix, DVector};

use crate::basis::FeatureMap;
use crate::env::{check_horizon, Cond, Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{Action, Observation};

pub const CONTINUOUS_DIM: usize = 3;

#[derive(Debug, Clone)]
pub struct ContinuousEnv {
    pub delta: f64,
    pub delta_s: f64,
    pub horizon: usize,
    transition: [DMatrix<f64>; 2],
    reward_coef: [DVector<f64>; 2],
    init_mean: DVector<f64>,
    init_sd: f64,
    s0: f64,
    /// Reward-to-go coefficients c_t^a with V_t^a(o) = c_t . o; index t in
    /// 1..=T+1, c_{T+1} = 0.
    value_coef: [Vec<DVector<f64>>; 2],
}

fn tridiagonal(dim: usize, diag: f64, off: f64) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            diag
        } else if i.abs_diff(j) == 1 {
            off
        } else {
            0.0
        }
    })
}

impl ContinuousEnv {
    pub fn new(delta: f64, delta_s: f64, horizon: usize) -> Result<Self> {
        if delta < 0.0 || delta_s < 0.0 {
            return Err(Error::domain("delta and delta_s must be non-negative"));
        }
        let dim = CONTINUOUS_DIM;
        let transition = [tridiagonal(dim, 0.3, 0.1), tridiagonal(dim, 0.4, 0.1)];
        let reward_coef = [
            DVector::from_vec(vec![0.8, 0.6, 0.4]),
            DVector::from_vec(vec![1.0, 0.8, 0.6]),
        ];
        let mut env = ContinuousEnv {
            delta,
            delta_s,
            horizon,
            transition,
            reward_coef,
            init_mean: DVector::from_element(dim, 1.0),
            init_sd: 0.25,
            s0: 0.5,
            value_coef: [Vec::new(), Vec::new()],
        };
        for arm in 0..2 {
            // Backward recursion c_t = w + B' c_{t+1}.
            let mut coefs = vec![DVector::zeros(dim); horizon + 2];
            for t in (1..=horizon).rev() {
                coefs[t] = &env.reward_coef[arm] + env.transition[arm].transpose() * &coefs[t + 1];
            }
            env.value_coef[arm] = coefs;
        }
        Ok(env)
    }

    pub fn obs_noise_sd(&self, a: Action) -> f64 {
        0.3 + self.delta_s * a.index() as f64
    }

    pub fn reward_sd(&self, a: Action) -> f64 {
        self.s0 + self.delta * a.index() as f64
    }

    fn obs_vector(cond: Cond) -> Result<DVector<f64>> {
        cond.current_observation()
            .as_slice()
            .map(|v| DVector::from_column_slice(v))
            .ok_or_else(|| Error::Capability("continuous environment expects vector conditioning".into()))
    }

    fn td_variance_at(&self, a: Action, t: usize) -> f64 {
        let r = self.reward_sd(a);
        let mut var = r * r;
        if t < self.horizon {
            let s = self.obs_noise_sd(a);
            let c_next = &self.value_coef[a.index()][t + 1];
            var += s * s * c_next.norm_squared();
        }
        var
    }
}

impl Environment for ContinuousEnv {
    type State = ();

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, rng: &mut SimRng) -> ((), Observation) {
        let v: Vec<f64> = self
            .init_mean
            .iter()
            .map(|m| rng.normal(*m, self.init_sd))
            .collect();
        ((), Observation::Continuous(v))
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
        let o = DVector::from_column_slice(current.as_slice().expect("continuous observation"));
        let arm = action.index();
        let reward = rng.normal(self.reward_coef[arm].dot(&o), self.reward_sd(action));
        let mean_next = &self.transition[arm] * &o;
        let sd = self.obs_noise_sd(action);
        let next: Vec<f64> = mean_next.iter().map(|m| rng.normal(*m, sd)).collect();
        Ok((reward, Observation::Continuous(next)))
    }

    fn feature_map(&self) -> FeatureMap {
        FeatureMap::Quadratic { dim: CONTINUOUS_DIM }
    }
}

impl GroundTruth for ContinuousEnv {
    fn true_ate(&self) -> Result<f64> {
        let mut total = 0.0;
        for (arm, sign) in [(1usize, 1.0), (0, -1.0)] {
            let mut mean = self.init_mean.clone();
            for _ in 1..=self.horizon {
                total += sign * self.reward_coef[arm].dot(&mean);
                mean = &self.transition[arm] * mean;
            }
        }
        Ok(total / self.horizon as f64)
    }

    fn true_value_function(&self, a: Action, t: usize, cond: Cond) -> Result<f64> {
        check_horizon(t, self.horizon)?;
        let o = Self::obs_vector(cond)?;
        Ok(self.value_coef[a.index()][t].dot(&o))
    }

    fn true_td_variance(&self, a: Action, t: usize, _cond: Cond) -> Result<f64> {
        check_horizon(t, self.horizon)?;
        Ok(self.td_variance_at(a, t))
    }

    fn cumulative_reward_variance(&self, a: Action, _o1: &Observation) -> Result<f64> {
        // Equals the TD-variance sum exactly (martingale decomposition of the
        // cumulative reward), and is independent of O_1 for linear dynamics.
        self.arm_td_variance_sum(a)
    }

    fn arm_td_variance_sum(&self, a: Action) -> Result<f64> {
        Ok((1..=self.horizon).map(|t| self.td_variance_at(a, t)).sum())
    }

    fn init_value_gap_variance(&self) -> Result<f64> {
        let diff = &self.value_coef[1][1] - &self.value_coef[0][1];
        Ok(self.init_sd * self.init_sd * diff.norm_squared())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::monte_carlo_ate;

    #[test]
    fn observation_has_declared_dimension() {
        let env = ContinuousEnv::new(0.0, 0.0, 5).unwrap();
        let mut rng = SimRng::new(1);
        let (_, o1) = env.reset(&mut rng);
        assert_eq!(o1.as_slice().unwrap().len(), 3);
    }

    #[test]
    fn transition_matrices_are_stable() {
        let env = ContinuousEnv::new(0.0, 1.0, 5).unwrap();
        for arm in 0..2 {
            let eigs = env.transition[arm].complex_eigenvalues();
            assert!(eigs.iter().all(|e| e.norm() < 1.0));
        }
    }

    #[test]
    fn value_function_matches_monte_carlo() {
        let env = ContinuousEnv::new(2.0, 1.0, 6).unwrap();
        let o = Observation::Continuous(vec![1.0, -0.5, 2.0]);
        let closed = env
            .true_value_function(Action::Treat, 1, Cond::Obs(&o))
            .unwrap();
        let mut rng = SimRng::new(42);
        let n = 60_000;
        let mut total = 0.0;
        for _ in 0..n {
            let mut cur = o.clone();
            for t in 1..=6 {
                let (r, next) = env.step(&mut (), t, &cur, Action::Treat, &mut rng).unwrap();
                total += r;
                cur = next;
            }
        }
        let mc = total / n as f64;
        let se = (env.cumulative_reward_variance(Action::Treat, &o).unwrap() / n as f64).sqrt();
        assert!((mc - closed).abs() < 4.0 * se, "mc={mc} closed={closed} se={se}");
    }

    #[test]
    fn monte_carlo_ate_agrees_with_closed_form() {
        let env = ContinuousEnv::new(1.0, 1.0, 8).unwrap();
        let mc = monte_carlo_ate(&env, 60_000, 7);
        assert!((mc - env.true_ate().unwrap()).abs() < 0.02);
    }

    #[test]
    fn td_variance_monte_carlo_check() {
        let env = ContinuousEnv::new(1.0, 0.5, 5).unwrap();
        let o = Observation::Continuous(vec![0.5, 1.0, -1.0]);
        let t = 2;
        let closed = env.true_td_variance(Action::Treat, t, Cond::Obs(&o)).unwrap();
        let v_here = env.true_value_function(Action::Treat, t, Cond::Obs(&o)).unwrap();
        let mut rng = SimRng::new(9);
        let n = 120_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let (r, next) = env.step(&mut (), t, &o, Action::Treat, &mut rng).unwrap();
            let v_next = env
                .true_value_function(Action::Treat, t + 1, Cond::Obs(&next))
                .unwrap();
            let td = r + v_next - v_here;
            sum += td;
            sq += td * td;
        }
        let var = sq / n as f64 - (sum / n as f64).powi(2);
        assert!((var - closed).abs() / closed < 0.02, "mc={var} closed={closed}");
    }
}
