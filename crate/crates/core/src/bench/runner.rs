//! Replicated experiment execution: one (environment, design) cell at a time,
//! each replicate on its own rng stream, aggregated into MSE / coverage.

use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::basis::{FeatureMap, RidgeAccumulator, DEFAULT_RIDGE};
use crate::env::{monte_carlo_ate, run_episode, Environment, GroundTruth};
use crate::environments::AnyEnv;
use crate::error::{Error, Result};
use crate::estimation::{psi_nmdp, AteEstimate};
use crate::rng::SimRng;
use crate::types::{Action, EpisodeRecord};

use super::config::{BenchConfig, DesignSpec, EnvSpec};

/// Episodes per arm for the seeded Monte Carlo ATE used when an environment
/// has no exact ground truth (the dispatch simulator).
const MC_ATE_EPISODES: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub ate_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub covered: bool,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub env_id: String,
    pub design_id: String,
    pub true_ate: f64,
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    pub replicates: Vec<ReplicateOutcome>,
    /// Variant estimator that also averages the burn-in days' psi terms;
    /// only populated for designs with a burn-in phase.
    pub with_burn_in: Option<Vec<ReplicateOutcome>>,
}

impl CellResult {
    pub fn mse(&self) -> f64 {
        mse_of(&self.replicates, self.true_ate)
    }

    /// Relative MSE, normalized by the squared true effect.
    pub fn rmse(&self) -> f64 {
        self.mse() / (self.true_ate * self.true_ate)
    }

    pub fn coverage(&self) -> f64 {
        let hits = self.replicates.iter().filter(|r| r.covered).count();
        hits as f64 / self.replicates.len() as f64
    }
}

pub fn mse_of(replicates: &[ReplicateOutcome], true_ate: f64) -> f64 {
    replicates
        .iter()
        .map(|r| (r.ate_hat - true_ate).powi(2))
        .sum::<f64>()
        / replicates.len() as f64
}

/// Cross-fitted per-arm value models over initial-observation features,
/// owned by the harness so every design is estimated the same way. Predicts 0
/// for an arm with no data yet.
struct ValueFitter {
    map: FeatureMap,
    acc: [RidgeAccumulator; 2],
}

impl ValueFitter {
    fn new(map: FeatureMap) -> Self {
        let dim = map.len();
        ValueFitter { map, acc: [RidgeAccumulator::new(dim), RidgeAccumulator::new(dim)] }
    }

    fn predict(&self, arm: Action, phi: &[f64]) -> f64 {
        let acc = &self.acc[arm.index()];
        if acc.count() == 0 {
            return 0.0;
        }
        match acc.solve(DEFAULT_RIDGE) {
            Ok(model) => model.predict(phi),
            Err(_) => 0.0,
        }
    }

    fn record(&mut self, episode: &EpisodeRecord) {
        let phi = self.map.features(episode.initial_observation());
        self.acc[episode.first_action().index()].add(&phi, episode.cumulative_reward());
    }

    /// Both arms have at least one prior day, so predictions are defined.
    fn both_arms_seen(&self) -> bool {
        self.acc[0].count() > 0 && self.acc[1].count() > 0
    }
}

fn outcome_of(est: &AteEstimate, true_ate: f64) -> Result<ReplicateOutcome> {
    let (ci_lo, ci_hi) = est.confidence_interval()?;
    Ok(ReplicateOutcome {
        ate_hat: est.point(),
        ci_lo,
        ci_hi,
        covered: ci_lo <= true_ate && true_ate <= ci_hi,
    })
}

/// One full experiment: n days driven by the design, psi-stream estimation
/// over the post-burn-in window, plus (for burn-in designs) the variant
/// estimate that keeps the burn-in days.
pub fn run_replicate(
    env: &AnyEnv,
    spec: &DesignSpec,
    cfg: &BenchConfig,
    true_ate: f64,
    rng: &mut SimRng,
) -> Result<(ReplicateOutcome, Option<ReplicateOutcome>)> {
    let mut design = spec.build(env, cfg.n, cfg.m0)?;
    let map = spec.basis.map_for(env);
    let mut fitter = ValueFitter::new(map);
    let mut main = AteEstimate::new(cfg.alpha, cfg.m0)?;
    let mut all_days = AteEstimate::new(cfg.alpha, 0)?;
    let mut deferred: Vec<(EpisodeRecord, crate::designs::DayPlan)> = Vec::new();
    for day in 1..=cfg.n {
        let (episode, plan) = run_episode(env, design.as_mut(), day, rng)?;
        let phi = map.features(episode.initial_observation());
        let v1 = fitter.predict(Action::Treat, &phi);
        let v0 = fitter.predict(Action::Control, &phi);
        let psi = psi_nmdp(&episode, v1, v0, &plan.probability)?;
        if day > 2 * cfg.m0 {
            main.update(&psi)?;
        }
        // The burn-in-inclusive variant averages every day's psi term. While
        // one arm still has no data its value prediction is undefined, so
        // those early days are held back and scored with the end-of-run fits.
        if fitter.both_arms_seen() {
            all_days.update(&psi)?;
        } else if spec.kind.has_burn_in() {
            deferred.push((episode.clone(), plan.clone()));
        }
        fitter.record(&episode);
        design.record_episode(&episode)?;
    }
    for (episode, plan) in &deferred {
        let phi = map.features(episode.initial_observation());
        let v1 = fitter.predict(Action::Treat, &phi);
        let v0 = fitter.predict(Action::Control, &phi);
        let psi = psi_nmdp(episode, v1, v0, &plan.probability)?;
        all_days.update(&psi)?;
    }
    let variant = if spec.kind.has_burn_in() {
        Some(outcome_of(&all_days, true_ate)?)
    } else {
        None
    };
    Ok((outcome_of(&main, true_ate)?, variant))
}

/// True ATE for a cell: exact ground truth where available, seeded Monte
/// Carlo for the dispatch simulator.
pub fn cell_true_ate(env: &AnyEnv, seed: u64) -> f64 {
    env.true_ate()
        .unwrap_or_else(|_| monte_carlo_ate(env, MC_ATE_EPISODES, seed ^ 0xa7e))
}

/// Run all replicates of one (environment, design) cell. Replicates draw
/// from streams derived from (master seed, cell index, replicate index), so
/// results are independent of execution order and job count.
pub fn run_cell(
    env_spec: &EnvSpec,
    design_spec: &DesignSpec,
    cfg: &BenchConfig,
    cell_index: usize,
) -> Result<CellResult> {
    let env = env_spec.build()?;
    let true_ate = cell_true_ate(&env, cfg.seed);
    let run_one = |replicate: usize| -> Result<(ReplicateOutcome, Option<ReplicateOutcome>)> {
        let stream = ((cell_index as u64) << 32) | replicate as u64;
        let mut rng = SimRng::substream(cfg.seed, stream);
        catch_unwind(AssertUnwindSafe(|| {
            run_replicate(&env, design_spec, cfg, true_ate, &mut rng)
        }))
        .unwrap_or_else(|_| Err(Error::domain(format!("replicate {replicate} panicked"))))
    };

    let jobs = cfg.jobs.min(cfg.replicates);
    let mut slots: Vec<Option<Result<(ReplicateOutcome, Option<ReplicateOutcome>)>>> =
        (0..cfg.replicates).map(|_| None).collect();
    if jobs <= 1 {
        for (r, slot) in slots.iter_mut().enumerate() {
            *slot = Some(run_one(r));
        }
    } else {
        let results = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..jobs)
                .map(|j| {
                    let run_one = &run_one;
                    scope.spawn(move || {
                        let mut chunk = Vec::new();
                        let mut r = j;
                        while r < cfg.replicates {
                            chunk.push((r, run_one(r)));
                            r += jobs;
                        }
                        chunk
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("worker thread"))
                .collect::<Vec<_>>()
        });
        for (r, res) in results {
            slots[r] = Some(res);
        }
    }

    let mut replicates = Vec::with_capacity(cfg.replicates);
    let mut variants = Vec::with_capacity(cfg.replicates);
    let mut failures = Vec::new();
    for (r, slot) in slots.into_iter().enumerate() {
        match slot.expect("all replicates scheduled") {
            Ok((main, variant)) => {
                replicates.push(main);
                variants.extend(variant);
            }
            Err(e) => failures.push(format!("replicate {r}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::domain(format!(
            "{} of {} replicates failed; first: {}",
            failures.len(),
            cfg.replicates,
            failures[0]
        )));
    }
    Ok(CellResult {
        env_id: env_spec.id(),
        design_id: design_spec.id().to_string(),
        true_ate,
        n: cfg.n,
        horizon: env.horizon(),
        seed: cfg.seed,
        replicates,
        with_burn_in: design_spec.kind.has_burn_in().then_some(variants),
    })
}

/// Every (environment, design) cell of the config, in declaration order.
pub fn run_all(cfg: &BenchConfig) -> Result<Vec<CellResult>> {
    let mut out = Vec::with_capacity(cfg.envs.len() * cfg.designs.len());
    let mut cell_index = 0;
    for env_spec in &cfg.envs {
        for design_spec in &cfg.designs {
            out.push(run_cell(env_spec, design_spec, cfg, cell_index)?);
            cell_index += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::BenchConfig;

    fn config(designs: &str, n: usize, reps: usize) -> BenchConfig {
        BenchConfig::parse(&format!(
            "[experiment]\nn = {n}\nreplicates = {reps}\nseed = 11\n\
             [env]\nname = binary_chain\np_s = 0.8\ndelta = 3\nT = 5\n\
             [designs]\nlist = {designs}\n"
        ))
        .unwrap()
    }

    #[test]
    fn same_seed_reproduces_cell_exactly() {
        let cfg = config("nmdp", 24, 4);
        let a = run_cell(&cfg.envs[0], &cfg.designs[0], &cfg, 0).unwrap();
        let b = run_cell(&cfg.envs[0], &cfg.designs[0], &cfg, 0).unwrap();
        assert_eq!(a.replicates, b.replicates);
    }

    #[test]
    fn job_count_does_not_change_results() {
        let mut cfg = config("random", 24, 6);
        let serial = run_cell(&cfg.envs[0], &cfg.designs[0], &cfg, 3).unwrap();
        cfg.jobs = 3;
        let parallel = run_cell(&cfg.envs[0], &cfg.designs[0], &cfg, 3).unwrap();
        assert_eq!(serial.replicates, parallel.replicates);
    }

    #[test]
    fn burn_in_variant_only_for_adaptive_designs() {
        let cfg = config("nmdp, random", 24, 2);
        let adaptive = run_cell(&cfg.envs[0], &cfg.designs[0], &cfg, 0).unwrap();
        let baseline = run_cell(&cfg.envs[0], &cfg.designs[1], &cfg, 1).unwrap();
        assert!(adaptive.with_burn_in.is_some());
        assert!(baseline.with_burn_in.is_none());
    }

    #[test]
    fn deterministic_env_and_design_give_zero_mse() {
        // zero-noise binary chain variant: make rewards deterministic by
        // delta = 0 and s0 = 0, with a point-mass initial law
        let mut env = crate::environments::BinaryChainEnv::new(0.5, 0.0, 3).unwrap();
        env.s0 = 0.0;
        env.p_init = 1.0;
        env.mu = [[1.0, 2.0], [1.0, 2.0]]; // observation-independent means
        let any = AnyEnv::BinaryChain(env.clone());
        let cfg = config("half_half", 12, 1);
        let spec = cfg.designs[0];
        let true_ate = env.true_ate().unwrap();
        let mut rng = SimRng::substream(1, 1);
        let (main, _) = run_replicate(&any, &spec, &cfg, true_ate, &mut rng).unwrap();
        // exact up to the ridge penalty's shrinkage of the value fit
        assert!((main.ate_hat - true_ate).abs() < 1e-5);
    }

    #[test]
    fn run_all_covers_every_cell() {
        let cfg = config("random, half_half", 16, 2);
        let results = run_all(&cfg).unwrap();
        assert_eq!(results.len(), 2);
        assert_eq!(results[0].design_id, "random");
        assert_eq!(results[1].design_id, "half_half");
        for cell in &results {
            assert_eq!(cell.replicates.len(), 2);
            assert!(cell.mse().is_finite());
        }
    }
}
