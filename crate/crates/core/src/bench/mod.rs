//! Experiment harness: configuration, replicated execution, CSV output, and
//! the verification entry point used by the CLI.

pub mod config;
pub mod csv;
pub mod runner;

pub use config::{BenchConfig, DesignKind, DesignSpec, EnvSpec, VerifyConfig, DESIGN_NAMES, ENV_NAMES};
pub use csv::{emit_csv, parse_replicates, parse_summary, BURN_IN_SUFFIX};
pub use runner::{cell_true_ate, run_all, run_cell, run_replicate, CellResult, ReplicateOutcome};

use std::fmt::Write as _;

use crate::environments::TabularNmdpEnv;
use crate::error::Result;
use crate::oracle::{verify_in_class_optimality, verify_markov_grid};
use crate::rng::SimRng;

/// Result of the `verify` subcommand: a human-readable report, a
/// machine-readable grid CSV, and the overall verdict.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub pass: bool,
    pub report: String,
    pub grid_csv: String,
}

/// Run the optimal-allocation checks implied by the config: the in-class
/// brute-force verification on random tabular instances, and the
/// initial-probability grid search on every configured environment with
/// exact arm variances.
pub fn run_verify(cfg: &BenchConfig) -> Result<VerifyOutcome> {
    let mut pass = true;
    let mut report = String::new();
    let mut grid_csv = String::from("check,env_id,p,eb\n");

    let (n_obs, horizon) = cfg
        .envs
        .iter()
        .find_map(|e| match e {
            EnvSpec::Tabular { n_obs, horizon, .. } => Some((*n_obs, (*horizon).min(3))),
            _ => None,
        })
        .unwrap_or((2, 3));
    for i in 0..cfg.verify.instances {
        let mut rng = SimRng::substream(cfg.seed, 0x71_0000 + i as u64);
        let env = TabularNmdpEnv::random(n_obs, horizon, &mut rng)?;
        let r = verify_in_class_optimality(&env, cfg.verify.grid_steps)?;
        let verdict = if r.pass() { "PASS" } else { "FAIL" };
        pass &= r.pass();
        let _ = writeln!(
            report,
            "in_class instance {i}: {verdict} analytic_eb={:.6e} grid_min_eb={:.6e} continuation_min_eb={:.6e}",
            r.analytic_eb, r.grid_min_eb, r.continuation_min_eb
        );
        for f in &r.failures {
            let _ = writeln!(report, "  {f}");
        }
        let _ = writeln!(
            grid_csv,
            "in_class,tabular_o{n_obs}_T{horizon}_i{i},{},{}",
            r.analytic_p
                .iter()
                .map(|p| format!("{p:.4}"))
                .collect::<Vec<_>>()
                .join(";"),
            r.analytic_eb
        );
    }

    for env_spec in &cfg.envs {
        let env = env_spec.build()?;
        match verify_markov_grid(&env, cfg.verify.resolution) {
            Ok(r) => {
                let verdict = if r.pass { "PASS" } else { "FAIL" };
                pass &= r.pass;
                let _ = writeln!(
                    report,
                    "markov_grid {}: {verdict} analytic_p={:.4} grid_argmin_p={:.4} grid_min_eb={:.6e}",
                    env_spec.id(),
                    r.analytic_p,
                    r.grid_argmin_p,
                    r.grid_min_eb
                );
                for (p, eb) in &r.grid {
                    let _ = writeln!(grid_csv, "markov_grid,{},{p},{eb}", env_spec.id());
                }
            }
            Err(e) => {
                let _ = writeln!(report, "markov_grid {}: SKIP ({e})", env_spec.id());
            }
        }
    }

    Ok(VerifyOutcome { pass, report, grid_csv })
}
