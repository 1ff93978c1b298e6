use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use seqab::bench::{
    self, emit_csv, run_all, run_replicate, BenchConfig, DESIGN_NAMES, ENV_NAMES,
};
use seqab::env::GroundTruth;
use seqab::error::Error;
use seqab::rng::SimRng;

#[derive(Parser)]
#[command(name = "seqab", about = "Adaptive-design sequential A/B experiment benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the config's replicate count.
    #[arg(long, global = true)]
    replicates: Option<usize>,

    /// Output directory for CSV artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress progress output; artifacts and exit codes only.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the replicated benchmark described by a config file.
    Run { config: PathBuf },
    /// Check the optimal-allocation theory against brute-force grids.
    Verify { config: PathBuf },
    /// Run one experiment and print the ATE estimate with its CI.
    Ate { config: PathBuf },
    /// List the available environments.
    ListEnvs,
    /// List the available designs.
    ListDesigns,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VERIFY_FAIL: u8 = 3;

fn load_config(cli: &Cli, path: &PathBuf) -> Result<BenchConfig, u8> {
    let mut cfg = BenchConfig::from_file(path).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_CONFIG
    })?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(replicates) = cli.replicates {
        if replicates == 0 {
            eprintln!("error: --replicates must be at least 1");
            return Err(EXIT_CONFIG);
        }
        cfg.replicates = replicates;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn runtime_err(e: Error) -> u8 {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn cmd_run(cli: &Cli, path: &PathBuf) -> Result<(), u8> {
    let cfg = load_config(cli, path)?;
    let results = run_all(&cfg).map_err(runtime_err)?;
    if !cli.quiet {
        for cell in &results {
            println!(
                "{} {}: mse={:.6e} rmse={:.4} coverage={:.3} (R={})",
                cell.env_id,
                cell.design_id,
                cell.mse(),
                cell.rmse(),
                cell.coverage(),
                cell.replicates.len()
            );
        }
    }
    if let Some(dir) = &cfg.out {
        let (rep, sum) = emit_csv(&results, dir).map_err(runtime_err)?;
        if !cli.quiet {
            println!("wrote {} and {}", rep.display(), sum.display());
        }
    }
    Ok(())
}

fn cmd_verify(cli: &Cli, path: &PathBuf) -> Result<(), u8> {
    let cfg = load_config(cli, path)?;
    let outcome = bench::run_verify(&cfg).map_err(runtime_err)?;
    print!("{}", outcome.report);
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(dir.join("verify.csv"), &outcome.grid_csv))
            .map_err(|e| {
                eprintln!("error: cannot write verify.csv under {}: {e}", dir.display());
                EXIT_RUNTIME
            })?;
    }
    if outcome.pass {
        if !cli.quiet {
            println!("verify: PASS");
        }
        Ok(())
    } else {
        println!("verify: FAIL");
        Err(EXIT_VERIFY_FAIL)
    }
}

fn cmd_ate(cli: &Cli, path: &PathBuf) -> Result<(), u8> {
    let cfg = load_config(cli, path)?;
    let env_spec = &cfg.envs[0];
    let design_spec = &cfg.designs[0];
    let env = env_spec.build().map_err(runtime_err)?;
    let true_ate = bench::cell_true_ate(&env, cfg.seed);
    let mut rng = SimRng::substream(cfg.seed, 0);
    let (outcome, _) =
        run_replicate(&env, design_spec, &cfg, true_ate, &mut rng).map_err(runtime_err)?;
    println!(
        "{} {}: ate_hat={:.6} ci=[{:.6}, {:.6}]",
        env_spec.id(),
        design_spec.id(),
        outcome.ate_hat,
        outcome.ci_lo,
        outcome.ci_hi
    );
    if env.true_ate().is_ok() && !cli.quiet {
        println!("true_ate={true_ate:.6} covered={}", outcome.covered);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => cmd_run(&cli, config),
        Command::Verify { config } => cmd_verify(&cli, config),
        Command::Ate { config } => cmd_ate(&cli, config),
        Command::ListEnvs => {
            for name in ENV_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Command::ListDesigns => {
            for name in DESIGN_NAMES {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}
