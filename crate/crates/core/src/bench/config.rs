//! Flat INI-style benchmark configuration: `[section]` headers, `key = value`
//! lines, `#` comments, comma-separated lists where a key accepts several
//! values.

use std::collections::HashMap;
use std::path::PathBuf;

use crate::designs::{
    DesignPolicy, EpsilonGreedyDesign, HalfHalfDesign, MdpDesign, NmdpDesign, RandomDesign,
    TmdpDesign, DEFAULT_CLIP, DEFAULT_EPSILON, DEFAULT_SIGMA_FLOOR,
};
use crate::env::Environment;
use crate::environments::{
    AnyEnv, BinaryChainEnv, ContinuousEnv, DispatchEnv, DriverSupply, TabularNmdpEnv,
};
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub type Sections = HashMap<String, HashMap<String, String>>;

/// Parse the `[section] key = value` grammar. Later duplicates win.
pub fn parse_ini(text: &str) -> Result<Sections> {
    let mut out: Sections = HashMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::config(format!("line {}: unterminated section header", lineno + 1)))?;
            current = name.trim().to_string();
            out.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected key = value", lineno + 1)))?;
        if current.is_empty() {
            return Err(Error::config(format!("line {}: key outside any section", lineno + 1)));
        }
        out.get_mut(&current)
            .expect("section inserted above")
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn get<'a>(s: &'a HashMap<String, String>, key: &str) -> Option<&'a str> {
    s.get(key).map(|v| v.as_str())
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| Error::config(format!("[{section}] {key}: cannot parse '{raw}'")))
}

fn opt_num<T: std::str::FromStr>(
    s: &HashMap<String, String>,
    section: &str,
    key: &str,
    default: T,
) -> Result<T> {
    match get(s, key) {
        Some(raw) => parse_num(section, key, raw),
        None => Ok(default),
    }
}

fn req_num<T: std::str::FromStr>(s: &HashMap<String, String>, section: &str, key: &str) -> Result<T> {
    let raw = get(s, key)
        .ok_or_else(|| Error::config(format!("[{section}] missing required key '{key}'")))?;
    parse_num(section, key, raw)
}

fn num_list(s: &HashMap<String, String>, section: &str, key: &str, default: f64) -> Result<Vec<f64>> {
    match get(s, key) {
        None => Ok(vec![default]),
        Some(raw) => raw
            .split(',')
            .map(|v| parse_num(section, key, v.trim()))
            .collect(),
    }
}

/// A fully resolved environment cell.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    BinaryChain { p_s: f64, delta: f64, horizon: usize },
    Continuous { delta: f64, delta_s: f64, horizon: usize },
    Tabular { n_obs: usize, horizon: usize, instance_seed: u64 },
    Dispatch { supply: DriverSupply, training_seed: u64 },
}

impl EnvSpec {
    pub fn id(&self) -> String {
        match self {
            EnvSpec::BinaryChain { p_s, delta, horizon } => {
                format!("binary_chain_ps{p_s}_d{delta}_T{horizon}")
            }
            EnvSpec::Continuous { delta, delta_s, horizon } => {
                format!("continuous_d{delta}_ds{delta_s}_T{horizon}")
            }
            EnvSpec::Tabular { n_obs, horizon, instance_seed } => {
                format!("tabular_o{n_obs}_T{horizon}_s{instance_seed}")
            }
            EnvSpec::Dispatch { supply, .. } => match supply {
                DriverSupply::UniformRange { lo, hi } => format!("dispatch_uniform{lo}to{hi}"),
                DriverSupply::Fixed(n) => format!("dispatch_fixed{n}"),
            },
        }
    }

    pub fn build(&self) -> Result<AnyEnv> {
        Ok(match self {
            EnvSpec::BinaryChain { p_s, delta, horizon } => {
                AnyEnv::BinaryChain(BinaryChainEnv::new(*p_s, *delta, *horizon)?)
            }
            EnvSpec::Continuous { delta, delta_s, horizon } => {
                AnyEnv::Continuous(ContinuousEnv::new(*delta, *delta_s, *horizon)?)
            }
            EnvSpec::Tabular { n_obs, horizon, instance_seed } => {
                let mut rng = SimRng::substream(*instance_seed, 0x7ab);
                AnyEnv::Tabular(TabularNmdpEnv::random(*n_obs, *horizon, &mut rng)?)
            }
            EnvSpec::Dispatch { supply, training_seed } => {
                AnyEnv::Dispatch(DispatchEnv::new(*supply, *training_seed))
            }
        })
    }
}

pub const DESIGN_NAMES: [&str; 6] = ["random", "half_half", "epsilon_greedy", "nmdp", "tmdp", "mdp"];
pub const ENV_NAMES: [&str; 4] = ["binary_chain", "continuous", "tabular", "dispatch"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Random,
    HalfHalf,
    EpsilonGreedy,
    Nmdp,
    Tmdp,
    Mdp,
}

impl DesignKind {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "random" => DesignKind::Random,
            "half_half" => DesignKind::HalfHalf,
            "epsilon_greedy" => DesignKind::EpsilonGreedy,
            "nmdp" => DesignKind::Nmdp,
            "tmdp" => DesignKind::Tmdp,
            "mdp" => DesignKind::Mdp,
            other => return Err(Error::config(format!("unknown design '{other}'"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            DesignKind::Random => "random",
            DesignKind::HalfHalf => "half_half",
            DesignKind::EpsilonGreedy => "epsilon_greedy",
            DesignKind::Nmdp => "nmdp",
            DesignKind::Tmdp => "tmdp",
            DesignKind::Mdp => "mdp",
        }
    }

    /// The adaptive designs open with the deterministic burn-in schedule.
    pub fn has_burn_in(&self) -> bool {
        matches!(self, DesignKind::Nmdp | DesignKind::Tmdp | DesignKind::Mdp)
    }
}

/// Regression basis degree for continuous observation spaces; discrete
/// spaces always use one-hot indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisChoice {
    Auto,
    Constant,
    Linear,
    Quadratic,
}

impl BasisChoice {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "auto" => BasisChoice::Auto,
            "constant" => BasisChoice::Constant,
            "linear" => BasisChoice::Linear,
            "quadratic" => BasisChoice::Quadratic,
            other => {
                return Err(Error::config(format!(
                    "unknown basis '{other}' (expected auto, constant, linear or quadratic)"
                )))
            }
        })
    }

    /// Resolve against an environment's native observation form.
    pub fn map_for(self, env: &AnyEnv) -> crate::basis::FeatureMap {
        use crate::basis::FeatureMap;
        let native = env.feature_map();
        match (self, native) {
            (BasisChoice::Auto, m) => m,
            (BasisChoice::Constant, _) => FeatureMap::Constant,
            // discrete spaces keep their exact indicator basis
            (_, m @ FeatureMap::OneHot { .. }) => m,
            (BasisChoice::Linear, FeatureMap::Quadratic { dim } | FeatureMap::Linear { dim }) => {
                FeatureMap::Linear { dim }
            }
            (BasisChoice::Quadratic, m) => m,
            (BasisChoice::Linear, m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub clip: f64,
    pub sigma_floor: f64,
    pub epsilon: f64,
    pub basis: BasisChoice,
}

impl DesignSpec {
    pub fn id(&self) -> &'static str {
        self.kind.name()
    }

    pub fn build(&self, env: &AnyEnv, n: usize, m0: usize) -> Result<Box<dyn DesignPolicy>> {
        let map = self.basis.map_for(env);
        Ok(match self.kind {
            DesignKind::Random => Box::new(RandomDesign),
            DesignKind::HalfHalf => Box::new(HalfHalfDesign::new(n)),
            DesignKind::EpsilonGreedy => Box::new(EpsilonGreedyDesign::new(self.epsilon)),
            DesignKind::Nmdp => Box::new(NmdpDesign::new(map, m0, self.clip, self.sigma_floor)?),
            DesignKind::Tmdp => Box::new(TmdpDesign::new(
                map,
                env.horizon(),
                m0,
                self.clip,
                self.sigma_floor,
            )?),
            DesignKind::Mdp => Box::new(MdpDesign::new(map, m0, self.clip, self.sigma_floor)?),
        })
    }
}

/// Settings for the oracle verification subcommand.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub instances: usize,
    pub grid_steps: usize,
    pub resolution: f64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n: usize,
    pub m0: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub envs: Vec<EnvSpec>,
    pub designs: Vec<DesignSpec>,
    pub verify: VerifyConfig,
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let sections = parse_ini(text)?;
        let empty = HashMap::new();
        let exp = sections.get("experiment").unwrap_or(&empty);
        let n: usize = req_num(exp, "experiment", "n")?;
        let m0 = opt_num(exp, "experiment", "m0", (n / 4).max(2))?;
        let replicates = opt_num(exp, "experiment", "replicates", 200)?;
        let seed = opt_num(exp, "experiment", "seed", 1u64)?;
        let alpha = opt_num(exp, "experiment", "alpha", 0.05)?;
        let jobs = opt_num(exp, "experiment", "jobs", 1usize)?;
        if replicates == 0 {
            return Err(Error::config("[experiment] replicates must be at least 1"));
        }
        if 2 * m0 >= n {
            return Err(Error::config(format!(
                "[experiment] needs 2*m0 < n, got m0={m0}, n={n}"
            )));
        }
        let out = get(exp, "out").map(PathBuf::from);

        let env = sections
            .get("env")
            .ok_or_else(|| Error::config("missing [env] section"))?;
        let name = get(env, "name").ok_or_else(|| Error::config("[env] missing 'name'"))?;
        let envs = match name {
            "binary_chain" => {
                let p_s = opt_num(env, "env", "p_s", 0.8)?;
                let horizon = req_num(env, "env", "T")?;
                num_list(env, "env", "delta", 0.0)?
                    .into_iter()
                    .map(|delta| EnvSpec::BinaryChain { p_s, delta, horizon })
                    .collect()
            }
            "continuous" => {
                let delta_s = opt_num(env, "env", "delta_s", 0.0)?;
                let horizon = req_num(env, "env", "T")?;
                num_list(env, "env", "delta", 0.0)?
                    .into_iter()
                    .map(|delta| EnvSpec::Continuous { delta, delta_s, horizon })
                    .collect()
            }
            "tabular" => {
                let n_obs = opt_num(env, "env", "n_obs", 2usize)?;
                let horizon = req_num(env, "env", "T")?;
                let instance_seed = opt_num(env, "env", "instance_seed", seed)?;
                vec![EnvSpec::Tabular { n_obs, horizon, instance_seed }]
            }
            "dispatch" => {
                let supply = match get(env, "supply").unwrap_or("uniform") {
                    "uniform" => DriverSupply::UniformRange { lo: 25, hi: 30 },
                    "fixed25" => DriverSupply::Fixed(25),
                    "fixed50" => DriverSupply::Fixed(50),
                    other => {
                        return Err(Error::config(format!(
                            "[env] unknown supply '{other}' (expected uniform, fixed25 or fixed50)"
                        )))
                    }
                };
                let training_seed = opt_num(env, "env", "training_seed", 7u64)?;
                vec![EnvSpec::Dispatch { supply, training_seed }]
            }
            other => return Err(Error::config(format!("unknown environment '{other}'"))),
        };

        let dsec = sections.get("designs").unwrap_or(&empty);
        let clip = opt_num(dsec, "designs", "clip", DEFAULT_CLIP)?;
        let sigma_floor = opt_num(dsec, "designs", "sigma_floor", DEFAULT_SIGMA_FLOOR)?;
        let epsilon = opt_num(dsec, "designs", "epsilon", DEFAULT_EPSILON)?;
        let basis = BasisChoice::from_name(get(dsec, "basis").unwrap_or("auto"))?;
        let list = get(dsec, "list").unwrap_or("nmdp");
        let designs = list
            .split(',')
            .map(|name| {
                Ok(DesignSpec {
                    kind: DesignKind::from_name(name.trim())?,
                    clip,
                    sigma_floor,
                    epsilon,
                    basis,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if designs.is_empty() {
            return Err(Error::config("[designs] list resolves to no designs"));
        }

        let vsec = sections.get("verify").unwrap_or(&empty);
        let verify = VerifyConfig {
            instances: opt_num(vsec, "verify", "instances", 20usize)?,
            grid_steps: opt_num(vsec, "verify", "grid_steps", 100usize)?,
            resolution: opt_num(vsec, "verify", "resolution", 0.01)?,
        };

        Ok(BenchConfig {
            n,
            m0,
            replicates,
            seed,
            alpha,
            jobs: jobs.max(1),
            out,
            envs,
            designs,
            verify,
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}
