//! Settings from a TOML file and command-line flags. Flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::asymptotics::DEFAULT_N_GRID;
use crate::coverage::{uniform_grid, TruthSource, DEFAULT_GRID_POINTS, DEFAULT_PANEL_DRAWS, DEFAULT_REPLICATIONS, DEFAULT_POWER_LAW_EPS};
use crate::credible::DEFAULT_MC_DRAWS;
use crate::error::{Error, Result};
use crate::prior::{PriorFamily, PriorSpec, ScalingRule};
use crate::sequence::DEFAULT_TIME_HORIZON;

/// Smoothness assumed by rate matching and the power-law truth when none is given.
pub const DEFAULT_BETA: f64 = 2.5;

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// TOML file with any of the settings below
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Noise level(s) n, comma separated
    #[arg(long, value_delimiter = ',', value_name = "N[,N...]")]
    pub n: Vec<f64>,
    /// Prior family: poly or exp
    #[arg(long)]
    pub prior: Option<String>,
    /// Prior smoothness α
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Prior scale τ (polynomial prior only)
    #[arg(long)]
    pub tau: Option<f64>,
    /// Scaling rule: fixed or matched
    #[arg(long)]
    pub scaling: Option<String>,
    /// Target smoothness β for matched scaling and the power-law truth
    #[arg(long)]
    pub beta: Option<f64>,
    /// Credible level γ (sets have mass 1 - γ)
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Monte Carlo replications
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed of every random stream
    #[arg(long)]
    pub seed: Option<u64>,
    /// Grid: N values for `lemmas`; for plots either a point count or explicit x values
    #[arg(long, value_delimiter = ',', value_name = "V[,V...]")]
    pub grid: Vec<f64>,
    /// Fixed truncation level
    #[arg(long)]
    pub trunc: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Truth: cubic, power or prior
    #[arg(long)]
    pub truth: Option<String>,
    /// Evaluation point of the functional used for interval coverage
    #[arg(long)]
    pub x: Option<f64>,
    /// Monte Carlo draws per radius quantile
    #[arg(long)]
    pub mc_draws: Option<usize>,
    /// Posterior draws per plotted panel
    #[arg(long)]
    pub draws: Option<usize>,
    /// Time horizon T of the heat equation
    #[arg(long)]
    pub time_horizon: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<OneOrMany>,
    prior: Option<String>,
    alpha: Option<f64>,
    tau: Option<f64>,
    scaling: Option<String>,
    beta: Option<f64>,
    gamma: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    grid: Option<OneOrMany>,
    trunc: Option<usize>,
    out: Option<PathBuf>,
    truth: Option<String>,
    x: Option<f64>,
    mc_draws: Option<usize>,
    draws: Option<usize>,
    time_horizon: Option<f64>,
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub n_grid: Vec<f64>,
    pub prior: PriorSpec,
    pub scaling: ScalingRule,
    pub beta: f64,
    pub gamma: f64,
    pub reps: usize,
    pub seed: u64,
    pub grid: Vec<f64>,
    pub trunc: Option<usize>,
    pub out: PathBuf,
    pub truth: String,
    pub x: f64,
    pub mc_draws: usize,
    pub draws: usize,
    pub time_horizon: f64,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn pick_list(flag: Vec<f64>, file: Option<OneOrMany>) -> Option<Vec<f64>> {
    if !flag.is_empty() {
        Some(flag)
    } else {
        file.map(OneOrMany::into_vec)
    }
}

impl Settings {
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let family: PriorFamily = pick(args.prior.clone(), file.prior)
            .as_deref()
            .unwrap_or("poly")
            .parse()?;
        let alpha = pick(args.alpha, file.alpha).unwrap_or(1.0);
        let tau = pick(args.tau, file.tau);
        let prior = PriorSpec::from_parts(family, alpha, tau).map_err(|e| match e {
            Error::Domain(m) => Error::config("alpha/tau", m),
            other => other,
        })?;
        let beta = pick(args.beta, file.beta).unwrap_or(DEFAULT_BETA);
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("beta", format!("must be positive, got {beta}")));
        }
        let scaling = match pick(args.scaling.clone(), file.scaling).as_deref().unwrap_or("fixed") {
            "fixed" => ScalingRule::Fixed,
            "matched" => ScalingRule::RateMatched { beta_target: beta },
            other => {
                return Err(Error::config("scaling", format!("unknown rule `{other}` (expected fixed or matched)")))
            }
        };
        let n_grid = pick_list(args.n.clone(), file.n).unwrap_or_else(|| vec![1e4]);
        if n_grid.is_empty() {
            return Err(Error::config("n", "no noise level given"));
        }
        if let Some(n) = n_grid.iter().find(|&&n| !(n > 0.0 && n.is_finite())) {
            return Err(Error::config("n", format!("noise levels must be positive, got {n}")));
        }
        let gamma = pick(args.gamma, file.gamma).unwrap_or(0.05);
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1), got {gamma}")));
        }
        let reps = pick(args.reps, file.reps).unwrap_or(DEFAULT_REPLICATIONS);
        if reps == 0 {
            return Err(Error::config("reps", "at least one replication is needed"));
        }
        let trunc = pick(args.trunc, file.trunc);
        if trunc == Some(0) {
            return Err(Error::config("trunc", "truncation must be at least 1"));
        }
        let truth = pick(args.truth.clone(), file.truth).unwrap_or_else(|| "cubic".to_string());
        if !matches!(truth.as_str(), "cubic" | "power" | "prior") {
            return Err(Error::config("truth", format!("unknown truth `{truth}` (expected cubic, power or prior)")));
        }
        let x = pick(args.x, file.x).unwrap_or(0.5);
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::config("x", format!("evaluation point must lie in [0, 1], got {x}")));
        }
        let time_horizon = pick(args.time_horizon, file.time_horizon).unwrap_or(DEFAULT_TIME_HORIZON);
        if !(time_horizon > 0.0 && time_horizon.is_finite()) {
            return Err(Error::config("time_horizon", format!("must be positive, got {time_horizon}")));
        }
        let mc_draws = pick(args.mc_draws, file.mc_draws).unwrap_or(DEFAULT_MC_DRAWS);
        if mc_draws < 2 {
            return Err(Error::config("mc_draws", "need at least two draws"));
        }
        Ok(Self {
            n_grid,
            prior,
            scaling,
            beta,
            gamma,
            reps,
            seed: pick(args.seed, file.seed).unwrap_or(0),
            grid: pick_list(args.grid.clone(), file.grid).unwrap_or_default(),
            trunc,
            out: pick(args.out.clone(), file.out).unwrap_or_else(|| PathBuf::from("heatbayes-out")),
            truth,
            x,
            mc_draws,
            draws: pick(args.draws, file.draws).unwrap_or(DEFAULT_PANEL_DRAWS),
            time_horizon,
        })
    }

    pub fn truth_source(&self) -> TruthSource {
        match self.truth.as_str() {
            "power" => TruthSource::PowerLaw {
                beta: self.beta,
                eps: DEFAULT_POWER_LAW_EPS,
            },
            "prior" => TruthSource::PriorDraw,
            _ => TruthSource::Cubic,
        }
    }

    /// The `x` grid: 201 points by default, `k` points for a single value, or
    /// the listed points.
    pub fn x_grid(&self) -> Result<Vec<f64>> {
        match self.grid.as_slice() {
            [] => Ok(uniform_grid(DEFAULT_GRID_POINTS)),
            [k] => {
                if *k >= 2.0 && k.fract() == 0.0 && *k <= 1e6 {
                    Ok(uniform_grid(*k as usize))
                } else {
                    Err(Error::config("grid", format!("a single grid value is a point count >= 2, got {k}")))
                }
            }
            xs => {
                if xs.iter().all(|x| (0.0..=1.0).contains(x)) {
                    Ok(xs.to_vec())
                } else {
                    Err(Error::config("grid", "x grid values must lie in [0, 1]"))
                }
            }
        }
    }

    /// The `N` grid of the lemma checks.
    pub fn n_grid_for_lemmas(&self) -> Result<Vec<f64>> {
        if self.grid.is_empty() {
            return Ok(DEFAULT_N_GRID.to_vec());
        }
        if let Some(v) = self.grid.iter().find(|&&v| !(v > 1.0 && v.is_finite())) {
            return Err(Error::config("grid", format!("lemma grid values must exceed 1, got {v}")));
        }
        Ok(self.grid.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = Settings::resolve(&CommonArgs::default()).unwrap();
        assert_eq!(s.n_grid, vec![1e4]);
        assert_eq!(s.prior, PriorSpec::polynomial(1.0, 1.0).unwrap());
        assert_eq!(s.x_grid().unwrap().len(), 201);
        assert_eq!(s.n_grid_for_lemmas().unwrap(), DEFAULT_N_GRID.to_vec());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "n = [100, 1e6]\nprior = \"exp\"\nalpha = 5\nseed = 3\n").unwrap();
        let mut args = CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        };
        let s = Settings::resolve(&args).unwrap();
        assert_eq!(s.n_grid, vec![100.0, 1e6]);
        assert_eq!(s.prior, PriorSpec::exponential(5.0).unwrap());
        args.seed = Some(9);
        args.n = vec![1e8];
        let s = Settings::resolve(&args).unwrap();
        assert_eq!((s.seed, s.n_grid.clone()), (9, vec![1e8]));
    }

    #[test]
    fn malformed_file_reports_location() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "seed = 1\nalpah = 2\n").unwrap();
        let err = Settings::resolve(&CommonArgs {
            config: Some(path),
            ..CommonArgs::default()
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("alpah") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for args in [
            CommonArgs { prior: Some("gauss".into()), ..Default::default() },
            CommonArgs { prior: Some("exp".into()), tau: Some(2.0), ..Default::default() },
            CommonArgs { gamma: Some(1.5), ..Default::default() },
            CommonArgs { n: vec![-1.0], ..Default::default() },
            CommonArgs { alpha: Some(-1.0), ..Default::default() },
            CommonArgs { scaling: Some("auto".into()), ..Default::default() },
        ] {
            assert_eq!(Settings::resolve(&args).unwrap_err().exit_code(), 2);
        }
    }
}
