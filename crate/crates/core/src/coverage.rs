//! Monte Carlo experiments: risk curves, ball and interval coverage, radius
//! ratios, pointwise-band coverage and figure panel data.
//!
//! Replication `r` at grid index `b` draws its noise (and, for prior-drawn
//! truths, its truth) from `StreamKey::replication(seed, purpose, b, r)`, so
//! results do not depend on the number of worker threads. Per-replication
//! results are collected in order and reduced sequentially.

use rayon::prelude::*;
use serde::Serialize;

use crate::credible::{credible_radius, frequentist_radius_for, DEFAULT_MC_DRAWS};
use crate::error::{Error, Result};
use crate::functional::{
    admissible_band_truncation, check_admissible, credible_interval, functional_posterior_for,
    normal_critical_value, pointwise_band_for, LinearFunctional, BAND_ADMISSIBILITY_TOL,
    DEFAULT_ADMISSIBILITY_TOL,
};
use crate::posterior::{posterior_draw_keyed, ConjugateWeights, RiskDecomposition};
use crate::prior::{prior_variances, PriorFamily, PriorSpec, ScalingRule, ScalingTarget};
use crate::rng::{NormalStream, Purpose, StreamKey};
use crate::sequence::{
    default_truncation, heat_eigenvalues, simulate_observations_keyed, true_signal,
    true_signal_coefficients, CoefficientSequence, SineBasisGrid, DEFAULT_TIME_HORIZON,
};
use crate::summation::compensated_sum;

/// Replications per grid point for coverage estimates.
pub const DEFAULT_REPLICATIONS: usize = 1000;

/// Points of the default `x` grid on `[0, 1]`.
pub const DEFAULT_GRID_POINTS: usize = 201;

/// Posterior draws shown in every figure panel.
pub const DEFAULT_PANEL_DRAWS: usize = 20;

/// Largest truncation tried when searching for an admissible one.
pub const MAX_TRUNCATION: usize = 1 << 20;

/// Offset `ε` of the power-law truth `μ_{0,i} = i^{-1/2-β-ε}`.
pub const DEFAULT_POWER_LAW_EPS: f64 = 0.01;

/// `k + 1` equispaced points on `[0, 1]`, endpoints included.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..points).map(|j| j as f64 / (points - 1) as f64).collect(),
    }
}

/// Where the true parameter comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum TruthSource {
    /// The cubic `μ₀(x) = 4x(x-1)(8x-5)`.
    Cubic,
    /// Fixed coefficients, zero beyond the stored ones.
    Explicit(CoefficientSequence),
    /// `μ_{0,i} = i^{-1/2-β-ε}`.
    PowerLaw { beta: f64, eps: f64 },
    /// A fresh draw from the prior in every replication.
    PriorDraw,
}

impl TruthSource {
    pub fn is_random(&self) -> bool {
        matches!(self, TruthSource::PriorDraw)
    }

    /// Coefficients of a fixed truth at truncation `len`, with a tail bound when
    /// one is known. `None` for prior-drawn truths.
    pub fn fixed_coefficients(&self, len: usize) -> Result<Option<CoefficientSequence>> {
        match self {
            TruthSource::Cubic => true_signal_coefficients(len).map(Some),
            TruthSource::Explicit(mu) => mu.resized(len).map(Some),
            TruthSource::PowerLaw { beta, eps } => {
                let e = 0.5 + beta + eps;
                if !(e > 0.5) {
                    return Err(Error::domain("power-law truth needs beta + eps > 0"));
                }
                let tail = (len as f64).powf(1.0 - 2.0 * e) / (2.0 * e - 1.0);
                Ok(Some(
                    CoefficientSequence::from_fn(len, |i| (i as f64).powf(-e))?
                        .with_tail_tol(tail),
                ))
            }
            TruthSource::PriorDraw => Ok(None),
        }
    }

    /// `μ₀(x)` on the grid: closed form for the cubic, synthesis otherwise.
    fn curve(&self, mu0: &CoefficientSequence, basis: &SineBasisGrid) -> Result<Vec<f64>> {
        match self {
            TruthSource::Cubic => Ok(basis.grid().iter().map(|&x| true_signal(x)).collect()),
            _ => basis.synthesize(mu0.values()),
        }
    }
}

/// A draw `μ_i = √λ_i Z_i` from the prior.
pub fn prior_draw(lambda: &CoefficientSequence, key: StreamKey) -> CoefficientSequence {
    let mut z = NormalStream::new(key);
    let values = lambda.iter().map(|l| l.sqrt() * z.next_normal()).collect();
    CoefficientSequence::new(values).expect("finite variances give finite draws")
}

/// A linear functional described independently of the truncation level.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum FunctionalSpec {
    PointEvaluation(f64),
    Coordinate(usize),
    Representer(f64),
}

impl FunctionalSpec {
    pub fn at(&self, truncation: usize) -> Result<LinearFunctional> {
        match *self {
            FunctionalSpec::PointEvaluation(x) => LinearFunctional::point_evaluation(x, truncation),
            FunctionalSpec::Coordinate(k) => LinearFunctional::coordinate(k, truncation),
            FunctionalSpec::Representer(q) => LinearFunctional::sobolev_representer(q, truncation),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub scaling: ScalingRule,
    pub n_grid: Vec<f64>,
    pub gamma: f64,
    pub replications: usize,
    pub truth: TruthSource,
    pub seed: u64,
    pub time_horizon: f64,
    /// Fixed truncation; the default rule is used when absent.
    pub truncation: Option<usize>,
    /// Monte Carlo draws for each radius quantile.
    pub mc_draws: usize,
}

impl ExperimentConfig {
    /// Cubic truth, fixed scale, `γ = 0.05`, 1000 replications, seed 0.
    pub fn new(prior: PriorSpec, n_grid: Vec<f64>) -> Self {
        Self {
            prior,
            scaling: ScalingRule::Fixed,
            n_grid,
            gamma: 0.05,
            replications: DEFAULT_REPLICATIONS,
            truth: TruthSource::Cubic,
            seed: 0,
            time_horizon: DEFAULT_TIME_HORIZON,
            truncation: None,
            mc_draws: DEFAULT_MC_DRAWS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::config("n", "the grid of noise levels is empty"));
        }
        if let Some(n) = self.n_grid.iter().find(|&&n| !(n > 0.0 && n.is_finite())) {
            return Err(Error::config("n", format!("noise levels must be positive, got {n}")));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        if self.replications == 0 {
            return Err(Error::config("reps", "at least one replication is needed"));
        }
        if !(self.time_horizon > 0.0 && self.time_horizon.is_finite()) {
            return Err(Error::config("time_horizon", "must be positive"));
        }
        if self.truncation == Some(0) {
            return Err(Error::config("trunc", "truncation must be at least 1"));
        }
        if self.mc_draws < 2 {
            return Err(Error::config("mc_draws", "need at least two Monte Carlo draws"));
        }
        if self.truth.is_random() && self.scaling != ScalingRule::Fixed {
            return Err(Error::config(
                "scaling",
                "prior-drawn truths are only defined for a fixed prior",
            ));
        }
        Ok(())
    }

    fn prior_at(&self, n: f64, target: ScalingTarget) -> Result<PriorSpec> {
        self.scaling.resolve(&self.prior, n, target)
    }

    fn truncation_for(&self, prior: &PriorSpec, n: f64) -> usize {
        self.truncation
            .unwrap_or_else(|| default_truncation(n, prior.tau(), self.time_horizon))
    }
}

/// Everything that is fixed at one noise level.
struct Level {
    block: u32,
    n: f64,
    prior: PriorSpec,
    kappa: CoefficientSequence,
    lambda: CoefficientSequence,
    weights: ConjugateWeights,
    fixed_truth: Option<CoefficientSequence>,
}

impl Level {
    fn new(cfg: &ExperimentConfig, block: usize, target: ScalingTarget, min_trunc: usize) -> Result<Self> {
        let n = cfg.n_grid[block];
        let prior = cfg.prior_at(n, target)?;
        let len = cfg.truncation_for(&prior, n).max(min_trunc);
        Self::with_truncation(cfg, block, prior, len)
    }

    fn with_truncation(cfg: &ExperimentConfig, block: usize, prior: PriorSpec, len: usize) -> Result<Self> {
        let n = cfg.n_grid[block];
        let kappa = heat_eigenvalues(cfg.time_horizon, len)?;
        let lambda = prior_variances(&prior, len)?;
        let weights = ConjugateWeights::new(&lambda, &kappa, n)?;
        Ok(Self {
            block: block as u32,
            n,
            prior,
            kappa,
            lambda,
            weights,
            fixed_truth: cfg.truth.fixed_coefficients(len)?,
        })
    }

    fn len(&self) -> usize {
        self.kappa.truncation_level()
    }

    /// Truth and observations for replication `rep`.
    fn simulate(&self, seed: u64, rep: usize) -> Result<(CoefficientSequence, Vec<f64>)> {
        let rep = rep as u32;
        let mu0 = match &self.fixed_truth {
            Some(mu) => mu.clone(),
            None => prior_draw(
                &self.lambda,
                StreamKey::replication(seed, Purpose::PriorDraw, self.block, rep),
            ),
        };
        let obs = simulate_observations_keyed(
            &mu0,
            &self.kappa,
            self.n,
            StreamKey::replication(seed, Purpose::Observation, self.block, rep),
        )?;
        Ok((mu0, obs.y.into_values()))
    }

    /// Truth and posterior mean for replication `rep`.
    fn replicate(&self, seed: u64, rep: usize) -> Result<(CoefficientSequence, Vec<f64>)> {
        let (mu0, y) = self.simulate(seed, rep)?;
        let mean = self.weights.posterior_mean(&y)?;
        Ok((mu0, mean))
    }

    fn exact_risk(&self) -> Result<f64> {
        match &self.fixed_truth {
            Some(mu0) => Ok(RiskDecomposition::from_weights(&self.weights, mu0)?.posterior_risk()),
            None => {
                // Averaged over μ₀ ~ prior: E μ_{0,i}² = λ_i.
                let sq_bias = compensated_sum(
                    self.lambda
                        .iter()
                        .zip(self.weights.damping())
                        .map(|(l, d)| l * d * d),
                );
                Ok(sq_bias
                    + compensated_sum(self.weights.shrink().iter().copied())
                    + compensated_sum(self.weights.spread().iter().copied()))
            }
        }
    }
}

/// One noise level of an experiment. Fields an experiment does not measure are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub n: f64,
    pub tau: f64,
    pub truncation: usize,
    pub replications: usize,
    pub ball_coverage: Option<f64>,
    pub ball_coverage_se: Option<f64>,
    pub credible_radius: Option<f64>,
    pub frequentist_radius: Option<f64>,
    /// `r_{n,γ} / r̃_{n,γ}`
    pub radius_ratio: Option<f64>,
    /// Closed-form `E‖μ̂ - μ₀‖² + Σ s_{i,n}`.
    pub risk_exact: Option<f64>,
    pub risk_mc: Option<f64>,
    pub risk_mc_se: Option<f64>,
    pub interval_coverage: Option<f64>,
    pub interval_coverage_se: Option<f64>,
    pub band_coverage: Option<f64>,
    pub band_coverage_se: Option<f64>,
}

impl ExperimentRow {
    fn start(level: &Level, replications: usize) -> Self {
        Self {
            n: level.n,
            tau: level.prior.tau(),
            truncation: level.len(),
            replications,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub prior: String,
    pub gamma: f64,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentReport {
    fn new(kind: &str, cfg: &ExperimentConfig, rows: Vec<ExperimentRow>) -> Self {
        Self {
            experiment: kind.to_string(),
            prior: cfg.prior.to_string(),
            gamma: cfg.gamma,
            rows,
        }
    }
}

/// Proportion of hits and its binomial standard error.
pub fn binomial_estimate(hits: usize, trials: usize) -> (f64, f64) {
    let p = hits as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Sample mean and the standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (k - 1.0);
    (mean, (var / k).sqrt())
}

fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)))
}

/// Empirical frequency of `‖μ̂ - μ₀‖ ≤ r_{n,γ}`, with the credible radius, the
/// frequentist radius (fixed truths only) and their ratio.
pub fn run_ball_coverage(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for block in 0..cfg.n_grid.len() {
        let level = Level::new(cfg, block, ScalingTarget::Full, 1)?;
        let (radius, _) = credible_radius(level.weights.spread(), cfg.gamma, cfg.mc_draws, cfg.seed)?;
        let hits: Vec<bool> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let (mu0, mean) = level.replicate(cfg.seed, rep)?;
                Ok(sq_distance(&mean, mu0.values()) <= radius * radius)
            })
            .collect::<Result<_>>()?;
        let (cov, se) = binomial_estimate(hits.iter().filter(|&&h| h).count(), hits.len());
        let mut row = ExperimentRow::start(&level, cfg.replications);
        row.ball_coverage = Some(cov);
        row.ball_coverage_se = Some(se);
        row.credible_radius = Some(radius);
        if let Some(mu0) = &level.fixed_truth {
            let r_tilde =
                frequentist_radius_for(&level.weights, mu0, cfg.gamma, cfg.mc_draws, cfg.seed)?
                    .value;
            row.frequentist_radius = Some(r_tilde);
            row.radius_ratio = Some(radius / r_tilde);
        }
        rows.push(row);
    }
    Ok(ExperimentReport::new("ball_coverage", cfg, rows))
}

/// Smallest power-of-two multiple of `start` at which `functional` is admissible.
fn admissible_truncation(
    spec: &FunctionalSpec,
    prior: &PriorSpec,
    start: usize,
    tolerance: f64,
) -> Result<usize> {
    let mut len = start.max(1);
    loop {
        let l = spec.at(len)?;
        let lambda = prior_variances(prior, len)?;
        match check_admissible(l.l.values(), lambda.values(), tolerance) {
            Ok(()) => return Ok(len),
            Err(e) if len >= MAX_TRUNCATION => return Err(e),
            Err(_) => len *= 2,
        }
    }
}

/// Empirical frequency of `Lμ₀ ∈ [mean ± z_{γ/2} s_n]`. The truncation is
/// doubled from the default until `L` is admissible.
pub fn run_interval_coverage(cfg: &ExperimentConfig, functional: &FunctionalSpec) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for block in 0..cfg.n_grid.len() {
        let n = cfg.n_grid[block];
        let prior = cfg.prior_at(n, ScalingTarget::Functional)?;
        let start = cfg.truncation_for(&prior, n);
        let len = if cfg.truncation.is_some() {
            start
        } else {
            admissible_truncation(functional, &prior, start, DEFAULT_ADMISSIBILITY_TOL)?
        };
        let level = Level::with_truncation(cfg, block, prior, len)?;
        let l = functional.at(len)?;
        let hits: Vec<bool> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let (mu0, y) = level.simulate(cfg.seed, rep)?;
                let fp = functional_posterior_for(&l, &level.weights, &y, DEFAULT_ADMISSIBILITY_TOL)?;
                let (lo, hi) = credible_interval(&fp, cfg.gamma)?;
                let target = l.apply(&mu0)?;
                Ok(lo <= target && target <= hi)
            })
            .collect::<Result<_>>()?;
        let (cov, se) = binomial_estimate(hits.iter().filter(|&&h| h).count(), hits.len());
        let mut row = ExperimentRow::start(&level, cfg.replications);
        row.interval_coverage = Some(cov);
        row.interval_coverage_se = Some(se);
        rows.push(row);
    }
    Ok(ExperimentReport::new("interval_coverage", cfg, rows))
}

/// Posterior risk `E‖μ̂ - μ₀‖² + Σ s_{i,n}`: closed form and Monte Carlo.
pub fn run_risk_curve(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for block in 0..cfg.n_grid.len() {
        let level = Level::new(cfg, block, ScalingTarget::Full, 1)?;
        let spread = compensated_sum(level.weights.spread().iter().copied());
        let losses: Vec<f64> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let (mu0, mean) = level.replicate(cfg.seed, rep)?;
                Ok(sq_distance(&mean, mu0.values()) + spread)
            })
            .collect::<Result<_>>()?;
        let (risk, se) = mean_and_se(&losses);
        let mut row = ExperimentRow::start(&level, cfg.replications);
        row.risk_exact = Some(level.exact_risk()?);
        row.risk_mc = Some(risk);
        row.risk_mc_se = Some(se);
        rows.push(row);
    }
    Ok(ExperimentReport::new("risk", cfg, rows))
}

/// Truncation for pointwise bands on `grid`: the default, doubled until every
/// point evaluation passes the band admissibility tolerance.
pub fn band_truncation(prior: &PriorSpec, grid: &[f64], start: usize) -> Result<usize> {
    admissible_band_truncation(prior, grid, start, MAX_TRUNCATION, BAND_ADMISSIBILITY_TOL).ok_or(
        Error::Inadmissible {
            relative_tail: f64::NAN,
            tolerance: BAND_ADMISSIBILITY_TOL,
        },
    )
}

/// Average fraction of grid points where the pointwise band covers `μ₀(x)`.
pub fn run_band_coverage(cfg: &ExperimentConfig, grid: &[f64]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::config("grid", "the x grid is empty"));
    }
    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for block in 0..cfg.n_grid.len() {
        let n = cfg.n_grid[block];
        let prior = cfg.prior_at(n, ScalingTarget::Functional)?;
        let start = cfg.truncation_for(&prior, n);
        let len = match cfg.truncation {
            Some(t) => t,
            None => band_truncation(&prior, grid, start)?,
        };
        let level = Level::with_truncation(cfg, block, prior, len)?;
        let basis = SineBasisGrid::new(grid, len)?;
        let fixed_curve = match &level.fixed_truth {
            Some(mu0) => Some(cfg.truth.curve(mu0, &basis)?),
            None => None,
        };
        let fractions: Vec<f64> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let (mu0, mean) = level.replicate(cfg.seed, rep)?;
                let center = basis.synthesize(&mean)?;
                let truth = match &fixed_curve {
                    Some(c) => c.clone(),
                    None => basis.synthesize(mu0.values())?,
                };
                let half = band_half_widths(&level.weights, grid, cfg.gamma)?;
                let hits = center
                    .iter()
                    .zip(&half)
                    .zip(&truth)
                    .filter(|((c, h), f)| (*c - *h) <= **f && **f <= (*c + *h))
                    .count();
                Ok(hits as f64 / grid.len() as f64)
            })
            .collect::<Result<_>>()?;
        let (frac, se) = mean_and_se(&fractions);
        let mut row = ExperimentRow::start(&level, cfg.replications);
        row.band_coverage = Some(frac);
        row.band_coverage_se = Some(se);
        rows.push(row);
    }
    Ok(ExperimentReport::new("band_coverage", cfg, rows))
}

/// `z_{γ/2} s_n(x)` at each grid point. It does not depend on the data.
fn band_half_widths(weights: &ConjugateWeights, grid: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let zeros = vec![0.0; weights.truncation_level()];
    let band = pointwise_band_for(weights, &zeros, grid, gamma, BAND_ADMISSIBILITY_TOL)?;
    Ok(band.upper)
}

/// One panel of a figure: a prior, a noise level and an independent data set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PanelSpec {
    pub prior: PriorSpec,
    pub n: f64,
    /// Stream id of this panel's data; distinct panels use distinct ids.
    pub stream: u32,
}

/// The four figure layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FigurePreset {
    /// Polynomial prior, `n = 10⁴`, five panels each for `α = 1` and `α = 3`.
    PolynomialSmoothness,
    /// Exponential prior, `n = 10⁴`, five panels each for `α = 1` and `α = 5`.
    ExponentialSmoothness,
    /// Polynomial prior, `α ∈ {1/2, 1, 2, 5, 10}` at `n = 10⁴` and `n = 10⁸`.
    PolynomialSampleSize,
    /// Exponential prior, same layout as the polynomial sample-size figure.
    ExponentialSampleSize,
}

impl FigurePreset {
    pub const ALL: [FigurePreset; 4] = [
        FigurePreset::PolynomialSmoothness,
        FigurePreset::ExponentialSmoothness,
        FigurePreset::PolynomialSampleSize,
        FigurePreset::ExponentialSampleSize,
    ];

    pub fn number(&self) -> u32 {
        match self {
            FigurePreset::PolynomialSmoothness => 1,
            FigurePreset::ExponentialSmoothness => 2,
            FigurePreset::PolynomialSampleSize => 3,
            FigurePreset::ExponentialSampleSize => 4,
        }
    }

    pub fn from_number(k: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.number() == k)
            .ok_or_else(|| Error::config("figure", format!("unknown figure {k} (expected 1 to 4)")))
    }

    fn family(&self) -> PriorFamily {
        match self {
            FigurePreset::PolynomialSmoothness | FigurePreset::PolynomialSampleSize => {
                PriorFamily::Polynomial
            }
            _ => PriorFamily::Exponential,
        }
    }

    /// Left column first, top to bottom, then the right column.
    pub fn panels(&self) -> Result<Vec<PanelSpec>> {
        let family = self.family();
        let layout: Vec<(f64, f64)> = match self {
            FigurePreset::PolynomialSmoothness => {
                [1.0, 3.0].iter().flat_map(|&a| [(a, 1e4); 5]).collect()
            }
            FigurePreset::ExponentialSmoothness => {
                [1.0, 5.0].iter().flat_map(|&a| [(a, 1e4); 5]).collect()
            }
            _ => [1e4, 1e8]
                .iter()
                .flat_map(|&n| [0.5, 1.0, 2.0, 5.0, 10.0].map(|a| (a, n)))
                .collect(),
        };
        layout
            .into_iter()
            .enumerate()
            .map(|(k, (alpha, n))| {
                Ok(PanelSpec {
                    prior: PriorSpec::from_parts(family, alpha, None)?,
                    n,
                    stream: self.number() * 100 + k as u32,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureConfig {
    pub seed: u64,
    pub gamma: f64,
    pub grid: Vec<f64>,
    pub draws: usize,
    pub time_horizon: f64,
    pub truth: TruthSource,
    /// Fixed truncation; by default the band admissibility search picks one.
    pub truncation: Option<usize>,
}

impl FigureConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            gamma: 0.05,
            grid: uniform_grid(DEFAULT_GRID_POINTS),
            draws: DEFAULT_PANEL_DRAWS,
            time_horizon: DEFAULT_TIME_HORIZON,
            truth: TruthSource::Cubic,
            truncation: None,
        }
    }
}

/// Curves of one panel on the `x` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PanelData {
    pub spec: PanelSpec,
    pub truncation: usize,
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub post_mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// One curve per posterior draw.
    pub draws: Vec<Vec<f64>>,
}

impl PanelData {
    /// Fraction of grid points where the band covers the true curve.
    pub fn coverage_fraction(&self) -> f64 {
        let hits = self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(&self.truth)
            .filter(|((lo, hi), f)| *lo <= *f && *f <= *hi)
            .count();
        hits as f64 / self.x.len() as f64
    }

    pub fn label(&self) -> String {
        format!(
            "{} n={:e} draws={}",
            self.spec.prior,
            self.spec.n,
            self.draws.len()
        )
    }
}

/// Truth, posterior mean, pointwise band and posterior draws for each panel.
pub fn emit_figure_data(cfg: &FigureConfig, panels: &[PanelSpec]) -> Result<Vec<PanelData>> {
    if cfg.grid.is_empty() {
        return Err(Error::config("grid", "the x grid is empty"));
    }
    if cfg.truth.is_random() {
        return Err(Error::config("truth", "figures need a fixed truth"));
    }
    normal_critical_value(cfg.gamma)?;
    panels.iter().map(|spec| panel_data(cfg, spec)).collect()
}

fn panel_data(cfg: &FigureConfig, spec: &PanelSpec) -> Result<PanelData> {
    let len = match cfg.truncation {
        Some(t) => t,
        None => band_truncation(
            &spec.prior,
            &cfg.grid,
            default_truncation(spec.n, spec.prior.tau(), cfg.time_horizon),
        )?,
    };
    let kappa = heat_eigenvalues(cfg.time_horizon, len)?;
    let mu0 = cfg
        .truth
        .fixed_coefficients(len)?
        .expect("fixed truth checked by the caller");
    let weights = ConjugateWeights::from_prior(&spec.prior, &kappa, spec.n)?;
    let obs = simulate_observations_keyed(
        &mu0,
        &kappa,
        spec.n,
        StreamKey::replication(cfg.seed, Purpose::Observation, spec.stream, 0),
    )?;
    let band = pointwise_band_for(&weights, obs.y.values(), &cfg.grid, cfg.gamma, BAND_ADMISSIBILITY_TOL)?;
    let basis = SineBasisGrid::new(&cfg.grid, len)?;
    let summary = weights.summarize(&obs)?;
    let draws = (0..cfg.draws)
        .into_par_iter()
        .map(|d| {
            let key = StreamKey::replication(cfg.seed, Purpose::PosteriorDraw, spec.stream, d as u32);
            basis.synthesize(posterior_draw_keyed(&summary, key).values())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PanelData {
        spec: *spec,
        truncation: len,
        x: cfg.grid.clone(),
        truth: cfg.truth.curve(&mu0, &basis)?,
        post_mean: band.center,
        lower: band.lower,
        upper: band.upper,
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(prior: PriorSpec, n_grid: Vec<f64>, reps: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(prior, n_grid);
        cfg.replications = reps;
        cfg.mc_draws = 20_000;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn grid_shape() {
        let g = uniform_grid(201);
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[100], 0.5);
        assert_eq!(g[200], 1.0);
    }

    #[test]
    fn config_validation() {
        let prior = PriorSpec::polynomial(1.0, 1.0).unwrap();
        let mut cfg = small(prior, vec![1e4], 10);
        assert!(cfg.validate().is_ok());
        cfg.replications = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let mut cfg = small(prior, vec![-1.0], 10);
        assert!(cfg.validate().is_err());
        cfg.n_grid = vec![];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let prior = PriorSpec::polynomial(1.0, 1.0).unwrap();
        let cfg = small(prior, vec![1e4, 1e6], 64);
        let a = run_risk_curve(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_risk_curve(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_truth_risk_is_variance_plus_spread() {
        let prior = PriorSpec::exponential(1.0).unwrap();
        let mut cfg = small(prior, vec![1e4], 2);
        cfg.truth = TruthSource::Explicit(CoefficientSequence::zeros(5).unwrap());
        let report = run_risk_curve(&cfg).unwrap();
        let row = &report.rows[0];
        let kappa = heat_eigenvalues(0.1, row.truncation).unwrap();
        let w = ConjugateWeights::from_prior(&prior, &kappa, 1e4).unwrap();
        let expected = compensated_sum(w.shrink().iter().copied()) + compensated_sum(w.spread().iter().copied());
        assert_eq!(row.risk_exact.unwrap(), expected);
    }

    #[test]
    fn monte_carlo_risk_agrees_with_closed_form() {
        for prior in [PriorSpec::polynomial(1.0, 1.0).unwrap(), PriorSpec::exponential(1.0).unwrap()] {
            for truth in [TruthSource::Cubic, TruthSource::PriorDraw] {
                let mut cfg = small(prior, vec![1e2, 1e6], 2000);
                cfg.truth = truth;
                for row in run_risk_curve(&cfg).unwrap().rows {
                    let diff = (row.risk_mc.unwrap() - row.risk_exact.unwrap()).abs();
                    assert!(diff < 4.0 * row.risk_mc_se.unwrap(), "{row:?}");
                }
            }
        }
    }

    #[test]
    fn coverage_estimates_are_probabilities() {
        let prior = PriorSpec::polynomial(3.0, 1.0).unwrap();
        let cfg = small(prior, vec![1e2, 1e6], 50);
        let report = run_ball_coverage(&cfg).unwrap();
        for row in &report.rows {
            let c = row.ball_coverage.unwrap();
            assert!((0.0..=1.0).contains(&c));
            let (_, se) = binomial_estimate((c * 50.0).round() as usize, 50);
            assert_eq!(row.ball_coverage_se.unwrap(), se);
            assert!(row.radius_ratio.unwrap() > 0.0);
        }
    }

    #[test]
    fn prior_draws_have_prior_variance() {
        let lambda = prior_variances(&PriorSpec::polynomial(0.5, 1.0).unwrap(), 3).unwrap();
        let draws: Vec<CoefficientSequence> = (0..20_000)
            .map(|r| prior_draw(&lambda, StreamKey::replication(5, Purpose::PriorDraw, 0, r)))
            .collect();
        for i in 1..=3 {
            let v: f64 = draws.iter().map(|d| d.get(i) * d.get(i)).sum::<f64>() / 20_000.0;
            let l = lambda.get(i);
            assert!((v / l - 1.0).abs() < 4.0 * (2.0f64 / 20_000.0).sqrt());
        }
    }

    #[test]
    fn power_law_truth() {
        let t = TruthSource::PowerLaw { beta: 1.0, eps: 0.01 };
        let mu = t.fixed_coefficients(10).unwrap().unwrap();
        assert!((mu.get(2) - 2f64.powf(-1.51)).abs() < 1e-15);
        let long = t.fixed_coefficients(100_000).unwrap().unwrap();
        let diff: f64 = long.values()[10..].iter().map(|m| m * m).sum();
        assert!(diff <= mu.tail_tol().unwrap());
    }

    #[test]
    fn interval_coverage_grows_truncation_until_admissible() {
        let prior = PriorSpec::polynomial(1.0, 1.0).unwrap();
        let cfg = small(prior, vec![1e4], 20);
        let report = run_interval_coverage(&cfg, &FunctionalSpec::PointEvaluation(0.3)).unwrap();
        assert!(report.rows[0].truncation > 100);
        assert!(report.rows[0].interval_coverage.is_some());
    }

    #[test]
    fn figure_layouts() {
        let f1 = FigurePreset::PolynomialSmoothness.panels().unwrap();
        assert_eq!(f1.len(), 10);
        assert!(f1[..5].iter().all(|p| p.prior.alpha() == 1.0 && p.n == 1e4));
        assert!(f1[5..].iter().all(|p| p.prior.alpha() == 3.0));
        let f2 = FigurePreset::ExponentialSmoothness.panels().unwrap();
        assert!(f2[5..].iter().all(|p| p.prior.alpha() == 5.0 && p.prior.family() == PriorFamily::Exponential));
        let f4 = FigurePreset::ExponentialSampleSize.panels().unwrap();
        assert_eq!(f4[7].n, 1e8);
        assert_eq!(f4[7].prior.alpha(), 2.0);
        let mut streams: Vec<u32> = FigurePreset::ALL
            .iter()
            .flat_map(|f| f.panels().unwrap().into_iter().map(|p| p.stream))
            .collect();
        streams.sort();
        streams.dedup();
        assert_eq!(streams.len(), 40);
    }

    #[test]
    fn panel_data_is_deterministic_and_consistent() {
        let mut cfg = FigureConfig::new(3);
        cfg.grid = uniform_grid(21);
        let panels = &FigurePreset::PolynomialSmoothness.panels().unwrap()[..1];
        let a = emit_figure_data(&cfg, panels).unwrap();
        let b = emit_figure_data(&cfg, panels).unwrap();
        assert_eq!(a, b);
        let p = &a[0];
        assert_eq!(p.draws.len(), 20);
        assert!(p.lower.iter().zip(&p.upper).all(|(l, u)| l <= u));
        assert!((p.truth[10] - true_signal(0.5)).abs() < 1e-15);
        cfg.draws = 0;
        assert!(emit_figure_data(&cfg, panels).unwrap()[0].draws.is_empty());
    }
}
