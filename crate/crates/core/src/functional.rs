//! Linear functionals `Lμ = Σ l_i μ_i`: marginal posteriors, credible
//! intervals and pointwise bands.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{ensure_same_len, Error, Result};
use crate::posterior::ConjugateWeights;
use crate::prior::PriorSpec;
use crate::sequence::{basis_value, sobolev_norm, CoefficientSequence, ObservationSet};
use crate::summation::compensated_sum;

/// Largest share of `Σ l_i²λ_i` the last tenth of the truncation may carry.
pub const DEFAULT_ADMISSIBILITY_TOL: f64 = 1e-8;

/// Admissibility tolerance used for plotted pointwise bands.
pub const BAND_ADMISSIBILITY_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FunctionalKind {
    PointEvaluation(f64),
    SobolevRepresenter,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearFunctional {
    pub l: CoefficientSequence,
    /// `q` when `|l_i| ≍ i^{-q-1/2}`.
    pub q_decay: Option<f64>,
    pub kind: FunctionalKind,
}

impl LinearFunctional {
    /// `μ ↦ μ(x)`, representer `l_i = e_i(x)`, decay index `q = -1/2`.
    pub fn point_evaluation(x: f64, truncation: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::domain(format!("evaluation point {x} outside [0, 1]")));
        }
        Ok(Self {
            l: CoefficientSequence::from_fn(truncation, |i| basis_value(i, x))?,
            q_decay: Some(-0.5),
            kind: FunctionalKind::PointEvaluation(x),
        })
    }

    /// Coordinate projection `μ ↦ μ_k`.
    pub fn coordinate(k: usize, truncation: usize) -> Result<Self> {
        Ok(Self {
            l: CoefficientSequence::unit(truncation, k)?,
            q_decay: None,
            kind: FunctionalKind::Custom,
        })
    }

    /// Representer `l_i = i^{-q-1/2}`, the extremal element of the decay class `q`.
    pub fn sobolev_representer(q: f64, truncation: usize) -> Result<Self> {
        Ok(Self {
            l: CoefficientSequence::from_fn(truncation, |i| (i as f64).powf(-q - 0.5))?,
            q_decay: Some(q),
            kind: FunctionalKind::SobolevRepresenter,
        })
    }

    pub fn custom(l: CoefficientSequence, q_decay: Option<f64>) -> Self {
        Self {
            l,
            q_decay,
            kind: FunctionalKind::Custom,
        }
    }

    /// `aL₁ + bL₂`.
    pub fn combine(a: f64, first: &Self, b: f64, second: &Self) -> Result<Self> {
        ensure_same_len("functional", first.l.truncation_level(), second.l.truncation_level())?;
        let l = first.l.iter().zip(second.l.iter()).map(|(x, y)| a * x + b * y).collect();
        Ok(Self::custom(CoefficientSequence::new(l)?, None))
    }

    pub fn apply(&self, mu: &CoefficientSequence) -> Result<f64> {
        ensure_same_len("sequence", self.l.truncation_level(), mu.truncation_level())?;
        Ok(compensated_sum(self.l.iter().zip(mu.iter()).map(|(l, m)| l * m)))
    }
}

/// Share of `Σ_{i≤N} l_i²λ_i` contributed by coordinates `i > 0.9N`.
pub fn relative_tail(l: &[f64], lambda: &[f64]) -> f64 {
    let start = (lambda.len() * 9) / 10;
    let terms = l.iter().zip(lambda).map(|(l, lam)| l * l * lam);
    let total = compensated_sum(terms.clone());
    if total == 0.0 {
        return 0.0;
    }
    compensated_sum(terms.skip(start)) / total
}

pub fn check_admissible(l: &[f64], lambda: &[f64], tolerance: f64) -> Result<()> {
    let relative_tail = relative_tail(l, lambda);
    if relative_tail < tolerance || relative_tail == 0.0 {
        Ok(())
    } else {
        Err(Error::Inadmissible {
            relative_tail,
            tolerance,
        })
    }
}

/// `Lμ | Y ~ N(mean, spread_sq)`; `mean_var` is the sampling variance of `mean`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalPosterior {
    pub mean: f64,
    /// `s_n² = Σ l_i² λ_i / (1 + nλ_iκ_i²)`
    pub spread_sq: f64,
    /// `t_n² = Σ l_i² nλ_i²κ_i² / (1 + nλ_iκ_i²)²`
    pub mean_var: f64,
}

impl FunctionalPosterior {
    pub fn spread(&self) -> f64 {
        self.spread_sq.sqrt()
    }
}

/// Marginal posterior of `L` given precomputed weights, after the admissibility check.
pub fn functional_posterior_for(
    functional: &LinearFunctional,
    weights: &ConjugateWeights,
    y: &[f64],
    tolerance: f64,
) -> Result<FunctionalPosterior> {
    let l = functional.l.values();
    ensure_same_len("functional", weights.truncation_level(), l.len())?;
    ensure_same_len("observations", weights.truncation_level(), y.len())?;
    check_admissible(l, weights.lambda(), tolerance)?;
    Ok(marginal(l, weights, y))
}

fn marginal(l: &[f64], weights: &ConjugateWeights, y: &[f64]) -> FunctionalPosterior {
    FunctionalPosterior {
        mean: compensated_sum(l.iter().zip(weights.gain()).zip(y).map(|((l, w), y)| l * w * y)),
        spread_sq: compensated_sum(l.iter().zip(weights.spread()).map(|(l, s)| l * l * s)),
        mean_var: compensated_sum(l.iter().zip(weights.shrink()).map(|(l, t)| l * l * t)),
    }
}

pub fn functional_posterior(
    functional: &LinearFunctional,
    prior: &PriorSpec,
    kappa: &CoefficientSequence,
    n: f64,
    y: &ObservationSet,
) -> Result<FunctionalPosterior> {
    let weights = ConjugateWeights::from_prior(prior, kappa, n)?;
    functional_posterior_for(functional, &weights, y.y.values(), DEFAULT_ADMISSIBILITY_TOL)
}

/// `|z_{γ/2}|`, the upper `γ/2` standard normal quantile.
pub fn normal_critical_value(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(-std.inverse_cdf(gamma / 2.0))
}

/// `mean ± |z_{γ/2}| s_n`.
pub fn credible_interval(fp: &FunctionalPosterior, gamma: f64) -> Result<(f64, f64)> {
    let z = normal_critical_value(gamma)?;
    let half = z * fp.spread();
    Ok((fp.mean - half, fp.mean + half))
}

/// Pointwise credible band with its center, evaluated on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseBand {
    pub x: Vec<f64>,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PointwiseBand {
    /// Fraction of grid points where `lower ≤ f(x) ≤ upper`.
    pub fn coverage_fraction(&self, truth: &[f64]) -> f64 {
        let hits = self
            .lower
            .iter()
            .zip(&self.upper)
            .zip(truth)
            .filter(|((lo, hi), f)| *lo <= *f && *f <= *hi)
            .count();
        hits as f64 / truth.len() as f64
    }
}

/// Credible intervals for `μ(x)` at every grid point, in grid order.
pub fn pointwise_band_for(
    weights: &ConjugateWeights,
    y: &[f64],
    x_grid: &[f64],
    gamma: f64,
    tolerance: f64,
) -> Result<PointwiseBand> {
    let z = normal_critical_value(gamma)?;
    let rows: Vec<(f64, f64)> = x_grid
        .par_iter()
        .map(|&x| {
            let l = LinearFunctional::point_evaluation(x, weights.truncation_level())?;
            let fp = functional_posterior_for(&l, weights, y, tolerance)?;
            Ok((fp.mean, z * fp.spread()))
        })
        .collect::<Result<_>>()?;
    Ok(PointwiseBand {
        x: x_grid.to_vec(),
        center: rows.iter().map(|r| r.0).collect(),
        lower: rows.iter().map(|r| r.0 - r.1).collect(),
        upper: rows.iter().map(|r| r.0 + r.1).collect(),
    })
}

/// `(lower, upper)` of the central `1 - γ` interval for `μ(x)` at each grid point.
pub fn pointwise_band(
    prior: &PriorSpec,
    kappa: &CoefficientSequence,
    n: f64,
    y: &ObservationSet,
    x_grid: &[f64],
    gamma: f64,
) -> Result<Vec<(f64, f64)>> {
    let weights = ConjugateWeights::from_prior(prior, kappa, n)?;
    let band = pointwise_band_for(&weights, y.y.values(), x_grid, gamma, DEFAULT_ADMISSIBILITY_TOL)?;
    Ok(band.lower.into_iter().zip(band.upper).collect())
}

/// Smallest power-of-two multiple of `start` at which every point evaluation
/// on the grid passes the admissibility check, capped at `max`.
pub fn admissible_band_truncation(
    prior: &PriorSpec,
    x_grid: &[f64],
    start: usize,
    max: usize,
    tolerance: f64,
) -> Option<usize> {
    let mut n = start.max(1);
    while n <= max {
        let lambda: Vec<f64> = (1..=n).map(|i| prior.variance(i)).collect();
        let ok = x_grid.par_iter().all(|&x| {
            let l: Vec<f64> = (1..=n).map(|i| basis_value(i, x)).collect();
            let t = relative_tail(&l, &lambda);
            t < tolerance || t == 0.0
        });
        if ok {
            return Some(n);
        }
        n *= 2;
    }
    None
}

/// `|E_{μ₀} L̂μ - Lμ₀| = |Σ l_i μ_{0,i} / (1 + nλ_iκ_i²)|`.
pub fn functional_bias(
    functional: &LinearFunctional,
    prior: &PriorSpec,
    kappa: &CoefficientSequence,
    n: f64,
    mu0: &CoefficientSequence,
) -> Result<f64> {
    let weights = ConjugateWeights::from_prior(prior, kappa, n)?;
    functional_bias_for(functional, &weights, mu0)
}

pub fn functional_bias_for(
    functional: &LinearFunctional,
    weights: &ConjugateWeights,
    mu0: &CoefficientSequence,
) -> Result<f64> {
    ensure_same_len("functional", weights.truncation_level(), functional.l.truncation_level())?;
    let bias = weights.bias(mu0)?;
    Ok(compensated_sum(functional.l.iter().zip(&bias).map(|(l, b)| l * b)).abs())
}

/// Cauchy–Schwarz bound on the squared bias:
/// `‖μ₀‖²_β · Σ l_i² i^{-2β} / (1 + nλ_iκ_i²)²`.
pub fn functional_bias_cs_bound(
    functional: &LinearFunctional,
    weights: &ConjugateWeights,
    mu0: &CoefficientSequence,
    beta: f64,
) -> Result<f64> {
    ensure_same_len("functional", weights.truncation_level(), functional.l.truncation_level())?;
    let norm = sobolev_norm(mu0, beta)?.value;
    let series = compensated_sum(
        functional
            .l
            .iter()
            .zip(weights.damping())
            .enumerate()
            .map(|(k, (l, d))| l * l * ((k + 1) as f64).powf(-2.0 * beta) * d * d),
    );
    Ok(norm * norm * series)
}
