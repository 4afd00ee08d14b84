//! Conjugate posterior in the sequence model.
//!
//! Under `Y_i = κ_i μ_i + n^{-1/2} Z_i` and `μ_i ~ N(0, λ_i)` the posterior
//! factorizes into independent normals
//!
//! ```text
//! μ_i | Y ~ N( nλ_iκ_i Y_i / (1 + nλ_iκ_i²),  λ_i / (1 + nλ_iκ_i²) )
//! ```
//!
//! Everything except the mean is data-free, so [`ConjugateWeights`] holds the
//! per-coordinate factors once and the summaries are built on top of it.

use rayon::prelude::*;

use crate::error::{ensure_same_len, Error, Result};
use crate::prior::{prior_variances, PriorSpec};
use crate::rng::{NormalStream, Purpose, StreamKey};
use crate::sequence::{CoefficientSequence, ObservationSet, SineBasisGrid};
use crate::summation::compensated_sum;

/// `log a` above which `1/(1+a)` is taken as `e^{-log a}` (the correction is below an ulp).
const LOG_SNR_SATURATION: f64 = 40.0;

/// Data-free posterior factors for one `(λ, κ, n)`.
#[derive(Clone, Debug)]
pub struct ConjugateWeights {
    n: f64,
    lambda: Vec<f64>,
    /// `w_i = nλ_iκ_i / (1 + nλ_iκ_i²)`, the gain applied to `Y_i`.
    gain: Vec<f64>,
    /// `1 / (1 + nλ_iκ_i²)`, the fraction of `μ_{0,i}` lost to shrinkage.
    damping: Vec<f64>,
    /// `s_{i,n}`, the posterior variance.
    spread: Vec<f64>,
    /// `t_{i,n}`, the sampling variance of the posterior mean.
    shrink: Vec<f64>,
    prior_tail: Option<f64>,
}

impl ConjugateWeights {
    pub fn new(lambda: &CoefficientSequence, kappa: &CoefficientSequence, n: f64) -> Result<Self> {
        ensure_same_len("prior variances", kappa.truncation_level(), lambda.truncation_level())?;
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain(format!("noise level n must be positive, got {n}")));
        }
        // λ_i = 0 (e.g. an underflowed exponential prior) is a point mass at zero.
        if let Some(i) = lambda.iter().position(|l| l < 0.0) {
            return Err(Error::domain(format!("prior variance {} is negative", i + 1)));
        }
        let len = lambda.truncation_level();
        let mut w = ConjugateWeights {
            n,
            lambda: lambda.values().to_vec(),
            gain: Vec::with_capacity(len),
            damping: Vec::with_capacity(len),
            spread: Vec::with_capacity(len),
            shrink: Vec::with_capacity(len),
            prior_tail: lambda.tail_tol(),
        };
        for (l, k) in lambda.iter().zip(kappa.iter()) {
            // a = nλκ², formed in log space so it neither overflows nor loses
            // precision when κ is tiny.
            let (snr, damp) = if k == 0.0 || l == 0.0 {
                (0.0, 1.0)
            } else {
                let log_snr = n.ln() + l.ln() + 2.0 * k.abs().ln();
                if log_snr > LOG_SNR_SATURATION {
                    (log_snr.exp(), (-log_snr).exp())
                } else {
                    let a = log_snr.exp();
                    (a, 1.0 / (1.0 + a))
                }
            };
            // g = a/(1+a) without the cancellation of 1 - damp for small a.
            let g = if snr.is_finite() { snr * damp } else { 1.0 };
            w.gain.push(n * l * k * damp);
            w.damping.push(damp);
            w.spread.push(l * damp);
            w.shrink.push(l * g * damp);
        }
        Ok(w)
    }

    pub fn from_prior(prior: &PriorSpec, kappa: &CoefficientSequence, n: f64) -> Result<Self> {
        let lambda = prior_variances(prior, kappa.truncation_level())?;
        Self::new(&lambda, kappa, n)
    }

    pub fn truncation_level(&self) -> usize {
        self.lambda.len()
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gain(&self) -> &[f64] {
        &self.gain
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn spread(&self) -> &[f64] {
        &self.spread
    }

    pub fn shrink(&self) -> &[f64] {
        &self.shrink
    }

    /// Bound on `Σ_{i>N} λ_i`, which dominates every omitted posterior series term.
    pub fn prior_tail(&self) -> Option<f64> {
        self.prior_tail
    }

    /// Posterior mean `(w_i Y_i)`.
    pub fn posterior_mean(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_same_len("observations", self.truncation_level(), y.len())?;
        Ok(self.gain.iter().zip(y).map(|(w, y)| w * y).collect())
    }

    /// `E_{μ₀} μ̂ - μ₀ = -μ_{0,i} / (1 + nλ_iκ_i²)`.
    pub fn bias(&self, mu0: &CoefficientSequence) -> Result<Vec<f64>> {
        ensure_same_len("mu0", self.truncation_level(), mu0.truncation_level())?;
        Ok(self.damping.iter().zip(mu0.iter()).map(|(d, m)| -d * m).collect())
    }

    pub fn summarize(&self, y: &ObservationSet) -> Result<PosteriorSummary> {
        Ok(PosteriorSummary {
            mean: CoefficientSequence::new(self.posterior_mean(y.y.values())?)?,
            variance: CoefficientSequence::new(self.spread.clone())?,
            shrink_var: CoefficientSequence::new(self.shrink.clone())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub mean: CoefficientSequence,
    /// `s_{i,n} = λ_i / (1 + nλ_iκ_i²)`
    pub variance: CoefficientSequence,
    /// `t_{i,n} = nλ_i²κ_i² / (1 + nλ_iκ_i²)²`
    pub shrink_var: CoefficientSequence,
}

pub fn compute_posterior(
    prior: &PriorSpec,
    kappa: &CoefficientSequence,
    n: f64,
    y: &ObservationSet,
) -> Result<PosteriorSummary> {
    ensure_same_len("observations", kappa.truncation_level(), y.truncation_level())?;
    ConjugateWeights::from_prior(prior, kappa, n)?.summarize(y)
}

/// Posterior for explicit prior variances rather than a parametric family.
pub fn compute_posterior_from_variances(
    lambda: &CoefficientSequence,
    kappa: &CoefficientSequence,
    n: f64,
    y: &ObservationSet,
) -> Result<PosteriorSummary> {
    ConjugateWeights::new(lambda, kappa, n)?.summarize(y)
}

pub fn posterior_draw(summary: &PosteriorSummary, seed: u64) -> CoefficientSequence {
    posterior_draw_keyed(summary, StreamKey::new(seed, Purpose::PosteriorDraw, 0))
}

pub fn posterior_draw_keyed(summary: &PosteriorSummary, key: StreamKey) -> CoefficientSequence {
    let mut z = NormalStream::new(key);
    let values = summary
        .mean
        .iter()
        .zip(summary.variance.iter())
        .map(|(m, v)| m + v.sqrt() * z.next_normal())
        .collect();
    CoefficientSequence::new(values).expect("finite mean and variance give finite draws")
}

/// Square bias, sampling variance and posterior spread of the posterior mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskDecomposition {
    /// `Σ μ_{0,i}² / (1 + nλ_iκ_i²)²`
    pub sq_bias: f64,
    /// `Σ t_{i,n}`
    pub estimator_variance: f64,
    /// `Σ s_{i,n}`
    pub posterior_spread: f64,
    /// Bound on what the omitted coordinates `i > N` could add to any of the
    /// three series, when both the truth and the prior carry tail bounds.
    pub tail_bound: Option<f64>,
}

impl RiskDecomposition {
    pub fn from_weights(weights: &ConjugateWeights, mu0: &CoefficientSequence) -> Result<Self> {
        let bias = weights.bias(mu0)?;
        let tail_bound = match (mu0.tail_tol(), weights.prior_tail()) {
            (Some(m), Some(p)) => Some(m + p),
            _ => None,
        };
        Ok(Self {
            sq_bias: compensated_sum(bias.iter().map(|b| b * b)),
            estimator_variance: compensated_sum(weights.shrink().iter().copied()),
            posterior_spread: compensated_sum(weights.spread().iter().copied()),
            tail_bound,
        })
    }

    /// `E‖μ̂ - μ₀‖² = sq_bias + estimator_variance`.
    pub fn mean_squared_error(&self) -> f64 {
        self.sq_bias + self.estimator_variance
    }

    /// `E_{μ₀} ∫‖μ - μ₀‖² dΠ_n(μ | Y)`, the quantity bounded in contraction proofs.
    pub fn posterior_risk(&self) -> f64 {
        self.mean_squared_error() + self.posterior_spread
    }
}

pub fn risk_decomposition(
    prior: &PriorSpec,
    kappa: &CoefficientSequence,
    n: f64,
    mu0: &CoefficientSequence,
) -> Result<RiskDecomposition> {
    RiskDecomposition::from_weights(&ConjugateWeights::from_prior(prior, kappa, n)?, mu0)
}

/// `Σ_i mean_i e_i(x)` on the grid.
pub fn posterior_mean_function(summary: &PosteriorSummary, x_grid: &[f64]) -> Result<Vec<f64>> {
    let basis = SineBasisGrid::new(x_grid, summary.mean.truncation_level())?;
    basis.synthesize(summary.mean.values())
}

/// Evaluates many coefficient vectors on one grid.
pub fn synthesize_many(basis: &SineBasisGrid, coefficients: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    coefficients
        .par_iter()
        .map(|c| basis.synthesize(c))
        .collect()
}
