//! Credible balls around the posterior mean, and the Monte Carlo quantiles of
//! Gaussian quadratic forms that size them.

use rayon::prelude::*;

use crate::error::{ensure_same_len, Error, Result};
use crate::posterior::{ConjugateWeights, PosteriorSummary};
use crate::prior::PriorSpec;
use crate::rng::{NormalStream, Purpose, StreamKey};
use crate::sequence::CoefficientSequence;
use crate::summation::compensated_sum;

pub const DEFAULT_MC_DRAWS: usize = 200_000;

/// `Σ w_i Z_i²` for independent standard normals `Z_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub weights: CoefficientSequence,
    /// `E = Σ w_i`
    pub mean: f64,
    /// `sd = (2 Σ w_i²)^{1/2}`
    pub sd: f64,
}

impl QuadraticForm {
    pub fn new(weights: CoefficientSequence) -> Result<Self> {
        if weights.iter().any(|w| w < 0.0) {
            return Err(Error::domain("quadratic form weights must be nonnegative"));
        }
        if !weights.iter().any(|w| w > 0.0) {
            return Err(Error::domain("quadratic form needs at least one positive weight"));
        }
        let mean = compensated_sum(weights.iter());
        let sd = (2.0 * compensated_sum(weights.iter().map(|w| w * w))).sqrt();
        Ok(Self { weights, mean, sd })
    }
}

/// A Monte Carlo quantile with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantileEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("probability must lie in (0, 1), got {p}")))
    }
}

/// Type-7 quantile of sorted data.
pub fn type7_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Distribution-free standard error: half the spread between the order
/// statistics one binomial standard deviation either side of `mp`.
fn order_statistic_std_error(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len() as f64;
    let half = (m * p * (1.0 - p)).sqrt();
    let lo = ((m * p - half).floor().max(0.0) as usize).min(sorted.len() - 1);
    let hi = ((m * p + half).ceil() as usize).min(sorted.len() - 1);
    0.5 * (sorted[hi] - sorted[lo])
}

/// Indices of coordinates whose weight can change a double-precision sum.
fn effective_support(weights: &[f64]) -> Vec<usize> {
    let max = weights.iter().copied().fold(0.0, f64::max);
    let cutoff = f64::EPSILON * max;
    (0..weights.len()).filter(|&i| weights[i] >= cutoff && weights[i] > 0.0).collect()
}

/// Monte Carlo quantile of `Σ (√w_i Z_i + b_i)²`.
///
/// Coordinates with negligible weight keep their deterministic contribution
/// `b_i²`. Draw `j` uses stream `j` of `key`'s seed and purpose, so the result
/// does not depend on the worker count.
fn shifted_form_quantile(
    weights: &[f64],
    shifts: &[f64],
    p: f64,
    mc_draws: usize,
    key: StreamKey,
) -> Result<QuantileEstimate> {
    check_probability(p)?;
    if mc_draws < 2 {
        return Err(Error::domain("at least two Monte Carlo draws are needed"));
    }
    let support = effective_support(weights);
    let in_support = {
        let mut mask = vec![false; weights.len()];
        support.iter().for_each(|&i| mask[i] = true);
        mask
    };
    let fixed = compensated_sum(
        shifts
            .iter()
            .zip(&in_support)
            .filter(|(_, keep)| !**keep)
            .map(|(b, _)| b * b),
    );
    let scales: Vec<f64> = support.iter().map(|&i| weights[i].sqrt()).collect();
    let offsets: Vec<f64> = support.iter().map(|&i| shifts[i]).collect();
    let positions: Vec<u64> = support.iter().map(|&i| i as u64).collect();
    let contiguous = positions.iter().enumerate().all(|(k, &i)| k as u64 == i);

    let mut draws: Vec<f64> = (0..mc_draws as u64)
        .into_par_iter()
        .map(|j| {
            let mut z = NormalStream::new(StreamKey::new(key.seed, key.purpose, j));
            let mut acc = fixed;
            if contiguous {
                for (s, b) in scales.iter().zip(&offsets) {
                    let v = s * z.next_normal() + b;
                    acc += v * v;
                }
            } else {
                for ((s, b), &pos) in scales.iter().zip(&offsets).zip(&positions) {
                    z.seek(pos);
                    let v = s * z.next_normal() + b;
                    acc += v * v;
                }
            }
            acc
        })
        .collect();
    draws.sort_unstable_by(f64::total_cmp);
    Ok(QuantileEstimate {
        value: type7_quantile(&draws, p),
        std_error: order_statistic_std_error(&draws, p),
        draws: mc_draws,
    })
}

/// `x` with `P(Σ w_i Z_i² ≤ x) = p`, by Monte Carlo.
pub fn quadratic_form_quantile(
    q: &QuadraticForm,
    p: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    let zeros = vec![0.0; q.weights.truncation_level()];
    shifted_form_quantile(
        q.weights.values(),
        &zeros,
        p,
        mc_draws,
        StreamKey::new(seed, Purpose::QuadraticForm, 0),
    )
}

/// `μ̂ + B(r_{n,γ})` with posterior mass `1 - γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CredibleBall {
    pub center: CoefficientSequence,
    pub radius: f64,
    pub level: f64,
    /// Standard error of the radius, propagated from the quantile estimate.
    pub radius_std_error: f64,
}

impl CredibleBall {
    pub fn contains(&self, mu: &CoefficientSequence) -> Result<bool> {
        ensure_same_len("point", self.center.truncation_level(), mu.truncation_level())?;
        let d = compensated_sum(self.center.iter().zip(mu.iter()).map(|(c, m)| (c - m) * (c - m)));
        Ok(d <= self.radius * self.radius)
    }
}

fn check_level(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("credible level gamma must lie in (0, 1), got {gamma}")))
    }
}

/// Radius of the credible ball: `r²` is the `1 - γ` quantile of `Σ s_{i,n} Z_i²`.
/// It depends only on the posterior variances, never on the data.
pub fn credible_radius(spread: &[f64], gamma: f64, mc_draws: usize, seed: u64) -> Result<(f64, f64)> {
    check_level(gamma)?;
    let q = QuadraticForm::new(CoefficientSequence::new(spread.to_vec())?)?;
    let est = quadratic_form_quantile(&q, 1.0 - gamma, mc_draws, seed)?;
    let radius = est.value.sqrt();
    Ok((radius, 0.5 * est.std_error / radius))
}

pub fn credible_ball(
    summary: &PosteriorSummary,
    gamma: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<CredibleBall> {
    let (radius, radius_std_error) =
        credible_radius(summary.variance.values(), gamma, mc_draws, seed)?;
    Ok(CredibleBall {
        center: summary.mean.clone(),
        radius,
        level: gamma,
        radius_std_error,
    })
}

/// Smallest `r̃` with `P(‖W_n + b‖ ≤ r̃) = 1 - γ`, `W_n ~ ⊗N(0, t_{i,n})`.
pub fn frequentist_radius_from_parts(
    shrink_var: &CoefficientSequence,
    bias: &CoefficientSequence,
    gamma: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    check_level(gamma)?;
    ensure_same_len("bias", shrink_var.truncation_level(), bias.truncation_level())?;
    if shrink_var.iter().any(|t| t < 0.0) {
        return Err(Error::domain("sampling variances must be nonnegative"));
    }
    let est = shifted_form_quantile(
        shrink_var.values(),
        bias.values(),
        1.0 - gamma,
        mc_draws,
        StreamKey::new(seed, Purpose::FrequentistRadius, 0),
    )?;
    let radius = est.value.sqrt();
    Ok(QuantileEstimate {
        value: radius,
        std_error: if radius > 0.0 { 0.5 * est.std_error / radius } else { 0.0 },
        draws: est.draws,
    })
}

/// The radius of the exact `1 - γ` confidence ball centered at the posterior mean.
pub fn frequentist_radius(
    prior: &PriorSpec,
    kappa: &CoefficientSequence,
    n: f64,
    mu0: &CoefficientSequence,
    gamma: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    let w = ConjugateWeights::from_prior(prior, kappa, n)?;
    frequentist_radius_for(&w, mu0, gamma, mc_draws, seed)
}

pub fn frequentist_radius_for(
    weights: &ConjugateWeights,
    mu0: &CoefficientSequence,
    gamma: f64,
    mc_draws: usize,
    seed: u64,
) -> Result<QuantileEstimate> {
    let bias = CoefficientSequence::new(weights.bias(mu0)?)?;
    let shrink = CoefficientSequence::new(weights.shrink().to_vec())?;
    frequentist_radius_from_parts(&shrink, &bias, gamma, mc_draws, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> CoefficientSequence {
        CoefficientSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn moments_match_closed_forms() {
        let q = QuadraticForm::new(seq(&[0.5, 0.25, 0.0, 2.0])).unwrap();
        assert_eq!(q.mean, 2.75);
        assert_eq!(q.sd, (2.0f64 * (0.25 + 0.0625 + 4.0)).sqrt());
    }

    #[test]
    fn invalid_forms_are_rejected() {
        assert!(QuadraticForm::new(seq(&[0.0, 0.0])).is_err());
        assert!(QuadraticForm::new(seq(&[1.0, -1.0])).is_err());
        let q = QuadraticForm::new(seq(&[1.0])).unwrap();
        assert!(quadratic_form_quantile(&q, 0.0, 100, 1).is_err());
        assert!(quadratic_form_quantile(&q, 1.0, 100, 1).is_err());
    }

    #[test]
    fn scaling_is_exact_and_deterministic() {
        let one = QuadraticForm::new(seq(&[1.0])).unwrap();
        let c = QuadraticForm::new(seq(&[4.0])).unwrap();
        for p in [0.1, 0.5, 0.9] {
            let a = quadratic_form_quantile(&one, p, 20_000, 9).unwrap();
            let b = quadratic_form_quantile(&c, p, 20_000, 9).unwrap();
            assert!((b.value - 4.0 * a.value).abs() <= 1e-12 * b.value);
        }
        let a = quadratic_form_quantile(&one, 0.95, 5_000, 3).unwrap();
        let b = quadratic_form_quantile(&one, 0.95, 5_000, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negligible_coordinates_do_not_change_the_quantile() {
        let a = QuadraticForm::new(seq(&[1.0, 1.0])).unwrap();
        let b = QuadraticForm::new(seq(&[1.0, 1.0, 1e-30])).unwrap();
        let qa = quadratic_form_quantile(&a, 0.7, 10_000, 2).unwrap();
        let qb = quadratic_form_quantile(&b, 0.7, 10_000, 2).unwrap();
        assert_eq!(qa.value, qb.value);
    }

    #[test]
    fn ball_radius_example() {
        let summary = PosteriorSummary {
            mean: seq(&[100.0 / 26.0]),
            variance: seq(&[1.0 / 26.0]),
            shrink_var: seq(&[100.0 * 0.25 / 676.0]),
        };
        let ball = credible_ball(&summary, 0.05, DEFAULT_MC_DRAWS, 11).unwrap();
        let r2 = ball.radius * ball.radius;
        // chi-square(1) 0.95 quantile / 26
        assert!((r2 - 0.147_748_416_180_543_24).abs() < 3.0 * 2.0 * ball.radius * ball.radius_std_error);
        let radii: Vec<f64> = [0.01, 0.05, 0.2]
            .iter()
            .map(|g| credible_ball(&summary, *g, 50_000, 11).unwrap().radius)
            .collect();
        assert!(radii[0] > radii[1] && radii[1] > radii[2]);
        let wide = credible_ball(&summary, 0.999, 50_000, 11).unwrap();
        assert!(wide.radius > 0.0 && wide.radius < radii[2]);
        assert!(credible_ball(&summary, 1.0, 100, 1).is_err());
    }

    #[test]
    fn frequentist_radius_examples() {
        let r = frequentist_radius_from_parts(&seq(&[1.0]), &seq(&[0.0]), 0.05, DEFAULT_MC_DRAWS, 5)
            .unwrap();
        assert!((r.value - 1.959_963_984_540_054).abs() < 3.0 * r.std_error);
        let b = [0.3, -0.4, 1.2];
        let r = frequentist_radius_from_parts(&seq(&[1e-300; 3]), &seq(&b), 0.05, 1000, 5).unwrap();
        let norm = (0.09f64 + 0.16 + 1.44).sqrt();
        assert!((r.value - norm).abs() < 1e-12);
    }
}
