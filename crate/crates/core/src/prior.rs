//! Gaussian product priors `⊗ N(0, λ_i)` and their scaling rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::CoefficientSequence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorFamily {
    /// `λ_i = τ² i^{-1-2α}`
    #[serde(rename = "poly")]
    Polynomial,
    /// `λ_i = exp(-α i²)`
    #[serde(rename = "exp")]
    Exponential,
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorFamily::Polynomial => "poly",
            PriorFamily::Exponential => "exp",
        })
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poly" | "polynomial" => Ok(PriorFamily::Polynomial),
            "exp" | "exponential" => Ok(PriorFamily::Exponential),
            other => Err(Error::config(
                "prior",
                format!("unknown prior family `{other}` (expected poly or exp)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriorSpec {
    family: PriorFamily,
    alpha: f64,
    tau: f64,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be positive, got {value}")))
    }
}

impl PriorSpec {
    pub fn polynomial(alpha: f64, tau: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        check_positive("tau", tau)?;
        Ok(Self {
            family: PriorFamily::Polynomial,
            alpha,
            tau,
        })
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        Ok(Self {
            family: PriorFamily::Exponential,
            alpha,
            tau: 1.0,
        })
    }

    /// Builds a spec from a family and an optional scale. The exponential
    /// family has no scale, so asking for one is a configuration error.
    pub fn from_parts(family: PriorFamily, alpha: f64, tau: Option<f64>) -> Result<Self> {
        match family {
            PriorFamily::Polynomial => Self::polynomial(alpha, tau.unwrap_or(1.0)),
            PriorFamily::Exponential => match tau {
                Some(t) if t != 1.0 => Err(Error::config(
                    "tau",
                    "the exponential prior is not scaled; drop tau or use the polynomial family",
                )),
                _ => Self::exponential(alpha),
            },
        }
    }

    pub fn family(&self) -> PriorFamily {
        self.family
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Same family and α with a new scale. Only meaningful for the polynomial family.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        match self.family {
            PriorFamily::Polynomial => Self::polynomial(self.alpha, tau),
            PriorFamily::Exponential => Self::from_parts(self.family, self.alpha, Some(tau)),
        }
    }

    pub fn log_variance(&self, i: usize) -> f64 {
        let x = i as f64;
        match self.family {
            PriorFamily::Polynomial => 2.0 * self.tau.ln() - (1.0 + 2.0 * self.alpha) * x.ln(),
            PriorFamily::Exponential => -self.alpha * x * x,
        }
    }

    /// `λ_i`.
    pub fn variance(&self, i: usize) -> f64 {
        match self.family {
            PriorFamily::Polynomial => {
                self.tau * self.tau * (i as f64).powf(-1.0 - 2.0 * self.alpha)
            }
            PriorFamily::Exponential => self.log_variance(i).exp(),
        }
    }

    /// Upper bound on `Σ_{i>N} λ_i`.
    ///
    /// Polynomial: integral comparison `τ² N^{-2α} / (2α)`. Exponential: the
    /// ratio of consecutive terms beyond `N` is at most `e^{-α(2N+3)}`, giving a
    /// geometric bound.
    pub fn tail_sum_bound(&self, truncation: usize) -> f64 {
        let n = truncation as f64;
        match self.family {
            PriorFamily::Polynomial => {
                self.tau * self.tau * n.powf(-2.0 * self.alpha) / (2.0 * self.alpha)
            }
            PriorFamily::Exponential => {
                let first = (-self.alpha * (n + 1.0) * (n + 1.0)).exp();
                first / -(-self.alpha * (2.0 * n + 3.0)).exp_m1()
            }
        }
    }
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            PriorFamily::Polynomial => write!(f, "poly(alpha={}, tau={})", self.alpha, self.tau),
            PriorFamily::Exponential => write!(f, "exp(alpha={})", self.alpha),
        }
    }
}

/// `(λ_1, ..., λ_N)` with `tail_tol` set to the analytic bound on `Σ_{i>N} λ_i`.
pub fn prior_variances(spec: &PriorSpec, truncation: usize) -> Result<CoefficientSequence> {
    if truncation == 0 {
        return Err(Error::domain("truncation level must be at least 1"));
    }
    Ok(CoefficientSequence::from_fn(truncation, |i| spec.variance(i))?
        .with_tail_tol(spec.tail_sum_bound(truncation)))
}

/// Which problem a rate-matched scale is tuned for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingTarget {
    Full,
    Functional,
}

/// `τ_n = (log n)^{(α-β)/2}` for the full parameter and
/// `(log n)^{(1/2+α-β)/2}` for linear functionals, with leading constant 1.
pub fn rate_matched_tau(alpha: f64, beta: f64, n: f64, target: ScalingTarget) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    if !(n > std::f64::consts::E) {
        return Err(Error::domain(format!(
            "rate matching needs log n > 1, got n = {n}"
        )));
    }
    let exponent = match target {
        ScalingTarget::Full => (alpha - beta) / 2.0,
        ScalingTarget::Functional => (0.5 + alpha - beta) / 2.0,
    };
    Ok(n.ln().powf(exponent))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingRule {
    Fixed,
    RateMatched { beta_target: f64 },
}

impl ScalingRule {
    /// The prior to use at noise level `n`.
    pub fn resolve(&self, prior: &PriorSpec, n: f64, target: ScalingTarget) -> Result<PriorSpec> {
        match *self {
            ScalingRule::Fixed => Ok(*prior),
            ScalingRule::RateMatched { beta_target } => {
                if prior.family() == PriorFamily::Exponential {
                    return Err(Error::config(
                        "scaling",
                        "rate matching applies to the polynomial prior only",
                    ));
                }
                let tau = rate_matched_tau(prior.alpha(), beta_target, n, target)?;
                prior.with_tau(tau)
            }
        }
    }
}

/// Finite-sample guard for `nτ² → ∞`: true when `nτ² > 1`.
pub fn scale_is_informative(prior: &PriorSpec, n: f64) -> bool {
    prior.family() == PriorFamily::Exponential || n * prior.tau() * prior.tau() > 1.0
}
