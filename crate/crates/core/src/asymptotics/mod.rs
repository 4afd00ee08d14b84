//! Numerical checks of the series asymptotics behind the contraction rates.
//!
//! Every series here has the shape
//! `Σ_i i^{-t} e^{-r i²} / (1 + N i^{-u} e^{-p i²})^v`. The denominator
//! switches from huge to one around the crossover index `I_N`, which solves
//! `N I^{-u} e^{-p I²} = 1` and grows like `√(log N / p)`. Summands are formed
//! in log space so that neither side of `I_N` overflows.

pub mod quadrature;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sequence::CoefficientSequence;
use crate::summation::CompensatedSum;

use self::quadrature::adaptive_simpson;

/// Default grid of `N` values: `log N` doubles between points.
pub const DEFAULT_N_GRID: [f64; 4] = [1e4, 1e8, 1e12, 1e16];

/// Relative accuracy of every series value.
pub const SERIES_REL_TOL: f64 = 1e-12;

/// Largest `max/min` of a ratio trace accepted as "bounded above and below".
pub const RATIO_BAND: f64 = 4.0;

/// Exponents of the series. Unused fields are ignored by each check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaParams {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub p: f64,
    pub q: f64,
}

impl LemmaParams {
    pub fn new(t: f64, u: f64, v: f64, r: f64, p: f64, q: f64) -> Self {
        Self { t, u, v, r, p, q }
    }

    fn check_finite(&self) -> Result<()> {
        let all = [self.t, self.u, self.v, self.r, self.p, self.q];
        if all.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::domain("series parameters must be finite"))
        }
    }

    fn check_common(&self) -> Result<()> {
        self.check_finite()?;
        if !(self.p > 0.0) {
            return Err(Error::domain(format!("p must be positive, got {}", self.p)));
        }
        if self.u < 0.0 || self.v < 0.0 {
            return Err(Error::domain("u and v must be nonnegative"));
        }
        if !(self.r >= 0.0 && self.r < self.v * self.p) {
            return Err(Error::domain(format!(
                "need 0 <= r < v p, got r = {}, v p = {}",
                self.r,
                self.v * self.p
            )));
        }
        Ok(())
    }

    /// Constraints for the plain series value.
    pub fn check_series(&self) -> Result<()> {
        self.check_common()?;
        if self.t < 0.0 {
            return Err(Error::domain("t must be nonnegative"));
        }
        if self.r == 0.0 && self.t <= 1.0 {
            return Err(Error::domain("with r = 0 the series converges only for t > 1"));
        }
        Ok(())
    }

    /// Constraints for the supremum over the unit ball of `S^q`.
    pub fn check_norm_sup(&self) -> Result<()> {
        self.check_common()?;
        if self.t < -2.0 * self.q {
            return Err(Error::domain("need t >= -2q"));
        }
        Ok(())
    }

    /// Constraints for the weighted ℓ¹ bound.
    pub fn check_cs_bound(&self) -> Result<()> {
        self.check_finite()?;
        if self.t < 0.0 {
            return Err(Error::domain("t must be nonnegative"));
        }
        if !(self.u > 0.0 && self.p > 0.0) {
            return Err(Error::domain("u and p must be positive"));
        }
        if !(self.q > -self.t / 2.0) {
            return Err(Error::domain("need q > -t/2"));
        }
        Ok(())
    }

    /// `N^{-r/p} (log N)^{-t/2 + u r/(2p)}`, or `(log N)^{-(t+1)/2}` when `r = 0`.
    pub fn series_asymptote(&self, n: f64) -> f64 {
        let l = n.ln();
        if self.r == 0.0 {
            l.powf(-(self.t + 1.0) / 2.0)
        } else {
            (-self.r / self.p * l).exp()
                * l.powf(-self.t / 2.0 + self.u * self.r / (2.0 * self.p))
        }
    }

    /// `N^{-r/p} (log N)^{-t/2 - q + u r/(2p)}`.
    pub fn norm_sup_asymptote(&self, n: f64) -> f64 {
        let l = n.ln();
        (-self.r / self.p * l).exp()
            * l.powf(-self.t / 2.0 - self.q + self.u * self.r / (2.0 * self.p))
    }
}

/// One grid point of a ratio trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub n: f64,
    pub exact: f64,
    pub predicted: f64,
    /// `exact / predicted`
    pub ratio: f64,
}

/// Exact values next to their predicted asymptote along a grid of `N` (or `K`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioTrace {
    pub label: String,
    pub points: Vec<TracePoint>,
}

impl RatioTrace {
    fn from_points(label: impl Into<String>, points: Vec<TracePoint>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ratio).collect()
    }

    pub fn is_finite_positive(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.ratio.is_finite() && p.ratio > 0.0)
    }

    /// `max ratio / min ratio`.
    pub fn spread(&self) -> f64 {
        let r = self.ratios();
        let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn within_band(&self, factor: f64) -> bool {
        self.is_finite_positive() && self.spread() <= factor
    }

    /// Strictly decreasing ratios over the last `k` grid points.
    pub fn decreasing_over_last(&self, k: usize) -> bool {
        let r = self.ratios();
        let tail = &r[r.len().saturating_sub(k)..];
        tail.windows(2).all(|w| w[1] < w[0])
    }
}

fn check_grid(grid: &[f64], lower: f64, what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::domain(format!("{what} grid is empty")));
    }
    match grid.iter().find(|&&x| !(x > lower && x.is_finite())) {
        Some(bad) => Err(Error::domain(format!(
            "{what} grid values must exceed {lower}, got {bad}"
        ))),
        None => Ok(()),
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 36.0 {
        x + (-x).exp()
    } else if x < -745.0 {
        0.0
    } else {
        x.exp().ln_1p()
    }
}

/// `log N - u log i - p i²`, the log of the perturbation in the denominator.
fn log_denominator_arg(ln_n: f64, u: f64, p: f64, i: f64) -> f64 {
    ln_n - u * i.ln() - p * i * i
}

/// Log of `i^{-t} e^{-r i²} / (1 + N i^{-u} e^{-p i²})^v`.
fn log_summand(params: &LemmaParams, ln_n: f64, i: f64) -> f64 {
    -params.t * i.ln() - params.r * i * i
        - params.v * softplus(log_denominator_arg(ln_n, params.u, params.p, i))
}

/// Positive root `I_N` of `N i^{-u} e^{-p i²} = 1`, to 1e-12 relative accuracy.
///
/// Bisection on the decreasing function `log N - u log i - p i²` over
/// `[1, √(log N / p) + u + 10]`.
pub fn crossover_index(n: f64, u: f64, p: f64) -> Result<f64> {
    if !(n > 1.0 && n.is_finite()) {
        return Err(Error::domain(format!("crossover index needs N > 1, got {n}")));
    }
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::domain(format!("u must be nonnegative, got {u}")));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::domain(format!("p must be positive, got {p}")));
    }
    let ln_n = n.ln();
    let f = |i: f64| log_denominator_arg(ln_n, u, p, i);
    let (mut lo, mut hi) = (1.0f64, (ln_n / p).sqrt() + u + 10.0);
    while hi - lo > 1e-15 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `|N I^{-u} e^{-p I²} - 1|` at a candidate root.
pub fn crossover_residual(n: f64, u: f64, p: f64, i: f64) -> f64 {
    log_denominator_arg(n.ln(), u, p, i).exp_m1().abs()
}

/// Principal branch `W(e^l)` for `l` of any size, solved in log space.
///
/// Newton iteration on `w + log w = l`.
pub fn lambert_w_of_exp(l: f64) -> f64 {
    let mut w = if l > 1.0 { l - l.ln() } else { l.exp().max(1e-300) };
    if l <= 1.0 {
        // Halley on w e^w = e^l for moderate arguments.
        let x = l.exp();
        w = if x < 1.0 { x } else { 1.0 };
        for _ in 0..100 {
            let ew = w.exp();
            let f = w * ew - x;
            let next = w - f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
            if (next - w).abs() <= 1e-16 * next.abs().max(1e-300) {
                return next;
            }
            w = next;
        }
        return w;
    }
    for _ in 0..100 {
        let next = w - (w + w.ln() - l) / (1.0 + 1.0 / w);
        if (next - w).abs() <= 1e-16 * next {
            return next;
        }
        w = next;
    }
    w
}

/// `I_N` from the Lambert-W identity `I² = u/(2p) W(N^{2/u} 2p/u)`, for `u > 0`.
pub fn crossover_index_lambert(n: f64, u: f64, p: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::domain("the Lambert-W form needs u > 0"));
    }
    if !(n > 1.0 && p > 0.0) {
        return Err(Error::domain("need N > 1 and p > 0"));
    }
    let l = 2.0 / u * n.ln() + (2.0 * p / u).ln();
    Ok((u / (2.0 * p) * lambert_w_of_exp(l)).sqrt())
}

/// `Σ_i i^{-t} e^{-r i²} / (1 + N i^{-u} e^{-p i²})^v`, summed until an
/// analytic tail bound falls below 1e-12 of the partial sum.
///
/// Past `I_N` the denominator is at least one, so the tail is dominated by
/// `Σ_{i>M} i^{-t} e^{-r i²}`.
pub fn lemma_series_value(params: &LemmaParams, n: f64) -> Result<f64> {
    params.check_series()?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("N must be positive, got {n}")));
    }
    let ln_n = n.ln();
    let start_tail = if n > 1.0 {
        crossover_index(n, params.u, params.p)?.ceil() as usize + 1
    } else {
        1
    };
    let mut sum = CompensatedSum::default();
    let mut i = 1usize;
    loop {
        sum.add(log_summand(params, ln_n, i as f64).exp());
        if i >= start_tail {
            let m = i as f64;
            let bound = if params.r > 0.0 {
                m.powf(-params.t) * (-params.r * (m + 1.0) * (m + 1.0)).exp()
                    / -(-params.r * (2.0 * m + 3.0)).exp_m1()
            } else {
                m.powf(1.0 - params.t) / (params.t - 1.0)
            };
            if bound <= SERIES_REL_TOL * sum.value() {
                break;
            }
        }
        i += 1;
    }
    Ok(sum.value())
}

/// Ratio of the series to its predicted asymptote along `n_grid`.
pub fn lemma_series_trace(params: &LemmaParams, n_grid: &[f64]) -> Result<RatioTrace> {
    params.check_series()?;
    check_grid(n_grid, 1.0, "N")?;
    let points = n_grid
        .par_iter()
        .map(|&n| {
            let exact = lemma_series_value(params, n)?;
            let predicted = params.series_asymptote(n);
            Ok(TracePoint {
                n,
                exact,
                predicted,
                ratio: exact / predicted,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RatioTrace::from_points(
        format!(
            "series t={} r={} u={} p={} v={}",
            params.t, params.r, params.u, params.p, params.v
        ),
        points,
    ))
}

/// `a_i = i^{-t} e^{-r i²} / (1 + N i^{-u} e^{-p i²})^v`.
pub fn lemma_weights(params: &LemmaParams, n: f64, len: usize) -> Vec<f64> {
    let ln_n = n.ln();
    (1..=len)
        .map(|i| log_summand(params, ln_n, i as f64).exp())
        .collect()
}

/// `sup { Σ ξ_i² a_i : Σ ξ_i² i^{2q} ≤ 1 } = sup_i a_i i^{-2q}`.
///
/// The objective is linear in `ξ_i²` over a simplex, so the supremum sits on a
/// vertex. Beyond `I_N` the factor `(1 + ...)^{-v}` equals one to double
/// precision and `i^{-t-2q} e^{-r i²}` is nonincreasing, so the scan stops
/// there; the limit `1` is included when `t + 2q = 0` and `r = 0`.
pub fn lemma_norm_sup(params: &LemmaParams, n: f64) -> Result<f64> {
    params.check_norm_sup()?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("N must be positive, got {n}")));
    }
    let ln_n = n.ln();
    let limit = if params.t + 2.0 * params.q == 0.0 && params.r == 0.0 {
        1.0
    } else {
        0.0
    };
    let mut best = 0.0f64;
    let mut i = 1usize;
    loop {
        let x = i as f64;
        best = best.max(log_summand(params, ln_n, x).exp() * x.powf(-2.0 * params.q));
        if log_denominator_arg(ln_n, params.u, params.p, x) < -40.0 {
            break;
        }
        i += 1;
    }
    Ok(best.max(limit))
}

/// Ratio of the supremum to `N^{-r/p} (log N)^{-t/2-q+ur/(2p)}` along `n_grid`.
pub fn lemma_norm_sup_trace(params: &LemmaParams, n_grid: &[f64]) -> Result<RatioTrace> {
    params.check_norm_sup()?;
    check_grid(n_grid, 1.0, "N")?;
    let points = n_grid
        .iter()
        .map(|&n| {
            let exact = lemma_norm_sup(params, n)?;
            let predicted = params.norm_sup_asymptote(n);
            Ok(TracePoint {
                n,
                exact,
                predicted,
                ratio: exact / predicted,
            })
        })
        .collect::<Result<_>>()?;
    Ok(RatioTrace::from_points(
        format!(
            "norm sup q={} t={} r={} u={} p={} v={}",
            params.q, params.t, params.r, params.u, params.p, params.v
        ),
        points,
    ))
}

/// `Σ ξ_i² a_i` for a fixed `ξ`, normalized by the supremum's asymptote.
/// The ratio should decrease to zero.
pub fn lemma_fixed_xi_trace(
    params: &LemmaParams,
    xi: &CoefficientSequence,
    n_grid: &[f64],
) -> Result<RatioTrace> {
    params.check_norm_sup()?;
    check_grid(n_grid, 1.0, "N")?;
    let points = n_grid
        .par_iter()
        .map(|&n| {
            let a = lemma_weights(params, n, xi.truncation_level());
            let exact: CompensatedSum = xi.iter().zip(&a).map(|(x, a)| x * x * a).collect();
            let predicted = params.norm_sup_asymptote(n);
            TracePoint {
                n,
                exact: exact.value(),
                predicted,
                ratio: exact.value() / predicted,
            }
        })
        .collect();
    Ok(RatioTrace::from_points(
        format!("fixed xi q={} t={}", params.q, params.t),
        points,
    ))
}

/// Rejects sequences whose tail is visibly outside `S^s`.
///
/// Fits the log-log slope of `μ_i² i^{2s}` over the upper half of the stored
/// nonzero coordinates; membership needs a slope below `-1`.
pub fn check_sobolev_tail(mu: &CoefficientSequence, s: f64) -> Result<()> {
    let len = mu.truncation_level();
    let pts: Vec<(f64, f64)> = (len / 2 + 1..=len)
        .filter_map(|i| {
            let m = mu.get(i);
            (m != 0.0).then(|| {
                let x = (i as f64).ln();
                (x, 2.0 * m.abs().ln() + 2.0 * s * x)
            })
        })
        .collect();
    if pts.len() < 10 {
        return Ok(());
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    if slope < -1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "sequence tail is not in S^{s}: mu_i^2 i^{} decays like i^{slope:.4}",
            2.0 * s
        )))
    }
}

/// `Σ |μ_i i^{-q-1/2}| / (1 + N i^{-u} e^{-p i²})` times `(log N)^{t/2+q}`.
/// The trace should decrease to zero for `μ ∈ S^{t/2}`.
pub fn lemma_csbound_check(
    mu: &CoefficientSequence,
    params: &LemmaParams,
    n_grid: &[f64],
) -> Result<RatioTrace> {
    params.check_cs_bound()?;
    check_grid(n_grid, 1.0, "N")?;
    check_sobolev_tail(mu, params.t / 2.0)?;
    let exponent = params.t / 2.0 + params.q;
    let points = n_grid
        .par_iter()
        .map(|&n| {
            let ln_n = n.ln();
            let exact: CompensatedSum = mu
                .iter()
                .enumerate()
                .map(|(k, m)| {
                    let x = (k + 1) as f64;
                    let log_l = -(params.q + 0.5) * x.ln()
                        - softplus(log_denominator_arg(ln_n, params.u, params.p, x));
                    m.abs() * log_l.exp()
                })
                .collect();
            let predicted = ln_n.powf(-exponent);
            TracePoint {
                n,
                exact: exact.value(),
                predicted,
                ratio: exact.value() / predicted,
            }
        })
        .collect();
    Ok(RatioTrace::from_points(
        format!("weighted l1 t={} q={} u={} p={}", params.t, params.q, params.u, params.p),
        points,
    ))
}

/// Both parts of the Gaussian-type integral bounds at each `K`.
///
/// `exact` and `predicted` are reported after multiplying both by `e^{-ζK²}`
/// (growth) or `e^{ζK²}` (tail), which leaves the ratios unchanged.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralCheck {
    /// `∫_1^K e^{ζx²} x^γ dx` over `e^{ζK²} K^{γ-1} / (2ζ)`; tends to one.
    pub growth: RatioTrace,
    /// `∫_K^∞ e^{-ζx²} x^{-γ} dx` over `e^{-ζK²} K^{-γ-1} / (2ζ)`; at most one.
    /// Present only for `γ > 0`.
    pub tail: Option<RatioTrace>,
}

impl IntegralCheck {
    pub fn tail_bound_holds(&self) -> bool {
        self.tail
            .as_ref()
            .is_none_or(|t| t.points.iter().all(|p| p.ratio <= 1.0))
    }
}

/// Quadrature check of the two integral bounds along `k_grid` (all `K > 1`).
///
/// Integrands are rescaled by `e^{∓ζK²}` so that both sides stay finite.
pub fn integral_bound_check(gamma: f64, zeta: f64, k_grid: &[f64]) -> Result<IntegralCheck> {
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::domain(format!("zeta must be positive, got {zeta}")));
    }
    if !gamma.is_finite() {
        return Err(Error::domain("gamma must be finite"));
    }
    check_grid(k_grid, 1.0, "K")?;
    let growth = k_grid
        .iter()
        .map(|&k| {
            let f = |x: f64| (zeta * (x - k) * (x + k)).exp() * x.powf(gamma);
            let predicted = k.powf(gamma - 1.0) / (2.0 * zeta);
            let exact = adaptive_simpson(&f, 1.0, k, 1e-15 * predicted);
            TracePoint {
                n: k,
                exact,
                predicted,
                ratio: exact / predicted,
            }
        })
        .collect();
    let tail = (gamma > 0.0).then(|| {
        let points = k_grid
            .iter()
            .map(|&k| {
                // x = K + y; the truncated remainder beyond Y is bounded and added.
                let g = |y: f64| (-zeta * y * (2.0 * k + y)).exp() * (k + y).powf(-gamma);
                let y_max = (k * k + 60.0 / zeta).sqrt() - k;
                let predicted = k.powf(-gamma - 1.0) / (2.0 * zeta);
                let body = adaptive_simpson(&g, 0.0, y_max, 1e-15 * predicted);
                let rest = (k + y_max).powf(-gamma) * (-60.0f64).exp() / (2.0 * zeta * (k + y_max));
                let exact = body + rest;
                TracePoint {
                    n: k,
                    exact,
                    predicted,
                    ratio: exact / predicted,
                }
            })
            .collect();
        RatioTrace::from_points(format!("tail integral gamma={gamma} zeta={zeta}"), points)
    });
    Ok(IntegralCheck {
        growth: RatioTrace::from_points(
            format!("growth integral gamma={gamma} zeta={zeta}"),
            growth,
        ),
        tail,
    })
}

/// Result of one named check in the suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub name: String,
    /// What was required, e.g. "max/min <= 4".
    pub criterion: String,
    pub passed: bool,
    pub trace: RatioTrace,
}

/// The standard battery of checks over `n_grid`.
///
/// The factor-4 band and "decreasing over the top three points" are finite
/// surrogates for the asymptotic statements.
pub fn lemma_suite(n_grid: &[f64]) -> Result<Vec<SuiteEntry>> {
    check_grid(n_grid, 1.0, "N")?;
    let mut out = Vec::new();

    let mut crossover = Vec::new();
    let mut worst = 0.0f64;
    for &n in n_grid {
        for (u, p) in [(0.0, 1.0), (1.0, 1.0), (1.0, 2.0), (3.0, 0.5)] {
            let i = crossover_index(n, u, p)?;
            worst = worst.max(crossover_residual(n, u, p, i));
            if u == 1.0 && p == 1.0 {
                let predicted = (n.ln() / p).sqrt();
                crossover.push(TracePoint {
                    n,
                    exact: i,
                    predicted,
                    ratio: i / predicted,
                });
            }
        }
    }
    out.push(SuiteEntry {
        name: "crossover residual".into(),
        criterion: format!("max residual {worst:.3e} <= 1e-10"),
        passed: worst <= 1e-10,
        trace: RatioTrace::from_points("crossover u=1 p=1", crossover),
    });

    for params in [
        LemmaParams::new(2.0, 1.0, 2.0, 1.0, 2.0, 0.0),
        LemmaParams::new(3.0, 1.0, 1.0, 0.0, 2.0, 0.0),
    ] {
        let trace = lemma_series_trace(&params, n_grid)?;
        out.push(SuiteEntry {
            name: "series".into(),
            criterion: format!("max/min {:.3} <= {RATIO_BAND}", trace.spread()),
            passed: trace.within_band(RATIO_BAND),
            trace,
        });
    }

    let sup_params = LemmaParams::new(0.0, 1.0, 2.0, 0.0, 2.0, 1.0);
    let trace = lemma_norm_sup_trace(&sup_params, n_grid)?;
    out.push(SuiteEntry {
        name: "norm sup".into(),
        criterion: format!("max/min {:.3} <= {RATIO_BAND}", trace.spread()),
        passed: trace.within_band(RATIO_BAND),
        trace,
    });
    let xi = CoefficientSequence::from_fn(100_000, |i| (i as f64).powf(-sup_params.q - 1.0))?;
    let trace = lemma_fixed_xi_trace(&sup_params, &xi, n_grid)?;
    out.push(SuiteEntry {
        name: "fixed xi".into(),
        criterion: "decreasing over the top three points".into(),
        passed: trace.is_finite_positive() && trace.decreasing_over_last(3),
        trace,
    });

    for (t, q) in [(2.0, 0.0), (1.0, -0.25)] {
        let params = LemmaParams::new(t, 1.0, 1.0, 0.0, 2.0, q);
        let mu = CoefficientSequence::from_fn(100_000, |i| {
            (i as f64).powf(-(t + 1.0) / 2.0 - 0.01)
        })?;
        let trace = lemma_csbound_check(&mu, &params, n_grid)?;
        out.push(SuiteEntry {
            name: "weighted l1".into(),
            criterion: "decreasing over the top three points".into(),
            passed: trace.is_finite_positive() && trace.decreasing_over_last(3),
            trace,
        });
    }

    let k_grid = [2.0, 5.0, 10.0, 30.0];
    let integrals = integral_bound_check(1.0, 1.0, &k_grid)?;
    let last = integrals.growth.points.last().map_or(f64::NAN, |p| p.ratio);
    out.push(SuiteEntry {
        name: "growth integral".into(),
        criterion: format!("|ratio - 1| = {:.3e} <= 0.02 at K = 30", (last - 1.0).abs()),
        passed: (last - 1.0).abs() <= 0.02,
        trace: integrals.growth.clone(),
    });
    if let Some(tail) = integrals.tail.clone() {
        out.push(SuiteEntry {
            name: "tail integral".into(),
            criterion: "ratio <= 1 at every K".into(),
            passed: integrals.tail_bound_holds(),
            trace: tail,
        });
    }
    Ok(out)
}
