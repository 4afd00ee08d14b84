//! Sequence-space representation of the heat equation on `[0, 1]` with
//! Dirichlet boundary conditions.
//!
//! A function `f = Σ μ_i e_i` is stored by its coefficients in the sine basis
//! `e_i(x) = √2 sin(iπx)`. The heat semigroup at time `T` is diagonal in that
//! basis with eigenvalues `κ_i = exp(-i²π²T)`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{ensure_same_len, Error, Result};
use crate::rng::{NormalStream, Purpose, StreamKey};
use crate::summation::compensated_sum;

/// Time horizon used by every experiment unless configured otherwise.
pub const DEFAULT_TIME_HORIZON: f64 = 0.1;

/// Smallest truncation handed out by [`default_truncation`].
pub const MIN_TRUNCATION: usize = 100;

/// Finite truncation `(μ_1, ..., μ_N)` of an ℓ² sequence.
///
/// Index `i` in the mathematical sense is stored at position `i - 1`.
/// `tail_tol`, when present, bounds the squared ℓ² mass of the discarded
/// coordinates `i > N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSequence {
    values: Vec<f64>,
    tail_tol: Option<f64>,
}

impl CoefficientSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("a coefficient sequence needs at least one entry"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient {}", pos + 1)));
        }
        Ok(Self {
            values,
            tail_tol: None,
        })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    /// Unit vector `e_k` (1-based) on a truncation of length `len`.
    pub fn unit(len: usize, k: usize) -> Result<Self> {
        if k == 0 || k > len {
            return Err(Error::domain(format!("unit index {k} outside 1..={len}")));
        }
        let mut v = vec![0.0; len];
        v[k - 1] = 1.0;
        Self::new(v)
    }

    /// Builds `(f(1), ..., f(len))`.
    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((1..=len).map(f).collect())
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        debug_assert!(tail_tol >= 0.0);
        self.tail_tol = Some(tail_tol);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn truncation_level(&self) -> usize {
        self.values.len()
    }

    pub fn tail_tol(&self) -> Option<f64> {
        self.tail_tol
    }

    /// Coefficient `i` (1-based).
    pub fn get(&self, i: usize) -> f64 {
        self.values[i - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    /// `Σ μ_i²` on the truncation.
    pub fn norm_sq(&self) -> f64 {
        compensated_sum(self.values.iter().map(|v| v * v))
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// The first `len` coordinates, padding with zeros when `len` exceeds the
    /// stored truncation.
    pub fn resized(&self, len: usize) -> Result<Self> {
        let mut v = self.values.clone();
        v.resize(len, 0.0);
        Self::new(v)
    }
}

/// The forward operator `μ ↦ (κ_i μ_i)` of the heat equation at time `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatOperator {
    time_horizon: f64,
    truncation_level: usize,
}

impl HeatOperator {
    pub fn new(time_horizon: f64, truncation_level: usize) -> Result<Self> {
        if !(time_horizon > 0.0 && time_horizon.is_finite()) {
            return Err(Error::domain(format!(
                "time horizon must be positive, got {time_horizon}"
            )));
        }
        if truncation_level == 0 {
            return Err(Error::domain("truncation level must be at least 1"));
        }
        Ok(Self {
            time_horizon,
            truncation_level,
        })
    }

    pub fn time_horizon(&self) -> f64 {
        self.time_horizon
    }

    pub fn truncation_level(&self) -> usize {
        self.truncation_level
    }

    /// `log κ_i = -i²π²T`, exact for every `i` even when `κ_i` underflows.
    pub fn log_eigenvalue(&self, i: usize) -> f64 {
        let i = i as f64;
        -i * i * PI * PI * self.time_horizon
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.log_eigenvalue(i).exp()
    }

    pub fn eigenvalues(&self) -> CoefficientSequence {
        CoefficientSequence::from_fn(self.truncation_level, |i| self.eigenvalue(i))
            .expect("eigenvalues are finite")
    }
}

/// `κ_i = exp(-i²π²T)` for `i = 1..=N`.
///
/// For `T = 0.1` the values underflow to zero from `i = 28` on; the ordering
/// is strict wherever the eigenvalue is representable.
pub fn heat_eigenvalues(time_horizon: f64, truncation: usize) -> Result<CoefficientSequence> {
    Ok(HeatOperator::new(time_horizon, truncation)?.eigenvalues())
}

fn check_unit_interval(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("grid point {x} outside [0, 1]")))
    }
}

/// `e_i(x) = √2 sin(iπx)`.
pub fn sine_basis_eval(i: usize, x: f64) -> Result<f64> {
    if i == 0 {
        return Err(Error::domain("basis index starts at 1"));
    }
    check_unit_interval(x)?;
    Ok(basis_value(i, x))
}

/// Exact zero at the Dirichlet boundary, where `sin(iπ)` would leave rounding residue.
#[inline]
pub(crate) fn basis_value(i: usize, x: f64) -> f64 {
    if x == 0.0 || x == 1.0 {
        0.0
    } else {
        SQRT_2 * (i as f64 * PI * x).sin()
    }
}

/// Sine-basis values on a fixed grid, laid out row-major by grid point.
#[derive(Clone, Debug)]
pub struct SineBasisGrid {
    grid: Vec<f64>,
    truncation: usize,
    values: Vec<f64>,
}

impl SineBasisGrid {
    pub fn new(grid: &[f64], truncation: usize) -> Result<Self> {
        for &x in grid {
            check_unit_interval(x)?;
        }
        let mut values = Vec::with_capacity(grid.len() * truncation);
        for &x in grid {
            values.extend((1..=truncation).map(|i| basis_value(i, x)));
        }
        Ok(Self {
            grid: grid.to_vec(),
            truncation,
            values,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Basis values `(e_1(x_j), ..., e_N(x_j))` at grid point `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.truncation..(j + 1) * self.truncation]
    }

    /// `Σ_i c_i e_i(x_j)` for every grid point.
    pub fn synthesize(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        ensure_same_len("coefficients", self.truncation, coefficients.len())?;
        Ok((0..self.grid.len())
            .map(|j| compensated_sum(self.row(j).iter().zip(coefficients).map(|(e, c)| e * c)))
            .collect())
    }
}

/// Default truncation `max(100, ⌈4·sqrt(log(max(nτ², n)) / (π²T))⌉)`.
pub fn default_truncation(n: f64, tau: f64, time_horizon: f64) -> usize {
    let scale = (n * tau * tau).max(n);
    let log = scale.ln().max(0.0);
    let crossover = (4.0 * (log / (PI * PI * time_horizon)).sqrt()).ceil();
    MIN_TRUNCATION.max(crossover as usize)
}

/// Leading constant `8√2·24/π³` bounding `|μ_{0,i}| i³` for the cubic test signal.
fn cubic_coefficient_bound() -> f64 {
    8.0 * SQRT_2 * 24.0 / PI.powi(3)
}

/// Sine coefficients of `μ₀(x) = 4x(x-1)(8x-5)`:
/// `μ_{0,i} = 8√2(13 + 11(-1)^i) / (π³ i³)`.
///
/// `tail_tol` bounds `Σ_{i>N} μ_{0,i}²` by `C² N⁻⁵ / 5`.
pub fn true_signal_coefficients(truncation: usize) -> Result<CoefficientSequence> {
    if truncation == 0 {
        return Err(Error::domain("truncation level must be at least 1"));
    }
    let seq = CoefficientSequence::from_fn(truncation, |i| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        8.0 * SQRT_2 * (13.0 + 11.0 * sign) / (PI.powi(3) * (i as f64).powi(3))
    })?;
    let c = cubic_coefficient_bound();
    let tail = c * c * (truncation as f64).powi(-5) / 5.0;
    Ok(seq.with_tail_tol(tail))
}

/// The cubic test signal evaluated pointwise.
pub fn true_signal(x: f64) -> f64 {
    4.0 * x * (x - 1.0) * (8.0 * x - 5.0)
}

/// `u(x, t) = Σ μ_i e^{-i²π²t} e_i(x)` on the truncation.
pub fn forward_solution(mu: &CoefficientSequence, t: f64, x_grid: &[f64]) -> Result<Vec<f64>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be nonnegative, got {t}")));
    }
    for &x in x_grid {
        check_unit_interval(x)?;
    }
    let damped: Vec<f64> = mu
        .values()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let i = (k + 1) as f64;
            m * (-i * i * PI * PI * t).exp()
        })
        .collect();
    Ok(x_grid
        .iter()
        .map(|&x| {
            compensated_sum(
                damped
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * basis_value(k + 1, x)),
            )
        })
        .collect())
}

/// Noisy transformed coefficients `Y_i = κ_i μ_i + n^{-1/2} Z_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub y: CoefficientSequence,
    pub noise_level_n: f64,
    pub seed: u64,
}

impl ObservationSet {
    pub fn truncation_level(&self) -> usize {
        self.y.truncation_level()
    }
}

pub fn simulate_observations(
    mu0: &CoefficientSequence,
    kappa: &CoefficientSequence,
    n: f64,
    seed: u64,
) -> Result<ObservationSet> {
    simulate_observations_keyed(mu0, kappa, n, StreamKey::new(seed, Purpose::Observation, 0))
}

/// As [`simulate_observations`], drawing the noise from an explicit stream.
pub fn simulate_observations_keyed(
    mu0: &CoefficientSequence,
    kappa: &CoefficientSequence,
    n: f64,
    key: StreamKey,
) -> Result<ObservationSet> {
    ensure_same_len("mu0", kappa.truncation_level(), mu0.truncation_level())?;
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("noise level n must be positive, got {n}")));
    }
    let sd = n.sqrt().recip();
    let mut noise = NormalStream::new(key);
    let y = mu0
        .iter()
        .zip(kappa.iter())
        .map(|(m, k)| k * m + sd * noise.next_normal())
        .collect();
    Ok(ObservationSet {
        y: CoefficientSequence::new(y)?,
        noise_level_n: n,
        seed: key.seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevNorm {
    pub beta: f64,
    pub value: f64,
}

/// `‖μ‖_β = (Σ μ_i² i^{2β})^{1/2}` over the stored coefficients.
pub fn sobolev_norm(mu: &CoefficientSequence, beta: f64) -> Result<SobolevNorm> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::domain(format!("Sobolev index must be nonnegative, got {beta}")));
    }
    let sq = compensated_sum(
        mu.values()
            .iter()
            .enumerate()
            .map(|(k, m)| m * m * ((k + 1) as f64).powf(2.0 * beta)),
    );
    Ok(SobolevNorm {
        beta,
        value: sq.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalue_examples() {
        let k = heat_eigenvalues(0.1, 5).unwrap();
        assert!((k.get(1) - 0.372_707_838_853_437_94).abs() < 1e-15);
        assert!((k.get(5) / 1.924_035_917_504_897_6e-11 - 1.0).abs() < 1e-12);
        let small_t = heat_eigenvalues(1e-12, 1).unwrap();
        assert!((small_t.get(1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eigenvalues_reject_bad_domain() {
        assert!(matches!(heat_eigenvalues(0.0, 3), Err(Error::Domain(_))));
        assert!(matches!(heat_eigenvalues(-1.0, 3), Err(Error::Domain(_))));
        assert!(matches!(heat_eigenvalues(0.1, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn eigenvalue_ratio_is_exact_in_log_space() {
        let op = HeatOperator::new(0.1, 60).unwrap();
        for i in 1..60 {
            let step = op.log_eigenvalue(i + 1) - op.log_eigenvalue(i);
            let expected = -((2 * i + 1) as f64) * PI * PI * 0.1;
            assert!((step - expected).abs() <= 1e-12 * expected.abs());
        }
        let k = op.eigenvalues();
        for i in 1..60 {
            if k.get(i + 1) > 0.0 {
                assert!(k.get(i + 1) < k.get(i));
                let ratio = k.get(i + 1) / k.get(i);
                let expected = (-((2 * i + 1) as f64) * PI * PI * 0.1).exp();
                assert!((ratio / expected - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn basis_examples() {
        assert!((sine_basis_eval(1, 0.5).unwrap() - SQRT_2).abs() < 1e-15);
        assert!(sine_basis_eval(2, 0.5).unwrap().abs() < 1e-15);
        assert!((sine_basis_eval(3, 1.0 / 6.0).unwrap() - SQRT_2).abs() < 1e-15);
        assert!(sine_basis_eval(1, 1.5).is_err());
        assert!(sine_basis_eval(1, -0.1).is_err());
    }

    #[test]
    fn cubic_coefficients() {
        let mu = true_signal_coefficients(2).unwrap();
        assert!((mu.get(1) - 0.729_768_918_444_377_5).abs() < 1e-14);
        assert!((mu.get(2) - 1.094_653_377_666_566_3).abs() < 1e-14);
        assert!(true_signal_coefficients(0).is_err());
    }

    #[test]
    fn cubic_synthesis_converges_to_polynomial() {
        let mut errors = Vec::new();
        for n in [10, 100, 1000] {
            let mu = true_signal_coefficients(n).unwrap();
            let u = forward_solution(&mu, 0.0, &[0.25]).unwrap()[0];
            errors.push((u - 2.25).abs());
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2]);
        assert!(errors[2] < 1e-6);
        assert_eq!(true_signal(0.25), 2.25);
    }

    #[test]
    fn cubic_tail_bound_dominates_doubling_difference() {
        let mu = true_signal_coefficients(100).unwrap();
        let mu2 = true_signal_coefficients(200).unwrap();
        assert!(mu2.norm_sq() - mu.norm_sq() <= mu.tail_tol().unwrap());
    }

    #[test]
    fn single_mode_solution() {
        let mu = CoefficientSequence::unit(4, 1).unwrap();
        let grid = [0.0, 0.2, 0.5, 0.9, 1.0];
        let t = 0.03;
        let u = forward_solution(&mu, t, &grid).unwrap();
        for (x, v) in grid.iter().zip(u) {
            let expected = (-PI * PI * t).exp() * SQRT_2 * (PI * x).sin();
            assert!((v - expected).abs() < 1e-15);
        }
        let zero = CoefficientSequence::zeros(4).unwrap();
        assert!(forward_solution(&zero, t, &grid).unwrap().iter().all(|v| *v == 0.0));
        assert!(forward_solution(&mu, t, &[1.2]).is_err());
        assert!(forward_solution(&mu, -1.0, &[0.5]).is_err());
    }

    #[test]
    fn sobolev_examples() {
        let e1 = CoefficientSequence::unit(5, 1).unwrap();
        assert_eq!(sobolev_norm(&e1, 2.0).unwrap().value, 1.0);
        let mu = CoefficientSequence::from_fn(10, |i| (i as f64).powi(-2)).unwrap();
        assert!((sobolev_norm(&mu, 0.0).unwrap().value - 1.040_209_874_733_823_5).abs() < 1e-14);
        let zero = CoefficientSequence::zeros(3).unwrap();
        assert_eq!(sobolev_norm(&zero, 1.0).unwrap().value, 0.0);
    }

    #[test]
    fn observations_are_deterministic_and_dimension_checked() {
        let n = 30;
        let kappa = heat_eigenvalues(0.1, n).unwrap();
        let mu = true_signal_coefficients(n).unwrap();
        let a = simulate_observations(&mu, &kappa, 1e4, 9).unwrap();
        let b = simulate_observations(&mu, &kappa, 1e4, 9).unwrap();
        assert_eq!(a, b);
        let short = true_signal_coefficients(n - 1).unwrap();
        assert!(matches!(
            simulate_observations(&short, &kappa, 1e4, 9),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(simulate_observations(&mu, &kappa, 0.0, 9).is_err());
    }

    #[test]
    fn vanishing_noise_recovers_transformed_signal() {
        let n = 40;
        let kappa = heat_eigenvalues(0.1, n).unwrap();
        let mu = true_signal_coefficients(n).unwrap();
        let obs = simulate_observations(&mu, &kappa, 1e18, 1).unwrap();
        for i in 1..=n {
            assert!((obs.y.get(i) - kappa.get(i) * mu.get(i)).abs() <= 1e-7);
        }
    }

    #[test]
    fn default_truncation_floor() {
        assert_eq!(default_truncation(1e4, 1.0, 0.1), 100);
        assert_eq!(default_truncation(0.5, 1.0, 0.1), 100);
        assert!(default_truncation(1e300, 1.0, 1e-4) > 100);
    }
}
