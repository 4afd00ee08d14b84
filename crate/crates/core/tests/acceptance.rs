//! Acceptance criteria 1 to 8. Each test writes one `PASS`/`FAIL` line to
//! stderr (uncaptured) and then asserts the criterion.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use heatbayes::asymptotics::{lemma_suite, DEFAULT_N_GRID};
use heatbayes::coverage::{
    emit_figure_data, run_ball_coverage, run_interval_coverage, run_risk_curve, ExperimentConfig,
    FigureConfig, FigurePreset, FunctionalSpec, TruthSource,
};
use heatbayes::credible::{quadratic_form_quantile, QuadraticForm};
use heatbayes::posterior::ConjugateWeights;
use heatbayes::prior::{PriorFamily, PriorSpec};
use heatbayes::sequence::CoefficientSequence;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::function::gamma::gamma_lr;

fn report(id: u32, name: &str, passed: bool, started: Instant, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(
        err,
        "[criterion {id}] {verdict} {name} ({:.1} s): {detail}",
        started.elapsed().as_secs_f64()
    );
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + uniform(rng) * (hi.ln() - lo.ln())).exp()
}

/// Mean and variance of the density proportional to `exp(f)`, by Simpson's
/// rule around the mode of the concave log density `f`.
fn quadrature_moments(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, bracket: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (-bracket, bracket);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if df(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mode = 0.5 * (lo + hi);
    let h = 1e-3 * bracket.min(1.0);
    let mut curvature = -(f(mode + h) + f(mode - h) - 2.0 * f(mode)) / (h * h);
    let mut step = h;
    while !(curvature > 0.0 && curvature.is_finite()) && step < bracket {
        step *= 10.0;
        curvature = -(f(mode + step) + f(mode - step) - 2.0 * f(mode)) / (step * step);
    }
    let sd = curvature.sqrt().recip();
    let (a, b) = (mode - 14.0 * sd, mode + 14.0 * sd);
    let m = 20_000;
    let dx = (b - a) / m as f64;
    let fmode = f(mode);
    let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for k in 0..=m {
        let x = a + k as f64 * dx;
        let w = if k == 0 || k == m {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let d = w * (f(x) - fmode).exp();
        z += d;
        s1 += d * (x - mode);
        s2 += d * (x - mode) * (x - mode);
    }
    let mean_offset = s1 / z;
    (mode + mean_offset, s2 / z - mean_offset * mean_offset)
}

#[test]
fn criterion_1_conjugacy_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let lambda = log_uniform(&mut rng, 1e-3, 10.0);
        let kappa = log_uniform(&mut rng, 1e-3, 1.0);
        let a = log_uniform(&mut rng, 1e-6, 1e6);
        let n = a / (lambda * kappa * kappa);
        let y = (2.0 * uniform(&mut rng) - 1.0) * 3.0 * (kappa * kappa * lambda + 1.0 / n).sqrt();
        let weights = ConjugateWeights::new(
            &CoefficientSequence::new(vec![lambda]).unwrap(),
            &CoefficientSequence::new(vec![kappa]).unwrap(),
            n,
        )
        .unwrap();
        let mean = weights.posterior_mean(&[y]).unwrap()[0];
        let var = weights.spread()[0];
        let log_density = |mu: f64| -mu * mu / (2.0 * lambda) - 0.5 * n * (y - kappa * mu).powi(2);
        let slope = |mu: f64| -mu / lambda + n * kappa * (y - kappa * mu);
        let bracket = 20.0 * lambda.sqrt() + (y / kappa).abs();
        let (q_mean, q_var) = quadrature_moments(log_density, slope, bracket);
        worst = worst.max((mean - q_mean).abs()).max((var - q_var).abs());
    }
    let passed = worst <= 1e-6 && started.elapsed().as_secs_f64() < 10.0;
    report(1, "conjugacy oracle", passed, started, &format!("max abs error {worst:.2e} over 50 tuples"));
    assert!(passed);
}

fn chi_squared_quantile(k: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0 * k + 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gamma_lr(0.5 * k, 0.5 * mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_2_quadratic_form_quantiles() {
    let started = Instant::now();
    let mut worst_z: f64 = 0.0;
    let mut seed = 1;
    for k in [1usize, 3, 10] {
        let form = QuadraticForm::new(CoefficientSequence::new(vec![1.0; k]).unwrap()).unwrap();
        for p in [0.5, 0.95, 0.99] {
            let est = quadratic_form_quantile(&form, p, 200_000, seed).unwrap();
            seed += 1;
            let exact = chi_squared_quantile(k as f64, p);
            worst_z = worst_z.max((est.value - exact).abs() / est.std_error);
        }
    }
    let passed = worst_z <= 3.0 && started.elapsed().as_secs_f64() < 30.0;
    report(
        2,
        "quadratic-form quantiles",
        passed,
        started,
        &format!("max |error|/se {worst_z:.2} over 9 chi-squared cases"),
    );
    assert!(passed);
}

#[test]
fn criterion_3_bayesian_self_consistency() {
    let started = Instant::now();
    let nominal_se = (0.95 * 0.05 / 1000.0_f64).sqrt();
    let mut passed = true;
    let mut details = Vec::new();
    for prior in [PriorSpec::polynomial(1.0, 1.0).unwrap(), PriorSpec::exponential(1.0).unwrap()] {
        let mut cfg = ExperimentConfig::new(prior.clone(), vec![1e4]);
        cfg.truth = TruthSource::PriorDraw;
        cfg.seed = 3;
        let ball = run_ball_coverage(&cfg).unwrap().rows[0].ball_coverage.unwrap();
        let interval = run_interval_coverage(&cfg, &FunctionalSpec::PointEvaluation(0.5))
            .unwrap()
            .rows[0]
            .interval_coverage
            .unwrap();
        passed &= (ball - 0.95).abs() <= 3.0 * nominal_se && (interval - 0.95).abs() <= 3.0 * nominal_se;
        details.push(format!("{prior}: ball {ball:.3}, interval {interval:.3}"));
    }
    passed &= started.elapsed().as_secs_f64() < 300.0;
    report(3, "bayesian self-consistency", passed, started, &details.join("; "));
    assert!(passed);
}

fn coverage_at(prior: PriorSpec, n: f64) -> (f64, f64) {
    let mut cfg = ExperimentConfig::new(prior, vec![n]);
    cfg.seed = 4;
    let row = run_ball_coverage(&cfg).unwrap().rows.remove(0);
    (row.ball_coverage.unwrap(), row.ball_coverage_se.unwrap())
}

#[test]
fn criterion_4_coverage_ordering() {
    let started = Instant::now();
    let (c1, s1) = coverage_at(PriorSpec::polynomial(1.0, 1.0).unwrap(), 1e8);
    let (c3, s3) = coverage_at(PriorSpec::polynomial(3.0, 1.0).unwrap(), 1e8);
    let (c5, s5) = coverage_at(PriorSpec::exponential(5.0).unwrap(), 1e8);
    let gap = |a: f64, sa: f64, b: f64, sb: f64| a - b > 3.0 * (sa * sa + sb * sb).sqrt();
    let passed = c1 >= 0.95
        && c5 <= 0.5
        && gap(c1, s1, c3, s3)
        && gap(c3, s3, c5, s5)
        && started.elapsed().as_secs_f64() < 600.0;
    report(
        4,
        "coverage ordering at n = 1e8",
        passed,
        started,
        &format!("poly a=1 {c1:.3}, poly a=3 {c3:.3}, exp a=5 {c5:.3}"),
    );
    assert!(passed);
}

#[test]
fn criterion_5_radius_ratio_growth() {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::new(PriorSpec::polynomial(1.0, 1.0).unwrap(), vec![1e4, 1e6, 1e8]);
    cfg.seed = 5;
    let ratios: Vec<f64> = run_ball_coverage(&cfg)
        .unwrap()
        .rows
        .iter()
        .map(|r| r.radius_ratio.unwrap())
        .collect();
    let passed = ratios.windows(2).all(|w| w[1] > w[0]) && started.elapsed().as_secs_f64() < 300.0;
    report(
        5,
        "radius ratio growth",
        passed,
        started,
        &format!("r/r~ at n = 1e4, 1e6, 1e8: {ratios:.3?}"),
    );
    assert!(passed);
}

#[test]
fn criterion_6_contraction_trend() {
    let started = Instant::now();
    let grid = vec![1e2, 1e4, 1e6, 1e8];
    let priors = [
        PriorSpec::polynomial(1.0, 1.0).unwrap(),
        PriorSpec::polynomial(3.0, 1.0).unwrap(),
        PriorSpec::exponential(1.0).unwrap(),
        PriorSpec::exponential(5.0).unwrap(),
    ];
    let mut passed = true;
    let mut details = Vec::new();
    for prior in priors {
        let mut cfg = ExperimentConfig::new(prior.clone(), grid.clone());
        cfg.seed = 6;
        cfg.replications = 200;
        let risks: Vec<f64> = run_risk_curve(&cfg)
            .unwrap()
            .rows
            .iter()
            .map(|r| r.risk_exact.unwrap())
            .collect();
        let decreasing = risks.windows(2).all(|w| w[1] < w[0]);
        passed &= decreasing;
        let mut detail = format!("{prior}: decreasing {decreasing}");
        if prior.family() == PriorFamily::Exponential {
            let scaled: Vec<f64> = risks.iter().zip(&grid).map(|(r, n)| r * n.ln().powf(2.4)).collect();
            let max = scaled.iter().cloned().fold(f64::MIN, f64::max);
            let min = scaled.iter().cloned().fold(f64::MAX, f64::min);
            passed &= max / min <= 4.0;
            detail.push_str(&format!(", risk*(log n)^2.4 max/min {:.2}", max / min));
        }
        details.push(detail);
    }
    passed &= started.elapsed().as_secs_f64() < 300.0;
    report(6, "contraction trend", passed, started, &details.join("; "));
    assert!(passed);
}

#[test]
fn criterion_7_lemma_suite() {
    let started = Instant::now();
    let suite = lemma_suite(&DEFAULT_N_GRID).unwrap();
    let failed: Vec<&str> = suite.iter().filter(|e| !e.passed).map(|e| e.name.as_str()).collect();
    let passed = failed.is_empty() && started.elapsed().as_secs_f64() < 60.0;
    report(
        7,
        "asymptotic checks",
        passed,
        started,
        &format!("{} of {} entries pass; failing: {failed:?}", suite.len() - failed.len(), suite.len()),
    );
    assert!(passed);
}

fn figure_checksums(out: &Path) -> Vec<(String, String)> {
    let status = Command::new(env!("CARGO_BIN_EXE_heatbayes"))
        .args(["figures", "--seed", "8", "--out"])
        .arg(out)
        .output()
        .unwrap();
    assert!(status.status.success());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| (o["path"].as_str().unwrap().to_string(), o["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn criterion_8_figure_reproduction() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let first = figure_checksums(&dir.path().join("a"));
    let second = figure_checksums(&dir.path().join("b"));
    let deterministic = !first.is_empty() && first == second;

    let mut layout_ok = true;
    for preset in FigurePreset::ALL {
        let panels = preset.panels().unwrap();
        let expected: Vec<(f64, f64)> = match preset {
            FigurePreset::PolynomialSmoothness => [1.0, 3.0].iter().flat_map(|&a| [(a, 1e4); 5]).collect(),
            FigurePreset::ExponentialSmoothness => [1.0, 5.0].iter().flat_map(|&a| [(a, 1e4); 5]).collect(),
            _ => [1e4, 1e8]
                .iter()
                .flat_map(|&n| [0.5, 1.0, 2.0, 5.0, 10.0].map(|a| (a, n)))
                .collect(),
        };
        let actual: Vec<(f64, f64)> = panels.iter().map(|p| (p.prior.alpha(), p.n)).collect();
        layout_ok &= panels.len() == 10 && actual == expected;
    }

    let panels: Vec<_> = FigurePreset::PolynomialSampleSize
        .panels()
        .unwrap()
        .into_iter()
        .filter(|p| p.n == 1e8 && (p.prior.alpha() == 1.0 || p.prior.alpha() == 5.0))
        .collect();
    let data = emit_figure_data(&FigureConfig::new(8), &panels).unwrap();
    let fraction = |alpha: f64| {
        let v: Vec<f64> = data
            .iter()
            .filter(|d| d.spec.prior.alpha() == alpha)
            .map(|d| d.coverage_fraction())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (f1, f5) = (fraction(1.0), fraction(5.0));
    let passed = deterministic && layout_ok && f1 > f5 && started.elapsed().as_secs_f64() < 600.0;
    report(
        8,
        "figure data reproduction",
        passed,
        started,
        &format!(
            "{} files identical across runs: {deterministic}; layouts ok: {layout_ok}; band coverage at n = 1e8 a=1 {f1:.3} vs a=5 {f5:.3}",
            first.len()
        ),
    );
    assert!(passed);
}
