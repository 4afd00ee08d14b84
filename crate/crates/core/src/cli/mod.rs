//! The `heatbayes` command line.
//!
//! Every subcommand writes its datasets into the output directory together
//! with a `manifest.json` that lists them with SHA-256 checksums. Exit codes:
//! 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.

pub mod config;
pub mod dataset;
pub mod plot;

use std::ffi::OsString;
use std::time::SystemTime;

use clap::{Parser, Subcommand};

use crate::asymptotics::lemma_suite;
use crate::coverage::{
    emit_figure_data, prior_draw, run_ball_coverage, run_band_coverage, run_interval_coverage,
    run_risk_curve, ExperimentConfig, ExperimentReport, FigureConfig, FigurePreset, FunctionalSpec,
    PanelData, PanelSpec,
};
use crate::credible::credible_radius;
use crate::error::{Error, Result};
use crate::posterior::{ConjugateWeights, RiskDecomposition};
use crate::prior::{prior_variances, scale_is_informative, PriorSpec, ScalingTarget};
use crate::rng::{Purpose, StreamKey};
use crate::sequence::{
    default_truncation, heat_eigenvalues, simulate_observations_keyed, CoefficientSequence,
    SineBasisGrid,
};

use self::config::{CommonArgs, Settings};
use self::dataset::{sha256_hex, Cell, OutputDir, Table};

#[derive(Parser, Debug)]
#[command(name = "heatbayes", version, about = "Bayesian recovery of the initial condition of the heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate observations Y_i = κ_i μ_i + n^{-1/2} Z_i
    Simulate(CommonArgs),
    /// Posterior coefficients, the posterior mean function and the risk decomposition
    Posterior(CommonArgs),
    /// Pointwise credible bands with posterior draws, one panel per n
    Bands(CommonArgs),
    /// Credible ball, interval and band coverage experiments
    Coverage {
        #[command(flatten)]
        common: CommonArgs,
        /// Experiments to run: ball, interval, band
        #[arg(long, value_delimiter = ',', default_value = "ball,interval")]
        experiment: Vec<String>,
    },
    /// Posterior risk along the n grid
    Risk(CommonArgs),
    /// Numerical checks of the series asymptotics
    Lemmas(CommonArgs),
    /// Panel datasets and plots of the four figure layouts
    Figures {
        #[command(flatten)]
        common: CommonArgs,
        /// Figure number 1 to 4; all four when absent
        #[arg(long)]
        figure: Option<u32>,
    },
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit status.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("heatbayes: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command) -> Result<()> {
    let started = SystemTime::now();
    let (settings, mut out) = match &command {
        Command::Simulate(c)
        | Command::Posterior(c)
        | Command::Bands(c)
        | Command::Risk(c)
        | Command::Lemmas(c) => prepare(c)?,
        Command::Coverage { common, .. } | Command::Figures { common, .. } => prepare(common)?,
    };
    let name = match &command {
        Command::Simulate(_) => "simulate",
        Command::Posterior(_) => "posterior",
        Command::Bands(_) => "bands",
        Command::Coverage { .. } => "coverage",
        Command::Risk(_) => "risk",
        Command::Lemmas(_) => "lemmas",
        Command::Figures { .. } => "figures",
    };
    match &command {
        Command::Simulate(_) => simulate(&settings, &mut out)?,
        Command::Posterior(_) => posterior(&settings, &mut out)?,
        Command::Bands(_) => bands(&settings, &mut out)?,
        Command::Coverage { experiment, .. } => coverage(&settings, experiment, &mut out)?,
        Command::Risk(_) => risk(&settings, &mut out)?,
        Command::Lemmas(_) => lemmas(&settings, &mut out)?,
        Command::Figures { figure, .. } => figures(&settings, *figure, &mut out)?,
    }
    let digest = config_digest(name, &settings)?;
    let manifest = out.finish(name, digest, settings.seed, started)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn prepare(args: &CommonArgs) -> Result<(Settings, OutputDir)> {
    let settings = Settings::resolve(args)?;
    for &n in &settings.n_grid {
        if !scale_is_informative(&settings.prior, n) {
            eprintln!(
                "heatbayes: warning: n tau^2 = {:e} <= 1 at n = {n:e}; the data barely move the prior",
                n * settings.prior.tau() * settings.prior.tau()
            );
        }
    }
    let out = OutputDir::new(settings.out.clone());
    Ok((settings, out))
}

fn config_digest(command: &str, settings: &Settings) -> Result<String> {
    let json = serde_json::to_vec(&(command, settings))
        .map_err(|e| Error::NonFinite(format!("settings encoding: {e}")))?;
    Ok(sha256_hex(&json))
}

/// One realization per noise level: prior at `n`, truth, observations.
struct Realization {
    n: f64,
    prior: PriorSpec,
    kappa: CoefficientSequence,
    mu0: CoefficientSequence,
    y: CoefficientSequence,
}

fn realizations(s: &Settings, target: ScalingTarget) -> Result<Vec<Realization>> {
    let truth = s.truth_source();
    s.n_grid
        .iter()
        .enumerate()
        .map(|(block, &n)| {
            let prior = s.scaling.resolve(&s.prior, n, target)?;
            let len = s
                .trunc
                .unwrap_or_else(|| default_truncation(n, prior.tau(), s.time_horizon));
            let kappa = heat_eigenvalues(s.time_horizon, len)?;
            let mu0 = match truth.fixed_coefficients(len)? {
                Some(mu) => mu,
                None => prior_draw(
                    &prior_variances(&prior, len)?,
                    StreamKey::replication(s.seed, Purpose::PriorDraw, block as u32, 0),
                ),
            };
            let obs = simulate_observations_keyed(
                &mu0,
                &kappa,
                n,
                StreamKey::replication(s.seed, Purpose::Observation, block as u32, 0),
            )?;
            Ok(Realization {
                n,
                prior,
                kappa,
                mu0,
                y: obs.y,
            })
        })
        .collect()
}

fn simulate(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let mut table = Table::new(["n", "i", "kappa", "mu0", "y"]);
    for r in realizations(s, ScalingTarget::Full)? {
        for i in 1..=r.kappa.truncation_level() {
            table.push(vec![r.n.into(), i.into(), r.kappa.get(i).into(), r.mu0.get(i).into(), r.y.get(i).into()]);
        }
        println!("n = {:e}: {} coefficients", r.n, r.kappa.truncation_level());
    }
    out.write_table("observations.csv", &table)?;
    Ok(())
}

fn posterior(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let grid = s.x_grid()?;
    let mut coeffs = Table::new(["n", "i", "y", "mean", "variance", "shrink_var"]);
    let mut curves = Table::new(["n", "x", "truth", "post_mean"]);
    let mut summary = Table::new([
        "n", "tau", "truncation", "sq_bias", "estimator_variance", "posterior_spread",
        "posterior_risk", "credible_radius", "credible_radius_se",
    ]);
    for r in realizations(s, ScalingTarget::Full)? {
        let w = ConjugateWeights::from_prior(&r.prior, &r.kappa, r.n)?;
        let mean = w.posterior_mean(r.y.values())?;
        for i in 0..mean.len() {
            coeffs.push(vec![
                r.n.into(),
                (i + 1).into(),
                r.y.values()[i].into(),
                mean[i].into(),
                w.spread()[i].into(),
                w.shrink()[i].into(),
            ]);
        }
        let basis = SineBasisGrid::new(&grid, mean.len())?;
        let truth = basis.synthesize(r.mu0.values())?;
        let post = basis.synthesize(&mean)?;
        for (j, &x) in grid.iter().enumerate() {
            curves.push(vec![r.n.into(), x.into(), truth[j].into(), post[j].into()]);
        }
        let risk = RiskDecomposition::from_weights(&w, &r.mu0)?;
        let (radius, radius_se) = credible_radius(w.spread(), s.gamma, s.mc_draws, s.seed)?;
        summary.push(vec![
            r.n.into(),
            r.prior.tau().into(),
            mean.len().into(),
            risk.sq_bias.into(),
            risk.estimator_variance.into(),
            risk.posterior_spread.into(),
            risk.posterior_risk().into(),
            radius.into(),
            radius_se.into(),
        ]);
        println!(
            "n = {:e}: sq_bias {:.6e}  variance {:.6e}  spread {:.6e}  radius {:.6e}",
            r.n, risk.sq_bias, risk.estimator_variance, risk.posterior_spread, radius
        );
    }
    out.write_table("posterior_coefficients.csv", &coeffs)?;
    out.write_table("posterior_function.csv", &curves)?;
    out.write_table("posterior_summary.csv", &summary)?;
    Ok(())
}

fn figure_config(s: &Settings) -> Result<FigureConfig> {
    let mut cfg = FigureConfig::new(s.seed);
    cfg.gamma = s.gamma;
    cfg.grid = s.x_grid()?;
    cfg.draws = s.draws;
    cfg.time_horizon = s.time_horizon;
    cfg.truth = s.truth_source();
    cfg.truncation = s.trunc;
    if cfg.truth.is_random() {
        return Err(Error::config("truth", "bands and figures need a fixed truth"));
    }
    Ok(cfg)
}

/// Columns `x, truth, post_mean, lower, upper, draw_01, ...`.
pub fn panel_table(p: &PanelData) -> Table {
    let mut header: Vec<String> = ["x", "truth", "post_mean", "lower", "upper"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=p.draws.len()).map(|d| format!("draw_{d:02}")));
    let mut t = Table::new(header);
    for j in 0..p.x.len() {
        let mut row: Vec<Cell> = vec![
            p.x[j].into(),
            p.truth[j].into(),
            p.post_mean[j].into(),
            p.lower[j].into(),
            p.upper[j].into(),
        ];
        row.extend(p.draws.iter().map(|d| Cell::Float(d[j])));
        t.push(row);
    }
    t
}

fn bands(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let cfg = figure_config(s)?;
    let specs = s
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            Ok(PanelSpec {
                prior: s.scaling.resolve(&s.prior, n, ScalingTarget::Functional)?,
                n,
                stream: k as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let panels = emit_figure_data(&cfg, &specs)?;
    for (k, p) in panels.iter().enumerate() {
        let name = if panels.len() == 1 {
            "bands.csv".to_string()
        } else {
            format!("bands_{:02}.csv", k + 1)
        };
        out.write_table(&name, &panel_table(p))?;
        println!(
            "{}: truncation {}, band covers the truth at {:.3} of the grid",
            p.label(),
            p.truncation,
            p.coverage_fraction()
        );
    }
    out.write("bands.svg", plot::render_panels(&panels, 1)?.as_bytes())?;
    Ok(())
}

/// One row per experiment and noise level.
pub fn report_table(reports: &[ExperimentReport]) -> Table {
    let mut t = Table::new([
        "experiment", "prior", "n", "tau", "truncation", "replications", "ball_coverage",
        "ball_coverage_se", "credible_radius", "frequentist_radius", "radius_ratio", "risk_exact",
        "risk_mc", "risk_mc_se", "interval_coverage", "interval_coverage_se", "band_coverage",
        "band_coverage_se",
    ]);
    for rep in reports {
        for r in &rep.rows {
            t.push(vec![
                rep.experiment.as_str().into(),
                rep.prior.as_str().into(),
                r.n.into(),
                r.tau.into(),
                r.truncation.into(),
                r.replications.into(),
                r.ball_coverage.into(),
                r.ball_coverage_se.into(),
                r.credible_radius.into(),
                r.frequentist_radius.into(),
                r.radius_ratio.into(),
                r.risk_exact.into(),
                r.risk_mc.into(),
                r.risk_mc_se.into(),
                r.interval_coverage.into(),
                r.interval_coverage_se.into(),
                r.band_coverage.into(),
                r.band_coverage_se.into(),
            ]);
        }
    }
    t
}

fn experiment_config(s: &Settings) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(s.prior, s.n_grid.clone());
    cfg.scaling = s.scaling;
    cfg.gamma = s.gamma;
    cfg.replications = s.reps;
    cfg.truth = s.truth_source();
    cfg.seed = s.seed;
    cfg.time_horizon = s.time_horizon;
    cfg.truncation = s.trunc;
    cfg.mc_draws = s.mc_draws;
    cfg
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

fn coverage(s: &Settings, experiments: &[String], out: &mut OutputDir) -> Result<()> {
    let cfg = experiment_config(s);
    let mut reports = Vec::new();
    for e in experiments {
        let report = match e.as_str() {
            "ball" => run_ball_coverage(&cfg)?,
            "interval" => run_interval_coverage(&cfg, &FunctionalSpec::PointEvaluation(s.x))?,
            "band" => run_band_coverage(&cfg, &s.x_grid()?)?,
            other => {
                return Err(Error::config(
                    "experiment",
                    format!("unknown experiment `{other}` (expected ball, interval or band)"),
                ))
            }
        };
        for r in &report.rows {
            let (cov, se) = match e.as_str() {
                "ball" => (r.ball_coverage, r.ball_coverage_se),
                "interval" => (r.interval_coverage, r.interval_coverage_se),
                _ => (r.band_coverage, r.band_coverage_se),
            };
            println!(
                "{e:<8} {} n = {:e}: coverage {} (se {}) radius ratio {}",
                report.prior,
                r.n,
                fmt_opt(cov),
                fmt_opt(se),
                fmt_opt(r.radius_ratio)
            );
        }
        reports.push(report);
    }
    out.write_table("coverage.csv", &report_table(&reports))?;
    Ok(())
}

fn risk(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let report = run_risk_curve(&experiment_config(s))?;
    for r in &report.rows {
        println!(
            "{} n = {:e}: risk {} (Monte Carlo {} se {})",
            report.prior,
            r.n,
            fmt_opt(r.risk_exact),
            fmt_opt(r.risk_mc),
            fmt_opt(r.risk_mc_se)
        );
    }
    out.write_table("risk.csv", &report_table(&[report]))?;
    Ok(())
}

fn lemmas(s: &Settings, out: &mut OutputDir) -> Result<()> {
    let entries = lemma_suite(&s.n_grid_for_lemmas()?)?;
    let mut t = Table::new(["check", "label", "criterion", "passed", "N", "exact", "predicted", "ratio"]);
    println!("band and monotonicity criteria are finite-grid surrogates for asymptotic statements");
    println!("{:<18} {:<40} {:>10} {:>14} {:>14} {:>12}", "check", "label", "N", "exact", "predicted", "ratio");
    for e in &entries {
        for p in &e.trace.points {
            println!(
                "{:<18} {:<40} {:>10.3e} {:>14.6e} {:>14.6e} {:>12.6}",
                e.name, e.trace.label, p.n, p.exact, p.predicted, p.ratio
            );
            t.push(vec![
                e.name.as_str().into(),
                e.trace.label.as_str().into(),
                e.criterion.as_str().into(),
                Cell::Text(e.passed.to_string()),
                p.n.into(),
                p.exact.into(),
                p.predicted.into(),
                p.ratio.into(),
            ]);
        }
        println!("  -> {}: {}", if e.passed { "PASS" } else { "FAIL" }, e.criterion);
    }
    out.write_table("lemmas.csv", &t)?;
    Ok(())
}

fn figures(s: &Settings, figure: Option<u32>, out: &mut OutputDir) -> Result<()> {
    let presets = match figure {
        Some(k) => vec![FigurePreset::from_number(k)?],
        None => FigurePreset::ALL.to_vec(),
    };
    let cfg = figure_config(s)?;
    for preset in presets {
        let k = preset.number();
        let panels = emit_figure_data(&cfg, &preset.panels()?)?;
        let mut summary = Table::new(["panel", "family", "alpha", "n", "truncation", "coverage_fraction"]);
        for (j, p) in panels.iter().enumerate() {
            out.write_table(&format!("figure{k}_panel{:02}.csv", j + 1), &panel_table(p))?;
            summary.push(vec![
                (j + 1).into(),
                p.spec.prior.family().to_string().into(),
                p.spec.prior.alpha().into(),
                p.spec.n.into(),
                p.truncation.into(),
                p.coverage_fraction().into(),
            ]);
            println!(
                "figure {k} panel {:2}: {} truncation {} coverage fraction {:.3}",
                j + 1,
                p.label(),
                p.truncation,
                p.coverage_fraction()
            );
        }
        out.write_table(&format!("figure{k}_summary.csv"), &summary)?;
        out.write(&format!("figure{k}.svg"), plot::render_panels(&panels, 2)?.as_bytes())?;
    }
    Ok(())
}
