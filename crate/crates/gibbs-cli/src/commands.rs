//! Implementations of the five subcommands. Every command echoes its
//! effective configuration into the output directory and writes byte-stable
//! artifacts: reruns with the same config and seed reproduce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use gibbs::calib::{SelectionRule, CalibrationReport};
use gibbs::core::Dataset;
use gibbs::oracle::{
    verify_consistency, verify_finite_approximation, verify_inequalities,
    verify_oracle_equivalence, verify_predictive_convergence, verify_stability,
};
use gibbs::predictive::{compare_models, ModelCandidate};
use gibbs::smc::{run_calibration_filter, run_full_posterior_filter, Checkpoint, ParticleSystem};
use gibbs::{Error, Result};

use crate::config::RunConfig;
use crate::svg;

pub const VERIFY_SUITES: &[&str] = &[
    "stability",
    "approximation",
    "consistency",
    "predictive",
    "inequalities",
    "oracle-equivalence",
];

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("effective-config.json"), cfg.to_json()?)?;
    Ok(())
}

fn checkpoint_path(out: &Path, index: usize) -> PathBuf {
    out.join("checkpoints").join(format!("w_{index:02}.json"))
}

/// Resolve the dataset: an explicit CSV wins, then a previously simulated
/// dataset in the output directory, then a fresh deterministic simulation.
pub fn load_or_simulate(cfg: &RunConfig) -> Result<Dataset> {
    if let Some(path) = &cfg.dataset_csv {
        return Dataset::read_csv(path);
    }
    let local = cfg.out.join("dataset.csv");
    if local.exists() {
        return Dataset::read_csv(&local);
    }
    cfg.problem.simulate(cfg.seed)
}

fn single_loss(cfg: &RunConfig, data: &Dataset) -> Result<(String, gibbs::core::LossModel)> {
    let mut losses = cfg.build_losses(data)?;
    if losses.len() != 1 {
        return Err(Error::Config(format!(
            "this command needs exactly one configured loss, got {:?}",
            cfg.losses
        )));
    }
    Ok(losses.remove(0))
}

fn parse_rule(cfg: &RunConfig) -> Result<SelectionRule> {
    SelectionRule::parse(&cfg.rule)
        .ok_or_else(|| Error::Config(format!("unknown selection rule '{}'", cfg.rule)))
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(cfg: &RunConfig, zero_noise: bool) -> Result<i32> {
    let mut cfg = cfg.clone();
    if zero_noise {
        cfg.problem = cfg.problem.without_noise();
    }
    ensure_out(&cfg)?;
    let data = cfg.problem.simulate(cfg.seed)?;
    data.write_csv(&cfg.out.join("dataset.csv"))?;
    println!("simulated {} ({})", cfg.experiment, cfg.problem.label());
    println!("  n = {}, d = {}, noise = {}", data.len(), data.dim(), cfg.problem.noise_label());
    if let Some(truth) = cfg.problem.truth()? {
        let rendered: Vec<String> = truth
            .names()
            .iter()
            .zip(truth.values())
            .map(|(name, v)| format!("{name} = {v}"))
            .collect();
        println!("  truth: {}", rendered.join(", "));
    }
    println!("  wrote {}", cfg.out.join("dataset.csv").display());
    Ok(0)
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

pub fn cmd_calibrate(cfg: &RunConfig) -> Result<i32> {
    ensure_out(cfg)?;
    let data = load_or_simulate(cfg)?;
    let dataset_path = cfg.out.join("dataset.csv");
    if cfg.dataset_csv.is_none() && !dataset_path.exists() {
        data.write_csv(&dataset_path)?;
    }
    let (loss_name, loss) = single_loss(cfg, &data)?;
    let prior = cfg.problem.build_prior()?;
    let grid = cfg.w_grid()?;
    let rule = parse_rule(cfg)?;

    let outcome =
        run_calibration_filter(&grid, &cfg.filter_config(), rule, &loss, prior.as_ref(), &data)?;

    fs::write(cfg.out.join("calibration.csv"), outcome.report.to_csv_string())?;
    fs::write(
        cfg.out.join("calibration.json"),
        serde_json::to_string_pretty(&outcome.report)?,
    )?;
    let trace = outcome
        .systems
        .last()
        .map(|ps| ps.ess_trace().to_vec())
        .unwrap_or_default();
    let mut trace_csv = String::from("step,ess\n");
    for (k, e) in trace.iter().enumerate() {
        trace_csv.push_str(&format!("{k},{e}\n"));
    }
    fs::write(cfg.out.join("ess_trace.csv"), trace_csv)?;

    fs::create_dir_all(cfg.out.join("checkpoints"))?;
    for (t, ps) in outcome.systems.iter().enumerate() {
        let ckpt = Checkpoint::from_system(ps, outcome.grid.weights()[t], &data)?;
        ckpt.save(&checkpoint_path(&cfg.out, t))?;
    }

    println!("calibrated {} with loss {loss_name} over {} grid weights", cfg.experiment, grid.len());
    print!("{}", outcome.report.to_csv_string());
    println!(
        "W* = {} (rule {}, grid index {})",
        outcome.report.selected_w,
        rule.label(),
        outcome.report.selected_index
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

fn weighted_quantile(pairs: &mut Vec<(f64, f64)>, q: f64) -> f64 {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= q * total {
            return v;
        }
    }
    pairs.last().map(|p| p.0).unwrap_or(f64::NAN)
}

fn read_calibration_report(out: &Path) -> Result<CalibrationReport> {
    let path = out.join("calibration.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: run `gibbs calibrate` first ({e})", path.display()),
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Empirical prior marginal density for plot overlays, built from prior
/// draws: a fixed-bin histogram evaluated as a step function.
fn prior_marginal(
    prior: &dyn gibbs::core::PriorModel,
    component: usize,
    seed: u64,
) -> impl Fn(f64) -> f64 {
    let mut rng = gibbs::smc::derive_rng(seed, u64::MAX, component as u64);
    let draws: Vec<f64> = (0..20_000)
        .map(|_| prior.sample(&mut rng).values()[component])
        .collect();
    let lo = draws.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = draws.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = 60usize;
    let bw = ((hi - lo) / bins as f64).max(1e-12);
    let mut mass = vec![0.0f64; bins];
    for &v in &draws {
        let k = (((v - lo) / bw) as usize).min(bins - 1);
        mass[k] += 1.0 / (draws.len() as f64 * bw);
    }
    move |x: f64| {
        if x < lo || x > hi {
            0.0
        } else {
            mass[(((x - lo) / bw) as usize).min(bins - 1)]
        }
    }
}

fn write_posterior_artifacts(
    cfg: &RunConfig,
    ps: &ParticleSystem,
    w_star: f64,
) -> Result<()> {
    let names = cfg.problem.parameter_names();
    let weights = ps.weights();

    let mut particle_csv = String::from("weight,");
    particle_csv.push_str(&names.join(","));
    particle_csv.push('\n');
    for (theta, &w) in ps.particles().iter().zip(&weights) {
        let row: Vec<String> = theta.values().iter().map(|v| format!("{v}")).collect();
        particle_csv.push_str(&format!("{w},{}\n", row.join(",")));
    }
    fs::write(cfg.out.join("posterior.csv"), particle_csv)?;

    let mut summary = String::from("component,mean,sd,q05,q95\n");
    let means = ps.weighted_mean();
    let vars = ps.weighted_variance();
    println!("full posterior at W = {w_star} ({} particles)", ps.len());
    println!("component\tmean\tsd\tq05\tq95");
    for (k, name) in names.iter().enumerate() {
        let mut pairs: Vec<(f64, f64)> = ps
            .particles()
            .iter()
            .zip(&weights)
            .map(|(theta, &w)| (theta.values()[k], w))
            .collect();
        let q05 = weighted_quantile(&mut pairs, 0.05);
        let q95 = weighted_quantile(&mut pairs, 0.95);
        let sd = vars[k].sqrt();
        summary.push_str(&format!("{name},{},{sd},{q05},{q95}\n", means[k]));
        println!("{name}\t{:.6}\t{sd:.6}\t{q05:.6}\t{q95:.6}", means[k]);
    }
    fs::write(cfg.out.join("summary.csv"), summary)?;

    if cfg.plots {
        let prior = cfg.problem.build_prior()?;
        let columns: Vec<Vec<f64>> = (0..names.len())
            .map(|k| ps.particles().iter().map(|t| t.values()[k]).collect())
            .collect();
        for (k, name) in names.iter().enumerate() {
            let density = prior_marginal(prior.as_ref(), k, cfg.seed);
            let svg_text = svg::marginal_histogram(name, &columns[k], &weights, density);
            fs::write(cfg.out.join(format!("marginal_{name}.svg")), svg_text)?;
        }
        if names.len() > 1 {
            fs::write(cfg.out.join("pairs.svg"), svg::pairs_plot(&names, &columns))?;
        }
        let (grid, lower, upper, median, mean) = credible_band(cfg, ps, &weights)?;
        if grid.len() > 1 {
            fs::write(
                cfg.out.join("band.svg"),
                svg::band_plot(
                    &format!("90% credible band at W = {w_star}"),
                    &grid,
                    &lower,
                    &upper,
                    &median,
                    &mean,
                ),
            )?;
        }
    }
    Ok(())
}

/// Pointwise weighted 5%/95% quantiles, median, and mean of the problem's
/// natural curve over the particle cloud.
pub fn credible_band(
    cfg: &RunConfig,
    ps: &ParticleSystem,
    weights: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut grid: Vec<f64> = Vec::new();
    let mut curves: Vec<Vec<f64>> = Vec::with_capacity(ps.len());
    for theta in ps.particles() {
        let (g, values) = cfg.problem.curve(theta)?;
        if grid.is_empty() {
            grid = g;
        }
        curves.push(values);
    }
    let t = grid.len();
    let mut lower = Vec::with_capacity(t);
    let mut upper = Vec::with_capacity(t);
    let mut median = Vec::with_capacity(t);
    let mut mean = Vec::with_capacity(t);
    for j in 0..t {
        let mut pairs: Vec<(f64, f64)> = curves
            .iter()
            .zip(weights)
            .map(|(c, &w)| (c[j], w))
            .collect();
        lower.push(weighted_quantile(&mut pairs, 0.05));
        median.push(weighted_quantile(&mut pairs, 0.5));
        upper.push(weighted_quantile(&mut pairs, 0.95));
        mean.push(pairs.iter().map(|&(v, w)| v * w).sum::<f64>());
    }
    Ok((grid, lower, upper, median, mean))
}

pub fn cmd_sample(cfg: &RunConfig) -> Result<i32> {
    ensure_out(cfg)?;
    let data = load_or_simulate(cfg)?;
    let (_, loss) = single_loss(cfg, &data)?;
    let prior = cfg.problem.build_prior()?;
    let report = read_calibration_report(&cfg.out)?;

    let (index, w_star) = if cfg.bayes {
        let index = report
            .entries
            .iter()
            .position(|e| e.w == 1.0)
            .ok_or_else(|| Error::Config("Bayes mode needs W = 1 in the calibration grid".into()))?;
        (index, 1.0)
    } else {
        (report.selected_index, report.selected_w)
    };

    let ckpt = Checkpoint::load(&checkpoint_path(&cfg.out, index))?;
    let ps = ckpt.restore(&data)?;
    let (full, stats) =
        run_full_posterior_filter(ps, w_star, &cfg.filter_config(), &loss, prior.as_ref(), &data)?;
    write_posterior_artifacts(cfg, &full, w_star)?;
    println!(
        "mutation acceptance rate {:.3} over {} proposals",
        stats.acceptance_rate(),
        stats.proposed
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

pub fn cmd_select(cfg: &RunConfig) -> Result<i32> {
    ensure_out(cfg)?;
    let data = load_or_simulate(cfg)?;
    let dataset_path = cfg.out.join("dataset.csv");
    if cfg.dataset_csv.is_none() && !dataset_path.exists() {
        data.write_csv(&dataset_path)?;
    }
    let losses = cfg.build_losses(&data)?;
    if losses.len() < 2 {
        return Err(Error::Config(
            "model selection needs at least two configured losses".into(),
        ));
    }
    let prior = cfg.problem.build_prior()?;
    let grid = cfg.w_grid()?;
    let rule = parse_rule(cfg)?;

    let mut candidates = Vec::with_capacity(losses.len());
    for (name, loss) in losses {
        let outcome = run_calibration_filter(
            &grid,
            &cfg.filter_config(),
            rule,
            &loss,
            prior.as_ref(),
            &data,
        )?;
        fs::write(
            cfg.out.join(format!("calibration_{name}.csv")),
            outcome.report.to_csv_string(),
        )?;
        candidates.push(ModelCandidate {
            label: name,
            loss,
            w: outcome.report.selected_w,
            system: outcome.selected_system().clone(),
        });
    }

    let report = compare_models(&candidates, &data)?;
    fs::write(cfg.out.join("predictive.csv"), report.to_csv_string())?;
    fs::write(
        cfg.out.join("predictive.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    print!("{}", report.to_table_string());
    println!("preferred loss: {} (P_CV = {})", report.best().label, report.best().p_cv);
    if !report.overlaps.is_empty() {
        for &(a, b) in &report.overlaps {
            println!(
                "note: {} and {} overlap within one joint SE",
                report.entries[a].label, report.entries[b].label
            );
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

pub fn cmd_verify(suite: &str, out: &Path, seed: u64) -> Result<i32> {
    fs::create_dir_all(out)?;
    let (passed, csv, summary): (bool, String, String) = match suite {
        "stability" => {
            let report = verify_stability(&[0.2, 0.1, 0.05, 0.025])?;
            let summary = format!(
                "rate exponent {:.4}, halving ratios {:?}",
                report.rate_exponent, report.halving_ratios
            );
            (report.passed(), report.to_csv_string(), summary)
        }
        "approximation" => {
            let report = verify_finite_approximation(&[25, 50, 100, 200, 400], 800)?;
            let last = report.rows.iter().rev().find(|r| r.source_points != 800);
            let summary = format!(
                "KL at finest non-reference mesh: {:?}",
                last.map(|r| r.kl)
            );
            (report.passed(), report.to_csv_string(), summary)
        }
        "consistency" => {
            let report = verify_consistency(&[10, 100, 1000], 0.1, seed)?;
            let summary = format!(
                "final mass outside epsilon-ball: {:?} (misspecified target {:.4})",
                report.rows.last().map(|r| r.mass_outside),
                report.misspecified_theta_star
            );
            (report.passed(), report.to_csv_string(), summary)
        }
        "predictive" => {
            let report = verify_predictive_convergence(&[10, 100, 1000], seed)?;
            let summary = format!(
                "final KL gap: {:?}, misspecified plug-in KL {:.4}",
                report.rows.last().map(|r| r.gap),
                report.misspecified_plugin_kl
            );
            (report.passed(), report.to_csv_string(), summary)
        }
        "inequalities" => {
            let report = verify_inequalities(100, seed)?;
            let csv = format!(
                "pairs,violations,worst_slack\n{},{},{}\n",
                report.pairs, report.violations, report.worst_slack
            );
            let summary = format!(
                "{} pairs, {} violations, worst slack {:.3e}",
                report.pairs, report.violations, report.worst_slack
            );
            (report.passed(), csv, summary)
        }
        "oracle-equivalence" => {
            let report = verify_oracle_equivalence(seed)?;
            let summary = format!("{} grid weights compared", report.rows.len());
            (report.passed(), report.to_csv_string(), summary)
        }
        other => {
            return Err(Error::Config(format!(
                "unknown verification suite '{other}'; expected one of {VERIFY_SUITES:?}"
            )));
        }
    };
    fs::write(out.join(format!("{suite}.csv")), csv)?;
    println!(
        "verify {suite}: {} ({summary})",
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(if passed { 0 } else { 1 })
}
