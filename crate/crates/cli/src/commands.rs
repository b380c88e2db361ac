//! Subcommand implementations, independent of argument parsing.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use radmm_core::metrics::{encode_csv, encode_pgm};
use radmm_core::solvers::ProxBudget;
use radmm_core::{
    backprojection_image, composite_baseline, image_entropy, make_operator, normalized_sparsity,
    read_image_csv, run, support_f1, ForwardOperator, Method, ReconstructionResult, SceneGrid,
    Termination,
};

use crate::bundle::{create_dir, read_support, write_file, write_scenario_bundle, ScenarioBundle};
use crate::config::{ExperimentConfig, MetricsSection, OutputFormat, SolverSection};
use crate::error::{CliError, CliResult};

/// Reconstruction methods exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReconMethod {
    Cadmm,
    Sadmm,
    /// Back-projection baseline.
    Bp,
    /// Per-cluster sparse reconstruction fused by pixel-wise maximum.
    Composite,
}

impl ReconMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ReconMethod::Cadmm => "cadmm",
            ReconMethod::Sadmm => "sadmm",
            ReconMethod::Bp => "bp",
            ReconMethod::Composite => "composite",
        }
    }

    fn admm(self) -> Option<Method> {
        match self {
            ReconMethod::Cadmm => Some(Method::Cadmm),
            ReconMethod::Sadmm => Some(Method::Sadmm),
            _ => None,
        }
    }
}

impl fmt::Display for ReconMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReconMethod {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "cadmm" => Ok(ReconMethod::Cadmm),
            "sadmm" => Ok(ReconMethod::Sadmm),
            "bp" => Ok(ReconMethod::Bp),
            "composite" => Ok(ReconMethod::Composite),
            other => Err(CliError::Config(format!("unknown method `{other}`"))),
        }
    }
}

/// Command-line overrides of the solver section.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub beta: Option<f64>,
    /// `lambda / mu`
    pub ratio: Option<f64>,
    pub max_iters: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, solver: &mut SolverSection) {
        if let Some(b) = self.beta {
            solver.beta = b;
        }
        if let Some(r) = self.ratio {
            solver.lambda = r * solver.mu;
        }
        if let Some(m) = self.max_iters {
            solver.max_outer_iters = m;
        }
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `simulate`: writes a scenario bundle; `seed` replaces the scene seed.
pub fn simulate(config_path: &Path, out: &Path, seed: Option<u64>) -> CliResult<String> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.scene.seed = s;
    }
    let scenario = write_scenario_bundle(&cfg, out)?;
    Ok(format!(
        "wrote scenario bundle to {} ({} clusters, {} scatterers, seed {})\n",
        out.display(),
        scenario.clusters.len(),
        scenario.scatterers.len(),
        cfg.scene.seed
    ))
}

/// Raw operators of a bundle, one per cluster.
pub fn raw_operators(cfg: &ExperimentConfig) -> CliResult<(SceneGrid, Vec<ForwardOperator>)> {
    let grid = cfg.grid()?;
    let ops = cfg
        .clusters()?
        .iter()
        .map(|c| make_operator(&grid, c))
        .collect::<radmm_core::Result<_>>()?;
    Ok((grid, ops))
}

/// Operators with their phase matrices estimated from the measurements.
pub fn phased_operators(
    raw: &[ForwardOperator],
    measurements: &[Vec<radmm_core::Complex64>],
) -> CliResult<Vec<ForwardOperator>> {
    raw.iter()
        .zip(measurements)
        .map(|(op, y)| Ok(op.with_phase_matrix(op.estimate_phase_matrix(y)?)?))
        .collect()
}

/// An image plus, for the iterative engines, the full run record.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub method: ReconMethod,
    pub image: Vec<f64>,
    pub run: Option<ReconstructionResult>,
}

/// Runs `method` on a loaded bundle with the given solver settings.
pub fn reconstruct_image(
    bundle: &ScenarioBundle,
    method: ReconMethod,
    solver: &SolverSection,
) -> CliResult<Reconstruction> {
    let (_, raw) = raw_operators(&bundle.config)?;
    let ys = &bundle.measurements;
    if method == ReconMethod::Bp {
        return Ok(Reconstruction {
            method,
            image: backprojection_image(&raw, ys)?,
            run: None,
        });
    }
    let ops = phased_operators(&raw, ys)?;
    if let Some(m) = method.admm() {
        let cfg = solver.solver_config(m)?;
        let result = run(m, &ops, ys, &cfg)?;
        return Ok(Reconstruction {
            method,
            image: result.state.global_image.clone(),
            run: Some(result),
        });
    }
    let budget = ProxBudget {
        max_iters: solver.prox_max_iters,
        tol: solver.prox_tol,
    };
    Ok(Reconstruction {
        method,
        image: composite_baseline(&ops, ys, solver.composite_lambda, budget)?,
        run: None,
    })
}

/// Key/value metric lines shared by `reconstruct` and `metrics`.
pub fn metric_lines(
    image: &[f64],
    grid: &SceneGrid,
    metrics: &MetricsSection,
    truth: Option<&[usize]>,
) -> CliResult<String> {
    let entropy = image_entropy(image, &metrics.entropy_config()?)?;
    let sparsity = normalized_sparsity(image, metrics.rel_threshold);
    let mut out = String::new();
    let _ = writeln!(out, "pixels: {}", image.len());
    let _ = writeln!(out, "sparsity: {sparsity}");
    let _ = writeln!(out, "entropy_bits: {entropy}");
    if let Some(t) = truth {
        let s = support_f1(image, grid, t, metrics.f1_threshold, metrics.match_radius_px)?;
        let _ = writeln!(out, "detections: {}", s.detections);
        let _ = writeln!(out, "matched: {}", s.matched);
        let _ = writeln!(out, "precision: {}", s.precision);
        let _ = writeln!(out, "recall: {}", s.recall);
        let _ = writeln!(out, "f1: {}", s.f1);
    }
    Ok(out)
}

/// `iter,primal_res,dual_res,eps_pri,eps_dual,objective`
pub fn convergence_csv(result: &ReconstructionResult) -> String {
    let mut out = String::from("iter,primal_res,dual_res,eps_pri,eps_dual,objective\n");
    for r in &result.state.residual_log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.primal_norm),
            fmt_f64(r.dual_norm),
            fmt_f64(r.eps_pri),
            fmt_f64(r.eps_dual),
            fmt_f64(r.objective)
        );
    }
    out
}

/// `iter,wall_ms`; kept apart from the convergence log so that the latter
/// is byte-reproducible.
pub fn timing_csv(result: &ReconstructionResult) -> String {
    let mut out = String::from("iter,wall_ms\n");
    for r in &result.state.residual_log {
        let _ = writeln!(out, "{},{:.3}", r.iter, r.wall_ms);
    }
    out
}

/// Loads a bundle and applies an optional replacement config for the
/// solver, metrics and output sections plus command-line overrides.
fn effective_config(
    bundle: &ScenarioBundle,
    config_override: Option<&Path>,
    overrides: &Overrides,
) -> CliResult<ExperimentConfig> {
    let mut cfg = bundle.config.clone();
    if let Some(path) = config_override {
        let o = ExperimentConfig::load(path)?;
        cfg.solver = o.solver;
        cfg.metrics = o.metrics;
        cfg.output = o.output;
    }
    overrides.apply(&mut cfg.solver);
    cfg.validate()?;
    Ok(cfg)
}

/// `reconstruct`: writes image files, logs, metrics and a manifest to `out`.
pub fn reconstruct(
    bundle_dir: &Path,
    method: ReconMethod,
    config_override: Option<&Path>,
    overrides: &Overrides,
    out: &Path,
) -> CliResult<String> {
    let mut bundle = ScenarioBundle::load(bundle_dir)?;
    bundle.config = effective_config(&bundle, config_override, overrides)?;
    let cfg = &bundle.config;
    let grid = cfg.grid()?;
    let rec = reconstruct_image(&bundle, method, &cfg.solver)?;

    create_dir(out)?;
    let entropy_cfg = cfg.metrics.entropy_config()?;
    for format in &cfg.output.formats {
        match format {
            OutputFormat::Csv => {
                write_file(&out.join("image.csv"), encode_csv(&rec.image, grid.nx, grid.ny)?)?
            }
            OutputFormat::Pgm => write_file(
                &out.join("image.pgm"),
                encode_pgm(&rec.image, grid.nx, grid.ny, &entropy_cfg)?,
            )?,
        }
    }

    let mut metrics = format!("method: {method}\n");
    let termination = match &rec.run {
        Some(result) => {
            write_file(&out.join("convergence.csv"), convergence_csv(result))?;
            write_file(&out.join("timing.csv"), timing_csv(result))?;
            let _ = writeln!(metrics, "iterations: {}", result.iterations());
            let _ = writeln!(metrics, "termination: {}", result.termination.as_str());
            format!(
                "termination: {}\niterations: {}\n",
                result.termination.as_str(),
                result.iterations()
            )
        }
        None => "termination: not_iterative\niterations: 0\n".to_string(),
    };
    write_file(&out.join("termination.txt"), &termination)?;
    metrics.push_str(&metric_lines(
        &rec.image,
        &grid,
        &cfg.metrics,
        bundle.truth_support.as_deref(),
    )?);
    write_file(&out.join("metrics.txt"), &metrics)?;

    let mut manifest = format!(
        "tool: radmm {}\nkind: reconstruction\nmethod: {method}\nseed: {}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.scene.seed
    );
    let _ = writeln!(manifest, "bundle: {}", bundle_dir.display());
    write_file(&out.join("manifest.txt"), manifest)?;
    write_file(&out.join("config.toml"), cfg.to_toml())?;
    Ok(metrics)
}

/// One row of a hyperparameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub ratio: f64,
    pub lambda: f64,
    pub sparsity: f64,
    pub entropy: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Lowest-entropy row whose sparsity lies inside the configured window.
    pub selected: Option<usize>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "beta,ratio,lambda,sparsity,entropy_bits,iterations,termination,wall_ms\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.3}",
                r.beta,
                r.ratio,
                r.lambda,
                r.sparsity,
                r.entropy,
                r.iterations,
                r.termination.as_str(),
                r.wall_ms
            );
        }
        out
    }

    pub fn selection_text(&self) -> String {
        match self.selected {
            Some(i) => {
                let r = &self.rows[i];
                format!(
                    "selected: beta={} ratio={} lambda={} sparsity={} entropy_bits={}\n",
                    r.beta, r.ratio, r.lambda, r.sparsity, r.entropy
                )
            }
            None => "selected: none (no row inside the sparsity window)\n".to_string(),
        }
    }
}

/// Runs every `(beta, ratio)` pair at the config's `mu`.
pub fn sweep_bundle(
    bundle: &ScenarioBundle,
    method: ReconMethod,
    betas: &[f64],
    ratios: &[f64],
) -> CliResult<SweepReport> {
    if method.admm().is_none() {
        return Err(CliError::Config(format!(
            "sweep needs an iterative method (cadmm or sadmm), got {method}"
        )));
    }
    if betas.is_empty() || ratios.is_empty() {
        return Err(CliError::Config("sweep needs non-empty --beta and --ratio lists".into()));
    }
    let cfg = &bundle.config;
    let entropy_cfg = cfg.metrics.entropy_config()?;
    let mut rows = Vec::with_capacity(betas.len() * ratios.len());
    for &beta in betas {
        for &ratio in ratios {
            let mut solver = cfg.solver.clone();
            Overrides {
                beta: Some(beta),
                ratio: Some(ratio),
                max_iters: None,
            }
            .apply(&mut solver);
            let started = Instant::now();
            let rec = reconstruct_image(bundle, method, &solver)?;
            let result = rec.run.expect("iterative method returns a run record");
            rows.push(SweepRow {
                beta,
                ratio,
                lambda: solver.lambda,
                sparsity: normalized_sparsity(&rec.image, cfg.metrics.rel_threshold),
                entropy: image_entropy(&rec.image, &entropy_cfg)?,
                iterations: result.iterations(),
                termination: result.termination,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    let [lo, hi] = cfg.metrics.sparsity_window;
    let selected = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| (lo..=hi).contains(&r.sparsity))
        .min_by(|(_, a), (_, b)| a.entropy.total_cmp(&b.entropy))
        .map(|(i, _)| i);
    Ok(SweepReport { rows, selected })
}

/// `sweep`: writes `sweep.csv` and `selected.txt` to `out`.
pub fn sweep(
    bundle_dir: &Path,
    method: ReconMethod,
    config_override: Option<&Path>,
    betas: &[f64],
    ratios: &[f64],
    max_iters: Option<usize>,
    out: &Path,
) -> CliResult<String> {
    let mut bundle = ScenarioBundle::load(bundle_dir)?;
    let overrides = Overrides {
        max_iters,
        ..Overrides::default()
    };
    bundle.config = effective_config(&bundle, config_override, &overrides)?;
    let report = sweep_bundle(&bundle, method, betas, ratios)?;
    create_dir(out)?;
    let csv = report.to_csv();
    write_file(&out.join("sweep.csv"), &csv)?;
    write_file(&out.join("selected.txt"), report.selection_text())?;
    Ok(format!("{csv}{}", report.selection_text()))
}

/// `metrics`: key/value report for an image CSV.
pub fn metrics(
    image_path: &Path,
    config: Option<&Path>,
    truth: Option<&Path>,
) -> CliResult<String> {
    let metrics_cfg = match config {
        Some(p) => ExperimentConfig::load(p)?.metrics,
        None => MetricsSection::default(),
    };
    let (image, nx, ny) = read_image_csv(image_path)?;
    let grid = SceneGrid::new(nx, ny, nx as f64, ny as f64)?;
    let support = truth.map(read_support).transpose()?;
    metric_lines(&image, &grid, &metrics_cfg, support.as_deref())
}
