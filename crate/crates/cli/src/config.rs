//! Experiment configuration (TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use radmm_core::{
    make_uniform_clusters, ClusterGeometry, EntropyConfig, Method, RandomScene, Scatterer,
    SceneGrid, SimScenario, SolverConfig,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneSection,
    pub sensing: SensingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    pub nx: usize,
    pub ny: usize,
    /// Scene extent along x, meters.
    pub extent_x: f64,
    /// Scene extent along y, meters.
    pub extent_y: f64,
    #[serde(default)]
    pub plane_height: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scatterers: Vec<ScattererSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSection {
    pub count: usize,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "default_separation")]
    pub min_separation_px: usize,
    #[serde(default = "default_margin")]
    pub margin_px: usize,
    #[serde(default = "full_circle_deg")]
    pub visibility_width_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererSection {
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub phase_deg: f64,
    #[serde(default)]
    pub visibility_center_deg: f64,
    #[serde(default = "full_circle_deg")]
    pub visibility_width_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSection {
    pub q_count: usize,
    pub cluster_width_deg: f64,
    pub apcs_per_cluster: usize,
    pub freq_center_hz: f64,
    pub bandwidth_hz: f64,
    pub freq_count: usize,
    pub elevation_deg: f64,
    /// Per-cluster SNR in dB; `inf` for noiseless data.
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mu: f64,
    pub lambda: f64,
    pub beta: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_outer_iters: usize,
    pub cg_max_iters: usize,
    pub cg_tol: f64,
    pub prox_max_iters: usize,
    pub prox_tol: f64,
    pub warm_start: bool,
    /// Regularization weight of the composite baseline.
    pub composite_lambda: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            mu: d.mu,
            lambda: d.lambda,
            beta: d.beta,
            eps_abs: d.eps_abs,
            eps_rel: d.eps_rel,
            max_outer_iters: d.max_outer_iters,
            cg_max_iters: d.cg_max_iters,
            cg_tol: d.cg_tol,
            prox_max_iters: d.prox_max_iters,
            prox_tol: d.prox_tol,
            warm_start: d.warm_start,
            composite_lambda: 2.0 * d.lambda / d.mu,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self, method: Method) -> CliResult<SolverConfig> {
        let cfg = SolverConfig {
            mu: self.mu,
            lambda: self.lambda,
            beta: self.beta,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            max_outer_iters: self.max_outer_iters,
            cg_max_iters: self.cg_max_iters,
            cg_tol: self.cg_tol,
            prox_max_iters: self.prox_max_iters,
            prox_tol: self.prox_tol,
            method,
            warm_start: self.warm_start,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub dynamic_range_db: f64,
    pub gray_levels: usize,
    /// Relative threshold for normalized sparsity.
    pub rel_threshold: f64,
    /// Relative detection threshold for support F1.
    pub f1_threshold: f64,
    pub match_radius_px: usize,
    /// Accepted sparsity range `[lo, hi]` when a sweep picks its best row.
    pub sparsity_window: [f64; 2],
}

impl Default for MetricsSection {
    fn default() -> Self {
        let e = EntropyConfig::default();
        Self {
            dynamic_range_db: e.dynamic_range_db,
            gray_levels: e.gray_levels,
            rel_threshold: 1e-3,
            f1_threshold: 0.1,
            match_radius_px: 1,
            sparsity_window: [0.0, 1.0],
        }
    }
}

impl MetricsSection {
    pub fn entropy_config(&self) -> CliResult<EntropyConfig> {
        let cfg = EntropyConfig {
            dynamic_range_db: self.dynamic_range_db,
            gray_levels: self.gray_levels,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Pgm,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![OutputFormat::Pgm, OutputFormat::Csv],
        }
    }
}

fn one() -> f64 {
    1.0
}

fn full_circle_deg() -> f64 {
    360.0
}

fn default_separation() -> usize {
    3
}

fn default_margin() -> usize {
    2
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
            .map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
                other => other,
            })
    }

    /// Canonical TOML rendering, used as the config echo in bundles.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.scene.random.is_some() && !self.scene.scatterers.is_empty() {
            return Err(CliError::Config(
                "scene: give either [scene.random] or [[scene.scatterers]], not both".into(),
            ));
        }
        let [lo, hi] = self.metrics.sparsity_window;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(CliError::Config(format!(
                "metrics.sparsity_window must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]"
            )));
        }
        if !(0.0..1.0).contains(&self.metrics.rel_threshold)
            || !(0.0..1.0).contains(&self.metrics.f1_threshold)
        {
            return Err(CliError::Config(
                "metrics thresholds must lie in [0, 1)".into(),
            ));
        }
        if !(self.solver.composite_lambda >= 0.0 && self.solver.composite_lambda.is_finite()) {
            return Err(CliError::Config(
                "solver.composite_lambda must be nonnegative".into(),
            ));
        }
        self.metrics.entropy_config()?;
        self.solver.solver_config(Method::Cadmm)?;
        self.grid()?;
        self.clusters()?;
        Ok(())
    }

    pub fn grid(&self) -> CliResult<SceneGrid> {
        let s = &self.scene;
        Ok(SceneGrid::new(s.nx, s.ny, s.extent_x, s.extent_y)?.with_plane_height(s.plane_height))
    }

    pub fn clusters(&self) -> CliResult<Vec<ClusterGeometry>> {
        let s = &self.sensing;
        Ok(make_uniform_clusters(
            s.q_count,
            s.cluster_width_deg.to_radians(),
            s.apcs_per_cluster,
            s.elevation_deg.to_radians(),
            s.freq_center_hz,
            s.bandwidth_hz,
            s.freq_count,
        )?)
    }

    pub fn scatterers(&self, grid: &SceneGrid) -> CliResult<Vec<Scatterer>> {
        if let Some(r) = &self.scene.random {
            let recipe = RandomScene {
                count: r.count,
                amplitude: r.amplitude,
                min_separation_px: r.min_separation_px,
                margin_px: r.margin_px,
                visibility_width: r.visibility_width_deg.to_radians(),
            };
            return Ok(recipe.generate(grid, self.scene.seed)?);
        }
        Ok(self
            .scene
            .scatterers
            .iter()
            .map(|s| Scatterer {
                x: s.x,
                y: s.y,
                amplitude: s.amplitude,
                phase: s.phase_deg.to_radians(),
                visibility_center: s.visibility_center_deg.to_radians(),
                visibility_width: s.visibility_width_deg.to_radians(),
            })
            .collect())
    }

    pub fn scenario(&self) -> CliResult<SimScenario> {
        let grid = self.grid()?;
        let scatterers = self.scatterers(&grid)?;
        Ok(SimScenario::new(
            grid,
            self.clusters()?,
            scatterers,
            self.sensing.snr_db,
            self.scene.seed,
        )?)
    }
}
