//! On-disk scenario bundles and reconstruction outputs.
//!
//! A scenario bundle holds:
//!
//! - `config.toml`: canonical echo of the experiment config;
//! - `manifest.txt`: tool version, seed and per-cluster realized SNR;
//! - `truth_q###.csv`: nonzero reflectivity seen by each cluster
//!   (`index,real,imag`);
//! - `truth_support.csv`: occupied pixels (`index,ix,iy`);
//! - `measurements_q###.csv`: phase history samples (`index,real,imag`).
//!
//! Floats are written with 17 significant digits, so bundles are lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use radmm_core::{Complex64, PhaseHistory, SimScenario};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUPPORT_FILE: &str = "truth_support.csv";

pub fn measurement_file(q: usize) -> String {
    format!("measurements_q{q:03}.csv")
}

pub fn truth_file(q: usize) -> String {
    format!("truth_q{q:03}.csv")
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// `index,real,imag` rows for the given samples.
pub fn complex_csv<'a>(rows: impl Iterator<Item = (usize, &'a Complex64)>) -> String {
    let mut out = String::from("index,real,imag\n");
    for (i, z) in rows {
        let _ = writeln!(out, "{i},{:.16e},{:.16e}", z.re, z.im);
    }
    out
}

/// Parses `index,real,imag` rows into a dense vector of length `len`.
pub fn parse_complex_csv(path: &Path, text: &str, len: usize) -> CliResult<Vec<Complex64>> {
    let bad = |line: usize, msg: String| CliError::Io {
        path: path.to_path_buf(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "index,real,imag")) => {}
        _ => return Err(bad(1, "expected header `index,real,imag`".into())),
    }
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let mut seen = vec![false; len];
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(bad(no + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let index: usize = fields[0]
            .parse()
            .map_err(|e| bad(no + 1, format!("index: {e}")))?;
        let re: f64 = fields[1].parse().map_err(|e| bad(no + 1, format!("real: {e}")))?;
        let im: f64 = fields[2].parse().map_err(|e| bad(no + 1, format!("imag: {e}")))?;
        if index >= len {
            return Err(bad(no + 1, format!("index {index} out of range 0..{len}")));
        }
        if std::mem::replace(&mut seen[index], true) {
            return Err(bad(no + 1, format!("duplicate index {index}")));
        }
        out[index] = Complex64::new(re, im);
    }
    Ok(out)
}

fn manifest(cfg: &ExperimentConfig, data: &[PhaseHistory]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tool: radmm {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "kind: scenario");
    let _ = writeln!(out, "seed: {}", cfg.scene.seed);
    let _ = writeln!(out, "clusters: {}", data.len());
    let _ = writeln!(out, "grid: {}x{}", cfg.scene.nx, cfg.scene.ny);
    let _ = writeln!(out, "snr_db_target: {}", cfg.sensing.snr_db);
    for d in data {
        let _ = writeln!(
            out,
            "cluster {:03}: realized_snr_db={:.6} signal_norm={:.16e} noise_norm={:.16e}",
            d.cluster_id,
            d.realized_snr_db(),
            d.signal_norm,
            d.noise_norm
        );
    }
    out
}

/// Simulates `cfg` and writes the scenario bundle into `dir`.
pub fn write_scenario_bundle(cfg: &ExperimentConfig, dir: &Path) -> CliResult<SimScenario> {
    let scenario = cfg.scenario()?;
    let data = scenario.synthesize_measurements()?;
    create_dir(dir)?;
    write_file(&dir.join(CONFIG_FILE), cfg.to_toml())?;
    write_file(&dir.join(MANIFEST_FILE), manifest(cfg, &data))?;
    for (q, d) in data.iter().enumerate() {
        let truth = scenario.rasterize_scene(q)?;
        let nonzero = truth.iter().enumerate().filter(|(_, z)| z.norm_sqr() > 0.0);
        write_file(&dir.join(truth_file(q)), complex_csv(nonzero))?;
        write_file(
            &dir.join(measurement_file(q)),
            complex_csv(d.samples.iter().enumerate()),
        )?;
    }
    let mut support = String::from("index,ix,iy\n");
    for i in scenario.truth_support() {
        let (ix, iy) = scenario.grid.position(i);
        let _ = writeln!(support, "{i},{ix},{iy}");
    }
    write_file(&dir.join(SUPPORT_FILE), support)?;
    Ok(scenario)
}

/// A loaded scenario bundle.
#[derive(Debug, Clone)]
pub struct ScenarioBundle {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub measurements: Vec<Vec<Complex64>>,
    /// `None` when the bundle carries no truth support file.
    pub truth_support: Option<Vec<usize>>,
}

impl ScenarioBundle {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let config = ExperimentConfig::load(&dir.join(CONFIG_FILE))?;
        let clusters = config.clusters()?;
        let measurements = clusters
            .iter()
            .enumerate()
            .map(|(q, c)| {
                let path = dir.join(measurement_file(q));
                parse_complex_csv(&path, &read_text(&path)?, c.measurement_len())
            })
            .collect::<CliResult<_>>()?;
        let support_path = dir.join(SUPPORT_FILE);
        let truth_support = if support_path.exists() {
            Some(read_support(&support_path)?)
        } else {
            None
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            measurements,
            truth_support,
        })
    }
}

/// Reads the `index` column of a truth support CSV.
pub fn read_support(path: &Path) -> CliResult<Vec<usize>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if !lines.next().is_some_and(|h| h.starts_with("index")) {
        return Err(CliError::io(path, "expected a header starting with `index`"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .next()
                .unwrap_or_default()
                .trim()
                .parse::<usize>()
                .map_err(|e| CliError::io(path, format!("bad index in `{l}`: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_csv_round_trips_exactly() {
        let v = vec![
            Complex64::new(1.0 / 3.0, -2.5e-300),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1e300, std::f64::consts::PI),
        ];
        let text = complex_csv(v.iter().enumerate());
        let back = parse_complex_csv(Path::new("x.csv"), &text, 3).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn malformed_rows_are_reported_with_line_numbers() {
        let p = Path::new("m.csv");
        let err = parse_complex_csv(p, "index,real,imag\n0,1,2\n1,x,2\n", 2).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_complex_csv(p, "index,real,imag\n5,1,2\n", 2).is_err());
        assert!(parse_complex_csv(p, "index,real,imag\n0,1,2\n0,1,2\n", 2).is_err());
        assert!(parse_complex_csv(p, "idx,re,im\n", 2).is_err());
    }
}
