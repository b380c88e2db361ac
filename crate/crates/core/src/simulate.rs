//! Seeded synthetic scenes with aspect-dependent scattering and noisy
//! phase-history measurements.
//!
//! Random streams: every draw comes from `ChaCha20Rng::seed_from_u64(seed)`
//! with an explicit stream id. Stream `0` generates random scenes, stream
//! `q + 1` generates the noise of cluster `q`. Adding clusters therefore
//! never changes the noise of existing ones.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{angle_difference, make_operator, ClusterGeometry, ForwardOperator, SceneGrid};

const SCENE_STREAM: u64 = 0;

/// Point scatterer with a binary angular visibility window.
#[derive(Debug, Clone, PartialEq)]
pub struct Scatterer {
    pub x: f64,
    pub y: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility_center: f64,
    /// Full width of the visibility window, in `(0, 2pi]`.
    pub visibility_width: f64,
}

impl Scatterer {
    /// An isotropic scatterer (visible from every azimuth).
    pub fn isotropic(x: f64, y: f64, amplitude: f64, phase: f64) -> Self {
        Self {
            x,
            y,
            amplitude,
            phase,
            visibility_center: 0.0,
            visibility_width: TAU,
        }
    }

    pub fn visible_from(&self, azimuth: f64) -> bool {
        angle_difference(azimuth, self.visibility_center).abs() <= 0.5 * self.visibility_width
    }

    fn validate(&self, grid: &SceneGrid) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "scatterer amplitude must be nonnegative, got {}",
                self.amplitude
            )));
        }
        if !(self.visibility_width > 0.0 && self.visibility_width <= TAU) {
            return Err(Error::InvalidScenario(format!(
                "visibility width must lie in (0, 2pi], got {}",
                self.visibility_width
            )));
        }
        if !(self.phase.is_finite() && self.visibility_center.is_finite()) {
            return Err(Error::InvalidScenario("non-finite scatterer angle".into()));
        }
        if !grid.contains(self.x, self.y) {
            return Err(Error::InvalidScenario(format!(
                "scatterer at ({}, {}) lies outside the grid",
                self.x, self.y
            )));
        }
        Ok(())
    }
}

/// Recipe for a random sparse scene placed on pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomScene {
    pub count: usize,
    pub amplitude: f64,
    /// Minimum Chebyshev distance between scatterers, in pixels.
    pub min_separation_px: usize,
    /// Pixels kept free along every border.
    pub margin_px: usize,
    pub visibility_width: f64,
}

impl RandomScene {
    /// Draws the scatterers from stream 0 of `seed`. Positions are rejection
    /// sampled; phases and visibility centers are uniform on `[0, 2pi)`.
    pub fn generate(&self, grid: &SceneGrid, seed: u64) -> Result<Vec<Scatterer>> {
        let mut rng = stream(seed, SCENE_STREAM);
        let (m, sep) = (self.margin_px, self.min_separation_px);
        if 2 * m >= grid.nx || 2 * m >= grid.ny {
            return Err(Error::InvalidScenario(format!(
                "margin of {m} px leaves no room on a {}x{} grid",
                grid.nx, grid.ny
            )));
        }
        let mut placed: Vec<(usize, usize)> = Vec::with_capacity(self.count);
        let mut out = Vec::with_capacity(self.count);
        let max_attempts = 10_000 * self.count.max(1);
        let mut attempts = 0;
        while out.len() < self.count {
            attempts += 1;
            if attempts > max_attempts {
                return Err(Error::InvalidScenario(format!(
                    "could not place {} scatterers with {sep} px separation",
                    self.count
                )));
            }
            let ix = rng.gen_range(m..grid.nx - m);
            let iy = rng.gen_range(m..grid.ny - m);
            let phase = rng.gen_range(0.0..TAU);
            let center = rng.gen_range(0.0..TAU);
            if placed
                .iter()
                .any(|&(px, py)| px.abs_diff(ix).max(py.abs_diff(iy)) < sep.max(1))
            {
                continue;
            }
            placed.push((ix, iy));
            out.push(Scatterer {
                x: grid.x_coord(ix),
                y: grid.y_coord(iy),
                amplitude: self.amplitude,
                phase,
                visibility_center: center,
                visibility_width: self.visibility_width,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct SimScenario {
    pub grid: SceneGrid,
    pub clusters: Vec<ClusterGeometry>,
    pub scatterers: Vec<Scatterer>,
    /// Per-cluster SNR in dB; `f64::INFINITY` means noiseless.
    pub snr_db: f64,
    pub seed: u64,
}

/// Measurements of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseHistory {
    pub cluster_id: usize,
    pub samples: Vec<Complex64>,
    /// `||A_q x_q||`
    pub signal_norm: f64,
    /// `||n_q||`
    pub noise_norm: f64,
}

impl PhaseHistory {
    /// Realized `10 log10(||A x||^2 / ||n||^2)`.
    pub fn realized_snr_db(&self) -> f64 {
        if self.noise_norm == 0.0 {
            f64::INFINITY
        } else {
            20.0 * (self.signal_norm / self.noise_norm).log10()
        }
    }
}

impl SimScenario {
    pub fn new(
        grid: SceneGrid,
        clusters: Vec<ClusterGeometry>,
        scatterers: Vec<Scatterer>,
        snr_db: f64,
        seed: u64,
    ) -> Result<Self> {
        let s = Self {
            grid,
            clusters,
            scatterers,
            snr_db,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::Empty("cluster list"));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidScenario(format!(
                "snr_db must be finite or +inf, got {}",
                self.snr_db
            )));
        }
        self.scatterers
            .iter()
            .try_for_each(|s| s.validate(&self.grid))
    }

    /// The complex reflectivity seen by cluster `q`: each visible scatterer
    /// deposited on its nearest pixel.
    pub fn rasterize_scene(&self, q: usize) -> Result<Vec<Complex64>> {
        let cluster = self.clusters.get(q).ok_or(Error::ClusterOutOfRange {
            index: q,
            count: self.clusters.len(),
        })?;
        let azimuth = cluster.center_azimuth();
        let mut image = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        for s in self.scatterers.iter().filter(|s| s.visible_from(azimuth)) {
            let n = self
                .grid
                .nearest_pixel(s.x, s.y)
                .ok_or_else(|| Error::InvalidScenario("scatterer outside grid".into()))?;
            image[n] += Complex64::from_polar(s.amplitude, s.phase);
        }
        Ok(image)
    }

    /// Pixels holding at least one scatterer (union over all clusters).
    pub fn truth_support(&self) -> Vec<usize> {
        let mut support: Vec<usize> = self
            .scatterers
            .iter()
            .filter(|s| s.amplitude > 0.0)
            .filter_map(|s| self.grid.nearest_pixel(s.x, s.y))
            .collect();
        support.sort_unstable();
        support.dedup();
        support
    }

    pub fn operators(&self) -> Result<Vec<ForwardOperator>> {
        self.clusters
            .iter()
            .map(|c| make_operator(&self.grid, c))
            .collect()
    }

    pub fn synthesize_measurements(&self) -> Result<Vec<PhaseHistory>> {
        self.synthesize_with(&self.operators()?)
    }

    /// Same as [`Self::synthesize_measurements`] with prebuilt raw operators
    /// (one per cluster, in cluster order).
    ///
    /// Noise is scaled per realization so that every cluster meets `snr_db`
    /// exactly. A cluster that sees no scatterer gets noise at the mean
    /// signal energy of the clusters that do.
    pub fn synthesize_with(&self, operators: &[ForwardOperator]) -> Result<Vec<PhaseHistory>> {
        self.validate()?;
        if operators.len() != self.clusters.len() {
            return Err(Error::DimensionMismatch {
                what: "operator list",
                expected: self.clusters.len(),
                got: operators.len(),
            });
        }
        let clean: Vec<Vec<Complex64>> = operators
            .iter()
            .enumerate()
            .map(|(q, op)| op.apply(&self.rasterize_scene(q)?))
            .collect::<Result<_>>()?;
        let energies: Vec<f64> = clean.iter().map(|y| energy(y)).collect();

        let noiseless = self.snr_db == f64::INFINITY;
        let lit: Vec<f64> = energies.iter().copied().filter(|e| *e > 0.0).collect();
        if !noiseless && lit.is_empty() {
            return Err(Error::ZeroSceneEnergy);
        }
        let fallback = lit.iter().sum::<f64>() / lit.len().max(1) as f64;

        clean
            .into_iter()
            .zip(energies)
            .enumerate()
            .map(|(q, (mut y, e))| {
                let mut noise_norm = 0.0;
                if !noiseless {
                    let reference = if e > 0.0 { e } else { fallback };
                    let target = (reference / 10f64.powf(self.snr_db / 10.0)).sqrt();
                    let noise = white_noise(self.seed, q, y.len());
                    let raw = energy(&noise).sqrt();
                    let scale = target / raw;
                    for (v, n) in y.iter_mut().zip(&noise) {
                        *v += n * scale;
                    }
                    noise_norm = target;
                }
                Ok(PhaseHistory {
                    cluster_id: self.clusters[q].cluster_id,
                    samples: y,
                    signal_norm: e.sqrt(),
                    noise_norm,
                })
            })
            .collect()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Circularly-symmetric complex white Gaussian samples for cluster `q`.
fn white_noise(seed: u64, q: usize, len: usize) -> Vec<Complex64> {
    let mut rng = stream(seed, q as u64 + 1);
    (0..len)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

fn energy(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `q_count` clusters with centers uniformly spaced on `[0, 2pi)`.
///
/// APC azimuths are cell-centered within each cluster's width (spacing
/// `width / M`) so that clusters tiling the full circle never share an
/// angle. Frequencies are cell-centered over `freq_center +- bandwidth/2`
/// with spacing `bandwidth / W`.
#[allow(clippy::too_many_arguments)]
pub fn make_uniform_clusters(
    q_count: usize,
    cluster_width: f64,
    apcs_per_cluster: usize,
    elevation: f64,
    freq_center: f64,
    bandwidth: f64,
    freq_count: usize,
) -> Result<Vec<ClusterGeometry>> {
    if q_count == 0 || apcs_per_cluster == 0 || freq_count == 0 {
        return Err(Error::InvalidGeometry(
            "cluster, APC and frequency counts must be positive".into(),
        ));
    }
    if !(cluster_width > 0.0 && bandwidth > 0.0 && freq_center > 0.0) {
        return Err(Error::InvalidGeometry(
            "cluster width, bandwidth and center frequency must be positive".into(),
        ));
    }
    if q_count as f64 * cluster_width > TAU * (1.0 + 1e-9) {
        return Err(Error::InvalidGeometry(format!(
            "{q_count} clusters of {cluster_width} rad overlap (total exceeds 2pi)"
        )));
    }
    let apc_step = cluster_width / apcs_per_cluster as f64;
    let freq_step = bandwidth / freq_count as f64;
    let frequencies: Vec<f64> = (0..freq_count)
        .map(|w| freq_center + (w as f64 - 0.5 * (freq_count as f64 - 1.0)) * freq_step)
        .collect();
    (0..q_count)
        .map(|q| {
            let center = TAU * q as f64 / q_count as f64;
            let angles = (0..apcs_per_cluster)
                .map(|m| center + (m as f64 - 0.5 * (apcs_per_cluster as f64 - 1.0)) * apc_step)
                .collect();
            ClusterGeometry::new(q, angles, elevation, frequencies.clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> SceneGrid {
        SceneGrid::new(8, 8, 4.0, 4.0).unwrap()
    }

    fn clusters(q: usize, width_deg: f64) -> Vec<ClusterGeometry> {
        make_uniform_clusters(q, width_deg.to_radians(), 3, 0.5, 9.6e9, 300e6, 4).unwrap()
    }

    #[test]
    fn uniform_cluster_centers() {
        let c = clusters(4, 1.0);
        for (q, g) in c.iter().enumerate() {
            let expect = (90.0 * q as f64).to_radians();
            assert!((g.center_azimuth() - expect).abs() < 1e-12);
            assert_eq!(g.cluster_id, q);
        }
        let spread = c[0].azimuth_angles[2] - c[0].azimuth_angles[0];
        assert!((spread - (2.0f64 / 3.0).to_radians()).abs() < 1e-12);
        let f = &c[0].frequencies;
        assert!((f[0] - (9.6e9 - 112.5e6)).abs() < 1e-3);
        assert!((f[3] - (9.6e9 + 112.5e6)).abs() < 1e-3);
    }

    #[test]
    fn full_circle_tiling_is_accepted_and_overlap_rejected() {
        let c = make_uniform_clusters(72, 5f64.to_radians(), 4, 0.5, 9.6e9, 600e6, 8).unwrap();
        assert_eq!(c.len(), 72);
        let gap = c[1].azimuth_angles[0] - c[0].azimuth_angles[3];
        assert!((gap - 1.25f64.to_radians()).abs() < 1e-12);
        assert!(make_uniform_clusters(73, 5f64.to_radians(), 4, 0.5, 9.6e9, 600e6, 8).is_err());
        assert!(make_uniform_clusters(0, 0.1, 4, 0.5, 9.6e9, 600e6, 8).is_err());
    }

    #[test]
    fn limited_view_coverage() {
        let c = make_uniform_clusters(16, 1f64.to_radians(), 8, 0.5, 9.6e9, 600e6, 32).unwrap();
        let covered = c.len() as f64 * 1f64.to_radians() / TAU;
        assert!((covered - 0.0444).abs() < 1e-3);
    }

    #[test]
    fn empty_scene_rasterizes_to_zero() {
        let s = SimScenario::new(grid(), clusters(2, 1.0), vec![], 15.0, 1).unwrap();
        assert!(s.rasterize_scene(0).unwrap().iter().all(|v| v.norm() == 0.0));
        assert!(matches!(
            s.rasterize_scene(2),
            Err(Error::ClusterOutOfRange { .. })
        ));
    }

    #[test]
    fn direct_deposit_on_pixel_center() {
        let g = grid();
        let (x, y) = g.pixel_coords(19);
        let s = SimScenario::new(
            g,
            clusters(2, 1.0),
            vec![Scatterer::isotropic(x, y, 2.0, std::f64::consts::FRAC_PI_2)],
            15.0,
            1,
        )
        .unwrap();
        let img = s.rasterize_scene(0).unwrap();
        for (i, v) in img.iter().enumerate() {
            if i == 19 {
                assert!((v - Complex64::new(0.0, 2.0)).norm() < 1e-15);
            } else {
                assert_eq!(v.norm(), 0.0);
            }
        }
        assert_eq!(s.truth_support(), vec![19]);
    }

    #[test]
    fn visibility_window_hides_scatterer() {
        let cs = clusters(4, 1.0);
        let center = cs[0].center_azimuth();
        let scat = Scatterer {
            visibility_center: center,
            visibility_width: 1f64.to_radians(),
            ..Scatterer::isotropic(0.25, 0.25, 1.0, 0.0)
        };
        let s = SimScenario::new(grid(), cs, vec![scat], 15.0, 1).unwrap();
        assert!(s.rasterize_scene(0).unwrap().iter().any(|v| v.norm() > 0.0));
        for q in 1..4 {
            assert!(s.rasterize_scene(q).unwrap().iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn isotropic_scatterer_is_seen_identically_by_all() {
        let s = SimScenario::new(
            grid(),
            clusters(5, 2.0),
            vec![Scatterer::isotropic(-1.25, 0.75, 1.5, 0.3)],
            15.0,
            1,
        )
        .unwrap();
        let first = s.rasterize_scene(0).unwrap();
        for q in 1..5 {
            assert_eq!(s.rasterize_scene(q).unwrap(), first);
        }
    }

    #[test]
    fn invalid_scatterers_are_rejected() {
        let bad = [
            Scatterer::isotropic(10.0, 0.0, 1.0, 0.0),
            Scatterer::isotropic(0.0, 0.0, -1.0, 0.0),
            Scatterer {
                visibility_width: 0.0,
                ..Scatterer::isotropic(0.0, 0.0, 1.0, 0.0)
            },
        ];
        for s in bad {
            assert!(SimScenario::new(grid(), clusters(2, 1.0), vec![s], 15.0, 1).is_err());
        }
        assert!(SimScenario::new(grid(), vec![], vec![], 15.0, 1).is_err());
        assert!(SimScenario::new(grid(), clusters(2, 1.0), vec![], f64::NAN, 1).is_err());
    }

    #[test]
    fn noiseless_measurements_are_exact() {
        let s = SimScenario::new(
            grid(),
            clusters(3, 1.0),
            vec![Scatterer::isotropic(0.25, -0.75, 1.0, 0.4)],
            f64::INFINITY,
            9,
        )
        .unwrap();
        let ops = s.operators().unwrap();
        let ph = s.synthesize_with(&ops).unwrap();
        for (q, (p, op)) in ph.iter().zip(&ops).enumerate() {
            assert_eq!(p.samples, op.apply(&s.rasterize_scene(q).unwrap()).unwrap());
            assert_eq!(p.noise_norm, 0.0);
            assert_eq!(p.realized_snr_db(), f64::INFINITY);
        }
    }

    #[test]
    fn realized_snr_matches_request() {
        let s = SimScenario::new(
            grid(),
            clusters(3, 1.0),
            vec![
                Scatterer::isotropic(0.25, -0.75, 1.0, 0.4),
                Scatterer::isotropic(-1.25, 1.25, 0.5, 2.0),
            ],
            15.0,
            9,
        )
        .unwrap();
        let ops = s.operators().unwrap();
        for (q, p) in s.synthesize_with(&ops).unwrap().iter().enumerate() {
            let clean = ops[q].apply(&s.rasterize_scene(q).unwrap()).unwrap();
            let noise: f64 = p
                .samples
                .iter()
                .zip(&clean)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let snr = 20.0 * (energy(&clean).sqrt() / noise).log10();
            assert!((snr - 15.0).abs() < 1e-9, "cluster {q}: {snr}");
            assert!((p.realized_snr_db() - 15.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_energy_scene_with_finite_snr_fails() {
        let s = SimScenario::new(grid(), clusters(2, 1.0), vec![], 15.0, 1).unwrap();
        assert!(matches!(
            s.synthesize_measurements(),
            Err(Error::ZeroSceneEnergy)
        ));
        let s = SimScenario::new(grid(), clusters(2, 1.0), vec![], f64::INFINITY, 1).unwrap();
        assert!(s.synthesize_measurements().is_ok());
    }

    #[test]
    fn dark_cluster_gets_reference_noise() {
        let cs = clusters(4, 1.0);
        let scat = Scatterer {
            visibility_center: cs[0].center_azimuth(),
            visibility_width: 0.1,
            ..Scatterer::isotropic(0.25, 0.25, 1.0, 0.0)
        };
        let s = SimScenario::new(grid(), cs, vec![scat], 10.0, 4).unwrap();
        let ph = s.synthesize_measurements().unwrap();
        assert!((ph[0].realized_snr_db() - 10.0).abs() < 1e-9);
        assert_eq!(ph[1].signal_norm, 0.0);
        assert!((ph[1].noise_norm - ph[0].noise_norm).abs() < 1e-12);
    }

    #[test]
    fn same_seed_is_bit_identical_and_streams_are_independent() {
        let scat = vec![Scatterer::isotropic(0.25, -0.75, 1.0, 0.4)];
        let a = SimScenario::new(grid(), clusters(3, 1.0), scat.clone(), 15.0, 5).unwrap();
        let b = SimScenario::new(grid(), clusters(3, 1.0), scat.clone(), 15.0, 5).unwrap();
        assert_eq!(
            a.synthesize_measurements().unwrap(),
            b.synthesize_measurements().unwrap()
        );
        let c = SimScenario::new(grid(), clusters(3, 1.0), scat, 15.0, 6).unwrap();
        assert_ne!(
            a.synthesize_measurements().unwrap(),
            c.synthesize_measurements().unwrap()
        );
        // adding clusters leaves earlier noise untouched
        assert_eq!(white_noise(5, 1, 16), white_noise(5, 1, 16));
        assert_ne!(white_noise(5, 1, 16), white_noise(5, 2, 16));
    }

    #[test]
    fn random_scene_respects_separation_and_margin() {
        let g = SceneGrid::new(64, 64, 7.0, 7.0).unwrap();
        let recipe = RandomScene {
            count: 10,
            amplitude: 1.0,
            min_separation_px: 4,
            margin_px: 6,
            visibility_width: TAU,
        };
        let s = recipe.generate(&g, 11).unwrap();
        assert_eq!(s, recipe.generate(&g, 11).unwrap());
        let pix: Vec<(usize, usize)> = s
            .iter()
            .map(|sc| g.position(g.nearest_pixel(sc.x, sc.y).unwrap()))
            .collect();
        for (i, a) in pix.iter().enumerate() {
            assert!(a.0 >= 6 && a.0 < 58 && a.1 >= 6 && a.1 < 58);
            for b in &pix[i + 1..] {
                assert!(a.0.abs_diff(b.0).max(a.1.abs_diff(b.1)) >= 4);
            }
        }
        let crowded = RandomScene {
            count: 1000,
            ..recipe
        };
        assert!(crowded.generate(&g, 1).is_err());
    }
}
