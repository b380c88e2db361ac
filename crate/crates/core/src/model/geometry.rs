use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};

/// Sensing geometry of one cluster of antenna phase centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGeometry {
    pub cluster_id: usize,
    /// Azimuth of each APC in radians.
    pub azimuth_angles: Vec<f64>,
    /// Common elevation of the cluster in radians, `0 <= elevation < pi/2`.
    pub elevation: f64,
    /// Fast-time frequency samples in Hz, strictly increasing.
    pub frequencies: Vec<f64>,
}

impl ClusterGeometry {
    pub fn new(
        cluster_id: usize,
        azimuth_angles: Vec<f64>,
        elevation: f64,
        frequencies: Vec<f64>,
    ) -> Result<Self> {
        if azimuth_angles.is_empty() {
            return Err(Error::InvalidGeometry("azimuth angle list is empty".into()));
        }
        if frequencies.is_empty() {
            return Err(Error::InvalidGeometry("frequency list is empty".into()));
        }
        if azimuth_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidGeometry("non-finite azimuth angle".into()));
        }
        if !(elevation.is_finite() && (0.0..FRAC_PI_2).contains(&elevation)) {
            return Err(Error::InvalidGeometry(format!(
                "elevation must lie in [0, pi/2), got {elevation}"
            )));
        }
        if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::InvalidGeometry(
                "frequencies must be positive and finite".into(),
            ));
        }
        if frequencies.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGeometry(
                "frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            cluster_id,
            azimuth_angles,
            elevation,
            frequencies,
        })
    }

    /// Number of APCs `M`.
    pub fn apc_count(&self) -> usize {
        self.azimuth_angles.len()
    }

    /// Number of frequency samples `W`.
    pub fn freq_count(&self) -> usize {
        self.frequencies.len()
    }

    /// Length `W * M` of the cluster's measurement vector.
    pub fn measurement_len(&self) -> usize {
        self.apc_count() * self.freq_count()
    }

    /// Circular mean of the APC azimuths, in `[0, 2pi)`.
    pub fn center_azimuth(&self) -> f64 {
        let (s, c) = self
            .azimuth_angles
            .iter()
            .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
        wrap_angle(s.atan2(c))
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Signed angular difference `a - b` wrapped into `(-pi, pi]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > PI {
        d - TAU
    } else {
        d
    }
}
