use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::toeplitz::ToeplitzKernel;
use super::{ClusterGeometry, SceneGrid};
use crate::error::{check_len, Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Matrix-free tomographic forward operator of one cluster.
///
/// Row `k = m * W + w` (frequency-major within each APC) and column `n` hold
///
/// ```text
/// A[k, n] = exp(+j * 4 pi f_w cos(phi) / c * (x_n cos(theta_m) + y_n sin(theta_m))) * Theta[n]
/// ```
///
/// `apply` and `adjoint` evaluate this as an exact direct nonuniform DFT in
/// `O(W M N)`; the exponent separates over the grid axes so no
/// transcendental is evaluated per call. This is the place to swap in a
/// NuFFT for large scenes. The Gram product `A^H A` goes through an exact
/// Toeplitz embedding instead (see [`ForwardOperator::normal`]).
///
/// The operator is immutable and `Sync`; every call allocates its output.
#[derive(Debug, Clone)]
pub struct ForwardOperator {
    grid: SceneGrid,
    geometry: ClusterGeometry,
    phase: Vec<Complex64>,
    factors: Arc<Factors>,
}

#[derive(Debug)]
struct Factors {
    /// `ex[k * nx + ix] = exp(j kx_k x_ix)`
    ex: Vec<Complex64>,
    /// `ey[k * ny + iy] = exp(j ky_k y_iy)`
    ey: Vec<Complex64>,
    gram: ToeplitzKernel,
}

/// Builds the operator for `geometry` on `grid` with an all-ones phase matrix.
pub fn make_operator(grid: &SceneGrid, geometry: &ClusterGeometry) -> Result<ForwardOperator> {
    ForwardOperator::new(grid.clone(), geometry.clone())
}

impl ForwardOperator {
    pub fn new(grid: SceneGrid, geometry: ClusterGeometry) -> Result<Self> {
        // re-validate; the fields are public and may have been edited
        let geometry = ClusterGeometry::new(
            geometry.cluster_id,
            geometry.azimuth_angles,
            geometry.elevation,
            geometry.frequencies,
        )?;
        let grid = SceneGrid::new(grid.nx, grid.ny, grid.extent_x, grid.extent_y)
            .map(|g| g.with_plane_height(grid.plane_height))?;

        let wavenumbers = wavenumbers(&geometry);
        let (nx, ny) = (grid.nx, grid.ny);
        let mut ex = Vec::with_capacity(wavenumbers.len() * nx);
        let mut ey = Vec::with_capacity(wavenumbers.len() * ny);
        for &(kx, ky) in &wavenumbers {
            ex.extend((0..nx).map(|ix| Complex64::from_polar(1.0, kx * grid.x_coord(ix))));
            ey.extend((0..ny).map(|iy| Complex64::from_polar(1.0, ky * grid.y_coord(iy))));
        }
        let (dx, dy) = grid.pixel_size();
        let gram = ToeplitzKernel::new(nx, ny, dx, dy, &wavenumbers);

        Ok(Self {
            phase: vec![Complex64::new(1.0, 0.0); grid.len()],
            grid,
            geometry,
            factors: Arc::new(Factors { ex, ey, gram }),
        })
    }

    /// Returns a copy of this operator with `phase` as the diagonal of the
    /// phase matrix. Every entry must have unit modulus.
    pub fn with_phase_matrix(&self, phase: Vec<Complex64>) -> Result<Self> {
        check_len("phase matrix", self.image_len(), phase.len())?;
        if let Some((i, p)) = phase
            .iter()
            .enumerate()
            .find(|(_, p)| !((p.norm() - 1.0).abs() <= UNIT_MODULUS_TOL))
        {
            return Err(Error::InvalidConfig(format!(
                "phase matrix entry {i} has modulus {} (must be 1)",
                p.norm()
            )));
        }
        Ok(Self {
            grid: self.grid.clone(),
            geometry: self.geometry.clone(),
            phase,
            factors: Arc::clone(&self.factors),
        })
    }

    pub fn grid(&self) -> &SceneGrid {
        &self.grid
    }

    pub fn geometry(&self) -> &ClusterGeometry {
        &self.geometry
    }

    pub fn phase_matrix(&self) -> &[Complex64] {
        &self.phase
    }

    /// `N`
    pub fn image_len(&self) -> usize {
        self.grid.len()
    }

    /// `W * M`
    pub fn measurement_len(&self) -> usize {
        self.geometry.measurement_len()
    }

    /// `y = A x`.
    pub fn apply(&self, image: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("image", self.image_len(), image.len())?;
        let u: Vec<Complex64> = image.iter().zip(&self.phase).map(|(x, t)| x * t).collect();
        Ok(self.raw_apply(&u))
    }

    /// `A^H y`, the back-projection of `data`.
    pub fn adjoint(&self, data: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("measurements", self.measurement_len(), data.len())?;
        let mut out = self.raw_adjoint(data);
        for (o, t) in out.iter_mut().zip(&self.phase) {
            *o *= t.conj();
        }
        Ok(out)
    }

    /// `A^H A v`, evaluated by Toeplitz embedding in `O(N log N)`.
    pub fn normal(&self, image: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("image", self.image_len(), image.len())?;
        let u: Vec<Complex64> = image.iter().zip(&self.phase).map(|(x, t)| x * t).collect();
        let mut out = self.factors.gram.apply(&u);
        for (o, t) in out.iter_mut().zip(&self.phase) {
            *o *= t.conj();
        }
        Ok(out)
    }

    /// Convenience for real (magnitude) images.
    pub fn apply_real(&self, image: &[f64]) -> Result<Vec<Complex64>> {
        let c: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply(&c)
    }

    /// Phase matrix estimated from the back-projection of `measurements`:
    /// `exp(j angle(B^H y))` with `B` the operator without phase matrix.
    /// Pixels where the back-projection is exactly zero get phase 0.
    pub fn estimate_phase_matrix(&self, measurements: &[Complex64]) -> Result<Vec<Complex64>> {
        check_len("measurements", self.measurement_len(), measurements.len())?;
        Ok(self
            .raw_adjoint(measurements)
            .into_iter()
            .map(|z| {
                if z == Complex64::new(0.0, 0.0) {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, z.arg())
                }
            })
            .collect())
    }

    fn raw_apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let Factors { ex, ey, .. } = &*self.factors;
        (0..self.measurement_len())
            .map(|k| {
                let exk = &ex[k * nx..(k + 1) * nx];
                let eyk = &ey[k * ny..(k + 1) * ny];
                let mut acc = Complex64::new(0.0, 0.0);
                for (iy, row) in u.chunks_exact(nx).enumerate() {
                    let s = exk
                        .iter()
                        .zip(row)
                        .fold(Complex64::new(0.0, 0.0), |s, (e, v)| s + e * v);
                    acc += eyk[iy] * s;
                }
                acc
            })
            .collect()
    }

    fn raw_adjoint(&self, data: &[Complex64]) -> Vec<Complex64> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let Factors { ex, ey, .. } = &*self.factors;
        let mut out = vec![Complex64::new(0.0, 0.0); nx * ny];
        for (k, &d) in data.iter().enumerate() {
            if d == Complex64::new(0.0, 0.0) {
                continue;
            }
            let exk = &ex[k * nx..(k + 1) * nx];
            let eyk = &ey[k * ny..(k + 1) * ny];
            for (iy, row) in out.chunks_exact_mut(nx).enumerate() {
                let t = d * eyk[iy].conj();
                for (o, e) in row.iter_mut().zip(exk) {
                    *o += t * e.conj();
                }
            }
        }
        out
    }
}

/// `(kx, ky)` for every measurement row, in frequency-major order.
fn wavenumbers(geometry: &ClusterGeometry) -> Vec<(f64, f64)> {
    let cos_el = geometry.elevation.cos();
    let mut out = Vec::with_capacity(geometry.measurement_len());
    for &theta in &geometry.azimuth_angles {
        let (s, c) = theta.sin_cos();
        for &f in &geometry.frequencies {
            let scale = 4.0 * PI * f * cos_el / SPEED_OF_LIGHT;
            out.push((scale * c, scale * s));
        }
    }
    out
}

/// Conventional back-projection image `(1/Q) sum_q |A_q^H y_q|`.
pub fn backprojection_image(
    operators: &[ForwardOperator],
    measurements: &[Vec<Complex64>],
) -> Result<Vec<f64>> {
    let first = operators.first().ok_or(Error::Empty("operator list"))?;
    check_len("measurement list", operators.len(), measurements.len())?;
    let n = first.image_len();
    let mut acc = vec![0.0; n];
    for (op, y) in operators.iter().zip(measurements) {
        check_len("operator image length", n, op.image_len())?;
        for (a, v) in acc.iter_mut().zip(op.adjoint(y)?) {
            *a += v.norm();
        }
    }
    let q = operators.len() as f64;
    for a in &mut acc {
        *a /= q;
    }
    Ok(acc)
}
