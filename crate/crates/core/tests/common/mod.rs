//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use radmm_core::model::{ClusterGeometry, SceneGrid, SPEED_OF_LIGHT};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

pub fn random_real(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Dense `WM x N` matrix built entry by entry from the imaging kernel.
pub fn dense_operator(
    grid: &SceneGrid,
    geometry: &ClusterGeometry,
    phase: Option<&[Complex64]>,
) -> DMatrix<Complex64> {
    let w = geometry.frequencies.len();
    let m = geometry.azimuth_angles.len();
    let n = grid.nx * grid.ny;
    DMatrix::from_fn(w * m, n, |row, col| {
        let (mi, wi) = (row / w, row % w);
        let f = geometry.frequencies[wi];
        let theta = geometry.azimuth_angles[mi];
        let (x, y) = grid.pixel_coords(col);
        let arg = 4.0 * PI * f * geometry.elevation.cos() / SPEED_OF_LIGHT
            * (x * theta.cos() + y * theta.sin());
        let entry = Complex64::new(arg.cos(), arg.sin());
        match phase {
            Some(p) => entry * p[col],
            None => entry,
        }
    })
}

pub fn to_dvec(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn rel_err_real(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Direct solve of `(mu A^H A + beta I) v = rhs` by dense Cholesky.
pub fn dense_normal_solve(
    a: &DMatrix<Complex64>,
    mu: f64,
    beta: f64,
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = a.ncols();
    let m = a.adjoint() * a * Complex64::new(mu, 0.0)
        + DMatrix::<Complex64>::identity(n, n) * Complex64::new(beta, 0.0);
    let chol = m.cholesky().expect("normal matrix is positive definite");
    chol.solve(&to_dvec(rhs)).iter().copied().collect()
}

/// 4x4 grid, W=2, M=2 at 9.5/9.7 GHz, theta = {0, 0.05}, 30 deg elevation.
pub fn small_case() -> (SceneGrid, ClusterGeometry) {
    let grid = SceneGrid::new(4, 4, 2.0, 2.0).unwrap();
    let geom = ClusterGeometry::new(
        0,
        vec![0.0, 0.05],
        30f64.to_radians(),
        vec![9.5e9, 9.7e9],
    )
    .unwrap();
    (grid, geom)
}

/// 16x16 grid over 7 m with a W=4, M=4 cluster.
pub fn medium_case(center_deg: f64) -> (SceneGrid, ClusterGeometry) {
    let grid = SceneGrid::new(16, 16, 7.0, 7.0).unwrap();
    let c = center_deg.to_radians();
    let geom = ClusterGeometry::new(
        1,
        (0..4).map(|m| c + (m as f64 - 1.5) * 0.02).collect(),
        30f64.to_radians(),
        (0..4).map(|w| 9.5e9 + w as f64 * 40e6).collect(),
    )
    .unwrap();
    (grid, geom)
}
