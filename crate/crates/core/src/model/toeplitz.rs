//! Exact Gram-operator evaluation through Toeplitz embedding.
//!
//! For a raw (unit phase) operator `B` on a uniform grid, `(B^H B)[n, n']`
//! depends only on the integer offset between pixels `n` and `n'`. The Gram
//! product is therefore a 2D linear convolution, evaluated here with a
//! zero-padded `2nx x 2ny` circular FFT. No interpolation is involved; the
//! result equals `adjoint(apply(v))` up to floating-point rounding.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct ToeplitzKernel {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    /// Kernel spectrum in transposed layout (`px` rows of length `py`),
    /// pre-scaled by `1 / (px * py)`.
    spectrum: Vec<Complex64>,
    fft_x: Arc<dyn Fft<f64>>,
    ifft_x: Arc<dyn Fft<f64>>,
    fft_y: Arc<dyn Fft<f64>>,
    ifft_y: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl fmt::Debug for ToeplitzKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzKernel")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .finish_non_exhaustive()
    }
}

impl ToeplitzKernel {
    /// Builds the kernel from per-measurement wavenumbers `(kx, ky)` and the
    /// grid pitch.
    pub(crate) fn new(nx: usize, ny: usize, dx: f64, dy: f64, wavenumbers: &[(f64, f64)]) -> Self {
        let px = 2 * nx;
        let py = 2 * ny;

        // offset index -> signed pixel offset; the middle slot is unused
        let offset = |i: usize, n: usize| -> Option<f64> {
            match i.cmp(&n) {
                std::cmp::Ordering::Less => Some(i as f64),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(i as f64 - 2.0 * n as f64),
            }
        };

        let mut kernel = vec![Complex64::new(0.0, 0.0); px * py];
        let mut gx = vec![Complex64::new(0.0, 0.0); px];
        let mut gy = vec![Complex64::new(0.0, 0.0); py];
        for &(kx, ky) in wavenumbers {
            for (ai, g) in gx.iter_mut().enumerate() {
                *g = offset(ai, nx).map_or(Complex64::new(0.0, 0.0), |a| {
                    Complex64::from_polar(1.0, -kx * a * dx)
                });
            }
            for (bi, g) in gy.iter_mut().enumerate() {
                *g = offset(bi, ny).map_or(Complex64::new(0.0, 0.0), |b| {
                    Complex64::from_polar(1.0, -ky * b * dy)
                });
            }
            for (bi, &t) in gy.iter().enumerate() {
                let row = &mut kernel[bi * px..(bi + 1) * px];
                for (h, &g) in row.iter_mut().zip(&gx) {
                    *h += t * g;
                }
            }
        }

        let mut planner = FftPlanner::new();
        let fft_x = planner.plan_fft_forward(px);
        let ifft_x = planner.plan_fft_inverse(px);
        let fft_y = planner.plan_fft_forward(py);
        let ifft_y = planner.plan_fft_inverse(py);
        let scratch_len = [&fft_x, &ifft_x, &fft_y, &ifft_y]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);

        let mut this = Self {
            nx,
            ny,
            px,
            py,
            spectrum: Vec::new(),
            fft_x,
            ifft_x,
            fft_y,
            ifft_y,
            scratch_len,
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        let mut spectrum = this.forward(&mut kernel, py, &mut scratch);
        let scale = 1.0 / (px * py) as f64;
        for s in &mut spectrum {
            *s *= scale;
        }
        this.spectrum = spectrum;
        this
    }

    /// 2D forward FFT of `buf` (`py` rows of `px`), returned transposed.
    /// Only the first `active_rows` rows may be nonzero.
    fn forward(
        &self,
        buf: &mut [Complex64],
        active_rows: usize,
        scratch: &mut [Complex64],
    ) -> Vec<Complex64> {
        let (px, py) = (self.px, self.py);
        self.fft_x
            .process_with_scratch(&mut buf[..active_rows * px], scratch);
        let mut tb = vec![Complex64::new(0.0, 0.0); px * py];
        for b in 0..active_rows {
            for a in 0..px {
                tb[a * py + b] = buf[b * px + a];
            }
        }
        self.fft_y.process_with_scratch(&mut tb, scratch);
        tb
    }

    /// Computes `(B^H B) u` for a row-major `nx x ny` image `u`.
    pub(crate) fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let (nx, ny, px, py) = (self.nx, self.ny, self.px, self.py);
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.scratch_len];
        let mut buf = vec![Complex64::new(0.0, 0.0); px * py];
        for iy in 0..ny {
            buf[iy * px..iy * px + nx].copy_from_slice(&u[iy * nx..(iy + 1) * nx]);
        }
        let mut tb = self.forward(&mut buf, ny, &mut scratch);
        for (t, s) in tb.iter_mut().zip(&self.spectrum) {
            *t *= s;
        }
        self.ifft_y.process_with_scratch(&mut tb, &mut scratch);
        for b in 0..ny {
            for a in 0..px {
                buf[b * px + a] = tb[a * py + b];
            }
        }
        self.ifft_x
            .process_with_scratch(&mut buf[..ny * px], &mut scratch);
        let mut out = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            out.extend_from_slice(&buf[iy * px..iy * px + nx]);
        }
        out
    }
}
