//! FFT helpers on a periodic uniform grid.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

/// Forward/inverse transforms plus the wavenumbers of a grid.
#[derive(Clone)]
pub struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("len", &self.wavenumbers.len())
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n_cells;
        let mut planner = FftPlanner::new();
        let dk = 2.0 * std::f64::consts::PI / grid.length();
        let wavenumbers = (0..n)
            .map(|j| {
                let m = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * dk
            })
            .collect();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
        }
    }

    pub fn len(&self) -> usize {
        self.wavenumbers.len()
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.forward.process(data);
    }

    /// Normalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.inverse.process(data);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    /// Spectral first derivative. The Nyquist mode is dropped for even sizes.
    pub fn derivative(&self, data: &[Complex64]) -> Vec<Complex64> {
        let n = data.len();
        let mut buf = data.to_vec();
        self.forward(&mut buf);
        for (j, (z, &k)) in buf.iter_mut().zip(&self.wavenumbers).enumerate() {
            if n.is_multiple_of(2) && j == n / 2 {
                *z = Complex64::new(0.0, 0.0);
            } else {
                *z *= Complex64::new(0.0, k);
            }
        }
        self.inverse(&mut buf);
        buf
    }

    /// Band-limited translation `f(x) -> f(x - shift)` of a real periodic
    /// sample vector.
    pub fn translate(&self, data: &[f64], shift: f64) -> Vec<f64> {
        let n = data.len();
        let mut buf: Vec<Complex64> = data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        for (j, (z, &k)) in buf.iter_mut().zip(&self.wavenumbers).enumerate() {
            if n.is_multiple_of(2) && j == n / 2 {
                // keep the real part only so the result stays real
                *z = Complex64::new(z.re * (k * shift).cos(), 0.0);
            } else {
                *z *= Complex64::from_polar(1.0, -k * shift);
            }
        }
        self.inverse(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}
