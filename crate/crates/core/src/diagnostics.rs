//! Moments, rms emittance and distances between density profiles.

use num_complex::Complex64;

use crate::error::{require_positive, Error, Result};
use crate::grid::GridSpec;
use crate::qsolver::WaveField;
use crate::spectral::Spectral;

/// Largest tolerated deviation of the discrete norm from one.
pub const NORM_TOLERANCE: f64 = 1e-6;

/// Relative slack before a negative emittance discriminant is an error.
const DISCRIMINANT_SLACK: f64 = 1e-12;

/// Second-order moments of a beam at one `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub s: f64,
    pub norm: f64,
    pub mean_x: f64,
    pub sigma: f64,
    /// rms spread of the momentum about its mean
    pub sigma_p: f64,
    /// symmetrized, centered `<xp>`
    pub xp_corr: f64,
    pub emit_rms: f64,
    /// Centroid energy `p0^2/2 + K x0^2/2`, when a strength is supplied.
    pub energy: Option<f64>,
}

impl DiagnosticsRecord {
    /// Fill in the centroid energy with strength `k` and mean momentum `p0`.
    pub fn with_energy(mut self, k: f64, p0: f64) -> Self {
        self.energy = Some(0.5 * p0 * p0 + 0.5 * k * self.mean_x * self.mean_x);
        self
    }

    /// `sigma * sigma_p - emit_rms / 2`, never negative up to rounding.
    pub fn uncertainty_excess(&self) -> f64 {
        self.sigma * self.sigma_p - 0.5 * self.emit_rms
    }
}

/// Moments of a wave field together with its mean momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveMoments {
    pub record: DiagnosticsRecord,
    pub mean_p: f64,
}

/// Quadrature moments of `|psi|^2` and spectral momentum moments with
/// `p = -i alpha d/dx`.
pub fn moments_from_wave(field: &WaveField, alpha: f64) -> Result<WaveMoments> {
    require_positive("alpha", alpha)?;
    let norm = field.norm();
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::StaleState { norm });
    }
    let dx = field.grid.dx();
    let xs = field.grid.centers();
    let density = field.density();
    let mean_x = xs.iter().zip(&density).map(|(x, n)| x * n).sum::<f64>() * dx / norm;
    let var = xs
        .iter()
        .zip(&density)
        .map(|(x, n)| (x - mean_x).powi(2) * n)
        .sum::<f64>()
        * dx
        / norm;

    let dpsi = Spectral::new(&field.grid).derivative(&field.psi);
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    let mut xp = 0.0;
    for ((z, dz), x) in field.psi.iter().zip(&dpsi).zip(&xs) {
        let w: Complex64 = z.conj() * dz;
        p1 += w.im;
        p2 += dz.norm_sqr();
        xp += (x - mean_x) * w.im;
    }
    let mean_p = alpha * p1 * dx / norm;
    let p_var = (alpha * alpha * p2 * dx / norm - mean_p * mean_p).max(0.0);
    let xp_corr = alpha * xp * dx / norm;
    let emit_rms = emittance(var, p_var, xp_corr)?;
    Ok(WaveMoments {
        record: DiagnosticsRecord {
            s: field.s,
            norm,
            mean_x,
            sigma: var.sqrt(),
            sigma_p: p_var.sqrt(),
            xp_corr,
            emit_rms,
            energy: None,
        },
        mean_p,
    })
}

/// `2 sqrt(<x^2><p^2> - <xp>^2)` from centered moments.
pub fn emittance(x2: f64, p2: f64, xp: f64) -> Result<f64> {
    if x2 < 0.0 || p2 < 0.0 {
        return Err(Error::InconsistentMoments {
            discriminant: x2.min(p2),
        });
    }
    let disc = x2 * p2 - xp * xp;
    if disc < -DISCRIMINANT_SLACK * x2 * p2 {
        return Err(Error::InconsistentMoments { discriminant: disc });
    }
    Ok(2.0 * disc.max(0.0).sqrt())
}

/// Momentum spread of a Gaussian envelope: `sqrt(sigma'^2 + eps^2 / (4 sigma^2))`.
pub fn sigma_p_envelope(sigma: f64, dsigma: f64, eps: f64) -> Result<f64> {
    require_positive("sigma", sigma)?;
    require_positive("eps", eps)?;
    Ok((dsigma * dsigma + eps * eps / (4.0 * sigma * sigma)).sqrt())
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// `sqrt(sum (a_j - b_j)^2 dx)`.
pub fn l2_distance(a: &[f64], b: &[f64], dx: f64) -> Result<f64> {
    check_lengths(a, b)?;
    Ok((a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() * dx).sqrt())
}

/// First moment of a density sampled on `grid`, normalized by its mass.
pub fn centroid(density: &[f64], grid: &GridSpec) -> f64 {
    let mass: f64 = density.iter().sum();
    let first: f64 = density
        .iter()
        .zip(grid.centers())
        .map(|(n, x)| n * x)
        .sum();
    first / mass
}

/// L2 distance after translating `b` so that its centroid coincides with
/// that of `a`. The shift is band-limited, so it is exact for resolved
/// profiles whose tails vanish at the domain edges.
pub fn l2_distance_recentered(a: &[f64], b: &[f64], grid: &GridSpec) -> Result<f64> {
    check_lengths(a, b)?;
    if a.len() != grid.n_cells {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: grid.n_cells,
        });
    }
    let shift = centroid(a, grid) - centroid(b, grid);
    let moved = Spectral::new(grid).translate(b, shift);
    l2_distance(a, &moved, grid.dx())
}

/// `<(x - <x>)^4> / sigma^4 - 3` of a density; zero for a Gaussian.
pub fn excess_kurtosis(density: &[f64], grid: &GridSpec) -> f64 {
    let mean = centroid(density, grid);
    let mass: f64 = density.iter().sum();
    let (m2, m4) = density
        .iter()
        .zip(grid.centers())
        .fold((0.0, 0.0), |(m2, m4), (n, x)| {
            let d2 = (x - mean).powi(2);
            (m2 + n * d2, m4 + n * d2 * d2)
        });
    let (m2, m4) = (m2 / mass, m4 / mass);
    m4 / (m2 * m2) - 3.0
}
