//! Split-step solver for the quantum-like wave equation
//!
//! ```text
//! i alpha psi_s = -(alpha^2 / 2) psi_xx + U(x, s) psi,   U = K(s) x^2 / 2
//! ```
//!
//! whose dispersion parameter `alpha(s)` is the beam emittance, together with
//! the Madelung view of its solutions (density, current velocity, Bohm term)
//! and the condition under which that view reduces to the classical fluid.

use std::cell::Cell;

use num_complex::Complex64;

use crate::coherent::PhaseConvention;
use crate::envelope::{derivatives_at, GaussianBeamState};
use crate::error::{require_positive, Error, Result};
use crate::fluid::DensityFloor;
use crate::grid::{GridSpec, StencilOrder};
use crate::profiles::{EmittanceProfile, StrengthProfile};
use crate::spectral::Spectral;

/// Boundary amplitude above which a step logs a warning.
pub const LEAK_WARN: f64 = 1e-8;
/// Boundary amplitude above which a step fails.
pub const LEAK_ERROR: f64 = 1e-4;

/// Complex field sampled at the cell centers of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: GridSpec,
    pub psi: Vec<Complex64>,
    pub s: f64,
}

impl WaveField {
    pub fn from_fn(grid: GridSpec, s: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let psi = grid.centers().into_iter().map(f).collect();
        Self { grid, psi, s }
    }

    /// Gaussian state of the envelope family: rms size `sigma`, curvature
    /// phase `(x - x0)^2 / (2 alpha rho)` with `1/rho = sigma'/sigma`, linear
    /// phase for the centroid velocity and global phase `chi + phi0`.
    pub fn gaussian(
        grid: GridSpec,
        state: &GaussianBeamState,
        alpha: f64,
        convention: PhaseConvention,
    ) -> Result<Self> {
        require_positive("alpha", alpha)?;
        require_positive("sigma", state.sigma)?;
        let sigma2 = state.sigma * state.sigma;
        let norm = (2.0 * std::f64::consts::PI * sigma2).powf(-0.25);
        let inv_rho = state.inverse_rho();
        let kick = convention.factor() * state.p0 / alpha;
        Ok(Self::from_fn(grid, state.s, |x| {
            let d = x - state.x0;
            let phase = d * d * inv_rho / (2.0 * alpha) + kick * x + state.chi + state.phi0;
            Complex64::from_polar(norm * (-d * d / (4.0 * sigma2)).exp(), phase)
        }))
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `sum |psi_j|^2 dx`.
    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a vanishing field".into()));
        }
        let scale = norm.sqrt().recip();
        for z in &mut self.psi {
            *z *= scale;
        }
        Ok(())
    }

    /// Largest modulus in the two edge cells.
    pub fn boundary_amplitude(&self) -> f64 {
        let n = self.psi.len();
        self.psi[0].norm().max(self.psi[n - 1].norm())
    }

    /// `|<self|other>|^2`, insensitive to a global phase.
    pub fn overlap(&self, other: &WaveField) -> Result<f64> {
        if self.psi.len() != other.psi.len() {
            return Err(Error::LengthMismatch {
                left: self.psi.len(),
                right: other.psi.len(),
            });
        }
        let inner: Complex64 = self
            .psi
            .iter()
            .zip(&other.psi)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx();
        Ok(inner.norm_sqr())
    }
}

/// Strang splitting with a spectral kinetic factor.
///
/// One step applies half a potential kick with `K(s)/alpha(s)`, the free
/// propagator `exp(-i alpha(s + ds/2) k^2 ds / 2)` in Fourier space, and half
/// a kick with `K(s+ds)/alpha(s+ds)`. Every factor is unimodular, so the
/// discrete norm is conserved up to rounding.
#[derive(Debug, Clone)]
pub struct QuantumPropagator {
    grid: GridSpec,
    spectral: Spectral,
    x2: Vec<f64>,
    /// Set once a boundary warning has been logged.
    warned: Cell<bool>,
}

impl QuantumPropagator {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            spectral: Spectral::new(&grid),
            x2: grid.centers().iter().map(|x| x * x).collect(),
            grid,
            warned: Cell::new(false),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn kick(&self, psi: &mut [Complex64], k: f64, alpha: f64, ds: f64) {
        let c = -0.5 * k * ds / alpha;
        for (z, &x2) in psi.iter_mut().zip(&self.x2) {
            *z *= Complex64::from_polar(1.0, c * x2);
        }
    }

    pub fn qstep(
        &self,
        field: &WaveField,
        strength: &StrengthProfile,
        emittance: &EmittanceProfile,
        ds: f64,
    ) -> Result<WaveField> {
        require_positive("ds", ds)?;
        if field.grid != self.grid {
            return Err(Error::InvalidInput("field and propagator grids differ".into()));
        }
        let s = field.s;
        let s_next = s + ds;
        let (k0, a0) = (strength.eval(s)?, emittance.eval(s)?);
        let (k1, a1) = (strength.eval(s_next)?, emittance.eval(s_next)?);
        let a_mid = emittance.eval(s + 0.5 * ds)?;

        let mut psi = field.psi.clone();
        self.kick(&mut psi, k0, a0, 0.5 * ds);
        self.spectral.forward(&mut psi);
        for (z, &k) in psi.iter_mut().zip(self.spectral.wavenumbers()) {
            *z *= Complex64::from_polar(1.0, -0.5 * a_mid * k * k * ds);
        }
        self.spectral.inverse(&mut psi);
        self.kick(&mut psi, k1, a1, 0.5 * ds);

        let out = WaveField {
            grid: self.grid,
            psi,
            s: s_next,
        };
        let edge = out.boundary_amplitude();
        if edge > LEAK_ERROR {
            return Err(Error::BoundaryLeak {
                s: s_next,
                amplitude: edge,
            });
        }
        if edge > LEAK_WARN && !self.warned.replace(true) {
            log::warn!("boundary amplitude {edge:e} at s = {s_next}; the domain may be too small");
        }
        Ok(out)
    }

    /// Step from `field.s` to `s_end` with steps no longer than `ds`, calling
    /// `observe` on the initial field and after every `cadence` interval
    /// (the last call happens exactly at `s_end`).
    pub fn evolve(
        &self,
        field: &WaveField,
        strength: &StrengthProfile,
        emittance: &EmittanceProfile,
        s_end: f64,
        ds: f64,
        cadence: f64,
        mut observe: impl FnMut(&WaveField) -> Result<()>,
    ) -> Result<WaveField> {
        require_positive("ds", ds)?;
        require_positive("cadence", cadence)?;
        let s0 = field.s;
        let n_out = ((s_end - s0) / cadence - 1e-9).ceil().max(1.0) as usize;
        let mut current = field.clone();
        observe(&current)?;
        for i in 1..=n_out {
            let target = if i == n_out { s_end } else { s0 + i as f64 * cadence };
            let n = ((target - current.s) / ds - 1e-9).ceil().max(1.0) as usize;
            let h = (target - current.s) / n as f64;
            let start = current.s;
            for j in 0..n {
                current = self.qstep(&current, strength, emittance, h)?;
                // keep s free of accumulated rounding
                current.s = if j + 1 == n { target } else { start + (j + 1) as f64 * h };
            }
            observe(&current)?;
        }
        Ok(current)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadelungSettings {
    /// Cells with `n < mask_rel * max n` are treated as vacuum.
    pub mask_rel: f64,
    pub floor: DensityFloor,
    pub stencil: StencilOrder,
}

impl Default for MadelungSettings {
    fn default() -> Self {
        Self {
            mask_rel: 1e-10,
            floor: DensityFloor::default(),
            stencil: StencilOrder::Fourth,
        }
    }
}

/// Hydrodynamic view of a wave field.
#[derive(Debug, Clone, PartialEq)]
pub struct MadelungFields {
    /// `|psi|^2`
    pub n: Vec<f64>,
    /// Unwrapped phase, constant across vacuum cells.
    pub phase: Vec<f64>,
    /// Current velocity `alpha d(phase)/dx`; zero where invalid.
    pub p: Vec<f64>,
    /// `(alpha^2/2) d/dx[(1/M) d^2 M/dx^2]` with `M = sqrt(n)`; zero where invalid.
    pub bohm: Vec<f64>,
    /// Cells whose derivative stencils stay inside the non-vacuum region.
    pub valid: Vec<bool>,
}

fn wrap_angle(mut d: f64) -> f64 {
    use std::f64::consts::PI;
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Unwrap `arg psi` outward from the density maximum; vacuum cells inherit
/// the phase of their inner neighbour.
fn unwrap_phase(psi: &[Complex64], vacuum: &[bool], start: usize) -> Vec<f64> {
    let n = psi.len();
    let mut phase = vec![0.0; n];
    phase[start] = psi[start].arg();
    for j in start + 1..n {
        phase[j] = if vacuum[j] {
            phase[j - 1]
        } else {
            phase[j - 1] + wrap_angle(psi[j].arg() - psi[j - 1].arg())
        };
    }
    for j in (0..start).rev() {
        phase[j] = if vacuum[j] {
            phase[j + 1]
        } else {
            phase[j + 1] + wrap_angle(psi[j].arg() - psi[j + 1].arg())
        };
    }
    phase
}

/// Mark cells whose `reach`-wide neighbourhood is free of vacuum.
fn interior_mask(vacuum: &[bool], reach: usize) -> Vec<bool> {
    let n = vacuum.len();
    (0..n)
        .map(|j| {
            j >= reach && j + reach < n && vacuum[j - reach..=j + reach].iter().all(|v| !v)
        })
        .collect()
}

pub fn madelung_decompose(field: &WaveField, alpha: f64) -> Result<MadelungFields> {
    madelung_decompose_with(field, alpha, &MadelungSettings::default())
}

pub fn madelung_decompose_with(
    field: &WaveField,
    alpha: f64,
    settings: &MadelungSettings,
) -> Result<MadelungFields> {
    require_positive("alpha", alpha)?;
    let n = field.density();
    let (imax, nmax) = n
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0f64), |acc, (j, v)| if v > acc.1 { (j, v) } else { acc });
    if !(nmax > 0.0) {
        return Err(Error::InvalidInput("wave field vanishes identically".into()));
    }
    let dx = field.grid.dx();
    let hw = settings.stencil.half_width();
    let vacuum: Vec<bool> = n.iter().map(|&v| v < settings.mask_rel * nmax).collect();
    let phase = unwrap_phase(&field.psi, &vacuum, imax);
    let valid = interior_mask(&vacuum, 2 * hw);

    let floor = settings.floor.value(nmax);
    let amp: Vec<f64> = n.iter().map(|&v| v.max(floor).sqrt()).collect();
    let len = n.len();
    let mut quantum = vec![0.0; len];
    for j in hw..len.saturating_sub(hw) {
        quantum[j] = settings.stencil.second(&amp, j, dx) / amp[j];
    }
    let mut p = vec![0.0; len];
    let mut bohm = vec![0.0; len];
    for j in 0..len {
        if valid[j] {
            p[j] = alpha * settings.stencil.first(&phase, j, dx);
            bohm[j] = 0.5 * alpha * alpha * settings.stencil.first(&quantum, j, dx);
        }
    }
    Ok(MadelungFields {
        n,
        phase,
        p,
        bohm,
        valid,
    })
}

impl MadelungFields {
    /// Rebuild `sqrt(n) exp(i phase)`.
    pub fn recompose(&self) -> Vec<Complex64> {
        self.n
            .iter()
            .zip(&self.phase)
            .map(|(&n, &ph)| Complex64::from_polar(n.sqrt(), ph))
            .collect()
    }
}

/// Left side of the classicality condition
/// `(alpha'/alpha) P + (eta0/n) dn/dx + bohm = 0`, evaluated on valid cells
/// and normalized by the largest pressure term `|(eta0/n) dn/dx|`.
pub fn classicality_residual(
    field: &WaveField,
    alpha: f64,
    alpha_prime: f64,
    eta0: f64,
) -> Result<f64> {
    classicality_residual_with(field, alpha, alpha_prime, eta0, &MadelungSettings::default())
}

pub fn classicality_residual_with(
    field: &WaveField,
    alpha: f64,
    alpha_prime: f64,
    eta0: f64,
    settings: &MadelungSettings,
) -> Result<f64> {
    let m = madelung_decompose_with(field, alpha, settings)?;
    let nmax = m.n.iter().copied().fold(0.0, f64::max);
    let floor = settings.floor.value(nmax);
    let log_n: Vec<f64> = m.n.iter().map(|&v| v.max(floor).ln()).collect();
    let dx = field.grid.dx();
    let damping = alpha_prime / alpha;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in (0..m.n.len()).filter(|&j| m.valid[j]) {
        let pressure = eta0 * settings.stencil.first(&log_n, j, dx);
        let total = damping * m.p[j] + pressure + m.bohm[j];
        worst = worst.max(total.abs());
        scale = scale.max(pressure.abs());
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidInput(
            "pressure term vanishes on the valid region".into(),
        ));
    }
    Ok(worst / scale)
}

/// Thermal coefficient that makes a Gaussian satisfy the classicality
/// condition: `(sigma/alpha) alpha' sigma' + alpha^2 / (4 sigma^2)`.
pub fn eta_from_envelope(sigma: f64, dsigma: f64, alpha: f64, dalpha: f64) -> f64 {
    sigma / alpha * dalpha * dsigma + alpha * alpha / (4.0 * sigma * sigma)
}

/// Largest `|alpha'/alpha - sigma'/sigma|` over interior samples of
/// co-sampled trajectories `(s, sigma, alpha)`.
pub fn enforce_alpha_sigma_lock(s: &[f64], sigma: &[f64], alpha: &[f64]) -> Result<f64> {
    if sigma.len() != s.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: sigma.len(),
        });
    }
    if alpha.len() != s.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: alpha.len(),
        });
    }
    if s.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: s.len(),
        });
    }
    let mut worst = 0.0f64;
    for j in 1..s.len() - 1 {
        let ss = [s[j - 1], s[j], s[j + 1]];
        let (da, _) = derivatives_at(ss, [alpha[j - 1], alpha[j], alpha[j + 1]]);
        let (dsig, _) = derivatives_at(ss, [sigma[j - 1], sigma[j], sigma[j + 1]]);
        worst = worst.max((da / alpha[j] - dsig / sigma[j]).abs());
    }
    Ok(worst)
}
