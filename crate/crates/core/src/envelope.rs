//! Finite-dimensional dynamics of Gaussian beam states.
//!
//! The state carries the centroid `x0` and its current velocity `p0 = x0'`,
//! the rms size `sigma` with its slope, and the accumulated phase `chi`.
//! The envelope obeys
//!
//! ```text
//! sigma'' + K sigma - (alpha'/alpha) sigma' - alpha^2 / (4 sigma^3) = 0
//! ```
//!
//! and the centroid follows the undamped oscillator `x0'' + K x0 = 0`.

use crate::error::{require_positive, Error, Result};
use crate::ode::{dopri_span, rk4_span, Tolerances};
use crate::profiles::{EmittanceProfile, StrengthProfile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBeamState {
    pub s: f64,
    pub x0: f64,
    pub p0: f64,
    pub sigma: f64,
    pub dsigma: f64,
    pub chi: f64,
    /// Global phase; carried along but never evolved.
    pub phi0: f64,
}

impl GaussianBeamState {
    /// A state at rest with zero phase.
    pub fn new(s: f64, x0: f64, p0: f64, sigma: f64, dsigma: f64) -> Result<Self> {
        require_positive("sigma", sigma)?;
        Ok(Self {
            s,
            x0,
            p0,
            sigma,
            dsigma,
            chi: 0.0,
            phi0: 0.0,
        })
    }

    /// `1/rho = sigma'/sigma`; the current velocity of the envelope branch is
    /// `P(x) = x / rho`.
    pub fn inverse_rho(&self) -> f64 {
        self.dsigma / self.sigma
    }

    /// `P0^2/2 + K x0^2/2`.
    pub fn centroid_energy(&self, k: f64) -> f64 {
        0.5 * self.p0 * self.p0 + 0.5 * k * self.x0 * self.x0
    }

    fn to_vector(self) -> [f64; 5] {
        [self.x0, self.p0, self.sigma, self.dsigma, self.chi]
    }

    fn from_vector(s: f64, y: [f64; 5], phi0: f64) -> Self {
        Self {
            s,
            x0: y[0],
            p0: y[1],
            sigma: y[2],
            dsigma: y[3],
            chi: y[4],
            phi0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeMethod {
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    /// Fixed step for RK4, initial trial step for the adaptive method.
    pub step: f64,
    pub method: OdeMethod,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Spacing of the returned samples; defaults to `step`.
    pub cadence: Option<f64>,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            step: 1e-2,
            method: OdeMethod::Rk45Adaptive,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            cadence: None,
        }
    }
}

impl OdeSettings {
    pub fn rk4(step: f64) -> Self {
        Self {
            step,
            method: OdeMethod::Rk4Fixed,
            ..Self::default()
        }
    }

    pub fn with_cadence(mut self, cadence: f64) -> Self {
        self.cadence = Some(cadence);
        self
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("step", self.step)?;
        require_positive("abs_tol", self.abs_tol)?;
        require_positive("rel_tol", self.rel_tol)?;
        if let Some(c) = self.cadence {
            require_positive("cadence", c)?;
        }
        Ok(())
    }
}

/// First-order form of the centroid oscillator: `(x0', p0') = (p0, -K x0)`.
pub fn centroid_rhs(state: &GaussianBeamState, k: f64) -> (f64, f64) {
    (state.p0, -k * state.x0)
}

/// `(sigma', sigma'')` for strength `k`, dispersion `alpha` and damping
/// coefficient `damping = alpha'/alpha`.
pub fn envelope_rhs(
    state: &GaussianBeamState,
    k: f64,
    alpha: f64,
    damping: f64,
) -> Result<(f64, f64)> {
    let sigma = state.sigma;
    if !(sigma > 0.0) {
        return Err(Error::EnvelopeCollapse { s: state.s });
    }
    let d2 = -k * sigma + damping * state.dsigma + alpha * alpha / (4.0 * sigma.powi(3));
    Ok((state.dsigma, d2))
}

/// `chi' = -alpha / (4 sigma^2)`.
pub fn phase_rhs(state: &GaussianBeamState, alpha: f64) -> f64 {
    -alpha / (4.0 * state.sigma * state.sigma)
}

fn full_rhs(
    strength: &StrengthProfile,
    emittance: &EmittanceProfile,
    s: f64,
    y: &[f64; 5],
) -> Result<[f64; 5]> {
    let state = GaussianBeamState::from_vector(s, *y, 0.0);
    let k = strength.eval(s)?;
    let alpha = emittance.eval(s)?;
    let damping = emittance.log_derivative(s)?;
    let (dx, dp) = centroid_rhs(&state, k);
    let (ds, d2s) = envelope_rhs(&state, k, alpha, damping)?;
    Ok([dx, dp, ds, d2s, phase_rhs(&state, alpha)])
}

/// Integrate the centroid, envelope and phase equations from `state0.s` to
/// `s_end`, returning samples at the settings' cadence (first sample is
/// `state0`, last sample sits exactly at `s_end`).
pub fn integrate(
    state0: &GaussianBeamState,
    strength: &StrengthProfile,
    emittance: &EmittanceProfile,
    s_end: f64,
    settings: &OdeSettings,
) -> Result<Vec<GaussianBeamState>> {
    settings.validate()?;
    require_positive("sigma", state0.sigma)?;
    if !(s_end > state0.s) {
        return Err(Error::InvalidParameter {
            name: "s_end",
            reason: format!("must exceed the initial s = {}, got {s_end}", state0.s),
        });
    }
    let cadence = settings.cadence.unwrap_or(settings.step);
    let span = s_end - state0.s;
    let n_out = (span / cadence - 1e-9).ceil().max(1.0) as usize;

    let mut rhs = |s: f64, y: &[f64; 5]| full_rhs(strength, emittance, s, y);
    let tol = Tolerances {
        abs: settings.abs_tol,
        rel: settings.rel_tol,
    };
    let mut trial = settings.step;

    let mut out = Vec::with_capacity(n_out + 1);
    out.push(*state0);
    let mut y = state0.to_vector();
    let mut s = state0.s;
    for i in 1..=n_out {
        let target = if i == n_out {
            s_end
        } else {
            state0.s + i as f64 * cadence
        };
        y = match settings.method {
            OdeMethod::Rk4Fixed => {
                let n = ((target - s) / settings.step - 1e-9).ceil().max(1.0) as usize;
                rk4_span(&mut rhs, s, y, target, n)?
            }
            OdeMethod::Rk45Adaptive => dopri_span(&mut rhs, s, y, target, &mut trial, tol)?,
        };
        if !(y[2] > 0.0) {
            return Err(Error::EnvelopeCollapse { s: target });
        }
        s = target;
        out.push(GaussianBeamState::from_vector(s, y, state0.phi0));
    }
    Ok(out)
}

/// Derivative estimates from three-point Lagrange stencils; exact centered
/// differences on uniform spacing.
pub(crate) fn derivatives_at(s: [f64; 3], f: [f64; 3]) -> (f64, f64) {
    let h0 = s[1] - s[0];
    let h1 = s[2] - s[1];
    let first = (-h1 / (h0 * (h0 + h1))) * f[0]
        + ((h1 - h0) / (h0 * h1)) * f[1]
        + (h0 / (h1 * (h0 + h1))) * f[2];
    let second = 2.0 * (f[0] / (h0 * (h0 + h1)) - f[1] / (h0 * h1) + f[2] / (h1 * (h0 + h1)));
    (first, second)
}

fn check_samples(trajectory: &[GaussianBeamState]) -> Result<()> {
    if trajectory.len() < 5 {
        return Err(Error::InsufficientData {
            needed: 5,
            got: trajectory.len(),
        });
    }
    Ok(())
}

/// Three-sample windows with equal spacing. The second difference is only
/// first-order accurate across a spacing change (such as a shortened final
/// output interval), so such windows are left out.
fn even_windows(
    trajectory: &[GaussianBeamState],
) -> impl Iterator<Item = (usize, &[GaussianBeamState])> {
    trajectory.windows(3).enumerate().filter(|(_, w)| {
        let (h0, h1) = (w[1].s - w[0].s, w[2].s - w[1].s);
        (h1 - h0).abs() <= 1e-6 * h0.abs().max(h1.abs())
    })
}

/// Maximum of `|P0'' - Gamma P0' + K P0|` over evenly spaced interior samples, normalized
/// by `max |K P0|`. Returns 0 for an identically vanishing centroid.
pub fn current_velocity_residual(
    trajectory: &[GaussianBeamState],
    strength: &StrengthProfile,
    emittance: &EmittanceProfile,
) -> Result<f64> {
    check_samples(trajectory)?;
    let mut scale = 0.0f64;
    for st in trajectory {
        scale = scale.max((strength.eval(st.s)? * st.p0).abs());
    }
    let mut worst = 0.0f64;
    for (_, w) in even_windows(trajectory) {
        let (dp, d2p) = derivatives_at([w[0].s, w[1].s, w[2].s], [w[0].p0, w[1].p0, w[2].p0]);
        let s = w[1].s;
        let r = d2p - emittance.gamma_rate(s)? * dp + strength.eval(s)? * w[1].p0;
        worst = worst.max(r.abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}

/// Maximum mismatch of `d/ds [P0^2/2 + K x0^2/2] = Gamma K x0^2 / 2`,
/// normalized by the largest centroid energy on the trajectory.
pub fn energy_balance_residual(
    trajectory: &[GaussianBeamState],
    strength: &StrengthProfile,
    emittance: &EmittanceProfile,
) -> Result<f64> {
    check_samples(trajectory)?;
    let energies = trajectory
        .iter()
        .map(|st| Ok(st.centroid_energy(strength.eval(st.s)?)))
        .collect::<Result<Vec<_>>>()?;
    let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut worst = 0.0f64;
    for (i, w) in even_windows(trajectory) {
        let (de, _) = derivatives_at(
            [w[0].s, w[1].s, w[2].s],
            [energies[i], energies[i + 1], energies[i + 2]],
        );
        let s = w[1].s;
        let rhs = emittance.gamma_rate(s)? * 0.5 * strength.eval(s)? * w[1].x0 * w[1].x0;
        worst = worst.max((de - rhs).abs());
    }
    Ok(if scale > 0.0 { worst / scale } else { 0.0 })
}
