//! Ordinary (isothermal) and generalized (dissipative) coherent states.
//!
//! A coherent state is a Gaussian of fixed rms size `sigma0` whose centroid
//! oscillates in the well. It exists when the thermal coefficient tracks the
//! strength, `eta0(s) = sigma0^2 K(s)`, which for the emittance reads
//! `K sigma0^4 = eps^2 / 4`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::envelope::GaussianBeamState;
use crate::error::{require_positive, Error, Result};
use crate::profiles::{coupled_dissipative_profiles, EmittanceProfile, StrengthProfile, ThermoState};

/// Relative tolerance on `K sigma0^4 = eps^2 / 4` at construction.
pub const MATCHING_TOLERANCE: f64 = 1e-12;

/// Scaling of the linear phase `P0 x / eps` carried by the wave function.
///
/// `Half` keeps the printed form of the coherent-state amplitude, whose
/// phase gradient is `P0 / (2 eps)`. `Full` uses `P0 / eps`, the convention
/// under which the current velocity `alpha d(phase)/dx` equals `P0` and the
/// wave centroid moves like the fluid centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseConvention {
    Half,
    #[default]
    Full,
}

impl PhaseConvention {
    pub fn factor(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::Full => 1.0,
        }
    }
}

/// Rms size of the matched beam, `(eps^2 / 4K)^(1/4)`.
pub fn matched_sigma(k: f64, eps: f64) -> Result<f64> {
    require_positive("K", k)?;
    require_positive("eps", eps)?;
    Ok((eps * eps / (4.0 * k)).powf(0.25))
}

/// `|eta0 - sigma0^2 K| / eta0`.
pub fn check_matching(eta0: f64, sigma0: f64, k: f64) -> f64 {
    (eta0 - sigma0 * sigma0 * k).abs() / eta0
}

/// Normalized Gaussian density of width `state.sigma` centered on `state.x0`.
pub fn coherent_density(x: f64, state: &GaussianBeamState) -> f64 {
    let beta = state.sigma * state.sigma;
    let d = x - state.x0;
    (-d * d / (2.0 * beta)).exp() / (2.0 * PI * beta).sqrt()
}

/// Complex amplitude of the coherent state; `|psi|^2` equals
/// [`coherent_density`].
pub fn coherent_wavefunction(
    x: f64,
    state: &GaussianBeamState,
    eps: f64,
    convention: PhaseConvention,
) -> Complex64 {
    let sigma2 = state.sigma * state.sigma;
    let d = x - state.x0;
    let amplitude = (2.0 * PI * sigma2).powf(-0.25) * (-d * d / (4.0 * sigma2)).exp();
    let phase = convention.factor() * state.p0 * x / eps + state.phi0;
    Complex64::from_polar(amplitude, phase)
}

/// Centroid energy `P0^2/2 + K x0^2/2`; conserved for isothermal states.
pub fn isothermal_energy(x0: f64, p0: f64, k: f64) -> f64 {
    0.5 * p0 * p0 + 0.5 * k * x0 * x0
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoherentKind {
    /// Constant strength and constant emittance.
    Isothermal { k: f64, eps: f64 },
    /// `K = k0 exp(-2 gamma s)` with the emittance slaved to it.
    Dissipative { k0: f64, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherentSpec {
    sigma0: f64,
    pub x0_init: f64,
    pub p0_init: f64,
    kind: CoherentKind,
}

impl CoherentSpec {
    /// Matched isothermal state. Both profiles must be constant; `sigma0`
    /// follows from the matching condition.
    pub fn isothermal(
        strength: &StrengthProfile,
        emittance: &EmittanceProfile,
        x0_init: f64,
        p0_init: f64,
    ) -> Result<Self> {
        if !strength.is_constant() {
            return Err(Error::InvalidParameter {
                name: "strength",
                reason: "an isothermal coherent state requires a constant K".into(),
            });
        }
        if !emittance.is_constant() {
            return Err(Error::InvalidParameter {
                name: "emittance",
                reason: "an isothermal coherent state requires a constant emittance".into(),
            });
        }
        let k = strength.eval(0.0)?;
        let eps = emittance.eval(0.0)?;
        let sigma0 = matched_sigma(k, eps)?;
        let spec = Self {
            sigma0,
            x0_init,
            p0_init,
            kind: CoherentKind::Isothermal { k, eps },
        };
        spec.check_initial_matching()?;
        Ok(spec)
    }

    /// Generalized coherent state over the coupled dissipative profiles.
    pub fn dissipative(k0: f64, gamma: f64, sigma0: f64, x0_init: f64, p0_init: f64) -> Result<Self> {
        require_positive("k0", k0)?;
        require_positive("sigma0", sigma0)?;
        let spec = Self {
            sigma0,
            x0_init,
            p0_init,
            kind: CoherentKind::Dissipative { k0, gamma },
        };
        spec.check_initial_matching()?;
        Ok(spec)
    }

    fn check_initial_matching(&self) -> Result<()> {
        let (k, e, _) = self.profiles()?;
        let k = k.eval(0.0)?;
        let eps = e.eval(0.0)?;
        let lhs = k * self.sigma0.powi(4);
        let rhs = eps * eps / 4.0;
        let rel = (lhs - rhs).abs() / rhs;
        if rel > MATCHING_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "sigma0",
                reason: format!("K sigma0^4 misses eps^2/4 by {rel:e} (relative)"),
            });
        }
        Ok(())
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// `beta = sigma0^2`.
    pub fn beta(&self) -> f64 {
        self.sigma0 * self.sigma0
    }

    pub fn kind(&self) -> &CoherentKind {
        &self.kind
    }

    pub fn profiles(&self) -> Result<(StrengthProfile, EmittanceProfile, ThermoState)> {
        match self.kind {
            CoherentKind::Isothermal { k, eps } => {
                let strength = StrengthProfile::constant(k)?;
                Ok((
                    strength.clone(),
                    EmittanceProfile::constant(eps)?,
                    ThermoState::new(self.beta(), strength)?,
                ))
            }
            CoherentKind::Dissipative { k0, gamma } => {
                coupled_dissipative_profiles(k0, gamma, self.sigma0)
            }
        }
    }

    pub fn initial_state(&self) -> GaussianBeamState {
        GaussianBeamState {
            s: 0.0,
            x0: self.x0_init,
            p0: self.p0_init,
            sigma: self.sigma0,
            dsigma: 0.0,
            chi: 0.0,
            phi0: 0.0,
        }
    }

    /// Conserved centroid energy of an isothermal state.
    pub fn energy(&self) -> Option<f64> {
        match self.kind {
            CoherentKind::Isothermal { k, .. } => Some(isothermal_energy(self.x0_init, self.p0_init, k)),
            CoherentKind::Dissipative { .. } => None,
        }
    }

    /// Largest `|Gamma(s) - K'(s)/K(s)|` over the given sample points.
    pub fn existence_residual(&self, samples: &[f64]) -> Result<f64> {
        let (k, e, _) = self.profiles()?;
        samples.iter().try_fold(0.0f64, |worst, &s| {
            Ok(worst.max((e.gamma_rate(s)? - k.log_derivative(s)?).abs()))
        })
    }
}
