//! Beam envelope dynamics in a quadrupole-like focusing channel, modeled
//! three ways: as a Gaussian envelope ODE, as an isothermal fluid and as a
//! Schrödinger-like wave equation whose dispersion is the beam emittance.
//!
//! * [`profiles`]: focusing strength `K(s)` and emittance `eps(s)`
//! * [`envelope`]: centroid, rms size and phase of Gaussian beams
//! * [`coherent`]: matched coherent states, isothermal and dissipative
//! * [`fluid`]: finite-volume fluid solver
//! * [`qsolver`]: split-step wave solver and its Madelung fields
//! * [`diagnostics`]: moments, emittance and profile distances

pub mod coherent;
pub mod diagnostics;
pub mod envelope;
pub mod error;
pub mod fluid;
pub mod grid;
mod ode;
pub mod profiles;
pub mod qsolver;
pub mod spectral;

pub use coherent::{CoherentKind, CoherentSpec, PhaseConvention};
pub use diagnostics::DiagnosticsRecord;
pub use envelope::{GaussianBeamState, OdeMethod, OdeSettings};
pub use error::{Error, Result};
pub use fluid::{FluidFields, FluidSettings, VelocityKind};
pub use grid::{GridSpec, StencilOrder};
pub use profiles::{EmittanceProfile, StrengthProfile, ThermoState};
pub use qsolver::{MadelungFields, QuantumPropagator, WaveField};
