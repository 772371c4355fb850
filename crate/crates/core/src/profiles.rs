//! Prescribed time functions: the focusing strength `K(s)`, the emittance
//! `eps(s)` (which doubles as the dispersion parameter of the wave
//! equation) and the thermal coefficient `eta0(s)`.
//!
//! All profiles are immutable after construction and validated up front, so
//! evaluation only fails for tabulated profiles queried outside their knots.

use crate::error::{require_finite, require_positive, Error, Result};

/// Relative step used by the centered finite difference on tabulated data.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Piecewise-linear table with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    s: Vec<f64>,
    values: Vec<f64>,
}

impl Table {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidProfile(format!(
                "a table needs at least two knots, got {}",
                points.len()
            )));
        }
        for (i, &(s, v)) in points.iter().enumerate() {
            if !s.is_finite() || !v.is_finite() {
                return Err(Error::InvalidProfile(format!("knot {i} is not finite")));
            }
            if i > 0 && s <= points[i - 1].0 {
                return Err(Error::InvalidProfile(format!(
                    "knot abscissae must increase strictly (knot {i})"
                )));
            }
        }
        Ok(Self {
            s: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.s[0], self.s[self.s.len() - 1])
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.s.iter().copied().zip(self.values.iter().copied())
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(lo..=hi).contains(&s) {
            return Err(Error::OutOfDomain { s, lo, hi });
        }
        // index of the first knot strictly greater than s
        let upper = self.s.partition_point(|&k| k <= s);
        if upper == 0 {
            return Ok(self.values[0]);
        }
        let i = upper - 1;
        if self.s[i] == s || i + 1 == self.s.len() {
            return Ok(self.values[i]);
        }
        let t = (s - self.s[i]) / (self.s[i + 1] - self.s[i]);
        Ok(self.values[i] + t * (self.values[i + 1] - self.values[i]))
    }

    /// Centered difference with step `rel_step * max(1, |s|)`, one-sided at
    /// the ends of the table.
    pub fn derivative(&self, s: f64, rel_step: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let h = rel_step * s.abs().max(1.0);
        let left = (s - h).max(lo);
        let right = (s + h).min(hi);
        if right <= left {
            return Err(Error::OutOfDomain { s, lo, hi });
        }
        Ok((self.eval(right)? - self.eval(left)?) / (right - left))
    }
}

/// Quadrupole strength `K(s)` of the potential `U = K(s) x^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub enum StrengthProfile {
    Constant { k0: f64 },
    /// `k0 (1 + amplitude sin(omega s + phase))`
    Modulated {
        k0: f64,
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
    /// `k0 exp(-2 gamma s)`
    Exponential { k0: f64, gamma: f64 },
    Tabulated(Table),
}

impl StrengthProfile {
    /// `k0 = 0` is accepted and describes a field-free drift.
    pub fn constant(k0: f64) -> Result<Self> {
        require_finite("k0", k0)?;
        if k0 < 0.0 {
            return Err(Error::InvalidParameter {
                name: "k0",
                reason: format!("a defocusing constant strength is not supported, got {k0}"),
            });
        }
        Ok(Self::Constant { k0 })
    }

    pub fn modulated(k0: f64, amplitude: f64, omega: f64, phase: f64) -> Result<Self> {
        require_positive("k0", k0)?;
        require_finite("omega", omega)?;
        require_finite("phase", phase)?;
        if !(amplitude.abs() < 1.0) {
            return Err(Error::InvalidParameter {
                name: "amplitude",
                reason: format!("|amplitude| must be below 1 so K keeps its sign, got {amplitude}"),
            });
        }
        Ok(Self::Modulated {
            k0,
            amplitude,
            omega,
            phase,
        })
    }

    pub fn exponential(k0: f64, gamma: f64) -> Result<Self> {
        require_positive("k0", k0)?;
        require_finite("gamma", gamma)?;
        Ok(Self::Exponential { k0, gamma })
    }

    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        Table::new(points).map(Self::Tabulated)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        match self {
            Self::Constant { k0 } => Ok(*k0),
            Self::Modulated {
                k0,
                amplitude,
                omega,
                phase,
            } => Ok(k0 * (1.0 + amplitude * (omega * s + phase).sin())),
            Self::Exponential { k0, gamma } => Ok(k0 * (-2.0 * gamma * s).exp()),
            Self::Tabulated(table) => table.eval(s),
        }
    }

    /// `dK/ds`, analytic except for tabulated data.
    pub fn derivative(&self, s: f64) -> Result<f64> {
        match self {
            Self::Constant { .. } => Ok(0.0),
            Self::Modulated {
                k0,
                amplitude,
                omega,
                phase,
            } => Ok(k0 * amplitude * omega * (omega * s + phase).cos()),
            Self::Exponential { k0, gamma } => Ok(-2.0 * gamma * k0 * (-2.0 * gamma * s).exp()),
            Self::Tabulated(table) => table.derivative(s, DEFAULT_FD_STEP),
        }
    }

    /// `K'/K`. Exact `-2 gamma` for the exponential kind.
    pub fn log_derivative(&self, s: f64) -> Result<f64> {
        match self {
            Self::Constant { .. } => Ok(0.0),
            Self::Exponential { gamma, .. } => Ok(-2.0 * gamma),
            _ => {
                let k = self.eval(s)?;
                if k == 0.0 {
                    return Err(Error::InvalidProfile(format!("K vanishes at s = {s}")));
                }
                Ok(self.derivative(s)? / k)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Modulated { amplitude, .. } => *amplitude == 0.0,
            Self::Exponential { gamma, .. } => *gamma == 0.0,
            Self::Tabulated(table) => {
                let first = table.values[0];
                table.values.iter().all(|&v| v == first)
            }
        }
    }
}

/// Emittance `eps(s)`, identical to the dispersion parameter `alpha(s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EmittanceProfile {
    Constant { eps0: f64 },
    /// `eps0 exp(-gamma s)`
    Exponential { eps0: f64, gamma: f64 },
    Tabulated(Table),
}

impl EmittanceProfile {
    pub fn constant(eps0: f64) -> Result<Self> {
        require_positive("eps0", eps0)?;
        Ok(Self::Constant { eps0 })
    }

    pub fn exponential(eps0: f64, gamma: f64) -> Result<Self> {
        require_positive("eps0", eps0)?;
        require_finite("gamma", gamma)?;
        Ok(Self::Exponential { eps0, gamma })
    }

    /// Every knot must carry a strictly positive emittance.
    pub fn tabulated(points: &[(f64, f64)]) -> Result<Self> {
        let table = Table::new(points)?;
        if let Some((s, v)) = table.knots().find(|&(_, v)| v <= 0.0) {
            return Err(Error::InvalidProfile(format!(
                "emittance must be positive, got {v} at s = {s}"
            )));
        }
        Ok(Self::Tabulated(table))
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        let eps = match self {
            Self::Constant { eps0 } => *eps0,
            Self::Exponential { eps0, gamma } => eps0 * (-gamma * s).exp(),
            Self::Tabulated(table) => table.eval(s)?,
        };
        if eps > 0.0 && eps.is_finite() {
            Ok(eps)
        } else {
            Err(Error::InvalidProfile(format!(
                "emittance {eps} at s = {s} is not positive"
            )))
        }
    }

    /// `d eps / ds`; tabulated profiles use a centered difference with
    /// relative step `fd_step`.
    pub fn derivative_with_step(&self, s: f64, fd_step: f64) -> Result<f64> {
        match self {
            Self::Constant { .. } => Ok(0.0),
            Self::Exponential { eps0, gamma } => Ok(-gamma * eps0 * (-gamma * s).exp()),
            Self::Tabulated(table) => table.derivative(s, fd_step),
        }
    }

    pub fn derivative(&self, s: f64) -> Result<f64> {
        self.derivative_with_step(s, DEFAULT_FD_STEP)
    }

    /// `alpha'/alpha`, the damping coefficient of the envelope equation.
    /// Equal to half the dissipation rate.
    pub fn log_derivative(&self, s: f64) -> Result<f64> {
        match self {
            Self::Constant { .. } => Ok(0.0),
            Self::Exponential { gamma, .. } => Ok(-gamma),
            Self::Tabulated(_) => Ok(self.derivative(s)? / self.eval(s)?),
        }
    }

    /// Dissipation rate `Gamma = (1/eps^2) d(eps^2)/ds = 2 eps'/eps`.
    pub fn gamma_rate(&self, s: f64) -> Result<f64> {
        self.gamma_rate_with_step(s, DEFAULT_FD_STEP)
    }

    pub fn gamma_rate_with_step(&self, s: f64, fd_step: f64) -> Result<f64> {
        match self {
            Self::Constant { .. } => Ok(0.0),
            Self::Exponential { gamma, .. } => Ok(-2.0 * gamma),
            Self::Tabulated(_) => {
                Ok(2.0 * self.derivative_with_step(s, fd_step)? / self.eval(s)?)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Exponential { gamma, .. } => *gamma == 0.0,
            Self::Tabulated(table) => {
                let first = table.values[0];
                table.values.iter().all(|&v| v == first)
            }
        }
    }
}

/// Thermal closure of the fluid: `eta0(s) = beta K(s)` with `beta` the
/// squared rms size of the coherent density.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoState {
    beta: f64,
    strength: StrengthProfile,
}

impl ThermoState {
    pub fn new(beta: f64, strength: StrengthProfile) -> Result<Self> {
        require_positive("beta", beta)?;
        Ok(Self { beta, strength })
    }

    /// Isothermal closure with a fixed `eta0` over a constant strength.
    pub fn isothermal(eta0: f64, k0: f64) -> Result<Self> {
        require_positive("eta0", eta0)?;
        require_positive("k0", k0)?;
        Self::new(eta0 / k0, StrengthProfile::constant(k0)?)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn strength(&self) -> &StrengthProfile {
        &self.strength
    }

    pub fn eta0(&self, s: f64) -> Result<f64> {
        Ok(self.beta * self.strength.eval(s)?)
    }

    /// Thermal velocity in units of `c`, `sqrt(eta0)`.
    pub fn v_th_over_c(&self, s: f64) -> Result<f64> {
        Ok(self.eta0(s)?.sqrt())
    }
}

/// Profiles for a dissipative coherent state of size `sigma0`:
/// `K = k0 exp(-2 gamma s)`, `eta0 = sigma0^2 K` and
/// `eps = 2 sigma0^2 sqrt(K)`, so that `K sigma0^4 = eps^2 / 4` for every `s`.
pub fn coupled_dissipative_profiles(
    k0: f64,
    gamma: f64,
    sigma0: f64,
) -> Result<(StrengthProfile, EmittanceProfile, ThermoState)> {
    require_positive("k0", k0)?;
    require_positive("sigma0", sigma0)?;
    require_finite("gamma", gamma)?;
    let strength = StrengthProfile::exponential(k0, gamma)?;
    let emittance = EmittanceProfile::exponential(2.0 * sigma0 * sigma0 * k0.sqrt(), gamma)?;
    let thermo = ThermoState::new(sigma0 * sigma0, strength.clone())?;
    Ok((strength, emittance, thermo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn strength_examples() {
        let c = StrengthProfile::constant(1.0).unwrap();
        assert_eq!(c.eval(3.7).unwrap(), 1.0);
        let e = StrengthProfile::exponential(1.0, 0.05).unwrap();
        assert!(close(e.eval(10.0).unwrap(), (-1.0f64).exp(), 1e-15));
        let t = StrengthProfile::tabulated(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert_eq!(t.eval(1.0).unwrap(), 2.0);
    }

    #[test]
    fn tabulated_strength_refuses_extrapolation() {
        let t = StrengthProfile::tabulated(&[(0.0, 1.0), (2.0, 3.0)]).unwrap();
        assert!(matches!(t.eval(2.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(t.eval(-0.1), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn modulated_strength_must_keep_sign() {
        assert!(StrengthProfile::modulated(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(StrengthProfile::modulated(1.0, -1.2, 1.0, 0.0).is_err());
        assert!(StrengthProfile::modulated(1.0, 0.99, 1.0, 0.0).is_ok());
        assert!(StrengthProfile::exponential(0.0, 0.1).is_err());
    }

    #[test]
    fn emittance_examples() {
        let c = EmittanceProfile::constant(0.02).unwrap();
        assert_eq!(c.eval(123.0).unwrap(), 0.02);
        let e = EmittanceProfile::exponential(0.02, 0.01).unwrap();
        assert!(close(e.eval(100.0).unwrap(), 0.02 * (-1.0f64).exp(), 1e-15));
        let t = EmittanceProfile::tabulated(&[(0.0, 0.02), (10.0, 0.01)]).unwrap();
        assert!(close(t.eval(5.0).unwrap(), 0.015, 1e-15));
    }

    #[test]
    fn nonpositive_tabulated_emittance_is_invalid() {
        let err = EmittanceProfile::tabulated(&[(0.0, 0.02), (1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::InvalidProfile(_)));
        assert!(EmittanceProfile::constant(-1.0).is_err());
    }

    #[test]
    fn gamma_rate_closed_forms() {
        let c = EmittanceProfile::constant(0.02).unwrap();
        assert_eq!(c.gamma_rate(4.0).unwrap(), 0.0);
        let e = EmittanceProfile::exponential(0.02, 0.01).unwrap();
        for s in [0.0, 1.0, 17.5, 300.0] {
            assert_eq!(e.gamma_rate(s).unwrap(), -0.02);
        }
    }

    /// Richardson-extrapolated centered difference, independent of the
    /// profile's own derivative path.
    fn richardson_derivative(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
        let d = |h: f64| (f(s + h) - f(s - h)) / (2.0 * h);
        (4.0 * d(h / 2.0) - d(h)) / 3.0
    }

    #[test]
    fn gamma_rate_tabulated_matches_richardson_oracle() {
        let p = EmittanceProfile::tabulated(&[(0.0, 0.02), (4.0, 0.015), (10.0, 0.01)]).unwrap();
        for s in [0.7, 2.0, 5.5, 9.1] {
            let eps = p.eval(s).unwrap();
            let d = richardson_derivative(|x| p.eval(x).unwrap(), s, 1e-3);
            let oracle = 2.0 * d / eps;
            let got = p.gamma_rate(s).unwrap();
            assert!(close(got, oracle, 1e-6), "s={s}: {got} vs {oracle}");
        }
    }

    #[test]
    fn coupled_profile_examples() {
        let (_, e, _) = coupled_dissipative_profiles(1.0, 0.0, 0.1).unwrap();
        assert!(close(e.eval(7.0).unwrap(), 0.02, 1e-15));
        assert!(e.is_constant());
        let (k, e, _) = coupled_dissipative_profiles(1.0, 0.01, 0.1).unwrap();
        for s in [0.0, 3.0, 50.0] {
            assert!(close(e.gamma_rate(s).unwrap(), -0.02, 1e-15));
            assert!(close(k.log_derivative(s).unwrap(), -0.02, 1e-15));
        }
        let (_, e, _) = coupled_dissipative_profiles(4.0, 0.0, 0.1).unwrap();
        assert!(close(e.eval(0.0).unwrap(), 0.04, 1e-15));
        assert!(coupled_dissipative_profiles(-1.0, 0.0, 0.1).is_err());
        assert!(coupled_dissipative_profiles(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn thermo_state_helpers() {
        let t = ThermoState::isothermal(0.01, 1.0).unwrap();
        assert!(close(t.beta(), 0.01, 1e-15));
        assert!(close(t.v_th_over_c(3.0).unwrap(), 0.1, 1e-15));
        assert!(ThermoState::new(0.0, StrengthProfile::constant(1.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn every_kind_is_positive_and_finite(s in 0.0f64..100.0, g in -0.02f64..0.02) {
            let profiles = [
                EmittanceProfile::constant(0.02).unwrap(),
                EmittanceProfile::exponential(0.02, g).unwrap(),
                EmittanceProfile::tabulated(&[(0.0, 0.02), (50.0, 0.005), (100.0, 0.03)]).unwrap(),
            ];
            for p in &profiles {
                let eps = p.eval(s).unwrap();
                prop_assert!(eps > 0.0 && eps.is_finite());
                prop_assert!(p.gamma_rate(s).unwrap().is_finite());
            }
            let strengths = [
                StrengthProfile::constant(1.0).unwrap(),
                StrengthProfile::modulated(1.0, 0.5, 1.3, 0.2).unwrap(),
                StrengthProfile::exponential(2.0, g).unwrap(),
                StrengthProfile::tabulated(&[(0.0, 1.0), (100.0, 2.0)]).unwrap(),
            ];
            for k in &strengths {
                let v = k.eval(s).unwrap();
                prop_assert!(v.is_finite() && v > 0.0);
            }
        }

        #[test]
        fn exponential_gamma_rate_is_exact(s in -50.0f64..500.0, g in -1.0f64..1.0) {
            let p = EmittanceProfile::exponential(0.02, g).unwrap();
            prop_assert_eq!(p.gamma_rate(s).unwrap(), -2.0 * g);
        }

        #[test]
        fn coupled_eta_equals_sigma_squared_k(s in 0.0f64..200.0, g in 0.0f64..0.05, sigma0 in 0.01f64..1.0) {
            let (k, _, thermo) = coupled_dissipative_profiles(1.5, g, sigma0).unwrap();
            let residual = thermo.eta0(s).unwrap() - sigma0 * sigma0 * k.eval(s).unwrap();
            prop_assert!(residual.abs() <= 4.0 * f64::EPSILON * thermo.eta0(s).unwrap());
        }

        #[test]
        fn tabulated_knots_are_reproduced_exactly(vals in proptest::collection::vec(0.001f64..10.0, 2..12)) {
            let pts: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| (i as f64 * 0.7, v)).collect();
            let p = EmittanceProfile::tabulated(&pts).unwrap();
            let k = StrengthProfile::tabulated(&pts).unwrap();
            for &(s, v) in &pts {
                prop_assert_eq!(p.eval(s).unwrap(), v);
                prop_assert_eq!(k.eval(s).unwrap(), v);
            }
        }
    }
}
