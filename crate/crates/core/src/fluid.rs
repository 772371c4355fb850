//! Isothermal fluid in a quadratic potential:
//!
//! ```text
//! n_s + (n P)_x = 0
//! P_s + P P_x   = -K(s) x - eta0 (ln n)_x
//! ```
//!
//! Continuity is advanced in flux form with limited linear reconstruction and
//! a local Lax-Friedrichs flux, momentum in primitive form with a Godunov
//! Burgers flux; both share a two-stage SSP Runge-Kutta step.

use crate::envelope::GaussianBeamState;
use crate::error::{require_positive, Error, Result};
use crate::grid::GridSpec;
use crate::profiles::StrengthProfile;

/// Regularization applied to densities before a logarithm or a division.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityFloor {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for DensityFloor {
    fn default() -> Self {
        Self {
            absolute: 1e-30,
            relative: 1e-12,
        }
    }
}

impl DensityFloor {
    /// Floor for a density whose maximum is `max_n`.
    pub fn value(&self, max_n: f64) -> f64 {
        self.absolute + self.relative * max_n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Zero-gradient ghost cells.
    #[default]
    Outflow,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSettings {
    pub cfl: f64,
    pub boundary: Boundary,
    pub floor: DensityFloor,
    /// Cells below `vacuum_rel * max n` get their velocity extrapolated
    /// linearly from the edge of the bulk. `None` leaves them free.
    pub vacuum_rel: Option<f64>,
}

impl Default for FluidSettings {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            boundary: Boundary::Outflow,
            floor: DensityFloor::default(),
            vacuum_rel: Some(1e-10),
        }
    }
}

impl FluidSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "cfl",
                reason: format!("must lie in (0, 1], got {}", self.cfl),
            });
        }
        if let Some(v) = self.vacuum_rel {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "vacuum_rel",
                    reason: format!("must lie in (0, 1), got {v}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityKind {
    /// `P = P0` everywhere.
    Uniform,
    /// `P = P0 + (x - x0) sigma'/sigma`.
    Linear,
}

/// Cell-centered density and current velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidFields {
    pub grid: GridSpec,
    pub n: Vec<f64>,
    pub p: Vec<f64>,
    pub s: f64,
}

impl FluidFields {
    pub fn new(grid: GridSpec, n: Vec<f64>, p: Vec<f64>, s: f64) -> Result<Self> {
        for len in [n.len(), p.len()] {
            if len != grid.n_cells {
                return Err(Error::LengthMismatch {
                    left: grid.n_cells,
                    right: len,
                });
            }
        }
        if let Some((cell, &value)) = n.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::Positivity { s, cell, value });
        }
        Ok(Self { grid, n, p, s })
    }

    /// `sum n_j dx`.
    pub fn mass(&self) -> f64 {
        self.n.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn max_density(&self) -> f64 {
        self.n.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_speed(&self) -> f64 {
        self.p.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sampled Gaussian density with unit discrete mass and the chosen velocity.
pub fn init_from_gaussian(
    grid: GridSpec,
    state: &GaussianBeamState,
    velocity: VelocityKind,
) -> Result<FluidFields> {
    require_positive("sigma", state.sigma)?;
    grid.require_covers(state.x0 - 6.0 * state.sigma, state.x0 + 6.0 * state.sigma)?;
    let xs = grid.centers();
    let two_var = 2.0 * state.sigma * state.sigma;
    let mut n: Vec<f64> = xs
        .iter()
        .map(|x| (-(x - state.x0).powi(2) / two_var).exp())
        .collect();
    let mass = n.iter().sum::<f64>() * grid.dx();
    for v in &mut n {
        *v /= mass;
    }
    let p = match velocity {
        VelocityKind::Uniform => vec![state.p0; xs.len()],
        VelocityKind::Linear => {
            let slope = state.inverse_rho();
            xs.iter().map(|x| state.p0 + (x - state.x0) * slope).collect()
        }
    };
    FluidFields::new(grid, n, p, state.s)
}

/// Largest stable step for the given fields and thermal coefficient.
pub fn stable_step(fields: &FluidFields, eta0: f64, cfl: f64) -> f64 {
    cfl * fields.grid.dx() / (fields.max_speed() + eta0.max(0.0).sqrt())
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

const GHOSTS: usize = 2;

/// Copy of `f` padded with two ghost cells on each side.
fn padded(f: &[f64], boundary: Boundary) -> Vec<f64> {
    let n = f.len();
    let mut out = Vec::with_capacity(n + 2 * GHOSTS);
    match boundary {
        Boundary::Outflow => {
            out.extend([f[0]; GHOSTS]);
            out.extend_from_slice(f);
            out.extend([f[n - 1]; GHOSTS]);
        }
        Boundary::Periodic => {
            out.extend_from_slice(&f[n - GHOSTS..]);
            out.extend_from_slice(f);
            out.extend_from_slice(&f[..GHOSTS]);
        }
    }
    out
}

/// Left and right limited states at the `n + 1` interfaces.
fn reconstruct(f: &[f64], boundary: Boundary) -> (Vec<f64>, Vec<f64>) {
    let g = padded(f, boundary);
    let n = f.len();
    // limited slope for padded cells 1..=n+2 (real cells plus one ghost each side)
    let slope = |i: usize| minmod(g[i] - g[i - 1], g[i + 1] - g[i]);
    let mut left = Vec::with_capacity(n + 1);
    let mut right = Vec::with_capacity(n + 1);
    for face in 0..=n {
        // face sits between padded cells GHOSTS-1+face and GHOSTS+face
        let l = GHOSTS - 1 + face;
        let r = l + 1;
        left.push(g[l] + 0.5 * slope(l));
        right.push(g[r] - 0.5 * slope(r));
    }
    (left, right)
}

fn burgers_flux(l: f64, r: f64) -> f64 {
    if l <= r {
        if l > 0.0 {
            0.5 * l * l
        } else if r < 0.0 {
            0.5 * r * r
        } else {
            0.0
        }
    } else {
        // shock: upwind side is the one the shock moves away from
        0.5 * (l * l).max(r * r)
    }
}

/// Replace the velocity in vacuum tails by a linear continuation of the
/// bulk, so that the momentum of the tails cannot drive the bulk.
fn extrapolate_vacuum(n: &[f64], p: &mut [f64], threshold: f64) {
    let len = n.len();
    let Some(lo) = n.iter().position(|&v| v >= threshold) else {
        return;
    };
    let hi = n.iter().rposition(|&v| v >= threshold).unwrap_or(lo);
    const BASE: usize = 4;
    if hi < lo + BASE {
        for j in (0..lo).chain(hi + 1..len) {
            p[j] = p[lo];
        }
        return;
    }
    let left_slope = (p[lo + BASE] - p[lo]) / BASE as f64;
    for j in 0..lo {
        p[j] = p[lo] - (lo - j) as f64 * left_slope;
    }
    let right_slope = (p[hi] - p[hi - BASE]) / BASE as f64;
    for j in hi + 1..len {
        p[j] = p[hi] + (j - hi) as f64 * right_slope;
    }
}

struct Forcing {
    k: f64,
    eta0: f64,
}

/// Time derivatives of `(n, P)`.
fn rates(
    grid: &GridSpec,
    n: &[f64],
    p: &[f64],
    forcing: &Forcing,
    settings: &FluidSettings,
) -> (Vec<f64>, Vec<f64>) {
    let len = n.len();
    let dx = grid.dx();
    let (nl, nr) = reconstruct(n, settings.boundary);
    let (pl, pr) = reconstruct(p, settings.boundary);
    let mut mass_flux = Vec::with_capacity(len + 1);
    let mut mom_flux = Vec::with_capacity(len + 1);
    for f in 0..=len {
        let a = pl[f].abs().max(pr[f].abs());
        mass_flux.push(0.5 * (nl[f] * pl[f] + nr[f] * pr[f]) - 0.5 * a * (nr[f] - nl[f]));
        mom_flux.push(burgers_flux(pl[f], pr[f]));
    }

    let floor = settings.floor.value(n.iter().copied().fold(0.0, f64::max));
    let log_n = padded(
        &n.iter().map(|&v| v.max(floor).ln()).collect::<Vec<_>>(),
        settings.boundary,
    );
    let xs = grid.centers();
    let mut dn = Vec::with_capacity(len);
    let mut dp = Vec::with_capacity(len);
    for j in 0..len {
        dn.push(-(mass_flux[j + 1] - mass_flux[j]) / dx);
        let grad_log = (log_n[j + GHOSTS + 1] - log_n[j + GHOSTS - 1]) / (2.0 * dx);
        dp.push(-(mom_flux[j + 1] - mom_flux[j]) / dx - forcing.k * xs[j] - forcing.eta0 * grad_log);
    }
    (dn, dp)
}

fn check_positive(n: &[f64], s: f64) -> Result<()> {
    match n.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        Some((cell, &value)) => Err(Error::Positivity { s, cell, value }),
        None => Ok(()),
    }
}

/// One SSP-RK2 step of length `ds`. The potential strength is taken at the
/// midpoint `s + ds/2` for both stages; `eta0` is held fixed over the step.
pub fn step(
    fields: &FluidFields,
    strength: &StrengthProfile,
    eta0: f64,
    ds: f64,
    settings: &FluidSettings,
) -> Result<FluidFields> {
    require_positive("ds", ds)?;
    if !(eta0 >= 0.0 && eta0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eta0",
            reason: format!("must be finite and non-negative, got {eta0}"),
        });
    }
    let limit = stable_step(fields, eta0, settings.cfl);
    if ds > limit * (1.0 + 1e-12) {
        return Err(Error::CflViolation { ds, limit });
    }
    let forcing = Forcing {
        k: strength.eval(fields.s + 0.5 * ds)?,
        eta0,
    };
    let grid = fields.grid;
    let vacuum = |n: &[f64], p: &mut [f64]| {
        if let Some(rel) = settings.vacuum_rel {
            let max_n = n.iter().copied().fold(0.0, f64::max);
            extrapolate_vacuum(n, p, rel * max_n);
        }
    };

    let (dn, dp) = rates(&grid, &fields.n, &fields.p, &forcing, settings);
    let n1: Vec<f64> = fields.n.iter().zip(&dn).map(|(n, d)| n + ds * d).collect();
    let mut p1: Vec<f64> = fields.p.iter().zip(&dp).map(|(p, d)| p + ds * d).collect();
    check_positive(&n1, fields.s + ds)?;
    vacuum(&n1, &mut p1);

    let (dn, dp) = rates(&grid, &n1, &p1, &forcing, settings);
    let n2: Vec<f64> = fields
        .n
        .iter()
        .zip(&n1)
        .zip(&dn)
        .map(|((n0, n1), d)| 0.5 * n0 + 0.5 * (n1 + ds * d))
        .collect();
    let mut p2: Vec<f64> = fields
        .p
        .iter()
        .zip(&p1)
        .zip(&dp)
        .map(|((p0, p1), d)| 0.5 * p0 + 0.5 * (p1 + ds * d))
        .collect();
    check_positive(&n2, fields.s + ds)?;
    vacuum(&n2, &mut p2);

    Ok(FluidFields {
        grid,
        n: n2,
        p: p2,
        s: fields.s + ds,
    })
}

/// Advance to `s_end` with the largest stable steps, recording the initial
/// fields and a snapshot every `cadence` (the last one exactly at `s_end`).
pub fn run(
    fields0: &FluidFields,
    strength: &StrengthProfile,
    eta0_of_s: impl Fn(f64) -> Result<f64>,
    s_end: f64,
    cadence: f64,
    settings: &FluidSettings,
) -> Result<Vec<FluidFields>> {
    settings.validate()?;
    require_positive("cadence", cadence)?;
    if !(s_end > fields0.s) {
        return Err(Error::InvalidParameter {
            name: "s_end",
            reason: format!("must exceed the initial s = {}", fields0.s),
        });
    }
    let s0 = fields0.s;
    let n_out = ((s_end - s0) / cadence - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n_out + 1);
    let mut current = fields0.clone();
    out.push(current.clone());
    for i in 1..=n_out {
        let target = if i == n_out { s_end } else { s0 + i as f64 * cadence };
        while current.s < target {
            let remaining = target - current.s;
            // the thermal speed is sampled at both ends of a trial step so
            // a growing eta0 cannot push the midpoint value past the limit
            let trial = stable_step(&current, eta0_of_s(current.s)?, settings.cfl);
            let eta_far = eta0_of_s(current.s + trial.min(remaining))?;
            let mut ds = 0.98 * stable_step(&current, eta0_of_s(current.s)?.max(eta_far), settings.cfl);
            let last = ds >= remaining * (1.0 - 1e-12);
            if last {
                ds = remaining;
            }
            let eta0 = eta0_of_s(current.s + 0.5 * ds)?;
            current = step(&current, strength, eta0, ds, settings)?;
            if last {
                current.s = target;
            }
        }
        out.push(current.clone());
    }
    Ok(out)
}

/// Largest normalized pointwise residual of the momentum equation for given
/// fields and velocity rate `dp_ds`, over cells with `n > 1e-6 max n`.
/// Centered second-order differences throughout.
pub fn momentum_residual(
    fields: &FluidFields,
    dp_ds: &[f64],
    k: f64,
    eta0: f64,
) -> Result<f64> {
    let len = fields.n.len();
    if dp_ds.len() != len {
        return Err(Error::LengthMismatch {
            left: len,
            right: dp_ds.len(),
        });
    }
    let dx = fields.grid.dx();
    let max_n = fields.max_density();
    let xs = fields.grid.centers();
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 1..len - 1 {
        if fields.n[j - 1].min(fields.n[j + 1]) <= 1e-6 * max_n {
            continue;
        }
        let dp_dx = (fields.p[j + 1] - fields.p[j - 1]) / (2.0 * dx);
        let grad_log = (fields.n[j + 1].ln() - fields.n[j - 1].ln()) / (2.0 * dx);
        let pressure = eta0 * grad_log;
        let r = dp_ds[j] + fields.p[j] * dp_dx + k * xs[j] + pressure;
        worst = worst.max(r.abs());
        scale = scale.max(pressure.abs()).max((k * xs[j]).abs());
    }
    if !(scale > 0.0) {
        return Err(Error::InvalidInput("momentum residual has no scale".into()));
    }
    Ok(worst / scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centered(sigma: f64) -> GaussianBeamState {
        GaussianBeamState::new(0.0, 0.0, 0.0, sigma, 0.0).unwrap()
    }

    #[test]
    fn initial_mass_is_unity() {
        let g = GridSpec::symmetric(1.0, 1024).unwrap();
        let f = init_from_gaussian(g, &centered(0.1), VelocityKind::Uniform).unwrap();
        assert!((f.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_kinds() {
        let g = GridSpec::new(-1.0, 1.0, 1000).unwrap();
        let st = GaussianBeamState::new(0.0, 0.0, 0.05, 0.1, 0.0).unwrap();
        let f = init_from_gaussian(g, &st, VelocityKind::Uniform).unwrap();
        assert!(f.p.iter().all(|&p| p == 0.05));
        let st = GaussianBeamState::new(0.0, 0.0, 0.0, 0.1, 0.03).unwrap();
        let f = init_from_gaussian(g, &st, VelocityKind::Linear).unwrap();
        // cell 600 is centered on x = 0.201
        let x = g.x(600);
        assert!((f.p[600] - 0.3 * x).abs() < 1e-15);
        assert!((0.3 * 0.2f64 - 0.06).abs() < 1e-15);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let g = GridSpec::symmetric(0.5, 256).unwrap();
        assert!(matches!(
            init_from_gaussian(g, &centered(0.1), VelocityKind::Uniform),
            Err(Error::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn uniform_periodic_state_is_static() {
        let g = GridSpec::symmetric(1.0, 64).unwrap();
        let f = FluidFields::new(g, vec![0.5; 64], vec![0.0; 64], 0.0).unwrap();
        let settings = FluidSettings {
            boundary: Boundary::Periodic,
            ..FluidSettings::default()
        };
        let k = StrengthProfile::constant(0.0).unwrap();
        let next = step(&f, &k, 0.01, 0.001, &settings).unwrap();
        assert_eq!(next.n, f.n);
        assert_eq!(next.p, f.p);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = GridSpec::symmetric(1.0, 256).unwrap();
        let f = init_from_gaussian(g, &centered(0.1), VelocityKind::Uniform).unwrap();
        let k = StrengthProfile::constant(1.0).unwrap();
        assert!(matches!(
            step(&f, &k, 0.01, 1.0, &FluidSettings::default()),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn pressure_expands_symmetrically() {
        let g = GridSpec::symmetric(1.0, 512).unwrap();
        let mut f = init_from_gaussian(g, &centered(0.1), VelocityKind::Uniform).unwrap();
        let k = StrengthProfile::constant(0.0).unwrap();
        let settings = FluidSettings::default();
        let eta0 = 0.01;
        let var = |f: &FluidFields| {
            let xs = f.grid.centers();
            xs.iter().zip(&f.n).map(|(x, n)| x * x * n).sum::<f64>() * f.grid.dx()
        };
        let mut last = var(&f);
        for _ in 0..100 {
            let ds = stable_step(&f, eta0, settings.cfl);
            f = step(&f, &k, eta0, ds, &settings).unwrap();
            let v = var(&f);
            assert!(v > last);
            last = v;
        }
        let mean: f64 = f.grid.centers().iter().zip(&f.n).map(|(x, n)| x * n).sum::<f64>() * g.dx();
        assert!(mean.abs() < 1e-6);
    }

    #[test]
    fn burgers_flux_cases() {
        assert_eq!(burgers_flux(1.0, 2.0), 0.5);
        assert_eq!(burgers_flux(-2.0, -1.0), 0.5);
        assert_eq!(burgers_flux(-1.0, 1.0), 0.0);
        assert_eq!(burgers_flux(2.0, -1.0), 2.0);
        assert_eq!(burgers_flux(1.0, -3.0), 4.5);
    }

    #[test]
    fn vacuum_velocity_follows_bulk_line() {
        let n = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0];
        let mut p = [9.0, 9.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, -9.0];
        extrapolate_vacuum(&n, &mut p, 0.5);
        assert_eq!(p, [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn matched_state_run_conserves_mass() {
        let g = GridSpec::symmetric(1.0, 512).unwrap();
        let st = GaussianBeamState::new(0.0, 0.05, 0.0, 0.1, 0.0).unwrap();
        let f = init_from_gaussian(g, &st, VelocityKind::Uniform).unwrap();
        let k = StrengthProfile::constant(1.0).unwrap();
        let snaps = run(&f, &k, |_| Ok(0.01), 2.0 * std::f64::consts::PI, 1.0, &FluidSettings::default())
            .unwrap();
        assert_eq!(snaps.len(), 8);
        let last = snaps.last().unwrap();
        assert_eq!(last.s, 2.0 * std::f64::consts::PI);
        assert!((last.mass() - 1.0).abs() < 1e-8);
    }
}
