//! Scenario pipelines and their output files.
//!
//! Every run writes `trajectory.csv` (envelope ODE) and `summary.json`.
//! Scenarios that evolve fields also write `diagnostics.csv` and snapshot
//! files under `snapshots/`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use quadfluid::coherent::coherent_density;
use quadfluid::diagnostics::{
    emittance, l2_distance_recentered, moments_from_wave, sigma_p_envelope,
};
use quadfluid::envelope::{current_velocity_residual, energy_balance_residual, integrate};
use quadfluid::fluid::{self, FluidSettings, VelocityKind};
use quadfluid::qsolver::{classicality_residual, eta_from_envelope, madelung_decompose};
use quadfluid::{
    CoherentSpec, DiagnosticsRecord, EmittanceProfile, FluidFields, GaussianBeamState,
    QuantumPropagator, StrengthProfile, WaveField,
};
use serde::Serialize;

use crate::config::{Scenario, ScenarioConfig};

/// Sample spacing for the finite-difference balance residuals.
const RESIDUAL_CADENCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metric {
    pub name: &'static str,
    /// Acceptance criterion the metric belongs to.
    pub criterion: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Metric {
    fn below(criterion: &'static str, name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            criterion,
            value,
            threshold,
            bound: Bound::Below,
            pass: value < threshold,
        }
    }

    fn above(criterion: &'static str, name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            criterion,
            value,
            threshold,
            bound: Bound::Above,
            pass: value > threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: Scenario,
    pub metrics: Vec<Metric>,
    pub final_sigma: f64,
    /// Files written, relative to the output directory.
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.metrics.iter().all(|m| m.pass)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{scenario}: {stage}: {source}")]
    Solver {
        scenario: &'static str,
        stage: &'static str,
        source: quadfluid::Error,
    },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'static str,
    status: &'static str,
    s_end: f64,
    final_sigma: f64,
    metrics: &'a [Metric],
}

/// Writes files under one directory and remembers what it wrote.
struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir.join("snapshots")).map_err(|source| RunError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: impl Into<PathBuf>, contents: &str) -> Result<(), RunError> {
        let name = name.into();
        let path = self.dir.join(&name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path, source })?;
        self.files.push(name);
        Ok(())
    }
}

/// Pipeline context: attaches the scenario name and stage to core errors.
struct Stage {
    scenario: &'static str,
}

impl Stage {
    fn at<T>(&self, stage: &'static str, r: quadfluid::Result<T>) -> Result<T, RunError> {
        r.map_err(|source| RunError::Solver {
            scenario: self.scenario,
            stage,
            source,
        })
    }
}

fn trajectory_csv(traj: &[GaussianBeamState]) -> String {
    let mut out = String::from("s,x0,p0,sigma,dsigma,chi\n");
    for t in traj {
        let _ = writeln!(out, "{:e},{:e},{:e},{:e},{:e},{:e}", t.s, t.x0, t.p0, t.sigma, t.dsigma, t.chi);
    }
    out
}

fn diagnostics_csv(rows: &[DiagnosticsRecord]) -> String {
    let mut out = String::from("s,norm,mean_x,sigma,sigma_p,xp_corr,emit_rms,energy\n");
    for r in rows {
        let energy = r.energy.map_or(String::new(), |e| format!("{e:e}"));
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{energy}",
            r.s, r.norm, r.mean_x, r.sigma, r.sigma_p, r.xp_corr, r.emit_rms
        );
    }
    out
}

fn fluid_snapshot_csv(index: usize, f: &FluidFields) -> String {
    let mut out = format!("# snapshot {index} s = {:e}\nx,n,P\n", f.s);
    for (j, x) in f.grid.centers().iter().enumerate() {
        let _ = writeln!(out, "{x:e},{:e},{:e}", f.n[j], f.p[j]);
    }
    out
}

/// Wave snapshot; `P` is the current velocity where the phase is resolved
/// and `NaN` in the vacuum.
fn wave_snapshot_csv(index: usize, field: &WaveField, alpha: f64) -> quadfluid::Result<String> {
    let m = madelung_decompose(field, alpha)?;
    let mut out = format!("# snapshot {index} s = {:e}\nx,re_psi,im_psi,n,P\n", field.s);
    for (j, x) in field.grid.centers().iter().enumerate() {
        let p = if m.valid[j] { m.p[j] } else { f64::NAN };
        let z = field.psi[j];
        let _ = writeln!(out, "{x:e},{:e},{:e},{:e},{p:e}", z.re, z.im, z.norm_sqr());
    }
    Ok(out)
}

fn keep_snapshot(stride: Option<usize>, index: usize, last: usize) -> bool {
    index == last || stride.map_or(index == 0, |every| index.is_multiple_of(every))
}

/// Spacing of snapshots in units of diagnostic samples, `None` for first
/// and last only.
fn snapshot_stride(cfg: &ScenarioConfig) -> Option<usize> {
    cfg.snapshot_cadence
        .map(|c| ((c / cfg.output_cadence).round() as usize).max(1))
}

struct WaveRun {
    rows: Vec<DiagnosticsRecord>,
    last: WaveField,
    steps: usize,
}

impl WaveRun {
    /// Norm drift against its allowance of `1e-10` per `1e4` steps.
    fn norm_metric(&self) -> Metric {
        let allowance = 1e-10 * (self.steps as f64 / 1e4).max(1.0);
        Metric::below("8", "wave norm drift", norm_drift(&self.rows), allowance)
    }
}

/// Number of split steps `QuantumPropagator::evolve` takes for this run.
fn wave_steps(cfg: &ScenarioConfig) -> usize {
    let n_out = (cfg.s_end / cfg.output_cadence - 1e-9).ceil().max(1.0) as usize;
    let mut s = 0.0;
    let mut steps = 0;
    for i in 1..=n_out {
        let target = if i == n_out { cfg.s_end } else { i as f64 * cfg.output_cadence };
        steps += ((target - s) / cfg.quantum.ds - 1e-9).ceil().max(1.0) as usize;
        s = target;
    }
    steps
}

fn run_wave(
    cfg: &ScenarioConfig,
    st: &Stage,
    out: &mut Output,
    init: &GaussianBeamState,
) -> Result<WaveRun, RunError> {
    let (k, e) = (&cfg.strength, &cfg.emittance);
    let alpha0 = st.at("initial wave", e.eval(0.0))?;
    let field = st.at(
        "initial wave",
        WaveField::gaussian(cfg.grid, init, alpha0, cfg.quantum.convention),
    )?;
    let stride = snapshot_stride(cfg);
    let n_out = ((cfg.s_end / cfg.output_cadence) - 1e-9).ceil().max(1.0) as usize;
    let mut rows = Vec::new();
    let mut io_failure = None;
    let prop = QuantumPropagator::new(cfg.grid);
    let evolved = prop.evolve(&field, k, e, cfg.s_end, cfg.quantum.ds, cfg.output_cadence, |f| {
        let alpha = e.eval(f.s)?;
        let m = moments_from_wave(f, alpha)?;
        let index = rows.len();
        rows.push(m.record.with_energy(k.eval(f.s)?, m.mean_p));
        if keep_snapshot(stride, index, n_out) {
            let text = wave_snapshot_csv(index, f, alpha)?;
            if let Err(err) = out.write(format!("snapshots/wave_{index:04}.csv"), &text) {
                io_failure = Some(err);
                return Err(quadfluid::Error::InvalidInput("snapshot could not be written".into()));
            }
        }
        Ok(())
    });
    if let Some(err) = io_failure {
        return Err(err);
    }
    let last = st.at("wave solver", evolved)?;
    out.write("diagnostics.csv", &diagnostics_csv(&rows))?;
    Ok(WaveRun {
        rows,
        last,
        steps: wave_steps(cfg),
    })
}

fn fluid_snapshots(cfg: &ScenarioConfig, out: &mut Output, snaps: &[FluidFields]) -> Result<(), RunError> {
    let stride = snapshot_stride(cfg);
    let last = snaps.len() - 1;
    for (index, f) in snaps.iter().enumerate() {
        if keep_snapshot(stride, index, last) {
            out.write(format!("snapshots/fluid_{index:04}.csv"), &fluid_snapshot_csv(index, f))?;
        }
    }
    Ok(())
}

fn max_over<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().fold(0.0f64, |m, t| m.max(f(t)))
}

fn sigma_deviation(traj: &[GaussianBeamState], sigma0: f64) -> f64 {
    max_over(traj, |t| (t.sigma - sigma0).abs()) / sigma0
}

fn wave_sigma_deviation(rows: &[DiagnosticsRecord], sigma0: f64) -> f64 {
    max_over(rows, |r| (r.sigma - sigma0).abs()) / sigma0
}

fn norm_drift(rows: &[DiagnosticsRecord]) -> f64 {
    max_over(rows, |r| (r.norm - 1.0).abs())
}

fn wave_emittance_deviation(rows: &[DiagnosticsRecord], e: &EmittanceProfile) -> quadfluid::Result<f64> {
    rows.iter().try_fold(0.0f64, |m, r| {
        let alpha = e.eval(r.s)?;
        Ok(m.max((r.emit_rms - alpha).abs() / alpha))
    })
}

/// Emittance rebuilt from the envelope second moments against the profile.
fn envelope_emittance_deviation(traj: &[GaussianBeamState], e: &EmittanceProfile) -> quadfluid::Result<f64> {
    traj.iter().try_fold(0.0f64, |m, t| {
        let eps = e.eval(t.s)?;
        let sp = sigma_p_envelope(t.sigma, t.dsigma, eps)?;
        let rebuilt = emittance(t.sigma * t.sigma, sp * sp, t.sigma * t.dsigma)?;
        Ok(m.max((rebuilt - eps).abs() / eps))
    })
}

/// `max |sigma sigma_P - eps/2|` along the envelope.
fn envelope_uncertainty_gap(traj: &[GaussianBeamState], eps: f64) -> quadfluid::Result<f64> {
    traj.iter().try_fold(0.0f64, |m, t| {
        Ok(m.max((t.sigma * sigma_p_envelope(t.sigma, t.dsigma, eps)? - 0.5 * eps).abs()))
    })
}

fn constant_emittance(cfg: &ScenarioConfig) -> f64 {
    match cfg.emittance {
        EmittanceProfile::Constant { eps0 } => eps0,
        _ => unreachable!("the configuration requires a constant emittance"),
    }
}

fn constant_strength(cfg: &ScenarioConfig) -> f64 {
    match cfg.strength {
        StrengthProfile::Constant { k0 } => k0,
        _ => unreachable!("the configuration requires a constant strength"),
    }
}

/// Worst classicality residual over `states` with `eta0` from the envelope,
/// scaled by `eta_factor`.
fn classicality(
    cfg: &ScenarioConfig,
    states: &[GaussianBeamState],
    eta_factor: f64,
    worst: fn(f64, f64) -> f64,
    start: f64,
) -> quadfluid::Result<f64> {
    let e = &cfg.emittance;
    states.iter().try_fold(start, |acc, t| {
        let (alpha, dalpha) = (e.eval(t.s)?, e.derivative(t.s)?);
        let field = WaveField::gaussian(cfg.grid, t, alpha, cfg.quantum.convention)?;
        let eta0 = eta_factor * eta_from_envelope(t.sigma, t.dsigma, alpha, dalpha);
        Ok(worst(acc, classicality_residual(&field, alpha, dalpha, eta0)?))
    })
}

/// Up to `count` evenly strided samples of a trajectory.
fn sample(traj: &[GaussianBeamState], count: usize) -> Vec<GaussianBeamState> {
    let stride = traj.len().div_ceil(count).max(1);
    traj.iter().step_by(stride).copied().collect()
}

fn matched_coherent(
    cfg: &ScenarioConfig,
    st: &Stage,
    out: &mut Output,
    traj: &[GaussianBeamState],
    metrics: &mut Vec<Metric>,
) -> Result<(), RunError> {
    let b = cfg.beam;
    let (k0, eps) = (constant_strength(cfg), constant_emittance(cfg));
    let omega = k0.sqrt();
    let centroid = max_over(traj, |t| {
        (t.x0 - (b.x0 * (omega * t.s).cos() + b.p0 / omega * (omega * t.s).sin())).abs()
    });
    metrics.push(Metric::below("1", "ode max relative sigma deviation", sigma_deviation(traj, b.sigma0), 1e-6));
    metrics.push(Metric::below("1", "ode max centroid error", centroid, 1e-8));
    let gap = st.at("uncertainty", envelope_uncertainty_gap(traj, eps))?;
    metrics.push(Metric::below("7", "ode max |sigma sigma_P - eps/2|", gap, 1e-6));

    let wave = run_wave(cfg, st, out, &traj[0])?;
    metrics.push(Metric::below(
        "1",
        "wave max relative sigma deviation",
        wave_sigma_deviation(&wave.rows, b.sigma0),
        1e-3,
    ));
    let end = traj[traj.len() - 1];
    let exact: Vec<f64> = cfg.grid.centers().iter().map(|&x| coherent_density(x, &end)).collect();
    let l2 = st.at("density distance", l2_distance_recentered(&exact, &wave.last.density(), &cfg.grid))?;
    metrics.push(Metric::below("1", "wave recentered density L2 at s_end", l2, 1e-3));
    let emit = st.at("wave moments", wave_emittance_deviation(&wave.rows, &cfg.emittance))?;
    metrics.push(Metric::below("3", "wave max relative emittance deviation", emit, 1e-4));
    let wave_gap = max_over(&wave.rows, |r| (r.sigma * r.sigma_p - 0.5 * r.emit_rms).abs());
    metrics.push(Metric::below("7", "wave max |sigma sigma_P - eps/2|", wave_gap, 1e-6));
    metrics.push(wave.norm_metric());
    Ok(())
}

fn mismatched_breathing(
    cfg: &ScenarioConfig,
    st: &Stage,
    out: &mut Output,
    traj: &[GaussianBeamState],
    metrics: &mut Vec<Metric>,
) -> Result<(), RunError> {
    let eps = constant_emittance(cfg);
    let envelope_emit = st.at("envelope moments", envelope_emittance_deviation(traj, &cfg.emittance))?;
    metrics.push(Metric::below("3", "ode max relative emittance deviation", envelope_emit, 1e-8));

    let probes = sample(traj, 8);
    let residual = st.at("classicality", classicality(cfg, &probes, 1.0, f64::max, 0.0))?;
    metrics.push(Metric::below("5", "max classicality residual", residual, 1e-5));
    let control = st.at("classicality", classicality(cfg, &probes, 2.0, f64::min, f64::INFINITY))?;
    metrics.push(Metric::above("5", "min classicality residual with doubled eta0", control, 0.4));

    // strict excess away from the turning points, against its closed form
    let breathing: Vec<usize> = (0..traj.len()).filter(|&i| traj[i].dsigma.abs() > 1e-3).collect();
    if !breathing.is_empty() {
        let mut min_ratio = f64::INFINITY;
        for &i in &breathing {
            let t = traj[i];
            let sp = st.at("uncertainty", sigma_p_envelope(t.sigma, t.dsigma, eps))?;
            let scale = (t.sigma * t.dsigma).powi(2) / (t.sigma * sp + 0.5 * eps);
            min_ratio = min_ratio.min((t.sigma * sp - 0.5 * eps) / scale);
        }
        metrics.push(Metric::above("7", "ode min uncertainty excess / closed-form scale", min_ratio, 0.999));
    }

    let wave = run_wave(cfg, st, out, &traj[0])?;
    let emit = st.at("wave moments", wave_emittance_deviation(&wave.rows, &cfg.emittance))?;
    metrics.push(Metric::below("3", "wave max relative emittance deviation", emit, 1e-4));
    if !breathing.is_empty() {
        let excess = breathing
            .iter()
            .filter_map(|&i| wave.rows.get(i))
            .fold(f64::INFINITY, |m, r| m.min(r.uncertainty_excess()));
        metrics.push(Metric::above("7", "wave min uncertainty excess", excess, 0.0));
    }
    let amplitude = max_over(traj, |t| t.x0.abs());
    let scale = if amplitude > 0.0 { amplitude } else { cfg.beam.sigma0 };
    let ehrenfest = wave
        .rows
        .iter()
        .zip(traj)
        .fold(0.0f64, |m, (r, t)| m.max((r.mean_x - t.x0).abs()))
        / scale;
    metrics.push(Metric::below("9", "wave centroid vs ode centroid (relative)", ehrenfest, 1e-4));
    metrics.push(wave.norm_metric());
    Ok(())
}

fn dissipative_coherent(
    cfg: &ScenarioConfig,
    st: &Stage,
    out: &mut Output,
    traj: &[GaussianBeamState],
    metrics: &mut Vec<Metric>,
) -> Result<(), RunError> {
    let b = cfg.beam;
    let StrengthProfile::Exponential { k0, gamma } = cfg.strength else {
        unreachable!("the configuration requires an exponential strength");
    };
    let spec = st.at("coherent state", CoherentSpec::dissipative(k0, gamma, b.sigma0, b.x0, b.p0))?;
    let samples: Vec<f64> = (0..100).map(|i| cfg.s_end * i as f64 / 99.0).collect();
    let existence = st.at("rate check", spec.existence_residual(&samples))?;
    metrics.push(Metric::below("4", "max |Gamma - K'/K| over 100 samples", existence, 1e-12));
    metrics.push(Metric::below("4", "ode max relative sigma deviation", sigma_deviation(traj, b.sigma0), 1e-6));

    let (k, e) = (&cfg.strength, &cfg.emittance);
    let fine = st.at(
        "envelope ODE",
        integrate(&traj[0], k, e, cfg.s_end, &cfg.ode.with_cadence(RESIDUAL_CADENCE)),
    )?;
    let energy = st.at("energy balance", energy_balance_residual(&fine, k, e))?;
    metrics.push(Metric::below("4", "energy-balance residual", energy, 1e-4));
    let current = st.at("current velocity", current_velocity_residual(&fine, k, e))?;
    metrics.push(Metric::below("4", "current-velocity residual", current, 1e-4));

    let wave = run_wave(cfg, st, out, &traj[0])?;
    metrics.push(Metric::below(
        "4",
        "wave max relative sigma deviation",
        wave_sigma_deviation(&wave.rows, b.sigma0),
        1e-3,
    ));
    metrics.push(wave.norm_metric());
    Ok(())
}

fn free_expansion(
    cfg: &ScenarioConfig,
    st: &Stage,
    out: &mut Output,
    traj: &[GaussianBeamState],
    metrics: &mut Vec<Metric>,
) -> Result<(), RunError> {
    let eps = constant_emittance(cfg);
    let sigma0 = cfg.beam.sigma0;
    let closed = |s: f64| sigma0 * (1.0 + eps * eps * s * s / (4.0 * sigma0.powi(4))).sqrt();
    metrics.push(Metric::below(
        "2",
        "ode max |sigma - closed form|",
        max_over(traj, |t| (t.sigma - closed(t.s)).abs()),
        1e-6,
    ));
    let wave = run_wave(cfg, st, out, &traj[0])?;
    metrics.push(Metric::below(
        "2",
        "wave max |sigma - closed form|",
        max_over(&wave.rows, |r| (r.sigma - closed(r.s)).abs()),
        1e-4,
    ));
    let emit = st.at("wave moments", wave_emittance_deviation(&wave.rows, &cfg.emittance))?;
    metrics.push(Metric::below("3", "wave max relative emittance deviation", emit, 1e-4));
    metrics.push(wave.norm_metric());
    Ok(())
}

fn fluid_vs_quantum(
    cfg: &ScenarioConfig,
    st: &Stage,
    out: &mut Output,
    traj: &[GaussianBeamState],
    metrics: &mut Vec<Metric>,
) -> Result<(), RunError> {
    let eta0 = cfg.beam.sigma0.powi(2) * constant_strength(cfg);
    let f0 = st.at("initial fluid", fluid::init_from_gaussian(cfg.grid, &traj[0], VelocityKind::Uniform))?;
    let settings = FluidSettings {
        cfl: cfg.fluid.cfl,
        ..FluidSettings::default()
    };
    let snaps = st.at(
        "fluid solver",
        fluid::run(&f0, &cfg.strength, |_| Ok(eta0), cfg.s_end, cfg.output_cadence, &settings),
    )?;
    fluid_snapshots(cfg, out, &snaps)?;
    let mass0 = f0.mass();
    let mass_drift = max_over(&snaps, |f| (f.mass() - mass0).abs());

    let ends = [traj[0], traj[traj.len() - 1]];
    let residual = st.at("classicality", classicality(cfg, &ends, 1.0, f64::max, 0.0))?;
    metrics.push(Metric::below("5", "max classicality residual", residual, 1e-5));

    let wave = run_wave(cfg, st, out, &traj[0])?;
    let fluid_end = &snaps[snaps.len() - 1];
    let l2 = st.at(
        "density distance",
        l2_distance_recentered(&wave.last.density(), &fluid_end.n, &cfg.grid),
    )?;
    metrics.push(Metric::below("6", "recentered L2 fluid vs wave density at s_end", l2, 1e-2));
    metrics.push(Metric::below("8", "fluid mass drift", mass_drift, 1e-8));
    metrics.push(wave.norm_metric());
    Ok(())
}

fn envelope_only(
    cfg: &ScenarioConfig,
    st: &Stage,
    traj: &[GaussianBeamState],
    metrics: &mut Vec<Metric>,
) -> Result<(), RunError> {
    let emit = st.at("envelope moments", envelope_emittance_deviation(traj, &cfg.emittance))?;
    metrics.push(Metric::below("3", "ode max relative emittance deviation", emit, 1e-8));
    Ok(())
}

/// Run one scenario, writing its artifacts to `cfg.output_dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport, RunError> {
    let st = Stage {
        scenario: cfg.scenario.name(),
    };
    let mut out = Output::create(&cfg.output_dir)?;
    let b = cfg.beam;
    let init = st.at("initial state", GaussianBeamState::new(0.0, b.x0, b.p0, b.sigma0, b.dsigma0))?;
    let ode = cfg.ode.with_cadence(cfg.output_cadence);
    let traj = st.at(
        "envelope ODE",
        integrate(&init, &cfg.strength, &cfg.emittance, cfg.s_end, &ode),
    )?;
    out.write("trajectory.csv", &trajectory_csv(&traj))?;

    let mut metrics = Vec::new();
    match cfg.scenario {
        Scenario::MatchedCoherent => matched_coherent(cfg, &st, &mut out, &traj, &mut metrics)?,
        Scenario::MismatchedBreathing => mismatched_breathing(cfg, &st, &mut out, &traj, &mut metrics)?,
        Scenario::DissipativeCoherent => dissipative_coherent(cfg, &st, &mut out, &traj, &mut metrics)?,
        Scenario::FreeExpansion => free_expansion(cfg, &st, &mut out, &traj, &mut metrics)?,
        Scenario::FluidVsQuantum => fluid_vs_quantum(cfg, &st, &mut out, &traj, &mut metrics)?,
        Scenario::EnvelopeOnly => envelope_only(cfg, &st, &traj, &mut metrics)?,
    }

    let final_sigma = traj[traj.len() - 1].sigma;
    let mut report = RunReport {
        scenario: cfg.scenario,
        metrics,
        final_sigma,
        files: Vec::new(),
    };
    let summary = Summary {
        scenario: cfg.scenario.name(),
        status: if report.passed() { "pass" } else { "fail" },
        s_end: cfg.s_end,
        final_sigma,
        metrics: &report.metrics,
    };
    let mut json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    json.push('\n');
    out.write("summary.json", &json)?;
    report.files = out.files;
    Ok(report)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn snapshots_keep_ends_and_stride() {
        let kept: Vec<usize> = (0..=10).filter(|&i| keep_snapshot(Some(4), i, 10)).collect();
        assert_eq!(kept, [0, 4, 8, 10]);
        let ends: Vec<usize> = (0..=10).filter(|&i| keep_snapshot(None, i, 10)).collect();
        assert_eq!(ends, [0, 10]);
    }

    #[test]
    fn step_count_matches_the_propagator() {
        let mut cfg = parse_config("scenario = \"free_expansion\"\ns_end = 1.0\noutput_cadence = 0.3\n").unwrap();
        cfg.quantum.ds = 0.04;
        // intervals 0.3, 0.3, 0.3, 0.1
        assert_eq!(wave_steps(&cfg), 8 + 8 + 8 + 3);
    }

    #[test]
    fn csv_headers() {
        let st = GaussianBeamState::new(0.5, 0.1, 0.0, 0.2, 0.0).unwrap();
        let text = trajectory_csv(&[st]);
        assert_eq!(text, "s,x0,p0,sigma,dsigma,chi\n5e-1,1e-1,0e0,2e-1,0e0,0e0\n");
        let row = DiagnosticsRecord {
            s: 0.0,
            norm: 1.0,
            mean_x: 0.0,
            sigma: 0.1,
            sigma_p: 0.1,
            xp_corr: 0.0,
            emit_rms: 0.02,
            energy: None,
        };
        let text = diagnostics_csv(&[row]);
        assert!(text.starts_with("s,norm,mean_x,sigma,sigma_p,xp_corr,emit_rms,energy\n"));
        assert!(text.ends_with(",2e-2,\n"));
    }

    #[test]
    fn norm_allowance_scales_with_steps() {
        let wave = |steps| WaveRun {
            rows: Vec::new(),
            last: WaveField::from_fn(quadfluid::GridSpec::symmetric(1.0, 16).unwrap(), 0.0, |_| 0.0.into()),
            steps,
        };
        assert_eq!(wave(500).norm_metric().threshold, 1e-10);
        assert_eq!(wave(30_000).norm_metric().threshold, 3e-10);
    }
}
