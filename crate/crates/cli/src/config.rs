//! Scenario configuration files.
//!
//! The syntax is TOML. Parsing never stops at the first problem: every
//! malformed, missing, unknown or out-of-range key is collected with its
//! line and column so that one pass through `validate` shows them all.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use quadfluid::coherent::{matched_sigma, MATCHING_TOLERANCE};
use quadfluid::profiles::coupled_dissipative_profiles;
use quadfluid::{EmittanceProfile, GridSpec, OdeMethod, OdeSettings, PhaseConvention, StrengthProfile};
use toml::de::{DeTable, DeValue};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    MatchedCoherent,
    MismatchedBreathing,
    DissipativeCoherent,
    FreeExpansion,
    FluidVsQuantum,
    EnvelopeOnly,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::MatchedCoherent,
        Scenario::MismatchedBreathing,
        Scenario::DissipativeCoherent,
        Scenario::FreeExpansion,
        Scenario::FluidVsQuantum,
        Scenario::EnvelopeOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MatchedCoherent => "matched_coherent",
            Self::MismatchedBreathing => "mismatched_breathing",
            Self::DissipativeCoherent => "dissipative_coherent",
            Self::FreeExpansion => "free_expansion",
            Self::FluidVsQuantum => "fluid_vs_quantum",
            Self::EnvelopeOnly => "envelope_only",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::MatchedCoherent => {
                "matched Gaussian in a constant well, envelope ODE and wave solver"
            }
            Self::MismatchedBreathing => {
                "Gaussian off the matched size under any strength: breathing, emittance, uncertainty, centroid"
            }
            Self::DissipativeCoherent => {
                "coherent state with K = K0 exp(-2 gamma s) and the matched decaying emittance"
            }
            Self::FreeExpansion => "Gaussian spreading with K = 0 against the closed-form width",
            Self::FluidVsQuantum => "matched state evolved by the fluid and the wave solver side by side",
            Self::EnvelopeOnly => "envelope ODE alone for arbitrary strength and emittance profiles",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Initial Gaussian beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub sigma0: f64,
    pub dsigma0: f64,
    pub x0: f64,
    pub p0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumSpec {
    pub ds: f64,
    pub convention: PhaseConvention,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidSpec {
    pub cfl: f64,
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub strength: StrengthProfile,
    pub emittance: EmittanceProfile,
    pub beam: BeamSpec,
    pub grid: GridSpec,
    pub ode: OdeSettings,
    pub fluid: FluidSpec,
    pub quantum: QuantumSpec,
    pub s_end: f64,
    pub output_cadence: f64,
    /// Spacing of field snapshots; `None` keeps only the first and last.
    pub snapshot_cadence: Option<f64>,
    pub output_dir: PathBuf,
    /// Reserved; every scenario is deterministic.
    pub seed: u64,
}

pub const DEFAULT_CFL: f64 = 0.4;
pub const DEFAULT_QUANTUM_STEP: f64 = 1e-3;
pub const DEFAULT_CADENCE: f64 = 0.1;
pub const DEFAULT_STRENGTH: f64 = 1.0;
pub const DEFAULT_EMITTANCE: f64 = 0.02;
pub const DEFAULT_SIGMA: f64 = 0.1;
pub const DEFAULT_OUTPUT_DIR: &str = "output";

/// ODE settings used for keys the `[ode]` table leaves out.
pub fn default_ode() -> OdeSettings {
    OdeSettings {
        abs_tol: 1e-14,
        rel_tol: 1e-12,
        ..OdeSettings::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, empty for document-level problems.
    pub key: String,
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}:{}: {}", self.line, self.column, self.message)
        } else {
            write!(f, "{}:{}: `{}`: {}", self.line, self.column, self.key, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

/// A table together with its key path and location.
struct Section<'t, 'i> {
    path: String,
    table: &'t DeTable<'i>,
    span: Range<usize>,
}

impl<'t, 'i> Section<'t, 'i> {
    fn get(&self, key: &str) -> Option<&'t Spanned<DeValue<'i>>> {
        self.table.get(key)
    }

    fn has(&self, key: &str) -> bool {
        self.table.get(key).is_some()
    }

    fn key(&self, key: &str) -> String {
        join(&self.path, key)
    }

    /// Span of `key` if present, otherwise of the table.
    fn span_of(&self, key: &str) -> Range<usize> {
        self.get(key).map_or(self.span.clone(), |v| v.span())
    }
}

struct Ctx<'a> {
    text: &'a str,
    errors: Vec<ConfigError>,
}

impl Ctx<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    }

    fn error(&mut self, key: &str, span: Range<usize>, message: impl Into<String>) {
        let (line, column) = self.position(span.start);
        self.errors.push(ConfigError {
            key: key.to_string(),
            message: message.into(),
            line,
            column,
        });
    }

    fn reject_unknown(&mut self, sec: &Section<'_, '_>, allowed: &[&str]) {
        for (key, _) in sec.table.iter() {
            let name: &str = key.get_ref();
            if !allowed.contains(&name) {
                self.error(
                    &sec.key(name),
                    key.span(),
                    format!("unknown key (expected one of: {})", allowed.join(", ")),
                );
            }
        }
    }

    fn missing(&mut self, sec: &Section<'_, '_>, key: &str) {
        self.error(&sec.key(key), sec.span.clone(), "missing required key");
    }

    fn table<'t, 'i>(&mut self, sec: &Section<'t, 'i>, key: &str) -> Option<Section<'t, 'i>> {
        let value = sec.get(key)?;
        match value.get_ref() {
            DeValue::Table(t) => Some(Section {
                path: sec.key(key),
                table: t,
                span: value.span(),
            }),
            other => {
                self.error(
                    &sec.key(key),
                    value.span(),
                    format!("expected a table, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn number_value(&mut self, key: &str, value: &Spanned<DeValue<'_>>) -> Option<f64> {
        let parsed = match value.get_ref() {
            DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix()).ok().map(|v| v as f64),
            DeValue::Float(f) => f.as_str().parse::<f64>().ok(),
            other => {
                self.error(key, value.span(), format!("expected a number, found {}", other.type_str()));
                return None;
            }
        };
        match parsed {
            Some(v) if v.is_finite() => Some(v),
            _ => {
                self.error(key, value.span(), "expected a finite number");
                None
            }
        }
    }

    fn number(&mut self, sec: &Section<'_, '_>, key: &str) -> Option<f64> {
        let value = sec.get(key)?;
        self.number_value(&sec.key(key), value)
    }

    fn positive(&mut self, sec: &Section<'_, '_>, key: &str) -> Option<f64> {
        let v = self.number(sec, key)?;
        if v > 0.0 {
            Some(v)
        } else {
            self.error(&sec.key(key), sec.span_of(key), format!("must be positive, got {v}"));
            None
        }
    }

    fn required_number(&mut self, sec: &Section<'_, '_>, key: &str) -> Option<f64> {
        if !sec.has(key) {
            self.missing(sec, key);
        }
        self.number(sec, key)
    }

    fn string<'t>(&mut self, sec: &Section<'t, '_>, key: &str) -> Option<&'t str> {
        let value = sec.get(key)?;
        match value.get_ref() {
            DeValue::String(s) => Some(s.as_ref()),
            other => {
                self.error(
                    &sec.key(key),
                    value.span(),
                    format!("expected a string, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn count(&mut self, sec: &Section<'_, '_>, key: &str) -> Option<u64> {
        let value = sec.get(key)?;
        match value.get_ref() {
            DeValue::Integer(i) => match u64::from_str_radix(i.as_str(), i.radix()) {
                Ok(v) => Some(v),
                Err(_) => {
                    self.error(&sec.key(key), value.span(), "expected a non-negative integer");
                    None
                }
            },
            other => {
                self.error(
                    &sec.key(key),
                    value.span(),
                    format!("expected an integer, found {}", other.type_str()),
                );
                None
            }
        }
    }

    /// `[[s, value], ...]` pairs.
    fn points(&mut self, sec: &Section<'_, '_>, key: &str) -> Option<Vec<(f64, f64)>> {
        let name = sec.key(key);
        let Some(value) = sec.get(key) else {
            self.missing(sec, key);
            return None;
        };
        let DeValue::Array(rows) = value.get_ref() else {
            self.error(&name, value.span(), "expected an array of [s, value] pairs");
            return None;
        };
        let mut out = Vec::with_capacity(rows.len());
        let mut ok = true;
        for row in rows.iter() {
            match row.get_ref() {
                DeValue::Array(pair) if pair.len() == 2 => {
                    let s = self.number_value(&name, &pair[0]);
                    let v = self.number_value(&name, &pair[1]);
                    match (s, v) {
                        (Some(s), Some(v)) => out.push((s, v)),
                        _ => ok = false,
                    }
                }
                _ => {
                    self.error(&name, row.span(), "expected a [s, value] pair");
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    /// The single variant key present in `sec` out of `variants`.
    fn variant<'k>(&mut self, sec: &Section<'_, '_>, variants: &[&'k str]) -> Option<&'k str> {
        let present: Vec<&str> = variants.iter().copied().filter(|v| sec.has(v)).collect();
        match present.as_slice() {
            [one] => Some(one),
            [] => {
                self.error(
                    &sec.path,
                    sec.span.clone(),
                    format!("expected one of: {}", variants.join(", ")),
                );
                None
            }
            many => {
                self.error(
                    &sec.path,
                    sec.span.clone(),
                    format!("ambiguous: {} are mutually exclusive", many.join(" and ")),
                );
                None
            }
        }
    }

    fn profile<T>(&mut self, key: &str, span: Range<usize>, made: quadfluid::Result<T>) -> Option<T> {
        match made {
            Ok(p) => Some(p),
            Err(e) => {
                self.error(key, span, e.to_string());
                None
            }
        }
    }
}

const STRENGTH_KINDS: [&str; 4] = ["constant", "modulated", "exponential", "tabulated"];
const EMITTANCE_KINDS: [&str; 3] = ["constant", "exponential", "tabulated"];

fn parse_strength(ctx: &mut Ctx<'_>, sec: &Section<'_, '_>) -> Option<StrengthProfile> {
    ctx.reject_unknown(sec, &STRENGTH_KINDS);
    let kind = ctx.variant(sec, &STRENGTH_KINDS)?;
    let t = ctx.table(sec, kind)?;
    let span = t.span.clone();
    match kind {
        "constant" => {
            ctx.reject_unknown(&t, &["k0"]);
            let k0 = ctx.required_number(&t, "k0")?;
            ctx.profile(&t.key("k0"), t.span_of("k0"), StrengthProfile::constant(k0))
        }
        "modulated" => {
            ctx.reject_unknown(&t, &["k0", "amplitude", "omega", "phase"]);
            let k0 = ctx.required_number(&t, "k0");
            let amplitude = ctx.required_number(&t, "amplitude");
            let omega = ctx.required_number(&t, "omega");
            let phase = if t.has("phase") { ctx.number(&t, "phase") } else { Some(0.0) };
            let made = StrengthProfile::modulated(k0?, amplitude?, omega?, phase?);
            ctx.profile(&t.path, span, made)
        }
        "exponential" => {
            ctx.reject_unknown(&t, &["k0", "gamma"]);
            let k0 = ctx.required_number(&t, "k0");
            let gamma = ctx.required_number(&t, "gamma");
            ctx.profile(&t.path, span, StrengthProfile::exponential(k0?, gamma?))
        }
        _ => {
            ctx.reject_unknown(&t, &["points"]);
            let points = ctx.points(&t, "points")?;
            ctx.profile(&t.key("points"), t.span_of("points"), StrengthProfile::tabulated(&points))
        }
    }
}

fn parse_emittance(ctx: &mut Ctx<'_>, sec: &Section<'_, '_>) -> Option<EmittanceProfile> {
    ctx.reject_unknown(sec, &EMITTANCE_KINDS);
    let kind = ctx.variant(sec, &EMITTANCE_KINDS)?;
    let t = ctx.table(sec, kind)?;
    match kind {
        "constant" => {
            ctx.reject_unknown(&t, &["eps0"]);
            let eps0 = ctx.required_number(&t, "eps0")?;
            ctx.profile(&t.key("eps0"), t.span_of("eps0"), EmittanceProfile::constant(eps0))
        }
        "exponential" => {
            ctx.reject_unknown(&t, &["eps0", "gamma"]);
            let eps0 = ctx.required_number(&t, "eps0");
            let gamma = ctx.required_number(&t, "gamma");
            let (eps0, gamma) = (eps0?, gamma?);
            ctx.profile(&t.key("eps0"), t.span_of("eps0"), EmittanceProfile::exponential(eps0, gamma))
        }
        _ => {
            ctx.reject_unknown(&t, &["points"]);
            let points = ctx.points(&t, "points")?;
            ctx.profile(&t.key("points"), t.span_of("points"), EmittanceProfile::tabulated(&points))
        }
    }
}

/// Raw beam keys; `None` where absent or invalid.
#[derive(Default)]
struct RawBeam {
    sigma0: Option<f64>,
    dsigma0: Option<f64>,
    x0: Option<f64>,
    p0: Option<f64>,
    span: Range<usize>,
    sigma_span: Range<usize>,
    dsigma_span: Range<usize>,
}

fn parse_beam(ctx: &mut Ctx<'_>, sec: Option<&Section<'_, '_>>) -> RawBeam {
    let Some(sec) = sec else {
        return RawBeam::default();
    };
    ctx.reject_unknown(sec, &["sigma0", "dsigma0", "x0", "p0"]);
    RawBeam {
        sigma0: ctx.positive(sec, "sigma0"),
        dsigma0: ctx.number(sec, "dsigma0"),
        x0: ctx.number(sec, "x0"),
        p0: ctx.number(sec, "p0"),
        span: sec.span.clone(),
        sigma_span: sec.span_of("sigma0"),
        dsigma_span: sec.span_of("dsigma0"),
    }
}

fn parse_grid(ctx: &mut Ctx<'_>, sec: &Section<'_, '_>, default: GridSpec) -> Option<GridSpec> {
    ctx.reject_unknown(sec, &["x_min", "x_max", "half_width", "n_cells"]);
    let n_cells = match ctx.count(sec, "n_cells") {
        Some(n) => n as usize,
        None if sec.has("n_cells") => return None,
        None => default.n_cells,
    };
    let (x_min, x_max) = if sec.has("half_width") {
        if sec.has("x_min") || sec.has("x_max") {
            ctx.error(
                &sec.path,
                sec.span.clone(),
                "ambiguous: half_width and x_min/x_max are mutually exclusive",
            );
            return None;
        }
        let h = ctx.positive(sec, "half_width")?;
        (-h, h)
    } else {
        let lo = if sec.has("x_min") { ctx.number(sec, "x_min")? } else { default.x_min };
        let hi = if sec.has("x_max") { ctx.number(sec, "x_max")? } else { default.x_max };
        (lo, hi)
    };
    ctx.profile(&sec.path, sec.span.clone(), GridSpec::new(x_min, x_max, n_cells))
}

fn parse_ode(ctx: &mut Ctx<'_>, sec: Option<&Section<'_, '_>>) -> Option<OdeSettings> {
    let mut ode = default_ode();
    let Some(sec) = sec else {
        return Some(ode);
    };
    ctx.reject_unknown(sec, &["method", "step", "abs_tol", "rel_tol"]);
    let mut ok = true;
    if let Some(m) = ctx.string(sec, "method") {
        match m {
            "rk45" => ode.method = OdeMethod::Rk45Adaptive,
            "rk4" => ode.method = OdeMethod::Rk4Fixed,
            other => {
                ctx.error(
                    &sec.key("method"),
                    sec.span_of("method"),
                    format!("unknown method `{other}` (expected rk45 or rk4)"),
                );
                ok = false;
            }
        }
    } else {
        ok &= !sec.has("method");
    }
    for (key, slot) in [
        ("step", &mut ode.step),
        ("abs_tol", &mut ode.abs_tol),
        ("rel_tol", &mut ode.rel_tol),
    ] {
        if sec.has(key) {
            match ctx.positive(sec, key) {
                Some(v) => *slot = v,
                None => ok = false,
            }
        }
    }
    ok.then_some(ode)
}

fn parse_fluid(ctx: &mut Ctx<'_>, sec: Option<&Section<'_, '_>>) -> Option<FluidSpec> {
    let Some(sec) = sec else {
        return Some(FluidSpec { cfl: DEFAULT_CFL });
    };
    ctx.reject_unknown(sec, &["cfl"]);
    if !sec.has("cfl") {
        return Some(FluidSpec { cfl: DEFAULT_CFL });
    }
    let cfl = ctx.positive(sec, "cfl")?;
    if cfl > 1.0 {
        ctx.error(&sec.key("cfl"), sec.span_of("cfl"), format!("must not exceed 1, got {cfl}"));
        return None;
    }
    Some(FluidSpec { cfl })
}

fn parse_quantum(ctx: &mut Ctx<'_>, sec: Option<&Section<'_, '_>>) -> Option<QuantumSpec> {
    let mut q = QuantumSpec {
        ds: DEFAULT_QUANTUM_STEP,
        convention: PhaseConvention::Full,
    };
    let Some(sec) = sec else {
        return Some(q);
    };
    ctx.reject_unknown(sec, &["ds", "phase_convention"]);
    let mut ok = true;
    if sec.has("ds") {
        match ctx.positive(sec, "ds") {
            Some(v) => q.ds = v,
            None => ok = false,
        }
    }
    match ctx.string(sec, "phase_convention") {
        Some("full") => q.convention = PhaseConvention::Full,
        Some("half") => q.convention = PhaseConvention::Half,
        Some(other) => {
            ctx.error(
                &sec.key("phase_convention"),
                sec.span_of("phase_convention"),
                format!("unknown convention `{other}` (expected full or half)"),
            );
            ok = false;
        }
        None => ok &= !sec.has("phase_convention"),
    }
    ok.then_some(q)
}

const TOP_KEYS: [&str; 13] = [
    "scenario",
    "s_end",
    "output_cadence",
    "snapshot_cadence",
    "output_dir",
    "seed",
    "strength",
    "emittance",
    "beam",
    "grid",
    "ode",
    "fluid",
    "quantum",
];

/// Parse and validate a configuration, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    let mut ctx = Ctx {
        text,
        errors: Vec::new(),
    };
    let root = match DeTable::parse(text) {
        Ok(root) => root,
        Err(e) => {
            ctx.error("", e.span().unwrap_or(0..0), e.message().trim().to_string());
            return Err(ConfigErrors(ctx.errors));
        }
    };
    let top = Section {
        path: String::new(),
        table: root.get_ref(),
        span: 0..0,
    };
    ctx.reject_unknown(&top, &TOP_KEYS);

    let scenario = match ctx.string(&top, "scenario") {
        Some(name) => {
            let found = Scenario::from_name(name);
            if found.is_none() {
                let names: Vec<&str> = Scenario::ALL.iter().map(|s| s.name()).collect();
                ctx.error(
                    "scenario",
                    top.span_of("scenario"),
                    format!("unknown scenario `{name}` (expected one of: {})", names.join(", ")),
                );
            }
            found
        }
        None => {
            if !top.has("scenario") {
                ctx.missing(&top, "scenario");
            }
            None
        }
    };

    let s_end = ctx.positive(&top, "s_end");
    let output_cadence = if top.has("output_cadence") {
        ctx.positive(&top, "output_cadence")
    } else {
        Some(DEFAULT_CADENCE)
    };
    let snapshot_cadence = ctx.positive(&top, "snapshot_cadence");
    let output_dir = ctx
        .string(&top, "output_dir")
        .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), PathBuf::from);
    let seed = ctx.count(&top, "seed").unwrap_or(0);

    let strength_sec = ctx.table(&top, "strength");
    let strength = strength_sec.as_ref().and_then(|s| parse_strength(&mut ctx, s));
    let emittance_sec = ctx.table(&top, "emittance");
    let emittance = emittance_sec.as_ref().and_then(|s| parse_emittance(&mut ctx, s));
    let beam_sec = ctx.table(&top, "beam");
    let beam = parse_beam(&mut ctx, beam_sec.as_ref());
    let grid_sec = ctx.table(&top, "grid");
    let ode_sec = ctx.table(&top, "ode");
    let ode = parse_ode(&mut ctx, ode_sec.as_ref());
    let fluid_sec = ctx.table(&top, "fluid");
    let fluid = parse_fluid(&mut ctx, fluid_sec.as_ref());
    let quantum_sec = ctx.table(&top, "quantum");
    let quantum = parse_quantum(&mut ctx, quantum_sec.as_ref());

    let Some(scenario) = scenario else {
        return Err(ConfigErrors(ctx.errors));
    };

    let default_grid = match scenario {
        Scenario::FreeExpansion => GridSpec::symmetric(12.0, 4096),
        _ => GridSpec::symmetric(1.0, 2048),
    }
    .expect("default grids are valid");
    let grid = match &grid_sec {
        Some(sec) => parse_grid(&mut ctx, sec, default_grid),
        None => Some(default_grid),
    };

    let present = |sec: &Option<Section<'_, '_>>| sec.is_some();
    let resolved = resolve(
        &mut ctx,
        scenario,
        Profiles {
            strength,
            strength_given: present(&strength_sec),
            strength_span: strength_sec.as_ref().map_or(0..0, |s| s.span.clone()),
            emittance,
            emittance_given: present(&emittance_sec),
            emittance_span: emittance_sec.as_ref().map_or(0..0, |s| s.span.clone()),
        },
        &beam,
        s_end,
        top.has("s_end"),
    );

    if !ctx.errors.is_empty() {
        return Err(ConfigErrors(ctx.errors));
    }
    let (strength, emittance, beam, s_end) = resolved.expect("no errors were recorded");
    Ok(ScenarioConfig {
        scenario,
        strength,
        emittance,
        beam,
        grid: grid.expect("no errors were recorded"),
        ode: ode.expect("no errors were recorded"),
        fluid: fluid.expect("no errors were recorded"),
        quantum: quantum.expect("no errors were recorded"),
        s_end,
        output_cadence: output_cadence.expect("no errors were recorded"),
        snapshot_cadence,
        output_dir,
        seed,
    })
}

struct Profiles {
    strength: Option<StrengthProfile>,
    strength_given: bool,
    strength_span: Range<usize>,
    emittance: Option<EmittanceProfile>,
    emittance_given: bool,
    emittance_span: Range<usize>,
}

type Resolved = (StrengthProfile, EmittanceProfile, BeamSpec, f64);

/// Apply scenario defaults and check scenario-specific completeness.
fn resolve(
    ctx: &mut Ctx<'_>,
    scenario: Scenario,
    p: Profiles,
    beam: &RawBeam,
    s_end: Option<f64>,
    s_end_given: bool,
) -> Option<Resolved> {
    let name = scenario.name();
    let centroid_default = match scenario {
        Scenario::MatchedCoherent | Scenario::DissipativeCoherent | Scenario::FluidVsQuantum => 0.05,
        _ => 0.0,
    };
    let x0 = beam.x0.unwrap_or(centroid_default);
    let p0 = beam.p0.unwrap_or(0.0);
    let dsigma0 = beam.dsigma0.unwrap_or(0.0);

    // a profile given but invalid has already been reported; keep checking
    // the rest so every problem shows up in one pass
    let broken = (p.strength_given && p.strength.is_none())
        || (p.emittance_given && p.emittance.is_none());
    let (strength, emittance) = (p.strength, p.emittance);

    let require_static = |ctx: &mut Ctx<'_>, s: &StrengthProfile, e: &EmittanceProfile| {
        let mut ok = true;
        if !matches!(s, StrengthProfile::Constant { k0 } if *k0 > 0.0) {
            ctx.error(
                "strength",
                p.strength_span.clone(),
                format!("{name} needs a constant positive strength"),
            );
            ok = false;
        }
        if !e.is_constant() {
            ctx.error("emittance", p.emittance_span.clone(), format!("{name} needs a constant emittance"));
            ok = false;
        }
        ok
    };
    let no_slope = |ctx: &mut Ctx<'_>| {
        if dsigma0 != 0.0 {
            ctx.error("beam.dsigma0", beam.dsigma_span.clone(), format!("{name} starts at rest (dsigma0 = 0)"));
            false
        } else {
            true
        }
    };
    let period = |s: &StrengthProfile| -> f64 {
        match s {
            StrengthProfile::Constant { k0 } | StrengthProfile::Exponential { k0, .. } => {
                2.0 * PI / k0.sqrt()
            }
            _ => 2.0 * PI,
        }
    };

    let default_strength = || StrengthProfile::constant(DEFAULT_STRENGTH).expect("valid default");
    let default_emittance = || EmittanceProfile::constant(DEFAULT_EMITTANCE).expect("valid default");

    let resolved = match scenario {
        Scenario::MatchedCoherent | Scenario::FluidVsQuantum => {
            let s = strength.unwrap_or_else(default_strength);
            let e = emittance.unwrap_or_else(default_emittance);
            let ok = require_static(ctx, &s, &e) & no_slope(ctx);
            if !ok {
                return None;
            }
            let (StrengthProfile::Constant { k0 }, EmittanceProfile::Constant { eps0 }) = (&s, &e) else {
                return None;
            };
            let matched = matched_sigma(*k0, *eps0).ok()?;
            if let Some(sigma0) = beam.sigma0 {
                if (sigma0 - matched).abs() > MATCHING_TOLERANCE.max(1e-9) * matched {
                    ctx.error(
                        "beam.sigma0",
                        beam.sigma_span.clone(),
                        format!("{name} needs the matched size {matched}, got {sigma0}"),
                    );
                    return None;
                }
            }
            let end = s_end.unwrap_or(period(&s));
            Some((s, e, BeamSpec { sigma0: matched, dsigma0: 0.0, x0, p0 }, end))
        }
        Scenario::MismatchedBreathing => {
            let s = strength.unwrap_or_else(default_strength);
            let e = emittance.unwrap_or_else(default_emittance);
            let constant = e.is_constant();
            if !constant {
                ctx.error("emittance", p.emittance_span.clone(), format!("{name} needs a constant emittance"));
            }
            let Some(sigma0) = beam.sigma0 else {
                ctx.error("beam.sigma0", beam.span.clone(), "missing required key");
                return None;
            };
            if !constant {
                return None;
            }
            let end = s_end.unwrap_or(period(&s));
            Some((s, e, BeamSpec { sigma0, dsigma0, x0, p0 }, end))
        }
        Scenario::DissipativeCoherent => {
            let s = strength.unwrap_or_else(|| {
                StrengthProfile::exponential(DEFAULT_STRENGTH, 0.01).expect("valid default")
            });
            let mut ok = no_slope(ctx);
            if p.emittance_given {
                ctx.error(
                    "emittance",
                    p.emittance_span.clone(),
                    format!("{name} derives the emittance from the matching condition; remove this table"),
                );
                ok = false;
            }
            let StrengthProfile::Exponential { k0, gamma } = s else {
                ctx.error("strength", p.strength_span.clone(), format!("{name} needs an exponential strength"));
                return None;
            };
            if !ok {
                return None;
            }
            let sigma0 = beam.sigma0.unwrap_or(DEFAULT_SIGMA);
            let (s, e, _) = coupled_dissipative_profiles(k0, gamma, sigma0).ok()?;
            let end = s_end.unwrap_or(2.0 * PI / k0.sqrt());
            Some((s, e, BeamSpec { sigma0, dsigma0: 0.0, x0, p0 }, end))
        }
        Scenario::FreeExpansion => {
            let s = strength.unwrap_or_else(|| StrengthProfile::constant(0.0).expect("valid default"));
            let e = emittance.unwrap_or_else(default_emittance);
            let mut ok = no_slope(ctx);
            if !matches!(s, StrengthProfile::Constant { k0 } if k0 == 0.0) {
                ctx.error("strength", p.strength_span.clone(), format!("{name} needs K = 0"));
                ok = false;
            }
            if !e.is_constant() {
                ctx.error("emittance", p.emittance_span.clone(), format!("{name} needs a constant emittance"));
                ok = false;
            }
            if !ok {
                return None;
            }
            let sigma0 = beam.sigma0.unwrap_or(DEFAULT_SIGMA);
            Some((s, e, BeamSpec { sigma0, dsigma0: 0.0, x0, p0 }, s_end.unwrap_or(10.0)))
        }
        Scenario::EnvelopeOnly => {
            let mut ok = true;
            if !p.strength_given {
                ctx.error("strength", 0..0, "missing required table");
                ok = false;
            }
            if !p.emittance_given {
                ctx.error("emittance", 0..0, "missing required table");
                ok = false;
            }
            if beam.sigma0.is_none() {
                ctx.error("beam.sigma0", beam.span.clone(), "missing required key");
                ok = false;
            }
            if !s_end_given {
                ctx.error("s_end", 0..0, "missing required key");
                ok = false;
            }
            if !ok {
                return None;
            }
            Some((
                strength?,
                emittance?,
                BeamSpec { sigma0: beam.sigma0?, dsigma0, x0, p0 },
                s_end?,
            ))
        }
    };
    if broken {
        None
    } else {
        resolved
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_matched_config_gets_defaults() {
        let c = parse_config("scenario = \"matched_coherent\"\n").unwrap();
        assert_eq!(c.fluid.cfl, 0.4);
        assert_eq!(c.ode.method, OdeMethod::Rk45Adaptive);
        assert_eq!(c.ode.rel_tol, 1e-12);
        assert!((c.beam.sigma0 - 0.1).abs() < 1e-15);
        assert!((c.s_end - 2.0 * PI).abs() < 1e-15);
        assert_eq!(c.grid, GridSpec::symmetric(1.0, 2048).unwrap());
    }

    #[test]
    fn negative_emittance_names_the_key() {
        let text = "scenario = \"envelope_only\"\ns_end = 1.0\n[beam]\nsigma0 = 0.1\n\
                    [strength.constant]\nk0 = 1.0\n[emittance.constant]\neps0 = -1\n";
        let errs = parse_config(text).unwrap_err().0;
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].key, "emittance.constant.eps0");
        assert_eq!(errs[0].line, 8);
    }

    #[test]
    fn two_emittance_kinds_are_ambiguous() {
        let text = "scenario = \"mismatched_breathing\"\n[beam]\nsigma0 = 0.15\n\
                    [emittance.constant]\neps0 = 0.02\n[emittance.exponential]\neps0 = 0.02\ngamma = 0.1\n";
        let errs = parse_config(text).unwrap_err().0;
        assert!(errs.iter().any(|e| e.key == "emittance" && e.message.contains("ambiguous")));
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "scenario = \"nope\"\ns_end = \"long\"\nbogus = 1\n[ode]\nrel_tol = 0\n";
        let errs = parse_config(text).unwrap_err().0;
        let keys: Vec<&str> = errs.iter().map(|e| e.key.as_str()).collect();
        assert!(keys.contains(&"scenario"));
        assert!(keys.contains(&"s_end"));
        assert!(keys.contains(&"bogus"));
        assert!(keys.contains(&"ode.rel_tol"));
        let s_end = errs.iter().find(|e| e.key == "s_end").unwrap();
        assert_eq!((s_end.line, s_end.column), (2, 9));
    }

    #[test]
    fn syntax_errors_have_positions() {
        let errs = parse_config("scenario = \n").unwrap_err().0;
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].line, 1);
    }

    #[test]
    fn missing_scenario_is_reported() {
        let errs = parse_config("s_end = 1.0\n").unwrap_err().0;
        assert_eq!(errs[0].key, "scenario");
        assert!(errs[0].message.contains("missing"));
    }

    #[test]
    fn envelope_only_needs_its_keys() {
        let errs = parse_config("scenario = \"envelope_only\"\n").unwrap_err().0;
        let keys: Vec<&str> = errs.iter().map(|e| e.key.as_str()).collect();
        assert_eq!(keys, ["strength", "emittance", "beam.sigma0", "s_end"]);
    }

    #[test]
    fn invalid_profile_does_not_hide_other_errors() {
        let text = "scenario = \"envelope_only\"\ns_end = 1.0\n[strength.constant]\nk0 = 1.0\n\
                    [emittance.constant]\neps0 = -1\n";
        let keys: Vec<String> = parse_config(text).unwrap_err().0.into_iter().map(|e| e.key).collect();
        assert_eq!(keys, ["emittance.constant.eps0", "beam.sigma0"]);
    }

    #[test]
    fn dissipative_profiles_are_coupled() {
        let text = "scenario = \"dissipative_coherent\"\n[strength.exponential]\nk0 = 1.0\ngamma = 0.01\n";
        let c = parse_config(text).unwrap();
        let (k, e) = (c.strength.eval(3.0).unwrap(), c.emittance.eval(3.0).unwrap());
        assert!((k * c.beam.sigma0.powi(4) - e * e / 4.0).abs() < 1e-15);
    }

    #[test]
    fn dissipative_rejects_an_emittance_table() {
        let text = "scenario = \"dissipative_coherent\"\n[emittance.constant]\neps0 = 0.02\n";
        let errs = parse_config(text).unwrap_err().0;
        assert_eq!(errs[0].key, "emittance");
    }

    #[test]
    fn matched_size_is_enforced() {
        let text = "scenario = \"matched_coherent\"\n[beam]\nsigma0 = 0.2\n";
        let errs = parse_config(text).unwrap_err().0;
        assert_eq!(errs[0].key, "beam.sigma0");
    }

    #[test]
    fn free_expansion_defaults_and_nonzero_strength() {
        let c = parse_config("scenario = \"free_expansion\"\n").unwrap();
        assert_eq!(c.s_end, 10.0);
        assert_eq!(c.grid, GridSpec::symmetric(12.0, 4096).unwrap());
        let errs = parse_config("scenario = \"free_expansion\"\n[strength.constant]\nk0 = 1.0\n")
            .unwrap_err()
            .0;
        assert_eq!(errs[0].key, "strength");
    }

    #[test]
    fn grid_and_tabulated_profiles() {
        let text = "scenario = \"envelope_only\"\ns_end = 2.0\n[beam]\nsigma0 = 0.1\n\
                    [strength.tabulated]\npoints = [[0, 1.0], [1, 1.5], [2, 1.0]]\n\
                    [emittance.exponential]\neps0 = 0.02\ngamma = 0.05\n\
                    [grid]\nhalf_width = 2\nn_cells = 512\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.grid, GridSpec::symmetric(2.0, 512).unwrap());
        assert!((c.strength.eval(0.5).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn grid_bounds_are_exclusive_with_half_width() {
        let text = "scenario = \"matched_coherent\"\n[grid]\nhalf_width = 1\nx_min = -1\n";
        let errs = parse_config(text).unwrap_err().0;
        assert!(errs[0].message.contains("ambiguous"));
    }
}
