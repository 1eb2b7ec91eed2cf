//! Experiment configuration: TOML ingestion, preset merging, validation and
//! sweep expansion.
//!
//! Keys carry their units (`P_t_mW`, `Phi_half_deg`, ...). Every key has a
//! default, so an empty file describes the reference cell.

use std::fmt;
use std::path::{Path, PathBuf};

use owc_aloha::{CellGeometry, DispersionKind, FblParams, OpticalFrontend, ProtocolConfig, SystemConfig};
use serde::Deserialize;
use thiserror::Error;

use crate::presets;

/// Sweep ranges longer than this are rejected as likely typos.
pub const MAX_SWEEP_POINTS: usize = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },

    #[error("{path}: unknown key `{key}`; valid names: {valid}")]
    UnknownKey { path: String, key: String, valid: String },

    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },

    #[error("unknown preset `{name}`; available: {available}")]
    UnknownPreset { name: String, available: String },
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub figure: Option<String>,
    pub description: Option<String>,
    #[serde(default)]
    pub assumptions: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsSection {
    #[serde(rename = "P_t_mW")]
    pub p_t_mw: f64,
    pub eta: f64,
    #[serde(rename = "A_r_cm2")]
    pub a_r_cm2: f64,
    #[serde(rename = "R_r_A_per_W")]
    pub r_r_a_per_w: f64,
    #[serde(rename = "T_s")]
    pub t_s: f64,
    pub zeta: f64,
    #[serde(rename = "Psi_deg")]
    pub psi_deg: f64,
    #[serde(rename = "Phi_half_deg")]
    pub phi_half_deg: f64,
    #[serde(rename = "N0_W_per_Hz")]
    pub n0_w_per_hz: f64,
    #[serde(rename = "B_kHz")]
    pub b_khz: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        Self {
            p_t_mw: 30.0,
            eta: 0.8,
            a_r_cm2: 1.0,
            r_r_a_per_w: 0.4,
            t_s: 1.0,
            zeta: 1.5,
            psi_deg: 90.0,
            phi_half_deg: 60.0,
            n0_w_per_hz: 1e-21,
            b_khz: 200.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    #[serde(rename = "D_m")]
    pub d_m: f64,
    #[serde(rename = "L_m")]
    pub l_m: f64,
}

impl Default for CellSection {
    fn default() -> Self {
        Self { d_m: 4.0, l_m: 3.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    #[serde(rename = "U")]
    pub users: usize,
    pub p_a: f64,
    pub capture: bool,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self { users: 50, p_a: 0.05, capture: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dispersion {
    NearestNeighbor,
    Awgn,
    AwgnPrinted,
}

impl From<Dispersion> for DispersionKind {
    fn from(d: Dispersion) -> Self {
        match d {
            Dispersion::NearestNeighbor => DispersionKind::NearestNeighbor,
            Dispersion::Awgn => DispersionKind::Awgn,
            Dispersion::AwgnPrinted => DispersionKind::AwgnPrinted,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodeSection {
    pub n: usize,
    #[serde(rename = "R")]
    pub rate: f64,
    pub eps_th: f64,
    pub dispersion: Dispersion,
    pub allow_short_blocklength: bool,
}

impl Default for CodeSection {
    fn default() -> Self {
        Self { n: 64, rate: 0.5, eps_th: 1e-3, dispersion: Dispersion::NearestNeighbor, allow_short_blocklength: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub step: Option<f64>,
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Analytic,
    #[serde(alias = "montecarlo")]
    #[value(alias = "montecarlo")]
    Mc,
    Both,
}

impl Mode {
    pub fn analytic(self) -> bool {
        matches!(self, Mode::Analytic | Mode::Both)
    }

    pub fn monte_carlo(self) -> bool {
        matches!(self, Mode::Mc | Mode::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Error probability, throughput and outage per sweep point.
    Metrics,
    /// Conditional SINR CDFs for a list of active-user counts.
    SinrCdf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub experiment: ExperimentKind,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub slots: u64,
    pub output: Option<PathBuf>,
    pub u_a_cap: usize,
    pub u_a_values: Vec<usize>,
    pub cdf_points: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Metrics,
            mode: Mode::Analytic,
            seed: None,
            slots: 1_000_000,
            output: None,
            u_a_cap: 32,
            u_a_values: vec![2, 4, 8],
            cdf_points: 200,
        }
    }
}

/// The file as written, before validation.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub meta: Option<Meta>,
    #[serde(default)]
    pub optics: OpticsSection,
    #[serde(default)]
    pub cell: CellSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub code: CodeSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub run: RunSection,
}

/// Numeric keys that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    PtMw,
    Eta,
    ArCm2,
    RrAPerW,
    Ts,
    Zeta,
    PsiDeg,
    PhiHalfDeg,
    N0WPerHz,
    BKhz,
    Dm,
    Lm,
    Users,
    Pa,
    N,
    Rate,
    EpsTh,
}

impl SweepParam {
    pub const ALL: [(SweepParam, &'static str); 17] = [
        (SweepParam::PtMw, "P_t_mW"),
        (SweepParam::Eta, "eta"),
        (SweepParam::ArCm2, "A_r_cm2"),
        (SweepParam::RrAPerW, "R_r_A_per_W"),
        (SweepParam::Ts, "T_s"),
        (SweepParam::Zeta, "zeta"),
        (SweepParam::PsiDeg, "Psi_deg"),
        (SweepParam::PhiHalfDeg, "Phi_half_deg"),
        (SweepParam::N0WPerHz, "N0_W_per_Hz"),
        (SweepParam::BKhz, "B_kHz"),
        (SweepParam::Dm, "D_m"),
        (SweepParam::Lm, "L_m"),
        (SweepParam::Users, "U"),
        (SweepParam::Pa, "p_a"),
        (SweepParam::N, "n"),
        (SweepParam::Rate, "R"),
        (SweepParam::EpsTh, "eps_th"),
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.iter().find(|(_, n)| *n == name).map(|(p, _)| *p)
    }

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(p, _)| *p == self).map(|(_, n)| *n).expect("every parameter is listed")
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|(_, n)| *n).collect::<Vec<_>>().join(", ")
    }

    /// Whether the parameter only affects the code and activity, not the cell.
    pub fn keeps_geometry(self) -> bool {
        matches!(self, SweepParam::Users | SweepParam::Pa | SweepParam::N | SweepParam::Rate | SweepParam::EpsTh)
    }

    fn apply(self, raw: &mut RawConfig, v: f64) -> Result<(), ConfigError> {
        let count = |v: f64| -> Result<usize, ConfigError> {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(invalid(format!("sweep.{}", self.name()), format!("value {v} is not a non-negative integer")))
            }
        };
        let (o, c, p, k) = (&mut raw.optics, &mut raw.cell, &mut raw.protocol, &mut raw.code);
        match self {
            SweepParam::PtMw => o.p_t_mw = v,
            SweepParam::Eta => o.eta = v,
            SweepParam::ArCm2 => o.a_r_cm2 = v,
            SweepParam::RrAPerW => o.r_r_a_per_w = v,
            SweepParam::Ts => o.t_s = v,
            SweepParam::Zeta => o.zeta = v,
            SweepParam::PsiDeg => o.psi_deg = v,
            SweepParam::PhiHalfDeg => o.phi_half_deg = v,
            SweepParam::N0WPerHz => o.n0_w_per_hz = v,
            SweepParam::BKhz => o.b_khz = v,
            SweepParam::Dm => c.d_m = v,
            SweepParam::Lm => c.l_m = v,
            SweepParam::Users => p.users = count(v)?,
            SweepParam::Pa => p.p_a = v,
            SweepParam::N => k.n = count(v)?,
            SweepParam::Rate => k.rate = v,
            SweepParam::EpsTh => k.eps_th = v,
        }
        Ok(())
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One fully resolved operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Sweep value, `None` without a sweep.
    pub value: Option<f64>,
    pub system: SystemConfig,
    pub protocol: ProtocolConfig,
    pub fbl: FblParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub experiment: ExperimentKind,
    pub mode: Mode,
    /// Present whenever the mode includes Monte Carlo.
    pub seed: Option<u64>,
    pub slots: u64,
    pub output: Option<PathBuf>,
    pub u_a_cap: usize,
    pub u_a_values: Vec<usize>,
    pub cdf_points: usize,
}

/// A validated experiment: the operating points in ascending sweep order.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub sweep: Option<SweepParam>,
    pub points: Vec<Point>,
    pub run: RunSettings,
    pub meta: Option<Meta>,
}

impl ExperimentSpec {
    /// Label written in the `sweep_param` column.
    pub fn sweep_label(&self) -> &'static str {
        self.sweep.map_or("none", SweepParam::name)
    }
}

/// Command-line overrides, applied after the file and preset are merged.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

/// Reads `path` (if any) over `preset` (if any), applies `overrides` and validates.
pub fn load_config(path: Option<&Path>, preset: Option<&str>, overrides: &Overrides) -> Result<ExperimentSpec, ConfigError> {
    let mut table = match preset {
        Some(name) => parse_table(presets::get(name)?, &format!("preset `{name}`"))?,
        None => toml::Table::new(),
    };
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        merge(&mut table, parse_table(&text, &path.display().to_string())?);
    }
    let origin = path.map_or_else(|| preset.map_or("defaults".into(), |p| format!("preset `{p}`")), |p| p.display().to_string());
    let mut raw: RawConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse { origin, message: e.message().to_owned() })?;
    if let Some(mode) = overrides.mode {
        raw.run.mode = mode;
    }
    if let Some(seed) = overrides.seed {
        raw.run.seed = Some(seed);
    }
    if let Some(out) = &overrides.output {
        raw.run.output = Some(out.clone());
    }
    validate(raw)
}

/// Parses a configuration held in memory.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let raw: RawConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse { origin: "configuration".into(), message: e.message().to_owned() })?;
    validate(raw)
}

fn parse_table(text: &str, origin: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Parse { origin: origin.to_owned(), message: e.message().to_owned() })
}

/// Recursive table merge; keys of `top` win.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Checks every invariant and expands the sweep.
pub fn validate(raw: RawConfig) -> Result<ExperimentSpec, ConfigError> {
    let run = validate_run(&raw)?;
    let (sweep, values) = match &raw.sweep {
        Some(s) => {
            let param = SweepParam::parse(&s.param).ok_or_else(|| ConfigError::UnknownKey {
                path: "sweep.param".into(),
                key: s.param.clone(),
                valid: SweepParam::valid_names(),
            })?;
            (Some(param), expand(s)?.into_iter().map(Some).collect())
        }
        None => (None, vec![None]),
    };
    if sweep.is_some() && run.experiment == ExperimentKind::SinrCdf {
        return Err(invalid("sweep", "the sinr_cdf experiment does not take a sweep"));
    }
    let mut points = Vec::with_capacity(values.len());
    for value in values {
        let mut point_raw = raw.clone();
        if let (Some(param), Some(v)) = (sweep, value) {
            param.apply(&mut point_raw, v)?;
        }
        let point = resolve(&point_raw, value).map_err(|e| match (e, sweep, value) {
            (ConfigError::Invalid { path, reason }, Some(param), Some(v)) => {
                invalid(format!("{path} (at sweep point {param} = {v})"), reason)
            }
            (e, ..) => e,
        })?;
        points.push(point);
    }
    Ok(ExperimentSpec { sweep, points, run, meta: raw.meta })
}

fn validate_run(raw: &RawConfig) -> Result<RunSettings, ConfigError> {
    let r = &raw.run;
    if r.mode.monte_carlo() {
        if r.seed.is_none() {
            return Err(invalid("run.seed", "Monte Carlo mode requires a seed"));
        }
        if r.slots == 0 {
            return Err(invalid("run.slots", "must be at least 1"));
        }
    }
    if r.mode == Mode::Analytic && r.seed.is_some() {
        log::warn!("run.seed is ignored in analytic mode");
    }
    if r.u_a_cap == 0 {
        return Err(invalid("run.u_a_cap", "must be at least 1"));
    }
    if r.experiment == ExperimentKind::SinrCdf {
        if r.u_a_values.is_empty() || r.u_a_values.contains(&0) {
            return Err(invalid("run.u_a_values", "needs at least one active-user count, each >= 1"));
        }
        if r.cdf_points < 2 {
            return Err(invalid("run.cdf_points", "must be at least 2"));
        }
    }
    Ok(RunSettings {
        experiment: r.experiment,
        mode: r.mode,
        seed: if r.mode.monte_carlo() { r.seed } else { None },
        slots: r.slots,
        output: r.output.clone(),
        u_a_cap: r.u_a_cap,
        u_a_values: r.u_a_values.clone(),
        cdf_points: r.cdf_points,
    })
}

/// Sweep values in ascending order, rounded to 13 significant digits so that
/// `min + i step` lands on the decimal grid.
fn expand(s: &SweepSection) -> Result<Vec<f64>, ConfigError> {
    let range = [s.min, s.max, s.step];
    let mut values = match (&s.values, range) {
        (Some(_), r) if r.iter().any(Option::is_some) => {
            return Err(invalid("sweep", "give either `values` or `min`/`max`/`step`, not both"));
        }
        (Some(v), _) => v.clone(),
        (None, [Some(min), Some(max), Some(step)]) => {
            if !(step > 0.0 && step.is_finite()) {
                return Err(invalid("sweep.step", format!("must be > 0, got {step}")));
            }
            if !(min.is_finite() && max.is_finite() && max >= min) {
                return Err(invalid("sweep.max", format!("must be finite and >= sweep.min, got [{min}, {max}]")));
            }
            let count = ((max - min) / step + 1e-9).floor() + 1.0;
            if count > MAX_SWEEP_POINTS as f64 {
                return Err(invalid("sweep.step", format!("{count} points exceed the limit of {MAX_SWEEP_POINTS}")));
            }
            (0..count as usize).map(|i| round_sig(min + i as f64 * step)).collect()
        }
        (None, _) => return Err(invalid("sweep", "needs `values` or all of `min`, `max`, `step`")),
    };
    if values.is_empty() {
        return Err(invalid("sweep.values", "must not be empty"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid("sweep.values", format!("non-finite value {v}")));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values)
}

fn round_sig(v: f64) -> f64 {
    format!("{v:.12e}").parse().expect("formatted float parses")
}

fn resolve(raw: &RawConfig, value: Option<f64>) -> Result<Point, ConfigError> {
    let o = &raw.optics;
    let positive = [
        ("optics.P_t_mW", o.p_t_mw),
        ("optics.eta", o.eta),
        ("optics.A_r_cm2", o.a_r_cm2),
        ("optics.R_r_A_per_W", o.r_r_a_per_w),
        ("optics.T_s", o.t_s),
        ("optics.zeta", o.zeta),
        ("optics.N0_W_per_Hz", o.n0_w_per_hz),
        ("optics.B_kHz", o.b_khz),
        ("cell.D_m", raw.cell.d_m),
        ("cell.L_m", raw.cell.l_m),
    ];
    for (path, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(path, format!("must be finite and > 0, got {v}")));
        }
    }
    if !(o.psi_deg > 0.0 && o.psi_deg <= 90.0) {
        return Err(invalid(
            "optics.Psi_deg",
            format!("field-of-view invariant: the receiver FoV must lie in (0, 90] deg, got {}", o.psi_deg),
        ));
    }
    if !(o.phi_half_deg > 0.0 && o.phi_half_deg < 90.0) {
        return Err(invalid("optics.Phi_half_deg", format!("must lie in (0, 90) deg, got {}", o.phi_half_deg)));
    }
    let system = SystemConfig {
        frontend: OpticalFrontend {
            tx_power: o.p_t_mw * 1e-3,
            conversion_efficiency: o.eta,
            detector_area: o.a_r_cm2 * 1e-4,
            responsivity: o.r_r_a_per_w,
            filter_gain: o.t_s,
            lens_index: o.zeta,
            field_of_view: o.psi_deg.to_radians(),
            semi_angle: o.phi_half_deg.to_radians(),
            noise_psd: o.n0_w_per_hz,
            bandwidth: o.b_khz * 1e3,
        },
        geometry: CellGeometry::new(raw.cell.d_m, raw.cell.l_m),
    };
    system.validate().map_err(|e| match e {
        owc_aloha::Error::FieldOfView { .. } => invalid("cell.D_m / cell.L_m vs optics.Psi_deg", e.to_string()),
        e => invalid("optics", e.to_string()),
    })?;

    let p = &raw.protocol;
    if p.users == 0 {
        return Err(invalid("protocol.U", "at least one device is required"));
    }
    if !(0.0..=1.0).contains(&p.p_a) {
        return Err(invalid("protocol.p_a", format!("must lie in [0, 1], got {}", p.p_a)));
    }
    let mut protocol = ProtocolConfig::new(p.users, p.p_a);
    protocol.capture = p.capture;

    let k = &raw.code;
    if k.n == 0 {
        return Err(invalid("code.n", "block length must be positive"));
    }
    if k.n < owc_aloha::fbl::MIN_BLOCKLENGTH && !k.allow_short_blocklength {
        return Err(invalid(
            "code.n",
            format!("{} is below {}; set code.allow_short_blocklength = true to accept", k.n, owc_aloha::fbl::MIN_BLOCKLENGTH),
        ));
    }
    if !(k.rate > 0.0 && k.rate.is_finite()) {
        return Err(invalid("code.R", format!("must be finite and > 0, got {}", k.rate)));
    }
    if !(k.eps_th > 0.0 && k.eps_th < 1.0) {
        return Err(invalid("code.eps_th", format!("must lie in (0, 1), got {}", k.eps_th)));
    }
    let mut fbl = FblParams::new(k.n, k.rate).with_target_error(k.eps_th).with_dispersion(k.dispersion.into());
    fbl.allow_short_blocklength = k.allow_short_blocklength;
    Ok(Point { value, system, protocol, fbl })
}
