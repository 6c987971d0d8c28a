//! Declarative experiment configuration and the pipeline that runs it.
//!
//! A scenario is a JSON document in configuration units (MHz, GHz, ns).
//! Missing keys take their values from [`crate::params`]; unknown keys and
//! keys with the wrong unit suffix are rejected.

mod builtin;
mod output;
mod run;
mod schema;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::dynamics::{rectangular_drive, DriveSignal, Solver, SystemParams, TimeGrid};
use crate::spectral::{CombConfig, HoleSpec};
use crate::{params, units, Complex64, Error, Result};

pub use builtin::{builtin, builtin_names};
pub use run::{
    run_scenario, run_sweep, sensitivity_study, write_sensitivity_csv, Deviation, PeakRecord,
    PulseSummary, RunReport, SensitivityRow, SweepReport, TrajectoryRecord,
};

/// Comb layout, coupling and hole policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombSection {
    /// Number of sub-ensembles.
    pub m: usize,
    pub delta_omega_mhz: f64,
    pub sigma_g_mhz: f64,
    pub gamma_q_mhz: f64,
    pub q: f64,
    pub omega_c_ghz: f64,
    pub omega_s_ghz: f64,
    pub omega_over_2pi_mhz: f64,
    pub holes: HolePolicy,
}

impl Default for CombSection {
    fn default() -> Self {
        Self {
            m: params::ENSEMBLES,
            delta_omega_mhz: params::SPACING_MHZ,
            sigma_g_mhz: params::WEIGHT_WIDTH_MHZ,
            gamma_q_mhz: params::ENSEMBLE_FWHM_MHZ,
            q: params::Q_SHAPE,
            omega_c_ghz: params::CAVITY_GHZ,
            omega_s_ghz: params::CAVITY_GHZ,
            omega_over_2pi_mhz: params::COUPLING_MULTIMODE_MHZ,
            holes: HolePolicy::None,
        }
    }
}

impl CombSection {
    pub fn config(&self) -> CombConfig {
        self.config_with_coupling(self.omega_over_2pi_mhz)
    }

    pub fn config_with_coupling(&self, coupling_mhz: f64) -> CombConfig {
        CombConfig {
            ensembles: self.m,
            spacing: units::mhz(self.delta_omega_mhz),
            center: units::ghz(self.omega_s_ghz),
            cavity: units::ghz(self.omega_c_ghz),
            weight_width: units::mhz(self.sigma_g_mhz),
            coupling: units::mhz(coupling_mhz),
            fwhm: units::mhz(self.gamma_q_mhz),
            q: self.q,
        }
    }

    fn is_resonant(&self) -> bool {
        (self.omega_s_ghz - self.omega_c_ghz).abs() <= 1e-12 * self.omega_c_ghz.abs()
    }
}

/// One explicitly placed hole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleEntry {
    pub center_mhz_rel_cavity: f64,
    #[serde(default = "default_hole_fwhm")]
    pub fwhm_mhz: f64,
    #[serde(default = "default_hole_depth")]
    pub depth: f64,
}

/// Holes placed at the `k` strongest polariton peaks of the hole-free comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoHoles {
    #[serde(default = "default_hole_count")]
    pub k: usize,
    #[serde(default = "default_hole_fwhm")]
    pub fwhm_mhz: f64,
    #[serde(default = "default_hole_depth")]
    pub depth: f64,
}

impl Default for AutoHoles {
    fn default() -> Self {
        Self {
            k: params::HOLE_COUNT,
            fwhm_mhz: params::HOLE_FWHM_MHZ,
            depth: 1.0,
        }
    }
}

fn default_hole_fwhm() -> f64 {
    params::HOLE_FWHM_MHZ
}

fn default_hole_depth() -> f64 {
    1.0
}

fn default_hole_count() -> usize {
    params::HOLE_COUNT
}

/// Accepted forms: `"none"`, `"auto"`, `"auto(k=8)"`, `{"auto": {...}}` or
/// an array of [`HoleEntry`].
#[derive(Debug, Clone, PartialEq, Default)]
pub enum HolePolicy {
    #[default]
    None,
    Auto(AutoHoles),
    Explicit(Vec<HoleEntry>),
}

impl HolePolicy {
    pub fn is_none(&self) -> bool {
        match self {
            HolePolicy::None => true,
            HolePolicy::Explicit(v) => v.is_empty(),
            HolePolicy::Auto(_) => false,
        }
    }

    fn parse_str(s: &str) -> std::result::Result<Self, String> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "none" {
            return Ok(HolePolicy::None);
        }
        if t == "auto" {
            return Ok(HolePolicy::Auto(AutoHoles::default()));
        }
        if let Some(inner) = t.strip_prefix("auto(").and_then(|r| r.strip_suffix(')')) {
            let k = inner
                .strip_prefix("k=")
                .and_then(|v| v.parse::<usize>().ok())
                .ok_or_else(|| {
                    format!("cannot parse hole policy \"{s}\"; expected auto(k=<count>)")
                })?;
            return Ok(HolePolicy::Auto(AutoHoles {
                k,
                ..AutoHoles::default()
            }));
        }
        Err(format!(
            "unknown hole policy \"{s}\"; expected \"none\", \"auto(k=<count>)\", {{\"auto\": {{...}}}} or a list"
        ))
    }
}

impl Serialize for HolePolicy {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            HolePolicy::None => ser.serialize_str("none"),
            HolePolicy::Auto(a) => {
                let mut m = ser.serialize_map(Some(1))?;
                m.serialize_entry("auto", a)?;
                m.end()
            }
            HolePolicy::Explicit(v) => v.serialize(ser),
        }
    }
}

impl<'de> Deserialize<'de> for HolePolicy {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct AutoWrap {
            auto: AutoHoles,
        }
        let value = serde_json::Value::deserialize(de)?;
        match value {
            serde_json::Value::Null => Ok(HolePolicy::None),
            serde_json::Value::String(s) => HolePolicy::parse_str(&s).map_err(de::Error::custom),
            serde_json::Value::Array(_) => serde_json::from_value::<Vec<HoleEntry>>(value)
                .map(HolePolicy::Explicit)
                .map_err(de::Error::custom),
            other => serde_json::from_value::<AutoWrap>(other)
                .map(|a| HolePolicy::Auto(a.auto))
                .map_err(de::Error::custom),
        }
    }
}

/// Cavity and spin losses, drive carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub kappa_mhz: f64,
    pub gamma_mhz: f64,
    /// Drive carrier; the cavity frequency when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_p_ghz: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            kappa_mhz: params::KAPPA_MHZ,
            gamma_mhz: params::GAMMA_MHZ,
            omega_p_ghz: None,
        }
    }
}

/// A rectangular drive pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSpec {
    #[serde(default)]
    pub start_ns: f64,
    #[serde(default = "default_pulse")]
    pub duration_ns: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            start_ns: 0.0,
            duration_ns: params::PULSE_NS,
            amplitude: 1.0,
        }
    }
}

fn default_pulse() -> f64 {
    params::PULSE_NS
}

fn default_amplitude() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t_max_ns: f64,
    pub step_ns: f64,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_max_ns: 400.0,
            step_ns: params::STEP_NS,
        }
    }
}

/// Detuning sweep of the comb center for each listed coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub couplings_mhz: Vec<f64>,
    pub span_mhz: f64,
    pub points: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            couplings_mhz: vec![params::COUPLING_STRONG_MHZ, params::COUPLING_MULTIMODE_MHZ],
            span_mhz: params::SWEEP_SPAN_MHZ,
            points: params::SWEEP_POINTS,
        }
    }
}

/// Lamb shift and kernel U on a frequency grid. An empty coupling list
/// means the scenario's own coupling.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LaplaceSection {
    pub couplings_mhz: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Ode,
    Volterra,
    Laplace,
    /// ODE, Volterra and (for hole-free F) the branch-cut route, with a
    /// cross-validation report.
    All,
    /// No time evolution.
    None,
}

impl SolverChoice {
    /// Solvers to run, in order. The first is the primary one.
    pub fn solvers(&self, has_holes: bool) -> Vec<Solver> {
        match self {
            SolverChoice::Ode => vec![Solver::Ode],
            SolverChoice::Volterra => vec![Solver::Volterra],
            SolverChoice::Laplace => vec![Solver::Laplace],
            SolverChoice::All if has_holes => vec![Solver::Ode, Solver::Volterra],
            SolverChoice::All => vec![Solver::Ode, Solver::Volterra, Solver::Laplace],
            SolverChoice::None => Vec::new(),
        }
    }
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            Error::Config(format!(
                "unknown solver \"{s}\"; expected ode, volterra, laplace, all or none"
            ))
        })
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverChoice::Ode => "ode",
            SolverChoice::Volterra => "volterra",
            SolverChoice::Laplace => "laplace",
            SolverChoice::All => "all",
            SolverChoice::None => "none",
        })
    }
}

/// A fully described experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub comb: CombSection,
    pub system: SystemSection,
    #[serde(deserialize_with = "drive_or_none")]
    pub drive: Option<DriveSpec>,
    /// Initial cavity amplitude: 1 without a drive, 0 with one.
    pub a0: Option<f64>,
    /// Volterra when holes are burnt, ODE otherwise.
    pub solver: Option<SolverChoice>,
    /// Spin bins for the ODE route and the eigenproblem.
    pub bins: usize,
    pub time: TimeSection,
    /// Write modes.csv and peaks.csv for the hole-free comb.
    pub modes: bool,
    pub laplace: Option<LaplaceSection>,
    pub sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "default".into(),
            comb: CombSection::default(),
            system: SystemSection::default(),
            drive: None,
            a0: None,
            solver: None,
            bins: params::BINS,
            time: TimeSection::default(),
            modes: false,
            laplace: None,
            sweep: None,
            out_dir: None,
        }
    }
}

fn drive_or_none<'de, D: Deserializer<'de>>(
    de: D,
) -> std::result::Result<Option<DriveSpec>, D::Error> {
    let value = serde_json::Value::deserialize(de)?;
    match value {
        serde_json::Value::Null => Ok(None),
        serde_json::Value::String(s) if s == "none" => Ok(None),
        serde_json::Value::String(s) => Err(de::Error::custom(format!(
            "unknown drive \"{s}\"; expected \"none\" or {{\"start_ns\", \"duration_ns\", \"amplitude\"}}"
        ))),
        v => serde_json::from_value(v).map(Some).map_err(de::Error::custom),
    }
}

impl Scenario {
    pub fn a0(&self) -> f64 {
        self.a0
            .unwrap_or(if self.drive.is_some() { 0.0 } else { 1.0 })
    }

    pub fn solver(&self) -> SolverChoice {
        self.solver.unwrap_or(if self.comb.holes.is_none() {
            SolverChoice::Ode
        } else {
            SolverChoice::Volterra
        })
    }

    /// Fills the context-dependent defaults and checks the invariants that
    /// span several sections.
    pub fn resolved(mut self) -> Result<Self> {
        self.a0 = Some(self.a0());
        self.solver = Some(self.solver());
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(format!("scenario \"{}\": {m}", self.name)));
        if self.name.is_empty() {
            return Err(Error::Config("scenario name must not be empty".into()));
        }
        if self.bins < 2 {
            return cfg(format!("bins must be at least 2, got {}", self.bins));
        }
        if !(self.time.step_ns > 0.0) || !self.time.step_ns.is_finite() {
            return cfg(format!(
                "time.step_ns must be positive, got {}",
                self.time.step_ns
            ));
        }
        if !(self.time.t_max_ns >= 0.0) || !self.time.t_max_ns.is_finite() {
            return cfg(format!(
                "time.t_max_ns must be non-negative, got {}",
                self.time.t_max_ns
            ));
        }
        if let Some(d) = &self.drive {
            if !(d.duration_ns > 0.0) {
                return cfg(format!(
                    "drive.duration_ns must be positive, got {}",
                    d.duration_ns
                ));
            }
        }
        if let HolePolicy::Auto(a) = &self.comb.holes {
            if !self.comb.is_resonant() {
                return cfg(
                    "automatic holes need a resonant comb (omega_s_ghz = omega_c_ghz)".into(),
                );
            }
            if a.k == 0 {
                return cfg("auto holes need k >= 1".into());
            }
        }
        if self.solver() == SolverChoice::Laplace && !self.comb.holes.is_none() {
            return cfg(
                "the laplace solver does not support holes; use ode, volterra or all".into(),
            );
        }
        if let Some(s) = &self.sweep {
            if s.couplings_mhz.is_empty() || s.points == 0 || !(s.span_mhz >= 0.0) {
                return cfg(
                    "sweep needs at least one coupling, one point and a non-negative span".into(),
                );
            }
        }
        Ok(())
    }

    /// Output directory: the configured one, else `out/<name>`.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| Path::new("out").join(&self.name))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn system_params(&self) -> SystemParams {
        let cavity = units::ghz(self.comb.omega_c_ghz);
        SystemParams {
            kappa: units::mhz(self.system.kappa_mhz),
            gamma: units::mhz(self.system.gamma_mhz),
            cavity,
            carrier: self.system.omega_p_ghz.map_or(cavity, units::ghz),
        }
    }

    pub fn drive_signal(&self) -> Result<DriveSignal> {
        match &self.drive {
            None => Ok(DriveSignal::zero()),
            Some(d) => rectangular_drive(
                units::ns(d.start_ns),
                units::ns(d.duration_ns),
                Complex64::new(d.amplitude, 0.0),
            ),
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::until(units::ns(self.time.step_ns), units::ns(self.time.t_max_ns))
    }

    /// Explicit holes as absolute frequencies; `None` for the automatic policy.
    pub fn explicit_holes(&self) -> Option<Vec<HoleSpec>> {
        let cavity = units::ghz(self.comb.omega_c_ghz);
        match &self.comb.holes {
            HolePolicy::None => Some(Vec::new()),
            HolePolicy::Auto(_) => None,
            HolePolicy::Explicit(v) => Some(
                v.iter()
                    .map(|h| {
                        HoleSpec::new(
                            vec![cavity + units::mhz(h.center_mhz_rel_cavity)],
                            units::mhz(h.fwhm_mhz),
                        )
                        .with_depths(vec![h.depth])
                    })
                    .collect(),
            ),
        }
    }
}

/// Parses a scenario document. An empty document is the default scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let value: serde_json::Value = if text.trim().is_empty() {
        serde_json::Value::Object(Default::default())
    } else {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed scenario: {e}")))?
    };
    schema::check(&value)?;
    let s: Scenario = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("invalid scenario: {e}")))?;
    s.resolved()
}

/// Reads and parses a scenario file. The scenario name defaults to the file
/// stem.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    let mut s = parse_scenario(&text)?;
    let named = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("name").cloned())
        .is_some();
    if !named {
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            s.name = stem.to_string();
        }
    }
    Ok(s)
}

/// A built-in scenario name or a path to a scenario file.
pub fn resolve_scenario(arg: &str) -> Result<Scenario> {
    match builtin(arg) {
        Some(s) => Ok(s),
        None if Path::new(arg).exists() => load_scenario(Path::new(arg)),
        None => Err(Error::Config(format!(
            "\"{arg}\" is neither a built-in scenario ({}) nor an existing file",
            builtin_names().join(", ")
        ))),
    }
}
