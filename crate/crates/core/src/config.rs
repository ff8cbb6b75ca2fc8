//! Run configuration documents (TOML).
//!
//! All quantities are dimensionless: frequencies in units of the hopping ξ,
//! times in units of 1/ξ. There is deliberately no `xi` key.
//!
//! ```toml
//! seed = 7
//!
//! [waveguide]
//! n_sites = 201
//! omega_c = 0.0
//! boundary = "ring"
//!
//! [[atoms]]
//! legs = [95, 103]
//! g = 0.5
//!
//! [[atoms]]
//! legs = [97, 105]
//! g = 0.5
//!
//! [disorder]
//! kind = "onsite"
//! delta_grid = [0.0, 0.1, 0.2]
//!
//! [drive]
//! eta = 0.01
//! t0 = "auto"
//!
//! [experiment]
//! t_end = 2000.0
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderKind, DisorderSpec};
use crate::error::{Error, Result};
use crate::experiments::{NamedConfiguration, ProtocolOptions, ReleaseTime, DEFAULT_G, DEFAULT_N_SITES};
use crate::lindblad::{coupling_matrix, CouplingKernel};
use crate::model::{validate_spec, Boundary, GiantAtomSpec, SystemSpec, WaveguideSpec};
use crate::spectral::{anti_bell_state, bell_state, excited_index, w_state, AtomicDensityMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveguideSection {
    pub n_sites: usize,
    pub omega_c: f64,
    pub boundary: Boundary,
}

impl Default for WaveguideSection {
    fn default() -> Self {
        Self {
            n_sites: DEFAULT_N_SITES,
            omega_c: 0.0,
            boundary: Boundary::Ring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSection {
    /// Defaults to `omega_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    pub legs: Vec<usize>,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderSection {
    /// `None` scans both kinds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<DisorderKind>,
    pub delta: f64,
    pub n_realizations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
}

impl Default for DisorderSection {
    fn default() -> Self {
        Self {
            kind: None,
            delta: 0.2,
            n_realizations: 50,
            delta_grid: None,
        }
    }
}

/// Release time as written in a config: `"auto"`, `"continuous"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReleaseSetting {
    Time(f64),
    Keyword(ReleaseKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseKeyword {
    Auto,
    Continuous,
}

impl From<ReleaseSetting> for ReleaseTime {
    fn from(s: ReleaseSetting) -> Self {
        match s {
            ReleaseSetting::Time(t) => ReleaseTime::Fixed(t),
            ReleaseSetting::Keyword(ReleaseKeyword::Auto) => ReleaseTime::Auto,
            ReleaseSetting::Keyword(ReleaseKeyword::Continuous) => ReleaseTime::Continuous,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveSection {
    pub target_atom: usize,
    pub eta: f64,
    pub t0: ReleaseSetting,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_window: Option<f64>,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            target_atom: 0,
            eta: 0.01,
            t0: ReleaseSetting::Keyword(ReleaseKeyword::Auto),
            search_window: None,
        }
    }
}

/// Initial atomic state for `evolve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    Ground,
    Bell,
    AntiBell,
    W,
    /// Only atom `i` (zero-based) excited.
    Excited(usize),
}

impl InitialState {
    pub fn density(&self, n_atoms: usize) -> Result<AtomicDensityMatrix> {
        let wrong = |what: &str| Error::Config(format!("initial state '{what}' needs a different number of atoms"));
        let psi = match self {
            InitialState::Ground => return Ok(AtomicDensityMatrix::ground(n_atoms)),
            InitialState::Bell if n_atoms == 2 => bell_state(),
            InitialState::AntiBell if n_atoms == 2 => anti_bell_state(),
            InitialState::W if n_atoms == 3 => w_state(),
            InitialState::Excited(i) if *i < n_atoms => {
                let mut v = nalgebra::DVector::from_element(1 << n_atoms, num_complex::Complex64::new(0.0, 0.0));
                v[excited_index(*i, n_atoms)] = num_complex::Complex64::new(1.0, 0.0);
                v
            }
            other => return Err(wrong(&other.to_string())),
        };
        AtomicDensityMatrix::pure(n_atoms, &psi)
    }
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Ground => f.write_str("ground"),
            InitialState::Bell => f.write_str("bell"),
            InitialState::AntiBell => f.write_str("antibell"),
            InitialState::W => f.write_str("w"),
            InitialState::Excited(i) => write!(f, "excited:{i}"),
        }
    }
}

impl FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ground" => InitialState::Ground,
            "bell" => InitialState::Bell,
            "antibell" => InitialState::AntiBell,
            "w" => InitialState::W,
            _ => match s.strip_prefix("excited:").map(str::parse) {
                Some(Ok(i)) => InitialState::Excited(i),
                _ => return Err(Error::Config(format!("unknown initial state '{s}'"))),
            },
        })
    }
}

impl Serialize for InitialState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for InitialState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Named layout; mutually exclusive with explicit `[[atoms]]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub configuration: Option<NamedConfiguration>,
    /// Coupling used with a named configuration.
    pub g: f64,
    pub t_end: f64,
    pub dt: f64,
    pub g_grid: Vec<f64>,
    pub initial: InitialState,
    pub calibration_legs: Vec<usize>,
    pub calibration_g: f64,
    pub calibration_t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scattering_index: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            configuration: None,
            g: DEFAULT_G,
            t_end: crate::experiments::DEFAULT_T_END,
            dt: 1.0,
            g_grid: (0..=20).map(|k| k as f64 / 20.0).collect(),
            initial: InitialState::Bell,
            calibration_legs: vec![0, 8],
            calibration_g: 0.1,
            calibration_t_end: 50.0,
            scattering_index: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub waveguide: WaveguideSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomSection>,
    #[serde(default)]
    pub disorder: DisorderSection,
    #[serde(default)]
    pub drive: DriveSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Set `path` (dot separated, numeric segments index arrays) to `raw`,
/// parsed as a TOML value or taken as a bare string.
pub fn apply_override(doc: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let bad = || Error::Config(format!("cannot set '{path}'"));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(bad());
    }
    let (last, parents) = segments.split_last().ok_or_else(bad)?;
    let mut cur: &mut toml::Value = &mut *doc.entry(parents.first().copied().unwrap_or(last).to_string()).or_insert_with(|| {
        toml::Value::Table(toml::Table::new())
    });
    if parents.is_empty() {
        *cur = parse_value(raw);
        return Ok(());
    }
    for seg in &parents[1..] {
        cur = step(cur, seg).ok_or_else(bad)?;
    }
    match cur {
        toml::Value::Table(t) => {
            t.insert(last.to_string(), parse_value(raw));
        }
        toml::Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad())?;
            *a.get_mut(i).ok_or_else(bad)? = parse_value(raw);
        }
        _ => return Err(bad()),
    }
    Ok(())
}

fn step<'a>(v: &'a mut toml::Value, seg: &str) -> Option<&'a mut toml::Value> {
    match v {
        toml::Value::Table(t) => Some(t.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()))),
        toml::Value::Array(a) => a.get_mut(seg.parse::<usize>().ok()?),
        _ => None,
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Self::with_overrides(s, &[])
    }

    /// Parse `s` after applying `key=value` overrides.
    pub fn with_overrides(s: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            apply_override(&mut doc, k.trim(), v.trim())?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::with_overrides(&s, overrides)
    }

    fn check(&self) -> Result<()> {
        if self.configuration().is_some() && !self.atoms.is_empty() {
            return Err(Error::Config(
                "experiment.configuration and [[atoms]] are mutually exclusive".into(),
            ));
        }
        self.system_spec().map(|_| ())
    }

    /// Named configuration in use; braided2 when no atoms are given.
    pub fn configuration(&self) -> Option<NamedConfiguration> {
        match (self.experiment.configuration, self.atoms.is_empty()) {
            (Some(c), _) => Some(c),
            (None, true) => Some(NamedConfiguration::Braided2),
            (None, false) => None,
        }
    }

    pub fn waveguide(&self) -> WaveguideSpec {
        let w = &self.waveguide;
        WaveguideSpec::clean(w.n_sites, w.omega_c, 1.0, w.boundary)
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        if let Some(c) = self.configuration() {
            return c.resolve_on(self.waveguide(), self.experiment.g);
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| GiantAtomSpec::new(a.omega.unwrap_or(self.waveguide.omega_c), a.legs.clone(), a.g))
            .collect();
        let spec = SystemSpec::new(self.waveguide(), atoms);
        validate_spec(&spec).into_result()?;
        Ok(spec)
    }

    pub fn kernel(&self) -> Result<CouplingKernel> {
        let spec = self.system_spec()?;
        coupling_matrix(&spec.atoms, spec.waveguide.omega_c, spec.waveguide.xi)
    }

    pub fn disorder_kinds(&self) -> Vec<DisorderKind> {
        match self.disorder.kind {
            Some(k) => vec![k],
            None => vec![DisorderKind::Onsite, DisorderKind::Hopping],
        }
    }

    pub fn disorder_spec(&self, kind: DisorderKind) -> DisorderSpec {
        DisorderSpec {
            n_realizations: self.disorder.n_realizations,
            ..DisorderSpec::new(kind, self.disorder.delta, self.seed)
        }
    }

    pub fn delta_grid(&self) -> Vec<f64> {
        self.disorder.delta_grid.clone().unwrap_or_else(|| vec![self.disorder.delta])
    }

    pub fn protocol_options(&self) -> ProtocolOptions {
        ProtocolOptions {
            t_end: self.experiment.t_end,
            dt: self.experiment.dt,
            target_atom: self.drive.target_atom,
            coupling: self.experiment.g,
            search_window: self.drive.search_window,
            ..ProtocolOptions::new(self.drive.eta, self.drive.t0.into())
        }
    }
}
