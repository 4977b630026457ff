//! Flat TOML configuration with dotted keys.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use qubus_core::models::{QubitOverride, SystemParams};
use toml::Value;

#[derive(Debug)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.file, l, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Spectrum,
    Steady,
    Entangle,
    FidelityGrid,
    DampingGrid,
    RisetimeScan,
    Bell,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Spectrum,
        Kind::Steady,
        Kind::Entangle,
        Kind::FidelityGrid,
        Kind::DampingGrid,
        Kind::RisetimeScan,
        Kind::Bell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::Steady => "steady",
            Kind::Entangle => "entangle",
            Kind::FidelityGrid => "fidelity-grid",
            Kind::DampingGrid => "damping-grid",
            Kind::RisetimeScan => "risetime-scan",
            Kind::Bell => "bell",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub scale: Scale,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                let f = k as f64 / (n - 1) as f64;
                match self.scale {
                    Scale::Linear => self.start + f * (self.stop - self.start),
                    Scale::Log => (self.start.ln() + f * (self.stop.ln() - self.start.ln())).exp(),
                }
            })
            .collect()
    }
}

/// Raw key/value pairs with their source lines.
pub struct RawConfig {
    file: String,
    values: BTreeMap<String, Value>,
    lines: BTreeMap<String, usize>,
    used: std::cell::RefCell<BTreeSet<String>>,
}

fn flatten(prefix: &str, t: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(inner) => flatten(&key, inner, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn strip_quotes(s: &str) -> String {
    s.split('.').map(|p| p.trim().trim_matches('"').trim_matches('\'')).collect::<Vec<_>>().join(".")
}

/// Line of each `key = value` assignment, qualified by the enclosing table header.
fn key_lines(text: &str) -> BTreeMap<String, usize> {
    let mut section = String::new();
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            section = strip_quotes(line.trim_start_matches('[').split(']').next().unwrap_or(""));
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            let k = strip_quotes(k);
            let full = if section.is_empty() { k } else { format!("{section}.{k}") };
            out.entry(full).or_insert(i + 1);
        }
    }
    out
}

impl RawConfig {
    pub fn parse(file: &str, text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { file: file.to_string(), line, message: e.message().trim().to_string() }
        })?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values);
        Ok(Self { file: file.to_string(), values, lines: key_lines(text), used: Default::default() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { file: file.clone(), line: None, message: format!("cannot read: {e}") })?;
        Self::parse(&file, &text)
    }

    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.lines.get(key).copied().or_else(|| {
            // an axis reports the line of its first component
            self.lines.iter().find(|(k, _)| k.starts_with(&format!("{key}."))).map(|(_, &l)| l)
        });
        ConfigError { file: self.file.clone(), line, message: message.into() }
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key) || self.values.keys().any(|k| k.starts_with(&format!("{key}.")))
    }

    fn get(&self, key: &str) -> Option<&Value> {
        let v = self.values.get(key);
        if v.is_some() {
            self.used.borrow_mut().insert(key.to_string());
        }
        v
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(self.error(key, format!("`{key}` must be a number, found {}", v.type_str()))),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(v) => Err(self.error(key, format!("`{key}` must be a non-negative integer, found {v}"))),
        }
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        Ok(self.usize(key)?.map(|v| v as u64))
    }

    pub fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(self.error(key, format!("`{key}` must be true or false, found {v}"))),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(self.error(key, format!("`{key}` must be a string, found {v}"))),
        }
    }

    /// Accepts a number or a list of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(self.error(key, format!("`{key}` entries must be numbers, found {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Ok(Some(vec![self.f64(key)?.unwrap()])),
        }
    }

    pub fn str_list(&self, key: &str) -> Result<Option<Vec<String>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(self.error(key, format!("`{key}` entries must be strings, found {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(Value::String(s)) => Ok(Some(vec![s.clone()])),
            Some(v) => Err(self.error(key, format!("`{key}` must be a string or list of strings, found {v}"))),
        }
    }

    /// Axis `key.{start,stop,points,scale}`; missing parts come from `default`.
    pub fn axis(&self, key: &str, default: Option<Axis>) -> Result<Option<Axis>, ConfigError> {
        if !self.has(key) {
            return Ok(default);
        }
        if let Some(Value::Array(_)) = self.values.get(key) {
            return Err(self.error(key, format!("`{key}` must use `{key}.start`, `.stop`, `.points` and `.scale`")));
        }
        let d = default.clone();
        let need = |part: &str, dv: Option<f64>| -> Result<f64, ConfigError> {
            self.f64(&format!("{key}.{part}"))?
                .or(dv)
                .ok_or_else(|| self.error(key, format!("axis `{key}` is missing `{key}.{part}`")))
        };
        let start = need("start", d.as_ref().map(|a| a.start))?;
        let stop = need("stop", d.as_ref().map(|a| a.stop))?;
        let pkey = format!("{key}.points");
        let points = self.usize(&pkey)?.or(d.as_ref().map(|a| a.points)).ok_or_else(|| self.error(key, format!("axis `{key}` is missing `{pkey}`")))?;
        let skey = format!("{key}.scale");
        let scale = match self.str(&skey)?.as_deref() {
            None => d.as_ref().map(|a| a.scale).unwrap_or(Scale::Linear),
            Some("linear") => Scale::Linear,
            Some("log") => Scale::Log,
            Some(o) => return Err(self.error(&skey, format!("unknown scale `{o}`; use linear or log"))),
        };
        if points < 2 {
            return Err(self.error(&pkey, format!("axis `{key}` needs at least 2 points, got {points}")));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err(self.error(key, format!("axis `{key}` bounds must be finite")));
        }
        if scale == Scale::Log && (start <= 0.0 || stop <= 0.0) {
            return Err(self.error(key, format!("log axis `{key}` needs positive bounds")));
        }
        Ok(Some(Axis { start, stop, points, scale }))
    }

    /// Keys present in the file that were never read.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.values.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelChoice {
    Dressed,
    Bare,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub params: SystemParams,
    pub model: ModelChoice,
    pub truncation: Option<usize>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub spectrum: SpectrumConfig,
    pub entangle: EntangleConfig,
    pub fidelity: FidelityConfig,
    pub grid: GridConfig,
    pub bell_skip_flip: bool,
}

#[derive(Clone, Debug)]
pub struct SpectrumConfig {
    pub n_th: Vec<f64>,
    pub inits: Vec<String>,
    pub t_cut: Option<f64>,
    pub half_window: Option<f64>,
    pub steady_correlator: bool,
}

#[derive(Clone, Debug)]
pub struct EntangleConfig {
    pub points: usize,
    pub input: (u8, u8),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EnsembleChoice {
    Axis,
    Haar(usize),
}

#[derive(Clone, Debug)]
pub struct FidelityConfig {
    pub ensemble: EnsembleChoice,
    pub local_phase: bool,
}

#[derive(Clone, Debug, Default)]
pub struct GridConfig {
    pub delta: Option<Axis>,
    pub delta_r: Option<Axis>,
    pub gamma_q: Option<Axis>,
    pub gamma_h: Option<Axis>,
    /// Rise-time axis in units of the interaction time when `t0_relative`.
    pub t0: Option<Axis>,
    pub t0_relative: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub truncation: Option<usize>,
}

const SIGNED: [&str; 3] = ["delta", "delta_r", "omega_r"];

fn read_params(raw: &RawConfig) -> Result<SystemParams, ConfigError> {
    let mut p = SystemParams::dressed(0.05, 5e-3, 1e-4, 1e-4, 0.0);
    if let Some(h) = raw.f64("params.omega_h")? {
        if h != 1.0 {
            return Err(raw.error("params.omega_h", "frequencies are in units of omega_h; params.omega_h must be 1"));
        }
    }
    let omega_r = raw.f64("params.omega_r")?;
    let delta_r = raw.f64("params.delta_r")?;
    match (omega_r, delta_r) {
        (Some(o), Some(d)) => {
            if ((o - 1.0) - d).abs() > 1e-12 * o.abs().max(1.0) {
                return Err(raw.error(
                    "params.delta_r",
                    format!("params.delta_r = {d} contradicts params.omega_r - omega_h = {}", o - 1.0),
                ));
            }
            p.omega_r = o;
        }
        (Some(o), None) => p.omega_r = o,
        (None, Some(d)) => p.set_delta_r(d),
        (None, None) => {}
    }
    if let Some(v) = raw.f64("params.omega_q")? {
        p.omega_q = v;
    }
    p.delta = raw.f64_or("params.delta", 0.0)?;
    if let Some(wd) = raw.f64("params.omega_d")? {
        let implied = wd - p.omega_q;
        if raw.has("params.delta") && (implied - p.delta).abs() > 1e-12 * wd.abs().max(1.0) {
            return Err(raw.error("params.omega_d", "params.omega_d - params.omega_q contradicts params.delta"));
        }
        p.delta = implied;
    }
    p.g = raw.f64_or("params.g", p.g)?;
    p.gamma_q = raw.f64_or("params.gamma_q", p.gamma_q)?;
    p.gamma_h = raw.f64_or("params.gamma_h", p.gamma_h)?;
    let nth = raw.f64("params.n_th_h")?;
    let temp = raw.f64("params.temperature")?;
    p.n_th_h = match (nth, temp) {
        (Some(_), Some(_)) => {
            return Err(raw.error("params.temperature", "give either params.n_th_h or params.temperature, not both"))
        }
        (Some(n), None) => n,
        (None, Some(t)) => {
            if t < 0.0 {
                return Err(raw.error("params.temperature", "temperature must be non-negative"));
            }
            qubus_core::models::bose_einstein(1.0, t)
        }
        (None, None) => 0.0,
    };
    p.n_th_q = raw.f64_or("params.n_th_q", 0.0)?;
    for (j, q) in ["q1", "q2"].iter().enumerate() {
        p.overrides[j] = QubitOverride {
            omega_r: raw.f64(&format!("params.{q}.omega_r"))?,
            g: raw.f64(&format!("params.{q}.g"))?,
            delta: raw.f64(&format!("params.{q}.delta"))?,
        };
    }
    for (key, v) in [
        ("params.g", p.g),
        ("params.gamma_q", p.gamma_q),
        ("params.gamma_h", p.gamma_h),
        ("params.n_th_h", p.n_th_h),
        ("params.n_th_q", p.n_th_q),
        ("params.omega_q", p.omega_q),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(raw.error(key, format!("`{key}` must be finite and non-negative, got {v}")));
        }
    }
    for name in SIGNED {
        let key = format!("params.{name}");
        if let Some(v) = raw.values.get(&key).and_then(|v| v.as_float()) {
            if !v.is_finite() {
                return Err(raw.error(&key, format!("`{key}` must be finite")));
            }
        }
    }
    p.validate().map_err(|e| raw.error("params", e.to_string()))?;
    Ok(p)
}

fn read_input(raw: &RawConfig, key: &str, default: (u8, u8)) -> Result<(u8, u8), ConfigError> {
    match raw.str(key)? {
        None => Ok(default),
        Some(s) => {
            let b: Vec<char> = s.chars().collect();
            match b.as_slice() {
                [a, c] if "01".contains(*a) && "01".contains(*c) => Ok(((*a == '1') as u8, (*c == '1') as u8)),
                _ => Err(raw.error(key, format!("`{key}` must be one of \"00\", \"01\", \"10\", \"11\", got {s:?}"))),
            }
        }
    }
}

impl ExperimentConfig {
    /// Reads every key relevant to `kind` and rejects anything left over.
    pub fn from_raw(raw: &RawConfig, kind: Kind, ov: &Overrides) -> Result<Self, ConfigError> {
        if let Some(k) = raw.str("kind")? {
            match Kind::parse(&k) {
                None => return Err(raw.error("kind", format!("unknown kind `{k}`"))),
                Some(found) if found != kind => {
                    return Err(raw.error("kind", format!("config is for `{k}` but `{}` was requested", kind.name())))
                }
                _ => {}
            }
        }
        let params = read_params(raw)?;
        let model = match raw.str("model")?.as_deref() {
            None | Some("dressed") => ModelChoice::Dressed,
            Some("bare") => ModelChoice::Bare,
            Some(o) => return Err(raw.error("model", format!("unknown model `{o}`; use dressed or bare"))),
        };
        if model == ModelChoice::Bare && !matches!(kind, Kind::Spectrum | Kind::Steady) {
            return Err(raw.error("model", format!("the bare model is only available for spectrum and steady, not {}", kind.name())));
        }
        let truncation = match ov.truncation {
            Some(n) => Some(n),
            None => raw.usize("run.truncation")?,
        };
        if let Some(n) = truncation {
            if n < 2 {
                return Err(raw.error("run.truncation", format!("truncation must be at least 2, got {n}")));
            }
        }
        let seed = match ov.seed {
            Some(s) => s,
            None => raw.u64("run.seed")?.unwrap_or(0),
        };
        let output_dir = match &ov.out {
            Some(o) => o.clone(),
            None => PathBuf::from(raw.str("run.output_dir")?.unwrap_or_else(|| "out".into())),
        };
        let threads = match ov.threads {
            Some(t) => Some(t),
            None => raw.usize("run.threads")?,
        };
        if threads == Some(0) {
            return Err(raw.error("run.threads", "thread count must be positive"));
        }

        let spectrum = SpectrumConfig {
            n_th: raw.f64_list("spectrum.n_th")?.unwrap_or_else(|| vec![params.n_th_h]),
            inits: raw.str_list("spectrum.init")?.unwrap_or_else(|| vec!["ground".into(), "excited".into()]),
            t_cut: raw.f64("spectrum.t_cut")?,
            half_window: raw.f64("spectrum.half_window")?,
            steady_correlator: match raw.str("spectrum.correlator")?.as_deref() {
                None | Some("transient") => false,
                Some("steady") => true,
                Some(o) => return Err(raw.error("spectrum.correlator", format!("unknown correlator `{o}`; use transient or steady"))),
            },
        };
        if spectrum.n_th.is_empty() {
            return Err(raw.error("spectrum.n_th", "spectrum.n_th must not be empty"));
        }
        if let Some(bad) = spectrum.n_th.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(raw.error("spectrum.n_th", format!("occupations must be non-negative, got {bad}")));
        }
        if let Some(bad) = spectrum.inits.iter().find(|s| !matches!(s.as_str(), "ground" | "excited")) {
            return Err(raw.error("spectrum.init", format!("unknown initial state `{bad}`; use ground or excited")));
        }
        for key in ["spectrum.t_cut", "spectrum.half_window"] {
            if let Some(v) = raw.values.get(key).and_then(|v| v.as_float().or(v.as_integer().map(|i| i as f64))) {
                if !(v > 0.0) {
                    return Err(raw.error(key, format!("`{key}` must be positive")));
                }
            }
        }

        let points = raw.usize("entangle.points")?.unwrap_or(4001);
        if points < 3 || points % 2 == 0 {
            return Err(raw.error("entangle.points", format!("entangle.points must be odd and at least 3, got {points}")));
        }
        let entangle = EntangleConfig { points, input: read_input(raw, "entangle.input", (1, 0))? };

        let ensemble = match raw.str("fidelity.ensemble")?.as_deref() {
            None | Some("axis") => EnsembleChoice::Axis,
            Some("haar") => {
                let n = raw.usize("fidelity.samples")?.unwrap_or(128);
                if n == 0 {
                    return Err(raw.error("fidelity.samples", "fidelity.samples must be positive"));
                }
                EnsembleChoice::Haar(n)
            }
            Some(o) => return Err(raw.error("fidelity.ensemble", format!("unknown ensemble `{o}`; use axis or haar"))),
        };
        let local_phase = raw.bool("fidelity.local_phase")?.unwrap_or(false);
        let fidelity = FidelityConfig { ensemble, local_phase };

        let lin = |a: f64, b: f64, n: usize| Some(Axis { start: a, stop: b, points: n, scale: Scale::Linear });
        let grid = match kind {
            Kind::FidelityGrid => GridConfig {
                delta: raw.axis("grid.delta", lin(0.0, 0.02, 5))?,
                delta_r: raw.axis("grid.delta_r", lin(-0.1, -0.01, 10))?,
                ..Default::default()
            },
            Kind::DampingGrid => {
                let s = (params.g * params.g / params.delta_r()).abs();
                let log = |a: f64, b: f64| Some(Axis { start: a, stop: b, points: 5, scale: Scale::Log });
                GridConfig {
                    gamma_q: raw.axis("grid.gamma_q", log((1e-3 * s).max(1e-9), 1e-1 * s))?,
                    gamma_h: raw.axis("grid.gamma_h", log((1e-2 * s).max(1e-9), 10.0 * s))?,
                    ..Default::default()
                }
            }
            Kind::RisetimeScan => {
                let rel = raw.bool("grid.t0.relative")?.unwrap_or(!raw.has("grid.t0"));
                GridConfig { t0: raw.axis("grid.t0", lin(0.0, 0.2, 41))?, t0_relative: rel, ..Default::default() }
            }
            _ => GridConfig::default(),
        };
        for (name, ax) in [("grid.gamma_q", &grid.gamma_q), ("grid.gamma_h", &grid.gamma_h), ("grid.t0", &grid.t0)] {
            if let Some(a) = ax {
                if a.start < 0.0 || a.stop < 0.0 {
                    return Err(raw.error(name, format!("axis `{name}` must be non-negative")));
                }
            }
        }
        if let Some(a) = &grid.delta_r {
            if a.values().iter().any(|v| *v == 0.0) {
                return Err(raw.error("grid.delta_r", "grid.delta_r contains 0, where the gate time is singular"));
            }
        }

        let bell_skip_flip = raw.bool("bell.skip_flip")?.unwrap_or(false);

        let unused = raw.unused();
        if let Some(k) = unused.first() {
            return Err(raw.error(k, format!("unknown or irrelevant key `{k}` for {}", kind.name())));
        }
        Ok(Self {
            kind,
            params,
            model,
            truncation,
            seed,
            output_dir,
            threads,
            spectrum,
            entangle,
            fidelity,
            grid,
            bell_skip_flip,
        })
    }
}
