//! Flat `key = value` run configuration.
//!
//! One key per line, `#` starts a comment, lists are comma separated.
//! Parsing never stops at the first problem: every unknown, missing,
//! duplicated or out-of-range key is reported with its line.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::densities::{DensityField, DensitySuite, PairPotential};
use crate::error::{Error, Result};
use crate::generator::Observable;
use crate::geometry::DomainGeometry;
use crate::simulator::{GirsanovMode, InitialLayout, Scheme, SimConfig};

pub const CONFIG_VERSION: u32 = 1;

/// Smallest admissible boundary density; values down to it act as the
/// reflecting limit.
pub const BETA_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConfigErrorKind {
    UnknownKey,
    MissingKey,
    RangeError,
    DuplicateKey { first_line: usize },
    Syntax,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            ConfigErrorKind::UnknownKey => "unknown key".to_string(),
            ConfigErrorKind::MissingKey => "missing key".to_string(),
            ConfigErrorKind::RangeError => "invalid value for".to_string(),
            ConfigErrorKind::DuplicateKey { first_line } => {
                format!("duplicate key (first set on line {first_line})")
            }
            ConfigErrorKind::Syntax => "syntax error near".to_string(),
        };
        match self.line {
            Some(l) => write!(f, "line {l}: {what} `{}`", self.key)?,
            None => write!(f, "{what} `{}`", self.key)?,
        }
        if !self.message.is_empty() {
            write!(f, ": {}", self.message)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometrySpec {
    Ball,
    Interval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensitySpec {
    Uniform,
    GaussianAlpha,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSpec {
    None,
    LennardJones,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSpec {
    Grid,
    UniformInterior,
    Explicit,
}

/// Everything a `run` needs: the simulation, the ensemble size and the
/// requested outputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub version: u32,
    pub geometry: GeometrySpec,
    pub dimension: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub interval_a: f64,
    pub interval_b: f64,
    pub particles: usize,
    pub delta: u8,
    pub scheme: Scheme,
    pub dt: f64,
    pub epsilon: f64,
    pub horizon: f64,
    pub seed: u64,
    pub stride: usize,
    pub paths: u64,
    pub density: DensitySpec,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_width: f64,
    pub pair: PairSpec,
    pub lj_epsilon: f64,
    pub lj_c: f64,
    pub r_min: Option<f64>,
    pub clamp_at_cutoff: bool,
    pub pair_strength: f64,
    pub pair_width: f64,
    pub initial: InitialSpec,
    pub initial_positions: Vec<f64>,
    pub girsanov: GirsanovMode,
    pub freeze_escape_drift: bool,
    pub csv_paths: u64,
    pub observables: Vec<String>,
    pub hist_bins: usize,
    pub output_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            geometry: GeometrySpec::Ball,
            dimension: 2,
            center: vec![0.0, 0.0],
            radius: 1.0,
            interval_a: 0.0,
            interval_b: 1.0,
            particles: 1,
            delta: 0,
            scheme: Scheme::RegularizedEuler,
            dt: 1e-3,
            epsilon: 1e-2,
            horizon: 1.0,
            seed: 1,
            stride: 10,
            paths: 1,
            density: DensitySpec::Uniform,
            alpha: 1.0,
            beta: 1.0,
            alpha_width: 1.0,
            pair: PairSpec::None,
            lj_epsilon: 0.1,
            lj_c: 0.1,
            r_min: None,
            clamp_at_cutoff: false,
            pair_strength: 1.0,
            pair_width: 0.2,
            initial: InitialSpec::Grid,
            initial_positions: Vec::new(),
            girsanov: GirsanovMode::Off,
            freeze_escape_drift: false,
            csv_paths: 1,
            observables: Vec::new(),
            hist_bins: 36,
            output_dir: "output".into(),
        }
    }
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn new(text: &str) -> Self {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        let mut errors = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                errors.push(ConfigError {
                    kind: ConfigErrorKind::Syntax,
                    key: content.to_string(),
                    line: Some(line),
                    message: "expected `key = value`".into(),
                });
                continue;
            };
            let key = k.trim().to_string();
            if key.is_empty() {
                errors.push(ConfigError {
                    kind: ConfigErrorKind::Syntax,
                    key: content.to_string(),
                    line: Some(line),
                    message: "empty key".into(),
                });
                continue;
            }
            if let Some(prev) = entries.get(&key) {
                errors.push(ConfigError {
                    kind: ConfigErrorKind::DuplicateKey { first_line: prev.line },
                    key,
                    line: Some(line),
                    message: String::new(),
                });
                continue;
            }
            entries.insert(
                key,
                Entry {
                    value: v.trim().to_string(),
                    line,
                    used: false,
                },
            );
        }
        Self { entries, errors }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn range(&mut self, key: &str, message: impl Into<String>) {
        let line = self.line_of(key);
        self.errors.push(ConfigError {
            kind: ConfigErrorKind::RangeError,
            key: key.to_string(),
            line,
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str, required: bool) -> Option<(String, usize)> {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.used = true;
                Some((e.value.clone(), e.line))
            }
            None => {
                if required {
                    self.errors.push(ConfigError {
                        kind: ConfigErrorKind::MissingKey,
                        key: key.to_string(),
                        line: None,
                        message: String::new(),
                    });
                }
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Option<T> {
        match self.raw(key, default.is_none()) {
            Some((v, _)) => match v.parse::<T>() {
                Ok(x) => Some(x),
                Err(_) => {
                    self.range(key, format!("cannot parse `{v}`"));
                    None
                }
            },
            None => default,
        }
    }

    fn real(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        let v = self.parsed::<f64>(key, default)?;
        if !v.is_finite() {
            self.range(key, "must be finite");
            return None;
        }
        Some(v)
    }

    fn list(&mut self, key: &str) -> Option<Vec<String>> {
        let (v, _) = self.raw(key, false)?;
        if v.is_empty() {
            return Some(Vec::new());
        }
        Some(v.split(',').map(|s| s.trim().to_string()).collect())
    }

    fn reals(&mut self, key: &str) -> Option<Vec<f64>> {
        let items = self.list(key)?;
        let mut out = Vec::with_capacity(items.len());
        for it in items {
            match it.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    self.range(key, format!("`{it}` is not a finite number"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn choice<T: Copy>(&mut self, key: &str, options: &[(&str, T)], default: Option<T>) -> Option<T> {
        match self.raw(key, default.is_none()) {
            Some((v, _)) => match options.iter().find(|(name, _)| *name == v) {
                Some((_, t)) => Some(*t),
                None => {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    self.range(key, format!("`{v}` is not one of {}", names.join(", ")));
                    None
                }
            },
            None => default,
        }
    }

    fn finish_unknown(&mut self) {
        for (k, e) in &self.entries {
            if !e.used {
                self.errors.push(ConfigError {
                    kind: ConfigErrorKind::UnknownKey,
                    key: k.clone(),
                    line: Some(e.line),
                    message: String::new(),
                });
            }
        }
    }
}

const SCHEMES: &[(&str, Scheme)] = &[
    ("regularized_euler", Scheme::RegularizedEuler),
    ("time_change", Scheme::TimeChange),
];
const GEOMETRIES: &[(&str, GeometrySpec)] = &[("ball", GeometrySpec::Ball), ("interval", GeometrySpec::Interval)];
const DENSITIES: &[(&str, DensitySpec)] = &[
    ("uniform", DensitySpec::Uniform),
    ("gaussian-alpha", DensitySpec::GaussianAlpha),
];
const PAIRS: &[(&str, PairSpec)] = &[
    ("none", PairSpec::None),
    ("lennard-jones", PairSpec::LennardJones),
    ("gaussian", PairSpec::Gaussian),
];
const LAYOUTS: &[(&str, InitialSpec)] = &[
    ("grid", InitialSpec::Grid),
    ("uniform-interior", InitialSpec::UniformInterior),
    ("explicit", InitialSpec::Explicit),
];
const GIRSANOV: &[(&str, GirsanovMode)] = &[("off", GirsanovMode::Off), ("reweight", GirsanovMode::Reweight)];
const BOOLS: &[(&str, bool)] = &[("true", true), ("false", false)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, t)| *t == v).map(|(n, _)| *n).expect("every variant is named")
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, Vec<ConfigError>> {
    let mut r = Reader::new(text);
    let d = RunConfig::default();

    let version = r.parsed::<u32>("version", None);
    let geometry = r.choice("geometry", GEOMETRIES, None);
    let particles = r.parsed::<usize>("particles", None);
    let delta = r.parsed::<u8>("delta", None);
    let horizon = r.real("horizon", None);
    let seed = r.parsed::<u64>("seed", None);

    let mut cfg = d.clone();
    let (mut dimension, mut center, mut radius) = (d.dimension, None, d.radius);
    let (mut ia, mut ib) = (d.interval_a, d.interval_b);
    match geometry {
        Some(GeometrySpec::Ball) => {
            dimension = r.parsed("dimension", Some(d.dimension)).unwrap_or(d.dimension);
            center = r.reals("center");
            radius = r.real("radius", Some(d.radius)).unwrap_or(d.radius);
        }
        Some(GeometrySpec::Interval) => {
            ia = r.real("interval_a", Some(d.interval_a)).unwrap_or(d.interval_a);
            ib = r.real("interval_b", Some(d.interval_b)).unwrap_or(d.interval_b);
            dimension = 1;
        }
        None => {}
    }

    let scheme = r.choice("scheme", SCHEMES, Some(d.scheme));
    let dt = r.real("dt", Some(d.dt));
    let epsilon = r.real("epsilon", Some(d.epsilon));
    let stride = r.parsed::<usize>("stride", Some(d.stride));
    let paths = r.parsed::<u64>("paths", Some(d.paths));
    let density = r.choice("density", DENSITIES, Some(d.density));
    let alpha = r.real("alpha", Some(d.alpha));
    let beta = r.real("beta", Some(d.beta));
    let alpha_width = if density == Some(DensitySpec::GaussianAlpha) {
        r.real("alpha_width", Some(d.alpha_width))
    } else {
        Some(d.alpha_width)
    };
    let pair = r.choice("pair", PAIRS, Some(d.pair));
    let (mut lj_epsilon, mut lj_c, mut r_min, mut clamp) = (Some(d.lj_epsilon), Some(d.lj_c), None, Some(false));
    let (mut strength, mut width) = (Some(d.pair_strength), Some(d.pair_width));
    match pair {
        Some(PairSpec::LennardJones) => {
            lj_epsilon = r.real("lj_epsilon", Some(d.lj_epsilon));
            lj_c = r.real("lj_c", Some(d.lj_c));
            if r.line_of("r_min").is_some() {
                r_min = r.real("r_min", None);
            }
            clamp = r.choice("clamp_at_cutoff", BOOLS, Some(false));
        }
        Some(PairSpec::Gaussian) => {
            strength = r.real("pair_strength", Some(d.pair_strength));
            width = r.real("pair_width", Some(d.pair_width));
        }
        _ => {}
    }
    let initial = r.choice("initial", LAYOUTS, Some(d.initial));
    let initial_positions = if initial == Some(InitialSpec::Explicit) {
        let v = r.reals("initial_positions");
        if v.is_none() && r.line_of("initial_positions").is_none() {
            r.errors.push(ConfigError {
                kind: ConfigErrorKind::MissingKey,
                key: "initial_positions".into(),
                line: None,
                message: "required when initial = explicit".into(),
            });
        }
        v
    } else {
        Some(Vec::new())
    };
    let girsanov = r.choice("girsanov", GIRSANOV, Some(d.girsanov));
    let freeze = r.choice("freeze_escape_drift", BOOLS, Some(false));
    let csv_paths = r.parsed::<u64>("csv_paths", Some(d.csv_paths));
    let observables = r.list("observables").unwrap_or_default();
    let hist_bins = r.parsed::<usize>("hist_bins", Some(d.hist_bins));
    let output_dir = r.raw("output_dir", false).map(|(v, _)| v).unwrap_or(d.output_dir.clone());

    r.finish_unknown();

    // Range checks on whatever parsed.
    if let Some(v) = version {
        if v != CONFIG_VERSION {
            r.range("version", format!("this tool reads version {CONFIG_VERSION}"));
        }
    }
    if let Some(n) = particles {
        if n == 0 {
            r.range("particles", "need at least one particle");
        }
    }
    if let Some(dl) = delta {
        if dl > 1 {
            r.range("delta", "must be 0 or 1");
        } else if dl == 1 && geometry == Some(GeometrySpec::Interval) {
            r.range("delta", "tangential diffusion needs a ball geometry");
        }
    }
    if let Some(h) = horizon {
        if h < 0.0 {
            r.range("horizon", "must be nonnegative");
        }
    }
    if geometry == Some(GeometrySpec::Ball) {
        if dimension < 2 {
            r.range("dimension", "ball geometry needs dimension >= 2");
        }
        if radius <= 0.0 {
            r.range("radius", "must be positive");
        }
        if let Some(c) = &center {
            if c.len() != dimension {
                r.range("center", format!("needs {dimension} coordinates"));
            }
        }
    }
    if geometry == Some(GeometrySpec::Interval) && ia >= ib {
        r.range("interval_b", "must exceed interval_a");
    }
    if let Some(v) = dt {
        if v <= 0.0 {
            r.range("dt", "must be positive");
        } else if let Some(h) = horizon {
            if h > 0.0 && v >= h {
                r.range("dt", "must be smaller than the horizon");
            }
        }
    }
    if let Some(e) = epsilon {
        if e <= 0.0 {
            r.range("epsilon", "must be positive");
        } else {
            let diam = match geometry {
                Some(GeometrySpec::Ball) => 2.0 * radius,
                _ => ib - ia,
            };
            if scheme == Some(Scheme::RegularizedEuler) && e >= diam / 4.0 {
                r.range("epsilon", "sticky layer is too wide for the domain");
            }
        }
    }
    if stride == Some(0) {
        r.range("stride", "must be at least 1");
    }
    if paths == Some(0) {
        r.range("paths", "must be at least 1");
    }
    if let (Some(c), Some(p)) = (csv_paths, paths) {
        if c > p {
            r.range("csv_paths", "cannot exceed paths");
        }
    }
    if let Some(a) = alpha {
        if a <= 0.0 {
            r.range("alpha", "must be positive");
        }
    }
    if let Some(b) = beta {
        if b < BETA_FLOOR {
            r.range("beta", format!("must be at least {BETA_FLOOR:e}"));
        }
    }
    if let Some(w) = alpha_width {
        if w <= 0.0 {
            r.range("alpha_width", "must be positive");
        }
    }
    for (key, v) in [("lj_epsilon", lj_epsilon), ("lj_c", lj_c), ("r_min", r_min), ("pair_width", width)] {
        if let Some(v) = v {
            if v <= 0.0 {
                r.range(key, "must be positive");
            }
        }
    }
    if scheme == Some(Scheme::TimeChange) {
        if particles.is_some_and(|n| n != 1) || delta == Some(1) || pair.is_some_and(|p| p != PairSpec::None) {
            r.range("scheme", "time_change needs one particle, delta = 0 and no pair potential");
        }
        if girsanov == Some(GirsanovMode::Reweight) {
            r.range("girsanov", "reweighting needs the regularized scheme");
        }
    }
    if hist_bins == Some(0) {
        r.range("hist_bins", "must be at least 1");
    }
    if let (Some(n), Some(p)) = (particles, &initial_positions) {
        if initial == Some(InitialSpec::Explicit) && p.len() != n * dimension {
            r.range("initial_positions", format!("needs {} coordinates", n * dimension));
        }
    }
    if let Some(n) = particles {
        for name in &observables {
            if let Err(e) = Observable::from_name(name, n.max(1), dimension.max(1)) {
                r.range("observables", e.to_string());
            }
        }
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        return Err(r.errors);
    }

    cfg.version = version.unwrap();
    cfg.geometry = geometry.unwrap();
    cfg.dimension = dimension;
    cfg.center = center.unwrap_or_else(|| if dimension >= 2 { vec![0.0; dimension] } else { Vec::new() });
    cfg.radius = radius;
    cfg.interval_a = ia;
    cfg.interval_b = ib;
    cfg.particles = particles.unwrap();
    cfg.delta = delta.unwrap();
    cfg.scheme = scheme.unwrap();
    cfg.dt = dt.unwrap();
    cfg.epsilon = epsilon.unwrap();
    cfg.horizon = horizon.unwrap();
    cfg.seed = seed.unwrap();
    cfg.stride = stride.unwrap();
    cfg.paths = paths.unwrap();
    cfg.density = density.unwrap();
    cfg.alpha = alpha.unwrap();
    cfg.beta = beta.unwrap();
    cfg.alpha_width = alpha_width.unwrap();
    cfg.pair = pair.unwrap();
    cfg.lj_epsilon = lj_epsilon.unwrap();
    cfg.lj_c = lj_c.unwrap();
    cfg.r_min = r_min;
    cfg.clamp_at_cutoff = clamp.unwrap();
    cfg.pair_strength = strength.unwrap();
    cfg.pair_width = width.unwrap();
    cfg.initial = initial.unwrap();
    cfg.initial_positions = initial_positions.unwrap();
    cfg.girsanov = girsanov.unwrap();
    cfg.freeze_escape_drift = freeze.unwrap();
    cfg.csv_paths = csv_paths.unwrap();
    cfg.observables = observables;
    cfg.hist_bins = hist_bins.unwrap();
    cfg.output_dir = output_dir;
    Ok(cfg)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Canonical text form; `parse_config(cfg.to_text())` gives back `cfg`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("version", self.version.to_string());
        put("geometry", name_of(GEOMETRIES, self.geometry).into());
        match self.geometry {
            GeometrySpec::Ball => {
                put("dimension", self.dimension.to_string());
                put("center", join(&self.center));
                put("radius", format!("{:?}", self.radius));
            }
            GeometrySpec::Interval => {
                put("interval_a", format!("{:?}", self.interval_a));
                put("interval_b", format!("{:?}", self.interval_b));
            }
        }
        put("particles", self.particles.to_string());
        put("delta", self.delta.to_string());
        put("scheme", name_of(SCHEMES, self.scheme).into());
        put("dt", format!("{:?}", self.dt));
        put("epsilon", format!("{:?}", self.epsilon));
        put("horizon", format!("{:?}", self.horizon));
        put("seed", self.seed.to_string());
        put("stride", self.stride.to_string());
        put("paths", self.paths.to_string());
        put("density", name_of(DENSITIES, self.density).into());
        put("alpha", format!("{:?}", self.alpha));
        put("beta", format!("{:?}", self.beta));
        if self.density == DensitySpec::GaussianAlpha {
            put("alpha_width", format!("{:?}", self.alpha_width));
        }
        put("pair", name_of(PAIRS, self.pair).into());
        match self.pair {
            PairSpec::LennardJones => {
                put("lj_epsilon", format!("{:?}", self.lj_epsilon));
                put("lj_c", format!("{:?}", self.lj_c));
                if let Some(r) = self.r_min {
                    put("r_min", format!("{r:?}"));
                }
                put("clamp_at_cutoff", self.clamp_at_cutoff.to_string());
            }
            PairSpec::Gaussian => {
                put("pair_strength", format!("{:?}", self.pair_strength));
                put("pair_width", format!("{:?}", self.pair_width));
            }
            PairSpec::None => {}
        }
        put("initial", name_of(LAYOUTS, self.initial).into());
        if self.initial == InitialSpec::Explicit {
            put("initial_positions", join(&self.initial_positions));
        }
        put("girsanov", name_of(GIRSANOV, self.girsanov).into());
        put("freeze_escape_drift", self.freeze_escape_drift.to_string());
        put("csv_paths", self.csv_paths.to_string());
        put("observables", self.observables.join(", "));
        put("hist_bins", self.hist_bins.to_string());
        put("output_dir", self.output_dir.clone());
        out
    }

    pub fn build_geometry(&self) -> Result<DomainGeometry> {
        match self.geometry {
            GeometrySpec::Ball => DomainGeometry::ball(self.center.clone(), self.radius),
            GeometrySpec::Interval => DomainGeometry::interval(self.interval_a, self.interval_b),
        }
    }

    pub fn build_suite(&self) -> Result<DensitySuite> {
        let alpha = match self.density {
            DensitySpec::Uniform => DensityField::constant(self.alpha)?,
            DensitySpec::GaussianAlpha => {
                let center = match self.geometry {
                    GeometrySpec::Ball => self.center.clone(),
                    GeometrySpec::Interval => vec![0.5 * (self.interval_a + self.interval_b)],
                };
                DensityField::gaussian(center, self.alpha_width)?.scaled(self.alpha)?
            }
        };
        let beta = DensityField::constant(self.beta)?;
        let pair = match self.pair {
            PairSpec::None => None,
            PairSpec::LennardJones => {
                let p = match self.r_min {
                    Some(r) => PairPotential::lennard_jones_with_cutoff(self.lj_epsilon, self.lj_c, r)?,
                    None => PairPotential::lennard_jones(self.lj_epsilon, self.lj_c)?,
                };
                Some(p.with_clamp(self.clamp_at_cutoff))
            }
            PairSpec::Gaussian => Some(PairPotential::gaussian(self.pair_strength, self.pair_width)?),
        };
        DensitySuite::new(vec![alpha; self.particles], vec![beta; self.particles], pair, self.delta)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let mut s = SimConfig::new(self.build_geometry()?, self.build_suite()?, self.horizon, self.seed);
        s.scheme = self.scheme;
        s.dt = self.dt;
        s.epsilon = self.epsilon;
        s.stride = self.stride;
        s.girsanov = self.girsanov;
        s.freeze_escape_drift = self.freeze_escape_drift;
        s.initial = match self.initial {
            InitialSpec::Grid => InitialLayout::Grid,
            InitialSpec::UniformInterior => InitialLayout::UniformInterior,
            InitialSpec::Explicit => InitialLayout::Explicit(self.initial_positions.clone()),
        };
        s.validate()?;
        Ok(s)
    }
}

/// Annotated default document, as printed by `print-defaults`.
pub fn defaults_text() -> String {
    let d = RunConfig::default();
    format!(
        "# sticky run configuration, schema version {v}
# required keys
version = {v}
geometry = ball              # ball | interval
particles = {particles}
delta = {delta}                    # 1 adds diffusion along the boundary (ball only)
horizon = {horizon:?}
seed = {seed}

# geometry (ball)
dimension = {dim}
center = {center}
radius = {radius:?}
# geometry (interval): interval_a = {ia:?}, interval_b = {ib:?}

# scheme
scheme = regularized_euler   # regularized_euler | time_change
dt = {dt:?}
epsilon = {eps:?}               # sticky layer width
stride = {stride}                  # fine steps between stored samples
paths = {paths}

# densities
density = uniform            # uniform | gaussian-alpha
alpha = {alpha:?}
beta = {beta:?}
# alpha_width = {aw:?}         # gaussian-alpha only

# interaction
pair = none                  # none | lennard-jones | gaussian
# lj_epsilon = {lje:?}, lj_c = {ljc:?}, r_min = 0.05 * lj_c, clamp_at_cutoff = false
# pair_strength = {ps:?}, pair_width = {pw:?}

# start
initial = grid               # grid | uniform-interior | explicit
# initial_positions = x1, y1, x2, y2, ...

girsanov = off               # off | reweight
freeze_escape_drift = false

# outputs
csv_paths = {csv}
observables =                # e.g. coord:1:1, radius2:1, pairdist2:1:2
hist_bins = {bins}
output_dir = {out}
",
        v = d.version,
        particles = d.particles,
        delta = d.delta,
        horizon = d.horizon,
        seed = d.seed,
        dim = d.dimension,
        center = join(&d.center),
        radius = d.radius,
        ia = d.interval_a,
        ib = d.interval_b,
        dt = d.dt,
        eps = d.epsilon,
        stride = d.stride,
        paths = d.paths,
        alpha = d.alpha,
        beta = d.beta,
        aw = d.alpha_width,
        lje = d.lj_epsilon,
        ljc = d.lj_c,
        ps = d.pair_strength,
        pw = d.pair_width,
        csv = d.csv_paths,
        bins = d.hist_bins,
        out = d.output_dir,
    )
}

impl From<Vec<ConfigError>> for Error {
    fn from(v: Vec<ConfigError>) -> Self {
        Error::Config(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "version = 1\ngeometry = ball\nparticles = 1\ndelta = 0\nhorizon = 1.0\nseed = 7\n";

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.dt, 1e-3);
        assert_eq!(c.epsilon, 1e-2);
        assert_eq!(c.stride, 10);
        assert_eq!(c.center, vec![0.0, 0.0]);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn delta_one_on_interval_names_delta() {
        let text = "version = 1\ngeometry = interval\nparticles = 1\ndelta = 1\nhorizon = 1.0\nseed = 7\n";
        let errs = parse_config(text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ConfigErrorKind::RangeError);
        assert_eq!(errs[0].key, "delta");
        assert_eq!(errs[0].line, Some(4));
    }

    #[test]
    fn duplicate_key_reports_both_lines() {
        let text = format!("{MINIMAL}seed = 8\n");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ConfigErrorKind::DuplicateKey { first_line: 6 });
        assert_eq!(errs[0].line, Some(7));
        let msg = errs[0].to_string();
        assert!(msg.contains("line 7") && msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn all_errors_are_collected() {
        let text = "version = 2\ngeometry = torus\nparticles = 0\nhorizon = -1\ncolour = blue\nnonsense line\n";
        let errs = parse_config(text).unwrap_err();
        let kinds: Vec<_> = errs.iter().map(|e| (e.kind.clone(), e.key.as_str())).collect();
        assert!(kinds.contains(&(ConfigErrorKind::RangeError, "version")));
        assert!(kinds.contains(&(ConfigErrorKind::RangeError, "geometry")));
        assert!(kinds.contains(&(ConfigErrorKind::RangeError, "particles")));
        assert!(kinds.contains(&(ConfigErrorKind::RangeError, "horizon")));
        assert!(kinds.contains(&(ConfigErrorKind::UnknownKey, "colour")));
        assert!(kinds.contains(&(ConfigErrorKind::MissingKey, "delta")));
        assert!(kinds.contains(&(ConfigErrorKind::MissingKey, "seed")));
        assert!(kinds.iter().any(|(k, _)| *k == ConfigErrorKind::Syntax));
    }

    #[test]
    fn geometry_specific_keys_are_unknown_elsewhere() {
        let text = format!("{MINIMAL}interval_a = 0.0\n");
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs[0].kind, ConfigErrorKind::UnknownKey);
    }

    #[test]
    fn time_change_constraints() {
        let text = MINIMAL.replace("particles = 1", "particles = 2") + "scheme = time_change\n";
        let errs = parse_config(&text).unwrap_err();
        assert_eq!(errs[0].key, "scheme");
    }

    #[test]
    fn beta_floor_is_accepted_and_below_rejected() {
        assert!(parse_config(&format!("{MINIMAL}beta = 1e-12\n")).is_ok());
        let errs = parse_config(&format!("{MINIMAL}beta = 0\n")).unwrap_err();
        assert_eq!(errs[0].key, "beta");
    }

    #[test]
    fn defaults_text_parses() {
        let c = parse_config(&defaults_text()).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn explicit_positions_are_checked() {
        let base = format!("{MINIMAL}initial = explicit\n");
        let errs = parse_config(&base).unwrap_err();
        assert_eq!(errs[0].kind, ConfigErrorKind::MissingKey);
        let errs = parse_config(&format!("{base}initial_positions = 0.1\n")).unwrap_err();
        assert_eq!(errs[0].key, "initial_positions");
        let c = parse_config(&format!("{base}initial_positions = 0.1, -0.2\n")).unwrap();
        assert_eq!(c.initial_positions, vec![0.1, -0.2]);
        assert!(c.sim_config().is_ok());
    }

    #[test]
    fn builds_a_simulation() {
        let text = format!("{MINIMAL}pair = gaussian\ndensity = gaussian-alpha\nalpha = 2\n")
            .replace("particles = 1", "particles = 2");
        let c = parse_config(&text).unwrap();
        let s = c.sim_config().unwrap();
        assert_eq!(s.n(), 2);
        assert!(s.suite.pair().is_some());
        assert!((s.suite.alpha(0).value(&[0.0, 0.0]) - 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn config() -> impl Strategy<Value = RunConfig> {
            (
                any::<bool>(),
                1usize..4,
                0u8..2,
                (1e-4f64..1e-2, 0.1f64..100.0, any::<u64>(), 1usize..50, 1u64..20),
                (0.1f64..5.0, 1e-12f64..5.0, 0usize..3, any::<bool>()),
                (prop::sample::select(vec!["coord:1:1", "radius2:1"]), 1usize..100),
                (-1.0f64..1.0, 0.5f64..3.0, 1e-3f64..0.1),
            )
                .prop_map(|(ball, n, delta, (dt, horizon, seed, stride, paths), (alpha, beta, pair, gauss), (obs, bins), (c, r, eps))| {
                    let mut cfg = RunConfig::default();
                    cfg.geometry = if ball { GeometrySpec::Ball } else { GeometrySpec::Interval };
                    if ball {
                        cfg.center = vec![c, -c];
                        cfg.radius = r;
                        cfg.delta = delta;
                    } else {
                        cfg.dimension = 1;
                        cfg.center = Vec::new();
                        cfg.interval_a = c;
                        cfg.interval_b = c + r;
                        cfg.delta = 0;
                    }
                    cfg.particles = n;
                    cfg.dt = dt;
                    cfg.horizon = horizon;
                    cfg.seed = seed;
                    cfg.stride = stride;
                    cfg.paths = paths;
                    cfg.csv_paths = paths.min(2);
                    cfg.alpha = alpha;
                    cfg.beta = beta;
                    cfg.epsilon = eps;
                    cfg.pair = [PairSpec::None, PairSpec::LennardJones, PairSpec::Gaussian][pair];
                    if cfg.pair == PairSpec::LennardJones {
                        cfg.r_min = Some(0.004);
                        cfg.clamp_at_cutoff = true;
                    }
                    if gauss {
                        cfg.density = DensitySpec::GaussianAlpha;
                        cfg.alpha_width = r;
                    }
                    cfg.observables = vec![obs.to_string()];
                    cfg.hist_bins = bins;
                    cfg
                })
        }

        proptest! {
            #[test]
            fn text_round_trip(cfg in config()) {
                let back = parse_config(&cfg.to_text());
                prop_assert_eq!(back, Ok(cfg));
            }
        }
    }
}
