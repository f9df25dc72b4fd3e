//! Run configuration: strict JSON schema, defaults, and validation that
//! reports every problem at once.
//!
//! Schema (version 1), keys not listed here are rejected:
//!
//! ```text
//! {
//!   "schema_version": 1,                      optional
//!   "model": "cgpe" | "ep",                   required
//!   "grid": { "n_points": 256, "length": 2pi },
//!   "params": cgpe: { "xi", "sigma" }
//!             ep:   { "g", "lambda", "r", "alpha", "beta", "pump" }
//!   "initial": { "u": <u preset>, "n": <n preset, ep only> },
//!   "dt": 1e-3, "t_end": required, "sample_every": 10,
//!   "checkpoint_every": 0,                    samples between checkpoints, 0 = none
//!   "checks": [ "f1" | "abs_set" | "lyapunov" | "reservoir" ],
//!   "output": "out",
//!   "inject_fault": false
//! }
//! ```
//!
//! Presets: pump `{"kind": "constant", "value"}` or
//! `{"kind": "bump", "center", "width", "height"}`; u `{"kind": "flat",
//! "rho0", "theta0"}`, `{"kind": "gaussian", "amplitude", "width"[, "center",
//! "mass"]}` or `{"kind": "random", "seed", "band"[, "mass"]}`; n
//! `{"kind": "constant", "value"}`, `{"kind": "bump", ...}` or
//! `{"kind": "zero"}`.

use std::f64::consts::PI;
use std::fmt;

use plsim_core::grid::{Field, Grid1D, RealField};
use plsim_core::model::{CgpeParams, EpParams};
use plsim_core::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cgpe,
    Ep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    F1,
    AbsSet,
    Lyapunov,
    Reservoir,
}

impl CheckName {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "f1" => CheckName::F1,
            "abs_set" => CheckName::AbsSet,
            "lyapunov" => CheckName::Lyapunov,
            "reservoir" => CheckName::Reservoir,
            _ => return None,
        })
    }

    pub fn model(self) -> ModelKind {
        match self {
            CheckName::F1 | CheckName::AbsSet => ModelKind::Cgpe,
            CheckName::Lyapunov | CheckName::Reservoir => ModelKind::Ep,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_points: usize,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    Bump { center: f64, width: f64, height: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ParamsSpec {
    Cgpe {
        xi: f64,
        sigma: f64,
    },
    Ep {
        g: f64,
        lambda: f64,
        r: f64,
        alpha: f64,
        beta: f64,
        pump: Profile,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialU {
    Flat {
        rho0: f64,
        theta0: f64,
    },
    Gaussian {
        amplitude: f64,
        width: f64,
        center: Option<f64>,
        mass: Option<f64>,
    },
    Random {
        seed: u64,
        band: usize,
        mass: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub schema_version: u64,
    pub model: ModelKind,
    pub grid: GridSpec,
    pub params: ParamsSpec,
    pub initial_u: InitialU,
    pub initial_n: Option<Profile>,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub checkpoint_every: usize,
    pub checks: Vec<CheckName>,
    pub output: String,
    pub inject_fault: bool,
}

/// A validated configuration with any non-fatal findings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

/// Every schema violation found in one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Walks one JSON object, records errors under a dotted path and rejects
/// keys that were never asked for.
struct Obj<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: Vec<&'static str>,
}

struct Collector {
    errors: Vec<String>,
}

impl Collector {
    fn error(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn object<'a>(&mut self, path: &str, v: &'a Value) -> Option<Obj<'a>> {
        match v.as_object() {
            Some(map) => Some(Obj {
                path: path.to_string(),
                map,
                seen: Vec::new(),
            }),
            None => {
                self.error(format!("{path}: expected an object"));
                None
            }
        }
    }

    fn finish(&mut self, obj: Obj<'_>) {
        let mut unknown: Vec<&String> = obj
            .map
            .keys()
            .filter(|k| !obj.seen.contains(&k.as_str()))
            .collect();
        unknown.sort();
        for k in unknown {
            self.error(format!("{}: unknown key \"{k}\"", join(&obj.path, k)));
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Obj<'a> {
    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.push(key);
        self.map.get(key)
    }

    fn f64_opt(&mut self, c: &mut Collector, key: &'static str) -> Option<f64> {
        let v = self.raw(key)?;
        match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                c.error(format!("{}: expected a finite number", join(&self.path, key)));
                None
            }
        }
    }

    fn f64_req(&mut self, c: &mut Collector, key: &'static str) -> Option<f64> {
        if !self.map.contains_key(key) {
            self.seen.push(key);
            c.error(format!("{}: missing required key", join(&self.path, key)));
            return None;
        }
        self.f64_opt(c, key)
    }

    fn positive(&mut self, c: &mut Collector, key: &'static str) -> Option<f64> {
        let x = self.f64_req(c, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            c.error(format!("{}: must be positive (got {x})", join(&self.path, key)));
            None
        }
    }

    fn nonnegative(&mut self, c: &mut Collector, key: &'static str) -> Option<f64> {
        let x = self.f64_req(c, key)?;
        if x >= 0.0 {
            Some(x)
        } else {
            c.error(format!("{}: must be nonnegative (got {x})", join(&self.path, key)));
            None
        }
    }

    fn uint_opt(&mut self, c: &mut Collector, key: &'static str) -> Option<u64> {
        let v = self.raw(key)?;
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                c.error(format!(
                    "{}: expected a nonnegative integer",
                    join(&self.path, key)
                ));
                None
            }
        }
    }

    fn uint_req(&mut self, c: &mut Collector, key: &'static str) -> Option<u64> {
        if !self.map.contains_key(key) {
            self.seen.push(key);
            c.error(format!("{}: missing required key", join(&self.path, key)));
            return None;
        }
        self.uint_opt(c, key)
    }

    fn str_opt(&mut self, c: &mut Collector, key: &'static str) -> Option<&'a str> {
        let v = self.raw(key)?;
        match v.as_str() {
            Some(s) => Some(s),
            None => {
                c.error(format!("{}: expected a string", join(&self.path, key)));
                None
            }
        }
    }

    fn kind(&mut self, c: &mut Collector) -> Option<&'a str> {
        if !self.map.contains_key("kind") {
            self.seen.push("kind");
            c.error(format!("{}: missing required key", join(&self.path, "kind")));
            return None;
        }
        self.str_opt(c, "kind")
    }
}

fn parse_profile(c: &mut Collector, path: &str, v: &Value, allow_zero: bool) -> Option<Profile> {
    let mut o = c.object(path, v)?;
    let out = match o.kind(c) {
        Some("constant") => o.nonnegative(c, "value").map(|value| Profile::Constant { value }),
        Some("bump") => {
            let center = o.f64_req(c, "center");
            let width = o.positive(c, "width");
            let height = o.nonnegative(c, "height");
            match (center, width, height) {
                (Some(center), Some(width), Some(height)) => Some(Profile::Bump {
                    center,
                    width,
                    height,
                }),
                _ => None,
            }
        }
        Some("zero") if allow_zero => Some(Profile::Zero),
        Some(other) => {
            let allowed = if allow_zero {
                "constant, bump, zero"
            } else {
                "constant, bump"
            };
            c.error(format!("{}: unknown preset \"{other}\" (expected {allowed})", join(path, "kind")));
            None
        }
        None => None,
    };
    c.finish(o);
    out
}

fn parse_initial_u(c: &mut Collector, path: &str, v: &Value) -> Option<InitialU> {
    let mut o = c.object(path, v)?;
    let out = match o.kind(c) {
        Some("flat") => {
            let rho0 = o.nonnegative(c, "rho0");
            let theta0 = o.f64_opt(c, "theta0").unwrap_or(0.0);
            rho0.map(|rho0| InitialU::Flat { rho0, theta0 })
        }
        Some("gaussian") => {
            let amplitude = o.f64_req(c, "amplitude");
            let width = o.positive(c, "width");
            let center = o.f64_opt(c, "center");
            let mass = mass_key(&mut o, c);
            match (amplitude, width) {
                (Some(amplitude), Some(width)) => Some(InitialU::Gaussian {
                    amplitude,
                    width,
                    center,
                    mass,
                }),
                _ => None,
            }
        }
        Some("random") => {
            let seed = o.uint_req(c, "seed");
            let band = o.uint_req(c, "band");
            let mass = mass_key(&mut o, c);
            match (seed, band) {
                (Some(seed), Some(band)) => Some(InitialU::Random {
                    seed,
                    band: band as usize,
                    mass,
                }),
                _ => None,
            }
        }
        Some(other) => {
            c.error(format!(
                "{}: unknown preset \"{other}\" (expected flat, gaussian, random)",
                join(path, "kind")
            ));
            None
        }
        None => None,
    };
    c.finish(o);
    out
}

fn mass_key(o: &mut Obj<'_>, c: &mut Collector) -> Option<f64> {
    let m = o.f64_opt(c, "mass")?;
    if m > 0.0 {
        Some(m)
    } else {
        c.error(format!("{}: must be positive (got {m})", join(&o.path, "mass")));
        None
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<Parsed, ConfigErrors> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| ConfigErrors(vec![format!("not valid JSON: {e}")]))?;
    let mut c = Collector { errors: Vec::new() };
    let Some(mut o) = c.object("", &root) else {
        return Err(ConfigErrors(c.errors));
    };
    let mut warnings = Vec::new();

    let schema_version = o.uint_opt(&mut c, "schema_version").unwrap_or(SCHEMA_VERSION);
    if schema_version != SCHEMA_VERSION {
        c.error(format!(
            "schema_version: unsupported version {schema_version} (expected {SCHEMA_VERSION})"
        ));
    }

    let model = match o.raw("model") {
        None => {
            c.error("model: missing required key".into());
            None
        }
        Some(v) => match v.as_str() {
            Some("cgpe") => Some(ModelKind::Cgpe),
            Some("ep") => Some(ModelKind::Ep),
            _ => {
                c.error(format!("model: expected \"cgpe\" or \"ep\", got {v}"));
                None
            }
        },
    };

    let mut grid = GridSpec {
        n_points: 256,
        length: 2.0 * PI,
    };
    if let Some(v) = o.raw("grid") {
        if let Some(mut g) = c.object("grid", v) {
            if let Some(n) = g.uint_opt(&mut c, "n_points") {
                if n < 4 || n % 2 == 1 {
                    c.error(format!("grid.n_points: must be even and at least 4 (got {n})"));
                } else {
                    grid.n_points = n as usize;
                }
            }
            if let Some(l) = g.f64_opt(&mut c, "length") {
                if l > 0.0 {
                    grid.length = l;
                } else {
                    c.error(format!("grid.length: must be positive (got {l})"));
                }
            }
            c.finish(g);
        }
    }

    let params = match (model, o.raw("params")) {
        (_, None) => {
            c.error("params: missing required key".into());
            None
        }
        (None, Some(_)) => None,
        (Some(kind), Some(v)) => c.object("params", v).and_then(|mut p| {
            let out = match kind {
                ModelKind::Cgpe => {
                    let xi = p.positive(&mut c, "xi");
                    let sigma = p.positive(&mut c, "sigma");
                    xi.zip(sigma).map(|(xi, sigma)| ParamsSpec::Cgpe { xi, sigma })
                }
                ModelKind::Ep => {
                    let g = p.positive(&mut c, "g");
                    let lambda = p.positive(&mut c, "lambda");
                    let r = p.positive(&mut c, "r");
                    let alpha = p.positive(&mut c, "alpha");
                    let beta = p.positive(&mut c, "beta");
                    let pump = match p.raw("pump") {
                        Some(v) => parse_profile(&mut c, "params.pump", v, false),
                        None => {
                            c.error("params.pump: missing required key".into());
                            None
                        }
                    };
                    match (g, lambda, r, alpha, beta, pump) {
                        (Some(g), Some(lambda), Some(r), Some(alpha), Some(beta), Some(pump)) => {
                            Some(ParamsSpec::Ep {
                                g,
                                lambda,
                                r,
                                alpha,
                                beta,
                                pump,
                            })
                        }
                        _ => None,
                    }
                }
            };
            c.finish(p);
            out
        }),
    };

    let (mut initial_u, mut initial_n) = (None, None);
    match o.raw("initial") {
        None => c.error("initial: missing required key".into()),
        Some(v) => {
            if let Some(mut i) = c.object("initial", v) {
                match i.raw("u") {
                    Some(u) => initial_u = parse_initial_u(&mut c, "initial.u", u),
                    None => c.error("initial.u: missing required key".into()),
                }
                if let Some(n) = i.raw("n") {
                    if model == Some(ModelKind::Cgpe) {
                        c.error("initial.n: the cgpe model has no reservoir".into());
                    } else {
                        initial_n = parse_profile(&mut c, "initial.n", n, true);
                    }
                } else if model == Some(ModelKind::Ep) {
                    initial_n = Some(Profile::Zero);
                }
                c.finish(i);
            }
        }
    }

    let dt = o.f64_opt(&mut c, "dt").unwrap_or(1e-3);
    if !(dt > 0.0) {
        c.error(format!("dt: must be positive (got {dt})"));
    }
    let t_end = o.f64_req(&mut c, "t_end");
    if let Some(t) = t_end {
        if !(t > dt) {
            c.error(format!("t_end: must exceed dt = {dt} (got {t})"));
        }
    }
    let sample_every = o.uint_opt(&mut c, "sample_every").unwrap_or(10) as usize;
    if sample_every == 0 {
        c.error("sample_every: must be at least 1".into());
    }
    let checkpoint_every = o.uint_opt(&mut c, "checkpoint_every").unwrap_or(0) as usize;

    let mut checks = Vec::new();
    if let Some(v) = o.raw("checks") {
        match v.as_array() {
            None => c.error("checks: expected an array of check names".into()),
            Some(items) => {
                for (i, item) in items.iter().enumerate() {
                    match item.as_str().and_then(CheckName::parse) {
                        None => c.error(format!(
                            "checks[{i}]: unknown check {item} (expected f1, abs_set, lyapunov, reservoir)"
                        )),
                        Some(name) => {
                            if model.is_some_and(|m| m != name.model()) {
                                c.error(format!(
                                    "checks[{i}]: {item} does not apply to the {} model",
                                    if model == Some(ModelKind::Cgpe) { "cgpe" } else { "ep" }
                                ));
                            } else if !checks.contains(&name) {
                                checks.push(name);
                            }
                        }
                    }
                }
            }
        }
    }

    let output = o.str_opt(&mut c, "output").unwrap_or("out").to_string();
    let inject_fault = match o.raw("inject_fault") {
        None => false,
        Some(v) => v.as_bool().unwrap_or_else(|| {
            c.error("inject_fault: expected true or false".into());
            false
        }),
    };
    c.finish(o);

    for profile in [
        match &params {
            Some(ParamsSpec::Ep { pump, .. }) => Some(("params.pump", pump)),
            _ => None,
        },
        initial_n.as_ref().map(|n| ("initial.n", n)),
    ]
    .into_iter()
    .flatten()
    {
        if let (name, Profile::Bump { width, .. }) = profile {
            let fraction = width / grid.length;
            if fraction > 1.0 {
                warnings.push(format!(
                    "{name}: bump width {width} exceeds the box length {}; compact-support assumption violated",
                    grid.length
                ));
            } else if fraction > 0.125 {
                warnings.push(format!(
                    "{name}: bump covers {:.0}% of the box; boundary effects may matter (keep it under 1/8)",
                    100.0 * fraction
                ));
            }
        }
    }

    if !c.errors.is_empty() {
        return Err(ConfigErrors(c.errors));
    }
    let config = RunConfig {
        schema_version,
        model: model.expect("validated"),
        grid,
        params: params.expect("validated"),
        initial_u: initial_u.expect("validated"),
        initial_n,
        dt,
        t_end: t_end.expect("validated"),
        sample_every,
        checkpoint_every,
        checks,
        output,
        inject_fault,
    };
    Ok(Parsed { config, warnings })
}

fn bump_value(x: f64, center: f64, width: f64, height: f64, length: f64) -> f64 {
    // periodic distance to the centre
    let mut d = (x - center).rem_euclid(length);
    if d > 0.5 * length {
        d = length - d;
    }
    let r = d / (0.5 * width);
    if r >= 1.0 {
        0.0
    } else {
        height * (1.0 - 1.0 / (1.0 - r * r)).exp()
    }
}

impl Profile {
    pub fn sample(&self, grid: &Grid1D) -> RealField {
        match *self {
            Profile::Constant { value } => RealField::constant(grid, value),
            Profile::Zero => RealField::constant(grid, 0.0),
            Profile::Bump {
                center,
                width,
                height,
            } => RealField::from_fn(grid, |x| bump_value(x, center, width, height, grid.length())),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> anyhow::Result<Grid1D> {
        Ok(Grid1D::new(self.grid.n_points, self.grid.length)?)
    }

    /// Replace the seed of random initial data (no effect otherwise).
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let InitialU::Random { band, mass, .. } = self.initial_u {
            self.initial_u = InitialU::Random { seed, band, mass };
        }
        self
    }

    pub fn seed(&self) -> Option<u64> {
        match self.initial_u {
            InitialU::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn cgpe_params(&self) -> anyhow::Result<CgpeParams> {
        match self.params {
            ParamsSpec::Cgpe { xi, sigma } => Ok(CgpeParams::new(xi, sigma)?),
            ParamsSpec::Ep { .. } => anyhow::bail!("configuration describes the ep model"),
        }
    }

    pub fn ep_params(&self) -> anyhow::Result<EpParams> {
        match &self.params {
            ParamsSpec::Ep {
                g,
                lambda,
                r,
                alpha,
                beta,
                pump,
            } => {
                let grid = self.grid()?;
                Ok(EpParams::new(*g, *lambda, *r, *alpha, *beta, pump.sample(&grid))?)
            }
            ParamsSpec::Cgpe { .. } => anyhow::bail!("configuration describes the cgpe model"),
        }
    }

    pub fn initial_u(&self) -> anyhow::Result<Field> {
        let grid = self.grid()?;
        let (field, mass) = match self.initial_u {
            InitialU::Flat { rho0, theta0 } => {
                (Field::from_fn(&grid, |_| Complex64::from_polar(rho0, theta0)), None)
            }
            InitialU::Gaussian {
                amplitude,
                width,
                center,
                mass,
            } => {
                let c = center.unwrap_or(0.5 * grid.length());
                let f = Field::from_fn(&grid, |x| {
                    Complex64::new(amplitude * (-(x - c).powi(2) / (2.0 * width * width)).exp(), 0.0)
                });
                (f, mass)
            }
            InitialU::Random { seed, band, mass } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (Field::random_band_limited(&grid, band, &mut rng), mass)
            }
        };
        Ok(match mass {
            Some(m) if field.mass() > 0.0 => {
                field.scale(Complex64::new((m / field.mass()).sqrt(), 0.0))
            }
            _ => field,
        })
    }

    pub fn initial_n(&self) -> anyhow::Result<Option<RealField>> {
        let grid = self.grid()?;
        Ok(self.initial_n.map(|p| p.sample(&grid)))
    }

    /// Hex SHA-256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("configuration serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": "cgpe", "params": {"xi": 1, "sigma": 1},
        "initial": {"u": {"kind": "flat", "rho0": 1}}, "t_end": 1}"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let p = parse_config(MINIMAL).unwrap();
        assert!(p.warnings.is_empty());
        let c = p.config;
        assert_eq!(c.grid.n_points, 256);
        assert_eq!(c.grid.length, 2.0 * PI);
        assert_eq!(c.dt, 1e-3);
        assert_eq!(c.sample_every, 10);
        assert_eq!(c.model, ModelKind::Cgpe);
        assert!(c.checks.is_empty());
    }

    #[test]
    fn negative_sigma_is_named() {
        let doc = MINIMAL.replace("\"sigma\": 1", "\"sigma\": -1");
        let e = parse_config(&doc).unwrap_err();
        assert_eq!(e.0.len(), 1);
        assert!(e.0[0].contains("params.sigma") && e.0[0].contains("positive"), "{e}");
    }

    #[test]
    fn all_problems_are_reported() {
        let doc = r#"{"model": "cgpe", "params": {"xi": -1, "sigma": 1, "alpha": 2},
            "initial": {"u": {"kind": "flat"}}, "dt": 0.1, "t_end": 0.01,
            "checks": ["lyapunov", "nope"], "colour": "red"}"#;
        let e = parse_config(doc).unwrap_err();
        let text = e.to_string();
        for needle in [
            "params.xi",
            "params.alpha: unknown key",
            "initial.u.rho0: missing",
            "t_end: must exceed",
            "checks[0]",
            "checks[1]: unknown check",
            "colour: unknown key",
        ] {
            assert!(text.contains(needle), "missing {needle:?} in\n{text}");
        }
        assert_eq!(e.0.len(), 7);
    }

    #[test]
    fn wide_pump_warns() {
        let doc = r#"{"model": "ep", "grid": {"n_points": 64, "length": 10},
            "params": {"g": 1, "lambda": 1, "r": 1, "alpha": 1, "beta": 1,
                       "pump": {"kind": "bump", "center": 5, "width": 12, "height": 2}},
            "initial": {"u": {"kind": "random", "seed": 1, "band": 4}}, "t_end": 1}"#;
        let p = parse_config(doc).unwrap();
        assert_eq!(p.warnings.len(), 1);
        assert!(p.warnings[0].contains("compact-support"), "{:?}", p.warnings);
        assert_eq!(p.config.initial_n, Some(Profile::Zero));

        let narrow = doc.replace("\"width\": 12", "\"width\": 1");
        assert!(parse_config(&narrow).unwrap().warnings.is_empty());
        let medium = doc.replace("\"width\": 12", "\"width\": 3");
        assert!(parse_config(&medium).unwrap().warnings[0].contains("1/8"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config(MINIMAL).unwrap().config;
        let b = parse_config(&MINIMAL.replace("\"t_end\": 1", "\"t_end\": 2")).unwrap().config;
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn mass_normalization_and_seed_override() {
        let doc = r#"{"model": "cgpe", "params": {"xi": 1, "sigma": 1},
            "initial": {"u": {"kind": "random", "seed": 3, "band": 5, "mass": 2.5}}, "t_end": 1}"#;
        let c = parse_config(doc).unwrap().config;
        let u = c.initial_u().unwrap();
        assert!((u.mass() - 2.5).abs() < 1e-12);
        let other = c.clone().with_seed(4);
        assert_eq!(other.seed(), Some(4));
        assert_ne!(other.initial_u().unwrap(), u);
    }

    #[test]
    fn bump_profile_is_compact() {
        let grid = Grid1D::new(64, 10.0).unwrap();
        let p = Profile::Bump {
            center: 5.0,
            width: 2.0,
            height: 3.0,
        }
        .sample(&grid);
        assert_eq!(p.max(), 3.0);
        for (x, v) in grid.points().zip(p.values()) {
            if (x - 5.0).abs() >= 1.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}
