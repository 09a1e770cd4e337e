// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration in a flat `section.key = value` text format.
//!
//! ```text
//! # super-Ohmic bath, two detuned modes
//! system.omega_a = 1
//! system.omega_b = 0.9
//! bath.kind = super_ohmic
//! bath.j0 = 0.001
//! bath.omega0 = 0.9
//! bath.z = 3
//! bath.kbt = 0.52
//! task.command = trajectory
//! task.times = 0:200:0.5
//! task.methods = exact, br, spbr
//! ```
//!
//! Further baths use sections `bath2`, `bath3`, ...

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bath::{Bath, BathSpec, Occupation, SpectralDensity, SuperOhmic};
use crate::error::{Error, Result};
use crate::model::{BathCoupling, MultiBathSpec, SystemSpec};

/// Mode frequencies, given either directly or as `Omega +/- Delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Frequencies {
    Modes { omega_a: f64, omega_b: f64 },
    Center { omega: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemBlock {
    pub frequencies: Frequencies,
    pub phi_a: f64,
    pub phi_b: f64,
}

impl SystemBlock {
    pub fn spec(&self) -> Result<SystemSpec> {
        match self.frequencies {
            Frequencies::Modes { omega_a, omega_b } => SystemSpec::new(omega_a, omega_b, self.phi_a, self.phi_b),
            Frequencies::Center { omega, delta } => SystemSpec::from_center(omega, delta, self.phi_a, self.phi_b),
        }
    }
}

/// A grid written either as `start:stop:step` or as a comma list.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                let n = ((stop - start) / step).round() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
        }
    }

    fn parse(text: &str) -> std::result::Result<Grid, String> {
        if text.contains(':') {
            let parts: Vec<&str> = text.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err("range must be start:stop:step".into());
            }
            let start = parse_f64(parts[0])?;
            let stop = parse_f64(parts[1])?;
            let step = parse_f64(parts[2])?;
            if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
                return Err("range needs finite bounds and a positive step".into());
            }
            if stop < start {
                return Err("range stop is below start".into());
            }
            let n = (stop - start) / step;
            if (n - n.round()).abs() > 1e-9 * n.max(1.0) {
                return Err("range length is not a whole number of steps".into());
            }
            Ok(Grid::Range { start, stop, step })
        } else {
            let v = parse_list(text)?;
            if v.is_empty() {
                return Err("empty grid".into());
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err("grid must be strictly increasing".into());
            }
            Ok(Grid::List(v))
        }
    }

    fn text(&self) -> String {
        match self {
            Grid::Range { start, stop, step } => format!("{start}:{stop}:{step}"),
            Grid::List(v) => join(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralBlock {
    SuperOhmic { j0: f64, omega0: f64, z: f64 },
    Flat { j0: f64, nu_min: f64, nu_max: f64 },
    MultiPeak(Vec<(f64, f64, f64)>),
    /// Two-column file of `nu J` pairs, relative to the config file.
    Tabulated(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BathBlock {
    pub spectral: SpectralBlock,
    pub occupation: Occupation,
    /// Coupling vector; the system's `(phi_a, phi_b)` when absent.
    pub phi: Option<[f64; 2]>,
}

impl BathBlock {
    pub fn bath(&self, base: Option<&Path>) -> Result<Bath> {
        let spectral = match &self.spectral {
            SpectralBlock::SuperOhmic { j0, omega0, z } => SpectralDensity::SuperOhmic(SuperOhmic::new(*j0, *omega0, *z)),
            SpectralBlock::Flat { j0, nu_min, nu_max } => SpectralDensity::Flat {
                j0: *j0,
                nu_min: *nu_min,
                nu_max: *nu_max,
            },
            SpectralBlock::MultiPeak(p) => {
                SpectralDensity::MultiPeak(p.iter().map(|&(j, w, z)| SuperOhmic::new(j, w, z)).collect())
            }
            SpectralBlock::Tabulated(path) => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                SpectralDensity::Tabulated(read_table(&full)?)
            }
        };
        Bath::new(BathSpec::new(spectral, self.occupation))
    }
}

fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let bad = || Error::Config {
            path: Some(path.to_owned()),
            line: Some(n + 1),
            key: None,
            message: "expected two numbers `nu J`".into(),
        };
        if cols.len() != 2 {
            return Err(bad());
        }
        let nu = cols[0].parse::<f64>().map_err(|_| bad())?;
        let j = cols[1].parse::<f64>().map_err(|_| bad())?;
        out.push((nu, j));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    Trajectory,
    SweepDetuning,
    SteadyState,
    Poles,
    StabilityMap,
    Validate,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Trajectory,
        Command::SweepDetuning,
        Command::SteadyState,
        Command::Poles,
        Command::StabilityMap,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Trajectory => "trajectory",
            Command::SweepDetuning => "sweep-detuning",
            Command::SteadyState => "steady-state",
            Command::Poles => "poles",
            Command::StabilityMap => "stability-map",
            Command::Validate => "validate",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Exact,
    Br,
    SpBr,
    Secular,
    Collective,
    Individual,
    DiscretizedOracle,
    FockOracle,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Exact,
        Method::Br,
        Method::SpBr,
        Method::Secular,
        Method::Collective,
        Method::Individual,
        Method::DiscretizedOracle,
        Method::FockOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Br => "br",
            Method::SpBr => "spbr",
            Method::Secular => "secular",
            Method::Collective => "collective",
            Method::Individual => "individual",
            Method::DiscretizedOracle => "discretized",
            Method::FockOracle => "fock",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskBlock {
    pub command: Command,
    pub times: Option<Grid>,
    /// Half-detunings; the sweep keeps `omega_a` and sets
    /// `omega_b = omega_a - 2 delta`.
    pub detunings: Option<Grid>,
    /// Second axis of the stability map: a numeric config key and its values.
    pub scan_key: Option<String>,
    pub scan_values: Option<Grid>,
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub max_dt: f64,
    pub oracle_modes: Option<usize>,
    pub oracle_nu_max: Option<f64>,
    pub fock_n_max: usize,
    pub ode_rtol: f64,
    pub ode_atol: f64,
    /// Relative tolerance of exact vs discretized-bath oracle in `validate`.
    pub tol_oracle: f64,
    /// Absolute tolerance of Fock oracle vs BR moments in `validate`.
    pub tol_fock: f64,
    /// Relative tolerance of spectral vs convolution form in `validate`.
    pub tol_spectral: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            max_dt: 0.02,
            oracle_modes: None,
            oracle_nu_max: None,
            fock_n_max: 6,
            ode_rtol: 1e-10,
            ode_atol: 1e-12,
            tol_oracle: 1e-2,
            tol_fock: 1e-6,
            tol_spectral: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// File stem; the command name when empty.
    pub name: String,
    pub plot: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("out"),
            name: String::new(),
            plot: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemBlock,
    pub baths: Vec<BathBlock>,
    pub task: TaskBlock,
    pub numerics: Numerics,
    pub output: OutputBlock,
    /// Directory of the config file, for relative paths.
    pub base: Option<PathBuf>,
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    match t {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(parse_f64).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

struct Entry {
    line: usize,
    value: String,
    used: bool,
}

/// Key/value pairs with line numbers, consumed by the typed parser.
struct Entries {
    map: BTreeMap<String, Entry>,
}

impl Entries {
    fn parse(text: &str) -> Result<Entries> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(Some(n + 1), None, "expected `section.key = value`"))?;
            let key = key.trim().to_owned();
            if !key.contains('.') {
                return Err(Error::config(Some(n + 1), Some(&key), "key must be `section.key`"));
            }
            let entry = Entry {
                line: n + 1,
                value: value.trim().to_owned(),
                used: false,
            };
            if let Some(prev) = map.insert(key.clone(), entry) {
                return Err(Error::config(
                    Some(n + 1),
                    Some(&key),
                    format!("duplicate key (first set on line {})", prev.line),
                ));
            }
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.get_mut(key).map(|e| {
            e.used = true;
            (e.line, e.value.clone())
        })
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::config(self.map.get(key).map(|e| e.line), Some(key), msg)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => parse_f64(&v).map(Some).map_err(|m| Error::config(Some(line), Some(key), m)),
        }
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| Error::config(None, Some(key), "required key is missing"))
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::config(Some(line), Some(key), format!("`{v}` is not a non-negative integer"))),
        }
    }

    fn bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(Error::config(Some(line), Some(key), format!("`{v}` is not a boolean"))),
            },
        }
    }

    fn grid(&mut self, key: &str) -> Result<Option<Grid>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => Grid::parse(&v).map(Some).map_err(|m| Error::config(Some(line), Some(key), m)),
        }
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.map.keys().any(|k| k.starts_with(&prefix))
    }

    fn finish(&self) -> Result<()> {
        match self.map.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => Err(Error::config(Some(e.line), Some(k), "unknown key")),
            None => Ok(()),
        }
    }
}

fn bath_section(n: usize) -> String {
    if n == 0 {
        "bath".to_owned()
    } else {
        format!("bath{}", n + 1)
    }
}

fn parse_bath(e: &mut Entries, s: &str) -> Result<BathBlock> {
    let kind_key = format!("{s}.kind");
    let (line, kind) = e
        .take(&kind_key)
        .ok_or_else(|| Error::config(None, Some(&kind_key), "required key is missing"))?;
    let k = |name: &str| format!("{s}.{name}");
    let spectral = match kind.as_str() {
        "super_ohmic" => SpectralBlock::SuperOhmic {
            j0: e.req_f64(&k("j0"))?,
            omega0: e.req_f64(&k("omega0"))?,
            z: e.req_f64(&k("z"))?,
        },
        "flat" => SpectralBlock::Flat {
            j0: e.req_f64(&k("j0"))?,
            nu_min: e.f64(&k("nu_min"))?.unwrap_or(f64::NEG_INFINITY),
            nu_max: e.f64(&k("nu_max"))?.unwrap_or(f64::INFINITY),
        },
        "multi_peak" => {
            let key = k("peaks");
            let (pl, text) = e
                .take(&key)
                .ok_or_else(|| Error::config(None, Some(&key), "required key is missing"))?;
            let mut peaks = Vec::new();
            for part in text.split(';').filter(|p| !p.trim().is_empty()) {
                let v: Vec<f64> = part
                    .split_whitespace()
                    .map(parse_f64)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|m| Error::config(Some(pl), Some(&key), m))?;
                if v.len() != 3 {
                    return Err(Error::config(Some(pl), Some(&key), "each peak is `j0 omega0 z`, peaks separated by `;`"));
                }
                peaks.push((v[0], v[1], v[2]));
            }
            if peaks.is_empty() {
                return Err(Error::config(Some(pl), Some(&key), "no peaks given"));
            }
            SpectralBlock::MultiPeak(peaks)
        }
        "tabulated" => {
            let key = k("file");
            let (_, path) = e
                .take(&key)
                .ok_or_else(|| Error::config(None, Some(&key), "required key is missing"))?;
            SpectralBlock::Tabulated(PathBuf::from(path))
        }
        other => {
            return Err(Error::config(
                Some(line),
                Some(&kind_key),
                format!("unknown bath kind `{other}` (super_ohmic, flat, multi_peak, tabulated)"),
            ))
        }
    };
    let occupation = match (e.f64(&k("kbt"))?, e.f64(&k("n0"))?) {
        (Some(kbt), None) => Occupation::Thermal { kbt },
        (None, Some(n0)) => Occupation::Flat { n0 },
        _ => return Err(e.err(&kind_key, format!("give exactly one of `{s}.kbt` or `{s}.n0`"))),
    };
    let phi = match (e.f64(&k("phi_a"))?, e.f64(&k("phi_b"))?) {
        (Some(a), Some(b)) => Some([a, b]),
        (None, None) => None,
        _ => return Err(e.err(&kind_key, format!("give both `{s}.phi_a` and `{s}.phi_b` or neither"))),
    };
    Ok(BathBlock {
        spectral,
        occupation,
        phi,
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        Self::parse_with(text, None)
    }

    /// Parses with the command supplied from outside (the command line);
    /// it takes precedence over `task.command`, which may then be omitted.
    pub fn parse_with(text: &str, command: Option<Command>) -> Result<RunConfig> {
        let mut e = Entries::parse(text)?;
        let mode = (e.f64("system.omega_a")?, e.f64("system.omega_b")?);
        let center = (e.f64("system.omega")?, e.f64("system.delta")?);
        let frequencies = match (mode, center) {
            ((Some(omega_a), Some(omega_b)), (None, None)) => Frequencies::Modes { omega_a, omega_b },
            ((None, None), (Some(omega), Some(delta))) => Frequencies::Center { omega, delta },
            _ => {
                return Err(Error::config(
                    None,
                    Some("system"),
                    "give exactly one of (omega_a, omega_b) or (omega, delta)",
                ))
            }
        };
        let p = std::f64::consts::FRAC_1_SQRT_2;
        let system = SystemBlock {
            frequencies,
            phi_a: e.f64("system.phi_a")?.unwrap_or(p),
            phi_b: e.f64("system.phi_b")?.unwrap_or(p),
        };
        let mut baths = Vec::new();
        while e.has_section(&bath_section(baths.len())) {
            let s = bath_section(baths.len());
            baths.push(parse_bath(&mut e, &s)?);
        }
        if baths.is_empty() {
            return Err(Error::config(None, Some("bath.kind"), "at least one bath block is required"));
        }
        let from_file = match e.take("task.command") {
            Some((cl, cmd)) => Some(Command::parse(&cmd).ok_or_else(|| {
                let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
                Error::config(Some(cl), Some("task.command"), format!("unknown command `{cmd}` ({})", names.join(", ")))
            })?),
            None => None,
        };
        let command = command
            .or(from_file)
            .ok_or_else(|| Error::config(None, Some("task.command"), "required key is missing"))?;
        let methods = match e.take("task.methods") {
            None => vec![Method::Exact, Method::Br, Method::SpBr],
            Some((line, text)) => {
                let mut out = Vec::new();
                for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let m = Method::parse(name)
                        .ok_or_else(|| Error::config(Some(line), Some("task.methods"), format!("unknown method `{name}`")))?;
                    if out.contains(&m) {
                        return Err(Error::config(Some(line), Some("task.methods"), format!("method `{name}` listed twice")));
                    }
                    out.push(m);
                }
                if out.is_empty() {
                    return Err(Error::config(Some(line), Some("task.methods"), "methods list is empty"));
                }
                out
            }
        };
        let task = TaskBlock {
            command,
            times: e.grid("task.times")?,
            detunings: e.grid("task.detunings")?,
            scan_key: e.take("task.scan_key").map(|(_, v)| v),
            scan_values: e.grid("task.scan_values")?,
            methods,
        };
        let d = Numerics::default();
        let numerics = Numerics {
            max_dt: e.f64("numerics.max_dt")?.unwrap_or(d.max_dt),
            oracle_modes: e.usize("numerics.oracle_modes")?,
            oracle_nu_max: e.f64("numerics.oracle_nu_max")?,
            fock_n_max: e.usize("numerics.fock_n_max")?.unwrap_or(d.fock_n_max),
            ode_rtol: e.f64("numerics.ode_rtol")?.unwrap_or(d.ode_rtol),
            ode_atol: e.f64("numerics.ode_atol")?.unwrap_or(d.ode_atol),
            tol_oracle: e.f64("numerics.tol_oracle")?.unwrap_or(d.tol_oracle),
            tol_fock: e.f64("numerics.tol_fock")?.unwrap_or(d.tol_fock),
            tol_spectral: e.f64("numerics.tol_spectral")?.unwrap_or(d.tol_spectral),
        };
        if !(numerics.max_dt > 0.0) {
            return Err(e.err("numerics.max_dt", "must be > 0"));
        }
        let od = OutputBlock::default();
        let output = OutputBlock {
            dir: e.take("output.dir").map(|(_, v)| PathBuf::from(v)).unwrap_or(od.dir),
            name: e.take("output.name").map(|(_, v)| v).unwrap_or(od.name),
            plot: e.bool("output.plot")?.unwrap_or(od.plot),
        };
        e.finish()?;
        let cfg = RunConfig {
            system,
            baths,
            task,
            numerics,
            output,
            base: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, command: Option<Command>) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = RunConfig::parse_with(&text, command).map_err(|err| match err {
            Error::Config { line, key, message, .. } => Error::Config {
                path: Some(path.to_owned()),
                line,
                key,
                message,
            },
            other => other,
        })?;
        cfg.base = path.parent().map(Path::to_owned);
        Ok(cfg)
    }

    /// Checks that the command's required fields are present and that the
    /// model can be built.
    pub fn validate(&self) -> Result<()> {
        let need = |present: bool, key: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::config(None, Some(key), format!("required by `{}`", self.task.command.name())))
            }
        };
        match self.task.command {
            Command::Trajectory => need(self.task.times.is_some(), "task.times")?,
            Command::SweepDetuning => {
                need(self.task.times.is_some(), "task.times")?;
                need(self.task.detunings.is_some(), "task.detunings")?;
            }
            Command::SteadyState | Command::Poles => need(self.task.detunings.is_some(), "task.detunings")?,
            Command::StabilityMap => {
                need(self.task.detunings.is_some(), "task.detunings")?;
                need(self.task.scan_key.is_some(), "task.scan_key")?;
                need(self.task.scan_values.is_some(), "task.scan_values")?;
                let key = self.task.scan_key.as_deref().unwrap_or("");
                if !self.has_key(key) {
                    return Err(Error::config(None, Some(key), "scan key is not set in this configuration"));
                }
            }
            Command::Validate => {}
        }
        if let Some(Grid::Range { .. } | Grid::List(_)) = &self.task.times {
            if self.task.times.as_ref().map_or(false, |g| g.values()[0] < 0.0) {
                return Err(Error::config(None, Some("task.times"), "times must be >= 0"));
            }
        }
        self.system.spec()?;
        Ok(())
    }

    pub fn system_spec(&self) -> Result<SystemSpec> {
        self.system.spec()
    }

    pub fn bath_list(&self) -> Result<Vec<Bath>> {
        self.baths.iter().map(|b| b.bath(self.base.as_deref())).collect()
    }

    /// The first bath, for single-bath methods.
    pub fn bath(&self) -> Result<Bath> {
        self.baths[0].bath(self.base.as_deref())
    }

    pub fn is_multibath(&self) -> bool {
        self.baths.len() > 1 || self.baths[0].phi.is_some()
    }

    pub fn multibath(&self, sys: &SystemSpec) -> Result<MultiBathSpec> {
        let baths = self.bath_list()?;
        let terms = baths
            .into_iter()
            .zip(&self.baths)
            .map(|(bath, b)| BathCoupling {
                bath,
                phi: b.phi.unwrap_or(sys.phis()),
            })
            .collect();
        if self.is_multibath() {
            MultiBathSpec::new(terms)
        } else {
            Ok(MultiBathSpec::single(sys, &self.bath()?))
        }
    }

    fn has_key(&self, key: &str) -> bool {
        self.to_text()
            .lines()
            .any(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key))
    }

    /// A copy with one numeric key replaced, e.g. `bath.omega0`.
    pub fn with_override(&self, key: &str, value: f64) -> Result<RunConfig> {
        let mut text = String::new();
        let mut found = false;
        for line in self.to_text().lines() {
            match line.split_once('=') {
                Some((k, _)) if k.trim() == key => {
                    found = true;
                    let _ = writeln!(text, "{key} = {value}");
                }
                _ => {
                    text.push_str(line);
                    text.push('\n');
                }
            }
        }
        if !found {
            return Err(Error::config(None, Some(key), "scan key is not set in this configuration"));
        }
        let mut cfg = RunConfig::parse(&text)?;
        cfg.base = self.base.clone();
        Ok(cfg)
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match self.system.frequencies {
            Frequencies::Modes { omega_a, omega_b } => {
                kv("system.omega_a", format!("{omega_a}"));
                kv("system.omega_b", format!("{omega_b}"));
            }
            Frequencies::Center { omega, delta } => {
                kv("system.omega", format!("{omega}"));
                kv("system.delta", format!("{delta}"));
            }
        }
        kv("system.phi_a", format!("{}", self.system.phi_a));
        kv("system.phi_b", format!("{}", self.system.phi_b));
        for (n, b) in self.baths.iter().enumerate() {
            let sec = bath_section(n);
            let k = |name: &str| format!("{sec}.{name}");
            match &b.spectral {
                SpectralBlock::SuperOhmic { j0, omega0, z } => {
                    kv(&k("kind"), "super_ohmic".into());
                    kv(&k("j0"), format!("{j0}"));
                    kv(&k("omega0"), format!("{omega0}"));
                    kv(&k("z"), format!("{z}"));
                }
                SpectralBlock::Flat { j0, nu_min, nu_max } => {
                    kv(&k("kind"), "flat".into());
                    kv(&k("j0"), format!("{j0}"));
                    kv(&k("nu_min"), format!("{nu_min}"));
                    kv(&k("nu_max"), format!("{nu_max}"));
                }
                SpectralBlock::MultiPeak(peaks) => {
                    kv(&k("kind"), "multi_peak".into());
                    let t: Vec<String> = peaks.iter().map(|(j, w, z)| format!("{j} {w} {z}")).collect();
                    kv(&k("peaks"), t.join("; "));
                }
                SpectralBlock::Tabulated(p) => {
                    kv(&k("kind"), "tabulated".into());
                    kv(&k("file"), p.display().to_string());
                }
            }
            match b.occupation {
                Occupation::Thermal { kbt } => kv(&k("kbt"), format!("{kbt}")),
                Occupation::Flat { n0 } => kv(&k("n0"), format!("{n0}")),
            }
            if let Some([a, bb]) = b.phi {
                kv(&k("phi_a"), format!("{a}"));
                kv(&k("phi_b"), format!("{bb}"));
            }
        }
        kv("task.command", self.task.command.name().into());
        if let Some(g) = &self.task.times {
            kv("task.times", g.text());
        }
        if let Some(g) = &self.task.detunings {
            kv("task.detunings", g.text());
        }
        if let Some(k) = &self.task.scan_key {
            kv("task.scan_key", k.clone());
        }
        if let Some(g) = &self.task.scan_values {
            kv("task.scan_values", g.text());
        }
        let m: Vec<&str> = self.task.methods.iter().map(|m| m.name()).collect();
        kv("task.methods", m.join(", "));
        let n = &self.numerics;
        kv("numerics.max_dt", format!("{}", n.max_dt));
        if let Some(v) = n.oracle_modes {
            kv("numerics.oracle_modes", format!("{v}"));
        }
        if let Some(v) = n.oracle_nu_max {
            kv("numerics.oracle_nu_max", format!("{v}"));
        }
        kv("numerics.fock_n_max", format!("{}", n.fock_n_max));
        kv("numerics.ode_rtol", format!("{}", n.ode_rtol));
        kv("numerics.ode_atol", format!("{}", n.ode_atol));
        kv("numerics.tol_oracle", format!("{}", n.tol_oracle));
        kv("numerics.tol_fock", format!("{}", n.tol_fock));
        kv("numerics.tol_spectral", format!("{}", n.tol_spectral));
        kv("output.dir", self.output.dir.display().to_string());
        if !self.output.name.is_empty() {
            kv("output.name", self.output.name.clone());
        }
        kv("output.plot", format!("{}", self.output.plot));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "\
# structured bath, small detuning
system.omega_a = 1
system.omega_b = 0.9
bath.kind = super_ohmic
bath.j0 = 0.001
bath.omega0 = 0.9
bath.z = 3
bath.kbt = 0.52
task.command = trajectory
task.times = 0:10:0.5
task.methods = exact, br
";

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::parse(FIG2).unwrap();
        assert_eq!(cfg.task.times.as_ref().unwrap().values().len(), 21);
        assert_eq!(cfg.system.phi_a, std::f64::consts::FRAC_1_SQRT_2);
        let again = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn errors_name_line_and_key() {
        let bad = FIG2.replace("bath.z = 3", "bath.z = three");
        let err = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("line 7") && err.contains("bath.z"), "{err}");
        let unknown = format!("{FIG2}bath.zz = 1\n");
        let err = RunConfig::parse(&unknown).unwrap_err().to_string();
        assert!(err.contains("line 12") && err.contains("unknown key"), "{err}");
        let both = format!("{FIG2}system.omega = 1\nsystem.delta = 0\n");
        assert!(RunConfig::parse(&both).is_err());
        let dup = format!("{FIG2}bath.j0 = 2\n");
        assert!(RunConfig::parse(&dup).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn grids_must_increase() {
        assert!(Grid::parse("0, 1, 1").is_err());
        assert!(Grid::parse("0:1:0.3").is_err());
        assert_eq!(Grid::parse("-0.1:0.1:0.05").unwrap().values().len(), 5);
        assert!(RunConfig::parse(&FIG2.replace("exact, br", "")).is_err());
    }

    #[test]
    fn multibath_and_override() {
        let text = format!(
            "{FIG2}bath.phi_a = 1\nbath.phi_b = 0\nbath2.kind = flat\nbath2.j0 = 0.01\nbath2.nu_min = 0.5\nbath2.nu_max = 1.5\nbath2.n0 = 0.1\nbath2.phi_a = 0\nbath2.phi_b = 1\n"
        );
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.baths.len(), 2);
        let sys = cfg.system_spec().unwrap();
        assert!(!cfg.multibath(&sys).unwrap().is_parallel());
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        let o = cfg.with_override("bath2.j0", 0.5).unwrap();
        assert_eq!(o.baths[1].spectral, SpectralBlock::Flat { j0: 0.5, nu_min: 0.5, nu_max: 1.5 });
        assert!(cfg.with_override("bath3.j0", 1.0).is_err());
    }
}
