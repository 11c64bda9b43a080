//! Problem and case files.
//!
//! A problem file is line-oriented UTF-8 with `[section]` headers and `#`
//! comments. Recognised sections:
//!
//! ```text
//! [problem]
//! mechanism = h2.mech          # optional; bundled baseline when absent
//!
//! [integrator]
//! rtol = 1e-8
//! atol = 1e-14
//! atol_T = 1e-8
//! max_steps = 100000
//!
//! [sampler]
//! walkers = 64
//! sweeps = 15000
//! a = 1.3
//! seed = 7
//!
//! [active]
//! R9.A mean=4.65084e12 sigma=4.65084e12 lower=2e12 upper=1e13
//! X6.eff[AR]:tie=x6 mean=0.7 lower=0 upper=3
//!
//! [targets]
//! ign1 kind=ignition_delay T0=1000 p0=10 X=H2:0.3,O2:0.15,N2:0.55 d=6.8e-3 sigma=7e-4 t_end=0.1
//! ```
//!
//! Case files used by `simulate` share the `[targets]` grammar; `d` and
//! `sigma` are then optional.

use std::fmt::{self, Write as _};

use crate::reactor::{IntegratorConfig, ObservableSpec, Quantity, ReactorCase, ReactorMode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

/// Which mechanism value an active entry controls.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SlotField {
    /// Pre-exponential of the n-th Arrhenius set (0 is the primary line,
    /// 1.. the duplicates in file order).
    PreExponential(usize),
    LowPressureA,
    Efficiency(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SlotRef {
    pub reaction: String,
    pub field: SlotField,
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.field {
            SlotField::PreExponential(0) => write!(f, "{}.A", self.reaction),
            SlotField::PreExponential(k) => write!(f, "{}.A[{k}]", self.reaction),
            SlotField::LowPressureA => write!(f, "{}.A_low", self.reaction),
            SlotField::Efficiency(s) => write!(f, "{}.eff[{s}]", self.reaction),
        }
    }
}

impl SlotRef {
    pub fn parse(text: &str) -> Option<SlotRef> {
        let (reaction, field) = text.split_once('.')?;
        if reaction.is_empty() {
            return None;
        }
        let field = if field == "A" {
            SlotField::PreExponential(0)
        } else if field == "A_low" {
            SlotField::LowPressureA
        } else if let Some(rest) = field.strip_prefix("A[") {
            SlotField::PreExponential(rest.strip_suffix(']')?.parse().ok()?)
        } else if let Some(rest) = field.strip_prefix("eff[") {
            let sp = rest.strip_suffix(']')?;
            if sp.is_empty() {
                return None;
            }
            SlotField::Efficiency(sp.to_string())
        } else {
            return None;
        };
        Some(SlotRef {
            reaction: reaction.to_string(),
            field,
        })
    }
}

/// One `[active]` line. Prior values left out are resolved later
/// (mean from the mechanism, sigma equal to the mean).
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveEntry {
    pub slot: SlotRef,
    pub tie: Option<String>,
    pub mean: Option<f64>,
    pub sigma: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// One `[targets]` line.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEntry {
    pub label: String,
    pub case: ReactorCase,
    pub d: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSection {
    pub walkers: usize,
    pub sweeps: u64,
    pub a: f64,
    pub seed: u64,
    pub thin_store: u64,
    pub checkpoint_every: u64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            walkers: 64,
            sweeps: 15_000,
            a: 1.3,
            seed: 0,
            thin_store: 1,
            checkpoint_every: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemConfig {
    pub mechanism: Option<String>,
    pub integrator: IntegratorConfig,
    pub sampler: SamplerSection,
    pub active: Vec<ActiveEntry>,
    pub targets: Vec<TargetEntry>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Problem,
    Integrator,
    Sampler,
    Active,
    Targets,
}

fn number(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(line, format!("invalid number for '{key}': '{v}'")),
    }
}

fn integer<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>()
        .or_else(|_| err(line, format!("invalid integer for '{key}': '{v}'")))
}

fn key_value(line: usize, text: &str) -> Result<(&str, &str), ConfigError> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => err(line, format!("expected key=value, found '{text}'")),
    }
}

pub fn parse_composition(text: &str) -> Option<Vec<(String, f64)>> {
    text.split(',')
        .map(|item| {
            let (sp, x) = item.split_once(':')?;
            let x: f64 = x.trim().parse().ok()?;
            let sp = sp.trim();
            (!sp.is_empty() && x.is_finite()).then(|| (sp.to_string(), x))
        })
        .collect()
}

fn parse_quantity(text: &str) -> Option<Quantity> {
    match text {
        "T" => Some(Quantity::Temperature),
        "p" => Some(Quantity::Pressure),
        _ => {
            if let Some(sp) = text.strip_prefix("X_") {
                Some(Quantity::MoleFraction(sp.to_string()))
            } else {
                text.strip_prefix("Y_")
                    .map(|sp| Quantity::MassFraction(sp.to_string()))
            }
        }
    }
}

fn quantity_text(q: &Quantity) -> String {
    match q {
        Quantity::Temperature => "T".into(),
        Quantity::Pressure => "p".into(),
        Quantity::MoleFraction(s) => format!("X_{s}"),
        Quantity::MassFraction(s) => format!("Y_{s}"),
    }
}

fn parse_active(line: usize, text: &str) -> Result<ActiveEntry, ConfigError> {
    let mut tokens = text.split_whitespace();
    let head = tokens.next().unwrap_or_default();
    let (slot_text, tie) = match head.split_once(":tie=") {
        Some((s, g)) if !g.is_empty() => (s, Some(g.to_string())),
        Some(_) => return err(line, "empty tie group"),
        None => (head, None),
    };
    let slot = SlotRef::parse(slot_text).ok_or_else(|| ConfigError {
        line,
        message: format!("invalid parameter slot '{slot_text}'"),
    })?;
    let mut entry = ActiveEntry {
        slot,
        tie,
        mean: None,
        sigma: None,
        lower: None,
        upper: None,
    };
    for tok in tokens {
        let (k, v) = key_value(line, tok)?;
        let x = number(line, k, v)?;
        let target = match k {
            "mean" => &mut entry.mean,
            "sigma" => &mut entry.sigma,
            "lower" => &mut entry.lower,
            "upper" => &mut entry.upper,
            _ => return err(line, format!("unknown active-entry key '{k}'")),
        };
        *target = Some(x);
    }
    Ok(entry)
}

fn parse_target(line: usize, text: &str) -> Result<TargetEntry, ConfigError> {
    let mut tokens = text.split_whitespace();
    let label = tokens.next().unwrap_or_default().to_string();
    if label.contains('=') {
        return err(line, "target line must start with a label");
    }
    let mut kind = None;
    let mut mode = ReactorMode::ConstantPressure;
    let (mut t0, mut p0, mut x, mut t_end) = (None, None, None, None);
    let (mut d, mut sigma) = (None, None);
    let (mut t_ign, mut species, mut fraction, mut time, mut quantity) =
        (None, None, None, None, None);
    for tok in tokens {
        let (k, v) = key_value(line, tok)?;
        match k {
            "kind" => kind = Some(v.to_string()),
            "mode" => {
                mode = match v {
                    "constant_pressure" => ReactorMode::ConstantPressure,
                    "constant_volume" => ReactorMode::ConstantVolume,
                    _ => return err(line, format!("unknown mode '{v}'")),
                }
            }
            "T0" => t0 = Some(number(line, k, v)?),
            "p0" => p0 = Some(number(line, k, v)?),
            "X" => {
                x = Some(parse_composition(v).ok_or_else(|| ConfigError {
                    line,
                    message: format!("invalid composition '{v}'"),
                })?)
            }
            "t_end" => t_end = Some(number(line, k, v)?),
            "d" => d = Some(number(line, k, v)?),
            "sigma" => sigma = Some(number(line, k, v)?),
            "T_ign" => t_ign = Some(number(line, k, v)?),
            "species" => species = Some(v.to_string()),
            "fraction" => fraction = Some(number(line, k, v)?),
            "t" => time = Some(number(line, k, v)?),
            "quantity" => {
                quantity = Some(parse_quantity(v).ok_or_else(|| ConfigError {
                    line,
                    message: format!("unknown quantity '{v}'"),
                })?)
            }
            _ => return err(line, format!("unknown target key '{k}'")),
        }
    }
    let require = |v: Option<f64>, k: &str| {
        v.ok_or_else(|| ConfigError {
            line,
            message: format!("target '{label}' is missing '{k}'"),
        })
    };
    let t0 = require(t0, "T0")?;
    let p0 = require(p0, "p0")?;
    let t_end = require(t_end, "t_end")?;
    let mole_fractions = x.ok_or_else(|| ConfigError {
        line,
        message: format!("target '{label}' is missing 'X'"),
    })?;
    let observable = match kind.as_deref() {
        Some("ignition_delay") => ObservableSpec::IgnitionDelayThreshold {
            t_ign: t_ign.unwrap_or(t0 + 400.0),
        },
        Some("ignition_delay_max_dTdt") => ObservableSpec::IgnitionDelayMaxDtDt,
        Some("fuel_fraction") => ObservableSpec::FuelFraction {
            species: species.ok_or_else(|| ConfigError {
                line,
                message: format!("target '{label}' is missing 'species'"),
            })?,
            fraction: require(fraction, "fraction")?,
        },
        Some("state_at_time") => ObservableSpec::StateAtTime {
            time: require(time, "t")?,
            quantity: quantity.ok_or_else(|| ConfigError {
                line,
                message: format!("target '{label}' is missing 'quantity'"),
            })?,
        },
        Some(other) => return err(line, format!("unknown observable kind '{other}'")),
        None => return err(line, format!("target '{label}' is missing 'kind'")),
    };
    Ok(TargetEntry {
        label,
        case: ReactorCase {
            mode,
            initial: crate::reactor::InitialState {
                temperature: t0,
                pressure: p0,
                mole_fractions,
            },
            t_end,
            observable,
        },
        d,
        sigma,
    })
}

pub fn parse_problem(text: &str) -> Result<ProblemConfig, ConfigError> {
    let mut cfg = ProblemConfig::default();
    let mut section = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "problem" => Section::Problem,
                "integrator" => Section::Integrator,
                "sampler" => Section::Sampler,
                "active" => Section::Active,
                "targets" => Section::Targets,
                other => return err(line, format!("unknown section '[{other}]'")),
            };
            continue;
        }
        match section {
            Section::None => return err(line, "content before the first section header"),
            Section::Problem => match key_value(line, body)? {
                ("mechanism", v) => cfg.mechanism = Some(v.to_string()),
                (k, _) => return err(line, format!("unknown problem key '{k}'")),
            },
            Section::Integrator => {
                let (k, v) = key_value(line, body)?;
                let ic = &mut cfg.integrator;
                match k {
                    "rtol" => ic.rtol = number(line, k, v)?,
                    "atol" => ic.atol = number(line, k, v)?,
                    "atol_T" => ic.atol_temperature = number(line, k, v)?,
                    "max_steps" => ic.max_steps = integer(line, k, v)?,
                    "initial_dt" => ic.initial_dt = Some(number(line, k, v)?),
                    _ => return err(line, format!("unknown integrator key '{k}'")),
                }
                if let Err(e) = ic.validate() {
                    return err(line, e.to_string());
                }
            }
            Section::Sampler => {
                let (k, v) = key_value(line, body)?;
                let s = &mut cfg.sampler;
                match k {
                    "walkers" => s.walkers = integer(line, k, v)?,
                    "sweeps" => s.sweeps = integer(line, k, v)?,
                    "a" => s.a = number(line, k, v)?,
                    "seed" => s.seed = integer(line, k, v)?,
                    "thin_store" => s.thin_store = integer(line, k, v)?,
                    "checkpoint_every" => s.checkpoint_every = integer(line, k, v)?,
                    _ => return err(line, format!("unknown sampler key '{k}'")),
                }
            }
            Section::Active => cfg.active.push(parse_active(line, body)?),
            Section::Targets => {
                let t = parse_target(line, body)?;
                if cfg.targets.iter().any(|o| o.label == t.label) {
                    return err(line, format!("duplicate target label '{}'", t.label));
                }
                cfg.targets.push(t);
            }
        }
    }
    Ok(cfg)
}

/// Renders a target line in the grammar `parse_problem` reads.
pub fn target_line(t: &TargetEntry) -> String {
    let c = &t.case;
    let mut s = t.label.clone();
    let kind = match &c.observable {
        ObservableSpec::IgnitionDelayThreshold { .. } => "ignition_delay",
        ObservableSpec::IgnitionDelayMaxDtDt => "ignition_delay_max_dTdt",
        ObservableSpec::FuelFraction { .. } => "fuel_fraction",
        ObservableSpec::StateAtTime { .. } => "state_at_time",
    };
    let mode = match c.mode {
        ReactorMode::ConstantPressure => "constant_pressure",
        ReactorMode::ConstantVolume => "constant_volume",
    };
    let x: Vec<String> = c
        .initial
        .mole_fractions
        .iter()
        .map(|(sp, v)| format!("{sp}:{v:e}"))
        .collect();
    let _ = write!(
        s,
        " kind={kind} mode={mode} T0={:e} p0={:e} X={} t_end={:e}",
        c.initial.temperature,
        c.initial.pressure,
        x.join(","),
        c.t_end
    );
    match &c.observable {
        ObservableSpec::IgnitionDelayThreshold { t_ign } => {
            let _ = write!(s, " T_ign={t_ign:e}");
        }
        ObservableSpec::IgnitionDelayMaxDtDt => {}
        ObservableSpec::FuelFraction { species, fraction } => {
            let _ = write!(s, " species={species} fraction={fraction:e}");
        }
        ObservableSpec::StateAtTime { time, quantity } => {
            let _ = write!(s, " t={time:e} quantity={}", quantity_text(quantity));
        }
    }
    if let Some(d) = t.d {
        let _ = write!(s, " d={d:e}");
    }
    if let Some(sg) = t.sigma {
        let _ = write!(s, " sigma={sg:e}");
    }
    s
}

pub fn active_line(a: &ActiveEntry) -> String {
    let mut s = a.slot.to_string();
    if let Some(g) = &a.tie {
        let _ = write!(s, ":tie={g}");
    }
    for (k, v) in [
        ("mean", a.mean),
        ("sigma", a.sigma),
        ("lower", a.lower),
        ("upper", a.upper),
    ] {
        if let Some(v) = v {
            let _ = write!(s, " {k}={v:e}");
        }
    }
    s
}

/// Serialises a problem; numbers use the shortest round-trip decimal form,
/// so `parse_problem(&serialize_problem(p)) == p`.
pub fn serialize_problem(p: &ProblemConfig) -> String {
    let mut out = String::new();
    if let Some(m) = &p.mechanism {
        let _ = writeln!(out, "[problem]\nmechanism = {m}\n");
    }
    let ic = &p.integrator;
    let _ = writeln!(
        out,
        "[integrator]\nrtol = {:e}\natol = {:e}\natol_T = {:e}\nmax_steps = {}",
        ic.rtol, ic.atol, ic.atol_temperature, ic.max_steps
    );
    if let Some(dt) = ic.initial_dt {
        let _ = writeln!(out, "initial_dt = {dt:e}");
    }
    let s = &p.sampler;
    let _ = writeln!(
        out,
        "\n[sampler]\nwalkers = {}\nsweeps = {}\na = {:e}\nseed = {}\nthin_store = {}\ncheckpoint_every = {}",
        s.walkers, s.sweeps, s.a, s.seed, s.thin_store, s.checkpoint_every
    );
    if !p.active.is_empty() {
        out.push_str("\n[active]\n");
        for a in &p.active {
            out.push_str(&active_line(a));
            out.push('\n');
        }
    }
    if !p.targets.is_empty() {
        out.push_str("\n[targets]\n");
        for t in &p.targets {
            out.push_str(&target_line(t));
            out.push('\n');
        }
    }
    out
}
