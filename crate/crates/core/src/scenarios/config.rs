//! Scenario files: TOML with strict key checking.
//!
//! ```toml
//! name = "dj"
//! model = "s_one"            # general | s_half | s_one | bh3 | trimer
//!
//! [params]                   # cm⁻¹ and tesla; unset keys keep defaults
//! jk = -0.40
//! d = -0.60
//!
//! [initial]
//! state = "down|2,2"         # or theta/phi/coupled for a filtered state
//!
//! [time]
//! span_ps = 150.0
//! points = 1000
//!
//! [[outputs]]
//! kind = "channels"
//! targets = ["down|2,2", "up|2,1"]
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Deserialize;

use crate::basis::BasisLabel;
use crate::error::{Error, Result};
use crate::filtering::CoupledState;
use crate::model::ModelParams;
use crate::output::format_sig;
use crate::spin::Spin;

pub const DEFAULT_POINTS: usize = 1000;
pub const DEFAULT_SCAN_POINTS: usize = 91;
pub const DEFAULT_BALANCE_POINTS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    General,
    SHalf,
    SOne,
    Bh3,
    Trimer,
}

impl ModelKind {
    pub fn is_cluster(self) -> bool {
        matches!(self, ModelKind::Bh3 | ModelKind::Trimer)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::General => "general",
            ModelKind::SHalf => "s_half",
            ModelKind::SOne => "s_one",
            ModelKind::Bh3 => "bh3",
            ModelKind::Trimer => "trimer",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "general" => Ok(ModelKind::General),
            "s_half" => Ok(ModelKind::SHalf),
            "s_one" => Ok(ModelKind::SOne),
            "bh3" => Ok(ModelKind::Bh3),
            "trimer" => Ok(ModelKind::Trimer),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected general, s_half, s_one, bh3 or trimer)"
            ))),
        }
    }
}

/// An angle in radians, written as a number or as `pi`, `pi/8`, `3pi/4`, `-pi/2`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(try_from = "AngleText")]
pub struct Angle(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleText {
    Number(f64),
    Text(String),
}

impl TryFrom<AngleText> for Angle {
    type Error = String;

    fn try_from(a: AngleText) -> std::result::Result<Self, String> {
        match a {
            AngleText::Number(x) => Ok(Angle(x)),
            AngleText::Text(t) => parse_angle(&t).map(Angle),
        }
    }
}

pub fn parse_angle(text: &str) -> std::result::Result<f64, String> {
    let bad = || format!("cannot read `{text}` as an angle (use e.g. 0.3, pi, pi/8, 3pi/4)");
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.to_ascii_lowercase();
    let Some(pos) = t.find("pi") else {
        return t.parse().map_err(|_| bad());
    };
    let coeff = match &t[..pos] {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.trim_end_matches('*').parse::<f64>().map_err(|_| bad())?,
    };
    let rest = &t[pos + 2..];
    let denom = match rest {
        "" => 1.0,
        r => r
            .strip_prefix('/')
            .and_then(|d| d.parse::<f64>().ok())
            .filter(|d| *d != 0.0)
            .ok_or_else(bad)?,
    };
    Ok(coeff * PI / denom)
}

/// Spin given as `1`, `1.5` or `"3/2"`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(try_from = "SpinText")]
pub struct SpinValue(pub Spin);

#[derive(Deserialize)]
#[serde(untagged)]
enum SpinText {
    Number(f64),
    Text(String),
}

impl TryFrom<SpinText> for SpinValue {
    type Error = String;

    fn try_from(s: SpinText) -> std::result::Result<Self, String> {
        let spin = match s {
            SpinText::Number(x) => {
                let twice = 2.0 * x;
                if twice.fract() != 0.0 || twice < 0.0 {
                    return Err(format!("spin must be a non-negative multiple of 1/2, got {x}"));
                }
                Spin::dynamic(twice as u32)
            }
            SpinText::Text(t) => t.parse::<Spin>(),
        };
        spin.map(SpinValue).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub name: Option<String>,
    pub model: ModelKind,
    #[serde(default)]
    pub params: RawParams,
    #[serde(default)]
    pub initial: RawInitial,
    #[serde(default)]
    pub time: RawTime,
    #[serde(default)]
    pub outputs: Vec<RawOutput>,
    pub sweep: Option<RawSweep>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub s: Option<SpinValue>,
    pub jz: Option<f64>,
    pub jxy: Option<f64>,
    pub jh: Option<f64>,
    pub jk: Option<f64>,
    pub jk2: Option<f64>,
    pub jk3: Option<f64>,
    pub d: Option<f64>,
    pub t_hop: Option<f64>,
    pub b0: Option<f64>,
    pub g1: Option<f64>,
    pub g23: Option<f64>,
    pub j: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub state: Option<String>,
    pub theta: Option<Angle>,
    pub phi: Option<Angle>,
    pub coupled: Option<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTime {
    pub span_ps: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawOutput {
    Channels {
        targets: Option<Vec<String>>,
        measure_theta: Option<Angle>,
        measure_phi: Option<Angle>,
        file: Option<String>,
    },
    Bloch {
        block: Option<[String; 2]>,
        file: Option<String>,
    },
    Scan {
        t_snapshot_ps: f64,
        to: String,
        from: Option<String>,
        theta_in_points: Option<usize>,
        theta_out_points: Option<usize>,
        phi_in: Option<Angle>,
        phi_out: Option<Angle>,
        file: Option<String>,
    },
    ResonanceReport {
        file: Option<String>,
    },
    Balance {
        d: Option<f64>,
        points: Option<usize>,
        file: Option<String>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Model parameters after defaults and validation.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioParams {
    /// Electron plus coupled pair.
    Electron(ModelParams),
    /// Three spin-1 sites with exchange `j` and anisotropy `d`.
    Cluster { j: f64, d: f64 },
}

impl ScenarioParams {
    /// Defaults for a model: the shared figure parameters for the electron
    /// models, `J = 1, D = 0` for the spin-1 clusters.
    pub fn defaults(model: ModelKind, s: Option<Spin>) -> Result<Self> {
        Ok(match model {
            ModelKind::SHalf => ScenarioParams::Electron(ModelParams::reference(Spin::HALF)),
            ModelKind::SOne => ScenarioParams::Electron(ModelParams::reference(Spin::ONE)),
            ModelKind::General => {
                let s = s.ok_or_else(|| {
                    Error::Config("model `general` needs `params.s` (e.g. s = \"3/2\")".into())
                })?;
                ScenarioParams::Electron(ModelParams::reference(s))
            }
            ModelKind::Bh3 | ModelKind::Trimer => ScenarioParams::Cluster { j: 1.0, d: 0.0 },
        })
    }

    /// Sets one named parameter. `jk` sets both Kondo couplings and `jh`
    /// both Heisenberg components.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let unknown = |model: &str| {
            Error::Config(format!("parameter `{name}` does not apply to the {model} models"))
        };
        match self {
            ScenarioParams::Electron(p) => match name {
                "jz" => p.jz = value,
                "jxy" => p.jxy = value,
                "jh" => *p = p.clone().with_heisenberg(value),
                "jk" => *p = p.clone().with_kondo(value),
                "jk2" => p.jk2 = value,
                "jk3" => p.jk3 = value,
                "d" => p.d = value,
                "t_hop" => *p = p.clone().with_hopping(value),
                "b0" => p.b0 = value,
                "g1" => p.g1 = value,
                "g23" => p.g23 = value,
                _ => return Err(unknown("electron")),
            },
            ScenarioParams::Cluster { j, d } => match name {
                "j" => *j = value,
                "d" => *d = value,
                _ => return Err(unknown("bh3/trimer")),
            },
        }
        Ok(())
    }

    pub fn electron(&self) -> Option<&ModelParams> {
        match self {
            ScenarioParams::Electron(p) => Some(p),
            ScenarioParams::Cluster { .. } => None,
        }
    }

    /// One-line `key=value` listing for file headers.
    pub fn describe(&self) -> String {
        let f = |x: f64| format_sig(x);
        match self {
            ScenarioParams::Electron(p) => format!(
                "s={} jz={} jxy={} jk2={} jk3={} d={} t_hop={} b0={} g1={} g23={}",
                p.s2,
                f(p.jz),
                f(p.jxy),
                f(p.jk2),
                f(p.jk3),
                f(p.d),
                f(p.t_hop.re),
                f(p.b0),
                f(p.g1),
                f(p.g23)
            ),
            ScenarioParams::Cluster { j, d } => format!("j={} d={}", f(*j), f(*d)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    Basis(BasisLabel),
    /// Spinor `(θ, φ)` on particle 1 times a coupled pair state.
    Filtered {
        theta: f64,
        phi: f64,
        coupled: CoupledState,
    },
}

impl fmt::Display for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Basis(l) => f.write_str(&l.code()),
            InitialState::Filtered { theta, phi, coupled } => write!(
                f,
                "theta={} phi={} coupled={}",
                format_sig(*theta),
                format_sig(*phi),
                coupled.code()
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OutputSpec {
    Channels {
        targets: Option<Vec<String>>,
        measure: Option<(f64, f64)>,
        file: Option<String>,
    },
    Bloch {
        block: Option<[BasisLabel; 2]>,
        file: Option<String>,
    },
    Scan {
        t_snapshot_ps: f64,
        from: Option<CoupledState>,
        to: CoupledState,
        theta_in_points: usize,
        theta_out_points: usize,
        phi_in: f64,
        phi_out: f64,
        file: Option<String>,
    },
    ResonanceReport {
        file: Option<String>,
    },
    Balance {
        d: Option<f64>,
        points: usize,
        file: Option<String>,
    },
}

impl OutputSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            OutputSpec::Channels { .. } => "channels",
            OutputSpec::Bloch { .. } => "bloch",
            OutputSpec::Scan { .. } => "scan",
            OutputSpec::ResonanceReport { .. } => "resonance_report",
            OutputSpec::Balance { .. } => "balance",
        }
    }

    pub fn file(&self) -> Option<&str> {
        match self {
            OutputSpec::Channels { file, .. }
            | OutputSpec::Bloch { file, .. }
            | OutputSpec::Scan { file, .. }
            | OutputSpec::ResonanceReport { file }
            | OutputSpec::Balance { file, .. } => file.as_deref(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// A validated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: ModelKind,
    pub params: ScenarioParams,
    pub initial: InitialState,
    /// `None` picks a span covering a few oscillation periods.
    pub span_ps: Option<f64>,
    pub points: usize,
    pub outputs: Vec<OutputSpec>,
    pub sweep: Option<Sweep>,
}

impl Scenario {
    pub fn parse(text: &str, default_name: &str) -> Result<Self> {
        let raw: RawScenario =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        Self::resolve(raw, default_name)
    }

    fn resolve(raw: RawScenario, default_name: &str) -> Result<Self> {
        let model = raw.model;
        let name = raw.name.unwrap_or_else(|| default_name.to_string());
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::Config(format!("`name` must be a plain file stem, got `{name}`")));
        }
        let params = resolve_params(model, &raw.params)?;
        let initial = resolve_initial(model, &raw.initial)?;
        if let Some(span) = raw.time.span_ps {
            if !(span.is_finite() && span > 0.0) {
                return Err(Error::Config(format!("`time.span_ps` must be positive, got {span}")));
            }
        }
        let points = raw.time.points.unwrap_or(DEFAULT_POINTS);
        if points < 2 {
            return Err(Error::Config(format!("`time.points` must be at least 2, got {points}")));
        }
        let outputs = if raw.outputs.is_empty() {
            vec![OutputSpec::Channels {
                targets: None,
                measure: None,
                file: None,
            }]
        } else {
            raw.outputs
                .into_iter()
                .map(|o| resolve_output(model, &initial, o))
                .collect::<Result<_>>()?
        };
        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                if s.values.is_empty() {
                    return Err(Error::Config("`sweep.values` is empty".into()));
                }
                let mut probe = params.clone();
                probe.set(&s.parameter, s.values[0])?;
                Some(Sweep {
                    parameter: s.parameter,
                    values: s.values,
                })
            }
        };
        Ok(Scenario {
            name,
            model,
            params,
            initial,
            span_ps: raw.time.span_ps,
            points,
            outputs,
            sweep,
        })
    }
}

fn resolve_params(model: ModelKind, raw: &RawParams) -> Result<ScenarioParams> {
    let s = raw.s.map(|v| v.0);
    match (model, s) {
        (ModelKind::General, _) => {}
        (_, Some(_)) => {
            return Err(Error::Config(format!(
                "`params.s` is only used by the general model; {model} fixes the spin"
            )))
        }
        _ => {}
    }
    let mut params = ScenarioParams::defaults(model, s)?;
    let fields = [
        ("jh", raw.jh),
        ("jz", raw.jz),
        ("jxy", raw.jxy),
        ("jk", raw.jk),
        ("jk2", raw.jk2),
        ("jk3", raw.jk3),
        ("d", raw.d),
        ("t_hop", raw.t_hop),
        ("b0", raw.b0),
        ("g1", raw.g1),
        ("g23", raw.g23),
        ("j", raw.j),
    ];
    for (key, value) in fields {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(Error::Config(format!("`params.{key}` must be finite")));
            }
            params.set(key, v).map_err(|_| {
                Error::Config(format!("`params.{key}` does not apply to model {model}"))
            })?;
        }
    }
    if raw.jh.is_some() && (raw.jz.is_some() || raw.jxy.is_some()) {
        return Err(Error::Config("set either `params.jh` or `params.jz`/`params.jxy`, not both".into()));
    }
    if raw.jk.is_some() && (raw.jk2.is_some() || raw.jk3.is_some()) {
        return Err(Error::Config("set either `params.jk` or `params.jk2`/`params.jk3`, not both".into()));
    }
    if let ScenarioParams::Electron(p) = &params {
        p.validate()?;
    }
    Ok(params)
}

fn default_state(model: ModelKind) -> &'static str {
    match model {
        ModelKind::SHalf => "down|1,1",
        ModelKind::Bh3 => "S=2,M=2;s23=2",
        ModelKind::Trimer => "1|1,0",
        ModelKind::SOne | ModelKind::General => "down|2,2",
    }
}

fn resolve_initial(model: ModelKind, raw: &RawInitial) -> Result<InitialState> {
    let filtered = raw.theta.is_some() || raw.phi.is_some() || raw.coupled.is_some();
    if filtered {
        if raw.state.is_some() {
            return Err(Error::Config(
                "`initial.state` cannot be combined with `initial.theta`/`phi`/`coupled`".into(),
            ));
        }
        if model.is_cluster() {
            return Err(Error::Config(format!(
                "spinor-filtered initial states need the spin-1/2 electron; model {model} has none"
            )));
        }
        let coupled = raw
            .coupled
            .as_deref()
            .ok_or_else(|| Error::Config("filtered initial state needs `initial.coupled` (e.g. \"1,1\")".into()))?;
        return Ok(InitialState::Filtered {
            theta: check_polar(raw.theta.map_or(0.0, |a| a.0), "initial.theta")?,
            phi: check_azimuth(raw.phi.map_or(0.0, |a| a.0), "initial.phi")?,
            coupled: parse_coupled_state(coupled)?,
        });
    }
    let text = raw.state.as_deref().unwrap_or_else(|| default_state(model));
    Ok(InitialState::Basis(parse_label(text)?))
}

pub fn parse_label(text: &str) -> Result<BasisLabel> {
    text.parse().map_err(|_| {
        Error::Config(format!(
            "cannot read state label `{text}` (forms: \"down|2,2\", \"1|1,0\", \"up,1/2,-1/2\", \"S=2,M=1;s23=1\")"
        ))
    })
}

fn parse_coupled_state(text: &str) -> Result<CoupledState> {
    CoupledState::parse(text).map_err(|_| {
        Error::Config(format!("cannot read coupled pair state `{text}` (form: \"s23,m23\", e.g. \"1,0\")"))
    })
}

fn check_polar(theta: f64, key: &str) -> Result<f64> {
    if (0.0..=PI + 1e-12).contains(&theta) {
        Ok(theta.min(PI))
    } else {
        Err(Error::Config(format!("`{key}` must lie in [0, pi], got {theta}")))
    }
}

fn check_azimuth(phi: f64, key: &str) -> Result<f64> {
    if (0.0..2.0 * PI).contains(&phi) {
        Ok(phi)
    } else {
        Err(Error::Config(format!("`{key}` must lie in [0, 2pi), got {phi}")))
    }
}

fn resolve_output(model: ModelKind, initial: &InitialState, raw: RawOutput) -> Result<OutputSpec> {
    let filtered = matches!(initial, InitialState::Filtered { .. });
    Ok(match raw {
        RawOutput::Channels {
            targets,
            measure_theta,
            measure_phi,
            file,
        } => {
            let measure = match (initial, measure_theta, measure_phi) {
                (InitialState::Filtered { theta, phi, .. }, t, p) => Some((
                    check_polar(t.map_or(*theta, |a| a.0), "measure_theta")?,
                    check_azimuth(p.map_or(*phi, |a| a.0), "measure_phi")?,
                )),
                (InitialState::Basis(_), None, None) => None,
                (InitialState::Basis(_), _, _) => {
                    return Err(Error::Config(
                        "`measure_theta`/`measure_phi` need a filtered initial state (theta/phi/coupled)".into(),
                    ))
                }
            };
            if let Some(ts) = &targets {
                if ts.is_empty() {
                    return Err(Error::Config("`targets` is empty".into()));
                }
                for t in ts {
                    if measure.is_some() {
                        parse_coupled_state(t)?;
                    } else {
                        parse_label(t)?;
                    }
                }
            }
            OutputSpec::Channels {
                targets,
                measure,
                file,
            }
        }
        RawOutput::Bloch { block, file } => {
            if filtered {
                return Err(Error::Config("`bloch` output needs a basis-state initial state".into()));
            }
            let block = match block {
                Some([a, b]) => Some([parse_label(&a)?, parse_label(&b)?]),
                None => None,
            };
            OutputSpec::Bloch { block, file }
        }
        RawOutput::Scan {
            t_snapshot_ps,
            to,
            from,
            theta_in_points,
            theta_out_points,
            phi_in,
            phi_out,
            file,
        } => {
            if model.is_cluster() {
                return Err(Error::Config(format!("`scan` output needs the electron; model {model} has none")));
            }
            if !(t_snapshot_ps.is_finite() && t_snapshot_ps >= 0.0) {
                return Err(Error::Config(format!("`t_snapshot_ps` must be non-negative, got {t_snapshot_ps}")));
            }
            let from = from.as_deref().map(parse_coupled_state).transpose()?;
            let points = |n: Option<usize>, key: &str| match n.unwrap_or(DEFAULT_SCAN_POINTS) {
                0 => Err(Error::Config(format!("`{key}` must be at least 1"))),
                n => Ok(n),
            };
            OutputSpec::Scan {
                t_snapshot_ps,
                from,
                to: parse_coupled_state(&to)?,
                theta_in_points: points(theta_in_points, "theta_in_points")?,
                theta_out_points: points(theta_out_points, "theta_out_points")?,
                phi_in: check_azimuth(phi_in.map_or(0.0, |a| a.0), "phi_in")?,
                phi_out: check_azimuth(phi_out.map_or(0.0, |a| a.0), "phi_out")?,
                file,
            }
        }
        RawOutput::ResonanceReport { file } => OutputSpec::ResonanceReport { file },
        RawOutput::Balance { d, points, file } => {
            if model.is_cluster() || model == ModelKind::SHalf {
                return Err(Error::Config(format!(
                    "`balance` output needs coupled spins s ≥ 1; model {model} does not qualify"
                )));
            }
            let points = points.unwrap_or(DEFAULT_BALANCE_POINTS);
            if points < 2 {
                return Err(Error::Config("`balance.points` must be at least 2".into()));
            }
            OutputSpec::Balance { d, points, file }
        }
    })
}
