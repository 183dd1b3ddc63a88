//! Circuit parameter files and simulation run configurations (JSON).
//!
//! Parameter files are flat objects of SI numbers keyed by the usual symbol
//! names (`"L_s"`, `"R_d_on"`, ...). Keys that a circuit does not know are
//! rejected; keys that are absent take built-in defaults and are reported as
//! such.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::circuits::{
    hf_boost, hf_rectifier, ideal_diode_circuit_with, lc_circuit, two_source_circuit, BoostParams, IdealDiodeParams,
    LcParams, ParamError, RectifierParams, TwoSourceParams, TARGET_INDUCTOR_CURRENT, TARGET_OUTPUT_VOLTAGE,
};
use crate::derive::{build_switched_model, DeriveError, SwitchedModel};
use crate::elcore::{CircuitDescription, ModeVector};
use crate::reference::{BOOST_PRINTED_ORDER, RECTIFIER_PRINTED_ORDER};
use crate::sim::{
    calibrate_load, InputSignal, Inputs, Integrator, LoadCalibration, ModeScheduler, SchedulerRule, SimConfig,
    SimError, Window,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown circuit `{0}` (expected one of: ideal-diode, two-source, lc, hf-rectifier, hf-boost)")]
    UnknownCircuit(String),
    #[error("cannot read `{path}`: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("parameter file must be a JSON object")]
    NotAnObject,
    #[error("unknown parameter `{key}` for {circuit} (known: {known})")]
    UnknownKey {
        circuit: CircuitKind,
        key: String,
        known: String,
    },
    #[error("parameter `{0}` must be a number")]
    NotANumber(String),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error("invalid mode: {0}")]
    Mode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CircuitKind {
    IdealDiode,
    TwoSource,
    Lc,
    HfRectifier,
    HfBoost,
}

impl CircuitKind {
    pub const ALL: [CircuitKind; 5] = [
        Self::IdealDiode,
        Self::TwoSource,
        Self::Lc,
        Self::HfRectifier,
        Self::HfBoost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::IdealDiode => "ideal-diode",
            Self::TwoSource => "two-source",
            Self::Lc => "lc",
            Self::HfRectifier => "hf-rectifier",
            Self::HfBoost => "hf-boost",
        }
    }

    /// Keys accepted in this circuit's parameter file.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Self::IdealDiode => &["L_s", "R_s", "C", "R", "V_i"],
            Self::TwoSource => &["L1", "L2", "C", "R", "E_1", "E_2"],
            Self::Lc => &["L1", "L2", "C1", "E"],
            Self::HfRectifier => &[
                "V_i", "f", "R_s", "L_s", "R_d_on", "R_d_off", "C_d", "V_d_on", "C", "R_c", "L_c", "R_L",
            ],
            Self::HfBoost => &[
                "V_i", "L", "R_L", "C_L", "L_s", "C_s", "R_s_on", "R_s_off", "R_d_on", "R_d_off", "C_d", "V_d_on", "C",
                "R_c", "L_c", "R_o", "d", "f",
            ],
        }
    }

    /// Keys whose defaults are a judgement call and are always reported.
    pub fn ambiguous_keys(self) -> &'static [&'static str] {
        match self {
            Self::HfRectifier => &["L_c"],
            Self::HfBoost => &["C_d", "R_o"],
            _ => &[],
        }
    }
}

impl fmt::Display for CircuitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CircuitKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownCircuit(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircuitParams {
    IdealDiode(IdealDiodeParams),
    TwoSource(TwoSourceParams),
    Lc(LcParams),
    HfRectifier(RectifierParams),
    HfBoost(BoostParams),
}

impl CircuitParams {
    pub fn defaults(kind: CircuitKind) -> Self {
        match kind {
            CircuitKind::IdealDiode => Self::IdealDiode(IdealDiodeParams::default()),
            CircuitKind::TwoSource => Self::TwoSource(TwoSourceParams::default()),
            CircuitKind::Lc => Self::Lc(LcParams::default()),
            CircuitKind::HfRectifier => Self::HfRectifier(RectifierParams::default()),
            CircuitKind::HfBoost => Self::HfBoost(BoostParams::default()),
        }
    }

    pub fn kind(&self) -> CircuitKind {
        match self {
            Self::IdealDiode(_) => CircuitKind::IdealDiode,
            Self::TwoSource(_) => CircuitKind::TwoSource,
            Self::Lc(_) => CircuitKind::Lc,
            Self::HfRectifier(_) => CircuitKind::HfRectifier,
            Self::HfBoost(_) => CircuitKind::HfBoost,
        }
    }

    fn set(&mut self, key: &str, v: f64) {
        match self {
            Self::IdealDiode(p) => match key {
                "L_s" => p.l_s = v,
                "R_s" => p.r_s = v,
                "C" => p.c = v,
                "R" => p.r = v,
                "V_i" => p.v_i = v,
                _ => unreachable!("checked against keys()"),
            },
            Self::TwoSource(p) => match key {
                "L1" => p.l1 = v,
                "L2" => p.l2 = v,
                "C" => p.c = v,
                "R" => p.r = v,
                "E_1" => p.e1 = v,
                "E_2" => p.e2 = v,
                _ => unreachable!("checked against keys()"),
            },
            Self::Lc(p) => match key {
                "L1" => p.l1 = v,
                "L2" => p.l2 = v,
                "C1" => p.c1 = v,
                "E" => p.e = v,
                _ => unreachable!("checked against keys()"),
            },
            Self::HfRectifier(p) => match key {
                "V_i" => p.source.amplitude = v,
                "f" => p.source.frequency = v,
                "R_s" => p.r_s = v,
                "L_s" => p.l_s = v,
                "R_d_on" => p.diode.r_d_on = v,
                "R_d_off" => p.diode.r_d_off = v,
                "C_d" => p.diode.c_d = v,
                "V_d_on" => p.diode.v_d_on = v,
                "C" => p.capacitor.c = v,
                "R_c" => p.capacitor.r_c = v,
                "L_c" => p.capacitor.l_c = v,
                "R_L" => p.r_l = v,
                _ => unreachable!("checked against keys()"),
            },
            Self::HfBoost(p) => match key {
                "V_i" => p.v_i = v,
                "L" => p.inductor.l = v,
                "R_L" => p.inductor.r_l = v,
                "C_L" => p.inductor.c_l = Some(v),
                "L_s" => p.mosfet.l_s = v,
                "C_s" => p.mosfet.c_s = v,
                "R_s_on" => p.mosfet.r_s_on = v,
                "R_s_off" => p.mosfet.r_s_off = v,
                "R_d_on" => p.diode.r_d_on = v,
                "R_d_off" => p.diode.r_d_off = v,
                "C_d" => p.diode.c_d = v,
                "V_d_on" => p.diode.v_d_on = v,
                "C" => p.capacitor.c = v,
                "R_c" => p.capacitor.r_c = v,
                "L_c" => p.capacitor.l_c = v,
                "R_o" => p.r_o = v,
                "d" => p.d = v,
                "f" => p.f_sw = v,
                _ => unreachable!("checked against keys()"),
            },
        }
    }

    pub fn pairs(&self) -> Vec<(String, f64)> {
        match self {
            Self::IdealDiode(p) => p.to_pairs(),
            Self::TwoSource(p) => vec![
                ("L1".into(), p.l1),
                ("L2".into(), p.l2),
                ("C".into(), p.c),
                ("R".into(), p.r),
                ("E_1".into(), p.e1),
                ("E_2".into(), p.e2),
            ],
            Self::Lc(p) => vec![
                ("L1".into(), p.l1),
                ("L2".into(), p.l2),
                ("C1".into(), p.c1),
                ("E".into(), p.e),
            ],
            Self::HfRectifier(p) => p.to_pairs(),
            Self::HfBoost(p) => p.to_pairs(),
        }
    }

    pub fn circuit(&self) -> Result<CircuitDescription, ParamError> {
        match self {
            Self::IdealDiode(p) => ideal_diode_circuit_with(p),
            Self::TwoSource(p) => two_source_circuit(p.l1, p.l2, p.c, p.r, p.e1, p.e2),
            Self::Lc(p) => lc_circuit(p.l1, p.l2, p.c1, p.e),
            Self::HfRectifier(p) => hf_rectifier(p),
            Self::HfBoost(p) => hf_boost(p),
        }
    }
}

/// Parameters together with where each value came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedParams {
    pub params: CircuitParams,
    /// Keys read from the file.
    pub given: Vec<String>,
    /// Keys left at their built-in defaults.
    pub defaulted: Vec<String>,
    /// Set when the boost load was fitted because the file had no `R_o`.
    pub calibration: Option<LoadCalibration>,
}

impl LoadedParams {
    pub fn kind(&self) -> CircuitKind {
        self.params.kind()
    }

    pub fn circuit(&self) -> Result<CircuitDescription, ConfigError> {
        Ok(self.params.circuit()?)
    }

    /// `(key, value, origin)` for every ambiguous key of the circuit.
    pub fn ambiguous(&self) -> Vec<(String, f64, &'static str)> {
        let pairs = self.params.pairs();
        self.kind()
            .ambiguous_keys()
            .iter()
            .filter_map(|k| {
                let v = pairs.iter().find(|(n, _)| n == k)?.1;
                let origin = if self.given.iter().any(|g| g == k) {
                    "file"
                } else if *k == "R_o" && self.calibration.is_some() {
                    "calibrated"
                } else {
                    "default"
                };
                Some((k.to_string(), v, origin))
            })
            .collect()
    }
}

/// Reads a parameter file (or the defaults when `text` is `None`). A boost
/// file without `R_o` gets the load fitted to the reported operating point.
pub fn load_params(kind: CircuitKind, text: Option<&str>) -> Result<LoadedParams, ConfigError> {
    let mut values = BTreeMap::new();
    if let Some(text) = text {
        let json: Value = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
        let obj = json.as_object().ok_or(ConfigError::NotAnObject)?;
        for (key, v) in obj {
            if !kind.keys().contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    circuit: kind,
                    key: key.clone(),
                    known: kind.keys().join(", "),
                });
            }
            let v = v.as_f64().ok_or_else(|| ConfigError::NotANumber(key.clone()))?;
            values.insert(key.clone(), v);
        }
    }
    let mut params = CircuitParams::defaults(kind);
    for (k, v) in &values {
        params.set(k, *v);
    }
    let given: Vec<String> = values.keys().cloned().collect();
    let defaulted = kind
        .keys()
        .iter()
        .filter(|k| !values.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    let mut calibration = None;
    if let CircuitParams::HfBoost(p) = &mut params {
        p.validate()?;
        if !values.contains_key("R_o") {
            let cal = calibrate_load(p, TARGET_OUTPUT_VOLTAGE, TARGET_INDUCTOR_CURRENT)?;
            p.r_o = cal.r_o;
            calibration = Some(cal);
        }
    }
    params.circuit()?;
    Ok(LoadedParams {
        params,
        given,
        defaulted,
        calibration,
    })
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Scheduler rule as written in a run configuration.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleConfig {
    Pwm {
        f_sw: f64,
        d: f64,
        master: String,
        slave: String,
    },
    Comparator {
        bit: String,
        monitored: String,
        threshold: f64,
        hysteresis: f64,
    },
    Fixed(String),
}

/// A simulation run: circuit, parameter file and solver settings. Absent
/// settings take per-circuit defaults.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: String,
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub integrator: Option<String>,
    #[serde(default)]
    pub x0: BTreeMap<String, f64>,
    #[serde(default)]
    pub event_tolerance: Option<f64>,
    #[serde(default)]
    pub decimation: Option<usize>,
    #[serde(default)]
    pub scheduler: Option<Vec<RuleConfig>>,
    /// Number of trailing periods summarized after the run.
    #[serde(default)]
    pub window_periods: Option<usize>,
    /// Column order of the states in the output.
    #[serde(default)]
    pub state_order: Option<Vec<String>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Default run of `circuit` with built-in parameters.
    pub fn for_circuit(circuit: &str) -> Self {
        Self {
            circuit: circuit.to_string(),
            params: None,
            t_end: None,
            h: None,
            integrator: None,
            x0: BTreeMap::new(),
            event_tolerance: None,
            decimation: None,
            scheduler: None,
            window_periods: None,
            state_order: None,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
    }

    /// Resolves the configuration; relative paths are taken from `base`.
    pub fn scenario(&self, base: &Path) -> Result<Scenario, ConfigError> {
        let kind: CircuitKind = self.circuit.parse()?;
        let text = match &self.params {
            Some(p) => Some(read_file(&base.join(p))?),
            None => None,
        };
        let params = load_params(kind, text.as_deref())?;
        let mut s = Scenario::defaults(params)?;
        if let Some(t) = self.t_end {
            s.config.t_end = t;
        }
        if let Some(h) = self.h {
            s.config.h = h;
            s.config.event_tolerance = h * 1e-3;
        }
        if let Some(i) = &self.integrator {
            s.config.integrator = i.parse::<Integrator>()?;
        }
        if let Some(tol) = self.event_tolerance {
            s.config.event_tolerance = tol;
        }
        if let Some(d) = self.decimation {
            s.config.decimation = d;
        }
        s.config.x0 = self.x0.iter().map(|(k, v)| (k.clone(), *v)).collect();
        if let Some(rules) = &self.scheduler {
            let rules = rules
                .iter()
                .map(|r| {
                    Ok(match r {
                        RuleConfig::Pwm { f_sw, d, master, slave } => SchedulerRule::PwmComplementary {
                            f_sw: *f_sw,
                            d: *d,
                            master: master.clone(),
                            slave: slave.clone(),
                        },
                        RuleConfig::Comparator {
                            bit,
                            monitored,
                            threshold,
                            hysteresis,
                        } => SchedulerRule::DiodeComparator {
                            bit: bit.clone(),
                            monitored: monitored.clone(),
                            threshold: *threshold,
                            hysteresis: *hysteresis,
                        },
                        RuleConfig::Fixed(m) => {
                            SchedulerRule::Fixed(m.parse::<ModeVector>().map_err(|e| ConfigError::Mode(e.to_string()))?)
                        }
                    })
                })
                .collect::<Result<Vec<_>, ConfigError>>()?;
            s.scheduler = ModeScheduler::new(rules)?;
        }
        if let Some(k) = self.window_periods {
            s.window.periods = k;
        }
        if let Some(order) = &self.state_order {
            s.state_order = Some(order.clone());
        }
        s.config.validate()?;
        Ok(s)
    }
}

/// Everything needed to simulate one circuit.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: LoadedParams,
    pub scheduler: ModeScheduler,
    pub inputs: Inputs,
    pub config: SimConfig,
    /// Trailing window summarized after the run.
    pub window: Window,
    /// State order for the simulated model; `None` keeps the derived order.
    pub state_order: Option<Vec<String>>,
}

/// Comparator hysteresis used for diode bits by default.
pub const DEFAULT_HYSTERESIS: f64 = 1e-3;
/// Steps per switching (or source) period by default.
pub const STEPS_PER_PERIOD: f64 = 20_000.0;

impl Scenario {
    /// Default scheduling, inputs and solver settings for a circuit.
    pub fn defaults(params: LoadedParams) -> Result<Self, ConfigError> {
        let (scheduler, inputs, config, window) = match params.params {
            CircuitParams::HfBoost(p) => {
                let period = p.period();
                (
                    ModeScheduler::pwm(p.f_sw, p.d, "u_m", "u_d")?,
                    Inputs::constant(&[("V_i", p.v_i), ("V_d_on", p.diode.v_d_on)]),
                    SimConfig::new(10e-3, period / STEPS_PER_PERIOD).with_decimation(20),
                    Window::new(period, 10),
                )
            }
            CircuitParams::HfRectifier(p) => {
                let period = p.source.period();
                (
                    ModeScheduler::comparator("u_d", "v_d", p.diode.v_d_on, DEFAULT_HYSTERESIS)?,
                    Inputs::new(vec![
                        ("V_i", InputSignal::Square(p.source)),
                        ("V_d_on", InputSignal::Constant(p.diode.v_d_on)),
                    ]),
                    SimConfig::new(20.0 * period, period / STEPS_PER_PERIOD).with_decimation(2),
                    Window::new(period, 1),
                )
            }
            CircuitParams::IdealDiode(p) => (
                ModeScheduler::fixed("u=1".parse().expect("literal")),
                Inputs::constant(&[("V_i", p.v_i)]),
                SimConfig::new(20e-3, 1e-6).with_decimation(10),
                Window::new(2e-3, 1),
            ),
            CircuitParams::TwoSource(p) => (
                ModeScheduler::fixed(ModeVector::empty()),
                Inputs::constant(&[("E_1", p.e1), ("E_2", p.e2)]),
                SimConfig::new(20e-3, 1e-6).with_decimation(10),
                Window::new(2e-3, 1),
            ),
            CircuitParams::Lc(p) => (
                ModeScheduler::fixed(ModeVector::empty()),
                Inputs::constant(&[("E", p.e)]),
                SimConfig::new(10e-3, 1e-6).with_decimation(10),
                Window::new(1e-3, 1),
            ),
        };
        let state_order = match params.params {
            CircuitParams::HfBoost(_) => Some(&BOOST_PRINTED_ORDER[..]),
            CircuitParams::HfRectifier(_) => Some(&RECTIFIER_PRINTED_ORDER[..]),
            _ => None,
        }
        .map(|o| o.iter().map(|l| l.to_string()).collect());
        Ok(Self {
            params,
            scheduler,
            inputs,
            config,
            window,
            state_order,
        })
    }

    /// Derives the switched model, in [`Scenario::state_order`] if set.
    pub fn model(&self) -> Result<SwitchedModel, ConfigError> {
        let model = build_switched_model(&self.params.circuit()?)?;
        Ok(match &self.state_order {
            Some(order) => model.reordered(&order.iter().map(String::as_str).collect::<Vec<_>>())?,
            None => model,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circuit_names_round_trip() {
        for k in CircuitKind::ALL {
            assert_eq!(k.name().parse::<CircuitKind>().unwrap(), k);
        }
        assert!(matches!(
            "buck".parse::<CircuitKind>(),
            Err(ConfigError::UnknownCircuit(_))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load_params(CircuitKind::HfRectifier, Some(r#"{"L_c": 1e-8, "C_d_on": 1e-8}"#)).unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { key, .. } if key == "C_d_on"));
        assert!(matches!(
            load_params(CircuitKind::Lc, Some(r#"{"L1": "big"}"#)),
            Err(ConfigError::NotANumber(_))
        ));
        assert!(matches!(
            load_params(CircuitKind::Lc, Some("[1]")),
            Err(ConfigError::NotAnObject)
        ));
    }

    #[test]
    fn provenance_of_ambiguous_keys() {
        let p = load_params(CircuitKind::HfRectifier, Some(r#"{"L_c": 1e-5}"#)).unwrap();
        assert_eq!(p.ambiguous(), vec![("L_c".to_string(), 1e-5, "file")]);
        assert!(p.defaulted.contains(&"C_d".to_string()));
        let p = load_params(CircuitKind::HfBoost, Some(r#"{"R_o": 20}"#)).unwrap();
        assert!(p.calibration.is_none());
        assert_eq!(
            p.ambiguous(),
            vec![("C_d".to_string(), 15e-9, "default"), ("R_o".to_string(), 20.0, "file")]
        );
    }

    #[test]
    fn invalid_values_surface_as_param_errors() {
        assert!(matches!(
            load_params(CircuitKind::HfBoost, Some(r#"{"d": 1.5, "R_o": 10}"#)),
            Err(ConfigError::Param(ParamError::Duty(_)))
        ));
    }

    #[test]
    fn run_config_overrides() {
        let cfg = RunConfig::from_json(
            r#"{"circuit": "lc", "t_end": 1e-3, "h": 1e-7, "integrator": "rk4", "x0": {"i_L1": 1.0},
                "scheduler": [{"fixed": "-"}]}"#,
        )
        .unwrap();
        let s = cfg.scenario(Path::new(".")).unwrap();
        assert_eq!(s.config.integrator, Integrator::Rk4);
        assert_eq!(s.config.x0, vec![("i_L1".to_string(), 1.0)]);
        assert!(RunConfig::from_json(r#"{"circuit": "lc", "tend": 1}"#).is_err());
        let zero = RunConfig::from_json(r#"{"circuit": "lc", "t_end": 0}"#).unwrap();
        assert!(matches!(
            zero.scenario(Path::new(".")),
            Err(ConfigError::Sim(SimError::Config(_)))
        ));
    }
}
