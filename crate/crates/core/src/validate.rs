//! Fixture suite comparing engine output with the published models and
//! reported simulation results.
//!
//! Each check is independent; the two long high-fidelity runs are shared
//! between checks and computed at most once.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::circuits::{
    hf_boost, hf_rectifier, ideal_diode_circuit_with, lc_circuit, two_source_circuit, BoostParams, IdealDiodeParams,
    LcParams, RectifierParams, TwoSourceParams, TARGET_INDUCTOR_CURRENT, TARGET_OUTPUT_VOLTAGE,
};
use crate::config::{load_params, CircuitKind, CircuitParams, ConfigError, LoadedParams, Scenario};
use crate::derive::{
    assemble, build_switched_model, erroneous_reference_model_with, ModelKind, ReducedModel, SwitchedModel,
};
use crate::elcore::{CircuitDescription, ModeVector};
use crate::linalg::{exact_discretization, max_relative_deviation};
use crate::reference::{
    boost_printed, ideal_diode_descriptor, rectifier_misprints, rectifier_printed, BOOST_PRINTED_ORDER,
    RECTIFIER_PRINTED_ORDER,
};
use crate::sim::{
    conditional_mean, simulate, steady_state_metrics, step, Inputs, Integrator, ModeScheduler, SimConfig, Trajectory,
    Window,
};

/// Relative tolerance for matrix entries computed in floating point.
pub const MATRIX_TOLERANCE: f64 = 1e-12;
pub const CONSERVATION_TOLERANCE: f64 = 1e-6;
pub const STEADY_STATE_TOLERANCE: f64 = 0.05;
pub const BALANCE_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_TOLERANCE: f64 = 1e-6;
pub const ORDER_RATIO: f64 = 12.0;
pub const AGREEMENT_TOLERANCE: f64 = 1e-6;

/// Result of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    /// One-line measurement summary.
    pub summary: String,
    /// Further findings worth reporting whether or not the check passed.
    pub notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, summary: impl Into<String>) -> Self {
        Self {
            passed,
            summary: summary.into(),
            notes: Vec::new(),
        }
    }

    fn with_notes(mut self, notes: Vec<String>) -> Self {
        self.notes = notes;
        self
    }
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub outcome: Outcome,
    pub elapsed: Duration,
}

pub struct Check {
    pub name: &'static str,
    pub description: &'static str,
    run: fn(&Suite) -> Result<Outcome, String>,
}

impl fmt::Debug for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Check").field("name", &self.name).finish()
    }
}

pub const CHECKS: [Check; 10] = [
    Check {
        name: "boost-matrices",
        description: "derived boost A, B match the printed matrices in both modes",
        run: check_boost_matrices,
    },
    Check {
        name: "rectifier-matrices",
        description: "derived rectifier A, B match the printed matrices apart from two misprints",
        run: check_rectifier_matrices,
    },
    Check {
        name: "ideal-diode-descriptor",
        description: "ideal diode: descriptor model at u=0, textbook model at u=1",
        run: check_ideal_diode,
    },
    Check {
        name: "lc-conservation",
        description: "lossless LC stored energy over 1e5 RK4 steps",
        run: check_lc_conservation,
    },
    Check {
        name: "boost-steady-state",
        description: "boost mean output voltage and inductor current",
        run: check_boost_steady_state,
    },
    Check {
        name: "boost-diode-voltage",
        description: "boost diode voltage means with the MOSFET on and off",
        run: check_boost_diode_voltage,
    },
    Check {
        name: "rectifier-waveform",
        description: "rectifier diode ringing after turn-off and capacitor voltage buildup",
        run: check_rectifier_waveform,
    },
    Check {
        name: "energy-balance",
        description: "stored, supplied and dissipated energy balance in the H-F runs",
        run: check_energy_balance,
    },
    Check {
        name: "energy-gradients",
        description: "energy gradients against central finite differences",
        run: check_gradients,
    },
    Check {
        name: "integrator-order",
        description: "RK4 convergence order and trapezoidal/exponential agreement",
        run: check_integrator_order,
    },
];

/// Inputs of the suite: engine-side parameters (possibly overridden) and the
/// default parameters at which the printed fixtures are evaluated.
#[derive(Debug)]
pub struct Suite {
    boost: BoostParams,
    boost_reference: BoostParams,
    rectifier: RectifierParams,
    rectifier_reference: RectifierParams,
    ideal: IdealDiodeParams,
    ideal_reference: IdealDiodeParams,
    lc: LcParams,
    two_source: TwoSourceParams,
    boost_run: OnceLock<Result<(Trajectory, Duration), String>>,
    rectifier_run: OnceLock<Result<Trajectory, String>>,
}

impl Suite {
    /// Suite at default parameters, with the boost load calibrated.
    pub fn new() -> Result<Self, ConfigError> {
        Self::with_overrides(None)
    }

    /// `overrides` is a JSON object keyed by circuit name whose values are
    /// parameter objects, e.g. `{"hf-boost": {"R_d_on": 0.5}}`. Overrides
    /// change the engine side only; fixtures stay at the defaults.
    pub fn with_overrides(overrides: Option<&str>) -> Result<Self, ConfigError> {
        let mut per_circuit: BTreeMap<CircuitKind, String> = BTreeMap::new();
        if let Some(text) = overrides {
            let json: Value = serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
            let obj = json.as_object().ok_or(ConfigError::NotAnObject)?;
            for (name, body) in obj {
                let kind: CircuitKind = name.parse()?;
                per_circuit.insert(kind, body.to_string());
            }
        }
        let load = |kind: CircuitKind| load_params(kind, per_circuit.get(&kind).map(String::as_str));
        let reference = |kind: CircuitKind| load_params(kind, None);
        let (CircuitParams::HfBoost(boost), CircuitParams::HfBoost(boost_reference)) = (
            load(CircuitKind::HfBoost)?.params,
            reference(CircuitKind::HfBoost)?.params,
        ) else {
            unreachable!()
        };
        let (CircuitParams::HfRectifier(rectifier), CircuitParams::HfRectifier(rectifier_reference)) = (
            load(CircuitKind::HfRectifier)?.params,
            reference(CircuitKind::HfRectifier)?.params,
        ) else {
            unreachable!()
        };
        let (CircuitParams::IdealDiode(ideal), CircuitParams::IdealDiode(ideal_reference)) = (
            load(CircuitKind::IdealDiode)?.params,
            reference(CircuitKind::IdealDiode)?.params,
        ) else {
            unreachable!()
        };
        let CircuitParams::Lc(lc) = load(CircuitKind::Lc)?.params else {
            unreachable!()
        };
        let CircuitParams::TwoSource(two_source) = load(CircuitKind::TwoSource)?.params else {
            unreachable!()
        };
        Ok(Self {
            boost,
            boost_reference,
            rectifier,
            rectifier_reference,
            ideal,
            ideal_reference,
            lc,
            two_source,
            boost_run: OnceLock::new(),
            rectifier_run: OnceLock::new(),
        })
    }

    pub fn boost_params(&self) -> &BoostParams {
        &self.boost
    }

    /// Runs the named checks (all when `names` is empty) in parallel, in
    /// table order.
    pub fn run(&self, names: &[&str]) -> Result<Vec<CheckReport>, String> {
        for n in names {
            if !CHECKS.iter().any(|c| c.name == *n) {
                return Err(format!("unknown check `{n}`"));
            }
        }
        let selected: Vec<&Check> = CHECKS
            .iter()
            .filter(|c| names.is_empty() || names.contains(&c.name))
            .collect();
        Ok(std::thread::scope(|s| {
            let handles: Vec<_> = selected
                .iter()
                .map(|c| {
                    s.spawn(move || {
                        let start = Instant::now();
                        let outcome = (c.run)(self).unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")));
                        CheckReport {
                            name: c.name,
                            outcome,
                            elapsed: start.elapsed(),
                        }
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("check thread panicked"))
                .collect()
        }))
    }

    fn boost_run(&self) -> Result<&(Trajectory, Duration), String> {
        self.boost_run
            .get_or_init(|| {
                let s = scenario(CircuitParams::HfBoost(self.boost))?;
                let start = Instant::now();
                let model = s.model().map_err(err)?;
                let tr = simulate(&model, &s.scheduler, &s.inputs, &s.config).map_err(err)?;
                Ok((tr, start.elapsed()))
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn rectifier_run(&self) -> Result<&Trajectory, String> {
        self.rectifier_run
            .get_or_init(|| {
                let s = scenario(CircuitParams::HfRectifier(self.rectifier))?;
                let model = s.model().map_err(err)?;
                simulate(&model, &s.scheduler, &s.inputs, &s.config).map_err(err)
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

fn err(e: impl fmt::Display) -> String {
    e.to_string()
}

fn scenario(params: CircuitParams) -> Result<Scenario, String> {
    let loaded = LoadedParams {
        params,
        given: Vec::new(),
        defaulted: Vec::new(),
        calibration: None,
    };
    Scenario::defaults(loaded).map_err(err)
}

fn mode(s: &str) -> ModeVector {
    s.parse().expect("literal mode")
}

fn derived_mode<'m>(model: &'m SwitchedModel, m: &ModeVector) -> Result<&'m ReducedModel, String> {
    model.mode(m).ok_or_else(|| format!("mode {m} was not derived"))
}

/// Worst relative deviation between two matrices, with the entry named by
/// row and column labels.
struct Deviation {
    value: f64,
    entry: String,
}

fn compare(what: &str, derived: &DMatrix<f64>, expected: &DMatrix<f64>, rows: &[String], cols: &[String]) -> Deviation {
    let (value, at) = max_relative_deviation(derived, expected);
    let entry = match at {
        Some((i, j)) => format!(
            "{what}[{i}][{j}] ({}, {}): derived {:e}, expected {:e}",
            rows[i],
            cols[j],
            derived[(i, j)],
            expected[(i, j)]
        ),
        None => format!("{what}: exact"),
    };
    Deviation { value, entry }
}

fn worst(devs: impl IntoIterator<Item = Deviation>) -> Deviation {
    devs.into_iter().fold(
        Deviation {
            value: 0.0,
            entry: "all entries exact".into(),
        },
        |a, b| {
            if b.value > a.value || b.value.is_nan() {
                b
            } else {
                a
            }
        },
    )
}

fn check_boost_matrices(s: &Suite) -> Result<Outcome, String> {
    let start = Instant::now();
    let model = build_switched_model(&hf_boost(&s.boost).map_err(err)?).map_err(err)?;
    let labels: Vec<String> = BOOST_PRINTED_ORDER.iter().map(|l| l.to_string()).collect();
    let mut devs = Vec::new();
    for u_d in [false, true] {
        let m = mode(&format!("u_m={},u_d={}", u8::from(!u_d), u8::from(u_d)));
        let derived = derived_mode(&model, &m)?.reordered(&BOOST_PRINTED_ORDER).map_err(err)?;
        let (a, b) = boost_printed(&s.boost_reference, u_d);
        devs.push(compare(&format!("A({m})"), &derived.a, &a, &labels, &labels));
        devs.push(compare(
            &format!("B({m})"),
            &derived.b,
            &b,
            &labels,
            &derived.input_labels,
        ));
    }
    let elapsed = start.elapsed();
    let w = worst(devs);
    let fast = elapsed < Duration::from_secs(1);
    Ok(Outcome::new(
        w.value <= MATRIX_TOLERANCE && fast,
        format!(
            "max relative deviation {:.3e} (limit {MATRIX_TOLERANCE:e}) at {}; derived in {:.0} ms",
            w.value,
            w.entry,
            elapsed.as_secs_f64() * 1e3
        ),
    ))
}

fn check_rectifier_matrices(s: &Suite) -> Result<Outcome, String> {
    let circuit = hf_rectifier(&s.rectifier).map_err(err)?;
    let model = build_switched_model(&circuit).map_err(err)?;
    let labels: Vec<String> = RECTIFIER_PRINTED_ORDER.iter().map(|l| l.to_string()).collect();
    let misprints = rectifier_misprints(&s.rectifier_reference);
    let mut devs = Vec::new();
    for u in [false, true] {
        let m = mode(&format!("u_d={}", u8::from(u)));
        let derived = derived_mode(&model, &m)?
            .reordered(&RECTIFIER_PRINTED_ORDER)
            .map_err(err)?;
        let (mut a, b) = rectifier_printed(&s.rectifier_reference, u);
        a[(0, 2)] = misprints[0].derived;
        devs.push(compare(&format!("A({m})"), &derived.a, &a, &labels, &labels));
        devs.push(compare(
            &format!("B({m})"),
            &derived.b,
            &b,
            &labels,
            &derived.input_labels,
        ));
    }
    // Capacitor-loop elastance per unit inductance in the second-order form.
    let form = assemble(&circuit, &mode("u_d=0")).map_err(err)?;
    let k = circuit.coords().index_of("q_Lc").ok_or("no q_Lc coordinate")?;
    let elastance = -form.stiffness[(k, k)] / form.mass[(k, k)];
    let e = misprints[1].derived;
    let elastance_dev = ((elastance - e) / e).abs();
    devs.push(Deviation {
        value: elastance_dev,
        entry: format!("q_Lc'' elastance: derived {elastance:e}, expected {e:e}"),
    });
    let w = worst(devs);
    let notes = misprints
        .iter()
        .map(|m| {
            format!(
                "printed model misprint at {}: printed {} = {:e}, derivation gives {} = {:e}",
                m.location, m.printed_symbol, m.printed, m.derived_symbol, m.derived
            )
        })
        .collect();
    Ok(Outcome::new(
        w.value <= MATRIX_TOLERANCE,
        format!(
            "max relative deviation {:.3e} (limit {MATRIX_TOLERANCE:e}) at {}; {} misprints flagged",
            w.value,
            w.entry,
            misprints.len()
        ),
    )
    .with_notes(notes))
}

fn check_ideal_diode(s: &Suite) -> Result<Outcome, String> {
    let model = build_switched_model(&ideal_diode_circuit_with(&s.ideal).map_err(err)?).map_err(err)?;
    let textbook = erroneous_reference_model_with(&s.ideal_reference);
    let order = ["i_L", "v_C"];
    let labels: Vec<String> = order.iter().map(|l| l.to_string()).collect();
    let inputs = vec!["V_i".to_string()];
    let mut devs = Vec::new();
    let mut kinds = Vec::new();
    for u in [false, true] {
        let m = mode(&format!("u={}", u8::from(u)));
        let derived = derived_mode(&model, &m)?.reordered(&order).map_err(err)?;
        kinds.push(derived.kind);
        let (e, a, b) = ideal_diode_descriptor(&s.ideal_reference, u);
        devs.push(compare(
            &format!("E({m})"),
            &derived.e_or_identity(),
            &e,
            &labels,
            &labels,
        ));
        devs.push(compare(&format!("A({m})"), &derived.a, &a, &labels, &labels));
        devs.push(compare(&format!("B({m})"), &derived.b, &b, &labels, &inputs));
    }
    let on = mode("u=1");
    let off = mode("u=0");
    let derived_on = derived_mode(&model, &on)?.reordered(&order).map_err(err)?;
    let text_on = derived_mode(&textbook, &on)?;
    devs.push(compare(
        "A(u=1) vs textbook",
        &derived_on.a,
        &text_on.a,
        &labels,
        &labels,
    ));
    devs.push(compare(
        "B(u=1) vs textbook",
        &derived_on.b,
        &text_on.b,
        &labels,
        &inputs,
    ));
    let w = worst(devs);

    let derived_off = derived_mode(&model, &off)?.reordered(&order).map_err(err)?;
    let text_off = derived_mode(&textbook, &off)?;
    let mut diff = Vec::new();
    let e = derived_off.e_or_identity();
    for i in 0..2 {
        if e[(i, i)] != 1.0 {
            diff.push(format!("u=0: E[{i}][{i}] = {} but the textbook model has 1", e[(i, i)]));
        }
        for j in 0..2 {
            let (d, t) = (derived_off.a[(i, j)], text_off.a[(i, j)]);
            if d != t {
                diff.push(format!("u=0: A[{i}][{j}] derived {d:e}, textbook {t:e}"));
            }
        }
    }
    let descriptor = kinds == [ModelKind::Descriptor, ModelKind::Regular];
    Ok(Outcome::new(
        w.value <= MATRIX_TOLERANCE && descriptor && !diff.is_empty(),
        format!(
            "u=0 {:?}, u=1 {:?}; max relative deviation {:.3e} at {}; {} entries differ from the textbook model at u=0",
            kinds[0],
            kinds[1],
            w.value,
            w.entry,
            diff.len()
        ),
    )
    .with_notes(diff))
}

fn check_lc_conservation(s: &Suite) -> Result<Outcome, String> {
    let p = LcParams { e: 0.0, ..s.lc };
    let model = build_switched_model(&lc_circuit(p.l1, p.l2, p.c1, p.e).map_err(err)?).map_err(err)?;
    let cfg = SimConfig::new(0.1, 1e-6)
        .with_integrator(Integrator::Rk4)
        .with_x0(&[("i_L1", 1.0)]);
    let inputs = Inputs::constant(&[("E", 0.0)]);
    let start = Instant::now();
    let tr = simulate(&model, &ModeScheduler::fixed(ModeVector::empty()), &inputs, &cfg).map_err(err)?;
    let elapsed = start.elapsed();
    let e0 = tr.stored[0];
    let drift = tr.stored.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max);
    let fast = elapsed < Duration::from_secs(5);
    Ok(Outcome::new(
        drift <= CONSERVATION_TOLERANCE && fast,
        format!(
            "max relative energy drift {drift:.3e} (limit {CONSERVATION_TOLERANCE:e}) over {} steps in {:.2} s",
            cfg.n_steps(),
            elapsed.as_secs_f64()
        ),
    ))
}

fn check_boost_steady_state(s: &Suite) -> Result<Outcome, String> {
    let (tr, elapsed) = s.boost_run()?;
    let m = steady_state_metrics(tr, Window::new(s.boost.period(), 10)).map_err(err)?;
    let v = m.mean("v_c").ok_or("no v_c")?;
    let i = m.mean("i").ok_or("no i")?;
    let ideal = s.boost.v_i / (1.0 - s.boost.d);
    let ev = (v - TARGET_OUTPUT_VOLTAGE).abs() / TARGET_OUTPUT_VOLTAGE;
    let ei = (i - TARGET_INDUCTOR_CURRENT).abs() / TARGET_INDUCTOR_CURRENT;
    let fast = *elapsed < Duration::from_secs(60);
    Ok(Outcome::new(
        ev <= STEADY_STATE_TOLERANCE && ei <= STEADY_STATE_TOLERANCE && v < ideal && fast,
        format!(
            "R_o = {:.6} ohm: mean v_c {v:.4} V ({:+.2}%), mean i {i:.4} A ({:+.2}%), ideal {ideal} V; run {:.1} s",
            s.boost.r_o,
            100.0 * (v / TARGET_OUTPUT_VOLTAGE - 1.0),
            100.0 * (i / TARGET_INDUCTOR_CURRENT - 1.0),
            elapsed.as_secs_f64()
        ),
    ))
}

fn check_boost_diode_voltage(s: &Suite) -> Result<Outcome, String> {
    let (tr, _) = s.boost_run()?;
    let w = Window::new(s.boost.period(), 10);
    let v_c = steady_state_metrics(tr, w).map_err(err)?.mean("v_c").ok_or("no v_c")?;
    let on = conditional_mean(tr, w, "v_d", "u_m", true).map_err(err)?;
    let off = conditional_mean(tr, w, "v_d", "u_m", false).map_err(err)?;
    let on_ok = on >= -1.1 * v_c && on <= -0.9 * v_c;
    let off_ok = (off - 0.7).abs() <= 0.1;
    Ok(Outcome::new(
        on_ok && off_ok,
        format!(
            "mean v_d with MOSFET on {on:.4} V (want [{:.3}, {:.3}]: {}), off {off:.4} V (want 0.7 +- 0.1: {})",
            -1.1 * v_c,
            -0.9 * v_c,
            if on_ok { "ok" } else { "out of range" },
            if off_ok { "ok" } else { "out of range" }
        ),
    ))
}

/// Properties of the rectifier waveform after each diode turn-off.
#[derive(Debug, Clone, PartialEq)]
pub struct RingingReport {
    /// Off intervals examined.
    pub intervals: usize,
    /// Intervals that ring down from their first extremum.
    pub decaying: usize,
    /// Description of the first interval that failed, if any.
    pub first_failure: Option<String>,
}

/// Examines `v_d` after each `u_d` 1 -> 0 event, up to the next turn-on or
/// the next multiple of `input_edge` (when the source steps), whichever
/// comes first.
///
/// The interval passes when the first local extremum is both the extremum
/// farthest from the settling value (mean over the last tenth) and the
/// global extreme of the interval on its side, and the
/// swings between successive extrema shrink monotonically until they fall
/// below 1% of the first swing.
pub fn rectifier_ringing(tr: &Trajectory, input_edge: f64) -> Result<RingingReport, String> {
    let j = tr.state_index("v_d").ok_or("no v_d")?;
    let bit = tr.bit_names.iter().position(|b| b == "u_d").ok_or("no u_d bit")?;
    let mut report = RingingReport {
        intervals: 0,
        decaying: 0,
        first_failure: None,
    };
    for (n, off) in tr.events.iter().enumerate().filter(|(_, e)| e.bit == bit && !e.value) {
        let t_off = off.t;
        let t_on = tr.events[n + 1..]
            .iter()
            .find(|e| e.bit == bit && e.value)
            .map_or(tr.last_time(), |e| e.t);
        let edge = ((t_off / input_edge).floor() + 1.0) * input_edge;
        let end = t_on.min(edge);
        let v: Vec<f64> = (0..tr.len())
            .filter(|&i| tr.times[i] > t_off && tr.times[i] < end)
            .map(|i| tr.state(i)[j])
            .collect();
        if v.len() < 20 {
            continue;
        }
        report.intervals += 1;
        let tail = &v[v.len() - v.len() / 10..];
        let settle = tail.iter().sum::<f64>() / tail.len() as f64;
        let extrema: Vec<usize> = (1..v.len() - 1)
            .filter(|&k| (v[k] - v[k - 1]) * (v[k + 1] - v[k]) < 0.0)
            .collect();
        let swings: Vec<f64> = extrema.windows(2).map(|p| (v[p[1]] - v[p[0]]).abs()).collect();
        let peak = extrema
            .iter()
            .copied()
            .max_by(|&a, &b| (v[a] - settle).abs().total_cmp(&(v[b] - settle).abs()));
        let beyond_first = extrema.first().is_some_and(|&k| {
            let d = (v[k] - settle).signum();
            v.iter().any(|x| (x - v[k]) * d > 0.0)
        });
        let failure = if swings.len() < 2 {
            Some(format!("{} extrema, no oscillation", extrema.len()))
        } else if peak != Some(extrema[0]) || beyond_first {
            Some("largest deviation is not at the first extremum".to_string())
        } else {
            let ringing: Vec<f64> = swings.iter().copied().take_while(|s| *s >= 0.01 * swings[0]).collect();
            if ringing.len() == swings.len() && swings.last().copied().unwrap_or(0.0) >= 0.5 * swings[0] {
                Some("oscillation does not decay".to_string())
            } else {
                ringing.windows(2).position(|p| p[1] > p[0]).map(|k| {
                    format!(
                        "swing {} grows from {:e} V to {:e} V",
                        k + 1,
                        ringing[k],
                        ringing[k + 1]
                    )
                })
            }
        };
        match failure {
            None => report.decaying += 1,
            Some(f) => {
                if report.first_failure.is_none() {
                    report.first_failure = Some(format!("turn-off at t = {t_off:e} s: {f}"));
                }
            }
        }
    }
    Ok(report)
}

/// Mean of `label` over each complete period `[kT, (k+1)T)`.
pub fn period_means(tr: &Trajectory, label: &str, period: f64) -> Result<Vec<f64>, String> {
    let j = tr.state_index(label).ok_or_else(|| format!("no {label}"))?;
    let n = (tr.last_time() / period + 1e-9).floor() as usize;
    let mut sums = vec![(0.0, 0usize); n];
    for i in 0..tr.len() {
        let k = (tr.times[i] / period).floor() as usize;
        if k < n {
            sums[k].0 += tr.state(i)[j];
            sums[k].1 += 1;
        }
    }
    Ok(sums.into_iter().map(|(s, c)| s / c.max(1) as f64).collect())
}

/// Index of the first period whose mean falls below its predecessor before
/// the sequence has come within `band` (relative) of its final value.
pub fn first_buildup_violation(means: &[f64], band: f64) -> Option<usize> {
    let last = *means.last()?;
    for k in 1..means.len() {
        if (means[k - 1] - last).abs() <= band * last.abs() {
            return None;
        }
        if means[k] < means[k - 1] {
            return Some(k);
        }
    }
    None
}

fn check_rectifier_waveform(s: &Suite) -> Result<Outcome, String> {
    let tr = s.rectifier_run()?;
    let ringing = rectifier_ringing(tr, s.rectifier.source.period() / 2.0)?;
    let means = period_means(tr, "v_c", s.rectifier.source.period())?;
    let violation = first_buildup_violation(&means, 0.02);
    let ringing_ok = ringing.intervals > 0 && ringing.decaying == ringing.intervals;
    let mut notes = Vec::new();
    if let Some(f) = &ringing.first_failure {
        notes.push(f.clone());
    }
    if let Some(k) = violation {
        notes.push(format!(
            "v_c period mean drops from {:.4} V to {:.4} V in period {k}",
            means[k - 1],
            means[k]
        ));
    }
    Ok(Outcome::new(
        ringing_ok && violation.is_none(),
        format!(
            "(a) {}/{} turn-offs ring down from their first extremum; (b) v_c period means {:.3} V -> {:.3} V, {}",
            ringing.decaying,
            ringing.intervals,
            means.first().copied().unwrap_or(f64::NAN),
            means.last().copied().unwrap_or(f64::NAN),
            if violation.is_none() {
                "non-decreasing until settled"
            } else {
                "decrease before settling"
            }
        ),
    )
    .with_notes(notes))
}

/// Largest `|balance residual|` relative to the peak stored energy.
pub fn balance_error(tr: &Trajectory) -> f64 {
    let peak = tr.stored.iter().copied().fold(0.0, f64::max);
    let worst = (0..tr.len()).map(|i| tr.balance_residual(i).abs()).fold(0.0, f64::max);
    worst / peak
}

fn check_energy_balance(s: &Suite) -> Result<Outcome, String> {
    let (boost, _) = s.boost_run()?;
    let rect = s.rectifier_run()?;
    let (eb, er) = (balance_error(boost), balance_error(rect));
    Ok(Outcome::new(
        eb <= BALANCE_TOLERANCE && er <= BALANCE_TOLERANCE,
        format!("max residual / peak stored energy: boost {eb:.3e}, rectifier {er:.3e} (limit {BALANCE_TOLERANCE:e})"),
    ))
}

/// Norm-wise relative error of `energy_gradients` against central
/// differences with relative step `1e-6`, worst over `points` random
/// points per mode.
pub fn gradient_error(c: &CircuitDescription, points: usize, seed: u64) -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = c.coords().len();
    let mut worst = 0.0f64;
    for (_, comps) in c.modes() {
        let nw = comps.n_inputs();
        for _ in 0..points {
            let mut vec = |len: usize, scale: f64| DVector::from_fn(len, |_, _| scale * rng.gen_range(-1.0..1.0));
            let q = vec(n, 1e-3);
            let qd = vec(n, 10.0);
            let w = vec(nw, 10.0);
            let g = comps.energy_gradients(&q, &qd, &w).map_err(err)?;
            let fd = |f: &dyn Fn(&DVector<f64>) -> f64, x: &DVector<f64>| {
                DVector::from_fn(n, |i, _| {
                    let h = 1e-6 * x[i].abs().max(f64::MIN_POSITIVE.sqrt());
                    let (mut up, mut dn) = (x.clone(), x.clone());
                    up[i] += h;
                    dn[i] -= h;
                    (f(&up) - f(&dn)) / (up[i] - dn[i])
                })
            };
            let t = fd(&|x| comps.kinetic_energy(x).unwrap(), &qd);
            let v = fd(&|x| comps.potential_energy(x, &w).unwrap(), &q);
            let d = fd(&|x| comps.dissipation(x).unwrap(), &qd);
            for (exact, approx) in [(&g.kinetic, t), (&g.potential, v), (&g.dissipation, d)] {
                let scale = exact.norm();
                let e = (exact - approx).norm();
                worst = worst.max(if scale == 0.0 { e } else { e / scale });
            }
        }
    }
    Ok(worst)
}

fn check_gradients(s: &Suite) -> Result<Outcome, String> {
    let ts = s.two_source;
    let circuits = [
        ideal_diode_circuit_with(&s.ideal).map_err(err)?,
        two_source_circuit(ts.l1, ts.l2, ts.c, ts.r, ts.e1, ts.e2).map_err(err)?,
        lc_circuit(s.lc.l1, s.lc.l2, s.lc.c1, s.lc.e).map_err(err)?,
        hf_rectifier(&s.rectifier).map_err(err)?,
        hf_boost(&s.boost).map_err(err)?,
    ];
    let mut parts = Vec::new();
    let mut max = 0.0f64;
    for (k, c) in circuits.iter().enumerate() {
        let e = gradient_error(c, 100, 0x5eed + k as u64)?;
        max = max.max(e);
        parts.push(format!("{} {e:.1e}", c.name()));
    }
    Ok(Outcome::new(
        max <= GRADIENT_TOLERANCE,
        format!(
            "max relative error {max:.3e} (limit {GRADIENT_TOLERANCE:e}): {}",
            parts.join(", ")
        ),
    ))
}

/// Largest state error of a fixed-mode run with constant input against the
/// exact solution on the same grid, relative to the largest exact state
/// norm. The run starts from rest.
fn trajectory_error(
    m: &ReducedModel,
    w: &DVector<f64>,
    integrator: Integrator,
    t_end: f64,
    h: f64,
) -> Result<f64, String> {
    let n = (t_end / h).round() as usize;
    let (phi, gamma) = exact_discretization(&m.a, &m.b, h);
    let drive = &gamma * w;
    let mut exact = DVector::zeros(m.n_states());
    let mut x = exact.clone();
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for k in 0..n {
        exact = &phi * &exact + &drive;
        x = step(m, &x, &|_| w.clone(), k as f64 * h, h, integrator).map_err(err)?;
        worst = worst.max((&x - &exact).norm());
        scale = scale.max(exact.norm());
    }
    Ok(worst / scale)
}

/// Relative trajectory errors of RK4 at `h` and `h/2`, and of the
/// trapezoidal rule at `h_trap`, on the rectifier's `u_d = 0` model with
/// constant inputs over `t_end`.
pub fn integrator_errors(p: &RectifierParams, t_end: f64, h: f64, h_trap: f64) -> Result<(f64, f64, f64), String> {
    let model = build_switched_model(&hf_rectifier(p).map_err(err)?).map_err(err)?;
    let m = derived_mode(&model, &mode("u_d=0"))?;
    let w = DVector::from_vec(vec![p.source.amplitude, p.diode.v_d_on]);
    Ok((
        trajectory_error(m, &w, Integrator::Rk4, t_end, h)?,
        trajectory_error(m, &w, Integrator::Rk4, t_end, h / 2.0)?,
        trajectory_error(m, &w, Integrator::Trapezoidal, t_end, h_trap)?,
    ))
}

fn check_integrator_order(s: &Suite) -> Result<Outcome, String> {
    let (coarse, fine, trap) = integrator_errors(&s.rectifier, 10e-6, 1e-9, 1e-10)?;
    let ratio = coarse / fine;
    Ok(Outcome::new(
        ratio >= ORDER_RATIO && trap <= AGREEMENT_TOLERANCE,
        format!(
            "RK4 error {coarse:.3e} at h = 1 ns, {fine:.3e} at 0.5 ns, ratio {ratio:.2} (min {ORDER_RATIO}); \
             trapezoidal at 0.1 ns vs exact {trap:.3e} (limit {AGREEMENT_TOLERANCE:e})"
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buildup_violation_detection() {
        assert_eq!(first_buildup_violation(&[1.0, 2.0, 3.0, 3.0], 0.02), None);
        assert_eq!(first_buildup_violation(&[1.0, 2.0, 1.5, 3.0], 0.02), Some(2));
        assert_eq!(first_buildup_violation(&[1.0, 2.99, 2.98, 3.0], 0.02), None);
    }

    #[test]
    fn unknown_check_is_rejected() {
        let s = Suite::with_overrides(Some(r#"{"hf-boost": {"R_o": 17}}"#)).unwrap();
        assert!(s.run(&["nope"]).is_err());
    }

    #[test]
    fn override_reaches_engine_side_only() {
        let s = Suite::with_overrides(Some(r#"{"hf-boost": {"R_o": 17.0, "R_d_on": 0.5}}"#)).unwrap();
        assert_eq!(s.boost.diode.r_d_on, 0.5);
        assert_eq!(s.boost_reference.diode.r_d_on, BoostParams::default().diode.r_d_on);
        assert!(Suite::with_overrides(Some(r#"{"buck": {}}"#)).is_err());
    }
}
