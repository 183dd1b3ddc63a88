//! Parameterized constructors for the example circuits and the high-frequency
//! element models they are built from.

use thiserror::Error;

use crate::elcore::{CircuitDescription, ComponentsBuilder, CoordinateSet, ElError, ModeVector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("parameter `{key}` = {value} must be finite and strictly positive")]
    NotPositive { key: &'static str, value: f64 },
    #[error("parameter `{off}` ({off_value}) must exceed `{on}` ({on_value})")]
    OffNotAboveOn {
        on: &'static str,
        off: &'static str,
        on_value: f64,
        off_value: f64,
    },
    #[error("duty ratio d = {0} must lie strictly between 0 and 1")]
    Duty(f64),
    #[error(transparent)]
    Circuit(#[from] ElError),
}

fn positive(key: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ParamError::NotPositive { key, value })
    }
}

fn on_off(on: (&'static str, f64), off: (&'static str, f64)) -> Result<(), ParamError> {
    positive(on.0, on.1)?;
    positive(off.0, off.1)?;
    if off.1 > on.1 {
        Ok(())
    } else {
        Err(ParamError::OffNotAboveOn {
            on: on.0,
            off: off.0,
            on_value: on.1,
            off_value: off.1,
        })
    }
}

/// Piecewise-linear diode: on/off resistance, junction capacitance and
/// forward drop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFDiodeParams {
    pub r_d_on: f64,
    pub r_d_off: f64,
    pub c_d: f64,
    pub v_d_on: f64,
}

impl HFDiodeParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        on_off(("R_d_on", self.r_d_on), ("R_d_off", self.r_d_off))?;
        positive("C_d", self.c_d)?;
        positive("V_d_on", self.v_d_on)
    }

    pub fn resistance(&self, conducting: bool) -> f64 {
        if conducting {
            self.r_d_on
        } else {
            self.r_d_off
        }
    }
}

/// MOSFET with switch resistance, stray inductance and output capacitance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFMosfetParams {
    pub r_s_on: f64,
    pub r_s_off: f64,
    pub l_s: f64,
    pub c_s: f64,
}

impl HFMosfetParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        on_off(("R_s_on", self.r_s_on), ("R_s_off", self.r_s_off))?;
        positive("L_s", self.l_s)?;
        positive("C_s", self.c_s)
    }

    pub fn resistance(&self, on: bool) -> f64 {
        if on {
            self.r_s_on
        } else {
            self.r_s_off
        }
    }
}

/// Inductor with winding resistance. The self-capacitance `c_l` is carried
/// for completeness but does not enter any of the circuits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFInductorParams {
    pub l: f64,
    pub r_l: f64,
    pub c_l: Option<f64>,
}

impl HFInductorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("L", self.l)?;
        positive("R_L", self.r_l)?;
        if let Some(c_l) = self.c_l {
            positive("C_L", c_l)?;
        }
        Ok(())
    }
}

/// Capacitor with ESR and ESL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HFCapacitorParams {
    pub c: f64,
    pub r_c: f64,
    pub l_c: f64,
}

impl HFCapacitorParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("C", self.c)?;
        positive("R_c", self.r_c)?;
        positive("L_c", self.l_c)
    }
}

/// Symmetric square wave: `+amplitude` for the first half of each period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareWave {
    pub amplitude: f64,
    pub frequency: f64,
}

impl SquareWave {
    pub fn value(&self, t: f64) -> f64 {
        if (t * self.frequency).rem_euclid(1.0) < 0.5 {
            self.amplitude
        } else {
            -self.amplitude
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// High-frequency diode rectifier. `r_l` is the load branch between the
/// source loop and the capacitor loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifierParams {
    pub source: SquareWave,
    pub r_s: f64,
    pub l_s: f64,
    pub diode: HFDiodeParams,
    pub capacitor: HFCapacitorParams,
    pub r_l: f64,
}

impl Default for RectifierParams {
    fn default() -> Self {
        Self {
            source: SquareWave {
                amplitude: 12.0,
                frequency: 1e3,
            },
            r_s: 0.01,
            l_s: 10e-6,
            diode: HFDiodeParams {
                r_d_on: 0.05,
                r_d_off: 10e3,
                c_d: 10e-9,
                v_d_on: 0.7,
            },
            capacitor: HFCapacitorParams {
                c: 1e-3,
                r_c: 1.0,
                l_c: 10e-9,
            },
            r_l: 10.0,
        }
    }
}

impl RectifierParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("V_i", self.source.amplitude)?;
        positive("f", self.source.frequency)?;
        positive("R_s", self.r_s)?;
        positive("L_s", self.l_s)?;
        positive("R_L", self.r_l)?;
        self.diode.validate()?;
        self.capacitor.validate()
    }

    pub fn to_pairs(&self) -> Vec<(String, f64)> {
        pairs(&[
            ("V_i", self.source.amplitude),
            ("f", self.source.frequency),
            ("R_s", self.r_s),
            ("L_s", self.l_s),
            ("R_d_on", self.diode.r_d_on),
            ("R_d_off", self.diode.r_d_off),
            ("C_d", self.diode.c_d),
            ("V_d_on", self.diode.v_d_on),
            ("C", self.capacitor.c),
            ("R_c", self.capacitor.r_c),
            ("L_c", self.capacitor.l_c),
            ("R_L", self.r_l),
        ])
    }
}

/// Reported steady-state mean output voltage of the boost at the default
/// parameters.
pub const TARGET_OUTPUT_VOLTAGE: f64 = 18.22;
/// Reported steady-state mean inductor current of the boost.
pub const TARGET_INDUCTOR_CURRENT: f64 = 2.13;

/// Load resistance that reproduces the reported boost operating point
/// with the default parameters; see `sim::calibrate_load`.
pub const CALIBRATED_R_O: f64 = 17.055_429_328_510_67;

/// High-frequency DC-DC boost converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub v_i: f64,
    pub inductor: HFInductorParams,
    pub mosfet: HFMosfetParams,
    pub diode: HFDiodeParams,
    pub capacitor: HFCapacitorParams,
    pub r_o: f64,
    pub d: f64,
    pub f_sw: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            v_i: 10.0,
            inductor: HFInductorParams {
                l: 1.6e-3,
                r_l: 0.1,
                c_l: None,
            },
            mosfet: HFMosfetParams {
                r_s_on: 0.2,
                r_s_off: 2e6,
                l_s: 20e-9,
                c_s: 200e-12,
            },
            diode: HFDiodeParams {
                r_d_on: 50e-3,
                r_d_off: 40e6,
                c_d: 15e-9,
                v_d_on: 0.7,
            },
            capacitor: HFCapacitorParams {
                c: 42e-6,
                r_c: 0.4,
                l_c: 100e-12,
            },
            r_o: CALIBRATED_R_O,
            d: 0.5,
            f_sw: 50e3,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("V_i", self.v_i)?;
        positive("R_o", self.r_o)?;
        positive("f", self.f_sw)?;
        if !(self.d > 0.0 && self.d < 1.0) {
            return Err(ParamError::Duty(self.d));
        }
        self.inductor.validate()?;
        self.mosfet.validate()?;
        self.diode.validate()?;
        self.capacitor.validate()
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f_sw
    }

    pub fn to_pairs(&self) -> Vec<(String, f64)> {
        let mut out = pairs(&[
            ("V_i", self.v_i),
            ("L", self.inductor.l),
            ("R_L", self.inductor.r_l),
            ("L_s", self.mosfet.l_s),
            ("C_s", self.mosfet.c_s),
            ("R_s_on", self.mosfet.r_s_on),
            ("R_s_off", self.mosfet.r_s_off),
            ("R_d_on", self.diode.r_d_on),
            ("R_d_off", self.diode.r_d_off),
            ("C_d", self.diode.c_d),
            ("V_d_on", self.diode.v_d_on),
            ("C", self.capacitor.c),
            ("R_c", self.capacitor.r_c),
            ("L_c", self.capacitor.l_c),
            ("R_o", self.r_o),
            ("d", self.d),
            ("f", self.f_sw),
        ]);
        if let Some(c_l) = self.inductor.c_l {
            out.push(("C_L".into(), c_l));
        }
        out
    }
}

/// Source, inductor with series resistance, diode switch and RC load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealDiodeParams {
    pub l_s: f64,
    pub r_s: f64,
    pub c: f64,
    pub r: f64,
    pub v_i: f64,
}

impl Default for IdealDiodeParams {
    fn default() -> Self {
        Self {
            l_s: 10e-6,
            r_s: 0.01,
            c: 1e-3,
            r: 10.0,
            v_i: 12.0,
        }
    }
}

impl IdealDiodeParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        positive("L_s", self.l_s)?;
        positive("R_s", self.r_s)?;
        positive("C", self.c)?;
        positive("R", self.r)?;
        positive("V_i", self.v_i)
    }

    pub fn to_pairs(&self) -> Vec<(String, f64)> {
        pairs(&[
            ("L_s", self.l_s),
            ("R_s", self.r_s),
            ("C", self.c),
            ("R", self.r),
            ("V_i", self.v_i),
        ])
    }
}

fn pairs(items: &[(&str, f64)]) -> Vec<(String, f64)> {
    items.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn mode(bits: &[(&str, i64)]) -> ModeVector {
    ModeVector::new(bits.iter().copied()).expect("binary literal")
}

pub fn ideal_diode_circuit() -> CircuitDescription {
    ideal_diode_circuit_with(&IdealDiodeParams::default()).expect("default parameters are valid")
}

/// Coordinates `(q_L, q_C)`. With the diode off the inductor carries no
/// energy and the source is disconnected.
pub fn ideal_diode_circuit_with(p: &IdealDiodeParams) -> Result<CircuitDescription, ParamError> {
    p.validate()?;
    let on = ComponentsBuilder::new(2, &["V_i"])
        .inductor(p.l_s, &[1.0, 0.0])
        .resistor(p.r_s, &[1.0, 0.0])
        .resistor(p.r, &[1.0, -1.0])
        .capacitor(p.c, &[0.0, 1.0])
        .source(0, &[1.0, 0.0])
        .build()?;
    let off = ComponentsBuilder::new(2, &["V_i"])
        .resistor(p.r, &[0.0, -1.0])
        .capacitor(p.c, &[0.0, 1.0])
        .build()?;
    Ok(CircuitDescription::new(
        "ideal-diode",
        CoordinateSet::new([("q_L", "i_L"), ("q_C", "i_C")])?,
        vec!["v_C".into()],
        vec![(mode(&[("u", 0)]), off), (mode(&[("u", 1)]), on)],
        p.to_pairs(),
    )?)
}

/// Parameters of [`two_source_circuit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSourceParams {
    pub l1: f64,
    pub l2: f64,
    pub c: f64,
    pub r: f64,
    pub e1: f64,
    pub e2: f64,
}

impl Default for TwoSourceParams {
    fn default() -> Self {
        Self {
            l1: 1e-3,
            l2: 2e-3,
            c: 10e-6,
            r: 10.0,
            e1: 5.0,
            e2: 2.0,
        }
    }
}

/// Parameters of [`lc_circuit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcParams {
    pub l1: f64,
    pub l2: f64,
    pub c1: f64,
    pub e: f64,
}

impl Default for LcParams {
    fn default() -> Self {
        Self {
            l1: 1e-3,
            l2: 1e-3,
            c1: 1e-6,
            e: 0.0,
        }
    }
}

/// Two inductors, a capacitor and a resistor driven by two sources, the
/// second of which carries the combination `q_C - q_L1 + q_L2`.
pub fn two_source_circuit(
    l1: f64,
    l2: f64,
    c: f64,
    r: f64,
    e1: f64,
    e2: f64,
) -> Result<CircuitDescription, ParamError> {
    for (k, v) in [("L1", l1), ("L2", l2), ("C", c), ("R", r)] {
        positive(k, v)?;
    }
    let comps = ComponentsBuilder::new(3, &["E_1", "E_2"])
        .inductor(l1, &[1.0, 0.0, 0.0])
        .inductor(l2, &[0.0, 1.0, 0.0])
        .capacitor(c, &[0.0, 0.0, 1.0])
        .resistor(r, &[1.0, 0.0, -1.0])
        .source(0, &[1.0, 0.0, 0.0])
        .source(1, &[-1.0, 1.0, 1.0])
        .build()?;
    Ok(CircuitDescription::new(
        "two-source",
        CoordinateSet::new([("q_L1", "i_L1"), ("q_L2", "i_L2"), ("q_C", "i_C")])?,
        vec!["v_C".into()],
        vec![(ModeVector::empty(), comps)],
        pairs(&[("L1", l1), ("L2", l2), ("C", c), ("R", r), ("E_1", e1), ("E_2", e2)]),
    )?)
}

/// Two inductors sharing one capacitor that holds `q_L1 - q_L2`.
pub fn lc_circuit(l1: f64, l2: f64, c1: f64, e: f64) -> Result<CircuitDescription, ParamError> {
    for (k, v) in [("L1", l1), ("L2", l2), ("C1", c1)] {
        positive(k, v)?;
    }
    let comps = ComponentsBuilder::new(2, &["E"])
        .inductor(l1, &[1.0, 0.0])
        .inductor(l2, &[0.0, 1.0])
        .capacitor(c1, &[1.0, -1.0])
        .source(0, &[1.0, 0.0])
        .build()?;
    Ok(CircuitDescription::new(
        "lc",
        CoordinateSet::new([("q_L1", "i_L1"), ("q_L2", "i_L2")])?,
        vec!["v_C1".into()],
        vec![(ModeVector::empty(), comps)],
        pairs(&[("L1", l1), ("L2", l2), ("C1", c1), ("E", e)]),
    )?)
}

/// Coordinates `(q_s, q_Lc, q_cd)`: source loop, capacitor loop, diode
/// junction capacitance. One bit `u_d`; inputs `(V_i, V_d_on)`.
pub fn hf_rectifier(p: &RectifierParams) -> Result<CircuitDescription, ParamError> {
    p.validate()?;
    let mut modes = Vec::new();
    for u in [0i64, 1] {
        let on = u == 1;
        let drop = if on { 1.0 } else { 0.0 };
        let comps = ComponentsBuilder::new(3, &["V_i", "V_d_on"])
            .inductor(p.l_s, &[1.0, 0.0, 0.0])
            .inductor(p.capacitor.l_c, &[0.0, 1.0, 0.0])
            .capacitor(p.diode.c_d, &[0.0, 0.0, 1.0])
            .capacitor(p.capacitor.c, &[0.0, 1.0, 0.0])
            .resistor(p.r_s, &[1.0, 0.0, 0.0])
            .resistor(p.capacitor.r_c, &[0.0, 1.0, 0.0])
            .resistor(p.diode.resistance(on), &[1.0, 0.0, -1.0])
            .resistor(p.r_l, &[1.0, -1.0, 0.0])
            .source(0, &[1.0, 0.0, 0.0])
            .source(1, &[-drop, 0.0, drop])
            .build()?;
        modes.push((mode(&[("u_d", u)]), comps));
    }
    Ok(CircuitDescription::new(
        "hf-rectifier",
        CoordinateSet::new([("q_s", "i"), ("q_Lc", "i_Lc"), ("q_cd", "i_cd")])?,
        vec!["v_d".into(), "v_c".into()],
        modes,
        p.to_pairs(),
    )?)
}

/// Coordinates `(q_1 .. q_5)`: input inductor, MOSFET stray inductance,
/// capacitor ESL loop, MOSFET capacitance, diode capacitance. Bits
/// `(u_m, u_d)` are complementary, so only two modes exist.
pub fn hf_boost(p: &BoostParams) -> Result<CircuitDescription, ParamError> {
    p.validate()?;
    let mut modes = Vec::new();
    for u_m in [1i64, 0] {
        let switch_on = u_m == 1;
        let diode_on = !switch_on;
        let drop = if diode_on { 1.0 } else { 0.0 };
        let comps = ComponentsBuilder::new(5, &["V_i", "V_d_on"])
            .inductor(p.inductor.l, &[1.0, 0.0, 0.0, 0.0, 0.0])
            .inductor(p.mosfet.l_s, &[0.0, 1.0, 0.0, 0.0, 0.0])
            .inductor(p.capacitor.l_c, &[0.0, 0.0, 1.0, 0.0, 0.0])
            .capacitor(p.capacitor.c, &[0.0, 0.0, 1.0, 0.0, 0.0])
            .capacitor(p.mosfet.c_s, &[0.0, 0.0, 0.0, 1.0, 0.0])
            .capacitor(p.diode.c_d, &[0.0, 0.0, 0.0, 0.0, 1.0])
            .resistor(p.inductor.r_l, &[1.0, 0.0, 0.0, 0.0, 0.0])
            .resistor(p.mosfet.resistance(switch_on), &[0.0, 1.0, 0.0, -1.0, 0.0])
            .resistor(p.capacitor.r_c, &[0.0, 0.0, 1.0, 0.0, 0.0])
            .resistor(p.diode.resistance(diode_on), &[1.0, -1.0, 0.0, 0.0, -1.0])
            .resistor(p.r_o, &[1.0, -1.0, -1.0, 0.0, 0.0])
            .source(0, &[1.0, 0.0, 0.0, 0.0, 0.0])
            .source(1, &[-drop, drop, 0.0, 0.0, drop])
            .build()?;
        modes.push((mode(&[("u_m", u_m), ("u_d", 1 - u_m)]), comps));
    }
    Ok(CircuitDescription::new(
        "hf-boost",
        CoordinateSet::new([
            ("q_1", "i"),
            ("q_2", "i_Ls"),
            ("q_3", "i_Lc"),
            ("q_4", "i_cs"),
            ("q_5", "i_cd"),
        ])?,
        vec!["v_c".into(), "v_cs".into(), "v_d".into()],
        modes,
        p.to_pairs(),
    )?)
}

/// Circuit names understood by front ends.
pub const CIRCUIT_NAMES: [&str; 5] = ["ideal-diode", "two-source", "lc", "hf-rectifier", "hf-boost"];

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn mv(s: &str) -> ModeVector {
        s.parse().unwrap()
    }

    #[test]
    fn rectifier_kinetic_energy() {
        let mut p = RectifierParams::default();
        p.capacitor.l_c = 10e-6;
        let c = hf_rectifier(&p).unwrap();
        let t = c
            .components(&mv("u_d=1"))
            .unwrap()
            .kinetic_energy(&DVector::from_vec(vec![1.0, 1.0, 0.0]))
            .unwrap();
        assert!((t - 1.0e-5).abs() < 1e-20);
    }

    #[test]
    fn rectifier_potential_energy_is_capacitor_only() {
        let c = hf_rectifier(&RectifierParams::default()).unwrap();
        let v = c
            .components(&mv("u_d=0"))
            .unwrap()
            .potential_energy(
                &DVector::from_vec(vec![0.0, 1e-3, 0.0]),
                &DVector::from_vec(vec![12.0, 0.7]),
            )
            .unwrap();
        assert!((v - 5e-4).abs() < 1e-18);
    }

    #[test]
    fn rectifier_diode_row_of_dissipation_gradient() {
        let p = RectifierParams::default();
        let c = hf_rectifier(&p).unwrap();
        let qd = DVector::from_vec(vec![0.3, -1.1, 2.0]);
        let g = c
            .components(&mv("u_d=1"))
            .unwrap()
            .energy_gradients(&DVector::zeros(3), &qd, &DVector::zeros(2))
            .unwrap();
        let rd = p.diode.r_d_on;
        let expected = (p.r_s + rd + p.r_l) * 0.3 - rd * 2.0 - p.r_l * (-1.1);
        assert!((g.dissipation[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn ideal_diode_modes() {
        let c = ideal_diode_circuit();
        let off = c.components(&mv("u=0")).unwrap();
        assert!(off.mass().iter().all(|v| *v == 0.0));
        let d = off.dissipation(&DVector::from_vec(vec![0.0, 1.0])).unwrap();
        assert_eq!(d, 5.0);
        let on = c.components(&mv("u=1")).unwrap();
        assert_eq!(on.elastance(), off.elastance());
        assert_eq!(on.charge_map(), off.charge_map());
    }

    #[test]
    fn two_source_input_rows() {
        let c = two_source_circuit(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let b = c.components(&ModeVector::empty()).unwrap().input_map().clone();
        assert_eq!(b.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, -1.0]);
        assert_eq!(b.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert!(two_source_circuit(1.0, 0.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lc_common_mode_stores_nothing() {
        let c = lc_circuit(1e-3, 1e-3, 1e-6, 0.0).unwrap();
        let comps = c.components(&ModeVector::empty()).unwrap();
        assert_eq!(comps.dissipation_matrix().norm(), 0.0);
        let q = DVector::from_vec(vec![0.37, 0.37]);
        assert_eq!(comps.potential_energy(&q, &DVector::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn boost_has_only_complementary_modes() {
        let c = hf_boost(&BoostParams::default()).unwrap();
        assert_eq!(c.mode_vectors().count(), 2);
        assert!(c.components(&mv("u_m=1,u_d=1")).is_err());
        assert!(c.components(&mv("u_m=0,u_d=0")).is_err());
        assert!(c.components(&mv("u_m=0,u_d=1")).is_ok());
    }

    #[test]
    fn parameter_validation() {
        let p = BoostParams {
            d: 1.0,
            ..Default::default()
        };
        assert_eq!(hf_boost(&p).unwrap_err(), ParamError::Duty(1.0));
        let mut p = RectifierParams::default();
        p.diode.r_d_off = 0.01;
        assert!(matches!(hf_rectifier(&p), Err(ParamError::OffNotAboveOn { .. })));
        let mut p = RectifierParams::default();
        p.capacitor.l_c = -1.0;
        assert!(matches!(
            hf_rectifier(&p),
            Err(ParamError::NotPositive { key: "L_c", .. })
        ));
    }

    #[test]
    fn square_wave_halves() {
        let s = SquareWave {
            amplitude: 12.0,
            frequency: 1e3,
        };
        assert_eq!(s.value(0.0), 12.0);
        assert_eq!(s.value(0.6e-3), -12.0);
        assert_eq!(s.value(1.2e-3), 12.0);
    }
}
