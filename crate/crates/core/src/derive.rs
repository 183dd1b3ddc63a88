//! Per-mode Euler-Lagrange equations and their reduction to state-space or
//! descriptor form.
//!
//! For each mode the equation of motion is
//!
//! ```text
//! M q'' + R q' + P^T diag(1/C) P q = Bw w
//! ```
//!
//! Coordinates with a nonzero mass row are inertial and keep their current as
//! a state. The remaining rows are first-order (resistive) equations that are
//! solved for the non-inertial currents and substituted back. Capacitor
//! charges become voltage states `v_j = (P q)_j / C_j`. A non-inertial
//! coordinate that has no resistance, no capacitance and no source attached
//! in some mode carries no equation at all; it is kept as a state with a zero
//! row in `E` rather than inventing the missing relation.
//!
//! The reduction runs in exact rational arithmetic and rounds once at the end.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::circuits::IdealDiodeParams;
use crate::elcore::{Branches, CircuitDescription, ElError, ModeVector};
use crate::linalg::{Dense, Lu, Scalar};

type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeriveError {
    #[error(transparent)]
    Circuit(#[from] ElError),
    #[error("mode {mode}: resistive equations are singular at coordinate `{coordinate}`")]
    SingularResistance { mode: String, coordinate: String },
    #[error("mode {mode}: inductance matrix is singular at coordinate `{coordinate}`")]
    SingularInductance { mode: String, coordinate: String },
    #[error(
        "mode {mode}: coordinate `{coordinate}` has no inductance or resistance but is \
         coupled to a capacitor or source; no state equation exists for it"
    )]
    Unresolvable { mode: String, coordinate: String },
    #[error("mode {mode}: states [{found}] differ from [{expected}]")]
    InconsistentStates {
        mode: String,
        expected: String,
        found: String,
    },
    #[error("unknown state label `{0}`")]
    UnknownLabel(String),
    #[error("malformed model dump at line {line}: {reason}")]
    Dump { line: usize, reason: String },
}

/// `M q'' + R q' + S q = Bw w` for one mode, with `S = P^T diag(1/C) P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderForm {
    pub mode: ModeVector,
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub input_map: DMatrix<f64>,
    pub charge_map: DMatrix<f64>,
    pub elastance: DVector<f64>,
    /// Element data the mass and damping matrices were summed from.
    pub branches: Option<Branches>,
}

/// Collects the Euler-Lagrange matrices of one mode.
pub fn assemble(c: &CircuitDescription, mode: &ModeVector) -> Result<SecondOrderForm, DeriveError> {
    let comps = c.components(mode)?;
    Ok(SecondOrderForm {
        mode: mode.clone(),
        mass: comps.mass().clone(),
        damping: comps.dissipation_matrix().clone(),
        stiffness: comps.stiffness(),
        input_map: comps.input_map().clone(),
        charge_map: comps.charge_map().clone(),
        elastance: comps.elastance().clone(),
        branches: comps.branches().cloned(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub inertial: Vec<usize>,
    pub non_inertial: Vec<usize>,
}

/// Splits coordinates by whether their mass row is nonzero.
pub fn partition(f: &SecondOrderForm) -> Partition {
    let (inertial, non_inertial) = (0..f.mass.nrows()).partition(|&i| f.mass.row(i).iter().any(|v| *v != 0.0));
    Partition { inertial, non_inertial }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Regular,
    Descriptor,
}

/// Maps from a reduced state back to branch quantities, used for energy
/// accounting and for checking the reduction against the original equations.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMaps {
    /// `q' = current_from_state x + current_from_input w`
    pub current_from_state: DMatrix<f64>,
    pub current_from_input: DMatrix<f64>,
    /// Stored energy is `1/2 x^T storage x`.
    pub storage: DMatrix<f64>,
    /// Dissipation matrix `R` of the mode.
    pub damping: DMatrix<f64>,
    /// Input map `Bw` of the mode.
    pub input_map: DMatrix<f64>,
    /// Source power as a quadratic form in `z = (x, w)`, symmetrized.
    pub source_form: DMatrix<f64>,
    /// Dissipated power `q'^T R q'` as a quadratic form in `z = (x, w)`.
    pub dissipation_form: DMatrix<f64>,
}

impl EnergyMaps {
    pub fn currents(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.current_from_state * x + &self.current_from_input * w
    }

    pub fn stored_energy(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.storage * x))
    }

    /// Power delivered by the inputs, `q'^T Bw w`.
    pub fn source_power(&self, x: &DVector<f64>, w: &DVector<f64>) -> f64 {
        self.currents(x, w).dot(&(&self.input_map * w))
    }

    /// Power burnt in the resistors, `q'^T R q'` (twice the Rayleigh function).
    pub fn dissipated_power(&self, x: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let qd = self.currents(x, w);
        qd.dot(&(&self.damping * &qd))
    }

    fn permuted(&self, perm: &[usize]) -> Self {
        let k = perm.len();
        let z = self.source_form.nrows();
        let zperm: Vec<usize> = perm.iter().copied().chain(k..z).collect();
        let form = |m: &DMatrix<f64>| DMatrix::from_fn(z, z, |i, j| m[(zperm[i], zperm[j])]);
        Self {
            source_form: form(&self.source_form),
            dissipation_form: form(&self.dissipation_form),
            current_from_state: DMatrix::from_fn(self.current_from_state.nrows(), k, |i, j| {
                self.current_from_state[(i, perm[j])]
            }),
            current_from_input: self.current_from_input.clone(),
            storage: DMatrix::from_fn(k, k, |i, j| self.storage[(perm[i], perm[j])]),
            damping: self.damping.clone(),
            input_map: self.input_map.clone(),
        }
    }
}

/// `E x' = A x + B w` for one mode. `E` is absent for regular models.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub kind: ModelKind,
    pub e: Option<DMatrix<f64>>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub energy: Option<EnergyMaps>,
}

impl ReducedModel {
    /// Hand-specified regular model (no energy maps).
    pub fn regular(a: DMatrix<f64>, b: DMatrix<f64>, states: &[&str], inputs: &[&str]) -> Self {
        Self {
            kind: ModelKind::Regular,
            e: None,
            a,
            b,
            state_labels: states.iter().map(|s| s.to_string()).collect(),
            input_labels: inputs.iter().map(|s| s.to_string()).collect(),
            energy: None,
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    /// `E`, or the identity for regular models.
    pub fn e_or_identity(&self) -> DMatrix<f64> {
        self.e
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.n_states(), self.n_states()))
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| l == label)
    }

    /// Same model with states listed in `order` (a permutation of the labels).
    pub fn reordered(&self, order: &[&str]) -> Result<ReducedModel, DeriveError> {
        let perm: Vec<usize> = order
            .iter()
            .map(|l| {
                self.state_index(l)
                    .ok_or_else(|| DeriveError::UnknownLabel(l.to_string()))
            })
            .collect::<Result<_, _>>()?;
        if perm.len() != self.n_states() {
            return Err(DeriveError::InconsistentStates {
                mode: "-".into(),
                expected: self.state_labels.join(" "),
                found: order.join(" "),
            });
        }
        let k = perm.len();
        let sq = |m: &DMatrix<f64>| DMatrix::from_fn(k, k, |i, j| m[(perm[i], perm[j])]);
        Ok(ReducedModel {
            kind: self.kind,
            e: self.e.as_ref().map(sq),
            a: sq(&self.a),
            b: DMatrix::from_fn(k, self.b.ncols(), |i, j| self.b[(perm[i], j)]),
            state_labels: order.iter().map(|s| s.to_string()).collect(),
            input_labels: self.input_labels.clone(),
            energy: self.energy.as_ref().map(|e| e.permuted(&perm)),
        })
    }
}

fn coordinate_name(c: &CircuitDescription, i: usize) -> String {
    c.coords().get(i).name.clone()
}

/// `sum v c c^T` in exact arithmetic.
fn exact_sum(n: usize, terms: &[(f64, Vec<f64>)]) -> Dense<Q> {
    let mut m = Dense::<Q>::zeros(n, n);
    for (v, c) in terms {
        let v = Q::from_f64(*v);
        for i in (0..n).filter(|&i| c[i] != 0.0) {
            for j in (0..n).filter(|&j| c[j] != 0.0) {
                m[(i, j)] = m[(i, j)].clone() + v.clone() * Q::from_f64(c[i]) * Q::from_f64(c[j]);
            }
        }
    }
    m
}

/// Reduces one mode's second-order form to a first-order model.
///
/// States are the currents of the inertial coordinates (plus any coordinate
/// left without an equation, see the module docs) in coordinate order,
/// followed by the capacitor voltages in charge-map row order.
pub fn reduce(f: &SecondOrderForm, c: &CircuitDescription) -> Result<ReducedModel, DeriveError> {
    let n = f.mass.nrows();
    let n_caps = f.charge_map.nrows();
    let n_in = f.input_map.ncols();
    let mode = f.mode.to_string();

    let (mass, damping) = match &f.branches {
        Some(b) => (exact_sum(n, &b.inductors), exact_sum(n, &b.resistors)),
        None => (Dense::<Q>::from_dmatrix(&f.mass), Dense::<Q>::from_dmatrix(&f.damping)),
    };
    let charge = Dense::<Q>::from_dmatrix(&f.charge_map);
    let inputs = Dense::<Q>::from_dmatrix(&f.input_map);
    let elastance: Vec<Q> = f.elastance.iter().map(|&e| Q::from_f64(e)).collect();

    let part = partition(f);
    let (degenerate, solvable): (Vec<usize>, Vec<usize>) =
        part.non_inertial.iter().partition(|&&i| damping[(i, i)].is_zero());
    for &i in &degenerate {
        if !damping.row_is_zero(i) || !charge.col_is_zero(i) || !inputs.row_is_zero(i) {
            return Err(DeriveError::Unresolvable {
                mode,
                coordinate: coordinate_name(c, i),
            });
        }
    }

    let currents: Vec<usize> = (0..n)
        .filter(|i| part.inertial.contains(i) || degenerate.contains(i))
        .collect();
    let k = currents.len() + n_caps;
    let volt = |cap: usize| currents.len() + cap;

    // Non-inertial rows: R_NN q'_N = -R_N,cur q'_cur - P_N^T v + Bw_N w.
    let mut rhs_x = Dense::<Q>::zeros(solvable.len(), k);
    let mut rhs_w = Dense::<Q>::zeros(solvable.len(), n_in);
    for (a, &i) in solvable.iter().enumerate() {
        for (s, &j) in currents.iter().enumerate() {
            rhs_x[(a, s)] = -damping[(i, j)].clone();
        }
        for cap in 0..n_caps {
            rhs_x[(a, volt(cap))] = -charge[(cap, i)].clone();
        }
        for p in 0..n_in {
            rhs_w[(a, p)] = inputs[(i, p)].clone();
        }
    }
    let (solved_x, solved_w) = if solvable.is_empty() {
        (Dense::zeros(0, k), Dense::zeros(0, n_in))
    } else {
        let lu = Lu::new(&damping.select(&solvable, &solvable)).map_err(|s| DeriveError::SingularResistance {
            mode: mode.clone(),
            coordinate: coordinate_name(c, solvable[s.column]),
        })?;
        (lu.solve(&rhs_x), lu.solve(&rhs_w))
    };

    // q' = Cx x + Cw w over all coordinates.
    let mut cx = Dense::<Q>::zeros(n, k);
    let mut cw = Dense::<Q>::zeros(n, n_in);
    for (s, &i) in currents.iter().enumerate() {
        cx[(i, s)] = Q::from_f64(1.0);
    }
    for (a, &i) in solvable.iter().enumerate() {
        for s in 0..k {
            cx[(i, s)] = solved_x[(a, s)].clone();
        }
        for p in 0..n_in {
            cw[(i, p)] = solved_w[(a, p)].clone();
        }
    }

    // Inertial rows: M_II q''_I = -R_I. q' - P_I^T v + Bw_I w.
    let all: Vec<usize> = (0..n).collect();
    let inertial = &part.inertial;
    let r_i = damping.select(inertial, &all);
    let mut force_x = r_i.mul(&cx).neg();
    let force_w = inputs
        .select(inertial, &(0..n_in).collect::<Vec<_>>())
        .sub(&r_i.mul(&cw));
    for (a, &i) in inertial.iter().enumerate() {
        for cap in 0..n_caps {
            force_x[(a, volt(cap))] = force_x[(a, volt(cap))].clone() - charge[(cap, i)].clone();
        }
    }
    let (accel_x, accel_w) = if inertial.is_empty() {
        (Dense::zeros(0, k), Dense::zeros(0, n_in))
    } else {
        let lu = Lu::new(&mass.select(inertial, inertial)).map_err(|s| DeriveError::SingularInductance {
            mode: mode.clone(),
            coordinate: coordinate_name(c, inertial[s.column]),
        })?;
        (lu.solve(&force_x), lu.solve(&force_w))
    };

    // Voltage rows: v' = diag(1/C) P q'.
    let mut scaled_charge = charge.clone();
    for cap in 0..n_caps {
        for j in 0..n {
            scaled_charge[(cap, j)] = elastance[cap].clone() * charge[(cap, j)].clone();
        }
    }
    let volt_x = scaled_charge.mul(&cx);
    let volt_w = scaled_charge.mul(&cw);

    let mut a = Dense::<Q>::zeros(k, k);
    let mut b = Dense::<Q>::zeros(k, n_in);
    for (s, &i) in currents.iter().enumerate() {
        if let Some(row) = inertial.iter().position(|&x| x == i) {
            for j in 0..k {
                a[(s, j)] = accel_x[(row, j)].clone();
            }
            for p in 0..n_in {
                b[(s, p)] = accel_w[(row, p)].clone();
            }
        }
    }
    for cap in 0..n_caps {
        for j in 0..k {
            a[(volt(cap), j)] = volt_x[(cap, j)].clone();
        }
        for p in 0..n_in {
            b[(volt(cap), p)] = volt_w[(cap, p)].clone();
        }
    }

    let mut storage = Dense::<Q>::zeros(k, k);
    for (s, &i) in currents.iter().enumerate() {
        for (t, &j) in currents.iter().enumerate() {
            storage[(s, t)] = mass[(i, j)].clone();
        }
    }
    for cap in 0..n_caps {
        storage[(volt(cap), volt(cap))] = Q::from_f64(1.0) / elastance[cap].clone();
    }

    // Power forms over z = (x, w): q' = G z.
    let g = cx.hstack(&cw);
    let mut select_w = Dense::<Q>::zeros(n_in, k + n_in);
    for p in 0..n_in {
        select_w[(p, k + p)] = Q::from_f64(1.0);
    }
    let source_half = g.transpose().mul(&inputs).mul(&select_w);
    let half = Q::from_f64(0.5);
    let mut source_form = source_half.add(&source_half.transpose());
    for i in 0..k + n_in {
        for j in 0..k + n_in {
            source_form[(i, j)] = source_form[(i, j)].clone() * half.clone();
        }
    }
    let dissipation_form = g.transpose().mul(&damping).mul(&g);

    let (kind, e) = if degenerate.is_empty() {
        (ModelKind::Regular, None)
    } else {
        let mut e = DMatrix::identity(k, k);
        for (s, i) in currents.iter().enumerate() {
            if degenerate.contains(i) {
                e[(s, s)] = 0.0;
            }
        }
        (ModelKind::Descriptor, Some(e))
    };

    let mut state_labels: Vec<String> = currents.iter().map(|&i| c.coords().get(i).current.clone()).collect();
    state_labels.extend(c.capacitors().iter().cloned());

    Ok(ReducedModel {
        kind,
        e,
        a: a.to_dmatrix(),
        b: b.to_dmatrix(),
        state_labels,
        input_labels: c.input_names().to_vec(),
        energy: Some(EnergyMaps {
            current_from_state: cx.to_dmatrix(),
            current_from_input: cw.to_dmatrix(),
            storage: storage.to_dmatrix(),
            damping: f.damping.clone(),
            input_map: f.input_map.clone(),
            source_form: source_form.to_dmatrix(),
            dissipation_form: dissipation_form.to_dmatrix(),
        }),
    })
}

/// Reduced models for every mode of a circuit, sharing one state ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedModel {
    pub name: String,
    pub bit_names: Vec<String>,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub modes: BTreeMap<ModeVector, ReducedModel>,
}

impl SwitchedModel {
    /// Collects per-mode models, checking that they share states and inputs.
    pub fn from_modes(
        name: impl Into<String>,
        bit_names: Vec<String>,
        modes: BTreeMap<ModeVector, ReducedModel>,
    ) -> Result<Self, DeriveError> {
        let (state_labels, input_labels) = match modes.values().next() {
            Some(first) => (first.state_labels.clone(), first.input_labels.clone()),
            None => (Vec::new(), Vec::new()),
        };
        for (mode, m) in &modes {
            if m.state_labels != state_labels || m.input_labels != input_labels {
                return Err(DeriveError::InconsistentStates {
                    mode: mode.to_string(),
                    expected: state_labels.join(" "),
                    found: m.state_labels.join(" "),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            bit_names,
            state_labels,
            input_labels,
            modes,
        })
    }

    pub fn mode(&self, mode: &ModeVector) -> Option<&ReducedModel> {
        self.modes.get(mode)
    }

    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| l == label)
    }

    /// Same model with every mode's states listed in `order`.
    pub fn reordered(&self, order: &[&str]) -> Result<SwitchedModel, DeriveError> {
        let modes = self
            .modes
            .iter()
            .map(|(m, r)| Ok((m.clone(), r.reordered(order)?)))
            .collect::<Result<BTreeMap<_, _>, DeriveError>>()?;
        Self::from_modes(self.name.clone(), self.bit_names.clone(), modes)
    }
}

/// Derives the reduced model of every mode of `c`.
pub fn build_switched_model(c: &CircuitDescription) -> Result<SwitchedModel, DeriveError> {
    let mut modes = BTreeMap::new();
    for mode in c.mode_vectors() {
        let form = assemble(c, mode)?;
        modes.insert(mode.clone(), reduce(&form, c)?);
    }
    SwitchedModel::from_modes(c.name(), c.bit_names().to_vec(), modes)
}

/// The single-inductance diode circuit written with a mode-independent
/// magnetic energy. Correct while the diode conducts; at `u = 0` its first row
/// still predicts `L_s i' = -R_s i`, a relation the open circuit does not have.
pub fn erroneous_reference_model() -> SwitchedModel {
    erroneous_reference_model_with(&IdealDiodeParams::default())
}

pub fn erroneous_reference_model_with(p: &IdealDiodeParams) -> SwitchedModel {
    let mut modes = BTreeMap::new();
    for u in [0i64, 1] {
        let uf = u as f64;
        let a = DMatrix::from_row_slice(2, 2, &[-p.r_s / p.l_s, -uf / p.l_s, uf / p.c, -1.0 / (p.r * p.c)]);
        let b = DMatrix::from_row_slice(2, 1, &[uf / p.l_s, 0.0]);
        modes.insert(
            ModeVector::new([("u", u)]).expect("binary"),
            ReducedModel::regular(a, b, &["i_L", "v_C"], &["V_i"]),
        );
    }
    SwitchedModel::from_modes("ideal-diode-mode-independent", vec!["u".into()], modes).expect("fixture is consistent")
}

/// One mode block of a model dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpBlock {
    pub mode: ModeVector,
    pub kind: ModelKind,
    pub state_labels: Vec<String>,
    pub input_labels: Vec<String>,
    pub e: Option<DMatrix<f64>>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

fn write_matrix(out: &mut String, tag: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{tag} {} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Text dump of one mode: label headers then row-major matrices with 17
/// significant digits.
pub fn format_mode(mode: &ModeVector, m: &ReducedModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode {mode}");
    let _ = writeln!(
        out,
        "kind {}",
        match m.kind {
            ModelKind::Regular => "regular",
            ModelKind::Descriptor => "descriptor",
        }
    );
    let _ = writeln!(out, "states {}", m.state_labels.join(" "));
    let _ = writeln!(out, "inputs {}", m.input_labels.join(" "));
    if let Some(e) = &m.e {
        write_matrix(&mut out, "E", e);
    }
    write_matrix(&mut out, "A", &m.a);
    write_matrix(&mut out, "B", &m.b);
    out.push_str("end\n");
    out
}

pub fn format_model(model: &SwitchedModel) -> String {
    let mut out = format!("model {}\n", model.name);
    for (mode, m) in &model.modes {
        out.push_str(&format_mode(mode, m));
    }
    out
}

/// Parses the output of [`format_model`] / [`format_mode`].
pub fn parse_dump(text: &str) -> Result<Vec<DumpBlock>, DeriveError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let err = |line: usize, reason: &str| DeriveError::Dump {
        line,
        reason: reason.to_string(),
    };
    let mut blocks = Vec::new();
    let mut pos = 0;
    let header = |pos: usize, key: &str| -> Result<&str, DeriveError> {
        let (ln, l) = *lines.get(pos).ok_or_else(|| err(usize::MAX, "unexpected end"))?;
        l.strip_prefix(key)
            .map(str::trim)
            .ok_or_else(|| err(ln, &format!("expected `{key}`")))
    };
    let matrix = |pos: &mut usize, tag: &str| -> Result<DMatrix<f64>, DeriveError> {
        let dims = header(*pos, tag)?;
        let ln = lines[*pos].0;
        let dims: Vec<usize> = dims
            .split_whitespace()
            .map(|d| d.parse().map_err(|_| err(ln, "bad dimensions")))
            .collect::<Result<_, _>>()?;
        let [r, c] = dims[..] else {
            return Err(err(ln, "bad dimensions"));
        };
        *pos += 1;
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            let (ln, l) = *lines.get(*pos).ok_or_else(|| err(ln, "missing matrix row"))?;
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| err(ln, "bad number")))
                .collect::<Result<_, _>>()?;
            if row.len() != c {
                return Err(err(ln, "wrong row length"));
            }
            data.extend(row);
            *pos += 1;
        }
        Ok(DMatrix::from_row_slice(r, c, &data))
    };
    if let Some((_, l)) = lines.first() {
        if l.starts_with("model") {
            pos = 1;
        }
    }
    while pos < lines.len() {
        let mode: ModeVector = header(pos, "mode")?.parse()?;
        let kind = match header(pos + 1, "kind")? {
            "regular" => ModelKind::Regular,
            "descriptor" => ModelKind::Descriptor,
            _ => return Err(err(lines[pos + 1].0, "unknown kind")),
        };
        let labels = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let state_labels = labels(header(pos + 2, "states")?);
        let input_labels = labels(header(pos + 3, "inputs")?);
        pos += 4;
        let e = if kind == ModelKind::Descriptor {
            Some(matrix(&mut pos, "E")?)
        } else {
            None
        };
        let a = matrix(&mut pos, "A")?;
        let b = matrix(&mut pos, "B")?;
        header(pos, "end")?;
        pos += 1;
        blocks.push(DumpBlock {
            mode,
            kind,
            state_labels,
            input_labels,
            e,
            a,
            b,
        });
    }
    Ok(blocks)
}
