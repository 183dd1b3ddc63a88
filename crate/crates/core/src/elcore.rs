//! Generalized coordinates, switch modes and the quadratic energy data of the
//! loop (charge/current) Euler-Lagrange formulation.
//!
//! For one switch mode a circuit is described by
//!
//! ```text
//! T = 1/2 q'^T M q'                         magnetic co-energy
//! V = 1/2 (P q)^T diag(1/C) (P q) - q^T Bw w  field energy plus sources
//! D = 1/2 q'^T R q'                         Rayleigh dissipation
//! ```
//!
//! Sources, diode drops and any other forcing enter only through the input
//! map `Bw`. Capacitor charges are kept as rows of the charge map `P` so each
//! capacitor keeps its identity through the reduction to voltage states.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Relative tolerance for the symmetry and semidefiniteness checks.
const STRUCTURE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElError {
    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{0} matrix is not symmetric")]
    NotSymmetric(&'static str),
    #[error("{0} matrix is not positive semidefinite")]
    NotSemidefinite(&'static str),
    #[error("{0} contains a non-finite value")]
    NonFinite(&'static str),
    #[error("elastance of capacitor {index} must be strictly positive")]
    NonPositiveElastance { index: usize },
    #[error("switch bit `{name}` has value {value}; bits must be 0 or 1")]
    InvalidBit { name: String, value: i64 },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("mode `{found}` does not use the circuit's switch bits [{expected}]")]
    BitNamesDiffer { expected: String, found: String },
    #[error("{modes} modes declared for {bits} switch bits")]
    TooManyModes { modes: usize, bits: usize },
    #[error("mode `{0}` is not defined for this circuit")]
    UnknownMode(String),
    #[error("mode `{0}` declared twice")]
    DuplicateMode(String),
    #[error("input names differ between modes")]
    InputNamesDiffer,
    #[error("cannot parse mode vector `{0}` (expected e.g. `u_m=1,u_d=0`)")]
    ParseMode(String),
    #[error("circuit declares no modes")]
    NoModes,
}

/// Discrete switch configuration: an ordered list of named binary bits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ModeVector {
    bits: Vec<(String, bool)>,
}

impl ModeVector {
    /// Builds a mode from `(name, value)` pairs; values must be 0 or 1.
    pub fn new<S: Into<String>>(bits: impl IntoIterator<Item = (S, i64)>) -> Result<Self, ElError> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for (name, value) in bits {
            let name = name.into();
            let on = match value {
                0 => false,
                1 => true,
                _ => return Err(ElError::InvalidBit { name, value }),
            };
            if !seen.insert(name.clone()) {
                return Err(ElError::DuplicateName(name));
            }
            out.push((name, on));
        }
        Ok(Self { bits: out })
    }

    /// Mode with no switch bits (single-mode circuits).
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn bits(&self) -> &[(String, bool)] {
        &self.bits
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bits.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<bool> {
        self.bits.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    /// Bit value as 0.0 / 1.0, for use as a multiplier.
    pub fn level(&self, name: &str) -> Option<f64> {
        self.get(name).map(|on| if on { 1.0 } else { 0.0 })
    }

    /// Copy with `name` set to `value`. Unknown names are ignored.
    pub fn with(&self, name: &str, value: bool) -> Self {
        let mut out = self.clone();
        for (n, v) in &mut out.bits {
            if n == name {
                *v = value;
            }
        }
        out
    }

    fn same_names(&self, other: &ModeVector) -> bool {
        self.names().eq(other.names())
    }
}

impl fmt::Display for ModeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return f.write_str("-");
        }
        for (k, (name, on)) in self.bits.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}={}", name, u8::from(*on))?;
        }
        Ok(())
    }
}

impl FromStr for ModeVector {
    type Err = ElError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "-" {
            return Ok(Self::empty());
        }
        let mut bits = Vec::new();
        for part in s.split(',') {
            let (name, value) = part.split_once('=').ok_or_else(|| ElError::ParseMode(s.to_string()))?;
            let value: i64 = value.trim().parse().map_err(|_| ElError::ParseMode(s.to_string()))?;
            bits.push((name.trim().to_string(), value));
        }
        Self::new(bits)
    }
}

/// A generalized charge coordinate and the label of its current.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coordinate {
    pub name: String,
    pub current: String,
}

/// Ordered, uniquely named generalized coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinateSet {
    coords: Vec<Coordinate>,
}

impl CoordinateSet {
    /// `pairs` are `(charge name, current label)`.
    pub fn new<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, ElError> {
        let coords: Vec<Coordinate> = pairs
            .into_iter()
            .map(|(name, current)| Coordinate {
                name: name.to_string(),
                current: current.to_string(),
            })
            .collect();
        let mut seen = BTreeSet::new();
        for c in &coords {
            for label in [&c.name, &c.current] {
                if !seen.insert(label.clone()) {
                    return Err(ElError::DuplicateName(label.clone()));
                }
            }
        }
        Ok(Self { coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Coordinate> {
        self.coords.iter()
    }

    pub fn get(&self, i: usize) -> &Coordinate {
        &self.coords[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c.name == name)
    }
}

/// Gradients entering the Euler-Lagrange equation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// dT/dq' = M q'
    pub kinetic: DVector<f64>,
    /// dV/dq = P^T diag(1/C) P q - Bw w
    pub potential: DVector<f64>,
    /// dD/dq' = R q'
    pub dissipation: DVector<f64>,
}

/// Element values and branch combinations behind the mass and dissipation
/// matrices, kept so they can be re-summed without rounding.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Branches {
    pub inductors: Vec<(f64, Vec<f64>)>,
    pub resistors: Vec<(f64, Vec<f64>)>,
}

/// Per-mode quadratic energy and dissipation data.
#[derive(Debug, Clone, PartialEq)]
pub struct ELComponents {
    branches: Option<Branches>,
    mass: DMatrix<f64>,
    dissipation: DMatrix<f64>,
    charge_map: DMatrix<f64>,
    elastance: DVector<f64>,
    input_map: DMatrix<f64>,
    input_names: Vec<String>,
}

impl ELComponents {
    pub fn new(
        mass: DMatrix<f64>,
        dissipation: DMatrix<f64>,
        charge_map: DMatrix<f64>,
        elastance: DVector<f64>,
        input_map: DMatrix<f64>,
        input_names: Vec<String>,
    ) -> Result<Self, ElError> {
        let n = mass.nrows();
        check_square("mass", &mass, n)?;
        check_square("dissipation", &dissipation, n)?;
        expect_len("charge map columns", n, charge_map.ncols())?;
        expect_len("elastance", charge_map.nrows(), elastance.len())?;
        expect_len("input map rows", n, input_map.nrows())?;
        expect_len("input names", input_map.ncols(), input_names.len())?;
        for (what, m) in [
            ("mass", &mass),
            ("dissipation", &dissipation),
            ("charge map", &charge_map),
            ("input map", &input_map),
        ] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(ElError::NonFinite(what));
            }
        }
        check_symmetric_psd("mass", &mass)?;
        check_symmetric_psd("dissipation", &dissipation)?;
        for (index, e) in elastance.iter().enumerate() {
            if !(e.is_finite() && *e > 0.0) {
                return Err(ElError::NonPositiveElastance { index });
            }
        }
        let mut seen = BTreeSet::new();
        for name in &input_names {
            if !seen.insert(name) {
                return Err(ElError::DuplicateName(name.clone()));
            }
        }
        Ok(Self {
            branches: None,
            mass,
            dissipation,
            charge_map,
            elastance,
            input_map,
            input_names,
        })
    }

    /// Branch data when built with [`ComponentsBuilder`].
    pub fn branches(&self) -> Option<&Branches> {
        self.branches.as_ref()
    }

    /// Number of generalized coordinates.
    pub fn n_coords(&self) -> usize {
        self.mass.nrows()
    }

    pub fn n_capacitors(&self) -> usize {
        self.charge_map.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_map.ncols()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn dissipation_matrix(&self) -> &DMatrix<f64> {
        &self.dissipation
    }

    pub fn charge_map(&self) -> &DMatrix<f64> {
        &self.charge_map
    }

    pub fn elastance(&self) -> &DVector<f64> {
        &self.elastance
    }

    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    /// `P^T diag(1/C) P`
    pub fn stiffness(&self) -> DMatrix<f64> {
        self.charge_map.transpose() * DMatrix::from_diagonal(&self.elastance) * &self.charge_map
    }

    /// 1/2 q'^T M q'
    pub fn kinetic_energy(&self, qdot: &DVector<f64>) -> Result<f64, ElError> {
        expect_len("current vector", self.n_coords(), qdot.len())?;
        Ok(0.5 * qdot.dot(&(&self.mass * qdot)))
    }

    /// 1/2 (Pq)^T diag(1/C) (Pq) - q^T Bw w
    pub fn potential_energy(&self, q: &DVector<f64>, w: &DVector<f64>) -> Result<f64, ElError> {
        expect_len("charge vector", self.n_coords(), q.len())?;
        expect_len("input vector", self.n_inputs(), w.len())?;
        let p = &self.charge_map * q;
        let field: f64 = p
            .iter()
            .zip(self.elastance.iter())
            .map(|(pj, ej)| 0.5 * ej * pj * pj)
            .sum();
        Ok(field - q.dot(&(&self.input_map * w)))
    }

    /// Rayleigh function 1/2 q'^T R q'. The dissipated power is twice this.
    pub fn dissipation(&self, qdot: &DVector<f64>) -> Result<f64, ElError> {
        expect_len("current vector", self.n_coords(), qdot.len())?;
        Ok(0.5 * qdot.dot(&(&self.dissipation * qdot)))
    }

    pub fn energy_gradients(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
        w: &DVector<f64>,
    ) -> Result<Gradients, ElError> {
        expect_len("charge vector", self.n_coords(), q.len())?;
        expect_len("current vector", self.n_coords(), qdot.len())?;
        expect_len("input vector", self.n_inputs(), w.len())?;
        let p = &self.charge_map * q;
        let v = p.component_mul(&self.elastance);
        Ok(Gradients {
            kinetic: &self.mass * qdot,
            potential: self.charge_map.transpose() * v - &self.input_map * w,
            dissipation: &self.dissipation * qdot,
        })
    }

    /// Coordinates with neither inductance nor resistance attached.
    pub fn floating_coordinates(&self) -> Vec<usize> {
        (0..self.n_coords())
            .filter(|&i| {
                self.mass.row(i).iter().all(|v| *v == 0.0) && self.dissipation.row(i).iter().all(|v| *v == 0.0)
            })
            .collect()
    }
}

fn expect_len(what: &'static str, expected: usize, found: usize) -> Result<(), ElError> {
    if expected == found {
        Ok(())
    } else {
        Err(ElError::DimensionMismatch { what, expected, found })
    }
}

fn check_square(what: &'static str, m: &DMatrix<f64>, n: usize) -> Result<(), ElError> {
    expect_len(what, n, m.nrows())?;
    expect_len(what, n, m.ncols())
}

fn check_symmetric_psd(what: &'static str, m: &DMatrix<f64>) -> Result<(), ElError> {
    let scale = m.amax();
    if scale == 0.0 {
        return Ok(());
    }
    if (m - m.transpose()).amax() > STRUCTURE_TOLERANCE * scale {
        return Err(ElError::NotSymmetric(what));
    }
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.min() < -STRUCTURE_TOLERANCE * scale * m.nrows() as f64 {
        return Err(ElError::NotSemidefinite(what));
    }
    Ok(())
}

/// Assembles [`ELComponents`] branch by branch, writing every branch current
/// or charge as a linear combination of the generalized coordinates.
#[derive(Debug, Clone)]
pub struct ComponentsBuilder {
    n: usize,
    branches: Branches,
    mass: DMatrix<f64>,
    dissipation: DMatrix<f64>,
    charges: Vec<Vec<f64>>,
    elastance: Vec<f64>,
    input_map: DMatrix<f64>,
    input_names: Vec<String>,
    error: Option<ElError>,
}

impl ComponentsBuilder {
    pub fn new(n_coords: usize, input_names: &[&str]) -> Self {
        Self {
            n: n_coords,
            branches: Branches::default(),
            mass: DMatrix::zeros(n_coords, n_coords),
            dissipation: DMatrix::zeros(n_coords, n_coords),
            charges: Vec::new(),
            elastance: Vec::new(),
            input_map: DMatrix::zeros(n_coords, input_names.len()),
            input_names: input_names.iter().map(|s| s.to_string()).collect(),
            error: None,
        }
    }

    fn combination(&mut self, what: &'static str, c: &[f64]) -> Option<DVector<f64>> {
        if c.len() != self.n {
            self.error.get_or_insert(ElError::DimensionMismatch {
                what,
                expected: self.n,
                found: c.len(),
            });
            return None;
        }
        Some(DVector::from_column_slice(c))
    }

    /// Inductance `l` carrying current `current . q'`.
    pub fn inductor(mut self, l: f64, current: &[f64]) -> Self {
        if let Some(c) = self.combination("inductor current", current) {
            self.mass += &c * c.transpose() * l;
            self.branches.inductors.push((l, current.to_vec()));
        }
        self
    }

    /// Resistance `r` carrying current `current . q'`.
    pub fn resistor(mut self, r: f64, current: &[f64]) -> Self {
        if let Some(c) = self.combination("resistor current", current) {
            self.dissipation += &c * c.transpose() * r;
            self.branches.resistors.push((r, current.to_vec()));
        }
        self
    }

    /// Capacitance `c` holding charge `charge . q`.
    pub fn capacitor(mut self, c: f64, charge: &[f64]) -> Self {
        if self.combination("capacitor charge", charge).is_some() {
            self.charges.push(charge.to_vec());
            self.elastance.push(1.0 / c);
        }
        self
    }

    /// Input `input` acting as a voltage source that drives `current . q'`
    /// (contributes `-w (current . q)` to the potential). Use a negative
    /// combination for a drop such as a diode forward voltage.
    pub fn source(mut self, input: usize, current: &[f64]) -> Self {
        if input >= self.input_map.ncols() {
            self.error.get_or_insert(ElError::DimensionMismatch {
                what: "input index",
                expected: self.input_map.ncols(),
                found: input,
            });
            return self;
        }
        if let Some(c) = self.combination("source current", current) {
            let mut col = self.input_map.column_mut(input);
            col += c;
        }
        self
    }

    pub fn build(self) -> Result<ELComponents, ElError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let m = self.charges.len();
        let charge_map = DMatrix::from_fn(m, self.n, |i, j| self.charges[i][j]);
        let mut comps = ELComponents::new(
            self.mass,
            self.dissipation,
            charge_map,
            DVector::from_vec(self.elastance),
            self.input_map,
            self.input_names,
        )?;
        comps.branches = Some(self.branches);
        Ok(comps)
    }
}

/// A circuit: coordinates, capacitor voltage labels and one set of
/// [`ELComponents`] per reachable mode.
#[derive(Debug, Clone)]
pub struct CircuitDescription {
    name: String,
    coords: CoordinateSet,
    capacitors: Vec<String>,
    bit_names: Vec<String>,
    modes: BTreeMap<ModeVector, ELComponents>,
    parameters: Vec<(String, f64)>,
}

impl CircuitDescription {
    /// `capacitors` labels the voltage of each charge-map row, in row order.
    pub fn new(
        name: impl Into<String>,
        coords: CoordinateSet,
        capacitors: Vec<String>,
        modes: Vec<(ModeVector, ELComponents)>,
        parameters: Vec<(String, f64)>,
    ) -> Result<Self, ElError> {
        let (first_mode, first_comps) = modes.first().ok_or(ElError::NoModes)?;
        let first_mode = first_mode.clone();
        let bit_names: Vec<String> = first_mode.names().map(str::to_string).collect();
        let input_names = first_comps.input_names().to_vec();
        let mut labels: BTreeSet<&str> = coords
            .iter()
            .flat_map(|c| [c.name.as_str(), c.current.as_str()])
            .collect();
        for cap in &capacitors {
            if !labels.insert(cap) {
                return Err(ElError::DuplicateName(cap.clone()));
            }
        }
        let mut map = BTreeMap::new();
        for (mode, comps) in modes {
            if !mode.same_names(&first_mode) {
                return Err(ElError::BitNamesDiffer {
                    expected: bit_names.join(","),
                    found: mode.to_string(),
                });
            }
            expect_len("mode coordinates", coords.len(), comps.n_coords())?;
            expect_len("mode capacitors", capacitors.len(), comps.n_capacitors())?;
            if comps.input_names() != input_names.as_slice() {
                return Err(ElError::InputNamesDiffer);
            }
            let key = mode.to_string();
            if map.insert(mode, comps).is_some() {
                return Err(ElError::DuplicateMode(key));
            }
        }
        if bit_names.len() < usize::BITS as usize && map.len() > 1usize << bit_names.len() {
            return Err(ElError::TooManyModes {
                modes: map.len(),
                bits: bit_names.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            coords,
            capacitors,
            bit_names,
            modes: map,
            parameters,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn coords(&self) -> &CoordinateSet {
        &self.coords
    }

    /// Voltage labels of the capacitors, in charge-map row order.
    pub fn capacitors(&self) -> &[String] {
        &self.capacitors
    }

    pub fn bit_names(&self) -> &[String] {
        &self.bit_names
    }

    pub fn input_names(&self) -> &[String] {
        self.modes.values().next().map(|c| c.input_names()).unwrap_or(&[])
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeVector, &ELComponents)> {
        self.modes.iter()
    }

    pub fn mode_vectors(&self) -> impl Iterator<Item = &ModeVector> {
        self.modes.keys()
    }

    pub fn components(&self, mode: &ModeVector) -> Result<&ELComponents, ElError> {
        self.modes
            .get(mode)
            .ok_or_else(|| ElError::UnknownMode(mode.to_string()))
    }

    /// Parameter record the circuit was built from (SI units).
    pub fn parameters(&self) -> &[(String, f64)] {
        &self.parameters
    }

    pub fn parameter(&self, key: &str) -> Option<f64> {
        self.parameters.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}
