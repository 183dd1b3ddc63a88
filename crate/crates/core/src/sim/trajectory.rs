//! Recorded simulation output.

use std::io::{self, Write};

use crate::elcore::ModeVector;

/// A change of one switch bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub t: f64,
    /// Index into [`Trajectory::bit_names`].
    pub bit: usize,
    pub value: bool,
}

/// Time-ordered samples of state, mode and energy accounts.
///
/// The mode recorded at a sample is the one active during the step that ended
/// there (for the first sample, the one about to start).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub state_labels: Vec<String>,
    pub bit_names: Vec<String>,
    /// Distinct modes seen, indexed by the per-sample mode index.
    pub modes: Vec<ModeVector>,
    pub times: Vec<f64>,
    states: Vec<f64>,
    mode_index: Vec<usize>,
    pub stored: Vec<f64>,
    pub source: Vec<f64>,
    pub dissipated: Vec<f64>,
    pub events: Vec<SwitchEvent>,
}

impl Trajectory {
    pub fn new(state_labels: Vec<String>, bit_names: Vec<String>) -> Self {
        Self {
            state_labels,
            bit_names,
            ..Self::default()
        }
    }

    pub fn push(&mut self, t: f64, x: &[f64], mode: usize, stored: f64, source: f64, dissipated: f64) {
        debug_assert_eq!(x.len(), self.state_labels.len());
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.mode_index.push(mode);
        self.stored.push(stored);
        self.source.push(source);
        self.dissipated.push(dissipated);
    }

    /// Index of `mode` in [`Trajectory::modes`], adding it if new.
    pub fn intern_mode(&mut self, mode: &ModeVector) -> usize {
        match self.modes.iter().position(|m| m == mode) {
            Some(i) => i,
            None => {
                self.modes.push(mode.clone());
                self.modes.len() - 1
            }
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        let n = self.state_labels.len();
        &self.states[i * n..(i + 1) * n]
    }

    pub fn mode(&self, i: usize) -> &ModeVector {
        &self.modes[self.mode_index[i]]
    }

    pub fn mode_index(&self, i: usize) -> usize {
        self.mode_index[i]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.state_labels.iter().position(|l| l == label)
    }

    /// Time series of one state.
    pub fn column(&self, label: &str) -> Option<Vec<f64>> {
        let j = self.state_index(label)?;
        Some((0..self.len()).map(|i| self.state(i)[j]).collect())
    }

    pub fn last_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// `stored - stored(0) - source + dissipated` at sample `i`.
    pub fn balance_residual(&self, i: usize) -> f64 {
        self.stored[i] - self.stored[0] - self.source[i] + self.dissipated[i]
    }

    /// Writes `t,<states>,<bits>,E_stored,E_source,E_diss` rows with
    /// shortest round-trip number formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.state_labels.iter().cloned());
        header.extend(self.bit_names.iter().cloned());
        header.extend(["E_stored", "E_source", "E_diss"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::new();
        for i in 0..self.len() {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{}", self.times[i]);
            for v in self.state(i) {
                let _ = write!(line, ",{v}");
            }
            let mode = self.mode(i);
            for b in &self.bit_names {
                let _ = write!(line, ",{}", u8::from(mode.get(b).unwrap_or(false)));
            }
            let _ = write!(line, ",{},{},{}", self.stored[i], self.source[i], self.dissipated[i]);
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}
