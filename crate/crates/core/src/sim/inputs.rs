//! Exogenous input signals.

use crate::circuits::SquareWave;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InputSignal {
    Constant(f64),
    Square(SquareWave),
}

impl InputSignal {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Constant(v) => *v,
            Self::Square(s) => s.value(t),
        }
    }
}

/// Named input signals in model input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Inputs {
    names: Vec<String>,
    signals: Vec<InputSignal>,
}

impl Inputs {
    pub fn new(signals: Vec<(&str, InputSignal)>) -> Self {
        Self {
            names: signals.iter().map(|(n, _)| n.to_string()).collect(),
            signals: signals.into_iter().map(|(_, s)| s).collect(),
        }
    }

    pub fn constant(values: &[(&str, f64)]) -> Self {
        Self::new(values.iter().map(|(n, v)| (*n, InputSignal::Constant(*v))).collect())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn fill(&self, t: f64, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.signals) {
            *o = s.value(t);
        }
    }

    pub fn values(&self, t: f64) -> Vec<f64> {
        self.signals.iter().map(|s| s.value(t)).collect()
    }

    /// Discontinuities strictly inside `(t0, t1)`.
    pub fn edges_in(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        for s in &self.signals {
            if let InputSignal::Square(sq) = s {
                let half = sq.period() / 2.0;
                let mut k = (t0 / half).floor();
                loop {
                    let e = k * half;
                    if e >= t1 {
                        break;
                    }
                    if e > t0 {
                        out.push(e);
                    }
                    k += 1.0;
                }
            }
        }
    }
}
