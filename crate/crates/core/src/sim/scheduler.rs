//! Mode selection: PWM clocks, comparator-driven diodes and fixed bits.

use std::collections::BTreeMap;

use crate::derive::SwitchedModel;
use crate::elcore::ModeVector;

use super::SimError;

/// One rule governing one or two switch bits.
#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerRule {
    /// `master` is on for the first `d` of every period `1/f_sw`; `slave`
    /// is its complement.
    PwmComplementary {
        f_sw: f64,
        d: f64,
        master: String,
        slave: String,
    },
    /// `bit` turns on when `monitored >= threshold + hysteresis/2`, off when
    /// `monitored < threshold - hysteresis/2` and holds in between.
    DiodeComparator {
        bit: String,
        monitored: String,
        threshold: f64,
        hysteresis: f64,
    },
    /// Bits held at constant values.
    Fixed(ModeVector),
}

impl SchedulerRule {
    fn bits(&self) -> Vec<&str> {
        match self {
            Self::PwmComplementary { master, slave, .. } => vec![master, slave],
            Self::DiodeComparator { bit, .. } => vec![bit],
            Self::Fixed(m) => m.names().collect(),
        }
    }
}

/// Ordered list of rules over disjoint bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeScheduler {
    rules: Vec<SchedulerRule>,
}

impl ModeScheduler {
    pub fn new(rules: Vec<SchedulerRule>) -> Result<Self, SimError> {
        let mut seen = Vec::new();
        for rule in &rules {
            match rule {
                SchedulerRule::PwmComplementary { f_sw, d, .. } => {
                    if !(f_sw.is_finite() && *f_sw > 0.0) {
                        return Err(SimError::Scheduler(format!(
                            "switching frequency {f_sw} must be positive"
                        )));
                    }
                    if !(*d > 0.0 && *d < 1.0) {
                        return Err(SimError::Scheduler(format!("duty ratio {d} must lie in (0, 1)")));
                    }
                }
                SchedulerRule::DiodeComparator {
                    threshold, hysteresis, ..
                } => {
                    if !threshold.is_finite() || !(hysteresis.is_finite() && *hysteresis >= 0.0) {
                        return Err(SimError::Scheduler(format!(
                            "comparator threshold {threshold} / hysteresis {hysteresis} invalid"
                        )));
                    }
                }
                SchedulerRule::Fixed(_) => {}
            }
            for bit in rule.bits() {
                if seen.contains(&bit.to_string()) {
                    return Err(SimError::Scheduler(format!("bit `{bit}` is governed twice")));
                }
                seen.push(bit.to_string());
            }
        }
        Ok(Self { rules })
    }

    pub fn pwm(f_sw: f64, d: f64, master: &str, slave: &str) -> Result<Self, SimError> {
        Self::new(vec![SchedulerRule::PwmComplementary {
            f_sw,
            d,
            master: master.into(),
            slave: slave.into(),
        }])
    }

    pub fn comparator(bit: &str, monitored: &str, threshold: f64, hysteresis: f64) -> Result<Self, SimError> {
        Self::new(vec![SchedulerRule::DiodeComparator {
            bit: bit.into(),
            monitored: monitored.into(),
            threshold,
            hysteresis,
        }])
    }

    pub fn fixed(mode: ModeVector) -> Self {
        Self {
            rules: vec![SchedulerRule::Fixed(mode)],
        }
    }

    pub fn rules(&self) -> &[SchedulerRule] {
        &self.rules
    }

    /// Mode at time `t` for the labelled state `x`. `prev` supplies the
    /// held value of comparator bits inside their hysteresis band; without
    /// it the band is split at the threshold. Bits are listed in rule order.
    pub fn mode_at(
        &self,
        t: f64,
        labels: &[String],
        x: &[f64],
        prev: Option<&ModeVector>,
    ) -> Result<ModeVector, SimError> {
        let bits: Vec<String> = self.rules.iter().flat_map(|r| r.bits()).map(str::to_string).collect();
        let bound = BoundScheduler::bind(self, &bits, labels)?;
        let prev = prev.map(|p| bound.bits_of(p));
        Ok(bound.mode_vector(&bound.select(t, x, prev.as_deref())))
    }

    /// Checks that `model`'s bits are each governed exactly once and that
    /// every monitored label is a state.
    pub fn bind(&self, model: &SwitchedModel) -> Result<BoundScheduler, SimError> {
        BoundScheduler::bind(self, &model.bit_names, &model.state_labels)
    }
}

#[derive(Debug, Clone)]
enum BoundRule {
    Pwm {
        f_sw: f64,
        d: f64,
        master: usize,
        slave: usize,
    },
    Comparator {
        bit: usize,
        state: usize,
        on: f64,
        off: f64,
        threshold: f64,
    },
    Fixed(Vec<(usize, bool)>),
}

/// A scheduler resolved against a model's bit and state indices.
#[derive(Debug, Clone)]
pub struct BoundScheduler {
    bit_names: Vec<String>,
    rules: Vec<BoundRule>,
}

impl BoundScheduler {
    fn bind(s: &ModeScheduler, bit_names: &[String], labels: &[String]) -> Result<Self, SimError> {
        let index: BTreeMap<&str, usize> = bit_names.iter().enumerate().map(|(i, b)| (b.as_str(), i)).collect();
        let bit = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| SimError::Scheduler(format!("bit `{name}` does not exist in the model")))
        };
        let mut rules = Vec::new();
        let mut governed = vec![false; bit_names.len()];
        for rule in &s.rules {
            for b in rule.bits() {
                governed[bit(b)?] = true;
            }
            rules.push(match rule {
                SchedulerRule::PwmComplementary { f_sw, d, master, slave } => BoundRule::Pwm {
                    f_sw: *f_sw,
                    d: *d,
                    master: bit(master)?,
                    slave: bit(slave)?,
                },
                SchedulerRule::DiodeComparator {
                    bit: b,
                    monitored,
                    threshold,
                    hysteresis,
                } => BoundRule::Comparator {
                    bit: bit(b)?,
                    state: labels
                        .iter()
                        .position(|l| l == monitored)
                        .ok_or_else(|| SimError::MissingLabel(monitored.clone()))?,
                    on: threshold + hysteresis / 2.0,
                    off: threshold - hysteresis / 2.0,
                    threshold: *threshold,
                },
                SchedulerRule::Fixed(m) => BoundRule::Fixed(
                    m.bits()
                        .iter()
                        .map(|(n, v)| Ok((bit(n)?, *v)))
                        .collect::<Result<_, SimError>>()?,
                ),
            });
        }
        if let Some(i) = governed.iter().position(|g| !g) {
            return Err(SimError::Scheduler(format!(
                "bit `{}` is not governed by any rule",
                bit_names[i]
            )));
        }
        Ok(Self {
            bit_names: bit_names.to_vec(),
            rules,
        })
    }

    pub fn bit_names(&self) -> &[String] {
        &self.bit_names
    }

    pub fn bits_of(&self, m: &ModeVector) -> Vec<bool> {
        self.bit_names.iter().map(|n| m.get(n).unwrap_or(false)).collect()
    }

    pub fn mode_vector(&self, bits: &[bool]) -> ModeVector {
        ModeVector::new(self.bit_names.iter().zip(bits).map(|(n, b)| (n.clone(), i64::from(*b)))).expect("binary bits")
    }

    /// Bit values at time `t` and state `x`.
    pub fn select(&self, t: f64, x: &[f64], prev: Option<&[bool]>) -> Vec<bool> {
        let mut bits = vec![false; self.bit_names.len()];
        for rule in &self.rules {
            match *rule {
                BoundRule::Pwm { f_sw, d, master, slave } => {
                    let on = (t * f_sw).rem_euclid(1.0) < d;
                    bits[master] = on;
                    bits[slave] = !on;
                }
                BoundRule::Comparator {
                    bit,
                    state,
                    on,
                    off,
                    threshold,
                } => {
                    let v = x[state];
                    bits[bit] = match prev {
                        Some(p) => comparator(v, p[bit], on, off),
                        None => v >= threshold,
                    };
                }
                BoundRule::Fixed(ref fixed) => {
                    for &(b, v) in fixed {
                        bits[b] = v;
                    }
                }
            }
        }
        bits
    }

    /// Whether any comparator would change state at `x` given `prev`.
    pub fn comparator_flips(&self, x: &[f64], prev: &[bool]) -> bool {
        self.rules.iter().any(|r| match *r {
            BoundRule::Comparator {
                bit, state, on, off, ..
            } => comparator(x[state], prev[bit], on, off) != prev[bit],
            _ => false,
        })
    }

    /// Times strictly inside `(t0, t1)` at which a PWM bit changes.
    pub fn edges_in(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        for rule in &self.rules {
            if let BoundRule::Pwm { f_sw, d, .. } = *rule {
                let period = 1.0 / f_sw;
                let mut k = (t0 * f_sw).floor();
                loop {
                    let start = k * period;
                    if start >= t1 {
                        break;
                    }
                    for e in [start, (k + d) * period] {
                        if e > t0 && e < t1 {
                            out.push(e);
                        }
                    }
                    k += 1.0;
                }
            }
        }
    }

    /// Comparator bits, for event bookkeeping.
    pub fn comparator_bits(&self) -> Vec<usize> {
        self.rules
            .iter()
            .filter_map(|r| match r {
                BoundRule::Comparator { bit, .. } => Some(*bit),
                _ => None,
            })
            .collect()
    }

    /// Active threshold of comparator `bit` given its current value.
    pub fn comparator_level(&self, bit: usize, current: bool) -> Option<(usize, f64)> {
        self.rules.iter().find_map(|r| match *r {
            BoundRule::Comparator {
                bit: b, state, on, off, ..
            } if b == bit => Some((state, if current { off } else { on })),
            _ => None,
        })
    }
}

fn comparator(v: f64, prev: bool, on: f64, off: f64) -> bool {
    if v >= on {
        true
    } else if v < off {
        false
    } else {
        prev
    }
}
