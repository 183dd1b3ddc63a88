//! The fixed-step switched simulation loop.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::derive::{ModelKind, ReducedModel, SwitchedModel};

use super::event::bisect;
use super::integrator::{Discretization, Integrator};
use super::scheduler::{BoundScheduler, ModeScheduler};
use super::trajectory::{SwitchEvent, Trajectory};
use super::{Inputs, SimConfig, SimError};

/// Comparator events allowed inside one step before giving up.
const MAX_EVENTS_PER_STEP: usize = 64;
/// Edges closer than this fraction of `h` to a grid point are on the grid.
const GRID_SNAP: f64 = 1e-9;

/// Row-major dense matrix for the inner loop.
#[derive(Debug, Clone)]
struct Flat {
    cols: usize,
    data: Vec<f64>,
}

impl Flat {
    fn new(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter());
        }
        Self { cols: m.ncols(), data }
    }

    fn mul_add(&self, v: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    fn quad(&self, v: &[f64]) -> f64 {
        self.data
            .chunks_exact(self.cols)
            .zip(v)
            .map(|(row, vi)| vi * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

struct Kernel<'m> {
    model: &'m ReducedModel,
    record_index: usize,
    phi: Flat,
    gamma: Flat,
    energy: Option<(Flat, Flat, Flat)>,
}

impl Kernel<'_> {
    fn advance(
        &self,
        x: &[f64],
        w: &[f64],
        dur: f64,
        h: f64,
        integrator: Integrator,
        out: &mut [f64],
    ) -> Result<(), SimError> {
        out.iter_mut().for_each(|o| *o = 0.0);
        if dur == h {
            self.phi.mul_add(x, out);
            self.gamma.mul_add(w, out);
        } else {
            let d = Discretization::new(&self.model.a, &self.model.b, dur, integrator)?;
            let next = d.apply(&DVector::from_column_slice(x), &DVector::from_column_slice(w));
            out.copy_from_slice(next.as_slice());
        }
        Ok(())
    }

    fn stored(&self, x: &[f64]) -> f64 {
        self.energy.as_ref().map_or(f64::NAN, |(s, _, _)| 0.5 * s.quad(x))
    }

    /// (source power, dissipated power) at `z = (x, w)`.
    fn powers(&self, z: &[f64]) -> (f64, f64) {
        self.energy
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |(_, qs, qd)| (qs.quad(z), qd.quad(z)))
    }
}

struct Engine<'a> {
    model: &'a SwitchedModel,
    bound: BoundScheduler,
    inputs: &'a Inputs,
    cfg: &'a SimConfig,
    kernels: Vec<Kernel<'a>>,
    lookup: HashMap<Vec<bool>, usize>,
    trajectory: Trajectory,
    bits: Vec<bool>,
    current: usize,
    x: Vec<f64>,
    next: Vec<f64>,
    probe: Vec<f64>,
    w: Vec<f64>,
    z: Vec<f64>,
    e_source: f64,
    e_diss: f64,
    has_comparators: bool,
}

impl<'a> Engine<'a> {
    fn kernel(&mut self, bits: &[bool], t: f64) -> Result<usize, SimError> {
        if let Some(&i) = self.lookup.get(bits) {
            return Ok(i);
        }
        let mode = self.bound.mode_vector(bits);
        let model = self.model.mode(&mode).ok_or_else(|| SimError::UnknownMode {
            t,
            mode: mode.to_string(),
        })?;
        if model.kind == ModelKind::Descriptor {
            return Err(SimError::Descriptor {
                t,
                mode: mode.to_string(),
            });
        }
        let d = Discretization::new(&model.a, &model.b, self.cfg.h, self.cfg.integrator)?;
        let energy = model.energy.as_ref().map(|e| {
            (
                Flat::new(&e.storage),
                Flat::new(&e.source_form),
                Flat::new(&e.dissipation_form),
            )
        });
        let record_index = self.trajectory.intern_mode(&mode);
        self.kernels.push(Kernel {
            model,
            record_index,
            phi: Flat::new(&d.phi),
            gamma: Flat::new(&d.gamma),
            energy,
        });
        self.lookup.insert(bits.to_vec(), self.kernels.len() - 1);
        Ok(self.kernels.len() - 1)
    }

    fn record(&mut self, t: f64) {
        let kern = &self.kernels[self.current];
        let stored = kern.stored(&self.x);
        let idx = kern.record_index;
        self.trajectory
            .push(t, &self.x, idx, stored, self.e_source, self.e_diss);
    }

    /// Integrates the sub-interval `[a, b]` with constant inputs and PWM
    /// bits, splitting it at comparator crossings. A `whole` step uses the
    /// nominal `h` rather than `b - a`.
    fn advance(&mut self, a: f64, b: f64, whole: bool) -> Result<(), SimError> {
        let (h, integrator) = (self.cfg.h, self.cfg.integrator);
        let mut s = a;
        let mut events = 0;
        while s < b {
            let mid = s + (b - s) / 2.0;
            let bits = self.bound.select(mid, &self.x, Some(&self.bits));
            if bits != self.bits {
                for (i, (&old, &new)) in self.bits.iter().zip(&bits).enumerate() {
                    if old != new {
                        self.trajectory.events.push(SwitchEvent {
                            t: s,
                            bit: i,
                            value: new,
                        });
                    }
                }
                self.bits = bits;
            }
            self.current = self.kernel(&self.bits.clone(), s)?;
            self.inputs.fill(mid, &mut self.w);
            let full = if whole && s == a { h } else { b - s };
            let kern = &self.kernels[self.current];
            kern.advance(&self.x, &self.w, full, h, integrator, &mut self.next)?;
            let mut dur = full;
            if self.has_comparators && self.bound.comparator_flips(&self.next, &self.bits) {
                events += 1;
                if events > MAX_EVENTS_PER_STEP {
                    return Err(SimError::EventStorm {
                        t: s,
                        limit: MAX_EVENTS_PER_STEP,
                    });
                }
                let (x, w, bits, bound) = (&self.x, &self.w, &self.bits, &self.bound);
                let probe = &mut self.probe;
                let mut failure = None;
                let (tau, _) = bisect(
                    |tau| match kern.advance(x, w, tau, h, integrator, probe) {
                        Ok(()) => bound.comparator_flips(probe, bits),
                        Err(e) => {
                            failure.get_or_insert(e);
                            true
                        }
                    },
                    0.0,
                    full,
                    self.cfg.event_tolerance,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                if tau < full {
                    kern.advance(&self.x, &self.w, tau, h, integrator, &mut self.next)?;
                    dur = tau;
                }
            }
            self.account(dur);
            std::mem::swap(&mut self.x, &mut self.next);
            s = if dur == full { b } else { s + dur };
        }
        Ok(())
    }

    /// Adds source and dissipated energy over a sub-step from `x` to `next`.
    fn account(&mut self, dur: f64) {
        let k = self.x.len();
        let kern = &self.kernels[self.current];
        self.z[k..].copy_from_slice(&self.w);
        let (source, diss) = if self.cfg.integrator == Integrator::Trapezoidal {
            // Exact for the trapezoidal rule: the stored-energy change over
            // the step equals the power balance at the midpoint state.
            for i in 0..k {
                self.z[i] = 0.5 * (self.x[i] + self.next[i]);
            }
            let (ps, pd) = kern.powers(&self.z);
            (dur * ps, dur * pd)
        } else {
            self.z[..k].copy_from_slice(&self.x);
            let (ps0, pd0) = kern.powers(&self.z);
            self.z[..k].copy_from_slice(&self.next);
            let (ps1, pd1) = kern.powers(&self.z);
            (0.5 * dur * (ps0 + ps1), 0.5 * dur * (pd0 + pd1))
        };
        self.e_source += source;
        self.e_diss += diss;
    }
}

/// Simulates `model` from `t = 0` to `cfg.t_end` on the grid `t_k = k h`.
///
/// Steps are split at PWM and input edges that fall inside them; the PWM
/// mode of each piece is the one at its midpoint. When a comparator would
/// change state by the end of a piece, the crossing is bracketed by
/// re-integrating from the start of the piece and the piece is split there.
/// Source and dissipated energy are accumulated alongside the state.
pub fn simulate(
    model: &SwitchedModel,
    scheduler: &ModeScheduler,
    inputs: &Inputs,
    cfg: &SimConfig,
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let bound = scheduler.bind(model)?;
    if inputs.names() != model.input_labels.as_slice() {
        return Err(SimError::InputMismatch {
            expected: model.input_labels.join(","),
            found: inputs.names().join(","),
        });
    }
    let k = model.n_states();
    let p = model.input_labels.len();
    let mut x = vec![0.0; k];
    for (label, v) in &cfg.x0 {
        let i = model
            .state_index(label)
            .ok_or_else(|| SimError::MissingLabel(label.clone()))?;
        x[i] = *v;
    }
    let h = cfg.h;
    let bits = bound.select(h / 2.0, &x, None);
    let has_comparators = !bound.comparator_bits().is_empty();
    let mut engine = Engine {
        model,
        bound,
        inputs,
        cfg,
        kernels: Vec::new(),
        lookup: HashMap::new(),
        trajectory: Trajectory::new(model.state_labels.clone(), model.bit_names.clone()),
        bits: bits.clone(),
        current: 0,
        x,
        next: vec![0.0; k],
        probe: vec![0.0; k],
        w: vec![0.0; p],
        z: vec![0.0; k + p],
        e_source: 0.0,
        e_diss: 0.0,
        has_comparators,
    };
    engine.current = engine.kernel(&bits, 0.0)?;
    engine.record(0.0);

    let n_steps = cfg.n_steps();
    let snap = GRID_SNAP * h;
    let mut edges = Vec::new();
    for step in 0..n_steps {
        let t0 = step as f64 * h;
        let t1 = (step + 1) as f64 * h;
        edges.clear();
        engine.bound.edges_in(t0, t1, &mut edges);
        inputs.edges_in(t0, t1, &mut edges);
        edges.retain(|&e| e > t0 + snap && e < t1 - snap);
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() <= snap);
        let mut a = t0;
        let whole = edges.is_empty();
        for &e in edges.iter().chain(std::iter::once(&t1)) {
            engine.advance(a, e, whole)?;
            a = e;
        }
        if (step + 1) % cfg.decimation == 0 || step + 1 == n_steps {
            engine.record(t1);
        }
    }
    Ok(engine.trajectory)
}
