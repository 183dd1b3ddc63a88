//! Simulation of switched models under time- and state-driven mode
//! scheduling, with energy accounting and steady-state analysis.

mod event;
mod inputs;
mod integrator;
mod metrics;
mod run;
mod scheduler;
mod steady;
mod trajectory;

use thiserror::Error;

use crate::derive::DeriveError;

pub use event::{bisect, locate_event};
pub use inputs::{InputSignal, Inputs};
pub use integrator::{step, Discretization, Integrator};
pub use metrics::{conditional_mean, steady_state_metrics, SteadyStateMetrics, Window};
pub use run::simulate;
pub use scheduler::{BoundScheduler, ModeScheduler, SchedulerRule};
pub use steady::{
    averaged_dc_solve, boost_operating_point, calibrate_load, periodic_steady_state, LoadCalibration,
    PeriodicSteadyState,
};
pub use trajectory::{SwitchEvent, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error("invalid scheduler: {0}")]
    Scheduler(String),
    #[error("state label `{0}` does not exist in the model")]
    MissingLabel(String),
    #[error("inputs [{found}] do not match model inputs [{expected}]")]
    InputMismatch { expected: String, found: String },
    #[error("t = {t:e} s: mode {mode} is not a mode of the model")]
    UnknownMode { t: f64, mode: String },
    #[error("t = {t:e} s: mode {mode} has a descriptor model and cannot be simulated")]
    Descriptor { t: f64, mode: String },
    #[error("t = {t:e} s: model of mode {mode} carries no energy maps")]
    NoEnergyMaps { t: f64, mode: String },
    #[error("step h = {h:e} s gives a singular implicit system")]
    SingularStep { h: f64 },
    #[error("t = {t:e} s: more than {limit} switching events inside one step")]
    EventStorm { t: f64, limit: usize },
    #[error("no threshold crossing in the step starting at t = {t:e} s (h = {h:e} s)")]
    NoCrossing { t: f64, h: f64 },
    #[error("analysis window of {window:e} s exceeds the trajectory span {span:e} s")]
    WindowTooLong { window: f64, span: f64 },
    #[error("no samples satisfy the requested condition")]
    EmptySelection,
    #[error("averaged system matrix is singular")]
    SingularAverage,
    #[error(transparent)]
    Derive(#[from] DeriveError),
}

/// Settings of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub h: f64,
    pub integrator: Integrator,
    /// Initial values by state label; unlisted states start at zero.
    pub x0: Vec<(String, f64)>,
    /// Width of the final bracket around a comparator crossing.
    pub event_tolerance: f64,
    /// Record every `decimation`-th step.
    pub decimation: usize,
}

impl SimConfig {
    pub fn new(t_end: f64, h: f64) -> Self {
        Self {
            t_end,
            h,
            integrator: Integrator::default(),
            x0: Vec::new(),
            event_tolerance: h * 1e-3,
            decimation: 1,
        }
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn with_x0(mut self, x0: &[(&str, f64)]) -> Self {
        self.x0 = x0.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        self
    }

    pub fn with_decimation(mut self, decimation: usize) -> Self {
        self.decimation = decimation;
        self
    }

    pub fn with_event_tolerance(mut self, tol: f64) -> Self {
        self.event_tolerance = tol;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return bad(format!("h = {} must be positive", self.h));
        }
        if !(self.event_tolerance > 0.0 && self.event_tolerance <= self.h) {
            return bad(format!(
                "event tolerance {} must lie in (0, h = {}]",
                self.event_tolerance, self.h
            ));
        }
        if self.decimation == 0 {
            return bad("decimation must be at least 1".into());
        }
        if self.x0.iter().any(|(_, v)| !v.is_finite()) {
            return bad("initial state must be finite".into());
        }
        Ok(())
    }

    /// Number of steps of size `h` covering `[0, t_end]`.
    pub fn n_steps(&self) -> usize {
        let r = self.t_end / self.h;
        if (r - r.round()).abs() <= 1e-9 * r.max(1.0) {
            r.round() as usize
        } else {
            r.ceil() as usize
        }
    }
}
