//! Window statistics over a recorded trajectory.

use crate::elcore::ModeVector;

use super::{SimError, Trajectory};

/// The last `periods` periods of length `period` of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub period: f64,
    pub periods: usize,
}

impl Window {
    pub fn new(period: f64, periods: usize) -> Self {
        Self { period, periods }
    }

    pub fn span(&self) -> f64 {
        self.period * self.periods as f64
    }

    /// Sample indices whose step ends inside the window.
    fn indices(&self, tr: &Trajectory) -> Result<Vec<usize>, SimError> {
        let end = tr.last_time();
        let span = self.span();
        let start = tr.times.first().copied().unwrap_or(0.0);
        if span > end - start + 1e-12 * end {
            return Err(SimError::WindowTooLong {
                window: span,
                span: end - start,
            });
        }
        let cut = end - span + 1e-12 * end;
        Ok((0..tr.len()).filter(|&i| tr.times[i] > cut).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateMetrics {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
    pub means: Vec<(String, f64)>,
    /// Peak-to-peak excursion per state.
    pub ripple: Vec<(String, f64)>,
    /// Fraction of samples spent in each mode.
    pub dwell: Vec<(ModeVector, f64)>,
}

impl SteadyStateMetrics {
    pub fn mean(&self, label: &str) -> Option<f64> {
        self.means.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn ripple(&self, label: &str) -> Option<f64> {
        self.ripple.iter().find(|(l, _)| l == label).map(|(_, v)| *v)
    }

    pub fn dwell(&self, mode: &ModeVector) -> f64 {
        self.dwell.iter().find(|(m, _)| m == mode).map_or(0.0, |(_, v)| *v)
    }
}

/// Means, ripple and mode dwell fractions over `window`.
pub fn steady_state_metrics(tr: &Trajectory, window: Window) -> Result<SteadyStateMetrics, SimError> {
    let idx = window.indices(tr)?;
    if idx.is_empty() {
        return Err(SimError::EmptySelection);
    }
    let n = idx.len() as f64;
    let mut means = Vec::new();
    let mut ripple = Vec::new();
    for (j, label) in tr.state_labels.iter().enumerate() {
        let values = idx.iter().map(|&i| tr.state(i)[j]);
        let (lo, hi) = values
            .clone()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        means.push((label.clone(), values.sum::<f64>() / n));
        ripple.push((label.clone(), hi - lo));
    }
    let mut counts = vec![0usize; tr.modes.len()];
    for &i in &idx {
        counts[tr.mode_index(i)] += 1;
    }
    let dwell = tr
        .modes
        .iter()
        .zip(counts)
        .map(|(m, c)| (m.clone(), c as f64 / n))
        .collect();
    Ok(SteadyStateMetrics {
        start: tr.last_time() - window.span(),
        end: tr.last_time(),
        samples: idx.len(),
        means,
        ripple,
        dwell,
    })
}

/// Mean of `label` over the samples in `window` whose mode has `bit = value`.
pub fn conditional_mean(tr: &Trajectory, window: Window, label: &str, bit: &str, value: bool) -> Result<f64, SimError> {
    let j = tr
        .state_index(label)
        .ok_or_else(|| SimError::MissingLabel(label.to_string()))?;
    let (sum, count) = window
        .indices(tr)?
        .into_iter()
        .filter(|&i| tr.mode(i).get(bit) == Some(value))
        .fold((0.0, 0usize), |(s, c), i| (s + tr.state(i)[j], c + 1));
    if count == 0 {
        return Err(SimError::EmptySelection);
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trajectory(values: &[(f64, f64, &str)]) -> Trajectory {
        let mut tr = Trajectory::new(vec!["x".into()], vec!["u".into()]);
        for &(t, x, m) in values {
            let i = tr.intern_mode(&m.parse().unwrap());
            tr.push(t, &[x], i, 0.0, 0.0, 0.0);
        }
        tr
    }

    #[test]
    fn constant_trajectory() {
        let tr = trajectory(&[(0.0, 2.0, "u=1"), (1.0, 2.0, "u=1"), (2.0, 2.0, "u=1")]);
        let m = steady_state_metrics(&tr, Window::new(1.0, 2)).unwrap();
        assert_eq!(m.mean("x"), Some(2.0));
        assert_eq!(m.ripple("x"), Some(0.0));
        assert_eq!(m.dwell(&"u=1".parse().unwrap()), 1.0);
    }

    #[test]
    fn window_excludes_its_start() {
        let tr = trajectory(&[(0.0, 10.0, "u=0"), (1.0, 1.0, "u=1"), (2.0, 3.0, "u=0")]);
        let m = steady_state_metrics(&tr, Window::new(1.0, 1)).unwrap();
        assert_eq!(m.samples, 1);
        assert_eq!(m.mean("x"), Some(3.0));
        let w = Window::new(1.0, 2);
        assert_eq!(conditional_mean(&tr, w, "x", "u", true).unwrap(), 1.0);
        assert_eq!(conditional_mean(&tr, w, "x", "u", false).unwrap(), 3.0);
    }

    #[test]
    fn window_longer_than_run() {
        let tr = trajectory(&[(0.0, 1.0, "u=0"), (1.0, 1.0, "u=0")]);
        assert!(matches!(
            steady_state_metrics(&tr, Window::new(1.0, 2)),
            Err(SimError::WindowTooLong { .. })
        ));
    }
}
