//! Localization of comparator crossings inside a step.

use super::SimError;

/// Bisects for the switching point of `after`, which is false at `lo` and
/// true at `hi`. Returns the final upper bracket, which lies within `tol` of
/// the switching point, and the number of predicate evaluations.
pub fn bisect(mut after: impl FnMut(f64) -> bool, mut lo: f64, mut hi: f64, tol: f64) -> (f64, usize) {
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if after(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (hi, iterations)
}

/// Time at which a monitored value moving linearly from `before` (at `t`)
/// to `after` (at `t + h`) reaches `level`, to within `tol`.
///
/// A value that only reaches the level at the end of the step returns
/// `t + h` exactly.
pub fn locate_event(before: f64, after: f64, level: f64, t: f64, h: f64, tol: f64) -> Result<f64, SimError> {
    let g0 = before - level;
    let g1 = after - level;
    if g1 == 0.0 {
        return Ok(t + h);
    }
    if g0 == 0.0 {
        return Ok(t);
    }
    if g0.signum() == g1.signum() {
        return Err(SimError::NoCrossing { t, h });
    }
    let value = |s: f64| g0 + (g1 - g0) * (s / h);
    let (s, _) = bisect(|s| value(s).signum() == g1.signum(), 0.0, h, tol);
    Ok(t + s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_crossing_midpoint() {
        let tol = 1e-12;
        let t = locate_event(0.6, 0.8, 0.7, 3e-6, 1e-6, tol).unwrap();
        assert!((t - 3.5e-6).abs() <= tol);
    }

    #[test]
    fn falling_crossing() {
        let t = locate_event(1.0, -1.0, 0.5, 0.0, 1.0, 1e-9).unwrap();
        assert!((t - 0.25).abs() <= 1e-9);
    }

    #[test]
    fn boundary_crossing_is_step_end() {
        assert_eq!(locate_event(0.6, 0.7, 0.7, 1.0, 0.5, 1e-9).unwrap(), 1.5);
    }

    #[test]
    fn missing_crossing_is_an_error() {
        assert!(matches!(
            locate_event(0.1, 0.2, 0.7, 0.0, 1.0, 1e-9),
            Err(SimError::NoCrossing { .. })
        ));
    }

    #[test]
    fn bisection_iteration_bound() {
        let (h, tol) = (1e-6, 1e-12);
        let tau = 3.7e-7;
        let (s, n) = bisect(|s| (-s / tau).exp() < 0.3, 0.0, h, tol);
        let exact = -tau * 0.3f64.ln();
        assert!(s >= exact && s - exact <= tol);
        assert!(n <= (h / tol).log2().ceil() as usize);
    }
}
