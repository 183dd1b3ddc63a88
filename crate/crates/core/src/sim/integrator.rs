//! Fixed-step integrators for `x' = A x + B w`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::derive::{ModelKind, ReducedModel};
use crate::linalg::{exact_discretization, solve_f64};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    Rk4,
    #[default]
    Trapezoidal,
    ExactExponential,
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rk4 => "rk4",
            Self::Trapezoidal => "trapezoidal",
            Self::ExactExponential => "exact",
        })
    }
}

impl FromStr for Integrator {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Self::Rk4),
            "trapezoidal" | "trapezoid" => Ok(Self::Trapezoidal),
            "exact" | "exactexponential" | "exact-exponential" => Ok(Self::ExactExponential),
            _ => Err(SimError::Config(format!("unknown integrator `{s}`"))),
        }
    }
}

/// One step as a linear map `x+ = phi x + gamma w` for an input held
/// constant over the step.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

impl Discretization {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64, integrator: Integrator) -> Result<Self, SimError> {
        let n = a.nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let (phi, gamma) = match integrator {
            Integrator::Rk4 => {
                let ha = a * h;
                let ha2 = &ha * &ha;
                let ha3 = &ha2 * &ha;
                let ha4 = &ha3 * &ha;
                let phi = &eye + &ha + &ha2 / 2.0 + &ha3 / 6.0 + &ha4 / 24.0;
                let gamma = (&eye + &ha / 2.0 + &ha2 / 6.0 + &ha3 / 24.0) * b * h;
                (phi, gamma)
            }
            Integrator::Trapezoidal => {
                let lhs = &eye - a * (h / 2.0);
                let rhs = &eye + a * (h / 2.0);
                let mut stacked = DMatrix::zeros(n, n + b.ncols());
                stacked.columns_mut(0, n).copy_from(&rhs);
                stacked.columns_mut(n, b.ncols()).copy_from(&(b * h));
                let sol = solve_f64(&lhs, &stacked).map_err(|_| SimError::SingularStep { h })?;
                (sol.columns(0, n).into_owned(), sol.columns(n, b.ncols()).into_owned())
            }
            Integrator::ExactExponential => exact_discretization(a, b, h),
        };
        Ok(Self { phi, gamma })
    }

    pub fn apply(&self, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.phi * x + &self.gamma * w
    }
}

/// Advances `x` from `t` to `t + h` under `model` with input `w(t)`.
///
/// RK4 samples `w` at `t`, `t + h/2` and `t + h`; the trapezoidal rule at
/// `t` and `t + h`; the exact exponential holds `w(t)` over the step.
pub fn step(
    model: &ReducedModel,
    x: &DVector<f64>,
    w: &dyn Fn(f64) -> DVector<f64>,
    t: f64,
    h: f64,
    integrator: Integrator,
) -> Result<DVector<f64>, SimError> {
    if model.kind == ModelKind::Descriptor {
        return Err(SimError::Descriptor {
            t,
            mode: String::from("?"),
        });
    }
    let (a, b) = (&model.a, &model.b);
    let f = |x: &DVector<f64>, w: &DVector<f64>| a * x + b * w;
    Ok(match integrator {
        Integrator::Rk4 => {
            let (w0, wm, w1) = (w(t), w(t + h / 2.0), w(t + h));
            let k1 = f(x, &w0);
            let k2 = f(&(x + &k1 * (h / 2.0)), &wm);
            let k3 = f(&(x + &k2 * (h / 2.0)), &wm);
            let k4 = f(&(x + &k3 * h), &w1);
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        }
        Integrator::Trapezoidal => {
            let n = x.len();
            let lhs = DMatrix::<f64>::identity(n, n) - a * (h / 2.0);
            let rhs = x + (a * x) * (h / 2.0) + b * (w(t) + w(t + h)) * (h / 2.0);
            let sol = solve_f64(&lhs, &DMatrix::from_column_slice(n, 1, rhs.as_slice()))
                .map_err(|_| SimError::SingularStep { h })?;
            sol.column(0).into_owned()
        }
        Integrator::ExactExponential => Discretization::new(a, b, h, integrator)?.apply(x, &w(t)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64) -> ReducedModel {
        ReducedModel::regular(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            &["x"],
            &["w"],
        )
    }

    fn zero_input(_: f64) -> DVector<f64> {
        DVector::zeros(1)
    }

    #[test]
    fn zero_dynamics_hold_state() {
        let m = scalar(0.0, 0.0);
        let x = DVector::from_element(1, 3.5);
        for i in [Integrator::Rk4, Integrator::Trapezoidal, Integrator::ExactExponential] {
            assert_eq!(
                step(&m, &x, &|_| DVector::from_element(1, 9.0), 0.0, 0.1, i).unwrap(),
                x
            );
        }
    }

    #[test]
    fn exact_exponential_decay() {
        let x = step(
            &scalar(-1.0, 0.0),
            &DVector::from_element(1, 1.0),
            &zero_input,
            0.0,
            0.1,
            Integrator::ExactExponential,
        )
        .unwrap();
        assert!((x[0] - (-0.1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rk4_local_error_is_fifth_order() {
        let m = scalar(-1.0, 0.0);
        let err = |h: f64| {
            let x = step(&m, &DVector::from_element(1, 1.0), &zero_input, 0.0, h, Integrator::Rk4).unwrap();
            (x[0] - (-h).exp()).abs()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        // Leading term h^5/120.
        assert!((e1 / (1e-2f64.powi(5) / 120.0) - 1.0).abs() < 0.05);
        assert!(e1 / e2 > 30.0);
    }

    #[test]
    fn linear_maps_match_stagewise_steps() {
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, -2.0, -0.5]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.3]);
        let m = ReducedModel::regular(a.clone(), b.clone(), &["x", "y"], &["w"]);
        let x = DVector::from_vec(vec![0.7, -1.2]);
        let w = DVector::from_element(1, 2.0);
        for i in [Integrator::Rk4, Integrator::Trapezoidal] {
            let d = Discretization::new(&a, &b, 0.05, i).unwrap();
            let s = step(&m, &x, &|_| w.clone(), 0.0, 0.05, i).unwrap();
            assert!((d.apply(&x, &w) - s).amax() < 1e-15);
        }
    }

    #[test]
    fn trapezoid_rejects_singular_system() {
        // I - h/2 A = 0 for A = 2/h.
        let m = scalar(20.0, 0.0);
        assert!(matches!(
            step(
                &m,
                &DVector::from_element(1, 1.0),
                &zero_input,
                0.0,
                0.1,
                Integrator::Trapezoidal
            ),
            Err(SimError::SingularStep { .. })
        ));
    }

    #[test]
    fn integrator_names() {
        for i in [Integrator::Rk4, Integrator::Trapezoidal, Integrator::ExactExponential] {
            assert_eq!(i.to_string().parse::<Integrator>().unwrap(), i);
        }
        assert!("euler".parse::<Integrator>().is_err());
    }
}
