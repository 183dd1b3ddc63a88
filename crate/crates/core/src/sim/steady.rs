//! Steady-state solutions: the duty-averaged DC point, the exact periodic
//! orbit of a fixed PWM pattern, and load calibration for the boost.

use nalgebra::{DMatrix, DVector};

use crate::circuits::{hf_boost, BoostParams};
use crate::derive::{build_switched_model, ModelKind, ReducedModel, SwitchedModel};
use crate::elcore::ModeVector;
use crate::linalg::{exp_and_integral, solve_f64};

use super::SimError;

fn regular<'m>(model: &'m SwitchedModel, mode: &ModeVector) -> Result<&'m ReducedModel, SimError> {
    let m = model.mode(mode).ok_or_else(|| SimError::UnknownMode {
        t: 0.0,
        mode: mode.to_string(),
    })?;
    if m.kind == ModelKind::Descriptor {
        return Err(SimError::Descriptor {
            t: 0.0,
            mode: mode.to_string(),
        });
    }
    Ok(m)
}

/// Equilibrium of the duty-weighted average of two modes:
/// `0 = (d A_on + (1-d) A_off) x + (d B_on + (1-d) B_off) w`.
pub fn averaged_dc_solve(
    model: &SwitchedModel,
    on: &ModeVector,
    off: &ModeVector,
    d: f64,
    w: &[f64],
) -> Result<DVector<f64>, SimError> {
    let (m_on, m_off) = (regular(model, on)?, regular(model, off)?);
    let a = &m_on.a * d + &m_off.a * (1.0 - d);
    let b = &m_on.b * d + &m_off.b * (1.0 - d);
    let rhs = -(b * DVector::from_column_slice(w));
    let x = solve_f64(&a, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()))
        .map_err(|_| SimError::SingularAverage)?;
    Ok(x.column(0).into_owned())
}

/// Periodic orbit of a repeating sequence of modes held for fixed durations
/// under constant inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSteadyState {
    /// State at the start of the period.
    pub start: DVector<f64>,
    /// Time average over the period.
    pub mean: DVector<f64>,
    /// Time average over each phase, in phase order.
    pub phase_means: Vec<DVector<f64>>,
}

/// Solves for the state that returns to itself after one pass through
/// `phases`, using exact exponentials of each phase.
pub fn periodic_steady_state(
    model: &SwitchedModel,
    phases: &[(ModeVector, f64)],
    w: &[f64],
) -> Result<PeriodicSteadyState, SimError> {
    let k = model.n_states();
    let w = DVector::from_column_slice(w);
    // For each phase: x_end = e x + f, integral of x = g x + r.
    let mut maps = Vec::new();
    for (mode, tau) in phases {
        let m = regular(model, mode)?;
        let mut aug = DMatrix::zeros(k + 1, k + 1);
        aug.view_mut((0, 0), (k, k)).copy_from(&m.a);
        aug.view_mut((0, k), (k, 1)).copy_from(&(&m.b * &w));
        let (e, g) = exp_and_integral(&aug, *tau);
        maps.push((
            e.view((0, 0), (k, k)).into_owned(),
            e.view((0, k), (k, 1)).column(0).into_owned(),
            g.view((0, 0), (k, k)).into_owned(),
            g.view((0, k), (k, 1)).column(0).into_owned(),
            *tau,
        ));
    }
    let mut mono = DMatrix::<f64>::identity(k, k);
    let mut offset = DVector::<f64>::zeros(k);
    for (e, f, _, _, _) in &maps {
        mono = e * mono;
        offset = e * offset + f;
    }
    let lhs = DMatrix::<f64>::identity(k, k) - mono;
    let start = solve_f64(&lhs, &DMatrix::from_column_slice(k, 1, offset.as_slice()))
        .map_err(|_| SimError::SingularAverage)?
        .column(0)
        .into_owned();
    let mut x = start.clone();
    let mut total = DVector::<f64>::zeros(k);
    let mut span = 0.0;
    let mut phase_means = Vec::new();
    for (e, f, g, r, tau) in &maps {
        let integral = g * &x + r;
        phase_means.push(&integral / *tau);
        total += integral;
        span += tau;
        x = e * &x + f;
    }
    Ok(PeriodicSteadyState {
        start,
        mean: total / span,
        phase_means,
    })
}

/// Result of fitting the boost load to a target operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadCalibration {
    pub r_o: f64,
    /// Mean capacitor (output) voltage on the periodic orbit.
    pub v_out: f64,
    /// Mean inductor current on the periodic orbit.
    pub i_l: f64,
    /// Sum of squared relative errors to the targets.
    pub objective: f64,
}

/// Mean output voltage and inductor current of the boost's periodic orbit
/// for the given parameters.
pub fn boost_operating_point(p: &BoostParams) -> Result<(f64, f64), SimError> {
    let circuit = hf_boost(p).map_err(|e| SimError::Config(e.to_string()))?;
    let model = build_switched_model(&circuit)?;
    let on: ModeVector = "u_m=1,u_d=0".parse().expect("literal");
    let off: ModeVector = "u_m=0,u_d=1".parse().expect("literal");
    let period = p.period();
    let pss = periodic_steady_state(
        &model,
        &[(on, p.d * period), (off, (1.0 - p.d) * period)],
        &[p.v_i, p.diode.v_d_on],
    )?;
    let v = pss.mean[model.state_index("v_c").expect("boost state")];
    let i = pss.mean[model.state_index("i").expect("boost state")];
    Ok((v, i))
}

/// Finds the load resistance whose periodic orbit best matches
/// `(target_v, target_i)` in the least-squares relative sense: a
/// logarithmic scan followed by golden-section refinement.
pub fn calibrate_load(p: &BoostParams, target_v: f64, target_i: f64) -> Result<LoadCalibration, SimError> {
    let eval = |r_o: f64| -> Result<LoadCalibration, SimError> {
        let (v, i) = boost_operating_point(&BoostParams { r_o, ..*p })?;
        let objective = ((v - target_v) / target_v).powi(2) + ((i - target_i) / target_i).powi(2);
        Ok(LoadCalibration {
            r_o,
            v_out: v,
            i_l: i,
            objective,
        })
    };
    let grid: Vec<f64> = (0..=80).map(|k| 10f64.powf(-1.0 + 4.0 * k as f64 / 80.0)).collect();
    let scan: Vec<LoadCalibration> = grid.iter().map(|&r| eval(r)).collect::<Result<_, _>>()?;
    let best = (0..scan.len())
        .min_by(|&a, &b| scan[a].objective.total_cmp(&scan[b].objective))
        .expect("non-empty scan");
    let (mut lo, mut hi) = (
        grid[best.saturating_sub(1)].ln(),
        grid[(best + 1).min(grid.len() - 1)].ln(),
    );
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (eval(c.exp())?, eval(d.exp())?);
    while hi - lo > 1e-12 {
        if fc.objective < fd.objective {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = eval(c.exp())?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = eval(d.exp())?;
        }
    }
    Ok(if fc.objective < fd.objective { fc } else { fd })
}
