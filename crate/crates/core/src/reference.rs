//! State-space matrices as printed for the example circuits, evaluated at
//! concrete parameters, for cross-checking derived models.
//!
//! Printed models use their own state orderings; the `*_ORDER` constants
//! give them in terms of the labels used by [`crate::circuits`].

use nalgebra::DMatrix;

use crate::circuits::{BoostParams, IdealDiodeParams, RectifierParams};

pub const BOOST_PRINTED_ORDER: [&str; 6] = ["i", "v_c", "i_Ls", "v_cs", "i_Lc", "v_d"];
pub const RECTIFIER_PRINTED_ORDER: [&str; 4] = ["i", "v_d", "i_Lc", "v_c"];

fn rows<const N: usize>(r: usize, c: usize, data: [f64; N]) -> DMatrix<f64> {
    DMatrix::from_row_slice(r, c, &data)
}

/// Boost `A(u_d, u_m)` and `B(u_d)` in [`BOOST_PRINTED_ORDER`]; `u_m = !u_d`.
#[rustfmt::skip]
pub fn boost_printed(p: &BoostParams, u_d: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let (l, r_l) = (p.inductor.l, p.inductor.r_l);
    let (l_s, c_s) = (p.mosfet.l_s, p.mosfet.c_s);
    let (c, r_c, l_c) = (p.capacitor.c, p.capacitor.r_c, p.capacitor.l_c);
    let c_d = p.diode.c_d;
    let r_o = p.r_o;
    let r_s = p.mosfet.resistance(!u_d);
    let r_d = p.diode.resistance(u_d);
    let u = if u_d { 1.0 } else { 0.0 };
    let a = rows(
        6,
        6,
        [
            (-r_l - r_o) / l, 0.0, r_o / l, 0.0, r_o / l, -1.0 / l,
            0.0, 0.0, 0.0, 0.0, 1.0 / c, 0.0,
            r_o / l_s, 0.0, -r_o / l_s, -1.0 / l_s, -r_o / l_s, 1.0 / l_s,
            0.0, 0.0, 1.0 / c_s, -1.0 / (r_s * c_s), 0.0, 0.0,
            r_o / l_c, -1.0 / l_c, -r_o / l_c, 0.0, (-r_c - r_o) / l_c, 0.0,
            1.0 / c_d, 0.0, -1.0 / c_d, 0.0, 0.0, -1.0 / (r_d * c_d),
        ],
    );
    let b = rows(
        6,
        2,
        [
            1.0 / l, 0.0,
            0.0, 0.0,
            0.0, 0.0,
            0.0, 0.0,
            0.0, 0.0,
            0.0, u / (r_d * c_d),
        ],
    );
    (a, b)
}

/// Rectifier `A(u)`, `B(u)` exactly as printed, in
/// [`RECTIFIER_PRINTED_ORDER`]. Entry `A[0][2]` is printed as `R_c / L_s`.
#[rustfmt::skip]
pub fn rectifier_printed(p: &RectifierParams, u: bool) -> (DMatrix<f64>, DMatrix<f64>) {
    let (r_s, l_s, r_l) = (p.r_s, p.l_s, p.r_l);
    let (c, r_c, l_c) = (p.capacitor.c, p.capacitor.r_c, p.capacitor.l_c);
    let c_d = p.diode.c_d;
    let r_d = p.diode.resistance(u);
    let uf = if u { 1.0 } else { 0.0 };
    let a = rows(
        4,
        4,
        [
            (-r_s - r_l) / l_s, -1.0 / l_s, r_c / l_s, 0.0,
            1.0 / c_d, -1.0 / (r_d * c_d), 0.0, 0.0,
            r_l / l_c, 0.0, (-r_l - r_c) / l_c, -1.0 / l_c,
            0.0, 0.0, 1.0 / c, 0.0,
        ],
    );
    let b = rows(4, 2, [1.0 / l_s, 0.0, 0.0, uf / (r_d * c_d), 0.0, 0.0, 0.0, 0.0]);
    (a, b)
}

/// A printed rectifier coefficient that disagrees with the Euler-Lagrange
/// derivation from the same energy and dissipation functions.
#[derive(Debug, Clone, PartialEq)]
pub struct Misprint {
    pub location: &'static str,
    pub printed_symbol: &'static str,
    pub derived_symbol: &'static str,
    pub printed: f64,
    pub derived: f64,
}

/// The two known misprints: the `A[0][2]` entry, and the capacitor charge
/// coefficient of the printed `q_Lc'' ` equation.
pub fn rectifier_misprints(p: &RectifierParams) -> Vec<Misprint> {
    let (l_s, l_c, c) = (p.l_s, p.capacitor.l_c, p.capacitor.c);
    vec![
        Misprint {
            location: "A[0][2] (i' coefficient of i_Lc)",
            printed_symbol: "R_c/L_s",
            derived_symbol: "R_L/L_s",
            printed: p.capacitor.r_c / l_s,
            derived: p.r_l / l_s,
        },
        Misprint {
            location: "q_Lc'' equation, coefficient of q_Lc",
            printed_symbol: "-1/(C L_s)",
            derived_symbol: "-1/(C L_c)",
            printed: -1.0 / (c * l_s),
            derived: -1.0 / (c * l_c),
        },
    ]
}

/// Descriptor model of the ideal diode circuit with a mode-dependent
/// inductor energy: `E = diag(u, 1)`, states `(i_L, v_C)`.
pub fn ideal_diode_descriptor(p: &IdealDiodeParams, u: bool) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let uf = if u { 1.0 } else { 0.0 };
    let e = rows(2, 2, [uf, 0.0, 0.0, 1.0]);
    let a = rows(2, 2, [-uf * p.r_s / p.l_s, -uf / p.l_s, uf / p.c, -1.0 / (p.r * p.c)]);
    let b = rows(2, 1, [uf / p.l_s, 0.0]);
    (e, a, b)
}
