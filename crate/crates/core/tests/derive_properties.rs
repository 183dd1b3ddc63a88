use elpower::circuits::{
    hf_boost, hf_rectifier, ideal_diode_circuit, lc_circuit, two_source_circuit, BoostParams, RectifierParams,
};
use elpower::derive::{build_switched_model, format_model, parse_dump, ModelKind, ReducedModel, SwitchedModel};
use elpower::elcore::{CircuitDescription, ComponentsBuilder, CoordinateSet, ELComponents, ModeVector};
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mode(bits: &[(&str, i64)]) -> ModeVector {
    ModeVector::new(bits.iter().copied()).unwrap()
}

fn rectifier() -> CircuitDescription {
    hf_rectifier(&RectifierParams::default()).unwrap()
}

fn boost() -> CircuitDescription {
    hf_boost(&BoostParams::default()).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Largest EL loop residual and capacitor-rate residual, each relative to
/// the largest term in its row.
fn reconstruction_residual(c: &CircuitDescription, m: &ReducedModel, comps: &ELComponents, seed: u64) -> f64 {
    let maps = m.energy.as_ref().expect("regular models carry energy maps");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random_vec(&mut rng, m.n_states());
        let w = random_vec(&mut rng, m.input_labels.len());
        let xdot = &m.a * &x + &m.b * &w;
        let qdot = maps.currents(&x, &w);
        let n = c.coords().len();
        let mut qddot = DVector::zeros(n);
        for (j, coord) in c.coords().iter().enumerate() {
            if let Some(k) = m.state_index(&coord.current) {
                qddot[j] = xdot[k];
            }
        }
        let v = DVector::from_iterator(
            c.capacitors().len(),
            c.capacitors().iter().map(|l| x[m.state_index(l).unwrap()]),
        );
        let inertia = comps.mass() * &qddot;
        let damping = comps.dissipation_matrix() * &qdot;
        let field = comps.charge_map().transpose() * &v;
        let drive = comps.input_map() * &w;
        let abs = |m: &DMatrix<f64>| m.abs();
        let scales = abs(comps.mass()) * qddot.abs()
            + abs(comps.dissipation_matrix()) * qdot.abs()
            + abs(&comps.charge_map().transpose()) * v.abs()
            + abs(comps.input_map()) * w.abs();
        for i in 0..n {
            let r = inertia[i] + damping[i] + field[i] - drive[i];
            let scale = scales[i];
            if scale > 0.0 {
                worst = worst.max(r.abs() / scale);
            }
        }
        let pq = comps.charge_map() * &qdot;
        for (k, label) in c.capacitors().iter().enumerate() {
            let lhs = xdot[m.state_index(label).unwrap()];
            let rhs = comps.elastance()[k] * pq[k];
            let scale = lhs.abs().max(rhs.abs());
            if scale > 0.0 {
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    worst
}

#[test]
fn reconstructed_currents_satisfy_loop_equations() {
    for c in [
        rectifier(),
        boost(),
        two_source_circuit(1e-3, 2e-3, 10e-6, 10.0, 5.0, 2.0).unwrap(),
    ] {
        let model = build_switched_model(&c).unwrap();
        for (seed, (mv, comps)) in c.modes().enumerate() {
            let m = model.mode(mv).unwrap();
            assert_eq!(m.kind, ModelKind::Regular);
            let res = reconstruction_residual(&c, m, comps, seed as u64);
            assert!(res <= 1e-9, "{} {mv}: residual {res:e}", c.name());
        }
    }
}

#[test]
fn dump_round_trips_every_circuit() {
    let circuits = [
        ideal_diode_circuit(),
        two_source_circuit(1e-3, 2e-3, 10e-6, 10.0, 5.0, 2.0).unwrap(),
        lc_circuit(1e-3, 1e-3, 1e-6, 0.0).unwrap(),
        rectifier(),
        boost(),
    ];
    for c in circuits {
        let model = build_switched_model(&c).unwrap();
        let blocks = parse_dump(&format_model(&model)).unwrap();
        assert_eq!(blocks.len(), model.modes.len(), "{}", c.name());
        for b in blocks {
            let m = model.mode(&b.mode).unwrap();
            assert_eq!(b.kind, m.kind);
            assert_eq!(b.state_labels, m.state_labels);
            assert_eq!(b.input_labels, m.input_labels);
            assert_eq!(b.a, m.a);
            assert_eq!(b.b, m.b);
            assert_eq!(b.e, m.e);
        }
    }
}

#[test]
fn switching_modes_are_stable() {
    for c in [rectifier(), boost()] {
        let model = build_switched_model(&c).unwrap();
        for mv in c.mode_vectors() {
            let a = &model.mode(mv).unwrap().a;
            for ev in a.complex_eigenvalues().iter() {
                assert!(ev.re <= 1e-9, "{} {mv}: eigenvalue {ev}", c.name());
            }
        }
    }
}

#[test]
fn boost_rejects_non_complementary_modes() {
    let model = build_switched_model(&boost()).unwrap();
    assert!(model.mode(&mode(&[("u_m", 1), ("u_d", 1)])).is_none());
    assert!(model.mode(&mode(&[("u_m", 0), ("u_d", 0)])).is_none());
    assert!(model.mode(&mode(&[("u_m", 1), ("u_d", 0)])).is_some());
}

fn permute_circuit(c: &CircuitDescription, perm: &[usize]) -> CircuitDescription {
    let n = perm.len();
    let pairs: Vec<(String, String)> = perm
        .iter()
        .map(|&j| {
            let k = c.coords().get(j);
            (k.name.clone(), k.current.clone())
        })
        .collect();
    let coords = CoordinateSet::new(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))).unwrap();
    let modes = c
        .modes()
        .map(|(mv, comps)| {
            let row = |k: &[f64]| perm.iter().map(|&j| k[j]).collect::<Vec<f64>>();
            let names: Vec<&str> = comps.input_names().iter().map(String::as_str).collect();
            let branches = comps.branches().expect("built from branches");
            let mut b = ComponentsBuilder::new(n, &names);
            for (l, k) in &branches.inductors {
                b = b.inductor(*l, &row(k));
            }
            for (r, k) in &branches.resistors {
                b = b.resistor(*r, &row(k));
            }
            let p = comps.charge_map();
            for i in 0..p.nrows() {
                let k: Vec<f64> = p.row(i).iter().copied().collect();
                b = b.capacitor(1.0 / comps.elastance()[i], &row(&k));
            }
            let bw = comps.input_map();
            for j in 0..bw.ncols() {
                let k: Vec<f64> = bw.column(j).iter().copied().collect();
                b = b.source(j, &row(&k));
            }
            (mv.clone(), b.build().unwrap())
        })
        .collect();
    CircuitDescription::new(
        c.name(),
        coords,
        c.capacitors().to_vec(),
        modes,
        c.parameters().to_vec(),
    )
    .unwrap()
}

/// `(sE - A)^-1 B` with rows in `order`.
fn transfer(m: &ReducedModel, s: Complex<f64>, order: &[String]) -> DMatrix<Complex<f64>> {
    let n = m.n_states();
    let e = m.e_or_identity();
    let lhs = DMatrix::from_fn(n, n, |i, j| s * e[(i, j)] - m.a[(i, j)]);
    let rhs = m.b.map(|v| Complex::new(v, 0.0));
    let h = lhs.lu().solve(&rhs).unwrap();
    DMatrix::from_fn(order.len(), h.ncols(), |i, j| h[(m.state_index(&order[i]).unwrap(), j)])
}

fn assert_same_transfer(a: &SwitchedModel, b: &SwitchedModel, c: &CircuitDescription) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let order = a.state_labels.clone();
    for mv in c.mode_vectors() {
        let (ma, mb) = (a.mode(mv).unwrap(), b.mode(mv).unwrap());
        for _ in 0..10 {
            let s = Complex::new(0.0, 10f64.powf(rng.gen_range(2.0..9.0)));
            let (ha, hb) = (transfer(ma, s, &order), transfer(mb, s, &order));
            let scale = ha.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()));
            let diff = (&ha - &hb).iter().fold(0.0_f64, |acc, v| acc.max(v.norm()));
            assert!(diff <= 1e-7 * scale, "{mv} at {s}: {diff:e} vs {scale:e}");
        }
        let labels: Vec<&str> = order.iter().map(String::as_str).collect();
        let mb = mb.reordered(&labels).unwrap();
        for (x, y) in [(&ma.a, &mb.a), (&ma.b, &mb.b)] {
            let scale = x.amax();
            let dev = (x - y).amax();
            assert!(dev <= 1e-12 * scale, "{mv}: matrices differ by {dev:e} of {scale:e}");
        }
    }
}

#[test]
fn coordinate_order_does_not_change_transfer_functions() {
    for c in [rectifier(), boost()] {
        let n = c.coords().len();
        let reference = build_switched_model(&c).unwrap();
        for perm in [(0..n).rev().collect::<Vec<_>>(), (1..n).chain([0]).collect()] {
            let permuted = build_switched_model(&permute_circuit(&c, &perm)).unwrap();
            let mut labels = permuted.state_labels.clone();
            labels.sort();
            let mut expected = reference.state_labels.clone();
            expected.sort();
            assert_eq!(labels, expected);
            assert_same_transfer(&reference, &permuted, &c);
        }
    }
}

/// Branch currents of the rectifier resistors as coefficient rows over
/// `(q_s, q_Lc, q_cd)`, with resistances.
fn rectifier_resistors(p: &RectifierParams, on: bool) -> Vec<(f64, [f64; 3])> {
    vec![
        (p.r_s, [1.0, 0.0, 0.0]),
        (p.capacitor.r_c, [0.0, 1.0, 0.0]),
        (if on { p.diode.r_d_on } else { p.diode.r_d_off }, [1.0, 0.0, -1.0]),
        (p.r_l, [1.0, -1.0, 0.0]),
    ]
}

#[test]
fn rayleigh_function_is_half_the_branch_power() {
    let p = RectifierParams::default();
    let c = hf_rectifier(&p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for on in [false, true] {
        let comps = c.components(&mode(&[("u_d", on as i64)])).unwrap();
        for _ in 0..100 {
            let qd = random_vec(&mut rng, 3);
            let oracle: f64 = rectifier_resistors(&p, on)
                .iter()
                .map(|(r, k)| {
                    let i: f64 = k.iter().zip(qd.iter()).map(|(a, b)| a * b).sum();
                    0.5 * r * i * i
                })
                .sum();
            let f = comps.dissipation(&qd).unwrap();
            assert!(
                (f - oracle).abs() <= 1e-12 * oracle.abs().max(1e-300),
                "{f} vs {oracle}"
            );
        }
    }
}

fn all_components() -> Vec<(String, ELComponents)> {
    [rectifier(), boost(), ideal_diode_circuit()]
        .into_iter()
        .flat_map(|c| {
            c.modes()
                .map(|(mv, comps)| (format!("{} {mv}", c.name()), comps.clone()))
                .collect::<Vec<_>>()
        })
        .collect()
}

proptest! {
    #[test]
    fn kinetic_and_dissipation_are_nonnegative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, comps) in all_components() {
            let qd = random_vec(&mut rng, comps.n_coords()) * 10f64.powf(rng.gen_range(-3.0..3.0));
            prop_assert!(comps.kinetic_energy(&qd).unwrap() >= 0.0, "{}", name);
            prop_assert!(comps.dissipation(&qd).unwrap() >= 0.0, "{}", name);
        }
    }

    #[test]
    fn potential_is_quadratic_plus_linear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, comps) in all_components() {
            let q = random_vec(&mut rng, comps.n_coords()) * 1e-6;
            let w = random_vec(&mut rng, comps.n_inputs()) * 10.0;
            let v = |a: f64| comps.potential_energy(&(&q * a), &w).unwrap();
            let f = |a: f64| v(a) - a * v(1.0);
            let pq = comps.charge_map() * &q;
            let field: f64 = (0..pq.len()).map(|k| 0.5 * comps.elastance()[k] * pq[k] * pq[k]).sum();
            let tol = 1e-9 * (field.abs() + v(1.0).abs() + v(2.0).abs()).max(1e-300);
            prop_assert_eq!(v(0.0), 0.0, "{}", name);
            prop_assert!(f(1.0).abs() <= tol, "{}", name);
            prop_assert!((f(2.0) - 2.0 * field).abs() <= tol, "{}: {} vs {}", name, f(2.0), 2.0 * field);
        }
    }

    #[test]
    fn scaled_rectifier_stays_consistent(scale in 0.5f64..2.0, r_l in 1.0f64..100.0) {
        let mut p = RectifierParams::default();
        p.l_s *= scale;
        p.capacitor.c *= scale;
        p.diode.c_d *= scale;
        p.r_l = r_l;
        let c = hf_rectifier(&p).unwrap();
        let model = build_switched_model(&c).unwrap();
        for (seed, (mv, comps)) in c.modes().enumerate() {
            let res = reconstruction_residual(&c, model.mode(mv).unwrap(), comps, seed as u64);
            prop_assert!(res <= 1e-9, "{}: {:e}", mv, res);
        }
    }
}
