use elpower::circuits::{BoostParams, RectifierParams};
use elpower::config::{RunConfig, Scenario};
use elpower::elcore::ModeVector;
use elpower::sim::{simulate, steady_state_metrics, SimError, Trajectory, Window};
use std::path::Path;

fn run(cfg: &RunConfig) -> Result<(Scenario, Trajectory), SimError> {
    let s = cfg.scenario(Path::new(".")).unwrap();
    let model = s.model().unwrap();
    let tr = simulate(&model, &s.scheduler, &s.inputs, &s.config)?;
    Ok((s, tr))
}

fn short_rectifier() -> RunConfig {
    let mut cfg = RunConfig::for_circuit("hf-rectifier");
    cfg.t_end = Some(3e-3);
    cfg
}

#[test]
fn csv_output_is_deterministic() {
    let (_, a) = run(&short_rectifier()).unwrap();
    let (_, b) = run(&short_rectifier()).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn csv_follows_requested_state_order() {
    let mut cfg = short_rectifier();
    cfg.t_end = Some(1e-4);
    let (_, tr) = run(&cfg).unwrap();
    let header = tr.to_csv().lines().next().unwrap().to_string();
    assert!(header.starts_with("t,i,v_d,i_Lc,v_c,u_d,"), "{header}");

    cfg.state_order = Some(["v_c", "i_Lc", "v_d", "i"].map(String::from).to_vec());
    let (_, tr) = run(&cfg).unwrap();
    assert_eq!(tr.state_labels, ["v_c", "i_Lc", "v_d", "i"]);
}

#[test]
fn energy_accounting_is_consistent() {
    let (_, tr) = run(&short_rectifier()).unwrap();
    assert!(tr.dissipated.windows(2).all(|w| w[1] >= w[0]));
    let peak = tr.stored.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let worst = (0..tr.len()).map(|i| tr.balance_residual(i).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6 * peak, "{worst:e} vs peak {peak:e}");
}

#[test]
fn comparator_does_not_chatter() {
    let (s, tr) = run(&short_rectifier()).unwrap();
    assert!(tr.events.len() >= 4, "{} events", tr.events.len());
    let min_gap = 10.0 * s.config.event_tolerance;
    for bit in 0..tr.bit_names.len() {
        let times: Vec<f64> = tr.events.iter().filter(|e| e.bit == bit).map(|e| e.t).collect();
        for w in times.windows(2) {
            assert!(w[1] - w[0] >= min_gap, "events at {:e} and {:e}", w[0], w[1]);
        }
    }
}

#[test]
fn pwm_dwell_matches_duty_cycle() {
    let p = BoostParams::default();
    let period = 1.0 / p.f_sw;
    let mut cfg = RunConfig::for_circuit("hf-boost");
    cfg.t_end = Some(20.0 * period);
    cfg.decimation = Some(1);
    let (s, tr) = run(&cfg).unwrap();
    let m = steady_state_metrics(&tr, Window::new(period, 10)).unwrap();
    let on = ModeVector::new([("u_m", 1), ("u_d", 0)]).unwrap();
    let step = s.config.h / period;
    let dwell = m.dwell(&on);
    assert!((dwell - p.d).abs() <= step + 1e-12, "dwell {dwell}");
}

#[test]
fn descriptor_mode_cannot_be_simulated() {
    let mut cfg = RunConfig::for_circuit("ideal-diode");
    cfg.t_end = Some(1e-3);
    cfg.scheduler = Some(vec![serde_json::from_str(r#"{"fixed": "u=0"}"#).unwrap()]);
    match run(&cfg) {
        Err(SimError::Descriptor { .. }) => {}
        other => panic!("expected a descriptor error, got {:?}", other.map(|(_, t)| t.len())),
    }
}

#[test]
fn unknown_initial_state_is_rejected() {
    let mut cfg = short_rectifier();
    cfg.x0.insert("v_missing".into(), 1.0);
    assert_eq!(run(&cfg).err(), Some(SimError::MissingLabel("v_missing".into())));
}

#[test]
fn initial_state_is_recorded() {
    let mut cfg = short_rectifier();
    cfg.t_end = Some(1e-5);
    cfg.x0.insert("v_c".into(), 5.0);
    let (_, tr) = run(&cfg).unwrap();
    let k = tr.state_index("v_c").unwrap();
    assert_eq!(tr.times[0], 0.0);
    assert_eq!(tr.state(0)[k], 5.0);
}

#[test]
fn rectifier_source_is_a_square_wave() {
    let p = RectifierParams::default();
    let s = RunConfig::for_circuit("hf-rectifier").scenario(Path::new(".")).unwrap();
    let half = 0.5 / p.source.frequency;
    assert_eq!(s.inputs.values(0.25 * half)[0], p.source.amplitude);
    assert_eq!(s.inputs.values(1.25 * half)[0], -p.source.amplitude);
}
