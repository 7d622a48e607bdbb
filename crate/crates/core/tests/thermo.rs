use approx::assert_abs_diff_eq;
use arrowlab::thermo::*;
use arrowlab::{Error, Exec};

fn qubit_pair(contact_terms: Vec<ContactTerm>, tau: f64) -> ContactModel {
    ContactConfig {
        dims: [2, 2, 2],
        h1: MatrixSpec::Diagonal { values: vec![0.0, 1.0] },
        h2: MatrixSpec::Diagonal { values: vec![0.0, 0.5] },
        contact_terms,
        beta1: 0.5,
        beta2: 1.0,
        k_b: 1.0,
        tau,
    }
    .build()
    .unwrap()
}

#[test]
fn decoupled_model_has_no_heat_flow_and_is_not_an_engine() {
    let m = qubit_pair(vec![], 2.0);
    let traj = evolve(&m, &reference_state(&m), &uniform_grid(0.0, 4.0, 40), EvolveOptions::default()).unwrap();
    let c = clausius_flow(&traj, (1.0, 3.0)).unwrap();
    assert_abs_diff_eq!(c.p1_bar, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(c.p2_bar, 0.0, epsilon = 1e-12);

    let r = carnot_run(&m, &CarnotSettings { steps_per_cycle: 20, n_transient: 1, n_measure: 3, ..Default::default() }).unwrap();
    assert!(!r.operating_as_engine);
    assert!(r.eta.is_none());
    assert_eq!(r.eta_carnot, 0.5);
}

#[test]
fn clausius_window_must_lie_on_the_grid() {
    let m = qubit_pair(vec![], 1.0);
    let traj = evolve(&m, &reference_state(&m), &uniform_grid(0.0, 1.0, 10), EvolveOptions::default()).unwrap();
    assert!(matches!(clausius_flow(&traj, (0.5, 2.0)), Err(Error::Parameter(_))));
    assert!(matches!(clausius_flow(&traj, (0.6, 0.4)), Err(Error::Parameter(_))));
    assert!(matches!(clausius_flow(&traj, (0.50, 0.52)), Err(Error::Parameter(_))));
}

#[test]
fn carnot_requires_a_hotter_first_reservoir() {
    let mut cfg = bundled::model_b();
    cfg.beta1 = 2.0;
    let m = cfg.build().unwrap();
    assert!(matches!(carnot_run(&m, &CarnotSettings::default()), Err(Error::Precondition(_))));
}

#[test]
fn modulated_exchange_engine_respects_the_carnot_bound() {
    let m = bundled::model_b().build().unwrap();
    let r = carnot_run(&m, &CarnotSettings::default()).unwrap();
    assert!(r.operating_as_engine);
    let eta = r.eta.unwrap();
    // each quantum moved through a pair with hot gap g releases g and yields 0.6 of work
    assert!(eta > 0.6 / 2.2 - 0.01 && eta < 0.6 / 1.8 + 0.01, "eta {eta}");
    assert!(eta <= r.eta_carnot);
    assert!(r.ds_cycle_min > 0.0);
    assert!(r.first_law_residual < 1e-10);
    assert_abs_diff_eq!(r.dw, r.du_c - r.dq1_out + r.dq2_in, epsilon = 1e-12);
}

#[test]
fn commuting_ramp_dissipates_a_fixed_relative_entropy() {
    // qubit gap 1 -> 3 with nothing to exchange with: the state never moves
    let gap = ContactTerm {
        coeff: 1.0,
        left: MatrixSpec::Identity,
        contact: MatrixSpec::Diagonal { values: vec![0.0, 1.0] },
        right: MatrixSpec::Identity,
        profile: Profile::Ramp { from: 1.0, to: 3.0 },
        add_adjoint: false,
    };
    let m = qubit_pair(vec![gap], 1.0);
    let beta = 1.0;
    let p = (-1.0f64).exp() / (1.0 + (-1.0f64).exp());
    let work = 2.0 * p;
    let df = -((1.0 + (-3.0f64).exp()) / (1.0 + (-1.0f64).exp())).ln() / beta;
    let recs = quasi_static_sweep(&m, &[0.5, 5.0, 50.0], beta, &SweepSettings::default(), Exec::Sequential).unwrap();
    for r in recs {
        assert_abs_diff_eq!(r.dw, work, epsilon = 1e-9);
        assert_abs_diff_eq!(r.df, df, epsilon = 1e-12);
        assert_abs_diff_eq!(r.gap, work - df, epsilon = 1e-9);
        assert_abs_diff_eq!(r.dissipated, r.gap, epsilon = 1e-9);
    }
}

#[test]
fn slower_rotation_wastes_less_work() {
    let m = bundled::model_c().build().unwrap();
    let recs = quasi_static_sweep(&m, &[2.0, 20.0], 1.0, &SweepSettings::default(), Exec::Parallel).unwrap();
    assert!(recs[0].gap > 0.0);
    assert!(recs[1].gap < 0.2 * recs[0].gap, "{recs:?}");
    for r in &recs {
        assert_abs_diff_eq!(r.dissipated, r.gap, epsilon = 1e-8);
        assert_eq!(r.df, recs[0].df);
    }
}

#[test]
fn sweep_is_independent_of_execution_mode() {
    let m = bundled::model_c().build().unwrap();
    let taus = [1.0, 3.0, 7.0];
    let s = quasi_static_sweep(&m, &taus, 0.7, &SweepSettings::default(), Exec::Sequential).unwrap();
    let p = quasi_static_sweep(&m, &taus, 0.7, &SweepSettings::default(), Exec::Parallel).unwrap();
    assert_eq!(s, p);
}
