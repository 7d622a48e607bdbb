use approx::assert_relative_eq;
use arrowlab::qbm::*;
use arrowlab::{Error, Exec};
use nalgebra::{DMatrix, DVector};

fn small() -> KineticModel {
    KineticModel { d: 2, n_p: 8, nu: 0.5, m0: 1.0, beta: 0.8, splitting: 0.3, kernel_width: 0.9 }
}

/// `2 Σ_a ⟨v_a, (−L)⁻¹ v_a⟩_π` by a direct linear solve with the
/// stationary mode pinned.
fn diffusion_by_solve(kernel: &JumpKernel, velocity: impl Fn(usize) -> [f64; 3]) -> f64 {
    let l = kernel.generator().unwrap();
    let pi = kernel.gibbs();
    let n = l.nrows();
    let a = DMatrix::from_fn(n, n, |i, j| -l[(i, j)] + pi[j]);
    let lu = a.lu();
    (0..3)
        .map(|axis| {
            let v = DVector::from_fn(n, |s, _| velocity(s)[axis]);
            let f = lu.solve(&v).unwrap();
            (0..n).map(|s| pi[s] * v[s] * f[s]).sum::<f64>()
        })
        .sum::<f64>()
        * 2.0
}

#[test]
fn correlation_starts_at_the_mean_squared_velocity() {
    let k = build_kernel(&small()).unwrap();
    let m = k.model().clone();
    let direct: f64 = (0..k.n_states())
        .map(|s| {
            let v = m.velocity(s);
            k.gibbs()[s] * (v[0] * v[0] + v[1] * v[1])
        })
        .sum();
    let gk = green_kubo(&k, 40.0, 200).unwrap();
    assert_relative_eq!(gk.c[0], direct, max_relative = 1e-10);
}

#[test]
fn correlation_decays_monotonically() {
    let k = build_kernel(&bundled_model_k()).unwrap();
    let gk = green_kubo(&k, 60.0 * k.mean_waiting_time(), 300).unwrap();
    assert!(gk.c.iter().all(|&c| c >= 0.0));
    assert!(gk.c.windows(2).all(|w| w[1] <= w[0]));
    assert!(gk.c.last().unwrap() / gk.c[0] < 1e-6);
}

#[test]
fn green_kubo_matches_a_linear_solve() {
    for model in [small(), bundled_model_k()] {
        let k = build_kernel(&model).unwrap();
        let gk = green_kubo(&k, 80.0 * k.mean_waiting_time(), 400).unwrap();
        let exact = diffusion_by_solve(&k, |s| model.velocity(s));
        assert_relative_eq!(gk.d_gk, exact, max_relative = 1e-8);
    }
}

#[test]
fn short_horizon_is_rejected() {
    let k = build_kernel(&small()).unwrap();
    let tc = k.mean_waiting_time();
    assert!(matches!(green_kubo(&k, 0.5 * tc, 50), Err(Error::Parameter(_))));
}

#[test]
fn diffusion_is_reflection_invariant() {
    let model = small();
    let k = build_kernel(&model).unwrap();
    let n_p = model.n_p;
    let reflect = |s: usize| {
        let (idx, sigma) = model.decode(s);
        model.encode([(n_p - idx[0]) % n_p, (n_p - idx[1]) % n_p, 0], sigma)
    };
    let l = k.generator().unwrap();
    for a in 0..k.n_states() {
        for b in 0..k.n_states() {
            assert_relative_eq!(l[(reflect(a), reflect(b))], l[(a, b)], max_relative = 1e-12, epsilon = 1e-300);
        }
    }
    let plain = diffusion_by_solve(&k, |s| model.velocity(s));
    let mirrored = diffusion_by_solve(&k, |s| model.velocity(reflect(s)));
    assert_relative_eq!(plain, mirrored, max_relative = 1e-10);
}

#[test]
fn level_occupation_matches_gibbs_weights() {
    let k = build_kernel(&small()).unwrap();
    let m = k.model().clone();
    let spacing = 10.0 * k.mean_waiting_time();
    let n = 3000;
    let obs: Vec<f64> = (1..=n).map(|i| i as f64 * spacing).collect();
    let path = sample_trajectory(&k, obs[n - 1], &obs, 5).unwrap();
    let upper = path.states.iter().filter(|&&s| m.decode(s).1 > 0).count() as f64 / n as f64;
    let p: f64 = (0..k.n_states()).filter(|&s| m.decode(s).1 > 0).map(|s| k.gibbs()[s]).sum();
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((upper - p).abs() <= 3.0 * sigma, "upper {upper} gibbs {p} sigma {sigma}");
}

#[test]
fn frozen_ensemble_is_flagged_ballistic() {
    let k = build_kernel(&KineticModel { nu: 1e-3, m0: 1e-6, ..small() }).unwrap();
    let ens = sample_ensemble(&k, 200, 100.0, 100, 3, Exec::Parallel).unwrap();
    let fit = msd_estimate(&ens, (10.0, 100.0), 20, Exec::Parallel).unwrap();
    assert!(fit.ballistic);
    assert!(fit.r2 < 0.99, "r2 {}", fit.r2);
    assert_relative_eq!(fit.exponent, 2.0, max_relative = 1e-6);
}

#[test]
fn fit_preconditions() {
    let k = build_kernel(&small()).unwrap();
    let ens = sample_ensemble(&k, 99, 50.0, 50, 3, Exec::Sequential).unwrap();
    assert!(matches!(msd_estimate(&ens, (5.0, 50.0), 10, Exec::Sequential), Err(Error::Precondition(_))));
    let ens = sample_ensemble(&k, 100, 50.0, 50, 3, Exec::Sequential).unwrap();
    assert!(matches!(msd_estimate(&ens, (5.0, 60.0), 10, Exec::Sequential), Err(Error::Parameter(_))));
    let fit = msd_estimate(&ens, (1.0, 3.0), 10, Exec::Sequential).unwrap();
    assert!(fit.warning.unwrap().contains("pre-asymptotic"));
    assert!(fit.slope_ci.0 <= fit.d_hat && fit.d_hat <= fit.slope_ci.1);
}

#[test]
fn ensemble_does_not_depend_on_execution_mode() {
    let k = build_kernel(&small()).unwrap();
    let a = sample_ensemble(&k, 150, 30.0, 30, 11, Exec::Sequential).unwrap();
    let b = sample_ensemble(&k, 150, 30.0, 30, 11, Exec::Parallel).unwrap();
    assert_eq!(a, b);
    let fa = msd_estimate(&a, (10.0, 30.0), 50, Exec::Sequential).unwrap();
    let fb = msd_estimate(&b, (10.0, 30.0), 50, Exec::Parallel).unwrap();
    assert_eq!(fa, fb);
    assert!(a.paths.iter().all(|p| p.positions[0] == [0.0; 3]));
}

#[test]
fn speed_scales_with_coupling_squared() {
    let base = bundled_model_k();
    let s1 = build_kernel(&base).unwrap().mean_speed();
    let s2 = build_kernel(&KineticModel { nu: 2.0 * base.nu, ..base }).unwrap().mean_speed();
    let ratio = s2 / s1;
    assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
}
