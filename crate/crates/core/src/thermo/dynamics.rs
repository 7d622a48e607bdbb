use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{log_reference, ContactModel};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::qcore::{self, DensityMatrix};

/// Observables recorded at one grid time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    pub t: f64,
    /// Heat power absorbed by reservoir 1 and 2.
    pub p1: f64,
    pub p2: f64,
    /// `Tr(Ω H1)`, `Tr(Ω H2)`.
    pub e1: f64,
    pub e2: f64,
    /// `Tr(Ω HC(t))`.
    pub u_c: f64,
    /// `Tr(Ω ∂_t HC(t))`.
    pub work_power: f64,
    /// Work done on the system since the start. Each substep holds `H` at
    /// its midpoint value, so the work is the sum of `Tr(Ω ΔHC)` over the
    /// schedule changes at substep edges and midpoints.
    pub work: f64,
    /// `S(Ω_t ‖ Ω_ref)`.
    pub s_rel: f64,
}

impl ThermoPoint {
    pub fn total_energy(&self) -> f64 {
        self.e1 + self.e2 + self.u_c
    }
}

#[derive(Debug, Clone)]
pub struct ThermoTrajectory {
    pub points: Vec<ThermoPoint>,
    pub final_state: DensityMatrix,
    /// States at the grid times, when requested.
    pub states: Option<Vec<DensityMatrix>>,
    /// Largest eigenvalue change between the initial and final state.
    pub spectrum_drift: f64,
}

impl ThermoTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// Largest `|ΔU − ΔW|` per unit elapsed time, where `U` is the total
    /// energy; the first law says this vanishes.
    pub fn first_law_residual(&self) -> f64 {
        let p0 = self.points[0];
        self.points[1..]
            .iter()
            .map(|p| ((p.total_energy() - p0.total_energy()) - p.work).abs() / (p.t - p0.t))
            .fold(0.0, f64::max)
    }

    /// Index of the grid point nearest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let k = self.points.partition_point(|p| p.t < t);
        if k == 0 {
            0
        } else if k == self.points.len() || (t - self.points[k - 1].t) <= (self.points[k].t - t) {
            k - 1
        } else {
            k
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt_sub: f64,
    pub keep_states: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { dt_sub: 0.02, keep_states: false }
    }
}

/// Observables expressed in one fixed basis, so that the exact static path
/// can evaluate them without leaving the energy eigenbasis.
struct Observer<'a> {
    model: &'a ContactModel,
    h1: CMat,
    h2: CMat,
    /// `(op, flux1, flux2)` per contact term.
    terms: Vec<(CMat, CMat, CMat)>,
    log_ref: CMat,
    neg_entropy0: f64,
}

impl<'a> Observer<'a> {
    fn new(model: &'a ContactModel, omega0: &DensityMatrix, basis: Option<&CMat>) -> Self {
        let rotate = |m: &CMat| match basis {
            Some(v) => v.adjoint() * m * v,
            None => m.clone(),
        };
        Observer {
            model,
            h1: rotate(&model.h1_full),
            h2: rotate(&model.h2_full),
            terms: model.terms.iter().map(|t| (rotate(&t.op), rotate(&t.flux1), rotate(&t.flux2))).collect(),
            log_ref: rotate(&log_reference(model)),
            neg_entropy0: -qcore::von_neumann_entropy(omega0),
        }
    }

    /// `Tr(Ω [HC(t_b) − HC(t_a)])`: the work done by moving the schedule
    /// from `t_a` to `t_b` while the state is held.
    fn work_increment(&self, omega: &CMat, t_a: f64, t_b: f64) -> f64 {
        let tau = self.model.tau;
        self.model
            .terms
            .iter()
            .zip(&self.terms)
            .filter(|(term, _)| !term.profile.is_constant())
            .map(|(term, (op, _, _))| {
                let dv = term.profile.eval(t_b, tau).0 - term.profile.eval(t_a, tau).0;
                if dv == 0.0 {
                    0.0
                } else {
                    term.coeff * dv * linalg::trace_product(omega, op).re
                }
            })
            .sum()
    }

    fn observe(&self, omega: &CMat, t: f64, work: f64) -> ThermoPoint {
        let m = self.model;
        let (mut p1, mut p2, mut u_c, mut work_power) = (0.0, 0.0, 0.0, 0.0);
        for (term, (op, flux1, flux2)) in m.terms.iter().zip(&self.terms) {
            let (v, dv) = term.profile.eval(t, m.tau);
            let a = linalg::trace_product(omega, op).re;
            u_c += term.coeff * v * a;
            work_power += term.coeff * dv * a;
            if v != 0.0 {
                p1 += term.coeff * v * linalg::trace_product(omega, flux1).re;
                p2 += term.coeff * v * linalg::trace_product(omega, flux2).re;
            }
        }
        ThermoPoint {
            t,
            p1,
            p2,
            e1: linalg::trace_product(omega, &self.h1).re,
            e2: linalg::trace_product(omega, &self.h2).re,
            u_c,
            work_power,
            work,
            s_rel: self.neg_entropy0 - linalg::trace_product(omega, &self.log_ref).re,
        }
    }
}

/// Substep propagators keyed by the profile values at the substep midpoint
/// and the substep length, so periodic and constant schedules reuse them.
struct PropagatorCache {
    map: HashMap<Vec<i64>, CMat>,
    capacity: usize,
}

impl PropagatorCache {
    fn new(dim: usize) -> Self {
        let bytes_per = dim * dim * 16;
        PropagatorCache { map: HashMap::new(), capacity: ((256usize << 20) / bytes_per).max(1) }
    }

    fn get(&mut self, model: &ContactModel, t_mid: f64, dt: f64) -> CMat {
        let mut key: Vec<i64> = model.profile_values(t_mid).iter().map(|(v, _)| (v * 1e12).round() as i64).collect();
        key.push((dt * 1e12).round() as i64);
        if let Some(u) = self.map.get(&key) {
            return u.clone();
        }
        let u = linalg::unitary_propagator(&model.hamiltonian(t_mid), dt);
        if self.map.len() < self.capacity {
            self.map.insert(key, u.clone());
        }
        u
    }
}

fn check_finite(m: &CMat, t: f64) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!("state has non-finite entries at t = {t}")));
    }
    Ok(())
}

/// Propagates `omega0` over `t_grid` with midpoint-exponentiated substeps
/// no longer than `dt_sub`, recording observables at every grid time.
///
/// A model whose contact terms are all constant is propagated exactly in
/// the eigenbasis of `H`, and `dt_sub` only has to pass validation.
pub fn evolve(model: &ContactModel, omega0: &DensityMatrix, t_grid: &[f64], opts: EvolveOptions) -> Result<ThermoTrajectory> {
    if omega0.dim() != model.total_dim() {
        return Err(Error::Structural(format!("state has dimension {}, model {}", omega0.dim(), model.total_dim())));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("time grid must be finite and strictly increasing".into()));
    }
    if !(opts.dt_sub > 0.0) {
        return Err(Error::Parameter(format!("dt_sub must be positive, got {}", opts.dt_sub)));
    }
    let min_spacing = t_grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if t_grid.len() > 1 && opts.dt_sub > min_spacing * (1.0 + 1e-9) {
        return Err(Error::Parameter(format!("dt_sub {} exceeds the grid spacing {min_spacing}", opts.dt_sub)));
    }

    if model.is_static() {
        return evolve_static(model, omega0, t_grid, opts.keep_states);
    }
    let observer = Observer::new(model, omega0, None);
    let mut cache = PropagatorCache::new(model.total_dim());
    let mut omega = omega0.matrix().clone();
    let mut work = 0.0;
    let mut points = vec![observer.observe(&omega, t_grid[0], 0.0)];
    let mut states = opts.keep_states.then(|| vec![omega0.clone()]);

    for w in t_grid.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let n_sub = ((tb - ta) / opts.dt_sub - 1e-9).ceil().max(1.0) as usize;
        let h = (tb - ta) / n_sub as f64;
        for j in 0..n_sub {
            let t0 = ta + j as f64 * h;
            let t_mid = t0 + 0.5 * h;
            let t1 = if j + 1 == n_sub { tb } else { t0 + h };
            work += observer.work_increment(&omega, t0, t_mid);
            omega = linalg::conjugate(&cache.get(model, t_mid, h), &omega);
            work += observer.work_increment(&omega, t_mid, t1);
        }
        omega = linalg::hermitize(&omega);
        check_finite(&omega, tb)?;
        points.push(observer.observe(&omega, tb, work));
        if let Some(s) = states.as_mut() {
            s.push(DensityMatrix::from_trusted(omega.clone()));
        }
    }

    Ok(finish(omega0, DensityMatrix::from_trusted(omega), points, states))
}

fn finish(omega0: &DensityMatrix, final_state: DensityMatrix, points: Vec<ThermoPoint>, states: Option<Vec<DensityMatrix>>) -> ThermoTrajectory {
    let spectrum_drift = omega0
        .eigenvalues()
        .iter()
        .zip(final_state.eigenvalues())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    ThermoTrajectory { points, final_state, states, spectrum_drift }
}

/// `Ω_jk(t) = Ω_jk(t0) e^{-i(E_j - E_k)(t - t0)}` in the eigenbasis of the
/// time-independent `H`.
fn evolve_static(model: &ContactModel, omega0: &DensityMatrix, t_grid: &[f64], keep_states: bool) -> Result<ThermoTrajectory> {
    let (energies, basis) = linalg::eigh(&model.hamiltonian(t_grid[0]));
    let observer = Observer::new(model, omega0, Some(&basis));
    let start = basis.adjoint() * omega0.matrix() * &basis;
    let n = start.nrows();
    let at = |t: f64| {
        let phases: Vec<linalg::C64> = energies.iter().map(|&e| (-linalg::I * e * (t - t_grid[0])).exp()).collect();
        CMat::from_fn(n, n, |j, k| phases[j] * start[(j, k)] * phases[k].conj())
    };
    let mut points = Vec::with_capacity(t_grid.len());
    let mut states = keep_states.then(Vec::new);
    let mut last = start.clone();
    for &t in t_grid {
        let rotated = at(t);
        check_finite(&rotated, t)?;
        points.push(observer.observe(&rotated, t, 0.0));
        if let Some(s) = states.as_mut() {
            s.push(DensityMatrix::from_trusted(&basis * &rotated * basis.adjoint()));
        }
        last = rotated;
    }
    let final_state = DensityMatrix::from_trusted(&basis * last * basis.adjoint());
    Ok(finish(omega0, final_state, points, states))
}

/// Propagator over `[t0, t0 + span]` built from the same midpoint substeps
/// as [`evolve`].
pub fn propagator(model: &ContactModel, t0: f64, span: f64, dt_sub: f64) -> Result<CMat> {
    if !(span > 0.0 && dt_sub > 0.0) {
        return Err(Error::Parameter("span and dt_sub must be positive".into()));
    }
    let n_sub = (span / dt_sub - 1e-9).ceil().max(1.0) as usize;
    let h = span / n_sub as f64;
    let mut cache = PropagatorCache::new(model.total_dim());
    let mut u = linalg::identity(model.total_dim());
    for j in 0..n_sub {
        u = cache.get(model, t0 + (j as f64 + 0.5) * h, h) * u;
    }
    check_finite(&u, t0 + span)?;
    Ok(u)
}

/// `P1`, `P2` for a given state at time `t`.
pub fn heat_power(model: &ContactModel, omega: &DensityMatrix, t: f64) -> Result<(f64, f64)> {
    if omega.dim() != model.total_dim() {
        return Err(Error::Structural("state and model dimensions differ".into()));
    }
    let obs = Observer::new(model, omega, None);
    let p = obs.observe(omega.matrix(), t, 0.0);
    Ok((p.p1, p.p2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalanceRecord {
    pub t: f64,
    pub s_rel: f64,
    /// Central difference of `s_rel`; absent at the end points.
    pub ds_dt: Option<f64>,
    /// `β1 P1 + β2 P2`.
    pub beta_weighted_power: f64,
    /// `|ds_dt − β·P| / max(1, |ds_dt|)`.
    pub residual: Option<f64>,
}

/// Checks the entropy production identity along a trajectory.
pub fn entropy_balance(model: &ContactModel, traj: &ThermoTrajectory) -> Vec<BalanceRecord> {
    let pts = &traj.points;
    (0..pts.len())
        .map(|i| {
            let bp = model.beta1 * pts[i].p1 + model.beta2 * pts[i].p2;
            let ds = (i > 0 && i + 1 < pts.len())
                .then(|| (pts[i + 1].s_rel - pts[i - 1].s_rel) / (pts[i + 1].t - pts[i - 1].t));
            BalanceRecord {
                t: pts[i].t,
                s_rel: pts[i].s_rel,
                ds_dt: ds,
                beta_weighted_power: bp,
                residual: ds.map(|d| (d - bp).abs() / d.abs().max(1.0)),
            }
        })
        .collect()
}

/// Uniform grid `t0, t0 + h, …` with `n + 1` points.
pub fn uniform_grid(t0: f64, t_end: f64, n: usize) -> Vec<f64> {
    let h = (t_end - t0) / n as f64;
    (0..=n).map(|k| if k == n { t_end } else { t0 + k as f64 * h }).collect()
}

#[cfg(test)]
mod tests {
    use super::super::{bundled, reference_state, ContactConfig, ContactTerm, MatrixSpec, Profile};
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_model(dims: [usize; 3], seed: u64) -> ContactModel {
        ContactConfig {
            dims,
            h1: MatrixSpec::RandomLevels { bandwidth: 2.0, seed },
            h2: MatrixSpec::RandomLevels { bandwidth: 2.0, seed: seed + 1 },
            contact_terms: vec![
                ContactTerm {
                    coeff: 0.5,
                    left: MatrixSpec::Identity,
                    contact: MatrixSpec::RandomHermitian { scale: 1.0, seed: seed + 2 },
                    right: MatrixSpec::Identity,
                    profile: Profile::Constant,
                    add_adjoint: false,
                },
                ContactTerm {
                    coeff: 0.3,
                    left: MatrixSpec::RandomHermitian { scale: 1.0, seed: seed + 3 },
                    contact: MatrixSpec::RandomHermitian { scale: 1.0, seed: seed + 4 },
                    right: MatrixSpec::RandomHermitian { scale: 1.0, seed: seed + 5 },
                    profile: Profile::Constant,
                    add_adjoint: false,
                },
            ],
            beta1: 0.5,
            beta2: 1.0,
            k_b: 1.0,
            tau: 1.0,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn decoupled_reference_state_is_stationary() {
        let mut cfg = bundled::model_a();
        cfg.contact_terms.clear();
        let m = cfg.build().unwrap();
        let r = reference_state(&m);
        let traj = evolve(&m, &r, &uniform_grid(0.0, 2.0, 20), EvolveOptions::default()).unwrap();
        assert!(linalg::max_abs_diff(traj.final_state.matrix(), r.matrix()) < 1e-12);
        for p in &traj.points {
            assert_abs_diff_eq!(p.s_rel, 0.0, epsilon = 1e-12);
            assert_eq!((p.p1, p.p2), (0.0, 0.0));
        }
    }

    #[test]
    fn constant_hamiltonian_matches_one_shot_exponential() {
        let m = random_model([2, 2, 2], 10);
        let r = qcore::random_density_matrix(8, 8, 3).unwrap();
        let t_end = 3.7;
        let traj = evolve(&m, &r, &uniform_grid(0.0, t_end, 37), EvolveOptions { dt_sub: 0.01, keep_states: true }).unwrap();
        let u = linalg::unitary_propagator(&m.hamiltonian(0.0), t_end);
        let direct = linalg::conjugate(&u, r.matrix());
        assert!(linalg::max_abs_diff(traj.final_state.matrix(), &direct) < 1e-8);
        assert!(traj.spectrum_drift < 1e-9);
        for s in traj.states.unwrap() {
            assert_abs_diff_eq!(linalg::trace(s.matrix()).re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn substep_path_matches_exponential_and_period_propagator() {
        // A flat table profile is constant in value but takes the substep
        // path.
        let mut cfg = bundled::model_a();
        cfg.dims = [2, 2, 2];
        cfg.h1 = MatrixSpec::RandomLevels { bandwidth: 2.0, seed: 1 };
        cfg.h2 = MatrixSpec::RandomLevels { bandwidth: 2.0, seed: 2 };
        for t in cfg.contact_terms.iter_mut() {
            t.profile = Profile::Table { times: vec![0.0, 1.0], values: vec![1.0, 1.0] };
        }
        let m = cfg.build().unwrap();
        assert!(!m.is_static());
        let r = qcore::random_density_matrix(8, 8, 5).unwrap();
        let traj = evolve(&m, &r, &uniform_grid(0.0, 2.0, 20), EvolveOptions { dt_sub: 0.01, keep_states: false }).unwrap();
        let direct = linalg::conjugate(&linalg::unitary_propagator(&m.hamiltonian(0.0), 2.0), r.matrix());
        assert!(linalg::max_abs_diff(traj.final_state.matrix(), &direct) < 1e-8);

        let mut driven = cfg.clone();
        driven.contact_terms[0].profile = Profile::Periodic { knots: vec![1.0, 0.2, 0.6] };
        driven.tau = 1.5;
        let m = driven.build().unwrap();
        let traj = evolve(&m, &r, &uniform_grid(0.0, 1.5, 30), EvolveOptions { dt_sub: 0.01, keep_states: false }).unwrap();
        let u = propagator(&m, 0.0, 1.5, 0.01).unwrap();
        assert!(linalg::max_abs_diff(traj.final_state.matrix(), &linalg::conjugate(&u, r.matrix())) < 1e-12);
        assert!(traj.spectrum_drift < 1e-9);
        assert!(traj.first_law_residual() < 1e-10, "{}", traj.first_law_residual());
        let fine = evolve(&m, &r, &uniform_grid(0.0, 1.5, 30), EvolveOptions { dt_sub: 0.005, keep_states: false }).unwrap();
        let (w, w_fine) = (traj.points.last().unwrap().work, fine.points.last().unwrap().work);
        assert!((w - w_fine).abs() < 1e-3 * w.abs().max(1e-2), "{w} {w_fine}");
    }

    #[test]
    fn heat_power_matches_finite_difference_of_reservoir_energy() {
        let m = random_model([4, 2, 4], 20);
        let omega = qcore::random_density_matrix(4, 4, 1)
            .unwrap()
            .tensor(&qcore::random_density_matrix(2, 2, 2).unwrap())
            .tensor(&qcore::random_density_matrix(4, 4, 3).unwrap());
        let (p1, p2) = heat_power(&m, &omega, 0.0).unwrap();
        let h = 1e-4;
        let energy = |dt: f64| {
            let u = linalg::unitary_propagator(&m.hamiltonian(0.0), dt);
            let o = linalg::conjugate(&u, omega.matrix());
            let (h1, h2) = m.reservoir_hamiltonians();
            (linalg::trace_product(&o, h1).re, linalg::trace_product(&o, h2).re)
        };
        let (plus, minus) = (energy(h), energy(-h));
        let fd1 = (plus.0 - minus.0) / (2.0 * h);
        let fd2 = (plus.1 - minus.1) / (2.0 * h);
        assert!(p1.abs() > 1e-5 && p2.abs() > 1e-5);
        assert!((fd1 - p1).abs() <= 1e-4 * p1.abs(), "{fd1} vs {p1}");
        assert!((fd2 - p2).abs() <= 1e-4 * p2.abs(), "{fd2} vs {p2}");
    }

    #[test]
    fn commuting_contact_carries_no_heat() {
        let mut cfg = bundled::model_a();
        cfg.contact_terms = vec![ContactTerm {
            coeff: 1.0,
            left: MatrixSpec::Identity,
            contact: MatrixSpec::Pauli { op: 'z' },
            right: MatrixSpec::Identity,
            profile: Profile::Constant,
            add_adjoint: false,
        }];
        let m = cfg.build().unwrap();
        let r = qcore::random_density_matrix(m.total_dim(), 4, 8).unwrap();
        assert_eq!(heat_power(&m, &r, 0.3).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn energy_balance_and_entropy_identity_on_a_static_model() {
        let m = random_model([4, 2, 4], 30);
        let r = reference_state(&m);
        let traj = evolve(&m, &r, &uniform_grid(0.0, 10.0, 500), EvolveOptions::default()).unwrap();
        let bal = entropy_balance(&m, &traj);
        for b in &bal {
            assert!(b.s_rel >= -1e-10);
            if let Some(res) = b.residual {
                assert!(res < 1e-3, "{b:?}");
            }
        }
        // P1 + P2 + dU_C/dt = 0 for a static contact.
        for w in traj.points.windows(3) {
            let du = (w[2].u_c - w[0].u_c) / (w[2].t - w[0].t);
            assert!((w[1].p1 + w[1].p2 + du).abs() < 1e-3);
        }
        assert!(traj.first_law_residual() < 1e-10);
        // Cross-check the cheap relative-entropy formula against the
        // eigendecomposition.
        let direct = qcore::relative_entropy(&traj.final_state, &r).unwrap().finite().unwrap();
        assert_abs_diff_eq!(direct, traj.points.last().unwrap().s_rel, epsilon = 1e-9);
    }

    #[test]
    fn grid_validation() {
        let m = random_model([2, 2, 2], 1);
        let r = reference_state(&m);
        assert!(matches!(evolve(&m, &r, &[0.0, 0.0], EvolveOptions::default()), Err(Error::Parameter(_))));
        let coarse = EvolveOptions { dt_sub: 0.5, keep_states: false };
        assert!(matches!(evolve(&m, &r, &[0.0, 0.1], coarse), Err(Error::Parameter(_))));
        let wrong = DensityMatrix::maximally_mixed(4);
        assert!(matches!(evolve(&m, &wrong, &[0.0, 0.1], EvolveOptions::default()), Err(Error::Structural(_))));
    }
}
