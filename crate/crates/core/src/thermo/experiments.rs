use serde::{Deserialize, Serialize};

use super::{
    evolve, gibbs_state, log_partition, propagator, reference_state, uniform_grid, ContactModel, EvolveOptions, ThermoTrajectory,
};
use crate::linalg::{self, CMat};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::qcore;

/// Window-averaged heat powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClausiusReport {
    /// Window, snapped to the trajectory grid.
    pub t_a: f64,
    pub t_b: f64,
    pub p1_bar: f64,
    pub p2_bar: f64,
    /// `P1_bar ≤ 0 ≤ P2_bar`: heat leaves reservoir 1 and enters reservoir 2.
    /// Only meaningful when reservoir 1 is the hotter one.
    pub flows_from_1_to_2: bool,
}

/// Time averages of the heat powers over `[t_a, t_b]`, computed exactly
/// as reservoir energy differences divided by the window length.
pub fn clausius_flow(traj: &ThermoTrajectory, window: (f64, f64)) -> Result<ClausiusReport> {
    let (t_a, t_b) = window;
    let first = traj.points[0].t;
    let last = traj.points.last().unwrap().t;
    let slack = 1e-9 * (last - first).abs().max(1.0);
    if !(t_a < t_b) || t_a < first - slack || t_b > last + slack {
        return Err(Error::Parameter(format!("window [{t_a}, {t_b}] is not inside [{first}, {last}]")));
    }
    let (a, b) = (traj.index_near(t_a), traj.index_near(t_b));
    if a == b {
        return Err(Error::Parameter("window is narrower than the grid spacing".into()));
    }
    let (pa, pb) = (traj.points[a], traj.points[b]);
    let span = pb.t - pa.t;
    let p1_bar = (pb.e1 - pa.e1) / span;
    let p2_bar = (pb.e2 - pa.e2) / span;
    Ok(ClausiusReport { t_a: pa.t, t_b: pb.t, p1_bar, p2_bar, flows_from_1_to_2: p1_bar <= 0.0 && 0.0 <= p2_bar })
}

/// Heat and work per cycle below this are treated as roundoff.
pub const ENGINE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarnotSettings {
    pub steps_per_cycle: usize,
    pub dt_sub: f64,
    pub n_transient: usize,
    pub n_measure: usize,
}

impl Default for CarnotSettings {
    fn default() -> Self {
        CarnotSettings { steps_per_cycle: 200, dt_sub: 0.02, n_transient: 10, n_measure: 20 }
    }
}

/// Per-cycle quantities averaged over the measured cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    /// Heat released by reservoir 1 into the engine.
    pub dq1_out: f64,
    /// Heat absorbed by reservoir 2 from the engine.
    pub dq2_in: f64,
    /// Work done on the engine by the drive; negative when work is
    /// extracted.
    pub dw: f64,
    /// Change of the engine's own energy per cycle.
    pub du_c: f64,
    /// Extracted work over released heat, `-dw / dq1_out`.
    pub eta: Option<f64>,
    /// `(dq1_out − dq2_in) / dq1_out`.
    pub eta_balance: Option<f64>,
    pub eta_carnot: f64,
    /// `−dq1_out/T1 + dq2_in/T2`.
    pub ds_cycle: f64,
    /// Smallest single-cycle entropy production among the measured cycles.
    pub ds_cycle_min: f64,
    pub operating_as_engine: bool,
    pub cycles: usize,
    pub first_law_residual: f64,
}

/// Runs the periodically driven model from the reference state and
/// measures cycles after a transient.
///
/// The first cycle is integrated on the full substep grid to check the
/// first law; later cycles apply the one-period propagator, and the work
/// per cycle is the energy balance `ΔU − ΔQ` at cycle boundaries, where
/// `H` returns to its initial value.
pub fn carnot_run(model: &ContactModel, settings: &CarnotSettings) -> Result<CycleReport> {
    if !(model.beta1 < model.beta2) {
        return Err(Error::Precondition("reservoir 1 must be hotter than reservoir 2".into()));
    }
    if settings.steps_per_cycle == 0 || settings.n_measure == 0 || !(settings.dt_sub > 0.0) {
        return Err(Error::Parameter("steps_per_cycle, n_measure and dt_sub must be positive".into()));
    }
    let tau = model.tau;
    let start = reference_state(model);
    let dt_sub = settings.dt_sub.min(tau / settings.steps_per_cycle as f64);
    let first = evolve(
        model,
        &start,
        &uniform_grid(0.0, tau, settings.steps_per_cycle),
        EvolveOptions { dt_sub, keep_states: false },
    )?;
    let u = propagator(model, 0.0, tau, dt_sub)?;

    let h1 = &model.h1_full;
    let h2 = &model.h2_full;
    let hc = model.contact_hamiltonian(0.0);
    let energies = |omega: &CMat| {
        (
            linalg::trace_product(omega, h1).re,
            linalg::trace_product(omega, h2).re,
            linalg::trace_product(omega, &hc).re,
        )
    };
    let cycles = settings.n_transient + settings.n_measure;
    let mut omega = start.matrix().clone();
    let mut boundary = Vec::with_capacity(cycles + 1);
    boundary.push(energies(&omega));
    for k in 0..cycles {
        omega = linalg::hermitize(&linalg::conjugate(&u, &omega));
        if omega.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("state has non-finite entries after cycle {}", k + 1)));
        }
        boundary.push(energies(&omega));
    }

    let (t1, t2) = (model.t1(), model.t2());
    let ds_cycle_min = (settings.n_transient..cycles)
        .map(|k| (boundary[k + 1].0 - boundary[k].0) / t1 + (boundary[k + 1].1 - boundary[k].1) / t2)
        .fold(f64::INFINITY, f64::min);
    let (a, b) = (boundary[settings.n_transient], boundary[cycles]);
    let n = settings.n_measure as f64;
    let dq1_out = -(b.0 - a.0) / n;
    let dq2_in = (b.1 - a.1) / n;
    let du_c = (b.2 - a.2) / n;
    let dw = du_c - dq1_out + dq2_in;
    let engine = dq1_out > ENGINE_FLOOR && dw < -ENGINE_FLOOR;
    let first_end = first.points.last().unwrap();
    let first_law_residual = ((first_end.total_energy() - first.points[0].total_energy()) - first_end.work).abs() / tau;
    Ok(CycleReport {
        dq1_out,
        dq2_in,
        dw,
        du_c,
        eta: engine.then(|| -dw / dq1_out),
        eta_balance: engine.then(|| (dq1_out - dq2_in) / dq1_out),
        eta_carnot: (t1 - t2) / t1,
        ds_cycle: -dq1_out / t1 + dq2_in / t2,
        ds_cycle_min,
        operating_as_engine: engine,
        cycles: settings.n_measure,
        first_law_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Grid points per unit of `τ`.
    pub steps: usize,
    pub dt_sub: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { steps: 200, dt_sub: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub tau: f64,
    /// Work done on the system over the protocol.
    pub dw: f64,
    /// `−β⁻¹ ln(Z_end / Z_start)` of the instantaneous Hamiltonians.
    pub df: f64,
    pub gap: f64,
    /// `β⁻¹ S(Ω_end ‖ Gibbs_end)`; equals `gap` for exact dynamics.
    pub dissipated: f64,
}

/// Drives `HC(t) = K(t/τ)` over `t ∈ [0, τ]` from the Gibbs state of
/// `H(0)` at inverse temperature `beta`, for each `τ` in `taus`.
pub fn quasi_static_sweep(
    model: &ContactModel,
    taus: &[f64],
    beta: f64,
    settings: &SweepSettings,
    exec: Exec,
) -> Result<Vec<SweepRecord>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
    }
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) || settings.steps == 0 {
        return Err(Error::Parameter("taus must be positive and steps nonzero".into()));
    }
    let results = par::map_slice(exec, taus, |&tau| -> Result<SweepRecord> {
        let m = model.with_tau(tau)?;
        let h0 = m.hamiltonian(0.0);
        let h1 = m.hamiltonian(tau);
        let (start, _) = gibbs_state(&h0, beta);
        let grid = uniform_grid(0.0, tau, settings.steps);
        let opts = EvolveOptions { dt_sub: settings.dt_sub.min(tau / settings.steps as f64), keep_states: false };
        let traj = evolve(&m, &start, &grid, opts)?;
        let dw = traj.points.last().unwrap().work;
        let df = -(log_partition(&h1, beta) - log_partition(&h0, beta)) / beta;
        let (end_gibbs, _) = gibbs_state(&h1, beta);
        let dissipated = qcore::relative_entropy(&traj.final_state, &end_gibbs)?
            .finite()
            .map_or(f64::INFINITY, |s| s / beta);
        Ok(SweepRecord { tau, dw, df, gap: dw - df, dissipated })
    });
    results.into_iter().collect()
}
