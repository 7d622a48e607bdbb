use arrowlab::thermo::{self, CarnotSettings, ClausiusReport, ContactConfig, EvolveOptions, SweepSettings};
use arrowlab::Exec;
use serde::{Deserialize, Serialize};

use super::defaults;
use crate::config::CommandConfig;
use crate::error::{CliError, During};
use crate::output::Table;
use crate::run::Run;

defaults! {
    t_end: f64 = 200.0;
    steps: usize = 10_000;
    dt_sub: f64 = 0.02;
    balance_tolerance: f64 = 1e-3;
    entropy_floor: f64 = 1e-10;
    first_law_tolerance: f64 = 1e-8;
    carnot_slack: f64 = 0.02;
    cycle_floor: f64 = 1e-6;
    sweep_beta: f64 = 1.0;
    dissipation_tolerance: f64 = 1e-8;
}

fn build(model: &ContactConfig) -> Result<thermo::ContactModel, CliError> {
    model.build().map_err(|e| CliError::invalid("model", e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub model: ContactConfig,
    #[serde(default = "t_end")]
    pub t_end: f64,
    /// Grid intervals on `[0, t_end]`.
    #[serde(default = "steps")]
    pub steps: usize,
    #[serde(default = "dt_sub")]
    pub dt_sub: f64,
    /// Averaging window for the heat-flow direction; no check without it.
    #[serde(default)]
    pub clausius_window: Option<(f64, f64)>,
    #[serde(default = "balance_tolerance")]
    pub balance_tolerance: f64,
    #[serde(default = "entropy_floor")]
    pub entropy_floor: f64,
    #[serde(default = "first_law_tolerance")]
    pub first_law_tolerance: f64,
}

impl CommandConfig for EvolveConfig {
    fn validate(&self) -> Result<(), CliError> {
        build(&self.model)?;
        if !(self.t_end > 0.0) || self.steps < 2 || !(self.dt_sub > 0.0) {
            return Err(CliError::Invalid { path: String::new(), message: "t_end and dt_sub must be positive and steps at least 2".into() });
        }
        if let Some((a, b)) = self.clausius_window {
            if !(0.0 <= a && a < b && b <= self.t_end) {
                return Err(CliError::Invalid { path: "clausius_window".into(), message: format!("[{a}, {b}] is not inside [0, {}]", self.t_end) });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct EvolveSummary {
    max_balance_residual: f64,
    min_relative_entropy: f64,
    first_law_residual: f64,
    spectrum_drift: f64,
    clausius: Option<ClausiusReport>,
}

pub fn evolve(cfg: &EvolveConfig, run: &mut Run) -> Result<(), CliError> {
    let model = build(&cfg.model)?;
    let grid = thermo::uniform_grid(0.0, cfg.t_end, cfg.steps);
    let opts = EvolveOptions { dt_sub: cfg.dt_sub, keep_states: false };
    let traj = thermo::evolve(&model, &thermo::reference_state(&model), &grid, opts).during("thermo", "evolve")?;
    let balance = thermo::entropy_balance(&model, &traj);

    let mut table = Table::new(&[
        "t", "p1", "p2", "e1", "e2", "u_c", "work_power", "work", "s_rel", "ds_rel_dt", "beta_weighted_power", "balance_residual",
    ]);
    for (p, b) in traj.points.iter().zip(&balance) {
        table.push([
            ("t", p.t.into()),
            ("p1", p.p1.into()),
            ("p2", p.p2.into()),
            ("e1", p.e1.into()),
            ("e2", p.e2.into()),
            ("u_c", p.u_c.into()),
            ("work_power", p.work_power.into()),
            ("work", p.work.into()),
            ("s_rel", p.s_rel.into()),
            ("ds_rel_dt", b.ds_dt.into()),
            ("beta_weighted_power", b.beta_weighted_power.into()),
            ("balance_residual", b.residual.into()),
        ]);
    }
    run.csv("trajectory.csv", &table)?;

    let max_residual = balance.iter().filter_map(|b| b.residual).fold(0.0, f64::max);
    let min_s = traj.points.iter().map(|p| p.s_rel).fold(f64::INFINITY, f64::min);
    let clausius = cfg.clausius_window.map(|w| thermo::clausius_flow(&traj, w)).transpose().during("thermo", "clausius_flow")?;
    let summary = EvolveSummary {
        max_balance_residual: max_residual,
        min_relative_entropy: min_s,
        first_law_residual: traj.first_law_residual(),
        spectrum_drift: traj.spectrum_drift,
        clausius,
    };
    run.json("summary.json", &summary)?;

    run.at_most("entropy_balance_residual", max_residual, cfg.balance_tolerance);
    run.at_least("relative_entropy_min", min_s, -cfg.entropy_floor);
    run.at_most("first_law_residual", summary.first_law_residual, cfg.first_law_tolerance);
    if let Some(c) = clausius {
        run.check("clausius_p1_bar", c.p1_bar, "< 0", c.p1_bar < 0.0);
        run.check("clausius_p2_bar", c.p2_bar, "> 0", c.p2_bar > 0.0);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarnotConfig {
    pub model: ContactConfig,
    #[serde(default)]
    pub settings: CarnotSettings,
    /// Allowed excess of the measured efficiency over Carnot's.
    #[serde(default = "carnot_slack")]
    pub carnot_slack: f64,
    #[serde(default = "cycle_floor")]
    pub cycle_floor: f64,
    #[serde(default = "first_law_tolerance")]
    pub first_law_tolerance: f64,
}

impl CommandConfig for CarnotConfig {
    fn validate(&self) -> Result<(), CliError> {
        let m = build(&self.model)?;
        if !(m.beta1 < m.beta2) {
            return Err(CliError::Invalid { path: "model".into(), message: "reservoir 1 must be hotter: beta1 < beta2".into() });
        }
        let s = &self.settings;
        if s.steps_per_cycle == 0 || s.n_measure == 0 || !(s.dt_sub > 0.0) {
            return Err(CliError::Invalid { path: "settings".into(), message: "steps_per_cycle, n_measure and dt_sub must be positive".into() });
        }
        Ok(())
    }
}

pub fn carnot(cfg: &CarnotConfig, run: &mut Run) -> Result<(), CliError> {
    let model = build(&cfg.model)?;
    let report = thermo::carnot_run(&model, &cfg.settings).during("thermo", "carnot_run")?;
    run.json("cycles.json", &report)?;
    run.holds("operating_as_engine", report.operating_as_engine);
    match report.eta {
        Some(eta) => run.at_most("efficiency", eta, report.eta_carnot + cfg.carnot_slack),
        None => run.holds("efficiency_defined", false),
    }
    run.at_least("cycle_entropy_production_min", report.ds_cycle_min, -cfg.cycle_floor);
    run.at_most("first_law_residual", report.first_law_residual, cfg.first_law_tolerance);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ContactConfig,
    /// Protocol durations; the gap at the last must be below the first.
    pub taus: Vec<f64>,
    #[serde(default = "sweep_beta")]
    pub beta: f64,
    #[serde(default)]
    pub settings: SweepSettings,
    #[serde(default = "dissipation_tolerance")]
    pub dissipation_tolerance: f64,
    #[serde(default)]
    pub exec: Exec,
}

impl CommandConfig for SweepConfig {
    fn validate(&self) -> Result<(), CliError> {
        build(&self.model)?;
        if self.taus.len() < 2 || self.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(CliError::Invalid { path: "taus".into(), message: "need at least two positive durations".into() });
        }
        if !(self.beta > 0.0) || self.settings.steps == 0 || !(self.settings.dt_sub > 0.0) {
            return Err(CliError::Invalid { path: String::new(), message: "beta, steps and dt_sub must be positive".into() });
        }
        Ok(())
    }
}

pub fn sweep(cfg: &SweepConfig, run: &mut Run) -> Result<(), CliError> {
    let model = build(&cfg.model)?;
    let records = thermo::quasi_static_sweep(&model, &cfg.taus, cfg.beta, &cfg.settings, cfg.exec).during("thermo", "quasi_static_sweep")?;
    let mut table = Table::new(&["tau", "work", "free_energy_change", "gap", "dissipated"]);
    for r in &records {
        table.push([
            ("tau", r.tau.into()),
            ("work", r.dw.into()),
            ("free_energy_change", r.df.into()),
            ("gap", r.gap.into()),
            ("dissipated", r.dissipated.into()),
        ]);
    }
    run.csv("sweep.csv", &table)?;
    run.json("summary.json", &records)?;
    let (first, last) = (records[0], records[records.len() - 1]);
    run.check("gap_shrinks", last.gap.abs(), format!("< {:e}", first.gap.abs()), last.gap.abs() < first.gap.abs());
    let worst = records.iter().map(|r| (r.gap - r.dissipated).abs()).fold(0.0, f64::max);
    run.at_most("gap_matches_dissipation", worst, cfg.dissipation_tolerance);
    Ok(())
}
