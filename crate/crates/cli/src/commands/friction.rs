use std::f64::consts::PI;

use arrowlab::friction::{
    self, Branches, CurveSettings, DecayFit, FieldState, ForceCurve, ForceMethod, FrictionModel, MemorySettings, MomentumTrajectory,
    ParticleState, RunSettings,
};
use arrowlab::{seed, Exec};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::defaults;
use crate::config::CommandConfig;
use crate::error::{CliError, During};
use crate::output::Table;
use crate::run::Run;

defaults! {
    speeds: SpeedGrid = SpeedGrid { min: 0.1, max: 6.0, points: 60 };
    branch_fractions: Vec<f64> = vec![0.5, 1.2];
    branch_tolerance: f64 = 1e-3;
    yes: bool = true;
    self_test_tolerance: f64 = 1e-6;
    delta_probe: Vec<f64> = vec![0.1, 0.3];
    decay_range: (f64, f64) = (-1.3, -0.4);
    memory_tolerance: f64 = 0.01;
    energy_tolerance: f64 = 1e-4;
}

fn check_model(model: &FrictionModel) -> Result<(), CliError> {
    model.validate().map_err(|e| CliError::invalid("model", e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SpeedGrid {
    fn values(&self) -> Vec<f64> {
        let n = self.points.max(2) - 1;
        (0..=n).map(|i| self.min + (self.max - self.min) * i as f64 / n as f64).collect()
    }
}

/// Probes of the subsonic gap for a dispersion with a sound speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsonicProbe {
    /// Speeds up to `inner · vstar` must show no friction.
    pub inner: f64,
    /// Speeds from `outer · vstar` to `2 · outer · vstar` must.
    pub outer: f64,
    pub points: usize,
    /// Noise threshold as a fraction of `F_max`.
    pub noise_fraction: f64,
    /// Required margin above the threshold beyond `outer`.
    pub signal_factor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub model: FrictionModel,
    #[serde(default = "speeds")]
    pub speeds: SpeedGrid,
    #[serde(default)]
    pub curve: CurveSettings,
    /// External forces to solve for, as fractions of `F_max`.
    #[serde(default = "branch_fractions")]
    pub branch_fractions: Vec<f64>,
    /// Bound on `|F(v±) − F|` in units of `F_max`.
    #[serde(default = "branch_tolerance")]
    pub branch_tolerance: f64,
    /// Compares the `v = 0` profile with the static solution.
    #[serde(default = "yes")]
    pub rest_check: bool,
    #[serde(default)]
    pub subsonic: Option<SubsonicProbe>,
    #[serde(default)]
    pub exec: Exec,
}

impl CommandConfig for CurveConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_model(&self.model)?;
        let s = self.speeds;
        if !(0.0 < s.min && s.min < s.max) || s.points < 3 {
            return Err(CliError::Invalid { path: "speeds".into(), message: "need 0 < min < max and at least 3 points".into() });
        }
        if self.branch_fractions.iter().any(|f| !(*f >= 0.0)) || !(self.branch_tolerance > 0.0) {
            return Err(CliError::Invalid { path: "branch_fractions".into(), message: "fractions must be nonnegative".into() });
        }
        if let Some(p) = &self.subsonic {
            if !(self.model.vstar > 0.0) {
                return Err(CliError::Invalid { path: "subsonic".into(), message: "needs a dispersion with vstar > 0".into() });
            }
            if !(0.0 < p.inner && p.inner < p.outer) || p.points < 2 || !(p.noise_fraction > 0.0) {
                return Err(CliError::Invalid { path: "subsonic".into(), message: "need 0 < inner < outer, points ≥ 2, noise_fraction > 0".into() });
            }
        }
        Ok(())
    }
}

fn force_along(model: &FrictionModel, dir: &[f64], speed: f64, method: ForceMethod) -> Result<(f64, f64), CliError> {
    let v: Vec<f64> = dir.iter().map(|e| e * speed).collect();
    let f = friction::friction_force(&v, model, method).during("friction", "friction_force")?;
    let along = f.iter().zip(dir).map(|(f, e)| f * e).sum();
    Ok((f.iter().map(|x| x * x).sum::<f64>().sqrt(), along))
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    f_max: f64,
    v_peak: f64,
    local_maxima: Vec<(f64, f64)>,
    max_power_sign: f64,
    rest_deviation: Option<f64>,
    rest_bound: Option<f64>,
    branches: Vec<Branches>,
    subsonic_max: Option<f64>,
    supersonic_min: Option<f64>,
    noise_threshold: Option<f64>,
}

pub fn curve(cfg: &CurveConfig, run: &mut Run) -> Result<(), CliError> {
    let model = &cfg.model;
    let grid = cfg.speeds.values();
    let curve: ForceCurve = friction::force_speed_curve(model, &grid, &cfg.curve, cfg.exec).during("friction", "force_speed_curve")?;
    let mut table = Table::new(&["v", "force", "power_sign"]);
    for i in 0..curve.v.len() {
        table.push([("v", curve.v[i].into()), ("force", curve.force[i].into()), ("power_sign", curve.power_sign[i].into())]);
    }
    run.csv("curve.csv", &table)?;

    let max_power = curve.power_sign.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    run.at_most("dissipative", max_power, 0.0);
    run.holds("single_interior_maximum", curve.unimodal() && grid[0] < curve.v_peak && curve.v_peak < grid[grid.len() - 1]);

    let (mut rest_deviation, mut rest_bound) = (None, None);
    if cfg.rest_check {
        let dev = friction::rest_profile_deviation(model).during("friction", "rest_profile")?;
        let k1 = 2.0 * PI / model.l;
        let bound = model.eps_reg * model.w_hat(k1 * k1) / model.omega(k1 * k1);
        run.at_most("rest_profile_deviation", dev, bound);
        rest_deviation = Some(dev);
        rest_bound = Some(bound);
    }

    let mut all = Vec::new();
    let mut rows = Table::new(&["fraction", "force", "kind", "v_minus", "v_plus", "force_error_minus", "force_error_plus"]);
    for &frac in &cfg.branch_fractions {
        let target = frac * curve.f_max;
        let b = friction::branches(model, &curve, target, cfg.curve.tol).during("friction", "branches")?;
        let label = format!("branches_at_{frac}");
        let (kind, vm, vp, em, ep) = match &b {
            Branches::Stationary { v_minus, v_plus, .. } => {
                let err = |v: f64| -> Result<Option<f64>, CliError> {
                    if v.is_finite() && v > 0.0 {
                        Ok(Some((force_along(model, &curve.direction, v, curve.method)?.0 - target).abs() / curve.f_max))
                    } else {
                        Ok(None)
                    }
                };
                let (em, ep) = (err(*v_minus)?, err(*v_plus)?);
                let worst = em.unwrap_or(0.0).max(ep.unwrap_or(0.0));
                if frac <= 1.0 {
                    run.holds(format!("{label}_ordered"), v_minus < v_plus);
                    run.at_most(format!("{label}_force_error"), worst, cfg.branch_tolerance);
                } else {
                    run.holds(format!("{label}_none"), false);
                }
                ("stationary", Some(*v_minus), Some(*v_plus), em, ep)
            }
            Branches::NoStationarySolution { .. } => {
                run.holds(format!("{label}_none"), frac > 1.0);
                ("no_stationary_solution", None, None, None, None)
            }
            Branches::MultiModal { .. } => {
                run.holds(format!("{label}_unimodal"), false);
                ("multi_modal", None, None, None, None)
            }
        };
        rows.push([
            ("fraction", frac.into()),
            ("force", target.into()),
            ("kind", kind.into()),
            ("v_minus", vm.into()),
            ("v_plus", vp.into()),
            ("force_error_minus", em.into()),
            ("force_error_plus", ep.into()),
        ]);
        all.push(b);
    }
    run.csv("branches.csv", &rows)?;

    let (mut subsonic_max, mut supersonic_min, mut noise_threshold) = (None, None, None);
    if let Some(p) = &cfg.subsonic {
        let noise = p.noise_fraction * curve.f_max;
        let mut probes = Table::new(&["v", "method", "force"]);
        let (mut inside, mut outside) = (0.0f64, f64::INFINITY);
        for i in 0..p.points {
            let slow = model.vstar * p.inner * (i + 1) as f64 / p.points as f64;
            let fast = model.vstar * p.outer * (1.0 + i as f64 / (p.points - 1) as f64);
            for method in [ForceMethod::EpsLimit, ForceMethod::ShellQuadrature] {
                let name = match method {
                    ForceMethod::EpsLimit => "eps_limit",
                    ForceMethod::ShellQuadrature => "shell_quadrature",
                };
                let fs = force_along(model, &curve.direction, slow, method)?.0;
                let ff = force_along(model, &curve.direction, fast, method)?.0;
                probes.push([("v", slow.into()), ("method", name.into()), ("force", fs.into())]);
                probes.push([("v", fast.into()), ("method", name.into()), ("force", ff.into())]);
                inside = inside.max(fs);
                outside = outside.min(ff);
            }
        }
        run.csv("subsonic.csv", &probes)?;
        run.at_most("subsonic_force", inside, noise);
        run.at_least("supersonic_force", outside, p.signal_factor * noise);
        subsonic_max = Some(inside);
        supersonic_min = Some(outside);
        noise_threshold = Some(noise);
    }

    run.json(
        "summary.json",
        &CurveSummary {
            f_max: curve.f_max,
            v_peak: curve.v_peak,
            local_maxima: curve.local_maxima.clone(),
            max_power_sign: max_power,
            rest_deviation,
            rest_bound,
            branches: all,
            subsonic_max,
            supersonic_min,
            noise_threshold,
        },
    )
}

/// Initial particle state. Without `p`, the momentum has magnitude
/// `momentum` and a direction drawn from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    #[serde(default)]
    pub momentum: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialField {
    #[default]
    Zero,
    /// The dressed profile of a particle at rest.
    Rest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub model: FrictionModel,
    pub initial: InitialData,
    #[serde(default)]
    pub field: InitialField,
    #[serde(default)]
    pub run: RunSettings,
    /// Also solves the memory equation and compares momenta.
    #[serde(default)]
    pub memory: Option<MemorySettings>,
    #[serde(default = "delta_probe")]
    pub delta_probe: Vec<f64>,
    #[serde(default = "decay_range")]
    pub decay_range: (f64, f64),
    /// Bound on `max |P_coupled − P_memory| / max |P|`.
    #[serde(default = "memory_tolerance")]
    pub memory_tolerance: f64,
    /// Bound on the relative energy drift.
    #[serde(default = "energy_tolerance")]
    pub energy_tolerance: f64,
    #[serde(default = "self_test_tolerance")]
    pub self_test_tolerance: f64,
}

impl CommandConfig for EvolveConfig {
    fn validate(&self) -> Result<(), CliError> {
        check_model(&self.model)?;
        let d = self.model.d;
        let init = &self.initial;
        if !init.x.is_empty() && init.x.len() != d {
            return Err(CliError::Invalid { path: "initial.x".into(), message: format!("need {d} components") });
        }
        match (&init.p, init.momentum) {
            (Some(p), None) if p.len() == d => {}
            (None, Some(m)) if m >= 0.0 && m.is_finite() => {}
            _ => {
                return Err(CliError::Invalid {
                    path: "initial".into(),
                    message: format!("give either p with {d} components or a nonnegative momentum"),
                })
            }
        }
        let stiffness = self.model.dt * self.model.max_grid_omega();
        if stiffness > 0.5 {
            return Err(CliError::Invalid {
                path: "model.dt".into(),
                message: format!("dt · max grid ω = {stiffness:.3} exceeds 0.5"),
            });
        }
        let r = &self.run;
        if !(r.t_max > 0.0) || r.record_every == 0 || !(r.wrap_threshold > 0.0 && r.wrap_threshold < 1.0) {
            return Err(CliError::Invalid { path: "run".into(), message: "need t_max > 0, record_every > 0 and 0 < wrap_threshold < 1".into() });
        }
        if let Some(m) = &self.memory {
            let ratio = m.history_step / self.model.dt;
            if !(m.t_max > 0.0) || !(ratio >= 1.0 - 1e-9) || (ratio - ratio.round()).abs() > 1e-9 {
                return Err(CliError::Invalid {
                    path: "memory.history_step".into(),
                    message: "must be a positive integer multiple of dt".into(),
                });
            }
        }
        Ok(())
    }
}

impl EvolveConfig {
    fn particle(&self, seed_value: u64) -> ParticleState {
        let d = self.model.d;
        let x = if self.initial.x.is_empty() { vec![0.0; d] } else { self.initial.x.clone() };
        let p = match (&self.initial.p, self.initial.momentum) {
            (Some(p), _) => p.clone(),
            (None, m) => {
                let mut rng = seed::derived_rng(seed_value, seed::stream::FRICTION_INIT, 0);
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                dir.iter().map(|x| x / len * m.unwrap_or(0.0)).collect()
            }
        };
        ParticleState { x, p }
    }
}

fn trajectory_table(traj: &MomentumTrajectory) -> Table {
    let with_residual = !traj.residual.is_empty();
    let mut t = Table::new(&["t", "momentum", "p0", "p1", "p2", "energy", "residual"]);
    for (i, (time, p)) in traj.times.iter().zip(&traj.p).enumerate() {
        let comp = |a: usize| p.get(a).copied();
        t.push([
            ("t", (*time).into()),
            ("momentum", p.iter().map(|x| x * x).sum::<f64>().sqrt().into()),
            ("p0", comp(0).into()),
            ("p1", comp(1).into()),
            ("p2", comp(2).into()),
            ("energy", traj.energy.get(i).copied().into()),
            ("residual", with_residual.then(|| traj.residual[i]).into()),
        ]);
    }
    t
}

#[derive(Debug, Serialize)]
struct EvolveSummary {
    self_test_deviation: f64,
    initial: ParticleState,
    energy_drift: f64,
    wrap_time: Option<f64>,
    warning: Option<String>,
    decay: DecayFit,
    memory_deviation: Option<f64>,
}

/// Largest momentum difference at common record times, relative to the
/// largest momentum of the coupled run.
fn memory_deviation(coupled: &MomentumTrajectory, memory: &MomentumTrajectory) -> f64 {
    let scale = coupled.momentum_norm().into_iter().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut j = 0;
    for (t, p) in coupled.times.iter().zip(&coupled.p) {
        while j < memory.times.len() && memory.times[j] < t - 1e-9 {
            j += 1;
        }
        if j < memory.times.len() && (memory.times[j] - t).abs() <= 1e-9 {
            let diff = p.iter().zip(&memory.p[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            worst = worst.max(diff);
        }
    }
    worst / scale
}

pub fn evolve(cfg: &EvolveConfig, run: &mut Run) -> Result<(), CliError> {
    let model = &cfg.model;
    let dev = friction::force_self_test(model).during("friction", "force_self_test")?;
    run.at_most("force_self_test", dev, cfg.self_test_tolerance);

    let init = cfg.particle(run.seed());
    let field = match cfg.field {
        InitialField::Zero => FieldState::zero(model),
        InitialField::Rest => friction::rest_profile(model, &init.x).during("friction", "rest_profile")?,
    };
    let traj = friction::evolve_coupled(model, &init, &field, &cfg.run).during("friction", "evolve_coupled")?;
    run.csv("momentum.csv", &trajectory_table(&traj))?;
    run.holds("no_wrap_around", traj.wrap_time.is_none());
    let drift = traj.energy_drift();
    run.at_most("energy_drift", drift, cfg.energy_tolerance);

    let mut memory_dev = None;
    if let Some(settings) = &cfg.memory {
        let mem = friction::memory_evolve(model, &init, &field, settings).during("friction", "memory_evolve")?;
        run.csv("memory.csv", &trajectory_table(&mem))?;
        let d = memory_deviation(&traj, &mem);
        run.at_most("memory_agreement", d, cfg.memory_tolerance);
        memory_dev = Some(d);
    }

    let decay = friction::decay_fit(&traj, &cfg.delta_probe).during("friction", "decay_fit")?;
    let mut env = Table::new(&["t", "momentum"]);
    for (t, p) in &decay.envelope {
        env.push([("t", (*t).into()), ("momentum", (*p).into())]);
    }
    run.csv("envelope.csv", &env)?;
    run.within("decay_exponent", decay.alpha, cfg.decay_range);
    run.holds("field_residual_decreasing", decay.residual_decreasing);

    run.json(
        "summary.json",
        &EvolveSummary {
            self_test_deviation: dev,
            initial: init,
            energy_drift: drift,
            wrap_time: traj.wrap_time,
            warning: traj.warning.clone(),
            decay,
            memory_deviation: memory_dev,
        },
    )
}
