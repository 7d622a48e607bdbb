use arrowlab::qbm::{self, GreenKubo, JumpKernel, KineticModel, MsdFit};
use arrowlab::Exec;
use serde::{Deserialize, Serialize};

use super::defaults;
use crate::config::CommandConfig;
use crate::error::{CliError, During};
use crate::output::Table;
use crate::run::Run;

defaults! {
    n_paths: usize = 10_000;
    n_obs: usize = 200;
    window: (f64, f64) = (10.0, 100.0);
    n_boot: usize = 200;
    vacf_span: f64 = 60.0;
    vacf_points: usize = 300;
    coupling_factor: Option<f64> = Some(2.0);
    r2_min: f64 = 0.99;
    gk_tolerance: f64 = 0.05;
    scaling_range: (f64, f64) = (3.2, 4.8);
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: KineticModel,
    #[serde(default = "n_paths")]
    pub n_paths: usize,
    /// Observation intervals on `[0, window.1 · τ_c]`.
    #[serde(default = "n_obs")]
    pub n_obs: usize,
    /// Fit window in units of the mean waiting time `τ_c`.
    #[serde(default = "window")]
    pub window: (f64, f64),
    #[serde(default = "n_boot")]
    pub n_boot: usize,
    /// Autocorrelation table span, in units of `τ_c`.
    #[serde(default = "vacf_span")]
    pub vacf_span: f64,
    #[serde(default = "vacf_points")]
    pub vacf_points: usize,
    /// Repeats the run with `ν` scaled by this factor and reports the
    /// ratio of fitted diffusion constants.
    #[serde(default = "coupling_factor")]
    pub coupling_factor: Option<f64>,
    #[serde(default = "r2_min")]
    pub r2_min: f64,
    /// Bound on `|D_fit − D_gk| / D_gk`.
    #[serde(default = "gk_tolerance")]
    pub gk_tolerance: f64,
    #[serde(default = "scaling_range")]
    pub scaling_range: (f64, f64),
    #[serde(default)]
    pub exec: Exec,
}

impl Config {
    fn scaled_model(&self) -> Option<KineticModel> {
        self.coupling_factor.map(|f| KineticModel { nu: self.model.nu * f, ..self.model.clone() })
    }
}

impl CommandConfig for Config {
    fn validate(&self) -> Result<(), CliError> {
        self.model.validate().map_err(|e| CliError::invalid("model", e))?;
        if let Some(m) = self.scaled_model() {
            m.validate().map_err(|e| CliError::invalid("coupling_factor", e))?;
        }
        let (a, b) = self.window;
        if !(0.0 <= a && a < b) {
            return Err(CliError::Invalid { path: "window".into(), message: format!("[{a}, {b}] is not an interval") });
        }
        if self.n_paths < qbm::MIN_PATHS || self.n_obs < 3 || self.vacf_points < 2 || !(self.vacf_span > 0.0) {
            return Err(CliError::Invalid {
                path: String::new(),
                message: format!("need n_paths ≥ {}, n_obs ≥ 3, vacf_points ≥ 2 and vacf_span > 0", qbm::MIN_PATHS),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct Measurement {
    nu: f64,
    mean_waiting_time: f64,
    fit: MsdFit,
    d_gk: f64,
    gk_tail: f64,
    relative_error: f64,
}

struct Series {
    times: Vec<f64>,
    msd: Vec<f64>,
    gk: GreenKubo,
}

fn measure(cfg: &Config, model: &KineticModel, seed: u64) -> Result<(Measurement, Series), CliError> {
    let kernel: JumpKernel = qbm::build_kernel(model).during("qbm", "build_kernel")?;
    let tc = kernel.mean_waiting_time();
    let t_max = cfg.window.1 * tc;
    let ens = qbm::sample_ensemble(&kernel, cfg.n_paths, t_max, cfg.n_obs, seed, cfg.exec).during("qbm", "sample_ensemble")?;
    let fit = qbm::msd_estimate(&ens, (cfg.window.0 * tc, t_max), cfg.n_boot, cfg.exec).during("qbm", "msd_estimate")?;
    let gk = qbm::green_kubo(&kernel, cfg.vacf_span * tc, cfg.vacf_points).during("qbm", "green_kubo")?;
    let m = Measurement {
        nu: model.nu,
        mean_waiting_time: tc,
        relative_error: (fit.d_hat - gk.d_gk).abs() / gk.d_gk,
        d_gk: gk.d_gk,
        gk_tail: gk.tail,
        fit,
    };
    Ok((m, Series { msd: ens.msd(), times: ens.times, gk }))
}

fn write_series(run: &mut Run, suffix: &str, s: &Series) -> Result<(), CliError> {
    let mut msd = Table::new(&["t", "msd"]);
    for (t, m) in s.times.iter().zip(&s.msd) {
        msd.push([("t", (*t).into()), ("msd", (*m).into())]);
    }
    run.csv(&format!("msd{suffix}.csv"), &msd)?;
    let mut vacf = Table::new(&["tau", "c"]);
    for (t, c) in s.gk.taus.iter().zip(&s.gk.c) {
        vacf.push([("tau", (*t).into()), ("c", (*c).into())]);
    }
    run.csv(&format!("vacf{suffix}.csv"), &vacf)
}

#[derive(Debug, Serialize)]
struct Summary {
    base: Measurement,
    scaled: Option<Measurement>,
    coupling_factor: Option<f64>,
    diffusion_ratio: Option<f64>,
}

pub fn run(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let (base, series) = measure(cfg, &cfg.model, run.seed())?;
    write_series(run, "", &series)?;
    run.at_least("msd_linear_r2", base.fit.r2, cfg.r2_min);
    run.holds("msd_not_ballistic", !base.fit.ballistic);
    run.at_most("diffusion_vs_green_kubo", base.relative_error, cfg.gk_tolerance);

    let mut scaled = None;
    if let Some(m) = cfg.scaled_model() {
        let (meas, series) = measure(cfg, &m, run.seed())?;
        write_series(run, "_scaled", &series)?;
        run.at_least("scaled_msd_linear_r2", meas.fit.r2, cfg.r2_min);
        scaled = Some(meas);
    }
    let diffusion_ratio = scaled.as_ref().map(|s| s.fit.d_hat / base.fit.d_hat);
    if let Some(r) = diffusion_ratio {
        run.within("diffusion_ratio", r, cfg.scaling_range);
    }
    run.json("summary.json", &Summary { base, scaled, coupling_factor: cfg.coupling_factor, diffusion_ratio })
}
