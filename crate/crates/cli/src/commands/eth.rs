use arrowlab::eth::{self, ChainConfig, FrequencyTable};
use arrowlab::Exec;
use serde::{Deserialize, Serialize};

use super::defaults;
use crate::config::CommandConfig;
use crate::error::{CliError, During};
use crate::output::Table;
use crate::run::Run;

defaults! {
    histories: usize = 10_000;
    z_max: f64 = 3.0;
    partition_tolerance: f64 = 1e-10;
    replay: usize = 20;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedChain {
    pub name: String,
    pub chain: ChainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub models: Vec<NamedChain>,
    #[serde(default = "histories")]
    pub histories: usize,
    /// Largest allowed `|frequency − weight| / σ` at the first event.
    #[serde(default = "z_max")]
    pub z_max: f64,
    #[serde(default = "partition_tolerance")]
    pub partition_tolerance: f64,
    /// Histories re-run from their seeds to confirm they repeat exactly.
    #[serde(default = "replay")]
    pub replay: usize,
    #[serde(default)]
    pub exec: Exec,
}

impl CommandConfig for Config {
    fn validate(&self) -> Result<(), CliError> {
        if self.models.is_empty() {
            return Err(CliError::Invalid { path: "models".into(), message: "at least one chain is required".into() });
        }
        for (i, m) in self.models.iter().enumerate() {
            m.chain.build().map_err(|e| CliError::invalid(&format!("models[{i}].chain"), e))?;
            if self.models[..i].iter().any(|o| o.name == m.name) {
                return Err(CliError::Invalid { path: format!("models[{i}].name"), message: format!("duplicate name {}", m.name) });
            }
        }
        if self.histories < 100 {
            return Err(CliError::Invalid { path: "histories".into(), message: "need at least 100 histories".into() });
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct ModelSummary {
    name: String,
    histories: usize,
    failures: usize,
    worst_partition_error: f64,
    all_diminish: bool,
    replay_identical: bool,
    mean_events: f64,
    frequencies: FrequencyTable,
}

pub fn run(cfg: &Config, run: &mut Run) -> Result<(), CliError> {
    let mut freq = Table::new(&["model", "event_step", "branch", "born_weight", "count", "frequency", "sigma", "z_score"]);
    let mut steps = Table::new(&["model", "step", "tail_dim", "event_fraction", "worst_partition_error", "mean_post_entropy"]);
    let mut summaries = Vec::new();
    for named in &cfg.models {
        let model = named.chain.build().during("eth", "build")?;
        let histories = eth::run_histories(&model, cfg.histories, run.seed(), cfg.exec);
        let failures = histories.iter().filter(|h| h.failure.is_some()).count();
        let initial_dim = model.rho0.dim();
        let worst = histories.iter().map(|h| h.worst_partition_error()).fold(0.0, f64::max);
        let all_diminish = histories.iter().all(|h| h.diminishes(model.d, initial_dim));
        let replay_identical = histories.iter().take(cfg.replay).all(|h| eth::run_history(&model, h.seed) == *h);
        let n = histories.len() as f64;
        let mean_events = histories.iter().map(|h| h.steps.iter().filter(|s| s.event).count()).sum::<usize>() as f64 / n;

        let n_steps = histories.iter().map(|h| h.steps.len()).max().unwrap_or(0);
        for k in 0..n_steps {
            let at: Vec<_> = histories.iter().filter_map(|h| h.steps.get(k)).collect();
            let m = at.len() as f64;
            steps.push([
                ("model", named.name.as_str().into()),
                ("step", k.into()),
                ("tail_dim", at.first().map(|s| s.tail_dim).into()),
                ("event_fraction", (at.iter().filter(|s| s.event).count() as f64 / m).into()),
                ("worst_partition_error", at.iter().map(|s| s.check.worst()).fold(0.0, f64::max).into()),
                ("mean_post_entropy", (at.iter().map(|s| s.post_entropy).sum::<f64>() / m).into()),
            ]);
        }

        let table = eth::frequency_table(&model, &histories, run.seed()).during("eth", "frequency_table")?;
        for r in &table.rows {
            freq.push([
                ("model", named.name.as_str().into()),
                ("event_step", table.event_step.into()),
                ("branch", r.branch.into()),
                ("born_weight", r.born_weight.into()),
                ("count", r.count.into()),
                ("frequency", r.frequency.into()),
                ("sigma", r.sigma.into()),
                ("z_score", r.z_score.into()),
            ]);
        }

        let name = &named.name;
        run.at_most(format!("{name}_failures"), failures as f64, 0.0);
        run.at_most(format!("{name}_partition_error"), worst, cfg.partition_tolerance);
        run.holds(format!("{name}_diminishing"), all_diminish);
        run.holds(format!("{name}_replay"), replay_identical);
        run.at_most(format!("{name}_born_z"), table.max_z(), cfg.z_max);
        summaries.push(ModelSummary {
            name: name.clone(),
            histories: histories.len(),
            failures,
            worst_partition_error: worst,
            all_diminish,
            replay_identical,
            mean_events,
            frequencies: table,
        });
    }
    run.csv("frequencies.csv", &freq)?;
    run.csv("steps.csv", &steps)?;
    run.json("summary.json", &summaries)
}
