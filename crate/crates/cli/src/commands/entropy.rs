use arrowlab::qcore::suite::{self, SuiteConfig};

use crate::config::CommandConfig;
use crate::error::{CliError, During};
use crate::output::Table;
use crate::run::Run;

impl CommandConfig for SuiteConfig {
    fn validate(&self) -> Result<(), CliError> {
        SuiteConfig::validate(self).map_err(|e| CliError::invalid("", e))
    }
}

pub fn run(cfg: &SuiteConfig, run: &mut Run) -> Result<(), CliError> {
    let report = suite::run_suite(cfg, run.seed()).during("qcore", "run_suite")?;
    let mut table = Table::new(&["check", "evaluated", "skipped", "worst", "tolerance", "passed"]);
    for c in &report.checks {
        table.push([
            ("check", c.name.as_str().into()),
            ("evaluated", c.evaluated.into()),
            ("skipped", c.skipped.into()),
            ("worst", c.worst.into()),
            ("tolerance", c.tolerance.into()),
            ("passed", c.passed.into()),
        ]);
        run.check(c.name.as_str(), c.worst, format!("within {:e} of the bound", c.tolerance), c.passed);
    }
    run.csv("inequalities.csv", &table)?;
    run.json("summary.json", &report)
}
