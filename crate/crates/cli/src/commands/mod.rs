use std::fmt;
use std::path::Path;

use serde_json::Value;

use crate::config::{self, CommandConfig};
use crate::error::CliError;
use crate::run::{Outcome, Run};

pub mod entropy;
pub mod eth;
pub mod friction;
pub mod qbm;
pub mod thermo;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    EntropySuite,
    ThermoEvolve,
    ThermoCarnot,
    ThermoSweep,
    QbmRun,
    FrictionCurve,
    FrictionEvolve,
    EthRun,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::EntropySuite,
        Command::ThermoEvolve,
        Command::ThermoCarnot,
        Command::ThermoSweep,
        Command::QbmRun,
        Command::FrictionCurve,
        Command::FrictionEvolve,
        Command::EthRun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::EntropySuite => "entropy-suite",
            Command::ThermoEvolve => "thermo-evolve",
            Command::ThermoCarnot => "thermo-carnot",
            Command::ThermoSweep => "thermo-sweep",
            Command::QbmRun => "qbm-run",
            Command::FrictionCurve => "friction-curve",
            Command::FrictionEvolve => "friction-evolve",
            Command::EthRun => "eth-run",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

type Body<C> = fn(&C, &mut Run) -> Result<(), CliError>;

fn execute<C: CommandConfig>(command: Command, raw: Value, out: &Path, seed: u64, body: Body<C>) -> Result<Outcome, CliError> {
    let cfg: C = config::load(raw)?;
    let resolved = serde_json::to_value(&cfg)?;
    let mut run = Run::create(out, command.name(), seed, resolved)?;
    let result = body(&cfg, &mut run);
    run.finish(result)
}

fn resolve<C: CommandConfig>(raw: Value) -> Result<Value, CliError> {
    Ok(serde_json::to_value(config::load::<C>(raw)?)?)
}

/// Parses and validates a config without running anything; returns it
/// with every default filled in.
pub fn validate(command: Command, raw: Value) -> Result<Value, CliError> {
    match command {
        Command::EntropySuite => resolve::<arrowlab::qcore::suite::SuiteConfig>(raw),
        Command::ThermoEvolve => resolve::<thermo::EvolveConfig>(raw),
        Command::ThermoCarnot => resolve::<thermo::CarnotConfig>(raw),
        Command::ThermoSweep => resolve::<thermo::SweepConfig>(raw),
        Command::QbmRun => resolve::<qbm::Config>(raw),
        Command::FrictionCurve => resolve::<friction::CurveConfig>(raw),
        Command::FrictionEvolve => resolve::<friction::EvolveConfig>(raw),
        Command::EthRun => resolve::<eth::Config>(raw),
    }
}

pub(crate) fn dispatch(command: Command, raw: Value, out: &Path, seed: u64) -> Result<Outcome, CliError> {
    match command {
        Command::EntropySuite => execute(command, raw, out, seed, entropy::run),
        Command::ThermoEvolve => execute(command, raw, out, seed, thermo::evolve),
        Command::ThermoCarnot => execute(command, raw, out, seed, thermo::carnot),
        Command::ThermoSweep => execute(command, raw, out, seed, thermo::sweep),
        Command::QbmRun => execute(command, raw, out, seed, qbm::run),
        Command::FrictionCurve => execute(command, raw, out, seed, friction::curve),
        Command::FrictionEvolve => execute(command, raw, out, seed, friction::evolve),
        Command::EthRun => execute(command, raw, out, seed, eth::run),
    }
}

/// Float defaults for `#[serde(default = ...)]`.
macro_rules! defaults {
    ($($name:ident: $ty:ty = $value:expr;)*) => {
        $(fn $name() -> $ty { $value })*
    };
}
pub(crate) use defaults;
