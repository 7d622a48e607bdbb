//! Seeded random ensembles probing the entropy inequalities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::*;
use crate::par::{self, Exec};
use crate::seed::{derived_rng, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Instances per inequality.
    pub instances: usize,
    pub klein_max_dim: usize,
    pub relative_max_dim: usize,
    pub ssa_dims: Vec<[usize; 3]>,
    pub channel_max_dim: usize,
    pub channel_max_kraus: usize,
    pub convexity_weights: Vec<f64>,
    pub exec: Exec,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            instances: 1000,
            klein_max_dim: 16,
            relative_max_dim: 6,
            ssa_dims: vec![[2, 2, 2], [2, 3, 2]],
            channel_max_dim: 4,
            channel_max_kraus: 4,
            convexity_weights: vec![0.25, 0.5, 0.75],
            exec: Exec::Parallel,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances == 0 {
            return Err(Error::Parameter("instances must be positive".into()));
        }
        if self.klein_max_dim < 1 || self.relative_max_dim < 2 || self.channel_max_dim < 2 {
            return Err(Error::Parameter("dimension bounds too small".into()));
        }
        if self.channel_max_kraus == 0 {
            return Err(Error::Parameter("channel_max_kraus must be positive".into()));
        }
        if self.ssa_dims.is_empty() || self.ssa_dims.iter().flatten().any(|&d| d == 0) {
            return Err(Error::Parameter("ssa_dims must be nonempty with positive factors".into()));
        }
        if self.convexity_weights.is_empty() || self.convexity_weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Parameter("convexity weights must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Worst case observed for one inequality over the ensemble.
///
/// `worst` is the most adverse value in the direction of the inequality:
/// the minimum for lower bounds, the maximum for the joint-convexity excess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub evaluated: usize,
    pub skipped: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<CheckSummary>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckSummary> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const KLEIN: u64 = 0;
const RELATIVE: u64 = 1;
const SSA: u64 = 2;
const MONOTONE: u64 = 3;
const CONVEX: u64 = 4;

fn instance_rng(master: u64, check: u64, i: usize) -> rand_chacha::ChaCha8Rng {
    derived_rng(master, stream::ENTROPY_SUITE, (i as u64) * 8 + check)
}

fn full_rank<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    random_density_matrix_with(dim, dim, rng).expect("valid dimensions")
}

fn summarize(name: &str, values: Vec<Result<Option<f64>>>, tolerance: f64, upper: bool) -> Result<CheckSummary> {
    let mut evaluated = 0;
    let mut skipped = 0;
    let mut worst = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
    for v in values {
        match v? {
            Some(x) => {
                evaluated += 1;
                worst = if upper { worst.max(x) } else { worst.min(x) };
            }
            None => skipped += 1,
        }
    }
    let passed = evaluated > 0 && if upper { worst <= tolerance } else { worst >= -tolerance };
    Ok(CheckSummary { name: name.into(), evaluated, skipped, worst, tolerance, passed })
}

/// Runs the five inequality probes; every instance draws from its own
/// derived generator so the report does not depend on `exec`.
pub fn run_suite(cfg: &SuiteConfig, seed: u64) -> Result<SuiteReport> {
    cfg.validate()?;
    let n = cfg.instances;

    let klein = par::map_indexed(cfg.exec, n, |i| {
        let mut rng = instance_rng(seed, KLEIN, i);
        let dim = rng.random_range(1..=cfg.klein_max_dim);
        if i % 2 == 0 {
            let a = full_rank(dim, &mut rng).into_matrix();
            let b = full_rank(dim, &mut rng).into_matrix();
            klein_gap(&a, &b, ConvexFn::XLogX).map(Some)
        } else {
            let a = linalg::random_hermitian(dim, 1.0, &mut rng);
            let b = linalg::random_hermitian(dim, 1.0, &mut rng);
            klein_gap(&a, &b, ConvexFn::Square).map(Some)
        }
    });

    let relative = par::map_indexed(cfg.exec, n, |i| {
        let mut rng = instance_rng(seed, RELATIVE, i);
        let dim = rng.random_range(2..=cfg.relative_max_dim);
        let sigma = random_density_matrix_with(dim, rng.random_range(1..=dim), &mut rng)?;
        // A quarter of the references are rank deficient, exercising the
        // support test.
        let omega_rank = if i % 4 == 3 { rng.random_range(1..=dim) } else { dim };
        let omega = random_density_matrix_with(dim, omega_rank, &mut rng)?;
        Ok(relative_entropy(&sigma, &omega)?.finite())
    });

    let ssa = par::map_indexed(cfg.exec, n, |i| {
        let mut rng = instance_rng(seed, SSA, i);
        let dims = cfg.ssa_dims[i % cfg.ssa_dims.len()];
        let total: usize = dims.iter().product();
        let rho = random_density_matrix_with(total, rng.random_range(1..=total), &mut rng)?;
        ssa_gap(&TripartiteState::new(rho, dims)?).map(Some)
    });

    let monotone = par::map_indexed(cfg.exec, n, |i| {
        let mut rng = instance_rng(seed, MONOTONE, i);
        let d_in = rng.random_range(2..=cfg.channel_max_dim);
        let d_out = rng.random_range(2..=cfg.channel_max_dim);
        let min_kraus = d_in.div_ceil(d_out);
        let n_kraus = rng.random_range(min_kraus..=cfg.channel_max_kraus.max(min_kraus));
        let ch = QuantumChannel::random(d_in, d_out, n_kraus, &mut rng)?;
        let sigma = full_rank(d_in, &mut rng);
        let omega = full_rank(d_in, &mut rng);
        Ok(match monotonicity_gap(&sigma, &omega, &ch)? {
            Monotonicity::Gap(g) => Some(g),
            Monotonicity::Incomparable => None,
        })
    });

    let convex = par::map_indexed(cfg.exec, n, |i| {
        let mut rng = instance_rng(seed, CONVEX, i);
        let dim = rng.random_range(2..=cfg.channel_max_dim);
        let lambda = cfg.convexity_weights[i % cfg.convexity_weights.len()];
        let s1 = full_rank(dim, &mut rng);
        let w1 = full_rank(dim, &mut rng);
        let s2 = full_rank(dim, &mut rng);
        let w2 = full_rank(dim, &mut rng);
        joint_convexity_excess((&s1, &w1), (&s2, &w2), lambda)
    });

    Ok(SuiteReport {
        seed,
        checks: vec![
            summarize("klein", klein, 1e-10, false)?,
            summarize("relative_entropy", relative, 1e-10, false)?,
            summarize("strong_subadditivity", ssa, 1e-9, false)?,
            summarize("monotonicity", monotone, 1e-9, false)?,
            summarize("joint_convexity", convex, 1e-9, true)?,
        ],
    })
}
