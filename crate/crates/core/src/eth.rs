//! Stochastic collapse histories on a finite tensor chain.
//!
//! The chain has `N` sites of local dimension `d`. At step `n` the
//! "future" algebra is the full matrix algebra of the tail, sites
//! `n..N`, of dimension `d^(N-n)`; it shrinks by a factor `d²` every step.
//! One step applies the tail unitary, restricts the state to the next tail
//! by tracing out the leading site, and looks for an actual event.
//!
//! For a full matrix algebra the centralizer of a state `ρ` is the
//! commutant of `ρ`, and the center of that commutant is generated by the
//! spectral projections of `ρ`. The event partition is therefore the
//! spectral family of the restricted state, with numerically degenerate
//! eigenvalues merged into one projection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, MatrixJson};
use crate::par::{self, Exec};
use crate::qcore::{self, DensityMatrix};
use crate::seed::{self, stream};

pub const DEFAULT_EPS_DEG: f64 = 1e-8;
pub const DEFAULT_P_MIN: f64 = 1e-6;

/// Disjoint orthogonal projections summing to the identity, with Born
/// weights `Tr(ρ π)`. Ordered by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct EventPartition {
    pub projections: Vec<CMat>,
    pub weights: Vec<f64>,
    /// Representative eigenvalue of each cluster.
    pub levels: Vec<f64>,
}

/// Deviations of a partition from its defining identities, in max-entry
/// norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionCheck {
    pub hermiticity: f64,
    pub orthogonality: f64,
    pub completeness: f64,
    pub additivity: f64,
    pub commutation: f64,
    pub decoherence: f64,
}

impl PartitionCheck {
    pub fn worst(&self) -> f64 {
        [
            self.hermiticity,
            self.orthogonality,
            self.completeness,
            self.additivity,
            self.commutation,
            self.decoherence,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

impl EventPartition {
    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    /// Checks the partition identities against the state it came from.
    pub fn check(&self, rho: &DensityMatrix) -> PartitionCheck {
        let dim = rho.dim();
        let m = rho.matrix();
        let mut hermiticity = 0.0f64;
        let mut orthogonality = 0.0f64;
        let mut commutation = 0.0f64;
        let mut sum = CMat::zeros(dim, dim);
        let mut pinched = CMat::zeros(dim, dim);
        for (a, p) in self.projections.iter().enumerate() {
            hermiticity = hermiticity.max(linalg::hermitian_deviation(p));
            for (b, q) in self.projections.iter().enumerate() {
                let prod = p * q;
                let dev = if a == b { linalg::max_abs_diff(&prod, p) } else { linalg::max_abs(&prod) };
                orthogonality = orthogonality.max(dev);
            }
            commutation = commutation.max(linalg::max_abs(&linalg::commutator(p, m)));
            sum += p;
            pinched += p * m * p;
        }
        PartitionCheck {
            hermiticity,
            orthogonality,
            completeness: linalg::max_abs_diff(&sum, &linalg::identity(dim)),
            additivity: (self.weights.iter().sum::<f64>() - 1.0).abs(),
            commutation,
            decoherence: linalg::max_abs_diff(&pinched, m),
        }
    }
}

/// Partial trace over the leading site of a tail state.
pub fn restrict_state(rho: &DensityMatrix, d: usize) -> Result<DensityMatrix> {
    if d < 2 || !rho.dim().is_multiple_of(d) {
        return Err(Error::Structural(format!("state of dimension {} is not a chain of local dimension {d}", rho.dim())));
    }
    let rest = rho.dim() / d;
    if rest == 1 {
        return Err(Error::EndOfFiltration("the tail is a single site; nothing left to restrict to".into()));
    }
    qcore::partial_trace(rho, &[d, rest], &[1])
}

/// Clustered spectral family of `rho`: eigenvalues closer than `eps_deg`
/// share a projection.
pub fn event_partition(rho: &DensityMatrix, eps_deg: f64) -> Result<EventPartition> {
    if !(eps_deg > 0.0) {
        return Err(Error::Parameter(format!("eps_deg must be positive, got {eps_deg}")));
    }
    let (vals, vecs) = linalg::eigh(rho.matrix());
    if vals.iter().any(|v| !v.is_finite()) || vecs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical(format!(
            "eigensolver returned non-finite output for a {}-dimensional state (max entry {:.3e})",
            rho.dim(),
            linalg::max_abs(rho.matrix())
        )));
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (j, v) in vals.iter().enumerate() {
        match clusters.last_mut() {
            Some(cl) if v - vals[*cl.last().unwrap()] < eps_deg => cl.push(j),
            _ => clusters.push(vec![j]),
        }
    }
    clusters.reverse();
    let mut projections = Vec::with_capacity(clusters.len());
    let mut weights = Vec::with_capacity(clusters.len());
    let mut levels = Vec::with_capacity(clusters.len());
    for cl in clusters {
        let cols = CMat::from_fn(rho.dim(), cl.len(), |i, k| vecs[(i, cl[k])]);
        let p = &cols * cols.adjoint();
        weights.push(linalg::trace_product(rho.matrix(), &p).re);
        levels.push(cl.iter().map(|&j| vals[j]).sum::<f64>() / cl.len() as f64);
        projections.push(p);
    }
    Ok(EventPartition { projections, weights, levels })
}

/// At least two branches with weight in `[p_min, 1 - p_min]`.
pub fn detect_event(partition: &EventPartition, p_min: f64) -> bool {
    partition.weights.iter().filter(|&&w| w >= p_min && w <= 1.0 - p_min).count() >= 2
}

/// Draws a branch with probability proportional to its weight, ignoring
/// branches below `p_min`, and returns the normalized projected state.
pub fn collapse_step(
    rho: &DensityMatrix,
    partition: &EventPartition,
    p_min: f64,
    seed: u64,
) -> Result<(usize, DensityMatrix)> {
    collapse_with(rho, partition, p_min, &mut seed::rng(seed))
}

fn collapse_with<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    partition: &EventPartition,
    p_min: f64,
    rng: &mut R,
) -> Result<(usize, DensityMatrix)> {
    let live: Vec<f64> = partition.weights.iter().map(|&w| if w >= p_min { w } else { 0.0 }).collect();
    let total: f64 = live.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Precondition(format!("every branch weight is below p_min = {p_min}")));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut xi = live.iter().rposition(|&w| w > 0.0).unwrap();
    for (k, &w) in live.iter().enumerate() {
        acc += w;
        if w > 0.0 && u < acc {
            xi = k;
            break;
        }
    }
    let p = &partition.projections[xi];
    let projected = p * rho.matrix() * p;
    let w = linalg::trace(&projected).re;
    Ok((xi, DensityMatrix::from_trusted(projected / c(w))))
}

/// Finite chain with its initial state and per-step tail unitaries.
#[derive(Debug, Clone)]
pub struct CoFiltrationModel {
    pub n_sites: usize,
    pub d: usize,
    pub rho0: DensityMatrix,
    /// Unitary applied at step `n`, acting on `d^(N-n)` dimensions; `None`
    /// is the identity. Length `N - 1`.
    pub step_unitaries: Vec<Option<CMat>>,
    pub eps_deg: f64,
    pub p_min: f64,
}

impl CoFiltrationModel {
    pub fn new(
        n_sites: usize,
        d: usize,
        rho0: DensityMatrix,
        step_unitaries: Vec<Option<CMat>>,
        eps_deg: f64,
        p_min: f64,
    ) -> Result<Self> {
        if n_sites < 2 || d < 2 {
            return Err(Error::Parameter(format!("need N ≥ 2 and d ≥ 2, got N = {n_sites}, d = {d}")));
        }
        let full = tail_dim(d, n_sites, 0)?;
        if rho0.dim() != full {
            return Err(Error::Structural(format!("rho0 has dimension {}, chain needs {full}", rho0.dim())));
        }
        if step_unitaries.len() != n_sites - 1 {
            return Err(Error::Structural(format!(
                "expected {} step unitaries, got {}",
                n_sites - 1,
                step_unitaries.len()
            )));
        }
        for (n, u) in step_unitaries.iter().enumerate() {
            if let Some(u) = u {
                let want = tail_dim(d, n_sites, n)?;
                if u.shape() != (want, want) {
                    return Err(Error::Structural(format!("step {n} unitary must be {want}x{want}")));
                }
                let dev = linalg::unitarity_deviation(u);
                if dev > 1e-10 {
                    return Err(Error::Validation(format!("step {n} matrix is not unitary (deviation {dev:.3e})")));
                }
            }
        }
        if !(eps_deg > 0.0) {
            return Err(Error::Parameter(format!("eps_deg must be positive, got {eps_deg}")));
        }
        if !(p_min > 0.0 && p_min < 1.0) {
            return Err(Error::Parameter(format!("p_min must lie in (0, 1), got {p_min}")));
        }
        Ok(CoFiltrationModel { n_sites, d, rho0, step_unitaries, eps_deg, p_min })
    }
}

fn tail_dim(d: usize, n_sites: usize, step: usize) -> Result<usize> {
    u32::try_from(n_sites - step)
        .ok()
        .and_then(|e| d.checked_pow(e))
        .filter(|&dim| dim <= 4096)
        .ok_or_else(|| Error::Parameter(format!("chain {d}^{n_sites} is too large")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Dimension of the tail after restriction.
    pub tail_dim: usize,
    pub weights: Vec<f64>,
    pub event: bool,
    pub branch: Option<usize>,
    pub branch_weight: Option<f64>,
    pub check: PartitionCheck,
    pub post_entropy: f64,
    pub post_purity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub final_state: DensityMatrix,
    pub failure: Option<String>,
}

impl HistoryRecord {
    pub fn first_event(&self) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.event)
    }

    /// The tail algebra dimension `tail_dim²` drops by exactly `d²` per
    /// step.
    pub fn diminishes(&self, d: usize, initial_dim: usize) -> bool {
        let mut prev = initial_dim;
        self.steps.iter().all(|s| {
            let ok = s.tail_dim * d == prev;
            prev = s.tail_dim;
            ok
        })
    }

    pub fn worst_partition_error(&self) -> f64 {
        self.steps.iter().map(|s| s.check.worst()).fold(0.0, f64::max)
    }
}

/// One branching history. Step `n` draws its branch from a generator
/// derived from `(seed, n)`.
pub fn run_history(model: &CoFiltrationModel, seed: u64) -> HistoryRecord {
    let mut rho = model.rho0.clone();
    let mut steps = Vec::with_capacity(model.n_sites - 1);
    let mut failure = None;
    for n in 0..model.n_sites - 1 {
        match history_step(model, &rho, n, seed) {
            Ok((record, next)) => {
                steps.push(record);
                rho = next;
            }
            Err(e) => {
                failure = Some(format!("step {n}: {e}"));
                break;
            }
        }
    }
    HistoryRecord { seed, steps, final_state: rho, failure }
}

fn history_step(model: &CoFiltrationModel, rho: &DensityMatrix, n: usize, seed: u64) -> Result<(StepRecord, DensityMatrix)> {
    let evolved = match &model.step_unitaries[n] {
        Some(u) => rho.conjugated(u),
        None => rho.clone(),
    };
    let tail = restrict_state(&evolved, model.d)?;
    let partition = event_partition(&tail, model.eps_deg)?;
    let check = partition.check(&tail);
    let event = detect_event(&partition, model.p_min);
    let (branch, next) = if event {
        let mut rng = seed::derived_rng(seed, stream::ETH_STEPS, n as u64);
        let (xi, post) = collapse_with(&tail, &partition, model.p_min, &mut rng)?;
        (Some(xi), post)
    } else {
        (None, tail)
    };
    let record = StepRecord {
        step: n,
        tail_dim: next.dim(),
        branch_weight: branch.map(|xi| partition.weights[xi]),
        weights: partition.weights,
        event,
        branch,
        check,
        post_entropy: qcore::von_neumann_entropy(&next),
        post_purity: next.purity(),
    };
    Ok((record, next))
}

/// Runs `n_runs` histories with seeds derived from `master_seed`, in run
/// order.
pub fn run_histories(model: &CoFiltrationModel, n_runs: usize, master_seed: u64, exec: Exec) -> Vec<HistoryRecord> {
    par::map_indexed(exec, n_runs, |r| {
        run_history(model, seed::derive(master_seed, stream::ETH_HISTORIES, r as u64))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub branch: usize,
    pub born_weight: f64,
    pub count: usize,
    pub frequency: f64,
    pub sigma: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub n_runs: usize,
    pub master_seed: u64,
    /// Step at which the first event happens (identical in every run).
    pub event_step: Option<usize>,
    pub rows: Vec<BranchRow>,
    pub note: Option<String>,
}

impl FrequencyTable {
    pub fn max_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z_score).fold(0.0, f64::max)
    }
}

/// Empirical branch frequencies at the first event against the Born
/// weights, with binomial standard errors `sqrt(p(1-p)/n)`.
///
/// Before the first collapse the evolution is deterministic, so every
/// history meets the same first partition.
pub fn frequency_report(model: &CoFiltrationModel, n_runs: usize, master_seed: u64, exec: Exec) -> Result<FrequencyTable> {
    if n_runs < 100 {
        return Err(Error::Parameter(format!("n_runs must be at least 100, got {n_runs}")));
    }
    let histories = run_histories(model, n_runs, master_seed, exec);
    frequency_table(model, &histories, master_seed)
}

/// Frequency table for histories that were already run.
pub fn frequency_table(model: &CoFiltrationModel, histories: &[HistoryRecord], master_seed: u64) -> Result<FrequencyTable> {
    let n_runs = histories.len();
    if n_runs < 100 {
        return Err(Error::Parameter(format!("n_runs must be at least 100, got {n_runs}")));
    }
    if let Some(failed) = histories.iter().find_map(|h| h.failure.clone()) {
        return Err(Error::Numerical(format!("history failed: {failed}")));
    }
    let Some(first) = histories[0].first_event() else {
        return Ok(FrequencyTable {
            n_runs,
            master_seed,
            event_step: None,
            rows: Vec::new(),
            note: Some("no actual event occurred in any history".into()),
        });
    };
    let weights = first.weights.clone();
    let step = first.step;
    let live_total: f64 = weights.iter().filter(|&&w| w >= model.p_min).sum();
    let mut counts = vec![0usize; weights.len()];
    for h in histories {
        let ev = h.steps.get(step).filter(|s| s.event).ok_or_else(|| {
            Error::Numerical(format!("history {} has no event at step {step}", h.seed))
        })?;
        counts[ev.branch.expect("event steps carry a branch")] += 1;
    }
    let n = n_runs as f64;
    let rows = weights
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(branch, (&w, &count))| {
            let p = if w >= model.p_min { w / live_total } else { 0.0 };
            let frequency = count as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            let z_score = if sigma > 0.0 {
                (frequency - p).abs() / sigma
            } else if frequency == p {
                0.0
            } else {
                f64::INFINITY
            };
            BranchRow { branch, born_weight: p, count, frequency, sigma, z_score }
        })
        .collect();
    Ok(FrequencyTable { n_runs, master_seed, event_step: Some(step), rows, note: None })
}

/// Initial-state generators for configured chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// `⊗ diag(probs)` on every site.
    ProductMixed { probs: Vec<f64> },
    /// `|0…0⟩`.
    ProductPure,
    /// Sites `j` and `N-1-j` share `Σ_i sqrt(w_i)|ii⟩`; an odd middle site
    /// is `|0⟩`.
    NestedPairs { weights: Vec<f64> },
    Explicit { matrix: MatrixJson },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsSpec {
    Identity,
    /// Independent Haar unitaries on every tail.
    RandomHaar { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub d: usize,
    pub state: StateSpec,
    pub dynamics: DynamicsSpec,
    #[serde(default = "default_eps_deg")]
    pub eps_deg: f64,
    #[serde(default = "default_p_min")]
    pub p_min: f64,
}

fn default_eps_deg() -> f64 {
    DEFAULT_EPS_DEG
}

fn default_p_min() -> f64 {
    DEFAULT_P_MIN
}

fn check_probs(p: &[f64], d: usize) -> Result<()> {
    if p.len() != d || p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("need {d} nonnegative weights summing to 1, got {p:?}")));
    }
    Ok(())
}

impl ChainConfig {
    pub fn build(&self) -> Result<CoFiltrationModel> {
        let (n, d) = (self.n_sites, self.d);
        if n < 2 || d < 2 {
            return Err(Error::Parameter(format!("need N ≥ 2 and d ≥ 2, got N = {n}, d = {d}")));
        }
        let full = tail_dim(d, n, 0)?;
        let rho0 = match &self.state {
            StateSpec::ProductMixed { probs } => {
                check_probs(probs, d)?;
                let site = linalg::diag(probs);
                let m = (1..n).fold(site.clone(), |acc, _| linalg::kron(&acc, &site));
                DensityMatrix::new(m)?
            }
            StateSpec::ProductPure => {
                let mut psi = vec![c(0.0); full];
                psi[0] = c(1.0);
                DensityMatrix::pure(&psi)?
            }
            StateSpec::NestedPairs { weights } => {
                check_probs(weights, d)?;
                DensityMatrix::pure(&nested_pairs(n, d, weights))?
            }
            StateSpec::Explicit { matrix } => DensityMatrix::new(matrix.to_matrix()?)?,
        };
        let step_unitaries = match &self.dynamics {
            DynamicsSpec::Identity => vec![None; n - 1],
            DynamicsSpec::RandomHaar { seed } => {
                let mut rng = seed::rng(*seed);
                (0..n - 1)
                    .map(|k| Ok(Some(linalg::random_unitary(tail_dim(d, n, k)?, &mut rng))))
                    .collect::<Result<_>>()?
            }
        };
        CoFiltrationModel::new(n, d, rho0, step_unitaries, self.eps_deg, self.p_min)
    }
}

fn nested_pairs(n: usize, d: usize, w: &[f64]) -> Vec<linalg::C64> {
    let full = d.pow(n as u32);
    (0..full)
        .map(|idx| {
            let mut digits = vec![0usize; n];
            let mut rem = idx;
            for k in (0..n).rev() {
                digits[k] = rem % d;
                rem /= d;
            }
            let mut amp = 1.0;
            for j in 0..n / 2 {
                if digits[j] != digits[n - 1 - j] {
                    return c(0.0);
                }
                amp *= w[digits[j]].sqrt();
            }
            if n % 2 == 1 && digits[n / 2] != 0 {
                return c(0.0);
            }
            c(amp)
        })
        .collect()
}

/// The chains used by the acceptance run.
pub fn bundled_models() -> Vec<(&'static str, ChainConfig)> {
    let base = |n_sites, state, dynamics| ChainConfig {
        n_sites,
        d: 2,
        state,
        dynamics,
        eps_deg: DEFAULT_EPS_DEG,
        p_min: DEFAULT_P_MIN,
    };
    vec![
        ("mixed_pair", base(2, StateSpec::ProductMixed { probs: vec![0.7, 0.3] }, DynamicsSpec::Identity)),
        ("mixed_product", base(4, StateSpec::ProductMixed { probs: vec![0.7, 0.3] }, DynamicsSpec::Identity)),
        ("nested_pairs", base(6, StateSpec::NestedPairs { weights: vec![0.7, 0.3] }, DynamicsSpec::Identity)),
        ("scrambled_pure", base(5, StateSpec::ProductPure, DynamicsSpec::RandomHaar { seed: 20_240_611 })),
    ]
}
