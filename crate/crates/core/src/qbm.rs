//! Kinetic-regime Brownian motion of a heavy tracer on a lattice.
//!
//! The tracer's reduced dynamics is a continuous-time Markov jump process
//! on (lattice momentum, internal level). Jumps transfer momentum drawn
//! from a Gaussian bump on the torus and may flip the level; a Metropolis
//! factor enforces detailed balance at the bath temperature. Position is
//! the time integral of the band velocity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::seed::{self, stream};

/// A neighbouring momentum with relative kernel weight below this is
/// treated as unreachable.
pub const CONNECTIVITY_FLOOR: f64 = 1e-12;
/// Largest state space for which the dense generator is built.
pub const DENSE_MAX_STATES: usize = 2048;
pub const MIN_PATHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticModel {
    /// Spatial dimension, 1 to 3.
    pub d: usize,
    /// Momentum grid points per axis on `[−π, π)`.
    pub n_p: usize,
    pub nu: f64,
    /// Base mass; the tracer mass is `M0 / ν²`.
    #[serde(rename = "M0", alias = "m0")]
    pub m0: f64,
    pub beta: f64,
    /// Level gap: the internal level contributes `±splitting`.
    pub splitting: f64,
    /// Momentum-transfer scale of the jump kernel, in lattice momentum.
    pub kernel_width: f64,
}

impl KineticModel {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Validation(format!("d must be 1, 2 or 3, got {}", self.d)));
        }
        if self.n_p < 8 || !self.n_p.is_multiple_of(2) {
            return Err(Error::Validation(format!("n_p must be even and at least 8, got {}", self.n_p)));
        }
        for (name, v) in [("nu", self.nu), ("M0", self.m0), ("beta", self.beta), ("kernel_width", self.kernel_width)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !self.splitting.is_finite() {
            return Err(Error::Validation("splitting must be finite".into()));
        }
        if self.n_p.checked_pow(self.d as u32).is_none_or(|n| n > 1 << 22) {
            return Err(Error::Parameter("momentum grid is too large".into()));
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        self.m0 / (self.nu * self.nu)
    }

    pub fn n_momenta(&self) -> usize {
        self.n_p.pow(self.d as u32)
    }

    pub fn n_states(&self) -> usize {
        2 * self.n_momenta()
    }

    /// Lattice momentum of grid index `i` on one axis.
    pub fn momentum(&self, i: usize) -> f64 {
        -PI + 2.0 * PI * i as f64 / self.n_p as f64
    }

    /// Per-axis momentum indices and level (`±1`) of a packed state.
    pub fn decode(&self, s: usize) -> ([usize; 3], i8) {
        let sigma = if s % 2 == 1 { 1 } else { -1 };
        let mut rest = s / 2;
        let mut idx = [0; 3];
        for slot in idx.iter_mut().take(self.d) {
            *slot = rest % self.n_p;
            rest /= self.n_p;
        }
        (idx, sigma)
    }

    pub fn encode(&self, idx: [usize; 3], sigma: i8) -> usize {
        let mut flat = 0;
        for a in (0..self.d).rev() {
            flat = flat * self.n_p + idx[a];
        }
        2 * flat + usize::from(sigma > 0)
    }

    /// Band energy `(1/M) Σ (1 − cos p_a)` plus the level energy.
    pub fn energy(&self, s: usize) -> f64 {
        let (idx, sigma) = self.decode(s);
        let band: f64 = idx[..self.d].iter().map(|&i| 1.0 - self.momentum(i).cos()).sum();
        band / self.mass() + sigma as f64 * self.splitting
    }

    /// Group velocity `(1/M) sin p_a`; unused axes are zero.
    pub fn velocity(&self, s: usize) -> [f64; 3] {
        let (idx, _) = self.decode(s);
        let mut v = [0.0; 3];
        for a in 0..self.d {
            v[a] = self.momentum(idx[a]).sin() / self.mass();
        }
        v
    }
}

/// The reference kinetic model: a three-dimensional tracer on an `8³`
/// momentum grid with a broad transfer kernel.
pub fn bundled_model_k() -> KineticModel {
    KineticModel { d: 3, n_p: 8, nu: 0.3, m0: 1.0, beta: 1.0, splitting: 0.5, kernel_width: 1.5 }
}

/// Jump rates `ν² κ(p′ − p) min(1, e^{−βΔE})` between all pairs of
/// states, with `κ` a normalized separable Gaussian on the momentum torus.
#[derive(Debug, Clone)]
pub struct JumpKernel {
    model: KineticModel,
    /// One-axis kernel over index offsets, summing to one.
    axis: Vec<f64>,
    axis_sampler: WeightedIndex<f64>,
    energy: Vec<f64>,
    gibbs: Vec<f64>,
}

pub fn build_kernel(model: &KineticModel) -> Result<JumpKernel> {
    model.validate()?;
    let n = model.n_p;
    let w = model.kernel_width;
    let mut axis: Vec<f64> = (0..n)
        .map(|j| {
            let q = 2.0 * PI * j.min(n - j) as f64 / n as f64;
            (-q * q / (2.0 * w * w)).exp()
        })
        .collect();
    if axis[1] < CONNECTIVITY_FLOOR {
        return Err(Error::Validation(format!(
            "kernel_width {w} is too small to connect neighbouring momenta on a grid of {n}"
        )));
    }
    let norm: f64 = axis.iter().sum();
    axis.iter_mut().for_each(|k| *k /= norm);
    let axis_sampler = WeightedIndex::new(&axis).map_err(|e| Error::Numerical(e.to_string()))?;
    let energy: Vec<f64> = (0..model.n_states()).map(|s| model.energy(s)).collect();
    let e_min = energy.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut gibbs: Vec<f64> = energy.iter().map(|e| (-model.beta * (e - e_min)).exp()).collect();
    let z: f64 = gibbs.iter().sum();
    gibbs.iter_mut().for_each(|g| *g /= z);
    Ok(JumpKernel { model: model.clone(), axis, axis_sampler, energy, gibbs })
}

impl JumpKernel {
    pub fn model(&self) -> &KineticModel {
        &self.model
    }

    pub fn n_states(&self) -> usize {
        self.energy.len()
    }

    pub fn gibbs(&self) -> &[f64] {
        &self.gibbs
    }

    /// Kernel weight of the momentum transfer between two states.
    fn kappa(&self, from: usize, to: usize) -> f64 {
        let (a, _) = self.model.decode(from);
        let (b, _) = self.model.decode(to);
        let n = self.model.n_p;
        (0..self.model.d).map(|k| self.axis[(b[k] + n - a[k]) % n]).product()
    }

    fn metropolis(&self, from: usize, to: usize) -> f64 {
        (-self.model.beta * (self.energy[to] - self.energy[from])).exp().min(1.0)
    }

    /// Rate of the jump `from → to`; zero on the diagonal.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        self.model.nu * self.model.nu * self.kappa(from, to) * self.metropolis(from, to)
    }

    /// All jumps out of `from` with their rates.
    pub fn transitions(&self, from: usize) -> Vec<(usize, f64)> {
        (0..self.n_states()).filter(|&to| to != from).map(|to| (to, self.rate(from, to))).collect()
    }

    pub fn exit_rate(&self, from: usize) -> f64 {
        (0..self.n_states()).map(|to| self.rate(from, to)).sum()
    }

    /// Rate at which jumps are proposed: `ν²` per level choice.
    fn attempt_rate(&self) -> f64 {
        2.0 * self.model.nu * self.model.nu
    }

    /// Mean waiting time between jumps in the stationary state.
    pub fn mean_waiting_time(&self) -> f64 {
        let mean_exit: f64 = (0..self.n_states()).map(|s| self.gibbs[s] * self.exit_rate(s)).sum();
        1.0 / mean_exit
    }

    /// Largest relative violation of `π(s) r(s→s′) = π(s′) r(s′→s)`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let n = self.n_states();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                let fwd = self.gibbs[a] * self.rate(a, b);
                let bwd = self.gibbs[b] * self.rate(b, a);
                let scale = fwd.abs().max(bwd.abs());
                if scale > 0.0 {
                    worst = worst.max((fwd - bwd).abs() / scale);
                }
            }
        }
        worst
    }

    /// Largest `|Σ_s π(s) r(s→s′) − π(s′) r_exit(s′)|` over target states.
    pub fn stationarity_residual(&self) -> f64 {
        let n = self.n_states();
        (0..n)
            .map(|t| {
                let inflow: f64 = (0..n).map(|s| self.gibbs[s] * self.rate(s, t)).sum();
                (inflow - self.gibbs[t] * self.exit_rate(t)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Dense generator `L` with `L[s, s′] = r(s→s′)` and rows summing to
    /// zero.
    pub fn generator(&self) -> Result<DMatrix<f64>> {
        let n = self.n_states();
        if n > DENSE_MAX_STATES {
            return Err(Error::Parameter(format!("{n} states exceed the dense limit of {DENSE_MAX_STATES}")));
        }
        let mut l = DMatrix::from_fn(n, n, |a, b| self.rate(a, b));
        for a in 0..n {
            let exit: f64 = l.row(a).sum();
            l[(a, a)] = -exit;
        }
        Ok(l)
    }

    /// Gibbs average of the speed `|∇ε(p)|`.
    pub fn mean_speed(&self) -> f64 {
        (0..self.n_states()).map(|s| self.gibbs[s] * norm(self.model.velocity(s))).sum()
    }

    fn sample_gibbs<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (s, p) in self.gibbs.iter().enumerate() {
            acc += p;
            if u < acc {
                return s;
            }
        }
        self.n_states() - 1
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub seed: u64,
    pub initial: usize,
    /// Accepted jumps as (time, new state).
    pub jumps: Vec<(f64, usize)>,
    /// Position at each observation time.
    pub positions: Vec<[f64; 3]>,
    /// State at each observation time.
    pub states: Vec<usize>,
}

/// One path started from a Gibbs-distributed state.
pub fn sample_trajectory(kernel: &JumpKernel, t_max: f64, obs_times: &[f64], seed: u64) -> Result<Path> {
    let mut rng = seed::rng(seed);
    let initial = kernel.sample_gibbs(&mut rng);
    run_path(kernel, initial, t_max, obs_times, seed, &mut rng)
}

/// One path from a given initial state.
pub fn sample_trajectory_from(kernel: &JumpKernel, initial: usize, t_max: f64, obs_times: &[f64], seed: u64) -> Result<Path> {
    if initial >= kernel.n_states() {
        return Err(Error::Parameter(format!("state {initial} out of range")));
    }
    run_path(kernel, initial, t_max, obs_times, seed, &mut seed::rng(seed))
}

fn run_path<R: Rng>(kernel: &JumpKernel, initial: usize, t_max: f64, obs: &[f64], seed: u64, rng: &mut R) -> Result<Path> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Parameter(format!("t_max must be positive, got {t_max}")));
    }
    if obs.windows(2).any(|w| w[1] < w[0]) || obs.first().is_some_and(|&t| t < 0.0) || obs.last().is_some_and(|&t| t > t_max) {
        return Err(Error::Parameter("observation times must be sorted inside [0, t_max]".into()));
    }
    let model = &kernel.model;
    let rate = kernel.attempt_rate();
    let mut state = initial;
    let mut v = model.velocity(state);
    let mut x = [0.0; 3];
    let mut t = 0.0;
    let mut jumps = Vec::new();
    let mut positions = Vec::with_capacity(obs.len());
    let mut states = Vec::with_capacity(obs.len());
    let mut next_obs = 0;
    loop {
        let wait = -(1.0 - rng.random::<f64>()).ln() / rate;
        let t_next = t + wait;
        while next_obs < obs.len() && obs[next_obs] <= t_next.min(t_max) {
            let dt = obs[next_obs] - t;
            positions.push([x[0] + v[0] * dt, x[1] + v[1] * dt, x[2] + v[2] * dt]);
            states.push(state);
            next_obs += 1;
        }
        if t_next > t_max {
            break;
        }
        for a in 0..3 {
            x[a] += v[a] * wait;
        }
        t = t_next;
        let (mut idx, _) = model.decode(state);
        for slot in idx.iter_mut().take(model.d) {
            *slot = (*slot + kernel.axis_sampler.sample(rng)) % model.n_p;
        }
        let new_sigma = if rng.random::<bool>() { 1 } else { -1 };
        let proposal = model.encode(idx, new_sigma);
        let accept = kernel.metropolis(state, proposal);
        let u: f64 = rng.random();
        if proposal != state && (accept >= 1.0 || u < accept) {
            state = proposal;
            v = model.velocity(state);
            jumps.push((t, state));
        }
    }
    Ok(Path { seed, initial, jumps, positions, states })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub master_seed: u64,
    pub t_max: f64,
    pub times: Vec<f64>,
    pub paths: Vec<Path>,
    pub mean_waiting_time: f64,
}

impl PathEnsemble {
    pub fn seeds(&self) -> Vec<u64> {
        self.paths.iter().map(|p| p.seed).collect()
    }

    /// `⟨|X(t)|²⟩` over paths at each observation time.
    pub fn msd(&self) -> Vec<f64> {
        msd_of(&self.paths, (0..self.paths.len()).collect::<Vec<_>>().as_slice(), 0..self.times.len())
    }

    /// Ensemble mean of the speed over paths and observation times.
    pub fn mean_speed(&self, kernel: &JumpKernel) -> f64 {
        let total: f64 = self.paths.iter().flat_map(|p| p.states.iter()).map(|&s| norm(kernel.model.velocity(s))).sum();
        total / (self.paths.len() * self.times.len()) as f64
    }
}

fn msd_of(paths: &[Path], picks: &[usize], range: std::ops::Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; range.len()];
    for &i in picks {
        for (o, x) in out.iter_mut().zip(&paths[i].positions[range.clone()]) {
            *o += x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        }
    }
    let n = picks.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// `n_paths` Gibbs-started paths observed at `n_obs + 1` equally spaced
/// times in `[0, t_max]`.
pub fn sample_ensemble(kernel: &JumpKernel, n_paths: usize, t_max: f64, n_obs: usize, master: u64, exec: Exec) -> Result<PathEnsemble> {
    if n_paths == 0 || n_obs == 0 {
        return Err(Error::Parameter("n_paths and n_obs must be positive".into()));
    }
    let times: Vec<f64> = (0..=n_obs).map(|k| t_max * k as f64 / n_obs as f64).collect();
    let paths = par::map_indexed(exec, n_paths, |i| {
        sample_trajectory(kernel, t_max, &times, seed::derive(master, stream::QBM_PATHS, i as u64))
    });
    Ok(PathEnsemble {
        master_seed: master,
        t_max,
        times,
        paths: paths.into_iter().collect::<Result<_>>()?,
        mean_waiting_time: kernel.mean_waiting_time(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdFit {
    pub window: (f64, f64),
    /// Slope of the through-origin fit `MSD = D t`.
    pub d_hat: f64,
    /// Bootstrap 95% percentile interval of `d_hat`.
    pub slope_ci: (f64, f64),
    pub r2: f64,
    /// Log-log slope of the MSD over the window.
    pub exponent: f64,
    /// MSD grows like `t²` rather than `t`.
    pub ballistic: bool,
    pub warning: Option<String>,
}

fn fit_through_origin(t: &[f64], m: &[f64]) -> (f64, f64) {
    let d = t.iter().zip(m).map(|(t, m)| t * m).sum::<f64>() / t.iter().map(|t| t * t).sum::<f64>();
    let mean = m.iter().sum::<f64>() / m.len() as f64;
    let ss_res: f64 = t.iter().zip(m).map(|(t, m)| (m - d * t).powi(2)).sum();
    let ss_tot: f64 = m.iter().map(|m| (m - mean).powi(2)).sum();
    (d, if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN })
}

fn loglog_slope(t: &[f64], m: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t.iter().zip(m).filter(|(t, m)| **t > 0.0 && **m > 0.0).map(|(t, m)| (t.ln(), m.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Fits the mean squared displacement on `window` and bootstraps the
/// slope over paths.
pub fn msd_estimate(ens: &PathEnsemble, window: (f64, f64), n_boot: usize, exec: Exec) -> Result<MsdFit> {
    if ens.paths.len() < MIN_PATHS {
        return Err(Error::Precondition(format!("need at least {MIN_PATHS} paths, got {}", ens.paths.len())));
    }
    let (t_a, t_b) = window;
    if !(0.0 <= t_a && t_a < t_b && t_b <= ens.t_max * (1.0 + 1e-12)) {
        return Err(Error::Parameter(format!("window [{t_a}, {t_b}] not inside [0, {}]", ens.t_max)));
    }
    let lo = ens.times.partition_point(|&t| t < t_a - 1e-12 * ens.t_max);
    let hi = ens.times.partition_point(|&t| t <= t_b + 1e-12 * ens.t_max);
    if hi < lo + 3 {
        return Err(Error::Parameter("fewer than three observation times in the window".into()));
    }
    let t = &ens.times[lo..hi];
    let all: Vec<usize> = (0..ens.paths.len()).collect();
    let m = msd_of(&ens.paths, &all, lo..hi);
    let (d_hat, r2) = fit_through_origin(t, &m);
    let exponent = loglog_slope(t, &m);

    let boot = par::map_indexed(exec, n_boot, |b| {
        let mut rng = seed::rng(seed::derive(ens.master_seed, stream::QBM_BOOTSTRAP, b as u64));
        let picks: Vec<usize> = (0..all.len()).map(|_| rng.random_range(0..all.len())).collect();
        fit_through_origin(t, &msd_of(&ens.paths, &picks, lo..hi)).0
    });
    let slope_ci = if boot.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let mut sorted = boot;
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round()) as usize];
        (q(0.025), q(0.975))
    };
    let warning = (t_b - t_a < 10.0 * ens.mean_waiting_time).then(|| {
        format!("pre-asymptotic: window of {:.3} is shorter than 10 mean waiting times ({:.3})", t_b - t_a, ens.mean_waiting_time)
    });
    Ok(MsdFit { window: (t[0], t[t.len() - 1]), d_hat, slope_ci, r2, exponent, ballistic: exponent > 1.5, warning })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenKubo {
    pub taus: Vec<f64>,
    /// Velocity autocorrelation `⟨Ẋ(τ)·Ẋ(0)⟩` in the stationary state.
    pub c: Vec<f64>,
    /// `∫₀^τmax C`.
    pub integral: f64,
    /// Exponential estimate of `∫_τmax^∞ C` from the last two table points.
    pub tail: f64,
    /// Long-time slope of the mean squared displacement, `2 ∫₀^∞ C`.
    pub d_gk: f64,
}

/// Velocity autocorrelation from the spectral decomposition of the
/// symmetrized generator; no sampling.
pub fn green_kubo(kernel: &JumpKernel, tau_max: f64, n_tau: usize) -> Result<GreenKubo> {
    if !(tau_max > 0.0) || n_tau < 2 {
        return Err(Error::Parameter("tau_max must be positive and n_tau at least 2".into()));
    }
    let l = kernel.generator()?;
    let n = l.nrows();
    let pi = &kernel.gibbs;
    let sq: Vec<f64> = pi.iter().map(|p| p.sqrt()).collect();
    let mut s = DMatrix::from_fn(n, n, |a, b| sq[a] * l[(a, b)] / sq[b]);
    s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut modes = Vec::new();
    for k in 0..n {
        let lambda = eig.eigenvalues[k];
        if lambda.abs() <= 1e-12 * scale {
            continue;
        }
        let phi = eig.eigenvectors.column(k);
        let weight: f64 = (0..kernel.model.d)
            .map(|a| {
                let u = DVector::from_fn(n, |s, _| sq[s] * kernel.model.velocity(s)[a]);
                phi.dot(&u).powi(2)
            })
            .sum();
        modes.push((lambda, weight));
    }
    let taus: Vec<f64> = (0..n_tau).map(|k| tau_max * k as f64 / (n_tau - 1) as f64).collect();
    let c: Vec<f64> = taus.iter().map(|&t| modes.iter().map(|(l, w)| w * (l * t).exp()).sum()).collect();
    let integral: f64 = modes.iter().map(|(l, w)| w * (1.0 - (l * tau_max).exp()) / -l).sum();
    let (c1, c2) = (c[n_tau - 2], c[n_tau - 1]);
    let tail = if c2.abs() <= 1e-300 {
        0.0
    } else if c2 > 0.0 && c1 > c2 {
        c2 * (taus[n_tau - 1] - taus[n_tau - 2]) / (c1 / c2).ln()
    } else {
        return Err(Error::Parameter("tau_max too small: correlation has not entered its exponential tail".into()));
    };
    if tail.abs() > 0.05 * (integral + tail).abs() {
        return Err(Error::Parameter(format!(
            "tau_max too small: tail estimate {tail:.3e} exceeds 5% of the integral {:.3e}",
            integral + tail
        )));
    }
    Ok(GreenKubo { taus, c, integral, tail, d_gk: 2.0 * (integral + tail) })
}
