//! Two finite reservoirs joined by a small contact system.
//!
//! The full space is `H1 ⊗ C ⊗ H2`. Reservoir Hamiltonians act on their own
//! factor; the contact Hamiltonian `HC(t)` is a sum of product terms
//! `coeff · profile(t) · A ⊗ K ⊗ B` and carries both the contact's own
//! energy and its couplings to the reservoirs.

pub mod bundled;
mod dynamics;
mod experiments;

pub use dynamics::*;
pub use experiments::*;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, MatrixJson};
use crate::qcore::DensityMatrix;
use crate::seed;

/// Named generators for the matrices of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Explicit { matrix: MatrixJson },
    Diagonal { values: Vec<f64> },
    Identity,
    /// Sorted uniform levels on `[0, bandwidth]`.
    RandomLevels { bandwidth: f64, seed: u64 },
    /// GUE matrix with entry scale `scale / sqrt(dim)`.
    RandomHermitian { scale: f64, seed: u64 },
    /// `Σ_j gaps[j] · |1⟩⟨1|_j` on a register of qubits.
    SpinField { gaps: Vec<f64> },
    /// A single-qubit operator (`x`, `y`, `z`, `+`, `-`) on `site`, or
    /// summed over every site when `site` is absent.
    SpinOp { op: char, site: Option<usize> },
    /// Single-qubit operator.
    Pauli { op: char },
}

impl MatrixSpec {
    pub fn build(&self, dim: usize) -> Result<CMat> {
        let m = match self {
            MatrixSpec::Explicit { matrix } => matrix.to_matrix()?,
            MatrixSpec::Diagonal { values } => linalg::diag(values),
            MatrixSpec::Identity => linalg::identity(dim),
            MatrixSpec::RandomLevels { bandwidth, seed } => {
                let mut rng = seed::rng(*seed);
                let mut levels: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * bandwidth).collect();
                levels.sort_by(f64::total_cmp);
                linalg::diag(&levels)
            }
            MatrixSpec::RandomHermitian { scale, seed } => linalg::random_hermitian(dim, *scale, &mut seed::rng(*seed)),
            MatrixSpec::SpinField { gaps } => {
                let n = qubit_count(dim)?;
                if gaps.len() != n {
                    return Err(Error::Structural(format!("{} gaps for {n} qubits", gaps.len())));
                }
                let number = linalg::diag(&[0.0, 1.0]);
                gaps.iter().enumerate().fold(CMat::zeros(dim, dim), |acc, (j, &g)| acc + on_site(&number, j, n) * c(g))
            }
            MatrixSpec::SpinOp { op, site } => {
                let n = qubit_count(dim)?;
                let single = pauli_checked(*op)?;
                match site {
                    Some(j) if *j >= n => {
                        return Err(Error::Structural(format!("site {j} outside a {n}-qubit register")));
                    }
                    Some(j) => on_site(&single, *j, n),
                    None => (0..n).fold(CMat::zeros(dim, dim), |acc, j| acc + on_site(&single, j, n)),
                }
            }
            MatrixSpec::Pauli { op } => pauli_checked(*op)?,
        };
        if m.shape() != (dim, dim) {
            return Err(Error::Structural(format!(
                "generator produced a {}x{} matrix for a {dim}-dimensional factor",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

fn pauli_checked(op: char) -> Result<CMat> {
    if !"xyz+-".contains(op) {
        return Err(Error::Validation(format!("unknown single-qubit operator '{op}'")));
    }
    Ok(linalg::pauli(op))
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim.is_power_of_two() && dim >= 2 {
        Ok(dim.trailing_zeros() as usize)
    } else {
        Err(Error::Structural(format!("dimension {dim} is not a qubit register")))
    }
}

fn on_site(op: &CMat, site: usize, n: usize) -> CMat {
    let left = linalg::identity(1 << site);
    let right = linalg::identity(1 << (n - 1 - site));
    linalg::kron3(&left, op, &right)
}

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

fn smoothstep_slope(u: f64) -> f64 {
    6.0 * u * (1.0 - u)
}

/// Time dependence of one contact term, in units of the schedule time `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant,
    /// Values at `K` equally spaced knots over one period `τ`, joined by
    /// smoothsteps (the last knot connects back to the first).
    Periodic { knots: Vec<f64> },
    /// `from → to` by a smoothstep over `t ∈ [0, τ]`, then held.
    Ramp { from: f64, to: f64 },
    /// Piecewise-linear table in absolute time, held outside the range.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    fn validate(&self) -> Result<()> {
        match self {
            Profile::Periodic { knots } if knots.is_empty() => Err(Error::Validation("periodic profile needs knots".into())),
            Profile::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::Validation("table needs equally many times and values".into()));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Validation("table times must increase".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Profile::Constant)
    }

    /// Value and time derivative at `t`.
    pub fn eval(&self, t: f64, tau: f64) -> (f64, f64) {
        match self {
            Profile::Constant => (1.0, 0.0),
            Profile::Periodic { knots } => {
                let k = knots.len();
                let phase = (t / tau).rem_euclid(1.0) * k as f64;
                let j = (phase.floor() as usize).min(k - 1);
                let u = phase - j as f64;
                let (a, b) = (knots[j], knots[(j + 1) % k]);
                (a + (b - a) * smoothstep(u), (b - a) * smoothstep_slope(u) * k as f64 / tau)
            }
            Profile::Ramp { from, to } => {
                let s = t / tau;
                if s <= 0.0 {
                    (*from, 0.0)
                } else if s >= 1.0 {
                    (*to, 0.0)
                } else {
                    (from + (to - from) * smoothstep(s), (to - from) * smoothstep_slope(s) / tau)
                }
            }
            Profile::Table { times, values } => {
                let n = times.len();
                if t <= times[0] {
                    return (values[0], 0.0);
                }
                if t >= times[n - 1] {
                    return (values[n - 1], 0.0);
                }
                let j = times.partition_point(|&x| x <= t) - 1;
                let slope = (values[j + 1] - values[j]) / (times[j + 1] - times[j]);
                (values[j] + slope * (t - times[j]), slope)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactTerm {
    pub coeff: f64,
    pub left: MatrixSpec,
    pub contact: MatrixSpec,
    pub right: MatrixSpec,
    #[serde(default = "constant_profile")]
    pub profile: Profile,
    /// Adds the adjoint of the product, for couplings like `σ+ ⊗ σ-`.
    #[serde(default)]
    pub add_adjoint: bool,
}

fn constant_profile() -> Profile {
    Profile::Constant
}

fn one() -> f64 {
    1.0
}

/// Serializable description of a [`ContactModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactConfig {
    /// `(n1, nC, n2)`.
    pub dims: [usize; 3],
    pub h1: MatrixSpec,
    pub h2: MatrixSpec,
    pub contact_terms: Vec<ContactTerm>,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "one")]
    pub k_b: f64,
    /// Period of periodic profiles, duration of ramps.
    #[serde(default = "one")]
    pub tau: f64,
}

/// Term of the contact Hamiltonian on the full space.
#[derive(Debug, Clone)]
pub(crate) struct Term {
    pub op: CMat,
    pub coeff: f64,
    pub profile: Profile,
    /// `-i[H1, op]` and `-i[H2, op]`.
    pub flux1: CMat,
    pub flux2: CMat,
}

#[derive(Debug, Clone)]
pub struct ContactModel {
    pub dims: [usize; 3],
    pub h1: CMat,
    pub h2: CMat,
    pub beta1: f64,
    pub beta2: f64,
    pub k_b: f64,
    pub tau: f64,
    pub(crate) h1_full: CMat,
    pub(crate) h2_full: CMat,
    pub(crate) terms: Vec<Term>,
}

impl ContactConfig {
    pub fn build(&self) -> Result<ContactModel> {
        let [n1, nc, n2] = self.dims;
        if n1 == 0 || nc == 0 || n2 == 0 {
            return Err(Error::Structural(format!("dims must be positive, got {:?}", self.dims)));
        }
        if n1 * nc * n2 > 1024 {
            return Err(Error::Parameter(format!("total dimension {} exceeds 1024", n1 * nc * n2)));
        }
        let h1 = self.h1.build(n1)?;
        let h2 = self.h2.build(n2)?;
        let terms = self
            .contact_terms
            .iter()
            .map(|t| {
                t.profile.validate()?;
                let mut op = linalg::kron3(&t.left.build(n1)?, &t.contact.build(nc)?, &t.right.build(n2)?);
                if t.add_adjoint {
                    op += op.adjoint();
                }
                Ok((op, t.coeff, t.profile.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        ContactModel::new(self.dims, h1, h2, terms, self.beta1, self.beta2, self.k_b, self.tau)
    }
}

impl ContactModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        dims: [usize; 3],
        h1: CMat,
        h2: CMat,
        terms: Vec<(CMat, f64, Profile)>,
        beta1: f64,
        beta2: f64,
        k_b: f64,
        tau: f64,
    ) -> Result<Self> {
        let [n1, nc, n2] = dims;
        let total = n1 * nc * n2;
        if h1.shape() != (n1, n1) || h2.shape() != (n2, n2) {
            return Err(Error::Structural("reservoir Hamiltonians do not match dims".into()));
        }
        for (name, h) in [("H1", &h1), ("H2", &h2)] {
            let dev = linalg::hermitian_deviation(h);
            if dev > 1e-12 {
                return Err(Error::Validation(format!("{name} is not Hermitian (deviation {dev:.3e})")));
            }
        }
        if !(beta1 >= 0.0 && beta2 >= 0.0 && beta1.is_finite() && beta2.is_finite()) {
            return Err(Error::Validation(format!("inverse temperatures must be finite and ≥ 0, got {beta1}, {beta2}")));
        }
        if !(k_b > 0.0) || !(tau > 0.0) {
            return Err(Error::Validation("k_b and tau must be positive".into()));
        }
        let h1_full = linalg::kron3(&h1, &linalg::identity(nc), &linalg::identity(n2));
        let h2_full = linalg::kron3(&linalg::identity(n1), &linalg::identity(nc), &h2);
        let terms = terms
            .into_iter()
            .map(|(op, coeff, profile)| {
                if op.shape() != (total, total) {
                    return Err(Error::Structural("contact term has the wrong size".into()));
                }
                let dev = linalg::hermitian_deviation(&op);
                if dev > 1e-12 {
                    return Err(Error::Validation(format!("contact term is not Hermitian (deviation {dev:.3e})")));
                }
                let flux1 = linalg::hermitize(&(linalg::commutator(&h1_full, &op) * -linalg::I));
                let flux2 = linalg::hermitize(&(linalg::commutator(&h2_full, &op) * -linalg::I));
                Ok(Term { op, coeff, profile, flux1, flux2 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ContactModel { dims, h1, h2, beta1, beta2, k_b, tau, h1_full, h2_full, terms })
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn t1(&self) -> f64 {
        1.0 / (self.k_b * self.beta1)
    }

    pub fn t2(&self) -> f64 {
        1.0 / (self.k_b * self.beta2)
    }

    /// Same model with a different schedule time.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::Parameter(format!("tau must be positive, got {tau}")));
        }
        Ok(ContactModel { tau, ..self.clone() })
    }

    pub fn is_static(&self) -> bool {
        self.terms.iter().all(|t| t.profile.is_constant())
    }

    /// Profile values of every term at `t`.
    pub(crate) fn profile_values(&self, t: f64) -> Vec<(f64, f64)> {
        self.terms.iter().map(|term| term.profile.eval(t, self.tau)).collect()
    }

    pub fn contact_hamiltonian(&self, t: f64) -> CMat {
        let n = self.total_dim();
        self.terms
            .iter()
            .fold(CMat::zeros(n, n), |acc, term| acc + &term.op * c(term.coeff * term.profile.eval(t, self.tau).0))
    }

    /// `∂_t HC(t)`.
    pub fn contact_rate(&self, t: f64) -> CMat {
        let n = self.total_dim();
        self.terms
            .iter()
            .fold(CMat::zeros(n, n), |acc, term| acc + &term.op * c(term.coeff * term.profile.eval(t, self.tau).1))
    }

    pub fn hamiltonian(&self, t: f64) -> CMat {
        &self.h1_full + &self.h2_full + self.contact_hamiltonian(t)
    }

    pub fn reservoir_hamiltonians(&self) -> (&CMat, &CMat) {
        (&self.h1_full, &self.h2_full)
    }

    /// Largest entry of `[H_i, X]` for a generic `X` acting on the factors
    /// complementary to reservoir `i`; zero for a correctly embedded model.
    pub fn locality_deviation(&self) -> f64 {
        let [n1, nc, n2] = self.dims;
        let x1 = linalg::kron(&linalg::identity(n1), &rest_probe(nc * n2));
        let x2 = linalg::kron(&rest_probe(n1 * nc), &linalg::identity(n2));
        linalg::max_abs(&linalg::commutator(&self.h1_full, &x1))
            .max(linalg::max_abs(&linalg::commutator(&self.h2_full, &x2)))
    }
}

/// A generic full-rank probe on `dim` dimensions.
fn rest_probe(dim: usize) -> CMat {
    CMat::from_fn(dim, dim, |i, j| c(1.0 + (i * 7 + j * 3) as f64 % 5.0) + linalg::I * ((i as f64) - (j as f64)))
}

/// Gibbs state `e^{-βH}/Z` and `ln Z`, through the spectrum.
pub fn gibbs_state(h: &CMat, beta: f64) -> (DensityMatrix, f64) {
    let (vals, vecs) = linalg::eigh(h);
    let shift = vals.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = vals.iter().map(|&e| (-beta * e - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    let probs: Vec<linalg::C64> = w.iter().map(|&x| c(x / z)).collect();
    (DensityMatrix::from_trusted(linalg::reassemble(&probs, &vecs)), shift + z.ln())
}

/// `log Tr e^{-βH}`.
pub fn log_partition(h: &CMat, beta: f64) -> f64 {
    let vals = linalg::eigvalsh(h);
    let shift = vals.iter().map(|&e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    shift + vals.iter().map(|&e| (-beta * e - shift).exp()).sum::<f64>().ln()
}

/// `Z⁻¹ e^{-β1 H1} ⊗ 1/nC ⊗ e^{-β2 H2}`.
pub fn reference_state(model: &ContactModel) -> DensityMatrix {
    let (g1, _) = gibbs_state(&model.h1, model.beta1);
    let (g2, _) = gibbs_state(&model.h2, model.beta2);
    let flat = DensityMatrix::maximally_mixed(model.dims[1]);
    g1.tensor(&flat).tensor(&g2)
}

/// `ln Ω_ref`, exact through the reservoir spectra.
pub(crate) fn log_reference(model: &ContactModel) -> CMat {
    let ln_z = log_partition(&model.h1, model.beta1) + log_partition(&model.h2, model.beta2) + (model.dims[1] as f64).ln();
    let n = model.total_dim();
    (&model.h1_full * c(-model.beta1)) + (&model.h2_full * c(-model.beta2)) - linalg::identity(n) * c(ln_z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(beta1: f64) -> ContactModel {
        ContactConfig {
            dims: [2, 2, 2],
            h1: MatrixSpec::Diagonal { values: vec![0.0, 1.0] },
            h2: MatrixSpec::RandomLevels { bandwidth: 2.0, seed: 4 },
            contact_terms: vec![],
            beta1,
            beta2: 1.0,
            k_b: 1.0,
            tau: 1.0,
        }
        .build()
        .unwrap()
    }

    #[test]
    fn reference_state_examples() {
        let m = small(std::f64::consts::LN_2);
        let r = reference_state(&m);
        let first = crate::qcore::partial_trace(&r, &[2, 2, 2], &[0]).unwrap();
        assert_abs_diff_eq!(first.matrix()[(0, 0)].re, 2.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(first.matrix()[(1, 1)].re, 1.0 / 3.0, epsilon = 1e-14);
        let h = m.hamiltonian(0.0);
        assert!(linalg::max_abs(&linalg::commutator(r.matrix(), &h)) < 1e-12);

        let mut hot = small(0.0);
        hot.beta2 = 0.0;
        let r = reference_state(&hot);
        assert!(linalg::max_abs_diff(r.matrix(), DensityMatrix::maximally_mixed(8).matrix()) < 1e-15);
    }

    #[test]
    fn log_reference_matches_matrix_log() {
        let m = bundled::model_a().build().unwrap();
        let direct = linalg::hermitian_fn(reference_state(&m).matrix(), f64::ln);
        assert!(linalg::max_abs_diff(&direct, &log_reference(&m)) < 1e-10);
        assert!(m.locality_deviation() < 1e-12);
    }

    #[test]
    fn profiles_have_consistent_derivatives() {
        let profiles = [
            Profile::Periodic { knots: vec![0.0, 1.0, 1.0, 0.3] },
            Profile::Ramp { from: 1.0, to: 2.0 },
            Profile::Table { times: vec![0.0, 1.0, 3.0], values: vec![0.0, 2.0, 1.0] },
        ];
        let tau = 2.5;
        for p in &profiles {
            for k in 1..40 {
                let t = 0.137 * k as f64;
                let h = 1e-6;
                let fd = (p.eval(t + h, tau).0 - p.eval(t - h, tau).0) / (2.0 * h);
                assert!((fd - p.eval(t, tau).1).abs() < 1e-6, "{p:?} at {t}");
            }
        }
        let per = &profiles[0];
        assert_abs_diff_eq!(per.eval(0.3, tau).0, per.eval(0.3 + 4.0 * tau, tau).0, epsilon = 1e-12);
    }

    #[test]
    fn spin_generators() {
        let z = MatrixSpec::SpinField { gaps: vec![1.0, 2.0] }.build(4).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| z[(i, i)].re).collect();
        assert_eq!(diag, vec![0.0, 2.0, 1.0, 3.0]);
        let x = MatrixSpec::SpinOp { op: 'x', site: None }.build(4).unwrap();
        assert_abs_diff_eq!(x[(0, 1)].re, 1.0);
        assert_abs_diff_eq!(x[(0, 2)].re, 1.0);
        assert!(matches!(MatrixSpec::SpinOp { op: 'q', site: None }.build(4), Err(Error::Validation(_))));
        assert!(matches!(MatrixSpec::SpinField { gaps: vec![1.0] }.build(3), Err(Error::Structural(_))));
    }
}
