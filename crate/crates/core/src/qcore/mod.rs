//! Finite-dimensional quantum states, channels and entropy functionals.
//!
//! All matrix functions (logarithms, `x ln x`, squares) are evaluated on the
//! Hermitian eigendecomposition. Eigenvalues below [`ENTROPY_FLOOR`] count as
//! zero in `0 · ln 0`, and supports are compared at [`SUPPORT_THRESHOLD`].

pub mod suite;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, MatrixJson, C64};
use crate::seed;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-12;
pub const KRAUS_TOL: f64 = 1e-10;
pub const ENTROPY_FLOOR: f64 = 1e-14;
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Positive, unit-trace Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMat,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity at the module tolerances.
    pub fn new(m: CMat) -> Result<Self> {
        if !linalg::is_square(&m) || m.nrows() == 0 {
            return Err(Error::Structural(format!(
                "density matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("density matrix has non-finite entries".into()));
        }
        let dev = linalg::hermitian_deviation(&m);
        if dev > HERMITIAN_TOL {
            return Err(Error::Validation(format!("not Hermitian: max deviation {dev:.3e}")));
        }
        let tr = linalg::trace(&m);
        if (tr - c(1.0)).norm() > TRACE_TOL {
            return Err(Error::Validation(format!("trace {:.15} differs from 1", tr.re)));
        }
        let min = linalg::eigvalsh(&m)[0];
        if min < -POSITIVITY_TOL {
            return Err(Error::Validation(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix { m: linalg::hermitize(&m) })
    }

    /// Normalizes a positive semidefinite matrix by its trace, then validates.
    pub fn from_positive(m: CMat) -> Result<Self> {
        let tr = linalg::trace(&m).re;
        if !(tr > 0.0) {
            return Err(Error::Validation(format!("trace {tr:.3e} is not positive")));
        }
        Self::new(m / c(tr))
    }

    /// Wraps a matrix known to be a state up to roundoff, re-Hermitizing it.
    pub(crate) fn from_trusted(m: CMat) -> Self {
        DensityMatrix { m: linalg::hermitize(&m) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { m: linalg::identity(dim) / c(dim as f64) }
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) vector.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return Err(Error::Validation("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_column_slice(psi) / c(norm2.sqrt());
        Ok(DensityMatrix { m: &v * v.adjoint() })
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(linalg::diag(probs))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.m)
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { m: linalg::kron(&self.m, &other.m) }
    }

    /// Rank counted at the support threshold.
    pub fn rank(&self) -> usize {
        self.eigenvalues().iter().filter(|&&l| l > SUPPORT_THRESHOLD).count()
    }

    pub fn purity(&self) -> f64 {
        linalg::trace_product(&self.m, &self.m).re
    }

    pub fn conjugated(&self, u: &CMat) -> DensityMatrix {
        DensityMatrix::from_trusted(linalg::conjugate(u, &self.m))
    }

    /// Convex combination `λ self + (1-λ) other`.
    pub fn mix(&self, other: &DensityMatrix, lambda: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::Structural("cannot mix states of different dimension".into()));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Parameter(format!("mixing weight {lambda} outside [0, 1]")));
        }
        Ok(DensityMatrix::from_trusted(&self.m * c(lambda) + &other.m * c(1.0 - lambda)))
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson::from_matrix(&self.m).serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = MatrixJson::deserialize(d)?;
        let m = json.to_matrix().map_err(serde::de::Error::custom)?;
        DensityMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone)]
pub struct QuantumChannel {
    kraus: Vec<CMat>,
}

impl QuantumChannel {
    pub fn new(kraus: Vec<CMat>) -> Result<Self> {
        let Some(first) = kraus.first() else {
            return Err(Error::Validation("channel needs at least one Kraus operator".into()));
        };
        let (d_out, d_in) = first.shape();
        if kraus.iter().any(|k| k.shape() != (d_out, d_in)) {
            return Err(Error::Structural("Kraus operators have inconsistent shapes".into()));
        }
        let sum = kraus.iter().fold(CMat::zeros(d_in, d_in), |acc, k| acc + k.adjoint() * k);
        let dev = linalg::max_abs_diff(&sum, &linalg::identity(d_in));
        if dev > KRAUS_TOL {
            return Err(Error::Validation(format!("Kraus completeness violated by {dev:.3e}")));
        }
        Ok(QuantumChannel { kraus })
    }

    pub fn identity(dim: usize) -> Self {
        QuantumChannel { kraus: vec![linalg::identity(dim)] }
    }

    /// Maps every state to `1/d`; Kraus set `{|i⟩⟨j| / √d}`.
    pub fn fully_depolarizing(dim: usize) -> Self {
        let scale = c(1.0 / (dim as f64).sqrt());
        let mut kraus = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut k = CMat::zeros(dim, dim);
                k[(i, j)] = scale;
                kraus.push(k);
            }
        }
        QuantumChannel { kraus }
    }

    /// Random channel from a Haar isometry `V: C^d_in → C^d_out ⊗ C^n`,
    /// cut into `n` Kraus blocks.
    pub fn random<R: Rng + ?Sized>(d_in: usize, d_out: usize, n_kraus: usize, rng: &mut R) -> Result<Self> {
        if d_in == 0 || d_out == 0 || n_kraus == 0 {
            return Err(Error::Parameter("channel dimensions must be positive".into()));
        }
        if d_out * n_kraus < d_in {
            return Err(Error::Parameter(format!(
                "need d_out·n_kraus ≥ d_in, got {d_out}·{n_kraus} < {d_in}"
            )));
        }
        let v = linalg::random_isometry(d_out * n_kraus, d_in, rng);
        let kraus = (0..n_kraus).map(|k| v.rows(k * d_out, d_out).into_owned()).collect();
        QuantumChannel::new(kraus)
    }

    pub fn input_dim(&self) -> usize {
        self.kraus[0].ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.kraus[0].nrows()
    }

    pub fn kraus(&self) -> &[CMat] {
        &self.kraus
    }
}

/// State on `H1 ⊗ H2 ⊗ H3`.
#[derive(Debug, Clone)]
pub struct TripartiteState {
    pub rho: DensityMatrix,
    pub dims: [usize; 3],
}

impl TripartiteState {
    pub fn new(rho: DensityMatrix, dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::Structural(format!("factor dimensions must be positive: {dims:?}")));
        }
        let total: usize = dims.iter().product();
        if total != rho.dim() {
            return Err(Error::Structural(format!(
                "dims {dims:?} multiply to {total}, state has dimension {}",
                rho.dim()
            )));
        }
        Ok(TripartiteState { rho, dims })
    }

    pub fn reduced(&self, keep: &[usize]) -> Result<DensityMatrix> {
        partial_trace(&self.rho, &self.dims, keep)
    }
}

/// Reduced state on the factors listed in `keep` (sorted or not; the
/// output factor order follows the original ordering).
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let m = partial_trace_matrix(rho.matrix(), dims, keep)?;
    Ok(DensityMatrix::from_trusted(m))
}

/// Index contraction behind [`partial_trace`]; works on any square matrix.
pub fn partial_trace_matrix(m: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || total != m.nrows() || !linalg::is_square(m) {
        return Err(Error::Structural(format!(
            "dims {dims:?} do not match a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut kept = vec![false; dims.len()];
    for &k in keep {
        if k >= dims.len() || kept[k] {
            return Err(Error::Parameter(format!("invalid keep set {keep:?}")));
        }
        kept[k] = true;
    }
    if keep.is_empty() || keep.len() == dims.len() {
        return Err(Error::Parameter(format!(
            "keep set {keep:?} must be a nonempty proper subset of {} factors",
            dims.len()
        )));
    }
    let dk: usize = dims.iter().zip(&kept).filter(|(_, &k)| k).map(|(d, _)| d).product();
    let dt = total / dk;

    // Split each full index into (kept index, traced index), row-major.
    let mut kidx = vec![0usize; total];
    let mut tidx = vec![0usize; total];
    for (full, (ki, ti)) in kidx.iter_mut().zip(tidx.iter_mut()).enumerate() {
        let mut rem = full;
        let (mut ka, mut ta, mut ks, mut ts) = (0, 0, 1, 1);
        for f in (0..dims.len()).rev() {
            let digit = rem % dims[f];
            rem /= dims[f];
            if kept[f] {
                ka += digit * ks;
                ks *= dims[f];
            } else {
                ta += digit * ts;
                ts *= dims[f];
            }
        }
        *ki = ka;
        *ti = ta;
    }
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(dk); dt];
    for full in 0..total {
        groups[tidx[full]].push((kidx[full], full));
    }
    let mut out = CMat::zeros(dk, dk);
    for g in &groups {
        for &(a, i) in g {
            for &(b, j) in g {
                out[(a, b)] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `Σ K ρ K†`.
pub fn apply_channel(rho: &DensityMatrix, ch: &QuantumChannel) -> Result<DensityMatrix> {
    if ch.input_dim() != rho.dim() {
        return Err(Error::Structural(format!(
            "channel expects dimension {}, state has {}",
            ch.input_dim(),
            rho.dim()
        )));
    }
    let out = ch
        .kraus
        .iter()
        .fold(CMat::zeros(ch.output_dim(), ch.output_dim()), |acc, k| acc + k * rho.matrix() * k.adjoint());
    Ok(DensityMatrix::from_trusted(out))
}

fn xlogx(x: f64) -> f64 {
    if x < ENTROPY_FLOOR {
        0.0
    } else {
        x * x.ln()
    }
}

/// `-Tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s: f64 = -rho.eigenvalues().into_iter().map(xlogx).sum::<f64>();
    s.max(0.0)
}

/// Value of `S(σ‖ω)`; `Infinite` when the support of σ leaves the support
/// of ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelativeEntropy {
    Finite(f64),
    Infinite,
}

impl RelativeEntropy {
    pub fn finite(self) -> Option<f64> {
        match self {
            RelativeEntropy::Finite(v) => Some(v),
            RelativeEntropy::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, RelativeEntropy::Infinite)
    }
}

/// `Tr σ (ln σ - ln ω)`.
pub fn relative_entropy(sigma: &DensityMatrix, omega: &DensityMatrix) -> Result<RelativeEntropy> {
    if sigma.dim() != omega.dim() {
        return Err(Error::Structural(format!(
            "relative entropy of dimension {} against {}",
            sigma.dim(),
            omega.dim()
        )));
    }
    let (w_vals, w_vecs) = linalg::eigh(omega.matrix());
    // ⟨w_j|σ|w_j⟩ for every eigenvector of ω.
    let rotated = w_vecs.adjoint() * sigma.matrix() * &w_vecs;
    let mut cross = 0.0;
    for (j, &w) in w_vals.iter().enumerate() {
        let weight = rotated[(j, j)].re;
        if w <= SUPPORT_THRESHOLD {
            if weight > SUPPORT_THRESHOLD {
                return Ok(RelativeEntropy::Infinite);
            }
            continue;
        }
        cross += weight * w.ln();
    }
    let neg_entropy: f64 = sigma.eigenvalues().into_iter().map(xlogx).sum();
    Ok(RelativeEntropy::Finite(neg_entropy - cross))
}

/// Strictly convex scalar function used in Klein's inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexFn {
    XLogX,
    Square,
}

impl ConvexFn {
    fn value(self, x: f64) -> f64 {
        match self {
            ConvexFn::XLogX => x * x.ln(),
            ConvexFn::Square => x * x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            ConvexFn::XLogX => x.ln() + 1.0,
            ConvexFn::Square => 2.0 * x,
        }
    }
}

/// `Tr f(B) - Tr f(A) - Tr(f'(A)(B - A))`, nonnegative by Klein's
/// inequality.
pub fn klein_gap(a: &CMat, b: &CMat, f: ConvexFn) -> Result<f64> {
    if !linalg::is_square(a) || a.shape() != b.shape() {
        return Err(Error::Structural("Klein gap needs square matrices of equal size".into()));
    }
    for (name, m) in [("A", a), ("B", b)] {
        let dev = linalg::hermitian_deviation(m);
        if dev > HERMITIAN_TOL * (1.0 + linalg::max_abs(m)) {
            return Err(Error::Validation(format!("{name} is not Hermitian (deviation {dev:.3e})")));
        }
    }
    let (a_vals, a_vecs) = linalg::eigh(a);
    let b_vals = linalg::eigvalsh(b);
    if f == ConvexFn::XLogX && (a_vals[0] <= 0.0 || b_vals[0] <= 0.0) {
        return Err(Error::Domain("x ln x needs strictly positive spectra".into()));
    }
    let diff = linalg::hermitize(&(b - a));
    let rotated = a_vecs.adjoint() * diff * &a_vecs;
    let tr_fb: f64 = b_vals.iter().map(|&x| f.value(x)).sum();
    let tr_fa: f64 = a_vals.iter().map(|&x| f.value(x)).sum();
    let linear: f64 = a_vals.iter().enumerate().map(|(j, &x)| f.derivative(x) * rotated[(j, j)].re).sum();
    Ok(tr_fb - tr_fa - linear)
}

/// `S(ρ12) + S(ρ23) - S(ρ123) - S(ρ2)`.
pub fn ssa_gap(state: &TripartiteState) -> Result<f64> {
    let s12 = von_neumann_entropy(&state.reduced(&[0, 1])?);
    let s23 = von_neumann_entropy(&state.reduced(&[1, 2])?);
    let s2 = von_neumann_entropy(&state.reduced(&[1])?);
    let s123 = von_neumann_entropy(&state.rho);
    Ok(s12 + s23 - s123 - s2)
}

/// Outcome of the data-processing comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    Gap(f64),
    Incomparable,
}

/// `S(σ‖ω) - S(Tσ‖Tω)`, or `Incomparable` when the input relative entropy
/// is infinite.
pub fn monotonicity_gap(sigma: &DensityMatrix, omega: &DensityMatrix, ch: &QuantumChannel) -> Result<Monotonicity> {
    let before = relative_entropy(sigma, omega)?;
    let Some(before) = before.finite() else {
        return Ok(Monotonicity::Incomparable);
    };
    let after = relative_entropy(&apply_channel(sigma, ch)?, &apply_channel(omega, ch)?)?;
    Ok(match after.finite() {
        Some(after) => Monotonicity::Gap(before - after),
        None => Monotonicity::Incomparable,
    })
}

/// `S(λΣ1+(1-λ)Σ2 ‖ λΩ1+(1-λ)Ω2) - [λS(Σ1‖Ω1) + (1-λ)S(Σ2‖Ω2)]`; joint
/// convexity makes this nonpositive. `None` if any term is infinite.
pub fn joint_convexity_excess(
    first: (&DensityMatrix, &DensityMatrix),
    second: (&DensityMatrix, &DensityMatrix),
    lambda: f64,
) -> Result<Option<f64>> {
    let s1 = relative_entropy(first.0, first.1)?.finite();
    let s2 = relative_entropy(second.0, second.1)?.finite();
    let mixed = relative_entropy(&first.0.mix(second.0, lambda)?, &first.1.mix(second.1, lambda)?)?.finite();
    Ok(match (s1, s2, mixed) {
        (Some(a), Some(b), Some(m)) => Some(m - (lambda * a + (1.0 - lambda) * b)),
        _ => None,
    })
}

/// Random state `G G† / Tr(G G†)` with `G` a `dim × rank` Ginibre matrix.
pub fn random_density_matrix(dim: usize, rank: usize, seed: u64) -> Result<DensityMatrix> {
    random_density_matrix_with(dim, rank, &mut seed::rng(seed))
}

pub fn random_density_matrix_with<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Result<DensityMatrix> {
    if dim == 0 || rank == 0 || rank > dim {
        return Err(Error::Parameter(format!("need 1 ≤ rank ≤ dim, got rank {rank}, dim {dim}")));
    }
    let g = linalg::ginibre(dim, rank, rng);
    let m = &g * g.adjoint();
    let tr = linalg::trace(&m).re;
    Ok(DensityMatrix::from_trusted(m / c(tr)))
}
