//! Reference models used by the acceptance run and the shipped configs.

use super::{ContactConfig, ContactTerm, MatrixSpec, Profile};

fn term(coeff: f64, left: MatrixSpec, contact: MatrixSpec, right: MatrixSpec, profile: Profile) -> ContactTerm {
    ContactTerm { coeff, left, contact, right, profile, add_adjoint: false }
}

/// Thermal contact: two 8-level reservoirs with random spectra at
/// `T1 = 2`, `T2 = 1`, joined by a qubit through random exchange operators.
pub fn model_a() -> ContactConfig {
    use MatrixSpec::*;
    ContactConfig {
        dims: [8, 2, 8],
        h1: RandomLevels { bandwidth: 4.0, seed: 101 },
        h2: RandomLevels { bandwidth: 4.0, seed: 102 },
        contact_terms: vec![
            term(1.0, Identity, Diagonal { values: vec![0.0, 2.0] }, Identity, Profile::Constant),
            term(0.3, RandomHermitian { scale: 1.0, seed: 103 }, Pauli { op: 'x' }, Identity, Profile::Constant),
            term(0.3, Identity, Pauli { op: 'x' }, RandomHermitian { scale: 1.0, seed: 104 }, Profile::Constant),
        ],
        beta1: 0.5,
        beta2: 1.0,
        k_b: 1.0,
        tau: 1.0,
    }
}

/// Modulated-exchange engine between two three-spin reservoirs at
/// `T1 = 2`, `T2 = 1`. Spin `j` of reservoir 1 is paired with spin `j` of
/// reservoir 2, whose gap is lower by 0.6; their flip-flop coupling is
/// modulated at that difference, so every quantum moved from 1 to 2
/// converts 0.6 of its energy into work. The coupling is weak enough that
/// each pair is still on the rising half of its exchange oscillation
/// after 30 periods.
pub fn model_b() -> ContactConfig {
    use MatrixSpec::*;
    let omega = 0.6;
    let tau = std::f64::consts::TAU / omega;
    let knots: Vec<f64> = (0..16).map(|k| (std::f64::consts::TAU * k as f64 / 16.0).cos()).collect();
    let weights = [1.0, 0.8, 1.2];
    let contact_terms = weights
        .iter()
        .enumerate()
        .map(|(j, w)| ContactTerm {
            coeff: 0.008 * w,
            left: SpinOp { op: '-', site: Some(j) },
            contact: Identity,
            right: SpinOp { op: '+', site: Some(j) },
            profile: Profile::Periodic { knots: knots.clone() },
            add_adjoint: true,
        })
        .collect();
    ContactConfig {
        dims: [8, 1, 8],
        h1: SpinField { gaps: vec![1.8, 2.0, 2.2] },
        h2: SpinField { gaps: vec![1.2, 1.4, 1.6] },
        contact_terms,
        beta1: 0.5,
        beta2: 1.0,
        k_b: 1.0,
        tau,
    }
}

/// A qubit whose field rotates from `z` to `x`, weakly coupled to a
/// two-spin reservoir. Reservoir 2 is a single inert level.
pub fn model_c() -> ContactConfig {
    use MatrixSpec::*;
    ContactConfig {
        dims: [4, 2, 1],
        h1: SpinField { gaps: vec![1.0, 1.5] },
        h2: Diagonal { values: vec![0.0] },
        contact_terms: vec![
            term(1.0, Identity, Pauli { op: 'z' }, Identity, Profile::Ramp { from: 1.0, to: 0.0 }),
            term(1.0, Identity, Pauli { op: 'x' }, Identity, Profile::Ramp { from: 0.0, to: 1.0 }),
            term(0.2, SpinOp { op: 'x', site: None }, Pauli { op: 'x' }, Identity, Profile::Constant),
        ],
        beta1: 1.0,
        beta2: 1.0,
        k_b: 1.0,
        tau: 2.0,
    }
}
