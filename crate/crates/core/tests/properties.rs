use arrowlab::eth::{self, ChainConfig, DynamicsSpec, StateSpec};
use arrowlab::friction::{self, Dispersion, ForceMethod, FrictionModel, Potential};
use arrowlab::linalg::{self, CMat};
use arrowlab::qbm::{self, KineticModel};
use arrowlab::qcore::{self, ConvexFn, DensityMatrix, Monotonicity, QuantumChannel, TripartiteState};
use arrowlab::seed;
use arrowlab::thermo::{self, ContactConfig, ContactTerm, MatrixSpec, Profile};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

fn state(dim: usize, rank: usize, s: u64) -> DensityMatrix {
    qcore::random_density_matrix(dim, rank.clamp(1, dim), s).unwrap()
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn klein_gap_is_nonnegative(dim in 2usize..6, s in any::<u64>()) {
        let mut rng = seed::rng(s);
        let a = linalg::random_hermitian(dim, 1.0, &mut rng);
        let b = linalg::random_hermitian(dim, 1.0, &mut rng);
        prop_assert!(qcore::klein_gap(&a, &b, ConvexFn::Square).unwrap() >= -1e-10);
        prop_assert!(qcore::klein_gap(&a, &a, ConvexFn::Square).unwrap().abs() <= 1e-8);
        let (p, q) = (state(dim, dim, s), state(dim, dim, s ^ 1));
        prop_assert!(qcore::klein_gap(p.matrix(), q.matrix(), ConvexFn::XLogX).unwrap() >= -1e-10);
    }

    #[test]
    fn relative_entropy_is_nonnegative(dim in 2usize..6, r1 in 1usize..6, r2 in 1usize..6, s in any::<u64>()) {
        let (a, b) = (state(dim, r1, s), state(dim, r2, s.wrapping_add(7)));
        if let Some(v) = qcore::relative_entropy(&a, &b).unwrap().finite() {
            prop_assert!(v >= -1e-10);
        }
        prop_assert!(qcore::relative_entropy(&a, &a).unwrap().finite().unwrap().abs() <= 1e-9);
    }

    #[test]
    fn relative_entropy_is_jointly_convex(dim in 2usize..5, s in any::<u64>()) {
        let st: Vec<DensityMatrix> = (0..4).map(|i| state(dim, dim, s.wrapping_add(i))).collect();
        for lambda in [0.25, 0.5, 0.75] {
            let excess = qcore::joint_convexity_excess((&st[0], &st[1]), (&st[2], &st[3]), lambda).unwrap().unwrap();
            prop_assert!(excess <= 1e-9);
        }
    }

    #[test]
    fn strong_subadditivity(rank in 1usize..9, s in any::<u64>()) {
        let t = TripartiteState::new(state(8, rank, s), [2, 2, 2]).unwrap();
        prop_assert!(qcore::ssa_gap(&t).unwrap() >= -1e-9);
    }

    #[test]
    fn channels_never_increase_relative_entropy(d_in in 2usize..4, d_out in 2usize..4, kraus in 1usize..4, s in any::<u64>()) {
        let kraus = kraus.max(d_in.div_ceil(d_out));
        let ch = QuantumChannel::random(d_in, d_out, kraus, &mut seed::rng(s)).unwrap();
        let (a, b) = (state(d_in, d_in, s ^ 3), state(d_in, d_in, s ^ 5));
        if let Monotonicity::Gap(g) = qcore::monotonicity_gap(&a, &b, &ch).unwrap() {
            prop_assert!(g >= -1e-9);
        }
    }

    #[test]
    fn entropy_is_unitarily_invariant(dim in 2usize..6, rank in 1usize..6, s in any::<u64>()) {
        let rho = state(dim, rank, s);
        let u = linalg::random_unitary(dim, &mut seed::rng(s ^ 9));
        let rotated = rho.conjugated(&u);
        prop_assert!((qcore::von_neumann_entropy(&rho) - qcore::von_neumann_entropy(&rotated)).abs() <= 1e-10);
        let pure = state(dim, 1, s);
        prop_assert!(qcore::von_neumann_entropy(&pure).abs() <= 1e-10);
    }
}

fn random_contact(s: u64) -> ContactConfig {
    ContactConfig {
        dims: [2, 2, 2],
        h1: MatrixSpec::RandomLevels { bandwidth: 2.0, seed: s },
        h2: MatrixSpec::RandomLevels { bandwidth: 1.0, seed: s ^ 1 },
        contact_terms: vec![
            ContactTerm {
                coeff: 0.3,
                left: MatrixSpec::Pauli { op: 'x' },
                contact: MatrixSpec::Pauli { op: 'x' },
                right: MatrixSpec::Identity,
                profile: Profile::Constant,
                add_adjoint: false,
            },
            ContactTerm {
                coeff: 0.2,
                left: MatrixSpec::Identity,
                contact: MatrixSpec::RandomHermitian { scale: 1.0, seed: s ^ 2 },
                right: MatrixSpec::Pauli { op: 'y' },
                profile: Profile::Ramp { from: 1.0, to: -0.5 },
                add_adjoint: false,
            },
        ],
        beta1: 0.5,
        beta2: 1.5,
        k_b: 1.0,
        tau: 3.0,
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn reservoir_evolution_is_unitary_and_entropy_stays_nonnegative(s in any::<u64>()) {
        let m = random_contact(s).build().unwrap();
        let grid = thermo::uniform_grid(0.0, 3.0, 60);
        let traj = thermo::evolve(&m, &thermo::reference_state(&m), &grid, thermo::EvolveOptions::default()).unwrap();
        prop_assert!(traj.spectrum_drift <= 1e-9);
        prop_assert!(traj.points.iter().all(|p| p.s_rel >= -1e-10));
        prop_assert!(traj.first_law_residual() <= 1e-6);
    }

    #[test]
    fn kinetic_kernel_satisfies_detailed_balance(
        d in 1usize..3, half in 4usize..6, nu in 0.1f64..1.0, beta in 0.2f64..3.0,
        splitting in 0.0f64..1.0, width in 0.8f64..2.0,
    ) {
        let model = KineticModel { d, n_p: 2 * half, nu, m0: 1.0, beta, splitting, kernel_width: width };
        let k = qbm::build_kernel(&model).unwrap();
        prop_assert!(k.detailed_balance_residual() <= 1e-10);
        prop_assert!(k.stationarity_residual() <= 1e-10);
    }

    #[test]
    fn event_partitions_satisfy_their_identities(n in 2usize..5, s in any::<u64>(), p0 in 0.05f64..0.95) {
        let cfg = ChainConfig {
            n_sites: n,
            d: 2,
            state: StateSpec::ProductMixed { probs: vec![p0, 1.0 - p0] },
            dynamics: DynamicsSpec::RandomHaar { seed: s },
            eps_deg: eth::DEFAULT_EPS_DEG,
            p_min: eth::DEFAULT_P_MIN,
        };
        let model = cfg.build().unwrap();
        let h = eth::run_history(&model, s ^ 11);
        prop_assert!(h.failure.is_none());
        prop_assert!(h.diminishes(2, 1 << n));
        prop_assert!(h.worst_partition_error() <= 1e-10);
        let fin = h.final_state.matrix();
        prop_assert!((linalg::trace(fin).re - 1.0).abs() <= 1e-10);
        prop_assert!(linalg::eigvalsh(fin)[0] >= -1e-10);
    }

    #[test]
    fn collapse_keeps_states_physical(dim in 2usize..9, rank in 1usize..9, s in any::<u64>()) {
        let rho = state(dim, rank, s);
        let part = eth::event_partition(&rho, 1e-8).unwrap();
        let chk = part.check(&rho);
        prop_assert!(chk.commutation <= 1e-10 && chk.decoherence <= 1e-10 && chk.additivity <= 1e-10);
        let (xi, post) = eth::collapse_step(&rho, &part, eth::DEFAULT_P_MIN, s).unwrap();
        prop_assert!(part.weights[xi] >= eth::DEFAULT_P_MIN);
        prop_assert!((linalg::trace(post.matrix()).re - 1.0).abs() <= 1e-10);
        prop_assert!(linalg::eigvalsh(post.matrix())[0] >= -1e-10);
    }
}

fn grid_model(dispersion: Dispersion) -> FrictionModel {
    FrictionModel {
        d: 3,
        l: 12.0,
        n: 16,
        m0: 1.0,
        force: Vec::new(),
        potential: Potential { w0: 0.7, a: 1.5 },
        dispersion,
        vstar: 0.4,
        dt: 0.008,
        eps_reg: 0.2,
    }
}

fn dispersion() -> impl Strategy<Value = Dispersion> {
    prop_oneof![Just(Dispersion::Ideal), Just(Dispersion::Bogoliubov)]
}

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn friction_is_dissipative(v in prop::array::uniform3(-3.0f64..3.0), disp in dispersion()) {
        let m = grid_model(disp);
        for method in [ForceMethod::EpsLimit, ForceMethod::ShellQuadrature] {
            let f = friction::friction_force(&v, &m, method).unwrap();
            let fv: f64 = f.iter().zip(&v).map(|(a, b)| a * b).sum();
            let scale = f.iter().map(|x| x * x).sum::<f64>().sqrt() * v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(fv <= 1e-10 * scale, "{method:?} f·v = {fv}");
        }
    }

    #[test]
    fn friction_commutes_with_grid_symmetries(
        v in prop::array::uniform3(-2.0f64..2.0),
        perm in Just([0usize, 1, 2]).prop_shuffle(),
        signs in prop::array::uniform3(prop_oneof![Just(1.0f64), Just(-1.0)]),
        disp in dispersion(),
    ) {
        let m = grid_model(disp);
        let act = |x: &[f64]| -> Vec<f64> { (0..3).map(|i| signs[i] * x[perm[i]]).collect() };
        for method in [ForceMethod::EpsLimit, ForceMethod::ShellQuadrature] {
            let f = friction::friction_force(&v, &m, method).unwrap();
            let g = friction::friction_force(&act(&v), &m, method).unwrap();
            let rotated = act(&f);
            let scale = f.iter().map(|x| x.abs()).fold(1e-300, f64::max);
            for i in 0..3 {
                prop_assert!((g[i] - rotated[i]).abs() <= 1e-12 * scale, "{method:?} {g:?} vs {rotated:?}");
            }
        }
    }

    #[test]
    fn rest_profile_error_is_set_by_the_regularization(eps in 1e-3f64..0.5, w0 in 0.1f64..3.0, a in 1.5f64..3.0) {
        let m = FrictionModel { eps_reg: eps, potential: Potential { w0, a }, ..grid_model(Dispersion::Ideal) };
        let k1 = 2.0 * std::f64::consts::PI / m.l;
        let bound = eps * m.w_hat(k1 * k1) / m.omega(k1 * k1);
        prop_assert!(friction::rest_profile_deviation(&m).unwrap() <= bound * (1.0 + 1e-12));
    }
}

#[test]
fn unitary_step_preserves_trace() {
    let u: CMat = linalg::random_unitary(4, &mut seed::rng(3));
    assert!(linalg::unitarity_deviation(&u) < 1e-12);
}
