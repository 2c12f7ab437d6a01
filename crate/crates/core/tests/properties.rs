//! Randomized invariants of the engines and observables.

use std::f64::consts::PI;

use nmqj::config::parse_config;
use nmqj::ledger::run_ledger_with;
use nmqj::mc::run_ensemble;
use nmqj::observables::{bloch_vector, bures_metric, concurrence};
use nmqj::qcore::{tensor, DensityMatrix, Operator, StateVector, C64};
use nmqj::SimConfig;
use proptest::prelude::*;

#[derive(Clone, Debug)]
struct Case {
    doc: String,
    seed: u64,
}

fn model_i_case() -> impl Strategy<Value = String> {
    (0.0..=1.0f64, 0.0..=PI, 0.0..2.0 * PI).prop_map(|(omega, theta, phi)| {
        format!("model = \"model_i\"\ndrive.omega = {omega}\ninitial.theta = {theta}\ninitial.phi = {phi}\n")
    })
}

fn model_ii_case() -> impl Strategy<Value = String> {
    (0.0..=PI / 2.0, any::<bool>()).prop_map(|(xi, switched)| {
        let coupling = if switched {
            "coupling.kind = \"sigmoid_switchoff\"\ncoupling.t_switch = 0.6\n"
        } else {
            ""
        };
        format!("model = \"model_ii\"\ninitial.xi = {xi}\n{coupling}")
    })
}

fn random_case() -> impl Strategy<Value = Case> {
    (prop_oneof![model_i_case(), model_ii_case()], 5.0..=15.0f64, 2.0..=10.0f64, 0..=u64::from(u32::MAX)).prop_map(
        |(model, eta, q0, seed)| Case {
            doc: format!(
                "{model}reservoir.eta = {eta}\nreservoir.q0 = {q0}\ntime.t_end = 1.0\n\
                 ledger.overflow_threshold = 1.0\nmc.seed = {seed}\n"
            ),
            seed,
        },
    )
}

fn config(doc: &str) -> SimConfig {
    parse_config(doc).unwrap_or_else(|e| panic!("{e}\n{doc}"))
}

fn assert_valid_density(rho: &DensityMatrix) {
    assert!((rho.op().trace().re - 1.0).abs() < 1e-12);
    assert!(rho.op().trace().im.abs() < 1e-12);
    assert!(rho.op().is_hermitian(1e-12));
    assert!(rho.min_eigenvalue().unwrap() >= -1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ledger_conserves_and_stays_physical(case in random_case()) {
        let c = config(&case.doc);
        run_ledger_with(&c, |ledger, _| {
            let total = ledger.total_probability();
            assert!((total - 1.0).abs() < 1e-8, "Σk + leak = {total}");
            for n in 0..=ledger.truncation() {
                assert!(ledger.level(n).iter().all(|node| (0.0..=1.0).contains(&node.k)));
            }
            assert_valid_density(&ledger.reconstruct_density());
            Ok(())
        })
        .unwrap();

        // Monte Carlo with an effectively infinite memory window is the default mode.
        let infinite = run_ensemble(&c, 200, case.seed).unwrap();
        let windowed = run_ensemble(&config(&format!("{}memory.tau = 1e12\n", case.doc)), 200, case.seed).unwrap();
        prop_assert_eq!(infinite.snapshots.len(), windowed.snapshots.len());
        for (a, b) in infinite.snapshots.iter().zip(&windowed.snapshots) {
            prop_assert_eq!(a.rho.op(), b.rho.op());
            prop_assert_eq!(&a.k_sums, &b.k_sums);
        }
    }
}

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(complex(), dim * dim).prop_map(move |g| {
        let rows: Vec<&[C64]> = g.chunks(dim).collect();
        let g = Operator::from_rows(&rows).unwrap();
        let rho = g * g.adjoint();
        let tr = rho.trace().re;
        DensityMatrix::new(rho.scale_real(1.0 / tr)).unwrap()
    })
}

/// `R_z(a) R_y(b) R_z(c)`
fn qubit_unitary() -> impl Strategy<Value = Operator> {
    (0.0..2.0 * PI, 0.0..PI, 0.0..2.0 * PI).prop_map(|(a, b, c)| {
        let (s, co) = (0.5 * b).sin_cos();
        let e = |x: f64| C64::from_polar(1.0, x);
        Operator::from_rows(&[
            &[e(-0.5 * (a + c)) * co, -e(-0.5 * (a - c)) * s],
            &[e(0.5 * (a - c)) * s, e(0.5 * (a + c)) * co],
        ])
        .unwrap()
    })
}

proptest! {
    #[test]
    fn concurrence_is_local_unitary_invariant(rho in density(4), u1 in qubit_unitary(), u2 in qubit_unitary()) {
        let u = tensor(&u1, &u2).unwrap();
        let rotated = DensityMatrix::new((u * *rho.op() * u.adjoint()).hermitian_part()).unwrap();
        let a = concurrence(&rho).unwrap().concurrence;
        let b = concurrence(&rotated).unwrap().concurrence;
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }

    #[test]
    fn bures_is_a_metric(a in density(4), b in density(4), c in density(4)) {
        let ab = bures_metric(&a, &b).unwrap();
        let ba = bures_metric(&b, &a).unwrap();
        let bc = bures_metric(&b, &c).unwrap();
        let ac = bures_metric(&a, &c).unwrap();
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&ab));
    }

    #[test]
    fn pure_bloch_vectors_have_unit_length(amps in prop::collection::vec(complex(), 2)) {
        prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-6);
        let psi = StateVector::new(&amps).unwrap().normalize().unwrap();
        let b = bloch_vector(&DensityMatrix::from_pure(&psi)).unwrap();
        prop_assert!((b.length() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_x_component_vanishes_in_the_yz_plane(
        omega in 0.0..=1.0f64,
        start in prop_oneof![Just((0.0, 0.0)), Just((PI, 0.0)), (0.0..PI).prop_map(|t| (t, PI / 2.0)), (0.0..PI).prop_map(|t| (t, -PI / 2.0))],
    ) {
        let c = config(&format!(
            "model = \"model_i\"\ndrive.omega = {omega}\ninitial.theta = {}\ninitial.phi = {}\ntime.t_end = 1.0\n",
            start.0, start.1
        ));
        let run = nmqj::exact::run_exact_monitored(&c).unwrap();
        for s in &run.snapshots {
            prop_assert!(bloch_vector(&s.rho).unwrap().x.abs() < 1e-9);
        }
    }
}
