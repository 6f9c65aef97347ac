use qvar_core::circuit::{
    hardware_efficient, product_cost, Circuit, Environment, GateAssignment, GateSlot, NamedGate, Observable,
    ObservableKind, ReferenceState,
};
use qvar_core::haar::{haar_unitary, SeededStream};
use qvar_core::linalg::C64;
use qvar_core::riemannian::{gradient_sq_norm, riemannian_gradient};
use qvar_core::sampling::Sequential;
use qvar_core::stats::{mean_estimate, variance_estimate};
use qvar_core::variance_lab::{
    averaged_single_gate_variance, check_theorem2, law_of_total_variance_check, plateau_scan,
    single_gate_variance_mc, theorem2_report, total_cost_variance_mc, total_gradient_variance,
    two_gate_decomposition_check, AnsatzFamily, EstimatorConfig, LayersRule,
};
use qvar_core::weingarten::{z_operator, var_cost, var_gradient_analytic, SingleGateMoments};

fn config(seed: u64, outer: usize) -> EstimatorConfig {
    EstimatorConfig { outer_samples: outer, inner_samples: 20_000, master_seed: seed, confidence_sigmas: 5.0 }
}

#[test]
fn variance_equivalence_on_random_environments() {
    let mut count = 0;
    for n in [2, 3, 4] {
        for m in [1, 2, 4, 8] {
            for s in 0..17u64 {
                let env = Environment::random(n, m, &mut SeededStream::new(301, (n * 100 + m * 10) as u64 + s).rng())
                    .unwrap();
                let z = z_operator(&env);
                let var_e = var_cost(&z).unwrap();
                let var_g = var_gradient_analytic(&z).unwrap();
                assert!(var_e > 0.0);
                assert!((var_e - 0.5 * var_g).abs() <= 1e-10 * var_e.max(1.0), "N={n} M={m}");
                count += 1;
            }
        }
    }
    assert!(count >= 200);
}

#[test]
fn sampled_moments_match_closed_forms() {
    for (k, (n, m)) in [(2, 1), (2, 2), (3, 2), (4, 1)].into_iter().enumerate() {
        let env = Environment::random(n, m, &mut SeededStream::new(302, k as u64).rng()).unwrap();
        let exact = SingleGateMoments::from_env(&env).unwrap();
        let (costs, norms): (Vec<f64>, Vec<f64>) = (0..20_000)
            .map(|s| {
                let u = haar_unitary(n, &mut SeededStream::new(303 + k as u64, s).rng());
                let g = riemannian_gradient(&env, &u).unwrap();
                (env.cost(&u).unwrap(), gradient_sq_norm(&g))
            })
            .unzip();
        assert!(mean_estimate(&costs).agrees_with(exact.avg_e, 5.0));
        assert!(variance_estimate(&costs).agrees_with(exact.var_e, 5.0));
        assert!(mean_estimate(&norms).agrees_with(exact.var_g, 5.0));
    }
}

#[test]
fn single_gate_mc_agrees_at_fixed_other_gates() {
    let circuit = hardware_efficient(2, 1, ObservableKind::LocalZ).unwrap();
    let fixed = GateAssignment::haar(&circuit, &mut SeededStream::new(304, 0).rng());
    for i in 0..2 {
        let mc = single_gate_variance_mc(&circuit, i, &fixed, 20_000, 305, &Sequential).unwrap();
        assert!(mc.agrees(5.0), "{mc:?}");
    }
}

#[test]
fn trivial_environment_has_zero_variance() {
    // an identity observable gives Y = 1 for every slot
    let circuit = hardware_efficient(2, 1, ObservableKind::Identity).unwrap();
    let fixed = GateAssignment::identity(&circuit);
    let mc = single_gate_variance_mc(&circuit, 0, &fixed, 1000, 306, &Sequential).unwrap();
    assert!(mc.var_e.value.abs() < 1e-12 && mc.var_g.value.abs() < 1e-12);
    let total = total_cost_variance_mc(&circuit, &config(307, 200), &Sequential).unwrap();
    assert!(total.value.abs() < 1e-12);
    let grad = total_gradient_variance(&circuit, &config(307, 200), &Sequential).unwrap();
    assert!(grad.value.abs() < 1e-12);
}

#[test]
fn single_slot_totals_match_analytic() {
    let circuit = product_cost(1).unwrap();
    let cfg = config(308, 20_000);
    let total = total_cost_variance_mc(&circuit, &cfg, &Sequential).unwrap();
    assert!(total.agrees_with(1.0 / 3.0, 5.0), "{total:?}");
    let grad = total_gradient_variance(&circuit, &cfg, &Sequential).unwrap();
    assert!(grad.agrees_with(2.0 / 3.0, 5.0), "{grad:?}");
    let v = averaged_single_gate_variance(&circuit, 0, &cfg, &Sequential).unwrap();
    assert!((v.v.value - 1.0 / 3.0).abs() < 1e-12);
    // K = 1: V₁ and Var E coincide, and (K/2) Var g = V₁
    let report = check_theorem2(&circuit, &config(309, 2000), &Sequential).unwrap();
    assert!((report.sum_v.value - 1.0 / 3.0).abs() < 1e-12);
    assert!(report.passed());
}

#[test]
fn averaged_variance_is_seed_stable() {
    let circuit = hardware_efficient(2, 1, ObservableKind::GlobalZ).unwrap();
    for i in 0..2 {
        let a = averaged_single_gate_variance(&circuit, i, &config(310, 400), &Sequential).unwrap();
        let b = averaged_single_gate_variance(&circuit, i, &config(311, 400), &Sequential).unwrap();
        let margin = 5.0 * (a.v.se * a.v.se + b.v.se * b.v.se).sqrt() + 1e-12;
        assert!((a.v.value - b.v.value).abs() <= margin);
        assert!(a.max_equivalence_residual <= 1e-10);
        assert!(a.v_grad.agrees_with(2.0 * a.v.value, 1e-6));
    }
}

#[test]
fn product_cost_oracle() {
    let circuit = product_cost(2).unwrap();
    let cfg = config(312, 4000);
    let report = check_theorem2(&circuit, &cfg, &Sequential).unwrap();
    assert!(report.total_var_e.agrees_with(1.0 / 9.0, 5.0), "{:?}", report.total_var_e);
    assert!(report.sum_v.agrees_with(2.0 / 9.0, 5.0), "{:?}", report.sum_v);

    let dec = two_gate_decomposition_check(&circuit, &cfg, &Sequential).unwrap();
    assert!(dec.check.pass);
    assert!(dec.correction.agrees_with(1.0 / 9.0, 5.0), "{:?}", dec.correction);

    for i in 0..2 {
        let ltv = law_of_total_variance_check(&circuit, i, &cfg, &Sequential).unwrap();
        assert!(ltv.check.pass);
        // Var_i E = f_j² / 3 averages to 1/9, and Avg_i E = 0
        assert!(ltv.avg_var.agrees_with(1.0 / 9.0, 5.0));
        assert!(ltv.var_avg.value.abs() < 1e-12);
    }
}

#[test]
fn decomposition_without_dependence_on_second_gate() {
    // the second qubit's gate never reaches the observable σ_z ⊗ 1
    let circuit = hardware_efficient(2, 1, ObservableKind::LocalZ).unwrap();
    let plain = Circuit::new(
        vec![2, 2],
        vec![GateSlot::variable(&[0]), GateSlot::variable(&[1])],
        ReferenceState::Basis(vec![0, 0]),
        ObservableKind::LocalZ.observable(2),
    )
    .unwrap();
    let dec = two_gate_decomposition_check(&plain, &config(313, 400), &Sequential).unwrap();
    assert!(dec.avg1_var2.value.abs() < 1e-12);
    assert!((dec.avg2_var1.value - 1.0 / 3.0).abs() < 1e-12);
    assert!(dec.correction.agrees_with(0.0, 5.0), "{dec:?}");
    assert!(dec.var12.agrees_with(dec.avg2_var1.value, 5.0));
    assert!(two_gate_decomposition_check(&circuit, &config(313, 400), &Sequential).unwrap().check.pass);
}

#[test]
fn random_two_slot_circuit_decomposition() {
    let mut rng = SeededStream::new(314, 0).rng();
    let fixed = haar_unitary(8, &mut rng);
    let psi: Vec<C64> = {
        let u = haar_unitary(8, &mut rng);
        (0..8).map(|r| u[(r, 0)]).collect()
    };
    let circuit = Circuit::new(
        vec![2, 2, 2],
        vec![
            GateSlot::variable(&[0, 2]),
            GateSlot::matrix(fixed, &[0, 1, 2]),
            GateSlot::variable(&[1]),
            GateSlot::named(NamedGate::Cz, &[1, 0]),
        ],
        ReferenceState::Pure(psi),
        ObservableKind::GlobalZ.observable(3),
    )
    .unwrap();
    let dec = two_gate_decomposition_check(&circuit, &config(315, 400), &Sequential).unwrap();
    assert!(dec.check.pass, "{dec:?}");
    assert!(check_theorem2(&circuit, &config(316, 400), &Sequential).is_ok());
}

#[test]
fn hardware_efficient_sandwich() {
    for (n, layers) in [(2, 1), (3, 2)] {
        let circuit = hardware_efficient(n, layers, ObservableKind::GlobalZ).unwrap();
        let report = check_theorem2(&circuit, &config(317, 200), &Sequential).unwrap();
        assert_eq!(report.per_slot.len(), n * layers);
        assert!(report.per_slot.iter().all(|v| v.value >= 0.0));
        assert!(report.max_equivalence_residual <= 1e-10);
        for i in 0..2 {
            assert!(law_of_total_variance_check(&circuit, i, &config(318, 200), &Sequential).unwrap().check.pass);
        }
    }
}

#[test]
fn two_qubit_global_z_depends_on_one_slot() {
    // the CNOT maps Z⊗Z to 1⊗Z, so only the second gate matters
    let circuit = hardware_efficient(2, 1, ObservableKind::GlobalZ).unwrap();
    let report = check_theorem2(&circuit, &config(319, 400), &Sequential).unwrap();
    assert!(report.per_slot[0].value.abs() < 1e-12);
    assert!(report.per_slot[1].agrees_with(1.0 / 3.0, 5.0));
    assert!(report.total_var_e.agrees_with(1.0 / 3.0, 5.0));
}

#[test]
fn standard_errors_shrink_with_samples() {
    let circuit = hardware_efficient(3, 1, ObservableKind::GlobalZ).unwrap();
    let small = theorem2_report(&circuit, &config(320, 400), &Sequential).unwrap();
    let large = theorem2_report(&circuit, &config(320, 1600), &Sequential).unwrap();
    let ratio = small.total_var_e.se / large.total_var_e.se;
    assert!((1.4..2.9).contains(&ratio), "ratio {ratio}");
    let ratio = small.sum_v.se / large.sum_v.se;
    assert!((1.4..2.9).contains(&ratio), "ratio {ratio}");
}

#[test]
fn identity_observable_scan_is_flat() {
    let table = plateau_scan(
        AnsatzFamily::HardwareEfficient,
        &[3],
        LayersRule::Fixed(2),
        ObservableKind::Identity,
        &config(321, 200),
        &Sequential,
    )
    .unwrap();
    let row = &table.rows[0];
    assert!(row.report.total_var_e.value.abs() < 1e-12);
    assert!(row.report.per_slot.iter().all(|v| v.value.abs() < 1e-12));
    assert!(table.fit.is_none());
}

#[test]
fn small_scan_decays() {
    let table = plateau_scan(
        AnsatzFamily::HardwareEfficient,
        &[2, 3, 4, 5],
        LayersRule::EqualToQubits,
        ObservableKind::GlobalZ,
        &config(322, 200),
        &Sequential,
    )
    .unwrap();
    assert!(table.bounds_hold());
    assert!(table.slope().unwrap() < 0.0);
    assert_eq!(table.rows[3].k(), 25);
}

#[test]
fn dense_observable_matches_pauli_sum() {
    let circuit = hardware_efficient(2, 1, ObservableKind::GlobalZ).unwrap();
    let dense = Circuit::new(
        vec![2, 2],
        circuit.slots().to_vec(),
        ReferenceState::Basis(vec![0, 0]),
        Observable::Dense(circuit.observable_matrix().clone()),
    )
    .unwrap();
    let a = theorem2_report(&circuit, &config(323, 200), &Sequential).unwrap();
    let b = theorem2_report(&dense, &config(323, 200), &Sequential).unwrap();
    assert_eq!(a.total_var_e, b.total_var_e);
}
