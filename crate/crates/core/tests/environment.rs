use qvar_core::circuit::{
    hardware_efficient, product_cost, Circuit, GateAssignment, GateSlot, NamedGate, ObservableKind, Pauli,
};
use qvar_core::haar::SeededStream;
use qvar_core::linalg::{kron, ComplexMatrix};
use qvar_core::weingarten::SingleGateMoments;

/// Operator of a hardware-efficient circuit built only from Kronecker
/// products: every gate acts on one qubit or on an adjacent pair.
fn hea_operator(n: usize, layers: usize, a: &GateAssignment) -> ComplexMatrix {
    let lift = |gate: &ComplexMatrix, first: usize, width: usize| {
        let left = ComplexMatrix::identity(1 << first);
        let right = ComplexMatrix::identity(1 << (n - first - width));
        kron(&kron(&left, gate), &right)
    };
    let mut total = ComplexMatrix::identity(1 << n);
    let mut next = 0;
    for _ in 0..layers {
        for q in 0..n {
            total = lift(&a.unitaries[next], q, 1).matmul(&total);
            next += 1;
        }
        let cnot = NamedGate::Cnot.matrix();
        for q in 0..n - 1 {
            total = lift(&cnot, q, 2).matmul(&total);
        }
    }
    total
}

fn global_z(n: usize) -> ComplexMatrix {
    (1..n).fold(Pauli::Z.matrix(), |acc, _| kron(&acc, &Pauli::Z.matrix()))
}

#[test]
fn cost_matches_kronecker_oracle() {
    for (n, layers) in [(2, 1), (3, 2), (4, 1)] {
        let circuit = hardware_efficient(n, layers, ObservableKind::GlobalZ).unwrap();
        let o = global_z(n);
        for s in 0..10 {
            let a = GateAssignment::haar(&circuit, &mut SeededStream::new(201, s).rng());
            let w = hea_operator(n, layers, &a);
            // reference |0…0>: E = <0| W† O W |0>
            let col: Vec<_> = (0..1 << n).map(|r| w[(r, 0)]).collect();
            let ov = o.matvec(&col);
            let expected: f64 = col.iter().zip(&ov).map(|(c, x)| (c.conj() * x).re).sum();
            assert!((circuit.cost(&a).unwrap() - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn every_environment_reproduces_the_cost() {
    let circuit = hardware_efficient(3, 2, ObservableKind::LocalZ).unwrap();
    let mut worst: f64 = 0.0;
    for s in 0..100 {
        let a = GateAssignment::haar(&circuit, &mut SeededStream::new(202, s).rng());
        let cost = circuit.cost(&a).unwrap();
        let envs = circuit.environments(&a).unwrap();
        assert_eq!(envs.len(), circuit.num_variable());
        for (i, env) in envs.iter().enumerate() {
            worst = worst.max((env.cost(&a.unitaries[i]).unwrap() - cost).abs());
            if s < 5 {
                assert_eq!(env, &circuit.environment(&a, i).unwrap());
            }
        }
    }
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn environment_is_independent_of_its_own_gate() {
    let circuit = hardware_efficient(2, 2, ObservableKind::GlobalZ).unwrap();
    let mut rng = SeededStream::new(203, 0).rng();
    let a = GateAssignment::haar(&circuit, &mut rng);
    for i in 0..circuit.num_variable() {
        let other = GateAssignment::haar(&circuit, &mut rng);
        let b = a.with_replaced(i, other.unitaries[i].clone());
        let ea = circuit.environment(&a, i).unwrap();
        let eb = circuit.environment(&b, i).unwrap();
        assert!(ea.x().distance(eb.x()) < 1e-12 && ea.y().distance(eb.y()) < 1e-12);
    }
}

#[test]
fn identity_insertion_leaves_everything_unchanged() {
    let base = hardware_efficient(3, 1, ObservableKind::GlobalZ).unwrap();
    let mut slots = base.slots().to_vec();
    slots.insert(3, GateSlot::named(NamedGate::I, &[1]));
    slots.push(GateSlot::matrix(ComplexMatrix::identity(4), &[2, 0]));
    let padded = Circuit::new(
        base.local_dims().to_vec(),
        slots,
        base.reference().clone(),
        base.observable().clone(),
    )
    .unwrap();
    assert_eq!(padded.num_variable(), base.num_variable());
    for s in 0..20 {
        let a = GateAssignment::haar(&base, &mut SeededStream::new(204, s).rng());
        assert!((base.cost(&a).unwrap() - padded.cost(&a).unwrap()).abs() < 1e-12);
        for i in 0..base.num_variable() {
            let m1 = SingleGateMoments::from_env(&base.environment(&a, i).unwrap()).unwrap();
            let m2 = SingleGateMoments::from_env(&padded.environment(&a, i).unwrap()).unwrap();
            assert!((m1.var_e - m2.var_e).abs() < 1e-12 && (m1.avg_e - m2.avg_e).abs() < 1e-12);
        }
    }
}

#[test]
fn product_cost_factorizes() {
    let circuit = product_cost(2).unwrap();
    for s in 0..20 {
        let a = GateAssignment::haar(&circuit, &mut SeededStream::new(205, s).rng());
        let bloch_z = |u: &ComplexMatrix| (u.adjoint().matmul(&Pauli::Z.matrix()).matmul(u))[(0, 0)].re;
        let expected = bloch_z(&a.unitaries[0]) * bloch_z(&a.unitaries[1]);
        assert!((circuit.cost(&a).unwrap() - expected).abs() < 1e-12);
    }
}
