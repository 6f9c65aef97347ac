//! Circuit model, cost evaluation and single-gate environments.
//!
//! Slots apply left to right: the circuit operator is
//! `𝒰 = G_last ⋯ G_first`, and the cost is `E = Tr(𝒰 ρ₀ 𝒰† O)`.
//!
//! For a variable slot `i` the cost takes the form `E(U) = Tr(Y Ũ X Ũ†)`
//! with `Ũ = U ⊗ 1_M`, where `X` carries `ρ₀` propagated through the gates
//! before the slot and `Y` carries `O` propagated back through the gates
//! after it. Both are expressed in a factor ordering in which the slot's
//! targets lead.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::haar::{ginibre, haar_unitary};
use crate::linalg::{
    eigh, kron, permute_factors, ComplexMatrix, FactorShape, LocalLayout, C64, I, ONE, STRUCTURE_TOL, ZERO,
};

/// Largest register dimension handled by the dense simulator.
pub const DIMENSION_LIMIT: usize = 4096;

/// Returns the real part of a scalar that must be real, rejecting an
/// imaginary residue above `1e-10 · max(1, scale)`.
pub fn checked_real(z: C64, scale: f64) -> Result<f64> {
    if z.im.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::I => ComplexMatrix::identity(2),
            Pauli::X => ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]]),
            Pauli::Y => ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]]),
            Pauli::Z => ComplexMatrix::from_real_diagonal(&[1.0, -1.0]),
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NamedGate {
    I,
    X,
    Y,
    Z,
    H,
    Cnot,
    Cz,
}

impl NamedGate {
    pub const ALL: [NamedGate; 7] =
        [NamedGate::I, NamedGate::X, NamedGate::Y, NamedGate::Z, NamedGate::H, NamedGate::Cnot, NamedGate::Cz];

    pub fn name(self) -> &'static str {
        match self {
            NamedGate::I => "I",
            NamedGate::X => "X",
            NamedGate::Y => "Y",
            NamedGate::Z => "Z",
            NamedGate::H => "H",
            NamedGate::Cnot => "CNOT",
            NamedGate::Cz => "CZ",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            NamedGate::Cnot | NamedGate::Cz => 2,
            _ => 1,
        }
    }

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            NamedGate::I => Pauli::I.matrix(),
            NamedGate::X => Pauli::X.matrix(),
            NamedGate::Y => Pauli::Y.matrix(),
            NamedGate::Z => Pauli::Z.matrix(),
            NamedGate::H => {
                let h = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
                ComplexMatrix::from_rows(&[&[h, h], &[h, -h]])
            }
            NamedGate::Cnot => {
                let mut m = ComplexMatrix::zeros(4, 4);
                m[(0, 0)] = ONE;
                m[(1, 1)] = ONE;
                m[(2, 3)] = ONE;
                m[(3, 2)] = ONE;
                m
            }
            NamedGate::Cz => ComplexMatrix::from_real_diagonal(&[1.0, 1.0, 1.0, -1.0]),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixedGate {
    Named(NamedGate),
    Matrix(ComplexMatrix),
}

impl FixedGate {
    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            FixedGate::Named(g) => g.matrix(),
            FixedGate::Matrix(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SlotKind {
    Fixed(FixedGate),
    Variable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateSlot {
    pub kind: SlotKind,
    pub targets: Vec<usize>,
}

impl GateSlot {
    pub fn variable(targets: &[usize]) -> Self {
        Self { kind: SlotKind::Variable, targets: targets.to_vec() }
    }

    pub fn named(gate: NamedGate, targets: &[usize]) -> Self {
        Self { kind: SlotKind::Fixed(FixedGate::Named(gate)), targets: targets.to_vec() }
    }

    pub fn matrix(matrix: ComplexMatrix, targets: &[usize]) -> Self {
        Self { kind: SlotKind::Fixed(FixedGate::Matrix(matrix)), targets: targets.to_vec() }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self.kind, SlotKind::Variable)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub paulis: Vec<Pauli>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    PauliSum(Vec<PauliTerm>),
    Dense(ComplexMatrix),
}

/// Observables offered by the built-in ansatz families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservableKind {
    /// `σ_z ⊗ ⋯ ⊗ σ_z`
    GlobalZ,
    /// `σ_z` on the first qubit, identity elsewhere.
    LocalZ,
    /// The identity, for which every variance vanishes.
    Identity,
}

impl ObservableKind {
    pub fn observable(self, n: usize) -> Observable {
        let paulis = match self {
            ObservableKind::GlobalZ => vec![Pauli::Z; n],
            ObservableKind::LocalZ => {
                let mut p = vec![Pauli::I; n];
                p[0] = Pauli::Z;
                p
            }
            ObservableKind::Identity => vec![Pauli::I; n],
        };
        Observable::PauliSum(vec![PauliTerm { coeff: 1.0, paulis }])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceState {
    /// Computational basis state given by one digit per qudit.
    Basis(Vec<usize>),
    /// Normalized state vector; promoted to a projector on demand.
    Pure(Vec<C64>),
    Density(ComplexMatrix),
}

#[derive(Clone, Debug)]
struct SlotData {
    layout: LocalLayout,
    dim: usize,
    /// gate and its adjoint for fixed slots
    fixed: Option<(ComplexMatrix, ComplexMatrix)>,
    /// factor order with the slot's targets leading
    perm: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Circuit {
    local_dims: Vec<usize>,
    slots: Vec<GateSlot>,
    reference: ReferenceState,
    observable: Observable,
    shape: FactorShape,
    rho0: ComplexMatrix,
    observable_matrix: ComplexMatrix,
    slot_data: Vec<SlotData>,
    variable_slots: Vec<usize>,
}

impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.local_dims == other.local_dims
            && self.slots == other.slots
            && self.reference == other.reference
            && self.observable == other.observable
    }
}

fn invalid(msg: alloc::string::String) -> Error {
    Error::InvalidCircuit(msg)
}

impl Circuit {
    pub fn new(
        local_dims: Vec<usize>,
        slots: Vec<GateSlot>,
        reference: ReferenceState,
        observable: Observable,
    ) -> Result<Self> {
        if local_dims.is_empty() {
            return Err(invalid("register has no qudits".into()));
        }
        let shape = FactorShape::new(local_dims.clone())?;
        let dim = local_dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).unwrap_or(usize::MAX);
        if dim > DIMENSION_LIMIT {
            return Err(Error::DimensionLimit { dim, limit: DIMENSION_LIMIT });
        }

        let mut slot_data = Vec::with_capacity(slots.len());
        let mut variable_slots = Vec::new();
        for (s, slot) in slots.iter().enumerate() {
            if slot.targets.is_empty() {
                return Err(invalid(format!("slot {s} has no targets")));
            }
            for (k, &t) in slot.targets.iter().enumerate() {
                if t >= local_dims.len() {
                    return Err(invalid(format!("slot {s} targets qudit {t} outside the register")));
                }
                if slot.targets[..k].contains(&t) {
                    return Err(invalid(format!("slot {s} repeats target {t}")));
                }
            }
            let layout = LocalLayout::new(&shape, &slot.targets)?;
            let gate_dim = layout.local_dim();
            let fixed = match &slot.kind {
                SlotKind::Variable => {
                    variable_slots.push(s);
                    None
                }
                SlotKind::Fixed(gate) => {
                    if let FixedGate::Named(g) = gate {
                        if g.arity() != slot.targets.len() || slot.targets.iter().any(|&t| local_dims[t] != 2) {
                            return Err(invalid(format!(
                                "slot {s}: gate {} needs {} qubit target(s)",
                                g.name(),
                                g.arity()
                            )));
                        }
                    }
                    let m = gate.matrix();
                    if m.rows() != gate_dim || m.cols() != gate_dim {
                        return Err(invalid(format!(
                            "slot {s}: gate is {}x{}, targets span dimension {gate_dim}",
                            m.rows(),
                            m.cols()
                        )));
                    }
                    let residual = m.unitarity_residual();
                    if residual > STRUCTURE_TOL {
                        return Err(invalid(format!("slot {s}: fixed gate is not unitary (residual {residual:e})")));
                    }
                    let adj = m.adjoint();
                    Some((m, adj))
                }
            };
            let mut perm = slot.targets.clone();
            perm.extend((0..local_dims.len()).filter(|q| !slot.targets.contains(q)));
            slot_data.push(SlotData { layout, dim: gate_dim, fixed, perm });
        }

        let rho0 = reference_matrix(&reference, &local_dims, dim)?;
        let observable_matrix = observable_matrix(&observable, &local_dims, dim)?;

        Ok(Self {
            local_dims,
            slots,
            reference,
            observable,
            shape,
            rho0,
            observable_matrix,
            slot_data,
            variable_slots,
        })
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn num_qudits(&self) -> usize {
        self.local_dims.len()
    }

    pub fn dim(&self) -> usize {
        self.shape.total()
    }

    pub fn shape(&self) -> &FactorShape {
        &self.shape
    }

    pub fn slots(&self) -> &[GateSlot] {
        &self.slots
    }

    pub fn reference(&self) -> &ReferenceState {
        &self.reference
    }

    pub fn observable(&self) -> &Observable {
        &self.observable
    }

    pub fn rho0(&self) -> &ComplexMatrix {
        &self.rho0
    }

    pub fn observable_matrix(&self) -> &ComplexMatrix {
        &self.observable_matrix
    }

    /// Number of variable slots, `K`.
    pub fn num_variable(&self) -> usize {
        self.variable_slots.len()
    }

    /// Slot position of the `i`-th variable gate (0-based).
    pub fn variable_slot(&self, i: usize) -> Result<usize> {
        self.variable_slots
            .get(i)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: i, count: self.variable_slots.len() })
    }

    /// Gate dimensions `N_i` of the variable slots.
    pub fn variable_dims(&self) -> Vec<usize> {
        self.variable_slots.iter().map(|&s| self.slot_data[s].dim).collect()
    }

    pub fn slot_dim(&self, slot: usize) -> usize {
        self.slot_data[slot].dim
    }

    pub fn check_assignment(&self, a: &GateAssignment) -> Result<()> {
        if a.unitaries.len() != self.num_variable() {
            return Err(Error::InvalidAssignment(format!(
                "{} unitaries for {} variable slots",
                a.unitaries.len(),
                self.num_variable()
            )));
        }
        for (i, (u, &s)) in a.unitaries.iter().zip(&self.variable_slots).enumerate() {
            let n = self.slot_data[s].dim;
            if u.rows() != n || u.cols() != n {
                return Err(Error::InvalidAssignment(format!(
                    "unitary {i} is {}x{}, slot needs {n}x{n}",
                    u.rows(),
                    u.cols()
                )));
            }
            let residual = u.unitarity_residual();
            if residual > STRUCTURE_TOL {
                return Err(Error::InvalidAssignment(format!("unitary {i} is not unitary (residual {residual:e})")));
            }
        }
        Ok(())
    }

    /// Lifts `gate` to the full register through `kron` with the identity
    /// and a factor permutation.
    pub fn embed_gate(&self, slot: &GateSlot, gate: &ComplexMatrix) -> Result<ComplexMatrix> {
        let layout_dim: usize = slot
            .targets
            .iter()
            .map(|&t| self.local_dims.get(t).copied().ok_or(Error::IndexOutOfRange { index: t, count: self.num_qudits() }))
            .product::<Result<usize>>()?;
        gate.ensure_dim(layout_dim)?;
        let mut perm = slot.targets.clone();
        perm.extend((0..self.num_qudits()).filter(|q| !slot.targets.contains(q)));
        let permuted_dims: Vec<usize> = perm.iter().map(|&q| self.local_dims[q]).collect();
        let complement = self.dim() / layout_dim;
        let lifted = kron(gate, &ComplexMatrix::identity(complement));
        let mut inverse = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        permute_factors(&lifted, &FactorShape::new(permuted_dims)?, &inverse)
    }

    fn gate_pair<'a>(&'a self, slot: usize, a: &'a GateAssignment, var_adj: &'a [ComplexMatrix]) -> (&'a ComplexMatrix, &'a ComplexMatrix) {
        match &self.slot_data[slot].fixed {
            Some((g, g_adj)) => (g, g_adj),
            None => {
                let i = self.variable_slots.binary_search(&slot).expect("variable slot");
                (&a.unitaries[i], &var_adj[i])
            }
        }
    }

    /// The evolved state `𝒰 ρ₀ 𝒰†`.
    pub fn evolve(&self, a: &GateAssignment) -> Result<ComplexMatrix> {
        self.check_assignment(a)?;
        let var_adj: Vec<ComplexMatrix> = a.unitaries.iter().map(|u| u.adjoint()).collect();
        let mut state = self.rho0.clone();
        for s in 0..self.slots.len() {
            let (g, g_adj) = self.gate_pair(s, a, &var_adj);
            self.slot_data[s].layout.conjugate(g, g_adj, &mut state);
        }
        Ok(state)
    }

    /// `E = Tr(𝒰 ρ₀ 𝒰† O)`.
    pub fn cost(&self, a: &GateAssignment) -> Result<f64> {
        let state = self.evolve(a)?;
        let e = state.trace_of_product(&self.observable_matrix);
        let value = checked_real(e, self.observable_matrix.max_abs())?;
        if !value.is_finite() {
            return Err(Error::NonFiniteCost);
        }
        Ok(value)
    }

    fn to_leading(&self, slot: usize, op: &ComplexMatrix) -> Result<ComplexMatrix> {
        permute_factors(op, &self.shape, &self.slot_data[slot].perm)
    }

    /// Environment of the `i`-th variable gate (0-based).
    pub fn environment(&self, a: &GateAssignment, i: usize) -> Result<Environment> {
        self.check_assignment(a)?;
        let slot = self.variable_slot(i)?;
        let var_adj: Vec<ComplexMatrix> = a.unitaries.iter().map(|u| u.adjoint()).collect();
        let mut x = self.rho0.clone();
        for s in 0..slot {
            let (g, g_adj) = self.gate_pair(s, a, &var_adj);
            self.slot_data[s].layout.conjugate(g, g_adj, &mut x);
        }
        let mut y = self.observable_matrix.clone();
        for s in (slot + 1..self.slots.len()).rev() {
            let (g, g_adj) = self.gate_pair(s, a, &var_adj);
            // Y <- G† Y G
            self.slot_data[s].layout.conjugate(g_adj, g, &mut y);
        }
        let n = self.slot_data[slot].dim;
        Environment::new(self.to_leading(slot, &x)?, self.to_leading(slot, &y)?, n, self.dim() / n)
    }

    /// Visits the environments of all variable gates in circuit order,
    /// sharing one forward and one backward sweep.
    pub fn for_each_environment(
        &self,
        a: &GateAssignment,
        mut visit: impl FnMut(usize, Environment) -> Result<()>,
    ) -> Result<()> {
        self.check_assignment(a)?;
        let var_adj: Vec<ComplexMatrix> = a.unitaries.iter().map(|u| u.adjoint()).collect();
        let k = self.num_variable();
        let mut ys: Vec<ComplexMatrix> = Vec::with_capacity(k);
        let mut y = self.observable_matrix.clone();
        for s in (0..self.slots.len()).rev() {
            if self.slot_data[s].fixed.is_none() {
                ys.push(y.clone());
            }
            let (g, g_adj) = self.gate_pair(s, a, &var_adj);
            self.slot_data[s].layout.conjugate(g_adj, g, &mut y);
        }
        ys.reverse();
        let mut x = self.rho0.clone();
        let mut next_var = 0;
        for s in 0..self.slots.len() {
            if self.slot_data[s].fixed.is_none() {
                let n = self.slot_data[s].dim;
                let y_i = core::mem::replace(&mut ys[next_var], ComplexMatrix::zeros(1, 1));
                let env = Environment::new(self.to_leading(s, &x)?, self.to_leading(s, &y_i)?, n, self.dim() / n)?;
                visit(next_var, env)?;
                next_var += 1;
            }
            let (g, g_adj) = self.gate_pair(s, a, &var_adj);
            self.slot_data[s].layout.conjugate(g, g_adj, &mut x);
        }
        Ok(())
    }

    pub fn environments(&self, a: &GateAssignment) -> Result<Vec<Environment>> {
        let mut out = Vec::with_capacity(self.num_variable());
        self.for_each_environment(a, |_, env| {
            out.push(env);
            Ok(())
        })?;
        Ok(out)
    }
}

fn reference_matrix(reference: &ReferenceState, dims: &[usize], dim: usize) -> Result<ComplexMatrix> {
    match reference {
        ReferenceState::Basis(digits) => {
            if digits.len() != dims.len() {
                return Err(invalid(format!("basis state has {} digits for {} qudits", digits.len(), dims.len())));
            }
            let mut index = 0;
            for (&d, &local) in digits.iter().zip(dims) {
                if d >= local {
                    return Err(invalid(format!("basis digit {d} exceeds local dimension {local}")));
                }
                index = index * local + d;
            }
            let mut rho = ComplexMatrix::zeros(dim, dim);
            rho[(index, index)] = ONE;
            Ok(rho)
        }
        ReferenceState::Pure(psi) => {
            if psi.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: psi.len() });
            }
            let norm_sqr: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            if (norm_sqr - 1.0).abs() > STRUCTURE_TOL {
                return Err(invalid(format!("pure reference state has squared norm {norm_sqr}")));
            }
            Ok(ComplexMatrix::outer(psi))
        }
        ReferenceState::Density(rho) => {
            rho.ensure_dim(dim)?;
            let residual = rho.hermiticity_residual();
            if residual > STRUCTURE_TOL {
                return Err(Error::NotHermitian(residual));
            }
            let tr = rho.trace();
            if (tr - ONE).norm() > STRUCTURE_TOL {
                return Err(invalid(format!("reference density matrix has trace {tr}")));
            }
            let (values, _) = eigh(rho)?;
            if let Some(&low) = values.first() {
                if low < -STRUCTURE_TOL {
                    return Err(invalid(format!("reference density matrix has eigenvalue {low:e}")));
                }
            }
            Ok(rho.clone())
        }
    }
}

fn observable_matrix(observable: &Observable, dims: &[usize], dim: usize) -> Result<ComplexMatrix> {
    match observable {
        Observable::PauliSum(terms) => {
            if dims.iter().any(|&d| d != 2) {
                return Err(invalid("Pauli-string observables need a qubit register".into()));
            }
            let mut total = ComplexMatrix::zeros(dim, dim);
            for term in terms {
                if term.paulis.len() != dims.len() {
                    return Err(invalid(format!(
                        "Pauli string of length {} for {} qubits",
                        term.paulis.len(),
                        dims.len()
                    )));
                }
                if !term.coeff.is_finite() {
                    return Err(invalid("non-finite Pauli coefficient".into()));
                }
                let op = term
                    .paulis
                    .iter()
                    .fold(ComplexMatrix::identity(1), |acc, p| kron(&acc, &p.matrix()));
                total = &total + &op.scale_real(term.coeff);
            }
            Ok(total)
        }
        Observable::Dense(o) => {
            o.ensure_dim(dim)?;
            let residual = o.hermiticity_residual();
            if residual > STRUCTURE_TOL {
                return Err(Error::NotHermitian(residual));
            }
            Ok(o.clone())
        }
    }
}

/// One unitary per variable slot, in circuit order.
#[derive(Clone, Debug, PartialEq)]
pub struct GateAssignment {
    pub unitaries: Vec<ComplexMatrix>,
}

impl GateAssignment {
    pub fn new(unitaries: Vec<ComplexMatrix>) -> Self {
        Self { unitaries }
    }

    pub fn identity(circuit: &Circuit) -> Self {
        Self { unitaries: circuit.variable_dims().into_iter().map(ComplexMatrix::identity).collect() }
    }

    /// Independent Haar draws for every variable slot, in slot order.
    pub fn haar<R: Rng + ?Sized>(circuit: &Circuit, rng: &mut R) -> Self {
        Self { unitaries: circuit.variable_dims().into_iter().map(|n| haar_unitary(n, rng)).collect() }
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    pub fn with_replaced(&self, i: usize, u: ComplexMatrix) -> Self {
        let mut out = self.clone();
        out.unitaries[i] = u;
        out
    }
}

/// The pair `(X, Y)` on `C^N ⊗ C^M` for one variable gate.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    x: ComplexMatrix,
    y: ComplexMatrix,
    n: usize,
    m: usize,
}

impl Environment {
    pub fn new(x: ComplexMatrix, y: ComplexMatrix, n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidShape("environment dimensions must be positive".into()));
        }
        x.ensure_dim(n * m)?;
        y.ensure_dim(n * m)?;
        Ok(Self { x, y, n, m })
    }

    /// Random environment with `X` a density matrix drawn from the
    /// Hilbert-Schmidt ensemble and `Y` a Hermitian matrix with Gaussian
    /// entries.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Self> {
        let d = n * m;
        let g = ginibre(d, d, rng);
        let w = g.matmul(&g.adjoint());
        let tr = w.trace().re;
        let h = ginibre(d, d, rng);
        let y = (&h + &h.adjoint()).scale_real(0.5);
        Self::new(w.scale_real(1.0 / tr), y, n, m)
    }

    pub fn x(&self) -> &ComplexMatrix {
        &self.x
    }

    pub fn y(&self) -> &ComplexMatrix {
        &self.y
    }

    /// Gate dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Complement dimension `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn shape(&self) -> FactorShape {
        FactorShape::bipartite(self.n, self.m).expect("positive dimensions")
    }

    /// `Ũ X Ũ†` with `Ũ = U ⊗ 1_M`.
    pub fn rotated_x(&self, u: &ComplexMatrix) -> Result<ComplexMatrix> {
        u.ensure_dim(self.n)?;
        let layout = LocalLayout::new(&self.shape(), &[0])?;
        let mut out = self.x.clone();
        layout.conjugate(u, &u.adjoint(), &mut out);
        Ok(out)
    }

    /// `E(U) = Tr(Y Ũ X Ũ†)`.
    pub fn cost(&self, u: &ComplexMatrix) -> Result<f64> {
        let rotated = self.rotated_x(u)?;
        let e = self.y.trace_of_product(&rotated);
        checked_real(e, self.y.max_abs() * self.x.max_abs() * (self.n * self.m) as f64)
    }
}

/// Hardware-efficient ansatz on `n` qubits: each layer places a variable
/// single-qubit gate on every qubit followed by the CNOT ladder
/// `CNOT(0,1), CNOT(1,2), …`. The reference state is `|0…0>`.
pub fn hardware_efficient(n: usize, layers: usize, observable: ObservableKind) -> Result<Circuit> {
    if n < 2 || layers < 1 {
        return Err(invalid(format!("hardware-efficient ansatz needs n >= 2 and L >= 1 (got n={n}, L={layers})")));
    }
    let mut slots = Vec::with_capacity(layers * (2 * n - 1));
    for _ in 0..layers {
        for q in 0..n {
            slots.push(GateSlot::variable(&[q]));
        }
        for q in 0..n - 1 {
            slots.push(GateSlot::named(NamedGate::Cnot, &[q, q + 1]));
        }
    }
    Circuit::new(vec![2; n], slots, ReferenceState::Basis(vec![0; n]), observable.observable(n))
}

/// One variable gate per qubit and no entanglers, measured with
/// `σ_z^{⊗n}`: the cost factorizes into independent zero-mean factors.
pub fn product_cost(n: usize) -> Result<Circuit> {
    if n < 1 {
        return Err(invalid("product-cost circuit needs at least one qubit".into()));
    }
    let slots = (0..n).map(|q| GateSlot::variable(&[q])).collect();
    Circuit::new(vec![2; n], slots, ReferenceState::Basis(vec![0; n]), ObservableKind::GlobalZ.observable(n))
}

/// Embeds a training set `{(ρ_s, O_s)}` as one circuit by appending a
/// register qudit of dimension `S` that no gate touches:
/// `ρ₀ = (1/S) Σ_s ρ_s ⊗ |s><s|` and `O = S · Σ_s O_s ⊗ |s><s|`, so that
/// `E = Σ_s Tr(𝒰 ρ_s 𝒰† O_s)`.
pub fn with_training_set(
    local_dims: Vec<usize>,
    slots: Vec<GateSlot>,
    training: &[(ComplexMatrix, ComplexMatrix)],
) -> Result<Circuit> {
    let s_count = training.len();
    if s_count == 0 {
        return Err(invalid("training set is empty".into()));
    }
    let base: usize = local_dims.iter().product();
    let mut rho = ComplexMatrix::zeros(base * s_count, base * s_count);
    let mut obs = ComplexMatrix::zeros(base * s_count, base * s_count);
    for (s, (rho_s, o_s)) in training.iter().enumerate() {
        rho_s.ensure_dim(base)?;
        o_s.ensure_dim(base)?;
        let mut proj = ComplexMatrix::zeros(s_count, s_count);
        proj[(s, s)] = ONE;
        rho = &rho + &kron(rho_s, &proj).scale_real(1.0 / s_count as f64);
        obs = &obs + &kron(o_s, &proj).scale_real(s_count as f64);
    }
    let mut dims = local_dims;
    dims.push(s_count);
    Circuit::new(dims, slots, ReferenceState::Density(rho), Observable::Dense(obs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::SeededStream;

    fn z() -> ComplexMatrix {
        Pauli::Z.matrix()
    }

    fn single_qubit_bloch() -> Circuit {
        Circuit::new(
            vec![2],
            vec![GateSlot::variable(&[0])],
            ReferenceState::Basis(vec![0]),
            Observable::Dense(z()),
        )
        .unwrap()
    }

    #[test]
    fn embed_identity_and_leading_factor() {
        let c = hardware_efficient(3, 1, ObservableKind::GlobalZ).unwrap();
        for q in 0..3 {
            let e = c.embed_gate(&GateSlot::variable(&[q]), &ComplexMatrix::identity(2)).unwrap();
            assert_eq!(e, ComplexMatrix::identity(8));
        }
        let c2 = hardware_efficient(2, 1, ObservableKind::GlobalZ).unwrap();
        let e = c2.embed_gate(&GateSlot::variable(&[0]), &Pauli::X.matrix()).unwrap();
        assert_eq!(e, kron(&Pauli::X.matrix(), &ComplexMatrix::identity(2)));
        assert!(c2.embed_gate(&GateSlot::variable(&[0]), &ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn embed_cnot_matches_basis_action() {
        // control qubit 1, target qubit 0 on three qubits
        let c = hardware_efficient(3, 1, ObservableKind::GlobalZ).unwrap();
        let e = c.embed_gate(&GateSlot::named(NamedGate::Cnot, &[1, 0]), &NamedGate::Cnot.matrix()).unwrap();
        for input in 0..8usize {
            let (b0, b1, b2) = (input >> 2 & 1, input >> 1 & 1, input & 1);
            let out_b0 = b0 ^ b1;
            let expected = out_b0 << 2 | b1 << 1 | b2;
            for row in 0..8 {
                let want = if row == expected { ONE } else { ZERO };
                assert_eq!(e[(row, input)], want, "input {input:03b}");
            }
        }
    }

    #[test]
    fn empty_circuit_cost_is_expectation() {
        let rho = ReferenceState::Basis(vec![1, 0]);
        let c = Circuit::new(vec![2, 2], vec![], rho, ObservableKind::LocalZ.observable(2)).unwrap();
        assert_eq!(c.cost(&GateAssignment::new(vec![])).unwrap(), -1.0);
    }

    #[test]
    fn single_qubit_cost_matches_direct_formula() {
        let c = single_qubit_bloch();
        for idx in 0..20 {
            let u = haar_unitary(2, &mut SeededStream::new(5, idx).rng());
            let direct = u.adjoint().matmul(&z()).matmul(&u)[(0, 0)].re;
            let a = GateAssignment::new(vec![u.clone()]);
            assert!((c.cost(&a).unwrap() - direct).abs() < 1e-14);
            let env = c.environment(&a, 0).unwrap();
            assert!((env.cost(&u).unwrap() - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn full_register_gate_environment_is_trivial() {
        let c = Circuit::new(
            vec![2, 2],
            vec![GateSlot::variable(&[0, 1])],
            ReferenceState::Basis(vec![0, 0]),
            ObservableKind::GlobalZ.observable(2),
        )
        .unwrap();
        let a = GateAssignment::haar(&c, &mut SeededStream::new(1, 0).rng());
        let env = c.environment(&a, 0).unwrap();
        assert_eq!(env.m(), 1);
        assert_eq!(env.x(), c.rho0());
        assert_eq!(env.y(), c.observable_matrix());
    }

    #[test]
    fn environment_hermitian_on_second_qubit() {
        let c = hardware_efficient(2, 2, ObservableKind::GlobalZ).unwrap();
        let a = GateAssignment::haar(&c, &mut SeededStream::new(2, 0).rng());
        let env = c.environment(&a, 1).unwrap();
        assert!(env.x().hermiticity_residual() < 1e-12);
        assert!(env.y().hermiticity_residual() < 1e-12);
    }

    #[test]
    fn environment_cost_edge_cases() {
        let x = ComplexMatrix::identity(4);
        let y = kron(&z(), &Pauli::X.matrix());
        let env = Environment::new(x, y.clone(), 2, 2).unwrap();
        let u = haar_unitary(2, &mut SeededStream::new(3, 3).rng());
        assert!((env.cost(&u).unwrap() - y.trace().re).abs() < 1e-14);

        let xr = kron(&ComplexMatrix::outer(&[ONE, ZERO]), &ComplexMatrix::identity(2).scale_real(0.5));
        let env = Environment::new(xr.clone(), y.clone(), 2, 2).unwrap();
        let tyx = y.matmul(&xr).trace().re;
        assert!((env.cost(&ComplexMatrix::identity(2)).unwrap() - tyx).abs() < 1e-15);

        let env = Environment::new(ComplexMatrix::outer(&[ONE, ZERO]), z(), 2, 1).unwrap();
        assert!(env.cost(&NamedGate::H.matrix()).unwrap().abs() < 1e-15);
        assert!(env.cost(&ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn hardware_efficient_counts() {
        let count = |c: &Circuit| c.slots().iter().filter(|s| !s.is_variable()).count();
        let c = hardware_efficient(2, 1, ObservableKind::GlobalZ).unwrap();
        assert_eq!((c.num_variable(), count(&c)), (2, 1));
        let c = hardware_efficient(3, 2, ObservableKind::GlobalZ).unwrap();
        assert_eq!((c.num_variable(), count(&c)), (6, 4));
        for n in 2..=5 {
            let c = hardware_efficient(n, 2, ObservableKind::GlobalZ).unwrap();
            assert!((c.cost(&GateAssignment::identity(&c)).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!(hardware_efficient(1, 1, ObservableKind::GlobalZ).is_err());
        assert!(hardware_efficient(2, 0, ObservableKind::GlobalZ).is_err());
    }

    #[test]
    fn invalid_circuits_rejected() {
        let obs = || Observable::Dense(ComplexMatrix::identity(4));
        let basis = || ReferenceState::Basis(vec![0, 0]);
        assert!(Circuit::new(vec![2, 2], vec![GateSlot::variable(&[0, 0])], basis(), obs()).is_err());
        assert!(Circuit::new(vec![2, 2], vec![GateSlot::variable(&[2])], basis(), obs()).is_err());
        let bad = GateSlot::matrix(ComplexMatrix::from_real_diagonal(&[1.0, 2.0]), &[0]);
        assert!(Circuit::new(vec![2, 2], vec![bad], basis(), obs()).is_err());
        assert!(Circuit::new(vec![2, 2], vec![GateSlot::named(NamedGate::Cnot, &[0])], basis(), obs()).is_err());
        let not_psd = ComplexMatrix::from_real_diagonal(&[1.5, -0.5, 0.0, 0.0]);
        assert!(Circuit::new(vec![2, 2], vec![], ReferenceState::Density(not_psd), obs()).is_err());
        let non_herm = ComplexMatrix::from_rows(&[&[ONE, ONE], &[ZERO, ONE]]);
        assert!(Circuit::new(vec![2], vec![], ReferenceState::Basis(vec![0]), Observable::Dense(non_herm)).is_err());
        assert!(matches!(
            Circuit::new(vec![2; 13], vec![], ReferenceState::Basis(vec![0; 13]), ObservableKind::GlobalZ.observable(13)),
            Err(Error::DimensionLimit { .. })
        ));
    }

    #[test]
    fn assignment_validation() {
        let c = hardware_efficient(2, 1, ObservableKind::GlobalZ).unwrap();
        assert!(c.cost(&GateAssignment::new(vec![ComplexMatrix::identity(2)])).is_err());
        let bad = GateAssignment::new(vec![ComplexMatrix::identity(2), ComplexMatrix::from_real_diagonal(&[1.0, 0.5])]);
        assert!(matches!(c.cost(&bad), Err(Error::InvalidAssignment(_))));
        assert!(c.environment(&GateAssignment::identity(&c), 2).is_err());
    }

    #[test]
    fn training_set_sums_costs() {
        let slots = vec![GateSlot::variable(&[0])];
        let r0 = ComplexMatrix::outer(&[ONE, ZERO]);
        let r1 = ComplexMatrix::outer(&[ZERO, ONE]);
        let training = [(r0.clone(), z()), (r1.clone(), Pauli::X.matrix())];
        let c = with_training_set(vec![2], slots, &training).unwrap();
        assert_eq!(c.num_qudits(), 2);
        let u = haar_unitary(2, &mut SeededStream::new(8, 0).rng());
        let expected: f64 = training
            .iter()
            .map(|(r, o)| u.matmul(r).matmul(&u.adjoint()).matmul(o).trace().re)
            .sum();
        let got = c.cost(&GateAssignment::new(vec![u])).unwrap();
        assert!((got - expected).abs() < 1e-13);
    }
}
