//! Tangent-space geometry of U(N) and Riemannian gradient descent on the
//! product manifold `U(N_1) × ⋯ × U(N_K)`.
//!
//! Unitaries live in the real embedding space `End(C^N)` with the metric
//! `(A, B) = Re Tr(A† B)`. The tangent space at `U` is `{ i U η : η = η† }`.

use alloc::vec::Vec;

use crate::circuit::{Circuit, Environment, GateAssignment};
use crate::error::{Error, Result};
use crate::linalg::{frobenius_inner, hermitian_function, ComplexMatrix, LocalLayout, C64, I, STRUCTURE_TOL};

/// A tangent vector `value` at the unitary `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    base: ComplexMatrix,
    value: ComplexMatrix,
}

impl TangentVector {
    /// Checks that `base† · value` is anti-Hermitian.
    pub fn new(base: ComplexMatrix, value: ComplexMatrix) -> Result<Self> {
        let n = base.ensure_square()?;
        value.ensure_dim(n)?;
        let v = Self { base, value };
        let residual = v.tangency_residual();
        if residual > STRUCTURE_TOL * v.value.frobenius_norm().max(1.0) {
            return Err(Error::Violation(alloc::format!("not a tangent vector (residual {residual:e})")));
        }
        Ok(v)
    }

    pub fn base(&self) -> &ComplexMatrix {
        &self.base
    }

    pub fn value(&self) -> &ComplexMatrix {
        &self.value
    }

    pub fn dim(&self) -> usize {
        self.base.rows()
    }

    /// `‖U†V + (U†V)†‖_F`.
    pub fn tangency_residual(&self) -> f64 {
        let w = self.base.adjoint().matmul(&self.value);
        (&w + &w.adjoint()).frobenius_norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { base: self.base.clone(), value: self.value.scale_real(s) }
    }
}

/// The direct sum of per-gate Riemannian gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct FullGradient {
    pub parts: Vec<TangentVector>,
}

impl FullGradient {
    /// `Σ_i Re Tr(g_i† g_i)` without the `1/N_i` weights.
    pub fn sq_norm(&self) -> f64 {
        self.parts.iter().map(|g| g.value.frobenius_norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.sq_norm())
    }
}

/// Embedding-space gradient `d = 2 Tr_M(Y Ũ X)`, so that
/// `∂_ε E(U + εV)|₀ = Re Tr(d† V)`.
pub fn euclidean_gradient(env: &Environment, u: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (n, m) = (env.n(), env.m());
    u.ensure_dim(n)?;
    let dim = n * m;
    let mut yu = env.y().clone();
    LocalLayout::new(&env.shape(), &[0])?.apply_right(u, &mut yu);
    let x = env.x().as_slice();
    let yu = yu.as_slice();
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..m {
            let row = &yu[(i * m + k) * dim..(i * m + k + 1) * dim];
            let col = j * m + k;
            for (c, &t) in row.iter().enumerate() {
                acc += t * x[c * dim + col];
            }
        }
        acc * 2.0
    }))
}

/// `(D − U D† U) / 2`, the orthogonal projection onto the tangent space at `U`.
pub fn project_to_tangent(u: &ComplexMatrix, d: &ComplexMatrix) -> Result<TangentVector> {
    let n = u.ensure_square()?;
    d.ensure_dim(n)?;
    let value = (d - &u.matmul(&d.adjoint()).matmul(u)).scale_real(0.5);
    Ok(TangentVector { base: u.clone(), value })
}

/// Riemannian gradient `g = (d − U d† U)/2 = Tr_M(Y Ũ X − Ũ X Ũ† Y Ũ)`.
pub fn riemannian_gradient(env: &Environment, u: &ComplexMatrix) -> Result<TangentVector> {
    project_to_tangent(u, &euclidean_gradient(env, u)?)
}

/// `(1/N) Tr(g† g)`.
pub fn gradient_sq_norm(g: &TangentVector) -> f64 {
    g.value.frobenius_norm_sqr() / g.dim() as f64
}

pub fn full_gradient(circuit: &Circuit, a: &GateAssignment) -> Result<FullGradient> {
    let mut parts = Vec::with_capacity(circuit.num_variable());
    circuit.for_each_environment(a, |i, env| {
        parts.push(riemannian_gradient(&env, &a.unitaries[i])?);
        Ok(())
    })?;
    Ok(FullGradient { parts })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Retraction {
    /// `R(t) = polar(U + tV)`.
    #[default]
    Polar,
    /// `R(t) = U exp(t U†V)`.
    Exponential,
}

/// Maps `U + tV` back to the manifold. `R(0) = U` and `R'(0) = V`.
pub fn retract(u: &ComplexMatrix, v: &TangentVector, t: f64, kind: Retraction) -> Result<ComplexMatrix> {
    let n = u.ensure_square()?;
    v.value.ensure_dim(n)?;
    if v.base.distance(u) > STRUCTURE_TOL {
        return Err(Error::BasePointMismatch);
    }
    if t == 0.0 {
        return Ok(u.clone());
    }
    match kind {
        Retraction::Polar => {
            let a = u + &v.value.scale_real(t);
            let gram = a.adjoint().matmul(&a);
            // the projection removes any anti-Hermitian rounding in the Gram matrix
            let gram = (&gram + &gram.adjoint()).scale_real(0.5);
            let inv_sqrt = hermitian_function(&gram, |x| C64::new(1.0 / libm::sqrt(x), 0.0))?;
            Ok(a.matmul(&inv_sqrt))
        }
        Retraction::Exponential => {
            // U†V = iH with H Hermitian
            let w = u.adjoint().matmul(&v.value);
            let h = w.scale(-I);
            let h = (&h + &h.adjoint()).scale_real(0.5);
            let e = hermitian_function(&h, |x| C64::new(0.0, t * x).exp())?;
            Ok(u.matmul(&e))
        }
    }
}

/// Metric inner product of two tangent vectors at the same point.
pub fn tangent_inner(a: &TangentVector, b: &TangentVector) -> Result<f64> {
    frobenius_inner(&a.value, &b.value)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// stop once `sqrt(Σ_i Re Tr(g_i† g_i))` falls to this value
    pub tolerance: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
    pub retraction: Retraction,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tolerance: 1e-8,
            armijo_c: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
            max_backtracks: 60,
            retraction: Retraction::Polar,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizeResult {
    pub assignment: GateAssignment,
    /// cost before the first step and after every accepted step
    pub costs: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Steepest descent along `−g_full` with Armijo backtracking.
pub fn optimize(circuit: &Circuit, init: &GateAssignment, config: &OptimizerConfig) -> Result<OptimizeResult> {
    let mut assignment = init.clone();
    let mut cost = circuit.cost(&assignment)?;
    if !cost.is_finite() {
        return Err(Error::NonFiniteCost);
    }
    let mut costs = alloc::vec![cost];
    let mut gradient_norms = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let grad = full_gradient(circuit, &assignment)?;
        let sq = grad.sq_norm();
        gradient_norms.push(libm::sqrt(sq));
        if libm::sqrt(sq) <= config.tolerance {
            converged = true;
            break;
        }
        let descent: Vec<TangentVector> = grad.parts.iter().map(|g| g.scaled(-1.0)).collect();
        let mut step = config.initial_step;
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            let unitaries = assignment
                .unitaries
                .iter()
                .zip(&descent)
                .map(|(u, v)| retract(u, v, step, config.retraction))
                .collect::<Result<Vec<_>>>()?;
            let candidate = GateAssignment::new(unitaries);
            let c = circuit.cost(&candidate)?;
            if !c.is_finite() {
                return Err(Error::NonFiniteCost);
            }
            if c <= cost - config.armijo_c * step * sq {
                accepted = Some((candidate, c));
                break;
            }
            step *= config.shrink;
        }
        let Some((next, c)) = accepted else {
            // no decrease resolvable in floating point
            break;
        };
        assignment = next;
        cost = c;
        costs.push(cost);
        iterations += 1;
    }
    Ok(OptimizeResult { assignment, costs, gradient_norms, iterations, converged })
}
