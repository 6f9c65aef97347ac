//! Closed-form single-gate Haar averages.
//!
//! All single-gate moments of `E(U) = Tr(Y Ũ X Ũ†)` are functions of the
//! contraction `Z ∈ End(C^N ⊗ C^N)`,
//!
//! ```text
//! <i1,i2|Z|j1,j2> = Σ_{m,m'} <i1,m|X|j1,m'> <i2,m'|Y|j2,m>
//! ```
//!
//! which costs `O(N⁴M²)` to build; the moments themselves are then `O(N⁶)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{checked_real, Environment};
use crate::error::{Error, Result};
use crate::haar::{haar_unitary, SeededStream};
use crate::linalg::{factor_index_map, kron, partial_trace, swap_operator, ComplexMatrix, FactorShape, Keep, C64, ONE};
use crate::riemannian::riemannian_gradient;
use crate::sampling::SampleMap;
use crate::stats::mean_estimate;

/// `Avg U† ⊗ U = Swap / N`.
pub fn first_moment(n: usize) -> ComplexMatrix {
    swap_operator(n).scale_real(1.0 / n as f64)
}

/// Permutation operator on `(C^N)^{⊗4}` exchanging factors `k` and `l`
/// (0-based).
fn swap_factors(n: usize, k: usize, l: usize) -> ComplexMatrix {
    let shape = FactorShape::new(vec![n; 4]).expect("positive");
    let mut perm = [0, 1, 2, 3];
    perm.swap(k, l);
    let map = factor_index_map(&shape, &perm).expect("valid transposition");
    let dim = shape.total();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for (from, &to) in map.iter().enumerate() {
        out[(to, from)] = ONE;
    }
    out
}

/// `Avg U† ⊗ U ⊗ U† ⊗ U
///   = (1/(N²−1)) (1 − Swap_{2,4}/N) (Swap_{1,2} Swap_{3,4} + Swap_{1,4} Swap_{2,3})`.
pub fn second_moment(n: usize) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::DegenerateDimension(n));
    }
    let dim = n * n * n * n;
    let nf = n as f64;
    let s12_s34 = swap_factors(n, 0, 1).matmul(&swap_factors(n, 2, 3));
    let s14_s23 = swap_factors(n, 0, 3).matmul(&swap_factors(n, 1, 2));
    let left = &ComplexMatrix::identity(dim) - &swap_factors(n, 1, 3).scale_real(1.0 / nf);
    Ok(left.matmul(&(&s12_s34 + &s14_s23)).scale_real(1.0 / (nf * nf - 1.0)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZOperator {
    n: usize,
    matrix: ComplexMatrix,
}

impl ZOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    fn require_nondegenerate(&self) -> Result<()> {
        if self.n < 2 {
            Err(Error::DegenerateDimension(self.n))
        } else {
            Ok(())
        }
    }

    /// `(Tr Z, Tr((Tr₁Z)² + (Tr₂Z)²), Tr Z²)` and a magnitude scale for
    /// residue tolerances.
    fn invariants(&self) -> Result<(C64, C64, C64, f64)> {
        let shape = FactorShape::bipartite(self.n, self.n)?;
        let tr1 = partial_trace(&self.matrix, &shape, Keep::Second)?;
        let tr2 = partial_trace(&self.matrix, &shape, Keep::First)?;
        let tr = self.matrix.trace();
        let partial = tr1.trace_of_product(&tr1) + tr2.trace_of_product(&tr2);
        let tr_sq = self.matrix.trace_of_product(&self.matrix);
        let scale = tr.norm_sqr() + tr1.frobenius_norm_sqr() + tr2.frobenius_norm_sqr() + self.matrix.frobenius_norm_sqr();
        Ok((tr, partial, tr_sq, scale))
    }
}

/// Builds `Z` from an environment. For `M = 1` this is exactly `X ⊗ Y`.
pub fn z_operator(env: &Environment) -> ZOperator {
    let (n, m) = (env.n(), env.m());
    let dim = n * m;
    let x = env.x().as_slice();
    let y = env.y().as_slice();
    let nn = n * n;
    let mut z = ComplexMatrix::zeros(nn, nn);
    let zs = z.as_mut_slice();
    for i1 in 0..n {
        for j1 in 0..n {
            for i2 in 0..n {
                for j2 in 0..n {
                    let mut acc = C64::new(0.0, 0.0);
                    for mm in 0..m {
                        let xrow = (i1 * m + mm) * dim + j1 * m;
                        let ycol = j2 * m + mm;
                        for mp in 0..m {
                            acc += x[xrow + mp] * y[(i2 * m + mp) * dim + ycol];
                        }
                    }
                    zs[(i1 * n + i2) * nn + j1 * n + j2] = acc;
                }
            }
        }
    }
    ZOperator { n, matrix: z }
}

/// `Avg E = Tr(Z) / N`.
pub fn avg_cost(z: &ZOperator) -> Result<f64> {
    let tr = z.matrix.trace();
    checked_real(tr, z.matrix.frobenius_norm()).map(|t| t / z.n as f64)
}

/// `Avg E² = ((Tr Z)² − Tr((Tr₁Z)² + (Tr₂Z)²)/N + Tr Z²) / (N² − 1)`.
pub fn avg_cost_squared(z: &ZOperator) -> Result<f64> {
    z.require_nondegenerate()?;
    let (tr, partial, tr_sq, scale) = z.invariants()?;
    let nf = z.n as f64;
    let value = (tr * tr - partial / nf + tr_sq) / (nf * nf - 1.0);
    checked_real(value, scale)
}

/// `Var E = ((Tr Z)²/N² − Tr((Tr₁Z)² + (Tr₂Z)²)/N + Tr Z²) / (N² − 1)`.
///
/// Cancellation can leave tiny negative values; anything below `−1e-10`
/// (relative) is reported as an error, the rest is clamped to zero.
pub fn var_cost(z: &ZOperator) -> Result<f64> {
    z.require_nondegenerate()?;
    let (tr, partial, tr_sq, scale) = z.invariants()?;
    let nf = z.n as f64;
    let value = (tr * tr / (nf * nf) - partial / nf + tr_sq) / (nf * nf - 1.0);
    let v = checked_real(value, scale)?;
    clamp_variance(v, scale)
}

fn clamp_variance(v: f64, scale: f64) -> Result<f64> {
    if v < -1e-10 * scale.max(1.0) {
        return Err(Error::Violation(alloc::format!("negative variance {v:e}")));
    }
    Ok(v.max(0.0))
}

/// `Var ĝ = Avg (1/N) Tr(ĝ† ĝ)`, evaluated by integrating the quartic form
/// `Tr(ĝ†ĝ) = ½ [Tr(d†d) − Re Tr((U†d)²)]` term by term with the Weingarten
/// function of `U(N)` (`Wg(e) = 1/(N²−1)`, `Wg((12)) = −1/(N(N²−1))`).
///
/// The Euclidean gradient is `d_{ij} = 2 Σ_{kl} C_{ij,kl} U_{kl}` with
/// `C_{ij,kl} = Z[(l,i),(j,k)]`. This path does not reuse the `var_cost`
/// expression, so the factor-two relation between the two is a genuine check.
pub fn var_gradient_analytic(z: &ZOperator) -> Result<f64> {
    z.require_nondegenerate()?;
    let n = z.n;
    let nf = n as f64;
    let zm = z.matrix.as_slice();
    let nn = n * n;
    let c = |i: usize, j: usize, k: usize, l: usize| zm[(l * n + i) * nn + j * n + k];

    // Avg Tr(d†d) = (4/N) Σ |C|², and C is a rearrangement of Z
    let avg_dd = 4.0 / nf * z.matrix.frobenius_norm_sqr();

    let mut same = C64::new(0.0, 0.0); // σ = τ
    let mut crossed = C64::new(0.0, 0.0); // σ ≠ τ
    for a in 0..n {
        for b in 0..n {
            for i in 0..n {
                for ip in 0..n {
                    same += c(i, b, i, a) * c(ip, a, ip, b) + c(i, b, ip, b) * c(ip, a, i, a);
                    crossed += c(i, b, i, b) * c(ip, a, ip, a) + c(i, b, ip, a) * c(ip, a, i, b);
                }
            }
        }
    }
    let wg_identity = 1.0 / (nf * nf - 1.0);
    let wg_transposition = -1.0 / (nf * (nf * nf - 1.0));
    let avg_udud = (same * wg_identity + crossed * wg_transposition) * 4.0;

    let value = 0.5 * (avg_dd - avg_udud.re) / nf;
    clamp_variance(value, avg_dd)
}

/// Exact single-gate moments for one environment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleGateMoments {
    pub avg_e: f64,
    pub avg_e2: f64,
    pub var_e: f64,
    pub var_g: f64,
}

impl SingleGateMoments {
    pub fn from_env(env: &Environment) -> Result<Self> {
        let z = z_operator(env);
        Ok(Self {
            avg_e: avg_cost(&z)?,
            avg_e2: avg_cost_squared(&z)?,
            var_e: var_cost(&z)?,
            var_g: var_gradient_analytic(&z)?,
        })
    }

    /// `|Var ĝ − 2 Var E|`.
    pub fn equivalence_residual(&self) -> f64 {
        (self.var_g - 2.0 * self.var_e).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AvgGradientReport {
    pub samples: usize,
    /// largest `|mean|` over the real and imaginary parts of all entries
    pub max_abs_mean: f64,
    /// largest `|mean| / SE` over the same components
    pub max_z_score: f64,
    pub sigmas: f64,
    pub pass: bool,
}

/// Monte-Carlo check that `Avg_U ĝ(U) = 0` entrywise.
pub fn check_avg_gradient_zero<S: SampleMap>(
    env: &Environment,
    samples: usize,
    seed: u64,
    sigmas: f64,
    runner: &S,
) -> Result<AvgGradientReport> {
    const MIN_SAMPLES: usize = 1000;
    if samples < MIN_SAMPLES {
        return Err(Error::InsufficientSamples { required: MIN_SAMPLES, found: samples });
    }
    let n = env.n();
    let draws = runner.map_indexed(samples, |idx| {
        let u = haar_unitary(n, &mut SeededStream::new(seed, idx).rng());
        riemannian_gradient(env, &u).map(|g| g.value().clone())
    });
    let draws: Vec<ComplexMatrix> = draws.into_iter().collect::<Result<_>>()?;
    let mut max_abs_mean: f64 = 0.0;
    let mut max_z: f64 = 0.0;
    let mut pass = true;
    for entry in 0..n * n {
        for part in 0..2 {
            let xs: Vec<f64> = draws
                .iter()
                .map(|g| {
                    let z = g.as_slice()[entry];
                    if part == 0 { z.re } else { z.im }
                })
                .collect();
            let est = mean_estimate(&xs);
            max_abs_mean = max_abs_mean.max(est.value.abs());
            if est.se > 0.0 {
                max_z = max_z.max(est.value.abs() / est.se);
            }
            pass &= est.agrees_with(0.0, sigmas);
        }
    }
    Ok(AvgGradientReport { samples, max_abs_mean, max_z_score: max_z, sigmas, pass })
}

/// Comparison of a sampled moment operator with its closed form.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentCheck {
    pub order: usize,
    pub n: usize,
    pub samples: usize,
    /// Frobenius distance between the sample average and the closed form
    pub distance: f64,
    pub tolerance: f64,
    pub pass: bool,
}

const MOMENT_CHUNK: usize = 256;

/// Sample average of `f(U)` over `samples` Haar draws, accumulated in
/// fixed-size chunks so the reduction order never depends on the runner.
fn haar_average<S, F>(n: usize, samples: usize, seed: u64, runner: &S, f: F) -> ComplexMatrix
where
    S: SampleMap,
    F: Fn(&ComplexMatrix) -> ComplexMatrix + Sync + Send,
{
    let chunks = samples.div_ceil(MOMENT_CHUNK);
    let partial = runner.map_indexed(chunks, |c| {
        let start = c as usize * MOMENT_CHUNK;
        let end = (start + MOMENT_CHUNK).min(samples);
        let mut acc: Option<ComplexMatrix> = None;
        for idx in start..end {
            let u = haar_unitary(n, &mut SeededStream::new(seed, idx as u64).rng());
            let term = f(&u);
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
        acc
    });
    let mut total: Option<ComplexMatrix> = None;
    for p in partial.into_iter().flatten() {
        total = Some(match total {
            None => p,
            Some(t) => &t + &p,
        });
    }
    total.map(|t| t.scale_real(1.0 / samples as f64)).unwrap_or_else(|| ComplexMatrix::zeros(0, 0))
}

/// Monte-Carlo estimates of both moment operators against their closed
/// forms. Tolerances are `5/√S` for the first moment and `10/√S` for the
/// second.
pub fn check_moments<S: SampleMap>(n: usize, samples: usize, seed: u64, runner: &S) -> Result<[MomentCheck; 2]> {
    if n < 2 {
        return Err(Error::DegenerateDimension(n));
    }
    if samples < 100 {
        return Err(Error::InsufficientSamples { required: 100, found: samples });
    }
    let root = libm::sqrt(samples as f64);
    let first = haar_average(n, samples, seed, runner, |u| kron(&u.adjoint(), u));
    let second = haar_average(n, samples, seed, runner, |u| {
        let pair = kron(&u.adjoint(), u);
        kron(&pair, &pair)
    });
    let make = |order: usize, sampled: &ComplexMatrix, exact: &ComplexMatrix, scale: f64| {
        let distance = sampled.distance(exact);
        let tolerance = scale / root;
        MomentCheck { order, n, samples, distance, tolerance, pass: distance <= tolerance }
    };
    Ok([make(1, &first, &first_moment(n), 5.0), make(2, &second, &second_moment(n)?, 10.0)])
}
