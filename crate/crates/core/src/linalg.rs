//! Dense complex linear algebra on row-major matrices.
//!
//! Composite indices follow one convention throughout the crate: the
//! leftmost tensor factor is the most significant digit, so the basis state
//! `|i, m>` of `C^N ⊗ C^M` has index `i * M + m`.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Frobenius tolerance for the unitarity and Hermiticity predicates.
pub const STRUCTURE_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidShape("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self::from_fn(rows.len(), cols, |r, c| rows[r][c])
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = C64::new(d, 0.0);
        }
        m
    }

    /// The projector `|v><v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul: inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "matvec: dimension mismatch");
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// `Tr(self · rhs)` without forming the product.
    pub fn trace_of_product(&self, rhs: &Self) -> C64 {
        assert!(self.cols == rhs.rows && self.rows == rhs.cols, "trace_of_product: shape mismatch");
        let mut acc = ZERO;
        for r in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[r * self.cols + k] * rhs.data[k * rhs.cols + r];
            }
        }
        acc
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.frobenius_norm_sqr())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖A†A − 1‖_F`, or infinity for non-square input.
    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint().matmul(self) - &Self::identity(self.rows)).frobenius_norm()
    }

    /// `‖A − A†‖_F`, or infinity for non-square input.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self.data[r * n + c] - self.data[c * n + r].conj()).norm_sqr();
            }
        }
        libm::sqrt(acc)
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_residual() <= STRUCTURE_TOL
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_residual() <= STRUCTURE_TOL
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).frobenius_norm()
    }

    pub(crate) fn ensure_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::DimensionMismatch { expected: self.rows, found: self.cols })
        }
    }

    pub(crate) fn ensure_dim(&self, n: usize) -> Result<()> {
        if self.rows != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.rows });
        }
        if self.cols != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.cols });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "add: shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "sub: shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Local dimensions of the tensor factors of a square operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FactorShape {
    dims: Vec<usize>,
}

impl FactorShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidShape("factor dimensions must be positive".into()));
        }
        Ok(Self { dims })
    }

    pub fn bipartite(n: usize, m: usize) -> Result<Self> {
        Self::new(vec![n, m])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Place value of each factor in the composite index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }
}

/// Which factor of a bipartite `C^N ⊗ C^M` survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    /// Trace out the second factor, returning `Tr_M(A)` on `C^N`.
    First,
    /// Trace out the first factor, returning `Tr_N(A)` on `C^M`.
    Second,
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(a.rows * br, a.cols * bc);
    let out_cols = out.cols;
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.data[i * a.cols + j];
            if aij == ZERO {
                continue;
            }
            for m in 0..br {
                let dst = &mut out.data[(i * br + m) * out_cols + j * bc..][..bc];
                for (o, &bv) in dst.iter_mut().zip(b.row(m)) {
                    *o = aij * bv;
                }
            }
        }
    }
    out
}

pub fn partial_trace(a: &ComplexMatrix, shape: &FactorShape, keep: Keep) -> Result<ComplexMatrix> {
    let &[n, m] = shape.dims() else {
        return Err(Error::InvalidShape("partial trace needs a two-factor shape".into()));
    };
    a.ensure_dim(n * m)?;
    let dim = n * m;
    Ok(match keep {
        Keep::First => ComplexMatrix::from_fn(n, n, |i, j| {
            (0..m).map(|k| a.data[(i * m + k) * dim + j * m + k]).sum()
        }),
        Keep::Second => ComplexMatrix::from_fn(m, m, |i, j| {
            (0..n).map(|k| a.data[(k * m + i) * dim + k * m + j]).sum()
        }),
    })
}

/// Validates `perm` and returns, for every composite index of the original
/// ordering, its composite index after the factors are reordered so that new
/// factor `k` is old factor `perm[k]`.
pub fn factor_index_map(shape: &FactorShape, perm: &[usize]) -> Result<Vec<usize>> {
    let nf = shape.len();
    if perm.len() != nf {
        return Err(Error::InvalidPermutation);
    }
    let mut seen = vec![false; nf];
    for &p in perm {
        if p >= nf || seen[p] {
            return Err(Error::InvalidPermutation);
        }
        seen[p] = true;
    }
    let dims = shape.dims();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let new_strides = FactorShape { dims: new_dims }.strides();
    // stride in the new layout of each old factor
    let mut stride_of_old = vec![0; nf];
    for (k, &p) in perm.iter().enumerate() {
        stride_of_old[p] = new_strides[k];
    }

    let total = shape.total();
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; nf];
    let mut target = 0usize;
    for _ in 0..total {
        map.push(target);
        // odometer increment, least significant factor last
        for f in (0..nf).rev() {
            digits[f] += 1;
            target += stride_of_old[f];
            if digits[f] < dims[f] {
                break;
            }
            target -= stride_of_old[f] * dims[f];
            digits[f] = 0;
        }
    }
    Ok(map)
}

/// Conjugates `a` by the factor-permutation operator: the result acts on the
/// reordered space in which new factor `k` is old factor `perm[k]`.
#[allow(clippy::needless_range_loop)]
pub fn permute_factors(a: &ComplexMatrix, shape: &FactorShape, perm: &[usize]) -> Result<ComplexMatrix> {
    let dim = shape.total();
    a.ensure_dim(dim)?;
    let map = factor_index_map(shape, perm)?;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for r in 0..dim {
        let nr = map[r];
        for c in 0..dim {
            out.data[nr * dim + map[c]] = a.data[r * dim + c];
        }
    }
    Ok(out)
}

/// `Swap = Σ_{i,j} |i,j><j,i|` on `C^N ⊗ C^N`.
pub fn swap_operator(n: usize) -> ComplexMatrix {
    let dim = n * n;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            out.data[(i * n + j) * dim + j * n + i] = ONE;
        }
    }
    out
}

/// `Re Tr(A† B)`.
pub fn frobenius_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows != b.rows {
        return Err(Error::DimensionMismatch { expected: a.rows, found: b.rows });
    }
    if a.cols != b.cols {
        return Err(Error::DimensionMismatch { expected: a.cols, found: b.cols });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x.conj() * y).re).sum())
}

/// Householder QR of a square matrix, `A = Q R` with `Q` unitary and `R`
/// upper triangular.
#[allow(clippy::needless_range_loop)]
pub fn qr(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = a.ensure_square()?;
    let mut r = a.clone();
    let mut q = ComplexMatrix::identity(n);
    let mut v = vec![ZERO; n];
    for k in 0..n.saturating_sub(1) {
        let norm_x = libm::sqrt((k..n).map(|i| r.data[i * n + k].norm_sqr()).sum::<f64>());
        if norm_x == 0.0 {
            continue;
        }
        let x0 = r.data[k * n + k];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let alpha = -phase * norm_x;
        for i in k..n {
            v[i] = r.data[i * n + k];
        }
        v[k] -= alpha;
        let vnorm = libm::sqrt((k..n).map(|i| v[i].norm_sqr()).sum::<f64>());
        if vnorm == 0.0 {
            continue;
        }
        for vi in &mut v[k..n] {
            *vi /= vnorm;
        }
        // R <- (1 - 2 v v†) R
        for c in k..n {
            let s: C64 = (k..n).map(|i| v[i].conj() * r.data[i * n + c]).sum();
            for i in k..n {
                r.data[i * n + c] -= v[i] * s * 2.0;
            }
        }
        // Q <- Q (1 - 2 v v†)
        for row in 0..n {
            let s: C64 = (k..n).map(|i| q.data[row * n + i] * v[i]).sum();
            for i in k..n {
                q.data[row * n + i] -= s * v[i].conj() * 2.0;
            }
        }
        for i in k + 1..n {
            r.data[i * n + k] = ZERO;
        }
    }
    Ok((q, r))
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns ascending eigenvalues and the unitary whose columns are the
/// matching eigenvectors.
pub fn eigh(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = a.ensure_square()?;
    let herm = a.hermiticity_residual();
    if herm > STRUCTURE_TOL * a.frobenius_norm().max(1.0) {
        return Err(Error::NotHermitian(herm));
    }
    let mut h = a.clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = h.frobenius_norm_sqr().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
            .map(|(r, c)| h.data[r * n + c].norm_sqr())
            .sum();
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = h.data[p * n + q];
                let b = apq.norm();
                if b <= 1e-300 {
                    continue;
                }
                let phase = apq / b;
                let app = h.data[p * n + p].re;
                let aqq = h.data[q * n + q].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                // J = diag(1, conj(phase)) · [[c, s], [-s, c]]
                let jpp = C64::new(c, 0.0);
                let jpq = C64::new(s, 0.0);
                let jqp = -phase.conj() * s;
                let jqq = phase.conj() * c;
                for r in 0..n {
                    let hp = h.data[r * n + p];
                    let hq = h.data[r * n + q];
                    h.data[r * n + p] = hp * jpp + hq * jqp;
                    h.data[r * n + q] = hp * jpq + hq * jqq;
                    let vp = v.data[r * n + p];
                    let vq = v.data[r * n + q];
                    v.data[r * n + p] = vp * jpp + vq * jqp;
                    v.data[r * n + q] = vp * jpq + vq * jqq;
                }
                for col in 0..n {
                    let hp = h.data[p * n + col];
                    let hq = h.data[q * n + col];
                    h.data[p * n + col] = jpp.conj() * hp + jqp.conj() * hq;
                    h.data[q * n + col] = jpq.conj() * hp + jqq.conj() * hq;
                }
                h.data[p * n + q] = ZERO;
                h.data[q * n + p] = ZERO;
                h.data[p * n + p].im = 0.0;
                h.data[q * n + q].im = 0.0;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| h.data[x * n + x].re.total_cmp(&h.data[y * n + y].re));
    let values = order.iter().map(|&k| h.data[k * n + k].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| v.data[r * n + order[c]]);
    Ok((values, vectors))
}

/// `V f(Λ) V†` for a Hermitian `a = V Λ V†`.
pub fn hermitian_function(a: &ComplexMatrix, f: impl Fn(f64) -> C64) -> Result<ComplexMatrix> {
    let (values, vecs) = eigh(a)?;
    let n = values.len();
    let fv: Vec<C64> = values.iter().map(|&x| f(x)).collect();
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        (0..n).map(|k| vecs[(r, k)] * fv[k] * vecs[(c, k)].conj()).sum()
    }))
}

/// Index tables for applying an operator on a subset of tensor factors
/// without forming its full-register embedding.
#[derive(Clone, Debug)]
pub struct LocalLayout {
    dim: usize,
    /// composite offset for each local basis index of the target factors
    offsets: Vec<usize>,
    /// composite indices whose target digits are all zero
    bases: Vec<usize>,
}

impl LocalLayout {
    pub fn new(shape: &FactorShape, targets: &[usize]) -> Result<Self> {
        let dims = shape.dims();
        let mut seen = vec![false; dims.len()];
        for &t in targets {
            if t >= dims.len() || seen[t] {
                return Err(Error::InvalidShape("targets must be distinct factor indices".into()));
            }
            seen[t] = true;
        }
        let strides = shape.strides();
        let local: usize = targets.iter().map(|&t| dims[t]).product();
        let mut offsets = Vec::with_capacity(local);
        for a in 0..local {
            let mut rem = a;
            let mut off = 0;
            for &t in targets.iter().rev() {
                off += (rem % dims[t]) * strides[t];
                rem /= dims[t];
            }
            offsets.push(off);
        }
        let rest: Vec<usize> = (0..dims.len()).filter(|f| !seen[*f]).collect();
        let count: usize = rest.iter().map(|&f| dims[f]).product();
        let mut bases = Vec::with_capacity(count);
        for b in 0..count {
            let mut rem = b;
            let mut off = 0;
            for &f in rest.iter().rev() {
                off += (rem % dims[f]) * strides[f];
                rem /= dims[f];
            }
            bases.push(off);
        }
        Ok(Self { dim: shape.total(), offsets, bases })
    }

    pub fn local_dim(&self) -> usize {
        self.offsets.len()
    }

    /// `a <- G_embedded · a`.
    pub fn apply_left(&self, g: &ComplexMatrix, a: &mut ComplexMatrix) {
        let n = self.local_dim();
        debug_assert!(g.rows == n && g.cols == n && a.rows == self.dim);
        let cols = a.cols;
        let mut buf = vec![ZERO; n];
        for &base in &self.bases {
            for c in 0..cols {
                for (k, &off) in self.offsets.iter().enumerate() {
                    buf[k] = a.data[(base + off) * cols + c];
                }
                for (r, &off) in self.offsets.iter().enumerate() {
                    let grow = g.row(r);
                    a.data[(base + off) * cols + c] = grow.iter().zip(&buf).map(|(x, y)| x * y).sum();
                }
            }
        }
    }

    /// `a <- a · G_embedded`.
    pub fn apply_right(&self, g: &ComplexMatrix, a: &mut ComplexMatrix) {
        let n = self.local_dim();
        debug_assert!(g.rows == n && g.cols == n && a.cols == self.dim);
        let cols = a.cols;
        let mut buf = vec![ZERO; n];
        for r in 0..a.rows {
            let row = &mut a.data[r * cols..(r + 1) * cols];
            for &base in &self.bases {
                for (k, &off) in self.offsets.iter().enumerate() {
                    buf[k] = row[base + off];
                }
                for (c, &off) in self.offsets.iter().enumerate() {
                    row[base + off] = (0..n).map(|k| buf[k] * g.data[k * n + c]).sum();
                }
            }
        }
    }

    /// `a <- G a G†`.
    pub fn conjugate(&self, g: &ComplexMatrix, g_adj: &ComplexMatrix, a: &mut ComplexMatrix) {
        self.apply_left(g, a);
        self.apply_right(g_adj, a);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::{haar_unitary, SeededStream};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ZERO, ONE], &[ONE, ZERO]])
    }

    fn pauli_y() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[&[ZERO, -I], &[I, ZERO]])
    }

    fn pauli_z() -> ComplexMatrix {
        ComplexMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        use rand::Rng;
        let mut rng = SeededStream::new(seed, 0).rng();
        ComplexMatrix::from_fn(rows, cols, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let a = random_matrix(n, n, seed);
        (&a + &a.adjoint()).scale_real(0.5)
    }

    #[test]
    fn kron_identity_cases() {
        let id6 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3));
        assert_eq!(id6, ComplexMatrix::identity(6));
        let a = random_matrix(3, 2, 1);
        assert_eq!(kron(&a, &ComplexMatrix::identity(1)), a);
    }

    #[test]
    fn kron_matches_index_formula() {
        let (a, b) = (pauli_z(), pauli_x());
        let k = kron(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                for m in 0..2 {
                    for n in 0..2 {
                        assert_eq!(k[(i * 2 + m, j * 2 + n)], a[(i, j)] * b[(m, n)]);
                    }
                }
            }
        }
        // rectangular factors
        let (a, b) = (random_matrix(2, 3, 4), random_matrix(3, 2, 5));
        let k = kron(&a, &b);
        assert_eq!((k.rows(), k.cols()), (6, 6));
        for i in 0..2 {
            for j in 0..3 {
                for m in 0..3 {
                    for n in 0..2 {
                        assert_eq!(k[(i * 3 + m, j * 2 + n)], a[(i, j)] * b[(m, n)]);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_cases() {
        let a = random_matrix(2, 2, 11);
        let b = random_matrix(3, 3, 12);
        let shape = FactorShape::bipartite(2, 3).unwrap();
        let ab = kron(&a, &b);
        let first = partial_trace(&ab, &shape, Keep::First).unwrap();
        assert!(first.distance(&a.scale(b.trace())) < 1e-14);
        let second = partial_trace(&ab, &shape, Keep::Second).unwrap();
        assert!(second.distance(&b.scale(a.trace())) < 1e-14);

        let id = partial_trace(&ComplexMatrix::identity(6), &shape, Keep::First).unwrap();
        assert_eq!(id, ComplexMatrix::identity(2).scale_real(3.0));
    }

    #[test]
    fn partial_trace_matches_index_loop() {
        let a = random_hermitian(4, 3);
        let shape = FactorShape::bipartite(2, 2).unwrap();
        let pt = partial_trace(&a, &shape, Keep::First).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = ZERO;
                for m in 0..2 {
                    s += a[(i * 2 + m, j * 2 + m)];
                }
                assert!((pt[(i, j)] - s).norm() < 1e-15);
            }
        }
        assert!((pt.trace() - a.trace()).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_errors() {
        let shape = FactorShape::bipartite(2, 3).unwrap();
        assert!(matches!(
            partial_trace(&ComplexMatrix::identity(5), &shape, Keep::First),
            Err(Error::DimensionMismatch { .. })
        ));
        let three = FactorShape::new(vec![2, 2, 2]).unwrap();
        assert!(partial_trace(&ComplexMatrix::identity(8), &three, Keep::First).is_err());
    }

    #[test]
    fn permute_identity_and_swap() {
        let a = random_matrix(2, 2, 21);
        let b = random_matrix(3, 3, 22);
        let ab = kron(&a, &b);
        let shape = FactorShape::new(vec![2, 3]).unwrap();
        assert_eq!(permute_factors(&ab, &shape, &[0, 1]).unwrap(), ab);
        let ba = permute_factors(&ab, &shape, &[1, 0]).unwrap();
        assert!(ba.distance(&kron(&b, &a)) < 1e-15);
    }

    #[test]
    fn permute_three_factors_matches_relabeling() {
        // perm (3,1,2) in one-based notation
        let dims = [2usize, 3, 2];
        let shape = FactorShape::new(dims.to_vec()).unwrap();
        let a = random_matrix(12, 12, 31);
        let out = permute_factors(&a, &shape, &[2, 0, 1]).unwrap();
        // new layout dims (d2, d0, d1); old digits (x0,x1,x2) -> new (x2,x0,x1)
        let idx_old = |x: [usize; 3]| (x[0] * 3 + x[1]) * 2 + x[2];
        let idx_new = |x: [usize; 3]| (x[2] * 2 + x[0]) * 3 + x[1];
        let all: Vec<[usize; 3]> = (0..2)
            .flat_map(|i| (0..3).flat_map(move |j| (0..2).map(move |k| [i, j, k])))
            .collect();
        for &r in &all {
            for &cc in &all {
                assert_eq!(out[(idx_new(r), idx_new(cc))], a[(idx_old(r), idx_old(cc))]);
            }
        }
    }

    #[test]
    fn permute_errors() {
        let shape = FactorShape::new(vec![2, 2]).unwrap();
        let a = ComplexMatrix::identity(4);
        assert_eq!(permute_factors(&a, &shape, &[0, 0]), Err(Error::InvalidPermutation));
        assert_eq!(permute_factors(&a, &shape, &[0]), Err(Error::InvalidPermutation));
        assert_eq!(permute_factors(&a, &shape, &[0, 2]), Err(Error::InvalidPermutation));
        assert!(permute_factors(&ComplexMatrix::identity(3), &shape, &[1, 0]).is_err());
    }

    #[test]
    fn swap_operator_properties() {
        assert_eq!(swap_operator(1), ComplexMatrix::identity(1));
        let s2 = swap_operator(2);
        assert_eq!(s2.trace(), c(2.0, 0.0));
        let a = [c(0.3, -0.1), c(1.2, 0.5)];
        let b = [c(-0.7, 0.2), c(0.4, 0.9)];
        let ab: Vec<C64> = a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect();
        let ba: Vec<C64> = b.iter().flat_map(|x| a.iter().map(move |y| x * y)).collect();
        let swapped = s2.matvec(&ab);
        for (x, y) in swapped.iter().zip(&ba) {
            assert!((x - y).norm() < 1e-15);
        }
        let s3 = swap_operator(3);
        assert_eq!(s3.matmul(&s3), ComplexMatrix::identity(9));
    }

    #[test]
    fn frobenius_inner_cases() {
        for n in 1..5 {
            let id = ComplexMatrix::identity(n);
            assert_eq!(frobenius_inner(&id, &id).unwrap(), n as f64);
        }
        let a = random_matrix(3, 4, 41);
        let v = frobenius_inner(&a, &a).unwrap();
        assert!((v - a.frobenius_norm_sqr()).abs() < 1e-14 && v >= 0.0);
        assert_eq!(frobenius_inner(&pauli_x(), &pauli_y()).unwrap(), 0.0);
        assert!(frobenius_inner(&a, &ComplexMatrix::identity(3)).is_err());
    }

    #[test]
    fn qr_reconstructs() {
        let a = random_matrix(5, 5, 51);
        let (q, r) = qr(&a).unwrap();
        assert!(q.unitarity_residual() < 1e-13);
        for i in 0..5 {
            for j in 0..i {
                assert_eq!(r[(i, j)], ZERO);
            }
        }
        assert!(q.matmul(&r).distance(&a) < 1e-13);
    }

    #[test]
    fn eigh_diagonalizes() {
        for (n, seed) in [(1, 1), (2, 2), (4, 3), (7, 4)] {
            let h = random_hermitian(n, seed);
            let (vals, vecs) = eigh(&h).unwrap();
            assert!(vecs.unitarity_residual() < 1e-12);
            let d = ComplexMatrix::from_real_diagonal(&vals);
            let rebuilt = vecs.matmul(&d).matmul(&vecs.adjoint());
            assert!(rebuilt.distance(&h) < 1e-12, "n={n}");
            assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        }
        // degenerate spectrum
        let (vals, _) = eigh(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(vals, [1.0, 1.0, 1.0]);
        assert!(matches!(eigh(&random_matrix(3, 3, 9)), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn local_layout_matches_embedding() {
        let shape = FactorShape::new(vec![2, 3, 2]).unwrap();
        let mut stream = SeededStream::new(61, 0).rng();
        let g = haar_unitary(4, &mut stream);
        // targets (2, 0): gate acts on factor 2 as the leading local digit
        let layout = LocalLayout::new(&shape, &[2, 0]).unwrap();
        let embedded_in_perm = kron(&g, &ComplexMatrix::identity(3));
        // permuted frame has factor order (2, 0, 1); map back with the inverse
        let perm_shape = FactorShape::new(vec![2, 2, 3]).unwrap();
        let embedded = permute_factors(&embedded_in_perm, &perm_shape, &[1, 2, 0]).unwrap();
        let a = random_matrix(12, 12, 62);
        let mut left = a.clone();
        layout.apply_left(&g, &mut left);
        assert!(left.distance(&embedded.matmul(&a)) < 1e-13);
        let mut right = a.clone();
        layout.apply_right(&g, &mut right);
        assert!(right.distance(&a.matmul(&embedded)) < 1e-13);
    }
}
