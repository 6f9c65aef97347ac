//! Seeded random streams and Haar-measure sampling on U(N).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{qr, ComplexMatrix, C64};

/// A reproducible random stream identified by `(master_seed, stream_index)`.
///
/// Streams with the same master seed and distinct indices are independent
/// ChaCha streams, so per-sample work can be scheduled in any order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeededStream {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Mixes a tag into a seed so that separate experiments of one run draw
/// from disjoint stream families (splitmix64 finalizer).
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard complex Gaussian with `E|z|² = 1`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Samples `U ∈ U(N)` from the Haar measure: QR of a complex Ginibre matrix
/// with the phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(n, n, rng);
    let (mut q, r) = qr(&g).expect("square by construction");
    for c in 0..n {
        let rii = r[(c, c)];
        let norm = rii.norm();
        let phase = if norm > 0.0 { rii / norm } else { C64::new(1.0, 0.0) };
        for row in 0..n {
            q[(row, c)] *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, swap_operator};

    #[test]
    fn identical_streams_reproduce() {
        let s = SeededStream::new(42, 7);
        let a = haar_unitary(3, &mut s.rng());
        let b = haar_unitary(3, &mut s.rng());
        assert_eq!(a, b);
        let other = haar_unitary(3, &mut SeededStream::new(42, 8).rng());
        assert_ne!(a, other);
    }

    #[test]
    fn haar_samples_are_unitary() {
        for n in 1..=6 {
            for idx in 0..20 {
                let u = haar_unitary(n, &mut SeededStream::new(3, idx).rng());
                assert!(u.unitarity_residual() < 1e-12, "n={n}");
            }
        }
        let u = haar_unitary(1, &mut SeededStream::new(9, 0).rng());
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derive_seed_separates_tags() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }

    #[test]
    fn first_moment_and_mean_converge() {
        let samples = 20_000u64;
        let n = 2;
        let mut acc = ComplexMatrix::zeros(n * n, n * n);
        let mut mean = ComplexMatrix::zeros(n, n);
        for idx in 0..samples {
            let u = haar_unitary(n, &mut SeededStream::new(17, idx).rng());
            acc = &acc + &kron(&u.adjoint(), &u);
            mean = &mean + &u;
        }
        let s = samples as f64;
        let target = swap_operator(n).scale_real(1.0 / n as f64);
        let tol = 5.0 / libm::sqrt(s);
        assert!(acc.scale_real(1.0 / s).distance(&target) <= tol);
        assert!(mean.scale_real(1.0 / s).max_abs() <= tol);
    }
}
