//! Dense symmetric linear algebra on flat row-major `Vec<f64>` buffers.
//!
//! Everything here is deliberately loop-ordered and allocation-explicit so that
//! repeated runs produce bit-identical results. Dimensions stay small (tens),
//! so O(d^3) kernels are fine.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `y = A x` for a row-major `d x d` matrix.
pub fn mat_vec(a: &[f64], d: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let row = &a[i * d..(i + 1) * d];
        y[i] = dot(row, x);
    }
    y
}

/// `A += w * x x^T` (symmetric rank-one update, row-major).
pub fn add_outer(a: &mut [f64], d: usize, x: &[f64], w: f64) {
    for i in 0..d {
        let xi = w * x[i];
        for j in 0..d {
            a[i * d + j] += xi * x[j];
        }
    }
}

pub fn frobenius(a: &[f64]) -> f64 {
    math::hypot_many(a)
}

/// Lower-triangular Cholesky factor of an SPD matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Vec<f64>,
    d: usize,
}

/// Factor a symmetric positive-definite matrix; returns `None` when a pivot is
/// not strictly positive (matrix singular or indefinite at working precision).
pub fn cholesky(a: &[f64], d: usize) -> Option<Cholesky> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * d + i] = math::sqrt(s);
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(Cholesky { l, d })
}

impl Cholesky {
    /// Solve `A x = b` via the stored factor.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; d];
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * d + k] * y[k];
            }
            y[i] = s / self.l[i * d + i];
        }
        let mut x = vec![0.0; d];
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s -= self.l[k * d + i] * x[k];
            }
            x[i] = s / self.l[i * d + i];
        }
        x
    }
}

/// Eigendecomposition of a symmetric matrix: `values[k]` with the matching
/// eigenvector in column `k` of `vectors` (row-major, `vectors[i*d + k]` is
/// component `i`). Eigenvalues are sorted in descending order.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl SymEigen {
    /// Coefficient vector `U^T y` of `y` in the eigenbasis.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut c = vec![0.0; d];
        for k in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                s += self.vectors[i * d + k] * y[i];
            }
            c[k] = s;
        }
        c
    }
}

/// Cyclic Jacobi eigendecomposition. Deterministic sweep order; converges
/// quadratically, so the sweep cap is never reached for well-posed inputs.
pub fn sym_eigen(a: &[f64], d: usize) -> SymEigen {
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale = frobenius(&m).max(f64::MIN_POSITIVE);
    let tol = 1e-15 * scale;
    const MAX_SWEEPS: usize = 64;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += m[p * d + q] * m[p * d + q];
            }
        }
        if math::sqrt(2.0 * off) <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if math::abs(apq) <= tol * 1e-3 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + math::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + math::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                // Rotate rows/columns p and q of the working matrix.
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                // Accumulate the rotation into the eigenvector matrix.
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]));
    let mut values = vec![0.0; d];
    let mut vectors = vec![0.0; d * d];
    for (k, &src) in order.iter().enumerate() {
        values[k] = m[src * d + src];
        for i in 0..d {
            vectors[i * d + k] = v[i * d + src];
        }
    }
    SymEigen { values, vectors, dim: d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn eigen_of_diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 1.0];
        let e = sym_eigen(&a, 2);
        assert_close(e.values[0], 3.0, 1e-12);
        assert_close(e.values[1], 1.0, 1e-12);
    }

    #[test]
    fn eigen_of_rank_one_projector() {
        // 0.25 * (1,-1)(1,-1)^T has eigenvalues {0.5, 0}.
        let a = [0.25, -0.25, -0.25, 0.25];
        let e = sym_eigen(&a, 2);
        assert_close(e.values[0], 0.5, 1e-12);
        assert_close(e.values[1], 0.0, 1e-12);
        // Leading eigenvector is (1,-1)/sqrt(2) up to sign.
        let (u0, u1) = (e.vectors[0], e.vectors[2]);
        assert_close((u0 + u1).abs(), 0.0, 1e-10);
        assert_close(u0 * u0 + u1 * u1, 1.0, 1e-12);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let ch = cholesky(&a, 2).expect("SPD");
        let x = ch.solve(&[1.0, 2.0]);
        // Verify residual instead of a hand inverse.
        let r0 = 4.0 * x[0] + 1.0 * x[1] - 1.0;
        let r1 = 1.0 * x[0] + 3.0 * x[1] - 2.0;
        assert_close(r0, 0.0, 1e-12);
        assert_close(r1, 0.0, 1e-12);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(cholesky(&a, 2).is_none());
    }

    fn random_symmetric(d: usize, seed: u64) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let x: f64 = rng.random::<f64>() * 2.0 - 1.0;
                a[i * d + j] = x;
                a[j * d + i] = x;
            }
        }
        a
    }

    proptest! {
        #[test]
        fn eigen_reconstructs_matrix(seed in 0u64..500, d in 2usize..8) {
            let a = random_symmetric(d, seed);
            let e = sym_eigen(&a, d);
            // A = U diag(lambda) U^T, entrywise.
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += e.vectors[i * d + k] * e.values[k] * e.vectors[j * d + k];
                    }
                    prop_assert!((s - a[i * d + j]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn eigenvectors_are_orthonormal(seed in 0u64..200, d in 2usize..8) {
            let a = random_symmetric(d, seed);
            let e = sym_eigen(&a, d);
            for k in 0..d {
                for l in k..d {
                    let mut s = 0.0;
                    for i in 0..d {
                        s += e.vectors[i * d + k] * e.vectors[i * d + l];
                    }
                    let want = if k == l { 1.0 } else { 0.0 };
                    prop_assert!((s - want).abs() < 1e-10);
                }
            }
        }
    }
}
