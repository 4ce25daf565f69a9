//! Dense complex linear algebra for the small (n <= 16) systems that
//! arise from determinant bases: LU factorization with partial
//! pivoting, determinants, solves, explicit inverses, and a 1-norm
//! condition number.
//!
//! Matrices are row-major `Vec<Complex64>` of length n*n; the sizes
//! here are tiny, so clarity beats blocking.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factorization P A = L U with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    /// Combined L (unit diagonal, below) and U (on and above).
    lu: Vec<Complex64>,
    /// Row permutation: factored row i came from input row perm[i].
    perm: Vec<usize>,
    /// Sign of the permutation, +1.0 or -1.0.
    parity: f64,
}

/// Factorizes a row-major n x n complex matrix.
pub fn lu_factor(a: &[Complex64], n: usize) -> Result<Lu> {
    assert_eq!(a.len(), n * n, "matrix data does not match dimension");
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut parity = 1.0;
    for col in 0..n {
        // Pivot on the largest magnitude in this column.
        let (mut best, mut best_mag) = (col, lu[col * n + col].norm());
        for row in col + 1..n {
            let mag = lu[row * n + col].norm();
            if mag > best_mag {
                best = row;
                best_mag = mag;
            }
        }
        if best_mag == 0.0 {
            return Err(Error::SingularMatrix);
        }
        if best != col {
            for k in 0..n {
                lu.swap(col * n + k, best * n + k);
            }
            perm.swap(col, best);
            parity = -parity;
        }
        let pivot = lu[col * n + col];
        for row in col + 1..n {
            let factor = lu[row * n + col] / pivot;
            lu[row * n + col] = factor;
            for k in col + 1..n {
                let sub = factor * lu[col * n + k];
                lu[row * n + k] -= sub;
            }
        }
    }
    Ok(Lu {
        n,
        lu,
        perm,
        parity,
    })
}

/// Determinant of a row-major n x n complex matrix.
pub fn det(a: &[Complex64], n: usize) -> Result<Complex64> {
    match lu_factor(a, n) {
        Ok(lu) => Ok(lu.det()),
        Err(Error::SingularMatrix) => Ok(Complex64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

impl Lu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Determinant: permutation sign times the U diagonal product.
    pub fn det(&self) -> Complex64 {
        let mut d = Complex64::new(self.parity, 0.0);
        for i in 0..self.n {
            d *= self.lu[i * self.n + i];
        }
        d
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<Complex64> = (0..n).map(|i| b[self.perm[i]]).collect();
        // Forward substitution with unit lower triangle.
        for i in 1..n {
            for k in 0..i {
                let sub = self.lu[i * n + k] * x[k];
                x[i] -= sub;
            }
        }
        // Back substitution.
        for i in (0..n).rev() {
            for k in i + 1..n {
                let sub = self.lu[i * n + k] * x[k];
                x[i] -= sub;
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Explicit inverse, row-major.
    pub fn inverse(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..n {
            e[col] = Complex64::new(1.0, 0.0);
            let x = self.solve(&e);
            e[col] = Complex64::new(0.0, 0.0);
            for row in 0..n {
                inv[row * n + col] = x[row];
            }
        }
        inv
    }
}

/// 1-norm (maximum absolute column sum) of a row-major matrix.
pub fn norm_1(a: &[Complex64], n: usize) -> f64 {
    (0..n)
        .map(|col| (0..n).map(|row| a[row * n + col].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number, computed from the explicit inverse; exact
/// and cheap at these sizes.
pub fn condition_1norm(a: &[Complex64], n: usize) -> Result<f64> {
    let lu = lu_factor(a, n)?;
    Ok(norm_1(a, n) * norm_1(&lu.inverse(), n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_by_two_determinant() {
        let a = vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 2.0)];
        // (1+i)(3+2i) - 2(-i) = 1 + 5i + 2i = 1 + 7i.
        let d = det(&a, 2).unwrap();
        assert_relative_eq!(d.re, 1.0, max_relative = 1e-14);
        assert_relative_eq!(d.im, 7.0, max_relative = 1e-14);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let d = det(&a, 2).unwrap();
        assert_relative_eq!(d.re, -1.0, max_relative = 1e-14);
    }

    #[test]
    fn singular_matrix_detected() {
        let a = vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)];
        assert!(matches!(lu_factor(&a, 2), Err(Error::SingularMatrix)));
        assert_eq!(det(&a, 2).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn vandermonde_determinant_matches_product_formula() {
        let xs = [c(0.3, 0.1), c(-0.7, 0.4), c(1.2, -0.2), c(0.05, 0.9)];
        let n = xs.len();
        let mut a = vec![c(0.0, 0.0); n * n];
        for (row, &x) in xs.iter().enumerate() {
            let mut p = c(1.0, 0.0);
            for col in 0..n {
                a[row * n + col] = p;
                p *= x;
            }
        }
        let mut want = c(1.0, 0.0);
        for j in 0..n {
            for i in 0..j {
                want *= xs[j] - xs[i];
            }
        }
        let got = det(&a, n).unwrap();
        assert_relative_eq!(got.re, want.re, max_relative = 1e-12);
        assert_relative_eq!(got.im, want.im, max_relative = 1e-12);
    }

    #[test]
    fn solve_and_inverse_round_trip() {
        let n = 4;
        let mut a = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = c(
                    ((i * 7 + j * 3) % 5) as f64 - 1.5,
                    ((i * 2 + j * 11) % 7) as f64 * 0.25 - 0.5,
                );
            }
            a[i * n + i] += c(4.0, 0.0);
        }
        let lu = lu_factor(&a, n).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| c(i as f64 + 0.5, -(i as f64))).collect();
        let x = lu.solve(&b);
        for i in 0..n {
            let mut ax = c(0.0, 0.0);
            for j in 0..n {
                ax += a[i * n + j] * x[j];
            }
            assert_relative_eq!(ax.re, b[i].re, max_relative = 1e-12, epsilon = 1e-12);
            assert_relative_eq!(ax.im, b[i].im, max_relative = 1e-12, epsilon = 1e-12);
        }
        let inv = lu.inverse();
        for i in 0..n {
            for j in 0..n {
                let mut s = c(0.0, 0.0);
                for k in 0..n {
                    s += a[i * n + k] * inv[k * n + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(s.re, want, epsilon = 1e-12);
                assert_relative_eq!(s.im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn identity_has_unit_condition() {
        let n = 3;
        let mut a = vec![c(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = c(1.0, 0.0);
        }
        assert_relative_eq!(condition_1norm(&a, n).unwrap(), 1.0, max_relative = 1e-15);
        // Scaling a row inflates the condition number accordingly.
        a[0] = c(1e6, 0.0);
        assert!(condition_1norm(&a, n).unwrap() > 1e5);
    }
}
