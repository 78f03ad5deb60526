//! Minimal dense linear algebra for the small model matrices.
//!
//! The matrices here are at most a few hundred square, built once per run,
//! so a plain row-major `Vec<f64>` with LU inversion is all we need.

use crate::error::{Error, Result};

/// Dense square matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Mat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut t = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.a[j * n + i] = self.a[i * n + j];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Mat {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.a[i * n + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += aik * other.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.n, x.len());
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Inverse by LU decomposition with partial pivoting.
    pub fn inverse(&self) -> Result<Mat> {
        let n = self.n;
        let mut lu = self.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();

        for col in 0..n {
            // pivot
            let mut p = col;
            let mut best = lu[col * n + col].abs();
            for r in (col + 1)..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 {
                return Err(Error::invalid("matrix is singular"));
            }
            if p != col {
                for j in 0..n {
                    lu.swap(col * n + j, p * n + j);
                }
                piv.swap(col, p);
            }
            let pivot = lu[col * n + col];
            for r in (col + 1)..n {
                let f = lu[r * n + col] / pivot;
                lu[r * n + col] = f;
                for j in (col + 1)..n {
                    lu[r * n + j] -= f * lu[col * n + j];
                }
            }
        }

        // solve LU x = e_k for each unit vector, accounting for row permutation
        let mut inv = Mat::zeros(n);
        let mut x = vec![0.0; n];
        for k in 0..n {
            for (r, &pr) in piv.iter().enumerate() {
                x[r] = if pr == k { 1.0 } else { 0.0 };
            }
            // forward substitution (unit lower-triangular)
            for i in 1..n {
                let mut s = x[i];
                for j in 0..i {
                    s -= lu[i * n + j] * x[j];
                }
                x[i] = s;
            }
            // back substitution
            for i in (0..n).rev() {
                let mut s = x[i];
                for j in (i + 1)..n {
                    s -= lu[i * n + j] * x[j];
                }
                x[i] = s / lu[i * n + i];
            }
            for i in 0..n {
                inv.a[i * n + k] = x[i];
            }
        }
        Ok(inv)
    }

    /// Max absolute entry of `self * other - I`.
    pub fn product_identity_residual(&self, other: &Mat) -> f64 {
        let prod = self.mul(other);
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod.a[i * n + j] - target).abs());
            }
        }
        worst
    }

    /// Dominant eigenvalue magnitude by power iteration.
    ///
    /// Converges for matrices with a real dominant eigenvalue (here: nonnegative
    /// matrices, by Perron-Frobenius). Returns 0 when the iterate collapses to zero.
    pub fn spectral_radius(&self, tol: f64, max_iter: usize) -> f64 {
        let n = self.n;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda = 0.0;
        for _ in 0..max_iter {
            let w = self.mul_vec(&v);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let new_lambda = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
            if (new_lambda - lambda).abs() < tol {
                return new_lambda;
            }
            lambda = new_lambda;
        }
        lambda
    }
}
