//! Model parameters and the fixed matrices driving the gap dynamics.
//!
//! The reflection matrix couples the local-time pushes into the gap process:
//! gap 1 gains the full push of the bottom collision and loses half of the
//! next one up, gap 2 loses the full bottom push, and every other gap sees
//! the classic half/half tridiagonal exchange. The drift matrix turns the
//! vector of independent Brownian drivers into gap increments.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Reflection matrix family: R, its inverse W, and U = I - R.
#[derive(Debug, Clone)]
pub struct ReflectionMatrix {
    pub r: Mat,
    pub w: Mat,
    pub u: Mat,
}

/// Lower-bidiagonal drift matrix A and its inverse.
#[derive(Debug, Clone)]
pub struct DriftMatrix {
    pub a: Mat,
    pub a_inv: Mat,
}

/// Parameters of an n-particle run, with the derived matrices built once.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub n: usize,
    pub g: f64,
    pub v0: f64,
    pub z0: Vec<f64>,
    pub reflection: ReflectionMatrix,
    pub drift: DriftMatrix,
}

impl ModelParams {
    pub fn new(n: usize, g: f64, v0: f64, z0: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !g.is_finite() || g <= 0.0 {
            return Err(Error::invalid("g must be positive and finite"));
        }
        if !v0.is_finite() {
            return Err(Error::invalid("v0 must be finite"));
        }
        if z0.len() != n {
            return Err(Error::invalid(format!(
                "z0 must have length n = {n}, got {}",
                z0.len()
            )));
        }
        if z0.iter().any(|&z| !z.is_finite() || z < 0.0) {
            return Err(Error::invalid("every z0 component must be nonnegative"));
        }
        Ok(ModelParams {
            n,
            g,
            v0,
            z0,
            reflection: build_reflection_matrix(n)?,
            drift: build_drift_matrix(n)?,
        })
    }

    /// Convenience constructor with zero initial velocity and unit gaps.
    pub fn with_defaults(n: usize, g: f64) -> Result<Self> {
        ModelParams::new(n, g, 0.0, vec![1.0; n])
    }
}

/// Build R (unit diagonal, -1 at (2,1), -1/2 on the remaining sub/super
/// diagonals), W = R^-1 by dense LU, and U = I - R.
pub fn build_reflection_matrix(n: usize) -> Result<ReflectionMatrix> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut r = Mat::identity(n);
    if n >= 2 {
        r.set(0, 1, -0.5);
        r.set(1, 0, -1.0);
        for i in 1..n {
            if i + 1 < n {
                r.set(i, i + 1, -0.5);
            }
            if i >= 2 {
                r.set(i, i - 1, -0.5);
            }
        }
    }
    let w = r.inverse()?;
    let mut u = Mat::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            u.set(i, j, id - r.get(i, j));
        }
    }
    Ok(ReflectionMatrix { r, w, u })
}

/// Build A (unit diagonal, -1 subdiagonal) and its inverse, verifying the
/// inverse by multiplication rather than assuming the closed form.
pub fn build_drift_matrix(n: usize) -> Result<DriftMatrix> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut a = Mat::identity(n);
    for i in 1..n {
        a.set(i, i - 1, -1.0);
    }
    let a_inv = a.inverse()?;
    let residual = a.product_identity_residual(&a_inv);
    if residual > 1e-12 {
        return Err(Error::invalid(format!(
            "drift matrix inversion residual {residual:.3e} exceeds 1e-12"
        )));
    }
    Ok(DriftMatrix { a, a_inv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reflection_n1_is_scalar_one() {
        let m = build_reflection_matrix(1).unwrap();
        assert_eq!(m.r.get(0, 0), 1.0);
        assert_eq!(m.w.get(0, 0), 1.0);
        assert_eq!(m.u.get(0, 0), 0.0);
    }

    #[test]
    fn reflection_n2_pattern() {
        let m = build_reflection_matrix(2).unwrap();
        assert_eq!(m.r.get(0, 0), 1.0);
        assert_eq!(m.r.get(0, 1), -0.5);
        assert_eq!(m.r.get(1, 0), -1.0);
        assert_eq!(m.r.get(1, 1), 1.0);
    }

    #[test]
    fn reflection_n5_pattern() {
        let m = build_reflection_matrix(5).unwrap();
        for i in 0..5 {
            assert_eq!(m.r.get(i, i), 1.0);
        }
        // only the (2,1) entry is -1; all other off-tridiagonal couplings are -1/2
        assert_eq!(m.r.get(1, 0), -1.0);
        for i in 2..5 {
            assert_eq!(m.r.get(i, i - 1), -0.5);
        }
        for i in 0..4 {
            assert_eq!(m.r.get(i, i + 1), -0.5);
        }
        assert_eq!(m.r.get(0, 2), 0.0);
        assert_eq!(m.r.get(3, 1), 0.0);
    }

    #[test]
    fn w_column_one_closed_form() {
        // W[0][0] = n and W[i][0] = 2n - 2i (0-based rows) by direct inversion
        for n in 1..=8usize {
            let m = build_reflection_matrix(n).unwrap();
            assert_relative_eq!(m.w.get(0, 0), n as f64, epsilon = 1e-10);
            for i in 1..n {
                assert_relative_eq!(m.w.get(i, 0), (2 * n - 2 * i) as f64, epsilon = 1e-10);
            }
        }
        let m3 = build_reflection_matrix(3).unwrap();
        assert_relative_eq!(m3.w.get(0, 0), 3.0, epsilon = 1e-12);
        assert_relative_eq!(m3.w.get(1, 0), 4.0, epsilon = 1e-12);
        assert_relative_eq!(m3.w.get(2, 0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn w_nonnegative_and_rw_identity() {
        for n in [1usize, 2, 3, 7, 16, 64] {
            let m = build_reflection_matrix(n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!(
                        m.w.get(i, j) >= -1e-14,
                        "W[{i}][{j}] = {} negative for n = {n}",
                        m.w.get(i, j)
                    );
                }
            }
            assert!(m.r.product_identity_residual(&m.w) < 1e-12);
            assert!(m.w.product_identity_residual(&m.r) < 1e-12);
        }
    }

    #[test]
    fn u_transpose_spectral_radius_below_one() {
        for n in 1..=64usize {
            let m = build_reflection_matrix(n).unwrap();
            let rho = m.u.transpose().spectral_radius(1e-8, 200_000);
            assert!(rho < 1.0, "spectral radius {rho} >= 1 for n = {n}");
        }
    }

    #[test]
    fn drift_matrix_pattern_and_inverse() {
        let d1 = build_drift_matrix(1).unwrap();
        assert_eq!(d1.a.get(0, 0), 1.0);

        let d2 = build_drift_matrix(2).unwrap();
        assert_eq!(d2.a.get(0, 0), 1.0);
        assert_eq!(d2.a.get(0, 1), 0.0);
        assert_eq!(d2.a.get(1, 0), -1.0);
        assert_eq!(d2.a.get(1, 1), 1.0);

        // direct multiplication oracle for n = 3
        let d3 = build_drift_matrix(3).unwrap();
        assert!(d3.a.product_identity_residual(&d3.a_inv) < 1e-12);

        // inverse is lower-triangular with entries in {0, 1}
        for n in [1usize, 2, 3, 5, 17] {
            let d = build_drift_matrix(n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let e = d.a_inv.get(i, j);
                    let expected = if j <= i { 1.0 } else { 0.0 };
                    assert_eq!(e, expected, "A^-1[{i}][{j}] for n = {n}");
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0, 1.0, 0.0, vec![]).is_err());
        assert!(ModelParams::new(2, -1.0, 0.0, vec![1.0, 1.0]).is_err());
        assert!(ModelParams::new(2, 1.0, 0.0, vec![-0.1, 1.0]).is_err());
        assert!(ModelParams::new(2, 1.0, 0.0, vec![1.0]).is_err());
        let p = ModelParams::new(2, 1.0, 0.5, vec![0.0, 2.0]).unwrap();
        assert_eq!(p.n, 2);
        assert_eq!(p.reflection.r.dim(), 2);
    }
}
