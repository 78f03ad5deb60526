//! The explicit product-form stationary law of the velocity/gap process and
//! machine-precision verification of the PDE and boundary identities that
//! characterize it.
//!
//! The law factorizes as a Gaussian in the velocity, centered at g/N with
//! variance 1/2, times independent exponentials in the gaps with rates
//! c_i = 2g(N-i+1)/N. The normalizer has the closed form
//! c_pi = (1/sqrt(pi)) * prod_i c_i.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Product-form stationary density: Gaussian velocity factor, exponential gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLaw {
    /// Center of the Gaussian velocity factor, g/N.
    pub mean_v: f64,
    /// Variance of the velocity factor (always 1/2).
    pub var_v: f64,
    /// Exponential rates c_1..c_N, strictly decreasing in the gap index.
    pub rates: Vec<f64>,
    /// Normalization constant.
    pub c_pi: f64,
}

/// Residuals of the stationarity identities at a probe set.
#[derive(Debug, Clone)]
pub struct BarResidual {
    /// Max interior PDE residual over probes with all gaps positive.
    pub interior: f64,
    /// Max boundary residual per face z_i = 0.
    pub boundary: Vec<f64>,
    /// Residual of the algebraic identity (1/2) sum h_ij c_i c_j = 2 g^2 / N.
    pub identity: f64,
}

pub fn stationary_law(params: &ModelParams) -> StationaryLaw {
    let n = params.n;
    let g = params.g;
    let rates: Vec<f64> = (1..=n)
        .map(|i| 2.0 * g * ((n - i + 1) as f64) / n as f64)
        .collect();
    let c_pi = rates.iter().product::<f64>() / std::f64::consts::PI.sqrt();
    StationaryLaw {
        mean_v: g / n as f64,
        var_v: 0.5,
        rates,
        c_pi,
    }
}

/// Density c_pi * e^{-(v - g/N)^2} * prod_i e^{-c_i z_i}.
pub fn stationary_density(law: &StationaryLaw, v: f64, z: &[f64]) -> Result<f64> {
    if z.len() != law.rates.len() {
        return Err(Error::invalid(format!(
            "z must have {} components, got {}",
            law.rates.len(),
            z.len()
        )));
    }
    if z.iter().any(|&zi| zi < 0.0) {
        return Err(Error::invalid("z components must be nonnegative"));
    }
    let dv = v - law.mean_v;
    let mut exponent = -dv * dv;
    for (zi, ci) in z.iter().zip(&law.rates) {
        exponent -= ci * zi;
    }
    Ok(law.c_pi * exponent.exp())
}

/// Draw (v, z) from the law using the given stream: one Box-Muller normal for
/// the velocity, then inverse-CDF exponentials for the gaps in index order.
pub fn sample_with<R: Rng>(law: &StationaryLaw, rng: &mut R) -> (f64, Vec<f64>) {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    let std_normal = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    let v = law.mean_v + law.var_v.sqrt() * std_normal;
    let z = law
        .rates
        .iter()
        .map(|&c| {
            let u: f64 = 1.0 - rng.random::<f64>();
            -u.ln() / c
        })
        .collect();
    (v, z)
}

/// Seeded convenience wrapper over [`sample_with`].
pub fn stationary_sample(law: &StationaryLaw, seed: u64) -> (f64, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(law, &mut rng)
}

/// Generator second-order coefficients h_ij as exact integers:
/// h_11 = 1, h_ii = 2 for i >= 2, h_ij = -1 for |i - j| = 1, zero otherwise.
pub fn generator_coefficients(n: usize) -> Vec<i64> {
    let mut h = vec![0i64; n * n];
    for i in 0..n {
        h[i * n + i] = if i == 0 { 1 } else { 2 };
        if i + 1 < n {
            h[i * n + i + 1] = -1;
            h[(i + 1) * n + i] = -1;
        }
    }
    h
}

/// Exact integer check of sum_j h_ij (N - j + 1) = delta_{1,i} for every row.
pub fn kronecker_identity_holds(n: usize) -> bool {
    let h = generator_coefficients(n);
    for i in 0..n {
        let mut s: i64 = 0;
        for j in 0..n {
            s += h[i * n + j] * (n as i64 - j as i64);
        }
        let expected = if i == 0 { 1 } else { 0 };
        if s != expected {
            return false;
        }
    }
    true
}

/// Evaluate the stationarity identities with closed-form derivatives of the
/// product density at the given probe points.
///
/// The probe set must contain at least one interior point (all gaps positive)
/// and, for every face i, at least one point with z_i = 0.
pub fn verify_bar_identities(
    params: &ModelParams,
    probe_points: &[(f64, Vec<f64>)],
) -> Result<BarResidual> {
    let n = params.n;
    let g = params.g;
    let law = stationary_law(params);
    let c = &law.rates;
    let h = generator_coefficients(n);

    let mut interior: f64 = 0.0;
    let mut seen_interior = false;
    let mut boundary = vec![0.0f64; n];
    let mut seen_face = vec![false; n];

    for (v, z) in probe_points {
        let pi = stationary_density(&law, *v, z)?;
        // closed-form partials of the product density
        let dpi_dv = -2.0 * (v - law.mean_v) * pi;
        let dpi_dz: Vec<f64> = c.iter().map(|ci| -ci * pi).collect();
        let d2 = |i: usize, j: usize| c[i] * c[j] * pi;

        if z.iter().all(|&zi| zi > 0.0) {
            seen_interior = true;
            let mut second = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let hij = h[i * n + j];
                    if hij != 0 {
                        second += hij as f64 * d2(i, j);
                    }
                }
            }
            let residual = 0.5 * second - g * dpi_dv + v * dpi_dz[0];
            interior = interior.max(residual.abs());
        }

        for i in 0..n {
            if z[i] == 0.0 {
                seen_face[i] = true;
                let residual = if i == 0 {
                    // bottom face couples the velocity derivative
                    let upper = if n >= 2 { dpi_dz[1] } else { 0.0 };
                    2.0 * v * pi + dpi_dz[0] - upper + dpi_dv
                } else if i + 1 < n {
                    -dpi_dz[i - 1] + 2.0 * dpi_dz[i] - dpi_dz[i + 1]
                } else {
                    -dpi_dz[i - 1] + 2.0 * dpi_dz[i]
                };
                boundary[i] = boundary[i].max(residual.abs());
            }
        }
    }

    if !seen_interior {
        return Err(Error::invalid(
            "probe set has no interior point (all gaps positive)",
        ));
    }
    if let Some(face) = seen_face.iter().position(|s| !s) {
        return Err(Error::invalid(format!(
            "probe set has no point on face z_{} = 0",
            face + 1
        )));
    }

    let mut half_sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            let hij = h[i * n + j];
            if hij != 0 {
                half_sum += hij as f64 * c[i] * c[j];
            }
        }
    }
    let identity = (0.5 * half_sum - 2.0 * g * g / n as f64).abs();

    Ok(BarResidual {
        interior,
        boundary,
        identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn law(n: usize, g: f64) -> (ModelParams, StationaryLaw) {
        let p = ModelParams::with_defaults(n, g).unwrap();
        let l = stationary_law(&p);
        (p, l)
    }

    #[test]
    fn rates_and_mean() {
        let (_, l2) = law(2, 1.0);
        assert_eq!(l2.rates, vec![2.0, 1.0]);
        assert_eq!(l2.mean_v, 0.5);

        let (_, l1) = law(1, 1.0);
        assert_eq!(l1.rates, vec![2.0]);
        assert_eq!(l1.mean_v, 1.0);

        for n in 2..=8 {
            let (_, l) = law(n, 1.7);
            for w in l.rates.windows(2) {
                assert!(w[1] < w[0]);
            }
            assert_relative_eq!(l.rates[0], 2.0 * 1.7, epsilon = 1e-14);
            assert_relative_eq!(l.rates[n - 1], 2.0 * 1.7 / n as f64, epsilon = 1e-14);
        }
    }

    /// Simpson-rule quadrature of the unnormalized density, factor by factor.
    fn quadrature_normalizer(law: &StationaryLaw) -> f64 {
        let simpson = |f: &dyn Fn(f64) -> f64, a: f64, b: f64, m: usize| {
            let h = (b - a) / m as f64;
            let mut s = f(a) + f(b);
            for k in 1..m {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                s += w * f(a + k as f64 * h);
            }
            s * h / 3.0
        };
        let mu = law.mean_v;
        let gauss = simpson(&|v: f64| (-(v - mu) * (v - mu)).exp(), mu - 10.0, mu + 10.0, 4000);
        let mut total = gauss;
        for &c in &law.rates {
            total *= simpson(&|z: f64| (-c * z).exp(), 0.0, 60.0 / c, 4000);
        }
        1.0 / total
    }

    #[test]
    fn normalizer_matches_quadrature() {
        for (n, g) in [(1usize, 1.0), (2, 1.0), (3, 2.0), (5, 0.5)] {
            let (_, l) = law(n, g);
            let q = quadrature_normalizer(&l);
            assert_relative_eq!(l.c_pi, q, max_relative = 1e-6);
        }
    }

    #[test]
    fn density_values() {
        let (_, l) = law(2, 1.0);
        // exponents vanish at the mode
        let top = stationary_density(&l, l.mean_v, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(top, l.c_pi, epsilon = 1e-14);

        // ratio under a shift in one gap coordinate
        let base = stationary_density(&l, 0.3, &[0.4, 0.2]).unwrap();
        let shifted = stationary_density(&l, 0.3, &[0.4, 0.2 + 0.5]).unwrap();
        assert_relative_eq!(shifted / base, (-l.rates[1] * 0.5f64).exp(), epsilon = 1e-12);

        // hand-evaluated log-density difference
        let a = stationary_density(&l, 0.5, &[0.0, 0.0]).unwrap();
        let b = stationary_density(&l, 1.5, &[1.0, 1.0]).unwrap();
        assert_relative_eq!((a / b).ln(), 4.0, epsilon = 1e-12);

        assert!(stationary_density(&l, 0.0, &[-0.1, 0.0]).is_err());
        assert!(stationary_density(&l, 0.0, &[0.1]).is_err());
    }

    #[test]
    fn sampler_moments_and_determinism() {
        let (_, l) = law(3, 1.0);
        let n_draws = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut sum_v = 0.0;
        let mut sum_z = [0.0; 3];
        for _ in 0..n_draws {
            let (v, z) = sample_with(&l, &mut rng);
            sum_v += v;
            for (acc, zi) in sum_z.iter_mut().zip(&z) {
                *acc += zi;
            }
        }
        let mean_v = sum_v / n_draws as f64;
        let band = 3.0 * (0.5f64 / n_draws as f64).sqrt();
        assert!(
            (mean_v - l.mean_v).abs() < band,
            "velocity mean {mean_v} outside CLT band {band}"
        );
        for i in 0..3 {
            let mean_z = sum_z[i] / n_draws as f64;
            let target = 1.0 / l.rates[i];
            let band = 3.0 * target / (n_draws as f64).sqrt();
            assert!(
                (mean_z - target).abs() < band,
                "gap {i} mean {mean_z} vs {target}"
            );
        }

        let a = stationary_sample(&l, 7);
        let b = stationary_sample(&l, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_marginals_pass_ks_at_one_percent() {
        // 10^5 draws per coordinate against the closed-form CDFs
        let (_, l) = law(3, 1.0);
        let n_draws = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut vs = Vec::with_capacity(n_draws);
        let mut zs: Vec<Vec<f64>> = (0..3).map(|_| Vec::with_capacity(n_draws)).collect();
        for _ in 0..n_draws {
            let (v, z) = sample_with(&l, &mut rng);
            vs.push(v);
            for (bucket, zi) in zs.iter_mut().zip(&z) {
                bucket.push(*zi);
            }
        }
        let critical = 1.63 / (n_draws as f64).sqrt(); // alpha = 0.01
        let ks = |samples: &mut Vec<f64>, cdf: &dyn Fn(f64) -> f64| -> f64 {
            samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = samples.len() as f64;
            let mut d: f64 = 0.0;
            for (i, x) in samples.iter().enumerate() {
                let f = cdf(*x);
                d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
            }
            d
        };
        let sd = l.var_v.sqrt();
        let mu = l.mean_v;
        let normal_cdf =
            move |x: f64| 0.5 * (1.0 + erf_approx((x - mu) / (sd * std::f64::consts::SQRT_2)));
        let d_v = ks(&mut vs, &normal_cdf);
        assert!(d_v <= critical, "velocity KS {d_v} vs critical {critical}");
        for (bucket, &c) in zs.iter_mut().zip(&l.rates) {
            let exp_cdf = move |x: f64| if x <= 0.0 { 0.0 } else { 1.0 - (-c * x).exp() };
            let d = ks(bucket, &exp_cdf);
            assert!(d <= critical, "gap KS {d} vs critical {critical}");
        }
    }

    /// Abramowitz-Stegun 7.1.26 rational approximation (|error| < 1.5e-7),
    /// plenty for a KS check at n = 1e5.
    fn erf_approx(x: f64) -> f64 {
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let poly = t
            * (0.254829592
                + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
        sign * (1.0 - poly * (-x * x).exp())
    }

    #[test]
    fn kronecker_identity_small_and_large() {
        for n in 1..=64 {
            assert!(kronecker_identity_holds(n), "failed at n = {n}");
        }
    }

    fn probes_for(n: usize, g: f64, seed: u64) -> Vec<(f64, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut probes = Vec::new();
        for _ in 0..20 {
            let v: f64 = g / n as f64 + rng.random_range(-2.0..2.0);
            let z: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
            probes.push((v, z));
        }
        for face in 0..n {
            for _ in 0..5 {
                let v: f64 = g / n as f64 + rng.random_range(-2.0..2.0);
                let mut z: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..3.0)).collect();
                z[face] = 0.0;
                probes.push((v, z));
            }
        }
        probes
    }

    #[test]
    fn bar_identities_hold_at_machine_precision() {
        for n in [1usize, 2, 3, 5, 8] {
            for g in [0.5, 1.0, 2.0] {
                let params = ModelParams::with_defaults(n, g).unwrap();
                let l = stationary_law(&params);
                let probes = probes_for(n, g, 1234 + n as u64);
                let res = verify_bar_identities(&params, &probes).unwrap();
                assert!(
                    res.identity <= 1e-12 * g * g,
                    "identity residual {} for n={n} g={g}",
                    res.identity
                );
                assert!(
                    res.interior <= 1e-10 * l.c_pi,
                    "interior residual {} for n={n} g={g}",
                    res.interior
                );
                for (i, b) in res.boundary.iter().enumerate() {
                    assert!(
                        *b <= 1e-10 * l.c_pi,
                        "face {} residual {b} for n={n} g={g}",
                        i + 1
                    );
                }
            }
        }
    }

    #[test]
    fn bar_probe_set_must_cover_faces() {
        let params = ModelParams::with_defaults(3, 1.0).unwrap();
        // interior only: missing faces
        let probes = vec![(0.4, vec![1.0, 1.0, 1.0])];
        let err = verify_bar_identities(&params, &probes).unwrap_err();
        assert!(err.to_string().contains("z_1"));

        // missing interior
        let probes = vec![
            (0.4, vec![0.0, 1.0, 1.0]),
            (0.4, vec![1.0, 0.0, 1.0]),
            (0.4, vec![1.0, 1.0, 0.0]),
        ];
        let err = verify_bar_identities(&params, &probes).unwrap_err();
        assert!(err.to_string().contains("interior"));
    }

    /// Finite-difference cross-check of the closed-form derivative route.
    #[test]
    fn interior_residual_matches_finite_differences() {
        let params = ModelParams::with_defaults(3, 1.0).unwrap();
        let l = stationary_law(&params);
        let h = generator_coefficients(3);
        let step = 1e-5;
        let probe_v = 0.7;
        let probe_z = [0.8, 0.5, 1.1];

        let dens = |v: f64, z: &[f64]| stationary_density(&l, v, z).unwrap();
        let mut second = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if h[i * 3 + j] == 0 {
                    continue;
                }
                let mut zpp = probe_z.to_vec();
                let mut zpm = probe_z.to_vec();
                let mut zmp = probe_z.to_vec();
                let mut zmm = probe_z.to_vec();
                zpp[i] += step;
                zpp[j] += step;
                zpm[i] += step;
                zpm[j] -= step;
                zmp[i] -= step;
                zmp[j] += step;
                zmm[i] -= step;
                zmm[j] -= step;
                let d2 = (dens(probe_v, &zpp) - dens(probe_v, &zpm) - dens(probe_v, &zmp)
                    + dens(probe_v, &zmm))
                    / (4.0 * step * step);
                second += h[i * 3 + j] as f64 * d2;
            }
        }
        let dv = (dens(probe_v + step, &probe_z) - dens(probe_v - step, &probe_z)) / (2.0 * step);
        let mut z_plus = probe_z.to_vec();
        let mut z_minus = probe_z.to_vec();
        z_plus[0] += step;
        z_minus[0] -= step;
        let dz1 = (dens(probe_v, &z_plus) - dens(probe_v, &z_minus)) / (2.0 * step);
        let fd_residual = 0.5 * second - 1.0 * dv + probe_v * dz1;
        assert!(
            fd_residual.abs() <= 1e-4 * l.c_pi,
            "finite-difference residual {fd_residual}"
        );
    }
}
