//! Estimators that turn trajectories and replica ensembles into the numbers
//! the theory predicts: LLN slopes, stationary-marginal KS distances,
//! collision-intensity ordering, hitting-time tails and a marginal
//! convergence-rate proxy.
//!
//! Everything here is a pure function of its inputs. The heavy entry points
//! accept either full [`Trajectory`] values or the compact per-replica
//! summaries the streaming runner collects; both paths share the same
//! estimator code.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::stationary::StationaryLaw;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;

/// Minimum horizon for slope estimates; shorter runs are transient-dominated.
pub const LLN_HORIZON_FLOOR: f64 = 100.0;
/// Number of blocks used for the slope standard error.
pub const LLN_BLOCKS: usize = 10;

/// Endpoint-ratio estimate of a limit f(t)/t with a block-based standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Post-burn-in window (t_lo, t_hi) the estimate used.
    pub window: (f64, f64),
}

/// One-sample Kolmogorov-Smirnov report against a named closed-form law.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub n_samples: usize,
    pub target: String,
}

/// Exponential fit of a log-survival (or log-distance) curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    /// Decay rate (minus the fitted slope); positive means decay.
    pub rate: f64,
    pub r2: f64,
    pub n_events: usize,
}

/// Closed-form target laws supported by [`ks_distance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetLaw {
    Normal { mean: f64, var: f64 },
    Exponential { rate: f64 },
}

impl TargetLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            TargetLaw::Normal { mean, var } => Normal::new(mean, var.sqrt())
                .expect("valid normal parameters")
                .cdf(x),
            TargetLaw::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match *self {
            TargetLaw::Normal { mean, var } => format!("Normal({mean}, {var})"),
            TargetLaw::Exponential { rate } => format!("Exponential({rate})"),
        }
    }
}

/// Observable values at block boundaries: the data a slope estimate needs.
///
/// `times` spans the post-burn-in window; `values` holds the matching
/// observable samples.
#[derive(Debug, Clone)]
pub struct BlockSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl BlockSeries {
    /// Endpoint slope plus block-scatter standard error.
    pub fn slope(&self) -> SlopeEstimate {
        let t_lo = self.times[0];
        let t_hi = *self.times.last().unwrap();
        let value = (self.values.last().unwrap() - self.values[0]) / (t_hi - t_lo);
        let k = self.times.len() - 1;
        let mut block_slopes = Vec::with_capacity(k);
        for b in 0..k {
            let dt = self.times[b + 1] - self.times[b];
            block_slopes.push((self.values[b + 1] - self.values[b]) / dt);
        }
        let mean = block_slopes.iter().sum::<f64>() / k as f64;
        let var = if k > 1 {
            block_slopes
                .iter()
                .map(|s| (s - mean) * (s - mean))
                .sum::<f64>()
                / (k as f64 - 1.0)
        } else {
            0.0
        };
        SlopeEstimate {
            value,
            stderr: (var / k as f64).sqrt(),
            window: (t_lo, t_hi),
        }
    }
}

/// Keys of the slope map: "x0".."xN" for ranked positions, "l1".."lN" for
/// local times.
pub fn slope_keys(n: usize) -> Vec<String> {
    let mut keys = Vec::new();
    for i in 0..=n {
        keys.push(format!("x{i}"));
    }
    for i in 1..=n {
        keys.push(format!("l{i}"));
    }
    keys
}

/// Almost-sure limits the slopes converge to: g/N for every ranked position,
/// g for L_1 and 2(N-i+1)g/N for L_i, i >= 2.
pub fn lln_targets(n: usize, g: f64) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    for i in 0..=n {
        m.insert(format!("x{i}"), g / n as f64);
    }
    m.insert("l1".to_string(), g);
    for i in 2..=n {
        m.insert(format!("l{i}"), 2.0 * (n - i + 1) as f64 * g / n as f64);
    }
    m
}

/// The grid indices bounding the post-burn-in blocks.
pub fn block_boundaries(steps: usize, k_burn: usize) -> Vec<usize> {
    let k_burn = k_burn.min(steps.saturating_sub(1));
    let mut boundaries = Vec::with_capacity(LLN_BLOCKS + 1);
    for b in 0..=LLN_BLOCKS {
        boundaries.push(k_burn + (steps - k_burn) * b / LLN_BLOCKS);
    }
    boundaries.dedup();
    boundaries
}

/// Extract block series for every slope observable from a full trajectory.
pub fn lln_block_series(
    traj: &Trajectory,
    burn_frac: f64,
) -> Result<BTreeMap<String, BlockSeries>> {
    if !(0.0..1.0).contains(&burn_frac) {
        return Err(Error::invalid("burn_frac must lie in [0, 1)"));
    }
    let t_end = traj.grid.t_end;
    if t_end < LLN_HORIZON_FLOOR {
        return Err(Error::AnalysisRefused(format!(
            "horizon {t_end} below the {LLN_HORIZON_FLOOR} time-unit floor for slope estimates"
        )));
    }
    let n = traj.params.n;
    let steps = traj.grid.steps;
    let k_burn = ((burn_frac * steps as f64).round() as usize).min(steps - 1);
    let boundaries = block_boundaries(steps, k_burn);
    if boundaries.len() < 2 {
        return Err(Error::AnalysisRefused(
            "too few grid points after burn-in".into(),
        ));
    }

    let times: Vec<f64> = boundaries.iter().map(|&k| traj.grid.time(k)).collect();
    let mut out = BTreeMap::new();
    for i in 0..=n {
        let values = boundaries
            .iter()
            .map(|&k| traj.ranked_position(k, i))
            .collect();
        out.insert(
            format!("x{i}"),
            BlockSeries {
                times: times.clone(),
                values,
            },
        );
    }
    for i in 1..=n {
        let values = boundaries.iter().map(|&k| traj.l_at(k, i - 1)).collect();
        out.insert(
            format!("l{i}"),
            BlockSeries {
                times: times.clone(),
                values,
            },
        );
    }
    Ok(out)
}

/// Endpoint-ratio estimates of the LLN limits over the post-burn-in window.
pub fn lln_slopes(traj: &Trajectory, burn_frac: f64) -> Result<BTreeMap<String, SlopeEstimate>> {
    let series = lln_block_series(traj, burn_frac)?;
    Ok(series.into_iter().map(|(k, s)| (k, s.slope())).collect())
}

/// One-sample Kolmogorov-Smirnov statistic against a closed-form CDF.
pub fn ks_distance(samples: &[f64], target: &TargetLaw) -> Result<KsReport> {
    if samples.len() < 100 {
        return Err(Error::AnalysisRefused(format!(
            "need at least 100 samples for a KS statistic, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = target.cdf(*x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsReport {
        statistic: d,
        n_samples: sorted.len(),
        target: target.name(),
    })
}

/// Two-sample Kolmogorov-Smirnov statistic (used by the cross-simulator check).
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() < 100 || ys.len() < 100 {
        return Err(Error::AnalysisRefused(
            "need at least 100 samples per side for a two-sample KS statistic".into(),
        ));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Per-replica endpoint local times of the bottom two gaps.
#[derive(Debug, Clone, Copy)]
pub struct OrderingSample {
    pub l1: f64,
    pub l2: f64,
}

/// Fraction of replicas with L_2(T) > L_1(T). Requires n >= 3 (the asymptotic
/// rate reversal 2(N-1)g/N > g only holds there) and at least 10 replicas.
pub fn ordering_fraction(n: usize, samples: &[OrderingSample]) -> Result<f64> {
    if n <= 2 {
        return Err(Error::AnalysisRefused(format!(
            "collision-intensity ordering requires N >= 3, got N = {n}"
        )));
    }
    if samples.len() < 10 {
        return Err(Error::AnalysisRefused(format!(
            "need at least 10 replicas, got {}",
            samples.len()
        )));
    }
    let hits = samples.iter().filter(|s| s.l2 > s.l1).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// [`ordering_fraction`] over full trajectories.
pub fn collision_ordering_test(replicas: &[Trajectory]) -> Result<f64> {
    if replicas.is_empty() {
        return Err(Error::AnalysisRefused("no replicas given".into()));
    }
    let n = replicas[0].params.n;
    let samples: Vec<OrderingSample> = replicas
        .iter()
        .map(|t| {
            let last = t.grid.steps;
            OrderingSample {
                l1: t.l_at(last, 0),
                l2: if n >= 2 { t.l_at(last, 1) } else { 0.0 },
            }
        })
        .collect();
    ordering_fraction(n, &samples)
}

/// Post-burn-in (v, z) samples pooled across replicas, one bucket per
/// coordinate.
#[derive(Debug, Clone, Default)]
pub struct PooledSamples {
    pub v: Vec<f64>,
    pub z: Vec<Vec<f64>>,
}

impl PooledSamples {
    pub fn new(n: usize) -> Self {
        PooledSamples {
            v: Vec::new(),
            z: vec![Vec::new(); n],
        }
    }

    pub fn push(&mut self, v: f64, z: &[f64]) {
        self.v.push(v);
        for (bucket, zi) in self.z.iter_mut().zip(z) {
            bucket.push(*zi);
        }
    }

    pub fn merge(&mut self, other: &PooledSamples) {
        self.v.extend_from_slice(&other.v);
        for (bucket, src) in self.z.iter_mut().zip(&other.z) {
            bucket.extend_from_slice(src);
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// KS reports for V against Normal(g/N, 1/2) and each Z_i against
/// Exponential(c_i).
pub fn pooled_marginal_ks(pooled: &PooledSamples, law: &StationaryLaw) -> Result<Vec<KsReport>> {
    if pooled.len() < 100 {
        return Err(Error::AnalysisRefused(format!(
            "need at least 100 pooled samples, got {}",
            pooled.len()
        )));
    }
    let mut reports = vec![ks_distance(
        &pooled.v,
        &TargetLaw::Normal {
            mean: law.mean_v,
            var: law.var_v,
        },
    )?];
    for (bucket, &rate) in pooled.z.iter().zip(&law.rates) {
        reports.push(ks_distance(bucket, &TargetLaw::Exponential { rate })?);
    }
    Ok(reports)
}

/// Thin a trajectory into pooled samples at times burn_in + k * thin, k >= 1.
pub fn pool_from_trajectory(
    pooled: &mut PooledSamples,
    traj: &Trajectory,
    burn_in: f64,
    thin: f64,
) -> Result<()> {
    if !thin.is_finite() || thin <= 0.0 {
        return Err(Error::invalid("thin must be positive"));
    }
    if burn_in >= traj.grid.t_end {
        return Err(Error::invalid("burn_in must be below the horizon"));
    }
    let dt = traj.grid.dt;
    let mut m = 1usize;
    loop {
        let t = burn_in + m as f64 * thin;
        if t > traj.grid.t_end + 1e-9 {
            break;
        }
        let k = ((t / dt).round() as usize).min(traj.grid.steps);
        pooled.push(traj.v[k], traj.z_row(k));
        m += 1;
    }
    Ok(())
}

/// Pool thinned post-burn-in samples across replicas and compare each
/// coordinate's empirical law with its stationary marginal.
pub fn stationary_validation(
    replicas: &[Trajectory],
    law: &StationaryLaw,
    burn_in: f64,
    thin: f64,
) -> Result<Vec<KsReport>> {
    if replicas.is_empty() {
        return Err(Error::AnalysisRefused("no replicas given".into()));
    }
    let n = replicas[0].params.n;
    let mut pooled = PooledSamples::new(n);
    for traj in replicas {
        pool_from_trajectory(&mut pooled, traj, burn_in, thin)?;
    }
    pooled_marginal_ks(&pooled, law)
}

/// First time V crosses `level`, detected by sign change of V - level between
/// consecutive samples (a start at or above the level counts as time zero).
pub fn first_crossing(times: &[f64], v: &[f64], level: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    if v[0] >= level {
        return Some(times[0]);
    }
    for k in 1..v.len() {
        if v[k - 1] < level && v[k] >= level {
            return Some(times[k]);
        }
    }
    None
}

/// Fit the log empirical survival of the collected times over their
/// [0.5, 0.95] quantile range. Returns the decay rate (minus the slope).
pub fn fit_survival_tail(times: &[f64]) -> Result<TailFit> {
    if times.len() < 20 {
        return Err(Error::AnalysisRefused(format!(
            "need at least 20 crossings for a tail fit, got {}",
            times.len()
        )));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let lo = (0.5 * n as f64).floor() as usize;
    let hi = ((0.95 * n as f64).floor() as usize).min(n - 1);
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    for (k, t) in sorted.iter().enumerate().take(hi + 1).skip(lo) {
        let survival = (n - (k + 1)) as f64 / n as f64;
        if survival > 0.0 {
            ts.push(*t);
            logs.push(survival.ln());
        }
    }
    let (slope, _, r2) = linear_fit(&ts, &logs)?;
    Ok(TailFit {
        rate: -slope,
        r2,
        n_events: n,
    })
}

/// Hitting-time tail over full trajectories: first passage of V to `level`
/// per replica, then a survival fit.
pub fn hitting_time_tail(replicas: &[Trajectory], level: f64) -> Result<TailFit> {
    let mut crossings = Vec::new();
    for traj in replicas {
        let times: Vec<f64> = (0..=traj.grid.steps).map(|k| traj.grid.time(k)).collect();
        if let Some(t) = first_crossing(&times, &traj.v, level) {
            crossings.push(t);
        }
    }
    fit_survival_tail(&crossings)
}

/// (slope, intercept, r^2) of an ordinary least-squares line.
fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() < 3 {
        return Err(Error::DegenerateFit("fewer than 3 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let syy: f64 = y.iter().map(|yi| (yi - my) * (yi - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(
            "zero variance in the abscissa (all times equal)".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok((slope, intercept, r2))
}

/// One time slice of a replica ensemble: (t, replicas' (v, z) states).
pub type EnsembleSlice = (f64, Vec<(f64, Vec<f64>)>);

/// Coordinate-max KS distance to the stationary marginals at each time slice,
/// plus an exponential fit of the distance-versus-time curve.
///
/// This is a proxy for total-variation convergence; TV itself is not
/// estimable from marginals.
pub fn ergodic_decay_proxy(
    slices: &[EnsembleSlice],
    law: &StationaryLaw,
) -> Result<(Vec<(f64, f64)>, TailFit)> {
    if slices.len() < 4 {
        return Err(Error::AnalysisRefused(format!(
            "need at least 4 time slices, got {}",
            slices.len()
        )));
    }
    let n = law.rates.len();
    let mut curve = Vec::with_capacity(slices.len());
    for (t, ensemble) in slices {
        if ensemble.len() < 100 {
            return Err(Error::AnalysisRefused(format!(
                "need at least 100 replicas per slice, got {} at t = {t}",
                ensemble.len()
            )));
        }
        let mut pooled = PooledSamples::new(n);
        for (v, z) in ensemble {
            pooled.push(*v, z);
        }
        let reports = pooled_marginal_ks(&pooled, law)?;
        let dist = reports.iter().map(|r| r.statistic).fold(0.0f64, f64::max);
        curve.push((*t, dist));
    }
    let ts: Vec<f64> = curve.iter().map(|(t, _)| *t).collect();
    let logs: Vec<f64> = curve.iter().map(|(_, d)| d.max(1e-300).ln()).collect();
    let (slope, _, r2) = linear_fit(&ts, &logs)?;
    Ok((
        curve,
        TailFit {
            rate: -slope,
            r2,
            n_events: slices.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_gap_process, SimGrid};
    use crate::model::ModelParams;
    use crate::stationary;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synthetic_trajectory(n: usize, g: f64, t_end: f64, l_slopes: &[f64]) -> Trajectory {
        // linear local times, V = g t - L1 t-slope, zero noise
        let params = ModelParams::with_defaults(n, g).unwrap();
        let grid = SimGrid::new(0.1, t_end).unwrap();
        let steps = grid.steps;
        let mut v = Vec::with_capacity(steps + 1);
        let mut x0 = Vec::with_capacity(steps + 1);
        let mut z = Vec::with_capacity((steps + 1) * n);
        let mut l = Vec::with_capacity((steps + 1) * n);
        for k in 0..=steps {
            let t = grid.time(k);
            v.push(g * t - l_slopes[0] * t);
            x0.push(0.0);
            for i in 0..n {
                z.push(1.0);
                l.push(l_slopes[i] * t);
            }
        }
        Trajectory {
            grid,
            seed: 0,
            params,
            v,
            x0,
            z,
            l,
            db: vec![0.0; steps * n],
        }
    }

    #[test]
    fn lln_slopes_recover_synthetic_lines() {
        let traj = synthetic_trajectory(2, 1.0, 200.0, &[1.0, 0.5]);
        let slopes = lln_slopes(&traj, 0.1).unwrap();
        let l1 = slopes["l1"];
        assert!((l1.value - 1.0).abs() < 1e-12);
        assert!(l1.stderr < 1e-12);
        let l2 = slopes["l2"];
        assert!((l2.value - 0.5).abs() < 1e-12);
        // x0 is identically zero here
        assert!(slopes["x0"].value.abs() < 1e-12);
    }

    #[test]
    fn lln_refuses_short_horizon() {
        let traj = synthetic_trajectory(2, 1.0, 50.0, &[1.0, 0.5]);
        assert!(matches!(
            lln_slopes(&traj, 0.1),
            Err(Error::AnalysisRefused(_))
        ));
    }

    #[test]
    fn lln_targets_examples() {
        let t2 = lln_targets(2, 1.0);
        assert_eq!(t2["x0"], 0.5);
        assert_eq!(t2["x2"], 0.5);
        assert_eq!(t2["l1"], 1.0);
        assert_eq!(t2["l2"], 1.0);

        let t4 = lln_targets(4, 1.0);
        assert_eq!(t4["l1"], 1.0);
        assert_eq!(t4["l2"], 1.5);
        assert_eq!(t4["l3"], 1.0);
        assert_eq!(t4["l4"], 0.5);

        let t3 = lln_targets(3, 1.0);
        assert!((t3["l2"] - 4.0 / 3.0).abs() < 1e-15);
        assert!((t3["l3"] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_self_test_and_degenerate_mass() {
        let params = ModelParams::with_defaults(1, 1.0).unwrap();
        let law = stationary::stationary_law(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut failures = 0;
        let trials = 50;
        let n = 10_000usize;
        for _ in 0..trials {
            let samples: Vec<f64> = (0..n)
                .map(|_| stationary::sample_with(&law, &mut rng).0)
                .collect();
            let rep = ks_distance(
                &samples,
                &TargetLaw::Normal {
                    mean: law.mean_v,
                    var: law.var_v,
                },
            )
            .unwrap();
            // alpha = 0.01 asymptotic critical value, with headroom
            if rep.statistic > 1.63 / (n as f64).sqrt() * 1.5 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures}/{trials} self-tests failed");

        let constant = vec![0.25; 500];
        let rep = ks_distance(
            &constant,
            &TargetLaw::Normal {
                mean: 0.25,
                var: 0.5,
            },
        )
        .unwrap();
        assert!(rep.statistic >= 0.5);

        assert!(ks_distance(&constant[..50], &TargetLaw::Exponential { rate: 1.0 }).is_err());
    }

    #[test]
    fn ks_detects_shifted_gaussian() {
        // analytic max CDF gap between N(mu+1, 1/2) and N(mu, 1/2):
        // attained at mu + 1/2, value 2*Phi(0.5/sqrt(0.5)) - 1 ~ 0.5205
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sd = 0.5f64.sqrt();
        let samples: Vec<f64> = (0..100_000)
            .map(|_| {
                let u1: f64 = 1.0 - rng.random::<f64>();
                let u2: f64 = rng.random();
                1.0 + sd * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
            })
            .collect();
        let rep = ks_distance(
            &samples,
            &TargetLaw::Normal {
                mean: 0.0,
                var: 0.5,
            },
        )
        .unwrap();
        assert!(rep.statistic >= 0.3, "statistic {}", rep.statistic);
        assert!((rep.statistic - 0.5205).abs() < 0.01);
    }

    #[test]
    fn ks_invariant_under_probability_integral_transform() {
        // applying the target CDF to both samples and target turns the problem
        // into uniforms on [0,1]; the statistic must be identical
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let target = TargetLaw::Exponential { rate: 1.5 };
        let samples: Vec<f64> = (0..5_000)
            .map(|_| -(1.0 - rng.random::<f64>()).ln() / 1.3)
            .collect();
        let d1 = ks_distance(&samples, &target).unwrap().statistic;
        let transformed: Vec<f64> = samples.iter().map(|x| target.cdf(*x)).collect();
        let mut sorted = transformed;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let mut d2: f64 = 0.0;
        for (i, u) in sorted.iter().enumerate() {
            d2 = d2.max(u - i as f64 / n).max((i + 1) as f64 / n - u);
        }
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn ordering_refusals_and_synthetic() {
        let samples: Vec<OrderingSample> = (0..20)
            .map(|k| OrderingSample {
                l1: 1.0 + k as f64,
                l2: 2.0 * (1.0 + k as f64),
            })
            .collect();
        assert_eq!(ordering_fraction(3, &samples).unwrap(), 1.0);
        assert!(ordering_fraction(2, &samples).is_err());
        assert!(ordering_fraction(3, &samples[..5]).is_err());
    }

    #[test]
    fn stationary_validation_pools_and_refuses() {
        let params = ModelParams::with_defaults(2, 1.0).unwrap();
        let grid = SimGrid::new(1e-3, 30.0).unwrap();
        let replicas: Vec<Trajectory> = (0..4)
            .map(|r| crate::dynamics::simulate_gap_process_replica(&params, grid, 42, r).unwrap())
            .collect();
        let law = stationary::stationary_law(&params);
        let reports = stationary_validation(&replicas, &law, 5.0, 0.5).unwrap();
        assert_eq!(reports.len(), 3);
        // 4 replicas x 50 samples = 200 pooled
        assert_eq!(reports[0].n_samples, 200);

        // aggressive thinning leaves too few samples
        assert!(matches!(
            stationary_validation(&replicas, &law, 5.0, 30.0),
            Err(Error::AnalysisRefused(_))
        ));
    }

    #[test]
    fn crossing_detection_and_survival_fit() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let ramp: Vec<f64> = times.iter().map(|t| 0.5 * t).collect();
        assert_eq!(first_crossing(&times, &ramp, 2.0), Some(4.0));
        assert_eq!(first_crossing(&times, &ramp, 100.0), None);
        // start above the level
        assert_eq!(first_crossing(&times, &ramp, -1.0), Some(0.0));

        // exponential sample: rate recovered, r2 high
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let times: Vec<f64> = (0..2_000)
            .map(|_| -(1.0 - rng.random::<f64>()).ln() / 0.7)
            .collect();
        let fit = fit_survival_tail(&times).unwrap();
        assert!(fit.rate > 0.0);
        assert!((fit.rate - 0.7).abs() < 0.1, "rate {}", fit.rate);
        assert!(fit.r2 > 0.95);

        // degenerate: identical times
        let same = vec![2.5; 50];
        assert!(matches!(
            fit_survival_tail(&same),
            Err(Error::DegenerateFit(_))
        ));

        assert!(fit_survival_tail(&times[..10]).is_err());
    }

    #[test]
    fn hitting_time_on_synthetic_ramp_is_degenerate() {
        // V = g t exactly: all hitting times equal, flagged as degenerate
        let replicas: Vec<Trajectory> = (0..30)
            .map(|_| synthetic_trajectory(2, 1.0, 200.0, &[0.0, 0.0]))
            .collect();
        assert!(matches!(
            hitting_time_tail(&replicas, 2.0),
            Err(Error::DegenerateFit(_))
        ));
        // level never reached: refusal for lack of crossings
        assert!(matches!(
            hitting_time_tail(&replicas, 1e6),
            Err(Error::AnalysisRefused(_))
        ));
    }

    #[test]
    fn decay_proxy_flat_at_stationarity_and_refusals() {
        let params = ModelParams::with_defaults(2, 1.0).unwrap();
        let law = stationary::stationary_law(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut slices = Vec::new();
        for s in 0..5 {
            let ensemble: Vec<(f64, Vec<f64>)> = (0..400)
                .map(|_| stationary::sample_with(&law, &mut rng))
                .collect();
            slices.push((s as f64 + 1.0, ensemble));
        }
        let (curve, _fit) = ergodic_decay_proxy(&slices, &law).unwrap();
        // distances sit at the sampling noise floor ~ 1/sqrt(400)
        for (_, d) in &curve {
            assert!(*d < 3.0 / (400.0f64).sqrt(), "distance {d}");
        }

        assert!(ergodic_decay_proxy(&slices[..1], &law).is_err());
        let tiny = vec![(1.0, slices[0].1[..50].to_vec()); 4];
        assert!(ergodic_decay_proxy(&tiny, &law).is_err());
    }

    #[test]
    fn estimators_are_pure() {
        let traj = simulate_gap_process(
            &ModelParams::with_defaults(2, 1.0).unwrap(),
            SimGrid::new(1e-3, 120.0).unwrap(),
            77,
        )
        .unwrap();
        let a = lln_slopes(&traj, 0.1).unwrap();
        let b = lln_slopes(&traj, 0.1).unwrap();
        assert_eq!(a, b);
    }
}
