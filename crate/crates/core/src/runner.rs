//! Replica orchestration and machine-readable reports.
//!
//! Replicas are farmed over a rayon pool whose size is a flag, not part of
//! the configuration; results are folded in replica-index order, so reports
//! are byte-identical at any parallelism level. Long-horizon ensembles are
//! collected through streaming observers instead of full trajectories.

use crate::analysis::{
    self, fit_survival_tail, lln_targets, ordering_fraction, pooled_marginal_ks, BlockSeries,
    OrderingSample, PooledSamples,
};
use crate::config::{InitCondition, RunConfig};
use crate::dynamics::{
    csv_header, csv_row, simulate_gap_observed, simulate_unranked_replica, GapObserver, SimGrid,
    SimOptions,
};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng;
use crate::skorokhod::{solve_skorokhod, DiscretePath, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::stationary::{self, StationaryLaw};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

// Pass thresholds for the validation ops.
pub const LLN_TOL_X: f64 = 0.05;
pub const LLN_TOL_L1: f64 = 0.05;
pub const LLN_TOL_L_UPPER: f64 = 0.1;
pub const STATIONARY_KS_TOL: f64 = 0.05;
pub const ORDERING_MIN_FRACTION: f64 = 0.95;
pub const HITTING_MIN_R2: f64 = 0.9;
pub const SKOROKHOD_ORACLE_TOL: f64 = 1e-10;

/// The output kinds a run can be asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    TrajectoryCsv,
    Lln,
    Stationary,
    Ordering,
    Hitting,
    Decay,
}

impl OutputKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "trajectory_csv" => OutputKind::TrajectoryCsv,
            "lln" => OutputKind::Lln,
            "stationary" => OutputKind::Stationary,
            "ordering" => OutputKind::Ordering,
            "hitting" => OutputKind::Hitting,
            "decay" => OutputKind::Decay,
            other => return Err(Error::Config(format!("unknown output kind \"{other}\""))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutputKind::TrajectoryCsv => "trajectory_csv",
            OutputKind::Lln => "lln",
            OutputKind::Stationary => "stationary",
            OutputKind::Ordering => "ordering",
            OutputKind::Hitting => "hitting",
            OutputKind::Decay => "decay",
        }
    }
}

/// One estimate in a report.
#[derive(Debug, Clone, Serialize)]
pub struct NamedEstimate {
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

/// One target in a report.
#[derive(Debug, Clone, Serialize)]
pub struct NamedTarget {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

/// The report written as report.json, one per invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub op: String,
    pub config_digest: String,
    pub params_digest: String,
    pub seed_set: Vec<u64>,
    pub estimates: Vec<NamedEstimate>,
    pub targets: Vec<NamedTarget>,
    pub pass: bool,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn params_digest(config: &RunConfig) -> String {
    let canonical = format!(
        "n={};g={:.17e};dt={:.17e};t_end={:.17e};replicas={};seed={};init={:?};burn_in={:.17e};thin={:.17e}",
        config.n,
        config.g,
        config.grid.dt,
        config.grid.t_end,
        config.replicas,
        config.base_seed,
        config.init,
        config.burn_in,
        config.thin,
    );
    sha256_hex(canonical.as_bytes())
}

/// Run replica jobs on a dedicated pool, folding results in index order.
pub fn run_replicas<T, F>(jobs: usize, replicas: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("failed to build thread pool: {e}")))?;
    let results: Vec<Result<T>> =
        pool.install(|| (0..replicas as u64).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Per-replica starting point under the configured initial condition.
pub fn replica_params(
    config: &RunConfig,
    law: &StationaryLaw,
    replica: u64,
) -> Result<ModelParams> {
    match &config.init {
        InitCondition::Stationary => {
            let mut stream = rng::init_stream(config.base_seed, replica);
            let (v0, z0) = stationary::sample_with(law, &mut stream);
            ModelParams::new(config.n, config.g, v0, z0)
        }
        InitCondition::Point { v, z } => ModelParams::new(config.n, config.g, *v, z.clone()),
        InitCondition::Unranked { .. } => Err(Error::Config(
            "this output requires a ranked initial condition (stationary or point)".into(),
        )),
    }
}

// ---- streaming observers ----

/// Pools (v, z) at times burn_in + k * thin, matching
/// [`analysis::pool_from_trajectory`] sample for sample.
pub struct ThinSampler {
    indices: Vec<usize>,
    next: usize,
    pub pooled: PooledSamples,
}

impl ThinSampler {
    pub fn new(n: usize, grid: SimGrid, burn_in: f64, thin: f64) -> Self {
        let mut indices = Vec::new();
        let mut m = 1usize;
        loop {
            let t = burn_in + m as f64 * thin;
            if t > grid.t_end + 1e-9 {
                break;
            }
            indices.push(((t / grid.dt).round() as usize).min(grid.steps));
            m += 1;
        }
        ThinSampler {
            indices,
            next: 0,
            pooled: PooledSamples::new(n),
        }
    }
}

impl GapObserver for ThinSampler {
    fn on_step(&mut self, step: usize, _t: f64, v: f64, _x0: f64, z: &[f64], _l: &[f64]) {
        while self.next < self.indices.len() && self.indices[self.next] == step {
            self.pooled.push(v, z);
            self.next += 1;
        }
    }
}

/// Collects every slope observable at the block boundary indices.
pub struct LlnCollector {
    boundaries: Vec<usize>,
    next: usize,
    times: Vec<f64>,
    /// values[obs][boundary]; observables ordered x0..xN then l1..lN
    values: Vec<Vec<f64>>,
    n: usize,
}

impl LlnCollector {
    pub fn new(n: usize, grid: SimGrid, burn_in: f64) -> Self {
        let steps = grid.steps;
        let k_burn = ((burn_in / grid.dt).round() as usize).min(steps - 1);
        let boundaries = analysis::block_boundaries(steps, k_burn);
        LlnCollector {
            next: 0,
            times: boundaries.iter().map(|&k| grid.time(k)).collect(),
            values: (0..2 * n + 1)
                .map(|_| Vec::with_capacity(boundaries.len()))
                .collect(),
            boundaries,
            n,
        }
    }

    /// Block series per observable key, as [`analysis::lln_block_series`] builds.
    pub fn into_series(self) -> BTreeMap<String, BlockSeries> {
        let mut out = BTreeMap::new();
        for i in 0..=self.n {
            out.insert(
                format!("x{i}"),
                BlockSeries {
                    times: self.times.clone(),
                    values: self.values[i].clone(),
                },
            );
        }
        for i in 1..=self.n {
            out.insert(
                format!("l{i}"),
                BlockSeries {
                    times: self.times.clone(),
                    values: self.values[self.n + i].clone(),
                },
            );
        }
        out
    }
}

impl GapObserver for LlnCollector {
    fn on_step(&mut self, step: usize, _t: f64, _v: f64, x0: f64, z: &[f64], l: &[f64]) {
        while self.next < self.boundaries.len() && self.boundaries[self.next] == step {
            let mut pos = x0;
            self.values[0].push(pos);
            for (i, zi) in z.iter().enumerate() {
                pos += zi;
                self.values[i + 1].push(pos);
            }
            for (i, li) in l.iter().enumerate() {
                self.values[self.n + 1 + i].push(*li);
            }
            self.next += 1;
        }
    }
}

/// Snapshots (v, z) at fixed slice times.
pub struct SliceSampler {
    indices: Vec<usize>,
    next: usize,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl SliceSampler {
    pub fn new(grid: SimGrid, slice_times: &[f64]) -> Self {
        SliceSampler {
            indices: slice_times
                .iter()
                .map(|t| ((t / grid.dt).round() as usize).min(grid.steps))
                .collect(),
            next: 0,
            snapshots: Vec::with_capacity(slice_times.len()),
        }
    }
}

impl GapObserver for SliceSampler {
    fn on_step(&mut self, step: usize, _t: f64, v: f64, _x0: f64, z: &[f64], _l: &[f64]) {
        while self.next < self.indices.len() && self.indices[self.next] == step {
            self.snapshots.push((v, z.to_vec()));
            self.next += 1;
        }
    }
}

/// Detects the first upcrossing of a velocity level; optionally stops the run
/// at the next window boundary after the hit.
pub struct CrossingObserver {
    level: f64,
    prev: Option<f64>,
    pub hit: Option<f64>,
    stop_on_hit: bool,
}

impl CrossingObserver {
    pub fn new(level: f64, stop_on_hit: bool) -> Self {
        CrossingObserver {
            level,
            prev: None,
            hit: None,
            stop_on_hit,
        }
    }
}

impl GapObserver for CrossingObserver {
    fn on_step(&mut self, _step: usize, t: f64, v: f64, _x0: f64, _z: &[f64], _l: &[f64]) {
        if self.hit.is_none() {
            match self.prev {
                None if v >= self.level => self.hit = Some(t),
                Some(p) if p < self.level && v >= self.level => self.hit = Some(t),
                _ => {}
            }
        }
        self.prev = Some(v);
    }

    fn done(&self) -> bool {
        self.stop_on_hit && self.hit.is_some()
    }
}

/// Keeps the final (v, z, l) row.
#[derive(Default)]
pub struct LastState {
    pub v: f64,
    pub z: Vec<f64>,
    pub l: Vec<f64>,
}

impl GapObserver for LastState {
    fn on_step(&mut self, _step: usize, _t: f64, v: f64, _x0: f64, z: &[f64], l: &[f64]) {
        self.v = v;
        self.z.clear();
        self.z.extend_from_slice(z);
        self.l.clear();
        self.l.extend_from_slice(l);
    }
}

/// Streams trajectory rows to CSV with a row stride.
pub struct CsvStreamObserver<W: std::io::Write> {
    out: W,
    stride: usize,
    steps: usize,
    pub error: Option<std::io::Error>,
}

impl<W: std::io::Write> CsvStreamObserver<W> {
    pub fn new(mut out: W, n: usize, stride: usize, steps: usize) -> Result<Self> {
        writeln!(out, "{}", csv_header(n))?;
        Ok(CsvStreamObserver {
            out,
            stride: stride.max(1),
            steps,
            error: None,
        })
    }
}

impl<W: std::io::Write> GapObserver for CsvStreamObserver<W> {
    fn on_step(&mut self, step: usize, t: f64, v: f64, x0: f64, z: &[f64], l: &[f64]) {
        if self.error.is_some() || (!step.is_multiple_of(self.stride) && step != self.steps) {
            return;
        }
        if let Err(e) = writeln!(self.out, "{}", csv_row(t, v, x0, z, l)) {
            self.error = Some(e);
        }
    }
}

// ---- the run entry point ----

/// Execute the requested outputs and write `report.json` (plus any CSV data)
/// into `out_dir`. Returns the report; `pass` is false when any requested
/// validation misses its threshold.
pub fn run(
    config: &RunConfig,
    config_text: &str,
    kinds: &[OutputKind],
    out_dir: &Path,
    jobs: usize,
) -> Result<RunReport> {
    fs::create_dir_all(out_dir)?;
    let mut estimates = Vec::new();
    let mut targets = Vec::new();
    let mut pass = true;

    for kind in kinds {
        let (mut est, mut tgt, ok) = match kind {
            OutputKind::TrajectoryCsv => op_trajectory_csv(config, out_dir, jobs)?,
            OutputKind::Lln => op_lln(config, jobs)?,
            OutputKind::Stationary => op_stationary(config, jobs)?,
            OutputKind::Ordering => op_ordering(config, jobs)?,
            OutputKind::Hitting => op_hitting(config, jobs)?,
            OutputKind::Decay => op_decay(config, out_dir, jobs)?,
        };
        estimates.append(&mut est);
        targets.append(&mut tgt);
        pass &= ok;
    }

    let report = RunReport {
        op: kinds
            .iter()
            .map(|k| k.name())
            .collect::<Vec<_>>()
            .join("+"),
        config_digest: sha256_hex(config_text.as_bytes()),
        params_digest: params_digest(config),
        seed_set: (0..config.replicas as u64)
            .map(|r| rng::stream_id(r, 0))
            .collect(),
        estimates,
        targets,
        pass,
    };
    write_report(&report, out_dir)?;
    Ok(report)
}

pub fn write_report(report: &RunReport, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

type OpOutput = (Vec<NamedEstimate>, Vec<NamedTarget>, bool);

fn op_trajectory_csv(config: &RunConfig, out_dir: &Path, jobs: usize) -> Result<OpOutput> {
    let grid = config.sim_grid()?;
    let stride = config.outputs.csv_stride;

    if let InitCondition::Unranked { x } = &config.init {
        // the unranked simulator exports its own positions/collision columns
        let x = x.clone();
        let paths = run_replicas(jobs, config.replicas, |replica| {
            let params = ModelParams::new(config.n, config.g, 0.0, vec![0.0; config.n])?;
            let traj = simulate_unranked_replica(&params, grid, config.base_seed, replica, &x)?;
            let path = out_dir.join(format!("trajectory_r{replica}.csv"));
            let mut file = std::io::BufWriter::new(fs::File::create(&path)?);
            traj.write_csv(&mut file, stride)?;
            Ok(path)
        })?;
        let estimates = vec![NamedEstimate {
            name: "trajectories_written".into(),
            value: paths.len() as f64,
            stderr: None,
        }];
        return Ok((estimates, Vec::new(), true));
    }

    let law = stationary_law_for(config);
    let written = run_replicas(jobs, config.replicas, |replica| {
        let params = replica_params(config, &law, replica)?;
        let path = out_dir.join(format!("trajectory_r{replica}.csv"));
        let file = std::io::BufWriter::new(fs::File::create(&path)?);
        let mut obs = CsvStreamObserver::new(file, config.n, stride, grid.steps)?;
        simulate_gap_observed(
            &params,
            grid,
            config.base_seed,
            replica,
            SimOptions::default(),
            &mut obs,
        )?;
        if let Some(e) = obs.error {
            return Err(e.into());
        }
        Ok(())
    })?;
    let estimates = vec![NamedEstimate {
        name: "trajectories_written".into(),
        value: written.len() as f64,
        stderr: None,
    }];
    Ok((estimates, Vec::new(), true))
}

fn stationary_law_for(config: &RunConfig) -> StationaryLaw {
    // only n and g matter for the law
    let params = ModelParams::new(config.n, config.g, 0.0, vec![0.0; config.n])
        .expect("validated config produces valid params");
    stationary::stationary_law(&params)
}

fn op_lln(config: &RunConfig, jobs: usize) -> Result<OpOutput> {
    let grid = config.sim_grid()?;
    let law = stationary_law_for(config);
    let per_replica = run_replicas(jobs, config.replicas, |replica| {
        let params = replica_params(config, &law, replica)?;
        let mut collector = LlnCollector::new(config.n, grid, config.burn_in);
        simulate_gap_observed(
            &params,
            grid,
            config.base_seed,
            replica,
            SimOptions::default(),
            &mut collector,
        )?;
        let slopes: BTreeMap<String, f64> = collector
            .into_series()
            .into_iter()
            .map(|(k, s)| (k, s.slope().value))
            .collect();
        Ok(slopes)
    })?;

    let targets_map = lln_targets(config.n, config.g);
    let mut estimates = Vec::new();
    let mut targets = Vec::new();
    let mut pass = true;
    for key in analysis::slope_keys(config.n) {
        let values: Vec<f64> = per_replica.iter().map(|m| m[&key]).collect();
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
            Some((var / k).sqrt())
        } else {
            None
        };
        let target = targets_map[&key];
        let tolerance = if key.starts_with('x') {
            LLN_TOL_X
        } else if key == "l1" {
            LLN_TOL_L1
        } else {
            LLN_TOL_L_UPPER
        };
        pass &= (mean - target).abs() <= tolerance;
        estimates.push(NamedEstimate {
            name: key.clone(),
            value: mean,
            stderr,
        });
        targets.push(NamedTarget {
            name: key,
            value: target,
            tolerance,
        });
    }
    Ok((estimates, targets, pass))
}

fn op_stationary(config: &RunConfig, jobs: usize) -> Result<OpOutput> {
    let grid = config.sim_grid()?;
    let law = stationary_law_for(config);
    let pooled_parts = run_replicas(jobs, config.replicas, |replica| {
        let params = replica_params(config, &law, replica)?;
        let mut sampler = ThinSampler::new(config.n, grid, config.burn_in, config.thin);
        simulate_gap_observed(
            &params,
            grid,
            config.base_seed,
            replica,
            SimOptions::default(),
            &mut sampler,
        )?;
        Ok(sampler.pooled)
    })?;
    let mut pooled = PooledSamples::new(config.n);
    for part in &pooled_parts {
        pooled.merge(part);
    }
    let reports = pooled_marginal_ks(&pooled, &law)?;

    let mut estimates = Vec::new();
    let mut targets = Vec::new();
    let mut pass = true;
    let coord_names: Vec<String> = std::iter::once("v".to_string())
        .chain((1..=config.n).map(|i| format!("z{i}")))
        .collect();
    for (name, rep) in coord_names.iter().zip(&reports) {
        pass &= rep.statistic <= STATIONARY_KS_TOL;
        estimates.push(NamedEstimate {
            name: format!("ks_{name}"),
            value: rep.statistic,
            stderr: None,
        });
        targets.push(NamedTarget {
            name: format!("ks_{name} vs {}", rep.target),
            value: 0.0,
            tolerance: STATIONARY_KS_TOL,
        });
    }
    Ok((estimates, targets, pass))
}

fn op_ordering(config: &RunConfig, jobs: usize) -> Result<OpOutput> {
    let grid = config.sim_grid()?;
    let law = stationary_law_for(config);
    let samples = run_replicas(jobs, config.replicas, |replica| {
        let params = replica_params(config, &law, replica)?;
        let mut last = LastState::default();
        simulate_gap_observed(
            &params,
            grid,
            config.base_seed,
            replica,
            SimOptions::default(),
            &mut last,
        )?;
        Ok(OrderingSample {
            l1: last.l[0],
            l2: if config.n >= 2 { last.l[1] } else { 0.0 },
        })
    })?;
    let fraction = ordering_fraction(config.n, &samples)?;
    let pass = fraction >= ORDERING_MIN_FRACTION;
    Ok((
        vec![NamedEstimate {
            name: "fraction_l2_exceeds_l1".into(),
            value: fraction,
            stderr: None,
        }],
        vec![NamedTarget {
            name: "fraction_l2_exceeds_l1".into(),
            value: 1.0,
            tolerance: 1.0 - ORDERING_MIN_FRACTION,
        }],
        pass,
    ))
}

fn op_hitting(config: &RunConfig, jobs: usize) -> Result<OpOutput> {
    let grid = config.sim_grid()?;
    let law = stationary_law_for(config);
    let level = config.outputs.hitting_level.unwrap_or(4.0 * config.g);
    let hits = run_replicas(jobs, config.replicas, |replica| {
        let params = replica_params(config, &law, replica)?;
        let mut obs = CrossingObserver::new(level, true);
        simulate_gap_observed(
            &params,
            grid,
            config.base_seed,
            replica,
            SimOptions::default(),
            &mut obs,
        )?;
        Ok(obs.hit)
    })?;
    let times: Vec<f64> = hits.into_iter().flatten().collect();
    let fit = fit_survival_tail(&times)?;
    let pass = fit.rate > 0.0 && fit.r2 >= HITTING_MIN_R2;
    Ok((
        vec![
            NamedEstimate {
                name: "tail_rate".into(),
                value: fit.rate,
                stderr: None,
            },
            NamedEstimate {
                name: "fit_r2".into(),
                value: fit.r2,
                stderr: None,
            },
            NamedEstimate {
                name: "crossings".into(),
                value: fit.n_events as f64,
                stderr: None,
            },
        ],
        vec![
            NamedTarget {
                name: "tail_rate_positive".into(),
                value: 0.0,
                tolerance: 0.0,
            },
            NamedTarget {
                name: "fit_r2_min".into(),
                value: HITTING_MIN_R2,
                tolerance: 0.0,
            },
        ],
        pass,
    ))
}

/// Noise allowance for slice-to-slice KS comparisons, an alpha = 0.05
/// two-sample-style band.
pub fn ks_noise_floor(replicas: usize) -> f64 {
    1.36 / (replicas as f64).sqrt()
}

fn op_decay(config: &RunConfig, out_dir: &Path, jobs: usize) -> Result<OpOutput> {
    if config.outputs.decay_slices.is_empty() {
        return Err(Error::Config(
            "outputs.decay_slices is required for the decay output".into(),
        ));
    }
    let grid = config.sim_grid()?;
    let law = stationary_law_for(config);
    let slice_times = config.outputs.decay_slices.clone();
    let per_replica = run_replicas(jobs, config.replicas, |replica| {
        let params = replica_params(config, &law, replica)?;
        let mut sampler = SliceSampler::new(grid, &slice_times);
        simulate_gap_observed(
            &params,
            grid,
            config.base_seed,
            replica,
            SimOptions::default(),
            &mut sampler,
        )?;
        Ok(sampler.snapshots)
    })?;

    let mut slices: Vec<analysis::EnsembleSlice> = slice_times
        .iter()
        .map(|t| (*t, Vec::with_capacity(config.replicas)))
        .collect();
    for snapshots in &per_replica {
        for (slot, snap) in slices.iter_mut().zip(snapshots) {
            slot.1.push(snap.clone());
        }
    }
    let (curve, fit) = analysis::ergodic_decay_proxy(&slices, &law)?;

    let mut csv = String::from("t,distance\n");
    for (t, d) in &curve {
        csv.push_str(&format!("{t:.16e},{d:.16e}\n"));
    }
    fs::write(out_dir.join("decay.csv"), csv)?;

    let noise = ks_noise_floor(config.replicas);
    let mut decreasing = true;
    for w in curve.windows(2) {
        if w[1].1 > w[0].1 + noise {
            decreasing = false;
        }
    }
    let net_drop = curve.first().unwrap().1 - curve.last().unwrap().1;
    let pass = decreasing && net_drop > 2.0 * noise && fit.rate > 0.0;

    let mut estimates = vec![
        NamedEstimate {
            name: "decay_rate".into(),
            value: fit.rate,
            stderr: None,
        },
        NamedEstimate {
            name: "net_distance_drop".into(),
            value: net_drop,
            stderr: None,
        },
    ];
    for (t, d) in &curve {
        estimates.push(NamedEstimate {
            name: format!("distance_t{t}"),
            value: *d,
            stderr: None,
        });
    }
    Ok((
        estimates,
        vec![NamedTarget {
            name: "net_drop_beyond_noise".into(),
            value: 2.0 * noise,
            tolerance: 0.0,
        }],
        pass,
    ))
}

/// Report emitted by the stationary-check subcommand: residuals of the
/// stationarity identities at random probe points.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryCheckReport {
    pub identity_residual: f64,
    pub interior_residual: f64,
    pub boundary_residuals: Vec<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub g: f64,
}

/// Evaluate the stationarity identities at random probe points (interior
/// plus every face) and write stationary_check.json.
pub fn run_stationary_check(
    n: usize,
    g: f64,
    probes: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<StationaryCheckReport> {
    let params = ModelParams::new(n, g, 0.0, vec![0.0; n])?;
    let law = stationary::stationary_law(&params);
    let mut stream = rng::stream(seed, 0, 1);
    let mut points = Vec::new();
    let interior_count = probes.max(n + 1);
    for _ in 0..interior_count {
        let v = law.mean_v + 4.0 * (stream.random::<f64>() - 0.5);
        let z: Vec<f64> = (0..n)
            .map(|_| 0.01 + 3.0 * stream.random::<f64>())
            .collect();
        points.push((v, z));
    }
    for face in 0..n {
        for _ in 0..interior_count.div_ceil(n) {
            let v = law.mean_v + 4.0 * (stream.random::<f64>() - 0.5);
            let mut z: Vec<f64> = (0..n)
                .map(|_| 0.01 + 3.0 * stream.random::<f64>())
                .collect();
            z[face] = 0.0;
            points.push((v, z));
        }
    }
    let residual = stationary::verify_bar_identities(&params, &points)?;
    let report = StationaryCheckReport {
        identity_residual: residual.identity,
        interior_residual: residual.interior,
        boundary_residuals: residual.boundary,
        n,
        g,
    };
    fs::create_dir_all(out_dir)?;
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    text.push('\n');
    fs::write(out_dir.join("stationary_check.json"), text)?;
    Ok(report)
}

/// Report of the solver-versus-brute-force comparison behind skorokhod-test.
#[derive(Debug, Clone, Serialize)]
pub struct SkorokhodTestReport {
    pub n: usize,
    pub trials: usize,
    pub steps: usize,
    pub max_deviation: f64,
    pub max_complementarity: f64,
    pub pass: bool,
}

/// Compare the production solver with a brute-force stagnation iterate on
/// random paths and write skorokhod_test.json.
pub fn run_skorokhod_test(
    n: usize,
    trials: usize,
    steps: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<SkorokhodTestReport> {
    let rm = crate::model::build_reflection_matrix(n)?;
    let mut stream = rng::stream(seed, 0, 2);
    let mut max_dev: f64 = 0.0;
    let mut max_comp: f64 = 0.0;
    for _ in 0..trials {
        let dt = 0.01;
        let times: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
        let mut values = vec![0.0; steps * n];
        for i in 0..n {
            values[i] = stream.random::<f64>();
        }
        for k in 1..steps {
            for i in 0..n {
                let jump: f64 = stream.random::<f64>() - 0.5;
                values[k * n + i] = values[(k - 1) * n + i] + 2.0 * jump * dt.sqrt();
            }
        }
        let x = DiscretePath::new(times, values, n)?;
        let sol = solve_skorokhod(&x, &rm, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let oracle = brute_force_regulator(&x, &rm);
        for k in 0..x.len() {
            for i in 0..n {
                max_dev = max_dev.max((sol.eta.value(k, i) - oracle[k * n + i]).abs());
            }
        }
        for c in sol.complementarity_residuals() {
            max_comp = max_comp.max(c.abs());
        }
    }
    let report = SkorokhodTestReport {
        n,
        trials,
        steps,
        max_deviation: max_dev,
        max_complementarity: max_comp,
        pass: max_dev <= SKOROKHOD_ORACLE_TOL,
    };
    fs::create_dir_all(out_dir)?;
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    text.push('\n');
    fs::write(out_dir.join("skorokhod_test.json"), text)?;
    Ok(report)
}

/// Naive reference: iterate the sup-recursion with full recomputation until
/// the iterates stagnate in floating point.
fn brute_force_regulator(x: &DiscretePath, rm: &crate::model::ReflectionMatrix) -> Vec<f64> {
    let n = x.dim();
    let steps = x.len();
    let mut eta = vec![0.0; steps * n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; steps * n];
        for k in 0..steps {
            for i in 0..n {
                let mut best: f64 = 0.0;
                for j in 0..=k {
                    let mut drive = -x.value(j, i);
                    for c in 0..n {
                        drive += rm.u.get(i, c) * eta[j * n + c];
                    }
                    if drive > best {
                        best = drive;
                    }
                }
                next[k * n + i] = best;
            }
        }
        if next == eta {
            break;
        }
        eta = next;
    }
    eta
}
