//! Simulation of the coupled velocity/gap/local-time process and of the
//! unranked (n+1)-particle system it is derived from.
//!
//! The gap process is advanced window by window. Within a window the Brownian
//! increments are drawn once; the velocity profile is then found by Picard
//! iteration: propose V, build the Skorokhod input z_start - e1 * int V + A B,
//! reflect it, read the bottom local time off the regulator, update
//! V(t) = V_start + g (t - t_start) - dL1(t), repeat until the profile is
//! stable in sup norm. Local times are regulator increments, so discrete
//! complementarity holds at grid resolution by construction.
//!
//! A window that fails to contract is retried once as two half windows before
//! giving up.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng;
use crate::skorokhod::{forward_sweep, UBands};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Default Picard window length in time units.
pub const DEFAULT_WINDOW: f64 = 0.1;
/// Default sup-norm tolerance on successive V iterates per window.
pub const DEFAULT_PICARD_TOL: f64 = 1e-8;
/// Default iteration cap per window.
pub const DEFAULT_MAX_PICARD: usize = 200;

/// Uniform time grid: `steps` intervals of length `dt` covering [0, t_end].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl SimGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::invalid("dt must be positive and finite"));
        }
        if t_end < dt {
            return Err(Error::invalid("t_end must be at least dt"));
        }
        let steps = (t_end / dt).round() as usize;
        if steps == 0 || (steps as f64 * dt - t_end).abs() > 1e-9 {
            return Err(Error::invalid(
                "t_end must be an integer multiple of dt (to within 1e-9)",
            ));
        }
        Ok(SimGrid { dt, t_end, steps })
    }

    #[inline]
    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}

/// Tuning knobs of the windowed Picard scheme.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub window: f64,
    pub picard_tol: f64,
    pub max_picard: usize,
    /// Draw this many sub-increments per step and sum them. A run at step dt
    /// with coarsen = 2 consumes the stream exactly like a run at dt/2, so the
    /// two ride the same Brownian path (used for grid-refinement comparisons).
    pub coarsen: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            window: DEFAULT_WINDOW,
            picard_tol: DEFAULT_PICARD_TOL,
            max_picard: DEFAULT_MAX_PICARD,
            coarsen: 1,
        }
    }
}

/// Receives each committed step of a gap-process simulation.
///
/// `on_step` fires once for the initial state (step 0) and once per grid
/// step; `on_increments` delivers the Brownian increments that fed step
/// `step` (not called for step 0). An observer returning `true` from `done`
/// stops the run early at the next window boundary.
pub trait GapObserver {
    fn on_step(&mut self, step: usize, t: f64, v: f64, x0: f64, z: &[f64], l: &[f64]);
    fn on_increments(&mut self, _step: usize, _db: &[f64]) {}
    fn done(&self) -> bool {
        false
    }
}

/// Feed two observers from one run.
impl<A: GapObserver, B: GapObserver> GapObserver for (A, B) {
    fn on_step(&mut self, step: usize, t: f64, v: f64, x0: f64, z: &[f64], l: &[f64]) {
        self.0.on_step(step, t, v, x0, z, l);
        self.1.on_step(step, t, v, x0, z, l);
    }

    fn on_increments(&mut self, step: usize, db: &[f64]) {
        self.0.on_increments(step, db);
        self.1.on_increments(step, db);
    }

    fn done(&self) -> bool {
        self.0.done() && self.1.done()
    }
}

/// Full history of one gap-process run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: SimGrid,
    pub seed: u64,
    pub params: ModelParams,
    /// Velocity per grid point (steps + 1 values).
    pub v: Vec<f64>,
    /// Inert particle position, integrated from V with x0(0) = 0.
    pub x0: Vec<f64>,
    /// Gaps, row-major (steps + 1) x n.
    pub z: Vec<f64>,
    /// Local times, row-major (steps + 1) x n.
    pub l: Vec<f64>,
    /// Brownian increments, row-major steps x n.
    pub db: Vec<f64>,
}

impl Trajectory {
    #[inline]
    pub fn z_at(&self, step: usize, comp: usize) -> f64 {
        self.z[step * self.params.n + comp]
    }

    #[inline]
    pub fn l_at(&self, step: usize, comp: usize) -> f64 {
        self.l[step * self.params.n + comp]
    }

    pub fn z_row(&self, step: usize) -> &[f64] {
        &self.z[step * self.params.n..(step + 1) * self.params.n]
    }

    pub fn l_row(&self, step: usize) -> &[f64] {
        &self.l[step * self.params.n..(step + 1) * self.params.n]
    }

    /// Ranked position X_(i), i = 0..=n, reconstructed as x0 + partial gap sum.
    pub fn ranked_position(&self, step: usize, i: usize) -> f64 {
        let mut x = self.x0[step];
        for j in 0..i {
            x += self.z_at(step, j);
        }
        x
    }
}

struct FullRecorder {
    n: usize,
    v: Vec<f64>,
    x0: Vec<f64>,
    z: Vec<f64>,
    l: Vec<f64>,
    db: Vec<f64>,
}

impl FullRecorder {
    fn new(n: usize, steps: usize) -> Self {
        FullRecorder {
            n,
            v: Vec::with_capacity(steps + 1),
            x0: Vec::with_capacity(steps + 1),
            z: Vec::with_capacity((steps + 1) * n),
            l: Vec::with_capacity((steps + 1) * n),
            db: Vec::with_capacity(steps * n),
        }
    }
}

impl GapObserver for FullRecorder {
    fn on_step(&mut self, _step: usize, _t: f64, v: f64, x0: f64, z: &[f64], l: &[f64]) {
        debug_assert_eq!(z.len(), self.n);
        self.v.push(v);
        self.x0.push(x0);
        self.z.extend_from_slice(z);
        self.l.extend_from_slice(l);
    }

    fn on_increments(&mut self, _step: usize, db: &[f64]) {
        self.db.extend_from_slice(db);
    }
}

/// Simulate the gap process on `grid` with full recording (replica 0).
pub fn simulate_gap_process(params: &ModelParams, grid: SimGrid, seed: u64) -> Result<Trajectory> {
    simulate_gap_process_replica(params, grid, seed, 0)
}

/// Replica variant: the Brownian drivers come from streams keyed by
/// (seed, replica, particle).
pub fn simulate_gap_process_replica(
    params: &ModelParams,
    grid: SimGrid,
    seed: u64,
    replica: u64,
) -> Result<Trajectory> {
    let mut rec = FullRecorder::new(params.n, grid.steps);
    simulate_gap_observed(params, grid, seed, replica, SimOptions::default(), &mut rec)?;
    Ok(Trajectory {
        grid,
        seed,
        params: params.clone(),
        v: rec.v,
        x0: rec.x0,
        z: rec.z,
        l: rec.l,
        db: rec.db,
    })
}

/// Streaming form: feed each committed step to `observer` without storing
/// the trajectory. This is what the replica runner uses on long horizons.
pub fn simulate_gap_observed<O: GapObserver>(
    params: &ModelParams,
    grid: SimGrid,
    seed: u64,
    replica: u64,
    opts: SimOptions,
    observer: &mut O,
) -> Result<()> {
    let mut engine = GapEngine::new(params, grid, seed, replica, opts)?;
    engine.run(observer)
}

struct GapEngine<'a> {
    params: &'a ModelParams,
    grid: SimGrid,
    opts: SimOptions,
    bands: UBands,
    r_left: Vec<f64>,
    r_right: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
    window_steps: usize,
    // running state
    step_done: usize,
    v_cur: f64,
    x0_cur: f64,
    z_cur: Vec<f64>,
    l_cur: Vec<f64>,
    // window buffers, sized for window_steps (+1 row for the window start)
    db_buf: Vec<f64>,
    ab_buf: Vec<f64>,
    x_buf: Vec<f64>,
    eta_buf: Vec<f64>,
    y_buf: Vec<f64>,
    v_prof: Vec<f64>,
    v_next: Vec<f64>,
    integ: Vec<f64>,
    l_row: Vec<f64>,
}

impl<'a> GapEngine<'a> {
    fn new(
        params: &'a ModelParams,
        grid: SimGrid,
        seed: u64,
        replica: u64,
        opts: SimOptions,
    ) -> Result<Self> {
        if !opts.window.is_finite() || opts.window <= 0.0 {
            return Err(Error::invalid("window must be positive"));
        }
        if !opts.picard_tol.is_finite() || opts.picard_tol <= 0.0 {
            return Err(Error::invalid("picard_tol must be positive"));
        }
        if opts.coarsen == 0 {
            return Err(Error::invalid("coarsen must be at least 1"));
        }
        let n = params.n;
        let window_steps = ((opts.window / grid.dt).round() as usize)
            .max(1)
            .min(grid.steps);
        let rm = &params.reflection;
        let mut r_left = vec![0.0; n];
        let mut r_right = vec![0.0; n];
        for i in 0..n {
            if i > 0 {
                r_left[i] = rm.r.get(i, i - 1);
            }
            if i + 1 < n {
                r_right[i] = rm.r.get(i, i + 1);
            }
        }
        let rngs = (0..n)
            .map(|i| rng::particle_stream(seed, replica, i as u32))
            .collect();
        let rows = window_steps + 1;
        Ok(GapEngine {
            params,
            grid,
            opts,
            bands: UBands::from_reflection(rm),
            r_left,
            r_right,
            rngs,
            window_steps,
            step_done: 0,
            v_cur: params.v0,
            x0_cur: 0.0,
            z_cur: params.z0.clone(),
            l_cur: vec![0.0; n],
            db_buf: vec![0.0; window_steps * n],
            ab_buf: vec![0.0; rows * n],
            x_buf: vec![0.0; rows * n],
            eta_buf: vec![0.0; rows * n],
            y_buf: vec![0.0; rows * n],
            v_prof: vec![0.0; rows],
            v_next: vec![0.0; rows],
            integ: vec![0.0; rows],
            l_row: vec![0.0; n],
        })
    }

    fn run<O: GapObserver>(&mut self, observer: &mut O) -> Result<()> {
        observer.on_step(0, 0.0, self.v_cur, self.x0_cur, &self.z_cur, &self.l_cur);
        while self.step_done < self.grid.steps && !observer.done() {
            let m = self.window_steps.min(self.grid.steps - self.step_done);
            self.draw_increments(m);
            match self.picard(0, m) {
                Ok(()) => self.commit(0, m, observer),
                Err(first_err) => {
                    // one retry at half the window; increments are already drawn
                    if m < 2 {
                        return Err(first_err);
                    }
                    let m1 = m / 2;
                    self.picard(0, m1)?;
                    self.commit(0, m1, observer);
                    self.picard(m1, m - m1)?;
                    self.commit(m1, m - m1, observer);
                }
            }
        }
        Ok(())
    }

    fn draw_increments(&mut self, m: usize) {
        let n = self.params.n;
        let sub = self.opts.coarsen;
        let scale = (self.grid.dt / sub as f64).sqrt();
        for j in 0..m {
            for i in 0..n {
                let mut sum = 0.0;
                for _ in 0..sub {
                    let g: f64 = self.rngs[i].sample(StandardNormal);
                    sum += g;
                }
                self.db_buf[j * n + i] = sum * scale;
            }
        }
    }

    /// Picard-iterate the velocity profile over increments
    /// db_buf[off..off + m], leaving the converged window in the buffers.
    fn picard(&mut self, off: usize, m: usize) -> Result<()> {
        let n = self.params.n;
        let g = self.params.g;
        let dt = self.grid.dt;

        // cumulative A * B over the window: component 0 integrates dB_1,
        // component i integrates dB_{i+1} - dB_i
        for i in 0..n {
            self.ab_buf[i] = 0.0;
        }
        for j in 1..=m {
            let src = (off + j - 1) * n;
            for i in 0..n {
                let mut inc = self.db_buf[src + i];
                if i > 0 {
                    inc -= self.db_buf[src + i - 1];
                }
                self.ab_buf[j * n + i] = self.ab_buf[(j - 1) * n + i] + inc;
            }
        }

        for j in 0..=m {
            self.v_prof[j] = self.v_cur + g * (j as f64) * dt;
        }

        let mut residual = f64::INFINITY;
        for _ in 0..self.opts.max_picard {
            // trapezoidal integral of the current velocity profile
            self.integ[0] = 0.0;
            for j in 1..=m {
                self.integ[j] =
                    self.integ[j - 1] + 0.5 * dt * (self.v_prof[j - 1] + self.v_prof[j]);
            }
            for j in 0..=m {
                let row = j * n;
                for i in 0..n {
                    let mut x = self.z_cur[i] + self.ab_buf[row + i];
                    if i == 0 {
                        x -= self.integ[j];
                    }
                    self.x_buf[row + i] = x;
                }
            }
            forward_sweep(
                &self.x_buf[..(m + 1) * n],
                m + 1,
                n,
                &self.bands,
                &mut self.eta_buf[..(m + 1) * n],
            );
            residual = 0.0;
            for j in 0..=m {
                let v_new = self.v_cur + g * (j as f64) * dt - self.eta_buf[j * n];
                residual = residual.max((v_new - self.v_prof[j]).abs());
                self.v_next[j] = v_new;
            }
            std::mem::swap(&mut self.v_prof, &mut self.v_next);
            if residual < self.opts.picard_tol {
                // y from the input that produced eta; x0 from the committed V
                for j in 0..=m {
                    let row = j * n;
                    for i in 0..n {
                        let mut y = self.x_buf[row + i] + self.eta_buf[row + i];
                        if i > 0 {
                            y += self.r_left[i] * self.eta_buf[row + i - 1];
                        }
                        if i + 1 < n {
                            y += self.r_right[i] * self.eta_buf[row + i + 1];
                        }
                        self.y_buf[row + i] = y;
                    }
                }
                self.integ[0] = 0.0;
                for j in 1..=m {
                    self.integ[j] =
                        self.integ[j - 1] + 0.5 * dt * (self.v_prof[j - 1] + self.v_prof[j]);
                }
                return Ok(());
            }
        }
        Err(Error::PicardDiverged {
            window_start: self.grid.time(self.step_done),
            iterations: self.opts.max_picard,
            residual,
        })
    }

    fn commit<O: GapObserver>(&mut self, off: usize, m: usize, observer: &mut O) {
        let n = self.params.n;
        for j in 1..=m {
            let step = self.step_done + j;
            let t = self.grid.time(step);
            let row = j * n;
            for i in 0..n {
                self.l_row[i] = self.l_cur[i] + self.eta_buf[row + i];
            }
            observer.on_increments(step, &self.db_buf[(off + j - 1) * n..(off + j) * n]);
            observer.on_step(
                step,
                t,
                self.v_prof[j],
                self.x0_cur + self.integ[j],
                &self.y_buf[row..row + n],
                &self.l_row,
            );
        }
        let last = m * n;
        for i in 0..n {
            self.l_cur[i] += self.eta_buf[last + i];
            self.z_cur[i] = self.y_buf[last + i];
        }
        self.v_cur = self.v_prof[m];
        self.x0_cur += self.integ[m];
        self.step_done += m;
    }
}

/// Full history of one unranked (n+1)-particle run.
#[derive(Debug, Clone)]
pub struct UnrankedTrajectory {
    pub grid: SimGrid,
    pub seed: u64,
    pub params: ModelParams,
    /// Positions X_0..X_n, row-major (steps + 1) x (n + 1).
    pub x: Vec<f64>,
    /// Pairwise collision local times, row-major (steps + 1) x n.
    pub ell: Vec<f64>,
    /// Inert velocity per grid point.
    pub v: Vec<f64>,
}

impl UnrankedTrajectory {
    pub fn x_row(&self, step: usize) -> &[f64] {
        let w = self.params.n + 1;
        &self.x[step * w..(step + 1) * w]
    }

    pub fn ell_row(&self, step: usize) -> &[f64] {
        let n = self.params.n;
        &self.ell[step * n..(step + 1) * n]
    }

    /// Gaps between consecutive ranked positions at a step.
    pub fn sorted_gaps(&self, step: usize) -> Vec<f64> {
        let (_, sorted) = rank_positions(self.x_row(step));
        sorted.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// CSV export with header `t,v,x0..xN,ell1..ellN` (positions and pairwise
    /// collision local times of the unranked system), 17 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W, stride: usize) -> Result<()> {
        let n = self.params.n;
        let stride = stride.max(1);
        let mut header = String::from("t,v");
        for i in 0..=n {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=n {
            header.push_str(&format!(",ell{i}"));
        }
        writeln!(out, "{header}")?;
        let steps = self.grid.steps;
        for k in 0..=steps {
            if !k.is_multiple_of(stride) && k != steps {
                continue;
            }
            let mut row = format!("{:.16e},{:.16e}", self.grid.time(k), self.v[k]);
            for x in self.x_row(k) {
                row.push_str(&format!(",{x:.16e}"));
            }
            for e in self.ell_row(k) {
                row.push_str(&format!(",{e:.16e}"));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

/// Simulate the unranked system: each Brownian particle reflects off the
/// moving inert boundary through the one-dimensional Skorokhod map, window
/// by window, with the same Picard coupling on V (replica 0).
pub fn simulate_unranked(
    params: &ModelParams,
    grid: SimGrid,
    seed: u64,
    x_init: &[f64],
) -> Result<UnrankedTrajectory> {
    simulate_unranked_replica(params, grid, seed, 0, x_init)
}

pub fn simulate_unranked_replica(
    params: &ModelParams,
    grid: SimGrid,
    seed: u64,
    replica: u64,
    x_init: &[f64],
) -> Result<UnrankedTrajectory> {
    let n = params.n;
    if x_init.len() != n + 1 {
        return Err(Error::invalid(format!(
            "x_init must have n + 1 = {} components, got {}",
            n + 1,
            x_init.len()
        )));
    }
    if x_init.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("x_init must be sorted ascending"));
    }
    let opts = SimOptions::default();
    let window_steps = ((opts.window / grid.dt).round() as usize)
        .max(1)
        .min(grid.steps);
    let steps = grid.steps;

    let rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| rng::particle_stream(seed, replica, i as u32))
        .collect();

    let rows = window_steps + 1;
    let mut engine = UnrankedEngine {
        params,
        grid,
        opts,
        rngs,
        sqrt_dt: grid.dt.sqrt(),
        done: 0,
        pos: x_init.to_vec(),
        ell_cur: vec![0.0; n],
        v_cur: params.v0,
        dw: vec![0.0; window_steps * n],
        cw: vec![0.0; rows * n],
        dl: vec![0.0; rows * n],
        x0_prof: vec![0.0; rows],
        v_prof: vec![0.0; rows],
        v_next: vec![0.0; rows],
        integ: vec![0.0; rows],
        x: Vec::with_capacity((steps + 1) * (n + 1)),
        ell: Vec::with_capacity((steps + 1) * n),
        v_out: Vec::with_capacity(steps + 1),
    };
    engine.x.extend_from_slice(x_init);
    engine.ell.extend_from_slice(&vec![0.0; n]);
    engine.v_out.push(params.v0);

    while engine.done < steps {
        let m = window_steps.min(steps - engine.done);
        engine.draw(m);
        match engine.picard(0, m) {
            Ok(()) => engine.commit(0, m),
            Err(first_err) => {
                if m < 2 {
                    return Err(first_err);
                }
                let m1 = m / 2;
                engine.picard(0, m1)?;
                engine.commit(0, m1);
                engine.picard(m1, m - m1)?;
                engine.commit(m1, m - m1);
            }
        }
    }

    Ok(UnrankedTrajectory {
        grid,
        seed,
        params: params.clone(),
        x: engine.x,
        ell: engine.ell,
        v: engine.v_out,
    })
}

struct UnrankedEngine<'a> {
    params: &'a ModelParams,
    grid: SimGrid,
    opts: SimOptions,
    rngs: Vec<ChaCha8Rng>,
    sqrt_dt: f64,
    done: usize,
    pos: Vec<f64>,
    ell_cur: Vec<f64>,
    v_cur: f64,
    dw: Vec<f64>,
    cw: Vec<f64>,
    dl: Vec<f64>,
    x0_prof: Vec<f64>,
    v_prof: Vec<f64>,
    v_next: Vec<f64>,
    integ: Vec<f64>,
    x: Vec<f64>,
    ell: Vec<f64>,
    v_out: Vec<f64>,
}

impl UnrankedEngine<'_> {
    fn draw(&mut self, m: usize) {
        let n = self.params.n;
        for j in 0..m {
            for i in 0..n {
                let gauss: f64 = self.rngs[i].sample(StandardNormal);
                self.dw[j * n + i] = gauss * self.sqrt_dt;
            }
        }
    }

    fn picard(&mut self, off: usize, m: usize) -> Result<()> {
        let n = self.params.n;
        let g = self.params.g;
        let dt = self.grid.dt;

        for i in 0..n {
            self.cw[i] = 0.0;
        }
        for j in 1..=m {
            let src = (off + j - 1) * n;
            for i in 0..n {
                self.cw[j * n + i] = self.cw[(j - 1) * n + i] + self.dw[src + i];
            }
        }
        for j in 0..=m {
            self.v_prof[j] = self.v_cur + g * (j as f64) * dt;
        }
        let mut residual = f64::INFINITY;
        for _ in 0..self.opts.max_picard {
            self.integ[0] = 0.0;
            for j in 1..=m {
                self.integ[j] =
                    self.integ[j - 1] + 0.5 * dt * (self.v_prof[j - 1] + self.v_prof[j]);
            }
            for j in 0..=m {
                self.x0_prof[j] = self.pos[0] + self.integ[j];
            }
            // 1-D Skorokhod against the moving boundary, per particle
            for i in 0..n {
                let mut running: f64 = 0.0;
                for j in 0..=m {
                    let gap = self.pos[i + 1] + self.cw[j * n + i] - self.x0_prof[j];
                    running = running.max(-gap);
                    self.dl[j * n + i] = running.max(0.0);
                }
            }
            residual = 0.0;
            for j in 0..=m {
                let mut total = 0.0;
                for i in 0..n {
                    total += self.dl[j * n + i];
                }
                let vn = self.v_cur + g * (j as f64) * dt - total;
                residual = residual.max((vn - self.v_prof[j]).abs());
                self.v_next[j] = vn;
            }
            if residual < self.opts.picard_tol {
                return Ok(());
            }
            std::mem::swap(&mut self.v_prof, &mut self.v_next);
        }
        Err(Error::PicardDiverged {
            window_start: self.grid.time(self.done),
            iterations: self.opts.max_picard,
            residual,
        })
    }

    /// Boundary and local times come from the profile that produced them;
    /// the committed velocity uses the regulator increments directly.
    fn commit(&mut self, _off: usize, m: usize) {
        let n = self.params.n;
        for j in 1..=m {
            self.v_out.push(self.v_next[j]);
            self.x.push(self.x0_prof[j]);
            for i in 0..n {
                self.x
                    .push(self.pos[i + 1] + self.cw[j * n + i] + self.dl[j * n + i]);
            }
            for i in 0..n {
                self.ell.push(self.ell_cur[i] + self.dl[j * n + i]);
            }
        }
        for i in 0..n {
            self.pos[i + 1] += self.cw[m * n + i] + self.dl[m * n + i];
            self.ell_cur[i] += self.dl[m * n + i];
        }
        self.pos[0] = self.x0_prof[m];
        self.v_cur = self.v_next[m];
        self.done += m;
    }
}

/// Stable ascending sort: returns (permutation, sorted values) where
/// permutation[k] is the original index of the k-th smallest value.
pub fn rank_positions(x: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(std::cmp::Ordering::Equal));
    let sorted = idx.iter().map(|&i| x[i]).collect();
    (idx, sorted)
}

/// Outcome of the pathwise local-time bound check.
#[derive(Debug, Clone, Copy)]
pub struct LocalTimeBoundReport {
    pub pass: bool,
    /// Smallest bound-minus-local-time margin over all steps and components
    /// (negative means a violation).
    pub worst_margin: f64,
}

/// Check L_i(t) <= W_{i,1} t sup_{s<=t} V(s)^+ + sum_j W_{i,j} B*_j(t) on every
/// grid point, with B* rebuilt from the stored Brownian increments.
pub fn local_time_upper_bound_check(traj: &Trajectory) -> LocalTimeBoundReport {
    let n = traj.params.n;
    let w = &traj.params.reflection.w;
    let steps = traj.grid.steps;

    let mut b = vec![0.0; n]; // B_j(t_k)
    let mut b_star = vec![0.0f64; n];
    let mut sup_v_plus = traj.v[0].max(0.0);
    let mut worst = f64::INFINITY;

    for k in 0..=steps {
        if k > 0 {
            for j in 0..n {
                b[j] += traj.db[(k - 1) * n + j];
            }
        }
        sup_v_plus = sup_v_plus.max(traj.v[k].max(0.0));
        for j in 0..n {
            let drive = if j == 0 { -b[0] } else { b[j - 1] - b[j] };
            b_star[j] = b_star[j].max(drive);
        }
        let t = traj.grid.time(k);
        for i in 0..n {
            let mut bound = w.get(i, 0) * t * sup_v_plus;
            for j in 0..n {
                bound += w.get(i, j) * b_star[j];
            }
            let margin = bound - traj.l_at(k, i);
            if margin < worst {
                worst = margin;
            }
        }
    }
    // allow for the Picard residual accumulating through int V over the horizon
    let tol = 100.0 * DEFAULT_PICARD_TOL * (1.0 + traj.grid.t_end);
    LocalTimeBoundReport {
        pass: worst >= -tol,
        worst_margin: worst,
    }
}

/// CSV header for trajectory export.
pub fn csv_header(n: usize) -> String {
    let mut h = String::from("t,v,x0");
    for i in 1..=n {
        h.push_str(&format!(",z{i}"));
    }
    for i in 1..=n {
        h.push_str(&format!(",l{i}"));
    }
    h
}

/// One CSV row with 17 significant digits per value.
pub fn csv_row(t: f64, v: f64, x0: f64, z: &[f64], l: &[f64]) -> String {
    let mut row = format!("{t:.16e},{v:.16e},{x0:.16e}");
    for zi in z {
        row.push_str(&format!(",{zi:.16e}"));
    }
    for li in l {
        row.push_str(&format!(",{li:.16e}"));
    }
    row
}

impl Trajectory {
    /// Write the trajectory as CSV, keeping every `stride`-th grid point
    /// (the initial and final points are always written).
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        writeln!(out, "{}", csv_header(self.params.n))?;
        let steps = self.grid.steps;
        for k in 0..=steps {
            if !k.is_multiple_of(stride) && k != steps {
                continue;
            }
            writeln!(
                out,
                "{}",
                csv_row(
                    self.grid.time(k),
                    self.v[k],
                    self.x0[k],
                    self.z_row(k),
                    self.l_row(k),
                )
            )?;
        }
        Ok(())
    }
}
