//! Finite-volume discretization, RK4 time stepping and the run loop.
//!
//! The evolution form is `u_t = div(b grad u) + R(u)`. Face coefficients are
//! arithmetic means of the adjacent cell values; the four domain walls carry
//! zero flux, so the flux part of the right-hand side telescopes to zero when
//! summed over the grid.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::field::{integrate, reaction, write_snapshot, BistableParams, DiffusionMap, GridSpec, ScalarField};
use crate::geometry::{rasterize, Scenario, OUTFLOW_MARGIN};

/// Largest stable ratio `dt / dx^2` accepted by [`cfl_check`].
pub const CFL_LIMIT: f64 = 0.5;
pub const DEFAULT_BLOWUP_BOUND: f64 = 10.0;
/// Magnitudes below this are set to zero after each step.
pub const FLUSH_BELOW: f64 = 1e-250;
/// Records shorter than this cannot be classified.
pub const MIN_SAMPLES: usize = 10;
/// Fraction of the run inspected for stationarity.
pub const BLOCKED_WINDOW: f64 = 0.2;
/// Residual drive, relative to the initial one, below which a front counts as stopped.
pub const BLOCKED_DRIVE_FRACTION: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot cadence; `None` disables snapshots.
    pub snapshot_every: Option<f64>,
    pub diag_every: f64,
    pub blowup_bound: f64,
    /// Directory receiving `snap_NNNNNN.txt` files.
    pub snapshot_dir: Option<PathBuf>,
    /// End the run as soon as the front has crossed the obstacle.
    pub stop_on_crossing: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            snapshot_every: None,
            diag_every: (t_end / 200.0).max(dt),
            blowup_bound: DEFAULT_BLOWUP_BOUND,
            snapshot_dir: None,
            stop_on_crossing: false,
        }
    }

    /// Uses the scenario's own time step and duration.
    pub fn for_scenario(s: &Scenario) -> Self {
        Self::new(s.dt, s.t_end)
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("{} must be positive", self.dt),
            });
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("{} shorter than dt", self.t_end),
            });
        }
        if !(self.diag_every >= self.dt * (1.0 - 1e-9)) {
            return Err(Error::InvalidParameter {
                name: "diag_every",
                reason: format!("{} shorter than dt", self.diag_every),
            });
        }
        if let Some(every) = self.snapshot_every {
            if !(every >= self.dt * (1.0 - 1e-9)) {
                return Err(Error::InvalidParameter {
                    name: "snapshot_every",
                    reason: format!("{every} shorter than dt"),
                });
            }
        }
        if !(self.blowup_bound > 0.0) {
            return Err(Error::InvalidParameter {
                name: "blowup_bound",
                reason: format!("{} must be positive", self.blowup_bound),
            });
        }
        cfl_check(self.dt, grid).map(|_| ())
    }
}

/// Passes iff `dt / min(dx, dy)^2 < 1/2`; returns the ratio.
pub fn cfl_check(dt: f64, grid: &GridSpec) -> Result<f64> {
    let h = grid.dx().min(grid.dy());
    let ratio = dt / (h * h);
    // h*h rounds, so 5e-3 / 0.1^2 lands just under the limit
    if ratio < CFL_LIMIT * (1.0 - 1e-12) {
        Ok(ratio)
    } else {
        Err(Error::Cfl { ratio })
    }
}

/// Precomputed face coefficients of `div(b grad .)`, already divided by the
/// squared spacing. Wall faces are zero. Each face is stored once: `east[k]`
/// is the face between cells `k` and `k + 1`, and `north` holds one leading
/// row of zeros so that row `j` finds its south faces at row `j` of the
/// padded array and its north faces at row `j + 1`.
#[derive(Clone, Debug)]
pub struct DiffusionOperator {
    grid: GridSpec,
    east: Vec<f64>,
    north: Vec<f64>,
}

impl DiffusionOperator {
    pub fn new(b: &DiffusionMap) -> Self {
        let grid = *b.grid();
        let (nx, ny) = (grid.nx(), grid.ny());
        let (ix2, iy2) = (1.0 / (grid.dx() * grid.dx()), 1.0 / (grid.dy() * grid.dy()));
        let bv = b.values();
        let n = grid.len();
        let mut east = vec![0.0; n];
        let mut north = vec![0.0; n + nx];
        for j in 0..ny {
            for i in 0..nx {
                let k = grid.index(i, j);
                if i + 1 < nx {
                    east[k] = 0.5 * (bv[k] + bv[k + 1]) * ix2;
                }
                if j + 1 < ny {
                    north[k + nx] = 0.5 * (bv[k] + bv[k + nx]) * iy2;
                }
            }
        }
        Self { grid, east, north }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `out = div(b grad u) + R(u)`.
    pub fn apply(&self, u: &[f64], p: BistableParams, out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        debug_assert_eq!(u.len(), nx * ny);
        debug_assert_eq!(out.len(), nx * ny);
        let (s, a) = (p.s(), p.a());
        let react = |v: f64| s * v * (1.0 - v) * (v - a);
        for j in 0..ny {
            let base = j * nx;
            // wall rows point at themselves; their coefficient is zero
            let up = if j + 1 < ny { base + nx } else { base };
            let down = if j > 0 { base - nx } else { base };
            let c = &u[base..base + nx];
            let n = &u[up..up + nx];
            let d = &u[down..down + nx];
            let ce = &self.east[base..base + nx];
            let cs = &self.north[base..base + nx];
            let cn = &self.north[base + nx..base + 2 * nx];
            let o = &mut out[base..base + nx];

            let last = nx - 1;
            o[0] = ce[0] * (c[1] - c[0]) + cn[0] * (n[0] - c[0]) + cs[0] * (d[0] - c[0]) + react(c[0]);
            o[last] = ce[last - 1] * (c[last - 1] - c[last])
                + cn[last] * (n[last] - c[last])
                + cs[last] * (d[last] - c[last])
                + react(c[last]);
            let (o, c, n, d) = (&mut o[..nx], &c[..nx], &n[..nx], &d[..nx]);
            let (ce, cs, cn) = (&ce[..nx], &cs[..nx], &cn[..nx]);
            for i in 1..last {
                let ci = c[i];
                o[i] = ce[i] * (c[i + 1] - ci)
                    + ce[i - 1] * (c[i - 1] - ci)
                    + cn[i] * (n[i] - ci)
                    + cs[i] * (d[i] - ci)
                    + react(ci);
            }
        }
    }
}

/// `du/dt` of the semi-discrete system.
pub fn rhs(u: &ScalarField, b: &DiffusionMap, p: BistableParams) -> Result<ScalarField> {
    if u.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let op = DiffusionOperator::new(b);
    let mut out = vec![0.0; u.grid().len()];
    op.apply(u.values(), p, &mut out);
    ScalarField::new(*u.grid(), out)
}

/// Classical RK4 integrator owning its stage buffers.
#[derive(Clone, Debug)]
pub struct Integrator {
    op: DiffusionOperator,
    params: BistableParams,
    blowup_bound: f64,
    k: Vec<f64>,
    acc: Vec<f64>,
    tmp: Vec<f64>,
}

impl Integrator {
    pub fn new(b: &DiffusionMap, params: BistableParams) -> Self {
        let n = b.grid().len();
        Self {
            op: DiffusionOperator::new(b),
            params,
            blowup_bound: DEFAULT_BLOWUP_BOUND,
            k: vec![0.0; n],
            acc: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    pub fn with_blowup_bound(mut self, bound: f64) -> Self {
        self.blowup_bound = bound;
        self
    }

    pub fn grid(&self) -> &GridSpec {
        self.op.grid()
    }

    pub fn params(&self) -> BistableParams {
        self.params
    }

    /// Advances `u` by one step of size `dt`; `t` is only used in the error.
    pub fn step(&mut self, u: &mut ScalarField, dt: f64, t: f64) -> Result<()> {
        if u.grid() != self.op.grid() {
            return Err(Error::GridMismatch);
        }
        let (h, p) = (0.5 * dt, self.params);
        let v = u.values_mut();
        let n = v.len();
        let (k, acc, tmp) = (&mut self.k[..n], &mut self.acc[..n], &mut self.tmp[..n]);

        self.op.apply(v, p, k);
        for i in 0..n {
            acc[i] = k[i];
            tmp[i] = v[i] + h * k[i];
        }
        self.op.apply(tmp, p, k);
        for i in 0..n {
            acc[i] += 2.0 * k[i];
            tmp[i] = v[i] + h * k[i];
        }
        self.op.apply(tmp, p, k);
        for i in 0..n {
            acc[i] += 2.0 * k[i];
            tmp[i] = v[i] + dt * k[i];
        }
        self.op.apply(tmp, p, k);
        let sixth = dt / 6.0;
        let mut worst = 0.0f64;
        let mut finite = true;
        for i in 0..n {
            let x = v[i] + sixth * (acc[i] + k[i]);
            // deep inside obstacles u underflows; subnormals are very slow
            let x = if x.abs() < FLUSH_BELOW { 0.0 } else { x };
            finite &= x.abs() <= f64::MAX;
            worst = worst.max(x.abs());
            v[i] = x;
        }
        if !finite {
            worst = f64::INFINITY;
        }
        if worst > self.blowup_bound {
            return Err(Error::BlowUp {
                t: t + dt,
                value: worst,
            });
        }
        Ok(())
    }
}

/// One RK4 step with the default blow-up bound.
pub fn rk4_step(u: &ScalarField, b: &DiffusionMap, p: BistableParams, dt: f64) -> Result<ScalarField> {
    if u.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    cfl_check(dt, u.grid())?;
    let mut next = u.clone();
    Integrator::new(b, p).step(&mut next, dt, 0.0)?;
    Ok(next)
}

pub fn mean_u(u: &ScalarField) -> f64 {
    integrate(u) / u.grid().area()
}

/// The driving force: the domain integral of `R(u)`.
pub fn reaction_integral(u: &ScalarField, p: BistableParams) -> f64 {
    u.values().iter().map(|&v| reaction(v, p)).sum::<f64>() * u.grid().cell_area()
}

fn crossing_on_row(u: &ScalarField, j: usize) -> Result<f64> {
    let g = u.grid();
    let row = u.row(j);
    for (i, w) in row.windows(2).enumerate() {
        let (l, r) = (w[0] - 0.5, w[1] - 0.5);
        if (l >= 0.0) != (r >= 0.0) {
            return Ok(g.x(i) + g.dx() * l / (l - r));
        }
    }
    let side = if row[0] >= 0.5 { "above" } else { "below" };
    Err(Error::NoCrossing { side })
}

/// x where `u = 0.5` along the middle row, linearly interpolated between
/// cell centers; the first crossing from the left.
pub fn front_position(u: &ScalarField) -> Result<f64> {
    let g = u.grid();
    let mid = g.row_nearest(0.5 * (g.y_min() + g.y_max()));
    crossing_on_row(u, mid)
}

/// Largest front position over several probe rows.
pub fn front_position_on(u: &ScalarField, rows: &[usize]) -> Result<f64> {
    let mut best: Option<f64> = None;
    let mut last_err = Error::NoCrossing { side: "below" };
    for &j in rows {
        match crossing_on_row(u, j) {
            Ok(x) => best = Some(best.map_or(x, |b: f64| b.max(x))),
            Err(e) => last_err = e,
        }
    }
    best.ok_or(last_err)
}

/// Front position used by the run loop: a fully invaded row reports the
/// last cell center, a row with no invasion is ignored; `NaN` if no row
/// carries information.
fn tracked_front(u: &ScalarField, rows: &[usize]) -> f64 {
    let g = u.grid();
    let mut best = f64::NAN;
    for &j in rows {
        let x = match crossing_on_row(u, j) {
            Ok(x) => x,
            Err(Error::NoCrossing { side: "above" }) => g.x(g.nx() - 1),
            Err(_) => continue,
        };
        best = if best.is_nan() { x } else { best.max(x) };
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Crossed,
    Blocked,
    Undecided,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Crossed => "Crossed",
            Outcome::Blocked => "Blocked",
            Outcome::Undecided => "Undecided",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagSample {
    pub t: f64,
    pub mean_u: f64,
    pub reaction_integral: f64,
    pub front_x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub samples: Vec<DiagSample>,
    pub outcome: Outcome,
    pub final_field: ScalarField,
}

impl RunRecord {
    pub fn last(&self) -> &DiagSample {
        self.samples.last().expect("records always hold the initial sample")
    }

    /// Least-squares slope of the front position over samples with `t >= t_from`.
    pub fn front_speed(&self, t_from: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.t >= t_from && s.front_x.is_finite())
            .map(|s| (s.t, s.front_x))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let (mt, mx) = pts.iter().fold((0.0, 0.0), |(a, b), (t, x)| (a + t / n, b + x / n));
        let (num, den) = pts.iter().fold((0.0, 0.0), |(num, den), (t, x)| {
            (num + (t - mt) * (x - mx), den + (t - mt) * (t - mt))
        });
        Some(num / den)
    }

    /// CSV with header `t,mean_u,reaction_integral,front_x`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mean_u,reaction_integral,front_x")?;
        for s in &self.samples {
            writeln!(out, "{},{},{},{}", s.t, s.mean_u, s.reaction_integral, s.front_x)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Position the front must pass for a crossing to count.
fn crossing_line(s: &Scenario) -> f64 {
    let margin = OUTFLOW_MARGIN * s.length_unit();
    s.obstacle_exit_x().unwrap_or(s.front_x0) + margin
}

/// Crossed once the front passes the obstacle exit by the outflow margin;
/// Blocked when, over the final part of the run, the front moves less than a
/// cell and the drive stays below 1% of its initial value.
pub fn classify_outcome(rec: &RunRecord, s: &Scenario) -> Result<Outcome> {
    classify_samples(&rec.samples, s)
}

fn classify_samples(samples: &[DiagSample], s: &Scenario) -> Result<Outcome> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "record",
            reason: format!("{} diagnostic samples, need {MIN_SAMPLES}", samples.len()),
        });
    }
    let line = crossing_line(s);
    if samples.iter().any(|d| d.front_x > line) {
        return Ok(Outcome::Crossed);
    }
    let (t0, t1) = (samples[0].t, samples[samples.len() - 1].t);
    let from = t1 - BLOCKED_WINDOW * (t1 - t0);
    let window: Vec<&DiagSample> = samples.iter().filter(|d| d.t >= from).collect();
    let drive0 = samples[0].reaction_integral.abs();
    let stationary = window.iter().all(|d| d.front_x.is_finite()) && {
        let (lo, hi) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d.front_x), hi.max(d.front_x))
        });
        hi - lo < s.domain.dx()
    };
    let starved = window
        .iter()
        .all(|d| d.reaction_integral.abs() < BLOCKED_DRIVE_FRACTION * drive0);
    Ok(if stationary && starved {
        Outcome::Blocked
    } else {
        Outcome::Undecided
    })
}

fn sample(t: f64, u: &ScalarField, p: BistableParams, rows: &[usize], area_factor: f64) -> DiagSample {
    DiagSample {
        t,
        mean_u: mean_u(u),
        reaction_integral: reaction_integral(u, p) * area_factor,
        front_x: tracked_front(u, rows),
    }
}

fn stride(every: f64, dt: f64) -> u64 {
    ((every / dt).round() as u64).max(1)
}

/// Integrates the scenario from its initial front to `cfg.t_end`.
pub fn run(s: &Scenario, cfg: &SolverConfig) -> Result<RunRecord> {
    let b = rasterize(s)?;
    cfg.validate(&s.domain)?;
    let p = s.params;
    let rows = s.probe_rows();
    let area = s.area_factor();
    let mut u = s.initial_field();
    let mut integrator = Integrator::new(&b, p).with_blowup_bound(cfg.blowup_bound);

    let n_steps = (cfg.t_end / cfg.dt).round() as u64;
    let diag_stride = stride(cfg.diag_every, cfg.dt);
    let snap_stride = cfg.snapshot_every.map(|e| stride(e, cfg.dt));
    let snap_dir = match (&cfg.snapshot_dir, snap_stride) {
        (Some(dir), Some(_)) => {
            fs::create_dir_all(dir)?;
            Some(dir.clone())
        }
        _ => None,
    };
    let write_snap = |index: u64, t: f64, u: &ScalarField| -> Result<()> {
        if let Some(dir) = &snap_dir {
            let file = File::create(dir.join(format!("snap_{index:06}.txt")))?;
            write_snapshot(BufWriter::new(file), u.grid(), u.values(), t)?;
        }
        Ok(())
    };

    let line = crossing_line(s);
    let mut samples = vec![sample(0.0, &u, p, &rows, area)];
    let mut snap_index = 0;
    write_snap(snap_index, 0.0, &u)?;
    for step in 1..=n_steps {
        let t_prev = (step - 1) as f64 * cfg.dt;
        integrator.step(&mut u, cfg.dt, t_prev)?;
        let t = step as f64 * cfg.dt;
        if let Some(every) = snap_stride {
            if step % every == 0 {
                snap_index += 1;
                write_snap(snap_index, t, &u)?;
            }
        }
        if step % diag_stride == 0 || step == n_steps {
            let d = sample(t, &u, p, &rows, area);
            samples.push(d);
            if cfg.stop_on_crossing && d.front_x > line {
                break;
            }
        }
    }
    let outcome = classify_samples(&samples, s).unwrap_or(Outcome::Undecided);
    Ok(RunRecord {
        samples,
        outcome,
        final_field: u,
    })
}
