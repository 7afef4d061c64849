//! Parameter sweeps over scenarios, outcome tables and phase boundaries.

use std::cmp::Ordering;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::SolverSettings;
use crate::error::{Error, Result};
use crate::geometry::ScenarioSpec;
use crate::solver::{cfl_check, run, DiagSample, Outcome};

/// One swept parameter, sampled at `count` evenly spaced values in `[min, max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: &str, min: f64, max: f64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter {
                name: "count",
                reason: format!("axis `{name}` needs at least one value"),
            });
        }
        if !(min.is_finite() && max.is_finite()) || max < min {
            return Err(Error::InvalidParameter {
                name: "range",
                reason: format!("axis `{name}` range [{min}, {max}] is empty"),
            });
        }
        if count > 1 && max == min {
            return Err(Error::InvalidParameter {
                name: "range",
                reason: format!("axis `{name}` repeats {min} {count} times"),
            });
        }
        Ok(Self {
            name: name.to_string(),
            min,
            max,
            count,
        })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.max
                } else {
                    self.min + k as f64 * step
                }
            })
            .collect()
    }

    pub fn step(&self) -> f64 {
        if self.count > 1 {
            (self.max - self.min) / (self.count - 1) as f64
        } else {
            0.0
        }
    }
}

/// Cartesian product of the axis values, first axis slowest.
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for a in axes {
        let vals = a.values();
        points = points
            .into_iter()
            .flat_map(|p| {
                vals.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    points
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    template: ScenarioSpec,
    axes: Vec<Axis>,
    solver: SolverSettings,
    workers: usize,
    output: Option<PathBuf>,
}

impl SweepSpec {
    /// Validates the axes and builds every generated scenario once.
    pub fn new(
        template: ScenarioSpec,
        axes: Vec<Axis>,
        solver: SolverSettings,
        workers: usize,
        output: Option<PathBuf>,
    ) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidParameter {
                name: "axes",
                reason: format!("{} axes, need 1 or 2", axes.len()),
            });
        }
        if axes.len() == 2 && axes[0].name == axes[1].name {
            return Err(Error::InvalidParameter {
                name: "axes",
                reason: format!("`{}` swept twice", axes[0].name),
            });
        }
        if workers == 0 {
            return Err(Error::InvalidParameter {
                name: "workers",
                reason: "need at least one worker".into(),
            });
        }
        let spec = Self {
            template,
            axes,
            solver,
            workers,
            output,
        };
        for p in spec.points() {
            let s = spec.scenario_at(&p)?.build()?;
            cfl_check(s.dt, &s.domain)?;
            spec.solver.config_for(&s).validate(&s.domain)?;
        }
        Ok(spec)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn output(&self) -> Option<&Path> {
        self.output.as_deref()
    }

    pub fn with_workers(mut self, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParameter {
                name: "workers",
                reason: "need at least one worker".into(),
            });
        }
        self.workers = workers;
        Ok(self)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        grid_points(&self.axes)
    }

    fn scenario_at(&self, point: &[f64]) -> Result<ScenarioSpec> {
        let mut spec = self.template.clone();
        for (a, v) in self.axes.iter().zip(point) {
            spec.set(&a.name, *v)?;
        }
        Ok(spec)
    }

    fn run_point(&self, point: &[f64]) -> SweepRow {
        let result = self.scenario_at(point).and_then(|spec| {
            let s = spec.build()?;
            let rec = run(&s, &self.solver.config_for(&s))?;
            Ok(rec)
        });
        match result {
            Ok(rec) => {
                let last = *rec.last();
                SweepRow {
                    params: point.to_vec(),
                    result: Ok(PointSummary {
                        outcome: rec.outcome,
                        reaction_integral: last.reaction_integral,
                        front_x: last.front_x,
                    }),
                    samples: rec.samples,
                }
            }
            Err(e) => SweepRow {
                params: point.to_vec(),
                result: Err(e.to_string()),
                samples: Vec::new(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSummary {
    pub outcome: Outcome,
    pub reaction_integral: f64,
    pub front_x: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub params: Vec<f64>,
    pub result: std::result::Result<PointSummary, String>,
    pub samples: Vec<DiagSample>,
}

impl SweepRow {
    pub fn outcome(&self) -> Option<Outcome> {
        self.result.as_ref().ok().map(|s| s.outcome)
    }
}

fn cmp_params(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Rows sorted lexicographically by parameter values.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeTable {
    pub axes: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl OutcomeTable {
    pub fn new(axes: Vec<String>, mut rows: Vec<SweepRow>) -> Self {
        rows.sort_by(|a, b| cmp_params(&a.params, &b.params));
        Self { axes, rows }
    }

    /// Table whose outcomes come from a function of the parameters, for
    /// checking boundary extraction against a known threshold.
    pub fn from_fn(axes: &[Axis], mut f: impl FnMut(&[f64]) -> Outcome) -> Self {
        let rows = grid_points(axes)
            .into_iter()
            .map(|p| SweepRow {
                result: Ok(PointSummary {
                    outcome: f(&p),
                    reaction_integral: f64::NAN,
                    front_x: f64::NAN,
                }),
                params: p,
                samples: Vec::new(),
            })
            .collect();
        Self::new(axes.iter().map(|a| a.name.clone()).collect(), rows)
    }

    pub fn errors(&self) -> usize {
        self.rows.iter().filter(|r| r.result.is_err()).count()
    }

    pub fn outcome_at(&self, params: &[f64]) -> Option<Outcome> {
        self.rows
            .iter()
            .find(|r| {
                r.params
                    .iter()
                    .zip(params)
                    .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + b.abs()))
            })
            .and_then(SweepRow::outcome)
    }

    /// CSV with one row per point; failed points carry `Error` and the message.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for a in &self.axes {
            write!(out, "{a},")?;
        }
        writeln!(out, "outcome,reaction_integral,front_x,error")?;
        for r in &self.rows {
            for p in &r.params {
                write!(out, "{p},")?;
            }
            match &r.result {
                Ok(s) => writeln!(out, "{},{},{},", s.outcome, s.reaction_integral, s.front_x)?,
                Err(e) => writeln!(out, "Error,,,\"{}\"", e.replace('"', "'"))?,
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `outcomes.csv` plus `points/<params>/diag.csv` for each run.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_csv(std::io::BufWriter::new(fs::File::create(dir.join("outcomes.csv"))?))?;
        for r in &self.rows {
            if r.samples.is_empty() {
                continue;
            }
            let name: Vec<String> = self
                .axes
                .iter()
                .zip(&r.params)
                .map(|(a, v)| format!("{a}={v}"))
                .collect();
            let point_dir = dir.join("points").join(name.join("_"));
            fs::create_dir_all(&point_dir)?;
            let mut out = std::io::BufWriter::new(fs::File::create(point_dir.join("diag.csv"))?);
            writeln!(out, "t,mean_u,reaction_integral,front_x")?;
            for s in &r.samples {
                writeln!(out, "{},{},{},{}", s.t, s.mean_u, s.reaction_integral, s.front_x)?;
            }
            out.flush()?;
        }
        Ok(())
    }
}

/// Runs every grid point on a pool of `workers` threads. Failed points
/// become error rows and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<OutcomeTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::InvalidParameter {
            name: "workers",
            reason: e.to_string(),
        })?;
    let points = spec.points();
    let rows: Vec<SweepRow> = pool.install(|| points.par_iter().map(|p| spec.run_point(p)).collect());
    let table = OutcomeTable::new(spec.axes.iter().map(|a| a.name.clone()).collect(), rows);
    if let Some(dir) = &spec.output {
        table.write_dir(dir)?;
    }
    Ok(table)
}

/// Which outcome lies at the small end of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    BlockedBelow,
    CrossedBelow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    /// Value on the column axis.
    pub column: f64,
    /// Midpoint between the last point of the lower class and the first of
    /// the upper one; `None` when the column has a single outcome.
    pub value: Option<f64>,
    pub orientation: Option<Orientation>,
    /// Outcomes interleave along the column.
    pub mixed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseBoundary {
    pub column_axis: String,
    pub along_axis: String,
    pub points: Vec<BoundaryPoint>,
}

impl PhaseBoundary {
    pub fn warnings(&self) -> Vec<String> {
        self.points
            .iter()
            .filter(|p| p.mixed)
            .map(|p| {
                format!(
                    "{} = {}: outcomes interleave along {}",
                    self.column_axis, p.column, self.along_axis
                )
            })
            .collect()
    }

    /// Least-squares line through the origin over the defined points:
    /// `(slope, largest |residual|)`.
    pub fn fit_through_origin(&self) -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter_map(|p| p.value.map(|v| (p.column, v)))
            .collect();
        let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
        if pts.is_empty() || sxx == 0.0 {
            return None;
        }
        let slope = pts.iter().map(|(x, y)| x * y).sum::<f64>() / sxx;
        let worst = pts.iter().map(|(x, y)| (y - slope * x).abs()).fold(0.0, f64::max);
        Some((slope, worst))
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},{},mixed", self.column_axis, self.along_axis)?;
        for p in &self.points {
            let v = p.value.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{}", p.column, v, p.mixed)?;
        }
        Ok(())
    }
}

/// Boundary between Blocked and Crossed along `along` for each value of the
/// other axis. Undecided and failed points are ignored. Either orientation is
/// handled; columns where the classes interleave are flagged but still get
/// the midpoint between the classes' closest extremes on the majority side.
pub fn phase_boundary(table: &OutcomeTable, along: &str) -> Result<PhaseBoundary> {
    if table.axes.len() != 2 {
        return Err(Error::InvalidParameter {
            name: "table",
            reason: format!("{} axes, boundary needs 2", table.axes.len()),
        });
    }
    let k = table
        .axes
        .iter()
        .position(|a| a == along)
        .ok_or_else(|| Error::InvalidParameter {
            name: "axis",
            reason: format!("`{along}` is not an axis of the table"),
        })?;
    let c = 1 - k;
    let mut columns: Vec<f64> = table.rows.iter().map(|r| r.params[c]).collect();
    columns.sort_by(f64::total_cmp);
    columns.dedup();

    let mut points = Vec::new();
    for col in columns {
        let mut blocked = Vec::new();
        let mut crossed = Vec::new();
        for r in table.rows.iter().filter(|r| r.params[c] == col) {
            match r.outcome() {
                Some(Outcome::Blocked) => blocked.push(r.params[k]),
                Some(Outcome::Crossed) => crossed.push(r.params[k]),
                _ => {}
            }
        }
        if blocked.is_empty() || crossed.is_empty() {
            points.push(BoundaryPoint {
                column: col,
                value: None,
                orientation: None,
                mixed: false,
            });
            continue;
        }
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (orientation, lower, upper) = if mean(&blocked) <= mean(&crossed) {
            (Orientation::BlockedBelow, &blocked, &crossed)
        } else {
            (Orientation::CrossedBelow, &crossed, &blocked)
        };
        let (hi_lower, lo_upper) = (max(lower), min(upper));
        let mixed = hi_lower > lo_upper;
        let value = if mixed {
            // first switch from the lower class to the upper one
            let mut along_vals: Vec<(f64, bool)> = lower
                .iter()
                .map(|&v| (v, false))
                .chain(upper.iter().map(|&v| (v, true)))
                .collect();
            along_vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            along_vals
                .windows(2)
                .find(|w| !w[0].1 && w[1].1)
                .map(|w| 0.5 * (w[0].0 + w[1].0))
        } else {
            Some(0.5 * (hi_lower + lo_upper))
        };
        points.push(BoundaryPoint {
            column: col,
            value,
            orientation: Some(orientation),
            mixed,
        });
    }
    Ok(PhaseBoundary {
        column_axis: table.axes[c].clone(),
        along_axis: along.to_string(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> Vec<Axis> {
        vec![
            Axis::new("w", 1.0, 4.0, 7).unwrap(),
            Axis::new("theta", 0.2, 3.0, 15).unwrap(),
        ]
    }

    #[test]
    fn axis_values() {
        let a = Axis::new("theta", 0.2, 3.0, 15).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 15);
        assert_eq!(v[0], 0.2);
        assert_eq!(v[14], 3.0);
        assert!((v[1] - 0.4).abs() < 1e-12);
        assert_eq!(Axis::new("w", 2.0, 2.0, 1).unwrap().values(), vec![2.0]);
        assert!(Axis::new("w", 2.0, 1.0, 3).is_err());
        assert!(Axis::new("w", 1.0, 2.0, 0).is_err());
        assert_eq!(grid_points(&axes()).len(), 105);
    }

    #[test]
    fn synthetic_boundary() {
        let table = OutcomeTable::from_fn(&axes(), |p| {
            if p[1] > 0.5 * p[0] {
                Outcome::Blocked
            } else {
                Outcome::Crossed
            }
        });
        let b = phase_boundary(&table, "theta").unwrap();
        assert_eq!(b.column_axis, "w");
        assert_eq!(b.points.len(), 7);
        for p in &b.points {
            let v = p.value.unwrap();
            assert!((v - 0.5 * p.column).abs() <= 0.2, "{p:?}");
            assert_eq!(p.orientation, Some(Orientation::CrossedBelow));
            assert!(!p.mixed);
        }
        let (slope, _) = b.fit_through_origin().unwrap();
        assert!((slope - 0.5).abs() < 0.2 / 4.0 + 0.05);
    }

    #[test]
    fn uniform_column_is_absent() {
        let table = OutcomeTable::from_fn(&axes(), |p| {
            if p[0] < 2.0 || p[1] < 1.0 {
                Outcome::Crossed
            } else {
                Outcome::Blocked
            }
        });
        let b = phase_boundary(&table, "theta").unwrap();
        assert!(b.points[0].value.is_none());
        assert!(b.points[1].value.is_none());
        assert!(b.points[2].value.is_some());
        assert!(b.warnings().is_empty());
    }

    #[test]
    fn orientation_and_mixing() {
        let a = vec![
            Axis::new("w1", 1.0, 3.0, 3).unwrap(),
            Axis::new("w2", 1.0, 6.0, 6).unwrap(),
        ];
        let table = OutcomeTable::from_fn(&a, |p| {
            let blocked = if p[0] == 2.0 {
                p[1] == 2.0 || p[1] >= 5.0
            } else {
                p[1] >= 4.0
            };
            if blocked {
                Outcome::Blocked
            } else {
                Outcome::Crossed
            }
        });
        let b = phase_boundary(&table, "w2").unwrap();
        assert_eq!(b.points[0].value, Some(3.5));
        assert!(b.points[1].mixed);
        assert_eq!(b.warnings().len(), 1);
        let flipped = phase_boundary(&table, "w1").unwrap();
        assert_eq!(flipped.column_axis, "w2");
        assert!(phase_boundary(&table, "theta").is_err());
    }

    #[test]
    fn rows_sorted_and_csv() {
        let rows = vec![
            SweepRow {
                params: vec![2.0, 1.0],
                result: Err("boom, \"bad\"".into()),
                samples: Vec::new(),
            },
            SweepRow {
                params: vec![1.0, 3.0],
                result: Ok(PointSummary {
                    outcome: Outcome::Crossed,
                    reaction_integral: 0.5,
                    front_x: 7.0,
                }),
                samples: Vec::new(),
            },
        ];
        let t = OutcomeTable::new(vec!["w".into(), "theta".into()], rows);
        assert_eq!(t.rows[0].params, vec![1.0, 3.0]);
        assert_eq!(t.errors(), 1);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "w,theta,outcome,reaction_integral,front_x,error");
        assert_eq!(lines[1], "1,3,Crossed,0.5,7,");
        assert_eq!(lines[2], "2,1,Error,,,\"boom, 'bad'\"");
    }
}
