//! Obstacle scenarios and their rasterization into a diffusion map.
//!
//! All geometries share one frame: the front travels in `+x`, channels are
//! centered on the transverse midline `y_c` of the domain, and the mouth of
//! every waveguide sits at `x = 0`. Obstacles carry `b = b_inside`, the open
//! medium carries `b = 1`; a cell belongs to the region containing its center.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{front_profile, BistableParams, DiffusionMap, GridSpec, ScalarField};

/// Diffusion inside obstacles unless overridden.
pub const DEFAULT_B_INSIDE: f64 = 1e-5;
pub const DEFAULT_A: f64 = 0.3;
pub const DEFAULT_DX: f64 = 0.1;
pub const DEFAULT_DT: f64 = 1e-3;
/// Open channels must span at least this many cells.
pub const MIN_CHANNEL_CELLS: f64 = 3.0;
/// Required free length beyond the obstacle exit (in front-width units).
pub const OUTFLOW_MARGIN: f64 = 5.0;
/// Default distance of the initial front behind the obstacle.
pub const FRONT_OFFSET: f64 = 10.0;
/// Transverse periods of a checkerboard domain.
const CHECKER_PERIODS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScenarioKind {
    UniformGuide,
    Junction,
    Cone,
    ParallelGuides,
    Hole,
    Checkerboard,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::UniformGuide,
        ScenarioKind::Junction,
        ScenarioKind::Cone,
        ScenarioKind::ParallelGuides,
        ScenarioKind::Hole,
        ScenarioKind::Checkerboard,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::UniformGuide => "uniform",
            ScenarioKind::Junction => "junction",
            ScenarioKind::Cone => "cone",
            ScenarioKind::ParallelGuides => "parallel",
            ScenarioKind::Hole => "hole",
            ScenarioKind::Checkerboard => "checkerboard",
        }
    }

    /// Geometric parameters; those with a default are optional.
    fn geometry_keys(self) -> &'static [(&'static str, Option<f64>)] {
        match self {
            ScenarioKind::UniformGuide => &[("w", None)],
            ScenarioKind::Junction => &[("w1", None), ("w2", None)],
            ScenarioKind::Cone => &[("w", None), ("theta", None)],
            ScenarioKind::ParallelGuides => &[("w", None), ("d", None)],
            ScenarioKind::Hole => &[("radius", None), ("center_x", Some(f64::NAN))],
            ScenarioKind::Checkerboard => &[("w1", None), ("wb", Some(5.0)), ("rows", Some(1.0))],
        }
    }

    fn default_t_end(self) -> f64 {
        match self {
            ScenarioKind::UniformGuide => 50.0,
            ScenarioKind::Hole => 120.0,
            _ => 200.0,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', '-'], "");
        let kind = match norm.as_str() {
            "uniform" | "uniformguide" | "guide" => ScenarioKind::UniformGuide,
            "junction" => ScenarioKind::Junction,
            "cone" => ScenarioKind::Cone,
            "parallel" | "parallelguides" => ScenarioKind::ParallelGuides,
            "hole" => ScenarioKind::Hole,
            "checkerboard" | "checker" => ScenarioKind::Checkerboard,
            _ => {
                return Err(Error::InvalidParameter {
                    name: "kind",
                    reason: format!("unknown scenario kind `{s}`"),
                })
            }
        };
        Ok(kind)
    }
}

/// A concrete obstacle with all geometric parameters resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obstacle {
    /// Straight channel of width `w`; `w` at least the domain height means no walls.
    UniformGuide { w: f64 },
    /// Width `w1` for `x < 0`, `w2` for `x >= 0`.
    Junction { w1: f64, w2: f64 },
    /// Channel of width `w` opening at `x = 0` into a wedge whose edges leave
    /// the channel corners at angle `theta` from the channel walls.
    Cone { w: f64, theta: f64 },
    /// Two channels of width `w` at `y_c +- d/2` feeding a cavity at `x >= 0`.
    ParallelGuides { w: f64, d: f64 },
    /// Disk of radius `radius` centered at `(center_x, y_c)` in an open domain.
    Hole { radius: f64, center_x: f64 },
    /// `rows` rows of square blocks of side `wb - w1` and pitch `wb` starting
    /// at the domain's x-midpoint, gaps `w1` wide.
    Checkerboard { w1: f64, wb: f64, rows: usize },
}

impl Obstacle {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Obstacle::UniformGuide { .. } => ScenarioKind::UniformGuide,
            Obstacle::Junction { .. } => ScenarioKind::Junction,
            Obstacle::Cone { .. } => ScenarioKind::Cone,
            Obstacle::ParallelGuides { .. } => ScenarioKind::ParallelGuides,
            Obstacle::Hole { .. } => ScenarioKind::Hole,
            Obstacle::Checkerboard { .. } => ScenarioKind::Checkerboard,
        }
    }
}

/// Declarative, not yet validated description of a scenario: a kind plus
/// named numeric parameters. Missing parameters take defaults at build time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    kind: ScenarioKind,
    params: BTreeMap<String, f64>,
}

const COMMON_KEYS: &[&str] = &[
    "a", "s", "b_inside", "front_x0", "t_end", "dt", "dx", "dy", "x_min", "x_max", "y_min", "y_max", "mirror",
];

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            params: BTreeMap::new(),
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    /// Whether `name` is a parameter understood by this kind.
    pub fn accepts(&self, name: &str) -> bool {
        COMMON_KEYS.contains(&name) || self.kind.geometry_keys().iter().any(|(k, _)| *k == name)
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let name = if name == "R" { "radius" } else { name };
        if !self.accepts(name) {
            return Err(Error::InvalidParameter {
                name: "key",
                reason: format!("`{name}` is not a parameter of a {} scenario", self.kind),
            });
        }
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "value",
                reason: format!("`{name}` must be finite"),
            });
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self> {
        self.set(name, value)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    fn geometry(&self, key: &'static str) -> Result<f64> {
        match self.params.get(key) {
            Some(v) => Ok(*v),
            None => self
                .kind
                .geometry_keys()
                .iter()
                .find(|(k, _)| *k == key)
                .and_then(|(_, d)| *d)
                .ok_or(Error::InvalidParameter {
                    name: key,
                    reason: format!("required by a {} scenario", self.kind),
                }),
        }
    }

    fn obstacle(&self) -> Result<Obstacle> {
        let ob = match self.kind {
            ScenarioKind::UniformGuide => Obstacle::UniformGuide { w: self.geometry("w")? },
            ScenarioKind::Junction => Obstacle::Junction {
                w1: self.geometry("w1")?,
                w2: self.geometry("w2")?,
            },
            ScenarioKind::Cone => Obstacle::Cone {
                w: self.geometry("w")?,
                theta: self.geometry("theta")?,
            },
            ScenarioKind::ParallelGuides => Obstacle::ParallelGuides {
                w: self.geometry("w")?,
                d: self.geometry("d")?,
            },
            ScenarioKind::Hole => Obstacle::Hole {
                radius: self.geometry("radius")?,
                center_x: self.geometry("center_x")?,
            },
            ScenarioKind::Checkerboard => {
                let rows = self.geometry("rows")?;
                if rows < 1.0 || rows.fract() != 0.0 {
                    return Err(Error::InvalidParameter {
                        name: "rows",
                        reason: format!("{rows} is not a positive integer"),
                    });
                }
                Obstacle::Checkerboard {
                    w1: self.geometry("w1")?,
                    wb: self.geometry("wb")?,
                    rows: rows as usize,
                }
            }
        };
        Ok(ob)
    }

    /// Resolves defaults and validates every invariant.
    pub fn build(&self) -> Result<Scenario> {
        let p = |k: &str, d: f64| self.params.get(k).copied().unwrap_or(d);
        let params = BistableParams::new(p("a", DEFAULT_A), p("s", 1.0))?;
        let unit = 1.0 / params.s().sqrt();
        let mut obstacle = self.obstacle()?;
        check_geometry(&obstacle)?;

        let dx = p("dx", DEFAULT_DX);
        let dy = p("dy", dx);
        let (mut x_min, mut x_max, y_half) = default_extents(&obstacle, unit);
        x_min = p("x_min", x_min);
        x_max = p("x_max", x_max);
        let y_min = p("y_min", -y_half);
        let y_max = p("y_max", y_half);
        let (domain, mirror_axis) = if p("mirror", 0.0) != 0.0 {
            let axis = 0.5 * (y_min + y_max);
            (GridSpec::from_extents(x_min, x_max, axis, y_max, dx, dy)?, Some(axis))
        } else {
            (GridSpec::from_extents(x_min, x_max, y_min, y_max, dx, dy)?, None)
        };
        if let Obstacle::Hole { center_x, .. } = &mut obstacle {
            if center_x.is_nan() {
                *center_x = 0.5 * (domain.x_min() + domain.x_max());
            }
        }

        let mut scenario = Scenario {
            obstacle,
            domain,
            mirror_axis,
            params,
            b_inside: p("b_inside", DEFAULT_B_INSIDE),
            front_x0: f64::NAN,
            t_end: p("t_end", self.kind.default_t_end() * unit * unit),
            dt: p("dt", DEFAULT_DT),
        };
        scenario.front_x0 = p("front_x0", scenario.default_front_x0());
        scenario.validate()?;
        Ok(scenario)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} must be positive"),
        })
    }
}

fn check_geometry(ob: &Obstacle) -> Result<()> {
    match *ob {
        Obstacle::UniformGuide { w } => positive("w", w),
        Obstacle::Junction { w1, w2 } => {
            positive("w1", w1)?;
            positive("w2", w2)
        }
        Obstacle::Cone { w, theta } => {
            positive("w", w)?;
            positive("theta", theta)?;
            if theta > PI {
                return Err(Error::InvalidParameter {
                    name: "theta",
                    reason: format!("{theta} exceeds pi"),
                });
            }
            Ok(())
        }
        Obstacle::ParallelGuides { w, d } => {
            positive("w", w)?;
            positive("d", d)?;
            if d <= w {
                return Err(Error::InvalidParameter {
                    name: "d",
                    reason: format!("separation {d} must exceed the width {w}"),
                });
            }
            Ok(())
        }
        Obstacle::Hole { radius, .. } => positive("radius", radius),
        Obstacle::Checkerboard { w1, wb, .. } => {
            positive("w1", w1)?;
            positive("wb", wb)?;
            if w1 >= wb {
                return Err(Error::InvalidParameter {
                    name: "w1",
                    reason: format!("gap {w1} must be smaller than the pitch {wb}"),
                });
            }
            Ok(())
        }
    }
}

/// Desk-scale domain `(x_min, x_max, y_half)` sized to the obstacle.
fn default_extents(ob: &Obstacle, unit: f64) -> (f64, f64, f64) {
    match *ob {
        Obstacle::UniformGuide { w } => (0.0, 60.0 * unit, 0.5 * w + 3.0 * unit),
        Obstacle::Junction { w1, w2 } => (-20.0 * unit, 20.0 * unit, 0.5 * w1.max(w2) + 5.0 * unit),
        Obstacle::Cone { w, .. } => (-15.0 * unit, 15.0 * unit, 0.5 * w + 12.0 * unit),
        Obstacle::ParallelGuides { w, d } => (-15.0 * unit, 15.0 * unit, 0.5 * (d + w) + 12.0 * unit),
        Obstacle::Hole { radius, center_x } => {
            let c = if center_x.is_nan() {
                radius + 20.0 * unit
            } else {
                center_x
            };
            (0.0, 2.0 * c, radius + 10.0 * unit)
        }
        Obstacle::Checkerboard { wb, rows, .. } => {
            let half = (20.0 * unit).max(rows as f64 * wb + 10.0 * unit);
            (0.0, 2.0 * half, 0.5 * CHECKER_PERIODS as f64 * wb)
        }
    }
}

/// A validated scenario: obstacle, grid, physics and run duration.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub obstacle: Obstacle,
    /// Simulated grid. With mirroring only the half above the axis is kept.
    pub domain: GridSpec,
    /// Symmetry line of a mirrored scenario; its face is a zero-flux wall.
    pub mirror_axis: Option<f64>,
    pub params: BistableParams,
    pub b_inside: f64,
    pub front_x0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        self.obstacle.kind()
    }

    /// Natural length scale `1/sqrt(s)`: the front width shrinks with `s`.
    pub fn length_unit(&self) -> f64 {
        1.0 / self.params.s().sqrt()
    }

    fn y_center(&self) -> f64 {
        self.mirror_axis
            .unwrap_or(0.5 * (self.domain.y_min() + self.domain.y_max()))
    }

    /// Height of the physical domain, mirrored half included.
    fn y_extent(&self) -> f64 {
        match self.mirror_axis {
            Some(axis) => 2.0 * (self.domain.y_max() - axis),
            None => self.domain.y_max() - self.domain.y_min(),
        }
    }

    fn y_lo(&self) -> f64 {
        self.y_center() - 0.5 * self.y_extent()
    }

    /// Ratio of physical to simulated area: 2 when mirrored.
    pub fn area_factor(&self) -> f64 {
        if self.mirror_axis.is_some() {
            2.0
        } else {
            1.0
        }
    }

    fn eps(&self) -> f64 {
        1e-9 * self.domain.dx().min(self.domain.dy())
    }

    /// Left end of the obstacle, where the region of interest begins.
    pub fn obstacle_start_x(&self) -> f64 {
        match self.obstacle {
            Obstacle::UniformGuide { .. } => self.domain.x_min(),
            Obstacle::Junction { .. } | Obstacle::Cone { .. } | Obstacle::ParallelGuides { .. } => 0.0,
            Obstacle::Hole { radius, center_x } => center_x - radius,
            Obstacle::Checkerboard { .. } => self.checker_start(),
        }
    }

    fn checker_start(&self) -> f64 {
        0.5 * (self.domain.x_min() + self.domain.x_max())
    }

    fn default_front_x0(&self) -> f64 {
        self.obstacle_start_x() + FRONT_OFFSET * self.length_unit() * self.start_sign()
    }

    fn start_sign(&self) -> f64 {
        // everything but the plain guide seeds its front behind the obstacle
        match self.obstacle {
            Obstacle::UniformGuide { .. } => 1.0,
            _ => -1.0,
        }
    }

    /// Whether the plain guide has no walls (spans the full domain height).
    fn full_width_guide(&self, w: f64) -> bool {
        w >= self.y_extent() - self.eps()
    }

    /// Checks the scenario invariants, including channel resolution.
    pub fn validate(&self) -> Result<()> {
        check_geometry(&self.obstacle)?;
        if !(self.b_inside > 0.0 && self.b_inside < 1.0) {
            return Err(Error::InvalidParameter {
                name: "b_inside",
                reason: format!("{} not in (0, 1)", self.b_inside),
            });
        }
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        let g = &self.domain;
        if !(self.front_x0 > g.x_min() && self.front_x0 < g.x_max()) {
            return Err(Error::InvalidParameter {
                name: "front_x0",
                reason: format!("{} outside the domain [{}, {}]", self.front_x0, g.x_min(), g.x_max()),
            });
        }
        let height = self.y_extent();
        let fits = |name: &'static str, w: f64| -> Result<()> {
            if w > height + self.eps() {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("width {w} exceeds the domain height {height}"),
                })
            } else {
                Ok(())
            }
        };
        match self.obstacle {
            Obstacle::UniformGuide { w } => {
                if !self.full_width_guide(w) {
                    self.resolved("w", w)?;
                }
            }
            Obstacle::Junction { w1, w2 } => {
                fits("w1", w1)?;
                fits("w2", w2)?;
                self.resolved("w1", w1)?;
                self.resolved("w2", w2)?;
            }
            Obstacle::Cone { w, .. } => {
                fits("w", w)?;
                self.resolved("w", w)?;
            }
            Obstacle::ParallelGuides { w, d } => {
                fits("d", d + w)?;
                self.resolved("w", w)?;
            }
            Obstacle::Hole { radius, center_x } => {
                self.resolved("radius", 0.5 * height - radius)?;
                if center_x - radius <= g.x_min() {
                    return Err(Error::InvalidParameter {
                        name: "center_x",
                        reason: "hole reaches the inflow wall".into(),
                    });
                }
            }
            Obstacle::Checkerboard { w1, .. } => self.resolved("w1", w1)?,
        }
        if let Some(exit) = self.obstacle_exit_x() {
            let margin = OUTFLOW_MARGIN * self.length_unit();
            if exit + margin > g.x_max() + self.eps() {
                return Err(Error::InvalidParameter {
                    name: "x_max",
                    reason: format!(
                        "domain ends at {} but the obstacle exit {exit} needs {margin} of free outflow",
                        g.x_max()
                    ),
                });
            }
        }
        Ok(())
    }

    fn resolved(&self, name: &'static str, width: f64) -> Result<()> {
        let min_width = MIN_CHANNEL_CELLS * self.domain.dx().max(self.domain.dy());
        if width < min_width - self.eps() {
            return Err(Error::UnderResolved { name, width, min_width });
        }
        Ok(())
    }

    /// x-coordinate where the obstacle or transition region ends; `None` for
    /// the uniform guide, which has none.
    pub fn obstacle_exit_x(&self) -> Option<f64> {
        match self.obstacle {
            Obstacle::UniformGuide { .. } => None,
            Obstacle::Junction { .. } | Obstacle::Cone { .. } | Obstacle::ParallelGuides { .. } => Some(0.0),
            Obstacle::Hole { radius, center_x } => Some(center_x + radius),
            Obstacle::Checkerboard { wb, rows, .. } => Some(self.checker_start() + rows as f64 * wb),
        }
    }

    /// Membership of the point `(x, y)` in the open medium (`b = 1`).
    pub fn is_open(&self, x: f64, y: f64) -> bool {
        let eps = self.eps();
        let yc = self.y_center();
        let dy = (y - yc).abs();
        match self.obstacle {
            Obstacle::UniformGuide { w } => self.full_width_guide(w) || dy < 0.5 * w - eps,
            Obstacle::Junction { w1, w2 } => {
                let w = if x < 0.0 { w1 } else { w2 };
                dy < 0.5 * w - eps
            }
            Obstacle::Cone { w, theta } => {
                let rel_y = dy - 0.5 * w;
                if rel_y < -eps {
                    return true;
                }
                // angle of the point seen from the nearer channel corner
                let phi = rel_y.max(0.0).atan2(x);
                phi < theta - 1e-12
            }
            Obstacle::ParallelGuides { w, d } => x >= 0.0 || (dy - 0.5 * d).abs() < 0.5 * w - eps,
            Obstacle::Hole { radius, center_x } => {
                let r2 = (x - center_x).powi(2) + (y - yc).powi(2);
                r2.sqrt() > radius + eps
            }
            Obstacle::Checkerboard { w1, wb, rows } => {
                let x_rel = x - self.checker_start();
                if x_rel < 0.0 {
                    return true;
                }
                let row = (x_rel / wb).floor();
                if row >= rows as f64 {
                    return true;
                }
                // gaps between blocks along x
                if x_rel - row * wb > wb - w1 - eps {
                    return true;
                }
                // gaps across y are centered half a pitch above each wall-centered block
                let phase = (y - self.y_lo()) / wb - 0.5;
                let k = phase.round();
                ((phase - k) * wb).abs() < 0.5 * w1 - eps
            }
        }
    }

    /// Cells that receive the initial front; obstacles start at `u = 0`.
    fn is_seeded(&self, x: f64, y: f64) -> bool {
        if !self.is_open(x, y) {
            return false;
        }
        match self.obstacle {
            Obstacle::Cone { w, .. } => x >= 0.0 || (y - self.y_center()).abs() < 0.5 * w,
            _ => true,
        }
    }

    /// Rows on which the front position is measured: the channel centerlines.
    pub fn probe_rows(&self) -> Vec<usize> {
        let yc = self.y_center();
        let ys = match self.obstacle {
            Obstacle::ParallelGuides { d, .. } => vec![yc - 0.5 * d, yc + 0.5 * d],
            Obstacle::Checkerboard { wb, .. } => {
                let periods = (self.y_extent() / wb).round().max(1.0) as usize;
                let lo = self.y_lo();
                (0..periods).map(|k| lo + (k as f64 + 0.5) * wb).collect()
            }
            _ => vec![yc],
        };
        let mut rows: Vec<usize> = ys
            .into_iter()
            .map(|y| match self.mirror_axis {
                Some(axis) if y < axis => self.domain.row_nearest(2.0 * axis - y),
                _ => self.domain.row_nearest(y),
            })
            .collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    /// The y-independent exact front at `front_x0`, restricted to the inflow
    /// channel.
    pub fn initial_field(&self) -> ScalarField {
        let mut u = front_profile(self.domain, self.front_x0, self.params);
        let g = self.domain;
        let values = u.values_mut();
        for j in 0..g.ny() {
            let y = g.y(j);
            for i in 0..g.nx() {
                if !self.is_seeded(g.x(i), y) {
                    values[g.index(i, j)] = 0.0;
                }
            }
        }
        u
    }
}

/// Samples the scenario's obstacles at cell centers.
pub fn rasterize(s: &Scenario) -> Result<DiffusionMap> {
    s.validate()?;
    let g = s.domain;
    let mut values = Vec::with_capacity(g.len());
    for j in 0..g.ny() {
        let y = g.y(j);
        for i in 0..g.nx() {
            values.push(if s.is_open(g.x(i), y) { 1.0 } else { s.b_inside });
        }
    }
    DiffusionMap::new(g, values)
}

/// See [`Scenario::obstacle_exit_x`].
pub fn obstacle_exit_x(s: &Scenario) -> Option<f64> {
    s.obstacle_exit_x()
}
