//! Grids, cell-centered fields and the bistable reaction law.
//!
//! Storage is row-major with `index = j * nx + i` (`i` runs fastest). Cell
//! `(i, j)` is centered at `(x0 + i * dx, y0 + j * dy)`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Uniform rectangular grid of cell centers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    x0: f64,
    y0: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 3 {
            return Err(Error::InvalidGrid(format!("nx = {nx}, need at least 3")));
        }
        if ny < 1 {
            return Err(Error::InvalidGrid("ny must be at least 1".into()));
        }
        if !(dx > 0.0 && dx.is_finite()) || !(dy > 0.0 && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacings must be positive, got {dx}, {dy}")));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { nx, ny, dx, dy, x0, y0 })
    }

    /// Grid whose cells tile the rectangle `[x_min, x_max] x [y_min, y_max]`
    /// exactly; walls sit on cell faces. Extents are rounded to whole cells.
    pub fn from_extents(x_min: f64, x_max: f64, y_min: f64, y_max: f64, dx: f64, dy: f64) -> Result<Self> {
        if !(x_max > x_min) || !(y_max > y_min) {
            return Err(Error::InvalidGrid(format!(
                "empty extents [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        if !(dx > 0.0) || !(dy > 0.0) {
            return Err(Error::InvalidGrid(format!("spacings must be positive, got {dx}, {dy}")));
        }
        let nx = ((x_max - x_min) / dx).round().max(1.0) as usize;
        let ny = ((y_max - y_min) / dy).round().max(1.0) as usize;
        Self::new(nx, ny, dx, dy, x_min + 0.5 * dx, y_min + 0.5 * dy)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Left wall (face) of the domain.
    pub fn x_min(&self) -> f64 {
        self.x0 - 0.5 * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + (self.nx as f64 - 0.5) * self.dx
    }

    pub fn y_min(&self) -> f64 {
        self.y0 - 0.5 * self.dy
    }

    pub fn y_max(&self) -> f64 {
        self.y0 + (self.ny as f64 - 0.5) * self.dy
    }

    pub fn area(&self) -> f64 {
        self.len() as f64 * self.cell_area()
    }

    /// Row whose cell centers lie closest to `y` (ties go to the upper row).
    pub fn row_nearest(&self, y: f64) -> usize {
        let j = ((y - self.y0) / self.dy + 0.5).floor();
        j.clamp(0.0, (self.ny - 1) as f64) as usize
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}

/// The unknown `u` sampled at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn filled(grid: GridSpec, value: f64) -> Self {
        assert!(value.is_finite(), "fill value must be finite");
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self::filled(grid, 0.0)
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            let y = grid.y(j);
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), y));
            }
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for the single writer. Callers that may produce
    /// non-finite values must re-check with [`ScalarField::validate`].
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn validate(&self) -> Result<()> {
        check_finite(&self.values)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let nx = self.grid.nx();
        &self.values[j * nx..(j + 1) * nx]
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Diffusion coefficient `b(x, y)`, strictly positive and at most 1.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionMap {
    grid: GridSpec,
    values: Vec<f64>,
}

impl DiffusionMap {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        if let Some(bad) = values.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
            return Err(Error::InvalidParameter {
                name: "b",
                reason: format!("diffusion value {bad} outside (0, 1]"),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn uniform(grid: GridSpec, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Cells with full diffusion, i.e. outside every obstacle.
    pub fn open_cells(&self) -> usize {
        self.values.iter().filter(|&&b| b == 1.0).count()
    }
}

/// Threshold `a` of the cubic and the nonlinearity scale `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BistableParams {
    a: f64,
    s: f64,
}

impl BistableParams {
    pub fn new(a: f64, s: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter {
                name: "a",
                reason: format!("{a} not in (0, 1)"),
            });
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: format!("{s} must be positive"),
            });
        }
        Ok(Self { a, s })
    }

    pub fn with_threshold(a: f64) -> Result<Self> {
        Self::new(a, 1.0)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Speed of the exact traveling front, `sqrt(s/2) (1 - 2a)`.
    pub fn front_speed(&self) -> f64 {
        (0.5 * self.s).sqrt() * (1.0 - 2.0 * self.a)
    }
}

impl Default for BistableParams {
    fn default() -> Self {
        Self { a: 0.3, s: 1.0 }
    }
}

/// `s u (1 - u) (u - a)`.
#[inline]
pub fn reaction(u: f64, p: BistableParams) -> f64 {
    p.s * u * (1.0 - u) * (u - p.a)
}

/// Value of the exact front `1 / (1 + exp(sqrt(s/2) (x - center)))`.
#[inline]
pub fn front_value(x: f64, center_x: f64, p: BistableParams) -> f64 {
    1.0 / (1.0 + ((0.5 * p.s).sqrt() * (x - center_x)).exp())
}

/// y-independent exact front centered at `center_x`: 1 behind, 0 ahead.
///
/// For `s != 1` the coordinate is rescaled by `sqrt(s)`, which is the exact
/// front of the scaled equation.
pub fn front_profile(grid: GridSpec, center_x: f64, p: BistableParams) -> ScalarField {
    let row: Vec<f64> = (0..grid.nx()).map(|i| front_value(grid.x(i), center_x, p)).collect();
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.ny() {
        values.extend_from_slice(&row);
    }
    ScalarField { grid, values }
}

/// Midpoint rule over cells.
pub fn integrate(field: &ScalarField) -> f64 {
    field.values.iter().sum::<f64>() * field.grid.cell_area()
}

/// Writes `nx ny dx dy t` followed by the values, one grid row per line.
pub fn write_snapshot<W: Write>(mut out: W, grid: &GridSpec, values: &[f64], t: f64) -> Result<()> {
    writeln!(out, "{} {} {} {} {}", grid.nx(), grid.ny(), grid.dx(), grid.dy(), t)?;
    let mut line = String::new();
    for row in values.chunks(grid.nx()) {
        line.clear();
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                line.push(' ');
            }
            line.push_str(&v.to_string());
        }
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// A parsed snapshot file. The file carries no origin, so the grid's first
/// cell center is placed at `(dx/2, dy/2)`.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub field: ScalarField,
    pub t: f64,
}

pub fn read_snapshot<R: BufRead>(input: R) -> Result<Snapshot> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Snapshot("empty input".into()))??;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 5 {
        return Err(Error::Snapshot(format!("header has {} fields, expected 5", head.len())));
    }
    let bad = |what: &str| Error::Snapshot(format!("cannot parse {what}"));
    let nx: usize = head[0].parse().map_err(|_| bad("nx"))?;
    let ny: usize = head[1].parse().map_err(|_| bad("ny"))?;
    let dx: f64 = head[2].parse().map_err(|_| bad("dx"))?;
    let dy: f64 = head[3].parse().map_err(|_| bad("dy"))?;
    let t: f64 = head[4].parse().map_err(|_| bad("t"))?;
    let grid = GridSpec::new(nx, ny, dx, dy, 0.5 * dx, 0.5 * dy)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        for tok in line?.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad("value"))?);
        }
    }
    let field = ScalarField::new(grid, values)?;
    Ok(Snapshot { field, t })
}
