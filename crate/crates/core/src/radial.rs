//! Radially symmetric static states in the plane, found by the shifted
//! relaxation `-Δu^{k+1} + K u^{k+1} = K u^k + R(u^k)` with
//! `Δu = u_rr + u_r / r`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::field::{reaction, BistableParams};

/// Condition imposed at `r = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OriginCondition {
    /// `u(0) = value`.
    Pinned(f64),
    /// `u_r(0) = 0`.
    Neumann,
}

/// Starting iterate of the relaxation.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialGuess {
    Zero,
    Constant(f64),
    /// `1 / (1 + exp((r - center) / width))`.
    Sigmoid {
        center: f64,
        width: f64,
    },
    Values(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialProblem {
    pub l: f64,
    pub n: usize,
    pub a: f64,
    pub k: f64,
    pub origin: OriginCondition,
    pub max_iter: usize,
    pub tol: f64,
    pub initial: InitialGuess,
}

impl Default for RadialProblem {
    fn default() -> Self {
        Self {
            l: 10.0,
            n: 400,
            a: 0.3,
            k: 2.0,
            origin: OriginCondition::Pinned(1.0),
            max_iter: 1000,
            tol: 1e-9,
            initial: InitialGuess::Zero,
        }
    }
}

impl RadialProblem {
    pub fn with_radius(mut self, l: f64) -> Self {
        self.l = l;
        self
    }

    pub fn with_points(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_origin(mut self, origin: OriginCondition) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_initial(mut self, initial: InitialGuess) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad("L", format!("{} must be positive", self.l));
        }
        if self.n < 10 {
            return bad("n", format!("{} grid points, need at least 10", self.n));
        }
        if !(self.k > 0.0) {
            return bad("K", format!("{} must be positive", self.k));
        }
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad("a", format!("{} not in (0, 1)", self.a));
        }
        if let OriginCondition::Pinned(u0) = self.origin {
            if !(0.0..=1.0).contains(&u0) {
                return bad("u0", format!("{u0} not in [0, 1]"));
            }
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("{} must be positive", self.tol));
        }
        if let InitialGuess::Values(v) = &self.initial {
            if v.len() != self.n {
                return Err(Error::LengthMismatch {
                    expected: self.n,
                    got: v.len(),
                });
            }
        }
        if let InitialGuess::Sigmoid { width, .. } = self.initial {
            if !(width > 0.0) {
                return bad("width", format!("{width} must be positive"));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.l / (self.n - 1) as f64
    }

    pub fn radii(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n).map(|i| i as f64 * h).collect()
    }

    fn start(&self, r: &[f64]) -> Vec<f64> {
        let mut u: Vec<f64> = match &self.initial {
            InitialGuess::Zero => vec![0.0; self.n],
            InitialGuess::Constant(c) => vec![*c; self.n],
            InitialGuess::Sigmoid { center, width } => r.iter().map(|&r| sigmoid(r, *center, *width)).collect(),
            InitialGuess::Values(v) => v.clone(),
        };
        if let OriginCondition::Pinned(u0) = self.origin {
            u[0] = u0;
        }
        u
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialSolution {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Max-norm difference of the last two iterates.
    pub residual: f64,
}

impl RadialSolution {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,u")?;
        for (r, u) in self.r.iter().zip(&self.u) {
            writeln!(out, "{r},{u}")?;
        }
        Ok(())
    }

    pub fn is_monotone_nonincreasing(&self, slack: f64) -> bool {
        self.u.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

fn sigmoid(r: f64, center: f64, width: f64) -> f64 {
    1.0 / (1.0 + ((r - center) / width).exp())
}

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    // forward-sweep scratch
    c: Vec<f64>,
}

impl Tridiagonal {
    fn solve(&mut self, rhs: &mut [f64]) {
        let n = self.diag.len();
        self.c[0] = self.upper[0] / self.diag[0];
        rhs[0] /= self.diag[0];
        for i in 1..n {
            let m = self.diag[i] - self.lower[i] * self.c[i - 1];
            self.c[i] = self.upper[i] / m;
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.c[i] * rhs[i + 1];
        }
    }
}

fn assemble(p: &RadialProblem, r: &[f64]) -> Tridiagonal {
    let n = p.n;
    let h = p.spacing();
    let h2 = h * h;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    match p.origin {
        OriginCondition::Pinned(_) => diag[0] = 1.0,
        OriginCondition::Neumann => {
            // Δu(0) = 2 u_rr(0) on the symmetric stencil
            diag[0] = 4.0 / h2 + p.k;
            upper[0] = -4.0 / h2;
        }
    }
    for i in 1..n - 1 {
        let t = 1.0 / (2.0 * r[i] * h);
        lower[i] = -(1.0 / h2 - t);
        diag[i] = 2.0 / h2 + p.k;
        upper[i] = -(1.0 / h2 + t);
    }
    // ghost u_n = u_{n-2}
    lower[n - 1] = -2.0 / h2;
    diag[n - 1] = 2.0 / h2 + p.k;
    Tridiagonal {
        lower,
        diag,
        upper,
        c: vec![0.0; n],
    }
}

/// One linear solve per call: maps `u^k` to `u^{k+1}`.
pub struct Relaxation {
    problem: RadialProblem,
    params: BistableParams,
    system: Tridiagonal,
    r: Vec<f64>,
}

impl Relaxation {
    pub fn new(p: &RadialProblem) -> Result<Self> {
        p.validate()?;
        let r = p.radii();
        Ok(Self {
            params: BistableParams::with_threshold(p.a)?,
            system: assemble(p, &r),
            problem: p.clone(),
            r,
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    /// The problem's starting iterate.
    pub fn initial(&self) -> Vec<f64> {
        self.problem.start(&self.r)
    }

    pub fn step(&mut self, u: &[f64], next: &mut [f64]) {
        let p = &self.problem;
        for (nx, &ui) in next.iter_mut().zip(u) {
            *nx = p.k * ui + reaction(ui, self.params);
        }
        if let OriginCondition::Pinned(u0) = p.origin {
            next[0] = u0;
        }
        self.system.solve(next);
    }
}

/// Iterates the relaxation until successive profiles differ by at most `tol`
/// in max norm.
pub fn relax_solve(p: &RadialProblem) -> Result<RadialSolution> {
    let mut relax = Relaxation::new(p)?;
    let mut u = relax.initial();
    let mut next = vec![0.0; p.n];
    let mut residual = f64::INFINITY;
    for it in 1..=p.max_iter {
        relax.step(&u, &mut next);
        residual = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut u, &mut next);
        if !residual.is_finite() {
            break;
        }
        if residual <= p.tol {
            return Ok(RadialSolution {
                r: relax.r,
                u,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: p.max_iter,
        residual,
    })
}

/// L∞ distance between the profile and `1 / (1 + exp((r - center) / width))`.
pub fn compare_to_kink(profile: &RadialSolution, center: f64, width: f64) -> f64 {
    profile
        .r
        .iter()
        .zip(&profile.u)
        .map(|(&r, &u)| (u - sigmoid(r, center, width)).abs())
        .fold(0.0, f64::max)
}

/// Max-norm residual `|u_rr + u_r/r + R(u)|` of the continuous equation on
/// `r in [r_lo, r_hi]`, with derivatives from fourth-order central
/// differences so the result measures the profile's own discretization error.
pub fn continuous_residual(sol: &RadialSolution, a: f64, r_lo: f64, r_hi: f64) -> f64 {
    let params = match BistableParams::with_threshold(a) {
        Ok(p) => p,
        Err(_) => return f64::NAN,
    };
    let n = sol.u.len();
    if n < 5 {
        return f64::NAN;
    }
    let h = sol.r[1] - sol.r[0];
    let u = &sol.u;
    let mut worst: f64 = 0.0;
    for i in 2..n - 2 {
        let r = sol.r[i];
        if r < r_lo || r > r_hi {
            continue;
        }
        let urr = (-u[i + 2] + 16.0 * u[i + 1] - 30.0 * u[i] + 16.0 * u[i - 1] - u[i - 2]) / (12.0 * h * h);
        let ur = (-u[i + 2] + 8.0 * u[i + 1] - 8.0 * u[i - 1] + u[i - 2]) / (12.0 * h);
        worst = worst.max((urr + ur / r + reaction(u[i], params)).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_matches_dense() {
        let mut t = Tridiagonal {
            lower: vec![0.0, -1.0, -1.0, -2.0],
            diag: vec![4.0, 4.0, 4.0, 3.0],
            upper: vec![-1.0, -1.0, -1.0, 0.0],
            c: vec![0.0; 4],
        };
        let x = [1.0, 2.0, -1.0, 0.5];
        let mut b: Vec<f64> = (0..4)
            .map(|i| {
                let mut s = t.diag[i] * x[i];
                if i > 0 {
                    s += t.lower[i] * x[i - 1];
                }
                if i < 3 {
                    s += t.upper[i] * x[i + 1];
                }
                s
            })
            .collect();
        t.solve(&mut b);
        for (got, want) in b.iter().zip(x) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn pinned_solution() {
        let sol = relax_solve(&RadialProblem::default()).unwrap();
        assert!(sol.iterations <= 200, "{} iterations", sol.iterations);
        assert_eq!(sol.u[0], 1.0);
        assert!(sol.is_monotone_nonincreasing(1e-12));
        assert!(*sol.u.last().unwrap() < 0.01);
        assert!(sol.u.iter().all(|&u| (0.0..=1.0).contains(&u)));
    }

    #[test]
    fn narrow_disc_stays_up() {
        let sol = relax_solve(&RadialProblem::default().with_radius(2.0)).unwrap();
        assert!(*sol.u.last().unwrap() > 0.5);
        assert!(compare_to_kink(&sol, 0.0, 0.5) > 0.1);
    }

    #[test]
    fn free_origin_collapses() {
        for init in [
            InitialGuess::Zero,
            InitialGuess::Sigmoid {
                center: 2.0,
                width: 0.5,
            },
        ] {
            let p = RadialProblem::default()
                .with_origin(OriginCondition::Neumann)
                .with_initial(init);
            let sol = relax_solve(&p).unwrap();
            assert!(sol.u.iter().all(|u| u.abs() < 1e-8));
        }
    }

    #[test]
    fn exact_sigmoid_distance() {
        let p = RadialProblem::default().with_points(50);
        let r = p.radii();
        let u: Vec<f64> = r.iter().map(|&r| sigmoid(r, 1.0, 0.7)).collect();
        let sol = RadialSolution {
            r,
            u,
            iterations: 0,
            residual: 0.0,
        };
        assert_eq!(compare_to_kink(&sol, 1.0, 0.7), 0.0);
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(relax_solve(&RadialProblem::default().with_points(5)).is_err());
        assert!(relax_solve(&RadialProblem::default().with_radius(-1.0)).is_err());
        assert!(relax_solve(&RadialProblem {
            origin: OriginCondition::Pinned(1.5),
            ..RadialProblem::default()
        })
        .is_err());
        let p = RadialProblem {
            max_iter: 3,
            ..RadialProblem::default()
        };
        assert!(matches!(
            relax_solve(&p),
            Err(Error::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let sol = relax_solve(&RadialProblem::default().with_points(20)).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("r,u\n0,1\n"));
        assert_eq!(text.lines().count(), 21);
    }
}
