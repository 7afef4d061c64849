//! Reduced model of a kink meeting a widening: closed-form integrals of the
//! reaction term over the exact front, the junction drive `r(h)`, the cone
//! drive `r_theta`, and the thresholds they imply.
//!
//! The integrals use the front in its natural variable, `U(z) = 1/(1+e^z)`;
//! one unit of `z` is `sqrt(2)` units of length.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Slope of the linear cone threshold `theta = slope * w` at `a = 0.3` when the
/// drive coefficient `1 - 2a` is replaced by 0.16.
pub const SIMPLIFIED_CONE_SLOPE: f64 = 0.36;

/// Width above which transverse modes stop damping the front: `w* = 2 pi`.
pub const CRITICAL_WIDTH: f64 = 2.0 * PI;

fn check_a(a: f64, hi: f64) -> Result<()> {
    if a > 0.0 && a < hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "a",
            reason: format!("{a} not in (0, {hi})"),
        })
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} must be positive"),
        })
    }
}

/// `1 / (1 + e^y)` without overflow.
#[inline]
fn logistic_tail(y: f64) -> f64 {
    if y > 0.0 {
        let e = (-y).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + y.exp())
    }
}

/// `ln(1 + e^y)` without overflow.
#[inline]
fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

/// Speed of the planar front, `sqrt(1/2) (1 - 2a)`.
pub fn kink_speed(a: f64) -> f64 {
    (1.0 - 2.0 * a) / SQRT_2
}

/// `int_y^inf R(U(z)) dz = 1/(2(1+e^y)^2) - a/(1+e^y)`.
pub fn tail_integral_j0(y: f64, a: f64) -> f64 {
    let u = logistic_tail(y);
    0.5 * u * u - a * u
}

/// `int_-inf^y R(U(z)) dz`, the complement of [`tail_integral_j0`].
pub fn head_integral(y: f64, a: f64) -> f64 {
    full_line_j0(a) - tail_integral_j0(y, a)
}

/// `int R(U(z)) dz` over the whole line.
pub fn full_line_j0(a: f64) -> f64 {
    0.5 - a
}

/// `int_y^inf R(U(z)) z dz
///   = (1/2) [y/(1+e^y)^2 - (1+2ay)/(1+e^y) + (2a-1)(y - ln(1+e^y))]`.
pub fn tail_moment_j1(y: f64, a: f64) -> f64 {
    if y == f64::NEG_INFINITY {
        return full_line_j1();
    }
    if y == f64::INFINITY {
        return 0.0;
    }
    let u = logistic_tail(y);
    // y - ln(1+e^y) = -ln(1+e^-y)
    0.5 * (y * u * u - (1.0 + 2.0 * a * y) * u - (2.0 * a - 1.0) * softplus(-y))
}

/// First moment over the whole line; independent of `a`.
pub fn full_line_j1() -> f64 {
    -0.5
}

/// Junction between a channel of width `w1` and one of width `w2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JunctionModel {
    pub w1: f64,
    pub w2: f64,
    pub a: f64,
}

impl JunctionModel {
    pub fn new(w1: f64, w2: f64, a: f64) -> Result<Self> {
        check_positive("w1", w1)?;
        check_positive("w2", w2)?;
        check_a(a, 0.5)?;
        Ok(Self { w1, w2, a })
    }
}

/// Growth rate of `int u` for a 1D kink centered at `h`:
/// `w1 (1/2 - a) + (w1 - w2) (a/(1+e^h) - 1/(2(1+e^h)^2))`.
pub fn junction_drive_r(h: f64, m: &JunctionModel) -> f64 {
    let u = logistic_tail(h);
    m.w1 * (0.5 - m.a) + (m.w1 - m.w2) * (m.a * u - 0.5 * u * u)
}

/// Infimum of `r(h)` and its location. For a widening it is attained where
/// the kink's value at the junction equals `a`, i.e. `h = ln(1/a - 1)`; for a
/// narrowing or a straight guide it is approached as `h -> -inf`.
pub fn junction_min_drive(m: &JunctionModel) -> (Option<f64>, f64) {
    if m.w2 > m.w1 {
        let h = (1.0 / m.a - 1.0).ln();
        (Some(h), m.w1 * (0.5 - m.a) - (m.w2 - m.w1) * 0.5 * m.a * m.a)
    } else {
        (None, m.w1.min(m.w2) * (0.5 - m.a))
    }
}

/// Smallest `w2` at which a channel of width `w1` can trap the kink.
pub fn junction_trapping_width(w1: f64, a: f64) -> Result<f64> {
    check_positive("w1", w1)?;
    check_a(a, 0.5)?;
    Ok(w1 * (1.0 + (1.0 - 2.0 * a) / (a * a)))
}

/// Lower end of the bracket searched for trapping roots.
pub const ROOT_SEARCH_MIN: f64 = -50.0;
pub const ROOT_SEARCH_MAX: f64 = 50.0;
const ROOT_TOL: f64 = 1e-12;

/// Smallest root of [`junction_drive_r`] in `[-50, 50]`, found by a sign scan
/// followed by bisection; `None` when the drive never becomes negative.
pub fn trapping_position(m: &JunctionModel) -> Option<f64> {
    let (h_min, r_min) = junction_min_drive(m);
    if r_min > 0.0 {
        return None;
    }
    let h_min = h_min?;
    if r_min.abs() <= ROOT_TOL {
        return Some(h_min);
    }
    let r = |h: f64| junction_drive_r(h, m);
    // r decreases monotonically up to h_min, so the scan only needs to reach it
    let steps = 10_000;
    let step = (h_min - ROOT_SEARCH_MIN) / steps as f64;
    let mut lo = ROOT_SEARCH_MIN;
    if r(lo) <= 0.0 {
        return Some(lo);
    }
    let mut hi = h_min;
    for k in 1..=steps {
        let h = ROOT_SEARCH_MIN + k as f64 * step;
        if r(h) <= 0.0 {
            hi = h;
            break;
        }
        lo = h;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = r(mid);
        if v.abs() <= ROOT_TOL || hi - lo < f64::EPSILON * (1.0 + mid.abs()) {
            return Some(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Channel of width `w` opening into a cone of half-angle `theta`, in `n`
/// dimensions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeModel {
    pub w: f64,
    pub theta: f64,
    pub a: f64,
    pub n: u32,
}

impl ConeModel {
    pub fn new(w: f64, theta: f64, a: f64) -> Result<Self> {
        Self::with_dimension(w, theta, a, 2)
    }

    pub fn with_dimension(w: f64, theta: f64, a: f64, n: u32) -> Result<Self> {
        check_positive("w", w)?;
        check_positive("theta", theta)?;
        if theta > PI {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("{theta} exceeds pi"),
            });
        }
        check_a(a, 1.0)?;
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "n",
                reason: format!("dimension {n} below 2"),
            });
        }
        Ok(Self { w, theta, a, n })
    }
}

/// Bracket `-1/2 - (2a - 1) ln 2`, the sector contribution per unit angle
/// (negative for `a < 1/2`).
fn sector_coefficient(a: f64) -> f64 {
    -0.5 - (2.0 * a - 1.0) * LN_2
}

/// `r_theta = w sqrt(2) (1/2 - a) + 2 theta [-1/2 - (2a-1) ln 2]`; the front
/// cannot enter the cone when this is `<= 0`.
pub fn cone_drive_r_theta(m: &ConeModel) -> Result<f64> {
    if m.n != 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("planar drive asked for dimension {}", m.n),
        });
    }
    Ok(m.w * SQRT_2 * (0.5 - m.a) + 2.0 * m.theta * sector_coefficient(m.a))
}

/// `w^(n-1) sqrt(2) (1/2 - a) + w^(n-2) 2 theta [-1/2 - (2a-1) ln 2]`.
pub fn cone_drive_ndim(m: &ConeModel) -> f64 {
    let n = m.n as i32;
    m.w.powi(n - 1) * SQRT_2 * (0.5 - m.a) + m.w.powi(n - 2) * 2.0 * m.theta * sector_coefficient(m.a)
}

/// Slope of the crossing threshold `theta_c = slope * w` from `r_theta = 0`.
pub fn cone_threshold_slope(a: f64) -> Result<f64> {
    check_a(a, 0.5)?;
    let denom = 2.0 * -sector_coefficient(a);
    if denom <= 0.0 {
        return Err(Error::DegenerateThreshold(denom));
    }
    Ok(SQRT_2 * (0.5 - a) / denom)
}

/// Angle above which a channel of width `w` no longer feeds the cone.
pub fn cone_threshold_theta(w: f64, a: f64) -> Result<f64> {
    check_positive("w", w)?;
    Ok(w * cone_threshold_slope(a)?)
}

/// Crossing threshold of the nonlinearity scaled by `s`: `w / sqrt(s)`.
pub fn rescaled_threshold(w: f64, s: f64) -> Result<f64> {
    check_positive("s", s)?;
    Ok(w / s.sqrt())
}

/// Transverse mode `m` with longitudinal wavenumber `k` in a channel of width `w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeDecay {
    pub w: f64,
    pub k: f64,
    pub m: u32,
}

impl ModeDecay {
    pub fn new(w: f64, k: f64, m: u32) -> Result<Self> {
        check_positive("w", w)?;
        if m < 1 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "mode index starts at 1".into(),
            });
        }
        Ok(Self { w, k, m })
    }
}

/// `k^2 + (m pi / w)^2`.
pub fn mode_decay_rate(m: &ModeDecay) -> f64 {
    let q = m.m as f64 * PI / m.w;
    m.k * m.k + q * q
}

pub fn critical_width() -> f64 {
    CRITICAL_WIDTH
}

#[cfg(test)]
#[allow(clippy::approx_constant)] // literal oracles
mod tests {
    use super::*;

    #[test]
    fn speeds() {
        assert_eq!(kink_speed(0.5), 0.0);
        assert!((kink_speed(0.3) - 0.282_842_712_474_619).abs() < 1e-14);
        assert!((kink_speed(0.0) - 0.707_106_781_186_547_6).abs() < 1e-15);
    }

    #[test]
    fn tail_limits() {
        for a in [0.1, 0.3, 0.45] {
            assert!(tail_integral_j0(800.0, a).abs() < 1e-300);
            assert!((tail_integral_j0(-800.0, a) - (0.5 - a)).abs() < 1e-15);
            assert!(tail_moment_j1(800.0, a).abs() < 1e-300);
            assert_eq!(tail_moment_j1(f64::NEG_INFINITY, a), -0.5);
            assert!((tail_moment_j1(-40.0, a) + 0.5).abs() < 1e-12);
        }
        assert!((tail_integral_j0(0.0, 0.3) + 0.025).abs() < 1e-15);
        let expected = 0.5 * (-0.5 + 0.4 * LN_2);
        assert!((tail_moment_j1(0.0, 0.3) - expected).abs() < 1e-15);
    }

    #[test]
    fn junction_limits() {
        let m = JunctionModel::new(4.0, 4.0, 0.3).unwrap();
        for h in [-20.0, 0.0, 3.0] {
            assert!((junction_drive_r(h, &m) - 0.8).abs() < 1e-15);
        }
        assert!(trapping_position(&m).is_none());
        let m = JunctionModel::new(4.0, 30.0, 0.3).unwrap();
        assert!((junction_drive_r(60.0, &m) - 0.8).abs() < 1e-12);
        assert!((junction_drive_r(-60.0, &m) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn junction_trapping_pair() {
        let open = JunctionModel::new(4.0, 20.0, 0.3).unwrap();
        assert!((junction_min_drive(&open).1 - 0.08).abs() < 1e-14);
        assert!(trapping_position(&open).is_none());
        let trap = JunctionModel::new(4.0, 30.0, 0.3).unwrap();
        let h = trapping_position(&trap).unwrap();
        assert!(junction_drive_r(h, &trap).abs() <= 1e-12);
        assert!(h < junction_min_drive(&trap).0.unwrap());
        let w2 = junction_trapping_width(4.0, 0.3).unwrap();
        assert!(w2 > 20.0 && w2 < 30.0);
        let edge = JunctionModel::new(4.0, w2, 0.3).unwrap();
        assert!(junction_min_drive(&edge).1.abs() < 1e-12);
    }

    #[test]
    fn cone_values() {
        let m = ConeModel::new(4.0, 1.4, 0.3).unwrap();
        let r = cone_drive_r_theta(&m).unwrap();
        assert!((r - 0.507_695_692_125_615_6).abs() < 1e-12);
        let m = ConeModel::new(4.0, 1.4, 0.4).unwrap();
        assert!(cone_drive_r_theta(&m).unwrap() < 0.0);
        let straight = ConeModel::new(3.0, 1e-300, 0.3).unwrap();
        assert!((cone_drive_r_theta(&straight).unwrap() - 3.0 * SQRT_2 * full_line_j0(0.3)).abs() < 1e-15);
        assert!(cone_drive_r_theta(&ConeModel::with_dimension(4.0, 1.4, 0.3, 3).unwrap()).is_err());
    }

    #[test]
    fn cone_threshold() {
        let slope = cone_threshold_slope(0.3).unwrap();
        assert!((slope - 0.634_913_532_356_342_6).abs() < 1e-12);
        let theta = cone_threshold_theta(2.0, 0.3).unwrap();
        let m = ConeModel::new(2.0, theta, 0.3).unwrap();
        assert!(cone_drive_r_theta(&m).unwrap().abs() < 1e-14);
        assert!(cone_threshold_slope(0.499_999).unwrap() < 1e-5);
        assert!(matches!(cone_threshold_slope(0.1), Err(Error::DegenerateThreshold(_))));
        assert!(cone_threshold_slope(0.5).is_err());
    }

    #[test]
    fn ndim_scaling() {
        let m2 = ConeModel::new(4.0, 1.4, 0.3).unwrap();
        let m3 = ConeModel::with_dimension(4.0, 1.4, 0.3, 3).unwrap();
        assert!((cone_drive_ndim(&m2) - cone_drive_r_theta(&m2).unwrap()).abs() < 1e-15);
        assert!((cone_drive_ndim(&m3) - 4.0 * cone_drive_r_theta(&m2).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn rescaling() {
        assert_eq!(rescaled_threshold(4.0, 1.0).unwrap(), 4.0);
        assert_eq!(rescaled_threshold(4.0, 4.0).unwrap(), 2.0);
        assert_eq!(rescaled_threshold(4.0, 0.25).unwrap(), 8.0);
        assert!(rescaled_threshold(4.0, 0.0).is_err());
    }

    #[test]
    fn mode_decay() {
        let m = ModeDecay::new(PI, 0.0, 1).unwrap();
        assert!((mode_decay_rate(&m) - 1.0).abs() < 1e-15);
        let rates: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&w| mode_decay_rate(&ModeDecay::new(w, 0.7, 2).unwrap()))
            .collect();
        assert!(rates.windows(2).all(|r| r[1] < r[0]));
        assert!((critical_width() - 6.283_185_307_179_586).abs() < 1e-15);
        assert!(ModeDecay::new(1.0, 0.0, 0).is_err());
    }
}
