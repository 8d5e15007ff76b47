//! Closed-form geometry of the parabolic metric on `R^n x R`.
//!
//! A point is `(x, t)` with `x` in `R^n`. The distance is
//! `max(|x - y|, |t - s|^(1/p))`, so a metric ball (a *cylinder*) is a
//! Euclidean ball of radius `r` crossed with a time interval of half-length
//! `r^p`. Every set handled here is a product of a spatial ball and an open
//! time interval ([`TimeBox`]); boundaries are ignored by all volume formulas.

use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, gamma::gamma};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Fixed lag of the forward/backward parts used by FIT links.
pub const LINK_LAG: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricParams {
    /// Spatial dimension.
    pub n: usize,
    /// Parabolic exponent, `p > 1`.
    pub p: f64,
}

impl MetricParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        let m = MetricParams { n, p };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("spatial dimension n must be >= 1"));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::invalid(format!("parabolic exponent p must be finite and > 1, got {}", self.p)));
        }
        Ok(())
    }

    /// Homogeneous dimension `n + p`: cylinder volumes scale like `r^(n+p)`.
    pub fn homogeneous_dim(&self) -> f64 {
        self.n as f64 + self.p
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicPoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl ParabolicPoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        ParabolicPoint { x, t }
    }

    /// Spatial projection.
    pub fn space(&self) -> &[f64] {
        &self.x
    }

    /// Temporal projection.
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParabolicCylinder {
    pub center: ParabolicPoint,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeSign {
    Plus,
    Minus,
}

impl TimeSign {
    pub fn factor(self) -> f64 {
        match self {
            TimeSign::Plus => 1.0,
            TimeSign::Minus => -1.0,
        }
    }
}

/// Product of an open spatial ball and an open time interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBox {
    pub spatial_center: Vec<f64>,
    pub spatial_radius: f64,
    pub time_lo: f64,
    pub time_hi: f64,
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            let h = n as f64 / 2.0;
            PI.powf(h) / gamma(h + 1.0)
        }
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// Parabolic distance `max(|x - y|, |t - s|^(1/p))`.
pub fn par_distance(z: &ParabolicPoint, w: &ParabolicPoint, m: &MetricParams) -> Result<f64> {
    m.check_dim(z.x.len())?;
    m.check_dim(w.x.len())?;
    Ok(par_distance_raw(&z.x, z.t, &w.x, w.t, m.p))
}

#[inline]
pub(crate) fn par_distance_raw(x: &[f64], t: f64, y: &[f64], s: f64, p: f64) -> f64 {
    euclid(x, y).max((t - s).abs().powf(1.0 / p))
}

impl ParabolicCylinder {
    pub fn new(center: ParabolicPoint, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::invalid(format!("cylinder radius must be finite and > 0, got {radius}")));
        }
        if !center.is_finite() {
            return Err(Error::invalid("cylinder center must be finite"));
        }
        Ok(ParabolicCylinder { center, radius })
    }

    /// `lambda P`: same center, radius scaled by `lambda`.
    pub fn scaled(&self, lambda: f64) -> ParabolicCylinder {
        ParabolicCylinder { center: self.center.clone(), radius: self.radius * lambda }
    }

    pub fn volume(&self, m: &MetricParams) -> f64 {
        cylinder_volume_raw(self.radius, m)
    }

    /// The cylinder itself as a box.
    pub fn as_box(&self, m: &MetricParams) -> TimeBox {
        let h = self.radius.powf(m.p);
        TimeBox {
            spatial_center: self.center.x.clone(),
            spatial_radius: self.radius,
            time_lo: self.center.t - h,
            time_hi: self.center.t + h,
        }
    }

    pub fn contains(&self, z: &ParabolicPoint, m: &MetricParams) -> bool {
        par_distance_raw(&self.center.x, self.center.t, &z.x, z.t, m.p) < self.radius
    }

    /// `P^{sign,a}`: the cylinder translated in time by `sign * a * r^p`.
    pub fn lagged(&self, sign: TimeSign, a: f64, m: &MetricParams) -> Result<TimeBox> {
        lagged_part(self, sign, a, m)
    }

    /// `P^{sign}` with the fixed link lag.
    pub fn link_part(&self, sign: TimeSign, m: &MetricParams) -> TimeBox {
        let h = self.radius.powf(m.p);
        let tc = self.center.t + sign.factor() * LINK_LAG * h;
        TimeBox { spatial_center: self.center.x.clone(), spatial_radius: self.radius, time_lo: tc - h, time_hi: tc + h }
    }

    pub fn hull(&self, a: f64, m: &MetricParams) -> Result<TimeBox> {
        hull_box(self, a, m)
    }
}

pub fn cylinder_volume(cyl: &ParabolicCylinder, m: &MetricParams) -> f64 {
    cylinder_volume_raw(cyl.radius, m)
}

#[inline]
pub(crate) fn cylinder_volume_raw(r: f64, m: &MetricParams) -> f64 {
    unit_ball_volume(m.n) * r.powi(m.n as i32) * 2.0 * r.powf(m.p)
}

pub fn lagged_part(cyl: &ParabolicCylinder, sign: TimeSign, a: f64, m: &MetricParams) -> Result<TimeBox> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("lag a must be finite and > 0, got {a}")));
    }
    let h = cyl.radius.powf(m.p);
    let tc = cyl.center.t + sign.factor() * a * h;
    Ok(TimeBox { spatial_center: cyl.center.x.clone(), spatial_radius: cyl.radius, time_lo: tc - h, time_hi: tc + h })
}

/// Convex hull of `P^{+,a}` and `P^{-,a}`.
pub fn hull_box(cyl: &ParabolicCylinder, a: f64, m: &MetricParams) -> Result<TimeBox> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("lag a must be finite and > 0, got {a}")));
    }
    let half = (a + 1.0) * cyl.radius.powf(m.p);
    Ok(TimeBox {
        spatial_center: cyl.center.x.clone(),
        spatial_radius: cyl.radius,
        time_lo: cyl.center.t - half,
        time_hi: cyl.center.t + half,
    })
}

impl TimeBox {
    pub fn new(spatial_center: Vec<f64>, spatial_radius: f64, time_lo: f64, time_hi: f64) -> Result<Self> {
        if !(spatial_radius > 0.0 && spatial_radius.is_finite()) {
            return Err(Error::invalid("time box spatial radius must be finite and > 0"));
        }
        if !(time_lo < time_hi) || !time_lo.is_finite() || !time_hi.is_finite() {
            return Err(Error::invalid(format!("time box needs finite time_lo < time_hi, got ({time_lo}, {time_hi})")));
        }
        if spatial_center.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time box center must be finite"));
        }
        Ok(TimeBox { spatial_center, spatial_radius, time_lo, time_hi })
    }

    pub fn dim(&self) -> usize {
        self.spatial_center.len()
    }

    pub fn time_center(&self) -> f64 {
        0.5 * (self.time_lo + self.time_hi)
    }

    pub fn time_length(&self) -> f64 {
        self.time_hi - self.time_lo
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim();
        unit_ball_volume(n) * self.spatial_radius.powi(n as i32) * self.time_length()
    }

    pub fn contains_point(&self, z: &ParabolicPoint) -> bool {
        z.t > self.time_lo && z.t < self.time_hi && euclid(&z.x, &self.spatial_center) < self.spatial_radius
    }

    /// Parabolic dilation about the box center: the spatial radius scales by
    /// `lambda` and the time half-length by `lambda^p`.
    pub fn dilate(&self, lambda: f64, m: &MetricParams) -> TimeBox {
        let tc = self.time_center();
        let half = 0.5 * self.time_length() * lambda.powf(m.p);
        TimeBox {
            spatial_center: self.spatial_center.clone(),
            spatial_radius: self.spatial_radius * lambda,
            time_lo: tc - half,
            time_hi: tc + half,
        }
    }

    /// Axis-aligned bounding box as `(lo, hi)` over all `n + 1` coordinates.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo: Vec<f64> = self.spatial_center.iter().map(|c| c - self.spatial_radius).collect();
        let mut hi: Vec<f64> = self.spatial_center.iter().map(|c| c + self.spatial_radius).collect();
        lo.push(self.time_lo);
        hi.push(self.time_hi);
        (lo, hi)
    }
}

/// Volume of the intersection of two Euclidean balls in `R^n`.
///
/// Closed forms for `n = 1` (interval overlap) and `n = 2` (lens); for
/// `n >= 3` the lens is split into two spherical caps evaluated with the
/// regularized incomplete beta function.
pub fn ball_intersection_volume(c1: &[f64], r1: f64, c2: &[f64], r2: f64, n: usize) -> f64 {
    let d = euclid(c1, c2);
    ball_intersection_by_gap(d, r1, r2, n)
}

pub(crate) fn ball_intersection_by_gap(d: f64, r1: f64, r2: f64, n: usize) -> f64 {
    if d >= r1 + r2 {
        return 0.0;
    }
    let (small, large) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if d <= large - small {
        return unit_ball_volume(n) * small.powi(n as i32);
    }
    match n {
        1 => r1 + r2 - d,
        2 => lens_area(d, r1, r2),
        _ => {
            // signed distance from each center to the radical hyperplane
            let d1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
            let d2 = d - d1;
            cap_volume(r1, r1 - d1, n) + cap_volume(r2, r2 - d2, n)
        }
    }
}

fn lens_area(d: f64, r1: f64, r2: f64) -> f64 {
    let a1 = ((d * d + r1 * r1 - r2 * r2) / (2.0 * d * r1)).clamp(-1.0, 1.0).acos();
    let a2 = ((d * d + r2 * r2 - r1 * r1) / (2.0 * d * r2)).clamp(-1.0, 1.0).acos();
    let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(0.0);
    r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * k.sqrt()
}

/// Volume of the cap of height `h` cut from a ball of radius `r` in `R^n`.
fn cap_volume(r: f64, h: f64, n: usize) -> f64 {
    let full = unit_ball_volume(n) * r.powi(n as i32);
    if h <= 0.0 {
        return 0.0;
    }
    if h >= 2.0 * r {
        return full;
    }
    if h > r {
        return full - cap_volume(r, 2.0 * r - h, n);
    }
    let x = ((2.0 * r * h - h * h) / (r * r)).clamp(0.0, 1.0);
    0.5 * full * beta_reg((n as f64 + 1.0) / 2.0, 0.5, x)
}

/// Intersection and union volumes of two time boxes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxMeasures {
    pub intersection_volume: f64,
    pub union_volume: f64,
}

pub fn box_ops(b1: &TimeBox, b2: &TimeBox) -> Result<BoxMeasures> {
    if b1.dim() != b2.dim() {
        return Err(Error::DimensionMismatch { expected: b1.dim(), got: b2.dim() });
    }
    let inter = box_intersection_volume(b1, b2);
    Ok(BoxMeasures { intersection_volume: inter, union_volume: b1.volume() + b2.volume() - inter })
}

pub(crate) fn box_intersection_volume(b1: &TimeBox, b2: &TimeBox) -> f64 {
    let dt = interval_overlap(b1.time_lo, b1.time_hi, b2.time_lo, b2.time_hi);
    if dt <= 0.0 {
        return 0.0;
    }
    dt * ball_intersection_volume(&b1.spatial_center, b1.spatial_radius, &b2.spatial_center, b2.spatial_radius, b1.dim())
}

#[inline]
pub(crate) fn interval_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}
