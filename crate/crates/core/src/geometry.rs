//! Two-bus flow-region geometry.
//!
//! With fixed magnitudes the flow pair `(P_ik, P_ki)` of a line traces an
//! ellipse as the angle difference varies; the constrained angle interval cuts
//! out an arc. The convex hull of that arc is the ellipse interior on one side
//! of the chord joining its endpoints. Lines with `g = 0` (or `b = 0`) collapse
//! the ellipse to a segment and are handled separately.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use thiserror::Error;

use crate::network::{angle_interval_from_limits, Line, NetworkError};

/// Absolute tolerance used by [`in_hull`] on both the norm and chord tests.
pub const HULL_TOL: f64 = 1e-8;
/// Inversion targets this far outside the achievable range are clamped.
pub const RANGE_GRACE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate line (g = {g}, b = {b}): the ellipse collapses to a segment")]
    DegenerateLine { g: f64, b: f64 },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("flow {value} outside achievable range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
}

/// `(P_ik, P_ki)` for angle difference `theta`.
pub fn flow_pair(g: f64, b: f64, v_i: f64, v_k: f64, theta: f64) -> (f64, f64) {
    let vv = v_i * v_k;
    let (s, c) = theta.sin_cos();
    (
        v_i * v_i * g + vv * b * s - vv * g * c,
        v_k * v_k * g - vv * b * s - vv * g * c,
    )
}

/// Active loss `P_ik + P_ki`.
pub fn line_loss(g: f64, v_i: f64, v_k: f64, theta: f64) -> f64 {
    (v_i * v_i + v_k * v_k) * g - 2.0 * v_i * v_k * g * theta.cos()
}

/// Largest admissible `|θ|` for the arc to be entirely Pareto-optimal:
/// `atan(b/g)`, equal to `π/2` for lossless lines.
pub fn angle_threshold(g: f64, b: f64) -> f64 {
    b.atan2(g)
}

/// `−atan(b/g) < lo ≤ hi < atan(b/g)`. The trivial interval `[0, 0]` always
/// qualifies.
pub fn angle_condition_holds(g: f64, b: f64, theta_lo: f64, theta_hi: f64) -> bool {
    if theta_lo > theta_hi {
        return false;
    }
    if theta_lo == 0.0 && theta_hi == 0.0 {
        return true;
    }
    let t = angle_threshold(g, b);
    -t < theta_lo && theta_hi < t
}

/// The older sufficient condition `|θ| < atan(g/b)`, kept as a diagnostic.
pub fn baldick_threshold(g: f64, b: f64) -> f64 {
    g.atan2(b)
}

pub fn baldick_condition_holds(g: f64, b: f64, theta_lo: f64, theta_hi: f64) -> bool {
    let t = baldick_threshold(g, b);
    theta_lo <= theta_hi && -t < theta_lo && theta_hi < t
}

/// Flow region of one line at fixed magnitudes over `[theta_lo, theta_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineRegion {
    pub g: f64,
    pub b: f64,
    pub v_i: f64,
    pub v_k: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
}

/// The hull-closing linear inequality `a·P_ik + c·P_ki ≤ d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chord {
    Cut {
        a: f64,
        c: f64,
        d: f64,
    },
    /// `theta_lo == theta_hi`: the region is a single point.
    Degenerate,
    /// The interval covers a full turn, so the whole ellipse is attained.
    Absent,
}

/// Geometric description of the full ellipse, for plotting and reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseShape {
    pub center: (f64, f64),
    /// Direction of the major axis in radians from the `P_ik` axis.
    pub major_axis_angle: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
}

impl LineRegion {
    pub fn new(g: f64, b: f64, v_i: f64, v_k: f64, theta_lo: f64, theta_hi: f64) -> Result<Self, GeometryError> {
        if !(g >= 0.0 && b >= 0.0 && g + b > 0.0) {
            return Err(GeometryError::InvalidRegion(format!(
                "need g, b >= 0 and g + b > 0, got g = {g}, b = {b}"
            )));
        }
        if !(v_i > 0.0 && v_k > 0.0) {
            return Err(GeometryError::InvalidRegion(format!(
                "magnitudes must be positive, got ({v_i}, {v_k})"
            )));
        }
        if theta_lo.is_nan() || theta_hi.is_nan() || theta_lo > theta_hi {
            return Err(GeometryError::InvalidRegion(format!(
                "theta_lo = {theta_lo} exceeds theta_hi = {theta_hi}"
            )));
        }
        Ok(Self {
            g,
            b,
            v_i,
            v_k,
            theta_lo,
            theta_hi,
        })
    }

    /// Region of `line` with its caps converted at magnitudes `v_i`, `v_k`.
    pub fn from_line(line: &Line, v_i: f64, v_k: f64) -> Result<Self, NetworkError> {
        let iv = angle_interval_from_limits(line, v_i, v_k)?;
        Ok(Self {
            g: line.g,
            b: line.b,
            v_i,
            v_k,
            theta_lo: iv.lo,
            theta_hi: iv.hi,
        })
    }

    /// The same region seen from bus `k`: coordinates swap and angles negate.
    pub fn reversed(&self) -> Self {
        Self {
            v_i: self.v_k,
            v_k: self.v_i,
            theta_lo: -self.theta_hi,
            theta_hi: -self.theta_lo,
            ..*self
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.v_i * self.v_i * self.g, self.v_k * self.v_k * self.g)
    }

    pub fn vv(&self) -> f64 {
        self.v_i * self.v_k
    }

    pub fn flow_at(&self, theta: f64) -> (f64, f64) {
        flow_pair(self.g, self.b, self.v_i, self.v_k, theta)
    }

    /// Flow pairs at `theta_lo` and `theta_hi`.
    pub fn endpoints(&self) -> [(f64, f64); 2] {
        [self.flow_at(self.theta_lo), self.flow_at(self.theta_hi)]
    }

    /// True when the ellipse degenerates to a segment (`g = 0` or `b = 0`).
    pub fn is_segment(&self) -> bool {
        self.g == 0.0 || self.b == 0.0
    }

    pub fn angle_condition_holds(&self) -> bool {
        angle_condition_holds(self.g, self.b, self.theta_lo, self.theta_hi)
    }

    pub fn is_degenerate(&self) -> bool {
        self.theta_lo == self.theta_hi
    }

    /// `M⁻¹(p − center)` with `M = [[b, −g], [−b, −g]]`; equals
    /// `v_i v_k (sin θ, cos θ)` on the ellipse.
    pub fn normalized(&self, p: (f64, f64)) -> Result<(f64, f64), GeometryError> {
        if self.is_segment() {
            return Err(GeometryError::DegenerateLine { g: self.g, b: self.b });
        }
        let (cx, cy) = self.center();
        let (dx, dy) = (p.0 - cx, p.1 - cy);
        Ok(((dx - dy) / (2.0 * self.b), -(dx + dy) / (2.0 * self.g)))
    }

    pub fn ellipse_shape(&self) -> EllipseShape {
        let vv = self.vv();
        let along_minus = vv * self.b * std::f64::consts::SQRT_2;
        let along_plus = vv * self.g * std::f64::consts::SQRT_2;
        let (major_axis_angle, semi_major, semi_minor) = if self.b >= self.g {
            (-PI / 4.0, along_minus, along_plus)
        } else {
            (PI / 4.0, along_plus, along_minus)
        };
        EllipseShape {
            center: self.center(),
            major_axis_angle,
            semi_major,
            semi_minor,
        }
    }

    /// For segment regions: the segment's base point, unit direction and the
    /// attained parameter range over the interval.
    fn segment(&self) -> ((f64, f64), (f64, f64), (f64, f64)) {
        let vv = self.vv();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        if self.g == 0.0 {
            // (P_ik, P_ki) = vv b sin θ · (1, −1)
            let (lo, hi) = sin_range(self.theta_lo, self.theta_hi);
            let s = vv * self.b * std::f64::consts::SQRT_2;
            ((0.0, 0.0), (r, -r), (s * lo, s * hi))
        } else {
            // (P_ik, P_ki) = center − vv g cos θ · (1, 1)
            let (lo, hi) = cos_range(self.theta_lo, self.theta_hi);
            let s = vv * self.g * std::f64::consts::SQRT_2;
            (self.center(), (r, r), (-s * hi, -s * lo))
        }
    }
}

/// Range of `sin` over `[lo, hi]`.
pub(crate) fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    cos_range(lo - FRAC_PI_2, hi - FRAC_PI_2)
}

/// Range of `cos` over `[lo, hi]`.
pub(crate) fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo >= TAU {
        return (-1.0, 1.0);
    }
    let (a, b) = (lo.cos(), hi.cos());
    let mut min = a.min(b);
    let mut max = a.max(b);
    // cos peaks at multiples of 2π and bottoms out at odd multiples of π.
    if (lo / TAU).ceil() * TAU <= hi {
        max = 1.0;
    }
    if ((lo - PI) / TAU).ceil() * TAU + PI <= hi {
        min = -1.0;
    }
    (min, max)
}

/// `‖M⁻¹(p − center)‖ − v_i v_k`: zero on the ellipse, negative inside.
pub fn ellipse_residual(region: &LineRegion, point: (f64, f64)) -> Result<f64, GeometryError> {
    let (u0, u1) = region.normalized(point)?;
    Ok(u0.hypot(u1) - region.vv())
}

/// The chord through the two endpoint flow pairs, oriented so the arc lies on
/// the `≤` side, scaled so `max(|a|, |c|) = 1`.
pub fn chord_cut(region: &LineRegion) -> Chord {
    if region.is_degenerate() {
        return Chord::Degenerate;
    }
    if region.theta_hi - region.theta_lo >= TAU {
        return Chord::Absent;
    }
    let [(x0, y0), (x1, y1)] = region.endpoints();
    let (mut a, mut c) = (y1 - y0, x0 - x1);
    let scale = a.abs().max(c.abs());
    if scale == 0.0 {
        // Endpoints coincide only when the arc closes on itself.
        return Chord::Absent;
    }
    a /= scale;
    c /= scale;
    let mut d = a * x0 + c * y0;
    let (mx, my) = region.flow_at(0.5 * (region.theta_lo + region.theta_hi));
    if a * mx + c * my > d {
        a = -a;
        c = -c;
        d = -d;
    }
    Chord::Cut { a, c, d }
}

/// Membership in the convex hull of the arc, to [`HULL_TOL`].
pub fn in_hull(region: &LineRegion, point: (f64, f64)) -> bool {
    if region.is_segment() {
        let (base, dir, (lo, hi)) = region.segment();
        let (dx, dy) = (point.0 - base.0, point.1 - base.1);
        let along = dx * dir.0 + dy * dir.1;
        let off = (dx * dir.1 - dy * dir.0).abs();
        return off <= HULL_TOL && lo - HULL_TOL <= along && along <= hi + HULL_TOL;
    }
    match chord_cut(region) {
        Chord::Degenerate => {
            let (x, y) = region.flow_at(region.theta_lo);
            (point.0 - x).abs() <= HULL_TOL && (point.1 - y).abs() <= HULL_TOL
        }
        Chord::Absent => ellipse_residual(region, point).is_ok_and(|r| r <= HULL_TOL),
        Chord::Cut { a, c, d } => {
            ellipse_residual(region, point).is_ok_and(|r| r <= HULL_TOL) && a * point.0 + c * point.1 <= d + HULL_TOL
        }
    }
}

/// The unique `θ` in the interval whose reverse flow equals `p_ki`.
///
/// `P_ki` is strictly decreasing on the interval under the angle condition,
/// so bisection runs to machine resolution. Targets within [`RANGE_GRACE`] of
/// the achievable range are clamped to it.
pub fn theta_from_reverse_flow(region: &LineRegion, p_ki: f64) -> Result<f64, GeometryError> {
    let at = |t: f64| region.flow_at(t).1;
    let (top, bottom) = (at(region.theta_lo), at(region.theta_hi));
    if p_ki > top + RANGE_GRACE || p_ki < bottom - RANGE_GRACE {
        return Err(GeometryError::OutOfRange {
            value: p_ki,
            lo: bottom,
            hi: top,
        });
    }
    if p_ki >= top {
        return Ok(region.theta_lo);
    }
    if p_ki <= bottom {
        return Ok(region.theta_hi);
    }
    let (mut lo, mut hi) = (region.theta_lo, region.theta_hi);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid) > p_ki {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (flo, fhi) = (at(lo) - p_ki, p_ki - at(hi));
    Ok(if flo <= fhi { lo } else { hi })
}

/// The unique `θ` in the interval whose forward flow equals `p_ik`.
pub fn theta_from_forward_flow(region: &LineRegion, p_ik: f64) -> Result<f64, GeometryError> {
    theta_from_reverse_flow(&region.reversed(), p_ik).map(|t| -t)
}

/// `n` evenly spaced `(θ, flow pair)` samples on the arc, endpoints included.
pub fn arc_samples(region: &LineRegion, n: usize) -> Vec<(f64, (f64, f64))> {
    if n <= 1 || region.is_degenerate() {
        return vec![(region.theta_lo, region.flow_at(region.theta_lo))];
    }
    let step = (region.theta_hi - region.theta_lo) / (n - 1) as f64;
    (0..n)
        .map(|j| {
            let t = if j + 1 == n {
                region.theta_hi
            } else {
                region.theta_lo + step * j as f64
            };
            (t, region.flow_at(t))
        })
        .collect()
}
