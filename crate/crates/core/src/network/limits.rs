//! Conversion of loss and flow caps into angle-difference intervals.

use std::f64::consts::TAU;

use super::{Line, NetworkError};

const MIDPOINT_TOL: f64 = 1e-12;

/// Closed angle-difference interval `[lo, hi]` containing zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AngleInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }
}

/// `h(θ) = alpha + beta·sin θ + gamma·cos θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Sinusoid {
    /// `P_ik(θ)` of a line at magnitudes `v_i`, `v_k`.
    pub fn forward_flow(line: &Line, v_i: f64, v_k: f64) -> Self {
        let vv = v_i * v_k;
        Self {
            alpha: v_i * v_i * line.g,
            beta: vv * line.b,
            gamma: -vv * line.g,
        }
    }

    /// `P_ki(θ)`.
    pub fn reverse_flow(line: &Line, v_i: f64, v_k: f64) -> Self {
        let vv = v_i * v_k;
        Self {
            alpha: v_k * v_k * line.g,
            beta: -vv * line.b,
            gamma: -vv * line.g,
        }
    }

    /// Thermal loss `P_ik + P_ki`.
    pub fn loss(line: &Line, v_i: f64, v_k: f64) -> Self {
        Self {
            alpha: (v_i * v_i + v_k * v_k) * line.g,
            beta: 0.0,
            gamma: -2.0 * v_i * v_k * line.g,
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        self.alpha + self.beta * theta.sin() + self.gamma * theta.cos()
    }

    /// All `θ ∈ [lo, hi]` with `h(θ) = level`, unsorted.
    fn crossings(&self, level: f64, lo: f64, hi: f64) -> Vec<f64> {
        let r = self.beta.hypot(self.gamma);
        if r == 0.0 {
            return Vec::new();
        }
        let s = (level - self.alpha) / r;
        if !(-1.0..=1.0).contains(&s) {
            return Vec::new();
        }
        let delta = self.beta.atan2(self.gamma);
        let a = s.acos();
        let mut out = Vec::new();
        for base in [delta + a, delta - a] {
            let k_min = ((lo - base) / TAU).ceil() as i64;
            let k_max = ((hi - base) / TAU).floor() as i64;
            for k in k_min..=k_max {
                out.push(base + k as f64 * TAU);
            }
        }
        out
    }
}

/// Thermal-loss cap equivalent to a current-magnitude limit `i_max` on a
/// line with admittance `g - jb`: `L = |I|² g / (g² + b²)`.
pub fn loss_cap_from_current(g: f64, b: f64, i_max: f64) -> f64 {
    i_max * i_max * g / (g * g + b * b)
}

/// Tightest closed interval around zero that stays within the line's angle
/// bounds and satisfies its loss and flow caps at magnitudes `v_i`, `v_k`.
pub fn angle_interval_from_limits(line: &Line, v_i: f64, v_k: f64) -> Result<AngleInterval, NetworkError> {
    let label = || format!("{}-{}", line.from, line.to);
    if !(v_i > 0.0 && v_k > 0.0) {
        return Err(NetworkError::Invariant {
            item: format!("line {}", label()),
            message: format!("magnitudes must be positive, got ({v_i}, {v_k})"),
        });
    }
    let mut interval = AngleInterval {
        lo: line.theta_min,
        hi: line.theta_max,
    };
    let caps = [
        (line.loss_max, Sinusoid::loss(line, v_i, v_k), "loss_max"),
        (
            line.flow_max_fwd,
            Sinusoid::forward_flow(line, v_i, v_k),
            "flow_max_fwd",
        ),
        (
            line.flow_max_rev,
            Sinusoid::reverse_flow(line, v_i, v_k),
            "flow_max_rev",
        ),
    ];
    for (cap, h, name) in caps {
        let Some(cap) = cap else { continue };
        if h.eval(0.0) - cap > MIDPOINT_TOL * (1.0 + cap.abs()) {
            return Err(NetworkError::InfeasibleAtZero {
                line: label(),
                limit: name,
            });
        }
        interval = restrict(interval, &h, cap);
    }
    Ok(interval)
}

/// Shrink `iv` to the connected component of `{θ : h(θ) ≤ cap}` containing 0.
fn restrict(iv: AngleInterval, h: &Sinusoid, cap: f64) -> AngleInterval {
    let mut points = h.crossings(cap, iv.lo, iv.hi);
    points.extend([iv.lo, iv.hi, 0.0]);
    points.sort_by(f64::total_cmp);
    points.dedup();
    let zero = points
        .iter()
        .position(|&t| t == 0.0)
        .expect("zero is always a breakpoint");
    let ok = |a: f64, b: f64| h.eval(0.5 * (a + b)) <= cap + MIDPOINT_TOL * (1.0 + cap.abs());

    let mut hi = zero;
    while hi + 1 < points.len() && ok(points[hi], points[hi + 1]) {
        hi += 1;
    }
    let mut lo = zero;
    while lo > 0 && ok(points[lo - 1], points[lo]) {
        lo -= 1;
    }
    AngleInterval {
        lo: points[lo],
        hi: points[hi],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn line(g: f64, b: f64, lo: f64, hi: f64) -> Line {
        Line::new(0, 1, g, b).with_angles(lo, hi)
    }

    /// Bisection on a function that changes sign once on `[a, b]`.
    fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn identity_without_caps() {
        let iv = angle_interval_from_limits(&line(1.0, 5.0, -0.2, 0.2), 1.0, 1.0).unwrap();
        assert_eq!((iv.lo, iv.hi), (-0.2, 0.2));
    }

    #[test]
    fn loss_cap_gives_quarter_pi() {
        let mut l = line(1.0, 1.0, -1.5, 1.5);
        l.loss_max = Some(2.0 - SQRT_2);
        let iv = angle_interval_from_limits(&l, 1.0, 1.0).unwrap();
        let oracle = bisect(|t| 2.0 - 2.0 * t.cos() - (2.0 - SQRT_2), 0.0, 1.5);
        assert!((iv.hi - oracle).abs() < 1e-9);
        assert!((iv.hi - FRAC_PI_4).abs() < 1e-9);
        assert!((iv.lo + FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn forward_cap_zero() {
        let mut l = line(1.0, 5.0, -1.5, 1.5);
        l.flow_max_fwd = Some(0.0);
        let iv = angle_interval_from_limits(&l, 1.0, 1.0).unwrap();
        assert!(iv.hi.abs() < 1e-12);
        // Below zero P_ik dips then returns to zero near -2 atan(5), outside the bound.
        let f = |t: f64| 1.0 + 5.0 * t.sin() - t.cos();
        assert_eq!(iv.lo, -1.5);
        assert!(f(iv.lo) <= 1e-9);
    }

    #[test]
    fn forward_cap_positive_root() {
        let mut l = line(1.0, 5.0, -1.5, 1.5);
        l.flow_max_fwd = Some(0.8);
        let iv = angle_interval_from_limits(&l, 1.0, 1.0).unwrap();
        let oracle = bisect(|t| 1.0 + 5.0 * t.sin() - t.cos() - 0.8, 0.0, 1.5);
        assert!((iv.hi - oracle).abs() < 1e-9);
    }

    #[test]
    fn reverse_cap_limits_negative_side() {
        let mut l = line(1.0, 5.0, -1.5, 1.5);
        l.flow_max_rev = Some(0.5);
        let iv = angle_interval_from_limits(&l, 1.0, 1.0).unwrap();
        let oracle = bisect(|t| 1.0 - 5.0 * t.sin() - t.cos() - 0.5, -1.5, 0.0);
        assert!((iv.lo - oracle).abs() < 1e-9);
        assert_eq!(iv.hi, 1.5);
    }

    #[test]
    fn cap_excluding_zero_is_error() {
        let mut l = line(1.0, 1.0, -0.5, 0.5);
        l.loss_max = Some(-0.1);
        let err = angle_interval_from_limits(&l, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, NetworkError::InfeasibleAtZero { limit: "loss_max", .. }));
    }

    #[test]
    fn unequal_magnitudes_loss_cap_near_zero() {
        // L(0) = g (v_i - v_k)^2 > 0; a cap just above that leaves a small interval.
        let mut l = line(2.0, 3.0, -1.0, 1.0);
        l.loss_max = Some(2.0 * 0.01 * 0.01 + 1e-3);
        let iv = angle_interval_from_limits(&l, 1.0, 0.99).unwrap();
        let h = Sinusoid::loss(&l, 1.0, 0.99);
        assert!((h.eval(iv.hi) - l.loss_max.unwrap()).abs() < 1e-9);
        assert!((h.eval(iv.lo) - l.loss_max.unwrap()).abs() < 1e-9);
        assert!((iv.hi + iv.lo).abs() < 1e-12);
    }

    #[test]
    fn current_limit_conversion() {
        // |V1 - V2| = |I| / |y| so L = |I|^2 g / |y|^2.
        assert!((loss_cap_from_current(3.0, 4.0, 5.0) - 3.0).abs() < 1e-15);
    }
}
