//! Random feasible networks built around a known operating point.
//!
//! Each instance picks magnitudes and angle differences first, evaluates the
//! injections they produce, and then places bus bounds of nonzero width
//! around that point. The generating point is therefore feasible and strictly
//! inside every bound, so fine grids contain exactly feasible points.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use treeflow_core::flowspace::{flows_from_angles, injections_at};
use treeflow_core::geometry::angle_threshold;
use treeflow_core::network::{Bus, Line, Network};

/// Parent of bus `k` drawn uniformly from the earlier buses.
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|k| (rng.gen_range(0..k), k)).collect()
}

/// Line with `g ∈ [0.5, 3]` and `b/g ∈ [1, 6]`.
pub fn random_line(rng: &mut ChaCha8Rng, from: usize, to: usize) -> Line {
    let g = rng.gen_range(0.5..3.0);
    let ratio = rng.gen_range(1.0..6.0);
    Line::new(from, to, g, g * ratio)
}

/// Per-line angle half-width that keeps `lines` axes at `step` under `budget`
/// grid points in total.
pub fn half_width_for_budget(lines: usize, step: f64, budget: f64, cap: f64) -> f64 {
    if lines == 0 {
        return cap;
    }
    let per_line = budget.powf(1.0 / lines as f64);
    (0.5 * (per_line - 1.0) * step).min(cap)
}

/// Interval of width `2w` around zero, inside the angle-condition threshold.
fn angle_interval(rng: &mut ChaCha8Rng, line: &Line, half: f64) -> (f64, f64) {
    let half = half.min(0.45 * angle_threshold(line.g, line.b));
    let lo = half * rng.gen_range(0.5..1.5);
    (-lo, 2.0 * half - lo)
}

/// One angle per line in the middle half of its interval, in the network's
/// own line order (which need not match construction order).
fn interior_angles(rng: &mut ChaCha8Rng, net: &Network) -> Vec<f64> {
    net.lines()
        .iter()
        .map(|l| {
            let w = l.theta_max - l.theta_min;
            rng.gen_range(l.theta_min + 0.25 * w..l.theta_max - 0.25 * w)
        })
        .collect()
}

pub struct Instance {
    pub net: Network,
    /// Generating operating point.
    pub magnitudes: Vec<f64>,
    pub thetas: Vec<f64>,
    pub injections: Vec<f64>,
}

/// Bounds `p* ± width` with a width between 20% and 60% of `|p*|`, never
/// below `floor`.
fn bounds_around(rng: &mut ChaCha8Rng, p: f64, floor: f64) -> (f64, f64) {
    let w = (rng.gen_range(0.2..0.6) * p.abs()).max(floor);
    let skew = rng.gen_range(0.2..0.8);
    (p - 2.0 * skew * w, p + 2.0 * (1.0 - skew) * w)
}

/// Fixed-voltage instance with `n` buses. Bus 0 is an unbounded slack.
pub fn fixed_instance(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Instance {
    let edges = random_tree(rng, n);
    let lines: Vec<Line> = edges
        .iter()
        .map(|&(i, k)| {
            let l = random_line(rng, i, k);
            let (lo, hi) = angle_interval(rng, &l, half_width);
            l.with_angles(lo, hi)
        })
        .collect();
    let magnitudes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.97..1.03)).collect();
    let mut buses: Vec<Bus> = (0..n).map(|i| Bus::fixed(i as u64 + 1, magnitudes[i])).collect();
    let probe = Network::new(buses.clone(), lines).expect("generated tree");
    let thetas = interior_angles(rng, &probe);
    let flows = flows_from_angles(&probe, &magnitudes, &thetas);
    let injections = injections_at(&probe, &flows, Some(&magnitudes)).0;
    for (i, bus) in buses.iter_mut().enumerate().skip(1) {
        let (lo, hi) = bounds_around(rng, injections[i], 0.01);
        bus.p_min = Some(lo);
        bus.p_max = Some(hi);
    }
    Instance {
        net: Network::new(buses, probe.lines().to_vec()).expect("generated tree"),
        magnitudes,
        thetas,
        injections,
    }
}

/// Variable-voltage instance: every magnitude in `[0.95, 1.05]`, bus 0 an
/// unbounded slack, no reactive bounds.
pub fn variable_instance(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Instance {
    let edges = random_tree(rng, n);
    let lines: Vec<Line> = edges
        .iter()
        .map(|&(i, k)| {
            let l = random_line(rng, i, k);
            let (lo, hi) = angle_interval(rng, &l, half_width);
            l.with_angles(lo, hi)
        })
        .collect();
    let magnitudes: Vec<f64> = (0..n).map(|_| rng.gen_range(0.97..1.03)).collect();
    let mut buses: Vec<Bus> = (0..n).map(|i| Bus::new(i as u64 + 1, 0.95, 1.05)).collect();
    let probe = Network::new(buses.clone(), lines).expect("generated tree");
    let thetas = interior_angles(rng, &probe);
    let flows = flows_from_angles(&probe, &magnitudes, &thetas);
    let injections = injections_at(&probe, &flows, Some(&magnitudes)).0;
    for (i, bus) in buses.iter_mut().enumerate().skip(1) {
        let (lo, hi) = bounds_around(rng, injections[i], 0.02);
        bus.p_min = Some(lo);
        bus.p_max = Some(hi);
    }
    Instance {
        net: Network::new(buses, probe.lines().to_vec()).expect("generated tree"),
        magnitudes,
        thetas,
        injections,
    }
}
