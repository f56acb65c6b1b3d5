//! Sampled check of the variable-magnitude exactness assumptions.
//!
//! Exactness with finite injection lower bounds needs, for every magnitude
//! profile within bounds, (1) a nonempty angle-constrained feasible set and
//! (2) per-line regions whose hull keeps the arc's Pareto front. Both are
//! checked on a finite set of profiles only, so a clean report is evidence
//! rather than proof.

use super::{solve_opf, Mode, Objective, OpfError, OpfOptions, Verdict};
use crate::geometry::angle_condition_holds;
use crate::network::{Bus, Network};

/// Full grids are used up to this many buses; larger networks fall back to
/// corner profiles.
const GRID_MAX_BUSES: usize = 4;
/// Corner enumeration is capped at `2^CORNER_MAX_FREE` profiles.
const CORNER_MAX_FREE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Number of magnitude profiles checked.
    pub samples: usize,
    /// Profiles at which the feasible set was found empty (or undecided).
    pub nonempty_failures: Vec<Vec<f64>>,
    /// Profiles at which some line's interval fails the angle condition.
    pub pareto_failures: Vec<Vec<f64>>,
}

impl AssumptionReport {
    /// Both assumptions held at every sampled profile.
    pub fn holds_at_samples(&self) -> bool {
        self.nonempty_failures.is_empty() && self.pareto_failures.is_empty()
    }
}

fn levels(bus: &Bus, points: usize) -> Vec<f64> {
    match bus.v_fixed {
        Some(v) => vec![v],
        None if bus.v_min == bus.v_max || points < 2 => vec![bus.v_min],
        None => (0..points)
            .map(|k| bus.v_min + (bus.v_max - bus.v_min) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

fn profiles(net: &Network, points: usize) -> Vec<Vec<f64>> {
    let per_bus: Vec<Vec<f64>> = if net.n_buses() <= GRID_MAX_BUSES {
        net.buses().iter().map(|b| levels(b, points)).collect()
    } else {
        net.buses().iter().map(|b| levels(b, 2)).collect()
    };
    let free = per_bus.iter().filter(|l| l.len() > 1).count();
    if net.n_buses() > GRID_MAX_BUSES && free > CORNER_MAX_FREE {
        // Too many corners: the midpoint plus one excursion per bus.
        let mid: Vec<f64> = per_bus.iter().map(|l| 0.5 * (l[0] + l[l.len() - 1])).collect();
        let mut out = vec![mid.clone()];
        for (i, l) in per_bus.iter().enumerate() {
            if l.len() > 1 {
                for &v in [l[0], l[l.len() - 1]].iter() {
                    let mut p = mid.clone();
                    p[i] = v;
                    out.push(p);
                }
            }
        }
        return out;
    }
    let mut out = vec![Vec::new()];
    for l in &per_bus {
        out = out
            .into_iter()
            .flat_map(|p| {
                l.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Check both assumptions at sampled magnitude profiles: a grid of `points`
/// levels per bus on small networks, corners otherwise.
pub fn check_assumptions(net: &Network, points: usize) -> Result<AssumptionReport, OpfError> {
    let samples = profiles(net, points);
    let mut report = AssumptionReport {
        samples: samples.len(),
        nonempty_failures: Vec::new(),
        pareto_failures: Vec::new(),
    };
    for mags in samples {
        let intervals = net.angle_intervals(&mags)?;
        let pareto_ok = net
            .lines()
            .iter()
            .zip(&intervals)
            .all(|(l, iv)| angle_condition_holds(l.g, l.b, iv.lo, iv.hi));
        if !pareto_ok {
            report.pareto_failures.push(mags.clone());
        }
        let mut fixed = net.clone();
        for (i, &v) in mags.iter().enumerate() {
            let mut bus = fixed.bus(i).clone();
            bus.v_fixed = Some(v);
            fixed = fixed.with_bus(i, bus)?;
        }
        let sol = solve_opf(&fixed, &Objective::Loss, Mode::Fixed, &OpfOptions::default())?;
        if sol.verdict != Verdict::TightOptimal {
            report.nonempty_failures.push(mags);
        }
    }
    Ok(report)
}
