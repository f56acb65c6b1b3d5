//! Brute-force ground truth on small networks: grid enumeration of the
//! injection region, Pareto-front extraction and exhaustive optimization.
//!
//! Every line angle (and, with a magnitude step, every free bus magnitude)
//! takes values on a uniform grid that always includes both endpoints. Grid
//! spacing turns into an injection tolerance per bus through Lipschitz bounds
//! on the flow equations, which brackets the true optimum.

use std::fmt::Write;

use thiserror::Error;

use crate::flowspace::FlowError;
use crate::geometry::{flow_pair, line_loss};
use crate::network::{Network, NetworkError};
use crate::opf::{Objective, OpfError};

/// Largest network accepted.
pub const MAX_BUSES: usize = 8;
/// Largest number of grid points accepted.
pub const MAX_POINTS: u64 = 10_000_000;
/// Dominance tie tolerance.
pub const PARETO_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{n} buses exceed the oracle limit of {MAX_BUSES}")]
    TooManyBuses { n: usize },
    #[error("grid of {size} points exceeds the budget of {MAX_POINTS}")]
    BudgetExceeded { size: u64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no grid point satisfies the bus bounds, even with grid tolerances")]
    EmptyFeasibleSet,
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Opf(#[from] OpfError),
}

impl From<FlowError> for OracleError {
    fn from(e: FlowError) -> Self {
        OracleError::Opf(e.into())
    }
}

/// Grid resolution. Without `vm_step` every bus must carry `v_fixed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub theta_step: f64,
    pub vm_step: Option<f64>,
}

impl GridSpec {
    pub fn angles(theta_step: f64) -> Self {
        Self {
            theta_step,
            vm_step: None,
        }
    }
}

/// Angle differences per line and magnitudes per bus generating one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub thetas: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

impl Assignment {
    fn label(&self, variable: bool) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";");
        if variable {
            format!("{}|{}", join(&self.thetas), join(&self.magnitudes))
        } else {
            join(&self.thetas)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePoint {
    pub assignment: Assignment,
    pub injections: Vec<f64>,
    /// Bus bounds and line caps hold exactly.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSample {
    pub grid: GridSpec,
    pub points: Vec<SamplePoint>,
}

/// Uniform axis over `[lo, hi]` with spacing at most `step`.
#[derive(Debug, Clone, PartialEq)]
struct Axis {
    values: Vec<f64>,
    spacing: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, step: f64) -> Self {
        let width = hi - lo;
        if width <= 0.0 {
            return Self {
                values: vec![lo],
                spacing: 0.0,
            };
        }
        // Guard against `0.1 / 0.01 = 10.000000000000002` adding a point.
        let n = (width / step * (1.0 - 1e-12)).ceil().max(1.0) as usize + 1;
        let spacing = width / (n - 1) as f64;
        let mut values: Vec<f64> = (0..n).map(|k| lo + spacing * k as f64).collect();
        values[n - 1] = hi;
        Self { values, spacing }
    }
}

/// The full grid with per-line and per-bus tolerances.
struct Grid {
    variable: bool,
    thetas: Vec<Axis>,
    mags: Vec<Axis>,
    /// Bound on how far any continuous point's flows sit from its nearest
    /// grid point, per line (max over both directions).
    line_tol: Vec<f64>,
    bus_tol: Vec<f64>,
}

impl Grid {
    fn new(net: &Network, spec: &GridSpec) -> Result<Self, OracleError> {
        let n = net.n_buses();
        if n > MAX_BUSES {
            return Err(OracleError::TooManyBuses { n });
        }
        let bad = |s: f64| s.is_nan() || s <= 0.0;
        if bad(spec.theta_step) || spec.vm_step.is_some_and(bad) {
            return Err(OracleError::InvalidGrid("steps must be positive".into()));
        }
        let mags: Vec<Axis> = match spec.vm_step {
            None => net
                .buses()
                .iter()
                .map(|b| {
                    let v = b.v_fixed.ok_or(OpfError::MissingFixedVoltage { bus: b.id })?;
                    Ok(Axis::new(v, v, 1.0))
                })
                .collect::<Result<_, OracleError>>()?,
            Some(step) => net
                .buses()
                .iter()
                .map(|b| match b.v_fixed {
                    Some(v) => Axis::new(v, v, step),
                    None => Axis::new(b.v_min, b.v_max, step),
                })
                .collect(),
        };
        let thetas: Vec<Axis> = if spec.vm_step.is_none() {
            let fixed: Vec<f64> = mags.iter().map(|a| a.values[0]).collect();
            net.angle_intervals(&fixed)?
                .iter()
                .map(|iv| Axis::new(iv.lo, iv.hi, spec.theta_step))
                .collect()
        } else {
            net.lines()
                .iter()
                .map(|l| Axis::new(l.theta_min, l.theta_max, spec.theta_step))
                .collect()
        };
        let size = thetas
            .iter()
            .chain(&mags)
            .try_fold(1u64, |acc, a| acc.checked_mul(a.values.len() as u64))
            .unwrap_or(u64::MAX);
        if size > MAX_POINTS {
            return Err(OracleError::BudgetExceeded { size });
        }

        let vmax = |i: usize| *mags[i].values.last().unwrap();
        let line_tol: Vec<f64> = net
            .lines()
            .iter()
            .enumerate()
            .map(|(e, l)| {
                let y = l.g.hypot(l.b);
                let (vi, vk) = (vmax(l.from), vmax(l.to));
                let (hi, hk, ht) = (mags[l.from].spacing, mags[l.to].spacing, thetas[e].spacing);
                // |∂P_ik/∂θ| ≤ v_i v_k |y|, |∂P_ik/∂v_i| ≤ 2 v_i g + v_k |y|,
                // |∂P_ik/∂v_k| ≤ v_i |y|, and symmetrically for P_ki.
                let fwd = vi * vk * y * ht / 2.0 + (2.0 * vi * l.g + vk * y) * hi / 2.0 + vi * y * hk / 2.0;
                let rev = vi * vk * y * ht / 2.0 + (2.0 * vk * l.g + vi * y) * hk / 2.0 + vk * y * hi / 2.0;
                fwd.max(rev)
            })
            .collect();
        let bus_tol = (0..n)
            .map(|i| {
                let b = net.bus(i);
                net.incident_lines(i).map(|e| line_tol[e]).sum::<f64>()
                    + 2.0 * vmax(i) * b.shunt_g.abs() * mags[i].spacing / 2.0
            })
            .collect();
        Ok(Self {
            variable: spec.vm_step.is_some(),
            thetas,
            mags,
            line_tol,
            bus_tol,
        })
    }

    /// Visit every grid point with its assignment, injections and feasibility.
    fn for_each(&self, net: &Network, mut visit: impl FnMut(&Assignment, &[f64], Violation)) {
        let n = net.n_buses();
        let m = net.n_lines();
        let mut a = Assignment {
            thetas: vec![0.0; m],
            magnitudes: vec![0.0; n],
        };
        let mut p = vec![0.0; n];
        let mut flows = vec![(0.0, 0.0); m];
        let mut profile = vec![0.0; n];
        odometer(&self.mags, &mut profile, |mags| {
            // Flow tables for this magnitude profile.
            let tables: Vec<Vec<(f64, f64)>> = net
                .lines()
                .iter()
                .zip(&self.thetas)
                .map(|(l, ax)| {
                    ax.values
                        .iter()
                        .map(|&t| flow_pair(l.g, l.b, mags[l.from], mags[l.to], t))
                        .collect()
                })
                .collect();
            let mut idx = vec![0usize; m];
            loop {
                for e in 0..m {
                    a.thetas[e] = self.thetas[e].values[idx[e]];
                    flows[e] = tables[e][idx[e]];
                }
                a.magnitudes.copy_from_slice(mags);
                for (i, bus) in net.buses().iter().enumerate() {
                    p[i] = bus.shunt_g * mags[i] * mags[i];
                }
                for (l, &(pf, pr)) in net.lines().iter().zip(&flows) {
                    p[l.from] += pf;
                    p[l.to] += pr;
                }
                let v = self.violation(net, &a, &p, &flows);
                visit(&a, &p, v);
                if !advance(&mut idx, &self.thetas) {
                    break;
                }
            }
        });
    }

    fn violation(&self, net: &Network, a: &Assignment, p: &[f64], flows: &[(f64, f64)]) -> Violation {
        let mut v = Violation::default();
        let over = |x: f64, bound: Option<f64>| bound.map_or(0.0, |b| x - b);
        for (i, bus) in net.buses().iter().enumerate() {
            let excess = over(p[i], bus.p_max).max(bus.p_min.map_or(0.0, |b| b - p[i]));
            v.record(excess, self.bus_tol[i]);
        }
        if self.variable {
            // Caps are not folded into the angle axes in variable mode.
            for (e, l) in net.lines().iter().enumerate() {
                let (vi, vk) = (a.magnitudes[l.from], a.magnitudes[l.to]);
                let tol = self.line_tol[e];
                v.record(over(line_loss(l.g, vi, vk, a.thetas[e]), l.loss_max), 2.0 * tol);
                v.record(over(flows[e].0, l.flow_max_fwd), tol);
                v.record(over(flows[e].1, l.flow_max_rev), tol);
            }
        }
        v
    }
}

/// Feasibility of one point: exact, and within grid tolerances.
#[derive(Debug, Clone, Copy)]
struct Violation {
    exact: bool,
    relaxed: bool,
}

impl Default for Violation {
    fn default() -> Self {
        Self {
            exact: true,
            relaxed: true,
        }
    }
}

impl Violation {
    fn record(&mut self, excess: f64, tol: f64) {
        if excess > 0.0 {
            self.exact = false;
        }
        if excess > tol {
            self.relaxed = false;
        }
    }
}

fn advance(idx: &mut [usize], axes: &[Axis]) -> bool {
    for (k, ax) in idx.iter_mut().zip(axes) {
        *k += 1;
        if *k < ax.values.len() {
            return true;
        }
        *k = 0;
    }
    false
}

fn odometer(axes: &[Axis], buf: &mut [f64], mut f: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; axes.len()];
    loop {
        for (b, (ax, &k)) in buf.iter_mut().zip(axes.iter().zip(&idx)) {
            *b = ax.values[k];
        }
        f(buf);
        if !advance(&mut idx, axes) {
            break;
        }
    }
}

/// All grid points with exact feasibility flags.
pub fn enumerate_region(net: &Network, grid: &GridSpec) -> Result<RegionSample, OracleError> {
    let g = Grid::new(net, grid)?;
    let mut points = Vec::new();
    g.for_each(net, |a, p, v| {
        points.push(SamplePoint {
            assignment: a.clone(),
            injections: p.to_vec(),
            feasible: v.exact,
        })
    });
    Ok(RegionSample { grid: *grid, points })
}

/// Indices of non-dominated vectors. `y` dominates `x` when `y ≤ x + tol`
/// componentwise and `y < x − tol` somewhere.
pub fn pareto_indices(points: &[Vec<f64>]) -> Vec<usize> {
    let dominates = |y: &[f64], x: &[f64]| {
        y.iter().zip(x).all(|(a, b)| *a <= b + PARETO_TOL) && y.iter().zip(x).any(|(a, b)| *a < b - PARETO_TOL)
    };
    (0..points.len())
        .filter(|&i| !points.iter().any(|y| dominates(y, &points[i])))
        .collect()
}

/// Indices of the sample points on the Pareto front of the sampled region.
pub fn pareto_front(sample: &RegionSample) -> Vec<usize> {
    let pts: Vec<Vec<f64>> = sample.points.iter().map(|p| p.injections.clone()).collect();
    pareto_indices(&pts)
}

/// Result of exhaustive minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptimum {
    /// Minimum over points feasible within grid tolerances.
    pub value: f64,
    pub argmin: Assignment,
    /// Minimum over exactly feasible points, when any exist.
    pub upper: Option<f64>,
    /// Objective change that grid resolution alone can cause.
    pub epsilon: f64,
    /// The true optimum lies in `[value − epsilon, upper]`, so it is within
    /// `gap_bound` of `value`.
    pub gap_bound: f64,
    pub points: u64,
}

/// Minimum of `obj` over the grid. Bus bounds are widened by the grid
/// tolerance so the minimum never misses a feasible region; an empty widened
/// set proves infeasibility.
pub fn oracle_optimum(net: &Network, obj: &Objective, grid: &GridSpec) -> Result<OracleOptimum, OracleError> {
    obj.validate(net)?;
    let g = Grid::new(net, grid)?;
    let mut best: Option<(f64, Assignment)> = None;
    let mut upper: Option<f64> = None;
    let mut count = 0u64;
    g.for_each(net, |a, p, v| {
        count += 1;
        if !v.relaxed {
            return;
        }
        let f = obj.eval(p);
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            best = Some((f, a.clone()));
        }
        if v.exact && upper.is_none_or(|u| f < u) {
            upper = Some(f);
        }
    });
    let (value, argmin) = best.ok_or(OracleError::EmptyFeasibleSet)?;
    let epsilon: f64 = (0..net.n_buses()).map(|i| max_slope(obj, i) * g.bus_tol[i]).sum();
    let gap_bound = match upper {
        Some(u) => epsilon.max(u - value),
        None => f64::INFINITY,
    };
    Ok(OracleOptimum {
        value,
        argmin,
        upper,
        epsilon,
        gap_bound,
        points: count,
    })
}

/// Largest objective slope magnitude in `p_i`.
fn max_slope(obj: &Objective, i: usize) -> f64 {
    match obj {
        Objective::Loss => 1.0,
        Objective::Linear(c) => c[i].abs(),
        Objective::PiecewiseLinear(f) => f[i].iter().map(|&(s, _)| s.abs()).fold(0.0, f64::max),
    }
}

/// CSV dump: `assignment,P_0..P_{n-1},feasible,pareto`.
pub fn sample_csv(sample: &RegionSample) -> String {
    let n = sample.points.first().map_or(0, |p| p.injections.len());
    let front = pareto_front(sample);
    let mut on_front = vec![false; sample.points.len()];
    for i in front {
        on_front[i] = true;
    }
    let mut out = String::from("assignment");
    for i in 0..n {
        let _ = write!(out, ",P_{i}");
    }
    out.push_str(",feasible,pareto\n");
    let variable = sample.grid.vm_step.is_some();
    for (pt, pareto) in sample.points.iter().zip(on_front) {
        out.push_str(&pt.assignment.label(variable));
        for p in &pt.injections {
            let _ = write!(out, ",{p:?}");
        }
        let _ = writeln!(out, ",{},{}", pt.feasible, pareto);
    }
    out
}
