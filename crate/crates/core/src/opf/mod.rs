//! Convexified optimal power flow on radial networks.
//!
//! [`solve_opf`] assembles the relaxation for fixed or variable magnitudes,
//! solves it with the conic solver, measures how far each line sits from its
//! rank-one (on-arc) boundary, recovers voltages and angles, and extracts
//! locational marginal prices from the balance-row duals.

mod assemble;
mod assumptions;
mod objective;

use serde::Serialize;
use thiserror::Error;

pub use assemble::{
    assemble_fixed_voltage, assemble_variable_voltage, Assembled, BoundRows, BusLayout, Layout, LineLayout,
};
pub use assumptions::{check_assumptions, AssumptionReport};
pub use objective::{Epigraph, Objective, Piece};

use crate::conic::{self, ConicError, ConicSolution, Residuals, SolverOptions, Status};
use crate::flowspace::{bus_angles, FlowError, FlowVector};
use crate::geometry::{angle_condition_holds, flow_pair, line_loss, LineRegion};
use crate::network::{Network, NetworkError};

/// A line is tight when its normalized slack is at most this.
pub const TIGHTNESS_TOL: f64 = 1e-6;
/// Largest violation of an original constraint accepted from a recovered state.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Stationarity residuals above this are reported as suspect.
pub const STATIONARITY_TOL: f64 = 1e-5;
/// Floor on `w_i·w_k` in the tightness ratio.
const RATIO_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OpfError {
    #[error("bus {bus} has no fixed magnitude")]
    MissingFixedVoltage { bus: u64 },
    #[error("line {line}: angle bound {value} exceeds pi/2")]
    AngleBound { line: String, value: f64 },
    #[error("objective: {0}")]
    Objective(String),
    #[error("solution is not tight (largest ratio {ratio:e})")]
    NotTight { ratio: f64 },
    #[error("no dual solution available (status {0})")]
    MissingDuals(&'static str),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Fixed,
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TightOptimal,
    OriginalInfeasible,
    RelaxationInconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::TightOptimal => "tight_optimal",
            Verdict::OriginalInfeasible => "original_infeasible",
            Verdict::RelaxationInconclusive => "relaxation_inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpfOptions {
    pub solver: SolverOptions,
    /// Additional active load per bus, in network order. Empty means none.
    pub extra_load: Vec<f64>,
}

/// Entries of a line's edge submatrix `[[w_i, re + j·im], [re − j·im, w_k]]`.
/// In fixed mode `(re, im)` is the relaxed `v_i v_k (cos θ, sin θ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeVars {
    pub w_from: f64,
    pub w_to: f64,
    pub re: f64,
    pub im: f64,
}

/// Physical state: magnitudes, bus angles (root at zero) and per-line angle
/// differences `θ_from − θ_to`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct State {
    pub magnitudes: Vec<f64>,
    pub bus_angles: Vec<f64>,
    pub line_thetas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmpReport {
    pub prices: Vec<f64>,
    /// Distance of `λ_i + λ̲_i − λ̄_i` from the subdifferential of `f_i` at `P_i`.
    pub stationarity: Vec<f64>,
}

impl LmpReport {
    pub fn suspect(&self) -> Vec<usize> {
        (0..self.prices.len())
            .filter(|&i| self.stationarity[i] > STATIONARITY_TOL)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OpfSolution {
    pub mode: Mode,
    pub status: Status,
    pub verdict: Verdict,
    /// `Σ f_i(P_i)` at the relaxed optimum; `None` unless the solver converged.
    pub objective: Option<f64>,
    pub flows: FlowVector,
    pub injections: Vec<f64>,
    /// Reactive injections of buses that carry q bounds in variable mode.
    pub reactive: Vec<Option<f64>>,
    pub edges: Vec<EdgeVars>,
    /// The state read off the relaxed point. It reproduces the solution only
    /// when every line is tight.
    pub state: State,
    pub tightness: Vec<f64>,
    pub lmps: Option<LmpReport>,
    /// Largest violation of an original constraint by `state`.
    pub violation: f64,
    pub residuals: Residuals,
    pub warnings: Vec<String>,
    pub assembled: Assembled,
    pub conic: ConicSolution,
}

impl OpfSolution {
    pub fn max_ratio(&self) -> f64 {
        self.tightness.iter().fold(0.0, |a: f64, &r| a.max(r))
    }

    pub fn is_tight(&self) -> bool {
        self.tightness.iter().all(|&r| r <= TIGHTNESS_TOL)
    }

    pub fn min_lmp(&self) -> Option<f64> {
        self.lmps
            .as_ref()
            .map(|l| l.prices.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Assemble, solve, and post-process the relaxation.
pub fn solve_opf(net: &Network, obj: &Objective, mode: Mode, opts: &OpfOptions) -> Result<OpfSolution, OpfError> {
    let mut warnings = Vec::new();
    let assembled = match mode {
        Mode::Fixed => {
            let a = assemble_fixed_voltage(net, obj, &opts.extra_load)?;
            for (e, r) in a.layout.regions.iter().enumerate() {
                if !r.angle_condition_holds() {
                    let msg = format!(
                        "line {}: angle interval [{:.6}, {:.6}] violates the angle condition",
                        net.line_label(e),
                        r.theta_lo,
                        r.theta_hi
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
            a
        }
        Mode::Variable => assemble_variable_voltage(net, obj, &opts.extra_load)?,
    };
    let sol = conic::solve(&assembled.program, &opts.solver)?;
    log::info!(
        "conic solve: {} after {} iterations",
        sol.status.as_str(),
        sol.iterations.len()
    );
    let extra = if opts.extra_load.is_empty() {
        vec![0.0; net.n_buses()]
    } else {
        opts.extra_load.clone()
    };
    Ok(post_process(net, obj, mode, assembled, sol, &extra, warnings))
}

fn post_process(
    net: &Network,
    obj: &Objective,
    mode: Mode,
    assembled: Assembled,
    sol: ConicSolution,
    extra: &[f64],
    warnings: Vec<String>,
) -> OpfSolution {
    let layout = &assembled.layout;
    let x = &sol.x;
    let injections: Vec<f64> = layout.buses.iter().map(|b| x[b.p]).collect();
    let reactive: Vec<Option<f64>> = layout.buses.iter().map(|b| b.q.map(|(q, _)| x[q])).collect();
    let mut flows = FlowVector::zeros(net.n_lines());
    let mut edges = Vec::with_capacity(net.n_lines());
    let mut state = State {
        magnitudes: match mode {
            Mode::Fixed => net.buses().iter().map(|b| b.v_fixed.unwrap_or(f64::NAN)).collect(),
            Mode::Variable => layout.buses.iter().map(|b| x[b.w.unwrap()].max(0.0).sqrt()).collect(),
        },
        ..Default::default()
    };
    for (e, (l, ll)) in net.lines().iter().zip(&layout.lines).enumerate() {
        match *ll {
            LineLayout::Fixed { fwd, rev, soc } => {
                flows.set(e, (x[fwd], x[rev]));
                let r = &layout.regions[e];
                let (re, im) = match soc {
                    Some(t) => (x[t + 2], x[t + 1]),
                    None => {
                        let th = segment_theta(r, x[fwd]);
                        (r.vv() * th.cos(), r.vv() * th.sin())
                    }
                };
                edges.push(EdgeVars {
                    w_from: r.v_i * r.v_i,
                    w_to: r.v_k * r.v_k,
                    re,
                    im,
                });
            }
            LineLayout::Variable { start } => {
                let wl = (layout.buses[l.from].w.unwrap(), layout.buses[l.to].w.unwrap());
                let eval = |terms: [(usize, f64); 3]| terms.iter().map(|&(j, v)| v * x[j]).sum::<f64>();
                flows.set(
                    e,
                    (
                        eval(assemble::p_terms(l, wl, start + 2, start + 3, true)),
                        eval(assemble::p_terms(l, wl, start + 2, start + 3, false)),
                    ),
                );
                edges.push(EdgeVars {
                    w_from: x[wl.0],
                    w_to: x[wl.1],
                    re: x[start + 2],
                    im: x[start + 3],
                });
            }
        }
    }
    state.line_thetas = edges.iter().map(|ev| ev.im.atan2(ev.re)).collect();
    state.bus_angles = bus_angles(net, &state.line_thetas);

    let optimal = sol.status == Status::Optimal;
    let mut out = OpfSolution {
        mode,
        status: sol.status,
        verdict: Verdict::RelaxationInconclusive,
        objective: optimal.then(|| obj.eval(&injections)),
        flows,
        injections,
        reactive,
        edges,
        state,
        tightness: Vec::new(),
        lmps: None,
        violation: f64::INFINITY,
        residuals: sol.residuals,
        warnings,
        assembled,
        conic: sol,
    };
    out.tightness = rank_tightness(&out);
    if optimal {
        out.violation = original_violation(net, &out, extra);
        out.lmps = lmps(net, obj, &out).ok();
        if let Some(l) = &out.lmps {
            for i in l.suspect() {
                let msg = format!(
                    "bus {}: stationarity residual {:.3e} (degenerate duals)",
                    net.bus(i).id,
                    l.stationarity[i]
                );
                log::warn!("{msg}");
                out.warnings.push(msg);
            }
        }
    }
    out.verdict = verdict(obj, &out);
    out
}

/// Angle of a segment-shaped region producing forward flow `p_fwd`.
fn segment_theta(r: &LineRegion, p_fwd: f64) -> f64 {
    if r.is_degenerate() {
        return r.theta_lo;
    }
    let vv = r.vv();
    let candidates: Vec<f64> = if r.g == 0.0 {
        let s = (p_fwd / (vv * r.b)).clamp(-1.0, 1.0).asin();
        vec![s, std::f64::consts::PI - s, -std::f64::consts::PI - s]
    } else {
        let c = ((r.v_i * r.v_i * r.g - p_fwd) / (vv * r.g)).clamp(-1.0, 1.0).acos();
        vec![c, -c]
    };
    let mid = 0.5 * (r.theta_lo + r.theta_hi);
    let dist = |t: f64| {
        if t < r.theta_lo {
            r.theta_lo - t
        } else if t > r.theta_hi {
            t - r.theta_hi
        } else {
            0.0
        }
    };
    candidates
        .into_iter()
        .min_by(|a, b| {
            (dist(*a), (a - mid).abs())
                .partial_cmp(&(dist(*b), (b - mid).abs()))
                .unwrap()
        })
        .unwrap()
        .clamp(r.theta_lo, r.theta_hi)
}

/// Normalized distance of each line from its rank-one boundary: the cone slack
/// `(v_i v_k − ‖u‖)/(v_i v_k)` in fixed mode and the scaled determinant
/// `(w_i w_k − re² − im²)/max(w_i w_k, ε)` in variable mode.
pub fn rank_tightness(sol: &OpfSolution) -> Vec<f64> {
    sol.edges
        .iter()
        .map(|ev| match sol.mode {
            Mode::Fixed => {
                let vv = (ev.w_from * ev.w_to).sqrt();
                (vv - ev.re.hypot(ev.im)) / vv
            }
            Mode::Variable => {
                let ww = ev.w_from * ev.w_to;
                (ww - ev.re * ev.re - ev.im * ev.im) / ww.max(RATIO_FLOOR)
            }
        })
        .collect()
}

/// Voltages and angles of a tight solution.
pub fn recover_state(sol: &OpfSolution) -> Result<State, OpfError> {
    if !sol.is_tight() {
        return Err(OpfError::NotTight { ratio: sol.max_ratio() });
    }
    Ok(sol.state.clone())
}

/// Prices from the balance-row duals, with a stationarity residual per bus.
pub fn lmps(net: &Network, obj: &Objective, sol: &OpfSolution) -> Result<LmpReport, OpfError> {
    if sol.status != Status::Optimal || sol.conic.y.len() != sol.assembled.program.n_rows() {
        return Err(OpfError::MissingDuals(sol.status.as_str()));
    }
    let y = &sol.conic.y;
    let mut prices = Vec::with_capacity(net.n_buses());
    let mut stationarity = Vec::with_capacity(net.n_buses());
    for (i, b) in sol.assembled.layout.buses.iter().enumerate() {
        let lambda = y[b.p_balance];
        let dual = |r: Option<usize>| r.map_or(0.0, |r| y[r]);
        // y_lower = λ̲ ≥ 0, y_upper = −λ̄ ≤ 0, and an equality row carries both.
        let g = lambda + dual(b.p_bounds.lower) + dual(b.p_bounds.upper) + dual(b.p_bounds.equal);
        let (lo, hi) = obj.derivative_range(i, sol.injections[i], 1e-7 * (1.0 + sol.injections[i].abs()));
        stationarity.push((lo - g).max(g - hi).max(0.0));
        prices.push(lambda);
    }
    Ok(LmpReport { prices, stationarity })
}

/// Largest violation of the original (unrelaxed) constraints by the state read
/// off the solution, including how well it reproduces the solved flows.
fn original_violation(net: &Network, sol: &OpfSolution, extra: &[f64]) -> f64 {
    let st = &sol.state;
    let v = &st.magnitudes;
    let mut worst: f64 = 0.0;
    let mut push = |x: f64| worst = worst.max(if x.is_nan() { f64::INFINITY } else { x });
    let below = |x: f64, bound: Option<f64>| bound.map_or(0.0, |b| (b - x).max(0.0));
    let above = |x: f64, bound: Option<f64>| bound.map_or(0.0, |b| (x - b).max(0.0));

    let mut p = vec![0.0; net.n_buses()];
    let mut q = vec![0.0; net.n_buses()];
    for (e, l) in net.lines().iter().enumerate() {
        let (vi, vk, th) = (v[l.from], v[l.to], st.line_thetas[e]);
        let (pf, pr) = flow_pair(l.g, l.b, vi, vk, th);
        push((pf - sol.flows.forward(e)).abs());
        push((pr - sol.flows.reverse(e)).abs());
        let (lo, hi) = match sol.mode {
            Mode::Fixed => {
                let r = &sol.assembled.layout.regions[e];
                (r.theta_lo, r.theta_hi)
            }
            Mode::Variable => (l.theta_min, l.theta_max),
        };
        push(lo - th);
        push(th - hi);
        push(above(line_loss(l.g, vi, vk, th), l.loss_max));
        push(above(pf, l.flow_max_fwd));
        push(above(pr, l.flow_max_rev));
        p[l.from] += pf;
        p[l.to] += pr;
        let (qf, qr) = reactive_pair(l.g, l.b, vi, vk, th);
        q[l.from] += qf;
        q[l.to] += qr;
    }
    for (i, bus) in net.buses().iter().enumerate() {
        if sol.mode == Mode::Variable {
            push(bus.v_min - v[i]);
            push(v[i] - bus.v_max);
            if let Some(vf) = bus.v_fixed {
                push((v[i] - vf).abs());
            }
        }
        let pi = p[i] + bus.shunt_g * v[i] * v[i] + extra[i];
        push((pi - sol.injections[i]).abs());
        push(below(pi, bus.p_min));
        push(above(pi, bus.p_max));
        if sol.mode == Mode::Variable && bus.has_q_bounds() {
            let qi = q[i] - bus.shunt_b * v[i] * v[i];
            push(below(qi, bus.q_min));
            push(above(qi, bus.q_max));
        }
    }
    worst
}

/// `(Q_ik, Q_ki)` for angle difference `theta`.
pub fn reactive_pair(g: f64, b: f64, v_i: f64, v_k: f64, theta: f64) -> (f64, f64) {
    let vv = v_i * v_k;
    let (s, c) = theta.sin_cos();
    (
        v_i * v_i * b - vv * b * c - vv * g * s,
        v_k * v_k * b - vv * b * c + vv * g * s,
    )
}

fn verdict(obj: &Objective, sol: &OpfSolution) -> Verdict {
    match sol.status {
        Status::PrimalInfeasible => Verdict::OriginalInfeasible,
        Status::Optimal => {
            let tight = sol.is_tight();
            if tight && sol.violation <= FEASIBILITY_TOL {
                return Verdict::TightOptimal;
            }
            // Under the angle condition and a strictly increasing cost, the
            // relaxed optimum lies on the arc of every line whenever the
            // original problem is feasible, so leaving the arc is a proof of
            // infeasibility.
            let angles_ok = sol.mode == Mode::Fixed
                && sol
                    .assembled
                    .layout
                    .regions
                    .iter()
                    .all(|r| angle_condition_holds(r.g, r.b, r.theta_lo, r.theta_hi));
            if !tight && angles_ok && obj.is_strictly_increasing() {
                Verdict::OriginalInfeasible
            } else {
                Verdict::RelaxationInconclusive
            }
        }
        _ => Verdict::RelaxationInconclusive,
    }
}

#[derive(Serialize)]
struct FlowJson {
    from: u64,
    to: u64,
    p_fwd: f64,
    p_rev: f64,
}

#[derive(Serialize)]
struct BusJson {
    id: u64,
    vm: f64,
    va: f64,
    p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    lmp: Option<f64>,
}

#[derive(Serialize)]
struct TightJson {
    from: u64,
    to: u64,
    ratio: f64,
}

#[derive(Serialize)]
struct ResidualJson {
    primal: f64,
    dual: f64,
    gap: f64,
    max_stationarity: Option<f64>,
    constraint_violation: Option<f64>,
}

#[derive(Serialize)]
struct SolutionJson {
    status: &'static str,
    verdict: Verdict,
    objective: Option<f64>,
    flows: Vec<FlowJson>,
    buses: Vec<BusJson>,
    tightness: Vec<TightJson>,
    residuals: ResidualJson,
}

impl OpfSolution {
    /// Serialized report. Flows, buses and tightness are empty unless the
    /// solver converged.
    pub fn to_json(&self, net: &Network) -> String {
        let optimal = self.status == Status::Optimal;
        let ids = |e: usize| {
            let l = net.line(e);
            (net.bus(l.from).id, net.bus(l.to).id)
        };
        let lines = if optimal { 0..net.n_lines() } else { 0..0 };
        let flows = lines
            .clone()
            .map(|e| {
                let (from, to) = ids(e);
                FlowJson {
                    from,
                    to,
                    p_fwd: self.flows.forward(e),
                    p_rev: self.flows.reverse(e),
                }
            })
            .collect();
        let tightness = lines
            .map(|e| {
                let (from, to) = ids(e);
                TightJson {
                    from,
                    to,
                    ratio: self.tightness[e],
                }
            })
            .collect();
        let buses = if optimal {
            net.buses()
                .iter()
                .enumerate()
                .map(|(i, b)| BusJson {
                    id: b.id,
                    vm: self.state.magnitudes[i],
                    va: self.state.bus_angles[i],
                    p: self.injections[i],
                    q: self.reactive[i],
                    lmp: self.lmps.as_ref().map(|l| l.prices[i]),
                })
                .collect()
        } else {
            Vec::new()
        };
        let doc = SolutionJson {
            status: self.status.as_str(),
            verdict: self.verdict,
            objective: self.objective,
            flows,
            buses,
            tightness,
            residuals: ResidualJson {
                primal: self.residuals.primal,
                dual: self.residuals.dual,
                gap: self.residuals.gap,
                max_stationarity: self
                    .lmps
                    .as_ref()
                    .map(|l| l.stationarity.iter().fold(0.0, |a: f64, &s| a.max(s))),
                constraint_violation: optimal.then_some(self.violation),
            },
        };
        serde_json::to_string_pretty(&doc).expect("solution serializes")
    }
}
