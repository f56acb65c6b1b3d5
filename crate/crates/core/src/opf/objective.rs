//! Separable increasing bus costs and their conic encoding.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::OpfError;
use crate::conic::{Cone, ConicProgram};
use crate::network::Network;

/// One affine piece `slope·P + intercept` of a convex piecewise-linear cost.
pub type Piece = (f64, f64);

/// Objective `Σ f_i(P_i)` over net bus injections.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `Σ P_i`, the total active loss including shunts.
    Loss,
    /// `Σ c_i P_i` with `c_i ≥ 0`, one coefficient per bus in network order.
    Linear(Vec<f64>),
    /// `f_i(P) = max_k (slope_k P + intercept_k)` per bus in network order.
    PiecewiseLinear(Vec<Vec<Piece>>),
}

impl Objective {
    /// Check sizes, signs and slope ordering against `net`.
    pub fn validate(&self, net: &Network) -> Result<(), OpfError> {
        let n = net.n_buses();
        let bad = |msg: String| Err(OpfError::Objective(msg));
        match self {
            Objective::Loss => Ok(()),
            Objective::Linear(c) => {
                if c.len() != n {
                    return bad(format!("{} coefficients for {n} buses", c.len()));
                }
                for (i, &ci) in c.iter().enumerate() {
                    if !(ci >= 0.0 && ci.is_finite()) {
                        return bad(format!(
                            "bus {}: coefficient {ci} must be finite and nonnegative",
                            net.bus(i).id
                        ));
                    }
                }
                Ok(())
            }
            Objective::PiecewiseLinear(f) => {
                if f.len() != n {
                    return bad(format!("{} cost curves for {n} buses", f.len()));
                }
                for (i, pieces) in f.iter().enumerate() {
                    let id = net.bus(i).id;
                    if pieces.is_empty() {
                        return bad(format!("bus {id}: cost curve has no pieces"));
                    }
                    if pieces
                        .iter()
                        .any(|&(s, c)| !(s >= 0.0 && s.is_finite() && c.is_finite()))
                    {
                        return bad(format!("bus {id}: slopes must be finite and nonnegative"));
                    }
                    if pieces.windows(2).any(|w| w[1].0 < w[0].0) {
                        return bad(format!("bus {id}: slopes must be nondecreasing"));
                    }
                }
                Ok(())
            }
        }
    }

    /// Every `f_i` strictly increasing.
    pub fn is_strictly_increasing(&self) -> bool {
        match self {
            Objective::Loss => true,
            Objective::Linear(c) => c.iter().all(|&ci| ci > 0.0),
            Objective::PiecewiseLinear(f) => f.iter().all(|p| p[0].0 > 0.0),
        }
    }

    /// `Σ f_i(p_i)`.
    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            Objective::Loss => p.iter().sum(),
            Objective::Linear(c) => c.iter().zip(p).map(|(c, p)| c * p).sum(),
            Objective::PiecewiseLinear(f) => f.iter().zip(p).map(|(pieces, &x)| pwl_value(pieces, x)).sum(),
        }
    }

    /// Subdifferential `[f_i'(p⁻), f_i'(p⁺)]` of bus `i` at `p`. Pieces within
    /// `tol` of the maximum count as active.
    pub fn derivative_range(&self, i: usize, p: f64, tol: f64) -> (f64, f64) {
        match self {
            Objective::Loss => (1.0, 1.0),
            Objective::Linear(c) => (c[i], c[i]),
            Objective::PiecewiseLinear(f) => {
                let pieces = &f[i];
                let top = pwl_value(pieces, p);
                let active = pieces.iter().filter(|&&(s, c)| s * p + c >= top - tol).map(|&(s, _)| s);
                active.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s), hi.max(s)))
            }
        }
    }

    /// Linear objective from a JSON object mapping bus ids to coefficients.
    /// Buses left out cost nothing.
    pub fn linear_from_json(net: &Network, text: &str) -> Result<Self, OpfError> {
        let map: BTreeMap<String, f64> =
            serde_json::from_str(text).map_err(|e| OpfError::Objective(format!("linear cost file: {e}")))?;
        let mut c = vec![0.0; net.n_buses()];
        for (key, value) in map {
            c[bus_index(net, &key)?] = value;
        }
        let obj = Objective::Linear(c);
        obj.validate(net)?;
        Ok(obj)
    }

    /// Piecewise-linear objective from a JSON object mapping bus ids to lists
    /// of `[slope, intercept]` pairs. Buses left out cost nothing.
    pub fn pwl_from_json(net: &Network, text: &str) -> Result<Self, OpfError> {
        #[derive(Deserialize)]
        struct Pair(f64, f64);
        let map: BTreeMap<String, Vec<Pair>> =
            serde_json::from_str(text).map_err(|e| OpfError::Objective(format!("piecewise cost file: {e}")))?;
        let mut f = vec![vec![(0.0, 0.0)]; net.n_buses()];
        for (key, pieces) in map {
            f[bus_index(net, &key)?] = pieces.into_iter().map(|Pair(s, c)| (s, c)).collect();
        }
        let obj = Objective::PiecewiseLinear(f);
        obj.validate(net)?;
        Ok(obj)
    }
}

fn bus_index(net: &Network, key: &str) -> Result<usize, OpfError> {
    key.parse::<u64>()
        .ok()
        .and_then(|id| net.index_of(id))
        .ok_or_else(|| OpfError::Objective(format!("unknown bus id `{key}`")))
}

fn pwl_value(pieces: &[Piece], x: f64) -> f64 {
    pieces.iter().map(|&(s, c)| s * x + c).fold(f64::NEG_INFINITY, f64::max)
}

/// Rows added for a piecewise-linear bus cost: epigraph variable and one row
/// `t − slope·x − s = intercept` per piece.
#[derive(Debug, Clone, PartialEq)]
pub struct Epigraph {
    pub t: usize,
    pub rows: Vec<usize>,
}

/// Attach the objective to the injection variables `x`. Returns the epigraph
/// layout per bus (empty unless piecewise-linear).
pub(crate) fn encode(prog: &mut ConicProgram, obj: &Objective, x: &[usize], ids: &[u64]) -> Vec<Option<Epigraph>> {
    match obj {
        Objective::Loss => {
            for &j in x {
                prog.set_cost(j, 1.0);
            }
            vec![None; x.len()]
        }
        Objective::Linear(c) => {
            for (&j, &cj) in x.iter().zip(c) {
                prog.set_cost(j, cj);
            }
            vec![None; x.len()]
        }
        Objective::PiecewiseLinear(f) => x
            .iter()
            .zip(f)
            .zip(ids)
            .map(|((&j, pieces), id)| {
                let t = prog.add_free(format!("cost_{id}"));
                prog.set_cost(t, 1.0);
                let rows = pieces
                    .iter()
                    .enumerate()
                    .map(|(k, &(slope, intercept))| {
                        let s = prog.add_block(Cone::NonNeg(1), &[format!("cost_{id}_slack{k}")]);
                        prog.add_row(
                            &[(t, 1.0), (j, -slope), (s, -1.0)],
                            intercept,
                            format!("cost_{id}_piece{k}"),
                        )
                    })
                    .collect();
                Some(Epigraph { t, rows })
            })
            .collect(),
    }
}
