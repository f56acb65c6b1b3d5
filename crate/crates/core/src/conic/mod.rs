//! Conic programs and a primal-dual interior-point solver.
//!
//! Programs are posed in the standard form
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  x ∈ K
//! ```
//!
//! where `K` is a product of free, nonnegative, second-order and rotated
//! second-order cones laid out contiguously over `x`. The dual is
//! `maximize bᵀy  subject to  Aᵀy + z = c,  z ∈ K*`, with `z = 0` on free
//! blocks. Equality duals therefore satisfy `∂(optimal value)/∂b = y`.

mod cones;
mod dump;
mod ipm;

pub use dump::{parse_program, write_program};
pub use ipm::solve;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConicError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One cone block over consecutive variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Free(usize),
    NonNeg(usize),
    /// `x0 ≥ ‖x1:‖`, dimension at least 2.
    Soc(usize),
    /// `2·x0·x1 ≥ ‖x2:‖²` with `x0, x1 ≥ 0`, dimension at least 3.
    RotatedSoc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Free(d) | Cone::NonNeg(d) | Cone::Soc(d) | Cone::RotatedSoc(d) => d,
        }
    }

    pub(crate) fn tag(&self) -> &'static str {
        match self {
            Cone::Free(_) => "free",
            Cone::NonNeg(_) => "nonneg",
            Cone::Soc(_) => "soc",
            Cone::RotatedSoc(_) => "rsoc",
        }
    }
}

/// A cone program with a sparse equality matrix in triplet form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    /// `(row, column, value)`; duplicates are summed.
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub var_names: Vec<String>,
    pub row_names: Vec<String>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    /// Append a cone block and return the index of its first variable.
    pub fn add_block(&mut self, cone: Cone, names: &[String]) -> usize {
        let start = self.c.len();
        let d = cone.dim();
        self.c.resize(start + d, 0.0);
        for j in 0..d {
            self.var_names
                .push(names.get(j).cloned().unwrap_or_else(|| format!("x{}", start + j)));
        }
        self.cones.push(cone);
        start
    }

    /// Append one free variable and return its index.
    pub fn add_free(&mut self, name: impl Into<String>) -> usize {
        self.add_block(Cone::Free(1), &[name.into()])
    }

    /// Append one nonnegative variable and return its index.
    pub fn add_nonneg(&mut self, name: impl Into<String>) -> usize {
        self.add_block(Cone::NonNeg(1), &[name.into()])
    }

    /// Append the row `Σ coef·x_j = rhs` and return its index.
    pub fn add_row(&mut self, entries: &[(usize, f64)], rhs: f64, name: impl Into<String>) -> usize {
        let row = self.b.len();
        for &(j, v) in entries {
            if v != 0.0 {
                self.a.push((row, j, v));
            }
        }
        self.b.push(rhs);
        self.row_names.push(name.into());
        row
    }

    pub fn set_cost(&mut self, j: usize, value: f64) {
        self.c[j] = value;
    }

    /// Number of blocks of each kind: `(free, nonneg, soc, rsoc)`.
    pub fn cone_counts(&self) -> (usize, usize, usize, usize) {
        let mut counts = (0, 0, 0, 0);
        for c in &self.cones {
            match c {
                Cone::Free(_) => counts.0 += 1,
                Cone::NonNeg(_) => counts.1 += 1,
                Cone::Soc(_) => counts.2 += 1,
                Cone::RotatedSoc(_) => counts.3 += 1,
            }
        }
        counts
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.n_vars();
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != n {
            return Err(ConicError::Dimension(format!(
                "cone dimensions sum to {total}, program has {n} variables"
            )));
        }
        for cone in &self.cones {
            let ok = match *cone {
                Cone::Free(d) | Cone::NonNeg(d) => d >= 1,
                Cone::Soc(d) => d >= 2,
                Cone::RotatedSoc(d) => d >= 3,
            };
            if !ok {
                return Err(ConicError::Malformed(format!("{cone:?} is too small")));
            }
        }
        for &(r, j, v) in &self.a {
            if r >= self.n_rows() || j >= n {
                return Err(ConicError::Dimension(format!(
                    "entry ({r}, {j}) outside {}x{n}",
                    self.n_rows()
                )));
            }
            if !v.is_finite() {
                return Err(ConicError::Malformed(format!("entry ({r}, {j}) is not finite")));
            }
        }
        if self.c.iter().chain(&self.b).any(|v| !v.is_finite()) {
            return Err(ConicError::Malformed("non-finite cost or right-hand side".into()));
        }
        if !self.var_names.is_empty() && self.var_names.len() != n {
            return Err(ConicError::Dimension("variable name count".into()));
        }
        if !self.row_names.is_empty() && self.row_names.len() != self.n_rows() {
            return Err(ConicError::Dimension("row name count".into()));
        }
        Ok(())
    }

    /// `A x`.
    pub fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows()];
        for &(r, j, v) in &self.a {
            out[r] += v * x[j];
        }
        out
    }

    /// `Aᵀ y`.
    pub fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_vars()];
        for &(r, j, v) in &self.a {
            out[j] += v * y[r];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::PrimalInfeasible => "primal_infeasible",
            Status::DualInfeasible => "dual_infeasible",
            Status::MaxIterations => "max_iterations",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

/// Scaled residual norms; all three are at most the tolerance at an
/// optimal solution.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Residuals {
    /// `‖Ax − b‖∞ / (1 + ‖b‖∞)`.
    pub primal: f64,
    /// `‖Aᵀy + z − c‖∞ / (1 + ‖c‖∞)`.
    pub dual: f64,
    /// `max(|cᵀx − bᵀy|, xᵀz) / (1 + |cᵀx|)`. The two agree at a feasible
    /// point; away from one, large duals let the objective gap hide a
    /// complementarity defect.
    pub gap: f64,
}

/// Per-iteration trace of the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub pobj: f64,
    pub dobj: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    /// `(cᵀx − bᵀy)/τ − (yᵀr_p − xᵀr_d)/τ²`, which equals `xᵀz/τ²`: the
    /// duality gap of the current iterate corrected for its infeasibility.
    pub corrected_gap: f64,
    pub step: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: Status,
    /// Primal point; it is also the cone slack since the cones act on `x`.
    pub x: Vec<f64>,
    /// Equality duals.
    pub y: Vec<f64>,
    /// Dual cone slacks.
    pub z: Vec<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: Vec<IterationRecord>,
    /// Farkas-type certificate when infeasibility is detected: `y` for
    /// primal infeasibility, `x` for dual infeasibility.
    pub certificate: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Recompute scaled residuals of `(x, y, z)` directly from the program data.
pub fn residuals(prog: &ConicProgram, x: &[f64], y: &[f64], z: &[f64]) -> Result<Residuals, ConicError> {
    let (n, m) = (prog.n_vars(), prog.n_rows());
    if x.len() != n || z.len() != n || y.len() != m {
        return Err(ConicError::Dimension(format!(
            "program is {m}x{n}, got x: {}, y: {}, z: {}",
            x.len(),
            y.len(),
            z.len()
        )));
    }
    let ax = prog.a_mul(x);
    let rp: Vec<f64> = ax.iter().zip(&prog.b).map(|(a, b)| a - b).collect();
    let aty = prog.at_mul(y);
    let rd: Vec<f64> = (0..n).map(|j| aty[j] + z[j] - prog.c[j]).collect();
    let pobj = dot(&prog.c, x);
    let dobj = dot(&prog.b, y);
    Ok(Residuals {
        primal: inf_norm(&rp) / (1.0 + inf_norm(&prog.b)),
        dual: inf_norm(&rd) / (1.0 + inf_norm(&prog.c)),
        gap: (pobj - dobj).abs().max(dot(x, z)) / (1.0 + pobj.abs()),
    })
}

/// Residuals of a solution, recomputed from scratch.
pub fn solution_residuals(prog: &ConicProgram, sol: &ConicSolution) -> Result<Residuals, ConicError> {
    residuals(prog, &sol.x, &sol.y, &sol.z)
}

/// Largest distance of `v` outside the cone product `K` (self-dual, so this
/// also measures dual-cone violation of `z`). Free blocks of a dual slack
/// must be zero; pass `dual = true` to count them.
pub fn cone_violation(prog: &ConicProgram, v: &[f64], dual: bool) -> f64 {
    cones::Block::from_cones(&prog.cones)
        .iter()
        .map(|b| {
            let s = &v[b.range()];
            if b.kind == cones::Kind::Free {
                if dual {
                    inf_norm(s)
                } else {
                    0.0
                }
            } else {
                b.violation(s)
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_layout() {
        let mut p = ConicProgram::new();
        let x = p.add_free("x");
        let s = p.add_block(Cone::Soc(3), &["t".into(), "u1".into(), "u2".into()]);
        p.add_row(&[(x, 1.0), (s, 2.0)], 1.0, "r0");
        assert_eq!((x, s), (0, 1));
        assert_eq!(p.n_vars(), 4);
        assert_eq!(p.cone_counts(), (1, 0, 1, 0));
        p.validate().unwrap();
        assert_eq!(p.a_mul(&[1.0, 1.0, 0.0, 0.0]), vec![3.0]);
        assert_eq!(p.at_mul(&[2.0]), vec![2.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn validate_catches_bad_cones() {
        let mut p = ConicProgram::new();
        p.add_block(Cone::RotatedSoc(2), &[]);
        assert!(matches!(p.validate(), Err(ConicError::Malformed(_))));
        let mut p = ConicProgram::new();
        p.add_free("x");
        p.cones.push(Cone::NonNeg(1));
        assert!(matches!(p.validate(), Err(ConicError::Dimension(_))));
    }

    #[test]
    fn residuals_of_empty_program() {
        let p = ConicProgram::new();
        let r = residuals(&p, &[], &[], &[]).unwrap();
        assert_eq!(r, Residuals::default());
        assert!(residuals(&p, &[1.0], &[], &[]).is_err());
    }
}
