//! Homogeneous self-dual embedding with Nesterov–Todd scaling and a
//! Mehrotra predictor-corrector.
//!
//! The embedding augments the primal-dual pair with `τ, κ ≥ 0`:
//!
//! ```text
//! A x − b τ = 0,   Aᵀy + z − c τ = 0,   cᵀx − bᵀy + κ = 0
//! ```
//!
//! Optimal solutions have `κ = 0` and are read off as `(x, y, z)/τ`;
//! infeasibility shows up as `τ → 0` with `κ > 0`.

use std::cell::Cell;

use log::{debug, trace};

use super::cones::{jordan_divide, jordan_product, Block, Kind, Scaling};
use super::{
    dot, inf_norm, residuals, ConicError, ConicProgram, ConicSolution, IterationRecord, Residuals, SolverOptions,
    Status,
};
use nalgebra::{DMatrix, DVector, LU};

const STATIC_REG: f64 = 1e-9;
/// Normwise backward error accepted for a refined KKT solve.
const KKT_ACCURACY: f64 = 1e-12;
const REG_RETRIES: usize = 3;
const INFEAS_TOL: f64 = 1e-8;
/// Certificate tolerance accepted once the iteration has broken down.
const INFEAS_TOL_REDUCED: f64 = 1e-6;
const STEP_FRACTION: f64 = 0.99;
const REFINE_STEPS: usize = 10;

struct Kkt {
    n: usize,
    m: usize,
    /// Unregularized symmetric matrix, row-major.
    k0: Vec<f64>,
    k0_norm: f64,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// Largest backward error over the solves done with this factor.
    worst: Cell<f64>,
}

impl Kkt {
    fn build(a: &[f64], n: usize, m: usize, blocks: &[Block], scalings: &[Scaling], reg: f64) -> Option<Self> {
        let dim = n + m;
        let mut k0 = vec![0.0; dim * dim];
        for (blk, s) in blocks.iter().zip(scalings) {
            let d = blk.dim;
            let mut h = vec![0.0; d * d];
            s.add_hessian(&mut h, d);
            for i in 0..d {
                for j in 0..d {
                    k0[(blk.start + i) * dim + blk.start + j] = h[i * d + j];
                }
            }
        }
        for r in 0..m {
            for j in 0..n {
                let v = a[r * n + j];
                k0[(n + r) * dim + j] = v;
                k0[j * dim + n + r] = v;
            }
        }
        // Signed static regularization keeps free-variable and redundant-row
        // pivots away from zero; partial pivoting handles the rest.
        let mut k = DMatrix::from_row_slice(dim, dim, &k0);
        for i in 0..n {
            k[(i, i)] += reg;
        }
        for i in n..dim {
            k[(i, i)] -= reg;
        }
        let k0_norm = (0..dim)
            .map(|i| k0[i * dim..(i + 1) * dim].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let lu = k.lu();
        lu.is_invertible().then_some(Self {
            n,
            m,
            k0,
            k0_norm,
            lu,
            worst: Cell::new(0.0),
        })
    }

    /// Solve `K0 s = rhs` using the regularized factor plus refinement.
    /// Singular systems still get the regularized answer; the achieved
    /// backward error is tracked in `worst`.
    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let dim = self.n + self.m;
        let residual = |s: &[f64]| -> Vec<f64> {
            (0..dim)
                .map(|i| rhs[i] - dot(&self.k0[i * dim..(i + 1) * dim], s))
                .collect()
        };
        let mut s = self.lu.solve(&DVector::from_column_slice(rhs))?.as_slice().to_vec();
        let scale = 1.0 + inf_norm(rhs);
        let mut res = residual(&s);
        let mut err = inf_norm(&res);
        for _ in 0..REFINE_STEPS {
            if err <= 1e-14 * scale {
                break;
            }
            let ds = self.lu.solve(&DVector::from_column_slice(&res))?;
            let trial: Vec<f64> = s.iter().zip(ds.iter()).map(|(a, b)| a + b).collect();
            let trial_res = residual(&trial);
            let trial_err = inf_norm(&trial_res);
            if trial_err.is_nan() || trial_err >= err {
                break;
            }
            (s, res, err) = (trial, trial_res, trial_err);
        }
        let backward = err / (inf_norm(rhs) + self.k0_norm * inf_norm(&s)).max(f64::MIN_POSITIVE);
        trace!("kkt residual {err:.2e}, backward error {backward:.2e}");
        self.worst.set(self.worst.get().max(backward));
        s.iter().all(|v| v.is_finite()).then_some(s)
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

struct State<'a> {
    prog: &'a ConicProgram,
    blocks: Vec<Block>,
    a: Vec<f64>,
    n: usize,
    m: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

impl State<'_> {
    fn new(prog: &ConicProgram) -> State<'_> {
        let (n, m) = (prog.n_vars(), prog.n_rows());
        let blocks = Block::from_cones(&prog.cones);
        let mut a = vec![0.0; m * n];
        for &(r, j, v) in &prog.a {
            a[r * n + j] += v;
        }
        let mut x = vec![0.0; n];
        let mut z = vec![0.0; n];
        for b in &blocks {
            b.identity(&mut x[b.range()]);
            b.identity(&mut z[b.range()]);
        }
        State {
            prog,
            blocks,
            a,
            n,
            m,
            x,
            y: vec![0.0; m],
            z,
            tau: 1.0,
            kappa: 1.0,
        }
    }

    fn degree(&self) -> usize {
        self.blocks.iter().map(Block::degree).sum()
    }

    fn scalings(&self) -> Vec<Scaling> {
        self.blocks
            .iter()
            .map(|b| Scaling::new(b, &self.x[b.range()], &self.z[b.range()]))
            .collect()
    }

    fn apply_w(&self, scalings: &[Scaling], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, s) in self.blocks.iter().zip(scalings) {
            s.apply_w(&p[b.range()], &mut out[b.range()]);
        }
        out
    }

    fn apply_winv_t(&self, scalings: &[Scaling], p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, s) in self.blocks.iter().zip(scalings) {
            s.apply_winv_t(&p[b.range()], &mut out[b.range()]);
        }
        out
    }

    fn apply_w_t(&self, scalings: &[Scaling], q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (b, s) in self.blocks.iter().zip(scalings) {
            s.apply_w_t(&q[b.range()], &mut out[b.range()]);
        }
        out
    }

    fn product(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for b in &self.blocks {
            jordan_product(b.kind, &u[b.range()], &v[b.range()], &mut out[b.range()]);
        }
        out
    }

    fn divide(&self, lambda: &[f64], r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for b in &self.blocks {
            jordan_divide(b.kind, &lambda[b.range()], &r[b.range()], &mut out[b.range()]);
        }
        out
    }

    fn scaled_identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.n];
        for b in &self.blocks {
            b.scaled_identity(&mut e[b.range()]);
        }
        e
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|r| dot(&self.a[r * self.n..(r + 1) * self.n], x))
            .collect()
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (o, &v) in out.iter_mut().zip(&self.a[r * self.n..(r + 1) * self.n]) {
                    *o += v * yr;
                }
            }
        }
        out
    }

    fn max_step(&self, d: &Direction, cap: f64) -> f64 {
        let mut alpha = cap;
        for b in &self.blocks {
            let r = b.range();
            alpha = b.max_step(&self.x[r.clone()], &d.dx[r.clone()], alpha);
            alpha = b.max_step(&self.z[r.clone()], &d.dz[r], alpha);
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha
    }
}

struct Resid {
    rp: Vec<f64>,
    rd: Vec<f64>,
    rg: f64,
}

#[allow(clippy::too_many_arguments)]
fn direction(
    st: &State,
    kkt: &Kkt,
    scalings: &[Scaling],
    lambda: &[f64],
    res: &Resid,
    s2: &[f64],
    rc: &[f64],
    r_tau: f64,
    eta: f64,
) -> Option<Direction> {
    let (n, m) = (st.n, st.m);
    let dz_rhs = st.apply_w_t(scalings, &st.divide(lambda, rc));
    let mut rhs = vec![0.0; n + m];
    for j in 0..n {
        rhs[j] = eta * res.rd[j] + dz_rhs[j];
    }
    for r in 0..m {
        rhs[n + r] = -eta * res.rp[r];
    }
    let s1 = kkt.solve(&rhs)?;
    let c = &st.prog.c;
    let b = &st.prog.b;
    let (x1, v1) = s1.split_at(n);
    let (x2, v2) = s2.split_at(n);
    let num = -eta * res.rg - dot(c, x1) - dot(b, v1) - r_tau / st.tau;
    let den = dot(c, x2) + dot(b, v2) - st.kappa / st.tau;
    let dtau = num / den;
    let dx: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a + dtau * b).collect();
    let dy: Vec<f64> = v1.iter().zip(v2).map(|(a, b)| -(a + dtau * b)).collect();
    let hdx = st.apply_w_t(scalings, &st.apply_w(scalings, &dx));
    let mut dz = vec![0.0; n];
    for blk in &st.blocks {
        if blk.kind != Kind::Free {
            for j in blk.range() {
                dz[j] = dz_rhs[j] - hdx[j];
            }
        }
    }
    let dkappa = (r_tau - st.kappa * dtau) / st.tau;
    let ok = dtau.is_finite() && dkappa.is_finite() && dz.iter().chain(&dx).chain(&dy).all(|v| v.is_finite());
    ok.then_some(Direction {
        dx,
        dy,
        dz,
        dtau,
        dkappa,
    })
}

/// Solve a conic program. Numerical trouble is reported through the status,
/// never by panicking; malformed programs are rejected up front.
pub fn solve(prog: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
    prog.validate()?;
    let mut st = State::new(prog);
    let (n, m) = (st.n, st.m);
    let nu = st.degree() as f64;
    let b_norm = inf_norm(&prog.b);
    let c_norm = inf_norm(&prog.c);
    let mut log = Vec::new();
    let (mut last_step, mut last_sigma) = (0.0, 0.0);
    let mut stalls = 0;
    let mut status = Status::MaxIterations;
    let mut best_cert: Option<Certificate> = None;

    for iter in 0..=opts.max_iter {
        let ax = st.a_mul(&st.x);
        let rp: Vec<f64> = ax.iter().zip(&prog.b).map(|(a, b)| a - b * st.tau).collect();
        let aty = st.at_mul(&st.y);
        let rd: Vec<f64> = (0..n).map(|j| aty[j] + st.z[j] - prog.c[j] * st.tau).collect();
        let cx = dot(&prog.c, &st.x);
        let by = dot(&prog.b, &st.y);
        let rg = cx - by + st.kappa;
        let xz = dot(&st.x, &st.z);
        let mu = (xz + st.tau * st.kappa) / (nu + 1.0);
        let (pobj, dobj) = (cx / st.tau, by / st.tau);
        let pres = inf_norm(&rp) / st.tau / (1.0 + b_norm);
        let dres = inf_norm(&rd) / st.tau / (1.0 + c_norm);
        let corrected_gap = (cx - by) / st.tau - (dot(&st.y, &rp) - dot(&st.x, &rd)) / (st.tau * st.tau);
        log.push(IterationRecord {
            iter,
            pobj,
            dobj,
            primal_res: pres,
            dual_res: dres,
            mu,
            tau: st.tau,
            kappa: st.kappa,
            corrected_gap,
            step: last_step,
            sigma: last_sigma,
        });
        trace!(
            "iter {iter}: pobj {pobj:.10e} dobj {dobj:.10e} pres {pres:.2e} dres {dres:.2e} mu {mu:.2e} tau {:.2e} kappa {:.2e}",
            st.tau,
            st.kappa
        );

        let gap = (pobj - dobj).abs().max(xz / (st.tau * st.tau)) / (1.0 + pobj.abs());
        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol {
            status = Status::Optimal;
            break;
        }
        if st.kappa > st.tau {
            let aty_z: Vec<f64> = (0..n).map(|j| aty[j] + st.z[j]).collect();
            let candidates = [
                (Status::PrimalInfeasible, by > 0.0, inf_norm(&aty_z) / by),
                (Status::DualInfeasible, cx < 0.0, inf_norm(&ax) / -cx),
            ];
            if let Some(&(s, _, _)) = candidates.iter().find(|&&(_, ok, r)| ok && r <= INFEAS_TOL) {
                status = s;
                break;
            }
            for (s, ok, r) in candidates {
                if ok && best_cert.as_ref().is_none_or(|c| r < c.ratio) {
                    best_cert = Some(Certificate::capture(&st, s, r));
                }
            }
        }
        if iter == opts.max_iter {
            break;
        }

        let scalings = st.scalings();
        let lambda = st.apply_w(&scalings, &st.x);
        let res = Resid { rp, rd, rg };
        let q: Vec<f64> = prog.c.iter().map(|c| -c).chain(prog.b.iter().copied()).collect();

        let (mut solved, mut fallback) = (None, None);
        let mut reg = STATIC_REG;
        for attempt in 0..=REG_RETRIES {
            let Some(kkt) = Kkt::build(&st.a, n, m, &st.blocks, &scalings, reg) else {
                reg *= 100.0;
                continue;
            };
            let step = kkt.solve(&q).and_then(|s2| {
                let ll = st.product(&lambda, &lambda);
                let rc_aff: Vec<f64> = ll.iter().map(|v| -v).collect();
                let r_tau_aff = -st.tau * st.kappa;
                let aff = direction(&st, &kkt, &scalings, &lambda, &res, &s2, &rc_aff, r_tau_aff, 1.0)?;
                let alpha_aff = st.max_step(&aff, 1.0);
                let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);
                let wdx = st.apply_w(&scalings, &aff.dx);
                let wdz = st.apply_winv_t(&scalings, &aff.dz);
                let cross = st.product(&wdx, &wdz);
                let e = st.scaled_identity();
                let rc: Vec<f64> = (0..n).map(|j| -ll[j] + sigma * mu * e[j] - cross[j]).collect();
                let r_tau = -st.tau * st.kappa + sigma * mu - aff.dtau * aff.dkappa;
                let dir = direction(&st, &kkt, &scalings, &lambda, &res, &s2, &rc, r_tau, 1.0 - sigma)?;
                Some((dir, sigma))
            });
            let worst = kkt.worst.get();
            if let Some(found) = step {
                if worst <= KKT_ACCURACY {
                    solved = Some(found);
                    break;
                }
                // Keep the most accurate inexact direction as a fallback.
                if fallback.as_ref().is_none_or(|&(_, w)| worst < w) {
                    fallback = Some((found, worst));
                }
            }
            debug!("iter {iter}: KKT solve inaccurate at regularization {reg:e} (attempt {attempt}, backward error {worst:.1e})");
            reg *= 100.0;
        }
        let Some((dir, sigma)) = solved.or(fallback.map(|(f, _)| f)) else {
            status = Status::NumericalFailure;
            break;
        };
        let alpha = (STEP_FRACTION * st.max_step(&dir, 1.0 / STEP_FRACTION)).min(1.0);
        if alpha < 1e-10 {
            stalls += 1;
            if stalls >= 3 {
                status = Status::NumericalFailure;
                break;
            }
        } else {
            stalls = 0;
        }
        for j in 0..n {
            st.x[j] += alpha * dir.dx[j];
            st.z[j] += alpha * dir.dz[j];
        }
        for r in 0..m {
            st.y[r] += alpha * dir.dy[r];
        }
        st.tau += alpha * dir.dtau;
        st.kappa += alpha * dir.dkappa;
        last_step = alpha;
        last_sigma = sigma;
    }

    if matches!(status, Status::NumericalFailure | Status::MaxIterations) {
        if let Some(c) = best_cert.filter(|c| c.ratio <= INFEAS_TOL_REDUCED) {
            debug!(
                "{} certificate at reduced accuracy, ratio {:.2e}",
                c.status.as_str(),
                c.ratio
            );
            status = c.status;
            c.restore(&mut st);
        }
    }
    Ok(finish(prog, st, status, log))
}

/// Iterate kept as a fallback infeasibility certificate when the solve
/// breaks down before the strict tolerance is reached.
struct Certificate {
    status: Status,
    ratio: f64,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

impl Certificate {
    fn capture(st: &State, status: Status, ratio: f64) -> Self {
        Self {
            status,
            ratio,
            x: st.x.clone(),
            y: st.y.clone(),
            z: st.z.clone(),
            tau: st.tau,
            kappa: st.kappa,
        }
    }

    fn restore(self, st: &mut State) {
        st.x = self.x;
        st.y = self.y;
        st.z = self.z;
        st.tau = self.tau;
        st.kappa = self.kappa;
    }
}

fn finish(prog: &ConicProgram, st: State, status: Status, iterations: Vec<IterationRecord>) -> ConicSolution {
    let cx = dot(&prog.c, &st.x);
    let by = dot(&prog.b, &st.y);
    let (certificate, objective) = match status {
        Status::PrimalInfeasible => (Some(st.y.iter().map(|v| v / by).collect()), f64::INFINITY),
        Status::DualInfeasible => (Some(st.x.iter().map(|v| v / -cx).collect()), f64::NEG_INFINITY),
        _ => (None, cx / st.tau),
    };
    let scale = |v: &[f64]| v.iter().map(|a| a / st.tau).collect::<Vec<_>>();
    let (x, y, z) = (scale(&st.x), scale(&st.y), scale(&st.z));
    let residuals = residuals(prog, &x, &y, &z).unwrap_or(Residuals {
        primal: f64::NAN,
        dual: f64::NAN,
        gap: f64::NAN,
    });
    debug!(
        "conic solve: {} after {} iterations, objective {objective:.12e}",
        status.as_str(),
        iterations.len() - 1
    );
    ConicSolution {
        status,
        x,
        y,
        z,
        objective,
        residuals,
        iterations,
        certificate,
    }
}
