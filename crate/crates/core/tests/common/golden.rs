//! Small conic programs with solutions known by hand or by enumeration.

use treeflow_core::conic::{Cone, ConicProgram, Status};

pub struct Golden {
    pub name: &'static str,
    pub program: ConicProgram,
    pub status: Status,
    /// Optimal value when `status` is optimal.
    pub objective: f64,
    /// Optimal primal point when it is unique.
    pub x: Option<Vec<f64>>,
}

fn optimal(name: &'static str, program: ConicProgram, objective: f64, x: Option<Vec<f64>>) -> Golden {
    Golden {
        name,
        program,
        status: Status::Optimal,
        objective,
        x,
    }
}

/// `min c'x` over `Ax = b, x ≥ 0` with `A` of size 2×4, solved by trying
/// every pair of basic columns.
pub fn enumerate_lp(a: [[f64; 4]; 2], b: [f64; 2], c: [f64; 4]) -> (f64, Vec<f64>) {
    let mut best = (f64::INFINITY, vec![]);
    for i in 0..4 {
        for j in (i + 1)..4 {
            let det = a[0][i] * a[1][j] - a[0][j] * a[1][i];
            if det.abs() < 1e-12 {
                continue;
            }
            let xi = (b[0] * a[1][j] - a[0][j] * b[1]) / det;
            let xj = (a[0][i] * b[1] - b[0] * a[1][i]) / det;
            if xi < -1e-12 || xj < -1e-12 {
                continue;
            }
            let mut x = vec![0.0; 4];
            x[i] = xi.max(0.0);
            x[j] = xj.max(0.0);
            let f: f64 = (0..4).map(|k| c[k] * x[k]).sum();
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    best
}

fn lp_2x4(a: [[f64; 4]; 2], b: [f64; 2], c: [f64; 4]) -> ConicProgram {
    let mut p = ConicProgram::new();
    let x = p.add_block(Cone::NonNeg(4), &[]);
    for (k, &ck) in c.iter().enumerate() {
        p.set_cost(x + k, ck);
    }
    for (r, row) in a.iter().enumerate() {
        let entries: Vec<(usize, f64)> = row.iter().enumerate().map(|(k, &v)| (x + k, v)).collect();
        p.add_row(&entries, b[r], format!("r{r}"));
    }
    p
}

pub fn suite() -> Vec<Golden> {
    let mut out = Vec::new();

    // min x1 + x2, x1 + 2 x2 = 3 → x = (0, 1.5).
    let mut p = ConicProgram::new();
    let x = p.add_block(Cone::NonNeg(2), &[]);
    p.set_cost(x, 1.0);
    p.set_cost(x + 1, 1.0);
    p.add_row(&[(x, 1.0), (x + 1, 2.0)], 3.0, "r");
    out.push(optimal("lp_single_row", p, 1.5, Some(vec![0.0, 1.5])));

    // Box: max x1 + x2 with x1 ≤ 2, x2 ≤ 3 through slacks.
    let mut p = ConicProgram::new();
    let x = p.add_block(Cone::NonNeg(4), &[]);
    p.set_cost(x, -1.0);
    p.set_cost(x + 1, -1.0);
    p.add_row(&[(x, 1.0), (x + 2, 1.0)], 2.0, "x1");
    p.add_row(&[(x + 1, 1.0), (x + 3, 1.0)], 3.0, "x2");
    out.push(optimal("lp_box", p, -5.0, Some(vec![2.0, 3.0, 0.0, 0.0])));

    // Free variable bounded below through a slack: min x, x − s = 1.
    let mut p = ConicProgram::new();
    let x = p.add_free("x");
    let s = p.add_nonneg("s");
    p.set_cost(x, 1.0);
    p.add_row(&[(x, 1.0), (s, -1.0)], 1.0, "lb");
    out.push(optimal("lp_free_variable", p, 1.0, Some(vec![1.0, 0.0])));

    // Simplex with a tie broken by the cost: x = e3.
    let mut p = ConicProgram::new();
    let x = p.add_block(Cone::NonNeg(3), &[]);
    for (k, c) in [2.0, 3.0, 1.0].into_iter().enumerate() {
        p.set_cost(x + k, c);
    }
    p.add_row(&[(x, 1.0), (x + 1, 1.0), (x + 2, 1.0)], 1.0, "sum");
    p.add_row(&[(x, 1.0), (x + 1, -1.0)], 0.0, "tie");
    out.push(optimal("lp_simplex", p, 1.0, Some(vec![0.0, 0.0, 1.0])));

    // Enumerated 2×4 LPs.
    for (name, a, b, c) in [
        (
            "lp_enumerated_a",
            [[1.0, 2.0, 1.0, 0.0], [3.0, 1.0, 0.0, 1.0]],
            [4.0, 6.0],
            [-1.0, -1.0, 0.0, 0.0],
        ),
        (
            "lp_enumerated_b",
            [[2.0, 1.0, 3.0, 1.0], [1.0, 3.0, 1.0, 2.0]],
            [5.0, 4.0],
            [3.0, 2.0, 4.0, 5.0],
        ),
    ] {
        let (f, xs) = enumerate_lp(a, b, c);
        out.push(optimal(name, lp_2x4(a, b, c), f, Some(xs)));
    }

    // Unit ball: min 3 x1 − 4 x2 with ‖x‖ ≤ 1 → −5 at (−0.6, 0.8).
    let mut p = ConicProgram::new();
    let t = p.add_block(Cone::Soc(3), &[]);
    p.set_cost(t + 1, 3.0);
    p.set_cost(t + 2, -4.0);
    p.add_row(&[(t, 1.0)], 1.0, "t");
    out.push(optimal("soc_ball", p, -5.0, Some(vec![1.0, -0.6, 0.8])));

    // Norm of a fixed vector: min t with (t, 3, 4) in the cone.
    let mut p = ConicProgram::new();
    let t = p.add_block(Cone::Soc(3), &[]);
    p.set_cost(t, 1.0);
    p.add_row(&[(t + 1, 1.0)], 3.0, "a");
    p.add_row(&[(t + 2, 1.0)], 4.0, "b");
    out.push(optimal("soc_norm", p, 5.0, Some(vec![5.0, 3.0, 4.0])));

    // Distance from (1, 2) to the line x + y = 0 is 3/√2.
    let mut p = ConicProgram::new();
    let t = p.add_block(Cone::Soc(3), &[]);
    let xy = p.add_block(Cone::Free(2), &[]);
    p.set_cost(t, 1.0);
    p.add_row(&[(t + 1, 1.0), (xy, -1.0)], -1.0, "dx");
    p.add_row(&[(t + 2, 1.0), (xy + 1, -1.0)], -2.0, "dy");
    p.add_row(&[(xy, 1.0), (xy + 1, 1.0)], 0.0, "line");
    let d = 3.0 / 2f64.sqrt();
    out.push(optimal("soc_projection", p, d, Some(vec![d, -1.5, -1.5, -0.5, 0.5])));

    // Arc point: min −x1 with x1² + x2² ≤ 1 and x2 = 0.6.
    let mut p = ConicProgram::new();
    let t = p.add_block(Cone::Soc(3), &[]);
    p.set_cost(t + 1, -1.0);
    p.add_row(&[(t, 1.0)], 1.0, "r");
    p.add_row(&[(t + 2, 1.0)], 0.6, "x2");
    out.push(optimal("soc_arc_point", p, -0.8, Some(vec![1.0, 0.8, 0.6])));

    // min u + v with 2uv ≥ 4 → u = v = √2.
    let mut p = ConicProgram::new();
    let r = p.add_block(Cone::RotatedSoc(3), &[]);
    p.set_cost(r, 1.0);
    p.set_cost(r + 1, 1.0);
    p.add_row(&[(r + 2, 1.0)], 2.0, "w");
    let s2 = 2f64.sqrt();
    out.push(optimal("rsoc_product", p, 2.0 * s2, Some(vec![s2, s2, 2.0])));

    // min u with 2·u·0.5 ≥ 9 → u = 9.
    let mut p = ConicProgram::new();
    let r = p.add_block(Cone::RotatedSoc(3), &[]);
    p.set_cost(r, 1.0);
    p.add_row(&[(r + 1, 1.0)], 0.5, "v");
    p.add_row(&[(r + 2, 1.0)], 3.0, "w");
    out.push(optimal("rsoc_fixed_side", p, 9.0, Some(vec![9.0, 0.5, 3.0])));

    // x ≥ 0 with x = −1.
    let mut p = ConicProgram::new();
    let x = p.add_nonneg("x");
    p.add_row(&[(x, 1.0)], -1.0, "neg");
    out.push(Golden {
        name: "lp_infeasible",
        program: p,
        status: Status::PrimalInfeasible,
        objective: f64::INFINITY,
        x: None,
    });

    // min −x over a free x.
    let mut p = ConicProgram::new();
    let x = p.add_free("x");
    p.set_cost(x, -1.0);
    out.push(Golden {
        name: "lp_unbounded",
        program: p,
        status: Status::DualInfeasible,
        objective: f64::NEG_INFINITY,
        x: None,
    });

    out
}
