//! Cone kernels: Nesterov–Todd scalings, Jordan-algebra products and
//! step-length computation.
//!
//! Second-order cones use `x0 ≥ ‖x1‖`. Rotated cones `2·x0·x1 ≥ ‖x2:‖²`
//! are mapped onto second-order cones by the orthogonal involution
//! `T(u, v, r) = ((u + v)/√2, (u − v)/√2, r)`, so the scaling is
//! `W = W_soc·T` and all Jordan-algebra work happens in the standard cone.

use std::f64::consts::FRAC_1_SQRT_2;

use super::Cone;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    Free,
    NonNeg,
    Soc,
    Rsoc,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub kind: Kind,
    pub start: usize,
    pub dim: usize,
}

impl Block {
    pub(crate) fn from_cones(cones: &[Cone]) -> Vec<Block> {
        let mut start = 0;
        cones
            .iter()
            .map(|c| {
                let (kind, dim) = match *c {
                    Cone::Free(d) => (Kind::Free, d),
                    Cone::NonNeg(d) => (Kind::NonNeg, d),
                    Cone::Soc(d) => (Kind::Soc, d),
                    Cone::RotatedSoc(d) => (Kind::Rsoc, d),
                };
                let b = Block { kind, start, dim };
                start += dim;
                b
            })
            .collect()
    }

    pub(crate) fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.dim
    }

    /// Barrier degree.
    pub(crate) fn degree(&self) -> usize {
        match self.kind {
            Kind::Free => 0,
            Kind::NonNeg => self.dim,
            Kind::Soc | Kind::Rsoc => 1,
        }
    }

    /// The cone's identity element in variable coordinates.
    pub(crate) fn identity(&self, out: &mut [f64]) {
        out.fill(0.0);
        match self.kind {
            Kind::Free => {}
            Kind::NonNeg => out.fill(1.0),
            Kind::Soc => out[0] = 1.0,
            Kind::Rsoc => {
                out[0] = FRAC_1_SQRT_2;
                out[1] = FRAC_1_SQRT_2;
            }
        }
    }

    /// The Jordan identity in scaled (λ) coordinates.
    pub(crate) fn scaled_identity(&self, out: &mut [f64]) {
        out.fill(0.0);
        match self.kind {
            Kind::Free => {}
            Kind::NonNeg => out.fill(1.0),
            Kind::Soc | Kind::Rsoc => out[0] = 1.0,
        }
    }

    /// Largest `α ≥ 0` (capped at `cap`) keeping `x + α·d` in the cone.
    pub(crate) fn max_step(&self, x: &[f64], d: &[f64], cap: f64) -> f64 {
        match self.kind {
            Kind::Free => cap,
            Kind::NonNeg => x
                .iter()
                .zip(d)
                .fold(cap, |a, (&xi, &di)| if di < 0.0 { a.min(-xi / di) } else { a }),
            Kind::Soc => soc_max_step(x, d, cap),
            Kind::Rsoc => soc_max_step(&rotate(x), &rotate(d), cap),
        }
    }

    /// Distance of `x` outside the cone (0 if inside).
    pub(crate) fn violation(&self, x: &[f64]) -> f64 {
        match self.kind {
            Kind::Free => 0.0,
            Kind::NonNeg => x.iter().fold(0.0, |a, &v| a.max(-v)),
            Kind::Soc => (norm(&x[1..]) - x[0]).max(0.0),
            Kind::Rsoc => {
                let r = rotate(x);
                (norm(&r[1..]) - r[0]).max(0.0)
            }
        }
    }
}

pub(crate) fn rotate(x: &[f64]) -> Vec<f64> {
    let mut r = x.to_vec();
    r[0] = (x[0] + x[1]) * FRAC_1_SQRT_2;
    r[1] = (x[0] - x[1]) * FRAC_1_SQRT_2;
    r
}

fn rotate_in_place(x: &mut [f64]) {
    let (a, b) = (x[0], x[1]);
    x[0] = (a + b) * FRAC_1_SQRT_2;
    x[1] = (a - b) * FRAC_1_SQRT_2;
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `x0² − ‖x1‖²` evaluated as a product to limit cancellation.
fn soc_det(x: &[f64]) -> f64 {
    let n = norm(&x[1..]);
    (x[0] - n) * (x[0] + n)
}

fn soc_max_step(x: &[f64], d: &[f64], cap: f64) -> f64 {
    let nd = norm(&d[1..]);
    if d[0] >= nd {
        return cap;
    }
    let a = d[0] * d[0] - nd * nd;
    let b = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let c = soc_det(x).max(0.0);
    let mut alpha = cap;
    if a == 0.0 {
        if b < 0.0 {
            alpha = alpha.min(-c / (2.0 * b));
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let q = -(b + b.signum() * s);
            for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if root > 0.0 {
                    alpha = alpha.min(root);
                }
            }
        }
    }
    if d[0] < 0.0 {
        alpha = alpha.min(-x[0] / d[0]);
    }
    alpha.max(0.0)
}

/// Nesterov–Todd scaling of one block.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    Free,
    /// `W = diag(w)` with `w = sqrt(z / x)`.
    NonNeg {
        w: Vec<f64>,
    },
    /// `W_soc = beta·B(w)` with `B` the hyperbolic boost carrying `e` to `w`.
    Soc {
        beta: f64,
        w: Vec<f64>,
        rotated: bool,
    },
}

impl Scaling {
    pub(crate) fn new(block: &Block, x: &[f64], z: &[f64]) -> Scaling {
        match block.kind {
            Kind::Free => Scaling::Free,
            Kind::NonNeg => Scaling::NonNeg {
                w: x.iter().zip(z).map(|(a, b)| (b / a).sqrt()).collect(),
            },
            Kind::Soc => soc_scaling(x, z, false),
            Kind::Rsoc => soc_scaling(&rotate(x), &rotate(z), true),
        }
    }

    /// `out = W p`.
    pub(crate) fn apply_w(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Free => out.fill(0.0),
            Scaling::NonNeg { w } => out.iter_mut().zip(p.iter().zip(w)).for_each(|(o, (a, b))| *o = a * b),
            Scaling::Soc { beta, w, rotated } => {
                out.copy_from_slice(p);
                if *rotated {
                    rotate_in_place(out);
                }
                boost(w, out, false);
                out.iter_mut().for_each(|v| *v *= beta);
            }
        }
    }

    /// `out = W^{-T} p`.
    pub(crate) fn apply_winv_t(&self, p: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Free => out.fill(0.0),
            Scaling::NonNeg { w } => out.iter_mut().zip(p.iter().zip(w)).for_each(|(o, (a, b))| *o = a / b),
            Scaling::Soc { beta, w, rotated } => {
                out.copy_from_slice(p);
                if *rotated {
                    rotate_in_place(out);
                }
                boost(w, out, true);
                out.iter_mut().for_each(|v| *v /= beta);
            }
        }
    }

    /// `out = Wᵀ q`.
    pub(crate) fn apply_w_t(&self, q: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Free => out.fill(0.0),
            Scaling::NonNeg { .. } => self.apply_w(q, out),
            Scaling::Soc { beta, w, rotated } => {
                out.copy_from_slice(q);
                boost(w, out, false);
                out.iter_mut().for_each(|v| *v *= beta);
                if *rotated {
                    rotate_in_place(out);
                }
            }
        }
    }

    /// Add `WᵀW` into the dense block `h` (row-major, `dim × dim`).
    pub(crate) fn add_hessian(&self, h: &mut [f64], dim: usize) {
        match self {
            Scaling::Free => {}
            Scaling::NonNeg { w } => {
                for i in 0..dim {
                    h[i * dim + i] += w[i] * w[i];
                }
            }
            Scaling::Soc { beta, w, rotated } => {
                // W_socᵀW_soc = beta²·(2wwᵀ − J)
                let b2 = beta * beta;
                let mut local = vec![0.0; dim * dim];
                for i in 0..dim {
                    for j in 0..dim {
                        local[i * dim + j] = 2.0 * b2 * w[i] * w[j];
                    }
                }
                local[0] -= b2;
                for i in 1..dim {
                    local[i * dim + i] += b2;
                }
                if *rotated {
                    // T H T with T acting on the first two coordinates.
                    for j in 0..dim {
                        let (a, b) = (local[j], local[dim + j]);
                        local[j] = (a + b) * FRAC_1_SQRT_2;
                        local[dim + j] = (a - b) * FRAC_1_SQRT_2;
                    }
                    for i in 0..dim {
                        let (a, b) = (local[i * dim], local[i * dim + 1]);
                        local[i * dim] = (a + b) * FRAC_1_SQRT_2;
                        local[i * dim + 1] = (a - b) * FRAC_1_SQRT_2;
                    }
                }
                h.iter_mut().zip(&local).for_each(|(a, b)| *a += b);
            }
        }
    }
}

fn soc_scaling(x: &[f64], z: &[f64], rotated: bool) -> Scaling {
    let xn = soc_det(x).max(f64::MIN_POSITIVE).sqrt();
    let zn = soc_det(z).max(f64::MIN_POSITIVE).sqrt();
    let xb: Vec<f64> = x.iter().map(|v| v / xn).collect();
    let zb: Vec<f64> = z.iter().map(|v| v / zn).collect();
    let gamma = ((1.0 + dot(&xb, &zb)) / 2.0).sqrt();
    let mut w: Vec<f64> = zb.iter().zip(&xb).map(|(a, b)| -b + a).collect();
    w[0] = zb[0] + xb[0];
    w.iter_mut().for_each(|v| *v /= 2.0 * gamma);
    // Re-normalize so wᵀJw = 1 exactly.
    w[0] = (1.0 + norm(&w[1..]).powi(2)).sqrt();
    Scaling::Soc {
        beta: (zn / xn).sqrt(),
        w,
        rotated,
    }
}

/// `p ← B(w) p`, or `p ← J B(w) J p = B(w)⁻¹ p` when `inverse`.
///
/// `B(w) = [[w0, w1ᵀ], [w1, I + w1 w1ᵀ/(1 + w0)]]`.
fn boost(w: &[f64], p: &mut [f64], inverse: bool) {
    let s = if inverse { -1.0 } else { 1.0 };
    let zeta = dot(&w[1..], &p[1..]);
    let p0 = p[0];
    let coef = s * p0 + zeta / (1.0 + w[0]);
    p[0] = w[0] * p0 + s * zeta;
    for (pi, wi) in p[1..].iter_mut().zip(&w[1..]) {
        *pi += coef * wi;
    }
}

/// Jordan product `u ∘ v` in scaled coordinates.
pub(crate) fn jordan_product(kind: Kind, u: &[f64], v: &[f64], out: &mut [f64]) {
    match kind {
        Kind::Free => out.fill(0.0),
        Kind::NonNeg => out.iter_mut().zip(u.iter().zip(v)).for_each(|(o, (a, b))| *o = a * b),
        Kind::Soc | Kind::Rsoc => {
            out[0] = dot(u, v);
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
    }
}

/// `λ \ r`: the `a` with `λ ∘ a = r`.
pub(crate) fn jordan_divide(kind: Kind, lambda: &[f64], r: &[f64], out: &mut [f64]) {
    match kind {
        Kind::Free => out.fill(0.0),
        Kind::NonNeg => out
            .iter_mut()
            .zip(r.iter().zip(lambda))
            .for_each(|(o, (a, b))| *o = a / b),
        Kind::Soc | Kind::Rsoc => {
            let det = soc_det(lambda);
            let a0 = (lambda[0] * r[0] - dot(&lambda[1..], &r[1..])) / det;
            out[0] = a0;
            for i in 1..lambda.len() {
                out[i] = (r[i] - a0 * lambda[i]) / lambda[0];
            }
        }
    }
}
