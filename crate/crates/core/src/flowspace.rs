//! Tree-wide flow space: the incidence map between directed line flows and
//! bus injections, unique recovery of flows from injections, and bus cost
//! weights that make per-line trade-offs consistent.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::{theta_from_forward_flow, theta_from_reverse_flow, GeometryError, LineRegion};
use crate::network::{Network, NetworkError};

/// Largest accepted root-bus mismatch after the leaf-to-root sweep.
pub const ROOT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("bus {bus} needs magnitudes: {message}")]
    Magnitudes { bus: u64, message: String },
    #[error("line {line} violates the angle condition on [{lo}, {hi}]")]
    AngleCondition { line: String, lo: f64, hi: f64 },
    #[error("injection at bus {bus} is not achievable: {source}")]
    Unachievable {
        bus: u64,
        #[source]
        source: GeometryError,
    },
    #[error("root injection mismatch {residual:e} exceeds tolerance")]
    RootMismatch { residual: f64 },
    #[error("expected {expected} entries, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("line cost must be positive, got {value} on line {line}")]
    NonPositiveCost { line: String, value: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Directed line flows: entry `2e` is `P_from,to` and `2e + 1` is `P_to,from`
/// for line `e` in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowVector(pub Vec<f64>);

impl FlowVector {
    pub fn zeros(n_lines: usize) -> Self {
        Self(vec![0.0; 2 * n_lines])
    }

    pub fn forward(&self, e: usize) -> f64 {
        self.0[2 * e]
    }

    pub fn reverse(&self, e: usize) -> f64 {
        self.0[2 * e + 1]
    }

    pub fn set(&mut self, e: usize, pair: (f64, f64)) {
        self.0[2 * e] = pair.0;
        self.0[2 * e + 1] = pair.1;
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Net active injection per bus, in network bus order.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionVector(pub Vec<f64>);

impl InjectionVector {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The `n × 2|E|` map taking directed flows to injections.
pub fn incidence_matrix(net: &Network) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(net.n_buses(), 2 * net.n_lines());
    for (e, l) in net.lines().iter().enumerate() {
        a[(l.from, 2 * e)] = 1.0;
        a[(l.to, 2 * e + 1)] = 1.0;
    }
    a
}

/// `p = A f`, plus the shunt offset `shunt_g·v_i²` when the network has fixed
/// magnitudes.
pub fn injections_from_flows(net: &Network, f: &FlowVector) -> InjectionVector {
    let mags = net.fixed_magnitudes();
    injections_at(net, f, mags.as_deref())
}

/// `p = A f` plus shunt offsets at the given magnitudes (none if `None`).
pub fn injections_at(net: &Network, f: &FlowVector, magnitudes: Option<&[f64]>) -> InjectionVector {
    let mut p = vec![0.0; net.n_buses()];
    for (e, l) in net.lines().iter().enumerate() {
        p[l.from] += f.forward(e);
        p[l.to] += f.reverse(e);
    }
    if let Some(v) = magnitudes {
        for (i, bus) in net.buses().iter().enumerate() {
            p[i] += bus.shunt_g * v[i] * v[i];
        }
    }
    InjectionVector(p)
}

/// Flows produced by per-line angle differences at the given magnitudes.
pub fn flows_from_angles(net: &Network, magnitudes: &[f64], thetas: &[f64]) -> FlowVector {
    let mut f = FlowVector::zeros(net.n_lines());
    for (e, l) in net.lines().iter().enumerate() {
        f.set(
            e,
            crate::geometry::flow_pair(l.g, l.b, magnitudes[l.from], magnitudes[l.to], thetas[e]),
        );
    }
    f
}

/// Bus voltage angles from per-line differences, with the root at zero.
pub fn bus_angles(net: &Network, line_thetas: &[f64]) -> Vec<f64> {
    let topo = net.topology();
    let mut angle = vec![0.0; net.n_buses()];
    for &k in &topo.order {
        if let Some((i, e)) = topo.parent[k] {
            let l = net.line(e);
            angle[k] = if l.from == i {
                angle[i] - line_thetas[e]
            } else {
                angle[i] + line_thetas[e]
            };
        }
    }
    angle
}

/// Flows, per-line angle differences and bus angles recovered from injections.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub flows: FlowVector,
    pub line_thetas: Vec<f64>,
    pub bus_angles: Vec<f64>,
    /// `p_root` minus the root injection implied by the recovered flows.
    pub root_residual: f64,
}

/// Per-line regions at the network's fixed magnitudes.
pub fn line_regions(net: &Network, magnitudes: &[f64]) -> Result<Vec<LineRegion>, FlowError> {
    net.lines()
        .iter()
        .enumerate()
        .map(|(e, l)| {
            LineRegion::from_line(l, magnitudes[l.from], magnitudes[l.to]).map_err(|err| match err {
                NetworkError::InfeasibleAtZero { limit, .. } => NetworkError::InfeasibleAtZero {
                    line: net.line_label(e),
                    limit,
                }
                .into(),
                other => other.into(),
            })
        })
        .collect()
}

fn require_fixed(net: &Network) -> Result<Vec<f64>, FlowError> {
    net.buses()
        .iter()
        .map(|b| {
            b.v_fixed.ok_or_else(|| FlowError::Magnitudes {
                bus: b.id,
                message: "v_fixed is required".into(),
            })
        })
        .collect()
}

/// The unique flow vector producing injections `p` at fixed magnitudes.
///
/// Buses are resolved deepest first: each non-root bus knows every flow to its
/// children, so the flow towards its parent follows from its injection and
/// determines the line's angle. The root injection is then a consistency check.
pub fn recover_flows(net: &Network, p: &InjectionVector) -> Result<Recovery, FlowError> {
    let mags = require_fixed(net)?;
    recover_flows_at(net, p, &mags)
}

pub fn recover_flows_at(net: &Network, p: &InjectionVector, magnitudes: &[f64]) -> Result<Recovery, FlowError> {
    let n = net.n_buses();
    if p.0.len() != n {
        return Err(FlowError::Dimension {
            expected: n,
            got: p.0.len(),
        });
    }
    let regions = line_regions(net, magnitudes)?;
    for (e, r) in regions.iter().enumerate() {
        if !r.angle_condition_holds() {
            return Err(FlowError::AngleCondition {
                line: net.line_label(e),
                lo: r.theta_lo,
                hi: r.theta_hi,
            });
        }
    }
    let topo = net.topology();
    let mut flows = FlowVector::zeros(net.n_lines());
    let mut thetas = vec![0.0; net.n_lines()];
    // Running sum of already resolved outgoing flows per bus.
    let mut outgoing = vec![0.0; n];
    for k in topo.leaf_to_root() {
        let Some((i, e)) = topo.parent[k] else { continue };
        let bus = net.bus(k);
        let target = p.0[k] - bus.shunt_g * magnitudes[k] * magnitudes[k] - outgoing[k];
        let line = net.line(e);
        let theta = if line.from == i {
            theta_from_reverse_flow(&regions[e], target)
        } else {
            theta_from_forward_flow(&regions[e], target)
        }
        .map_err(|source| FlowError::Unachievable { bus: bus.id, source })?;
        let pair = regions[e].flow_at(theta);
        flows.set(e, pair);
        thetas[e] = theta;
        let (to_parent, from_parent) = if line.from == i {
            (pair.1, pair.0)
        } else {
            (pair.0, pair.1)
        };
        outgoing[k] += to_parent;
        outgoing[i] += from_parent;
    }
    let root = topo.root;
    let root_residual = p.0[root] - net.bus(root).shunt_g * magnitudes[root] * magnitudes[root] - outgoing[root];
    if root_residual.abs() > ROOT_TOL {
        return Err(FlowError::RootMismatch {
            residual: root_residual,
        });
    }
    Ok(Recovery {
        bus_angles: bus_angles(net, &thetas),
        flows,
        line_thetas: thetas,
        root_residual,
    })
}

/// Positive bus costs `c_i` with `c_i / c_k = c_ik / c_ki` on every line.
///
/// `line_costs[e]` is `(c_from,to, c_to,from)`. The root takes the forward
/// cost of its first line, and each child is reached by
/// `c_k = c_i · c_ki / c_ik`.
pub fn pareto_weights(net: &Network, line_costs: &[(f64, f64)]) -> Result<Vec<f64>, FlowError> {
    if line_costs.len() != net.n_lines() {
        return Err(FlowError::Dimension {
            expected: net.n_lines(),
            got: line_costs.len(),
        });
    }
    for (e, &(a, b)) in line_costs.iter().enumerate() {
        for v in [a, b] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FlowError::NonPositiveCost {
                    line: net.line_label(e),
                    value: v,
                });
            }
        }
    }
    let topo = net.topology();
    let mut c = vec![0.0; net.n_buses()];
    c[topo.root] = net
        .incident_lines(topo.root)
        .next()
        .map(|e| {
            let l = net.line(e);
            if l.from == topo.root {
                line_costs[e].0
            } else {
                line_costs[e].1
            }
        })
        .unwrap_or(1.0);
    for &k in &topo.order {
        if let Some((i, e)) = topo.parent[k] {
            let l = net.line(e);
            let (c_ik, c_ki) = if l.from == i {
                line_costs[e]
            } else {
                (line_costs[e].1, line_costs[e].0)
            };
            c[k] = c[i] * c_ki / c_ik;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_threshold;
    use crate::network::{Bus, Line};
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn fixed_tree(parents: &[usize], params: &[(f64, f64)], mags: &[f64], frac: f64) -> Network {
        let buses = mags.iter().enumerate().map(|(i, &v)| Bus::fixed(i as u64, v)).collect();
        let lines = parents
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                let (g, b) = params[j];
                let t = angle_threshold(g, b) * frac;
                Line::new(p, j + 1, g, b).with_angles(-t, t)
            })
            .collect();
        Network::new(buses, lines).unwrap()
    }

    fn path3() -> Network {
        fixed_tree(&[0, 1], &[(1.0, 4.0), (2.0, 3.0)], &[1.0, 1.0, 1.0], 0.9)
    }

    /// Injections from the dense bus admittance matrix: `Re(diag(v v^H Y^H))`.
    fn admittance_oracle(net: &Network, mags: &[f64], bus_angles: &[f64]) -> Vec<f64> {
        let n = net.n_buses();
        let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for l in net.lines() {
            let yl = Complex64::new(l.g, -l.b);
            y[l.from][l.from] += yl;
            y[l.to][l.to] += yl;
            y[l.from][l.to] -= yl;
            y[l.to][l.from] -= yl;
        }
        for (i, bus) in net.buses().iter().enumerate() {
            y[i][i] += Complex64::new(bus.shunt_g, -bus.shunt_b);
        }
        let v: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(mags[i], bus_angles[i])).collect();
        (0..n)
            .map(|i| {
                let current: Complex64 = (0..n).map(|k| y[i][k] * v[k]).sum();
                (v[i] * current.conj()).re
            })
            .collect()
    }

    #[test]
    fn incidence_path_and_star() {
        let a = incidence_matrix(&path3());
        assert_eq!(a.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(a.row(1).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(a.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 0.0, 1.0]);
        let star = fixed_tree(&[0, 0, 0], &[(1.0, 1.0); 3], &[1.0; 4], 0.5);
        let a = incidence_matrix(&star);
        assert_eq!(a.row(0).sum(), 3.0);
        for col in a.column_iter() {
            assert_eq!(col.sum(), 1.0);
        }
    }

    #[test]
    fn injections_simple_cases() {
        let mut buses = vec![Bus::fixed(0, 1.0), Bus::fixed(1, 1.1)];
        buses[1].shunt_g = 0.2;
        let net = Network::new(buses, vec![Line::new(0, 1, 1.0, 1.0)]).unwrap();
        let p = injections_from_flows(&net, &FlowVector::zeros(1));
        assert_eq!(p.0, vec![0.0, 0.2 * 1.1 * 1.1]);
        let p = injections_at(&net, &FlowVector(vec![1.0, -0.8]), None);
        assert_eq!(p.0, vec![1.0, -0.8]);
    }

    #[test]
    fn recover_zero() {
        let net = fixed_tree(&[0], &[(1.0, 5.0)], &[1.0, 1.0], 0.5);
        let r = recover_flows(&net, &InjectionVector(vec![0.0, 0.0])).unwrap();
        assert!(r.flows.max_abs_diff(&FlowVector::zeros(1)) < 1e-15);
        assert!(r.line_thetas[0].abs() < 1e-15);
    }

    #[test]
    fn recover_path_angles() {
        let net = path3();
        let f = flows_from_angles(&net, &[1.0; 3], &[0.1, -0.05]);
        let r = recover_flows(&net, &injections_from_flows(&net, &f)).unwrap();
        assert!((r.line_thetas[0] - 0.1).abs() < 1e-9);
        assert!((r.line_thetas[1] + 0.05).abs() < 1e-9);
        assert!((r.bus_angles[1] + 0.1).abs() < 1e-9);
        assert!((r.bus_angles[2] + 0.05).abs() < 1e-9);
    }

    #[test]
    fn recover_rejects_unachievable_leaf() {
        let net = path3();
        let region = line_regions(&net, &[1.0; 3]).unwrap()[1];
        let top = region.flow_at(region.theta_lo).1;
        let err = recover_flows(&net, &InjectionVector(vec![0.0, 0.0, top + 0.01])).unwrap_err();
        assert!(matches!(err, FlowError::Unachievable { bus: 2, .. }), "{err}");
    }

    #[test]
    fn recover_rejects_root_mismatch() {
        let net = path3();
        let f = flows_from_angles(&net, &[1.0; 3], &[0.1, -0.05]);
        let mut p = injections_from_flows(&net, &f);
        p.0[0] += 1e-3;
        assert!(matches!(recover_flows(&net, &p), Err(FlowError::RootMismatch { .. })));
    }

    #[test]
    fn pareto_weight_examples() {
        let star = fixed_tree(&[0, 0, 1, 1], &[(1.0, 1.0); 4], &[1.0; 5], 0.5);
        assert_eq!(pareto_weights(&star, &[(1.0, 1.0); 4]).unwrap(), vec![1.0; 5]);
        let two = fixed_tree(&[0], &[(1.0, 1.0)], &[1.0; 2], 0.5);
        let c = pareto_weights(&two, &[(2.0, 1.0)]).unwrap();
        assert_eq!(c[0] / c[1], 2.0);
        assert!(matches!(
            pareto_weights(&two, &[(0.0, 1.0)]),
            Err(FlowError::NonPositiveCost { .. })
        ));
    }

    /// Parents, line `(g, b)`, magnitudes and angle fractions.
    type TreeCase = (Vec<usize>, Vec<(f64, f64)>, Vec<f64>, Vec<f64>);

    fn tree_case(max_n: usize) -> impl Strategy<Value = TreeCase> {
        (2..=max_n).prop_flat_map(|n| {
            let parents = (1..n).map(|k| 0..k).collect::<Vec<_>>();
            (
                parents,
                proptest::collection::vec((0.05f64..20.0, 0.05f64..20.0), n - 1),
                proptest::collection::vec(0.95f64..1.05, n),
                proptest::collection::vec(-0.95f64..0.95, n - 1),
            )
        })
    }

    /// Angles in network line order, a fraction of each line's threshold.
    fn scaled_thetas(net: &Network, fracs: &[f64], bound: f64) -> Vec<f64> {
        net.lines()
            .iter()
            .zip(fracs)
            .map(|(l, u)| angle_threshold(l.g, l.b) * bound * u)
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn round_trip((parents, params, mags, fracs) in tree_case(12)) {
            let net = fixed_tree(&parents, &params, &mags, 0.97);
            let thetas = scaled_thetas(&net, &fracs, 0.97);
            let f = flows_from_angles(&net, &mags, &thetas);
            let r = recover_flows(&net, &injections_from_flows(&net, &f)).unwrap();
            prop_assert!(r.flows.max_abs_diff(&f) <= 1e-8);
        }

        #[test]
        fn matches_admittance_oracle((parents, params, mags, fracs) in tree_case(8), shunt in 0.0f64..0.1) {
            let mut net = fixed_tree(&parents, &params, &mags, 0.97);
            let mut bus = net.bus(0).clone();
            bus.shunt_g = shunt;
            net = net.with_bus(0, bus).unwrap();
            let thetas = scaled_thetas(&net, &fracs, 0.97);
            let p = injections_from_flows(&net, &flows_from_angles(&net, &mags, &thetas));
            let oracle = admittance_oracle(&net, &mags, &bus_angles(&net, &thetas));
            for (a, b) in p.0.iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn linear_without_shunts((parents, params, mags, fracs) in tree_case(8), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let net = fixed_tree(&parents, &params, &mags, 0.97);
            let f1 = flows_from_angles(&net, &mags, &scaled_thetas(&net, &fracs, 0.9));
            let f2 = flows_from_angles(&net, &mags, &scaled_thetas(&net, &fracs, -0.4));
            let combo = FlowVector(f1.0.iter().zip(&f2.0).map(|(a, b)| alpha * a + beta * b).collect());
            let lhs = injections_at(&net, &combo, None);
            let (p1, p2) = (injections_at(&net, &f1, None), injections_at(&net, &f2, None));
            for i in 0..net.n_buses() {
                prop_assert!((lhs.0[i] - (alpha * p1.0[i] + beta * p2.0[i])).abs() <= 1e-9);
            }
        }

        #[test]
        fn distinct_angles_give_distinct_injections((parents, params, mags, fracs) in tree_case(8), line in 0usize..7, shift in 1e-6f64..1e-2) {
            let net = fixed_tree(&parents, &params, &mags, 0.97);
            let e = line % net.n_lines();
            let t1 = scaled_thetas(&net, &fracs, 0.9);
            let mut t2 = t1.clone();
            t2[e] += if t1[e] > 0.0 { -shift } else { shift };
            let p1 = injections_from_flows(&net, &flows_from_angles(&net, &mags, &t1));
            let p2 = injections_from_flows(&net, &flows_from_angles(&net, &mags, &t2));
            prop_assert!(p1.max_abs_diff(&p2) > 0.0);
        }

        #[test]
        fn pareto_ratios_hold((parents, params, mags, _fracs) in tree_case(6), costs in proptest::collection::vec((0.1f64..10.0, 0.1f64..10.0), 5)) {
            let net = fixed_tree(&parents, &params, &mags, 0.5);
            let costs = &costs[..net.n_lines()];
            let c = pareto_weights(&net, costs).unwrap();
            prop_assert!(c.iter().all(|&v| v > 0.0));
            for (e, l) in net.lines().iter().enumerate() {
                let (cik, cki) = costs[e];
                let lhs = c[l.from] * cki;
                let rhs = c[l.to] * cik;
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
            }
        }
    }
}
