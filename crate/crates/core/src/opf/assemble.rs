//! Conic programs for the convexified OPF.
//!
//! Fixed magnitudes: each lossy line contributes its flow pair, a second-order
//! cone `(v_i v_k, u) ` with `u = M⁻¹(flows − center)`, and the chord cut that
//! closes the hull of the arc. Lossless or resistive-only lines reduce to a
//! segment described by one equality and an interval.
//!
//! Variable magnitudes: each line carries its edge submatrix
//! `[[w_i, re + j·im], [re − j·im, w_k]]`, kept positive semidefinite by a
//! rotated cone, with flows linear in `(w, re, im)`.

use std::f64::consts::FRAC_PI_2;

use super::objective::{encode, Epigraph};
use super::{Objective, OpfError};
use crate::conic::{Cone, ConicProgram};
use crate::geometry::{chord_cut, cos_range, sin_range, Chord, LineRegion};
use crate::network::{Bus, Line, Network};

/// Rows bounding a scalar variable `x`: `x − s = lo`, `x + s = hi`, or `x = v`
/// when both bounds coincide.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundRows {
    pub lower: Option<usize>,
    pub upper: Option<usize>,
    pub equal: Option<usize>,
}

/// Where a bus lives in the program.
#[derive(Debug, Clone, PartialEq)]
pub struct BusLayout {
    /// Net active injection.
    pub p: usize,
    pub p_balance: usize,
    pub p_bounds: BoundRows,
    pub epigraph: Option<Epigraph>,
    /// Reactive injection and its balance row, when the bus has q bounds in
    /// variable mode.
    pub q: Option<(usize, usize)>,
    /// Squared magnitude `w_i` (variable mode).
    pub w: Option<usize>,
}

/// How a line's flows are represented.
#[derive(Debug, Clone, PartialEq)]
pub enum LineLayout {
    /// Explicit flow variables with the cone `(t, u_sin, u_cos)` starting at
    /// `soc`, or `None` when the region is a segment or a point.
    Fixed { fwd: usize, rev: usize, soc: Option<usize> },
    /// Rotated cone `(w_i/2, w_k, re, im)` starting at `start`.
    Variable { start: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub buses: Vec<BusLayout>,
    pub lines: Vec<LineLayout>,
    /// Per-line regions at the fixed magnitudes (fixed mode only).
    pub regions: Vec<LineRegion>,
}

/// A program together with the map back to network quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub program: ConicProgram,
    pub layout: Layout,
}

fn add_bounds(prog: &mut ConicProgram, x: usize, lo: Option<f64>, hi: Option<f64>, name: &str) -> BoundRows {
    match (lo, hi) {
        (Some(l), Some(h)) if l == h => BoundRows {
            equal: Some(prog.add_row(&[(x, 1.0)], l, format!("{name}_fix"))),
            ..Default::default()
        },
        _ => {
            let lower = lo.map(|l| {
                let s = prog.add_nonneg(format!("{name}_lo_slack"));
                prog.add_row(&[(x, 1.0), (s, -1.0)], l, format!("{name}_lo"))
            });
            let upper = hi.map(|h| {
                let s = prog.add_nonneg(format!("{name}_hi_slack"));
                prog.add_row(&[(x, 1.0), (s, 1.0)], h, format!("{name}_hi"))
            });
            BoundRows {
                lower,
                upper,
                equal: None,
            }
        }
    }
}

/// `Σ terms ≤ rhs` through a nonnegative slack.
fn add_le(prog: &mut ConicProgram, terms: &[(usize, f64)], rhs: f64, name: String) -> usize {
    let s = prog.add_nonneg(format!("{name}_slack"));
    let mut t = terms.to_vec();
    t.push((s, 1.0));
    prog.add_row(&t, rhs, name)
}

fn extra_load(net: &Network, extra: &[f64]) -> Result<Vec<f64>, OpfError> {
    match extra.len() {
        0 => Ok(vec![0.0; net.n_buses()]),
        n if n == net.n_buses() => Ok(extra.to_vec()),
        n => Err(OpfError::Objective(format!(
            "extra load has {n} entries for {} buses",
            net.n_buses()
        ))),
    }
}

fn injection_vars(prog: &mut ConicProgram, net: &Network) -> Vec<usize> {
    net.buses()
        .iter()
        .map(|b| prog.add_free(format!("p_{}", b.id)))
        .collect()
}

/// Fixed-magnitude relaxation. `extra` adds load at each bus (empty for none).
pub fn assemble_fixed_voltage(net: &Network, obj: &Objective, extra: &[f64]) -> Result<Assembled, OpfError> {
    obj.validate(net)?;
    let mags: Vec<f64> = net
        .buses()
        .iter()
        .map(|b| b.v_fixed.ok_or(OpfError::MissingFixedVoltage { bus: b.id }))
        .collect::<Result<_, _>>()?;
    let extra = extra_load(net, extra)?;
    let regions = crate::flowspace::line_regions(net, &mags)?;
    let mut prog = ConicProgram::new();
    let ids: Vec<u64> = net.buses().iter().map(|b| b.id).collect();
    let x = injection_vars(&mut prog, net);

    let mut lines = Vec::with_capacity(net.n_lines());
    for (e, r) in regions.iter().enumerate() {
        let label = net.line_label(e);
        let fwd = prog.add_free(format!("pf_{label}"));
        let rev = prog.add_free(format!("pr_{label}"));
        let soc = if r.is_degenerate() {
            let (pf, pr) = r.flow_at(r.theta_lo);
            prog.add_row(&[(fwd, 1.0)], pf, format!("point_fwd_{label}"));
            prog.add_row(&[(rev, 1.0)], pr, format!("point_rev_{label}"));
            None
        } else if r.is_segment() {
            add_segment(&mut prog, r, fwd, rev, &label);
            None
        } else {
            let t = prog.add_block(
                Cone::Soc(3),
                &[format!("vv_{label}"), format!("usin_{label}"), format!("ucos_{label}")],
            );
            let (g, b) = (r.g, r.b);
            prog.add_row(&[(t, 1.0)], r.vv(), format!("vv_{label}"));
            // P_ik = v_i² g + b·u_sin − g·u_cos, P_ki = v_k² g − b·u_sin − g·u_cos
            prog.add_row(
                &[(fwd, 1.0), (t + 1, -b), (t + 2, g)],
                r.v_i * r.v_i * g,
                format!("flow_fwd_{label}"),
            );
            prog.add_row(
                &[(rev, 1.0), (t + 1, b), (t + 2, g)],
                r.v_k * r.v_k * g,
                format!("flow_rev_{label}"),
            );
            if let Chord::Cut { a, c, d } = chord_cut(r) {
                add_le(&mut prog, &[(fwd, a), (rev, c)], d, format!("chord_{label}"));
            }
            Some(t)
        };
        lines.push(LineLayout::Fixed { fwd, rev, soc });
    }

    let mut buses = Vec::with_capacity(net.n_buses());
    for (i, bus) in net.buses().iter().enumerate() {
        let mut terms = vec![(x[i], 1.0)];
        for e in net.incident_lines(i) {
            let LineLayout::Fixed { fwd, rev, .. } = lines[e] else {
                unreachable!()
            };
            terms.push((if net.line(e).from == i { fwd } else { rev }, -1.0));
        }
        let rhs = bus.shunt_g * mags[i] * mags[i] + extra[i];
        let p_balance = prog.add_row(&terms, rhs, format!("balance_{}", bus.id));
        let p_bounds = add_bounds(&mut prog, x[i], bus.p_min, bus.p_max, &format!("p_{}", bus.id));
        buses.push(BusLayout {
            p: x[i],
            p_balance,
            p_bounds,
            epigraph: None,
            q: None,
            w: None,
        });
    }
    for (b, epi) in buses.iter_mut().zip(encode(&mut prog, obj, &x, &ids)) {
        b.epigraph = epi;
    }
    Ok(Assembled {
        program: prog,
        layout: Layout { buses, lines, regions },
    })
}

/// Lines with `g = 0` or `b = 0`: the flow pair moves along a segment, so one
/// equality ties the two flows and an interval bounds the forward flow.
fn add_segment(prog: &mut ConicProgram, r: &LineRegion, fwd: usize, rev: usize, label: &str) {
    let vv = r.vv();
    let (lo, hi) = if r.g == 0.0 {
        prog.add_row(&[(fwd, 1.0), (rev, 1.0)], 0.0, format!("lossless_{label}"));
        let (slo, shi) = sin_range(r.theta_lo, r.theta_hi);
        (vv * r.b * slo, vv * r.b * shi)
    } else {
        let g = r.g;
        prog.add_row(
            &[(fwd, 1.0), (rev, -1.0)],
            (r.v_i * r.v_i - r.v_k * r.v_k) * g,
            format!("resistive_{label}"),
        );
        let (clo, chi) = cos_range(r.theta_lo, r.theta_hi);
        (r.v_i * r.v_i * g - vv * g * chi, r.v_i * r.v_i * g - vv * g * clo)
    };
    let s_lo = prog.add_nonneg(format!("seg_lo_{label}_slack"));
    prog.add_row(&[(fwd, 1.0), (s_lo, -1.0)], lo, format!("seg_lo_{label}"));
    let s_hi = prog.add_nonneg(format!("seg_hi_{label}_slack"));
    prog.add_row(&[(fwd, 1.0), (s_hi, 1.0)], hi, format!("seg_hi_{label}"));
}

/// Coefficients of `P_out` at the `from` end (`fwd`) or the `to` end over
/// `(w_from, w_to, re, im)` variables.
pub(crate) fn p_terms(l: &Line, w: (usize, usize), re: usize, im: usize, fwd: bool) -> [(usize, f64); 3] {
    if fwd {
        [(w.0, l.g), (re, -l.g), (im, l.b)]
    } else {
        [(w.1, l.g), (re, -l.g), (im, -l.b)]
    }
}

pub(crate) fn q_terms(l: &Line, w: (usize, usize), re: usize, im: usize, fwd: bool) -> [(usize, f64); 3] {
    if fwd {
        [(w.0, l.b), (re, -l.b), (im, -l.g)]
    } else {
        [(w.1, l.b), (re, -l.b), (im, l.g)]
    }
}

fn magnitude_bounds(bus: &Bus) -> (Option<f64>, Option<f64>) {
    match bus.v_fixed {
        Some(v) => (Some(v * v), Some(v * v)),
        None => (Some(bus.v_min * bus.v_min), Some(bus.v_max * bus.v_max)),
    }
}

/// Variable-magnitude relaxation. Buses with `v_fixed` keep `w_i = v_fixed²`.
pub fn assemble_variable_voltage(net: &Network, obj: &Objective, extra: &[f64]) -> Result<Assembled, OpfError> {
    obj.validate(net)?;
    let extra = extra_load(net, extra)?;
    for (e, l) in net.lines().iter().enumerate() {
        for theta in [l.theta_min, l.theta_max] {
            if theta.abs() > FRAC_PI_2 {
                return Err(OpfError::AngleBound {
                    line: net.line_label(e),
                    value: theta,
                });
            }
        }
    }
    let mut prog = ConicProgram::new();
    let ids: Vec<u64> = net.buses().iter().map(|b| b.id).collect();
    let x = injection_vars(&mut prog, net);
    let w: Vec<usize> = ids.iter().map(|id| prog.add_free(format!("w_{id}"))).collect();
    for (i, bus) in net.buses().iter().enumerate() {
        let (lo, hi) = magnitude_bounds(bus);
        add_bounds(&mut prog, w[i], lo, hi, &format!("w_{}", bus.id));
    }

    let mut lines = Vec::with_capacity(net.n_lines());
    for (e, l) in net.lines().iter().enumerate() {
        let label = net.line_label(e);
        let start = prog.add_block(
            Cone::RotatedSoc(4),
            &[
                format!("half_wf_{label}"),
                format!("wt_{label}"),
                format!("re_{label}"),
                format!("im_{label}"),
            ],
        );
        let (re, im) = (start + 2, start + 3);
        let wl = (w[l.from], w[l.to]);
        prog.add_row(&[(start, 1.0), (wl.0, -0.5)], 0.0, format!("link_from_{label}"));
        prog.add_row(&[(start + 1, 1.0), (wl.1, -1.0)], 0.0, format!("link_to_{label}"));
        let s = prog.add_nonneg(format!("re_pos_{label}_slack"));
        prog.add_row(&[(re, 1.0), (s, -1.0)], 0.0, format!("re_pos_{label}"));
        if l.theta_min == l.theta_max {
            prog.add_row(&[(im, 1.0), (re, -l.theta_min.tan())], 0.0, format!("angle_{label}"));
        } else {
            if l.theta_max.abs() < FRAC_PI_2 {
                add_le(
                    &mut prog,
                    &[(im, 1.0), (re, -l.theta_max.tan())],
                    0.0,
                    format!("angle_hi_{label}"),
                );
            }
            if l.theta_min.abs() < FRAC_PI_2 {
                add_le(
                    &mut prog,
                    &[(re, l.theta_min.tan()), (im, -1.0)],
                    0.0,
                    format!("angle_lo_{label}"),
                );
            }
        }
        if let Some(cap) = l.loss_max {
            let terms = [(wl.0, l.g), (wl.1, l.g), (re, -2.0 * l.g)];
            add_le(&mut prog, &terms, cap, format!("loss_cap_{label}"));
        }
        if let Some(cap) = l.flow_max_fwd {
            add_le(
                &mut prog,
                &p_terms(l, wl, re, im, true),
                cap,
                format!("fwd_cap_{label}"),
            );
        }
        if let Some(cap) = l.flow_max_rev {
            add_le(
                &mut prog,
                &p_terms(l, wl, re, im, false),
                cap,
                format!("rev_cap_{label}"),
            );
        }
        lines.push(LineLayout::Variable { start });
    }

    let mut buses = Vec::with_capacity(net.n_buses());
    for (i, bus) in net.buses().iter().enumerate() {
        let mut p_row = vec![(x[i], 1.0), (w[i], -bus.shunt_g)];
        let mut q_row = Vec::new();
        for e in net.incident_lines(i) {
            let l = net.line(e);
            let LineLayout::Variable { start } = lines[e] else {
                unreachable!()
            };
            let fwd = l.from == i;
            let wl = (w[l.from], w[l.to]);
            p_row.extend(p_terms(l, wl, start + 2, start + 3, fwd).map(|(j, v)| (j, -v)));
            q_row.extend(q_terms(l, wl, start + 2, start + 3, fwd).map(|(j, v)| (j, -v)));
        }
        let p_balance = prog.add_row(&p_row, extra[i], format!("balance_{}", bus.id));
        let p_bounds = add_bounds(&mut prog, x[i], bus.p_min, bus.p_max, &format!("p_{}", bus.id));
        let q = bus.has_q_bounds().then(|| {
            let qv = prog.add_free(format!("q_{}", bus.id));
            q_row.push((qv, 1.0));
            q_row.push((w[i], bus.shunt_b));
            let row = prog.add_row(&q_row, 0.0, format!("q_balance_{}", bus.id));
            add_bounds(&mut prog, qv, bus.q_min, bus.q_max, &format!("q_{}", bus.id));
            (qv, row)
        });
        buses.push(BusLayout {
            p: x[i],
            p_balance,
            p_bounds,
            epigraph: None,
            q,
            w: Some(w[i]),
        });
    }
    for (b, epi) in buses.iter_mut().zip(encode(&mut prog, obj, &x, &ids)) {
        b.epigraph = epi;
    }
    Ok(Assembled {
        program: prog,
        layout: Layout {
            buses,
            lines,
            regions: Vec::new(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Bus;

    fn two_bus() -> Network {
        Network::new(
            vec![Bus::fixed(1, 1.0), Bus::fixed(2, 1.0)],
            vec![Line::new(0, 1, 1.0, 5.0).with_angles(-0.2, 0.2)],
        )
        .unwrap()
    }

    fn count_rows(p: &ConicProgram, prefix: &str) -> usize {
        p.row_names.iter().filter(|n| n.starts_with(prefix)).count()
    }

    #[test]
    fn fixed_two_bus_structure() {
        let a = assemble_fixed_voltage(&two_bus(), &Objective::Loss, &[]).unwrap();
        let p = &a.program;
        assert_eq!(p.cone_counts().2, 1);
        assert!(p.cones.contains(&Cone::Soc(3)));
        assert_eq!(count_rows(p, "chord_"), 1);
        assert_eq!(count_rows(p, "balance_"), 2);
        p.validate().unwrap();
    }

    #[test]
    fn loss_equals_unit_linear() {
        let net = two_bus();
        let a = assemble_fixed_voltage(&net, &Objective::Loss, &[]).unwrap();
        let b = assemble_fixed_voltage(&net, &Objective::Linear(vec![1.0, 1.0]), &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_magnitude_is_an_error() {
        let net = Network::new(
            vec![Bus::fixed(1, 1.0), Bus::new(2, 0.9, 1.1)],
            vec![Line::new(0, 1, 1.0, 5.0)],
        )
        .unwrap();
        assert!(matches!(
            assemble_fixed_voltage(&net, &Objective::Loss, &[]),
            Err(OpfError::MissingFixedVoltage { bus: 2 })
        ));
    }

    #[test]
    fn variable_has_no_q_rows_without_q_bounds() {
        let a = assemble_variable_voltage(&two_bus(), &Objective::Loss, &[]).unwrap();
        assert_eq!(count_rows(&a.program, "q_"), 0);
        assert_eq!(a.program.cone_counts().3, 1);
        let mut net = two_bus();
        let mut bus = net.bus(1).clone();
        bus.q_min = Some(-1.0);
        net = net.with_bus(1, bus).unwrap();
        let a = assemble_variable_voltage(&net, &Objective::Loss, &[]).unwrap();
        assert_eq!(count_rows(&a.program, "q_balance_"), 1);
    }

    #[test]
    fn variable_rejects_wide_angles() {
        let net = Network::new(
            vec![Bus::fixed(1, 1.0), Bus::fixed(2, 1.0)],
            vec![Line::new(0, 1, 1.0, 5.0).with_angles(-2.0, 0.2)],
        )
        .unwrap();
        assert!(matches!(
            assemble_variable_voltage(&net, &Objective::Loss, &[]),
            Err(OpfError::AngleBound { .. })
        ));
    }

    #[test]
    fn default_right_angle_omits_cuts() {
        let net = Network::new(
            vec![Bus::fixed(1, 1.0), Bus::fixed(2, 1.0)],
            vec![Line::new(0, 1, 1.0, 5.0)],
        )
        .unwrap();
        let a = assemble_variable_voltage(&net, &Objective::Loss, &[]).unwrap();
        assert_eq!(count_rows(&a.program, "angle_"), 0);
    }
}
