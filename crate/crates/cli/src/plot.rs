//! `treeflow plot-region`: SVG of a line's flow region with its arc, chord,
//! hull and optional bus-bound box, plus the arc samples as CSV.

use std::f64::consts::PI;
use std::fmt::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde_json::json;
use treeflow_core::geometry::{arc_samples, chord_cut, Chord, LineRegion};
use treeflow_core::oracle::pareto_indices;

use crate::{exit, write_file, Global};

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub v_from: f64,
    #[arg(long, default_value_t = 1.0)]
    pub v_to: f64,
    #[arg(long, default_value_t = -PI, allow_hyphen_values = true)]
    pub theta_min: f64,
    #[arg(long, default_value_t = PI, allow_hyphen_values = true)]
    pub theta_max: f64,
    /// Arc CSV path; defaults to the SVG path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Number of arc samples.
    #[arg(long, default_value_t = 721)]
    pub samples: usize,
}

/// Axis-aligned bus-bound box `[p_min, p_max]` per bus; `None` is unbounded.
type Bounds = [(Option<f64>, Option<f64>); 2];

fn region_from_args(g: &Global, args: &PlotArgs) -> Result<(LineRegion, Bounds)> {
    if g.network.is_some() {
        let net = g.load()?;
        if net.n_lines() != 1 {
            bail!("plot-region needs a two-bus network, got {} lines", net.n_lines());
        }
        let mags = net.fixed_magnitudes().context("plot-region needs fixed magnitudes")?;
        let l = net.line(0);
        let region = LineRegion::from_line(l, mags[l.from], mags[l.to])?;
        let b = |i: usize| (net.bus(i).p_min, net.bus(i).p_max);
        return Ok((region, [b(l.from), b(l.to)]));
    }
    let (Some(gv), Some(bv)) = (args.g, args.b) else {
        bail!("pass --network or both --g and --b");
    };
    let region = LineRegion::new(gv, bv, args.v_from, args.v_to, args.theta_min, args.theta_max)?;
    Ok((region, [(None, None); 2]))
}

fn within(p: (f64, f64), bounds: &Bounds) -> bool {
    let ok = |x: f64, (lo, hi): (Option<f64>, Option<f64>)| lo.is_none_or(|l| x >= l) && hi.is_none_or(|h| x <= h);
    ok(p.0, bounds[0]) && ok(p.1, bounds[1])
}

/// Maps flow coordinates into a square SVG canvas with `P_ki` pointing up.
struct Canvas {
    lo: (f64, f64),
    scale: f64,
    size: f64,
    margin: f64,
}

impl Canvas {
    fn new(points: &[(f64, f64)]) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-9) * 1.1;
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let size = 600.0;
        let margin = 40.0;
        Self {
            lo: (cx - span / 2.0, cy - span / 2.0),
            scale: (size - 2.0 * margin) / span,
            size,
            margin,
        }
    }

    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        (
            self.margin + (p.0 - self.lo.0) * self.scale,
            self.size - self.margin - (p.1 - self.lo.1) * self.scale,
        )
    }

    fn path(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Limits of the visible area in flow coordinates.
    fn extent(&self) -> ((f64, f64), (f64, f64)) {
        let span = (self.size - 2.0 * self.margin) / self.scale;
        ((self.lo.0, self.lo.0 + span), (self.lo.1, self.lo.1 + span))
    }
}

pub fn run(g: &Global, args: &PlotArgs) -> Result<i32> {
    let (region, bounds) = region_from_args(g, args)?;
    let svg_path = g.out.clone().unwrap_or_else(|| PathBuf::from("region.svg"));
    let csv_path = args.csv.clone().unwrap_or_else(|| svg_path.with_extension("csv"));
    let meta_path = svg_path.with_extension("json");

    let arc = arc_samples(&region, args.samples.max(2));
    let full = LineRegion {
        theta_lo: -PI,
        theta_hi: PI,
        ..region
    };
    let ellipse: Vec<(f64, f64)> = arc_samples(&full, 721).into_iter().map(|(_, p)| p).collect();
    let arc_pts: Vec<(f64, f64)> = arc.iter().map(|&(_, p)| p).collect();

    // Dominance among the arc samples that respect the bus bounds.
    let feasible: Vec<usize> = (0..arc.len()).filter(|&j| within(arc_pts[j], &bounds)).collect();
    let feasible_pts: Vec<Vec<f64>> = feasible.iter().map(|&j| vec![arc_pts[j].0, arc_pts[j].1]).collect();
    let front: Vec<usize> = pareto_indices(&feasible_pts).into_iter().map(|k| feasible[k]).collect();
    let mut on_front = vec![false; arc.len()];
    for &j in &front {
        on_front[j] = true;
    }
    let dominated = feasible.len() - front.len();

    let shape = region.ellipse_shape();
    let meta = json!({
        "center": [shape.center.0, shape.center.1],
        "major_axis_angle_deg": shape.major_axis_angle.to_degrees(),
        "semi_major": shape.semi_major,
        "semi_minor": shape.semi_minor,
        "axis_ratio": if shape.semi_minor > 0.0 { shape.semi_major / shape.semi_minor } else { f64::INFINITY },
        "segment": region.is_segment(),
        "angle_condition": region.angle_condition_holds(),
        "feasible_arc_samples": feasible.len(),
        "dominated_arc_samples": dominated,
        "dominated_arc": dominated > 0,
    });

    let mut csv = String::from("theta,p_fwd,p_rev,feasible,pareto\n");
    for (j, &(t, (pf, pr))) in arc.iter().enumerate() {
        let _ = writeln!(csv, "{t:?},{pf:?},{pr:?},{},{}", within((pf, pr), &bounds), on_front[j]);
    }

    let mut extent_pts = ellipse.clone();
    for (lo, hi) in bounds.iter() {
        for v in [lo, hi].into_iter().flatten() {
            extent_pts.push((*v, shape.center.1));
            extent_pts.push((shape.center.0, *v));
        }
    }
    let canvas = Canvas::new(&extent_pts);
    write_file(
        &svg_path,
        &render_svg(&canvas, &region, &ellipse, &arc_pts, &bounds, &meta),
    )?;
    write_file(&csv_path, &csv)?;
    let meta_text = serde_json::to_string_pretty(&meta)? + "\n";
    write_file(&meta_path, &meta_text)?;
    print!("{meta_text}");
    Ok(exit::OK)
}

fn render_svg(
    c: &Canvas,
    region: &LineRegion,
    ellipse: &[(f64, f64)],
    arc: &[(f64, f64)],
    bounds: &Bounds,
    meta: &serde_json::Value,
) -> String {
    let mut s = String::new();
    let size = c.size;
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let ((x0, x1), (y0, y1)) = c.extent();
    if x0 <= 0.0 && 0.0 <= x1 {
        let (a, b) = (c.map((0.0, y0)), c.map((0.0, y1)));
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
            a.0, a.1, b.0, b.1
        );
    }
    if y0 <= 0.0 && 0.0 <= y1 {
        let (a, b) = (c.map((x0, 0.0)), c.map((x1, 0.0)));
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999"/>"##,
            a.0, a.1, b.0, b.1
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#bbb" stroke-width="1"/>"##,
        c.path(ellipse)
    );
    if !region.is_segment() {
        let _ = writeln!(
            s,
            r##"<polygon points="{}" fill="#cfe3f7" stroke="none"/>"##,
            c.path(arc)
        );
    }
    if let Chord::Cut { .. } = chord_cut(region) {
        let [p, q] = region.endpoints();
        let (a, b) = (c.map(p), c.map(q));
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#c0392b" stroke-dasharray="6,4"/>"##,
            a.0, a.1, b.0, b.1
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f5fa8" stroke-width="3"/>"##,
        c.path(arc)
    );
    if bounds.iter().any(|(lo, hi)| lo.is_some() || hi.is_some()) {
        let bx = (bounds[0].0.unwrap_or(x0).max(x0), bounds[0].1.unwrap_or(x1).min(x1));
        let by = (bounds[1].0.unwrap_or(y0).max(y0), bounds[1].1.unwrap_or(y1).min(y1));
        if bx.0 <= bx.1 && by.0 <= by.1 {
            let (a, b) = (c.map((bx.0, by.1)), c.map((bx.1, by.0)));
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#27ae60" stroke-dasharray="4,3"/>"##,
                a.0,
                a.1,
                b.0 - a.0,
                b.1 - a.1
            );
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="10" y="20" font-family="sans-serif" font-size="12">g={} b={} theta=[{:.4}, {:.4}] angle condition {}{}</text>"#,
        region.g,
        region.b,
        region.theta_lo,
        region.theta_hi,
        if region.angle_condition_holds() {
            "holds"
        } else {
            "violated"
        },
        if meta["dominated_arc"].as_bool() == Some(true) {
            ", dominated arc points"
        } else {
            ""
        }
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-family="sans-serif" font-size="12">P_ik</text>"#,
        size - 40.0,
        size - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="10" y="40" font-family="sans-serif" font-size="12">P_ki</text>"#
    );
    s.push_str("</svg>\n");
    s
}
