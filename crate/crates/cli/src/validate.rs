//! `treeflow validate`.

use anyhow::Result;
use treeflow_core::geometry::{angle_condition_holds, angle_threshold, baldick_condition_holds};
use treeflow_core::opf::check_assumptions;

use crate::{exit, Global};

pub fn run(g: &Global, assumptions: Option<usize>) -> Result<i32> {
    let net = g.load()?;
    let topo = net.topology();
    let max_depth = topo.depth.iter().copied().max().unwrap_or(0);
    println!(
        "{} buses, {} lines, root bus {}, depth {}, {} leaves",
        net.n_buses(),
        net.n_lines(),
        net.bus(topo.root).id,
        max_depth,
        topo.leaves.len()
    );
    let intervals = match net.fixed_magnitudes() {
        Some(v) => Some(net.angle_intervals(&v)?),
        None => None,
    };
    let mut all_ok = true;
    for (e, l) in net.lines().iter().enumerate() {
        let (lo, hi) = intervals
            .as_ref()
            .map_or((l.theta_min, l.theta_max), |iv| (iv[e].lo, iv[e].hi));
        let ok = angle_condition_holds(l.g, l.b, lo, hi);
        all_ok &= ok;
        println!(
            "line {}: g {} b {} interval [{lo:.6}, {hi:.6}] threshold {:.3} deg, angle condition {}, \
             older sufficient test {}",
            net.line_label(e),
            l.g,
            l.b,
            angle_threshold(l.g, l.b).to_degrees(),
            if ok { "holds" } else { "violated" },
            if baldick_condition_holds(l.g, l.b, lo, hi) {
                "holds"
            } else {
                "fails"
            }
        );
    }
    if !all_ok {
        println!("warning: exactness guarantees need the angle condition on every line");
    }
    if let Some(points) = assumptions {
        let r = check_assumptions(&net, points)?;
        println!(
            "assumption check over {} magnitude profiles: {} empty, {} with hull-dominated arcs ({})",
            r.samples,
            r.nonempty_failures.len(),
            r.pareto_failures.len(),
            if r.holds_at_samples() {
                "holds at samples"
            } else {
                "fails"
            }
        );
    }
    Ok(exit::OK)
}
