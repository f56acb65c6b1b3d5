//! `treeflow oracle-compare`: relaxed optimum against the grid oracle.

use std::path::Path;

use anyhow::{bail, Result};
use treeflow_core::conic::Status;
use treeflow_core::geometry::angle_condition_holds;
use treeflow_core::opf::{solve_opf, Mode, Verdict};
use treeflow_core::oracle::{enumerate_region, oracle_optimum, sample_csv, GridSpec, OracleError};

use crate::{exit, write_file, Global};

/// Largest network compared.
pub const MAX_BUSES: usize = 6;

pub fn run(g: &Global, theta_step: f64, vm_step: f64, dump_samples: Option<&Path>) -> Result<i32> {
    let net = g.load()?;
    if net.n_buses() > MAX_BUSES {
        bail!(
            "oracle-compare handles at most {MAX_BUSES} buses, got {}",
            net.n_buses()
        );
    }
    let obj = g.objective_for(&net)?;
    let mode = g.mode_for(&net);
    let grid = GridSpec {
        theta_step,
        vm_step: (mode == Mode::Variable).then_some(vm_step),
    };
    let angle_ok = match net.fixed_magnitudes() {
        Some(v) if mode == Mode::Fixed => net
            .lines()
            .iter()
            .zip(net.angle_intervals(&v)?)
            .all(|(l, iv)| angle_condition_holds(l.g, l.b, iv.lo, iv.hi)),
        _ => net
            .lines()
            .iter()
            .all(|l| angle_condition_holds(l.g, l.b, l.theta_min, l.theta_max)),
    };

    let sol = solve_opf(&net, &obj, mode, &g.opf_options()?)?;
    let relaxed = match (sol.status, sol.verdict) {
        (Status::Optimal, Verdict::OriginalInfeasible) | (Status::PrimalInfeasible, _) => None,
        (Status::Optimal, _) => sol.objective,
        (s, _) => bail!("conic solver did not converge: {}", s.as_str()),
    };
    let oracle = match oracle_optimum(&net, &obj, &grid) {
        Ok(o) => Some(o),
        Err(OracleError::EmptyFeasibleSet) => None,
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = dump_samples {
        write_file(path, &sample_csv(&enumerate_region(&net, &grid)?))?;
    }

    let show = |v: Option<f64>| v.map_or("infeasible".to_string(), |x| format!("{x:.9}"));
    println!("angle condition: {}", if angle_ok { "holds" } else { "violated" });
    println!("relaxed: {}", show(relaxed));
    println!("oracle:  {}", show(oracle.as_ref().map(|o| o.value)));
    let agree = match (relaxed, &oracle) {
        (None, None) => true,
        (Some(r), Some(o)) => {
            let gap = o.value - r;
            println!("gap:     {gap:.3e}");
            println!("bound:   {:.3e}", o.gap_bound);
            gap.abs() <= o.gap_bound
        }
        _ => false,
    };
    Ok(if agree {
        println!("agreement within the grid bound");
        exit::OK
    } else if !angle_ok {
        println!("divergence: the angle condition is violated, so exactness is not expected");
        exit::DIVERGENCE
    } else {
        println!("mismatch beyond the grid bound");
        exit::MISMATCH
    })
}
