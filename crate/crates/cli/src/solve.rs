//! `treeflow solve`.

use std::path::Path;

use anyhow::Result;
use treeflow_core::conic::write_program;
use treeflow_core::opf::{assemble_fixed_voltage, assemble_variable_voltage, solve_opf, Mode, Verdict};

use crate::{exit, write_file, Global};

pub fn run(g: &Global, dump_program: Option<&Path>) -> Result<i32> {
    let net = g.load()?;
    let obj = g.objective_for(&net)?;
    let mode = g.mode_for(&net);
    let opts = g.opf_options()?;
    if let Some(path) = dump_program {
        let a = match mode {
            Mode::Fixed => assemble_fixed_voltage(&net, &obj, &[])?,
            Mode::Variable => assemble_variable_voltage(&net, &obj, &[])?,
        };
        write_file(path, &write_program(&a.program))?;
    }
    let sol = solve_opf(&net, &obj, mode, &opts)?;
    g.emit(&(sol.to_json(&net) + "\n"))?;

    let summary = format!(
        "status {}, verdict {}, objective {}, max tightness ratio {}, {} iterations",
        sol.status.as_str(),
        sol.verdict.as_str(),
        sol.objective.map_or("n/a".to_string(), |v| format!("{v:.9}")),
        sol.objective
            .map_or("n/a".to_string(), |_| format!("{:.3e}", sol.max_ratio())),
        sol.conic.iterations.len()
    );
    // Keep standard output clean when it carries the JSON.
    if g.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    Ok(match sol.verdict {
        Verdict::TightOptimal => exit::OK,
        Verdict::OriginalInfeasible => exit::INFEASIBLE,
        Verdict::RelaxationInconclusive => exit::INCONCLUSIVE,
    })
}
