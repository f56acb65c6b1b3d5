//! Plain-text program dump, one record per line, for differential testing
//! against external solvers.
//!
//! ```text
//! treeflow-conic 1
//! dims <n_vars> <n_rows>
//! cone <free|nonneg|soc|rsoc> <dim>
//! var <j> <name>
//! row <i> <name>
//! c <j> <value>
//! b <i> <value>
//! a <i> <j> <value>
//! ```
//!
//! Zero costs and right-hand sides are omitted. Floats use Rust's shortest
//! round-trip formatting, so parsing a dump reproduces the program exactly.

use std::fmt::Write;

use super::{Cone, ConicError, ConicProgram};

const MAGIC: &str = "treeflow-conic 1";

pub fn write_program(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "dims {} {}", prog.n_vars(), prog.n_rows());
    for cone in &prog.cones {
        let _ = writeln!(out, "cone {} {}", cone.tag(), cone.dim());
    }
    for (j, name) in prog.var_names.iter().enumerate() {
        let _ = writeln!(out, "var {j} {name}");
    }
    for (i, name) in prog.row_names.iter().enumerate() {
        let _ = writeln!(out, "row {i} {name}");
    }
    for (j, &v) in prog.c.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "c {j} {v:?}");
        }
    }
    for (i, &v) in prog.b.iter().enumerate() {
        if v != 0.0 {
            let _ = writeln!(out, "b {i} {v:?}");
        }
    }
    for &(i, j, v) in &prog.a {
        let _ = writeln!(out, "a {i} {j} {v:?}");
    }
    out
}

pub fn parse_program(text: &str) -> Result<ConicProgram, ConicError> {
    let mut prog = ConicProgram::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => {
            return Err(ConicError::Parse {
                line: 1,
                message: format!("expected header `{MAGIC}`"),
            })
        }
    }
    let mut dims = None;
    for (idx, raw) in lines {
        let line = idx + 1;
        let err = |message: String| ConicError::Parse { line, message };
        let mut parts = raw.split_whitespace();
        let Some(tag) = parts.next() else { continue };
        let mut num =
            |what: &str| -> Result<&str, ConicError> { parts.next().ok_or_else(|| err(format!("missing {what}"))) };
        let idx_of = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad index `{s}`: {e}")));
        let val_of = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad value `{s}`: {e}")));
        match tag {
            "dims" => {
                let n = idx_of(num("n_vars")?)?;
                let m = idx_of(num("n_rows")?)?;
                prog.c = vec![0.0; n];
                prog.b = vec![0.0; m];
                dims = Some((n, m));
            }
            "cone" => {
                let kind = num("kind")?;
                let d = idx_of(num("dim")?)?;
                prog.cones.push(match kind {
                    "free" => Cone::Free(d),
                    "nonneg" => Cone::NonNeg(d),
                    "soc" => Cone::Soc(d),
                    "rsoc" => Cone::RotatedSoc(d),
                    other => return Err(err(format!("unknown cone `{other}`"))),
                });
            }
            "var" | "row" => {
                idx_of(num("index")?)?;
                let name = raw.splitn(3, char::is_whitespace).nth(2).unwrap_or("").to_string();
                if tag == "var" {
                    prog.var_names.push(name);
                } else {
                    prog.row_names.push(name);
                }
            }
            "c" | "b" => {
                let i = idx_of(num("index")?)?;
                let v = val_of(num("value")?)?;
                let target = if tag == "c" { &mut prog.c } else { &mut prog.b };
                *target
                    .get_mut(i)
                    .ok_or_else(|| err(format!("index {i} out of range")))? = v;
            }
            "a" => {
                let i = idx_of(num("row")?)?;
                let j = idx_of(num("column")?)?;
                let v = val_of(num("value")?)?;
                prog.a.push((i, j, v));
            }
            other => return Err(err(format!("unknown record `{other}`"))),
        }
    }
    if dims.is_none() {
        return Err(ConicError::Parse {
            line: 0,
            message: "missing dims record".into(),
        });
    }
    prog.validate()?;
    Ok(prog)
}
