//! CSV emission and re-parsing for traced paths.
//!
//! Columns are fixed: `delta,F_along,Fx,Fy,Fz,Mx,My,Mz,energy,stable,
//! min_eig,tangent_stiffness`, one row per path point. Numbers are
//! printed with the shortest representation that parses back to the
//! identical bit pattern, so emitted files round-trip exactly. Rows
//! whose solve did not converge (or could not be classified) carry
//! `stable = gap` and `NaN` in the value columns that depend on the
//! solution.

use stiffbuck_core::pathtrace::PathPoint;
use stiffbuck_core::stability::Classification;

use crate::error::CliError;

/// The one and only header line.
pub const HEADER: &str = "delta,F_along,Fx,Fy,Fz,Mx,My,Mz,energy,stable,min_eig,tangent_stiffness";

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub delta: f64,
    pub f_along: f64,
    pub force: [f64; 3],
    pub moment: [f64; 3],
    pub energy: f64,
    pub stable: String,
    pub min_eig: f64,
    pub tangent_stiffness: f64,
}

/// Stability label of a path point: the verdict name, or `gap` when the
/// solve failed or the verdict is missing.
pub fn stability_label(point: &PathPoint) -> &'static str {
    if !point.converged {
        return "gap";
    }
    match &point.verdict {
        Some(v) => match v.classification {
            Classification::Stable => "stable",
            Classification::Unstable => "unstable",
            Classification::Critical => "critical",
        },
        None => "gap",
    }
}

fn number(v: f64) -> String {
    format!("{v}")
}

/// Renders a traced path as CSV text (header first, one row per point).
pub fn render(path: &[PathPoint]) -> String {
    let mut out = String::with_capacity(96 * (path.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for p in path {
        let nan = f64::NAN;
        let (f_along, force, moment, energy) = if p.converged {
            let w = p.wrench.clone();
            (
                p.f_along,
                [w.force.x, w.force.y, w.force.z],
                [w.moment.x, w.moment.y, w.moment.z],
                p.energy,
            )
        } else {
            (nan, [nan; 3], [nan; 3], nan)
        };
        let min_eig = match (&p.verdict, p.converged) {
            (Some(v), true) => v.min_eigenvalue,
            _ => nan,
        };
        let tangent = if p.converged { p.tangent_stiffness } else { nan };
        let fields = [
            number(p.delta),
            number(f_along),
            number(force[0]),
            number(force[1]),
            number(force[2]),
            number(moment[0]),
            number(moment[1]),
            number(moment[2]),
            number(energy),
            stability_label(p).to_string(),
            number(min_eig),
            number(tangent),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses CSV text produced by [`render`], verifying the header.
pub fn parse(text: &str) -> Result<Vec<Row>, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == HEADER => {}
        other => {
            return Err(CliError::Config(format!(
                "CSV header mismatch: expected '{HEADER}', got '{}'",
                other.unwrap_or("")
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(CliError::Config(format!(
                "CSV row {i}: expected 12 fields, got {}",
                fields.len()
            )));
        }
        let num = |idx: usize| -> Result<f64, CliError> {
            fields[idx]
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("CSV row {i} field {idx}: {e}")))
        };
        rows.push(Row {
            delta: num(0)?,
            f_along: num(1)?,
            force: [num(2)?, num(3)?, num(4)?],
            moment: [num(5)?, num(6)?, num(7)?],
            energy: num(8)?,
            stable: fields[9].to_string(),
            min_eig: num(10)?,
            tangent_stiffness: num(11)?,
        });
    }
    Ok(rows)
}
