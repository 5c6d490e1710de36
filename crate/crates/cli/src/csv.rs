//! Result rows and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::CliResult;

pub const HEADER: &str = "kind,param,solver,tol,iterations,rel_error,rel_residual,wall_time_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub kind: String,
    pub param: f64,
    pub solver: String,
    pub tol: f64,
    pub iterations: Option<usize>,
    pub rel_error: Option<f64>,
    pub rel_residual: Option<f64>,
    pub wall_time_s: f64,
}

/// Param ascending, then solver name, then tolerance descending.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.param.total_cmp(&b.param).then_with(|| a.solver.cmp(&b.solver)).then_with(|| b.tol.total_cmp(&a.tol))
    });
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut rows = rows.to_vec();
    sort_rows(&mut rows);
    let mut out = String::from(HEADER);
    out.push('\n');
    let opt_e = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in &rows {
        let _ = writeln!(
            out,
            "{},{},{},{:e},{},{},{},{:.6}",
            r.kind,
            r.param,
            r.solver,
            r.tol,
            r.iterations.map(|k| k.to_string()).unwrap_or_default(),
            opt_e(r.rel_error),
            opt_e(r.rel_residual),
            r.wall_time_s
        );
    }
    out
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_csv(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(param: f64, solver: &str, tol: f64) -> ResultRow {
        ResultRow {
            kind: "sweep-n".into(),
            param,
            solver: solver.into(),
            tol,
            iterations: Some(3),
            rel_error: Some(1.5e-9),
            rel_residual: None,
            wall_time_s: 0.25,
        }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(to_csv(&[]), format!("{HEADER}\n"));
    }

    #[test]
    fn ordering_and_format() {
        let rows = vec![row(8.0, "gmres", 1e-6), row(8.0, "cg", 1e-6), row(8.0, "gmres", 1e-4), row(8.0, "cg", 1e-4)];
        let csv = to_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "sweep-n,8,cg,1e-4,3,1.5e-9,,0.250000");
        assert_eq!(lines[2], "sweep-n,8,cg,1e-6,3,1.5e-9,,0.250000");
        assert!(lines[3].starts_with("sweep-n,8,gmres,1e-4"));
    }
}
