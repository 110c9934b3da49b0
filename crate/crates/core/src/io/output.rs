//! Time series, field snapshots and rate tables as text files.
//!
//! Every real number is written with 17 significant digits, which
//! round-trips an `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::SeriesRecord;
use crate::error::{Error, Result};
use crate::fem::FeFunction;
use crate::harness::RateTable;
use crate::mesh::Point;
use crate::stepper::State;

pub const SERIES_HEADER: &str = "step,time,mass,energy,modified_energy,r,diss_residual,solver_residual";

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn series_csv(records: &[SeriesRecord]) -> String {
    let mut out = String::with_capacity(64 + 200 * records.len());
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.step, r.time, r.mass, r.energy, r.modified_energy, r.r, r.diss_residual, r.solver_residual
        );
    }
    out
}

pub fn write_series(records: &[SeriesRecord], path: &Path) -> Result<()> {
    write_text(path, &series_csv(records))
}

pub fn parse_series(text: &str) -> Result<Vec<SeriesRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SERIES_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing series header".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Parse {
                line: i + 1,
                message: format!("malformed series row `{l}`"),
            };
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 8 {
                return Err(bad());
            }
            let v = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            Ok(SeriesRecord {
                step: cols[0].parse().map_err(|_| bad())?,
                time: v[0],
                mass: v[1],
                energy: v[2],
                modified_energy: v[3],
                r: v[4],
                diss_residual: v[5],
                solver_residual: v[6],
            })
        })
        .collect()
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRecord>> {
    parse_series(&read_text(path)?)
}

/// `x[,y[,z]],value` rows, one per dof in index order.
pub fn field_csv(f: &FeFunction) -> String {
    let dim = f.space().dim();
    let mut out = String::new();
    out.push_str(&["x", "y", "z"][..dim].join(","));
    out.push_str(",value\n");
    for (x, v) in f.space().dof_coords().iter().zip(f.coeffs()) {
        for c in &x[..dim] {
            let _ = write!(out, "{c:.16e},");
        }
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn write_field(f: &FeFunction, path: &Path) -> Result<()> {
    write_text(path, &field_csv(f))
}

/// Coordinates and values of a field file written by [`write_field`].
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSamples {
    pub points: Vec<Point>,
    pub values: Vec<f64>,
}

pub fn parse_field(text: &str) -> Result<FieldSamples> {
    let mut lines = text.lines().enumerate();
    let dim = match lines.next() {
        Some((_, h)) => h.split(',').count().saturating_sub(1),
        None => 0,
    };
    if !(1..=3).contains(&dim) {
        return Err(Error::Parse {
            line: 1,
            message: "missing field header".into(),
        });
    }
    let mut samples = FieldSamples {
        points: Vec::new(),
        values: Vec::new(),
    };
    for (i, l) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let v = l
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .ok()
            .filter(|v| v.len() == dim + 1)
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("malformed field row `{l}`"),
            })?;
        let mut p = [0.0; 3];
        p[..dim].copy_from_slice(&v[..dim]);
        samples.points.push(p);
        samples.values.push(v[dim]);
    }
    Ok(samples)
}

pub fn read_field(path: &Path) -> Result<FieldSamples> {
    parse_field(&read_text(path)?)
}

/// Fields of a state with their file labels; `mu` and `sigma` only after a step.
fn state_fields(state: &State) -> Vec<(&'static str, &FeFunction)> {
    let mut fields = vec![("u", &state.u), ("n", &state.n)];
    if let Some(mu) = &state.mu {
        fields.push(("mu", mu));
    }
    if let Some(sigma) = &state.sigma {
        fields.push(("sigma", sigma));
    }
    fields
}

/// Writes `{stem}_{field}.csv` for each field of `state` into `dir` and
/// returns the paths written.
pub fn write_snapshot(state: &State, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    state_fields(state)
        .into_iter()
        .map(|(name, f)| {
            let path = dir.join(format!("{stem}_{name}.csv"));
            write_field(f, &path).map(|_| path)
        })
        .collect()
}

/// Legacy VTK cell type for a simplex of dimension `dim` and degree `q`.
fn vtk_cell_type(dim: usize, degree: usize) -> u8 {
    match (dim, degree) {
        (1, 1) => 3,
        (2, 1) => 5,
        (3, 1) => 10,
        (1, _) => 21,
        (2, _) => 22,
        _ => 24,
    }
}

/// Legacy VTK ASCII unstructured grid with every field as point data.
pub fn state_vtk(state: &State) -> String {
    let space = state.u.space();
    let (dim, degree) = (space.dim(), space.degree());
    let ne = space.mesh().num_elements();
    let nl = space.num_local();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "step {} time {:.16e}", state.step, state.time);
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", space.num_dofs());
    for x in space.dof_coords() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", x[0], x[1], x[2]);
    }
    let _ = writeln!(out, "CELLS {} {}", ne, ne * (nl + 1));
    for e in 0..ne {
        let dofs = space.element_dofs(e);
        let _ = write!(out, "{nl}");
        for d in dofs {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    let ty = vtk_cell_type(dim, degree);
    for _ in 0..ne {
        let _ = writeln!(out, "{ty}");
    }
    let _ = writeln!(out, "POINT_DATA {}", space.num_dofs());
    for (name, f) in state_fields(state) {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in f.coeffs() {
            let _ = writeln!(out, "{v:.16e}");
        }
    }
    out
}

pub fn write_vtk(state: &State, path: &Path) -> Result<()> {
    write_text(path, &state_vtk(state))
}

pub fn write_rate_table(table: &RateTable, path: &Path) -> Result<()> {
    write_text(path, &table.to_csv())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FeSpace;
    use crate::mesh::{build_box_mesh, BoxDomain};
    use std::sync::Arc;

    fn state(dim: usize, degree: usize) -> State {
        let mesh = build_box_mesh(&BoxDomain::cube(dim, -1.0, 1.0).unwrap(), 2).unwrap();
        let space = FeSpace::new(Arc::new(mesh), degree).unwrap();
        let coeffs: Vec<f64> = (0..space.num_dofs()).map(|i| (i as f64 * 0.7).sin() / 3.0).collect();
        let u = FeFunction::new(space.clone(), coeffs.clone()).unwrap();
        let n = FeFunction::new(space, coeffs.iter().map(|c| 1.0 - c).collect()).unwrap();
        State {
            step: 3,
            time: 0.003,
            u,
            n,
            mu: None,
            sigma: None,
            r: 4.1,
        }
    }

    fn record(step: usize) -> SeriesRecord {
        SeriesRecord {
            step,
            time: step as f64 * 1e-3,
            mass: 4.0 + 1.0 / 3.0,
            energy: -0.1 / 7.0,
            modified_energy: std::f64::consts::PI,
            r: 4.000_000_000_000_1,
            diss_residual: 1e-17,
            solver_residual: 2.5e-14,
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        assert_eq!(series_csv(&[]), format!("{SERIES_HEADER}\n"));
    }

    #[test]
    fn series_round_trips_exactly() {
        let recs: Vec<_> = (0..4).map(record).collect();
        assert_eq!(parse_series(&series_csv(&recs)).unwrap(), recs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/series.csv");
        write_series(&recs, &path).unwrap();
        assert_eq!(read_series(&path).unwrap(), recs);
    }

    #[test]
    fn snapshot_round_trip_recovers_coefficients() {
        let s = state(2, 1);
        let dir = tempfile::tempdir().unwrap();
        let paths = write_snapshot(&s, dir.path(), "final").unwrap();
        assert_eq!(paths.len(), 2);
        let back = read_field(&paths[0]).unwrap();
        assert_eq!(back.values, s.u.coeffs());
        assert_eq!(back.points, s.u.space().dof_coords());
        assert!(field_csv(&s.u).starts_with("x,y,value\n"));
    }

    #[test]
    fn vtk_layout() {
        for (dim, degree, cell) in [(2, 1, "5"), (2, 2, "22"), (3, 1, "10"), (3, 2, "24")] {
            let s = state(dim, degree);
            let text = state_vtk(&s);
            let ne = s.u.space().mesh().num_elements();
            assert!(text.contains(&format!("POINTS {} double", s.u.space().num_dofs())));
            assert!(text.contains(&format!("CELL_TYPES {ne}\n{cell}\n")));
            assert!(text.contains("SCALARS u double 1"));
            assert!(text.contains("SCALARS n double 1"));
        }
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = read_series(Path::new("/nonexistent/dir/series.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/series.csv"));
    }
}
