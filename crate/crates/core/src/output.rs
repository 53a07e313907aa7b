//! Snapshot, time-series and summary writers.

use crate::mesh::{ElementKind, Mesh};
use serde::Serialize;
use std::io::{self, Write};
use std::path::Path;

/// Legacy VTK 3.0 ASCII unstructured grid with nodal scalars.
pub fn write_vtk<W: Write>(w: &mut W, title: &str, mesh: &Mesh, fields: &[(&str, &[f64])]) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.node_count())?;
    for p in mesh.nodes() {
        writeln!(w, "{} {} 0", p[0], p[1])?;
    }
    let els = mesh.elements();
    let size: usize = els.iter().map(|e| e.nodes.len() + 1).sum();
    writeln!(w, "CELLS {} {}", els.len(), size)?;
    for e in els {
        write!(w, "{}", e.nodes.len())?;
        for n in &e.nodes {
            write!(w, " {n}")?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {}", els.len())?;
    for e in els {
        let t = match e.kind {
            ElementKind::Line2 => 3,
            ElementKind::Tri3 => 5,
            ElementKind::Quad4 => 9,
        };
        writeln!(w, "{t}")?;
    }
    writeln!(w, "POINT_DATA {}", mesh.node_count())?;
    for (name, values) in fields {
        assert_eq!(values.len(), mesh.node_count(), "field {name} has the wrong length");
        writeln!(w, "SCALARS {} double 1", sanitize(name))?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(w, "{v}")?;
        }
    }
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Nodal values of a one-dimensional mesh as CSV rows `x,<fields...>` sorted by x.
pub fn write_profile_csv<W: Write>(w: W, mesh: &Mesh, fields: &[(&str, &[f64])]) -> csv::Result<()> {
    let mut order: Vec<usize> = (0..mesh.node_count()).collect();
    order.sort_by(|&a, &b| mesh.node(a)[0].total_cmp(&mesh.node(b)[0]).then(a.cmp(&b)));
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["x".to_string()];
    header.extend(fields.iter().map(|(n, _)| n.to_string()));
    out.write_record(&header)?;
    for n in order {
        let mut row = vec![mesh.node(n)[0].to_string()];
        row.extend(fields.iter().map(|(_, v)| v[n].to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Subdomain values of a problem without a mesh: `subdomain,dof,d,v` rows
/// followed by `multiplier,index,lambda,` rows.
pub fn write_state_csv<W: Write>(w: W, d: &[Vec<f64>], v: &[Vec<f64>], lambda: &[f64]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["subdomain", "dof", "d", "v"])?;
    for (i, (di, vi)) in d.iter().zip(v).enumerate() {
        for (k, (a, b)) in di.iter().zip(vi).enumerate() {
            out.write_record([(i + 1).to_string(), k.to_string(), a.to_string(), b.to_string()])?;
        }
    }
    for (r, l) in lambda.iter().enumerate() {
        out.write_record(["multiplier".to_string(), r.to_string(), l.to_string(), String::new()])?;
    }
    out.flush()?;
    Ok(())
}

/// One row of the per-step scalar history. Missing quantities are left empty.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TimeSeriesRow {
    pub step: usize,
    pub time: f64,
    pub newton_iterations: usize,
    pub constraint_residual: f64,
    pub drift_d_inf: f64,
    pub drift_v_inf: f64,
    pub energy_q: Option<f64>,
    pub energy_u: Option<f64>,
    pub min_value: f64,
    pub max_value: f64,
    pub error: Option<f64>,
}

pub fn write_timeseries<W: Write>(w: W, rows: &[TimeSeriesRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{interval_mesh, rectangle_mesh};

    #[test]
    fn vtk_layout() {
        let mesh = rectangle_mesh([0.0, 0.0], [1.0, 1.0], [2, 1], false).unwrap();
        let vals: Vec<f64> = (0..mesh.node_count()).map(|i| i as f64).collect();
        let mut buf = Vec::new();
        write_vtk(&mut buf, "t", &mesh, &[("c", &vals)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert_eq!(lines[4], "POINTS 6 double");
        assert!(text.contains("CELLS 2 10\n"));
        assert!(text.contains("CELL_TYPES 2\n9\n9\n"));
        assert!(text.contains("POINT_DATA 6\nSCALARS c double 1\nLOOKUP_TABLE default\n0\n1\n"));
    }

    #[test]
    fn profile_sorted_by_x() {
        let (mesh, _) = interval_mesh(&[1.0], &[4]).unwrap();
        let vals: Vec<f64> = (0..mesh.node_count()).map(|i| mesh.node(i)[0] * 2.0).collect();
        let mut buf = Vec::new();
        write_profile_csv(&mut buf, &mesh, &[("c", &vals)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,c\n0,0\n0.25,0.5\n0.5,1\n0.75,1.5\n1,2\n");
    }

    #[test]
    fn timeseries_leaves_missing_values_empty() {
        let row = TimeSeriesRow {
            step: 1,
            time: 0.5,
            newton_iterations: 1,
            constraint_residual: 0.0,
            drift_d_inf: 0.0,
            drift_v_inf: 1e-3,
            energy_q: Some(2.0),
            energy_u: None,
            min_value: -1.0,
            max_value: 1.0,
            error: None,
        };
        let mut buf = Vec::new();
        write_timeseries(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,time,newton_iterations,constraint_residual,drift_d_inf,drift_v_inf,energy_q,energy_u,min_value,max_value,error\n\
             1,0.5,1,0.0,0.0,0.001,2.0,,-1.0,1.0,\n"
        );
    }
}
