//! Legacy ASCII VTK output of nodal fields (unstructured grid with
//! pressure scalars and zero-padded velocity vectors), plus a reader for
//! the writer's own layout used by the round-trip checks.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{ElemKind, Mesh};
use crate::solver::SolutionField;

/// Floats are printed with 17 significant digits so text output
/// round-trips f64 exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

const VTK_QUAD: u32 = 9;
const VTK_TRIANGLE: u32 = 5;

/// Write mesh geometry with nodal pressure and velocity.
pub fn write_vtk(solution: &SolutionField, mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let nn = mesh.num_nodes();
    if solution.pressure.len() != nn || solution.velocity.len() != nn {
        return Err(Error::InvalidArgument(format!(
            "solution has {} nodes, mesh has {nn}",
            solution.pressure.len()
        )));
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("porodarcy fields\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    out.push_str(&format!("POINTS {nn} double\n"));
    for node in &mesh.nodes {
        out.push_str(&format!(
            "{} {} 0\n",
            fmt17(node.coords[0]),
            fmt17(node.coords[1])
        ));
    }
    let ne = mesh.num_elements();
    let list_len: usize = mesh
        .elements
        .iter()
        .map(|e| e.connectivity.len() + 1)
        .sum();
    out.push_str(&format!("CELLS {ne} {list_len}\n"));
    for e in &mesh.elements {
        let ids: Vec<String> = e.connectivity.iter().map(|n| n.to_string()).collect();
        out.push_str(&format!("{} {}\n", e.connectivity.len(), ids.join(" ")));
    }
    out.push_str(&format!("CELL_TYPES {ne}\n"));
    for e in &mesh.elements {
        let ty = match e.kind {
            ElemKind::Q4 => VTK_QUAD,
            ElemKind::T3 => VTK_TRIANGLE,
        };
        out.push_str(&format!("{ty}\n"));
    }
    out.push_str(&format!("POINT_DATA {nn}\n"));
    out.push_str("SCALARS pressure double 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for p in &solution.pressure {
        out.push_str(&format!("{}\n", fmt17(*p)));
    }
    out.push_str("VECTORS velocity double\n");
    for v in &solution.velocity {
        out.push_str(&format!("{} {} 0\n", fmt17(v[0]), fmt17(v[1])));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Nodal fields read back from a VTK file written by [`write_vtk`].
#[derive(Debug, Clone)]
pub struct VtkFields {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<(ElemKind, Vec<usize>)>,
    pub pressure: Vec<f64>,
    pub velocity: Vec<[f64; 2]>,
}

/// Parse a file produced by [`write_vtk`]; not a general VTK reader.
pub fn read_vtk(path: impl AsRef<Path>) -> Result<VtkFields> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, msg: String| Error::VtkFormat {
        path: pstr.clone(),
        line,
        msg,
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut cursor = 0usize;
    let mut expect = |what: &str, cursor: &mut usize| -> Result<&str> {
        let line = lines
            .get(*cursor)
            .ok_or_else(|| err(*cursor + 1, format!("unexpected end of file, wanted {what}")))?;
        *cursor += 1;
        Ok(line)
    };

    for want in [
        "# vtk DataFile Version 3.0",
        "porodarcy fields",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
    ] {
        let got = expect(want, &mut cursor)?;
        if got != want {
            return Err(err(cursor, format!("expected `{want}`, got `{got}`")));
        }
    }

    let header = expect("POINTS", &mut cursor)?;
    let nn: usize = header
        .strip_prefix("POINTS ")
        .and_then(|r| r.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(cursor, format!("bad POINTS header `{header}`")))?;
    let mut points = Vec::with_capacity(nn);
    for _ in 0..nn {
        let line = expect("point", &mut cursor)?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(cursor, format!("bad point `{line}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(err(cursor, format!("expected 3 coordinates, got `{line}`")));
        }
        points.push([vals[0], vals[1]]);
    }

    let header = expect("CELLS", &mut cursor)?;
    let ne: usize = header
        .strip_prefix("CELLS ")
        .and_then(|r| r.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| err(cursor, format!("bad CELLS header `{header}`")))?;
    let mut conns = Vec::with_capacity(ne);
    for _ in 0..ne {
        let line = expect("cell", &mut cursor)?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(cursor, format!("bad cell `{line}`"))))
            .collect::<Result<_>>()?;
        if vals.is_empty() || vals[0] + 1 != vals.len() {
            return Err(err(cursor, format!("inconsistent cell line `{line}`")));
        }
        conns.push(vals[1..].to_vec());
    }

    let header = expect("CELL_TYPES", &mut cursor)?;
    if header
        .strip_prefix("CELL_TYPES ")
        .and_then(|s| s.parse::<usize>().ok())
        != Some(ne)
    {
        return Err(err(cursor, format!("bad CELL_TYPES header `{header}`")));
    }
    let mut cells = Vec::with_capacity(ne);
    for conn in conns {
        let line = expect("cell type", &mut cursor)?;
        let kind = match line.trim().parse::<u32>() {
            Ok(VTK_QUAD) => ElemKind::Q4,
            Ok(VTK_TRIANGLE) => ElemKind::T3,
            _ => return Err(err(cursor, format!("unsupported cell type `{line}`"))),
        };
        if conn.len() != kind.num_nodes() {
            return Err(err(cursor, "cell size does not match cell type".into()));
        }
        cells.push((kind, conn));
    }

    for want in [
        format!("POINT_DATA {nn}"),
        "SCALARS pressure double 1".to_string(),
        "LOOKUP_TABLE default".to_string(),
    ] {
        let got = expect(&want, &mut cursor)?;
        if got != want {
            return Err(err(cursor, format!("expected `{want}`, got `{got}`")));
        }
    }
    let mut pressure = Vec::with_capacity(nn);
    for _ in 0..nn {
        let line = expect("pressure", &mut cursor)?;
        pressure.push(
            line.trim()
                .parse()
                .map_err(|_| err(cursor, format!("bad pressure `{line}`")))?,
        );
    }
    let got = expect("VECTORS velocity double", &mut cursor)?;
    if got != "VECTORS velocity double" {
        return Err(err(cursor, format!("expected velocity header, got `{got}`")));
    }
    let mut velocity = Vec::with_capacity(nn);
    for _ in 0..nn {
        let line = expect("velocity", &mut cursor)?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(cursor, format!("bad velocity `{line}`"))))
            .collect::<Result<_>>()?;
        if vals.len() != 3 {
            return Err(err(cursor, format!("expected 3 components, got `{line}`")));
        }
        velocity.push([vals[0], vals[1]]);
    }

    Ok(VtkFields {
        points,
        cells,
        pressure,
        velocity,
    })
}
