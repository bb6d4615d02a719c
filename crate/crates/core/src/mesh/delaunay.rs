//! Delaunay triangulation of the unit square for the unstructured studies.
//!
//! Points come from a jittered uniform grid: interior nodes move in both
//! directions, boundary nodes only along their edge, corners stay fixed, so
//! the hull is exactly the square and boundary tags can be assigned by
//! coordinate. Triangulation is plain Bowyer-Watson; the jitter keeps the
//! incircle tests away from degeneracy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryFacet, Element, ElemKind, Mesh, Node};
use crate::error::{Error, Result};

/// Jitter amplitude as a fraction of the grid spacing.
const JITTER: f64 = 0.28;

/// Unstructured Delaunay mesh of the unit square with roughly
/// `2 * divisions^2` triangles. Deterministic for a given seed.
pub fn delaunay_unit_square(divisions: usize, seed: u64) -> Result<Mesh> {
    if divisions < 2 {
        return Err(Error::InvalidArgument(
            "delaunay_unit_square needs divisions >= 2".into(),
        ));
    }
    let n = divisions;
    let h = 1.0 / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<[f64; 2]> = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let x = i as f64 * h;
            let y = j as f64 * h;
            let on_x = i == 0 || i == n;
            let on_y = j == 0 || j == n;
            let jit = || -> f64 { h * JITTER };
            let (dx, dy) = match (on_x, on_y) {
                (true, true) => (0.0, 0.0),
                (true, false) => (0.0, rng.gen_range(-jit()..jit())),
                (false, true) => (rng.gen_range(-jit()..jit()), 0.0),
                (false, false) => (
                    rng.gen_range(-jit()..jit()),
                    rng.gen_range(-jit()..jit()),
                ),
            };
            points.push([x + dx, y + dy]);
        }
    }

    let triangles = bowyer_watson(&points)?;

    let nodes: Vec<Node> = points
        .iter()
        .enumerate()
        .map(|(id, &coords)| Node { id, coords })
        .collect();
    let elements: Vec<Element> = triangles
        .iter()
        .enumerate()
        .map(|(id, t)| Element {
            id,
            kind: ElemKind::T3,
            connectivity: t.to_vec(),
        })
        .collect();

    let mut mesh = Mesh {
        nodes,
        elements,
        facets: Vec::new(),
        h: 0.0,
    };
    // characteristic size: maximum edge length
    let mut hmax: f64 = 0.0;
    for e in &mesh.elements {
        for k in 0..3 {
            let a = mesh.nodes[e.connectivity[k]].coords;
            let b = mesh.nodes[e.connectivity[(k + 1) % 3]].coords;
            hmax = hmax.max(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
        }
    }
    mesh.h = hmax;

    let tol = 1e-12;
    mesh.facets = mesh
        .boundary_edges()
        .into_iter()
        .map(|(elem, edge)| {
            let (nodes, normal) = mesh.edge_geometry(elem, edge);
            let a = mesh.nodes[nodes[0]].coords;
            let b = mesh.nodes[nodes[1]].coords;
            let tag = if a[0].abs() < tol && b[0].abs() < tol {
                "left"
            } else if (a[0] - 1.0).abs() < tol && (b[0] - 1.0).abs() < tol {
                "right"
            } else if a[1].abs() < tol && b[1].abs() < tol {
                "bottom"
            } else {
                "top"
            };
            BoundaryFacet {
                elem,
                edge,
                nodes,
                tag: tag.to_string(),
                normal,
            }
        })
        .collect();

    mesh.validate()?;
    Ok(mesh)
}

/// Incremental Bowyer-Watson over the given points. Returns CCW triangles.
fn bowyer_watson(points: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    // super-triangle comfortably containing the unit square
    let sup = [[-10.0, -10.0], [30.0, -10.0], [-10.0, 30.0]];
    let np = points.len();
    let coord = |i: usize| -> [f64; 2] {
        if i < np {
            points[i]
        } else {
            sup[i - np]
        }
    };

    let mut tris: Vec<[usize; 3]> = vec![[np, np + 1, np + 2]];
    for p in 0..np {
        let pt = points[p];
        // cavity: triangles whose circumcircle contains the new point
        let mut bad = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            if in_circumcircle(coord(tri[0]), coord(tri[1]), coord(tri[2]), pt) {
                bad.push(t);
            }
        }
        // boundary of the cavity = edges appearing exactly once among bad triangles
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &t in &bad {
            let tri = tris[t];
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                // remove the reversed twin if present, else keep
                if let Some(pos) = edges.iter().position(|&(a, b)| a == e.1 && b == e.0) {
                    edges.swap_remove(pos);
                } else {
                    edges.push(e);
                }
            }
        }
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for (a, b) in edges {
            tris.push([a, b, p]);
        }
    }

    // drop triangles touching the super vertices and enforce CCW
    let mut out = Vec::new();
    for tri in tris {
        if tri.iter().any(|&v| v >= np) {
            continue;
        }
        let (a, b, c) = (points[tri[0]], points[tri[1]], points[tri[2]]);
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if area2.abs() < 1e-14 {
            return Err(Error::Internal("degenerate Delaunay triangle".into()));
        }
        if area2 > 0.0 {
            out.push(tri);
        } else {
            out.push([tri[0], tri[2], tri[1]]);
        }
    }
    Ok(out)
}

/// True if `p` lies strictly inside the circumcircle of CCW-ordered (a, b, c).
fn in_circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> bool {
    // orientation sign so the determinant test works for either ordering
    let orient = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let (ax, ay) = (a[0] - p[0], a[1] - p[1]);
    let (bx, by) = (b[0] - p[0], b[1] - p[1]);
    let (cx, cy) = (c[0] - p[0], c[1] - p[1]);
    let det = (ax * ax + ay * ay) * (bx * cy - cx * by)
        - (bx * bx + by * by) * (ax * cy - cx * ay)
        + (cx * cx + cy * cy) * (ax * by - bx * ay);
    if orient > 0.0 {
        det > 0.0
    } else {
        det < 0.0
    }
}
