//! Two-dimensional meshes of four-node quadrilaterals (Q4) and three-node
//! triangles (T3) with tagged boundary facets.
//!
//! Conventions:
//! - Node ids are contiguous `0..nn`, element ids contiguous `0..ne`.
//! - Element connectivity is counter-clockwise (signed area > 0). Q4
//!   connectivity starts at the lower-left corner for structured meshes.
//! - Local edge `k` of an element joins local nodes `k` and `(k+1) % n`,
//!   so for CCW elements the outward normal of edge (a -> b) is
//!   `(t_y, -t_x)` with `t` the unit tangent.
//! - Every boundary edge (an edge owned by exactly one element) carries
//!   exactly one [`BoundaryFacet`] record; facet tags partition the boundary.
//!
//! Structured T3 meshes split each grid cell along the lower-left to
//! upper-right diagonal, giving the uniform isosceles right triangles used
//! by the convergence studies.
//!
//! Meshes are immutable after construction and safe to share across
//! assembly workers.

pub mod delaunay;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElemKind {
    Q4,
    T3,
}

impl ElemKind {
    pub fn num_nodes(self) -> usize {
        match self {
            ElemKind::Q4 => 4,
            ElemKind::T3 => 3,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "q4" => Some(ElemKind::Q4),
            "t3" => Some(ElemKind::T3),
            _ => None,
        }
    }
}

impl fmt::Display for ElemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemKind::Q4 => write!(f, "q4"),
            ElemKind::T3 => write!(f, "t3"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: usize,
    pub coords: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Element {
    pub id: usize,
    pub kind: ElemKind,
    pub connectivity: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BoundaryFacet {
    pub elem: usize,
    /// Local edge index within the owning element.
    pub edge: usize,
    /// The two facet node ids, in the element's CCW order.
    pub nodes: [usize; 2],
    pub tag: String,
    /// Outward unit normal.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub facets: Vec<BoundaryFacet>,
    /// Characteristic element size (side length for structured meshes,
    /// maximum edge length for imported/unstructured meshes).
    pub h: f64,
}

/// Axis-aligned rectangle used by the structured generators.
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn unit_square() -> Self {
        Rect {
            min: [0.0, 0.0],
            max: [1.0, 1.0],
        }
    }

    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Rect { min, max }
    }
}

impl Mesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn elem_coords(&self, elem: usize) -> Vec<[f64; 2]> {
        self.elements[elem]
            .connectivity
            .iter()
            .map(|&n| self.nodes[n].coords)
            .collect()
    }

    /// Facets carrying `tag`; an unknown tag is an error.
    pub fn boundary_facets(&self, tag: &str) -> Result<Vec<&BoundaryFacet>> {
        let found: Vec<&BoundaryFacet> = self.facets.iter().filter(|f| f.tag == tag).collect();
        if found.is_empty() {
            return Err(Error::UnknownTag(tag.to_string()));
        }
        Ok(found)
    }

    /// All distinct facet tags, sorted.
    pub fn tags(&self) -> Vec<String> {
        let mut tags: Vec<String> = self.facets.iter().map(|f| f.tag.clone()).collect();
        tags.sort();
        tags.dedup();
        tags
    }

    pub fn facet_length(&self, facet: &BoundaryFacet) -> f64 {
        let a = self.nodes[facet.nodes[0]].coords;
        let b = self.nodes[facet.nodes[1]].coords;
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    }

    /// Twice the signed area of an element (positive for CCW connectivity).
    pub fn signed_area2(&self, elem: usize) -> f64 {
        let conn = &self.elements[elem].connectivity;
        let mut sum = 0.0;
        for k in 0..conn.len() {
            let a = self.nodes[conn[k]].coords;
            let b = self.nodes[conn[(k + 1) % conn.len()]].coords;
            sum += a[0] * b[1] - b[0] * a[1];
        }
        sum
    }

    /// Generate a structured mesh of the rectangle.
    ///
    /// Boundary edges are tagged `left`, `right`, `bottom`, `top`.
    pub fn generate_structured(kind: ElemKind, nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
        let tagger = |mid: [f64; 2], _normal: [f64; 2]| {
            let eps = 1e-9 * (rect.max[0] - rect.min[0]).abs().max(rect.max[1] - rect.min[1]);
            if (mid[0] - rect.min[0]).abs() < eps {
                "left".to_string()
            } else if (mid[0] - rect.max[0]).abs() < eps {
                "right".to_string()
            } else if (mid[1] - rect.min[1]).abs() < eps {
                "bottom".to_string()
            } else {
                "top".to_string()
            }
        };
        Mesh::generate_masked(kind, nx, ny, rect, &|_, _| true, &tagger)
    }

    /// Structured generator with a cell mask, used for domains that are a
    /// rectangle minus rectangular cut-outs. `keep(i, j)` selects grid
    /// cells; `tagger(edge midpoint, outward normal)` labels boundary edges.
    pub fn generate_masked(
        kind: ElemKind,
        nx: usize,
        ny: usize,
        rect: Rect,
        keep: &dyn Fn(usize, usize) -> bool,
        tagger: &dyn Fn([f64; 2], [f64; 2]) -> String,
    ) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(
                "structured mesh needs nx >= 1 and ny >= 1".into(),
            ));
        }
        let dx = (rect.max[0] - rect.min[0]) / nx as f64;
        let dy = (rect.max[1] - rect.min[1]) / ny as f64;
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::InvalidArgument("degenerate rectangle".into()));
        }

        // grid node -> mesh node id, allocated only where a kept cell touches
        let mut grid_id = vec![usize::MAX; (nx + 1) * (ny + 1)];
        let gidx = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if !keep(i, j) {
                    continue;
                }
                let corners = [gidx(i, j), gidx(i + 1, j), gidx(i + 1, j + 1), gidx(i, j + 1)];
                let mut ids = [0usize; 4];
                for (k, &g) in corners.iter().enumerate() {
                    if grid_id[g] == usize::MAX {
                        let gi = g % (nx + 1);
                        let gj = g / (nx + 1);
                        grid_id[g] = nodes.len();
                        nodes.push(Node {
                            id: nodes.len(),
                            coords: [rect.min[0] + gi as f64 * dx, rect.min[1] + gj as f64 * dy],
                        });
                    }
                    ids[k] = grid_id[g];
                }
                match kind {
                    ElemKind::Q4 => {
                        elements.push(Element {
                            id: elements.len(),
                            kind,
                            connectivity: ids.to_vec(),
                        });
                    }
                    ElemKind::T3 => {
                        // split along the lower-left to upper-right diagonal
                        elements.push(Element {
                            id: elements.len(),
                            kind,
                            connectivity: vec![ids[0], ids[1], ids[2]],
                        });
                        elements.push(Element {
                            id: elements.len(),
                            kind,
                            connectivity: vec![ids[0], ids[2], ids[3]],
                        });
                    }
                }
            }
        }
        if elements.is_empty() {
            return Err(Error::InvalidArgument("mask kept no cells".into()));
        }

        let h = dx.max(dy);
        let mut mesh = Mesh {
            nodes,
            elements,
            facets: Vec::new(),
            h,
        };
        mesh.facets = mesh.detect_boundary_facets(tagger);
        mesh.validate()?;
        Ok(mesh)
    }

    /// Find all boundary edges (incidence count 1) and build facet records.
    fn detect_boundary_facets(&self, tagger: &dyn Fn([f64; 2], [f64; 2]) -> String) -> Vec<BoundaryFacet> {
        let mut facets = Vec::new();
        for (elem, edge) in self.boundary_edges() {
            let (nodes, normal) = self.edge_geometry(elem, edge);
            let a = self.nodes[nodes[0]].coords;
            let b = self.nodes[nodes[1]].coords;
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            facets.push(BoundaryFacet {
                elem,
                edge,
                nodes,
                tag: tagger(mid, normal),
                normal,
            });
        }
        facets
    }

    /// Edges owned by exactly one element, as (element, local edge) pairs,
    /// in element order.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut incidence: HashMap<(usize, usize), u32> = HashMap::new();
        for e in &self.elements {
            let n = e.connectivity.len();
            for k in 0..n {
                let a = e.connectivity[k];
                let b = e.connectivity[(k + 1) % n];
                *incidence.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut out = Vec::new();
        for e in &self.elements {
            let n = e.connectivity.len();
            for k in 0..n {
                let a = e.connectivity[k];
                let b = e.connectivity[(k + 1) % n];
                if incidence[&(a.min(b), a.max(b))] == 1 {
                    out.push((e.id, k));
                }
            }
        }
        out
    }

    /// Facet node pair (in CCW element order) and outward unit normal.
    pub fn edge_geometry(&self, elem: usize, edge: usize) -> ([usize; 2], [f64; 2]) {
        let conn = &self.elements[elem].connectivity;
        let n = conn.len();
        let a = conn[edge];
        let b = conn[(edge + 1) % n];
        let pa = self.nodes[a].coords;
        let pb = self.nodes[b].coords;
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let t = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
        ([a, b], [t[1], -t[0]])
    }

    /// Check the structural invariants; used after generation and import.
    pub fn validate(&self) -> Result<()> {
        let nn = self.nodes.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i {
                return Err(Error::Internal(format!("node id {} at index {i}", node.id)));
            }
            if !node.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::Internal(format!("node {i} has non-finite coords")));
            }
        }
        for (i, e) in self.elements.iter().enumerate() {
            if e.id != i {
                return Err(Error::Internal(format!("element id {} at index {i}", e.id)));
            }
            if e.connectivity.len() != e.kind.num_nodes() {
                return Err(Error::Internal(format!(
                    "element {i}: {} nodes for {}",
                    e.connectivity.len(),
                    e.kind
                )));
            }
            for &n in &e.connectivity {
                if n >= nn {
                    return Err(Error::Internal(format!(
                        "element {i}: dangling node reference {n}"
                    )));
                }
            }
            let mut sorted = e.connectivity.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != e.connectivity.len() {
                return Err(Error::Internal(format!(
                    "element {i}: repeated connectivity entry"
                )));
            }
            let area2 = self.signed_area2(i);
            if area2 <= 0.0 {
                return Err(Error::DegenerateElement {
                    elem: i,
                    det: area2,
                });
            }
        }
        // every boundary edge carries exactly one facet record
        let boundary = self.boundary_edges();
        if boundary.len() != self.facets.len() {
            return Err(Error::Internal(format!(
                "{} boundary edges but {} facet records",
                boundary.len(),
                self.facets.len()
            )));
        }
        let mut seen: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.facets {
            *seen.entry((f.elem, f.edge)).or_insert(0) += 1;
            let nrm = (f.normal[0].powi(2) + f.normal[1].powi(2)).sqrt();
            if (nrm - 1.0).abs() > 1e-12 {
                return Err(Error::Internal(format!(
                    "facet on element {} edge {} has non-unit normal",
                    f.elem, f.edge
                )));
            }
        }
        for (elem, edge) in &boundary {
            match seen.get(&(*elem, *edge)) {
                Some(1) => {}
                Some(_) => {
                    return Err(Error::Internal(format!(
                        "boundary edge (elem {elem}, edge {edge}) tagged more than once"
                    )))
                }
                None => {
                    return Err(Error::Internal(format!(
                        "untagged boundary edge (elem {elem}, edge {edge})"
                    )))
                }
            }
        }
        if !(self.h > 0.0) {
            return Err(Error::Internal("characteristic size h <= 0".into()));
        }
        Ok(())
    }

    /// Read a mesh from the plain-text format:
    ///
    /// ```text
    /// # comment
    /// nodes <nn> elements <ne> facets <nf>
    /// <id> <x> <y>            (nn lines)
    /// <id> <kind> <n0> <n1> <n2> [<n3>]   (ne lines)
    /// <elem> <edge> <tag>     (nf lines)
    /// ```
    ///
    /// Elements with negative signed area are repaired by reversing their
    /// connectivity; facet edge indices refer to the repaired connectivity.
    pub fn read_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.display().to_string(),
            source,
        })?;
        let pstr = path.display().to_string();
        parse_mesh(&text, &pstr)
    }

    /// Write the mesh in the same plain-text format `read_mesh` accepts.
    pub fn write_mesh(&self, path: impl AsRef<Path>) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "nodes {} elements {} facets {}",
            self.nodes.len(),
            self.elements.len(),
            self.facets.len()
        );
        for n in &self.nodes {
            let _ = writeln!(out, "{} {:.17e} {:.17e}", n.id, n.coords[0], n.coords[1]);
        }
        for e in &self.elements {
            let conn: Vec<String> = e.connectivity.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(out, "{} {} {}", e.id, e.kind, conn.join(" "));
        }
        for f in &self.facets {
            let _ = writeln!(out, "{} {} {}", f.elem, f.edge, f.tag);
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn parse_mesh(text: &str, path: &str) -> Result<Mesh> {
    let err = |line: usize, msg: String| Error::MeshFormat {
        path: path.to_string(),
        line,
        msg,
    };
    // (line number, content) with comments and blanks stripped
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty mesh file".into()))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "nodes" || toks[2] != "elements" || toks[4] != "facets" {
        return Err(err(
            hline,
            "expected header `nodes <nn> elements <ne> facets <nf>`".into(),
        ));
    }
    let parse_count = |s: &str, what: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| err(hline, format!("bad {what} count `{s}`")))
    };
    let nn = parse_count(toks[1], "node")?;
    let ne = parse_count(toks[3], "element")?;
    let nf = parse_count(toks[5], "facet")?;

    let mut nodes = Vec::with_capacity(nn);
    for k in 0..nn {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("missing node line {k}")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(err(ln, format!("expected `id x y`, got `{l}`")));
        }
        let id: usize = t[0]
            .parse()
            .map_err(|_| err(ln, format!("bad node id `{}`", t[0])))?;
        if id != k {
            return Err(err(ln, format!("node ids must be contiguous; expected {k}, got {id}")));
        }
        let x: f64 = t[1]
            .parse()
            .map_err(|_| err(ln, format!("bad coordinate `{}`", t[1])))?;
        let y: f64 = t[2]
            .parse()
            .map_err(|_| err(ln, format!("bad coordinate `{}`", t[2])))?;
        nodes.push(Node { id, coords: [x, y] });
    }

    let mut elements = Vec::with_capacity(ne);
    for k in 0..ne {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("missing element line {k}")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() < 2 {
            return Err(err(ln, format!("expected `id kind n0 n1 n2 [n3]`, got `{l}`")));
        }
        let id: usize = t[0]
            .parse()
            .map_err(|_| err(ln, format!("bad element id `{}`", t[0])))?;
        if id != k {
            return Err(err(ln, format!("element ids must be contiguous; expected {k}, got {id}")));
        }
        let kind = ElemKind::parse(t[1])
            .ok_or_else(|| err(ln, format!("unknown element kind `{}`", t[1])))?;
        let want = kind.num_nodes();
        if t.len() != 2 + want {
            return Err(err(
                ln,
                format!("element {id}: {} expects {want} nodes, got {}", kind, t.len() - 2),
            ));
        }
        let mut connectivity = Vec::with_capacity(want);
        for s in &t[2..] {
            let n: usize = s
                .parse()
                .map_err(|_| err(ln, format!("bad node reference `{s}`")))?;
            if n >= nn {
                return Err(err(
                    ln,
                    format!("element {id}: dangling node reference {n} (only {nn} nodes)"),
                ));
            }
            connectivity.push(n);
        }
        elements.push(Element {
            id,
            kind,
            connectivity,
        });
    }

    let mut mesh = Mesh {
        nodes,
        elements,
        facets: Vec::new(),
        h: 1.0,
    };

    // orientation repair before facet records are interpreted
    for e in 0..mesh.elements.len() {
        if mesh.signed_area2(e) < 0.0 {
            mesh.elements[e].connectivity.reverse();
        }
    }

    let mut facets = Vec::with_capacity(nf);
    for k in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("missing facet line {k}")))?;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 3 {
            return Err(err(ln, format!("expected `elem edge tag`, got `{l}`")));
        }
        let elem: usize = t[0]
            .parse()
            .map_err(|_| err(ln, format!("bad element reference `{}`", t[0])))?;
        if elem >= mesh.elements.len() {
            return Err(err(ln, format!("facet references missing element {elem}")));
        }
        let edge: usize = t[1]
            .parse()
            .map_err(|_| err(ln, format!("bad edge index `{}`", t[1])))?;
        if edge >= mesh.elements[elem].connectivity.len() {
            return Err(err(ln, format!("facet edge index {edge} out of range")));
        }
        let (nodes, normal) = mesh.edge_geometry(elem, edge);
        facets.push(BoundaryFacet {
            elem,
            edge,
            nodes,
            tag: t[2].to_string(),
            normal,
        });
    }
    if let Some((ln, l)) = lines.next() {
        return Err(err(ln, format!("trailing content `{l}`")));
    }
    mesh.facets = facets;

    // characteristic size: maximum element edge length
    let mut h: f64 = 0.0;
    for e in &mesh.elements {
        let n = e.connectivity.len();
        for k in 0..n {
            let a = mesh.nodes[e.connectivity[k]].coords;
            let b = mesh.nodes[e.connectivity[(k + 1) % n]].coords;
            h = h.max(((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt());
        }
    }
    mesh.h = h;

    mesh.validate().map_err(|e| match e {
        Error::Internal(msg) => Error::MeshFormat {
            path: path.to_string(),
            line: 0,
            msg,
        },
        other => other,
    })?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_q4_mesh() {
        let m = Mesh::generate_structured(ElemKind::Q4, 1, 1, Rect::unit_square()).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.facets.len(), 4);
        assert_eq!(m.h, 1.0);
    }

    #[test]
    fn t3_ten_by_ten_element_count() {
        let m = Mesh::generate_structured(ElemKind::T3, 10, 10, Rect::unit_square()).unwrap();
        assert_eq!(m.num_elements(), 200);
    }

    #[test]
    fn q4_twenty_by_twenty_counts() {
        let m = Mesh::generate_structured(ElemKind::Q4, 20, 20, Rect::unit_square()).unwrap();
        assert_eq!(m.num_elements(), 400);
        assert_eq!(m.num_nodes(), 441);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(Mesh::generate_structured(ElemKind::Q4, 0, 3, Rect::unit_square()).is_err());
    }

    #[test]
    fn left_facets_have_outward_normal() {
        let m = Mesh::generate_structured(ElemKind::Q4, 3, 3, Rect::unit_square()).unwrap();
        for f in m.boundary_facets("left").unwrap() {
            assert!((f.normal[0] + 1.0).abs() < 1e-14);
            assert!(f.normal[1].abs() < 1e-14);
        }
    }

    #[test]
    fn top_facet_count() {
        let m = Mesh::generate_structured(ElemKind::Q4, 4, 4, Rect::unit_square()).unwrap();
        assert_eq!(m.boundary_facets("top").unwrap().len(), 4);
    }

    #[test]
    fn unknown_tag_is_error() {
        let m = Mesh::generate_structured(ElemKind::Q4, 2, 2, Rect::unit_square()).unwrap();
        assert!(matches!(
            m.boundary_facets("west"),
            Err(Error::UnknownTag(_))
        ));
    }

    #[test]
    fn facet_lengths_sum_to_perimeter() {
        for kind in [ElemKind::Q4, ElemKind::T3] {
            let m = Mesh::generate_structured(kind, 7, 5, Rect::new([0.0, 0.0], [2.0, 1.0])).unwrap();
            let total: f64 = m.facets.iter().map(|f| m.facet_length(f)).sum();
            assert!((total - 6.0).abs() < 1e-12 * 6.0, "kind {kind}: {total}");
        }
    }

    #[test]
    fn all_elements_ccw() {
        for kind in [ElemKind::Q4, ElemKind::T3] {
            let m = Mesh::generate_structured(kind, 5, 4, Rect::unit_square()).unwrap();
            for e in 0..m.num_elements() {
                assert!(m.signed_area2(e) > 0.0);
            }
        }
    }

    #[test]
    fn single_triangle_file() {
        let dir = std::env::temp_dir().join("porodarcy_mesh_t1");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tri.msh");
        std::fs::write(
            &path,
            "# one triangle\n\
             nodes 3 elements 1 facets 3\n\
             0 0.0 0.0\n\
             1 1.0 0.0\n\
             2 0.0 1.0\n\
             0 t3 0 1 2\n\
             0 0 bottom\n\
             0 1 hyp\n\
             0 2 left\n",
        )
        .unwrap();
        let m = Mesh::read_mesh(&path).unwrap();
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.elements[0].kind, ElemKind::T3);
        assert_eq!(m.facets.len(), 3);
    }

    #[test]
    fn dangling_node_reference_reported() {
        let dir = std::env::temp_dir().join("porodarcy_mesh_t2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.msh");
        std::fs::write(
            &path,
            "nodes 3 elements 1 facets 3\n\
             0 0.0 0.0\n\
             1 1.0 0.0\n\
             2 0.0 1.0\n\
             0 t3 0 1 9\n\
             0 0 a\n0 1 b\n0 2 c\n",
        )
        .unwrap();
        match Mesh::read_mesh(&path) {
            Err(Error::MeshFormat { line, msg, .. }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("dangling node reference"), "{msg}");
            }
            other => panic!("expected MeshFormat error, got {other:?}"),
        }
    }

    #[test]
    fn untagged_boundary_edge_reported() {
        let dir = std::env::temp_dir().join("porodarcy_mesh_t3");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("untagged.msh");
        std::fs::write(
            &path,
            "nodes 3 elements 1 facets 2\n\
             0 0.0 0.0\n\
             1 1.0 0.0\n\
             2 0.0 1.0\n\
             0 t3 0 1 2\n\
             0 0 a\n0 1 b\n",
        )
        .unwrap();
        match Mesh::read_mesh(&path) {
            Err(Error::MeshFormat { msg, .. }) => {
                assert!(msg.contains("boundary edges but"), "{msg}");
            }
            other => panic!("expected MeshFormat error, got {other:?}"),
        }
    }

    #[test]
    fn clockwise_element_repaired() {
        let dir = std::env::temp_dir().join("porodarcy_mesh_t4");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cw.msh");
        // triangle listed clockwise; reader should flip it
        std::fs::write(
            &path,
            "nodes 3 elements 1 facets 3\n\
             0 0.0 0.0\n\
             1 1.0 0.0\n\
             2 0.0 1.0\n\
             0 t3 0 2 1\n\
             0 0 a\n0 1 b\n0 2 c\n",
        )
        .unwrap();
        let m = Mesh::read_mesh(&path).unwrap();
        assert!(m.signed_area2(0) > 0.0);
    }

    #[test]
    fn roundtrip_write_read() {
        let m = Mesh::generate_structured(ElemKind::T3, 3, 2, Rect::unit_square()).unwrap();
        let dir = std::env::temp_dir().join("porodarcy_mesh_t5");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.msh");
        m.write_mesh(&path).unwrap();
        let m2 = Mesh::read_mesh(&path).unwrap();
        assert_eq!(m.num_nodes(), m2.num_nodes());
        assert_eq!(m.num_elements(), m2.num_elements());
        assert_eq!(m.facets.len(), m2.facets.len());
        for (a, b) in m.nodes.iter().zip(&m2.nodes) {
            assert_eq!(a.coords, b.coords);
        }
        for (a, b) in m.elements.iter().zip(&m2.elements) {
            assert_eq!(a.connectivity, b.connectivity);
        }
    }

    #[test]
    fn boundary_edge_incidence_matches_facets() {
        // every boundary edge appears in exactly one facet, by construction
        let m = Mesh::generate_structured(ElemKind::T3, 4, 3, Rect::unit_square()).unwrap();
        let boundary = m.boundary_edges();
        assert_eq!(boundary.len(), m.facets.len());
        assert_eq!(boundary.len(), 2 * (4 + 3));
    }
}
