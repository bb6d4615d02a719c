//! Problem specifications and the canonical benchmark cases: quarter
//! five-spot, gravity-driven reservoir with a production-well notch,
//! total-flux reports, cone-shape profiles and parameter sweeps.
//!
//! Pressure boundary data enters the weak form naturally through facet
//! integrals; prescribed normal velocities are essential constraints (see
//! the solver module). Point wells are concentrated terms in the pressure
//! equation: a source of strength `s` at node `a` contributes `+s` to the
//! assembled pressure residual entry of `a`, which is the weak statement of
//! `div v = s delta_a`. An injection (s > 0) therefore drives flow outward
//! and carries the pressure maximum.

use std::collections::BTreeMap;

use crate::drag::DragModel;
use crate::error::{Error, Result};
use crate::mesh::{ElemKind, Mesh, Rect};
use crate::ref_elem::{edge_quadrature, edge_shape};
use crate::solver::{newton_solve, NewtonConfig, SolutionField};
use crate::verification;

/// Boundary condition attached to a facet tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FacetBc {
    /// Prescribed pressure (natural condition, facet integral).
    Pressure(f64),
    /// Prescribed normal velocity (essential constraint, axis-aligned only).
    NormalVelocity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub node: usize,
    pub strength: f64,
}

/// Body force field. The `Manufactured` variant is the forcing that makes
/// the built-in 2D manufactured solution exact for the given drag model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BodyForce {
    Zero,
    Constant([f64; 2]),
    Manufactured(DragModel),
}

impl BodyForce {
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            BodyForce::Zero => [0.0, 0.0],
            BodyForce::Constant(b) => *b,
            BodyForce::Manufactured(model) => verification::manufactured_body_force(model, x, y),
        }
    }
}

/// Full problem description over a given mesh.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub drag: DragModel,
    /// Dimensionless drag group (multiplies all drag terms).
    pub a_group: f64,
    /// Dimensionless body-force group (multiplies rho * b).
    pub c_group: f64,
    pub rho: f64,
    pub body_force: BodyForce,
    /// One boundary condition per facet tag; every tag must be covered.
    pub facet_bcs: BTreeMap<String, FacetBc>,
    pub point_sources: Vec<PointSource>,
    /// Pressure gauge for pure-Neumann problems: (node, value).
    pub pressure_pin: Option<(usize, f64)>,
    /// Per-element reference-drag overrides (heterogeneous media).
    pub alpha0_overrides: BTreeMap<usize, f64>,
    /// Optional residual-based div(v) stabilization term (default off).
    pub div_stabilization: bool,
    /// Override of the assembly quadrature order.
    pub quadrature_order: Option<u32>,
}

impl ProblemSpec {
    pub fn new(drag: DragModel) -> Self {
        ProblemSpec {
            drag,
            a_group: 1.0,
            c_group: 1.0,
            rho: 1.0,
            body_force: BodyForce::Zero,
            facet_bcs: BTreeMap::new(),
            point_sources: Vec::new(),
            pressure_pin: None,
            alpha0_overrides: BTreeMap::new(),
            div_stabilization: false,
            quadrature_order: None,
        }
    }

    /// Drag model for a specific element, applying any alpha0 override.
    pub fn drag_for(&self, elem: usize) -> DragModel {
        match self.alpha0_overrides.get(&elem) {
            Some(&a0) => self.drag.with_alpha0(a0),
            None => self.drag,
        }
    }

    /// Check that every mesh tag has exactly one boundary condition.
    pub fn check_bcs(&self, mesh: &Mesh) -> Result<()> {
        for tag in mesh.tags() {
            if !self.facet_bcs.contains_key(&tag) {
                return Err(Error::InvalidArgument(format!(
                    "no boundary condition for facet tag \"{tag}\""
                )));
            }
        }
        for tag in self.facet_bcs.keys() {
            if !mesh.facets.iter().any(|f| &f.tag == tag) {
                return Err(Error::UnknownTag(tag.clone()));
            }
        }
        Ok(())
    }
}

/// Node id whose coordinates match `coords` within `tol`.
pub fn find_node(mesh: &Mesh, coords: [f64; 2], tol: f64) -> Option<usize> {
    mesh.nodes
        .iter()
        .find(|n| (n.coords[0] - coords[0]).abs() < tol && (n.coords[1] - coords[1]).abs() < tol)
        .map(|n| n.id)
}

/// Quarter five-spot on the unit square: no-flow boundary everywhere,
/// +1/4 injection at (0, 0), -1/4 production at (1, 1), pressure pinned to
/// zero at the production node.
pub fn build_five_spot(n: usize, kind: ElemKind, drag: DragModel) -> Result<(Mesh, ProblemSpec)> {
    if n < 2 {
        return Err(Error::InvalidArgument("five-spot needs n >= 2".into()));
    }
    let mesh = Mesh::generate_structured(kind, n, n, Rect::unit_square())?;
    let injection = find_node(&mesh, [0.0, 0.0], 1e-12).expect("corner node");
    let production = find_node(&mesh, [1.0, 1.0], 1e-12).expect("corner node");

    let mut problem = ProblemSpec::new(drag);
    for tag in ["left", "right", "bottom", "top"] {
        problem
            .facet_bcs
            .insert(tag.to_string(), FacetBc::NormalVelocity(0.0));
    }
    problem.point_sources = vec![
        PointSource {
            node: injection,
            strength: 0.25,
        },
        PointSource {
            node: production,
            strength: -0.25,
        },
    ];
    problem.pressure_pin = Some((production, 0.0));
    Ok((mesh, problem))
}

/// Reservoir geometry: width x depth = 2 x 1 with a production-well notch
/// (width 0.1, depth 0.5) cut from the top center. `resolution` is the
/// number of cells per unit length and must be a multiple of 20 so the
/// notch lies on grid lines.
pub const RESERVOIR_DEFAULT_RESOLUTION: usize = 40;

/// Build the reservoir case: pressure 1 on the well surface, `p_enh` on the
/// two outer side walls, no flow through top and bottom, gravity body force
/// (0, -1).
pub fn build_reservoir(
    drag: DragModel,
    p_enh: f64,
    resolution: usize,
) -> Result<(Mesh, ProblemSpec)> {
    if p_enh < 1.0 {
        return Err(Error::InvalidArgument(
            "p_enh must be >= the well pressure 1".into(),
        ));
    }
    if resolution == 0 || resolution % 20 != 0 {
        return Err(Error::InvalidArgument(
            "reservoir resolution must be a positive multiple of 20".into(),
        ));
    }
    let res = resolution;
    let (nx, ny) = (2 * res, res);
    let rect = Rect::new([0.0, 0.0], [2.0, 1.0]);
    // notch cells: x in [0.95, 1.05], y in [0.5, 1.0]
    let (ix0, ix1) = ((95 * res) / 100, (105 * res) / 100);
    let jy0 = res / 2;
    let keep = move |i: usize, j: usize| !(i >= ix0 && i < ix1 && j >= jy0);
    let eps = 1e-9;
    let tagger = move |mid: [f64; 2], _n: [f64; 2]| {
        if mid[0].abs() < eps || (mid[0] - 2.0).abs() < eps {
            "injection".to_string()
        } else if mid[1].abs() < eps {
            "bottom".to_string()
        } else if (mid[1] - 1.0).abs() < eps {
            "top".to_string()
        } else {
            "well".to_string()
        }
    };
    let mesh = Mesh::generate_masked(ElemKind::Q4, nx, ny, rect, &keep, &tagger)?;

    let mut problem = ProblemSpec::new(drag);
    problem.body_force = BodyForce::Constant([0.0, -1.0]);
    problem
        .facet_bcs
        .insert("well".into(), FacetBc::Pressure(1.0));
    problem
        .facet_bcs
        .insert("injection".into(), FacetBc::Pressure(p_enh));
    problem
        .facet_bcs
        .insert("top".into(), FacetBc::NormalVelocity(0.0));
    problem
        .facet_bcs
        .insert("bottom".into(), FacetBc::NormalVelocity(0.0));
    Ok((mesh, problem))
}

/// Total flux of a solution through all facets with `tag`, computed with
/// the same 2-point edge Gauss rule as assembly.
#[derive(Debug, Clone)]
pub struct FluxReport {
    pub tag: String,
    pub flux: f64,
}

pub fn total_flux(solution: &SolutionField, mesh: &Mesh, tag: &str) -> Result<FluxReport> {
    let facets = mesh.boundary_facets(tag)?;
    let mut flux = 0.0;
    for f in facets {
        let a = mesh.nodes[f.nodes[0]].coords;
        let b = mesh.nodes[f.nodes[1]].coords;
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let va = solution.velocity[f.nodes[0]];
        let vb = solution.velocity[f.nodes[1]];
        for (s, w) in edge_quadrature() {
            let ns = edge_shape(s);
            let v = [
                ns[0] * va[0] + ns[1] * vb[0],
                ns[0] * va[1] + ns[1] * vb[1],
            ];
            flux += 0.5 * len * w * (v[0] * f.normal[0] + v[1] * f.normal[1]);
        }
    }
    Ok(FluxReport {
        tag: tag.to_string(),
        flux,
    })
}

/// One sampled point of a cone profile.
#[derive(Debug, Clone, Copy)]
pub struct ConeRow {
    /// Signed horizontal distance from the well axis.
    pub distance: f64,
    pub depth: f64,
    pub pressure: f64,
}

/// Pressure along horizontal lines `y = depth`, sampled with spacing h/2
/// across the domain, as signed distance from `well_x`. Points outside the
/// mesh are skipped with a warning on stderr.
pub fn cone_profile(
    solution: &SolutionField,
    mesh: &Mesh,
    depths: &[f64],
    well_x: f64,
) -> Vec<ConeRow> {
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in &mesh.nodes {
        xmin = xmin.min(n.coords[0]);
        xmax = xmax.max(n.coords[0]);
    }
    let step = mesh.h / 2.0;
    let count = ((xmax - xmin) / step).round() as usize;
    let mut rows = Vec::new();
    for &depth in depths {
        for k in 0..=count {
            let x = xmin + (xmax - xmin) * k as f64 / count as f64;
            match verification::sample_pressure(mesh, solution, [x, depth]) {
                Some(p) => rows.push(ConeRow {
                    distance: x - well_x,
                    depth,
                    pressure: p,
                }),
                None => eprintln!("cone_profile: point ({x:.6}, {depth:.6}) outside mesh, skipped"),
            }
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    Beta,
    PEnh,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Beta => "beta",
            SweepParameter::PEnh => "p_enh",
        }
    }
}

/// One row of a sweep report. Failed solves carry the error text and leave
/// the result columns empty.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub iterations: Option<usize>,
    pub p_max: Option<f64>,
    pub exp_beta_pmax: Option<f64>,
    pub flux: Option<f64>,
    pub error: Option<String>,
}

/// Run one solve per parameter value. `builder` maps the swept value to a
/// full problem; `flux_tag` adds a total-flux column. Individual failures
/// are recorded per row and the sweep continues. With `threads > 1` the
/// entries run in parallel (they are independent solves).
pub fn sweep<F>(
    builder: F,
    values: &[f64],
    newton: &NewtonConfig,
    flux_tag: Option<&str>,
    threads: usize,
) -> Vec<SweepRow>
where
    F: Fn(f64) -> Result<(Mesh, ProblemSpec)> + Sync,
{
    let run_one = |&value: &f64| -> SweepRow {
        let mut row = SweepRow {
            value,
            iterations: None,
            p_max: None,
            exp_beta_pmax: None,
            flux: None,
            error: None,
        };
        let (mesh, problem) = match builder(value) {
            Ok(pair) => pair,
            Err(e) => {
                row.error = Some(e.to_string());
                return row;
            }
        };
        match newton_solve(&problem, &mesh, newton) {
            Ok(solution) => {
                row.iterations = Some(solution.history.iterations);
                let p_max = solution
                    .pressure
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                row.p_max = Some(p_max);
                row.exp_beta_pmax = Some((problem.drag.beta * p_max).exp());
                if let Some(tag) = flux_tag {
                    match total_flux(&solution, &mesh, tag) {
                        Ok(report) => row.flux = Some(report.flux),
                        Err(e) => row.error = Some(e.to_string()),
                    }
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    };

    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            use rayon::prelude::*;
            values.par_iter().map(run_one).collect()
        })
    } else {
        values.iter().map(run_one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_spot_element_counts() {
        let (q4, _) = build_five_spot(20, ElemKind::Q4, DragModel::constant(1.0)).unwrap();
        assert_eq!(q4.num_elements(), 400);
        let (t3, _) = build_five_spot(20, ElemKind::T3, DragModel::constant(1.0)).unwrap();
        assert_eq!(t3.num_elements(), 800);
    }

    #[test]
    fn five_spot_source_strengths_balance() {
        let (_, problem) = build_five_spot(4, ElemKind::Q4, DragModel::constant(1.0)).unwrap();
        let net: f64 = problem.point_sources.iter().map(|s| s.strength).sum();
        assert_eq!(net, 0.0);
        assert!(problem.pressure_pin.is_some());
    }

    #[test]
    fn reservoir_mesh_scale_and_tags() {
        let (mesh, problem) =
            build_reservoir(DragModel::exponential(1.0, 0.005), 5.0, 40).unwrap();
        // 80 x 40 grid minus the 4 x 20 notch cells
        assert_eq!(mesh.num_elements(), 3200 - 80);
        assert_eq!(mesh.tags(), vec!["bottom", "injection", "top", "well"]);
        problem.check_bcs(&mesh).unwrap();
        // notch opening (0.1) + two walls (0.5 each) of well surface
        let well_len: f64 = mesh
            .boundary_facets("well")
            .unwrap()
            .iter()
            .map(|f| mesh.facet_length(f))
            .sum();
        assert!((well_len - 1.1).abs() < 1e-12, "well surface {well_len}");
    }

    #[test]
    fn uniform_velocity_flux_through_right_edge() {
        let mesh = Mesh::generate_structured(ElemKind::Q4, 3, 3, Rect::unit_square()).unwrap();
        let solution = SolutionField::uniform(&mesh, [1.0, 0.0], 0.0);
        let report = total_flux(&solution, &mesh, "right").unwrap();
        assert!((report.flux - 1.0).abs() < 1e-14);
        // left normal is (-1, 0): inflow
        let report = total_flux(&solution, &mesh, "left").unwrap();
        assert!((report.flux + 1.0).abs() < 1e-14);
    }

    #[test]
    fn flux_unknown_tag_is_error() {
        let mesh = Mesh::generate_structured(ElemKind::Q4, 2, 2, Rect::unit_square()).unwrap();
        let solution = SolutionField::uniform(&mesh, [0.0, 0.0], 0.0);
        assert!(total_flux(&solution, &mesh, "nowhere").is_err());
    }

    #[test]
    fn cone_profile_flat_for_constant_pressure() {
        let (mesh, _) = build_reservoir(DragModel::constant(1.0), 5.0, 20).unwrap();
        let solution = SolutionField::uniform(&mesh, [0.0, 0.0], 3.5);
        let rows = cone_profile(&solution, &mesh, &[0.25], 1.0);
        assert!(!rows.is_empty());
        for row in rows {
            assert!((row.pressure - 3.5).abs() < 1e-12);
        }
    }
}
