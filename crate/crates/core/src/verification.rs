//! Exact-solution oracles and error measurement: closed-form 1D solutions
//! for all three drag models, the 2D manufactured solution with its drag
//! dependent body force, L2 error norms and h-convergence studies.
//!
//! The 1D problems run on degenerate 2D strip meshes (n x 1 square cells)
//! so they exercise the production assembly path; end pressures enter as
//! natural boundary data and the side walls are no-flow.

use crate::cases::{BodyForce, FacetBc, ProblemSpec};
use crate::drag::{DragModel, DragVariant};
use crate::error::{Error, Result};
use crate::mesh::{ElemKind, Mesh, Rect};
use crate::ref_elem::{error_quadrature, geometry, shape};
use crate::solver::{newton_solve, NewtonConfig, SolutionField};

/// Closed-form 1D solution on the unit interval with end pressures `p1`
/// and `p2` and no body force.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolution1D {
    pub drag: DragModel,
    pub p1: f64,
    pub p2: f64,
    pub a_group: f64,
}

impl ExactSolution1D {
    /// Pressure and velocity at `x` in [0, 1].
    pub fn eval(&self, x: f64) -> Result<(f64, f64)> {
        let DragModel {
            variant,
            alpha0,
            beta,
        } = self.drag;
        let (p1, p2) = (self.p1, self.p2);
        let aa0 = self.a_group * alpha0;
        match variant {
            DragVariant::Constant => {
                let p = (p2 - p1) * x + p1;
                let v = -(p2 - p1) / aa0;
                Ok((p, v))
            }
            DragVariant::LinearBarus => {
                if beta == 0.0 {
                    return Err(Error::InvalidArgument(
                        "beta = 0 for the linear model; use the constant drag solution".into(),
                    ));
                }
                let q1 = 1.0 + beta * p1;
                let q2 = 1.0 + beta * p2;
                let p = (q1.powf(1.0 - x) * q2.powf(x) - 1.0) / beta;
                let v = -(q2 / q1).ln() / (aa0 * beta);
                Ok((p, v))
            }
            DragVariant::ExponentialBarus => {
                if beta == 0.0 {
                    return Err(Error::InvalidArgument(
                        "beta = 0 for the exponential model; use the constant drag solution"
                            .into(),
                    ));
                }
                let e1 = (-beta * p1).exp();
                let e2 = (-beta * p2).exp();
                let p = -((1.0 - x) * e1 + x * e2).ln() / beta;
                let v = (e2 - e1) / (aa0 * beta);
                Ok((p, v))
            }
        }
    }
}

/// Strip mesh and problem realizing the 1D case: `n x 1` square Q4 cells on
/// [0,1] x [0,1/n], end pressures as natural data, no-flow side walls.
pub fn oned_strip(
    drag: DragModel,
    p1: f64,
    p2: f64,
    n: usize,
    a_group: f64,
) -> Result<(Mesh, ProblemSpec)> {
    if n < 1 {
        return Err(Error::InvalidArgument("strip needs n >= 1".into()));
    }
    let height = 1.0 / n as f64;
    let mesh = Mesh::generate_structured(ElemKind::Q4, n, 1, Rect::new([0.0, 0.0], [1.0, height]))?;
    let mut problem = ProblemSpec::new(drag);
    problem.a_group = a_group;
    problem.facet_bcs.insert("left".into(), FacetBc::Pressure(p1));
    problem
        .facet_bcs
        .insert("right".into(), FacetBc::Pressure(p2));
    problem
        .facet_bcs
        .insert("bottom".into(), FacetBc::NormalVelocity(0.0));
    problem
        .facet_bcs
        .insert("top".into(), FacetBc::NormalVelocity(0.0));
    Ok((mesh, problem))
}

/// Manufactured velocity: divergence-free, zero normal component on the
/// unit-square boundary.
pub fn manufactured_velocity(x: f64, y: f64) -> [f64; 2] {
    use std::f64::consts::PI;
    [
        (PI * x).sin() * (PI * y).cos(),
        -(PI * x).cos() * (PI * y).sin(),
    ]
}

pub fn manufactured_pressure(x: f64, y: f64) -> f64 {
    1.0 + 25.0 * x * y * (x - 1.0) * (y - 1.0)
}

pub fn manufactured_pressure_grad(x: f64, y: f64) -> [f64; 2] {
    [
        25.0 * (2.0 * x - 1.0) * y * (y - 1.0),
        25.0 * x * (x - 1.0) * (2.0 * y - 1.0),
    ]
}

/// Body force that makes the manufactured fields an exact solution of the
/// governing equations for the given drag model (with all dimensionless
/// groups equal to one).
pub fn manufactured_body_force(model: &DragModel, x: f64, y: f64) -> [f64; 2] {
    let p = manufactured_pressure(x, y);
    let alpha = model
        .alpha(p)
        .expect("manufactured pressure lies in the drag model's domain");
    let v = manufactured_velocity(x, y);
    let g = manufactured_pressure_grad(x, y);
    [alpha * v[0] + g[0], alpha * v[1] + g[1]]
}

/// The manufactured fields and body force of the reference configuration
/// (exponential drag, alpha0 = 1, beta = 2): `(v_x, v_y, p, b_x, b_y)`.
pub fn manufactured_fields(x: f64, y: f64) -> (f64, f64, f64, f64, f64) {
    let model = DragModel::exponential(1.0, 2.0);
    let v = manufactured_velocity(x, y);
    let p = manufactured_pressure(x, y);
    let b = manufactured_body_force(&model, x, y);
    (v[0], v[1], p, b[0], b[1])
}

/// Manufactured problem on a unit-square mesh: no-flow boundary, pressure
/// pinned at node 0 to the exact value.
pub fn manufactured_problem(mesh: &Mesh, drag: DragModel) -> ProblemSpec {
    let mut problem = ProblemSpec::new(drag);
    problem.body_force = BodyForce::Manufactured(drag);
    for tag in mesh.tags() {
        problem.facet_bcs.insert(tag, FacetBc::NormalVelocity(0.0));
    }
    let [x0, y0] = mesh.nodes[0].coords;
    problem.pressure_pin = Some((0, manufactured_pressure(x0, y0)));
    problem
}

/// L2 errors of pressure and velocity against an exact field, integrated
/// with the error quadrature (one order above the assembly default).
pub fn l2_error(
    solution: &SolutionField,
    exact: &dyn Fn(f64, f64) -> (f64, [f64; 2]),
    mesh: &Mesh,
) -> (f64, f64) {
    let mut err_p2 = 0.0;
    let mut err_v2 = 0.0;
    for e in &mesh.elements {
        let coords = mesh.elem_coords(e.id);
        let rule = error_quadrature(e.kind);
        for (q, &xi) in rule.points.iter().enumerate() {
            let se = shape(e.kind, xi);
            let geo = geometry(&coords, &se.dn, e.id).expect("valid element");
            let s = rule.weights[q] * geo.det_j;
            let mut x = [0.0; 2];
            let mut ph = 0.0;
            let mut vh = [0.0; 2];
            for (a, &node) in e.connectivity.iter().enumerate() {
                let na = se.n[a];
                x[0] += na * coords[a][0];
                x[1] += na * coords[a][1];
                ph += na * solution.pressure[node];
                vh[0] += na * solution.velocity[node][0];
                vh[1] += na * solution.velocity[node][1];
            }
            let (pe, ve) = exact(x[0], x[1]);
            err_p2 += s * (ph - pe) * (ph - pe);
            err_v2 += s * ((vh[0] - ve[0]).powi(2) + (vh[1] - ve[1]).powi(2));
        }
    }
    // the degree-3 triangle rule carries a negative centroid weight; clamp
    // roundoff-negative sums before the square root
    (err_p2.max(0.0).sqrt(), err_v2.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub h: f64,
    pub err_p: f64,
    pub err_v: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slopes of ln(err) vs ln(h) over all completed rows.
    pub slope_p: Option<f64>,
    pub slope_v: Option<f64>,
    /// Pairwise slopes between consecutive rows.
    pub pairwise_p: Vec<f64>,
    pub pairwise_v: Vec<f64>,
    /// Set when a ladder level failed to solve; rows hold partial results.
    pub failure: Option<String>,
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solve the manufactured problem on a ladder of structured meshes and
/// report L2 errors and convergence slopes. A failing level stops the
/// ladder and flags the partial table.
pub fn convergence_study(
    drag: DragModel,
    kind: ElemKind,
    divisions: &[usize],
    newton: &NewtonConfig,
) -> ConvergenceTable {
    let exact = |x: f64, y: f64| (manufactured_pressure(x, y), manufactured_velocity(x, y));
    let mut table = ConvergenceTable {
        rows: Vec::new(),
        slope_p: None,
        slope_v: None,
        pairwise_p: Vec::new(),
        pairwise_v: Vec::new(),
        failure: None,
    };
    for &n in divisions {
        let level = || -> Result<ConvergenceRow> {
            let mesh = Mesh::generate_structured(kind, n, n, Rect::unit_square())?;
            let problem = manufactured_problem(&mesh, drag);
            let solution = newton_solve(&problem, &mesh, newton)?;
            let (err_p, err_v) = l2_error(&solution, &exact, &mesh);
            Ok(ConvergenceRow {
                h: mesh.h,
                err_p,
                err_v,
            })
        };
        match level() {
            Ok(row) => table.rows.push(row),
            Err(e) => {
                table.failure = Some(format!("level n = {n}: {e}"));
                break;
            }
        }
    }
    let pts_p: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (r.h.ln(), r.err_p.ln()))
        .collect();
    let pts_v: Vec<(f64, f64)> = table
        .rows
        .iter()
        .map(|r| (r.h.ln(), r.err_v.ln()))
        .collect();
    table.slope_p = least_squares_slope(&pts_p);
    table.slope_v = least_squares_slope(&pts_v);
    for w in pts_p.windows(2) {
        table.pairwise_p.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
    }
    for w in pts_v.windows(2) {
        table.pairwise_v.push((w[1].1 - w[0].1) / (w[1].0 - w[0].0));
    }
    table
}

/// Locate the element containing a physical point; returns the element id
/// and reference coordinates.
pub fn locate_point(mesh: &Mesh, point: [f64; 2]) -> Option<(usize, [f64; 2])> {
    let tol = 1e-9;
    for e in &mesh.elements {
        let coords = mesh.elem_coords(e.id);
        // bounding-box prefilter
        let (mut xmin, mut xmax, mut ymin, mut ymax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in &coords {
            xmin = xmin.min(c[0]);
            xmax = xmax.max(c[0]);
            ymin = ymin.min(c[1]);
            ymax = ymax.max(c[1]);
        }
        let pad = tol * (1.0 + (xmax - xmin).max(ymax - ymin));
        if point[0] < xmin - pad
            || point[0] > xmax + pad
            || point[1] < ymin - pad
            || point[1] > ymax + pad
        {
            continue;
        }
        match e.kind {
            ElemKind::T3 => {
                let (a, b, c) = (coords[0], coords[1], coords[2]);
                let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
                let r = ((point[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (point[1] - a[1]))
                    / det;
                let s = ((b[0] - a[0]) * (point[1] - a[1]) - (point[0] - a[0]) * (b[1] - a[1]))
                    / det;
                if r >= -tol && s >= -tol && r + s <= 1.0 + tol {
                    return Some((e.id, [r, s]));
                }
            }
            ElemKind::Q4 => {
                // invert the bilinear map with a short Newton iteration
                let mut xi = [0.0, 0.0];
                let mut ok = false;
                for _ in 0..12 {
                    let se = shape(ElemKind::Q4, xi);
                    let mut x = [0.0, 0.0];
                    for a in 0..4 {
                        x[0] += se.n[a] * coords[a][0];
                        x[1] += se.n[a] * coords[a][1];
                    }
                    let rx = point[0] - x[0];
                    let ry = point[1] - x[1];
                    if rx.abs() + ry.abs() < 1e-13 {
                        ok = true;
                        break;
                    }
                    let Ok(geo) = geometry(&coords, &se.dn, e.id) else {
                        break;
                    };
                    // d xi = J^{-1} dx
                    let det = geo.det_j;
                    let j = geo.jac;
                    xi[0] += (j[(1, 1)] * rx - j[(0, 1)] * ry) / det;
                    xi[1] += (-j[(1, 0)] * rx + j[(0, 0)] * ry) / det;
                    ok = true;
                }
                if ok && xi[0].abs() <= 1.0 + tol && xi[1].abs() <= 1.0 + tol {
                    return Some((e.id, xi));
                }
            }
        }
    }
    None
}

/// Interpolated pressure at a physical point, None when outside the mesh.
pub fn sample_pressure(mesh: &Mesh, solution: &SolutionField, point: [f64; 2]) -> Option<f64> {
    let (elem, xi) = locate_point(mesh, point)?;
    let e = &mesh.elements[elem];
    let se = shape(e.kind, xi);
    let mut p = 0.0;
    for (a, &node) in e.connectivity.iter().enumerate() {
        p += se.n[a] * solution.pressure[node];
    }
    Some(p)
}

/// Interpolated velocity at a physical point.
pub fn sample_velocity(
    mesh: &Mesh,
    solution: &SolutionField,
    point: [f64; 2],
) -> Option<[f64; 2]> {
    let (elem, xi) = locate_point(mesh, point)?;
    let e = &mesh.elements[elem];
    let se = shape(e.kind, xi);
    let mut v = [0.0, 0.0];
    for (a, &node) in e.connectivity.iter().enumerate() {
        v[0] += se.n[a] * solution.velocity[node][0];
        v[1] += se.n[a] * solution.velocity[node][1];
    }
    Some(v)
}
