//! Reference elements: shape functions, isoparametric geometry and
//! quadrature for four-node quadrilaterals (Q4) and three-node triangles
//! (T3) with equal-order interpolation.
//!
//! Reference domains:
//! - Q4: [-1, 1]^2, nodes counter-clockwise from (-1, -1)
//! - T3: unit simplex, nodes (0,0), (1,0), (0,1)
//!
//! `N` is a row vector of shape functions and `DN` its n x 2 matrix of
//! derivatives with respect to the reference coordinates. The physical
//! gradient matrix is `B = DN * J^{-1}` with `J = dx/dxi`, so the gradient
//! of an interpolated field u is `B^T * u_nodes`.

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::error::{Error, Result};
use crate::mesh::ElemKind;

/// Shape-function values and reference-coordinate derivatives at one point.
#[derive(Debug, Clone)]
pub struct ShapeEval {
    pub n: DVector<f64>,
    pub dn: DMatrix<f64>,
}

/// Isoparametric geometry at one quadrature point.
#[derive(Debug, Clone)]
pub struct GeometryEval {
    pub jac: Matrix2<f64>,
    pub det_j: f64,
    /// n x 2 matrix of physical shape-function gradients.
    pub b: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Evaluate shape functions at a reference coordinate.
pub fn shape(kind: ElemKind, xi: [f64; 2]) -> ShapeEval {
    match kind {
        ElemKind::Q4 => {
            let (r, s) = (xi[0], xi[1]);
            // nodes CCW from lower-left: (-1,-1), (1,-1), (1,1), (-1,1)
            let n = DVector::from_vec(vec![
                0.25 * (1.0 - r) * (1.0 - s),
                0.25 * (1.0 + r) * (1.0 - s),
                0.25 * (1.0 + r) * (1.0 + s),
                0.25 * (1.0 - r) * (1.0 + s),
            ]);
            let dn = DMatrix::from_row_slice(
                4,
                2,
                &[
                    -0.25 * (1.0 - s),
                    -0.25 * (1.0 - r),
                    0.25 * (1.0 - s),
                    -0.25 * (1.0 + r),
                    0.25 * (1.0 + s),
                    0.25 * (1.0 + r),
                    -0.25 * (1.0 + s),
                    0.25 * (1.0 - r),
                ],
            );
            ShapeEval { n, dn }
        }
        ElemKind::T3 => {
            let (r, s) = (xi[0], xi[1]);
            let n = DVector::from_vec(vec![1.0 - r - s, r, s]);
            let dn = DMatrix::from_row_slice(3, 2, &[-1.0, -1.0, 1.0, 0.0, 0.0, 1.0]);
            ShapeEval { n, dn }
        }
    }
}

/// Jacobian, determinant and physical gradient matrix for an element with
/// the given node coordinates. `elem` is only used in error messages.
pub fn geometry(coords: &[[f64; 2]], dn: &DMatrix<f64>, elem: usize) -> Result<GeometryEval> {
    let n = coords.len();
    debug_assert_eq!(dn.nrows(), n);
    // J_{ij} = d x_i / d xi_j = sum_a DN_{a,j} x_{a,i}
    let mut jac: Matrix2<f64> = Matrix2::zeros();
    for a in 0..n {
        for i in 0..2 {
            for j in 0..2 {
                jac[(i, j)] += dn[(a, j)] * coords[a][i];
            }
        }
    }
    let det_j = jac[(0, 0)] * jac[(1, 1)] - jac[(0, 1)] * jac[(1, 0)];
    if det_j <= 0.0 || !det_j.is_finite() {
        return Err(Error::DegenerateElement { elem, det: det_j });
    }
    let inv = Matrix2::new(jac[(1, 1)], -jac[(0, 1)], -jac[(1, 0)], jac[(0, 0)]) / det_j;
    let mut b = DMatrix::zeros(n, 2);
    for a in 0..n {
        for i in 0..2 {
            b[(a, i)] = dn[(a, 0)] * inv[(0, i)] + dn[(a, 1)] * inv[(1, i)];
        }
    }
    Ok(GeometryEval { jac, det_j, b })
}

/// Volume quadrature rule.
///
/// `order` selects the rule: for Q4 it is the number of Gauss points per
/// direction (2 or 3); for T3 it is the point count (1, 3 or 4). The
/// 4-point triangle rule is the classical degree-3 symmetric rule; its
/// centroid weight is negative.
pub fn quadrature(kind: ElemKind, order: u32) -> Result<QuadratureRule> {
    match (kind, order) {
        (ElemKind::Q4, 2) => Ok(gauss_product(&GAUSS_2)),
        (ElemKind::Q4, 3) => Ok(gauss_product(&GAUSS_3)),
        (ElemKind::T3, 1) => Ok(QuadratureRule {
            points: vec![[1.0 / 3.0, 1.0 / 3.0]],
            weights: vec![0.5],
        }),
        (ElemKind::T3, 3) => Ok(QuadratureRule {
            points: vec![
                [1.0 / 6.0, 1.0 / 6.0],
                [2.0 / 3.0, 1.0 / 6.0],
                [1.0 / 6.0, 2.0 / 3.0],
            ],
            weights: vec![1.0 / 6.0; 3],
        }),
        (ElemKind::T3, 4) => Ok(QuadratureRule {
            points: vec![
                [1.0 / 3.0, 1.0 / 3.0],
                [0.6, 0.2],
                [0.2, 0.6],
                [0.2, 0.2],
            ],
            weights: vec![-27.0 / 96.0, 25.0 / 96.0, 25.0 / 96.0, 25.0 / 96.0],
        }),
        _ => Err(Error::InvalidArgument(format!(
            "unsupported quadrature order {order} for {kind:?}"
        ))),
    }
}

/// Default volume rule: 2x2 Gauss for Q4, 3-point for T3.
pub fn default_quadrature(kind: ElemKind) -> QuadratureRule {
    match kind {
        ElemKind::Q4 => quadrature(kind, 2).unwrap(),
        ElemKind::T3 => quadrature(kind, 3).unwrap(),
    }
}

/// Rule used for error norms: one step above the assembly default.
pub fn error_quadrature(kind: ElemKind) -> QuadratureRule {
    match kind {
        ElemKind::Q4 => quadrature(kind, 3).unwrap(),
        ElemKind::T3 => quadrature(kind, 4).unwrap(),
    }
}

const GAUSS_2: [(f64, f64); 2] = [(-0.577_350_269_189_625_8, 1.0), (0.577_350_269_189_625_8, 1.0)];
const GAUSS_3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

fn gauss_product(rule_1d: &[(f64, f64)]) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(s, ws) in rule_1d {
        for &(r, wr) in rule_1d {
            points.push([r, s]);
            weights.push(wr * ws);
        }
    }
    QuadratureRule { points, weights }
}

/// 2-point Gauss rule on [-1, 1], used for all facet integrals.
pub fn edge_quadrature() -> [(f64, f64); 2] {
    GAUSS_2
}

/// Hat-function values of the two edge nodes at edge coordinate s in [-1, 1].
pub fn edge_shape(s: f64) -> [f64; 2] {
    [0.5 * (1.0 - s), 0.5 * (1.0 + s)]
}
