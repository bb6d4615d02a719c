//! Element residual vectors, consistent tangent blocks and global assembly
//! for the stabilized mixed formulation.
//!
//! The weak form weights `alpha(p) w + grad q` against the momentum
//! residual `alpha(p) v + grad p - rho b` with weight `-1/2 * alpha^{-1}`,
//! on top of the classical mixed terms. All drag factors carry the
//! dimensionless group `A` and all body-force factors carry `C * rho`, so
//! the effective drag is `A * alpha(p)` throughout.
//!
//! Velocity degrees of freedom are ordered node-major: local velocity dof
//! `2a + i` is component `i` of node `a`, matching the row-major `vec` of
//! the nodal velocity matrix. Per node the global ordering is
//! `(v_x, v_y, p)`, i.e. dof `3 * node + comp`.
//!
//! The tangent is the exact derivative of the residual with respect to the
//! nodal unknowns; Newton solves `K * delta = -R`. For a constant drag
//! function `K_pv = K_vp^T` and `K_pp` is symmetric; pressure dependence
//! breaks both through the `d alpha / d p` terms.

use nalgebra::{DMatrix, DVector};

use crate::cases::{FacetBc, ProblemSpec};
use crate::drag::DragModel;
use crate::error::{Error, Result};
use crate::mesh::{ElemKind, Mesh};
use crate::ref_elem::{
    default_quadrature, edge_quadrature, edge_shape, geometry, quadrature, shape, QuadratureRule,
};

/// Kronecker product: block matrix `[a_ij * B]`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = a.shape();
    let (p, q) = b.shape();
    let mut out = DMatrix::zeros(n * p, m * q);
    for i in 0..n {
        for j in 0..m {
            let scale = a[(i, j)];
            for r in 0..p {
                for c in 0..q {
                    out[(i * p + r, j * q + c)] = scale * b[(r, c)];
                }
            }
        }
    }
    out
}

/// Row-major flattening `(a_11, ..., a_1m, a_21, ...)` of a matrix.
pub fn vec_rm(a: &DMatrix<f64>) -> DVector<f64> {
    let (n, m) = a.shape();
    let mut out = DVector::zeros(n * m);
    for i in 0..n {
        for j in 0..m {
            out[i * m + j] = a[(i, j)];
        }
    }
    out
}

/// Number of dofs per node: two velocity components and one pressure.
pub const NODE_DOFS: usize = 3;

/// Maps nodes to global dofs and records essential constraints.
#[derive(Debug, Clone)]
pub struct DofMap {
    num_nodes: usize,
    prescribed: Vec<Option<f64>>,
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
}

impl DofMap {
    pub fn new(num_nodes: usize) -> Self {
        DofMap {
            num_nodes,
            prescribed: vec![None; NODE_DOFS * num_nodes],
            free_index: Vec::new(),
            free_dofs: Vec::new(),
        }
    }

    pub fn vdof(node: usize, comp: usize) -> usize {
        debug_assert!(comp < 2);
        NODE_DOFS * node + comp
    }

    pub fn pdof(node: usize) -> usize {
        NODE_DOFS * node + 2
    }

    pub fn num_total(&self) -> usize {
        NODE_DOFS * self.num_nodes
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Fix a dof to a value; repeated identical constraints are fine,
    /// contradicting ones are an error.
    pub fn constrain(&mut self, dof: usize, value: f64) -> Result<()> {
        match self.prescribed[dof] {
            None => {
                self.prescribed[dof] = Some(value);
                Ok(())
            }
            Some(existing) if (existing - value).abs() <= 1e-12 * (1.0 + value.abs()) => Ok(()),
            Some(existing) => Err(Error::ConstraintConflict {
                dof,
                a: existing,
                b: value,
            }),
        }
    }

    /// Build the free-dof index after all constraints are recorded.
    pub fn finalize(&mut self) {
        self.free_index = vec![usize::MAX; self.num_total()];
        self.free_dofs.clear();
        for dof in 0..self.num_total() {
            if self.prescribed[dof].is_none() {
                self.free_index[dof] = self.free_dofs.len();
                self.free_dofs.push(dof);
            }
        }
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.prescribed[dof].is_none()
    }

    pub fn prescribed_value(&self, dof: usize) -> Option<f64> {
        self.prescribed[dof]
    }

    /// Free index of a dof, or None when constrained.
    pub fn free_of(&self, dof: usize) -> Option<usize> {
        match self.free_index[dof] {
            usize::MAX => None,
            idx => Some(idx),
        }
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Write all prescribed values into a full state vector.
    pub fn apply_to_state(&self, state: &mut [f64]) {
        for (dof, value) in self.prescribed.iter().enumerate() {
            if let Some(v) = value {
                state[dof] = *v;
            }
        }
    }
}

/// Residual and tangent blocks of one element.
#[derive(Debug, Clone)]
pub struct ElementContribution {
    pub rv: DVector<f64>,
    pub rp: DVector<f64>,
    pub kvv: DMatrix<f64>,
    pub kvp: DMatrix<f64>,
    pub kpv: DMatrix<f64>,
    pub kpp: DMatrix<f64>,
}

/// Everything `element_contribution` needs about one element.
pub struct ElementContext<'a> {
    pub elem: usize,
    pub kind: ElemKind,
    pub coords: &'a [[f64; 2]],
    pub drag: DragModel,
    /// Nodal velocities of the element.
    pub vel: &'a [[f64; 2]],
    /// Nodal pressures of the element.
    pub pressure: &'a [f64],
    pub body: &'a dyn Fn(f64, f64) -> [f64; 2],
    pub a_group: f64,
    /// Combined factor C * rho applied to the body force.
    pub c_rho: f64,
    /// Local edges of this element on the pressure boundary, with datum.
    pub dirichlet_facets: &'a [(usize, f64)],
    pub quad: &'a QuadratureRule,
    pub div_stabilization: bool,
}

/// Quadrature-evaluated element residuals and tangent blocks.
pub fn element_contribution(ctx: &ElementContext) -> Result<ElementContribution> {
    let n = ctx.coords.len();
    let mut rv = DVector::zeros(2 * n);
    let mut rp = DVector::zeros(n);
    let mut kvv = DMatrix::zeros(2 * n, 2 * n);
    let mut kvp = DMatrix::zeros(2 * n, n);
    let mut kpv = DMatrix::zeros(n, 2 * n);
    let mut kpp = DMatrix::zeros(n, n);

    for (q, &xi) in ctx.quad.points.iter().enumerate() {
        let se = shape(ctx.kind, xi);
        let geo = geometry(ctx.coords, &se.dn, ctx.elem)?;
        let s = ctx.quad.weights[q] * geo.det_j;
        let nrow = &se.n;
        let b = &geo.b;

        // interpolated fields at the quadrature point
        let mut x = [0.0; 2];
        let mut v = [0.0; 2];
        let mut p = 0.0;
        let mut g = [0.0; 2]; // grad p
        let mut div_v = 0.0;
        for a in 0..n {
            let na = nrow[a];
            x[0] += na * ctx.coords[a][0];
            x[1] += na * ctx.coords[a][1];
            v[0] += na * ctx.vel[a][0];
            v[1] += na * ctx.vel[a][1];
            p += na * ctx.pressure[a];
            g[0] += b[(a, 0)] * ctx.pressure[a];
            g[1] += b[(a, 1)] * ctx.pressure[a];
            div_v += b[(a, 0)] * ctx.vel[a][0] + b[(a, 1)] * ctx.vel[a][1];
        }
        let bf = (ctx.body)(x[0], x[1]);
        let rb = [ctx.c_rho * bf[0], ctx.c_rho * bf[1]];

        let in_elem = |e: Error| Error::InElement {
            elem: ctx.elem,
            pressure: p,
            source: Box::new(e),
        };
        let alpha = ctx.a_group * ctx.drag.alpha(p).map_err(in_elem)?;
        let dalpha = ctx.a_group
            * ctx.drag.dalpha_dp(p).map_err(|e| Error::InElement {
                elem: ctx.elem,
                pressure: p,
                source: Box::new(e),
            })?;

        // momentum residual of the strong form at this point
        let res = [alpha * v[0] + g[0] - rb[0], alpha * v[1] + g[1] - rb[1]];

        for a in 0..n {
            let na = nrow[a];
            for i in 0..2 {
                // drag + pressure volume + body + stabilization terms
                rv[2 * a + i] += s
                    * (na * alpha * v[i] - b[(a, i)] * p - na * rb[i] - 0.5 * na * res[i]);
                if ctx.div_stabilization {
                    rv[2 * a + i] += 0.5 * s * b[(a, i)] * div_v;
                }
            }
            let mut stab = 0.0;
            for i in 0..2 {
                stab += b[(a, i)] * (v[i] + (g[i] - rb[i]) / alpha);
            }
            rp[a] += s * (-na * div_v - 0.5 * stab);
        }

        for a in 0..n {
            for bn in 0..n {
                let nanb = nrow[a] * nrow[bn];
                // K_vv: half drag mass matrix (+ optional div term)
                for i in 0..2 {
                    kvv[(2 * a + i, 2 * bn + i)] += 0.5 * s * alpha * nanb;
                }
                if ctx.div_stabilization {
                    for i in 0..2 {
                        for j in 0..2 {
                            kvv[(2 * a + i, 2 * bn + j)] += 0.5 * s * b[(a, i)] * b[(bn, j)];
                        }
                    }
                }
                // K_vp: drag-derivative, divergence-coupling and gradient terms
                for i in 0..2 {
                    kvp[(2 * a + i, bn)] += s
                        * (0.5 * nrow[a] * v[i] * dalpha * nrow[bn]
                            - b[(a, i)] * nrow[bn]
                            - 0.5 * nrow[a] * b[(bn, i)]);
                }
                // K_pv
                for j in 0..2 {
                    kpv[(a, 2 * bn + j)] +=
                        s * (-nrow[a] * b[(bn, j)] - 0.5 * b[(a, j)] * nrow[bn]);
                }
                // K_pp: stabilization Laplacian and drag-derivative term
                let mut lap = 0.0;
                let mut gb = 0.0;
                for i in 0..2 {
                    lap += b[(a, i)] * b[(bn, i)];
                    gb += b[(a, i)] * (g[i] - rb[i]);
                }
                kpp[(a, bn)] +=
                    s * (-0.5 * lap / alpha + 0.5 * gb * dalpha / (alpha * alpha) * nrow[bn]);
            }
        }
    }

    // pressure-datum facet integrals, 2-point edge Gauss
    for &(edge, p0) in ctx.dirichlet_facets {
        let la = edge;
        let lb = (edge + 1) % n;
        let pa = ctx.coords[la];
        let pb = ctx.coords[lb];
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let t = [(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len];
        let normal = [t[1], -t[0]]; // outward for CCW elements
        for (sg, wg) in edge_quadrature() {
            let ns = edge_shape(sg);
            for (k, &node) in [la, lb].iter().enumerate() {
                for i in 0..2 {
                    rv[2 * node + i] += 0.5 * len * wg * ns[k] * normal[i] * p0;
                }
            }
        }
    }

    let finite = rv.iter().all(|x: &f64| x.is_finite())
        && rp.iter().all(|x: &f64| x.is_finite())
        && kvv.iter().all(|x: &f64| x.is_finite())
        && kvp.iter().all(|x: &f64| x.is_finite())
        && kpv.iter().all(|x: &f64| x.is_finite())
        && kpp.iter().all(|x: &f64| x.is_finite());
    if !finite {
        return Err(Error::Internal(format!(
            "non-finite element contribution in element {}",
            ctx.elem
        )));
    }

    Ok(ElementContribution {
        rv,
        rp,
        kvv,
        kvp,
        kpv,
        kpp,
    })
}

/// Sparse global tangent over the free dofs (compressed rows, fixed
/// pattern) together with the Newton right-hand side `-R`.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    /// `-[R_v; R_p]` restricted to free dofs.
    pub rhs: Vec<f64>,
}

impl GlobalSystem {
    /// Allocate the sparsity pattern from the mesh connectivity. The
    /// pattern is an over-approximation that stays fixed across Newton
    /// iterations.
    pub fn with_pattern(mesh: &Mesh, dofmap: &DofMap) -> Self {
        let nn = mesh.num_nodes();
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); nn];
        for e in &mesh.elements {
            for &a in &e.connectivity {
                for &b in &e.connectivity {
                    neighbors[a].push(b);
                }
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }

        let nfree = dofmap.num_free();
        let mut row_ptr = Vec::with_capacity(nfree + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for &dof in dofmap.free_dofs() {
            let node = dof / NODE_DOFS;
            let mut cols: Vec<usize> = Vec::new();
            for &m in &neighbors[node] {
                for comp in 0..NODE_DOFS {
                    if let Some(fc) = dofmap.free_of(NODE_DOFS * m + comp) {
                        cols.push(fc);
                    }
                }
            }
            cols.sort_unstable();
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        GlobalSystem {
            n: nfree,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
            rhs: vec![0.0; nfree],
        }
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        self.rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    fn add(&mut self, row: usize, col: usize, value: f64) {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(pos) => self.values[lo + pos] += value,
            Err(_) => panic!("entry ({row}, {col}) outside the fixed sparsity pattern"),
        }
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for row in 0..self.n {
            let mut sum = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                sum += self.values[k] * x[self.col_idx[k]];
            }
            y[row] = sum;
        }
        y
    }

    /// Dense copy, for small-system tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                out[(row, self.col_idx[k])] = self.values[k];
            }
        }
        out
    }
}

/// Element local-to-global dof scatter for (rv, rp) ordering.
fn global_dofs(conn: &[usize]) -> Vec<usize> {
    let n = conn.len();
    let mut dofs = Vec::with_capacity(3 * n);
    for &node in conn {
        dofs.push(DofMap::vdof(node, 0));
        dofs.push(DofMap::vdof(node, 1));
    }
    for &node in conn {
        dofs.push(DofMap::pdof(node));
    }
    let _ = n;
    dofs
}

/// Assemble the global tangent and right-hand side at the given full state
/// vector. Constrained dofs are eliminated: their rows and columns are
/// dropped and their prescribed values enter through the state itself.
///
/// Returns the residual 2-norm over the free dofs.
pub fn assemble(
    mesh: &Mesh,
    problem: &ProblemSpec,
    dofmap: &DofMap,
    state: &[f64],
    system: &mut GlobalSystem,
) -> Result<f64> {
    assert_eq!(state.len(), dofmap.num_total());
    system.clear();
    let mut residual = vec![0.0; dofmap.num_total()];

    // pressure-datum facets per element
    let mut dirichlet: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mesh.num_elements()];
    for f in &mesh.facets {
        if let Some(FacetBc::Pressure(p0)) = problem.facet_bcs.get(&f.tag) {
            dirichlet[f.elem].push((f.edge, *p0));
        }
    }

    let rule_q4;
    let rule_t3;
    match problem.quadrature_order {
        Some(order) => {
            rule_q4 = quadrature(ElemKind::Q4, order).ok();
            rule_t3 = quadrature(ElemKind::T3, order).ok();
        }
        None => {
            rule_q4 = Some(default_quadrature(ElemKind::Q4));
            rule_t3 = Some(default_quadrature(ElemKind::T3));
        }
    }

    let body = |x: f64, y: f64| problem.body_force.eval(x, y);
    let c_rho = problem.c_group * problem.rho;

    for e in &mesh.elements {
        let coords = mesh.elem_coords(e.id);
        let n = coords.len();
        let mut vel = Vec::with_capacity(n);
        let mut pres = Vec::with_capacity(n);
        for &node in &e.connectivity {
            vel.push([
                state[DofMap::vdof(node, 0)],
                state[DofMap::vdof(node, 1)],
            ]);
            pres.push(state[DofMap::pdof(node)]);
        }
        let quad = match e.kind {
            ElemKind::Q4 => rule_q4.as_ref(),
            ElemKind::T3 => rule_t3.as_ref(),
        }
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "quadrature order {:?} unsupported for {}",
                problem.quadrature_order, e.kind
            ))
        })?;

        let ctx = ElementContext {
            elem: e.id,
            kind: e.kind,
            coords: &coords,
            drag: problem.drag_for(e.id),
            vel: &vel,
            pressure: &pres,
            body: &body,
            a_group: problem.a_group,
            c_rho,
            dirichlet_facets: &dirichlet[e.id],
            quad,
            div_stabilization: problem.div_stabilization,
        };
        let ec = element_contribution(&ctx)?;

        let dofs = global_dofs(&e.connectivity);
        let nv = 2 * n;
        for a in 0..nv {
            residual[dofs[a]] += ec.rv[a];
        }
        for a in 0..n {
            residual[dofs[nv + a]] += ec.rp[a];
        }
        // scatter-add tangent blocks, free rows and columns only
        let mut scatter = |local_rows: usize, local_cols: usize, block: &DMatrix<f64>, row_off: usize, col_off: usize| {
            for lr in 0..local_rows {
                let Some(gr) = dofmap.free_of(dofs[row_off + lr]) else {
                    continue;
                };
                for lc in 0..local_cols {
                    if let Some(gc) = dofmap.free_of(dofs[col_off + lc]) {
                        system.add(gr, gc, block[(lr, lc)]);
                    }
                }
            }
        };
        scatter(nv, nv, &ec.kvv, 0, 0);
        scatter(nv, n, &ec.kvp, 0, nv);
        scatter(n, nv, &ec.kpv, nv, 0);
        scatter(n, n, &ec.kpp, nv, nv);
    }

    // concentrated wells: weak form of div v = s * delta at the node
    for src in &problem.point_sources {
        residual[DofMap::pdof(src.node)] += src.strength;
    }

    let mut norm2 = 0.0;
    for (free, &dof) in dofmap.free_dofs().iter().enumerate() {
        system.rhs[free] = -residual[dof];
        norm2 += residual[dof] * residual[dof];
    }
    Ok(norm2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases::BodyForce;
    use crate::mesh::Rect;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dmat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0))
    }

    #[test]
    fn kron_identities() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(kron(&i2, &i2), DMatrix::<f64>::identity(4, 4));

        let row = dmat(1, 2, &[1.0, 2.0]);
        let expect = dmat(2, 4, &[1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 2.0]);
        assert_eq!(kron(&row, &i2), expect);
    }

    #[test]
    fn vec_is_row_major() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(vec_rm(&i2).as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn vec_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 3, 2);
            let b = random_matrix(&mut rng, 3, 2);
            let lhs = vec_rm(&(&a + &b));
            let rhs = vec_rm(&a) + vec_rm(&b);
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    /// With row-major vec the product identity reads
    /// `vec(A C B) = (A kron B^T) vec(C)`.
    #[test]
    fn vec_of_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 2, 2);
            let c = random_matrix(&mut rng, 2, 2);
            let lhs = vec_rm(&(&a * &c * &b));
            let rhs = kron(&a, &b.transpose()) * vec_rm(&c);
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 2, 2);
            let c = random_matrix(&mut rng, 2, 2);
            let d = random_matrix(&mut rng, 2, 2);
            let lhs = kron(&a, &b) * kron(&c, &d);
            let rhs = kron(&(&a * &c), &(&b * &d));
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    fn unit_q4_ctx<'a>(
        drag: &DragModel,
        coords: &'a [[f64; 2]],
        vel: &'a [[f64; 2]],
        pres: &'a [f64],
        quad: &'a QuadratureRule,
        body: &'a dyn Fn(f64, f64) -> [f64; 2],
    ) -> ElementContext<'a> {
        ElementContext {
            elem: 0,
            kind: if coords.len() == 4 { ElemKind::Q4 } else { ElemKind::T3 },
            coords,
            drag: *drag,
            vel,
            pressure: pres,
            body,
            a_group: 1.0,
            c_rho: 1.0,
            dirichlet_facets: &[],
            quad,
            div_stabilization: false,
        }
    }

    #[test]
    fn zero_state_zero_residual() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let vel = [[0.0, 0.0]; 4];
        let pres = [0.0; 4];
        let quad = default_quadrature(ElemKind::Q4);
        let body = |_: f64, _: f64| [0.0, 0.0];
        let drag = DragModel::constant(1.0);
        let ec = element_contribution(&unit_q4_ctx(&drag, &coords, &vel, &pres, &quad, &body))
            .unwrap();
        assert!(ec.rv.norm() == 0.0);
        assert!(ec.rp.norm() == 0.0);
    }

    #[test]
    fn constant_drag_block_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let coords = [[0.0, 0.0], [1.1, 0.1], [0.9, 1.2], [-0.1, 0.8]];
        let vel: Vec<[f64; 2]> = (0..4)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let pres: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let quad = default_quadrature(ElemKind::Q4);
        let body = |_: f64, _: f64| [0.3, -0.2];
        let drag = DragModel::constant(1.7);
        let ec = element_contribution(&unit_q4_ctx(&drag, &coords, &vel, &pres, &quad, &body))
            .unwrap();
        let defect = (&ec.kpv - ec.kvp.transpose()).abs().max();
        assert!(defect < 1e-13, "K_pv vs K_vp^T defect {defect}");
        let sym = (&ec.kpp - ec.kpp.transpose()).abs().max();
        assert!(sym < 1e-13, "K_pp symmetry defect {sym}");
    }

    #[test]
    fn pressure_dependent_drag_breaks_symmetry() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let vel = [[0.4, -0.3], [0.1, 0.2], [-0.5, 0.6], [0.2, 0.1]];
        let pres = [0.9, -0.4, 0.7, 0.2]; // nonconstant pressure state
        let quad = default_quadrature(ElemKind::Q4);
        let body = |_: f64, _: f64| [0.0, 0.0];
        let drag = DragModel::exponential(1.0, 0.3);
        let ec = element_contribution(&unit_q4_ctx(&drag, &coords, &vel, &pres, &quad, &body))
            .unwrap();
        assert!((&ec.kpv - ec.kvp.transpose()).abs().max() > 1e-6);
        assert!((&ec.kpp - ec.kpp.transpose()).abs().max() > 1e-8);
    }

    /// Tangent block columns match central finite differences of the
    /// residual for every drag model and both element kinds.
    #[test]
    fn element_tangent_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let drags = [
            DragModel::constant(1.3),
            DragModel::linear(1.0, 0.4),
            DragModel::exponential(1.0, 0.7),
        ];
        let q4_coords = vec![[0.0, 0.0], [1.0, 0.1], [1.2, 1.1], [-0.1, 0.9]];
        let t3_coords = vec![[0.0, 0.0], [1.0, 0.2], [0.3, 1.1]];
        let body = |x: f64, y: f64| [0.2 * x - y, 0.1 + 0.3 * y];

        for drag in &drags {
            for coords in [&q4_coords, &t3_coords] {
                let n = coords.len();
                let kind = if n == 4 { ElemKind::Q4 } else { ElemKind::T3 };
                let quad = default_quadrature(kind);
                let vel: Vec<[f64; 2]> = (0..n)
                    .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
                    .collect();
                let pres: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();

                let eval = |vel: &[[f64; 2]], pres: &[f64]| {
                    let ctx = ElementContext {
                        elem: 0,
                        kind,
                        coords,
                        drag: *drag,
                        vel,
                        pressure: pres,
                        body: &body,
                        a_group: 1.0,
                        c_rho: 1.0,
                        dirichlet_facets: &[],
                        quad: &quad,
                        div_stabilization: false,
                    };
                    element_contribution(&ctx).unwrap()
                };

                let base = eval(&vel, &pres);
                let mut k = DMatrix::zeros(3 * n, 3 * n);
                k.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&base.kvv);
                k.view_mut((0, 2 * n), (2 * n, n)).copy_from(&base.kvp);
                k.view_mut((2 * n, 0), (n, 2 * n)).copy_from(&base.kpv);
                k.view_mut((2 * n, 2 * n), (n, n)).copy_from(&base.kpp);

                let mut fd = DMatrix::zeros(3 * n, 3 * n);
                for col in 0..3 * n {
                    let mut vp = vel.clone();
                    let mut vm = vel.clone();
                    let mut pp = pres.clone();
                    let mut pm = pres.clone();
                    let current = if col < 2 * n {
                        vel[col / 2][col % 2]
                    } else {
                        pres[col - 2 * n]
                    };
                    let h = 1e-7 * (1.0 + current.abs());
                    if col < 2 * n {
                        vp[col / 2][col % 2] += h;
                        vm[col / 2][col % 2] -= h;
                    } else {
                        pp[col - 2 * n] += h;
                        pm[col - 2 * n] -= h;
                    }
                    let plus = eval(&vp, &pp);
                    let minus = eval(&vm, &pm);
                    for row in 0..2 * n {
                        fd[(row, col)] = (plus.rv[row] - minus.rv[row]) / (2.0 * h);
                    }
                    for row in 0..n {
                        fd[(2 * n + row, col)] = (plus.rp[row] - minus.rp[row]) / (2.0 * h);
                    }
                }
                let scale = k.abs().max();
                let defect = (&k - &fd).abs().max() / scale;
                assert!(
                    defect < 5e-6,
                    "drag {:?} kind {:?}: tangent vs FD defect {defect:.3e}",
                    drag.variant,
                    kind
                );
            }
        }
    }

    /// For constant drag the residual is affine in the state: shifting all
    /// nodal pressures by a constant changes R_v through the pressure terms
    /// only, by superposition.
    #[test]
    fn constant_drag_pressure_shift_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let coords = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let quad = default_quadrature(ElemKind::Q4);
        let body = |_: f64, _: f64| [0.1, 0.4];
        let drag = DragModel::constant(2.0);
        let vel: Vec<[f64; 2]> = (0..4)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let pres: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shift = 0.37;
        let shifted: Vec<f64> = pres.iter().map(|p| p + shift).collect();

        let base = element_contribution(&unit_q4_ctx(&drag, &coords, &vel, &pres, &quad, &body))
            .unwrap();
        let shifted_ec =
            element_contribution(&unit_q4_ctx(&drag, &coords, &vel, &shifted, &quad, &body))
                .unwrap();

        // difference must equal K_vp * (shift * ones)
        let ones = DVector::from_element(4, shift);
        let predicted = &base.kvp * &ones;
        let actual = &shifted_ec.rv - &base.rv;
        assert!((predicted - actual).norm() < 1e-12);
    }

    fn free_dofmap(mesh: &Mesh) -> DofMap {
        let mut dm = DofMap::new(mesh.num_nodes());
        dm.finalize();
        dm
    }

    #[test]
    fn single_element_global_equals_element() {
        let mesh = Mesh::generate_structured(ElemKind::Q4, 1, 1, Rect::unit_square()).unwrap();
        let mut problem = ProblemSpec::new(DragModel::exponential(1.0, 0.5));
        problem.body_force = BodyForce::Constant([0.2, -0.1]);
        let dofmap = free_dofmap(&mesh);
        let mut system = GlobalSystem::with_pattern(&mesh, &dofmap);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state: Vec<f64> = (0..dofmap.num_total())
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        assemble(&mesh, &problem, &dofmap, &state, &mut system).unwrap();

        // element contribution computed directly
        let coords = mesh.elem_coords(0);
        let conn = &mesh.elements[0].connectivity;
        let vel: Vec<[f64; 2]> = conn
            .iter()
            .map(|&nd| [state[DofMap::vdof(nd, 0)], state[DofMap::vdof(nd, 1)]])
            .collect();
        let pres: Vec<f64> = conn.iter().map(|&nd| state[DofMap::pdof(nd)]).collect();
        let quad = default_quadrature(ElemKind::Q4);
        let body = |x: f64, y: f64| problem.body_force.eval(x, y);
        let ec = element_contribution(&ElementContext {
            elem: 0,
            kind: ElemKind::Q4,
            coords: &coords,
            drag: problem.drag,
            vel: &vel,
            pressure: &pres,
            body: &body,
            a_group: 1.0,
            c_rho: 1.0,
            dirichlet_facets: &[],
            quad: &quad,
            div_stabilization: false,
        })
        .unwrap();

        let dofs = global_dofs(conn);
        for (local, &dof) in dofs.iter().enumerate() {
            let free = dofmap.free_of(dof).unwrap();
            let expected = if local < 8 { ec.rv[local] } else { ec.rp[local - 8] };
            assert!((system.rhs[free] + expected).abs() < 1e-14);
        }
    }

    /// Dense brute-force assembly oracle on a two-element mesh: shared-dof
    /// entries are the sums of the element entries.
    #[test]
    fn dense_assembly_oracle() {
        let mesh = Mesh::generate_structured(ElemKind::T3, 1, 1, Rect::unit_square()).unwrap();
        assert_eq!(mesh.num_elements(), 2);
        let mut problem = ProblemSpec::new(DragModel::linear(1.0, 0.2));
        problem.body_force = BodyForce::Constant([0.1, 0.3]);
        let dofmap = free_dofmap(&mesh);
        let mut system = GlobalSystem::with_pattern(&mesh, &dofmap);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let state: Vec<f64> = (0..dofmap.num_total())
            .map(|_| rng.gen_range(-0.4..0.4))
            .collect();
        assemble(&mesh, &problem, &dofmap, &state, &mut system).unwrap();

        // brute-force dense assembly
        let nd = dofmap.num_total();
        let mut dense = DMatrix::<f64>::zeros(nd, nd);
        let quad = default_quadrature(ElemKind::T3);
        let body = |x: f64, y: f64| problem.body_force.eval(x, y);
        for e in &mesh.elements {
            let coords = mesh.elem_coords(e.id);
            let vel: Vec<[f64; 2]> = e
                .connectivity
                .iter()
                .map(|&nd| [state[DofMap::vdof(nd, 0)], state[DofMap::vdof(nd, 1)]])
                .collect();
            let pres: Vec<f64> = e
                .connectivity
                .iter()
                .map(|&nd| state[DofMap::pdof(nd)])
                .collect();
            let ec = element_contribution(&ElementContext {
                elem: e.id,
                kind: e.kind,
                coords: &coords,
                drag: problem.drag,
                vel: &vel,
                pressure: &pres,
                body: &body,
                a_group: 1.0,
                c_rho: 1.0,
                dirichlet_facets: &[],
                quad: &quad,
                div_stabilization: false,
            })
            .unwrap();
            let dofs = global_dofs(&e.connectivity);
            let n = e.connectivity.len();
            for lr in 0..3 * n {
                for lc in 0..3 * n {
                    let val = match (lr < 2 * n, lc < 2 * n) {
                        (true, true) => ec.kvv[(lr, lc)],
                        (true, false) => ec.kvp[(lr, lc - 2 * n)],
                        (false, true) => ec.kpv[(lr - 2 * n, lc)],
                        (false, false) => ec.kpp[(lr - 2 * n, lc - 2 * n)],
                    };
                    dense[(dofs[lr], dofs[lc])] += val;
                }
            }
        }

        let sparse_dense = system.to_dense();
        for r in 0..nd {
            for c in 0..nd {
                assert!(
                    (sparse_dense[(r, c)] - dense[(r, c)]).abs() < 1e-13,
                    "entry ({r}, {c})"
                );
            }
        }
    }

    #[test]
    fn constrained_dofs_are_eliminated() {
        let mesh = Mesh::generate_structured(ElemKind::Q4, 2, 2, Rect::unit_square()).unwrap();
        let mut dofmap = DofMap::new(mesh.num_nodes());
        dofmap.constrain(DofMap::vdof(0, 0), 0.25).unwrap();
        dofmap.constrain(DofMap::pdof(3), -1.0).unwrap();
        dofmap.finalize();
        assert_eq!(dofmap.num_free(), dofmap.num_total() - 2);

        let problem = ProblemSpec::new(DragModel::constant(1.0));
        let mut system = GlobalSystem::with_pattern(&mesh, &dofmap);
        let mut state = vec![0.0; dofmap.num_total()];
        dofmap.apply_to_state(&mut state);
        assert_eq!(state[DofMap::vdof(0, 0)], 0.25);
        let norm = assemble(&mesh, &problem, &dofmap, &state, &mut system).unwrap();
        assert!(norm.is_finite());
    }

    #[test]
    fn conflicting_constraints_rejected() {
        let mut dofmap = DofMap::new(4);
        dofmap.constrain(2, 1.0).unwrap();
        dofmap.constrain(2, 1.0).unwrap(); // identical is fine
        assert!(matches!(
            dofmap.constrain(2, 2.0),
            Err(Error::ConstraintConflict { .. })
        ));
    }
}
