//! Newton-Raphson driver with a direct sparse linear solver.
//!
//! Each iteration assembles the consistent tangent and residual, solves
//! `K * delta = -R` and applies the full update (optional halving line
//! search behind a flag; the plain method is the default and tolerates
//! transient residual growth). Convergence: `|R| <= rtol * |R0| + atol`.
//!
//! The linear sub-solver reorders the free dofs with reverse Cuthill-McKee,
//! factorizes the band with partially pivoted LU and polishes the solution
//! with one round of iterative refinement; the relative residual of every
//! solve is checked against 1e-10.
//!
//! Essential conditions: prescribed normal velocities on axis-aligned
//! facets fix the corresponding velocity component per facet node (a corner
//! shared by two such facets gets both components fixed). Pure-Neumann
//! problems get one pressure dof pinned (lowest node id unless the problem
//! specifies a pin) and must satisfy the flux compatibility condition.

use crate::assembly::{assemble, DofMap, GlobalSystem};
use crate::cases::{FacetBc, ProblemSpec};
use crate::drag::DragVariant;
use crate::error::{Error, Result};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    Zero,
    /// Solve the constant-drag problem with the same alpha0 first and start
    /// from its solution.
    DarcyLinear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
    pub line_search: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            rtol: 1e-12,
            atol: 1e-14,
            max_iter: 50,
            initial_guess: InitialGuess::Zero,
            line_search: false,
        }
    }
}

/// Residual 2-norms per iteration, including the initial residual.
#[derive(Debug, Clone, Default)]
pub struct ConvergenceHistory {
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SolutionField {
    pub velocity: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
    pub history: ConvergenceHistory,
}

impl SolutionField {
    pub fn from_state(state: &[f64], history: ConvergenceHistory) -> Self {
        let nn = state.len() / 3;
        let mut velocity = Vec::with_capacity(nn);
        let mut pressure = Vec::with_capacity(nn);
        for node in 0..nn {
            velocity.push([state[3 * node], state[3 * node + 1]]);
            pressure.push(state[3 * node + 2]);
        }
        SolutionField {
            velocity,
            pressure,
            history,
        }
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut state = Vec::with_capacity(3 * self.pressure.len());
        for node in 0..self.pressure.len() {
            state.push(self.velocity[node][0]);
            state.push(self.velocity[node][1]);
            state.push(self.pressure[node]);
        }
        state
    }

    /// Constant fields; useful for tests and post-processing checks.
    pub fn uniform(mesh: &Mesh, v: [f64; 2], p: f64) -> Self {
        SolutionField {
            velocity: vec![v; mesh.num_nodes()],
            pressure: vec![p; mesh.num_nodes()],
            history: ConvergenceHistory::default(),
        }
    }
}

/// Translate the problem's essential boundary data into dof constraints.
/// Returns the constraint records that were applied.
pub fn apply_essential_bcs(
    dofmap: &mut DofMap,
    mesh: &Mesh,
    problem: &ProblemSpec,
) -> Result<Vec<(usize, f64)>> {
    let mut records = Vec::new();
    for facet in &mesh.facets {
        let Some(FacetBc::NormalVelocity(vn)) = problem.facet_bcs.get(&facet.tag) else {
            continue;
        };
        let [nx, ny] = facet.normal;
        let comp = if nx.abs() > 1.0 - 1e-9 {
            0
        } else if ny.abs() > 1.0 - 1e-9 {
            1
        } else {
            return Err(Error::UnsupportedConstraint { nx, ny });
        };
        // v . n = vn with n = +-e_comp  =>  v_comp = vn * n_comp
        let value = vn * facet.normal[comp];
        for &node in &facet.nodes {
            let dof = DofMap::vdof(node, comp);
            dofmap.constrain(dof, value)?;
            records.push((dof, value));
        }
    }

    let has_pressure_datum = problem
        .facet_bcs
        .values()
        .any(|bc| matches!(bc, FacetBc::Pressure(_)));
    match problem.pressure_pin {
        Some((node, value)) => {
            let dof = DofMap::pdof(node);
            dofmap.constrain(dof, value)?;
            records.push((dof, value));
        }
        None if !has_pressure_datum => {
            // gauge for the pure-Neumann case: pin the lowest node id
            let dof = DofMap::pdof(0);
            dofmap.constrain(dof, 0.0)?;
            records.push((dof, 0.0));
        }
        None => {}
    }
    Ok(records)
}

/// Dofmap with all essential constraints applied and finalized.
pub fn build_dofmap(mesh: &Mesh, problem: &ProblemSpec) -> Result<DofMap> {
    let mut dofmap = DofMap::new(mesh.num_nodes());
    apply_essential_bcs(&mut dofmap, mesh, problem)?;
    dofmap.finalize();
    Ok(dofmap)
}

#[derive(Debug, Clone)]
pub struct WellPosedness {
    pub pure_neumann: bool,
    /// `sum(point sources) - integral of prescribed v_n` (must vanish for
    /// pure-Neumann problems by the divergence theorem).
    pub net_imbalance: f64,
    /// Pressure pin that will be applied, if any.
    pub pinned: Option<(usize, f64)>,
}

/// Compatibility diagnostics for the boundary data.
pub fn check_wellposedness(problem: &ProblemSpec, mesh: &Mesh) -> Result<WellPosedness> {
    let mut pure_neumann = true;
    let mut flux_out = 0.0;
    for facet in &mesh.facets {
        match problem.facet_bcs.get(&facet.tag) {
            Some(FacetBc::Pressure(_)) => pure_neumann = false,
            Some(FacetBc::NormalVelocity(vn)) => flux_out += vn * mesh.facet_length(facet),
            None => {
                return Err(Error::InvalidArgument(format!(
                    "no boundary condition for facet tag \"{}\"",
                    facet.tag
                )))
            }
        }
    }
    let sources: f64 = problem.point_sources.iter().map(|s| s.strength).sum();
    let net = sources - flux_out;
    let pinned = if pure_neumann {
        problem.pressure_pin.or(Some((0, 0.0)))
    } else {
        problem.pressure_pin
    };
    if pure_neumann && net.abs() > 1e-10 {
        return Err(Error::Incompatible { net });
    }
    Ok(WellPosedness {
        pure_neumann,
        net_imbalance: net,
        pinned,
    })
}

/// Direct solve of the assembled system: RCM reordering, banded LU with
/// partial pivoting, one round of iterative refinement. The relative
/// residual of the solve is verified to be below 1e-10.
pub fn linear_solve(system: &GlobalSystem) -> Result<Vec<f64>> {
    solve_with_rhs(system, &system.rhs)
}

fn solve_with_rhs(system: &GlobalSystem, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = system.n;
    if n == 0 {
        return Ok(Vec::new());
    }
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let perm = rcm_permutation(n, &system.row_ptr, &system.col_idx);
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }

    let mut lu = BandedLu::from_csr(system, &perm, &inv)?;
    lu.factorize()?;

    let permuted_rhs: Vec<f64> = perm.iter().map(|&old| rhs[old]).collect();
    let mut xp = permuted_rhs.clone();
    lu.solve(&mut xp);
    let mut x = vec![0.0; n];
    for (new, &old) in perm.iter().enumerate() {
        x[old] = xp[new];
    }

    // one round of refinement, then verify the relative residual
    for _ in 0..2 {
        let ax = system.matvec(&x);
        let mut r = vec![0.0; n];
        let mut rnorm = 0.0;
        for i in 0..n {
            r[i] = rhs[i] - ax[i];
            rnorm += r[i] * r[i];
        }
        let rnorm = rnorm.sqrt();
        if rnorm <= 1e-12 * bnorm {
            break;
        }
        let mut dp: Vec<f64> = perm.iter().map(|&old| r[old]).collect();
        lu.solve(&mut dp);
        for (new, &old) in perm.iter().enumerate() {
            x[old] += dp[new];
        }
    }
    let ax = system.matvec(&x);
    let rnorm = rhs
        .iter()
        .zip(&ax)
        .map(|(b, a)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    if rnorm > 1e-10 * bnorm {
        return Err(Error::Internal(format!(
            "linear solve residual {rnorm:.3e} exceeds 1e-10 relative ({bnorm:.3e})"
        )));
    }
    Ok(x)
}

/// Solve the nonlinear problem. Fails with the recorded history when the
/// iteration limit is hit.
pub fn newton_solve(
    problem: &ProblemSpec,
    mesh: &Mesh,
    config: &NewtonConfig,
) -> Result<SolutionField> {
    problem.check_bcs(mesh)?;
    check_wellposedness(problem, mesh)?;
    let dofmap = build_dofmap(mesh, problem)?;

    let mut state = vec![0.0; dofmap.num_total()];
    dofmap.apply_to_state(&mut state);

    if config.initial_guess == InitialGuess::DarcyLinear
        && problem.drag.variant != DragVariant::Constant
    {
        let mut linear_problem = problem.clone();
        linear_problem.drag = crate::drag::DragModel::constant(problem.drag.alpha0);
        let warm_config = NewtonConfig {
            initial_guess: InitialGuess::Zero,
            ..config.clone()
        };
        let warm = newton_solve(&linear_problem, mesh, &warm_config)?;
        state = warm.to_state();
        dofmap.apply_to_state(&mut state);
    }

    let mut system = GlobalSystem::with_pattern(mesh, &dofmap);
    let mut rnorm = assemble(mesh, problem, &dofmap, &state, &mut system)?;
    let r0 = rnorm;
    let mut residuals = vec![rnorm];
    let tol = |r0: f64| config.rtol * r0 + config.atol;

    let mut iterations = 0;
    while rnorm > tol(r0) {
        if iterations >= config.max_iter {
            return Err(Error::MaxIterations {
                iterations,
                last: rnorm,
                history: residuals,
            });
        }
        let delta = linear_solve(&system)?;

        let mut step = 1.0;
        let mut attempt = 0;
        loop {
            let mut candidate = state.clone();
            for (free, &dof) in dofmap.free_dofs().iter().enumerate() {
                candidate[dof] += step * delta[free];
            }
            match assemble(mesh, problem, &dofmap, &candidate, &mut system) {
                Ok(rnew) => {
                    if config.line_search && rnew > rnorm && attempt < 8 {
                        step *= 0.5;
                        attempt += 1;
                        continue;
                    }
                    state = candidate;
                    rnorm = rnew;
                    break;
                }
                // a drag overflow inside a trial step is recoverable by
                // backtracking when line search is enabled
                Err(e) => {
                    if config.line_search && attempt < 8 {
                        step *= 0.5;
                        attempt += 1;
                        continue;
                    }
                    return Err(e);
                }
            }
        }
        iterations += 1;
        residuals.push(rnorm);
    }

    let history = ConvergenceHistory {
        residuals,
        converged: true,
        iterations,
    };
    Ok(SolutionField::from_state(&state, history))
}

/// Least-squares slope of `ln r_{k+1}` against `ln r_k` over the terminal
/// iterations, after dropping roundoff-saturated trailing values. Returns
/// None when fewer than three usable residuals remain. A value of about 2
/// indicates terminal quadratic convergence.
pub fn quadratic_tail_slope(residuals: &[f64]) -> Option<f64> {
    if residuals.is_empty() {
        return None;
    }
    let floor = residuals[0] * 1e3 * f64::EPSILON;
    let mut tail: Vec<f64> = residuals
        .iter()
        .copied()
        .filter(|r| *r > 0.0)
        .collect();
    while let Some(&last) = tail.last() {
        if last < floor && tail.len() > 3 {
            tail.pop();
        } else {
            break;
        }
    }
    if tail.len() < 3 {
        return None;
    }
    let window = &tail[tail.len().saturating_sub(4)..];
    let pairs: Vec<(f64, f64)> = window
        .windows(2)
        .map(|w| (w[0].ln(), w[1].ln()))
        .collect();
    let m = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Reverse Cuthill-McKee ordering of the (structurally symmetric) pattern.
/// Returns `perm[new] = old`.
fn rcm_permutation(n: usize, row_ptr: &[usize], col_idx: &[usize]) -> Vec<usize> {
    let degree = |v: usize| row_ptr[v + 1] - row_ptr[v];
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];

    let component_start = |visited: &[bool]| -> Option<usize> {
        (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| degree(v))
    };

    while let Some(mut start) = component_start(&visited) {
        // one BFS sweep toward a pseudo-peripheral start
        for _ in 0..2 {
            let mut seen = vec![false; n];
            let mut queue = std::collections::VecDeque::from([start]);
            seen[start] = true;
            let mut last = start;
            while let Some(v) = queue.pop_front() {
                last = v;
                let mut nbrs: Vec<usize> = col_idx[row_ptr[v]..row_ptr[v + 1]]
                    .iter()
                    .copied()
                    .filter(|&u| !seen[u] && !visited[u])
                    .collect();
                nbrs.sort_by_key(|&u| degree(u));
                for u in nbrs {
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
            start = last;
        }

        let mut queue = std::collections::VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = col_idx[row_ptr[v]..row_ptr[v + 1]]
                .iter()
                .copied()
                .filter(|&u| !visited[u])
                .collect();
            nbrs.sort_by_key(|&u| degree(u));
            for u in nbrs {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU with partial pivoting (LAPACK band layout: `kl` extra
/// superdiagonals hold pivoting fill).
struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    /// column-major: entry (i, j) lives at `ab[j * ldab + kl + ku + i - j]`.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    max_abs: f64,
}

impl BandedLu {
    fn from_csr(system: &GlobalSystem, perm: &[usize], inv: &[usize]) -> Result<Self> {
        let n = system.n;
        let mut kl = 0usize;
        let mut ku = 0usize;
        let mut max_abs = 0.0f64;
        for row in 0..n {
            for k in system.row_ptr[row]..system.row_ptr[row + 1] {
                let col = system.col_idx[k];
                let (pi, pj) = (inv[row], inv[col]);
                if pi > pj {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
                max_abs = max_abs.max(system.values[k].abs());
            }
        }
        if max_abs == 0.0 {
            return Err(Error::Singular {
                hint: Some("matrix is identically zero".into()),
            });
        }
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for row in 0..n {
            for k in system.row_ptr[row]..system.row_ptr[row + 1] {
                let col = system.col_idx[k];
                let (i, j) = (inv[row], inv[col]);
                ab[j * ldab + kl + ku + i - j] = system.values[k];
            }
        }
        let _ = perm;
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv: vec![0; n],
            max_abs,
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * self.ldab + self.kl + self.ku + i - j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.ab[j * self.ldab + self.kl + self.ku + i - j]
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        let tol = self.max_abs * 1e-12 * (n as f64).sqrt().max(1.0);
        for j in 0..n {
            let i_end = (j + self.kl).min(n - 1);
            let mut ip = j;
            let mut pmax = self.at(j, j).abs();
            for i in (j + 1)..=i_end {
                let v = self.at(i, j).abs();
                if v > pmax {
                    pmax = v;
                    ip = i;
                }
            }
            if !(pmax > tol) {
                return Err(Error::Singular {
                    hint: Some(
                        "pivot vanished; a pure-Neumann problem needs a pressure pin".into(),
                    ),
                });
            }
            self.ipiv[j] = ip;
            let c_end = (j + self.kl + self.ku).min(n - 1);
            if ip != j {
                for c in j..=c_end {
                    let a = self.at(j, c);
                    let b = self.at(ip, c);
                    *self.at_mut(j, c) = b;
                    *self.at_mut(ip, c) = a;
                }
            }
            let piv = self.at(j, j);
            for i in (j + 1)..=i_end {
                let m = self.at(i, j) / piv;
                *self.at_mut(i, j) = m;
            }
            for c in (j + 1)..=c_end {
                let ujc = self.at(j, c);
                if ujc == 0.0 {
                    continue;
                }
                for i in (j + 1)..=i_end {
                    let m = self.at(i, j);
                    *self.at_mut(i, c) -= m * ujc;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let ip = self.ipiv[j];
            if ip != j {
                b.swap(ip, j);
            }
            let i_end = (j + self.kl).min(n - 1);
            let bj = b[j];
            for i in (j + 1)..=i_end {
                b[i] -= self.at(i, j) * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            let i_start = j.saturating_sub(self.kl + self.ku);
            for i in i_start..j {
                b[i] -= self.at(i, j) * bj;
            }
        }
    }
}
