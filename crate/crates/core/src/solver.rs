//! Finite-difference discretization and damped Newton / continuation solver
//! for the Dirichlet problem
//!
//! ```text
//! f(λ(D²u + A(x, u, Du))) = ψ(x, u, Du)  in the box,   u = φ  on its boundary.
//! ```
//!
//! Every accepted iterate keeps `λ(U)` inside the operator cone at every
//! interior node; the boundary values are imposed exactly and never touched.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::OperatorSpec;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::plugins::{ATensorSpec, PsiSpec};
use crate::spectral::{spectral_eval_grad, SymMatrix};

/// Tolerance for the subsolution inequality `F(Ū) - ψ ≥ -tol`.
pub const SUBSOLUTION_TOL: f64 = 1e-9;

/// A Dirichlet problem on a box.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub operator: OperatorSpec,
    pub tensor: ATensorSpec,
    pub psi: PsiSpec,
    /// Boundary data `φ`; only boundary nodes are read.
    pub boundary: ScalarField,
    /// Admissible function `ū` with `ū = φ` on the boundary.
    pub subsolution: ScalarField,
}

impl ProblemSpec {
    /// Validates shapes, boundary agreement and admissibility of `ū`.
    pub fn new(
        operator: OperatorSpec,
        tensor: ATensorSpec,
        psi: PsiSpec,
        boundary: ScalarField,
        subsolution: ScalarField,
    ) -> Result<Self> {
        let grid = boundary.grid().clone();
        if subsolution.grid() != &grid {
            return Err(Error::InvalidInput(
                "subsolution and boundary data live on different grids".into(),
            ));
        }
        if operator.n != grid.dim() {
            return Err(Error::InvalidInput(format!(
                "operator dimension {} does not match grid dimension {}",
                operator.n,
                grid.dim()
            )));
        }
        tensor.validate()?;
        psi.validate()?;
        if let PsiSpec::Table(f) | PsiSpec::Separable { base: crate::plugins::PsiBase::Table(f), .. } =
            &psi
        {
            if f.grid() != &grid {
                return Err(Error::InvalidInput("psi table grid differs from problem grid".into()));
            }
        }
        for node in grid.boundary_nodes() {
            let (a, b) = (subsolution.get(node), boundary.get(node));
            if (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
                return Err(Error::InvalidInput(format!(
                    "subsolution differs from boundary data at boundary node {node}: {a} vs {b}"
                )));
            }
        }
        let prob = ProblemSpec {
            grid,
            operator,
            tensor,
            psi,
            boundary,
            subsolution,
        };
        prob.discretization(None).admissibility_margin(&prob.subsolution)?;
        Ok(prob)
    }

    /// Minimum interior residual of `ū`; errors if the subsolution
    /// inequality fails by more than [`SUBSOLUTION_TOL`].
    pub fn assert_subsolution(&self) -> Result<f64> {
        let r = residual(self, &self.subsolution)?;
        let worst = self
            .grid
            .interior_nodes()
            .into_iter()
            .map(|n| (n, r.get(n)))
            .fold((usize::MAX, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        if worst.1 < -SUBSOLUTION_TOL {
            return Err(Error::Usage(format!(
                "subsolution inequality fails at node {}: F(Ū) - ψ = {:e}",
                worst.0, worst.1
            )));
        }
        Ok(worst.1)
    }

    /// True when `ψ_z ≤ 0` and `A_z ≥ 0`, the comparison regime.
    pub fn comparison_regime(&self) -> bool {
        self.psi.z_nonincreasing() && self.tensor.z_monotone()
    }

    pub(crate) fn discretization<'a>(&'a self, blend: Option<(f64, &'a [f64])>) -> Discretization<'a> {
        Discretization { prob: self, blend }
    }

    /// `F(∇²ū + A[ū])` at interior nodes (0 on the boundary).
    pub fn subsolution_level(&self) -> Result<Vec<f64>> {
        let disc = self.discretization(None);
        let nodes = self.grid.interior_nodes();
        let vals: Vec<(usize, f64)> = nodes
            .par_iter()
            .map(|&n| disc.operator_value(&self.subsolution, n).map(|v| (n, v)))
            .collect::<Result<_>>()?;
        let mut out = vec![0.0; self.grid.len()];
        for (n, v) in vals {
            out[n] = v;
        }
        Ok(out)
    }
}

/// Linearization of the discrete operator at one interior node.
#[derive(Debug, Clone)]
pub(crate) struct NodeEval {
    pub residual: f64,
    pub margin: f64,
    pub eigenvalues: Vec<f64>,
    /// `F^{ij}`.
    pub fgrad: SymMatrix,
    /// `F^{ij} A^{ij}_{p_k} - ψ_{p_k}`.
    pub first: Vec<f64>,
    /// `F^{ij} A^{ij}_z - ψ_z`.
    pub zeroth: f64,
}

/// The discrete operator for one right-hand side, possibly blended with a
/// fixed field: `ψ_t = t ψ + (1 - t) ψ_0`.
type FullResidual = (Vec<f64>, f64, f64, Vec<(usize, NodeEval)>);

#[derive(Clone, Copy)]
pub(crate) struct Discretization<'a> {
    prob: &'a ProblemSpec,
    blend: Option<(f64, &'a [f64])>,
}

impl<'a> Discretization<'a> {
    fn rhs(&self, node: usize, z: f64, p: &[f64]) -> (f64, f64, Vec<f64>) {
        let psi = &self.prob.psi;
        let e = psi.eval(node, z, p);
        let dp = psi.dp(node, z, p);
        match self.blend {
            None => (e.value, e.dz, dp),
            Some((t, base)) => (
                t * e.value + (1.0 - t) * base[node],
                t * e.dz,
                dp.into_iter().map(|v| t * v).collect(),
            ),
        }
    }

    fn matrix_u(&self, u: &ScalarField, node: usize) -> (SymMatrix, Vec<f64>, crate::plugins::TensorEval) {
        let g = &self.prob.grid;
        let x = g.coords(node);
        let p = u.gradient_at(node);
        let hess = u.hessian_at(node).expect("interior node");
        let a = self.prob.tensor.eval(&x, u.get(node), &p);
        (hess.plus(&a.value), p, a)
    }

    fn operator_value(&self, u: &ScalarField, node: usize) -> Result<f64> {
        Ok(self.eval_node(u, node)?.residual + self.rhs_value(u, node))
    }

    fn rhs_value(&self, u: &ScalarField, node: usize) -> f64 {
        let p = u.gradient_at(node);
        self.rhs(node, u.get(node), &p).0
    }

    pub(crate) fn eval_node(&self, u: &ScalarField, node: usize) -> Result<NodeEval> {
        let (mat, p, a) = self.matrix_u(u, node);
        let se = spectral_eval_grad(&self.prob.operator, &mat).map_err(|e| match e {
            Error::Admissibility {
                eigenvalues, margin, ..
            } => Error::Admissibility {
                node,
                eigenvalues,
                margin,
            },
            other => other,
        })?;
        let (psi, psi_z, psi_p) = self.rhs(node, u.get(node), &p);
        let first = (0..p.len())
            .map(|k| se.grad.inner(&a.dp[k]) - psi_p[k])
            .collect();
        let zeroth = se.grad.inner(&a.dz) - psi_z;
        Ok(NodeEval {
            residual: se.value - psi,
            margin: se.cone_margin,
            eigenvalues: se.decomp.eigenvalues.into_vec(),
            fgrad: se.grad,
            first,
            zeroth,
        })
    }

    fn eval_interior(&self, u: &ScalarField) -> Result<Vec<(usize, NodeEval)>> {
        self.prob
            .grid
            .interior_nodes()
            .par_iter()
            .map(|&n| self.eval_node(u, n).map(|e| (n, e)))
            .collect()
    }

    pub(crate) fn admissibility_margin(&self, u: &ScalarField) -> Result<f64> {
        Ok(self
            .eval_interior(u)?
            .iter()
            .fold(f64::INFINITY, |m, (_, e)| m.min(e.margin)))
    }

    /// Residual over all nodes, its interior ∞-norm and min cone margin.
    fn residual_full(&self, u: &ScalarField) -> Result<FullResidual> {
        let evals = self.eval_interior(u)?;
        let g = &self.prob.grid;
        let mut r = vec![0.0; g.len()];
        for n in g.boundary_nodes() {
            r[n] = u.get(n) - self.prob.boundary.get(n);
        }
        let mut norm = 0.0f64;
        let mut margin = f64::INFINITY;
        for (n, e) in &evals {
            r[*n] = e.residual;
            norm = norm.max(e.residual.abs());
            margin = margin.min(e.margin);
        }
        Ok((r, norm, margin, evals))
    }

    /// Stencil row of the linearized operator at an interior node.
    pub(crate) fn row(&self, node: usize, e: &NodeEval, with_zeroth: bool) -> Vec<(usize, f64)> {
        let g = &self.prob.grid;
        let d = g.dim();
        let mut row = Vec::with_capacity(1 + 2 * d * d + 2 * d);
        for a in 0..d {
            for b in a..d {
                let c = if a == b { e.fgrad.get(a, a) } else { 2.0 * e.fgrad.get(a, b) };
                for (m, w) in g.second_difference_stencil(node, a, b) {
                    row.push((m, c * w));
                }
            }
            for (m, w) in g.first_difference_stencil(node, a) {
                row.push((m, e.first[a] * w));
            }
        }
        if with_zeroth {
            row.push((node, e.zeroth));
        }
        row.sort_by_key(|&(m, _)| m);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (m, w) in row {
            match merged.last_mut() {
                Some(last) if last.0 == m => last.1 += w,
                _ => merged.push((m, w)),
            }
        }
        merged
    }
}

/// `F(∇²u + A[u]) - ψ(x, u, ∇u)` at interior nodes, `u - φ` on the boundary.
pub fn residual(prob: &ProblemSpec, u: &ScalarField) -> Result<ScalarField> {
    let (r, ..) = prob.discretization(None).residual_full(u)?;
    ScalarField::new(prob.grid.clone(), r)
}

/// Gateaux derivative of [`residual`] at `u` in direction `v`.
pub fn linearized_apply(prob: &ProblemSpec, u: &ScalarField, v: &ScalarField) -> Result<ScalarField> {
    let disc = prob.discretization(None);
    let evals = disc.eval_interior(u)?;
    let mut out = v.values().to_vec();
    for (n, e) in &evals {
        out[*n] = disc
            .row(*n, e, true)
            .iter()
            .map(|&(m, w)| w * v.get(m))
            .sum();
    }
    ScalarField::new(prob.grid.clone(), out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Interior residual ∞-norm target.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease factor of the backtracking line search.
    pub armijo: f64,
    /// Smallest step factor before giving up.
    pub min_damping: f64,
    /// Accepted iterates keep cone margin ≥ this fraction of the current one.
    pub margin_fraction: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 50,
            armijo: 1e-4,
            min_damping: 1e-8,
            margin_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iterate: usize,
    pub residual_norm: f64,
    pub damping: f64,
    pub admissibility_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRecord {
    pub t: f64,
    pub newton_iterations: usize,
    pub residual_norm: f64,
    pub admissibility_margin: f64,
    /// `min (u - ū)` over all nodes.
    pub min_excess: f64,
}

/// Newton / continuation iterate.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: ScalarField,
    pub t: f64,
    pub iterate: usize,
    pub residual_norm: f64,
    pub damping: f64,
    pub admissibility_margin: f64,
    pub converged: bool,
    pub tol: f64,
    pub history: Vec<IterationRecord>,
    pub continuation: Vec<ContinuationRecord>,
}

/// Everything in a [`SolverState`] except the field itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub t: f64,
    pub iterate: usize,
    pub residual_norm: f64,
    pub damping: f64,
    pub admissibility_margin: f64,
    pub converged: bool,
    pub tol: f64,
    pub history: Vec<IterationRecord>,
    pub continuation: Vec<ContinuationRecord>,
}

impl SolverState {
    /// State of a stored field, converged when its residual is within `tol`.
    pub fn from_field(prob: &ProblemSpec, u: ScalarField, tol: f64) -> Result<Self> {
        if u.grid() != &prob.grid {
            return Err(Error::InvalidInput("field grid differs from problem grid".into()));
        }
        let disc = prob.discretization(None);
        let (r, interior_norm, margin, _) = disc.residual_full(&u)?;
        let boundary_norm = prob.grid.boundary_nodes().into_iter().fold(0.0f64, |m, n| m.max(r[n].abs()));
        let residual_norm = interior_norm.max(boundary_norm);
        Ok(SolverState {
            u,
            t: 1.0,
            iterate: 0,
            residual_norm,
            damping: 1.0,
            admissibility_margin: margin,
            converged: residual_norm <= tol,
            tol,
            history: Vec::new(),
            continuation: Vec::new(),
        })
    }

    pub fn summary(&self) -> SolverSummary {
        SolverSummary {
            t: self.t,
            iterate: self.iterate,
            residual_norm: self.residual_norm,
            damping: self.damping,
            admissibility_margin: self.admissibility_margin,
            converged: self.converged,
            tol: self.tol,
            history: self.history.clone(),
            continuation: self.continuation.clone(),
        }
    }
}

fn solve_correction(
    disc: &Discretization<'_>,
    evals: &[(usize, NodeEval)],
    r: &[f64],
) -> Result<Vec<f64>> {
    let g = &disc.prob.grid;
    let mut unknown = vec![usize::MAX; g.len()];
    for (k, (n, _)) in evals.iter().enumerate() {
        unknown[*n] = k;
    }
    let rows: Vec<Vec<(usize, f64)>> = evals
        .par_iter()
        .map(|(n, e)| disc.row(*n, e, true))
        .collect();
    let mut triplets = Vec::with_capacity(rows.iter().map(Vec::len).sum());
    for (k, row) in rows.iter().enumerate() {
        for &(m, w) in row {
            let col = unknown[m];
            if col != usize::MAX {
                triplets.push(Triplet::new(k, col, w));
            }
        }
    }
    let size = evals.len();
    let numerical = |message: String| Error::Numerical {
        message,
        residual: f64::NAN,
    };
    let jac = SparseColMat::<usize, f64>::try_new_from_triplets(size, size, &triplets)
        .map_err(|e| numerical(format!("Jacobian assembly failed: {e:?}")))?;
    let lu = jac
        .sp_lu()
        .map_err(|e| numerical(format!("sparse LU failed: {e:?}")))?;
    let rhs = Mat::<f64>::from_fn(size, 1, |k, _| -r[evals[k].0]);
    let sol = lu.solve(&rhs);
    let mut delta = vec![0.0; g.len()];
    for (k, (n, _)) in evals.iter().enumerate() {
        let v = sol[(k, 0)];
        if !v.is_finite() {
            return Err(numerical("linear solve produced non-finite correction".into()));
        }
        delta[*n] = v;
    }
    Ok(delta)
}

fn newton_with(
    disc: Discretization<'_>,
    init: &ScalarField,
    t: f64,
    opts: &NewtonOptions,
) -> Result<SolverState> {
    let prob = disc.prob;
    if init.grid() != &prob.grid {
        return Err(Error::InvalidInput("initial field lives on a different grid".into()));
    }
    let mut u = init.clone();
    for n in prob.grid.boundary_nodes() {
        if u.get(n) != prob.boundary.get(n) {
            return Err(Error::InvalidInput(format!(
                "initial field differs from boundary data at node {n}"
            )));
        }
    }
    let (mut r, mut norm, mut margin, mut evals) = disc.residual_full(&u)?;
    let mut history = vec![IterationRecord {
        iterate: 0,
        residual_norm: norm,
        damping: 1.0,
        admissibility_margin: margin,
    }];
    let mut iterate = 0;
    let mut damping = 1.0;
    while norm > opts.tol {
        if iterate == opts.max_iter {
            return Err(Error::NonConvergence {
                iterations: iterate,
                residual: norm,
                damping,
            });
        }
        let delta = solve_correction(&disc, &evals, &r)?;
        let mut alpha = 1.0;
        loop {
            if alpha < opts.min_damping {
                return Err(Error::NonConvergence {
                    iterations: iterate,
                    residual: norm,
                    damping: alpha,
                });
            }
            let mut trial = u.clone();
            for (v, d) in trial.values_mut().iter_mut().zip(&delta) {
                *v += alpha * d;
            }
            if let Ok((tr, tnorm, tmargin, tevals)) = disc.residual_full(&trial) {
                if tmargin > 0.0
                    && tmargin >= opts.margin_fraction * margin
                    && tnorm <= (1.0 - opts.armijo * alpha) * norm
                {
                    u = trial;
                    r = tr;
                    norm = tnorm;
                    margin = tmargin;
                    evals = tevals;
                    break;
                }
            }
            alpha *= 0.5;
        }
        iterate += 1;
        damping = alpha;
        history.push(IterationRecord {
            iterate,
            residual_norm: norm,
            damping,
            admissibility_margin: margin,
        });
        log::debug!("newton iterate {iterate}: residual {norm:e}, step {alpha}, margin {margin:e}");
    }
    Ok(SolverState {
        u,
        t,
        iterate,
        residual_norm: norm,
        damping,
        admissibility_margin: margin,
        converged: true,
        tol: opts.tol,
        history,
        continuation: Vec::new(),
    })
}

/// Damped Newton from an admissible initial field with the right boundary
/// values.
pub fn newton_solve(prob: &ProblemSpec, init: &ScalarField, opts: &NewtonOptions) -> Result<SolverState> {
    newton_with(prob.discretization(None), init, 1.0, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationOptions {
    pub newton: NewtonOptions,
    pub initial_step: f64,
    pub min_step: f64,
    /// Steps converging in at most this many Newton iterations double `Δt`.
    pub fast_iterations: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            newton: NewtonOptions {
                max_iter: 25,
                ..NewtonOptions::default()
            },
            initial_step: 0.1,
            min_step: 1e-4,
            fast_iterations: 3,
        }
    }
}

/// Homotopy `ψ_t = t ψ + (1 - t) F(∇²ū + A[ū])` from `t = 0`, where `ū`
/// solves exactly, to `t = 1`.
pub fn continuation_solve(prob: &ProblemSpec, opts: &ContinuationOptions) -> Result<SolverState> {
    let base = prob.subsolution_level()?;
    let mut u = prob.subsolution.clone();
    let mut t = 0.0;
    let mut dt = opts.initial_step;
    let mut records = Vec::new();
    let mut last: Option<SolverState> = None;
    let mut total_iterations = 0;
    while t < 1.0 {
        let t_next = (t + dt).min(1.0);
        let disc = prob.discretization(Some((t_next, &base)));
        match newton_with(disc, &u, t_next, &opts.newton) {
            Ok(state) => {
                total_iterations += state.iterate;
                let min_excess = state
                    .u
                    .values()
                    .iter()
                    .zip(prob.subsolution.values())
                    .fold(f64::INFINITY, |m, (a, b)| m.min(a - b));
                records.push(ContinuationRecord {
                    t: t_next,
                    newton_iterations: state.iterate,
                    residual_norm: state.residual_norm,
                    admissibility_margin: state.admissibility_margin,
                    min_excess,
                });
                log::debug!("continuation reached t = {t_next} in {} iterations", state.iterate);
                if state.iterate <= opts.fast_iterations {
                    dt *= 2.0;
                }
                t = t_next;
                u = state.u.clone();
                last = Some(state);
            }
            Err(e @ (Error::Usage(_) | Error::InvalidInput(_) | Error::Capability(_))) => return Err(e),
            Err(e) => {
                log::debug!("continuation step to {t_next} failed: {e}");
                dt *= 0.5;
                if dt < opts.min_step {
                    return Err(Error::ContinuationStuck {
                        last_t: t,
                        min_step: opts.min_step,
                    });
                }
            }
        }
    }
    let mut state = last.expect("at least one continuation step");
    state.iterate = total_iterations;
    state.continuation = records;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::OperatorSpec;

    fn quadratic_ma(n: usize) -> (ProblemSpec, ScalarField) {
        let g = Grid::cube(2, -1.0, 1.0, n).unwrap();
        let exact = ScalarField::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let sub = ScalarField::from_fn(&g, |x| {
            0.5 * (x[0] * x[0] + x[1] * x[1]) - 0.1 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1])
        })
        .unwrap();
        let prob = ProblemSpec::new(
            OperatorSpec::sigma_k_root(2, 2).unwrap(),
            ATensorSpec::Zero,
            PsiSpec::Constant(1.0),
            exact.clone(),
            sub,
        )
        .unwrap();
        (prob, exact)
    }

    #[test]
    fn quadratic_solution_has_zero_residual() {
        let (prob, exact) = quadratic_ma(9);
        let r = residual(&prob, &exact).unwrap();
        assert!(r.values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn exact_init_takes_zero_iterations() {
        let (prob, exact) = quadratic_ma(9);
        let s = newton_solve(&prob, &exact, &NewtonOptions::default()).unwrap();
        assert_eq!(s.iterate, 0);
        assert!(s.converged);
    }

    #[test]
    fn newton_recovers_quadratic() {
        let (prob, exact) = quadratic_ma(13);
        let s = newton_solve(&prob, &prob.subsolution, &NewtonOptions::default()).unwrap();
        assert!(s.u.max_abs_diff(&exact) < 1e-8);
        assert!(s.history.iter().all(|h| h.admissibility_margin > 0.0));
    }

    #[test]
    fn linearized_zero_direction() {
        let (prob, exact) = quadratic_ma(9);
        let zero = ScalarField::constant(&prob.grid, 0.0).unwrap();
        let out = linearized_apply(&prob, &exact, &zero).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trace_operator_linearizes_to_laplacian() {
        let g = Grid::cube(2, 0.0, 1.0, 9).unwrap();
        let u = ScalarField::from_fn(&g, |x| x[0] * x[0] + 2.0 * x[1] * x[1]).unwrap();
        let prob = ProblemSpec::new(
            OperatorSpec::sigma_k_root(2, 1).unwrap(),
            ATensorSpec::Zero,
            PsiSpec::Constant(1.0),
            u.clone(),
            u.clone(),
        )
        .unwrap();
        let v = ScalarField::from_fn(&g, |x| (3.0 * x[0]).sin() * x[1].exp()).unwrap();
        let lv = linearized_apply(&prob, &u, &v).unwrap();
        for n in g.interior_nodes() {
            let h = v.hessian_at(n).unwrap();
            assert!((lv.get(n) - h.trace()).abs() < 1e-10);
        }
    }

    #[test]
    fn inadmissible_subsolution_is_rejected() {
        let g = Grid::cube(2, -1.0, 1.0, 9).unwrap();
        let bad = ScalarField::from_fn(&g, |x| x[0] * x[0] - x[1] * x[1]).unwrap();
        let err = ProblemSpec::new(
            OperatorSpec::sigma_k_root(2, 2).unwrap(),
            ATensorSpec::Zero,
            PsiSpec::Constant(1.0),
            bad.clone(),
            bad,
        )
        .unwrap_err();
        match err {
            Error::Admissibility { node, eigenvalues, .. } => {
                assert!(node < g.len());
                assert_eq!(eigenvalues.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mismatched_boundary_is_rejected() {
        let (prob, exact) = quadratic_ma(9);
        let shifted = ScalarField::from_fn(&prob.grid, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]) + 1.0)
            .unwrap();
        assert!(ProblemSpec::new(
            prob.operator,
            prob.tensor,
            prob.psi.clone(),
            exact,
            shifted
        )
        .is_err());
    }

    #[test]
    fn constant_path_returns_subsolution() {
        let (prob, _) = quadratic_ma(9);
        let level = prob.subsolution_level().unwrap();
        let table = ScalarField::new(
            prob.grid.clone(),
            level.iter().map(|&v| if v > 0.0 { v } else { 1.0 }).collect(),
        )
        .unwrap();
        let prob = ProblemSpec {
            psi: PsiSpec::Table(table),
            ..prob
        };
        let s = continuation_solve(&prob, &ContinuationOptions::default()).unwrap();
        assert_eq!(s.t, 1.0);
        assert_eq!(s.iterate, 0);
        assert_eq!(s.u, prob.subsolution);
    }
}
