//! A priori estimate diagnostics evaluated on a converged discrete solution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::OperatorSpec;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::solver::{ProblemSpec, SolverState};
use crate::spectral::{divided_differences_at, spectral_eval, sym_eigen, SymMatrix};
use crate::theta::ThetaEstimate;
use crate::EigenTuple;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorOptions {
    /// Barrier `v = (u - ū) + t d - N d²/2`.
    pub barrier_t: f64,
    pub barrier_n: f64,
    /// Collar width; `min(2t/N, 3h)` when absent.
    pub barrier_delta: Option<f64>,
    /// Weights `(A_1, A_2, A_3)` of `Ψ = A_1 v + A_2 ρ² - A_3 Σ_β |∇_β(u - φ)|²`.
    pub psi_weights: [f64; 3],
}

impl Default for MonitorOptions {
    fn default() -> Self {
        MonitorOptions {
            barrier_t: 0.1,
            barrier_n: 10.0,
            barrier_delta: None,
            psi_weights: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basic1Status {
    Checked,
    /// No interior node has `|λ(U)| ≥ R̂`.
    NoQualifyingNodes,
    /// The estimate has no radius with positive `θ̂`.
    NoPositiveTheta,
}

/// `ℒ(ū - u) ≥ θ ΣF^{ii} + θ` at nodes with `|λ(U)| ≥ R̂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basic1Check {
    pub status: Basic1Status,
    pub theta: Option<f64>,
    pub r_hat: Option<f64>,
    pub nodes_tested: usize,
    pub violations: usize,
    /// `min [ℒ(ū - u) - θ(1 + ΣF^{ii})]` over tested nodes.
    pub min_margin: Option<f64>,
    pub max_eigen_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierCheck {
    pub t: f64,
    pub n: f64,
    pub delta: f64,
    /// Interior nodes with `d ≤ δ` whose nearest face is unique.
    pub collar_nodes: usize,
    pub min_v: Option<f64>,
    pub negative_v: usize,
    /// `max ℒv / (1 + ΣF^{ii})` over the collar; `ε = -max` when negative.
    pub max_lv_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiBarrier {
    pub weights: [f64; 3],
    pub nodes: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividedDifferenceStats {
    pub min: f64,
    pub max: f64,
    pub limit_pairs: usize,
}

/// `⟨F_grad, Ū - U⟩ ≥ F(2B I + Ū) - F(U) - 2B ΣF^{ii}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityBoundCheck {
    pub nodes_tested: usize,
    pub violations: usize,
    pub min_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub residual_norm: f64,
    pub admissibility_margin: f64,
    pub max_interior_hessian: f64,
    pub max_boundary_adjacent_hessian: f64,
    /// Interior over boundary-adjacent maximum; absent when the latter is 0.
    pub hessian_ratio: Option<f64>,
    pub max_gradient: f64,
    pub basic1: Basic1Check,
    pub barrier: BarrierCheck,
    pub psi_barrier: PsiBarrier,
    pub divided_differences: DividedDifferenceStats,
    pub concavity_bound: ConcavityBoundCheck,
}

struct NodeDiag {
    node: usize,
    hessian: f64,
    adjacent: bool,
    eigen_norm: f64,
    trace_f: f64,
    l_sub: f64,
    dd: (f64, f64, usize),
    g12: f64,
}

fn apply(row: &[(usize, f64)], v: &ScalarField) -> f64 {
    row.iter().map(|&(m, w)| w * v.get(m)).sum()
}

fn check_theta(op: &OperatorSpec, est: &ThetaEstimate) -> Result<()> {
    if est.operator != *op {
        return Err(Error::Usage(
            "theta estimate was computed for a different operator".into(),
        ));
    }
    Ok(())
}

/// Diagnostics of a converged state.
pub fn monitor(
    prob: &ProblemSpec,
    state: &SolverState,
    theta: &ThetaEstimate,
    opts: &MonitorOptions,
) -> Result<MonitorReport> {
    if !state.converged {
        return Err(Error::Usage("monitor needs a converged state".into()));
    }
    if state.u.grid() != &prob.grid {
        return Err(Error::Usage("state and problem live on different grids".into()));
    }
    check_theta(&prob.operator, theta)?;
    let grid = &prob.grid;
    let u = &state.u;
    let sub = &prob.subsolution;
    let disc = prob.discretization(None);
    let w = ScalarField::new(
        grid.clone(),
        sub.values().iter().zip(u.values()).map(|(a, b)| a - b).collect(),
    )?;
    let op = prob.operator;

    let nodes = grid.interior_nodes();
    let diags: Vec<NodeDiag> = nodes
        .par_iter()
        .map(|&node| -> Result<NodeDiag> {
            let e = disc.eval_node(u, node)?;
            let row = disc.row(node, &e, false);
            let lambda = EigenTuple::new(e.eigenvalues.clone())?;
            let dd = divided_differences_at(&op, &lambda)?;
            let (dmin, dmax) = dd.off_diagonal_extremes();
            let hess = u.hessian_at(node).expect("interior node");
            Ok(NodeDiag {
                node,
                hessian: hess.frobenius(),
                adjacent: grid.is_boundary_adjacent(node),
                eigen_norm: lambda.norm(),
                trace_f: e.fgrad.trace(),
                l_sub: apply(&row, &w),
                dd: (dmin, dmax, dd.limit_pairs),
                g12: concavity_bound_margin(prob, node, u, &e.fgrad)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut max_interior: f64 = 0.0;
    let mut max_adjacent: f64 = 0.0;
    let mut dd_stats = DividedDifferenceStats {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        limit_pairs: 0,
    };
    let mut g12 = ConcavityBoundCheck {
        nodes_tested: 0,
        violations: 0,
        min_margin: None,
    };
    let mut basic1 = Basic1Check {
        status: Basic1Status::NoQualifyingNodes,
        theta: theta.theta,
        r_hat: theta.r_hat,
        nodes_tested: 0,
        violations: 0,
        min_margin: None,
        max_eigen_norm: 0.0,
    };
    for d in &diags {
        max_interior = max_interior.max(d.hessian);
        if d.adjacent {
            max_adjacent = max_adjacent.max(d.hessian);
        }
        dd_stats.min = dd_stats.min.min(d.dd.0);
        dd_stats.max = dd_stats.max.max(d.dd.1);
        dd_stats.limit_pairs += d.dd.2;
        g12.nodes_tested += 1;
        if d.g12 < 0.0 {
            g12.violations += 1;
        }
        g12.min_margin = Some(g12.min_margin.map_or(d.g12, |m: f64| m.min(d.g12)));
        basic1.max_eigen_norm = basic1.max_eigen_norm.max(d.eigen_norm);
        if let (Some(t), Some(r)) = (theta.theta, theta.r_hat) {
            if d.eigen_norm >= r {
                let m = d.l_sub - t * (1.0 + d.trace_f);
                basic1.nodes_tested += 1;
                if m < 0.0 {
                    basic1.violations += 1;
                }
                basic1.min_margin = Some(basic1.min_margin.map_or(m, |x: f64| x.min(m)));
            }
        }
    }
    basic1.status = if theta.theta.is_none() {
        Basic1Status::NoPositiveTheta
    } else if basic1.nodes_tested == 0 {
        Basic1Status::NoQualifyingNodes
    } else {
        Basic1Status::Checked
    };
    if basic1.status != Basic1Status::Checked {
        log::info!(
            "interior inequality not tested: {:?} (max |λ(U)| = {:.6e})",
            basic1.status,
            basic1.max_eigen_norm
        );
    }

    let max_gradient = (0..grid.len())
        .map(|n| u.gradient_at(n).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let (barrier, psi_barrier) = barrier_checks(prob, state, opts, &diags)?;
    Ok(MonitorReport {
        residual_norm: state.residual_norm,
        admissibility_margin: state.admissibility_margin,
        max_interior_hessian: max_interior,
        max_boundary_adjacent_hessian: max_adjacent,
        hessian_ratio: (max_adjacent > 0.0).then(|| max_interior / max_adjacent),
        max_gradient,
        basic1,
        barrier,
        psi_barrier,
        divided_differences: dd_stats,
        concavity_bound: g12,
    })
}

/// Margin of the concavity bound at one node, with `B` chosen so that
/// `λ(B I + Ū)` is positive.
fn concavity_bound_margin(prob: &ProblemSpec, node: usize, u: &ScalarField, fgrad: &SymMatrix) -> Result<f64> {
    let x = prob.grid.coords(node);
    let matrix = |f: &ScalarField| -> SymMatrix {
        let p = f.gradient_at(node);
        let a = prob.tensor.eval(&x, f.get(node), &p);
        f.hessian_at(node).expect("interior node").plus(&a.value)
    };
    let big_u = matrix(u);
    let sub_u = matrix(&prob.subsolution);
    let lmin = sym_eigen(&sub_u)?.eigenvalues.values().iter().cloned().fold(f64::INFINITY, f64::min);
    let b = (-lmin).max(0.0) + 1.0;
    let shifted = sub_u.plus(&SymMatrix::identity(sub_u.dim()).scaled(2.0 * b));
    let lhs = fgrad.inner(&sub_u.minus(&big_u));
    let rhs = spectral_eval(&prob.operator, &shifted)? - spectral_eval(&prob.operator, &big_u)?
        - 2.0 * b * fgrad.trace();
    Ok(lhs - rhs + 1e-9 * (1.0 + lhs.abs() + rhs.abs()))
}

/// Collar width used by the barrier check.
pub fn collar_width(grid: &Grid, opts: &MonitorOptions) -> f64 {
    let h = grid.spacing().iter().cloned().fold(f64::INFINITY, f64::min);
    opts.barrier_delta
        .unwrap_or_else(|| (2.0 * opts.barrier_t / opts.barrier_n).min(3.0 * h))
}

fn barrier_checks(
    prob: &ProblemSpec,
    state: &SolverState,
    opts: &MonitorOptions,
    diags: &[NodeDiag],
) -> Result<(BarrierCheck, PsiBarrier)> {
    let grid = &prob.grid;
    let u = &state.u;
    let (t, n) = (opts.barrier_t, opts.barrier_n);
    let delta = collar_width(grid, opts);
    let v = ScalarField::new(
        grid.clone(),
        (0..grid.len())
            .map(|m| {
                let d = grid.boundary_distance(m).0;
                u.get(m) - prob.subsolution.get(m) + t * d - 0.5 * n * d * d
            })
            .collect(),
    )?;
    let disc = prob.discretization(None);
    let collar: Vec<&NodeDiag> = diags
        .iter()
        .filter(|d| {
            let (dist, ties) = grid.boundary_distance(d.node);
            ties == 1 && dist <= delta * (1.0 + 1e-12)
        })
        .collect();
    let rows: Vec<(f64, f64, f64)> = collar
        .par_iter()
        .map(|d| -> Result<(f64, f64, f64)> {
            let e = disc.eval_node(u, d.node)?;
            let lv = apply(&disc.row(d.node, &e, false), &v);
            Ok((v.get(d.node), lv / (1.0 + d.trace_f), psi_value(prob, u, &v, d.node, opts)))
        })
        .collect::<Result<_>>()?;
    let mut check = BarrierCheck {
        t,
        n,
        delta,
        collar_nodes: rows.len(),
        min_v: None,
        negative_v: 0,
        max_lv_ratio: None,
    };
    let mut psi = PsiBarrier {
        weights: opts.psi_weights,
        nodes: rows.len(),
        min: None,
        max: None,
    };
    for &(vv, ratio, ps) in &rows {
        if vv < 0.0 {
            check.negative_v += 1;
        }
        check.min_v = Some(check.min_v.map_or(vv, |m: f64| m.min(vv)));
        check.max_lv_ratio = Some(check.max_lv_ratio.map_or(ratio, |m: f64| m.max(ratio)));
        psi.min = Some(psi.min.map_or(ps, |m: f64| m.min(ps)));
        psi.max = Some(psi.max.map_or(ps, |m: f64| m.max(ps)));
    }
    Ok((check, psi))
}

/// `Ψ` at a collar node, with tangential directions taken as the axes other
/// than the normal of the nearest face and `ρ` the distance to that face.
fn psi_value(prob: &ProblemSpec, u: &ScalarField, v: &ScalarField, node: usize, opts: &MonitorOptions) -> f64 {
    let grid = &prob.grid;
    let x = grid.coords(node);
    let (rho, _) = grid.boundary_distance(node);
    let normal_axis = (0..grid.dim())
        .min_by(|&a, &b| {
            let da = (x[a] - grid.lo()[a]).min(grid.hi()[a] - x[a]);
            let db = (x[b] - grid.lo()[b]).min(grid.hi()[b] - x[b]);
            da.total_cmp(&db)
        })
        .unwrap_or(0);
    let gu = u.gradient_at(node);
    let gphi = prob.boundary.gradient_at(node);
    let tangential: f64 = (0..grid.dim())
        .filter(|&a| a != normal_axis)
        .map(|a| (gu[a] - gphi[a]).powi(2))
        .sum();
    let [a1, a2, a3] = opts.psi_weights;
    a1 * v.get(node) + a2 * rho * rho - a3 * tangential
}

/// Cutoff `ζ = η²` on the ball `B_r(center)`, where `η` is a
/// smoothstep equal to 1 on `B_{r/2}` and 0 outside `B_r`.
pub fn cutoff_field(grid: &Grid, center: &[f64], r: f64) -> Result<ScalarField> {
    if r.is_nan() || r <= 0.0 || center.len() != grid.dim() {
        return Err(Error::InvalidInput("cutoff needs r > 0 and a center in the grid dimension".into()));
    }
    ScalarField::from_fn(grid, |x| {
        let dist = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let s = ((r - dist) / (0.5 * r)).clamp(0.0, 1.0);
        let eta = s * s * (3.0 - 2.0 * s);
        eta * eta
    })
}

/// Discrete constants `max_{ζ>0} |∇ζ| √ζ` and `max |∇²ζ|` of a cutoff.
pub fn cutoff_constants(zeta: &ScalarField) -> (f64, f64) {
    let grid = zeta.grid();
    let mut c_grad: f64 = 0.0;
    let mut c_hess: f64 = 0.0;
    for n in grid.interior_nodes() {
        let z = zeta.get(n);
        let g = zeta.gradient_at(n).iter().map(|v| v * v).sum::<f64>().sqrt();
        if z > 0.0 {
            c_grad = c_grad.max(g * z.sqrt());
        }
        if let Some(h) = zeta.hessian_at(n) {
            c_hess = c_hess.max(h.frobenius());
        }
    }
    (c_grad, c_hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plugins::{ATensorSpec, PsiSpec};
    use crate::sampling::SamplingPlan;
    use crate::solver::{newton_solve, NewtonOptions};
    use crate::theta::estimate_theta;

    fn quadratic() -> (ProblemSpec, SolverState, ThetaEstimate) {
        let g = Grid::cube(2, -1.0, 1.0, 17).unwrap();
        let exact = ScalarField::from_fn(&g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1])).unwrap();
        let op = OperatorSpec::sigma_k_root(2, 2).unwrap();
        let prob = ProblemSpec::new(op, ATensorSpec::Zero, PsiSpec::Constant(1.0), exact.clone(), exact.clone())
            .unwrap();
        let state = newton_solve(&prob, &exact, &NewtonOptions::default()).unwrap();
        let k = [EigenTuple::diagonal(2, 1.0).unwrap()];
        let plan = SamplingPlan {
            count: 200,
            ..SamplingPlan::default()
        };
        let est = estimate_theta(&op, &k, [0.5, 2.0], &[10.0, 100.0], &plan).unwrap();
        (prob, state, est)
    }

    #[test]
    fn quadratic_hessian_ratio_is_one() {
        let (prob, state, est) = quadratic();
        let r = monitor(&prob, &state, &est, &MonitorOptions::default()).unwrap();
        assert!((r.max_interior_hessian - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.max_boundary_adjacent_hessian - 2f64.sqrt()).abs() < 1e-12);
        assert!((r.hessian_ratio.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.basic1.status, Basic1Status::NoQualifyingNodes);
        assert_eq!(r.basic1.nodes_tested, 0);
        assert_eq!(r.concavity_bound.violations, 0);
        assert!(r.divided_differences.limit_pairs > 0);
    }

    #[test]
    fn barrier_collar_constraint() {
        let (prob, state, est) = quadratic();
        let default = monitor(&prob, &state, &est, &MonitorOptions::default()).unwrap();
        assert_eq!(default.barrier.delta, 0.02);
        assert_eq!(default.barrier.collar_nodes, 0);
        let opts = MonitorOptions {
            barrier_t: 0.5,
            barrier_n: 2.0,
            ..MonitorOptions::default()
        };
        let ok = monitor(&prob, &state, &est, &opts).unwrap();
        assert_eq!(ok.barrier.delta, 0.375);
        assert!(ok.barrier.collar_nodes > 0);
        assert_eq!(ok.barrier.negative_v, 0);
        let wide = MonitorOptions {
            barrier_delta: Some(0.9),
            ..opts
        };
        let bad = monitor(&prob, &state, &est, &wide).unwrap();
        assert!(bad.barrier.negative_v > 0);
    }

    #[test]
    fn unconverged_state_is_rejected() {
        let (prob, mut state, est) = quadratic();
        state.converged = false;
        assert!(matches!(
            monitor(&prob, &state, &est, &MonitorOptions::default()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn cutoff_bounds() {
        let g = Grid::cube(2, -1.0, 1.0, 41).unwrap();
        let z = cutoff_field(&g, &[0.0, 0.0], 0.8).unwrap();
        assert!(z.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(z.get(g.node_at(&[20, 20])), 1.0);
        let (cg, ch) = cutoff_constants(&z);
        assert!(cg.is_finite() && ch.is_finite());
    }
}
