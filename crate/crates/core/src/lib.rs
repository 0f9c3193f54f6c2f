//! Operator calculus, structure-condition audits and a finite-difference
//! Dirichlet solver for Hessian-type equations `f(λ(∇²u + A[u])) = ψ(x, u, ∇u)`.

#![allow(clippy::needless_range_loop)]

pub mod audit;
pub mod cone;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod manufacture;
pub mod monitor;
pub mod plugins;
pub mod run;
pub mod sampling;
pub mod solver;
pub mod spectral;
pub mod theta;

pub use audit::{
    audit_operator, audit_tensor, check_tangent_compactness, AuditReport, ConditionId, GrowthSpec,
    Verdict, Witness,
};
pub use config::{parse_config, Command, RunConfig};
pub use cone::{ConeKind, ConeSpec, EigenTuple, Family, OperatorSpec};
pub use error::{Error, ErrorClass, Result};
pub use grid::{Grid, ScalarField};
pub use manufacture::{manufacture, ExactSolution, PsiMode};
pub use monitor::{monitor, MonitorOptions, MonitorReport};
pub use plugins::{ATensorSpec, PsiBase, PsiSpec};
pub use solver::{
    continuation_solve, linearized_apply, newton_solve, residual, ContinuationOptions,
    NewtonOptions, ProblemSpec, SolverState,
};
pub use run::{run, Run};
pub use sampling::{DirectionScheme, SamplingPlan};
pub use spectral::{SpectralDecomp, SymMatrix};
pub use theta::{beta_r, estimate_theta, BetaEstimate, ThetaEstimate, ThetaRow};
