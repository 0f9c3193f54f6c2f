//! Lower-order data of the equation: the tensor `A(x, z, p)` and the right
//! hand side `ψ(x, z, p)`, each with analytic derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::spectral::SymMatrix;

/// The tensor `A[u] = A(x, u, ∇u)`.
///
/// Every supported family is isotropic, `A = a(z, p) g` with `g` the flat
/// metric; the accessors still return full matrices so callers never
/// depend on that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ATensorSpec {
    Zero,
    /// `A = κ z g`.
    KappaUMetric { kappa: f64 },
    /// `A = z g`.
    UMetric,
    /// `A^{ij} = -(c/2)|p|² δ_ij`, `c > 0`.
    MtwQuadratic { c: f64 },
}

/// `A` and its first derivatives at one point.
#[derive(Debug, Clone)]
pub struct TensorEval {
    pub value: SymMatrix,
    pub dz: SymMatrix,
    /// `A_{p_k}` for `k = 0..dim`.
    pub dp: Vec<SymMatrix>,
}

impl ATensorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ATensorSpec::KappaUMetric { kappa } if !kappa.is_finite() => {
                Err(Error::InvalidInput("kappa must be finite".into()))
            }
            ATensorSpec::MtwQuadratic { c } if !(c.is_finite() && c > 0.0) => {
                Err(Error::InvalidInput(format!("mtw_quadratic needs c > 0, got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// Isotropic coefficient `a`, `a_z`, `a_p`, `a_pp` with `A = a·I`.
    fn coefficient(&self, z: f64, p: &[f64]) -> (f64, f64, Vec<f64>, Vec<Vec<f64>>) {
        let d = p.len();
        let zeros = vec![0.0; d];
        let zero_mat = vec![vec![0.0; d]; d];
        match *self {
            ATensorSpec::Zero => (0.0, 0.0, zeros, zero_mat),
            ATensorSpec::KappaUMetric { kappa } => (kappa * z, kappa, zeros, zero_mat),
            ATensorSpec::UMetric => (z, 1.0, zeros, zero_mat),
            ATensorSpec::MtwQuadratic { c } => {
                let p2: f64 = p.iter().map(|v| v * v).sum();
                let dp = p.iter().map(|v| -c * v).collect();
                let dpp = (0..d)
                    .map(|k| (0..d).map(|l| if k == l { -c } else { 0.0 }).collect())
                    .collect();
                (-0.5 * c * p2, 0.0, dp, dpp)
            }
        }
    }

    pub fn eval(&self, _x: &[f64], z: f64, p: &[f64]) -> TensorEval {
        let d = p.len();
        let (a, az, ap, _) = self.coefficient(z, p);
        let id = SymMatrix::identity(d);
        TensorEval {
            value: id.scaled(a),
            dz: id.scaled(az),
            dp: ap.iter().map(|&v| id.scaled(v)).collect(),
        }
    }

    /// `A^{ξη}(x, z, p)`.
    pub fn quadratic_form(&self, x: &[f64], z: f64, p: &[f64], xi: &[f64], eta: &[f64]) -> f64 {
        self.eval(x, z, p).value.bilinear(xi, eta)
    }

    /// `A^{ξξ}_{p_k p_l} η_k η_l`.
    pub fn pp_form(&self, _x: &[f64], z: f64, p: &[f64], xi: &[f64], eta: &[f64]) -> f64 {
        let (_, _, _, app) = self.coefficient(z, p);
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        let mut acc = 0.0;
        for k in 0..p.len() {
            for l in 0..p.len() {
                acc += app[k][l] * eta[k] * eta[l];
            }
        }
        acc * xi2
    }

    /// `p · ∇_x A^{ξξ}`; every family is independent of `x`.
    pub fn x_directional(&self, _x: &[f64], _z: f64, _p: &[f64], _xi: &[f64]) -> f64 {
        0.0
    }

    /// True when `A_z ≥ 0` holds identically.
    pub fn z_monotone(&self) -> bool {
        match *self {
            ATensorSpec::KappaUMetric { kappa } => kappa >= 0.0,
            _ => true,
        }
    }
}

/// The spatial part of `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiBase {
    Constant(f64),
    /// One value per grid node.
    Table(ScalarField),
}

impl PsiBase {
    fn at(&self, node: usize) -> f64 {
        match self {
            PsiBase::Constant(v) => *v,
            PsiBase::Table(f) => f.get(node),
        }
    }
}

/// Right-hand side `ψ(x, z, p)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PsiSpec {
    Constant(f64),
    /// Manufactured or tabulated `ψ(x)`, one value per node.
    Table(ScalarField),
    /// `ψ(x) exp(-m z)`, `m ≥ 0`.
    Separable { base: PsiBase, m: f64 },
}

/// `ψ` and its first derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEval {
    pub value: f64,
    pub dz: f64,
}

impl PsiSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        match self {
            PsiSpec::Constant(v) if !positive(*v) => {
                Err(Error::InvalidInput(format!("psi must be positive, got {v}")))
            }
            PsiSpec::Table(f) | PsiSpec::Separable { base: PsiBase::Table(f), .. }
                if !f.values().iter().all(|&v| positive(v)) =>
            {
                Err(Error::InvalidInput("psi table has non-positive entries".into()))
            }
            PsiSpec::Separable { base: PsiBase::Constant(v), .. } if !positive(*v) => {
                Err(Error::InvalidInput(format!("psi base must be positive, got {v}")))
            }
            PsiSpec::Separable { m, .. } if !(m.is_finite() && *m >= 0.0) => {
                Err(Error::InvalidInput(format!("separable psi needs m >= 0, got {m}")))
            }
            _ => Ok(()),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            PsiSpec::Constant(_) => "constant",
            PsiSpec::Table(_) => "spatial_table",
            PsiSpec::Separable { .. } => "separable",
        }
    }

    /// Number of distinct spatial samples (1 for constant data).
    pub fn spatial_len(&self) -> usize {
        match self {
            PsiSpec::Table(f) | PsiSpec::Separable { base: PsiBase::Table(f), .. } => {
                f.values().len()
            }
            _ => 1,
        }
    }

    pub fn eval(&self, node: usize, z: f64, _p: &[f64]) -> PsiEval {
        match self {
            PsiSpec::Constant(v) => PsiEval { value: *v, dz: 0.0 },
            PsiSpec::Table(f) => PsiEval {
                value: f.get(node),
                dz: 0.0,
            },
            PsiSpec::Separable { base, m } => {
                let value = base.at(node) * (-m * z).exp();
                PsiEval {
                    value,
                    dz: -m * value,
                }
            }
        }
    }

    /// `D_p ψ`; every family is independent of `p`.
    pub fn dp(&self, _node: usize, _z: f64, p: &[f64]) -> Vec<f64> {
        vec![0.0; p.len()]
    }

    /// `D_p² ψ[η, η]`.
    pub fn pp_form(&self, _node: usize, _z: f64, _p: &[f64], _eta: &[f64]) -> f64 {
        0.0
    }

    /// `p · ∇_x ψ`. Tabulated data carries no analytic `x`-derivative.
    pub fn x_directional(&self, _node: usize, _z: f64, _p: &[f64]) -> Result<f64> {
        match self {
            PsiSpec::Constant(_) | PsiSpec::Separable { base: PsiBase::Constant(_), .. } => Ok(0.0),
            _ => Err(Error::Capability(format!(
                "{} psi provides no analytic x-derivative",
                self.family_name()
            ))),
        }
    }

    /// True when `ψ_z ≤ 0` holds identically.
    pub fn z_nonincreasing(&self) -> bool {
        match self {
            PsiSpec::Separable { m, .. } => *m >= 0.0,
            _ => true,
        }
    }
}
