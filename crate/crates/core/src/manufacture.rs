//! Manufactured problems: analytic solutions `u*` and the matching `ψ`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::OperatorSpec;
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::plugins::{ATensorSpec, PsiSpec};
use crate::sampling::{unit_vector, SamplingPlan};
use crate::spectral::{spectral_eval, SymMatrix};

/// One term `c sin(k·x + φ)` of a trigonometric solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amplitude: f64,
    pub wave: Vec<f64>,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExactSolution {
    /// `|x|²/2`.
    Quadratic,
    /// `exp(|x|²/2)`.
    ExponentialRadial,
    /// `|x|²/2 + Σ c_j sin(k_j·x + φ_j)` with `Σ |c_j||k_j|² ≤ 1/2`, so the
    /// Hessian stays above `I/2`.
    Trigonometric { modes: Vec<Mode> },
}

impl ExactSolution {
    /// Random trigonometric solution in dimension `dim`.
    pub fn trigonometric(dim: usize, seed: u64, modes: usize) -> Self {
        let plan = SamplingPlan {
            seed,
            ..SamplingPlan::default()
        };
        let budget = 0.5 / modes.max(1) as f64;
        let modes = (0..modes)
            .map(|j| {
                let mut rng = plan.stream("manufacture/trig", j);
                let k = std::f64::consts::PI * rng.random_range(0.5..1.5);
                let wave: Vec<f64> = unit_vector(dim, &mut rng).into_iter().map(|v| v * k).collect();
                let amplitude = budget / (k * k) * rng.random_range(0.2..1.0);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                Mode {
                    amplitude,
                    wave,
                    phase,
                }
            })
            .collect();
        ExactSolution::Trigonometric { modes }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ExactSolution::Quadratic => "quadratic",
            ExactSolution::ExponentialRadial => "exponential-radial",
            ExactSolution::Trigonometric { .. } => "trigonometric",
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            ExactSolution::Quadratic => 0.5 * r2,
            ExactSolution::ExponentialRadial => (0.5 * r2).exp(),
            ExactSolution::Trigonometric { modes } => {
                0.5 * r2 + modes.iter().map(|m| m.amplitude * (dot(&m.wave, x) + m.phase).sin()).sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ExactSolution::Quadratic => x.to_vec(),
            ExactSolution::ExponentialRadial => {
                let e = self.value(x);
                x.iter().map(|v| v * e).collect()
            }
            ExactSolution::Trigonometric { modes } => {
                let mut g = x.to_vec();
                for m in modes {
                    let c = m.amplitude * (dot(&m.wave, x) + m.phase).cos();
                    for (gi, ki) in g.iter_mut().zip(&m.wave) {
                        *gi += c * ki;
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        let n = x.len();
        match self {
            ExactSolution::Quadratic => SymMatrix::identity(n),
            ExactSolution::ExponentialRadial => {
                let e = self.value(x);
                SymMatrix::from_fn(n, |i, j| e * (if i == j { 1.0 } else { 0.0 } + x[i] * x[j]))
            }
            ExactSolution::Trigonometric { modes } => SymMatrix::from_fn(n, |i, j| {
                let base = if i == j { 1.0 } else { 0.0 };
                base - modes
                    .iter()
                    .map(|m| m.amplitude * (dot(&m.wave, x) + m.phase).sin() * m.wave[i] * m.wave[j])
                    .sum::<f64>()
            }),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiMode {
    /// `F` of the finite-difference Hessian, so `u*` solves the discrete
    /// problem exactly.
    Discrete,
    /// `F` of the analytic Hessian.
    Analytic,
}

/// `u*` on the grid and the right-hand side table that it solves.
pub fn manufacture(
    grid: &Grid,
    op: &OperatorSpec,
    tensor: &ATensorSpec,
    exact: &ExactSolution,
    mode: PsiMode,
) -> Result<(ScalarField, ScalarField)> {
    if op.n != grid.dim() {
        return Err(Error::InvalidInput(format!(
            "operator dimension {} does not match grid dimension {}",
            op.n,
            grid.dim()
        )));
    }
    let u = ScalarField::from_fn(grid, |x| exact.value(x))?;
    let mut psi = Vec::with_capacity(grid.len());
    for node in 0..grid.len() {
        let x = grid.coords(node);
        let (hess, z, p) = match (mode, u.hessian_at(node)) {
            (PsiMode::Discrete, Some(h)) => (h, u.get(node), u.gradient_at(node)),
            _ => (exact.hessian(&x), exact.value(&x), exact.gradient(&x)),
        };
        let m = hess.plus(&tensor.eval(&x, z, &p).value);
        let v = spectral_eval(op, &m).map_err(|e| match e {
            Error::Admissibility {
                eigenvalues, margin, ..
            } => Error::Admissibility {
                node,
                eigenvalues,
                margin,
            },
            other => other,
        })?;
        psi.push(v);
    }
    let table = ScalarField::new(grid.clone(), psi)?;
    PsiSpec::Table(table.clone()).validate()?;
    Ok((u, table))
}

/// `φ - c Π_a (1 - s_a²)` with `s_a ∈ [-1, 1]` the rescaled coordinate;
/// agrees with `φ` on the boundary.
pub fn bump_subsolution(phi: &ScalarField, c: f64) -> Result<ScalarField> {
    let g = phi.grid();
    let values = (0..g.len())
        .map(|node| {
            if g.is_boundary(node) {
                return phi.get(node);
            }
            let x = g.coords(node);
            let b: f64 = (0..g.dim())
                .map(|a| {
                    let s = (2.0 * x[a] - g.lo()[a] - g.hi()[a]) / (g.hi()[a] - g.lo()[a]);
                    1.0 - s * s
                })
                .product();
            phi.get(node) - c * b
        })
        .collect();
    ScalarField::new(g.clone(), values)
}
