//! Spectral functions `F(B) = f(λ(B))` of symmetric matrices.

use serde::{Deserialize, Serialize};

use crate::cone::{EigenTuple, OperatorSpec};
use crate::error::{Error, Result};

/// Real symmetric matrix stored as its packed upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            upper: vec![0.0; n * (n + 1) / 2],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds the matrix from `entry(i, j)` evaluated for `i <= j`.
    pub fn from_fn(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, entry(i, j));
            }
        }
        m
    }

    /// Builds from dense rows; the rows must be square and symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows are not square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let m = Self::from_fn(n, |i, j| rows[i][j]);
        m.check_finite()?;
        Ok(m)
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.upper.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("matrix has non-finite entries".into()))
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.index(i, j);
        self.upper[idx] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.index(i, j);
        self.upper[idx] += v;
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `Σ_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.get(i, i) * other.get(i, i);
            for j in i + 1..self.n {
                acc += 2.0 * self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    pub fn scaled(&self, t: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            upper: self.upper.iter().map(|v| v * t).collect(),
        }
    }

    pub fn plus(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            n: self.n,
            upper: self
                .upper
                .iter()
                .zip(&other.upper)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn minus(&self, other: &SymMatrix) -> SymMatrix {
        self.plus(&other.scaled(-1.0))
    }

    /// `Σ_k A_ik A_kj`.
    pub fn squared(&self) -> SymMatrix {
        SymMatrix::from_fn(self.n, |i, j| {
            (0..self.n).map(|k| self.get(i, k) * self.get(k, j)).sum()
        })
    }

    /// `Q · self · Qᵀ` for a dense square `q`.
    pub fn conjugate(&self, q: &[Vec<f64>]) -> SymMatrix {
        let n = self.n;
        let a = self.to_dense();
        let mut qa = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                qa[i][j] = (0..n).map(|k| q[i][k] * a[k][j]).sum();
            }
        }
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| qa[i][k] * q[j][k]).sum())
    }

    /// `Σ_ij A_ij x_i y_j`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                acc += self.get(i, j) * x[i] * y[j];
            }
        }
        acc
    }
}

/// Eigenvalues (descending) and orthonormal eigenvector frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: EigenTuple,
    /// Column `j` of `frame` is the eigenvector of `eigenvalues[j]`;
    /// stored row-major as `frame[i][j]`.
    pub frame: Vec<Vec<f64>>,
}

impl SpectralDecomp {
    /// `Q · diag(d) · Qᵀ`.
    pub fn reassemble(&self, d: &[f64]) -> SymMatrix {
        let q = &self.frame;
        let n = d.len();
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| q[i][k] * d[k] * q[j][k]).sum())
    }
}

const JACOBI_MAX_SWEEPS: usize = 50;
const JACOBI_REL_THRESHOLD: f64 = 1e-14;

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eigen(b: &SymMatrix) -> Result<SpectralDecomp> {
    b.check_finite()?;
    let n = b.dim();
    if n < 2 {
        return Err(Error::InvalidInput(format!("matrix dimension {n} < 2")));
    }
    let mut a = b.to_dense();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let threshold = JACOBI_REL_THRESHOLD * b.frobenius();

    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += a[i][j] * a[i][j];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::Numerical {
                message: format!("Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps"),
                residual: off(&a),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep index order
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let mut frame: Vec<Vec<f64>> = (0..n)
        .map(|r| order.iter().map(|&c| v[r][c]).collect())
        .collect();

    // Re-orthonormalize clusters of equal eigenvalues in index order.
    let scale = values.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end - 1] - values[end]).abs() <= 1e-12 * scale {
            end += 1;
        }
        if end - start > 1 {
            for c in start..end {
                for p in start..c {
                    let dot: f64 = (0..n).map(|r| frame[r][c] * frame[r][p]).sum();
                    for row in frame.iter_mut() {
                        row[c] -= dot * row[p];
                    }
                }
                let norm = (0..n).map(|r| frame[r][c] * frame[r][c]).sum::<f64>().sqrt();
                for row in frame.iter_mut() {
                    row[c] /= norm;
                }
            }
        }
        start = end;
    }

    // Sign convention: first non-negligible component of each column positive.
    for c in 0..n {
        if let Some(r) = (0..n).find(|&r| frame[r][c].abs() > 1e-12) {
            if frame[r][c] < 0.0 {
                for row in frame.iter_mut() {
                    row[c] = -row[c];
                }
            }
        }
    }

    Ok(SpectralDecomp {
        eigenvalues: EigenTuple::new(values)?,
        frame,
    })
}

fn admissible_decomp(op: &OperatorSpec, b: &SymMatrix) -> Result<SpectralDecomp> {
    if b.dim() != op.n {
        return Err(Error::InvalidInput(format!(
            "matrix dimension {} does not match operator dimension {}",
            b.dim(),
            op.n
        )));
    }
    let d = sym_eigen(b)?;
    let m = op.cone().membership(d.eigenvalues.values());
    if !m.inside {
        return Err(Error::Admissibility {
            node: usize::MAX,
            eigenvalues: d.eigenvalues.values().to_vec(),
            margin: m.margin,
        });
    }
    Ok(d)
}

/// Value, derivative matrix and spectral data of `F` at an admissible matrix.
#[derive(Debug, Clone)]
pub struct SpectralEval {
    pub value: f64,
    /// `F^{ij} = ∂F/∂B_ij`.
    pub grad: SymMatrix,
    pub f_grad: Vec<f64>,
    pub decomp: SpectralDecomp,
    pub cone_margin: f64,
}

/// `F(B) = f(λ(B))`.
pub fn spectral_eval(op: &OperatorSpec, b: &SymMatrix) -> Result<f64> {
    let d = admissible_decomp(op, b)?;
    Ok(op.eval_unchecked(d.eigenvalues.values()))
}

/// The matrix `{F^{ij}} = Q diag(f_i) Qᵀ`.
pub fn spectral_grad(op: &OperatorSpec, b: &SymMatrix) -> Result<SymMatrix> {
    Ok(spectral_eval_grad(op, b)?.grad)
}

pub fn spectral_eval_grad(op: &OperatorSpec, b: &SymMatrix) -> Result<SpectralEval> {
    let d = admissible_decomp(op, b)?;
    let cone_margin = op.cone().membership(d.eigenvalues.values()).margin;
    let (value, f_grad) = op.eval_grad_unchecked(d.eigenvalues.values());
    let grad = d.reassemble(&f_grad);
    Ok(SpectralEval {
        value,
        grad,
        f_grad,
        decomp: d,
        cone_margin,
    })
}

/// Pairwise divided differences `(f_i - f_j)/(λ_i - λ_j)` at `λ(B)`.
#[derive(Debug, Clone)]
pub struct DividedDifferences {
    pub eigenvalues: EigenTuple,
    /// Symmetric table; the diagonal is unused and set to zero.
    pub table: SymMatrix,
    /// Number of pairs evaluated through the coincident-eigenvalue limit.
    pub limit_pairs: usize,
}

impl DividedDifferences {
    pub fn off_diagonal_extremes(&self) -> (f64, f64) {
        let n = self.table.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let v = self.table.get(i, j);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

const DEGENERATE_REL: f64 = 1e-8;

pub fn divided_differences(op: &OperatorSpec, b: &SymMatrix) -> Result<DividedDifferences> {
    let d = admissible_decomp(op, b)?;
    divided_differences_at(op, &d.eigenvalues)
}

/// Divided differences directly at an admissible eigenvalue tuple.
pub fn divided_differences_at(op: &OperatorSpec, lambda: &EigenTuple) -> Result<DividedDifferences> {
    let f_grad = op.grad(lambda)?;
    let lam = lambda.values();
    let n = lam.len();
    let mut table = SymMatrix::zeros(n);
    let mut limit_pairs = 0;
    for i in 0..n {
        for j in i + 1..n {
            let gap = lam[i] - lam[j];
            let value = if gap.abs() <= DEGENERATE_REL * (1.0 + lam[i].abs()) {
                limit_pairs += 1;
                merged_limit(op, lam, i, j)?
            } else {
                (f_grad[i] - f_grad[j]) / gap
            };
            table.set(i, j, value);
        }
    }
    Ok(DividedDifferences {
        eigenvalues: lambda.clone(),
        table,
        limit_pairs,
    })
}

/// Limit of the divided difference as `λ_i, λ_j` merge, from the gradient
/// at the merged point split symmetrically by a small spacing.
fn merged_limit(op: &OperatorSpec, lam: &[f64], i: usize, j: usize) -> Result<f64> {
    let m = 0.5 * (lam[i] + lam[j]);
    let cone = op.cone();
    let mut s = 1e-4 * (1.0 + m.abs());
    for _ in 0..60 {
        let mut p = lam.to_vec();
        p[i] = m + 0.5 * s;
        p[j] = m - 0.5 * s;
        if cone.membership(&p).inside {
            let (_, g) = op.eval_grad_unchecked(&p);
            return Ok((g[i] - g[j]) / s);
        }
        s *= 0.5;
    }
    Err(Error::Numerical {
        message: "no admissible split around merged eigenvalue".into(),
        residual: s,
    })
}
