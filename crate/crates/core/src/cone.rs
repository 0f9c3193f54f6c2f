//! Symmetric operator families on eigenvalue space and their cones.
//!
//! Three families are supported, all concave and increasing in each
//! argument on their natural cone:
//!
//! * `σ_k^{1/k}` on the Gårding cone `Γ_k`,
//! * `(σ_k/σ_l)^{1/(k-l)}` on `Γ_k`,
//! * `log P_k`, the log of the product of all `k`-term sums, on `𝒫_k`.
//!
//! The first two are positively homogeneous of degree one; `log P_k` is
//! log-homogeneous with weight `C(n, k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue vector `(λ_1, …, λ_n)`, `n ≥ 2`, all entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EigenTuple(Vec<f64>);

impl EigenTuple {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "eigen tuple needs n >= 2 entries, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "eigen tuple entry {i} is not finite"
            )));
        }
        Ok(EigenTuple(values))
    }

    /// The all-ones vector scaled by `t`.
    pub fn diagonal(n: usize, t: f64) -> Result<Self> {
        Self::new(vec![t; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, t: f64) -> Self {
        EigenTuple(self.0.iter().map(|v| v * t).collect())
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for EigenTuple {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        EigenTuple::new(values)
    }
}

impl From<EigenTuple> for Vec<f64> {
    fn from(t: EigenTuple) -> Self {
        t.0
    }
}

/// Binomial coefficient as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Calls `visit` with every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All elementary symmetric polynomials `σ_0, …, σ_m` of `values`, where
/// `m = min(max_order, len)`.
///
/// These are the coefficients of `Π (x + λ_i)`, accumulated one factor at a
/// time.
pub fn elementary_all(values: &[f64], max_order: usize) -> Vec<f64> {
    let m = max_order.min(values.len());
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for (count, &v) in values.iter().enumerate() {
        let top = (count + 1).min(m);
        for j in (1..=top).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

/// `σ_k(λ)`. `k = 0` gives 1.
pub fn elementary_symmetric(lambda: &EigenTuple, k: usize) -> Result<f64> {
    let n = lambda.len();
    if k > n {
        return Err(Error::InvalidOrder { k, n });
    }
    Ok(elementary_all(lambda.values(), k)[k])
}

/// `σ_j(λ | i)` for `j = 0..=max_order`, computed on the `n - 1` entries
/// remaining after deleting entry `i`.
fn deleted_elementary(values: &[f64], i: usize, max_order: usize) -> Vec<f64> {
    let m = max_order.min(values.len() - 1);
    let mut e = vec![0.0; max_order + 1];
    e[0] = 1.0;
    let mut count = 0;
    for (j, &v) in values.iter().enumerate() {
        if j == i {
            continue;
        }
        let top = (count + 1).min(m);
        for r in (1..=top).rev() {
            e[r] += v * e[r - 1];
        }
        count += 1;
    }
    e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// Gårding cone `Γ_k = {σ_j > 0, j = 1..k}`.
    GammaK,
    /// `𝒫_k`: every `k`-term sum positive.
    PConeK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub n: usize,
    pub k: usize,
}

/// Result of a cone membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub inside: bool,
    /// Minimum of the tested quantities.
    pub margin: f64,
    /// 1-based index of the inequality attaining the margin: `j` of `σ_j`
    /// for `Γ_k`, position of the `k`-subset in lexicographic order for `𝒫_k`.
    pub index: usize,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("dimension n = {n} must be >= 2")));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidOrder { k, n });
        }
        Ok(ConeSpec { kind, n, k })
    }

    fn check_dim(&self, lambda: &EigenTuple) -> Result<()> {
        if lambda.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "eigen tuple has {} entries, cone dimension is {}",
                lambda.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Open-cone membership and margin.
    pub fn contains(&self, lambda: &EigenTuple) -> Result<Membership> {
        self.check_dim(lambda)?;
        Ok(self.membership(lambda.values()))
    }

    pub(crate) fn membership(&self, values: &[f64]) -> Membership {
        let mut margin = f64::INFINITY;
        let mut index = 0;
        match self.kind {
            ConeKind::GammaK => {
                let e = elementary_all(values, self.k);
                for (j, &s) in e.iter().enumerate().skip(1) {
                    if s < margin {
                        margin = s;
                        index = j;
                    }
                }
            }
            ConeKind::PConeK => {
                let mut pos = 0;
                for_each_subset(self.n, self.k, |s| {
                    pos += 1;
                    let sum: f64 = s.iter().map(|&i| values[i]).sum();
                    if sum < margin {
                        margin = sum;
                        index = pos;
                    }
                });
            }
        }
        Membership {
            inside: margin > 0.0,
            margin,
            index,
        }
    }
}

/// Which symmetric function of the eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `σ_k^{1/k}`.
    SigmaKRoot,
    /// `(σ_k/σ_l)^{1/(k-l)}`, `1 <= l < k`.
    SigmaRatio { l: usize },
    /// `log P_k`.
    LogPK,
}

/// A concrete operator `f` with its dimension and order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(flatten)]
    pub family: Family,
    pub n: usize,
    pub k: usize,
}

impl OperatorSpec {
    pub fn new(family: Family, n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("dimension n = {n} must be >= 2")));
        }
        if k == 0 || k > n {
            return Err(Error::InvalidOrder { k, n });
        }
        if let Family::SigmaRatio { l } = family {
            if l == 0 || l >= k {
                return Err(Error::InvalidInput(format!(
                    "sigma ratio needs 1 <= l < k, got l = {l}, k = {k}"
                )));
            }
        }
        Ok(OperatorSpec { family, n, k })
    }

    pub fn sigma_k_root(n: usize, k: usize) -> Result<Self> {
        Self::new(Family::SigmaKRoot, n, k)
    }

    pub fn sigma_ratio(n: usize, k: usize, l: usize) -> Result<Self> {
        Self::new(Family::SigmaRatio { l }, n, k)
    }

    pub fn log_p_k(n: usize, k: usize) -> Result<Self> {
        Self::new(Family::LogPK, n, k)
    }

    pub fn cone(&self) -> ConeSpec {
        let kind = match self.family {
            Family::LogPK => ConeKind::PConeK,
            _ => ConeKind::GammaK,
        };
        ConeSpec {
            kind,
            n: self.n,
            k: self.k,
        }
    }

    /// True for the degree-one homogeneous families.
    pub fn is_homogeneous(&self) -> bool {
        !matches!(self.family, Family::LogPK)
    }

    /// `sup_{∂Γ} f`: 0 for the homogeneous families, `-∞` for `log P_k`.
    pub fn boundary_sup(&self) -> f64 {
        if self.is_homogeneous() {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Weight `w` in `f(tλ) = w log t + f(λ)` for `log P_k`.
    pub fn log_weight(&self) -> f64 {
        binomial(self.n, self.k)
    }

    fn admit(&self, lambda: &EigenTuple) -> Result<()> {
        let m = self.cone().contains(lambda)?;
        if !m.inside {
            return Err(Error::ConeViolation {
                index: m.index,
                value: m.margin,
            });
        }
        Ok(())
    }

    /// `f(λ)`.
    pub fn eval(&self, lambda: &EigenTuple) -> Result<f64> {
        self.admit(lambda)?;
        Ok(self.eval_unchecked(lambda.values()))
    }

    pub(crate) fn eval_unchecked(&self, v: &[f64]) -> f64 {
        match self.family {
            Family::SigmaKRoot => {
                let e = elementary_all(v, self.k);
                e[self.k].powf(1.0 / self.k as f64)
            }
            Family::SigmaRatio { l } => {
                let e = elementary_all(v, self.k);
                (e[self.k] / e[l]).powf(1.0 / (self.k - l) as f64)
            }
            Family::LogPK => {
                let mut acc = 0.0;
                for_each_subset(self.n, self.k, |s| {
                    acc += s.iter().map(|&i| v[i]).sum::<f64>().ln();
                });
                acc
            }
        }
    }

    /// `(f_1, …, f_n)`.
    pub fn grad(&self, lambda: &EigenTuple) -> Result<Vec<f64>> {
        self.admit(lambda)?;
        Ok(self.eval_grad_unchecked(lambda.values()).1)
    }

    /// `f` and its gradient in one pass.
    pub fn eval_grad(&self, lambda: &EigenTuple) -> Result<(f64, Vec<f64>)> {
        self.admit(lambda)?;
        Ok(self.eval_grad_unchecked(lambda.values()))
    }

    pub(crate) fn eval_grad_unchecked(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let n = v.len();
        match self.family {
            Family::SigmaKRoot => {
                let k = self.k;
                let e = elementary_all(v, k);
                let f = e[k].powf(1.0 / k as f64);
                let scale = f / (k as f64 * e[k]);
                let g = (0..n)
                    .map(|i| scale * deleted_elementary(v, i, k - 1)[k - 1])
                    .collect();
                (f, g)
            }
            Family::SigmaRatio { l } => {
                let k = self.k;
                let e = elementary_all(v, k);
                let f = (e[k] / e[l]).powf(1.0 / (k - l) as f64);
                let scale = f / (k - l) as f64;
                let g = (0..n)
                    .map(|i| {
                        let d = deleted_elementary(v, i, k - 1);
                        scale * (d[k - 1] / e[k] - d[l - 1] / e[l])
                    })
                    .collect();
                (f, g)
            }
            Family::LogPK => {
                let mut f = 0.0;
                let mut g = vec![0.0; n];
                for_each_subset(self.n, self.k, |s| {
                    let sum: f64 = s.iter().map(|&i| v[i]).sum();
                    f += sum.ln();
                    for &i in s {
                        g[i] += 1.0 / sum;
                    }
                });
                (f, g)
            }
        }
    }

    /// Unit normal `Df/|Df|` of the level surface through `λ`.
    pub fn normal(&self, lambda: &EigenTuple) -> Result<Vec<f64>> {
        let g = self.grad(lambda)?;
        Ok(normalize(&g))
    }

    /// `Σ f_i(λ)(μ_i - λ_i) - (f(μ) - f(λ))`; nonnegative by concavity.
    pub fn tangent_gap(&self, lambda: &EigenTuple, mu: &EigenTuple) -> Result<f64> {
        let (fl, g) = self.eval_grad(lambda)?;
        let fm = self.eval(mu)?;
        let lin: f64 = g
            .iter()
            .zip(mu.values().iter().zip(lambda.values()))
            .map(|(gi, (m, l))| gi * (m - l))
            .sum();
        Ok(lin - (fm - fl))
    }

    /// The point `t·d` on the ray through `direction` with `f(t·d) = level`.
    ///
    /// Uses homogeneity (`t = level / f(d)`) or log-homogeneity
    /// (`t = exp((level - f(d)) / C(n,k))`).
    pub fn level_ray_point(&self, direction: &EigenTuple, level: f64) -> Result<EigenTuple> {
        let fd = self.eval(direction)?;
        let t = self.ray_scale(fd, level)?;
        Ok(direction.scaled(t))
    }

    pub(crate) fn ray_scale(&self, fd: f64, level: f64) -> Result<f64> {
        if !level.is_finite() {
            return Err(Error::Usage(format!("level {level} is not finite")));
        }
        if self.is_homogeneous() {
            if level <= 0.0 {
                return Err(Error::Usage(format!(
                    "level {level} is not attained: f > 0 on the cone"
                )));
            }
            Ok(level / fd)
        } else {
            Ok(((level - fd) / self.log_weight()).exp())
        }
    }
}

pub(crate) fn normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}
