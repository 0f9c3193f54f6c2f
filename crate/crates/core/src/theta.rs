//! Empirical constants of the quantitative concavity inequality
//!
//! ```text
//! Σ f_i(λ)(μ_i - λ_i) ≥ θ + θ Σ f_i(λ) + f(μ) - f(λ),   |λ| ≥ R,  a ≤ f(λ) ≤ b,
//! ```
//!
//! and of the Gauss-map quantity `β_R(μ, σ) = sup ν_μ·ν_λ` over the level
//! set `{f = σ}` at radius `R`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{normalize, ConeSpec, EigenTuple, OperatorSpec};
use crate::error::{Error, Result};
use crate::sampling::{blend, cone_point, diagonal_direction, exterior_direction, SamplingPlan};

/// Relative tolerance on `|f(λ) - σ|` for level points.
pub const LEVEL_TOL: f64 = 1e-9;

/// Per-radius result of [`estimate_theta`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub radius: f64,
    pub samples: usize,
    /// `min [Σf_i(λ)(μ_i-λ_i) - f(μ) + f(λ)] / (1 + Σf_i(λ))`.
    pub theta_hat: Option<f64>,
    /// Minimum of the unnormalized numerator.
    pub min_tangent_gap: Option<f64>,
    pub max_abs_numerator: Option<f64>,
    pub witness_lambda: Option<Vec<f64>>,
    pub witness_mu: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub operator: OperatorSpec,
    pub k_points: Vec<EigenTuple>,
    pub band: [f64; 2],
    pub r_grid: Vec<f64>,
    pub rows: Vec<ThetaRow>,
    /// Smallest grid radius from which every `θ̂` is positive.
    pub r_hat: Option<f64>,
    /// `min θ̂` over the radii from `r_hat` on.
    pub theta: Option<f64>,
    pub plan: SamplingPlan,
}

impl ThetaEstimate {
    pub fn theta_hat(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.theta_hat).collect()
    }

    /// True when `θ̂` never drops by more than `noise` along the grid.
    pub fn nondecreasing(&self, noise: f64) -> bool {
        let t: Vec<f64> = self.rows.iter().filter_map(|r| r.theta_hat).collect();
        t.len() == self.rows.len() && t.windows(2).all(|w| w[1] >= w[0] - noise)
    }
}

/// Point of `{f = σ}` at Euclidean radius `r`, on the family of rays
/// `normalize((1 - w) 1 + w e)` from the diagonal toward the exterior
/// direction `e`, located by bisection in `w`.
pub(crate) fn level_point_at_radius(
    op: &OperatorSpec,
    cone: &ConeSpec,
    exterior: &[f64],
    sigma: f64,
    r: f64,
) -> Option<Vec<f64>> {
    let diag = diagonal_direction(op.n);
    let radius = |w: f64| -> Option<(f64, Vec<f64>)> {
        let d = blend(&diag, exterior, w);
        if !cone.membership(&d).inside {
            return None;
        }
        let t = op.ray_scale(op.eval_unchecked(&d), sigma).ok()?;
        t.is_finite().then_some((t, d))
    };
    let (r0, _) = radius(0.0)?;
    if r0 > r {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match radius(mid) {
            Some((t, _)) if t < r => lo = mid,
            _ => hi = mid,
        }
    }
    let (t, d) = radius(lo)?;
    let p: Vec<f64> = d.iter().map(|v| v * t).collect();
    let f = op.eval_unchecked(&p);
    let on_level = (f - sigma).abs() <= LEVEL_TOL * (1.0 + sigma.abs());
    let at_radius = (t - r).abs() <= 1e-6 * r;
    (on_level && at_radius).then_some(p)
}

fn check_points(op: &OperatorSpec, points: &[EigenTuple]) -> Result<()> {
    let cone = op.cone();
    for (i, p) in points.iter().enumerate() {
        if !cone.contains(p)?.inside {
            return Err(Error::Usage(format!("point {i} of K lies outside the cone")));
        }
    }
    Ok(())
}

fn check_level(op: &OperatorSpec, sigma: f64) -> Result<()> {
    if !sigma.is_finite() || (op.is_homogeneous() && sigma <= 0.0) {
        return Err(Error::Usage(format!("level {sigma} is outside the range of f")));
    }
    Ok(())
}

/// `Σ f_i(λ)(μ_i - λ_i) - f(μ) + f(λ)`.
fn numerator(g: &[f64], fl: f64, lambda: &[f64], mu: &[f64], fm: f64) -> f64 {
    let lin: f64 = g.iter().zip(mu.iter().zip(lambda)).map(|(gi, (m, l))| gi * (m - l)).sum();
    lin - fm + fl
}

struct Sample {
    ratio: f64,
    lambda: Vec<f64>,
    mu: usize,
}

/// Estimates `θ̂(R)` for every `R` in `r_grid`.
///
/// At each radius, sample `i` draws a level `σ` uniformly from the band and
/// an exterior direction from stream `theta` (shared across radii), and
/// evaluates the normalized gap against every point of `K`.
pub fn estimate_theta(
    op: &OperatorSpec,
    k_points: &[EigenTuple],
    band: [f64; 2],
    r_grid: &[f64],
    plan: &SamplingPlan,
) -> Result<ThetaEstimate> {
    plan.validate()?;
    let [a, b] = band;
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::Usage(format!("band [{a}, {b}] is empty")));
    }
    check_level(op, a)?;
    check_level(op, b)?;
    if k_points.is_empty() {
        return Err(Error::Usage("K must contain at least one point".into()));
    }
    check_points(op, k_points)?;
    if r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("radius grid must be positive and increasing".into()));
    }
    let cone = op.cone();
    let k_eval: Vec<(Vec<f64>, f64)> = k_points
        .iter()
        .map(|p| (p.values().to_vec(), op.eval_unchecked(p.values())))
        .collect();
    let mut rows = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let samples: Vec<Option<Sample>> = (0..plan.count)
            .into_par_iter()
            .map(|i| {
                let mut rng = plan.stream("theta", i);
                let sigma = if a == b { a } else { rng.random_range(a..=b) };
                let ext = exterior_direction(&cone, &mut rng)?;
                let lambda = level_point_at_radius(op, &cone, &ext, sigma, r)?;
                let (fl, g) = op.eval_grad_unchecked(&lambda);
                let sum: f64 = g.iter().sum();
                let mut best: Option<Sample> = None;
                for (m, (mu, fm)) in k_eval.iter().enumerate() {
                    let ratio = numerator(&g, fl, &lambda, mu, *fm) / (1.0 + sum);
                    if best.as_ref().is_none_or(|s| ratio < s.ratio) {
                        best = Some(Sample {
                            ratio,
                            lambda: lambda.clone(),
                            mu: m,
                        });
                    }
                }
                best
            })
            .collect();
        rows.push(summarize(r, samples, &k_eval, op));
    }
    let mut r_hat = None;
    let mut theta = None;
    for (i, row) in rows.iter().enumerate().rev() {
        match row.theta_hat {
            Some(t) if t > 0.0 => {
                r_hat = Some(r_grid[i]);
                theta = Some(theta.map_or(t, |m: f64| m.min(t)));
            }
            _ => break,
        }
    }
    Ok(ThetaEstimate {
        operator: *op,
        k_points: k_points.to_vec(),
        band,
        r_grid: r_grid.to_vec(),
        rows,
        r_hat,
        theta,
        plan: *plan,
    })
}

fn summarize(radius: f64, samples: Vec<Option<Sample>>, k_eval: &[(Vec<f64>, f64)], op: &OperatorSpec) -> ThetaRow {
    let mut count = 0;
    let mut best: Option<Sample> = None;
    let mut min_gap: Option<f64> = None;
    let mut max_abs: Option<f64> = None;
    for s in samples.into_iter().flatten() {
        count += 1;
        let (fl, g) = op.eval_grad_unchecked(&s.lambda);
        for (mu, fm) in k_eval {
            let num = numerator(&g, fl, &s.lambda, mu, *fm);
            min_gap = Some(min_gap.map_or(num, |m| m.min(num)));
            max_abs = Some(max_abs.map_or(num.abs(), |m| m.max(num.abs())));
        }
        if best.as_ref().is_none_or(|b| s.ratio < b.ratio) {
            best = Some(s);
        }
    }
    ThetaRow {
        radius,
        samples: count,
        theta_hat: best.as_ref().map(|b| b.ratio),
        min_tangent_gap: min_gap,
        max_abs_numerator: max_abs,
        witness_lambda: best.as_ref().map(|b| b.lambda.clone()),
        witness_mu: best.as_ref().map(|b| k_eval[b.mu].0.clone()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub radius: f64,
    pub samples: usize,
    /// `max ν_μ·ν_λ` over the sampled level points at `radius`.
    pub beta: f64,
    pub witness: Vec<f64>,
    /// `min ν_μ·(λ - μ)` over sampled level points.
    pub nearest_offset: f64,
    /// Level point attaining `nearest_offset`.
    pub nearest_point: Vec<f64>,
}

/// Estimates `β_R(μ, σ)`.
///
/// The nearest-point set `{λ ∈ ∂Γ^σ : ν_λ = ν_μ}` is approximated by the
/// minimizer of `ν_μ·λ` over level points on sampled rays; `R` must exceed
/// its norm.
pub fn beta_r(op: &OperatorSpec, mu: &EigenTuple, sigma: f64, r: f64, plan: &SamplingPlan) -> Result<BetaEstimate> {
    plan.validate()?;
    check_level(op, sigma)?;
    check_points(op, std::slice::from_ref(mu))?;
    let cone = op.cone();
    let nu_mu = op.normal(mu)?;
    let offset = |p: &[f64]| -> f64 { nu_mu.iter().zip(p.iter().zip(mu.values())).map(|(n, (a, b))| n * (a - b)).sum() };
    let unit = SamplingPlan {
        radial_range: [1.0, 1.0],
        ..*plan
    };
    let nearest: Vec<Vec<f64>> = (0..=plan.count)
        .into_par_iter()
        .map(|i| {
            let d = if i == 0 {
                diagonal_direction(op.n)
            } else {
                let mut rng = plan.stream("beta/nearest", i);
                cone_point(&cone, &unit, i, &mut rng)
            };
            let t = op.ray_scale(op.eval_unchecked(&d), sigma).ok()?;
            let p: Vec<f64> = d.iter().map(|v| v * t).collect();
            p.iter().all(|v| v.is_finite()).then_some(p)
        })
        .collect::<Vec<Option<Vec<f64>>>>()
        .into_iter()
        .flatten()
        .collect();
    let (nearest_offset, nearest_point) = nearest
        .into_iter()
        .map(|p| (offset(&p), p))
        .fold(None, |acc: Option<(f64, Vec<f64>)>, x| match acc {
            Some(a) if a.0 <= x.0 => Some(a),
            _ => Some(x),
        })
        .expect("diagonal level point always exists");
    let near_norm = nearest_point.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r.is_nan() || r <= near_norm {
        return Err(Error::Usage(format!(
            "radius {r} must exceed the nearest-point norm {near_norm}"
        )));
    }
    let samples: Vec<Option<(f64, Vec<f64>)>> = (0..plan.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.stream("beta/level", i);
            let ext = exterior_direction(&cone, &mut rng)?;
            let lambda = level_point_at_radius(op, &cone, &ext, sigma, r)?;
            let nu = normalize(&op.eval_grad_unchecked(&lambda).1);
            let c: f64 = nu.iter().zip(&nu_mu).map(|(a, b)| a * b).sum();
            Some((c, lambda))
        })
        .collect();
    let mut count = 0;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (c, l) in samples.into_iter().flatten() {
        count += 1;
        if best.as_ref().is_none_or(|b| c > b.0) {
            best = Some((c, l));
        }
    }
    let (beta, witness) = best.ok_or_else(|| {
        Error::Usage(format!("no level point of {sigma} found at radius {r}"))
    })?;
    Ok(BetaEstimate {
        mu: mu.values().to_vec(),
        sigma,
        radius: r,
        samples: count,
        beta,
        witness,
        nearest_offset,
        nearest_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(count: usize) -> SamplingPlan {
        SamplingPlan {
            count,
            seed: 7,
            ..SamplingPlan::default()
        }
    }

    #[test]
    fn level_points_hit_level_and_radius() {
        let op = OperatorSpec::sigma_k_root(3, 2).unwrap();
        let cone = op.cone();
        let p = plan(1);
        for i in 0..50 {
            let mut rng = p.stream("t", i);
            let ext = exterior_direction(&cone, &mut rng).unwrap();
            for r in [10.0, 1e3] {
                let l = level_point_at_radius(&op, &cone, &ext, 1.5, r).unwrap();
                let n = l.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((n - r).abs() <= 1e-6 * r);
                assert!((op.eval_unchecked(&l) - 1.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn theta_positive_for_sigma2() {
        let op = OperatorSpec::sigma_k_root(3, 2).unwrap();
        let k = [EigenTuple::diagonal(3, 1.0).unwrap()];
        let est = estimate_theta(&op, &k, [0.5, 2.0], &[10.0, 100.0, 1000.0], &plan(500)).unwrap();
        assert_eq!(est.rows.len(), 3);
        assert!(est.rows.iter().all(|r| r.samples > 400));
        assert!(est.rows[2].theta_hat.unwrap() > 0.0);
        assert!(est.nondecreasing(1e-3));
        assert_eq!(est.r_hat, Some(10.0));
    }

    #[test]
    fn linear_numerator_vanishes() {
        let op = OperatorSpec::sigma_k_root(3, 1).unwrap();
        let k = [EigenTuple::diagonal(3, 1.0).unwrap()];
        let est = estimate_theta(&op, &k, [0.5, 2.0], &[10.0, 100.0, 1000.0], &plan(300)).unwrap();
        for row in &est.rows {
            assert!(row.samples > 0);
            assert!(row.max_abs_numerator.unwrap() <= 1e-10);
        }
    }

    #[test]
    fn theta_rejects_bad_band() {
        let op = OperatorSpec::sigma_k_root(3, 2).unwrap();
        let k = [EigenTuple::diagonal(3, 1.0).unwrap()];
        assert!(estimate_theta(&op, &k, [-1.0, 2.0], &[10.0], &plan(5)).is_err());
        assert!(estimate_theta(&op, &k, [2.0, 1.0], &[10.0], &plan(5)).is_err());
    }

    #[test]
    fn beta_monotone_and_below_one() {
        let op = OperatorSpec::sigma_k_root(3, 2).unwrap();
        let mu = EigenTuple::diagonal(3, 1.0).unwrap();
        let s = 3f64.sqrt();
        let b10 = beta_r(&op, &mu, s, 10.0, &plan(500)).unwrap();
        let b100 = beta_r(&op, &mu, s, 100.0, &plan(500)).unwrap();
        assert!(b10.beta < 1.0 && b100.beta < 1.0);
        assert!(b100.beta <= b10.beta + 1e-3);
        assert!(b10.nearest_offset.abs() < 1e-12);
        assert!(matches!(beta_r(&op, &mu, s, 1.0, &plan(10)), Err(Error::Usage(_))));
    }
}
