//! Sampled verification of the structure conditions on `f`, `A` and `ψ`.
//!
//! Each report keeps the sample attaining the worst margin; re-evaluating
//! that witness with [`operator_margin`] or [`tensor_margin`] reproduces the
//! reported margin exactly.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{EigenTuple, OperatorSpec};
use crate::error::{Error, Result};
use crate::plugins::{ATensorSpec, PsiSpec};
use crate::sampling::{cone_point, near_boundary_sample, orthogonal_unit, unit_vector, SamplingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    /// `f_i > 0`.
    #[serde(rename = "C3I-20")]
    Ellipticity,
    /// `f` concave.
    #[serde(rename = "C3I-30")]
    Concavity,
    /// `sup_{∂Γ} f ≤ 0`.
    #[serde(rename = "C3I-40")]
    BoundarySup,
    /// `Σ f_i λ_i ≥ 0`.
    #[serde(rename = "C3I-45")]
    EulerSum,
    /// Tangent planes cut level sets in nonempty compact sets.
    #[serde(rename = "CgjI100")]
    TangentCompact,
    /// `f(t 1) → ∞`.
    #[serde(rename = "CgjI105")]
    DiagonalGrowth,
    /// `f_j ≥ ν_0 (1 + Σ f_i)` when `λ_j < 0`.
    #[serde(rename = "C3I-50")]
    NegativeDirection,
    /// Growth of `p·∇_x A^{ξξ} + |p|² A^{ξξ}_z` and `p·∇_x ψ + |p|² ψ_z`.
    #[serde(rename = "CA1")]
    GradientGrowth,
    /// `-ψ` and `A^{ξξ}` concave in `p`.
    #[serde(rename = "CA2")]
    PConcavity,
    /// `A^{ξξ}_{pp}[η,η] ≤ -c_0 |ξ|²|η|²` for `ξ ⊥ η`.
    #[serde(rename = "CA3")]
    Mtw,
    /// `-ψ_z ≥ 0` and `A^{ξξ}_z ≥ 0`.
    #[serde(rename = "CA4")]
    ZMonotone,
    /// Growth of `-ψ_z`, `p·D_pψ` and `-p·D_pA^{ξξ}/|ξ|²`.
    #[serde(rename = "CA5")]
    PGrowth,
    /// `ψ ≥ c_1` for `|p| ≥ K`.
    #[serde(rename = "CA6")]
    PsiLowerBound,
    /// `|A^{ξη}| ≤ ψ̄ |ξ||η| (1 + |p|^γ)` for `ξ ⊥ η`.
    #[serde(rename = "CgjG20xx")]
    OffDiagonalGrowth,
}

impl ConditionId {
    pub const OPERATOR: [ConditionId; 7] = [
        ConditionId::Ellipticity,
        ConditionId::Concavity,
        ConditionId::BoundarySup,
        ConditionId::EulerSum,
        ConditionId::TangentCompact,
        ConditionId::DiagonalGrowth,
        ConditionId::NegativeDirection,
    ];
    pub const TENSOR: [ConditionId; 7] = [
        ConditionId::GradientGrowth,
        ConditionId::PConcavity,
        ConditionId::Mtw,
        ConditionId::ZMonotone,
        ConditionId::PGrowth,
        ConditionId::PsiLowerBound,
        ConditionId::OffDiagonalGrowth,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ConditionId::Ellipticity => "C3I-20",
            ConditionId::Concavity => "C3I-30",
            ConditionId::BoundarySup => "C3I-40",
            ConditionId::EulerSum => "C3I-45",
            ConditionId::TangentCompact => "CgjI100",
            ConditionId::DiagonalGrowth => "CgjI105",
            ConditionId::NegativeDirection => "C3I-50",
            ConditionId::GradientGrowth => "CA1",
            ConditionId::PConcavity => "CA2",
            ConditionId::Mtw => "CA3",
            ConditionId::ZMonotone => "CA4",
            ConditionId::PGrowth => "CA5",
            ConditionId::PsiLowerBound => "CA6",
            ConditionId::OffDiagonalGrowth => "CgjG20xx",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ConditionId::OPERATOR
            .into_iter()
            .chain(ConditionId::TENSOR)
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::Usage(format!("unknown condition id {s:?}")))
    }

    pub fn is_operator(self) -> bool {
        ConditionId::OPERATOR.contains(&self)
    }

    /// Margins below `-tolerance` are violations.
    pub fn tolerance(self) -> f64 {
        match self {
            ConditionId::Concavity | ConditionId::PConcavity => 1e-10,
            ConditionId::BoundarySup => 1e-2,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

/// The sample attaining a report's worst margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Point {
        lambda: Vec<f64>,
    },
    Pair {
        lambda: Vec<f64>,
        mu: Vec<f64>,
    },
    Ray {
        lambda: Vec<f64>,
        direction: Vec<f64>,
        sigma: f64,
        probe_radius: f64,
    },
    Tensor {
        node: usize,
        x: Vec<f64>,
        z: f64,
        p: Vec<f64>,
        q: Vec<f64>,
        xi: Vec<f64>,
        eta: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub condition_id: ConditionId,
    pub samples: usize,
    /// `None` when no sample qualified.
    pub worst_margin: Option<f64>,
    pub witness: Option<Witness>,
    pub verdict: Verdict,
    pub tolerance: f64,
    /// Estimated constant where the condition has one (`ν_0`, `c_0`).
    pub estimate: Option<f64>,
}

impl AuditReport {
    fn from_samples(
        condition_id: ConditionId,
        samples: Vec<Option<(f64, Witness)>>,
        tolerance: f64,
    ) -> Self {
        let mut count = 0;
        let mut worst: Option<(f64, Witness)> = None;
        for (m, w) in samples.into_iter().flatten() {
            count += 1;
            if worst.as_ref().is_none_or(|(best, _)| m < *best) {
                worst = Some((m, w));
            }
        }
        let (worst_margin, witness) = match worst {
            Some((m, w)) => (Some(m), Some(w)),
            None => (None, None),
        };
        AuditReport {
            condition_id,
            samples: count,
            worst_margin,
            witness,
            verdict: verdict(worst_margin, tolerance),
            tolerance,
            estimate: None,
        }
    }
}

fn verdict(worst: Option<f64>, tolerance: f64) -> Verdict {
    match worst {
        None => Verdict::Inconclusive,
        Some(m) if m < -tolerance => Verdict::Violated,
        Some(_) => Verdict::Holds,
    }
}

/// Bounds used by the growth conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub psi_bar1: f64,
    pub psi_bar2: f64,
    pub psi_bar: f64,
    pub c1: f64,
    /// Gradient magnitudes at which the growth bounds are tested.
    pub p_magnitudes: [f64; 3],
    /// Required MTW constant.
    pub c0: f64,
}

impl Default for GrowthSpec {
    fn default() -> Self {
        GrowthSpec {
            gamma1: 1.0,
            gamma2: 1.0,
            gamma: 1.0,
            psi_bar1: 1.0,
            psi_bar2: 1.0,
            psi_bar: 1.0,
            c1: 0.5,
            p_magnitudes: [10.0, 1e2, 1e3],
            c0: 1e-9,
        }
    }
}

impl GrowthSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.gamma1, self.gamma2, self.gamma];
        if !pos.iter().all(|&g| g.is_finite() && g > 0.0) {
            return Err(Error::InvalidInput("growth exponents must be positive".into()));
        }
        let nonneg = [self.psi_bar1, self.psi_bar2, self.psi_bar, self.c1, self.c0];
        if !nonneg.iter().all(|&v| v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidInput("growth bounds must be finite and nonnegative".into()));
        }
        if !self.p_magnitudes.iter().all(|&v| v.is_finite() && v > 0.0) {
            return Err(Error::InvalidInput("gradient magnitudes must be positive".into()));
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const GROWTH_POINT: f64 = 1e6;

/// Margin of an operator condition at a witness.
pub fn operator_margin(op: &OperatorSpec, cond: ConditionId, witness: &Witness) -> Result<f64> {
    let point = |v: &[f64]| EigenTuple::new(v.to_vec());
    match (cond, witness) {
        (ConditionId::Ellipticity, Witness::Point { lambda }) => {
            Ok(op.grad(&point(lambda)?)?.into_iter().fold(f64::INFINITY, f64::min))
        }
        (ConditionId::Concavity, Witness::Pair { lambda, mu }) => {
            let mid: Vec<f64> = lambda.iter().zip(mu).map(|(a, b)| 0.5 * (a + b)).collect();
            Ok(op.eval(&point(&mid)?)? - 0.5 * (op.eval(&point(lambda)?)? + op.eval(&point(mu)?)?))
        }
        (ConditionId::BoundarySup, Witness::Point { lambda }) => Ok(-op.eval(&point(lambda)?)?),
        (ConditionId::EulerSum, Witness::Point { lambda }) => {
            Ok(dot(&op.grad(&point(lambda)?)?, lambda))
        }
        (ConditionId::DiagonalGrowth, Witness::Point { lambda }) => {
            let one = EigenTuple::diagonal(op.n, 1.0)?;
            Ok(op.eval(&point(lambda)?)? - op.eval(&one)?)
        }
        (ConditionId::NegativeDirection, Witness::Point { lambda }) => {
            let g = op.grad(&point(lambda)?)?;
            let total: f64 = g.iter().sum();
            lambda
                .iter()
                .zip(&g)
                .filter(|(l, _)| **l < 0.0)
                .map(|(_, gj)| gj / (1.0 + total))
                .reduce(f64::min)
                .ok_or_else(|| Error::Usage("witness has no negative entry".into()))
        }
        (
            ConditionId::TangentCompact,
            Witness::Ray {
                lambda,
                direction,
                sigma,
                probe_radius,
            },
        ) => Ok(match ray_exit(op, lambda, direction, *sigma, *probe_radius) {
            Some(r) => 1.0 - r / probe_radius,
            None => -1.0,
        }),
        _ => Err(Error::Usage(format!(
            "witness does not fit operator condition {}",
            cond.id()
        ))),
    }
}

/// Runs one operator condition over the sampling plan.
pub fn audit_operator(op: &OperatorSpec, cond: ConditionId, plan: &SamplingPlan) -> Result<AuditReport> {
    plan.validate()?;
    if !cond.is_operator() {
        return Err(Error::Usage(format!("{} is not an operator condition", cond.id())));
    }
    let cone = op.cone();
    let stream = format!("audit/{}", cond.id());
    let tol = cond.tolerance();
    let sample = |i: usize| -> Result<Option<(f64, Witness)>> {
        let mut rng = plan.stream(&stream, i);
        let witness = match cond {
            ConditionId::Concavity => Witness::Pair {
                lambda: cone_point(&cone, plan, i, &mut rng),
                mu: cone_point(&cone, plan, i, &mut rng),
            },
            ConditionId::BoundarySup => {
                let Some(d) = near_boundary_sample(&cone, &mut rng, 1e-15, 1e-12) else {
                    return Ok(None);
                };
                if cone.membership(&d).margin >= 1e-3 {
                    return Ok(None);
                }
                Witness::Point { lambda: d }
            }
            ConditionId::NegativeDirection => {
                let lambda = cone_point(&cone, plan, i, &mut rng);
                if !lambda.iter().any(|&v| v < 0.0) {
                    return Ok(None);
                }
                Witness::Point { lambda }
            }
            _ => Witness::Point {
                lambda: cone_point(&cone, plan, i, &mut rng),
            },
        };
        Ok(Some((operator_margin(op, cond, &witness)?, witness)))
    };
    match cond {
        ConditionId::TangentCompact => {
            let lambda = EigenTuple::diagonal(op.n, 2.0)?;
            let sigma = op.eval(&EigenTuple::diagonal(op.n, 1.0)?)?;
            check_tangent_compactness(op, sigma, &lambda, DEFAULT_PROBE_RADIUS, plan)
        }
        ConditionId::DiagonalGrowth => {
            let witness = Witness::Point {
                lambda: vec![GROWTH_POINT; op.n],
            };
            let m = operator_margin(op, cond, &witness)?;
            Ok(AuditReport::from_samples(cond, vec![Some((m, witness))], tol))
        }
        _ => {
            let samples = (0..plan.count)
                .into_par_iter()
                .map(sample)
                .collect::<Result<Vec<_>>>()?;
            let mut report = AuditReport::from_samples(cond, samples, tol);
            if cond == ConditionId::NegativeDirection {
                report.estimate = report.worst_margin;
            }
            Ok(report)
        }
    }
}

pub const DEFAULT_PROBE_RADIUS: f64 = 1e3;

/// First `r ≤ probe_radius` at which `λ + rτ` leaves `{f ≥ σ}`.
fn ray_exit(op: &OperatorSpec, lambda: &[f64], tau: &[f64], sigma: f64, probe_radius: f64) -> Option<f64> {
    let cone = op.cone();
    let at = |r: f64| -> Vec<f64> { lambda.iter().zip(tau).map(|(l, t)| l + r * t).collect() };
    let inside = |r: f64| {
        let p = at(r);
        cone.membership(&p).inside && op.eval_unchecked(&p) >= sigma
    };
    let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut prev = 0.0;
    let mut r = 1e-3 * (1.0 + norm);
    loop {
        let r_eval = r.min(probe_radius);
        if !inside(r_eval) {
            let (mut lo, mut hi) = (prev, r_eval);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if inside(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(hi);
        }
        if r_eval >= probe_radius {
            return None;
        }
        prev = r_eval;
        r *= 2.0;
    }
}

/// Probes the tangent plane of the level set `{f = f(λ)}` at `λ` for its
/// intersection with `{f ≥ σ}`.
///
/// Each sampled tangent direction contributes margin `1 - r/probe_radius`
/// where `r` is the exit radius, or `-1` if the ray stays inside up to the
/// probe radius. With no exit at all the verdict is inconclusive.
pub fn check_tangent_compactness(
    op: &OperatorSpec,
    sigma: f64,
    lambda: &EigenTuple,
    probe_radius: f64,
    plan: &SamplingPlan,
) -> Result<AuditReport> {
    plan.validate()?;
    let f = op.eval(lambda)?;
    if f <= sigma {
        return Err(Error::Usage(format!(
            "point must lie strictly above the level: f = {f}, sigma = {sigma}"
        )));
    }
    if !(probe_radius.is_finite() && probe_radius > 0.0) {
        return Err(Error::Usage(format!("probe radius must be positive, got {probe_radius}")));
    }
    let nu = op.normal(lambda)?;
    let cond = ConditionId::TangentCompact;
    let samples: Vec<(f64, Witness)> = (0..plan.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.stream("audit/CgjI100", i);
            let witness = Witness::Ray {
                lambda: lambda.values().to_vec(),
                direction: orthogonal_unit(&nu, &mut rng),
                sigma,
                probe_radius,
            };
            operator_margin(op, cond, &witness).map(|m| (m, witness))
        })
        .collect::<Result<_>>()?;
    let exits = samples.iter().filter(|(m, _)| *m >= 0.0).count();
    let max_exit = samples
        .iter()
        .filter(|(m, _)| *m >= 0.0)
        .map(|(m, _)| (1.0 - m) * probe_radius)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    let mut report = AuditReport::from_samples(cond, samples.into_iter().map(Some).collect(), 0.0);
    if exits == 0 {
        report.verdict = Verdict::Inconclusive;
        log::info!("no tangent ray left the superlevel set within radius {probe_radius}");
    }
    report.estimate = max_exit;
    Ok(report)
}

/// Margin of a tensor / right-hand-side condition at a witness.
pub fn tensor_margin(
    a: &ATensorSpec,
    psi: &PsiSpec,
    growth: &GrowthSpec,
    cond: ConditionId,
    witness: &Witness,
) -> Result<f64> {
    let Witness::Tensor {
        node,
        x,
        z,
        p,
        q,
        xi,
        eta,
    } = witness
    else {
        return Err(Error::Usage(format!("witness does not fit tensor condition {}", cond.id())));
    };
    let (node, z) = (*node, *z);
    let axx = |p: &[f64]| a.quadratic_form(x, z, p, xi, xi);
    let xi2 = dot(xi, xi);
    let eta2 = dot(eta, eta);
    let pn = dot(p, p).sqrt();
    match cond {
        ConditionId::PConcavity => {
            let mid: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
            let ga = axx(&mid) - 0.5 * (axx(p) + axx(q));
            let gp = 0.5 * (psi.eval(node, z, p).value + psi.eval(node, z, q).value)
                - psi.eval(node, z, &mid).value;
            Ok(ga.min(gp))
        }
        ConditionId::Mtw => Ok(-a.pp_form(x, z, p, xi, eta) / (xi2 * eta2) - growth.c0),
        ConditionId::ZMonotone => {
            let az = a.eval(x, z, p).dz.bilinear(xi, xi);
            Ok((-psi.eval(node, z, p).dz).min(az))
        }
        ConditionId::GradientGrowth => {
            let az = a.eval(x, z, p).dz.bilinear(xi, xi);
            let qa = a.x_directional(x, z, p, xi) + pn * pn * az;
            let qp = psi.x_directional(node, z, p)? + pn * pn * psi.eval(node, z, p).dz;
            let ma = growth.psi_bar1 * xi2 * (1.0 + pn.powf(growth.gamma1)) - qa;
            let mp = qp + growth.psi_bar2 * (1.0 + pn.powf(growth.gamma2));
            Ok(ma.min(mp))
        }
        ConditionId::PGrowth => {
            let e = a.eval(x, z, p);
            let pdp_a: f64 = p.iter().zip(&e.dp).map(|(pk, d)| pk * d.bilinear(xi, xi)).sum();
            let pdp_psi = dot(p, &psi.dp(node, z, p));
            let worst = (-psi.eval(node, z, p).dz).max(pdp_psi).max(-pdp_a / xi2);
            Ok(growth.psi_bar * (1.0 + pn.powf(growth.gamma)) - worst)
        }
        ConditionId::PsiLowerBound => Ok(psi.eval(node, z, p).value - growth.c1),
        ConditionId::OffDiagonalGrowth => {
            let bound = growth.psi_bar * (xi2 * eta2).sqrt() * (1.0 + pn.powf(growth.gamma));
            Ok(bound - a.quadratic_form(x, z, p, xi, eta).abs())
        }
        _ => Err(Error::Usage(format!("{} is not a tensor condition", cond.id()))),
    }
}

/// Runs one tensor / right-hand-side condition over the sampling plan in
/// spatial dimension `dim`.
pub fn audit_tensor(
    a: &ATensorSpec,
    psi: &PsiSpec,
    dim: usize,
    cond: ConditionId,
    plan: &SamplingPlan,
    growth: &GrowthSpec,
) -> Result<AuditReport> {
    plan.validate()?;
    growth.validate()?;
    a.validate()?;
    psi.validate()?;
    if cond.is_operator() {
        return Err(Error::Usage(format!("{} is not a tensor condition", cond.id())));
    }
    if dim < 2 {
        return Err(Error::InvalidInput(format!("dimension {dim} must be >= 2")));
    }
    let growth_test = matches!(
        cond,
        ConditionId::GradientGrowth
            | ConditionId::PGrowth
            | ConditionId::PsiLowerBound
            | ConditionId::OffDiagonalGrowth
    );
    let stream = format!("audit/{}", cond.id());
    let nodes = psi.spatial_len();
    let samples = (0..plan.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = plan.stream(&stream, i);
            let gradient = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
                let r = if growth_test {
                    growth.p_magnitudes[i % 3]
                } else {
                    plan.radius(rng)
                };
                unit_vector(dim, rng).into_iter().map(|v| v * r).collect()
            };
            let node = rng.random_range(0..nodes);
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let z = rng.random_range(-2.0..2.0);
            let p = gradient(&mut rng);
            let q = gradient(&mut rng);
            let xi = unit_vector(dim, &mut rng);
            let eta = orthogonal_unit(&xi, &mut rng);
            let witness = Witness::Tensor {
                node,
                x,
                z,
                p,
                q,
                xi,
                eta,
            };
            tensor_margin(a, psi, growth, cond, &witness).map(|m| Some((m, witness)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = AuditReport::from_samples(cond, samples, cond.tolerance());
    if cond == ConditionId::Mtw {
        report.estimate = report.worst_margin.map(|m| m + growth.c0);
    }
    Ok(report)
}

/// Re-evaluates a report's witness; equals `worst_margin` for reports from
/// this module.
pub fn reevaluate(
    report: &AuditReport,
    op: Option<&OperatorSpec>,
    tensor: Option<(&ATensorSpec, &PsiSpec, &GrowthSpec)>,
) -> Result<Option<f64>> {
    let Some(w) = &report.witness else {
        return Ok(None);
    };
    let cond = report.condition_id;
    if cond.is_operator() {
        let op = op.ok_or_else(|| Error::Usage("operator required".into()))?;
        operator_margin(op, cond, w).map(Some)
    } else {
        let (a, psi, g) = tensor.ok_or_else(|| Error::Usage("tensor and psi required".into()))?;
        tensor_margin(a, psi, g, cond, w).map(Some)
    }
}
