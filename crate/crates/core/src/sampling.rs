//! Reproducible sampling of cone points and auxiliary vectors.
//!
//! Every sample draws from its own ChaCha stream, keyed by the plan seed, a
//! stream name and the sample index, so results never depend on the order in
//! which worker threads visit samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cone::{normalize, ConeSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionScheme {
    UniformOnCone,
    DiagonalBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    pub count: usize,
    /// `[r_min, r_max]`, sampled log-uniformly.
    pub radial_range: [f64; 2],
    pub direction_scheme: DirectionScheme,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            seed: 0,
            count: 1000,
            radial_range: [1e-2, 1e2],
            direction_scheme: DirectionScheme::UniformOnCone,
        }
    }
}

/// One in this many cone samples is forced close to the cone boundary.
pub const NEAR_BOUNDARY_EVERY: usize = 4;

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.radial_range;
        if self.count == 0 {
            return Err(Error::InvalidInput("sampling count must be at least 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidInput(format!(
                "radial range must satisfy 0 < r_min <= r_max, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Generator for sample `index` of the stream `name`.
    pub fn stream(&self, name: &str, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(name.as_bytes()));
        rng.set_stream(index as u64);
        rng
    }

    pub fn radius(&self, rng: &mut impl Rng) -> f64 {
        let [lo, hi] = self.radial_range;
        if lo == hi {
            return lo;
        }
        (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn gaussian_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn unit_vector(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let g = gaussian_vector(n, rng);
        if g.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
            return normalize(&g);
        }
    }
}

/// Unit vector orthogonal to the unit vector `nu`.
pub fn orthogonal_unit(nu: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut g = gaussian_vector(nu.len(), rng);
        let dot: f64 = g.iter().zip(nu).map(|(a, b)| a * b).sum();
        for (gi, ni) in g.iter_mut().zip(nu) {
            *gi -= dot * ni;
        }
        if g.iter().map(|v| v * v).sum::<f64>() > 1e-12 {
            return normalize(&g);
        }
    }
}

pub fn diagonal_direction(n: usize) -> Vec<f64> {
    vec![1.0 / (n as f64).sqrt(); n]
}

/// `normalize((1 - w) a + w b)`.
pub fn blend(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    normalize(&a.iter().zip(b).map(|(x, y)| (1.0 - w) * x + w * y).collect::<Vec<_>>())
}

const MAX_TRIES: usize = 10_000;

/// Unit direction outside the closed cone, or `None` when the cone is
/// (numerically) everything.
pub fn exterior_direction(cone: &ConeSpec, rng: &mut impl Rng) -> Option<Vec<f64>> {
    (0..MAX_TRIES)
        .map(|_| unit_vector(cone.n, rng))
        .find(|d| cone.membership(d).margin < 0.0)
}

/// Blend parameter of the cone boundary on the path from the diagonal to an
/// exterior direction.
pub fn boundary_parameter(cone: &ConeSpec, exterior: &[f64]) -> f64 {
    let diag = diagonal_direction(cone.n);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cone.membership(&blend(&diag, exterior, mid)).inside {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Unit direction inside the cone whose blend parameter sits a relative
/// distance `eps` before the boundary.
pub fn near_boundary_direction(cone: &ConeSpec, exterior: &[f64], eps: f64) -> Vec<f64> {
    let diag = diagonal_direction(cone.n);
    let wb = boundary_parameter(cone, exterior);
    let mut e = eps;
    loop {
        let d = blend(&diag, exterior, wb * (1.0 - e));
        if cone.membership(&d).inside {
            return d;
        }
        e *= 2.0;
    }
}

/// Unit direction drawn per `scheme`, falling back to the diagonal if
/// rejection sampling fails.
pub fn cone_direction(cone: &ConeSpec, scheme: DirectionScheme, rng: &mut impl Rng) -> Vec<f64> {
    let n = cone.n;
    let diag = diagonal_direction(n);
    for _ in 0..MAX_TRIES {
        let d = match scheme {
            DirectionScheme::UniformOnCone => unit_vector(n, rng),
            DirectionScheme::DiagonalBiased => {
                let g = unit_vector(n, rng);
                let s: f64 = rng.random::<f64>();
                normalize(&diag.iter().zip(&g).map(|(a, b)| a + 2.0 * s * b).collect::<Vec<_>>())
            }
        };
        if cone.membership(&d).inside {
            return d;
        }
    }
    diag
}

/// Cone point for sample `index`: a direction from the plan's scheme, or a
/// forced near-boundary direction every [`NEAR_BOUNDARY_EVERY`]-th index,
/// scaled by a log-uniform radius.
pub fn cone_point(cone: &ConeSpec, plan: &SamplingPlan, index: usize, rng: &mut impl Rng) -> Vec<f64> {
    let d = if index % NEAR_BOUNDARY_EVERY == NEAR_BOUNDARY_EVERY - 1 {
        near_boundary_sample(cone, rng, 1e-10, 1e-2)
            .unwrap_or_else(|| cone_direction(cone, plan.direction_scheme, rng))
    } else {
        cone_direction(cone, plan.direction_scheme, rng)
    };
    let r = plan.radius(rng);
    let p: Vec<f64> = d.iter().map(|v| v * r).collect();
    if cone.membership(&p).inside {
        p
    } else {
        diagonal_direction(cone.n).iter().map(|v| v * r).collect()
    }
}

/// Unit direction with log-uniform relative boundary distance in
/// `[eps_lo, eps_hi]`.
pub fn near_boundary_sample(
    cone: &ConeSpec,
    rng: &mut impl Rng,
    eps_lo: f64,
    eps_hi: f64,
) -> Option<Vec<f64>> {
    let ext = exterior_direction(cone, rng)?;
    let eps = (eps_lo.ln() + rng.random::<f64>() * (eps_hi.ln() - eps_lo.ln())).exp();
    Some(near_boundary_direction(cone, &ext, eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::ConeKind;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let plan = SamplingPlan::default();
        let a: f64 = plan.stream("x", 3).random();
        let b: f64 = plan.stream("x", 3).random();
        let c: f64 = plan.stream("x", 4).random();
        let d: f64 = plan.stream("y", 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn cone_points_are_members() {
        let cone = ConeSpec::new(ConeKind::GammaK, 4, 3).unwrap();
        let plan = SamplingPlan::default();
        for i in 0..200 {
            let mut rng = plan.stream("t", i);
            assert!(cone.membership(&cone_point(&cone, &plan, i, &mut rng)).inside);
        }
    }

    #[test]
    fn near_boundary_has_small_margin() {
        let cone = ConeSpec::new(ConeKind::GammaK, 3, 2).unwrap();
        let mut rng = SamplingPlan::default().stream("b", 0);
        let d = near_boundary_sample(&cone, &mut rng, 1e-9, 1e-9).unwrap();
        let m = cone.membership(&d);
        assert!(m.inside && m.margin < 1e-6, "{m:?}");
    }

    #[test]
    fn orthogonal_unit_is_orthogonal() {
        let mut rng = SamplingPlan::default().stream("o", 0);
        let nu = normalize(&[1.0, 2.0, 3.0]);
        let t = orthogonal_unit(&nu, &mut rng);
        let dot: f64 = t.iter().zip(&nu).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-15);
    }
}
