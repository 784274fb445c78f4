use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{random_boundary_point, Domain};
use crate::error::{Error, Result};
use crate::linalg::Point;

/// Domain and collar depth for samplers that need them.
#[derive(Debug, Clone)]
pub struct SamplerContext {
    pub domain: Option<Arc<Domain>>,
    pub epsilon: f64,
}

impl SamplerContext {
    pub fn new(domain: Arc<Domain>, epsilon: f64) -> Self {
        SamplerContext {
            domain: Some(domain),
            epsilon,
        }
    }

    pub fn planar() -> Self {
        SamplerContext {
            domain: None,
            epsilon: 0.0,
        }
    }

    fn domain(&self) -> Result<&Domain> {
        self.domain
            .as_deref()
            .ok_or_else(|| Error::Precondition("sampler needs a domain".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampler {
    /// Rejection sampling in the bounding box.
    UniformInterior,
    /// `p - t n_p` with `p` a random boundary point and `t = eps u^2`.
    BoundaryBiased,
    /// Mixture: boundary-biased with probability `boundary_fraction`.
    Mixed { boundary_fraction: f64 },
    /// Random vertices of a planar grid on the square `[0, side]^2`.
    SquareGrid { side: f64, per_side: usize },
}

impl Sampler {
    pub fn draw(&self, rng: &mut ChaCha8Rng, ctx: &SamplerContext) -> Result<Point> {
        match self {
            Sampler::UniformInterior => {
                let d = ctx.domain()?;
                let (lo, hi) = d.bbox();
                for _ in 0..100_000 {
                    let x = Point::from_fn(d.dim(), |i, _| rng.random_range(lo[i]..hi[i]));
                    if d.contains(&x) {
                        return Ok(x);
                    }
                }
                Err(Error::SamplingFailed("no interior point found in the bounding box".into()))
            }
            Sampler::BoundaryBiased => {
                let d = ctx.domain()?;
                for _ in 0..1000 {
                    let Some(p) = random_boundary_point(d, rng) else { continue };
                    let u: f64 = rng.random();
                    let t = ctx.epsilon * u * u;
                    let x = &p - d.normal(&p)? * t;
                    if t > 0.0 && d.contains(&x) {
                        return Ok(x);
                    }
                }
                Err(Error::SamplingFailed("boundary-biased sampling failed".into()))
            }
            Sampler::Mixed { boundary_fraction } => {
                if rng.random::<f64>() < *boundary_fraction {
                    Sampler::BoundaryBiased.draw(rng, ctx)
                } else {
                    Sampler::UniformInterior.draw(rng, ctx)
                }
            }
            Sampler::SquareGrid { side, per_side } => {
                let m = (*per_side).max(2);
                let step = side / (m - 1) as f64;
                let i = rng.random_range(0..m);
                let j = rng.random_range(0..m);
                Ok(Point::from_vec(vec![i as f64 * step, j as f64 * step]))
            }
        }
    }
}
