use nalgebra::DVector;
use rand::Rng;

use super::Domain;
use crate::error::{Error, Result};
use crate::linalg::{Halton, Point};

/// Moves `x` onto `{rho = 0}` by Newton steps along the gradient.
pub fn flow_to_boundary(domain: &Domain, x: &Point, tol: f64, max_iter: usize) -> Option<Point> {
    let mut p = x.clone();
    let cap = 0.25 * domain.diagonal();
    for _ in 0..max_iter {
        let r = domain.rho(&p);
        if !r.is_finite() {
            return None;
        }
        if r.abs() <= tol {
            return Some(p);
        }
        let g = domain.gradient(&p);
        let gg = g.norm_squared();
        if !(gg > 1e-24) {
            return None;
        }
        let mut step = &g * (r / gg);
        let len = step.norm();
        if len > cap {
            step *= cap / len;
        }
        p -= step;
    }
    None
}

/// Boundary points obtained by pushing Halton points of the bounding box
/// onto the boundary. Deterministic in `seed`.
pub fn boundary_samples(domain: &Domain, count: usize, seed: u64) -> Result<Vec<Point>> {
    let n = domain.dim();
    let (lo, hi) = domain.bbox();
    let mut halton = Halton::new(n, seed);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 50 * count.max(1);
    let mut attempts = 0;
    while out.len() < count {
        if attempts >= max_attempts {
            return Err(Error::SamplingFailed(format!(
                "only {} of {} boundary samples after {} attempts",
                out.len(),
                count,
                attempts
            )));
        }
        attempts += 1;
        let u = halton.next_point();
        let x = DVector::from_iterator(n, (0..n).map(|i| lo[i] + u[i] * (hi[i] - lo[i])));
        if let Some(p) = flow_to_boundary(domain, &x, 1e-13, 200) {
            if domain.gradient(&p).norm() > 1e-12 {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// A boundary point from a uniformly random box point.
pub fn random_boundary_point<R: Rng>(domain: &Domain, rng: &mut R) -> Option<Point> {
    let n = domain.dim();
    let (lo, hi) = domain.bbox();
    for _ in 0..100 {
        let x = DVector::from_iterator(
            n,
            (0..n).map(|i| lo[i] + rng.random::<f64>() * (hi[i] - lo[i])),
        );
        if let Some(p) = flow_to_boundary(domain, &x, 1e-13, 200) {
            return Some(p);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_lie_on_sphere() {
        let d = Domain::ball(4, 1.0);
        let s = boundary_samples(&d, 200, 3).unwrap();
        assert_eq!(s.len(), 200);
        for p in &s {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
        let again = boundary_samples(&d, 200, 3).unwrap();
        assert_eq!(s, again);
    }
}
