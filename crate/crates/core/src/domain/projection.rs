use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::sampling::{boundary_samples, flow_to_boundary};
use super::Domain;
use crate::error::{Error, Result};
use crate::linalg::{lex_cmp, Point};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CollarConfig {
    pub safety_factor: f64,
    /// Ceiling on epsilon as a fraction of the domain diameter.
    pub ceiling_fraction: f64,
    pub reach_samples: usize,
    /// Density of the boundary samples used away from the collar.
    pub fallback_samples: usize,
    pub fallback_candidates: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for CollarConfig {
    fn default() -> Self {
        CollarConfig {
            safety_factor: 0.5,
            ceiling_fraction: 0.25,
            reach_samples: 400,
            fallback_samples: 2000,
            fallback_candidates: 8,
            tolerance: 1e-10,
            max_iterations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ReachEstimate {
    /// Smallest principal curvature radius over the samples.
    pub min_radius: f64,
    pub ceiling: f64,
    pub epsilon: f64,
}

/// Estimates the interior reach from principal curvatures of the boundary.
pub fn estimate_reach(domain: &Domain, n_samples: usize, cfg: &CollarConfig) -> Result<ReachEstimate> {
    let samples = boundary_samples(domain, n_samples, cfg.seed)?;
    let n = domain.dim();
    let mut kmax = 0.0_f64;
    for (i, p) in samples.iter().enumerate() {
        let g = domain.gradient(p);
        let gn = g.norm();
        let h = domain.hessian(p);
        if !(gn > 1e-12) || !gn.is_finite() {
            return Err(Error::CurvatureEstimateFailed {
                sample: i,
                reason: "vanishing gradient".into(),
            });
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::CurvatureEstimateFailed {
                sample: i,
                reason: "non-finite Hessian".into(),
            });
        }
        let nrm = &g / gn;
        let proj = DMatrix::identity(n, n) - &nrm * nrm.transpose();
        let shape = &proj * h * &proj / gn;
        let shape = (&shape + shape.transpose()) * 0.5;
        let eig = SymmetricEigen::new(shape).eigenvalues;
        let k = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !k.is_finite() {
            return Err(Error::CurvatureEstimateFailed {
                sample: i,
                reason: "non-finite curvature".into(),
            });
        }
        kmax = kmax.max(k);
    }
    let min_radius = if kmax > 1e-12 { 1.0 / kmax } else { f64::INFINITY };
    let ceiling = cfg.ceiling_fraction * domain.diameter();
    Ok(ReachEstimate {
        min_radius,
        ceiling,
        epsilon: (cfg.safety_factor * min_radius).min(ceiling),
    })
}

/// Nearest boundary point of an interior point.
#[derive(Debug, Clone, PartialEq)]
pub struct Foot {
    pub point: Point,
    pub normal: Point,
    /// Euclidean distance to the boundary, i.e. the squared height.
    pub distance: f64,
}

/// Height, projection and collar depth for a domain.
#[derive(Debug, Clone)]
pub struct HeightProjection {
    domain: Arc<Domain>,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
    candidates: usize,
    samples: Vec<Point>,
}

impl HeightProjection {
    pub fn new(domain: Arc<Domain>, cfg: &CollarConfig) -> Result<Self> {
        let eps = match domain.reach_override() {
            Some(e) => e,
            None => estimate_reach(&domain, cfg.reach_samples, cfg)?.epsilon,
        };
        Self::with_epsilon(domain, eps, cfg)
    }

    pub fn with_epsilon(domain: Arc<Domain>, epsilon: f64, cfg: &CollarConfig) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let samples = boundary_samples(&domain, cfg.fallback_samples, cfg.seed.wrapping_add(1))?;
        Ok(HeightProjection {
            domain,
            epsilon,
            tol: cfg.tolerance,
            max_iter: cfg.max_iterations,
            candidates: cfg.fallback_candidates.max(1),
            samples,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn foot(&self, x: &Point) -> Result<Foot> {
        let rho = self.domain.rho(x);
        if !(rho < 0.0) {
            return Err(Error::PointOutsideDomain { rho });
        }
        let local = flow_to_boundary(&self.domain, x, 1e-12, self.max_iter)
            .and_then(|p0| self.newton(x, &p0));
        if let Some(f) = &local {
            if f.distance <= self.epsilon {
                return Ok(f.clone());
            }
        }
        let mut order: Vec<(f64, usize)> = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| ((s - x).norm_squared(), i))
            .collect();
        let k = self.candidates.min(order.len());
        order.select_nth_unstable_by(k.saturating_sub(1), |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best = local;
        for &(_, i) in order.iter().take(k) {
            if let Some(f) = self.newton(x, &self.samples[i]) {
                best = Some(match best {
                    None => f,
                    Some(b) => pick(b, f),
                });
            }
        }
        best.ok_or(Error::ProjectionDiverged {
            iterations: self.max_iter,
        })
    }

    pub fn project_boundary(&self, x: &Point) -> Result<Point> {
        Ok(self.foot(x)?.point)
    }

    pub fn height(&self, x: &Point) -> Result<f64> {
        Ok(self.foot(x)?.distance.sqrt())
    }

    /// Squared height, the Euclidean distance to the boundary.
    pub fn depth(&self, x: &Point) -> Result<f64> {
        Ok(self.foot(x)?.distance)
    }

    /// `pi(x) - t n(pi(x))`.
    pub fn foot_on_shell(&self, x: &Point, t: f64) -> Result<Point> {
        if t > self.epsilon {
            return Err(Error::OutsideShellRange {
                t,
                epsilon: self.epsilon,
            });
        }
        let f = self.foot(x)?;
        if f.distance > self.epsilon {
            return Err(Error::PointOutsideShellRegion {
                depth: f.distance,
                epsilon: self.epsilon,
            });
        }
        Ok(&f.point - &f.normal * t)
    }

    /// Damped Newton on `p - x + mu grad rho(p) = 0, rho(p) = 0`.
    fn newton(&self, x: &Point, p0: &Point) -> Option<Foot> {
        let d = &self.domain;
        let n = d.dim();
        let mut p = p0.clone();
        let g0 = d.gradient(&p);
        let gg = g0.norm_squared();
        if !(gg > 1e-24) {
            return None;
        }
        let mut mu = (x - &p).dot(&g0) / gg;
        let scale = 1.0 + x.norm();
        let residual = |p: &Point, mu: f64| -> (DVector<f64>, f64) {
            let g = d.gradient(p);
            let f1 = p - x + &g * mu;
            let f2 = d.rho(p);
            let r = (f1.norm_squared() + f2 * f2).sqrt();
            let mut f = DVector::zeros(n + 1);
            f.rows_mut(0, n).copy_from(&f1);
            f[n] = f2;
            (f, r)
        };
        let (mut f, mut r) = residual(&p, mu);
        for _ in 0..self.max_iter {
            if f.rows(0, n).norm() <= self.tol * scale && f[n].abs() <= self.tol {
                break;
            }
            let g = d.gradient(&p);
            let h = d.hessian(&p);
            let mut jac = DMatrix::zeros(n + 1, n + 1);
            let top = DMatrix::identity(n, n) + h * mu;
            jac.view_mut((0, 0), (n, n)).copy_from(&top);
            for i in 0..n {
                jac[(i, n)] = g[i];
                jac[(n, i)] = g[i];
            }
            let step = jac.lu().solve(&(-&f))?;
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let pn = &p + step.rows(0, n) * alpha;
                let mun = mu + step[n] * alpha;
                let (fnew, rnew) = residual(&pn, mun);
                if rnew.is_finite() && rnew < r {
                    p = pn;
                    mu = mun;
                    f = fnew;
                    r = rnew;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let ok = f.rows(0, n).norm() <= 1e3 * self.tol * scale && f[n].abs() <= 1e3 * self.tol;
        // the nearest point lies on the inner side: x - p is a negative multiple of the gradient
        if !ok || mu > 0.0 {
            return None;
        }
        let normal = d.normal(&p).ok()?;
        Some(Foot {
            distance: (x - &p).norm(),
            point: p,
            normal,
        })
    }
}

fn pick(a: Foot, b: Foot) -> Foot {
    let scale = 1e-12 * (1.0 + a.distance.max(b.distance));
    if (a.distance - b.distance).abs() <= scale {
        if lex_cmp(&b.point, &a.point).is_lt() {
            b
        } else {
            a
        }
    } else if b.distance < a.distance {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::point;

    fn ball() -> HeightProjection {
        HeightProjection::new(Arc::new(Domain::ball(4, 1.0)), &CollarConfig::default()).unwrap()
    }

    #[test]
    fn ball_reach_is_half() {
        let r = estimate_reach(&Domain::ball(4, 1.0), 100, &CollarConfig::default()).unwrap();
        assert!((r.min_radius - 1.0).abs() < 1e-12);
        assert!((r.epsilon - 0.5).abs() < 1e-12);
    }

    #[test]
    fn radial_heights() {
        let hp = ball();
        assert!((hp.height(&point(&[0.5, 0.0, 0.0, 0.0])).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
        assert!((hp.height(&point(&[0.9, 0.0, 0.0, 0.0])).unwrap() - 0.1f64.sqrt()).abs() < 1e-10);
        let p = hp.project_boundary(&point(&[0.5, 0.0, 0.0, 0.0])).unwrap();
        assert!((p - point(&[1.0, 0.0, 0.0, 0.0])).norm() < 1e-10);
    }

    #[test]
    fn center_tie_break_is_deterministic() {
        let hp = ball();
        let a = hp.project_boundary(&point(&[0.0; 4])).unwrap();
        let b = hp.project_boundary(&point(&[0.0; 4])).unwrap();
        assert_eq!(a, b);
        assert!((a.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn outside_point_rejected() {
        let hp = ball();
        assert!(matches!(
            hp.height(&point(&[1.0, 0.0, 0.0, 0.0])),
            Err(Error::PointOutsideDomain { .. })
        ));
    }

    #[test]
    fn shell_foot_radial() {
        let hp = ball();
        let x = point(&[0.9, 0.0, 0.0, 0.0]);
        let y = hp.foot_on_shell(&x, 0.25).unwrap();
        assert!((y - point(&[0.75, 0.0, 0.0, 0.0])).norm() < 1e-10);
        let z = hp.foot_on_shell(&x, 0.1).unwrap();
        assert!((z - &x).norm() < 1e-9);
        assert!(matches!(hp.foot_on_shell(&x, 0.6), Err(Error::OutsideShellRange { .. })));
    }

    #[test]
    fn flat_side_hits_ceiling() {
        use crate::domain::{Monomial, Polynomial};
        let rho = Polynomial {
            dim: 4,
            terms: vec![
                Monomial { coefficient: 1.0, exponents: vec![1, 0, 0, 0] },
                Monomial { coefficient: -0.5, exponents: vec![0, 0, 0, 0] },
            ],
        };
        let d = Domain::new(
            Arc::new(rho),
            DVector::from_element(4, -1.0),
            DVector::from_element(4, 1.0),
        );
        let r = estimate_reach(&d, 50, &CollarConfig::default()).unwrap();
        assert!(r.min_radius.is_infinite());
        assert_eq!(r.epsilon, 0.5);
    }
}
