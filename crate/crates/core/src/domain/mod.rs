//! Bounded domains `{rho < 0}` and their height/projection apparatus.

mod projection;
mod sampling;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Point;

pub use projection::{estimate_reach, CollarConfig, Foot, HeightProjection, ReachEstimate};
pub use sampling::{boundary_samples, flow_to_boundary, random_boundary_point};

/// A scalar defining function. Analytic derivatives are optional; missing
/// ones are replaced by central differences.
pub trait DefiningFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, _x: &Point) -> Option<Point> {
        None
    }
    fn hessian(&self, _x: &Point) -> Option<DMatrix<f64>> {
        None
    }
}

/// `|x - c|^2 - r^2`.
#[derive(Debug, Clone)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

impl DefiningFunction for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn value(&self, x: &Point) -> f64 {
        (x - &self.center).norm_squared() - self.radius * self.radius
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        Some((x - &self.center) * 2.0)
    }
    fn hessian(&self, _x: &Point) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.dim(), self.dim()) * 2.0)
    }
}

/// `sum |x_i / a_i|^p - 1` with `p >= 2`; `p = 2` is an ellipsoid.
#[derive(Debug, Clone)]
pub struct Superellipsoid {
    pub semi_axes: Vec<f64>,
    pub exponent: f64,
}

impl DefiningFunction for Superellipsoid {
    fn dim(&self) -> usize {
        self.semi_axes.len()
    }
    fn value(&self, x: &Point) -> f64 {
        let p = self.exponent;
        x.iter()
            .zip(&self.semi_axes)
            .map(|(xi, a)| (xi / a).abs().powf(p))
            .sum::<f64>()
            - 1.0
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        let p = self.exponent;
        Some(DVector::from_iterator(
            self.dim(),
            x.iter().zip(&self.semi_axes).map(|(xi, a)| {
                let y = xi / a;
                p * y.abs().powf(p - 1.0) * y.signum() / a
            }),
        ))
    }
    fn hessian(&self, x: &Point) -> Option<DMatrix<f64>> {
        let p = self.exponent;
        let diag = x.iter().zip(&self.semi_axes).map(|(xi, a)| {
            let y = (xi / a).abs();
            p * (p - 1.0) * y.powf(p - 2.0) / (a * a)
        });
        Some(DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            diag,
        )))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<u32>,
}

/// Polynomial defining function given as a list of monomials.
#[derive(Debug, Clone)]
pub struct Polynomial {
    pub dim: usize,
    pub terms: Vec<Monomial>,
}

fn powi(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl DefiningFunction for Polynomial {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &Point) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coefficient
                    * t.exponents
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| powi(x[i], e))
                        .product::<f64>()
            })
            .sum()
    }
    fn gradient(&self, x: &Point) -> Option<Point> {
        let mut g = DVector::zeros(self.dim);
        for t in &self.terms {
            for k in 0..self.dim {
                let ek = t.exponents[k];
                if ek == 0 {
                    continue;
                }
                let mut v = t.coefficient * ek as f64;
                for (i, &e) in t.exponents.iter().enumerate() {
                    v *= if i == k { powi(x[i], e - 1) } else { powi(x[i], e) };
                }
                g[k] += v;
            }
        }
        Some(g)
    }
    fn hessian(&self, x: &Point) -> Option<DMatrix<f64>> {
        let n = self.dim;
        let mut h = DMatrix::zeros(n, n);
        for t in &self.terms {
            for a in 0..n {
                for b in a..n {
                    let mut e = t.exponents.clone();
                    let mut c = t.coefficient;
                    if e[a] == 0 {
                        continue;
                    }
                    c *= e[a] as f64;
                    e[a] -= 1;
                    if e[b] == 0 {
                        continue;
                    }
                    c *= e[b] as f64;
                    e[b] -= 1;
                    let v = c * e
                        .iter()
                        .enumerate()
                        .map(|(i, &k)| powi(x[i], k))
                        .product::<f64>();
                    h[(a, b)] += v;
                    if a != b {
                        h[(b, a)] += v;
                    }
                }
            }
        }
        Some(h)
    }
}

/// A bounded domain `{rho < 0}` inside an axis-aligned bounding box.
#[derive(Clone, Debug)]
pub struct Domain {
    rho: Arc<dyn DefiningFunction>,
    analytic: bool,
    fd_step: f64,
    lower: Point,
    upper: Point,
    reach_override: Option<f64>,
}

impl Domain {
    pub fn new(rho: Arc<dyn DefiningFunction>, lower: Point, upper: Point) -> Self {
        let diag = (&upper - &lower).norm();
        Domain {
            rho,
            analytic: true,
            fd_step: 1e-5 * diag,
            lower,
            upper,
            reach_override: None,
        }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        let rho = Ball {
            center: DVector::zeros(dim),
            radius,
        };
        Domain::new(
            Arc::new(rho),
            DVector::from_element(dim, -radius),
            DVector::from_element(dim, radius),
        )
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> Self {
        Self::superellipsoid(semi_axes, 2.0)
    }

    pub fn superellipsoid(semi_axes: &[f64], exponent: f64) -> Self {
        let upper = DVector::from_column_slice(semi_axes);
        let lower = -&upper;
        Domain::new(
            Arc::new(Superellipsoid {
                semi_axes: semi_axes.to_vec(),
                exponent,
            }),
            lower,
            upper,
        )
    }

    pub fn with_analytic_derivatives(mut self, on: bool) -> Self {
        self.analytic = on;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.fd_step = step;
        self
    }

    pub fn with_reach_override(mut self, eps: Option<f64>) -> Self {
        self.reach_override = eps;
        self
    }

    pub fn from_spec(spec: &DomainSpec) -> Result<Self> {
        let n = spec.dimension;
        if n == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        let mut dom = match &spec.defining_function {
            DefiningSpec::Ball { radius, center } => {
                let c = match center {
                    Some(c) if c.len() == n => DVector::from_column_slice(c),
                    Some(c) => {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            got: c.len(),
                        })
                    }
                    None => DVector::zeros(n),
                };
                let r = *radius;
                if r <= 0.0 {
                    return Err(Error::Config("ball radius must be positive".into()));
                }
                let lower = c.map(|v| v - r);
                let upper = c.map(|v| v + r);
                Domain::new(Arc::new(Ball { center: c, radius: r }), lower, upper)
            }
            DefiningSpec::Ellipsoid { semi_axes } => {
                check_axes(semi_axes, n)?;
                Domain::ellipsoid(semi_axes)
            }
            DefiningSpec::Superellipsoid {
                semi_axes,
                exponent,
            } => {
                check_axes(semi_axes, n)?;
                if *exponent < 2.0 {
                    return Err(Error::Config("superellipsoid exponent must be >= 2".into()));
                }
                Domain::superellipsoid(semi_axes, *exponent)
            }
            DefiningSpec::Polynomial { terms } => {
                if terms.iter().any(|t| t.exponents.len() != n) {
                    return Err(Error::Config("monomial exponent length mismatch".into()));
                }
                let bb = spec.bounding_box.as_ref().ok_or_else(|| {
                    Error::Config("polynomial domains need a bounding_box".into())
                })?;
                Domain::new(
                    Arc::new(Polynomial {
                        dim: n,
                        terms: terms.clone(),
                    }),
                    DVector::from_column_slice(&bb.min),
                    DVector::from_column_slice(&bb.max),
                )
            }
        };
        if let Some(bb) = &spec.bounding_box {
            if bb.min.len() != n || bb.max.len() != n {
                return Err(Error::Config("bounding box dimension mismatch".into()));
            }
            dom.lower = DVector::from_column_slice(&bb.min);
            dom.upper = DVector::from_column_slice(&bb.max);
        }
        dom.analytic = spec.analytic_derivatives;
        let diag = dom.diagonal();
        dom.fd_step = spec.fd_step.unwrap_or(1e-5 * diag);
        if dom.fd_step <= 0.0 {
            return Err(Error::Config("fd_step must be positive".into()));
        }
        dom.reach_override = spec.reach_override;
        Ok(dom)
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn rho(&self, x: &Point) -> f64 {
        self.rho.value(x)
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.rho(x) < 0.0
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn reach_override(&self) -> Option<f64> {
        self.reach_override
    }

    pub fn bbox(&self) -> (&Point, &Point) {
        (&self.lower, &self.upper)
    }

    pub fn diagonal(&self) -> f64 {
        (&self.upper - &self.lower).norm()
    }

    /// Largest side of the bounding box, used as the diameter scale.
    pub fn diameter(&self) -> f64 {
        (&self.upper - &self.lower).amax()
    }

    pub fn gradient(&self, x: &Point) -> Point {
        if self.analytic {
            if let Some(g) = self.rho.gradient(x) {
                return g;
            }
        }
        let h = self.fd_step;
        let mut g = DVector::zeros(self.dim());
        let mut y = x.clone();
        for i in 0..self.dim() {
            y[i] = x[i] + h;
            let fp = self.rho(&y);
            y[i] = x[i] - h;
            let fm = self.rho(&y);
            y[i] = x[i];
            g[i] = (fp - fm) / (2.0 * h);
        }
        g
    }

    pub fn hessian(&self, x: &Point) -> DMatrix<f64> {
        let n = self.dim();
        if self.analytic {
            if let Some(h) = self.rho.hessian(x) {
                return h;
            }
            if self.rho.gradient(x).is_some() {
                let h = self.fd_step;
                let mut m = DMatrix::zeros(n, n);
                let mut y = x.clone();
                for i in 0..n {
                    y[i] = x[i] + h;
                    let gp = self.gradient(&y);
                    y[i] = x[i] - h;
                    let gm = self.gradient(&y);
                    y[i] = x[i];
                    m.set_column(i, &((gp - gm) / (2.0 * h)));
                }
                return (&m + m.transpose()) * 0.5;
            }
        }
        // second differences of the value need a larger step to stay above roundoff
        let h = 10.0 * self.fd_step;
        let mut m = DMatrix::zeros(n, n);
        let f0 = self.rho(x);
        let mut y = x.clone();
        for i in 0..n {
            y[i] = x[i] + h;
            let fp = self.rho(&y);
            y[i] = x[i] - h;
            let fm = self.rho(&y);
            y[i] = x[i];
            m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in (i + 1)..n {
                let mut s = 0.0;
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    y[i] = x[i] + si * h;
                    y[j] = x[j] + sj * h;
                    s += si * sj * self.rho(&y);
                }
                y[i] = x[i];
                y[j] = x[j];
                let v = s / (4.0 * h * h);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Outward unit normal `grad rho / |grad rho|`.
    pub fn normal(&self, p: &Point) -> Result<Point> {
        let g = self.gradient(p);
        let n = g.norm();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::DerivativeEvaluationFailed(
                "vanishing gradient of the defining function".into(),
            ));
        }
        Ok(g / n)
    }
}

fn check_axes(a: &[f64], n: usize) -> Result<()> {
    if a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.len(),
        });
    }
    if a.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("semi-axes must be positive".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoxSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DefiningSpec {
    Ball {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    Ellipsoid {
        semi_axes: Vec<f64>,
    },
    Superellipsoid {
        semi_axes: Vec<f64>,
        exponent: f64,
    },
    Polynomial {
        terms: Vec<Monomial>,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// JSON description of a domain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DomainSpec {
    pub dimension: usize,
    pub defining_function: DefiningSpec,
    #[serde(default = "yes")]
    pub analytic_derivatives: bool,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub reach_override: Option<f64>,
    #[serde(default)]
    pub bounding_box: Option<BoxSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::point;

    #[test]
    fn ball_gradient_matches_fd() {
        let d = Domain::ball(4, 1.0);
        let fd = d.clone().with_analytic_derivatives(false);
        let x = point(&[0.3, -0.2, 0.5, 0.1]);
        assert!((d.gradient(&x) - fd.gradient(&x)).amax() < 1e-8);
        assert!((d.hessian(&x) - fd.hessian(&x)).amax() < 1e-4);
    }

    #[test]
    fn polynomial_derivatives_match_fd() {
        let p = Polynomial {
            dim: 4,
            terms: vec![
                Monomial { coefficient: 1.0, exponents: vec![4, 0, 0, 0] },
                Monomial { coefficient: 2.0, exponents: vec![1, 2, 0, 0] },
                Monomial { coefficient: 1.0, exponents: vec![0, 0, 2, 1] },
                Monomial { coefficient: -1.0, exponents: vec![0, 0, 0, 0] },
            ],
        };
        let d = Domain::new(
            Arc::new(p),
            DVector::from_element(4, -2.0),
            DVector::from_element(4, 2.0),
        );
        let fd = d.clone().with_analytic_derivatives(false);
        let x = point(&[0.3, -0.7, 0.5, 0.4]);
        assert!((d.gradient(&x) - fd.gradient(&x)).amax() < 1e-7);
        assert!((d.hessian(&x) - fd.hessian(&x)).amax() < 1e-4);
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"dimension":4,"defining_function":{"kind":"ellipsoid","semi_axes":[2,1,1,1]}}"#;
        let spec: DomainSpec = serde_json::from_str(json).unwrap();
        let d = Domain::from_spec(&spec).unwrap();
        assert_eq!(d.dim(), 4);
        assert!(d.contains(&point(&[1.9, 0.0, 0.0, 0.0])));
        assert!(!d.contains(&point(&[0.0, 1.1, 0.0, 0.0])));
        assert_eq!(d.diameter(), 4.0);
    }

    #[test]
    fn polynomial_spec_needs_box() {
        let json = r#"{"dimension":2,"defining_function":{"kind":"polynomial","terms":[{"coefficient":1,"exponents":[2,0]}]}}"#;
        let spec: DomainSpec = serde_json::from_str(json).unwrap();
        assert!(matches!(Domain::from_spec(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn normal_points_outward() {
        let d = Domain::ellipsoid(&[2.0, 1.0, 1.0, 1.0]);
        let p = point(&[2.0f64.sqrt(), (0.5f64).sqrt(), 0.0, 0.0]);
        assert!(d.rho(&p).abs() < 1e-12);
        let n = d.normal(&p).unwrap();
        assert!(d.rho(&(&p + &n * 1e-4)) > 0.0);
        assert!(d.rho(&(&p - &n * 1e-4)) < 0.0);
    }
}
