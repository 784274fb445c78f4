use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Structure;
use crate::domain::{boundary_samples, Domain};
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_extension, unit, Point};

/// The covector `d^c rho = -d rho(J .)` as a vector: `alpha(Y) = a . Y`.
pub fn alpha(domain: &Domain, structure: &Structure, x: &Point) -> Point {
    -(structure.at(x).transpose() * domain.gradient(x))
}

/// Matrix of `d alpha`: `d alpha(X, Y) = X^T A Y`, with `A = G - G^T` and
/// `G_ij = d_i alpha_j` from central differences.
pub fn dalpha_matrix(domain: &Domain, structure: &Structure, x: &Point) -> DMatrix<f64> {
    let n = domain.dim();
    let h = domain.fd_step();
    let mut g = DMatrix::zeros(n, n);
    let mut y = x.clone();
    for i in 0..n {
        y[i] = x[i] + h;
        let ap = alpha(domain, structure, &y);
        y[i] = x[i] - h;
        let am = alpha(domain, structure, &y);
        y[i] = x[i];
        let row = (ap - am) / (2.0 * h);
        for j in 0..n {
            g[(i, j)] = row[j];
        }
    }
    &g - g.transpose()
}

/// Symmetric matrix of the Levi quadratic form `X -> d alpha(X, J X)`.
pub fn levi_matrix(domain: &Domain, structure: &Structure, x: &Point) -> DMatrix<f64> {
    let m = dalpha_matrix(domain, structure, x) * structure.at(x);
    (&m + m.transpose()) * 0.5
}

/// `d alpha(X, JX) = D_X[alpha(JX)] - D_{JX}[alpha(X)]` with constant
/// extensions of `X` and `JX`.
pub fn levi_form(domain: &Domain, structure: &Structure, x: &Point, v: &Point) -> Result<f64> {
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(0.0);
    }
    let jv = structure.apply(x, v);
    let deriv = |dir: &Point, arg: &Point| -> f64 {
        let s = domain.fd_step() / dir.norm();
        let ap = alpha(domain, structure, &(x + dir * s)).dot(arg);
        let am = alpha(domain, structure, &(x - dir * s)).dot(arg);
        (ap - am) / (2.0 * s)
    };
    let val = deriv(v, &jv) - deriv(&jv, v);
    if !val.is_finite() {
        return Err(Error::DerivativeEvaluationFailed(
            "non-finite Levi form".into(),
        ));
    }
    Ok(val)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LeviSample {
    pub point: Vec<f64>,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConvexityReport {
    pub samples: usize,
    pub margin: f64,
    pub worst: LeviSample,
    /// Samples whose smallest eigenvalue is not positive, at most 20 listed.
    pub failures: Vec<LeviSample>,
    pub failure_count: usize,
    pub pass: bool,
}

/// Smallest Levi eigenvalue over boundary samples and points just inside
/// and outside the boundary.
pub fn check_strict_convexity(
    domain: &Domain,
    structure: &Structure,
    n_samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    let base = boundary_samples(domain, n_samples.max(1), seed)?;
    let offset = 0.02 * domain.diameter();
    let mut pts = Vec::with_capacity(base.len());
    for (i, p) in base.iter().enumerate() {
        let n = domain.normal(p)?;
        let s = match i % 4 {
            0 | 1 => 0.0,
            2 => -offset,
            _ => offset,
        };
        pts.push(p + n * s);
    }
    let mut worst: Option<LeviSample> = None;
    let mut failures = Vec::new();
    let mut failure_count = 0;
    let mut max_abs_eig = 0.0_f64;
    let mut evals = Vec::with_capacity(pts.len());
    for x in &pts {
        let m = levi_matrix(domain, structure, x);
        let eig = SymmetricEigen::new(m).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        max_abs_eig = eig.iter().fold(max_abs_eig, |a, v| a.max(v.abs()));
        evals.push(lo);
    }
    // eigenvalues at roundoff level of the largest one count as zero
    let zero = 1e-7 * max_abs_eig.max(1e-300);
    for (x, &lo) in pts.iter().zip(&evals) {
        let s = LeviSample {
            point: x.iter().cloned().collect(),
            min_eigenvalue: lo,
        };
        if lo <= zero {
            failure_count += 1;
            if failures.len() < 20 {
                failures.push(s.clone());
            }
        }
        if worst.as_ref().map_or(true, |w| lo < w.min_eigenvalue) {
            worst = Some(s);
        }
    }
    let worst = worst.expect("at least one sample");
    Ok(ConvexityReport {
        samples: pts.len(),
        margin: worst.min_eigenvalue,
        worst,
        failures,
        failure_count,
        pass: failure_count == 0,
    })
}

/// Contact form, complex tangent distribution and curvature form at a
/// boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactData {
    pub point: Point,
    pub normal: Point,
    /// `eta = -d^c rho`, as a vector: `eta(Y) = eta . Y`.
    pub eta: Point,
    /// Unit vector completing the normal to an orthonormal basis of the
    /// plane spanned by `n` and `J^T n`.
    pub reeb: Point,
    pub basis: Vec<Point>,
    /// `Omega = d eta` on the basis.
    pub omega: DMatrix<f64>,
    pub levi_margin: f64,
    pub sigma_min: f64,
}

impl ContactData {
    /// Coordinates of `v` in the distribution basis.
    pub fn coords(&self, v: &Point) -> Vec<f64> {
        self.basis.iter().map(|b| b.dot(v)).collect()
    }

    /// `Omega(X, Y)` for vectors in the distribution.
    pub fn omega_form(&self, x: &Point, y: &Point) -> f64 {
        let a = self.coords(x);
        let b = self.coords(y);
        let mut s = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += a[i] * self.omega[(i, j)] * b[j];
            }
        }
        s
    }

    /// Horizontal part of `v`.
    pub fn horizontal(&self, v: &Point) -> Point {
        let mut out = Point::zeros(v.len());
        for b in &self.basis {
            out += b * b.dot(v);
        }
        out
    }

    /// Largest distance of `J b` from the span of the basis.
    pub fn invariance_defect(&self, structure: &Structure) -> f64 {
        let j = structure.at(&self.point);
        self.basis
            .iter()
            .map(|b| {
                let jb = &j * b;
                (&jb - self.horizontal(&jb)).norm()
            })
            .fold(0.0, f64::max)
    }
}

pub fn contact_at(
    domain: &Domain,
    structure: &Structure,
    p: &Point,
    floor_factor: f64,
) -> Result<ContactData> {
    let dim = domain.dim();
    if dim < 4 || dim % 2 == 1 {
        return Err(Error::DimensionTooSmall(dim));
    }
    if structure.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: structure.dim(),
        });
    }
    let g = domain.gradient(p);
    let rho = domain.rho(p);
    if rho.abs() > 1e-8 * (1.0 + g.norm()) {
        return Err(Error::NotOnBoundary { rho });
    }
    let normal = domain.normal(p)?;
    let j = structure.at(p);
    let eta = j.transpose() * &g;
    let r0 = j.transpose() * &normal;
    let r1 = &r0 - &normal * r0.dot(&normal);
    let rn = r1.norm();
    if !(rn > 1e-12) {
        return Err(Error::DegenerateContact {
            sigma: rn,
            floor: 1e-12,
        });
    }
    let reeb = r1 / rn;
    let frame: Vec<Point> = (0..dim).map(|i| unit(dim, i)).collect();
    let basis = orthonormal_extension(&[normal.clone(), reeb.clone()], &frame, dim - 2, 1e-10);
    if basis.len() != dim - 2 {
        return Err(Error::DegenerateContact {
            sigma: 0.0,
            floor: 0.0,
        });
    }
    let a = dalpha_matrix(domain, structure, p);
    let levi = {
        let m = &a * &j;
        (&m + m.transpose()) * 0.5
    };
    let k = basis.len();
    let omega = DMatrix::from_fn(k, k, |r, c| -(basis[r].transpose() * &a * &basis[c])[(0, 0)]);
    let lr = DMatrix::from_fn(k, k, |r, c| (basis[r].transpose() * &levi * &basis[c])[(0, 0)]);
    let levi_margin = SymmetricEigen::new(lr)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let sv = omega.clone().svd(false, false).singular_values;
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let floor = if levi_margin > 0.0 {
        floor_factor * levi_margin
    } else {
        floor_factor * sigma_max.max(1e-300)
    };
    if !(sigma_min >= floor) {
        return Err(Error::DegenerateContact {
            sigma: sigma_min,
            floor,
        });
    }
    Ok(ContactData {
        point: p.clone(),
        normal,
        eta,
        reeb,
        basis,
        omega,
        levi_margin,
        sigma_min,
    })
}
