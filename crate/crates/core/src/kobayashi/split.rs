use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{orthonormal_extension, unit, Point};

/// `(v_N, v_H)` with `v_N` in `span{n, J n}` and `v_H` orthogonal to `n`
/// and `J^T n`, the annihilator of the contact form.
pub fn split_parts(j: &DMatrix<f64>, n: &Point, v: &Point) -> (Point, Point) {
    let jn = j * n;
    let jtn = j.transpose() * n;
    let a11 = n.dot(n);
    let a12 = n.dot(&jn);
    let a21 = jtn.dot(n);
    let a22 = jtn.dot(&jn);
    let r1 = n.dot(v);
    let r2 = jtn.dot(v);
    let det = a11 * a22 - a12 * a21;
    let alpha = (r1 * a22 - a12 * r2) / det;
    let beta = (a11 * r2 - a21 * r1) / det;
    let vn = n * alpha + &jn * beta;
    let vh = v - &vn;
    (vn, vh)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentSplit {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub j_normal: Vec<f64>,
    pub horizontal_basis: Vec<Vec<f64>>,
    pub v_n: Vec<f64>,
    pub v_h: Vec<f64>,
}

impl TangentSplit {
    pub(crate) fn new(x: &Point, j: &DMatrix<f64>, n: &Point, v: &Point) -> Self {
        let dim = x.len();
        let (vn, vh) = split_parts(j, n, v);
        let jn = j * n;
        let jtn = j.transpose() * n;
        let frame: Vec<Point> = (0..dim).map(|i| unit(dim, i)).collect();
        let basis = orthonormal_extension(&[n.clone(), jtn], &frame, dim - 2, 1e-10);
        let v = |p: &Point| p.iter().cloned().collect::<Vec<f64>>();
        TangentSplit {
            point: v(x),
            normal: v(n),
            j_normal: v(&jn),
            horizontal_basis: basis.iter().map(v).collect(),
            v_n: v(&vn),
            v_h: v(&vh),
        }
    }

    pub fn v_n_norm(&self) -> f64 {
        self.v_n.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn v_h_norm(&self) -> f64 {
        self.v_h.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}
