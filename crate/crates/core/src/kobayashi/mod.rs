//! The anisotropic estimate `|v_H|/h + |v_N|/h^2` of the Kobayashi metric,
//! its integrated distance, and quasi-isometry fits against other metrics.

mod split;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{quantile, Point};
use crate::metric::{HyperbolicModel, LayerKind, MetricKind, PathLength, Polyline};

pub use split::{split_parts, TangentSplit};

impl HyperbolicModel {
    /// Splits `v` at `x` into the part along `{n, Jn}` and the horizontal
    /// part, with `n` the normal at the projection of `x`.
    pub fn split_vector(&self, x: &Point, v: &Point) -> Result<TangentSplit> {
        let f = self.projection().foot(x)?;
        if f.distance > self.epsilon() {
            return Err(Error::PointOutsideShellRegion {
                depth: f.distance,
                epsilon: self.epsilon(),
            });
        }
        Ok(TangentSplit::new(x, &self.structure().at(x), &f.normal, v))
    }

    /// `|v_H|/h + |v_N|/h^2` in the collar, `|v|/h^2` beyond it.
    pub fn k_infinitesimal(&self, x: &Point, v: &Point) -> Result<f64> {
        if v.iter().all(|c| *c == 0.0) {
            return Err(Error::ZeroVector);
        }
        let f = self.projection().foot(x)?;
        self.k_at(x, &f.normal, f.distance, v)
    }

    fn k_at(&self, x: &Point, n: &Point, depth: f64, v: &Point) -> Result<f64> {
        if depth > self.epsilon() {
            return Ok(v.norm() / depth);
        }
        let (vn, vh) = split_parts(&self.structure().at(x), n, v);
        Ok(vh.norm() / depth.sqrt() + vn.norm() / depth)
    }

    fn k_segment(&self, p: &Point, q: &Point, tol: f64, max_depth: usize) -> Result<f64> {
        let v = q - p;
        if v.iter().all(|c| *c == 0.0) {
            return Ok(0.0);
        }
        let eval = |s: f64| -> Result<f64> {
            let x = p + &v * s;
            let f = self.projection().foot(&x)?;
            self.k_at(&x, &f.normal, f.distance, &v)
        };
        let mut prev = eval(0.5)?;
        for m in 1..=max_depth {
            let n = 1usize << m;
            let mut s = 0.0;
            for i in 0..n {
                s += eval((i as f64 + 0.5) / n as f64)?;
            }
            let est = s / n as f64;
            if (est - prev).abs() <= tol * est.abs() {
                return Ok(est);
            }
            if m == max_depth {
                return Err(Error::RefinementStalled {
                    depth: m,
                    lo: est.min(prev),
                    hi: est.max(prev),
                });
            }
            prev = est;
        }
        Ok(prev)
    }

    /// Integral of the estimate along a polyline, midpoint rule per segment
    /// refined dyadically to relative tolerance `tol`.
    pub fn k_length(&self, path: &Polyline, tol: f64) -> Result<PathLength> {
        let segments = path
            .points
            .windows(2)
            .map(|w| self.k_segment(&w[0].x, &w[1].x, tol, 16))
            .collect::<Result<Vec<f64>>>()?;
        Ok(PathLength {
            total: segments.iter().sum(),
            segments,
        })
    }

    /// Shortest path in the layered graph carrying estimate lengths.
    pub fn k_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        let (a, b) = (self.locate(x)?, self.locate(y)?);
        Ok(self.evaluate(LayerKind::K, &a, &b).value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeResiduals {
    pub regime: String,
    pub count: usize,
    pub q50: f64,
    pub q90: f64,
    pub q99: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiViolation {
    pub index: usize,
    pub a: f64,
    pub b: f64,
}

/// Constants with `-C' + a/C <= b <= C a + C'` on every pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QiReport {
    pub c: f64,
    pub c_prime: f64,
    pub pairs: usize,
    /// Pairs no finite constants can cover (non-finite values).
    pub violations: Vec<QiViolation>,
    /// Quantiles of `b - a` per regime.
    pub residuals: Vec<RegimeResiduals>,
}

fn c_prime_for(c: f64, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (&x, &y)| m.max(x / c - y).max(y - c * x))
}

/// Fits `(C, C')` by minimizing `A (C - 1/C) + 2 C'(C)` over a logarithmic
/// grid of `C` in [1, 1000], with `A = max a` and `C'(C)` the least
/// additive constant for that `C`.
pub fn qi_fit(a: &[f64], b: &[f64], regimes: &[String]) -> QiReport {
    assert_eq!(a.len(), b.len());
    let mut violations = Vec::new();
    let mut fa = Vec::with_capacity(a.len());
    let mut fb = Vec::with_capacity(a.len());
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x.is_finite() && y.is_finite() {
            fa.push(x);
            fb.push(y);
        } else {
            violations.push(QiViolation { index: i, a: x, b: y });
        }
    }
    let scale = fa.iter().cloned().fold(0.0, f64::max);
    let steps = 3000;
    let mut best = (f64::INFINITY, 1.0, 0.0);
    for s in 0..=steps {
        let c = 1000f64.powf(s as f64 / steps as f64);
        let cp = c_prime_for(c, &fa, &fb);
        let obj = scale * (c - 1.0 / c) + 2.0 * cp;
        if obj < best.0 {
            best = (obj, c, cp);
        }
    }
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        if !(x.is_finite() && y.is_finite()) {
            continue;
        }
        let name = regimes.get(i).cloned().unwrap_or_else(|| "all".into());
        match groups.iter_mut().find(|g| g.0 == name) {
            Some(g) => g.1.push(y - x),
            None => groups.push((name, vec![y - x])),
        }
    }
    groups.sort_by(|p, q| p.0.cmp(&q.0));
    let residuals = groups
        .into_iter()
        .map(|(regime, r)| RegimeResiduals {
            count: r.len(),
            q50: quantile(&r, 0.5),
            q90: quantile(&r, 0.9),
            q99: quantile(&r, 0.99),
            max: r.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            regime,
        })
        .collect();
    QiReport {
        c: best.1,
        c_prime: best.2,
        pairs: a.len(),
        violations,
        residuals,
    }
}

/// Fits `k_distance` against `g` on sampled pairs, labelled by whether
/// both points lie within `sqrt(eps)/2` height of the boundary.
pub fn qi_check(model: &HyperbolicModel, pairs: &[(Point, Point)]) -> Result<QiReport> {
    qi_check_against(model, pairs, MetricKind::G)
}

/// As [`qi_check`], with `d` or `g` as the reference metric.
pub fn qi_check_against(model: &HyperbolicModel, pairs: &[(Point, Point)], reference: MetricKind) -> Result<QiReport> {
    if !matches!(reference, MetricKind::G | MetricKind::D) {
        return Err(Error::Precondition(format!("reference metric must be g or d, got {reference:?}")));
    }
    let half = 0.5 * model.epsilon().sqrt();
    let locs = pairs
        .iter()
        .map(|(x, y)| Ok((model.locate(x)?, model.locate(y)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(f64, f64)> = locs
        .par_iter()
        .map(|(lx, ly)| {
            let k = model.evaluate(LayerKind::K, lx, ly).value;
            let r = match reference {
                MetricKind::D => model.evaluate(LayerKind::G, lx, ly).value,
                _ => model.g(lx, ly),
            };
            (k, r)
        })
        .collect();
    let labels: Vec<String> = locs
        .iter()
        .map(|(lx, ly)| {
            if lx.height < half && ly.height < half {
                "near_boundary".to_string()
            } else {
                "interior".to_string()
            }
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    Ok(qi_fit(&a, &b, &labels))
}
