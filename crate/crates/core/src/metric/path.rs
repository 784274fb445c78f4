use serde::{Deserialize, Serialize};

use super::{HyperbolicModel, Located};
use crate::error::{Error, Result};
use crate::linalg::Point;

/// Ordered points inside the domain joined by straight segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<Located>,
    /// Exact length under `g` when the path has a closed form.
    pub known_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLength {
    pub total: f64,
    pub segments: Vec<f64>,
}

#[derive(Serialize)]
struct PolylineJson<'a> {
    functional: &'a str,
    total: f64,
    points: Vec<Vec<f64>>,
    heights: Vec<f64>,
    segments: &'a [f64],
}

impl Polyline {
    /// Drops consecutive repeated points.
    pub fn new(mut points: Vec<Located>) -> Self {
        points.dedup_by(|b, a| a.x == b.x);
        Polyline {
            points,
            known_length: None,
        }
    }

    pub fn with_known_length(points: Vec<Located>, len: f64) -> Self {
        Polyline {
            known_length: Some(len),
            ..Self::new(points)
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coords(&self) -> Vec<Point> {
        self.points.iter().map(|p| p.x.clone()).collect()
    }

    /// Cumulative Euclidean arclength normalized to [0, 1].
    pub fn params(&self) -> Vec<f64> {
        let mut acc = vec![0.0];
        for w in self.points.windows(2) {
            let last = *acc.last().unwrap();
            acc.push(last + (&w[1].x - &w[0].x).norm());
        }
        let total = *acc.last().unwrap();
        if total > 0.0 {
            for a in &mut acc {
                *a /= total;
            }
        }
        acc
    }

    pub fn reversed(&self) -> Self {
        let mut p = self.clone();
        p.points.reverse();
        p
    }

    pub fn euclidean_length(&self) -> f64 {
        self.points.windows(2).map(|w| (&w[1].x - &w[0].x).norm()).sum()
    }

    pub fn to_json(&self, functional: &str, length: &PathLength) -> Result<String> {
        let j = PolylineJson {
            functional,
            total: length.total,
            points: self.points.iter().map(|p| p.x.iter().cloned().collect()).collect(),
            heights: self.points.iter().map(|p| p.height).collect(),
            segments: &length.segments,
        };
        Ok(serde_json::to_string_pretty(&j)?)
    }
}

/// Rounding noise of `g` on nearly coincident points.
const NOISE_FLOOR: f64 = 1e-12;

/// Dyadic refinement of one segment; Richardson-extrapolated when
/// `romberg` is set.
pub(crate) fn segment_length(
    model: &HyperbolicModel,
    f: &dyn Fn(&Located, &Located) -> f64,
    p: &Located,
    q: &Located,
    tol: f64,
    max_depth: usize,
    romberg: bool,
) -> Result<f64> {
    let mut pts = vec![p.clone(), q.clone()];
    let mut prev_row = vec![f(p, q)];
    let mut prev_sum = prev_row[0];
    for m in 1..=max_depth {
        let mut next = Vec::with_capacity(2 * pts.len() - 1);
        for w in pts.windows(2) {
            next.push(w[0].clone());
            next.push(model.midpoint(&w[0], &w[1])?);
        }
        next.push(pts.last().unwrap().clone());
        pts = next;
        let s: f64 = pts.windows(2).map(|w| f(&w[0], &w[1])).sum();
        let (est, last) = if romberg {
            let mut row = vec![s];
            for j in 1..=m {
                let r = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / ((1u64 << j) as f64 - 1.0);
                row.push(r);
            }
            let est = row[m];
            let last = prev_row[m - 1];
            prev_row = row;
            (est, last)
        } else {
            (s, prev_sum)
        };
        if s == prev_sum || ((m >= 2 || !romberg) && (est - last).abs() <= tol * est.abs() + NOISE_FLOOR) {
            return Ok(if s == prev_sum { s } else { est });
        }
        prev_sum = s;
        if m == max_depth {
            return Err(Error::RefinementStalled {
                depth: m,
                lo: est.min(last),
                hi: est.max(last),
            });
        }
    }
    Ok(prev_sum)
}

impl HyperbolicModel {
    /// Length of a polyline under `g`: per-segment dyadic refinement to
    /// relative tolerance `tol`.
    pub fn g_path_length(&self, path: &Polyline, tol: f64) -> Result<PathLength> {
        let f = |a: &Located, b: &Located| self.g(a, b);
        self.path_length_with(path, &f, tol, 14, true)
    }

    /// Length of a polyline under `d`, by plain dyadic refinement.
    pub fn d_path_length(&self, path: &Polyline, tol: f64) -> Result<PathLength> {
        let f = |a: &Located, b: &Located| self.d_located(a, b);
        self.path_length_with(path, &f, tol, 6, false)
    }

    pub(crate) fn path_length_with(
        &self,
        path: &Polyline,
        f: &dyn Fn(&Located, &Located) -> f64,
        tol: f64,
        max_depth: usize,
        romberg: bool,
    ) -> Result<PathLength> {
        let segments = path
            .points
            .windows(2)
            .map(|w| segment_length(self, f, &w[0], &w[1], tol, max_depth, romberg))
            .collect::<Result<Vec<f64>>>()?;
        Ok(PathLength {
            total: segments.iter().sum(),
            segments,
        })
    }

    /// `g(gamma(t - s), gamma(t + s)) / (2 s)` for a parametrized curve.
    pub fn dilation(&self, curve: &dyn Fn(f64) -> Point, t: f64, step: f64) -> Result<f64> {
        let a = self.locate(&curve(t - step))?;
        let b = self.locate(&curve(t + step))?;
        Ok(self.g(&a, &b) / (2.0 * step))
    }
}
