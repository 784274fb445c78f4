//! Four-point hyperbolicity estimates, Gromov products and the comparison
//! of the Gromov boundary with the boundary of the domain.

mod sampler;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::metric::{HyperbolicModel, LayerKind, Metric};

pub use sampler::{Sampler, SamplerContext};

/// Four-point defect `(S1 - S2) / 2` of the largest two pair sums.
pub fn four_point_defect(d: [f64; 6]) -> f64 {
    // pairs: (xy, zt), (xz, yt), (xt, yz)
    let mut s = [d[0] + d[5], d[1] + d[4], d[2] + d[3]];
    s.sort_by(|a, b| b.total_cmp(a));
    0.5 * (s[0] - s[1])
}

fn six(m: &dyn Fn(usize, usize) -> Result<f64>) -> Result<[f64; 6]> {
    Ok([m(0, 1)?, m(0, 2)?, m(0, 3)?, m(1, 2)?, m(1, 3)?, m(2, 3)?])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstQuadruple {
    pub points: Vec<Vec<f64>>,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub delta: f64,
    pub quadruples: usize,
    pub worst: Option<WorstQuadruple>,
    pub functional: String,
    pub seed: u64,
    /// Quadruples whose evaluation failed; they do not enter `delta`.
    pub failures: usize,
    pub first_failure: Option<String>,
}

/// How quadruples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadrupleMode {
    /// Four new sampler points per quadruple.
    Fresh,
    /// Quadruples of distinct indices into a pool of this many points,
    /// with all pool distances computed once.
    Pool(usize),
}

pub fn four_point_delta(
    metric: &dyn Metric,
    sampler: &Sampler,
    ctx: &SamplerContext,
    n_quadruples: usize,
    seed: u64,
    mode: QuadrupleMode,
) -> Result<HyperbolicityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results: Vec<(Vec<Point>, Result<f64>)> = match mode {
        QuadrupleMode::Fresh => {
            let quads = (0..n_quadruples)
                .map(|_| (0..4).map(|_| sampler.draw(&mut rng, ctx)).collect::<Result<Vec<Point>>>())
                .collect::<Result<Vec<_>>>()?;
            quads
                .into_par_iter()
                .map(|q| {
                    let r = metric
                        .distance_matrix(&q)
                        .and_then(|m| six(&|i, j| Ok(m[i][j])))
                        .map(four_point_defect);
                    (q, r)
                })
                .collect()
        }
        QuadrupleMode::Pool(size) => {
            if size < 4 {
                return Err(Error::Precondition("a pool needs at least four points".into()));
            }
            let pool = (0..size).map(|_| sampler.draw(&mut rng, ctx)).collect::<Result<Vec<Point>>>()?;
            let m = metric.distance_matrix(&pool)?;
            (0..n_quadruples)
                .map(|_| {
                    let mut idx = [0usize; 4];
                    let mut k = 0;
                    while k < 4 {
                        let c = rng.random_range(0..size);
                        if !idx[..k].contains(&c) {
                            idx[k] = c;
                            k += 1;
                        }
                    }
                    let r = six(&|i, j| Ok(m[idx[i]][idx[j]])).map(four_point_defect);
                    (idx.iter().map(|&i| pool[i].clone()).collect(), r)
                })
                .collect()
        }
    };
    let mut report = HyperbolicityReport {
        delta: 0.0,
        quadruples: n_quadruples,
        worst: None,
        functional: metric.name(),
        seed,
        failures: 0,
        first_failure: None,
    };
    for (q, r) in results {
        match r {
            Ok(v) => {
                if report.worst.as_ref().map_or(true, |w| v > w.defect) {
                    report.worst = Some(WorstQuadruple {
                        points: q.iter().map(|p| p.iter().cloned().collect()).collect(),
                        defect: v,
                    });
                }
            }
            Err(e) => {
                report.failures += 1;
                if report.first_failure.is_none() {
                    report.first_failure = Some(e.to_string());
                }
            }
        }
    }
    report.delta = report.worst.as_ref().map_or(0.0, |w| w.defect.max(0.0));
    Ok(report)
}

/// `(x, y)_w = (d(x, w) + d(y, w) - d(x, y)) / 2`.
pub fn gromov_product(metric: &dyn Metric, x: &Point, y: &Point, w: &Point) -> Result<f64> {
    Ok(0.5 * (metric.distance(x, w)? + metric.distance(y, w)? - metric.distance(x, y)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Diverging,
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub verdict: Convergence,
    /// `m_k = min over i < j, i, j >= k of (x_i, x_j)_w`.
    pub tail_minima: Vec<f64>,
    pub growth: f64,
    pub slope: f64,
}

/// Diverging when the tail minima of pairwise products grow by at least
/// `threshold` along the prefix.
pub fn converges_at_infinity(
    metric: &dyn Metric,
    seq: &[Point],
    w: &Point,
    threshold: f64,
) -> Result<ConvergenceReport> {
    if seq.len() < 8 {
        return Err(Error::PrefixTooShort { len: seq.len(), min: 8 });
    }
    let mut pts = seq.to_vec();
    pts.push(w.clone());
    let m = metric.distance_matrix(&pts)?;
    let n = seq.len();
    let prod = |i: usize, j: usize| 0.5 * (m[i][n] + m[j][n] - m[i][j]);
    let tail_minima: Vec<f64> = (0..n - 1)
        .map(|k| {
            let mut lo = f64::INFINITY;
            for i in k..n {
                for j in i + 1..n {
                    lo = lo.min(prod(i, j));
                }
            }
            lo
        })
        .collect();
    let growth = tail_minima.last().unwrap() - tail_minima[0];
    let kn = tail_minima.len() as f64;
    let km = (kn - 1.0) / 2.0;
    let vm = tail_minima.iter().sum::<f64>() / kn;
    let (mut num, mut den) = (0.0, 0.0);
    for (k, v) in tail_minima.iter().enumerate() {
        num += (k as f64 - km) * (v - vm);
        den += (k as f64 - km).powi(2);
    }
    let slope = num / den;
    let verdict = if growth >= threshold && slope > 0.0 {
        Convergence::Diverging
    } else {
        Convergence::Bounded
    };
    Ok(ConvergenceReport {
        verdict,
        tail_minima,
        growth,
        slope,
    })
}

/// Points `p - t_i n_p` with `t_i = eps 2^-i`, `i = 0..=depth`.
pub fn normal_approach(model: &HyperbolicModel, p: &Point, depth: usize) -> Result<Vec<Point>> {
    let n = model.domain().normal(p)?;
    let eps = model.epsilon();
    Ok((0..=depth)
        .map(|i| p - &n * (eps * 0.5f64.powi(i as i32)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProduct {
    pub value: f64,
    /// Products along the normal approach, one per level.
    pub levels: Vec<f64>,
}

/// `(a, b)_w` for boundary points along normal approaches, refined until
/// the last three levels agree within `1e-3` (at least four levels).
pub fn boundary_product(
    metric: &dyn Metric,
    model: &HyperbolicModel,
    a: &Point,
    b: &Point,
    w: &Point,
    depth: usize,
) -> Result<BoundaryProduct> {
    if depth < 4 {
        return Err(Error::Precondition(format!("depth {depth} < 4")));
    }
    if (a - b).norm() == 0.0 {
        return Err(Error::Precondition("boundary points coincide".into()));
    }
    let xs = normal_approach(model, a, depth)?;
    let ys = normal_approach(model, b, depth)?;
    let mut levels = Vec::with_capacity(depth + 1);
    for i in 0..=depth {
        levels.push(gromov_product(metric, &xs[i], &ys[i], w)?);
        let k = levels.len();
        if k >= 4 {
            let tail = &levels[k - 3..];
            let scale = tail[2].abs().max(1.0);
            if (tail[1] - tail[0]).abs() <= 1e-3 * scale && (tail[2] - tail[1]).abs() <= 1e-3 * scale {
                return Ok(BoundaryProduct {
                    value: tail[2],
                    levels,
                });
            }
        }
    }
    Err(Error::NotStabilized { trend: levels })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationRow {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d_h: f64,
    pub product: f64,
    /// `exp(-(a, b)_w) / d_H(a, b)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub rows: Vec<IdentificationRow>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
    /// Smallest `C` with all ratios in `[1/C, C]`.
    pub c_star: f64,
}

pub fn boundary_identification(
    metric: &dyn Metric,
    model: &HyperbolicModel,
    pairs: &[(Point, Point)],
    w: &Point,
    depth: usize,
) -> Result<IdentificationReport> {
    let rows = pairs
        .iter()
        .map(|(a, b)| {
            let p = boundary_product(metric, model, a, b, w, depth)?;
            let dh = model.boundary_distance(a, b);
            Ok(IdentificationRow {
                a: a.iter().cloned().collect(),
                b: b.iter().cloned().collect(),
                d_h: dh,
                product: p.value,
                ratio: (-p.value).exp() / dh,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(IdentificationReport {
        spread: max_ratio / min_ratio,
        c_star: max_ratio.max(1.0 / min_ratio),
        min_ratio,
        max_ratio,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinnessReport {
    pub thinness: f64,
    /// Twice the largest distance between consecutive side points.
    pub slack: f64,
    pub side_points: [usize; 3],
}

/// Largest distance from a point of one discretized side to the union of
/// the other two, over all sides.
pub fn thinness_of_sides(metric: &dyn Metric, sides: [&[Point]; 3]) -> Result<ThinnessReport> {
    let mut all = Vec::new();
    let mut owner = Vec::new();
    for (s, side) in sides.iter().enumerate() {
        for p in side.iter() {
            all.push(p.clone());
            owner.push(s);
        }
    }
    let m = metric.distance_matrix(&all)?;
    let mut thin: f64 = 0.0;
    for i in 0..all.len() {
        let near = (0..all.len())
            .filter(|&j| owner[j] != owner[i])
            .map(|j| m[i][j])
            .fold(f64::INFINITY, f64::min);
        thin = thin.max(near);
    }
    let mut spacing: f64 = 0.0;
    let mut start = 0;
    for side in sides.iter() {
        for k in 1..side.len() {
            spacing = spacing.max(m[start + k - 1][start + k]);
        }
        start += side.len();
    }
    Ok(ThinnessReport {
        thinness: thin,
        slack: 2.0 * spacing,
        side_points: [sides[0].len(), sides[1].len(), sides[2].len()],
    })
}

fn decimate(pts: Vec<Point>, max: usize) -> Vec<Point> {
    if pts.len() <= max {
        return pts;
    }
    let n = pts.len();
    (0..max)
        .map(|i| pts[(i * (n - 1)) / (max - 1)].clone())
        .collect()
}

/// Thinness of the `d`-geodesic triangle on `x, y, z`, with each side
/// reduced to at most `max_points` points.
pub fn triangle_thinness(
    model: &HyperbolicModel,
    metric: &dyn Metric,
    x: &Point,
    y: &Point,
    z: &Point,
    max_points: usize,
) -> Result<ThinnessReport> {
    let s1 = decimate(model.geodesic(x, y)?.coords(), max_points);
    let s2 = decimate(model.geodesic(y, z)?.coords(), max_points);
    let s3 = decimate(model.geodesic(z, x)?.coords(), max_points);
    thinness_of_sides(metric, [&s1, &s2, &s3])
}

/// Straight segment cut into `count` equal pieces.
pub fn segment_points(a: &Point, b: &Point, count: usize) -> Vec<Point> {
    (0..=count)
        .map(|i| crate::linalg::lerp(a, b, i as f64 / count as f64))
        .collect()
}

/// `|(x, y)_w` under `d` minus the same expression under `g`|.
pub fn product_gap(model: &HyperbolicModel, x: &Point, y: &Point, w: &Point) -> Result<f64> {
    let (lx, ly, lw) = (model.locate(x)?, model.locate(y)?, model.locate(w)?);
    let d = |a, b| model.evaluate(LayerKind::G, a, b).value;
    let pd = 0.5 * (d(&lx, &lw) + d(&ly, &lw) - d(&lx, &ly));
    let pg = 0.5 * (model.g(&lx, &lw) + model.g(&ly, &lw) - model.g(&lx, &ly));
    Ok((pd - pg).abs())
}
