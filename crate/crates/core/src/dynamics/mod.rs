//! Iteration of self-maps of the domain and classification of their orbits.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::HeightProjection;
use crate::error::{Error, Result};
use crate::linalg::{lex_cmp, quantile, Point};
use crate::metric::{HyperbolicModel, Metric};

pub trait SelfMap: Send + Sync {
    fn name(&self) -> String;
    fn apply(&self, x: &Point) -> Point;
}

/// `x -> A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub shift: Point,
    name: String,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, shift: Point, name: &str) -> Self {
        assert_eq!(matrix.nrows(), shift.len());
        AffineMap {
            matrix,
            shift,
            name: name.into(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), Point::zeros(dim), "identity")
    }

    /// `x -> p + factor (x - p)`.
    pub fn contraction_to(p: &Point, factor: f64) -> Self {
        let n = p.len();
        Self::new(
            DMatrix::identity(n, n) * factor,
            p * (1.0 - factor),
            &format!("contraction({factor})"),
        )
    }

    /// Rotation by `angles[k]` in the plane of coordinates `2k, 2k + 1`;
    /// commutes with the standard structure.
    pub fn rotation(angles: &[f64]) -> Self {
        let n = 2 * angles.len();
        let mut m = DMatrix::zeros(n, n);
        for (k, a) in angles.iter().enumerate() {
            let (s, c) = a.sin_cos();
            m[(2 * k, 2 * k)] = c;
            m[(2 * k, 2 * k + 1)] = -s;
            m[(2 * k + 1, 2 * k)] = s;
            m[(2 * k + 1, 2 * k + 1)] = c;
        }
        Self::new(m, Point::zeros(n), "rotation")
    }

    /// Commutator norm `|A J - J A|` with a constant structure.
    pub fn commutator(&self, j: &DMatrix<f64>) -> f64 {
        (&self.matrix * j - j * &self.matrix).abs().max()
    }
}

impl SelfMap for AffineMap {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn apply(&self, x: &Point) -> Point {
        &self.matrix * x + &self.shift
    }
}

/// A map given by a closure.
pub struct FnMap<F> {
    name: String,
    f: F,
}

impl<F: Fn(&Point) -> Point + Send + Sync> FnMap<F> {
    pub fn new(name: &str, f: F) -> Self {
        FnMap { name: name.into(), f }
    }
}

impl<F: Fn(&Point) -> Point + Send + Sync> SelfMap for FnMap<F> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn apply(&self, x: &Point) -> Point {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub start: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    pub heights: Vec<f64>,
    pub projections: Vec<Vec<f64>>,
    /// Distances from the basepoint when one was given, else empty.
    pub distances: Vec<f64>,
    /// Stopped because the squared height fell below the floor.
    pub boundary_stop: bool,
}

impl OrbitRecord {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn last(&self) -> Point {
        Point::from_vec(self.iterates.last().unwrap().clone())
    }

    pub fn last_projection(&self) -> Point {
        Point::from_vec(self.projections.last().unwrap().clone())
    }

    /// CSV rows `k, x_1.., height, p_1..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.start.len();
        let mut header = vec!["k".to_string()];
        header.extend((0..n).map(|i| format!("x{i}")));
        header.push("height".into());
        header.extend((0..n).map(|i| format!("p{i}")));
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for k in 0..self.len() {
            let mut row = vec![k.to_string()];
            row.extend(self.iterates[k].iter().map(|v| format!("{v:.17e}")));
            row.push(format!("{:.17e}", self.heights[k]));
            row.extend(self.projections[k].iter().map(|v| format!("{v:.17e}")));
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Iteration stops once `h^2 < stop_fraction * eps`.
pub const STOP_FRACTION: f64 = 1e-6;

/// Orbit of `x0` under `f` for at most `n_max` steps, with the start as
/// iterate 0.
pub fn iterate(
    f: &dyn SelfMap,
    proj: &HeightProjection,
    x0: &Point,
    n_max: usize,
    basepoint: Option<(&dyn Metric, &Point)>,
) -> Result<OrbitRecord> {
    let domain = proj.domain();
    let rho0 = domain.rho(x0);
    if !(rho0 < 0.0) {
        return Err(Error::PointOutsideDomain { rho: rho0 });
    }
    let floor = STOP_FRACTION * proj.epsilon();
    let mut rec = OrbitRecord {
        start: x0.iter().cloned().collect(),
        iterates: Vec::new(),
        heights: Vec::new(),
        projections: Vec::new(),
        distances: Vec::new(),
        boundary_stop: false,
    };
    let mut x = x0.clone();
    for step in 0..=n_max {
        let foot = proj.foot(&x)?;
        rec.iterates.push(x.iter().cloned().collect());
        rec.heights.push(foot.distance.sqrt());
        rec.projections.push(foot.point.iter().cloned().collect());
        if let Some((m, w)) = basepoint {
            rec.distances.push(m.distance(w, &x)?);
        }
        if foot.distance < floor {
            rec.boundary_stop = true;
            break;
        }
        if step == n_max {
            break;
        }
        let y = f.apply(&x);
        let rho = domain.rho(&y);
        if !(rho < 0.0) {
            return Err(Error::MapEscapedDomain { step: step + 1, rho });
        }
        x = y;
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemicontractionReport {
    pub map: String,
    pub functional: String,
    pub pairs: usize,
    /// Largest `dist(F p, F q) - dist(p, q)`.
    pub max_defect: f64,
    pub slack: f64,
    pub pass: bool,
    pub ratio_q10: f64,
    pub ratio_q50: f64,
    pub ratio_q90: f64,
    pub ratio_max: f64,
}

pub fn check_semicontraction(
    f: &dyn SelfMap,
    metric: &dyn Metric,
    proj: &HeightProjection,
    pairs: &[(Point, Point)],
    slack: f64,
) -> Result<SemicontractionReport> {
    let domain = proj.domain();
    let rows = pairs
        .par_iter()
        .map(|(p, q)| {
            let (fp, fq) = (f.apply(p), f.apply(q));
            for y in [&fp, &fq] {
                let rho = domain.rho(y);
                if !(rho < 0.0) {
                    return Err(Error::MapEscapedDomain { step: 1, rho });
                }
            }
            let before = metric.distance(p, q)?;
            let after = metric.distance(&fp, &fq)?;
            Ok((after - before, if before > 0.0 { after / before } else { 1.0 }))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let max_defect = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let ratios: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(SemicontractionReport {
        map: f.name(),
        functional: metric.name(),
        pairs: pairs.len(),
        max_defect,
        slack,
        pass: max_defect <= slack,
        ratio_q10: quantile(&ratios, 0.1),
        ratio_q50: quantile(&ratios, 0.5),
        ratio_q90: quantile(&ratios, 0.9),
        ratio_max: ratios.iter().cloned().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum OrbitVerdict {
    Bounded { min_tail_height: f64 },
    ConvergesTo { point: Vec<f64>, spread: f64 },
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub min_starts: usize,
    pub min_iterates: usize,
    /// Bounded when every tail height is at least this times `sqrt(eps)`.
    pub bounded_fraction: f64,
    /// Largest boundary distance between limit projections.
    pub spread_tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            min_starts: 5,
            min_iterates: 50,
            bounded_fraction: 0.05,
            spread_tol: 1e-2,
        }
    }
}

/// Bounded, convergent to one boundary point, or inconclusive. Tails are
/// the last half of each orbit.
pub fn classify_orbits(model: &HyperbolicModel, orbits: &[OrbitRecord], cfg: &ClassifyConfig) -> OrbitVerdict {
    if orbits.len() < cfg.min_starts {
        return OrbitVerdict::Inconclusive {
            reason: format!("{} starts, need {}", orbits.len(), cfg.min_starts),
        };
    }
    if let Some(o) = orbits.iter().find(|o| !o.boundary_stop && o.len() < cfg.min_iterates) {
        return OrbitVerdict::Inconclusive {
            reason: format!("orbit with {} iterates, need {}", o.len(), cfg.min_iterates),
        };
    }
    let floor = cfg.bounded_fraction * model.epsilon().sqrt();
    let tail = |o: &OrbitRecord| o.len() / 2;
    let min_tail = orbits
        .iter()
        .flat_map(|o| o.heights[tail(o)..].iter().cloned())
        .fold(f64::INFINITY, f64::min);
    if min_tail >= floor {
        return OrbitVerdict::Bounded {
            min_tail_height: min_tail,
        };
    }
    let approaching = orbits
        .iter()
        .all(|o| o.boundary_stop || *o.heights.last().unwrap() < floor);
    if !approaching {
        return OrbitVerdict::Inconclusive {
            reason: format!("tail heights reach {min_tail:.3e} below the floor {floor:.3e}, yet some orbit ends above it"),
        };
    }
    // Cauchy check on each tail, then agreement across starts.
    for (i, o) in orbits.iter().enumerate() {
        let end = o.last_projection();
        let k = o.len() - 1 - (o.len() - tail(o)) / 4;
        let drift = model.graph().d_h_between(&Point::from_vec(o.projections[k].clone()), &end);
        if drift > cfg.spread_tol {
            return OrbitVerdict::Inconclusive {
                reason: format!("orbit {i} tail projections drift by {drift:.3e}"),
            };
        }
    }
    let mut ends: Vec<Point> = orbits.iter().map(|o| o.last_projection()).collect();
    ends.sort_by(lex_cmp);
    let mut spread: f64 = 0.0;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            spread = spread.max(model.graph().d_h_between(&ends[i], &ends[j]));
        }
    }
    if spread > cfg.spread_tol {
        return OrbitVerdict::Inconclusive {
            reason: format!("limit projections spread {spread:.3e}"),
        };
    }
    OrbitVerdict::ConvergesTo {
        point: ends[0].iter().cloned().collect(),
        spread,
    }
}
