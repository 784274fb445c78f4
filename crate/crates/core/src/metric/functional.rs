use std::io::Write;
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use super::{CapCase, HyperbolicModel, LayerKind, Located};
use crate::error::{Error, Result};
use crate::linalg::{quantize, Point};

/// A distance function on points of the domain.
pub trait Metric: Send + Sync {
    fn name(&self) -> String;

    fn distance(&self, x: &Point, y: &Point) -> Result<f64>;

    /// Symmetric matrix of pairwise distances.
    fn distance_matrix(&self, pts: &[Point]) -> Result<Vec<Vec<f64>>> {
        let n = pts.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.distance(&pts[i], &pts[j])?;
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    G,
    D,
    #[serde(alias = "kob")]
    KobayashiEstimate,
    #[serde(alias = "euclid")]
    Euclidean,
    External,
}

type External = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
type Key = (Vec<i64>, Vec<i64>);

/// One of the distances of the construction, with a cache for the
/// expensive kinds keyed by quantized coordinates.
pub struct MetricFunctional {
    kind: MetricKind,
    name: String,
    model: Option<Arc<HyperbolicModel>>,
    external: Option<External>,
    cache: DashMap<Key, f64>,
}

impl std::fmt::Debug for MetricFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MetricFunctional({})", self.name)
    }
}

impl MetricFunctional {
    fn with_model(kind: MetricKind, name: &str, model: Arc<HyperbolicModel>) -> Self {
        MetricFunctional {
            kind,
            name: name.into(),
            model: Some(model),
            external: None,
            cache: DashMap::new(),
        }
    }

    pub fn g(model: Arc<HyperbolicModel>) -> Self {
        Self::with_model(MetricKind::G, "g", model)
    }

    pub fn d(model: Arc<HyperbolicModel>) -> Self {
        Self::with_model(MetricKind::D, "d", model)
    }

    pub fn kobayashi(model: Arc<HyperbolicModel>) -> Self {
        Self::with_model(MetricKind::KobayashiEstimate, "kobayashi_estimate", model)
    }

    pub fn euclidean() -> Self {
        MetricFunctional {
            kind: MetricKind::Euclidean,
            name: "euclidean".into(),
            model: None,
            external: None,
            cache: DashMap::new(),
        }
    }

    pub fn external(name: &str, f: impl Fn(&Point, &Point) -> f64 + Send + Sync + 'static) -> Self {
        MetricFunctional {
            kind: MetricKind::External,
            name: name.into(),
            model: None,
            external: Some(Arc::new(f)),
            cache: DashMap::new(),
        }
    }

    pub fn from_kind(kind: MetricKind, model: Arc<HyperbolicModel>) -> Result<Self> {
        Ok(match kind {
            MetricKind::G => Self::g(model),
            MetricKind::D => Self::d(model),
            MetricKind::KobayashiEstimate => Self::kobayashi(model),
            MetricKind::Euclidean => Self::euclidean(),
            MetricKind::External => {
                return Err(Error::Config("external metrics are built from a closure".into()))
            }
        })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn model(&self) -> Option<&Arc<HyperbolicModel>> {
        self.model.as_ref()
    }

    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    fn key(x: &Point, y: &Point) -> Key {
        let (a, b) = (quantize(x), quantize(y));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn uses_cache(&self) -> bool {
        matches!(self.kind, MetricKind::D | MetricKind::KobayashiEstimate)
    }

    fn layer_kind(&self) -> LayerKind {
        match self.kind {
            MetricKind::KobayashiEstimate => LayerKind::K,
            _ => LayerKind::G,
        }
    }

    fn compute(&self, x: &Point, y: &Point) -> Result<f64> {
        match self.kind {
            MetricKind::Euclidean => Ok((x - y).norm()),
            MetricKind::External => Ok((self.external.as_ref().unwrap())(x, y)),
            MetricKind::G => self.model.as_ref().unwrap().g_value(x, y),
            MetricKind::D | MetricKind::KobayashiEstimate => {
                let m = self.model.as_ref().unwrap();
                let (a, b) = (m.locate(x)?, m.locate(y)?);
                Ok(m.evaluate(self.layer_kind(), &a, &b).value)
            }
        }
    }

    /// Length of a polyline under this functional.
    pub fn path_length(&self, path: &super::Polyline, tol: f64) -> Result<super::PathLength> {
        match self.kind {
            MetricKind::G => self.model.as_ref().unwrap().g_path_length(path, tol),
            MetricKind::D => self.model.as_ref().unwrap().d_path_length(path, tol),
            MetricKind::KobayashiEstimate => self.model.as_ref().unwrap().k_length(path, tol),
            _ => {
                let segments: Vec<f64> = path
                    .points
                    .windows(2)
                    .map(|w| self.distance(&w[0].x, &w[1].x))
                    .collect::<Result<_>>()?;
                Ok(super::PathLength {
                    total: segments.iter().sum(),
                    segments,
                })
            }
        }
    }
}

impl Metric for MetricFunctional {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        if !self.uses_cache() {
            return self.compute(x, y);
        }
        let key = Self::key(x, y);
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        let v = self.compute(x, y)?;
        self.cache.insert(key, v);
        Ok(v)
    }

    fn distance_matrix(&self, pts: &[Point]) -> Result<Vec<Vec<f64>>> {
        let n = pts.len();
        if self.kind == MetricKind::G {
            let model = self.model.as_ref().unwrap();
            let locs = pts.iter().map(|p| model.locate(p)).collect::<Result<Vec<Located>>>()?;
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = model.g(&locs[i], &locs[j]);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            return Ok(m);
        }
        if !self.uses_cache() {
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = self.compute(&pts[i], &pts[j])?;
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            return Ok(m);
        }
        let model = self.model.as_ref().unwrap();
        let locs = pts.iter().map(|p| model.locate(p)).collect::<Result<Vec<Located>>>()?;
        let m = model.pairwise(self.layer_kind(), &locs);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                self.cache.insert(Self::key(&pts[i], &pts[j]), m[i][j]);
            }
        }
        Ok(m)
    }
}

/// Largest `|d - g|` over a sample, overall and per cap case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CEstimate {
    pub value: f64,
    pub short: f64,
    pub middle: f64,
    pub long: f64,
    /// Smallest `d - g`; negative values mean the lower bracket failed.
    pub min_gap: f64,
    pub pairs: usize,
}

pub fn estimate_c(model: &HyperbolicModel, pairs: &[(Point, Point)]) -> Result<CEstimate> {
    let mut est = CEstimate {
        value: 0.0,
        short: 0.0,
        middle: 0.0,
        long: 0.0,
        min_gap: f64::INFINITY,
        pairs: pairs.len(),
    };
    for (x, y) in pairs {
        let (a, b) = (model.locate(x)?, model.locate(y)?);
        let g = model.g(&a, &b);
        let ev = model.evaluate(LayerKind::G, &a, &b);
        let gap = ev.value - g;
        est.value = est.value.max(gap.abs());
        est.min_gap = est.min_gap.min(gap);
        let both_in = model.in_collar(&a) && model.in_collar(&b);
        if both_in {
            match ev.case {
                Some(CapCase::Short) => est.short = est.short.max(gap.abs()),
                Some(CapCase::Middle) => est.middle = est.middle.max(gap.abs()),
                Some(CapCase::Long) => est.long = est.long.max(gap.abs()),
                None => {}
            }
        }
    }
    Ok(est)
}

/// Long-format CSV: `i, j, value` for every ordered pair.
pub fn export_distance_csv<W: Write>(out: W, matrix: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "value"]).map_err(|e| Error::Io(e.to_string()))?;
    for (i, row) in matrix.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), format!("{v:.17e}")])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    w.flush()?;
    Ok(())
}
