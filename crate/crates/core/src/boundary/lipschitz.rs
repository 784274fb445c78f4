use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BoundaryGraph;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::linalg::Point;

/// A map from one boundary to another.
#[derive(Clone)]
pub struct BoundaryMap {
    pub name: String,
    f: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
}

impl fmt::Debug for BoundaryMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BoundaryMap({})", self.name)
    }
}

impl BoundaryMap {
    pub fn new(name: &str, f: impl Fn(&Point) -> Point + Send + Sync + 'static) -> Self {
        BoundaryMap { name: name.into(), f: Arc::new(f) }
    }

    pub fn apply(&self, p: &Point) -> Point {
        (self.f)(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LipschitzReport {
    pub ratio: f64,
    pub pairs_used: usize,
    pub floor: f64,
    pub worst_pair: Option<(usize, usize)>,
}

/// Largest `d'_H(F p, F q) / d_H(p, q)` over sampled node pairs with
/// `d_H` above five median edge weights.
pub fn lipschitz_estimate(
    graph: &BoundaryGraph,
    target: &BoundaryGraph,
    target_domain: &Domain,
    map: &BoundaryMap,
    n_pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<LipschitzReport> {
    let floor = 5.0 * graph.median_weight();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.len();
    let mut images: Vec<Option<usize>> = vec![None; n];
    let mut image = |i: usize| -> Result<usize> {
        if let Some(s) = images[i] {
            return Ok(s);
        }
        let q = map.apply(graph.node(i));
        let rho = target_domain.rho(&q);
        if !(rho.abs() <= tol * (1.0 + target_domain.gradient(&q).norm())) {
            return Err(Error::ImageOffBoundary { rho });
        }
        let s = target.snap(&q);
        images[i] = Some(s);
        Ok(s)
    };
    let mut ratio = 0.0;
    let mut used = 0;
    let mut worst = None;
    let mut attempts = 0;
    while used < n_pairs && attempts < 50 * n_pairs.max(1) {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let d = graph.node_distance(i, j);
        if i == j || d < floor {
            continue;
        }
        let di = target.node_distance(image(i)?, image(j)?);
        let r = di / d;
        used += 1;
        if r > ratio || worst.is_none() {
            ratio = r;
            worst = Some((i, j));
        }
    }
    Ok(LipschitzReport { ratio, pairs_used: used, floor, worst_pair: worst })
}
