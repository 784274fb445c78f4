//! Weighted boundary graphs approximating the horizontal metric `d_H`.

mod io;
mod lipschitz;

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex::{contact_at, ContactData, Structure};
use crate::domain::{boundary_samples, flow_to_boundary, Domain};
use crate::error::{Error, Result};
use crate::linalg::Point;
use crate::search::{State, UnionFind, NO_PRED};

pub use io::GraphFile;
pub use lipschitz::{lipschitz_estimate, BoundaryMap, LipschitzReport};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    #[default]
    QuasiUniform,
    CurvatureWeighted,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GraphParams {
    pub n_nodes: usize,
    pub k_neighbors: usize,
    pub anisotropy: f64,
    pub seed: u64,
    pub sampling: SamplingScheme,
    /// Candidate pool size as a multiple of `n_nodes`.
    pub oversample: usize,
    /// Cap for the neighbour count when doubling to reconnect.
    pub max_k: usize,
    /// Euclidean candidates per node, as a multiple of `max_k`, among which
    /// neighbours are ranked by anisotropic length.
    pub candidates: usize,
    pub contact_floor: f64,
    pub refinement: u32,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            n_nodes: 1000,
            k_neighbors: 12,
            anisotropy: 8.0,
            seed: 1,
            sampling: SamplingScheme::QuasiUniform,
            oversample: 4,
            max_k: 96,
            candidates: 4,
            contact_floor: 1e-6,
            refinement: 0,
        }
    }
}

impl GraphParams {
    /// Node count after `refinement` doublings.
    pub fn effective_nodes(&self) -> usize {
        self.n_nodes << self.refinement
    }

    pub fn refined(&self, levels: u32) -> Self {
        GraphParams {
            refinement: self.refinement + levels,
            ..self.clone()
        }
    }
}

/// A point of the metric graph: a node or a point on an edge at fraction
/// `s` from `a` towards `b` (`a < b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Site {
    Node(usize),
    Edge { a: usize, b: usize, s: f64 },
}

fn site_key(s: &Site) -> (usize, usize, u64) {
    match *s {
        Site::Node(i) => (i, i, 0),
        Site::Edge { a, b, s } => (a, b, s.to_bits()),
    }
}

impl Site {
    /// Midpoint of two sites when both lie on one edge, `None` otherwise.
    pub fn midpoint(&self, other: &Site, graph: &BoundaryGraph) -> Option<Site> {
        match (*self, *other) {
            (Site::Node(i), Site::Node(j)) => {
                if i == j {
                    Some(Site::Node(i))
                } else {
                    graph.edge_between(i, j).map(|_| Site::edge(i, j, 0.5))
                }
            }
            (Site::Node(i), Site::Edge { a, b, s }) | (Site::Edge { a, b, s }, Site::Node(i)) => {
                if i == a {
                    Some(Site::edge(a, b, 0.5 * s))
                } else if i == b {
                    Some(Site::edge(a, b, 0.5 * (1.0 + s)))
                } else {
                    None
                }
            }
            (Site::Edge { a, b, s }, Site::Edge { a: c, b: d, s: t }) => {
                if a == c && b == d {
                    Some(Site::edge(a, b, 0.5 * (s + t)))
                } else {
                    None
                }
            }
        }
    }

    pub fn edge(a: usize, b: usize, s: f64) -> Site {
        if s <= 0.0 {
            Site::Node(a)
        } else if s >= 1.0 {
            Site::Node(b)
        } else if a < b {
            Site::Edge { a, b, s }
        } else {
            Site::Edge { a: b, b: a, s: 1.0 - s }
        }
    }

    /// Nearest node, ties to the lower index.
    pub fn nearest_node(&self) -> usize {
        match *self {
            Site::Node(i) => i,
            Site::Edge { a, b, s } => {
                if s <= 0.5 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    /// Node whose contact data measured the chord.
    pub frame: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPath {
    pub nodes: Vec<usize>,
    pub points: Vec<Point>,
    pub length: f64,
}

/// Horizontal, normal and remaining components of a chord in a contact frame.
pub fn chord_components(c: &ContactData, chord: &Point) -> (f64, f64, f64) {
    let total = chord.norm_squared();
    let cn = chord.dot(&c.normal);
    let ch2: f64 = c.basis.iter().map(|b| b.dot(chord).powi(2)).sum();
    let cr2 = (total - cn * cn - ch2).max(0.0);
    (ch2.sqrt(), cn.abs(), cr2.sqrt())
}

/// `sqrt(|c_H|^2 + |c_N|^2 + lambda^2 |c_R|^2)`.
pub fn anisotropic_length(c: &ContactData, chord: &Point, lambda: f64) -> f64 {
    let (h, n, r) = chord_components(c, chord);
    (h * h + n * n + lambda * lambda * r * r).sqrt()
}

#[derive(Debug)]
pub struct BoundaryGraph {
    params: GraphParams,
    k_used: usize,
    nodes: Vec<Point>,
    contact: Vec<ContactData>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adj: Vec<(u32, u32)>,
    rows: Vec<OnceLock<Box<[f64]>>>,
    max_chord: f64,
}

fn mean_curvature(domain: &Domain, p: &Point) -> f64 {
    let n = domain.dim();
    let g = domain.gradient(p);
    let gn = g.norm();
    let nr = &g / gn;
    let proj = DMatrix::identity(n, n) - &nr * nr.transpose();
    let s = &proj * domain.hessian(p) * &proj / gn;
    let s = (&s + s.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().map(|v| v.abs()).sum::<f64>() / (n - 1) as f64
}

fn select_nodes(domain: &Domain, params: &GraphParams) -> Result<Vec<Point>> {
    let n = params.effective_nodes();
    if n < 2 {
        return Err(Error::Config("a boundary graph needs at least two nodes".into()));
    }
    let pool = boundary_samples(domain, n * params.oversample.max(1), params.seed)?;
    match params.sampling {
        SamplingScheme::QuasiUniform => {
            // farthest-point selection, ties to the lower index
            let mut chosen = Vec::with_capacity(n);
            let mut dist = vec![f64::INFINITY; pool.len()];
            let mut cur = 0;
            for _ in 0..n {
                chosen.push(pool[cur].clone());
                let p = &pool[cur];
                let mut best = (f64::NEG_INFINITY, 0);
                for (i, q) in pool.iter().enumerate() {
                    let d = (q - p).norm_squared();
                    if d < dist[i] {
                        dist[i] = d;
                    }
                    if dist[i] > best.0 {
                        best = (dist[i], i);
                    }
                }
                cur = best.1;
            }
            Ok(chosen)
        }
        SamplingScheme::CurvatureWeighted => {
            let w: Vec<f64> = pool.iter().map(|p| mean_curvature(domain, p)).collect();
            let wmax = w.iter().cloned().fold(0.0, f64::max).max(1e-300);
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
            let mut taken = vec![false; pool.len()];
            let mut chosen = Vec::with_capacity(n);
            for _pass in 0..64 {
                for (i, p) in pool.iter().enumerate() {
                    if chosen.len() == n {
                        break;
                    }
                    if !taken[i] && rng.random::<f64>() * wmax <= w[i] {
                        taken[i] = true;
                        chosen.push(p.clone());
                    }
                }
            }
            for (i, p) in pool.iter().enumerate() {
                if chosen.len() == n {
                    break;
                }
                if !taken[i] {
                    chosen.push(p.clone());
                }
            }
            Ok(chosen)
        }
    }
}

/// Nearest neighbours of every node, sorted by distance then index.
fn neighbour_lists(nodes: &[Point], k: usize) -> Vec<Vec<usize>> {
    let n = nodes.len();
    let k = k.min(n - 1);
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| ((&nodes[j] - &nodes[i]).norm_squared(), j))
                .collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k, cmp);
                d.truncate(k);
            }
            d.sort_by(cmp);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

impl BoundaryGraph {
    pub fn build(domain: &Domain, structure: &Structure, params: &GraphParams) -> Result<Self> {
        Self::build_with_points(domain, structure, params, &[])
    }

    /// Builds the graph with `extra` boundary points appended as nodes
    /// after the sampled ones, so that they are resolved exactly.
    pub fn build_with_points(
        domain: &Domain,
        structure: &Structure,
        params: &GraphParams,
        extra: &[Point],
    ) -> Result<Self> {
        if params.anisotropy < 1.0 {
            return Err(Error::Config("anisotropy must be at least 1".into()));
        }
        if params.k_neighbors == 0 {
            return Err(Error::Config("k_neighbors must be positive".into()));
        }
        let mut nodes = select_nodes(domain, params)?;
        for p in extra {
            let q = flow_to_boundary(domain, p, 1e-13, 200)
                .ok_or_else(|| Error::SamplingFailed("extra point did not reach the boundary".into()))?;
            nodes.push(q);
        }
        let contact = nodes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                contact_at(domain, structure, p, params.contact_floor).map_err(|e| {
                    Error::ContactUnavailable {
                        node: i,
                        reason: e.to_string(),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = nodes.len();
        let lambda = params.anisotropy;
        let kmax = params.max_k.max(params.k_neighbors).min(n - 1);
        let euclid = neighbour_lists(&nodes, (params.candidates * kmax).min(n - 1));
        // neighbours ranked by anisotropic chord length in the node's own frame
        let lists: Vec<Vec<usize>> = euclid
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut w: Vec<(f64, usize)> = l
                    .iter()
                    .map(|&j| (anisotropic_length(&contact[i], &(&nodes[j] - &nodes[i]), lambda), j))
                    .collect();
                w.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                w.into_iter().map(|(_, j)| j).collect()
            })
            .collect();
        let mut k = params.k_neighbors.min(n - 1);
        let pairs = loop {
            let mut uf = UnionFind::new(n);
            let mut pairs = Vec::new();
            for (i, l) in lists.iter().enumerate() {
                for &j in l.iter().take(k) {
                    uf.union(i, j);
                    pairs.push((i.min(j), i.max(j)));
                }
            }
            let comps = uf.components();
            if comps == 1 {
                pairs.sort_unstable();
                pairs.dedup();
                break pairs;
            }
            if k >= kmax {
                return Err(Error::GraphDisconnected { components: comps, k });
            }
            k = (2 * k).min(kmax);
        };
        let near = 16.min(n - 1);
        let edges: Vec<Edge> = pairs
            .iter()
            .map(|&(a, b)| {
                let mid = (&nodes[a] + &nodes[b]) * 0.5;
                let mut best = (f64::INFINITY, usize::MAX);
                let cands = [a, b]
                    .into_iter()
                    .chain(euclid[a].iter().take(near).copied())
                    .chain(euclid[b].iter().take(near).copied());
                for m in cands {
                    let d = (&nodes[m] - &mid).norm_squared();
                    if d < best.0 || (d == best.0 && m < best.1) {
                        best = (d, m);
                    }
                }
                let chord = &nodes[b] - &nodes[a];
                Edge {
                    a,
                    b,
                    weight: anisotropic_length(&contact[best.1], &chord, lambda),
                    frame: best.1,
                }
            })
            .collect();
        Ok(Self::assemble(params.clone(), k, nodes, contact, edges))
    }

    fn assemble(
        params: GraphParams,
        k_used: usize,
        nodes: Vec<Point>,
        contact: Vec<ContactData>,
        edges: Vec<Edge>,
    ) -> Self {
        let n = nodes.len();
        let mut deg = vec![0usize; n];
        for e in &edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0u32, 0u32); offsets[n]];
        for (id, e) in edges.iter().enumerate() {
            adj[fill[e.a]] = (e.b as u32, id as u32);
            fill[e.a] += 1;
            adj[fill[e.b]] = (e.a as u32, id as u32);
            fill[e.b] += 1;
        }
        let max_chord = edges
            .iter()
            .map(|e| (&nodes[e.a] - &nodes[e.b]).norm())
            .fold(0.0, f64::max);
        BoundaryGraph {
            params,
            k_used,
            rows: (0..n).map(|_| OnceLock::new()).collect(),
            nodes,
            contact,
            edges,
            offsets,
            adj,
            max_chord,
        }
    }

    /// Same nodes and edges with weights recomputed for another anisotropy.
    pub fn reweighted(&self, anisotropy: f64) -> Self {
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                weight: anisotropic_length(
                    &self.contact[e.frame],
                    &(&self.nodes[e.b] - &self.nodes[e.a]),
                    anisotropy,
                ),
                ..*e
            })
            .collect();
        let params = GraphParams {
            anisotropy,
            ..self.params.clone()
        };
        Self::assemble(params, self.k_used, self.nodes.clone(), self.contact.clone(), edges)
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn k_used(&self) -> usize {
        self.k_used
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    pub fn contact(&self, i: usize) -> &ContactData {
        &self.contact[i]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// `(neighbour, edge id)` pairs of node `i`.
    pub fn neighbours(&self, i: usize) -> &[(u32, u32)] {
        &self.adj[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.neighbours(a)
            .iter()
            .find(|&&(t, _)| t as usize == b)
            .map(|&(_, e)| e as usize)
    }

    pub fn min_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    pub fn median_weight(&self) -> f64 {
        let mut w: Vec<f64> = self.edges.iter().map(|e| e.weight).collect();
        w.sort_by(|a, b| a.total_cmp(b));
        w[w.len() / 2]
    }

    /// Longest Euclidean edge chord.
    pub fn max_chord(&self) -> f64 {
        self.max_chord
    }

    /// Nearest node by Euclidean distance, ties to the lower index.
    pub fn snap(&self, p: &Point) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.nodes.iter().enumerate() {
            let d = (q - p).norm_squared();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Nearest `k` nodes, sorted by distance then index.
    pub fn nearest_nodes(&self, p: &Point, k: usize) -> Vec<(usize, f64)> {
        let mut d: Vec<(f64, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, q)| ((q - p).norm_squared(), i))
            .collect();
        let k = k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(q, i)| (i, q.sqrt())).collect()
    }

    pub(crate) fn dijkstra(&self, source: usize, target: Option<usize>) -> (Vec<f64>, Vec<u32>) {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![NO_PRED; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State { cost: 0.0, node: source as u32 });
        while let Some(State { cost, node }) = heap.pop() {
            let u = node as usize;
            if cost > dist[u] {
                continue;
            }
            if Some(u) == target {
                break;
            }
            for &(v, e) in self.neighbours(u) {
                let nc = cost + self.edges[e as usize].weight;
                let v = v as usize;
                if nc < dist[v] {
                    dist[v] = nc;
                    pred[v] = node;
                    heap.push(State { cost: nc, node: v as u32 });
                }
            }
        }
        (dist, pred)
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].get_or_init(|| self.dijkstra(i, None).0.into_boxed_slice())
    }

    /// Graph distance between nodes; symmetric bit for bit.
    pub fn node_distance(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.row(a)[b]
    }

    /// `d_H` between boundary points snapped to their nearest nodes.
    pub fn d_h(&self, p: &Point, q: &Point) -> f64 {
        self.node_distance(self.snap(p), self.snap(q))
    }

    fn edge_len(&self, a: usize, b: usize) -> f64 {
        let e = self.edge_between(a, b).expect("site on a missing edge");
        self.edges[e].weight
    }

    /// Distance between points of the metric graph; symmetric bit for bit.
    pub fn site_distance(&self, x: &Site, y: &Site) -> f64 {
        let (x, y) = if site_key(x) <= site_key(y) { (x, y) } else { (y, x) };
        match (*x, *y) {
            (Site::Node(i), Site::Node(j)) => self.node_distance(i, j),
            (Site::Node(i), Site::Edge { a, b, s }) | (Site::Edge { a, b, s }, Site::Node(i)) => {
                let w = self.edge_len(a, b);
                (s * w + self.node_distance(a, i)).min((1.0 - s) * w + self.node_distance(b, i))
            }
            (Site::Edge { a, b, s }, Site::Edge { a: c, b: d, s: t }) => {
                let w1 = self.edge_len(a, b);
                let w2 = self.edge_len(c, d);
                let mut best = f64::INFINITY;
                if a == c && b == d {
                    best = (s - t).abs() * w1;
                }
                for (u, du) in [(a, s * w1), (b, (1.0 - s) * w1)] {
                    for (v, dv) in [(c, t * w2), (d, (1.0 - t) * w2)] {
                        best = best.min(du + self.node_distance(u, v) + dv);
                    }
                }
                best
            }
        }
    }

    /// Shortest node path between the nodes nearest to `p` and `q`.
    pub fn boundary_geodesic(&self, p: &Point, q: &Point) -> BoundaryPath {
        self.node_path(self.snap(p), self.snap(q))
    }

    pub fn node_path(&self, i: usize, j: usize) -> BoundaryPath {
        if i == j {
            return BoundaryPath {
                nodes: vec![i],
                points: vec![self.nodes[i].clone()],
                length: 0.0,
            };
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let (dist, pred) = self.dijkstra(a, None);
        let mut nodes = vec![b];
        let mut cur = b;
        while cur != a {
            cur = pred[cur] as usize;
            nodes.push(cur);
        }
        // nodes now runs b -> a
        if i == a {
            nodes.reverse();
        }
        BoundaryPath {
            points: nodes.iter().map(|&k| self.nodes[k].clone()).collect(),
            nodes,
            length: dist[b],
        }
    }

    /// The `count` cheapest anisotropic chords from `p` to nearby nodes,
    /// measured in the frame of the nearest node.
    pub fn attach(&self, p: &Point, count: usize) -> Vec<(usize, f64)> {
        let near = self.nearest_nodes(p, 4 * count);
        let frame = &self.contact[near[0].0];
        let mut w: Vec<(usize, f64)> = near
            .iter()
            .map(|&(i, _)| (i, anisotropic_length(frame, &(&self.nodes[i] - p), self.params.anisotropy)))
            .collect();
        w.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        w.truncate(count);
        w
    }

    /// `d_H` between arbitrary boundary points, attaching each to nearby
    /// nodes by anisotropic chords instead of snapping.
    pub fn d_h_between(&self, p: &Point, q: &Point) -> f64 {
        let ap = self.attach(p, 4);
        let aq = self.attach(q, 4);
        let mut best = f64::INFINITY;
        for &(i, wi) in &ap {
            for &(j, wj) in &aq {
                best = best.min(wi + self.node_distance(i, j) + wj);
            }
        }
        if (p - q).norm() <= self.max_chord {
            let frame = &self.contact[ap[0].0];
            best = best.min(anisotropic_length(frame, &(q - p), self.params.anisotropy));
        }
        best
    }

    /// Boundary point of a site: the chord point flowed back to the boundary.
    pub fn site_boundary_point(&self, domain: &Domain, s: &Site) -> Point {
        match *s {
            Site::Node(i) => self.nodes[i].clone(),
            Site::Edge { .. } => {
                let c = self.site_chord_point(s);
                flow_to_boundary(domain, &c, 1e-13, 200).unwrap_or(c)
            }
        }
    }

    /// Boundary point of a site, by linear interpolation along the chord.
    pub fn site_chord_point(&self, s: &Site) -> Point {
        match *s {
            Site::Node(i) => self.nodes[i].clone(),
            Site::Edge { a, b, s } => &self.nodes[a] * (1.0 - s) + &self.nodes[b] * s,
        }
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile::from_graph(self)
    }

    pub fn from_file(file: &GraphFile, domain: &Domain, structure: &Structure) -> Result<Self> {
        file.to_graph(domain, structure)
    }

    pub(crate) fn from_parts(
        params: GraphParams,
        k_used: usize,
        nodes: Vec<Point>,
        contact: Vec<ContactData>,
        edges: Vec<Edge>,
    ) -> Self {
        Self::assemble(params, k_used, nodes, contact, edges)
    }
}
