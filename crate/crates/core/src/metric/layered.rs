use std::collections::BinaryHeap;

use crate::boundary::BoundaryGraph;
use crate::complex::Structure;
use crate::kobayashi::split_parts;
use crate::search::{State, NO_PRED};

/// Which length the layers carry: `g`-lengths or Kobayashi-estimate lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    G,
    K,
}

/// Boundary graph copied onto shells `S_t` at a geometric grid of depths,
/// with vertical edges joining the copies of each node.
#[derive(Debug)]
pub struct LayeredGraph {
    kind: LayerKind,
    n: usize,
    depths: Vec<f64>,
    heights: Vec<f64>,
    weights: Vec<Vec<f64>>,
    vertical: Vec<f64>,
}

/// Shortest-path tree from a set of seeds.
#[derive(Debug, Clone)]
pub struct Field {
    pub dist: Vec<f64>,
    pub pred: Vec<u32>,
}

/// Depths `epsilon * ratio^-(L-1-k)`, the deepest at or below `floor`.
pub fn level_depths(epsilon: f64, floor: f64, ratio: f64) -> Vec<f64> {
    let floor = floor.min(epsilon);
    let count = 1 + ((epsilon / floor).ln() / ratio.ln() - 1e-9).ceil().max(0.0) as usize;
    (0..count)
        .map(|k| epsilon * ratio.powi(-((count - 1 - k) as i32)))
        .collect()
}

impl LayeredGraph {
    pub(crate) fn build(
        kind: LayerKind,
        graph: &BoundaryGraph,
        structure: &Structure,
        depths: Vec<f64>,
    ) -> Self {
        let heights: Vec<f64> = depths.iter().map(|t| t.sqrt()).collect();
        let weights = depths
            .iter()
            .zip(&heights)
            .map(|(&t, &h)| {
                graph
                    .edges()
                    .iter()
                    .map(|e| match kind {
                        LayerKind::G => 2.0 * e.weight / h,
                        LayerKind::K => {
                            let ca = graph.contact(e.a);
                            let cb = graph.contact(e.b);
                            let pa = &ca.point - &ca.normal * t;
                            let pb = &cb.point - &cb.normal * t;
                            let mid = (&pa + &pb) * 0.5;
                            let (vn, vh) =
                                split_parts(&structure.at(&mid), &graph.contact(e.frame).normal, &(pb - pa));
                            vh.norm() / h + vn.norm() / t
                        }
                    })
                    .collect()
            })
            .collect();
        let vertical = depths
            .windows(2)
            .map(|w| vertical_cost(kind, w[0], w[1]))
            .collect();
        LayeredGraph {
            kind,
            n: graph.len(),
            depths,
            heights,
            weights,
            vertical,
        }
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn levels(&self) -> usize {
        self.depths.len()
    }

    pub fn depths(&self) -> &[f64] {
        &self.depths
    }

    pub fn height(&self, level: usize) -> f64 {
        self.heights[level]
    }

    pub fn node_count(&self) -> usize {
        self.n * self.depths.len()
    }

    pub fn id(&self, level: usize, site: usize) -> usize {
        level * self.n + site
    }

    /// `(level, boundary node)` of a layered node.
    pub fn split_id(&self, id: usize) -> (usize, usize) {
        (id / self.n, id % self.n)
    }

    pub fn horizontal(&self, level: usize, edge: usize) -> f64 {
        self.weights[level][edge]
    }

    pub fn vertical_cost(&self, t1: f64, t2: f64) -> f64 {
        vertical_cost(self.kind, t1, t2)
    }

    pub fn run(&self, graph: &BoundaryGraph, seeds: &[(usize, f64)]) -> Field {
        self.run_until(graph, seeds, &[])
    }

    /// Stops once no unsettled node can improve the best arrival at the
    /// `targets` (node, exit cost) list; a full run when it is empty.
    pub fn run_until(&self, graph: &BoundaryGraph, seeds: &[(usize, f64)], targets: &[(usize, f64)]) -> Field {
        let total = self.node_count();
        let mut dist = vec![f64::INFINITY; total];
        let mut pred = vec![NO_PRED; total];
        let mut heap = BinaryHeap::new();
        for &(id, c) in seeds {
            if c < dist[id] {
                dist[id] = c;
                heap.push(State { cost: c, node: id as u32 });
            }
        }
        let top = self.depths.len() - 1;
        while let Some(State { cost, node }) = heap.pop() {
            let u = node as usize;
            if cost > dist[u] {
                continue;
            }
            if !targets.is_empty() {
                let best = targets.iter().map(|&(id, c)| dist[id] + c).fold(f64::INFINITY, f64::min);
                if cost >= best {
                    break;
                }
            }
            let (k, i) = self.split_id(u);
            let mut relax = |v: usize, w: f64| {
                let nc = cost + w;
                if nc < dist[v] {
                    dist[v] = nc;
                    pred[v] = node;
                    heap.push(State { cost: nc, node: v as u32 });
                }
            };
            for &(j, e) in graph.neighbours(i) {
                relax(k * self.n + j as usize, self.weights[k][e as usize]);
            }
            if k > 0 {
                relax(u - self.n, self.vertical[k - 1]);
            }
            if k < top {
                relax(u + self.n, self.vertical[k]);
            }
        }
        Field { dist, pred }
    }
}

fn vertical_cost(kind: LayerKind, t1: f64, t2: f64) -> f64 {
    let l = (t1 / t2).ln().abs();
    match kind {
        LayerKind::G => 0.5 * l,
        LayerKind::K => l,
    }
}
