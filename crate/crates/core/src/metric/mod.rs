//! The function `g`, the length metric `d` it induces on the domain, and
//! the paths used to bound and compute `d`.

mod functional;
mod layered;
mod path;

use std::cmp::Ordering;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryGraph, GraphParams, Site};
use crate::complex::Structure;
use crate::domain::{CollarConfig, Domain, HeightProjection};
use crate::error::{Error, Result};
use crate::linalg::{lex_cmp, Point};
use crate::search::NO_PRED;

pub use functional::{
    estimate_c, export_distance_csv, CEstimate, Metric, MetricFunctional, MetricKind,
};
pub use layered::{level_depths, Field, LayerKind, LayeredGraph};
pub use path::{PathLength, Polyline};

/// An interior point with its height data and the metric-graph site that
/// stands for its projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Located {
    pub x: Point,
    /// Euclidean distance to the boundary.
    pub depth: f64,
    pub height: f64,
    pub foot: Point,
    pub normal: Point,
    pub site: Site,
}

impl Located {
    /// Point on the same normal at another depth.
    pub fn at_depth(&self, t: f64) -> Located {
        Located {
            x: &self.foot - &self.normal * t,
            depth: t,
            height: t.sqrt(),
            foot: self.foot.clone(),
            normal: self.normal.clone(),
            site: self.site,
        }
    }
}

/// Which construction realizes the composite upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapCase {
    /// `d_H <= h`: horizontal at the common height.
    Short,
    /// `h <= d_H <= sqrt(eps)`: horizontal at height `d_H`.
    Middle,
    /// `d_H >= sqrt(eps)`: horizontal on the collar shell.
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DEvaluation {
    pub value: f64,
    /// `g`, or its analogue through the collar shell for far points.
    pub lower: f64,
    /// Composite-path bound.
    pub upper: f64,
    /// Layered-graph value before clamping; infinite if not used.
    pub graph: f64,
    pub case: Option<CapCase>,
}

/// Collar representative: the point itself, or its foot on the collar
/// shell together with the straight-line offset.
#[derive(Debug, Clone)]
struct Rep {
    loc: Located,
    offset: f64,
    outside: bool,
}

pub struct HyperbolicModel {
    proj: Arc<HeightProjection>,
    structure: Structure,
    graph: Arc<BoundaryGraph>,
    ratio: f64,
    floor: f64,
    spacing: f64,
    g_layers: OnceLock<LayeredGraph>,
    k_layers: OnceLock<LayeredGraph>,
}

impl std::fmt::Debug for HyperbolicModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HyperbolicModel")
            .field("epsilon", &self.epsilon())
            .field("nodes", &self.graph.len())
            .field("ratio", &self.ratio)
            .field("floor", &self.floor)
            .finish()
    }
}

impl HyperbolicModel {
    pub fn new(proj: Arc<HeightProjection>, structure: Structure, graph: Arc<BoundaryGraph>) -> Self {
        let eps = proj.epsilon();
        let w = graph.min_weight();
        HyperbolicModel {
            floor: (w * w).min(eps),
            proj,
            structure,
            graph,
            ratio: 1.25,
            spacing: 0.1,
            g_layers: OnceLock::new(),
            k_layers: OnceLock::new(),
        }
    }

    pub fn build(
        domain: Arc<Domain>,
        structure: Structure,
        collar: &CollarConfig,
        params: &GraphParams,
        extra: &[Point],
    ) -> Result<Self> {
        let proj = Arc::new(HeightProjection::new(domain.clone(), collar)?);
        let graph = BoundaryGraph::build_with_points(&domain, &structure, params, extra)?;
        Ok(Self::new(proj, structure, Arc::new(graph)))
    }

    /// Level ratio of the height grid (default 1.25).
    pub fn with_level_ratio(mut self, ratio: f64) -> Self {
        assert!(ratio > 1.0);
        self.ratio = ratio;
        self.g_layers = OnceLock::new();
        self.k_layers = OnceLock::new();
        self
    }

    /// Deepest layer depth (default `min(w_min^2, eps)`).
    pub fn with_level_floor(mut self, floor: f64) -> Self {
        assert!(floor > 0.0);
        self.floor = floor.min(self.epsilon());
        self.g_layers = OnceLock::new();
        self.k_layers = OnceLock::new();
        self
    }

    /// Euclidean spacing of shell polylines as a fraction of the height.
    pub fn with_spacing(mut self, spacing: f64) -> Self {
        assert!(spacing > 0.0);
        self.spacing = spacing;
        self
    }

    pub fn domain(&self) -> &Arc<Domain> {
        self.proj.domain()
    }

    pub fn projection(&self) -> &Arc<HeightProjection> {
        &self.proj
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn graph(&self) -> &Arc<BoundaryGraph> {
        &self.graph
    }

    pub fn epsilon(&self) -> f64 {
        self.proj.epsilon()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn g_layers(&self) -> &LayeredGraph {
        self.g_layers.get_or_init(|| {
            LayeredGraph::build(LayerKind::G, &self.graph, &self.structure, self.depths())
        })
    }

    pub fn k_layers(&self) -> &LayeredGraph {
        self.k_layers.get_or_init(|| {
            LayeredGraph::build(LayerKind::K, &self.graph, &self.structure, self.depths())
        })
    }

    fn depths(&self) -> Vec<f64> {
        level_depths(self.epsilon(), self.floor, self.ratio)
    }

    pub fn locate(&self, x: &Point) -> Result<Located> {
        let f = self.proj.foot(x)?;
        let site = Site::Node(self.graph.snap(&f.point));
        Ok(Located {
            x: x.clone(),
            depth: f.distance,
            height: f.distance.sqrt(),
            foot: f.point,
            normal: f.normal,
            site,
        })
    }

    pub fn locate_with_site(&self, x: &Point, site: Site) -> Result<Located> {
        let mut l = self.locate(x)?;
        l.site = site;
        Ok(l)
    }

    /// The point `p - t n_p` over a site's boundary point.
    pub fn shell_point(&self, site: Site, t: f64) -> Result<Located> {
        let p = self.graph.site_boundary_point(self.domain(), &site);
        let n = self.domain().normal(&p)?;
        Ok(Located {
            x: &p - &n * t,
            depth: t,
            height: t.sqrt(),
            foot: p,
            normal: n,
            site,
        })
    }

    pub fn in_collar(&self, l: &Located) -> bool {
        l.depth <= self.epsilon()
    }

    /// `d_H` between the projections, measured on the metric graph.
    pub fn d_h(&self, a: &Located, b: &Located) -> f64 {
        self.graph.site_distance(&a.site, &b.site)
    }

    /// `d_H` between boundary points snapped to graph nodes.
    pub fn boundary_distance(&self, p: &Point, q: &Point) -> f64 {
        self.graph.d_h(p, q)
    }

    /// `2 ln((d_H + max h) / sqrt(h_x h_y))`.
    pub fn g(&self, a: &Located, b: &Located) -> f64 {
        let hm = a.height.max(b.height);
        2.0 * (self.d_h(a, b) + hm).ln() - (a.height.ln() + b.height.ln())
    }

    pub fn g_value(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(self.g(&self.locate(x)?, &self.locate(y)?))
    }

    /// `g`-length of the composite vertical/horizontal/vertical path.
    pub fn cap(&self, a: &Located, b: &Located) -> (f64, CapCase) {
        let (hs, hl) = if a.height <= b.height {
            (a.height, b.height)
        } else {
            (b.height, a.height)
        };
        let dh = self.d_h(a, b);
        let rt = self.epsilon().sqrt();
        let vert = (hl / hs).ln();
        if dh <= hl {
            (vert + 2.0 * dh / hl, CapCase::Short)
        } else if dh <= rt {
            (vert + 2.0 * (dh / hl).ln() + 2.0, CapCase::Middle)
        } else {
            (vert + 2.0 * (rt / hl).ln() + 2.0 * dh / rt, CapCase::Long)
        }
    }

    fn rep(&self, l: &Located, kind: LayerKind) -> Rep {
        let eps = self.epsilon();
        if l.depth <= eps {
            Rep {
                loc: l.clone(),
                offset: 0.0,
                outside: false,
            }
        } else {
            let offset = match kind {
                LayerKind::G => l.depth - eps,
                LayerKind::K => (l.depth / eps).ln(),
            };
            Rep {
                loc: l.at_depth(eps),
                offset,
                outside: true,
            }
        }
    }

    /// Layered nodes reachable from a collar point, with their costs.
    pub fn seeds(&self, layers: &LayeredGraph, l: &Located) -> Vec<(usize, f64)> {
        let mut out = Vec::with_capacity(2 * layers.levels());
        for (k, &t) in layers.depths().iter().enumerate() {
            let v = layers.vertical_cost(l.depth, t);
            match l.site {
                Site::Node(i) => out.push((layers.id(k, i), v)),
                Site::Edge { a, b, s } => {
                    let e = self.graph.edge_between(a, b).expect("site on a missing edge");
                    let w = layers.horizontal(k, e);
                    out.push((layers.id(k, a), v + s * w));
                    out.push((layers.id(k, b), v + (1.0 - s) * w));
                }
            }
        }
        out
    }

    fn field(&self, layers: &LayeredGraph, l: &Located) -> Field {
        layers.run(&self.graph, &self.seeds(layers, l))
    }

    /// Best arrival at `l` from a field: cost and the layered node used.
    fn arrive(&self, layers: &LayeredGraph, field: &Field, l: &Located) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for (id, c) in self.seeds(layers, l) {
            let v = field.dist[id] + c;
            if v < best.0 || (v == best.0 && id < best.1) {
                best = (v, id);
            }
        }
        best
    }

    fn same_column(a: &Located, b: &Located) -> bool {
        a.site == b.site
    }

    /// Combines a field from `ra` with the representative `rb`.
    fn combine(&self, layers: &LayeredGraph, field: &Field, ra: &Rep, rb: &Rep, la: &Located, lb: &Located) -> DEvaluation {
        if ra.outside && rb.outside && (&la.foot - &lb.foot).norm() <= 1e-12 {
            let v = match layers.kind() {
                LayerKind::G => (&la.x - &lb.x).norm(),
                LayerKind::K => (la.depth / lb.depth).ln().abs(),
            };
            return DEvaluation {
                value: v,
                lower: v,
                upper: v,
                graph: f64::INFINITY,
                case: None,
            };
        }
        let mut graph = self.arrive(layers, field, &rb.loc).0;
        if Self::same_column(&ra.loc, &rb.loc) {
            graph = graph.min(layers.vertical_cost(ra.loc.depth, rb.loc.depth));
        }
        let off = ra.offset + rb.offset;
        match layers.kind() {
            LayerKind::G => {
                let g = self.g(&ra.loc, &rb.loc);
                let (cap, case) = self.cap(&ra.loc, &rb.loc);
                let inner = graph.min(cap).max(g);
                DEvaluation {
                    value: off + inner,
                    lower: off + g,
                    upper: off + cap,
                    graph,
                    case: Some(case),
                }
            }
            LayerKind::K => DEvaluation {
                value: off + graph,
                lower: off,
                upper: off + graph,
                graph,
                case: None,
            },
        }
    }

    fn ordered<'a>(a: &'a Located, b: &'a Located) -> (&'a Located, &'a Located, bool) {
        if lex_cmp(&a.x, &b.x) == Ordering::Greater {
            (b, a, true)
        } else {
            (a, b, false)
        }
    }

    pub(crate) fn evaluate(&self, kind: LayerKind, a: &Located, b: &Located) -> DEvaluation {
        if a.x == b.x {
            return DEvaluation {
                value: 0.0,
                lower: 0.0,
                upper: 0.0,
                graph: 0.0,
                case: None,
            };
        }
        let layers = match kind {
            LayerKind::G => self.g_layers(),
            LayerKind::K => self.k_layers(),
        };
        let (a, b, _) = Self::ordered(a, b);
        let ra = self.rep(a, kind);
        let rb = self.rep(b, kind);
        let field = layers.run_until(&self.graph, &self.seeds(layers, &ra.loc), &self.seeds(layers, &rb.loc));
        self.combine(layers, &field, &ra, &rb, a, b)
    }

    /// `d(x, y)` with its bracket.
    pub fn d_evaluate(&self, x: &Point, y: &Point) -> Result<DEvaluation> {
        Ok(self.evaluate(LayerKind::G, &self.locate(x)?, &self.locate(y)?))
    }

    pub fn d_value(&self, x: &Point, y: &Point) -> Result<f64> {
        Ok(self.d_evaluate(x, y)?.value)
    }

    pub fn d_located(&self, a: &Located, b: &Located) -> f64 {
        self.evaluate(LayerKind::G, a, b).value
    }

    /// All pairwise values with one shortest-path run per point.
    pub fn pairwise(&self, kind: LayerKind, locs: &[Located]) -> Vec<Vec<f64>> {
        let n = locs.len();
        let layers = match kind {
            LayerKind::G => self.g_layers(),
            LayerKind::K => self.k_layers(),
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| lex_cmp(&locs[i].x, &locs[j].x).then(i.cmp(&j)));
        let reps: Vec<Rep> = locs.iter().map(|l| self.rep(l, kind)).collect();
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|pos| {
                let i = order[pos];
                if pos + 1 == n {
                    return Vec::new();
                }
                let field = self.field(layers, &reps[i].loc);
                order[pos + 1..]
                    .iter()
                    .map(|&j| {
                        let v = if locs[i].x == locs[j].x {
                            0.0
                        } else {
                            self.combine(layers, &field, &reps[i], &reps[j], &locs[i], &locs[j]).value
                        };
                        (j, v)
                    })
                    .collect()
            })
            .collect();
        let mut m = vec![vec![0.0; n]; n];
        for (pos, row) in rows.into_iter().enumerate() {
            let i = order[pos];
            for (j, v) in row {
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    /// Vertical segment from `y` to `x`; requires equal projections.
    pub fn vertical_path(&self, x: &Point, y: &Point) -> Result<Polyline> {
        let (a, b) = (self.locate(x)?, self.locate(y)?);
        self.vertical_between(&a, &b)
    }

    pub fn vertical_between(&self, a: &Located, b: &Located) -> Result<Polyline> {
        let gap = (&a.foot - &b.foot).norm();
        if gap > 1e-8 {
            return Err(Error::ProjectionsDiffer { gap });
        }
        let len = (a.height / b.height).ln().abs();
        let mut b2 = b.clone();
        b2.site = a.site;
        Ok(Polyline::with_known_length(vec![b2, a.clone()], len))
    }

    /// Boundary geodesic between the projections, pushed to the common
    /// shell and discretized at the model spacing.
    pub fn horizontal_path(&self, x: &Point, y: &Point) -> Result<Polyline> {
        let (a, b) = (self.locate(x)?, self.locate(y)?);
        let eps = self.epsilon();
        let tol = 1e-9 * a.height.max(b.height);
        if (a.height - b.height).abs() > tol {
            return Err(Error::HeightsDiffer {
                h1: a.height,
                h2: b.height,
            });
        }
        for l in [&a, &b] {
            if l.depth > eps {
                return Err(Error::PointOutsideShellRegion {
                    depth: l.depth,
                    epsilon: eps,
                });
            }
        }
        self.horizontal_between(&a, &b, a.depth)
    }

    /// Shell polyline at depth `t` from the column of `a` to that of `b`.
    pub fn horizontal_between(&self, a: &Located, b: &Located, t: f64) -> Result<Polyline> {
        let mut pts = vec![a.at_depth(t)];
        if a.site != b.site {
            let ia = a.site.nearest_node();
            let ib = b.site.nearest_node();
            self.push_column_run(&mut pts, a, t, false)?;
            self.push_run(&mut pts, a.site, Site::Node(ia), t)?;
            let nodes = self.graph.node_path(ia, ib).nodes;
            for w in nodes.windows(2) {
                self.push_run(&mut pts, Site::Node(w[0]), Site::Node(w[1]), t)?;
            }
            self.push_run(&mut pts, Site::Node(ib), b.site, t)?;
            self.push_column_run(&mut pts, b, t, true)?;
        }
        pts.push(b.at_depth(t));
        Ok(Polyline::new(pts))
    }

    /// Shell points at depth `t` between the foot of `l` and the boundary
    /// point of its site, all carrying that site. Runs towards the site, or
    /// away from it when `outward` is set.
    fn push_column_run(&self, pts: &mut Vec<Located>, l: &Located, t: f64, outward: bool) -> Result<()> {
        let target = self.graph.site_boundary_point(self.domain(), &l.site);
        let span = (&target - &l.foot).norm();
        if span == 0.0 {
            return Ok(());
        }
        let m = ((span / (self.spacing * t.sqrt())).ceil() as usize).max(1);
        let range: Vec<usize> = if outward { (0..m).collect() } else { (1..=m).collect() };
        for i in range {
            let s = i as f64 / m as f64;
            let s = if outward { 1.0 - s } else { s };
            let c = crate::linalg::lerp(&l.foot, &target, s);
            let p = crate::domain::flow_to_boundary(self.domain(), &c, 1e-13, 200).unwrap_or(c);
            let n = self.domain().normal(&p)?;
            pts.push(Located {
                x: &p - &n * t,
                depth: t,
                height: t.sqrt(),
                foot: p,
                normal: n,
                site: l.site,
            });
        }
        Ok(())
    }

    /// Appends shell points from `from` to `to` (one edge apart) at depth `t`.
    fn push_run(&self, pts: &mut Vec<Located>, from: Site, to: Site, t: f64) -> Result<()> {
        if from == to {
            return Ok(());
        }
        let (a, b, s0, s1) = match (from, to) {
            (Site::Node(i), Site::Node(j)) => (i, j, 0.0, 1.0),
            (Site::Edge { a, b, s }, Site::Node(j)) => {
                if j == a {
                    (a, b, s, 0.0)
                } else {
                    (a, b, s, 1.0)
                }
            }
            (Site::Node(i), Site::Edge { a, b, s }) => {
                if i == a {
                    (a, b, 0.0, s)
                } else {
                    (a, b, 1.0, s)
                }
            }
            (Site::Edge { a, b, s }, Site::Edge { s: s1, .. }) => (a, b, s, s1),
        };
        let chord = (self.graph.node(a) - self.graph.node(b)).norm();
        let span = chord * (s1 - s0).abs();
        let m = ((span / (self.spacing * t.sqrt())).ceil() as usize).max(1);
        for i in 1..=m {
            let s = s0 + (s1 - s0) * i as f64 / m as f64;
            pts.push(self.shell_point(Site::edge(a, b, s), t)?);
        }
        Ok(())
    }

    /// Composite path realizing the cap, and the cap value.
    pub fn composite_upper_path(&self, x: &Point, y: &Point) -> Result<(Polyline, f64)> {
        let (a, b) = (self.locate(x)?, self.locate(y)?);
        let eps = self.epsilon();
        for l in [&a, &b] {
            if l.depth > eps {
                return Err(Error::PointOutsideShellRegion {
                    depth: l.depth,
                    epsilon: eps,
                });
            }
        }
        self.composite_between(&a, &b)
    }

    pub fn composite_between(&self, a: &Located, b: &Located) -> Result<(Polyline, f64)> {
        let (bound, case) = self.cap(a, b);
        let hl = a.height.max(b.height);
        let t = match case {
            CapCase::Short => hl * hl,
            CapCase::Middle => self.d_h(a, b).powi(2),
            CapCase::Long => self.epsilon(),
        };
        let mut pts = vec![a.clone()];
        if (t - a.depth).abs() > 1e-12 * t {
            pts.push(a.at_depth(t));
        }
        let h = self.horizontal_between(a, b, t)?;
        pts.extend(h.points.into_iter().skip(1));
        if pts.last().unwrap().x != b.x {
            pts.push(b.clone());
        }
        Ok((Polyline::new(pts), bound))
    }

    /// Minimizing path for `d`: layered-graph path with exact vertical
    /// stubs, or the composite path when the cap is smaller.
    pub fn geodesic(&self, x: &Point, y: &Point) -> Result<Polyline> {
        let (la, lb) = (self.locate(x)?, self.locate(y)?);
        self.geodesic_between(&la, &lb)
    }

    pub fn geodesic_between(&self, la: &Located, lb: &Located) -> Result<Polyline> {
        if la.x == lb.x {
            return Ok(Polyline::new(vec![la.clone()]));
        }
        let (a, b, swapped) = Self::ordered(la, lb);
        let layers = self.g_layers();
        let ra = self.rep(a, LayerKind::G);
        let rb = self.rep(b, LayerKind::G);
        let mut pts = vec![a.clone()];
        if ra.outside && rb.outside && (&a.foot - &b.foot).norm() <= 1e-12 {
            pts.push(b.clone());
        } else {
            let field = self.field(layers, &ra.loc);
            let (arr, id) = self.arrive(layers, &field, &rb.loc);
            let direct = if Self::same_column(&ra.loc, &rb.loc) {
                layers.vertical_cost(ra.loc.depth, rb.loc.depth)
            } else {
                f64::INFINITY
            };
            let (cap, _) = self.cap(&ra.loc, &rb.loc);
            let inner: Vec<Located> = if direct <= arr && direct <= cap * (1.0 + 1e-12) {
                vec![ra.loc.clone(), rb.loc.clone()]
            } else if cap < arr {
                self.composite_between(&ra.loc, &rb.loc)?.0.points
            } else {
                self.layered_points(layers, &field, id, &ra.loc, &rb.loc)?
            };
            for p in inner {
                if p.x != pts.last().unwrap().x {
                    pts.push(p);
                }
            }
            if pts.last().unwrap().x != b.x {
                pts.push(b.clone());
            }
        }
        if swapped {
            pts.reverse();
        }
        Ok(Polyline::new(pts))
    }

    fn layered_points(
        &self,
        layers: &LayeredGraph,
        field: &Field,
        end: usize,
        a: &Located,
        b: &Located,
    ) -> Result<Vec<Located>> {
        let mut ids = vec![end];
        let mut cur = end;
        while field.pred[cur] != NO_PRED {
            cur = field.pred[cur] as usize;
            ids.push(cur);
        }
        ids.reverse();
        let (k0, i0) = layers.split_id(ids[0]);
        let t0 = layers.depths()[k0];
        let mut pts = vec![a.clone(), a.at_depth(t0)];
        self.push_column_run(&mut pts, a, t0, false)?;
        self.push_run(&mut pts, a.site, Site::Node(i0), t0)?;
        for w in ids.windows(2) {
            let (k1, i1) = layers.split_id(w[0]);
            let (k2, i2) = layers.split_id(w[1]);
            if i1 == i2 {
                pts.push(self.shell_point(Site::Node(i2), layers.depths()[k2])?);
            } else {
                self.push_run(&mut pts, Site::Node(i1), Site::Node(i2), layers.depths()[k1])?;
            }
        }
        let (kl, il) = layers.split_id(end);
        let tl = layers.depths()[kl];
        self.push_run(&mut pts, Site::Node(il), b.site, tl)?;
        self.push_column_run(&mut pts, b, tl, true)?;
        pts.push(b.at_depth(tl));
        pts.push(b.clone());
        Ok(pts)
    }

    /// Euclidean midpoint, keeping the site on the common edge when there
    /// is one.
    pub fn midpoint(&self, p: &Located, q: &Located) -> Result<Located> {
        let x = (&p.x + &q.x) * 0.5;
        if p.foot == q.foot && p.site == q.site {
            let mut l = p.at_depth(0.5 * (p.depth + q.depth));
            l.x = x;
            return Ok(l);
        }
        match p.site.midpoint(&q.site, &self.graph) {
            Some(s) => {
                let f = self.proj.foot(&x)?;
                Ok(Located {
                    x,
                    depth: f.distance,
                    height: f.distance.sqrt(),
                    foot: f.point,
                    normal: f.normal,
                    site: s,
                })
            }
            None => self.locate(&x),
        }
    }
}
