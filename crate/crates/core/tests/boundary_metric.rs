use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use hypkob::boundary::{
    lipschitz_estimate, BoundaryGraph, BoundaryMap, GraphFile, GraphParams, SamplingScheme, Site,
};
use hypkob::complex::Structure;
use hypkob::domain::Domain;
use hypkob::linalg::point;
use hypkob::{Error, Point};
use proptest::prelude::*;

fn sphere() -> &'static Domain {
    static D: OnceLock<Domain> = OnceLock::new();
    D.get_or_init(|| Domain::ball(4, 1.0))
}

fn graph_with(n: usize) -> BoundaryGraph {
    let p = GraphParams {
        n_nodes: n,
        ..Default::default()
    };
    BoundaryGraph::build(sphere(), &Structure::standard(4), &p).unwrap()
}

fn g1000() -> &'static BoundaryGraph {
    static G: OnceLock<BoundaryGraph> = OnceLock::new();
    G.get_or_init(|| graph_with(1000))
}

fn g2000() -> &'static BoundaryGraph {
    static G: OnceLock<BoundaryGraph> = OnceLock::new();
    G.get_or_init(|| graph_with(2000))
}

fn node_near(g: &BoundaryGraph, p: &Point) -> usize {
    g.snap(p)
}

#[test]
fn sphere_graph_is_connected_with_positive_weights() {
    let g = g2000();
    assert_eq!(g.len(), 2000);
    assert!(g.min_weight() > 0.0);
    for j in 0..g.len() {
        assert!(g.node_distance(0, j).is_finite());
    }
}

#[test]
fn unit_anisotropy_gives_chord_lengths() {
    let g = g1000().reweighted(1.0);
    for e in g.edges() {
        let chord = (g.node(e.a) - g.node(e.b)).norm();
        assert!((e.weight - chord).abs() <= 1e-12 * chord);
    }
}

#[test]
fn raising_anisotropy_never_shortens() {
    let g8 = g1000();
    let g12 = g8.reweighted(12.0);
    let g1 = g8.reweighted(1.0);
    for i in (0..g8.len()).step_by(97) {
        for j in 0..g8.len() {
            let (a, b, c) = (g1.node_distance(i, j), g8.node_distance(i, j), g12.node_distance(i, j));
            assert!(a <= b && b <= c, "{i} {j}: {a} {b} {c}");
        }
    }
}

#[test]
fn identical_points_are_at_distance_zero() {
    let g = g1000();
    let p = g.node(17).clone();
    assert_eq!(g.d_h(&p, &p), 0.0);
    let path = g.boundary_geodesic(&p, &p);
    assert_eq!(path.nodes, vec![17]);
    assert_eq!(path.length, 0.0);
}

#[test]
fn antipodal_distance_stabilizes_near_half_circumference() {
    let p = point(&[1.0, 0.0, 0.0, 0.0]);
    let q = point(&[-1.0, 0.0, 0.0, 0.0]);
    let a = g1000().d_h(&p, &q);
    let b = g2000().d_h(&p, &q);
    // A horizontal great circle joins antipodes, so the limit is pi.
    assert!((b - PI).abs() < (a - PI).abs() + 0.05, "{a} {b}");
    assert!((a - b).abs() / b < 0.1, "{a} {b}");
    assert!(b >= PI * 0.98 && b <= PI * 1.1, "{b}");
}

#[test]
fn geodesic_length_equals_dh_bitwise() {
    let g = g1000();
    for (i, j) in [(0, 500), (3, 999), (250, 251), (700, 10)] {
        let path = g.node_path(i, j);
        assert_eq!(path.length, g.node_distance(i, j));
        assert_eq!(path.nodes.first(), Some(&i));
        assert_eq!(path.nodes.last(), Some(&j));
        let summed: f64 = path
            .nodes
            .windows(2)
            .map(|w| g.edges()[g.edge_between(w[0], w[1]).unwrap()].weight)
            .sum();
        assert!((summed - path.length).abs() <= 1e-12 * path.length);
    }
}

#[test]
fn geodesics_have_a_near_midpoint() {
    let g = g1000();
    let wmax = g.max_weight();
    for (i, j) in [(0, 500), (3, 999), (42, 777), (700, 10), (123, 321)] {
        let d = g.node_distance(i, j);
        let path = g.node_path(i, j);
        let best = path
            .nodes
            .iter()
            .map(|&m| g.node_distance(i, m).max(g.node_distance(m, j)))
            .fold(f64::INFINITY, f64::min);
        assert!(best <= 0.5 * d + wmax, "{best} vs {d}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn node_distance_is_a_metric(i in 0usize..1000, j in 0usize..1000, k in 0usize..1000) {
        let g = g1000();
        let (dij, dji) = (g.node_distance(i, j), g.node_distance(j, i));
        prop_assert_eq!(dij.to_bits(), dji.to_bits());
        prop_assert!(dij <= g.node_distance(i, k) + g.node_distance(k, j) + 1e-12);
        prop_assert_eq!(dij == 0.0, i == j);
    }
}

#[test]
fn dh_shrinks_along_converging_points() {
    let g = g1000();
    let p = point(&[0.6, 0.0, 0.8, 0.0]);
    let dir = point(&[0.0, 1.0, 0.0, 0.0]);
    let mut last = f64::INFINITY;
    for k in 1..8 {
        let s = 0.5f64.powi(k);
        let q = (&p + &dir * s).normalize();
        let d = g.d_h_between(&p, &q);
        assert!(d <= last + 1e-12);
        last = d;
    }
    assert!(last < 0.05, "{last}");
}

#[test]
fn sampling_schemes_agree_up_to_a_band() {
    let dom = Domain::ellipsoid(&[1.0, 1.0, 1.5, 1.5]);
    let s = Structure::standard(4);
    let base = GraphParams {
        n_nodes: 800,
        ..Default::default()
    };
    let u = BoundaryGraph::build(&dom, &s, &base).unwrap();
    let c = BoundaryGraph::build(
        &dom,
        &s,
        &GraphParams {
            sampling: SamplingScheme::CurvatureWeighted,
            ..base
        },
    )
    .unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in (0..u.len()).step_by(41) {
        for j in (0..u.len()).step_by(29) {
            let (p, q) = (u.node(i), u.node(j));
            let du = u.d_h(p, q);
            if du < 5.0 * u.median_weight() {
                continue;
            }
            let r = c.d_h(p, q) / du;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    assert!(hi / lo < 2.0, "band [{lo}, {hi}]");
}

#[test]
fn identity_map_has_unit_ratio() {
    let g = g1000();
    let id = BoundaryMap::new("identity", |p| p.clone());
    let r = lipschitz_estimate(g, g, sphere(), &id, 300, 1, 1e-9).unwrap();
    assert_eq!(r.ratio, 1.0);
    assert!(r.pairs_used > 100);
}

#[test]
fn rotation_commuting_with_j_is_nearly_isometric() {
    let g = g2000();
    let (c1, s1) = (0.7f64.cos(), 0.7f64.sin());
    let (c2, s2) = (1.9f64.cos(), 1.9f64.sin());
    let rot = BoundaryMap::new("rotation", move |p| {
        point(&[c1 * p[0] - s1 * p[1], s1 * p[0] + c1 * p[1], c2 * p[2] - s2 * p[3], s2 * p[2] + c2 * p[3]])
    });
    let r = lipschitz_estimate(g, g, sphere(), &rot, 400, 2, 1e-9).unwrap();
    assert!(r.ratio >= 1.0 && r.ratio < 1.5, "{}", r.ratio);
}

#[test]
fn constant_map_has_zero_ratio() {
    let g = g1000();
    let p0 = g.node(5).clone();
    let f = BoundaryMap::new("constant", move |_| p0.clone());
    assert_eq!(lipschitz_estimate(g, g, sphere(), &f, 100, 3, 1e-9).unwrap().ratio, 0.0);
}

#[test]
fn map_leaving_the_target_boundary_is_rejected() {
    let g = g1000();
    let f = BoundaryMap::new("scale", |p| p * 0.5);
    assert!(matches!(
        lipschitz_estimate(g, g, sphere(), &f, 10, 4, 1e-9),
        Err(Error::ImageOffBoundary { .. })
    ));
}

#[test]
fn graph_file_round_trip_preserves_distances() {
    let g = graph_with(300);
    let dir = std::env::temp_dir().join(format!("hypkob-graph-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("graph.json");
    g.to_file().save(&path).unwrap();
    let h = GraphFile::load(&path).unwrap().to_graph(sphere(), &Structure::standard(4)).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(h.len(), g.len());
    for j in 0..g.len() {
        assert_eq!(g.node_distance(0, j).to_bits(), h.node_distance(0, j).to_bits());
    }
}

#[test]
fn extra_points_become_trailing_nodes() {
    let extra = vec![point(&[0.0, 0.6, 0.0, 0.8]), point(&[0.5, 0.5, 0.5, 0.5])];
    let p = GraphParams {
        n_nodes: 400,
        ..Default::default()
    };
    let g = BoundaryGraph::build_with_points(sphere(), &Structure::standard(4), &p, &extra).unwrap();
    assert_eq!(g.len(), 402);
    for (k, e) in extra.iter().enumerate() {
        assert!((g.node(400 + k) - e).norm() < 1e-9);
        assert_eq!(g.snap(e), 400 + k);
    }
}

#[test]
fn site_distance_interpolates_along_edges() {
    let g = g1000();
    let e = g.edges()[0];
    let (a, b) = (e.a.min(e.b), e.a.max(e.b));
    let mid = Site::edge(a, b, 0.25);
    let d = g.site_distance(&Site::Node(a), &mid);
    assert!((d - 0.25 * e.weight).abs() <= 1e-12);
    assert_eq!(
        g.site_distance(&mid, &Site::Node(b)).to_bits(),
        g.site_distance(&Site::Node(b), &mid).to_bits()
    );
    let far = node_near(g, &point(&[-1.0, 0.0, 0.0, 0.0]));
    assert!(g.site_distance(&mid, &Site::Node(far)) <= 0.25 * e.weight + g.node_distance(a, far) + 1e-12);
}

#[test]
fn sparse_graph_reports_disconnection() {
    let p = GraphParams {
        n_nodes: 60,
        k_neighbors: 1,
        max_k: 1,
        ..Default::default()
    };
    let r = BoundaryGraph::build(sphere(), &Structure::standard(4), &p);
    assert!(matches!(r, Err(Error::GraphDisconnected { .. })), "{r:?}");
}

#[test]
fn shared_graph_is_thread_safe() {
    let g = Arc::new(graph_with(200));
    let handles: Vec<_> = (0..4)
        .map(|t| {
            let g = g.clone();
            std::thread::spawn(move || g.node_distance(t, 199 - t))
        })
        .collect();
    for (t, h) in handles.into_iter().enumerate() {
        assert_eq!(h.join().unwrap(), g.node_distance(t, 199 - t));
    }
}
