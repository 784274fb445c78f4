//! Acceptance criteria on the unit ball in R^4 with the standard structure.
//! Each test prints one PASS/FAIL line straight to stdout, so the verdicts
//! show up even when libtest captures output.

use std::io::Write;
use std::sync::{Arc, OnceLock};

use hypkob::boundary::{BoundaryGraph, GraphParams};
use hypkob::complex::{contact_at, levi_form, Structure};
use hypkob::domain::{boundary_samples, CollarConfig, Domain};
use hypkob::dynamics::{classify_orbits, iterate, AffineMap, ClassifyConfig, OrbitVerdict};
use hypkob::gromov::{
    boundary_identification, four_point_delta, IdentificationReport, QuadrupleMode, Sampler, SamplerContext,
};
use hypkob::kobayashi::{qi_check_against, QiReport};
use hypkob::linalg::point;
use hypkob::metric::{estimate_c, CEstimate, HyperbolicModel, MetricFunctional, MetricKind};
use hypkob::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const C1_PAIRS: usize = 100;
const C1_TOL: f64 = 1e-6;
const C2_PAIRS: usize = 50;
const C2_REL_TOL: f64 = 0.02;
const C3_QUADRUPLES: usize = 100_000;
const C3_SLACK: f64 = 1e-9;
const C4_PAIRS: usize = 1000;
const C4_LOWER_TOL: f64 = 1e-9;
const C4_SHORT_BOUND: f64 = 2.0;
const C4_SOLVER_SLACK: f64 = 1e-9;
const C5_QUADRUPLES: usize = 100_000;
const C5_POOL: usize = 200;
const C5_LINEAR_TOL: f64 = 0.2;
const C6_PAIRS: usize = 50;
const C6_SCALES: [f64; 3] = [0.1, 0.2, 0.4];
const C6_MAX_SPREAD: f64 = 10.0;
const C6_MAX_DRIFT: f64 = 0.25;
const C6_DEPTH: usize = 16;
const C6_LEVEL_FLOOR: f64 = 1e-4;
const C7_PAIRS: usize = 1000;
const C7_MAX_DRIFT: f64 = 0.15;
const C8_POINTS: usize = 200;
const C8_REL_TOL: f64 = 1e-6;
const C8_INVARIANCE_TOL: f64 = 1e-8;
const C9_STARTS: usize = 20;
const C9_SPREAD: f64 = 1e-2;
const C9_BOUNDED_FRACTION: f64 = 0.05;
const C10_PAIRS: usize = 1000;
const C10_MAX_DRIFT: f64 = 0.25;

fn verdict(id: u32, title: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance criterion {id:>2} [{}] {title}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} failed: {detail}");
}

fn ball() -> Arc<Domain> {
    static D: OnceLock<Arc<Domain>> = OnceLock::new();
    D.get_or_init(|| Arc::new(Domain::ball(4, 1.0))).clone()
}

fn params(refine: u32) -> GraphParams {
    GraphParams::default().refined(refine)
}

fn build(refine: u32, extra: &[Point]) -> HyperbolicModel {
    HyperbolicModel::build(ball(), Structure::standard(4), &CollarConfig::default(), &params(refine), extra)
        .unwrap()
}

fn base() -> &'static Arc<HyperbolicModel> {
    static M: OnceLock<Arc<HyperbolicModel>> = OnceLock::new();
    M.get_or_init(|| Arc::new(build(0, &[])))
}

fn refined() -> &'static Arc<HyperbolicModel> {
    static M: OnceLock<Arc<HyperbolicModel>> = OnceLock::new();
    M.get_or_init(|| Arc::new(build(1, &[])))
}

fn mixed() -> Sampler {
    Sampler::Mixed {
        boundary_fraction: 0.8,
    }
}

fn ctx(m: &HyperbolicModel) -> SamplerContext {
    SamplerContext::new(m.domain().clone(), m.epsilon())
}

fn sample_pairs(m: &HyperbolicModel, n: usize, seed: u64) -> Vec<(Point, Point)> {
    let c = ctx(m);
    let s = mixed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (s.draw(&mut rng, &c).unwrap(), s.draw(&mut rng, &c).unwrap()))
        .collect()
}

fn unit_sphere_point(rng: &mut ChaCha8Rng) -> Point {
    loop {
        let v = Point::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn c4_pairs() -> &'static Vec<(Point, Point)> {
    static P: OnceLock<Vec<(Point, Point)>> = OnceLock::new();
    P.get_or_init(|| sample_pairs(base(), C4_PAIRS, 4))
}

fn c4_estimate() -> &'static CEstimate {
    static C: OnceLock<CEstimate> = OnceLock::new();
    C.get_or_init(|| estimate_c(base(), c4_pairs()).unwrap())
}

#[test]
fn criterion_01_vertical_closed_form() {
    let m = base();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..C1_PAIRS {
        let u = unit_sphere_point(&mut rng);
        let (h1, h2) = (rng.random_range(0.05..0.4), rng.random_range(0.05..0.4));
        let (x, y) = (&u * (1.0 - h1 * h1), &u * (1.0 - h2 * h2));
        let d = m.d_value(&x, &y).unwrap();
        worst = worst.max((d - (h1 / h2).ln().abs()).abs());
    }
    verdict(
        1,
        "vertical geodesic closed form",
        worst <= C1_TOL,
        &format!("max |d - |ln(hx/hy)|| = {worst:.3e} over {C1_PAIRS} pairs (tol {C1_TOL:e})"),
    );
}

/// Worst relative error of horizontal path lengths against `2 d_H / h`.
fn horizontal_errors(m: &HyperbolicModel, pairs: &[(usize, usize, f64)]) -> f64 {
    let g = m.graph();
    pairs
        .iter()
        .map(|&(i, j, h)| {
            let t = h * h;
            let x = m.shell_point(hypkob::boundary::Site::Node(i), t).unwrap().x;
            let y = m.shell_point(hypkob::boundary::Site::Node(j), t).unwrap().x;
            let p = m.horizontal_path(&x, &y).unwrap();
            let len = m.g_path_length(&p, 1e-6).unwrap().total;
            let want = 2.0 * g.node_distance(i, j) / h;
            (len - want).abs() / want
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_02_horizontal_path_length() {
    let m = base();
    let g = m.graph();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pairs: Vec<(usize, usize, f64)> = (0..C2_PAIRS)
        .map(|_| {
            let i = rng.random_range(0..g.len());
            let k = loop {
                let k = rng.random_range(0..g.len());
                if k != i {
                    break k;
                }
            };
            let nodes = g.node_path(i, k).nodes;
            let j = nodes[nodes.len().min(rng.random_range(2..5)) - 1];
            (i, j, rng.random_range(0.05..0.3))
        })
        .collect();
    let coarse = horizontal_errors(m, &pairs);
    let fine_model = HyperbolicModel::new(m.projection().clone(), m.structure().clone(), m.graph().clone())
        .with_spacing(0.5 * m.spacing());
    let fine = horizontal_errors(&fine_model, &pairs);
    verdict(
        2,
        "horizontal path length",
        coarse <= C2_REL_TOL && fine <= coarse,
        &format!(
            "max relative error {coarse:.3e} at spacing {}, {fine:.3e} at spacing {} (tol {C2_REL_TOL})",
            m.spacing(),
            fine_model.spacing()
        ),
    );
}

#[test]
fn criterion_03_four_point_inequality_for_g() {
    let m = base();
    let g = MetricFunctional::g(m.clone());
    let r = four_point_delta(&g, &mixed(), &ctx(m), C3_QUADRUPLES, 3, QuadrupleMode::Fresh).unwrap();
    let bound = 4f64.ln() + C3_SLACK;
    verdict(
        3,
        "four-point inequality for g",
        r.failures == 0 && r.delta <= bound,
        &format!(
            "delta {:.6} vs ln 4 = {:.6} over {} quadruples, {} evaluation failures",
            r.delta,
            4f64.ln(),
            r.quadruples,
            r.failures
        ),
    );
}

#[test]
fn criterion_04_rough_isometry_bracket() {
    let c = c4_estimate();
    let pass = c.min_gap >= -C4_LOWER_TOL && c.value.is_finite() && c.short <= C4_SHORT_BOUND + C4_SOLVER_SLACK;
    verdict(
        4,
        "rough-isometry bracket",
        pass,
        &format!(
            "min(d - g) = {:.3e}, sup(d - g) = {:.4}, short-case sup = {:.4} (bound 2), middle {:.4}, long {:.4}, {} pairs",
            c.min_gap, c.value, c.short, c.middle, c.long, c.pairs
        ),
    );
}

#[test]
fn criterion_05_hyperbolicity_contrast() {
    let m = base();
    let d = MetricFunctional::d(m.clone());
    let rd = four_point_delta(&d, &mixed(), &ctx(m), C5_QUADRUPLES, 5, QuadrupleMode::Pool(C5_POOL)).unwrap();
    let c = c4_estimate().value;
    let bound = 4f64.ln() + 3.0 * c;
    let e = MetricFunctional::euclidean();
    let flat: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|&side| {
            let s = Sampler::SquareGrid { side, per_side: 11 };
            four_point_delta(&e, &s, &SamplerContext::planar(), 20_000, 6, QuadrupleMode::Fresh)
                .unwrap()
                .delta
        })
        .collect();
    let linear = flat
        .iter()
        .zip([1.0, 2.0, 4.0])
        .all(|(d, r)| (d / r - flat[0]).abs() <= C5_LINEAR_TOL * flat[0]);
    verdict(
        5,
        "hyperbolicity contrast",
        rd.failures == 0 && rd.delta <= bound && linear && flat[0] > 0.0,
        &format!(
            "delta_d = {:.4} <= ln 4 + 3C = {bound:.4}; euclidean deltas {:.4}, {:.4}, {:.4} for sides 1, 2, 4",
            rd.delta, flat[0], flat[1], flat[2]
        ),
    );
}

/// Boundary pair joined by a horizontal great circle of length `s`.
fn horizontal_pair(rng: &mut ChaCha8Rng, s: f64) -> (Point, Point) {
    let j = Structure::standard(4);
    let a = unit_sphere_point(rng);
    let ja = j.apply(&a, &a);
    let w = loop {
        let mut w = unit_sphere_point(rng);
        w -= &a * w.dot(&a);
        w -= &ja * w.dot(&ja);
        if w.norm() > 0.1 {
            break w.normalize();
        }
    };
    (a.clone(), a * s.cos() + w * s.sin())
}

fn identification(refine: u32, pairs: &[(Point, Point)]) -> IdentificationReport {
    let extra: Vec<Point> = pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
    let m = Arc::new(build(refine, &extra).with_level_floor(C6_LEVEL_FLOOR));
    let d = MetricFunctional::d(m.clone());
    boundary_identification(&d, &m, pairs, &point(&[0.0; 4]), C6_DEPTH).unwrap()
}

#[test]
fn criterion_06_boundary_identification() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<(Point, Point)> = (0..C6_PAIRS)
        .map(|i| horizontal_pair(&mut rng, C6_SCALES[i % C6_SCALES.len()]))
        .collect();
    let coarse = identification(0, &pairs);
    let fine = identification(1, &pairs);
    let drift = ((fine.min_ratio / coarse.min_ratio) - 1.0)
        .abs()
        .max(((fine.max_ratio / coarse.max_ratio) - 1.0).abs());
    let pass = coarse.spread <= C6_MAX_SPREAD && fine.spread <= C6_MAX_SPREAD && drift <= C6_MAX_DRIFT;
    verdict(
        6,
        "boundary identification",
        pass,
        &format!(
            "ratio band [{:.3e}, {:.3e}] spread {:.1} at {} nodes, [{:.3e}, {:.3e}] spread {:.1} at {} nodes, drift {:.1}% (limits: spread {C6_MAX_SPREAD}, drift {}%)",
            coarse.min_ratio,
            coarse.max_ratio,
            coarse.spread,
            params(0).effective_nodes(),
            fine.min_ratio,
            fine.max_ratio,
            fine.spread,
            params(1).effective_nodes(),
            100.0 * drift,
            100.0 * C6_MAX_DRIFT
        ),
    );
}

fn qi(m: &HyperbolicModel) -> QiReport {
    qi_check_against(m, &sample_pairs(m, C7_PAIRS, 7), MetricKind::D).unwrap()
}

#[test]
fn criterion_07_kobayashi_quasi_isometry() {
    let a = qi(base());
    let b = qi(refined());
    let drift_c = (b.c / a.c - 1.0).abs();
    let drift_cp = if a.c_prime > 0.0 { (b.c_prime / a.c_prime - 1.0).abs() } else { b.c_prime };
    let finite = [a.c, a.c_prime, b.c, b.c_prime].iter().all(|v| v.is_finite());
    let pass = finite
        && a.violations.is_empty()
        && b.violations.is_empty()
        && drift_c <= C7_MAX_DRIFT
        && drift_cp <= C7_MAX_DRIFT;
    verdict(
        7,
        "quasi-isometry of the Kobayashi estimate and d",
        pass,
        &format!(
            "(C, C') = ({:.4}, {:.4}) then ({:.4}, {:.4}) under refinement, drift {:.1}% / {:.1}%, violations {} / {}",
            a.c,
            a.c_prime,
            b.c,
            b.c_prime,
            100.0 * drift_c,
            100.0 * drift_cp,
            a.violations.len(),
            b.violations.len()
        ),
    );
}

#[test]
fn criterion_08_contact_structure() {
    let d = ball();
    let s = Structure::standard(4);
    let pts = boundary_samples(&d, C8_POINTS, 8).unwrap();
    let (mut worst_rel, mut worst_inv, mut dims_ok) = (0.0f64, 0.0f64, true);
    for p in &pts {
        let c = contact_at(&d, &s, p, 1e-6).unwrap();
        dims_ok &= c.basis.len() == 2;
        worst_inv = worst_inv.max(c.invariance_defect(&s));
        for b in &c.basis {
            let om = c.omega_form(b, &s.apply(p, b));
            let lv = levi_form(&d, &s, p, b).unwrap();
            worst_rel = worst_rel.max((om + lv).abs() / lv.abs());
        }
    }
    verdict(
        8,
        "contact structure",
        dims_ok && worst_rel <= C8_REL_TOL && worst_inv <= C8_INVARIANCE_TOL,
        &format!(
            "max relative error of Omega(X,JX) + L(X) = {worst_rel:.3e}, J-invariance defect {worst_inv:.3e}, rank 2 at all {C8_POINTS} points: {dims_ok}"
        ),
    );
}

#[test]
fn criterion_09_orbit_dichotomy() {
    let m = base();
    let c = ctx(m);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = ClassifyConfig {
        bounded_fraction: C9_BOUNDED_FRACTION,
        spread_tol: C9_SPREAD,
        ..ClassifyConfig::default()
    };
    let p = point(&[0.6, 0.0, 0.8, 0.0]);
    let contraction = AffineMap::contraction_to(&p, 0.9);
    let orbits: Vec<_> = (0..C9_STARTS)
        .map(|_| {
            let x = Sampler::UniformInterior.draw(&mut rng, &c).unwrap();
            iterate(&contraction, m.projection(), &x, 1000, None).unwrap()
        })
        .collect();
    let first = classify_orbits(m, &orbits, &cfg);
    let first_ok = match &first {
        OrbitVerdict::ConvergesTo { point: q, spread } => {
            *spread <= C9_SPREAD && m.graph().d_h_between(&Point::from_vec(q.clone()), &p) <= C9_SPREAD
        }
        _ => false,
    };
    // Starts well inside the ball so that no orbit begins below the floor.
    let rotation = AffineMap::rotation(&[0.7, 1.3]);
    let orbits: Vec<_> = (0..C9_STARTS)
        .map(|_| {
            let x = Sampler::UniformInterior.draw(&mut rng, &c).unwrap() * 0.9;
            iterate(&rotation, m.projection(), &x, 100, None).unwrap()
        })
        .collect();
    let second = classify_orbits(m, &orbits, &cfg);
    let floor = C9_BOUNDED_FRACTION * m.epsilon().sqrt();
    let second_ok = matches!(second, OrbitVerdict::Bounded { min_tail_height } if min_tail_height >= floor);
    let show = |v: &OrbitVerdict| match v {
        OrbitVerdict::ConvergesTo { spread, .. } => format!("converges, spread {spread:.3e}"),
        OrbitVerdict::Bounded { min_tail_height } => format!("bounded, min tail height {min_tail_height:.4}"),
        OrbitVerdict::Inconclusive { reason } => format!("inconclusive ({reason})"),
    };
    verdict(
        9,
        "orbit dichotomy",
        first_ok && second_ok,
        &format!(
            "contraction: {}; rotation: {} (floor {floor:.4})",
            show(&first),
            show(&second)
        ),
    );
}

/// `sup |d_8 - d_12|` over sampled pairs, with the node-pair ratio band.
fn anisotropy_gap(m8: &HyperbolicModel, seed: u64) -> (f64, f64, f64) {
    let g12: BoundaryGraph = m8.graph().reweighted(12.0);
    let floor = m8.g_layers().depths()[0];
    let m12 = HyperbolicModel::new(m8.projection().clone(), m8.structure().clone(), Arc::new(g12)).with_level_floor(floor);
    let (g8, g12) = (m8.graph(), m12.graph());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in (0..g8.len()).step_by(7) {
        for j in (0..g8.len()).step_by(13) {
            if i != j {
                let r = g12.node_distance(i, j) / g8.node_distance(i, j);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    let sup = sample_pairs(m8, C10_PAIRS, seed)
        .iter()
        .map(|(x, y)| (m8.d_value(x, y).unwrap() - m12.d_value(x, y).unwrap()).abs())
        .fold(0.0, f64::max);
    (sup, lo, hi)
}

#[test]
fn criterion_10_rough_isometry_stability() {
    let (a, lo_a, hi_a) = anisotropy_gap(base(), 10);
    let (b, lo_b, hi_b) = anisotropy_gap(refined(), 10);
    // Weights scale by at most 12/8, so the node ratio lies in [1, 1.5].
    let bilip = lo_a >= 1.0 && lo_b >= 1.0 && hi_a <= 1.5 + 1e-12 && hi_b <= 1.5 + 1e-12;
    let drift = (b / a - 1.0).abs();
    verdict(
        10,
        "rough-isometry stability",
        bilip && a.is_finite() && b.is_finite() && drift <= C10_MAX_DRIFT,
        &format!(
            "sup |d8 - d12| = {a:.4} then {b:.4} under refinement, drift {:.1}% (limit {}%); node ratios [{lo_a:.4}, {hi_a:.4}], [{lo_b:.4}, {hi_b:.4}]",
            100.0 * drift,
            100.0 * C10_MAX_DRIFT
        ),
    );
}
