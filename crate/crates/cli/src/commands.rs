use std::path::Path;
use std::sync::Arc;

use hypkob::boundary::{lipschitz_estimate, BoundaryGraph, BoundaryMap, GraphFile, GraphParams};
use hypkob::complex::{check_strict_convexity, check_structure, contact_at, Structure};
use hypkob::domain::{boundary_samples, CollarConfig, Domain, HeightProjection};
use hypkob::dynamics::{classify_orbits, iterate, AffineMap, ClassifyConfig, OrbitVerdict, SelfMap};
use hypkob::gromov::{four_point_delta, QuadrupleMode, Sampler, SamplerContext};
use hypkob::kobayashi::{qi_check_against, qi_fit, QiReport};
use hypkob::metric::{estimate_c, CEstimate, HyperbolicModel, Metric, MetricFunctional, MetricKind};
use hypkob::{Error, Point, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::config::{Loaded, Seeds};
use crate::output::{num, Outputs};
use crate::{Common, MapArg, MetricArg, Outcome};

pub struct Context {
    domain: Arc<Domain>,
    structure: Structure,
    collar: CollarConfig,
    params: GraphParams,
    cache: Option<std::path::PathBuf>,
    tol: crate::config::Tolerances,
    seeds: Seeds,
    hash: String,
    out: Outputs,
    proj: Option<Arc<HeightProjection>>,
    model: Option<Arc<HyperbolicModel>>,
}

impl Context {
    pub fn new(loaded: Loaded, common: &Common) -> Self {
        let c = loaded.config;
        let mut params = c.graph.refined(common.refine);
        params.contact_floor = c.tolerances.contact_floor;
        Context {
            domain: Arc::new(loaded.domain),
            structure: loaded.structure,
            collar: c.collar,
            params,
            cache: common.graph_cache.clone().or(c.graph_cache),
            seeds: common.seed.map(Seeds::all).unwrap_or(c.seeds),
            tol: c.tolerances,
            hash: loaded.hash,
            out: Outputs::new(common.out.as_deref().unwrap_or(&c.output_dir)),
            proj: None,
            model: None,
        }
    }

    fn projection(&mut self) -> Result<Arc<HeightProjection>> {
        if self.proj.is_none() {
            self.proj = Some(Arc::new(HeightProjection::new(self.domain.clone(), &self.collar)?));
        }
        Ok(self.proj.clone().unwrap())
    }

    fn graph(&self) -> Result<BoundaryGraph> {
        if let Some(path) = &self.cache {
            if path.exists() {
                let file = GraphFile::load(path)?;
                if file.params == self.params {
                    return BoundaryGraph::from_file(&file, &self.domain, &self.structure);
                }
                eprintln!("graph cache {} has other parameters, rebuilding", path.display());
            }
            let g = BoundaryGraph::build(&self.domain, &self.structure, &self.params)?;
            g.to_file().save(path)?;
            return Ok(g);
        }
        BoundaryGraph::build(&self.domain, &self.structure, &self.params)
    }

    fn model(&mut self) -> Result<Arc<HyperbolicModel>> {
        if self.model.is_none() {
            let proj = self.projection()?;
            let graph = Arc::new(self.graph()?);
            self.model = Some(Arc::new(HyperbolicModel::new(proj, self.structure.clone(), graph)));
        }
        Ok(self.model.clone().unwrap())
    }

    fn functional(&mut self, m: MetricArg) -> Result<MetricFunctional> {
        Ok(match m {
            MetricArg::Euclid => MetricFunctional::euclidean(),
            MetricArg::G => MetricFunctional::g(self.model()?),
            MetricArg::D => MetricFunctional::d(self.model()?),
            MetricArg::Kob => MetricFunctional::kobayashi(self.model()?),
        })
    }

    fn sampler_context(&mut self) -> Result<SamplerContext> {
        let eps = self.projection()?.epsilon();
        Ok(SamplerContext::new(self.domain.clone(), eps))
    }

    fn finish(&mut self, command: &str, options: serde_json::Value, outcome: Outcome) -> Result<Outcome> {
        let nodes = self.model.as_ref().map_or(0, |m| m.graph().len());
        let out = std::mem::replace(&mut self.out, Outputs::new(Path::new("")));
        eprintln!("wrote {}", out.dir().display());
        out.finish(command, &options, &self.hash, &self.seeds, self.params.seed, nodes)?;
        Ok(outcome)
    }
}

fn metric_name(m: MetricArg) -> &'static str {
    match m {
        MetricArg::G => "g",
        MetricArg::D => "d",
        MetricArg::Kob => "kob",
        MetricArg::Euclid => "euclid",
    }
}

/// Variant name of an error, used as a row-level code.
fn error_code(e: &Error) -> String {
    format!("{e:?}").chars().take_while(|c| c.is_alphanumeric()).collect()
}

fn coords(p: &Point) -> Vec<f64> {
    p.iter().cloned().collect()
}

#[derive(Serialize)]
struct ContactFailure {
    point: Vec<f64>,
    reason: String,
}

#[derive(Serialize)]
struct ContactSummary {
    samples: usize,
    floor: f64,
    failure_count: usize,
    failures: Vec<ContactFailure>,
    pass: bool,
}

pub fn check(ctx: &mut Context, samples: usize) -> Result<Outcome> {
    let pts = boundary_samples(&ctx.domain, samples.max(1), ctx.seeds.check)?;
    let structure = check_structure(&ctx.structure, &pts, ctx.tol.structure);
    let convexity = check_strict_convexity(&ctx.domain, &ctx.structure, samples.max(1), ctx.seeds.check)?;
    let mut failures = Vec::new();
    for p in &pts {
        if let Err(e) = contact_at(&ctx.domain, &ctx.structure, p, ctx.tol.contact_floor) {
            failures.push(ContactFailure {
                point: coords(p),
                reason: e.to_string(),
            });
        }
    }
    let contact = ContactSummary {
        samples: pts.len(),
        floor: ctx.tol.contact_floor,
        failure_count: failures.len(),
        pass: failures.is_empty(),
        failures: failures.into_iter().take(20).collect(),
    };
    let pass = structure.pass && convexity.pass && contact.pass;
    ctx.out.write_json(
        "check.json",
        &json!({
            "pass": pass,
            "structure": structure,
            "strict_convexity": convexity,
            "contact": contact,
        }),
    )?;
    let outcome = if pass { Outcome::Pass } else { Outcome::AnalysisFailed };
    ctx.finish("check", json!({ "samples": samples }), outcome)
}

fn parse_row(record: &csv::StringRecord, dim: usize) -> std::result::Result<(Point, Point), String> {
    let vals: Vec<f64> = record
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| "parse".to_string()))
        .collect::<std::result::Result<_, _>>()?;
    if vals.len() != 2 * dim {
        return Err("width".into());
    }
    Ok((Point::from_column_slice(&vals[..dim]), Point::from_column_slice(&vals[dim..])))
}

pub fn dist(ctx: &mut Context, metric: MetricArg, pairs: &Path) -> Result<Outcome> {
    let text = std::fs::read_to_string(pairs).map_err(|e| Error::Config(format!("{}: {e}", pairs.display())))?;
    let dim = ctx.domain.dim();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let f = ctx.functional(metric)?;
    let header: Vec<String> = ["row", "value", "lower", "upper", "case", "error"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut rows = Vec::new();
    let (mut malformed, mut failed) = (0usize, 0usize);
    for (i, rec) in reader.records().enumerate() {
        let row = |cells: [String; 5]| {
            let mut r = vec![i.to_string()];
            r.extend(cells);
            r
        };
        let (x, y) = match rec.map_err(|_| "parse".to_string()).and_then(|r| parse_row(&r, dim)) {
            Ok(p) => p,
            Err(code) => {
                malformed += 1;
                rows.push(row([String::new(), String::new(), String::new(), String::new(), code]));
                continue;
            }
        };
        let result = if metric == MetricArg::D {
            f.model().unwrap().d_evaluate(&x, &y).map(|ev| {
                let case = ev.case.map(|c| format!("{c:?}").to_lowercase()).unwrap_or_default();
                [num(ev.value), num(ev.lower), num(ev.upper), case]
            })
        } else {
            f.distance(&x, &y)
                .map(|v| [num(v), String::new(), String::new(), String::new()])
        };
        match result {
            Ok([v, lo, hi, case]) => rows.push(row([v, lo, hi, case, String::new()])),
            Err(e) => {
                failed += 1;
                rows.push(row([String::new(), String::new(), String::new(), String::new(), error_code(&e)]));
            }
        }
    }
    ctx.out.write_csv("dist.csv", &header, &rows)?;
    if malformed > 0 {
        eprintln!("{malformed} malformed rows skipped");
    }
    let opts = json!({ "metric": metric_name(metric), "pairs": pairs.display().to_string(), "rows": rows.len() });
    let outcome = if failed > 0 {
        eprintln!("{failed} rows failed to evaluate");
        Outcome::NumericalFailure
    } else {
        Outcome::Pass
    };
    ctx.finish("dist", opts, outcome)
}

pub fn delta(
    ctx: &mut Context,
    metric: MetricArg,
    n: usize,
    pool: Option<usize>,
    boundary_fraction: f64,
) -> Result<Outcome> {
    if !(0.0..=1.0).contains(&boundary_fraction) {
        return Err(Error::Config("--boundary-fraction must lie in [0, 1]".into()));
    }
    let f = ctx.functional(metric)?;
    let sc = ctx.sampler_context()?;
    let sampler = Sampler::Mixed { boundary_fraction };
    let mode = pool.map_or(QuadrupleMode::Fresh, QuadrupleMode::Pool);
    let report = four_point_delta(&f, &sampler, &sc, n, ctx.seeds.sampler, mode)?;
    let failures = report.failures;
    ctx.out.write_json(
        "delta.json",
        &json!({ "report": report, "sampler": sampler, "mode": mode, "epsilon": sc.epsilon }),
    )?;
    let opts = json!({ "metric": metric_name(metric), "n_quadruples": n, "pool": pool, "boundary_fraction": boundary_fraction });
    let outcome = if failures == 0 { Outcome::Pass } else { Outcome::AnalysisFailed };
    ctx.finish("delta", opts, outcome)
}

fn sample_pairs(ctx: &mut Context, n: usize) -> Result<Vec<(Point, Point)>> {
    let sc = ctx.sampler_context()?;
    let s = Sampler::Mixed { boundary_fraction: 0.8 };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seeds.pairs);
    (0..n)
        .map(|_| Ok((s.draw(&mut rng, &sc)?, s.draw(&mut rng, &sc)?)))
        .collect()
}

#[derive(Serialize)]
struct QiOutput {
    metric: &'static str,
    against: &'static str,
    qi: QiReport,
    /// Largest `|d - g|` on the same pairs.
    c_estimate: CEstimate,
    /// Whether `C'` stays below that bound; only set when comparing g and d.
    c_prime_within_estimate: Option<bool>,
}

pub fn qi(ctx: &mut Context, metric: MetricArg, against: MetricArg, n_pairs: usize) -> Result<Outcome> {
    let model = ctx.model()?;
    let pairs = sample_pairs(ctx, n_pairs)?;
    let qi = match (metric, against) {
        (MetricArg::Kob, MetricArg::G) => qi_check_against(&model, &pairs, MetricKind::G)?,
        (MetricArg::Kob, MetricArg::D) => qi_check_against(&model, &pairs, MetricKind::D)?,
        _ => {
            let (fa, fb) = (ctx.functional(metric)?, ctx.functional(against)?);
            let half = 0.5 * model.epsilon().sqrt();
            let (mut a, mut b, mut labels) = (Vec::new(), Vec::new(), Vec::new());
            for (x, y) in &pairs {
                a.push(fa.distance(x, y)?);
                b.push(fb.distance(x, y)?);
                let near = model.locate(x)?.height < half && model.locate(y)?.height < half;
                labels.push(if near { "near_boundary" } else { "interior" }.to_string());
            }
            qi_fit(&a, &b, &labels)
        }
    };
    let c_estimate = estimate_c(&model, &pairs)?;
    let ok = qi.violations.is_empty();
    let out = QiOutput {
        metric: metric_name(metric),
        against: metric_name(against),
        c_prime_within_estimate: matches!(
            (metric, against),
            (MetricArg::G, MetricArg::D) | (MetricArg::D, MetricArg::G)
        )
        .then(|| qi.c_prime <= c_estimate.value),
        qi,
        c_estimate,
    };
    ctx.out.write_json("qi.json", &out)?;
    let opts = json!({ "metric": metric_name(metric), "against": metric_name(against), "n_pairs": n_pairs });
    ctx.finish("qi", opts, if ok { Outcome::Pass } else { Outcome::AnalysisFailed })
}

pub struct OrbitArgs {
    pub map: MapArg,
    pub target: Vec<f64>,
    pub factor: f64,
    pub angles: Vec<f64>,
    pub starts: usize,
    pub start_scale: f64,
    pub steps: usize,
}

fn rotation(dim: usize, angles: &[f64]) -> Result<AffineMap> {
    if angles.len() != dim / 2 {
        return Err(Error::Config(format!("rotation needs {} angles, got {}", dim / 2, angles.len())));
    }
    Ok(AffineMap::rotation(angles))
}

fn self_map(ctx: &Context, map: MapArg, target: &[f64], factor: f64, angles: &[f64]) -> Result<AffineMap> {
    let dim = ctx.domain.dim();
    match map {
        MapArg::Identity => Ok(AffineMap::identity(dim)),
        MapArg::Rotation => rotation(dim, angles),
        MapArg::Contraction => {
            if target.len() != dim {
                return Err(Error::Config(format!("--target needs {dim} coordinates")));
            }
            if !(factor > 0.0 && factor < 1.0) {
                return Err(Error::Config("--factor must lie in (0, 1)".into()));
            }
            Ok(AffineMap::contraction_to(&Point::from_column_slice(target), factor))
        }
    }
}

fn verdict_ok(v: &OrbitVerdict) -> bool {
    !matches!(v, OrbitVerdict::Inconclusive { .. })
}

pub fn orbit(ctx: &mut Context, a: OrbitArgs) -> Result<Outcome> {
    let f = self_map(ctx, a.map, &a.target, a.factor, &a.angles)?;
    if !(a.start_scale > 0.0 && a.start_scale <= 1.0) {
        return Err(Error::Config("--start-scale must lie in (0, 1]".into()));
    }
    let model = ctx.model()?;
    let sc = ctx.sampler_context()?;
    let (lo, hi) = ctx.domain.bbox();
    let center = (lo + hi) * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seeds.sampler);
    let mut orbits = Vec::with_capacity(a.starts);
    for _ in 0..a.starts {
        let x = Sampler::UniformInterior.draw(&mut rng, &sc)?;
        let x0 = &center + (x - &center) * a.start_scale;
        orbits.push(iterate(&f, model.projection(), &x0, a.steps, None)?);
    }
    let verdict = classify_orbits(&model, &orbits, &ClassifyConfig::default());
    let dim = ctx.domain.dim();
    let mut header = vec!["orbit".to_string(), "step".into(), "height".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    header.extend((0..dim).map(|i| format!("p{i}")));
    let mut rows = Vec::new();
    for (k, o) in orbits.iter().enumerate() {
        for (s, x) in o.iterates.iter().enumerate() {
            let mut r = vec![k.to_string(), s.to_string(), num(o.heights[s])];
            r.extend(x.iter().map(|v| num(*v)));
            r.extend(o.projections[s].iter().map(|v| num(*v)));
            rows.push(r);
        }
    }
    ctx.out.write_csv("orbits.csv", &header, &rows)?;
    let center_j = ctx.structure.at(&center);
    ctx.out.write_json(
        "orbit.json",
        &json!({
            "map": f.name(),
            "verdict": verdict,
            "orbits": orbits.len(),
            "boundary_stops": orbits.iter().filter(|o| o.boundary_stop).count(),
            "commutator_with_j_at_center": f.commutator(&center_j),
        }),
    )?;
    let opts = json!({
        "map": format!("{:?}", a.map).to_lowercase(), "target": a.target, "factor": a.factor,
        "angles": a.angles, "starts": a.starts, "start_scale": a.start_scale, "steps": a.steps,
    });
    let outcome = if verdict_ok(&verdict) { Outcome::Pass } else { Outcome::AnalysisFailed };
    ctx.finish("orbit", opts, outcome)
}

pub fn geodesic(ctx: &mut Context, metric: MetricArg, from: &[f64], to: &[f64]) -> Result<Outcome> {
    let dim = ctx.domain.dim();
    if from.len() != dim || to.len() != dim {
        return Err(Error::Config(format!("--from and --to need {dim} coordinates")));
    }
    if !matches!(metric, MetricArg::G | MetricArg::D) {
        return Err(Error::Config("geodesic lengths are measured with g or d".into()));
    }
    let (x, y) = (Point::from_column_slice(from), Point::from_column_slice(to));
    let model = ctx.model()?;
    let path = model.geodesic(&x, &y)?;
    let f = ctx.functional(metric)?;
    let len = f.path_length(&path, ctx.tol.path)?;
    let eval = model.d_evaluate(&x, &y)?;
    let body: serde_json::Value =
        serde_json::from_str(&path.to_json(metric_name(metric), &len)?).map_err(|e| Error::Io(e.to_string()))?;
    ctx.out.write_json(
        "geodesic.json",
        &json!({ "path": body, "d": eval, "tolerance": ctx.tol.path }),
    )?;
    let mut header = vec!["index".to_string(), "height".into()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    let rows: Vec<Vec<String>> = path
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = vec![i.to_string(), num(p.height)];
            r.extend(p.x.iter().map(|v| num(*v)));
            r
        })
        .collect();
    ctx.out.write_csv("geodesic.csv", &header, &rows)?;
    let opts = json!({ "metric": metric_name(metric), "from": from, "to": to });
    ctx.finish("geodesic", opts, Outcome::Pass)
}

pub fn lipschitz(ctx: &mut Context, map: MapArg, angles: &[f64], n_pairs: usize) -> Result<Outcome> {
    let f = match map {
        MapArg::Identity => AffineMap::identity(ctx.domain.dim()),
        MapArg::Rotation => rotation(ctx.domain.dim(), angles)?,
        MapArg::Contraction => return Err(Error::Config("contractions do not preserve the boundary".into())),
    };
    let model = ctx.model()?;
    let name = f.name();
    let bmap = BoundaryMap::new(&name, move |p: &Point| f.apply(p));
    let report = lipschitz_estimate(
        model.graph(),
        model.graph(),
        &ctx.domain,
        &bmap,
        n_pairs,
        ctx.seeds.pairs,
        ctx.tol.boundary,
    )?;
    ctx.out.write_json("lipschitz.json", &json!({ "map": name, "report": report }))?;
    let opts = json!({ "map": format!("{map:?}").to_lowercase(), "angles": angles, "n_pairs": n_pairs });
    let outcome = if report.pairs_used > 0 {
        Outcome::Pass
    } else {
        eprintln!("no node pair above the distance floor {}", report.floor);
        Outcome::AnalysisFailed
    };
    ctx.finish("lipschitz", opts, outcome)
}
