//! Sketch-versus-oracle evaluation: ingest one stream into both, sample
//! queries from the live window, and report relative errors, reachability
//! accuracy and latencies.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SketchConfig;
use crate::error::{Error, Result};
use crate::oracle::{ErrorAccumulator, ErrorReport, ExactStore, ReachabilityReport};
use crate::sketch::{EdgeItem, LSketch, PatternEdge, QueryResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightQuery {
    VertexOut,
    VertexIn,
    LabelOut,
    LabelIn,
    Edge,
    EdgeToLabel,
    Subgraph,
}

pub const WEIGHT_QUERIES: [WeightQuery; 7] = [
    WeightQuery::VertexOut,
    WeightQuery::VertexIn,
    WeightQuery::LabelOut,
    WeightQuery::LabelIn,
    WeightQuery::Edge,
    WeightQuery::EdgeToLabel,
    WeightQuery::Subgraph,
];

impl WeightQuery {
    pub fn name(self) -> &'static str {
        match self {
            WeightQuery::VertexOut => "vertex-out",
            WeightQuery::VertexIn => "vertex-in",
            WeightQuery::LabelOut => "label-out",
            WeightQuery::LabelIn => "label-in",
            WeightQuery::Edge => "edge",
            WeightQuery::EdgeToLabel => "edge-to-label",
            WeightQuery::Subgraph => "subgraph",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchPlan {
    /// Queries sampled per type and repeat.
    pub queries: usize,
    /// Independent query samples over the same ingested stream.
    pub repeats: usize,
    pub seed: u64,
    /// Also evaluate every weight query restricted to an edge label.
    pub labeled: bool,
    /// Refuse streams longer than this (the oracle is linear in the stream).
    pub max_oracle_items: Option<usize>,
    /// Maximum pattern edges per subgraph query.
    pub subgraph_size: usize,
}

impl Default for BenchPlan {
    fn default() -> Self {
        BenchPlan {
            queries: 500,
            repeats: 1,
            seed: 0,
            labeled: true,
            max_oracle_items: Some(20_000_000),
            subgraph_size: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Latency {
    pub samples: usize,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p90_ns: u64,
    pub p99_ns: u64,
    pub max_ns: u64,
}

impl Latency {
    pub fn from_samples(mut ns: Vec<u64>) -> Self {
        if ns.is_empty() {
            return Latency::default();
        }
        ns.sort_unstable();
        let pct = |p: f64| ns[((ns.len() - 1) as f64 * p).round() as usize];
        Latency {
            samples: ns.len(),
            mean_ns: ns.iter().sum::<u64>() as f64 / ns.len() as f64,
            p50_ns: pct(0.50),
            p90_ns: pct(0.90),
            p99_ns: pct(0.99),
            max_ns: *ns.last().unwrap(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TypeReport {
    pub kind: WeightQuery,
    pub unlabeled: ErrorReport,
    pub labeled: Option<ErrorReport>,
    pub latency: Latency,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub items: u64,
    pub live_items: usize,
    pub matrix_items: u64,
    pub pool_items: u64,
    pub pool_fraction: f64,
    pub subwindows_elapsed: u64,
    pub mean_insert_ns: f64,
    pub weight_queries: Vec<TypeReport>,
    pub reachability: Option<ReachabilityReport>,
    pub path_latency: Option<Latency>,
    pub unresolved_hashes: u64,
}

impl BenchReport {
    pub fn weight(&self, kind: WeightQuery) -> Option<&TypeReport> {
        self.weight_queries.iter().find(|r| r.kind == kind)
    }
}

/// Ingests `items` into a fresh sketch and oracle.
pub fn ingest(cfg: &SketchConfig, items: &[EdgeItem]) -> Result<(LSketch, ExactStore, Vec<u64>)> {
    let mut sketch = LSketch::new(cfg.clone())?;
    let mut oracle = ExactStore::for_config(cfg);
    let mut latencies = Vec::with_capacity(items.len());
    for item in items {
        let t = Instant::now();
        sketch.insert(item)?;
        latencies.push(t.elapsed().as_nanos() as u64);
        oracle.insert(item)?;
    }
    Ok((sketch, oracle, latencies))
}

type Vertex<'a> = (&'a str, &'a str);

struct LiveView<'a> {
    items: Vec<&'a EdgeItem>,
    out: HashMap<Vertex<'a>, Vec<usize>>,
    vertices: Vec<Vertex<'a>>,
}

impl<'a> LiveView<'a> {
    fn new(oracle: &'a ExactStore) -> Self {
        let items: Vec<&EdgeItem> = oracle.items().collect();
        let mut out: HashMap<Vertex, Vec<usize>> = HashMap::new();
        let mut seen = HashSet::new();
        let mut vertices = Vec::new();
        for (i, it) in items.iter().enumerate() {
            out.entry((&it.src, &it.src_label)).or_default().push(i);
            for v in [(it.src.as_str(), it.src_label.as_str()), (it.dst.as_str(), it.dst_label.as_str())] {
                if seen.insert(v) {
                    vertices.push(v);
                }
            }
        }
        LiveView { items, out, vertices }
    }

    fn pattern(&self, rng: &mut ChaCha8Rng, start: &EdgeItem, size: usize) -> Vec<PatternEdge> {
        let mut pattern = vec![PatternEdge::new(&start.src, &start.src_label, &start.dst, &start.dst_label)];
        let mut cur = start;
        while pattern.len() < size {
            let Some(next) = self.out.get(&(cur.dst.as_str(), cur.dst_label.as_str())) else {
                break;
            };
            cur = self.items[*next.choose(rng).unwrap()];
            pattern.push(PatternEdge::new(&cur.src, &cur.src_label, &cur.dst, &cur.dst_label));
        }
        pattern
    }

    /// Endpoint of a short random walk from `v`, or `v` itself.
    fn walk(&self, rng: &mut ChaCha8Rng, v: Vertex<'a>, steps: usize) -> Vertex<'a> {
        let mut cur = v;
        for _ in 0..steps {
            match self.out.get(&cur) {
                Some(next) => {
                    let it = self.items[*next.choose(rng).unwrap()];
                    cur = (&it.dst, &it.dst_label);
                }
                None => break,
            }
        }
        cur
    }
}

fn answer(
    sketch: &LSketch,
    oracle: &ExactStore,
    kind: WeightQuery,
    it: &EdgeItem,
    pattern: &[PatternEdge],
    el: Option<&str>,
) -> Result<(QueryResult, QueryResult, u64)> {
    let t = Instant::now();
    let est = match kind {
        WeightQuery::VertexOut => sketch.vertex_out_weight(&it.src, &it.src_label, el),
        WeightQuery::VertexIn => sketch.vertex_in_weight(&it.dst, &it.dst_label, el),
        WeightQuery::LabelOut => sketch.label_out_weight(&it.src_label, el),
        WeightQuery::LabelIn => sketch.label_in_weight(&it.dst_label, el),
        WeightQuery::Edge => sketch.edge_weight(&it.src, &it.src_label, &it.dst, &it.dst_label, el),
        WeightQuery::EdgeToLabel => {
            sketch.edge_weight_to_label_group(&it.src, &it.src_label, &it.dst_label, el)
        }
        WeightQuery::Subgraph => {
            let n = sketch.subgraph_count(pattern, el)?;
            QueryResult { w: n, w_l: None }
        }
    };
    let ns = t.elapsed().as_nanos() as u64;
    let truth = match kind {
        WeightQuery::VertexOut => oracle.vertex_out_weight(&it.src, &it.src_label, el),
        WeightQuery::VertexIn => oracle.vertex_in_weight(&it.dst, &it.dst_label, el),
        WeightQuery::LabelOut => oracle.label_out_weight(&it.src_label, el),
        WeightQuery::LabelIn => oracle.label_in_weight(&it.dst_label, el),
        WeightQuery::Edge => oracle.edge_weight(&it.src, &it.src_label, &it.dst, &it.dst_label, el),
        WeightQuery::EdgeToLabel => {
            oracle.edge_weight_to_label_group(&it.src, &it.src_label, &it.dst_label, el)
        }
        WeightQuery::Subgraph => QueryResult {
            w: oracle.subgraph_count(pattern, el)?,
            w_l: None,
        },
    };
    Ok((est, truth, ns))
}

/// Queries an already ingested sketch/oracle pair.
pub fn evaluate(sketch: &LSketch, oracle: &ExactStore, plan: &BenchPlan) -> Result<(Vec<TypeReport>, Option<ReachabilityReport>, Option<Latency>)> {
    let live = LiveView::new(oracle);
    let mut reports = Vec::new();
    for (t, kind) in WEIGHT_QUERIES.into_iter().enumerate() {
        let mut plain = ErrorAccumulator::default();
        let mut labeled = ErrorAccumulator::default();
        let mut ns = Vec::new();
        for rep in 0..plan.repeats {
            if live.items.is_empty() {
                break;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(rep as u64));
            rng.set_stream(t as u64 + 1);
            for _ in 0..plan.queries {
                let it = *live.items.choose(&mut rng).unwrap();
                let pattern = if kind == WeightQuery::Subgraph {
                    live.pattern(&mut rng, it, plan.subgraph_size.max(1))
                } else {
                    Vec::new()
                };
                let (est, truth, q_ns) = answer(sketch, oracle, kind, it, &pattern, None)?;
                plain.add(est.value(), truth.value());
                ns.push(q_ns);
                if plan.labeled {
                    let el = Some(it.edge_label.as_str());
                    let (est, truth, _) = answer(sketch, oracle, kind, it, &pattern, el)?;
                    labeled.add(est.value(), truth.value());
                }
            }
        }
        reports.push(TypeReport {
            kind,
            unlabeled: plain.finish(),
            labeled: plan.labeled.then(|| labeled.finish()),
            latency: Latency::from_samples(ns),
        });
    }

    if !sketch.config().path_queries {
        return Ok((reports, None, None));
    }
    let mut reach = ReachabilityReport::default();
    let mut ns = Vec::new();
    for rep in 0..plan.repeats {
        if live.vertices.is_empty() {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed.wrapping_add(rep as u64));
        rng.set_stream(100);
        for _ in 0..plan.queries {
            let a = *live.vertices.choose(&mut rng).unwrap();
            // Half the targets come from a walk so both outcomes are exercised.
            let b = if rng.gen_bool(0.5) {
                let steps = rng.gen_range(1..=4);
                live.walk(&mut rng, a, steps)
            } else {
                *live.vertices.choose(&mut rng).unwrap()
            };
            let t = Instant::now();
            let est = sketch.path_reachable(a.0, a.1, b.0, b.1, None)?;
            ns.push(t.elapsed().as_nanos() as u64);
            reach.add(est, oracle.path_reachable(a.0, a.1, b.0, b.1, None));
        }
    }
    Ok((reports, Some(reach), Some(Latency::from_samples(ns))))
}

pub fn run(cfg: &SketchConfig, items: &[EdgeItem], plan: &BenchPlan) -> Result<BenchReport> {
    if let Some(cap) = plan.max_oracle_items {
        if items.len() > cap {
            return Err(Error::ResourceLimit(format!(
                "stream has {} items but the oracle cap is {cap}",
                items.len()
            )));
        }
    }
    let (sketch, oracle, ins) = ingest(cfg, items)?;
    let (weight_queries, reachability, path_latency) = evaluate(&sketch, &oracle, plan)?;
    let stats = sketch.stats();
    Ok(BenchReport {
        items: stats.items,
        live_items: oracle.len(),
        matrix_items: stats.matrix_items,
        pool_items: stats.pool_items,
        pool_fraction: if stats.items == 0 {
            0.0
        } else {
            stats.pool_items as f64 / stats.items as f64
        },
        subwindows_elapsed: stats.subwindows_elapsed,
        mean_insert_ns: Latency::from_samples(ins).mean_ns,
        weight_queries,
        reachability,
        path_latency,
        unresolved_hashes: sketch.unresolved_hashes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, StreamSpec};

    #[test]
    fn percentiles() {
        let l = Latency::from_samples((1..=100).rev().collect());
        assert_eq!((l.p50_ns, l.p99_ns, l.max_ns, l.samples), (51, 99, 100, 100));
        assert_eq!(Latency::from_samples(Vec::new()).samples, 0);
    }

    #[test]
    fn tiny_matrix_overestimates() {
        let spec = StreamSpec {
            vertices: 60,
            edges: 2000,
            duplicate_rate: 0.3,
            max_weight: 3,
            ..Default::default()
        };
        let items = generate(&spec).unwrap();
        let mut cfg = SketchConfig::example(4, 4, 16, 4, 4);
        cfg.window = 200_000;
        cfg.subwindow = 1000;
        let plan = BenchPlan {
            queries: 100,
            ..Default::default()
        };
        let r = run(&cfg, &items, &plan).unwrap();
        assert_eq!(r.items, 2000);
        assert!(r.pool_items > 0);
        for t in &r.weight_queries {
            assert!(t.unlabeled.min_relative_error >= 0.0, "{:?}", t.kind);
            assert!(t.labeled.as_ref().unwrap().min_relative_error >= 0.0, "{:?}", t.kind);
        }
        assert_eq!(r.reachability.unwrap().false_negatives, 0);
    }

    #[test]
    fn memory_guard() {
        let items = vec![EdgeItem::new("a", "b", "x", "y", "e", 1, 0); 3];
        let plan = BenchPlan {
            max_oracle_items: Some(2),
            ..Default::default()
        };
        let cfg = SketchConfig::uniform(8, 8).unwrap();
        assert!(matches!(run(&cfg, &items, &plan), Err(Error::ResourceLimit(_))));
    }
}
