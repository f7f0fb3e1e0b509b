//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any gating criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{distinct_vertices, find_collision_free_seed, lazy_live, placement_pos, EagerMatrix};
use lsketch::analysis::{collision_free_probability, CollisionParams, LabelModel};
use lsketch::bench::{self, BenchPlan, WEIGHT_QUERIES};
use lsketch::counters::WindowCounters;
use lsketch::hashing::{BlockLayout, PrimeTable};
use lsketch::matrix::{get_weights_in_segment, Segment};
use lsketch::synth::{generate, StreamSpec};
use lsketch::{EdgeItem, ExactStore, LSketch, PatternEdge, SketchConfig};

enum Status {
    Pass,
    Fail,
    Warn,
    NotReproducible,
}

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. Slot transitions of a single segment under weighted, labeled updates.
fn golden_slot_transitions() -> Check {
    let primes = PrimeTable::from_primes(vec![2, 3]).map_err(|e| e.to_string())?;
    let (p1, p2) = (primes.primes()[0], primes.primes()[1]);
    let k = 8 / 2;
    let epoch = 4;
    let mut seg = Segment {
        f_pair: (1, 4),
        idx_pair: (1, 1),
        counters: WindowCounters::default(),
    };
    let slot = |s: &Segment| s.counters.dense(epoch, k).last().cloned().unwrap();
    ensure(slot(&seg) == (0, BigUint::one()), || format!("fresh slot {:?}", slot(&seg)))?;
    seg.counters.record(epoch, k, p1, 2, None);
    ensure(slot(&seg) == (2, BigUint::from(4u32)), || format!("after first update {:?}", slot(&seg)))?;
    seg.counters.record(epoch, k, p2, 1, None);
    ensure(slot(&seg) == (3, BigUint::from(12u32)), || format!("after second update {:?}", slot(&seg)))?;
    let w1 = get_weights_in_segment(Some(&seg), epoch, k, Some(p1));
    let w2 = get_weights_in_segment(Some(&seg), epoch, k, Some(p2));
    ensure(w1 == (3, 2) && w2 == (3, 1), || format!("weights {w1:?} {w2:?}"))?;
    Ok("(0,1) -> (2,4) -> (3,12); weights (3,2) and (3,1)".into())
}

// 2. Closed-form collision-free probability at the published parameters.
fn theorem_fixture() -> Check {
    let params = CollisionParams::from_sketch(1000, 256, 2, 500_000, 200, LabelModel::Uniform { labels: 2 });
    let p = collision_free_probability(&params).map_err(|e| e.to_string())?;
    ensure((p - 0.9996).abs() <= 1e-4, || format!("P = {p:.6}"))?;
    Ok(format!("P = {p:.6}"))
}

fn exactness_config(items: &[EdgeItem]) -> SketchConfig {
    let mut cfg = SketchConfig::example(192, 64, 4096, 16, 16);
    cfg.window = 20_000;
    cfg.subwindow = 1_000;
    find_collision_free_seed(&mut cfg, items, 0);
    cfg
}

// 3. Zero error at a collision-free configuration.
fn exactness() -> Check {
    let spec = StreamSpec {
        vertices: 100,
        edges: 10_000,
        vertex_labels: 3,
        edge_labels: 5,
        duplicate_rate: 0.5,
        time_span: 10_000,
        max_weight: 3,
        seed: 3,
        ..Default::default()
    };
    let items = generate(&spec).map_err(|e| e.to_string())?;
    let cfg = exactness_config(&items);
    let plan = BenchPlan {
        queries: 500,
        ..Default::default()
    };
    let r = bench::run(&cfg, &items, &plan).map_err(|e| e.to_string())?;
    for t in &r.weight_queries {
        for (rep, tag) in [(Some(&t.unlabeled), "unlabeled"), (t.labeled.as_ref(), "labeled")] {
            let rep = rep.ok_or("missing labeled report")?;
            ensure(rep.are == 0.0 && rep.max_relative_error == 0.0 && rep.false_hits == 0, || {
                format!("{} {tag}: ARE {} max {} false hits {}", t.kind.name(), rep.are, rep.max_relative_error, rep.false_hits)
            })?;
            ensure(rep.queries == 500, || format!("{} ran {} queries", t.kind.name(), rep.queries))?;
        }
    }
    let reach = r.reachability.ok_or("path queries disabled")?;
    ensure(reach.false_positives == 0 && reach.false_negatives == 0, || format!("{reach:?}"))?;

    // The dense stream above is strongly connected, so unreachable pairs
    // come from a sparse stream at the same configuration.
    let sparse = StreamSpec {
        vertices: 100,
        edges: 90,
        seed: 4,
        ..spec
    };
    let sparse_items = generate(&sparse).map_err(|e| e.to_string())?;
    let mut sparse_cfg = cfg.clone();
    find_collision_free_seed(&mut sparse_cfg, &sparse_items, 0);
    let sr = bench::run(&sparse_cfg, &sparse_items, &plan).map_err(|e| e.to_string())?;
    let sreach = sr.reachability.ok_or("path queries disabled")?;
    ensure(sreach.false_positives == 0 && sreach.oracle_false > 0, || format!("sparse {sreach:?}"))?;
    Ok(format!(
        "seed {}, {} items ({} pooled), {} weight-query types x 500 x 2, ARE 0; path queries {} dense + {} sparse ({} unreachable), 0 false positives",
        cfg.hash_seed,
        r.items,
        r.pool_items,
        WEIGHT_QUERIES.len(),
        reach.queries,
        sreach.queries,
        sreach.oracle_false
    ))
}

// 4. One-sided error at tight configurations.
fn overestimation() -> Check {
    let mut queries = 0;
    let mut path_true = 0;
    let mut pooled = 0;
    for seed in 0..100u64 {
        let widths = [(4, 2), (6, 3), (8, 4)];
        let (d, b) = widths[seed as usize % widths.len()];
        let mut cfg = SketchConfig::example(d, b, 16, 2 + seed as usize % 2, 4);
        cfg.window = 100;
        cfg.subwindow = 10;
        cfg.primes = PrimeTable::first(3);
        cfg.hash_seed = seed;
        let spec = StreamSpec {
            vertices: 30,
            edges: 400,
            vertex_labels: 2,
            edge_labels: 3,
            duplicate_rate: 0.3,
            time_span: 400,
            max_weight: 3,
            seed,
            ..Default::default()
        };
        let items = generate(&spec).map_err(|e| e.to_string())?;
        let plan = BenchPlan {
            queries: 100,
            seed,
            ..Default::default()
        };
        let r = bench::run(&cfg, &items, &plan).map_err(|e| e.to_string())?;
        pooled += r.pool_items;
        for t in &r.weight_queries {
            for rep in [Some(&t.unlabeled), t.labeled.as_ref()].into_iter().flatten() {
                queries += rep.queries;
                ensure(rep.min_relative_error >= 0.0, || {
                    format!("seed {seed} {}: min relative error {}", t.kind.name(), rep.min_relative_error)
                })?;
            }
        }
        let reach = r.reachability.ok_or("path queries disabled")?;
        path_true += reach.oracle_true;
        ensure(reach.false_negatives == 0, || format!("seed {seed}: {reach:?}"))?;
    }
    Ok(format!(
        "100 streams, {queries} weight queries all >= truth, {path_true} reachable pairs all found, {pooled} pooled items"
    ))
}

fn compare_all(s: &LSketch, o: &ExactStore, vs: &[(String, String)], labels: &[&str], els: &[Option<&str>]) -> std::result::Result<usize, String> {
    let mut n = 0;
    let mut check = |what: &str, a: u64, b: u64| {
        n += 1;
        ensure(a == b, || format!("{what}: sketch {a} oracle {b}"))
    };
    for &el in els {
        for l in labels {
            check(&format!("label-out {l} {el:?}"), s.label_out_weight(l, el).value(), o.label_out_weight(l, el).value())?;
            check(&format!("label-in {l} {el:?}"), s.label_in_weight(l, el).value(), o.label_in_weight(l, el).value())?;
        }
        for (a, al) in vs {
            check(&format!("out {a}"), s.vertex_out_weight(a, al, el).value(), o.vertex_out_weight(a, al, el).value())?;
            check(&format!("in {a}"), s.vertex_in_weight(a, al, el).value(), o.vertex_in_weight(a, al, el).value())?;
            for l in labels {
                check(
                    &format!("edge-to-label {a} {l}"),
                    s.edge_weight_to_label_group(a, al, l, el).value(),
                    o.edge_weight_to_label_group(a, al, l, el).value(),
                )?;
            }
            for (b, bl) in vs {
                check(&format!("edge {a} {b}"), s.edge_weight(a, al, b, bl, el).value(), o.edge_weight(a, al, b, bl, el).value())?;
                let sp = s.path_reachable(a, al, b, bl, el).map_err(|e| e.to_string())?;
                check(&format!("path {a} {b}"), sp as u64, o.path_reachable(a, al, b, bl, el) as u64)?;
            }
        }
        let pattern: Vec<PatternEdge> = vs.windows(2).take(3).map(|w| PatternEdge::new(&w[0].0, &w[0].1, &w[1].0, &w[1].1)).collect();
        check("subgraph", s.subgraph_count(&pattern, el).unwrap(), o.subgraph_count(&pattern, el).unwrap())?;
    }
    Ok(n)
}

fn random_schedule(rng: &mut ChaCha8Rng, n: usize, vertices: usize, w_s: u64) -> Vec<EdgeItem> {
    let mut t = rng.gen_range(0..100);
    (0..n)
        .map(|_| {
            t += match rng.gen_range(0..10) {
                0 => rng.gen_range(w_s..6 * w_s),
                1..=3 => rng.gen_range(0..w_s),
                _ => 0,
            };
            let a = rng.gen_range(0..vertices);
            let b = rng.gen_range(0..vertices);
            EdgeItem::new(
                format!("v{a}"),
                format!("v{b}"),
                format!("l{}", a % 2),
                format!("l{}", b % 2),
                format!("e{}", rng.gen_range(0..3)),
                rng.gen_range(1..4),
                t,
            )
        })
        .collect()
}

// 5. Sliding-window equivalence with the oracle and with eager shifting.
fn window_equivalence() -> Check {
    let mut checks = 0;
    let mut slides = 0;
    let mut max_span = 0;
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_s = 10;
        let items = random_schedule(&mut rng, 250, 12, w_s);
        let mut cfg = SketchConfig::example(64, 32, 4096, 8, 8);
        cfg.window = 4 * w_s;
        cfg.subwindow = w_s;
        find_collision_free_seed(&mut cfg, &items, seed * 1000);
        let k = cfg.subwindows() as u64;
        let span = (items.last().unwrap().timestamp - items[0].timestamp) / w_s;
        ensure(span >= 3 * k, || format!("schedule spans only {span} subwindows"))?;
        max_span = max_span.max(span);

        let vs = distinct_vertices(&items);
        let mut s = LSketch::new(cfg.clone()).unwrap();
        let mut o = ExactStore::for_config(&cfg);
        let mut eager = EagerMatrix::new(&cfg);
        for it in &items {
            let receipt = s.insert(it).map_err(|e| e.to_string())?;
            o.insert(it).map_err(|e| e.to_string())?;
            ensure(placement_pos(receipt.placement) == eager.insert(it), || format!("placement differs at {it:?}"))?;
            ensure(lazy_live(&s) == eager.live(), || format!("segments differ after {it:?}"))?;
            if receipt.expired > 0 {
                slides += 1;
                checks += compare_all(&s, &o, &vs, &["l0", "l1"], &[None, Some("e1")])
                    .map_err(|e| format!("seed {seed} t={}: {e}", it.timestamp))?;
            }
        }
        // Let the whole window drain without inserts.
        let end = items.last().unwrap().timestamp;
        for t in [end + w_s, end + 3 * w_s, end + 5 * w_s] {
            s.advance_to(t).map_err(|e| e.to_string())?;
            o.advance_to(t).map_err(|e| e.to_string())?;
            eager.advance(t);
            ensure(lazy_live(&s) == eager.live(), || format!("segments differ at drain t={t}"))?;
            checks += compare_all(&s, &o, &vs, &["l0", "l1"], &[None]).map_err(|e| format!("drain: {e}"))?;
        }
    }

    // Lazy against eager at a collision-heavy configuration as well.
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let items = random_schedule(&mut rng, 400, 10, 3);
        let mut cfg = SketchConfig::example(4, 2, 16, 2, 4);
        cfg.window = 12;
        cfg.subwindow = 3;
        cfg.hash_seed = seed;
        let mut s = LSketch::new(cfg.clone()).unwrap();
        let mut eager = EagerMatrix::new(&cfg);
        for it in &items {
            let got = placement_pos(s.insert(it).map_err(|e| e.to_string())?.placement);
            ensure(got == eager.insert(it), || format!("tight placement differs at {it:?}"))?;
            ensure(lazy_live(&s) == eager.live(), || format!("tight segments differ after {it:?}"))?;
        }
    }
    Ok(format!(
        "{slides} slides over schedules of up to {max_span} subwindows, {checks} query comparisons, lazy = eager on 32 schedules"
    ))
}

/// Exponents of `n` by trial division; `None` if a factor above `limit` remains.
fn factorize(n: &BigUint, limit: u64) -> Option<BTreeMap<u64, u64>> {
    let mut n = n.clone();
    let mut out = BTreeMap::new();
    for d in 2..=limit {
        let dd = BigUint::from(d);
        while !n.is_zero() && (&n % &dd).is_zero() {
            n /= &dd;
            *out.entry(d).or_insert(0) += 1;
        }
    }
    (n.is_one()).then_some(out)
}

// 6. Dual-counter decode against factorization.
fn dual_counter_decode() -> Check {
    let table = PrimeTable::first(16);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut total = 0;
    for round in 0..300 {
        let n = rng.gen_range(1..=64);
        let cap = if round % 3 == 0 { Some(rng.gen_range(1..16)) } else { None };
        let mut c = WindowCounters::default();
        let mut want: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..n {
            let p = table.primes()[rng.gen_range(0..table.len())];
            let w = rng.gen_range(1..=8);
            c.record(3, 4, p, w, cap);
            *want.entry(p).or_default() += w;
        }
        total += n;
        let slot = c.stored().next().ok_or("no slot written")?;
        let sum: u64 = want.values().sum();
        ensure(slot.count == sum, || format!("C = {} expected {sum}", slot.count))?;
        let factors = factorize(&slot.product.value(), 60).ok_or("product has a foreign factor")?;
        ensure(factors == want, || format!("factorization {factors:?} expected {want:?}"))?;
        for &p in table.primes() {
            let got = c.weights(3, 4, Some(p)).1;
            let exp = want.get(&p).copied().unwrap_or(0);
            ensure(got == exp, || format!("decode of {p}: {got} expected {exp}"))?;
        }
    }
    Ok(format!("300 segments, {total} insertions, decode equals factorization"))
}

fn skew_fraction(layout: BlockLayout, items: &[EdgeItem], seed: u64) -> std::result::Result<f64, String> {
    let mut cfg = SketchConfig::with_layout(layout);
    cfg.fingerprint_range = 64;
    cfg.candidates = 4;
    cfg.samples = 8;
    cfg.reset_lcg();
    cfg.window = 1_000_000;
    cfg.subwindow = 1_000;
    cfg.hash_seed = seed;
    cfg.path_queries = false;
    let mut s = LSketch::new(cfg).map_err(|e| e.to_string())?;
    for it in items {
        s.insert(it).map_err(|e| e.to_string())?;
    }
    let st = s.stats();
    Ok(st.matrix_items as f64 / st.items as f64)
}

// 7. Skewed blocking keeps more of a skewed stream in the matrix.
fn skewed_blocking() -> Check {
    let mut lines = Vec::new();
    for seed in 0..10u64 {
        let spec = StreamSpec {
            vertices: 400,
            edges: 6_000,
            vertex_labels: 2,
            edge_labels: 4,
            skew: Some(0.9),
            duplicate_rate: 0.2,
            time_span: 6_000,
            max_weight: 1,
            seed,
        };
        let items = generate(&spec).map_err(|e| e.to_string())?;
        let uniform = BlockLayout::uniform(40, 20).map_err(|e| e.to_string())?;
        let skewed = BlockLayout::skewed(&[4, 36])
            .and_then(|l| l.pin("vl1", 0))
            .and_then(|l| l.pin("vl0", 1))
            .map_err(|e| e.to_string())?;
        let u = skew_fraction(uniform, &items, seed)?;
        let s = skew_fraction(skewed, &items, seed)?;
        ensure(s >= u, || format!("seed {seed}: skewed {s:.3} < uniform {u:.3}"))?;
        lines.push(format!("{s:.2}/{u:.2}"));
    }
    Ok(format!("matrix-resident fraction skewed/uniform per seed: {}", lines.join(" ")))
}

// 8. Insert latency does not grow with stream length.
fn throughput() -> (Status, String) {
    let spec = StreamSpec {
        vertices: 50_000,
        edges: 1_000_000,
        vertex_labels: 4,
        edge_labels: 8,
        duplicate_rate: 0.2,
        time_span: 7 * 86_400,
        max_weight: 5,
        seed: 8,
        ..Default::default()
    };
    let items = match generate(&spec) {
        Ok(i) => i,
        Err(e) => return (Status::Fail, e.to_string()),
    };
    let mut cfg = SketchConfig::uniform(1024, 256).unwrap();
    cfg.path_queries = false;
    let mut s = LSketch::new(cfg).unwrap();
    let start = Instant::now();
    let mut head = 0.0;
    for (i, it) in items.iter().enumerate() {
        if let Err(e) = s.insert(it) {
            return (Status::Fail, e.to_string());
        }
        if i + 1 == 100_000 {
            head = start.elapsed().as_secs_f64() / 100_000.0;
        }
    }
    let mean = start.elapsed().as_secs_f64() / items.len() as f64;
    let ratio = mean / head;
    let st = s.stats();
    let msg = format!(
        "mean {:.0} ns over 10^6 vs {:.0} ns over first 10^5 (ratio {ratio:.2}); {:.1}% pooled",
        mean * 1e9,
        head * 1e9,
        100.0 * st.pool_items as f64 / st.items as f64
    );
    if ratio <= 3.0 {
        (Status::Pass, msg)
    } else {
        (Status::Warn, msg)
    }
}

fn run(id: u32, name: &str, status: Status, detail: &str) -> bool {
    let tag = match status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Warn => "WARN",
        Status::NotReproducible => "N/A ",
    };
    println!("{tag} [{id}] {name}: {detail}");
    !matches!(status, Status::Fail)
}

fn guarded(f: fn() -> Check) -> (Status, String) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(msg)) => (Status::Pass, msg),
        Ok(Err(msg)) => (Status::Fail, msg),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            (Status::Fail, msg)
        }
    }
}

type Criterion = (u32, &'static str, fn() -> Check);

fn main() -> ExitCode {
    let gated: [Criterion; 7] = [
        (1, "weighted slot transitions", golden_slot_transitions),
        (2, "collision-free probability fixture", theorem_fixture),
        (3, "exactness at a collision-free configuration", exactness),
        (4, "overestimation on tight configurations", overestimation),
        (5, "window expiry equivalence", window_equivalence),
        (6, "dual-counter decode", dual_counter_decode),
        (7, "skewed blocking benefit", skewed_blocking),
    ];
    let mut ok = true;
    for (id, name, f) in gated {
        let t = Instant::now();
        let (status, detail) = guarded(f);
        ok &= run(id, name, status, &format!("{detail} [{:.2}s]", t.elapsed().as_secs_f64()));
    }
    let (status, detail) = throughput();
    run(8, "throughput sanity (non-gating)", status, &detail);
    run(
        9,
        "published real-dataset error magnitudes",
        Status::NotReproducible,
        "datasets are not bundled and the figure values are not printed; substituted by criteria 3-7",
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
