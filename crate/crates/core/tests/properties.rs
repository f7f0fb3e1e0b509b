mod common;

use proptest::prelude::*;

use common::{distinct_vertices, lazy_live, placement_pos, EagerMatrix};
use lsketch::{snapshot, EdgeItem, ExactStore, LSketch, PatternEdge, SketchConfig};

fn tight_config(d: usize, b: usize, cap: Option<usize>) -> SketchConfig {
    let mut cfg = SketchConfig::example(d, b, 16, 3, 4);
    cfg.window = 12;
    cfg.subwindow = 3;
    cfg.primes = lsketch::hashing::PrimeTable::first(3);
    cfg.prime_product_cap = cap;
    cfg
}

prop_compose! {
    /// Items over a small vertex set with non-decreasing timestamps.
    fn stream(max_len: usize)(
        raw in prop::collection::vec((0u8..8, 0u8..8, 0u8..4, 1u64..4, 0u64..5), 1..max_len)
    ) -> Vec<EdgeItem> {
        let mut t = 0;
        raw.into_iter()
            .map(|(a, b, le, w, dt)| {
                t += if dt == 4 { 9 } else { dt };
                // Each vertex keeps a single label so queries have a clear truth.
                EdgeItem::new(
                    format!("v{a}"),
                    format!("v{b}"),
                    format!("l{}", a % 2),
                    format!("l{}", b % 2),
                    format!("e{le}"),
                    w,
                    t,
                )
            })
            .collect()
    }
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 200,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn lazy_sliding_matches_eager_reference(items in stream(120), h in 1usize..4) {
        let cfg = tight_config(2 * h, h, None);
        let mut lazy = LSketch::new(cfg.clone()).unwrap();
        let mut eager = EagerMatrix::new(&cfg);
        for it in &items {
            let got = placement_pos(lazy.insert(it).unwrap().placement);
            let want = eager.insert(it);
            prop_assert_eq!(got, want);
            prop_assert_eq!(lazy_live(&lazy), eager.live());
        }
    }

    #[test]
    fn counts_equal_decoded_label_totals(items in stream(120), cap in prop::option::of(1usize..6)) {
        let cfg = tight_config(3, 3, cap);
        let primes: Vec<u64> = cfg.primes.primes().to_vec();
        let mut s = LSketch::new(cfg).unwrap();
        for it in &items {
            s.insert(it).unwrap();
        }
        let m = s.matrix();
        let segs = m.segments().map(|(_, _, _, seg)| &seg.counters);
        let pool = s.pool().entries().map(|e| &e.counters);
        for counters in segs.chain(pool) {
            for slot in counters.stored() {
                let decoded: u64 = primes.iter().map(|&p| slot.product.multiplicity(p)).sum();
                prop_assert_eq!(decoded, slot.count);
            }
        }
    }

    #[test]
    fn sketch_never_underestimates(items in stream(150), d in 1usize..5) {
        let cfg = tight_config(d, 1.max(d / 2), None);
        let mut s = LSketch::new(cfg.clone()).unwrap();
        let mut o = ExactStore::for_config(&cfg);
        for it in &items {
            s.insert(it).unwrap();
            o.insert(it).unwrap();
        }
        let vs = distinct_vertices(&items);
        for el in [None, Some("e0"), Some("e3")] {
            for l in ["l0", "l1"] {
                prop_assert!(s.label_out_weight(l, el).value() >= o.label_out_weight(l, el).value());
                prop_assert!(s.label_in_weight(l, el).value() >= o.label_in_weight(l, el).value());
            }
            for (a, al) in &vs {
                prop_assert!(s.vertex_out_weight(a, al, el).value() >= o.vertex_out_weight(a, al, el).value());
                prop_assert!(s.vertex_in_weight(a, al, el).value() >= o.vertex_in_weight(a, al, el).value());
                for bl in ["l0", "l1"] {
                    prop_assert!(
                        s.edge_weight_to_label_group(a, al, bl, el).value()
                            >= o.edge_weight_to_label_group(a, al, bl, el).value()
                    );
                }
                for (b, bl) in &vs {
                    prop_assert!(s.edge_weight(a, al, b, bl, el).value() >= o.edge_weight(a, al, b, bl, el).value());
                    let pattern = [PatternEdge::new(a, al, b, bl), PatternEdge::new(b, bl, a, al)];
                    prop_assert!(s.subgraph_count(&pattern, el).unwrap() >= o.subgraph_count(&pattern, el).unwrap());
                    if o.path_reachable(a, al, b, bl, el) {
                        prop_assert!(s.path_reachable(a, al, b, bl, el).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn snapshot_round_trip_preserves_answers(items in stream(80)) {
        let cfg = tight_config(4, 2, Some(3));
        let mut s = LSketch::new(cfg).unwrap();
        for it in &items {
            s.insert(it).unwrap();
        }
        let back = snapshot::from_bytes(&snapshot::to_bytes(&s)).unwrap();
        let vs = distinct_vertices(&items);
        for el in [None, Some("e1")] {
            for (a, al) in &vs {
                prop_assert_eq!(back.vertex_out_weight(a, al, el), s.vertex_out_weight(a, al, el));
                prop_assert_eq!(back.vertex_in_weight(a, al, el), s.vertex_in_weight(a, al, el));
                for (b, bl) in &vs {
                    prop_assert_eq!(back.edge_weight(a, al, b, bl, el), s.edge_weight(a, al, b, bl, el));
                    prop_assert_eq!(
                        back.path_reachable(a, al, b, bl, el).unwrap(),
                        s.path_reachable(a, al, b, bl, el).unwrap()
                    );
                }
            }
        }
    }
}
