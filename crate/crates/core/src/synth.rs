//! Deterministic synthetic streams.
//!
//! Vertices are `v0..`, vertex labels `vl0..` and edge labels `el0..`. Each
//! vertex carries one fixed label: `vl0` with probability `skew`, otherwise
//! a uniformly chosen other label (all labels uniform when `skew` is
//! `None`). Each item repeats an earlier distinct edge with probability
//! `duplicate_rate`, otherwise it draws a fresh `(src, dst)` pair with
//! `src != dst`. Timestamps are spread evenly over `[0, time_span]`.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sketch::EdgeItem;

#[derive(Clone, Debug, PartialEq)]
pub struct StreamSpec {
    pub vertices: usize,
    pub edges: usize,
    pub vertex_labels: usize,
    pub edge_labels: usize,
    /// Fraction of vertices carrying the majority label `vl0`.
    pub skew: Option<f64>,
    pub duplicate_rate: f64,
    pub time_span: u64,
    pub max_weight: u64,
    pub seed: u64,
}

impl Default for StreamSpec {
    fn default() -> Self {
        StreamSpec {
            vertices: 1000,
            edges: 10_000,
            vertex_labels: 3,
            edge_labels: 5,
            skew: None,
            duplicate_rate: 0.0,
            time_span: 86_400,
            max_weight: 1,
            seed: 0,
        }
    }
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Infeasible(m));
        if self.vertices < 2 {
            return bad("need at least two vertices".into());
        }
        if self.vertex_labels == 0 || self.edge_labels == 0 {
            return bad("label counts must be positive".into());
        }
        if self.max_weight == 0 {
            return bad("max_weight must be positive".into());
        }
        if !(0.0..1.0).contains(&self.duplicate_rate) {
            return bad("duplicate_rate must lie in [0, 1)".into());
        }
        if let Some(s) = self.skew {
            if !(0.0..=1.0).contains(&s) {
                return bad("skew must lie in [0, 1]".into());
            }
            if self.vertex_labels == 1 && s < 1.0 {
                return bad("skew below 1 needs at least two vertex labels".into());
            }
        }
        let pairs = self.vertices as u128 * (self.vertices as u128 - 1);
        let fresh = (self.edges as f64 * (1.0 - self.duplicate_rate)).ceil() as u128;
        if fresh > pairs {
            return bad(format!(
                "expected {fresh} distinct edges but only {pairs} ordered pairs exist"
            ));
        }
        Ok(())
    }

    /// Expected number of distinct `(src, dst)` pairs in the output.
    pub fn expected_distinct(&self) -> f64 {
        if self.edges == 0 {
            return 0.0;
        }
        1.0 + (self.edges - 1) as f64 * (1.0 - self.duplicate_rate)
    }
}

/// Label of each vertex under `spec`, drawn from its own RNG stream.
pub fn vertex_labels(spec: &StreamSpec) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    (0..spec.vertices)
        .map(|_| match spec.skew {
            None => rng.gen_range(0..spec.vertex_labels),
            Some(s) => {
                if rng.gen_bool(s) {
                    0
                } else {
                    rng.gen_range(1..spec.vertex_labels)
                }
            }
        })
        .collect()
}

pub fn generate(spec: &StreamSpec) -> Result<Vec<EdgeItem>> {
    spec.validate()?;
    let labels = vertex_labels(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(2);
    let n = spec.vertices;
    let pairs = n as u64 * (n as u64 - 1);
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut distinct: Vec<(usize, usize)> = Vec::new();
    let mut items = Vec::with_capacity(spec.edges);
    for i in 0..spec.edges {
        let repeat = !distinct.is_empty()
            && (distinct.len() as u64 == pairs || rng.gen_bool(spec.duplicate_rate));
        let (s, d) = if repeat {
            *distinct.choose(&mut rng).unwrap()
        } else {
            let pair = fresh_pair(&mut rng, n, &seen);
            seen.insert(pair);
            distinct.push(pair);
            pair
        };
        let t = if spec.edges > 1 {
            (spec.time_span as u128 * i as u128 / (spec.edges as u128 - 1)) as u64
        } else {
            0
        };
        items.push(EdgeItem::new(
            format!("v{s}"),
            format!("v{d}"),
            format!("vl{}", labels[s]),
            format!("vl{}", labels[d]),
            format!("el{}", rng.gen_range(0..spec.edge_labels)),
            rng.gen_range(1..=spec.max_weight),
            t,
        ));
    }
    Ok(items)
}

fn fresh_pair(rng: &mut ChaCha8Rng, n: usize, seen: &HashSet<(usize, usize)>) -> (usize, usize) {
    for _ in 0..64 {
        let s = rng.gen_range(0..n);
        let d = rng.gen_range(0..n - 1);
        let d = if d >= s { d + 1 } else { d };
        if !seen.contains(&(s, d)) {
            return (s, d);
        }
    }
    // Dense graph: walk from a random offset to the next free pair.
    let total = n * (n - 1);
    let start = rng.gen_range(0..total);
    (0..total)
        .map(|j| {
            let idx = (start + j) % total;
            let s = idx / (n - 1);
            let d = idx % (n - 1);
            (s, if d >= s { d + 1 } else { d })
        })
        .find(|p| !seen.contains(p))
        .expect("caller guarantees a free pair")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let spec = StreamSpec {
            vertices: 20,
            edges: 300,
            max_weight: 4,
            duplicate_rate: 0.3,
            seed: 9,
            ..Default::default()
        };
        let a = generate(&spec).unwrap();
        assert_eq!(a, generate(&spec).unwrap());
        assert_ne!(a, generate(&StreamSpec { seed: 10, ..spec.clone() }).unwrap());
        assert!(a.iter().all(|i| i.src != i.dst && (1..=4).contains(&i.weight)));
        assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert_eq!(a.last().unwrap().timestamp, spec.time_span);
    }

    #[test]
    fn vertex_labels_are_stable_per_vertex() {
        let spec = StreamSpec {
            vertices: 30,
            edges: 500,
            ..Default::default()
        };
        let mut label_of = std::collections::HashMap::new();
        for i in generate(&spec).unwrap() {
            assert_eq!(*label_of.entry(i.src.clone()).or_insert(i.src_label.clone()), i.src_label);
            assert_eq!(*label_of.entry(i.dst.clone()).or_insert(i.dst_label.clone()), i.dst_label);
        }
    }

    #[test]
    fn complete_graph_saturates() {
        let spec = StreamSpec {
            vertices: 3,
            edges: 6,
            ..Default::default()
        };
        let items = generate(&spec).unwrap();
        let distinct: HashSet<_> = items.iter().map(|i| (&i.src, &i.dst)).collect();
        assert_eq!(distinct.len(), 6);
        assert!(generate(&StreamSpec { edges: 7, ..spec.clone() }).is_err());
        let with_dups = StreamSpec {
            edges: 20,
            duplicate_rate: 0.9,
            ..spec
        };
        assert_eq!(generate(&with_dups).unwrap().len(), 20);
    }

    #[test]
    fn rejects_infeasible() {
        for spec in [
            StreamSpec { vertices: 1, ..Default::default() },
            StreamSpec { vertex_labels: 0, ..Default::default() },
            StreamSpec { duplicate_rate: 1.0, ..Default::default() },
            StreamSpec { skew: Some(1.5), ..Default::default() },
            StreamSpec { vertex_labels: 1, skew: Some(0.5), ..Default::default() },
        ] {
            assert!(matches!(generate(&spec), Err(Error::Infeasible(_))), "{spec:?}");
        }
    }
}
