//! Distribution summaries of a stream, used to size a sketch before
//! deploying it.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use crate::sketch::EdgeItem;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StreamStats {
    pub items: usize,
    pub vertices: usize,
    pub distinct_edges: usize,
    pub total_weight: u64,
    /// Endpoint occurrences per vertex label (each item counts twice).
    pub vertex_label_counts: BTreeMap<String, u64>,
    pub edge_label_counts: BTreeMap<String, u64>,
    pub max_out_degree: usize,
    pub mean_out_degree: f64,
    /// `max_out_degree / mean_out_degree`.
    pub degree_skew: f64,
    pub first_timestamp: Option<u64>,
    pub last_timestamp: Option<u64>,
}

impl StreamStats {
    pub fn from_items<'a>(items: impl IntoIterator<Item = &'a EdgeItem>) -> Self {
        let mut s = StreamStats::default();
        let mut vertices: HashSet<(&str, &str)> = HashSet::new();
        let mut edges: HashSet<(&str, &str, &str, &str)> = HashSet::new();
        for it in items {
            s.items += 1;
            s.total_weight += it.weight;
            vertices.insert((&it.src, &it.src_label));
            vertices.insert((&it.dst, &it.dst_label));
            edges.insert((&it.src, &it.src_label, &it.dst, &it.dst_label));
            *s.vertex_label_counts.entry(it.src_label.clone()).or_default() += 1;
            *s.vertex_label_counts.entry(it.dst_label.clone()).or_default() += 1;
            *s.edge_label_counts.entry(it.edge_label.clone()).or_default() += 1;
            s.first_timestamp.get_or_insert(it.timestamp);
            s.last_timestamp = Some(it.timestamp);
        }
        let mut out: HashMap<(&str, &str), usize> = HashMap::new();
        for &(a, al, _, _) in &edges {
            *out.entry((a, al)).or_default() += 1;
        }
        s.vertices = vertices.len();
        s.distinct_edges = edges.len();
        s.max_out_degree = out.values().copied().max().unwrap_or(0);
        if !out.is_empty() {
            s.mean_out_degree = edges.len() as f64 / out.len() as f64;
            s.degree_skew = s.max_out_degree as f64 / s.mean_out_degree;
        }
        s
    }

    /// Share of endpoint occurrences carrying the most frequent vertex label.
    pub fn majority_label_share(&self) -> f64 {
        let total: u64 = self.vertex_label_counts.values().sum();
        let max = self.vertex_label_counts.values().copied().max().unwrap_or(0);
        if total == 0 {
            0.0
        } else {
            max as f64 / total as f64
        }
    }
}

/// Matrix width for `distinct_edges`: square-root sizing of a matrix of twin
/// cells, `ceil(sqrt(distinct / 2))`, raised to `min_width` and rounded up to
/// a multiple of `alignment`.
pub fn recommend_width(distinct_edges: usize, alignment: usize, min_width: usize) -> usize {
    let raw = ((distinct_edges as f64) / 2.0).sqrt().ceil() as usize;
    let d = raw.max(min_width).max(1);
    let a = alignment.max(1);
    d.div_ceil(a) * a
}
