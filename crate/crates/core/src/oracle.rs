//! Exact windowed multigraph with the sketch's query API, and the error
//! metrics used to compare the two.
//!
//! A vertex is identified by its `(id, label)` pair, as in the sketch. An
//! item is live while its timestamp is at least
//! `latest_start - (k - 1) * W_s`, where `latest_start` is the start of
//! the newest subwindow.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::Serialize;

use crate::config::SketchConfig;
use crate::error::{Error, Result};
use crate::sketch::{EdgeItem, PatternEdge, QueryResult};

#[derive(Clone, Debug)]
pub struct ExactStore {
    subwindow: u64,
    k: u64,
    latest_start: Option<u64>,
    items: VecDeque<EdgeItem>,
}

impl ExactStore {
    pub fn new(window: u64, subwindow: u64, start: Option<u64>) -> Self {
        ExactStore {
            subwindow,
            k: window / subwindow,
            latest_start: start,
            items: VecDeque::new(),
        }
    }

    pub fn for_config(cfg: &SketchConfig) -> Self {
        Self::new(cfg.window, cfg.subwindow, cfg.window_start)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Live items, oldest first.
    pub fn items(&self) -> impl Iterator<Item = &EdgeItem> {
        self.items.iter()
    }

    pub fn advance_to(&mut self, now: u64) -> Result<()> {
        let start = *self.latest_start.get_or_insert(now);
        if now < start {
            return Err(Error::RegressingClock { now, latest: start });
        }
        let latest = start + (now - start) / self.subwindow * self.subwindow;
        self.latest_start = Some(latest);
        let live_from = latest.saturating_sub((self.k - 1) * self.subwindow);
        while self.items.front().is_some_and(|i| i.timestamp < live_from) {
            self.items.pop_front();
        }
        Ok(())
    }

    pub fn insert(&mut self, item: &EdgeItem) -> Result<()> {
        if item.weight == 0 {
            return Err(Error::InvalidItem("weight must be at least 1".into()));
        }
        self.advance_to(item.timestamp)?;
        self.items.push_back(item.clone());
        Ok(())
    }

    fn sum(&self, keep: impl Fn(&EdgeItem) -> bool, edge_label: Option<&str>) -> QueryResult {
        let mut w = 0;
        let mut wl = 0;
        for i in self.items.iter().filter(|i| keep(i)) {
            w += i.weight;
            if edge_label == Some(i.edge_label.as_str()) {
                wl += i.weight;
            }
        }
        QueryResult {
            w,
            w_l: edge_label.map(|_| wl),
        }
    }

    pub fn vertex_out_weight(&self, v: &str, label: &str, edge_label: Option<&str>) -> QueryResult {
        self.sum(|i| i.src == v && i.src_label == label, edge_label)
    }

    pub fn vertex_in_weight(&self, v: &str, label: &str, edge_label: Option<&str>) -> QueryResult {
        self.sum(|i| i.dst == v && i.dst_label == label, edge_label)
    }

    pub fn label_out_weight(&self, label: &str, edge_label: Option<&str>) -> QueryResult {
        self.sum(|i| i.src_label == label, edge_label)
    }

    pub fn label_in_weight(&self, label: &str, edge_label: Option<&str>) -> QueryResult {
        self.sum(|i| i.dst_label == label, edge_label)
    }

    pub fn edge_weight(
        &self,
        a: &str,
        a_label: &str,
        b: &str,
        b_label: &str,
        edge_label: Option<&str>,
    ) -> QueryResult {
        self.sum(
            |i| i.src == a && i.src_label == a_label && i.dst == b && i.dst_label == b_label,
            edge_label,
        )
    }

    pub fn edge_weight_to_label_group(
        &self,
        a: &str,
        a_label: &str,
        b_label: &str,
        edge_label: Option<&str>,
    ) -> QueryResult {
        self.sum(
            |i| i.src == a && i.src_label == a_label && i.dst_label == b_label,
            edge_label,
        )
    }

    pub fn path_reachable(
        &self,
        a: &str,
        a_label: &str,
        b: &str,
        b_label: &str,
        edge_label: Option<&str>,
    ) -> bool {
        if a == b && a_label == b_label {
            return true;
        }
        let mut adj: HashMap<(&str, &str), Vec<(&str, &str)>> = HashMap::new();
        for i in &self.items {
            if edge_label.is_none_or(|l| l == i.edge_label) {
                adj.entry((&i.src, &i.src_label))
                    .or_default()
                    .push((&i.dst, &i.dst_label));
            }
        }
        let target = (b, b_label);
        let mut seen = HashSet::from([(a, a_label)]);
        let mut queue = VecDeque::from([(a, a_label)]);
        while let Some(v) = queue.pop_front() {
            for &n in adj.get(&v).into_iter().flatten() {
                if n == target {
                    return true;
                }
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        false
    }

    pub fn subgraph_count(&self, pattern: &[PatternEdge], edge_label: Option<&str>) -> Result<u64> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        Ok(pattern
            .iter()
            .map(|e| {
                self.edge_weight(&e.src, &e.src_label, &e.dst, &e.dst_label, edge_label)
                    .value()
            })
            .min()
            .unwrap_or(0))
    }
}

/// `(est - truth) / truth`.
pub fn relative_error(est: u64, truth: u64) -> Result<f64> {
    if truth == 0 {
        return Err(Error::ZeroTruth);
    }
    Ok((est as f64 - truth as f64) / truth as f64)
}

/// Arithmetic mean; zero for an empty list.
pub fn are(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        0.0
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorReport {
    pub queries: usize,
    #[serde(skip)]
    pub relative_errors: Vec<f64>,
    /// Queries whose ground truth was zero (excluded from ARE).
    pub zero_truth: usize,
    /// Zero-truth queries the sketch answered with a positive value.
    pub false_hits: usize,
    pub are: f64,
    pub max_relative_error: f64,
    pub min_relative_error: f64,
}

/// Collects `(estimate, truth)` pairs into an [`ErrorReport`].
#[derive(Clone, Debug, Default)]
pub struct ErrorAccumulator {
    report: ErrorReport,
}

impl ErrorAccumulator {
    pub fn add(&mut self, est: u64, truth: u64) {
        self.report.queries += 1;
        match relative_error(est, truth) {
            Ok(e) => self.report.relative_errors.push(e),
            Err(_) => {
                self.report.zero_truth += 1;
                if est > 0 {
                    self.report.false_hits += 1;
                }
            }
        }
    }

    pub fn finish(mut self) -> ErrorReport {
        let errs = &self.report.relative_errors;
        self.report.are = are(errs);
        self.report.max_relative_error = errs.iter().copied().fold(0.0, f64::max);
        self.report.min_relative_error = errs.iter().copied().reduce(f64::min).unwrap_or(0.0);
        self.report
    }
}

/// Reachability outcome counts. Accuracy is `1 - fp / oracle_false`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ReachabilityReport {
    pub queries: usize,
    pub oracle_true: usize,
    pub oracle_false: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl ReachabilityReport {
    pub fn add(&mut self, sketch: bool, truth: bool) {
        self.queries += 1;
        match (sketch, truth) {
            (_, true) => {
                self.oracle_true += 1;
                if !sketch {
                    self.false_negatives += 1;
                }
            }
            (s, false) => {
                self.oracle_false += 1;
                if s {
                    self.false_positives += 1;
                }
            }
        }
    }

    pub fn accuracy(&self) -> f64 {
        if self.oracle_false == 0 {
            1.0
        } else {
            1.0 - self.false_positives as f64 / self.oracle_false as f64
        }
    }
}
