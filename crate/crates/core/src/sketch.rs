//! The sketch facade: insertion pipeline and query families.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;

use crate::config::SketchConfig;
use crate::error::{Error, Result};
use crate::hashing::{precompute, placed_from_key, vertex_key, PlacedVertex};
use crate::matrix::{EndpointMatch, InsertOutcome, StorageMatrix};
use crate::pool::{AdditionalPool, PoolFilter};

/// One stream arrival `(A, B; l_A, l_B, l_e; w; t)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EdgeItem {
    pub src: String,
    pub dst: String,
    pub src_label: String,
    pub dst_label: String,
    pub edge_label: String,
    pub weight: u64,
    pub timestamp: u64,
}

impl EdgeItem {
    pub fn new(
        src: impl Into<String>,
        dst: impl Into<String>,
        src_label: impl Into<String>,
        dst_label: impl Into<String>,
        edge_label: impl Into<String>,
        weight: u64,
        timestamp: u64,
    ) -> Self {
        EdgeItem {
            src: src.into(),
            dst: dst.into(),
            src_label: src_label.into(),
            dst_label: dst_label.into(),
            edge_label: edge_label.into(),
            weight,
            timestamp,
        }
    }
}

/// Result of a weight query; `w_l` is present when an edge label was given.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    pub w: u64,
    pub w_l: Option<u64>,
}

impl QueryResult {
    fn from_pair((w, wl): (u64, u64), labeled: bool) -> Self {
        QueryResult {
            w,
            w_l: labeled.then_some(wl),
        }
    }

    /// `w_l` when labeled, `w` otherwise.
    pub fn value(&self) -> u64 {
        self.w_l.unwrap_or(self.w)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Placement {
    Matrix {
        row: usize,
        col: usize,
        segment: usize,
        rank: usize,
    },
    Pool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertReceipt {
    pub placement: Placement,
    pub expired: u64,
}

/// One edge of a subgraph pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternEdge {
    pub src: String,
    pub src_label: String,
    pub dst: String,
    pub dst_label: String,
}

impl PatternEdge {
    pub fn new(
        src: impl Into<String>,
        src_label: impl Into<String>,
        dst: impl Into<String>,
        dst_label: impl Into<String>,
    ) -> Self {
        PatternEdge {
            src: src.into(),
            src_label: src_label.into(),
            dst: dst.into(),
            dst_label: dst_label.into(),
        }
    }
}

/// Maps block-qualified vertex hashes back to `(id, label)`.
#[derive(Clone, Debug, Default)]
pub struct VertexRegistry {
    map: HashMap<u64, (String, String)>,
    collisions: u64,
}

impl VertexRegistry {
    /// First registration wins; a different vertex on the same hash is counted.
    pub fn register(&mut self, key: u64, id: &str, label: &str) {
        match self.map.get(&key) {
            None => {
                self.map.insert(key, (id.to_string(), label.to_string()));
            }
            Some((i, l)) if i == id && l == label => {}
            Some(_) => self.collisions += 1,
        }
    }

    pub fn resolve(&self, key: u64) -> Option<(&str, &str)> {
        self.map.get(&key).map(|(i, l)| (i.as_str(), l.as_str()))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &str, &str)> {
        self.map.iter().map(|(k, (i, l))| (*k, i.as_str(), l.as_str()))
    }

    pub(crate) fn restore(map: HashMap<u64, (String, String)>, collisions: u64) -> Self {
        VertexRegistry { map, collisions }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SketchStats {
    pub items: u64,
    pub matrix_items: u64,
    pub pool_items: u64,
    pub rejected: u64,
    pub subwindows_elapsed: u64,
}

pub struct LSketch {
    cfg: SketchConfig,
    matrix: StorageMatrix,
    pool: AdditionalPool,
    registry: Option<VertexRegistry>,
    stats: SketchStats,
    last_sweep: u64,
    pool_inserts_since_sweep: u64,
    unresolved: AtomicU64,
}

impl LSketch {
    pub fn new(cfg: SketchConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(LSketch {
            matrix: StorageMatrix::new(&cfg),
            pool: AdditionalPool::new(),
            registry: cfg.path_queries.then(VertexRegistry::default),
            stats: SketchStats::default(),
            last_sweep: 0,
            pool_inserts_since_sweep: 0,
            unresolved: AtomicU64::new(0),
            cfg,
        })
    }

    pub(crate) fn from_parts(
        cfg: SketchConfig,
        matrix: StorageMatrix,
        pool: AdditionalPool,
        registry: Option<VertexRegistry>,
        stats: SketchStats,
        sweep: (u64, u64),
    ) -> Self {
        LSketch {
            last_sweep: sweep.0,
            pool_inserts_since_sweep: sweep.1,
            unresolved: AtomicU64::new(0),
            cfg,
            matrix,
            pool,
            registry,
            stats,
        }
    }

    pub fn config(&self) -> &SketchConfig {
        &self.cfg
    }

    pub fn matrix(&self) -> &StorageMatrix {
        &self.matrix
    }

    pub fn pool(&self) -> &AdditionalPool {
        &self.pool
    }

    pub fn registry(&self) -> Option<&VertexRegistry> {
        self.registry.as_ref()
    }

    pub fn stats(&self) -> SketchStats {
        self.stats
    }

    /// Successor hashes that were missing from the registry during path queries.
    pub fn unresolved_hashes(&self) -> u64 {
        self.unresolved.load(Ordering::Relaxed)
    }

    pub fn epoch(&self) -> u64 {
        self.matrix.epoch()
    }

    /// `(last_sweep_epoch, pool_inserts_since_sweep)`.
    pub(crate) fn sweep_state(&self) -> (u64, u64) {
        (self.last_sweep, self.pool_inserts_since_sweep)
    }

    fn k(&self) -> usize {
        self.matrix.k()
    }

    fn prime(&self, edge_label: Option<&str>) -> Option<u64> {
        edge_label.map(|l| self.cfg.primes.label_prime(l, self.cfg.hash_seed))
    }

    fn key(&self, v: &PlacedVertex) -> u64 {
        v.key(self.cfg.fingerprint_range)
    }

    /// Advances the window without inserting anything.
    pub fn advance_to(&mut self, now: u64) -> Result<u64> {
        let expired = self.matrix.slide_to(now)?;
        self.stats.subwindows_elapsed += expired;
        let epoch = self.matrix.epoch();
        // Amortised: at most one full pool pass per window and per pool's worth of inserts.
        if expired > 0
            && epoch >= self.last_sweep + self.k() as u64
            && self.pool_inserts_since_sweep * 2 >= self.pool.len() as u64
        {
            self.pool.sweep(epoch, self.k());
            self.last_sweep = epoch;
            self.pool_inserts_since_sweep = 0;
        }
        Ok(expired)
    }

    pub fn insert(&mut self, item: &EdgeItem) -> Result<InsertReceipt> {
        if item.weight == 0 {
            self.stats.rejected += 1;
            return Err(Error::InvalidItem("weight must be at least 1".into()));
        }
        let expired = match self.advance_to(item.timestamp) {
            Ok(e) => e,
            Err(err) => {
                self.stats.rejected += 1;
                return Err(err);
            }
        };
        let src = precompute(&item.src, &item.src_label, &self.cfg);
        let dst = precompute(&item.dst, &item.dst_label, &self.cfg);
        let prime = self.cfg.primes.label_prime(&item.edge_label, self.cfg.hash_seed);
        let placement = match self.matrix.try_insert(&src, &dst, prime, item.weight) {
            InsertOutcome::MatrixInserted {
                row,
                col,
                segment,
                rank,
            } => {
                self.stats.matrix_items += 1;
                Placement::Matrix {
                    row,
                    col,
                    segment,
                    rank,
                }
            }
            InsertOutcome::PoolRequired => {
                let (sk, dk) = (self.key(&src), self.key(&dst));
                self.pool.insert(
                    sk,
                    dk,
                    (src.band.ordinal, dst.band.ordinal),
                    prime,
                    item.weight,
                    self.matrix.epoch(),
                    self.k(),
                    self.cfg.prime_product_cap,
                );
                self.pool_inserts_since_sweep += 1;
                self.stats.pool_items += 1;
                Placement::Pool
            }
        };
        if let Some(reg) = self.registry.as_mut() {
            let f = self.cfg.fingerprint_range;
            reg.register(src.key(f), &item.src, &item.src_label);
            reg.register(dst.key(f), &item.dst, &item.dst_label);
        }
        self.stats.items += 1;
        Ok(InsertReceipt { placement, expired })
    }

    pub fn vertex_out_weight(&self, v: &str, label: &str, edge_label: Option<&str>) -> QueryResult {
        let pv = precompute(v, label, &self.cfg);
        let prime = self.prime(edge_label);
        let mut total = self.pool.aggregate(PoolFilter::Source(self.key(&pv)), prime, self.epoch(), self.k());
        for i in 0..self.cfg.candidates {
            let row = pv.position(i);
            let m = EndpointMatch {
                index: i as u32,
                fingerprint: pv.vertex.fingerprint,
            };
            let (w, wl) = self.matrix.scan_row_band(row..row + 1, 0..self.matrix.width(), Some(m), prime);
            total.0 += w;
            total.1 += wl;
        }
        QueryResult::from_pair(total, prime.is_some())
    }

    pub fn vertex_in_weight(&self, v: &str, label: &str, edge_label: Option<&str>) -> QueryResult {
        let pv = precompute(v, label, &self.cfg);
        let prime = self.prime(edge_label);
        let mut total = self.pool.aggregate(PoolFilter::Destination(self.key(&pv)), prime, self.epoch(), self.k());
        for j in 0..self.cfg.candidates {
            let col = pv.position(j);
            let m = EndpointMatch {
                index: j as u32,
                fingerprint: pv.vertex.fingerprint,
            };
            let (w, wl) = self.matrix.scan_col_band(0..self.matrix.width(), col..col + 1, Some(m), prime);
            total.0 += w;
            total.1 += wl;
        }
        QueryResult::from_pair(total, prime.is_some())
    }

    /// Outgoing weight of every vertex carrying `label`.
    pub fn label_out_weight(&self, label: &str, edge_label: Option<&str>) -> QueryResult {
        let band = self.cfg.layout.block_index(label, self.cfg.hash_seed);
        let prime = self.prime(edge_label);
        let (w, wl) = self.matrix.scan_row_band(band.range(), 0..self.matrix.width(), None, prime);
        let (pw, pwl) = self.pool.aggregate(PoolFilter::SourceBand(band.ordinal), prime, self.epoch(), self.k());
        QueryResult::from_pair((w + pw, wl + pwl), prime.is_some())
    }

    /// Incoming weight of every vertex carrying `label`.
    pub fn label_in_weight(&self, label: &str, edge_label: Option<&str>) -> QueryResult {
        let band = self.cfg.layout.block_index(label, self.cfg.hash_seed);
        let prime = self.prime(edge_label);
        let (w, wl) = self.matrix.scan_col_band(0..self.matrix.width(), band.range(), None, prime);
        let (pw, pwl) =
            self.pool.aggregate(PoolFilter::DestinationBand(band.ordinal), prime, self.epoch(), self.k());
        QueryResult::from_pair((w + pw, wl + pwl), prime.is_some())
    }

    pub fn edge_weight(
        &self,
        a: &str,
        a_label: &str,
        b: &str,
        b_label: &str,
        edge_label: Option<&str>,
    ) -> QueryResult {
        let src = precompute(a, a_label, &self.cfg);
        let dst = precompute(b, b_label, &self.cfg);
        let prime = self.prime(edge_label);
        let (w, wl) = self.matrix.edge_weights(&src, &dst, prime);
        let (pw, pwl) = self.pool.aggregate(
            PoolFilter::Pair(self.key(&src), self.key(&dst)),
            prime,
            self.epoch(),
            self.k(),
        );
        QueryResult::from_pair((w + pw, wl + pwl), prime.is_some())
    }

    /// Weight from `a` to all vertices carrying `b_label`.
    pub fn edge_weight_to_label_group(
        &self,
        a: &str,
        a_label: &str,
        b_label: &str,
        edge_label: Option<&str>,
    ) -> QueryResult {
        let src = precompute(a, a_label, &self.cfg);
        let band = self.cfg.layout.block_index(b_label, self.cfg.hash_seed);
        let prime = self.prime(edge_label);
        let mut total = self.pool.aggregate(
            PoolFilter::SourceToBand(self.key(&src), band.ordinal),
            prime,
            self.epoch(),
            self.k(),
        );
        for i in 0..self.cfg.candidates {
            let row = src.position(i);
            let m = EndpointMatch {
                index: i as u32,
                fingerprint: src.vertex.fingerprint,
            };
            let (w, wl) = self.matrix.scan_row_band(row..row + 1, band.range(), Some(m), prime);
            total.0 += w;
            total.1 += wl;
        }
        QueryResult::from_pair(total, prime.is_some())
    }

    /// Breadth-first reachability over the summarised graph. With an edge
    /// label, only edges with positive weight under that label are followed.
    pub fn path_reachable(
        &self,
        a: &str,
        a_label: &str,
        b: &str,
        b_label: &str,
        edge_label: Option<&str>,
    ) -> Result<bool> {
        let registry = self.registry.as_ref().ok_or(Error::PathQueriesDisabled)?;
        let f = self.cfg.fingerprint_range;
        let source = precompute(a, a_label, &self.cfg);
        let target = precompute(b, b_label, &self.cfg);
        let (source_key, target_key) = (source.key(f), target.key(f));
        if source_key == target_key {
            return Ok(true);
        }
        let prime = self.prime(edge_label);
        let (epoch, k) = (self.epoch(), self.k());
        let mut queue = VecDeque::from([source]);
        let mut checked = HashSet::from([source_key]);
        while let Some(src) = queue.pop_front() {
            if self.matrix.has_edge(&src, &target, prime) {
                return Ok(true);
            }
            let src_key = src.key(f);
            let mut next: Vec<u64> = self.pool.successors(src_key, prime, epoch, k);
            next.extend(
                self.matrix
                    .successors(&src, prime)
                    .into_iter()
                    .map(|(col, fp, idx)| self.column_key(col, fp, idx)),
            );
            for key in next {
                if key == target_key {
                    return Ok(true);
                }
                if !checked.insert(key) {
                    continue;
                }
                if registry.resolve(key).is_none() {
                    self.unresolved.fetch_add(1, Ordering::Relaxed);
                    continue;
                }
                queue.push_back(placed_from_key(key, &self.cfg));
            }
        }
        Ok(false)
    }

    /// Recovers the destination hash stored at column `col` with fingerprint
    /// `fingerprint` under candidate index `index`.
    fn column_key(&self, col: usize, fingerprint: u32, index: u32) -> u64 {
        let band = self.cfg.layout.band_of_offset(col);
        let width = band.width as u64;
        let offset = (col - band.start) as u64;
        let l = self.cfg.lcg.nth(fingerprint as u64, index as usize) % width;
        let address = (offset + width - l) % width;
        vertex_key(band.start, address, fingerprint, self.cfg.fingerprint_range)
    }

    /// Minimum edge weight over the pattern (labeled weight when `edge_label`
    /// is given); zero as soon as any pattern edge is absent.
    pub fn subgraph_count(&self, pattern: &[PatternEdge], edge_label: Option<&str>) -> Result<u64> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let mut res = u64::MAX;
        for e in pattern {
            let w = self
                .edge_weight(&e.src, &e.src_label, &e.dst, &e.dst_label, edge_label)
                .value();
            if w == 0 {
                return Ok(0);
            }
            res = res.min(w);
        }
        Ok(res)
    }
}
