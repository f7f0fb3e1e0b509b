//! The `d x d` storage matrix. Each cell holds two independent segments
//! (lower, then higher); each segment remembers the fingerprint pair and
//! candidate-index pair of the edge it stores plus that edge's subwindow
//! counters.
//!
//! Window sliding is lazy: advancing the clock only bumps a global epoch.
//! Segments drop their expired slots when next written, and every read
//! filters slots by epoch, so no cell is ever touched on a subwindow
//! boundary. A segment whose visible counters are all zero is free to be
//! reclaimed by a new edge.

use std::ops::Range;

use crate::config::SketchConfig;
use crate::counters::WindowCounters;
use crate::error::{Error, Result};
use crate::hashing::{sample_sequence, Lcg, PlacedVertex};

/// Start of the newest subwindow (`lastT`) and the epoch counter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlidingWindow {
    subwindow: u64,
    k: usize,
    latest_start: Option<u64>,
    epoch: u64,
}

impl SlidingWindow {
    pub fn new(subwindow: u64, k: usize, start: Option<u64>) -> Self {
        SlidingWindow {
            subwindow,
            k,
            latest_start: start,
            epoch: 0,
        }
    }

    pub fn restore(subwindow: u64, k: usize, latest_start: Option<u64>, epoch: u64) -> Self {
        SlidingWindow {
            subwindow,
            k,
            latest_start,
            epoch,
        }
    }

    /// Advances to `now`, returning the number of subwindows that elapsed.
    /// The first call anchors the window at `now` unless a start was given.
    pub fn slide_to(&mut self, now: u64) -> Result<u64> {
        let Some(start) = self.latest_start else {
            self.latest_start = Some(now);
            return Ok(0);
        };
        if now < start {
            return Err(Error::RegressingClock { now, latest: start });
        }
        let expired = (now - start) / self.subwindow;
        self.latest_start = Some(start + expired * self.subwindow);
        self.epoch += expired;
        Ok(expired)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn latest_start(&self) -> Option<u64> {
        self.latest_start
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn subwindow(&self) -> u64 {
        self.subwindow
    }

    /// Earliest timestamp still inside the window.
    pub fn live_from(&self) -> Option<u64> {
        self.latest_start
            .map(|t| t.saturating_sub((self.k as u64 - 1) * self.subwindow))
    }
}

/// One twin segment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub f_pair: (u32, u32),
    pub idx_pair: (u32, u32),
    pub counters: WindowCounters,
}

impl Segment {
    pub fn matches(&self, f_pair: (u32, u32), idx_pair: (u32, u32)) -> bool {
        self.f_pair == f_pair && self.idx_pair == idx_pair
    }
}

/// Total and labeled weight of a possibly empty segment.
pub fn get_weights_in_segment(
    segment: Option<&Segment>,
    epoch: u64,
    k: usize,
    prime: Option<u64>,
) -> (u64, u64) {
    segment.map_or((0, 0), |s| s.counters.weights(epoch, k, prime))
}

/// First claimable segment seen while probing: `(row, col, slot, rank, idx_pair)`.
type FreeSlot = (usize, usize, usize, usize, (u32, u32));

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored at `(row, col)` in twin `segment` (0 lower, 1 higher), found at
    /// position `rank` of the sampled-cell sequence.
    MatrixInserted {
        row: usize,
        col: usize,
        segment: usize,
        rank: usize,
    },
    PoolRequired,
}

/// Matching filter for row or column scans: candidate index and fingerprint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EndpointMatch {
    pub index: u32,
    pub fingerprint: u32,
}

type Cell = [Option<Box<Segment>>; 2];

#[derive(Clone, Debug)]
pub struct StorageMatrix {
    width: usize,
    cells: Vec<Cell>,
    window: SlidingWindow,
    samples: usize,
    candidates: usize,
    lcg: Lcg,
    cap: Option<usize>,
}

impl StorageMatrix {
    pub fn new(cfg: &SketchConfig) -> Self {
        let width = cfg.matrix_width();
        StorageMatrix {
            width,
            cells: (0..width * width).map(|_| [None, None]).collect(),
            window: SlidingWindow::new(cfg.subwindow, cfg.subwindows(), cfg.window_start),
            samples: cfg.samples,
            candidates: cfg.candidates,
            lcg: cfg.lcg,
            cap: cfg.prime_product_cap,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub(crate) fn set_window(&mut self, window: SlidingWindow) {
        self.window = window;
    }

    pub fn epoch(&self) -> u64 {
        self.window.epoch
    }

    pub fn k(&self) -> usize {
        self.window.k
    }

    pub fn slide_to(&mut self, now: u64) -> Result<u64> {
        self.window.slide_to(now)
    }

    #[inline]
    fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.width + col]
    }

    pub fn segment(&self, row: usize, col: usize, slot: usize) -> Option<&Segment> {
        self.cell(row, col)[slot].as_deref()
    }

    pub(crate) fn put_segment(&mut self, row: usize, col: usize, slot: usize, seg: Segment) {
        let w = self.width;
        self.cells[row * w + col][slot] = Some(Box::new(seg));
    }

    fn is_live(&self, seg: &Segment) -> bool {
        seg.counters.is_live(self.window.epoch, self.window.k)
    }

    /// Visits the sampled cells of `src -> dst`. An existing live segment
    /// with the same fingerprint and index pairs is updated; otherwise the
    /// first free (empty or fully expired) segment in sampled order, lower
    /// twin first, is claimed.
    pub fn try_insert(
        &mut self,
        src: &PlacedVertex,
        dst: &PlacedVertex,
        prime: u64,
        weight: u64,
    ) -> InsertOutcome {
        let f_pair = (src.vertex.fingerprint, dst.vertex.fingerprint);
        let sampled = sample_sequence(f_pair.0, f_pair.1, self.samples, self.candidates, &self.lcg);
        let mut free: Option<FreeSlot> = None;
        let mut hit = None;
        'probe: for (rank, &(ai, bi)) in sampled.iter().enumerate() {
            let row = src.position(ai as usize);
            let col = dst.position(bi as usize);
            let cell = self.cell(row, col);
            for (slot, seg) in cell.iter().enumerate() {
                match seg.as_deref() {
                    Some(seg) if self.is_live(seg) => {
                        if seg.matches(f_pair, (ai, bi)) {
                            hit = Some((row, col, slot, rank));
                            break 'probe;
                        }
                    }
                    _ => {
                        if free.is_none() {
                            free = Some((row, col, slot, rank, (ai, bi)));
                        }
                    }
                }
            }
        }
        let (epoch, k, cap) = (self.window.epoch, self.window.k, self.cap);
        let w = self.width;
        if let Some((row, col, slot, rank)) = hit {
            let seg = self.cells[row * w + col][slot].as_mut().expect("live segment");
            seg.counters.record(epoch, k, prime, weight, cap);
            return InsertOutcome::MatrixInserted {
                row,
                col,
                segment: slot,
                rank,
            };
        }
        if let Some((row, col, slot, rank, idx_pair)) = free {
            let entry = &mut self.cells[row * w + col][slot];
            let seg = entry.get_or_insert_with(|| {
                Box::new(Segment {
                    f_pair,
                    idx_pair,
                    counters: WindowCounters::default(),
                })
            });
            seg.f_pair = f_pair;
            seg.idx_pair = idx_pair;
            seg.counters.clear();
            seg.counters.record(epoch, k, prime, weight, cap);
            return InsertOutcome::MatrixInserted {
                row,
                col,
                segment: slot,
                rank,
            };
        }
        InsertOutcome::PoolRequired
    }

    /// Sums segments in `rows x cols`. With `src` given, only segments whose
    /// stored source index and fingerprint match are counted.
    pub fn scan_row_band(
        &self,
        rows: Range<usize>,
        cols: Range<usize>,
        src: Option<EndpointMatch>,
        prime: Option<u64>,
    ) -> (u64, u64) {
        self.scan(rows, cols, |seg| {
            src.is_none_or(|m| seg.idx_pair.0 == m.index && seg.f_pair.0 == m.fingerprint)
        }, prime)
    }

    /// Column mirror of [`StorageMatrix::scan_row_band`], matching destinations.
    pub fn scan_col_band(
        &self,
        rows: Range<usize>,
        cols: Range<usize>,
        dst: Option<EndpointMatch>,
        prime: Option<u64>,
    ) -> (u64, u64) {
        self.scan(rows, cols, |seg| {
            dst.is_none_or(|m| seg.idx_pair.1 == m.index && seg.f_pair.1 == m.fingerprint)
        }, prime)
    }

    fn scan(
        &self,
        rows: Range<usize>,
        cols: Range<usize>,
        keep: impl Fn(&Segment) -> bool,
        prime: Option<u64>,
    ) -> (u64, u64) {
        let (epoch, k) = (self.window.epoch, self.window.k);
        let mut total = (0, 0);
        for row in rows {
            for col in cols.clone() {
                for seg in self.cell(row, col).iter().flatten() {
                    if keep(seg) {
                        let (w, wl) = seg.counters.weights(epoch, k, prime);
                        total.0 += w;
                        total.1 += wl;
                    }
                }
            }
        }
        total
    }

    /// Weights of the edge `src -> dst` found among its sampled cells.
    pub fn edge_weights(&self, src: &PlacedVertex, dst: &PlacedVertex, prime: Option<u64>) -> (u64, u64) {
        let f_pair = (src.vertex.fingerprint, dst.vertex.fingerprint);
        let sampled = sample_sequence(f_pair.0, f_pair.1, self.samples, self.candidates, &self.lcg);
        let (epoch, k) = (self.window.epoch, self.window.k);
        let mut seen: Vec<(usize, usize)> = Vec::with_capacity(sampled.len());
        let mut total = (0, 0);
        for &(ai, bi) in &sampled {
            let row = src.position(ai as usize);
            let col = dst.position(bi as usize);
            if seen.contains(&(row, col)) {
                continue;
            }
            seen.push((row, col));
            for seg in self.cell(row, col).iter().flatten() {
                if seg.matches(f_pair, (ai, bi)) {
                    let (w, wl) = seg.counters.weights(epoch, k, prime);
                    total.0 += w;
                    total.1 += wl;
                }
            }
        }
        total
    }

    /// Whether any of the `r x r` candidate cells holds `src -> dst` with
    /// positive weight (positive labeled weight when `prime` is given).
    pub fn has_edge(&self, src: &PlacedVertex, dst: &PlacedVertex, prime: Option<u64>) -> bool {
        let f_pair = (src.vertex.fingerprint, dst.vertex.fingerprint);
        let (epoch, k) = (self.window.epoch, self.window.k);
        for i in 0..self.candidates {
            let row = src.position(i);
            for j in 0..self.candidates {
                let col = dst.position(j);
                for seg in self.cell(row, col).iter().flatten() {
                    if seg.matches(f_pair, (i as u32, j as u32))
                        && positive(seg.counters.weights(epoch, k, prime), prime)
                    {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Segments in the candidate rows of `src` that store `src` as source and
    /// carry positive weight: `(column, destination fingerprint, column index)`.
    pub fn successors(&self, src: &PlacedVertex, prime: Option<u64>) -> Vec<(usize, u32, u32)> {
        let (epoch, k) = (self.window.epoch, self.window.k);
        let mut out = Vec::new();
        for i in 0..self.candidates {
            let row = src.position(i);
            for col in 0..self.width {
                for seg in self.cell(row, col).iter().flatten() {
                    if seg.idx_pair.0 == i as u32
                        && seg.f_pair.0 == src.vertex.fingerprint
                        && positive(seg.counters.weights(epoch, k, prime), prime)
                    {
                        out.push((col, seg.f_pair.1, seg.idx_pair.1));
                    }
                }
            }
        }
        out
    }

    /// Every allocated segment as `(row, col, twin, segment)`.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize, usize, &Segment)> {
        let w = self.width;
        self.cells.iter().enumerate().flat_map(move |(i, cell)| {
            cell.iter()
                .enumerate()
                .filter_map(move |(slot, s)| s.as_deref().map(|s| (i / w, i % w, slot, s)))
        })
    }

    /// Number of segments holding live weight.
    pub fn live_segments(&self) -> usize {
        self.segments().filter(|(_, _, _, s)| self.is_live(s)).count()
    }
}

#[inline]
fn positive((w, wl): (u64, u64), prime: Option<u64>) -> bool {
    if prime.is_some() {
        wl > 0
    } else {
        w > 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::{precompute, BlockLayout};

    fn cfg(d: usize, b: usize, f: u64, r: usize, s: usize) -> SketchConfig {
        let mut cfg = SketchConfig::example(d, b, f, r, s);
        cfg.window = 8;
        cfg.subwindow = 2;
        cfg.window_start = Some(0);
        cfg
    }

    #[test]
    fn slide_boundaries() {
        let mut w = SlidingWindow::new(2, 4, Some(0));
        assert_eq!(w.slide_to(1).unwrap(), 0);
        assert_eq!(w.slide_to(2).unwrap(), 1);
        assert_eq!(w.latest_start(), Some(2));

        let mut w = SlidingWindow::new(2, 4, Some(0));
        assert_eq!(w.slide_to(5).unwrap(), 2);
        assert_eq!(w.latest_start(), Some(4));
        assert_eq!(w.epoch(), 2);
        assert!(matches!(
            w.slide_to(3),
            Err(Error::RegressingClock { now: 3, latest: 4 })
        ));
    }

    #[test]
    fn multi_gap_slide_matches_stepwise_advance() {
        // Eager oracle: advance one subwindow at a time.
        for now in 0..40u64 {
            let mut lazy = SlidingWindow::new(3, 4, Some(1));
            let (mut t, mut steps) = (1u64, 0u64);
            while t + 3 <= now {
                t += 3;
                steps += 1;
            }
            if now < 1 {
                assert!(lazy.slide_to(now).is_err());
                continue;
            }
            assert_eq!(lazy.slide_to(now).unwrap(), steps);
            assert_eq!(lazy.latest_start(), Some(t));
        }
    }

    #[test]
    fn first_slide_anchors_window() {
        let mut w = SlidingWindow::new(10, 3, None);
        assert_eq!(w.slide_to(105).unwrap(), 0);
        assert_eq!(w.latest_start(), Some(105));
        assert_eq!(w.live_from(), Some(85));
    }

    #[test]
    fn first_insert_goes_to_first_sampled_cell_lower_twin() {
        let c = cfg(16, 16, 16, 4, 4);
        let mut m = StorageMatrix::new(&c);
        let a = precompute("a", "x", &c);
        let b = precompute("b", "x", &c);
        let first = sample_sequence(a.vertex.fingerprint, b.vertex.fingerprint, 4, 4, &c.lcg)[0];
        match m.try_insert(&a, &b, 2, 3) {
            InsertOutcome::MatrixInserted { row, col, segment, rank } => {
                assert_eq!((segment, rank), (0, 0));
                assert_eq!(row, a.position(first.0 as usize));
                assert_eq!(col, b.position(first.1 as usize));
                let seg = m.segment(row, col, 0).unwrap();
                assert_eq!(seg.f_pair, (a.vertex.fingerprint, b.vertex.fingerprint));
                assert_eq!(seg.idx_pair, first);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(m.try_insert(&a, &b, 3, 2), m.try_insert(&a, &b, 2, 0));
        assert_eq!(m.edge_weights(&a, &b, Some(2)), (5, 3));
        assert_eq!(m.edge_weights(&a, &b, Some(3)), (5, 2));
        assert!(m.has_edge(&a, &b, None));
        assert!(!m.has_edge(&b, &a, None));
    }

    #[test]
    fn full_cells_require_pool() {
        // One cell, one candidate, one sample: two twins then overflow.
        let mut c = cfg(1, 1, 4, 1, 1);
        c.layout = BlockLayout::uniform(1, 1).unwrap();
        let mut m = StorageMatrix::new(&c);
        // Search for three vertices with pairwise-distinct fingerprints.
        let mut picked: Vec<PlacedVertex> = Vec::new();
        for i in 0.. {
            let v = precompute(&format!("v{i}"), "x", &c);
            if picked.iter().all(|p| p.vertex.fingerprint != v.vertex.fingerprint) {
                picked.push(v);
            }
            if picked.len() == 3 {
                break;
            }
        }
        let hub = &picked[0];
        assert!(matches!(m.try_insert(hub, &picked[1], 2, 1), InsertOutcome::MatrixInserted { segment: 0, .. }));
        assert!(matches!(m.try_insert(hub, &picked[2], 2, 1), InsertOutcome::MatrixInserted { segment: 1, .. }));
        assert_eq!(m.try_insert(&picked[1], &picked[2], 2, 1), InsertOutcome::PoolRequired);
        // Existing edges still update.
        assert!(matches!(m.try_insert(hub, &picked[1], 2, 1), InsertOutcome::MatrixInserted { segment: 0, .. }));
        assert_eq!(m.live_segments(), 2);
    }

    #[test]
    fn expired_segments_are_reclaimed() {
        let mut c = cfg(1, 1, 4, 1, 1);
        c.window = 2;
        c.subwindow = 1;
        let mut m = StorageMatrix::new(&c);
        let vs: Vec<_> = (0..40).map(|i| precompute(&format!("v{i}"), "x", &c)).collect();
        let a = &vs[0];
        let mut fps = vec![a.vertex.fingerprint];
        let mut others = Vec::new();
        for v in &vs {
            if !fps.contains(&v.vertex.fingerprint) {
                fps.push(v.vertex.fingerprint);
                others.push(v);
            }
        }
        m.try_insert(a, others[0], 2, 1);
        m.try_insert(a, others[1], 2, 1);
        assert_eq!(m.try_insert(a, others[2], 2, 1), InsertOutcome::PoolRequired);
        m.slide_to(2).unwrap();
        assert_eq!(m.live_segments(), 0);
        assert!(matches!(m.try_insert(a, others[2], 2, 1), InsertOutcome::MatrixInserted { segment: 0, .. }));
        assert_eq!(m.edge_weights(a, others[2], None), (1, 0));
        assert_eq!(m.edge_weights(a, others[0], None), (0, 0));
    }

    #[test]
    fn empty_segment_weighs_nothing() {
        assert_eq!(get_weights_in_segment(None, 0, 4, Some(2)), (0, 0));
    }

    #[test]
    fn row_scans() {
        let c = cfg(16, 16, 64, 4, 4);
        let mut m = StorageMatrix::new(&c);
        assert_eq!(m.scan_row_band(0..16, 0..16, None, None), (0, 0));
        let a = precompute("a", "x", &c);
        let b = precompute("b", "x", &c);
        let InsertOutcome::MatrixInserted { row, col, .. } = m.try_insert(&a, &b, 2, 4) else {
            panic!("insert failed");
        };
        let seg = m.segment(row, col, 0).unwrap().clone();
        let src = EndpointMatch { index: seg.idx_pair.0, fingerprint: seg.f_pair.0 };
        let dst = EndpointMatch { index: seg.idx_pair.1, fingerprint: seg.f_pair.1 };
        assert_eq!(m.scan_row_band(row..row + 1, 0..16, Some(src), Some(2)), (4, 4));
        assert_eq!(m.scan_col_band(0..16, col..col + 1, Some(dst), Some(3)), (4, 0));
        assert_eq!(m.scan_row_band(0..16, 0..16, None, None), (4, 0));
        let succ = m.successors(&a, None);
        assert_eq!(succ, vec![(col, b.vertex.fingerprint, seg.idx_pair.1)]);
    }
}
