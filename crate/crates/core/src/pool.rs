//! The additional pool: exact storage for edges that found no room in the
//! matrix. Entries are keyed by the block-qualified hashes of both
//! endpoints and carry the same subwindow counters as matrix segments, so
//! the pool slides in lockstep with the matrix.

use std::collections::HashMap;

use crate::counters::WindowCounters;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolEntry {
    pub src_hash: u64,
    pub dst_hash: u64,
    pub src_band: usize,
    pub dst_band: usize,
    pub counters: WindowCounters,
}

/// Which entries [`AdditionalPool::aggregate`] sums over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolFilter {
    All,
    Source(u64),
    Destination(u64),
    SourceBand(usize),
    DestinationBand(usize),
    Pair(u64, u64),
    /// Source hash plus destination band.
    SourceToBand(u64, usize),
}

#[derive(Clone, Debug, Default)]
pub struct AdditionalPool {
    entries: HashMap<(u64, u64), PoolEntry>,
    outgoing: HashMap<u64, Vec<u64>>,
    incoming: HashMap<u64, Vec<u64>>,
}

impl AdditionalPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[allow(clippy::too_many_arguments)]
    pub fn insert(
        &mut self,
        src_hash: u64,
        dst_hash: u64,
        bands: (usize, usize),
        prime: u64,
        weight: u64,
        epoch: u64,
        k: usize,
        cap: Option<usize>,
    ) {
        let entry = self.entries.entry((src_hash, dst_hash)).or_insert_with(|| {
            self.outgoing.entry(src_hash).or_default().push(dst_hash);
            self.incoming.entry(dst_hash).or_default().push(src_hash);
            PoolEntry {
                src_hash,
                dst_hash,
                src_band: bands.0,
                dst_band: bands.1,
                counters: WindowCounters::default(),
            }
        });
        entry.counters.record(epoch, k, prime, weight, cap);
    }

    pub(crate) fn restore(&mut self, entry: PoolEntry) {
        self.outgoing.entry(entry.src_hash).or_default().push(entry.dst_hash);
        self.incoming.entry(entry.dst_hash).or_default().push(entry.src_hash);
        self.entries.insert((entry.src_hash, entry.dst_hash), entry);
    }

    pub fn entry(&self, src_hash: u64, dst_hash: u64) -> Option<&PoolEntry> {
        self.entries.get(&(src_hash, dst_hash))
    }

    pub fn entries(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.values()
    }

    /// Sum of `(w, w_l)` over entries passing `filter`.
    pub fn aggregate(&self, filter: PoolFilter, prime: Option<u64>, epoch: u64, k: usize) -> (u64, u64) {
        let weigh = |e: &PoolEntry| e.counters.weights(epoch, k, prime);
        let sum = |it: &mut dyn Iterator<Item = (u64, u64)>| {
            it.fold((0, 0), |acc, (w, wl)| (acc.0 + w, acc.1 + wl))
        };
        match filter {
            PoolFilter::Pair(s, d) => self.entry(s, d).map_or((0, 0), weigh),
            PoolFilter::Source(s) => sum(&mut self
                .outgoing
                .get(&s)
                .into_iter()
                .flatten()
                .filter_map(|d| self.entry(s, *d))
                .map(weigh)),
            PoolFilter::Destination(d) => sum(&mut self
                .incoming
                .get(&d)
                .into_iter()
                .flatten()
                .filter_map(|s| self.entry(*s, d))
                .map(weigh)),
            PoolFilter::SourceToBand(s, band) => sum(&mut self
                .outgoing
                .get(&s)
                .into_iter()
                .flatten()
                .filter_map(|d| self.entry(s, *d))
                .filter(|e| e.dst_band == band)
                .map(weigh)),
            PoolFilter::SourceBand(band) => {
                sum(&mut self.entries.values().filter(|e| e.src_band == band).map(weigh))
            }
            PoolFilter::DestinationBand(band) => {
                sum(&mut self.entries.values().filter(|e| e.dst_band == band).map(weigh))
            }
            PoolFilter::All => sum(&mut self.entries.values().map(weigh)),
        }
    }

    /// Destinations of `src_hash` with positive in-window weight (positive
    /// labeled weight when `prime` is given).
    pub fn successors(&self, src_hash: u64, prime: Option<u64>, epoch: u64, k: usize) -> Vec<u64> {
        let Some(dsts) = self.outgoing.get(&src_hash) else {
            return Vec::new();
        };
        dsts.iter()
            .copied()
            .filter(|&d| {
                self.entry(src_hash, d).is_some_and(|e| {
                    let (w, wl) = e.counters.weights(epoch, k, prime);
                    if prime.is_some() {
                        wl > 0
                    } else {
                        w > 0
                    }
                })
            })
            .collect()
    }

    /// Removes entries with no live weight and returns how many were removed.
    pub fn sweep(&mut self, epoch: u64, k: usize) -> usize {
        let dead: Vec<(u64, u64)> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.counters.is_live(epoch, k))
            .map(|(key, _)| *key)
            .collect();
        for &(s, d) in &dead {
            self.entries.remove(&(s, d));
            detach(&mut self.outgoing, s, d);
            detach(&mut self.incoming, d, s);
        }
        dead.len()
    }

    /// Forward and reverse adjacency agree with the entry table.
    pub fn is_consistent(&self) -> bool {
        let forward: usize = self.outgoing.values().map(Vec::len).sum();
        let reverse: usize = self.incoming.values().map(Vec::len).sum();
        forward == self.entries.len()
            && reverse == self.entries.len()
            && self.outgoing.iter().all(|(s, ds)| ds.iter().all(|d| self.entries.contains_key(&(*s, *d))))
            && self.incoming.iter().all(|(d, ss)| ss.iter().all(|s| self.entries.contains_key(&(*s, *d))))
    }
}

fn detach(index: &mut HashMap<u64, Vec<u64>>, from: u64, to: u64) {
    if let Some(list) = index.get_mut(&from) {
        list.retain(|&x| x != to);
        if list.is_empty() {
            index.remove(&from);
        }
    }
}
