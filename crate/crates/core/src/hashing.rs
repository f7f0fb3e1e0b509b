//! Hashing primitives: vertex hashes split into address and fingerprint,
//! linear-congruential candidate and sampling sequences, storage-block
//! resolution for vertex labels, and the edge-label prime table.
//!
//! Everything here is a pure function of its inputs.

use std::collections::BTreeMap;

use serde::Serialize;
use xxhash_rust::xxh64::xxh64;

use crate::config::SketchConfig;
use crate::error::{Error, Result};

/// Seeded 64-bit hash (XXH64) shared by every module.
pub fn hash64(key: &[u8], seed: u64) -> u64 {
    xxh64(key, seed)
}

/// Splits a hash into `(address, fingerprint)` with `address = h / F` and
/// `fingerprint = h % F`.
pub fn split_hash(h: u64, fingerprint_range: u64) -> (u64, u32) {
    debug_assert!(fingerprint_range >= 2);
    (h / fingerprint_range, (h % fingerprint_range) as u32)
}

/// Linear congruential generator `x -> (T*x + I) mod M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Lcg {
    pub multiplier: u64,
    pub increment: u64,
    pub modulus: u64,
}

impl Lcg {
    pub const DEFAULT_MULTIPLIER: u64 = 5;
    pub const DEFAULT_INCREMENT: u64 = 3;

    pub fn new(multiplier: u64, increment: u64, modulus: u64) -> Self {
        Lcg {
            multiplier,
            increment,
            modulus,
        }
    }

    /// `T = 5`, `I = 3` and the smallest prime modulus above both `F` and
    /// `r*r` for which every fingerprint seed yields `r` distinct values.
    pub fn for_fingerprints(fingerprint_range: u64, candidates: usize) -> Self {
        let floor = fingerprint_range.max((candidates * candidates) as u64) + 1;
        let mut modulus = floor;
        loop {
            if is_prime(modulus) {
                let lcg = Lcg::new(Self::DEFAULT_MULTIPLIER, Self::DEFAULT_INCREMENT, modulus);
                if lcg.first_duplicate(fingerprint_range, candidates).is_none() {
                    return lcg;
                }
            }
            modulus += 1;
        }
    }

    #[inline]
    pub fn next(&self, x: u64) -> u64 {
        ((self.multiplier as u128 * x as u128 + self.increment as u128) % self.modulus as u128) as u64
    }

    /// `l_1 .. l_len` seeded by `seed`.
    pub fn sequence(&self, seed: u64, len: usize) -> Vec<u64> {
        let mut out = Vec::with_capacity(len);
        let mut x = seed;
        for _ in 0..len {
            x = self.next(x);
            out.push(x);
        }
        out
    }

    /// The `i`-th (0-based) value of the sequence seeded by `seed`.
    pub fn nth(&self, seed: u64, i: usize) -> u64 {
        let mut x = seed;
        for _ in 0..=i {
            x = self.next(x);
        }
        x
    }

    /// Exhaustive check over every fingerprint seed in `[0, F)`. Returns the
    /// first seed whose sequence of length `len` repeats a value.
    pub fn first_duplicate(&self, fingerprint_range: u64, len: usize) -> Option<u64> {
        let mut seen = Vec::with_capacity(len);
        for f in 0..fingerprint_range {
            seen.clear();
            let mut x = f;
            for _ in 0..len {
                x = self.next(x);
                if seen.contains(&x) {
                    return Some(f);
                }
                seen.push(x);
            }
        }
        None
    }
}

/// `r` candidate addresses in `[0, width)`: `(s0 + l_i) mod width`.
pub fn candidate_list(
    fingerprint: u32,
    address: u64,
    len: usize,
    lcg: &Lcg,
    width: usize,
) -> Vec<u32> {
    let width = width as u64;
    let base = address % width;
    lcg.sequence(fingerprint as u64, len)
        .into_iter()
        .map(|l| ((base + l % width) % width) as u32)
        .collect()
}

/// `count` sampled `(row index, column index)` pairs into the `r x r`
/// candidate grid, seeded by `f_src + f_dst`.
pub fn sample_sequence(
    f_src: u32,
    f_dst: u32,
    count: usize,
    len: usize,
    lcg: &Lcg,
) -> Vec<(u32, u32)> {
    let r = len as u64;
    lcg.sequence(f_src as u64 + f_dst as u64, count)
        .into_iter()
        .map(|sp| (((sp / r) % r) as u32, (sp % r) as u32))
        .collect()
}

/// One contiguous band of matrix rows (and, symmetrically, columns).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct BlockBand {
    pub ordinal: usize,
    pub start: usize,
    pub width: usize,
}

impl BlockBand {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

/// Assignment of vertex labels to bands of the storage matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BlockLayout {
    /// `blocks` equal bands of `width` rows, `blocks * width = d`.
    Uniform { blocks: usize, width: usize },
    /// Bands of explicit widths laid out in order. A label listed in `pins`
    /// goes to that band; any other label goes to `hash mod bands.len()`.
    Skewed {
        bands: Vec<BlockBand>,
        pins: BTreeMap<String, usize>,
    },
}

impl BlockLayout {
    pub fn uniform(matrix_width: usize, block_width: usize) -> Result<Self> {
        if block_width == 0 || matrix_width == 0 || !matrix_width.is_multiple_of(block_width) {
            return Err(Error::InvalidConfig(format!(
                "block width {block_width} must be positive and divide matrix width {matrix_width}"
            )));
        }
        Ok(BlockLayout::Uniform {
            blocks: matrix_width / block_width,
            width: block_width,
        })
    }

    pub fn skewed(widths: &[usize]) -> Result<Self> {
        if widths.is_empty() || widths.contains(&0) {
            return Err(Error::InvalidConfig(
                "skewed layout needs at least one band and every width must be positive".into(),
            ));
        }
        let mut start = 0;
        let bands = widths
            .iter()
            .enumerate()
            .map(|(ordinal, &width)| {
                let band = BlockBand {
                    ordinal,
                    start,
                    width,
                };
                start += width;
                band
            })
            .collect();
        Ok(BlockLayout::Skewed {
            bands,
            pins: BTreeMap::new(),
        })
    }

    /// Pins `label` to band `ordinal` (skewed layouts only).
    pub fn pin(mut self, label: impl Into<String>, ordinal: usize) -> Result<Self> {
        match &mut self {
            BlockLayout::Skewed { bands, pins } => {
                if ordinal >= bands.len() {
                    return Err(Error::InvalidConfig(format!(
                        "pinned band {ordinal} out of range (have {})",
                        bands.len()
                    )));
                }
                pins.insert(label.into(), ordinal);
                Ok(self)
            }
            BlockLayout::Uniform { .. } => Err(Error::InvalidConfig(
                "label pins are only supported by the skewed layout".into(),
            )),
        }
    }

    pub fn matrix_width(&self) -> usize {
        match self {
            BlockLayout::Uniform { blocks, width } => blocks * width,
            BlockLayout::Skewed { bands, .. } => bands.iter().map(|b| b.width).sum(),
        }
    }

    pub fn band_count(&self) -> usize {
        match self {
            BlockLayout::Uniform { blocks, .. } => *blocks,
            BlockLayout::Skewed { bands, .. } => bands.len(),
        }
    }

    pub fn max_width(&self) -> usize {
        match self {
            BlockLayout::Uniform { width, .. } => *width,
            BlockLayout::Skewed { bands, .. } => bands.iter().map(|b| b.width).max().unwrap_or(0),
        }
    }

    pub fn min_width(&self) -> usize {
        match self {
            BlockLayout::Uniform { width, .. } => *width,
            BlockLayout::Skewed { bands, .. } => bands.iter().map(|b| b.width).min().unwrap_or(0),
        }
    }

    pub fn band(&self, ordinal: usize) -> BlockBand {
        match self {
            BlockLayout::Uniform { width, .. } => BlockBand {
                ordinal,
                start: ordinal * width,
                width: *width,
            },
            BlockLayout::Skewed { bands, .. } => bands[ordinal],
        }
    }

    pub fn bands(&self) -> Vec<BlockBand> {
        (0..self.band_count()).map(|m| self.band(m)).collect()
    }

    /// Band containing row (or column) `offset`.
    pub fn band_of_offset(&self, offset: usize) -> BlockBand {
        match self {
            BlockLayout::Uniform { width, .. } => self.band(offset / width),
            BlockLayout::Skewed { bands, .. } => {
                let i = bands.partition_point(|b| b.start + b.width <= offset);
                bands[i]
            }
        }
    }

    /// Band owning `label`.
    pub fn block_index(&self, label: &str, seed: u64) -> BlockBand {
        if let BlockLayout::Skewed { pins, .. } = self {
            if let Some(&ordinal) = pins.get(label) {
                return self.band(ordinal);
            }
        }
        let slot = (hash64(label.as_bytes(), seed) % self.band_count() as u64) as usize;
        self.band(slot)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BlockLayout::Uniform { blocks, width } => {
                if *blocks == 0 || *width == 0 {
                    return Err(Error::InvalidConfig("uniform layout must be non-empty".into()));
                }
            }
            BlockLayout::Skewed { bands, pins } => {
                if bands.is_empty() {
                    return Err(Error::InvalidConfig("skewed layout has no bands".into()));
                }
                let mut next = 0;
                for (i, b) in bands.iter().enumerate() {
                    if b.ordinal != i || b.start != next || b.width == 0 {
                        return Err(Error::InvalidConfig(format!(
                            "skewed band {i} is not contiguous with its predecessor"
                        )));
                    }
                    next += b.width;
                }
                if let Some((label, &m)) = pins.iter().find(|(_, &m)| m >= bands.len()) {
                    return Err(Error::InvalidConfig(format!(
                        "label {label:?} pinned to missing band {m}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Edge-label prime table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeTable {
    primes: Vec<u64>,
}

impl PrimeTable {
    /// The first `count` primes, ascending.
    pub fn first(count: usize) -> Self {
        let mut primes = Vec::with_capacity(count);
        let mut n = 2u64;
        while primes.len() < count {
            if is_prime(n) {
                primes.push(n);
            }
            n += 1;
        }
        PrimeTable { primes }
    }

    pub fn from_primes(primes: Vec<u64>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::InvalidConfig("prime table is empty".into()));
        }
        for (i, &p) in primes.iter().enumerate() {
            if !is_prime(p) {
                return Err(Error::InvalidConfig(format!("{p} is not prime")));
            }
            if primes[..i].contains(&p) {
                return Err(Error::InvalidConfig(format!("prime {p} listed twice")));
            }
        }
        Ok(PrimeTable { primes })
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn slot(&self, edge_label: &str, seed: u64) -> usize {
        (hash64(edge_label.as_bytes(), seed) % self.primes.len() as u64) as usize
    }

    pub fn label_prime(&self, edge_label: &str, seed: u64) -> u64 {
        self.primes[self.slot(edge_label, seed)]
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut i = 3u64;
    while i.saturating_mul(i) <= n {
        if n.is_multiple_of(i) {
            return false;
        }
        i += 2;
    }
    true
}

/// A vertex hashed into its block: `hash in [0, width*F)`, split into
/// address and fingerprint, plus its `r` candidate offsets within the block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HashedVertex {
    pub hash: u64,
    pub address: u64,
    pub fingerprint: u32,
    pub candidates: Vec<u32>,
}

/// A hashed vertex together with the band its label selects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlacedVertex {
    pub band: BlockBand,
    pub vertex: HashedVertex,
}

impl PlacedVertex {
    /// Absolute matrix row/column of candidate `i`.
    #[inline]
    pub fn position(&self, i: usize) -> usize {
        self.band.start + self.vertex.candidates[i] as usize
    }

    /// Block-qualified identity: `(band start + address) * F + fingerprint`,
    /// a value in `[0, d*F)`. Used by the pool and the vertex registry.
    pub fn key(&self, fingerprint_range: u64) -> u64 {
        vertex_key(self.band.start, self.vertex.address, self.vertex.fingerprint, fingerprint_range)
    }
}

pub fn vertex_key(band_start: usize, address: u64, fingerprint: u32, fingerprint_range: u64) -> u64 {
    (band_start as u64 + address) * fingerprint_range + fingerprint as u64
}

/// Hashes `vertex` into the band chosen by `label`.
pub fn precompute(vertex: &str, label: &str, cfg: &SketchConfig) -> PlacedVertex {
    let band = cfg.layout.block_index(label, cfg.hash_seed);
    let hash = hash64(vertex.as_bytes(), cfg.hash_seed) % (band.width as u64 * cfg.fingerprint_range);
    placed_from_hash(band, hash, cfg)
}

/// Rebuilds a placed vertex from its band and in-block hash.
pub fn placed_from_hash(band: BlockBand, hash: u64, cfg: &SketchConfig) -> PlacedVertex {
    let (address, fingerprint) = split_hash(hash, cfg.fingerprint_range);
    let candidates = candidate_list(fingerprint, address, cfg.candidates, &cfg.lcg, band.width);
    PlacedVertex {
        band,
        vertex: HashedVertex {
            hash,
            address,
            fingerprint,
            candidates,
        },
    }
}

/// Inverse of [`PlacedVertex::key`].
pub fn placed_from_key(key: u64, cfg: &SketchConfig) -> PlacedVertex {
    let row = (key / cfg.fingerprint_range) as usize;
    let band = cfg.layout.band_of_offset(row);
    let local = key - band.start as u64 * cfg.fingerprint_range;
    placed_from_hash(band, local, cfg)
}
