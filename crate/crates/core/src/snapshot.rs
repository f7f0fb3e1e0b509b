//! Versioned binary snapshot of a sketch.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"LSKT"
//! version u32            currently 1
//! section*               tag u8, length u64, payload[length]
//! ```
//!
//! Sections appear once each, in tag order:
//!
//! | tag | name     | payload |
//! |-----|----------|---------|
//! | 1   | config   | UTF-8 key=value text as written by `SketchConfig::render` |
//! | 2   | primes   | count u32, then u64 per prime |
//! | 3   | window   | subwindow u64, k u64, has_start u8, latest_start u64, epoch u64 |
//! | 4   | matrix   | count u64, then per segment: row u32, col u32, twin u8, f_src u32, f_dst u32, i_src u32, i_dst u32, counters |
//! | 5   | pool     | count u64, then per entry: src_key u64, dst_key u64, src_band u32, dst_band u32, counters |
//! | 6   | registry | present u8; if 1: collisions u64, count u64, then per vertex: key u64, id str, label str |
//! | 7   | stats    | items, matrix_items, pool_items, rejected, subwindows_elapsed, last_sweep, pool_inserts_since_sweep (u64 each) |
//!
//! `counters` is: slot count u32, then per slot epoch u64, count u64, limb
//! count u32 and per limb a length-prefixed (u32) little-endian magnitude.
//! `str` is a u32 byte length followed by UTF-8 bytes. Unknown tags are
//! rejected; a reader must match the version exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_bigint::BigUint;

use crate::config::SketchConfig;
use crate::counters::{PrimeProduct, Slot, WindowCounters};
use crate::error::{Error, Result};
use crate::hashing::PrimeTable;
use crate::matrix::{Segment, SlidingWindow, StorageMatrix};
use crate::pool::{AdditionalPool, PoolEntry};
use crate::sketch::{LSketch, SketchStats, VertexRegistry};

pub const MAGIC: &[u8; 4] = b"LSKT";
pub const VERSION: u32 = 1;

const CONFIG: u8 = 1;
const PRIMES: u8 = 2;
const WINDOW: u8 = 3;
const MATRIX: u8 = 4;
const POOL: u8 = 5;
const REGISTRY: u8 = 6;
const STATS: u8 = 7;

#[derive(Default)]
struct Buf(Vec<u8>);

impl Buf {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.0.extend_from_slice(b);
    }
    fn counters(&mut self, c: &WindowCounters) {
        let slots: Vec<&Slot> = c.stored().collect();
        self.u32(slots.len() as u32);
        for s in slots {
            self.u64(s.epoch);
            self.u64(s.count);
            self.u32(s.product.parts().len() as u32);
            for part in s.product.parts() {
                self.bytes(&part.to_bytes_le());
            }
        }
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    section: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.data.len() < n {
            return Err(Error::Snapshot(format!("{} section is truncated", self.section)));
        }
        let (head, rest) = self.data.split_at(n);
        self.data = rest;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
    fn str(&mut self) -> Result<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec())
            .map_err(|_| Error::Snapshot(format!("{} section has invalid UTF-8", self.section)))
    }
    fn counters(&mut self) -> Result<WindowCounters> {
        let n = self.u32()? as usize;
        let mut slots = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let epoch = self.u64()?;
            let count = self.u64()?;
            let limbs = self.u32()? as usize;
            let mut parts = Vec::with_capacity(limbs.min(1 << 16));
            for _ in 0..limbs {
                parts.push(BigUint::from_bytes_le(self.bytes()?));
            }
            if parts.is_empty() {
                return Err(Error::Snapshot("prime product with no limbs".into()));
            }
            slots.push(Slot {
                epoch,
                count,
                product: PrimeProduct::from_parts(parts),
            });
        }
        Ok(WindowCounters::from_slots(slots))
    }
    fn finish(&self) -> Result<()> {
        if self.data.is_empty() {
            Ok(())
        } else {
            Err(Error::Snapshot(format!("{} section has trailing bytes", self.section)))
        }
    }
}

/// Serializes `sketch` into a byte vector.
pub fn to_bytes(sketch: &LSketch) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let mut section = |tag: u8, body: Buf| {
        out.push(tag);
        out.extend_from_slice(&(body.0.len() as u64).to_le_bytes());
        out.extend_from_slice(&body.0);
    };
    let cfg = sketch.config();

    section(CONFIG, Buf(cfg.render().into_bytes()));

    let mut b = Buf::default();
    b.u32(cfg.primes.len() as u32);
    for &p in cfg.primes.primes() {
        b.u64(p);
    }
    section(PRIMES, b);

    let w = sketch.matrix().window();
    let mut b = Buf::default();
    b.u64(w.subwindow());
    b.u64(w.k() as u64);
    b.u8(w.latest_start().is_some() as u8);
    b.u64(w.latest_start().unwrap_or(0));
    b.u64(w.epoch());
    section(WINDOW, b);

    let mut b = Buf::default();
    let segs: Vec<_> = sketch.matrix().segments().collect();
    b.u64(segs.len() as u64);
    for (row, col, twin, seg) in segs {
        b.u32(row as u32);
        b.u32(col as u32);
        b.u8(twin as u8);
        b.u32(seg.f_pair.0);
        b.u32(seg.f_pair.1);
        b.u32(seg.idx_pair.0);
        b.u32(seg.idx_pair.1);
        b.counters(&seg.counters);
    }
    section(MATRIX, b);

    let mut b = Buf::default();
    let mut entries: Vec<&PoolEntry> = sketch.pool().entries().collect();
    entries.sort_by_key(|e| (e.src_hash, e.dst_hash));
    b.u64(entries.len() as u64);
    for e in entries {
        b.u64(e.src_hash);
        b.u64(e.dst_hash);
        b.u32(e.src_band as u32);
        b.u32(e.dst_band as u32);
        b.counters(&e.counters);
    }
    section(POOL, b);

    let mut b = Buf::default();
    match sketch.registry() {
        None => b.u8(0),
        Some(reg) => {
            b.u8(1);
            b.u64(reg.collisions());
            let mut vs: Vec<_> = reg.iter().collect();
            vs.sort();
            b.u64(vs.len() as u64);
            for (key, id, label) in vs {
                b.u64(key);
                b.bytes(id.as_bytes());
                b.bytes(label.as_bytes());
            }
        }
    }
    section(REGISTRY, b);

    let s = sketch.stats();
    let (last_sweep, since) = sketch.sweep_state();
    let mut b = Buf::default();
    for v in [s.items, s.matrix_items, s.pool_items, s.rejected, s.subwindows_elapsed, last_sweep, since] {
        b.u64(v);
    }
    section(STATS, b);
    out
}

/// Restores a sketch written by [`to_bytes`].
pub fn from_bytes(data: &[u8]) -> Result<LSketch> {
    if data.len() < 8 || &data[..4] != MAGIC {
        return Err(Error::Snapshot("missing LSKT header".into()));
    }
    let version = u32::from_le_bytes(data[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let mut sections: Vec<(u8, &[u8])> = Vec::new();
    let mut rest = &data[8..];
    while !rest.is_empty() {
        if rest.len() < 9 {
            return Err(Error::Snapshot("truncated section header".into()));
        }
        let tag = rest[0];
        let len = u64::from_le_bytes(rest[1..9].try_into().unwrap());
        let len = usize::try_from(len)
            .ok()
            .filter(|&l| l <= rest.len() - 9)
            .ok_or_else(|| Error::Snapshot(format!("section {tag} overruns the file")))?;
        sections.push((tag, &rest[9..9 + len]));
        rest = &rest[9 + len..];
    }
    let tags: Vec<u8> = sections.iter().map(|s| s.0).collect();
    if tags != [CONFIG, PRIMES, WINDOW, MATRIX, POOL, REGISTRY, STATS] {
        return Err(Error::Snapshot(format!("unexpected section sequence {tags:?}")));
    }
    let cursor = |i: usize, section| Cursor {
        data: sections[i].1,
        section,
    };

    let text = std::str::from_utf8(sections[0].1)
        .map_err(|_| Error::Snapshot("config section has invalid UTF-8".into()))?;
    let mut cfg = SketchConfig::parse(text)?;

    let mut c = cursor(1, "primes");
    let n = c.u32()? as usize;
    let primes = (0..n).map(|_| c.u64()).collect::<Result<Vec<_>>>()?;
    c.finish()?;
    cfg.primes = PrimeTable::from_primes(primes)?;
    cfg.validate()?;

    let mut c = cursor(2, "window");
    let subwindow = c.u64()?;
    let k = c.u64()? as usize;
    let has_start = c.u8()? == 1;
    let latest = c.u64()?;
    let epoch = c.u64()?;
    c.finish()?;
    if subwindow != cfg.subwindow || k != cfg.subwindows() {
        return Err(Error::Snapshot("window section disagrees with config".into()));
    }
    let mut matrix = StorageMatrix::new(&cfg);
    matrix.set_window(SlidingWindow::restore(subwindow, k, has_start.then_some(latest), epoch));

    let mut c = cursor(3, "matrix");
    let d = matrix.width();
    for _ in 0..c.u64()? {
        let row = c.u32()? as usize;
        let col = c.u32()? as usize;
        let twin = c.u8()? as usize;
        let f_pair = (c.u32()?, c.u32()?);
        let idx_pair = (c.u32()?, c.u32()?);
        let counters = c.counters()?;
        if row >= d || col >= d || twin > 1 {
            return Err(Error::Snapshot(format!("segment ({row}, {col}, {twin}) is out of range")));
        }
        matrix.put_segment(row, col, twin, Segment { f_pair, idx_pair, counters });
    }
    c.finish()?;

    let mut c = cursor(4, "pool");
    let mut pool = AdditionalPool::new();
    for _ in 0..c.u64()? {
        let src_hash = c.u64()?;
        let dst_hash = c.u64()?;
        let src_band = c.u32()? as usize;
        let dst_band = c.u32()? as usize;
        let counters = c.counters()?;
        pool.restore(PoolEntry {
            src_hash,
            dst_hash,
            src_band,
            dst_band,
            counters,
        });
    }
    c.finish()?;

    let mut c = cursor(5, "registry");
    let registry = match c.u8()? {
        0 => None,
        1 => {
            let collisions = c.u64()?;
            let n = c.u64()?;
            let mut map = HashMap::new();
            for _ in 0..n {
                let key = c.u64()?;
                let id = c.str()?;
                let label = c.str()?;
                map.insert(key, (id, label));
            }
            Some(VertexRegistry::restore(map, collisions))
        }
        other => return Err(Error::Snapshot(format!("bad registry flag {other}"))),
    };
    c.finish()?;

    let mut c = cursor(6, "stats");
    let stats = SketchStats {
        items: c.u64()?,
        matrix_items: c.u64()?,
        pool_items: c.u64()?,
        rejected: c.u64()?,
        subwindows_elapsed: c.u64()?,
    };
    let sweep = (c.u64()?, c.u64()?);
    c.finish()?;

    Ok(LSketch::from_parts(cfg, matrix, pool, registry, stats, sweep))
}

pub fn write<W: Write>(sketch: &LSketch, mut out: W) -> Result<()> {
    out.write_all(&to_bytes(sketch))?;
    out.flush()?;
    Ok(())
}

pub fn read<R: Read>(mut input: R) -> Result<LSketch> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    from_bytes(&data)
}

pub fn save(sketch: &LSketch, path: impl AsRef<Path>) -> Result<()> {
    write(sketch, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<LSketch> {
    read(BufReader::new(File::open(path)?))
}
