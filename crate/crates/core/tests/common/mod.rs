#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigUint;
use num_traits::One;

use lsketch::hashing::{precompute, sample_sequence};
use lsketch::sketch::Placement;
use lsketch::{EdgeItem, LSketch, SketchConfig};

/// `(position, f_pair, idx_pair, dense counters)` for one live segment.
pub type LiveSegment = ((usize, usize, usize), (u32, u32), (u32, u32), Vec<(u64, BigUint)>);

/// Reference matrix that keeps `k` dense counter pairs per segment and
/// physically shifts every segment at each subwindow boundary.
pub struct EagerMatrix {
    cfg: SketchConfig,
    k: usize,
    t_n: Option<u64>,
    pub segments: BTreeMap<(usize, usize, usize), EagerSegment>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EagerSegment {
    pub f_pair: (u32, u32),
    pub idx_pair: (u32, u32),
    pub slots: Vec<(u64, BigUint)>,
}

impl EagerSegment {
    fn live(&self) -> bool {
        self.slots.iter().any(|s| s.0 > 0)
    }
}

impl EagerMatrix {
    pub fn new(cfg: &SketchConfig) -> Self {
        EagerMatrix {
            cfg: cfg.clone(),
            k: (cfg.window / cfg.subwindow) as usize,
            t_n: cfg.window_start,
            segments: BTreeMap::new(),
        }
    }

    fn shift(&mut self) {
        for seg in self.segments.values_mut() {
            seg.slots.remove(0);
            seg.slots.push((0, BigUint::one()));
        }
    }

    pub fn advance(&mut self, now: u64) {
        let t_n = self.t_n.get_or_insert(now);
        let mut steps = Vec::new();
        while *t_n + self.cfg.subwindow <= now {
            *t_n += self.cfg.subwindow;
            steps.push(());
        }
        for _ in steps {
            self.shift();
        }
    }

    /// Returns `Some((row, col, twin))` or `None` for the pool.
    pub fn insert(&mut self, item: &EdgeItem) -> Option<(usize, usize, usize)> {
        self.advance(item.timestamp);
        let cfg = &self.cfg;
        let src = precompute(&item.src, &item.src_label, cfg);
        let dst = precompute(&item.dst, &item.dst_label, cfg);
        let prime = cfg.primes.label_prime(&item.edge_label, cfg.hash_seed);
        let f_pair = (src.vertex.fingerprint, dst.vertex.fingerprint);
        let sampled = sample_sequence(f_pair.0, f_pair.1, cfg.samples, cfg.candidates, &cfg.lcg);
        let mut free = None;
        let mut hit = None;
        'probe: for &(ai, bi) in &sampled {
            let (row, col) = (src.position(ai as usize), dst.position(bi as usize));
            for twin in 0..2 {
                match self.segments.get(&(row, col, twin)) {
                    Some(seg) if seg.live() => {
                        if seg.f_pair == f_pair && seg.idx_pair == (ai, bi) {
                            hit = Some((row, col, twin));
                            break 'probe;
                        }
                    }
                    _ => {
                        if free.is_none() {
                            free = Some((row, col, twin, (ai, bi)));
                        }
                    }
                }
            }
        }
        let pos = match (hit, free) {
            (Some(h), _) => h,
            (None, Some((row, col, twin, idx_pair))) => {
                self.segments.insert(
                    (row, col, twin),
                    EagerSegment {
                        f_pair,
                        idx_pair,
                        slots: vec![(0, BigUint::one()); self.k],
                    },
                );
                (row, col, twin)
            }
            (None, None) => return None,
        };
        let last = self.segments.get_mut(&pos).unwrap().slots.last_mut().unwrap();
        last.0 += item.weight;
        last.1 *= BigUint::from(prime).pow(item.weight as u32);
        Some(pos)
    }

    /// Every live segment as `(position, f_pair, idx_pair, dense counters)`.
    pub fn live(&self) -> Vec<LiveSegment> {
        self.segments
            .iter()
            .filter(|(_, s)| s.live())
            .map(|(p, s)| (*p, s.f_pair, s.idx_pair, s.slots.clone()))
            .collect()
    }
}

/// Same view of the lazily slid sketch matrix.
pub fn lazy_live(s: &LSketch) -> Vec<LiveSegment> {
    let m = s.matrix();
    let (epoch, k) = (m.epoch(), m.k());
    let mut out: Vec<_> = m
        .segments()
        .filter(|(_, _, _, seg)| seg.counters.is_live(epoch, k))
        .map(|(r, c, t, seg)| ((r, c, t), seg.f_pair, seg.idx_pair, seg.counters.dense(epoch, k)))
        .collect();
    out.sort_by_key(|x| x.0);
    out
}

pub fn placement_pos(p: Placement) -> Option<(usize, usize, usize)> {
    match p {
        Placement::Matrix { row, col, segment, .. } => Some((row, col, segment)),
        Placement::Pool => None,
    }
}

/// Whether `cfg` separates every vertex, vertex label and edge label of
/// `items`: distinct block-qualified keys per `(id, label)`, one band per
/// vertex label and one prime per edge label.
pub fn collision_free(cfg: &SketchConfig, items: &[EdgeItem]) -> bool {
    let f = cfg.fingerprint_range;
    let mut keys: HashMap<u64, (&str, &str)> = HashMap::new();
    let mut bands: HashMap<usize, &str> = HashMap::new();
    let mut primes: HashMap<u64, &str> = HashMap::new();
    for it in items {
        for (v, l) in [(&it.src, &it.src_label), (&it.dst, &it.dst_label)] {
            let p = precompute(v, l, cfg);
            if *keys.entry(p.key(f)).or_insert((v, l)) != (v.as_str(), l.as_str()) {
                return false;
            }
            if *bands.entry(p.band.ordinal).or_insert(l) != l.as_str() {
                return false;
            }
        }
        let prime = cfg.primes.label_prime(&it.edge_label, cfg.hash_seed);
        if *primes.entry(prime).or_insert(&it.edge_label) != it.edge_label.as_str() {
            return false;
        }
    }
    true
}

/// Smallest hash seed from `start` at which `cfg` is collision free for `items`.
pub fn find_collision_free_seed(cfg: &mut SketchConfig, items: &[EdgeItem], start: u64) -> u64 {
    for seed in start..start + 10_000 {
        cfg.hash_seed = seed;
        if collision_free(cfg, items) {
            return seed;
        }
    }
    panic!("no collision-free seed found");
}

pub fn distinct_vertices(items: &[EdgeItem]) -> Vec<(String, String)> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for it in items {
        for v in [(it.src.clone(), it.src_label.clone()), (it.dst.clone(), it.dst_label.clone())] {
            if seen.insert(v.clone()) {
                out.push(v);
            }
        }
    }
    out
}
