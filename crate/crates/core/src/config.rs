//! Sketch tunables and the flat `key=value` configuration file.
//!
//! Recognised keys (unknown keys are rejected):
//!
//! ```text
//! # comments start with '#'
//! matrix_width=1000          # d
//! layout=uniform             # uniform | skewed
//! block_width=500            # b, uniform only
//! bands=100,900              # band widths, skewed only
//! pins=minor:0,major:1       # label:band, skewed only
//! fingerprint_range=256      # F, power of two
//! candidates=16              # r
//! samples=16                 # s
//! window=86400               # W
//! subwindow=3600             # W_s, divides W
//! window_start=0             # optional; defaults to the first timestamp
//! prime_count=64             # c
//! lcg_multiplier=5           # optional T, I, M; M defaults to a searched prime
//! lcg_increment=3
//! lcg_modulus=257
//! hash_seed=24301
//! path_queries=true          # maintain the vertex registry
//! prime_product_cap=0        # bytes per prime-product limb, 0 = unbounded
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hashing::{BlockLayout, Lcg, PrimeTable};

/// Largest fingerprint range the exhaustive LCG check is run over.
pub const MAX_FINGERPRINT_RANGE: u64 = 1 << 20;
pub const MAX_CANDIDATES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchConfig {
    pub layout: BlockLayout,
    pub fingerprint_range: u64,
    pub candidates: usize,
    pub samples: usize,
    pub window: u64,
    pub subwindow: u64,
    pub window_start: Option<u64>,
    pub primes: PrimeTable,
    pub lcg: Lcg,
    pub hash_seed: u64,
    pub path_queries: bool,
    pub prime_product_cap: Option<usize>,
}

impl SketchConfig {
    /// Uniform layout with the defaults used throughout: 8-bit fingerprints,
    /// `r = s = 16`, a one-day window of hourly subwindows, 64 primes.
    pub fn uniform(matrix_width: usize, block_width: usize) -> Result<Self> {
        Ok(Self::with_layout(BlockLayout::uniform(matrix_width, block_width)?))
    }

    pub fn with_layout(layout: BlockLayout) -> Self {
        let mut cfg = SketchConfig {
            layout,
            fingerprint_range: 256,
            candidates: 16,
            samples: 16,
            window: 86_400,
            subwindow: 3_600,
            window_start: None,
            primes: PrimeTable::first(64),
            lcg: Lcg::new(5, 3, 1),
            hash_seed: 0x5eed,
            path_queries: true,
            prime_product_cap: None,
        };
        cfg.reset_lcg();
        cfg
    }

    /// Small uniform configuration with explicit `d, b, F, r, s`.
    pub fn example(d: usize, b: usize, f: u64, r: usize, s: usize) -> Self {
        let mut cfg = Self::with_layout(BlockLayout::uniform(d, b).expect("valid example layout"));
        cfg.fingerprint_range = f;
        cfg.candidates = r;
        cfg.samples = s;
        cfg.reset_lcg();
        cfg
    }

    /// Recomputes the default LCG for the current `F` and `r`.
    pub fn reset_lcg(&mut self) {
        self.lcg = Lcg::for_fingerprints(self.fingerprint_range, self.candidates);
    }

    pub fn matrix_width(&self) -> usize {
        self.layout.matrix_width()
    }

    /// Number of subwindows `k = W / W_s`.
    pub fn subwindows(&self) -> usize {
        (self.window / self.subwindow) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.layout.validate()?;
        let f = self.fingerprint_range;
        if f < 2 || !f.is_power_of_two() {
            return bad(format!("fingerprint range {f} must be a power of two >= 2"));
        }
        if f > MAX_FINGERPRINT_RANGE {
            return bad(format!("fingerprint range {f} exceeds {MAX_FINGERPRINT_RANGE}"));
        }
        if (self.layout.max_width() as u128) * (f as u128) > u64::MAX as u128 {
            return bad("block width times fingerprint range overflows 64 bits".into());
        }
        if self.candidates == 0 || self.candidates > MAX_CANDIDATES {
            return bad(format!("candidates must be in 1..={MAX_CANDIDATES}"));
        }
        if self.samples == 0 || self.samples > self.candidates * self.candidates {
            return bad(format!(
                "samples must be in 1..={}",
                self.candidates * self.candidates
            ));
        }
        if self.subwindow == 0 || self.window == 0 || !self.window.is_multiple_of(self.subwindow) {
            return bad(format!(
                "window {} must be a positive multiple of subwindow {}",
                self.window, self.subwindow
            ));
        }
        if self.primes.is_empty() {
            return bad("prime table is empty".into());
        }
        if self.lcg.modulus == 0 {
            return bad("lcg modulus must be positive".into());
        }
        if let Some(seed) = self.lcg.first_duplicate(f, self.candidates) {
            return bad(format!(
                "lcg ({}, {}, {}) repeats a candidate for fingerprint {seed}",
                self.lcg.multiplier, self.lcg.increment, self.lcg.modulus
            ));
        }
        if self.prime_product_cap == Some(0) {
            return bad("prime_product_cap must be positive when set".into());
        }
        Ok(())
    }

    /// Non-fatal observations about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.layout.min_width() < self.candidates {
            out.push(format!(
                "narrowest block ({}) is below the candidate count r={}; candidates will repeat",
                self.layout.min_width(),
                self.candidates
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let line = line.split(" #").next().unwrap_or(line).trim();
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, got {raw:?}"),
            })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let mut take = |key: &str| kv.remove(key);

        fn num<T: std::str::FromStr>(key: &str, entry: (usize, String)) -> Result<T> {
            entry.1.parse().map_err(|_| Error::Parse {
                line: entry.0,
                message: format!("{key}: cannot parse {:?}", entry.1),
            })
        }

        let d: usize = match take("matrix_width") {
            Some(e) => num("matrix_width", e)?,
            None => return Err(Error::InvalidConfig("matrix_width is required".into())),
        };
        let layout_kind = take("layout").map(|e| e.1).unwrap_or_else(|| "uniform".into());
        let block_width = take("block_width");
        let bands = take("bands");
        let pins = take("pins");
        let layout = match layout_kind.as_str() {
            "uniform" => {
                if bands.is_some() || pins.is_some() {
                    return Err(Error::InvalidConfig(
                        "bands/pins are only valid with layout=skewed".into(),
                    ));
                }
                let b = match block_width {
                    Some(e) => num("block_width", e)?,
                    None => d,
                };
                BlockLayout::uniform(d, b)?
            }
            "skewed" => {
                let (line, spec) = bands.ok_or_else(|| {
                    Error::InvalidConfig("layout=skewed requires bands".into())
                })?;
                let widths = spec
                    .split(',')
                    .map(|w| num::<usize>("bands", (line, w.trim().to_string())))
                    .collect::<Result<Vec<_>>>()?;
                let mut layout = BlockLayout::skewed(&widths)?;
                if layout.matrix_width() != d {
                    return Err(Error::InvalidConfig(format!(
                        "band widths sum to {} but matrix_width is {d}",
                        layout.matrix_width()
                    )));
                }
                if let Some((line, spec)) = pins {
                    for pin in spec.split(',').filter(|p| !p.trim().is_empty()) {
                        let (label, band) = pin.rsplit_once(':').ok_or_else(|| Error::Parse {
                            line,
                            message: format!("pin {pin:?} is not label:band"),
                        })?;
                        let band = num::<usize>("pins", (line, band.trim().to_string()))?;
                        layout = layout.pin(label.trim(), band)?;
                    }
                }
                layout
            }
            other => {
                return Err(Error::InvalidConfig(format!("unknown layout {other:?}")));
            }
        };

        let mut cfg = SketchConfig::with_layout(layout);
        if let Some(e) = take("fingerprint_range") {
            cfg.fingerprint_range = num("fingerprint_range", e)?;
        }
        if let Some(e) = take("candidates") {
            cfg.candidates = num("candidates", e)?;
        }
        if let Some(e) = take("samples") {
            cfg.samples = num("samples", e)?;
        }
        if let Some(e) = take("window") {
            cfg.window = num("window", e)?;
        }
        if let Some(e) = take("subwindow") {
            cfg.subwindow = num("subwindow", e)?;
        }
        if let Some(e) = take("window_start") {
            cfg.window_start = Some(num("window_start", e)?);
        }
        if let Some(e) = take("prime_count") {
            let c: usize = num("prime_count", e)?;
            if c == 0 {
                return Err(Error::InvalidConfig("prime_count must be positive".into()));
            }
            cfg.primes = PrimeTable::first(c);
        }
        if let Some(e) = take("hash_seed") {
            cfg.hash_seed = num("hash_seed", e)?;
        }
        if let Some(e) = take("path_queries") {
            cfg.path_queries = num("path_queries", e)?;
        }
        if let Some(e) = take("prime_product_cap") {
            let cap: usize = num("prime_product_cap", e)?;
            cfg.prime_product_cap = (cap > 0).then_some(cap);
        }
        if cfg.fingerprint_range >= 2 && cfg.candidates >= 1 && cfg.fingerprint_range <= MAX_FINGERPRINT_RANGE {
            cfg.reset_lcg();
        }
        if let Some(e) = take("lcg_multiplier") {
            cfg.lcg.multiplier = num("lcg_multiplier", e)?;
        }
        if let Some(e) = take("lcg_increment") {
            cfg.lcg.increment = num("lcg_increment", e)?;
        }
        if let Some(e) = take("lcg_modulus") {
            cfg.lcg.modulus = num("lcg_modulus", e)?;
        }
        if let Some((key, (line, _))) = kv.into_iter().next() {
            return Err(Error::Parse {
                line,
                message: format!("unknown key {key:?}"),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders the configuration in the format accepted by [`SketchConfig::parse`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "matrix_width={}", self.matrix_width());
        match &self.layout {
            BlockLayout::Uniform { width, .. } => {
                let _ = writeln!(out, "layout=uniform\nblock_width={width}");
            }
            BlockLayout::Skewed { bands, pins } => {
                let widths: Vec<String> = bands.iter().map(|b| b.width.to_string()).collect();
                let _ = writeln!(out, "layout=skewed\nbands={}", widths.join(","));
                if !pins.is_empty() {
                    let p: Vec<String> = pins.iter().map(|(l, m)| format!("{l}:{m}")).collect();
                    let _ = writeln!(out, "pins={}", p.join(","));
                }
            }
        }
        let _ = writeln!(out, "fingerprint_range={}", self.fingerprint_range);
        let _ = writeln!(out, "candidates={}", self.candidates);
        let _ = writeln!(out, "samples={}", self.samples);
        let _ = writeln!(out, "window={}", self.window);
        let _ = writeln!(out, "subwindow={}", self.subwindow);
        if let Some(t) = self.window_start {
            let _ = writeln!(out, "window_start={t}");
        }
        let _ = writeln!(out, "prime_count={}", self.primes.len());
        let _ = writeln!(out, "lcg_multiplier={}", self.lcg.multiplier);
        let _ = writeln!(out, "lcg_increment={}", self.lcg.increment);
        let _ = writeln!(out, "lcg_modulus={}", self.lcg.modulus);
        let _ = writeln!(out, "hash_seed={}", self.hash_seed);
        let _ = writeln!(out, "path_queries={}", self.path_queries);
        let _ = writeln!(out, "prime_product_cap={}", self.prime_product_cap.unwrap_or(0));
        out
    }
}
