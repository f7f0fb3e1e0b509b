//! Dual counters kept per subwindow: an arrival count `C` and a product of
//! edge-label primes `P`, one prime factor per unit of weight.
//!
//! Slots are stored sparsely and tagged with the epoch (subwindow ordinal)
//! they belong to. A slot is visible at epoch `e` when it is one of the
//! last `k` subwindows, `e - slot.epoch < k`; older slots are dropped the
//! next time the owner is written.

use std::collections::VecDeque;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

/// Product of primes, optionally split into limbs no larger than a byte cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeProduct {
    parts: Vec<BigUint>,
}

impl Default for PrimeProduct {
    fn default() -> Self {
        PrimeProduct {
            parts: vec![BigUint::one()],
        }
    }
}

impl PrimeProduct {
    pub fn from_parts(parts: Vec<BigUint>) -> Self {
        if parts.is_empty() {
            return Self::default();
        }
        PrimeProduct { parts }
    }

    pub fn parts(&self) -> &[BigUint] {
        &self.parts
    }

    pub fn is_one(&self) -> bool {
        self.parts.iter().all(|p| p.is_one())
    }

    /// The whole product as one integer.
    pub fn value(&self) -> BigUint {
        self.parts.iter().product()
    }

    /// Multiplies in `prime^weight`. With `cap = Some(bytes)` a new limb is
    /// started whenever the current one would exceed `bytes`.
    pub fn mul_pow(&mut self, prime: u64, weight: u64, cap: Option<usize>) {
        if weight == 0 {
            return;
        }
        let p = BigUint::from(prime);
        let Some(cap_bytes) = cap else {
            let last = self.parts.last_mut().expect("at least one limb");
            *last *= p.pow(weight as u32);
            return;
        };
        // At least one prime per limb, even when a single prime exceeds the cap.
        let cap_bits = (cap_bytes as u64 * 8).max(64 - prime.leading_zeros() as u64);
        let prime_bits = 64 - prime.leading_zeros() as u64;
        let mut remaining = weight;
        while remaining > 0 {
            let last_bits = self.parts.last().map(|p| p.bits()).unwrap_or(0);
            let room = cap_bits.saturating_sub(last_bits) / prime_bits;
            if room == 0 {
                self.parts.push(BigUint::one());
                continue;
            }
            let step = room.min(remaining).min(u32::MAX as u64);
            let last = self.parts.last_mut().expect("at least one limb");
            *last *= p.pow(step as u32);
            remaining -= step;
        }
    }

    /// Exponent of `prime` in the product.
    pub fn multiplicity(&self, prime: u64) -> u64 {
        self.parts.iter().map(|part| multiplicity(part, prime)).sum()
    }
}

/// Exponent of `prime` in `n`, by exact division with repeated squaring of
/// the divisor. Zero for `n = 0` or `prime < 2`.
pub fn multiplicity(n: &BigUint, prime: u64) -> u64 {
    if prime < 2 || n.is_zero() {
        return 0;
    }
    if let Some(mut small) = n.to_u64() {
        let mut e = 0;
        while small % prime == 0 {
            small /= prime;
            e += 1;
        }
        return e;
    }
    let mut x = n.clone();
    let mut powers = vec![BigUint::from(prime)];
    let mut e = 0u64;
    // Divide by p, p^2, p^4, ... while possible.
    loop {
        let q = powers.last().expect("non-empty");
        if !(&x % q).is_zero() {
            break;
        }
        x /= q;
        e += 1 << (powers.len() - 1);
        let next = q * q;
        if next > x {
            break;
        }
        powers.push(next);
    }
    // The remaining exponent is below the last power tried; descend greedily.
    for (j, q) in powers.iter().enumerate().rev() {
        if (&x % q).is_zero() {
            x /= q;
            e += 1 << j;
        }
    }
    e
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub epoch: u64,
    pub count: u64,
    pub product: PrimeProduct,
}

impl Slot {
    fn new(epoch: u64) -> Self {
        Slot {
            epoch,
            count: 0,
            product: PrimeProduct::default(),
        }
    }
}

/// Applies `C += w`, `P *= p^w` to a single slot.
pub fn update_slot(slot: &mut Slot, prime: u64, weight: u64, cap: Option<usize>) {
    slot.count += weight;
    slot.product.mul_pow(prime, weight, cap);
}

/// Subwindow counters of one segment or pool entry.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WindowCounters {
    slots: VecDeque<Slot>,
}

#[inline]
fn visible(slot_epoch: u64, epoch: u64, k: usize) -> bool {
    epoch - slot_epoch < k as u64
}

impl WindowCounters {
    pub fn from_slots(slots: Vec<Slot>) -> Self {
        WindowCounters {
            slots: slots.into(),
        }
    }

    /// Drops slots that have left the window at `epoch`.
    pub fn prune(&mut self, epoch: u64, k: usize) {
        while self.slots.front().is_some_and(|s| !visible(s.epoch, epoch, k)) {
            self.slots.pop_front();
        }
    }

    /// Adds `weight` arrivals of `prime` to the slot of `epoch`.
    pub fn record(&mut self, epoch: u64, k: usize, prime: u64, weight: u64, cap: Option<usize>) {
        self.prune(epoch, k);
        if self.slots.back().map(|s| s.epoch) != Some(epoch) {
            debug_assert!(self.slots.back().is_none_or(|s| s.epoch < epoch));
            self.slots.push_back(Slot::new(epoch));
        }
        let slot = self.slots.back_mut().expect("slot just ensured");
        update_slot(slot, prime, weight, cap);
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }

    /// Slots still inside the window at `epoch`, oldest first.
    pub fn visible(&self, epoch: u64, k: usize) -> impl Iterator<Item = &Slot> {
        self.slots.iter().filter(move |s| visible(s.epoch, epoch, k))
    }

    /// Every stored slot, including ones pending pruning.
    pub fn stored(&self) -> impl Iterator<Item = &Slot> {
        self.slots.iter()
    }

    /// `(w, w_l)`: total weight, and the weight carrying `prime` (0 if none).
    pub fn weights(&self, epoch: u64, k: usize, prime: Option<u64>) -> (u64, u64) {
        let mut w = 0;
        let mut wl = 0;
        for slot in self.visible(epoch, k) {
            w += slot.count;
            if let Some(p) = prime {
                wl += slot.product.multiplicity(p);
            }
        }
        (w, wl)
    }

    pub fn is_live(&self, epoch: u64, k: usize) -> bool {
        self.visible(epoch, k).any(|s| s.count > 0)
    }

    /// Counter pairs for the `k` subwindows ending at `epoch`, oldest first,
    /// with `(0, 1)` for subwindows never written.
    pub fn dense(&self, epoch: u64, k: usize) -> Vec<(u64, BigUint)> {
        let first = epoch + 1 - (k as u64).min(epoch + 1);
        let mut out: Vec<(u64, BigUint)> = Vec::with_capacity(k);
        if (k as u64) > epoch + 1 {
            for _ in 0..(k as u64 - epoch - 1) {
                out.push((0, BigUint::one()));
            }
        }
        for e in first..=epoch {
            match self.slots.iter().find(|s| s.epoch == e) {
                Some(s) => out.push((s.count, s.product.value())),
                None => out.push((0, BigUint::one())),
            }
        }
        out
    }
}
