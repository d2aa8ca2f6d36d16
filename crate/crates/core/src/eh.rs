//! Exponential histograms: approximate counts of the ones among the last `N`
//! time steps with relative error at most `eps_prime`.
//!
//! Buckets have power-of-two sizes and are grouped by size class. Within the
//! histogram the buckets are ordered newest to oldest, so class `i` holds only
//! buckets newer than every bucket of class `i + 1`. When a class reaches
//! `ceil(k/2) + 2` buckets its two oldest merge into one bucket of the next
//! class, where `k = ceil(1 / eps_prime)`.
//!
//! Each bucket keeps the timestamp of its most recent one (which decides
//! expiry) and of its earliest one. The second timestamp lets the estimator
//! tell when the oldest bucket still lies wholly inside the window, in which
//! case `TOTAL` is exact; otherwise it returns `TOTAL - LAST / 2`.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::codec::{Decoder, Encoder};
use crate::{Result, SketchError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EhBucket {
    pub size: u64,
    /// Time of the most recent one merged into this bucket.
    pub timestamp: u64,
    /// Time of the earliest one merged into this bucket.
    pub first: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Span {
    newest: u64,
    oldest: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpHistogram {
    eps_prime: f64,
    k: u64,
    window: u64,
    /// `classes[i]` holds the buckets of size `2^i`, newest first. The last
    /// class is never empty.
    classes: Vec<VecDeque<Span>>,
    total: u64,
    last_time: Option<u64>,
}

/// `k = ceil(1 / eps_prime)`, tolerant of the rounding in `1 / 0.1`.
pub fn k_for(eps_prime: f64) -> u64 {
    libm::ceil(1.0 / eps_prime - 1e-9) as u64
}

/// Worst-case bucket count `(k/2 + 1)(log2(2N/k + 1) + 1) + 1` for a window
/// holding at most `capacity` ones.
pub fn space_bound(k: u64, capacity: u64) -> f64 {
    let k = k as f64;
    (k / 2.0 + 1.0) * (libm::log2(2.0 * capacity as f64 / k + 1.0) + 1.0) + 1.0
}

impl ExpHistogram {
    pub fn new(eps_prime: f64, window: u64) -> Result<Self> {
        if !(eps_prime > 0.0 && eps_prime <= 1.0) {
            return Err(SketchError::param(
                "eps_prime",
                format!("must lie in (0, 1], got {eps_prime}"),
            ));
        }
        if window == 0 {
            return Err(SketchError::param("N", "window must be at least 1"));
        }
        Ok(ExpHistogram {
            eps_prime,
            k: k_for(eps_prime),
            window,
            classes: Vec::new(),
            total: 0,
            last_time: None,
        })
    }

    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    fn cap(&self) -> usize {
        (self.k as usize).div_ceil(2) + 1
    }

    /// Records `amount` ones at time `t`, one unit insertion at a time.
    pub fn add(&mut self, t: u64, amount: u64) -> Result<()> {
        if amount == 0 {
            return Err(SketchError::param("amount", "must be at least 1"));
        }
        if let Some(last) = self.last_time {
            if t < last {
                return Err(SketchError::OutOfOrder { last, got: t });
            }
        }
        self.expire(t);
        self.last_time = Some(t);
        for _ in 0..amount {
            self.push_one(t);
        }
        Ok(())
    }

    fn push_one(&mut self, t: u64) {
        let cap = self.cap();
        self.total += 1;
        let mut carry = Span {
            newest: t,
            oldest: t,
        };
        let mut i = 0;
        loop {
            if i == self.classes.len() {
                self.classes.push(VecDeque::new());
            }
            let class = &mut self.classes[i];
            class.push_front(carry);
            if class.len() <= cap {
                return;
            }
            let older = class.pop_back().unwrap();
            let newer = class.pop_back().unwrap();
            carry = Span {
                newest: newer.newest,
                oldest: older.oldest,
            };
            i += 1;
        }
    }

    /// Drops every bucket whose newest one has left the window at `now`, i.e.
    /// `timestamp <= now - N`.
    pub fn expire(&mut self, now: u64) {
        let window = self.window;
        while !self.classes.is_empty() {
            let size = 1u64 << (self.classes.len() - 1);
            let class = self.classes.last_mut().unwrap();
            while class
                .back()
                .is_some_and(|s| s.newest.saturating_add(window) <= now)
            {
                class.pop_back();
                self.total -= size;
            }
            if !class.is_empty() {
                return;
            }
            self.classes.pop();
        }
    }

    /// Expires at `now`, then estimates the count in `(now - N, now]`.
    pub fn estimate(&mut self, now: u64) -> f64 {
        self.expire(now);
        match self.classes.last().and_then(|c| c.back()) {
            None => 0.0,
            Some(oldest) => self.estimate_with(oldest, self.total, self.last(), now),
        }
    }

    /// Same value as [`estimate`](Self::estimate) without mutating; skips
    /// expired buckets instead of dropping them.
    pub fn peek_estimate(&self, now: u64) -> f64 {
        let mut total = self.total;
        for (i, class) in self.classes.iter().enumerate().rev() {
            for s in class.iter().rev() {
                if s.newest.saturating_add(self.window) <= now {
                    total -= 1 << i;
                } else {
                    return self.estimate_with(s, total, 1 << i, now);
                }
            }
        }
        0.0
    }

    fn estimate_with(&self, oldest: &Span, total: u64, last: u64, now: u64) -> f64 {
        if oldest.oldest.saturating_add(self.window) > now {
            total as f64
        } else {
            total as f64 - last as f64 / 2.0
        }
    }

    pub fn bucket_count(&self) -> usize {
        self.classes.iter().map(VecDeque::len).sum()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Size of the oldest bucket, 0 when empty.
    pub fn last(&self) -> u64 {
        if self.classes.is_empty() {
            0
        } else {
            1 << (self.classes.len() - 1)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn last_time(&self) -> Option<u64> {
        self.last_time
    }

    /// Buckets from newest to oldest.
    pub fn buckets(&self) -> impl Iterator<Item = EhBucket> + '_ {
        self.classes.iter().enumerate().flat_map(|(i, class)| {
            class.iter().map(move |s| EhBucket {
                size: 1 << i,
                timestamp: s.newest,
                first: s.oldest,
            })
        })
    }

    /// Checks ordering, size classes, cached totals and the error invariant.
    pub fn validate(&self) -> core::result::Result<(), String> {
        let buckets: Vec<EhBucket> = self.buckets().collect();
        let sum: u64 = buckets.iter().map(|b| b.size).sum();
        if sum != self.total {
            return Err(format!("total {} but buckets sum to {sum}", self.total));
        }
        if self.classes.last().is_some_and(VecDeque::is_empty) {
            return Err("trailing empty size class".into());
        }
        for pair in buckets.windows(2) {
            let (newer, older) = (pair[0], pair[1]);
            if older.size < newer.size {
                return Err(format!(
                    "sizes decrease: {} then {}",
                    newer.size, older.size
                ));
            }
            if older.timestamp > newer.first {
                return Err(format!(
                    "bucket ending at {} overlaps a newer bucket starting at {}",
                    older.timestamp, newer.first
                ));
            }
        }
        for b in &buckets {
            if !b.size.is_power_of_two() || b.first > b.timestamp {
                return Err(format!("malformed bucket {b:?}"));
            }
        }
        let lo = (self.k as usize).div_ceil(2);
        let hi = lo + 1;
        let m = self.classes.len();
        for (i, class) in self.classes.iter().enumerate() {
            let n = class.len();
            if n > hi || (i + 1 < m && n < lo) {
                return Err(format!("class of size {} holds {n} buckets", 1u64 << i));
            }
        }
        if m >= 2 {
            // Worst case over the oldest bucket: it holds LAST/2 - 1 expired
            // ones while the rest of the window holds at least 1 + S.
            let last = self.last();
            let rest = self.total - last;
            if (last / 2 - 1) * self.k > 1 + rest {
                return Err(format!(
                    "oldest bucket {last} too large against {rest} newer ones at k = {}",
                    self.k
                ));
            }
        }
        Ok(())
    }

    pub(crate) fn encode(&self, e: &mut Encoder) {
        e.u64(self.last_time.map_or(0, |t| t + 1));
        e.u64(self.classes.len() as u64);
        for class in &self.classes {
            e.u64(class.len() as u64);
            for s in class {
                e.u64(s.newest);
                e.u64(s.oldest);
            }
        }
    }

    pub(crate) fn decode(d: &mut Decoder<'_>, eps_prime: f64, window: u64) -> Result<Self> {
        let mut h = ExpHistogram::new(eps_prime, window)?;
        let lt = d.u64()?;
        h.last_time = lt.checked_sub(1);
        let m = d.len(8)?;
        if m > 63 {
            return Err(SketchError::Snapshot(format!("{m} size classes")));
        }
        for i in 0..m {
            let n = d.len(16)?;
            let mut class = VecDeque::with_capacity(n);
            for _ in 0..n {
                let newest = d.u64()?;
                let oldest = d.u64()?;
                class.push_back(Span { newest, oldest });
            }
            h.total = h
                .total
                .checked_add((n as u64) << i)
                .ok_or_else(|| SketchError::Snapshot("bucket total overflows".into()))?;
            h.classes.push(class);
        }
        h.validate().map_err(SketchError::Snapshot)?;
        Ok(h)
    }
}
