//! The expansive partition `t_k = k^{-β}` and the index arithmetic built on it.
//!
//! Points of the unit interval live in the cells `A_m = (t_{m+1}, t_m]`;
//! points of the half-line live in the levels `L_k = [τ_k, τ_{k+1})` where
//! `τ_k = t_1 + … + t_k`. Every map and observable over `ℝ⁺` goes through
//! this module to move between a real coordinate and its level.

use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::numeric::{power_sum_expansion, CompensatedSum};

/// Largest `k` whose prefix sum is stored in the table. Beyond it `τ_k` is
/// evaluated from its Euler–Maclaurin expansion, which is already exact to
/// double precision long before this index.
pub const TAU_CACHE_LIMIT: u64 = 1 << 22;

const INITIAL_CACHE: usize = 1 << 12;

/// Index at which the expansion constant (`ζ(β)`, or Euler's γ for `β = 1`)
/// is calibrated against the exact prefix sum.
const CALIBRATION_INDEX: u64 = 256;

/// Largest index for which floating-point boundary comparisons still
/// separate neighbouring cells.
const EXACT_INDEX_LIMIT: f64 = (1u64 << 52) as f64;

#[derive(Debug)]
struct TauTable {
    tau: Vec<f64>,
    running: CompensatedSum,
}

impl TauTable {
    fn extend_to(&mut self, len: usize, beta: f64) {
        self.tau.reserve(len.saturating_sub(self.tau.len()));
        while self.tau.len() < len {
            let k = self.tau.len() as u64;
            self.running.add(power(k, beta));
            self.tau.push(self.running.value());
        }
    }
}

#[inline]
fn power(k: u64, beta: f64) -> f64 {
    if beta == 1.0 {
        1.0 / k as f64
    } else {
        (k as f64).powf(-beta)
    }
}

/// The sequence `t_k = k^{-β}` together with its derived quantities.
#[derive(Debug)]
pub struct PartitionSequence {
    beta: f64,
    tau: RwLock<TauTable>,
    expansion_constant: f64,
}

impl Clone for PartitionSequence {
    fn clone(&self) -> Self {
        let table = self.tau.read().expect("tau cache poisoned");
        Self {
            beta: self.beta,
            tau: RwLock::new(TauTable {
                tau: table.tau.clone(),
                running: table.running,
            }),
            expansion_constant: self.expansion_constant,
        }
    }
}

impl PartitionSequence {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(Error::domain("PartitionSequence::new", beta, "(0, 1]"));
        }
        let mut table = TauTable {
            tau: vec![0.0],
            running: CompensatedSum::new(),
        };
        table.extend_to(INITIAL_CACHE, beta);
        let k0 = CALIBRATION_INDEX;
        let expansion_constant = table.tau[k0 as usize] - power_sum_expansion(beta, k0 as f64);
        Ok(Self {
            beta,
            tau: RwLock::new(table),
            expansion_constant,
        })
    }

    #[inline]
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `t_k = k^{-β}`.
    pub fn t(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("t", 0.0, "k >= 1"));
        }
        Ok(self.t_unchecked(k))
    }

    #[inline]
    pub(crate) fn t_unchecked(&self, k: u64) -> f64 {
        power(k, self.beta)
    }

    /// `a_k = t_k − t_{k+1}`, evaluated without cancellation.
    pub fn a(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::domain("a", 0.0, "k >= 1"));
        }
        Ok(self.a_unchecked(k))
    }

    #[inline]
    pub(crate) fn a_unchecked(&self, k: u64) -> f64 {
        let kf = k as f64;
        // t_k (1 - (1 + 1/k)^{-β})
        self.t_unchecked(k) * -(-self.beta * (1.0 / kf).ln_1p()).exp_m1()
    }

    /// `τ_k = Σ_{j ≤ k} t_j`, with `τ_0 = 0`.
    pub fn tau(&self, k: u64) -> f64 {
        if k > TAU_CACHE_LIMIT {
            return self.tau_expansion(k);
        }
        let idx = k as usize;
        {
            let table = self.tau.read().expect("tau cache poisoned");
            if let Some(&v) = table.tau.get(idx) {
                return v;
            }
        }
        let mut table = self.tau.write().expect("tau cache poisoned");
        if idx >= table.tau.len() {
            let target = (idx + 1)
                .max(2 * table.tau.len())
                .min(TAU_CACHE_LIMIT as usize + 1);
            table.extend_to(target, self.beta);
        }
        table.tau[idx]
    }

    /// Grows the table so that `τ_k` for every `k ≤ max_k` is served without
    /// taking the write lock. Call this before a parallel phase.
    pub fn prefetch(&self, max_k: u64) {
        let _ = self.tau(max_k.min(TAU_CACHE_LIMIT));
    }

    pub fn cached_len(&self) -> usize {
        self.tau.read().expect("tau cache poisoned").tau.len()
    }

    fn tau_expansion(&self, k: u64) -> f64 {
        self.expansion_constant + power_sum_expansion(self.beta, k as f64)
    }

    /// Closed-form initial guess for [`Self::level_of`], inverting the
    /// leading asymptotics of `τ_k`.
    fn level_guess(&self, x: f64) -> f64 {
        let y = (x - self.expansion_constant).max(0.0);
        if self.beta == 1.0 {
            y.exp()
        } else {
            ((1.0 - self.beta) * y).powf(1.0 / (1.0 - self.beta))
        }
    }

    /// The unique `k` with `τ_k ≤ x < τ_{k+1}`.
    pub fn level_of(&self, x: f64) -> Result<u64> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::domain("level_of", x, "[0, ∞)"));
        }
        if x < 1.0 {
            return Ok(0);
        }
        let guess = self.level_guess(x);
        if guess >= EXACT_INDEX_LIMIT {
            return Err(Error::domain("level_of", x, "levels below 2^52"));
        }
        let mut k = (guess.floor() as u64).max(1);
        // Local scan; the guess is within a couple of levels except for
        // small k where the expansion is coarse.
        let mut stride = 1u64;
        while self.tau(k) > x {
            k = k.saturating_sub(stride).max(1);
            stride *= 2;
        }
        let mut stride = 1u64;
        while self.tau(k + stride) <= x {
            k += stride;
            stride *= 2;
        }
        // Now τ_k ≤ x < τ_{k+stride}: bisect.
        let (mut lo, mut hi) = (k, k + stride);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.tau(mid) <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// The unique `m` with `t_{m+1} < y ≤ t_m`, i.e. `y ∈ A_m`.
    ///
    /// Indices beyond `2^52` are returned from the closed form without the
    /// boundary correction (neighbouring cells are no longer separable in
    /// double precision); beyond `u64::MAX` the result saturates.
    pub fn branch_of_unit(&self, y: f64) -> Result<u64> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::domain("branch_of_unit", y, "(0, 1]"));
        }
        Ok(self.branch_unchecked(y))
    }

    #[inline]
    pub(crate) fn branch_unchecked(&self, y: f64) -> u64 {
        let guess = if self.beta == 1.0 {
            1.0 / y
        } else {
            y.powf(-1.0 / self.beta)
        };
        if guess >= EXACT_INDEX_LIMIT {
            return if guess >= u64::MAX as f64 {
                u64::MAX
            } else {
                guess as u64
            };
        }
        let mut m = (guess.floor() as u64).max(1);
        while m > 1 && y > self.t_unchecked(m) {
            m -= 1;
        }
        while y <= self.t_unchecked(m + 1) {
            m += 1;
        }
        m
    }
}
