//! α-Lüroth expansions for the partition `t_k = k^{-β}`.
//!
//! A point `x ∈ (0, 1]` has digits `ℓ_1, ℓ_2, …` with
//! `x = t_{ℓ_1} − a_{ℓ_1} t_{ℓ_2} + a_{ℓ_1} a_{ℓ_2} t_{ℓ_3} − …`, and `F_α`
//! acts on them by lowering the first digit (or dropping it when it is 1).
//! Under Lebesgue measure the digits are i.i.d. with `P(ℓ = k) = a_k`,
//! which gives the renewal recursion for the sum-level masses.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{gamma, CompensatedSum};
use crate::rng;
use crate::sequences::PartitionSequence;

/// Digits `ℓ_i ≥ 1`. The empty sequence stands for the point `0`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DigitSequence {
    digits: Vec<u64>,
    terminating: bool,
}

impl DigitSequence {
    pub fn new(digits: Vec<u64>) -> Result<Self> {
        if digits.contains(&0) {
            return Err(Error::invalid("digits must be positive"));
        }
        Ok(Self {
            digits,
            terminating: false,
        })
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    /// Whether extraction stopped because the remainder was exactly zero.
    pub fn is_terminating(&self) -> bool {
        self.terminating
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }
}

/// The first `m` digits of `x`, fewer if the expansion terminates.
pub fn digits(x: f64, seq: &PartitionSequence, m: usize) -> Result<DigitSequence> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::domain("digits", x, "(0, 1]"));
    }
    if m == 0 {
        return Err(Error::invalid("digit count must be at least 1"));
    }
    let mut out = Vec::with_capacity(m);
    let mut x = x;
    let mut terminating = false;
    while out.len() < m {
        let l = seq.branch_unchecked(x);
        out.push(l);
        let rest = (seq.t_unchecked(l) - x) / seq.a_unchecked(l);
        if rest <= 0.0 {
            terminating = true;
            break;
        }
        x = rest.min(1.0);
    }
    Ok(DigitSequence {
        digits: out,
        terminating,
    })
}

/// `t_{ℓ_1} − a_{ℓ_1}(t_{ℓ_2} − a_{ℓ_2}(t_{ℓ_3} − …))`, evaluated from the
/// last digit backwards.
pub fn from_digits(d: &DigitSequence, seq: &PartitionSequence) -> f64 {
    d.digits
        .iter()
        .rev()
        .fold(0.0, |rest, &l| seq.t_unchecked(l) - seq.a_unchecked(l) * rest)
}

/// `F_α` in digit coordinates.
pub fn farey_digit_action(d: &DigitSequence) -> DigitSequence {
    let mut digits = d.digits.clone();
    match digits.first().copied() {
        None => {}
        Some(1) => {
            digits.remove(0);
        }
        Some(l) => digits[0] = l - 1,
    }
    DigitSequence {
        digits,
        terminating: d.terminating,
    }
}

/// I.i.d. digits with `P(ℓ = k) = a_k`, by inverting `P(ℓ ≥ k) = t_k`.
#[derive(Debug, Clone, Copy)]
pub struct DigitSampler<'a> {
    seq: &'a PartitionSequence,
}

impl<'a> DigitSampler<'a> {
    pub fn new(seq: &'a PartitionSequence) -> Self {
        Self { seq }
    }

    /// Saturates at `u64::MAX`, reached with probability below `2^{-64β}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.seq.branch_unchecked(rng::open_closed(rng))
    }

    /// Like [`sample`](Self::sample) but as a real number, without the
    /// saturation (beyond `2^53` the value is the continuous inverse).
    pub fn sample_real<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w = rng::open_closed(rng);
        let guess = w.powf(-1.0 / self.seq.beta());
        if guess < 9.0e15 {
            self.seq.branch_unchecked(w) as f64
        } else {
            guess.floor()
        }
    }
}

/// `max_{n_min ≤ n ≤ n_max} ℓ_n^β / (ℓ_1 + … + ℓ_{n−1})`, streamed.
pub fn lemma_error_statistic<I>(digits: I, beta: f64, n_min: u64, n_max: u64) -> Result<f64>
where
    I: IntoIterator<Item = f64>,
{
    if n_min < 2 || n_min > n_max {
        return Err(Error::invalid(format!(
            "need 2 ≤ n_min ≤ n_max (got {n_min}, {n_max})"
        )));
    }
    let mut prefix = CompensatedSum::new();
    let mut best = 0.0f64;
    let mut n = 0u64;
    for l in digits.into_iter().take(n_max as usize) {
        n += 1;
        if n >= n_min {
            best = best.max(l.powf(beta) / prefix.value());
        }
        prefix.add(l);
    }
    if n < n_max {
        return Err(Error::invalid(format!("digit stream ended after {n} < {n_max} digits")));
    }
    Ok(best)
}

/// Sum-level masses `u_0..=u_k`: `u_0 = 1`, `u_j = Σ_{i=1}^{j} a_i u_{j−i}`.
pub fn sum_level_masses(k: usize, seq: &PartitionSequence) -> Vec<f64> {
    let a: Vec<f64> = (0..=k as u64)
        .map(|i| if i == 0 { 0.0 } else { seq.a_unchecked(i) })
        .collect();
    let mut u = Vec::with_capacity(k + 1);
    u.push(1.0);
    for j in 1..=k {
        let s: f64 = (1..=j).map(|i| a[i] * u[j - i]).sum();
        u.push(s);
    }
    u
}

/// `Leb(C_k)`, the mass of points whose digit partial sums hit `k`.
pub fn sum_level_mass(k: usize, seq: &PartitionSequence) -> f64 {
    sum_level_masses(k, seq)[k]
}

/// `u_k · Γ(2−β) Γ(β) · τ_k`, which tends to one.
pub fn renewal_asymptotic_ratio(u_k: f64, k: u64, seq: &PartitionSequence) -> f64 {
    let b = seq.beta();
    u_k * gamma(2.0 - b) * gamma(b) * seq.tau(k)
}

/// Largest residual `|u_j − Σ a_i u_{j−i}|` over `1 ≤ j < u.len()`.
pub fn renewal_residual(u: &[f64], seq: &PartitionSequence) -> f64 {
    (1..u.len())
        .map(|j| {
            let s: CompensatedSum = (1..=j).map(|i| seq.a_unchecked(i as u64) * u[j - i]).collect();
            (u[j] - s.value()).abs()
        })
        .fold(0.0, f64::max)
}

/// Monte Carlo frequencies with which digit partial sums hit each target,
/// over `streams` independent digit streams of `seed`.
pub fn hitting_frequencies(seq: &PartitionSequence, targets: &[u64], streams: u64, seed: u64) -> Vec<f64> {
    use rayon::prelude::*;
    let top = targets.iter().copied().max().unwrap_or(0);
    let sampler = DigitSampler::new(seq);
    let hits = (0..streams)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let mut s = 0u64;
            let mut hit = vec![0u64; targets.len()];
            while s < top {
                s = s.saturating_add(sampler.sample(&mut r));
                for (h, &t) in hit.iter_mut().zip(targets) {
                    if s == t {
                        *h = 1;
                    }
                }
            }
            hit
        })
        .reduce(
            || vec![0u64; targets.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    hits.into_iter().map(|h| h as f64 / streams as f64).collect()
}
