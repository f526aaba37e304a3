//! Bounded ("global") observables evaluated along orbits.
//!
//! An observable sees a [`Site`]: the real coordinate of the current state
//! and, for maps with a hitting-time partition, its level. Level-step
//! observables read the level directly; the others use the coordinate.
//! Tower points are handled by [`TowerObservable`].

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sequences::PartitionSequence;

/// Where an observable is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub x: f64,
    pub level: Option<u64>,
}

impl Site {
    pub fn real(x: f64) -> Self {
        Self { x, level: None }
    }

    pub fn leveled(x: f64, level: u64) -> Self {
        Self {
            x,
            level: Some(level),
        }
    }
}

pub trait Observable: Send + Sync {
    fn eval(&self, x: f64) -> Complex64;

    fn eval_site(&self, site: Site) -> Complex64 {
        self.eval(site.x)
    }

    /// Essential supremum of `|f|`.
    fn sup_norm(&self) -> f64;

    /// The claimed Birkhoff limit `f*`, when the observable carries one.
    fn limit(&self) -> Option<Complex64> {
        None
    }

    /// Whether the imaginary part is identically zero.
    fn is_real(&self) -> bool {
        false
    }
}

impl<O: Observable + ?Sized> Observable for Arc<O> {
    fn eval(&self, x: f64) -> Complex64 {
        (**self).eval(x)
    }
    fn eval_site(&self, site: Site) -> Complex64 {
        (**self).eval_site(site)
    }
    fn sup_norm(&self) -> f64 {
        (**self).sup_norm()
    }
    fn limit(&self) -> Option<Complex64> {
        (**self).limit()
    }
    fn is_real(&self) -> bool {
        (**self).is_real()
    }
}

impl<O: Observable + ?Sized> Observable for Box<O> {
    fn eval(&self, x: f64) -> Complex64 {
        (**self).eval(x)
    }
    fn eval_site(&self, site: Site) -> Complex64 {
        (**self).eval_site(site)
    }
    fn sup_norm(&self) -> f64 {
        (**self).sup_norm()
    }
    fn limit(&self) -> Option<Complex64> {
        (**self).limit()
    }
    fn is_real(&self) -> bool {
        (**self).is_real()
    }
}

/// `e^{2πiθ}` with `θ` reduced modulo one before the trigonometric call.
#[inline]
pub fn unit_phase(theta: f64) -> Complex64 {
    let (s, c) = (TAU * theta.rem_euclid(1.0)).sin_cos();
    Complex64::new(c, s)
}

/// `f(x) = e^{2πiωx}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    omega: f64,
}

impl Wave {
    pub fn new(omega: f64) -> Result<Self> {
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::domain("wave", omega, "finite ω ≠ 0"));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

impl Observable for Wave {
    #[inline]
    fn eval(&self, x: f64) -> Complex64 {
        unit_phase(self.omega * x)
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }

    fn limit(&self) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }
}

/// `g(x) = cos(2πωx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosWave(Wave);

impl CosWave {
    pub fn new(omega: f64) -> Result<Self> {
        Wave::new(omega).map(Self)
    }
}

impl Observable for CosWave {
    #[inline]
    fn eval(&self, x: f64) -> Complex64 {
        Complex64::new(self.0.eval(x).re, 0.0)
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }

    fn limit(&self) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }

    fn is_real(&self) -> bool {
        true
    }
}

/// How a level-step observable finds the level of a bare real point.
#[derive(Debug, Clone)]
pub enum LevelPartition {
    /// `L_k = [τ_k, τ_{k+1})` of an expansive partition.
    Alpha(Arc<PartitionSequence>),
    /// `L_k = [ln(k+1), ln(k+2))` of the Farey map on `ℝ⁺`.
    Farey,
}

impl LevelPartition {
    pub fn level_of(&self, x: f64) -> Option<u64> {
        match self {
            LevelPartition::Alpha(seq) => seq.level_of(x).ok(),
            LevelPartition::Farey => crate::maps::FareyLine::from_real(x).ok().map(|p| p.level),
        }
    }
}

type LevelFn = dyn Fn(u64) -> Complex64 + Send + Sync;

enum Coefficients {
    Periodic(Vec<Complex64>),
    Sequence(Box<LevelFn>),
}

/// A step function on the levels: `f|_{L_k} ≡ c_k`.
pub struct LevelStep {
    coeffs: Coefficients,
    limit: Complex64,
    bound: f64,
    partition: Option<LevelPartition>,
}

impl fmt::Debug for LevelStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.coeffs {
            Coefficients::Periodic(c) => format!("periodic({})", c.len()),
            Coefficients::Sequence(_) => "sequence".to_string(),
        };
        f.debug_struct("LevelStep")
            .field("kind", &kind)
            .field("limit", &self.limit)
            .field("bound", &self.bound)
            .finish()
    }
}

impl LevelStep {
    /// `c_{k mod N}` with `f* = (1/N) Σ c_k`.
    pub fn periodic(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("level_step_periodic needs at least one coefficient"));
        }
        let n = coeffs.len() as f64;
        let limit = coeffs.iter().sum::<Complex64>() / n;
        let bound = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        Ok(Self {
            coeffs: Coefficients::Periodic(coeffs),
            limit,
            bound,
            partition: None,
        })
    }

    /// An arbitrary bounded sequence `k ↦ c_k` with its declared Cesàro
    /// limit and a bound on `|c_k|`.
    pub fn sequence<F>(generator: F, limit: Complex64, bound: f64) -> Self
    where
        F: Fn(u64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            coeffs: Coefficients::Sequence(Box::new(generator)),
            limit,
            bound,
            partition: None,
        }
    }

    /// Indicator of the levels `0..count`.
    pub fn lower_levels(count: u64) -> Self {
        Self::sequence(
            move |k| Complex64::new(if k < count { 1.0 } else { 0.0 }, 0.0),
            Complex64::new(0.0, 0.0),
            1.0,
        )
    }

    /// Attaches the partition used to evaluate at bare real points.
    pub fn with_partition(mut self, partition: LevelPartition) -> Self {
        self.partition = Some(partition);
        self
    }

    #[inline]
    pub fn at_level(&self, k: u64) -> Complex64 {
        match &self.coeffs {
            Coefficients::Periodic(c) => c[(k % c.len() as u64) as usize],
            Coefficients::Sequence(g) => g(k),
        }
    }
}

impl Observable for LevelStep {
    /// # Panics
    /// If no partition was attached and the step is not constant.
    fn eval(&self, x: f64) -> Complex64 {
        if let Coefficients::Periodic(c) = &self.coeffs {
            if c.len() == 1 {
                return c[0];
            }
        }
        let partition = self
            .partition
            .as_ref()
            .expect("level step evaluated at a bare real point without a partition");
        let k = partition
            .level_of(x)
            .expect("point outside the level partition");
        self.at_level(k)
    }

    #[inline]
    fn eval_site(&self, site: Site) -> Complex64 {
        match site.level {
            Some(k) => self.at_level(k),
            None => self.eval(site.x),
        }
    }

    fn sup_norm(&self) -> f64 {
        self.bound
    }

    fn limit(&self) -> Option<Complex64> {
        Some(self.limit)
    }
}

/// `1_{[a, ∞)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineIndicator {
    pub a: f64,
}

impl HalfLineIndicator {
    pub fn new(a: f64) -> Self {
        Self { a }
    }
}

impl Observable for HalfLineIndicator {
    #[inline]
    fn eval(&self, x: f64) -> Complex64 {
        Complex64::new(if x >= self.a { 1.0 } else { 0.0 }, 0.0)
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }

    fn is_real(&self) -> bool {
        true
    }
}

/// `c + s·1_{[lo, hi)}`: an integrable bump on top of a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStep {
    pub lo: f64,
    pub hi: f64,
    pub height: f64,
    pub background: f64,
}

impl IntervalStep {
    pub fn indicator(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            height: 1.0,
            background: 0.0,
        }
    }
}

impl Observable for IntervalStep {
    #[inline]
    fn eval(&self, x: f64) -> Complex64 {
        let inside = if x >= self.lo && x < self.hi { self.height } else { 0.0 };
        Complex64::new(self.background + inside, 0.0)
    }

    fn sup_norm(&self) -> f64 {
        self.background.abs().max((self.background + self.height).abs())
    }

    fn limit(&self) -> Option<Complex64> {
        Some(Complex64::new(self.background, 0.0))
    }

    fn is_real(&self) -> bool {
        true
    }
}

/// The wave `e^{2πiωx}` with its wavelengths stretched to end exactly on
/// level boundaries.
///
/// With `k_j` the level containing `j/ω`, the `j`-th wavelength is
/// `I_j = [τ_{k_j}, τ_{k_{j+1}})` and on it
/// `g(x) = e^{2πi ω_j (x − τ_{k_j})}` with `ω_j = 1/Leb(I_j)`.
#[derive(Debug, Clone)]
pub struct AdaptedWave {
    omega: f64,
    seq: Arc<PartitionSequence>,
    /// `k_j` for `j = 0..`; eagerly built.
    starts: Vec<u64>,
}

impl AdaptedWave {
    /// Wavelength boundaries are cached for `x ≤ max_x`; further out they
    /// are computed on demand.
    pub fn new(omega: f64, seq: Arc<PartitionSequence>, max_x: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::domain("adapted_wave", omega, "(0, 1)"));
        }
        let j_max = (omega * max_x.max(0.0)).ceil() as u64 + 1;
        let mut starts = Vec::with_capacity(j_max as usize + 1);
        for j in 0..=j_max {
            starts.push(seq.level_of(j as f64 / omega)?);
        }
        Ok(Self { omega, seq, starts })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `k_j`, the level containing `j/ω`.
    pub fn start_level(&self, j: u64) -> u64 {
        match self.starts.get(j as usize) {
            Some(&k) => k,
            None => self
                .seq
                .level_of(j as f64 / self.omega)
                .expect("wavelength start beyond representable levels"),
        }
    }

    /// The wavelength `I_j` as `(τ_{k_j}, τ_{k_{j+1}})`.
    pub fn wavelength(&self, j: u64) -> (f64, f64) {
        (
            self.seq.tau(self.start_level(j)),
            self.seq.tau(self.start_level(j + 1)),
        )
    }

    /// Number of levels `r_j = k_{j+1} − k_j` in `I_j`.
    pub fn levels_in(&self, j: u64) -> u64 {
        self.start_level(j + 1) - self.start_level(j)
    }

    /// `ω_j = 1/Leb(I_j)`.
    pub fn local_frequency(&self, j: u64) -> f64 {
        let (a, b) = self.wavelength(j);
        1.0 / (b - a)
    }

    /// The `j` with `k_j ≤ k < k_{j+1}`.
    pub fn wavelength_index(&self, k: u64) -> u64 {
        let cached = self.starts.partition_point(|&kj| kj <= k);
        if cached < self.starts.len() {
            return cached as u64 - 1;
        }
        // k_j ≤ k  ⟺  j/ω < τ_{k+1}
        let mut j = ((self.omega * self.seq.tau(k + 1)).ceil() as u64).saturating_sub(1);
        while j > 0 && self.start_level(j) > k {
            j -= 1;
        }
        while self.start_level(j + 1) <= k {
            j += 1;
        }
        j
    }

    fn eval_at(&self, x: f64, level: u64) -> Complex64 {
        let j = self.wavelength_index(level);
        let (a, b) = self.wavelength(j);
        unit_phase((x - a) / (b - a))
    }

    /// `sup_{x ∈ I_j} |f(x) − g(x)|`, exactly: the phase mismatch is affine
    /// on `I_j`, so the supremum is attained at an endpoint.
    pub fn wavelength_deviation(&self, j: u64) -> f64 {
        let (a, b) = self.wavelength(j);
        let left = self.omega * a - j as f64;
        let right = self.omega * b - (j + 1) as f64;
        let chord = |d: f64| 2.0 * (std::f64::consts::PI * d.abs().min(0.5)).sin();
        chord(left).max(chord(right))
    }

    /// A level `K = k_{j_0}` beyond which `|f − g| < ε` everywhere.
    ///
    /// On `I_j` the phase mismatch is at most `ω·Leb(L_{k_j})`, which
    /// decreases in `j`; the first `j` where the resulting chord bound drops
    /// below `ε` gives `K`.
    pub fn tail_level(&self, eps: f64) -> Result<u64> {
        if !(eps > 0.0) {
            return Err(Error::domain("tail_level", eps, "ε > 0"));
        }
        let bound = |k: u64| {
            let d = (self.omega * self.seq.t_unchecked(k + 1)).min(0.5);
            2.0 * (std::f64::consts::PI * d).sin()
        };
        if bound(0) < eps {
            return Ok(0);
        }
        // exponential then binary search on j
        let mut hi = 1u64;
        while bound(self.start_level(hi)) >= eps {
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if bound(self.start_level(mid)) >= eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(self.start_level(hi))
    }
}

impl Observable for AdaptedWave {
    fn eval(&self, x: f64) -> Complex64 {
        let k = self.seq.level_of(x).expect("adapted wave evaluated outside ℝ⁺");
        self.eval_at(x, k)
    }

    fn eval_site(&self, site: Site) -> Complex64 {
        match site.level {
            Some(k) => self.eval_at(site.x, k),
            None => self.eval(site.x),
        }
    }

    fn sup_norm(&self) -> f64 {
        1.0
    }

    fn limit(&self) -> Option<Complex64> {
        Some(Complex64::new(0.0, 0.0))
    }
}

/// An observable given by a closure over sites.
pub struct FnObservable<F> {
    f: F,
    bound: f64,
    limit: Option<Complex64>,
}

impl<F> FnObservable<F>
where
    F: Fn(Site) -> Complex64 + Send + Sync,
{
    pub fn new(f: F, bound: f64, limit: Option<Complex64>) -> Self {
        Self { f, bound, limit }
    }
}

impl<F> Observable for FnObservable<F>
where
    F: Fn(Site) -> Complex64 + Send + Sync,
{
    fn eval(&self, x: f64) -> Complex64 {
        (self.f)(Site::real(x))
    }

    fn eval_site(&self, site: Site) -> Complex64 {
        (self.f)(site)
    }

    fn sup_norm(&self) -> f64 {
        self.bound
    }

    fn limit(&self) -> Option<Complex64> {
        self.limit
    }
}

/// Observables on tower points `(base, level)`.
pub trait TowerObservable<B>: Send + Sync {
    fn eval_tower(&self, base: &B, level: u64) -> Complex64;
}

impl<B> TowerObservable<B> for LevelStep {
    fn eval_tower(&self, _base: &B, level: u64) -> Complex64 {
        self.at_level(level)
    }
}

type BaseFn<B> = dyn Fn(&B) -> f64 + Send + Sync;

/// `f(x, n) = e^{2πi(ω(x)n + γ(x))}` with `δ ≤ ω(x) ≤ 1 − δ`.
pub struct TowerWave<B> {
    omega: Box<BaseFn<B>>,
    gamma: Box<BaseFn<B>>,
    delta: f64,
}

impl<B> TowerWave<B> {
    pub fn new<W, G>(omega: W, gamma: G, delta: f64) -> Result<Self>
    where
        W: Fn(&B) -> f64 + Send + Sync + 'static,
        G: Fn(&B) -> f64 + Send + Sync + 'static,
    {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::domain("tower_wave", delta, "δ ∈ (0, 1/2)"));
        }
        Ok(Self {
            omega: Box::new(omega),
            gamma: Box::new(gamma),
            delta,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Whether `ω(base)` lies in `[δ, 1 − δ]`.
    pub fn frequency_in_range(&self, base: &B) -> bool {
        let w = (self.omega)(base);
        w >= self.delta && w <= 1.0 - self.delta
    }

    /// `|1 − e^{-2πiδ}|`, the constant `c(δ)` bounding the geometric sums
    /// from below.
    pub fn geometric_constant(&self) -> f64 {
        2.0 * (std::f64::consts::PI * self.delta).sin()
    }
}

impl<B> TowerObservable<B> for TowerWave<B> {
    fn eval_tower(&self, base: &B, level: u64) -> Complex64 {
        let w = (self.omega)(base);
        debug_assert!(w >= self.delta && w <= 1.0 - self.delta);
        // reduce ω·n before adding γ; n can be large
        let phase = (w * level as f64).rem_euclid(1.0) + (self.gamma)(base);
        unit_phase(phase)
    }
}
