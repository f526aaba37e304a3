//! Concrete Lebesgue- (or `μ_α`-) preserving maps: Boole's transformation,
//! the Farey map on `[0,1]` and on `ℝ⁺`, the α-Farey map `F_α` and its
//! half-line conjugate `T_β`.
//!
//! The half-line maps are iterated in level/offset coordinates
//! ([`OrbitPoint`]). On every level `L_k`, `k ≥ 1`, both maps are a single
//! increasing branch onto `L_{k-1}` that preserves the relative offset, so a
//! descent step only decrements the level. Real coordinates are
//! materialised when an observable needs them.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result, Singularity};
use crate::observables::Site;
use crate::sequences::PartitionSequence;

/// Threshold above which `ln(e^x − 1)` is evaluated as `x + ln(1 − e^{-x})`.
pub const FAREY_ASYMPTOTIC_THRESHOLD: f64 = 30.0;

/// Largest representable offset strictly below one.
const OFFSET_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
fn clamp_offset(u: f64) -> f64 {
    u.clamp(0.0, OFFSET_MAX)
}

fn singular(kind: Singularity) -> Error {
    Error::Singular { kind, step: 0 }
}

/// A map iterated by the Birkhoff engine.
pub trait Dynamics: Sync {
    type State: Clone + Send + fmt::Debug;

    /// One application of the map. Reaching a pole or the fixed point at the
    /// origin is reported as [`Error::Singular`] with `step = 0`; the engine
    /// fills in the real step index.
    fn step(&self, state: &Self::State) -> Result<Self::State>;

    /// Real coordinate (and level, when the map has one) of a state.
    fn site(&self, state: &Self::State) -> Site;

    fn name(&self) -> String;
}

/// A point `x = τ_k + u·Leb(L_k)` of the half-line, stored as its level `k`
/// and relative offset `u ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitPoint {
    pub level: u64,
    pub offset: f64,
}

impl OrbitPoint {
    pub fn new(level: u64, offset: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&offset) {
            return Err(Error::domain("OrbitPoint::new", offset, "[0, 1)"));
        }
        Ok(Self { level, offset })
    }

    /// Point of `L_0` (where `x` and the offset coincide).
    pub fn base(u: f64) -> Result<Self> {
        Self::new(0, u)
    }
}

/// `τ_k + u·t_{k+1}`.
pub fn to_real(p: OrbitPoint, seq: &PartitionSequence) -> f64 {
    seq.tau(p.level) + p.offset * seq.t_unchecked(p.level + 1)
}

/// `|x − y|` for two half-line points, computed without cancellation when
/// both share a level.
pub fn distance(p: OrbitPoint, q: OrbitPoint, seq: &PartitionSequence) -> f64 {
    if p.level == q.level {
        (p.offset - q.offset).abs() * seq.t_unchecked(p.level + 1)
    } else {
        (to_real(p, seq) - to_real(q, seq)).abs()
    }
}

/// Half-line point of a real `x ≥ 0` under the partition of `seq`.
pub fn from_real(x: f64, seq: &PartitionSequence) -> Result<OrbitPoint> {
    let level = seq.level_of(x)?;
    let u = (x - seq.tau(level)) / seq.t_unchecked(level + 1);
    Ok(OrbitPoint {
        level,
        offset: clamp_offset(u),
    })
}

/// Boole's transformation `x ↦ x − 1/x`.
pub fn boole_step(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("boole_step", x, "finite reals"));
    }
    if x == 0.0 {
        return Err(singular(Singularity::Pole));
    }
    Ok(x - 1.0 / x)
}

/// The Farey map on `[0, 1]`.
pub fn farey_unit(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("farey_unit", x, "[0, 1]"));
    }
    Ok(if x <= 0.5 { x / (1.0 - x) } else { (1.0 - x) / x })
}

/// The Farey map transported to the half-line, `|ln(e^x − 1)|`.
pub fn farey_line(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("farey_line", x, "(0, ∞)"));
    }
    if x <= FAREY_ASYMPTOTIC_THRESHOLD {
        Ok(x.exp_m1().ln().abs())
    } else {
        Ok(x + (-(-x).exp()).ln_1p())
    }
}

/// The α-Farey map `F_α` on `[0, 1]` for the partition of `seq`.
pub fn alpha_farey_unit(x: f64, seq: &PartitionSequence) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain("alpha_farey_unit", x, "[0, 1]"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let m = seq.branch_unchecked(x);
    let y = if m == 1 {
        (1.0 - x) / seq.a_unchecked(1)
    } else {
        seq.a_unchecked(m - 1) * (x - seq.t_unchecked(m + 1)) / seq.a_unchecked(m)
            + seq.t_unchecked(m)
    };
    Ok(y.clamp(0.0, 1.0))
}

/// `Φ(y) = μ_α([y, 1])` as a half-line point: `A_m` is mapped decreasingly
/// onto `L_{m-1}`.
pub fn phi_orbit_point(y: f64, seq: &PartitionSequence) -> Result<OrbitPoint> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::domain("phi_unit_to_line", y, "(0, 1]"));
    }
    let m = seq.branch_unchecked(y);
    Ok(OrbitPoint {
        level: m - 1,
        offset: clamp_offset((seq.t_unchecked(m) - y) / seq.a_unchecked(m)),
    })
}

/// `Φ(y) = τ_{m−1} + (t_m − y)·t_m/a_m` for `y ∈ A_m`.
pub fn phi_unit_to_line(y: f64, seq: &PartitionSequence) -> Result<f64> {
    phi_orbit_point(y, seq).map(|p| to_real(p, seq))
}

/// `Φ^{-1}` on half-line points: `y = t_{k+1} − u·a_{k+1}`.
pub fn phi_inverse(p: OrbitPoint, seq: &PartitionSequence) -> f64 {
    let m = p.level + 1;
    seq.t_unchecked(m) - p.offset * seq.a_unchecked(m)
}

/// One step of `T_β = Φ ∘ F_α ∘ Φ^{-1}`.
///
/// The origin `(0, 0)` is the fixed point; it is reported as
/// [`Singularity::FixedPoint`] (its image would be `(0, 0)` again).
pub fn alpha_farey_line_step(p: OrbitPoint, seq: &PartitionSequence) -> Result<OrbitPoint> {
    if p.level >= 1 {
        return Ok(OrbitPoint {
            level: p.level - 1,
            offset: p.offset,
        });
    }
    let u = p.offset;
    if u == 0.0 {
        return Err(singular(Singularity::FixedPoint));
    }
    let m = seq.branch_unchecked(u);
    Ok(OrbitPoint {
        level: m - 1,
        offset: clamp_offset((seq.t_unchecked(m) - u) / seq.a_unchecked(m)),
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Boole;

impl Dynamics for Boole {
    type State = f64;

    fn step(&self, x: &f64) -> Result<f64> {
        boole_step(*x)
    }

    fn site(&self, x: &f64) -> Site {
        Site::real(*x)
    }

    fn name(&self) -> String {
        "boole".into()
    }
}

/// The Farey map on `[0, 1]`; `0` is flagged as the indifferent fixed point.
#[derive(Debug, Clone, Copy, Default)]
pub struct FareyUnit;

impl Dynamics for FareyUnit {
    type State = f64;

    fn step(&self, x: &f64) -> Result<f64> {
        if *x == 0.0 {
            return Err(singular(Singularity::FixedPoint));
        }
        farey_unit(*x)
    }

    fn site(&self, x: &f64) -> Site {
        // Levels of the unit Farey map are the cells (1/(k+2), 1/(k+1)].
        let level = if *x > 0.0 {
            Some(((1.0 / *x).floor() as u64).max(1) - 1)
        } else {
            None
        };
        Site { x: *x, level }
    }

    fn name(&self) -> String {
        "farey_unit".into()
    }
}

/// The Farey map on `ℝ⁺` in level/offset coordinates:
/// `x = ln(k + 1 + s)` for level `k` and offset `s ∈ [0, 1)`, so that
/// `L_k = [ln(k+1), ln(k+2))`. Descent keeps `s`; from `L_0` the new state
/// is `(⌊1/s⌋ − 1, frac(1/s))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FareyLine;

impl FareyLine {
    pub fn to_real(p: OrbitPoint) -> f64 {
        let n = (p.level as f64) + 1.0;
        n.ln() + (p.offset / n).ln_1p()
    }

    pub fn from_real(x: f64) -> Result<OrbitPoint> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::domain("FareyLine::from_real", x, "[0, ∞)"));
        }
        if x >= 43.0 {
            return Err(Error::domain("FareyLine::from_real", x, "[0, 43)"));
        }
        // e^x = k + 1 + s
        let e = x.exp();
        let mut k = (e.floor() as u64).max(1) - 1;
        while k > 0 && ((k + 1) as f64).ln() > x {
            k -= 1;
        }
        while ((k + 2) as f64).ln() <= x {
            k += 1;
        }
        let s = if k == 0 { x.exp_m1() } else { e - (k + 1) as f64 };
        Ok(OrbitPoint {
            level: k,
            offset: clamp_offset(s),
        })
    }

    pub fn step_point(p: OrbitPoint) -> Result<OrbitPoint> {
        if p.level >= 1 {
            return Ok(OrbitPoint {
                level: p.level - 1,
                offset: p.offset,
            });
        }
        if p.offset == 0.0 {
            return Err(singular(Singularity::FixedPoint));
        }
        let r = 1.0 / p.offset;
        let whole = r.floor();
        if whole >= u64::MAX as f64 {
            return Ok(OrbitPoint {
                level: u64::MAX,
                offset: 0.0,
            });
        }
        Ok(OrbitPoint {
            level: whole as u64 - 1,
            offset: clamp_offset(r - whole),
        })
    }
}

impl Dynamics for FareyLine {
    type State = OrbitPoint;

    fn step(&self, p: &OrbitPoint) -> Result<OrbitPoint> {
        Self::step_point(*p)
    }

    fn site(&self, p: &OrbitPoint) -> Site {
        Site::leveled(Self::to_real(*p), p.level)
    }

    fn name(&self) -> String {
        "farey_line".into()
    }
}

/// `F_α` on `[0, 1]`. The site level of `y ∈ A_m` is `m − 1`, matching the
/// level of `Φ(y)`.
#[derive(Debug, Clone)]
pub struct AlphaFareyUnit {
    seq: Arc<PartitionSequence>,
}

impl AlphaFareyUnit {
    pub fn new(seq: Arc<PartitionSequence>) -> Self {
        Self { seq }
    }
}

impl Dynamics for AlphaFareyUnit {
    type State = f64;

    fn step(&self, x: &f64) -> Result<f64> {
        if *x == 0.0 {
            return Err(singular(Singularity::FixedPoint));
        }
        alpha_farey_unit(*x, &self.seq)
    }

    fn site(&self, x: &f64) -> Site {
        let level = (*x > 0.0).then(|| self.seq.branch_unchecked(*x) - 1);
        Site { x: *x, level }
    }

    fn name(&self) -> String {
        format!("alpha_farey_unit(beta={})", self.seq.beta())
    }
}

/// `T_β` on `ℝ⁺`.
#[derive(Debug, Clone)]
pub struct AlphaFareyLine {
    seq: Arc<PartitionSequence>,
}

impl AlphaFareyLine {
    pub fn new(seq: Arc<PartitionSequence>) -> Self {
        Self { seq }
    }

    pub fn with_beta(beta: f64) -> Result<Self> {
        Ok(Self::new(Arc::new(PartitionSequence::new(beta)?)))
    }

    pub fn sequence(&self) -> &Arc<PartitionSequence> {
        &self.seq
    }

    pub fn point(&self, x: f64) -> Result<OrbitPoint> {
        from_real(x, &self.seq)
    }
}

impl Dynamics for AlphaFareyLine {
    type State = OrbitPoint;

    #[inline]
    fn step(&self, p: &OrbitPoint) -> Result<OrbitPoint> {
        alpha_farey_line_step(*p, &self.seq)
    }

    #[inline]
    fn site(&self, p: &OrbitPoint) -> Site {
        Site::leveled(to_real(*p, &self.seq), p.level)
    }

    fn name(&self) -> String {
        format!("alpha_farey_line(beta={})", self.seq.beta())
    }
}

/// Which concrete map a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Boole,
    FareyUnit,
    FareyLine,
    AlphaFareyUnit,
    AlphaFareyLine,
}

/// A map kind with its exponent, validated at construction.
#[derive(Debug, Clone)]
pub struct MapDescriptor {
    pub kind: MapKind,
    pub seq: Option<Arc<PartitionSequence>>,
}

impl MapDescriptor {
    pub fn new(kind: MapKind, beta: Option<f64>) -> Result<Self> {
        let needs_seq = matches!(kind, MapKind::AlphaFareyUnit | MapKind::AlphaFareyLine);
        let seq = match (needs_seq, beta) {
            (true, Some(b)) => Some(Arc::new(PartitionSequence::new(b)?)),
            (true, None) => {
                return Err(Error::invalid(format!("{kind:?} requires beta in (0, 1]")))
            }
            (false, Some(_)) => {
                return Err(Error::invalid(format!("{kind:?} takes no beta")));
            }
            (false, None) => None,
        };
        Ok(Self { kind, seq })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn seq(beta: f64) -> PartitionSequence {
        PartitionSequence::new(beta).unwrap()
    }

    #[test]
    fn boole_examples() {
        assert_eq!(boole_step(1.0).unwrap(), 0.0);
        assert_eq!(boole_step(2.0).unwrap(), 1.5);
        assert_eq!(boole_step(-1.0).unwrap(), 0.0);
        assert!(matches!(
            boole_step(0.0),
            Err(Error::Singular {
                kind: Singularity::Pole,
                ..
            })
        ));
    }

    #[test]
    fn boole_preimage_identity() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        for _ in 0..10_000 {
            let y: f64 = rng.gen_range(-50.0..50.0);
            let r = (y * y + 4.0).sqrt();
            let (xp, xm) = ((y + r) / 2.0, (y - r) / 2.0);
            assert!((boole_step(xp).unwrap() - y).abs() < 1e-9 * (1.0 + y.abs()));
            let dt = |x: f64| 1.0 + 1.0 / (x * x);
            assert!((1.0 / dt(xp) + 1.0 / dt(xm) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn farey_unit_examples() {
        assert_eq!(farey_unit(0.5).unwrap(), 1.0);
        assert_eq!(farey_unit(1.0).unwrap(), 0.0);
        assert_relative_eq!(farey_unit(1.0 / 3.0).unwrap(), 0.5, max_relative = 1e-15);
        assert!(farey_unit(1.5).is_err());
    }

    #[test]
    fn farey_line_examples() {
        let ln2 = 2f64.ln();
        assert!(farey_line(ln2).unwrap().abs() < 1e-15);
        assert_relative_eq!(farey_line(3f64.ln()).unwrap(), ln2, max_relative = 1e-14);
        assert_relative_eq!(farey_line(1.5f64.ln()).unwrap(), ln2, max_relative = 1e-14);
        assert!(farey_line(0.0).is_err());
        assert!(farey_line(-1.0).is_err());
    }

    #[test]
    fn farey_line_conjugates_unit_farey() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
        for _ in 0..10_000 {
            let y: f64 = rng.gen_range(0.01..1.0);
            let lhs = farey_line(-y.ln()).unwrap();
            let rhs = -farey_unit(y).unwrap().ln();
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()), "y={y}");
        }
    }

    #[test]
    fn farey_line_asymptotic_regime() {
        for i in 0..=1000 {
            let x = 700.0 + i as f64 * 9.3;
            assert_eq!(farey_line(x).unwrap(), x + (-(-x).exp()).ln_1p());
        }
        let below = farey_line(FAREY_ASYMPTOTIC_THRESHOLD).unwrap();
        let above = farey_line(FAREY_ASYMPTOTIC_THRESHOLD.next_up()).unwrap();
        let ulp = FAREY_ASYMPTOTIC_THRESHOLD * f64::EPSILON;
        assert!((above - below).abs() <= 4.0 * ulp);
    }

    #[test]
    fn farey_line_points_follow_the_real_map() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(1e-3..20.0);
            let p = FareyLine::from_real(x).unwrap();
            assert_relative_eq!(FareyLine::to_real(p), x, max_relative = 1e-13);
            let next = FareyLine::step_point(p).unwrap();
            let want = farey_line(x).unwrap();
            let got = FareyLine::to_real(next);
            // the L_0 branch expands by 1/s, so compare relative to that
            let scale = if p.level == 0 { 1.0 / p.offset } else { 1.0 };
            assert!((got - want).abs() < 1e-12 * scale * (1.0 + want), "x={x}");
        }
    }

    #[test]
    fn alpha_farey_unit_examples() {
        let s = seq(0.5);
        assert_eq!(alpha_farey_unit(1.0, &s).unwrap(), 0.0);
        assert_relative_eq!(alpha_farey_unit(s.t(2).unwrap(), &s).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(
            alpha_farey_unit(s.t(3).unwrap(), &s).unwrap(),
            s.t(2).unwrap(),
            max_relative = 1e-14
        );
        assert_eq!(alpha_farey_unit(0.0, &s).unwrap(), 0.0);
        assert!(alpha_farey_unit(-0.1, &s).is_err());
    }

    #[test]
    fn line_step_examples() {
        let s = seq(0.5);
        let p = OrbitPoint::new(5, 0.3).unwrap();
        assert_eq!(alpha_farey_line_step(p, &s).unwrap(), OrbitPoint::new(4, 0.3).unwrap());

        let q = alpha_farey_line_step(OrbitPoint::base(s.t(2).unwrap()).unwrap(), &s).unwrap();
        assert_eq!(q.level, 1);
        assert!(q.offset < 1e-15);
        assert_relative_eq!(to_real(q, &s), 1.0, max_relative = 1e-14);

        let r = alpha_farey_line_step(OrbitPoint::base(0.9).unwrap(), &s).unwrap();
        assert_eq!(r.level, 0);
        // (1 - 0.9)/(1 - 2^{-1/2}), evaluated by hand
        assert_relative_eq!(r.offset, 0.341_421_356_237_309_5, max_relative = 1e-12);

        assert!(matches!(
            alpha_farey_line_step(OrbitPoint::base(0.0).unwrap(), &s),
            Err(Error::Singular {
                kind: Singularity::FixedPoint,
                ..
            })
        ));
    }

    #[test]
    fn to_real_examples() {
        let s = seq(0.5);
        assert_eq!(to_real(OrbitPoint::new(0, 0.0).unwrap(), &s), 0.0);
        assert_eq!(to_real(OrbitPoint::new(1, 0.0).unwrap(), &s), 1.0);
        let want = 1.0 + 0.5f64.sqrt() + 0.5 / 3f64.sqrt();
        assert_relative_eq!(to_real(OrbitPoint::new(2, 0.5).unwrap(), &s), want, max_relative = 1e-15);
        assert_relative_eq!(want, 1.995_781_915_781_360_3, max_relative = 1e-15);
        assert!(OrbitPoint::new(0, 1.0).is_err());
    }

    #[test]
    fn phi_examples() {
        let s = seq(0.5);
        assert_eq!(phi_unit_to_line(1.0, &s).unwrap(), 0.0);
        assert_relative_eq!(phi_unit_to_line(s.t(2).unwrap(), &s).unwrap(), 1.0, max_relative = 1e-14);
        assert!(phi_unit_to_line(0.0, &s).is_err());
    }

    /// Φ(t_{m+1}) is the left limit τ_m; compare against a midpoint-rule
    /// quadrature of the density h_α = Σ (t_k/a_k) 1_{A_k} over [t_{m+1}, 1].
    #[test]
    fn phi_matches_density_quadrature() {
        let s = seq(0.5);
        let density = |y: f64| {
            let k = s.branch_of_unit(y).unwrap();
            s.t(k).unwrap() / s.a(k).unwrap()
        };
        for m in 1..=10u64 {
            let lo = s.t(m + 1).unwrap();
            // integrate cell by cell so the integrand is constant on each piece
            let mut integral = 0.0;
            for k in 1..=m {
                let (a, b) = (s.t(k + 1).unwrap(), s.t(k).unwrap());
                let n = 64;
                let h = (b - a) / n as f64;
                integral += (0..n).map(|i| density(a + (i as f64 + 0.5) * h) * h).sum::<f64>();
            }
            assert_relative_eq!(integral, s.tau(m), max_relative = 1e-12);
            // just inside A_m the map is within one cell width of τ_m
            let inside = phi_unit_to_line(lo.next_up(), &s).unwrap();
            assert!((inside - s.tau(m)).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn phi_inverse_round_trip() {
        let s = seq(0.35);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        for _ in 0..10_000 {
            let y: f64 = rng.gen_range(0.05..1.0);
            let p = phi_orbit_point(y, &s).unwrap();
            assert!((phi_inverse(p, &s) - y).abs() < 1e-14);
        }
    }

    /// Φ∘F_α against T_β∘Φ. Rounding F_α(y) to a double moves it by up to
    /// half an ulp, which Φ stretches by its slope t_m/a_m; the comparison
    /// allows that much on top of the fixed tolerance.
    #[test]
    fn conjugacy_on_random_points() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(77);
        for &beta in &[0.35, 0.5, 0.65, 0.98] {
            let s = seq(beta);
            for _ in 0..10_000 {
                let y: f64 = 1.0 - rng.gen::<f64>();
                let z = alpha_farey_unit(y, &s).unwrap();
                let rhs = alpha_farey_line_step(phi_orbit_point(y, &s).unwrap(), &s).unwrap();
                let Ok(lhs) = phi_orbit_point(z, &s) else {
                    // F_α(1) = 0 is outside the domain of Φ
                    assert_eq!(y, 1.0);
                    continue;
                };
                let m = s.branch_of_unit(z).unwrap();
                let slope = s.t(m).unwrap() / s.a(m).unwrap();
                let rounding = 4.0 * f64::EPSILON * z * slope;
                let err = distance(lhs, rhs, &s);
                assert!(err < 1e-9 + rounding, "beta={beta} y={y} err={err} rounding={rounding}");
            }
        }
    }

    #[test]
    fn branch_reciprocal_slopes_sum_to_one() {
        for &beta in &[0.35, 0.5, 0.98] {
            let s = seq(beta);
            for k in 1..=10_000u64 {
                // descent branch L_k -> L_{k-1} has slope t_k/t_{k+1};
                // the L_0 branch onto L_{k-1} has slope t_k/a_k.
                let t_k = s.t(k).unwrap();
                let sum = s.t(k + 1).unwrap() / t_k + s.a(k).unwrap() / t_k;
                assert!((sum - 1.0).abs() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn alpha_farey_preserves_its_density() {
        let s = seq(0.5);
        let h = |y: f64| {
            let k = s.branch_of_unit(y).unwrap();
            s.t(k).unwrap() / s.a(k).unwrap()
        };
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
        for _ in 0..1_000 {
            let y: f64 = rng.gen_range(0.05..1.0);
            let j = s.branch_of_unit(y).unwrap();
            let mut prev_err = f64::INFINITY;
            for max_branch in [1u64, j, j + 1, j + 10] {
                let mut transfer = 0.0;
                for m in 1..=max_branch {
                    // preimage of y in A_m, when y lies in the image of that branch
                    let (pre, inv_slope) = if m == 1 {
                        (1.0 - s.a(1).unwrap() * y, s.a(1).unwrap())
                    } else if m == j + 1 {
                        let (am, am1) = (s.a(m).unwrap(), s.a(m - 1).unwrap());
                        ((y - s.t(m).unwrap()) * am / am1 + s.t(m + 1).unwrap(), am / am1)
                    } else {
                        continue;
                    };
                    transfer += h(pre) * inv_slope;
                }
                let err = (transfer - h(y)).abs();
                assert!(err <= prev_err + 1e-12);
                prev_err = err;
            }
            assert!(prev_err < 1e-10, "y={y}");
        }
    }

    #[test]
    fn descent_reaches_base_in_k_steps() {
        let s = seq(0.5);
        let start = OrbitPoint::new(37, 0.123).unwrap();
        let mut p = start;
        for i in 0..37 {
            assert_eq!(p.level, 37 - i);
            p = alpha_farey_line_step(p, &s).unwrap();
        }
        assert_eq!(p, OrbitPoint::new(0, 0.123).unwrap());
    }

    #[test]
    fn orbit_point_real_round_trip() {
        let s = seq(0.35);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(12);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(0.0..1e4);
            let p = from_real(x, &s).unwrap();
            assert!((to_real(p, &s) - x).abs() <= 4.0 * f64::EPSILON * x.max(1.0));
        }
    }

    #[test]
    fn descriptor_validation() {
        assert!(MapDescriptor::new(MapKind::AlphaFareyLine, None).is_err());
        assert!(MapDescriptor::new(MapKind::Boole, Some(0.5)).is_err());
        assert!(MapDescriptor::new(MapKind::AlphaFareyUnit, Some(1.5)).is_err());
        assert!(MapDescriptor::new(MapKind::AlphaFareyLine, Some(0.35)).unwrap().seq.is_some());
    }
}
