//! Quick invariant suite behind the `verify` subcommand.
//!
//! Each check is small enough that the whole suite runs in a few seconds.

use num_complex::Complex64;
use rand::Rng;

use crate::birkhoff::{birkhoff_sum_with, theorem1_check, TailCheck};
use crate::luroth::{self, DigitSampler, DigitSequence};
use crate::maps::{self, AlphaFareyLine, OrbitPoint};
use crate::observables::{LevelPartition, LevelStep, Observable};
use crate::rng;
use crate::sequences::PartitionSequence;
use crate::stats;
use crate::tower::{self, LevyTower, MarkovMap};

const SEED: u64 = 0x5eed;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> Check {
    Check {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tolerance {tol:.1e})"),
    }
}

fn failed(name: &'static str, e: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: format!("error: {e}"),
    }
}

const BETAS: [f64; 4] = [0.35, 0.5, 0.65, 0.98];

fn sequences() -> Vec<PartitionSequence> {
    BETAS.iter().map(|&b| PartitionSequence::new(b).expect("valid beta")).collect()
}

fn branch_reciprocals(seqs: &[PartitionSequence]) -> Check {
    let mut worst = 0.0f64;
    for s in seqs {
        for k in 1..=10_000u64 {
            let t = s.t_unchecked(k);
            let sum = s.t_unchecked(k + 1) / t + s.a_unchecked(k) / t;
            worst = worst.max((sum - 1.0).abs());
        }
    }
    check("branch reciprocal slopes sum to one", worst, 1e-12)
}

fn boole_preimages() -> Check {
    let mut r = rng::stream(SEED, 1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let y: f64 = r.gen_range(-50.0..50.0);
        let root = (y * y + 4.0).sqrt();
        let dt = |x: f64| 1.0 + 1.0 / (x * x);
        let (xp, xm) = ((y + root) / 2.0, (y - root) / 2.0);
        worst = worst.max((1.0 / dt(xp) + 1.0 / dt(xm) - 1.0).abs());
    }
    check("Boole preimage slopes sum to one", worst, 1e-12)
}

/// Error relative to what rounding `F_α(y)` alone can cause.
fn conjugacy(seqs: &[PartitionSequence]) -> Check {
    let mut r = rng::stream(SEED, 2);
    let mut worst = 0.0f64;
    for s in seqs {
        for _ in 0..10_000 {
            let y = rng::open_closed(&mut r);
            let z = match maps::alpha_farey_unit(y, s) {
                Ok(z) if z > 0.0 => z,
                Ok(_) => continue,
                Err(e) => return failed("conjugacy with the unit-interval map", e),
            };
            let rhs = maps::phi_orbit_point(y, s).and_then(|p| maps::alpha_farey_line_step(p, s));
            let (lhs, rhs) = match (maps::phi_orbit_point(z, s), rhs) {
                (Ok(l), Ok(r)) => (l, r),
                (Err(e), _) | (_, Err(e)) => return failed("conjugacy with the unit-interval map", e),
            };
            let m = s.branch_unchecked(z);
            let allowance = 1e-9 + 4.0 * f64::EPSILON * z * s.t_unchecked(m) / s.a_unchecked(m);
            worst = worst.max(maps::distance(lhs, rhs, s) / allowance);
        }
    }
    check("conjugacy with the unit-interval map (error / allowance)", worst, 1.0)
}

fn round_trips(seqs: &[PartitionSequence]) -> Check {
    let mut r = rng::stream(SEED, 3);
    let mut worst = 0.0f64;
    for s in seqs {
        for _ in 0..2_500 {
            let x = rng::open_closed(&mut r);
            match luroth::digits(x, s, 40) {
                Ok(d) => worst = worst.max((luroth::from_digits(&d, s) - x).abs()),
                Err(e) => return failed("digit round trip", e),
            }
            let Ok(p) = AlphaFareyLine::new(std::sync::Arc::new(s.clone())).point(10.0 * x) else {
                return failed("real round trip", x);
            };
            worst = worst.max((maps::to_real(p, s) - 10.0 * x).abs());
        }
    }
    check("digit and coordinate round trips", worst, 1e-12)
}

fn digit_action(seqs: &[PartitionSequence]) -> Check {
    let mut r = rng::stream(SEED, 4);
    let mut worst = 0.0f64;
    for s in seqs {
        let sampler = DigitSampler::new(s);
        for _ in 0..2_500 {
            let len = r.gen_range(1..12);
            let d = DigitSequence::new((0..len).map(|_| sampler.sample(&mut r)).collect()).expect("digits ≥ 1");
            let lhs = luroth::from_digits(&luroth::farey_digit_action(&d), s);
            match maps::alpha_farey_unit(luroth::from_digits(&d, s), s) {
                Ok(rhs) => worst = worst.max((lhs - rhs).abs()),
                Err(e) => return failed("digit action", e),
            }
        }
    }
    check("digit action matches the unit-interval map", worst, 1e-12)
}

/// Σ over compositions of `k` of the product of the part masses.
fn compositions_mass(k: usize, s: &PartitionSequence) -> f64 {
    if k == 0 {
        return 1.0;
    }
    (0u64..1 << (k - 1))
        .map(|mask| {
            let (mut prod, mut run) = (1.0, 1u64);
            for i in 0..k - 1 {
                if mask & (1 << i) != 0 {
                    prod *= s.a_unchecked(run);
                    run = 1;
                } else {
                    run += 1;
                }
            }
            prod * s.a_unchecked(run)
        })
        .sum()
}

fn renewal(seqs: &[PartitionSequence]) -> Check {
    let mut worst = 0.0f64;
    for s in seqs {
        let u = luroth::sum_level_masses(12, s);
        for (k, &uk) in u.iter().enumerate() {
            worst = worst.max((uk - compositions_mass(k, s)).abs());
        }
    }
    check("renewal masses match composition enumeration", worst, 1e-14)
}

fn coboundary() -> Check {
    let s = std::sync::Arc::new(PartitionSequence::new(0.5).expect("valid beta"));
    let map = AlphaFareyLine::new(s.clone());
    let g = |p: &OrbitPoint| maps::to_real(*p, &s).sin();
    let mut worst = 0.0f64;
    let mut state = map.point(0.65).expect("valid start");
    let mut sum = crate::numeric::CompensatedSum::new();
    for n in 1..=100_000u64 {
        let next = match crate::maps::Dynamics::step(&map, &state) {
            Ok(p) => p,
            Err(e) => return failed("coboundary averages", e),
        };
        sum.add(g(&state) - g(&next));
        state = next;
        worst = worst.max(sum.value().abs() / n as f64 - 2.0 / n as f64);
    }
    check("coboundary averages within 2/n", worst, 1e-12)
}

fn constant_average() -> Check {
    let map = AlphaFareyLine::with_beta(0.5).expect("valid beta");
    let start = map.point(0.65).expect("valid start");
    match birkhoff_sum_with(&map, |_| Complex64::new(1.0, 0.0), start, 1_000_000) {
        Ok(s) => check("constant observable sums exactly", (s.re - 1e6).abs() + s.im.abs(), 0.0),
        Err(e) => failed("constant observable sums exactly", e),
    }
}

fn periodic_tail() -> Check {
    let s = std::sync::Arc::new(PartitionSequence::new(0.5).expect("valid beta"));
    let map = AlphaFareyLine::new(s.clone());
    let roots = (0..4).map(|j| crate::observables::unit_phase(j as f64 / 4.0)).collect();
    let f = LevelStep::periodic(roots)
        .expect("non-empty")
        .with_partition(LevelPartition::Alpha(s.clone()));
    let params = TailCheck {
        limit: Complex64::new(0.0, 0.0),
        eps: 0.0,
        n: 4,
        k: 3,
        samples: 2_000,
    };
    let mut r = rng::stream(SEED, 5);
    let report = theorem1_check(
        &map,
        |p: &OrbitPoint| f.eval_site(crate::observables::Site::leveled(maps::to_real(*p, &s), p.level)),
        params,
        || OrbitPoint::new(r.gen_range(3..400), r.gen::<f64>()).expect("valid point"),
    );
    match report {
        Ok(rep) => check("periodic level step averages exactly over a period", rep.max_deviation, 1e-15),
        Err(e) => failed("periodic level step averages exactly over a period", e),
    }
}

fn markov_and_tower() -> Check {
    let map = MarkovMap::new(&[0.5, 0.3, 0.2]).expect("valid lengths");
    let mut worst = (map.eval(0.9).unwrap_or(f64::NAN) - 0.5).abs();
    let Ok(lt) = LevyTower::symmetric(0.5) else {
        return failed("tower walk equals tower orbit", "construction failed");
    };
    for i in 0..8 {
        let start = lt.base_point(rng::stream(SEED, 100 + i));
        match tower::matched_equivalence(&lt, start, 20_000) {
            Ok(m) => worst = worst.max(m.residual),
            Err(e) => return failed("tower walk equals tower orbit", e),
        }
    }
    check("tower walk equals tower orbit", worst, 1e-9)
}

fn arcsine_symmetry() -> Check {
    let mut worst = 0.0f64;
    for i in 0..=4096 {
        let t = i as f64 / 4096.0;
        let a = stats::arcsine_cdf(t).unwrap_or(f64::NAN);
        let b = stats::arcsine_cdf(1.0 - t).unwrap_or(f64::NAN);
        worst = worst.max((a + b - 1.0).abs());
    }
    check("arcsine law is symmetric", worst, 2.0 * f64::EPSILON)
}

fn tau_asymptotics() -> Check {
    let mut worst = 0.0f64;
    for b in [0.35, 0.5, 0.65] {
        let s = PartitionSequence::new(b).expect("valid beta");
        let k = 1_000_000u64;
        worst = worst.max((s.tau(k) * (1.0 - b) / (k as f64).powf(1.0 - b) - 1.0).abs());
    }
    check("level positions grow like k^(1-b)/(1-b)", worst, 0.01)
}

/// Runs every check, in a fixed order.
pub fn run_suite() -> Vec<Check> {
    let seqs = sequences();
    vec![
        branch_reciprocals(&seqs),
        boole_preimages(),
        conjugacy(&seqs),
        round_trips(&seqs),
        digit_action(&seqs),
        renewal(&seqs),
        coboundary(),
        constant_average(),
        periodic_tail(),
        markov_and_tower(),
        arcsine_symmetry(),
        tau_asymptotics(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_suite() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn composition_oracle_small_cases() {
        let s = PartitionSequence::new(0.5).unwrap();
        assert_eq!(compositions_mass(0, &s), 1.0);
        assert_eq!(compositions_mass(1, &s), s.a(1).unwrap());
        let two = s.a(2).unwrap() + s.a(1).unwrap().powi(2);
        assert!((compositions_mass(2, &s) - two).abs() < 1e-16);
    }
}
