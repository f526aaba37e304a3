//! Orbit-length properties at desk scale.

use std::sync::Arc;

use birkhoff_global::birkhoff::{birkhoff_sum_with, run_orbit, CheckpointSchedule};
use birkhoff_global::luroth::{hitting_frequencies, sum_level_masses};
use birkhoff_global::maps::{to_real, AlphaFareyLine, Boole, OrbitPoint};
use birkhoff_global::observables::{HalfLineIndicator, IntervalStep};
use birkhoff_global::stats::extrema_tracker;
use birkhoff_global::PartitionSequence;
use num_complex::Complex64;

fn decades() -> CheckpointSchedule {
    CheckpointSchedule::new(vec![100_000, 1_000_000, 10_000_000]).unwrap()
}

/// Single orbits decay like `n^{β−1}` times a random factor, so one
/// excursion can lift a later decade above an earlier one; the mean over
/// starting points decreases.
#[test]
fn integrable_observable_averages_to_zero() {
    let map = AlphaFareyLine::with_beta(0.5).unwrap();
    let f = IntervalStep::indicator(0.0, 1.0);
    let starts = [0.65, 1.9, 3.3, 7.25, 17.0, 40.0];
    let mut mean = [0.0; 3];
    for x0 in starts {
        let rows = run_orbit(&map, &f, map.point(x0).unwrap(), &decades()).unwrap();
        assert!(rows[2].average.re < 1e-2, "x0={x0}: {rows:?}");
        for (m, c) in mean.iter_mut().zip(&rows) {
            *m += c.average.re / starts.len() as f64;
        }
    }
    assert!(mean.windows(2).all(|w| w[1] <= w[0]), "{mean:?}");
}

#[test]
fn finite_measure_perturbation_keeps_the_limit() {
    let map = AlphaFareyLine::with_beta(0.5).unwrap();
    let f_star = 0.3;
    let f = IntervalStep {
        lo: 0.0,
        hi: 2.0,
        height: 1.0 + f_star,
        background: f_star,
    };
    let sched = CheckpointSchedule::single(10_000_000).unwrap();
    for x0 in [0.65, 5.5] {
        let a = run_orbit(&map, &f, map.point(x0).unwrap(), &sched).unwrap()[0].average;
        assert!((a.re - f_star).abs() < 1e-2, "x0={x0}: {a}");
    }
}

#[test]
fn constant_observable_has_no_drift() {
    let n = 100_000_000;
    let s = birkhoff_sum_with(&Boole, |_| Complex64::new(1.0, 0.0), 0.37, n).unwrap();
    assert_eq!(s.re, n as f64);
    let rows = run_orbit(
        &Boole,
        &birkhoff_global::observables::FnObservable::new(|_| Complex64::new(1.0, 0.0), 1.0, None),
        0.37,
        &CheckpointSchedule::geometric(n, 10.0).unwrap(),
    )
    .unwrap();
    assert!(rows.iter().all(|c| c.average == Complex64::new(1.0, 0.0)));
}

#[test]
fn boole_occupation_swings_between_extremes() {
    let f = HalfLineIndicator::new(0.0);
    let sched = CheckpointSchedule::linear(1000, 10_000_000, 10_000).unwrap();
    let rows = run_orbit(&Boole, &f, 0.3, &sched).unwrap();
    let series: Vec<f64> = rows.iter().map(|c| c.average.re).collect();
    let (lo, hi) = extrema_tracker(&series).unwrap();
    assert!(lo < 0.15 && hi > 0.85, "min {lo}, max {hi}");
}

#[test]
fn digit_sums_hit_levels_at_the_renewal_rate() {
    let s = PartitionSequence::new(0.5).unwrap();
    let targets = [5u64, 20, 100];
    let streams = 1_000_000;
    let freq = hitting_frequencies(&s, &targets, streams, 21);
    let u = sum_level_masses(100, &s);
    for (&k, &p) in targets.iter().zip(&freq) {
        let want = u[k as usize];
        let sigma = (want * (1.0 - want) / streams as f64).sqrt();
        assert!((p - want).abs() < 4.0 * sigma, "k={k}: {p} vs {want} (σ={sigma})");
    }
}

#[test]
fn orbit_reaches_deep_levels() {
    // recurrence to the base and excursions far out both occur
    let s = Arc::new(PartitionSequence::new(0.5).unwrap());
    let map = AlphaFareyLine::new(s.clone());
    let mut p = OrbitPoint::new(0, 0.35).unwrap();
    let (mut base_visits, mut deepest) = (0u64, 0u64);
    for _ in 0..1_000_000 {
        p = birkhoff_global::maps::Dynamics::step(&map, &p).unwrap();
        base_visits += u64::from(p.level == 0);
        deepest = deepest.max(p.level);
    }
    assert!(base_visits > 100);
    assert!(to_real(OrbitPoint::new(deepest, 0.0).unwrap(), &s) > 100.0);
}
