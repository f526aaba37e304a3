//! Streaming Birkhoff sums `S_n f(x) = Σ_{k<n} f(T^k x)` and averages
//! `A_n f = S_n f / n`.
//!
//! Orbits are run in a single pass: the observable is evaluated at the
//! current state, added to a compensated accumulator, and the average is
//! recorded whenever `n` reaches the next checkpoint. The map is only
//! applied when another value is needed, so an orbit that would hit a
//! singular point right after the last checkpoint still completes.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::Dynamics;
use crate::numeric::CompensatedSum;
use crate::observables::Observable;
use crate::rng::{self, StreamRng};

/// Compensated complex running sum with its term count.
#[derive(Debug, Clone, Copy, Default)]
pub struct BirkhoffAccumulator {
    re: CompensatedSum,
    im: CompensatedSum,
    count: u64,
}

impl BirkhoffAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
        self.count += 1;
    }

    pub fn sum(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// `S_n / n`; `None` before the first term.
    pub fn average(&self) -> Option<Complex64> {
        (self.count > 0).then(|| self.sum() / self.count as f64)
    }
}

/// Strictly increasing list of orbit lengths at which `A_n` is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckpointSchedule {
    points: Vec<u64>,
}

impl CheckpointSchedule {
    pub fn new(points: Vec<u64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("checkpoint schedule is empty"));
        }
        if points[0] == 0 {
            return Err(Error::invalid("checkpoints start at n = 1"));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("checkpoints must be strictly increasing"));
        }
        Ok(Self { points })
    }

    pub fn single(n: u64) -> Result<Self> {
        Self::new(vec![n])
    }

    /// `1, ⌈r⌉, ⌈r²⌉, …` (each at least one more than the last) up to and
    /// including `n_max`.
    pub fn geometric(n_max: u64, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0) {
            return Err(Error::domain("geometric checkpoints", ratio, "ratio > 1"));
        }
        if n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        let mut points = Vec::new();
        let mut n = 1u64;
        while n < n_max {
            points.push(n);
            n = ((n as f64 * ratio).ceil() as u64).max(n + 1);
        }
        points.push(n_max);
        Self::new(points)
    }

    /// `count` evenly spaced values from `start` to `end` inclusive.
    pub fn linear(start: u64, end: u64, count: usize) -> Result<Self> {
        if start == 0 || start > end || count == 0 {
            return Err(Error::invalid(format!(
                "linear checkpoints need 1 ≤ start ≤ end and count ≥ 1 (got {start}..{end}, {count})"
            )));
        }
        if count == 1 || start == end {
            return Self::new(vec![end]);
        }
        let span = (end - start) as f64;
        let mut points: Vec<u64> = (0..count)
            .map(|i| start + (span * i as f64 / (count - 1) as f64).round() as u64)
            .collect();
        points.dedup();
        Self::new(points)
    }

    /// Geometric grid (ratio 1.05) below `window_start` followed by `count`
    /// evenly spaced points on `[window_start, n_max]`.
    pub fn with_window(n_max: u64, window_start: u64, count: usize) -> Result<Self> {
        let window = Self::linear(window_start, n_max, count)?;
        if window_start <= 1 {
            return Ok(window);
        }
        let head = Self::geometric(window_start - 1, 1.05)?;
        Self::new(head.points.into_iter().chain(window.points).collect())
    }

    pub fn points(&self) -> &[u64] {
        &self.points
    }

    pub fn last(&self) -> u64 {
        *self.points.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    pub n: u64,
    pub average: Complex64,
}

/// Checkpoints reached before an orbit stopped, plus the reason it stopped
/// early, if it did.
#[derive(Debug, Clone)]
pub struct OrbitRun {
    pub checkpoints: Vec<Checkpoint>,
    pub abort: Option<Error>,
}

impl OrbitRun {
    pub fn into_result(self) -> Result<Vec<Checkpoint>> {
        match self.abort {
            Some(e) => Err(e),
            None => Ok(self.checkpoints),
        }
    }
}

fn stamp(err: Error, step: u64) -> Error {
    match err {
        Error::Singular { kind, .. } => Error::Singular { kind, step },
        other => other,
    }
}

/// Streams the orbit of `start`, evaluating `f` on each state.
pub fn run_orbit_with<D, F>(map: &D, mut f: F, start: D::State, schedule: &CheckpointSchedule) -> OrbitRun
where
    D: Dynamics,
    F: FnMut(&D::State) -> Complex64,
{
    let mut acc = BirkhoffAccumulator::new();
    let mut out = Vec::with_capacity(schedule.len());
    let mut state = start;
    let mut next = schedule.points().iter().copied().peekable();
    let n_max = schedule.last();
    for n in 1..=n_max {
        acc.add(f(&state));
        if next.peek() == Some(&n) {
            next.next();
            out.push(Checkpoint {
                n,
                average: acc.sum() / n as f64,
            });
        }
        if n == n_max {
            break;
        }
        state = match map.step(&state) {
            Ok(s) => s,
            Err(e) => {
                return OrbitRun {
                    checkpoints: out,
                    abort: Some(stamp(e, n)),
                }
            }
        };
    }
    OrbitRun {
        checkpoints: out,
        abort: None,
    }
}

pub fn run_orbit_partial<D, O>(map: &D, obs: &O, start: D::State, schedule: &CheckpointSchedule) -> OrbitRun
where
    D: Dynamics,
    O: Observable + ?Sized,
{
    run_orbit_with(map, |s| obs.eval_site(map.site(s)), start, schedule)
}

/// `A_n f(start)` at every checkpoint. A singular point aborts the run with
/// the index of the step that reached it.
pub fn run_orbit<D, O>(map: &D, obs: &O, start: D::State, schedule: &CheckpointSchedule) -> Result<Vec<Checkpoint>>
where
    D: Dynamics,
    O: Observable + ?Sized,
{
    run_orbit_partial(map, obs, start, schedule).into_result()
}

/// `S_n f(start)` for a state-level evaluator.
pub fn birkhoff_sum_with<D, F>(map: &D, mut f: F, start: D::State, n: u64) -> Result<Complex64>
where
    D: Dynamics,
    F: FnMut(&D::State) -> Complex64,
{
    let mut acc = BirkhoffAccumulator::new();
    let mut state = start;
    for k in 0..n {
        acc.add(f(&state));
        if k + 1 < n {
            state = map.step(&state).map_err(|e| stamp(e, k + 1))?;
        }
    }
    Ok(acc.sum())
}

/// `A_n f(start)`.
pub fn birkhoff_average<D, O>(map: &D, obs: &O, start: D::State, n: u64) -> Result<Complex64>
where
    D: Dynamics,
    O: Observable + ?Sized,
{
    if n == 0 {
        return Err(Error::invalid("A_n needs n ≥ 1"));
    }
    Ok(birkhoff_sum_with(map, |s| obs.eval_site(map.site(s)), start, n)? / n as f64)
}

/// Parameters of a sampled check of the uniform-convergence hypothesis
/// `|A_N f(x) − f*| ≤ ε` for all `x` in levels `≥ K`.
#[derive(Debug, Clone, Copy)]
pub struct TailCheck {
    pub limit: Complex64,
    pub eps: f64,
    pub n: u64,
    pub k: u64,
    pub samples: usize,
}

/// Outcome of [`theorem1_check`].
#[derive(Debug, Clone)]
pub struct TailCheckReport {
    pub params: TailCheck,
    pub max_deviation: f64,
    pub mean_deviation: f64,
    /// Level of the sample attaining the maximum.
    pub worst_level: u64,
    /// Highest level among the samples.
    pub max_level: u64,
}

impl TailCheckReport {
    /// Whether every sample satisfied the bound. This can only corroborate
    /// the hypothesis; a single violation falsifies it.
    pub fn within_eps(&self) -> bool {
        self.max_deviation <= self.params.eps
    }
}

impl fmt::Display for TailCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.params;
        write!(
            f,
            "N={} K={} samples={} (levels {}..={}, sampled uniformly per level): max |A_N f - f*| = {:.3e}, mean = {:.3e}; ",
            p.n, p.k, p.samples, p.k, self.max_level, self.max_deviation, self.mean_deviation
        )?;
        if self.within_eps() {
            write!(f, "no counterexample to eps={:.3e} found (not a proof)", p.eps)
        } else {
            write!(
                f,
                "counterexample at level {}: hypothesis falsified for eps={:.3e}",
                self.worst_level, p.eps
            )
        }
    }
}

/// Samples `M` points from the tail `∪_{k≥K} L_k` and reports the largest
/// deviation of `A_N f` from `f*`.
///
/// `sampler` must return states whose site level is at least `K`; anything
/// else is a contract error.
pub fn theorem1_check<D, F, S>(map: &D, mut f: F, params: TailCheck, mut sampler: S) -> Result<TailCheckReport>
where
    D: Dynamics,
    F: FnMut(&D::State) -> Complex64,
    S: FnMut() -> D::State,
{
    if params.n == 0 || params.samples == 0 {
        return Err(Error::invalid("theorem1_check needs N ≥ 1 and M ≥ 1"));
    }
    let mut max_dev = 0.0f64;
    let mut worst_level = 0;
    let mut max_level = 0;
    let mut total = CompensatedSum::new();
    for _ in 0..params.samples {
        let x = sampler();
        let level = map
            .site(&x)
            .level
            .ok_or_else(|| Error::Contract("sampled state carries no level".into()))?;
        if level < params.k {
            return Err(Error::Contract(format!(
                "sampled level {level} is below K = {}",
                params.k
            )));
        }
        max_level = max_level.max(level);
        let avg = birkhoff_sum_with(map, &mut f, x, params.n)? / params.n as f64;
        let dev = (avg - params.limit).norm();
        total.add(dev);
        if dev > max_dev {
            max_dev = dev;
            worst_level = level;
        }
    }
    Ok(TailCheckReport {
        params,
        max_deviation: max_dev,
        mean_deviation: total.value() / params.samples as f64,
        worst_level,
        max_level,
    })
}

/// `S_n f(x) / S_n g(x)`.
pub fn hopf_ratio<D, F, G>(map: &D, f: &F, g: &G, start: D::State, n: u64) -> Result<Complex64>
where
    D: Dynamics,
    F: Observable + ?Sized,
    G: Observable + ?Sized,
{
    let mut sf = BirkhoffAccumulator::new();
    let mut sg = BirkhoffAccumulator::new();
    let mut state = start;
    for k in 0..n {
        let site = map.site(&state);
        sf.add(f.eval_site(site));
        sg.add(g.eval_site(site));
        if k + 1 < n {
            state = map.step(&state).map_err(|e| stamp(e, k + 1))?;
        }
    }
    let denom = sg.sum();
    if denom == Complex64::new(0.0, 0.0) {
        return Err(Error::invalid(format!("S_n g = 0 at n = {n}; ratio undefined")));
    }
    Ok(sf.sum() / denom)
}

/// `A_n f` along `count` independent orbits. Orbit `i` draws its start from
/// stream `i` of `seed`; results are in orbit order and each orbit fails
/// independently.
pub fn ensemble_averages<D, O, S>(map: &D, obs: &O, sampler: S, n: u64, count: usize, seed: u64) -> Vec<Result<Complex64>>
where
    D: Dynamics,
    O: Observable + ?Sized,
    S: Fn(&mut StreamRng) -> Result<D::State> + Sync,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i);
            let start = sampler(&mut rng)?;
            birkhoff_average(map, obs, start, n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::{AlphaFareyLine, Boole, OrbitPoint};
    use crate::observables::{unit_phase, LevelStep, Wave};
    use rand::Rng;
    use std::sync::Arc;

    fn line(beta: f64) -> AlphaFareyLine {
        AlphaFareyLine::with_beta(beta).unwrap()
    }

    #[test]
    fn accumulator_average_needs_a_term() {
        let mut acc = BirkhoffAccumulator::new();
        assert!(acc.average().is_none());
        acc.add(Complex64::new(2.0, -1.0));
        assert_eq!(acc.average(), Some(Complex64::new(2.0, -1.0)));
        assert_eq!(acc.count(), 1);
    }

    #[test]
    fn accumulator_error_is_bounded() {
        // terms of size one plus tiny oscillations; the exact sum is known
        let mut acc = BirkhoffAccumulator::new();
        let n = 1_000_000u64;
        for k in 0..n {
            let s = if k % 2 == 0 { 1e-9 } else { -1e-9 };
            acc.add(Complex64::new(1.0 + s, 0.1));
        }
        let exact = Complex64::new(n as f64, 0.1 * n as f64);
        let bound = 4.0 * f64::EPSILON * n as f64 * 1.1;
        assert!((acc.sum() - exact).norm() <= bound);
    }

    #[test]
    fn schedules_validate() {
        assert!(CheckpointSchedule::new(vec![]).is_err());
        assert!(CheckpointSchedule::new(vec![0, 1]).is_err());
        assert!(CheckpointSchedule::new(vec![3, 3]).is_err());
        let g = CheckpointSchedule::geometric(1000, 1.05).unwrap();
        assert_eq!(g.points()[0], 1);
        assert_eq!(g.last(), 1000);
        let l = CheckpointSchedule::linear(9_000_000, 10_000_000, 2000).unwrap();
        assert_eq!(l.len(), 2000);
        assert_eq!(l.points()[0], 9_000_000);
        assert_eq!(l.last(), 10_000_000);
        let w = CheckpointSchedule::with_window(10_000_000, 9_000_000, 2000).unwrap();
        assert!(w.points().windows(2).all(|p| p[0] < p[1]));
        assert_eq!(w.last(), 10_000_000);
    }

    #[test]
    fn constant_observable_averages_exactly() {
        let map = line(0.5);
        let c = Complex64::new(0.25, -3.0);
        let f = LevelStep::periodic(vec![c]).unwrap();
        let sched = CheckpointSchedule::geometric(100_000, 1.3).unwrap();
        let out = run_orbit(&map, &f, map.point(0.65).unwrap(), &sched).unwrap();
        assert_eq!(out.len(), sched.len());
        for cp in out {
            assert_eq!(cp.average, c);
        }
    }

    #[test]
    fn first_average_is_first_value() {
        let map = line(0.35);
        let f = Wave::new(0.2).unwrap();
        let x = map.point(0.65).unwrap();
        let out = run_orbit(&map, &f, x, &CheckpointSchedule::single(1).unwrap()).unwrap();
        assert_eq!(out[0].average, f.eval(0.65));
    }

    #[test]
    fn coboundary_averages_telescope() {
        let map = line(0.5);
        let g = |p: &OrbitPoint| unit_phase(0.37 * p.level as f64 + 0.11 * p.offset);
        let f = |p: &OrbitPoint| g(p) - g(&map.step(p).unwrap());
        let sched = CheckpointSchedule::geometric(200_000, 1.2).unwrap();
        let run = run_orbit_with(&map, f, map.point(0.65).unwrap(), &sched);
        for cp in run.into_result().unwrap() {
            assert!(cp.average.norm() <= 2.0 / cp.n as f64 + 1e-12, "n={}", cp.n);
        }
    }

    #[test]
    fn singular_orbit_reports_step() {
        // 1 → 0 under Boole, then the pole
        let sched = CheckpointSchedule::new(vec![1, 2, 5]).unwrap();
        let f = LevelStep::periodic(vec![Complex64::new(1.0, 0.0)]).unwrap();
        let run = run_orbit_partial(&Boole, &f, 1.0, &sched);
        assert_eq!(run.checkpoints.len(), 2);
        match run.abort {
            Some(Error::Singular { step, .. }) => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
        // stopping right before the pole is fine
        let short = CheckpointSchedule::new(vec![1, 2]).unwrap();
        assert!(run_orbit(&Boole, &f, 1.0, &short).is_ok());
    }

    #[test]
    fn periodic_level_step_meets_tail_hypothesis_exactly() {
        let map = line(0.5);
        let roots: Vec<_> = (0..4).map(|k| unit_phase(k as f64 / 4.0)).collect();
        let f = LevelStep::periodic(roots).unwrap();
        let mut rng = rng::stream(3, 0);
        let params = TailCheck {
            limit: f.limit().unwrap(),
            eps: 1e-12,
            n: 4,
            k: 3,
            samples: 500,
        };
        let report = theorem1_check(&map, |p| f.at_level(p.level), params, || {
            OrbitPoint::new(rng.gen_range(3..1003), rng.gen()).unwrap()
        })
        .unwrap();
        assert!(report.max_deviation < 1e-15, "{report}");
        assert!(report.within_eps());
        assert!(report.to_string().contains("not a proof"));
    }

    #[test]
    fn wave_fails_tail_hypothesis_for_short_averages() {
        let map = line(0.5);
        let f = Wave::new(0.2).unwrap();
        let mut rng = rng::stream(5, 0);
        let params = TailCheck {
            limit: Complex64::new(0.0, 0.0),
            eps: 0.1,
            n: 10,
            k: 1000,
            samples: 200,
        };
        let report = theorem1_check(&map, |p| f.eval_site(map.site(p)), params, || {
            OrbitPoint::new(rng.gen_range(1000..2000), rng.gen()).unwrap()
        })
        .unwrap();
        assert!(report.max_deviation > 0.5);
        assert!(report.to_string().contains("falsified"));
    }

    #[test]
    fn tail_check_rejects_low_levels() {
        let map = line(0.5);
        let params = TailCheck {
            limit: Complex64::new(0.0, 0.0),
            eps: 0.1,
            n: 2,
            k: 10,
            samples: 3,
        };
        let err = theorem1_check(&map, |_| Complex64::new(0.0, 0.0), params, || OrbitPoint::base(0.5).unwrap());
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn hopf_ratio_trivial_cases() {
        let map = line(0.5);
        let g = LevelStep::lower_levels(2);
        let x = map.point(0.65).unwrap();
        assert_eq!(hopf_ratio(&map, &g, &g, x, 10_000).unwrap(), Complex64::new(1.0, 0.0));
        let two_g = LevelStep::sequence(
            |k| Complex64::new(if k < 2 { 2.0 } else { 0.0 }, 0.0),
            Complex64::new(0.0, 0.0),
            2.0,
        );
        assert_eq!(hopf_ratio(&map, &two_g, &g, x, 10_000).unwrap(), Complex64::new(2.0, 0.0));
        // an orbit that never visits the support
        let far = OrbitPoint::new(1000, 0.5).unwrap();
        assert!(hopf_ratio(&map, &g, &g, far, 100).is_err());
    }

    #[test]
    fn ensemble_is_ordered_and_reproducible() {
        let map = Arc::new(line(0.5));
        let f = Wave::new(0.2).unwrap();
        let sampler = |r: &mut StreamRng| OrbitPoint::base(r.gen());
        let a = ensemble_averages(&*map, &f, sampler, 1000, 16, 42);
        let b = ensemble_averages(&*map, &f, sampler, 1000, 16, 42);
        let a: Vec<_> = a.into_iter().map(|r| r.unwrap()).collect();
        let b: Vec<_> = b.into_iter().map(|r| r.unwrap()).collect();
        assert_eq!(a, b);
        // orbit i uses stream i
        let mut r3 = rng::stream(42, 3);
        let x3 = OrbitPoint::base(r3.gen()).unwrap();
        assert_eq!(a[3], birkhoff_average(&*map, &f, x3, 1000).unwrap());
    }

    #[test]
    fn ensemble_of_constants() {
        let map = line(0.5);
        let c = Complex64::new(0.5, 0.5);
        let f = LevelStep::periodic(vec![c]).unwrap();
        let out = ensemble_averages(&map, &f, |r: &mut StreamRng| OrbitPoint::base(r.gen()), 500, 8, 1);
        assert!(out.into_iter().all(|v| v.unwrap() == c));
    }

    #[test]
    fn single_member_ensemble_matches_run_orbit() {
        let map = line(0.35);
        let f = Wave::new(0.2).unwrap();
        let sampler = |r: &mut StreamRng| OrbitPoint::base(r.gen());
        let ens = ensemble_averages(&map, &f, sampler, 5000, 1, 9);
        let mut r = rng::stream(9, 0);
        let x = OrbitPoint::base(r.gen()).unwrap();
        let run = run_orbit(&map, &f, x, &CheckpointSchedule::single(5000).unwrap()).unwrap();
        assert_eq!(*ens[0].as_ref().unwrap(), run[0].average);
    }

    #[test]
    fn failed_orbits_do_not_sink_the_batch() {
        let f = LevelStep::periodic(vec![Complex64::new(1.0, 0.0)]).unwrap();
        let out = ensemble_averages(
            &Boole,
            &f,
            |r: &mut StreamRng| Ok(if r.gen::<bool>() { 1.0 } else { 0.3 }),
            5,
            32,
            4,
        );
        assert!(out.iter().any(|r| r.is_err()));
        assert!(out.iter().any(|r| r.is_ok()));
    }
}
