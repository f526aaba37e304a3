//! Empirical distributions and the distances used to compare them.

use std::f64::consts::FRAC_2_PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::birkhoff::birkhoff_average;
use crate::error::{Error, Result};
use crate::maps::Boole;
use crate::observables::HalfLineIndicator;
use crate::rng;

/// `(2/π) arcsin √t`.
pub fn arcsine_cdf(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("arcsine_cdf", t, "[0, 1]"));
    }
    Ok(arcsine_clamped(t))
}

fn arcsine_clamped(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    // upper half by reflection, so that F(t) + F(1 − t) = 1 when 1 − t is exact
    if t <= 0.5 {
        FRAC_2_PI * t.sqrt().asin()
    } else {
        1.0 - FRAC_2_PI * (1.0 - t).sqrt().asin()
    }
}

/// Sorted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::invalid("sample contains NaN"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// `#{x_i ≤ x} / M`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Linear-interpolation quantile, `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.len();
        if n == 1 {
            return self.sorted[0];
        }
        let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let frac = pos - lo as f64;
        self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo])
    }
}

/// `sup_x |F_M(x) − F(x)|`, evaluated on both sides of every jump.
pub fn ks_distance<F: Fn(f64) -> f64>(emp: &EmpiricalDistribution, cdf: F) -> f64 {
    let m = emp.len() as f64;
    emp.sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i + 1) as f64 / m - f).max(f - i as f64 / m)
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// KS distance to the arcsine law.
pub fn ks_arcsine(emp: &EmpiricalDistribution) -> f64 {
    ks_distance(emp, arcsine_clamped)
}

/// `sup_x |F_M(x) − G_N(x)|` between two samples.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (x, y) = (&a.sorted, &b.sorted);
    let (m, n) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / m - j as f64 / n).abs());
    }
    d
}

/// Result of [`occupation_experiment`].
#[derive(Debug, Clone)]
pub struct OccupationReport {
    pub ks: f64,
    pub fractions: EmpiricalDistribution,
    /// Initial points replaced because their orbit hit the pole.
    pub resampled: u64,
}

/// Occupation fractions `A_n 1_{[0,∞)}` of Boole orbits started uniformly on
/// `[−1, 1]`, compared with the arcsine law.
pub fn occupation_experiment(count: usize, n: u64, seed: u64) -> Result<OccupationReport> {
    if count == 0 || n == 0 {
        return Err(Error::invalid("occupation experiment needs M ≥ 1 and n ≥ 1"));
    }
    let f = HalfLineIndicator::new(0.0);
    let runs: Vec<(f64, u64)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i);
            let mut retries = 0u64;
            loop {
                let x: f64 = r.gen_range(-1.0..=1.0);
                match birkhoff_average(&Boole, &f, x, n) {
                    Ok(a) => return (a.re, retries),
                    Err(Error::Singular { .. }) => retries += 1,
                    Err(e) => unreachable!("Boole orbit failed: {e}"),
                }
            }
        })
        .collect();
    let resampled = runs.iter().map(|r| r.1).sum();
    let fractions = EmpiricalDistribution::new(runs.into_iter().map(|r| r.0).collect())?;
    Ok(OccupationReport {
        ks: ks_arcsine(&fractions),
        fractions,
        resampled,
    })
}

/// Running minimum and maximum of a real series.
pub fn extrema_tracker(series: &[f64]) -> Result<(f64, f64)> {
    let first = *series.first().ok_or_else(|| Error::invalid("empty series"))?;
    Ok(series
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))))
}

/// Sample standard deviation (`M − 1` denominator) and interquartile range.
pub fn nondegeneracy(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::invalid("need at least two values"));
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let emp = EmpiricalDistribution::new(values.to_vec())?;
    Ok((var.sqrt(), emp.quantile(0.75) - emp.quantile(0.25)))
}

/// Sample standard deviation of complex values, `√(Σ|z − z̄|² / (M − 1))`.
pub fn complex_std(values: &[Complex64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("need at least two values"));
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<Complex64>() / m;
    Ok((values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (m - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn arcsine_examples() {
        assert_eq!(arcsine_cdf(0.0).unwrap(), 0.0);
        assert_relative_eq!(arcsine_cdf(1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(arcsine_cdf(0.5).unwrap(), 0.5, max_relative = 1e-15);
        assert!(arcsine_cdf(1.5).is_err());
        assert!(arcsine_cdf(-0.1).is_err());
    }

    #[test]
    fn arcsine_symmetry_and_monotonicity() {
        let mut prev = 0.0;
        for i in 0..=100_000 {
            let t = i as f64 / 100_000.0;
            let f = arcsine_cdf(t).unwrap();
            assert!(f >= prev);
            prev = f;
        }
        // dyadic points, where 1 − t is exact
        for i in 0..=4096 {
            let t = i as f64 / 4096.0;
            let sum = arcsine_cdf(t).unwrap() + arcsine_cdf(1.0 - t).unwrap();
            assert!((sum - 1.0).abs() <= 2.0 * f64::EPSILON, "t={t}");
        }
    }

    #[test]
    fn ks_examples() {
        let one = EmpiricalDistribution::new(vec![0.5]).unwrap();
        assert_relative_eq!(ks_arcsine(&one), 0.5, max_relative = 1e-15);
        let point = EmpiricalDistribution::new(vec![0.0; 10]).unwrap();
        assert_eq!(ks_arcsine(&point), 1.0);
    }

    #[test]
    fn ks_of_exact_sample_is_small() {
        let mut r = rng::stream(1, 0);
        // sin²(πU/2) has the arcsine law
        let sample: Vec<f64> = (0..10_000)
            .map(|_| (std::f64::consts::FRAC_PI_2 * r.gen::<f64>()).sin().powi(2))
            .collect();
        let emp = EmpiricalDistribution::new(sample).unwrap();
        assert!(ks_arcsine(&emp) < 0.03);
    }

    #[test]
    fn two_sample_ks() {
        let a = EmpiricalDistribution::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        let b = EmpiricalDistribution::new(vec![10.0, 11.0]).unwrap();
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        let c = EmpiricalDistribution::new(vec![1.5, 3.5]).unwrap();
        assert_relative_eq!(ks_two_sample(&a, &c), 0.25);
    }

    #[test]
    fn occupation_examples() {
        let one = occupation_experiment(1, 100, 3).unwrap();
        assert!(one.ks >= 0.5);
        let coin = occupation_experiment(2000, 1, 3).unwrap();
        assert!(coin.ks > 0.2);
        let a = occupation_experiment(64, 1000, 5).unwrap();
        let b = occupation_experiment(64, 1000, 5).unwrap();
        assert_eq!(a.fractions, b.fractions);
        assert_eq!(a.ks, b.ks);
    }

    #[test]
    fn extrema_examples() {
        assert_eq!(extrema_tracker(&[0.3; 5]).unwrap(), (0.3, 0.3));
        assert_eq!(extrema_tracker(&[1.0, 2.0, 3.0]).unwrap(), (1.0, 3.0));
        assert!(extrema_tracker(&[]).is_err());
    }

    #[test]
    fn nondegeneracy_examples() {
        assert_eq!(nondegeneracy(&[2.0; 8]).unwrap(), (0.0, 0.0));
        let m = 10;
        let pm: Vec<f64> = (0..m).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let (std, iqr) = nondegeneracy(&pm).unwrap();
        // population std is exactly 1; the sample std carries √(M/(M−1))
        assert_relative_eq!(std, (m as f64 / (m as f64 - 1.0)).sqrt(), max_relative = 1e-15);
        assert_eq!(iqr, 2.0);
        assert!(nondegeneracy(&[1.0]).is_err());
        let z = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        assert_relative_eq!(complex_std(&z).unwrap(), 2f64.sqrt());
    }

    proptest! {
        #[test]
        fn ks_is_bounded_and_order_free(mut v in prop::collection::vec(0.0f64..1.0, 1..200), seed in 0u64..1000) {
            let a = ks_arcsine(&EmpiricalDistribution::new(v.clone()).unwrap());
            prop_assert!((0.0..=1.0).contains(&a));
            // shuffle
            let mut r = rng::stream(seed, 0);
            for i in (1..v.len()).rev() {
                let j = r.gen_range(0..=i);
                v.swap(i, j);
            }
            let b = ks_arcsine(&EmpiricalDistribution::new(v).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
