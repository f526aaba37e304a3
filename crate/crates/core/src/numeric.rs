//! Small numerical kernels shared by the dynamical modules: compensated
//! summation, the Gamma function and power-sum tails.

use std::f64::consts::PI;

/// Kahan–Babuška–Neumaier running sum.
#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

// Lanczos approximation, g = 7, n = 9 (Godfrey's coefficients).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler's Gamma function for real arguments (poles at non-positive integers
/// return infinity).
pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        // reflection
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// Euler–Maclaurin correction terms for `Σ_{j ≤ k} j^{-s}` beyond the
/// antiderivative: `f(k)/2 + B2/2! f'(k) + B4/4! f'''(k) + B6/6! f^(5)(k)`.
fn em_corrections(s: f64, k: f64) -> f64 {
    let ks = k.powf(-s);
    let inv = 1.0 / k;
    let inv2 = inv * inv;
    let d1 = -s * ks * inv;
    let d3 = -s * (s + 1.0) * (s + 2.0) * ks * inv * inv2;
    let d5 = -s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * ks * inv * inv2 * inv2;
    0.5 * ks + d1 / 12.0 - d3 / 720.0 + d5 / 30_240.0
}

/// Asymptotic expansion of the partial sum `Σ_{j=1}^{k} j^{-s}` without its
/// constant term; `s = 1` uses the logarithm.
pub fn power_sum_expansion(s: f64, k: f64) -> f64 {
    let main = if (s - 1.0).abs() < 1e-15 {
        k.ln()
    } else {
        k.powf(1.0 - s) / (1.0 - s)
    };
    main + em_corrections(s, k)
}

/// Tail `Σ_{j ≥ m} j^{-s}` for `s > 1`, `m ≥ 1`. Terms below
/// [`TAIL_DIRECT`] are summed directly, the remainder by Euler–Maclaurin.
pub fn power_tail(s: f64, m: u64) -> f64 {
    debug_assert!(s > 1.0 && m >= 1);
    let mut acc = CompensatedSum::new();
    let mut j = m;
    while j < TAIL_DIRECT {
        acc.add((j as f64).powf(-s));
        j += 1;
    }
    // Σ_{i ≥ j} i^{-s} = j^{1-s}/(s-1) + j^{-s}/2 - B2/2! f'(j) - ...
    let jf = j as f64;
    let tail = jf.powf(1.0 - s) / (s - 1.0) + jf.powf(-s) - em_corrections(s, jf);
    acc.add(tail);
    acc.value()
}

/// Number of leading terms summed explicitly by [`power_tail`].
pub const TAIL_DIRECT: u64 = 64;

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> f64 {
    power_tail(s, 1)
}
