//! Monte Carlo estimators: moments, confidence intervals and distribution
//! distances.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Running mean and variance (Welford), mergeable across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }

    /// Normal-approximation interval for the mean.
    pub fn mean_ci(&self, z: f64) -> Interval {
        let h = z * self.std_err();
        Interval::new(self.mean - h, self.mean + h)
    }

    /// Normal interval for the variance from `Var(s^2) ≈ 2 s^4 / (n - 1)`,
    /// which assumes near-Gaussian data.
    pub fn variance_ci(&self, z: f64) -> Interval {
        let v = self.variance();
        let h = z * v * (2.0 / (self.count.saturating_sub(1).max(1)) as f64).sqrt();
        Interval::new((v - h).max(0.0), v + h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson(k: u64, n: u64, z: f64) -> Interval {
    if n == 0 {
        return Interval::new(0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Interval::new((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Standard error implied by the Wilson interval: its half-width at `z = 1`.
pub fn wilson_se(k: u64, n: u64) -> f64 {
    wilson(k, n, 1.0).width() / 2.0
}

/// One-sided Wilson upper bound at confidence `1 - alpha`.
pub fn wilson_upper(k: u64, n: u64, alpha: f64) -> f64 {
    wilson(k, n, normal_quantile(1.0 - alpha)).hi
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Inverse standard normal distribution function (Acklam's rational
/// approximation polished by one Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * core::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

/// Kolmogorov–Smirnov distance between the empirical law of `xs` and
/// `N(0, 1)`.
pub fn ks_normal(xs: &[f64]) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Two-sample Kolmogorov–Smirnov distance, exact in the presence of ties.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS distance at level `alpha`.
pub fn ks_two_sample_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

/// Histogram of nonnegative integer outcomes.
pub fn integer_histogram(values: &[usize]) -> Vec<u64> {
    let len = values.iter().copied().max().map_or(0, |m| m + 1);
    let mut h = vec![0u64; len];
    for &v in values {
        h[v] += 1;
    }
    h
}

/// Normalizes a histogram to an empirical probability mass function.
pub fn empirical_pmf(hist: &[u64]) -> Vec<f64> {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return vec![0.0; hist.len()];
    }
    hist.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Total variation distance `½ Σ |p_k - q_k|`, zero padding the shorter.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    let at = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|k| (at(p, k) - at(q, k)).abs()).sum::<f64>()
}

/// Standard error of a difference of independent means.
pub fn joint_se(a: &Moments, b: &Moments) -> f64 {
    (a.std_err().powi(2) + b.std_err().powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 37) % 101) as f64 * 0.1 - 3.0)
            .collect();
        let m = Moments::from_slice(&xs);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((m.mean - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-10);
        let mut a = Moments::from_slice(&xs[..313]);
        a.merge(&Moments::from_slice(&xs[313..]));
        assert!((a.mean - mean).abs() < 1e-12);
        assert!((a.variance() - var).abs() < 1e-10);
    }

    #[test]
    fn quantile_inverts_cdf() {
        assert!((normal_quantile(0.975) - Z95).abs() < 1e-12);
        for &p in &[1e-9, 1e-4, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-13 * p.max(1e-3) + 1e-15);
        }
    }

    #[test]
    fn wilson_known_values() {
        // 0 of 10: upper end z^2 / (n + z^2).
        let w = wilson(0, 10, Z95);
        assert_eq!(w.lo, 0.0);
        assert!((w.hi - Z95 * Z95 / (10.0 + Z95 * Z95)).abs() < 1e-12);
        let w = wilson(50, 100, Z95);
        assert!((w.lo + w.hi - 1.0).abs() < 1e-12);
        assert!(w.width() > 0.0);
    }

    #[test]
    fn ks_of_quantile_grid_is_small() {
        let n = 2000;
        let xs: Vec<f64> = (0..n)
            .map(|i| normal_quantile((i as f64 + 0.5) / n as f64))
            .collect();
        assert!((ks_normal(&xs) - 0.5 / n as f64).abs() < 1e-9);
    }

    #[test]
    fn two_sample_ks_with_ties() {
        let a = [0.0, 0.0, 1.0, 2.0];
        let b = [0.0, 1.0, 1.0, 1.0];
        // F_a(0) = 1/2, F_b(0) = 1/4; F_a(1) = 3/4, F_b(1) = 1.
        assert!((ks_two_sample(&a, &b) - 0.25).abs() < 1e-15);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn tv_and_histogram() {
        let h = integer_histogram(&[0, 2, 2, 3]);
        assert_eq!(h, vec![1, 0, 2, 1]);
        let p = empirical_pmf(&h);
        assert!((total_variation(&p, &[0.25, 0.0, 0.5, 0.25]) - 0.0).abs() < 1e-15);
        assert!((total_variation(&[1.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
