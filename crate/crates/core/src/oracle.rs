//! Exact laws used as ground truth for the Monte Carlo estimates.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::model::{Family, ModelSpec};
use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("point {re} + {im}i lies outside the model domain")]
    OutsideDomain { re: f64, im: f64 },
    #[error("rho = {0} must lie in (0, 1)")]
    InvalidRho(f64),
    #[error("tolerance {0} must be positive")]
    InvalidTolerance(f64),
    #[error("weight list needs at least one positive finite entry and no negative ones")]
    DegenerateWeights,
    #[error("the coefficient curve vanishes at this point")]
    VanishingNorm,
    #[error("at least one point is required")]
    NoPoints,
}

/// Law of the number of zeros of the hyperbolic `L = 1` process in
/// `|z| <= rho`: a sum of independent Bernoulli(`rho^{2j}`) variables.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CountLaw {
    pub rho: f64,
    pub truncation_j: usize,
    pub pmf: Vec<f64>,
    /// `rho^2 / (1 - rho^2)`.
    pub mean: f64,
    /// `rho^2 / (1 - rho^4)`.
    pub variance: f64,
}

impl CountLaw {
    pub fn pmf_mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn pmf_variance(&self) -> f64 {
        let m = self.pmf_mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - m) * (k as f64 - m) * p)
            .sum()
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }
}

/// Truncated list of weights `w_0..w_N` of an arbitrary analytic basis
/// `f_k(z) = w_k z^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightList {
    weights: Vec<f64>,
}

impl WeightList {
    pub fn new(weights: Vec<f64>) -> Result<Self, OracleError> {
        let valid =
            weights.iter().all(|w| w.is_finite() && *w >= 0.0) && weights.iter().any(|w| *w > 0.0);
        if !valid {
            return Err(OracleError::DegenerateWeights);
        }
        Ok(Self { weights })
    }

    /// The canonical weights of `model` truncated at `n`.
    pub fn canonical(model: &ModelSpec, n: usize) -> Self {
        let weights = model.log_weights(n).into_iter().map(f64::exp).collect();
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_domain(model: &ModelSpec, z: C64) -> Result<(), OracleError> {
    if model.in_domain(z) {
        Ok(())
    } else {
        Err(OracleError::OutsideDomain { re: z.re, im: z.im })
    }
}

/// First intensity (zeros per unit Euclidean area) of the canonical model.
pub fn ek_intensity(model: &ModelSpec, z: C64) -> Result<f64, OracleError> {
    check_domain(model, z)?;
    Ok(model.first_intensity(z))
}

/// `(1 / 4 pi) Delta_h ln K(z, z)` with the five point stencil of spacing
/// `h`: the intensity recovered numerically from the covariance diagonal.
pub fn kernel_laplacian_intensity(model: &ModelSpec, z: C64, h: f64) -> f64 {
    let g = |w: C64| model.log_kernel_diag(w);
    let lap = (g(z + h) + g(z - h) + g(z + C64::new(0.0, h)) + g(z - C64::new(0.0, h))
        - 4.0 * g(z))
        / (h * h);
    lap / (4.0 * PI)
}

/// Fubini-Study density `(1/pi) (f^#)^2` of the curve `z -> (w_k z^k)_k`.
///
/// With `p_k = w_k^2 |z|^{2k}` the Lagrange identity reduces the pair sum
/// to `Var_p(k) / (pi |z|^2)`, evaluated here in two passes in log space.
pub fn fs_density(weights: &WeightList, z: C64) -> Result<f64, OracleError> {
    let w = weights.weights();
    let s = z.norm_sqr();
    if s == 0.0 {
        if w[0] == 0.0 {
            return Err(OracleError::VanishingNorm);
        }
        let w1 = w.get(1).copied().unwrap_or(0.0);
        return Ok(w1 * w1 / (w[0] * w[0] * PI));
    }
    let ln_s = s.ln();
    let logs: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(k, wk)| {
            if *wk > 0.0 {
                2.0 * wk.ln() + k as f64 * ln_s
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(OracleError::VanishingNorm);
    }
    let p: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = p.iter().sum();
    let mean = p
        .iter()
        .enumerate()
        .map(|(k, pk)| k as f64 * pk)
        .sum::<f64>()
        / total;
    let var = p
        .iter()
        .enumerate()
        .map(|(k, pk)| (k as f64 - mean) * (k as f64 - mean) * pk)
        .sum::<f64>()
        / total;
    Ok(var / (PI * s))
}

/// Determinant of a small dense complex matrix (row-major, partial pivoting).
pub fn complex_determinant(mut a: Vec<C64>, n: usize) -> C64 {
    assert_eq!(a.len(), n * n);
    let mut det = C64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))
            .unwrap();
        if a[pivot * n + col].norm_sqr() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
            }
            det = -det;
        }
        let d = a[col * n + col];
        det *= d;
        for row in col + 1..n {
            let factor = a[row * n + col] / d;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for k in col..n {
                let sub = factor * a[col * n + k];
                a[row * n + k] -= sub;
            }
        }
    }
    det
}

/// `pi^{-k} det[(1 - z_i conj(z_j))^{-2}]`: the k-point correlation function
/// of the hyperbolic `L = 1` zero process.
pub fn pv_correlation(points: &[C64]) -> Result<f64, OracleError> {
    if points.is_empty() {
        return Err(OracleError::NoPoints);
    }
    if let Some(z) = points.iter().find(|z| z.norm_sqr() >= 1.0) {
        return Err(OracleError::OutsideDomain { re: z.re, im: z.im });
    }
    let k = points.len();
    let mut m = vec![C64::new(0.0, 0.0); k * k];
    for i in 0..k {
        for j in 0..k {
            let t = C64::new(1.0, 0.0) - points[i] * points[j].conj();
            m[i * k + j] = (t * t).inv();
        }
    }
    let det = complex_determinant(m, k).re.max(0.0);
    Ok(det / PI.powi(k as i32))
}

/// Pseudo-hyperbolic distance `|z - w| / |1 - conj(z) w|`.
pub fn pseudo_hyperbolic_distance(z: C64, w: C64) -> f64 {
    ((z - w) / (C64::new(1.0, 0.0) - z.conj() * w)).norm()
}

/// Normalized two-point function `p(z, w) / (p(z) p(w))` of the hyperbolic
/// `L = 1` process as a function of the pseudo-hyperbolic distance.
pub fn pv_pair_ratio(delta: f64) -> f64 {
    let a = 1.0 - delta * delta;
    1.0 - a * a
}

fn check_rho(rho: f64, tol: f64) -> Result<(), OracleError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(OracleError::InvalidRho(rho));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(OracleError::InvalidTolerance(tol));
    }
    Ok(())
}

/// Smallest `J` with `sum_{j > J} rho^{2j} < tol`.
fn bernoulli_cutoff(rho: f64, tol: f64) -> usize {
    let r2 = rho * rho;
    let mut j = 1usize;
    let mut tail = r2 * r2 / (1.0 - r2);
    while tail >= tol {
        j += 1;
        tail *= r2;
    }
    j
}

/// Exact count law of `n(rho)` for the hyperbolic `L = 1` process by
/// iterative convolution of the Bernoulli factors.
pub fn count_law_hyperbolic(rho: f64, tol: f64) -> Result<CountLaw, OracleError> {
    check_rho(rho, tol)?;
    let j_max = bernoulli_cutoff(rho, tol);
    let r2 = rho * rho;
    let mut pmf = vec![0.0; j_max + 1];
    pmf[0] = 1.0;
    let mut p = 1.0;
    for j in 1..=j_max {
        p *= r2;
        for k in (1..=j).rev() {
            pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    Ok(CountLaw {
        rho,
        truncation_j: j_max,
        pmf,
        mean: r2 / (1.0 - r2),
        variance: r2 / (1.0 - r2 * r2),
    })
}

/// `P(n(rho) = 0) = prod_{j >= 1} (1 - rho^{2j})`, truncated as in
/// [`count_law_hyperbolic`].
pub fn hole_prob_hyperbolic(rho: f64, tol: f64) -> Result<f64, OracleError> {
    check_rho(rho, tol)?;
    let j_max = bernoulli_cutoff(rho, tol);
    let r2 = rho * rho;
    let mut p = 1.0;
    let mut log = 0.0;
    for _ in 0..j_max {
        p *= r2;
        log += (-p).ln_1p();
    }
    Ok(log.exp())
}

/// `3 exp(-2 pi lambda / ||Delta phi||_1)`.
pub fn offord_bound(lambda: f64, laplacian_l1: f64) -> f64 {
    3.0 * (-2.0 * PI * lambda / laplacian_l1).exp()
}

/// Expected zero count of the centred disc `|z| <= r` (the integral of the
/// first intensity).
pub fn expected_count_centered_disc(model: &ModelSpec, r: f64) -> Result<f64, OracleError> {
    if model.family == Family::Hyperbolic && r >= 1.0 {
        return Err(OracleError::OutsideDomain { re: r, im: 0.0 });
    }
    Ok(model.mean_count_centered_disc(r))
}
