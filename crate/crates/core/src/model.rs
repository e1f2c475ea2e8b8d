//! The three canonical Gaussian analytic function ensembles.
//!
//! Each model is `f(z) = sum_k zeta_k w_k z^k` with i.i.d. standard complex
//! Gaussian `zeta_k` (`E|zeta|^2 = 1`) and weights
//!
//! * elliptic: `w_k^2 = L(L-1)...(L-k+1)/k!`, a polynomial of degree `L`;
//! * flat: `w_k^2 = L^k/k!`, an entire function;
//! * hyperbolic: `w_k^2 = L(L+1)...(L+k-1)/k!`, analytic in the unit disc.
//!
//! Weights are only ever handled through the ratio `w_{k+1}^2 / w_k^2`
//! accumulated in log space.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;
use core::str::FromStr;

use crate::rng::{CounterRng, Purpose};
use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

/// Tolerance handed to [`ModelSpec::truncation_index`] by the harnesses
/// before the index is doubled.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// Largest radius at which hyperbolic samples are evaluated.
pub const HYPERBOLIC_MAX_RADIUS: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid intensity L = {value} for the {family} model")]
    InvalidIntensity { family: Family, value: f64 },
    #[error("point {re} + {im}i lies outside the {family} domain")]
    OutsideDomain { family: Family, re: f64, im: f64 },
    #[error("radius {radius} is not admissible for the {family} model: {reason}")]
    InvalidRadius {
        family: Family,
        radius: f64,
        reason: &'static str,
    },
    #[error("tolerance {0} must lie in (0, 1)")]
    InvalidTolerance(f64),
    #[error("|z| = {modulus} exceeds the certified radius {radius} of this sample")]
    BeyondCertifiedRadius { modulus: f64, radius: f64 },
    #[error("invalid isometry parameters: {0}")]
    InvalidIsometry(&'static str),
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
    #[error("unknown model family '{0}'")]
    UnknownFamily(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Family {
    Elliptic,
    Flat,
    Hyperbolic,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Elliptic => "elliptic",
            Family::Flat => "flat",
            Family::Hyperbolic => "hyperbolic",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "elliptic" => Ok(Family::Elliptic),
            "flat" => Ok(Family::Flat),
            "hyperbolic" => Ok(Family::Hyperbolic),
            other => Err(ModelError::UnknownFamily(other.to_string())),
        }
    }
}

/// Density of the normalized invariant area measure `m*` with respect to
/// Lebesgue measure in the planar chart.
pub fn invariant_density(family: Family, z: C64) -> f64 {
    let s = z.norm_sqr();
    match family {
        Family::Flat => 1.0 / PI,
        Family::Hyperbolic => 1.0 / (PI * (1.0 - s) * (1.0 - s)),
        Family::Elliptic => 1.0 / (PI * (1.0 + s) * (1.0 + s)),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub family: Family,
    #[cfg_attr(feature = "serde", serde(rename = "L"))]
    pub intensity: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub label: String,
}

impl ModelSpec {
    pub fn new(family: Family, intensity: f64) -> Result<Self, ModelError> {
        let ok = match family {
            Family::Elliptic => {
                intensity >= 1.0 && intensity.fract() == 0.0 && intensity <= u32::MAX as f64
            }
            Family::Flat | Family::Hyperbolic => intensity > 0.0 && intensity.is_finite(),
        };
        if !ok {
            return Err(ModelError::InvalidIntensity {
                family,
                value: intensity,
            });
        }
        let label = alloc::format!("{}(L={})", family, intensity);
        Ok(Self {
            family,
            intensity,
            label,
        })
    }

    pub fn elliptic(degree: u32) -> Result<Self, ModelError> {
        Self::new(Family::Elliptic, f64::from(degree))
    }

    pub fn flat(intensity: f64) -> Result<Self, ModelError> {
        Self::new(Family::Flat, intensity)
    }

    pub fn hyperbolic(intensity: f64) -> Result<Self, ModelError> {
        Self::new(Family::Hyperbolic, intensity)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Polynomial degree of the elliptic model.
    pub fn degree(&self) -> Option<usize> {
        match self.family {
            Family::Elliptic => Some(self.intensity as usize),
            _ => None,
        }
    }

    /// `w_{k+1}^2 / w_k^2`.
    pub fn weight_ratio_sq(&self, k: usize) -> f64 {
        let l = self.intensity;
        let k = k as f64;
        match self.family {
            Family::Elliptic => ((l - k) / (k + 1.0)).max(0.0),
            Family::Flat => l / (k + 1.0),
            Family::Hyperbolic => (l + k) / (k + 1.0),
        }
    }

    /// `ln w_k` (negative infinity past the elliptic degree).
    pub fn log_weight(&self, k: usize) -> f64 {
        let mut acc = 0.0;
        for j in 0..k {
            let r = self.weight_ratio_sq(j);
            if r == 0.0 {
                return f64::NEG_INFINITY;
            }
            acc += r.ln();
        }
        0.5 * acc
    }

    /// `ln w_0, ..., ln w_n` by the cumulative recurrence.
    pub fn log_weights(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        for k in 0..=n {
            out.push(0.5 * acc);
            let r = self.weight_ratio_sq(k);
            acc = if r == 0.0 {
                f64::NEG_INFINITY
            } else {
                acc + r.ln()
            };
        }
        out
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.log_weight(k).exp()
    }

    pub fn in_domain(&self, z: C64) -> bool {
        match self.family {
            Family::Hyperbolic => z.norm_sqr() < 1.0,
            _ => z.re.is_finite() && z.im.is_finite(),
        }
    }

    fn check_domain(&self, z: C64) -> Result<(), ModelError> {
        if self.in_domain(z) {
            Ok(())
        } else {
            Err(ModelError::OutsideDomain {
                family: self.family,
                re: z.re,
                im: z.im,
            })
        }
    }

    /// `K(z, w) = E f(z) conj(f(w)) = sum_k w_k^2 (z conj(w))^k` in closed form.
    pub fn covariance(&self, z: C64, w: C64) -> Result<C64, ModelError> {
        self.check_domain(z)?;
        self.check_domain(w)?;
        let t = z * w.conj();
        let l = self.intensity;
        Ok(match self.family {
            Family::Flat => (t * l).exp(),
            Family::Elliptic => (C64::new(1.0, 0.0) + t).powi(l as i32),
            Family::Hyperbolic => ((C64::new(1.0, 0.0) - t).ln() * (-l)).exp(),
        })
    }

    /// `ln K(z, z)`.
    pub fn log_kernel_diag(&self, z: C64) -> f64 {
        let s = z.norm_sqr();
        let l = self.intensity;
        match self.family {
            Family::Flat => l * s,
            Family::Elliptic => l * s.ln_1p(),
            Family::Hyperbolic => -l * (-s).ln_1p(),
        }
    }

    /// `d/dz log K(z, z)`, the smooth part of `f'/f`.
    pub fn log_kernel_gradient(&self, z: C64) -> C64 {
        let s = z.norm_sqr();
        let l = self.intensity;
        let g = match self.family {
            Family::Flat => l,
            Family::Elliptic => l / (1.0 + s),
            Family::Hyperbolic => l / (1.0 - s),
        };
        z.conj() * g
    }

    pub fn kernel_diag(&self, z: C64) -> f64 {
        self.log_kernel_diag(z).exp()
    }

    /// Expected number of zeros per unit Euclidean area at `z`.
    pub fn first_intensity(&self, z: C64) -> f64 {
        self.intensity * invariant_density(self.family, z)
    }

    /// Expected zero count of the centred disc `|z| <= r`.
    pub fn mean_count_centered_disc(&self, r: f64) -> f64 {
        let s = r * r;
        let l = self.intensity;
        match self.family {
            Family::Flat => l * s,
            Family::Hyperbolic => l * s / (1.0 - s),
            Family::Elliptic => l * s / (1.0 + s),
        }
    }

    /// Typical spacing between zeros near a point of modulus `modulus`.
    pub fn local_spacing(&self, modulus: f64) -> f64 {
        1.0 / (PI * self.first_intensity(C64::new(modulus, 0.0))).sqrt()
    }

    fn check_radius(&self, radius: f64) -> Result<(), ModelError> {
        let bad = |reason| ModelError::InvalidRadius {
            family: self.family,
            radius,
            reason,
        };
        if radius.is_nan() || radius < 0.0 || !radius.is_finite() {
            return Err(bad("radius must be finite and nonnegative"));
        }
        if self.family == Family::Hyperbolic && radius >= 1.0 {
            return Err(bad("zeros accumulate at the unit circle"));
        }
        Ok(())
    }

    /// Relative variance carried by the terms `k > n` at `|z| = radius`.
    pub fn tail_ratio(&self, radius: f64, n: usize) -> Result<f64, ModelError> {
        self.check_radius(radius)?;
        if let Some(d) = self.degree() {
            if n >= d {
                return Ok(0.0);
            }
        }
        let terms = self.relative_terms(radius, 0.0);
        Ok(terms.iter().skip(n + 1).rev().sum())
    }

    /// `w_k^2 radius^{2k} / K(radius, radius)` up to the point where the
    /// remaining terms are below `floor` in total (geometric tail bound).
    fn relative_terms(&self, radius: f64, floor: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if radius == 0.0 {
            out.push(1.0);
            return out;
        }
        let ln_r2 = 2.0 * radius.ln();
        let log_total = self.log_kernel_diag(C64::new(radius, 0.0));
        let r2 = radius * radius;
        let mut lw2 = 0.0;
        let floor_ln = if floor > 0.0 { floor.ln() } else { -745.0 };
        for k in 0.. {
            let lt = lw2 + k as f64 * ln_r2 - log_total;
            out.push(lt.exp());
            let ratio = self.weight_ratio_sq(k) * r2;
            if ratio == 0.0 {
                break;
            }
            if ratio < 1.0 {
                // Remaining tail <= t_{k+1} / (1 - q) with q bounding later ratios.
                let q = match self.family {
                    Family::Hyperbolic if self.intensity < 1.0 => r2,
                    _ => ratio,
                };
                if q < 1.0 && lt + q.ln() - (1.0 - q).ln() < floor_ln - 40.0 {
                    break;
                }
            }
            lw2 += self.weight_ratio_sq(k).ln();
            if k > 50_000_000 {
                break;
            }
        }
        out
    }

    /// Smallest `N` whose tail variance ratio at `radius` is at most `tol^2`.
    pub fn truncation_index(&self, radius: f64, tol: f64) -> Result<usize, ModelError> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(ModelError::InvalidTolerance(tol));
        }
        if let Some(d) = self.degree() {
            return Ok(d);
        }
        self.check_radius(radius)?;
        let target = tol * tol;
        let terms = self.relative_terms(radius, target);
        let mut suffix = 0.0;
        let mut n = terms.len().saturating_sub(1);
        for k in (1..terms.len()).rev() {
            suffix += terms[k];
            if suffix > target {
                break;
            }
            n = k - 1;
        }
        Ok(n)
    }
}

/// Truncation order together with the radius it certifies.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truncation {
    pub n: usize,
    pub radius: f64,
}

impl Truncation {
    /// Harness rule: index at tolerance [`TRUNCATION_TOL`] for a slightly
    /// enlarged radius (room for boundary dilation), then doubled.
    pub fn for_radius(model: &ModelSpec, radius: f64) -> Result<Self, ModelError> {
        if let Some(d) = model.degree() {
            return Ok(Self {
                n: d,
                radius: f64::INFINITY,
            });
        }
        let certified = match model.family {
            Family::Hyperbolic => {
                if radius > HYPERBOLIC_MAX_RADIUS {
                    return Err(ModelError::InvalidRadius {
                        family: model.family,
                        radius,
                        reason: "hyperbolic working radius is capped at 0.99",
                    });
                }
                (radius * 1.01).min(0.5 * (1.0 + radius))
            }
            _ => radius * 1.01,
        };
        let n = 2 * model.truncation_index(certified, TRUNCATION_TOL)?;
        Ok(Self {
            n: n.max(1),
            radius: certified,
        })
    }

    /// Largest radius certified by a given order under the harness rule.
    pub fn certified(model: &ModelSpec, n: usize) -> Self {
        if let Some(d) = model.degree() {
            return Self {
                n: n.max(d),
                radius: f64::INFINITY,
            };
        }
        let half = n / 2;
        let target = TRUNCATION_TOL * TRUNCATION_TOL;
        let ok = |r: f64| {
            model
                .tail_ratio(r, half)
                .map(|t| t <= target)
                .unwrap_or(false)
        };
        let mut lo = 0.0;
        let mut hi = match model.family {
            Family::Hyperbolic => HYPERBOLIC_MAX_RADIUS,
            _ => {
                let mut h = 1.0;
                while ok(h) && h < 1e3 {
                    h *= 2.0;
                }
                h
            }
        };
        if ok(hi) {
            lo = hi;
        }
        for _ in 0..60 {
            if hi - lo <= 1e-12 * hi.max(1e-300) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self { n, radius: lo }
    }
}

/// Domain isometry for one of the three families.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum IsometrySpec {
    /// `z -> e^{i theta} z + shift`.
    Flat { theta: f64, shift: C64 },
    /// `z -> e^{i theta} (z - center) / (1 - conj(center) z)`.
    Hyperbolic { theta: f64, center: C64 },
    /// `z -> (a z + b) / (-conj(b) z + conj(a))` with `|a|^2 + |b|^2 = 1`.
    Elliptic { a: C64, b: C64 },
}

fn infinity() -> C64 {
    C64::new(f64::INFINITY, f64::INFINITY)
}

fn is_infinite(z: C64) -> bool {
    !z.re.is_finite() || !z.im.is_finite()
}

impl IsometrySpec {
    pub fn flat(theta: f64, shift: C64) -> Self {
        IsometrySpec::Flat { theta, shift }
    }

    pub fn hyperbolic(theta: f64, center: C64) -> Result<Self, ModelError> {
        if center.norm() >= 1.0 {
            return Err(ModelError::InvalidIsometry(
                "disc automorphism needs |center| < 1",
            ));
        }
        Ok(IsometrySpec::Hyperbolic { theta, center })
    }

    /// Rescales `(a, b)` onto the unit sphere of `C^2`.
    pub fn elliptic(a: C64, b: C64) -> Result<Self, ModelError> {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if n.is_nan() || n <= 0.0 || !n.is_finite() {
            return Err(ModelError::InvalidIsometry("(a, b) must be nonzero"));
        }
        Ok(IsometrySpec::Elliptic { a: a / n, b: b / n })
    }

    pub fn identity(family: Family) -> Self {
        match family {
            Family::Flat => Self::flat(0.0, C64::new(0.0, 0.0)),
            Family::Hyperbolic => IsometrySpec::Hyperbolic {
                theta: 0.0,
                center: C64::new(0.0, 0.0),
            },
            Family::Elliptic => IsometrySpec::Elliptic {
                a: C64::new(1.0, 0.0),
                b: C64::new(0.0, 0.0),
            },
        }
    }

    pub fn family(&self) -> Family {
        match self {
            IsometrySpec::Flat { .. } => Family::Flat,
            IsometrySpec::Hyperbolic { .. } => Family::Hyperbolic,
            IsometrySpec::Elliptic { .. } => Family::Elliptic,
        }
    }

    pub fn apply(&self, z: C64) -> C64 {
        match *self {
            IsometrySpec::Flat { theta, shift } => C64::from_polar(1.0, theta) * z + shift,
            IsometrySpec::Hyperbolic { theta, center } => {
                C64::from_polar(1.0, theta) * (z - center)
                    / (C64::new(1.0, 0.0) - center.conj() * z)
            }
            IsometrySpec::Elliptic { a, b } => {
                if is_infinite(z) {
                    return if b.norm_sqr() == 0.0 {
                        infinity()
                    } else {
                        -a / b.conj()
                    };
                }
                let den = -b.conj() * z + a.conj();
                if den.norm_sqr() == 0.0 {
                    infinity()
                } else {
                    (a * z + b) / den
                }
            }
        }
    }

    pub fn inverse(&self, w: C64) -> C64 {
        match *self {
            IsometrySpec::Flat { theta, shift } => (w - shift) * C64::from_polar(1.0, -theta),
            IsometrySpec::Hyperbolic { theta, center } => {
                let u = w * C64::from_polar(1.0, -theta);
                (u + center) / (C64::new(1.0, 0.0) + center.conj() * u)
            }
            IsometrySpec::Elliptic { a, b } => {
                if is_infinite(w) {
                    return if b.norm_sqr() == 0.0 {
                        infinity()
                    } else {
                        a.conj() / b.conj()
                    };
                }
                let den = b.conj() * w + a;
                if den.norm_sqr() == 0.0 {
                    infinity()
                } else {
                    (a.conj() * w - b) / den
                }
            }
        }
    }

    /// Image of the closed disc `|z - center| <= radius` as a disc, or
    /// `None` when the map sends it onto the outside of a circle.
    pub fn image_of_disc(&self, center: C64, radius: f64) -> Option<(C64, f64)> {
        let p: [C64; 3] = core::array::from_fn(|k| {
            self.apply(center + C64::from_polar(radius, TAU * k as f64 / 3.0))
        });
        if p.iter().any(|z| is_infinite(*z)) {
            return None;
        }
        // Circumcentre of the three image points.
        let (b, c) = (p[1] - p[0], p[2] - p[0]);
        let d = 2.0 * (b.re * c.im - b.im * c.re);
        if d == 0.0 {
            return None;
        }
        let (b2, c2) = (b.norm_sqr(), c.norm_sqr());
        let o = C64::new(c.im * b2 - b.im * c2, b.re * c2 - c.re * b2) / d;
        let r = o.norm();
        let o = o + p[0];
        let inner = self.apply(center);
        if is_infinite(inner) || (inner - o).norm() > r {
            return None;
        }
        Some((o, r))
    }

    /// `|gamma'(z)|^2`, the area Jacobian.
    pub fn jacobian(&self, z: C64) -> f64 {
        match *self {
            IsometrySpec::Flat { .. } => 1.0,
            IsometrySpec::Hyperbolic { center, .. } => {
                let den = (C64::new(1.0, 0.0) - center.conj() * z).norm_sqr();
                let num = 1.0 - center.norm_sqr();
                num * num / (den * den)
            }
            IsometrySpec::Elliptic { a, b } => {
                let den = (-b.conj() * z + a.conj()).norm_sqr();
                1.0 / (den * den)
            }
        }
    }
}

/// One realized Gaussian analytic function.
///
/// Coefficients are stored twice: the raw draws `zeta_k`, and the series
/// `d_k = zeta_k w_k S^k` in the scaled variable `u = z / S` with `S` the
/// certified radius, which keeps every term representable for large `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GafSample {
    model: ModelSpec,
    truncation_n: usize,
    coeffs: Vec<C64>,
    seed: u64,
    trial: u64,
    radius: f64,
    scale: f64,
    series: Vec<C64>,
}

impl GafSample {
    /// Draws the coefficients of trial `trial` from the stream keyed by `seed`.
    pub fn draw(model: &ModelSpec, truncation: &Truncation, seed: u64, trial: u64) -> Self {
        let mut rng = CounterRng::new(seed, Purpose::Coefficients, trial);
        let coeffs = (0..=truncation.n).map(|_| rng.complex_normal()).collect();
        Self::assemble(model.clone(), coeffs, truncation.radius, seed, trial)
    }

    /// Builds a sample from explicit `zeta_k` (replay or injected test input).
    pub fn from_coefficients(
        model: &ModelSpec,
        coeffs: Vec<C64>,
        radius: f64,
        seed: u64,
        trial: u64,
    ) -> Result<Self, ModelError> {
        if coeffs.is_empty() {
            return Err(ModelError::CoefficientLength {
                got: 0,
                expected: 1,
            });
        }
        if let Some(d) = model.degree() {
            if coeffs.len() != d + 1 {
                return Err(ModelError::CoefficientLength {
                    got: coeffs.len(),
                    expected: d + 1,
                });
            }
        } else {
            model.check_radius(radius)?;
        }
        let radius = if model.degree().is_some() {
            f64::INFINITY
        } else {
            radius
        };
        Ok(Self::assemble(model.clone(), coeffs, radius, seed, trial))
    }

    /// Builds a sample whose series is `sum_k series[k] z^k` exactly, by
    /// dividing out the model weights.
    pub fn from_series(model: &ModelSpec, series: &[C64], radius: f64) -> Result<Self, ModelError> {
        let n = model.degree().map_or(series.len().saturating_sub(1), |d| d);
        let lw = model.log_weights(n);
        let mut coeffs = alloc::vec![C64::new(0.0, 0.0); n + 1];
        for (k, c) in series.iter().enumerate().take(n + 1) {
            coeffs[k] = c / lw[k].exp();
        }
        Self::from_coefficients(model, coeffs, radius, 0, 0)
    }

    fn assemble(model: ModelSpec, coeffs: Vec<C64>, radius: f64, seed: u64, trial: u64) -> Self {
        let truncation_n = coeffs.len() - 1;
        let scale = if radius.is_finite() && radius > 0.0 {
            radius
        } else {
            1.0
        };
        let lw = model.log_weights(truncation_n);
        let ln_s = scale.ln();
        let series = coeffs
            .iter()
            .zip(&lw)
            .enumerate()
            .map(|(k, (z, l))| {
                let m = (l + k as f64 * ln_s).exp();
                if m == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    z * m
                }
            })
            .collect();
        Self {
            model,
            truncation_n,
            coeffs,
            seed,
            trial,
            radius,
            scale,
            series,
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn truncation_n(&self) -> usize {
        self.truncation_n
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Radius within which evaluation is certified (infinite for elliptic).
    pub fn certified_radius(&self) -> f64 {
        self.radius
    }

    /// Scaled series `d_k` and the scale `S` (`f(z) = sum d_k (z/S)^k`).
    pub fn scaled_series(&self) -> (&[C64], f64) {
        (&self.series, self.scale)
    }

    fn is_elliptic_far(&self, z: C64) -> bool {
        self.model.family == Family::Elliptic && z.norm_sqr() > 1.0
    }

    /// `q(y) = y^L f(1/y)` and `q'(y)` for the elliptic model.
    fn reversed(&self, y: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in &self.series {
            dp = dp * y + p;
            p = p * y + c;
        }
        (p, dp)
    }

    /// `f(z)` without the radius check.
    pub fn value(&self, z: C64) -> C64 {
        if self.is_elliptic_far(z) {
            let (q, _) = self.reversed(z.inv());
            return q * z.powi(self.truncation_n as i32);
        }
        let u = z / self.scale;
        self.series
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, c| acc * u + c)
    }

    /// `(f(z), f'(z))` using the exact derivative of the truncated series.
    pub fn value_and_derivative(&self, z: C64) -> (C64, C64) {
        if self.is_elliptic_far(z) {
            let y = z.inv();
            let l = self.truncation_n as i32;
            let (q, dq) = self.reversed(y);
            let zl = z.powi(l);
            let f = q * zl;
            let df = (q * f64::from(l) - dq * y) * zl * y;
            return (f, df);
        }
        let u = z / self.scale;
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in self.series.iter().rev() {
            dp = dp * u + p;
            p = p * u + c;
        }
        (p, dp / self.scale)
    }

    /// `sqrt(K(z, z))`.
    pub fn normalizer(&self, z: C64) -> f64 {
        (0.5 * self.model.log_kernel_diag(z)).exp()
    }

    /// `f(z) / sqrt(K(z, z))`, well scaled at large `|z|` for elliptic.
    pub fn normalized_value(&self, z: C64) -> C64 {
        if self.is_elliptic_far(z) {
            let y = z.inv();
            let (q, _) = self.reversed(y);
            let l = self.truncation_n as f64;
            let phase = C64::from_polar(1.0, l * z.arg());
            return q * phase * (-0.5 * l * y.norm_sqr().ln_1p()).exp();
        }
        self.value(z) / self.normalizer(z)
    }

    fn check_radius(&self, z: C64) -> Result<(), ModelError> {
        self.model.check_domain(z)?;
        let m = z.norm();
        if m > self.radius {
            return Err(ModelError::BeyondCertifiedRadius {
                modulus: m,
                radius: self.radius,
            });
        }
        Ok(())
    }

    /// Checked evaluation of `f(z)`.
    pub fn evaluate(&self, z: C64) -> Result<C64, ModelError> {
        self.check_radius(z)?;
        Ok(self.value(z))
    }

    /// Checked evaluation of `f(z) / sqrt(K(z, z))`.
    pub fn evaluate_normalized(&self, z: C64) -> Result<C64, ModelError> {
        self.check_radius(z)?;
        Ok(self.normalized_value(z))
    }

    /// Coefficients `a_j` with `f(center + rho u) = sum_j a_j u^j` exactly on
    /// the truncated series. `None` if the shift is not representable.
    pub fn series_about(&self, center: C64, rho: f64) -> Option<Vec<C64>> {
        let n = self.truncation_n;
        if center.norm_sqr() == 0.0 {
            let t = rho / self.scale;
            let mut pw = 1.0;
            let mut out = Vec::with_capacity(n + 1);
            for c in &self.series {
                out.push(c * pw);
                pw *= t;
            }
            return Some(out);
        }
        // Shift in the variable z / S' with S' = |center| + rho so that the
        // shift point sits inside the unit disc.
        let big = center.norm() + rho;
        let t = big / self.scale;
        let ln_t = t.ln();
        let mut a: Vec<C64> = self
            .coeffs
            .iter()
            .zip(&self.series)
            .enumerate()
            .map(|(k, (_, d))| {
                if d.norm_sqr() == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    d * (k as f64 * ln_t).exp()
                }
            })
            .collect();
        let t0 = center / big;
        for i in 0..n {
            for k in (i..n).rev() {
                let add = t0 * a[k + 1];
                a[k] += add;
            }
        }
        let step = rho / big;
        let mut pw = 1.0;
        for c in a.iter_mut() {
            *c *= pw;
            pw *= step;
        }
        if a.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            Some(a)
        } else {
            None
        }
    }
}

/// Draws a sample with truncation order `truncation_n`, certified for the
/// largest radius that order supports.
pub fn sample(model: &ModelSpec, truncation_n: usize, seed: u64, trial: u64) -> GafSample {
    GafSample::draw(
        model,
        &Truncation::certified(model, truncation_n),
        seed,
        trial,
    )
}
