//! Radial test functions `h(z) = (1 - |z|^2)^p` on the unit disc.

use core::f64::consts::PI;

use crate::model::{Family, ModelSpec};
use crate::quad;
use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum TestFnError {
    /// `p < 3` is not twice continuously differentiable across `|z| = 1`.
    #[error("test function exponent p = {0} must be at least 3")]
    NotC2(u32),
}

/// `h(z) = (1 - |z|^2)^p` for `|z| <= 1`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestFunction {
    p: u32,
    laplacian_l1: f64,
    laplacian_l2_sq: f64,
    gradient_l2_sq: f64,
    integral: f64,
}

impl TestFunction {
    pub fn new(p: u32) -> Result<Self, TestFnError> {
        if p < 3 {
            return Err(TestFnError::NotC2(p));
        }
        let q = p as f64;
        Ok(Self {
            p,
            laplacian_l1: 8.0 * PI * (1.0 - 1.0 / q).powi(p as i32 - 1),
            laplacian_l2_sq: 16.0
                * PI
                * q
                * q
                * ((q - 1.0) * (q - 1.0) / (2.0 * q - 3.0) - q + q * q / (2.0 * q - 1.0)),
            gradient_l2_sq: 2.0 * PI * q / (2.0 * q - 1.0),
            integral: PI / (q + 1.0),
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    /// Profile as a function of `s = |z|^2`.
    pub fn profile(&self, s: f64) -> f64 {
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(self.p as i32)
        }
    }

    pub fn value(&self, z: C64) -> f64 {
        self.profile(z.norm_sqr())
    }

    /// `Δh = 4p (1 - s)^{p-2} (p s - 1)` with `s = |z|^2`.
    pub fn laplacian_profile(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let q = self.p as f64;
        4.0 * q * (1.0 - s).powi(self.p as i32 - 2) * (q * s - 1.0)
    }

    pub fn laplacian(&self, z: C64) -> f64 {
        self.laplacian_profile(z.norm_sqr())
    }

    /// `|∇h|` at modulus `t`.
    pub fn gradient_norm(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 0.0;
        }
        let q = self.p as f64;
        2.0 * q * t * (1.0 - t * t).powi(self.p as i32 - 1)
    }

    /// `||Δh||_1`, invariant under `h -> h(·/r)`.
    pub fn laplacian_l1(&self) -> f64 {
        self.laplacian_l1
    }

    /// `||Δh||_2^2`; the scaled function has `r^{-2}` times this.
    pub fn laplacian_l2_sq(&self) -> f64 {
        self.laplacian_l2_sq
    }

    /// `||∇h||_2^2`, invariant under `h -> h(·/r)`.
    pub fn gradient_l2_sq(&self) -> f64 {
        self.gradient_l2_sq
    }

    /// `∫ h dm = π / (p + 1)`.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// `Z_r(h) = Σ h(z_i / r)`.
    pub fn linear_statistic(&self, points: &[C64], r: f64) -> f64 {
        let inv = 1.0 / (r * r);
        points
            .iter()
            .map(|z| self.profile(z.norm_sqr() * inv))
            .sum()
    }

    /// `E Z_r(h) = ∫ h(z/r) ρ_1(z) dm(z)` for a test function centred at
    /// the origin.
    pub fn expected_linear_statistic(&self, model: &ModelSpec, r: f64) -> f64 {
        if model.family == Family::Flat {
            return model.intensity * r * r * self.integral / PI;
        }
        let rr = match model.family {
            Family::Hyperbolic => r.min(1.0),
            _ => r,
        };
        quad::radial_integral(
            |t| self.profile((t / r) * (t / r)) * model.first_intensity(C64::new(t, 0.0)),
            rr,
            1e-13,
        )
        .value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, radial_integral};

    #[test]
    fn rejects_rough_exponents() {
        assert_eq!(TestFunction::new(2), Err(TestFnError::NotC2(2)));
        assert!(TestFunction::new(3).is_ok());
    }

    #[test]
    fn closed_form_norms_match_quadrature() {
        for p in 3..=6 {
            let h = TestFunction::new(p).unwrap();
            let tol = 1e-13;
            let l1 = radial_integral(|t| h.laplacian_profile(t * t).abs(), 1.0, tol);
            let l2 = radial_integral(|t| h.laplacian_profile(t * t).powi(2), 1.0, tol);
            let g2 = radial_integral(|t| h.gradient_norm(t).powi(2), 1.0, tol);
            let int = radial_integral(|t| h.profile(t * t), 1.0, tol);
            // The kink of |Δh| at |z|^2 = 1/p is resolved by splitting there.
            let kink = (1.0 / p as f64).sqrt();
            let l1_split = radial_integral(|t| h.laplacian_profile(t * t).abs(), kink, tol).value
                + integrate(
                    |t| h.laplacian_profile(t * t).abs() * core::f64::consts::TAU * t,
                    kink,
                    1.0,
                    tol,
                    tol,
                    4096,
                )
                .value;
            assert!((l1.value - h.laplacian_l1()).abs() < 1e-10, "p={p}");
            assert!((l1_split - h.laplacian_l1()).abs() < 1e-10, "p={p}");
            assert!((l2.value - h.laplacian_l2_sq()).abs() < 1e-10, "p={p}");
            assert!((g2.value - h.gradient_l2_sq()).abs() < 1e-10, "p={p}");
            assert!((int.value - h.integral()).abs() < 1e-10, "p={p}");
        }
    }

    #[test]
    fn laplacian_integrates_to_zero() {
        for p in 3..=5 {
            let h = TestFunction::new(p).unwrap();
            let q = radial_integral(|t| h.laplacian_profile(t * t), 1.0, 1e-14);
            assert!(q.value.abs() < 1e-9);
        }
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let h = TestFunction::new(4).unwrap();
        let d = 1e-4;
        for &(x, y) in &[(0.1, 0.2), (-0.4, 0.3), (0.0, 0.7), (0.55, -0.5)] {
            let z = C64::new(x, y);
            let lap = (h.value(z + d)
                + h.value(z - d)
                + h.value(z + C64::new(0.0, d))
                + h.value(z - C64::new(0.0, d))
                - 4.0 * h.value(z))
                / (d * d);
            assert!(
                (lap - h.laplacian(z)).abs() < 1e-5,
                "{lap} vs {}",
                h.laplacian(z)
            );
        }
    }

    #[test]
    fn laplacian_vanishes_continuously_at_edge() {
        let h = TestFunction::new(3).unwrap();
        assert!(h.laplacian_profile(1.0 - 1e-9).abs() < 1e-7);
        assert_eq!(h.laplacian_profile(1.0), 0.0);
    }

    #[test]
    fn specific_values() {
        let h = TestFunction::new(3).unwrap();
        assert!((h.laplacian_l2_sq() - 19.2 * PI).abs() < 1e-12);
        assert!((h.laplacian_l1() - 8.0 * PI * 4.0 / 9.0).abs() < 1e-12);
        assert!((h.gradient_l2_sq() - 1.2 * PI).abs() < 1e-12);
    }

    #[test]
    fn flat_center_matches_quadrature() {
        let h = TestFunction::new(3).unwrap();
        let m = ModelSpec::flat(1.0).unwrap();
        let q = radial_integral(|t| h.profile((t / 8.0).powi(2)) / PI, 8.0, 1e-13).value;
        assert!((h.expected_linear_statistic(&m, 8.0) - q).abs() < 1e-9);
        assert!((h.expected_linear_statistic(&m, 8.0) - 16.0).abs() < 1e-12);
    }
}
