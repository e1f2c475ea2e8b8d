//! The random potential `u = log|f| - ½ log K(z, z)` on a grid, its
//! mollified and clipped version, and the transport inequalities it drives.
//!
//! For the flat model with `L = 1` this is `u = log|f| - |z|^2 / 2`, whose
//! distributional Laplacian is `2π n_f - 2 m`. With `μ = 2π Σ δ_{z_i}` and
//! `m` equal to twice Lebesgue measure, `μ(E) <= m(E_{+t})` reads
//! `π #E <= area(E_{+t})` and `m(E) <= μ(E_{+t})` reads
//! `area(E) <= π #E_{+t}`. Both sides have mean `2 area` per window.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::model::GafSample;
use crate::roots::Region;
use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

/// Default mollifier radius.
pub const DEFAULT_SMOOTHING: f64 = 0.5;
/// Default clip level.
pub const DEFAULT_CLIP: f64 = 10.0;
/// Floor applied to `log|f|` before smoothing; only reached on a grid
/// point that coincides with a zero.
const LOG_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("potential window must be a box region")]
    NotABox,
    #[error("grid spacing {0} must be positive and finite")]
    BadSpacing(f64),
    #[error("smoothing radius {0} must be nonnegative")]
    BadSmoothing(f64),
    #[error("clip level {0} must be positive")]
    BadClip(f64),
}

/// Smoothed potential sampled on the grid `lo + spacing (i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    pub window: Region,
    pub spacing: f64,
    pub r_smooth: f64,
    pub clip: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row major in `j` (imaginary direction) then `i`.
    pub values: Vec<f64>,
}

/// Normalized bump `exp(-1 / (1 - |x/r|^2))` sampled on the grid offsets,
/// as `(di, dj, weight)` with weights summing to one.
fn mollifier(r: f64, h: f64) -> Vec<(isize, isize, f64)> {
    let k = (r / h).floor() as isize;
    let mut w = Vec::new();
    for dj in -k..=k {
        for di in -k..=k {
            let s = ((di * di + dj * dj) as f64) * h * h / (r * r);
            if s < 1.0 {
                w.push((di, dj, (-1.0 / (1.0 - s)).exp()));
            }
        }
    }
    if w.is_empty() {
        w.push((0, 0, 1.0));
    }
    let total: f64 = w.iter().map(|x| x.2).sum();
    w.iter_mut().for_each(|x| x.2 /= total);
    w
}

impl PotentialGrid {
    pub fn compute(
        sample: &GafSample,
        window: &Region,
        spacing: f64,
        r_smooth: f64,
        clip: f64,
    ) -> Result<Self, PotentialError> {
        Self::from_fn(window, spacing, r_smooth, clip, |z| {
            let v = sample.normalized_value(z).norm();
            if v > 0.0 {
                v.ln()
            } else {
                LOG_FLOOR
            }
        })
    }

    /// Grid of an arbitrary raw potential, smoothed and clipped.
    pub fn from_fn<F: FnMut(C64) -> f64>(
        window: &Region,
        spacing: f64,
        r_smooth: f64,
        clip: f64,
        mut raw: F,
    ) -> Result<Self, PotentialError> {
        let Region::Box { lo, hi } = *window else {
            return Err(PotentialError::NotABox);
        };
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(PotentialError::BadSpacing(spacing));
        }
        if !(r_smooth >= 0.0 && r_smooth.is_finite()) {
            return Err(PotentialError::BadSmoothing(r_smooth));
        }
        if clip.is_nan() || clip <= 0.0 {
            return Err(PotentialError::BadClip(clip));
        }
        let nx = ((hi.re - lo.re) / spacing + 1e-9).floor() as usize + 1;
        let ny = ((hi.im - lo.im) / spacing + 1e-9).floor() as usize + 1;
        let kernel = mollifier(r_smooth, spacing);
        let pad = kernel.iter().map(|k| k.0.unsigned_abs()).max().unwrap_or(0);
        let (ex, ey) = (nx + 2 * pad, ny + 2 * pad);
        let mut ext = vec![0.0; ex * ey];
        for j in 0..ey {
            for i in 0..ex {
                let z = lo
                    + C64::new(
                        (i as f64 - pad as f64) * spacing,
                        (j as f64 - pad as f64) * spacing,
                    );
                ext[j * ex + i] = raw(z).max(LOG_FLOOR);
            }
        }
        let mut values = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let (ci, cj) = ((i + pad) as isize, (j + pad) as isize);
                let s: f64 = kernel
                    .iter()
                    .map(|&(di, dj, w)| w * ext[((cj + dj) as usize) * ex + (ci + di) as usize])
                    .sum();
                values[j * nx + i] = s.clamp(-clip, clip);
            }
        }
        Ok(Self {
            window: *window,
            spacing,
            r_smooth,
            clip,
            nx,
            ny,
            values,
        })
    }

    pub fn point(&self, i: usize, j: usize) -> C64 {
        self.window.bounding_box().0 + C64::new(i as f64 * self.spacing, j as f64 * self.spacing)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm over the grid points inside `region`.
    pub fn sup_norm_in(&self, region: &Region) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if region.contains(self.point(i, j)) {
                    m = m.max(self.value(i, j).abs());
                }
            }
        }
        m
    }
}

/// Euclidean distance from `z` to the region (zero inside).
pub fn distance_to(region: &Region, z: C64) -> f64 {
    match *region {
        Region::Disc { center, radius } => ((z - center).norm() - radius).max(0.0),
        Region::Box { lo, hi } => {
            let dx = (lo.re - z.re).max(0.0).max(z.re - hi.re);
            let dy = (lo.im - z.im).max(0.0).max(z.im - hi.im);
            dx.hypot(dy)
        }
    }
}

/// Lebesgue area of the closed `t`-neighbourhood of the region.
pub fn enlarged_area(region: &Region, t: f64) -> f64 {
    match *region {
        Region::Disc { radius, .. } => PI * (radius + t) * (radius + t),
        Region::Box { lo, hi } => {
            let (w, h) = (hi.re - lo.re, hi.im - lo.im);
            w * h + 2.0 * t * (w + h) + PI * t * t
        }
    }
}

/// Whether the `t`-neighbourhood of `region` lies inside the box `window`.
pub fn enlargement_inside(region: &Region, t: f64, window: &Region) -> bool {
    let (lo, hi) = region.bounding_box();
    let (wlo, whi) = window.bounding_box();
    lo.re - t >= wlo.re && lo.im - t >= wlo.im && hi.re + t <= whi.re && hi.im + t <= whi.im
}

/// Smallest `t >= 0` for which both
/// `π #E <= area(E_{+t})` and `area(E) <= π #E_{+t}` hold for the zero
/// set `zeros`; infinite when `zeros` has too few points near `E`.
pub fn required_enlargement(region: &Region, zeros: &[C64]) -> f64 {
    let inside = zeros.iter().filter(|z| region.contains(**z)).count();
    // First inequality: the area of E_{+t} is increasing in t.
    let target = PI * inside as f64;
    let t1 = if enlarged_area(region, 0.0) >= target {
        0.0
    } else {
        let (mut a, mut b) = (0.0, 1.0);
        while enlarged_area(region, b) < target {
            b *= 2.0;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if enlarged_area(region, m) >= target {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    // Second inequality: the k-th nearest zero must be within t.
    let need = (region.area() / PI).ceil() as usize;
    let t2 = if need == 0 {
        0.0
    } else {
        let mut d: Vec<f64> = zeros.iter().map(|z| distance_to(region, *z)).collect();
        if d.len() < need {
            f64::INFINITY
        } else {
            d.sort_unstable_by(f64::total_cmp);
            d[need - 1]
        }
    };
    t1.max(t2)
}

/// Outcome of testing one region at one constant.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LemmaOutcome {
    Holds,
    Fails,
    /// The enlargement leaves the window.
    Skipped,
}

/// Evaluates both inequalities for `t = c ||u||_∞^{1/2}`.
pub fn lemma_outcome(
    region: &Region,
    zeros: &[C64],
    sup_norm: f64,
    c: f64,
    window: &Region,
) -> LemmaOutcome {
    let t = c * sup_norm.sqrt();
    if !enlargement_inside(region, t, window) {
        return LemmaOutcome::Skipped;
    }
    if required_enlargement(region, zeros) <= t {
        LemmaOutcome::Holds
    } else {
        LemmaOutcome::Fails
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn smoothing_a_quadratic_shifts_by_kernel_second_moment() {
        // f = 1 in the flat model: u = -|z|^2/2 exactly.
        let m = ModelSpec::flat(1.0).unwrap();
        let mut c = vec![C64::new(0.0, 0.0); 40];
        c[0] = C64::new(1.0, 0.0);
        let s = GafSample::from_coefficients(&m, c, 6.0, 0, 0).unwrap();
        let w = Region::square(2.0).unwrap();
        let g = PotentialGrid::compute(&s, &w, 0.1, 0.5, 100.0).unwrap();
        let k = mollifier(0.5, 0.1);
        let second: f64 = k
            .iter()
            .map(|&(i, j, w)| w * ((i * i + j * j) as f64) * 0.01)
            .sum();
        for &(i, j) in &[(0, 0), (20, 20), (40, 3), (7, 33)] {
            let z = g.point(i, j);
            let expect = -z.norm_sqr() / 2.0 - second / 2.0;
            assert!(
                (g.value(i, j) - expect).abs() < 1e-9,
                "{} {}",
                g.value(i, j),
                expect
            );
        }
        assert_eq!((g.nx, g.ny), (41, 41));
    }

    #[test]
    fn values_are_clipped_and_finite() {
        let m = ModelSpec::flat(1.0).unwrap();
        let t = crate::model::Truncation::for_radius(&m, 6.0).unwrap();
        let s = GafSample::draw(&m, &t, 3, 0);
        let w = Region::square(4.0).unwrap();
        let g = PotentialGrid::compute(&s, &w, 0.2, 0.5, 1.5).unwrap();
        assert!(g.values.iter().all(|v| v.is_finite() && v.abs() <= 1.5));
        assert!(g.sup_norm() <= 1.5);
        let unsmoothed = PotentialGrid::compute(&s, &w, 0.2, 0.0, 1e3).unwrap();
        // Raw u at a grid point equals log|f| - |z|^2/2.
        let z = unsmoothed.point(5, 9);
        let direct = s.value(z).norm().ln() - z.norm_sqr() / 2.0;
        assert!((unsmoothed.value(5, 9) - direct).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = ModelSpec::flat(1.0).unwrap();
        let s = GafSample::from_series(&m, &[C64::new(1.0, 0.0)], 3.0).unwrap();
        let d = Region::centered_disc(1.0).unwrap();
        let b = Region::square(1.0).unwrap();
        assert_eq!(
            PotentialGrid::compute(&s, &d, 0.1, 0.5, 10.0),
            Err(PotentialError::NotABox)
        );
        assert!(PotentialGrid::compute(&s, &b, 0.0, 0.5, 10.0).is_err());
        assert!(PotentialGrid::compute(&s, &b, 0.1, -1.0, 10.0).is_err());
        assert!(PotentialGrid::compute(&s, &b, 0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn single_zero_forces_unit_area() {
        let e = Region::disc(C64::new(0.0, 0.0), 0.2).unwrap();
        let zeros = [C64::new(0.1, 0.0), C64::new(3.0, 0.0)];
        // π #E = π needs (0.2 + t)^2 >= 1.
        let t = required_enlargement(&e, &zeros);
        assert!((t - 0.8).abs() < 1e-12, "{t}");
    }

    #[test]
    fn second_inequality_uses_nearest_zeros() {
        // Area 4π needs four zeros within the enlargement.
        let e = Region::centered_disc(2.0).unwrap();
        let zeros = [
            C64::new(0.5, 0.0),
            C64::new(2.5, 0.0),
            C64::new(0.0, 3.0),
            C64::new(-4.0, 0.0),
            C64::new(0.0, -9.0),
        ];
        assert!((required_enlargement(&e, &zeros) - 2.0).abs() < 1e-12);
        assert_eq!(required_enlargement(&e, &zeros[..3]), f64::INFINITY);
    }

    #[test]
    fn outcomes_respect_window() {
        let w = Region::square(4.0).unwrap();
        let e = Region::centered_disc(1.0).unwrap();
        let zeros = [C64::new(0.2, 0.1)];
        assert_eq!(lemma_outcome(&e, &zeros, 4.0, 0.0, &w), LemmaOutcome::Holds);
        assert_eq!(
            lemma_outcome(&e, &zeros, 4.0, 2.0, &w),
            LemmaOutcome::Skipped
        );
        let crowded = [C64::new(0.1, 0.0), C64::new(-0.1, 0.0), C64::new(0.0, 0.3)];
        assert_eq!(
            lemma_outcome(&e, &crowded, 1.0, 0.5, &w),
            LemmaOutcome::Fails
        );
    }

    #[test]
    fn box_enlargement_area_and_distance() {
        let b = Region::rect(C64::new(0.0, 0.0), C64::new(2.0, 1.0)).unwrap();
        assert!((enlarged_area(&b, 0.5) - (2.0 + 3.0 + PI * 0.25)).abs() < 1e-12);
        assert_eq!(distance_to(&b, C64::new(1.0, 0.5)), 0.0);
        assert!((distance_to(&b, C64::new(5.0, 5.0)) - 5.0).abs() < 1e-12);
    }
}
