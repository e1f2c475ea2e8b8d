//! Certified zero extraction.
//!
//! Counting is done with the argument principle. The increment of `arg f`
//! along a segment is accumulated as a sum of principal arguments of ratios
//! `f(p_{k+1}) / f(p_k)`, bisecting until every step is below `pi / 2`. Around
//! any closed loop such a sum is an exact multiple of `2 pi`, and a segment
//! shared by two cells is computed once, so cell counts are integers that
//! add up to the count of the enclosing contour.
//!
//! Discs are swept with a polar grid in the local variable
//! `u = (z - c) / rho`. Ring values come from folding the local series and one
//! FFT per ring. Cells holding one zero are polished by Newton's method;
//! cells holding more are split and recounted with direct contours.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use crate::fft::Fft;
use crate::model::{Family, GafSample, ModelError};
use crate::rng::{CounterRng, Purpose};
use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

const MIN_RING_POINTS: usize = 16;
const MAX_RING_POINTS: usize = 1 << 16;
const MAX_RINGS: usize = 512;
const MAX_BISECTION: u32 = 48;
const SIDE_SAMPLES: usize = 16;
const DILATION_SPAN: f64 = 1e-3;
const NEWTON_ITERS: usize = 80;
const ABERTH_ITERS: usize = 500;
/// Angular offset of every polar grid and fractional offset of its ring
/// radii, so that grid lines avoid symmetric points such as the real axis.
const GRID_PHASE: f64 = 0.618_033_988_749_894_8;
const RING_SHIFT: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RootError {
    #[error("invalid region: {0}")]
    InvalidRegion(&'static str),
    #[error("region reaches modulus {modulus}, beyond the certified radius {radius}")]
    BeyondCertifiedRadius { modulus: f64, radius: f64 },
    #[error("a zero stays within the boundary margin after {attempts} dilations")]
    BoundaryCollision { attempts: u32 },
    #[error("the sample is identically zero")]
    IdenticallyZero,
    #[error("elliptic_roots needs an elliptic sample, got {0}")]
    NotElliptic(Family),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Disc or axis-parallel box in the planar chart of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Region {
    Disc { center: C64, radius: f64 },
    Box { lo: C64, hi: C64 },
}

impl Region {
    pub fn disc(center: C64, radius: f64) -> Result<Self, RootError> {
        if !(radius > 0.0 && radius.is_finite())
            || !(center.re.is_finite() && center.im.is_finite())
        {
            return Err(RootError::InvalidRegion(
                "disc radius must be positive and finite",
            ));
        }
        Ok(Region::Disc { center, radius })
    }

    pub fn centered_disc(radius: f64) -> Result<Self, RootError> {
        Self::disc(C64::new(0.0, 0.0), radius)
    }

    pub fn rect(lo: C64, hi: C64) -> Result<Self, RootError> {
        let finite = [lo.re, lo.im, hi.re, hi.im].iter().all(|v| v.is_finite());
        if !finite || !(lo.re < hi.re && lo.im < hi.im) {
            return Err(RootError::InvalidRegion(
                "box corners must satisfy lo < hi componentwise",
            ));
        }
        Ok(Region::Box { lo, hi })
    }

    /// The square `[-s, s]^2`.
    pub fn square(halfwidth: f64) -> Result<Self, RootError> {
        Self::rect(
            C64::new(-halfwidth, -halfwidth),
            C64::new(halfwidth, halfwidth),
        )
    }

    pub fn center(&self) -> C64 {
        match *self {
            Region::Disc { center, .. } => center,
            Region::Box { lo, hi } => (lo + hi) * 0.5,
        }
    }

    /// Center and radius of the smallest enclosing disc.
    pub fn bounding_disc(&self) -> (C64, f64) {
        match *self {
            Region::Disc { center, radius } => (center, radius),
            Region::Box { lo, hi } => ((lo + hi) * 0.5, (hi - lo).norm() * 0.5),
        }
    }

    pub fn max_modulus(&self) -> f64 {
        let (c, r) = self.bounding_disc();
        match *self {
            Region::Disc { .. } => c.norm() + r,
            Region::Box { lo, hi } => {
                let x = lo.re.abs().max(hi.re.abs());
                let y = lo.im.abs().max(hi.im.abs());
                x.hypot(y)
            }
        }
    }

    /// Axis-aligned `(lo, hi)` corners enclosing the region.
    pub fn bounding_box(&self) -> (C64, C64) {
        match *self {
            Region::Disc { center, radius } => (
                center - C64::new(radius, radius),
                center + C64::new(radius, radius),
            ),
            Region::Box { lo, hi } => (lo, hi),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Region::Disc { radius, .. } => PI * radius * radius,
            Region::Box { lo, hi } => (hi.re - lo.re) * (hi.im - lo.im),
        }
    }

    pub fn contains(&self, z: C64) -> bool {
        match *self {
            Region::Disc { center, radius } => (z - center).norm() <= radius,
            Region::Box { lo, hi } => {
                z.re >= lo.re && z.re <= hi.re && z.im >= lo.im && z.im <= hi.im
            }
        }
    }

    /// Scales the region about its center by `factor`.
    pub fn dilate(&self, factor: f64) -> Region {
        match *self {
            Region::Disc { center, radius } => Region::Disc {
                center,
                radius: radius * factor,
            },
            Region::Box { lo, hi } => {
                let c = (lo + hi) * 0.5;
                Region::Box {
                    lo: c + (lo - c) * factor,
                    hi: c + (hi - c) * factor,
                }
            }
        }
    }

    /// Rejects regions whose dilations could leave the certified radius of
    /// `sample` or the model domain.
    pub fn check_for(&self, sample: &GafSample) -> Result<(), RootError> {
        let reach = self.max_modulus() * (1.0 + DILATION_SPAN);
        if sample.model().family == Family::Hyperbolic && reach >= 1.0 {
            return Err(RootError::InvalidRegion(
                "hyperbolic regions must stay inside the unit disc",
            ));
        }
        if reach > sample.certified_radius() {
            return Err(RootError::BeyondCertifiedRadius {
                modulus: reach,
                radius: sample.certified_radius(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootOptions {
    /// Largest accepted `|f(z)| / sqrt(K(z, z))` at a reported zero.
    pub residual_tol: f64,
    /// Smallest accepted separation between two reported zeros.
    pub merge_tol: f64,
    pub max_depth: u32,
    /// Normalized `|f|` below which a boundary sample counts as a collision.
    pub boundary_tol: f64,
    pub max_retries: u32,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-9,
            merge_tol: 1e-8,
            max_depth: 40,
            boundary_tol: 1e-8,
            max_retries: 5,
        }
    }
}

/// Why a certificate was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Diagnostic {
    /// Subdivision reached `max_depth` with a multiple count.
    UnresolvedCluster,
    /// Listed zeros differ from the argument-principle total.
    CountMismatch,
    ResidualTooLarge,
    /// Two listed zeros closer than `merge_tol`.
    MergedZeros,
    /// Child counts did not add up to the parent count.
    Conservation,
    /// The iterative polynomial solver hit its iteration cap.
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ZeroSet {
    pub zeros: Vec<C64>,
    pub residuals: Vec<f64>,
    /// Argument-principle total for the region.
    pub certified_count: usize,
    pub region: Region,
    pub certificate_ok: bool,
    /// Factor the region was dilated by to avoid a boundary zero (1 if none).
    pub dilation: f64,
    pub diagnostic: Option<Diagnostic>,
}

impl ZeroSet {
    pub fn len(&self) -> usize {
        self.zeros.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty()
    }

    pub fn was_dilated(&self) -> bool {
        self.dilation != 1.0
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Argument-principle count of a region boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub count: i64,
    pub dilation: f64,
}

/// Failure modes of one attempt on one (possibly dilated) region.
enum Attempt {
    Collision,
    Fatal(RootError),
}

impl From<RootError> for Attempt {
    fn from(e: RootError) -> Self {
        Attempt::Fatal(e)
    }
}

fn principal_step(a: C64, b: C64) -> f64 {
    (b * a.conj()).arg()
}

fn round_turns(total: f64) -> i64 {
    (total / TAU).round() as i64
}

/// Straight or circular segment in the local variable, parameterized on `[0, 1]`.
#[derive(Clone, Copy)]
enum Path {
    Radial { theta: f64, r0: f64, r1: f64 },
    Arc { r: f64, th0: f64, th1: f64 },
    Line { a: C64, b: C64 },
}

impl Path {
    fn length(&self) -> f64 {
        match *self {
            Path::Radial { r0, r1, .. } => (r1 - r0).abs(),
            Path::Arc { r, th0, th1 } => r * (th1 - th0).abs(),
            Path::Line { a, b } => (b - a).norm(),
        }
    }

    fn point(&self, s: f64) -> C64 {
        match *self {
            Path::Radial { theta, r0, r1 } => C64::from_polar(r0 + s * (r1 - r0), theta),
            Path::Arc { r, th0, th1 } => C64::from_polar(r, th0 + s * (th1 - th0)),
            Path::Line { a, b } => a + (b - a) * s,
        }
    }
}

/// Tracks the smallest normalized modulus seen on a boundary.
struct Guard {
    active: bool,
    tol: f64,
    hit: bool,
}

impl Guard {
    fn off() -> Self {
        Self {
            active: false,
            tol: 0.0,
            hit: false,
        }
    }

    fn on(tol: f64) -> Self {
        Self {
            active: true,
            tol,
            hit: false,
        }
    }
}

/// Local value and the fluctuating part of the logarithmic derivative,
/// `g'/g - rho d/dz log K`. Its modulus is roughly the inverse distance to
/// the nearest zero.
#[derive(Clone, Copy)]
struct Pt {
    v: C64,
    fl: f64,
}

/// A step is accepted when its phase change is below `pi / 2` and its
/// length is below `STEP_REACH` times the distance scale `1 / |fl|` at both
/// ends. The second test catches a step gliding past two nearby zeros,
/// whose phase changes cancel modulo `2 pi`.
const STEP_REACH: f64 = 1.0;

/// The sample seen through `u = (z - center) / rho`.
///
/// For the flat family the factor `exp(-L conj(c) rho u)` is divided out
/// before expanding: it has no zeros, so counts are unchanged, and it removes
/// both the phase drift and the growth that a translation introduces. The
/// coefficients of the drift-free function are recovered from values on the
/// circle `|u| = 1`, which avoids the cancellation of a Taylor shift.
struct Local<'a> {
    sample: &'a GafSample,
    center: C64,
    rho: f64,
    coeffs: Vec<C64>,
    drift: C64,
    log_scale: f64,
    plans: Vec<Option<Fft>>,
}

impl<'a> Local<'a> {
    fn new(sample: &'a GafSample, center: C64, rho: f64) -> Result<Self, RootError> {
        let model = sample.model();
        let drift = if model.family == Family::Flat {
            center.conj() * (model.intensity * rho)
        } else {
            C64::new(0.0, 0.0)
        };
        let mut coeffs = if drift.norm_sqr() == 0.0 {
            sample.series_about(center, rho)
        } else {
            drift_free_series(sample, center, rho, drift)
        }
        .ok_or(RootError::InvalidRegion(
            "local series is not representable",
        ))?;
        let top = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if top == 0.0 {
            return Err(RootError::IdenticallyZero);
        }
        // Keep the local series near unit size: only ratios matter for arg.
        for c in coeffs.iter_mut() {
            *c /= top;
        }
        Ok(Self {
            sample,
            center,
            rho,
            coeffs,
            drift,
            log_scale: top.ln(),
            plans: Vec::new(),
        })
    }

    fn to_z(&self, u: C64) -> C64 {
        self.center + u * self.rho
    }

    fn to_u(&self, z: C64) -> C64 {
        (z - self.center) / self.rho
    }

    fn finish_pt(&self, u: C64, raw: C64, draw: C64) -> Pt {
        let smooth = self.sample.model().log_kernel_gradient(self.to_z(u)) * self.rho;
        let fl = (draw / raw - (smooth - self.drift)).norm();
        Pt { v: raw, fl }
    }

    /// Bound on the phase rate of the drift-free value that `fl` does not
    /// see, along the segment from `a` to `b`.
    fn smooth_rate(&self, a: C64, b: C64) -> f64 {
        let model = self.sample.model();
        let at = |u: C64| (model.log_kernel_gradient(self.to_z(u)) * self.rho - self.drift).norm();
        match model.family {
            // |grad| is convex along lines for these two families.
            Family::Flat | Family::Hyperbolic => at(a).max(at(b)),
            Family::Elliptic => 0.5 * model.intensity * self.rho,
        }
    }

    fn eval(&self, u: C64) -> Pt {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * u + p;
            p = p * u + c;
        }
        self.finish_pt(u, p, dp)
    }

    /// `|f(z)| / sqrt(K(z, z))` recovered from a drift-free local value.
    fn normalized_abs(&self, u: C64, v: C64) -> f64 {
        let z = self.to_z(u);
        let log_abs = v.norm().ln() + (self.drift * u).re + self.log_scale;
        (log_abs - 0.5 * self.sample.model().log_kernel_diag(z)).exp()
    }

    fn plan(&mut self, m: usize) -> usize {
        let idx = m.trailing_zeros() as usize;
        if self.plans.len() <= idx {
            self.plans.resize_with(idx + 1, || None);
        }
        self.plans[idx].get_or_insert_with(|| Fft::new(m));
        idx
    }

    /// Points at `t exp(i (GRID_PHASE + 2 pi k / m))`, `k = 0..m`.
    fn ring(&mut self, t: f64, m: usize) -> Vec<Pt> {
        let mut vals = vec![C64::new(0.0, 0.0); m];
        let mut ders = vec![C64::new(0.0, 0.0); m];
        let rot = C64::from_polar(t, GRID_PHASE);
        let mut pw = C64::new(1.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if pw.norm_sqr() == 0.0 {
                break;
            }
            vals[k % m] += c * pw;
            if k + 1 < self.coeffs.len() {
                ders[k % m] += self.coeffs[k + 1] * pw * (k + 1) as f64;
            }
            pw *= rot;
        }
        let idx = self.plan(m);
        let plan = self.plans[idx].as_ref().expect("plan was just built");
        plan.evaluate_on_circle(&mut vals);
        plan.evaluate_on_circle(&mut ders);
        (0..m)
            .map(|k| self.finish_pt(C64::from_polar(t, grid_angle(k, m)), vals[k], ders[k]))
            .collect()
    }

    fn check_sample(&self, u: C64, v: C64, guard: &mut Guard) -> Result<(), Attempt> {
        if v.norm_sqr() == 0.0 || !v.re.is_finite() || !v.im.is_finite() {
            return Err(Attempt::Collision);
        }
        if guard.active && self.normalized_abs(u, v) < guard.tol {
            guard.hit = true;
        }
        Ok(())
    }

    /// Argument increment from `path(s0)` to `path(s1)` given the endpoint
    /// samples, bisecting until every step is accepted.
    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        path: &Path,
        s0: f64,
        s1: f64,
        a: Pt,
        b: Pt,
        depth: u32,
        guard: &mut Guard,
    ) -> Result<f64, Attempt> {
        let d = principal_step(a.v, b.v);
        let reach = path.length() * (s1 - s0) * a.fl.max(b.fl);
        if d.abs() < FRAC_PI_2 && reach <= STEP_REACH {
            return Ok(d);
        }
        if depth >= MAX_BISECTION {
            return Err(Attempt::Collision);
        }
        let sm = 0.5 * (s0 + s1);
        let um = path.point(sm);
        let m = self.eval(um);
        self.check_sample(um, m.v, guard)?;
        Ok(self.refine(path, s0, sm, a, m, depth + 1, guard)?
            + self.refine(path, sm, s1, m, b, depth + 1, guard)?)
    }

    /// Increment along a whole path sampled at `n` equal steps first.
    fn path_increment(&self, path: &Path, n: usize, guard: &mut Guard) -> Result<f64, Attempt> {
        let mut total = 0.0;
        let u0 = path.point(0.0);
        let mut prev = self.eval(u0);
        self.check_sample(u0, prev.v, guard)?;
        for k in 1..=n {
            let s1 = k as f64 / n as f64;
            let u = path.point(s1);
            let cur = self.eval(u);
            self.check_sample(u, cur.v, guard)?;
            total += self.refine(path, (k - 1) as f64 / n as f64, s1, prev, cur, 0, guard)?;
            prev = cur;
        }
        Ok(total)
    }
}

/// Coefficients of `u -> f(center + rho u) exp(-drift u)` from its values on
/// the unit circle.
fn drift_free_series(sample: &GafSample, center: C64, rho: f64, drift: C64) -> Option<Vec<C64>> {
    let len = sample.truncation_n() + 1;
    let m = (2 * len).next_power_of_two().max(MIN_RING_POINTS);
    let mut vals: Vec<C64> = (0..m)
        .map(|j| {
            let u = C64::from_polar(1.0, TAU * j as f64 / m as f64);
            sample.value(center + u * rho) * (-drift * u).exp()
        })
        .collect();
    Fft::new(m).forward(&mut vals);
    vals.truncate(len);
    for c in vals.iter_mut() {
        *c /= m as f64;
    }
    vals.iter()
        .all(|c| c.re.is_finite() && c.im.is_finite())
        .then_some(vals)
}

/// One evaluated ring of the polar grid.
struct Ring {
    t: f64,
    m: usize,
    pts: Vec<Pt>,
    arcs: Vec<f64>,
}

fn grid_angle(k: usize, m: usize) -> f64 {
    GRID_PHASE + TAU * k as f64 / m as f64
}

fn ring_radius(i: usize, k: usize) -> f64 {
    (i as f64 - RING_SHIFT) / (k as f64 - RING_SHIFT)
}

fn pow2_at_least(x: f64) -> usize {
    let mut m = MIN_RING_POINTS;
    while (m as f64) < x && m < MAX_RING_POINTS {
        m *= 2;
    }
    m
}

/// Evaluates ring `t` with at least `m0` points, doubling while more than a
/// small fraction of the steps would need refinement, then refines those.
fn build_ring(
    local: &mut Local<'_>,
    t: f64,
    m0: usize,
    guard: &mut Guard,
) -> Result<Ring, Attempt> {
    let mut m = m0;
    let mut pts;
    loop {
        pts = local.ring(t, m);
        let step = TAU * t / m as f64;
        let bad = (0..m)
            .filter(|&k| {
                let (a, b) = (pts[k], pts[(k + 1) % m]);
                principal_step(a.v, b.v).abs() >= FRAC_PI_2 || step * a.fl.max(b.fl) > STEP_REACH
            })
            .count();
        if bad * 64 <= m || m >= MAX_RING_POINTS {
            break;
        }
        m *= 2;
    }
    for (k, p) in pts.iter().enumerate() {
        let u = C64::from_polar(t, grid_angle(k, m));
        local.check_sample(u, p.v, guard)?;
    }
    let mut arcs = Vec::with_capacity(m);
    for k in 0..m {
        let path = Path::Arc {
            r: t,
            th0: grid_angle(k, m),
            th1: grid_angle(k + 1, m),
        };
        arcs.push(local.refine(&path, 0.0, 1.0, pts[k], pts[(k + 1) % m], 0, guard)?);
    }
    Ok(Ring { t, m, pts, arcs })
}

/// Polar sector `r0 <= |u| <= r1`, `th0 <= arg u <= th1` in the local variable.
#[derive(Debug, Clone, Copy)]
struct Sector {
    r0: f64,
    r1: f64,
    th0: f64,
    th1: f64,
}

impl Sector {
    fn is_disc(&self) -> bool {
        self.r0 == 0.0 && self.th1 - self.th0 >= TAU
    }

    fn centroid(&self) -> C64 {
        if self.is_disc() {
            return C64::new(0.0, 0.0);
        }
        C64::from_polar(0.5 * (self.r0 + self.r1), 0.5 * (self.th0 + self.th1))
    }

    fn diameter(&self) -> f64 {
        if self.is_disc() {
            return 2.0 * self.r1;
        }
        let span = (self.th1 - self.th0).min(PI);
        let chord = 2.0 * self.r1 * (0.5 * span).sin();
        (self.r1 - self.r0).hypot(chord).max(chord)
    }

    fn contains(&self, u: C64) -> bool {
        let eps = 1e-12 * self.r1.max(1e-300);
        let r = u.norm();
        if r < self.r0 - eps || r > self.r1 + eps {
            return false;
        }
        if self.th1 - self.th0 >= TAU {
            return true;
        }
        let span = self.th1 - self.th0;
        let mut d = (u.arg() - self.th0) % TAU;
        if d < 0.0 {
            d += TAU;
        }
        let slack = 1e-12;
        d <= span + slack || d >= TAU - slack
    }

    fn split(&self) -> Vec<Sector> {
        if self.is_disc() {
            let rm = 0.5 * self.r1;
            let mut out = vec![Sector {
                r0: 0.0,
                r1: rm,
                th0: self.th0,
                th1: self.th1,
            }];
            for q in 0..4 {
                let a = self.th0 + FRAC_PI_2 * q as f64;
                out.push(Sector {
                    r0: rm,
                    r1: self.r1,
                    th0: a,
                    th1: a + FRAC_PI_2,
                });
            }
            return out;
        }
        let rm = (0.5 * (self.r0 * self.r0 + self.r1 * self.r1)).sqrt();
        let tm = 0.5 * (self.th0 + self.th1);
        let radial = self.r1 - self.r0;
        let tangential = rm * (self.th1 - self.th0);
        let cut_r = 2.0 * radial >= tangential;
        let cut_t = 2.0 * tangential >= radial;
        let rs: &[(f64, f64)] = if cut_r {
            &[(self.r0, rm), (rm, self.r1)][..]
        } else {
            &[(self.r0, self.r1)][..]
        };
        let ts: Vec<(f64, f64)> = if cut_t {
            vec![(self.th0, tm), (tm, self.th1)]
        } else {
            vec![(self.th0, self.th1)]
        };
        let mut out = Vec::new();
        for &(r0, r1) in rs {
            for &(th0, th1) in &ts {
                out.push(Sector { r0, r1, th0, th1 });
            }
        }
        out
    }
}

fn arc_samples(span: f64) -> usize {
    ((span / FRAC_PI_2).ceil() as usize).max(1) * SIDE_SAMPLES
}

/// Count inside a sector from a direct contour.
fn sector_count(local: &Local<'_>, s: &Sector) -> Result<i64, Attempt> {
    let mut g = Guard::off();
    let span = s.th1 - s.th0;
    let outer = local.path_increment(
        &Path::Arc {
            r: s.r1,
            th0: s.th0,
            th1: s.th1,
        },
        arc_samples(span),
        &mut g,
    )?;
    let inner = if s.r0 > 0.0 {
        local.path_increment(
            &Path::Arc {
                r: s.r0,
                th0: s.th0,
                th1: s.th1,
            },
            arc_samples(span),
            &mut g,
        )?
    } else {
        0.0
    };
    let (left, right) = if span >= TAU {
        (0.0, 0.0)
    } else {
        let l = local.path_increment(
            &Path::Radial {
                theta: s.th0,
                r0: s.r0,
                r1: s.r1,
            },
            SIDE_SAMPLES,
            &mut g,
        )?;
        let r = local.path_increment(
            &Path::Radial {
                theta: s.th1,
                r0: s.r0,
                r1: s.r1,
            },
            SIDE_SAMPLES,
            &mut g,
        )?;
        (l, r)
    };
    Ok(round_turns(left + outer - right - inner))
}

/// Newton's method on the true series from `z0`, with step halving while
/// `|f|` fails to decrease. Gives up when the iterate leaves `|z - z0| <= reach`.
///
/// The step is taken for `f(z) exp(-s z)` with `s` the smooth part of `f'/f`
/// at the current iterate. The factor has no zeros, and removing the growth
/// of `f` keeps steps aimed at the nearest zero far from the origin.
fn newton(sample: &GafSample, z0: C64, reach: f64) -> Option<C64> {
    let model = sample.model();
    let limit = sample.certified_radius();
    let merit = |z: C64, f: C64| f.norm().ln() - 0.5 * model.log_kernel_diag(z);
    let mut z = z0;
    let (mut f, mut df) = sample.value_and_derivative(z);
    let mut calm = 0;
    for _ in 0..NEWTON_ITERS {
        if f.norm_sqr() == 0.0 {
            return Some(z);
        }
        let step = f / (df - model.log_kernel_gradient(z) * f);
        if !step.re.is_finite() || !step.im.is_finite() {
            return None;
        }
        let tol = 1e-14 * z.norm().max(1.0);
        let here = merit(z, f);
        let mut lambda = 1.0;
        let (mut zn, mut fnew, mut dfn);
        loop {
            zn = z - step * lambda;
            (fnew, dfn) = sample.value_and_derivative(zn);
            if merit(zn, fnew) < here || lambda < 1.0 / 64.0 || step.norm() * lambda <= 16.0 * tol {
                break;
            }
            lambda *= 0.5;
        }
        if (zn - z0).norm() > reach || zn.norm() > limit {
            return None;
        }
        z = zn;
        f = fnew;
        df = dfn;
        if step.norm() * lambda <= tol {
            calm += 1;
            if calm >= 2 {
                return Some(z);
            }
        }
    }
    if merit(z, f) < -28.0 {
        Some(z)
    } else {
        None
    }
}

/// Zeros of `sum_k a_k u^k` by Aberth-Ehrlich simultaneous iteration from
/// Newton-polygon starting points. The flag reports convergence.
pub fn aberth(coeffs: &[C64], max_iter: usize) -> (Vec<C64>, bool) {
    let mut a: Vec<C64> = coeffs.to_vec();
    while a.len() > 1 && a.last().is_some_and(|c| c.norm_sqr() == 0.0) {
        a.pop();
    }
    let n = a.len().saturating_sub(1);
    if n == 0 {
        return (Vec::new(), true);
    }
    // Exact zeros at the origin are split off first.
    let lead_zero = a.iter().take_while(|c| c.norm_sqr() == 0.0).count();
    let mut roots = vec![C64::new(0.0, 0.0); lead_zero];
    let a = &a[lead_zero..];
    let n = a.len() - 1;
    if n == 0 {
        return (roots, true);
    }
    let mut z = newton_polygon_guesses(a);
    let mut done = vec![false; n];
    let mut converged = false;
    for _ in 0..max_iter {
        let mut all = true;
        for i in 0..n {
            if done[i] {
                continue;
            }
            let ratio = poly_newton_ratio(a, z[i]);
            let mut s = C64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += (z[i] - z[j]).inv();
                }
            }
            let w = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if !w.re.is_finite() || !w.im.is_finite() {
                let nudge = C64::new(1e-8, 1e-8) * z[i].norm().max(1e-8);
                z[i] += nudge;
                all = false;
                continue;
            }
            z[i] -= w;
            if w.norm() <= 2.0 * f64::EPSILON * z[i].norm() {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            converged = true;
            break;
        }
    }
    roots.extend(z);
    (roots, converged)
}

/// `p(z) / p'(z)`, through the reversed polynomial when `|z| > 1`.
fn poly_newton_ratio(a: &[C64], z: C64) -> C64 {
    let n = a.len() - 1;
    if z.norm_sqr() <= 1.0 {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in a.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        p / dp
    } else {
        let y = z.inv();
        let mut q = C64::new(0.0, 0.0);
        let mut dq = C64::new(0.0, 0.0);
        for c in a {
            dq = dq * y + q;
            q = q * y + c;
        }
        z * q / (q * n as f64 - dq * y)
    }
}

fn newton_polygon_guesses(a: &[C64]) -> Vec<C64> {
    let n = a.len() - 1;
    let pts: Vec<(usize, f64)> = a
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() > 0.0)
        .map(|(k, c)| (k, c.norm().ln()))
        .collect();
    // Upper convex hull of (k, ln |a_k|).
    let mut hull: Vec<(usize, f64)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (k1, y1) = hull[hull.len() - 2];
            let (k2, y2) = hull[hull.len() - 1];
            let cross = (k2 as f64 - k1 as f64) * (p.1 - y1) - (y2 - y1) * (p.0 as f64 - k1 as f64);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut out = Vec::with_capacity(n);
    for (e, w) in hull.windows(2).enumerate() {
        let (k0, y0) = w[0];
        let (k1, y1) = w[1];
        let count = k1 - k0;
        let radius = ((y0 - y1) / count as f64).exp();
        let offset = 0.7 + 1.3 * e as f64;
        for j in 0..count {
            out.push(C64::from_polar(
                radius,
                TAU * j as f64 / count as f64 + offset,
            ));
        }
    }
    out
}

struct Search<'s, 'a> {
    local: &'s Local<'a>,
    opts: &'s RootOptions,
    zeros: Vec<C64>,
    diagnostic: Option<Diagnostic>,
}

impl Search<'_, '_> {
    fn flag(&mut self, d: Diagnostic) {
        if self.diagnostic.is_none() {
            self.diagnostic = Some(d);
        }
    }

    fn resolve(&mut self, cell: Sector, count: i64, depth: u32) -> Result<(), Attempt> {
        let local = self.local;
        let reach = 2.0 * cell.diameter() * local.rho;
        if count == 1 {
            let z0 = local.to_z(cell.centroid());
            if let Some(z) = newton(local.sample, z0, reach) {
                if cell.contains(local.to_u(z)) {
                    self.zeros.push(z);
                    return Ok(());
                }
            }
        }
        if depth >= self.opts.max_depth {
            self.proxy(cell, count);
            return Ok(());
        }
        let children = cell.split();
        let mut counts = Vec::with_capacity(children.len());
        for c in &children {
            counts.push(sector_count(local, c)?);
        }
        if counts.iter().sum::<i64>() != count || counts.iter().any(|c| *c < 0) {
            self.flag(Diagnostic::Conservation);
        }
        for (c, k) in children.into_iter().zip(counts) {
            if k > 0 {
                self.resolve(c, k, depth + 1)?;
            }
        }
        Ok(())
    }

    /// Local Taylor polynomial about the cell, solved directly.
    fn proxy(&mut self, cell: Sector, count: i64) {
        self.flag(Diagnostic::UnresolvedCluster);
        let local = self.local;
        let zc = local.to_z(cell.centroid());
        let rc = cell.diameter() * local.rho;
        let Some(series) = local.sample.series_about(zc, rc) else {
            return;
        };
        let deg = (count as usize + 16).min(series.len() - 1);
        let (roots, _) = aberth(&series[..=deg], ABERTH_ITERS);
        let mut found: Vec<C64> = roots
            .into_iter()
            .map(|u| zc + u * rc)
            .filter(|z| cell.contains(local.to_u(*z)))
            .collect();
        found.truncate(count as usize);
        self.zeros.extend(found);
    }
}

fn dilation_factor(sample: &GafSample, attempt: u32) -> f64 {
    if attempt == 0 {
        return 1.0;
    }
    let mut rng = CounterRng::new(sample.seed(), Purpose::Dilation, sample.trial());
    let mut u = 0.0;
    for _ in 0..attempt {
        u = rng.uniform();
    }
    1.0 + DILATION_SPAN * u
}

fn radial_rings(sample: &GafSample, center: C64, radius: f64) -> usize {
    let model = sample.model();
    let far = center.norm() + radius;
    let near = (center.norm() - radius).max(0.0);
    let spacing = model.local_spacing(far).min(model.local_spacing(near));
    ((radius / (0.5 * spacing)).ceil() as usize).clamp(2, MAX_RINGS)
}

/// Outer boundary of a disc only.
fn disc_winding(
    sample: &GafSample,
    center: C64,
    radius: f64,
    opts: &RootOptions,
) -> Result<i64, Attempt> {
    let mut local = Local::new(sample, center, radius)?;
    let k = radial_rings(sample, center, radius);
    let mut guard = Guard::on(opts.boundary_tol);
    let ring = build_ring(&mut local, 1.0, pow2_at_least(TAU * k as f64), &mut guard)?;
    if guard.hit {
        return Err(Attempt::Collision);
    }
    Ok(round_turns(ring.arcs.iter().sum()))
}

struct DiscResult {
    zeros: Vec<C64>,
    winding: i64,
    diagnostic: Option<Diagnostic>,
}

fn disc_attempt(
    sample: &GafSample,
    center: C64,
    radius: f64,
    opts: &RootOptions,
) -> Result<DiscResult, Attempt> {
    let mut local = Local::new(sample, center, radius)?;
    let k = radial_rings(sample, center, radius);
    let mut rings: Vec<Ring> = Vec::with_capacity(k);
    let mut m = MIN_RING_POINTS;
    for i in 1..=k {
        let t = ring_radius(i, k);
        let mut guard = if i == k {
            Guard::on(opts.boundary_tol)
        } else {
            Guard::off()
        };
        m = m.max(pow2_at_least(TAU * t * k as f64));
        let ring = build_ring(&mut local, t, m, &mut guard)?;
        if guard.hit {
            return Err(Attempt::Collision);
        }
        m = ring.m;
        rings.push(ring);
    }
    let winding = round_turns(rings[k - 1].arcs.iter().sum());
    let mut diagnostic = None;

    let mut cells: Vec<(Sector, i64)> = Vec::new();
    let c0 = round_turns(rings[0].arcs.iter().sum());
    if c0 != 0 {
        cells.push((
            Sector {
                r0: 0.0,
                r1: rings[0].t,
                th0: GRID_PHASE,
                th1: GRID_PHASE + TAU,
            },
            c0,
        ));
    }
    let mut g = Guard::off();
    for i in 0..k - 1 {
        let (inner, outer) = (&rings[i], &rings[i + 1]);
        let p = inner.m.min(pow2_at_least(TAU * inner.t * k as f64));
        let (qi, qo) = (inner.m / p, outer.m / p);
        let mut radial = Vec::with_capacity(p);
        for j in 0..p {
            let path = Path::Radial {
                theta: grid_angle(j, p),
                r0: inner.t,
                r1: outer.t,
            };
            let (a, b) = (inner.pts[j * qi], outer.pts[j * qo]);
            radial.push(local.refine(&path, 0.0, 1.0, a, b, 0, &mut g)?);
        }
        for j in 0..p {
            let outer_arc: f64 = outer.arcs[j * qo..(j + 1) * qo].iter().sum();
            let inner_arc: f64 = inner.arcs[j * qi..(j + 1) * qi].iter().sum();
            let c = round_turns(radial[j] + outer_arc - radial[(j + 1) % p] - inner_arc);
            if c != 0 {
                cells.push((
                    Sector {
                        r0: inner.t,
                        r1: outer.t,
                        th0: grid_angle(j, p),
                        th1: grid_angle(j + 1, p),
                    },
                    c,
                ));
            }
        }
    }
    if cells.iter().any(|(_, c)| *c < 0) || cells.iter().map(|(_, c)| c).sum::<i64>() != winding {
        diagnostic = Some(Diagnostic::Conservation);
    }
    let mut search = Search {
        local: &local,
        opts,
        zeros: Vec::new(),
        diagnostic,
    };
    for (cell, c) in cells {
        if c > 0 {
            search.resolve(cell, c, 0)?;
        }
    }
    Ok(DiscResult {
        zeros: search.zeros,
        winding,
        diagnostic: search.diagnostic,
    })
}

fn rect_winding(sample: &GafSample, lo: C64, hi: C64, opts: &RootOptions) -> Result<i64, Attempt> {
    let model = sample.model();
    let far = hi
        .norm()
        .max(lo.norm())
        .max(C64::new(lo.re, hi.im).norm())
        .max(C64::new(hi.re, lo.im).norm());
    // Expanding about an off-origin center cancels badly for large shifts,
    // so boxes always use the series about the origin.
    let local = Local::new(sample, C64::new(0.0, 0.0), far)?;
    let spacing = model.local_spacing(far).min(model.local_spacing(0.0));
    let corners = [lo, C64::new(hi.re, lo.im), hi, C64::new(lo.re, hi.im)];
    let mut guard = Guard::on(opts.boundary_tol);
    let mut total = 0.0;
    for i in 0..4 {
        let a = local.to_u(corners[i]);
        let b = local.to_u(corners[(i + 1) % 4]);
        let len = (corners[(i + 1) % 4] - corners[i]).norm();
        // Keep the smooth phase per step below pi / 4 so that, with the
        // fluctuation bound, no step can wrap.
        let smooth = (b - a).norm() * local.smooth_rate(a, b) / FRAC_PI_4;
        let n = ((len / (0.5 * spacing)).ceil() as usize)
            .max(smooth.ceil() as usize)
            .max(SIDE_SAMPLES);
        total += local.path_increment(&Path::Line { a, b }, n, &mut guard)?;
    }
    if guard.hit {
        return Err(Attempt::Collision);
    }
    Ok(round_turns(total))
}

/// Runs `attempt` on the nominal region, then on random dilations of it.
fn with_dilation<T>(
    sample: &GafSample,
    region: &Region,
    opts: &RootOptions,
    mut attempt: impl FnMut(&Region) -> Result<T, Attempt>,
) -> Result<(T, f64), RootError> {
    region.check_for(sample)?;
    for k in 0..=opts.max_retries {
        let factor = dilation_factor(sample, k);
        match attempt(&region.dilate(factor)) {
            Ok(v) => return Ok((v, factor)),
            Err(Attempt::Collision) => continue,
            Err(Attempt::Fatal(e)) => return Err(e),
        }
    }
    Err(RootError::BoundaryCollision {
        attempts: opts.max_retries + 1,
    })
}

/// Number of zeros inside `region` from the argument principle along its
/// boundary.
pub fn winding_count(
    sample: &GafSample,
    region: &Region,
    opts: &RootOptions,
) -> Result<Winding, RootError> {
    let (count, dilation) = with_dilation(sample, region, opts, |r| match *r {
        Region::Disc { center, radius } => disc_winding(sample, center, radius, opts),
        Region::Box { lo, hi } => rect_winding(sample, lo, hi, opts),
    })?;
    Ok(Winding { count, dilation })
}

fn separated(zeros: &[C64], tol: f64) -> bool {
    // `zeros` is sorted by real part.
    for i in 0..zeros.len() {
        for j in i + 1..zeros.len() {
            if zeros[j].re - zeros[i].re > tol {
                break;
            }
            if (zeros[j] - zeros[i]).norm() <= tol {
                return false;
            }
        }
    }
    true
}

fn sort_zeros(zeros: &mut [C64]) {
    zeros.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

fn finish(
    sample: &GafSample,
    region: Region,
    mut zeros: Vec<C64>,
    winding: i64,
    dilation: f64,
    mut diagnostic: Option<Diagnostic>,
    opts: &RootOptions,
) -> ZeroSet {
    sort_zeros(&mut zeros);
    let residuals: Vec<f64> = zeros
        .iter()
        .map(|z| sample.normalized_value(*z).norm())
        .collect();
    let mut flag = |d| {
        if diagnostic.is_none() {
            diagnostic = Some(d);
        }
    };
    if winding < 0 || zeros.len() as i64 != winding {
        flag(Diagnostic::CountMismatch);
    }
    if residuals
        .iter()
        .any(|r| r.is_nan() || *r > opts.residual_tol)
    {
        flag(Diagnostic::ResidualTooLarge);
    }
    if !separated(&zeros, opts.merge_tol) {
        flag(Diagnostic::MergedZeros);
    }
    ZeroSet {
        zeros,
        residuals,
        certified_count: winding.max(0) as usize,
        region,
        certificate_ok: diagnostic.is_none(),
        dilation,
        diagnostic,
    }
}

/// Certified zeros of `sample` in `region`.
pub fn find_zeros(
    sample: &GafSample,
    region: &Region,
    opts: &RootOptions,
) -> Result<ZeroSet, RootError> {
    let ((zeros, winding, diagnostic), dilation) =
        with_dilation(sample, region, opts, |r| match *r {
            Region::Disc { center, radius } => {
                let d = disc_attempt(sample, center, radius, opts)?;
                Ok((d.zeros, d.winding, d.diagnostic))
            }
            Region::Box { lo, hi } => {
                let (c, rho) = r.bounding_disc();
                let d = disc_attempt(sample, c, rho, opts)?;
                let w = rect_winding(sample, lo, hi, opts)?;
                let inside: Vec<C64> = d.zeros.into_iter().filter(|z| r.contains(*z)).collect();
                Ok((inside, w, d.diagnostic))
            }
        })?;
    Ok(finish(
        sample, *region, zeros, winding, dilation, diagnostic, opts,
    ))
}

/// All `L` zeros of an elliptic sample.
pub fn elliptic_roots(sample: &GafSample, opts: &RootOptions) -> Result<ZeroSet, RootError> {
    elliptic_roots_capped(sample, opts, ABERTH_ITERS)
}

pub(crate) fn elliptic_roots_capped(
    sample: &GafSample,
    opts: &RootOptions,
    max_iter: usize,
) -> Result<ZeroSet, RootError> {
    let family = sample.model().family;
    if family != Family::Elliptic {
        return Err(RootError::NotElliptic(family));
    }
    let (series, _) = sample.scaled_series();
    let degree = series.len() - 1;
    let lead = series[degree].norm();
    if series.iter().all(|c| c.norm_sqr() == 0.0) {
        return Err(RootError::IdenticallyZero);
    }
    let cauchy = 1.0
        + series[..degree]
            .iter()
            .map(|c| c.norm() / lead)
            .fold(0.0, f64::max);
    let region = Region::centered_disc(cauchy.min(1e12))?;
    let (mut roots, converged) = aberth(series, max_iter);
    for z in roots.iter_mut() {
        if let Some(p) = newton(sample, *z, 1e-3 * z.norm().max(1.0)) {
            *z = p;
        }
    }
    if converged && roots.len() == degree {
        return Ok(finish(
            sample,
            region,
            roots,
            degree as i64,
            1.0,
            None,
            opts,
        ));
    }
    // Fallback: grid search on the Cauchy disc, with its winding number as
    // the count check.
    let mut set = find_zeros(sample, &region, opts)?;
    if set.certified_count != degree {
        set.certificate_ok = false;
        set.diagnostic.get_or_insert(Diagnostic::CountMismatch);
    }
    if !converged && set.diagnostic.is_none() {
        // Grid result stands on its own certificate.
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelSpec, Truncation};

    fn poly(model: &ModelSpec, series: &[C64]) -> GafSample {
        GafSample::from_series(model, series, 50.0).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn winding_of_synthetic_functions() {
        let opts = RootOptions::default();
        let disc = Region::centered_disc(1.0).unwrap();
        let constant = poly(&ModelSpec::elliptic(3).unwrap(), &[c(2.0, 1.0)]);
        assert_eq!(winding_count(&constant, &disc, &opts).unwrap().count, 0);
        let square = poly(
            &ModelSpec::elliptic(2).unwrap(),
            &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        );
        assert_eq!(winding_count(&square, &disc, &opts).unwrap().count, 2);
        let b = Region::rect(c(-0.5, -0.5), c(0.7, 0.3)).unwrap();
        assert_eq!(winding_count(&square, &b, &opts).unwrap().count, 2);
    }

    #[test]
    fn cube_roots_of_unity() {
        let model = ModelSpec::elliptic(3).unwrap();
        let s = poly(
            &model,
            &[c(-1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        );
        let set = find_zeros(
            &s,
            &Region::centered_disc(2.0).unwrap(),
            &RootOptions::default(),
        )
        .unwrap();
        assert!(set.certificate_ok, "{:?}", set.diagnostic);
        assert_eq!(set.len(), 3);
        for z in &set.zeros {
            assert!((z.powi(3) - 1.0).norm() < 1e-12);
        }
        assert!(set.max_residual() < 1e-10);
    }

    #[test]
    fn double_zero_is_not_certified() {
        let model = ModelSpec::elliptic(2).unwrap();
        let s = poly(&model, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let set = find_zeros(
            &s,
            &Region::centered_disc(1.0).unwrap(),
            &RootOptions::default(),
        )
        .unwrap();
        assert_eq!(set.certified_count, 2);
        assert!(!set.certificate_ok);
        assert_eq!(set.diagnostic, Some(Diagnostic::UnresolvedCluster));
    }

    #[test]
    fn flat_sample_certifies() {
        let model = ModelSpec::flat(1.0).unwrap();
        let tr = Truncation::for_radius(&model, 4.0).unwrap();
        let opts = RootOptions::default();
        let region = Region::centered_disc(4.0).unwrap();
        for trial in 0..20 {
            let s = GafSample::draw(&model, &tr, 11, trial);
            let set = find_zeros(&s, &region, &opts).unwrap();
            assert!(set.certificate_ok, "trial {trial}: {:?}", set.diagnostic);
            assert_eq!(set.len(), set.certified_count);
            let w = winding_count(&s, &region, &opts).unwrap();
            assert_eq!(w.count as usize, set.certified_count);
        }
    }

    #[test]
    fn sector_split_conserves_counts() {
        let model = ModelSpec::flat(1.0).unwrap();
        let tr = Truncation::for_radius(&model, 3.0).unwrap();
        let s = GafSample::draw(&model, &tr, 5, 0);
        let local = Local::new(&s, c(0.0, 0.0), 3.0).unwrap();
        let mut queue = vec![Sector {
            r0: 0.0,
            r1: 1.0,
            th0: 0.0,
            th1: TAU,
        }];
        let mut checked = 0;
        while let Some(cell) = queue.pop() {
            let parent = sector_count(&local, &cell).ok().unwrap();
            let kids = cell.split();
            let sum: i64 = kids
                .iter()
                .map(|k| sector_count(&local, k).ok().unwrap())
                .sum();
            assert_eq!(sum, parent);
            checked += 1;
            if checked < 40 {
                queue.extend(kids);
            }
        }
    }

    #[test]
    fn aberth_on_known_polynomials() {
        // (z - 1)(z - 2i)(z + 3)
        let roots = [c(1.0, 0.0), c(0.0, 2.0), c(-3.0, 0.0)];
        let mut a = vec![c(1.0, 0.0)];
        for r in roots {
            let mut next = vec![c(0.0, 0.0); a.len() + 1];
            for (k, x) in a.iter().enumerate() {
                next[k + 1] += x;
                next[k] -= x * r;
            }
            a = next;
        }
        let (mut got, ok) = aberth(&a, 200);
        assert!(ok);
        sort_zeros(&mut got);
        let mut want = roots.to_vec();
        sort_zeros(&mut want);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn elliptic_double_root() {
        let model = ModelSpec::elliptic(2).unwrap();
        let s = poly(&model, &[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        let set = elliptic_roots(&s, &RootOptions::default()).unwrap();
        assert_eq!(set.len(), 2);
        for z in &set.zeros {
            assert!((z + 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn elliptic_random_degree_twenty() {
        let model = ModelSpec::elliptic(20).unwrap();
        let tr = Truncation::for_radius(&model, 1.0).unwrap();
        for trial in 0..10 {
            let s = GafSample::draw(&model, &tr, 3, trial);
            let set = elliptic_roots(&s, &RootOptions::default()).unwrap();
            assert!(set.certificate_ok, "{:?}", set.diagnostic);
            assert_eq!(set.len(), 20);
            assert!(set.max_residual() < 1e-9);
        }
    }

    #[test]
    fn elliptic_fallback_uses_grid() {
        let model = ModelSpec::elliptic(6).unwrap();
        let tr = Truncation::for_radius(&model, 1.0).unwrap();
        let s = GafSample::draw(&model, &tr, 9, 1);
        let direct = elliptic_roots(&s, &RootOptions::default()).unwrap();
        let grid = elliptic_roots_capped(&s, &RootOptions::default(), 0).unwrap();
        assert!(grid.certificate_ok, "{:?}", grid.diagnostic);
        assert_eq!(grid.len(), 6);
        for (a, b) in direct.zeros.iter().zip(&grid.zeros) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn off_centre_disc_matches_centred_search() {
        let model = ModelSpec::flat(1.0).unwrap();
        let tr = Truncation::for_radius(&model, 8.0).unwrap();
        let s = GafSample::draw(&model, &tr, 21, 4);
        let opts = RootOptions::default();
        let big = find_zeros(&s, &Region::centered_disc(7.9).unwrap(), &opts).unwrap();
        let small = Region::disc(c(5.0, 2.0), 2.0).unwrap();
        let part = find_zeros(&s, &small, &opts).unwrap();
        assert!(part.certificate_ok, "{:?}", part.diagnostic);
        let expected: Vec<C64> = big
            .zeros
            .iter()
            .cloned()
            .filter(|z| small.contains(*z))
            .collect();
        assert_eq!(expected.len(), part.len());
        for (a, b) in expected.iter().zip(&part.zeros) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn box_region_filters_and_certifies() {
        let model = ModelSpec::flat(1.0).unwrap();
        let tr = Truncation::for_radius(&model, 4.0 * 2f64.sqrt()).unwrap();
        let s = GafSample::draw(&model, &tr, 8, 2);
        let set = find_zeros(&s, &Region::square(4.0).unwrap(), &RootOptions::default()).unwrap();
        assert!(set.certificate_ok, "{:?}", set.diagnostic);
        assert!(set
            .zeros
            .iter()
            .all(|z| z.re.abs() <= 4.0 && z.im.abs() <= 4.0));
    }

    #[test]
    fn region_beyond_truncation_is_rejected() {
        let model = ModelSpec::flat(1.0).unwrap();
        let tr = Truncation::for_radius(&model, 2.0).unwrap();
        let s = GafSample::draw(&model, &tr, 1, 0);
        let err = find_zeros(
            &s,
            &Region::centered_disc(3.0).unwrap(),
            &RootOptions::default(),
        );
        assert!(matches!(err, Err(RootError::BeyondCertifiedRadius { .. })));
    }
}
