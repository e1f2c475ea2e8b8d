//! Monte Carlo experiments on zero sets: counts, linear statistics, holes,
//! deviations, pair correlations, the Offord bound, stationarity and
//! rigidity comparisons.

use crate::harness::{
    certified_zeros, derive_seed, run_trials, trial_zeros, Discard, DiscardTally, MAX_DISCARD_RATE,
};
use gafzero_core::estimate::{
    empirical_pmf, integer_histogram, joint_se, ks_normal, ks_two_sample, ks_two_sample_critical,
    total_variation, wilson, wilson_se, wilson_upper, Interval, Moments, Z95,
};
use gafzero_core::model::Truncation;
use gafzero_core::oracle::{
    count_law_hyperbolic, hole_prob_hyperbolic, offord_bound, pseudo_hyperbolic_distance,
    pv_pair_ratio,
};
use gafzero_core::quad::integrate;
use gafzero_core::rng::{CounterRng, Purpose};
use gafzero_core::testfn::TestFunction;
use gafzero_core::unitary::Unitary;
use gafzero_core::{
    find_zeros, Family, GafSample, IsometrySpec, ModelSpec, Region, RootOptions, ZeroSet, C64,
    TRUNCATION_TOL,
};
use serde::Serialize;
use std::f64::consts::{PI, TAU};
use thiserror::Error;

/// Tolerance of the closed-form laws used as oracles.
pub const ORACLE_TOL: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    /// An input is out of range; `field` names the offending parameter.
    #[error("invalid `{field}`: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid {
        field,
        message: message.into(),
    }
}

/// Truncation certifying `region` for `model`, or a parameter error.
pub fn truncation_for(model: &ModelSpec, region: &Region) -> Result<Truncation, ExperimentError> {
    let t = Truncation::for_radius(model, region.max_modulus())
        .map_err(|e| invalid("radius", e.to_string()))?;
    if let Family::Hyperbolic = model.family {
        if region.max_modulus() >= 1.0 {
            return Err(invalid("radius", "region leaves the unit disc"));
        }
    }
    Ok(t)
}

/// Discard bookkeeping shared by every summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialAccount {
    pub trials: u64,
    pub discards: DiscardTally,
    pub discard_rate: f64,
    /// Discard rate below [`MAX_DISCARD_RATE`].
    pub valid: bool,
}

impl TrialAccount {
    pub fn new<T>(outcomes: &[Result<T, Discard>]) -> Self {
        let discards = DiscardTally::from_outcomes(outcomes);
        let trials = outcomes.len() as u64;
        let discard_rate = if trials == 0 {
            0.0
        } else {
            discards.total() as f64 / trials as f64
        };
        Self {
            trials,
            discards,
            discard_rate,
            valid: trials > 0 && discard_rate < MAX_DISCARD_RATE,
        }
    }

    pub fn kept(&self) -> u64 {
        self.trials - self.discards.total()
    }
}

/// Mean with its standard error and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub ci95: Interval,
}

impl MeanEstimate {
    pub fn from_moments(m: &Moments) -> Self {
        Self {
            mean: m.mean,
            std_err: m.std_err(),
            ci95: m.mean_ci(Z95),
        }
    }
}

/// Frequency of an event with its Wilson interval. When the event was never
/// observed `upper_bound` holds the one-sided 95% Wilson bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub events: u64,
    pub trials: u64,
    pub frequency: f64,
    pub wilson95: Interval,
    pub upper_bound: Option<f64>,
}

impl Frequency {
    pub fn new(events: u64, trials: u64) -> Self {
        Self {
            events,
            trials,
            frequency: if trials == 0 {
                f64::NAN
            } else {
                events as f64 / trials as f64
            },
            wilson95: wilson(events, trials, Z95),
            upper_bound: (events == 0).then(|| wilson_upper(0, trials, 0.05)),
        }
    }
}

/// `∫_region ρ_1 dm`, by closed form for centred discs and flat regions and
/// by quadrature otherwise.
pub fn expected_count(model: &ModelSpec, region: &Region) -> f64 {
    if model.family == Family::Flat {
        return model.intensity * region.area() / PI;
    }
    match *region {
        Region::Disc { center, radius } if center == C64::new(0.0, 0.0) => {
            model.mean_count_centered_disc(radius)
        }
        Region::Disc { center, radius } => {
            integrate(
                |t| {
                    integrate(
                        |a| model.first_intensity(center + C64::from_polar(t, a)) * t,
                        0.0,
                        TAU,
                        1e-13,
                        1e-11,
                        400,
                    )
                    .value
                },
                0.0,
                radius,
                1e-12,
                1e-10,
                400,
            )
            .value
        }
        Region::Box { lo, hi } => {
            integrate(
                |x| {
                    integrate(
                        |y| model.first_intensity(C64::new(x, y)),
                        lo.im,
                        hi.im,
                        1e-13,
                        1e-11,
                        400,
                    )
                    .value
                },
                lo.re,
                hi.re,
                1e-12,
                1e-10,
                400,
            )
            .value
        }
    }
}

// ---------------------------------------------------------------------------
// Counts

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountSummary {
    pub model: ModelSpec,
    pub region: Region,
    pub seed: u64,
    pub truncation: Truncation,
    #[serde(flatten)]
    pub account: TrialAccount,
    pub mean: MeanEstimate,
    pub variance: f64,
    pub variance_ci95: Interval,
    /// `∫_region ek_intensity`.
    pub expected_mean: f64,
    pub histogram: Vec<u64>,
    pub pmf: Vec<f64>,
    pub hole: Frequency,
    /// Exact law for centred discs of the hyperbolic `L = 1` process.
    pub oracle_pmf: Option<Vec<f64>>,
    pub oracle_tv: Option<f64>,
    pub max_residual: f64,
    /// Per kept trial, in trial order.
    #[serde(skip)]
    pub counts: Vec<usize>,
}

/// Exact count law when the region is a centred hyperbolic `L = 1` disc.
pub fn count_oracle(model: &ModelSpec, region: &Region) -> Option<Vec<f64>> {
    match *region {
        Region::Disc { center, radius }
            if model.family == Family::Hyperbolic
                && model.intensity == 1.0
                && center == C64::new(0.0, 0.0) =>
        {
            count_law_hyperbolic(radius, ORACLE_TOL).ok().map(|l| l.pmf)
        }
        _ => None,
    }
}

/// Per trial: the certified count and the largest normalized residual.
pub type CountOutcomes = Vec<Result<(usize, f64), Discard>>;

/// Per-trial counts in `region`; the count recorded is the certified count.
pub fn count_trials(
    model: &ModelSpec,
    region: &Region,
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<(CountOutcomes, Truncation), ExperimentError> {
    let truncation = truncation_for(model, region)?;
    let outcomes = run_trials(trials, |t| {
        trial_zeros(model, &truncation, region, opts, seed, t)
            .map(|z| (z.certified_count, z.max_residual()))
    });
    Ok((outcomes, truncation))
}

pub fn estimate_counts(
    model: &ModelSpec,
    region: &Region,
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<CountSummary, ExperimentError> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let (outcomes, truncation) = count_trials(model, region, trials, seed, opts)?;
    let account = TrialAccount::new(&outcomes);
    let kept: Vec<(usize, f64)> = outcomes.iter().filter_map(|o| o.ok()).collect();
    let counts: Vec<usize> = kept.iter().map(|c| c.0).collect();
    let max_residual = kept.iter().map(|c| c.1).fold(0.0, f64::max);
    Ok(summarize_counts(
        model,
        region,
        seed,
        truncation,
        account,
        counts,
        max_residual,
    ))
}

fn summarize_counts(
    model: &ModelSpec,
    region: &Region,
    seed: u64,
    truncation: Truncation,
    account: TrialAccount,
    counts: Vec<usize>,
    max_residual: f64,
) -> CountSummary {
    let moments = Moments::from_slice(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let histogram = integer_histogram(&counts);
    let pmf = empirical_pmf(&histogram);
    let holes = histogram.first().copied().unwrap_or(0);
    let oracle_pmf = count_oracle(model, region);
    let oracle_tv = oracle_pmf.as_ref().map(|q| total_variation(&pmf, q));
    CountSummary {
        model: model.clone(),
        region: *region,
        seed,
        truncation,
        account,
        mean: MeanEstimate::from_moments(&moments),
        variance: moments.variance(),
        variance_ci95: moments.variance_ci(Z95),
        expected_mean: expected_count(model, region),
        histogram,
        pmf,
        hole: Frequency::new(holes, counts.len() as u64),
        oracle_pmf,
        oracle_tv,
        max_residual,
        counts,
    }
}

// ---------------------------------------------------------------------------
// Zero extraction

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZerosSummary {
    pub model: ModelSpec,
    pub region: Region,
    pub seed: u64,
    pub truncation: Truncation,
    pub trials: u64,
    /// Boundary collisions resolved by dilation, and solver errors.
    pub discards: u64,
    pub discard_rate: f64,
    /// Kept trials whose list length equals the winding count with every
    /// residual below tolerance.
    pub certified: u64,
    pub certified_fraction: f64,
    pub max_residual: f64,
    pub mean_count: MeanEstimate,
    /// Zero sets of the kept trials, in trial order.
    #[serde(skip)]
    pub zero_sets: Vec<(u64, ZeroSet)>,
}

/// Runs the zero finder on `trials` samples; unlike the statistical
/// harness, refused certificates are kept and reported.
pub fn zero_extraction(
    model: &ModelSpec,
    region: &Region,
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<ZerosSummary, ExperimentError> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let truncation = truncation_for(model, region)?;
    let outcomes = run_trials(trials, |t| {
        let s = GafSample::draw(model, &truncation, seed, t);
        match find_zeros(&s, region, opts) {
            Ok(z) if !z.was_dilated() => Some((t, z)),
            _ => None,
        }
    });
    let zero_sets: Vec<(u64, ZeroSet)> = outcomes.into_iter().flatten().collect();
    let kept = zero_sets.len() as u64;
    let certified = zero_sets
        .iter()
        .filter(|(_, z)| {
            z.certificate_ok
                && z.certified_count == z.len()
                && z.max_residual() <= opts.residual_tol
        })
        .count() as u64;
    let counts: Vec<f64> = zero_sets.iter().map(|(_, z)| z.len() as f64).collect();
    Ok(ZerosSummary {
        model: model.clone(),
        region: *region,
        seed,
        truncation,
        trials,
        discards: trials - kept,
        discard_rate: (trials - kept) as f64 / trials as f64,
        certified,
        certified_fraction: if kept == 0 {
            f64::NAN
        } else {
            certified as f64 / kept as f64
        },
        max_residual: zero_sets
            .iter()
            .map(|(_, z)| z.max_residual())
            .fold(0.0, f64::max),
        mean_count: MeanEstimate::from_moments(&Moments::from_slice(&counts)),
        zero_sets,
    })
}

// ---------------------------------------------------------------------------
// Linear statistics

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinStatSummary {
    pub model: ModelSpec,
    pub p: u32,
    pub r: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub account: TrialAccount,
    /// Analytic `E Z_r(h) = (L r^2 / π) ∫ h dm`.
    pub center: f64,
    pub mean: MeanEstimate,
    pub variance: f64,
    pub variance_ci95: Interval,
    /// `Var Z_r(h) · r^2 / ||Δh||_2^2`.
    pub scaled_variance: f64,
    pub scaled_variance_ci95: Interval,
    /// Kolmogorov–Smirnov distance of the normalized values to N(0, 1).
    pub ks_normal: Option<f64>,
    /// `Z_r(h)` per kept trial.
    #[serde(skip)]
    pub values: Vec<f64>,
    /// `(Z_r(h) - center) / sd` per kept trial.
    #[serde(skip)]
    pub normalized: Vec<f64>,
}

fn summarize_linear(
    model: &ModelSpec,
    h: &TestFunction,
    r: f64,
    seed: u64,
    account: TrialAccount,
    center: f64,
    values: Vec<f64>,
) -> LinStatSummary {
    let m = Moments::from_slice(&values);
    let var = m.variance();
    let vci = m.variance_ci(Z95);
    let scale = r * r / h.laplacian_l2_sq();
    let sd = var.sqrt();
    let normalized: Vec<f64> = if sd > 0.0 {
        values.iter().map(|v| (v - center) / sd).collect()
    } else {
        Vec::new()
    };
    LinStatSummary {
        model: model.clone(),
        p: h.p(),
        r,
        seed,
        account,
        center,
        mean: MeanEstimate::from_moments(&m),
        variance: var,
        variance_ci95: vci,
        scaled_variance: var * scale,
        scaled_variance_ci95: Interval::new(vci.lo * scale, vci.hi * scale),
        ks_normal: (!normalized.is_empty()).then(|| ks_normal(&normalized)),
        values,
        normalized,
    }
}

fn check_common(trials: u64, r: f64) -> Result<(), ExperimentError> {
    if trials < 2 {
        return Err(invalid("trials", "at least two trials are needed"));
    }
    if r.is_nan() || r <= 0.0 {
        return Err(invalid("radius", "must be positive"));
    }
    Ok(())
}

pub fn linear_stat_experiment(
    model: &ModelSpec,
    h: &TestFunction,
    r: f64,
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<LinStatSummary, ExperimentError> {
    if model.family != Family::Flat {
        return Err(invalid("family", "linear statistics run on the flat model"));
    }
    check_common(trials, r)?;
    let region = Region::centered_disc(r).map_err(|e| invalid("radius", e.to_string()))?;
    let truncation = truncation_for(model, &region)?;
    let outcomes = run_trials(trials, |t| {
        trial_zeros(model, &truncation, &region, opts, seed, t)
            .map(|z| h.linear_statistic(&z.zeros, r))
    });
    let account = TrialAccount::new(&outcomes);
    let values: Vec<f64> = outcomes.into_iter().filter_map(Result::ok).collect();
    let center = h.expected_linear_statistic(model, r);
    Ok(summarize_linear(model, h, r, seed, account, center, values))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub r: f64,
    pub seed: u64,
    pub variance: f64,
    /// `Var · r^2`.
    pub var_r2: f64,
    pub var_r2_ci95: Interval,
    /// `Var · r^2 / ||Δh||_2^2`, whose limit estimates κ.
    pub kappa: f64,
    pub kappa_ci95: Interval,
    pub ks_normal: Option<f64>,
    pub valid: bool,
}

/// Batches [`linear_stat_experiment`] over `radii`, each on its own derived
/// seed.
pub fn variance_scaling(
    model: &ModelSpec,
    h: &TestFunction,
    radii: &[f64],
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<Vec<ScalingRow>, ExperimentError> {
    if radii.is_empty() {
        return Err(invalid("radii", "at least one radius is needed"));
    }
    radii
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let s = derive_seed(seed, i as u64);
            let sum = linear_stat_experiment(model, h, r, trials, s, opts)?;
            let l2 = h.laplacian_l2_sq();
            Ok(ScalingRow {
                r,
                seed: s,
                variance: sum.variance,
                var_r2: sum.variance * r * r,
                var_r2_ci95: Interval::new(
                    sum.scaled_variance_ci95.lo * l2,
                    sum.scaled_variance_ci95.hi * l2,
                ),
                kappa: sum.scaled_variance,
                kappa_ci95: sum.scaled_variance_ci95,
                ks_normal: sum.ks_normal,
                valid: sum.account.valid,
            })
        })
        .collect()
}

/// Lattice points `√π (k + i l)` with modulus at most `radius`, row major.
pub fn lattice_in_disc(radius: f64) -> Vec<C64> {
    let a = PI.sqrt();
    let k = (radius / a).floor() as i64;
    let mut pts = Vec::new();
    for l in -k..=k {
        for j in -k..=k {
            let z = C64::new(a * j as f64, a * l as f64);
            if z.norm() <= radius {
                pts.push(z);
            }
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineSummary {
    pub sigma: f64,
    #[serde(flatten)]
    pub linear: LinStatSummary,
    /// `Var S_r(h) / ||∇h||_2^2`.
    pub gradient_scaled_variance: f64,
    pub gradient_scaled_variance_ci95: Interval,
}

/// `S_r(h)` over the lattice `√π Z^2` with i.i.d. perturbations `σ ζ`,
/// `ζ` standard complex Gaussian.
pub fn perturbed_lattice_baseline(
    sigma: f64,
    h: &TestFunction,
    r: f64,
    trials: u64,
    seed: u64,
) -> Result<BaselineSummary, ExperimentError> {
    check_common(trials, r)?;
    if sigma.is_nan() || sigma < 0.0 {
        return Err(invalid("sigma", "must be nonnegative"));
    }
    // Perturbations beyond 10 σ have probability e^{-100}.
    let lattice = lattice_in_disc(r + 10.0 * sigma);
    let values = run_trials(trials, |t| {
        let mut rng = CounterRng::new(seed, Purpose::Perturbation, t);
        let pts: Vec<C64> = lattice
            .iter()
            .map(|&z| z + rng.complex_normal() * sigma)
            .collect();
        h.linear_statistic(&pts, r)
    });
    let model = ModelSpec::flat(1.0)
        .expect("unit flat model")
        .with_label("perturbed-lattice");
    let account = TrialAccount::new(&values.iter().map(Ok::<_, Discard>).collect::<Vec<_>>());
    let center = r * r * h.integral() / PI;
    let linear = summarize_linear(&model, h, r, seed, account, center, values);
    let g = h.gradient_l2_sq();
    Ok(BaselineSummary {
        sigma,
        gradient_scaled_variance: linear.variance / g,
        gradient_scaled_variance_ci95: Interval::new(
            linear.variance_ci95.lo / g,
            linear.variance_ci95.hi / g,
        ),
        linear,
    })
}

// ---------------------------------------------------------------------------
// Holes and deviations

/// Moduli of the certified zeros inside the centred disc of radius `r` for
/// every trial.
fn disc_moduli(
    model: &ModelSpec,
    r: f64,
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<Vec<Result<Vec<f64>, Discard>>, ExperimentError> {
    let region = Region::centered_disc(r).map_err(|e| invalid("radius", e.to_string()))?;
    let truncation = truncation_for(model, &region)?;
    Ok(run_trials(trials, |t| {
        trial_zeros(model, &truncation, &region, opts, seed, t)
            .map(|z| z.zeros.iter().map(|w| w.norm()).collect())
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleRow {
    pub radius: f64,
    #[serde(flatten)]
    pub frequency: Frequency,
    /// `Π (1 - ρ^{2j})` for the hyperbolic `L = 1` process.
    pub exact: Option<f64>,
    /// `-log(frequency) / r^4`.
    pub log_rate_r4: Option<f64>,
    /// `-(1 - ρ) log(frequency)` (hyperbolic), whose limit as `ρ -> 1` is
    /// the boundary constant of the hole probability.
    pub boundary_rate: Option<f64>,
    /// The same quantity for the exact product.
    pub exact_boundary_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoleSummary {
    pub model: ModelSpec,
    pub seed: u64,
    #[serde(flatten)]
    pub account: TrialAccount,
    pub rows: Vec<HoleRow>,
}

fn check_radii(model: &ModelSpec, radii: &[f64]) -> Result<f64, ExperimentError> {
    if radii.is_empty() {
        return Err(invalid("radii", "at least one radius is needed"));
    }
    let mut max = 0.0f64;
    for &r in radii {
        if r.is_nan() || r <= 0.0 {
            return Err(invalid("radii", "radii must be positive"));
        }
        max = max.max(r);
    }
    if model.family == Family::Hyperbolic && max >= 1.0 {
        return Err(invalid("radii", "hyperbolic radii must be below 1"));
    }
    Ok(max)
}

/// Hole frequencies at nested radii, all read off one zero set per trial.
pub fn hole_estimate(
    model: &ModelSpec,
    radii: &[f64],
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<HoleSummary, ExperimentError> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let max = check_radii(model, radii)?;
    let outcomes = disc_moduli(model, max, trials, seed, opts)?;
    let account = TrialAccount::new(&outcomes);
    let kept: Vec<&Vec<f64>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let exact_law = model.family == Family::Hyperbolic && model.intensity == 1.0;
    let rows = radii
        .iter()
        .map(|&r| {
            let holes = kept.iter().filter(|m| m.iter().all(|&x| x > r)).count() as u64;
            let frequency = Frequency::new(holes, kept.len() as u64);
            let exact = if exact_law {
                hole_prob_hyperbolic(r, ORACLE_TOL).ok()
            } else {
                None
            };
            let hyperbolic = model.family == Family::Hyperbolic;
            HoleRow {
                radius: r,
                frequency,
                exact,
                log_rate_r4: (holes > 0).then(|| -frequency.frequency.ln() / r.powi(4)),
                boundary_rate: (hyperbolic && holes > 0)
                    .then(|| -(1.0 - r) * frequency.frequency.ln()),
                exact_boundary_rate: exact.map(|p| -(1.0 - r) * p.ln()),
            }
        })
        .collect();
    Ok(HoleSummary {
        model: model.clone(),
        seed,
        account,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub delta: f64,
    #[serde(flatten)]
    pub frequency: Frequency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSummary {
    pub model: ModelSpec,
    pub r: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub account: TrialAccount,
    pub expected_count: f64,
    pub rows: Vec<DeviationRow>,
}

/// Frequency of `|n(r) / E n(r) - 1| >= δ` per δ.
pub fn large_dev_estimate(
    model: &ModelSpec,
    r: f64,
    deltas: &[f64],
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<DeviationSummary, ExperimentError> {
    if model.family != Family::Flat {
        return Err(invalid("family", "large deviations run on the flat model"));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    if deltas.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(invalid("deltas", "must be nonnegative"));
    }
    let region = Region::centered_disc(r).map_err(|e| invalid("radius", e.to_string()))?;
    let (outcomes, _) = count_trials(model, &region, trials, seed, opts)?;
    let account = TrialAccount::new(&outcomes);
    let expected = expected_count(model, &region);
    let counts: Vec<usize> = outcomes
        .iter()
        .filter_map(|o| o.ok().map(|c| c.0))
        .collect();
    let rows = deltas
        .iter()
        .map(|&d| {
            let k = counts
                .iter()
                .filter(|&&c| (c as f64 / expected - 1.0).abs() >= d)
                .count() as u64;
            DeviationRow {
                delta: d,
                frequency: Frequency::new(k, counts.len() as u64),
            }
        })
        .collect();
    Ok(DeviationSummary {
        model: model.clone(),
        r,
        seed,
        account,
        expected_count: expected,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Pair correlation

/// Bins holding fewer ordered pairs are flagged.
pub const MIN_BIN_PAIRS: u64 = 50;

/// Pairs drawn to compute the bin normalizers.
pub const NORMALIZER_PAIRS: u64 = 1 << 23;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBin {
    pub lo: f64,
    pub hi: f64,
    /// Ordered pairs of distinct zeros observed in the bin.
    pub pairs: u64,
    /// Estimated `ρ_2 / (ρ_1 ρ_1)` averaged over the bin.
    pub estimate: f64,
    pub std_err: f64,
    /// Bin average of the exact pair ratio (hyperbolic `L = 1`).
    pub oracle: Option<f64>,
    pub underfilled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSummary {
    pub model: ModelSpec,
    pub region: Region,
    pub seed: u64,
    /// `pseudo_hyperbolic` or `euclidean`.
    pub separation: &'static str,
    #[serde(flatten)]
    pub account: TrialAccount,
    pub bins: Vec<PairBin>,
}

fn separation(family: Family, z: C64, w: C64) -> f64 {
    match family {
        Family::Hyperbolic => pseudo_hyperbolic_distance(z, w),
        _ => (z - w).norm(),
    }
}

/// `∫∫_{D×D} ρ_1 ρ_1 1[sep ∈ bin]` and the matching bin averages of the
/// exact pair ratio, by importance sampling of uniform pairs in `D`.
fn pair_normalizers(
    model: &ModelSpec,
    region: &Region,
    width: f64,
    bins: usize,
    seed: u64,
) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = region.bounding_box();
    let mut rng = CounterRng::new(seed, Purpose::Regions, u64::MAX);
    let mut draw = || loop {
        let z = C64::new(
            lo.re + (hi.re - lo.re) * rng.uniform(),
            lo.im + (hi.im - lo.im) * rng.uniform(),
        );
        if region.contains(z) {
            return z;
        }
    };
    let mut mass = vec![0.0; bins];
    let mut ratio = vec![0.0; bins];
    for _ in 0..NORMALIZER_PAIRS {
        let (z, w) = (draw(), draw());
        let d = separation(model.family, z, w);
        let k = (d / width) as usize;
        if k < bins {
            let weight = model.first_intensity(z) * model.first_intensity(w);
            mass[k] += weight;
            if model.family == Family::Hyperbolic {
                ratio[k] += weight * pv_pair_ratio(d);
            }
        }
    }
    let area = region.area();
    let scale = area * area / NORMALIZER_PAIRS as f64;
    let oracle = ratio
        .iter()
        .zip(&mass)
        .map(|(r, m)| if *m > 0.0 { r / m } else { f64::NAN })
        .collect();
    (mass.iter().map(|m| m * scale).collect(), oracle)
}

pub fn pair_correlation_estimate(
    model: &ModelSpec,
    region: &Region,
    bins: usize,
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<PairSummary, ExperimentError> {
    if bins == 0 {
        return Err(invalid("bins", "must be positive"));
    }
    if trials < 2 {
        return Err(invalid("trials", "at least two trials are needed"));
    }
    let truncation = truncation_for(model, region)?;
    let max_sep = match model.family {
        Family::Hyperbolic => 1.0,
        _ => {
            let (lo, hi) = region.bounding_box();
            (hi - lo).norm()
        }
    };
    let width = max_sep / bins as f64;
    let outcomes = run_trials(trials, |t| {
        trial_zeros(model, &truncation, region, opts, seed, t).map(|z| {
            let mut counts = vec![0u32; bins];
            for (i, a) in z.zeros.iter().enumerate() {
                for b in &z.zeros[i + 1..] {
                    let k = (separation(model.family, *a, *b) / width) as usize;
                    if k < bins {
                        counts[k] += 2;
                    }
                }
            }
            counts
        })
    });
    let account = TrialAccount::new(&outcomes);
    let kept: Vec<&Vec<u32>> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let (norm, oracle) = pair_normalizers(model, region, width, bins, derive_seed(seed, 17));
    let exact = model.family == Family::Hyperbolic && model.intensity == 1.0;
    let bins = (0..bins)
        .map(|k| {
            let m = Moments::from_slice(&kept.iter().map(|c| c[k] as f64).collect::<Vec<_>>());
            let pairs = kept.iter().map(|c| c[k] as u64).sum::<u64>();
            PairBin {
                lo: k as f64 * width,
                hi: (k + 1) as f64 * width,
                pairs,
                estimate: m.mean / norm[k],
                std_err: m.std_err() / norm[k],
                oracle: exact.then_some(oracle[k]),
                underfilled: pairs < MIN_BIN_PAIRS,
            }
        })
        .collect();
    Ok(PairSummary {
        model: model.clone(),
        region: *region,
        seed,
        separation: if model.family == Family::Hyperbolic {
            "pseudo_hyperbolic"
        } else {
            "euclidean"
        },
        account,
        bins,
    })
}

// ---------------------------------------------------------------------------
// Offord bound

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffordRow {
    pub lambda: f64,
    #[serde(flatten)]
    pub frequency: Frequency,
    pub wilson_se: f64,
    pub bound: f64,
    /// Frequency above `bound + 3 · wilson_se`.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffordSummary {
    pub model: ModelSpec,
    pub p: u32,
    pub r: f64,
    pub seed: u64,
    #[serde(flatten)]
    pub account: TrialAccount,
    pub laplacian_l1: f64,
    pub center: f64,
    pub rows: Vec<OffordRow>,
    pub any_violation: bool,
}

/// Exceedance frequencies of `|Σ φ(z_i) - E| > λ` for `φ = h(·/r)` against
/// `3 exp(-2πλ / ||Δφ||_1)`.
pub fn offord_check(
    model: &ModelSpec,
    h: &TestFunction,
    r: f64,
    lambdas: &[f64],
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<OffordSummary, ExperimentError> {
    check_common(trials, r)?;
    if lambdas.is_empty() || lambdas.iter().any(|l| l.is_nan() || *l < 0.0) {
        return Err(invalid("lambdas", "need nonnegative values"));
    }
    let region = Region::centered_disc(r).map_err(|e| invalid("radius", e.to_string()))?;
    let truncation = truncation_for(model, &region)?;
    let center = h.expected_linear_statistic(model, r);
    let outcomes = run_trials(trials, |t| {
        trial_zeros(model, &truncation, &region, opts, seed, t)
            .map(|z| (h.linear_statistic(&z.zeros, r) - center).abs())
    });
    let account = TrialAccount::new(&outcomes);
    let dev: Vec<f64> = outcomes.into_iter().filter_map(Result::ok).collect();
    let l1 = h.laplacian_l1();
    let n = dev.len() as u64;
    let rows: Vec<OffordRow> = lambdas
        .iter()
        .map(|&lambda| {
            let k = dev.iter().filter(|&&d| d > lambda).count() as u64;
            let frequency = Frequency::new(k, n);
            let se = wilson_se(k, n);
            let bound = offord_bound(lambda, l1);
            OffordRow {
                lambda,
                frequency,
                wilson_se: se,
                bound,
                violation: frequency.frequency > bound + 3.0 * se,
            }
        })
        .collect();
    Ok(OffordSummary {
        model: model.clone(),
        p: h.p(),
        r,
        seed,
        account,
        laplacian_l1: l1,
        center,
        any_violation: rows.iter().any(|r| r.violation),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Two-sample comparisons

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub first: CountSummary,
    pub second: CountSummary,
    pub mean_difference: f64,
    pub joint_se: f64,
    /// `|mean difference| / joint SE`.
    pub z_score: f64,
    pub ks_distance: f64,
    /// Two-sample KS critical value at level 1%.
    pub ks_critical_1pct: f64,
    pub pmf_tv: f64,
}

impl Comparison {
    pub fn new(first: CountSummary, second: CountSummary) -> Self {
        let to_f = |c: &[usize]| c.iter().map(|&x| x as f64).collect::<Vec<_>>();
        let (a, b) = (to_f(&first.counts), to_f(&second.counts));
        let (ma, mb) = (Moments::from_slice(&a), Moments::from_slice(&b));
        let se = joint_se(&ma, &mb);
        let diff = ma.mean - mb.mean;
        Self {
            mean_difference: diff,
            joint_se: se,
            z_score: if se > 0.0 {
                diff.abs() / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            },
            ks_distance: ks_two_sample(&a, &b),
            ks_critical_1pct: ks_two_sample_critical(a.len(), b.len(), 0.01),
            pmf_tv: total_variation(&first.pmf, &second.pmf),
            first,
            second,
        }
    }
}

/// Image of a disc region under `iso`.
pub fn iso_image(iso: &IsometrySpec, region: &Region) -> Result<Region, ExperimentError> {
    match *region {
        Region::Disc { center, radius } => {
            let (c, r) = iso
                .image_of_disc(center, radius)
                .ok_or_else(|| invalid("iso", "the image of the region is not a disc"))?;
            Region::disc(c, r).map_err(|e| invalid("iso", e.to_string()))
        }
        Region::Box { .. } => Err(invalid("region", "invariance tests use disc regions")),
    }
}

/// Counts on `region` and on its image under `iso`; the second run uses an
/// independent derived seed unless `shared_seed` is set.
pub fn invariance_test(
    model: &ModelSpec,
    iso: &IsometrySpec,
    region: &Region,
    trials: u64,
    seed: u64,
    shared_seed: bool,
    opts: &RootOptions,
) -> Result<Comparison, ExperimentError> {
    if iso.family() != model.family {
        return Err(invalid("iso", "isometry family differs from the model"));
    }
    let image = iso_image(iso, region)?;
    let second_seed = if shared_seed {
        seed
    } else {
        derive_seed(seed, 1)
    };
    let a = estimate_counts(model, region, trials, seed, opts)?;
    let b = estimate_counts(model, &image, trials, second_seed, opts)?;
    Ok(Comparison::new(a, b))
}

/// Counts of `f` and of `g`, whose coefficients in the weighted monomial
/// basis are `U^T ζ` for a Haar unitary `U` of size `n + 1` (identity when
/// `identity` is set). With `identity` the two functions share their
/// coefficients.
pub fn rigidity_test(
    model: &ModelSpec,
    n: usize,
    r: f64,
    trials: u64,
    seed: u64,
    identity: bool,
    opts: &RootOptions,
) -> Result<Comparison, ExperimentError> {
    if model.family != Family::Flat {
        return Err(invalid(
            "family",
            "the rigidity test runs on the flat model",
        ));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let region = Region::centered_disc(r).map_err(|e| invalid("radius", e.to_string()))?;
    let radius = 1.01 * r;
    let tail = model
        .tail_ratio(radius, n)
        .map_err(|e| invalid("radius", e.to_string()))?;
    if tail > TRUNCATION_TOL * TRUNCATION_TOL {
        return Err(invalid(
            "n",
            format!("truncation at {n} does not certify radius {r} (tail ratio {tail:e})"),
        ));
    }
    let g_seed = if identity { seed } else { derive_seed(seed, 2) };
    let outcomes = run_trials(trials, |t| {
        let draw = |s: u64| {
            let mut rng = CounterRng::new(s, Purpose::Coefficients, t);
            (0..=n).map(|_| rng.complex_normal()).collect::<Vec<C64>>()
        };
        let zf = GafSample::from_coefficients(model, draw(seed), radius, seed, t)
            .map_err(|_| Discard::Failed)
            .and_then(|f| certified_zeros(&f, &region, opts));
        let u = if identity {
            Unitary::identity(n + 1)
        } else {
            Unitary::haar(n + 1, seed, t)
        };
        let coeffs = u.apply_transpose(&draw(g_seed));
        let zg = GafSample::from_coefficients(model, coeffs, radius, g_seed, t)
            .map_err(|_| Discard::Failed)
            .and_then(|g| certified_zeros(&g, &region, opts));
        (
            zf.map(|z| (z.certified_count, z.max_residual())),
            zg.map(|z| (z.certified_count, z.max_residual())),
        )
    });
    let truncation = Truncation { n, radius };
    let side = |pick: &dyn Fn(&(TrialCount, TrialCount)) -> TrialCount, s: u64| {
        let outs: Vec<TrialCount> = outcomes.iter().map(pick).collect();
        let account = TrialAccount::new(&outs);
        let kept: Vec<(usize, f64)> = outs.iter().filter_map(|o| o.ok()).collect();
        let max_res = kept.iter().map(|c| c.1).fold(0.0, f64::max);
        summarize_counts(
            model,
            &region,
            s,
            truncation,
            account,
            kept.iter().map(|c| c.0).collect(),
            max_res,
        )
    };
    let first = side(&|o| o.0, seed);
    let second = side(&|o| o.1, g_seed);
    Ok(Comparison::new(first, second))
}

type TrialCount = Result<(usize, f64), Discard>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_hole_boundary_constant_is_pi_squared_over_twelve() {
        let c = core::f64::consts::PI.powi(2) / 12.0;
        let rate = |rho: f64| -(1.0 - rho) * hole_prob_hyperbolic(rho, ORACLE_TOL).unwrap().ln();
        // Increasing towards the limit from below.
        assert!(rate(0.9) < rate(0.95) && rate(0.95) < rate(0.99) && rate(0.99) < c);
        assert!((rate(0.99) / c - 1.0).abs() < 0.05);
    }

    #[test]
    fn expected_count_quadrature_matches_closed_form() {
        let m = ModelSpec::hyperbolic(2.0).unwrap();
        let centred = m.mean_count_centered_disc(0.5);
        // A disc just off the origin is evaluated by quadrature; shrink the
        // offset to zero to compare.
        let q = expected_count(&m, &Region::disc(C64::new(1e-12, 0.0), 0.5).unwrap());
        assert!((q - centred).abs() < 1e-9 * centred);
        let e = ModelSpec::elliptic(20).unwrap();
        assert!((expected_count(&e, &Region::centered_disc(1.0).unwrap()) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn lattice_has_one_point_per_area_pi() {
        let pts = lattice_in_disc(30.0);
        let expect = 900.0;
        assert!((pts.len() as f64 - expect).abs() < 4.0 * 30.0);
        assert!(pts.contains(&C64::new(0.0, 0.0)));
    }

    #[test]
    fn unperturbed_lattice_statistic_is_deterministic() {
        let h = TestFunction::new(3).unwrap();
        let s = perturbed_lattice_baseline(0.0, &h, 5.0, 20, 1).unwrap();
        assert_eq!(s.linear.variance, 0.0);
        assert!(s.linear.ks_normal.is_none());
        let direct = h.linear_statistic(&lattice_in_disc(5.0), 5.0);
        assert!(s.linear.values.iter().all(|&v| v == direct));
    }

    #[test]
    fn tiny_region_has_no_zeros() {
        let m = ModelSpec::flat(1.0).unwrap();
        let s = estimate_counts(
            &m,
            &Region::centered_disc(1e-3).unwrap(),
            200,
            3,
            &RootOptions::default(),
        )
        .unwrap();
        assert!(s.mean.mean < 0.02);
        assert!(s.hole.frequency > 0.98);
    }

    #[test]
    fn deviation_frequencies_are_nonincreasing() {
        let m = ModelSpec::flat(1.0).unwrap();
        let s = large_dev_estimate(
            &m,
            2.0,
            &[0.0, 0.1, 0.25, 0.5, 1.0],
            300,
            4,
            &RootOptions::default(),
        )
        .unwrap();
        assert_eq!(s.rows[0].frequency.frequency, 1.0);
        for w in s.rows.windows(2) {
            assert!(w[1].frequency.events <= w[0].frequency.events);
        }
    }
}
