//! Matching flat zero sets to the lattice `√π Z^2`, the uniform-points
//! transport baseline, and the numerical check of the transport lemma.

use crate::harness::{derive_seed, run_trials, Discard};
use crate::stats::{truncation_for, ExperimentError, MeanEstimate, TrialAccount};
use gafzero_core::estimate::{Interval, Moments, Z95};
use gafzero_core::matching::{match_points, MatchMode, DEFAULT_MATCH_CAP};
use gafzero_core::model::Truncation;
use gafzero_core::potential::{lemma_outcome, required_enlargement, LemmaOutcome, PotentialGrid};
use gafzero_core::rng::{CounterRng, Purpose};
use gafzero_core::{GafSample, ModelSpec, Region, RootOptions, C64};
use serde::Serialize;
use std::f64::consts::PI;

/// Exponents ε of the moments `E e^{ε |ξ|^2}`.
pub const EPSILONS: [f64; 3] = [0.05, 0.1, 0.2];

/// Thresholds λ of the displacement tail `P(|ξ| > λ)`.
pub const TAIL_GRID: [f64; 10] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0];

/// Largest accepted relative mismatch between lattice and zero counts.
pub const MISMATCH_LIMIT: f64 = 0.1;

fn invalid(field: &'static str, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid {
        field,
        message: message.into(),
    }
}

/// Lattice points `√π (k + i l)` in the closed box `[-s, s]^2`, row major.
pub fn lattice_in_window(s: f64) -> Vec<C64> {
    let a = PI.sqrt();
    let k = (s / a).floor() as i64;
    let mut pts = Vec::with_capacity(((2 * k + 1) * (2 * k + 1)) as usize);
    for l in -k..=k {
        for j in -k..=k {
            pts.push(C64::new(a * j as f64, a * l as f64));
        }
    }
    pts
}

/// Inner-window displacements of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialMatch {
    pub zeros: usize,
    pub lattice: usize,
    /// Zero minus lattice point for pairs whose lattice point lies in the
    /// inner half-window, in lattice order.
    pub inner: Vec<C64>,
    pub flagged: bool,
}

/// One matched window: zeros of trial `trial` against the lattice.
pub fn match_window(
    sample: &GafSample,
    window: &Region,
    s: f64,
    lattice: &[C64],
    mode: MatchMode,
    opts: &RootOptions,
) -> Result<TrialMatch, Discard> {
    let z = crate::harness::certified_zeros(sample, window, opts)?;
    let lat = lattice.len();
    let flagged = (z.len() as f64 - lat as f64).abs() > MISMATCH_LIMIT * lat as f64;
    let result =
        match_points(lattice, &z.zeros, mode, DEFAULT_MATCH_CAP).map_err(|_| Discard::Failed)?;
    let half = 0.5 * s;
    let inner = result
        .pairs
        .iter()
        .zip(&result.displacements)
        .filter(|((a, _), _)| lattice[*a].re.abs() <= half && lattice[*a].im.abs() <= half)
        .map(|(_, d)| *d)
        .collect();
    Ok(TrialMatch {
        zeros: z.len(),
        lattice: lat,
        inner,
        flagged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailPoint {
    pub lambda: f64,
    /// `P(|ξ| > λ)` over inner pairs, averaged per trial.
    pub probability: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentPoint {
    pub epsilon: f64,
    /// `E e^{ε |ξ|^2}` over inner pairs, averaged per trial.
    pub moment: f64,
    pub std_err: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchSummary {
    pub halfwidth: f64,
    pub mode: MatchMode,
    pub seed: u64,
    #[serde(flatten)]
    pub account: TrialAccount,
    /// Trials whose counts differ by more than 10%; excluded from the
    /// statistics.
    pub flagged: u64,
    pub lattice_count: usize,
    pub zero_count: MeanEstimate,
    pub expected_zero_count: f64,
    pub inner_pairs: u64,
    pub mean_abs_displacement: MeanEstimate,
    pub max_abs_displacement: f64,
    /// Mean displacement vector and its componentwise standard errors.
    pub mean_vector: [f64; 2],
    pub mean_vector_se: [f64; 2],
    pub tail: Vec<TailPoint>,
    pub moments: Vec<MomentPoint>,
    /// Inner displacements of every kept trial, in trial order.
    #[serde(skip)]
    pub displacements: Vec<C64>,
}

/// Windowed matching of flat `L = 1` zeros in `[-s, s]^2` to the lattice.
pub fn lattice_match_experiment(
    s: f64,
    trials: u64,
    seed: u64,
    mode: MatchMode,
    opts: &RootOptions,
) -> Result<MatchSummary, ExperimentError> {
    if s.is_nan() || s <= 0.0 {
        return Err(invalid("halfwidth", "must be positive"));
    }
    if trials < 2 {
        return Err(invalid("trials", "at least two trials are needed"));
    }
    let model = ModelSpec::flat(1.0).expect("unit flat model");
    let window = Region::square(s).map_err(|e| invalid("halfwidth", e.to_string()))?;
    let truncation = truncation_for(&model, &window)?;
    let lattice = lattice_in_window(s);
    let outcomes = run_trials(trials, |t| {
        let sample = GafSample::draw(&model, &truncation, seed, t);
        match_window(&sample, &window, s, &lattice, mode, opts)
    });
    let account = TrialAccount::new(&outcomes);
    let kept: Vec<&TrialMatch> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let flagged = kept.iter().filter(|m| m.flagged).count() as u64;
    let used: Vec<&TrialMatch> = kept.iter().copied().filter(|m| !m.flagged).collect();

    let zero_count = Moments::from_slice(&kept.iter().map(|m| m.zeros as f64).collect::<Vec<_>>());
    let per_trial = |f: &dyn Fn(&[C64]) -> f64| {
        Moments::from_slice(
            &used
                .iter()
                .filter(|m| !m.inner.is_empty())
                .map(|m| f(&m.inner))
                .collect::<Vec<_>>(),
        )
    };
    let mean_of = |xs: &[C64], g: &dyn Fn(C64) -> f64| {
        xs.iter().map(|&x| g(x)).sum::<f64>() / xs.len() as f64
    };
    let tail = TAIL_GRID
        .iter()
        .map(|&lambda| {
            let m = per_trial(&|xs| mean_of(xs, &|x| f64::from(u8::from(x.norm() > lambda))));
            TailPoint {
                lambda,
                probability: m.mean,
                std_err: m.std_err(),
            }
        })
        .collect();
    let moments = EPSILONS
        .iter()
        .map(|&eps| {
            let m = per_trial(&|xs| mean_of(xs, &|x| (eps * x.norm_sqr()).exp()));
            MomentPoint {
                epsilon: eps,
                moment: m.mean,
                std_err: m.std_err(),
                finite: m.mean.is_finite() && m.std_err().is_finite(),
            }
        })
        .collect();
    let abs = per_trial(&|xs| mean_of(xs, &|x| x.norm()));
    let re = per_trial(&|xs| mean_of(xs, &|x| x.re));
    let im = per_trial(&|xs| mean_of(xs, &|x| x.im));
    let displacements: Vec<C64> = used.iter().flat_map(|m| m.inner.iter().copied()).collect();
    Ok(MatchSummary {
        halfwidth: s,
        mode,
        seed,
        account,
        flagged,
        lattice_count: lattice.len(),
        zero_count: MeanEstimate::from_moments(&zero_count),
        expected_zero_count: window.area() / PI,
        inner_pairs: displacements.len() as u64,
        mean_abs_displacement: MeanEstimate::from_moments(&abs),
        max_abs_displacement: displacements.iter().map(|d| d.norm()).fold(0.0, f64::max),
        mean_vector: [re.mean, im.mean],
        mean_vector_se: [re.std_err(), im.std_err()],
        tail,
        moments,
        displacements,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AktSummary {
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    /// `T(Λ)`: mean matched displacement.
    pub transport: MeanEstimate,
    /// `T(Λ) / √(log N)`; undefined for `N = 1`.
    pub scaled: Option<MeanEstimate>,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// `N^2` uniform points in `[0, N]^2` matched to the grid `{0..N-1}^2`.
pub fn akt_baseline(n: usize, trials: u64, seed: u64) -> Result<AktSummary, ExperimentError> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if n * n > DEFAULT_MATCH_CAP {
        return Err(invalid(
            "n",
            format!("N^2 exceeds the matching cap {DEFAULT_MATCH_CAP}"),
        ));
    }
    if trials < 2 {
        return Err(invalid("trials", "at least two trials are needed"));
    }
    let grid: Vec<C64> = (0..n * n)
        .map(|k| C64::new((k % n) as f64, (k / n) as f64))
        .collect();
    let side = n as f64;
    let values = run_trials(trials, |t| {
        let mut rng = CounterRng::new(seed, Purpose::Uniform, t);
        let pts: Vec<C64> = (0..n * n)
            .map(|_| C64::new(side * rng.uniform(), side * rng.uniform()))
            .collect();
        match_points(&grid, &pts, MatchMode::MinCostSum, DEFAULT_MATCH_CAP)
            .expect("sizes checked above")
            .mean_cost
    });
    let m = Moments::from_slice(&values);
    let scaled = (n > 1).then(|| {
        let f = (side.ln()).sqrt();
        MeanEstimate {
            mean: m.mean / f,
            std_err: m.std_err() / f,
            ci95: Interval::new(m.mean_ci(Z95).lo / f, m.mean_ci(Z95).hi / f),
        }
    });
    Ok(AktSummary {
        n,
        trials,
        seed,
        transport: MeanEstimate::from_moments(&m),
        scaled,
        values,
    })
}

/// Smoothing and grid parameters of the random potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialParams {
    pub spacing: f64,
    pub r_smooth: f64,
    pub clip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCell {
    pub region: usize,
    pub c: f64,
    pub holds: u64,
    pub fails: u64,
    pub skipped: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSummary {
    pub halfwidth: f64,
    pub seed: u64,
    pub potential: PotentialParams,
    pub regions: Vec<Region>,
    #[serde(flatten)]
    pub account: TrialAccount,
    /// Mean of `||u_smoothed||_∞` over the window.
    pub sup_norm: MeanEstimate,
    pub cells: Vec<LemmaCell>,
    /// Smallest grid constant with no failure and at least one evaluated
    /// case.
    pub minimal_grid_c: Option<f64>,
    /// Smallest `c` for which both inequalities hold for every trial and
    /// region: the maximum of `t_required / ||u||_∞^{1/2}`.
    pub minimal_c: f64,
}

/// Sup norm of the smoothed potential, per-region outcomes on `c_list`, and
/// per-region required constants.
pub type LemmaTrial = (f64, Vec<Vec<LemmaOutcome>>, Vec<f64>);

/// One trial of the transport lemma check.
pub fn transport_lemma_check(
    sample: &GafSample,
    grid: &PotentialGrid,
    regions: &[Region],
    c_list: &[f64],
    opts: &RootOptions,
) -> Result<LemmaTrial, Discard> {
    let z = crate::harness::certified_zeros(sample, &grid.window, opts)?;
    let sup = grid.sup_norm();
    let outcomes = regions
        .iter()
        .map(|e| {
            c_list
                .iter()
                .map(|&c| lemma_outcome(e, &z.zeros, sup, c, &grid.window))
                .collect()
        })
        .collect();
    let required = regions
        .iter()
        .map(|e| required_enlargement(e, &z.zeros) / sup.sqrt())
        .collect();
    Ok((sup, outcomes, required))
}

/// Runs [`transport_lemma_check`] over `trials` flat `L = 1` samples on the
/// window `[-s, s]^2`.
pub fn lemma_experiment(
    s: f64,
    potential: PotentialParams,
    regions: &[Region],
    c_list: &[f64],
    trials: u64,
    seed: u64,
    opts: &RootOptions,
) -> Result<LemmaSummary, ExperimentError> {
    if s.is_nan() || s <= 0.0 {
        return Err(invalid("halfwidth", "must be positive"));
    }
    if regions.is_empty() {
        return Err(invalid("regions", "at least one region is needed"));
    }
    if c_list.is_empty() || c_list.iter().any(|c| c.is_nan() || *c < 0.0) {
        return Err(invalid("c_list", "need nonnegative constants"));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    let model = ModelSpec::flat(1.0).expect("unit flat model");
    let window = Region::square(s).map_err(|e| invalid("halfwidth", e.to_string()))?;
    // The mollifier reads the potential up to r_smooth outside the window.
    let reach = Region::square(s + potential.r_smooth + potential.spacing)
        .map_err(|e| invalid("r_smooth", e.to_string()))?;
    let truncation: Truncation = truncation_for(&model, &reach)?;
    let outcomes = run_trials(trials, |t| {
        let sample = GafSample::draw(&model, &truncation, seed, t);
        let grid = PotentialGrid::compute(
            &sample,
            &window,
            potential.spacing,
            potential.r_smooth,
            potential.clip,
        )
        .map_err(|_| Discard::Failed)?;
        transport_lemma_check(&sample, &grid, regions, c_list, opts)
    });
    let account = TrialAccount::new(&outcomes);
    let kept: Vec<_> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mut cells = Vec::new();
    for (ri, _) in regions.iter().enumerate() {
        for (ci, &c) in c_list.iter().enumerate() {
            let mut cell = LemmaCell {
                region: ri,
                c,
                holds: 0,
                fails: 0,
                skipped: 0,
            };
            for (_, out, _) in &kept {
                match out[ri][ci] {
                    LemmaOutcome::Holds => cell.holds += 1,
                    LemmaOutcome::Fails => cell.fails += 1,
                    LemmaOutcome::Skipped => cell.skipped += 1,
                }
            }
            cells.push(cell);
        }
    }
    let minimal_grid_c = c_list
        .iter()
        .enumerate()
        .filter(|(ci, _)| {
            let col = cells.iter().filter(|cell| cell.c == c_list[*ci]);
            let (mut fails, mut holds) = (0, 0);
            for cell in col {
                fails += cell.fails;
                holds += cell.holds;
            }
            fails == 0 && holds > 0
        })
        .map(|(_, &c)| c)
        .fold(None, |acc: Option<f64>, c| {
            Some(acc.map_or(c, |a| a.min(c)))
        });
    let minimal_c = kept
        .iter()
        .flat_map(|(_, _, req)| req.iter().copied())
        .fold(0.0, f64::max);
    let sup = Moments::from_slice(&kept.iter().map(|k| k.0).collect::<Vec<_>>());
    Ok(LemmaSummary {
        halfwidth: s,
        seed,
        potential,
        regions: regions.to_vec(),
        account,
        sup_norm: MeanEstimate::from_moments(&sup),
        cells,
        minimal_grid_c,
        minimal_c,
    })
}

/// Seeds for repeated independent runs of an experiment.
pub fn replicate_seeds(seed: u64, count: u64) -> Vec<u64> {
    (0..count).map(|i| derive_seed(seed, 100 + i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_lattice_is_symmetric_and_has_density_one_over_pi() {
        let pts = lattice_in_window(12.0);
        assert_eq!(pts.len() % 2, 1);
        let expected = 24.0 * 24.0 / PI;
        assert!((pts.len() as f64 - expected).abs() < 4.0 * 24.0 / PI.sqrt());
        assert!(pts.iter().all(|z| z.re.abs() <= 12.0 && z.im.abs() <= 12.0));
    }

    #[test]
    fn akt_single_point_distance_to_corner() {
        // E|U| for U uniform on the unit square is
        // (√2 + ln(1 + √2)) / 3 ≈ 0.7652.
        let s = akt_baseline(1, 20_000, 5).unwrap();
        let exact = (2f64.sqrt() + (1.0 + 2f64.sqrt()).ln()) / 3.0;
        let quad = gafzero_core::quad::integrate(
            |x| gafzero_core::quad::integrate(|y| x.hypot(y), 0.0, 1.0, 1e-14, 1e-13, 200).value,
            0.0,
            1.0,
            1e-13,
            1e-12,
            200,
        )
        .value;
        assert!((exact - quad).abs() < 1e-10);
        assert!((exact - 0.7652).abs() < 5e-5);
        assert!((s.transport.mean - exact).abs() < 4.0 * s.transport.std_err);
        assert!(s.scaled.is_none());
    }

    #[test]
    fn akt_is_invariant_under_relabeling() {
        let n = 5;
        let grid: Vec<C64> = (0..n * n)
            .map(|k| C64::new((k % n) as f64, (k / n) as f64))
            .collect();
        let mut rng = CounterRng::new(2, Purpose::Uniform, 0);
        let pts: Vec<C64> = (0..n * n)
            .map(|_| C64::new(5.0 * rng.uniform(), 5.0 * rng.uniform()))
            .collect();
        let mut rev = pts.clone();
        rev.reverse();
        let a = match_points(&grid, &pts, MatchMode::MinCostSum, 100).unwrap();
        let b = match_points(&grid, &rev, MatchMode::MinCostSum, 100).unwrap();
        assert!((a.total_cost - b.total_cost).abs() < 1e-12);
    }

    #[test]
    fn tail_is_nonincreasing() {
        let s = lattice_match_experiment(4.0, 6, 3, MatchMode::MinCostSum, &RootOptions::default())
            .unwrap();
        for w in s.tail.windows(2) {
            assert!(w[1].probability <= w[0].probability + 1e-12);
        }
    }
}
