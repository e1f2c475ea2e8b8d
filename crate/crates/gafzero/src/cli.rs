//! Command-line front end: argument parsing, dispatch and artifact output.

use crate::config::{ConfigError, RunConfig, SEED_ENV};
use crate::harness::with_workers;
use crate::io::{num, opt, write_run, Summary, Table};
use crate::stats::{self, Comparison, CountSummary, ExperimentError, TrialAccount};
use crate::transport::{self, PotentialParams};
use clap::{Args, Parser, Subcommand};
use gafzero_core::estimate::{Interval, Moments};
use gafzero_core::matching::MatchMode;
use gafzero_core::oracle::{
    count_law_hyperbolic, ek_intensity, hole_prob_hyperbolic, offord_bound, pv_correlation,
};
use gafzero_core::testfn::TestFunction;
use gafzero_core::{GafSample, Region, C64};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "gafzero",
    version,
    about = "Monte Carlo experiments on zero sets of Gaussian analytic functions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw coefficient vectors.
    Sample(RunArgs),
    /// Extract certified zero sets.
    Zeros(RunArgs),
    /// Count statistics in a region, with the exact law when one exists.
    Counts(RunArgs),
    /// Smooth linear statistics, variance scaling and the lattice baseline.
    Linstat(RunArgs),
    /// Hole probabilities at nested radii.
    Hole(RunArgs),
    /// Large deviations of the count.
    Largedev(RunArgs),
    /// Binned pair correlation.
    Paircorr(RunArgs),
    /// Exceedance frequencies against the Offord bound.
    Offord(RunArgs),
    /// Counts on a region and on its isometric image.
    Invariance(RunArgs),
    /// Counts of f and of a unitarily rotated g with the same covariance.
    Rigidity(RunArgs),
    /// Match flat zeros to the lattice.
    Match(RunArgs),
    /// Uniform points matched to the integer grid.
    Akt(RunArgs),
    /// Numerical check of the transport lemma.
    Lemma(RunArgs),
    /// Print closed-form values.
    Oracle(RunArgs),
}

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs) {
        match self {
            Command::Sample(a) => ("sample", a),
            Command::Zeros(a) => ("zeros", a),
            Command::Counts(a) => ("counts", a),
            Command::Linstat(a) => ("linstat", a),
            Command::Hole(a) => ("hole", a),
            Command::Largedev(a) => ("largedev", a),
            Command::Paircorr(a) => ("paircorr", a),
            Command::Offord(a) => ("offord", a),
            Command::Invariance(a) => ("invariance", a),
            Command::Rigidity(a) => ("rigidity", a),
            Command::Match(a) => ("match", a),
            Command::Akt(a) => ("akt", a),
            Command::Lemma(a) => ("lemma", a),
            Command::Oracle(a) => ("oracle", a),
        }
    }
}

fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let z: C64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a complex number (e.g. 0.3-0.2i)"))?;
    Ok([z.re, z.im])
}

fn parse_mode(s: &str) -> Result<MatchMode, String> {
    match s {
        "sum" | "min-cost-sum" => Ok(MatchMode::MinCostSum),
        "bottleneck" | "min-bottleneck" => Ok(MatchMode::MinBottleneck),
        _ => Err(format!("unknown mode `{s}` (sum or bottleneck)")),
    }
}

/// Flags shared by every command; unset flags fall back to `--config`, then
/// to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML or JSON configuration, or a JSON summary to replay.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// elliptic, flat or hyperbolic.
    #[arg(long)]
    pub family: Option<String>,
    /// Intensity parameter (degree for elliptic).
    #[arg(long = "L")]
    pub intensity: Option<f64>,
    /// Master seed [default: $GAFZERO_SEED or 0].
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Disc radius.
    #[arg(long, visible_aliases = ["rho", "r"])]
    pub radius: Option<f64>,
    /// Disc center, e.g. 0.2-0.1i.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub center: Option<[f64; 2]>,
    /// Half-width of a square window.
    #[arg(long, visible_alias = "s")]
    pub halfwidth: Option<f64>,
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    /// Test function exponent.
    #[arg(long)]
    pub p: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Perturbation size of the lattice baseline.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Run the perturbed lattice baseline (linstat).
    #[arg(long)]
    pub baseline: bool,
    /// Truncation order (rigidity) or grid side (akt).
    #[arg(long, visible_alias = "N")]
    pub n: Option<usize>,
    /// Matching mode: sum or bottleneck.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<MatchMode>,
    /// Isometry rotation angle.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Isometry point: flat shift, hyperbolic point sent to 0, elliptic a.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub a: Option<[f64; 2]>,
    /// Elliptic isometry b.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub b: Option<[f64; 2]>,
    /// Use the same seed on both sides of a comparison.
    #[arg(long)]
    pub shared_seed: bool,
    /// Use the identity unitary (rigidity).
    #[arg(long)]
    pub identity: bool,
    #[arg(long)]
    pub spacing: Option<f64>,
    #[arg(long)]
    pub r_smooth: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    /// Radii of the test discs (lemma).
    #[arg(long, value_delimiter = ',')]
    pub regions: Option<Vec<f64>>,
    /// Candidate constants (lemma).
    #[arg(long, value_delimiter = ',')]
    pub c_list: Option<Vec<f64>>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    /// Points for the correlation function (oracle); a comma list such as
    /// `--pv=-0.3+0.2i,0.5` also accepts a leading minus sign.
    #[arg(long, num_args = 1.., value_delimiter = ',', value_parser = parse_complex, allow_negative_numbers = true)]
    pub pv: Option<Vec<[f64; 2]>>,
    /// Point for the first intensity (oracle).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub ek: Option<[f64; 2]>,
    /// Radius for the exact count law (oracle).
    #[arg(long)]
    pub count_law: Option<f64>,
    /// Radius for the exact hole probability (oracle).
    #[arg(long)]
    pub hole: Option<f64>,
    /// λ for the Offord bound with the exponent-p test function (oracle).
    #[arg(long)]
    pub offord: Option<f64>,
}

impl RunArgs {
    /// Config file (if any), then flags, then the seed environment default.
    pub fn to_config(&self, command: &str) -> Result<RunConfig, ConfigError> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if self.config.is_some() && !c.command.is_empty() && c.command != command {
            return Err(ConfigError::new(
                "command",
                format!("config is for `{}`, not `{command}`", c.command),
            ));
        }
        let seed_in_file = self.config.is_some() && c.seed != RunConfig::default().seed;
        c.command = command.to_string();
        if let Some(f) = &self.family {
            c.family = f
                .parse()
                .map_err(|_| ConfigError::new("family", format!("unknown family `{f}`")))?;
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { c.$field = v.clone(); } )* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $( if self.$field.is_some() { c.$field = self.$field.clone(); } )* };
        }
        set!(intensity, trials, out, center, p, bins, sigma, mode, theta);
        set_opt!(
            workers, radius, halfwidth, radii, lambdas, deltas, n, a, b, regions, c_list, pv, ek,
            count_law, hole, offord
        );
        c.shared_seed |= self.shared_seed;
        c.identity |= self.identity;
        c.baseline |= self.baseline;
        if let Some(x) = self.spacing {
            c.potential.spacing = x;
        }
        if let Some(x) = self.r_smooth {
            c.potential.r_smooth = x;
        }
        if let Some(x) = self.clip {
            c.potential.clip = x;
        }
        if let Some(x) = self.residual_tol {
            c.tolerances.residual_tol = x;
        }
        match self.seed {
            Some(s) => c.seed = s,
            None if !seed_in_file => {
                if let Ok(v) = std::env::var(SEED_ENV) {
                    c.seed = v.trim().parse().map_err(|_| {
                        ConfigError::new("seed", format!("{SEED_ENV}=`{v}` is not an integer"))
                    })?;
                }
            }
            None => {}
        }
        c.resolve()
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid { field, message } => {
                CliError::Config(ConfigError::new(field, message))
            }
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

/// Estimates, tables and console lines of one run.
pub struct Outcome {
    pub account: Option<TrialAccount>,
    pub estimates: Value,
    pub tables: Vec<(String, Table)>,
    pub lines: Vec<String>,
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("summaries serialize")
}

fn ci(i: &Interval) -> [String; 2] {
    [num(i.lo), num(i.hi)]
}

fn pmf_table(s: &CountSummary) -> Table {
    let mut t = Table::new(&["count", "frequency", "pmf", "oracle_pmf"]);
    let len = s
        .pmf
        .len()
        .max(s.oracle_pmf.as_ref().map_or(0, |p| p.len()));
    for k in 0..len {
        t.push(vec![
            k.to_string(),
            s.histogram.get(k).copied().unwrap_or(0).to_string(),
            num(s.pmf.get(k).copied().unwrap_or(0.0)),
            opt(s
                .oracle_pmf
                .as_ref()
                .map(|p| p.get(k).copied().unwrap_or(0.0))),
        ]);
    }
    t
}

fn comparison_outcome(c: Comparison) -> Outcome {
    let mut t = Table::new(&["count", "first_pmf", "second_pmf"]);
    for k in 0..c.first.pmf.len().max(c.second.pmf.len()) {
        t.push(vec![
            k.to_string(),
            num(c.first.pmf.get(k).copied().unwrap_or(0.0)),
            num(c.second.pmf.get(k).copied().unwrap_or(0.0)),
        ]);
    }
    let mut account = c.first.account;
    account.trials += c.second.account.trials;
    account.discards.dilated += c.second.account.discards.dilated;
    account.discards.uncertified += c.second.account.discards.uncertified;
    account.discards.failed += c.second.account.discards.failed;
    account.discard_rate = account.discards.total() as f64 / account.trials as f64;
    account.valid = c.first.account.valid && c.second.account.valid;
    Outcome {
        lines: vec![
            format!(
                "mean difference = {} (joint SE {})",
                c.mean_difference, c.joint_se
            ),
            format!(
                "KS = {} (1% critical {})",
                c.ks_distance, c.ks_critical_1pct
            ),
            format!("pmf TV = {}", c.pmf_tv),
        ],
        account: Some(account),
        estimates: to_value(&c),
        tables: vec![(String::new(), t)],
    }
}

/// Runs a resolved configuration.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let opts = cfg.tolerances;
    let (seed, trials) = (cfg.seed, cfg.trials);
    let radius = cfg.radius.unwrap_or(1.0);
    let out = match cfg.command.as_str() {
        "sample" => {
            let region = cfg.region()?;
            let trunc = stats::truncation_for(&model, &region)?;
            let mut t = Table::new(&["trial", "k", "re", "im"]);
            let mut norms = Moments::new();
            for trial in 0..trials {
                let s = GafSample::draw(&model, &trunc, seed, trial);
                for (k, c) in s.coeffs().iter().enumerate() {
                    norms.push(c.norm_sqr());
                    t.push(vec![trial.to_string(), k.to_string(), num(c.re), num(c.im)]);
                }
            }
            Outcome {
                lines: vec![format!(
                    "truncation n = {}, certified radius {}",
                    trunc.n, trunc.radius
                )],
                account: None,
                estimates: json!({
                    "truncation": trunc,
                    "mean_abs_sq": stats::MeanEstimate::from_moments(&norms),
                }),
                tables: vec![(String::new(), t)],
            }
        }
        "zeros" => {
            let region = cfg.region()?;
            let s = stats::zero_extraction(&model, &region, trials, seed, &opts)?;
            let mut t = Table::new(&["trial", "index", "re", "im", "residual"]);
            for (trial, z) in &s.zero_sets {
                for (i, (w, r)) in z.zeros.iter().zip(&z.residuals).enumerate() {
                    t.push(vec![
                        trial.to_string(),
                        i.to_string(),
                        num(w.re),
                        num(w.im),
                        num(*r),
                    ]);
                }
            }
            let account = TrialAccount {
                trials,
                discards: crate::harness::DiscardTally {
                    dilated: s.discards,
                    ..Default::default()
                },
                discard_rate: s.discard_rate,
                valid: s.discard_rate < crate::harness::MAX_DISCARD_RATE,
            };
            Outcome {
                lines: vec![
                    format!(
                        "certified {}/{} kept trials",
                        s.certified,
                        trials - s.discards
                    ),
                    format!(
                        "discard rate {}, max residual {:e}",
                        s.discard_rate, s.max_residual
                    ),
                ],
                account: Some(account),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "counts" => {
            let region = cfg.region()?;
            let s = stats::estimate_counts(&model, &region, trials, seed, &opts)?;
            let mut lines = vec![format!(
                "mean {} ± {} (expected {})",
                s.mean.mean, s.mean.std_err, s.expected_mean
            )];
            if let Some(tv) = s.oracle_tv {
                lines.push(format!("TV to exact law {tv}"));
            }
            Outcome {
                lines,
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![(String::new(), pmf_table(&s))],
            }
        }
        "linstat" => {
            let h = TestFunction::new(cfg.p).map_err(|e| ConfigError::new("p", e.to_string()))?;
            if cfg.baseline {
                let b = stats::perturbed_lattice_baseline(cfg.sigma, &h, radius, trials, seed)?;
                let mut t = Table::new(&["trial", "value"]);
                for (i, v) in b.linear.values.iter().enumerate() {
                    t.push(vec![i.to_string(), num(*v)]);
                }
                Outcome {
                    lines: vec![format!("Var S = {}", b.linear.variance)],
                    account: Some(b.linear.account),
                    estimates: to_value(&b),
                    tables: vec![("values".into(), t)],
                }
            } else if let Some(radii) = &cfg.radii {
                let rows = stats::variance_scaling(&model, &h, radii, trials, seed, &opts)?;
                let mut t = Table::new(&[
                    "r",
                    "var_r2",
                    "var_r2_lo",
                    "var_r2_hi",
                    "kappa",
                    "kappa_lo",
                    "kappa_hi",
                    "ks",
                ]);
                for r in &rows {
                    let [a, b] = ci(&r.var_r2_ci95);
                    let [c, d] = ci(&r.kappa_ci95);
                    t.push(vec![
                        num(r.r),
                        num(r.var_r2),
                        a,
                        b,
                        num(r.kappa),
                        c,
                        d,
                        opt(r.ks_normal),
                    ]);
                }
                let valid = rows.iter().all(|r| r.valid);
                Outcome {
                    lines: rows
                        .iter()
                        .map(|r| format!("r = {}: kappa {}", r.r, r.kappa))
                        .collect(),
                    account: Some(TrialAccount {
                        trials: trials * rows.len() as u64,
                        discards: Default::default(),
                        discard_rate: 0.0,
                        valid,
                    }),
                    estimates: json!({ "rows": rows }),
                    tables: vec![(String::new(), t)],
                }
            } else {
                let s = stats::linear_stat_experiment(&model, &h, radius, trials, seed, &opts)?;
                let mut t = Table::new(&["trial", "value", "normalized"]);
                for (i, v) in s.values.iter().enumerate() {
                    t.push(vec![
                        i.to_string(),
                        num(*v),
                        opt(s.normalized.get(i).copied()),
                    ]);
                }
                Outcome {
                    lines: vec![format!(
                        "Var·r²/‖Δh‖² = {}, KS = {}",
                        s.scaled_variance,
                        opt(s.ks_normal)
                    )],
                    account: Some(s.account),
                    estimates: to_value(&s),
                    tables: vec![("values".into(), t)],
                }
            }
        }
        "hole" => {
            let radii = cfg.radii.clone().unwrap_or_default();
            let s = stats::hole_estimate(&model, &radii, trials, seed, &opts)?;
            let mut t = Table::new(&[
                "radius",
                "holes",
                "trials",
                "frequency",
                "lo",
                "hi",
                "upper_bound",
                "exact",
                "log_rate_r4",
                "boundary_rate",
                "exact_boundary_rate",
            ]);
            for r in &s.rows {
                let [lo, hi] = ci(&r.frequency.wilson95);
                t.push(vec![
                    num(r.radius),
                    r.frequency.events.to_string(),
                    r.frequency.trials.to_string(),
                    num(r.frequency.frequency),
                    lo,
                    hi,
                    opt(r.frequency.upper_bound),
                    opt(r.exact),
                    opt(r.log_rate_r4),
                    opt(r.boundary_rate),
                    opt(r.exact_boundary_rate),
                ]);
            }
            Outcome {
                lines: s
                    .rows
                    .iter()
                    .map(|r| format!("r = {}: {}", r.radius, r.frequency.frequency))
                    .collect(),
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "largedev" => {
            let deltas = cfg.deltas.clone().unwrap_or_default();
            let s = stats::large_dev_estimate(&model, radius, &deltas, trials, seed, &opts)?;
            let mut t = Table::new(&[
                "delta",
                "events",
                "trials",
                "frequency",
                "lo",
                "hi",
                "upper_bound",
            ]);
            for r in &s.rows {
                let [lo, hi] = ci(&r.frequency.wilson95);
                t.push(vec![
                    num(r.delta),
                    r.frequency.events.to_string(),
                    r.frequency.trials.to_string(),
                    num(r.frequency.frequency),
                    lo,
                    hi,
                    opt(r.frequency.upper_bound),
                ]);
            }
            Outcome {
                lines: vec![format!("expected count {}", s.expected_count)],
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "paircorr" => {
            let region = cfg.region()?;
            let s =
                stats::pair_correlation_estimate(&model, &region, cfg.bins, trials, seed, &opts)?;
            let mut t = Table::new(&[
                "lo",
                "hi",
                "pairs",
                "estimate",
                "std_err",
                "oracle",
                "underfilled",
            ]);
            for b in &s.bins {
                t.push(vec![
                    num(b.lo),
                    num(b.hi),
                    b.pairs.to_string(),
                    num(b.estimate),
                    num(b.std_err),
                    opt(b.oracle),
                    b.underfilled.to_string(),
                ]);
            }
            Outcome {
                lines: vec![format!("{} bins ({})", s.bins.len(), s.separation)],
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "offord" => {
            let h = TestFunction::new(cfg.p).map_err(|e| ConfigError::new("p", e.to_string()))?;
            let lambdas = cfg.lambdas.clone().unwrap_or_default();
            let s = stats::offord_check(&model, &h, radius, &lambdas, trials, seed, &opts)?;
            let mut t = Table::new(&[
                "lambda",
                "events",
                "trials",
                "frequency",
                "wilson_se",
                "bound",
                "violation",
            ]);
            for r in &s.rows {
                t.push(vec![
                    num(r.lambda),
                    r.frequency.events.to_string(),
                    r.frequency.trials.to_string(),
                    num(r.frequency.frequency),
                    num(r.wilson_se),
                    num(r.bound),
                    r.violation.to_string(),
                ]);
            }
            Outcome {
                lines: vec![format!("violation: {}", s.any_violation)],
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "invariance" => {
            let region = cfg.region()?;
            let iso = cfg.isometry()?;
            comparison_outcome(stats::invariance_test(
                &model,
                &iso,
                &region,
                trials,
                seed,
                cfg.shared_seed,
                &opts,
            )?)
        }
        "rigidity" => comparison_outcome(stats::rigidity_test(
            &model,
            cfg.n.unwrap_or(40),
            radius,
            trials,
            seed,
            cfg.identity,
            &opts,
        )?),
        "match" => {
            let s = transport::lattice_match_experiment(
                cfg.halfwidth.unwrap_or(8.0),
                trials,
                seed,
                cfg.mode,
                &opts,
            )?;
            let mut tail = Table::new(&["lambda", "probability", "std_err"]);
            for p in &s.tail {
                tail.push(vec![num(p.lambda), num(p.probability), num(p.std_err)]);
            }
            let mut disp = Table::new(&["disp_re", "disp_im", "abs"]);
            for d in &s.displacements {
                disp.push(vec![num(d.re), num(d.im), num(d.norm())]);
            }
            Outcome {
                lines: s
                    .moments
                    .iter()
                    .map(|m| format!("E exp({}|ξ|²) = {} ± {}", m.epsilon, m.moment, m.std_err))
                    .collect(),
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![("tail".into(), tail), ("displacements".into(), disp)],
            }
        }
        "akt" => {
            let n = cfg.n.unwrap_or(16);
            let s = transport::akt_baseline(n, trials, seed)?;
            let mut t = Table::new(&["trial", "transport"]);
            for (i, v) in s.values.iter().enumerate() {
                t.push(vec![i.to_string(), num(*v)]);
            }
            Outcome {
                lines: vec![format!(
                    "T = {} ± {}, T/√log N = {}",
                    s.transport.mean,
                    s.transport.std_err,
                    opt(s.scaled.map(|x| x.mean))
                )],
                account: Some(TrialAccount {
                    trials,
                    discards: Default::default(),
                    discard_rate: 0.0,
                    valid: true,
                }),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "lemma" => {
            let regions: Vec<Region> = cfg
                .regions
                .clone()
                .unwrap_or_default()
                .iter()
                .map(|&r| {
                    Region::centered_disc(r).map_err(|e| ConfigError::new("regions", e.to_string()))
                })
                .collect::<Result<_, _>>()?;
            let pot = PotentialParams {
                spacing: cfg.potential.spacing,
                r_smooth: cfg.potential.r_smooth,
                clip: cfg.potential.clip,
            };
            let c_list = cfg.c_list.clone().unwrap_or_default();
            let s = transport::lemma_experiment(
                cfg.halfwidth.unwrap_or(8.0),
                pot,
                &regions,
                &c_list,
                trials,
                seed,
                &opts,
            )?;
            let mut t = Table::new(&["region", "c", "holds", "fails", "skipped"]);
            for c in &s.cells {
                t.push(vec![
                    c.region.to_string(),
                    num(c.c),
                    c.holds.to_string(),
                    c.fails.to_string(),
                    c.skipped.to_string(),
                ]);
            }
            Outcome {
                lines: vec![format!(
                    "minimal c = {} (grid: {})",
                    s.minimal_c,
                    opt(s.minimal_grid_c)
                )],
                account: Some(s.account),
                estimates: to_value(&s),
                tables: vec![(String::new(), t)],
            }
        }
        "oracle" => oracle_outcome(cfg)?,
        other => {
            return Err(ConfigError::new("command", format!("unknown command `{other}`")).into())
        }
    };
    Ok(out)
}

fn oracle_outcome(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = cfg.model()?;
    let mut t = Table::new(&["quantity", "argument", "value"]);
    let mut est = serde_json::Map::new();
    let mut lines = Vec::new();
    let mut emit = |name: &str, arg: String, v: f64| {
        lines.push(format!("{name}({arg}) = {v}"));
        t.push(vec![name.to_string(), arg.clone(), num(v)]);
        est.insert(name.to_string(), json!({ "argument": arg, "value": v }));
    };
    let runtime = |e: &dyn std::fmt::Display| CliError::Runtime(e.to_string());
    let fmt_z = |p: &[f64; 2]| format!("{}", C64::new(p[0], p[1]));
    if let Some(pts) = &cfg.pv {
        let z: Vec<C64> = pts.iter().map(|p| C64::new(p[0], p[1])).collect();
        let v = pv_correlation(&z).map_err(|e| runtime(&e))?;
        emit(
            "pv_correlation",
            pts.iter().map(fmt_z).collect::<Vec<_>>().join(" "),
            v,
        );
    }
    if let Some(p) = &cfg.ek {
        let v = ek_intensity(&model, C64::new(p[0], p[1])).map_err(|e| runtime(&e))?;
        emit("ek_intensity", fmt_z(p), v);
    }
    if let Some(rho) = cfg.count_law {
        let law = count_law_hyperbolic(rho, stats::ORACLE_TOL).map_err(|e| runtime(&e))?;
        emit("count_law_mean", num(rho), law.mean);
        emit("count_law_variance", num(rho), law.variance);
        for (k, p) in law
            .pmf
            .iter()
            .enumerate()
            .take_while(|(k, p)| *k < 4 || **p > 1e-12)
        {
            emit(&format!("count_law_p{k}"), num(rho), *p);
        }
    }
    if let Some(rho) = cfg.hole {
        let v = hole_prob_hyperbolic(rho, stats::ORACLE_TOL).map_err(|e| runtime(&e))?;
        emit("hole_probability", num(rho), v);
    }
    if let Some(lambda) = cfg.offord {
        let h = TestFunction::new(cfg.p).map_err(|e| ConfigError::new("p", e.to_string()))?;
        emit(
            "offord_bound",
            num(lambda),
            offord_bound(lambda, h.laplacian_l1()),
        );
    }
    if t.rows.is_empty() {
        return Err(ConfigError::new(
            "oracle",
            "give at least one of --pv, --ek, --count-law, --hole, --offord",
        )
        .into());
    }
    Ok(Outcome {
        account: None,
        estimates: Value::Object(est),
        tables: vec![(String::new(), t)],
        lines,
    })
}

/// Resolves, executes and writes one command; returns the written summary.
pub fn run_config(cfg: &RunConfig) -> Result<Summary, CliError> {
    let start = Instant::now();
    let outcome = with_workers(cfg.workers, || execute(cfg))?;
    for l in &outcome.lines {
        println!("{l}");
    }
    let mut summary = Summary::new(cfg, outcome.account, outcome.estimates);
    summary.wall_time_s = start.elapsed().as_secs_f64();
    write_run(&cfg.out, &mut summary, &outcome.tables)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", cfg.out.display())))?;
    Ok(summary)
}

/// Entry point: parses `argv` (program name first; an optional leading
/// `run` token is accepted) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if args.get(1).is_some_and(|a| a == "run") {
        args.remove(1);
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (name, run_args) = cli.command.parts();
    let result = run_args
        .to_config(name)
        .map_err(CliError::from)
        .and_then(|cfg| run_config(&cfg));
    match result {
        Ok(s) => {
            eprintln!(
                "wrote {} artifacts to {}",
                s.artifacts.len() + 1,
                s.config.out.display()
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
