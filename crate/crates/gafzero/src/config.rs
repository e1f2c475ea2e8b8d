//! Run configuration: one serializable record per command invocation.

use gafzero_core::matching::MatchMode;
use gafzero_core::{Family, IsometrySpec, ModelSpec, Region, RootOptions, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable holding the default seed.
pub const SEED_ENV: &str = "GAFZERO_SEED";

pub const COMMANDS: [&str; 14] = [
    "sample",
    "zeros",
    "counts",
    "linstat",
    "hole",
    "largedev",
    "paircorr",
    "offord",
    "invariance",
    "rigidity",
    "match",
    "akt",
    "lemma",
    "oracle",
];

/// A configuration problem; `field` names the offending parameter.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Smoothing parameters of the random potential in `lemma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub spacing: f64,
    pub r_smooth: f64,
    pub clip: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            spacing: 0.1,
            r_smooth: gafzero_core::potential::DEFAULT_SMOOTHING,
            clip: gafzero_core::potential::DEFAULT_CLIP,
        }
    }
}

/// Everything that determines the output of a run. Optional fields are
/// filled with per-command defaults by [`RunConfig::resolve`]; summaries
/// embed the resolved form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub family: Family,
    #[serde(rename = "L")]
    pub intensity: f64,
    pub seed: u64,
    pub trials: u64,
    pub out: PathBuf,
    /// Thread count; results do not depend on it.
    pub workers: Option<usize>,
    /// Disc radius (ρ for the hyperbolic model).
    pub radius: Option<f64>,
    pub center: [f64; 2],
    /// Half-width of a square window; replaces the disc when set.
    pub halfwidth: Option<f64>,
    pub radii: Option<Vec<f64>>,
    pub p: u32,
    pub lambdas: Option<Vec<f64>>,
    pub deltas: Option<Vec<f64>>,
    pub bins: usize,
    pub sigma: f64,
    /// Truncation order (`rigidity`) or grid side (`akt`).
    pub n: Option<usize>,
    pub mode: MatchMode,
    /// Isometry: rotation angle and point (`flat`: shift, `hyperbolic`:
    /// the point sent to 0, `elliptic`: `a`), plus `b` for `elliptic`.
    pub theta: f64,
    pub a: Option<[f64; 2]>,
    pub b: Option<[f64; 2]>,
    pub shared_seed: bool,
    pub identity: bool,
    pub tolerances: RootOptions,
    pub potential: PotentialConfig,
    /// Radii of the centred test discs `E` in `lemma`.
    pub regions: Option<Vec<f64>>,
    pub c_list: Option<Vec<f64>>,
    /// `baseline` runs the perturbed lattice instead of zeros in `linstat`.
    pub baseline: bool,
    // oracle inputs
    pub pv: Option<Vec<[f64; 2]>>,
    pub ek: Option<[f64; 2]>,
    pub count_law: Option<f64>,
    pub hole: Option<f64>,
    pub offord: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            family: Family::Flat,
            intensity: 1.0,
            seed: 0,
            trials: 1000,
            out: PathBuf::from("gafzero-out"),
            workers: None,
            radius: None,
            center: [0.0, 0.0],
            halfwidth: None,
            radii: None,
            p: 3,
            lambdas: None,
            deltas: None,
            bins: 20,
            sigma: 1.0,
            n: None,
            mode: MatchMode::MinCostSum,
            theta: 0.0,
            a: None,
            b: None,
            shared_seed: false,
            identity: false,
            tolerances: RootOptions::default(),
            potential: PotentialConfig::default(),
            regions: None,
            c_list: None,
            baseline: false,
            pv: None,
            ek: None,
            count_law: None,
            hole: None,
            offord: None,
        }
    }
}

fn c64(p: [f64; 2]) -> C64 {
    C64::new(p[0], p[1])
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must be positive, got {x}"),
        ))
    }
}

fn positive_list(field: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::new(field, "must not be empty"));
    }
    xs.iter().try_for_each(|&x| positive(field, x))
}

fn nonnegative_list(field: &str, xs: &[f64]) -> Result<(), ConfigError> {
    if xs.is_empty() {
        return Err(ConfigError::new(field, "must not be empty"));
    }
    for &x in xs {
        if !(x.is_finite() && x >= 0.0) {
            return Err(ConfigError::new(
                field,
                format!("must be nonnegative, got {x}"),
            ));
        }
    }
    Ok(())
}

impl RunConfig {
    /// Reads a TOML or JSON configuration. A JSON run summary is accepted
    /// too: its embedded `config` is used, which replays that run.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        let is_json =
            path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| ConfigError::new("config", e.to_string()))?;
            if value.get("schema").is_some() {
                if let Some(inner) = value.get_mut("config") {
                    value = inner.take();
                }
            }
            serde_json::from_value(value)
                .map_err(|e| ConfigError::new(field_of(&e.to_string()), e.to_string()))
        } else {
            toml::from_str(&text)
                .map_err(|e| ConfigError::new(field_of(e.message()), e.message().to_string()))
        }
    }

    pub fn model(&self) -> Result<ModelSpec, ConfigError> {
        ModelSpec::new(self.family, self.intensity)
            .map_err(|e| ConfigError::new("L", e.to_string()))
    }

    /// Fills per-command defaults and checks every parameter the command
    /// uses. Nothing is computed before this succeeds.
    pub fn resolve(mut self) -> Result<Self, ConfigError> {
        if !COMMANDS.contains(&self.command.as_str()) {
            return Err(ConfigError::new(
                "command",
                format!("unknown command `{}`", self.command),
            ));
        }
        let model = self.model()?;
        if self.workers == Some(0) {
            return Err(ConfigError::new("workers", "must be positive"));
        }
        let fam = self.family;
        let cmd = self.command.clone();
        if cmd != "oracle" && self.trials == 0 {
            return Err(ConfigError::new("trials", "must be positive"));
        }
        let default_radius = match (cmd.as_str(), fam) {
            ("linstat", _) => 8.0,
            ("largedev", _) | ("rigidity", _) | ("invariance", Family::Flat) => 2.0,
            ("paircorr", Family::Hyperbolic) => 0.8,
            ("invariance", Family::Hyperbolic) => 0.3,
            // Keeps the pole of the default rotation, at -0.75, outside.
            ("invariance", Family::Elliptic) => 0.5,
            (_, Family::Flat) => 3.0,
            (_, Family::Hyperbolic) => 0.7,
            (_, Family::Elliptic) => 1.0,
        };
        let radius = *self.radius.get_or_insert(default_radius);
        if self.halfwidth.is_none() {
            positive("radius", radius)?;
        }
        if let Some(s) = self.halfwidth {
            positive("halfwidth", s)?;
        }
        if fam == Family::Hyperbolic
            && self.halfwidth.is_none()
            && c64(self.center).norm() + radius >= 0.99
        {
            return Err(ConfigError::new(
                "radius",
                "hyperbolic regions must stay within |z| < 0.99",
            ));
        }
        match cmd.as_str() {
            "linstat" | "offord" => {
                if self.p < 3 {
                    return Err(ConfigError::new("p", "the test function needs p >= 3"));
                }
                if cmd == "linstat" {
                    if fam != Family::Flat && !self.baseline {
                        return Err(ConfigError::new("family", "linstat runs on the flat model"));
                    }
                    if let Some(r) = &self.radii {
                        positive_list("radii", r)?;
                    }
                    if self.baseline && !(self.sigma.is_finite() && self.sigma >= 0.0) {
                        return Err(ConfigError::new("sigma", "must be nonnegative"));
                    }
                } else {
                    let l = self
                        .lambdas
                        .get_or_insert_with(|| vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0]);
                    nonnegative_list("lambdas", l)?;
                }
            }
            "hole" => {
                let r = self.radii.get_or_insert_with(|| match fam {
                    Family::Flat => vec![0.8, 1.0, 1.2, 1.4],
                    Family::Hyperbolic => vec![0.3, 0.5, 0.7],
                    Family::Elliptic => vec![0.3, 0.5, 1.0],
                });
                positive_list("radii", r)?;
                if fam == Family::Hyperbolic && r.iter().any(|&x| x >= 0.99) {
                    return Err(ConfigError::new(
                        "radii",
                        "hyperbolic radii must be below 0.99",
                    ));
                }
            }
            "largedev" => {
                if fam != Family::Flat {
                    return Err(ConfigError::new(
                        "family",
                        "largedev runs on the flat model",
                    ));
                }
                let d = self
                    .deltas
                    .get_or_insert_with(|| vec![0.0, 0.1, 0.25, 0.5, 0.75]);
                nonnegative_list("deltas", d)?;
            }
            "paircorr" => {
                if self.bins == 0 {
                    return Err(ConfigError::new("bins", "must be positive"));
                }
            }
            "invariance" => {
                self.isometry()?;
            }
            "rigidity" => {
                if fam != Family::Flat {
                    return Err(ConfigError::new(
                        "family",
                        "rigidity runs on the flat model",
                    ));
                }
                if *self.n.get_or_insert(40) == 0 {
                    return Err(ConfigError::new("n", "must be positive"));
                }
            }
            "match" | "lemma" => {
                if fam != Family::Flat || self.intensity != 1.0 {
                    return Err(ConfigError::new(
                        "family",
                        "matching uses the flat model with L = 1",
                    ));
                }
                positive("halfwidth", *self.halfwidth.get_or_insert(8.0))?;
                if cmd == "lemma" {
                    positive("potential.spacing", self.potential.spacing)?;
                    positive("potential.r_smooth", self.potential.r_smooth)?;
                    positive("potential.clip", self.potential.clip)?;
                    let e = self.regions.get_or_insert_with(|| vec![1.0, 2.0, 3.0]);
                    positive_list("regions", e)?;
                    let c = self
                        .c_list
                        .get_or_insert_with(|| vec![0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0]);
                    nonnegative_list("c_list", c)?;
                }
            }
            "akt" => {
                let n = *self.n.get_or_insert(16);
                if n == 0 || n * n > gafzero_core::matching::DEFAULT_MATCH_CAP {
                    return Err(ConfigError::new("n", "grid side must be in 1..=64"));
                }
            }
            "oracle" => {
                if let Some(rho) = self.count_law.or(self.hole) {
                    if !(0.0..1.0).contains(&rho) {
                        return Err(ConfigError::new("rho", "must be in [0, 1)"));
                    }
                }
                if let Some(pts) = &self.pv {
                    if pts.is_empty() || pts.iter().any(|p| c64(*p).norm() >= 1.0) {
                        return Err(ConfigError::new("pv", "points must lie in the unit disc"));
                    }
                }
                if let Some(z) = self.ek {
                    if !model.in_domain(c64(z)) {
                        return Err(ConfigError::new("ek", "point outside the model domain"));
                    }
                }
                if self.p < 3 {
                    return Err(ConfigError::new("p", "the test function needs p >= 3"));
                }
            }
            _ => {}
        }
        let t = &self.tolerances;
        positive("tolerances.residual_tol", t.residual_tol)?;
        positive("tolerances.merge_tol", t.merge_tol)?;
        positive("tolerances.boundary_tol", t.boundary_tol)?;
        Ok(self)
    }

    /// Region of the run: the square window when `halfwidth` is set, else
    /// the disc of `radius` about `center`.
    pub fn region(&self) -> Result<Region, ConfigError> {
        match self.halfwidth {
            Some(s) => Region::square(s).map_err(|e| ConfigError::new("halfwidth", e.to_string())),
            None => Region::disc(c64(self.center), self.radius.unwrap_or(1.0))
                .map_err(|e| ConfigError::new("radius", e.to_string())),
        }
    }

    pub fn isometry(&self) -> Result<IsometrySpec, ConfigError> {
        match self.family {
            Family::Flat => Ok(IsometrySpec::flat(
                self.theta,
                c64(self.a.unwrap_or([5.0, 2.0])),
            )),
            Family::Hyperbolic => {
                IsometrySpec::hyperbolic(self.theta, c64(self.a.unwrap_or([0.4, 0.0])))
                    .map_err(|e| ConfigError::new("a", e.to_string()))
            }
            Family::Elliptic => IsometrySpec::elliptic(
                c64(self.a.unwrap_or([0.6, 0.0])),
                c64(self.b.unwrap_or([0.8, 0.0])),
            )
            .map_err(|e| ConfigError::new("b", e.to_string())),
        }
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory
    /// and the worker count (neither affects the results).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.workers = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Best-effort extraction of the field name from a deserializer message.
fn field_of(message: &str) -> String {
    for key in ["unknown field `", "missing field `", "field `"] {
        if let Some(i) = message.find(key) {
            let rest = &message[i + key.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    "config".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(cmd: &str) -> RunConfig {
        RunConfig {
            command: cmd.into(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn defaults_resolve_for_every_command() {
        for c in COMMANDS {
            let mut r = cfg(c);
            if matches!(c, "hole" | "paircorr" | "invariance") {
                r.family = Family::Hyperbolic;
            }
            r.resolve().unwrap_or_else(|e| panic!("{c}: {e}"));
        }
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = cfg("counts");
        c.family = Family::Elliptic;
        c.intensity = 2.5;
        assert_eq!(c.resolve().unwrap_err().field, "L");
        let mut c = cfg("linstat");
        c.p = 2;
        assert_eq!(c.resolve().unwrap_err().field, "p");
        let mut c = cfg("hole");
        c.radii = Some(vec![1.0, -1.0]);
        assert_eq!(c.resolve().unwrap_err().field, "radii");
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let a = cfg("counts").resolve().unwrap();
        let mut b = a.clone();
        b.workers = Some(3);
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn toml_and_json_round_trip() {
        let a = cfg("paircorr").resolve().unwrap();
        let t = toml::to_string(&a).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&t).unwrap(), a);
        let j = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&j).unwrap(), a);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = toml::from_str::<RunConfig>("command = \"counts\"\nrhoo = 0.5\n").unwrap_err();
        assert_eq!(field_of(e.message()), "rhoo");
    }
}
