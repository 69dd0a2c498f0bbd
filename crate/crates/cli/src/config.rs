//! The JSON run configuration and its resolution into library types.

use std::path::{Path, PathBuf};

use saddle_core::local_flow::{IntegratorConfig, Perturbation};
use saddle_core::return_stats::EntryDensity;
use saddle_core::{derive_constants, DerivedConstants, DomainRect, SaddleParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// `zeta0` and `eta0`; `eta1` follows from the stable-axis flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub zeta0: f64,
    pub eta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    /// `h = 1`, uniform stable weight over the entry strip.
    // a struct variant, so that unknown keys are rejected here too
    Uniform {},
    /// Polynomial jets and weight; the weight is normalized on load.
    Polynomial {
        h_coeffs: Vec<Vec<f64>>,
        stable_weight: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta_range: Option<[f64; 2]>,
    },
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::Uniform {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SaddleParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RectSpec>,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            // the inner message already carries line and column
            CliError::Parse(format!("config error at `{}`: {}", e.path(), e.inner()))
        })?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Parse(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
            None => Self::parse(DEFAULT_CONFIG),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        let constants = derive_constants(&self.params)?;
        let rect = match self.rect {
            Some(r) => DomainRect::new(&self.params, r.zeta0, r.eta0)?,
            None => DomainRect::default_for(&self.params)?,
        };
        let density = match &self.density {
            DensitySpec::Uniform {} => EntryDensity::uniform(&rect, self.params.kappa),
            DensitySpec::Polynomial { h_coeffs, stable_weight, eta_range } => EntryDensity::new(
                eta_range.unwrap_or([rect.eta0, rect.eta1]),
                h_coeffs.clone(),
                stable_weight.clone(),
            )?,
        };
        density.validate(self.params.kappa)?;
        self.perturbation.validate(self.params.kappa)?;
        self.integrator.validate()?;
        Ok(Resolved {
            params: self.params,
            constants,
            rect,
            density,
            perturbation: self.perturbation.clone(),
            integrator: self.integrator,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: SaddleParams,
    pub constants: DerivedConstants,
    pub rect: DomainRect,
    pub density: EntryDensity,
    pub perturbation: Perturbation,
    pub integrator: IntegratorConfig,
    pub seed: Option<u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_resolves_to_p2() {
        let cfg = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.constants.beta2, 0.75);
        assert!(!(1..=12).contains(&cfg.seed.unwrap()));
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let text = DEFAULT_CONFIG.replace("\"b2\": 2.0", "\"b2\": 2.0, \"b3\": 1.0");
        let CliError::Parse(msg) = RunConfig::parse(&text).unwrap_err() else { panic!() };
        assert!(msg.contains("params") && msg.contains("b3"), "{msg}");
        let text = DEFAULT_CONFIG.replace("\"kind\": \"uniform\"", "\"kind\": \"uniform\", \"h\": 1");
        assert!(RunConfig::parse(&text).is_err());
    }

    #[test]
    fn malformed_json_reports_position() {
        let CliError::Parse(msg) = RunConfig::parse("{\"params\": {\"a0\": 1,}").unwrap_err() else { panic!() };
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn polynomial_density_and_rect() {
        let text = r#"{"params": {"a0": 1, "a2": 1, "b0": 1, "b2": 2, "kappa": 2},
            "rect": {"zeta0": 0.3, "eta0": 0.3},
            "density": {"kind": "polynomial", "h_coeffs": [[1.0], [0.5]], "stable_weight": [1.0, 1.0]}}"#;
        let r = RunConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.rect.zeta0, 0.3);
        assert_eq!(r.density.eta_range, [0.3, r.rect.eta1]);
    }

    #[test]
    fn degenerate_delta_is_a_validation_error() {
        let text = r#"{"params": {"a0": 1, "a2": 1, "b0": 1, "b2": 1, "kappa": 2}}"#;
        let e = RunConfig::parse(text).unwrap().resolve().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("DegenerateDelta"));
    }
}
