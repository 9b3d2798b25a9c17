//! Study and design configuration files (TOML).
//!
//! The study config pins everything a Roadmap run must pre-specify: the
//! causal question, column roles, the chosen adjustment set, the
//! estimator (method, learner library, folds, bounds, seed), and the
//! sensitivity inputs (causal-gap bounds with provenance, negative
//! controls). The design file lists candidate designs for simulation.
//! Unknown keys are rejected — a typo in a pre-specified analysis plan
//! must fail loudly, not be ignored.
//!
//! TOML syntax errors map to [`EngineError::ConfigSyntax`]; well-formed
//! TOML that violates the schema maps to [`EngineError::ConfigInvalid`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use roadmap_engine::data::{DatasetSchema, DEFAULT_TAU};
use roadmap_engine::estimand::{CausalEstimand, Contrast};
use roadmap_engine::estimate::{EstimateOptions, Method};
use roadmap_engine::learn::{LearnerSpec, SuperLearnerSpec};
use roadmap_engine::sensitivity::GapBounds;
use roadmap_engine::sim::{DesignKind, DesignSpec, DEFAULT_ALPHA, DEFAULT_DELTA_GRID};
use roadmap_engine::{EngineError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudySection,
    pub data: DataSection,
    #[serde(default)]
    pub identification: IdentificationSection,
    pub estimator: Option<EstimatorSection>,
    pub sensitivity: Option<SensitivitySection>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    /// Free-text user attestations keyed by Roadmap step label
    /// (e.g. `"2" = ["time zero aligned at enrollment"]`), echoed into
    /// the study report.
    #[serde(default)]
    pub attestations: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Who the effect is about, in words.
    pub population: String,
    /// What the outcome column measures, in words.
    pub outcome_description: String,
    /// `risk_difference` or `risk_ratio`.
    pub contrast: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub treatment: String,
    pub outcome: String,
    pub censoring: Option<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentificationSection {
    /// Index into the identification result's adjustment-set list.
    #[serde(default)]
    pub adjustment_set_index: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// `unadjusted`, `gcomp`, `ipw`, or `tmle`.
    pub method: String,
    /// Learner names as accepted by the estimation module; empty or
    /// absent means the default four-learner library.
    #[serde(default)]
    pub library: Vec<String>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub propensity_bounds: Option<[f64; 2]>,
    pub outcome_bounds: Option<[f64; 2]>,
    pub bootstrap_samples: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivitySection {
    pub gap_lo: Option<f64>,
    pub gap_hi: Option<f64>,
    pub gap_provenance: Option<String>,
    #[serde(default)]
    pub negative_controls: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// Positivity flag threshold τ; default 0.025.
    pub tau: Option<f64>,
}

/// Parse TOML text into a typed value, splitting syntax errors from
/// schema violations.
fn from_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let value: toml::Value = toml::from_str(text)
        .map_err(|e| EngineError::ConfigSyntax { message: e.to_string() })?;
    value.try_into().map_err(|e: toml::de::Error| EngineError::ConfigInvalid {
        message: e.to_string(),
    })
}

impl StudyConfig {
    pub fn load(path: &Path) -> Result<StudyConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
        StudyConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<StudyConfig> {
        let config: StudyConfig = from_toml(text)?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        self.contrast()?;
        if let Some(est) = &self.estimator {
            self.method()?;
            for learner in &est.library {
                LearnerSpec::parse(learner)?;
            }
            for bounds in [est.propensity_bounds, est.outcome_bounds].into_iter().flatten() {
                if !(0.0 < bounds[0] && bounds[0] < bounds[1] && bounds[1] <= 1.0) {
                    return Err(EngineError::ConfigInvalid {
                        message: format!(
                            "bounds must satisfy 0 < lo < hi <= 1, got [{}, {}]",
                            bounds[0], bounds[1]
                        ),
                    });
                }
            }
        }
        self.gap_bounds()?;
        if let Some(tau) = self.diagnostics.tau {
            if !(tau > 0.0 && tau < 0.5) {
                return Err(EngineError::ConfigInvalid {
                    message: format!("diagnostics.tau must be in (0, 0.5), got {tau}"),
                });
            }
        }
        Ok(())
    }

    pub fn contrast(&self) -> Result<Contrast> {
        match self.study.contrast.as_str() {
            "risk_difference" => Ok(Contrast::RiskDifference),
            "risk_ratio" => Ok(Contrast::RiskRatio),
            other => Err(EngineError::ConfigInvalid {
                message: format!(
                    "study.contrast must be `risk_difference` or `risk_ratio`, got `{other}`"
                ),
            }),
        }
    }

    pub fn schema(&self) -> DatasetSchema {
        DatasetSchema {
            treatment: self.data.treatment.clone(),
            outcome: self.data.outcome.clone(),
            censoring: self.data.censoring.clone(),
            covariates: self.data.covariates.clone(),
        }
    }

    /// The causal question this study pre-specifies. The outcome node id
    /// comes from the validated graph, which must agree with the data
    /// section's outcome column.
    pub fn causal_estimand(&self) -> Result<CausalEstimand> {
        Ok(CausalEstimand::new(
            self.study.population.clone(),
            self.data.outcome.clone(),
            self.study.outcome_description.clone(),
            self.contrast()?,
        ))
    }

    pub fn method(&self) -> Result<Method> {
        let section = self.require_estimator()?;
        Method::parse(&section.method)
    }

    /// Super-learner specification; `default_seed` applies when the
    /// estimator block does not pin one.
    pub fn super_learner(&self, default_seed: u64) -> Result<SuperLearnerSpec> {
        let section = self.require_estimator()?;
        let seed = section.seed.unwrap_or(default_seed);
        let mut sl = if section.library.is_empty() {
            SuperLearnerSpec::default_library(seed)
        } else {
            let library: Vec<LearnerSpec> =
                section.library.iter().map(|s| LearnerSpec::parse(s)).collect::<Result<_>>()?;
            SuperLearnerSpec { library, folds: None, seed }
        };
        sl.folds = section.folds;
        sl.validate()?;
        Ok(sl)
    }

    pub fn estimate_options(&self) -> Result<EstimateOptions> {
        let section = self.require_estimator()?;
        let mut opts = EstimateOptions::default();
        if let Some(b) = section.propensity_bounds {
            opts.propensity_bounds = (b[0], b[1]);
        }
        if let Some(b) = section.outcome_bounds {
            opts.outcome_bounds = (b[0], b[1]);
        }
        if let Some(b) = section.bootstrap_samples {
            opts.bootstrap_samples = b;
        }
        Ok(opts)
    }

    fn require_estimator(&self) -> Result<&EstimatorSection> {
        self.estimator.as_ref().ok_or_else(|| EngineError::ConfigInvalid {
            message: "the config has no [estimator] section".into(),
        })
    }

    /// Causal-gap bounds, when the sensitivity section declares them.
    /// All three gap keys must appear together — provenance is mandatory.
    pub fn gap_bounds(&self) -> Result<Option<GapBounds>> {
        let Some(s) = &self.sensitivity else { return Ok(None) };
        match (s.gap_lo, s.gap_hi, &s.gap_provenance) {
            (None, None, None) => Ok(None),
            (Some(lo), Some(hi), Some(provenance)) => {
                if provenance.trim().is_empty() {
                    return Err(EngineError::ConfigInvalid {
                        message: "sensitivity.gap_provenance must be nonempty".into(),
                    });
                }
                let gb =
                    GapBounds { lo, hi, provenance: provenance.clone() };
                gb.validate()?;
                Ok(Some(gb))
            }
            _ => Err(EngineError::ConfigInvalid {
                message: "sensitivity gap bounds need gap_lo, gap_hi, and gap_provenance together"
                    .into(),
            }),
        }
    }

    pub fn negative_controls(&self) -> &[String] {
        self.sensitivity.as_ref().map(|s| s.negative_controls.as_slice()).unwrap_or(&[])
    }

    pub fn tau(&self) -> f64 {
        self.diagnostics.tau.unwrap_or(DEFAULT_TAU)
    }
}

// ── design files ──

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignFile {
    #[serde(default)]
    design: Vec<RawDesign>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    name: String,
    /// `rct`, `observational`, or `hybrid`.
    kind: String,
    n: Option<usize>,
    n_rct: Option<usize>,
    n_external: Option<usize>,
    /// Hybrid drift grid; defaults to [0, 0.25, 0.5, 1.0].
    deltas: Option<Vec<f64>>,
    estimators: Vec<String>,
    alpha: Option<f64>,
}

/// Parse a design file into validated [`DesignSpec`]s.
pub fn parse_designs(text: &str) -> Result<Vec<DesignSpec>> {
    let file: DesignFile = from_toml(text)?;
    if file.design.is_empty() {
        return Err(EngineError::ConfigInvalid {
            message: "the design file declares no [[design]] entries".into(),
        });
    }
    file.design.into_iter().map(build_design).collect()
}

pub fn load_designs(path: &Path) -> Result<Vec<DesignSpec>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    parse_designs(&text)
}

fn build_design(raw: RawDesign) -> Result<DesignSpec> {
    let invalid = |message: String| EngineError::InvalidDesign { name: raw.name.clone(), message };
    let need_n = || raw.n.ok_or_else(|| invalid(format!("kind `{}` needs `n`", raw.kind)));
    let reject = |field: &str, present: bool| -> Result<()> {
        if present {
            Err(invalid(format!("`{field}` does not apply to kind `{}`", raw.kind)))
        } else {
            Ok(())
        }
    };

    let kind = match raw.kind.as_str() {
        "rct" | "observational" => {
            reject("n_rct", raw.n_rct.is_some())?;
            reject("n_external", raw.n_external.is_some())?;
            reject("deltas", raw.deltas.is_some())?;
            let n = need_n()?;
            if raw.kind == "rct" {
                DesignKind::Rct { n }
            } else {
                DesignKind::Observational { n }
            }
        }
        "hybrid" => {
            reject("n", raw.n.is_some())?;
            let n_rct =
                raw.n_rct.ok_or_else(|| invalid("kind `hybrid` needs `n_rct`".into()))?;
            let n_external = raw
                .n_external
                .ok_or_else(|| invalid("kind `hybrid` needs `n_external`".into()))?;
            let deltas = raw.deltas.clone().unwrap_or_else(|| DEFAULT_DELTA_GRID.to_vec());
            DesignKind::Hybrid { n_rct, n_external, deltas }
        }
        other => {
            return Err(invalid(format!(
                "unknown design kind `{other}` (expected rct, observational, or hybrid)"
            )))
        }
    };

    let estimators: Vec<Method> =
        raw.estimators.iter().map(|s| Method::parse(s)).collect::<Result<_>>()?;
    let design = DesignSpec {
        name: raw.name,
        kind,
        estimators,
        alpha: raw.alpha.unwrap_or(DEFAULT_ALPHA),
    };
    design.validate()?;
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL_CONFIG: &str = r#"
        [study]
        population = "adults meeting trial eligibility"
        outcome_description = "death within 12 months"
        contrast = "risk_difference"

        [data]
        treatment = "A"
        outcome = "Y"
        censoring = "C"
        covariates = ["W"]

        [identification]
        adjustment_set_index = 0

        [estimator]
        method = "tmle"
        library = ["mean_only", "logistic_main_terms", "stratified_histogram(bins=4)"]
        folds = 5
        seed = 7

        [sensitivity]
        gap_lo = -0.02
        gap_hi = 0.01
        gap_provenance = "plausible residual confounding from the registry comparison"
        negative_controls = ["N"]

        [diagnostics]
        tau = 0.05

        [attestations]
        "2" = ["time zero aligned at treatment initiation"]
    "#;

    #[test]
    fn full_config_round_trips_into_engine_types() {
        let cfg = StudyConfig::parse(FULL_CONFIG).unwrap();
        assert_eq!(cfg.contrast().unwrap(), Contrast::RiskDifference);
        assert_eq!(cfg.schema().censoring.as_deref(), Some("C"));
        assert_eq!(cfg.method().unwrap(), Method::Tmle);

        let sl = cfg.super_learner(0).unwrap();
        assert_eq!(sl.seed, 7);
        assert_eq!(sl.folds, Some(5));
        assert_eq!(sl.library.len(), 3);

        let gap = cfg.gap_bounds().unwrap().unwrap();
        assert_eq!((gap.lo, gap.hi), (-0.02, 0.01));
        assert_eq!(cfg.negative_controls(), ["N".to_string()]);
        assert_eq!(cfg.tau(), 0.05);
        assert_eq!(cfg.attestations["2"].len(), 1);

        let ce = cfg.causal_estimand().unwrap();
        assert_eq!(ce.outcome_node, "Y");
    }

    #[test]
    fn minimal_config_defaults_sensibly() {
        let cfg = StudyConfig::parse(
            r#"
            [study]
            population = "p"
            outcome_description = "o"
            contrast = "risk_ratio"

            [data]
            treatment = "A"
            outcome = "Y"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.identification.adjustment_set_index, 0);
        assert!(cfg.gap_bounds().unwrap().is_none());
        assert!(cfg.negative_controls().is_empty());
        assert_eq!(cfg.tau(), DEFAULT_TAU);
        assert!(cfg.method().is_err(), "no estimator section");
    }

    #[test]
    fn toml_syntax_and_schema_errors_are_distinguished() {
        let err = StudyConfig::parse("[study\npopulation = 1").unwrap_err();
        assert!(matches!(err, EngineError::ConfigSyntax { .. }), "{err}");
        assert!(err.is_syntax());

        let err = StudyConfig::parse(
            "[study]\npopulation = \"p\"\noutcome_description = \"o\"\ncontrast = \"rd\"\n\
             [data]\ntreatment = \"A\"\noutcome = \"Y\"\nmystery_key = 1\n",
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::ConfigInvalid { .. }), "{err}");
        assert!(!err.is_syntax());
    }

    #[test]
    fn unknown_contrast_method_and_partial_gap_are_rejected() {
        let bad_contrast = FULL_CONFIG.replace("risk_difference", "odds_ratio");
        assert!(StudyConfig::parse(&bad_contrast).is_err());

        let bad_method = FULL_CONFIG.replace("\"tmle\"", "\"aipw\"");
        assert!(StudyConfig::parse(&bad_method).is_err());

        let partial_gap = FULL_CONFIG.replace("gap_hi = 0.01\n", "");
        let err = StudyConfig::parse(&partial_gap).unwrap_err();
        assert!(err.to_string().contains("together"), "{err}");
    }

    #[test]
    fn design_file_parses_all_three_kinds() {
        let designs = parse_designs(
            r#"
            [[design]]
            name = "trial"
            kind = "rct"
            n = 1000
            estimators = ["tmle"]

            [[design]]
            name = "registry"
            kind = "observational"
            n = 1000
            estimators = ["unadjusted", "tmle"]

            [[design]]
            name = "augmented"
            kind = "hybrid"
            n_rct = 250
            n_external = 250
            estimators = ["tmle"]
            "#,
        )
        .unwrap();
        assert_eq!(designs.len(), 3);
        assert_eq!(designs[0].kind, DesignKind::Rct { n: 1000 });
        assert_eq!(designs[1].estimators, vec![Method::Unadjusted, Method::Tmle]);
        match &designs[2].kind {
            DesignKind::Hybrid { deltas, .. } => {
                assert_eq!(deltas, &DEFAULT_DELTA_GRID.to_vec(), "default grid fills in");
            }
            other => panic!("expected hybrid, got {other:?}"),
        }
        assert_eq!(designs[2].alpha, DEFAULT_ALPHA);
    }

    #[test]
    fn design_field_kind_mismatches_are_rejected() {
        let err = parse_designs(
            "[[design]]\nname = \"d\"\nkind = \"rct\"\nn = 100\nn_rct = 50\nestimators = [\"tmle\"]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("does not apply"), "{err}");

        let err = parse_designs(
            "[[design]]\nname = \"d\"\nkind = \"hybrid\"\nn_rct = 50\nestimators = [\"tmle\"]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("n_external"), "{err}");

        let err = parse_designs("[[design]]\nname = \"d\"\nkind = \"cohort\"\nestimators = [\"tmle\"]\n")
            .unwrap_err();
        assert!(err.to_string().contains("unknown design kind"), "{err}");

        assert!(parse_designs("# empty\n").is_err());
    }
}
