use std::path::{Path, PathBuf};

use prevalence_core::bayes::GibbsConfig;
use prevalence_core::study::Granularity;
use prevalence_core::synthetic::SimulationParams;
use prevalence_core::textmodel::{default_c_grid, Weighting};
use prevalence_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run depends on. Precedence: built-in defaults, then the
/// `--config` file, then command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub input: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub communities: Vec<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub ingest: IngestConfig,
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    pub weighting: Weighting,
    pub gibbs: GibbsConfig,
    pub granularity: Granularity,
    pub cumulative: bool,
    pub min_reviews: usize,
    pub reviewer_k: Vec<usize>,
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub min_chars: usize,
    pub rating: Option<u8>,
    pub sample: Option<usize>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            min_chars: 150,
            rating: Some(5),
            sample: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    #[serde(flatten)]
    pub params: SimulationParams,
    /// Also write two community corpora for `study`.
    pub communities: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: PathBuf::from("out"),
            input: None,
            train: None,
            dev: None,
            test: None,
            model: None,
            calibration: None,
            communities: Vec::new(),
            profiles: None,
            ingest: IngestConfig::default(),
            c_grid: default_c_grid(),
            cv_folds: 5,
            weighting: Weighting::Binary,
            gibbs: GibbsConfig::default(),
            granularity: Granularity::Quarterly,
            cumulative: true,
            min_reviews: 30,
            reviewer_k: vec![1, 2, 3],
            simulate: SimulateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s)
            .map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field.as_deref().ok_or_else(|| {
            Error::Invalid(format!(
                "missing required input: --{name} (or \"{name}\" in the config)"
            ))
        })
    }

    /// Gibbs settings with the run seed applied.
    pub fn gibbs(&self) -> GibbsConfig {
        GibbsConfig {
            seed: self.seed,
            ..self.gibbs
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() || self.c_grid.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Invalid(
                "c_grid must be a non-empty list of positive values".into(),
            ));
        }
        if self.cv_folds < 2 {
            return Err(Error::Invalid("cv_folds must be at least 2".into()));
        }
        if self.reviewer_k.is_empty() || self.reviewer_k.contains(&0) {
            return Err(Error::Invalid(
                "reviewer_k must be a non-empty list of positive thresholds".into(),
            ));
        }
        self.gibbs.validate()
    }
}
