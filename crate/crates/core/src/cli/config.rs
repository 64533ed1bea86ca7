use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::netcore::{self, Dataset, SyntheticSpec, TrainConfig};
use crate::propagate::PropagationConfig;

/// Source of training and analysis data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticSpec),
    Idx(IdxPaths),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    #[serde(default)]
    pub test_images: Option<PathBuf>,
    #[serde(default)]
    pub test_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialConfig {
    /// L2 length of the perturbation along `w₁`.
    pub epsilon: f64,
    #[serde(default = "default_random_directions")]
    pub random_directions: usize,
    #[serde(default = "default_adversarial_seed")]
    pub seed: u64,
}

fn default_random_directions() -> usize {
    200
}

fn default_adversarial_seed() -> u64 {
    2
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionConfig {
    /// Overrides the gap-selected rank.
    #[serde(default)]
    pub rank: Option<usize>,
}

/// One JSON document describing a run. Relative paths resolve against the
/// directory containing the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    /// Affine rescale of features onto `[lo, hi]` after loading.
    #[serde(default)]
    pub rescale: Option<(f64, f64)>,
    pub weights: PathBuf,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub image_index: usize,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub adversarial: Option<AdversarialConfig>,
    #[serde(default)]
    pub attribution: AttributionConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("malformed config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        cfg.propagation
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if let Some((lo, hi)) = cfg.rescale {
            if !(lo < hi) {
                return Err(CliError::Config(format!("rescale range [{lo}, {hi}] is empty")));
            }
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.weights);
        if let Some(out) = self.output_dir.as_mut() {
            fix(out);
        }
        if let DatasetConfig::Idx(idx) = &mut self.dataset {
            fix(&mut idx.train_images);
            fix(&mut idx.train_labels);
            if let Some(p) = idx.test_images.as_mut() {
                fix(p);
            }
            if let Some(p) = idx.test_labels.as_mut() {
                fix(p);
            }
        }
    }

    /// `(train, test)`; `test` is empty when no test split is configured.
    pub fn load_datasets(&self) -> Result<(Dataset, Dataset), CliError> {
        let (train, test) = match &self.dataset {
            DatasetConfig::Synthetic(spec) => {
                netcore::synthetic_blobs(spec).map_err(|e| CliError::Config(e.to_string()))?
            }
            DatasetConfig::Idx(paths) => {
                for p in [
                    Some(&paths.train_images),
                    Some(&paths.train_labels),
                    paths.test_images.as_ref(),
                    paths.test_labels.as_ref(),
                ]
                .into_iter()
                .flatten()
                {
                    if !p.exists() {
                        return Err(CliError::Config(format!("dataset file not found: {}", p.display())));
                    }
                }
                let train = netcore::load_idx(&paths.train_images, &paths.train_labels)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let test = match (&paths.test_images, &paths.test_labels) {
                    (Some(i), Some(l)) => netcore::load_idx(i, l).map_err(|e| CliError::Config(e.to_string()))?,
                    (None, None) => Dataset::new(vec![], vec![], train.num_classes(), train.range())
                        .expect("empty dataset is valid"),
                    _ => {
                        return Err(CliError::Config(
                            "test_images and test_labels must be given together".into(),
                        ))
                    }
                };
                (train, test)
            }
        };
        match self.rescale {
            Some((lo, hi)) => Ok((
                train.rescaled(lo, hi).map_err(|e| CliError::Config(e.to_string()))?,
                test.rescaled(lo, hi).map_err(|e| CliError::Config(e.to_string()))?,
            )),
            None => Ok((train, test)),
        }
    }

    /// The analysis center: `image_index` into the test split, or the training
    /// split when there is no test data.
    pub fn center(&self) -> Result<(Vec<f64>, (f64, f64)), CliError> {
        let (train, test) = self.load_datasets()?;
        let source = if test.is_empty() { &train } else { &test };
        let x0 = source.inputs().get(self.image_index).ok_or_else(|| {
            CliError::Config(format!(
                "image_index {} out of range ({} samples)",
                self.image_index,
                source.len()
            ))
        })?;
        Ok((x0.clone(), source.range()))
    }
}
