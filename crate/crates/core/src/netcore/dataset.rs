use serde::{Deserialize, Serialize};

use super::NetError;
use crate::numkit::RandomSource;

/// Labelled feature vectors with a declared feature range.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    range: (f64, f64),
}

impl Dataset {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        range: (f64, f64),
    ) -> Result<Self, NetError> {
        if inputs.len() != labels.len() {
            return Err(NetError::CountMismatch {
                images: inputs.len(),
                labels: labels.len(),
            });
        }
        if !(range.0 < range.1) {
            return Err(NetError::InvalidDataset(format!("empty feature range {range:?}")));
        }
        let dim = inputs.first().map_or(0, Vec::len);
        for (i, x) in inputs.iter().enumerate() {
            if x.len() != dim {
                return Err(NetError::InvalidDataset(format!(
                    "sample {i} has {} features, expected {dim}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !(range.0..=range.1).contains(v)) {
                return Err(NetError::InvalidDataset(format!(
                    "sample {i} leaves the range {range:?}"
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(NetError::InvalidClass {
                class: bad,
                classes: num_classes,
            });
        }
        Ok(Self {
            inputs,
            labels,
            num_classes,
            range,
        })
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Affinely maps features from the current range onto `[lo, hi]`.
    pub fn rescaled(&self, lo: f64, hi: f64) -> Result<Self, NetError> {
        let (a, b) = self.range;
        let factor = (hi - lo) / (b - a);
        let inputs = self
            .inputs
            .iter()
            .map(|x| x.iter().map(|v| (lo + (v - a) * factor).clamp(lo, hi)).collect())
            .collect();
        Self::new(inputs, self.labels.clone(), self.num_classes, (lo, hi))
    }
}

/// Seeded Gaussian-blob classification data.
///
/// Class centers are uniform in the middle half of `[lo, hi]`; each sample is
/// its class center plus `spread · (hi − lo)` times standard-normal noise,
/// clipped to the range. Labels cycle through the classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub classes: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub spread: f64,
    #[serde(default)]
    pub lo: f64,
    #[serde(default = "one")]
    pub hi: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Returns `(train, test)` splits drawn around shared class centers.
pub fn synthetic_blobs(spec: &SyntheticSpec) -> Result<(Dataset, Dataset), NetError> {
    if spec.dim == 0 || spec.classes < 2 {
        return Err(NetError::InvalidDataset(
            "synthetic data needs dim >= 1 and at least two classes".into(),
        ));
    }
    if !(spec.lo < spec.hi) || !(spec.spread >= 0.0) {
        return Err(NetError::InvalidDataset("synthetic range or spread is invalid".into()));
    }
    let width = spec.hi - spec.lo;
    let mut rng = RandomSource::new(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            (0..spec.dim)
                .map(|_| rng.uniform(spec.lo + 0.25 * width, spec.hi - 0.25 * width))
                .collect()
        })
        .collect();
    let split = |count: usize, stream: u64| {
        let mut r = rng.derive(stream);
        let mut inputs = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = i % spec.classes;
            let x = centers[label]
                .iter()
                .map(|&c| (c + spec.spread * width * r.standard_normal()).clamp(spec.lo, spec.hi))
                .collect();
            inputs.push(x);
            labels.push(label);
        }
        Dataset::new(inputs, labels, spec.classes, (spec.lo, spec.hi))
    };
    Ok((split(spec.train_count, 1)?, split(spec.test_count, 2)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            dim: 5,
            classes: 3,
            train_count: 30,
            test_count: 12,
            spread: 0.05,
            lo: 0.0,
            hi: 1.0,
            seed: 9,
        }
    }

    #[test]
    fn blobs_are_reproducible_and_in_range() {
        let (a, b) = synthetic_blobs(&spec()).unwrap();
        let (a2, b2) = synthetic_blobs(&spec()).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        assert_eq!(a.len(), 30);
        assert_eq!(b.len(), 12);
        assert_eq!(a.dim(), 5);
        assert_ne!(a.inputs()[0], b.inputs()[0]);
    }

    #[test]
    fn validation() {
        assert!(Dataset::new(vec![vec![0.5]], vec![], 2, (0.0, 1.0)).is_err());
        assert!(Dataset::new(vec![vec![1.5]], vec![0], 2, (0.0, 1.0)).is_err());
        assert!(Dataset::new(vec![vec![0.5]], vec![2], 2, (0.0, 1.0)).is_err());
        assert!(Dataset::new(vec![vec![0.5]], vec![1], 2, (1.0, 1.0)).is_err());
    }

    #[test]
    fn rescale_maps_range() {
        let d = Dataset::new(vec![vec![0.0, 255.0, 51.0]], vec![0], 1, (0.0, 255.0)).unwrap();
        let r = d.rescaled(0.0, 1.0).unwrap();
        assert_eq!(r.inputs()[0], vec![0.0, 1.0, 0.2]);
        assert_eq!(r.range(), (0.0, 1.0));
    }
}
