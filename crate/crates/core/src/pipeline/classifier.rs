//! Linear forward/discard classifier trained with the perceptron rule.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, SensorReading};

use super::PipelineConfig;

pub const FEATURES: usize = 5;
pub const MAX_EPOCHS: usize = 100;

pub type FeatureVector = [f64; FEATURES];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub weights: FeatureVector,
}

impl ClassifierModel {
    pub fn zero() -> Self {
        Self {
            weights: [0.0; FEATURES],
        }
    }

    pub fn new(weights: FeatureVector) -> Self {
        Self { weights }
    }

    pub fn score(&self, x: &FeatureVector) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum()
    }

    /// Forward iff `w·x > 0`; the zero model discards everything.
    pub fn decide(&self, x: &FeatureVector) -> Label {
        if self.score(x) > 0.0 {
            Label::Forward
        } else {
            Label::Discard
        }
    }

    /// One weight per line, shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        self.weights.iter().map(|w| format!("{w}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| {
                l.parse::<f64>()
                    .ok()
                    .filter(|w| w.is_finite())
                    .ok_or_else(|| {
                        Error::ModelFile(format!("weight {} is not a finite real: {l:?}", i + 1))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let weights: FeatureVector = values.as_slice().try_into().map_err(|_| {
            Error::ModelFile(format!(
                "expected {FEATURES} weights, found {}",
                values.len()
            ))
        })?;
        Ok(Self { weights })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Features seen by the classifier: priority score, band-normalised opinion
/// deviation, consensus ratio, band-normalised value and a constant bias.
/// Missing annotations count as zero.
pub fn features(r: &SensorReading, cfg: &PipelineConfig) -> FeatureVector {
    let width = cfg.band_width();
    let a = &r.annotations;
    [
        a.priority_score.unwrap_or(0.0),
        a.opinion_deviation.unwrap_or(0.0) / width,
        a.consensus_ratio.unwrap_or(0.0),
        (r.value - cfg.band_lo) / width,
        1.0,
    ]
}

fn sign(label: Label) -> f64 {
    match label {
        Label::Forward => 1.0,
        Label::Discard => -1.0,
    }
}

/// Perceptron with zero initial weights and unit learning rate. Examples are
/// visited in the given order for at most [`MAX_EPOCHS`] epochs, stopping
/// early after an epoch with no update.
pub fn train_classifier(examples: &[(FeatureVector, Label)]) -> Result<ClassifierModel> {
    if examples.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut model = ClassifierModel::zero();
    for _ in 0..MAX_EPOCHS {
        let mut updated = false;
        for (x, label) in examples {
            if model.decide(x) != *label {
                let y = sign(*label);
                for (w, v) in model.weights.iter_mut().zip(x) {
                    *w += y * v;
                }
                updated = true;
            }
        }
        if !updated {
            break;
        }
    }
    Ok(model)
}

/// Fraction of examples the model labels correctly.
pub fn training_accuracy(
    model: &ClassifierModel,
    examples: &[(FeatureVector, Label)],
) -> Option<f64> {
    if examples.is_empty() {
        return None;
    }
    let correct = examples
        .iter()
        .filter(|(x, l)| model.decide(x) == *l)
        .count();
    Some(correct as f64 / examples.len() as f64)
}
