//! Feature images and nearest-neighbor classification under the relaxed
//! distance `‖(P_a − P_b) diag(D)‖_F`.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::par;
use crate::projector::ProjectionModel;

/// `P = (X − M) W`, an `h × r` matrix whose columns are the principal
/// component vectors of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImage(pub Matrix);

impl FeatureImage {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }
}

pub fn project(x: &Matrix, model: &ProjectionModel) -> Result<FeatureImage> {
    let mean = &model.centering.global_mean;
    if x.shape() != mean.shape() {
        return Err(Error::Dimension(format!(
            "sample is {}x{}, model expects {}x{}",
            x.rows(),
            x.cols(),
            mean.rows(),
            mean.cols()
        )));
    }
    Ok(FeatureImage(x.sub(mean)?.matmul(&model.basis)?))
}

/// `sqrt(Σ_t D_t² ‖column_t(P_a − P_b)‖²)`.
pub fn relaxed_distance(a: &FeatureImage, b: &FeatureImage, d: &[f64]) -> Result<f64> {
    let (pa, pb) = (&a.0, &b.0);
    if pa.shape() != pb.shape() || d.len() != pa.cols() {
        return Err(Error::Dimension(format!(
            "feature images {}x{} and {}x{} with {} weights",
            pa.rows(),
            pa.cols(),
            pb.rows(),
            pb.cols(),
            d.len()
        )));
    }
    let mut sum = 0.0;
    for i in 0..pa.rows() {
        for (t, &dt) in d.iter().enumerate() {
            let diff = dt * (pa[(i, t)] - pb[(i, t)]);
            sum += diff * diff;
        }
    }
    Ok(sum.sqrt())
}

/// Projected training samples with their labels and the axis weights.
#[derive(Debug, Clone)]
pub struct Gallery {
    features: Vec<FeatureImage>,
    labels: Vec<usize>,
    weights: Vec<f64>,
}

/// Result of one nearest-neighbor query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub neighbor: usize,
    pub distance: f64,
}

impl Gallery {
    pub fn new(features: Vec<FeatureImage>, labels: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature images for {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(first) = features.first() {
            let shape = first.0.shape();
            if features.iter().any(|f| f.0.shape() != shape) || weights.len() != shape.1 {
                return Err(Error::Dimension("inconsistent gallery shapes".into()));
            }
        }
        Ok(Gallery {
            features,
            labels,
            weights,
        })
    }

    /// Projects every training sample through `model`.
    pub fn build(train: &LabeledDataset, model: &ProjectionModel) -> Result<Self> {
        let features = par::map(train.samples(), |x| project(x, model))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Gallery::new(features, train.labels().to_vec(), model.objective.clone())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same gallery with the axis weights replaced.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Gallery::new(self.features.clone(), self.labels.clone(), weights)
    }

    /// Nearest gallery item to a feature image; ties go to the lowest index.
    pub fn nearest(&self, query: &FeatureImage) -> Result<Prediction> {
        if self.features.is_empty() {
            return Err(Error::InvalidState("empty gallery".into()));
        }
        let mut best: Option<Prediction> = None;
        for (i, f) in self.features.iter().enumerate() {
            let d = relaxed_distance(f, query, &self.weights)?;
            if best.is_none_or(|b| d < b.distance) {
                best = Some(Prediction {
                    label: self.labels[i],
                    neighbor: i,
                    distance: d,
                });
            }
        }
        Ok(best.expect("gallery is nonempty"))
    }
}

pub fn classify(gallery: &Gallery, x: &Matrix, model: &ProjectionModel) -> Result<Prediction> {
    gallery.nearest(&project(x, model)?)
}

/// Predictions for every test sample, in test order.
pub fn predict_all(gallery: &Gallery, test: &LabeledDataset, model: &ProjectionModel) -> Result<Vec<Prediction>> {
    par::map(test.samples(), |x| classify(gallery, x, model))
        .into_iter()
        .collect()
}

/// Fraction of test samples whose nearest gallery item has their label.
pub fn accuracy(gallery: &Gallery, test: &LabeledDataset, model: &ProjectionModel) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let predictions = predict_all(gallery, test, model)?;
    let correct = predictions
        .iter()
        .zip(test.labels())
        .filter(|(p, &l)| p.label == l)
        .count();
    Ok(correct as f64 / test.len() as f64)
}
