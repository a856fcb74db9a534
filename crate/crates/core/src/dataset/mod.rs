//! Labeled image datasets: centering, per-class splits and a synthetic
//! generator for desk-scale experiments.

mod manifest;

pub use manifest::{load_manifest, save_manifest, MANIFEST_FILE};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Same-sized image samples grouped into classes.
///
/// Labels are zero-based class indices into `class_names`; every class has
/// at least one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    height: usize,
    width: usize,
    samples: Vec<Matrix>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Matrix>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset has no samples".into()))?;
        let (height, width) = first.shape();
        if labels.len() != samples.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} samples",
                labels.len(),
                samples.len()
            )));
        }
        if let Some((i, x)) = samples.iter().enumerate().find(|(_, x)| x.shape() != (height, width)) {
            return Err(Error::Dimension(format!(
                "sample {i} is {}x{}, expected {height}x{width}",
                x.rows(),
                x.cols()
            )));
        }
        let m = class_names.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= m) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {m} classes"
            )));
        }
        let ds = LabeledDataset {
            height,
            width,
            samples,
            labels,
            class_names,
        };
        if let Some(j) = ds.class_counts().iter().position(|&c| c == 0) {
            return Err(Error::InvalidInput(format!(
                "class {:?} has no samples",
                ds.class_names[j]
            )));
        }
        Ok(ds)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn samples(&self) -> &[Matrix] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Sample indices belonging to class `j`, in dataset order.
    pub fn class_indices(&self, j: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == j).then_some(i))
            .collect()
    }

    /// Dataset restricted to the given sample indices (class list kept).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidParameter(format!("sample index {bad} out of range")));
        }
        LabeledDataset::new(
            indices.iter().map(|&i| self.samples[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_names.clone(),
        )
    }

    /// Same samples under a different labeling.
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Self> {
        LabeledDataset::new(self.samples.clone(), labels, self.class_names.clone())
    }

    /// Applies `f` to every sample, keeping labels.
    pub fn map_samples(&self, f: impl Fn(&Matrix) -> Matrix) -> Result<Self> {
        LabeledDataset::new(
            self.samples.iter().map(f).collect(),
            self.labels.clone(),
            self.class_names.clone(),
        )
    }
}

/// Global and per-class sample means.
#[derive(Debug, Clone, PartialEq)]
pub struct Centering {
    pub global_mean: Matrix,
    pub class_means: Vec<Matrix>,
}

fn mean_of<'a>(items: impl Iterator<Item = &'a Matrix>, h: usize, w: usize) -> Matrix {
    let mut sum = Matrix::zeros(h, w);
    let mut n = 0usize;
    for x in items {
        for (s, v) in sum.as_mut_slice().iter_mut().zip(x.as_slice()) {
            *s += v;
        }
        n += 1;
    }
    let n = n as f64;
    sum.as_mut_slice().iter_mut().for_each(|s| *s /= n);
    sum
}

pub fn compute_centering(ds: &LabeledDataset) -> Centering {
    let (h, w) = (ds.height, ds.width);
    let global_mean = mean_of(ds.samples.iter(), h, w);
    let class_means = (0..ds.num_classes())
        .map(|j| {
            mean_of(
                ds.samples.iter().zip(&ds.labels).filter(|(_, &l)| l == j).map(|(x, _)| x),
                h,
                w,
            )
        })
        .collect();
    Centering {
        global_mean,
        class_means,
    }
}

/// Subtracts the global mean from every sample.
pub fn center(ds: &LabeledDataset, c: &Centering) -> Result<LabeledDataset> {
    if c.global_mean.shape() != (ds.height, ds.width) {
        return Err(Error::Dimension(format!(
            "mean is {}x{}, samples are {}x{}",
            c.global_mean.rows(),
            c.global_mean.cols(),
            ds.height,
            ds.width
        )));
    }
    ds.map_samples(|x| x.sub(&c.global_mean).expect("shapes checked"))
}

/// Per-class random split of sample indices into (train, test).
///
/// Exactly `train_per_class` samples of every class go to train, the rest to
/// test. Both lists are returned in ascending order.
pub fn split_indices(
    ds: &LabeledDataset,
    train_per_class: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let counts = ds.class_counts();
    let min = counts.iter().copied().min().unwrap_or(0);
    if train_per_class == 0 || train_per_class >= min {
        return Err(Error::InvalidParameter(format!(
            "train_per_class = {train_per_class} must lie in [1, {min}) for the smallest class"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for j in 0..ds.num_classes() {
        let mut idx = ds.class_indices(j);
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..train_per_class]);
        test.extend_from_slice(&idx[train_per_class..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_per_class(
    ds: &LabeledDataset,
    train_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(ds, train_per_class, seed)?;
    Ok((ds.subset(&train)?, ds.subset(&test)?))
}

/// Parameters of the synthetic class-structured generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
    pub noise_sigma: f64,
}

/// Draws `classes` random prototypes and `per_class` noisy copies of each.
///
/// Prototypes are uniform on [0, 1] per pixel and then rescaled, if needed,
/// so every pair is at least `4 σ √(h w)` apart in Frobenius norm. Samples
/// are ordered class by class.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<LabeledDataset> {
    let SynthSpec {
        classes,
        per_class,
        height,
        width,
        noise_sigma,
    } = *spec;
    if classes == 0 || per_class == 0 || height == 0 || width == 0 {
        return Err(Error::InvalidParameter("synthetic dataset counts must be >= 1".into()));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise sigma {noise_sigma} must be >= 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prototypes = draw_prototypes(spec, &mut rng);

    let noise = Normal::new(0.0, noise_sigma)
        .map_err(|e| Error::InvalidParameter(format!("noise distribution: {e}")))?;
    let mut samples = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (j, proto) in prototypes.iter().enumerate() {
        for _ in 0..per_class {
            let data = proto.iter().map(|&x| x + noise.sample(&mut rng)).collect();
            samples.push(Matrix::new(height, width, data)?);
            labels.push(j);
        }
    }
    let names = (0..classes).map(|j| format!("class{:02}", j + 1)).collect();
    LabeledDataset::new(samples, labels, names)
}

fn draw_prototypes(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let pixels = spec.height * spec.width;
    let mut prototypes: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..pixels).map(|_| rng.random::<f64>()).collect())
        .collect();
    let required = 4.0 * spec.noise_sigma * (pixels as f64).sqrt();
    let min_dist = min_pairwise_distance(&prototypes);
    if spec.classes > 1 && min_dist < required {
        let factor = required / min_dist * (1.0 + 1e-9);
        for p in prototypes.iter_mut() {
            p.iter_mut().for_each(|x| *x *= factor);
        }
    }
    prototypes
}

fn min_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut min = f64::INFINITY;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            let d = points[a]
                .iter()
                .zip(&points[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            min = min.min(d);
        }
    }
    min
}
