//! Labeled datasets, synthetic generation, sharding, and IDX loading.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// A labeled classification dataset with dense real features.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::parameter(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::parameter(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if let Some(first) = features.first() {
            let dim = first.len();
            if dim == 0 {
                return Err(Error::parameter("feature vectors must be nonempty"));
            }
            if features.iter().any(|x| x.len() != dim) {
                return Err(Error::parameter("feature vectors have mixed dimensions"));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::parameter(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Dimension b of the raw feature vectors (without the bias entry).
    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn feature(&self, k: usize) -> &[f64] {
        &self.features[k]
    }

    pub fn label(&self, k: usize) -> usize {
        self.labels[k]
    }

    /// New dataset holding the given samples of this one, in order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&k| k >= self.len()) {
            return Err(Error::parameter(format!(
                "sample index {bad} out of range for {} samples",
                self.len()
            )));
        }
        Ok(Self {
            features: indices.iter().map(|&k| self.features[k].clone()).collect(),
            labels: indices.iter().map(|&k| self.labels[k]).collect(),
            num_classes: self.num_classes,
        })
    }
}

/// Synthetic classification source: one Gaussian cluster per class with unit
/// within-class deviation per coordinate.
///
/// Class means are drawn once at construction, so train and test sets sampled
/// from the same mixture share the class structure. `class_separation` is the
/// expected distance between two class means, in units of the within-class
/// deviation; around 2 to 4 gives a learnable but not instantly saturated
/// problem.
#[derive(Clone, Debug)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(
        num_classes: usize,
        feature_dim: usize,
        class_separation: f64,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::parameter(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if feature_dim == 0 {
            return Err(Error::parameter("feature_dim must be at least 1"));
        }
        if !class_separation.is_finite() || class_separation <= 0.0 {
            return Err(Error::parameter(format!(
                "class_separation must be positive and finite, got {class_separation}"
            )));
        }
        // Mean coordinates ~ N(0, s^2) with s chosen so the expected squared
        // distance between two means is class_separation^2.
        let s = class_separation / (2.0 * feature_dim as f64).sqrt();
        let coord = Normal::new(0.0, s).expect("deviation checked above");
        let means = (0..num_classes)
            .map(|_| (0..feature_dim).map(|_| coord.sample(rng)).collect())
            .collect();
        Ok(Self { means })
    }

    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.means[0].len()
    }

    /// Draws `count` samples with labels cycling 0, 1, ..., C-1, 0, ... so
    /// any count divisible by C is exactly class-balanced.
    pub fn sample(&self, count: usize, rng: &mut impl Rng) -> Result<Dataset> {
        if count == 0 {
            return Err(Error::parameter("sample count must be at least 1"));
        }
        let c = self.num_classes();
        let mut features = Vec::with_capacity(count);
        let mut labels = Vec::with_capacity(count);
        for k in 0..count {
            let y = k % c;
            let x = self.means[y]
                .iter()
                .map(|&mu| mu + rng.sample::<f64, _>(StandardNormal))
                .collect();
            features.push(x);
            labels.push(y);
        }
        Dataset::new(features, labels, c)
    }
}

/// Splits a dataset into `num_devices` disjoint, exactly class-balanced
/// shards of `per_device` samples each.
///
/// `per_device` must be divisible by the class count. Source samples are
/// shuffled within each class before dealing, so shards are exchangeable;
/// leftover samples stay unused.
pub fn partition_iid(
    dataset: &Dataset,
    num_devices: usize,
    per_device: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Dataset>> {
    if num_devices == 0 {
        return Err(Error::parameter("num_devices must be at least 1"));
    }
    if per_device == 0 {
        return Err(Error::parameter("per_device must be at least 1"));
    }
    let c = dataset.num_classes();
    if !per_device.is_multiple_of(c) {
        return Err(Error::parameter(format!(
            "per_device {per_device} is not divisible by the class count {c}"
        )));
    }
    let per_class = per_device / c;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for k in 0..dataset.len() {
        by_class[dataset.label(k)].push(k);
    }
    for (y, pool) in by_class.iter_mut().enumerate() {
        if pool.len() < num_devices * per_class {
            return Err(Error::domain(format!(
                "class {y} has {} samples but {} devices x {per_class} per class are needed",
                pool.len(),
                num_devices
            )));
        }
        pool.shuffle(rng);
    }

    let mut shards = Vec::with_capacity(num_devices);
    for m in 0..num_devices {
        let mut indices = Vec::with_capacity(per_device);
        for pool in &by_class {
            indices.extend_from_slice(&pool[m * per_class..(m + 1) * per_class]);
        }
        shards.push(dataset.subset(&indices)?);
    }
    Ok(shards)
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// Loads an image/label pair of IDX files (the MNIST container format) into
/// a dataset with 10 classes and pixel features scaled to [0, 1].
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;

    let image_magic = read_be_u32(&image_bytes, 0)?;
    if image_magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("image magic {image_magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"),
        });
    }
    let count = read_be_u32(&image_bytes, 4)? as usize;
    let rows = read_be_u32(&image_bytes, 8)? as usize;
    let cols = read_be_u32(&image_bytes, 12)? as usize;
    let dim = rows * cols;
    if dim == 0 {
        return Err(Error::Format {
            offset: 8,
            message: format!("degenerate image shape {rows}x{cols}"),
        });
    }
    let pixels = image_bytes.len() - 16;
    if pixels != count * dim {
        return Err(Error::Format {
            offset: 16,
            message: format!(
                "{pixels} pixel bytes for {count} images of {dim} pixels (expected {})",
                count * dim
            ),
        });
    }

    let label_magic = read_be_u32(&label_bytes, 0)?;
    if label_magic != IDX_LABEL_MAGIC {
        return Err(Error::Format {
            offset: 0,
            message: format!("label magic {label_magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"),
        });
    }
    let label_count = read_be_u32(&label_bytes, 4)? as usize;
    if label_count != count {
        return Err(Error::Format {
            offset: 4,
            message: format!("{label_count} labels for {count} images"),
        });
    }
    if label_bytes.len() - 8 != count {
        return Err(Error::Format {
            offset: 8,
            message: format!(
                "{} label bytes for {count} declared labels",
                label_bytes.len() - 8
            ),
        });
    }

    let mut features = Vec::with_capacity(count);
    for k in 0..count {
        let start = 16 + k * dim;
        features.push(
            image_bytes[start..start + dim]
                .iter()
                .map(|&p| f64::from(p) / 255.0)
                .collect(),
        );
    }
    let mut labels = Vec::with_capacity(count);
    for k in 0..count {
        let y = label_bytes[8 + k];
        if y > 9 {
            return Err(Error::Format {
                offset: (8 + k) as u64,
                message: format!("label value {y}, expected 0 through 9"),
            });
        }
        labels.push(y as usize);
    }
    Dataset::new(features, labels, 10)
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Format {
            offset: bytes.len() as u64,
            message: format!("file truncated, need {end} bytes for a u32 at byte {offset}"),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}
