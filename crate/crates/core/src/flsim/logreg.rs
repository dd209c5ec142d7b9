//! Multinomial logistic regression: loss, gradient, and accuracy.
//!
//! The model is a single weight vector of dimension D = C·(b+1), laid out as
//! C consecutive blocks of b feature weights followed by one bias. Scores are
//! computed against the augmented sample u = [x; 1] and turned into class
//! probabilities by a softmax; training minimizes the mean cross-entropy.

use rand::seq::index;
use rand::Rng;

use crate::aggregation::GradientMessage;
use crate::error::{Error, Result};
use crate::flsim::data::Dataset;

/// Flat parameter vector of a C-class logistic regression over b features.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    weights: Vec<f64>,
    num_classes: usize,
    feature_dim: usize,
}

impl ModelState {
    pub fn new(weights: Vec<f64>, num_classes: usize, feature_dim: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::parameter(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if feature_dim == 0 {
            return Err(Error::parameter("feature_dim must be at least 1"));
        }
        let expected = num_classes * (feature_dim + 1);
        if weights.len() != expected {
            return Err(Error::parameter(format!(
                "weight vector has {} entries, expected {expected} for {num_classes} classes x ({feature_dim} features + bias)",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::parameter("weights must be finite"));
        }
        Ok(Self {
            weights,
            num_classes,
            feature_dim,
        })
    }

    /// All-zero model: uniform class probabilities everywhere.
    pub fn zeros(num_classes: usize, feature_dim: usize) -> Result<Self> {
        let dim = num_classes
            .checked_mul(feature_dim + 1)
            .ok_or_else(|| Error::parameter("model dimension overflows usize"))?;
        Self::new(vec![0.0; dim], num_classes, feature_dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Total parameter count D = C·(b+1).
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Gradient-descent update w - scale·direction as a new state.
    pub fn step(&self, direction: &[f64], scale: f64) -> Result<Self> {
        if direction.len() != self.dim() {
            return Err(Error::parameter(format!(
                "step direction has {} entries, expected {}",
                direction.len(),
                self.dim()
            )));
        }
        let weights = self
            .weights
            .iter()
            .zip(direction)
            .map(|(w, g)| w - scale * g)
            .collect();
        Self::new(weights, self.num_classes, self.feature_dim)
    }

    /// Class scores wᶜᵀ[x; 1] for one sample.
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        let b = self.feature_dim;
        (0..self.num_classes)
            .map(|c| {
                let block = &self.weights[c * (b + 1)..(c + 1) * (b + 1)];
                let dot: f64 = block[..b].iter().zip(x).map(|(w, xi)| w * xi).sum();
                dot + block[b]
            })
            .collect()
    }
}

/// How a device picks training samples each round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatchSpec {
    /// Use every local sample (the default protocol).
    Full,
    /// Sample this many local samples uniformly without replacement; clamped
    /// to the shard size.
    Size(usize),
}

fn check_dims(state: &ModelState, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::domain("dataset is empty"));
    }
    if data.feature_dim() != state.feature_dim() {
        return Err(Error::parameter(format!(
            "dataset features have dimension {}, model expects {}",
            data.feature_dim(),
            state.feature_dim()
        )));
    }
    if data.num_classes() != state.num_classes() {
        return Err(Error::parameter(format!(
            "dataset has {} classes, model expects {}",
            data.num_classes(),
            state.num_classes()
        )));
    }
    Ok(())
}

/// log(Σ exp(v)) with the max factored out so large scores cannot overflow.
fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Mean cross-entropy of the dataset under the model, in nats.
///
/// At the all-zero model every class is equally likely and the loss is ln C.
pub fn cross_entropy_loss(state: &ModelState, data: &Dataset) -> Result<f64> {
    check_dims(state, data)?;
    let mut total = 0.0;
    for k in 0..data.len() {
        let logits = state.logits(data.feature(k));
        total += log_sum_exp(&logits) - logits[data.label(k)];
    }
    Ok(total / data.len() as f64)
}

/// Fraction of samples whose highest score matches the label. Score ties go
/// to the lowest class index.
pub fn accuracy(state: &ModelState, data: &Dataset) -> Result<f64> {
    check_dims(state, data)?;
    let mut hits = 0usize;
    for k in 0..data.len() {
        let logits = state.logits(data.feature(k));
        let mut best = 0;
        for (c, &score) in logits.iter().enumerate().skip(1) {
            if score > logits[best] {
                best = c;
            }
        }
        if best == data.label(k) {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Mean cross-entropy gradient over a batch of the local shard.
///
/// For each sample the per-class block receives (softmax_c - [y = c])·[x; 1];
/// the blocks are averaged over the batch and wrapped with the power-control
/// normalizer.
pub fn local_gradient(
    state: &ModelState,
    data: &Dataset,
    batch: BatchSpec,
    rng: &mut impl Rng,
) -> Result<GradientMessage> {
    check_dims(state, data)?;
    let batch_indices: Vec<usize> = match batch {
        BatchSpec::Full => (0..data.len()).collect(),
        BatchSpec::Size(0) => return Err(Error::parameter("batch size must be at least 1")),
        BatchSpec::Size(s) => {
            let s = s.min(data.len());
            let mut picked = index::sample(rng, data.len(), s).into_vec();
            picked.sort_unstable();
            picked
        }
    };

    let b = state.feature_dim();
    let mut grad = vec![0.0; state.dim()];
    for &k in &batch_indices {
        let x = data.feature(k);
        let logits = state.logits(x);
        let lse = log_sum_exp(&logits);
        for c in 0..state.num_classes() {
            let mut coeff = (logits[c] - lse).exp();
            if c == data.label(k) {
                coeff -= 1.0;
            }
            let block = &mut grad[c * (b + 1)..(c + 1) * (b + 1)];
            for (gj, xj) in block[..b].iter_mut().zip(x) {
                *gj += coeff * xj;
            }
            block[b] += coeff;
        }
    }
    let scale = 1.0 / batch_indices.len() as f64;
    for g in grad.iter_mut() {
        *g *= scale;
    }
    GradientMessage::new(grad)
}
