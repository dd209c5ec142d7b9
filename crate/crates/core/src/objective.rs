//! Joint-design data model and the aggregation-error objective.
//!
//! The objective `error_metric_d` scores a (beamformer, selection) pair on a
//! given channel realization. Its two terms trade off against each other:
//! excluding devices discards training data (first term), while keeping a
//! device with a weak combined gain forces every participant to scale its
//! transmission down to that device's power budget, amplifying receiver noise
//! (second term). Both search algorithms in [`crate::selection`] minimize it.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg;

/// One participating device: dataset size and uplink channel.
#[derive(Clone, Debug)]
pub struct DeviceProfile {
    pub index: usize,
    pub dataset_size: usize,
    pub channel: Vec<Complex64>,
}

impl DeviceProfile {
    pub fn new(index: usize, dataset_size: usize, channel: Vec<Complex64>) -> Result<Self> {
        if dataset_size == 0 {
            return Err(Error::parameter(format!(
                "device {index}: dataset size must be at least 1"
            )));
        }
        if channel.is_empty() {
            return Err(Error::parameter(format!(
                "device {index}: channel vector must be nonempty"
            )));
        }
        Ok(Self {
            index,
            dataset_size,
            channel,
        })
    }
}

/// Pairs channels with dataset sizes into device profiles.
pub fn build_profiles(channels: &ChannelSet, dataset_sizes: &[usize]) -> Result<Vec<DeviceProfile>> {
    if channels.num_devices() != dataset_sizes.len() {
        return Err(Error::parameter(format!(
            "{} channels but {} dataset sizes",
            channels.num_devices(),
            dataset_sizes.len()
        )));
    }
    channels
        .channels
        .iter()
        .zip(dataset_sizes)
        .enumerate()
        .map(|(m, (h, &k))| DeviceProfile::new(m, k, h.clone()))
        .collect()
}

/// Binary participation mask for one communication round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionVector {
    pub mask: Vec<bool>,
}

impl SelectionVector {
    pub fn from_mask(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn all_ones(m: usize) -> Self {
        Self {
            mask: vec![true; m],
        }
    }

    /// Selects exactly one device.
    pub fn single(m: usize, index: usize) -> Self {
        let mut mask = vec![false; m];
        mask[index] = true;
        Self { mask }
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// Indices of selected devices in ascending order.
    pub fn selected_indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(m, &on)| on.then_some(m))
            .collect()
    }

    pub fn num_selected(&self) -> usize {
        self.mask.iter().filter(|&&on| on).count()
    }
}

/// Unit-norm receive beamforming vector.
#[derive(Clone, Debug)]
pub struct Beamformer {
    vector: Vec<Complex64>,
}

impl Beamformer {
    /// Wraps a vector that is already unit-norm (within 1e-9).
    pub fn new(vector: Vec<Complex64>) -> Result<Self> {
        let norm = linalg::norm(&vector);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::parameter(format!(
                "beamformer must have unit norm, got {norm}"
            )));
        }
        Ok(Self { vector })
    }

    /// Normalizes an arbitrary nonzero vector into a beamformer.
    pub fn from_direction(direction: &[Complex64]) -> Result<Self> {
        let norm = linalg::norm(direction);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::domain(
                "cannot normalize a zero or non-finite direction",
            ));
        }
        Ok(Self {
            vector: linalg::scaled(direction, 1.0 / norm),
        })
    }

    pub fn vector(&self) -> &[Complex64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Physical-layer constants shared by every round.
#[derive(Clone, Copy, Debug)]
pub struct AggregationParams {
    /// Per-device transmit power limit P0, in watts.
    pub power_limit: f64,
    /// Receiver noise power per antenna, in watts. Zero models a noiseless
    /// channel.
    pub noise_power: f64,
    /// Total number of training samples across all devices, K.
    pub total_samples: usize,
}

impl AggregationParams {
    pub fn new(power_limit: f64, noise_power: f64, total_samples: usize) -> Result<Self> {
        if !power_limit.is_finite() || power_limit <= 0.0 {
            return Err(Error::parameter(format!(
                "power limit must be positive and finite, got {power_limit}"
            )));
        }
        if !noise_power.is_finite() || noise_power < 0.0 {
            return Err(Error::parameter(format!(
                "noise power must be nonnegative and finite, got {noise_power}"
            )));
        }
        if total_samples == 0 {
            return Err(Error::parameter("total sample count must be at least 1"));
        }
        Ok(Self {
            power_limit,
            noise_power,
            total_samples,
        })
    }

    /// Builds params with K taken from the given profiles.
    pub fn for_profiles(
        power_limit: f64,
        noise_power: f64,
        profiles: &[DeviceProfile],
    ) -> Result<Self> {
        Self::new(
            power_limit,
            noise_power,
            profiles.iter().map(|p| p.dataset_size).sum(),
        )
    }
}

/// Aggregation-error surrogate d(f, s; H).
///
/// With K the total sample count, S the selected set and gains
/// g_m = |fᴴh_m|²:
///
/// ```text
/// d = (4/K²)·(Σ_{m∉S} K_m)²  +  σ²/(P0·(Σ_{m∈S} K_m)²) · max_{m∈S} K_m²/g_m
/// ```
///
/// Returns +∞ when a selected device has zero beamforming gain, so search
/// loops can rank such degenerate candidates below every finite one. An empty
/// selection is a domain error (the second term divides by Σ_{m∈S} K_m).
pub fn error_metric_d(
    f: &Beamformer,
    s: &SelectionVector,
    profiles: &[DeviceProfile],
    params: &AggregationParams,
) -> Result<f64> {
    if s.len() != profiles.len() {
        return Err(Error::parameter(format!(
            "selection has {} entries for {} devices",
            s.len(),
            profiles.len()
        )));
    }
    let mut selected_samples = 0usize;
    let mut excluded_samples = 0usize;
    let mut worst_noise_ratio = 0.0f64;
    for (profile, &on) in profiles.iter().zip(&s.mask) {
        if !on {
            excluded_samples += profile.dataset_size;
            continue;
        }
        selected_samples += profile.dataset_size;
        let gain = linalg::inner(f.vector(), &profile.channel).norm_sqr();
        let k = profile.dataset_size as f64;
        let ratio = if gain > 0.0 {
            k * k / gain
        } else {
            f64::INFINITY
        };
        worst_noise_ratio = worst_noise_ratio.max(ratio);
    }
    if selected_samples == 0 {
        return Err(Error::domain("no device selected"));
    }
    let total = params.total_samples as f64;
    let exclusion = 4.0 / (total * total) * (excluded_samples as f64).powi(2);
    let selected = selected_samples as f64;
    let noise =
        params.noise_power / (params.power_limit * selected * selected) * worst_noise_ratio;
    Ok(exclusion + noise)
}
