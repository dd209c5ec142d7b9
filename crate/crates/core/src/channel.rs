//! Device geometry, path loss, and fading channel generation.
//!
//! Devices sit at uniform random distances from the server inside an annulus
//! [r_min, r_max]. Large-scale attenuation follows the COST Hata urban model
//! at desk-relevant distances, and small-scale fading is circularly-symmetric
//! complex Gaussian per antenna with the path loss folded into its variance.

use num_complex::Complex64;
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};

/// How fading evolves across communication rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundMode {
    /// One realization is drawn up front and reused for every round.
    Static,
    /// Fading is redrawn independently each round (distances stay fixed).
    PerRound,
}

/// Device distances from the server, in meters.
#[derive(Clone, Debug)]
pub struct Geometry {
    pub distances: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

/// One fading realization: an N-dimensional complex gain vector per device.
#[derive(Clone, Debug)]
pub struct ChannelSet {
    pub channels: Vec<Vec<Complex64>>,
    pub round_mode: RoundMode,
}

impl ChannelSet {
    pub fn num_devices(&self) -> usize {
        self.channels.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Draws `m` i.i.d. device distances uniformly on [r_min, r_max].
///
/// A degenerate interval (r_min = r_max) is allowed and places every device
/// at exactly that distance.
pub fn sample_distances(m: usize, r_min: f64, r_max: f64, rng: &mut impl Rng) -> Result<Geometry> {
    if m == 0 {
        return Err(Error::parameter("device count must be at least 1"));
    }
    if !r_min.is_finite() || r_min <= 0.0 {
        return Err(Error::parameter(format!(
            "r_min must be a positive finite distance in meters, got {r_min}"
        )));
    }
    if !r_max.is_finite() || r_max < r_min {
        return Err(Error::parameter(format!(
            "r_max must satisfy r_min <= r_max, got r_min={r_min}, r_max={r_max}"
        )));
    }
    let dist = Uniform::new_inclusive(r_min, r_max)
        .map_err(|e| Error::parameter(format!("invalid distance bounds: {e}")))?;
    let distances = (0..m).map(|_| dist.sample(rng)).collect();
    Ok(Geometry {
        distances,
        r_min,
        r_max,
    })
}

/// COST Hata path loss in dB at the given distance in meters.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !distance_m.is_finite() || distance_m <= 0.0 {
        return Err(Error::parameter(format!(
            "distance must be a positive finite length in meters, got {distance_m}"
        )));
    }
    Ok(139.1 + 35.22 * (distance_m / 1000.0).log10())
}

/// Path loss as a linear power ratio (10^(dB/10)).
pub fn path_loss_linear(distance_m: f64) -> Result<f64> {
    Ok(10f64.powf(path_loss_db(distance_m)? / 10.0))
}

/// Draws one fading realization for every device in `geometry`.
///
/// Each channel entry is circularly-symmetric complex Gaussian with variance
/// 1/PL (real and imaginary parts independent, each of variance 1/(2·PL)),
/// where PL is the linear path loss at the device's distance.
pub fn sample_channels(geometry: &Geometry, n: usize, rng: &mut impl Rng) -> Result<ChannelSet> {
    if n == 0 {
        return Err(Error::parameter("antenna count must be at least 1"));
    }
    let mut channels = Vec::with_capacity(geometry.distances.len());
    for &d in &geometry.distances {
        let pl = path_loss_linear(d)?;
        let sd = (1.0 / (2.0 * pl)).sqrt();
        let normal = Normal::new(0.0, sd)
            .map_err(|e| Error::parameter(format!("invalid fading deviation: {e}")))?;
        let h = (0..n)
            .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
            .collect();
        channels.push(h);
    }
    Ok(ChannelSet {
        channels,
        round_mode: RoundMode::Static,
    })
}
