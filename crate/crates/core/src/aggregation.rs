//! Over-the-air analog gradient aggregation.
//!
//! Each selected device scales its gradient so that, after the channel and
//! the receive beamformer, every device's contribution arrives weighted by
//! its dataset size. One gradient entry occupies one channel use: all devices
//! transmit that entry simultaneously, the antenna array observes the
//! superposition plus noise, and the receiver's combine-and-rescale recovers
//! an estimate of Σ K_m·g_m. Transmit power is budgeted so the worst-placed
//! device transmits exactly at the limit and everyone else below it.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::{AggregationParams, Beamformer, DeviceProfile};

/// One device's payload for a round: the local gradient and the power-control
/// scalar v = ‖g‖/√D shared with the server over the control channel.
#[derive(Clone, Debug)]
pub struct GradientMessage {
    pub gradient: Vec<f64>,
    pub normalizer: f64,
}

impl GradientMessage {
    /// Wraps a gradient, computing its normalizer. A zero gradient yields a
    /// zero normalizer; [`ota_aggregate`] treats such devices as silent.
    pub fn new(gradient: Vec<f64>) -> Result<Self> {
        if gradient.is_empty() {
            return Err(Error::parameter("gradient must be nonempty"));
        }
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::parameter("gradient entries must be finite"));
        }
        let d = gradient.len() as f64;
        let normalizer = (gradient.iter().map(|g| g * g).sum::<f64>() / d).sqrt();
        Ok(Self {
            gradient,
            normalizer,
        })
    }
}

/// Receiver output plus the transmit-side quantities of one round.
#[derive(Clone, Debug)]
pub struct AggregateResult {
    /// Estimate of Σ_{m selected} K_m·g_m, one entry per gradient dimension.
    pub estimate: Vec<f64>,
    /// Receive scaling η.
    pub scaling: f64,
    /// Per-device complex transmit weights, aligned with the selected
    /// profiles (zero for silent devices).
    pub weights: Vec<Complex64>,
}

/// Receive scaling η = min_m P0·|fᴴh_m|²/(K_m²·v_m²) over the selected
/// devices.
///
/// The minimum sits at the device that must spend the most power per unit of
/// post-beamforming amplitude; scaling the receiver to that device lets it
/// transmit exactly at the power limit and everyone else under it.
pub fn receive_scaling(
    f: &Beamformer,
    selected: &[DeviceProfile],
    normalizers: &[f64],
    params: &AggregationParams,
) -> Result<f64> {
    if selected.len() != normalizers.len() {
        return Err(Error::parameter(format!(
            "{} profiles but {} normalizers",
            selected.len(),
            normalizers.len()
        )));
    }
    if selected.is_empty() {
        return Err(Error::domain("no device selected"));
    }
    let mut eta = f64::INFINITY;
    for (p, &v) in selected.iter().zip(normalizers) {
        if v.is_nan() || v <= 0.0 {
            return Err(Error::domain(format!(
                "device {}: normalizer must be positive, got {v}",
                p.index
            )));
        }
        let gain = linalg::inner(f.vector(), &p.channel).norm_sqr();
        if gain == 0.0 {
            return Err(Error::domain(format!(
                "device {}: beamforming gain is zero",
                p.index
            )));
        }
        let k = p.dataset_size as f64;
        eta = eta.min(params.power_limit * gain / (k * k * v * v));
    }
    Ok(eta)
}

/// Transmit weights a_m = √η·K_m·v_m/(fᴴh_m).
///
/// With η from [`receive_scaling`] on the same inputs, the device attaining
/// the η-minimum transmits at |a_m|² = P0 exactly and all others strictly
/// below.
pub fn transmit_weights(
    f: &Beamformer,
    eta: f64,
    selected: &[DeviceProfile],
    normalizers: &[f64],
) -> Result<Vec<Complex64>> {
    if selected.len() != normalizers.len() {
        return Err(Error::parameter(format!(
            "{} profiles but {} normalizers",
            selected.len(),
            normalizers.len()
        )));
    }
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::parameter(format!(
            "receive scaling must be positive and finite, got {eta}"
        )));
    }
    let sqrt_eta = eta.sqrt();
    let mut weights = Vec::with_capacity(selected.len());
    for (p, &v) in selected.iter().zip(normalizers) {
        let combined = linalg::inner(f.vector(), &p.channel);
        if combined.norm_sqr() == 0.0 {
            return Err(Error::domain(format!(
                "device {}: beamforming gain is zero",
                p.index
            )));
        }
        let k = p.dataset_size as f64;
        weights.push(sqrt_eta * k * v / combined);
    }
    Ok(weights)
}

/// Simulates one round of over-the-air aggregation.
///
/// For each of the D gradient entries, forms the received antenna vector
/// y_d = Σ_m h_m·a_m·g_m[d]/v_m + n_d with n_d circularly-symmetric complex
/// Gaussian of per-antenna power σ² (no draws when σ² = 0), then recovers
/// Re(fᴴy_d/√η). Devices with a zero gradient transmit nothing and are
/// excluded from the η minimum; if every device is silent the estimate is
/// pure processed noise with η = 1.
pub fn ota_aggregate(
    messages: &[GradientMessage],
    f: &Beamformer,
    selected: &[DeviceProfile],
    params: &AggregationParams,
    rng: &mut impl Rng,
) -> Result<AggregateResult> {
    if messages.len() != selected.len() {
        return Err(Error::parameter(format!(
            "{} messages but {} selected profiles",
            messages.len(),
            selected.len()
        )));
    }
    if selected.is_empty() {
        return Err(Error::domain("no device selected"));
    }
    let dim = messages[0].gradient.len();
    for (msg, p) in messages.iter().zip(selected) {
        if msg.gradient.len() != dim {
            return Err(Error::parameter(format!(
                "device {}: gradient dimension {} does not match {}",
                p.index,
                msg.gradient.len(),
                dim
            )));
        }
    }
    let n = f.dim();
    for p in selected {
        if p.channel.len() != n {
            return Err(Error::parameter(format!(
                "device {}: channel dimension {} does not match beamformer dimension {}",
                p.index,
                p.channel.len(),
                n
            )));
        }
    }

    let active: Vec<usize> = (0..selected.len())
        .filter(|&i| messages[i].normalizer > 0.0)
        .collect();
    let (eta, weights) = if active.is_empty() {
        (1.0, vec![Complex64::new(0.0, 0.0); selected.len()])
    } else {
        let active_profiles = subset_profiles(selected, &active);
        let active_normalizers: Vec<f64> =
            active.iter().map(|&i| messages[i].normalizer).collect();
        let eta = receive_scaling(f, &active_profiles, &active_normalizers, params)?;
        let active_weights = transmit_weights(f, eta, &active_profiles, &active_normalizers)?;
        let mut weights = vec![Complex64::new(0.0, 0.0); selected.len()];
        for (&i, w) in active.iter().zip(active_weights) {
            weights[i] = w;
        }
        (eta, weights)
    };

    // Per-device antenna signature h_m·a_m/v_m; entry d of the received
    // superposition is Σ_m signature_m·g_m[d] + n_d.
    let signatures: Vec<Vec<Complex64>> = active
        .iter()
        .map(|&i| {
            let factor = weights[i] / messages[i].normalizer;
            selected[i].channel.iter().map(|h| h * factor).collect()
        })
        .collect();

    let noise = if params.noise_power > 0.0 {
        Some(
            Normal::new(0.0, (params.noise_power / 2.0).sqrt())
                .map_err(|e| Error::parameter(format!("invalid noise deviation: {e}")))?,
        )
    } else {
        None
    };

    let sqrt_eta = eta.sqrt();
    let mut estimate = Vec::with_capacity(dim);
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for d in 0..dim {
        for yi in y.iter_mut() {
            *yi = Complex64::new(0.0, 0.0);
        }
        for (sig, &i) in signatures.iter().zip(&active) {
            let g = messages[i].gradient[d];
            for (yi, si) in y.iter_mut().zip(sig) {
                *yi += si * g;
            }
        }
        if let Some(normal) = &noise {
            for yi in y.iter_mut() {
                *yi += Complex64::new(normal.sample(rng), normal.sample(rng));
            }
        }
        let combined = linalg::inner(f.vector(), &y);
        estimate.push(combined.re / sqrt_eta);
    }

    Ok(AggregateResult {
        estimate,
        scaling: eta,
        weights,
    })
}

fn subset_profiles(profiles: &[DeviceProfile], indices: &[usize]) -> Vec<DeviceProfile> {
    indices.iter().map(|&i| profiles[i].clone()).collect()
}
