//! Helpers shared by the integration tests.

#![allow(dead_code)] // each test binary uses its own subset of these helpers

use airfed::objective::{AggregationParams, Beamformer, DeviceProfile, SelectionVector};
use airfed::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_channel(n: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..n).map(|_| random_complex(rng)).collect()
}

/// Random profiles with dataset sizes in 1..=40.
pub fn random_profiles(m: usize, n: usize, rng: &mut impl Rng) -> Vec<DeviceProfile> {
    (0..m)
        .map(|i| {
            DeviceProfile::new(i, rng.random_range(1..=40), random_channel(n, rng)).unwrap()
        })
        .collect()
}

pub fn params_for(profiles: &[DeviceProfile]) -> AggregationParams {
    AggregationParams::for_profiles(1e-3, 1e-5, profiles).unwrap()
}

/// Independent re-statement of the objective, kept deliberately close to the
/// defining formula and away from the library's code shape.
pub fn d_oracle(
    f: &Beamformer,
    s: &SelectionVector,
    profiles: &[DeviceProfile],
    params: &AggregationParams,
) -> f64 {
    let k_total: f64 = params.total_samples as f64;
    let k_out: f64 = profiles
        .iter()
        .zip(&s.mask)
        .filter(|(_, &on)| !on)
        .map(|(p, _)| p.dataset_size as f64)
        .sum();
    let k_in: f64 = profiles
        .iter()
        .zip(&s.mask)
        .filter(|(_, &on)| on)
        .map(|(p, _)| p.dataset_size as f64)
        .sum();
    let worst = profiles
        .iter()
        .zip(&s.mask)
        .filter(|(_, &on)| on)
        .map(|(p, _)| {
            let gain: Complex64 = f
                .vector()
                .iter()
                .zip(&p.channel)
                .map(|(fi, hi)| fi.conj() * hi)
                .sum();
            (p.dataset_size as f64).powi(2) / gain.norm_sqr()
        })
        .fold(0.0f64, f64::max);
    4.0 / (k_total * k_total) * k_out * k_out
        + params.noise_power / (params.power_limit * k_in * k_in) * worst
}

/// Exhaustive minimum of d over all nonempty selections for a fixed f.
pub fn brute_force_best_d(
    f: &Beamformer,
    profiles: &[DeviceProfile],
    params: &AggregationParams,
) -> f64 {
    let m = profiles.len();
    assert!(m <= 20, "brute force is exponential in M");
    let mut best = f64::INFINITY;
    for bits in 1u32..(1 << m) {
        let mask: Vec<bool> = (0..m).map(|i| bits & (1 << i) != 0).collect();
        let d = airfed::objective::error_metric_d(
            f,
            &SelectionVector::from_mask(mask),
            profiles,
            params,
        )
        .unwrap();
        best = best.min(d);
    }
    best
}

pub fn assert_close(actual: f64, expected: f64, rel_tol: f64, what: &str) {
    let scale = expected.abs().max(1e-300);
    assert!(
        (actual - expected).abs() <= rel_tol * scale,
        "{what}: got {actual}, expected {expected} (rel tol {rel_tol})"
    );
}
