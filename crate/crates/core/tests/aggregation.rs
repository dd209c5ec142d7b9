//! Over-the-air aggregation: power control identities, the noiseless
//! recovery guarantee, and the noise statistics of the estimate.

use airfed::aggregation::{ota_aggregate, receive_scaling, transmit_weights, GradientMessage};
use airfed::objective::{AggregationParams, Beamformer, DeviceProfile};
use airfed::{linalg, Complex64};
use rand::Rng;

mod common;
use common::{assert_close, random_channel, random_profiles, rng};

fn unit_f(n: usize, rng: &mut impl Rng) -> Beamformer {
    Beamformer::from_direction(&random_channel(n, rng)).unwrap()
}

fn messages_for(
    profiles: &[DeviceProfile],
    dim: usize,
    rng: &mut impl Rng,
) -> Vec<GradientMessage> {
    profiles
        .iter()
        .map(|_| {
            GradientMessage::new((0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
        })
        .collect()
}

#[test]
fn normalizer_is_the_rms_of_the_gradient() {
    let msg = GradientMessage::new(vec![3.0, 4.0]).unwrap();
    assert_close(msg.normalizer, 12.5f64.sqrt(), 1e-15, "rms normalizer");
    let zero = GradientMessage::new(vec![0.0, 0.0, 0.0]).unwrap();
    assert_eq!(zero.normalizer, 0.0);
    assert!(GradientMessage::new(vec![]).is_err());
    assert!(GradientMessage::new(vec![1.0, f64::NAN]).is_err());
    assert!(GradientMessage::new(vec![f64::INFINITY]).is_err());
}

#[test]
fn scaling_single_device_closed_form() {
    let h = vec![Complex64::new(1.0, 1.0), Complex64::new(0.5, -2.0)];
    let profile = DeviceProfile::new(0, 4, h.clone()).unwrap();
    let f = Beamformer::from_direction(&h).unwrap();
    let params = AggregationParams::new(2e-3, 1e-5, 4).unwrap();
    let v = 0.7;
    let eta = receive_scaling(&f, std::slice::from_ref(&profile), &[v], &params).unwrap();
    // Matched filter: |fᴴh|² = ||h||².
    let expected = 2e-3 * linalg::norm_sq(&h) / (16.0 * v * v);
    assert_close(eta, expected, 1e-12, "single-device scaling");

    // A second, identical device does not move the minimum.
    let twin = DeviceProfile::new(1, 4, h).unwrap();
    let eta2 = receive_scaling(&f, &[profile, twin], &[v, v], &params).unwrap();
    assert_close(eta2, eta, 1e-15, "identical twin scaling");
}

#[test]
fn scaling_matches_an_independent_minimum() {
    let mut rng = rng(80);
    for trial in 0..20 {
        let profiles = random_profiles(5, 3, &mut rng);
        let params = common::params_for(&profiles);
        let f = unit_f(3, &mut rng);
        let vs: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let eta = receive_scaling(&f, &profiles, &vs, &params).unwrap();
        let oracle = profiles
            .iter()
            .zip(&vs)
            .map(|(p, &v)| {
                let gain: Complex64 = f
                    .vector()
                    .iter()
                    .zip(&p.channel)
                    .map(|(fi, hi)| fi.conj() * hi)
                    .sum();
                params.power_limit * gain.norm_sqr() / ((p.dataset_size as f64 * v).powi(2))
            })
            .fold(f64::INFINITY, f64::min);
        assert_close(eta, oracle, 1e-12, &format!("trial {trial}"));
    }
}

#[test]
fn worst_device_transmits_exactly_at_the_power_limit() {
    let mut rng = rng(81);
    for trial in 0..20 {
        let profiles = random_profiles(6, 3, &mut rng);
        let params = common::params_for(&profiles);
        let f = unit_f(3, &mut rng);
        let vs: Vec<f64> = (0..6).map(|_| rng.random_range(0.1..2.0)).collect();
        let eta = receive_scaling(&f, &profiles, &vs, &params).unwrap();
        let weights = transmit_weights(&f, eta, &profiles, &vs).unwrap();
        let powers: Vec<f64> = weights.iter().map(|a| a.norm_sqr()).collect();
        let max = powers.iter().cloned().fold(0.0, f64::max);
        assert_close(max, params.power_limit, 1e-9, &format!("trial {trial} max power"));
        for (i, &p) in powers.iter().enumerate() {
            assert!(
                p <= params.power_limit * (1.0 + 1e-9),
                "trial {trial}: device {i} over budget ({p} > {})",
                params.power_limit
            );
        }
    }
}

#[test]
fn doubling_a_channel_quarters_that_transmit_power() {
    // Both devices share K and v; the weaker one pins η and transmits at P0,
    // the one with twice the channel needs only a quarter of the power.
    let h1 = vec![Complex64::new(0.6, -0.3), Complex64::new(0.2, 0.9)];
    let h2: Vec<Complex64> = h1.iter().map(|x| x * 2.0).collect();
    let profiles = vec![
        DeviceProfile::new(0, 5, h1).unwrap(),
        DeviceProfile::new(1, 5, h2).unwrap(),
    ];
    let f = unit_f(2, &mut rng(82));
    let params = AggregationParams::new(1e-3, 1e-5, 10).unwrap();
    let vs = [0.9, 0.9];
    let eta = receive_scaling(&f, &profiles, &vs, &params).unwrap();
    let weights = transmit_weights(&f, eta, &profiles, &vs).unwrap();
    assert_close(weights[0].norm_sqr(), 1e-3, 1e-12, "pinned device at P0");
    assert_close(weights[1].norm_sqr(), 0.25e-3, 1e-12, "strong device at P0/4");
}

#[test]
fn weights_align_every_device_to_its_sample_count() {
    // The defining property of the weights: fᴴh_m·a_m/v_m = √η·K_m, a real
    // positive number, so contributions add coherently.
    let mut rng = rng(83);
    let profiles = random_profiles(5, 4, &mut rng);
    let params = common::params_for(&profiles);
    let f = unit_f(4, &mut rng);
    let vs: Vec<f64> = (0..5).map(|_| rng.random_range(0.2..1.5)).collect();
    let eta = receive_scaling(&f, &profiles, &vs, &params).unwrap();
    let weights = transmit_weights(&f, eta, &profiles, &vs).unwrap();
    for ((p, &v), a) in profiles.iter().zip(&vs).zip(&weights) {
        let coef = linalg::inner(f.vector(), &p.channel) * a / v;
        assert_close(
            coef.re,
            eta.sqrt() * p.dataset_size as f64,
            1e-12,
            &format!("device {} coherence", p.index),
        );
        assert!(coef.im.abs() <= 1e-12 * coef.re.abs());
    }
}

#[test]
fn noiseless_aggregation_recovers_the_weighted_gradient_sum() {
    let mut rng = rng(84);
    for trial in 0..10 {
        let profiles = random_profiles(4, 3, &mut rng);
        let f = unit_f(3, &mut rng);
        let params = AggregationParams::for_profiles(1e-3, 0.0, &profiles).unwrap();
        let dim = 32;
        let messages = messages_for(&profiles, dim, &mut rng);
        let out = ota_aggregate(&messages, &f, &profiles, &params, &mut rng).unwrap();
        for d in 0..dim {
            let want: f64 = profiles
                .iter()
                .zip(&messages)
                .map(|(p, m)| p.dataset_size as f64 * m.gradient[d])
                .sum();
            assert_close(
                out.estimate[d],
                want,
                1e-9,
                &format!("trial {trial} entry {d}"),
            );
        }
    }
}

#[test]
fn single_device_noiseless_estimate_is_its_scaled_gradient() {
    let mut rng = rng(85);
    let profile = DeviceProfile::new(0, 7, random_channel(2, &mut rng)).unwrap();
    let f = Beamformer::from_direction(&profile.channel).unwrap();
    let params = AggregationParams::new(1e-3, 0.0, 7).unwrap();
    let gradient = vec![0.5, -1.25, 3.0];
    let msg = GradientMessage::new(gradient.clone()).unwrap();
    let out = ota_aggregate(
        std::slice::from_ref(&msg),
        &f,
        std::slice::from_ref(&profile),
        &params,
        &mut rng,
    )
    .unwrap();
    for (got, g) in out.estimate.iter().zip(&gradient) {
        assert_close(*got, 7.0 * g, 1e-12, "scaled entry");
    }
}

#[test]
fn estimate_noise_variance_tracks_the_receive_scaling() {
    // Constant gradients make the residual estimate[d] − ΣK·g[d] pure
    // processed noise, distributed N(0, σ²/(2η)).
    let mut rng = rng(86);
    let profiles = random_profiles(3, 3, &mut rng);
    let f = unit_f(3, &mut rng);
    let noise_power = 1e-4;
    let params = AggregationParams::for_profiles(1e-3, noise_power, &profiles).unwrap();
    let dim = 100_000;
    let messages: Vec<GradientMessage> = profiles
        .iter()
        .enumerate()
        .map(|(i, _)| GradientMessage::new(vec![0.25 * (i as f64 + 1.0); dim]).unwrap())
        .collect();
    let vs: Vec<f64> = messages.iter().map(|m| m.normalizer).collect();
    let eta = receive_scaling(&f, &profiles, &vs, &params).unwrap();

    let out = ota_aggregate(&messages, &f, &profiles, &params, &mut rng).unwrap();
    assert_close(out.scaling, eta, 1e-15, "reported scaling");
    let clean: f64 = profiles
        .iter()
        .zip(&messages)
        .map(|(p, m)| p.dataset_size as f64 * m.gradient[0])
        .sum();
    let residuals: Vec<f64> = out.estimate.iter().map(|e| e - clean).collect();
    let mean = residuals.iter().sum::<f64>() / dim as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (dim - 1) as f64;
    let expected = noise_power / (2.0 * eta);
    assert!(mean.abs() <= 3.0 * (expected / dim as f64).sqrt(), "mean {mean}");
    assert_close(var, expected, 0.03, "residual variance");
}

#[test]
fn silent_devices_do_not_pin_the_power_budget() {
    // Device 1 has the weak channel and would set η if it transmitted, but
    // its zero gradient keeps it out of the minimum entirely.
    let strong = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 1.0)];
    let weak: Vec<Complex64> = strong.iter().map(|x| x * 0.01).collect();
    let profiles = vec![
        DeviceProfile::new(0, 3, strong.clone()).unwrap(),
        DeviceProfile::new(1, 3, weak).unwrap(),
    ];
    let f = Beamformer::from_direction(&strong).unwrap();
    let params = AggregationParams::new(1e-3, 0.0, 6).unwrap();
    let gradient = vec![1.0, -2.0];
    let messages = vec![
        GradientMessage::new(gradient.clone()).unwrap(),
        GradientMessage::new(vec![0.0, 0.0]).unwrap(),
    ];
    let out = ota_aggregate(&messages, &f, &profiles, &params, &mut rng(87)).unwrap();

    let solo = receive_scaling(
        &f,
        std::slice::from_ref(&profiles[0]),
        &[messages[0].normalizer],
        &params,
    )
    .unwrap();
    assert_close(out.scaling, solo, 1e-15, "active-only scaling");
    assert_eq!(out.weights[1], Complex64::new(0.0, 0.0));
    for (got, g) in out.estimate.iter().zip(&gradient) {
        assert_close(*got, 3.0 * g, 1e-12, "only the active device contributes");
    }
}

#[test]
fn all_silent_devices_yield_unit_scaling() {
    let mut rng = rng(88);
    let profiles = random_profiles(2, 2, &mut rng);
    let f = unit_f(2, &mut rng);
    let params = AggregationParams::for_profiles(1e-3, 0.0, &profiles).unwrap();
    let messages = vec![
        GradientMessage::new(vec![0.0; 4]).unwrap(),
        GradientMessage::new(vec![0.0; 4]).unwrap(),
    ];
    let out = ota_aggregate(&messages, &f, &profiles, &params, &mut rng).unwrap();
    assert_eq!(out.scaling, 1.0);
    assert!(out.weights.iter().all(|w| *w == Complex64::new(0.0, 0.0)));
    assert!(out.estimate.iter().all(|e| *e == 0.0));
}

#[test]
fn aggregation_is_reproducible_for_a_fixed_stream() {
    let mut setup = rng(89);
    let profiles = random_profiles(3, 2, &mut setup);
    let f = unit_f(2, &mut setup);
    let params = common::params_for(&profiles);
    let messages = messages_for(&profiles, 16, &mut setup);
    let a = ota_aggregate(&messages, &f, &profiles, &params, &mut rng(123)).unwrap();
    let b = ota_aggregate(&messages, &f, &profiles, &params, &mut rng(123)).unwrap();
    assert_eq!(a.estimate, b.estimate);
    let c = ota_aggregate(&messages, &f, &profiles, &params, &mut rng(124)).unwrap();
    assert_ne!(a.estimate, c.estimate);
}

#[test]
fn malformed_calls_are_rejected() {
    let mut rng = rng(90);
    let profiles = random_profiles(2, 2, &mut rng);
    let params = common::params_for(&profiles);
    let f = unit_f(2, &mut rng);

    // Length mismatches.
    assert!(receive_scaling(&f, &profiles, &[1.0], &params).is_err());
    assert!(transmit_weights(&f, 1.0, &profiles, &[1.0]).is_err());
    let one_msg = vec![GradientMessage::new(vec![1.0]).unwrap()];
    assert!(ota_aggregate(&one_msg, &f, &profiles, &params, &mut rng).is_err());

    // Empty selection and nonpositive normalizers.
    assert!(receive_scaling(&f, &[], &[], &params).is_err());
    assert!(receive_scaling(&f, &profiles, &[1.0, 0.0], &params).is_err());
    assert!(receive_scaling(&f, &profiles, &[1.0, -2.0], &params).is_err());
    assert!(transmit_weights(&f, 0.0, &profiles, &[1.0, 1.0]).is_err());
    assert!(transmit_weights(&f, f64::NAN, &profiles, &[1.0, 1.0]).is_err());

    // Beamformer orthogonal to a selected channel.
    let fx = Beamformer::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).unwrap();
    let orth = DeviceProfile::new(0, 2, vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
        .unwrap();
    assert!(receive_scaling(&fx, std::slice::from_ref(&orth), &[1.0], &params).is_err());

    // Mismatched gradient dimensions across devices.
    let uneven = vec![
        GradientMessage::new(vec![1.0, 2.0]).unwrap(),
        GradientMessage::new(vec![1.0]).unwrap(),
    ];
    assert!(ota_aggregate(&uneven, &f, &profiles, &params, &mut rng).is_err());
}
