//! Aggregation-error objective: worked examples, an independent oracle, and
//! the structural properties the search algorithms rely on.

use airfed::objective::{error_metric_d, AggregationParams, Beamformer, SelectionVector};
use airfed::{Complex64, Error};
use rand::Rng;

mod common;
use common::{assert_close, d_oracle, params_for, random_profiles, rng};

#[test]
fn single_device_worked_example() {
    // K1 = 5, ||h1||^2 = 2, P0 = 1e-3 W, noise 1e-5 W, matched filter:
    // d = 0 + (1e-5 / (1e-3 * 25)) * (25 / 2) = 5e-3.
    let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    let profile = airfed::objective::DeviceProfile::new(0, 5, h.clone()).unwrap();
    let f = Beamformer::from_direction(&h).unwrap();
    let params = AggregationParams::new(1e-3, 1e-5, 5).unwrap();
    let d = error_metric_d(&f, &SelectionVector::all_ones(1), &[profile], &params).unwrap();
    assert_close(d, 5e-3, 1e-12, "single-device d");
}

#[test]
fn excluded_device_worked_example() {
    // Two unit-K devices, only the first selected, f matched to it:
    // d = (4/4)*1 + noise/(P0*||h1||^2).
    let h1 = vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)];
    let h2 = vec![Complex64::new(0.3, -0.4), Complex64::new(1.0, 0.25)];
    let profiles = vec![
        airfed::objective::DeviceProfile::new(0, 1, h1.clone()).unwrap(),
        airfed::objective::DeviceProfile::new(1, 1, h2).unwrap(),
    ];
    let f = Beamformer::from_direction(&h1).unwrap();
    let params = AggregationParams::new(1e-3, 1e-5, 2).unwrap();
    let s = SelectionVector::from_mask(vec![true, false]);
    let d = error_metric_d(&f, &s, &profiles, &params).unwrap();
    assert_close(d, 1.0 + 1e-5 / (1e-3 * 4.0), 1e-12, "partial-selection d");
}

#[test]
fn matches_independent_oracle_on_random_instances() {
    let mut rng = rng(42);
    for trial in 0..50 {
        let profiles = random_profiles(6, 3, &mut rng);
        let params = params_for(&profiles);
        let f = Beamformer::from_direction(&common::random_channel(3, &mut rng)).unwrap();
        let mask: Vec<bool> = (0..6).map(|i| i == 0 || rng.random_bool(0.5)).collect();
        let s = SelectionVector::from_mask(mask);
        let d = error_metric_d(&f, &s, &profiles, &params).unwrap();
        assert_close(
            d,
            d_oracle(&f, &s, &profiles, &params),
            1e-12,
            &format!("trial {trial}"),
        );
    }
}

#[test]
fn phase_rotation_of_the_beamformer_changes_nothing() {
    let mut rng = rng(43);
    let profiles = random_profiles(5, 4, &mut rng);
    let params = params_for(&profiles);
    let direction = common::random_channel(4, &mut rng);
    let f = Beamformer::from_direction(&direction).unwrap();
    let s = SelectionVector::from_mask(vec![true, false, true, true, false]);
    let d = error_metric_d(&f, &s, &profiles, &params).unwrap();
    for theta in [0.3, 1.2, 2.9, 4.4] {
        let phase = Complex64::from_polar(1.0, theta);
        let rotated: Vec<Complex64> = direction.iter().map(|x| x * phase).collect();
        let fr = Beamformer::from_direction(&rotated).unwrap();
        let dr = error_metric_d(&fr, &s, &profiles, &params).unwrap();
        assert_close(dr, d, 1e-12, &format!("theta {theta}"));
    }
}

#[test]
fn all_selected_drops_the_exclusion_term() {
    let mut rng = rng(44);
    for _ in 0..20 {
        let profiles = random_profiles(7, 3, &mut rng);
        let params = params_for(&profiles);
        let f = Beamformer::from_direction(&common::random_channel(3, &mut rng)).unwrap();
        let s = SelectionVector::all_ones(7);
        let d = error_metric_d(&f, &s, &profiles, &params).unwrap();
        // With nothing excluded, d is exactly the noise term of the oracle.
        let noise_only = d_oracle(&f, &s, &profiles, &params);
        assert_close(d, noise_only, 1e-12, "noise term");
        assert!(d >= 0.0);
    }
}

#[test]
fn boosting_the_worst_selected_gain_never_hurts() {
    let mut rng = rng(45);
    for _ in 0..20 {
        let mut profiles = random_profiles(6, 3, &mut rng);
        let params = params_for(&profiles);
        let f = Beamformer::from_direction(&common::random_channel(3, &mut rng)).unwrap();
        let s = SelectionVector::all_ones(6);
        let d_before = error_metric_d(&f, &s, &profiles, &params).unwrap();

        // Double the channel of the worst-ratio device; the max ratio cannot
        // increase, so neither can d.
        let worst = (0..6)
            .max_by(|&i, &j| {
                let r = |m: usize| {
                    let gain: Complex64 = f
                        .vector()
                        .iter()
                        .zip(&profiles[m].channel)
                        .map(|(fi, hi)| fi.conj() * hi)
                        .sum();
                    (profiles[m].dataset_size as f64).powi(2) / gain.norm_sqr()
                };
                r(i).partial_cmp(&r(j)).unwrap()
            })
            .unwrap();
        for entry in profiles[worst].channel.iter_mut() {
            *entry *= 2.0;
        }
        let d_after = error_metric_d(&f, &s, &profiles, &params).unwrap();
        assert!(
            d_after <= d_before * (1.0 + 1e-12),
            "d rose from {d_before} to {d_after}"
        );
    }
}

#[test]
fn zero_gain_on_a_selected_device_is_an_infinity_sentinel() {
    let h1 = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let h2 = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let profiles = vec![
        airfed::objective::DeviceProfile::new(0, 3, h1.clone()).unwrap(),
        airfed::objective::DeviceProfile::new(1, 3, h2).unwrap(),
    ];
    let params = AggregationParams::new(1e-3, 1e-5, 6).unwrap();
    let f = Beamformer::from_direction(&h1).unwrap();
    let d = error_metric_d(&f, &SelectionVector::all_ones(2), &profiles, &params).unwrap();
    assert!(d.is_infinite());
}

#[test]
fn empty_selection_is_a_domain_error() {
    let mut rng = rng(46);
    let profiles = random_profiles(3, 2, &mut rng);
    let params = params_for(&profiles);
    let f = Beamformer::from_direction(&profiles[0].channel).unwrap();
    let s = SelectionVector::from_mask(vec![false, false, false]);
    match error_metric_d(&f, &s, &profiles, &params) {
        Err(Error::Domain(_)) => {}
        other => panic!("expected a domain error, got {other:?}"),
    }
}

#[test]
fn selection_length_mismatch_is_a_parameter_error() {
    let mut rng = rng(47);
    let profiles = random_profiles(3, 2, &mut rng);
    let params = params_for(&profiles);
    let f = Beamformer::from_direction(&profiles[0].channel).unwrap();
    let s = SelectionVector::all_ones(4);
    match error_metric_d(&f, &s, &profiles, &params) {
        Err(Error::Parameter(_)) => {}
        other => panic!("expected a parameter error, got {other:?}"),
    }
}

#[test]
fn selected_indices_enumerates_ascending() {
    let s = SelectionVector::from_mask(vec![true, false, true]);
    assert_eq!(s.selected_indices(), vec![0, 2]);
    assert_eq!(
        SelectionVector::from_mask(vec![false; 4]).selected_indices(),
        Vec::<usize>::new()
    );
    assert_eq!(
        SelectionVector::all_ones(5).selected_indices(),
        vec![0, 1, 2, 3, 4]
    );
    assert_eq!(SelectionVector::single(4, 2).selected_indices(), vec![2]);
}

#[test]
fn params_reject_nonphysical_values() {
    assert!(AggregationParams::new(0.0, 1e-5, 10).is_err());
    assert!(AggregationParams::new(-1.0, 1e-5, 10).is_err());
    assert!(AggregationParams::new(1e-3, -1e-5, 10).is_err());
    assert!(AggregationParams::new(1e-3, 1e-5, 0).is_err());
    assert!(AggregationParams::new(1e-3, 0.0, 10).is_ok());
}
