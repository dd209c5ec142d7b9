//! The federated communication round and the multi-round training loop.

use std::time::Instant;

use crate::aggregation::ota_aggregate;
use crate::beamforming::ScaSettings;
use crate::channel::{sample_channels, Geometry, RoundMode};
use crate::error::{Error, Result};
use crate::flsim::data::Dataset;
use crate::flsim::logreg::{accuracy, cross_entropy_loss, local_gradient, BatchSpec, ModelState};
use crate::objective::{build_profiles, AggregationParams, DeviceProfile};
use crate::selection::{run_method, Method, SelectionOutcome};
use crate::streams::StreamFactory;

/// Hyperparameters of one training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub rounds: usize,
    pub batch: BatchSpec,
    pub method: Method,
    pub round_mode: RoundMode,
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::parameter(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.rounds == 0 {
            return Err(Error::parameter("rounds must be at least 1"));
        }
        Ok(())
    }
}

/// What one round reported besides the updated model.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundMetrics {
    /// Objective value of the selection and beamformer used this round.
    pub d_value: f64,
    pub num_selected: usize,
    /// Receive scaling η applied by the aggregator.
    pub scaling: f64,
}

/// One CSV row of a training trace, evaluated after the round's update.
#[derive(Clone, Debug)]
pub struct TraceRow {
    /// 1-based round number.
    pub round: usize,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub d_value: f64,
    pub num_selected: usize,
    /// Wall-clock milliseconds the round took, including the selection solve
    /// on rounds where one ran.
    pub wall_ms: f64,
}

/// Full output of [`run_training`].
#[derive(Clone, Debug)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
    /// Wall-clock milliseconds of each selection/beamforming solve, one entry
    /// per solver invocation (one total in static mode, one per round
    /// otherwise).
    pub solve_times_ms: Vec<f64>,
    pub final_state: ModelState,
}

/// Executes one communication round with an already-solved selection.
///
/// The selected devices compute local gradients on their shards (batched per
/// `config.batch`, with per-device RNG substreams named
/// `batch/round/{round}/device/{m}`), the gradients are aggregated over the
/// air, and the model moves by the learning rate over the selected sample
/// count: w ← w − λ/(Σ K_m)·estimate.
// The argument list is the round protocol itself; a bag struct would only
// rename the coupling.
#[allow(clippy::too_many_arguments)]
pub fn run_round(
    state: &ModelState,
    config: &TrainingConfig,
    profiles: &[DeviceProfile],
    shards: &[Dataset],
    params: &AggregationParams,
    outcome: &SelectionOutcome,
    streams: &StreamFactory,
    round: usize,
    noise_rng: &mut impl rand::Rng,
) -> Result<(ModelState, RoundMetrics)> {
    config.validate()?;
    if profiles.len() != shards.len() {
        return Err(Error::parameter(format!(
            "{} profiles but {} shards",
            profiles.len(),
            shards.len()
        )));
    }
    if outcome.selection.len() != profiles.len() {
        return Err(Error::parameter(format!(
            "selection over {} devices but {} profiles",
            outcome.selection.len(),
            profiles.len()
        )));
    }
    for (p, shard) in profiles.iter().zip(shards) {
        if p.dataset_size != shard.len() {
            return Err(Error::parameter(format!(
                "device {}: profile says {} samples but the shard holds {}",
                p.index,
                p.dataset_size,
                shard.len()
            )));
        }
    }

    let selected = outcome.selection.selected_indices();
    let mut messages = Vec::with_capacity(selected.len());
    for &m in &selected {
        let mut rng = streams.stream(&format!("batch/round/{round}/device/{m}"));
        let message = local_gradient(state, &shards[m], config.batch, &mut rng)
            .map_err(|e| e.with_context(format!("device {m} gradient")))?;
        messages.push(message);
    }
    let selected_profiles: Vec<DeviceProfile> =
        selected.iter().map(|&m| profiles[m].clone()).collect();

    let aggregate = ota_aggregate(
        &messages,
        &outcome.beamformer,
        &selected_profiles,
        params,
        noise_rng,
    )?;

    let selected_samples: usize = selected_profiles.iter().map(|p| p.dataset_size).sum();
    let next = state.step(
        &aggregate.estimate,
        config.learning_rate / selected_samples as f64,
    )?;
    let metrics = RoundMetrics {
        d_value: outcome.d_value,
        num_selected: selected.len(),
        scaling: aggregate.scaling,
    };
    Ok((next, metrics))
}

/// Runs `config.rounds` sequential communication rounds from the zero model
/// and evaluates test loss and accuracy after each.
///
/// Channels come from the factory's `fading` stream (drawn once in static
/// mode, per round from `fading/round/{t}` otherwise) and receiver noise from
/// the `noise` stream, so two runs over the same factory see identical
/// realizations regardless of method.
pub fn run_training(
    config: &TrainingConfig,
    geometry: &Geometry,
    num_antennas: usize,
    shards: &[Dataset],
    test_set: &Dataset,
    params: &AggregationParams,
    streams: &StreamFactory,
) -> Result<TrainingTrace> {
    config.validate()?;
    if shards.is_empty() {
        return Err(Error::parameter("need at least one device shard"));
    }
    if geometry.distances.len() != shards.len() {
        return Err(Error::parameter(format!(
            "{} distances but {} shards",
            geometry.distances.len(),
            shards.len()
        )));
    }
    for (m, shard) in shards.iter().enumerate() {
        if shard.is_empty() {
            return Err(Error::parameter(format!("device {m} has an empty shard")));
        }
        if shard.num_classes() != test_set.num_classes()
            || shard.feature_dim() != test_set.feature_dim()
        {
            return Err(Error::parameter(format!(
                "device {m} shard shape ({} classes, {} features) does not match the test set ({}, {})",
                shard.num_classes(),
                shard.feature_dim(),
                test_set.num_classes(),
                test_set.feature_dim()
            )));
        }
    }
    let sizes: Vec<usize> = shards.iter().map(Dataset::len).collect();
    let sca = ScaSettings::default();

    let mut state = ModelState::zeros(test_set.num_classes(), test_set.feature_dim())?;
    let mut noise_rng = streams.stream("noise");
    let mut rows = Vec::with_capacity(config.rounds);
    let mut solve_times_ms = Vec::new();

    let mut cached: Option<(Vec<DeviceProfile>, SelectionOutcome)> = None;
    for t in 0..config.rounds {
        let round_started = Instant::now();
        let step = (|| -> Result<(ModelState, RoundMetrics)> {
            let fresh = cached.is_none();
            if fresh || config.round_mode == RoundMode::PerRound {
                let stream_name = match config.round_mode {
                    RoundMode::Static => "fading".to_string(),
                    RoundMode::PerRound => format!("fading/round/{t}"),
                };
                let mut rng = streams.stream(&stream_name);
                let mut channels = sample_channels(geometry, num_antennas, &mut rng)?;
                channels.round_mode = config.round_mode;
                let profiles = build_profiles(&channels, &sizes)?;
                let started = Instant::now();
                let outcome = run_method(config.method, &profiles, params, &sca)?;
                solve_times_ms.push(started.elapsed().as_secs_f64() * 1e3);
                cached = Some((profiles, outcome));
            }
            let (profiles, outcome) = cached.as_ref().unwrap();
            run_round(
                &state, config, profiles, shards, params, outcome, streams, t, &mut noise_rng,
            )
        })();
        let (next, metrics) = step.map_err(|e| e.with_context(format!("round {}", t + 1)))?;
        state = next;

        let test_loss = cross_entropy_loss(&state, test_set)?;
        let test_accuracy = accuracy(&state, test_set)?;
        rows.push(TraceRow {
            round: t + 1,
            test_loss,
            test_accuracy,
            d_value: metrics.d_value,
            num_selected: metrics.num_selected,
            wall_ms: round_started.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(TrainingTrace {
        rows,
        solve_times_ms,
        final_state: state,
    })
}
