//! Experiment configuration, replica orchestration, and metrics output.
//!
//! An experiment is a grid of methods x seeds over one scenario. Every job
//! for a given seed derives its randomness from the same named substreams, so
//! all methods face identical device placements, channels, datasets, and
//! receiver noise: traces differ only through the selection and beamforming
//! they produce. Each job writes `{method}_seed{seed}.csv`; a `summary.json`
//! aggregates across seeds.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{sample_distances, Geometry, RoundMode};
use crate::error::{Error, Result};
use crate::flsim::data::{load_idx, partition_iid, Dataset, GaussianMixture};
use crate::flsim::logreg::BatchSpec;
use crate::flsim::trainer::{run_training, TrainingConfig, TrainingTrace};
use crate::objective::AggregationParams;
use crate::selection::Method;
use crate::streams::StreamFactory;

/// Where the training data comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSpec {
    /// Gaussian class clusters generated per seed; needs no files.
    Synthetic {
        classes: usize,
        features: usize,
        samples_per_device: usize,
        test_samples: usize,
        class_sep: f64,
    },
    /// IDX image/label files (the MNIST container format), shared by seeds.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        samples_per_device: usize,
    },
}

/// A fully resolved experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub num_devices: usize,
    pub num_antennas: usize,
    pub power_dbm: f64,
    pub noise_dbm: f64,
    pub r_min_m: f64,
    pub r_max_m: f64,
    pub rounds: usize,
    pub learning_rate: f64,
    pub batch: BatchSpec,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub round_mode: RoundMode,
    pub output_dir: PathBuf,
    pub dataset: DatasetSpec,
}

impl Default for ExperimentConfig {
    /// The reference scenario: 200 devices, 16 antennas, 0 dBm transmit power
    /// budget, -20 dBm receiver noise, devices placed uniformly between 10 m
    /// and 100 m, learning rate 0.05.
    fn default() -> Self {
        Self {
            num_devices: 200,
            num_antennas: 16,
            power_dbm: 0.0,
            noise_dbm: -20.0,
            r_min_m: 10.0,
            r_max_m: 100.0,
            rounds: 100,
            learning_rate: 0.05,
            batch: BatchSpec::Full,
            methods: Method::ALL.to_vec(),
            seeds: vec![1],
            round_mode: RoundMode::Static,
            output_dir: PathBuf::from("out"),
            dataset: DatasetSpec::Synthetic {
                classes: 10,
                features: 20,
                samples_per_device: 30,
                test_samples: 1000,
                class_sep: 2.5,
            },
        }
    }
}

impl ExperimentConfig {
    /// Applies command-line overrides on top of a parsed config.
    pub fn with_overrides(
        mut self,
        out: Option<PathBuf>,
        seeds: Option<Vec<u64>>,
        method: Option<Method>,
    ) -> Result<Self> {
        if let Some(out) = out {
            self.output_dir = out;
        }
        if let Some(seeds) = seeds {
            if seeds.is_empty() {
                return Err(Error::parameter("need at least one seed"));
            }
            let mut seen = Vec::new();
            for &s in &seeds {
                if seen.contains(&s) {
                    return Err(Error::parameter(format!("seed {s} listed twice")));
                }
                seen.push(s);
            }
            self.seeds = seeds;
        }
        if let Some(method) = method {
            self.methods = vec![method];
        }
        Ok(self)
    }
}

/// dBm to watts: P[W] = 10^(dBm/10) · 10⁻³.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

fn config_error(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| config_error(line, key, format!("cannot parse `{value}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(line, key, s))
        .collect()
}

/// Parses a `key = value` document into a config, filling defaults.
///
/// Lines are independent; `#` starts a comment; later assignments win.
/// A `profile = desk` line anywhere rebases the defaults on the desk-scale
/// scenario (20 devices, 8 antennas) before the other keys apply.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let entries = split_entries(text)?;

    let mut config = ExperimentConfig::default();
    for &(line, ref key, ref value) in &entries {
        if key == "profile" {
            match value.as_str() {
                "desk" => {
                    config.num_devices = 20;
                    config.num_antennas = 8;
                }
                other => {
                    return Err(config_error(
                        line,
                        key,
                        format!("unknown profile `{other}` (expected `desk`)"),
                    ))
                }
            }
        }
    }

    // IDX paths accumulate here; they only form a dataset once all four are
    // known, and `dataset = synthetic` keys may interleave freely.
    let mut idx_paths: HashMap<&'static str, (usize, PathBuf)> = HashMap::new();
    let mut dataset_kind: Option<(usize, String)> = None;
    let mut synth = match &config.dataset {
        DatasetSpec::Synthetic {
            classes,
            features,
            samples_per_device,
            test_samples,
            class_sep,
        } => (
            *classes,
            *features,
            *samples_per_device,
            *test_samples,
            *class_sep,
        ),
        DatasetSpec::Idx { .. } => unreachable!("default dataset is synthetic"),
    };

    for &(line, ref key, ref value) in &entries {
        match key.as_str() {
            "profile" => {}
            "M" => config.num_devices = parse_value(line, key, value)?,
            "N" => config.num_antennas = parse_value(line, key, value)?,
            "P0_dbm" => config.power_dbm = parse_value(line, key, value)?,
            "noise_dbm" => config.noise_dbm = parse_value(line, key, value)?,
            "r_min_m" => config.r_min_m = parse_value(line, key, value)?,
            "r_max_m" => config.r_max_m = parse_value(line, key, value)?,
            "T" => config.rounds = parse_value(line, key, value)?,
            "lr" => config.learning_rate = parse_value(line, key, value)?,
            "batch" => {
                config.batch = if value == "full" {
                    BatchSpec::Full
                } else {
                    BatchSpec::Size(parse_value(line, key, value)?)
                }
            }
            "method" => config.methods = vec![parse_value(line, key, value)?],
            "methods" => config.methods = parse_list(line, key, value)?,
            "seeds" => config.seeds = parse_list(line, key, value)?,
            "round_mode" => {
                config.round_mode = match value.as_str() {
                    "static" => RoundMode::Static,
                    "per_round" => RoundMode::PerRound,
                    other => {
                        return Err(config_error(
                            line,
                            key,
                            format!("unknown round mode `{other}` (expected `static` or `per_round`)"),
                        ))
                    }
                }
            }
            "out" => config.output_dir = PathBuf::from(value),
            "dataset" => match value.as_str() {
                "synthetic" | "idx" => dataset_kind = Some((line, value.clone())),
                other => {
                    return Err(config_error(
                        line,
                        key,
                        format!("unknown dataset `{other}` (expected `synthetic` or `idx`)"),
                    ))
                }
            },
            "classes" => synth.0 = parse_value(line, key, value)?,
            "features" => synth.1 = parse_value(line, key, value)?,
            "samples_per_device" => synth.2 = parse_value(line, key, value)?,
            "test_samples" => synth.3 = parse_value(line, key, value)?,
            "class_sep" => synth.4 = parse_value(line, key, value)?,
            "train_images" | "train_labels" | "test_images" | "test_labels" => {
                let slot = match key.as_str() {
                    "train_images" => "train_images",
                    "train_labels" => "train_labels",
                    "test_images" => "test_images",
                    _ => "test_labels",
                };
                idx_paths.insert(slot, (line, PathBuf::from(value)));
            }
            other => return Err(config_error(line, other, "unknown key")),
        }
    }

    let wants_idx = matches!(&dataset_kind, Some((_, kind)) if kind == "idx");
    config.dataset = if wants_idx {
        let (kind_line, _) = dataset_kind.unwrap();
        let mut take = |slot: &str| -> Result<PathBuf> {
            idx_paths
                .remove(slot)
                .map(|(_, path)| path)
                .ok_or_else(|| config_error(kind_line, slot, "required for dataset = idx"))
        };
        DatasetSpec::Idx {
            train_images: take("train_images")?,
            train_labels: take("train_labels")?,
            test_images: take("test_images")?,
            test_labels: take("test_labels")?,
            samples_per_device: synth.2,
        }
    } else {
        if let Some((slot, (line, _))) = idx_paths.into_iter().next() {
            return Err(config_error(line, slot, "IDX paths require dataset = idx"));
        }
        DatasetSpec::Synthetic {
            classes: synth.0,
            features: synth.1,
            samples_per_device: synth.2,
            test_samples: synth.3,
            class_sep: synth.4,
        }
    };

    validate_config(&config, &entries)?;
    Ok(config)
}

fn split_entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_error(
                line,
                content,
                "expected `key = value`".to_string(),
            ));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(config_error(line, "", "empty key"));
        }
        if value.is_empty() {
            return Err(config_error(line, &key, "empty value"));
        }
        entries.push((line, key, value));
    }
    Ok(entries)
}

fn validate_config(config: &ExperimentConfig, entries: &[(usize, String, String)]) -> Result<()> {
    let line_of = |key: &str| {
        entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == key)
            .map_or(0, |(line, _, _)| *line)
    };
    let fail = |key: &str, message: String| Err(config_error(line_of(key), key, message));

    if config.num_devices == 0 {
        return fail("M", "must be at least 1".into());
    }
    if config.num_antennas == 0 {
        return fail("N", "must be at least 1".into());
    }
    if !config.power_dbm.is_finite() {
        return fail("P0_dbm", "must be finite".into());
    }
    if config.noise_dbm.is_nan() || config.noise_dbm == f64::INFINITY {
        return fail("noise_dbm", "must be finite or -inf".into());
    }
    if !config.r_min_m.is_finite() || config.r_min_m <= 0.0 {
        return fail("r_min_m", format!("must be positive, got {}", config.r_min_m));
    }
    if !config.r_max_m.is_finite() || config.r_max_m < config.r_min_m {
        return fail(
            "r_max_m",
            format!(
                "must be finite and at least r_min_m = {}, got {}",
                config.r_min_m, config.r_max_m
            ),
        );
    }
    if config.rounds == 0 {
        return fail("T", "must be at least 1".into());
    }
    if !config.learning_rate.is_finite() || config.learning_rate <= 0.0 {
        return fail(
            "lr",
            format!("must be positive and finite, got {}", config.learning_rate),
        );
    }
    if config.batch == BatchSpec::Size(0) {
        return fail("batch", "batch size must be at least 1".into());
    }
    if config.methods.is_empty() {
        return fail("methods", "need at least one method".into());
    }
    let mut seen = Vec::new();
    for m in &config.methods {
        if seen.contains(m) {
            return fail("methods", format!("method `{m}` listed twice"));
        }
        seen.push(*m);
    }
    if config.seeds.is_empty() {
        return fail("seeds", "need at least one seed".into());
    }
    let mut seen = Vec::new();
    for s in &config.seeds {
        if seen.contains(s) {
            return fail("seeds", format!("seed {s} listed twice"));
        }
        seen.push(*s);
    }
    match &config.dataset {
        DatasetSpec::Synthetic {
            classes,
            features,
            samples_per_device,
            test_samples,
            class_sep,
        } => {
            if *classes < 2 {
                return fail("classes", "need at least 2".into());
            }
            if *features == 0 {
                return fail("features", "must be at least 1".into());
            }
            if *samples_per_device == 0 || samples_per_device % classes != 0 {
                return fail(
                    "samples_per_device",
                    format!("must be a positive multiple of classes = {classes}"),
                );
            }
            if *test_samples == 0 {
                return fail("test_samples", "must be at least 1".into());
            }
            if !class_sep.is_finite() || *class_sep <= 0.0 {
                return fail("class_sep", "must be positive and finite".into());
            }
        }
        DatasetSpec::Idx {
            samples_per_device, ..
        } => {
            if *samples_per_device == 0 || samples_per_device % 10 != 0 {
                return fail(
                    "samples_per_device",
                    "must be a positive multiple of 10 for IDX data".into(),
                );
            }
        }
    }
    Ok(())
}

/// Renders a config as a document [`parse_config`] accepts; the round trip
/// `parse(serialize(c))` reproduces `c`.
pub fn serialize_config(config: &ExperimentConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "M = {}", config.num_devices);
    let _ = writeln!(s, "N = {}", config.num_antennas);
    let _ = writeln!(s, "P0_dbm = {}", config.power_dbm);
    let _ = writeln!(s, "noise_dbm = {}", config.noise_dbm);
    let _ = writeln!(s, "r_min_m = {}", config.r_min_m);
    let _ = writeln!(s, "r_max_m = {}", config.r_max_m);
    let _ = writeln!(s, "T = {}", config.rounds);
    let _ = writeln!(s, "lr = {}", config.learning_rate);
    match config.batch {
        BatchSpec::Full => {
            let _ = writeln!(s, "batch = full");
        }
        BatchSpec::Size(n) => {
            let _ = writeln!(s, "batch = {n}");
        }
    }
    let methods: Vec<&str> = config.methods.iter().map(|m| m.name()).collect();
    let _ = writeln!(s, "methods = {}", methods.join(","));
    let seeds: Vec<String> = config.seeds.iter().map(u64::to_string).collect();
    let _ = writeln!(s, "seeds = {}", seeds.join(","));
    let mode = match config.round_mode {
        RoundMode::Static => "static",
        RoundMode::PerRound => "per_round",
    };
    let _ = writeln!(s, "round_mode = {mode}");
    let _ = writeln!(s, "out = {}", config.output_dir.display());
    match &config.dataset {
        DatasetSpec::Synthetic {
            classes,
            features,
            samples_per_device,
            test_samples,
            class_sep,
        } => {
            let _ = writeln!(s, "dataset = synthetic");
            let _ = writeln!(s, "classes = {classes}");
            let _ = writeln!(s, "features = {features}");
            let _ = writeln!(s, "samples_per_device = {samples_per_device}");
            let _ = writeln!(s, "test_samples = {test_samples}");
            let _ = writeln!(s, "class_sep = {class_sep}");
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            samples_per_device,
        } => {
            let _ = writeln!(s, "dataset = idx");
            let _ = writeln!(s, "samples_per_device = {samples_per_device}");
            let _ = writeln!(s, "train_images = {}", train_images.display());
            let _ = writeln!(s, "train_labels = {}", train_labels.display());
            let _ = writeln!(s, "test_images = {}", test_images.display());
            let _ = writeln!(s, "test_labels = {}", test_labels.display());
        }
    }
    s
}

/// The method-independent ingredients of one seed's replica.
pub struct Instance {
    pub streams: StreamFactory,
    pub geometry: Geometry,
    pub shards: Vec<Dataset>,
    pub test_set: Dataset,
    pub params: AggregationParams,
}

/// Materializes geometry, data shards, and power parameters for a seed.
///
/// Placement comes from the `geometry` substream and data from the `data`
/// substream, so every method sees the same draw. Fading is intentionally not
/// sampled here: it belongs to the per-round training streams.
pub fn build_instance(config: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let streams = StreamFactory::new(seed);
    let geometry = sample_distances(
        config.num_devices,
        config.r_min_m,
        config.r_max_m,
        &mut streams.stream("geometry"),
    )?;

    let mut data_rng = streams.stream("data");
    let (shards, test_set) = match &config.dataset {
        DatasetSpec::Synthetic {
            classes,
            features,
            samples_per_device,
            test_samples,
            class_sep,
        } => {
            let mixture = GaussianMixture::new(*classes, *features, *class_sep, &mut data_rng)?;
            let train = mixture.sample(config.num_devices * samples_per_device, &mut data_rng)?;
            let shards = partition_iid(
                &train,
                config.num_devices,
                *samples_per_device,
                &mut data_rng,
            )?;
            let test_set = mixture.sample(*test_samples, &mut data_rng)?;
            (shards, test_set)
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            samples_per_device,
        } => {
            let train = load_idx(train_images, train_labels)
                .map_err(|e| e.with_context("training data"))?;
            let test_set =
                load_idx(test_images, test_labels).map_err(|e| e.with_context("test data"))?;
            let shards = partition_iid(
                &train,
                config.num_devices,
                *samples_per_device,
                &mut data_rng,
            )?;
            (shards, test_set)
        }
    };

    let total_samples: usize = shards.iter().map(Dataset::len).sum();
    let params = AggregationParams::new(
        dbm_to_watts(config.power_dbm),
        dbm_to_watts(config.noise_dbm),
        total_samples,
    )?;
    Ok(Instance {
        streams,
        geometry,
        shards,
        test_set,
        params,
    })
}

/// Runs one method on one seed's instance.
pub fn run_replica(config: &ExperimentConfig, method: Method, seed: u64) -> Result<TrainingTrace> {
    let instance = build_instance(config, seed)?;
    let training = TrainingConfig {
        learning_rate: config.learning_rate,
        rounds: config.rounds,
        batch: config.batch,
        method,
        round_mode: config.round_mode,
    };
    run_training(
        &training,
        &instance.geometry,
        config.num_antennas,
        &instance.shards,
        &instance.test_set,
        &instance.params,
        &instance.streams,
    )
}

pub const CSV_HEADER: &str = "round,test_loss,test_accuracy,d_value,num_selected,wall_ms";

fn trace_csv(trace: &TrainingTrace) -> String {
    let mut s = String::with_capacity(64 * (trace.rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for row in &trace.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            row.round, row.test_loss, row.test_accuracy, row.d_value, row.num_selected, row.wall_ms
        );
    }
    s
}

/// Per-round cross-seed statistics in the summary file.
#[derive(Debug, Serialize)]
pub struct RoundSummary {
    pub round: usize,
    pub test_loss_mean: f64,
    pub test_loss_ci95: f64,
    pub test_accuracy_mean: f64,
    pub test_accuracy_ci95: f64,
    pub d_value_mean: f64,
    pub num_selected_mean: f64,
}

/// Per-method aggregate in the summary file.
#[derive(Debug, Serialize)]
pub struct MethodSummary {
    /// Mean selected-device count over all rounds and seeds.
    pub mean_selected: f64,
    /// Mean wall time of one selection/beamforming solve, in milliseconds.
    pub mean_solver_wall_ms: f64,
    pub rounds: Vec<RoundSummary>,
}

#[derive(Debug, Serialize)]
pub struct ExperimentSummary {
    pub seeds: Vec<u64>,
    /// Keyed by method name; BTreeMap keeps the file deterministic.
    pub methods: std::collections::BTreeMap<String, MethodSummary>,
}

/// Mean and 95% confidence half-width (normal approximation) of a sample.
fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn summarize(
    config: &ExperimentConfig,
    traces: &HashMap<(Method, u64), TrainingTrace>,
) -> ExperimentSummary {
    let mut methods = std::collections::BTreeMap::new();
    for &method in &config.methods {
        let per_seed: Vec<&TrainingTrace> = config
            .seeds
            .iter()
            .map(|&seed| &traces[&(method, seed)])
            .collect();
        let mut rounds = Vec::with_capacity(config.rounds);
        for t in 0..config.rounds {
            let losses: Vec<f64> = per_seed.iter().map(|tr| tr.rows[t].test_loss).collect();
            let accs: Vec<f64> = per_seed.iter().map(|tr| tr.rows[t].test_accuracy).collect();
            let ds: Vec<f64> = per_seed.iter().map(|tr| tr.rows[t].d_value).collect();
            let counts: Vec<f64> = per_seed
                .iter()
                .map(|tr| tr.rows[t].num_selected as f64)
                .collect();
            let (test_loss_mean, test_loss_ci95) = mean_ci95(&losses);
            let (test_accuracy_mean, test_accuracy_ci95) = mean_ci95(&accs);
            rounds.push(RoundSummary {
                round: t + 1,
                test_loss_mean,
                test_loss_ci95,
                test_accuracy_mean,
                test_accuracy_ci95,
                d_value_mean: mean_ci95(&ds).0,
                num_selected_mean: mean_ci95(&counts).0,
            });
        }
        let all_counts: Vec<f64> = per_seed
            .iter()
            .flat_map(|tr| tr.rows.iter().map(|r| r.num_selected as f64))
            .collect();
        let all_solves: Vec<f64> = per_seed
            .iter()
            .flat_map(|tr| tr.solve_times_ms.iter().copied())
            .collect();
        methods.insert(
            method.name().to_string(),
            MethodSummary {
                mean_selected: mean_ci95(&all_counts).0,
                mean_solver_wall_ms: mean_ci95(&all_solves).0,
                rounds,
            },
        );
    }
    ExperimentSummary {
        seeds: config.seeds.clone(),
        methods,
    }
}

/// Runs the full method x seed grid, writing one CSV per job as it finishes
/// and a cross-seed `summary.json` at the end. Returns the summary.
///
/// Jobs run on the rayon pool; a failed job does not stop the CSVs of
/// completed ones from reaching disk.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    fs::create_dir_all(&config.output_dir)?;

    let jobs: Vec<(Method, u64)> = config
        .methods
        .iter()
        .flat_map(|&m| config.seeds.iter().map(move |&s| (m, s)))
        .collect();

    let results: Vec<Result<((Method, u64), TrainingTrace)>> = jobs
        .par_iter()
        .map(|&(method, seed)| {
            let trace = run_replica(config, method, seed)
                .map_err(|e| e.with_context(format!("method {method}, seed {seed}")))?;
            let path = csv_path(&config.output_dir, method, seed);
            fs::write(&path, trace_csv(&trace))
                .map_err(|e| Error::from(e).with_context(format!("writing {}", path.display())))?;
            Ok(((method, seed), trace))
        })
        .collect();

    let mut traces = HashMap::new();
    for result in results {
        let (job, trace) = result?;
        traces.insert(job, trace);
    }

    let summary = summarize(config, &traces);
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::parameter(format!("summary serialization failed: {e}")))?;
    fs::write(config.output_dir.join("summary.json"), json)?;
    Ok(summary)
}

/// Path of the CSV a (method, seed) job writes.
pub fn csv_path(out_dir: &Path, method: Method, seed: u64) -> PathBuf {
    out_dir.join(format!("{}_seed{}.csv", method.name(), seed))
}
