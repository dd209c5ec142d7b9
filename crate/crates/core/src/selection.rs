//! Device-selection searches and baselines.
//!
//! Two searches minimize [`error_metric_d`] jointly over the participant set
//! and the receive beamformer:
//!
//! * [`gsds`] grows the selected set greedily. It seeds with the strongest
//!   channel and then always adds the device whose channel projects most
//!   strongly onto the span of the already-selected channels: spatially
//!   aligned channels can share one beamformer without dragging down anyone's
//!   combined gain. Every intermediate set is scored with its own beamformer
//!   and the best-scoring step wins.
//! * [`adsbf`] alternates between the two coordinates: beamforming for the
//!   current set (SCA, warm-started), then the exactly-optimal set for that
//!   beamformer via [`optimal_selection_given_f`]. Each half-step can only
//!   lower the objective, so the score trace is non-increasing.
//!
//! [`baseline_select_all`] and [`baseline_top_one`] are the comparison
//! anchors: keep everyone, or keep only the strongest single device.

use std::str::FromStr;

use num_complex::Complex64;

use crate::beamforming::{self, ScaSettings};
use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::{
    error_metric_d, AggregationParams, Beamformer, DeviceProfile, SelectionVector,
};

/// Default stopping threshold on the relative objective change of [`adsbf`].
pub const DEFAULT_ADSBF_EPS: f64 = 1e-6;
/// Default pass budget of [`adsbf`].
pub const DEFAULT_ADSBF_MAX_PASSES: usize = 10;

/// Joint selection-and-beamforming strategies offered by the library.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Gsds,
    Adsbf,
    SelectAll,
    TopOne,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Gsds,
        Method::Adsbf,
        Method::SelectAll,
        Method::TopOne,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Gsds => "gsds",
            Method::Adsbf => "adsbf",
            Method::SelectAll => "select_all",
            Method::TopOne => "top_one",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gsds" => Ok(Method::Gsds),
            "adsbf" => Ok(Method::Adsbf),
            "select_all" => Ok(Method::SelectAll),
            "top_one" => Ok(Method::TopOne),
            other => Err(Error::parameter(format!(
                "unknown method `{other}` (expected gsds, adsbf, select_all, or top_one)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of a joint selection-and-beamforming search.
#[derive(Clone, Debug)]
pub struct SelectionOutcome {
    pub selection: SelectionVector,
    pub beamformer: Beamformer,
    /// Objective of the returned pair; always computed through
    /// [`error_metric_d`] on the full profile list.
    pub d_value: f64,
    pub diagnostics: Diagnostics,
}

/// Per-search records for audits and experiment reporting.
#[derive(Clone, Debug)]
pub enum Diagnostics {
    /// One record per greedy growth step, in addition order.
    Greedy { steps: Vec<GreedyStep> },
    /// Objective trace of the alternating search, starting with the
    /// all-selected initial point. `converged` reports whether the
    /// objective-change rule fired within the pass budget; `degraded` is set
    /// when a solver failure cut the search short (the best earlier iterate
    /// is still returned).
    Alternating {
        d_trace: Vec<f64>,
        converged: bool,
        degraded: bool,
    },
    /// Baselines have nothing to record.
    Baseline,
}

/// One greedy step: which device was added, the metric that chose it (channel
/// norm for the seed step, projection norm afterwards), and the objective of
/// the resulting selection (+∞ if its beamforming solve failed).
#[derive(Clone, Debug)]
pub struct GreedyStep {
    pub device: usize,
    pub metric: f64,
    pub d_value: f64,
}

/// Norm of the orthogonal projection of `candidate` onto
/// span(basis_channels). An empty basis gives 0.
pub fn projection_norm(candidate: &[Complex64], basis_channels: &[Vec<Complex64>]) -> f64 {
    let basis = linalg::orthonormal_basis(basis_channels);
    basis
        .iter()
        .map(|q| linalg::inner(q, candidate).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Index of the device with the largest channel norm, ties to the lowest
/// index. Errors if every channel is zero.
fn strongest_device(profiles: &[DeviceProfile]) -> Result<usize> {
    let mut best = 0usize;
    let mut best_norm = f64::NEG_INFINITY;
    for (i, p) in profiles.iter().enumerate() {
        let nrm = linalg::norm_sq(&p.channel);
        if nrm > best_norm {
            best_norm = nrm;
            best = i;
        }
    }
    if best_norm <= 0.0 {
        return Err(Error::domain("every device has a zero channel"));
    }
    Ok(best)
}

fn subset(profiles: &[DeviceProfile], order: &[usize]) -> Vec<DeviceProfile> {
    order.iter().map(|&i| profiles[i].clone()).collect()
}

/// Greedy spatial device selection.
///
/// Runs one step per device; step records land in [`Diagnostics::Greedy`]. A
/// beamforming failure at one step scores that step +∞ and the sweep
/// continues; only if every step fails does the search itself error. Each
/// step's beamforming solve is warm-started from the previous step's
/// solution. All argmax ties break toward the lowest device index.
pub fn gsds(
    profiles: &[DeviceProfile],
    params: &AggregationParams,
    sca: &ScaSettings,
) -> Result<SelectionOutcome> {
    if profiles.is_empty() {
        return Err(Error::parameter("at least one device is required"));
    }
    let m = profiles.len();
    let mut selected = vec![false; m];
    let mut order: Vec<usize> = Vec::with_capacity(m);
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    // Running squared projection norm of each unselected channel onto the
    // span of the selected ones; updated incrementally as the basis grows.
    let mut acc = vec![0.0f64; m];
    let mut steps: Vec<GreedyStep> = Vec::with_capacity(m);
    let mut beamformers: Vec<Option<Beamformer>> = Vec::with_capacity(m);
    let mut warm: Option<Beamformer> = None;

    for step in 0..m {
        let (device, metric) = if step == 0 {
            let first = strongest_device(profiles)?;
            (first, linalg::norm(&profiles[first].channel))
        } else {
            let mut best = None;
            let mut best_acc = f64::NEG_INFINITY;
            for (i, &acc_i) in acc.iter().enumerate() {
                if !selected[i] && acc_i > best_acc {
                    best_acc = acc_i;
                    best = Some(i);
                }
            }
            let device = best.expect("an unselected device exists before step M");
            (device, best_acc.max(0.0).sqrt())
        };

        selected[device] = true;
        order.push(device);
        if let Some(q) = linalg::orthonormal_residual(&profiles[device].channel, &basis) {
            for (i, acc_i) in acc.iter_mut().enumerate() {
                if !selected[i] {
                    *acc_i += linalg::inner(&q, &profiles[i].channel).norm_sqr();
                }
            }
            basis.push(q);
        }

        let s = SelectionVector::from_mask(selected.clone());
        let (f, d_value) =
            match beamforming::solve_multicast_qos(&subset(profiles, &order), sca, warm.as_ref()) {
                Ok((f, _)) => {
                    let d = error_metric_d(&f, &s, profiles, params)?;
                    warm = Some(f.clone());
                    (Some(f), d)
                }
                Err(e @ Error::Parameter(_)) => return Err(e),
                Err(_) => (None, f64::INFINITY),
            };
        steps.push(GreedyStep {
            device,
            metric,
            d_value,
        });
        beamformers.push(f);
    }

    let mut best_step = 0usize;
    for (i, step) in steps.iter().enumerate() {
        if step.d_value < steps[best_step].d_value {
            best_step = i;
        }
    }
    if !steps[best_step].d_value.is_finite() {
        return Err(Error::solver("beamforming failed at every greedy step"));
    }
    let mut mask = vec![false; m];
    for &device in &order[..=best_step] {
        mask[device] = true;
    }
    Ok(SelectionOutcome {
        selection: SelectionVector::from_mask(mask),
        beamformer: beamformers[best_step]
            .clone()
            .expect("a finite step score implies a beamformer"),
        d_value: steps[best_step].d_value,
        diagnostics: Diagnostics::Greedy { steps },
    })
}

/// Optimal device selection for a fixed beamformer.
///
/// Sorts devices by K_m²/|fᴴh_m|² ascending (ties to the lowest index) and
/// scores every prefix of the sorted order; the best prefix is a global
/// minimizer of the objective over all nonempty selections. Equal-scoring
/// prefixes resolve to the shortest one.
pub fn optimal_selection_given_f(
    f: &Beamformer,
    profiles: &[DeviceProfile],
    params: &AggregationParams,
) -> Result<SelectionVector> {
    if profiles.is_empty() {
        return Err(Error::parameter("at least one device is required"));
    }
    let ratios: Vec<f64> = profiles
        .iter()
        .map(|p| {
            let gain = linalg::inner(f.vector(), &p.channel).norm_sqr();
            let k = p.dataset_size as f64;
            if gain > 0.0 {
                k * k / gain
            } else {
                f64::INFINITY
            }
        })
        .collect();
    if ratios.iter().all(|r| r.is_infinite()) {
        return Err(Error::domain(
            "the beamformer has zero gain on every device",
        ));
    }

    let mut sorted: Vec<usize> = (0..profiles.len()).collect();
    sorted.sort_by(|&i, &j| ratios[i].partial_cmp(&ratios[j]).unwrap().then(i.cmp(&j)));

    let mut current = vec![false; profiles.len()];
    let mut best_d = f64::INFINITY;
    let mut best_len = 1usize;
    for (pos, &device) in sorted.iter().enumerate() {
        current[device] = true;
        let d = error_metric_d(
            f,
            &SelectionVector::from_mask(current.clone()),
            profiles,
            params,
        )?;
        if d < best_d {
            best_d = d;
            best_len = pos + 1;
        }
    }

    let mut mask = vec![false; profiles.len()];
    for &device in &sorted[..best_len] {
        mask[device] = true;
    }
    Ok(SelectionVector::from_mask(mask))
}

/// Alternating device selection and beamforming.
///
/// Starts from the all-selected set with the strongest channel direction as
/// beamformer, then alternates the beamforming solve (warm-started from the
/// previous beamformer) with [`optimal_selection_given_f`] until the
/// objective changes between passes by at most `eps` relative to its size
/// (absolute once the objective is at most 1) or `max_passes` is reached. On
/// a solver failure the best iterate reached so far is returned with the
/// degraded flag set in the diagnostics.
pub fn adsbf(
    profiles: &[DeviceProfile],
    params: &AggregationParams,
    sca: &ScaSettings,
    eps: f64,
    max_passes: usize,
) -> Result<SelectionOutcome> {
    if profiles.is_empty() {
        return Err(Error::parameter("at least one device is required"));
    }
    if max_passes == 0 {
        return Err(Error::parameter("pass budget must be at least 1"));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::parameter(format!(
            "objective-change threshold must be nonnegative and finite, got {eps}"
        )));
    }

    let seed = strongest_device(profiles)?;
    let mut f = Beamformer::from_direction(&profiles[seed].channel)?;
    let mut s = SelectionVector::all_ones(profiles.len());
    let d0 = error_metric_d(&f, &s, profiles, params)?;
    let mut trace = vec![d0];
    let mut best = (f.clone(), s.clone(), d0);
    let mut converged = false;
    let mut degraded = false;

    for _ in 0..max_passes {
        let selected = subset(profiles, &s.selected_indices());
        let f_new = match beamforming::solve_multicast_qos(&selected, sca, Some(&f)) {
            Ok((f_new, _)) => f_new,
            Err(e @ Error::Parameter(_)) => return Err(e),
            Err(_) => {
                degraded = true;
                break;
            }
        };
        let s_new = match optimal_selection_given_f(&f_new, profiles, params) {
            Ok(s_new) => s_new,
            Err(e @ Error::Parameter(_)) => return Err(e),
            Err(_) => {
                degraded = true;
                break;
            }
        };
        let d_new = error_metric_d(&f_new, &s_new, profiles, params)?;
        let d_prev = *trace.last().unwrap();
        trace.push(d_new);
        if d_new < best.2 {
            best = (f_new.clone(), s_new.clone(), d_new);
        }
        f = f_new;
        s = s_new;
        // The change test is relative so that eps means the same thing at
        // every objective scale; below 1 it degrades to an absolute test.
        if (d_prev - d_new).abs() <= eps * d_prev.max(1.0) {
            converged = true;
            break;
        }
    }

    Ok(SelectionOutcome {
        selection: best.1,
        beamformer: best.0,
        d_value: best.2,
        diagnostics: Diagnostics::Alternating {
            d_trace: trace,
            converged,
            degraded,
        },
    })
}

/// Baseline: every device participates; the beamformer still comes from the
/// QoS solve over the full set.
pub fn baseline_select_all(
    profiles: &[DeviceProfile],
    params: &AggregationParams,
    sca: &ScaSettings,
) -> Result<SelectionOutcome> {
    if profiles.is_empty() {
        return Err(Error::parameter("at least one device is required"));
    }
    let s = SelectionVector::all_ones(profiles.len());
    let (f, _) = beamforming::solve_multicast_qos(profiles, sca, None)?;
    let d_value = error_metric_d(&f, &s, profiles, params)?;
    Ok(SelectionOutcome {
        selection: s,
        beamformer: f,
        d_value,
        diagnostics: Diagnostics::Baseline,
    })
}

/// Baseline: only the single device with the strongest channel participates,
/// served by its matched filter f = h/‖h‖.
pub fn baseline_top_one(
    profiles: &[DeviceProfile],
    params: &AggregationParams,
) -> Result<SelectionOutcome> {
    if profiles.is_empty() {
        return Err(Error::parameter("at least one device is required"));
    }
    let device = strongest_device(profiles)?;
    let f = Beamformer::from_direction(&profiles[device].channel)?;
    let s = SelectionVector::single(profiles.len(), device);
    let d_value = error_metric_d(&f, &s, profiles, params)?;
    Ok(SelectionOutcome {
        selection: s,
        beamformer: f,
        d_value,
        diagnostics: Diagnostics::Baseline,
    })
}

/// Dispatches a method by name with its default hyperparameters.
pub fn run_method(
    method: Method,
    profiles: &[DeviceProfile],
    params: &AggregationParams,
    sca: &ScaSettings,
) -> Result<SelectionOutcome> {
    match method {
        Method::Gsds => gsds(profiles, params, sca),
        Method::Adsbf => adsbf(
            profiles,
            params,
            sca,
            DEFAULT_ADSBF_EPS,
            DEFAULT_ADSBF_MAX_PASSES,
        ),
        Method::SelectAll => baseline_select_all(profiles, params, sca),
        Method::TopOne => baseline_top_one(profiles, params),
    }
}
