//! C interface to the joint device-selection and beamforming solvers.
//!
//! The surface is deliberately small: build an immutable problem from raw
//! channel and dataset-size arrays, solve it with one of the four methods,
//! and read the solution back through getters. Handles are opaque pointers
//! owned by this library; every fallible call returns an [`AfStatus`] and
//! writes results through out-pointers only on success.
//!
//! The committed `include/airfed.h` mirrors these declarations for C and C++
//! consumers; `cbindgen.toml` holds the settings to regenerate it.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use airfed::beamforming::ScaSettings;
use airfed::objective::{AggregationParams, DeviceProfile};
use airfed::selection::{run_method, Method, SelectionOutcome};
use airfed::{Complex64, Error};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AfStatus {
    /// The call succeeded and all out-parameters are valid.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument violated a documented precondition.
    InvalidArgument = 2,
    /// The iterative solver failed to produce a usable design.
    SolverFailure = 3,
    /// An unexpected internal failure; the out-parameters are untouched.
    Internal = 4,
}

/// Method code for the greedy spatial device search.
pub const AF_METHOD_GSDS: i32 = 0;
/// Method code for the alternating selection/beamforming optimization.
pub const AF_METHOD_ADSBF: i32 = 1;
/// Method code for the select-all baseline.
pub const AF_METHOD_SELECT_ALL: i32 = 2;
/// Method code for the strongest-device baseline.
pub const AF_METHOD_TOP_ONE: i32 = 3;

/// An immutable solver input: per-device channels and dataset sizes plus the
/// power budget and noise level.
pub struct AfProblem {
    profiles: Vec<DeviceProfile>,
    params: AggregationParams,
}

/// A solved design: the device subset, the unit-norm receive beamformer, and
/// the objective value they achieve.
pub struct AfSolution {
    outcome: SelectionOutcome,
    num_devices: usize,
}

fn status_of(error: &Error) -> AfStatus {
    match error {
        Error::Solver(_) => AfStatus::SolverFailure,
        Error::Context { source, .. } => status_of(source),
        Error::Io(_) => AfStatus::Internal,
        _ => AfStatus::InvalidArgument,
    }
}

fn method_from_code(code: i32) -> Option<Method> {
    match code {
        AF_METHOD_GSDS => Some(Method::Gsds),
        AF_METHOD_ADSBF => Some(Method::Adsbf),
        AF_METHOD_SELECT_ALL => Some(Method::SelectAll),
        AF_METHOD_TOP_ONE => Some(Method::TopOne),
        _ => None,
    }
}

/// Builds a problem from raw arrays.
///
/// `channels` holds `2 * num_devices * num_antennas` doubles: device-major,
/// antenna-minor, each entry as a (real, imaginary) pair. `dataset_sizes`
/// holds `num_devices` positive sample counts. Powers are in watts;
/// `noise_power_w` may be zero for a noiseless model.
///
/// On success writes a handle to `out_problem`; release it with
/// [`af_problem_free`].
///
/// # Safety
/// The pointers must be valid for the lengths stated above, and `out_problem`
/// must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn af_problem_new(
    num_devices: usize,
    num_antennas: usize,
    channels: *const f64,
    dataset_sizes: *const u64,
    power_limit_w: f64,
    noise_power_w: f64,
    out_problem: *mut *mut AfProblem,
) -> AfStatus {
    if channels.is_null() || dataset_sizes.is_null() || out_problem.is_null() {
        return AfStatus::NullArgument;
    }
    if num_devices == 0 || num_antennas == 0 {
        return AfStatus::InvalidArgument;
    }
    let Some(per_device) = num_antennas.checked_mul(2) else {
        return AfStatus::InvalidArgument;
    };
    let Some(total) = num_devices.checked_mul(per_device) else {
        return AfStatus::InvalidArgument;
    };
    let raw_channels = slice::from_raw_parts(channels, total);
    let raw_sizes = slice::from_raw_parts(dataset_sizes, num_devices);

    let build = || -> Result<AfProblem, Error> {
        let mut profiles = Vec::with_capacity(num_devices);
        let mut total_samples = 0usize;
        for (m, &raw_size) in raw_sizes.iter().enumerate() {
            let size = usize::try_from(raw_size)
                .map_err(|_| Error::parameter(format!("device {m}: dataset size overflows")))?;
            total_samples = total_samples
                .checked_add(size)
                .ok_or_else(|| Error::parameter("total sample count overflows"))?;
            let base = m * per_device;
            let channel = (0..num_antennas)
                .map(|n| Complex64::new(raw_channels[base + 2 * n], raw_channels[base + 2 * n + 1]))
                .collect();
            profiles.push(DeviceProfile::new(m, size, channel)?);
        }
        let params = AggregationParams::new(power_limit_w, noise_power_w, total_samples)?;
        Ok(AfProblem { profiles, params })
    };
    match build() {
        Ok(problem) => {
            out_problem.write(Box::into_raw(Box::new(problem)));
            AfStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a problem handle. A null pointer is a no-op.
///
/// # Safety
/// `problem` must be null or a handle from [`af_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn af_problem_free(problem: *mut AfProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Solves a problem with the given method (0 = greedy spatial selection,
/// 1 = alternating optimization, 2 = select-all baseline, 3 = strongest-device
/// baseline) and writes a solution handle to `out_solution`.
///
/// # Safety
/// `problem` must be a live handle from [`af_problem_new`] and `out_solution`
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn af_solve(
    problem: *const AfProblem,
    method: i32,
    out_solution: *mut *mut AfSolution,
) -> AfStatus {
    if problem.is_null() || out_solution.is_null() {
        return AfStatus::NullArgument;
    }
    let Some(method) = method_from_code(method) else {
        return AfStatus::InvalidArgument;
    };
    let problem = &*problem;
    let solved = catch_unwind(AssertUnwindSafe(|| {
        run_method(
            method,
            &problem.profiles,
            &problem.params,
            &ScaSettings::default(),
        )
    }));
    match solved {
        Ok(Ok(outcome)) => {
            let solution = AfSolution {
                outcome,
                num_devices: problem.profiles.len(),
            };
            out_solution.write(Box::into_raw(Box::new(solution)));
            AfStatus::Ok
        }
        Ok(Err(e)) => status_of(&e),
        Err(_) => AfStatus::Internal,
    }
}

/// Reads the objective value of a solution.
///
/// # Safety
/// `solution` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn af_solution_d_value(
    solution: *const AfSolution,
    out: *mut f64,
) -> AfStatus {
    if solution.is_null() || out.is_null() {
        return AfStatus::NullArgument;
    }
    out.write((*solution).outcome.d_value);
    AfStatus::Ok
}

/// Reads how many devices the solution selects.
///
/// # Safety
/// `solution` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn af_solution_num_selected(
    solution: *const AfSolution,
    out: *mut usize,
) -> AfStatus {
    if solution.is_null() || out.is_null() {
        return AfStatus::NullArgument;
    }
    out.write((*solution).outcome.selection.num_selected());
    AfStatus::Ok
}

/// Copies the selection mask (1 = selected) into `out_mask`, which must hold
/// exactly one byte per device of the solved problem.
///
/// # Safety
/// `solution` must be a live handle and `out_mask` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn af_solution_selection(
    solution: *const AfSolution,
    out_mask: *mut u8,
    len: usize,
) -> AfStatus {
    if solution.is_null() || out_mask.is_null() {
        return AfStatus::NullArgument;
    }
    let solution = &*solution;
    if len != solution.num_devices {
        return AfStatus::InvalidArgument;
    }
    let out = slice::from_raw_parts_mut(out_mask, len);
    for (slot, &selected) in out.iter_mut().zip(&solution.outcome.selection.mask) {
        *slot = u8::from(selected);
    }
    AfStatus::Ok
}

/// Copies the unit-norm beamformer into `out`, which must hold two doubles
/// (real, imaginary) per antenna of the solved problem.
///
/// # Safety
/// `solution` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn af_solution_beamformer(
    solution: *const AfSolution,
    out: *mut f64,
    len: usize,
) -> AfStatus {
    if solution.is_null() || out.is_null() {
        return AfStatus::NullArgument;
    }
    let solution = &*solution;
    let vector = solution.outcome.beamformer.vector();
    if len != 2 * vector.len() {
        return AfStatus::InvalidArgument;
    }
    let out = slice::from_raw_parts_mut(out, len);
    for (pair, value) in out.chunks_exact_mut(2).zip(vector) {
        pair[0] = value.re;
        pair[1] = value.im;
    }
    AfStatus::Ok
}

/// Releases a solution handle. A null pointer is a no-op.
///
/// # Safety
/// `solution` must be null or a handle from [`af_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn af_solution_free(solution: *mut AfSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Returns a static, null-terminated description of a status code.
#[no_mangle]
pub extern "C" fn af_status_message(status: i32) -> *const c_char {
    let message: &'static [u8] = match status {
        0 => b"ok\0",
        1 => b"a required pointer argument was null\0",
        2 => b"an argument violated a precondition\0",
        3 => b"the solver failed to produce a usable design\0",
        4 => b"internal failure\0",
        _ => b"unknown status code\0",
    };
    message.as_ptr().cast()
}
