//! Receive-beamforming synthesis by successive convex approximation.
//!
//! The subproblem being solved: over unit-norm f, minimize the worst
//! noise-amplification ratio max_m K_m²/|fᴴh_m|² across the selected devices.
//! Substituting f̃ = √c·f turns it into a quality-of-service program
//!
//! ```text
//! min ‖f̃‖²   subject to   |f̃ᴴh_m|² ≥ K_m²   for every selected m,
//! ```
//!
//! whose optimum satisfies c = ‖f̃‖² and f = f̃/‖f̃‖. The constraints are
//! nonconvex, so each iteration replaces |f̃ᴴh_m|² with its linearization at
//! the current iterate (a lower bound, keeping every iterate feasible for the
//! true constraints) and solves the resulting convex QP in the 2N real
//! coordinates of f̃. The objective is non-increasing across iterations and
//! the loop stops at a stationary point, not a certified global optimum.

pub mod qp;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::objective::{Beamformer, DeviceProfile};

/// Beamformer before unit normalization; its squared norm is the QoS
/// objective being minimized.
#[derive(Clone, Debug)]
pub struct UnscaledBeamformer {
    pub vector: Vec<Complex64>,
}

impl UnscaledBeamformer {
    pub fn norm_sq(&self) -> f64 {
        linalg::norm_sq(&self.vector)
    }
}

/// Iteration controls for the SCA loop.
#[derive(Clone, Copy, Debug)]
pub struct ScaSettings {
    /// Maximum SCA iterations.
    pub max_iters: usize,
    /// Relative objective-change threshold that stops the loop.
    pub objective_tol: f64,
    /// Absolute tolerance on constraint satisfaction checks.
    pub constraint_tol: f64,
}

impl Default for ScaSettings {
    fn default() -> Self {
        Self {
            max_iters: 50,
            objective_tol: 1e-6,
            constraint_tol: 1e-8,
        }
    }
}

fn validate_profiles(profiles: &[DeviceProfile]) -> Result<usize> {
    if profiles.is_empty() {
        return Err(Error::domain("no device selected"));
    }
    let n = profiles[0].channel.len();
    for p in profiles {
        if p.channel.len() != n {
            return Err(Error::parameter(format!(
                "device {} has channel dimension {}, expected {}",
                p.index,
                p.channel.len(),
                n
            )));
        }
    }
    Ok(n)
}

/// Scales `direction` so every constraint |f̃ᴴh_m|² ≥ K_m² holds, or reports
/// which device is (numerically) orthogonal to it.
fn scale_to_feasibility(
    direction: &[Complex64],
    profiles: &[DeviceProfile],
) -> std::result::Result<UnscaledBeamformer, usize> {
    let mut c = 0.0f64;
    for p in profiles {
        let corr = linalg::inner(direction, &p.channel).norm();
        if corr <= 1e-12 * linalg::norm(&p.channel) * linalg::norm(direction) {
            return Err(p.index);
        }
        c = c.max(p.dataset_size as f64 / corr);
    }
    Ok(UnscaledBeamformer {
        vector: linalg::scaled(direction, c),
    })
}

/// Returns f̃₀ with |f̃₀ᴴh_m|² ≥ K_m² for every profile.
///
/// The constraints are homogeneous of degree two, so any direction with
/// nonzero correlation to every channel becomes feasible once scaled by
/// c = max_m K_m/|dirᴴh_m|. The strongest channel works for almost every
/// instance. If it happens to be orthogonal to some other channel, the
/// fallback mixes an orthonormal basis q_1..q_r of the selected channels with
/// weights c, c², ..., c^r: each channel's correlation with that mix is a
/// nonzero polynomial in c with at most r roots, so at most rank·M of the
/// attempted c values can fail and the bounded sweep always finds a feasible
/// direction (up to floating-point pathologies, which end in a domain error).
pub fn feasible_init(profiles: &[DeviceProfile]) -> Result<UnscaledBeamformer> {
    let _ = validate_profiles(profiles)?;
    for p in profiles {
        if linalg::norm_sq(&p.channel) == 0.0 {
            return Err(Error::domain(format!(
                "device {} has a zero channel; no beamformer can serve it",
                p.index
            )));
        }
    }
    let strongest = profiles
        .iter()
        .max_by(|a, b| {
            linalg::norm_sq(&a.channel)
                .partial_cmp(&linalg::norm_sq(&b.channel))
                .unwrap()
                .then(b.index.cmp(&a.index))
        })
        .unwrap();
    if let Ok(f) = scale_to_feasibility(&strongest.channel, profiles) {
        return Ok(f);
    }

    let channels: Vec<Vec<Complex64>> = profiles.iter().map(|p| p.channel.clone()).collect();
    let basis = linalg::orthonormal_basis(&channels);
    let n = profiles[0].channel.len();
    for c in 1..=(basis.len() * profiles.len() + 1) {
        let mut dir = vec![Complex64::new(0.0, 0.0); n];
        let mut weight = 1.0f64;
        for q in &basis {
            weight *= c as f64;
            for (di, qi) in dir.iter_mut().zip(q) {
                *di += weight * qi;
            }
        }
        let nrm = linalg::norm(&dir);
        if nrm == 0.0 || !nrm.is_finite() {
            continue;
        }
        let dir = linalg::scaled(&dir, 1.0 / nrm);
        if let Ok(f) = scale_to_feasibility(&dir, profiles) {
            return Ok(f);
        }
    }
    Err(Error::domain(
        "no attempted direction is correlated with every selected channel",
    ))
}

/// One SCA iteration: minimizes ‖f̃‖² subject to the QoS constraints
/// linearized at `current`,
///
/// ```text
/// 2·Re(currentᴴh_m·h_mᴴf̃) − |currentᴴh_m|² ≥ K_m²,
/// ```
///
/// which underestimate |f̃ᴴh_m|², so feasibility for the true constraints is
/// preserved. Under the precondition that `current` itself satisfies the
/// linearized set, the minimizer's objective never exceeds the current one;
/// the smaller of the two points is returned so the guarantee also holds
/// under floating-point rounding at a fixed point.
pub fn sca_step(
    current: &UnscaledBeamformer,
    profiles: &[DeviceProfile],
) -> Result<UnscaledBeamformer> {
    let n = validate_profiles(profiles)?;
    if current.vector.len() != n {
        return Err(Error::parameter(format!(
            "beamformer dimension {} does not match channel dimension {}",
            current.vector.len(),
            n
        )));
    }
    let s = linalg::norm(&current.vector);
    if s == 0.0 || !s.is_finite() {
        return Err(Error::domain("current iterate must be nonzero and finite"));
    }

    // Work on x' = x/s so the QP sees O(1) magnitudes regardless of channel
    // scale, and normalize each row for uniform constraint tolerances.
    let mut rows = Vec::with_capacity(profiles.len());
    let mut rhs = Vec::with_capacity(profiles.len());
    for p in profiles {
        let alpha = linalg::inner(&p.channel, &current.vector);
        let k = p.dataset_size as f64;
        let target = k * k + alpha.norm_sqr();
        let mut row = Vec::with_capacity(2 * n);
        for hi in &p.channel {
            row.push(2.0 * s * (alpha * hi).re);
        }
        for hi in &p.channel {
            row.push(2.0 * s * (alpha * hi).im);
        }
        let nrm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            return Err(Error::domain(format!(
                "linearization point is orthogonal to the channel of device {}",
                p.index
            )));
        }
        rows.push(row.iter().map(|v| v / nrm).collect::<Vec<f64>>());
        rhs.push(target / nrm);
    }

    let sol = qp::solve_min_norm(2 * n, &rows, &rhs).map_err(|f| {
        Error::solver(format!(
            "beamforming subproblem did not converge: {}",
            f.message
        ))
    })?;
    let next = UnscaledBeamformer {
        vector: (0..n)
            .map(|i| Complex64::new(s * sol.x[i], s * sol.x[n + i]))
            .collect(),
    };
    if next.norm_sq() > current.norm_sq() {
        return Ok(current.clone());
    }
    Ok(next)
}

/// Solves the QoS beamforming problem for the given (selected) profiles.
///
/// Starts from `warm_start` rescaled to feasibility when one is usable (the
/// rescaled start's objective equals the warm start's own worst ratio, so the
/// final objective can only improve on it), otherwise from [`feasible_init`].
/// Runs [`sca_step`] until the relative objective change drops below
/// `settings.objective_tol` or `settings.max_iters` is reached, then rescales
/// so the worst constraint is exactly tight. Returns the unit-norm beamformer
/// and the objective ‖f̃‖², which satisfy
/// min_m |fᴴh_m|²/K_m² = 1/‖f̃‖² within `settings.constraint_tol`.
pub fn solve_multicast_qos(
    profiles: &[DeviceProfile],
    settings: &ScaSettings,
    warm_start: Option<&Beamformer>,
) -> Result<(Beamformer, f64)> {
    let _ = validate_profiles(profiles)?;
    if settings.max_iters == 0 {
        return Err(Error::parameter("max_iters must be at least 1"));
    }

    let mut current = match warm_start {
        Some(f) => match scale_to_feasibility(f.vector(), profiles) {
            Ok(start) => start,
            Err(_) => feasible_init(profiles)?,
        },
        None => feasible_init(profiles)?,
    };

    let mut objective = current.norm_sq();
    for _ in 0..settings.max_iters {
        current = sca_step(&current, profiles)?;
        let next = current.norm_sq();
        if (objective - next).abs() <= settings.objective_tol * objective {
            break;
        }
        objective = next;
    }

    // Final polish: scale so the worst device meets its target with equality,
    // making the returned objective and the worst ratio agree exactly.
    let mut gamma = 0.0f64;
    for p in profiles {
        let corr = linalg::inner(&current.vector, &p.channel).norm();
        if corr == 0.0 {
            return Err(Error::domain(format!(
                "converged beamformer is orthogonal to the channel of device {}",
                p.index
            )));
        }
        gamma = gamma.max(p.dataset_size as f64 / corr);
    }
    let polished = linalg::scaled(&current.vector, gamma);
    let objective = linalg::norm_sq(&polished);
    Ok((Beamformer::from_direction(&polished)?, objective))
}
