//! Simulator and algorithm library for federated learning with over-the-air
//! gradient aggregation.
//!
//! Selected devices transmit analog-modulated gradients simultaneously; the
//! multi-antenna receiver combines the superimposed signal with a unit-norm
//! beamforming vector and rescales it into a weighted gradient sum. Which
//! devices participate and how the receiver combines antennas jointly set the
//! aggregation error, captured by the surrogate objective in [`objective`].
//! Two searches minimize it: a greedy scheme that grows the selected set by
//! spatial alignment ([`selection::gsds`]) and an alternating scheme that
//! swaps between the beamforming subproblem and an exactly solvable selection
//! subproblem ([`selection::adsbf`]). The beamforming subproblem itself is
//! solved by successive convex approximation over small convex QPs
//! ([`beamforming`]).
//!
//! On top of the physical layer, [`flsim`] trains a multinomial logistic
//! regression model over simulated communication rounds, and [`experiment`]
//! runs seed-replicated experiments to CSV/JSON metric files (the `airfed`
//! binary is a thin CLI over it).

pub mod aggregation;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod flsim;
pub mod linalg;
pub mod objective;
pub mod selection;
pub mod streams;

pub use error::{Error, Result};
pub use num_complex::Complex64;
