//! Outage capacity bounds for MIMO slow-fading channels, compound max-min
//! capacity, outage common-randomness capacity bounds and a desk-scale
//! simulator of the typicality-binning CR-generation protocol.
//!
//! | module | contents |
//! |--------|----------|
//! | [`hermitian`] | complex matrices, Hermitian eigendecomposition, log-dets, projection onto `Q_P` |
//! | [`channel`] | fading laws, the rate functional, channel map, information density |
//! | [`outage`] | Monte-Carlo / exact outage curves, `l(η)`, `u(η)`, SIMO/SISO capacities |
//! | [`compound`] | max-min capacity of finite state sets, water-filling, ν-nets |
//! | [`concentration`] | closed-form tail bounds and their empirical checks |
//! | [`cr`] | discrete CR-capacity function and outage CR bounds |
//! | [`protocol`] | binning protocol simulator |

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod compound;
pub mod concentration;
pub mod cr;
pub mod error;
pub mod hermitian;
pub mod outage;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
