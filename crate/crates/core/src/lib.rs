//! Simulation of inter-operator pilot contamination caused by two
//! reconfigurable intelligent surfaces (RISs) serving different operators
//! at a shared site.
//!
//! Each operator's BS estimates the UE-to-RIS channel of its own RIS while
//! unaware that the other operator's RIS also reflects its UE's pilots.
//! The crate provides:
//!
//! - [`model`]: scenario parameters and seeded i.i.d. Rayleigh channels,
//! - [`config`]: identical and orthogonal RIS pilot configuration sequences,
//! - [`pilot`]: stacked pilot reception, the misspecified and full-model ML
//!   estimators, and the closed-form bias and error covariance,
//! - [`data`]: phase matching, the mismatched MMSE equalizer and its MSE
//!   and high-SNR floor,
//! - [`experiments`]: reproducible sweeps with CSV output, each empirical
//!   column paired with its closed form.

pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod model;
pub mod pilot;
pub mod rng;

pub use config::{
    build_identical, build_orthogonal, verify_sequences, ConfigPair, ConfigSequence, PilotScheme,
};
pub use data::{DataFloor, Mode};
pub use error::{Error, Result};
pub use model::{
    db_to_linear, draw_channels, ChannelRealization, Operator, OperatorChannels, SystemParams,
};
