//! Runs every listing of the guide in `book/` as a doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/system-model.md")]
pub mod system_model {}

#[doc = include_str!("../../../book/src/configurations.md")]
pub mod configurations {}

#[doc = include_str!("../../../book/src/channel-estimation.md")]
pub mod channel_estimation {}

#[doc = include_str!("../../../book/src/data-phase.md")]
pub mod data_phase {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
