//! Fast short-time Root-MUSIC: subspace frequency estimation for short,
//! noisy vibration frames.

pub mod benchmark;
pub mod config;
pub mod diagnosis;
pub mod error;
pub mod hankel;
pub mod oracle;
pub mod pipeline;
pub mod presets;
pub mod report;
pub mod rooting;
pub mod signal;
pub mod subspace;
pub mod tracking;

pub use error::{Error, Result};
