//! Seedable synthetic ECG and PPG generator.
//!
//! The pipeline draws a [`randomization::SignalRecipe`], generates beat
//! intervals ([`intervals`]), renders the clean waveform ([`waveform`]),
//! synthesizes noise from a PSD ([`noise`]) and assembles the labeled signal
//! ([`assembly`], [`pipeline`]). [`analysis`] holds DFA and PSD round-trip
//! checks; [`config`] and [`dataset`] drive batch generation.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod dataset;
pub mod error;
pub mod intervals;
pub mod noise;
pub mod pipeline;
pub mod plot;
pub mod randomization;
pub mod rng;
pub mod waveform;

pub use assembly::{LabeledBiosignal, SegLabel};
pub use error::{Error, ErrorKind, Result};
pub use pipeline::{generate_pair, render_recipe, NoiseSources};
pub use randomization::SignalRecipe;
