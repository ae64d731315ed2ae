//! Statistical validation tools.

pub mod dfa;
pub mod roundtrip;

pub use dfa::{default_scales, dfa, dfa_default, DfaResult};
pub use roundtrip::{psd_roundtrip_report, BandError, RoundTripReport};
