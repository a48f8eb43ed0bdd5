//! Bit-accurate simulation of an asynchronous serial (UART/TTL) link carried
//! over an on-off-keyed visible-light channel.
//!
//! The pipeline is `encode -> modulate -> channel -> front end -> decode ->
//! frame detection -> statistics`:
//!
//! * [`serial`] turns bytes into line bits and decodes noisy, oversampled
//!   lines back into bytes, reproducing insertion, deletion and substitution
//!   failure modes.
//! * [`channel`] holds the Lambertian LOS/NLOS gains, OOK modulation, AWGN,
//!   the transimpedance low-pass and the comparator.
//! * [`framing`] builds sync-word framed packets and classifies what comes
//!   out of the receiver.
//! * [`analytics`] provides the closed-form error probabilities and the
//!   substitution-error distributions used to check Monte Carlo output.
//! * [`harness`] runs parameter sweeps and writes CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod analytics;
pub mod channel;
pub mod error;
pub mod framing;
pub mod harness;
pub mod rng;
pub mod sampler;
pub mod serial;
pub mod special;

pub use error::{Error, Result};
