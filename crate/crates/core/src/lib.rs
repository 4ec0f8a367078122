//! Data-driven controller synthesis for unknown continuous-time LTI plants.
//!
//! A single sampled input-output trajectory is pushed through known linear
//! filters. The resulting data batches feed a linear matrix inequality whose
//! solution yields a dynamic output-feedback stabilizer, or a regulator that
//! embeds an internal model of an exosystem.

pub mod error;
pub mod estimation;
pub mod lti;
pub mod matio;
pub mod numkit;
pub mod par;
pub mod pipeline;
pub mod randsys;
pub mod realization;
pub mod sdp;
pub mod synthesis;

pub use error::{Error, Result};
pub use numkit::{Mat, Vector, C64};
