//! Matryoshka: hiding models in a model.
//!
//! A carrier network and any number of secret networks are generated from a
//! single shared pool of learnable scalars (the [`pool::ParamPool`]) and
//! trained jointly. Publishing the carrier publishes the pool; a colluder
//! holding a few small integers (a [`pool::SecretKey`]) decodes the pool
//! back out of the carrier checkpoint and reassembles the secret models,
//! bit-exactly when the checkpoint was not post-processed and via fused
//! redundant copies when it was.
//!
//! The crate also carries the supporting machinery: a minimal
//! fully-connected network substrate ([`nn`]), the joint training loop
//! ([`trainer`]), memorization-based data stealing ([`stealing`]), the
//! defender-side post-processing used to stress decoding ([`postprocess`]),
//! weight-histogram / optimal-transport analysis ([`analysis`]), and the
//! file formats shared with the command-line tool ([`io`]).

pub mod analysis;
pub mod data;
pub mod error;
pub mod io;
pub mod mat;
pub mod nn;
pub mod pool;
pub mod postprocess;
pub mod rng;
pub mod stealing;
pub mod trainer;

pub use error::{Error, Result};
pub use mat::Mat;
