//! Noise-contrastive Bayesian inference for unnormalized exponential-family
//! models, with Pólya–Gamma augmented Gibbs samplers.

pub mod dist;
pub mod error;
pub mod expfam;
pub mod gibbs;
pub mod hscore;
pub mod linalg;
pub mod noise;
pub mod pg;
pub mod rng;
pub mod shrinkage;
pub mod special;
pub mod stats;
pub mod torus;
pub mod tv;

pub use error::{Error, Result};
pub use rng::RandomStream;
