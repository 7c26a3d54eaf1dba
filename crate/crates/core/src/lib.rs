//! Dual-discriminator sequence GAN for deceptive-review detection.
//!
//! An LSTM generator is pretrained by maximum likelihood on deceptive
//! reviews and then refined by policy gradient, with rewards from two CNN
//! discriminators estimated by Monte Carlo rollouts. The discriminator `D`
//! (truthful vs. everything else) is the final classifier.

pub mod autodiff;
pub mod checkpoint;
pub mod corpus;
pub mod discriminator;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod optim;
pub mod rollout;
pub mod selfcheck;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
