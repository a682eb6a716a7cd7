pub mod error;
pub mod features;
pub mod gaze;
pub mod layout;
pub mod linguistics;

pub use error::{Error, Result};
pub mod learner;
pub mod simplifier;
pub mod eval_readability;
pub mod synth;
pub mod service;
pub mod cli;
