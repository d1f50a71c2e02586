//! Incremental excitation signal design for nonlinear dynamic system
//! identification, together with the baselines, benchmark process, local
//! model network and experiment harness used to evaluate it.

pub mod error;
pub mod experiment;
pub mod hammerstein;
pub mod lmn;
pub mod optimizer;
pub mod proxy;
pub mod quality;
pub mod reference;
pub mod signal;

pub use error::{Error, Result};
