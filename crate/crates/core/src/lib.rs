pub mod cli;
pub mod error;
pub mod eval;
pub mod feature;
pub mod geometry;
pub mod io;
pub mod optim;
pub mod pipeline;
pub mod reconstructor;
pub mod rew;
pub mod rng;
pub mod scenario;
pub mod softlabel;
pub mod weibull;

pub use error::{Error, Result};
