pub mod cli;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod fem;
pub mod integrators;
pub mod noise;
pub mod observables;
pub mod output;
pub mod problems;

pub use error::{Error, Result};
