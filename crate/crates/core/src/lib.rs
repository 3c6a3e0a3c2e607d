pub mod assignment;
pub mod bandit;
pub mod bounds;
pub mod environment;
pub mod ip_model;
pub mod simulation;
pub mod solver;
pub mod error;
pub mod harness;
pub mod cli;

pub use error::{Error, Result};
