pub mod boolnet;
pub mod config;
pub mod error;
pub mod evolve;
pub mod logic_eval;
pub mod memory_screen;
pub mod signal;
pub mod substrate;

pub use error::{Error, Result};
