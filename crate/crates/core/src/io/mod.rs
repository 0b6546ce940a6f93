//! File formats.

mod csv;
mod pfm;
mod stack;

pub use csv::*;
pub use pfm::*;
pub use stack::*;
