//! Meta-interpretive learning of datalog programs and of the metarules
//! that bias it.

pub mod error;
pub mod experiment;
pub mod logic;
pub mod syntax;
pub mod resolution;
pub mod subsumption;
pub mod languages;
pub mod learner;
pub mod problems;
pub mod toil;

pub use error::{Error, Result};
