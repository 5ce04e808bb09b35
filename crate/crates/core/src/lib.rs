//! Ordinal embedding from triplet comparisons via a rank-space basis.

pub mod basis;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod oracle;
pub mod pipeline;
pub mod points;
pub mod ranks;
pub mod refine;
pub mod seeds;
pub mod soe;

pub use error::{Error, Result};
