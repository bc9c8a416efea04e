//! Free boundary flows of Hele-Shaw type, evolved as nonlocal parabolic
//! equations for the interface height.

pub mod analysis;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod fboperator;
pub mod geometry;
pub mod io;

pub use error::{FbError, Result};
