pub mod cli;
pub mod error;
pub mod ifs;
pub mod numeric;
pub mod recurrence;
pub mod sampling;
pub mod sft;
pub mod thermo;
pub mod xprec;

pub use error::{Error, Result};
pub use sft::{SftSpec, Word};
