//! Upper and lower bounds for maximum-entropy sampling built on the linx
//! relaxation, with scaling and masking.

pub mod cli;
pub mod diagonal;
pub mod error;
pub mod exact;
mod frank_wolfe;
pub mod gaps;
pub mod instance;
pub mod linx;
pub mod num;
pub mod scaling;

pub use error::{LinxError, Result};
