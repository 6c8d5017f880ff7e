pub mod bench;
pub mod cli;
pub mod cur;
pub mod error;
pub mod io;
pub mod linalg;
pub mod reference;
pub mod solver;
pub mod source;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
