pub mod assembly;
pub mod elements;
pub mod harness;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod schwarz;
pub mod spd;

pub use error::{Error, Result};
