pub mod bounds;
pub mod cert;
pub mod error;
pub mod io;
pub mod phase;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod sphere;
pub mod stats;
pub mod tail;
pub mod transform;

pub use error::{Error, Result};
