pub mod decomp;
pub mod distributed;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lp;
pub mod model;
pub mod rng;
pub mod rounding;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{EdgeVector, Graph};
