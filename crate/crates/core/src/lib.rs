pub mod birkhoff;
pub mod cli;
pub mod error;
pub mod luroth;
pub mod maps;
pub mod numeric;
pub mod observables;
pub mod rng;
pub mod sequences;
pub mod stats;
pub mod tower;
pub mod verify;

pub use error::{Error, Result, Singularity};
pub use sequences::PartitionSequence;
