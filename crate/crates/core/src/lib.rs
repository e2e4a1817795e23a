pub mod cellulation;
pub mod cli;
pub mod error;
pub mod feedforward;
pub mod gates;
pub mod groups;
pub mod kwmaps;
pub mod protocols;
pub mod register;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
