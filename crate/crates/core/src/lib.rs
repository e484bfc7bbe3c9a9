//! Values of multiprover nonlocal games under classical, nonsignalling and
//! sub-nonsignalling strategies, and a numerical audit of the nonsignalling
//! parallel repetition argument.

mod error;
pub mod audit;
pub mod game;
pub mod gamefile;
pub mod info;
pub mod sampling;
pub mod strategy;
pub mod tensor;
pub mod values;

pub use error::{Error, Result};
