//! Exact Cantor-series machinery: basic sequences, digit expansions, star
//! discrepancy, the `Theta` construction and Falconer dimension bounds.

pub mod error;
pub mod numeric;
pub mod counterexample;
pub mod dimension;
pub mod equidist;
pub mod expansion;
pub mod io;
pub mod sequences;
pub mod theta;

pub use error::{Error, Result};
pub use numeric::Rational;
