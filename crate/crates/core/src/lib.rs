pub mod bimodule;
pub mod classify;
pub mod error;
pub mod fock;
pub mod fusion;
pub mod oracle;
pub mod quadrature;
pub mod suites;

pub use error::{Error, Result};
