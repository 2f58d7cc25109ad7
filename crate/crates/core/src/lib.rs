//! Exact dynamics of an electron spin coupled to an exchange-coupled spin
//! pair: Hamiltonian assembly, coupled-basis block structure, unitary
//! evolution, Rabi analysis and spin-filtered transition probabilities.


pub mod analysis;
pub mod basis;
pub mod dynamics;

pub mod error;
pub mod filtering;

pub mod linalg;
pub mod model;
pub mod output;
pub mod scenarios;

pub mod spin;
pub mod verify;


pub use error::{Error, Result};
pub use linalg::OperatorMatrix;
pub use model::ModelParams;
pub use spin::Spin;
