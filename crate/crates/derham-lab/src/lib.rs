//! Lipschitz-de Rham calculus on metric simplicial complexes: exterior
//! algebra of piecewise polynomial forms, Whitney/de Rham maps, mollification
//! and regularization operators, and simplicial cohomology.

pub mod cohomology;
pub mod complex;
pub mod error;
pub mod extension;
pub mod forms;
pub mod homotopy;
pub mod mollify;
pub mod poly;
pub mod quad;
pub mod whitney;

pub use error::{DerhamError, Result};
