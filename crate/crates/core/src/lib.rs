//! Collision-model, master-equation and quantum-trajectory simulation of
//! normal and giant emitters coupled to a chiral one-dimensional waveguide.
pub mod bin_modes;
pub mod collision;
pub mod delayed;
pub mod dfree;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod master;
pub mod operator;
pub mod stats;
pub mod trajectories;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
