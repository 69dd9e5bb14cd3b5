//! Monochromatic reconstruction of matrix-valued potentials for the 2D
//! multi-channel Schrödinger equation `−Δψ + V(x)ψ = Eψ` at fixed energy,
//! from Dirichlet-to-Neumann data or from the scattering amplitude.

pub mod error;
pub mod numerics;
pub mod potentials;
pub mod forward;
pub mod dtn;
pub mod recover;
pub mod rhp;
pub mod io;
pub mod harness;

pub use error::{Error, Result};
