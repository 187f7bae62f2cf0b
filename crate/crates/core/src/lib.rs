//! Discrete Calderón problem on regular lattices.
//!
//! Mesh calculus on dual grids, Dirichlet-to-Neumann maps, numerical checks
//! of discrete Carleman estimates, complex geometrical optics solutions and
//! the Fourier-mode stability pipeline for potentials.

pub mod calculus;
pub mod cgo;
pub mod conjugate;
pub mod dtn;
pub mod error;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod reconstruct;
pub mod sigma;

pub use error::{Error, Result};
pub use lattice::{
    ComplexField, DirectionSet, Field, FrequencyConvention, Lattice, PointSet, ScalarField,
    SpectralField, Value,
};
pub use dtn::{DtnOperator, Potential};
pub use sigma::{Domain, Region, SigmaMetrics, SigmaSet};
