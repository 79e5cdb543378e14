//! Immersed spectral-cell solver for the scalar wave equation in 1D/2D/3D.
//!
//! The physical domain is embedded implicitly (CSG membership queries) in a
//! Cartesian grid of high-order spectral cells with Lagrange bases on GLL
//! nodes. Cells crossed by the domain boundary are integrated with adaptive
//! spacetree quadrature and keep a consistent (non-diagonal) mass block, while
//! uncut cells get diagonal mass by nodal quadrature. Time integration offers
//! explicit central differences, implicit trapezoidal Newmark, leap-frog
//! substepping, and a mixed implicit-explicit Newmark scheme that treats only
//! the cut-cell degrees of freedom implicitly — recovering the large stable
//! time step of the uncut grid without lumping-induced accuracy loss.

pub mod assembly;
pub mod cutcell;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod scenario;
pub mod signals;
pub mod spectra;
pub mod timeint;

pub use error::WaveError;
