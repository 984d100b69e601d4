//! Fitted finite element solver for two-phase incompressible Navier-Stokes
//! flow in two dimensions, with surface tension and a moving piecewise
//! linear interface.
//!
//! The bulk mesh is fitted to the interface polygon, so density and
//! viscosity are elementwise constant and pressure jumps align with mesh
//! lines. Three Eulerian time stepping schemes and one ALE scheme share the
//! same coupled linear system per step, solved by condensing the interface
//! unknowns and running preconditioned GMRES on the reduced saddle point
//! problem.

pub mod assembly;
pub mod config;
pub mod dense;
pub mod driver;
pub mod error;
pub mod fe;
pub mod geo;
pub mod interface;
pub mod mesh;
pub mod mesher;
pub mod motion;
pub mod msh;
pub mod output;
pub mod quadrature;
pub mod schemes;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
