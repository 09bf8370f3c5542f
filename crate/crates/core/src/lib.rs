//! Goal-oriented space-time adaptive finite elements for the instationary
//! diffusion equation `rho du/dt - div(eps grad u) = f`.
//!
//! The primal problem is discretised by piecewise constant discontinuous
//! Galerkin in time and continuous `Q_p` elements in space; the dual problem
//! by continuous piecewise linear time functions and `Q_q` elements. Both
//! live on a list of space-time slabs, each with its own 1-irregular
//! quadrilateral mesh. A dual weighted residual estimator drives refinement
//! in space and time.

pub mod sparse;
pub mod mesh;
pub mod quadrature;
pub mod fe;
pub mod problem;
pub mod slab;
pub mod goal;
pub mod primal;
pub mod dual;
pub mod estimator;
pub mod adapt;
pub mod params;
pub mod output;
pub mod error;

pub use adapt::{dwr_loop, AdaptParams, DwrOutcome, LoopRecord};
pub use error::DwrError;
pub use params::{parse_parameter_file, DwrConfig};
