//! Backscatter simulation for the 3-D Helmholtz equation and reconstruction
//! of the dielectric coefficient by Carleman-weighted convexification.
//!
//! Pipeline: [`forward`] solves the Lippmann-Schwinger equation and samples
//! the backscattered wave on a measurement plane; [`pipeline`] adds noise,
//! propagates the data to the front face of the domain and builds the
//! boundary functions; [`tail`] and [`convexify`] minimise the two weighted
//! functionals; [`reconstruct`] recovers the coefficient. [`io`] and
//! [`experiment`] provide configuration, persistence and orchestration.

pub mod cg;
pub mod convexify;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod grid;
pub mod io;
pub mod ops;
mod parallel;
pub mod pipeline;
pub mod reconstruct;
pub mod tail;

pub use error::{Error, Result};
