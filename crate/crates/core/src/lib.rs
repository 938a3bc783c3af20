//! Constrained mean-field dynamics of bistable particles with quenched
//! disorder: particle simulation, exact traveling waves, their linear
//! spectrum, and the rate-independent limit model.

pub mod analysis;
pub mod drive;
pub mod io;
pub mod limit;
pub mod linearized;
pub mod model;
pub mod particle;
pub mod quad;
pub mod spectral;
pub mod wave;

pub use drive::{Drive, DrivePath};
pub use model::{ModelError, ModelParams, Phase};
