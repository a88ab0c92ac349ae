//! Numerical laboratory for flows on the two-torus.
//!
//! Orbits are sorted into five classes (singular, periodic, proper, locally
//! dense, exceptional) on a seed grid, and characterisation theorems of
//! surface flows are evaluated as grid-scale certificates.

pub mod certify;
pub mod circle_map;
pub mod classify;
pub mod construct;
pub mod error;
pub mod field;
pub mod geometry;
pub mod integrate;
pub mod poincare;
pub mod presets;
pub mod report;
pub mod suite;

pub use certify::{certify_all, Certificate, Verdict};
pub use circle_map::{rotation_number, CircleMapSpec, DenjoyWeights, RotationEstimate};
pub use error::{Error, Result};
pub use field::{evaluate, FlowBox, VectorField, VectorFieldSpec};
pub use geometry::{
    cell_index, connected_components, is_coconnected, torus_distance, wrap, CellSet, SurfaceDescriptor, TorusPoint,
    TorusVector,
};
pub use integrate::{integrate, Direction, IntegrationParams, Termination, Trajectory};
