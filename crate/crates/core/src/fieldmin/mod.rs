//! Meshes, the discrete GL energy with a fixed potential, its minimizer and
//! decay diagnostics.

pub mod agmon;
pub mod energy;
pub mod io;
pub mod mesh;
pub mod minimize;

pub use agmon::{agmon_decay_profile, outer_distance, DecayTable};
pub use energy::{
    assemble_energy, assemble_gradient, real_dot, BoundarySpec, ComplexField, Condition, CurrentTerm, DataFn,
    Functional, PotentialField,
};
pub use io::{write_field_csv, write_field_meta};
pub use mesh::{prolongate, triangulate_polygon, BoundaryEdge, BoundaryTag, Mesh2D, TaggedPolygon};
pub use minimize::{minimize, MinimizeOptions, MinimizeReport};
