//! Evolving triangulated surfaces: reference meshes, analytic flow maps and
//! the per-element geometry the finite element forms are built from.

mod flow;
mod mesh;

pub use flow::{AdvectiveField, FlowField, FlowPreset, VelocitySplit};
pub use mesh::{build_reference_surface, ElementGeometry, SurfaceMesh, SurfacePreset, MAX_REFINEMENT};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Tangential projector `I - n n^T`.
pub fn tangential_projector(normal: &Vec3) -> Mat3 {
    Mat3::identity() - normal * normal.transpose()
}
