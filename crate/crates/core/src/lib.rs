//! Evolving-surface finite elements for Cahn-Hilliard equations with a
//! logarithmic potential: an advected model and a density-weighted model.

// NaN must fail the range checks, hence the negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod diagnostics;
pub mod error;
pub mod forms;
pub mod model1;
pub mod model2;
pub mod newton;
pub mod potential;
pub mod quadrature;
pub mod scenario;
pub mod sparse;
pub mod surface;

pub use error::{Error, Result};
pub use diagnostics::{AdmissibilityReport, DiagnosticsRecord, TransportCheck};
pub use forms::FormMatrices;
pub use model1::{ModelKind, PhaseState, Scheme};
pub use model2::WeightedOperators;
pub use newton::{NewtonReport, NewtonSettings};
pub use potential::PotentialParams;
pub use quadrature::QuadraturePolicy;
pub use sparse::SparseMatrix;
pub use surface::{
    build_reference_surface, AdvectiveField, FlowField, FlowPreset, SurfaceMesh, SurfacePreset, Vec3,
};
pub use scenario::{parse_config, run_scenario, RunConfig, Simulation};
