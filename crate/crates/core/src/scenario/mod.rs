//! Configuration, runs, output files and the verification battery.

mod config;
mod output;
mod run;
mod verify;

pub use config::{
    legendre, parse_config, random_nodal, reference_mean, InitialCondition, OutputConfig, RunConfig, SurfaceConfig,
};
pub use output::{
    csv_row, resolve_output_dir, snapshot_name, write_vtk, CsvWriter, CSV_HEADER, OUTPUT_ROOT_ENV, PARTIAL_MARKER,
    RESOLVED_CONFIG,
};
pub use run::{drive, run, run_scenario, run_with, RunSummary, Simulation};
pub use verify::{verify_battery, VerifyOutcome, MIN_ORDER, RHO_ODE_DT, RHO_ODE_TOLERANCE};
