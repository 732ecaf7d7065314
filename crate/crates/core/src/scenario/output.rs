use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::Result;
use crate::surface::SurfaceMesh;

pub const CSV_HEADER: &str = "step,time,mass,energy,grad_w_norm_sq,u_min,u_max,xi,mean_w,area";

/// Marker left in the output directory when a run stops early.
pub const PARTIAL_MARKER: &str = "PARTIAL_OUTPUT";

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

/// Environment variable that overrides the root of relative output paths.
pub const OUTPUT_ROOT_ENV: &str = "EVOCH_OUTPUT_ROOT";

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV line (without newline) for `rec`.
pub fn csv_row(rec: &DiagnosticsRecord) -> String {
    [
        rec.step.to_string(),
        fmt(rec.time),
        fmt(rec.mass),
        fmt(rec.energy),
        fmt(rec.grad_w_norm_sq),
        fmt(rec.u_min),
        fmt(rec.u_max),
        fmt(rec.xi),
        fmt(rec.mean_w),
        fmt(rec.area),
    ]
    .join(",")
}

/// Append-only CSV writer; each row is written in one call and flushed.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(Self { out })
    }

    pub fn write(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        let mut line = csv_row(rec);
        line.push('\n');
        self.out.write_all(line.as_bytes())?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn snapshot_name(step: usize) -> String {
    format!("snapshot_{step:06}.vtk")
}

/// Legacy VTK ASCII polydata with point scalars `u` and `w`.
pub fn write_vtk(path: &Path, mesh: &SurfaceMesh, u: &[f64], w: &[f64], title: &str) -> Result<()> {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    s.push_str(title.lines().next().unwrap_or(""));
    s.push_str("\nASCII\nDATASET POLYDATA\n");
    s.push_str(&format!("POINTS {} double\n", mesh.num_vertices()));
    for x in &mesh.vertices_cur {
        s.push_str(&format!("{} {} {}\n", fmt(x.x), fmt(x.y), fmt(x.z)));
    }
    s.push_str(&format!("POLYGONS {} {}\n", mesh.num_elements(), 4 * mesh.num_elements()));
    for t in &mesh.triangles {
        s.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    s.push_str(&format!("POINT_DATA {}\n", mesh.num_vertices()));
    for (name, values) in [("u", u), ("w", w)] {
        s.push_str(&format!("SCALARS {name} double 1\nLOOKUP_TABLE default\n"));
        for v in values {
            s.push_str(&fmt(*v));
            s.push('\n');
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Resolves a configured output directory against `EVOCH_OUTPUT_ROOT`
/// when it is relative and the variable is set.
pub fn resolve_output_dir(configured: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if configured.is_relative() => PathBuf::from(root).join(configured),
        _ => configured.to_path_buf(),
    }
}
