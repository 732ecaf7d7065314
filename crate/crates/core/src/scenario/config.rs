use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model1::{ModelKind, Scheme};
use crate::newton::NewtonSettings;
use crate::potential::PotentialParams;
use crate::quadrature::QuadraturePolicy;
use crate::surface::{AdvectiveField, FlowField, FlowPreset, SurfaceMesh, SurfacePreset, MAX_REFINEMENT};

fn default_delta() -> f64 {
    1e-4
}
fn default_refinement() -> u32 {
    3
}
fn default_snapshot_every() -> usize {
    10
}
fn default_csv_name() -> String {
    "diagnostics.csv".into()
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

/// Reference surface and its icosphere refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceConfig {
    UnitSphere {
        #[serde(default = "default_refinement")]
        refinement: u32,
    },
    Sphere {
        radius: f64,
        #[serde(default = "default_refinement")]
        refinement: u32,
    },
    Ellipsoid {
        axes: [f64; 3],
        #[serde(default = "default_refinement")]
        refinement: u32,
    },
}

impl SurfaceConfig {
    pub fn preset(&self) -> SurfacePreset {
        match *self {
            SurfaceConfig::UnitSphere { .. } => SurfacePreset::UnitSphere,
            SurfaceConfig::Sphere { radius, .. } => SurfacePreset::Sphere { radius },
            SurfaceConfig::Ellipsoid { axes, .. } => SurfacePreset::Ellipsoid { axes },
        }
    }

    pub fn refinement(&self) -> u32 {
        match *self {
            SurfaceConfig::UnitSphere { refinement }
            | SurfaceConfig::Sphere { refinement, .. }
            | SurfaceConfig::Ellipsoid { refinement, .. } => refinement,
        }
    }

    pub fn with_refinement(mut self, level: u32) -> Self {
        match &mut self {
            SurfaceConfig::UnitSphere { refinement }
            | SurfaceConfig::Sphere { refinement, .. }
            | SurfaceConfig::Ellipsoid { refinement, .. } => *refinement = level,
        }
        self
    }
}

/// Initial order parameter on Γ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Constant { value: f64 },
    /// I.i.d. uniform values in `(−amplitude, amplitude)`, then shifted so
    /// that the discrete mean equals `mean` exactly.
    RandomUniform { seed: u64, amplitude: f64, mean: f64 },
    /// `mean + amplitude · P_degree(z/|x|)` with `P_l` the Legendre polynomial.
    HarmonicPatch { mean: f64, amplitude: f64, degree: u32 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Constant { value: 0.0 }
    }
}

/// Uniform sample in `[0, 1)` from the top 53 bits of one draw.
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Legendre polynomial `P_l(x)` by the three-term recurrence.
pub fn legendre(l: u32, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Discrete mean `∫u / |Γ₀|` of nodal values on the reference mesh.
pub fn reference_mean(mesh0: &SurfaceMesh, values: &[f64]) -> f64 {
    let mut integral = 0.0;
    for (tri, geo) in mesh0.triangles.iter().zip(&mesh0.elements) {
        integral += geo.reference_area / 3.0 * tri.iter().map(|&k| values[k]).sum::<f64>();
    }
    integral / mesh0.reference_area()
}

/// Uniform random nodal vector in `(−amplitude, amplitude)` drawn from a
/// ChaCha8 stream seeded with `seed`.
pub fn random_nodal(n: usize, seed: u64, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| amplitude * (2.0 * unit_uniform(&mut rng) - 1.0)).collect()
}

impl InitialCondition {
    /// Nodal values on the reference mesh.
    pub fn sample(&self, mesh0: &SurfaceMesh) -> Vec<f64> {
        match *self {
            InitialCondition::Constant { value } => vec![value; mesh0.num_vertices()],
            InitialCondition::RandomUniform { seed, amplitude, mean } => {
                let mut values = random_nodal(mesh0.num_vertices(), seed, amplitude);
                // A second pass removes the rounding left by the first.
                for _ in 0..2 {
                    let shift = mean - reference_mean(mesh0, &values);
                    values.iter_mut().for_each(|v| *v += shift);
                }
                values
            }
            InitialCondition::HarmonicPatch { mean, amplitude, degree } => {
                mesh0.interpolate_reference(|p| mean + amplitude * legendre(degree, p.z / p.norm()))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bounded = |key: &str, v: f64| {
            if v.is_finite() && v.abs() <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(key, v, "must lie in [-1, 1]"))
            }
        };
        match *self {
            InitialCondition::Constant { value } => bounded("u0.value", value),
            InitialCondition::RandomUniform { amplitude, mean, .. }
            | InitialCondition::HarmonicPatch { amplitude, mean, .. } => {
                bounded("u0.mean", mean)?;
                if !(0.0..=1.0).contains(&amplitude) {
                    return Err(Error::config("u0.amplitude", amplitude, "must lie in [0, 1]"));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_output_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_csv_name")]
    pub csv_name: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_output_dir(),
            snapshot_every: default_snapshot_every(),
            csv_name: default_csv_name(),
        }
    }
}

/// A complete scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub theta: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Number of halving stages used to reach `delta` on the first step.
    #[serde(default)]
    pub delta_continuation: u32,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub quadrature: QuadraturePolicy,
    pub surface: SurfaceConfig,
    pub flow: FlowPreset,
    #[serde(default)]
    pub advective: AdvectiveField,
    #[serde(default)]
    pub u0: InitialCondition,
    #[serde(default)]
    pub newton: NewtonSettings,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        PotentialParams::new(self.theta, self.delta)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("dt", self.dt, "must be positive and finite"));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::config("T", self.t_final, "must be nonnegative and finite"));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(Error::config("T", self.t_final, "must be an integer multiple of dt"));
        }
        if self.output.snapshot_every < 1 {
            return Err(Error::config("output.snapshot_every", self.output.snapshot_every, "must be at least 1"));
        }
        if self.output.csv_name.is_empty() || self.output.csv_name.contains(['/', '\\']) {
            return Err(Error::config("output.csv_name", &self.output.csv_name, "must be a plain file name"));
        }
        if self.surface.refinement() > MAX_REFINEMENT {
            return Err(Error::config("surface.refinement", self.surface.refinement(), "must be at most 7"));
        }
        self.flow.validate()?;
        if !(self.newton.tolerance > 0.0 && self.newton.tolerance.is_finite()) {
            return Err(Error::config("newton.tolerance", self.newton.tolerance, "must be positive and finite"));
        }
        if self.newton.max_iterations < 1 {
            return Err(Error::config("newton.max_iterations", self.newton.max_iterations, "must be at least 1"));
        }
        if self.model == ModelKind::Weighted && !self.advective.is_zero() {
            return Err(Error::config(
                "advective.preset",
                self.advective.name(),
                "the weighted model has no separate advective velocity; only `zero` is allowed",
            ));
        }
        if let AdvectiveField::RigidRotation { omega } = self.advective {
            if omega.iter().any(|w| !w.is_finite()) {
                return Err(Error::config("advective.omega", format!("{omega:?}"), "must be finite"));
            }
        }
        self.u0.validate()
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Time of step `n`.
    pub fn time_of(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    pub fn potential(&self) -> PotentialParams {
        PotentialParams::new(self.theta, self.delta).expect("validated")
    }

    pub fn flow_field(&self) -> FlowField {
        FlowField::new(self.flow).with_advective(self.advective)
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::build_reference_surface;

    const MINIMAL: &str = r#"
model = "advected"
theta = 0.3
T = 1.0
dt = 0.01
[surface]
preset = "unit_sphere"
[flow]
preset = "static"
"#;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.delta, 1e-4);
        assert_eq!(cfg.scheme, Scheme::ConvexSplit);
        assert_eq!(cfg.quadrature, QuadraturePolicy::Midpoint3);
        assert_eq!(cfg.advective, AdvectiveField::Zero {});
        assert_eq!(cfg.u0, InitialCondition::Constant { value: 0.0 });
        assert_eq!(cfg.surface.refinement(), 3);
        assert_eq!(cfg.n_steps(), 100);
    }

    #[test]
    fn theta_out_of_range() {
        let err = parse(&MINIMAL.replace("theta = 0.3", "theta = 1.5")).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn weighted_model_rejects_advection() {
        let text = MINIMAL.replace("\"advected\"", "\"weighted\"") + "[advective]\npreset = \"rigid_rotation\"\nomega = [0.0, 0.0, 1.0]\n";
        let err = parse(&text).unwrap_err();
        assert!(err.to_string().contains("advective"), "{err}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        assert!(parse(&(MINIMAL.to_string() + "thetta = 0.2\n")).is_err());
        assert!(parse(&MINIMAL.replace("dt = 0.01", "dt = 0.01\nthetta = 0.2")).is_err());
        let text = MINIMAL.replace("preset = \"static\"", "preset = \"static\"\nspeed = 2.0");
        assert!(parse(&text).is_err());
        let text = MINIMAL.replace("preset = \"unit_sphere\"", "preset = \"torus\"");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn t_must_be_multiple_of_dt() {
        assert!(parse(&MINIMAL.replace("T = 1.0", "T = 1.05")).is_ok());
        assert!(parse(&MINIMAL.replace("T = 1.0", "T = 1.003")).is_err());
        assert!(parse(&MINIMAL.replace("T = 1.0", "T = 0.0")).unwrap().n_steps() == 0);
    }

    #[test]
    fn round_trip_full_config() {
        let text = r#"
model = "advected"
theta = 0.45
delta = 0.001
delta_continuation = 2
T = 0.2
dt = 0.01
scheme = "fully_implicit"
quadrature = "gauss6"
[surface]
preset = "ellipsoid"
axes = [1.0, 0.8, 1.3]
refinement = 2
[flow]
preset = "translate_rotate"
velocity = [0.1, 0.0, -0.2]
angular_speed = 0.7
[advective]
preset = "user_tangent_field"
matrix = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
offset = [0.0, 0.0, 0.1]
[u0]
preset = "harmonic_patch"
mean = 0.1
amplitude = 0.4
degree = 3
[output]
directory = "runs/x"
snapshot_every = 5
csv_name = "d.csv"
"#;
        let cfg = parse(text).unwrap();
        let again = parse(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, again);
        let minimal = parse(MINIMAL).unwrap();
        assert_eq!(parse(&minimal.to_toml_string()).unwrap(), minimal);
    }

    #[test]
    fn random_initial_data_hits_mean() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 3).unwrap();
        let ic = InitialCondition::RandomUniform {
            seed: 7,
            amplitude: 0.05,
            mean: 0.2,
        };
        let a = ic.sample(&mesh);
        let m = reference_mean(&mesh, &a);
        assert!((m - 0.2).abs() < 1e-15, "{m:e}");
        assert_eq!(a, ic.sample(&mesh));
        assert!(a.iter().all(|v| (v - 0.2).abs() < 0.1));
        let b = InitialCondition::RandomUniform {
            seed: 8,
            amplitude: 0.05,
            mean: 0.2,
        }
        .sample(&mesh);
        assert_ne!(a, b);
    }

    #[test]
    fn legendre_values() {
        assert_eq!(legendre(0, 0.3), 1.0);
        assert_eq!(legendre(1, 0.3), 0.3);
        assert!((legendre(2, 0.3) - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert!((legendre(3, -0.5) - 0.5 * (5.0 * -0.125 - 3.0 * -0.5)).abs() < 1e-15);
    }
}
