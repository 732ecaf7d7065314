use serde::{Deserialize, Serialize};

use super::{tangential_projector, Mat3, Vec3};
use crate::error::{Error, Result};

fn quarter() -> f64 {
    0.25
}
fn one() -> f64 {
    1.0
}
fn stretch_amplitude() -> f64 {
    0.3
}

/// Prescribed affine motions `Φ(p, t) = L(t) p + b(t)` of the reference surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowPreset {
    // Empty braces keep unknown keys next to the tag an error.
    Static {},
    /// Uniform scaling by `R(t) = 1 + a sin(ωt)`.
    BreathingSphere {
        #[serde(default = "quarter")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// `L(t) = diag(s, 1, 2 - s)` with `s(t) = 1 + a sin(ωt)`; changes shape,
    /// not only size, so the area ratio varies over the surface.
    EllipsoidStretch {
        #[serde(default = "stretch_amplitude")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    /// Rigid motion: rotation about the z-axis at `angular_speed` composed
    /// with translation at constant `velocity`.
    TranslateRotate {
        #[serde(default)]
        velocity: [f64; 3],
        #[serde(default = "one")]
        angular_speed: f64,
    },
}

impl FlowPreset {
    pub fn name(&self) -> &'static str {
        match self {
            FlowPreset::Static {} => "static",
            FlowPreset::BreathingSphere { .. } => "breathing_sphere",
            FlowPreset::EllipsoidStretch { .. } => "ellipsoid_stretch",
            FlowPreset::TranslateRotate { .. } => "translate_rotate",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |key: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, v, "must be finite"))
            }
        };
        match *self {
            FlowPreset::Static {} => Ok(()),
            FlowPreset::BreathingSphere { amplitude, frequency }
            | FlowPreset::EllipsoidStretch { amplitude, frequency } => {
                finite("flow.frequency", frequency)?;
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::config(
                        "flow.amplitude",
                        amplitude,
                        "must satisfy |amplitude| < 1 so the map stays invertible",
                    ));
                }
                Ok(())
            }
            FlowPreset::TranslateRotate { velocity, angular_speed } => {
                for v in velocity {
                    finite("flow.velocity", v)?;
                }
                finite("flow.angular_speed", angular_speed)
            }
        }
    }

    /// `(L(t), b(t))`.
    pub fn affine(&self, t: f64) -> (Mat3, Vec3) {
        match *self {
            FlowPreset::Static {} => (Mat3::identity(), Vec3::zeros()),
            FlowPreset::BreathingSphere { amplitude, frequency } => {
                let r = 1.0 + amplitude * (frequency * t).sin();
                (Mat3::identity() * r, Vec3::zeros())
            }
            FlowPreset::EllipsoidStretch { amplitude, frequency } => {
                let s = 1.0 + amplitude * (frequency * t).sin();
                (Mat3::from_diagonal(&Vec3::new(s, 1.0, 2.0 - s)), Vec3::zeros())
            }
            FlowPreset::TranslateRotate { velocity, angular_speed } => {
                let (sn, cs) = (angular_speed * t).sin_cos();
                let l = Mat3::new(cs, -sn, 0.0, sn, cs, 0.0, 0.0, 0.0, 1.0);
                (l, Vec3::from(velocity) * t)
            }
        }
    }

    /// `(L'(t), b'(t))`.
    pub fn affine_rate(&self, t: f64) -> (Mat3, Vec3) {
        match *self {
            FlowPreset::Static {} => (Mat3::zeros(), Vec3::zeros()),
            FlowPreset::BreathingSphere { amplitude, frequency } => {
                let dr = amplitude * frequency * (frequency * t).cos();
                (Mat3::identity() * dr, Vec3::zeros())
            }
            FlowPreset::EllipsoidStretch { amplitude, frequency } => {
                let ds = amplitude * frequency * (frequency * t).cos();
                (Mat3::from_diagonal(&Vec3::new(ds, 0.0, -ds)), Vec3::zeros())
            }
            FlowPreset::TranslateRotate { velocity, angular_speed } => {
                let (sn, cs) = (angular_speed * t).sin_cos();
                let dl = Mat3::new(-sn, -cs, 0.0, cs, -sn, 0.0, 0.0, 0.0, 0.0) * angular_speed;
                (dl, Vec3::from(velocity))
            }
        }
    }
}

impl Default for AdvectiveField {
    fn default() -> Self {
        AdvectiveField::Zero {}
    }
}

/// Advective (physical) tangential transport velocity `V_a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdvectiveField {
    Zero {},
    /// `ω × (x - b(t))`, rotation about the current centre of the surface.
    RigidRotation { omega: [f64; 3] },
    /// `A (x - b(t)) + c`, projected onto the tangent plane before use.
    UserTangentField {
        matrix: [[f64; 3]; 3],
        #[serde(default)]
        offset: [f64; 3],
    },
}

impl AdvectiveField {
    pub fn name(&self) -> &'static str {
        match self {
            AdvectiveField::Zero {} => "zero",
            AdvectiveField::RigidRotation { .. } => "rigid_rotation",
            AdvectiveField::UserTangentField { .. } => "user_tangent_field",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, AdvectiveField::Zero {})
    }
}

/// Decomposition of the velocities at one surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySplit {
    /// Parametrisation velocity `V`.
    pub v: Vec3,
    /// `V_τ = P V`.
    pub v_tau: Vec3,
    /// Normal speed `V·ν`.
    pub v_nu: f64,
    /// Advective field `V_a` as prescribed.
    pub v_a: Vec3,
    /// `V_a^τ = V_τ − P V_a`, the tangential velocity entering `a_N`.
    pub v_a_tau: Vec3,
}

/// A surface motion together with the material transport field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowField {
    pub preset: FlowPreset,
    pub advective: AdvectiveField,
}

impl FlowField {
    pub fn new(preset: FlowPreset) -> Self {
        Self {
            preset,
            advective: AdvectiveField::Zero {},
        }
    }

    pub fn with_advective(mut self, advective: AdvectiveField) -> Self {
        self.advective = advective;
        self
    }

    pub fn position(&self, p: &Vec3, t: f64) -> Vec3 {
        let (l, b) = self.preset.affine(t);
        l * p + b
    }

    /// Pulls a current point back to the reference configuration.
    pub fn reference_point(&self, x: &Vec3, t: f64) -> Vec3 {
        let (l, b) = self.preset.affine(t);
        l.try_inverse().expect("affine flow map is invertible") * (x - b)
    }

    /// Eulerian velocity `V(x, t) = L' L⁻¹ (x - b) + b'`.
    pub fn velocity(&self, x: &Vec3, t: f64) -> Vec3 {
        let (_, b) = self.preset.affine(t);
        let (_, db) = self.preset.affine_rate(t);
        self.velocity_jacobian(t) * (x - b) + db
    }

    /// Spatial Jacobian `L' L⁻¹` of the (affine) velocity.
    pub fn velocity_jacobian(&self, t: f64) -> Mat3 {
        let (l, _) = self.preset.affine(t);
        let (dl, _) = self.preset.affine_rate(t);
        dl * l.try_inverse().expect("affine flow map is invertible")
    }

    /// Unit normal at `Φ(p, t)` given the reference unit normal at `p`.
    pub fn transport_normal(&self, n_ref: &Vec3, t: f64) -> Vec3 {
        self.try_transport_normal(n_ref, t).expect("affine flow map is invertible")
    }

    /// As [`Self::transport_normal`], `None` when `L(t)` is singular.
    pub fn try_transport_normal(&self, n_ref: &Vec3, t: f64) -> Option<Vec3> {
        let (l, _) = self.preset.affine(t);
        let cof = l.try_inverse()?.transpose();
        Some((cof * n_ref).normalize())
    }

    /// Raw advective field at `x`.
    pub fn advective_velocity(&self, x: &Vec3, t: f64) -> Vec3 {
        let (_, b) = self.preset.affine(t);
        match self.advective {
            AdvectiveField::Zero {} => Vec3::zeros(),
            AdvectiveField::RigidRotation { omega } => Vec3::from(omega).cross(&(x - b)),
            AdvectiveField::UserTangentField { matrix, offset } => {
                let a = Mat3::from_row_slice(&matrix.concat());
                a * (x - b) + Vec3::from(offset)
            }
        }
    }

    /// Velocity decomposition at `x` with unit normal `normal`.
    pub fn velocity_split(&self, x: &Vec3, normal: &Vec3, t: f64) -> VelocitySplit {
        let p = tangential_projector(normal);
        let v = self.velocity(x, t);
        let v_a = self.advective_velocity(x, t);
        VelocitySplit {
            v,
            v_tau: p * v,
            v_nu: v.dot(normal),
            v_a,
            v_a_tau: p * (v - v_a),
        }
    }

    /// `V_a^τ` at the image of a reference point, using the transported
    /// smooth normal.
    pub fn transport_tangent_along(&self, p_ref: &Vec3, n_ref: &Vec3, t: f64) -> Vec3 {
        let x = self.position(p_ref, t);
        let n = self.transport_normal(n_ref, t);
        self.velocity_split(&x, &n, t).v_a_tau
    }

    /// Material derivative of `V_a^τ` along the trajectory of `p_ref`,
    /// by a centred difference with step `1e-5`.
    pub fn transport_tangent_rate(&self, p_ref: &Vec3, n_ref: &Vec3, t: f64) -> Vec3 {
        const H: f64 = 1e-5;
        (self.transport_tangent_along(p_ref, n_ref, t + H) - self.transport_tangent_along(p_ref, n_ref, t - H))
            / (2.0 * H)
    }
}
