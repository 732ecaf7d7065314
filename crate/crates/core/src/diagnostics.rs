//! Scalars recorded per step, the admissibility gate on initial data, and
//! finite-difference checks of the discrete transport formulas.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{
    assemble, assemble_adv_production, assemble_weighted_stiffness_production, element_divergence, FormMatrices,
};
use crate::model1::{ModelKind, PhaseState};
use crate::potential::PotentialParams;
use crate::quadrature::QuadraturePolicy;
use crate::surface::{FlowField, SurfaceMesh};

/// One row of the per-step output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    /// `∫u` (advected) or `∫ρc` (weighted).
    pub mass: f64,
    pub energy: f64,
    /// `∫|∇w|²` or `∫ρ|∇w|²`.
    pub grad_w_norm_sq: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// `1 − max|u|` over vertices.
    pub xi: f64,
    /// `m(w, 1) / |Γ(t)|`.
    pub mean_w: f64,
    pub area: f64,
    /// `max_{s ≤ t} |Γ₀| / |Γ(s)|`.
    pub s_r_running: f64,
    pub separation_violation: bool,
}

/// Free energy `∫ ½|∇u_h|² + c F(u_h)` with `c = ρ` when `weighted`.
/// `None` if some value lies outside the potential's domain.
pub fn free_energy(
    mesh: &SurfaceMesh,
    alpha: &[f64],
    params: &PotentialParams,
    policy: QuadraturePolicy,
    weighted: bool,
) -> Option<f64> {
    let mut energy = 0.0;
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let geo = &mesh.elements[e];
        let grad = mesh.tangential_gradient(alpha, e);
        energy += 0.5 * geo.area * grad.norm_squared();
        let c = if weighted { geo.density() } else { 1.0 };
        let mut bulk = 0.0;
        for (r, w) in policy.interpolate(tri.map(|k| alpha[k])) {
            bulk += w * params.f_value(r).ok()?;
        }
        energy += c * geo.area * bulk;
    }
    Some(energy)
}

/// Quadrature of `∫ F(u_h) ∇_Γ·V_h`, the `g(F(u), 1)` term.
fn potential_dilation(
    mesh: &SurfaceMesh,
    flow: &FlowField,
    alpha: &[f64],
    params: &PotentialParams,
    policy: QuadraturePolicy,
) -> Result<f64> {
    let div = element_divergence(mesh, flow);
    let mut total = 0.0;
    for (e, tri) in mesh.triangles.iter().enumerate() {
        for (r, w) in policy.interpolate(tri.map(|k| alpha[k])) {
            total += div[e] * w * mesh.elements[e].area * params.f_value(r)?;
        }
    }
    Ok(total)
}

/// Instantaneous energy production of the advected model,
/// `−‖∇w‖² − g(u,w) − a_N(u,w) + ½b(u,u) + g(F(u),1)`, which equals
/// `dE/dt` along exact semi-discrete trajectories.
pub fn energy_production(
    state: &PhaseState,
    mesh: &SurfaceMesh,
    forms: &FormMatrices,
    flow: &FlowField,
    params: &PotentialParams,
    policy: QuadraturePolicy,
) -> Result<f64> {
    let (u, w) = (&state.alpha, &state.beta);
    Ok(-forms.a_s.bilinear(w, w) - forms.g.bilinear(w, u) - forms.a_n.bilinear(w, u)
        + 0.5 * forms.b_mat.bilinear(u, u)
        + potential_dilation(mesh, flow, u, params, policy)?)
}

/// Diagnostics of `state` on `mesh` (which must be at `state.time`).
pub fn record(
    step: usize,
    state: &PhaseState,
    mesh: &SurfaceMesh,
    forms: &FormMatrices,
    params: &PotentialParams,
    policy: QuadraturePolicy,
    previous_s_r: f64,
) -> DiagnosticsRecord {
    let weighted = state.model == ModelKind::Weighted;
    let ones = vec![1.0; state.alpha.len()];
    let mass_matrix = if weighted { &forms.m_rho } else { &forms.m };
    let stiffness = if weighted { &forms.a_s_rho } else { &forms.a_s };
    let u_min = state.alpha.iter().copied().fold(f64::INFINITY, f64::min);
    let u_max = state.alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let xi = 1.0 - u_min.abs().max(u_max.abs());
    let area = mesh.area();
    DiagnosticsRecord {
        step,
        time: state.time,
        mass: mass_matrix.bilinear(&ones, &state.alpha),
        energy: free_energy(mesh, &state.alpha, params, policy, weighted).unwrap_or(f64::NAN),
        grad_w_norm_sq: stiffness.bilinear(&state.beta, &state.beta),
        u_min,
        u_max,
        xi,
        mean_w: forms.m.bilinear(&ones, &state.beta) / area,
        area,
        s_r_running: previous_s_r.max(mesh.reference_area() / area),
        separation_violation: !(xi > 0.0),
    }
}

/// Discrete check of the initial-mean condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub model: ModelKind,
    pub sample_count: usize,
    /// `max_t |Γ₀| / |Γ(t)|` over the sample grid.
    pub shrinkage_ratio: f64,
    pub mean: f64,
    pub mean_abs: f64,
    /// `|mean| · S_R`, which equals `max_t |m_{u₀}(t)|`.
    pub product: f64,
    pub admissible: bool,
}

impl AdmissibilityReport {
    pub fn require(&self) -> Result<()> {
        if self.admissible {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                mean_abs: self.mean_abs,
                shrinkage_ratio: self.shrinkage_ratio,
                product: self.product,
            })
        }
    }
}

/// Samples `|Γ(t)|` at `sample_count` uniform times in `[0, T]`.
///
/// The advected model needs `|mean(u₀)| S_R < 1`; for the weighted model
/// the conserved quantity is `∫ρc = ∫_{Γ₀} c₀`, so `|mean(u₀)| < 1` is the
/// whole condition.
pub fn admissibility_report(
    mesh0: &SurfaceMesh,
    u0: &[f64],
    flow: &FlowField,
    t_final: f64,
    sample_count: usize,
    model: ModelKind,
) -> Result<AdmissibilityReport> {
    if sample_count < 2 {
        return Err(Error::Precondition(format!("sample_count = {sample_count} must be at least 2")));
    }
    let area0 = mesh0.reference_area();
    let mut integral = 0.0;
    for (tri, geo) in mesh0.triangles.iter().zip(&mesh0.elements) {
        integral += geo.reference_area / 3.0 * tri.iter().map(|&k| u0[k]).sum::<f64>();
    }
    let mean = integral / area0;
    let mut shrinkage_ratio: f64 = 1.0;
    for k in 0..sample_count {
        let t = t_final * k as f64 / (sample_count - 1) as f64;
        let mesh = mesh0.advance(flow, t)?;
        shrinkage_ratio = shrinkage_ratio.max(area0 / mesh.area());
    }
    let product = mean.abs() * shrinkage_ratio;
    let admissible = match model {
        ModelKind::Advected => product < 1.0,
        ModelKind::Weighted => mean.abs() < 1.0,
    };
    Ok(AdmissibilityReport {
        model,
        sample_count,
        shrinkage_ratio,
        mean,
        mean_abs: mean.abs(),
        product,
        admissible,
    })
}

/// Transport identities that can be checked by finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportCheck {
    MForm,
    ASForm,
    ANForm,
    RhoGradForm,
    RhoOde,
}

impl TransportCheck {
    pub const ALL: [TransportCheck; 5] = [
        TransportCheck::MForm,
        TransportCheck::ASForm,
        TransportCheck::ANForm,
        TransportCheck::RhoGradForm,
        TransportCheck::RhoOde,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TransportCheck::MForm => "m_form",
            TransportCheck::ASForm => "aS_form",
            TransportCheck::ANForm => "aN_form",
            TransportCheck::RhoGradForm => "rho_grad_form",
            TransportCheck::RhoOde => "rho_ode",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::config("which", name, "expected one of m_form, aS_form, aN_form, rho_grad_form, rho_ode"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportResidual {
    pub fd_derivative: f64,
    pub predicted: f64,
    pub residual: f64,
    /// Magnitude of the checked quantity, for relative judgements.
    pub scale: f64,
}

/// Compares a centred difference of a form (or of the element density)
/// over `[t − Δt, t + Δt]` with its predicted production at `t`. `eta`
/// and `phi` are nodal coefficient vectors, constant in time.
pub fn verify_transport_identity(
    mesh0: &SurfaceMesh,
    flow: &FlowField,
    which: TransportCheck,
    eta: &[f64],
    phi: &[f64],
    t: f64,
    dt: f64,
    policy: QuadraturePolicy,
) -> Result<TransportResidual> {
    let mesh = mesh0.advance(flow, t)?;
    let plus = mesh0.advance(flow, t + dt)?;
    let minus = mesh0.advance(flow, t - dt)?;
    if which == TransportCheck::RhoOde {
        let div = element_divergence(&mesh, flow);
        let mut worst = TransportResidual {
            fd_derivative: 0.0,
            predicted: 0.0,
            residual: 0.0,
            scale: 0.0,
        };
        for e in 0..mesh.num_elements() {
            let fd = (plus.elements[e].density() - minus.elements[e].density()) / (2.0 * dt);
            let predicted = -mesh.elements[e].density() * div[e];
            let residual = (fd - predicted).abs();
            worst.scale = worst.scale.max(predicted.abs());
            if residual > worst.residual || e == 0 {
                worst = TransportResidual {
                    fd_derivative: fd,
                    predicted,
                    residual,
                    scale: worst.scale,
                };
            }
        }
        return Ok(worst);
    }
    let value = |m: &SurfaceMesh| -> Result<f64> {
        let f = assemble(m, flow, policy)?;
        Ok(match which {
            TransportCheck::MForm => f.m.bilinear(phi, eta),
            TransportCheck::ASForm => f.a_s.bilinear(phi, eta),
            TransportCheck::ANForm => f.a_n.bilinear(phi, eta),
            TransportCheck::RhoGradForm => f.a_s_rho.bilinear(phi, eta),
            TransportCheck::RhoOde => unreachable!(),
        })
    };
    let fd = (value(&plus)? - value(&minus)?) / (2.0 * dt);
    let predicted = match which {
        TransportCheck::MForm => assemble(&mesh, flow, policy)?.g.bilinear(phi, eta),
        TransportCheck::ASForm => assemble(&mesh, flow, policy)?.b_mat.bilinear(phi, eta),
        TransportCheck::ANForm => assemble_adv_production(&mesh, flow, policy).bilinear(phi, eta),
        TransportCheck::RhoGradForm => assemble_weighted_stiffness_production(&mesh, flow).bilinear(phi, eta),
        TransportCheck::RhoOde => unreachable!(),
    };
    Ok(TransportResidual {
        fd_derivative: fd,
        predicted,
        residual: (fd - predicted).abs(),
        scale: value(&mesh)?.abs(),
    })
}

/// Result of a Δt-ladder study of one transport identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub which: TransportCheck,
    pub dts: Vec<f64>,
    /// Largest residual over the sample times, per `Δt`.
    pub residuals: Vec<f64>,
    pub scale: f64,
    /// Least-squares slope of `log r` against `log Δt`; `None` when every
    /// residual is at rounding level.
    pub order: Option<f64>,
}

impl ConvergenceReport {
    pub fn is_exact(&self) -> bool {
        self.order.is_none()
    }
}

/// Residual threshold below which a check counts as exact.
pub const EXACT_TOLERANCE: f64 = 1e-12;

/// Largest residual still read as exact at step `dt`: the absolute floor
/// [`EXACT_TOLERANCE`] or the cancellation error of a centred difference,
/// `ε · scale / Δt` with a safety factor, whichever is larger.
pub fn exact_threshold(scale: f64, dt: f64) -> f64 {
    let s = scale.max(1.0);
    (EXACT_TOLERANCE * s).max(64.0 * f64::EPSILON * s / dt)
}

/// Least-squares slope of `ys` against `xs`, with intercept and the
/// largest absolute residual of the fit.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    (slope, intercept, max_residual)
}

/// Runs [`verify_transport_identity`] at each `t ∈ times` for each `Δt`.
pub fn transport_convergence(
    mesh0: &SurfaceMesh,
    flow: &FlowField,
    which: TransportCheck,
    eta: &[f64],
    phi: &[f64],
    times: &[f64],
    dts: &[f64],
    policy: QuadraturePolicy,
) -> Result<ConvergenceReport> {
    let mut residuals = Vec::with_capacity(dts.len());
    let mut scale: f64 = 0.0;
    for &dt in dts {
        let mut worst: f64 = 0.0;
        for &t in times {
            let r = verify_transport_identity(mesh0, flow, which, eta, phi, t, dt, policy)?;
            worst = worst.max(r.residual);
            scale = scale.max(r.scale);
        }
        residuals.push(worst);
    }
    let exact = residuals.iter().zip(dts).all(|(&r, &dt)| r <= exact_threshold(scale, dt));
    let order = if exact {
        None
    } else {
        let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
        Some(linear_fit(&xs, &ys).0)
    };
    Ok(ConvergenceReport {
        which,
        dts: dts.to_vec(),
        residuals,
        scale,
        order,
    })
}

/// The Δt ladder used by the verification battery.
pub const DT_LADDER: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Five sample times in `(0, T)`, staggered so that they avoid the
/// symmetric points of periodic flows.
pub fn sample_times(t_final: f64) -> Vec<f64> {
    (0..5).map(|k| (0.13 + 0.17 * k as f64) * t_final).collect()
}

/// Smooth test fields used by the verification battery, sampled at
/// reference vertex positions. They share low harmonics, so none of the
/// gradient forms vanish by symmetry on a sphere.
pub fn transport_test_fields(mesh0: &SurfaceMesh) -> (Vec<f64>, Vec<f64>) {
    let eta = mesh0.interpolate_reference(|p| 1.0 + p.x * p.y + p.z * p.z + 0.5 * p.x + 0.2 * p.y - 0.4 * p.z);
    let phi = mesh0.interpolate_reference(|p| 0.3 + p.x - 2.0 * p.y * p.z + 0.7 * p.x * p.y + 0.3 * p.z + 0.6 * p.y);
    (eta, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_reference_surface, AdvectiveField, FlowPreset, SurfacePreset};
    use std::f64::consts::PI;

    fn breathing() -> FlowField {
        FlowField::new(FlowPreset::BreathingSphere {
            amplitude: 0.25,
            frequency: 1.0,
        })
    }

    #[test]
    fn constant_zero_state() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 3).unwrap();
        let flow = FlowField::new(FlowPreset::Static {});
        let forms = assemble(&mesh, &flow, QuadraturePolicy::Midpoint3).unwrap();
        let n = mesh.num_vertices();
        let state = PhaseState {
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
            time: 0.0,
            model: ModelKind::Advected,
            delta_used: 0.0,
        };
        let params = PotentialParams::new(0.5, 0.0).unwrap();
        let rec = record(0, &state, &mesh, &forms, &params, QuadraturePolicy::Midpoint3, 1.0);
        assert_eq!(rec.xi, 1.0);
        assert!((rec.energy - 0.5 * 4.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert!((rec.energy - 0.5 * mesh.area()).abs() < 1e-12);
        assert_eq!(rec.mass, 0.0);
        assert!(!rec.separation_violation);
    }

    #[test]
    fn constant_mass_is_value_times_area() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 2).unwrap();
        let forms = assemble(&mesh, &FlowField::new(FlowPreset::Static {}), QuadraturePolicy::Lumped).unwrap();
        let n = mesh.num_vertices();
        let state = PhaseState {
            alpha: vec![0.3; n],
            beta: vec![0.0; n],
            time: 0.0,
            model: ModelKind::Advected,
            delta_used: 0.0,
        };
        let params = PotentialParams::new(0.5, 0.0).unwrap();
        let rec = record(0, &state, &mesh, &forms, &params, QuadraturePolicy::Lumped, 1.0);
        assert!((rec.mass - 0.3 * mesh.area()).abs() < 1e-13);
        assert!((rec.xi - 0.7).abs() < 1e-15);
    }

    #[test]
    fn pure_phase_flags_violation() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 1).unwrap();
        let forms = assemble(&mesh, &FlowField::new(FlowPreset::Static {}), QuadraturePolicy::Midpoint3).unwrap();
        let n = mesh.num_vertices();
        let mut alpha = vec![0.0; n];
        alpha[0] = 1.0;
        let state = PhaseState {
            alpha,
            beta: vec![0.0; n],
            time: 0.0,
            model: ModelKind::Advected,
            delta_used: 0.0,
        };
        let params = PotentialParams::new(0.5, 0.0).unwrap();
        let rec = record(0, &state, &mesh, &forms, &params, QuadraturePolicy::Midpoint3, 1.0);
        assert!(rec.separation_violation);
        assert!(rec.xi <= 0.0);
    }

    #[test]
    fn breathing_sphere_admissibility() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 4).unwrap();
        let n = mesh.num_vertices();
        let report = |mean: f64| {
            admissibility_report(&mesh, &vec![mean; n], &breathing(), 2.0 * PI, 401, ModelKind::Advected).unwrap()
        };
        let half = report(0.5);
        assert!((half.shrinkage_ratio - 16.0 / 9.0).abs() < 1e-12);
        assert!(half.admissible);
        assert!((half.product - 8.0 / 9.0).abs() < 1e-12);
        let high = report(0.8);
        assert!(!high.admissible);
        assert!(high.require().is_err());
        let zero = report(0.0);
        assert!(zero.admissible);
    }

    #[test]
    fn static_flow_admissibility() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 2).unwrap();
        let n = mesh.num_vertices();
        let static_flow = FlowField::new(FlowPreset::Static {});
        let r = admissibility_report(&mesh, &vec![1.0; n], &static_flow, 1.0, 2, ModelKind::Advected).unwrap();
        assert_eq!(r.shrinkage_ratio, 1.0);
        assert!(!r.admissible);
        let r = admissibility_report(&mesh, &vec![0.99; n], &static_flow, 1.0, 2, ModelKind::Weighted).unwrap();
        assert!(r.admissible);
        assert!(admissibility_report(&mesh, &vec![0.0; n], &static_flow, 1.0, 1, ModelKind::Advected).is_err());
    }

    #[test]
    fn static_flow_transport_is_exact() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 2).unwrap();
        let flow = FlowField::new(FlowPreset::Static {});
        let (eta, phi) = transport_test_fields(&mesh);
        for which in TransportCheck::ALL {
            let r = verify_transport_identity(&mesh, &flow, which, &eta, &phi, 0.5, 1e-2, QuadraturePolicy::Midpoint3)
                .unwrap();
            assert!(r.residual <= 1e-12, "{which:?}: {r:?}");
        }
    }

    #[test]
    fn m_form_converges_at_second_order() {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 2).unwrap();
        let flow = breathing().with_advective(AdvectiveField::RigidRotation { omega: [0.0, 0.0, 1.0] });
        let (eta, phi) = transport_test_fields(&mesh);
        let report = transport_convergence(
            &mesh,
            &flow,
            TransportCheck::MForm,
            &eta,
            &phi,
            &sample_times(1.0),
            &DT_LADDER,
            QuadraturePolicy::Midpoint3,
        )
        .unwrap();
        let order = report.order.unwrap();
        assert!((1.8..=2.2).contains(&order), "{report:?}");
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let (slope, intercept, res) = linear_fit(&xs, &ys);
        assert!((slope + 0.5).abs() < 1e-15 && (intercept - 2.0).abs() < 1e-15 && res < 1e-15);
    }

    #[test]
    fn check_names_round_trip() {
        for c in TransportCheck::ALL {
            assert_eq!(TransportCheck::from_name(c.name()).unwrap(), c);
        }
        assert!(TransportCheck::from_name("bogus").is_err());
    }
}
