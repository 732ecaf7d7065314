//! Advected model: `∂•u + u∇_Γ·V − ∇_Γ·(u V_a^τ) = Δ_Γ w`,
//! `w = −Δ_Γ u + F'(u)`, discretized with transported P1 basis functions
//! and backward Euler in time.

use serde::{Deserialize, Serialize};

use crate::diagnostics::AdmissibilityReport;
use crate::error::{Error, Result};
use crate::forms::{nonlinear_load, FormMatrices};
use crate::newton::{axpy, CoupledSystem, NewtonReport, NewtonSettings, PotentialLoad};
use crate::potential::PotentialParams;
use crate::quadrature::QuadraturePolicy;
use crate::sparse::{block_matrix, solve};
use crate::surface::SurfaceMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Advected,
    Weighted,
}

/// Treatment of the nonlinearity in the second equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `(θ/2)φ_δ` implicit, the concave `−u` explicit.
    #[default]
    ConvexSplit,
    FullyImplicit,
}

/// Nodal coefficients of the order parameter (`alpha`) and chemical
/// potential (`beta`) at `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub time: f64,
    pub model: ModelKind,
    pub delta_used: f64,
}

/// Everything a step needs besides the state itself.
pub struct StepInput<'a> {
    /// Mesh at the new time level.
    pub mesh: &'a SurfaceMesh,
    pub forms_prev: &'a FormMatrices,
    pub forms: &'a FormMatrices,
    pub params: &'a PotentialParams,
    pub policy: QuadraturePolicy,
    pub scheme: Scheme,
    pub dt: f64,
    pub settings: NewtonSettings,
}

pub(crate) fn check_initial_range(alpha: &[f64]) -> Result<()> {
    if let Some((i, v)) = alpha.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
        return Err(Error::config(
            "u0",
            format!("{v} at vertex {i}"),
            "initial values must lie in [-1, 1]",
        ));
    }
    Ok(())
}

/// Solves `M w = A_S u + ∫F'(u_h)χ` for the chemical potential.
pub(crate) fn chemical_potential(
    mesh: &SurfaceMesh,
    mass: &crate::sparse::SparseMatrix,
    stiffness: &crate::sparse::SparseMatrix,
    alpha: &[f64],
    params: &PotentialParams,
    policy: QuadraturePolicy,
    weighted: bool,
) -> Result<Vec<f64>> {
    let mut rhs = stiffness.mul_vec(alpha);
    axpy(&mut rhs, 1.0, &nonlinear_load(mesh, params, alpha, policy, weighted)?);
    solve(mass, &rhs)
}

/// Builds the initial state from nodal values `alpha` of `u₀` on Γ₀.
pub fn initialize(
    mesh: &SurfaceMesh,
    forms: &FormMatrices,
    alpha: Vec<f64>,
    params: &PotentialParams,
    policy: QuadraturePolicy,
    admissibility: &AdmissibilityReport,
) -> Result<PhaseState> {
    admissibility.require()?;
    check_initial_range(&alpha)?;
    let beta = chemical_potential(mesh, &forms.m, &forms.a_s, &alpha, params, policy, false)?;
    Ok(PhaseState {
        alpha,
        beta,
        time: mesh.time,
        model: ModelKind::Advected,
        delta_used: params.delta,
    })
}

/// One backward-Euler step from `state` at `tⁿ` to `input.mesh.time`:
///
/// ```text
/// (M¹α − M⁰αⁿ)/dt + A_N¹α + A_S¹β = 0
/// A_S¹α + Φ(α) − M¹α̃ − M¹β       = 0
/// ```
pub fn step(state: &PhaseState, input: &StepInput) -> Result<(PhaseState, NewtonReport)> {
    step_from_guess(state, state, input)
}

/// Same as [`step`] with Newton started at `guess` instead of `state`.
pub fn step_from_guess(state: &PhaseState, guess: &PhaseState, input: &StepInput) -> Result<(PhaseState, NewtonReport)> {
    let n = state.alpha.len();
    let f1 = input.forms;
    let first_x = block_matrix(n, n, &[(0, 0, 1.0, &f1.m), (0, 0, input.dt, &f1.a_n)]);
    let system = CoupledSystem {
        dt: input.dt,
        first_x,
        flux: &f1.a_s,
        rhs: input.forms_prev.m.mul_vec(&state.alpha),
        stiffness: &f1.a_s,
        concave: &f1.m,
        mu_mass: &f1.m,
        explicit: match input.scheme {
            Scheme::ConvexSplit => Some(&state.alpha),
            Scheme::FullyImplicit => None,
        },
        load: PotentialLoad {
            mesh: input.mesh,
            params: input.params,
            policy: input.policy,
            weighted: false,
        },
        area: input.mesh.area(),
        time: input.mesh.time,
    };
    let (alpha, beta, report) = system.solve(guess.alpha.clone(), guess.beta.clone(), &input.settings)?;
    Ok((
        PhaseState {
            alpha,
            beta,
            time: input.mesh.time,
            model: ModelKind::Advected,
            delta_used: input.params.delta,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::admissibility_report;
    use crate::forms::assemble;
    use crate::surface::{build_reference_surface, FlowField, FlowPreset, SurfacePreset};

    fn setup(flow: &FlowField) -> (SurfaceMesh, FormMatrices) {
        let mesh = build_reference_surface(SurfacePreset::UnitSphere, 2).unwrap();
        let forms = assemble(&mesh, flow, QuadraturePolicy::Midpoint3).unwrap();
        (mesh, forms)
    }

    #[test]
    fn constant_state_is_fixed_point() {
        let flow = FlowField::new(FlowPreset::Static {});
        let (mesh, forms) = setup(&flow);
        let params = PotentialParams::new(0.5, 1e-4).unwrap();
        let m = 0.2;
        let alpha = vec![m; mesh.num_vertices()];
        let adm = admissibility_report(&mesh, &alpha, &flow, 1.0, 11, ModelKind::Advected).unwrap();
        let state = initialize(&mesh, &forms, alpha, &params, QuadraturePolicy::Midpoint3, &adm).unwrap();
        let mu = 0.25 * ((1.0 + m) / (1.0 - m)).ln() - m;
        assert!(state.beta.iter().all(|b| (b - mu).abs() < 1e-12));
        let input = StepInput {
            mesh: &mesh,
            forms_prev: &forms,
            forms: &forms,
            params: &params,
            policy: QuadraturePolicy::Midpoint3,
            scheme: Scheme::ConvexSplit,
            dt: 0.01,
            settings: NewtonSettings::default(),
        };
        let (next, report) = step(&state, &input).unwrap();
        assert!(report.iterations <= 1);
        assert!(next.alpha.iter().all(|a| (a - m).abs() < 1e-12));
        assert!(next.beta.iter().all(|b| (b - mu).abs() < 1e-10));
    }

    #[test]
    fn inadmissible_mean_is_rejected() {
        let flow = FlowField::new(FlowPreset::Static {});
        let (mesh, forms) = setup(&flow);
        let params = PotentialParams::new(0.5, 1e-4).unwrap();
        let alpha = vec![1.0; mesh.num_vertices()];
        let adm = admissibility_report(&mesh, &alpha, &flow, 1.0, 11, ModelKind::Advected).unwrap();
        let err = initialize(&mesh, &forms, alpha, &params, QuadraturePolicy::Midpoint3, &adm).unwrap_err();
        assert!(matches!(err, Error::Inadmissible { .. }));
    }

    #[test]
    fn out_of_range_initial_value_is_rejected() {
        let flow = FlowField::new(FlowPreset::Static {});
        let (mesh, forms) = setup(&flow);
        let params = PotentialParams::new(0.5, 1e-4).unwrap();
        let mut alpha = vec![0.0; mesh.num_vertices()];
        alpha[5] = 1.2;
        alpha[6] = -1.2;
        let adm = admissibility_report(&mesh, &alpha, &flow, 1.0, 11, ModelKind::Advected).unwrap();
        assert!(initialize(&mesh, &forms, alpha, &params, QuadraturePolicy::Midpoint3, &adm).is_err());
    }

    #[test]
    fn one_step_conserves_mass_on_moving_surface() {
        let flow = FlowField::new(FlowPreset::BreathingSphere {
            amplitude: 0.25,
            frequency: 1.0,
        })
        .with_advective(crate::surface::AdvectiveField::RigidRotation { omega: [0.0, 0.5, 1.0] });
        let (mesh, forms) = setup(&flow);
        let params = PotentialParams::new(0.3, 1e-4).unwrap();
        let alpha = mesh.interpolate(|p| 0.4 * p.x * p.z + 0.1);
        let adm = admissibility_report(&mesh, &alpha, &flow, 1.0, 11, ModelKind::Advected).unwrap();
        let state = initialize(&mesh, &forms, alpha, &params, QuadraturePolicy::Midpoint3, &adm).unwrap();
        let dt = 0.02;
        let mesh1 = mesh.advance(&flow, dt).unwrap();
        let forms1 = assemble(&mesh1, &flow, QuadraturePolicy::Midpoint3).unwrap();
        for scheme in [Scheme::ConvexSplit, Scheme::FullyImplicit] {
            let input = StepInput {
                mesh: &mesh1,
                forms_prev: &forms,
                forms: &forms1,
                params: &params,
                policy: QuadraturePolicy::Midpoint3,
                scheme,
                dt,
                settings: NewtonSettings::default(),
            };
            let (next, _) = step(&state, &input).unwrap();
            let ones = vec![1.0; mesh.num_vertices()];
            let before = forms.m.bilinear(&ones, &state.alpha);
            let after = forms1.m.bilinear(&ones, &next.alpha);
            assert!((after - before).abs() <= 1e-10 * mesh1.area());
            assert_eq!(next.time, dt);
        }
    }
}
