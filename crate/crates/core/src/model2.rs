//! Density-weighted model: `ρċ − ∇_Γ·(ρ∇_Γ w) = 0`,
//! `ρw = −Δ_Γ c + ρF'(c)`, with `ρ = 1/J` read off the element areas.
//! Also the weighted inverse Laplacian and the `‖·‖_{ρ,−1}` norm.

use crate::diagnostics::AdmissibilityReport;
use crate::error::{Error, Result};
use crate::forms::FormMatrices;
use crate::model1::{chemical_potential, check_initial_range, ModelKind, PhaseState, Scheme};
use crate::newton::{CoupledSystem, NewtonReport, NewtonSettings, PotentialLoad};
use crate::potential::PotentialParams;
use crate::quadrature::QuadraturePolicy;
use crate::sparse::{block_matrix, SparseLu, SparseMatrix};
use crate::surface::SurfaceMesh;

/// Operators of the weighted model at one time level.
#[derive(Debug, Clone)]
pub struct WeightedOperators {
    /// Reference mass matrix; equals `M_ρ(t)` for every `t`.
    pub m0: SparseMatrix,
    /// Unweighted mass matrix on `Γ(t)`, used for the zero-mean constraint.
    pub m: SparseMatrix,
    pub a_s_rho: SparseMatrix,
    pub a_s: SparseMatrix,
    pub rho: Vec<f64>,
    pub time: f64,
}

impl WeightedOperators {
    pub fn new(mesh: &SurfaceMesh, forms: &FormMatrices, m0: &SparseMatrix) -> Self {
        Self {
            m0: m0.clone(),
            m: forms.m.clone(),
            a_s_rho: forms.a_s_rho.clone(),
            a_s: forms.a_s.clone(),
            rho: mesh.density(),
            time: forms.time,
        }
    }
}

/// Initial state for the weighted model.
pub fn initialize_weighted(
    mesh: &SurfaceMesh,
    ops: &WeightedOperators,
    gamma: Vec<f64>,
    params: &PotentialParams,
    policy: QuadraturePolicy,
    admissibility: &AdmissibilityReport,
) -> Result<PhaseState> {
    admissibility.require()?;
    check_initial_range(&gamma)?;
    let omega = chemical_potential(mesh, &ops.m0, &ops.a_s, &gamma, params, policy, true)?;
    Ok(PhaseState {
        alpha: gamma,
        beta: omega,
        time: mesh.time,
        model: ModelKind::Weighted,
        delta_used: params.delta,
    })
}

/// One backward-Euler step:
///
/// ```text
/// M₀(γ − γⁿ)/dt + A_S^ρ ω = 0
/// A_S γ + Φ_ρ(γ) − M₀γ̃ − M₀ω = 0
/// ```
#[allow(clippy::too_many_arguments)]
pub fn step_weighted(
    state: &PhaseState,
    ops: &WeightedOperators,
    mesh: &SurfaceMesh,
    params: &PotentialParams,
    policy: QuadraturePolicy,
    scheme: Scheme,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<(PhaseState, NewtonReport)> {
    step_weighted_from_guess(state, state, ops, mesh, params, policy, scheme, dt, settings)
}

/// Same as [`step_weighted`] with Newton started at `guess`.
#[allow(clippy::too_many_arguments)]
pub fn step_weighted_from_guess(
    state: &PhaseState,
    guess: &PhaseState,
    ops: &WeightedOperators,
    mesh: &SurfaceMesh,
    params: &PotentialParams,
    policy: QuadraturePolicy,
    scheme: Scheme,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<(PhaseState, NewtonReport)> {
    let system = CoupledSystem {
        dt,
        first_x: ops.m0.clone(),
        flux: &ops.a_s_rho,
        rhs: ops.m0.mul_vec(&state.alpha),
        stiffness: &ops.a_s,
        concave: &ops.m0,
        mu_mass: &ops.m0,
        explicit: match scheme {
            Scheme::ConvexSplit => Some(&state.alpha),
            Scheme::FullyImplicit => None,
        },
        load: PotentialLoad {
            mesh,
            params,
            policy,
            weighted: true,
        },
        area: mesh.area(),
        time: mesh.time,
    };
    let (gamma, omega, report) = system.solve(guess.alpha.clone(), guess.beta.clone(), settings)?;
    Ok((
        PhaseState {
            alpha: gamma,
            beta: omega,
            time: mesh.time,
            model: ModelKind::Weighted,
            delta_used: params.delta,
        },
        report,
    ))
}

/// Solves `∫ρ∇ζ·∇η = ∫ρfη` for all `η`, with `∫ζ = 0`, through the
/// bordered system `[[A_S^ρ, M1], [(M1)ᵀ, 0]]`.
pub fn weighted_inverse_laplacian(ops: &WeightedOperators, f: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    let load = ops.m0.mul_vec(f);
    let defect: f64 = load.iter().sum();
    let magnitude: f64 = ops.m0.mul_vec(&f.iter().map(|v| v.abs()).collect::<Vec<_>>()).iter().sum();
    if defect.abs() > 1e-10 * magnitude.max(1.0) {
        return Err(Error::Precondition(format!(
            "weighted load of f has nonzero total {defect:e}; the inverse Laplacian needs ∫ρf = 0"
        )));
    }
    let border = ops.m.row_sums();
    let column = SparseMatrix::from_triplets(n, 1, &border.iter().enumerate().map(|(i, &v)| (i, 0, v)).collect::<Vec<_>>());
    let row = SparseMatrix::from_triplets(1, n, &border.iter().enumerate().map(|(i, &v)| (0, i, v)).collect::<Vec<_>>());
    let system = block_matrix(n + 1, n + 1, &[(0, 0, 1.0, &ops.a_s_rho), (0, n, 1.0, &column), (n, 0, 1.0, &row)]);
    let mut rhs = load;
    rhs.push(0.0);
    let mut zeta = SparseLu::factor(&system)?.solve(&rhs)?;
    zeta.truncate(n);
    Ok(zeta)
}

/// `‖f‖_{ρ,−1} = ‖√ρ ∇ζ‖`.
pub fn rho_h_minus1_norm(ops: &WeightedOperators, f: &[f64]) -> Result<f64> {
    let zeta = weighted_inverse_laplacian(ops, f)?;
    Ok(ops.a_s_rho.bilinear(&zeta, &zeta).max(0.0).sqrt())
}

/// Distance series of two weighted-model trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySeries {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    /// Fitted rate `Ĉ` of `log d(t) ≈ a + Ĉ t`.
    pub rate: f64,
    pub intercept: f64,
    pub max_fit_residual: f64,
}

impl StabilitySeries {
    pub fn from_series(times: Vec<f64>, distances: Vec<f64>) -> Self {
        let logs: Vec<f64> = distances.iter().map(|d| d.max(f64::MIN_POSITIVE).ln()).collect();
        let (rate, intercept, max_fit_residual) = crate::diagnostics::linear_fit(&times, &logs);
        Self {
            times,
            distances,
            rate,
            intercept,
            max_fit_residual,
        }
    }

    /// Largest `d(t) / (d(0) e^{Ĉt})`.
    pub fn envelope_ratio(&self) -> f64 {
        let d0 = self.distances[0];
        self.times
            .iter()
            .zip(&self.distances)
            .map(|(t, d)| d / (d0 * (self.rate * t).exp()))
            .fold(0.0, f64::max)
    }
}

/// Zero-mean perturbation drawn from the seeded stream, scaled so that
/// `‖p‖_{ρ,−1} = size` at the initial time.
pub fn seeded_perturbation(ops: &WeightedOperators, seed: u64, size: f64) -> Result<Vec<f64>> {
    let mut p = crate::scenario::random_nodal(ops.m0.nrows(), seed, 1.0);
    let ones = vec![1.0; p.len()];
    let shift = ops.m0.bilinear(&ones, &p) / ops.m0.bilinear(&ones, &ones);
    p.iter_mut().for_each(|v| *v -= shift);
    let norm = rho_h_minus1_norm(ops, &p)?;
    if norm == 0.0 {
        return Err(Error::Precondition("perturbation has zero norm".into()));
    }
    p.iter_mut().for_each(|v| *v *= size / norm);
    Ok(p)
}

/// Runs the weighted model from `u0` and from `u0 + perturbation` with the
/// same discretization and returns `‖γ₁ − γ₂‖_{ρ,−1}` per step.
pub fn stability_pair_run(config: &crate::scenario::RunConfig, perturbation: &[f64]) -> Result<StabilitySeries> {
    use crate::scenario::Simulation;
    if config.model != ModelKind::Weighted {
        return Err(Error::Precondition("stability pairs use the weighted model".into()));
    }
    let mut first = Simulation::new(config)?;
    let ones = vec![1.0; perturbation.len()];
    let shift = first.m0.bilinear(&ones, perturbation) / first.m0.bilinear(&ones, &ones);
    if shift.abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "initial data means differ by {shift:e}; the pair needs equal means"
        )));
    }
    let u1: Vec<f64> = first.state.alpha.iter().zip(perturbation).map(|(a, p)| a + p).collect();
    let mut second = Simulation::with_initial(config, first.mesh0.clone(), u1)?;
    let distance = |a: &Simulation, b: &Simulation| -> Result<f64> {
        let diff: Vec<f64> = a.state.alpha.iter().zip(&b.state.alpha).map(|(x, y)| x - y).collect();
        rho_h_minus1_norm(&a.weighted_operators(), &diff)
    };
    let mut times = vec![first.state.time];
    let mut distances = vec![distance(&first, &second)?];
    while !first.is_finished() {
        first.step()?;
        second.step()?;
        times.push(first.state.time);
        distances.push(distance(&first, &second)?);
    }
    Ok(StabilitySeries::from_series(times, distances))
}
