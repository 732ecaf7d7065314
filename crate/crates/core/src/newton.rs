//! Damped Newton iteration for the coupled (order parameter, chemical
//! potential) system shared by both models.
//!
//! Unknowns `(x, y)` solve
//!
//! ```text
//! R1 = (Mₓ + dt N) x + dt K y − r₀   = 0
//! R2 = S x + Φ(x) − E x̃ − W y        = 0
//! ```
//!
//! where `Φ` is the quadrature load of `(θ/2)φ_δ` and `x̃` is the previous
//! step (convex splitting) or `x` itself (fully implicit).

use crate::error::{Error, Result};
use crate::forms::{phi_jacobian, phi_load};
use crate::potential::PotentialParams;
use crate::quadrature::QuadraturePolicy;
use crate::sparse::{block_matrix, SparseLu, SparseMatrix};
use crate::surface::SurfaceMesh;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonSettings {
    /// Residual tolerance per unit area (max norm).
    pub tolerance: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 25,
            max_halvings: 8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub halvings: usize,
}

/// Nonlinear load `Φ` evaluated on a fixed mesh.
#[derive(Clone, Copy)]
pub(crate) struct PotentialLoad<'a> {
    pub mesh: &'a SurfaceMesh,
    pub params: &'a PotentialParams,
    pub policy: QuadraturePolicy,
    pub weighted: bool,
}

impl PotentialLoad<'_> {
    fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        phi_load(self.mesh, self.params, x, self.policy, self.weighted)
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix> {
        phi_jacobian(self.mesh, self.params, x, self.policy, self.weighted)
    }
}

pub(crate) struct CoupledSystem<'a> {
    pub dt: f64,
    /// `Mₓ + dt N`.
    pub first_x: SparseMatrix,
    pub flux: &'a SparseMatrix,
    pub rhs: Vec<f64>,
    pub stiffness: &'a SparseMatrix,
    pub concave: &'a SparseMatrix,
    pub mu_mass: &'a SparseMatrix,
    /// `Some(x_prev)` for convex splitting.
    pub explicit: Option<&'a [f64]>,
    pub load: PotentialLoad<'a>,
    pub area: f64,
    pub time: f64,
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl CoupledSystem<'_> {
    fn residual(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let mut r1 = self.first_x.mul_vec(x);
        axpy(&mut r1, self.dt, &self.flux.mul_vec(y));
        axpy(&mut r1, -1.0, &self.rhs);
        let mut r2 = self.stiffness.mul_vec(x);
        axpy(&mut r2, 1.0, &self.load.value(x)?);
        axpy(&mut r2, -1.0, &self.concave.mul_vec(self.explicit.unwrap_or(x)));
        axpy(&mut r2, -1.0, &self.mu_mass.mul_vec(y));
        r1.extend(r2);
        Ok(r1)
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix> {
        let n = x.len();
        let jphi = self.load.jacobian(x)?;
        let mut blocks = vec![
            (0, 0, 1.0, &self.first_x),
            (0, n, self.dt, self.flux),
            (n, 0, 1.0, self.stiffness),
            (n, 0, 1.0, &jphi),
            (n, n, -1.0, self.mu_mass),
        ];
        if self.explicit.is_none() {
            blocks.push((n, 0, -1.0, self.concave));
        }
        Ok(block_matrix(2 * n, 2 * n, &blocks))
    }

    fn in_safeguard(&self, x: &[f64]) -> bool {
        let (lo, hi) = self.load.params.newton_safeguard_region();
        x.iter().all(|v| (lo..=hi).contains(v))
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        !self.load.params.is_sharp() || x.iter().all(|v| v.abs() < 1.0)
    }

    /// Newton iteration from `(x, y)`.
    ///
    /// Nodal values bound the P1 interpolant, so checking them is the same
    /// as checking every quadrature point. An update is halved while it
    /// would carry an iterate out of the safeguard region; iterates already
    /// outside (possible only when regularized) take full steps.
    pub fn solve(
        &self,
        mut x: Vec<f64>,
        mut y: Vec<f64>,
        settings: &NewtonSettings,
    ) -> Result<(Vec<f64>, Vec<f64>, NewtonReport)> {
        let n = x.len();
        let tol = settings.tolerance * self.area;
        let mut report = NewtonReport::default();
        let diverged = |report: &NewtonReport| Error::NewtonDivergence {
            iterations: report.iterations,
            time: self.time,
            history: report.residual_history.clone(),
        };
        let mut r = self.residual(&x, &y)?;
        report.residual_history.push(max_norm(&r));
        while max_norm(&r) > tol {
            if report.iterations == settings.max_iterations {
                return Err(diverged(&report));
            }
            report.iterations += 1;
            let jac = self.jacobian(&x)?;
            let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = SparseLu::factor(&jac)?.solve(&neg_r)?;
            let guarded = self.in_safeguard(&x);
            let trial = |lambda: f64| -> Vec<f64> { x.iter().zip(&delta[..n]).map(|(a, d)| a + lambda * d).collect() };
            let mut lambda = 1.0;
            let mut x_new = trial(lambda);
            let mut halvings = 0;
            while halvings < settings.max_halvings
                && !(if guarded { self.in_safeguard(&x_new) } else { self.in_domain(&x_new) })
            {
                lambda *= 0.5;
                halvings += 1;
                x_new = trial(lambda);
            }
            if !self.in_domain(&x_new) {
                return Err(diverged(&report));
            }
            report.halvings += halvings;
            axpy(&mut y, lambda, &delta[n..]);
            x = x_new;
            r = self.residual(&x, &y)?;
            report.residual_history.push(max_norm(&r));
        }
        Ok((x, y, report))
    }
}
