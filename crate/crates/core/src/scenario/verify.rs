use std::fmt::Write as _;

use super::config::RunConfig;
use crate::diagnostics::{
    sample_times, transport_convergence, transport_test_fields, verify_transport_identity, ConvergenceReport,
    TransportCheck, DT_LADDER,
};
use crate::error::Result;
use crate::surface::build_reference_surface;

/// Smallest acceptable observed order.
pub const MIN_ORDER: f64 = 1.8;

/// Step of the extra density check.
pub const RHO_ODE_DT: f64 = 1e-4;
pub const RHO_ODE_TOLERANCE: f64 = 1e-6;

/// Results of the transport-identity battery for one configuration.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub times: Vec<f64>,
    pub reports: Vec<ConvergenceReport>,
    /// Worst density-ODE residual at `RHO_ODE_DT`, when that check ran.
    pub rho_ode_fine: Option<f64>,
}

impl VerifyOutcome {
    pub fn report_passes(report: &ConvergenceReport) -> bool {
        report.order.is_none_or(|p| p >= MIN_ORDER)
    }

    pub fn passed(&self) -> bool {
        self.reports.iter().all(Self::report_passes) && self.rho_ode_fine.is_none_or(|r| r <= RHO_ODE_TOLERANCE)
    }

    /// Plain-text table: one row per check with the residual at each Δt
    /// and the observed order.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<14}", "check");
        for dt in DT_LADDER {
            let _ = write!(out, " {:>14}", format!("dt={dt:e}"));
        }
        let _ = writeln!(out, " {:>8}  status", "order");
        for r in &self.reports {
            let _ = write!(out, "{:<14}", r.which.name());
            for res in &r.residuals {
                let _ = write!(out, " {res:>14.6e}");
            }
            let order = r.order.map_or_else(|| "exact".to_string(), |p| format!("{p:.3}"));
            let status = if Self::report_passes(r) { "ok" } else { "FAIL" };
            let _ = writeln!(out, " {order:>8}  {status}");
        }
        if let Some(res) = self.rho_ode_fine {
            let status = if res <= RHO_ODE_TOLERANCE { "ok" } else { "FAIL" };
            let _ = writeln!(out, "rho_ode at dt={RHO_ODE_DT:e}: {res:.6e} (limit {RHO_ODE_TOLERANCE:e})  {status}");
        }
        out
    }
}

/// Runs the selected transport checks along the configured flow at five
/// sample times in `(0, T)`.
pub fn verify_battery(config: &RunConfig, which: &[TransportCheck]) -> Result<VerifyOutcome> {
    config.validate()?;
    let mesh0 = build_reference_surface(config.surface.preset(), config.surface.refinement())?;
    let flow = config.flow_field();
    let times = sample_times(config.t_final);
    let (eta, phi) = transport_test_fields(&mesh0);
    let mut reports = Vec::with_capacity(which.len());
    let mut rho_ode_fine = None;
    for &check in which {
        reports.push(transport_convergence(&mesh0, &flow, check, &eta, &phi, &times, &DT_LADDER, config.quadrature)?);
        if check == TransportCheck::RhoOde {
            let mut worst: f64 = 0.0;
            for &t in &times {
                let r = verify_transport_identity(&mesh0, &flow, check, &eta, &phi, t, RHO_ODE_DT, config.quadrature)?;
                worst = worst.max(r.residual);
            }
            rho_ode_fine = Some(worst);
        }
    }
    Ok(VerifyOutcome {
        times,
        reports,
        rho_ode_fine,
    })
}
