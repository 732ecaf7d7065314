use std::path::PathBuf;

use super::config::RunConfig;
use super::output::{
    resolve_output_dir, snapshot_name, write_vtk, CsvWriter, PARTIAL_MARKER, RESOLVED_CONFIG,
};
use crate::diagnostics::{admissibility_report, record, AdmissibilityReport, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::forms::{assemble, assemble_mass, FormMatrices};
use crate::model1::{self, ModelKind, PhaseState, StepInput};
use crate::model2::{initialize_weighted, step_weighted_from_guess, WeightedOperators};
use crate::newton::{max_norm, NewtonReport, NewtonSettings};
use crate::potential::PotentialParams;
use crate::sparse::SparseMatrix;
use crate::surface::{build_reference_surface, FlowField, SurfaceMesh};

/// A scenario in progress: mesh, operators and state at the current step.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: RunConfig,
    pub params: PotentialParams,
    pub flow: FlowField,
    pub mesh0: SurfaceMesh,
    pub mesh: SurfaceMesh,
    pub forms: FormMatrices,
    /// Reference (weighted) mass matrix.
    pub m0: SparseMatrix,
    pub state: PhaseState,
    pub step_index: usize,
    pub admissibility: AdmissibilityReport,
    pub settings: NewtonSettings,
    pub last_report: NewtonReport,
    s_r_running: f64,
    previous: Option<(PhaseState, FormMatrices)>,
}

impl Simulation {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let mesh0 = build_reference_surface(config.surface.preset(), config.surface.refinement())?;
        let u0 = config.u0.sample(&mesh0);
        Self::with_initial(config, mesh0, u0)
    }

    /// Starts from explicit nodal initial values on Γ₀.
    pub fn with_initial(config: &RunConfig, mesh0: SurfaceMesh, u0: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let params = config.potential();
        let flow = config.flow_field();
        let n_steps = config.n_steps();
        let admissibility = admissibility_report(&mesh0, &u0, &flow, config.t_final, (n_steps + 1).max(2), config.model)?;
        let forms = assemble(&mesh0, &flow, config.quadrature)?;
        let m0 = assemble_mass(&mesh0, config.quadrature, true);
        let state = match config.model {
            ModelKind::Advected => model1::initialize(&mesh0, &forms, u0, &params, config.quadrature, &admissibility)?,
            ModelKind::Weighted => {
                let ops = WeightedOperators::new(&mesh0, &forms, &m0);
                initialize_weighted(&mesh0, &ops, u0, &params, config.quadrature, &admissibility)?
            }
        };
        Ok(Self {
            config: config.clone(),
            params,
            flow,
            mesh: mesh0.clone(),
            mesh0,
            forms,
            m0,
            state,
            step_index: 0,
            admissibility,
            settings: config.newton,
            last_report: NewtonReport::default(),
            s_r_running: 1.0,
            previous: None,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.config.n_steps()
    }

    pub fn is_finished(&self) -> bool {
        self.step_index >= self.n_steps()
    }

    /// Diagnostics of the current state.
    pub fn record(&mut self) -> DiagnosticsRecord {
        let rec = record(
            self.step_index,
            &self.state,
            &self.mesh,
            &self.forms,
            &self.params,
            self.config.quadrature,
            self.s_r_running,
        );
        self.s_r_running = rec.s_r_running;
        rec
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_from(
        &self,
        state: &PhaseState,
        guess: &PhaseState,
        forms_prev: &FormMatrices,
        mesh: &SurfaceMesh,
        forms: &FormMatrices,
        params: &PotentialParams,
    ) -> Result<(PhaseState, NewtonReport)> {
        match self.config.model {
            ModelKind::Advected => model1::step_from_guess(
                state,
                guess,
                &StepInput {
                    mesh,
                    forms_prev,
                    forms,
                    params,
                    policy: self.config.quadrature,
                    scheme: self.config.scheme,
                    dt: self.config.dt,
                    settings: self.settings,
                },
            ),
            ModelKind::Weighted => {
                let ops = WeightedOperators::new(mesh, forms, &self.m0);
                step_weighted_from_guess(
                    state,
                    guess,
                    &ops,
                    mesh,
                    params,
                    self.config.quadrature,
                    self.config.scheme,
                    self.config.dt,
                    &self.settings,
                )
            }
        }
    }

    /// Regularization widths used for the first step: the target width
    /// doubled `delta_continuation` times, then halved back down. With the
    /// sharp potential the ladder starts at `1e-2 · 2^-k` instead.
    fn continuation_ladder(&self) -> Vec<f64> {
        let k = self.config.delta_continuation;
        let delta = self.params.delta;
        let mut ladder: Vec<f64> = (1..=k)
            .rev()
            .map(|j| if delta > 0.0 { delta * f64::powi(2.0, j as i32) } else { 1e-2 * f64::powi(0.5, (k - j) as i32) })
            .filter(|d| *d < 1.0)
            .collect();
        ladder.push(delta);
        ladder
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::Precondition("simulation already reached T".into()));
        }
        let t_next = self.config.time_of(self.step_index + 1);
        let mesh = self.mesh0.advance(&self.flow, t_next)?;
        let forms = assemble(&mesh, &self.flow, self.config.quadrature)?;
        let ladder = if self.step_index == 0 { self.continuation_ladder() } else { vec![self.params.delta] };
        // Every rung re-solves the same step from the current state; only
        // the Newton starting point moves along the ladder.
        let mut guess = self.state.clone();
        let mut report = NewtonReport::default();
        for delta in ladder {
            let params = self.params.with_delta(delta)?;
            let (solved, r) = self.solve_from(&self.state, &guess, &self.forms, &mesh, &forms, &params)?;
            report.iterations += r.iterations;
            report.halvings += r.halvings;
            report.residual_history.extend(r.residual_history);
            guess = solved;
        }
        let next = guess;
        let previous_forms = std::mem::replace(&mut self.forms, forms);
        let previous_state = std::mem::replace(&mut self.state, next);
        self.previous = Some((previous_state, previous_forms));
        self.mesh = mesh;
        self.step_index += 1;
        self.last_report = report;
        Ok(())
    }

    /// Re-solves the most recent step with regularization `delta` and
    /// returns the max-norm change of the order parameter.
    pub fn resolve_last_step_change(&self, delta: f64) -> Result<f64> {
        let (prev_state, prev_forms) = self
            .previous
            .as_ref()
            .ok_or_else(|| Error::Precondition("no step has been taken yet".into()))?;
        let params = self.params.with_delta(delta)?;
        let (again, _) = self.solve_from(prev_state, prev_state, prev_forms, &self.mesh, &self.forms, &params)?;
        let diff: Vec<f64> = again.alpha.iter().zip(&self.state.alpha).map(|(a, b)| a - b).collect();
        Ok(max_norm(&diff))
    }

    /// Operators of the weighted model at the current step.
    pub fn weighted_operators(&self) -> WeightedOperators {
        WeightedOperators::new(&self.mesh, &self.forms, &self.m0)
    }
}

/// Outcome of a scenario run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<DiagnosticsRecord>,
    pub output_dir: Option<PathBuf>,
    pub final_state: PhaseState,
}

/// Runs a scenario in memory, calling `on_step` after every record.
pub fn run_with<F>(config: &RunConfig, on_step: F) -> Result<RunSummary>
where
    F: FnMut(&Simulation, &DiagnosticsRecord) -> Result<()>,
{
    drive(Simulation::new(config)?, on_step)
}

/// Steps `sim` to the end, recording before the first step and after each.
pub fn drive<F>(mut sim: Simulation, mut on_step: F) -> Result<RunSummary>
where
    F: FnMut(&Simulation, &DiagnosticsRecord) -> Result<()>,
{
    let mut records = Vec::with_capacity(sim.n_steps() + 1);
    let rec = sim.record();
    on_step(&sim, &rec)?;
    records.push(rec);
    while !sim.is_finished() {
        sim.step()?;
        let rec = sim.record();
        on_step(&sim, &rec)?;
        records.push(rec);
    }
    Ok(RunSummary {
        records,
        output_dir: None,
        final_state: sim.state,
    })
}

/// Runs a scenario without writing files.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    run_with(config, |_, _| Ok(()))
}

/// Runs a scenario and writes the resolved config, the per-step CSV and
/// VTK snapshots to the configured output directory. On failure a
/// marker file describing the error is left next to the partial output.
pub fn run_scenario(config: &RunConfig) -> Result<RunSummary> {
    // Invalid or inadmissible input fails here, before anything is written.
    let sim = Simulation::new(config)?;
    let dir = resolve_output_dir(&config.output.directory);
    std::fs::create_dir_all(&dir)?;
    let marker = dir.join(PARTIAL_MARKER);
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    std::fs::write(dir.join(RESOLVED_CONFIG), config.to_toml_string())?;
    let mut csv = CsvWriter::create(&dir.join(&config.output.csv_name))?;
    let every = config.output.snapshot_every;
    let result = drive(sim, |sim, rec| {
        csv.write(rec)?;
        if rec.step % every == 0 {
            write_vtk(
                &dir.join(snapshot_name(rec.step)),
                &sim.mesh,
                &sim.state.alpha,
                &sim.state.beta,
                &format!("step {} time {:.16e}", rec.step, rec.time),
            )?;
        }
        Ok(())
    });
    match result {
        Ok(mut summary) => {
            summary.output_dir = Some(dir);
            Ok(summary)
        }
        Err(err) => {
            std::fs::write(&marker, format!("run stopped early: {err}\n"))?;
            Err(err)
        }
    }
}
