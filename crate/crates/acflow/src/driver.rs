//! High-level run orchestration shared by the binary and the examples:
//! build the mesh and stepper for a resolved configuration, produce initial
//! data, run, and emit the trace / snapshots / metadata.

use std::path::Path;
use std::sync::Arc;

use crate::adapt::{run_adaptive, run_constant, RunOptions, RunResult};
use crate::config::ResolvedRun;
use crate::fem::Spaces;
use crate::mesh::build_rectangle_mesh;
use crate::output;
use crate::solver::{init_state_scenario, LevelFields, Stepper};
use crate::verify::{run_convergence, ConvergenceTable, StudyConfig};
use crate::Result;

pub struct ScenarioRun {
    pub spaces: Arc<Spaces>,
    pub result: RunResult,
    pub seed: u64,
}

/// Build everything for a resolved scenario and return the stepper plus
/// initial level (callers that need custom stepping use this directly).
pub fn prepare_scenario(run: &ResolvedRun) -> Result<(Arc<Spaces>, Stepper, LevelFields)> {
    let mesh = build_rectangle_mesh(
        run.scenario.x_range,
        run.scenario.y_range,
        run.nx,
        run.ny,
    )?;
    let spaces = Arc::new(Spaces::new(mesh));
    let params = run.params();
    let (phi0, u_raw) = run.scenario.initial_nodal_data(&spaces, run.seed);
    let level0 = init_state_scenario(&spaces, &params, phi0, u_raw, 0.0)?;
    let stepper = Stepper::new(Arc::clone(&spaces), params, run.theta, run.solver, None)?;
    Ok((spaces, stepper, level0))
}

/// Constant-step or adaptive scenario run with outputs written under
/// `out_dir` when given.
pub fn scenario_run(
    run: &ResolvedRun,
    adaptive: bool,
    out_dir: Option<&Path>,
    config_dump: &str,
) -> Result<ScenarioRun> {
    let (spaces, mut stepper, level0) = prepare_scenario(run)?;
    let opts = RunOptions {
        horizon: run.scenario.horizon,
        snapshot_times: run.snapshot_times.clone(),
        record_stride: run.record_stride,
    };
    let result = if adaptive {
        run_adaptive(&mut stepper, level0, &run.controller, &opts)?
    } else {
        run_constant(&mut stepper, level0, run.scenario.dt, &opts)?
    };

    if let Some(dir) = out_dir {
        output::emit_energy_trace(&result.records, &dir.join("energy.csv"))?;
        for snap in &result.snapshots {
            let name = format!("snapshot_t{:.6}.vtk", snap.t);
            output::emit_snapshot(&spaces, snap, &dir.join(name))?;
        }
        output::emit_snapshot(&spaces, &result.state.curr, &dir.join("final.vtk"))?;
        let command = if adaptive { "adapt" } else { "run" };
        output::write_metadata(&dir.join("metadata.txt"), command, config_dump, run.seed)?;
    }
    Ok(ScenarioRun {
        spaces,
        result,
        seed: run.seed,
    })
}

/// Convergence study with table outputs.
pub fn convergence_run(
    study: &StudyConfig,
    out_dir: Option<&Path>,
    config_dump: &str,
) -> Result<ConvergenceTable> {
    let table = run_convergence(study)?;
    if let Some(dir) = out_dir {
        output::emit_convergence_csv(&table, &dir.join("convergence.csv"))?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("convergence.txt"),
            output::convergence_table_text(&table),
        )?;
        output::write_metadata(&dir.join("metadata.txt"), "converge", config_dump, 0)?;
    }
    Ok(table)
}
