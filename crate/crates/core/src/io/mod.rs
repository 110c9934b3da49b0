//! Run configuration, output formats and the configured run pipeline.

pub mod config;
pub mod output;

use std::path::Path;

use crate::error::Result;
use crate::stepper::{RunOutcome, State};

pub use config::{parse_config, OutputConfig, RateConfig, RunConfig, SnapshotFormat};
pub use output::{read_field, read_series, write_field, write_rate_table, write_series, write_snapshot, write_vtk};

fn write_state(state: &State, dir: &Path, stem: &str, config: &RunConfig) -> Result<()> {
    if config.output.format.csv() {
        write_snapshot(state, dir, stem)?;
    }
    if config.output.format.vtk() {
        write_vtk(state, &dir.join(format!("{stem}.vtk")))?;
    }
    Ok(())
}

/// Runs a configuration and writes its outputs when `output.dir` is set:
/// `series.csv` at the series cadence, `step_NNNNNN_*` snapshots at the
/// snapshot cadence, and `final_*` for the last state.
///
/// The returned outcome always carries the full per-step series.
pub fn execute_run(config: &RunConfig) -> Result<RunOutcome> {
    let sim = config.setup.build()?;
    let dir = config.output.dir.as_deref();
    let snapshot_stride = config.snapshot_stride();
    if let (Some(dir), Some(_)) = (dir, snapshot_stride) {
        write_state(&sim.state, dir, "step_000000", config)?;
    }
    let outcome = sim.run(|ev| {
        if let (Some(dir), Some(k)) = (dir, snapshot_stride) {
            if ev.current.step % k == 0 {
                write_state(ev.current, dir, &format!("step_{:06}", ev.current.step), config)?;
            }
        }
        Ok(())
    })?;
    if let Some(dir) = dir {
        let stride = config.series_stride();
        let rows: Vec<_> = outcome
            .series
            .iter()
            .filter(|r| r.step % stride == 0 || r.step == outcome.state.step)
            .copied()
            .collect();
        write_series(&rows, &dir.join("series.csv"))?;
        write_state(&outcome.state, dir, "final", config)?;
    }
    Ok(outcome)
}
