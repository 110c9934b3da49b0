//! Extrapolated convergence rates from consecutive-level differences.
//!
//! For a ladder of levels the error of level `i` is the difference between
//! its solution and that of level `i + 1`, measured on the finer level. Rates
//! are `log2(e_i / e_{i+1})`.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::RunSetup;
use crate::diagnostics::{check_series, InvariantSummary, InvariantTolerances};
use crate::error::{Error, Result};
use crate::fem::norms::{norm, NormKind};
use crate::fem::projection::prolong;
use crate::fem::FeFunction;
use crate::stepper::State;

/// Norms reported in rate tables.
pub const RATE_NORMS: [NormKind; 3] = [NormKind::L2, NormKind::H1, NormKind::Linf];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateAxis {
    Space,
    Time,
}

impl RateAxis {
    pub fn label(self) -> &'static str {
        match self {
            RateAxis::Space => "h",
            RateAxis::Time => "tau",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolutionField {
    U,
    Mu,
    N,
}

impl SolutionField {
    pub const ALL: [SolutionField; 3] = [SolutionField::U, SolutionField::Mu, SolutionField::N];

    pub fn label(self) -> &'static str {
        match self {
            SolutionField::U => "u",
            SolutionField::Mu => "mu",
            SolutionField::N => "n",
        }
    }
}

/// The three solution components at one instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub time: f64,
    pub u: FeFunction,
    pub mu: FeFunction,
    pub n: FeFunction,
}

impl Snapshot {
    /// Fails for the initial level, which carries no chemical potential.
    pub fn from_state(state: &State) -> Result<Self> {
        let mu = state
            .mu
            .clone()
            .ok_or_else(|| Error::InvalidArgument("snapshot requires a stepped state".into()))?;
        Ok(Self {
            time: state.time,
            u: state.u.clone(),
            mu,
            n: state.n.clone(),
        })
    }

    pub fn field(&self, f: SolutionField) -> &FeFunction {
        match f {
            SolutionField::U => &self.u,
            SolutionField::Mu => &self.mu,
            SolutionField::N => &self.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateEntry {
    pub field: SolutionField,
    pub norm: NormKind,
    /// One error per consecutive level pair.
    pub errors: Vec<f64>,
    /// `log2(errors[i] / errors[i + 1])`; NaN where an error vanishes.
    pub rates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateTable {
    pub axis: RateAxis,
    /// Mesh resolutions (space) or step sizes (time), coarse to fine.
    pub levels: Vec<f64>,
    pub entries: Vec<RateEntry>,
}

impl RateTable {
    /// Assembles a table from per-pair errors indexed `[pair][field][norm]`
    /// in the order of [`SolutionField::ALL`] and [`RATE_NORMS`].
    pub fn from_pair_errors(axis: RateAxis, levels: Vec<f64>, pair_errors: &[[[f64; 3]; 3]]) -> Self {
        let mut entries = Vec::new();
        for (fi, &field) in SolutionField::ALL.iter().enumerate() {
            for (ni, &norm) in RATE_NORMS.iter().enumerate() {
                let errors: Vec<f64> = pair_errors.iter().map(|e| e[fi][ni]).collect();
                let rates = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
                entries.push(RateEntry {
                    field,
                    norm,
                    errors,
                    rates,
                });
            }
        }
        Self { axis, levels, entries }
    }

    pub fn entry(&self, field: SolutionField, norm: NormKind) -> Option<&RateEntry> {
        self.entries.iter().find(|e| e.field == field && e.norm == norm)
    }

    /// Rate between the two finest errors.
    pub fn finest_rate(&self, field: SolutionField, norm: NormKind) -> Option<f64> {
        self.entry(field, norm).and_then(|e| e.rates.last().copied())
    }

    /// One row per (field, norm, level pair):
    /// `axis,coarse,fine,field,norm,error,rate` with an empty rate on the
    /// coarsest pair.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,coarse,fine,field,norm,error,rate\n");
        for e in &self.entries {
            for (i, err) in e.errors.iter().enumerate() {
                let rate = if i == 0 {
                    String::new()
                } else {
                    format!("{:.16e}", e.rates[i - 1])
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.16e},{}",
                    self.axis.label(),
                    self.levels[i],
                    self.levels[i + 1],
                    e.field.label(),
                    e.norm.label(),
                    err,
                    rate
                );
            }
        }
        out
    }
}

/// A rate table together with the invariant checks of every level run.
#[derive(Clone, Debug)]
pub struct RateStudy {
    pub table: RateTable,
    pub checks: Vec<InvariantSummary>,
}

impl RateStudy {
    pub fn invariants_hold(&self) -> bool {
        self.checks.iter().all(InvariantSummary::passed)
    }
}

/// Norms of `prolong(coarse) - fine` for each field, maximised over the
/// paired snapshots. Both slices must list the same instants.
pub fn compare_levels(coarse: &[Snapshot], fine: &[Snapshot]) -> Result<[[f64; 3]; 3]> {
    if coarse.len() != fine.len() || coarse.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "cannot compare {} coarse snapshots with {} fine ones",
            coarse.len(),
            fine.len()
        )));
    }
    let mut out = [[0.0; 3]; 3];
    for (c, f) in coarse.iter().zip(fine) {
        if (c.time - f.time).abs() > 1e-9 * c.time.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "snapshot times differ: {} vs {}",
                c.time, f.time
            )));
        }
        for (fi, &field) in SolutionField::ALL.iter().enumerate() {
            let fine_fn = f.field(field);
            let coarse_fn = c.field(field);
            // Temporal studies compare on one mesh; spatial ones lift first.
            let diff = if coarse_fn.space().num_dofs() == fine_fn.space().num_dofs() {
                fine_fn.combine(-1.0, coarse_fn, 1.0)?
            } else {
                prolong(coarse_fn, fine_fn.space())?.sub(fine_fn)?
            };
            for (ni, &kind) in RATE_NORMS.iter().enumerate() {
                out[fi][ni] = f64::max(out[fi][ni], norm(&diff, kind));
            }
        }
    }
    Ok(out)
}

/// Steps per snapshot for a time stride, which must be a multiple of tau.
fn stride_steps(stride: f64, tau: f64) -> Result<usize> {
    let ratio = stride / tau;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::validation(
            "rates.stride",
            format!("stride {stride} is not a positive multiple of tau = {tau}"),
        ));
    }
    Ok(k as usize)
}

struct LevelRun {
    snapshots: Vec<Snapshot>,
    check: InvariantSummary,
}

fn run_level(setup: &RunSetup, every: Option<usize>, tol: &InvariantTolerances) -> Result<LevelRun> {
    let sim = setup.build()?;
    let mut snapshots = Vec::new();
    let outcome = sim.run(|ev| {
        if let Some(k) = every {
            if ev.current.step % k == 0 {
                snapshots.push(Snapshot::from_state(ev.current)?);
            }
        }
        Ok(())
    })?;
    if every.is_none() {
        snapshots.push(Snapshot::from_state(&outcome.state)?);
    }
    Ok(LevelRun {
        snapshots,
        check: check_series(&outcome.series, tol),
    })
}

/// Runs `base` on each resolution in `levels` (each twice the previous) and
/// compares solutions at every multiple of `stride` in time.
pub fn spatial_rate(
    base: &RunSetup,
    levels: &[usize],
    stride: f64,
    tol: &InvariantTolerances,
) -> Result<RateStudy> {
    if levels.len() < 3 {
        return Err(Error::validation("rates.levels", "at least three levels are required"));
    }
    if levels.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::validation("rates.levels", "each level must double the previous resolution"));
    }
    let every = stride_steps(stride, base.params.tau)?;
    if every > base.params.num_steps() {
        return Err(Error::validation("rates.stride", "no snapshot falls within the final time"));
    }
    let runs: Vec<LevelRun> = levels
        .par_iter()
        .map(|&n| {
            let setup = RunSetup { n, ..base.clone() };
            run_level(&setup, Some(every), tol)
        })
        .collect::<Result<_>>()?;
    let pair_errors = runs
        .windows(2)
        .map(|w| compare_levels(&w[0].snapshots, &w[1].snapshots))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateStudy {
        table: RateTable::from_pair_errors(
            RateAxis::Space,
            levels.iter().map(|&n| n as f64).collect(),
            &pair_errors,
        ),
        checks: runs.into_iter().map(|r| r.check).collect(),
    })
}

/// Runs `base` with each step size in `taus` (each half the previous) on
/// the same mesh and compares the final states.
pub fn temporal_rate(base: &RunSetup, taus: &[f64], tol: &InvariantTolerances) -> Result<RateStudy> {
    if taus.len() < 3 {
        return Err(Error::validation("rates.taus", "at least three step sizes are required"));
    }
    if taus.windows(2).any(|w| (w[1] - 0.5 * w[0]).abs() > 1e-12 * w[0]) {
        return Err(Error::validation("rates.taus", "each step size must halve the previous one"));
    }
    let final_time = base.params.final_time;
    for &tau in taus {
        let steps = (final_time / tau).round();
        if steps < 1.0 || (steps * tau - final_time).abs() > 1e-9 * final_time {
            return Err(Error::validation(
                "rates.taus",
                format!("tau = {tau} does not divide the final time {final_time}"),
            ));
        }
    }
    let runs: Vec<LevelRun> = taus
        .par_iter()
        .map(|&tau| {
            let mut setup = base.clone();
            setup.params.tau = tau;
            run_level(&setup, None, tol)
        })
        .collect::<Result<_>>()?;
    let pair_errors = runs
        .windows(2)
        .map(|w| compare_levels(&w[0].snapshots, &w[1].snapshots))
        .collect::<Result<Vec<_>>>()?;
    Ok(RateStudy {
        table: RateTable::from_pair_errors(RateAxis::Time, taus.to_vec(), &pair_errors),
        checks: runs.into_iter().map(|r| r.check).collect(),
    })
}
