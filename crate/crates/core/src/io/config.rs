//! Flat `key = value` run configuration.
//!
//! One key per line, dotted namespaces, `#` starts a comment. Unknown and
//! repeated keys are errors. Recognised keys:
//!
//! | key | value | default |
//! |-----|-------|---------|
//! | `domain` | `[a,b]x[c,d]` or `[a,b]x[c,d]x[e,f]` | required |
//! | `mesh.n` | cells per axis | required |
//! | `fem.degree` | `1` or `2` | `1` |
//! | `params.epsilon`, `params.chi0`, `params.delta`, `params.kappa`, `params.p0`, `params.B` | reals | required |
//! | `params.lambda` | real | `4 chi0^2` |
//! | `time.tau`, `time.T` | reals | required |
//! | `ic` | `sim1`..`sim4` or `constant` | `sim1` |
//! | `ic.u0`, `ic.n0` | reals, only with `ic = constant` | required there |
//! | `init.projection` | `ritz` or `interpolate` | `ritz` |
//! | `solver.kind` | `direct` or `gmres` | `direct` |
//! | `solver.tol` | real | `1e-12` direct, `1e-10` gmres |
//! | `solver.restart`, `solver.max_iter` | integers (gmres) | `60`, `5000` |
//! | `output.dir` | path | no output |
//! | `output.series_every` | time between series rows | `time.tau` |
//! | `output.snapshot_every` | time between snapshots | final state only |
//! | `output.format` | `csv`, `vtk` or `both` | `csv` |
//! | `rates.levels` | comma-separated resolutions | `n,2n,4n,8n` |
//! | `rates.taus` | comma-separated step sizes | five halvings of `time.tau` |
//! | `rates.stride` | time between compared snapshots | `10 time.tau` |

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::linalg::{SolverConfig, SolverKind};
use crate::harness::{InitialData, RunSetup, Scenario};
use crate::mesh::BoxDomain;
use crate::model::ModelParams;
use crate::stepper::InitProjection;

const KNOWN_KEYS: &[&str] = &[
    "domain",
    "mesh.n",
    "fem.degree",
    "params.epsilon",
    "params.lambda",
    "params.chi0",
    "params.delta",
    "params.kappa",
    "params.p0",
    "params.B",
    "time.tau",
    "time.T",
    "ic",
    "ic.u0",
    "ic.n0",
    "init.projection",
    "solver.kind",
    "solver.tol",
    "solver.restart",
    "solver.max_iter",
    "output.dir",
    "output.series_every",
    "output.snapshot_every",
    "output.format",
    "rates.levels",
    "rates.taus",
    "rates.stride",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SnapshotFormat {
    #[default]
    Csv,
    Vtk,
    Both,
}

impl SnapshotFormat {
    pub fn csv(self) -> bool {
        matches!(self, SnapshotFormat::Csv | SnapshotFormat::Both)
    }

    pub fn vtk(self) -> bool {
        matches!(self, SnapshotFormat::Vtk | SnapshotFormat::Both)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub series_every: f64,
    /// `None` writes only the final state.
    pub snapshot_every: Option<f64>,
    pub format: SnapshotFormat,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateConfig {
    pub levels: Vec<usize>,
    pub taus: Vec<f64>,
    pub stride: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub setup: RunSetup,
    pub output: OutputConfig,
    pub rates: RateConfig,
}

impl RunConfig {
    /// Steps between consecutive series rows.
    pub fn series_stride(&self) -> usize {
        steps_for(self.output.series_every, self.setup.params.tau)
    }

    /// Steps between snapshots, if periodic snapshots are requested.
    pub fn snapshot_stride(&self) -> Option<usize> {
        self.output.snapshot_every.map(|t| steps_for(t, self.setup.params.tau))
    }
}

fn steps_for(interval: f64, tau: f64) -> usize {
    ((interval / tau) * (1.0 + 1e-12)).floor().max(1.0) as usize
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

struct Entries {
    map: HashMap<&'static str, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("`{key}`: cannot parse `{v}`"),
            }),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse(key)?
            .ok_or_else(|| Error::validation(key, "missing required key"))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .split(',')
                .map(|item| {
                    item.trim().parse().map_err(|_| Error::Parse {
                        line,
                        message: format!("`{key}`: cannot parse list item `{}`", item.trim()),
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

fn parse_domain(line: usize, text: &str) -> Result<BoxDomain> {
    let err = |message: String| Error::Parse { line, message };
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in text.split('x') {
        let inner = part
            .trim()
            .strip_prefix('[')
            .and_then(|p| p.strip_suffix(']'))
            .ok_or_else(|| err(format!("`domain`: expected `[a,b]` intervals, found `{}`", part.trim())))?;
        let bounds: Vec<&str> = inner.split(',').collect();
        if bounds.len() != 2 {
            return Err(err(format!("`domain`: interval `{}` needs two bounds", part.trim())));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| err(format!("`domain`: cannot parse bound `{}`", s.trim())))
        };
        lo.push(parse(bounds[0])?);
        hi.push(parse(bounds[1])?);
    }
    BoxDomain::new(&lo, &hi).map_err(|e| Error::validation("domain", e.to_string()))
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let known = KNOWN_KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown key `{key}`"),
        })?;
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` has no value"),
            });
        }
        if let Some((first, _)) = map.insert(*known, (line, value.to_string())) {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` repeats line {first}"),
            });
        }
    }
    let e = Entries { map };

    let domain = match e.raw("domain") {
        Some((line, v)) => parse_domain(line, v)?,
        None => return Err(Error::validation("domain", "missing required key")),
    };
    let chi0: f64 = e.required("params.chi0")?;
    let tau: f64 = e.required("time.tau")?;
    let params = ModelParams {
        epsilon: e.required("params.epsilon")?,
        lambda: e.parse("params.lambda")?.unwrap_or_else(|| ModelParams::default_lambda(chi0)),
        chi0,
        delta: e.required("params.delta")?,
        kappa: e.required("params.kappa")?,
        p0: e.required("params.p0")?,
        shift: e.required("params.B")?,
        tau,
        final_time: e.required("time.T")?,
    };
    params.validate()?;

    let ic_name = e.raw("ic").map(|(_, v)| v).unwrap_or("sim1");
    let initial = if ic_name == "constant" {
        InitialData::Constant {
            u0: e.required("ic.u0")?,
            n0: e.required("ic.n0")?,
        }
    } else {
        for key in ["ic.u0", "ic.n0"] {
            if e.raw(key).is_some() {
                return Err(Error::validation(key, "only allowed with `ic = constant`"));
            }
        }
        InitialData::Scenario(
            ic_name
                .parse::<Scenario>()
                .map_err(|err| Error::validation("ic", err.to_string()))?,
        )
    };

    let projection = match e.raw("init.projection").map(|(_, v)| v) {
        None | Some("ritz") => InitProjection::Ritz,
        Some("interpolate") => InitProjection::Interpolate,
        Some(other) => {
            return Err(Error::validation(
                "init.projection",
                format!("expected `ritz` or `interpolate`, found `{other}`"),
            ))
        }
    };

    let mut solver = match e.raw("solver.kind").map(|(_, v)| v) {
        None | Some("direct") => SolverConfig::direct(),
        Some("gmres") => SolverConfig::gmres(),
        Some(other) => {
            return Err(Error::validation(
                "solver.kind",
                format!("expected `direct` or `gmres`, found `{other}`"),
            ))
        }
    };
    if let Some(tol) = e.parse::<f64>("solver.tol")? {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::validation("solver.tol", "must lie in (0, 1)"));
        }
        solver.tolerance = tol;
    }
    let restart = e.parse::<usize>("solver.restart")?;
    let max_iter = e.parse::<usize>("solver.max_iter")?;
    match &mut solver.kind {
        SolverKind::Gmres {
            restart: r,
            max_iter: m,
        } => {
            if let Some(v) = restart {
                *r = v;
            }
            if let Some(v) = max_iter {
                *m = v;
            }
            if *r == 0 || *m == 0 {
                return Err(Error::validation("solver.restart", "GMRES limits must be positive"));
            }
        }
        SolverKind::Direct => {
            if restart.is_some() || max_iter.is_some() {
                return Err(Error::validation("solver.kind", "restart/max_iter require `gmres`"));
            }
        }
    }

    let n: usize = e.required("mesh.n")?;
    let setup = RunSetup {
        domain,
        n,
        degree: e.parse("fem.degree")?.unwrap_or(1),
        params,
        initial,
        projection,
        solver,
    };
    setup.validate()?;

    let cadence = |key: &str| -> Result<Option<f64>> {
        let v = e.parse::<f64>(key)?;
        if let Some(t) = v {
            if !(t >= tau * (1.0 - 1e-12)) || !t.is_finite() {
                return Err(Error::validation(key, format!("cadence {t} is shorter than time.tau = {tau}")));
            }
        }
        Ok(v)
    };
    let format = match e.raw("output.format").map(|(_, v)| v) {
        None | Some("csv") => SnapshotFormat::Csv,
        Some("vtk") => SnapshotFormat::Vtk,
        Some("both") => SnapshotFormat::Both,
        Some(other) => {
            return Err(Error::validation(
                "output.format",
                format!("expected `csv`, `vtk` or `both`, found `{other}`"),
            ))
        }
    };
    let output = OutputConfig {
        dir: e.raw("output.dir").map(|(_, v)| PathBuf::from(v)),
        series_every: cadence("output.series_every")?.unwrap_or(tau),
        snapshot_every: cadence("output.snapshot_every")?,
        format,
    };

    let rates = RateConfig {
        levels: e.list("rates.levels")?.unwrap_or_else(|| vec![n, 2 * n, 4 * n, 8 * n]),
        taus: e
            .list("rates.taus")?
            .unwrap_or_else(|| (0..5).map(|i| tau / f64::powi(2.0, i)).collect()),
        stride: cadence("rates.stride")?.unwrap_or(10.0 * tau),
    };
    if rates.levels.contains(&0) {
        return Err(Error::validation("rates.levels", "resolutions must be positive"));
    }
    if rates.taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::validation("rates.taus", "step sizes must be positive"));
    }

    Ok(RunConfig { setup, output, rates })
}
