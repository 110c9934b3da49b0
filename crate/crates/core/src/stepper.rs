//! Backward Euler SAV time stepping.
//!
//! Each step solves one linear system for `(u, mu, n)` at the new level with
//! `sigma = n / delta - chi0 u_old` substituted out. With `M`, `K` the mass and
//! stiffness matrices and `W` the mass matrix weighted by `P(u_old)`, the
//! block rows are
//!
//! ```text
//! (1/tau) M u + (K + W) mu - (1/delta) W n            = (1/tau) M u_old - chi0 W u_old
//! (eps^2 K + lambda M) u - M mu - chi0 M n            = -s F
//! -W mu + ((1/tau) M + (1/delta)(K + W)) n            = (1/tau) M n_old + chi0 (K + W) u_old
//! ```
//!
//! where `F_i = <f'(u_old), phi_i>` and `s = r_old / (E1[u_old] + B)`. The
//! auxiliary scalar is then updated explicitly, `r = r_old + s F . (u - u_old)`.

use std::sync::Arc;

use crate::diagnostics::{self, SeriesRecord};
use crate::error::{Error, Result};
use crate::fem::assembly::{
    assemble_mass, assemble_nonlinear_load, assemble_stiffness, assemble_weighted_mass, integrate_composed,
    integrate_pointwise,
};
use crate::fem::linalg::{solve, SolverConfig};
use crate::fem::projection::ritz_projection;
use crate::fem::sparse::{CsrMatrix, SparsityPattern};
use crate::fem::{FeFunction, FeSpace, Field};
use crate::model::ModelParams;

/// Polynomial degree of `f` (quartic) and `f'` (cubic).
pub const POTENTIAL_DEGREE: usize = 4;
pub const POTENTIAL_DERIVATIVE_DEGREE: usize = 3;
/// Degree of `P` on its support.
pub const PROLIFERATION_DEGREE: usize = 1;

/// Time-independent discrete operators shared by every step.
#[derive(Debug)]
pub struct FemContext {
    pub space: Arc<FeSpace>,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    /// `M 1`, so that `mass_ones . v = int v`.
    pub mass_ones: Vec<f64>,
    block_pattern: Arc<SparsityPattern>,
}

impl FemContext {
    pub fn new(space: Arc<FeSpace>) -> Self {
        let mass = assemble_mass(&space);
        let stiffness = assemble_stiffness(&space);
        let mass_ones = mass.mul_vec(&vec![1.0; space.num_dofs()]);
        let block_pattern = Arc::new(block_pattern(space.pattern()));
        Self {
            space,
            mass,
            stiffness,
            mass_ones,
            block_pattern,
        }
    }

    pub fn num_dofs(&self) -> usize {
        self.space.num_dofs()
    }

    /// `E1[u] = int f(u)`, exact for the quartic potential.
    pub fn potential_energy(&self, u: &FeFunction, params: &ModelParams) -> f64 {
        integrate_composed(u, |s| params.f(s), POTENTIAL_DEGREE)
    }

    pub fn proliferation_matrix(&self, u: &FeFunction, params: &ModelParams) -> CsrMatrix {
        assemble_weighted_mass(u, |s| params.proliferation(s), PROLIFERATION_DEGREE)
    }
}

/// Structural presence of the 3x3 blocks (rows U, MU, N; columns U, MU, N).
const BLOCK_PRESENT: [[bool; 3]; 3] = [[true, true, true], [true, true, true], [false, true, true]];

fn block_pattern(base: &SparsityPattern) -> SparsityPattern {
    let n = base.dim();
    let mut entries = Vec::with_capacity(8 * base.nnz());
    for (bi, row) in BLOCK_PRESENT.iter().enumerate() {
        for (bj, &present) in row.iter().enumerate() {
            if !present {
                continue;
            }
            for i in 0..n {
                for &j in base.row(i) {
                    entries.push((bi * n + i, bj * n + j));
                }
            }
        }
    }
    SparsityPattern::from_entries(3 * n, entries)
}

/// One time level of the discrete solution.
#[derive(Clone, Debug)]
pub struct State {
    pub step: usize,
    pub time: f64,
    pub u: FeFunction,
    pub n: FeFunction,
    /// Chemical potential; absent at the initial level.
    pub mu: Option<FeFunction>,
    /// Nutrient potential `n / delta - chi0 u_prev`; absent at the initial level.
    pub sigma: Option<FeFunction>,
    pub r: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitProjection {
    #[default]
    Ritz,
    Interpolate,
}

/// Projects the initial data and sets `r = E1[u0] + B` from the exact `u0`.
pub fn init_state(
    u0: &dyn Field,
    n0: &dyn Field,
    ctx: &FemContext,
    params: &ModelParams,
    projection: InitProjection,
) -> Result<State> {
    let space = &ctx.space;
    let (u, n) = match projection {
        InitProjection::Ritz => (ritz_projection(space, u0)?, ritz_projection(space, n0)?),
        InitProjection::Interpolate => (
            FeFunction::interpolate(space.clone(), u0),
            FeFunction::interpolate(space.clone(), n0),
        ),
    };
    let e1 = integrate_pointwise(space, |x| params.f(u0.value(x)));
    // Rejects E1 + B <= 0 with the same guard the stepper uses.
    params.sav_ratio(0.0, e1)?;
    Ok(State {
        step: 0,
        time: 0.0,
        u,
        n,
        mu: None,
        sigma: None,
        r: e1 + params.shift,
    })
}

/// Assembled linear system of one step.
#[derive(Clone, Debug)]
pub struct StepSystem {
    /// `3N x 3N` matrix in block layout `[u, mu, n]`.
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// `s = r / (E1[u_old] + B)`.
    pub sav_ratio: f64,
    /// `F_i = <f'(u_old), phi_i>`.
    pub load: Vec<f64>,
    /// Proliferation-weighted mass matrix of this step.
    pub weighted_mass: CsrMatrix,
}

impl StepSystem {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

pub fn assemble_step_system(state: &State, ctx: &FemContext, params: &ModelParams) -> Result<StepSystem> {
    let nd = ctx.num_dofs();
    let (m, k) = (&ctx.mass, &ctx.stiffness);
    let w = ctx.proliferation_matrix(&state.u, params);
    let e1 = ctx.potential_energy(&state.u, params);
    let s = params.sav_ratio(state.r, e1)?;
    let load = assemble_nonlinear_load(&state.u, |v| params.f_prime(v), POTENTIAL_DERIVATIVE_DEGREE);

    let inv_tau = 1.0 / params.tau;
    let inv_delta = 1.0 / params.delta;
    let eps2 = params.epsilon * params.epsilon;
    // Coefficients of (M, K, W) in each block.
    let blocks: [[[f64; 3]; 3]; 3] = [
        [[inv_tau, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, -inv_delta]],
        [[params.lambda, eps2, 0.0], [-1.0, 0.0, 0.0], [-params.chi0, 0.0, 0.0]],
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [inv_tau, inv_delta, inv_delta]],
    ];

    let mut a = CsrMatrix::zeros(ctx.block_pattern.clone(), false);
    let base = ctx.space.pattern();
    let (mv, kv, wv) = (m.values(), k.values(), w.values());
    {
        let values = a.values_mut();
        let brp = ctx.block_pattern.row_ptr();
        for (bi, row_blocks) in blocks.iter().enumerate() {
            for i in 0..nd {
                let start = base.row_ptr()[i];
                let len = base.row_ptr()[i + 1] - start;
                let mut pos = brp[bi * nd + i];
                for (bj, coef) in row_blocks.iter().enumerate() {
                    if !BLOCK_PRESENT[bi][bj] {
                        continue;
                    }
                    for kk in start..start + len {
                        values[pos] = coef[0] * mv[kk] + coef[1] * kv[kk] + coef[2] * wv[kk];
                        pos += 1;
                    }
                }
            }
        }
    }

    let u_old = state.u.coeffs();
    let mu_old = m.mul_vec(u_old);
    let mn_old = m.mul_vec(state.n.coeffs());
    let wu_old = w.mul_vec(u_old);
    let ku_old = k.mul_vec(u_old);
    let mut rhs = vec![0.0; 3 * nd];
    for i in 0..nd {
        rhs[i] = inv_tau * mu_old[i] - params.chi0 * wu_old[i];
        rhs[nd + i] = -s * load[i];
        rhs[2 * nd + i] = inv_tau * mn_old[i] + params.chi0 * (ku_old[i] + wu_old[i]);
    }
    Ok(StepSystem {
        matrix: a,
        rhs,
        sav_ratio: s,
        load,
        weighted_mass: w,
    })
}

/// New-level unknowns returned by [`solve_step`].
#[derive(Clone, Debug)]
pub struct StepSolution {
    pub u: FeFunction,
    pub mu: FeFunction,
    pub n: FeFunction,
    pub residual: f64,
}

pub fn solve_step(
    system: &StepSystem,
    ctx: &FemContext,
    solver: &SolverConfig,
    state: &State,
) -> Result<StepSolution> {
    let step_error = |message: String| Error::StepSolve {
        step: state.step + 1,
        time: state.time,
        message,
    };
    let (x, residual) = solve(&system.matrix, &system.rhs, solver).map_err(|e| step_error(e.to_string()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(step_error("solution is not finite".into()));
    }
    let nd = ctx.num_dofs();
    let space = ctx.space.clone();
    Ok(StepSolution {
        u: FeFunction::new(space.clone(), x[..nd].to_vec())?,
        mu: FeFunction::new(space.clone(), x[nd..2 * nd].to_vec())?,
        n: FeFunction::new(space, x[2 * nd..].to_vec())?,
        residual,
    })
}

/// `r_new = r + s F . (u_new - u)`.
pub fn update_r(state: &State, system: &StepSystem, u_new: &FeFunction) -> f64 {
    let increment: f64 = system
        .load
        .iter()
        .zip(u_new.coeffs().iter().zip(state.u.coeffs()))
        .map(|(f, (a, b))| f * (a - b))
        .sum();
    state.r + system.sav_ratio * increment
}

/// By-products of one step that diagnostics reuse.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub solver_residual: f64,
    pub sav_ratio: f64,
    pub weighted_mass: CsrMatrix,
}

/// Advances one step and returns the new state with its step report.
pub fn advance_with_report(
    state: &State,
    ctx: &FemContext,
    params: &ModelParams,
    solver: &SolverConfig,
) -> Result<(State, StepReport)> {
    let system = assemble_step_system(state, ctx, params)?;
    let sol = solve_step(&system, ctx, solver, state)?;
    let r = update_r(state, &system, &sol.u);
    let inv_delta = 1.0 / params.delta;
    let sigma: Vec<f64> = sol
        .n
        .coeffs()
        .iter()
        .zip(state.u.coeffs())
        .map(|(n, u)| inv_delta * n - params.chi0 * u)
        .collect();
    let step = state.step + 1;
    let next = State {
        step,
        time: step as f64 * params.tau,
        u: sol.u,
        n: sol.n,
        mu: Some(sol.mu),
        sigma: Some(FeFunction::new(ctx.space.clone(), sigma)?),
        r,
    };
    let report = StepReport {
        solver_residual: sol.residual,
        sav_ratio: system.sav_ratio,
        weighted_mass: system.weighted_mass,
    };
    Ok((next, report))
}

pub fn advance(state: &State, ctx: &FemContext, params: &ModelParams, solver: &SolverConfig) -> Result<State> {
    advance_with_report(state, ctx, params, solver).map(|(s, _)| s)
}

/// Passed to the observer after every completed step.
pub struct StepEvent<'a> {
    pub previous: &'a State,
    pub current: &'a State,
    pub record: &'a SeriesRecord,
}

/// A configured simulation: operators, parameters and the current state.
pub struct Simulation {
    pub ctx: FemContext,
    pub params: ModelParams,
    pub solver: SolverConfig,
    pub state: State,
}

/// Final state plus one diagnostic record per level (including level 0).
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub state: State,
    pub series: Vec<SeriesRecord>,
}

impl Simulation {
    pub fn new(ctx: FemContext, params: ModelParams, solver: SolverConfig, initial: State) -> Self {
        Self {
            ctx,
            params,
            solver,
            state: initial,
        }
    }

    /// Runs `floor(T / tau)` steps, calling `observer` after each one.
    pub fn run<O>(mut self, mut observer: O) -> Result<RunOutcome>
    where
        O: FnMut(&StepEvent<'_>) -> Result<()>,
    {
        let steps = self.params.num_steps();
        let mut series = Vec::with_capacity(steps + 1);
        series.push(diagnostics::initial_record(&self.state, &self.ctx, &self.params));
        let mut warned = false;
        for _ in 0..steps {
            let u_linf = self.state.u.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let bound = self.params.solvability_tau_bound(u_linf);
            if !warned && self.params.tau >= bound {
                log::warn!(
                    "tau = {} exceeds the unique-solvability bound {bound:.3e} at step {}; continuing",
                    self.params.tau,
                    self.state.step
                );
                warned = true;
            }
            let (next, report) = advance_with_report(&self.state, &self.ctx, &self.params, &self.solver)?;
            let record = diagnostics::step_record(&self.state, &next, &report, &self.ctx, &self.params);
            observer(&StepEvent {
                previous: &self.state,
                current: &next,
                record: &record,
            })?;
            series.push(record);
            self.state = next;
        }
        Ok(RunOutcome {
            state: self.state,
            series,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::function::{AffineField, ConstantField};
    use crate::fem::sparse::dot;
    use crate::harness::scenarios::Scenario;
    use crate::mesh::{build_box_mesh, BoxDomain};

    fn ctx(n: usize) -> FemContext {
        let mesh = build_box_mesh(&BoxDomain::cube(2, -1.0, 1.0).unwrap(), n).unwrap();
        FemContext::new(FeSpace::new(Arc::new(mesh), 1).unwrap())
    }

    fn sim1_state(ctx: &FemContext, params: &ModelParams) -> State {
        let (u0, n0) = Scenario::Sim1.initial_condition(params);
        init_state(u0.as_ref(), n0.as_ref(), ctx, params, InitProjection::Ritz).unwrap()
    }

    #[test]
    fn zero_initial_data() {
        let ctx = ctx(4);
        let params = ModelParams::simulation1();
        let s = init_state(&ConstantField(0.0), &ConstantField(0.0), &ctx, &params, InitProjection::Ritz).unwrap();
        assert_eq!(s.r, 4.0);
        assert!(s.u.coeffs().iter().chain(s.n.coeffs()).all(|&v| v.abs() < 1e-14));
        assert!(s.mu.is_none() && s.sigma.is_none());
    }

    #[test]
    fn affine_initial_data_is_reproduced() {
        let ctx = ctx(4);
        let params = ModelParams::simulation1();
        let f = AffineField {
            constant: 0.4,
            slope: [0.1, 0.2, 0.0],
        };
        let s = init_state(&f, &ConstantField(0.5), &ctx, &params, InitProjection::Ritz).unwrap();
        for (c, x) in s.u.coeffs().iter().zip(ctx.space.dof_coords()) {
            assert!((c - f.value(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn initial_sav_variable_matches_finer_quadrature() {
        let params = ModelParams::simulation1();
        let ctx16 = ctx(16);
        let s = sim1_state(&ctx16, &params);
        let (u0, _) = Scenario::Sim1.initial_condition(&params);
        let fine = ctx(160);
        let reference = integrate_pointwise(&fine.space, |x| params.f(u0.value(x))) + params.shift;
        assert!(((s.r - reference) / reference).abs() < 1e-6);
    }

    #[test]
    fn negative_energy_shift_is_rejected() {
        let ctx = ctx(2);
        let mut params = ModelParams::simulation1();
        params.shift = 0.0;
        // u = 1 gives E1 = -lambda/2 * 4 < 0.
        let err = init_state(&ConstantField(1.0), &ConstantField(0.0), &ctx, &params, InitProjection::Ritz);
        assert!(matches!(err, Err(Error::SavDenominator { .. })));
    }

    #[test]
    fn system_dimension_and_heat_reduction() {
        let ctx = ctx(4);
        let mut params = ModelParams::simulation1();
        params.p0 = 0.0;
        params.chi0 = 0.0;
        let state = sim1_state(&ctx, &params);
        let sys = assemble_step_system(&state, &ctx, &params).unwrap();
        let nd = ctx.num_dofs();
        assert_eq!(sys.dim(), 3 * nd);
        // Row N reduces to (1/tau) M n + (1/delta) K n = (1/tau) M n_old.
        let mn = ctx.mass.mul_vec(state.n.coeffs());
        for i in 0..nd {
            for &j in ctx.space.pattern().row(i) {
                let expect = ctx.mass.get(i, j) / params.tau + ctx.stiffness.get(i, j) / params.delta;
                assert!((sys.matrix.get(2 * nd + i, 2 * nd + j) - expect).abs() < 1e-12);
                assert_eq!(sys.matrix.get(2 * nd + i, nd + j), 0.0);
            }
            assert!((sys.rhs[2 * nd + i] - mn[i] / params.tau).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_are_fixed_points_without_coupling() {
        let ctx = ctx(4);
        let mut params = ModelParams::simulation1();
        params.p0 = 0.0;
        params.chi0 = 0.0;
        let state = init_state(&ConstantField(0.3), &ConstantField(0.6), &ctx, &params, InitProjection::Ritz).unwrap();
        let next = advance(&state, &ctx, &params, &SolverConfig::direct()).unwrap();
        for (a, b) in next.u.coeffs().iter().zip(state.u.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in next.n.coeffs().iter().zip(state.n.coeffs()) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_eq!(next.step, 1);
        assert!((next.time - params.tau).abs() < 1e-18);
    }

    /// Residuals of the unsubstituted weak equations, tested against every
    /// basis function, with sigma rebuilt from its definition.
    #[test]
    fn step_satisfies_original_weak_equations() {
        let ctx = ctx(16);
        let params = ModelParams::simulation1();
        let state = sim1_state(&ctx, &params);
        let sys = assemble_step_system(&state, &ctx, &params).unwrap();
        let sol = solve_step(&sys, &ctx, &SolverConfig::direct(), &state).unwrap();
        assert!(sol.residual <= 1e-12);

        let (m, k) = (&ctx.mass, &ctx.stiffness);
        let w = assemble_weighted_mass(&state.u, |s| params.proliferation(s), 1);
        let sigma: Vec<f64> = sol
            .n
            .coeffs()
            .iter()
            .zip(state.u.coeffs())
            .map(|(n, u)| n / params.delta - params.chi0 * u)
            .collect();
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        let du: Vec<f64> = diff(sol.u.coeffs(), state.u.coeffs()).iter().map(|v| v / params.tau).collect();
        let dn: Vec<f64> = diff(sol.n.coeffs(), state.n.coeffs()).iter().map(|v| v / params.tau).collect();
        let smm = diff(&sigma, sol.mu.coeffs());
        let e1 = integrate_composed(&state.u, |s| params.f(s), 4);
        let s = state.r / (e1 + params.shift);
        let fprime = assemble_nonlinear_load(&state.u, |v| params.f_prime(v), 3);

        let (mdu, kmu, wsm) = (m.mul_vec(&du), k.mul_vec(sol.mu.coeffs()), w.mul_vec(&smm));
        let (mmu, ku, mu_, mn) = (
            m.mul_vec(sol.mu.coeffs()),
            k.mul_vec(sol.u.coeffs()),
            m.mul_vec(sol.u.coeffs()),
            m.mul_vec(sol.n.coeffs()),
        );
        let (mdn, ksig) = (m.mul_vec(&dn), k.mul_vec(&sigma));
        let scale = sys.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for i in 0..ctx.num_dofs() {
            let r_u = mdu[i] + kmu[i] - wsm[i];
            let r_mu = mmu[i] - (params.epsilon.powi(2) * ku[i] + params.lambda * mu_[i] - params.chi0 * mn[i] + s * fprime[i]);
            let r_n = mdn[i] + ksig[i] + wsm[i];
            for r in [r_u, r_mu, r_n] {
                assert!(r.abs() <= 1e-9 * scale, "row {i}: {r:e}");
            }
        }
    }

    #[test]
    fn r_update_identity() {
        let ctx = ctx(8);
        let params = ModelParams::simulation1();
        let state = sim1_state(&ctx, &params);
        let sys = assemble_step_system(&state, &ctx, &params).unwrap();
        assert_eq!(update_r(&state, &sys, &state.u), state.r);
        let zero_r = State { r: 0.0, ..state.clone() };
        let sys0 = assemble_step_system(&zero_r, &ctx, &params).unwrap();
        let sol = solve_step(&sys0, &ctx, &SolverConfig::direct(), &zero_r).unwrap();
        assert_eq!(update_r(&zero_r, &sys0, &sol.u), 0.0);
        let sol = solve_step(&sys, &ctx, &SolverConfig::direct(), &state).unwrap();
        let r = update_r(&state, &sys, &sol.u);
        let by_hand = state.r + sys.sav_ratio * dot(&sys.load, &sol.u.sub(&state.u).unwrap().into_coeffs());
        assert!((r - by_hand).abs() <= 1e-15 * state.r.abs());
    }

    #[test]
    fn sigma_is_the_nodal_combination() {
        let ctx = ctx(8);
        let params = ModelParams::simulation1();
        let state = sim1_state(&ctx, &params);
        let next = advance(&state, &ctx, &params, &SolverConfig::direct()).unwrap();
        let sigma = next.sigma.as_ref().unwrap();
        for i in 0..ctx.num_dofs() {
            let expect = (1.0 / params.delta) * next.n.coeffs()[i] - params.chi0 * state.u.coeffs()[i];
            assert_eq!(sigma.coeffs()[i], expect);
        }
    }

    #[test]
    fn run_executes_floor_t_over_tau_steps() {
        let ctx = ctx(4);
        let mut params = ModelParams::simulation1();
        params.tau = 0.001;
        params.final_time = 0.01;
        let state = sim1_state(&ctx, &params);
        let mut seen = 0;
        let out = Simulation::new(ctx, params, SolverConfig::direct(), state)
            .run(|ev| {
                seen += 1;
                assert_eq!(ev.current.step, ev.previous.step + 1);
                Ok(())
            })
            .unwrap();
        assert_eq!(seen, 10);
        assert_eq!(out.state.step, 10);
        assert_eq!(out.series.len(), 11);
    }

    #[test]
    fn gmres_matches_direct_step() {
        let ctx = ctx(8);
        let params = ModelParams::simulation1();
        let state = sim1_state(&ctx, &params);
        let a = advance(&state, &ctx, &params, &SolverConfig::direct()).unwrap();
        let b = advance(&state, &ctx, &params, &SolverConfig::gmres()).unwrap();
        let diff = a
            .u
            .coeffs()
            .iter()
            .zip(b.u.coeffs())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff < 1e-7, "{diff:e}");
    }
}
