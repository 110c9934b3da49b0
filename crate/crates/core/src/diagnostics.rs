//! Mass, energies and the discrete dissipation balance of the scheme.
//!
//! All quantities are evaluated with the assembled matrices, so that the
//! discrete balance laws hold in the same inner products the stepper uses.

use std::fmt;

use crate::fem::sparse::CsrMatrix;
use crate::model::ModelParams;
use crate::stepper::{FemContext, State, StepReport};

/// One row of the per-step time series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub modified_energy: f64,
    pub r: f64,
    pub diss_residual: f64,
    pub solver_residual: f64,
}

impl SeriesRecord {
    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.mass,
            self.energy,
            self.modified_energy,
            self.r,
            self.diss_residual,
            self.solver_residual,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// `int (u + n)`.
pub fn total_mass(state: &State, ctx: &FemContext) -> f64 {
    ctx.mass_ones
        .iter()
        .zip(state.u.coeffs().iter().zip(state.n.coeffs()))
        .map(|(m, (u, n))| m * (u + n))
        .sum()
}

/// Quadratic part shared by both energies.
fn quadratic_energy(state: &State, ctx: &FemContext, params: &ModelParams) -> f64 {
    let (u, n) = (state.u.coeffs(), state.n.coeffs());
    let mu = ctx.mass.mul_vec(u);
    let mn = ctx.mass.mul_vec(n);
    let gradient = ctx.stiffness.bilinear(u, u);
    let uu: f64 = u.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let nn: f64 = n.iter().zip(&mn).map(|(a, b)| a * b).sum();
    let un: f64 = u.iter().zip(&mn).map(|(a, b)| a * b).sum();
    0.5 * params.epsilon * params.epsilon * gradient + 0.5 * params.lambda * uu + nn / (2.0 * params.delta)
        - params.chi0 * un
}

/// SAV energy: quadratic terms plus `r - B`.
pub fn modified_energy(state: &State, ctx: &FemContext, params: &ModelParams) -> f64 {
    quadratic_energy(state, ctx, params) + state.r - params.shift
}

/// Free energy with the potential integrated directly.
///
/// Evaluated literally: the `(lambda / 2) u^2` term cancels against the
/// `-(lambda / 2) u^2` carried inside `f`.
pub fn original_energy(state: &State, ctx: &FemContext, params: &ModelParams) -> f64 {
    quadratic_energy(state, ctx, params) + ctx.potential_energy(&state.u, params)
}

/// Absolute residual of the per-step energy balance
///
/// ```text
/// E~(k+1) - E~(k) + eps^2/2 |grad du|^2 + lambda/2 |du|^2 + 1/(2 delta) |dn|^2
///     + tau |grad mu|^2 + tau |grad sigma|^2 + tau |sqrt(P(u_k)) (sigma - mu)|^2 = 0
/// ```
///
/// Reassembles the proliferation matrix from `prev.u`.
///
/// # Panics
///
/// If `next` carries no `mu`/`sigma`, i.e. it is not the output of a step.
pub fn dissipation_residual(prev: &State, next: &State, ctx: &FemContext, params: &ModelParams) -> f64 {
    let w = ctx.proliferation_matrix(&prev.u, params);
    dissipation_residual_with(prev, next, ctx, params, &w)
}

/// [`dissipation_residual`] with the step's proliferation matrix supplied.
pub fn dissipation_residual_with(
    prev: &State,
    next: &State,
    ctx: &FemContext,
    params: &ModelParams,
    weighted_mass: &CsrMatrix,
) -> f64 {
    let mu = next.mu.as_ref().expect("next state has no chemical potential").coeffs();
    let sigma = next.sigma.as_ref().expect("next state has no nutrient potential").coeffs();
    let du: Vec<f64> = next.u.coeffs().iter().zip(prev.u.coeffs()).map(|(a, b)| a - b).collect();
    let dn: Vec<f64> = next.n.coeffs().iter().zip(prev.n.coeffs()).map(|(a, b)| a - b).collect();
    let smm: Vec<f64> = sigma.iter().zip(mu).map(|(s, m)| s - m).collect();
    let (m, k) = (&ctx.mass, &ctx.stiffness);
    let tau = params.tau;
    let change = modified_energy(next, ctx, params) - modified_energy(prev, ctx, params);
    let numerical = 0.5 * params.epsilon * params.epsilon * k.bilinear(&du, &du)
        + 0.5 * params.lambda * m.bilinear(&du, &du)
        + m.bilinear(&dn, &dn) / (2.0 * params.delta);
    let physical = tau * (k.bilinear(mu, mu) + k.bilinear(sigma, sigma) + weighted_mass.bilinear(&smm, &smm));
    (change + numerical + physical).abs()
}

pub fn initial_record(state: &State, ctx: &FemContext, params: &ModelParams) -> SeriesRecord {
    SeriesRecord {
        step: state.step,
        time: state.time,
        mass: total_mass(state, ctx),
        energy: original_energy(state, ctx, params),
        modified_energy: modified_energy(state, ctx, params),
        r: state.r,
        diss_residual: 0.0,
        solver_residual: 0.0,
    }
}

pub fn step_record(
    prev: &State,
    next: &State,
    report: &StepReport,
    ctx: &FemContext,
    params: &ModelParams,
) -> SeriesRecord {
    SeriesRecord {
        diss_residual: dissipation_residual_with(prev, next, ctx, params, &report.weighted_mass),
        solver_residual: report.solver_residual,
        ..initial_record(next, ctx, params)
    }
}

/// Acceptance bounds for the structure-preservation checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantTolerances {
    /// Bound on `|m_k - m_0| / |m_0|`.
    pub mass: f64,
    /// Allowed increase `E~(k+1) - E~(k)` relative to `max(1, |E~(k)|)`.
    pub energy: f64,
    /// Bound on the balance residual relative to `|E~(0)|`.
    pub dissipation: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        Self {
            mass: 1e-10,
            energy: 1e-10,
            dissipation: 1e-8,
        }
    }
}

/// Worst observed values of the monitored invariants over a series.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantSummary {
    pub steps: usize,
    pub max_mass_drift: f64,
    /// Largest `(E~(k+1) - E~(k)) / max(1, |E~(k)|)`; negative when the
    /// energy strictly decreases at every step.
    pub max_energy_increase: f64,
    pub max_dissipation_residual: f64,
    pub violations: Vec<String>,
}

impl InvariantSummary {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for InvariantSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps: {}", self.steps)?;
        writeln!(f, "max relative mass drift: {:.3e}", self.max_mass_drift)?;
        writeln!(f, "max relative energy increase: {:.3e}", self.max_energy_increase)?;
        write!(f, "max relative dissipation residual: {:.3e}", self.max_dissipation_residual)?;
        for v in &self.violations {
            write!(f, "\nviolation: {v}")?;
        }
        Ok(())
    }
}

/// Checks mass conservation, energy monotonicity and the dissipation balance.
pub fn check_series(series: &[SeriesRecord], tol: &InvariantTolerances) -> InvariantSummary {
    let mut summary = InvariantSummary {
        steps: series.len().saturating_sub(1),
        max_mass_drift: 0.0,
        max_energy_increase: f64::NEG_INFINITY,
        max_dissipation_residual: 0.0,
        violations: Vec::new(),
    };
    let Some(first) = series.first() else {
        summary.max_energy_increase = 0.0;
        return summary;
    };
    let mass_scale = if first.mass != 0.0 { first.mass.abs() } else { 1.0 };
    let energy_scale = if first.modified_energy != 0.0 {
        first.modified_energy.abs()
    } else {
        1.0
    };
    for rec in series {
        if !rec.is_finite() {
            summary.violations.push(format!("step {}: non-finite diagnostics", rec.step));
        }
        let drift = (rec.mass - first.mass).abs() / mass_scale;
        summary.max_mass_drift = summary.max_mass_drift.max(drift);
        if drift > tol.mass {
            summary
                .violations
                .push(format!("step {}: mass drift {drift:.3e} exceeds {:.1e}", rec.step, tol.mass));
        }
        let diss = rec.diss_residual / energy_scale;
        summary.max_dissipation_residual = summary.max_dissipation_residual.max(diss);
        if diss > tol.dissipation {
            summary.violations.push(format!(
                "step {}: dissipation residual {diss:.3e} exceeds {:.1e}",
                rec.step, tol.dissipation
            ));
        }
    }
    for pair in series.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let increase = (b.modified_energy - a.modified_energy) / a.modified_energy.abs().max(1.0);
        summary.max_energy_increase = summary.max_energy_increase.max(increase);
        if increase > tol.energy {
            summary.violations.push(format!(
                "step {}: modified energy increased by {increase:.3e}",
                b.step
            ));
        }
    }
    if series.len() < 2 {
        summary.max_energy_increase = 0.0;
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::function::ConstantField;
    use crate::fem::linalg::SolverConfig;
    use crate::fem::{FeFunction, FeSpace};
    use crate::harness::scenarios::Scenario;
    use crate::mesh::{build_box_mesh, BoxDomain};
    use crate::stepper::{advance, advance_with_report, init_state, InitProjection, Simulation};
    use std::sync::Arc;

    fn ctx(n: usize) -> FemContext {
        let mesh = build_box_mesh(&BoxDomain::cube(2, -1.0, 1.0).unwrap(), n).unwrap();
        FemContext::new(FeSpace::new(Arc::new(mesh), 1).unwrap())
    }

    fn constant_state(ctx: &FemContext, u: f64, n: f64, r: f64) -> State {
        State {
            step: 0,
            time: 0.0,
            u: FeFunction::constant(ctx.space.clone(), u),
            n: FeFunction::constant(ctx.space.clone(), n),
            mu: None,
            sigma: None,
            r,
        }
    }

    #[test]
    fn constant_field_values() {
        let ctx = ctx(4);
        let params = ModelParams::simulation1();
        let s = constant_state(&ctx, 1.0, 0.0, params.shift);
        assert!((total_mass(&s, &ctx) - 4.0).abs() < 1e-13);
        assert!((modified_energy(&s, &ctx, &params) - 0.002).abs() < 1e-15);
        assert!(original_energy(&s, &ctx, &params).abs() < 1e-15);
        let s = constant_state(&ctx, 0.7, -0.7, 0.0);
        assert!(total_mass(&s, &ctx).abs() < 1e-13);
    }

    #[test]
    fn zero_state_energies() {
        let ctx = ctx(4);
        let params = ModelParams::simulation1();
        let (u0, n0) = Scenario::Sim1.initial_condition(&params);
        let init = init_state(u0.as_ref(), n0.as_ref(), &ctx, &params, InitProjection::Ritz).unwrap();
        let mut s = constant_state(&ctx, 0.0, 0.0, init.r);
        assert!((modified_energy(&s, &ctx, &params) - (init.r - params.shift)).abs() < 1e-15);
        s.r = 0.0;
        assert_eq!(original_energy(&s, &ctx, &params), 0.0);
    }

    #[test]
    fn fixed_point_has_zero_residual() {
        let ctx = ctx(4);
        let mut params = ModelParams::simulation1();
        params.chi0 = 0.0;
        params.p0 = 0.0;
        let s = init_state(&ConstantField(0.4), &ConstantField(0.5), &ctx, &params, InitProjection::Ritz).unwrap();
        let next = advance(&s, &ctx, &params, &SolverConfig::direct()).unwrap();
        assert!(dissipation_residual(&s, &next, &ctx, &params) <= 1e-12);
    }

    #[test]
    fn balance_holds_on_first_step_at_two_step_sizes() {
        let ctx = ctx(16);
        for tau in [1e-3, 5e-4] {
            let params = ModelParams {
                tau,
                ..ModelParams::simulation1()
            };
            let (u0, n0) = Scenario::Sim1.initial_condition(&params);
            let s = init_state(u0.as_ref(), n0.as_ref(), &ctx, &params, InitProjection::Ritz).unwrap();
            let e0 = modified_energy(&s, &ctx, &params).abs();
            let (next, report) = advance_with_report(&s, &ctx, &params, &SolverConfig::direct()).unwrap();
            let res = dissipation_residual(&s, &next, &ctx, &params);
            assert!(res <= 1e-8 * e0, "tau {tau}: {res:e}");
            let cached = dissipation_residual_with(&s, &next, &ctx, &params, &report.weighted_mass);
            assert_eq!(res, cached);
            assert!((total_mass(&next, &ctx) - total_mass(&s, &ctx)).abs() <= 1e-10 * total_mass(&s, &ctx));
            assert!(modified_energy(&next, &ctx, &params) <= modified_energy(&s, &ctx, &params));
        }
    }

    #[test]
    fn short_run_passes_invariant_check() {
        let ctx = ctx(8);
        let params = ModelParams {
            final_time: 3e-3,
            ..ModelParams::simulation1()
        };
        let (u0, n0) = Scenario::Sim1.initial_condition(&params);
        let s = init_state(u0.as_ref(), n0.as_ref(), &ctx, &params, InitProjection::Ritz).unwrap();
        let out = Simulation::new(ctx, params, SolverConfig::direct(), s).run(|_| Ok(())).unwrap();
        let summary = check_series(&out.series, &InvariantTolerances::default());
        assert_eq!(summary.steps, 3);
        assert!(summary.passed(), "{summary}");
        assert!(out.series.iter().all(SeriesRecord::is_finite));
    }

    #[test]
    fn check_flags_violations() {
        let base = SeriesRecord {
            step: 0,
            time: 0.0,
            mass: 4.0,
            energy: 1.0,
            modified_energy: 1.0,
            r: 4.0,
            diss_residual: 0.0,
            solver_residual: 0.0,
        };
        let up = SeriesRecord {
            step: 1,
            modified_energy: 1.1,
            mass: 4.0 + 1e-6,
            ..base
        };
        let summary = check_series(&[base, up], &InvariantTolerances::default());
        assert_eq!(summary.violations.len(), 2);
        assert!(check_series(&[], &InvariantTolerances::default()).passed());
    }
}
