//! Run setup, reference scenarios and convergence-rate studies.

pub mod rates;
pub mod scenarios;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::function::ConstantField;
use crate::fem::linalg::SolverConfig;
use crate::fem::{FeSpace, Field};
use crate::mesh::{build_box_mesh, BoxDomain};
use crate::model::ModelParams;
use crate::stepper::{init_state, FemContext, InitProjection, Simulation};

pub use rates::{spatial_rate, temporal_rate, RateAxis, RateStudy, RateTable, SolutionField};
pub use scenarios::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    Scenario(Scenario),
    Constant { u0: f64, n0: f64 },
}

impl InitialData {
    pub fn fields(&self, params: &ModelParams) -> (Box<dyn Field>, Box<dyn Field>) {
        match *self {
            InitialData::Scenario(sc) => sc.initial_condition(params),
            InitialData::Constant { u0, n0 } => (Box::new(ConstantField(u0)), Box::new(ConstantField(n0))),
        }
    }
}

/// Everything needed to build one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSetup {
    pub domain: BoxDomain,
    pub n: usize,
    pub degree: usize,
    pub params: ModelParams,
    pub initial: InitialData,
    pub projection: InitProjection,
    pub solver: SolverConfig,
}

impl RunSetup {
    /// Reference scenario at resolution `n` with its default parameters.
    pub fn scenario(scenario: Scenario, n: usize) -> Self {
        Self {
            domain: scenario.domain(),
            n,
            degree: 1,
            params: scenario.params(),
            initial: InitialData::Scenario(scenario),
            projection: InitProjection::Ritz,
            solver: SolverConfig::direct(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.n == 0 {
            return Err(Error::validation("mesh.n", "must be positive"));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(Error::validation("fem.degree", "must be 1 or 2"));
        }
        if let InitialData::Scenario(sc) = self.initial {
            if sc.dim() != self.domain.dim() {
                return Err(Error::validation(
                    "ic",
                    format!("{sc} is {}-dimensional but the domain is {}-dimensional", sc.dim(), self.domain.dim()),
                ));
            }
        }
        Ok(())
    }

    pub fn context(&self) -> Result<FemContext> {
        let mesh = build_box_mesh(&self.domain, self.n)?;
        Ok(FemContext::new(FeSpace::new(Arc::new(mesh), self.degree)?))
    }

    pub fn build(&self) -> Result<Simulation> {
        self.validate()?;
        let ctx = self.context()?;
        let (u0, n0) = self.initial.fields(&self.params);
        let state = init_state(u0.as_ref(), n0.as_ref(), &ctx, &self.params, self.projection)?;
        Ok(Simulation::new(ctx, self.params.clone(), self.solver, state))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut s = RunSetup::scenario(Scenario::Sim1, 4);
        s.domain = BoxDomain::cube(3, -1.0, 1.0).unwrap();
        assert!(matches!(s.build(), Err(Error::Validation { key, .. }) if key == "ic"));
    }

    #[test]
    fn builds_every_scenario() {
        for sc in Scenario::ALL {
            let n = if sc.dim() == 3 { 2 } else { 4 };
            let sim = RunSetup::scenario(sc, n).build().unwrap();
            assert_eq!(sim.state.step, 0);
            assert!(sim.state.r > 0.0);
        }
    }
}
