//! Model constants and the pointwise nonlinearities.
//!
//! The bulk potential is the stabilised double well
//! `f(u) = kappa u^2 (1 - u)^2 - (lambda / 2) u^2` and proliferation is the
//! truncated linear rate `P(u) = delta p0 max(u, 0)`.

use crate::error::{Error, Result};

/// Smallest admissible value of `E1 + B` before the SAV ratio is rejected.
pub const SAV_DENOMINATOR_FLOOR: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Interface width; the gradient energy carries `epsilon^2`.
    pub epsilon: f64,
    /// Stabilisation constant.
    pub lambda: f64,
    /// Chemotaxis strength.
    pub chi0: f64,
    /// Cell/nutrient interaction strength, in `(0, 1)`.
    pub delta: f64,
    /// Double-well height.
    pub kappa: f64,
    /// Proliferation growth rate.
    pub p0: f64,
    /// Energy shift keeping `E1 + B` positive.
    pub shift: f64,
    pub tau: f64,
    pub final_time: f64,
}

impl ModelParams {
    /// Default stabilisation for a given chemotaxis strength.
    pub fn default_lambda(chi0: f64) -> f64 {
        4.0 * chi0 * chi0
    }

    /// Single growing tumour on `[-1, 1]^2`.
    pub fn simulation1() -> Self {
        Self {
            epsilon: 0.02,
            lambda: 0.001,
            chi0: 0.02,
            delta: 0.4,
            kappa: 0.25,
            p0: 50.0,
            shift: 4.0,
            tau: 1e-3,
            final_time: 0.05,
        }
    }

    /// Parameters for the rough-data temporal study on `[-0.5, 0.5]^2`.
    pub fn simulation3() -> Self {
        Self {
            epsilon: 0.02,
            lambda: 0.2,
            chi0: 0.2,
            delta: 0.4,
            kappa: 0.25,
            p0: 20.0,
            shift: 5.0,
            tau: 1.0 / 64.0,
            final_time: 0.25,
        }
    }

    /// Chemotactic growth in `[-1, 1]^3`.
    pub fn simulation4() -> Self {
        Self {
            epsilon: 0.02,
            lambda: 0.5,
            chi0: 1.6,
            delta: 0.4,
            kappa: 0.25,
            p0: 25.0,
            shift: 40.0,
            tau: 1e-2,
            final_time: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, key: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(key, msg))
            }
        };
        let all_finite = [
            self.epsilon,
            self.lambda,
            self.chi0,
            self.delta,
            self.kappa,
            self.p0,
            self.shift,
            self.tau,
            self.final_time,
        ]
        .iter()
        .all(|v| v.is_finite());
        check(all_finite, "params", "all parameters must be finite")?;
        check(self.epsilon > 0.0, "params.epsilon", "must be positive")?;
        check(self.delta > 0.0 && self.delta < 1.0, "params.delta", "must lie in (0, 1)")?;
        check(self.kappa >= 0.0, "params.kappa", "must be non-negative")?;
        check(self.p0 >= 0.0, "params.p0", "must be non-negative")?;
        check(self.tau > 0.0, "time.tau", "must be positive")?;
        check(self.final_time >= self.tau, "time.T", "must be at least time.tau")?;
        Ok(())
    }

    /// Number of time steps, `floor(T / tau)`.
    pub fn num_steps(&self) -> usize {
        // Guard against T/tau landing one ulp below an integer.
        (self.final_time / self.tau * (1.0 + 1e-12)).floor() as usize
    }

    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        let w = u * (1.0 - u);
        self.kappa * w * w - 0.5 * self.lambda * u * u
    }

    #[inline]
    pub fn f_prime(&self, u: f64) -> f64 {
        2.0 * self.kappa * u * (1.0 - u) * (1.0 - 2.0 * u) - self.lambda * u
    }

    #[inline]
    pub fn proliferation(&self, u: f64) -> f64 {
        if u >= 0.0 {
            self.delta * self.p0 * u
        } else {
            0.0
        }
    }

    /// Lipschitz constant of [`Self::proliferation`].
    pub fn proliferation_lipschitz(&self) -> f64 {
        self.delta * self.p0
    }

    /// `r / (E1 + B)`.
    pub fn sav_ratio(&self, r: f64, e1: f64) -> Result<f64> {
        let denominator = e1 + self.shift;
        if !(denominator > SAV_DENOMINATOR_FLOOR) {
            return Err(Error::SavDenominator {
                e1,
                shift: self.shift,
                denominator,
            });
        }
        Ok(r / denominator)
    }

    /// Upper bound on `tau` under which the step system is provably
    /// uniquely solvable: `3 delta^2 / (4 L (1 + |u|_inf))`.
    pub fn solvability_tau_bound(&self, u_linf: f64) -> f64 {
        let l = self.proliferation_lipschitz();
        if l == 0.0 {
            return f64::INFINITY;
        }
        3.0 * self.delta * self.delta / (4.0 * l * (1.0 + u_linf))
    }
}
