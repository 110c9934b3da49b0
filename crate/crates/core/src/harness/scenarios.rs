//! Reference scenarios: domains, parameters and initial data.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::Field;
use crate::mesh::{BoxDomain, Point};
use crate::model::ModelParams;

/// Radius of every diffuse sphere in the reference data.
const BUMP_RADIUS: f64 = 0.2;

/// `constant + sum_i weight_i tanh((R - |x - c_i|) / (eps sqrt 2) + 1)`.
#[derive(Clone, Debug)]
pub struct TanhBumps {
    pub constant: f64,
    pub epsilon: f64,
    /// `(weight, centre)` pairs.
    pub bumps: Vec<(f64, Point)>,
}

impl TanhBumps {
    /// `1 - self`.
    pub fn complement(&self) -> Self {
        Self {
            constant: 1.0 - self.constant,
            epsilon: self.epsilon,
            bumps: self.bumps.iter().map(|&(w, c)| (-w, c)).collect(),
        }
    }

    fn argument(&self, x: &Point, c: &Point) -> (f64, f64) {
        let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2)).sqrt();
        ((BUMP_RADIUS - d) / (self.epsilon * SQRT_2) + 1.0, d)
    }
}

impl Field for TanhBumps {
    fn value(&self, x: &Point) -> f64 {
        self.constant
            + self
                .bumps
                .iter()
                .map(|(w, c)| w * self.argument(x, c).0.tanh())
                .sum::<f64>()
    }

    fn gradient(&self, x: &Point) -> [f64; 3] {
        let mut g = [0.0; 3];
        for (w, c) in &self.bumps {
            let (a, d) = self.argument(x, c);
            if d == 0.0 {
                continue;
            }
            let sech2 = 1.0 - a.tanh().powi(2);
            let scale = -w * sech2 / (self.epsilon * SQRT_2 * d);
            for k in 0..3 {
                g[k] += scale * (x[k] - c[k]);
            }
        }
        g
    }
}

/// `offset + sign |sin(2 pi x) sin(2 pi y)|` with `sign = +-1`.
#[derive(Clone, Copy, Debug)]
pub struct RectifiedSine {
    pub offset: f64,
    pub sign: f64,
}

impl Field for RectifiedSine {
    fn value(&self, x: &Point) -> f64 {
        self.offset + self.sign * ((2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).abs()
    }

    fn gradient(&self, x: &Point) -> [f64; 3] {
        let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
        let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
        let s = self.sign * (sx * sy).signum();
        [s * 2.0 * PI * cx * sy, s * 2.0 * PI * sx * cy, 0.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Single growing tumour in 2D.
    Sim1,
    /// Two neighbouring tumours in 2D.
    Sim2,
    /// Rough initial data for the temporal study.
    Sim3,
    /// Chemotactic growth in 3D.
    Sim4,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Sim1, Scenario::Sim2, Scenario::Sim3, Scenario::Sim4];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Sim1 => "sim1",
            Scenario::Sim2 => "sim2",
            Scenario::Sim3 => "sim3",
            Scenario::Sim4 => "sim4",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Scenario::Sim4 => 3,
            _ => 2,
        }
    }

    pub fn domain(self) -> BoxDomain {
        let (lo, hi) = match self {
            Scenario::Sim3 => (-0.5, 0.5),
            _ => (-1.0, 1.0),
        };
        BoxDomain::cube(self.dim(), lo, hi).expect("reference domains are valid")
    }

    pub fn params(self) -> ModelParams {
        match self {
            Scenario::Sim1 | Scenario::Sim2 => ModelParams::simulation1(),
            Scenario::Sim3 => ModelParams::simulation3(),
            Scenario::Sim4 => ModelParams::simulation4(),
        }
    }

    /// `(u0, n0)` for the given parameters (only `epsilon` is used).
    pub fn initial_condition(self, params: &ModelParams) -> (Box<dyn Field>, Box<dyn Field>) {
        let eps = params.epsilon;
        let bumps = |constant: f64, bumps: Vec<(f64, Point)>| TanhBumps {
            constant,
            epsilon: eps,
            bumps,
        };
        match self {
            Scenario::Sim1 => {
                let u = bumps(0.5, vec![(0.5, [0.0; 3])]);
                let n = u.complement();
                (Box::new(u), Box::new(n))
            }
            Scenario::Sim2 => {
                let u = bumps(1.0, vec![(0.5, [-0.3, 0.0, 0.0]), (0.5, [0.3, 0.0, 0.0])]);
                let n = u.complement();
                (Box::new(u), Box::new(n))
            }
            Scenario::Sim3 => (
                Box::new(RectifiedSine {
                    offset: 0.0,
                    sign: 1.0,
                }),
                Box::new(RectifiedSine {
                    offset: 1.0,
                    sign: -1.0,
                }),
            ),
            Scenario::Sim4 => {
                let u = bumps(0.5, vec![(0.5, [0.0; 3])]);
                let n = bumps(
                    1.5,
                    vec![
                        (0.5, [-0.3, -0.3, 0.0]),
                        (0.5, [0.3, 0.3, 0.0]),
                        (0.25, [0.3, -0.3, 0.0]),
                        (0.25, [-0.3, 0.3, 0.0]),
                    ],
                );
                (Box::new(u), Box::new(n))
            }
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario `{s}` (expected sim1, sim2, sim3 or sim4)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_gradient(f: &dyn Field, x: Point) {
        let g = f.gradient(&x);
        let h = 1e-6;
        for k in 0..3 {
            let (mut p, mut m) = (x, x);
            p[k] += h;
            m[k] -= h;
            let fd = (f.value(&p) - f.value(&m)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "axis {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn sim1_centre_value_and_complement() {
        let p = ModelParams::simulation1();
        let (u, n) = Scenario::Sim1.initial_condition(&p);
        let expect = 0.5 + 0.5 * (0.2 / (0.02 * 2f64.sqrt()) + 1.0).tanh();
        assert!((u.value(&[0.0; 3]) - expect).abs() < 1e-15);
        assert!((expect - 1.0).abs() < 1e-6);
        for x in [[0.1, -0.3, 0.0], [0.21, 0.05, 0.0], [-0.9, 0.9, 0.0]] {
            assert!((u.value(&x) + n.value(&x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sim2_has_two_bumps_above_unity() {
        let p = ModelParams::simulation1();
        let (u, n) = Scenario::Sim2.initial_condition(&p);
        // Far field: 1 + 1/2 tanh(-large) * 2 -> 0.
        assert!(u.value(&[0.95, 0.95, 0.0]).abs() < 1e-6);
        // At a centre the other bump contributes tanh((0.2 - 0.6)/(eps sqrt 2) + 1).
        let other = (-0.4 / (0.02 * SQRT_2) + 1.0).tanh();
        let own = (0.2 / (0.02 * SQRT_2) + 1.0).tanh();
        assert!((u.value(&[0.3, 0.0, 0.0]) - (1.0 + 0.5 * own + 0.5 * other)).abs() < 1e-14);
        assert!((u.value(&[0.3, 0.0, 0.0]) + n.value(&[0.3, 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sim3_is_nonnegative_with_zero_origin() {
        let p = ModelParams::simulation3();
        let (u, n) = Scenario::Sim3.initial_condition(&p);
        assert_eq!(u.value(&[0.0; 3]), 0.0);
        for i in 0..50 {
            let x = [-0.5 + i as f64 / 49.0, 0.37 - 0.013 * i as f64, 0.0];
            assert!(u.value(&x) >= 0.0);
            assert!((u.value(&x) + n.value(&x) - 1.0).abs() < 1e-15);
        }
        assert!((u.value(&[0.25, 0.25, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sim4_weights() {
        let p = ModelParams::simulation4();
        let (_, n) = Scenario::Sim4.initial_condition(&p);
        // Far from every source each tanh is ~ -1: 3/2 - (1/2 + 1/2 + 1/4 + 1/4) = 0.
        assert!(n.value(&[0.95, 0.95, 0.95]).abs() < 1e-6);
        assert_eq!(Scenario::Sim4.dim(), 3);
        assert_eq!(Scenario::Sim4.domain().dim(), 3);
    }

    #[test]
    fn analytic_gradients_match_differences() {
        for sc in Scenario::ALL {
            let p = sc.params();
            let (u, n) = sc.initial_condition(&p);
            let z = if sc.dim() == 3 { 0.05 } else { 0.0 };
            for x in [[0.13, -0.07, z], [-0.31, 0.02, z], [0.11, 0.17, z]] {
                check_gradient(u.as_ref(), x);
                check_gradient(n.as_ref(), x);
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!(matches!("sim5".parse::<Scenario>(), Err(Error::InvalidConfig(_))));
    }
}
