//! Norms of finite element functions.
//!
//! L2 and H1 quantities of discrete functions are integrated exactly (degree
//! `2q` rule), which equals `sqrt(u^T M u)` and `sqrt(u^T K u)`. The max norm
//! samples the dofs and the quadrature points; for `q = 1` the nodal maximum
//! is already exact, for `q = 2` it is a sampled approximation.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::assembly::FIELD_QUADRATURE_DEGREE;
use super::function::{FeFunction, Field};
use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormKind {
    L2,
    H1,
    H1Semi,
    Linf,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [NormKind::L2, NormKind::H1, NormKind::H1Semi, NormKind::Linf];

    pub fn label(self) -> &'static str {
        match self {
            NormKind::L2 => "L2",
            NormKind::H1 => "H1",
            NormKind::H1Semi => "H1-semi",
            NormKind::Linf => "Linf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L2" => Ok(NormKind::L2),
            "H1" => Ok(NormKind::H1),
            "H1-semi" => Ok(NormKind::H1Semi),
            "Linf" => Ok(NormKind::Linf),
            other => Err(Error::InvalidArgument(format!("unknown norm `{other}`"))),
        }
    }
}

/// Per-element accumulation of `(|v|^2, |grad v|^2, max|v|)`, where `v` is
/// `u - reference` (reference may be absent).
fn accumulate(u: &FeFunction, reference: Option<&dyn Field>, degree: usize) -> (f64, f64, f64) {
    let space = u.space();
    let table = space.table(degree);
    let nl = space.num_local();
    let c = u.coeffs();
    let parts: Vec<(f64, f64, f64)> = (0..space.mesh().num_elements())
        .into_par_iter()
        .map(|e| {
            let geo = space.mesh().geometry(e);
            let scale = geo.measure / table.rule.reference_volume();
            let dofs = space.element_dofs(e);
            let mut grads = [[0.0; 3]; 10];
            let (mut l2, mut semi, mut max) = (0.0, 0.0, 0.0f64);
            for (q, (p, w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
                let phi = table.values_at(q);
                table.gradients_at(q, &geo, &mut grads[..nl]);
                let mut v: f64 = dofs.iter().zip(phi).map(|(&g, b)| c[g] * b).sum();
                let mut gv = [0.0; 3];
                for (&g, gr) in dofs.iter().zip(&grads[..nl]) {
                    for k in 0..3 {
                        gv[k] += c[g] * gr[k];
                    }
                }
                if let Some(field) = reference {
                    let x = space.physical_point(e, p);
                    v -= field.value(&x);
                    let fg = field.gradient(&x);
                    for k in 0..3 {
                        gv[k] -= fg[k];
                    }
                }
                l2 += w * scale * v * v;
                semi += w * scale * (gv[0] * gv[0] + gv[1] * gv[1] + gv[2] * gv[2]);
                max = max.max(v.abs());
            }
            (l2, semi, max)
        })
        .collect();
    parts
        .into_iter()
        .fold((0.0, 0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1, a.2.max(b.2)))
}

fn finish(kind: NormKind, (l2, semi, max): (f64, f64, f64)) -> f64 {
    match kind {
        NormKind::L2 => l2.sqrt(),
        NormKind::H1Semi => semi.sqrt(),
        NormKind::H1 => (l2 + semi).sqrt(),
        NormKind::Linf => max,
    }
}

pub fn norm(u: &FeFunction, kind: NormKind) -> f64 {
    let mut parts = accumulate(u, None, 2 * u.space().degree());
    if kind == NormKind::Linf {
        let nodal = u.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        parts.2 = parts.2.max(nodal);
    }
    finish(kind, parts)
}

/// Norm of `u - field`, integrated with the analytic-field rule.
pub fn norm_diff(u: &FeFunction, field: &dyn Field, kind: NormKind) -> f64 {
    let mut parts = accumulate(u, Some(field), FIELD_QUADRATURE_DEGREE);
    if kind == NormKind::Linf {
        let nodal = u
            .coeffs()
            .iter()
            .zip(u.space().dof_coords())
            .fold(0.0f64, |m, (c, x)| m.max((c - field.value(x)).abs()));
        parts.2 = parts.2.max(nodal);
    }
    finish(kind, parts)
}
