//! Operator and load assembly.
//!
//! Local contributions are computed element-parallel and scattered into the
//! global arrays in element order, so results do not depend on the thread
//! count.

use std::sync::Arc;

use rayon::prelude::*;

use super::function::{FeFunction, Field};
use super::space::{BasisTable, FeSpace};
use super::sparse::CsrMatrix;
use crate::mesh::{Point, SimplexGeometry};

/// Quadrature degree used whenever an analytic (non-polynomial) field is
/// integrated.
pub const FIELD_QUADRATURE_DEGREE: usize = 10;

fn local_matrices<K>(space: &FeSpace, table: &BasisTable, order: &[usize], kernel: K) -> Vec<f64>
where
    K: Fn(usize, &SimplexGeometry, &BasisTable, &mut [f64]) + Sync,
{
    let nl = space.num_local();
    let mut out = vec![0.0; order.len() * nl * nl];
    out.par_chunks_mut(nl * nl)
        .zip(order.par_iter())
        .for_each(|(local, &e)| {
            let geo = space.mesh().geometry(e);
            kernel(e, &geo, table, local);
        });
    out
}

fn scatter_matrix(space: &FeSpace, order: &[usize], locals: &[f64], symmetric: bool) -> CsrMatrix {
    let nl = space.num_local();
    let pattern = space.pattern().clone();
    let mut m = CsrMatrix::zeros(pattern.clone(), symmetric);
    let values = m.values_mut();
    for (k, &e) in order.iter().enumerate() {
        let dofs = space.element_dofs(e);
        let local = &locals[k * nl * nl..(k + 1) * nl * nl];
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                let pos = pattern.find(i, j).expect("pattern covers element couplings");
                values[pos] += local[a * nl + b];
            }
        }
    }
    m
}

fn natural_order(space: &FeSpace) -> Vec<usize> {
    (0..space.mesh().num_elements()).collect()
}

pub(crate) fn mass_in_order(space: &FeSpace, order: &[usize]) -> CsrMatrix {
    let table = space.table(2 * space.degree());
    let locals = local_matrices(space, &table, order, |_, geo, t, local| {
        let nl = t.num_local;
        local.fill(0.0);
        for (q, w) in t.rule.weights.iter().enumerate() {
            let phi = t.values_at(q);
            let wq = w * geo.measure * factorial_dim(geo.dim);
            for a in 0..nl {
                for b in 0..nl {
                    local[a * nl + b] += wq * phi[a] * phi[b];
                }
            }
        }
    });
    scatter_matrix(space, order, &locals, true)
}

pub(crate) fn stiffness_in_order(space: &FeSpace, order: &[usize]) -> CsrMatrix {
    let table = space.table((2 * space.degree()).saturating_sub(2).max(1));
    let locals = local_matrices(space, &table, order, |_, geo, t, local| {
        let nl = t.num_local;
        let mut grads = [[0.0; 3]; 10];
        local.fill(0.0);
        for (q, w) in t.rule.weights.iter().enumerate() {
            t.gradients_at(q, geo, &mut grads[..nl]);
            let wq = w * geo.measure * factorial_dim(geo.dim);
            for a in 0..nl {
                for b in 0..nl {
                    let g = grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1] + grads[a][2] * grads[b][2];
                    local[a * nl + b] += wq * g;
                }
            }
        }
    });
    scatter_matrix(space, order, &locals, true)
}

/// Reference-to-physical volume factor: physical measure is
/// `reference_volume * |det J|`, and `reference_volume = 1 / dim!`.
#[inline]
fn factorial_dim(dim: usize) -> f64 {
    match dim {
        1 => 1.0,
        2 => 2.0,
        _ => 6.0,
    }
}

/// Mass matrix `M_ij = <phi_j, phi_i>`.
pub fn assemble_mass(space: &Arc<FeSpace>) -> CsrMatrix {
    mass_in_order(space, &natural_order(space))
}

/// Stiffness matrix `K_ij = <grad phi_j, grad phi_i>`.
pub fn assemble_stiffness(space: &Arc<FeSpace>) -> CsrMatrix {
    stiffness_in_order(space, &natural_order(space))
}

/// Values of `u` at every quadrature point of element `e`.
fn values_at_points(u: &FeFunction, e: usize, t: &BasisTable, out: &mut Vec<f64>) {
    out.clear();
    let dofs = u.space().element_dofs(e);
    let c = u.coeffs();
    for q in 0..t.rule.len() {
        let phi = t.values_at(q);
        out.push(dofs.iter().zip(phi).map(|(&g, p)| c[g] * p).sum());
    }
}

/// Weighted mass `W_ij = <w(u_ref) phi_j, phi_i>`, with `w` composed with
/// `u_ref` at quadrature points of degree `2q + q * weight_degree`.
pub fn assemble_weighted_mass<W>(u_ref: &FeFunction, weight: W, weight_degree: usize) -> CsrMatrix
where
    W: Fn(f64) -> f64 + Sync,
{
    let space = u_ref.space();
    let q = space.degree();
    let table = space.table(2 * q + q * weight_degree);
    let order = natural_order(space);
    let locals = local_matrices(space, &table, &order, |e, geo, t, local| {
        let nl = t.num_local;
        let mut uq = Vec::with_capacity(t.rule.len());
        values_at_points(u_ref, e, t, &mut uq);
        local.fill(0.0);
        for (qp, w) in t.rule.weights.iter().enumerate() {
            let phi = t.values_at(qp);
            let wq = w * geo.measure * factorial_dim(geo.dim) * weight(uq[qp]);
            if wq == 0.0 {
                continue;
            }
            for a in 0..nl {
                for b in 0..nl {
                    local[a * nl + b] += wq * phi[a] * phi[b];
                }
            }
        }
    });
    scatter_matrix(space, &order, &locals, true)
}

fn scatter_vector(space: &FeSpace, locals: &[f64]) -> Vec<f64> {
    let nl = space.num_local();
    let mut out = vec![0.0; space.num_dofs()];
    for e in 0..space.mesh().num_elements() {
        for (a, &i) in space.element_dofs(e).iter().enumerate() {
            out[i] += locals[e * nl + a];
        }
    }
    out
}

fn local_vectors<K>(space: &FeSpace, table: &BasisTable, kernel: K) -> Vec<f64>
where
    K: Fn(usize, &SimplexGeometry, &BasisTable, &mut [f64]) + Sync,
{
    let nl = space.num_local();
    let mut out = vec![0.0; space.mesh().num_elements() * nl];
    out.par_chunks_mut(nl).enumerate().for_each(|(e, local)| {
        let geo = space.mesh().geometry(e);
        local.fill(0.0);
        kernel(e, &geo, table, local);
    });
    out
}

/// Load vector `F_i = <g(u_ref), phi_i>` with quadrature exact for a
/// polynomial `g` of degree `g_degree`.
pub fn assemble_nonlinear_load<G>(u_ref: &FeFunction, g: G, g_degree: usize) -> Vec<f64>
where
    G: Fn(f64) -> f64 + Sync,
{
    let space = u_ref.space();
    let q = space.degree();
    let table = space.table(q * g_degree + q);
    let locals = local_vectors(space, &table, |e, geo, t, local| {
        let mut uq = Vec::with_capacity(t.rule.len());
        values_at_points(u_ref, e, t, &mut uq);
        for (qp, w) in t.rule.weights.iter().enumerate() {
            let wq = w * geo.measure * factorial_dim(geo.dim) * g(uq[qp]);
            for (l, p) in local.iter_mut().zip(t.values_at(qp)) {
                *l += wq * p;
            }
        }
    });
    scatter_vector(space, &locals)
}

/// `int_D g(u_ref) dx`, exact for polynomial `g` of degree `g_degree`.
pub fn integrate_composed<G>(u_ref: &FeFunction, g: G, g_degree: usize) -> f64
where
    G: Fn(f64) -> f64 + Sync,
{
    let space = u_ref.space();
    let table = space.table(space.degree() * g_degree);
    let parts: Vec<f64> = (0..space.mesh().num_elements())
        .into_par_iter()
        .map(|e| {
            let geo = space.mesh().geometry(e);
            let mut uq = Vec::with_capacity(table.rule.len());
            values_at_points(u_ref, e, &table, &mut uq);
            table
                .rule
                .weights
                .iter()
                .zip(&uq)
                .map(|(w, &u)| w * g(u))
                .sum::<f64>()
                * geo.measure
                * factorial_dim(geo.dim)
        })
        .collect();
    parts.iter().sum()
}

/// `int_D g(x) dx` for a pointwise function, using the analytic-field rule.
pub fn integrate_pointwise<G>(space: &FeSpace, g: G) -> f64
where
    G: Fn(&Point) -> f64 + Sync,
{
    let table = space.table(FIELD_QUADRATURE_DEGREE);
    let parts: Vec<f64> = (0..space.mesh().num_elements())
        .into_par_iter()
        .map(|e| {
            let geo = space.mesh().geometry(e);
            table
                .rule
                .points
                .iter()
                .zip(&table.rule.weights)
                .map(|(p, w)| w * g(&space.physical_point(e, p)))
                .sum::<f64>()
                * geo.measure
                * factorial_dim(geo.dim)
        })
        .collect();
    parts.iter().sum()
}

/// `b_i = <v, phi_i>`.
pub fn assemble_field_load(space: &Arc<FeSpace>, field: &dyn Field) -> Vec<f64> {
    let table = space.table(FIELD_QUADRATURE_DEGREE);
    let locals = local_vectors(space, &table, |e, geo, t, local| {
        for (qp, (p, w)) in t.rule.points.iter().zip(&t.rule.weights).enumerate() {
            let x = space.physical_point(e, p);
            let wq = w * geo.measure * factorial_dim(geo.dim) * field.value(&x);
            for (l, phi) in local.iter_mut().zip(t.values_at(qp)) {
                *l += wq * phi;
            }
        }
    });
    scatter_vector(space, &locals)
}

/// `b_i = <grad v, grad phi_i>`.
pub fn assemble_gradient_load(space: &Arc<FeSpace>, field: &dyn Field) -> Vec<f64> {
    let table = space.table(FIELD_QUADRATURE_DEGREE);
    let locals = local_vectors(space, &table, |e, geo, t, local| {
        let nl = t.num_local;
        let mut grads = [[0.0; 3]; 10];
        for (qp, (p, w)) in t.rule.points.iter().zip(&t.rule.weights).enumerate() {
            let x = space.physical_point(e, p);
            let gv = field.gradient(&x);
            t.gradients_at(qp, geo, &mut grads[..nl]);
            let wq = w * geo.measure * factorial_dim(geo.dim);
            for (l, g) in local.iter_mut().zip(&grads[..nl]) {
                *l += wq * (gv[0] * g[0] + gv[1] * g[1] + gv[2] * g[2]);
            }
        }
    });
    scatter_vector(space, &locals)
}
