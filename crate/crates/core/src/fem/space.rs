//! Continuous Lagrange spaces of degree 1 and 2.
//!
//! On structured box meshes the degree-`q` degrees of freedom sit exactly on
//! the nodes of the grid with `q * n` cells per axis and are numbered
//! lexicographically on that grid, so P2 dofs on an `n` mesh coincide with P1
//! dofs on the `2n` mesh.

use std::collections::HashMap;
use std::sync::Arc;

use super::sparse::SparsityPattern;
use crate::error::{Error, Result};
use crate::mesh::{lexicographic_index, Mesh, Point, SimplexGeometry};
use crate::quadrature::{quadrature_rule, QuadratureRule, MAX_DEGREE};

/// Local edge numbering for P2, matching the legacy VTK quadratic cells.
const EDGES_1D: [(usize, usize); 1] = [(0, 1)];
const EDGES_2D: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];
const EDGES_3D: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3)];

pub(crate) fn local_edges(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        1 => &EDGES_1D,
        2 => &EDGES_2D,
        _ => &EDGES_3D,
    }
}

/// Reference Lagrange basis on a simplex, written in barycentric coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LagrangeBasis {
    pub dim: usize,
    pub degree: usize,
}

impl LagrangeBasis {
    pub fn num_local(&self) -> usize {
        match self.degree {
            1 => self.dim + 1,
            _ => (self.dim + 1) * (self.dim + 2) / 2,
        }
    }

    pub fn values(&self, bary: &[f64; 4], out: &mut [f64]) {
        let d = self.dim;
        if self.degree == 1 {
            out[..=d].copy_from_slice(&bary[..=d]);
            return;
        }
        for a in 0..=d {
            out[a] = bary[a] * (2.0 * bary[a] - 1.0);
        }
        for (k, &(a, b)) in local_edges(d).iter().enumerate() {
            out[d + 1 + k] = 4.0 * bary[a] * bary[b];
        }
    }

    /// Partial derivatives with respect to each barycentric coordinate.
    pub fn bary_derivatives(&self, bary: &[f64; 4], out: &mut [[f64; 4]]) {
        let d = self.dim;
        for o in out.iter_mut().take(self.num_local()) {
            *o = [0.0; 4];
        }
        if self.degree == 1 {
            for (a, o) in out.iter_mut().enumerate().take(d + 1) {
                o[a] = 1.0;
            }
            return;
        }
        for a in 0..=d {
            out[a][a] = 4.0 * bary[a] - 1.0;
        }
        for (k, &(a, b)) in local_edges(d).iter().enumerate() {
            out[d + 1 + k][a] = 4.0 * bary[b];
            out[d + 1 + k][b] = 4.0 * bary[a];
        }
    }

    /// Barycentric coordinates of the local nodes.
    pub fn local_nodes(&self) -> Vec<[f64; 4]> {
        let d = self.dim;
        let mut nodes = Vec::with_capacity(self.num_local());
        for a in 0..=d {
            let mut p = [0.0; 4];
            p[a] = 1.0;
            nodes.push(p);
        }
        if self.degree == 2 {
            for &(a, b) in local_edges(d) {
                let mut p = [0.0; 4];
                p[a] = 0.5;
                p[b] = 0.5;
                nodes.push(p);
            }
        }
        nodes
    }
}

/// Basis values and barycentric derivatives tabulated at a rule's points.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub rule: QuadratureRule,
    pub num_local: usize,
    values: Vec<f64>,
    derivs: Vec<[f64; 4]>,
}

impl BasisTable {
    pub fn new(basis: LagrangeBasis, rule: QuadratureRule) -> Self {
        let nl = basis.num_local();
        let mut values = vec![0.0; rule.len() * nl];
        let mut derivs = vec![[0.0; 4]; rule.len() * nl];
        for (q, p) in rule.points.iter().enumerate() {
            basis.values(p, &mut values[q * nl..(q + 1) * nl]);
            basis.bary_derivatives(p, &mut derivs[q * nl..(q + 1) * nl]);
        }
        Self {
            rule,
            num_local: nl,
            values,
            derivs,
        }
    }

    pub fn values_at(&self, q: usize) -> &[f64] {
        &self.values[q * self.num_local..(q + 1) * self.num_local]
    }

    /// Physical gradients of every local basis function at point `q`.
    pub fn gradients_at(&self, q: usize, geo: &SimplexGeometry, out: &mut [[f64; 3]]) {
        let d = geo.dim;
        let derivs = &self.derivs[q * self.num_local..(q + 1) * self.num_local];
        for (g, dl) in out.iter_mut().zip(derivs) {
            *g = [0.0; 3];
            for a in 0..=d {
                if dl[a] != 0.0 {
                    for c in 0..d {
                        g[c] += dl[a] * geo.grad_bary[a][c];
                    }
                }
            }
        }
    }
}

/// A Lagrange finite element space on a mesh.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    basis: LagrangeBasis,
    cell_dofs: Vec<usize>,
    dof_coords: Vec<Point>,
    pattern: Arc<SparsityPattern>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<Self>> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidConfig(format!(
                "polynomial degree {degree} is not supported (use 1 or 2)"
            )));
        }
        let dim = mesh.dim();
        let basis = LagrangeBasis { dim, degree };
        let nl = basis.num_local();
        let ne = mesh.num_elements();
        let mut cell_dofs = Vec::with_capacity(ne * nl);
        let dof_coords;

        match (degree, mesh.grid()) {
            (1, _) => {
                for e in 0..ne {
                    cell_dofs.extend_from_slice(mesh.element(e));
                }
                dof_coords = mesh.nodes().to_vec();
            }
            (_, Some(grid)) => {
                let n = grid.n;
                let fine_np = degree * n + 1;
                let node_index = |v: usize| {
                    let mut idx = [0usize; 3];
                    let mut rem = v;
                    for slot in idx.iter_mut().take(dim) {
                        *slot = rem % (n + 1);
                        rem /= n + 1;
                    }
                    idx
                };
                for e in 0..ne {
                    let verts = mesh.element(e);
                    let idx: Vec<[usize; 3]> = verts.iter().map(|&v| node_index(v)).collect();
                    for id in &idx {
                        let doubled: Vec<usize> = id[..dim].iter().map(|i| 2 * i).collect();
                        cell_dofs.push(lexicographic_index(&doubled, fine_np));
                    }
                    for &(a, b) in local_edges(dim) {
                        let mid: Vec<usize> = (0..dim).map(|c| idx[a][c] + idx[b][c]).collect();
                        cell_dofs.push(lexicographic_index(&mid, fine_np));
                    }
                }
                let total = fine_np.pow(dim as u32);
                let mut coords = Vec::with_capacity(total);
                for lin in 0..total {
                    let mut p = [0.0; 3];
                    let mut rem = lin;
                    for (axis, slot) in p.iter_mut().enumerate().take(dim) {
                        *slot = grid.domain.grid_coordinate(axis, rem % fine_np, degree * n);
                        rem /= fine_np;
                    }
                    coords.push(p);
                }
                dof_coords = coords;
            }
            (_, None) => {
                let mut coords = mesh.nodes().to_vec();
                let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
                for e in 0..ne {
                    let verts = mesh.element(e);
                    cell_dofs.extend_from_slice(verts);
                    for &(a, b) in local_edges(dim) {
                        let key = (verts[a].min(verts[b]), verts[a].max(verts[b]));
                        let id = *edge_ids.entry(key).or_insert_with(|| {
                            let (pa, pb) = (mesh.nodes()[key.0], mesh.nodes()[key.1]);
                            coords.push([
                                0.5 * (pa[0] + pb[0]),
                                0.5 * (pa[1] + pb[1]),
                                0.5 * (pa[2] + pb[2]),
                            ]);
                            coords.len() - 1
                        });
                        cell_dofs.push(id);
                    }
                }
                dof_coords = coords;
            }
        }

        let mut entries = Vec::with_capacity(ne * nl * nl);
        for e in 0..ne {
            let dofs = &cell_dofs[e * nl..(e + 1) * nl];
            for &i in dofs {
                for &j in dofs {
                    entries.push((i, j));
                }
            }
        }
        let pattern = Arc::new(SparsityPattern::from_entries(dof_coords.len(), entries));
        Ok(Arc::new(Self {
            mesh,
            basis,
            cell_dofs,
            dof_coords,
            pattern,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn basis(&self) -> LagrangeBasis {
        self.basis
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn num_local(&self) -> usize {
        self.basis.num_local()
    }

    pub fn element_dofs(&self, e: usize) -> &[usize] {
        let nl = self.num_local();
        &self.cell_dofs[e * nl..(e + 1) * nl]
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    /// Tabulates the basis at a rule of (at least) `degree`, capped at the
    /// highest supported rule.
    pub fn table(&self, degree: usize) -> BasisTable {
        let rule = quadrature_rule(self.dim(), degree.clamp(1, MAX_DEGREE))
            .expect("dimension and degree are validated");
        BasisTable::new(self.basis, rule)
    }

    /// Maps reference barycentric coordinates into element `e`.
    pub fn physical_point(&self, e: usize, bary: &[f64; 4]) -> Point {
        let v = self.mesh.element_vertices(e);
        let mut x = [0.0; 3];
        for a in 0..=self.dim() {
            for c in 0..3 {
                x[c] += bary[a] * v[a][c];
            }
        }
        x
    }

    /// True when `fine` is the uniform refinement of this space's mesh with
    /// the same degree.
    pub fn is_refined_by(&self, fine: &FeSpace) -> bool {
        match (self.mesh.grid(), fine.mesh.grid()) {
            (Some(c), Some(f)) => {
                c.domain == f.domain && f.n == 2 * c.n && self.degree() == fine.degree()
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};

    #[test]
    fn basis_is_nodal_and_partitions_unity() {
        for dim in 1..=3 {
            for degree in 1..=2 {
                let basis = LagrangeBasis { dim, degree };
                let nodes = basis.local_nodes();
                let mut vals = vec![0.0; basis.num_local()];
                for (i, p) in nodes.iter().enumerate() {
                    basis.values(p, &mut vals);
                    for (j, v) in vals.iter().enumerate() {
                        let expect = if i == j { 1.0 } else { 0.0 };
                        assert!((v - expect).abs() < 1e-15);
                    }
                }
                let p = [0.1, 0.2, 0.3, 0.4];
                let mut p = p;
                let s: f64 = p[..=dim].iter().sum();
                p.iter_mut().for_each(|x| *x /= s);
                basis.values(&p, &mut vals);
                assert!((vals.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn p2_dofs_match_refined_p1_grid() {
        let domain = BoxDomain::cube(3, -1.0, 1.0).unwrap();
        let coarse = Arc::new(build_box_mesh(&domain, 2).unwrap());
        let fine = Arc::new(build_box_mesh(&domain, 4).unwrap());
        let p2 = FeSpace::new(coarse, 2).unwrap();
        let p1 = FeSpace::new(fine, 1).unwrap();
        assert_eq!(p2.dof_coords(), p1.dof_coords());
        // Every dof is touched by at least one element.
        let mut seen = vec![false; p2.num_dofs()];
        for e in 0..p2.mesh().num_elements() {
            for (local, &g) in p2.element_dofs(e).iter().enumerate() {
                seen[g] = true;
                let x = p2.physical_point(e, &p2.basis().local_nodes()[local]);
                for c in 0..3 {
                    assert!((x[c] - p2.dof_coords()[g][c]).abs() < 1e-14);
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn unsupported_degree() {
        let mesh = Arc::new(build_box_mesh(&BoxDomain::cube(1, 0.0, 1.0).unwrap(), 2).unwrap());
        assert!(FeSpace::new(mesh, 3).is_err());
    }
}
