//! Structured simplicial meshes of axis-aligned boxes.
//!
//! Boxes are split into `n` grid cells per axis. In 2D each square is cut
//! into two triangles along the diagonal from its lower-left to its
//! upper-right corner; in 3D each cube is cut into the six Kuhn tetrahedra
//! that share the main diagonal. Both splittings are translation invariant,
//! so doubling `n` yields a mesh whose node set contains the coarse one.

use crate::error::{Error, Result};

/// Coordinates padded to three components; unused trailing entries are zero.
pub type Point = [f64; 3];

/// An axis-aligned box `[min_0, max_0] x ... x [min_{d-1}, max_{d-1}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl BoxDomain {
    pub fn new(min: &[f64], max: &[f64]) -> Result<Self> {
        if min.is_empty() || min.len() > 3 || min.len() != max.len() {
            return Err(Error::InvalidConfig(format!(
                "box bounds must have matching length 1..=3 (got {} and {})",
                min.len(),
                max.len()
            )));
        }
        for (axis, (lo, hi)) in min.iter().zip(max).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::InvalidConfig(format!(
                    "degenerate box along axis {axis}: [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            min: min.to_vec(),
            max: max.to_vec(),
        })
    }

    /// The box `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(&vec![lo; dim], &vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn volume(&self) -> f64 {
        self.min.iter().zip(&self.max).map(|(a, b)| b - a).product()
    }

    /// Coordinate of grid line `i` of `n` along `axis`.
    ///
    /// Computed from the ratio `i / n` so that line `2i` of `2n` is bitwise
    /// identical to line `i` of `n`.
    pub fn grid_coordinate(&self, axis: usize, i: usize, n: usize) -> f64 {
        if i == n {
            return self.max[axis];
        }
        let t = i as f64 / n as f64;
        self.min[axis] + (self.max[axis] - self.min[axis]) * t
    }
}

/// Grid metadata for meshes produced by [`build_box_mesh`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridInfo {
    pub domain: BoxDomain,
    /// Cells per axis.
    pub n: usize,
}

/// A conforming simplicial mesh.
#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<Point>,
    /// Flat connectivity, `dim + 1` node indices per element.
    elements: Vec<usize>,
    grid: Option<GridInfo>,
    h_max: f64,
    h_min: f64,
}

/// Minimum signed measure accepted for an element, relative to `h_max^dim`.
const MIN_RELATIVE_MEASURE: f64 = 1e-14;

impl Mesh {
    /// Builds a mesh from explicit nodes and connectivity.
    ///
    /// Elements must be positively oriented.
    pub fn from_parts(dim: usize, nodes: Vec<Point>, elements: Vec<Vec<usize>>) -> Result<Self> {
        Self::assemble(dim, nodes, elements.into_iter().flatten().collect(), None)
    }

    fn assemble(
        dim: usize,
        nodes: Vec<Point>,
        elements: Vec<usize>,
        grid: Option<GridInfo>,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidConfig(format!("unsupported dimension {dim}")));
        }
        let nv = dim + 1;
        if elements.is_empty() || elements.len() % nv != 0 {
            return Err(Error::InvalidArgument(format!(
                "connectivity length {} is not a positive multiple of {nv}",
                elements.len()
            )));
        }
        if let Some(&bad) = elements.iter().find(|&&v| v >= nodes.len()) {
            return Err(Error::InvalidArgument(format!(
                "element references node {bad} but only {} nodes exist",
                nodes.len()
            )));
        }
        let mut mesh = Self {
            dim,
            nodes,
            elements,
            grid,
            h_max: 0.0,
            h_min: f64::INFINITY,
        };
        for e in 0..mesh.num_elements() {
            let d = mesh.diameter(e);
            mesh.h_max = mesh.h_max.max(d);
            mesh.h_min = mesh.h_min.min(d);
        }
        let floor = MIN_RELATIVE_MEASURE * mesh.h_max.powi(dim as i32);
        for e in 0..mesh.num_elements() {
            let vol = mesh.signed_measure(e);
            if vol <= floor {
                return Err(Error::InvalidArgument(format!(
                    "element {e} has non-positive measure {vol:e}"
                )));
            }
        }
        Ok(mesh)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.elements[e * nv..(e + 1) * nv]
    }

    pub fn grid(&self) -> Option<&GridInfo> {
        self.grid.as_ref()
    }

    /// Cells per axis, if this is a structured box mesh.
    pub fn resolution(&self) -> Option<usize> {
        self.grid.as_ref().map(|g| g.n)
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn element_vertices(&self, e: usize) -> [Point; 4] {
        let mut out = [[0.0; 3]; 4];
        for (slot, &v) in out.iter_mut().zip(self.element(e)) {
            *slot = self.nodes[v];
        }
        out
    }

    /// Signed measure (length, area or volume) of element `e`.
    pub fn signed_measure(&self, e: usize) -> f64 {
        let v = self.element_vertices(e);
        let jac = edge_matrix(&v, self.dim);
        determinant(&jac, self.dim) / factorial(self.dim)
    }

    pub fn measure(&self, e: usize) -> f64 {
        self.signed_measure(e).abs()
    }

    pub fn diameter(&self, e: usize) -> f64 {
        let v = self.element_vertices(e);
        let mut d: f64 = 0.0;
        for a in 0..=self.dim {
            for b in a + 1..=self.dim {
                d = d.max(distance(&v[a], &v[b]));
            }
        }
        d
    }

    /// Measure and barycentric-coordinate gradients of element `e`.
    pub fn geometry(&self, e: usize) -> SimplexGeometry {
        SimplexGeometry::new(&self.element_vertices(e), self.dim)
    }

    /// Finds an element containing `x` and the barycentric coordinates of
    /// `x` in it.
    pub fn locate(&self, x: &Point) -> Option<(usize, [f64; 4])> {
        const SLACK: f64 = 1e-10;
        let best_in = |candidates: &mut dyn Iterator<Item = usize>| {
            let mut best: Option<(usize, [f64; 4], f64)> = None;
            for e in candidates {
                let bary = self.geometry(e).barycentric(&self.nodes[self.element(e)[0]], x);
                let worst = bary[..=self.dim]
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|b| worst > b.2) {
                    best = Some((e, bary, worst));
                }
            }
            best.filter(|b| b.2 >= -SLACK).map(|b| (b.0, b.1))
        };
        match &self.grid {
            Some(grid) => {
                let per_cell = simplices_per_cell(self.dim);
                let n = grid.n;
                let mut cell = 0;
                let mut stride = 1;
                for axis in 0..self.dim {
                    let lo = grid.domain.min[axis];
                    let hi = grid.domain.max[axis];
                    let t = (x[axis] - lo) / (hi - lo) * n as f64;
                    if !(t >= -SLACK * n as f64 && t <= n as f64 * (1.0 + SLACK)) {
                        return None;
                    }
                    let i = (t.floor().max(0.0) as usize).min(n - 1);
                    cell += i * stride;
                    stride *= n;
                }
                best_in(&mut (cell * per_cell..(cell + 1) * per_cell))
            }
            None => best_in(&mut (0..self.num_elements())),
        }
    }
}

/// Precomputed affine data of one simplex.
#[derive(Clone, Debug)]
pub struct SimplexGeometry {
    pub dim: usize,
    /// Absolute measure.
    pub measure: f64,
    /// Gradients of the barycentric coordinates, one per vertex.
    pub grad_bary: [[f64; 3]; 4],
    /// Inverse of the edge matrix, rows are gradients of barycentrics 1..=dim.
    inv: [[f64; 3]; 3],
}

impl SimplexGeometry {
    pub fn new(v: &[Point; 4], dim: usize) -> Self {
        let jac = edge_matrix(v, dim);
        let det = determinant(&jac, dim);
        let inv = inverse(&jac, det, dim);
        let mut grad_bary = [[0.0; 3]; 4];
        for a in 1..=dim {
            // Row a-1 of J^{-1}, where J has edge vectors as columns.
            for c in 0..dim {
                grad_bary[a][c] = inv[a - 1][c];
                grad_bary[0][c] -= inv[a - 1][c];
            }
        }
        Self {
            dim,
            measure: det.abs() / factorial(dim),
            grad_bary,
            inv,
        }
    }

    /// Barycentric coordinates of `x` given the element's first vertex.
    pub fn barycentric(&self, origin: &Point, x: &Point) -> [f64; 4] {
        let mut out = [0.0; 4];
        let mut rest = 1.0;
        for a in 1..=self.dim {
            let mut s = 0.0;
            for c in 0..self.dim {
                s += self.inv[a - 1][c] * (x[c] - origin[c]);
            }
            out[a] = s;
            rest -= s;
        }
        out[0] = rest;
        out
    }
}

/// Matrix whose column `j` is `v[j+1] - v[0]`.
fn edge_matrix(v: &[Point; 4], dim: usize) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for j in 0..dim {
        for i in 0..dim {
            m[i][j] = v[j + 1][i] - v[0][i];
        }
    }
    m
}

fn determinant(m: &[[f64; 3]; 3], dim: usize) -> f64 {
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

fn inverse(m: &[[f64; 3]; 3], det: f64, dim: usize) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    match dim {
        1 => r[0][0] = 1.0 / det,
        2 => {
            r[0][0] = m[1][1] / det;
            r[0][1] = -m[0][1] / det;
            r[1][0] = -m[1][0] / det;
            r[1][1] = m[0][0] / det;
        }
        _ => {
            for i in 0..3 {
                for j in 0..3 {
                    // Cofactor of (j, i) gives the adjugate entry (i, j).
                    let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                    let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                    r[i][j] = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / det;
                }
            }
        }
    }
    r
}

fn distance(a: &Point, b: &Point) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).product::<usize>() as f64
}

/// Simplices per grid cell: 1 interval, 2 triangles, 6 tetrahedra.
pub fn simplices_per_cell(dim: usize) -> usize {
    match dim {
        1 => 1,
        2 => 2,
        _ => 6,
    }
}

/// Lexicographic index of grid point `idx` (x fastest) on a grid with
/// `points_per_axis` points along every axis.
pub fn lexicographic_index(idx: &[usize], points_per_axis: usize) -> usize {
    idx.iter()
        .rev()
        .fold(0, |acc, &i| acc * points_per_axis + i)
}

/// Structured simplicial mesh of `domain` with `n` cells per axis.
pub fn build_box_mesh(domain: &BoxDomain, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidConfig("mesh resolution must be at least 1".into()));
    }
    let dim = domain.dim();
    let np = n + 1;
    let total = np.pow(dim as u32);
    let mut nodes = Vec::with_capacity(total);
    for lin in 0..total {
        let mut p = [0.0; 3];
        let mut rem = lin;
        for (axis, slot) in p.iter_mut().enumerate().take(dim) {
            *slot = domain.grid_coordinate(axis, rem % np, n);
            rem /= np;
        }
        nodes.push(p);
    }

    let id = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut elements = Vec::with_capacity(n.pow(dim as u32) * simplices_per_cell(dim) * (dim + 1));
    match dim {
        1 => {
            for i in 0..n {
                elements.extend_from_slice(&[i, i + 1]);
            }
        }
        2 => {
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c, d) = (id(i, j, 0), id(i + 1, j, 0), id(i + 1, j + 1, 0), id(i, j + 1, 0));
                    elements.extend_from_slice(&[a, b, c, a, c, d]);
                }
            }
        }
        _ => {
            const PERMS: [[usize; 3]; 6] = [
                [0, 1, 2],
                [0, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ];
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        for perm in PERMS {
                            let mut corner = [i, j, k];
                            let mut tet = [id(i, j, k), 0, 0, 0];
                            for (step, &axis) in perm.iter().enumerate() {
                                corner[axis] += 1;
                                tet[step + 1] = id(corner[0], corner[1], corner[2]);
                            }
                            // Odd permutations are negatively oriented.
                            if matches!(perm, [0, 2, 1] | [1, 0, 2] | [2, 1, 0]) {
                                tet.swap(2, 3);
                            }
                            elements.extend_from_slice(&tet);
                        }
                    }
                }
            }
        }
    }
    Mesh::assemble(
        dim,
        nodes,
        elements,
        Some(GridInfo {
            domain: domain.clone(),
            n,
        }),
    )
}

/// Doubles the resolution of a structured mesh with the same splitting rule.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh> {
    let grid = mesh.grid().ok_or_else(|| {
        Error::InvalidArgument("uniform refinement needs a structured box mesh".into())
    })?;
    build_box_mesh(&grid.domain, 2 * grid.n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize) -> BoxDomain {
        BoxDomain::cube(dim, 0.0, 1.0).unwrap()
    }

    #[test]
    fn element_and_node_counts() {
        let m1 = build_box_mesh(&unit(1), 2).unwrap();
        assert_eq!((m1.num_nodes(), m1.num_elements()), (3, 2));
        let m2 = build_box_mesh(&unit(2), 1).unwrap();
        assert_eq!((m2.num_nodes(), m2.num_elements()), (4, 2));
        let m3 = build_box_mesh(&unit(3), 1).unwrap();
        assert_eq!((m3.num_nodes(), m3.num_elements()), (8, 6));
        let m = build_box_mesh(&unit(2), 8).unwrap();
        let f = refine_uniform(&m).unwrap();
        assert_eq!(f.num_nodes(), 289);
        assert_eq!(refine_uniform(&m1).unwrap().num_nodes(), 5);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(BoxDomain::new(&[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(BoxDomain::new(&[0.0], &[1.0, 1.0]).is_err());
        assert!(matches!(build_box_mesh(&unit(2), 0), Err(Error::InvalidConfig(_))));
        let bad = Mesh::from_parts(2, vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![vec![0, 2, 1]]);
        assert!(bad.is_err());
    }

    #[test]
    fn volumes_tile_the_box_with_positive_orientation() {
        for dim in 1..=3 {
            let domain = BoxDomain::new(&[-1.0, 0.5, 2.0][..dim], &[1.0, 0.75, 3.5][..dim]).unwrap();
            for n in [1, 3, 4] {
                let mesh = build_box_mesh(&domain, n).unwrap();
                let mut total = 0.0;
                for e in 0..mesh.num_elements() {
                    let v = mesh.signed_measure(e);
                    assert!(v > 0.0);
                    total += v;
                }
                let rel = (total - domain.volume()).abs() / domain.volume();
                assert!(rel < 1e-12, "dim {dim} n {n}: {rel:e}");
                assert!(mesh.h_max() / mesh.h_min() <= 4.0);
                for p in mesh.nodes() {
                    for axis in 0..dim {
                        assert!(p[axis] >= domain.min()[axis] && p[axis] <= domain.max()[axis]);
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_is_nested_and_halves_h() {
        for dim in 1..=3 {
            let domain = BoxDomain::cube(dim, -1.0, 1.0).unwrap();
            let mut coarse = build_box_mesh(&domain, 2).unwrap();
            for _ in 0..2 {
                let fine = refine_uniform(&coarse).unwrap();
                let n = coarse.resolution().unwrap();
                let fine_np = 2 * n + 1;
                for (lin, p) in coarse.nodes().iter().enumerate() {
                    let mut idx = [0usize; 3];
                    let mut rem = lin;
                    for slot in idx.iter_mut().take(dim) {
                        *slot = 2 * (rem % (n + 1));
                        rem /= n + 1;
                    }
                    let q = fine.nodes()[lexicographic_index(&idx[..dim], fine_np)];
                    assert_eq!(p, &q);
                }
                assert!((fine.h_max() - coarse.h_max() / 2.0).abs() < 1e-14);
                coarse = fine;
            }
        }
    }

    #[test]
    fn locate_finds_containing_element() {
        let mesh = build_box_mesh(&BoxDomain::cube(3, -1.0, 1.0).unwrap(), 3).unwrap();
        for x in [[0.1, -0.7, 0.33], [1.0, 1.0, 1.0], [-1.0, 0.2, 0.0]] {
            let (e, bary) = mesh.locate(&x).unwrap();
            let v = mesh.element_vertices(e);
            for c in 0..3 {
                let rebuilt: f64 = (0..4).map(|a| bary[a] * v[a][c]).sum();
                assert!((rebuilt - x[c]).abs() < 1e-13);
            }
        }
        assert!(mesh.locate(&[1.5, 0.0, 0.0]).is_none());
    }
}
