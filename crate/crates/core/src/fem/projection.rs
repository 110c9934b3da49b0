use std::sync::Arc;

use super::assembly::{assemble_field_load, assemble_gradient_load, assemble_mass, assemble_stiffness, integrate_pointwise};
use super::function::{FeFunction, Field};
use super::linalg::{solve, SolverConfig};
use super::space::FeSpace;
use super::sparse::{dot, CsrMatrix};
use crate::error::{Error, Result};

/// Ritz projection with matched mean: `<grad(R v - v), grad chi> = 0` for all
/// `chi` and `<R v - v, 1> = 0`.
///
/// The Neumann stiffness matrix has the constants as its kernel and the load
/// is orthogonal to them, so pinning dof 0 yields one solution of the
/// singular system; the constant shift then fixes the mean. This keeps the
/// system sparse, unlike bordering with the dense row `M 1`.
pub fn ritz_projection(space: &Arc<FeSpace>, field: &dyn Field) -> Result<FeFunction> {
    let n = space.num_dofs();
    let k = assemble_stiffness(space);
    let m1 = assemble_mass(space).mul_vec(&vec![1.0; n]);

    let mut triplets = Vec::with_capacity(k.nnz());
    for i in 0..n {
        let start = k.pattern().row_ptr()[i];
        for (kk, &j) in k.pattern().row(i).iter().enumerate() {
            if i == 0 || j == 0 {
                if i == j {
                    triplets.push((0, 0, 1.0));
                }
                continue;
            }
            triplets.push((i, j, k.values()[start + kk]));
        }
    }
    let pinned = CsrMatrix::from_triplets(n, &triplets, true);

    let mut rhs = assemble_gradient_load(space, field);
    rhs[0] = 0.0;
    let config = SolverConfig {
        tolerance: 1e-10,
        ..SolverConfig::direct()
    };
    let (mut x, _) = solve(&pinned, &rhs, &config)?;
    let volume: f64 = m1.iter().sum();
    let shift = (integrate_pointwise(space, |p| field.value(p)) - dot(&m1, &x)) / volume;
    x.iter_mut().for_each(|v| *v += shift);
    FeFunction::new(space.clone(), x)
}

/// L2-orthogonal projection: `<P v - v, chi> = 0` for all `chi`.
pub fn l2_projection(space: &Arc<FeSpace>, field: &dyn Field) -> Result<FeFunction> {
    let m = assemble_mass(space);
    let rhs = assemble_field_load(space, field);
    let config = SolverConfig {
        tolerance: 1e-10,
        ..SolverConfig::direct()
    };
    let (x, _) = solve(&m, &rhs, &config)?;
    FeFunction::new(space.clone(), x)
}

/// Evaluates a coarse function at the dofs of the uniformly refined space.
pub fn prolong(coarse: &FeFunction, fine: &Arc<FeSpace>) -> Result<FeFunction> {
    if !coarse.space().is_refined_by(fine) {
        return Err(Error::InvalidArgument(
            "prolongation requires the uniform refinement of the coarse mesh".into(),
        ));
    }
    let mesh = coarse.space().mesh();
    let mut coeffs = Vec::with_capacity(fine.num_dofs());
    for x in fine.dof_coords() {
        let (e, bary) = mesh.locate(x).ok_or_else(|| {
            Error::InvalidArgument(format!("fine dof at {x:?} lies outside the coarse mesh"))
        })?;
        coeffs.push(coarse.value_in_element(e, &bary));
    }
    FeFunction::new(fine.clone(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::function::{AffineField, ConstantField, FnField};
    use crate::fem::norms::{norm, norm_diff, NormKind};
    use crate::mesh::{build_box_mesh, refine_uniform, BoxDomain};
    use std::f64::consts::PI;

    fn square(n: usize, q: usize) -> Arc<FeSpace> {
        let mesh = build_box_mesh(&BoxDomain::cube(2, -1.0, 1.0).unwrap(), n).unwrap();
        FeSpace::new(Arc::new(mesh), q).unwrap()
    }

    fn sine() -> impl Field {
        FnField::new(
            |x: &[f64; 3]| (PI * x[0]).sin() * (PI * x[1]).sin(),
            |x: &[f64; 3]| {
                [
                    PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
                    0.0,
                ]
            },
        )
    }

    #[test]
    fn ritz_reproduces_affine_and_constant() {
        let space = square(5, 1);
        let affine = AffineField {
            constant: 0.3,
            slope: [1.5, -0.25, 0.0],
        };
        let r = ritz_projection(&space, &affine).unwrap();
        for (c, x) in r.coeffs().iter().zip(space.dof_coords()) {
            assert!((c - affine.value(x)).abs() < 1e-12);
        }
        let r = ritz_projection(&space, &ConstantField(-2.5)).unwrap();
        assert!(r.coeffs().iter().all(|c| (c + 2.5).abs() < 1e-12));
    }

    #[test]
    fn ritz_galerkin_orthogonality_and_mean() {
        let space = square(6, 1);
        let field = sine();
        let r = ritz_projection(&space, &field).unwrap();
        let k = assemble_stiffness(&space);
        let kr = k.mul_vec(r.coeffs());
        let load = assemble_gradient_load(&space, &field);
        for (a, b) in kr.iter().zip(&load) {
            assert!((a - b).abs() < 1e-12);
        }
        let m1 = assemble_mass(&space).mul_vec(&vec![1.0; space.num_dofs()]);
        let mean_field = integrate_pointwise(&space, |x| field.value(x));
        assert!((dot(&m1, r.coeffs()) - mean_field).abs() < 1e-12);
    }

    #[test]
    fn ritz_and_l2_converge_at_second_order() {
        let field = sine();
        let err = |n: usize, ritz: bool| {
            let space = square(n, 1);
            let p = if ritz {
                ritz_projection(&space, &field).unwrap()
            } else {
                l2_projection(&space, &field).unwrap()
            };
            norm_diff(&p, &field, NormKind::L2)
        };
        for ritz in [true, false] {
            let ratio = err(8, ritz) / err(16, ritz);
            assert!((3.5..=4.5).contains(&ratio), "ritz={ritz}: ratio {ratio}");
        }
    }

    #[test]
    fn l2_projection_reproduces_members_and_mean() {
        for q in 1..=2 {
            let space = square(4, q);
            let affine = AffineField {
                constant: -0.1,
                slope: [0.7, 2.0, 0.0],
            };
            let p = l2_projection(&space, &affine).unwrap();
            for (c, x) in p.coeffs().iter().zip(space.dof_coords()) {
                assert!((c - affine.value(x)).abs() < 1e-12);
            }
        }
        let space = square(6, 1);
        let field = sine();
        let p = l2_projection(&space, &FnField::new(|x: &[f64; 3]| field.value(x) + x[0] * x[0], |_| [0.0; 3])).unwrap();
        let m1 = assemble_mass(&space).mul_vec(&vec![1.0; space.num_dofs()]);
        let exact_mean = integrate_pointwise(&space, |x| field.value(x) + x[0] * x[0]);
        assert!((dot(&m1, p.coeffs()) - exact_mean).abs() < 1e-12);
        // Galerkin orthogonality against every basis function.
        let m = assemble_mass(&space);
        let load = assemble_field_load(&space, &FnField::new(|x: &[f64; 3]| field.value(x) + x[0] * x[0], |_| [0.0; 3]));
        for (a, b) in m.mul_vec(p.coeffs()).iter().zip(&load) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prolongation_is_exact_on_nested_spaces() {
        for q in 1..=2 {
            let coarse = square(4, q);
            let fine_mesh = refine_uniform(coarse.mesh()).unwrap();
            let fine = FeSpace::new(Arc::new(fine_mesh), q).unwrap();
            let u = l2_projection(&coarse, &sine()).unwrap();
            let pu = prolong(&u, &fine).unwrap();
            let (a, b) = (norm(&u, NormKind::L2), norm(&pu, NormKind::L2));
            assert!((a - b).abs() < 1e-12);
            let (a, b) = (norm(&u, NormKind::H1Semi), norm(&pu, NormKind::H1Semi));
            assert!((a - b).abs() < 1e-12);
            let c = prolong(&FeFunction::constant(coarse.clone(), 3.0), &fine).unwrap();
            assert!(c.coeffs().iter().all(|&v| v == 3.0));
            // The prolonged function, seen as a field, coincides with the coarse one.
            let as_field = FnField::new(move |x: &[f64; 3]| pu.evaluate(x).unwrap(), |_| [0.0; 3]);
            assert!(norm_diff(&u, &as_field, NormKind::L2) < 1e-12);
        }
    }

    #[test]
    fn prolongation_rejects_non_nested_meshes() {
        let coarse = square(4, 1);
        let other = square(6, 1);
        let u = FeFunction::constant(coarse, 1.0);
        assert!(matches!(prolong(&u, &other), Err(Error::InvalidArgument(_))));
    }
}
