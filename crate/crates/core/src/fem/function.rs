use std::sync::Arc;

use super::space::FeSpace;
use crate::error::{Error, Result};
use crate::mesh::Point;

/// A scalar field that can be sampled pointwise together with its gradient.
pub trait Field: Send + Sync {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> [f64; 3];
}

/// Field backed by two closures.
pub struct FnField<V, G> {
    value: V,
    gradient: G,
}

impl<V, G> FnField<V, G>
where
    V: Fn(&Point) -> f64 + Send + Sync,
    G: Fn(&Point) -> [f64; 3] + Send + Sync,
{
    pub fn new(value: V, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<V, G> Field for FnField<V, G>
where
    V: Fn(&Point) -> f64 + Send + Sync,
    G: Fn(&Point) -> [f64; 3] + Send + Sync,
{
    fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Point) -> [f64; 3] {
        (self.gradient)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantField(pub f64);

impl Field for ConstantField {
    fn value(&self, _: &Point) -> f64 {
        self.0
    }

    fn gradient(&self, _: &Point) -> [f64; 3] {
        [0.0; 3]
    }
}

/// `c + b . x`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineField {
    pub constant: f64,
    pub slope: [f64; 3],
}

impl Field for AffineField {
    fn value(&self, x: &Point) -> f64 {
        self.constant + self.slope[0] * x[0] + self.slope[1] * x[1] + self.slope[2] * x[2]
    }

    fn gradient(&self, _: &Point) -> [f64; 3] {
        self.slope
    }
}

/// A finite element function: coefficient vector over a Lagrange space.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for a space with {} dofs",
                coeffs.len(),
                space.num_dofs()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {i} is not finite")));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn constant(space: Arc<FeSpace>, c: f64) -> Self {
        let n = space.num_dofs();
        Self {
            space,
            coeffs: vec![c; n],
        }
    }

    /// Nodal interpolant of `field`.
    pub fn interpolate(space: Arc<FeSpace>, field: &dyn Field) -> Self {
        let coeffs = space.dof_coords().iter().map(|x| field.value(x)).collect();
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `a * self + b * other` on a shared space.
    pub fn combine(&self, a: f64, other: &FeFunction, b: f64) -> Result<FeFunction> {
        if !Arc::ptr_eq(&self.space, &other.space) && self.space.num_dofs() != other.space.num_dofs() {
            return Err(Error::InvalidArgument("functions live on different spaces".into()));
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(FeFunction {
            space: self.space.clone(),
            coeffs,
        })
    }

    pub fn sub(&self, other: &FeFunction) -> Result<FeFunction> {
        self.combine(1.0, other, -1.0)
    }

    /// Value inside element `e` at barycentric coordinates `bary`.
    pub fn value_in_element(&self, e: usize, bary: &[f64; 4]) -> f64 {
        let mut vals = [0.0; 10];
        let nl = self.space.num_local();
        self.space.basis().values(bary, &mut vals[..nl]);
        self.space
            .element_dofs(e)
            .iter()
            .zip(&vals[..nl])
            .map(|(&g, v)| self.coeffs[g] * v)
            .sum()
    }

    /// Point evaluation; `None` outside the mesh.
    pub fn evaluate(&self, x: &Point) -> Option<f64> {
        self.space
            .mesh()
            .locate(x)
            .map(|(e, bary)| self.value_in_element(e, &bary))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }
}
