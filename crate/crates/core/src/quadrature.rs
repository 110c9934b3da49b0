//! Quadrature on the reference simplex.
//!
//! Degree 1 is the centroid rule. Higher degrees use collapsed-coordinate
//! (Duffy) products of Gauss-Legendre rules, which have positive weights and
//! interior points for every degree.

use crate::error::{Error, Result};
use crate::mesh::factorial;

/// Highest polynomial degree a rule can be requested for.
pub const MAX_DEGREE: usize = 12;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub dim: usize,
    pub degree: usize,
    /// Barycentric coordinates, `dim + 1` meaningful entries per point.
    pub points: Vec<[f64; 4]>,
    /// Weights in reference-volume units; they sum to `1 / dim!`.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn reference_volume(&self) -> f64 {
        1.0 / factorial(self.dim)
    }
}

/// Rule on the reference `dim`-simplex exact for polynomials of `degree`.
pub fn quadrature_rule(dim: usize, degree: usize) -> Result<QuadratureRule> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidConfig(format!("no quadrature in dimension {dim}")));
    }
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(Error::InvalidConfig(format!(
            "quadrature degree {degree} outside 1..={MAX_DEGREE}"
        )));
    }
    if degree == 1 {
        let c = 1.0 / (dim as f64 + 1.0);
        let mut p = [0.0; 4];
        p[..=dim].fill(c);
        return Ok(QuadratureRule {
            dim,
            degree,
            points: vec![p],
            weights: vec![1.0 / factorial(dim)],
        });
    }

    let m = (degree + dim).div_ceil(2);
    let (gx, gw) = gauss_legendre_unit(m);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for (x, w) in gx.iter().zip(&gw) {
                points.push([1.0 - x, *x, 0.0, 0.0]);
                weights.push(*w);
            }
        }
        2 => {
            for (u, wu) in gx.iter().zip(&gw) {
                for (v, wv) in gx.iter().zip(&gw) {
                    let x = u * (1.0 - v);
                    let y = *v;
                    points.push([1.0 - x - y, x, y, 0.0]);
                    weights.push(wu * wv * (1.0 - v));
                }
            }
        }
        _ => {
            for (u, wu) in gx.iter().zip(&gw) {
                for (v, wv) in gx.iter().zip(&gw) {
                    for (w, ww) in gx.iter().zip(&gw) {
                        let x = u * (1.0 - v) * (1.0 - w);
                        let y = v * (1.0 - w);
                        let z = *w;
                        points.push([1.0 - x - y - z, x, y, z]);
                        weights.push(wu * wv * ww * (1.0 - v) * (1.0 - w) * (1.0 - w));
                    }
                }
            }
        }
    }
    Ok(QuadratureRule {
        dim,
        degree,
        points,
        weights,
    })
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(m);
    let mut ws = Vec::with_capacity(m);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d.is_finite() {
            dp = d;
        }
        xs.push(0.5 * (1.0 - x));
        ws.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

/// Value and derivative of the Legendre polynomial of degree `m` at `x`.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of `x^a y^b z^c` over the reference simplex:
    /// `a! b! c! / (a + b + c + dim)!`.
    fn monomial_integral(exps: &[usize]) -> f64 {
        let num: f64 = exps.iter().map(|&e| factorial(e)).product();
        num / factorial(exps.iter().sum::<usize>() + exps.len())
    }

    fn apply(rule: &QuadratureRule, exps: &[usize]) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(p, w)| {
                w * exps
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| p[k + 1].powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn weights_sum_to_reference_volume() {
        let r = quadrature_rule(2, 1).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        assert!((r.points[0][0] - 1.0 / 3.0).abs() < 1e-15);
        let r = quadrature_rule(3, 2).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn x2y2_on_triangle() {
        let r = quadrature_rule(2, 4).unwrap();
        assert!((apply(&r, &[2, 2]) - 1.0 / 180.0).abs() < 1e-12);
    }

    #[test]
    fn exact_for_all_monomials_up_to_degree() {
        for dim in 1..=3 {
            for degree in 1..=MAX_DEGREE {
                let rule = quadrature_rule(dim, degree).unwrap();
                for a in 0..=degree {
                    for b in 0..=(if dim > 1 { degree - a } else { 0 }) {
                        for c in 0..=(if dim > 2 { degree - a - b } else { 0 }) {
                            let exps = [a, b, c];
                            let exact = monomial_integral(&exps[..dim]);
                            let got = apply(&rule, &exps[..dim]);
                            assert!(
                                ((got - exact) / exact).abs() < 1e-12,
                                "dim {dim} degree {degree} exps {exps:?}: {got} vs {exact}"
                            );
                        }
                    }
                }
                for p in &rule.points {
                    assert!((p[..=dim].iter().sum::<f64>() - 1.0).abs() < 1e-14);
                    assert!(p[..=dim].iter().all(|&l| l >= 0.0));
                }
            }
        }
    }

    #[test]
    fn unsupported_degree_is_rejected() {
        assert!(matches!(quadrature_rule(2, 0), Err(Error::InvalidConfig(_))));
        assert!(quadrature_rule(2, MAX_DEGREE + 1).is_err());
        assert!(quadrature_rule(4, 2).is_err());
    }
}
