//! Central finite differences.
//!
//! Used as the second, independent assembly route for the curvature
//! Jacobian and for the hyperbolic per-tet blocks, where no closed form is
//! available.

use nalgebra::DMatrix;

use crate::Result;

/// Relative step: coordinate `x_j` is perturbed by `REL_STEP · |x_j|`.
pub const REL_STEP: f64 = 1e-5;

/// Jacobian `∂f_i/∂x_j` by central differences with step `rel_step · |x_j|`.
pub fn central_jacobian<F>(x: &[f64], rel_step: f64, mut f: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(f64::MIN_POSITIVE);
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        let inv = 1.0 / (2.0 * h);
        columns.push(
            plus.iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) * inv)
                .collect::<Vec<_>>(),
        );
    }
    let rows = columns.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows, x.len(), |i, j| columns[j][i]))
}

/// Gradient of a scalar function by central differences.
pub fn central_gradient<F>(x: &[f64], rel_step: f64, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let jac = central_jacobian(x, rel_step, |p| f(p).map(|v| vec![v]))?;
    Ok(jac.row(0).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_jacobian() {
        let x = [1.5, -0.5];
        let jac = central_jacobian(&x, REL_STEP, |p| {
            Ok(vec![p[0] * p[0] * p[1], p[0] + 3.0 * p[1] * p[1] * p[1]])
        })
        .unwrap();
        let want = [[2.0 * 1.5 * -0.5, 1.5 * 1.5], [1.0, 9.0 * 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((jac[(i, j)] - want[i][j]).abs() < 1e-9);
            }
        }
        let g = central_gradient(&x, REL_STEP, |p| Ok(p[0].sin() + p[1].exp())).unwrap();
        assert!((g[0] - 1.5f64.cos()).abs() < 1e-9);
        assert!((g[1] - (-0.5f64).exp()).abs() < 1e-9);
    }
}
