//! Fixed-step RK4 integration, with and without the variational equation.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

/// Integrates `x' = f(x)` from `x0` over time `t` in `steps` equal steps.
pub fn rk4<F>(f: F, x0: &DVector<f64>, t: f64, steps: usize) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let h = t / steps.max(1) as f64;
    let mut x = x0.clone();
    for _ in 0..steps.max(1) {
        let k1 = f(&x)?;
        let k2 = f(&(&x + &k1 * (h / 2.0)))?;
        let k3 = f(&(&x + &k2 * (h / 2.0)))?;
        let k4 = f(&(&x + &k3 * h))?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(x)
}

/// Integrates the flow together with its spatial Jacobian `D phi_t`.
pub fn rk4_with_jacobian<F, J>(
    f: F,
    jac: J,
    x0: &DVector<f64>,
    t: f64,
    steps: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let n = x0.len();
    let h = t / steps.max(1) as f64;
    let mut x = x0.clone();
    let mut m = DMatrix::<f64>::identity(n, n);
    for _ in 0..steps.max(1) {
        let k1 = f(&x)?;
        let l1 = jac(&x)? * &m;
        let x2 = &x + &k1 * (h / 2.0);
        let m2 = &m + &l1 * (h / 2.0);
        let k2 = f(&x2)?;
        let l2 = jac(&x2)? * &m2;
        let x3 = &x + &k2 * (h / 2.0);
        let m3 = &m + &l2 * (h / 2.0);
        let k3 = f(&x3)?;
        let l3 = jac(&x3)? * &m3;
        let x4 = &x + &k3 * h;
        let m4 = &m + &l3 * h;
        let k4 = f(&x4)?;
        let l4 = jac(&x4)? * &m4;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        m += (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (h / 6.0);
    }
    Ok((x, m))
}

/// Five-point central difference of `g` at 0 with step `h`.
pub fn five_point<G>(g: G, h: f64) -> Result<f64>
where
    G: Fn(f64) -> Result<f64>,
{
    Ok((g(-2.0 * h)? - 8.0 * g(-h)? + 8.0 * g(h)? - g(2.0 * h)?) / (12.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_closes_after_full_turn() {
        let f = |x: &DVector<f64>| Ok(DVector::from_vec(vec![-x[1], x[0]]));
        let x0 = DVector::from_vec(vec![1.0, 0.0]);
        let x = rk4(f, &x0, 2.0 * std::f64::consts::PI, 4000).unwrap();
        assert!((x - x0).norm() < 1e-12);
    }

    #[test]
    fn jacobian_of_linear_flow() {
        let f = |x: &DVector<f64>| Ok(DVector::from_vec(vec![x[0], -2.0 * x[1]]));
        let j = |_: &DVector<f64>| Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]));
        let (_, m) = rk4_with_jacobian(f, j, &DVector::from_vec(vec![1.0, 1.0]), 0.5, 500).unwrap();
        assert!((m[(0, 0)] - 0.5f64.exp()).abs() < 1e-12);
        assert!((m[(1, 1)] - (-1.0f64).exp()).abs() < 1e-12);
    }
}
