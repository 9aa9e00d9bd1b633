//! Submanifolds of `R^N` cut out by constraint functions, with tangent
//! spaces, Gauss-Newton projection and seeded sampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;

use crate::calculus::eval_matrix;
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::linalg::{self, RANK_REL_TOL};

pub const PROJECTION_MAX_ITERATIONS: usize = 50;
pub const PROJECTION_TOL: f64 = 1e-10;
/// Smallest singular value below which a Jacobian counts as rank deficient.
pub const REGULARITY_TOL: f64 = 1e-6;

/// The zero set of a list of constraint functions on `R^dim`.
#[derive(Clone, Debug)]
pub struct ConstrainedManifold {
    pub dim: usize,
    constraints: Vec<Expr>,
    grads: Vec<Vec<Expr>>,
}

impl ConstrainedManifold {
    pub fn new(dim: usize, constraints: Vec<Expr>) -> Self {
        let grads = gradients(dim, &constraints);
        ConstrainedManifold {
            dim,
            constraints,
            grads,
        }
    }

    pub fn euclidean(dim: usize) -> Self {
        ConstrainedManifold::new(dim, vec![])
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn codim(&self) -> usize {
        self.constraints.len()
    }

    pub fn manifold_dim(&self) -> usize {
        self.dim - self.constraints.len()
    }

    /// Cartesian product with `other`, whose coordinates come after ours.
    pub fn product(&self, other: &ConstrainedManifold) -> ConstrainedManifold {
        let mut cs = self.constraints.clone();
        cs.extend(other.constraints.iter().map(|c| c.shift_coords(self.dim)));
        ConstrainedManifold::new(self.dim + other.dim, cs)
    }

    /// Adds further constraints, for example a momentum level.
    pub fn restrict(&self, extra: &[Expr]) -> ConstrainedManifold {
        let mut cs = self.constraints.clone();
        cs.extend_from_slice(extra);
        ConstrainedManifold::new(self.dim, cs)
    }

    pub fn residual(&self, p: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            worst = worst.max(c.eval(p)?.abs());
        }
        Ok(worst)
    }

    pub fn constraint_jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        if self.constraints.is_empty() {
            return Ok(DMatrix::zeros(0, self.dim));
        }
        eval_matrix(&self.grads, p)
    }

    /// Orthonormal basis of the tangent space at `p`, as columns.
    pub fn tangent_basis(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.constraint_jacobian(p)?;
        let (basis, _) = linalg::null_space(&j, RANK_REL_TOL);
        Ok(basis)
    }

    /// Orthogonal projection of `v` onto the tangent space at `p`.
    pub fn project_vector(&self, p: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        let b = self.tangent_basis(p)?;
        Ok(&b * (b.transpose() * v))
    }

    /// Gauss-Newton projection of `seed` onto the zero set.
    pub fn project(&self, seed: &[f64]) -> Result<Projection> {
        newton_project(&self.constraints, &self.grads, seed)
    }

    /// Seeded sample of points on the manifold.
    pub fn sample(&self, rng: &mut SampleRng, count: usize, radius: f64) -> Result<Vec<DVector<f64>>> {
        self.sample_where(rng, count, radius, |_| true)
    }

    pub fn sample_where<F>(
        &self,
        rng: &mut SampleRng,
        count: usize,
        radius: f64,
        keep: F,
    ) -> Result<Vec<DVector<f64>>>
    where
        F: Fn(&[f64]) -> bool,
    {
        let mut out = Vec::with_capacity(count);
        let mut last_err = None;
        let attempts = 8 * count.max(1) + 16;
        for _ in 0..attempts {
            if out.len() == count {
                break;
            }
            let seed = rng.gaussian_vector(self.dim, radius);
            match self.project(seed.as_slice()) {
                Ok(p) if keep(p.point.as_slice()) => out.push(p.point),
                Ok(_) => {}
                Err(e) => last_err = Some(e),
            }
        }
        if out.len() < count {
            return Err(last_err.unwrap_or_else(|| {
                Error::Invalid(format!(
                    "only {} of {count} sample points satisfied the sampling guard",
                    out.len()
                ))
            }));
        }
        Ok(out)
    }
}

pub fn gradients(dim: usize, fs: &[Expr]) -> Vec<Vec<Expr>> {
    fs.iter()
        .map(|c| (0..dim).map(|j| c.diff(Var::Coord(j))).collect())
        .collect()
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub point: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Minimum-norm Gauss-Newton iteration towards `fs = 0`.
///
/// Converged means residual at most [`PROJECTION_TOL`] and a Newton step
/// below the same scale. A converged point whose Jacobian has a singular
/// value under [`REGULARITY_TOL`] is reported as rank deficient, which is
/// how slow linear convergence onto a singular level shows up.
pub fn newton_project(fs: &[Expr], grads: &[Vec<Expr>], seed: &[f64]) -> Result<Projection> {
    let mut x = DVector::from_column_slice(seed);
    if fs.is_empty() {
        return Ok(Projection {
            point: x,
            iterations: 1,
            residual: 0.0,
        });
    }
    let mut residual = f64::INFINITY;
    for it in 1..=PROJECTION_MAX_ITERATIONS {
        let r = DVector::from_iterator(
            fs.len(),
            fs.iter().map(|f| f.eval(x.as_slice())).collect::<std::result::Result<Vec<_>, _>>()?,
        );
        let j = eval_matrix(grads, x.as_slice())?;
        residual = linalg::max_abs(r.as_slice());
        let d = linalg::svd(&j);
        let sigma_max = d.sigma_max();
        let sigma_min = if d.singular.len() < fs.len() { 0.0 } else { d.sigma_min() };
        if sigma_max == 0.0 || sigma_max.is_nan() {
            return Err(Error::RankDeficient { sigma: 0.0 });
        }
        let step = d.solve(&r, 1e-14 * sigma_max);
        let step_norm = step.norm();
        if residual <= PROJECTION_TOL && step_norm <= PROJECTION_TOL * (1.0 + x.norm()) {
            if sigma_min < REGULARITY_TOL {
                return Err(Error::RankDeficient { sigma: sigma_min });
            }
            return Ok(Projection {
                point: x,
                iterations: it,
                residual,
            });
        }
        x -= step;
    }
    Err(Error::NonConvergence {
        iterations: PROJECTION_MAX_ITERATIONS,
        residual,
    })
}

/// The workbench PRNG: SplitMix64 (64-bit state), split per check by label.
#[derive(Clone, Debug)]
pub struct SampleRng(SplitMix64);

fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl SampleRng {
    pub fn new(seed: u64) -> Self {
        SampleRng(SplitMix64::seed_from_u64(seed))
    }

    /// Independent stream for a named consumer, fixed by `(seed, label)`.
    pub fn derive(seed: u64, label: &str) -> Self {
        SampleRng::new(seed ^ fnv1a(label))
    }

    pub fn gaussian_vector(&mut self, n: usize, scale: f64) -> DVector<f64> {
        DVector::from_iterator(
            n,
            (0..n).map(|_| scale * self.0.sample::<f64, _>(StandardNormal)),
        )
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.random_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.0.random_range(0..n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize) -> ConstrainedManifold {
        let c = Expr::sum((0..n).map(|i| Expr::x(i).powi(2))) - 1.0;
        ConstrainedManifold::new(n, vec![c])
    }

    #[test]
    fn projects_onto_sphere() {
        let m = sphere(3);
        let p = m.project(&[0.3, -2.0, 0.5]).unwrap();
        assert!(m.residual(p.point.as_slice()).unwrap() <= PROJECTION_TOL);
        assert!(p.iterations <= 10);
    }

    #[test]
    fn seed_on_level_is_fixed_in_one_iteration() {
        let m = sphere(2);
        let p = m.project(&[0.6, 0.8]).unwrap();
        assert_eq!(p.iterations, 1);
        assert!((p.point[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn singular_level_is_rank_deficient() {
        let m = ConstrainedManifold::new(2, vec![Expr::parse("x1^2 + x2^2").unwrap()]);
        assert!(matches!(m.project(&[0.5, 0.2]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn tangent_basis_is_orthogonal_to_gradient() {
        let m = sphere(4);
        let p = m.project(&[1.0, 2.0, 3.0, 4.0]).unwrap().point;
        let b = m.tangent_basis(p.as_slice()).unwrap();
        assert_eq!(b.ncols(), 3);
        assert!((b.transpose() * &p).norm() < 1e-12);
    }

    #[test]
    fn rng_is_deterministic_and_split() {
        let a = SampleRng::derive(7, "x").gaussian_vector(3, 1.0);
        let b = SampleRng::derive(7, "x").gaussian_vector(3, 1.0);
        let c = SampleRng::derive(7, "y").gaussian_vector(3, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
