//! Locally conformally symplectic structures `(omega, theta)` with
//! `d omega = theta ^ omega` and `d theta = 0` on a constrained manifold.
//!
//! The `omega`-dual of a covector `a` is the tangent vector `a^omega` with
//! `omega(a^omega, w) = a(w)`; the anti-Lee field is `theta^omega`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::calculus::{KForm, VectorField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{self, RankDecision, RANK_REL_TOL};
use crate::manifold::{ConstrainedManifold, SampleRng};

/// Smallest admissible `|det|` of `omega` restricted to a tangent space.
pub const NONDEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct LcsStructure {
    pub manifold: ConstrainedManifold,
    pub omega: KForm,
    pub theta: KForm,
    derived: OnceLock<Derived>,
}

#[derive(Clone, Debug)]
struct Derived {
    lcs_defect: KForm,
    d_theta: KForm,
}

impl LcsStructure {
    pub fn new(manifold: ConstrainedManifold, omega: KForm, theta: KForm) -> Result<Self> {
        if omega.degree() != 2 || theta.degree() != 1 {
            return Err(Error::Invalid("omega must be a 2-form and theta a 1-form".into()));
        }
        if omega.dim() != manifold.dim || theta.dim() != manifold.dim {
            return Err(Error::Dimension("forms and manifold disagree on the ambient dimension".into()));
        }
        Ok(LcsStructure {
            manifold,
            omega,
            theta,
            derived: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim
    }

    fn derived(&self) -> &Derived {
        self.derived.get_or_init(|| Derived {
            lcs_defect: self.omega.d().sub(&self.theta.wedge(&self.omega)),
            d_theta: self.theta.d(),
        })
    }

    /// `omega` restricted to an orthonormal tangent basis `B`: `B^T W B`.
    pub fn tangent_gram(&self, p: &[f64], basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let w = self.omega.matrix_at(p)?;
        Ok(basis.transpose() * w * basis)
    }

    /// The `omega`-dual of an ambient covector, as an ambient tangent vector.
    pub fn omega_dual_covector(&self, a: &DVector<f64>, p: &[f64]) -> Result<DVector<f64>> {
        let b = self.manifold.tangent_basis(p)?;
        let g = self.tangent_gram(p, &b)?;
        let sigma = linalg::smallest_singular_value(&g);
        if g.ncols() > 0 && sigma < NONDEGENERACY_TOL {
            return Err(Error::Singular {
                what: "omega on the tangent space".into(),
                sigma,
            });
        }
        let rhs = -(b.transpose() * a);
        let c = g
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Singular {
                what: "omega on the tangent space".into(),
                sigma,
            })?;
        Ok(b * c)
    }

    /// `theta^omega` at `p`.
    pub fn anti_lee_at(&self, p: &[f64]) -> Result<DVector<f64>> {
        let th = self.theta.covector_at(p)?;
        self.omega_dual_covector(&th, p)
    }

    /// `omega`-orthogonal of the span of tangent vectors `w` (columns).
    pub fn omega_dual_subspace(&self, w: &DMatrix<f64>, p: &[f64]) -> Result<(DMatrix<f64>, RankDecision)> {
        let b = self.manifold.tangent_basis(p)?;
        let g = self.tangent_gram(p, &b)?;
        // row j dotted with c is omega(B c, w_j)
        let m = (&g * (b.transpose() * w)).transpose();
        let (c, dec) = linalg::null_space(&m, RANK_REL_TOL);
        Ok((b * c, dec))
    }

    /// `(e^f omega, theta + df)`.
    pub fn conformal_rescale(&self, f: &Expr) -> Result<LcsStructure> {
        let ef = f.exp();
        LcsStructure::new(
            self.manifold.clone(),
            self.omega.scale(&ef),
            self.theta.add(&KForm::exact(self.dim(), f)),
        )
    }

    /// `d_theta f = df - f theta` as an ambient covector at `p`.
    pub fn twisted_differential_at(&self, f: &Expr, p: &[f64]) -> Result<DVector<f64>> {
        let df = KForm::exact(self.dim(), f).covector_at(p)?;
        let th = self.theta.covector_at(p)?;
        Ok(df - th * f.eval(p)?)
    }

    /// `{f, g}_theta = omega((d_theta f)^omega, (d_theta g)^omega)` at `p`.
    pub fn twisted_poisson(&self, f: &Expr, g: &Expr, p: &[f64]) -> Result<f64> {
        let vf = self.omega_dual_covector(&self.twisted_differential_at(f, p)?, p)?;
        let vg = self.omega_dual_covector(&self.twisted_differential_at(g, p)?, p)?;
        self.omega.eval_on(p, &[vf, vg])
    }

    /// Symbolic `d_theta`.
    pub fn twisted_d(&self, a: &KForm) -> KForm {
        a.twisted_d(&self.theta)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LcsReport {
    /// `max |d omega - theta ^ omega|` on tangent triples.
    pub lcs_residual: f64,
    /// `max |d theta|` on tangent pairs.
    pub closedness_residual: f64,
    /// `min |det omega|_T|` over samples.
    pub nondegeneracy_margin: f64,
    pub worst_point: Vec<f64>,
}

impl LcsReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.lcs_residual <= tol
            && self.closedness_residual <= tol
            && self.nondegeneracy_margin >= NONDEGENERACY_TOL
    }
}

pub fn verify_lcs(s: &LcsStructure, samples: &[DVector<f64>]) -> Result<LcsReport> {
    let der = s.derived();
    let mut report = LcsReport {
        lcs_residual: 0.0,
        closedness_residual: 0.0,
        nondegeneracy_margin: f64::INFINITY,
        worst_point: vec![],
    };
    let mut worst = -1.0;
    for p in samples {
        let p = p.as_slice();
        let b = s.manifold.tangent_basis(p)?;
        let lcs = der.lcs_defect.values_at(p)?.max_on_basis(&b);
        let closed = der.d_theta.values_at(p)?.max_on_basis(&b);
        let g = s.tangent_gram(p, &b)?;
        let det = if g.ncols() % 2 == 1 { 0.0 } else { g.determinant().abs() };
        report.lcs_residual = report.lcs_residual.max(lcs);
        report.closedness_residual = report.closedness_residual.max(closed);
        report.nondegeneracy_margin = report.nondegeneracy_margin.min(det);
        let score = lcs.max(closed);
        if score > worst {
            worst = score;
            report.worst_point = p.to_vec();
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct H0Probe {
    /// Smallest mean squared `|d_theta f|` over `f` in the span with unit mean square.
    pub min_residual: f64,
    pub coefficients: Vec<f64>,
}

/// Searches a finite function basis for `d_theta`-closed functions.
///
/// The minimisation runs over combinations normalised by their mean square
/// on the samples, so the answer does not depend on how the basis is scaled.
pub fn h0_vanishing_probe(s: &LcsStructure, basis: &[Expr], samples: &[DVector<f64>]) -> Result<H0Probe> {
    let k = basis.len();
    if k == 0 || samples.is_empty() {
        return Err(Error::Invalid("empty basis or sample set".into()));
    }
    let mut gram = DMatrix::<f64>::zeros(k, k);
    let mut energy = DMatrix::<f64>::zeros(k, k);
    let n = samples.len() as f64;
    for p in samples {
        let p = p.as_slice();
        let b = s.manifold.tangent_basis(p)?;
        let mut vals = DVector::zeros(k);
        let mut grads = DMatrix::zeros(b.ncols(), k);
        for (i, f) in basis.iter().enumerate() {
            vals[i] = f.eval(p)?;
            let g = b.transpose() * s.twisted_differential_at(f, p)?;
            grads.set_column(i, &g);
        }
        gram += &vals * vals.transpose() / n;
        energy += grads.transpose() * &grads / n;
    }
    let eig = gram.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin <= 1e-10 * lmax {
        return Err(Error::Singular {
            what: "basis Gram matrix on the samples".into(),
            sigma: lmin,
        });
    }
    // Whitening: gram = Q L Q^T, W = Q L^{-1/2}; minimise eigenvalues of W^T E W.
    let mut w = eig.eigenvectors.clone();
    for (j, l) in eig.eigenvalues.iter().enumerate() {
        let scale = 1.0 / l.sqrt();
        w.column_mut(j).scale_mut(scale);
    }
    let reduced = w.transpose() * &energy * &w;
    let red = reduced.symmetric_eigen();
    let (imin, min_residual) = red
        .eigenvalues
        .iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let c = &w * red.eigenvectors.column(imin);
    Ok(H0Probe {
        min_residual: min_residual.max(0.0),
        coefficients: c.iter().cloned().collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub d_squared: f64,
    pub twisted_d_squared: f64,
    pub twisted_cartan: f64,
    pub wedge_antisymmetry: f64,
    pub worst_point: Vec<f64>,
}

impl IdentityReport {
    pub fn max(&self) -> f64 {
        self.d_squared
            .max(self.twisted_d_squared)
            .max(self.twisted_cartan)
            .max(self.wedge_antisymmetry)
    }
}

/// Seeded random polynomial form of the given degree.
pub fn random_polynomial_form(dim: usize, degree: usize, rng: &mut SampleRng) -> KForm {
    let mut terms = Vec::new();
    for _ in 0..3 {
        let mut idx = Vec::new();
        while idx.len() < degree {
            let i = rng.index(dim);
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        let i = rng.index(dim);
        let j = rng.index(dim);
        let c = Expr::num(round3(rng.uniform(-1.0, 1.0)))
            + Expr::num(round3(rng.uniform(-1.0, 1.0))) * Expr::x(i)
            + Expr::num(round3(rng.uniform(-1.0, 1.0))) * Expr::x(i) * Expr::x(j);
        terms.push((idx, c));
    }
    KForm::from_terms(dim, degree, terms)
}

/// Seeded random polynomial vector field.
pub fn random_polynomial_field(dim: usize, rng: &mut SampleRng) -> VectorField {
    VectorField::new(
        (0..dim)
            .map(|_| {
                let i = rng.index(dim);
                Expr::num(round3(rng.uniform(-1.0, 1.0))) + Expr::num(round3(rng.uniform(-1.0, 1.0))) * Expr::x(i)
            })
            .collect(),
    )
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn max_coeff(a: &KForm, p: &[f64]) -> Result<f64> {
    Ok(a.values_at(p)?.terms.iter().fold(0.0, |m, (_, c)| m.max(c.abs())))
}

/// Exterior-calculus identities on the structure's own forms and fields and
/// on seeded random polynomial forms: `d^2 = 0`, `d_theta^2 = 0`, the
/// twisted Cartan formula and graded antisymmetry of the wedge product.
pub fn identity_suite(
    s: &LcsStructure,
    extra_forms: &[KForm],
    fields: &[VectorField],
    samples: &[DVector<f64>],
    rng: &mut SampleRng,
) -> Result<IdentityReport> {
    let dim = s.dim();
    let mut forms = vec![s.omega.clone(), s.theta.clone()];
    forms.extend_from_slice(extra_forms);
    forms.push(random_polynomial_form(dim, 1, rng));
    forms.push(random_polynomial_form(dim, 2, rng));
    let mut fields = fields.to_vec();
    fields.push(random_polynomial_field(dim, rng));

    let mut checks: Vec<(usize, KForm)> = Vec::new();
    for a in &forms {
        checks.push((0, a.d().d()));
        checks.push((1, s.twisted_d(&s.twisted_d(a))));
        if a.degree() > 0 {
            for x in &fields {
                let lhs = a.twisted_lie(&s.theta, x);
                let rhs = s
                    .twisted_d(&a.interior(x))
                    .add(&s.twisted_d(a).interior(x));
                checks.push((2, lhs.sub(&rhs)));
            }
        }
    }
    for (i, a) in forms.iter().enumerate() {
        for b in forms.iter().skip(i) {
            if a.degree() + b.degree() > dim {
                continue;
            }
            let sign = if (a.degree() * b.degree()) % 2 == 0 { 1.0 } else { -1.0 };
            let ab = a.wedge(b);
            let ba = b.wedge(a).scale(&Expr::num(sign));
            checks.push((3, ab.sub(&ba)));
        }
    }
    let mut out = [0.0f64; 4];
    let mut worst = -1.0;
    let mut worst_point = vec![];
    for p in samples {
        let p = p.as_slice();
        for (kind, form) in &checks {
            let v = max_coeff(form, p)?;
            out[*kind] = out[*kind].max(v);
            if v > worst {
                worst = v;
                worst_point = p.to_vec();
            }
        }
    }
    Ok(IdentityReport {
        d_squared: out[0],
        twisted_d_squared: out[1],
        twisted_cartan: out[2],
        wedge_antisymmetry: out[3],
        worst_point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn standard_r4() -> LcsStructure {
        let omega = KForm::from_terms(
            4,
            2,
            vec![(vec![0, 1], e("-2")), (vec![2, 3], e("-2"))],
        );
        LcsStructure::new(ConstrainedManifold::euclidean(4), omega, KForm::zero(4, 1)).unwrap()
    }

    #[test]
    fn rescaled_standard_form_is_lcs() {
        let s = standard_r4().conformal_rescale(&e("x1")).unwrap();
        let mut rng = SampleRng::new(3);
        let pts = s.manifold.sample(&mut rng, 10, 1.0).unwrap();
        let r = verify_lcs(&s, &pts).unwrap();
        assert!(r.passes(1e-10), "{r:?}");
    }

    #[test]
    fn omega_dual_convention() {
        let s = standard_r4();
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let p = [0.0; 4];
        let v = s.omega_dual_covector(&a, &p).unwrap();
        for j in 0..4 {
            let w = DVector::from_fn(4, |i, _| if i == j { 1.0 } else { 0.0 });
            let lhs = s.omega.eval_on(&p, &[v.clone(), w]).unwrap();
            assert!((lhs - a[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_omega_is_rejected() {
        let omega = KForm::from_terms(4, 2, vec![(vec![0, 1], e("1"))]);
        let s = LcsStructure::new(ConstrainedManifold::euclidean(4), omega, KForm::zero(4, 1)).unwrap();
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            s.omega_dual_covector(&a, &[0.0; 4]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn h0_probe_finds_exponential() {
        let s = standard_r4().conformal_rescale(&e("x1")).unwrap();
        let mut rng = SampleRng::new(5);
        let pts = s.manifold.sample(&mut rng, 20, 1.0).unwrap();
        let probe = h0_vanishing_probe(&s, &[e("1"), e("exp(x1)"), e("x2")], &pts).unwrap();
        assert!(probe.min_residual < 1e-12);
        let c = &probe.coefficients;
        assert!(c[0].abs() < 1e-8 && c[2].abs() < 1e-8 && c[1].abs() > 0.1);
    }

    #[test]
    fn h0_probe_rejects_dependent_basis() {
        let s = standard_r4();
        let mut rng = SampleRng::new(5);
        let pts = s.manifold.sample(&mut rng, 20, 1.0).unwrap();
        assert!(h0_vanishing_probe(&s, &[e("x1"), e("2*x1")], &pts).is_err());
    }
}
