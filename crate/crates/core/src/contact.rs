//! Contact forms, Reeb fields, contact momentum maps and the bridge to LCS
//! structures on `S^1 x C`.
//!
//! The circle factor is the unit circle in the first two ambient
//! coordinates with the angular form `(x1 dx2 - x2 dx1)/(x1^2 + x2^2)`;
//! the contact manifold's coordinates are shifted by two.

use nalgebra::{DMatrix, DVector};

use crate::action::{Flow, GroupAction, MomentumData, Residual};
use crate::calculus::{DiffeoMap, KForm, VectorField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lcs::LcsStructure;
use crate::linalg::{self, RANK_REL_TOL};
use crate::manifold::ConstrainedManifold;
use crate::reduction::{quotient_verify, QuotientReport, QuotientWitness, Reduction};

/// Threshold for `|alpha ^ (d alpha)^k|` on an orthonormal tangent frame.
pub const CONTACT_TOL: f64 = 1e-8;
/// Foliation vectors shorter than this are dropped as degenerate.
pub const DEGENERATE_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ContactStructure {
    pub manifold: ConstrainedManifold,
    pub alpha: KForm,
    dalpha: KForm,
    top: KForm,
}

impl ContactStructure {
    pub fn new(manifold: ConstrainedManifold, alpha: KForm) -> Result<Self> {
        if alpha.degree() != 1 || alpha.dim() != manifold.dim {
            return Err(Error::Dimension("contact form must be a 1-form on the ambient space".into()));
        }
        if manifold.manifold_dim() % 2 == 0 {
            return Err(Error::Invalid(format!(
                "contact manifold must be odd-dimensional, got {}",
                manifold.manifold_dim()
            )));
        }
        let dalpha = alpha.d();
        let k = (manifold.manifold_dim() - 1) / 2;
        let top = alpha.wedge(&dalpha.power(k));
        Ok(ContactStructure {
            manifold,
            alpha,
            dalpha,
            top,
        })
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim
    }

    /// Half of `dim C - 1`.
    pub fn k(&self) -> usize {
        (self.manifold.manifold_dim() - 1) / 2
    }

    pub fn dalpha(&self) -> &KForm {
        &self.dalpha
    }

    /// `|alpha ^ (d alpha)^k|` on an orthonormal tangent frame at `p`.
    pub fn volume_at(&self, p: &[f64]) -> Result<f64> {
        let b = self.manifold.tangent_basis(p)?;
        Ok(self.top.values_at(p)?.max_on_basis(&b))
    }

    /// Solves `i_R d alpha = 0`, `alpha(R) = 1` on the tangent space.
    pub fn reeb_at(&self, p: &[f64]) -> Result<DVector<f64>> {
        let b = self.manifold.tangent_basis(p)?;
        let d = b.ncols();
        let w = self.dalpha.matrix_at(p)?;
        let g = b.transpose() * w * &b;
        let a = b.transpose() * self.alpha.covector_at(p)?;
        let mut sys = DMatrix::zeros(d + 1, d);
        sys.view_mut((0, 0), (d, d)).copy_from(&g.transpose());
        sys.view_mut((d, 0), (1, d)).copy_from(&a.transpose());
        let mut rhs = DVector::zeros(d + 1);
        rhs[d] = 1.0;
        let sigma = linalg::smallest_singular_value(&sys);
        if sigma < CONTACT_TOL {
            return Err(Error::Singular {
                what: "Reeb system".into(),
                sigma,
            });
        }
        let (c, _) = linalg::lstsq(&sys, &rhs);
        Ok(b * c)
    }

    /// `max(|i_R d alpha| on a tangent frame, |alpha(R) - 1|)`.
    pub fn reeb_residual(&self, p: &[f64], r: &DVector<f64>) -> Result<f64> {
        let b = self.manifold.tangent_basis(p)?;
        let w = self.dalpha.matrix_at(p)?;
        let i_r = (r.transpose() * w * &b).amax();
        let norm = (self.alpha.covector_at(p)?.dot(r) - 1.0).abs();
        Ok(i_r.max(norm))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactReport {
    pub min_volume: f64,
    pub worst_point: Vec<f64>,
    pub reeb_residual: f64,
}

impl ContactReport {
    pub fn passes(&self) -> bool {
        self.min_volume >= CONTACT_TOL && self.reeb_residual <= 1e-9
    }
}

pub fn verify_contact(c: &ContactStructure, samples: &[DVector<f64>]) -> Result<ContactReport> {
    let mut rep = ContactReport {
        min_volume: f64::INFINITY,
        worst_point: vec![],
        reeb_residual: 0.0,
    };
    for p in samples {
        let ps = p.as_slice();
        let v = c.volume_at(ps)?;
        if v < rep.min_volume {
            rep.min_volume = v;
            rep.worst_point = ps.to_vec();
        }
        if v >= CONTACT_TOL {
            let r = c.reeb_at(ps)?;
            rep.reeb_residual = rep.reeb_residual.max(c.reeb_residual(ps, &r)?);
        }
    }
    Ok(rep)
}

/// `max |L_{X_a} alpha|` on tangent frames.
pub fn invariance_residual(c: &ContactStructure, act: &GroupAction, samples: &[DVector<f64>]) -> Result<Residual> {
    let lies: Vec<KForm> = act
        .fundamental_fields()
        .iter()
        .map(|x| c.alpha.lie_derivative(x))
        .collect();
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let b = c.manifold.tangent_basis(ps)?;
        let mut worst: f64 = 0.0;
        for l in &lies {
            worst = worst.max((b.transpose() * l.covector_at(ps)?).amax());
        }
        out.record(worst, ps);
    }
    Ok(out)
}

/// `mu_C(x)(a) = alpha_x(X_a)`; rejects actions that do not preserve `alpha`.
pub fn contact_momentum(c: &ContactStructure, act: &GroupAction, samples: &[DVector<f64>]) -> Result<MomentumData> {
    let inv = invariance_residual(c, act, samples)?;
    if inv.max > 1e-9 {
        return Err(Error::Invalid(format!(
            "contact form is not invariant under the action (residual {:.3e})",
            inv.max
        )));
    }
    Ok(MomentumData::new(
        act.fundamental_fields().iter().map(|x| c.alpha.pair(x)).collect(),
    ))
}

/// The angular form on the first two ambient coordinates of `R^dim`.
pub fn angular_form(dim: usize) -> KForm {
    let r2 = Expr::x(0).powi(2) + Expr::x(1).powi(2);
    let mut coeffs = vec![Expr::zero(); dim];
    coeffs[0] = -Expr::x(1) / &r2;
    coeffs[1] = Expr::x(0) / &r2;
    KForm::one_form(coeffs)
}

pub fn circle() -> ConstrainedManifold {
    ConstrainedManifold::new(2, vec![Expr::x(0).powi(2) + Expr::x(1).powi(2) - 1.0])
}

/// `(S^1 x C, omega = d_theta alpha, theta)` with `theta` the angular form.
pub fn lcs_from_contact(c: &ContactStructure) -> Result<LcsStructure> {
    let dim = c.dim() + 2;
    let manifold = circle().product(&c.manifold);
    let theta = angular_form(dim);
    let alpha = c.alpha.shift(2, dim);
    let omega = alpha.twisted_d(&theta);
    LcsStructure::new(manifold, omega, theta)
}

/// `max |(d_theta alpha)^{k+1} + (k+1) theta ^ alpha ^ (d alpha)^k|` on
/// tangent frames of the product.
pub fn bridge_identity_residual(c: &ContactStructure, samples: &[DVector<f64>]) -> Result<Residual> {
    let dim = c.dim() + 2;
    let k = c.k();
    let theta = angular_form(dim);
    let alpha = c.alpha.shift(2, dim);
    let lhs = alpha.twisted_d(&theta).power(k + 1);
    let rhs = theta
        .wedge(&alpha)
        .wedge(&alpha.d().power(k))
        .scale(&Expr::num((k + 1) as f64));
    let defect = lhs.add(&rhs);
    let manifold = circle().product(&c.manifold);
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let b = manifold.tangent_basis(ps)?;
        out.record(defect.values_at(ps)?.max_on_basis(&b), ps);
    }
    Ok(out)
}

/// Extends an action on `C` trivially to `S^1 x C`.
pub fn extend_action(act: &GroupAction, dim_c: usize) -> Result<GroupAction> {
    let dim = dim_c + 2;
    let flows = act
        .flows
        .iter()
        .map(|f| {
            let mut comps = vec![Expr::x(0), Expr::x(1)];
            comps.extend(f.map.comps.iter().map(|e| e.shift_coords(2)));
            Flow::new(DiffeoMap::new(dim, comps), f.cocycle.shift_coords(2))
        })
        .collect();
    GroupAction::new(act.algebra.clone(), flows)
}

/// `mu(t, x) = -mu_C(x)`.
pub fn product_momentum(mu_c: &MomentumData) -> MomentumData {
    MomentumData::new(mu_c.rho.iter().map(|r| -r.shift_coords(2)).collect())
}

/// Point of `S^1 x C` at angle `t` over `p`.
pub fn lift_point(p: &[f64], t: f64) -> DVector<f64> {
    let mut v = vec![t.cos(), t.sin()];
    v.extend_from_slice(p);
    DVector::from_vec(v)
}

/// Tangent vectors of `C` as tangent vectors of `{t} x C`.
pub fn lift_vectors(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows() + 2, m.ncols());
    out.view_mut((2, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

#[derive(Clone, Debug)]
pub struct ContactFoliation {
    /// Orthonormal columns spanning the non-degenerate foliation directions.
    pub basis: DMatrix<f64>,
    /// Number of algebra directions with `X_a - xi(a) R` numerically zero.
    pub degenerate: usize,
}

/// `{X_a - xi(a) R} ∩ T mu_C^-1(xi)` at `p`.
pub fn contact_foliation_basis(
    c: &ContactStructure,
    act: &GroupAction,
    mu_c: &MomentumData,
    xi: &[f64],
    p: &[f64],
) -> Result<ContactFoliation> {
    let r = c.reeb_at(p)?;
    let cols: Vec<DVector<f64>> = act
        .fundamental_fields()
        .iter()
        .zip(xi)
        .map(|(x, xa)| Ok(x.at(p)? - &r * *xa))
        .collect::<Result<_>>()?;
    let degenerate = cols.iter().filter(|v| v.norm() <= DEGENERATE_TOL).count();
    let v = linalg::from_columns(c.dim(), &cols);
    let dmu = mu_c.jacobian_at(p)?;
    let b = c.manifold.tangent_basis(p)?;
    let scale = dmu.norm() * v.norm();
    let (coeffs, _) = linalg::null_space_scaled(&(dmu * &b * b.transpose() * &v), RANK_REL_TOL, scale);
    let (basis, _) = linalg::span(&(v * coeffs), RANK_REL_TOL);
    Ok(ContactFoliation { basis, degenerate })
}

/// Contact quotient witness: a projection and a reduced contact form.
#[derive(Clone, Debug)]
pub struct ContactWitness {
    pub projection: DiffeoMap,
    pub quotient: ConstrainedManifold,
    pub reduced_alpha: KForm,
    pub valid_where: Option<Expr>,
}

impl ContactWitness {
    pub fn reduced(&self) -> Result<ContactStructure> {
        ContactStructure::new(self.quotient.clone(), self.reduced_alpha.clone())
    }

    /// The corresponding LCS witness on `S^1 x C`: identity on the circle
    /// factor, reduced form `d_theta alpha_xi`, zero gauge.
    pub fn lcs_witness(&self) -> Result<QuotientWitness> {
        let red = self.reduced()?;
        let s = lcs_from_contact(&red)?;
        let src = self.projection.src_dim + 2;
        let mut comps = vec![Expr::x(0), Expr::x(1)];
        comps.extend(self.projection.comps.iter().map(|e| e.shift_coords(2)));
        Ok(QuotientWitness {
            projection: DiffeoMap::new(src, comps),
            quotient: s.manifold.clone(),
            reduced_omega: s.omega.clone(),
            reduced_theta: s.theta.clone(),
            gauge: Expr::zero(),
            valid_where: self.valid_where.as_ref().map(|g| g.shift_coords(2)),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactQuotientReport {
    /// `max |alpha(v)|` over foliation vectors.
    pub alpha_on_foliation: f64,
    /// `max |L_v alpha|` on tangent frames of `C`.
    pub lie_on_foliation: f64,
    /// `max |pi^* alpha_xi - alpha|` on level-set tangent vectors.
    pub pullback_residual: f64,
    pub membership: f64,
    pub reduced: ContactReport,
    /// LCS reduction of `S^1 x C` at `-xi` against the lifted witness.
    pub lcs: QuotientReport,
    pub worst_point: Vec<f64>,
}

impl ContactQuotientReport {
    pub fn max(&self) -> f64 {
        self.alpha_on_foliation
            .max(self.lie_on_foliation)
            .max(self.pullback_residual)
            .max(self.membership)
            .max(self.reduced.reeb_residual)
            .max(self.lcs.max())
    }
}

pub fn contact_quotient_verify(
    c: &ContactStructure,
    act: &GroupAction,
    xi: &[f64],
    w: &ContactWitness,
    points: &[DVector<f64>],
) -> Result<ContactQuotientReport> {
    let mu_c = contact_momentum(c, act, points)?;
    let level_eqs: Vec<Expr> = mu_c.rho.iter().zip(xi).map(|(r, x)| r - *x).collect();
    let level = c.manifold.restrict(&level_eqs);
    let dmu: Vec<KForm> = mu_c.rho.iter().map(|r| KForm::exact(c.dim(), r)).collect();
    let mut rep = ContactQuotientReport {
        alpha_on_foliation: 0.0,
        lie_on_foliation: 0.0,
        pullback_residual: 0.0,
        membership: 0.0,
        reduced: ContactReport {
            min_volume: f64::INFINITY,
            worst_point: vec![],
            reeb_residual: 0.0,
        },
        lcs: QuotientReport {
            annihilation: 0.0,
            omega_residual: 0.0,
            theta_residual: 0.0,
            membership: 0.0,
            reduced: Default::default(),
            worst_point: vec![],
        },
        worst_point: vec![],
    };
    let mut worst = -1.0;
    let mut images = Vec::new();
    for p in points {
        let ps = p.as_slice();
        let r = c.reeb_at(ps)?;
        let a = c.alpha.covector_at(ps)?;
        let w_da = c.dalpha.matrix_at(ps)?;
        let b = c.manifold.tangent_basis(ps)?;
        let mut local: f64 = 0.0;
        for ((x, xa), dm) in act.fundamental_fields().iter().zip(xi).zip(&dmu) {
            let v = x.at(ps)? - &r * *xa;
            rep.alpha_on_foliation = rep.alpha_on_foliation.max(a.dot(&v).abs());
            // L_v alpha = i_v d alpha + d(alpha(v)), and alpha(v) = mu_C(a) - xi(a)
            let lie = (v.transpose() * &w_da * &b) + (dm.covector_at(ps)?.transpose() * &b);
            rep.lie_on_foliation = rep.lie_on_foliation.max(lie.amax());
            local = local.max(a.dot(&v).abs()).max(lie.amax());
        }
        let y = w.projection.at(ps)?;
        let jac = w.projection.jacobian_at(ps)?;
        let k = level.tangent_basis(ps)?;
        let pulled = jac.transpose() * w.reduced_alpha.covector_at(y.as_slice())? - &a;
        let pb = (k.transpose() * pulled).amax();
        let member = w.quotient.residual(y.as_slice())?;
        rep.pullback_residual = rep.pullback_residual.max(pb);
        rep.membership = rep.membership.max(member);
        local = local.max(pb).max(member);
        if local > worst {
            worst = local;
            rep.worst_point = ps.to_vec();
        }
        images.push(w.quotient.project(y.as_slice()).map(|pr| pr.point).unwrap_or(y));
    }
    rep.reduced = verify_contact(&w.reduced()?, &images)?;
    let s = lcs_from_contact(c)?;
    let ext = extend_action(act, c.dim())?;
    let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
    let red = Reduction::new(s, ext, product_momentum(&mu_c), neg)?;
    let lifted: Vec<DVector<f64>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| lift_point(p.as_slice(), 0.7 + 2.3 * i as f64))
        .collect();
    rep.lcs = quotient_verify(&red, &w.lcs_witness()?, &lifted)?;
    Ok(rep)
}

/// Principal angle between `(Ker theta)^omega` and `Ker d alpha|_C` lifted
/// to `{t} x C`.
pub fn kernel_duality_angle(s: &LcsStructure, c: &ContactStructure, q: &[f64]) -> Result<f64> {
    let b = s.manifold.tangent_basis(q)?;
    let th = b.transpose() * s.theta.covector_at(q)?;
    let (coeffs, _) = linalg::null_space(&DMatrix::from_row_slice(1, th.len(), th.as_slice()), RANK_REL_TOL);
    let ker_theta = &b * coeffs;
    let (dual, _) = s.omega_dual_subspace(&ker_theta, q)?;
    let p = &q[2..];
    let bc = c.manifold.tangent_basis(p)?;
    let g = bc.transpose() * c.dalpha.matrix_at(p)? * &bc;
    let (kc, _) = linalg::null_space(&g, RANK_REL_TOL);
    let ker_da = lift_vectors(&(bc * kc));
    Ok(linalg::max_principal_angle(&dual, &ker_da, RANK_REL_TOL))
}

/// The standard form `sum (x dy - y dx)` on `R^{2n}` with interleaved
/// complex coordinates.
pub fn standard_alpha(dim: usize) -> KForm {
    let mut coeffs = vec![Expr::zero(); dim];
    for j in 0..dim / 2 {
        coeffs[2 * j] = -Expr::x(2 * j + 1);
        coeffs[2 * j + 1] = Expr::x(2 * j);
    }
    KForm::one_form(coeffs)
}

/// `sum x_i^2 - r^2`.
pub fn sphere(dim: usize, r2: f64) -> ConstrainedManifold {
    ConstrainedManifold::new(dim, vec![Expr::sum((0..dim).map(|i| Expr::x(i).powi(2))) - r2])
}

/// `i q` on interleaved coordinates: the generator of the diagonal circle action.
pub fn diagonal_field(dim: usize) -> VectorField {
    let mut comps = vec![Expr::zero(); dim];
    for j in 0..dim / 2 {
        comps[2 * j] = -Expr::x(2 * j + 1);
        comps[2 * j + 1] = Expr::x(2 * j);
    }
    VectorField::new(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::SampleRng;

    #[test]
    fn sphere_reeb_is_iq() {
        let c = ContactStructure::new(sphere(4, 1.0), standard_alpha(4)).unwrap();
        let mut rng = SampleRng::new(1);
        let pts = c.manifold.sample(&mut rng, 5, 1.0).unwrap();
        let rep = verify_contact(&c, &pts).unwrap();
        assert!(rep.passes());
        let iq = diagonal_field(4);
        for p in &pts {
            let r = c.reeb_at(p.as_slice()).unwrap();
            assert!((r - iq.at(p.as_slice()).unwrap()).amax() < 1e-9);
        }
    }

    #[test]
    fn exact_form_is_not_contact() {
        let alpha = KForm::exact(4, &Expr::parse("x1*x3").unwrap());
        let c = ContactStructure::new(sphere(4, 1.0), alpha).unwrap();
        let mut rng = SampleRng::new(2);
        let pts = c.manifold.sample(&mut rng, 3, 1.0).unwrap();
        assert!(verify_contact(&c, &pts).unwrap().min_volume <= 1e-8);
    }

    #[test]
    fn even_dimension_is_rejected() {
        assert!(ContactStructure::new(ConstrainedManifold::euclidean(4), standard_alpha(4)).is_err());
    }
}
