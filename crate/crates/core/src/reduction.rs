//! Level sets of a twisted momentum map, the characteristic distribution
//! `F = T mu^-1(xi) ∩ (T mu^-1(xi))^omega`, stabilizer algebras, leaf flows,
//! quotient witnesses and parameter sweeps.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::action::{GroupAction, MomentumData, Residual};
use crate::calculus::{eval_matrix, DiffeoMap, KForm};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::flow;
use crate::lcs::{verify_lcs, LcsReport, LcsStructure};
use crate::linalg::{self, RankDecision, RANK_REL_TOL};
use crate::manifold::{gradients, ConstrainedManifold, Projection, SampleRng, REGULARITY_TOL};

/// Step of the five-point stencil used for brackets of pointwise fields.
pub const BRACKET_STEP: f64 = 1e-3;

/// An LCS structure with a twisted Hamiltonian action and a chosen value `xi`.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub structure: LcsStructure,
    pub action: GroupAction,
    pub momentum: MomentumData,
    pub xi: Vec<f64>,
    level: ConstrainedManifold,
    mu_grads: Vec<Vec<Expr>>,
}

impl Reduction {
    pub fn new(structure: LcsStructure, action: GroupAction, momentum: MomentumData, xi: Vec<f64>) -> Result<Self> {
        let k = action.algebra.dim;
        if momentum.rho.len() != k || xi.len() != k {
            return Err(Error::Dimension(format!(
                "algebra has dimension {k}, momentum {} components, xi {}",
                momentum.rho.len(),
                xi.len()
            )));
        }
        let level_eqs: Vec<Expr> = momentum
            .rho
            .iter()
            .zip(&xi)
            .map(|(r, x)| r - *x)
            .collect();
        let level = structure.manifold.restrict(&level_eqs);
        let mu_grads = gradients(structure.dim(), &momentum.rho);
        Ok(Reduction {
            structure,
            action,
            momentum,
            xi,
            level,
            mu_grads,
        })
    }

    pub fn dim(&self) -> usize {
        self.structure.dim()
    }

    /// The level set `mu^-1(xi)` inside the manifold.
    pub fn level(&self) -> &ConstrainedManifold {
        &self.level
    }

    pub fn mu_jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        eval_matrix(&self.mu_grads, p)
    }

    /// Gauss-Newton projection of `seed` onto `mu^-1(xi)`.
    pub fn project_to_level(&self, seed: &[f64]) -> Result<Projection> {
        self.level.project(seed)
    }

    pub fn sample_level<F>(&self, rng: &mut SampleRng, count: usize, radius: f64, keep: F) -> Result<LevelSetSample>
    where
        F: Fn(&[f64]) -> bool,
    {
        let points = self.level.sample_where(rng, count, radius, keep)?;
        Ok(LevelSetSample {
            xi: self.xi.clone(),
            points,
        })
    }

    /// `theta_x(X_a)` for every basis element.
    pub fn theta_on_fields(&self, p: &[f64]) -> Result<Vec<f64>> {
        let th = self.structure.theta.covector_at(p)?;
        self.action
            .fundamental_fields()
            .iter()
            .map(|x| Ok(th.dot(&x.at(p)?)))
            .collect()
    }

    /// Kernel of `a -> (b -> -xi([a,b]) + xi(b) theta(X_a) - xi(a) theta(X_b))`.
    pub fn stabilizer(&self, p: &[f64]) -> Result<(DMatrix<f64>, RankDecision)> {
        let alg = &self.action.algebra;
        let k = alg.dim;
        let th = self.theta_on_fields(p)?;
        let xi = &self.xi;
        let l = DMatrix::from_fn(k, k, |b, a| {
            let coad: f64 = (0..k).map(|m| alg.structure[a][b][m] * xi[m]).sum();
            -coad + xi[b] * th[a] - xi[a] * th[b]
        });
        let xi_norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let th_norm = th.iter().map(|x| x * x).sum::<f64>().sqrt();
        let c_norm = alg.structure.iter().flatten().flatten().fold(0.0, |m: f64, c| m.max(c.abs()));
        Ok(linalg::null_space_scaled(&l, RANK_REL_TOL, xi_norm * (c_norm + th_norm)))
    }

    /// `psi(a) = X_a + xi(a) theta^omega` at `p`; defined off the manifold too,
    /// as long as the constraint Jacobian stays regular.
    pub fn psi_at(&self, a: &[f64], p: &[f64]) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.dim());
        for (ai, x) in a.iter().zip(self.action.fundamental_fields()) {
            if *ai != 0.0 {
                v += x.at(p)? * *ai;
            }
        }
        let xa: f64 = a.iter().zip(&self.xi).map(|(ai, xi)| ai * xi).sum();
        if xa != 0.0 {
            v += self.structure.anti_lee_at(p)? * xa;
        }
        Ok(v)
    }

    /// `F_p` computed two ways: as `K ∩ K^omega` with `K = Ker d mu_p`, and as
    /// the span of `psi(g_xi)`.
    pub fn characteristic_basis(&self, p: &[f64]) -> Result<CharacteristicBasis> {
        let k = self.level.tangent_basis(p)?;
        let w = self.structure.omega.matrix_at(p)?;
        let gram = k.transpose() * &w * &k;
        let (c, dec) = linalg::null_space_scaled(&gram, RANK_REL_TOL, w.norm());
        let basis = &k * c;
        let (stab, stab_dec) = self.stabilizer(p)?;
        let cols: Vec<DVector<f64>> = stab
            .column_iter()
            .map(|a| self.psi_at(a.as_slice(), p))
            .collect::<Result<_>>()?;
        let psi = linalg::from_columns(self.dim(), &cols);
        let (psi_span, psi_dec) = linalg::span(&psi, RANK_REL_TOL);
        let angle = linalg::max_principal_angle(&basis, &psi_span, RANK_REL_TOL);
        Ok(CharacteristicBasis {
            point: p.to_vec(),
            rank: basis.ncols(),
            psi_rank: psi_dec.rank,
            stabilizer_dim: stab.ncols(),
            stabilizer: stab,
            angle,
            ambiguous: dec.ambiguous || psi_dec.ambiguous || stab_dec.ambiguous,
            basis,
            psi_span,
        })
    }

    /// Minimum over points of the smallest singular value of `d mu` on tangent spaces.
    pub fn regularity_check(&self, points: &[DVector<f64>]) -> Result<RegularityReport> {
        let mut out = RegularityReport {
            sigma_min: f64::INFINITY,
            point: vec![],
            regular: true,
        };
        for p in points {
            let ps = p.as_slice();
            let b = self.structure.manifold.tangent_basis(ps)?;
            let m = self.mu_jacobian(ps)? * b;
            let sv = linalg::singular_values(&m);
            let s = if sv.len() < m.nrows() {
                0.0
            } else {
                sv.iter().cloned().fold(f64::INFINITY, f64::min)
            };
            if s < out.sigma_min {
                out.sigma_min = s;
                out.point = ps.to_vec();
            }
        }
        out.regular = out.sigma_min >= REGULARITY_TOL;
        Ok(out)
    }

    /// `max |xi(a) theta(X_b) - xi(b) theta(X_a)|` over basis pairs.
    pub fn obstruction_check(&self, points: &[DVector<f64>]) -> Result<Residual> {
        let mut out = Residual::new();
        let k = self.action.algebra.dim;
        for p in points {
            let th = self.theta_on_fields(p.as_slice())?;
            let mut worst: f64 = 0.0;
            for a in 0..k {
                for b in 0..k {
                    worst = worst.max((self.xi[a] * th[b] - self.xi[b] * th[a]).abs());
                }
            }
            out.record(worst, p.as_slice());
        }
        Ok(out)
    }

    pub fn rank_scan(&self, points: &[DVector<f64>]) -> Result<RankScan> {
        let mut scan = RankScan::default();
        for p in points {
            let cb = self.characteristic_basis(p.as_slice())?;
            *scan.ranks.entry(cb.rank).or_default() += 1;
            *scan.stabilizer_dims.entry(cb.stabilizer_dim).or_default() += 1;
            if cb.ambiguous {
                scan.ambiguous += 1;
            }
            if cb.rank != cb.stabilizer_dim {
                scan.mismatches += 1;
            }
        }
        Ok(scan)
    }

    /// RK4 along `psi(a)` with re-projection onto the level set after every step.
    pub fn leaf_flow(&self, p: &DVector<f64>, a: &[f64], time: f64, steps: usize) -> Result<LeafPath> {
        let mut path = LeafPath {
            points: vec![p.clone()],
            max_drift: 0.0,
            max_mu_deviation: 0.0,
        };
        if a.iter().all(|&v| v == 0.0) {
            return Ok(path);
        }
        let field = |x: &DVector<f64>| self.psi_at(a, x.as_slice());
        let mu0 = self.momentum.at(p.as_slice())?;
        let mut x = p.clone();
        let mut h = time / steps.max(1) as f64;
        let mut done = 0.0;
        let mut halvings = 0;
        while (time - done).abs() > 1e-14 * time.abs().max(1.0) {
            if (done + h - time) * time.signum() > 0.0 {
                h = time - done;
            }
            let trial = flow::rk4(field, &x, h, 1).and_then(|y| {
                let drift = self.level.residual(y.as_slice())?;
                let proj = self.level.project(y.as_slice())?;
                Ok((proj.point, drift))
            });
            match trial {
                Ok((y, drift)) => {
                    let dev = (self.momentum.at(y.as_slice())? - &mu0).amax();
                    path.max_drift = path.max_drift.max(drift);
                    path.max_mu_deviation = path.max_mu_deviation.max(dev);
                    x = y;
                    done += h;
                    path.points.push(x.clone());
                }
                Err(e) => {
                    halvings += 1;
                    if halvings > 8 {
                        return Err(e);
                    }
                    h /= 2.0;
                }
            }
        }
        Ok(path)
    }

    /// `[psi(a), psi(b)] + X_[a,b]` by a five-point stencil along the
    /// fields, and `xi([a,b])`, over stabilizer pairs.
    pub fn algebra_identities_check(&self, points: &[DVector<f64>]) -> Result<AlgebraReport> {
        let mut bracket = Residual::new();
        let mut xi_bracket: f64 = 0.0;
        let alg = &self.action.algebra;
        for p in points {
            let ps = p.as_slice();
            let (stab, _) = self.stabilizer(ps)?;
            let basis: Vec<Vec<f64>> = stab.column_iter().map(|c| c.as_slice().to_vec()).collect();
            let mut worst: f64 = 0.0;
            for (i, a) in basis.iter().enumerate() {
                for b in &basis[i..] {
                    let ab = alg.bracket(a, b);
                    let xb: f64 = ab.iter().zip(&self.xi).map(|(c, x)| c * x).sum();
                    xi_bracket = xi_bracket.max(xb.abs());
                    let va = self.psi_at(a, ps)?;
                    let vb = self.psi_at(b, ps)?;
                    let db_va = self.directional(b, p, &va)?;
                    let da_vb = self.directional(a, p, &vb)?;
                    let lhs = db_va - da_vb;
                    let rhs = self.action.field_of(&ab).at(ps)?;
                    worst = worst.max((lhs + rhs).amax());
                }
            }
            bracket.record(worst, ps);
        }
        Ok(AlgebraReport {
            bracket_residual: bracket.max,
            xi_bracket_residual: xi_bracket,
            worst_point: bracket.worst_point,
        })
    }

    /// `D psi(a) . v` at `p` by a five-point stencil.
    fn directional(&self, a: &[f64], p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.dim();
        let scale = v.norm();
        if scale == 0.0 {
            return Ok(DVector::zeros(n));
        }
        let u = v / scale;
        let h = BRACKET_STEP * (1.0 + p.norm());
        let at = |s: f64| self.psi_at(a, (p + &u * s).as_slice());
        let out = (at(-2.0 * h)? - at(-h)? * 8.0 + at(h)? * 8.0 - at(2.0 * h)?) / (12.0 * h);
        Ok(out * scale)
    }
}

#[derive(Clone, Debug)]
pub struct LevelSetSample {
    pub xi: Vec<f64>,
    pub points: Vec<DVector<f64>>,
}

#[derive(Clone, Debug)]
pub struct CharacteristicBasis {
    pub point: Vec<f64>,
    /// Orthonormal columns spanning `K ∩ K^omega`.
    pub basis: DMatrix<f64>,
    /// Orthonormal columns spanning `psi(g_xi)`.
    pub psi_span: DMatrix<f64>,
    pub stabilizer: DMatrix<f64>,
    pub rank: usize,
    pub psi_rank: usize,
    pub stabilizer_dim: usize,
    pub angle: f64,
    pub ambiguous: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub sigma_min: f64,
    pub point: Vec<f64>,
    pub regular: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankScan {
    pub ranks: BTreeMap<usize, usize>,
    pub stabilizer_dims: BTreeMap<usize, usize>,
    pub ambiguous: usize,
    /// Points where the rank differs from `dim g_xi`.
    pub mismatches: usize,
}

impl RankScan {
    pub fn constant(&self) -> bool {
        self.ranks.len() <= 1 && self.stabilizer_dims.len() <= 1
    }

    pub fn rank(&self) -> Option<usize> {
        if self.ranks.len() == 1 {
            self.ranks.keys().next().copied()
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct LeafPath {
    pub points: Vec<DVector<f64>>,
    /// Largest constraint residual before re-projection.
    pub max_drift: f64,
    pub max_mu_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraReport {
    pub bracket_residual: f64,
    pub xi_bracket_residual: f64,
    pub worst_point: Vec<f64>,
}

/// Supplied description of a reduced space, verified rather than built.
#[derive(Clone, Debug)]
pub struct QuotientWitness {
    /// From the ambient space of the level set to the quotient's ambient space.
    pub projection: DiffeoMap,
    pub quotient: ConstrainedManifold,
    pub reduced_omega: KForm,
    pub reduced_theta: KForm,
    /// `f` with `pi^* omega_xi = e^f omega` on the level set.
    pub gauge: Expr,
    /// Sample only where this expression is positive (chart domains).
    pub valid_where: Option<Expr>,
}

impl QuotientWitness {
    pub fn is_valid_at(&self, p: &[f64]) -> bool {
        match &self.valid_where {
            Some(g) => g.eval(p).map(|v| v > 0.0).unwrap_or(false),
            None => true,
        }
    }

    pub fn reduced_structure(&self) -> Result<LcsStructure> {
        LcsStructure::new(self.quotient.clone(), self.reduced_omega.clone(), self.reduced_theta.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuotientReport {
    /// `max |pi_* v|` over characteristic directions.
    pub annihilation: f64,
    /// `max |pi^* omega_xi - e^f omega|` on level-set tangent pairs.
    pub omega_residual: f64,
    /// `max |pi^* theta_xi - theta - df|` on level-set tangent vectors.
    pub theta_residual: f64,
    /// Constraint residual of `pi(p)` on the quotient.
    pub membership: f64,
    pub reduced: LcsReport,
    pub worst_point: Vec<f64>,
}

impl QuotientReport {
    pub fn max(&self) -> f64 {
        self.annihilation
            .max(self.omega_residual)
            .max(self.theta_residual)
            .max(self.membership)
            .max(self.reduced.lcs_residual)
            .max(self.reduced.closedness_residual)
    }
}

pub fn quotient_verify(r: &Reduction, w: &QuotientWitness, points: &[DVector<f64>]) -> Result<QuotientReport> {
    let s = &r.structure;
    let dim = s.dim();
    let df = KForm::exact(dim, &w.gauge);
    let mut rep = QuotientReport {
        annihilation: 0.0,
        omega_residual: 0.0,
        theta_residual: 0.0,
        membership: 0.0,
        reduced: LcsReport::default(),
        worst_point: vec![],
    };
    let mut worst = -1.0;
    let mut images = Vec::with_capacity(points.len());
    for p in points {
        let ps = p.as_slice();
        let y = w.projection.at(ps)?;
        let ys = y.as_slice();
        let jac = w.projection.jacobian_at(ps)?;
        let cb = r.characteristic_basis(ps)?;
        let ann = (&jac * &cb.basis).amax();
        let k = r.level().tangent_basis(ps)?;
        let cols: Vec<DVector<f64>> = k.column_iter().map(|c| c.into_owned()).collect();
        let pushed: Vec<DVector<f64>> = cols.iter().map(|c| &jac * c).collect();
        let red = w.reduced_omega.values_at(ys)?;
        let om = s.omega.values_at(ps)?;
        let ef = w.gauge.eval(ps)?.exp();
        let mut om_res: f64 = 0.0;
        for i in 0..cols.len() {
            for j in (i + 1)..cols.len() {
                let lhs = red.eval(&[pushed[i].clone(), pushed[j].clone()]);
                let rhs = ef * om.eval(&[cols[i].clone(), cols[j].clone()]);
                om_res = om_res.max((lhs - rhs).abs());
            }
        }
        let lee = jac.transpose() * w.reduced_theta.covector_at(ys)?
            - s.theta.covector_at(ps)?
            - df.covector_at(ps)?;
        let th_res = linalg::max_abs((k.transpose() * lee).as_slice());
        let member = w.quotient.residual(ys)?;
        rep.annihilation = rep.annihilation.max(ann);
        rep.omega_residual = rep.omega_residual.max(om_res);
        rep.theta_residual = rep.theta_residual.max(th_res);
        rep.membership = rep.membership.max(member);
        let local = ann.max(om_res).max(th_res).max(member);
        if local > worst {
            worst = local;
            rep.worst_point = ps.to_vec();
        }
        images.push(w.quotient.project(ys).map(|pr| pr.point).unwrap_or(y));
    }
    rep.reduced = verify_lcs(&w.reduced_structure()?, &images)?;
    Ok(rep)
}

/// One step of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepStep {
    pub parameter: f64,
    pub sigma_min: f64,
    pub rank: Option<usize>,
    pub stabilizer_dim: Option<usize>,
    pub max_angle: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub steps: Vec<SweepStep>,
    pub constant_rank: bool,
    pub constant_stabilizer: bool,
}

impl SweepReport {
    pub fn passes(&self) -> bool {
        self.constant_rank
            && self.constant_stabilizer
            && self.steps.iter().all(|s| s.sigma_min >= REGULARITY_TOL)
    }
}

/// Runs regularity and rank scans along a discrete path of reductions.
/// A step whose level set cannot be sampled or is not regular rejects the
/// sweep with [`Error::NonRegular`] naming the parameter.
pub fn sweep<I>(path: I, seed: u64, count: usize, radius: f64) -> Result<SweepReport>
where
    I: IntoIterator<Item = (f64, Reduction)>,
{
    let mut steps = Vec::new();
    for (i, (param, r)) in path.into_iter().enumerate() {
        let mut rng = SampleRng::derive(seed, &format!("sweep/{i}"));
        let sample = match r.sample_level(&mut rng, count, radius, |_| true) {
            Ok(s) => s,
            Err(Error::RankDeficient { sigma }) | Err(Error::NonConvergence { residual: sigma, .. }) => {
                return Err(Error::NonRegular {
                    parameter: format!("{param}"),
                    sigma,
                })
            }
            Err(e) => return Err(e),
        };
        let reg = r.regularity_check(&sample.points)?;
        if !reg.regular {
            return Err(Error::NonRegular {
                parameter: format!("{param}"),
                sigma: reg.sigma_min,
            });
        }
        let scan = r.rank_scan(&sample.points)?;
        let mut max_angle: f64 = 0.0;
        for p in &sample.points {
            max_angle = max_angle.max(r.characteristic_basis(p.as_slice())?.angle);
        }
        steps.push(SweepStep {
            parameter: param,
            sigma_min: reg.sigma_min,
            rank: scan.rank(),
            stabilizer_dim: if scan.stabilizer_dims.len() == 1 {
                scan.stabilizer_dims.keys().next().copied()
            } else {
                None
            },
            max_angle,
        });
    }
    let constant = |f: &dyn Fn(&SweepStep) -> Option<usize>| {
        let first = steps.first().and_then(f);
        first.is_some() && steps.iter().all(|s| f(s) == first)
    };
    let constant_rank = steps.is_empty() || constant(&|s| s.rank);
    let constant_stabilizer = steps.is_empty() || constant(&|s| s.stabilizer_dim);
    Ok(SweepReport {
        steps,
        constant_rank,
        constant_stabilizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{Flow, LieAlgebra};

    fn cn_standard(xi: f64) -> Reduction {
        let omega = KForm::from_terms(
            4,
            2,
            vec![(vec![0, 1], Expr::num(-2.0)), (vec![2, 3], Expr::num(-2.0))],
        );
        let s = LcsStructure::new(ConstrainedManifold::euclidean(4), omega, KForm::zero(4, 1)).unwrap();
        let rot = DiffeoMap::new(
            4,
            ["cos(t)*x1 - sin(t)*x2", "sin(t)*x1 + cos(t)*x2", "cos(t)*x3 - sin(t)*x4", "sin(t)*x3 + cos(t)*x4"]
                .iter()
                .map(|c| Expr::parse(c).unwrap())
                .collect(),
        );
        let act = GroupAction::new(LieAlgebra::circle(), vec![Flow::new(rot, Expr::zero())]).unwrap();
        let m = MomentumData::new(vec![Expr::parse("x1^2 + x2^2 + x3^2 + x4^2").unwrap()]);
        Reduction::new(s, act, m, vec![xi]).unwrap()
    }

    #[test]
    fn unit_level_is_regular_with_orbit_foliation() {
        let r = cn_standard(1.0);
        let mut rng = SampleRng::new(3);
        let pts = r.sample_level(&mut rng, 5, 1.0, |_| true).unwrap().points;
        let reg = r.regularity_check(&pts).unwrap();
        assert!((reg.sigma_min - 2.0).abs() < 1e-9);
        let scan = r.rank_scan(&pts).unwrap();
        assert_eq!(scan.rank(), Some(1));
        assert_eq!(scan.mismatches, 0);
        for p in &pts {
            assert!(r.characteristic_basis(p.as_slice()).unwrap().angle < 1e-8);
        }
    }

    #[test]
    fn zero_level_is_rejected() {
        let r = cn_standard(0.0);
        assert!(matches!(r.project_to_level(&[0.3, 0.1, -0.2, 0.4]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn orbit_leaf_closes() {
        let r = cn_standard(1.0);
        let p = r.project_to_level(&[0.5, 0.1, -0.3, 0.7]).unwrap().point;
        let path = r.leaf_flow(&p, &[1.0], 2.0 * std::f64::consts::PI, 600).unwrap();
        assert!((path.points.last().unwrap() - &p).amax() < 1e-6);
        assert!(path.max_mu_deviation < 1e-8);
    }
}
