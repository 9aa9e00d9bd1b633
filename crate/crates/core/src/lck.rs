//! Almost complex structures and metrics as ambient matrix fields, LCK
//! compatibility, Nijenhuis tensors, holomorphic and Killing fields, and the
//! pointwise ingredients of LCK reduction.

use nalgebra::{DMatrix, DVector};

use crate::action::Residual;
use crate::calculus::{eval_matrix, VectorField};
use crate::contact::{angular_form, lcs_from_contact, ContactStructure};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::lcs::LcsStructure;
use crate::linalg::{self, RANK_REL_TOL};
use crate::manifold::ConstrainedManifold;
use crate::reduction::Reduction;

/// Step of the five-point stencils used on pointwise fields.
pub const FD_STEP: f64 = 1e-3;

/// An `N x N` matrix of expressions acting on ambient vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    pub dim: usize,
    pub entries: Vec<Vec<Expr>>,
}

impl MatrixField {
    pub fn new(entries: Vec<Vec<Expr>>) -> Result<Self> {
        let dim = entries.len();
        if entries.iter().any(|r| r.len() != dim) {
            return Err(Error::Dimension("matrix field must be square".into()));
        }
        Ok(MatrixField { dim, entries })
    }

    pub fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let dim = rows.len();
        let entries = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|e| Expr::parse_in(e, dim).map_err(Error::from))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        MatrixField::new(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MatrixField {
            dim,
            entries: vec![vec![Expr::zero(); dim]; dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Expr) -> Self {
        MatrixField {
            dim,
            entries: (0..dim).map(|i| (0..dim).map(|j| f(i, j)).collect()).collect(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        MatrixField::from_fn(dim, |i, j| if i == j { Expr::one() } else { Expr::zero() })
    }

    /// `u a^T` for a column of expressions `u` and a row `a`.
    pub fn outer(u: &[Expr], a: &[Expr]) -> Self {
        MatrixField::from_fn(u.len(), |i, j| &u[i] * &a[j])
    }

    pub fn add(&self, other: &MatrixField) -> Self {
        MatrixField::from_fn(self.dim, |i, j| &self.entries[i][j] + &other.entries[i][j])
    }

    pub fn scale(&self, f: &Expr) -> Self {
        MatrixField::from_fn(self.dim, |i, j| f * &self.entries[i][j])
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|e| e.to_string()).collect())
            .collect()
    }

    pub fn at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        eval_matrix(&self.entries, p)
    }

    pub fn column(&self, j: usize) -> VectorField {
        VectorField::new(self.entries.iter().map(|r| r[j].clone()).collect())
    }

    /// Symbolic `J X`.
    pub fn apply(&self, x: &VectorField) -> VectorField {
        VectorField::new(
            self.entries
                .iter()
                .map(|r| Expr::sum(r.iter().zip(&x.comps).map(|(a, b)| a * b)))
                .collect(),
        )
    }

    /// Column-wise `(L_X J) e_j = [X, J e_j] + J (d X / d x_j)`.
    pub fn lie_derivative(&self, x: &VectorField) -> MatrixField {
        let n = self.dim;
        let mut out = MatrixField::zero(n);
        for j in 0..n {
            let col = x.bracket(&self.column(j));
            let dxj = VectorField::new(x.comps.iter().map(|c| c.diff(Var::Coord(j))).collect());
            let fix = self.apply(&dxj);
            for i in 0..n {
                out.entries[i][j] = &col.comps[i] + &fix.comps[i];
            }
        }
        out
    }

    /// `d J / d x_k` for every `k`.
    pub fn partials(&self) -> Vec<MatrixField> {
        (0..self.dim)
            .map(|k| MatrixField::from_fn(self.dim, |i, j| self.entries[i][j].diff(Var::Coord(k))))
            .collect()
    }

    /// Block embedding into `R^dim` starting at `offset`.
    pub fn shift(&self, offset: usize, dim: usize) -> MatrixField {
        let mut out = MatrixField::zero(dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.entries[i + offset][j + offset] = self.entries[i][j].shift_coords(offset);
            }
        }
        out
    }
}

fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter().map(|c| c.into_owned()).collect()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LckReport {
    /// `max |omega(u, J v) - g(u, v)|`.
    pub compatibility: f64,
    /// `max |g(J u, J v) - g(u, v)|`.
    pub invariance: f64,
    /// `max |J^2 u + u|`.
    pub square: f64,
    /// Normal component of `J u`.
    pub tangency: f64,
    /// Smallest eigenvalue of `g` on tangent frames.
    pub min_eigenvalue: f64,
    pub worst_point: Vec<f64>,
}

impl LckReport {
    pub fn max(&self) -> f64 {
        self.compatibility
            .max(self.invariance)
            .max(self.square)
            .max(self.tangency)
    }
}

pub fn lck_check(s: &LcsStructure, j: &MatrixField, g: &MatrixField, samples: &[DVector<f64>]) -> Result<LckReport> {
    let mut rep = LckReport {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let mut worst = -1.0;
    for p in samples {
        let ps = p.as_slice();
        let b = s.manifold.tangent_basis(ps)?;
        let w = s.omega.matrix_at(ps)?;
        let jm = j.at(ps)?;
        let gm = g.at(ps)?;
        let jb = &jm * &b;
        let compat = (b.transpose() * &w * &jb - b.transpose() * &gm * &b).amax();
        let inv = (jb.transpose() * &gm * &jb - b.transpose() * &gm * &b).amax();
        let sq = (&jm * &jb + &b).amax();
        let tang = (&jb - &b * (b.transpose() * &jb)).amax();
        let gt = b.transpose() * &gm * &b;
        let gt = (&gt + gt.transpose()) * 0.5;
        let ev = gt.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        rep.compatibility = rep.compatibility.max(compat);
        rep.invariance = rep.invariance.max(inv);
        rep.square = rep.square.max(sq);
        rep.tangency = rep.tangency.max(tang);
        rep.min_eigenvalue = rep.min_eigenvalue.min(ev);
        let local = compat.max(inv).max(sq).max(tang);
        if local > worst {
            worst = local;
            rep.worst_point = ps.to_vec();
        }
    }
    Ok(rep)
}

/// Solves `g(v, .) = a` on the tangent space of `m` at `p`.
pub fn metric_dual(m: &ConstrainedManifold, g: &DMatrix<f64>, a: &DVector<f64>, p: &[f64]) -> Result<DVector<f64>> {
    let b = m.tangent_basis(p)?;
    let gt = b.transpose() * g * &b;
    let c = gt
        .lu()
        .solve(&(b.transpose() * a))
        .ok_or_else(|| Error::Singular {
            what: "metric on the tangent space".into(),
            sigma: 0.0,
        })?;
    Ok(b * c)
}

/// `theta^#` at `p`.
pub fn lee_at(s: &LcsStructure, g: &MatrixField, p: &[f64]) -> Result<DVector<f64>> {
    metric_dual(&s.manifold, &g.at(p)?, &s.theta.covector_at(p)?, p)
}

/// `max |J theta^# + theta^omega|`, the Lee relation for `g = omega(., J .)`
/// and `i_{theta^omega} omega = theta`.
pub fn lee_relation_check(s: &LcsStructure, j: &MatrixField, g: &MatrixField, samples: &[DVector<f64>]) -> Result<Residual> {
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let sharp = lee_at(s, g, ps)?;
        let lhs = j.at(ps)? * sharp;
        out.record((lhs + s.anti_lee_at(ps)?).amax(), ps);
    }
    Ok(out)
}

/// Nijenhuis tensor of the ambient `J` on two vectors at `p`:
/// `N(u,v) = [Ju,Jv] - J[Ju,v] - J[u,Jv] - [u,v]` for constant extensions.
pub fn nijenhuis_at(jm: &DMatrix<f64>, partials: &[DMatrix<f64>], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    // D_w J as a matrix, for an ambient direction w
    let dj = |w: &DVector<f64>| {
        let mut m = DMatrix::zeros(jm.nrows(), jm.ncols());
        for (k, pk) in partials.iter().enumerate() {
            if w[k] != 0.0 {
                m += pk * w[k];
            }
        }
        m
    };
    let ju = jm * u;
    let jv = jm * v;
    let br_jj = dj(&ju) * v - dj(&jv) * u;
    let br_ju_v = -(dj(v) * u);
    let br_u_jv = dj(u) * v;
    br_jj - jm * br_ju_v - jm * br_u_jv
}

/// `max |N_J|` on pairs from an orthonormal tangent frame.
pub fn nijenhuis_residual(m: &ConstrainedManifold, j: &MatrixField, samples: &[DVector<f64>]) -> Result<Residual> {
    let partials = j.partials();
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let jm = j.at(ps)?;
        let pm: Vec<DMatrix<f64>> = partials.iter().map(|q| q.at(ps)).collect::<Result<_>>()?;
        let cols = columns(&m.tangent_basis(ps)?);
        let mut worst: f64 = 0.0;
        for a in 0..cols.len() {
            for b in (a + 1)..cols.len() {
                worst = worst.max(nijenhuis_at(&jm, &pm, &cols[a], &cols[b]).amax());
            }
        }
        out.record(worst, ps);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HolomorphicReport {
    /// `max |(L_X J) u|` from the symbolic column formula.
    pub algebraic: f64,
    /// The same quantity from `d/dt (D phi_t)^-1 J(phi_t) D phi_t` at `t = 0`.
    pub flow: f64,
    /// `max` difference between the two evaluations.
    pub disagreement: f64,
    pub worst_point: Vec<f64>,
}

/// `L_X J` on tangent frames, computed two independent ways.
pub fn holomorphic_check(
    m: &ConstrainedManifold,
    j: &MatrixField,
    x: &VectorField,
    samples: &[DVector<f64>],
) -> Result<HolomorphicReport> {
    let lie = j.lie_derivative(x);
    let h = 1e-2;
    let mut rep = HolomorphicReport {
        algebraic: 0.0,
        flow: 0.0,
        disagreement: 0.0,
        worst_point: vec![],
    };
    let mut worst = -1.0;
    for p in samples {
        let ps = p.as_slice();
        let b = m.tangent_basis(ps)?;
        let alg = lie.at(ps)? * &b;
        let conj = |t: f64| -> Result<DMatrix<f64>> {
            let steps = ((t.abs() / 1e-3).round() as usize).max(1);
            let (q, d) = x.flow(ps, t, steps)?;
            let dinv = d.clone().try_inverse().ok_or_else(|| Error::Singular {
                what: "flow Jacobian".into(),
                sigma: 0.0,
            })?;
            Ok(dinv * j.at(q.as_slice())? * d)
        };
        let fd = (conj(-2.0 * h)? - conj(-h)? * 8.0 + conj(h)? * 8.0 - conj(2.0 * h)?) / (12.0 * h);
        let fl = fd * &b;
        let a = alg.amax();
        let f = fl.amax();
        let dis = (&alg - &fl).amax();
        rep.algebraic = rep.algebraic.max(a);
        rep.flow = rep.flow.max(f);
        rep.disagreement = rep.disagreement.max(dis);
        if a > worst {
            worst = a;
            rep.worst_point = ps.to_vec();
        }
    }
    Ok(rep)
}

/// A vector field known only pointwise, e.g. an `omega`-dual.
pub type PointwiseField<'a> = dyn Fn(&[f64]) -> Result<DVector<f64>> + 'a;

/// `D X (p) . v` by a five-point stencil.
pub fn directional_derivative(x: &PointwiseField, p: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = v.norm();
    if scale == 0.0 {
        return Ok(DVector::zeros(p.len()));
    }
    let u = v / scale;
    let h = FD_STEP * (1.0 + p.norm());
    let at = |s: f64| x((p + &u * s).as_slice());
    Ok((at(-2.0 * h)? - at(-h)? * 8.0 + at(h)? * 8.0 - at(2.0 * h)?) / (12.0 * h) * scale)
}

/// Directional derivative of a matrix field along `v`.
fn matrix_derivative(j: &MatrixField, p: &DVector<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let scale = v.norm();
    if scale == 0.0 {
        return Ok(DMatrix::zeros(j.dim, j.dim));
    }
    let u = v / scale;
    let h = FD_STEP * (1.0 + p.norm());
    let at = |s: f64| j.at((p + &u * s).as_slice());
    Ok((at(-2.0 * h)? - at(-h)? * 8.0 + at(h)? * 8.0 - at(2.0 * h)?) / (12.0 * h) * scale)
}

/// `max |(L_X J) u|` for a pointwise field, on tangent frames.
pub fn holomorphic_residual_pointwise(
    m: &ConstrainedManifold,
    j: &MatrixField,
    x: &PointwiseField,
    samples: &[DVector<f64>],
) -> Result<Residual> {
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let jm = j.at(ps)?;
        let djx = matrix_derivative(j, p, &x(ps)?)?;
        let mut worst: f64 = 0.0;
        for u in columns(&m.tangent_basis(ps)?) {
            worst = worst.max(lie_j_on(x, p, &jm, &djx, &u)?.amax());
        }
        out.record(worst, ps);
    }
    Ok(out)
}

/// `(L_X J) u = (D_X J) u - D_{J u} X + J D_u X`, given `D_X J` as `djx`.
fn lie_j_on(x: &PointwiseField, p: &DVector<f64>, jm: &DMatrix<f64>, djx: &DMatrix<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    let ju = jm * u;
    Ok(djx * u - directional_derivative(x, p, &ju)? + jm * directional_derivative(x, p, u)?)
}

/// Killing residual `max |(L_X g)(u, v)|` on tangent frames for a pointwise field.
pub fn killing_residual(
    m: &ConstrainedManifold,
    g: &MatrixField,
    x: &PointwiseField,
    samples: &[DVector<f64>],
) -> Result<Residual> {
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let xv = x(ps)?;
        let gm = g.at(ps)?;
        let dg = matrix_derivative(g, p, &xv)?;
        let b = m.tangent_basis(ps)?;
        let dxb: Vec<DVector<f64>> = columns(&b)
            .iter()
            .map(|u| directional_derivative(x, p, u))
            .collect::<Result<_>>()?;
        let dxb = linalg::from_columns(p.len(), &dxb);
        let lie = b.transpose() * dg * &b + dxb.transpose() * &gm * &b + b.transpose() * &gm * &dxb;
        out.record(lie.amax(), ps);
    }
    Ok(out)
}

/// Killing residual of the Lee field `theta^#`.
pub fn vaisman_check(s: &LcsStructure, g: &MatrixField, samples: &[DVector<f64>]) -> Result<Residual> {
    let sharp = |q: &[f64]| lee_at(s, g, q);
    killing_residual(&s.manifold, g, &sharp, samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SasakiReport {
    /// `max |J^2 + I|` for `J = Omega^-1 G` on tangent frames.
    pub square: f64,
    /// `max |g(J., J.) - g|`.
    pub invariance: f64,
    /// Killing residual of the Lee field `theta^#`.
    pub lee_killing: f64,
    /// Killing residual of the anti-Lee field `theta^omega` (the Reeb field).
    pub reeb_killing: f64,
    pub min_eigenvalue: f64,
    pub worst_point: Vec<f64>,
}

impl SasakiReport {
    pub fn max(&self) -> f64 {
        self.square
            .max(self.invariance)
            .max(self.lee_killing)
            .max(self.reeb_killing)
    }
}

/// Product metric `theta (x) theta + g_C` on `S^1 x C`.
pub fn product_metric(g_c: &MatrixField) -> MatrixField {
    let dim = g_c.dim + 2;
    let theta = angular_form(dim);
    let row: Vec<Expr> = (0..dim).map(|i| theta.coefficient(&[i])).collect();
    MatrixField::outer(&row, &row).add(&g_c.shift(2, dim))
}

/// Builds `S^1 x C` with `omega = d_theta alpha` and the product metric, recovers
/// `J` pointwise from `omega(., J .) = g`, and checks that `J` is an
/// orthogonal almost complex structure with Killing Lee and anti-Lee fields.
pub fn sasaki_check(c: &ContactStructure, g_c: &MatrixField, samples_c: &[DVector<f64>]) -> Result<SasakiReport> {
    let s = lcs_from_contact(c)?;
    let g = product_metric(g_c);
    let samples: Vec<DVector<f64>> = samples_c
        .iter()
        .enumerate()
        .map(|(i, p)| crate::contact::lift_point(p.as_slice(), 0.3 + 1.7 * i as f64))
        .collect();
    let mut rep = SasakiReport {
        square: 0.0,
        invariance: 0.0,
        lee_killing: 0.0,
        reeb_killing: 0.0,
        min_eigenvalue: f64::INFINITY,
        worst_point: vec![],
    };
    let mut worst = -1.0;
    for p in &samples {
        let ps = p.as_slice();
        let b = s.manifold.tangent_basis(ps)?;
        let om = s.tangent_gram(ps, &b)?;
        let gm = b.transpose() * g.at(ps)? * &b;
        let jt = om.clone().lu().solve(&gm).ok_or_else(|| Error::Singular {
            what: "omega on the tangent space".into(),
            sigma: 0.0,
        })?;
        let d = jt.nrows();
        let sq = (&jt * &jt + DMatrix::<f64>::identity(d, d)).amax();
        let inv = (jt.transpose() * &gm * &jt - &gm).amax();
        let ev = ((&gm + gm.transpose()) * 0.5)
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        rep.square = rep.square.max(sq);
        rep.invariance = rep.invariance.max(inv);
        rep.min_eigenvalue = rep.min_eigenvalue.min(ev);
        if sq.max(inv) > worst {
            worst = sq.max(inv);
            rep.worst_point = ps.to_vec();
        }
    }
    let lee = vaisman_check(&s, &g, &samples)?;
    let anti = |q: &[f64]| s.anti_lee_at(q);
    let reeb = killing_residual(&s.manifold, &g, &anti, &samples)?;
    rep.lee_killing = lee.max;
    rep.reeb_killing = reeb.max;
    Ok(rep)
}

/// Witness data for the complex and metric part of an LCK quotient.
#[derive(Clone, Debug)]
pub struct LckWitness {
    pub j: MatrixField,
    pub g: MatrixField,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LckQuotientReport {
    /// `B = F^perp ∩ T mu^-1(xi)` is `J`-invariant.
    pub horizontal_invariance: f64,
    /// `max |L_v J|` on `B` modulo `F + J F`, for `v` in `F`.
    pub foliation_holomorphic: f64,
    /// `pi_* J = J_xi pi_*` on `B`.
    pub complex_projection: f64,
    /// `pi^* g_xi = e^f g` on `B`.
    pub metric_projection: f64,
    /// `pi_* N_J(u, v) = N_{J_xi}(pi_* u, pi_* v)` on `B`.
    pub nijenhuis_projection: f64,
    /// Vaisman extras: normal part of `theta^#` and `pi_* theta^# - theta_xi^#`.
    pub lee_tangency: Option<f64>,
    pub lee_projection: Option<f64>,
    pub worst_point: Vec<f64>,
}

impl LckQuotientReport {
    pub fn max(&self) -> f64 {
        self.horizontal_invariance
            .max(self.foliation_holomorphic)
            .max(self.complex_projection)
            .max(self.metric_projection)
            .max(self.lee_tangency.unwrap_or(0.0))
            .max(self.lee_projection.unwrap_or(0.0))
    }
}

/// Pointwise checks of LCK reduction at level-set samples.
#[allow(clippy::too_many_arguments)]
pub fn lck_quotient_checks(
    r: &Reduction,
    j: &MatrixField,
    g: &MatrixField,
    w: &crate::reduction::QuotientWitness,
    wq: &LckWitness,
    vaisman: bool,
    points: &[DVector<f64>],
) -> Result<LckQuotientReport> {
    let mut rep = LckQuotientReport::default();
    let pj = j.partials();
    let pjq = wq.j.partials();
    let mut worst = -1.0;
    let reduced = w.reduced_structure()?;
    for p in points {
        let ps = p.as_slice();
        let cb = r.characteristic_basis(ps)?;
        let k = r.level().tangent_basis(ps)?;
        let gm = g.at(ps)?;
        let jm = j.at(ps)?;
        // g-orthogonal complement of F inside K
        let cross = cb.basis.transpose() * &gm * &k;
        let (c, _) = linalg::null_space(&cross, RANK_REL_TOL);
        let hb = &k * c;
        let hcols = columns(&hb);
        let q = linalg::span(&hb, RANK_REL_TOL).0;
        let jh = &jm * &hb;
        let inv = (&jh - &q * (q.transpose() * &jh)).amax();

        // F is generated by holomorphic fields iff (L_psi J) maps B into F + J F
        let fj = {
            let f = &cb.basis;
            let mut both = DMatrix::zeros(f.nrows(), 2 * f.ncols());
            both.view_mut((0, 0), f.shape()).copy_from(f);
            both.view_mut((0, f.ncols()), f.shape()).copy_from(&(&jm * f));
            linalg::span(&both, RANK_REL_TOL).0
        };
        let mut hol: f64 = 0.0;
        for a in cb.stabilizer.column_iter() {
            let a = a.as_slice().to_vec();
            let psi = |x: &[f64]| r.psi_at(&a, x);
            let djx = matrix_derivative(j, p, &psi(ps)?)?;
            for u in &hcols {
                let l = lie_j_on(&psi, p, &jm, &djx, u)?;
                hol = hol.max((&l - &fj * (fj.transpose() * &l)).amax());
            }
        }

        let y = w.projection.at(ps)?;
        let ys = y.as_slice();
        let dpi = w.projection.jacobian_at(ps)?;
        let jq = wq.j.at(ys)?;
        let gq = wq.g.at(ys)?;
        let cproj = (&dpi * &jh - &jq * (&dpi * &hb)).amax();
        let ef = w.gauge.eval(ps)?.exp();
        let pushed = &dpi * &hb;
        let mproj = (pushed.transpose() * &gq * &pushed - hb.transpose() * &gm * &hb * ef).amax();

        let pm: Vec<DMatrix<f64>> = pj.iter().map(|m| m.at(ps)).collect::<Result<_>>()?;
        let pmq: Vec<DMatrix<f64>> = pjq.iter().map(|m| m.at(ys)).collect::<Result<_>>()?;
        let mut nij: f64 = 0.0;
        for a in 0..hcols.len() {
            for b in (a + 1)..hcols.len() {
                let up = nijenhuis_at(&jm, &pm, &hcols[a], &hcols[b]);
                let down = nijenhuis_at(&jq, &pmq, &(&dpi * &hcols[a]), &(&dpi * &hcols[b]));
                nij = nij.max((&dpi * up - down).amax());
            }
        }

        rep.horizontal_invariance = rep.horizontal_invariance.max(inv);
        rep.foliation_holomorphic = rep.foliation_holomorphic.max(hol);
        rep.complex_projection = rep.complex_projection.max(cproj);
        rep.metric_projection = rep.metric_projection.max(mproj);
        rep.nijenhuis_projection = rep.nijenhuis_projection.max(nij);
        let mut local = inv.max(hol).max(cproj).max(mproj);

        if vaisman {
            let sharp = lee_at(&r.structure, g, ps)?;
            let tang = (&sharp - &k * (k.transpose() * &sharp)).amax();
            let sharp_q = metric_dual(&reduced.manifold, &gq, &reduced.theta.covector_at(ys)?, ys)?;
            let proj = (&dpi * &sharp - sharp_q).amax();
            rep.lee_tangency = Some(rep.lee_tangency.unwrap_or(0.0).max(tang));
            rep.lee_projection = Some(rep.lee_projection.unwrap_or(0.0).max(proj));
            local = local.max(tang).max(proj);
        }
        if local > worst {
            worst = local;
            rep.worst_point = ps.to_vec();
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::KForm;

    fn flat() -> (LcsStructure, MatrixField, MatrixField) {
        let omega = KForm::from_terms(
            4,
            2,
            vec![(vec![0, 1], Expr::num(-2.0)), (vec![2, 3], Expr::num(-2.0))],
        );
        let s = LcsStructure::new(ConstrainedManifold::euclidean(4), omega, KForm::zero(4, 1)).unwrap();
        // multiplication by -i on interleaved coordinates
        let j = MatrixField::from_fn(4, |r, c| match (r % 2, r / 2 == c / 2, c % 2) {
            (0, true, 1) => Expr::one(),
            (1, true, 0) => Expr::num(-1.0),
            _ => Expr::zero(),
        });
        let g = MatrixField::identity(4).scale(&Expr::num(2.0));
        (s, j, g)
    }

    #[test]
    fn flat_model_is_kahler() {
        let (s, j, g) = flat();
        let pts = vec![DVector::from_vec(vec![0.1, 0.2, -0.3, 0.4])];
        let rep = lck_check(&s, &j, &g, &pts).unwrap();
        assert!(rep.max() < 1e-12, "{rep:?}");
        assert!(nijenhuis_residual(&s.manifold, &j, &pts).unwrap().max < 1e-12);
    }

    #[test]
    fn dilation_is_holomorphic_but_x1_scaling_is_not() {
        let (s, j, _) = flat();
        let pts = vec![DVector::from_vec(vec![0.5, 0.2, -0.3, 0.4])];
        let euler = VectorField::parse(4, &["x1", "x2", "x3", "x4"]).unwrap();
        let rep = holomorphic_check(&s.manifold, &j, &euler, &pts).unwrap();
        assert!(rep.algebraic < 1e-12 && rep.flow < 1e-8);
        let bad = VectorField::parse(4, &["x1", "0", "0", "0"]).unwrap();
        let rep = holomorphic_check(&s.manifold, &j, &bad, &pts).unwrap();
        assert!(rep.algebraic >= 0.1);
        assert!(rep.disagreement < 1e-7);
    }
}
