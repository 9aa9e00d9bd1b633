//! Lie group actions by twisted symplectomorphisms, fundamental fields,
//! cocycles and twisted momentum maps.
//!
//! An action is described by one flow per Lie algebra basis element (a map
//! depending on the parameter `t`), together with finitely many group
//! elements used for pointwise checks. For a left action the fundamental
//! fields satisfy `[X_a, X_b] = -X_[a,b]`. Cocycles obey
//! `g^* omega = e^{phi_g} omega` and `phi_gh = phi_g o h + phi_h`.

use nalgebra::{DMatrix, DVector};

use crate::calculus::{DiffeoMap, KForm, VectorField};
use crate::error::{Error, Result};
use crate::expr::{Expr, Params, Var};
use crate::flow;
use crate::lcs::LcsStructure;
use crate::linalg;

/// Default number of trapezoid nodes per circle factor in [`haar_average`].
pub const HAAR_NODES: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebra {
    pub dim: usize,
    /// `c[i][j][k]`: `[e_i, e_j] = sum_k c[i][j][k] e_k`.
    pub structure: Vec<Vec<Vec<f64>>>,
    /// Periods of the one-parameter subgroups when the group is a torus.
    pub torus_periods: Option<Vec<f64>>,
}

impl LieAlgebra {
    pub fn abelian(dim: usize) -> Self {
        LieAlgebra {
            dim,
            structure: vec![vec![vec![0.0; dim]; dim]; dim],
            torus_periods: None,
        }
    }

    pub fn circle() -> Self {
        LieAlgebra {
            torus_periods: Some(vec![2.0 * std::f64::consts::PI]),
            ..LieAlgebra::abelian(1)
        }
    }

    pub fn new(structure: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = structure.len();
        let alg = LieAlgebra {
            dim,
            structure,
            torus_periods: None,
        };
        alg.validate()?;
        Ok(alg)
    }

    /// Checks shape, antisymmetry and the Jacobi identity.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim;
        let shape_ok = self.structure.len() == n
            && self
                .structure
                .iter()
                .all(|r| r.len() == n && r.iter().all(|c| c.len() == n));
        if !shape_ok {
            return Err(Error::Invalid("structure constants must be dim x dim x dim".into()));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if (self.structure[i][j][k] + self.structure[j][i][k]).abs() > 1e-12 {
                        return Err(Error::Invalid("structure constants are not antisymmetric".into()));
                    }
                }
            }
        }
        let e = |i: usize| {
            let mut v = vec![0.0; n];
            v[i] = 1.0;
            v
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let a = self.bracket(&e(i), &self.bracket(&e(j), &e(k)));
                    let b = self.bracket(&e(j), &self.bracket(&e(k), &e(i)));
                    let c = self.bracket(&e(k), &self.bracket(&e(i), &e(j)));
                    if (0..n).any(|l| (a[l] + b[l] + c[l]).abs() > 1e-10) {
                        return Err(Error::Invalid("structure constants violate the Jacobi identity".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn bracket(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (ai, ci) in a.iter().zip(&self.structure) {
            for (bj, cij) in b.iter().zip(ci) {
                let w = ai * bj;
                if w != 0.0 {
                    for (o, c) in out.iter_mut().zip(cij) {
                        *o += w * c;
                    }
                }
            }
        }
        out
    }

    pub fn is_abelian(&self) -> bool {
        self.structure.iter().flatten().flatten().all(|&c| c == 0.0)
    }

    /// Matrix of `ad_b`; column `j` holds `[b, e_j]`.
    pub fn ad_matrix(&self, b: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |k, j| {
            (0..n).map(|i| b[i] * self.structure[i][j][k]).sum()
        })
    }

    /// `Ad*(exp b)` acting on component vectors of `g*`:
    /// `(Ad*(g) xi)(a) = xi(Ad(g^-1) a)`, i.e. `exp(-ad_b)^T`.
    pub fn coadjoint(&self, log: &[f64]) -> DMatrix<f64> {
        let a = -self.ad_matrix(log);
        expm_series(&a).transpose()
    }
}

/// Matrix exponential by a truncated Taylor series.
pub fn expm_series(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..60 {
        term = &term * a / k as f64;
        out += &term;
        if term.norm() < 1e-18 * out.norm() {
            break;
        }
    }
    out
}

/// A one-parameter subgroup `t -> exp(t e_i)` acting on the ambient space.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow {
    /// Components depend on the coordinates and on `t`.
    pub map: DiffeoMap,
    /// `phi_{exp(t e_i)}(x)`; zero for form-preserving flows.
    pub cocycle: Expr,
}

impl Flow {
    pub fn new(map: DiffeoMap, cocycle: Expr) -> Self {
        Flow { map, cocycle }
    }

    pub fn fundamental_field(&self) -> VectorField {
        VectorField::new(
            self.map
                .comps
                .iter()
                .map(|c| c.diff(Var::T).at_t(0.0))
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub label: String,
    /// `g = exp(sum log_i e_i)`.
    pub log: Vec<f64>,
    /// Must carry its inverse.
    pub map: DiffeoMap,
    pub cocycle: Expr,
}

impl GroupElement {
    /// `exp(t e_i)` taken from the `i`-th flow.
    pub fn from_flow(flow: &Flow, i: usize, alg_dim: usize, t: f64) -> Self {
        let mut log = vec![0.0; alg_dim];
        log[i] = t;
        let map = flow.map.at_t(t);
        let inverse = flow.map.at_t(-t).comps;
        GroupElement {
            label: format!("exp({t}*e{})", i + 1),
            log,
            map: DiffeoMap::new(map.src_dim, map.comps).with_inverse(inverse),
            cocycle: flow.cocycle.at_t(t),
        }
    }

    /// `-phi_{g^-1} = phi_g o g^-1`.
    pub fn inverse_cocycle_negated(&self) -> Result<Expr> {
        let inv = self.map.inverse.as_ref().ok_or(Error::MissingInverse)?;
        Ok(self.cocycle.compose(inv))
    }
}

#[derive(Clone, Debug)]
pub struct GroupAction {
    pub algebra: LieAlgebra,
    pub flows: Vec<Flow>,
    pub elements: Vec<GroupElement>,
    /// `(i, j, k)` with `element k = element i * element j`.
    pub pairs: Vec<(usize, usize, usize)>,
    fields: Vec<VectorField>,
}

impl GroupAction {
    pub fn new(algebra: LieAlgebra, flows: Vec<Flow>) -> Result<Self> {
        algebra.validate()?;
        if flows.len() != algebra.dim {
            return Err(Error::Invalid(format!(
                "{} flows for an algebra of dimension {}",
                flows.len(),
                algebra.dim
            )));
        }
        let fields = flows.iter().map(Flow::fundamental_field).collect();
        Ok(GroupAction {
            algebra,
            flows,
            elements: vec![],
            pairs: vec![],
            fields,
        })
    }

    pub fn with_elements(mut self, elements: Vec<GroupElement>, pairs: Vec<(usize, usize, usize)>) -> Result<Self> {
        let n = elements.len();
        if pairs.iter().any(|&(i, j, k)| i >= n || j >= n || k >= n) {
            return Err(Error::Invalid("composable pair refers to a missing element".into()));
        }
        self.elements = elements;
        self.pairs = pairs;
        Ok(self)
    }

    /// Adds `exp(t e_i)` for each listed `(i, t)`, and records pairs
    /// `exp(s e_i) exp(t e_i) = exp((s + t) e_i)` for consecutive entries.
    pub fn with_flow_elements(self, params: &[(usize, f64)]) -> Result<Self> {
        let dim = self.algebra.dim;
        let mut elements = Vec::new();
        let mut pairs = Vec::new();
        for w in params.windows(2) {
            let (i, s) = w[0];
            let (j, t) = w[1];
            if i == j {
                let base = elements.len();
                elements.push(GroupElement::from_flow(&self.flows[i], i, dim, s));
                elements.push(GroupElement::from_flow(&self.flows[j], j, dim, t));
                elements.push(GroupElement::from_flow(&self.flows[i], i, dim, s + t));
                pairs.push((base, base + 1, base + 2));
            }
        }
        for &(i, t) in params {
            elements.push(GroupElement::from_flow(&self.flows[i], i, dim, t));
        }
        self.with_elements(elements, pairs)
    }

    pub fn fundamental_field(&self, i: usize) -> &VectorField {
        &self.fields[i]
    }

    pub fn fundamental_fields(&self) -> &[VectorField] {
        &self.fields
    }

    /// Fundamental field of an arbitrary algebra element.
    pub fn field_of(&self, a: &[f64]) -> VectorField {
        let dim = self.fields.first().map_or(0, |f| f.dim);
        let mut out = VectorField::zero(dim);
        for (ai, x) in a.iter().zip(&self.fields) {
            if *ai != 0.0 {
                out = out.add(&x.scale(&Expr::num(*ai)));
            }
        }
        out
    }
}

/// Components `rho_a` of a twisted momentum map `mu(x)(a) = rho_a(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumData {
    pub rho: Vec<Expr>,
}

impl MomentumData {
    pub fn new(rho: Vec<Expr>) -> Self {
        MomentumData { rho }
    }

    pub fn at(&self, p: &[f64]) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.rho.len());
        for (i, r) in self.rho.iter().enumerate() {
            v[i] = r.eval(p)?;
        }
        Ok(v)
    }

    /// Jacobian of `mu`, one row per component.
    pub fn jacobian_at(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let dim = p.len();
        let mut m = DMatrix::zeros(self.rho.len(), dim);
        for (i, r) in self.rho.iter().enumerate() {
            let row = KForm::exact(dim, r).covector_at(p)?;
            m.set_row(i, &row.transpose());
        }
        Ok(m)
    }
}

/// Momentum of `(e^f omega, theta + df)`: `e^f mu`.
pub fn rescaled_momentum(m: &MomentumData, f: &Expr) -> MomentumData {
    let ef = f.exp();
    MomentumData::new(m.rho.iter().map(|r| &ef * r).collect())
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct HamiltonianReport {
    /// `max |d_theta rho_a - i_{X_a} omega|` on tangent basis vectors.
    pub momentum_residual: f64,
    /// `max |d/dt e^{phi_exp(t a)}|_0 - theta(X_a)|` from a finite difference in `t`.
    pub cocycle_derivative_residual: f64,
    pub worst_point: Vec<f64>,
}

impl HamiltonianReport {
    pub fn max(&self) -> f64 {
        self.momentum_residual.max(self.cocycle_derivative_residual)
    }
}

pub fn verify_twisted_hamiltonian(
    s: &LcsStructure,
    act: &GroupAction,
    m: &MomentumData,
    samples: &[DVector<f64>],
) -> Result<HamiltonianReport> {
    if m.rho.len() != act.algebra.dim {
        return Err(Error::Invalid("momentum has the wrong number of components".into()));
    }
    let dim = s.dim();
    let defects: Vec<KForm> = act
        .fundamental_fields()
        .iter()
        .zip(&m.rho)
        .map(|(x, rho)| {
            KForm::function(dim, rho.clone())
                .twisted_d(&s.theta)
                .sub(&s.omega.interior(x))
        })
        .collect();
    let theta_x: Vec<Expr> = act
        .fundamental_fields()
        .iter()
        .map(|x| s.theta.pair(x))
        .collect();
    let mut report = HamiltonianReport::default();
    let mut worst = -1.0;
    for p in samples {
        let p = p.as_slice();
        let b = s.manifold.tangent_basis(p)?;
        for (a, defect) in defects.iter().enumerate() {
            let r = linalg::max_abs((b.transpose() * defect.covector_at(p)?).as_slice());
            let c = &act.flows[a].cocycle;
            let fd = flow::five_point(
                |t| Ok(c.eval_with(p, Params { t, s: 0.0 })?.exp()),
                1e-4,
            )?;
            let q = (fd - theta_x[a].eval(p)?).abs();
            report.momentum_residual = report.momentum_residual.max(r);
            report.cocycle_derivative_residual = report.cocycle_derivative_residual.max(q);
            if r.max(q) > worst {
                worst = r.max(q);
                report.worst_point = p.to_vec();
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ActionReport {
    /// `max |g^* omega - e^{phi_g} omega|` on tangent pairs.
    pub conformal_residual: f64,
    /// `max |g^* theta - theta - d phi_g|` on tangent vectors.
    pub lee_residual: f64,
    /// `max |g^-1(g(x)) - x|` and constraint drift of `g(x)`.
    pub map_residual: f64,
    /// Cocycle rule and map composition on the supplied pairs.
    pub cocycle_residual: f64,
    pub worst_point: Vec<f64>,
}

impl ActionReport {
    pub fn max(&self) -> f64 {
        self.conformal_residual
            .max(self.lee_residual)
            .max(self.map_residual)
            .max(self.cocycle_residual)
    }
}

/// Checks that every supplied element acts by a twisted symplectomorphism
/// with its cocycle, and that cocycles compose correctly.
pub fn verify_action(s: &LcsStructure, act: &GroupAction, samples: &[DVector<f64>]) -> Result<ActionReport> {
    let dim = s.dim();
    let mut report = ActionReport::default();
    let mut worst = -1.0;
    let dphi: Vec<KForm> = act
        .elements
        .iter()
        .map(|g| KForm::exact(dim, &g.cocycle))
        .collect();
    for p in samples {
        let ps = p.as_slice();
        let b = s.manifold.tangent_basis(ps)?;
        let cols: Vec<DVector<f64>> = b.column_iter().map(|c| c.into_owned()).collect();
        let omega_p = s.omega.values_at(ps)?;
        let theta_p = s.theta.covector_at(ps)?;
        let mut local: f64 = 0.0;
        for (g, dphi_g) in act.elements.iter().zip(&dphi) {
            let gp = g.map.at(ps)?;
            let jac = g.map.jacobian_at(ps)?;
            let omega_gp = s.omega.values_at(gp.as_slice())?;
            let ef = g.cocycle.eval(ps)?.exp();
            for i in 0..cols.len() {
                for j in (i + 1)..cols.len() {
                    let lhs = omega_gp.eval(&[&jac * &cols[i], &jac * &cols[j]]);
                    let rhs = ef * omega_p.eval(&[cols[i].clone(), cols[j].clone()]);
                    report.conformal_residual = report.conformal_residual.max((lhs - rhs).abs());
                }
            }
            let theta_gp = s.theta.covector_at(gp.as_slice())?;
            let pulled = jac.transpose() * theta_gp - &theta_p - dphi_g.covector_at(ps)?;
            report.lee_residual = report
                .lee_residual
                .max(linalg::max_abs((b.transpose() * pulled).as_slice()));
            let back = g.map.inverted()?.at(gp.as_slice())?;
            let drift = s.manifold.residual(gp.as_slice())?;
            report.map_residual = report.map_residual.max((back - p).amax()).max(drift);
            local = local.max(report.conformal_residual).max(report.lee_residual);
        }
        for &(i, j, k) in &act.pairs {
            let (gi, gj, gk) = (&act.elements[i], &act.elements[j], &act.elements[k]);
            let hp = gj.map.at(ps)?;
            let composed = gi.map.at(hp.as_slice())?;
            let direct = gk.map.at(ps)?;
            let rule = gk.cocycle.eval(ps)? - gi.cocycle.eval(hp.as_slice())? - gj.cocycle.eval(ps)?;
            report.cocycle_residual = report
                .cocycle_residual
                .max(rule.abs())
                .max((composed - direct).amax());
            local = local.max(report.cocycle_residual);
        }
        if local > worst {
            worst = local;
            report.worst_point = ps.to_vec();
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub worst_point: Vec<f64>,
}

impl Residual {
    pub(crate) fn new() -> Self {
        Residual {
            max: 0.0,
            worst_point: vec![],
        }
    }

    pub(crate) fn record(&mut self, v: f64, p: &[f64]) {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > self.max || self.worst_point.is_empty() {
            self.max = v;
            self.worst_point = p.to_vec();
        }
    }
}

/// `max |mu(g x) - e^{phi_g(x)} Ad*(g) mu(x)|` over samples and elements.
pub fn equivariance_check(
    act: &GroupAction,
    m: &MomentumData,
    samples: &[DVector<f64>],
) -> Result<Residual> {
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let mu = m.at(ps)?;
        for g in &act.elements {
            let gp = g.map.at(ps)?;
            let lhs = m.at(gp.as_slice())?;
            let rhs = act.algebra.coadjoint(&g.log) * &mu * g.cocycle.eval(ps)?.exp();
            out.record((lhs - rhs).amax(), ps);
        }
    }
    Ok(out)
}

/// `max |{rho_a, rho_b}_theta - rho_[a,b]|`.
pub fn poisson_homomorphism_check(
    s: &LcsStructure,
    act: &GroupAction,
    m: &MomentumData,
    samples: &[DVector<f64>],
) -> Result<Residual> {
    let n = act.algebra.dim;
    let mut out = Residual::new();
    for p in samples {
        let ps = p.as_slice();
        let mu = m.at(ps)?;
        for a in 0..n {
            for b in 0..n {
                let pb = s.twisted_poisson(&m.rho[a], &m.rho[b], ps)?;
                let c = &act.algebra.structure[a][b];
                let rhs: f64 = c.iter().zip(mu.iter()).map(|(ck, mk)| ck * mk).sum();
                out.record((pb - rhs).abs(), ps);
            }
        }
    }
    Ok(out)
}

/// `g_* theta^omega = e^{-phi_{g^-1}} theta^omega - d(e^{-phi_{g^-1}})^omega`.
pub fn anti_lee_transport_check(
    s: &LcsStructure,
    act: &GroupAction,
    samples: &[DVector<f64>],
) -> Result<Residual> {
    let dim = s.dim();
    let mut out = Residual::new();
    let weights: Vec<(Expr, KForm)> = act
        .elements
        .iter()
        .map(|g| {
            let w = g.inverse_cocycle_negated()?.exp();
            let dw = KForm::exact(dim, &w);
            Ok((w, dw))
        })
        .collect::<Result<_>>()?;
    for p in samples {
        let ps = p.as_slice();
        let v = s.anti_lee_at(ps)?;
        for (g, (w, dw)) in act.elements.iter().zip(&weights) {
            let y = g.map.at(ps)?;
            let ys = y.as_slice();
            let lhs = g.map.jacobian_at(ps)? * &v;
            let rhs = s.anti_lee_at(ys)? * w.eval(ys)? - s.omega_dual_covector(&dw.covector_at(ys)?, ys)?;
            out.record((lhs - rhs).amax(), ps);
        }
    }
    Ok(out)
}

/// Cocycle of `exp(sum t_i e_i)` for commuting flows, by the cocycle rule.
fn torus_cocycle(act: &GroupAction, ts: &[f64]) -> Expr {
    let mut phi = Expr::zero();
    let mut inner = DiffeoMap::identity(act.flows[0].map.src_dim);
    for i in (0..ts.len()).rev() {
        let flow = &act.flows[i];
        phi = phi + flow.cocycle.at_t(ts[i]).compose(&inner.comps);
        inner = flow.map.at_t(ts[i]).compose(&inner);
    }
    phi
}

/// Averages the cocycle over a torus group with the trapezoid rule:
/// `F = ln mean_g e^{phi_g}`, returning `(e^F omega, theta + dF)` and `F`.
pub fn haar_average(act: &GroupAction, s: &LcsStructure, nodes_per_axis: usize) -> Result<(LcsStructure, Expr)> {
    let periods = act
        .algebra
        .torus_periods
        .clone()
        .ok_or_else(|| Error::Unsupported("Haar averaging needs a torus group".into()))?;
    if !act.algebra.is_abelian() || periods.len() != act.algebra.dim {
        return Err(Error::Unsupported("Haar averaging needs a torus group".into()));
    }
    if act.flows.iter().all(|f| f.cocycle.is_zero()) {
        return Ok((s.clone(), Expr::zero()));
    }
    let k = periods.len();
    let total = nodes_per_axis.pow(k as u32);
    let mut terms = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let ts: Vec<f64> = periods
            .iter()
            .map(|per| {
                let idx = rem % nodes_per_axis;
                rem /= nodes_per_axis;
                per * idx as f64 / nodes_per_axis as f64
            })
            .collect();
        terms.push(torus_cocycle(act, &ts).exp());
    }
    let mean = Expr::sum(terms) / total as f64;
    let f = mean.ln();
    Ok((s.conformal_rescale(&f)?, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ConstrainedManifold;

    #[test]
    fn affine_coadjoint() {
        // [e1, e2] = e2
        let mut c = vec![vec![vec![0.0; 2]; 2]; 2];
        c[0][1][1] = 1.0;
        c[1][0][1] = -1.0;
        let alg = LieAlgebra::new(c).unwrap();
        let ad = alg.coadjoint(&[0.0, 0.5]);
        let xi = DVector::from_vec(vec![2.0, 3.0]);
        let out = ad * xi;
        assert!((out[0] - (2.0 + 0.5 * 3.0)).abs() < 1e-15);
        assert!((out[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_violation_is_rejected() {
        let mut c = vec![vec![vec![0.0; 3]; 3]; 3];
        c[0][1][2] = 1.0;
        c[1][0][2] = -1.0;
        c[1][2][0] = 1.0;
        c[2][1][0] = -1.0;
        c[0][2][0] = 1.0;
        c[2][0][0] = -1.0;
        assert!(LieAlgebra::new(c).is_err());
    }

    #[test]
    fn asymmetric_constants_are_rejected() {
        let mut c = vec![vec![vec![0.0; 2]; 2]; 2];
        c[0][1][1] = 1.0;
        assert!(LieAlgebra::new(c).is_err());
    }

    fn affine_plane() -> (LcsStructure, GroupAction, MomentumData) {
        let mut c = vec![vec![vec![0.0; 2]; 2]; 2];
        c[0][1][1] = 1.0;
        c[1][0][1] = -1.0;
        let alg = LieAlgebra::new(c).unwrap();
        let scale = DiffeoMap::new(2, vec![Expr::parse("exp(t)*x1").unwrap(), Expr::parse("exp(-t)*x2").unwrap()]);
        let shift = DiffeoMap::new(2, vec![Expr::parse("x1 + t").unwrap(), Expr::x(1)]);
        let act = GroupAction::new(alg, vec![Flow::new(scale, Expr::zero()), Flow::new(shift, Expr::zero())])
            .unwrap()
            .with_flow_elements(&[(0, 0.3), (0, -0.7), (1, 1.1), (1, 0.4)])
            .unwrap();
        let omega = KForm::from_terms(2, 2, vec![(vec![0, 1], Expr::one())]);
        let s = LcsStructure::new(ConstrainedManifold::euclidean(2), omega, KForm::zero(2, 1)).unwrap();
        let m = MomentumData::new(vec![Expr::parse("x1*x2").unwrap(), Expr::x(1)]);
        (s, act, m)
    }

    #[test]
    fn affine_fixture_is_hamiltonian_and_equivariant() {
        let (s, act, m) = affine_plane();
        let pts: Vec<_> = [[0.3, -1.2], [2.0, 0.5], [-0.7, 0.9]]
            .iter()
            .map(|p| DVector::from_row_slice(p))
            .collect();
        assert!(verify_twisted_hamiltonian(&s, &act, &m, &pts).unwrap().max() < 1e-12);
        assert!(verify_action(&s, &act, &pts).unwrap().max() < 1e-12);
        assert!(equivariance_check(&act, &m, &pts).unwrap().max < 1e-12);
        assert!(poisson_homomorphism_check(&s, &act, &m, &pts).unwrap().max < 1e-12);
        assert!(anti_lee_transport_check(&s, &act, &pts).unwrap().max < 1e-12);
        let x1 = act.fundamental_field(0);
        let x2 = act.fundamental_field(1);
        let br = x1.bracket(x2).add(&act.field_of(&act.algebra.bracket(&[1.0, 0.0], &[0.0, 1.0])));
        assert!(br.at(&[0.4, 0.2]).unwrap().amax() < 1e-15);
    }
}
