//! Executes a compiled scenario's check pipeline and collects a report.
//!
//! Checks run in dependency order (structure, action, momentum, reduction,
//! contact, LCK, expected values). Every check draws its own sample stream
//! from `(seed, scenario, label)`, so filtering never changes the numbers a
//! check reports.

use nalgebra::{DMatrix, DVector};

use crate::action::{self, GroupAction, MomentumData, Residual};
use crate::calculus::{DiffeoMap, KForm, VectorField};
use crate::contact::{self, ContactStructure};
use crate::error::{Error, Result};
use crate::expr::{fd_partial, Expr, Params, Var};
use crate::flow;
use crate::lck;
use crate::lcs::{self, LcsStructure};
use crate::linalg::{self, RANK_REL_TOL};
use crate::manifold::{ConstrainedManifold, SampleRng, REGULARITY_TOL};
use crate::reduction::{self, Reduction};
use crate::report::{CheckResult, Comparison, Report, ScenarioReport};
use crate::scenario::{
    gauge_action, parse_expr, parse_exprs, parse_matrix, CompiledReduction, ExpectedCheck, ExpectedKind,
    Expectation, NegativeControl, Scenario, SweepPath,
};

/// Environment variable holding the default tolerance scale.
pub const TOL_SCALE_ENV: &str = "LCS_TOL_SCALE";

pub const MODULES: [&str; 7] = ["expr", "calculus", "lcs", "action", "reduction", "contact", "lck"];

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Overrides the scenario's own seed.
    pub seed: Option<u64>,
    /// Check ids or id prefixes; empty runs everything.
    pub checks: Vec<String>,
    /// Module names; empty runs everything.
    pub modules: Vec<String>,
    /// Multiplies every upper-bound tolerance.
    pub tolerance_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: None,
            checks: vec![],
            modules: vec![],
            tolerance_scale: 1.0,
        }
    }
}

/// Reads [`TOL_SCALE_ENV`]; unset means 1.
pub fn tolerance_scale_from_env() -> Result<f64> {
    match std::env::var(TOL_SCALE_ENV) {
        Ok(v) => {
            let s: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("{TOL_SCALE_ENV}={v} is not a number")))?;
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Invalid(format!("{TOL_SCALE_ENV} must be positive")));
            }
            Ok(s)
        }
        Err(_) => Ok(1.0),
    }
}

pub fn run_scenarios(scenarios: &[Scenario], opts: &RunOptions) -> Report {
    Report::new(scenarios.iter().map(|s| run_scenario(s, opts)).collect())
}

pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> ScenarioReport {
    let seed = opts.seed.unwrap_or(sc.file.samples.seed);
    let mut ctx = Ctx {
        sc,
        opts,
        seed,
        out: vec![],
        lcs_samples: None,
        contact_samples: None,
    };
    ctx.expr_checks();
    ctx.calculus_checks();
    ctx.lcs_checks();
    ctx.action_checks();
    ctx.gauge_checks();
    for r in &sc.reductions {
        ctx.reduction_checks(r);
    }
    ctx.sweep_checks();
    ctx.contact_checks();
    ctx.lck_checks();
    for e in &sc.file.expected {
        ctx.expected_check(e);
    }
    let mut rep = ScenarioReport {
        scenario: sc.name().to_string(),
        seed,
        tolerance_scale: opts.tolerance_scale,
        checks: ctx.out,
    };
    rep.sort();
    rep
}

fn module_of(id: &str) -> &str {
    id.split('.').next().unwrap_or(id)
}

fn tangent_max(a: &KForm, m: &ConstrainedManifold, pts: &[DVector<f64>]) -> Result<Residual> {
    let mut out = Residual::new();
    for p in pts {
        let ps = p.as_slice();
        let b = m.tangent_basis(ps)?;
        out.record(a.values_at(ps)?.max_on_basis(&b), ps);
    }
    Ok(out)
}

fn vector_max<F>(pts: &[DVector<f64>], f: F) -> Result<Residual>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut out = Residual::new();
    for p in pts {
        let ps = p.as_slice();
        out.record(f(ps)?, ps);
    }
    Ok(out)
}

fn sample_sphere_like(
    m: &ConstrainedManifold,
    rng: &mut SampleRng,
    count: usize,
    radius: f64,
    guard: Option<&Expr>,
) -> Result<Vec<DVector<f64>>> {
    m.sample_where(rng, count, radius, |p| guard.is_none_or(|g| g.eval(p).is_ok_and(|v| v > 0.0)))
}

struct Ctx<'a> {
    sc: &'a Scenario,
    opts: &'a RunOptions,
    seed: u64,
    out: Vec<CheckResult>,
    lcs_samples: Option<std::result::Result<Vec<DVector<f64>>, String>>,
    contact_samples: Option<std::result::Result<Vec<DVector<f64>>, String>>,
}

impl Ctx<'_> {
    fn wants(&self, id: &str) -> bool {
        let module = module_of(id);
        let module_ok = self.opts.modules.is_empty() || self.opts.modules.iter().any(|m| m == module);
        let id_ok = self.opts.checks.is_empty()
            || self
                .opts
                .checks
                .iter()
                .any(|f| id == f || (id.starts_with(f.as_str()) && id[f.len()..].starts_with('.')));
        module_ok && id_ok
    }

    fn wants_prefix(&self, prefix: &str) -> bool {
        let module = module_of(prefix);
        let module_ok = self.opts.modules.is_empty() || self.opts.modules.iter().any(|m| m == module);
        let id_ok = self.opts.checks.is_empty()
            || self.opts.checks.iter().any(|f| {
                f == prefix
                    || f.starts_with(&format!("{prefix}."))
                    || prefix.starts_with(&format!("{f}."))
            });
        module_ok && id_ok
    }

    fn tol(&self, key: &str, default: f64) -> f64 {
        self.sc.file.tolerances.get(key).copied().unwrap_or(default) * self.opts.tolerance_scale
    }

    fn floor(&self, key: &str, default: f64) -> f64 {
        self.sc.file.tolerances.get(key).copied().unwrap_or(default)
    }

    fn rng(&self, label: &str) -> SampleRng {
        SampleRng::derive(self.seed, &format!("{}/{label}", self.sc.name()))
    }

    fn count(&self) -> usize {
        self.sc.file.samples.count.max(1)
    }

    fn lcs_points(&mut self) -> Result<Vec<DVector<f64>>> {
        if self.lcs_samples.is_none() {
            let s = self.sc.lcs.as_ref().ok_or_else(|| Error::Invalid("no LCS structure".into()))?;
            let mut rng = self.rng("samples");
            let r = sample_sphere_like(
                &s.manifold,
                &mut rng,
                self.count(),
                self.sc.file.samples.radius,
                self.sc.guard.as_ref(),
            );
            self.lcs_samples = Some(r.map_err(|e| e.to_string()));
        }
        self.lcs_samples.clone().unwrap().map_err(Error::Invalid)
    }

    fn contact_points(&mut self) -> Result<Vec<DVector<f64>>> {
        if self.contact_samples.is_none() {
            let c = self.sc.contact.as_ref().ok_or_else(|| Error::Invalid("no contact structure".into()))?;
            let mut rng = self.rng("contact-samples");
            let r = c.manifold.sample(&mut rng, self.count(), self.sc.file.samples.radius);
            self.contact_samples = Some(r.map_err(|e| e.to_string()));
        }
        self.contact_samples.clone().unwrap().map_err(Error::Invalid)
    }

    fn first(&mut self, n: usize) -> Result<Vec<DVector<f64>>> {
        Ok(self.lcs_points()?.into_iter().take(n).collect())
    }

    fn push(&mut self, r: CheckResult) {
        self.out.push(r);
    }

    /// Runs `f` when `id` is selected, turning errors into a failed check.
    fn run<F>(&mut self, id: &str, tol: f64, anchor: &str, f: F)
    where
        F: FnOnce(&mut Self) -> Result<CheckResult>,
    {
        if !self.wants(id) {
            return;
        }
        let r = f(self).unwrap_or_else(|e| CheckResult::failed(id, module_of(id), tol, anchor, e.to_string()));
        self.push(r);
    }

    fn at_most(id: &str, r: &Residual, tol: f64, anchor: &str) -> CheckResult {
        CheckResult::measured(id, module_of(id), r.max, Comparison::AtMost, tol, &r.worst_point, anchor)
    }

    fn value(id: &str, v: f64, cmp: Comparison, tol: f64, point: &[f64], anchor: &str) -> CheckResult {
        CheckResult::measured(id, module_of(id), v, cmp, tol, point, anchor)
    }

    // ---- expr ----

    fn all_expressions(&self) -> Vec<Expr> {
        let sc = self.sc;
        let mut out = Vec::new();
        if let Some(s) = &sc.lcs {
            out.extend(s.omega.terms().map(|(_, c)| c.clone()));
            out.extend(s.theta.terms().map(|(_, c)| c.clone()));
            out.extend(s.manifold.constraints().iter().cloned());
        }
        if let Some(m) = &sc.momentum {
            out.extend(m.rho.iter().cloned());
        }
        out.extend(sc.gauges.values().cloned());
        out.retain(|e| !e.is_zero() && e.as_num().is_none());
        out
    }

    fn expr_checks(&mut self) {
        if self.sc.lcs.is_none() {
            return;
        }
        let tol = self.tol("expr.derivatives", 1e-6);
        self.run("expr.derivatives", tol, "symbolic partials match central differences", |c| {
            let exprs = c.all_expressions();
            let pts = c.first(20)?;
            let dim = c.sc.file.lcs_dim();
            let mut r = Residual::new();
            for e in &exprs {
                let partials: Vec<Expr> = (0..dim).map(|i| e.diff(Var::Coord(i))).collect();
                for p in &pts {
                    let ps = p.as_slice();
                    for (i, d) in partials.iter().enumerate() {
                        let exact = d.eval(ps)?;
                        let fd = fd_partial(e, ps, i)?;
                        r.record((exact - fd).abs() / exact.abs().max(1.0), ps);
                    }
                }
            }
            Ok(Self::at_most("expr.derivatives", &r, tol, "symbolic partials match central differences"))
        });
        let tol = self.tol("expr.mixed_partials", 1e-8);
        self.run("expr.mixed_partials", tol, "mixed partials commute", |c| {
            let exprs = c.all_expressions();
            let pts = c.first(10)?;
            let dim = c.sc.file.lcs_dim();
            let mut r = Residual::new();
            for e in exprs.iter().take(24) {
                let d: Vec<Expr> = (0..dim).map(|i| e.diff(Var::Coord(i))).collect();
                for i in 0..dim {
                    for j in i + 1..dim {
                        let a = d[i].diff(Var::Coord(j));
                        let b = d[j].diff(Var::Coord(i));
                        for p in &pts {
                            let ps = p.as_slice();
                            let (x, y) = (a.eval(ps)?, b.eval(ps)?);
                            r.record((x - y).abs() / x.abs().max(1.0), ps);
                        }
                    }
                }
            }
            Ok(Self::at_most("expr.mixed_partials", &r, tol, "mixed partials commute"))
        });
    }

    // ---- calculus ----

    fn calculus_checks(&mut self) {
        let anchor = "d^2 = 0, d_theta^2 = 0, twisted Cartan, wedge antisymmetry";
        let tol = self.tol("calculus.identities", 1e-9);
        if let Some(s) = self.sc.lcs.clone() {
            self.run("calculus.identities", tol, anchor, |c| {
                let pts = c.lcs_points()?;
                let forms: Vec<KForm> = c.sc.forms.values().cloned().collect();
                let fields: Vec<VectorField> = c
                    .sc
                    .action
                    .as_ref()
                    .map(|a| a.fundamental_fields().to_vec())
                    .unwrap_or_default();
                let mut rng = c.rng("identities");
                let rep = lcs::identity_suite(&s, &forms, &fields, &pts, &mut rng)?;
                Ok(Self::value("calculus.identities", rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
            });
        } else if let Some(cs) = self.sc.contact.clone() {
            // contact-only scenarios: run the suite on S^1 x C
            self.run("calculus.identities", tol, anchor, |c| {
                let s = contact::lcs_from_contact(&cs)?;
                let n = cs.dim();
                let pts: Vec<DVector<f64>> = c
                    .contact_points()?
                    .iter()
                    .enumerate()
                    .map(|(i, p)| contact::lift_point(p.as_slice(), 0.3 + 0.7 * i as f64))
                    .collect();
                let forms = vec![cs.alpha.shift(2, n + 2)];
                let fields: Vec<VectorField> = match &c.sc.contact_action {
                    Some(a) => contact::extend_action(a, n)?.fundamental_fields().to_vec(),
                    None => vec![],
                };
                let mut rng = c.rng("identities");
                let rep = lcs::identity_suite(&s, &forms, &fields, &pts, &mut rng)?;
                Ok(Self::value("calculus.identities", rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor)
                    .with_note("on S^1 x C"))
            });
        }
    }

    // ---- lcs ----

    fn lcs_checks(&mut self) {
        let Some(s) = self.sc.lcs.clone() else { return };
        let bridge_note = if self.sc.file.is_bridge() { "on S^1 x C" } else { "" };
        if self.wants("lcs.condition") || self.wants("lcs.nondegeneracy") {
            let tol = self.tol("lcs.condition", 1e-9);
            let floor = self.floor("lcs.nondegeneracy", lcs::NONDEGENERACY_TOL);
            match self.lcs_points().and_then(|pts| lcs::verify_lcs(&s, &pts)) {
                Ok(rep) => {
                    self.run("lcs.condition", tol, "d omega = theta ^ omega, d theta = 0", |_| {
                        Ok(Self::value(
                            "lcs.condition",
                            rep.lcs_residual.max(rep.closedness_residual),
                            Comparison::AtMost,
                            tol,
                            &rep.worst_point,
                            "d omega = theta ^ omega, d theta = 0",
                        )
                        .with_note(bridge_note))
                    });
                    self.run("lcs.nondegeneracy", floor, "omega non-degenerate on tangent spaces", |_| {
                        Ok(Self::value(
                            "lcs.nondegeneracy",
                            rep.nondegeneracy_margin,
                            Comparison::AtLeast,
                            floor,
                            &[],
                            "omega non-degenerate on tangent spaces",
                        ))
                    });
                }
                Err(e) => {
                    for id in ["lcs.condition", "lcs.nondegeneracy"] {
                        if self.wants(id) {
                            self.push(CheckResult::failed(id, "lcs", tol, "LCS certification", e.to_string()));
                        }
                    }
                }
            }
        }
        let tol = self.tol("lcs.omega_dual", 1e-9);
        let anchor = "omega(alpha^omega, w) = alpha(w), theta(theta^omega) = 0";
        self.run("lcs.omega_dual", tol, anchor, |c| {
            let pts = c.first(30)?;
            let mut rng = c.rng("omega-dual");
            let mut r = Residual::new();
            for p in &pts {
                let ps = p.as_slice();
                let b = s.manifold.tangent_basis(ps)?;
                let a = rng.gaussian_vector(s.dim(), 1.0);
                let v = s.omega_dual_covector(&a, ps)?;
                let w = s.omega.matrix_at(ps)?;
                let lhs = b.transpose() * w.transpose() * &v;
                let rhs = b.transpose() * &a;
                let th = s.theta.covector_at(ps)?.dot(&s.anti_lee_at(ps)?);
                r.record((lhs - rhs).amax().max(th.abs()), ps);
            }
            Ok(Self::at_most("lcs.omega_dual", &r, tol, anchor))
        });
        let anchor = "dim W + dim W^omega = dim T";
        self.run("lcs.dual_dimension", 0.0, anchor, |c| {
            let pts = c.first(20)?;
            let mut rng = c.rng("dual-dimension");
            let mut r = Residual::new();
            for p in &pts {
                let ps = p.as_slice();
                let b = s.manifold.tangent_basis(ps)?;
                let n = b.ncols();
                let k = 1 + rng.index(n.max(1));
                let coeffs = DMatrix::from_fn(n, k.min(n), |_, _| rng.uniform(-1.0, 1.0));
                let w = &b * coeffs;
                let (dual, _) = s.omega_dual_subspace(&w, ps)?;
                let (span, _) = linalg::span(&w, RANK_REL_TOL);
                r.record((span.ncols() + dual.ncols()).abs_diff(n) as f64, ps);
            }
            Ok(Self::at_most("lcs.dual_dimension", &r, 0.0, anchor))
        });
        if let Some(h0) = self.sc.file.h0.clone() {
            let (cmp, tol) = match h0.min_residual {
                Some(m) => (Comparison::AtLeast, self.floor("lcs.h0_probe", m)),
                None => (Comparison::AtMost, self.tol("lcs.h0_probe", 1e-9)),
            };
            let anchor = "d_theta f = 0 has no solution in the probe basis when theta is not exact";
            self.run("lcs.h0_probe", tol, anchor, |c| {
                let basis = parse_exprs(&h0.basis, s.dim())?;
                let pts = c.lcs_points()?;
                let probe = lcs::h0_vanishing_probe(&s, &basis, &pts)?;
                Ok(Self::value("lcs.h0_probe", probe.min_residual, cmp, tol, &[], anchor))
            });
        }
    }

    // ---- action ----

    fn action_checks(&mut self) {
        let (Some(s), Some(act)) = (self.sc.lcs.clone(), self.sc.action.clone()) else { return };
        let tol = self.tol("action.cocycle", 1e-9);
        let anchor = "g^* omega = e^phi omega, phi_gh = phi_g o h + phi_h";
        self.run("action.cocycle", tol, anchor, |c| {
            let pts = c.first(20)?;
            let rep = action::verify_action(&s, &act, &pts)?;
            Ok(Self::value("action.cocycle", rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
        });
        let tol = self.tol("action.fundamental_fields", 1e-6);
        let anchor = "X_a = d/dt exp(t a) x at t = 0";
        self.run("action.fundamental_fields", tol, anchor, |c| {
            let pts = c.first(20)?;
            let h = 1e-5;
            let mut r = Residual::new();
            for p in &pts {
                let ps = p.as_slice();
                for (fl, x) in act.flows.iter().zip(act.fundamental_fields()) {
                    let fwd = fl.map.at_with(ps, Params { t: h, s: 0.0 })?;
                    let bwd = fl.map.at_with(ps, Params { t: -h, s: 0.0 })?;
                    r.record(((fwd - bwd) / (2.0 * h) - x.at(ps)?).amax(), ps);
                }
            }
            Ok(Self::at_most("action.fundamental_fields", &r, tol, anchor))
        });
        let tol = self.tol("action.bracket", 1e-8);
        self.run("action.bracket", tol, "[X_a, X_b] = -X_[a,b] for a left action", |c| {
            let pts = c.first(30)?;
            let r = bracket_residual(&act, &pts)?;
            Ok(Self::at_most("action.bracket", &r, tol, "[X_a, X_b] = -X_[a,b] for a left action"))
        });
        let Some(m) = self.sc.momentum.clone() else { return };
        self.hamiltonian_checks("action", &s, &act, &m);
        if act.algebra.torus_periods.is_some() && act.flows.iter().any(|f| !f.cocycle.is_zero()) {
            let tol = self.tol("action.haar_average", 1e-8);
            let anchor = "averaged structure is invariant and h^* F = F - phi_h";
            self.run("action.haar_average", tol, anchor, |c| {
                let pts = c.first(10)?;
                let k = act.algebra.dim as f64;
                let nodes = (action::HAAR_NODES as f64).powf(1.0 / k).round() as usize;
                let (avg, f) = action::haar_average(&act, &s, nodes)?;
                let gact = gauge_action(&act, &f)?;
                let rep = action::verify_action(&avg, &gact, &pts)?;
                let mut r = vector_max(&pts, |p| {
                    let mut worst: f64 = 0.0;
                    for g in &act.elements {
                        let y = g.map.at(p)?;
                        let v = f.eval(y.as_slice())? - f.eval(p)? + g.cocycle.eval(p)?;
                        worst = worst.max(v.abs());
                    }
                    Ok(worst)
                })?;
                if rep.conformal_residual.max(rep.lee_residual) > r.max {
                    r.max = rep.conformal_residual.max(rep.lee_residual);
                    r.worst_point = rep.worst_point.clone();
                }
                Ok(Self::at_most("action.haar_average", &r, tol, anchor))
            });
        }
    }

    fn hamiltonian_checks(&mut self, prefix: &str, s: &LcsStructure, act: &GroupAction, m: &MomentumData) {
        let id_h = format!("{prefix}.hamiltonian");
        let id_c = format!("{prefix}.cocycle_derivative");
        if self.wants(&id_h) || self.wants(&id_c) {
            let tol_h = self.tol("action.hamiltonian", 1e-9);
            let tol_c = self.tol("action.cocycle_derivative", 1e-8);
            let res = self.first(40).and_then(|pts| action::verify_twisted_hamiltonian(s, act, m, &pts));
            match res {
                Ok(rep) => {
                    let anchor = "i_{X_a} omega = d_theta rho_a";
                    self.run(&id_h, tol_h, anchor, |_| {
                        Ok(Self::value(&id_h, rep.momentum_residual, Comparison::AtMost, tol_h, &rep.worst_point, anchor))
                    });
                    let anchor = "d/dt e^{phi_exp(ta)} at t = 0 equals theta(X_a)";
                    self.run(&id_c, tol_c, anchor, |_| {
                        Ok(Self::value(
                            &id_c,
                            rep.cocycle_derivative_residual,
                            Comparison::AtMost,
                            tol_c,
                            &rep.worst_point,
                            anchor,
                        ))
                    });
                }
                Err(e) => {
                    for id in [&id_h, &id_c] {
                        if self.wants(id) {
                            self.push(CheckResult::failed(id.as_str(), "action", tol_h, "twisted Hamiltonian", e.to_string()));
                        }
                    }
                }
            }
        }
        let id = format!("{prefix}.equivariance");
        let tol = self.tol("action.equivariance", 1e-8);
        let anchor = "mu(g x) = e^{phi_g(x)} Ad*(g) mu(x)";
        self.run(&id, tol, anchor, |c| {
            let per = 50usize.div_ceil(act.elements.len().max(1));
            let pts = c.first(per)?;
            let r = action::equivariance_check(act, m, &pts)?;
            Ok(Self::at_most(&id, &r, tol, anchor))
        });
        let id = format!("{prefix}.poisson");
        let tol = self.tol("action.poisson", 1e-9);
        let anchor = "{rho_a, rho_b}_theta = rho_[a,b]";
        self.run(&id, tol, anchor, |c| {
            let pts = c.first(30)?;
            let r = action::poisson_homomorphism_check(s, act, m, &pts)?;
            Ok(Self::at_most(&id, &r, tol, anchor))
        });
        let id = format!("{prefix}.anti_lee_transport");
        let tol = self.tol("action.anti_lee_transport", 1e-8);
        let anchor = "g_* theta^omega = e^{-phi_{g^-1}} theta^omega - d(e^{-phi_{g^-1}})^omega";
        self.run(&id, tol, anchor, |c| {
            let pts = c.first(10)?;
            let r = action::anti_lee_transport_check(s, act, &pts)?;
            Ok(Self::at_most(&id, &r, tol, anchor))
        });
    }

    fn gauge_checks(&mut self) {
        let (Some(s), Some(act), Some(m)) = (self.sc.lcs.clone(), self.sc.action.clone(), self.sc.momentum.clone())
        else {
            return;
        };
        for (name, f) in self.sc.gauges.clone() {
            let prefix = format!("action.gauge_{name}");
            if !self.wants_prefix(&prefix) {
                continue;
            }
            let built = s.conformal_rescale(&f).and_then(|s2| Ok((s2, gauge_action(&act, &f)?)));
            match built {
                Ok((s2, a2)) => {
                    let m2 = action::rescaled_momentum(&m, &f);
                    let id = format!("{prefix}.lcs");
                    let tol = self.tol("lcs.condition", 1e-9);
                    let anchor = "(e^f omega, theta + df) is LCS";
                    self.run(&id, tol, anchor, |c| {
                        let pts = c.first(30)?;
                        let rep = lcs::verify_lcs(&s2, &pts)?;
                        Ok(Self::value(
                            &id,
                            rep.lcs_residual.max(rep.closedness_residual),
                            Comparison::AtMost,
                            tol,
                            &rep.worst_point,
                            anchor,
                        ))
                    });
                    let id = format!("{prefix}.cocycle");
                    let tol = self.tol("action.cocycle", 1e-9);
                    let anchor = "rescaled cocycle phi_g + f o g - f";
                    self.run(&id, tol, anchor, |c| {
                        let pts = c.first(20)?;
                        let rep = action::verify_action(&s2, &a2, &pts)?;
                        Ok(Self::value(&id, rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
                    });
                    self.hamiltonian_checks(&prefix, &s2, &a2, &m2);
                }
                Err(e) => {
                    let id = format!("{prefix}.lcs");
                    self.run(&id, 0.0, "gauge", |_| Err(e));
                }
            }
        }
    }

    // ---- reduction ----

    fn reduction_checks(&mut self, cr: &CompiledReduction) {
        let prefix = format!("reduction.{}", cr.spec.id);
        if !self.wants_prefix(&prefix) {
            return;
        }
        let id_reg = format!("{prefix}.regularity");
        let reg_tol = self.floor("reduction.regularity", REGULARITY_TOL);
        let r = match Reduction::new(cr.structure.clone(), cr.action.clone(), cr.momentum.clone(), cr.spec.xi.clone()) {
            Ok(r) => r,
            Err(e) => {
                self.run(&id_reg, reg_tol, "reduction setup", |_| Err(e));
                return;
            }
        };
        let count = (self.count() / 2).max(20);
        let mut rng = self.rng(&format!("level/{}", cr.spec.id));
        let guard = cr.guard.clone();
        let witness = cr.witness.clone();
        let keep = |p: &[f64]| {
            guard.as_ref().is_none_or(|g| g.eval(p).is_ok_and(|v| v > 0.0))
                && witness.as_ref().is_none_or(|w| w.is_valid_at(p))
        };
        let sample = r.sample_level(&mut rng, count, self.sc.file.samples.radius, keep);
        let anchor = "d mu surjective on the level set";
        if cr.spec.expect == Expectation::Singular {
            let tol = self.tol("reduction.singular", REGULARITY_TOL);
            let anchor = "value is not regular";
            self.run(&id_reg, tol, anchor, |_| {
                let (sigma, point, note) = match sample {
                    Err(Error::RankDeficient { sigma }) => (sigma, vec![], "level set rejected: rank deficient"),
                    Err(Error::NonConvergence { residual, .. }) => (residual.min(0.0), vec![], "level set rejected: no convergence"),
                    Err(e) => return Err(e),
                    Ok(s) => {
                        let rep = r.regularity_check(&s.points)?;
                        (rep.sigma_min, rep.point, "sampled")
                    }
                };
                Ok(Self::value(&id_reg, sigma, Comparison::AtMost, tol, &point, anchor).with_note(note))
            });
            return;
        }
        let points = match sample {
            Ok(s) => s.points,
            Err(e) => {
                let note = format!("level set could not be sampled: {e}");
                if self.wants(&id_reg) {
                    let sigma = match e {
                        Error::RankDeficient { sigma } => sigma,
                        _ => 0.0,
                    };
                    self.push(Self::value(&id_reg, sigma, Comparison::AtLeast, reg_tol, &[], anchor).with_note(note));
                }
                return;
            }
        };
        self.run(&id_reg, reg_tol, anchor, |_| {
            let rep = r.regularity_check(&points)?;
            Ok(Self::value(&id_reg, rep.sigma_min, Comparison::AtLeast, reg_tol, &rep.point, anchor))
        });
        let id = format!("{prefix}.characteristic");
        let tol = self.tol("reduction.characteristic", 1e-8);
        let anchor = "span psi(g_xi) = T mu^-1(xi) ∩ (T mu^-1(xi))^omega";
        self.run(&id, tol, anchor, |_| {
            let mut r_ = Residual::new();
            let mut ambiguous = false;
            for p in &points {
                let cb = r.characteristic_basis(p.as_slice())?;
                ambiguous |= cb.ambiguous;
                r_.record(cb.angle, p.as_slice());
            }
            Ok(Self::at_most(&id, &r_, tol, anchor).flagged_if(ambiguous))
        });
        let id = format!("{prefix}.rank");
        let anchor = "rank F = dim g_xi, constant on the level set";
        self.run(&id, 0.0, anchor, |_| {
            let scan = r.rank_scan(&points)?;
            let mut bad = scan.mismatches + usize::from(!scan.constant());
            if let Some(want) = cr.spec.rank {
                if scan.rank() != Some(want) {
                    bad += 1;
                }
            }
            let note = format!(
                "ranks {:?}, stabilizer dims {:?}",
                scan.ranks.keys().collect::<Vec<_>>(),
                scan.stabilizer_dims.keys().collect::<Vec<_>>()
            );
            Ok(Self::value(&id, bad as f64, Comparison::AtMost, 0.0, &[], anchor)
                .with_note(note)
                .flagged_if(scan.ambiguous > 0))
        });
        if let Some(name) = &cr.spec.foliation_field {
            let id = format!("{prefix}.foliation_field");
            let tol = self.tol("reduction.characteristic", 1e-8);
            let anchor = "F is spanned by the closed-form field";
            let field = self.sc.field(name);
            self.run(&id, tol, anchor, |_| {
                let field = field?;
                let mut r_ = Residual::new();
                for p in &points {
                    let ps = p.as_slice();
                    let cb = r.characteristic_basis(ps)?;
                    let v = field.at(ps)?;
                    let vm = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
                    let angle = if cb.basis.ncols() != 1 {
                        f64::INFINITY
                    } else {
                        linalg::max_principal_angle(&cb.basis, &vm, RANK_REL_TOL)
                    };
                    r_.record(angle, ps);
                }
                Ok(Self::at_most(&id, &r_, tol, anchor))
            });
        }
        let id = format!("{prefix}.obstruction");
        match cr.spec.obstruction_at_least {
            Some(m) => {
                let anchor = "xi_a theta(X_b) - xi_b theta(X_a) is nonzero";
                self.run(&id, m, anchor, |_| {
                    let res = r.obstruction_check(&points)?;
                    Ok(Self::value(&id, res.max, Comparison::AtLeast, m, &res.worst_point, anchor))
                });
            }
            None => {
                let tol = self.tol("reduction.obstruction", 1e-9);
                let anchor = "xi_a theta(X_b) - xi_b theta(X_a) = 0";
                self.run(&id, tol, anchor, |_| {
                    let res = r.obstruction_check(&points)?;
                    Ok(Self::at_most(&id, &res, tol, anchor))
                });
            }
        }
        let id_b = format!("{prefix}.bracket");
        let id_x = format!("{prefix}.xi_bracket");
        if self.wants(&id_b) || self.wants(&id_x) {
            let tol_b = self.tol("reduction.bracket", 1e-8);
            let tol_x = self.tol("reduction.xi_bracket", 1e-12);
            let few: Vec<DVector<f64>> = points.iter().take(10).cloned().collect();
            match r.algebra_identities_check(&few) {
                Ok(rep) => {
                    let anchor = "[psi(a), psi(b)] + X_[a,b] = 0 on g_xi";
                    self.run(&id_b, tol_b, anchor, |_| {
                        Ok(Self::value(&id_b, rep.bracket_residual, Comparison::AtMost, tol_b, &rep.worst_point, anchor))
                    });
                    let anchor = "xi([a, b]) = 0 on g_xi";
                    self.run(&id_x, tol_x, anchor, |_| {
                        Ok(Self::value(&id_x, rep.xi_bracket_residual, Comparison::AtMost, tol_x, &[], anchor))
                    });
                }
                Err(e) => self.run(&id_b, tol_b, "algebra identities", |_| Err(e)),
            }
        }
        if self.sc.file.is_bridge() {
            let id = format!("{prefix}.theta_on_foliation");
            let tol = self.tol("reduction.theta_on_foliation", 1e-9);
            let anchor = "theta vanishes on F for contact-derived structures";
            self.run(&id, tol, anchor, |_| {
                let mut r_ = Residual::new();
                for p in &points {
                    let ps = p.as_slice();
                    let cb = r.characteristic_basis(ps)?;
                    let th = r.structure.theta.covector_at(ps)?;
                    r_.record((cb.basis.transpose() * th).amax(), ps);
                }
                Ok(Self::at_most(&id, &r_, tol, anchor))
            });
        }
        if let Some(leaf) = &cr.spec.leaf {
            let id_d = format!("{prefix}.leaf_tangency");
            let id_m = format!("{prefix}.leaf_momentum");
            let tol_d = self.tol("reduction.leaf_tangency", 1e-8);
            let tol_m = self.tol("reduction.leaf_momentum", 1e-8);
            if self.wants(&id_d) || self.wants(&id_m) || (leaf.closes && self.wants(&format!("{prefix}.leaf_closure"))) {
                match r.leaf_flow(&points[0], &leaf.a, leaf.time, leaf.steps) {
                    Ok(path) => {
                        let p0 = points[0].as_slice().to_vec();
                        let anchor = "leaf flow stays on the level set";
                        self.run(&id_d, tol_d, anchor, |_| {
                            Ok(Self::value(&id_d, path.max_drift, Comparison::AtMost, tol_d, &p0, anchor))
                        });
                        let anchor = "mu is constant along the leaf";
                        self.run(&id_m, tol_m, anchor, |_| {
                            Ok(Self::value(&id_m, path.max_mu_deviation, Comparison::AtMost, tol_m, &p0, anchor))
                        });
                        if leaf.closes {
                            let id = format!("{prefix}.leaf_closure");
                            let tol = self.tol("reduction.leaf_closure", 1e-6);
                            let anchor = "the leaf through the point is a closed orbit";
                            self.run(&id, tol, anchor, |_| {
                                let end = path.points.last().ok_or_else(|| Error::Invalid("empty leaf".into()))?;
                                Ok(Self::value(&id, (end - &points[0]).amax(), Comparison::AtMost, tol, &p0, anchor))
                            });
                        }
                    }
                    Err(e) => self.run(&id_d, tol_d, "leaf flow", |_| Err(e)),
                }
            }
        }
        if let Some(w) = &cr.witness {
            let id = format!("{prefix}.quotient");
            let tol = self.tol("reduction.quotient", 1e-8);
            let anchor = "pi^* omega_xi = e^f omega and pi^* theta_xi = theta + df on the level set";
            self.run(&id, tol, anchor, |_| {
                let few: Vec<DVector<f64>> = points.iter().take(20).cloned().collect();
                let rep = reduction::quotient_verify(&r, w, &few)?;
                Ok(Self::value(&id, rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
            });
            if let (Some((wq, vaisman)), Some(l)) = (&cr.lck_witness, &self.sc.lck) {
                let id = format!("{prefix}.lck_quotient");
                let id_n = format!("{prefix}.nijenhuis");
                if self.wants(&id) || self.wants(&id_n) {
                    let tol = self.tol("lck.quotient", 1e-8);
                    let tol_n = self.tol("lck.nijenhuis_quotient", 1e-7);
                    let g = l.g.scale(&cr.gauge.exp());
                    let few: Vec<DVector<f64>> = points.iter().take(10).cloned().collect();
                    match lck::lck_quotient_checks(&r, &l.j, &g, w, wq, *vaisman, &few) {
                        Ok(rep) => {
                            let anchor = "J and g descend to the quotient";
                            self.run(&id, tol, anchor, |_| {
                                let note = format!(
                                    "horizontal {:.1e}, holomorphic {:.1e}, complex {:.1e}, metric {:.1e}",
                                    rep.horizontal_invariance,
                                    rep.foliation_holomorphic,
                                    rep.complex_projection,
                                    rep.metric_projection
                                );
                                Ok(Self::value(&id, rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor).with_note(note))
                            });
                            let anchor = "pi_* N_J = N_{J_xi}";
                            self.run(&id_n, tol_n, anchor, |_| {
                                Ok(Self::value(&id_n, rep.nijenhuis_projection, Comparison::AtMost, tol_n, &rep.worst_point, anchor))
                            });
                        }
                        Err(e) => self.run(&id, tol, "LCK quotient", |_| Err(e)),
                    }
                }
            }
        }
    }

    fn sweep_checks(&mut self) {
        let (Some(s), Some(act), Some(m)) = (self.sc.lcs.clone(), self.sc.action.clone(), self.sc.momentum.clone())
        else {
            return;
        };
        for sw in self.sc.file.sweeps.clone() {
            let id = format!("reduction.sweep_{}", sw.id);
            let tol = self.floor("reduction.regularity", REGULARITY_TOL);
            let anchor = match sw.rejected_at {
                Some(_) => "a non-regular value is rejected",
                None => "regular, constant-rank sweep",
            };
            let seed = self.seed;
            let count = 20.min(self.count());
            let radius = self.sc.file.samples.radius;
            self.run(&id, tol, anchor, |_| {
                let mut path = Vec::new();
                match &sw.path {
                    SweepPath::Values { xi } => {
                        for x in xi {
                            let p = x.first().copied().unwrap_or(0.0);
                            path.push((p, Reduction::new(s.clone(), act.clone(), m.clone(), x.clone())?));
                        }
                    }
                    SweepPath::Gauges { xi, gauge, params } => {
                        let f = parse_expr(gauge, s.dim())?;
                        for &p in params {
                            let fp = f.substitute(&|v| (v == Var::S).then(|| Expr::num(p)));
                            path.push((
                                p,
                                Reduction::new(
                                    s.conformal_rescale(&fp)?,
                                    gauge_action(&act, &fp)?,
                                    action::rescaled_momentum(&m, &fp),
                                    xi.clone(),
                                )?,
                            ));
                        }
                    }
                }
                let result = reduction::sweep(path, seed, count, radius);
                match (result, sw.rejected_at) {
                    (Ok(rep), None) => {
                        let sigma = rep.steps.iter().map(|s| s.sigma_min).fold(f64::INFINITY, f64::min);
                        let mut c = Self::value(&id, sigma, Comparison::AtLeast, tol, &[], anchor).with_note(format!(
                            "{} steps, ranks {}",
                            rep.steps.len(),
                            rep.steps
                                .iter()
                                .map(|s| s.rank.map_or("varying".to_string(), |r| r.to_string()))
                                .collect::<Vec<_>>()
                                .join(" ")
                        ));
                        if !rep.passes() {
                            c.status = crate::report::Status::Fail;
                        }
                        Ok(c)
                    }
                    (Ok(_), Some(p)) => Ok(CheckResult::failed(
                        id.as_str(),
                        "reduction",
                        tol,
                        anchor,
                        format!("expected rejection at {p}, sweep passed"),
                    )),
                    (Err(Error::NonRegular { parameter, sigma }), Some(p)) => {
                        let hit = parameter.parse::<f64>().is_ok_and(|q| (q - p).abs() < 1e-12);
                        let mut c = Self::value(&id, sigma, Comparison::AtMost, tol, &[], anchor)
                            .with_note(format!("rejected at {parameter}"));
                        if !hit {
                            c.status = crate::report::Status::Fail;
                        }
                        Ok(c)
                    }
                    (Err(e), _) => Err(e),
                }
            });
        }
    }

    // ---- contact ----

    fn contact_checks(&mut self) {
        let Some(c) = self.sc.contact.clone() else { return };
        if self.wants("contact.nondegeneracy") || self.wants("contact.reeb") {
            let floor = self.floor("contact.nondegeneracy", contact::CONTACT_TOL);
            let tol = self.tol("contact.reeb", 1e-9);
            match self.contact_points().and_then(|pts| contact::verify_contact(&c, &pts)) {
                Ok(rep) => {
                    let anchor = "alpha ^ (d alpha)^k non-vanishing";
                    self.run("contact.nondegeneracy", floor, anchor, |_| {
                        Ok(Self::value("contact.nondegeneracy", rep.min_volume, Comparison::AtLeast, floor, &rep.worst_point, anchor))
                    });
                    let anchor = "i_R d alpha = 0, alpha(R) = 1";
                    self.run("contact.reeb", tol, anchor, |_| {
                        Ok(Self::value("contact.reeb", rep.reeb_residual, Comparison::AtMost, tol, &[], anchor))
                    });
                }
                Err(e) => self.run("contact.reeb", tol, "contact form", |_| Err(e)),
            }
        }
        if self.sc.file.is_bridge() {
            let n = c.dim();
            let tol = self.tol("contact.bridge_identity", 1e-9);
            let anchor = "(d_theta alpha)^{k+1} = -(k+1) theta ^ alpha ^ (d alpha)^k";
            let lifted = |pts: Vec<DVector<f64>>| -> Vec<DVector<f64>> {
                pts.iter()
                    .enumerate()
                    .map(|(i, p)| contact::lift_point(p.as_slice(), 0.4 + 1.3 * i as f64))
                    .collect()
            };
            self.run("contact.bridge_identity", tol, anchor, |cx| {
                let pts = lifted(cx.contact_points()?.into_iter().take(20).collect());
                let r = contact::bridge_identity_residual(&c, &pts)?;
                Ok(Self::at_most("contact.bridge_identity", &r, tol, anchor))
            });
            let s = self.sc.lcs.clone().expect("bridge structure");
            let tol = self.tol("contact.kernel_duality", 1e-8);
            let anchor = "(Ker theta)^omega = Ker d alpha";
            self.run("contact.kernel_duality", tol, anchor, |cx| {
                let pts = lifted(cx.contact_points()?.into_iter().take(20).collect());
                let r = vector_max(&pts, |q| contact::kernel_duality_angle(&s, &c, q))?;
                Ok(Self::at_most("contact.kernel_duality", &r, tol, anchor))
            });
            let tol = self.tol("contact.anti_lee_reeb", 1e-9);
            let anchor = "theta^omega = R and alpha(theta^omega) = 1";
            self.run("contact.anti_lee_reeb", tol, anchor, |cx| {
                let pts = lifted(cx.contact_points()?.into_iter().take(30).collect());
                let alpha = c.alpha.shift(2, n + 2);
                let r = vector_max(&pts, |q| {
                    let v = s.anti_lee_at(q)?;
                    let reeb = c.reeb_at(&q[2..])?;
                    let diff = (v.rows(2, n) - &reeb).amax().max(v.rows(0, 2).amax());
                    let a = (alpha.covector_at(q)?.dot(&v) - 1.0).abs();
                    Ok(diff.max(a))
                })?;
                Ok(Self::at_most("contact.anti_lee_reeb", &r, tol, anchor))
            });
        }
        let Some(act) = self.sc.contact_action.clone() else { return };
        let tol = self.tol("contact.invariance", 1e-9);
        let anchor = "L_{X_a} alpha = 0";
        self.run("contact.invariance", tol, anchor, |cx| {
            let pts: Vec<DVector<f64>> = cx.contact_points()?.into_iter().take(30).collect();
            let r = contact::invariance_residual(&c, &act, &pts)?;
            Ok(Self::at_most("contact.invariance", &r, tol, anchor))
        });
        let mu_c = MomentumData::new(act.fundamental_fields().iter().map(|x| c.alpha.pair(x)).collect());
        let tol = self.tol("action.equivariance", 1e-8);
        let anchor = "mu_C(g x) = Ad*(g) mu_C(x)";
        self.run("contact.equivariance", tol, anchor, |cx| {
            let per = 50usize.div_ceil(act.elements.len().max(1));
            let pts: Vec<DVector<f64>> = cx.contact_points()?.into_iter().take(per).collect();
            let r = action::equivariance_check(&act, &mu_c, &pts)?;
            Ok(Self::at_most("contact.equivariance", &r, tol, anchor))
        });
        if let (Some(m), true) = (self.sc.momentum.clone(), self.sc.file.is_bridge()) {
            let tol = self.tol("contact.momentum_sign", 1e-9);
            let anchor = "mu on S^1 x C is -mu_C";
            self.run("contact.momentum_sign", tol, anchor, |cx| {
                let pts: Vec<DVector<f64>> = cx.contact_points()?.into_iter().take(30).collect();
                let r = vector_max(&pts, |p| {
                    let q = contact::lift_point(p, 2.1);
                    Ok((m.at(q.as_slice())? + mu_c.at(p)?).amax())
                })?;
                Ok(Self::at_most("contact.momentum_sign", &r, tol, anchor))
            });
        }
        for cr in self.sc.contact_reductions.clone() {
            self.contact_reduction(&c, &act, &mu_c, &cr);
        }
        if let Some(g) = self.sc.sasaki_metric.clone() {
            let tol = self.tol("lck.sasaki", 1e-8);
            let anchor = "S^1 x C with the product metric is Vaisman";
            self.run("lck.sasaki", tol, anchor, |cx| {
                let pts: Vec<DVector<f64>> = cx.contact_points()?.into_iter().take(15).collect();
                let rep = lck::sasaki_check(&c, &g, &pts)?;
                Ok(Self::value("lck.sasaki", rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
            });
        }
    }

    fn contact_reduction(
        &mut self,
        c: &ContactStructure,
        act: &GroupAction,
        mu_c: &MomentumData,
        cr: &crate::scenario::CompiledContactReduction,
    ) {
        let prefix = format!("contact.reduction_{}", cr.spec.id);
        if !self.wants_prefix(&prefix) {
            return;
        }
        let n = c.dim();
        let level_eqs: Vec<Expr> = mu_c.rho.iter().zip(&cr.spec.xi).map(|(r, x)| r - *x).collect();
        let level = c.manifold.restrict(&level_eqs);
        let mut rng = self.rng(&format!("contact-level/{}", cr.spec.id));
        let guard = cr.guard.clone();
        let witness = cr.witness.clone();
        let count = (self.count() / 4).max(15);
        let pts = level.sample_where(&mut rng, count, self.sc.file.samples.radius, |p| {
            guard.as_ref().is_none_or(|g| g.eval(p).is_ok_and(|v| v > 0.0))
                && witness.as_ref().is_none_or(|w| w.valid_where.as_ref().is_none_or(|v| v.eval(p).is_ok_and(|x| x > 0.0)))
        });
        let pts = match pts {
            Ok(p) => p,
            Err(e) => {
                let id = format!("{prefix}.foliation");
                self.run(&id, 0.0, "contact level set", |_| Err(e));
                return;
            }
        };
        let id = format!("{prefix}.foliation");
        let tol = self.tol("contact.foliation", 1e-8);
        let anchor = "contact foliation matches the LCS characteristic distribution at -xi";
        self.run(&id, tol, anchor, |_| {
            let s = contact::lcs_from_contact(c)?;
            let ext = contact::extend_action(act, n)?;
            let neg: Vec<f64> = cr.spec.xi.iter().map(|x| -x).collect();
            let r = Reduction::new(s, ext, contact::product_momentum(mu_c), neg)?;
            let mut res = Residual::new();
            for (i, p) in pts.iter().enumerate() {
                let ps = p.as_slice();
                let fol = contact::contact_foliation_basis(c, act, mu_c, &cr.spec.xi, ps)?;
                let q = contact::lift_point(ps, 0.9 + 1.1 * i as f64);
                let cb = r.characteristic_basis(q.as_slice())?;
                let lifted = contact::lift_vectors(&fol.basis);
                let v = if lifted.ncols() != cb.basis.ncols() {
                    f64::INFINITY
                } else if lifted.ncols() == 0 {
                    0.0
                } else {
                    linalg::max_principal_angle(&lifted, &cb.basis, RANK_REL_TOL)
                };
                res.record(v, ps);
            }
            Ok(Self::at_most(&id, &res, tol, anchor))
        });
        if let Some(w) = &cr.witness {
            let id = format!("{prefix}.quotient");
            let tol = self.tol("contact.quotient", 1e-8);
            let anchor = "pi^* alpha_xi = alpha and the lifted LCS reduction agrees";
            self.run(&id, tol, anchor, |_| {
                let few: Vec<DVector<f64>> = pts.iter().take(12).cloned().collect();
                let rep = contact::contact_quotient_verify(c, act, &cr.spec.xi, w, &few)?;
                Ok(Self::value(&id, rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
            });
            if let Some(g) = &cr.reduced_metric {
                let id = format!("{prefix}.reduced_sasaki");
                let tol = self.tol("lck.sasaki", 1e-8);
                let anchor = "the reduced contact manifold is Sasaki";
                self.run(&id, tol, anchor, |cx| {
                    let red = w.reduced()?;
                    let mut rng = cx.rng(&format!("quotient/{}", cr.spec.id));
                    let qp = red.manifold.sample(&mut rng, 12, 1.0)?;
                    let rep = lck::sasaki_check(&red, g, &qp)?;
                    Ok(Self::value(&id, rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
                });
            }
        }
    }

    // ---- lck ----

    fn lck_checks(&mut self) {
        let (Some(s), Some(l)) = (self.sc.lcs.clone(), self.sc.lck.clone()) else { return };
        if self.wants("lck.compatibility") || self.wants("lck.metric_positive") {
            let tol = self.tol("lck.compatibility", 1e-9);
            let floor = self.floor("lck.metric_positive", 1e-8);
            match self.first(40).and_then(|pts| lck::lck_check(&s, &l.j, &l.g, &pts)) {
                Ok(rep) => {
                    let anchor = "g = omega(., J.), J^2 = -1, g J-invariant";
                    self.run("lck.compatibility", tol, anchor, |_| {
                        Ok(Self::value("lck.compatibility", rep.max(), Comparison::AtMost, tol, &rep.worst_point, anchor))
                    });
                    let anchor = "g positive definite on tangent spaces";
                    self.run("lck.metric_positive", floor, anchor, |_| {
                        Ok(Self::value("lck.metric_positive", rep.min_eigenvalue, Comparison::AtLeast, floor, &[], anchor))
                    });
                }
                Err(e) => self.run("lck.compatibility", tol, "LCK", |_| Err(e)),
            }
        }
        let tol = self.tol("lck.lee_relation", 1e-9);
        let anchor = "J theta^# = -theta^omega for g = omega(., J .)";
        self.run("lck.lee_relation", tol, anchor, |c| {
            let pts = c.first(40)?;
            let r = lck::lee_relation_check(&s, &l.j, &l.g, &pts)?;
            Ok(Self::at_most("lck.lee_relation", &r, tol, anchor))
        });
        let tol = self.tol("lck.integrability", 1e-9);
        let anchor = "N_J = 0";
        self.run("lck.integrability", tol, anchor, |c| {
            let pts = c.first(15)?;
            let r = lck::nijenhuis_residual(&s.manifold, &l.j, &pts)?;
            Ok(Self::at_most("lck.integrability", &r, tol, anchor))
        });
        let tol = self.tol("lck.holomorphic", 1e-8);
        let anchor = "L_{theta^#} J = 0";
        self.run("lck.lee_holomorphic", tol, anchor, |c| {
            let pts = c.first(10)?;
            let f = |q: &[f64]| lck::lee_at(&s, &l.g, q);
            let r = lck::holomorphic_residual_pointwise(&s.manifold, &l.j, &f, &pts)?;
            Ok(Self::at_most("lck.lee_holomorphic", &r, tol, anchor))
        });
        let anchor = "L_{theta^omega} J = 0";
        self.run("lck.anti_lee_holomorphic", tol, anchor, |c| {
            let pts = c.first(10)?;
            let f = |q: &[f64]| s.anti_lee_at(q);
            let r = lck::holomorphic_residual_pointwise(&s.manifold, &l.j, &f, &pts)?;
            Ok(Self::at_most("lck.anti_lee_holomorphic", &r, tol, anchor))
        });
        if l.vaisman {
            let tol = self.tol("lck.vaisman", 1e-8);
            let anchor = "theta^# is Killing";
            self.run("lck.vaisman", tol, anchor, |c| {
                let pts = c.first(10)?;
                let r = lck::vaisman_check(&s, &l.g, &pts)?;
                Ok(Self::at_most("lck.vaisman", &r, tol, anchor))
            });
        }
        for (id, field, pointwise) in [
            ("lck.lee_field", l.lee_field.clone(), true),
            ("lck.anti_lee_field", l.anti_lee_field.clone(), false),
        ] {
            let Some(field) = field else { continue };
            let tol = self.tol(id, 1e-9);
            let anchor = if pointwise { "theta^# in closed form" } else { "theta^omega in closed form" };
            self.run(id, tol, anchor, |c| {
                let pts = c.first(30)?;
                let r = vector_max(&pts, |q| {
                    let v = if pointwise { lck::lee_at(&s, &l.g, q)? } else { s.anti_lee_at(q)? };
                    Ok((v - field.at(q)?).amax())
                })?;
                Ok(Self::at_most(id, &r, tol, anchor))
            });
            let hid = format!("{id}_holomorphic");
            let tol = self.tol("lck.holomorphic", 1e-8);
            let anchor = "L_X J = 0 by the column formula and by flow conjugation";
            self.run(&hid, tol, anchor, |c| {
                let pts = c.first(8)?;
                let rep = lck::holomorphic_check(&s.manifold, &l.j, &field, &pts)?;
                Ok(Self::value(&hid, rep.algebraic, Comparison::AtMost, tol, &rep.worst_point, anchor)
                    .with_note(format!("flow estimate {:.2e}", rep.flow)))
            });
        }
    }

    // ---- expected values ----

    fn expected_check(&mut self, e: &ExpectedCheck) {
        let module = match &e.kind {
            ExpectedKind::MomentumEquals { .. }
            | ExpectedKind::MomentumAt { .. }
            | ExpectedKind::FiberRotation { .. }
            | ExpectedKind::CotangentLift { .. }
            | ExpectedKind::MapInvariance { .. } => "action",
            ExpectedKind::ContactMomentumEquals { .. } | ExpectedKind::ReebEquals { .. } => "contact",
            ExpectedKind::AntiLeeEquals { .. } | ExpectedKind::FormOnAntiLee { .. } => "lcs",
            ExpectedKind::DEquals { .. }
            | ExpectedKind::LieZero { .. }
            | ExpectedKind::InteriorExact { .. }
            | ExpectedKind::BracketEquals { .. }
            | ExpectedKind::PushforwardCombination { .. } => "calculus",
            ExpectedKind::ZeroSetEquivalence { .. } => "reduction",
            ExpectedKind::LeeEquals { .. } | ExpectedKind::NegativeControl { .. } => "lck",
        };
        let id = format!("{module}.{}", e.id);
        let negative = matches!(e.kind, ExpectedKind::NegativeControl { .. });
        let tol = if negative {
            e.tolerance
        } else {
            e.tolerance * self.opts.tolerance_scale
        };
        let anchor = e.anchor.clone();
        self.run(&id, tol, &anchor, |c| {
            let cmp = if negative { Comparison::AtLeast } else { Comparison::AtMost };
            let r = c.expected_value(&e.kind)?;
            Ok(Self::value(&id, r.max, cmp, tol, &r.worst_point, &anchor))
        });
    }

    fn structure(&self) -> Result<&LcsStructure> {
        self.sc.lcs.as_ref().ok_or_else(|| Error::Invalid("no LCS structure".into()))
    }

    fn flow_map(&self, flow: usize) -> Result<DiffeoMap> {
        let act = self.sc.action.as_ref().ok_or_else(|| Error::Invalid("no action".into()))?;
        if flow == 0 || flow > act.flows.len() {
            return Err(Error::Invalid(format!("no flow {flow}")));
        }
        Ok(act.flows[flow - 1].map.clone())
    }

    fn expected_value(&mut self, kind: &ExpectedKind) -> Result<Residual> {
        let dim = self.sc.file.lcs_dim();
        match kind {
            ExpectedKind::MomentumEquals { component, expr } => {
                let m = self.sc.momentum.clone().ok_or_else(|| Error::Invalid("no momentum".into()))?;
                let rho = m.rho.get(component.wrapping_sub(1)).cloned().ok_or_else(|| Error::Invalid("bad component".into()))?;
                let target = parse_expr(expr, dim)?;
                let pts = self.lcs_points()?;
                vector_max(&pts, |p| Ok((rho.eval(p)? - target.eval(p)?).abs()))
            }
            ExpectedKind::MomentumAt { component, point, value } => {
                let m = self.sc.momentum.clone().ok_or_else(|| Error::Invalid("no momentum".into()))?;
                let rho = m.rho.get(component.wrapping_sub(1)).ok_or_else(|| Error::Invalid("bad component".into()))?;
                let mut r = Residual::new();
                r.record((rho.eval(point)? - value).abs(), point);
                Ok(r)
            }
            ExpectedKind::ContactMomentumEquals { component, expr } => {
                let c = self.sc.contact.clone().ok_or_else(|| Error::Invalid("no contact structure".into()))?;
                let act = self.sc.contact_action.clone().ok_or_else(|| Error::Invalid("no contact action".into()))?;
                let x = act
                    .fundamental_fields()
                    .get(component.wrapping_sub(1))
                    .ok_or_else(|| Error::Invalid("bad component".into()))?;
                let mu = c.alpha.pair(x);
                let target = parse_expr(expr, c.dim())?;
                let pts = self.contact_points()?;
                vector_max(&pts, |p| Ok((mu.eval(p)? - target.eval(p)?).abs()))
            }
            ExpectedKind::AntiLeeEquals { field } => {
                let s = self.structure()?.clone();
                let f = self.sc.field(field)?;
                let pts = self.lcs_points()?;
                vector_max(&pts, |p| Ok((s.anti_lee_at(p)? - f.at(p)?).amax()))
            }
            ExpectedKind::LeeEquals { field } => {
                let s = self.structure()?.clone();
                let l = self.sc.lck.clone().ok_or_else(|| Error::Invalid("no LCK data".into()))?;
                let f = self.sc.field(field)?;
                let pts = self.first(40)?;
                vector_max(&pts, |p| Ok((lck::lee_at(&s, &l.g, p)? - f.at(p)?).amax()))
            }
            ExpectedKind::FormOnAntiLee { form, value } => {
                let s = self.structure()?.clone();
                let a = self.sc.form(form)?;
                let pts = self.lcs_points()?;
                vector_max(&pts, |p| Ok((a.covector_at(p)?.dot(&s.anti_lee_at(p)?) - value).abs()))
            }
            ExpectedKind::ReebEquals { field } => {
                let c = self.sc.contact.clone().ok_or_else(|| Error::Invalid("no contact structure".into()))?;
                let f = self.sc.field(field)?;
                let pts = self.contact_points()?;
                vector_max(&pts, |p| Ok((c.reeb_at(p)? - f.at(p)?).amax()))
            }
            ExpectedKind::DEquals { form, target } => {
                let s = self.structure()?.clone();
                let a = self.sc.form(form)?.d().sub(&self.sc.form(target)?);
                let pts = self.first(40)?;
                tangent_max(&a, &s.manifold, &pts)
            }
            ExpectedKind::LieZero { field, form } => {
                let s = self.structure()?.clone();
                let a = self.sc.form(form)?.lie_derivative(&self.sc.field(field)?);
                let pts = self.first(40)?;
                tangent_max(&a, &s.manifold, &pts)
            }
            ExpectedKind::InteriorExact { field, form, potential } => {
                let s = self.structure()?.clone();
                let f = parse_expr(potential, dim)?;
                let a = self.sc.form(form)?.interior(&self.sc.field(field)?).sub(&KForm::exact(dim, &f));
                let pts = self.first(40)?;
                tangent_max(&a, &s.manifold, &pts)
            }
            ExpectedKind::BracketEquals { x, y, target, scale } => {
                let b = self.sc.field(x)?.bracket(&self.sc.field(y)?);
                let t = self.sc.field(target)?;
                let pts = self.first(40)?;
                vector_max(&pts, |p| Ok((b.at(p)? - t.at(p)? * *scale).amax()))
            }
            ExpectedKind::PushforwardCombination { flow, t, field, combination } => {
                let map = self.flow_map(*flow)?;
                let f = self.sc.field(field)?;
                let combo = combination
                    .iter()
                    .map(|(name, coeff)| Ok((self.sc.field(name)?, parse_expr(coeff, dim)?)))
                    .collect::<Result<Vec<_>>>()?;
                let pts = self.first(20)?;
                let mut r = Residual::new();
                for &tv in t {
                    let m = map.at_t(tv);
                    for p in &pts {
                        let ps = p.as_slice();
                        let y = m.at(ps)?;
                        let v = f.at(ps)?;
                        let mut rhs = DVector::zeros(y.len());
                        for (g, c) in &combo {
                            rhs += g.at(y.as_slice())? * c.eval_with(ps, Params { t: tv, s: 0.0 })?;
                        }
                        let jac = m.jacobian_at(ps)? * &v;
                        let mut fd = DVector::zeros(y.len());
                        for k in 0..y.len() {
                            fd[k] = flow::five_point(
                                |h| Ok(m.comps[k].eval((p + &v * h).as_slice())?),
                                1e-3,
                            )?;
                        }
                        r.record((&jac - &rhs).amax().max((&fd - &rhs).amax()), ps);
                    }
                }
                Ok(r)
            }
            ExpectedKind::FiberRotation { flow, t, coords, rate } => {
                let map = self.flow_map(*flow)?;
                let [a, b] = [coords[0].wrapping_sub(1), coords[1].wrapping_sub(1)];
                if a >= dim || b >= dim {
                    return Err(Error::Invalid("fiber coordinates out of range".into()));
                }
                let pts = self.first(30)?;
                let mut r = Residual::new();
                for &tv in t {
                    let m = map.at_t(tv);
                    let (sn, cs) = (rate * tv).sin_cos();
                    for p in &pts {
                        let ps = p.as_slice();
                        let y = m.at(ps)?;
                        let ea = cs * ps[a] - sn * ps[b];
                        let eb = sn * ps[a] + cs * ps[b];
                        r.record((y[a] - ea).abs().max((y[b] - eb).abs()), ps);
                    }
                }
                Ok(r)
            }
            ExpectedKind::CotangentLift { flow, t, frame, fiber } => {
                let map = self.flow_map(*flow)?;
                let frames = frame.iter().map(|n| self.sc.field(n)).collect::<Result<Vec<_>>>()?;
                if frames.len() != fiber.len() || fiber.iter().any(|&i| i == 0 || i > dim) {
                    return Err(Error::Invalid("frame and fiber coordinates do not match".into()));
                }
                let fiber: Vec<usize> = fiber.iter().map(|i| i - 1).collect();
                let pts = self.first(20)?;
                let mut r = Residual::new();
                for &tv in t {
                    let fwd = map.at_t(tv);
                    let back = map.at_t(-tv);
                    for p in &pts {
                        let ps = p.as_slice();
                        let y = fwd.at(ps)?;
                        let ys = y.as_slice();
                        let jb = back.jacobian_at(ys)?;
                        let fp: Vec<DVector<f64>> = frames.iter().map(|f| f.at(ps)).collect::<Result<_>>()?;
                        let mut worst: f64 = 0.0;
                        for (i, fi) in frames.iter().enumerate() {
                            let mut u = &jb * fi.at(ys)?;
                            for &k in &fiber {
                                u[k] = 0.0;
                            }
                            let lifted: f64 = fp.iter().zip(&fiber).map(|(fj, &k)| ps[k] * fj.dot(&u)).sum();
                            worst = worst.max((lifted - ys[fiber[i]]).abs());
                        }
                        r.record(worst, ps);
                    }
                }
                Ok(r)
            }
            ExpectedKind::MapInvariance { map, field, rank } => {
                let s = self.structure()?.clone();
                let m = DiffeoMap::new(dim, parse_exprs(map, dim)?);
                let f = self.sc.field(field)?;
                let pts = self.first(30)?;
                vector_max(&pts, |p| {
                    let j = m.jacobian_at(p)?;
                    let along = (&j * f.at(p)?).amax();
                    let b = s.manifold.tangent_basis(p)?;
                    let (span, _) = linalg::span(&(&j * b), RANK_REL_TOL);
                    let bad = if span.ncols() == *rank { 0.0 } else { 1.0 };
                    Ok(along.max(bad))
                })
            }
            ExpectedKind::ZeroSetEquivalence { f, g } => {
                let s = self.structure()?.clone();
                let fe = parse_expr(f, dim)?;
                let ge = parse_expr(g, dim)?;
                let mut r = Residual::new();
                for (label, zero, other) in [("zero-f", &fe, &ge), ("zero-g", &ge, &fe)] {
                    let m = s.manifold.restrict(std::slice::from_ref(zero));
                    let mut rng = self.rng(label);
                    let pts = sample_sphere_like(&m, &mut rng, 30, self.sc.file.samples.radius, self.sc.guard.as_ref())?;
                    for p in &pts {
                        r.record(other.eval(p.as_slice())?.abs(), p.as_slice());
                    }
                }
                Ok(r)
            }
            ExpectedKind::NegativeControl { control } => self.negative_control(control),
        }
    }

    fn negative_control(&mut self, control: &NegativeControl) -> Result<Residual> {
        let dim = self.sc.file.lcs_dim();
        let needs_j = || {
            self.sc
                .lck
                .clone()
                .ok_or_else(|| Error::Invalid("negative control needs LCK data".into()))
        };
        match control {
            NegativeControl::MetricNotInvariant { g } => {
                let l = needs_j()?;
                let s = self.structure()?.clone();
                let g = parse_matrix(g, dim)?;
                let pts = self.first(20)?;
                let rep = lck::lck_check(&s, &l.j, &g, &pts)?;
                Ok(Residual {
                    max: rep.invariance,
                    worst_point: rep.worst_point,
                })
            }
            NegativeControl::MetricNotKilling { g } => {
                let s = self.structure()?.clone();
                let g = parse_matrix(g, dim)?;
                let pts = self.first(10)?;
                lck::vaisman_check(&s, &g, &pts)
            }
            NegativeControl::FieldNotHolomorphic { field } => {
                let l = needs_j()?;
                let s = self.structure()?.clone();
                let f = self.sc.field(field)?;
                let pts = self.first(10)?;
                let rep = lck::holomorphic_check(&s.manifold, &l.j, &f, &pts)?;
                Ok(Residual {
                    max: rep.algebraic,
                    worst_point: rep.worst_point,
                })
            }
            NegativeControl::SasakiMetric { g_c } => {
                let c = self.sc.contact.clone().ok_or_else(|| Error::Invalid("no contact structure".into()))?;
                let g = parse_matrix(g_c, c.dim())?;
                let pts: Vec<DVector<f64>> = self.contact_points()?.into_iter().take(10).collect();
                let rep = lck::sasaki_check(&c, &g, &pts)?;
                Ok(Residual {
                    max: rep.max(),
                    worst_point: rep.worst_point,
                })
            }
        }
    }
}

/// `max |[X_a, X_b] + X_[a,b]|` over basis pairs.
fn bracket_residual(act: &GroupAction, pts: &[DVector<f64>]) -> Result<Residual> {
    let k = act.algebra.dim;
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let (mut ea, mut eb) = (vec![0.0; k], vec![0.0; k]);
            ea[a] = 1.0;
            eb[b] = 1.0;
            let lhs = act.fundamental_field(a).bracket(act.fundamental_field(b));
            pairs.push(lhs.add(&act.field_of(&act.algebra.bracket(&ea, &eb))));
        }
    }
    vector_max(pts, |p| pairs.iter().try_fold(0.0, |m: f64, v| Ok(m.max(v.at(p)?.amax()))))
}
