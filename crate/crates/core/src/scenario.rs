//! The scenario file format and its compilation into geometric objects.
//!
//! Coordinates are 1-based in files (`x1..xN`, form indices `[1, 2]`).
//! For a contact structure with `bridge: true`, the constraints, `alpha`,
//! the action and `contact_reductions` live on `C` (dimension
//! `ambient_dim`), while gauges, fields, forms, momentum, reductions,
//! sweeps and `lck` live on `S^1 x C` (dimension `ambient_dim + 2`, circle
//! first).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::{Flow, GroupAction, GroupElement, LieAlgebra, MomentumData};
use crate::calculus::{DiffeoMap, KForm, VectorField};
use crate::contact::{self, ContactStructure, ContactWitness};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lck::{LckWitness, MatrixField};
use crate::lcs::LcsStructure;
use crate::manifold::ConstrainedManifold;
use crate::reduction::QuotientWitness;

pub const SCHEMA_VERSION: u32 = 1;

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub ambient_dim: usize,
    #[serde(default)]
    pub constraints: Vec<String>,
    pub structure: StructureSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebra: Option<AlgebraSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionSpec>,
    /// `rho_a` per basis element; derived from the contact momentum when
    /// absent on a bridge scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub gauges: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fields: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forms: BTreeMap<String, FormSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reductions: Vec<ReductionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contact_reductions: Vec<ContactReductionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lck: Option<LckSpec>,
    /// Metric on `C` for a Sasaki check (contact scenarios).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sasaki_metric: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<H0Spec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
    pub samples: SampleSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<ExpectedCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StructureSpec {
    Lcs {
        omega: FormSpec,
        theta: FormSpec,
        /// Declared class of `theta`; the H^0 probe expects no solutions
        /// when `false`.
        #[serde(default, skip_serializing_if = "is_false")]
        theta_exact: bool,
    },
    Contact {
        alpha: FormSpec,
        #[serde(default, skip_serializing_if = "is_false")]
        bridge: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSpec {
    pub degree: usize,
    #[serde(default)]
    pub terms: Vec<FormTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormTerm {
    pub idx: Vec<usize>,
    pub coeff: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub dim: usize,
    pub structure_constants: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus_periods: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    /// One flow per basis element, in `x` and `t`.
    pub flows: Vec<FlowSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub elements: Vec<ElementSpec>,
    /// `[i, j, k]` (1-based): element `k` equals element `i` times element `j`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<[usize; 3]>,
    /// Elements `exp(t e_i)` taken from the flows, as `[i, t]` with 1-based `i`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flow_samples: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub map: Vec<String>,
    #[serde(default = "zero_string")]
    pub cocycle: String,
}

fn zero_string() -> String {
    "0".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub label: String,
    pub log: Vec<f64>,
    pub map: Vec<String>,
    pub inverse: Vec<String>,
    #[serde(default = "zero_string")]
    pub cocycle: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Regular,
    Singular,
}

fn regular() -> Expectation {
    Expectation::Regular
}

fn is_regular(e: &Expectation) -> bool {
    *e == Expectation::Regular
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionSpec {
    pub id: String,
    pub xi: Vec<f64>,
    /// Name of a gauge `f`: reduce `(e^f omega, theta + df)` with momentum `e^f mu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<String>,
    #[serde(default = "regular", skip_serializing_if = "is_regular")]
    pub expect: Expectation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Expect a nonzero obstruction `xi ^ theta(X)` of at least this size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstruction_at_least: Option<f64>,
    /// Sample the level set only where this expression is positive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lck_witness: Option<LckWitnessSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<LeafSpec>,
    /// Field whose span must equal the characteristic distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub foliation_field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSpec {
    pub projection: Vec<String>,
    pub quotient_dim: usize,
    #[serde(default)]
    pub quotient_constraints: Vec<String>,
    pub omega: FormSpec,
    pub theta: FormSpec,
    #[serde(default = "zero_string")]
    pub gauge: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_where: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LckWitnessSpec {
    pub j: Vec<Vec<String>>,
    pub g: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub vaisman: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafSpec {
    pub a: Vec<f64>,
    pub time: f64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "is_false")]
    pub closes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactReductionSpec {
    pub id: String,
    pub xi: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<ContactWitnessSpec>,
    /// Metric on the reduced contact manifold for a Sasaki check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_metric: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactWitnessSpec {
    pub projection: Vec<String>,
    pub quotient_dim: usize,
    #[serde(default)]
    pub quotient_constraints: Vec<String>,
    pub alpha: FormSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_where: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub id: String,
    #[serde(flatten)]
    pub path: SweepPath,
    /// The sweep is expected to be rejected at this parameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected_at: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepPath {
    /// Values of `xi`; the reported parameter is the first component.
    Values { xi: Vec<Vec<f64>> },
    /// Gauges `f_s` at a fixed `xi`, with `s` substituted for the symbol `s`.
    Gauges { xi: Vec<f64>, gauge: String, params: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LckSpec {
    pub j: Vec<Vec<String>>,
    pub g: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub vaisman: bool,
    /// Closed-form Lee and anti-Lee fields, checked against the computed ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lee_field: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anti_lee_field: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct H0Spec {
    pub basis: Vec<String>,
    /// `Some(m)`: expect the minimum residual to be at least `m`.
    /// `None`: expect a solution (residual at most the tolerance).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_residual: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCheck {
    pub id: String,
    pub anchor: String,
    pub tolerance: f64,
    #[serde(flatten)]
    pub kind: ExpectedKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectedKind {
    /// `rho_a` equals a closed form at manifold samples.
    MomentumEquals { component: usize, expr: String },
    /// `rho_a` at a given point.
    MomentumAt { component: usize, point: Vec<f64>, value: f64 },
    /// `mu_C` component equals a closed form on `C`.
    ContactMomentumEquals { component: usize, expr: String },
    /// `theta^omega` equals a named field.
    AntiLeeEquals { field: String },
    /// `theta^#` equals a named field (needs `lck`).
    LeeEquals { field: String },
    /// A named 1-form evaluated on `theta^omega`.
    FormOnAntiLee { form: String, value: f64 },
    /// The Reeb field of `C` equals a named field in `C` coordinates.
    ReebEquals { field: String },
    /// `d(form) = target`, where target is a form name or `omega`.
    DEquals { form: String, target: String },
    /// `L_X form = 0`.
    LieZero { field: String, form: String },
    /// `i_X form = d(potential)`.
    InteriorExact { field: String, form: String, potential: String },
    /// `[x, y] = scale * target`.
    BracketEquals { x: String, y: String, target: String, scale: f64 },
    /// `(flow_t)_* field = sum c_i field_i` at each `t`, by the symbolic
    /// Jacobian and by finite differences of the flow.
    PushforwardCombination { flow: usize, t: Vec<f64>, field: String, combination: Vec<(String, String)> },
    /// Fiber coordinates `[a, b]` of the flow rotate by `rate * t`.
    FiberRotation { flow: usize, t: Vec<f64>, coords: [usize; 2], rate: f64 },
    /// The flow on fiber coordinates is the cotangent lift of its base part,
    /// for the coframe dual to the named base fields.
    CotangentLift { flow: usize, t: Vec<f64>, frame: Vec<String>, fiber: Vec<usize> },
    /// `D map . field = 0` on samples and `D map` has the given rank on tangent spaces.
    MapInvariance { map: Vec<String>, field: String, rank: usize },
    /// On `{f = 0}` samples `g` vanishes and on `{g = 0}` samples `f` vanishes.
    ZeroSetEquivalence { f: String, g: String },
    /// A perturbed object that must be detected with residual at least `tolerance`.
    NegativeControl { control: NegativeControl },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "control", rename_all = "snake_case")]
pub enum NegativeControl {
    /// `lck_check` with the scenario `J` and this metric.
    MetricNotInvariant { g: Vec<Vec<String>> },
    /// Killing residual of `theta^#` for this metric.
    MetricNotKilling { g: Vec<Vec<String>> },
    /// `L_X J` for the scenario `J`.
    FieldNotHolomorphic { field: String },
    /// `sasaki_check` on `C` with this metric.
    SasakiMetric { g_c: Vec<Vec<String>> },
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ScenarioFile = serde_json::from_str(text)?;
        if f.version != SCHEMA_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                f.version
            )));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn is_bridge(&self) -> bool {
        matches!(self.structure, StructureSpec::Contact { bridge: true, .. })
    }

    pub fn is_contact(&self) -> bool {
        matches!(self.structure, StructureSpec::Contact { .. })
    }

    /// Dimension of the space carrying the LCS structure.
    pub fn lcs_dim(&self) -> usize {
        if self.is_bridge() {
            self.ambient_dim + 2
        } else {
            self.ambient_dim
        }
    }
}

pub fn parse_expr(text: &str, dim: usize) -> Result<Expr> {
    Ok(Expr::parse_in(text, dim)?)
}

pub fn parse_exprs(texts: &[String], dim: usize) -> Result<Vec<Expr>> {
    texts.iter().map(|t| parse_expr(t, dim)).collect()
}

pub fn parse_form(spec: &FormSpec, dim: usize) -> Result<KForm> {
    if spec.degree > dim {
        return Err(Error::Dimension(format!("degree {} exceeds dimension {dim}", spec.degree)));
    }
    let mut terms = Vec::with_capacity(spec.terms.len());
    for t in &spec.terms {
        if t.idx.len() != spec.degree {
            return Err(Error::Dimension(format!(
                "form term {:?} does not have {} indices",
                t.idx, spec.degree
            )));
        }
        if t.idx.iter().any(|&i| i == 0 || i > dim) {
            return Err(Error::Dimension(format!("form index out of range in {:?}", t.idx)));
        }
        let idx: Vec<usize> = t.idx.iter().map(|i| i - 1).collect();
        terms.push((idx, parse_expr(&t.coeff, dim)?));
    }
    Ok(KForm::from_terms(dim, spec.degree, terms))
}

pub fn form_spec(a: &KForm) -> FormSpec {
    FormSpec {
        degree: a.degree(),
        terms: a
            .terms()
            .filter(|(_, c)| !c.is_zero())
            .map(|(idx, c)| FormTerm {
                idx: idx.iter().map(|i| i + 1).collect(),
                coeff: c.to_string(),
            })
            .collect(),
    }
}

pub fn parse_matrix(rows: &[Vec<String>], dim: usize) -> Result<MatrixField> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Dimension(format!("matrix field must be {dim} x {dim}")));
    }
    let entries = rows.iter().map(|r| parse_exprs(r, dim)).collect::<Result<_>>()?;
    MatrixField::new(entries)
}

pub fn parse_field(comps: &[String], dim: usize) -> Result<VectorField> {
    if comps.len() != dim {
        return Err(Error::Dimension(format!(
            "field has {} components, expected {dim}",
            comps.len()
        )));
    }
    Ok(VectorField::new(parse_exprs(comps, dim)?))
}

fn parse_manifold(constraints: &[String], dim: usize) -> Result<ConstrainedManifold> {
    Ok(ConstrainedManifold::new(dim, parse_exprs(constraints, dim)?))
}

/// A compiled reduction: the structure it runs on and its witnesses.
#[derive(Clone, Debug)]
pub struct CompiledReduction {
    pub spec: ReductionSpec,
    pub structure: LcsStructure,
    pub action: GroupAction,
    pub momentum: MomentumData,
    pub gauge: Expr,
    pub guard: Option<Expr>,
    pub witness: Option<QuotientWitness>,
    pub lck_witness: Option<(LckWitness, bool)>,
}

#[derive(Clone, Debug)]
pub struct CompiledContactReduction {
    pub spec: ContactReductionSpec,
    pub guard: Option<Expr>,
    pub witness: Option<ContactWitness>,
    pub reduced_metric: Option<MatrixField>,
}

#[derive(Clone, Debug)]
pub struct CompiledLck {
    pub j: MatrixField,
    pub g: MatrixField,
    pub vaisman: bool,
    pub lee_field: Option<VectorField>,
    pub anti_lee_field: Option<VectorField>,
}

/// A scenario with every expression parsed and every structure built.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// The LCS structure (the product `S^1 x C` for bridge scenarios).
    pub lcs: Option<LcsStructure>,
    pub contact: Option<ContactStructure>,
    /// Action on the LCS ambient space.
    pub action: Option<GroupAction>,
    /// Action on `C` for contact scenarios.
    pub contact_action: Option<GroupAction>,
    pub momentum: Option<MomentumData>,
    pub gauges: BTreeMap<String, Expr>,
    pub fields: BTreeMap<String, VectorField>,
    pub forms: BTreeMap<String, KForm>,
    pub reductions: Vec<CompiledReduction>,
    pub contact_reductions: Vec<CompiledContactReduction>,
    pub lck: Option<CompiledLck>,
    pub sasaki_metric: Option<MatrixField>,
    pub guard: Option<Expr>,
}

fn compile_action(spec: &ActionSpec, alg: &LieAlgebra, dim: usize) -> Result<GroupAction> {
    let flows = spec
        .flows
        .iter()
        .map(|f| {
            if f.map.len() != dim {
                return Err(Error::Dimension(format!(
                    "flow has {} components, expected {dim}",
                    f.map.len()
                )));
            }
            Ok(Flow::new(
                DiffeoMap::new(dim, parse_exprs(&f.map, dim)?),
                parse_expr(&f.cocycle, dim)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut act = GroupAction::new(alg.clone(), flows)?;
    let mut elements = Vec::new();
    for e in &spec.elements {
        if e.log.len() != alg.dim || e.map.len() != dim || e.inverse.len() != dim {
            return Err(Error::Dimension(format!("element {} has inconsistent sizes", e.label)));
        }
        elements.push(GroupElement {
            label: e.label.clone(),
            log: e.log.clone(),
            map: DiffeoMap::new(dim, parse_exprs(&e.map, dim)?).with_inverse(parse_exprs(&e.inverse, dim)?),
            cocycle: parse_expr(&e.cocycle, dim)?,
        });
    }
    let mut pairs: Vec<(usize, usize, usize)> = spec
        .pairs
        .iter()
        .map(|[i, j, k]| {
            if *i == 0 || *j == 0 || *k == 0 {
                return Err(Error::Invalid("element pairs are 1-based".into()));
            }
            Ok((i - 1, j - 1, k - 1))
        })
        .collect::<Result<_>>()?;
    if !spec.flow_samples.is_empty() {
        for &(i, _) in &spec.flow_samples {
            if i == 0 || i > alg.dim {
                return Err(Error::Invalid(format!("flow sample refers to missing flow {i}")));
            }
        }
        let samples: Vec<(usize, f64)> = spec.flow_samples.iter().map(|&(i, t)| (i - 1, t)).collect();
        let generated = act.clone().with_flow_elements(&samples)?;
        let base = elements.len();
        elements.extend(generated.elements.iter().cloned());
        pairs.extend(generated.pairs.iter().map(|&(i, j, k)| (i + base, j + base, k + base)));
    }
    act = act.with_elements(elements, pairs)?;
    Ok(act)
}

/// Action adjusted for the gauge `f`: cocycles become `phi + f o g - f`.
pub fn gauge_action(act: &GroupAction, f: &Expr) -> Result<GroupAction> {
    if f.is_zero() {
        return Ok(act.clone());
    }
    let flows = act
        .flows
        .iter()
        .map(|fl| Flow::new(fl.map.clone(), &fl.cocycle + f.compose(&fl.map.comps) - f))
        .collect();
    let elements = act
        .elements
        .iter()
        .map(|g| GroupElement {
            cocycle: &g.cocycle + f.compose(&g.map.comps) - f,
            ..g.clone()
        })
        .collect();
    GroupAction::new(act.algebra.clone(), flows)?.with_elements(elements, act.pairs.clone())
}

impl Scenario {
    pub fn compile(file: ScenarioFile) -> Result<Self> {
        let n = file.ambient_dim;
        if n == 0 {
            return Err(Error::Invalid("ambient_dim must be positive".into()));
        }
        let base = parse_manifold(&file.constraints, n)?;
        let dim = file.lcs_dim();
        let algebra = match &file.algebra {
            Some(a) => {
                if a.structure_constants.len() != a.dim {
                    return Err(Error::Dimension("structure constants do not match the algebra dimension".into()));
                }
                let mut alg = LieAlgebra::new(a.structure_constants.clone())?;
                alg.torus_periods = a.torus_periods.clone();
                Some(alg)
            }
            None => None,
        };
        if file.action.is_some() != algebra.is_some() {
            return Err(Error::Invalid("action and algebra must be given together".into()));
        }
        let (lcs, contact, contact_action, action) = match &file.structure {
            StructureSpec::Lcs { omega, theta, .. } => {
                let s = LcsStructure::new(base.clone(), parse_form(omega, n)?, parse_form(theta, n)?)?;
                let act = match (&file.action, &algebra) {
                    (Some(a), Some(alg)) => Some(compile_action(a, alg, n)?),
                    _ => None,
                };
                (Some(s), None, None, act)
            }
            StructureSpec::Contact { alpha, bridge } => {
                let c = ContactStructure::new(base.clone(), parse_form(alpha, n)?)?;
                let cact = match (&file.action, &algebra) {
                    (Some(a), Some(alg)) => Some(compile_action(a, alg, n)?),
                    _ => None,
                };
                let (s, act) = if *bridge {
                    let s = contact::lcs_from_contact(&c)?;
                    let act = match &cact {
                        Some(a) => {
                            let ext = contact::extend_action(a, n)?;
                            // elements are extended alongside the flows
                            let elements = a
                                .elements
                                .iter()
                                .map(|g| {
                                    let mut comps = vec![Expr::x(0), Expr::x(1)];
                                    comps.extend(g.map.comps.iter().map(|e| e.shift_coords(2)));
                                    let mut inv = vec![Expr::x(0), Expr::x(1)];
                                    if let Some(i) = &g.map.inverse {
                                        inv.extend(i.iter().map(|e| e.shift_coords(2)));
                                    }
                                    GroupElement {
                                        label: g.label.clone(),
                                        log: g.log.clone(),
                                        map: DiffeoMap::new(n + 2, comps).with_inverse(inv),
                                        cocycle: g.cocycle.shift_coords(2),
                                    }
                                })
                                .collect();
                            Some(ext.with_elements(elements, a.pairs.clone())?)
                        }
                        None => None,
                    };
                    (Some(s), act)
                } else {
                    (None, None)
                };
                (s, Some(c), cact, act)
            }
        };
        let momentum = match (&file.momentum, &action) {
            (Some(rho), Some(act)) => {
                if rho.len() != act.algebra.dim {
                    return Err(Error::Dimension("momentum has the wrong number of components".into()));
                }
                Some(MomentumData::new(parse_exprs(rho, dim)?))
            }
            (Some(_), None) => return Err(Error::Invalid("momentum given without an action".into())),
            (None, Some(_)) if file.is_bridge() => {
                let c = contact.as_ref().expect("contact structure");
                let cact = contact_action.as_ref().expect("contact action");
                let mu_c = MomentumData::new(cact.fundamental_fields().iter().map(|x| c.alpha.pair(x)).collect());
                Some(contact::product_momentum(&mu_c))
            }
            _ => None,
        };
        let gauges = file
            .gauges
            .iter()
            .map(|(k, v)| Ok((k.clone(), parse_expr(v, dim)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let mut fields = BTreeMap::new();
        for (k, v) in &file.fields {
            fields.insert(k.clone(), VectorField::new(parse_exprs(v, v.len())?));
        }
        let forms = file
            .forms
            .iter()
            .map(|(k, v)| Ok((k.clone(), parse_form(v, dim)?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let guard = file.samples.guard.as_ref().map(|g| parse_expr(g, dim)).transpose()?;

        let mut reductions = Vec::new();
        for r in &file.reductions {
            let (s, act, m) = match (&lcs, &action, &momentum) {
                (Some(s), Some(a), Some(m)) => (s, a, m),
                _ => return Err(Error::Invalid(format!("reduction {} needs an LCS structure, action and momentum", r.id))),
            };
            let gauge = match &r.gauge {
                Some(name) => gauges
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::Invalid(format!("unknown gauge {name}")))?,
                None => Expr::zero(),
            };
            let witness = r.witness.as_ref().map(|w| compile_witness(w, dim)).transpose()?;
            let lck_witness = r
                .lck_witness
                .as_ref()
                .map(|w| {
                    let qd = r.witness.as_ref().map(|x| x.quotient_dim).unwrap_or(dim);
                    Ok::<_, Error>((
                        LckWitness {
                            j: parse_matrix(&w.j, qd)?,
                            g: parse_matrix(&w.g, qd)?,
                        },
                        w.vaisman,
                    ))
                })
                .transpose()?;
            if lck_witness.is_some() && witness.is_none() {
                return Err(Error::Invalid(format!("reduction {}: lck_witness needs a witness", r.id)));
            }
            if r.xi.len() != act.algebra.dim {
                return Err(Error::Dimension(format!("reduction {}: xi has the wrong length", r.id)));
            }
            reductions.push(CompiledReduction {
                spec: r.clone(),
                structure: s.conformal_rescale(&gauge)?,
                action: gauge_action(act, &gauge)?,
                momentum: crate::action::rescaled_momentum(m, &gauge),
                guard: r.guard.as_ref().map(|g| parse_expr(g, dim)).transpose()?,
                gauge,
                witness,
                lck_witness,
            });
        }
        let mut contact_reductions = Vec::new();
        for r in &file.contact_reductions {
            if contact_action.is_none() {
                return Err(Error::Invalid(format!("contact reduction {} needs a contact action", r.id)));
            }
            let witness = r
                .witness
                .as_ref()
                .map(|w| {
                    Ok::<_, Error>(ContactWitness {
                        projection: DiffeoMap::new(n, parse_exprs(&w.projection, n)?),
                        quotient: parse_manifold(&w.quotient_constraints, w.quotient_dim)?,
                        reduced_alpha: parse_form(&w.alpha, w.quotient_dim)?,
                        valid_where: w.valid_where.as_ref().map(|g| parse_expr(g, n)).transpose()?,
                    })
                })
                .transpose()?;
            let qd = r.witness.as_ref().map(|w| w.quotient_dim).unwrap_or(n);
            contact_reductions.push(CompiledContactReduction {
                spec: r.clone(),
                guard: r.guard.as_ref().map(|g| parse_expr(g, n)).transpose()?,
                witness,
                reduced_metric: r.reduced_metric.as_ref().map(|m| parse_matrix(m, qd)).transpose()?,
            });
        }
        let lck = file
            .lck
            .as_ref()
            .map(|l| {
                let named = |name: &Option<String>| -> Result<Option<VectorField>> {
                    match name {
                        Some(n) => fields
                            .get(n)
                            .cloned()
                            .map(Some)
                            .ok_or_else(|| Error::Invalid(format!("unknown field {n}"))),
                        None => Ok(None),
                    }
                };
                Ok::<_, Error>(CompiledLck {
                    j: parse_matrix(&l.j, dim)?,
                    g: parse_matrix(&l.g, dim)?,
                    vaisman: l.vaisman,
                    lee_field: named(&l.lee_field)?,
                    anti_lee_field: named(&l.anti_lee_field)?,
                })
            })
            .transpose()?;
        if file.sasaki_metric.is_some() && contact.is_none() {
            return Err(Error::Invalid("sasaki_metric needs a contact structure".into()));
        }
        let sasaki_metric = file.sasaki_metric.as_ref().map(|m| parse_matrix(m, n)).transpose()?;
        Ok(Scenario {
            file,
            lcs,
            contact,
            action,
            contact_action,
            momentum,
            gauges,
            fields,
            forms,
            reductions,
            contact_reductions,
            lck,
            sasaki_metric,
            guard,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    /// A named field, or the fundamental field `X<k>` of the action.
    pub fn field(&self, name: &str) -> Result<VectorField> {
        if let Some(f) = self.fields.get(name) {
            return Ok(f.clone());
        }
        if let Some(k) = name.strip_prefix('X').and_then(|k| k.parse::<usize>().ok()) {
            if let Some(act) = &self.action {
                if k >= 1 && k <= act.algebra.dim {
                    return Ok(act.fundamental_field(k - 1).clone());
                }
            }
        }
        Err(Error::Invalid(format!("unknown field {name}")))
    }

    /// A named form, or `omega` / `theta` of the LCS structure.
    pub fn form(&self, name: &str) -> Result<KForm> {
        if let Some(f) = self.forms.get(name) {
            return Ok(f.clone());
        }
        match (name, &self.lcs) {
            ("omega", Some(s)) => Ok(s.omega.clone()),
            ("theta", Some(s)) => Ok(s.theta.clone()),
            _ => Err(Error::Invalid(format!("unknown form {name}"))),
        }
    }
}

fn compile_witness(w: &WitnessSpec, src: usize) -> Result<QuotientWitness> {
    if w.projection.len() != w.quotient_dim {
        return Err(Error::Dimension("witness projection does not match the quotient dimension".into()));
    }
    Ok(QuotientWitness {
        projection: DiffeoMap::new(src, parse_exprs(&w.projection, src)?),
        quotient: parse_manifold(&w.quotient_constraints, w.quotient_dim)?,
        reduced_omega: parse_form(&w.omega, w.quotient_dim)?,
        reduced_theta: parse_form(&w.theta, w.quotient_dim)?,
        gauge: parse_expr(&w.gauge, src)?,
        valid_where: w.valid_where.as_ref().map(|g| parse_expr(g, src)).transpose()?,
    })
}
