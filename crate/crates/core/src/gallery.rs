//! Built-in scenarios with closed-form expected values and quotient witnesses.
//!
//! Complex coordinates are interleaved: `z_j = x_{2j-1} + i x_{2j}`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

use crate::calculus::KForm;
use crate::contact::{angular_form, standard_alpha};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::lck::MatrixField;
use crate::scenario::*;

/// Names in the registry, in listing order.
pub const NAMES: [&str; 11] = [
    "cn_standard",
    "cn_conformal",
    "blowup_action",
    "hopf",
    "hopf_fibered",
    "sphere_contact",
    "sphere_contact_weighted",
    "cotangent_s1s3",
    "fixture_affine_plane",
    "fixture_affine_cotangent",
    "fixture_torus_conformal",
];

pub fn scenario_file(name: &str) -> Result<ScenarioFile> {
    let f = match name {
        "cn_standard" => cn_standard(),
        "cn_conformal" => cn_conformal(),
        "blowup_action" => blowup_action(),
        "hopf" => hopf(),
        "hopf_fibered" => hopf_fibered(),
        "sphere_contact" => sphere_contact(),
        "sphere_contact_weighted" => sphere_contact_weighted(),
        "cotangent_s1s3" => cotangent_s1s3(),
        "fixture_affine_plane" => affine_plane(),
        "fixture_affine_cotangent" => affine_cotangent(),
        "fixture_torus_conformal" => torus_conformal(),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    Ok(f)
}

pub fn load_example(name: &str) -> Result<Scenario> {
    Scenario::compile(scenario_file(name)?)
}

/// The scenario's table of closed-form expectations.
pub fn expected_checks(name: &str) -> Result<Vec<ExpectedCheck>> {
    Ok(scenario_file(name)?.expected)
}

fn x(i: usize) -> Expr {
    Expr::x(i)
}

fn strs(es: &[Expr]) -> Vec<String> {
    es.iter().map(|e| e.to_string()).collect()
}

fn norm2(range: std::ops::Range<usize>) -> Expr {
    Expr::sum(range.map(|i| x(i).powi(2)))
}

/// `-2 sum dx ^ dy` over the complex pairs starting at `offset`.
fn omega0(dim: usize, offset: usize) -> KForm {
    let terms = (offset..dim)
        .step_by(2)
        .map(|j| (vec![j, j + 1], Expr::num(-2.0)))
        .collect();
    KForm::from_terms(dim, 2, terms)
}

/// Rotation of each listed complex pair by `weight * t`.
fn rotation(dim: usize, pairs: &[(usize, f64)]) -> Vec<Expr> {
    let mut comps: Vec<Expr> = (0..dim).map(x).collect();
    for &(j, w) in pairs {
        let (c, s) = ((w * Expr::t()).cos(), (w * Expr::t()).sin());
        comps[j] = &c * x(j) - &s * x(j + 1);
        comps[j + 1] = &s * x(j) + &c * x(j + 1);
    }
    comps
}

fn circle_algebra() -> AlgebraSpec {
    AlgebraSpec {
        dim: 1,
        structure_constants: vec![vec![vec![0.0]]],
        torus_periods: Some(vec![2.0 * PI]),
    }
}

fn flow(map: Vec<Expr>, cocycle: Expr) -> FlowSpec {
    FlowSpec {
        map: strs(&map),
        cocycle: cocycle.to_string(),
    }
}

fn circle_action(map: Vec<Expr>, cocycle: Expr) -> ActionSpec {
    ActionSpec {
        flows: vec![flow(map, cocycle)],
        elements: vec![],
        pairs: vec![],
        flow_samples: vec![(1, 0.4), (1, 1.1), (1, -0.7), (1, 2.5), (1, 3.9)],
    }
}

fn samples(count: usize, radius: f64) -> SampleSpec {
    SampleSpec {
        count,
        seed: 7,
        radius,
        guard: None,
    }
}

fn lcs(omega: &KForm, theta: &KForm, theta_exact: bool) -> StructureSpec {
    StructureSpec::Lcs {
        omega: form_spec(omega),
        theta: form_spec(theta),
        theta_exact,
    }
}

fn check(id: &str, anchor: &str, tolerance: f64, kind: ExpectedKind) -> ExpectedCheck {
    ExpectedCheck {
        id: id.into(),
        anchor: anchor.into(),
        tolerance,
        kind,
    }
}

fn reduction(id: &str, xi: Vec<f64>) -> ReductionSpec {
    ReductionSpec {
        id: id.into(),
        xi,
        gauge: None,
        expect: Expectation::Regular,
        rank: None,
        obstruction_at_least: None,
        guard: None,
        witness: None,
        lck_witness: None,
        leaf: None,
        foliation_field: None,
    }
}

fn base_file(name: &str, description: &str, dim: usize, structure: StructureSpec) -> ScenarioFile {
    ScenarioFile {
        version: SCHEMA_VERSION,
        name: name.into(),
        description: description.into(),
        ambient_dim: dim,
        constraints: vec![],
        structure,
        algebra: None,
        action: None,
        momentum: None,
        gauges: BTreeMap::new(),
        fields: BTreeMap::new(),
        forms: BTreeMap::new(),
        reductions: vec![],
        contact_reductions: vec![],
        sweeps: vec![],
        lck: None,
        sasaki_metric: None,
        h0: None,
        tolerances: BTreeMap::new(),
        samples: samples(100, 1.0),
        expected: vec![],
    }
}

fn matrix(m: &MatrixField) -> Vec<Vec<String>> {
    m.to_strings()
}

/// `-i` on interleaved pairs starting at `offset`.
fn minus_i(dim: usize, offset: usize) -> MatrixField {
    MatrixField::from_fn(dim, |r, c| {
        if r < offset || c < offset {
            return Expr::zero();
        }
        let (pr, pc) = ((r - offset) / 2, (c - offset) / 2);
        if pr != pc {
            Expr::zero()
        } else if (r - offset) % 2 == 0 && (c - offset) % 2 == 1 {
            Expr::one()
        } else if (r - offset) % 2 == 1 && (c - offset) % 2 == 0 {
            Expr::num(-1.0)
        } else {
            Expr::zero()
        }
    })
}

/// `+i` on interleaved pairs starting at `offset`.
fn plus_i(dim: usize, offset: usize) -> MatrixField {
    minus_i(dim, offset).scale(&Expr::num(-1.0))
}

fn diag(dim: usize, f: impl Fn(usize) -> Expr) -> MatrixField {
    MatrixField::from_fn(dim, |r, c| if r == c { f(r) } else { Expr::zero() })
}

fn field(comps: Vec<Expr>) -> Vec<String> {
    strs(&comps)
}

fn coordinate_field(dim: usize, i: usize) -> Vec<String> {
    let mut v = vec![Expr::zero(); dim];
    v[i] = Expr::one();
    strs(&v)
}

/// `z_2 / z_1` as `(u, v)`.
fn cp1_chart() -> Vec<Expr> {
    let r = x(0).powi(2) + x(1).powi(2);
    vec![
        (x(0) * x(2) + x(1) * x(3)) / &r,
        (x(0) * x(3) - x(1) * x(2)) / &r,
    ]
}

fn fubini_study(eps: f64) -> KForm {
    let q = (1.0 + x(0).powi(2) + x(1).powi(2)).powi(2);
    KForm::from_terms(2, 2, vec![(vec![0, 1], -2.0 * eps / q)])
}

fn cn_standard() -> ScenarioFile {
    let dim = 4;
    let mut f = base_file(
        "cn_standard",
        "C^2 with omega_0 and the diagonal circle action",
        dim,
        lcs(&omega0(dim, 0), &KForm::zero(dim, 1), true),
    );
    let norm = norm2(0..dim);
    f.algebra = Some(circle_algebra());
    f.action = Some(circle_action(rotation(dim, &[(0, 1.0), (2, 1.0)]), Expr::zero()));
    f.momentum = Some(vec![norm.to_string()]);
    f.gauges.insert("log_radius".into(), (-norm.ln()).to_string());
    f.forms.insert(
        "eta".into(),
        form_spec(&KForm::one_form(vec![x(1), -x(0), x(3), -x(2)])),
    );
    f.fields.insert("x1_radial".into(), field(vec![x(0), Expr::zero(), Expr::zero(), Expr::zero()]));

    for (id, eps) in [("unit", 1.0), ("two", 2.0)] {
        let mut r = reduction(id, vec![eps]);
        r.rank = Some(1);
        r.witness = Some(WitnessSpec {
            projection: strs(&cp1_chart()),
            quotient_dim: 2,
            quotient_constraints: vec![],
            omega: form_spec(&fubini_study(eps)),
            theta: form_spec(&KForm::zero(2, 1)),
            gauge: "0".into(),
            valid_where: Some("x1^2 + x2^2 - 0.1".into()),
        });
        let q = 1.0 + x(0).powi(2) + x(1).powi(2);
        r.lck_witness = Some(LckWitnessSpec {
            j: matrix(&minus_i(2, 0)),
            g: matrix(&diag(2, |_| 2.0 * eps / q.powi(2))),
            vaisman: false,
        });
        if id == "unit" {
            r.leaf = Some(LeafSpec {
                a: vec![1.0],
                time: 2.0 * PI,
                steps: 400,
                closes: true,
            });
        }
        f.reductions.push(r);
    }
    let mut origin = reduction("origin", vec![0.0]);
    origin.expect = Expectation::Singular;
    f.reductions.push(origin);
    let mut log = reduction("log_radius", vec![1.0]);
    log.gauge = Some("log_radius".into());
    log.expect = Expectation::Singular;
    f.reductions.push(log);

    f.sweeps.push(SweepSpec {
        id: "xi_path".into(),
        path: SweepPath::Values {
            xi: (0..=10).map(|k| vec![1.0 + 0.1 * k as f64]).collect(),
        },
        rejected_at: None,
    });
    f.sweeps.push(SweepSpec {
        id: "zero_injected".into(),
        path: SweepPath::Values {
            xi: vec![vec![1.0], vec![0.5], vec![0.0]],
        },
        rejected_at: Some(0.0),
    });
    f.lck = Some(LckSpec {
        j: matrix(&minus_i(dim, 0)),
        g: matrix(&diag(dim, |_| Expr::num(2.0))),
        vaisman: true,
        lee_field: None,
        anti_lee_field: None,
    });
    f.expected = vec![
        check(
            "momentum_at_unit_vector",
            "mu(z) = |z|^2",
            1e-12,
            ExpectedKind::MomentumAt {
                component: 1,
                point: vec![1.0, 0.0, 0.0, 0.0],
                value: 1.0,
            },
        ),
        check(
            "momentum_norm_squared",
            "mu(z) = |z|^2",
            1e-9,
            ExpectedKind::MomentumEquals {
                component: 1,
                expr: norm.to_string(),
            },
        ),
        check(
            "eta_primitive",
            "omega_0 = d eta, eta = -sum (x dy - y dx)",
            1e-12,
            ExpectedKind::DEquals {
                form: "eta".into(),
                target: "omega".into(),
            },
        ),
        check(
            "eta_invariant",
            "L_{X_1} eta = 0",
            1e-12,
            ExpectedKind::LieZero {
                field: "X1".into(),
                form: "eta".into(),
            },
        ),
        check(
            "interior_exact",
            "i_{X_1} omega_0 = d |z|^2",
            1e-12,
            ExpectedKind::InteriorExact {
                field: "X1".into(),
                form: "omega".into(),
                potential: norm.to_string(),
            },
        ),
        check(
            "non_holomorphic_field_detected",
            "x1 d/dx1 does not preserve J",
            0.1,
            ExpectedKind::NegativeControl {
                control: NegativeControl::FieldNotHolomorphic {
                    field: "x1_radial".into(),
                },
            },
        ),
    ];
    f
}

fn cn_conformal() -> ScenarioFile {
    let dim = 4;
    let fexpr = 0.5 * x(0) + 0.3 * x(1) * x(2);
    let ef = fexpr.exp();
    let mut f = base_file(
        "cn_conformal",
        "C^2 with e^f omega_0, theta = df, f = 0.5 x1 + 0.3 x2 x3",
        dim,
        lcs(&omega0(dim, 0).scale(&ef), &KForm::exact(dim, &fexpr), true),
    );
    let map = rotation(dim, &[(0, 1.0), (2, 1.0)]);
    let cocycle = fexpr.compose(&map) - &fexpr;
    f.algebra = Some(circle_algebra());
    f.action = Some(circle_action(map, cocycle));
    f.momentum = Some(vec![(&ef * norm2(0..dim)).to_string()]);
    // psi = X_1 + xi e^{-f} Y_f with i_{Y_f} omega_0 = df
    let xi = 1.0;
    let grad: Vec<Expr> = (0..dim).map(|i| fexpr.diff(crate::expr::Var::Coord(i))).collect();
    let xfield = [-x(1), x(0), -x(3), x(2)];
    let w = xi * (-&fexpr).exp();
    let mut psi = Vec::with_capacity(dim);
    for j in (0..dim).step_by(2) {
        psi.push(&xfield[j] + &w * (-0.5 * &grad[j + 1]));
        psi.push(&xfield[j + 1] + &w * (0.5 * &grad[j]));
    }
    f.fields.insert("psi_closed".into(), field(psi));
    let mut r = reduction("unit", vec![xi]);
    r.rank = Some(1);
    r.foliation_field = Some("psi_closed".into());
    f.reductions.push(r);
    f.expected = vec![check(
        "momentum_rescaled",
        "mu_f = e^f |z|^2",
        1e-9,
        ExpectedKind::MomentumEquals {
            component: 1,
            expr: (&ef * norm2(0..dim)).to_string(),
        },
    )];
    f
}

fn blowup_action() -> ScenarioFile {
    let dim = 6;
    let mut f = base_file(
        "blowup_action",
        "C x C^2 with the action (e^{-it} w, e^{it} z)",
        dim,
        lcs(&omega0(dim, 0), &KForm::zero(dim, 1), true),
    );
    let mu = norm2(2..6) - norm2(0..2);
    f.algebra = Some(circle_algebra());
    f.action = Some(circle_action(rotation(dim, &[(0, -1.0), (2, 1.0), (4, 1.0)]), Expr::zero()));
    f.momentum = Some(vec![mu.to_string()]);
    let mut r = reduction("unit", vec![1.0]);
    r.rank = Some(1);
    f.reductions.push(r);
    f.expected = vec![check(
        "momentum_difference",
        "mu(w, z) = |z|^2 - |w|^2",
        1e-9,
        ExpectedKind::MomentumEquals { component: 1, expr: mu.to_string() },
    )];
    f
}

/// Contact sphere `S^{dim-1}` with the standard form.
fn contact_sphere(name: &str, description: &str, dim: usize, bridge: bool) -> ScenarioFile {
    let mut f = base_file(
        name,
        description,
        dim,
        StructureSpec::Contact {
            alpha: form_spec(&standard_alpha(dim)),
            bridge,
        },
    );
    f.constraints = vec![(norm2(0..dim) - 1.0).to_string()];
    f.algebra = Some(circle_algebra());
    let pairs: Vec<(usize, f64)> = (0..dim).step_by(2).map(|j| (j, 1.0)).collect();
    f.action = Some(circle_action(rotation(dim, &pairs), Expr::zero()));
    f
}

/// Complex structure of the Hopf manifold `S^1 x S^{2n-1}` in ambient form:
/// `J w = -theta(w) R + alpha(w) V + i w_C + alpha(w) q / |q|^2`.
pub fn hopf_complex_structure(dim_c: usize) -> MatrixField {
    let dim = dim_c + 2;
    let rho2 = norm2(2..dim);
    let theta = angular_form(dim);
    let alpha = standard_alpha(dim_c).shift(2, dim);
    let col = |k: &KForm| -> Vec<Expr> { (0..dim).map(|i| k.coefficient(&[i])).collect() };
    let (th, al) = (col(&theta), col(&alpha));
    let mut reeb = vec![Expr::zero(); dim];
    let mut v = vec![Expr::zero(); dim];
    let mut q = vec![Expr::zero(); dim];
    v[0] = -x(1);
    v[1] = x(0);
    for j in (2..dim).step_by(2) {
        reeb[j] = -x(j + 1) / &rho2;
        reeb[j + 1] = x(j) / &rho2;
        q[j] = x(j) / &rho2;
        q[j + 1] = x(j + 1) / &rho2;
    }
    let neg_reeb: Vec<Expr> = reeb.iter().map(|e| -e).collect();
    plus_i(dim, 2)
        .add(&MatrixField::outer(&neg_reeb, &th))
        .add(&MatrixField::outer(&v, &al))
        .add(&MatrixField::outer(&q, &al))
}

/// `theta (x) theta + 2 Eucl + (1 - 2/|q|^2) alpha (x) alpha` on `S^1 x S^{2n-1}`.
pub fn hopf_metric(dim_c: usize) -> MatrixField {
    let dim = dim_c + 2;
    let theta = angular_form(dim);
    let alpha = standard_alpha(dim_c).shift(2, dim);
    let col = |k: &KForm| -> Vec<Expr> { (0..dim).map(|i| k.coefficient(&[i])).collect() };
    let (th, al) = (col(&theta), col(&alpha));
    let c = 1.0 - 2.0 / norm2(2..dim);
    MatrixField::outer(&th, &th)
        .add(&diag(dim, |i| if i < 2 { Expr::zero() } else { Expr::num(2.0) }))
        .add(&MatrixField::outer(&al, &al).scale(&c))
}

/// Contact metric `2 Eucl + (1 - 2/rho^2) alpha (x) alpha` on a sphere of radius `rho`.
fn sphere_sasaki_metric(dim: usize, rho2: f64) -> MatrixField {
    let al: Vec<Expr> = (0..dim).map(|i| standard_alpha(dim).coefficient(&[i])).collect();
    diag(dim, |_| Expr::num(2.0)).add(&MatrixField::outer(&al, &al).scale(&Expr::num(1.0 - 2.0 / rho2)))
}

fn hopf() -> ScenarioFile {
    let dim_c = 4;
    let dim = dim_c + 2;
    let mut f = contact_sphere("hopf", "Hopf manifold S^1 x S^3 from the contact sphere", dim_c, true);
    f.gauges.insert("x2".into(), "x2".into());
    let mut reeb = vec![Expr::zero(); dim];
    for j in (2..dim).step_by(2) {
        reeb[j] = -x(j + 1);
        reeb[j + 1] = x(j);
    }
    f.fields.insert("reeb".into(), field(reeb));
    let mut lee = vec![Expr::zero(); dim];
    lee[0] = -x(1);
    lee[1] = x(0);
    f.fields.insert("lee".into(), field(lee));
    f.forms.insert("alpha".into(), form_spec(&standard_alpha(dim_c).shift(2, dim)));

    let mut plain = reduction("plain", vec![-1.0]);
    plain.expect = Expectation::Singular;
    f.reductions.push(plain);

    let mut r = reduction("gauged", vec![-1.0]);
    r.gauge = Some("x2".into());
    r.rank = Some(1);
    r.foliation_field = Some("reeb".into());
    // (x1, Hopf map) onto S^0 x S^2
    let (a, b, c, d) = (x(2), x(3), x(4), x(5));
    let hopf_map = [
        2.0 * (&a * &c + &b * &d),
        2.0 * (&b * &c - &a * &d),
        a.powi(2) + b.powi(2) - c.powi(2) - d.powi(2),
    ];
    let mut proj = vec![x(0)];
    proj.extend(hopf_map.iter().cloned());
    let y = |i: usize| Expr::x(i);
    let sigma = KForm::from_terms(
        4,
        2,
        vec![
            (vec![2, 3], y(1).clone()),
            (vec![3, 1], y(2).clone()),
            (vec![1, 2], y(3).clone()),
        ],
    );
    r.witness = Some(WitnessSpec {
        projection: strs(&proj),
        quotient_dim: 4,
        quotient_constraints: vec!["x1^2 - 1".into(), "x2^2 + x3^2 + x4^2 - 1".into()],
        omega: form_spec(&sigma.scale(&Expr::num(-0.5))),
        theta: form_spec(&KForm::zero(4, 1)),
        gauge: "0".into(),
        valid_where: None,
    });
    // J_N v = -y x v, g_N = Eucl / 2
    let jn = MatrixField::new(vec![
        vec![Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero()],
        vec![Expr::zero(), Expr::zero(), y(3), -y(2)],
        vec![Expr::zero(), -y(3), Expr::zero(), y(1)],
        vec![Expr::zero(), y(2), -y(1), Expr::zero()],
    ])
    .expect("square");
    r.lck_witness = Some(LckWitnessSpec {
        j: matrix(&jn),
        g: matrix(&diag(4, |_| Expr::num(0.5))),
        vaisman: false,
    });
    r.leaf = Some(LeafSpec {
        a: vec![1.0],
        time: 2.0 * PI,
        steps: 400,
        closes: true,
    });
    f.reductions.push(r);

    f.sweeps.push(SweepSpec {
        id: "gauge_path".into(),
        path: SweepPath::Gauges {
            xi: vec![-1.0],
            gauge: "x2 + s*x1".into(),
            params: vec![0.0, 0.1, 0.2, 0.3],
        },
        rejected_at: None,
    });
    let g = hopf_metric(dim_c);
    f.lck = Some(LckSpec {
        j: matrix(&hopf_complex_structure(dim_c)),
        g: matrix(&g),
        vaisman: true,
        lee_field: Some("lee".into()),
        anti_lee_field: Some("reeb".into()),
    });
    let mut monomials = vec![Expr::one()];
    for i in 0..dim {
        monomials.push(x(i));
        for j in i..dim {
            if (i, j) != (1, 1) && (i, j) != (5, 5) {
                monomials.push(x(i) * x(j));
            }
        }
    }
    f.h0 = Some(H0Spec {
        basis: strs(&monomials),
        min_residual: Some(0.1),
    });
    let bump = diag(dim, |i| if i == 2 { Expr::num(0.5) } else { Expr::zero() });
    f.expected = vec![
        check(
            "alpha_of_anti_lee",
            "alpha(theta^omega) = 1",
            1e-9,
            ExpectedKind::FormOnAntiLee { form: "alpha".into(), value: 1.0 },
        ),
        check(
            "anti_lee_is_reeb",
            "theta^omega is the Reeb field",
            1e-9,
            ExpectedKind::AntiLeeEquals { field: "reeb".into() },
        ),
        check(
            "momentum_minus_one",
            "mu = -1 on the Hopf manifold",
            1e-9,
            ExpectedKind::MomentumEquals { component: 1, expr: "-1".into() },
        ),
        check(
            "contact_momentum_one",
            "mu_C = 1 on the sphere",
            1e-9,
            ExpectedKind::ContactMomentumEquals { component: 1, expr: "1".into() },
        ),
        check(
            "lee_is_circle_field",
            "theta^# is the unit circle field",
            1e-9,
            ExpectedKind::LeeEquals { field: "lee".into() },
        ),
        check(
            "non_invariant_metric_detected",
            "g + dx3^2/2 is not J-invariant",
            0.1,
            ExpectedKind::NegativeControl {
                control: NegativeControl::MetricNotInvariant { g: matrix(&g.add(&bump)) },
            },
        ),
        check(
            "non_killing_metric_detected",
            "theta^# is not Killing for e^{x1} g",
            0.1,
            ExpectedKind::NegativeControl {
                control: NegativeControl::MetricNotKilling {
                    g: matrix(&g.scale(&x(0).exp())),
                },
            },
        ),
    ];
    f
}

fn hopf_fibered() -> ScenarioFile {
    let dim_c = 6;
    let dim = dim_c + 2;
    let mut f = contact_sphere(
        "hopf_fibered",
        "S^1 x S^5 reduced along the gauge Re(z1 conj z2) / |z|^2",
        dim_c,
        true,
    );
    let re = x(2) * x(4) + x(3) * x(5);
    let gauge = &re / norm2(2..dim);
    f.gauges.insert("fibered".into(), gauge.to_string());
    f.samples.count = 100;
    let mut r = reduction("fibered", vec![-1.0]);
    r.gauge = Some("fibered".into());
    r.rank = Some(1);
    r.guard = Some("x3^2 + x4^2 + x5^2 + x6^2 - 0.1".into());
    f.reductions.push(r);
    f.samples.guard = Some("x3^2 + x4^2 + x5^2 + x6^2 - 0.1".into());
    f.expected = vec![check(
        "zero_set_equivalence",
        "f^-1(0) is the set Re(z1 conj z2) = 0",
        1e-10,
        ExpectedKind::ZeroSetEquivalence {
            f: gauge.to_string(),
            g: re.to_string(),
        },
    )];
    f
}

fn sphere_contact() -> ScenarioFile {
    let dim = 4;
    let mut f = contact_sphere("sphere_contact", "S^3 with the standard contact form", dim, false);
    f.fields.insert(
        "iq".into(),
        field(vec![-x(1), x(0), -x(3), x(2)]),
    );
    f.sasaki_metric = Some(matrix(&sphere_sasaki_metric(dim, 1.0)));
    let bad = sphere_sasaki_metric(dim, 1.0).add(&diag(dim, |i| if i == 0 { Expr::num(1.0) } else { Expr::zero() }));
    f.expected = vec![
        check(
            "reeb_is_iq",
            "R = i q on the unit sphere",
            1e-9,
            ExpectedKind::ReebEquals { field: "iq".into() },
        ),
        check(
            "contact_momentum_one",
            "mu_C = 1",
            1e-9,
            ExpectedKind::ContactMomentumEquals { component: 1, expr: "1".into() },
        ),
        check(
            "non_sasaki_metric_detected",
            "a metric not invariant under the Reeb flow is not Sasaki",
            0.1,
            ExpectedKind::NegativeControl {
                control: NegativeControl::SasakiMetric { g_c: matrix(&bad) },
            },
        ),
    ];
    f
}

fn sphere_contact_weighted() -> ScenarioFile {
    let dim = 6;
    let mut f = contact_sphere(
        "sphere_contact_weighted",
        "S^5 with the circle rotating z1 only, reduced at xi = 1/2",
        dim,
        false,
    );
    f.action = Some(circle_action(rotation(dim, &[(0, 1.0)]), Expr::zero()));
    let r = (x(0).powi(2) + x(1).powi(2)).sqrt();
    let (ur, ui) = (x(0) / &r, x(1) / &r);
    let times = |a: &Expr, b: &Expr| (&ur * a - &ui * b, &ur * b + &ui * a);
    let (w1r, w1i) = times(&x(2), &x(3));
    let (w2r, w2i) = times(&x(4), &x(5));
    f.contact_reductions.push(ContactReductionSpec {
        id: "half".into(),
        xi: vec![0.5],
        guard: None,
        witness: Some(ContactWitnessSpec {
            projection: strs(&[w1r, w1i, w2r, w2i]),
            quotient_dim: 4,
            quotient_constraints: vec!["x1^2 + x2^2 + x3^2 + x4^2 - 0.5".into()],
            alpha: form_spec(&standard_alpha(4)),
            valid_where: Some("x1^2 + x2^2 - 0.01".into()),
        }),
        reduced_metric: Some(matrix(&sphere_sasaki_metric(4, 0.5))),
    });
    f.expected = vec![check(
        "contact_momentum",
        "mu_C = |z1|^2",
        1e-9,
        ExpectedKind::ContactMomentumEquals {
            component: 1,
            expr: "x1^2 + x2^2".into(),
        },
    )];
    f
}

fn cotangent_s1s3() -> ScenarioFile {
    let dim = 10;
    let z = Expr::zero;
    let frame = |base: [Expr; 6]| -> Vec<Expr> {
        let mut v: Vec<Expr> = base.to_vec();
        v.extend((0..4).map(|_| z()));
        v
    };
    let vf = frame([-x(1), x(0), z(), z(), z(), z()]);
    let rf = frame([z(), z(), -x(3), x(2), -x(5), x(4)]);
    let af = frame([z(), z(), -x(4), x(5), x(2), -x(3)]);
    let bf = frame([z(), z(), -x(5), -x(4), x(3), x(2)]);
    let flat = |v: &[Expr]| KForm::one_form(v.to_vec());
    let eta = flat(&vf)
        .scale(&x(6))
        .add(&flat(&rf).scale(&x(7)))
        .add(&flat(&af).scale(&x(8)))
        .add(&flat(&bf).scale(&x(9)));
    let theta = angular_form(dim);
    let omega = eta.twisted_d(&theta);
    let mut f = base_file(
        "cotangent_s1s3",
        "T*(S^1 x S^3) with omega = d_theta eta and the lifted circle action on S^3",
        dim,
        lcs(&omega, &theta, false),
    );
    f.constraints = vec![
        (x(0).powi(2) + x(1).powi(2) - 1.0).to_string(),
        (norm2(2..6) - 1.0).to_string(),
    ];
    f.forms.insert("eta".into(), form_spec(&eta));
    for (name, v) in [("V", &vf), ("R", &rf), ("A", &af), ("B", &bf)] {
        f.fields.insert(name.into(), field(v.clone()));
    }
    f.fields.insert("d_v".into(), coordinate_field(dim, 6));
    let mut orbit = vf.clone();
    for (o, r) in orbit.iter_mut().zip(&rf) {
        *o = &*o + r;
    }
    f.fields.insert("orbit_r1".into(), field(orbit));

    let mut map = rotation(dim, &[(2, 1.0), (4, 1.0), (8, 2.0)]);
    map.truncate(dim);
    f.algebra = Some(circle_algebra());
    f.action = Some(circle_action(map, Expr::zero()));
    f.momentum = Some(vec![(-x(7)).to_string()]);
    for (id, xi) in [("minus_one", -1.0), ("zero", 0.0), ("one", 1.0)] {
        let mut r = reduction(id, vec![xi]);
        r.rank = Some(1);
        if id == "minus_one" {
            r.leaf = Some(LeafSpec {
                a: vec![1.0],
                time: 1.0,
                steps: 200,
                closes: false,
            });
        }
        f.reductions.push(r);
    }
    let ts = vec![FRAC_PI_6, FRAC_PI_4, FRAC_PI_2];
    let e_minus_it = |a: usize, b: usize| {
        (
            x(0) * x(a) + x(1) * x(b),
            x(0) * x(b) - x(1) * x(a),
        )
    };
    let (m1, m2) = e_minus_it(2, 3);
    let (m3, m4) = e_minus_it(4, 5);
    f.expected = vec![
        check(
            "mu_equals_minus_r",
            "mu(v V + r R + a A + b B) = -r",
            1e-9,
            ExpectedKind::MomentumEquals { component: 1, expr: "-x8".into() },
        ),
        check(
            "anti_lee_is_vertical",
            "theta^omega is the fiber direction dual to the circle coframe",
            1e-9,
            ExpectedKind::AntiLeeEquals { field: "d_v".into() },
        ),
        check(
            "bracket_r_a",
            "[A, R] = 2 B for the left-invariant frame",
            1e-12,
            ExpectedKind::BracketEquals {
                x: "A".into(),
                y: "R".into(),
                target: "B".into(),
                scale: 2.0,
            },
        ),
        check(
            "pushforward_a",
            "(e^{it})_* A = cos 2t A + sin 2t B",
            1e-8,
            ExpectedKind::PushforwardCombination {
                flow: 1,
                t: ts.clone(),
                field: "A".into(),
                combination: vec![("A".into(), "cos(2*t)".into()), ("B".into(), "sin(2*t)".into())],
            },
        ),
        check(
            "pushforward_b",
            "(e^{it})_* B = -sin 2t A + cos 2t B",
            1e-8,
            ExpectedKind::PushforwardCombination {
                flow: 1,
                t: ts.clone(),
                field: "B".into(),
                combination: vec![("A".into(), "-sin(2*t)".into()), ("B".into(), "cos(2*t)".into())],
            },
        ),
        check(
            "covector_rotation",
            "the lifted action rotates (a, b) by 2t",
            1e-9,
            ExpectedKind::FiberRotation {
                flow: 1,
                t: ts.clone(),
                coords: [9, 10],
                rate: 2.0,
            },
        ),
        check(
            "cotangent_lift",
            "the fiber action is the cotangent lift of the base action",
            1e-9,
            ExpectedKind::CotangentLift {
                flow: 1,
                t: ts,
                frame: vec!["V".into(), "R".into(), "A".into(), "B".into()],
                fiber: vec![7, 8, 9, 10],
            },
        ),
        check(
            "orbit_map_invariance",
            "(t, x) -> e^{-it} x is invariant along s.(t, x) = (t + s, e^{is} x) and submersive",
            1e-9,
            ExpectedKind::MapInvariance {
                map: strs(&[m1, m2, m3, m4]),
                field: "orbit_r1".into(),
                rank: 3,
            },
        ),
    ];
    f
}

fn affine_plane() -> ScenarioFile {
    let dim = 2;
    let omega = KForm::from_terms(dim, 2, vec![(vec![0, 1], Expr::one())]);
    let mut f = base_file(
        "fixture_affine_plane",
        "the affine group of the line acting on the plane",
        dim,
        lcs(&omega, &KForm::zero(dim, 1), true),
    );
    f.algebra = Some(affine_algebra());
    let t = Expr::t();
    f.action = Some(ActionSpec {
        flows: vec![
            flow(vec![t.exp() * x(0), (-&t).exp() * x(1)], Expr::zero()),
            flow(vec![x(0) + &t, x(1)], Expr::zero()),
        ],
        elements: vec![],
        pairs: vec![],
        flow_samples: vec![(1, 0.3), (1, -0.5), (2, 0.7), (2, 1.2), (1, 0.9), (2, -0.4)],
    });
    f.momentum = Some(vec!["x1*x2".into(), "x2".into()]);
    f.samples = samples(100, 1.0);
    f
}

fn affine_algebra() -> AlgebraSpec {
    AlgebraSpec {
        dim: 2,
        structure_constants: vec![
            vec![vec![0.0, 0.0], vec![0.0, 1.0]],
            vec![vec![0.0, -1.0], vec![0.0, 0.0]],
        ],
        torus_periods: None,
    }
}

fn affine_cotangent() -> ScenarioFile {
    let dim = 4;
    let omega = KForm::from_terms(dim, 2, vec![(vec![0, 1], Expr::one()), (vec![2, 3], Expr::one())]);
    let mut f = base_file(
        "fixture_affine_cotangent",
        "cotangent lift of the affine action on the plane, coordinates (q1, p1, q2, p2)",
        dim,
        lcs(&omega, &KForm::zero(dim, 1), true),
    );
    f.algebra = Some(affine_algebra());
    let t = Expr::t();
    let (e, em) = (t.exp(), (-&t).exp());
    f.action = Some(ActionSpec {
        flows: vec![
            flow(vec![&e * x(0), &em * x(1), &e * x(2), &em * x(3)], Expr::zero()),
            flow(vec![x(0) + &t, x(1), x(2), x(3)], Expr::zero()),
        ],
        elements: vec![],
        pairs: vec![],
        flow_samples: vec![(1, 0.3), (1, -0.5), (2, 0.7), (2, 1.2), (1, 0.9), (2, -0.4)],
    });
    f.momentum = Some(vec!["x1*x2 + x3*x4".into(), "x2".into()]);
    let mut r = reduction("zero", vec![0.0, 0.0]);
    r.rank = Some(2);
    r.guard = Some("x3^2 - 0.04".into());
    f.reductions.push(r);
    f
}

fn torus_conformal() -> ScenarioFile {
    let dim = 4;
    let fexpr = 0.3 * x(0) + 0.2 * x(3);
    let ef = fexpr.exp();
    let mut f = base_file(
        "fixture_torus_conformal",
        "two-torus on C^2 with a conformal factor that is not invariant",
        dim,
        lcs(&omega0(dim, 0).scale(&ef), &KForm::exact(dim, &fexpr), true),
    );
    f.algebra = Some(AlgebraSpec {
        dim: 2,
        structure_constants: vec![vec![vec![0.0; 2]; 2]; 2],
        torus_periods: Some(vec![2.0 * PI, 2.0 * PI]),
    });
    let m1 = rotation(dim, &[(0, 1.0)]);
    let m2 = rotation(dim, &[(2, 1.0)]);
    f.action = Some(ActionSpec {
        flows: vec![
            flow(m1.clone(), fexpr.compose(&m1) - &fexpr),
            flow(m2.clone(), fexpr.compose(&m2) - &fexpr),
        ],
        elements: vec![],
        pairs: vec![],
        flow_samples: vec![(1, 0.5), (1, 1.7), (2, -0.8), (2, 2.2), (1, -1.3)],
    });
    f.momentum = Some(vec![
        (&ef * norm2(0..2)).to_string(),
        (&ef * norm2(2..4)).to_string(),
    ]);
    let mut r = reduction("generic", vec![1.0, 0.5]);
    r.obstruction_at_least = Some(1e-3);
    f.reductions.push(r);
    f
}

/// Every registry scenario compiled, in listing order.
pub fn all() -> Result<Vec<Scenario>> {
    NAMES.iter().map(|n| load_example(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_scenario_round_trips_through_json() {
        for name in NAMES {
            let f = scenario_file(name).unwrap();
            let back = ScenarioFile::from_json(&f.to_json().unwrap()).unwrap();
            assert_eq!(back, f, "{name}");
            Scenario::compile(back).unwrap();
        }
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(scenario_file("nope"), Err(Error::UnknownScenario(_))));
    }
}
