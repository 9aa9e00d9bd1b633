//! Acceptance criteria 1-12, one printed line each.
//!
//! Two literal clauses conflict with conventions fixed elsewhere and are
//! reported as FAIL: the sign in `J theta^# = theta^omega` (criterion 9) and
//! the `-2t` covector rotation (criterion 10). The test asserts that those
//! clauses stay refuted and that every other part passes.

use std::time::{Duration, Instant};

use lcsbench::gallery;
use lcsbench::lck;
use lcsbench::report::{CheckResult, Report, Status};
use lcsbench::runner::{run_scenario, run_scenarios, RunOptions};
use lcsbench::scenario::{ExpectedKind, Scenario};

const SEED: u64 = 7;

struct Suite {
    report: Report,
    elapsed: Duration,
}

impl Suite {
    fn run() -> Self {
        let scenarios = gallery::all().unwrap();
        let opts = RunOptions {
            seed: Some(SEED),
            ..RunOptions::default()
        };
        let start = Instant::now();
        let report = run_scenarios(&scenarios, &opts);
        Suite {
            report,
            elapsed: start.elapsed(),
        }
    }

    fn get(&self, scenario: &str, id: &str) -> &CheckResult {
        let s = self
            .report
            .scenarios
            .iter()
            .find(|s| s.scenario == scenario)
            .unwrap_or_else(|| panic!("no scenario {scenario}"));
        s.check(id).unwrap_or_else(|| panic!("{scenario} has no check {id}"))
    }

    fn matching(&self, pred: impl Fn(&str) -> bool) -> Vec<(&str, &CheckResult)> {
        self.report
            .scenarios
            .iter()
            .flat_map(|s| s.checks.iter().map(move |c| (s.scenario.as_str(), c)))
            .filter(|(_, c)| pred(&c.id))
            .collect()
    }
}

/// One criterion's outcome.
struct Line {
    n: usize,
    pass: bool,
    text: String,
}

fn within(c: &CheckResult, bound: f64) -> bool {
    c.status == Status::Pass && c.max_residual <= bound
}

fn worst<'a>(checks: impl IntoIterator<Item = &'a CheckResult>) -> f64 {
    checks.into_iter().fold(0.0, |m, c| m.max(c.max_residual))
}

fn criterion_1(s: &Suite) -> Line {
    let ids = s.matching(|id| id == "calculus.identities");
    let ok_all = ids.len() == gallery::NAMES.len() && ids.iter().all(|(_, c)| within(c, 1e-9));
    let enough = gallery::NAMES
        .iter()
        .all(|n| gallery::scenario_file(n).unwrap().samples.count >= 100);
    let fast = s.elapsed <= Duration::from_secs(60);
    Line {
        n: 1,
        pass: ok_all && enough && fast,
        text: format!(
            "identity suite on {} scenarios, max {:.1e} <= 1e-9; full suite {:.2} s <= 60 s",
            ids.len(),
            worst(ids.iter().map(|(_, c)| *c)),
            s.elapsed.as_secs_f64()
        ),
    }
}

fn criterion_2(s: &Suite) -> Line {
    let mut checks = vec![];
    for sc in ["cn_standard", "cn_conformal", "hopf", "cotangent_s1s3"] {
        checks.push(s.get(sc, "lcs.condition"));
    }
    let nondeg = ["cn_standard", "cn_conformal", "hopf", "cotangent_s1s3"]
        .iter()
        .all(|sc| s.get(sc, "lcs.nondegeneracy").passed());
    let bridge = [s.get("hopf", "contact.bridge_identity"), s.get("hopf_fibered", "contact.bridge_identity")];
    let pass = nondeg && checks.iter().chain(&bridge).all(|c| within(c, 1e-9));
    Line {
        n: 2,
        pass,
        text: format!(
            "d omega = theta ^ omega max {:.1e}, non-degenerate: {nondeg}; bridge identity on S^1 x S^3 and S^1 x S^5 max {:.1e}",
            worst(checks),
            worst(bridge)
        ),
    }
}

fn criterion_3(s: &Suite) -> Line {
    let checks = [
        s.get("cn_standard", "action.momentum_norm_squared"),
        s.get("blowup_action", "action.momentum_difference"),
        s.get("sphere_contact", "contact.contact_momentum_one"),
        s.get("hopf", "contact.contact_momentum_one"),
        s.get("hopf", "action.momentum_minus_one"),
        s.get("cotangent_s1s3", "action.mu_equals_minus_r"),
    ];
    Line {
        n: 3,
        pass: checks.iter().all(|c| within(c, 1e-9)),
        text: format!("six closed-form momentum values at 100 points, max {:.1e} <= 1e-9", worst(checks)),
    }
}

fn criterion_4(s: &Suite) -> Line {
    let checks = [
        s.get("hopf", "lcs.alpha_of_anti_lee"),
        s.get("hopf", "lcs.anti_lee_is_reeb"),
        s.get("hopf", "contact.anti_lee_reeb"),
        s.get("cotangent_s1s3", "lcs.anti_lee_is_vertical"),
    ];
    Line {
        n: 4,
        pass: checks.iter().all(|c| within(c, 1e-9)),
        text: format!("alpha(theta^omega) = 1, theta^omega = Reeb, cotangent anti-Lee field, max {:.1e}", worst(checks)),
    }
}

fn criterion_5(s: &Suite) -> Line {
    let cases = [
        ("cn_conformal", "unit"),
        ("hopf", "gauged"),
        ("cotangent_s1s3", "minus_one"),
        ("cotangent_s1s3", "zero"),
        ("cotangent_s1s3", "one"),
    ];
    let angles: Vec<&CheckResult> = cases
        .iter()
        .map(|(sc, r)| s.get(sc, &format!("reduction.{r}.characteristic")))
        .collect();
    let ranks_ok = cases
        .iter()
        .all(|(sc, r)| s.get(sc, &format!("reduction.{r}.rank")).status == Status::Pass);
    Line {
        n: 5,
        pass: ranks_ok && angles.iter().all(|c| within(c, 1e-8)),
        text: format!(
            "span psi(g_xi) = K ∩ K^omega on 5 levels, max angle {:.1e} <= 1e-8; rank = dim g_xi: {ranks_ok}",
            worst(angles.iter().copied())
        ),
    }
}

fn criterion_6(s: &Suite) -> Line {
    let cn = [s.get("cn_standard", "reduction.unit.quotient"), s.get("cn_standard", "reduction.two.quotient")];
    let contact = s.get("sphere_contact_weighted", "contact.reduction_half.quotient");
    let hopf = s.get("hopf", "reduction.gauged.quotient");
    let all = [cn[0], cn[1], contact, hopf];
    Line {
        n: 6,
        pass: all.iter().all(|c| within(c, 1e-8)),
        text: format!(
            "Fubini-Study witness max {:.1e}; contact witness (pi^* alpha_xi, lifted LCS form) {:.1e}; Hopf witness {:.1e}",
            worst(cn),
            contact.max_residual,
            hopf.max_residual
        ),
    }
}

fn criterion_7(s: &Suite) -> Line {
    let brackets = s.matching(|id| id.ends_with(".bracket") && id.starts_with("reduction."));
    let xi = s.matching(|id| id.ends_with(".xi_bracket"));
    let action = s.matching(|id| id == "action.bracket");
    let nonabelian = s.get("fixture_affine_cotangent", "reduction.zero.rank");
    let pass = brackets.iter().chain(&action).all(|(_, c)| within(c, 1e-8))
        && xi.iter().all(|(_, c)| within(c, 1e-12))
        && nonabelian.status == Status::Pass
        && brackets.iter().any(|(sc, _)| *sc == "fixture_affine_cotangent");
    Line {
        n: 7,
        pass,
        text: format!(
            "[psi(a), psi(b)] + X_[a,b] max {:.1e} over {} reductions (incl. the non-abelian fixture), xi([a,b]) max {:.1e}",
            worst(brackets.iter().chain(&action).map(|(_, c)| *c)),
            brackets.len(),
            worst(xi.iter().map(|(_, c)| *c))
        ),
    }
}

fn criterion_8(s: &Suite) -> Line {
    let eq = s.matching(|id| id.starts_with("action.") && id.ends_with("equivariance"));
    let cocycle = s.matching(|id| id == "action.cocycle" || id.ends_with(".cocycle"));
    let haar = s.matching(|id| id == "action.haar_average");
    let rescaled = eq.iter().any(|(sc, _)| *sc == "cn_conformal");
    let pass = rescaled
        && !haar.is_empty()
        && eq.iter().chain(&cocycle).chain(&haar).all(|(_, c)| within(c, 1e-8));
    Line {
        n: 8,
        pass,
        text: format!(
            "equivariance max {:.1e} over {} actions (50 pairs each, rescaled included: {rescaled}); cocycle {:.1e}; h^* F = F - phi_h {:.1e}",
            worst(eq.iter().map(|(_, c)| *c)),
            eq.len(),
            worst(cocycle.iter().map(|(_, c)| *c)),
            worst(haar.iter().map(|(_, c)| *c))
        ),
    }
}

/// `max |J theta^# - theta^omega|` on Hopf, the relation as literally stated.
fn literal_lee_relation() -> f64 {
    let sc = gallery::load_example("hopf").unwrap();
    let s = sc.lcs.clone().unwrap();
    let l = sc.lck.clone().unwrap();
    let pts = s
        .manifold
        .sample(&mut lcsbench::manifold::SampleRng::new(SEED), 40, 1.0)
        .unwrap();
    pts.iter()
        .map(|p| {
            let ps = p.as_slice();
            let sharp = lck::lee_at(&s, &l.g, ps).unwrap();
            (l.j.at(ps).unwrap() * sharp - s.anti_lee_at(ps).unwrap()).amax()
        })
        .fold(0.0, f64::max)
}

struct Split {
    line: Line,
    refuted: bool,
}

fn criterion_9(s: &Suite) -> Split {
    let hopf = [
        "lck.compatibility",
        "lck.integrability",
        "lck.vaisman",
        "lck.lee_holomorphic",
        "lck.anti_lee_holomorphic",
    ]
    .map(|id| s.get("hopf", id));
    let sasaki = s.get("sphere_contact", "lck.sasaki");
    let signed = s.matching(|id| id == "lck.lee_relation");
    let controls = s.matching(|id| id.starts_with("lck.") && id.ends_with("_detected"));
    let parts = hopf.iter().all(|c| within(c, 1e-8))
        && within(sasaki, 1e-8)
        && signed.iter().all(|(_, c)| within(c, 1e-9))
        && controls.len() >= 4
        && controls.iter().all(|(_, c)| c.status == Status::Pass && c.max_residual >= 0.1);
    let literal = literal_lee_relation();
    let refuted = literal > 1.0;
    Split {
        line: Line {
            n: 9,
            pass: parts && !refuted,
            text: format!(
                "Hopf LCK/Vaisman/holomorphic max {:.1e}, Sasaki {:.1e}, {} negative controls >= 0.1: {parts}; \
                 literal J theta^# = theta^omega residual {literal:.2} (J theta^# = -theta^omega holds to {:.1e})",
                worst(hopf),
                sasaki.max_residual,
                controls.len(),
                worst(signed.iter().map(|(_, c)| *c))
            ),
        },
        refuted: refuted && parts,
    }
}

/// Residual of the `(a, b)` rotation at the given rate on the cotangent scenario.
fn fiber_rotation_residual(rate: f64) -> f64 {
    let mut f = gallery::scenario_file("cotangent_s1s3").unwrap();
    for e in &mut f.expected {
        if let ExpectedKind::FiberRotation { rate: r, .. } = &mut e.kind {
            *r = rate;
        }
    }
    let sc = Scenario::compile(f).unwrap();
    let opts = RunOptions {
        seed: Some(SEED),
        checks: vec!["action.covector_rotation".into()],
        ..RunOptions::default()
    };
    let rep = run_scenario(&sc, &opts);
    rep.check("action.covector_rotation").unwrap().max_residual
}

fn criterion_10(s: &Suite) -> Split {
    let push = [
        s.get("cotangent_s1s3", "calculus.pushforward_a"),
        s.get("cotangent_s1s3", "calculus.pushforward_b"),
    ];
    let lift = s.get("cotangent_s1s3", "action.cotangent_lift");
    let plus = s.get("cotangent_s1s3", "action.covector_rotation");
    let minus = fiber_rotation_residual(-2.0);
    let parts = push.iter().all(|c| within(c, 1e-8)) && within(lift, 1e-9) && within(plus, 1e-9);
    let refuted = minus > 0.1;
    Split {
        line: Line {
            n: 10,
            pass: parts && !refuted,
            text: format!(
                "pushforwards of A, B at pi/6, pi/4, pi/2 max {:.1e} (FD transport); cotangent lift {:.1e}; \
                 rotation by +2t {:.1e}; literal rotation by -2t residual {minus:.2}",
                worst(push),
                lift.max_residual,
                plus.max_residual
            ),
        },
        refuted: refuted && parts,
    }
}

fn criterion_11(s: &Suite) -> Line {
    let xi = s.get("cn_standard", "reduction.sweep_xi_path");
    let gauge = s.get("hopf", "reduction.sweep_gauge_path");
    let zero = s.get("cn_standard", "reduction.sweep_zero_injected");
    Line {
        n: 11,
        pass: xi.passed() && gauge.passed() && zero.passed() && zero.note.contains("rejected at 0"),
        text: format!(
            "xi path: {}; Hopf gauge path: {}; xi = 0 injected: {}",
            xi.note, gauge.note, zero.note
        ),
    }
}

fn criterion_12(s: &Suite) -> Line {
    let again = Suite::run();
    let a = s.report.to_json().unwrap();
    let b = again.report.to_json().unwrap();
    Line {
        n: 12,
        pass: a == b,
        text: format!("two seed-{SEED} suite runs give byte-identical JSON ({} bytes)", a.len()),
    }
}

#[test]
fn acceptance() {
    let suite = Suite::run();
    let c9 = criterion_9(&suite);
    let c10 = criterion_10(&suite);
    let lines = vec![
        criterion_1(&suite),
        criterion_2(&suite),
        criterion_3(&suite),
        criterion_4(&suite),
        criterion_5(&suite),
        criterion_6(&suite),
        criterion_7(&suite),
        criterion_8(&suite),
        c9.line,
        c10.line,
        criterion_11(&suite),
        criterion_12(&suite),
    ];
    for l in &lines {
        println!("criterion {:>2}: {} {}", l.n, if l.pass { "PASS" } else { "FAIL" }, l.text);
    }
    for l in &lines {
        match l.n {
            9 => assert!(c9.refuted, "criterion 9: the non-literal parts must pass and the literal sign stay refuted"),
            10 => assert!(c10.refuted, "criterion 10: the non-literal parts must pass and -2t stay refuted"),
            _ => assert!(l.pass, "criterion {} failed: {}", l.n, l.text),
        }
    }
}
