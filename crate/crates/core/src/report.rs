//! Check results and their JSON, CSV and text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    /// A rank decision fell inside the ambiguity band.
    Flagged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Flagged => "FLAGGED",
        }
    }
}

/// How the measured value is compared with the tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub module: String,
    pub status: Status,
    /// The measured quantity; non-finite values serialize as `null`.
    pub max_residual: f64,
    pub comparison: Comparison,
    pub tolerance: f64,
    pub point: Vec<f64>,
    pub anchor: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl CheckResult {
    pub fn measured(
        id: impl Into<String>,
        module: &str,
        value: f64,
        comparison: Comparison,
        tolerance: f64,
        point: &[f64],
        anchor: &str,
    ) -> Self {
        let ok = match comparison {
            Comparison::AtMost => value <= tolerance,
            Comparison::AtLeast => value >= tolerance,
        };
        CheckResult {
            id: id.into(),
            module: module.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            max_residual: value,
            comparison,
            tolerance,
            point: point.to_vec(),
            anchor: anchor.into(),
            note: String::new(),
        }
    }

    pub fn failed(id: impl Into<String>, module: &str, tolerance: f64, anchor: &str, note: String) -> Self {
        CheckResult {
            id: id.into(),
            module: module.into(),
            status: Status::Fail,
            max_residual: f64::INFINITY,
            comparison: Comparison::AtMost,
            tolerance,
            point: vec![],
            anchor: anchor.into(),
            note,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn flagged_if(mut self, ambiguous: bool) -> Self {
        if ambiguous && self.status == Status::Pass {
            self.status = Status::Flagged;
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub checks: Vec<CheckResult>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub flagged: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: Counts,
    pub modules: BTreeMap<String, Counts>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenarios: Vec<ScenarioReport>,
    pub summary: Summary,
}

impl ScenarioReport {
    pub fn sort(&mut self) {
        self.checks.sort_by(|a, b| a.id.cmp(&b.id));
    }

    pub fn check(&self, id: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }
}

impl Report {
    pub fn new(mut scenarios: Vec<ScenarioReport>) -> Self {
        for s in &mut scenarios {
            s.sort();
        }
        let mut total = Counts::default();
        let mut modules: BTreeMap<String, Counts> = BTreeMap::new();
        for c in scenarios.iter().flat_map(|s| &s.checks) {
            for counts in [&mut total, modules.entry(c.module.clone()).or_default()] {
                match c.status {
                    Status::Pass => counts.pass += 1,
                    Status::Fail => counts.fail += 1,
                    Status::Flagged => counts.flagged += 1,
                }
            }
        }
        Report {
            scenarios,
            summary: Summary { total, modules },
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.total.fail == 0
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,id,module,status,max_residual,comparison,tolerance,point,anchor,note\n");
        for s in &self.scenarios {
            for c in &s.checks {
                let point = c.point.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(" ");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:e},{},{:e},{},{},{}",
                    csv_field(&s.scenario),
                    csv_field(&c.id),
                    csv_field(&c.module),
                    c.status.as_str(),
                    c.max_residual,
                    match c.comparison {
                        Comparison::AtMost => "at_most",
                        Comparison::AtLeast => "at_least",
                    },
                    c.tolerance,
                    csv_field(&point),
                    csv_field(&c.anchor),
                    csv_field(&c.note),
                );
            }
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.scenarios {
            let _ = writeln!(out, "{} (seed {}, tolerance scale {})", s.scenario, s.seed, s.tolerance_scale);
            for c in &s.checks {
                let op = match c.comparison {
                    Comparison::AtMost => "<=",
                    Comparison::AtLeast => ">=",
                };
                let _ = write!(
                    out,
                    "  {:<7} {:<48} {:>10.3e} {op} {:.1e}  [{}]",
                    c.status.as_str(),
                    c.id,
                    c.max_residual,
                    c.tolerance,
                    c.anchor
                );
                if !c.note.is_empty() {
                    let _ = write!(out, "  {}", c.note);
                }
                out.push('\n');
            }
        }
        for (m, c) in &self.summary.modules {
            let _ = writeln!(out, "{m}: {} pass, {} fail, {} flagged", c.pass, c.fail, c.flagged);
        }
        let t = &self.summary.total;
        let _ = writeln!(out, "total: {} pass, {} fail, {} flagged", t.pass, t.fail, t.flagged);
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let a = CheckResult::measured("b.check", "lcs", 1e-12, Comparison::AtMost, 1e-9, &[1.0], "d omega");
        let b = CheckResult::measured("a.check", "action", 0.5, Comparison::AtLeast, 0.1, &[], "x, y");
        Report::new(vec![ScenarioReport {
            scenario: "s".into(),
            seed: 7,
            tolerance_scale: 1.0,
            checks: vec![a, b],
        }])
    }

    #[test]
    fn checks_are_sorted_and_counted() {
        let r = sample();
        assert_eq!(r.scenarios[0].checks[0].id, "a.check");
        assert_eq!(r.summary.total.pass, 2);
        assert!(r.all_passed());
    }

    #[test]
    fn csv_quotes_commas() {
        let csv = sample().to_csv();
        assert!(csv.contains("\"x, y\""));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let back: Report = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
