//! Check verdicts and machine-readable reports.
//!
//! Reports serialize to JSON with a fixed field order. In exact mode the
//! timing field is omitted so that identical inputs produce byte-identical
//! output; the plain-text rendering always shows timing.

use serde::Serialize;

use crate::scalar::Scalar;

/// Outcome of a single named check, with an optional worst residual and a
/// human-readable witness locating the first failure.
#[derive(Debug, Clone)]
pub struct Check<S> {
    pub name: String,
    pub pass: bool,
    pub residual: Option<S>,
    pub witness: Option<String>,
}

impl<S: Scalar> Check<S> {
    pub fn pass(name: &str) -> Self {
        Check { name: name.into(), pass: true, residual: None, witness: None }
    }

    pub fn pass_with(name: &str, note: String) -> Self {
        Check { name: name.into(), pass: true, residual: None, witness: Some(note) }
    }

    pub fn fail(name: &str, witness: String) -> Self {
        Check { name: name.into(), pass: false, residual: None, witness: Some(witness) }
    }

    pub fn fail_res(name: &str, witness: String, residual: S) -> Self {
        Check { name: name.into(), pass: false, residual: Some(residual), witness: Some(witness) }
    }

    pub fn with_residual(mut self, residual: S) -> Self {
        self.residual = Some(residual);
        self
    }

    pub fn from_bool(name: &str, pass: bool, witness: String) -> Self {
        if pass {
            Check::pass(name)
        } else {
            Check::fail(name, witness)
        }
    }

    pub fn all_pass(checks: &[Check<S>]) -> bool {
        checks.iter().all(|c| c.pass)
    }

    pub fn to_entry(&self) -> CheckEntry {
        CheckEntry {
            name: self.name.clone(),
            pass: self.pass,
            residual: self.residual.as_ref().map(|r| format!("{r}")),
            witness: self.witness.clone(),
        }
    }
}

/// Serialized form of a check verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

/// One value route (closed form, dynamic program, oracle, ...) and what it
/// produced. `status` is "ok" or "skipped" (budget exceeded on the oracle).
#[derive(Debug, Clone, Serialize)]
pub struct RouteValue {
    pub route: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

impl RouteValue {
    pub fn ok(route: &str, value: String) -> Self {
        RouteValue { route: route.into(), status: "ok".into(), value: Some(value) }
    }

    pub fn skipped(route: &str, why: String) -> Self {
        RouteValue { route: route.into(), status: format!("skipped: {why}"), value: None }
    }
}

/// Aggregate report for one CLI command.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub scenario: String,
    pub mode: String,
    pub pass: bool,
    pub checks: Vec<CheckEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<RouteValue>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u128>,
}

impl Report {
    pub fn new(command: &str, scenario: &str, mode: &str) -> Self {
        Report {
            command: command.into(),
            scenario: scenario.into(),
            mode: mode.into(),
            pass: true,
            checks: Vec::new(),
            values: Vec::new(),
            notes: Vec::new(),
            timing_ms: None,
        }
    }

    pub fn push_check<S: Scalar>(&mut self, check: &Check<S>) {
        self.pass &= check.pass;
        self.checks.push(check.to_entry());
    }

    pub fn push_checks<S: Scalar>(&mut self, checks: &[Check<S>]) {
        for c in checks {
            self.push_check(c);
        }
    }

    pub fn push_value(&mut self, v: RouteValue) {
        self.values.push(v);
    }

    pub fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    /// JSON with a trailing newline; deterministic field order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    /// Plain-text table; always includes timing when present.
    pub fn render_text(&self, timing_ms: u128) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} [{}] => {}\n",
            self.command,
            self.scenario,
            self.mode,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        for v in &self.values {
            out.push_str(&format!(
                "  value {:<28} {:<8} {}\n",
                v.route,
                v.status,
                v.value.as_deref().unwrap_or("-")
            ));
        }
        for c in &self.checks {
            out.push_str(&format!(
                "  check {:<28} {}\n",
                c.name,
                if c.pass { "pass" } else { "FAIL" }
            ));
            if let Some(w) = &c.witness {
                out.push_str(&format!("        {w}\n"));
            }
            if let Some(r) = &c.residual {
                out.push_str(&format!("        residual {r}\n"));
            }
        }
        for n in &self.notes {
            out.push_str(&format!("  note  {n}\n"));
        }
        out.push_str(&format!("  timing {timing_ms} ms\n"));
        out
    }
}
