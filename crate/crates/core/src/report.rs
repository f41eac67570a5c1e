//! Structured verification output shared by the oracle, the CLI and the
//! acceptance harness.

use serde::{Deserialize, Serialize};

pub const VERIFICATION_SCHEMA: &str = "eulerian-sparsify/verification/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    /// `||L^{+/2} (vL_ref - vL_test) L^{+/2}||_op`, 0 when not measured.
    pub opnorm_error: f64,
    /// `||B^T (w_test - w_ref)||_inf` relative to `||w_ref||_1`.
    pub degree_residual_linf: f64,
    pub nnz: usize,
    /// Smallest eigenvalue of `(bound - tested)` over all Loewner checks;
    /// `+inf` when no Loewner check ran.
    pub loewner_margin: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Default for VerificationReport {
    fn default() -> Self {
        VerificationReport {
            schema: VERIFICATION_SCHEMA.to_string(),
            opnorm_error: 0.0,
            degree_residual_linf: 0.0,
            nnz: 0,
            loewner_margin: f64::INFINITY,
            pass: true,
            checks: Vec::new(),
        }
    }
}

impl VerificationReport {
    /// Records a `value <= bound` check and folds it into `pass`.
    pub fn check_le(&mut self, name: &str, value: f64, bound: f64) -> bool {
        let ok = value <= bound;
        self.push(name, value, bound, ok)
    }

    /// Records a `value >= bound` check and folds it into `pass`.
    pub fn check_ge(&mut self, name: &str, value: f64, bound: f64) -> bool {
        let ok = value >= bound;
        self.push(name, value, bound, ok)
    }

    fn push(&mut self, name: &str, value: f64, bound: f64, ok: bool) -> bool {
        self.checks.push(Check { name: name.to_string(), value, bound, pass: ok });
        self.pass &= ok;
        ok
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// JSON with non-finite numbers written as strings so the output stays
    /// valid JSON.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        finite_json(&mut v, self);
        v
    }
}

fn finite_json(v: &mut serde_json::Value, r: &VerificationReport) {
    let fix = |x: f64| -> serde_json::Value {
        if x.is_finite() {
            serde_json::json!(x)
        } else {
            serde_json::json!(format!("{x}"))
        }
    };
    v["opnorm_error"] = fix(r.opnorm_error);
    v["degree_residual_linf"] = fix(r.degree_residual_linf);
    v["loewner_margin"] = fix(r.loewner_margin);
    if let Some(arr) = v["checks"].as_array_mut() {
        for (j, c) in r.checks.iter().enumerate() {
            arr[j]["value"] = fix(c.value);
            arr[j]["bound"] = fix(c.bound);
        }
    }
}
