//! Check records and the aggregated report emitted by every command.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    /// Human-readable statement of the property the check verifies.
    pub statement: String,
    pub status: CheckStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// Machine-readable payload identifying a failure (matrices, indices,
    /// trial numbers).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub passed: usize,
    pub failed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<CheckRecord>,
    pub summary: Summary,
    pub wall_ms: u128,
}

/// Accumulates check records and finalizes into a [`Report`].
pub struct ReportBuilder {
    checks: Vec<CheckRecord>,
    started: std::time::Instant,
}

impl Default for ReportBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ReportBuilder {
    pub fn new() -> Self {
        Self {
            checks: Vec::new(),
            started: std::time::Instant::now(),
        }
    }

    pub fn pass(&mut self, name: &str, statement: &str, residual: Option<f64>) {
        self.checks.push(CheckRecord {
            name: name.to_string(),
            statement: statement.to_string(),
            status: CheckStatus::Pass,
            residual,
            witness: None,
        });
    }

    pub fn fail(
        &mut self,
        name: &str,
        statement: &str,
        residual: Option<f64>,
        witness: serde_json::Value,
    ) {
        self.checks.push(CheckRecord {
            name: name.to_string(),
            statement: statement.to_string(),
            status: CheckStatus::Fail,
            residual,
            witness: Some(witness),
        });
    }

    /// Record a bound check: passes when `residual <= bound`.
    pub fn bounded(&mut self, name: &str, statement: &str, residual: f64, bound: f64) {
        if residual <= bound {
            self.pass(name, statement, Some(residual));
        } else {
            self.fail(
                name,
                statement,
                Some(residual),
                serde_json::json!({ "bound": bound }),
            );
        }
    }

    pub fn finish(self) -> Report {
        let passed = self
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Pass)
            .count();
        let total = self.checks.len();
        Report {
            summary: Summary {
                passed,
                failed: total - passed,
                total,
            },
            wall_ms: self.started.elapsed().as_millis(),
            checks: self.checks,
        }
    }
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    /// One line per check plus a summary line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
            };
            match c.residual {
                Some(r) => out.push_str(&format!(
                    "[{tag}] {}: {} (residual {r:.3e})\n",
                    c.name, c.statement
                )),
                None => out.push_str(&format!("[{tag}] {}: {}\n", c.name, c.statement)),
            }
        }
        out.push_str(&format!(
            "{} of {} checks passed in {} ms\n",
            self.summary.passed, self.summary.total, self.wall_ms
        ));
        out
    }
}
