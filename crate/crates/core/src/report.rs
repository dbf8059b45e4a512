//! Structured verdicts for constraint checks.

/// Default absolute tolerance for constraint checks. Transfers are O(1)
/// in every application, so an absolute slack is appropriate.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Outcome of a feasibility or constraint check.
///
/// `passed` holds exactly when `worst_violation <= tolerance`. The witness
/// is the lexicographically first profile attaining the worst violation,
/// so reports are deterministic regardless of evaluation order.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub label: String,
    pub passed: bool,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub witness: Option<String>,
    pub children: Vec<FeasibilityReport>,
}

impl FeasibilityReport {
    pub fn new(label: impl Into<String>, tolerance: f64) -> Self {
        FeasibilityReport {
            label: label.into(),
            passed: true,
            worst_violation: 0.0,
            tolerance,
            witness: None,
            children: Vec::new(),
        }
    }

    /// Record one constraint evaluation. A nonpositive violation is a
    /// satisfied constraint; the first strict maximum wins the witness.
    pub fn record(&mut self, violation: f64, witness: impl FnOnce() -> String) {
        let v = violation.max(0.0);
        if v > self.worst_violation || (self.witness.is_none() && v > self.tolerance) {
            self.worst_violation = v;
            self.witness = Some(witness());
        }
        self.passed = self.worst_violation <= self.tolerance;
    }

    /// Aggregate child reports: passes iff every child passes.
    pub fn combine(label: impl Into<String>, children: Vec<FeasibilityReport>) -> Self {
        let mut worst = 0.0_f64;
        let mut witness = None;
        let mut tolerance = DEFAULT_TOL;
        for c in &children {
            if c.worst_violation > worst {
                worst = c.worst_violation;
                witness = c.witness.clone().map(|w| format!("{}: {}", c.label, w));
                tolerance = c.tolerance;
            }
        }
        let passed = children.iter().all(|c| c.passed);
        FeasibilityReport {
            label: label.into(),
            passed,
            worst_violation: worst,
            tolerance,
            witness,
            children,
        }
    }

    /// Human-readable rendering, one line per node.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(&mut out, 0);
        out
    }

    fn render_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{pad}{verdict} {} (worst violation {:.3e}, tol {:.1e})",
            self.label, self.worst_violation, self.tolerance
        ));
        if let Some(w) = &self.witness {
            if !self.passed {
                out.push_str(&format!(" at {w}"));
            }
        }
        out.push('\n');
        for c in &self.children {
            c.render_into(out, depth + 1);
        }
    }
}
