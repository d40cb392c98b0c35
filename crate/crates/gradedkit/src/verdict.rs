//! Structured pass/fail verdicts with witnesses.
//!
//! Verification operations return a [`Verdict`]: a list of named checks, each
//! passing or failing with an optional human-readable witness (the violated
//! identity instance). Structural verification failures are verdicts, not
//! errors.

use serde::{Deserialize, Serialize};

/// Result of one named check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    /// Stable identifier of the check (e.g. "jacobi", "pairing-symmetric").
    pub id: String,
    /// True when the identity held exactly.
    pub pass: bool,
    /// For failures, the violated instance (serialized witness).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

/// A bundle of named checks with an overall verdict.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Verdict {
    /// The individual checks, in a deterministic order.
    pub checks: Vec<Check>,
}

impl Verdict {
    /// Empty verdict (passes vacuously).
    pub fn new() -> Self {
        Verdict::default()
    }

    /// Record a passing check.
    pub fn pass(&mut self, id: &str) {
        self.checks.push(Check { id: id.into(), pass: true, witness: None });
    }

    /// Record a failing check with its witness.
    pub fn fail(&mut self, id: &str, witness: String) {
        self.checks.push(Check { id: id.into(), pass: false, witness: Some(witness) });
    }

    /// Record a check outcome; `witness` is kept only on failure.
    pub fn record(&mut self, id: &str, ok: bool, witness: impl FnOnce() -> String) {
        if ok {
            self.pass(id);
        } else {
            self.fail(id, witness());
        }
    }

    /// True when every check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// First failing check, if any.
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass)
    }

    /// Merge another verdict's checks under a prefix.
    pub fn merge(&mut self, prefix: &str, other: Verdict) {
        for mut c in other.checks {
            c.id = format!("{prefix}.{}", c.id);
            self.checks.push(c);
        }
    }
}
