//! Check results shared by every validation routine in the crate.
//!
//! A [`ValidationReport`] is a list of named [`CheckEntry`] values. Each entry
//! carries the worst observed margin `lhs - rhs` of the inequality it checks,
//! and, when it failed, a [`Witness`] naming the offending indices and values.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Nothing could be evaluated (no M, nothing inside the horizon, ...).
    Skipped,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIP",
        }
    }
}

/// Concrete location and values of the worst (or failing) observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub n: Option<u128>,
    pub k: Option<u128>,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.n {
            write!(f, "n={n} ")?;
        }
        if let Some(k) = self.k {
            write!(f, "k={k} ")?;
        }
        write!(f, "lhs={:?} rhs={:?}", self.lhs, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: String,
    /// Coarse grouping used in reports: "axiom", "modulus", "trace", "rate", ...
    pub family: String,
    pub status: Status,
    /// Largest observed `lhs - rhs`; `-inf` when nothing was observed.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

impl CheckEntry {
    pub fn skipped(name: impl Into<String>, family: impl Into<String>, why: impl Into<String>) -> Self {
        CheckEntry {
            name: name.into(),
            family: family.into(),
            status: Status::Skipped,
            worst_margin: f64::NEG_INFINITY,
            witness: None,
            note: Some(why.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Running maximum of `lhs - rhs` over a family of observations.
///
/// Each observation may carry its own allowed slack; the entry passes iff no
/// observation exceeds its slack.
#[derive(Debug, Clone)]
pub struct MarginTracker {
    worst_margin: f64,
    worst_excess: f64,
    witness: Option<Witness>,
    observed: usize,
}

impl Default for MarginTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl MarginTracker {
    pub fn new() -> Self {
        MarginTracker {
            worst_margin: f64::NEG_INFINITY,
            worst_excess: f64::NEG_INFINITY,
            witness: None,
            observed: 0,
        }
    }

    /// Records the inequality `lhs <= rhs + slack`.
    pub fn observe(&mut self, lhs: f64, rhs: f64, slack: f64, n: Option<u128>, k: Option<u128>) {
        let margin = lhs - rhs;
        let excess = if margin.is_nan() { f64::INFINITY } else { margin - slack };
        self.observed += 1;
        if margin > self.worst_margin || margin.is_nan() {
            self.worst_margin = if margin.is_nan() { f64::INFINITY } else { margin };
        }
        if excess > self.worst_excess {
            self.worst_excess = excess;
            self.witness = Some(Witness { n, k, lhs, rhs });
        }
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn passed(&self) -> bool {
        self.worst_excess <= 0.0
    }

    pub fn worst_margin(&self) -> f64 {
        self.worst_margin
    }

    pub fn finish(self, name: impl Into<String>, family: impl Into<String>) -> CheckEntry {
        let name = name.into();
        let family = family.into();
        if self.observed == 0 {
            return CheckEntry::skipped(name, family, "no observations");
        }
        CheckEntry {
            name,
            family,
            status: if self.passed() { Status::Pass } else { Status::Fail },
            worst_margin: self.worst_margin,
            witness: self.witness,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<CheckEntry>,
    /// Free-form lines appended to the text rendering (comparisons, slack analysis).
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, entry: CheckEntry) {
        self.entries.push(entry);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.entries.extend(other.entries);
        self.notes.extend(other.notes);
    }

    /// True iff no entry failed. Skipped entries do not count as failures.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn first_failure(&self) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.status == Status::Fail)
    }

    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn count(&self, status: Status) -> usize {
        self.entries.iter().filter(|e| e.status == status).count()
    }

    /// One line per entry, then the notes, then a summary verdict.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{} {} [{}] margin={:?}", e.status.label(), e.name, e.family, e.worst_margin));
            if let Some(w) = &e.witness {
                if e.status == Status::Fail {
                    out.push_str(&format!(" witness: {w}"));
                }
            }
            if let Some(note) = &e.note {
                out.push_str(&format!(" ({note})"));
            }
            out.push('\n');
        }
        for line in &self.notes {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!(
            "verdict: {} ({} pass, {} fail, {} skipped)\n",
            if self.passed() { "PASS" } else { "FAIL" },
            self.count(Status::Pass),
            self.count(Status::Fail),
            self.count(Status::Skipped)
        ));
        out
    }

    /// CSV with header `check,family,pass,margin,witness`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,family,pass,margin,witness\n");
        for e in &self.entries {
            let witness = e.witness.map(|w| w.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:?},\"{}\"\n",
                e.name,
                e.family,
                match e.status {
                    Status::Pass => "true",
                    Status::Fail => "false",
                    Status::Skipped => "skipped",
                },
                e.worst_margin,
                witness
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_passes_within_slack_and_fails_beyond() {
        let mut t = MarginTracker::new();
        t.observe(1.0, 1.0 - 1e-10, 1e-9, Some(3), None);
        assert!(t.passed());
        t.observe(2.0, 1.0, 1e-9, Some(7), Some(1));
        let entry = t.finish("x", "trace");
        assert_eq!(entry.status, Status::Fail);
        let w = entry.witness.unwrap();
        assert_eq!(w.n, Some(7));
        assert_eq!(w.k, Some(1));
        assert_eq!(entry.worst_margin, 1.0);
    }

    #[test]
    fn nan_is_a_failure() {
        let mut t = MarginTracker::new();
        t.observe(f64::NAN, 0.0, 1.0, None, None);
        assert!(!t.passed());
    }

    #[test]
    fn empty_tracker_is_skipped() {
        let e = MarginTracker::new().finish("x", "rate");
        assert_eq!(e.status, Status::Skipped);
        let mut r = ValidationReport::new();
        r.push(e);
        assert!(r.passed());
        assert!(r.to_csv().contains("skipped"));
    }
}
