//! Pass/fail bookkeeping for the acceptance suite.

use std::fmt;
use std::time::Duration;

/// One criterion outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag}  {}: {}", self.name, self.detail)
    }
}

/// Checks belonging to one criterion group, with its wall time.
#[derive(Debug, Clone)]
pub struct Group {
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

/// Prints every group and returns the number of failed checks.
pub fn report(groups: &[Group]) -> usize {
    let mut failed = 0;
    for g in groups {
        println!("== {} ({:.1} s)", g.title, g.elapsed.as_secs_f64());
        for c in &g.checks {
            println!("{c}");
            failed += usize::from(!c.pass);
        }
    }
    let total: usize = groups.iter().map(|g| g.checks.len()).sum();
    println!("{} of {total} checks passed, {failed} failed", total - failed);
    failed
}
