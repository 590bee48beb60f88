//! Check records and the versioned JSON report.

use std::collections::BTreeMap;

use serde::Serialize;
use twp_core::regime::RegimeFlags;

pub const SCHEMA: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub uv: bool,
    pub ir: bool,
}

impl From<RegimeFlags> for Flags {
    fn from(f: RegimeFlags) -> Self {
        Flags { uv: f.uv, ir: f.ir }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    /// `None` when the computation itself failed; serialized as `null`.
    pub measured: Option<f64>,
    pub tolerance: f64,
    pub flags: Flags,
    pub pass: bool,
    /// `ok`, `tolerance`, `regime` or `error`.
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// A check passes iff `measured <= tolerance`. Failures under regime flags are
    /// attributed to the regime rather than to the tolerance.
    pub fn new(suite: &str, name: impl Into<String>, measured: f64, tolerance: f64, flags: RegimeFlags) -> Self {
        let pass = measured <= tolerance;
        let reason = if pass {
            "ok"
        } else if flags.any() {
            "regime"
        } else {
            "tolerance"
        };
        Check {
            suite: suite.to_string(),
            name: name.into(),
            measured: measured.is_finite().then_some(measured),
            tolerance,
            flags: flags.into(),
            pass,
            reason: reason.to_string(),
            detail: None,
        }
    }

    pub fn error(suite: &str, name: impl Into<String>, tolerance: f64, err: impl std::fmt::Display) -> Self {
        Check {
            suite: suite.to_string(),
            name: name.into(),
            measured: None,
            tolerance,
            flags: RegimeFlags::CLEAN.into(),
            pass: false,
            reason: "error".to_string(),
            detail: Some(err.to_string()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub summary: Summary,
    pub checks: Vec<Check>,
}

impl Report {
    /// Sorts checks by suite name; the order within a suite is kept.
    pub fn new(seed: u64, config: BTreeMap<String, String>, mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.suite.cmp(&b.suite));
        let passed = checks.iter().filter(|c| c.pass).count();
        Report {
            schema: SCHEMA,
            seed,
            config,
            summary: Summary { total: checks.len(), passed, failed: checks.len() - passed },
            checks,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reasons() {
        let uv = RegimeFlags { uv: true, ir: false };
        assert_eq!(Check::new("s", "a", 1e-13, 1e-12, uv).reason, "ok");
        assert_eq!(Check::new("s", "a", 1e-3, 1e-12, uv).reason, "regime");
        assert_eq!(Check::new("s", "a", 1e-3, 1e-12, RegimeFlags::CLEAN).reason, "tolerance");
        let nan = Check::new("s", "a", f64::NAN, 1.0, RegimeFlags::CLEAN);
        assert!(!nan.pass && nan.measured.is_none());
    }

    #[test]
    fn report_sorts_by_suite_and_keeps_inner_order() {
        let c = |s: &str, n: &str| Check::new(s, n, 0.0, 1.0, RegimeFlags::CLEAN);
        let r = Report::new(1, BTreeMap::new(), vec![c("split", "b"), c("closure", "z"), c("split", "a")]);
        let names: Vec<_> = r.checks.iter().map(|c| (c.suite.as_str(), c.name.as_str())).collect();
        assert_eq!(names, [("closure", "z"), ("split", "b"), ("split", "a")]);
        assert!(r.to_json().contains("\"schema\": 1"));
    }
}
