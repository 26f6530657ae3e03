//! Check records shared by every verification routine.

use serde::Serialize;

/// Slack used by every lemma check unless the caller overrides it.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// One checked relation `lhs <= rhs` or `lhs == rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: &'static str,
    #[serde(rename = "S")]
    pub s: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    /// Second set for checks relating two states.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<u32>,
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub pass: bool,
}

/// Relative size used to normalize a defect: never below one, so values
/// near zero are compared absolutely.
#[inline]
pub fn defect_scale(lhs: f64, rhs: f64) -> f64 {
    1f64.max(lhs.abs()).max(rhs.abs())
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub slack: f64,
    pub checks: usize,
    pub failures: usize,
    pub max_defect: f64,
    /// Every record, or only the failing ones when built with
    /// [`Report::failures_only`].
    pub records: Vec<CheckRecord>,
    #[serde(skip)]
    keep_passing: bool,
}

impl Default for Report {
    fn default() -> Self {
        Self::new(DEFAULT_SLACK)
    }
}

impl Report {
    pub fn new(slack: f64) -> Self {
        Self { slack, checks: 0, failures: 0, max_defect: 0.0, records: Vec::new(), keep_passing: true }
    }

    pub fn failures_only(slack: f64) -> Self {
        Self { keep_passing: false, ..Self::new(slack) }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// Records `lhs <= rhs` up to slack.
    pub fn leq(&mut self, check: &'static str, s: u32, i: Option<usize>, j: Option<usize>, lhs: f64, rhs: f64) {
        let defect = (lhs - rhs).max(0.0) / defect_scale(lhs, rhs);
        let pass = self.within_slack(defect, lhs, rhs);
        self.push(check, s, i, j, None, lhs, rhs, defect, pass);
    }

    /// Records `lhs == rhs` up to slack.
    pub fn eq(&mut self, check: &'static str, s: u32, i: Option<usize>, j: Option<usize>, lhs: f64, rhs: f64) {
        let defect = (lhs - rhs).abs() / defect_scale(lhs, rhs);
        let pass = self.within_slack(defect, lhs, rhs);
        self.push(check, s, i, j, None, lhs, rhs, defect, pass);
    }

    /// Records `lhs <= rhs` for a relation between two states `s` and `other`.
    pub fn leq_pair(&mut self, check: &'static str, s: u32, other: u32, i: usize, lhs: f64, rhs: f64) {
        let defect = (lhs - rhs).max(0.0) / defect_scale(lhs, rhs);
        let pass = self.within_slack(defect, lhs, rhs);
        self.push(check, s, Some(i), None, Some(other), lhs, rhs, defect, pass);
    }

    fn within_slack(&self, defect: f64, lhs: f64, rhs: f64) -> bool {
        defect <= self.slack && lhs.is_finite() && rhs.is_finite()
    }

    /// Records a relation already decided in exact arithmetic. `lhs` and
    /// `rhs` are rounded copies kept for display.
    pub fn decided(&mut self, check: &'static str, s: u32, i: Option<usize>, lhs: f64, rhs: f64, holds: bool) {
        let defect = if holds { 0.0 } else { (lhs - rhs).abs() / defect_scale(lhs, rhs) };
        self.push(check, s, i, None, None, lhs, rhs, defect, holds);
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        check: &'static str,
        s: u32,
        i: Option<usize>,
        j: Option<usize>,
        other: Option<u32>,
        lhs: f64,
        rhs: f64,
        defect: f64,
        pass: bool,
    ) {
        self.checks += 1;
        if !pass {
            self.failures += 1;
        }
        if defect.is_nan() {
            self.max_defect = f64::NAN;
        } else if defect > self.max_defect {
            self.max_defect = defect;
        }
        if self.keep_passing || !pass {
            self.records.push(CheckRecord { check, s, i, j, other, lhs, rhs, defect, pass });
        }
    }

    pub fn merge(&mut self, other: Report) {
        self.checks += other.checks;
        self.failures += other.failures;
        if other.max_defect.is_nan() || other.max_defect > self.max_defect {
            self.max_defect = other.max_defect;
        }
        if self.keep_passing {
            self.records.extend(other.records);
        } else {
            self.records.extend(other.records.into_iter().filter(|r| !r.pass));
        }
    }

    pub fn records_for<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a CheckRecord> + 'a {
        self.records.iter().filter(move |r| r.check == check)
    }

    /// The JSON array form: one object per kept record.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.records).expect("plain data serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_is_relative_above_one() {
        let mut r = Report::new(1e-9);
        r.leq("a", 0, None, None, 1e6 + 1e-4, 1e6);
        r.leq("b", 0, None, None, 1.0 + 1e-8, 1.0);
        r.eq("c", 0, None, None, 0.5, 0.5 + 1e-10);
        assert_eq!(r.checks, 3);
        assert_eq!(r.failures, 1);
        assert_eq!(r.records.iter().filter(|x| !x.pass).count(), 1);
        assert_eq!(r.records[1].check, "b");
    }

    #[test]
    fn nan_fails() {
        let mut r = Report::new(1e-9);
        r.eq("nan", 0, None, None, f64::NAN, 1.0);
        assert!(!r.passed());
    }

    #[test]
    fn failures_only_mode_drops_passing_records() {
        let mut r = Report::failures_only(1e-9);
        r.leq("ok", 1, Some(0), None, 0.0, 1.0);
        r.leq("bad", 1, Some(0), None, 2.0, 1.0);
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.checks, 2);
        let json = r.to_json();
        assert_eq!(json[0]["check"], "bad");
        assert_eq!(json[0]["S"], 1);
        assert!(json[0].get("j").is_none());
    }
}
