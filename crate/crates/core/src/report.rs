//! Structured results of a single inequality check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Relative slack allowed on the right-hand side before a check is flagged.
pub const FLAG_SLACK: f64 = 1e-12;

/// Bumped whenever the JSON layout of [`BoundReport`] changes.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One inequality `lhs <= rhs`, optionally with an intermediate quantity for
/// chained bounds `lhs <= intermediate <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub intermediate: Option<f64>,
    pub ratio: f64,
    pub flag: bool,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none", default)]
    pub box_desc: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub m: Option<usize>,
    pub witnesses: BTreeMap<String, Value>,
    pub constants: BTreeMap<String, f64>,
}

fn leq(a: f64, b: f64) -> bool {
    a <= b * (1.0 + FLAG_SLACK) || a <= b + f64::MIN_POSITIVE
}

impl BoundReport {
    pub fn new(id: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let mut r = BoundReport {
            schema_version: REPORT_SCHEMA_VERSION,
            id: id.into(),
            lhs,
            rhs,
            intermediate: None,
            ratio: 0.0,
            flag: false,
            box_desc: None,
            p: None,
            n: None,
            m: None,
            witnesses: BTreeMap::new(),
            constants: BTreeMap::new(),
        };
        r.refresh();
        r
    }

    /// Recomputes `ratio` and `flag` after `lhs`, `rhs` or `intermediate`
    /// were changed.
    pub fn refresh(&mut self) {
        self.ratio = if self.rhs != 0.0 {
            self.lhs / self.rhs
        } else if self.lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let finite = self.lhs.is_finite() && self.rhs.is_finite();
        self.flag = finite
            && match self.intermediate {
                Some(mid) => leq(self.lhs, mid) && leq(mid, self.rhs),
                None => leq(self.lhs, self.rhs),
            };
    }

    pub fn with_intermediate(mut self, mid: f64) -> Self {
        self.intermediate = Some(mid);
        self.refresh();
        self
    }

    pub fn with_order(mut self, m: Option<usize>, n: Option<usize>) -> Self {
        self.m = m;
        self.n = n;
        self
    }

    pub fn with_p(mut self, p: impl ToString) -> Self {
        self.p = Some(p.to_string());
        self
    }

    pub fn with_box(mut self, desc: impl Into<String>) -> Self {
        self.box_desc = Some(desc.into());
        self
    }

    pub fn with_witness(mut self, key: impl Into<String>, value: impl Into<Value>) -> Self {
        self.witnesses.insert(key.into(), value.into());
        self
    }

    pub fn with_constant(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    /// Multiplies the right-hand side (and intermediate) by `factor`. Used
    /// to exercise failure paths.
    pub fn scale_rhs(&mut self, factor: f64) {
        self.rhs *= factor;
        if let Some(mid) = self.intermediate.as_mut() {
            *mid *= factor;
        }
        self.refresh();
    }

    /// Both links of a chained bound, `(lhs <= mid, mid <= rhs)`.
    pub fn chain_flags(&self) -> Option<(bool, bool)> {
        self.intermediate
            .map(|mid| (leq(self.lhs, mid), leq(mid, self.rhs)))
    }
}
