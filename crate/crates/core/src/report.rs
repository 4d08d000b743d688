//! Named residual checks and their JSON rendering.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::qpoly::fmt15;

/// Direction of a check: residuals must stay below their tolerance, margins
/// (negative controls) must stay above it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Below,
    Above,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    /// Sample attaining the worst value.
    pub witness: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::Below => self.value.is_finite() && self.value < self.tolerance,
            Bound::Above => self.value.is_finite() && self.value > self.tolerance,
        }
    }
}

/// Worst value over a sweep together with its witness.
#[derive(Clone, Debug, Default)]
pub struct Worst {
    pub value: f64,
    pub witness: String,
}

impl Worst {
    pub fn new() -> Self {
        Worst { value: 0.0, witness: String::new() }
    }

    pub fn update(&mut self, value: f64, witness: impl FnOnce() -> String) {
        if value > self.value || value.is_nan() || self.witness.is_empty() {
            self.value = if value.is_nan() { f64::INFINITY } else { value.max(self.value) };
            self.witness = witness();
        }
    }

    pub fn merge(mut self, o: Worst) -> Worst {
        if o.value > self.value || self.witness.is_empty() {
            self = o;
        }
        self
    }
}

/// Smallest value over a sweep with its witness.
#[derive(Clone, Debug)]
pub struct Least {
    pub value: f64,
    pub witness: String,
}

impl Least {
    pub fn new() -> Self {
        Least { value: f64::INFINITY, witness: String::new() }
    }

    pub fn update(&mut self, value: f64, witness: impl FnOnce() -> String) {
        if value < self.value {
            self.value = value;
            self.witness = witness();
        }
    }
}

impl Default for Least {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub checks: BTreeMap<String, Check>,
    /// Informational values without a verdict.
    pub diagnostics: BTreeMap<String, f64>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn below(&mut self, name: &str, worst: Worst, tolerance: f64) {
        self.checks.insert(name.to_string(), Check { value: worst.value, tolerance, bound: Bound::Below, witness: worst.witness });
    }

    pub fn above(&mut self, name: &str, least: Least, tolerance: f64) {
        self.checks.insert(name.to_string(), Check { value: least.value, tolerance, bound: Bound::Above, witness: least.witness });
    }

    pub fn note(&mut self, name: &str, value: f64) {
        self.diagnostics.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.get(name)
    }

    pub fn extend(&mut self, o: Report) {
        self.checks.extend(o.checks);
        self.diagnostics.extend(o.diagnostics);
    }

    pub fn passed(&self) -> bool {
        self.checks.values().all(Check::passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, c)| !c.passed()).map(|(n, _)| n.as_str()).collect()
    }

    /// `{package, residuals, tolerances, witnesses, diagnostics, verdict}`.
    pub fn to_json(&self, package: Value) -> Value {
        let mut residuals = Map::new();
        let mut tolerances = Map::new();
        let mut witnesses = Map::new();
        for (name, c) in &self.checks {
            residuals.insert(name.clone(), number(c.value));
            let bound = match c.bound {
                Bound::Below => "below",
                Bound::Above => "above",
            };
            tolerances.insert(name.clone(), json!({"value": number(c.tolerance), "bound": bound}));
            witnesses.insert(name.clone(), Value::String(c.witness.clone()));
        }
        let diagnostics: Map<String, Value> = self.diagnostics.iter().map(|(k, v)| (k.clone(), number(*v))).collect();
        json!({
            "package": package,
            "residuals": residuals,
            "tolerances": tolerances,
            "witnesses": witnesses,
            "diagnostics": diagnostics,
            "verdict": if self.passed() { "pass" } else { "fail" },
        })
    }
}

/// A float rounded to 15 significant digits; non-finite values become
/// strings.
pub fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(fmt15(x))
    } else {
        Value::String(format!("{x}"))
    }
}
