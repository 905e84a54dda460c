//! Check catalog and runner.
//!
//! Each check measures residuals (identities) or margins (inequalities and
//! trends) together with a numerical error budget, and is judged against its
//! tolerance:
//!
//! * identity: pass if `r + b <= tol`, fail if `r - b > tol`;
//! * inequality, trend: pass if `m - b >= -tol`, fail if `m + b < -tol`;
//! * anything in between is indeterminate.
//!
//! Diagnostics report a statistic and fail only on blow-up.

mod battery;
mod catalog;
mod checks;
mod collapse;

pub use battery::{test_function, TestFunction};
pub use catalog::{catalog, find, suite};
pub use collapse::{noncollapsing_report, CollapseRow, NoncollapsingReport};

use crate::error::{Error, Result};
use crate::par_map;
use crate::scenario::{ScenarioConfig, ScenarioKind};
use serde::{Deserialize, Serialize};

/// How a check's measurements are judged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Identity,
    Inequality,
    Trend,
    Diagnostic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Indeterminate,
    Fail,
    /// The computation itself failed numerically.
    Error,
}

/// One comparison inside a check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub label: String,
    pub verdict: Verdict,
    /// Residual for identities, margin otherwise.
    pub value: f64,
    pub tolerance: f64,
    pub budget: f64,
    pub outcome: Outcome,
}

impl Measurement {
    pub fn identity(label: impl Into<String>, residual: f64, budget: f64, tolerance: f64) -> Self {
        let outcome = if !(residual.is_finite() && budget.is_finite()) {
            Outcome::Fail
        } else if residual + budget <= tolerance {
            Outcome::Pass
        } else if residual - budget > tolerance {
            Outcome::Fail
        } else {
            Outcome::Indeterminate
        };
        Measurement {
            label: label.into(),
            verdict: Verdict::Identity,
            value: residual,
            tolerance,
            budget,
            outcome,
        }
    }

    fn margin(verdict: Verdict, label: impl Into<String>, margin: f64, budget: f64, tolerance: f64) -> Self {
        let outcome = if !(margin.is_finite() && budget.is_finite()) {
            Outcome::Fail
        } else if margin - budget >= -tolerance {
            Outcome::Pass
        } else if margin + budget < -tolerance {
            Outcome::Fail
        } else {
            Outcome::Indeterminate
        };
        Measurement {
            label: label.into(),
            verdict,
            value: margin,
            tolerance,
            budget,
            outcome,
        }
    }

    pub fn inequality(label: impl Into<String>, margin: f64, budget: f64, tolerance: f64) -> Self {
        Self::margin(Verdict::Inequality, label, margin, budget, tolerance)
    }

    pub fn trend(label: impl Into<String>, margin: f64, budget: f64, tolerance: f64) -> Self {
        Self::margin(Verdict::Trend, label, margin, budget, tolerance)
    }

    /// A reported statistic; `bounded` is false on blow-up.
    pub fn diagnostic(label: impl Into<String>, value: f64, bounded: bool) -> Self {
        Measurement {
            label: label.into(),
            verdict: Verdict::Diagnostic,
            value,
            tolerance: f64::NAN,
            budget: 0.0,
            outcome: if bounded && value.is_finite() {
                Outcome::Pass
            } else {
                Outcome::Fail
            },
        }
    }

    /// Residual (or negated margin) in units of the tolerance, for picking the headline.
    fn severity(&self) -> f64 {
        let unit = self.tolerance.max(1e-300);
        match self.verdict {
            Verdict::Identity => self.value / unit,
            Verdict::Inequality | Verdict::Trend => -self.value / unit,
            Verdict::Diagnostic => f64::NEG_INFINITY,
        }
    }
}

/// A CSV table produced by a check; the CLI writes it next to the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    #[serde(skip)]
    pub csv: String,
}

/// What a check function hands back to the runner.
#[derive(Clone, Debug, Default)]
pub struct CheckData {
    pub measurements: Vec<Measurement>,
    pub values: serde_json::Map<String, serde_json::Value>,
    pub artifacts: Vec<Artifact>,
}

impl CheckData {
    pub fn push(&mut self, m: Measurement) {
        self.measurements.push(m);
    }

    pub fn value(&mut self, key: &str, v: impl Serialize) {
        self.values
            .insert(key.to_string(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null));
    }
}

pub type CheckFn = fn(&CheckDef, &ScenarioConfig) -> Result<CheckData>;

/// A catalog entry.
#[derive(Clone)]
pub struct CheckDef {
    pub id: &'static str,
    /// The mathematical statement being checked, in plain words.
    pub claim: &'static str,
    pub scenarios: &'static [ScenarioKind],
    pub verdict: Verdict,
    pub tolerance: f64,
    pub run: CheckFn,
}

impl std::fmt::Debug for CheckDef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CheckDef")
            .field("id", &self.id)
            .field("verdict", &self.verdict)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

impl CheckDef {
    pub fn applies_to(&self, kind: ScenarioKind) -> bool {
        self.scenarios.contains(&kind)
    }
}

/// Discretization the report was produced with.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: String,
    pub grid: crate::geometry::GridSpec,
    pub resolution: f64,
    pub elapsed_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_id: String,
    pub scenario: String,
    pub verdict: Verdict,
    pub outcome: Outcome,
    /// Headline measurement: the one furthest from its tolerance.
    pub residual: f64,
    pub tolerance: f64,
    pub budget: f64,
    pub measurements: Vec<Measurement>,
    pub values: serde_json::Value,
    pub artifacts: Vec<Artifact>,
    pub error: Option<String>,
    pub meta: RunMeta,
}

fn meta(sc: &ScenarioConfig, elapsed: f64) -> RunMeta {
    RunMeta {
        method: format!("{:?}", sc.method).to_lowercase(),
        grid: sc.grid.clone(),
        resolution: sc.sampling.resolution,
        elapsed_s: elapsed,
    }
}

/// Runs one check on one scenario.
///
/// Configuration problems are errors; numerical failures become a report with
/// outcome [`Outcome::Error`].
pub fn run_check(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckReport> {
    if !def.applies_to(sc.kind()) {
        return Err(Error::Config(format!(
            "check `{}` does not apply to scenario `{}` ({:?})",
            def.id,
            sc.name,
            sc.kind()
        )));
    }
    sc.validate()?;
    let start = Stopwatch::start();
    let result = (def.run)(def, sc);
    let elapsed = start.seconds();
    let data = match result {
        Ok(d) => d,
        Err(e) if e.is_numerical() || matches!(e, Error::Schedule(_) | Error::MissingSlice(_) | Error::Stencil { .. }) => {
            return Ok(CheckReport {
                check_id: def.id.to_string(),
                scenario: sc.name.clone(),
                verdict: def.verdict,
                outcome: Outcome::Error,
                residual: f64::NAN,
                tolerance: sc.tolerance(def.id, def.tolerance),
                budget: f64::NAN,
                measurements: Vec::new(),
                values: serde_json::Value::Null,
                artifacts: Vec::new(),
                error: Some(e.to_string()),
                meta: meta(sc, elapsed),
            })
        }
        Err(e) => return Err(e),
    };
    if data.measurements.is_empty() {
        return Err(Error::Config(format!("check `{}` produced no measurements", def.id)));
    }
    let outcome = data.measurements.iter().map(|m| m.outcome).max().unwrap();
    let headline = data
        .measurements
        .iter()
        .filter(|m| m.outcome == outcome)
        .max_by(|a, b| a.severity().total_cmp(&b.severity()))
        .unwrap();
    Ok(CheckReport {
        check_id: def.id.to_string(),
        scenario: sc.name.clone(),
        verdict: def.verdict,
        outcome,
        residual: headline.value,
        tolerance: headline.tolerance,
        budget: headline.budget,
        measurements: data.measurements.clone(),
        values: serde_json::Value::Object(data.values),
        artifacts: data.artifacts,
        error: None,
        meta: meta(sc, elapsed),
    })
}

/// Wall clock; reads zero where the target has no clock.
struct Stopwatch(#[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))] std::time::Instant);

impl Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    fn start() -> Self {
        Stopwatch()
    }

    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }

    #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
    fn seconds(&self) -> f64 {
        0.0
    }
}

/// Aggregate of a suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub reports: Vec<CheckReport>,
    pub passed: usize,
    pub failed: usize,
    pub indeterminate: usize,
    pub errors: usize,
    pub pass: bool,
}

impl SuiteReport {
    /// Fixed-width table, one row per report.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<34} {:<10} {:<11} {:<13} {:>12} {:>10} {:>10} {:>8}\n",
            "check", "scenario", "verdict", "outcome", "value", "tol", "budget", "time[s]"
        );
        for r in &self.reports {
            out.push_str(&format!(
                "{:<34} {:<10} {:<11} {:<13} {:>12.4e} {:>10.2e} {:>10.2e} {:>8.2}\n",
                r.check_id,
                r.scenario,
                format!("{:?}", r.verdict).to_lowercase(),
                format!("{:?}", r.outcome).to_lowercase(),
                r.residual,
                r.tolerance,
                r.budget,
                r.meta.elapsed_s
            ));
        }
        out.push_str(&format!(
            "{} passed, {} failed, {} indeterminate, {} errors: {}\n",
            self.passed,
            self.failed,
            self.indeterminate,
            self.errors,
            if self.pass { "PASS" } else { "FAIL" }
        ));
        out
    }
}

/// Runs every applicable check of `ids` (check ids or suite names) on every
/// scenario, concurrently; reports come back in catalog order per scenario.
pub fn run_suite(ids: &[String], scenarios: &[ScenarioConfig]) -> Result<SuiteReport> {
    let mut defs: Vec<&'static CheckDef> = Vec::new();
    for id in ids {
        for d in suite(id)? {
            if !defs.iter().any(|e| e.id == d.id) {
                defs.push(d);
            }
        }
    }
    let order = |d: &CheckDef| catalog().iter().position(|c| c.id == d.id).unwrap();
    defs.sort_by_key(|d| order(d));
    for sc in scenarios {
        sc.validate()?;
    }
    let jobs: Vec<(usize, &'static CheckDef)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(k, sc)| defs.iter().filter(move |d| d.applies_to(sc.kind())).map(move |d| (k, *d)))
        .collect();
    let reports = par_map(&jobs, |(k, d)| run_check(d, &scenarios[*k]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let count = |o: Outcome| reports.iter().filter(|r| r.outcome == o).count();
    let undecided = |diag: bool| {
        reports
            .iter()
            .filter(|r| r.outcome == Outcome::Indeterminate && (r.verdict == Verdict::Diagnostic) == diag)
            .count()
    };
    let allowance = |diag: bool| {
        scenarios
            .iter()
            .map(|s| {
                if diag {
                    s.tolerances.indeterminate_diagnostic
                } else {
                    s.tolerances.indeterminate_identity
                }
            })
            .min()
            .unwrap_or(0)
    };
    let (failed, errors) = (count(Outcome::Fail), count(Outcome::Error));
    let pass = failed == 0 && errors == 0 && undecided(false) <= allowance(false) && undecided(true) <= allowance(true);
    Ok(SuiteReport {
        passed: count(Outcome::Pass),
        failed,
        indeterminate: count(Outcome::Indeterminate),
        errors,
        pass,
        reports,
    })
}

#[cfg(test)]
mod tests;
