//! Declarative scenario descriptions and the built-in zoo.

use crate::entropy::{geometric_schedule, resolve_method, FieldOptions, LimitOptions, MethodChoice, TimeRule};
use crate::error::{Error, Result};
use crate::geometry::{FlatTorus, GridSpec, Isometry, ModelFlow, Point};
use crate::kernels::{Cutoff, SampleOptions};
use crate::pdesolver::SolverOptions;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Kernel method of a run; `both` adds a PDE cross-check to the closed form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MethodSpec {
    #[default]
    Auto,
    Exact,
    Spectral,
    Pde,
    Both,
}

impl MethodSpec {
    pub fn primary(self) -> MethodChoice {
        match self {
            MethodSpec::Auto | MethodSpec::Both => MethodChoice::Auto,
            MethodSpec::Exact => MethodChoice::Exact,
            MethodSpec::Spectral => MethodChoice::Spectral,
            MethodSpec::Pde => MethodChoice::Pde,
        }
    }

    pub fn cross_check(self) -> bool {
        self == MethodSpec::Both
    }
}

/// Entropy sample times: explicit `times`, or `T_k = t - 2^k` up to `depth`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Defaults to 14 on flat variants, 12 on the sphere and 16 on the cigar.
    pub depth: Option<usize>,
    pub times: Vec<f64>,
}

/// Closed-form sampling controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSpec {
    pub resolution: f64,
    pub per_panel: usize,
    pub series_tol: f64,
    pub floor: f64,
    pub lattice_tol: f64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        let s = SampleOptions::default();
        SamplingSpec {
            resolution: s.resolution,
            per_panel: s.per_panel,
            series_tol: s.series_tol,
            floor: s.floor,
            lattice_tol: s.cutoff.tol,
        }
    }
}

impl SamplingSpec {
    pub fn options(&self) -> SampleOptions {
        SampleOptions {
            resolution: self.resolution,
            floor: self.floor,
            cutoff: Cutoff {
                tol: self.lattice_tol,
                ..Cutoff::default()
            },
            series_tol: self.series_tol,
            per_panel: self.per_panel,
        }
    }
}

/// Tolerances and suite allowances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub limit: LimitOptions,
    pub time_rule: TimeRule,
    /// Per-check tolerance overrides, keyed by check id.
    pub checks: BTreeMap<String, f64>,
    /// Indeterminate reports tolerated among identity, inequality and trend checks.
    pub indeterminate_identity: usize,
    /// Indeterminate reports tolerated among diagnostics.
    pub indeterminate_diagnostic: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            limit: LimitOptions::default(),
            time_rule: TimeRule::default(),
            checks: BTreeMap::new(),
            indeterminate_identity: 0,
            indeterminate_diagnostic: 2,
        }
    }
}

/// One run: a flow, where to base the kernels, how to discretize, what to check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub flow: ModelFlow,
    /// Defaults to the variant's canonical point.
    #[serde(default)]
    pub base_points: Vec<Point>,
    #[serde(default)]
    pub base_time: f64,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub sampling: SamplingSpec,
    /// Check ids or suite names.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

/// Coarse classification used to decide which checks apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Euclidean,
    Torus,
    Product,
    Quotient,
    Sphere,
    Cigar,
}

impl ScenarioKind {
    pub fn of(flow: &ModelFlow) -> Self {
        match flow {
            ModelFlow::EuclideanStatic { .. } => ScenarioKind::Euclidean,
            ModelFlow::FlatTorus { torus } if torus.dim() == 1 => ScenarioKind::Torus,
            ModelFlow::FlatTorus { .. } | ModelFlow::FlatProduct { .. } => ScenarioKind::Product,
            ModelFlow::TorusQuotient { .. } => ScenarioKind::Quotient,
            ModelFlow::ShrinkingSphere { .. } => ScenarioKind::Sphere,
            ModelFlow::CigarSoliton => ScenarioKind::Cigar,
        }
    }
}

fn canonical_point(flow: &ModelFlow) -> Point {
    match flow {
        ModelFlow::ShrinkingSphere { .. } | ModelFlow::CigarSoliton => Point(vec![0.0]),
        other => Point::origin(other.dim()),
    }
}

impl ScenarioConfig {
    /// A scenario with every optional field at its default.
    pub fn new(name: impl Into<String>, flow: ModelFlow) -> Self {
        ScenarioConfig {
            name: name.into(),
            flow,
            base_points: Vec::new(),
            base_time: 0.0,
            schedule: ScheduleSpec::default(),
            grid: GridSpec::default(),
            method: MethodSpec::default(),
            solver: SolverOptions::default(),
            sampling: SamplingSpec::default(),
            checks: Vec::new(),
            tolerances: Tolerances::default(),
            output: None,
            seed: 0,
        }
    }

    pub fn kind(&self) -> ScenarioKind {
        ScenarioKind::of(&self.flow)
    }

    pub fn base(&self) -> Point {
        self.base_points.first().cloned().unwrap_or_else(|| canonical_point(&self.flow))
    }

    pub fn bases(&self) -> Vec<Point> {
        if self.base_points.is_empty() {
            vec![canonical_point(&self.flow)]
        } else {
            self.base_points.clone()
        }
    }

    pub fn depth(&self) -> usize {
        self.schedule.depth.unwrap_or(match self.flow {
            ModelFlow::ShrinkingSphere { .. } => 12,
            ModelFlow::CigarSoliton => 16,
            _ => 14,
        })
    }

    /// Sample times, in decreasing order.
    pub fn times(&self) -> Vec<f64> {
        let mut times = if self.schedule.times.is_empty() {
            geometric_schedule(self.base_time, self.depth())
        } else {
            self.schedule.times.clone()
        };
        times.sort_by(|a, b| b.total_cmp(a));
        times.dedup();
        times
    }

    pub fn field_options(&self) -> FieldOptions {
        FieldOptions {
            method: self.method.primary(),
            sample: self.sampling.options(),
            grid: self.grid.clone(),
            solver: self.solver.clone(),
        }
    }

    pub fn tolerance(&self, check: &str, default: f64) -> f64 {
        self.tolerances.checks.get(check).copied().unwrap_or(default)
    }

    /// Structural validation; check ids are validated by the catalog.
    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if self.name.trim().is_empty() {
            return Err(Error::Config("scenario name is empty".into()));
        }
        if !(self.base_time <= 0.0) {
            return Err(Error::Config(format!("base time {} must lie in (-inf, 0]", self.base_time)));
        }
        self.flow.check_time(self.base_time)?;
        for p in self.bases() {
            let want = self.flow.dim();
            let got = p.coords().len();
            let ok = match self.flow {
                ModelFlow::ShrinkingSphere { .. } | ModelFlow::CigarSoliton => got == 1,
                _ => got == want,
            };
            if !ok || p.coords().iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("base point {:?} does not fit {}", p.0, self.flow.short_name())));
            }
        }
        for &s in &self.schedule.times {
            if !(s < self.base_time && s <= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!(
                    "schedule time {s} must lie in (-inf, 0] and before the base time {}",
                    self.base_time
                )));
            }
        }
        if self.schedule.times.is_empty() && self.depth() < 2 {
            return Err(Error::Config("schedule depth must be at least 2".into()));
        }
        resolve_method(&self.flow, self.method.primary())?;
        if self.grid.nodes < 8 {
            return Err(Error::Config("grid needs at least 8 nodes".into()));
        }
        if !(self.sampling.resolution > 0.0) || self.sampling.per_panel == 0 {
            return Err(Error::Config("sampling resolution and panel size must be positive".into()));
        }
        Ok(())
    }
}

/// Scenario names accepted by [`zoo`].
pub const ZOO: [&str; 6] = ["euclidean", "torus", "product", "cover", "sphere", "cigar"];

/// A built-in scenario, or all of them for `"all"`.
pub fn zoo(selection: &str) -> Result<Vec<ScenarioConfig>> {
    let one = |name: &str| -> Result<ScenarioConfig> {
        let flow = match name {
            "euclidean" => ModelFlow::EuclideanStatic { dim: 2 },
            "torus" => ModelFlow::circle(1.0),
            "product" => ModelFlow::FlatTorus {
                torus: FlatTorus::cube(2, 1.0),
            },
            "cover" => ModelFlow::TorusQuotient {
                cover: FlatTorus::cube(1, 2.0),
                deck: vec![Isometry::identity(1), Isometry::translation(vec![1.0])],
            },
            "sphere" => ModelFlow::sphere(2, 1.0),
            "cigar" => ModelFlow::CigarSoliton,
            other => return Err(Error::Config(format!("unknown zoo scenario `{other}`"))),
        };
        Ok(ScenarioConfig::new(name, flow))
    };
    match selection {
        "all" => ZOO.iter().map(|n| one(n)).collect(),
        list => list.split(',').map(|n| one(n.trim())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zoo_round_trips_through_json() {
        for sc in zoo("all").unwrap() {
            sc.validate().unwrap();
            let text = serde_json::to_string_pretty(&sc).unwrap();
            let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, sc);
            let again = serde_json::to_string_pretty(&back).unwrap();
            assert_eq!(again, text);
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let sc: ScenarioConfig =
            serde_json::from_str(r#"{"name": "s", "flow": {"kind": "shrinking_sphere", "dim": 2, "t_sing": 1.0}}"#).unwrap();
        assert_eq!(sc.depth(), 12);
        assert_eq!(sc.times().len(), 13);
        assert_eq!(sc.base(), Point(vec![0.0]));
        assert_eq!(sc.tolerances.indeterminate_diagnostic, 2);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"name": "s", "flow": {"kind": "cigar_soliton"}, "gird": {}}"#);
        assert!(err.is_err());
    }

    #[test]
    fn validation_rejects_bad_schedules() {
        let mut sc = zoo("torus").unwrap().remove(0);
        sc.schedule.times = vec![-1.0, 0.5];
        assert!(matches!(sc.validate(), Err(Error::Config(_))));
        sc.schedule.times = vec![-1.0, -2.0];
        sc.validate().unwrap();
        assert_eq!(sc.times(), vec![-1.0, -2.0]);
        sc.base_points = vec![Point(vec![0.0, 1.0])];
        assert!(sc.validate().is_err());
    }

    #[test]
    fn methods_are_checked_against_the_flow() {
        let mut sc = zoo("sphere").unwrap().remove(0);
        sc.method = MethodSpec::Exact;
        assert!(sc.validate().is_err());
        sc.method = MethodSpec::Both;
        sc.validate().unwrap();
        assert!(sc.method.cross_check());
    }

    #[test]
    fn kinds() {
        let kinds: Vec<_> = zoo("all").unwrap().iter().map(|s| s.kind()).collect();
        assert_eq!(
            kinds,
            vec![
                ScenarioKind::Euclidean,
                ScenarioKind::Torus,
                ScenarioKind::Product,
                ScenarioKind::Quotient,
                ScenarioKind::Sphere,
                ScenarioKind::Cigar
            ]
        );
        assert!(zoo("nowhere").is_err());
    }
}
