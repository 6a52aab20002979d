//! Scenario registry, experiment runner and report types behind the `sqfn`
//! command line.
//!
//! A run produces an [`ExperimentReport`]: the echoed parameters, one
//! [`Check`] per assertion and an overall verdict. Everything that depends on
//! randomness is driven by a ChaCha generator seeded from the run seed and the
//! scenario name, so reports are reproducible bit for bit.

mod battery;
mod fixtures;
mod scenarios;
#[cfg(test)]
mod tests;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use fixtures::{band_limited, random_box_set, scenario_rng};
pub use scenarios::{
    bilinear_bound_constants, bilinear_ratios, ex37_field, ex38_closed_form, ex38_pointwise, ex38_value_at, meanzero_nonzero_report,
    plancherel_ratios, plotdata, scenario_bilinear_weighted, scenario_ex37, scenario_ex38, scenario_meanzero, BetaChoice,
    BilinearParams, BilinearRatios, Ex37Params, Ex38Params, MeanZeroParams,
};

use crate::{Error, Result};

/// Where a reference value comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    /// Stated in the source text.
    Paper,
    /// Immediate from the definitions.
    Trivial,
    /// Computed by an independent oracle.
    Derived,
}

/// One assertion of a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub anchor: String,
    pub computed: f64,
    pub reference: Option<f64>,
    pub provenance: Provenance,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl Check {
    pub fn new(id: &str, anchor: &str, provenance: Provenance) -> CheckBuilder {
        CheckBuilder {
            check: Check {
                id: id.into(),
                anchor: anchor.into(),
                computed: f64::NAN,
                reference: None,
                provenance,
                tolerance: None,
                pass: false,
            },
        }
    }
}

pub struct CheckBuilder {
    check: Check,
}

impl CheckBuilder {
    pub fn computed(mut self, v: f64) -> Self {
        self.check.computed = v;
        self
    }

    pub fn reference(mut self, v: f64) -> Self {
        self.check.reference = Some(v);
        self
    }

    pub fn tolerance(mut self, v: f64) -> Self {
        self.check.tolerance = Some(v);
        self
    }

    /// `|computed - reference| ≤ tolerance · |reference|`.
    pub fn relative(mut self) -> Check {
        let (c, r, tol) = (self.check.computed, self.check.reference.unwrap_or(0.0), self.check.tolerance.unwrap_or(0.0));
        self.check.pass = c.is_finite() && (c - r).abs() <= tol * r.abs();
        self.check
    }

    /// `|computed - reference| ≤ tolerance`.
    pub fn absolute(mut self) -> Check {
        let (c, r, tol) = (self.check.computed, self.check.reference.unwrap_or(0.0), self.check.tolerance.unwrap_or(0.0));
        self.check.pass = c.is_finite() && (c - r).abs() <= tol;
        self.check
    }

    /// `computed ≤ reference`, both finite.
    pub fn at_most(mut self) -> Check {
        let (c, r) = (self.check.computed, self.check.reference.unwrap_or(f64::NAN));
        self.check.pass = c.is_finite() && r.is_finite() && c <= r;
        self.check
    }

    /// `computed ≥ reference`, both finite.
    pub fn at_least(mut self) -> Check {
        let (c, r) = (self.check.computed, self.check.reference.unwrap_or(f64::NAN));
        self.check.pass = c.is_finite() && r.is_finite() && c >= r;
        self.check
    }

    pub fn pass_if(mut self, ok: bool) -> Check {
        self.check.pass = ok && !self.check.computed.is_nan();
        self.check
    }
}

/// Resolution settings echoed in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub grid_h: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub per_octave: Option<usize>,
    pub seed: u64,
    /// Wall-clock time; left empty by `verify` so that reports compare equal.
    pub runtime_ms: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub params: serde_json::Value,
    pub checks: Vec<Check>,
    pub environment: Environment,
    pub verdict: Verdict,
}

impl ExperimentReport {
    pub fn new(scenario: &str, params: serde_json::Value, checks: Vec<Check>, environment: Environment) -> Self {
        let verdict = if checks.iter().all(|c| c.pass) { Verdict::Pass } else { Verdict::Fail };
        ExperimentReport { scenario: scenario.into(), params, checks, environment, verdict }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn check(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// 0 when every check passes, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }
}

/// Overrides accepted by `sqfn run`; unset fields take scenario defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub grid_h: Option<f64>,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub per_octave: Option<usize>,
    pub seed: u64,
}

pub const DEFAULT_SEED: u64 = 7;

/// The scenarios of the registry, in execution order.
pub const SCENARIOS: [&str; 4] = ["ex38", "ex37", "meanzero", "bilinear-weighted"];
/// Per-module invariant batteries, in execution order.
pub const BATTERIES: [&str; 5] = ["grid", "kernels", "operators", "weights", "carleson"];

/// Every selectable name, batteries first.
pub fn registry() -> Vec<&'static str> {
    BATTERIES.iter().chain(SCENARIOS.iter()).copied().collect()
}

pub fn run_scenario(name: &str, params: &RunParams) -> Result<ExperimentReport> {
    match name {
        "ex38" => scenario_ex38(&Ex38Params::from_run(params)?, params.seed),
        "ex37" => scenario_ex37(&Ex37Params::from_run(params)?, params.seed),
        "meanzero" => scenario_meanzero(&MeanZeroParams::from_run(params)?, params.seed),
        "bilinear-weighted" => scenario_bilinear_weighted(&BilinearParams::from_run(params)?, params.seed),
        other => Err(Error::Config(format!("unknown scenario '{other}'; expected one of {SCENARIOS:?}"))),
    }
}

/// Resolves a selection against the registry: `all` expands to everything,
/// duplicates collapse, and execution follows registry order.
pub fn resolve_selection(selection: &[String]) -> Result<Vec<&'static str>> {
    let reg = registry();
    let mut keep = vec![false; reg.len()];
    for s in selection {
        if s == "all" {
            keep.iter_mut().for_each(|k| *k = true);
            continue;
        }
        let i = reg
            .iter()
            .position(|r| r == s)
            .ok_or_else(|| Error::Config(format!("unknown suite '{s}'; expected 'all' or one of {reg:?}")))?;
        keep[i] = true;
    }
    Ok(reg.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect())
}

/// Runs the selected batteries and scenarios at default resolution and
/// concatenates their checks into one report.
pub fn run_suite(selection: &[String], seed: u64) -> Result<ExperimentReport> {
    let names = resolve_selection(selection)?;
    let params = RunParams { seed, ..RunParams::default() };
    let mut checks = Vec::new();
    let mut echoed = serde_json::Map::new();
    for name in &names {
        let report = if BATTERIES.contains(name) { battery::run(name, seed)? } else { run_scenario(name, &params)? };
        echoed.insert(name.to_string(), report.params);
        checks.extend(report.checks);
    }
    let params = serde_json::json!({ "selection": names, "runs": echoed });
    let env = Environment { grid_h: None, t_min: None, t_max: None, per_octave: None, seed, runtime_ms: None };
    Ok(ExperimentReport::new("suite", params, checks, env))
}

/// Milliseconds since `start`, for `sqfn run`.
pub fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}
