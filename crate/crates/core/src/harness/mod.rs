//! Comparison reports, norms and the property suite.

mod suite;

use alloc::format;
use alloc::string::String;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::DiscreteSolution;

pub use suite::{
    run_property_suite, CheckRecord, SuiteConfig, SuiteName, SuiteReport, SuiteResult, SuiteSizes, SCHEMA_VERSION,
};

/// Statistically calibrated per-node tolerance
/// `se_factor · SE + dt_factor · dt + floor`, where `SE` is the larger of the
/// two solutions' regression standard errors at the node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetModel {
    pub se_factor: f64,
    pub dt_factor: f64,
    pub floor: f64,
}

impl Default for BudgetModel {
    fn default() -> Self {
        Self { se_factor: 3.0, dt_factor: 10.0, floor: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Uniform(f64),
    Model(BudgetModel),
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Model(BudgetModel::default())
    }
}

impl Budget {
    pub fn at(&self, a: &DiscreteSolution, b: &DiscreteSolution, outer: usize, node: usize) -> f64 {
        match *self {
            Budget::Uniform(v) => v,
            Budget::Model(m) => {
                let se = a.regression_se(outer, node).max(b.regression_se(outer, node));
                m.se_factor * se + m.dt_factor * a.grid().dt() + m.floor
            }
        }
    }

    /// Same budget measured in units scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Budget::Uniform(v) => Budget::Uniform(v * factor),
            Budget::Model(m) => Budget::Model(BudgetModel {
                se_factor: m.se_factor,
                dt_factor: m.dt_factor * factor,
                floor: m.floor * factor,
            }),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            Budget::Uniform(v) => format!("uniform {v}"),
            Budget::Model(m) => format!("{}·SE + {}·dt + {}", m.se_factor, m.dt_factor, m.floor),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub nodes_checked: usize,
    /// `max (Y¹ − Y²)` over nodes and paths.
    pub worst_violation: f64,
    pub violation_fraction: f64,
    /// Largest per-node budget applied.
    pub budget: f64,
    pub budget_model: String,
    pub verdict: Verdict,
}

/// Checks `Y¹ ≤ Y² + budget` at every node of every path. Both solutions
/// must come from the same noise bundle.
pub fn compare(lower: &DiscreteSolution, upper: &DiscreteSolution, budget: &Budget) -> Result<ComparisonReport> {
    if lower.provenance.noise != upper.provenance.noise
        || lower.grid() != upper.grid()
        || lower.y_all().len() != upper.y_all().len()
    {
        return Err(Error::Provenance);
    }
    let nodes = lower.nodes();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0usize;
    let mut max_budget = 0.0f64;
    for o in 0..lower.outer() {
        for i in 0..nodes {
            let allowed = budget.at(lower, upper, o, i);
            max_budget = max_budget.max(allowed);
            for j in 0..lower.inner() {
                let gap = lower.y(o, j, i) - upper.y(o, j, i);
                if gap > worst || gap.is_nan() {
                    worst = gap;
                }
                if !(gap <= allowed) {
                    violations += 1;
                }
            }
        }
    }
    let checked = lower.y_all().len();
    Ok(ComparisonReport {
        nodes_checked: checked,
        worst_violation: worst,
        violation_fraction: violations as f64 / checked as f64,
        budget: max_budget,
        budget_model: budget.describe(),
        verdict: if violations == 0 { Verdict::Consistent } else { Verdict::Violated },
    })
}

/// Empirical `E[sup_i |Y_{t_i}|²]`.
pub fn s2_norm(solution: &DiscreteSolution) -> f64 {
    let mut total = 0.0;
    for o in 0..solution.outer() {
        for j in 0..solution.inner() {
            total += solution.y_path(o, j).iter().map(|v| v * v).fold(0.0, f64::max);
        }
    }
    total / (solution.outer() * solution.inner()) as f64
}

/// Empirical `E[Σ_i |Z_{t_i}|² dt]` over the nodes `0..N`.
pub fn m2_norm(solution: &DiscreteSolution) -> f64 {
    let dt = solution.grid().dt();
    let mut total = 0.0;
    for o in 0..solution.outer() {
        for j in 0..solution.inner() {
            for i in 0..solution.nodes() - 1 {
                total += solution.z(o, j, i).iter().map(|v| v * v).sum::<f64>() * dt;
            }
        }
    }
    total / (solution.outer() * solution.inner()) as f64
}

/// Sup-distance between the `Y` arrays of two coupled solutions.
pub fn sup_distance(a: &DiscreteSolution, b: &DiscreteSolution) -> Result<f64> {
    if a.provenance.noise != b.provenance.noise || a.y_all().len() != b.y_all().len() {
        return Err(Error::Provenance);
    }
    Ok(a.y_all().iter().zip(b.y_all()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{catalog_lookup, ScalarFunction};
    use crate::noise::{make_grid, sample_noise};
    use crate::solver::{solve, SchemeConfig};

    fn noise(seed: u64) -> crate::noise::NoiseBundle {
        sample_noise(make_grid(1.0, 16).unwrap(), 1, 1, 2, 64, seed).unwrap()
    }

    #[test]
    fn zero_below_drift() {
        let n = noise(1);
        let zero = catalog_lookup("constant").unwrap().with_driver("zero", ScalarFunction::constant(0.0));
        let zero = zero.with_terminal("zero", crate::model::TerminalCondition::constant(0.0));
        let drift = catalog_lookup("pure_drift").unwrap();
        let cfg = SchemeConfig::default();
        let a = solve(&zero, &n, &cfg).unwrap();
        let b = solve(&drift, &n, &cfg).unwrap();
        let r = compare(&a, &b, &Budget::Uniform(0.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
        assert_eq!(r.worst_violation, 0.0);
        let r = compare(&b, &a, &Budget::Uniform(0.0)).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        assert_eq!(m2_norm(&a), 0.0);
        assert_eq!(s2_norm(&b), 1.0);
    }

    #[test]
    fn identical_problems_have_zero_worst() {
        let n = noise(2);
        let p = catalog_lookup("linear").unwrap();
        let a = solve(&p, &n, &SchemeConfig::default()).unwrap();
        let r = compare(&a, &a.clone(), &Budget::default()).unwrap();
        assert_eq!(r.worst_violation, 0.0);
        assert_eq!(r.violation_fraction, 0.0);
    }

    #[test]
    fn different_noise_is_a_hard_error() {
        let p = catalog_lookup("constant").unwrap();
        let a = solve(&p, &noise(1), &SchemeConfig::default()).unwrap();
        let b = solve(&p, &noise(2), &SchemeConfig::default()).unwrap();
        assert_eq!(compare(&a, &b, &Budget::default()), Err(Error::Provenance));
    }
}
