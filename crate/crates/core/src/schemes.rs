//! Constructive existence schemes: the Lipschitz-envelope ladder and the
//! penalized monotone iteration, plus extremal-solution extraction.
//!
//! Every rung is solved on the same noise bundle, so iterates are coupled
//! path by path and their ordering can be checked node by node.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::harness::{sup_distance, Budget};
use crate::model::{AuxField, Hypothesis, Problem, ScalarFunction};
use crate::noise::NoiseBundle;
use crate::regularize::{convergence_schedule, default_resolution, envelope_driver, EnvelopeKind, EnvelopeSpec};
use crate::solver::{solve_with, DiscreteSolution, SchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimal,
    Maximal,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "min" | "minimal" => Some(Direction::Minimal),
            "max" | "maximal" => Some(Direction::Maximal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderScheme {
    Envelope,
    Penalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LadderConfig {
    pub scheme: SchemeConfig,
    /// Stop (and claim convergence) once the sup-distance between
    /// consecutive iterates is at most this.
    pub tolerance: f64,
    /// Envelope lattice spacing; `None` uses the default for each index.
    pub resolution: Option<f64>,
    /// Allowed wrong-way movement between coupled iterates.
    pub budget: Budget,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeConfig { implicit_iterations: 100, ..SchemeConfig::default() },
            tolerance: 0.05,
            resolution: None,
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub pairs_checked: usize,
    pub violations: usize,
    /// Largest wrong-way move before the budget is subtracted.
    pub worst_violation: f64,
}

/// Position of every rung between the two bounding solutions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub nodes_checked: usize,
    pub below_lower: usize,
    pub above_upper: usize,
    pub violation_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Ladder {
    pub scheme: LadderScheme,
    pub direction: Direction,
    /// Envelope index `n`, or the stage number for the penalized iteration.
    pub indices: Vec<f64>,
    pub iterates: Vec<DiscreteSolution>,
    pub deltas: Vec<f64>,
    pub converged: bool,
    pub monotonicity: MonotonicityReport,
    /// `(Y¹, Y²)` for the penalized iteration.
    pub bounds: Option<(DiscreteSolution, DiscreteSolution)>,
    pub sandwich: Option<SandwichReport>,
    /// Set when a rung failed; the ladder holds the rungs before it.
    pub failure: Option<Error>,
    pub notes: Vec<String>,
}

/// Steps needed so that `dt ≤ 1/(2n)` for every index in `schedule`.
pub fn required_steps(horizon: f64, schedule: &[f64]) -> usize {
    let n_max = schedule.iter().cloned().fold(0.0, f64::max);
    (2.0 * n_max * horizon).ceil() as usize
}

/// The default envelope schedule `{2, 4, 8, 16}·C`.
pub fn default_schedule(problem: &Problem) -> Vec<f64> {
    convergence_schedule(problem.driver.growth_constant).to_vec()
}

/// Solves with the driver replaced by its envelope of index `n` for each
/// `n` in `schedule` (inf-envelopes for the minimal direction, sup-envelopes
/// for the maximal one).
pub fn envelope_ladder<E: Executor>(
    problem: &Problem,
    noise: &NoiseBundle,
    config: &LadderConfig,
    schedule: &[f64],
    direction: Direction,
    exec: &E,
) -> Result<Ladder> {
    let h = problem.hypotheses;
    if !h.contains(Hypothesis::H8) && !h.contains(Hypothesis::H8Prime) {
        return Err(Error::MissingData { tag: Hypothesis::H8, missing: "a linear-growth declaration (H8 or H8′)" });
    }
    if schedule.is_empty() {
        return Err(Error::invalid("schemes", "schedule", "empty"));
    }
    let c = problem.driver.growth_constant;
    for w in schedule.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("schemes", "schedule", format!("not increasing at {} → {}", w[0], w[1])));
        }
    }
    if let Some(&n) = schedule.iter().find(|&&n| !(n > c)) {
        return Err(Error::EnvelopeIndex { n, c });
    }
    let needed = required_steps(problem.horizon, schedule);
    if noise.grid().steps() < needed {
        return Err(Error::invalid(
            "schemes",
            "time grid",
            format!(
                "index {} needs dt ≤ 1/(2n): at least {needed} steps, the bundle has {}",
                schedule[schedule.len() - 1],
                noise.grid().steps()
            ),
        ));
    }
    let mut notes = Vec::new();
    if !h.contains(Hypothesis::H7) {
        notes.push(String::from("driver not declared continuous (H7): the limit is not claimed to solve the original equation"));
    }
    let kind = match direction {
        Direction::Minimal => EnvelopeKind::InfFull,
        Direction::Maximal => EnvelopeKind::SupFull,
    };
    let mut indices = Vec::new();
    let mut iterates = Vec::new();
    let mut failure = None;
    for (rung, &n) in schedule.iter().enumerate() {
        let mut spec = EnvelopeSpec::new(problem.driver.clone(), n, kind)?;
        if h.contains(Hypothesis::H8Prime) {
            if let Some(k) = &problem.k {
                spec = spec.with_k(k.clone());
            }
        }
        let resolution = config.resolution.unwrap_or_else(|| default_resolution(n));
        let driver = envelope_driver(&spec, resolution)?;
        let mut rung_problem = problem.with_driver(format!("{}/envelope[n={n}]", problem.name), driver);
        rung_problem.hypotheses = problem.hypotheses;
        match solve_with(&rung_problem, noise, &config.scheme, exec) {
            Ok(sol) => {
                indices.push(n);
                iterates.push(sol);
            }
            Err(e) => {
                failure = Some(Error::Rung { rung, source: alloc::boxed::Box::new(e) });
                break;
            }
        }
    }
    finish_ladder(LadderScheme::Envelope, direction, indices, iterates, None, failure, notes, config)
}

/// Penalized stage driver
/// `f(t, yⁿ⁻¹, zⁿ⁻¹) − C(y − yⁿ⁻¹) ∓ φ(|z − zⁿ⁻¹|)`
/// (`−φ` for the minimal direction, `+φ` for the maximal one), reading the
/// previous stage from the aux field `[y, z₁, …, z_d]`.
pub fn penalized_driver(problem: &Problem, direction: Direction) -> Result<ScalarFunction> {
    let phi = problem
        .modulus
        .clone()
        .ok_or(Error::MissingData { tag: Hypothesis::H5, missing: "a modulus φ" })?;
    let f = problem.driver.clone();
    let c = problem.c;
    let sign = match direction {
        Direction::Minimal => -1.0,
        Direction::Maximal => 1.0,
    };
    let growth = f.growth_constant + c + phi.linear_growth_constant;
    Ok(ScalarFunction::with_aux(
        growth,
        format!("penalized[{}]({})", if sign < 0.0 { "min" } else { "max" }, f.description),
        move |t, y, z, aux| {
            let (y_prev, z_prev) = (aux[0], &aux[1..]);
            let dz = z.iter().zip(z_prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            f.eval(t, y_prev, z_prev) - c * (y - y_prev) + sign * phi.eval(dz)
        },
    ))
}

/// Previous-stage values `[y, z]` per path and node.
pub fn aux_from(solution: &DiscreteSolution) -> Result<AuxField> {
    let (outer, inner, nodes, d) = (solution.outer(), solution.inner(), solution.nodes(), solution.d());
    let mut data = Vec::with_capacity(outer * inner * nodes * (d + 1));
    for o in 0..outer {
        for j in 0..inner {
            for i in 0..nodes {
                data.push(solution.y(o, j, i));
                data.extend_from_slice(solution.z(o, j, i));
            }
        }
    }
    AuxField::new(outer, inner, nodes, d + 1, data)
}

/// One penalized stage driven by `previous`.
pub fn penalized_stage<E: Executor>(
    problem: &Problem,
    noise: &NoiseBundle,
    scheme: &SchemeConfig,
    previous: &DiscreteSolution,
    direction: Direction,
    stage: usize,
    exec: &E,
) -> Result<DiscreteSolution> {
    let driver = penalized_driver(problem, direction)?;
    let staged = problem
        .with_driver(format!("{}/penalized[{stage}]", problem.name), driver)
        .with_aux(Arc::new(aux_from(previous)?));
    solve_with(&staged, noise, scheme, exec)
}

/// Penalized monotone iteration started from the lower (minimal) or upper
/// (maximal) bounding problem, for at most `max_n` stages after stage 0.
pub fn penalized_iteration<E: Executor>(
    problem: &Problem,
    noise: &NoiseBundle,
    config: &LadderConfig,
    max_n: usize,
    direction: Direction,
    exec: &E,
) -> Result<Ladder> {
    for tag in [Hypothesis::H5, Hypothesis::H6, Hypothesis::H9] {
        if !problem.hypotheses.contains(tag) {
            return Err(Error::MissingData { tag, missing: "the hypothesis flag required by the penalized iteration" });
        }
    }
    let (lower, upper) = match problem.bounds.as_deref() {
        Some((lo, hi)) => (lo, hi),
        None => return Err(Error::MissingData { tag: Hypothesis::H9, missing: "a bounding pair (f₁, f₂)" }),
    };
    if problem.modulus.is_none() {
        return Err(Error::MissingData { tag: Hypothesis::H5, missing: "a modulus φ" });
    }
    let wrap = |rung, e| Error::Rung { rung, source: alloc::boxed::Box::new(e) };
    let y1 = solve_with(lower, noise, &config.scheme, exec).map_err(|e| wrap(0, e))?;
    let y2 = solve_with(upper, noise, &config.scheme, exec).map_err(|e| wrap(0, e))?;
    let start = match direction {
        Direction::Minimal => y1.clone(),
        Direction::Maximal => y2.clone(),
    };
    let mut indices = alloc::vec![0.0];
    let mut iterates = alloc::vec![start];
    let mut failure = None;
    for stage in 1..=max_n {
        let prev = &iterates[iterates.len() - 1];
        match penalized_stage(problem, noise, &config.scheme, prev, direction, stage, exec) {
            Ok(sol) => {
                let delta = sup_distance(prev, &sol)?;
                indices.push(stage as f64);
                iterates.push(sol);
                if delta <= config.tolerance {
                    break;
                }
            }
            Err(e) => {
                failure = Some(wrap(stage, e));
                break;
            }
        }
    }
    finish_ladder(
        LadderScheme::Penalized,
        direction,
        indices,
        iterates,
        Some((y1, y2)),
        failure,
        Vec::new(),
        config,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish_ladder(
    scheme: LadderScheme,
    direction: Direction,
    indices: Vec<f64>,
    iterates: Vec<DiscreteSolution>,
    bounds: Option<(DiscreteSolution, DiscreteSolution)>,
    failure: Option<Error>,
    notes: Vec<String>,
    config: &LadderConfig,
) -> Result<Ladder> {
    let deltas = iterates
        .windows(2)
        .map(|w| sup_distance(&w[0], &w[1]))
        .collect::<Result<Vec<_>>>()?;
    let converged = failure.is_none() && deltas.last().is_some_and(|&d| d <= config.tolerance);
    let monotonicity = monotonicity(&iterates, direction, &config.budget);
    let sandwich = bounds.as_ref().map(|(lo, hi)| sandwich(&iterates, lo, hi, &config.budget));
    Ok(Ladder {
        scheme,
        direction,
        indices,
        iterates,
        deltas,
        converged,
        monotonicity,
        bounds,
        sandwich,
        failure,
        notes,
    })
}

fn monotonicity(iterates: &[DiscreteSolution], direction: Direction, budget: &Budget) -> MonotonicityReport {
    let mut report = MonotonicityReport { pairs_checked: 0, violations: 0, worst_violation: 0.0 };
    for w in iterates.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        for o in 0..a.outer() {
            for i in 0..a.nodes() {
                let allowed = budget.at(a, b, o, i);
                for j in 0..a.inner() {
                    let wrong_way = match direction {
                        Direction::Minimal => a.y(o, j, i) - b.y(o, j, i),
                        Direction::Maximal => b.y(o, j, i) - a.y(o, j, i),
                    };
                    report.pairs_checked += 1;
                    report.worst_violation = report.worst_violation.max(wrong_way);
                    if !(wrong_way <= allowed) {
                        report.violations += 1;
                    }
                }
            }
        }
    }
    report
}

fn sandwich(iterates: &[DiscreteSolution], lo: &DiscreteSolution, hi: &DiscreteSolution, budget: &Budget) -> SandwichReport {
    let mut report = SandwichReport { nodes_checked: 0, below_lower: 0, above_upper: 0, violation_fraction: 0.0 };
    for it in iterates {
        for o in 0..it.outer() {
            for i in 0..it.nodes() {
                let b_lo = budget.at(lo, it, o, i);
                let b_hi = budget.at(it, hi, o, i);
                for j in 0..it.inner() {
                    let y = it.y(o, j, i);
                    report.nodes_checked += 1;
                    if !(lo.y(o, j, i) - y <= b_lo) {
                        report.below_lower += 1;
                    }
                    if !(y - hi.y(o, j, i) <= b_hi) {
                        report.above_upper += 1;
                    }
                }
            }
        }
    }
    if report.nodes_checked > 0 {
        report.violation_fraction = (report.below_lower + report.above_upper) as f64 / report.nodes_checked as f64;
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    Minimal,
    Maximal,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalReport {
    pub final_delta: Option<f64>,
    pub monotonicity_violations: usize,
    pub claimed: Claim,
    /// `max |Y|` of the returned iterate.
    pub sup_norm: f64,
    pub rungs: usize,
}

/// Last iterate and a convergence claim: the direction is claimed only when
/// the final delta is within `tolerance` and no monotonicity violation
/// exceeded the budget.
pub fn extract_extremal(ladder: &Ladder, tolerance: f64) -> Result<(DiscreteSolution, ExtremalReport)> {
    let last = ladder
        .iterates
        .last()
        .ok_or_else(|| Error::invalid("schemes", "ladder", "has no iterates"))?;
    let final_delta = ladder.deltas.last().copied();
    let settled = final_delta.is_some_and(|d| d <= tolerance) && ladder.monotonicity.violations == 0;
    let claimed = match (settled, ladder.direction) {
        (false, _) => Claim::Inconclusive,
        (true, Direction::Minimal) => Claim::Minimal,
        (true, Direction::Maximal) => Claim::Maximal,
    };
    let sup_norm = last.y_all().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((
        last.clone(),
        ExtremalReport {
            final_delta,
            monotonicity_violations: ladder.monotonicity.violations,
            claimed,
            sup_norm,
            rungs: ladder.iterates.len(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_problem, catalog_lookup, Hypotheses, ProblemSpec, TerminalCondition, VectorFunction};
    use crate::noise::{make_grid, sample_noise};
    use crate::Sequential;

    fn heaviside_problem() -> Problem {
        build_problem(ProblemSpec {
            name: Some("heaviside".into()),
            driver: Some(
                ScalarFunction::new(1.0, "1{y>=0}", |_, y, _| if y >= 0.0 { 1.0 } else { 0.0 })
                    .independent_of_z()
                    .with_range(0.0, 1.0)
                    .with_jumps(|_, y, _| y == 0.0),
            ),
            coefficient: Some(VectorFunction::zero(1)),
            terminal: Some(TerminalCondition::constant(0.0)),
            hypotheses: Some(Hypotheses::of(&[Hypothesis::H8])),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn lipschitz_rungs_coincide() {
        let p = catalog_lookup("nonunique_sqrt").unwrap();
        let lower = p.lower_bound_problem().unwrap();
        let mut p = lower.clone();
        p.hypotheses = Hypotheses::of(&[Hypothesis::H7, Hypothesis::H8]);
        let noise = sample_noise(make_grid(1.0, 32).unwrap(), 1, 1, 1, 64, 1).unwrap();
        let ladder = envelope_ladder(&p, &noise, &LadderConfig::default(), &[4.0, 8.0], Direction::Minimal, &Sequential).unwrap();
        assert!(ladder.failure.is_none());
        assert!(ladder.deltas[0] < 1e-9, "{:?}", ladder.deltas);
    }

    #[test]
    fn heaviside_ladder_is_monotone() {
        let p = heaviside_problem();
        let noise = sample_noise(make_grid(1.0, 32).unwrap(), 1, 1, 1, 16, 2).unwrap();
        let cfg = LadderConfig { budget: Budget::Uniform(1e-9), ..Default::default() };
        for dir in [Direction::Minimal, Direction::Maximal] {
            let ladder = envelope_ladder(&p, &noise, &cfg, &[2.0, 4.0, 8.0, 16.0], dir, &Sequential).unwrap();
            assert!(ladder.failure.is_none(), "{:?}", ladder.failure);
            assert_eq!(ladder.monotonicity.violations, 0, "{dir:?}: {:?}", ladder.monotonicity);
            assert_eq!(ladder.deltas.len(), 3);
            assert_eq!(ladder.notes.len(), 1);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let p = heaviside_problem();
        let noise = sample_noise(make_grid(1.0, 16).unwrap(), 1, 1, 1, 16, 2).unwrap();
        let err = envelope_ladder(&p, &noise, &LadderConfig::default(), &[2.0, 16.0], Direction::Minimal, &Sequential);
        assert!(matches!(err, Err(Error::Invalid { what: "time grid", .. })));
        assert_eq!(required_steps(1.0, &[2.0, 16.0]), 32);
        let err = envelope_ladder(&p, &noise, &LadderConfig::default(), &[1.0], Direction::Minimal, &Sequential);
        assert!(matches!(err, Err(Error::EnvelopeIndex { .. })));
    }

    #[test]
    fn penalized_needs_bounds() {
        let p = heaviside_problem();
        let noise = sample_noise(make_grid(1.0, 8).unwrap(), 1, 1, 1, 16, 2).unwrap();
        let err = penalized_iteration(&p, &noise, &LadderConfig::default(), 2, Direction::Minimal, &Sequential);
        assert!(matches!(err, Err(Error::MissingData { .. })));
    }

    /// Starting from an exact solution, every penalized stage reproduces it.
    #[test]
    fn exact_start_is_a_fixed_point() {
        let p = catalog_lookup("nonunique_sqrt").unwrap();
        let noise = sample_noise(make_grid(1.0, 16).unwrap(), 1, 1, 1, 64, 3).unwrap();
        let lower = solve_with(p.lower_bound_problem().unwrap(), &noise, &SchemeConfig::default(), &Sequential).unwrap();
        // the lower problem solved by its own penalized stage
        let lp = p.lower_bound_problem().unwrap().clone();
        let lp = Problem { modulus: p.modulus.clone(), c: p.c, ..lp };
        let again = penalized_stage(&lp, &noise, &SchemeConfig::default(), &lower, Direction::Minimal, 1, &Sequential).unwrap();
        assert!(sup_distance(&lower, &again).unwrap() < 1e-9);
    }

    #[test]
    fn nonunique_penalized_ladder_is_sandwiched() {
        let p = catalog_lookup("nonunique_sqrt").unwrap();
        let noise = sample_noise(make_grid(1.0, 32).unwrap(), 1, 1, 2, 256, 4).unwrap();
        let ladder = penalized_iteration(&p, &noise, &LadderConfig::default(), 4, Direction::Minimal, &Sequential).unwrap();
        assert!(ladder.failure.is_none(), "{:?}", ladder.failure);
        assert_eq!(ladder.monotonicity.violations, 0, "{:?}", ladder.monotonicity);
        assert_eq!(ladder.sandwich.as_ref().unwrap().violation_fraction, 0.0);
        let (_, report) = extract_extremal(&ladder, 0.05).unwrap();
        assert_eq!(report.rungs, ladder.iterates.len());
    }

    #[test]
    fn extraction_claims() {
        let p = heaviside_problem();
        let noise = sample_noise(make_grid(1.0, 32).unwrap(), 1, 1, 1, 16, 2).unwrap();
        let ladder = envelope_ladder(&p, &noise, &LadderConfig::default(), &[2.0, 4.0], Direction::Minimal, &Sequential).unwrap();
        let (_, r) = extract_extremal(&ladder, 1e-6).unwrap();
        assert_eq!(r.claimed, Claim::Inconclusive);
        let (_, r) = extract_extremal(&ladder, 10.0).unwrap();
        assert_eq!(r.claimed, Claim::Minimal);
    }
}
