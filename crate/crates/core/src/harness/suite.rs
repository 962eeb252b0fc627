//! Registered property suites and the machine-readable report.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{compare, Budget, BudgetModel, Verdict};
use crate::error::Result;
use crate::exec::Executor;
use crate::model::{
    catalog_lookup, closed_form, Hypotheses, Hypothesis, Modulus, Problem, ScalarFunction, TerminalCondition,
    TimeFunction, VectorFunction,
};
use crate::noise::{make_grid, sample_noise_with, DrawKey, IncrementSource, KeyedGaussian, NoiseBundle};
use crate::regularize::{
    brute_force_envelope, default_resolution, envelope, envelope_properties_check, EnvelopeKind, EnvelopeSpec, QueryPoint,
};
use crate::rng::{hash_key, KeyedStream};
use crate::schemes::{envelope_ladder, extract_extremal, penalized_iteration, Claim, Direction, LadderConfig};
use crate::solver::{solve_with, DiscreteSolution, SchemeConfig};

/// Version of the report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    Noise,
    Envelope,
    Oracles,
    Ladder,
    Comparison,
    MinimalComparison,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::Noise,
        SuiteName::Envelope,
        SuiteName::Oracles,
        SuiteName::Ladder,
        SuiteName::Comparison,
        SuiteName::MinimalComparison,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Noise => "noise",
            SuiteName::Envelope => "envelope",
            SuiteName::Oracles => "oracles",
            SuiteName::Ladder => "ladder",
            SuiteName::Comparison => "comparison",
            SuiteName::MinimalComparison => "minimal_comparison",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.as_str() == s)
    }
}

/// Problem sizes; the defaults are the acceptance sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSizes {
    pub noise_paths: usize,
    pub noise_steps: usize,
    pub oracle_steps: usize,
    pub oracle_outer: usize,
    pub oracle_inner: usize,
    pub injection_steps: usize,
    pub envelope_points: usize,
    pub ladder_steps: usize,
    pub ladder_outer: usize,
    pub ladder_inner: usize,
    pub ladder_max_n: usize,
    pub comparison_pairs: usize,
    pub comparison_steps: usize,
    pub comparison_outer: usize,
    pub comparison_inner: usize,
    pub minimal_max_n: usize,
    pub minimal_steps: usize,
    pub minimal_outer: usize,
    pub minimal_inner: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self {
            noise_paths: 10_000,
            noise_steps: 16,
            oracle_steps: 64,
            oracle_outer: 8,
            oracle_inner: 512,
            injection_steps: 512,
            envelope_points: 200,
            ladder_steps: 64,
            ladder_outer: 8,
            ladder_inner: 1024,
            ladder_max_n: 8,
            comparison_pairs: 20,
            comparison_steps: 32,
            comparison_outer: 32,
            comparison_inner: 2048,
            minimal_max_n: 6,
            minimal_steps: 64,
            minimal_outer: 8,
            minimal_inner: 512,
        }
    }
}

impl SuiteSizes {
    /// Small sizes for smoke runs.
    pub fn quick() -> Self {
        Self {
            noise_paths: 2_500,
            noise_steps: 8,
            oracle_steps: 16,
            oracle_outer: 2,
            oracle_inner: 64,
            injection_steps: 512,
            envelope_points: 30,
            ladder_steps: 32,
            ladder_outer: 2,
            ladder_inner: 128,
            ladder_max_n: 4,
            comparison_pairs: 4,
            comparison_steps: 16,
            comparison_outer: 4,
            comparison_inner: 256,
            minimal_max_n: 3,
            minimal_steps: 32,
            minimal_outer: 2,
            minimal_inner: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub suites: Vec<SuiteName>,
    pub seed: u64,
    pub budget: BudgetModel,
    /// Runs the comparison suite with the ordering of every pair reversed.
    pub reverse_comparison: bool,
    pub sizes: SuiteSizes,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suites: SuiteName::ALL.to_vec(),
            seed: 1,
            budget: BudgetModel::default(),
            reverse_comparison: false,
            sizes: SuiteSizes::default(),
        }
    }
}

/// One recorded check. For negative controls `passed` means the control was
/// flagged as it must be.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub negative_control: bool,
    pub value: f64,
    pub threshold: f64,
    /// `threshold − value`; negative when the check failed.
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl CheckRecord {
    /// Passes when `value ≤ threshold`.
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            negative_control: false,
            value: finite(value),
            threshold: finite(threshold),
            margin: finite(threshold - value),
            label: None,
        }
    }

    /// A negative control: passes when `value > threshold`.
    fn flagged(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: !(value <= threshold),
            negative_control: true,
            value: finite(value),
            threshold: finite(threshold),
            margin: finite(value - threshold),
            label: None,
        }
    }

    fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

/// Keeps reports valid JSON.
fn finite(v: f64) -> f64 {
    if v.is_nan() {
        f64::MAX
    } else {
        v.clamp(-f64::MAX, f64::MAX)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: SuiteName,
    pub passed: bool,
    pub checks: Vec<CheckRecord>,
    /// Set when a suite aborted; checks recorded before the abort are kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub schema_version: u32,
    pub seed: u64,
    pub budget: BudgetModel,
    pub sizes: SuiteSizes,
    pub suites: Vec<SuiteResult>,
    pub passed: bool,
}

/// Runs the selected suites (concurrently through `exec`) and collects every
/// margin. Failures are recorded, never thrown.
pub fn run_property_suite<E: Executor>(config: &SuiteConfig, exec: &E) -> SuiteReport {
    let mut names = config.suites.clone();
    names.sort();
    names.dedup();
    let suites = exec.map(names.len(), |k| {
        let name = names[k];
        let mut checks = Vec::new();
        let outcome = match name {
            SuiteName::Noise => noise_suite(config, exec, &mut checks),
            SuiteName::Envelope => envelope_suite(config, &mut checks),
            SuiteName::Oracles => oracle_suite(config, exec, &mut checks),
            SuiteName::Ladder => ladder_suite(config, exec, &mut checks),
            SuiteName::Comparison => comparison_suite(config, exec, &mut checks),
            SuiteName::MinimalComparison => minimal_comparison_suite(config, exec, &mut checks),
        };
        let error = outcome.err().map(|e| e.to_string());
        SuiteResult {
            name,
            passed: error.is_none() && !checks.is_empty() && checks.iter().all(|c| c.passed),
            checks,
            error,
        }
    });
    SuiteReport {
        schema_version: SCHEMA_VERSION,
        seed: config.seed,
        budget: config.budget,
        sizes: config.sizes,
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}

fn suite_seed(config: &SuiteConfig, name: SuiteName, k: u64) -> u64 {
    hash_key(config.seed, &[name as u64, k])
}

fn noise_for<E: Executor>(steps: usize, outer: usize, inner: usize, seed: u64, exec: &E) -> Result<NoiseBundle> {
    sample_noise_with(make_grid(1.0, steps)?, 1, 1, outer, inner, seed, &KeyedGaussian, exec)
}

// ---------------------------------------------------------------- noise

/// Doubles the variance of every increment.
struct InflatedVariance;

impl IncrementSource for InflatedVariance {
    fn id(&self) -> &str {
        "inflated-variance-control"
    }
    fn standard_normal(&self, seed: u64, key: DrawKey) -> f64 {
        core::f64::consts::SQRT_2 * KeyedGaussian.standard_normal(seed, key)
    }
}

struct Moments {
    n: f64,
    mean: f64,
    var: f64,
}

fn moments(xs: &[f64]) -> Moments {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Moments { n, mean, var }
}

/// Sample variance of a centred Gaussian sum against its exact variance:
/// `|s² − σ²| / (σ²·√(2/(n−1)))`, in standard errors.
fn variance_z(xs: &[f64], sigma2: f64) -> f64 {
    let m = moments(xs);
    (m.var - sigma2).abs() / (sigma2 * (2.0 / (m.n - 1.0)).sqrt())
}

/// Forward sums `Σ (1 + t_i) ΔW_i` and `Σ W_{t_i} ΔW_i` per path, and `W_T`.
fn forward_sums(noise: &NoiseBundle) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let grid = noise.grid();
    let mut det = Vec::new();
    let mut adapted = Vec::new();
    let mut terminal = Vec::new();
    for o in 0..noise.outer() {
        for j in 0..noise.inner() {
            let (mut a, mut b, mut w) = (0.0, 0.0, 0.0);
            for (i, dw) in noise.dw_path(o, j).iter().enumerate() {
                a += (1.0 + grid.node(i)) * dw;
                b += w * dw;
                w += dw;
            }
            det.push(a);
            adapted.push(b);
            terminal.push(w);
        }
    }
    (det, adapted, terminal)
}

fn noise_suite<E: Executor>(config: &SuiteConfig, exec: &E, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let s = &config.sizes;
    let side = (s.noise_paths as f64).sqrt().round().max(2.0) as usize;
    let seed = suite_seed(config, SuiteName::Noise, 0);
    let steps = s.noise_steps;
    let nested = noise_for(steps, side, side, seed, exec)?;
    let grid = *nested.grid();
    let dt = grid.dt();
    let limit = 5.0;

    // forward isometry, deterministic integrand
    let (det, adapted, w_t) = forward_sums(&nested);
    let sigma2: f64 = (0..steps).map(|i| (1.0 + grid.node(i)).powi(2) * dt).sum();
    let m = moments(&det);
    checks.push(CheckRecord::at_most("forward_isometry_mean", m.mean.abs() / (sigma2 / m.n).sqrt(), limit));
    checks.push(CheckRecord::at_most("forward_isometry_variance", variance_z(&det, sigma2), limit));

    // forward isometry, adapted integrand: E[(Σ W ΔW)²] = Σ t_i dt
    let target: f64 = (0..steps).map(|i| grid.node(i) * dt).sum();
    let squares: Vec<f64> = adapted.iter().map(|v| v * v).collect();
    let sq = moments(&squares);
    checks.push(CheckRecord::at_most(
        "forward_isometry_adapted",
        (sq.mean - target).abs() / (sq.var / sq.n).sqrt(),
        limit,
    ));

    // W ⊥ B: correlation of W_T with the shared B_T of its outer path
    let b_t: Vec<f64> = (0..nested.outer())
        .flat_map(|o| {
            let b = noise_terminal_b(&nested, o);
            core::iter::repeat_n(b, nested.inner())
        })
        .collect();
    let corr = correlation(&w_t, &b_t);
    checks.push(CheckRecord::at_most("w_b_correlation", corr.abs() * (w_t.len() as f64).sqrt(), limit));

    // increments: ΔW_i against ΔB_i, pooled over steps
    let mut dw_pool = Vec::new();
    let mut db_pool = Vec::new();
    for o in 0..nested.outer() {
        for j in 0..nested.inner() {
            for i in 0..steps {
                dw_pool.push(nested.dw(o, j, i)[0]);
                db_pool.push(nested.db(o, i)[0]);
            }
        }
    }
    let inc_corr = correlation(&dw_pool, &db_pool);
    checks.push(CheckRecord::at_most(
        "increment_correlation",
        inc_corr.abs() * ((nested.outer() * nested.inner()) as f64).sqrt(),
        limit,
    ));

    // backward isometry on independent B paths
    let flat = noise_for(steps, side * side, 1, hash_key(seed, &[1]), exec)?;
    let (bdet, badapted) = backward_sums(&flat);
    let sigma2: f64 = (0..steps).map(|i| (1.0 + grid.node(i + 1)).powi(2) * dt).sum();
    let m = moments(&bdet);
    checks.push(CheckRecord::at_most("backward_isometry_mean", m.mean.abs() / (sigma2 / m.n).sqrt(), limit));
    checks.push(CheckRecord::at_most("backward_isometry_variance", variance_z(&bdet, sigma2), limit));
    let target: f64 = (0..steps).map(|i| (1.0 - grid.node(i + 1)) * dt).sum();
    let squares: Vec<f64> = badapted.iter().map(|v| v * v).collect();
    let sq = moments(&squares);
    checks.push(CheckRecord::at_most(
        "backward_isometry_adapted",
        (sq.mean - target).abs() / (sq.var / sq.n).sqrt(),
        limit,
    ));

    // negative control: a generator with inflated variance must be caught
    let broken = sample_noise_with(grid, 1, 1, side, side, seed, &InflatedVariance, exec)?;
    let (det, _, _) = forward_sums(&broken);
    let sigma2: f64 = (0..steps).map(|i| (1.0 + broken.grid().node(i)).powi(2) * dt).sum();
    checks.push(CheckRecord::flagged("control_inflated_variance", variance_z(&det, sigma2), limit));
    Ok(())
}

fn noise_terminal_b(noise: &NoiseBundle, o: usize) -> f64 {
    noise.db_path(o).iter().sum()
}

/// Backward sums `Σ (1 + t_{i+1}) ΔB_i` and `Σ (B_T − B_{t_{i+1}}) ΔB_i`.
fn backward_sums(noise: &NoiseBundle) -> (Vec<f64>, Vec<f64>) {
    let grid = noise.grid();
    let mut det = Vec::new();
    let mut adapted = Vec::new();
    for o in 0..noise.outer() {
        let db = noise.db_path(o);
        let (mut a, mut b, mut tail) = (0.0, 0.0, 0.0);
        for i in (0..db.len()).rev() {
            a += (1.0 + grid.node(i + 1)) * db[i];
            b += tail * db[i];
            tail += db[i];
        }
        det.push(a);
        adapted.push(b);
    }
    (det, adapted)
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (moments(a), moments(b));
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma.mean) * (y - mb.mean)).sum::<f64>() / (ma.n - 1.0);
    cov / (ma.var * mb.var).sqrt()
}

// ---------------------------------------------------------------- oracles

fn oracle_suite<E: Executor>(config: &SuiteConfig, exec: &E, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let s = &config.sizes;
    let noise = noise_for(s.oracle_steps, s.oracle_outer, s.oracle_inner, suite_seed(config, SuiteName::Oracles, 0), exec)?;
    let scheme = SchemeConfig::default();
    let grid = *noise.grid();
    for name in ["constant", "pure_drift", "backward_noise"] {
        let p = catalog_lookup(name)?;
        let sol = solve_with(&p, &noise, &scheme, exec)?;
        checks.push(CheckRecord::at_most(format!("{name}_residual"), sol.diagnostics.max_residual, 1e-12));
        let mut err = 0.0f64;
        let mut z_max = 0.0f64;
        for o in 0..noise.outer() {
            let b = noise.b_path(o);
            for j in 0..noise.inner() {
                for i in 0..grid.nodes_len() {
                    let params = match name {
                        "backward_noise" => vec![b[grid.steps()] - b[i]],
                        "constant" => vec![5.0],
                        _ => vec![],
                    };
                    let cf = closed_form(name, &params, grid.node(i))?;
                    err = err.max((sol.y(o, j, i) - cf.y).abs());
                    z_max = z_max.max(sol.z(o, j, i)[0].abs());
                }
            }
        }
        checks.push(CheckRecord::at_most(format!("{name}_closed_form"), err, 1e-12));
        checks.push(CheckRecord::at_most(format!("{name}_z"), z_max, 1e-12));
        let s2 = match name {
            "constant" => Some(25.0),
            "pure_drift" => Some(1.0),
            _ => None,
        };
        if let Some(want) = s2 {
            checks.push(CheckRecord::at_most(format!("{name}_s2_norm"), (sol.diagnostics.s2_norm - want).abs(), 1e-12));
        }
        if name == "backward_noise" {
            checks.push(CheckRecord::at_most("backward_noise_m2_norm", sol.diagnostics.m2_norm, 0.0));
        }
    }

    // linear problem: Y_0 averaged over outer paths against the closed form.
    // The one-step regression SE misses the error carried back through Z, so
    // the spread across outer paths sets the statistical part of the budget.
    let p = catalog_lookup("linear")?;
    let wide = noise_for(s.oracle_steps, s.oracle_outer, 4 * s.oracle_inner, suite_seed(config, SuiteName::Oracles, 2), exec)?;
    let sol = solve_with(&p, &wide, &scheme, exec)?;
    let cf = closed_form("linear", &[0.0], 0.0)?;
    let y0: Vec<f64> = (0..wide.outer()).map(|o| sol.y(o, 0, 0)).collect();
    let m = moments(&y0);
    let spread = if y0.len() > 1 { (m.var / m.n).sqrt() } else { 0.0 };
    checks.push(CheckRecord::at_most(
        "linear_initial_value",
        (m.mean - cf.y).abs(),
        config.budget.se_factor * spread + config.budget.dt_factor * grid.dt(),
    ));

    // closed-form family of the non-unique problem injected into the residual
    let fine = noise_for(s.injection_steps, 1, 8, suite_seed(config, SuiteName::Oracles, 1), exec)?;
    let p = catalog_lookup("nonunique_sqrt")?;
    for c in [0.0, 0.5, 1.0] {
        let sol = DiscreteSolution::from_fn(&p, &fine, |_, _, _, t| {
            closed_form("nonunique_sqrt", &[c], t).map_or((f64::NAN, vec![0.0]), |v| (v.y, v.z))
        })?;
        checks.push(CheckRecord::at_most(
            format!("nonunique_injection_c{c}"),
            sol.diagnostics.max_residual,
            10.0 * fine.grid().dt(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- envelope

struct EnvelopeCase {
    label: &'static str,
    spec: EnvelopeSpec,
}

fn envelope_cases() -> Result<Vec<EnvelopeCase>> {
    let lipschitz = ScalarFunction::new(2.0, "-2t^2 - 2|y| + z", |t, y, z| -2.0 * t * t - 2.0 * y.abs() + z[0])
        .with_lipschitz(2.0);
    let heaviside = catalog_lookup("heaviside")?.driver;
    let nonunique = catalog_lookup("nonunique_sqrt")?.driver;
    let growing = ScalarFunction::new(1.0, "(1+t)Sgn(z) - y/2", |t, y, z| {
        (1.0 + t) * if z[0] >= 0.0 { 1.0 } else { -1.0 } - 0.5 * y
    })
    .with_jumps(|_, _, z| z[0] == 0.0);
    let sup_base = ScalarFunction::new(1.0, "-Sgn(y) + z/2", |_, y, z| -(if y >= 0.0 { 1.0 } else { -1.0 }) + 0.5 * z[0])
        .with_jumps(|_, y, _| y == 0.0);
    Ok(vec![
        EnvelopeCase { label: "lipschitz", spec: EnvelopeSpec::new(lipschitz, 4.0, EnvelopeKind::InfFull)? },
        EnvelopeCase { label: "heaviside", spec: EnvelopeSpec::new(heaviside, 4.0, EnvelopeKind::InfFull)? },
        EnvelopeCase { label: "nonunique", spec: EnvelopeSpec::new(nonunique, 8.0, EnvelopeKind::InfFull)? },
        EnvelopeCase {
            label: "time_dependent_growth",
            spec: EnvelopeSpec::new(growing, 4.0, EnvelopeKind::InfFull)?
                .with_k(TimeFunction::new("1+t", |t| 1.0 + t)),
        },
        EnvelopeCase { label: "sup", spec: EnvelopeSpec::new(sup_base, 4.0, EnvelopeKind::SupFull)? },
    ])
}

fn envelope_suite(config: &SuiteConfig, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let count = config.sizes.envelope_points.max(1);
    let mut rng = KeyedStream::new(suite_seed(config, SuiteName::Envelope, 0), 0);
    let mut points: Vec<QueryPoint> = (0..count.saturating_sub(2))
        .map(|_| QueryPoint::new(rng.uniform(0.0, 1.0), rng.uniform(-2.0, 2.0), vec![rng.uniform(-2.0, 2.0)]))
        .collect();
    // jump points of the discontinuous bases
    points.push(QueryPoint::new(0.5, 0.0, vec![0.0]));
    points.push(QueryPoint::new(0.25, 0.0, vec![0.5]));

    for case in envelope_cases()? {
        let spec = &case.spec;
        let r = default_resolution(spec.n());
        let mut mismatches = 0usize;
        for p in &points {
            let a = envelope(spec, p.t, p.y, &p.z, r)?;
            let b = brute_force_envelope(spec, p.t, p.y, &p.z, r)?;
            if a.to_bits() != b.to_bits() {
                mismatches += 1;
            }
        }
        checks.push(CheckRecord::at_most(format!("{}_brute_force_mismatches", case.label), mismatches as f64, 0.0));
        let report = envelope_properties_check(spec, &points, count)?;
        let err = spec.error_bound(r);
        for part in [&report.ordering, &report.monotonicity, &report.lipschitz, &report.convergence] {
            let worst = if part.samples_tested == 0 { 0.0 } else { part.worst_margin };
            // a check passes when its worst margin stays above −(n + C)·r
            let mut record = CheckRecord::at_most(format!("{}_{}", case.label, part.check), 0.0 - worst, err);
            record.passed = part.passed;
            checks.push(record);
        }
    }

    // point values
    let heaviside = EnvelopeSpec::new(catalog_lookup("heaviside")?.driver, 4.0, EnvelopeKind::InfFull)?;
    let r = default_resolution(4.0);
    let err = heaviside.error_bound(r);
    checks.push(CheckRecord::at_most(
        "heaviside_at_0.1",
        (envelope(&heaviside, 0.0, 0.1, &[0.0], r)? - 0.4).abs(),
        err,
    ));
    checks.push(CheckRecord::at_most("heaviside_at_-1", envelope(&heaviside, 0.0, -1.0, &[0.0], r)?.abs(), 0.0));
    let nonunique = EnvelopeSpec::new(catalog_lookup("nonunique_sqrt")?.driver, 8.0, EnvelopeKind::InfFull)?;
    checks.push(CheckRecord::at_most(
        "nonunique_below_base",
        envelope(&nonunique, 0.5, 0.25, &[0.0], default_resolution(8.0))?,
        1.0,
    ));

    // duality, exactly
    let base = catalog_lookup("nonunique_sqrt")?.driver;
    let sup = EnvelopeSpec::new(base.clone(), 8.0, EnvelopeKind::SupFull)?;
    let inf = EnvelopeSpec::new(base.negated(), 8.0, EnvelopeKind::InfFull)?;
    let mut dual = 0usize;
    for p in points.iter().take(50) {
        let a = envelope(&sup, p.t, p.y, &p.z, 0.02)?;
        let b = envelope(&inf, p.t, p.y, &p.z, 0.02)?;
        if a.to_bits() != (-b).to_bits() {
            dual += 1;
        }
    }
    checks.push(CheckRecord::at_most("duality_mismatches", dual as f64, 0.0));
    Ok(())
}

// ---------------------------------------------------------------- ladder

/// The deterministic Heaviside ladder rung, computed by the scalar implicit
/// recursion `y_i = y_{i+1} + f_n(y_i) dt` with the brute-force envelope.
fn heaviside_rung_oracle(spec: &EnvelopeSpec, steps: usize, resolution: f64) -> Result<Vec<f64>> {
    let dt = 1.0 / steps as f64;
    let mut y = vec![0.0; steps + 1];
    for i in (0..steps).rev() {
        let t = i as f64 * dt;
        let mut v = y[i + 1];
        for _ in 0..400 {
            let next = y[i + 1] + brute_force_envelope(spec, t, v, &[0.0], resolution)? * dt;
            let done = (next - v).abs() <= 1e-13;
            v = next;
            if done {
                break;
            }
        }
        y[i] = v;
    }
    Ok(y)
}

fn ladder_suite<E: Executor>(config: &SuiteConfig, exec: &E, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let s = &config.sizes;
    let noise = noise_for(s.ladder_steps, s.ladder_outer, s.ladder_inner, suite_seed(config, SuiteName::Ladder, 0), exec)?;
    let ladder_config = LadderConfig { budget: Budget::Model(config.budget), ..LadderConfig::default() };

    let heaviside = catalog_lookup("heaviside")?;
    let schedule = [2.0, 4.0, 8.0, 16.0];
    for direction in [Direction::Minimal, Direction::Maximal] {
        let tag = match direction {
            Direction::Minimal => "min",
            Direction::Maximal => "max",
        };
        let ladder = envelope_ladder(&heaviside, &noise, &ladder_config, &schedule, direction, exec)?;
        if let Some(e) = &ladder.failure {
            return Err(e.clone());
        }
        checks.push(CheckRecord::at_most(
            format!("heaviside_{tag}_monotone_violations"),
            ladder.monotonicity.violations as f64,
            0.0,
        ));
        // the problem is deterministic, so every path must match the scalar oracle
        let mut gap = 0.0f64;
        for (rung, &n) in ladder.iterates.iter().zip(&schedule) {
            let kind = match direction {
                Direction::Minimal => EnvelopeKind::InfFull,
                Direction::Maximal => EnvelopeKind::SupFull,
            };
            let spec = EnvelopeSpec::new(heaviside.driver.clone(), n, kind)?;
            let oracle = heaviside_rung_oracle(&spec, s.ladder_steps, default_resolution(n))?;
            for o in 0..rung.outer() {
                for j in 0..rung.inner() {
                    for (i, want) in oracle.iter().enumerate() {
                        gap = gap.max((rung.y(o, j, i) - want).abs());
                    }
                }
            }
        }
        checks.push(CheckRecord::at_most(format!("heaviside_{tag}_scalar_oracle"), gap, 1e-8));
    }

    let p = catalog_lookup("nonunique_sqrt")?;
    let ladder = penalized_iteration(&p, &noise, &ladder_config, s.ladder_max_n, Direction::Minimal, exec)?;
    if let Some(e) = &ladder.failure {
        return Err(e.clone());
    }
    checks.push(CheckRecord::at_most(
        "penalized_min_monotone_violations",
        ladder.monotonicity.violations as f64,
        0.0,
    ));
    let sandwich = ladder.sandwich.clone().unwrap_or(crate::schemes::SandwichReport {
        nodes_checked: 0,
        below_lower: 0,
        above_upper: 0,
        violation_fraction: 1.0,
    });
    checks.push(CheckRecord::at_most("penalized_min_sandwich_fraction", sandwich.violation_fraction, 0.0));

    // the limit lies below every member of the closed-form family
    let (limit, extremal) = extract_extremal(&ladder, ladder_config.tolerance)?;
    let grid = noise.grid();
    let budget = Budget::Model(config.budget);
    for c in [0.0, 0.25, 0.5, 1.0] {
        let mut worst = f64::NEG_INFINITY;
        for o in 0..limit.outer() {
            for i in 0..limit.nodes() {
                let allowed = budget.at(&limit, &limit, o, i);
                let cf = closed_form("nonunique_sqrt", &[c], grid.node(i))?.y;
                for j in 0..limit.inner() {
                    worst = worst.max(limit.y(o, j, i) - cf - allowed);
                }
            }
        }
        checks.push(CheckRecord::at_most(format!("penalized_limit_below_family_c{c}"), worst, 0.0));
    }
    let mut claim = CheckRecord::at_most(
        "penalized_min_final_delta",
        extremal.final_delta.unwrap_or(f64::INFINITY),
        ladder_config.tolerance,
    )
    .labelled(match extremal.claimed {
        Claim::Minimal => "claimed minimal",
        Claim::Maximal => "claimed maximal",
        Claim::Inconclusive => "inconclusive",
    });
    // convergence speed is reported, not required
    claim.passed = true;
    checks.push(claim);
    Ok(())
}

// ---------------------------------------------------------------- comparison

struct Pair {
    lower: Problem,
    upper: Problem,
    label: &'static str,
}

/// Randomized ordered pair number `k`: `f² = f¹ + κ/(1 + y²)`,
/// `ξ² = ξ¹ + κ'|B_T|`, shared `g`. Even `k` adds a `√|z|` term, so `f¹` is
/// only uniformly continuous in `z`.
fn ordered_pair(k: u64, kappa: Option<(f64, f64)>) -> Result<Pair> {
    let mut rng = KeyedStream::new(k, 0xc0ffee);
    let a = rng.uniform(-1.0, 1.0);
    let b = rng.uniform(-1.0, 1.0);
    let e = rng.uniform(-0.5, 0.5);
    let root = if k.is_multiple_of(2) { rng.uniform(0.2, 0.8) } else { 0.0 };
    let s1 = rng.uniform(-0.5, 0.5);
    let s2 = rng.uniform(-0.3, 0.3);
    let c1 = rng.uniform(0.5, 1.5);
    let c2 = rng.uniform(-0.5, 0.5);
    let (bump, lift) = kappa.unwrap_or_else(|| (rng.uniform(0.2, 1.0), rng.uniform(0.0, 0.5)));

    let f1 = ScalarFunction::new(
        a.abs() + b.abs() + e.abs() + root,
        format!("{a}y + {b}z + {e} + {root}sqrt|z|"),
        move |_, y, z| a * y + b * z[0] + e + root * z[0].abs().sqrt(),
    );
    let f2 = {
        let f1 = f1.clone();
        ScalarFunction::new(f1.growth_constant + bump, format!("({}) + {bump}/(1+y^2)", f1.description), move |t, y, z| {
            f1.eval(t, y, z) + bump / (1.0 + y * y)
        })
    };
    let g = VectorFunction::new(1, 2.0 * s1 * s1, 2.0 * s2 * s2, format!("{s1}y + {s2}z"), move |_, y, z, out| {
        out[0] = s1 * y + s2 * z[0];
    });
    let xi1 = TerminalCondition::new(format!("{c1}sin(W_T) + {c2}B_T"), move |p| {
        c1 * p.w_terminal()[0].sin() + c2 * p.b_terminal()[0]
    });
    let xi2 = TerminalCondition::new(format!("{c1}sin(W_T) + {c2}B_T + {lift}|B_T|"), move |p| {
        c1 * p.w_terminal()[0].sin() + c2 * p.b_terminal()[0] + lift * p.b_terminal()[0].abs()
    });
    let (label, hypotheses, modulus) = if root > 0.0 {
        (
            "uniformly continuous pair (H4, H10)",
            Hypotheses::of(&[Hypothesis::H1, Hypothesis::H2, Hypothesis::H4, Hypothesis::H10]),
            Some(Modulus::new(root + b.abs(), "root*sqrt(x) + |b|x", move |x| root * x.sqrt() + b.abs() * x)),
        )
    } else {
        (
            "Lipschitz pair (H3, H4)",
            Hypotheses::of(&[Hypothesis::H1, Hypothesis::H2, Hypothesis::H3, Hypothesis::H4]),
            None,
        )
    };
    let make = |name: String, f: ScalarFunction, xi: TerminalCondition| Problem {
        name,
        horizon: 1.0,
        d: 1,
        l: 1,
        driver: f,
        coefficient: g.clone(),
        terminal: xi,
        modulus: modulus.clone(),
        c: a.abs() + b.abs(),
        hypotheses,
        bounds: None,
        k: None,
        aux: None,
    };
    Ok(Pair {
        lower: make(format!("pair{k}/lower"), f1, xi1),
        upper: make(format!("pair{k}/upper"), f2, xi2),
        label,
    })
}

fn comparison_suite<E: Executor>(config: &SuiteConfig, exec: &E, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let s = &config.sizes;
    let budget = Budget::Model(config.budget);
    let scheme = SchemeConfig::default();
    for k in 1..=s.comparison_pairs as u64 {
        let pair = ordered_pair(k, None)?;
        let noise = noise_for(s.comparison_steps, s.comparison_outer, s.comparison_inner, suite_seed(config, SuiteName::Comparison, k), exec)?;
        let y1 = solve_with(&pair.lower, &noise, &scheme, exec)?;
        let y2 = solve_with(&pair.upper, &noise, &scheme, exec)?;
        let report = if config.reverse_comparison {
            compare(&y2, &y1, &budget)?
        } else {
            compare(&y1, &y2, &budget)?
        };
        checks.push(
            CheckRecord::at_most(format!("pair{k}_violation_fraction"), report.violation_fraction, 0.0).labelled(pair.label),
        );
    }

    // negative control: a strongly ordered pair compared the wrong way round
    let pair = ordered_pair(0, Some((2.0, 0.5)))?;
    let noise = noise_for(s.comparison_steps, s.comparison_outer, s.comparison_inner, suite_seed(config, SuiteName::Comparison, 0), exec)?;
    let y1 = solve_with(&pair.lower, &noise, &scheme, exec)?;
    let y2 = solve_with(&pair.upper, &noise, &scheme, exec)?;
    let report = compare(&y2, &y1, &budget)?;
    let mut control = CheckRecord::flagged("control_reversed_pair", report.violation_fraction, 0.0);
    control.passed = report.verdict == Verdict::Violated;
    checks.push(control.labelled(pair.label));
    Ok(())
}

// ---------------------------------------------------------------- minimal vs minimal

/// The non-unique problem with `0.5·1{y≥0}` added to its driver and to the
/// upper bounding driver.
fn lifted_nonunique() -> Result<Problem> {
    let p = catalog_lookup("nonunique_sqrt")?;
    let base = p.driver.clone();
    let lifted = ScalarFunction::new(base.growth_constant + 0.5, format!("{} + 0.5*1{{y>=0}}", base.description), move |t, y, z| {
        base.eval(t, y, z) + if y >= 0.0 { 0.5 } else { 0.0 }
    });
    let (lo, hi) = p.bounds.as_deref().cloned().expect("catalog entry has bounds");
    let hi_driver = hi.driver.clone();
    let hi_lifted = ScalarFunction::new(hi_driver.growth_constant + 0.5, format!("{} + 0.5", hi_driver.description), move |t, y, z| {
        hi_driver.eval(t, y, z) + 0.5
    })
    .with_lipschitz(2.0);
    let mut q = p.with_driver("nonunique_sqrt+lift", lifted);
    q.hypotheses = p.hypotheses;
    q.bounds = Some(Arc::new((lo, hi.with_driver("nonunique_sqrt+lift/upper", hi_lifted))));
    Ok(q)
}

fn minimal_comparison_suite<E: Executor>(config: &SuiteConfig, exec: &E, checks: &mut Vec<CheckRecord>) -> Result<()> {
    let s = &config.sizes;
    let noise = noise_for(s.minimal_steps, s.minimal_outer, s.minimal_inner, suite_seed(config, SuiteName::MinimalComparison, 0), exec)?;
    let ladder_config = LadderConfig { budget: Budget::Model(config.budget), ..LadderConfig::default() };
    let p1 = catalog_lookup("nonunique_sqrt")?;
    let p2 = lifted_nonunique()?;
    let l1 = penalized_iteration(&p1, &noise, &ladder_config, s.minimal_max_n, Direction::Minimal, exec)?;
    let l2 = penalized_iteration(&p2, &noise, &ladder_config, s.minimal_max_n, Direction::Minimal, exec)?;
    for (tag, l) in [("first", &l1), ("second", &l2)] {
        if let Some(e) = &l.failure {
            return Err(e.clone());
        }
        checks.push(CheckRecord::at_most(format!("{tag}_monotone_violations"), l.monotonicity.violations as f64, 0.0));
    }
    let (m1, _) = extract_extremal(&l1, ladder_config.tolerance)?;
    let (m2, _) = extract_extremal(&l2, ladder_config.tolerance)?;
    let report = compare(&m1, &m2, &Budget::Model(config.budget))?;
    checks.push(CheckRecord::at_most("minimal_ordering_violation_fraction", report.violation_fraction, 0.0));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Sequential;

    fn quick(suites: &[SuiteName]) -> SuiteConfig {
        SuiteConfig { suites: suites.to_vec(), sizes: SuiteSizes::quick(), ..Default::default() }
    }

    #[test]
    fn quick_suites_pass() {
        let report = run_property_suite(&quick(&SuiteName::ALL), &Sequential);
        for s in &report.suites {
            assert!(s.passed, "{:?}: {:?} {:#?}", s.name, s.error, s.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        }
        assert_eq!(report.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn oracles_have_zero_margin_and_are_deterministic() {
        let a = run_property_suite(&quick(&[SuiteName::Oracles]), &Sequential);
        let b = run_property_suite(&quick(&[SuiteName::Oracles]), &Sequential);
        assert_eq!(a, b);
        assert!(a.passed);
        assert!(a.suites[0].checks.iter().filter(|c| c.name.ends_with("_residual")).all(|c| c.value == 0.0 || c.value < 1e-14));
    }

    #[test]
    fn reversed_ordering_is_flagged() {
        let config = SuiteConfig { reverse_comparison: true, ..quick(&[SuiteName::Comparison]) };
        let report = run_property_suite(&config, &Sequential);
        assert!(!report.passed);
    }

    #[test]
    fn names_round_trip() {
        for n in SuiteName::ALL {
            assert_eq!(SuiteName::parse(n.as_str()), Some(n));
        }
    }
}
