//! Argument parsing and the subcommands.

use std::path::{Path, PathBuf};

use bdsde_core::harness::{
    compare, run_property_suite, Budget, BudgetModel, ComparisonReport, SuiteConfig, SuiteName, SuiteReport,
    SCHEMA_VERSION,
};
use bdsde_core::model::{catalog_lookup, catalog_names, Problem};
use bdsde_core::noise::{make_grid, sample_noise_with, KeyedGaussian, NoiseBundle};
use bdsde_core::regularize::{
    default_resolution, envelope, envelope_properties_check, EnvelopeKind, EnvelopeReport, EnvelopeSpec, QueryPoint,
};
use bdsde_core::schemes::{
    default_schedule, envelope_ladder, extract_extremal, penalized_iteration, Direction, ExtremalReport, Ladder,
    LadderConfig, LadderScheme, MonotonicityReport, SandwichReport,
};
use bdsde_core::solver::{solve_with, DiscreteSolution, Diagnostics, Provenance, SchemeConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{resolve_problem, LoadedProblem, NoiseSection};
use crate::output::{ladder_csv, paths_csv, summary_csv, to_json, write_atomic};
use crate::{noise_io, CliError, RayonExecutor};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Parser)]
#[command(name = "bdsde", version, about = "Monte Carlo laboratory for backward doubly stochastic differential equations")]
pub struct Cli {
    /// Worker threads (0 = one per core). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, global = true, env = "BDSDE_OUT_DIR", default_value = "bdsde-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and write per-node summaries.
    Solve(SolveArgs),
    /// Run an envelope ladder or the penalized iteration.
    Ladder(LadderArgs),
    /// Solve two problems on shared noise and check Y¹ ≤ Y².
    Compare(CompareArgs),
    /// Evaluate envelopes at points from a file and check their laws.
    Regularize(RegularizeArgs),
    /// Run the property suites.
    Verify(VerifyArgs),
    /// List the built-in problems.
    Catalog(CatalogArgs),
}

/// Grid and path counts; each overrides the problem file's `[noise]`.
#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub outer: Option<usize>,
    #[arg(long)]
    pub inner: Option<usize>,
    /// Read increments from a noise CSV instead of sampling.
    #[arg(long)]
    pub noise_in: Option<PathBuf>,
    /// Also write the increments used.
    #[arg(long)]
    pub noise_out: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem file or catalog name.
    #[arg(long)]
    pub problem: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Also write every path.
    #[arg(long)]
    pub paths: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SchemeArg {
    Envelope,
    Penalized,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Min,
    Max,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Min => Direction::Minimal,
            DirectionArg::Max => Direction::Maximal,
        }
    }
}

#[derive(Debug, Args)]
pub struct LadderArgs {
    #[arg(long)]
    pub problem: String,
    #[arg(long, value_enum)]
    pub scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "min")]
    pub direction: DirectionArg,
    /// Envelope indices, comma separated (default {2,4,8,16}·C).
    #[arg(long, value_delimiter = ',')]
    pub schedule: Vec<f64>,
    /// Stages of the penalized iteration.
    #[arg(long, default_value_t = 8)]
    pub max_n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub tolerance: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 3.0)]
    pub budget_se: f64,
    #[arg(long, default_value_t = 10.0)]
    pub budget_dt: f64,
    #[arg(long, default_value_t = 0.0)]
    pub budget_floor: f64,
}

impl BudgetArgs {
    fn model(&self) -> Result<BudgetModel, CliError> {
        let m = BudgetModel { se_factor: self.budget_se, dt_factor: self.budget_dt, floor: self.budget_floor };
        if [m.se_factor, m.dt_factor, m.floor].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(CliError::Usage("budget factors must be finite and ≥ 0".into()));
        }
        Ok(m)
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub lower: String,
    #[arg(long)]
    pub upper: String,
    /// Compare minimal solutions (penalized ladders) instead of direct solves.
    #[arg(long)]
    pub minimal: bool,
    #[arg(long, default_value_t = 6)]
    pub max_n: usize,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    InfFull,
    SupFull,
    InfZOnly,
}

impl From<KindArg> for EnvelopeKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::InfFull => EnvelopeKind::InfFull,
            KindArg::SupFull => EnvelopeKind::SupFull,
            KindArg::InfZOnly => EnvelopeKind::InfZOnly,
        }
    }
}

#[derive(Debug, Args)]
pub struct RegularizeArgs {
    /// Problem file or catalog name; its driver is the base function.
    #[arg(long)]
    pub problem: String,
    /// Points as CSV rows `t,y,z1,..,zd` (an optional header starting with `t` is skipped).
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long)]
    pub n: f64,
    #[arg(long, value_enum, default_value = "inf-full")]
    pub kind: KindArg,
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Point pairs sampled for the Lipschitz check.
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suites to run, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub suites: Vec<String>,
    /// Reverse every comparison pair (a negative control for the harness).
    #[arg(long)]
    pub reverse_comparison: bool,
    /// Small problem sizes for smoke runs.
    #[arg(long)]
    pub quick: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Show one entry.
    pub name: Option<String>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("bdsde: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; returns the one-line summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let exec = RayonExecutor::new(cli.threads).map_err(|e| CliError::Usage(e.to_string()))?;
    match &cli.command {
        Command::Solve(a) => cmd_solve(cli, a, &exec),
        Command::Ladder(a) => cmd_ladder(cli, a, &exec),
        Command::Compare(a) => cmd_compare(cli, a, &exec),
        Command::Regularize(a) => cmd_regularize(cli, a),
        Command::Verify(a) => cmd_verify(cli, a, &exec),
        Command::Catalog(a) => cmd_catalog(a),
    }
}

fn noise_for(
    cli: &Cli,
    grid: &GridArgs,
    defaults: NoiseSection,
    problem: &Problem,
    exec: &RayonExecutor,
) -> Result<NoiseBundle, CliError> {
    let noise = match &grid.noise_in {
        Some(path) => noise_io::load(path)?,
        None => {
            let steps = grid.steps.unwrap_or(defaults.steps);
            let outer = grid.outer.unwrap_or(defaults.outer);
            let inner = grid.inner.unwrap_or(defaults.inner);
            let g = make_grid(problem.horizon, steps)?;
            sample_noise_with(g, problem.d, problem.l, outer, inner, cli.seed, &KeyedGaussian, exec)?
        }
    };
    if grid.noise_out {
        write_atomic(&cli.out.join("noise.csv"), noise_io::to_csv(&noise).as_bytes())?;
    }
    Ok(noise)
}

fn dir_for(cli: &Cli, name: &str) -> PathBuf {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    cli.out.join(safe)
}

#[derive(Serialize)]
struct SolveReport<'a> {
    schema_version: u32,
    problem: &'a str,
    seed: u64,
    provenance: &'a Provenance,
    diagnostics: &'a Diagnostics,
}

fn cmd_solve(cli: &Cli, a: &SolveArgs, exec: &RayonExecutor) -> Result<String, CliError> {
    let LoadedProblem { problem, scheme, noise: sizes } = resolve_problem(&a.problem)?;
    let noise = noise_for(cli, &a.grid, sizes, &problem, exec)?;
    let sol = solve_with(&problem, &noise, &scheme, exec)?;
    let dir = dir_for(cli, &problem.name);
    write_atomic(&dir.join("summary.csv"), summary_csv(&sol).as_bytes())?;
    if a.paths {
        write_atomic(&dir.join("paths.csv"), paths_csv(&sol).as_bytes())?;
    }
    let report = SolveReport {
        schema_version: SCHEMA_VERSION,
        problem: &problem.name,
        seed: cli.seed,
        provenance: &sol.provenance,
        diagnostics: &sol.diagnostics,
    };
    write_atomic(&dir.join("solve.json"), to_json(&report).as_bytes())?;
    let y0 = sol.summary()[0].mean_y;
    Ok(format!(
        "solve {}: mean Y_0 = {y0}, max residual = {:e}, outputs in {}",
        problem.name,
        sol.diagnostics.max_residual,
        dir.display()
    ))
}

#[derive(Serialize)]
struct LadderReport {
    schema_version: u32,
    problem: String,
    seed: u64,
    scheme: LadderScheme,
    direction: Direction,
    config: LadderConfig,
    indices: Vec<f64>,
    deltas: Vec<f64>,
    converged: bool,
    monotonicity: MonotonicityReport,
    sandwich: Option<SandwichReport>,
    extremal: Option<ExtremalReport>,
    failure: Option<String>,
    notes: Vec<String>,
}

fn ladder_report(problem: &Problem, seed: u64, config: LadderConfig, ladder: &Ladder) -> Result<LadderReport, CliError> {
    let extremal = match ladder.iterates.is_empty() {
        true => None,
        false => Some(extract_extremal(ladder, config.tolerance)?.1),
    };
    Ok(LadderReport {
        schema_version: SCHEMA_VERSION,
        problem: problem.name.clone(),
        seed,
        scheme: ladder.scheme,
        direction: ladder.direction,
        config,
        indices: ladder.indices.clone(),
        deltas: ladder.deltas.clone(),
        converged: ladder.converged,
        monotonicity: ladder.monotonicity.clone(),
        sandwich: ladder.sandwich.clone(),
        extremal,
        failure: ladder.failure.as_ref().map(|e| e.to_string()),
        notes: ladder.notes.clone(),
    })
}

fn ladder_config(scheme: SchemeConfig, tolerance: f64, budget: BudgetModel) -> Result<LadderConfig, CliError> {
    if !(tolerance > 0.0) {
        return Err(CliError::Usage("--tolerance must be > 0".into()));
    }
    let defaults = LadderConfig::default();
    Ok(LadderConfig {
        scheme: SchemeConfig {
            implicit_iterations: scheme.implicit_iterations.max(defaults.scheme.implicit_iterations),
            ..scheme
        },
        tolerance,
        budget: Budget::Model(budget),
        ..defaults
    })
}

fn run_ladder(
    problem: &Problem,
    noise: &NoiseBundle,
    config: &LadderConfig,
    a: &LadderArgs,
    exec: &RayonExecutor,
) -> Result<Ladder, CliError> {
    let direction = Direction::from(a.direction);
    Ok(match a.scheme {
        SchemeArg::Envelope => {
            let schedule = if a.schedule.is_empty() { default_schedule(problem) } else { a.schedule.clone() };
            envelope_ladder(problem, noise, config, &schedule, direction, exec)?
        }
        SchemeArg::Penalized => penalized_iteration(problem, noise, config, a.max_n, direction, exec)?,
    })
}

fn cmd_ladder(cli: &Cli, a: &LadderArgs, exec: &RayonExecutor) -> Result<String, CliError> {
    let loaded = resolve_problem(&a.problem)?;
    let config = ladder_config(loaded.scheme, a.tolerance, a.budget.model()?)?;
    let noise = noise_for(cli, &a.grid, loaded.noise, &loaded.problem, exec)?;
    let ladder = run_ladder(&loaded.problem, &noise, &config, a, exec)?;
    let report = ladder_report(&loaded.problem, cli.seed, config, &ladder)?;
    let dir = dir_for(cli, &loaded.problem.name);
    write_atomic(&dir.join("ladder.csv"), ladder_csv(&ladder.indices, &ladder.iterates).as_bytes())?;
    write_atomic(&dir.join("ladder.json"), to_json(&report).as_bytes())?;
    if let Some(e) = ladder.failure {
        return Err(e.into());
    }
    let sandwich_bad = ladder.sandwich.as_ref().is_some_and(|s| s.violation_fraction > 0.0);
    if ladder.monotonicity.violations > 0 || sandwich_bad {
        return Err(CliError::Failed(format!(
            "ladder {}: {} monotonicity violations, sandwich fraction {}; see {}",
            loaded.problem.name,
            ladder.monotonicity.violations,
            ladder.sandwich.map_or(0.0, |s| s.violation_fraction),
            dir.display()
        )));
    }
    Ok(format!(
        "ladder {}: {} rungs, deltas {:?}, converged = {}, outputs in {}",
        loaded.problem.name,
        ladder.iterates.len(),
        ladder.deltas,
        ladder.converged,
        dir.display()
    ))
}

#[derive(Serialize)]
struct CompareOutput {
    schema_version: u32,
    lower: String,
    upper: String,
    seed: u64,
    minimal: bool,
    report: ComparisonReport,
}

fn cmd_compare(cli: &Cli, a: &CompareArgs, exec: &RayonExecutor) -> Result<String, CliError> {
    let lower = resolve_problem(&a.lower)?;
    let upper = resolve_problem(&a.upper)?;
    if lower.problem.horizon != upper.problem.horizon || lower.problem.d != upper.problem.d || lower.problem.l != upper.problem.l {
        return Err(CliError::Usage("compared problems need the same horizon, d and l".into()));
    }
    let budget = a.budget.model()?;
    let noise = noise_for(cli, &a.grid, lower.noise, &lower.problem, exec)?;
    let (y1, y2) = if a.minimal {
        let config = ladder_config(lower.scheme, LadderConfig::default().tolerance, budget)?;
        let extremal = |p: &Problem| -> Result<DiscreteSolution, CliError> {
            let ladder = penalized_iteration(p, &noise, &config, a.max_n, Direction::Minimal, exec)?;
            if let Some(e) = ladder.failure.clone() {
                return Err(e.into());
            }
            Ok(extract_extremal(&ladder, config.tolerance)?.0)
        };
        (extremal(&lower.problem)?, extremal(&upper.problem)?)
    } else {
        (
            solve_with(&lower.problem, &noise, &lower.scheme, exec)?,
            solve_with(&upper.problem, &noise, &upper.scheme, exec)?,
        )
    };
    let report = compare(&y1, &y2, &Budget::Model(budget))?;
    let out = CompareOutput {
        schema_version: SCHEMA_VERSION,
        lower: lower.problem.name.clone(),
        upper: upper.problem.name.clone(),
        seed: cli.seed,
        minimal: a.minimal,
        report: report.clone(),
    };
    let path = cli.out.join("compare.json");
    write_atomic(&path, to_json(&out).as_bytes())?;
    let line = format!(
        "compare {} ≤ {}: {:?}, worst violation {}, fraction {}, report {}",
        out.lower,
        out.upper,
        report.verdict,
        report.worst_violation,
        report.violation_fraction,
        path.display()
    );
    match report.verdict {
        bdsde_core::harness::Verdict::Consistent => Ok(line),
        bdsde_core::harness::Verdict::Violated => Err(CliError::Failed(line)),
    }
}

fn read_points(path: &Path, d: usize) -> Result<Vec<QueryPoint>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut points = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (k == 0 && line.starts_with('t')) {
            continue;
        }
        let values: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), k + 1)))?;
        if values.len() != 2 + d {
            return Err(CliError::Config(format!(
                "{}:{}: expected {} values (t, y, z1..z{d})",
                path.display(),
                k + 1,
                2 + d
            )));
        }
        points.push(QueryPoint::new(values[0], values[1], values[2..].to_vec()));
    }
    if points.is_empty() {
        return Err(CliError::Config(format!("{}: no points", path.display())));
    }
    Ok(points)
}

#[derive(Serialize)]
struct EnvelopeValue {
    point: QueryPoint,
    base: f64,
    envelope: f64,
}

#[derive(Serialize)]
struct RegularizeOutput {
    schema_version: u32,
    problem: String,
    n: f64,
    resolution: f64,
    error_bound: f64,
    values: Vec<EnvelopeValue>,
    properties: EnvelopeReport,
}

fn cmd_regularize(cli: &Cli, a: &RegularizeArgs) -> Result<String, CliError> {
    let loaded = resolve_problem(&a.problem)?;
    let p = &loaded.problem;
    let mut spec = EnvelopeSpec::new(p.driver.clone(), a.n, a.kind.into())?;
    if let Some(k) = &p.k {
        spec = spec.with_k(k.clone());
    }
    let r = a.resolution.unwrap_or_else(|| default_resolution(a.n));
    if !(r > 0.0) {
        return Err(CliError::Usage("--resolution must be > 0".into()));
    }
    let points = read_points(&a.points, p.d)?;
    let values = points
        .iter()
        .map(|q| {
            Ok(EnvelopeValue {
                base: p.driver.eval(q.t, q.y, &q.z),
                envelope: envelope(&spec, q.t, q.y, &q.z, r)?,
                point: q.clone(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let properties = envelope_properties_check(&spec, &points, a.pairs)?;
    let passed = properties.passed;
    let out = RegularizeOutput {
        schema_version: SCHEMA_VERSION,
        problem: p.name.clone(),
        n: a.n,
        resolution: r,
        error_bound: spec.error_bound(r),
        values,
        properties,
    };
    let json = to_json(&out);
    write_atomic(&cli.out.join("regularize.json"), json.as_bytes())?;
    print!("{json}");
    let line = format!("regularize {}: {} points, laws hold = {passed}", p.name, points.len());
    if passed {
        Ok(line)
    } else {
        Err(CliError::Failed(line))
    }
}

pub fn suite_config(cli: &Cli, a: &VerifyArgs) -> Result<SuiteConfig, CliError> {
    let suites = if a.suites.is_empty() {
        SuiteName::ALL.to_vec()
    } else {
        a.suites
            .iter()
            .map(|s| {
                SuiteName::parse(s.trim()).ok_or_else(|| {
                    let known: Vec<&str> = SuiteName::ALL.iter().map(|n| n.as_str()).collect();
                    CliError::Usage(format!("unknown suite `{s}` (known: {})", known.join(", ")))
                })
            })
            .collect::<Result<_, _>>()?
    };
    Ok(SuiteConfig {
        suites,
        seed: cli.seed,
        budget: a.budget.model()?,
        reverse_comparison: a.reverse_comparison,
        sizes: if a.quick { bdsde_core::harness::SuiteSizes::quick() } else { Default::default() },
    })
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs, exec: &RayonExecutor) -> Result<String, CliError> {
    let config = suite_config(cli, a)?;
    let report: SuiteReport = run_property_suite(&config, exec);
    let path = cli.out.join("verify.json");
    write_atomic(&path, to_json(&report).as_bytes())?;
    let status: Vec<String> = report
        .suites
        .iter()
        .map(|s| format!("{}={}", s.name.as_str(), if s.passed { "pass" } else { "FAIL" }))
        .collect();
    let line = format!("verify seed {}: {} ({})", cli.seed, status.join(" "), path.display());
    if report.passed {
        Ok(line)
    } else {
        Err(CliError::Failed(line))
    }
}

#[derive(Serialize)]
struct CatalogEntry {
    name: String,
    driver: String,
    coefficient: String,
    terminal: String,
    horizon: f64,
    c: f64,
    hypotheses: bdsde_core::model::Hypotheses,
    modulus: Option<String>,
    bounds: Option<(String, String)>,
}

fn cmd_catalog(a: &CatalogArgs) -> Result<String, CliError> {
    let names: Vec<&str> = match &a.name {
        Some(n) => vec![n.as_str()],
        None => catalog_names().to_vec(),
    };
    let entries = names
        .iter()
        .map(|n| {
            let p = catalog_lookup(n)?;
            Ok(CatalogEntry {
                name: p.name.clone(),
                driver: p.driver.description.clone(),
                coefficient: p.coefficient.description.clone(),
                terminal: p.terminal.description.clone(),
                horizon: p.horizon,
                c: p.c,
                hypotheses: p.hypotheses,
                modulus: p.modulus.as_ref().map(|m| m.description.clone()),
                bounds: p.bounds.as_deref().map(|(lo, hi)| (lo.driver.description.clone(), hi.driver.description.clone())),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    #[derive(Serialize)]
    struct Listing {
        schema_version: u32,
        entries: Vec<CatalogEntry>,
    }
    print!("{}", to_json(&Listing { schema_version: SCHEMA_VERSION, entries }));
    Ok(format!("catalog: {} entries", names.len()))
}
