//! Problem files.
//!
//! A problem file is TOML with the sections `[problem]`, `[driver]`,
//! `[coefficient]`, `[terminal]`, `[hypotheses]` and the optional run
//! sections `[scheme]` and `[noise]`. Every section is optional when
//! `problem.catalog` names a built-in problem; the fields given override it.
//!
//! ```toml
//! [problem]
//! name = "damped"
//! horizon = 1.0
//! c = 1.0
//!
//! [driver]
//! f = "-0.5*y + min(abs(z), 1)"
//! growth = 1.0
//!
//! [coefficient]
//! g = ["0.2*y"]
//! lipschitz_y = 0.04
//! alpha = 0.1
//!
//! [terminal]
//! xi = "sin(w) + 0.5*b"
//!
//! [hypotheses]
//! declared = ["H1", "H2", "H3", "H4"]
//!
//! [noise]
//! steps = 64
//! outer = 8
//! inner = 512
//! ```
//!
//! Variables: `t`, `y`, `z` (= `z1`), `z1`..`zd`, `znorm` in drivers and
//! coefficients; `w` (= `w1`), `w1`..`wd`, `b` (= `b1`), `b1`..`bl` and `T`
//! in the terminal condition (values at the horizon); `x` in the modulus; `t`
//! in `K`. See [`crate::expr`] for the expression grammar.

use std::path::Path;

use bdsde_core::model::{
    build_problem, Hypotheses, Hypothesis, Modulus, Problem, ProblemSpec, ScalarFunction, TerminalCondition,
    TimeFunction, VectorFunction,
};
use bdsde_core::solver::SchemeConfig;
use serde::Deserialize;

use crate::expr::Expr;
use crate::CliError;

/// Largest supported `d` and `l`, so evaluation slots fit on the stack.
pub const MAX_DIM: usize = 16;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub problem: ProblemSection,
    pub driver: Option<DriverSection>,
    pub coefficient: Option<CoefficientSection>,
    pub terminal: Option<TerminalSection>,
    pub hypotheses: Option<HypothesesSection>,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub noise: NoiseSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: Option<String>,
    pub catalog: Option<String>,
    pub horizon: Option<f64>,
    pub d: Option<usize>,
    pub l: Option<usize>,
    /// The constant `C` shared by the hypotheses.
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriverSection {
    pub f: String,
    /// Linear-growth constant: `|f| ≤ growth·(1 + |y| + |z|)`.
    pub growth: f64,
    pub lipschitz: Option<f64>,
    pub range: Option<[f64; 2]>,
    /// Nonzero where `f` jumps; consulted by the envelope convergence check.
    pub jumps: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    pub g: Vec<String>,
    pub lipschitz_y: f64,
    /// `α` in `|g(y, z) − g(y', z')|² ≤ C|y − y'|² + α|z − z'|²`.
    pub alpha: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalSection {
    pub xi: String,
    pub second_moment_bound: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesesSection {
    #[serde(default)]
    pub declared: Vec<String>,
    pub modulus: Option<String>,
    pub modulus_growth: Option<f64>,
    pub k: Option<String>,
    pub lower: Option<String>,
    pub upper: Option<String>,
    pub bound_growth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub steps: usize,
    pub outer: usize,
    pub inner: usize,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { steps: 64, outer: 8, inner: 512 }
    }
}

/// A resolved problem plus the run settings from the same file.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: Problem,
    pub scheme: SchemeConfig,
    pub noise: NoiseSection,
}

pub fn load_problem(path: &Path) -> Result<LoadedProblem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_problem(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Accepts either a path to a problem file or a bare catalog name.
pub fn resolve_problem(arg: &str) -> Result<LoadedProblem, CliError> {
    let path = Path::new(arg);
    if path.exists() {
        return load_problem(path);
    }
    if bdsde_core::model::catalog_names().contains(&arg) {
        return parse_problem(&format!("[problem]\ncatalog = \"{arg}\"\n"));
    }
    Err(CliError::Usage(format!("`{arg}` is neither a readable file nor a catalog name")))
}

pub fn parse_problem(text: &str) -> Result<LoadedProblem, CliError> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let problem = build(&file)?;
    file.scheme.validate()?;
    if file.noise.steps == 0 || file.noise.outer == 0 || file.noise.inner == 0 {
        return Err(CliError::Config("[noise] steps, outer and inner must be ≥ 1".into()));
    }
    Ok(LoadedProblem { problem, scheme: file.scheme, noise: file.noise })
}

fn config_err(section: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("[{section}] {e}"))
}

fn build(file: &ProblemFile) -> Result<Problem, CliError> {
    let p = &file.problem;
    let base = match &p.catalog {
        Some(name) => Some(bdsde_core::model::catalog_problem(name, p.horizon.unwrap_or(1.0))?),
        None => None,
    };
    let d = p.d.or(base.as_ref().map(|b| b.d)).unwrap_or(1);
    let l = p.l.or(base.as_ref().map(|b| b.l)).unwrap_or(1);
    let horizon = p.horizon.or(base.as_ref().map(|b| b.horizon)).unwrap_or(1.0);
    if d > MAX_DIM || l > MAX_DIM {
        return Err(config_err("problem", format!("d and l must be ≤ {MAX_DIM}")));
    }

    let mut spec = ProblemSpec {
        name: p.name.clone(),
        catalog: p.catalog.clone(),
        horizon: p.horizon,
        d: p.d,
        l: p.l,
        c: p.c,
        ..Default::default()
    };
    if let Some(drv) = &file.driver {
        spec.driver = Some(driver_function(drv, d).map_err(|e| config_err("driver", e))?);
    }
    if let Some(co) = &file.coefficient {
        spec.coefficient = Some(coefficient_function(co, d).map_err(|e| config_err("coefficient", e))?);
    }
    if let Some(term) = &file.terminal {
        spec.terminal = Some(terminal_condition(term, horizon, d, l).map_err(|e| config_err("terminal", e))?);
    }
    if let Some(h) = &file.hypotheses {
        let mut set = Hypotheses::empty();
        for tag in &h.declared {
            let parsed = Hypothesis::parse(tag).ok_or_else(|| config_err("hypotheses", format!("unknown tag `{tag}`")))?;
            set = set.with(parsed);
        }
        spec.hypotheses = Some(set);
        if let Some(text) = &h.modulus {
            let e = Expr::parse(text, &["x"]).map_err(|e| config_err("hypotheses", e))?;
            let growth = h
                .modulus_growth
                .ok_or_else(|| config_err("hypotheses", "`modulus` needs `modulus_growth`"))?;
            spec.modulus = Some(Modulus::new(growth, text.clone(), move |x| e.eval(&[x])));
        }
        if let Some(text) = &h.k {
            let e = Expr::parse(text, &["t"]).map_err(|e| config_err("hypotheses", e))?;
            spec.k = Some(TimeFunction::new(text.clone(), move |t| e.eval(&[t])));
        }
        match (&h.lower, &h.upper) {
            (Some(lo), Some(hi)) => {
                let growth = h
                    .bound_growth
                    .ok_or_else(|| config_err("hypotheses", "bounds need `bound_growth`"))?;
                let mk = |text: &String| {
                    driver_function(
                        &DriverSection { f: text.clone(), growth, lipschitz: None, range: None, jumps: None },
                        d,
                    )
                    .map_err(|e| config_err("hypotheses", e))
                };
                spec.bounds = Some((mk(lo)?, mk(hi)?));
            }
            (None, None) => {}
            _ => return Err(config_err("hypotheses", "give both `lower` and `upper` or neither")),
        }
    }
    Ok(build_problem(spec)?)
}

/// Slots: `t, y, z, znorm, z1..zd`.
fn driver_vars(d: usize) -> Vec<String> {
    let mut v: Vec<String> = ["t", "y", "z", "znorm"].iter().map(|s| s.to_string()).collect();
    v.extend((1..=d).map(|k| format!("z{k}")));
    v
}

fn fill_driver_slots(slots: &mut [f64; 4 + MAX_DIM], t: f64, y: f64, z: &[f64]) -> usize {
    slots[0] = t;
    slots[1] = y;
    slots[2] = z[0];
    slots[3] = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    slots[4..4 + z.len()].copy_from_slice(z);
    4 + z.len()
}

fn compile(text: &str, names: &[String]) -> Result<Expr, crate::expr::ParseError> {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Expr::parse(text, &refs)
}

fn uses_z(e: &Expr, d: usize) -> bool {
    e.uses(2) || e.uses(3) || (0..d).any(|k| e.uses(4 + k))
}

fn driver_function(section: &DriverSection, d: usize) -> Result<ScalarFunction, String> {
    let names = driver_vars(d);
    let e = compile(&section.f, &names).map_err(|e| e.to_string())?;
    let (on_y, on_z) = (e.uses(1), uses_z(&e, d));
    let eval = e.clone();
    let mut f = ScalarFunction::new(section.growth, section.f.clone(), move |t, y, z| {
        let mut slots = [0.0; 4 + MAX_DIM];
        let n = fill_driver_slots(&mut slots, t, y, z);
        eval.eval(&slots[..n])
    });
    if !on_y {
        f = f.independent_of_y();
    }
    if !on_z {
        f = f.independent_of_z();
    }
    if let Some(l) = section.lipschitz {
        f = f.with_lipschitz(l);
    }
    if let Some([lo, hi]) = section.range {
        if !(lo <= hi) {
            return Err(format!("range [{lo}, {hi}] is empty"));
        }
        f = f.with_range(lo, hi);
    }
    if let Some(text) = &section.jumps {
        let j = compile(text, &names).map_err(|e| e.to_string())?;
        f = f.with_jumps(move |t, y, z| {
            let mut slots = [0.0; 4 + MAX_DIM];
            let n = fill_driver_slots(&mut slots, t, y, z);
            j.eval(&slots[..n]) != 0.0
        });
    }
    Ok(f)
}

fn coefficient_function(section: &CoefficientSection, d: usize) -> Result<VectorFunction, String> {
    let names = driver_vars(d);
    let exprs = section
        .g
        .iter()
        .map(|text| compile(text, &names).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    if exprs.is_empty() || exprs.len() > MAX_DIM {
        return Err(format!("g needs 1..={MAX_DIM} components"));
    }
    let on_z = exprs.iter().any(|e| uses_z(e, d));
    let description = section.g.join(", ");
    let mut g = VectorFunction::new(exprs.len(), section.lipschitz_y, section.alpha, description, move |t, y, z, out| {
        let mut slots = [0.0; 4 + MAX_DIM];
        let n = fill_driver_slots(&mut slots, t, y, z);
        for (o, e) in out.iter_mut().zip(&exprs) {
            *o = e.eval(&slots[..n]);
        }
    });
    if !on_z {
        g = g.independent_of_z();
    }
    Ok(g)
}

/// Slots: `T, w, b, w1..wd, b1..bl`.
fn terminal_condition(section: &TerminalSection, horizon: f64, d: usize, l: usize) -> Result<TerminalCondition, String> {
    let mut names: Vec<String> = ["T", "w", "b"].iter().map(|s| s.to_string()).collect();
    names.extend((1..=d).map(|k| format!("w{k}")));
    names.extend((1..=l).map(|k| format!("b{k}")));
    let e = compile(&section.xi, &names).map_err(|e| e.to_string())?;
    let mut xi = TerminalCondition::new(section.xi.clone(), move |p| {
        let mut slots = [0.0; 3 + 2 * MAX_DIM];
        let (w, b) = (p.w_terminal(), p.b_terminal());
        slots[0] = horizon;
        slots[1] = w[0];
        slots[2] = b[0];
        slots[3..3 + w.len()].copy_from_slice(w);
        slots[3 + w.len()..3 + w.len() + b.len()].copy_from_slice(b);
        e.eval(&slots[..3 + w.len() + b.len()])
    });
    if let Some(m) = section.second_moment_bound {
        xi = xi.with_second_moment_bound(m);
    }
    Ok(xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_only() {
        let p = parse_problem("[problem]\ncatalog = \"nonunique_sqrt\"\n").unwrap();
        assert_eq!(p.problem.name, "nonunique_sqrt");
        assert!(p.problem.bounds.is_some());
        assert_eq!(p.noise, NoiseSection::default());
    }

    #[test]
    fn full_file() {
        let text = r#"
[problem]
name = "damped"
c = 1.0

[driver]
f = "-0.5*y + min(abs(z), 1)"
growth = 1.0
lipschitz = 1.0

[coefficient]
g = ["0.2*y"]
lipschitz_y = 0.04
alpha = 0.1

[terminal]
xi = "sin(w) + 0.5*b"

[hypotheses]
declared = ["H1", "H2", "H3", "H4", "H8'"]
k = "1 + t"

[scheme]
basis_degree = 2

[noise]
steps = 16
outer = 2
inner = 64
"#;
        let p = parse_problem(text).unwrap();
        assert_eq!(p.problem.driver.eval(0.0, 2.0, &[-3.0]), 0.0);
        assert!(p.problem.driver.depends_on_z);
        assert!(!p.problem.coefficient.depends_on_z);
        assert_eq!(p.scheme.basis_degree, 2);
        assert_eq!(p.noise.inner, 64);
        assert_eq!(p.problem.k_at(1.0), 2.0);
        assert!(p.problem.hypotheses.contains(Hypothesis::H8Prime));
    }

    #[test]
    fn override_catalog_driver() {
        let text = "[problem]\ncatalog = \"constant\"\n[driver]\nf = \"1\"\ngrowth = 1\n";
        let p = parse_problem(text).unwrap();
        assert_eq!(p.problem.driver.eval(0.3, 9.0, &[1.0]), 1.0);
        assert!(!p.problem.driver.depends_on_y);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_problem("[driver]\nf = \"y +\"\ngrowth = 1\n"), Err(CliError::Config(_))));
        assert!(matches!(parse_problem("[problem]\nbogus = 1\n"), Err(CliError::Config(_))));
        assert!(parse_problem("[hypotheses]\ndeclared = [\"H42\"]\n").is_err());
        assert!(parse_problem("[hypotheses]\ndeclared = [\"H9\"]\n").is_err());
        assert!(parse_problem("[noise]\nsteps = 0\n").is_err());
        assert!(parse_problem("[problem]\ncatalog = \"nope\"\n").is_err());
    }

    #[test]
    fn bounds_and_modulus() {
        let text = r#"
[driver]
f = "sqrt(abs(z))"
growth = 1

[hypotheses]
declared = ["H1", "H2", "H5", "H9"]
modulus = "sqrt(x) + x"
modulus_growth = 1.5
lower = "-1 - abs(y) - abs(z)"
upper = "1 + abs(y) + abs(z)"
bound_growth = 1
"#;
        let p = parse_problem(text).unwrap();
        let (lo, hi) = p.problem.bounds.as_deref().unwrap();
        assert_eq!(lo.driver.eval(0.0, 1.0, &[1.0]), -3.0);
        assert_eq!(hi.driver.eval(0.0, 1.0, &[1.0]), 3.0);
    }
}
