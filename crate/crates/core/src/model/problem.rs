use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Serialize, Serializer};

use super::catalog::catalog_problem;
use super::functions::{Modulus, PathView, ScalarFunction, TerminalCondition, VectorFunction};
use crate::error::{Error, Result};
use crate::rng::KeyedStream;

/// The standing hypotheses on `g` (H1, H2) and `f` (H3–H10, H8′).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Hypothesis {
    H1,
    H2,
    H3,
    H4,
    H5,
    H6,
    H7,
    H8,
    H8Prime,
    H9,
    H10,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 11] = [
        Hypothesis::H1,
        Hypothesis::H2,
        Hypothesis::H3,
        Hypothesis::H4,
        Hypothesis::H5,
        Hypothesis::H6,
        Hypothesis::H7,
        Hypothesis::H8,
        Hypothesis::H8Prime,
        Hypothesis::H9,
        Hypothesis::H10,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2 => "H2",
            Hypothesis::H3 => "H3",
            Hypothesis::H4 => "H4",
            Hypothesis::H5 => "H5",
            Hypothesis::H6 => "H6",
            Hypothesis::H7 => "H7",
            Hypothesis::H8 => "H8",
            Hypothesis::H8Prime => "H8'",
            Hypothesis::H9 => "H9",
            Hypothesis::H10 => "H10",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let norm = if s.eq_ignore_ascii_case("h8p") || s.eq_ignore_ascii_case("h8prime") {
            "H8'"
        } else {
            s
        };
        Self::ALL
            .into_iter()
            .find(|h| h.as_str().eq_ignore_ascii_case(norm))
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Hypothesis {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// A set of declared hypotheses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Hypotheses(u16);

impl Hypotheses {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn of(tags: &[Hypothesis]) -> Self {
        tags.iter().fold(Self(0), |acc, &h| acc.with(h))
    }

    pub fn with(self, h: Hypothesis) -> Self {
        Self(self.0 | h.bit())
    }

    pub fn contains(self, h: Hypothesis) -> bool {
        self.0 & h.bit() != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Hypothesis> {
        Hypothesis::ALL.into_iter().filter(move |h| self.contains(*h))
    }
}

impl Serialize for Hypotheses {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

/// Per-path exogenous values on the solver grid, laid out
/// `[outer][inner][node][width]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxField {
    pub outer: usize,
    pub inner: usize,
    pub nodes: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl AuxField {
    pub fn new(outer: usize, inner: usize, nodes: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let expected = outer * inner * nodes * width;
        if data.len() != expected {
            return Err(Error::Dimension {
                module: "model",
                context: "auxiliary field",
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            outer,
            inner,
            nodes,
            width,
            data,
        })
    }

    #[inline]
    pub fn at(&self, outer: usize, inner: usize, node: usize) -> &[f64] {
        let start = ((outer * self.inner + inner) * self.nodes + node) * self.width;
        &self.data[start..start + self.width]
    }
}

/// A deterministic function of time, used for `K_t`.
#[derive(Clone)]
pub struct TimeFunction {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub description: String,
}

impl TimeFunction {
    pub fn new<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            description: description.into(),
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }
}

impl fmt::Debug for TimeFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description)
    }
}

/// A fully validated BDSDE `(f, g, T, ξ)` with its metadata.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub horizon: f64,
    pub d: usize,
    pub l: usize,
    pub driver: ScalarFunction,
    pub coefficient: VectorFunction,
    pub terminal: TerminalCondition,
    pub modulus: Option<Modulus>,
    /// The constant `C` shared by H3, H6 and H10.
    pub c: f64,
    pub hypotheses: Hypotheses,
    /// `(f₁, f₂)` bounding problems of H9, sharing `g`, `T` and `ξ`.
    pub bounds: Option<Arc<(Problem, Problem)>>,
    pub k: Option<TimeFunction>,
    pub aux: Option<Arc<AuxField>>,
}

impl Problem {
    /// `K_t` of H8′, or 1 when the problem only claims H8.
    pub fn k_at(&self, t: f64) -> f64 {
        self.k.as_ref().map_or(1.0, |k| k.eval(t))
    }

    /// Same data with another driver; bounds and hypotheses are dropped
    /// because they described the old driver.
    pub fn with_driver(&self, name: impl Into<String>, driver: ScalarFunction) -> Problem {
        Problem {
            name: name.into(),
            driver,
            hypotheses: Hypotheses::empty(),
            bounds: None,
            aux: None,
            ..self.clone()
        }
    }

    pub fn with_terminal(&self, name: impl Into<String>, terminal: TerminalCondition) -> Problem {
        Problem {
            name: name.into(),
            terminal,
            ..self.clone()
        }
    }

    pub fn with_aux(mut self, aux: Arc<AuxField>) -> Problem {
        self.aux = Some(aux);
        self
    }

    pub fn lower_bound_problem(&self) -> Option<&Problem> {
        self.bounds.as_deref().map(|b| &b.0)
    }

    pub fn upper_bound_problem(&self) -> Option<&Problem> {
        self.bounds.as_deref().map(|b| &b.1)
    }
}

/// Structured description consumed by [`build_problem`]. Fields left `None`
/// come from the named catalog entry when one is given, and defaults
/// otherwise (`f = 0`, `g = 0`, `ξ = 0`, `T = 1`, `d = l = 1`).
#[derive(Debug, Clone, Default)]
pub struct ProblemSpec {
    pub name: Option<String>,
    pub catalog: Option<String>,
    pub horizon: Option<f64>,
    pub d: Option<usize>,
    pub l: Option<usize>,
    pub driver: Option<ScalarFunction>,
    pub coefficient: Option<VectorFunction>,
    pub terminal: Option<TerminalCondition>,
    pub modulus: Option<Modulus>,
    pub c: Option<f64>,
    pub hypotheses: Option<Hypotheses>,
    pub bounds: Option<(ScalarFunction, ScalarFunction)>,
    pub k: Option<TimeFunction>,
}

pub fn build_problem(spec: ProblemSpec) -> Result<Problem> {
    let base = match &spec.catalog {
        Some(name) => Some(catalog_problem(name, spec.horizon.unwrap_or(1.0))?),
        None => None,
    };
    let horizon = spec
        .horizon
        .or(base.as_ref().map(|b| b.horizon))
        .unwrap_or(1.0);
    let d = spec.d.or(base.as_ref().map(|b| b.d)).unwrap_or(1);
    let l = spec.l.or(base.as_ref().map(|b| b.l)).unwrap_or(1);
    let name = spec
        .name
        .clone()
        .or(base.as_ref().map(|b| b.name.clone()))
        .unwrap_or_else(|| "custom".to_string());

    let driver = spec
        .driver
        .or(base.as_ref().map(|b| b.driver.clone()))
        .unwrap_or_else(|| ScalarFunction::constant(0.0));
    let coefficient = spec
        .coefficient
        .or(base.as_ref().map(|b| b.coefficient.clone()))
        .unwrap_or_else(|| VectorFunction::zero(l));
    let terminal = spec
        .terminal
        .or(base.as_ref().map(|b| b.terminal.clone()))
        .unwrap_or_else(|| TerminalCondition::constant(0.0));
    let modulus = spec.modulus.or(base.as_ref().and_then(|b| b.modulus.clone()));
    let c = spec.c.or(base.as_ref().map(|b| b.c)).unwrap_or(1.0);
    let hypotheses = spec
        .hypotheses
        .or(base.as_ref().map(|b| b.hypotheses))
        .unwrap_or_default();
    let k = spec.k.or(base.as_ref().and_then(|b| b.k.clone()));
    let bound_drivers = spec.bounds.or_else(|| {
        base.as_ref()
            .and_then(|b| b.bounds.as_deref())
            .map(|(lo, hi)| (lo.driver.clone(), hi.driver.clone()))
    });

    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("model", "horizon", alloc::format!("T = {horizon} must be positive")));
    }
    if d == 0 || l == 0 {
        return Err(Error::invalid("model", "dimensions", alloc::format!("d = {d}, l = {l} must be ≥ 1")));
    }
    if coefficient.dim != l {
        return Err(Error::Dimension {
            module: "model",
            context: "coefficient g",
            expected: l,
            actual: coefficient.dim,
        });
    }
    let alpha = coefficient.lipschitz_z_sq;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid("model", "alpha", alloc::format!("α = {alpha} must lie in (0, 1)")));
    }
    if !(coefficient.lipschitz_y > 0.0) {
        return Err(Error::invalid(
            "model",
            "coefficient constant",
            alloc::format!("C = {} must be positive", coefficient.lipschitz_y),
        ));
    }
    if !(c >= 0.0) || !(driver.growth_constant >= 0.0) {
        return Err(Error::invalid("model", "constants", "C and growth constants must be ≥ 0"));
    }
    if (hypotheses.contains(Hypothesis::H5) || hypotheses.contains(Hypothesis::H10)) && modulus.is_none() {
        let tag = if hypotheses.contains(Hypothesis::H5) { Hypothesis::H5 } else { Hypothesis::H10 };
        return Err(Error::MissingData { tag, missing: "a modulus φ" });
    }
    if hypotheses.contains(Hypothesis::H8Prime) && k.is_none() {
        return Err(Error::MissingData {
            tag: Hypothesis::H8Prime,
            missing: "a process K_t",
        });
    }
    if hypotheses.contains(Hypothesis::H9) && bound_drivers.is_none() {
        return Err(Error::MissingData {
            tag: Hypothesis::H9,
            missing: "a bounding pair (f₁, f₂)",
        });
    }
    if let Some(phi) = &modulus {
        let report = phi.check_on_grid(10.0, 101, super::CHECK_TOLERANCE);
        if !report.passed() {
            return Err(Error::invalid("model", "modulus", alloc::format!("{report:?}")));
        }
    }

    let mut problem = Problem {
        name,
        horizon,
        d,
        l,
        driver,
        coefficient,
        terminal,
        modulus,
        c,
        hypotheses,
        bounds: None,
        k,
        aux: None,
    };
    check_totality(&problem)?;
    if let Some((lo, hi)) = bound_drivers {
        let lower = problem.with_driver(alloc::format!("{}/lower", problem.name), lo);
        let upper = problem.with_driver(alloc::format!("{}/upper", problem.name), hi);
        check_totality(&lower)?;
        check_totality(&upper)?;
        problem.bounds = Some(Arc::new((lower, upper)));
    }
    Ok(problem)
}

/// Evaluates `f`, `g` and `ξ` on a fixed sample and rejects non-finite values.
fn check_totality(p: &Problem) -> Result<()> {
    let mut rng = KeyedStream::new(0x70_7a1, 0);
    let mut z: Vec<f64> = alloc::vec![0.0; p.d];
    let mut g = alloc::vec![0.0; p.l];
    for _ in 0..64 {
        let t = rng.uniform(0.0, p.horizon);
        let y = rng.uniform(-3.0, 3.0);
        for zk in z.iter_mut() {
            *zk = rng.uniform(-3.0, 3.0);
        }
        let f = p.driver.eval(t, y, &z);
        if !f.is_finite() {
            return Err(Error::invalid(
                "model",
                "driver",
                alloc::format!("f({t}, {y}, {z:?}) = {f} is not finite"),
            ));
        }
        p.coefficient.eval_into(t, y, &z, &mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "model",
                "coefficient",
                alloc::format!("g({t}, {y}, {z:?}) = {g:?} is not finite"),
            ));
        }
    }
    // a two-node path is enough to exercise the terminal functional
    let w: Vec<f64> = (0..2 * p.d).map(|_| rng.normal()).collect();
    let b: Vec<f64> = (0..2 * p.l).map(|_| rng.normal()).collect();
    let view = PathView { w: &w, b: &b, d: p.d, l: p.l };
    let xi = p.terminal.eval(&view);
    if !xi.is_finite() {
        return Err(Error::invalid("model", "terminal condition", alloc::format!("ξ = {xi}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_driver_problem() {
        let p = build_problem(ProblemSpec {
            terminal: Some(TerminalCondition::constant(5.0)),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.horizon, 1.0);
        assert_eq!((p.d, p.l), (1, 1));
        assert_eq!(p.driver.eval(0.3, 2.0, &[1.0]), 0.0);
        assert_eq!(p.coefficient.eval(0.3, 2.0, &[1.0]), alloc::vec![0.0]);
    }

    #[test]
    fn alpha_outside_unit_interval_is_rejected() {
        let g = VectorFunction::new(1, 1.0, 1.2, "z", |_, _, z, out| out[0] = z[0]);
        let err = build_problem(ProblemSpec {
            coefficient: Some(g),
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Invalid { what: "alpha", .. }), "{err}");
    }

    #[test]
    fn coefficient_dimension_must_match() {
        let err = build_problem(ProblemSpec {
            l: Some(2),
            coefficient: Some(VectorFunction::zero(1)),
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn h9_requires_bounds() {
        let err = build_problem(ProblemSpec {
            hypotheses: Some(Hypotheses::of(&[Hypothesis::H9])),
            ..Default::default()
        })
        .unwrap_err();
        assert!(matches!(err, Error::MissingData { tag: Hypothesis::H9, .. }));
    }

    #[test]
    fn non_total_driver_is_rejected() {
        let f = ScalarFunction::new(1.0, "sqrt(y)", |_, y, _| y.sqrt());
        assert!(build_problem(ProblemSpec {
            driver: Some(f),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn catalog_with_horizon_override() {
        let p = build_problem(ProblemSpec {
            catalog: Some("nonunique_sqrt".into()),
            horizon: Some(1.0),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(p.name, "nonunique_sqrt");
        assert!(p.bounds.is_some());
        assert!(p.hypotheses.contains(Hypothesis::H9));
    }

    #[test]
    fn hypothesis_names_round_trip() {
        for h in Hypothesis::ALL {
            assert_eq!(Hypothesis::parse(h.as_str()), Some(h));
        }
        assert_eq!(Hypothesis::parse("h8p"), Some(Hypothesis::H8Prime));
        assert_eq!(Hypothesis::parse("H11"), None);
    }
}
