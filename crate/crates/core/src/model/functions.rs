use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

type ScalarEval = dyn Fn(f64, f64, &[f64], &[f64]) -> f64 + Send + Sync;
type JumpSet = dyn Fn(f64, f64, &[f64]) -> bool + Send + Sync;
type VectorEval = dyn Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync;
type TerminalEval = dyn Fn(&PathView<'_>) -> f64 + Send + Sync;

/// A real function of `(t, y, z)` plus optional per-path auxiliary values.
///
/// Drivers, bounding drivers and envelopes are all of this type. Structural
/// flags (`depends_on_y`, `depends_on_z`) and a declared global range let the
/// envelope search skip dimensions and prune early; they are part of the
/// contract and must be truthful.
#[derive(Clone)]
pub struct ScalarFunction {
    eval: Arc<ScalarEval>,
    /// `C` in `|f(t, y, z)| ≤ C(K_t + |y| + |z|)`.
    pub growth_constant: f64,
    pub description: String,
    pub depends_on_y: bool,
    pub depends_on_z: bool,
    /// Declared `(inf f, sup f)` over the whole domain, when known.
    pub range: Option<(f64, f64)>,
    /// Declared `L` with `|f(t, y₁, z₁) − f(t, y₂, z₂)| ≤ L(|y₁ − y₂| + |z₁ − z₂|)`.
    pub lipschitz: Option<f64>,
    jumps: Option<Arc<JumpSet>>,
}

impl ScalarFunction {
    pub fn new<F>(growth_constant: f64, description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::with_aux(growth_constant, description, move |t, y, z, _aux| f(t, y, z))
    }

    /// A function that also reads per-path auxiliary values.
    pub fn with_aux<F>(growth_constant: f64, description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            growth_constant,
            description: description.into(),
            depends_on_y: true,
            depends_on_z: true,
            range: None,
            lipschitz: None,
            jumps: None,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value.abs(), alloc::format!("{value}"), move |_, _, _| value)
            .independent_of_y()
            .independent_of_z()
            .with_range(value, value)
            .with_lipschitz(0.0)
    }

    pub fn independent_of_y(mut self) -> Self {
        self.depends_on_y = false;
        self
    }

    pub fn independent_of_z(mut self) -> Self {
        self.depends_on_z = false;
        self
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.range = Some((lo, hi));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// Declares the discontinuity set; points in it are reported, not judged,
    /// by convergence checks.
    pub fn with_jumps<J>(mut self, jumps: J) -> Self
    where
        J: Fn(f64, f64, &[f64]) -> bool + Send + Sync + 'static,
    {
        self.jumps = Some(Arc::new(jumps));
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        (self.eval)(t, y, z, &[])
    }

    #[inline]
    pub fn eval_aux(&self, t: f64, y: f64, z: &[f64], aux: &[f64]) -> f64 {
        (self.eval)(t, y, z, aux)
    }

    pub fn is_jump(&self, t: f64, y: f64, z: &[f64]) -> bool {
        self.jumps.as_ref().is_some_and(|j| j(t, y, z))
    }

    /// `-f`, with range and flags carried over.
    pub fn negated(&self) -> Self {
        let inner = self.eval.clone();
        let mut out = Self::with_aux(
            self.growth_constant,
            alloc::format!("-({})", self.description),
            move |t, y, z, aux| -inner(t, y, z, aux),
        );
        out.depends_on_y = self.depends_on_y;
        out.depends_on_z = self.depends_on_z;
        out.range = self.range.map(|(lo, hi)| (-hi, -lo));
        out.lipschitz = self.lipschitz;
        out.jumps = self.jumps.clone();
        out
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("description", &self.description)
            .field("growth_constant", &self.growth_constant)
            .finish_non_exhaustive()
    }
}

/// The backward-noise coefficient `g: (t, y, z) ↦ ℝ^l`, with the declared
/// constants of `|g₁ − g₂|² ≤ C|y₁ − y₂|² + α|z₁ − z₂|²`.
#[derive(Clone)]
pub struct VectorFunction {
    eval: Arc<VectorEval>,
    pub dim: usize,
    pub lipschitz_y: f64,
    pub lipschitz_z_sq: f64,
    pub depends_on_z: bool,
    pub description: String,
}

impl VectorFunction {
    pub fn new<F>(
        dim: usize,
        lipschitz_y: f64,
        lipschitz_z_sq: f64,
        description: impl Into<String>,
        f: F,
    ) -> Self
    where
        F: Fn(f64, f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            dim,
            lipschitz_y,
            lipschitz_z_sq,
            depends_on_z: true,
            description: description.into(),
        }
    }

    /// `g ≡ values`. Declared constants are nominal (any C > 0, α ∈ (0,1) hold).
    pub fn constant(values: Vec<f64>) -> Self {
        let desc = alloc::format!("{values:?}");
        let dim = values.len();
        Self::new(dim, 1.0, 0.5, desc, move |_, _, _, out| out.copy_from_slice(&values))
            .independent_of_z()
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(vec![0.0; dim])
    }

    pub fn independent_of_z(mut self) -> Self {
        self.depends_on_z = false;
        self
    }

    #[inline]
    pub fn eval_into(&self, t: f64, y: f64, z: &[f64], out: &mut [f64]) {
        (self.eval)(t, y, z, out)
    }

    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, y, z, &mut out);
        out
    }
}

impl fmt::Debug for VectorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFunction")
            .field("description", &self.description)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

/// Modulus of continuity φ for uniform continuity in `z`.
#[derive(Clone)]
pub struct Modulus {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub linear_growth_constant: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusReport {
    pub zero_at_origin: bool,
    pub monotone_violations: usize,
    pub subadditive_violations: usize,
    pub growth_violations: usize,
}

impl ModulusReport {
    pub fn passed(&self) -> bool {
        self.zero_at_origin
            && self.monotone_violations == 0
            && self.subadditive_violations == 0
            && self.growth_violations == 0
    }
}

impl Modulus {
    pub fn new<F>(linear_growth_constant: f64, description: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            linear_growth_constant,
            description: description.into(),
        }
    }

    /// φ(x) = c·x.
    pub fn linear(c: f64) -> Self {
        Self::new(c, alloc::format!("{c}*x"), move |x| c * x)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Checks φ(0) = 0, monotonicity, sub-additivity and linear growth on a
    /// uniform grid of `points` nodes over `[0, max]`.
    pub fn check_on_grid(&self, max: f64, points: usize, tol: f64) -> ModulusReport {
        let xs: Vec<f64> = (0..points)
            .map(|i| max * i as f64 / (points - 1).max(1) as f64)
            .collect();
        let vals: Vec<f64> = xs.iter().map(|&x| self.eval(x)).collect();
        let c = self.linear_growth_constant;
        let monotone_violations = vals.windows(2).filter(|w| w[1] < w[0] - tol).count();
        let growth_violations = xs
            .iter()
            .zip(&vals)
            .filter(|&(&x, &v)| v < -tol || v > c * (1.0 + x) + tol)
            .count();
        let mut subadditive_violations = 0;
        for (i, &a) in xs.iter().enumerate() {
            for &b in &xs[i..] {
                if self.eval(a + b) > vals[i] + self.eval(b) + tol {
                    subadditive_violations += 1;
                }
            }
        }
        ModulusReport {
            zero_at_origin: self.eval(0.0).abs() <= tol,
            monotone_violations,
            subadditive_violations,
            growth_violations,
        }
    }
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Modulus")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

/// One discretized `(W, B)` path: `w` holds `(steps + 1) × d` node values,
/// `b` holds `(steps + 1) × l`.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub d: usize,
    pub l: usize,
}

impl PathView<'_> {
    pub fn steps(&self) -> usize {
        self.w.len() / self.d - 1
    }

    pub fn w_at(&self, node: usize) -> &[f64] {
        &self.w[node * self.d..(node + 1) * self.d]
    }

    pub fn b_at(&self, node: usize) -> &[f64] {
        &self.b[node * self.l..(node + 1) * self.l]
    }

    pub fn w_terminal(&self) -> &[f64] {
        self.w_at(self.steps())
    }

    pub fn b_terminal(&self) -> &[f64] {
        self.b_at(self.steps())
    }
}

/// ξ as a functional of the grid values of `W` and `B`.
#[derive(Clone)]
pub struct TerminalCondition {
    eval: Arc<TerminalEval>,
    pub second_moment_bound: Option<f64>,
    pub description: String,
}

impl TerminalCondition {
    pub fn new<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(&PathView<'_>) -> f64 + Send + Sync + 'static,
    {
        Self {
            eval: Arc::new(f),
            second_moment_bound: None,
            description: description.into(),
        }
    }

    pub fn constant(value: f64) -> Self {
        let mut xi = Self::new(alloc::format!("{value}"), move |_| value);
        xi.second_moment_bound = Some(value * value);
        xi
    }

    pub fn with_second_moment_bound(mut self, bound: f64) -> Self {
        self.second_moment_bound = Some(bound);
        self
    }

    #[inline]
    pub fn eval(&self, path: &PathView<'_>) -> f64 {
        (self.eval)(path)
    }
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCondition")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_modulus_is_admissible() {
        let phi = Modulus::new(1.5, "sqrt(x)+x", |x: f64| x.sqrt() + x);
        let report = phi.check_on_grid(10.0, 201, 1e-9);
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn square_is_not_a_modulus() {
        let phi = Modulus::new(1.0, "x^2", |x: f64| x * x);
        let report = phi.check_on_grid(10.0, 101, 1e-9);
        assert!(report.subadditive_violations > 0);
        assert!(report.growth_violations > 0);
    }

    #[test]
    fn negation_flips_range() {
        let f = ScalarFunction::new(1.0, "ind", |_, y, _| if y >= 0.0 { 1.0 } else { 0.0 })
            .with_range(0.0, 1.0);
        let g = f.negated();
        assert_eq!(g.range, Some((-1.0, 0.0)));
        assert_eq!(g.eval(0.0, 0.5, &[0.0]), -1.0);
    }
}
