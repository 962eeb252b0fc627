//! Frozen-B regression scheme.
//!
//! Each outer path fixes one `B` path; conditional expectations given
//! `W_{t_i}` are least-squares projections over the inner `W` paths sharing
//! it. Backwards in `i`:
//!
//! ```text
//! G_{i+1} = g(t_{i+1}, Y_{i+1}, Z_{i+1}) · ΔB_i
//! S       = Y_{i+1} + G_{i+1}
//! Z_i     = E_i[(S − E_i[S]) ΔW_i] / dt
//! Y_i     = E_i[S] + f(t_i, Y_i, Z_i) dt
//! ```
//!
//! Centring `S` before multiplying by `ΔW_i` leaves `Z_i` unchanged in
//! expectation but makes it exactly zero when `S` is constant across the
//! ensemble.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::model::{PathView, Problem};
use crate::noise::{NoiseBundle, NoiseId, TimeGrid};
use crate::regression::{Design, LeastSquares};

/// Undamped sweeps before damping may engage.
pub const UNDAMPED_SWEEPS: usize = 5;
pub const DAMPING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriverMode {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemeConfig {
    pub basis_degree: usize,
    pub implicit_iterations: usize,
    pub implicit_tolerance: f64,
    pub driver_mode: DriverMode,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            basis_degree: 3,
            implicit_iterations: 20,
            implicit_tolerance: 1e-10,
            driver_mode: DriverMode::Implicit,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.implicit_iterations == 0 {
            return Err(Error::invalid("solver", "implicit_iterations", "must be ≥ 1"));
        }
        if !(self.implicit_tolerance > 0.0) {
            return Err(Error::invalid("solver", "implicit_tolerance", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub s2_norm: f64,
    pub m2_norm: f64,
    pub max_residual: f64,
    /// Max absolute residual per node over all paths.
    pub residual_by_node: Vec<f64>,
    /// Number of regressions that needed ridge damping.
    pub ridge_fallbacks: usize,
    /// Most fixed-point sweeps used at any node.
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub problem: String,
    pub noise: NoiseId,
    pub config: SchemeConfig,
}

/// `Y[outer][inner][node]`, `Z[outer][inner][node][d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    grid: TimeGrid,
    outer: usize,
    inner: usize,
    d: usize,
    y: Vec<f64>,
    z: Vec<f64>,
    /// Regression standard error of `E_i[S]`, `[outer][node]`.
    se: Vec<f64>,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

impl DiscreteSolution {
    /// Wraps candidate values `(y, z) = values(outer, inner, node, t)` on the
    /// bundle's grid, e.g. a closed form. Diagnostics are filled against
    /// `problem`.
    pub fn from_fn<F>(problem: &Problem, noise: &NoiseBundle, values: F) -> Result<Self>
    where
        F: Fn(usize, usize, usize, f64) -> (f64, Vec<f64>),
    {
        let (outer, inner, d) = (noise.outer(), noise.inner(), noise.d());
        let nodes = noise.grid().nodes_len();
        let mut y = Vec::with_capacity(outer * inner * nodes);
        let mut z = Vec::with_capacity(outer * inner * nodes * d);
        for o in 0..outer {
            for j in 0..inner {
                for i in 0..nodes {
                    let (yv, zv) = values(o, j, i, noise.grid().node(i));
                    if zv.len() != d {
                        return Err(Error::Dimension {
                            module: "solver",
                            context: "candidate z",
                            expected: d,
                            actual: zv.len(),
                        });
                    }
                    y.push(yv);
                    z.extend_from_slice(&zv);
                }
            }
        }
        let mut sol = Self {
            grid: *noise.grid(),
            outer,
            inner,
            d,
            y,
            z,
            se: vec![0.0; outer * nodes],
            diagnostics: empty_diagnostics(nodes),
            provenance: Provenance {
                problem: problem.name.clone(),
                noise: noise.id(),
                config: SchemeConfig::default(),
            },
        };
        let res = residual(problem, &sol, noise)?;
        sol.finish(&res);
        Ok(sol)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn outer(&self) -> usize {
        self.outer
    }
    pub fn inner(&self) -> usize {
        self.inner
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn nodes(&self) -> usize {
        self.grid.nodes_len()
    }
    pub fn y_all(&self) -> &[f64] {
        &self.y
    }
    pub fn z_all(&self) -> &[f64] {
        &self.z
    }

    #[inline]
    pub fn y(&self, outer: usize, inner: usize, node: usize) -> f64 {
        self.y[(outer * self.inner + inner) * self.nodes() + node]
    }

    #[inline]
    pub fn z(&self, outer: usize, inner: usize, node: usize) -> &[f64] {
        let start = ((outer * self.inner + inner) * self.nodes() + node) * self.d;
        &self.z[start..start + self.d]
    }

    pub fn y_path(&self, outer: usize, inner: usize) -> &[f64] {
        let n = self.nodes();
        let start = (outer * self.inner + inner) * n;
        &self.y[start..start + n]
    }

    /// Regression standard error of the conditional mean at `(outer, node)`;
    /// zero at the terminal node.
    pub fn regression_se(&self, outer: usize, node: usize) -> f64 {
        self.se[outer * self.nodes() + node]
    }

    /// Same values with every `Y` scaled by `factor` (diagnostics untouched).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.y.iter_mut().for_each(|v| *v *= factor);
        out.se.iter_mut().for_each(|v| *v *= factor.abs());
        out
    }

    /// Per-node summary rows.
    pub fn summary(&self) -> Vec<NodeSummary> {
        let paths = (self.outer * self.inner) as f64;
        (0..self.nodes())
            .map(|i| {
                let (mut sum, mut sq, mut abs_z) = (0.0, 0.0, 0.0);
                for o in 0..self.outer {
                    for j in 0..self.inner {
                        let v = self.y(o, j, i);
                        sum += v;
                        sq += v * v;
                        abs_z += norm(self.z(o, j, i));
                    }
                }
                let mean = sum / paths;
                NodeSummary {
                    t: self.grid.node(i),
                    mean_y: mean,
                    std_y: (sq / paths - mean * mean).max(0.0).sqrt(),
                    mean_abs_z: abs_z / paths,
                    max_residual: self.diagnostics.residual_by_node[i],
                }
            })
            .collect()
    }

    fn finish(&mut self, res: &Residual) {
        let nodes = self.nodes();
        let dt = self.grid.dt();
        let paths = (self.outer * self.inner) as f64;
        let mut s2 = 0.0;
        let mut m2 = 0.0;
        for o in 0..self.outer {
            for j in 0..self.inner {
                s2 += self.y_path(o, j).iter().map(|v| v * v).fold(0.0, f64::max);
                m2 += (0..nodes - 1).map(|i| norm_sq(self.z(o, j, i)) * dt).sum::<f64>();
            }
        }
        self.diagnostics.s2_norm = s2 / paths;
        self.diagnostics.m2_norm = m2 / paths;
        self.diagnostics.max_residual = res.max_abs;
        self.diagnostics.residual_by_node = (0..nodes)
            .map(|i| {
                let mut m = 0.0f64;
                for p in 0..self.outer * self.inner {
                    m = m.max(res.values[p * nodes + i].abs());
                }
                m
            })
            .collect();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub t: f64,
    pub mean_y: f64,
    pub std_y: f64,
    pub mean_abs_z: f64,
    pub max_residual: f64,
}

/// Residual array `[outer][inner][node]` and its max absolute value.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub values: Vec<f64>,
    pub max_abs: f64,
}

fn empty_diagnostics(nodes: usize) -> Diagnostics {
    Diagnostics {
        s2_norm: 0.0,
        m2_norm: 0.0,
        max_residual: 0.0,
        residual_by_node: vec![0.0; nodes],
        ridge_fallbacks: 0,
        max_sweeps: 0,
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_conformable(problem: &Problem, noise: &NoiseBundle) -> Result<()> {
    if noise.d() != problem.d {
        return Err(Error::Dimension { module: "solver", context: "W dimension", expected: problem.d, actual: noise.d() });
    }
    if noise.l() != problem.l {
        return Err(Error::Dimension { module: "solver", context: "B dimension", expected: problem.l, actual: noise.l() });
    }
    if (noise.grid().horizon() - problem.horizon).abs() > 1e-12 * problem.horizon {
        return Err(Error::invalid(
            "solver",
            "horizon",
            alloc::format!("noise grid ends at {} but the problem at {}", noise.grid().horizon(), problem.horizon),
        ));
    }
    if let Some(aux) = &problem.aux {
        let nodes = noise.grid().nodes_len();
        if aux.outer != noise.outer() || aux.inner != noise.inner() || aux.nodes != nodes {
            return Err(Error::invalid(
                "solver",
                "aux field",
                alloc::format!(
                    "shape {}×{}×{} does not match the noise bundle {}×{}×{}",
                    aux.outer,
                    aux.inner,
                    aux.nodes,
                    noise.outer(),
                    noise.inner(),
                    nodes
                ),
            ));
        }
    }
    Ok(())
}

fn driver_at(problem: &Problem, o: usize, j: usize, i: usize, t: f64, y: f64, z: &[f64]) -> f64 {
    match &problem.aux {
        Some(aux) => problem.driver.eval_aux(t, y, z, aux.at(o, j, i)),
        None => problem.driver.eval(t, y, z),
    }
}

fn terminal_values(problem: &Problem, noise: &NoiseBundle, o: usize) -> Vec<f64> {
    let b = noise.b_path(o);
    (0..noise.inner())
        .map(|j| {
            let w = noise.w_path(o, j);
            problem.terminal.eval(&PathView { w: &w, b: &b, d: noise.d(), l: noise.l() })
        })
        .collect()
}

/// Solves on the calling thread.
pub fn solve(problem: &Problem, noise: &NoiseBundle, config: &SchemeConfig) -> Result<DiscreteSolution> {
    solve_with(problem, noise, config, &crate::Sequential)
}

struct OuterResult {
    y: Vec<f64>,
    z: Vec<f64>,
    se: Vec<f64>,
    ridge: usize,
    sweeps: usize,
}

/// Solves with outer paths distributed by `exec`; the result does not depend
/// on the executor.
pub fn solve_with<E: Executor>(
    problem: &Problem,
    noise: &NoiseBundle,
    config: &SchemeConfig,
    exec: &E,
) -> Result<DiscreteSolution> {
    config.validate()?;
    check_conformable(problem, noise)?;
    let results = exec.map(noise.outer(), |o| solve_outer(problem, noise, config, o));
    let nodes = noise.grid().nodes_len();
    let (outer, inner, d) = (noise.outer(), noise.inner(), noise.d());
    let mut y = Vec::with_capacity(outer * inner * nodes);
    let mut z = Vec::with_capacity(outer * inner * nodes * d);
    let mut se = Vec::with_capacity(outer * nodes);
    let mut diagnostics = empty_diagnostics(nodes);
    for r in results {
        let r = r?;
        y.extend_from_slice(&r.y);
        z.extend_from_slice(&r.z);
        se.extend_from_slice(&r.se);
        diagnostics.ridge_fallbacks += r.ridge;
        diagnostics.max_sweeps = diagnostics.max_sweeps.max(r.sweeps);
    }
    let mut sol = DiscreteSolution {
        grid: *noise.grid(),
        outer,
        inner,
        d,
        y,
        z,
        se,
        diagnostics,
        provenance: Provenance { problem: problem.name.clone(), noise: noise.id(), config: *config },
    };
    let res = residual_with(problem, &sol, noise, exec)?;
    sol.finish(&res);
    Ok(sol)
}

/// One frozen-B ensemble, laid out `[inner][node]` (and `[inner][node][d]`).
fn solve_outer(problem: &Problem, noise: &NoiseBundle, config: &SchemeConfig, o: usize) -> Result<OuterResult> {
    let grid = noise.grid();
    let (m, d, l) = (noise.inner(), noise.d(), noise.l());
    let steps = grid.steps();
    let nodes = steps + 1;
    let dt = grid.dt();
    let mut y = vec![0.0; m * nodes];
    let mut z = vec![0.0; m * nodes * d];
    let mut se = vec![0.0; nodes];
    let mut ridge = 0;
    let mut max_sweeps = 0;

    // running W_{t_i} per inner path, stepped backwards from W_T
    let mut w = vec![0.0; m * d];
    for j in 0..m {
        let path = noise.dw_path(o, j);
        for i in 0..steps {
            for k in 0..d {
                w[j * d + k] += path[i * d + k];
            }
        }
    }
    let xi = terminal_values(problem, noise, o);
    for (j, &v) in xi.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { quantity: "terminal value", outer: o, inner: j, node: steps });
        }
        y[j * nodes + steps] = v;
    }

    let mut g = vec![0.0; l];
    let mut s = vec![0.0; m];
    let mut zt = vec![0.0; m];
    let mut zi = vec![0.0; m * d];
    let terminal_z_loop = problem.coefficient.depends_on_z;

    for i in (0..steps).rev() {
        let t_i = grid.node(i);
        let t_next = grid.node(i + 1);
        let db = noise.db(o, i);
        for j in 0..m {
            let dw = noise.dw(o, j, i);
            for k in 0..d {
                w[j * d + k] -= dw[k];
            }
        }
        let design = Design::hermite(&w, d, config.basis_degree, t_i.sqrt());
        let ls = LeastSquares::new(&design)?;
        if ls.ridge_used() {
            ridge += 1;
        }

        // Z_N is copied from Z_{N−1}; when g reads z this is a fixed point
        let rounds = if i + 1 == steps && terminal_z_loop { config.implicit_iterations } else { 1 };
        let mut mean = Vec::new();
        for round in 0..rounds {
            for j in 0..m {
                let base = j * nodes + i + 1;
                problem
                    .coefficient
                    .eval_into(t_next, y[base], &z[base * d..(base + 1) * d], &mut g);
                s[j] = y[base] + dot(&g, db);
            }
            let fit = ls.fit(&s)?;
            se[i] = fit.standard_error;
            mean = fit.fitted;
            for k in 0..d {
                for j in 0..m {
                    zt[j] = (s[j] - mean[j]) * noise.dw(o, j, i)[k] / dt;
                }
                let fz = ls.fit(&zt)?;
                for j in 0..m {
                    zi[j * d + k] = fz.fitted[j];
                }
            }
            if rounds == 1 {
                break;
            }
            let mut change = 0.0f64;
            for j in 0..m {
                for k in 0..d {
                    let slot = (j * nodes + steps) * d + k;
                    change = change.max((z[slot] - zi[j * d + k]).abs());
                    z[slot] = zi[j * d + k];
                }
            }
            if change <= config.implicit_tolerance {
                break;
            }
            if round + 1 == rounds {
                return Err(Error::NonConvergence { outer: o, inner: 0, node: steps, residual: change });
            }
        }

        for j in 0..m {
            let zj = &zi[j * d..(j + 1) * d];
            for (k, &v) in zj.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { quantity: "Z", outer: o, inner: j, node: i });
                }
                z[(j * nodes + i) * d + k] = v;
            }
            let (value, sweeps) = implicit_step(problem, config, o, j, i, t_i, mean[j], zj, dt)?;
            max_sweeps = max_sweeps.max(sweeps);
            if !value.is_finite() {
                return Err(Error::NonFinite { quantity: "Y", outer: o, inner: j, node: i });
            }
            y[j * nodes + i] = value;
        }
    }
    if !terminal_z_loop {
        for j in 0..m {
            for k in 0..d {
                z[(j * nodes + steps) * d + k] = z[(j * nodes + steps - 1) * d + k];
            }
        }
    }
    Ok(OuterResult { y, z, se, ridge, sweeps: max_sweeps })
}

/// Solves `y = mean + f(t, y, z)·dt`; returns the value and sweeps used.
#[allow(clippy::too_many_arguments)]
fn implicit_step(
    problem: &Problem,
    config: &SchemeConfig,
    o: usize,
    j: usize,
    i: usize,
    t: f64,
    mean: f64,
    z: &[f64],
    dt: f64,
) -> Result<(f64, usize)> {
    let f = |y: f64| driver_at(problem, o, j, i, t, y, z);
    if config.driver_mode == DriverMode::Explicit || !problem.driver.depends_on_y {
        return Ok((mean + f(mean) * dt, 1));
    }
    let mut y = mean;
    let mut last_step = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for sweep in 1..=config.implicit_iterations {
        let next = mean + f(y) * dt;
        gap = (next - y).abs();
        if gap <= config.implicit_tolerance * (1.0 + next.abs()) {
            return Ok((next, sweep));
        }
        y = if sweep > UNDAMPED_SWEEPS && gap > DAMPING * last_step {
            (1.0 - DAMPING) * y + DAMPING * next
        } else {
            next
        };
        last_step = gap;
    }
    Err(Error::NonConvergence { outer: o, inner: j, node: i, residual: gap })
}

/// Residual of the discrete equation along every path:
///
/// ```text
/// r_i = Y_i − [ξ + Σ_{k≥i} f(t_k, Y_k, Z_k) dt + Σ_{k≥i} g(t_{k+1}, Y_{k+1}, Z_{k+1})·ΔB_k − Σ_{k≥i} Z_k·ΔW_k]
/// ```
pub fn residual(problem: &Problem, solution: &DiscreteSolution, noise: &NoiseBundle) -> Result<Residual> {
    residual_with(problem, solution, noise, &crate::Sequential)
}

pub fn residual_with<E: Executor>(
    problem: &Problem,
    solution: &DiscreteSolution,
    noise: &NoiseBundle,
    exec: &E,
) -> Result<Residual> {
    check_conformable(problem, noise)?;
    if solution.outer != noise.outer()
        || solution.inner != noise.inner()
        || solution.d != noise.d()
        || solution.grid != *noise.grid()
    {
        return Err(Error::Provenance);
    }
    let grid = noise.grid();
    let steps = grid.steps();
    let nodes = steps + 1;
    let dt = grid.dt();
    let per_outer = exec.map(noise.outer(), |o| {
        let xi = terminal_values(problem, noise, o);
        let mut out = vec![0.0; noise.inner() * nodes];
        let mut g = vec![0.0; noise.l()];
        for j in 0..noise.inner() {
            let mut acc = xi[j];
            out[j * nodes + steps] = solution.y(o, j, steps) - acc;
            for i in (0..steps).rev() {
                let (y_next, z_next) = (solution.y(o, j, i + 1), solution.z(o, j, i + 1));
                problem.coefficient.eval_into(grid.node(i + 1), y_next, z_next, &mut g);
                let (y_i, z_i) = (solution.y(o, j, i), solution.z(o, j, i));
                let f = driver_at(problem, o, j, i, grid.node(i), y_i, z_i);
                // same association as the scheme, so exact cases cancel bit for bit
                acc = (acc + dot(&g, noise.db(o, i))) + f * dt - dot(z_i, noise.dw(o, j, i));
                out[j * nodes + i] = y_i - acc;
            }
        }
        out
    });
    let values: Vec<f64> = per_outer.into_iter().flatten().collect();
    let max_abs = values.iter().fold(0.0f64, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) });
    Ok(Residual { values, max_abs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{catalog_lookup, closed_form, TerminalCondition};
    use crate::noise::{make_grid, sample_noise};

    fn bundle(steps: usize, outer: usize, inner: usize, seed: u64) -> NoiseBundle {
        sample_noise(make_grid(1.0, steps).unwrap(), 1, 1, outer, inner, seed).unwrap()
    }

    #[test]
    fn constant_is_exact() {
        let p = catalog_lookup("constant").unwrap();
        let noise = bundle(16, 2, 64, 1);
        let sol = solve(&p, &noise, &SchemeConfig::default()).unwrap();
        assert!(sol.y_all().iter().all(|&v| v == 5.0));
        assert!(sol.z_all().iter().all(|&v| v == 0.0));
        assert_eq!(sol.diagnostics.max_residual, 0.0);
        assert_eq!(sol.diagnostics.s2_norm, 25.0);
        assert_eq!(sol.diagnostics.m2_norm, 0.0);
    }

    #[test]
    fn pure_drift_is_exact() {
        let p = catalog_lookup("pure_drift").unwrap();
        let noise = bundle(32, 2, 64, 2);
        let sol = solve(&p, &noise, &SchemeConfig::default()).unwrap();
        for i in 0..=32 {
            let t = noise.grid().node(i);
            assert!((sol.y(1, 3, i) - (1.0 - t)).abs() < 1e-14);
        }
        assert!(sol.diagnostics.max_residual <= 1e-15);
        assert!((sol.diagnostics.s2_norm - 1.0).abs() < 1e-14);
    }

    #[test]
    fn backward_noise_telescopes() {
        let p = catalog_lookup("backward_noise").unwrap();
        let noise = bundle(32, 3, 32, 3);
        let sol = solve(&p, &noise, &SchemeConfig::default()).unwrap();
        for o in 0..3 {
            let b = noise.b_path(o);
            for i in 0..=32 {
                let want = b[32] - b[i];
                assert!((sol.y(o, 5, i) - want).abs() < 1e-13);
            }
        }
        assert!(sol.z_all().iter().all(|&v| v == 0.0));
        assert!(sol.diagnostics.max_residual <= 1e-14);
    }

    #[test]
    fn linear_problem_matches_closed_form() {
        let p = catalog_lookup("linear").unwrap();
        let noise = bundle(64, 2, 4000, 4);
        let sol = solve(&p, &noise, &SchemeConfig::default()).unwrap();
        let cf = closed_form("linear", &[0.0], 0.0).unwrap();
        let y0 = sol.y(0, 0, 0);
        assert!((y0 - cf.y).abs() < 0.05, "{y0} vs {}", cf.y);
        assert!((sol.z(0, 0, 0)[0] - cf.z[0]).abs() < 0.1);
    }

    #[test]
    fn closed_form_injection_residual_is_first_order() {
        let p = catalog_lookup("nonunique_sqrt").unwrap();
        let noise = bundle(512, 1, 4, 5);
        for c in [0.0, 0.5, 1.0] {
            let sol = DiscreteSolution::from_fn(&p, &noise, |_, _, _, t| {
                let v = closed_form("nonunique_sqrt", &[c], t).unwrap();
                (v.y, v.z)
            })
            .unwrap();
            assert!(sol.diagnostics.max_residual <= 10.0 / 512.0, "c={c}: {}", sol.diagnostics.max_residual);
        }
    }

    #[test]
    fn terminal_values_are_exact() {
        let p = catalog_lookup("linear").unwrap();
        let noise = bundle(8, 1, 50, 6);
        let sol = solve(&p, &noise, &SchemeConfig::default()).unwrap();
        for j in 0..50 {
            assert_eq!(sol.y(0, j, 8), noise.w_path(0, j)[8]);
        }
    }

    #[test]
    fn linear_in_terminal_condition() {
        let noise = bundle(16, 2, 256, 7);
        let base = catalog_lookup("constant").unwrap();
        let xi1 = TerminalCondition::new("w^2", |p| p.w_terminal()[0].powi(2));
        let xi2 = TerminalCondition::new("sin b", |p| p.b_terminal()[0].sin() + p.w_terminal()[0]);
        let mix = TerminalCondition::new("mix", |p| {
            2.0 * p.w_terminal()[0].powi(2) - 3.0 * (p.b_terminal()[0].sin() + p.w_terminal()[0])
        });
        let cfg = SchemeConfig::default();
        let a = solve(&base.with_terminal("a", xi1), &noise, &cfg).unwrap();
        let b = solve(&base.with_terminal("b", xi2), &noise, &cfg).unwrap();
        let c = solve(&base.with_terminal("c", mix), &noise, &cfg).unwrap();
        for k in 0..a.y_all().len() {
            assert!((c.y_all()[k] - (2.0 * a.y_all()[k] - 3.0 * b.y_all()[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = catalog_lookup("constant").unwrap();
        let noise = sample_noise(make_grid(1.0, 4).unwrap(), 2, 1, 1, 16, 1).unwrap();
        assert!(matches!(solve(&p, &noise, &SchemeConfig::default()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn stiff_driver_reports_non_convergence() {
        let p = catalog_lookup("constant").unwrap().with_driver(
            "stiff",
            crate::model::ScalarFunction::new(1.0, "-50y", |_, y, _| -50.0 * y),
        );
        let noise = bundle(4, 1, 16, 1);
        let cfg = SchemeConfig { implicit_iterations: 3, ..Default::default() };
        assert!(matches!(solve(&p, &noise, &cfg), Err(Error::NonConvergence { .. })));
    }
}
