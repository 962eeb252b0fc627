//! Time grids, the two independent Brownian noises and discrete Itô sums.
//!
//! A bundle holds `outer` independent backward-noise paths `B`; each one is
//! shared ("frozen") by `inner` independent forward-noise paths `W`. Solving
//! path-by-path in `B` reduces the doubly stochastic equation to a backward
//! equation in `W` with a known random forcing.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::{hash_key, normal_from_counter};
#[allow(unused_imports)]
use num_traits::Float;

/// Uniform grid `0 = t_0 < … < t_N = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("noise", "horizon", alloc::format!("T = {horizon}")));
        }
        if steps == 0 {
            return Err(Error::invalid("noise", "step count", "N must be at least 1"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn nodes_len(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_i`; the last node is exactly `T`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i >= self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }
}

/// Which of the two Brownian motions a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Forward,
    Backward,
}

/// Address of one standard normal draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DrawKey {
    pub stream: Stream,
    pub outer: usize,
    pub inner: usize,
    pub step: usize,
    pub component: usize,
}

/// A keyed source of standard normal draws.
pub trait IncrementSource: Sync {
    fn id(&self) -> &str;
    fn standard_normal(&self, seed: u64, key: DrawKey) -> f64;
}

/// SplitMix64-keyed Box–Muller; the default generator.
#[derive(Debug, Default, Clone, Copy)]
pub struct KeyedGaussian;

impl IncrementSource for KeyedGaussian {
    fn id(&self) -> &str {
        "splitmix64-keyed-box-muller/1"
    }

    #[inline]
    fn standard_normal(&self, seed: u64, key: DrawKey) -> f64 {
        let stream = match key.stream {
            Stream::Forward => 0x57,
            Stream::Backward => 0x42,
        };
        normal_from_counter(hash_key(
            seed,
            &[stream, key.outer as u64, key.inner as u64, key.step as u64, key.component as u64],
        ))
    }
}

/// Identity of a bundle, used to decide whether two solutions are coupled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseId {
    pub horizon: f64,
    pub steps: usize,
    pub d: usize,
    pub l: usize,
    pub outer: usize,
    pub inner: usize,
    pub seed: u64,
    pub generator_id: String,
}

/// Sampled increments: `dW[outer][inner][step][d]`, `dB[outer][step][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    grid: TimeGrid,
    d: usize,
    l: usize,
    outer: usize,
    inner: usize,
    seed: u64,
    generator_id: String,
    dw: Vec<f64>,
    db: Vec<f64>,
}

pub fn make_grid(horizon: f64, steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(horizon, steps)
}

/// Samples a bundle with the default generator.
pub fn sample_noise(
    grid: TimeGrid,
    d: usize,
    l: usize,
    outer: usize,
    inner: usize,
    seed: u64,
) -> Result<NoiseBundle> {
    sample_noise_with(grid, d, l, outer, inner, seed, &KeyedGaussian, &crate::Sequential)
}

/// Samples a bundle; every draw depends only on `(seed, key)`, so the result
/// is identical for any executor.
#[allow(clippy::too_many_arguments)]
pub fn sample_noise_with<S: IncrementSource, E: Executor>(
    grid: TimeGrid,
    d: usize,
    l: usize,
    outer: usize,
    inner: usize,
    seed: u64,
    source: &S,
    exec: &E,
) -> Result<NoiseBundle> {
    if d == 0 || l == 0 || outer == 0 || inner == 0 {
        return Err(Error::invalid(
            "noise",
            "counts",
            alloc::format!("d = {d}, l = {l}, outer = {outer}, inner = {inner} must all be ≥ 1"),
        ));
    }
    let n = grid.steps();
    let sd = grid.dt().sqrt();
    let chunks = exec.map(outer, |o| {
        let mut dw = Vec::with_capacity(inner * n * d);
        for j in 0..inner {
            for i in 0..n {
                for k in 0..d {
                    let key = DrawKey { stream: Stream::Forward, outer: o, inner: j, step: i, component: k };
                    dw.push(sd * source.standard_normal(seed, key));
                }
            }
        }
        let mut db = Vec::with_capacity(n * l);
        for i in 0..n {
            for k in 0..l {
                let key = DrawKey { stream: Stream::Backward, outer: o, inner: 0, step: i, component: k };
                db.push(sd * source.standard_normal(seed, key));
            }
        }
        (dw, db)
    });
    let mut dw = Vec::with_capacity(outer * inner * n * d);
    let mut db = Vec::with_capacity(outer * n * l);
    for (w, b) in chunks {
        dw.extend_from_slice(&w);
        db.extend_from_slice(&b);
    }
    Ok(NoiseBundle {
        grid,
        d,
        l,
        outer,
        inner,
        seed,
        generator_id: source.id().into(),
        dw,
        db,
    })
}

impl NoiseBundle {
    /// Assembles a bundle from raw arrays (e.g. loaded from a file).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        grid: TimeGrid,
        d: usize,
        l: usize,
        outer: usize,
        inner: usize,
        seed: u64,
        generator_id: String,
        dw: Vec<f64>,
        db: Vec<f64>,
    ) -> Result<Self> {
        let n = grid.steps();
        if d == 0 || l == 0 || outer == 0 || inner == 0 {
            return Err(Error::invalid("noise", "counts", "all counts must be ≥ 1"));
        }
        if dw.len() != outer * inner * n * d {
            return Err(Error::Dimension {
                module: "noise",
                context: "dW array",
                expected: outer * inner * n * d,
                actual: dw.len(),
            });
        }
        if db.len() != outer * n * l {
            return Err(Error::Dimension {
                module: "noise",
                context: "dB array",
                expected: outer * n * l,
                actual: db.len(),
            });
        }
        Ok(Self { grid, d, l, outer, inner, seed, generator_id, dw, db })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn l(&self) -> usize {
        self.l
    }
    pub fn outer(&self) -> usize {
        self.outer
    }
    pub fn inner(&self) -> usize {
        self.inner
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn generator_id(&self) -> &str {
        &self.generator_id
    }
    pub fn dw_all(&self) -> &[f64] {
        &self.dw
    }
    pub fn db_all(&self) -> &[f64] {
        &self.db
    }

    pub fn id(&self) -> NoiseId {
        NoiseId {
            horizon: self.grid.horizon(),
            steps: self.grid.steps(),
            d: self.d,
            l: self.l,
            outer: self.outer,
            inner: self.inner,
            seed: self.seed,
            generator_id: self.generator_id.clone(),
        }
    }

    /// `ΔW` on `[t_step, t_{step+1}]` for one path.
    #[inline]
    pub fn dw(&self, outer: usize, inner: usize, step: usize) -> &[f64] {
        let start = ((outer * self.inner + inner) * self.grid.steps() + step) * self.d;
        &self.dw[start..start + self.d]
    }

    /// All `ΔW` of one path, `steps × d`.
    pub fn dw_path(&self, outer: usize, inner: usize) -> &[f64] {
        let len = self.grid.steps() * self.d;
        let start = (outer * self.inner + inner) * len;
        &self.dw[start..start + len]
    }

    #[inline]
    pub fn db(&self, outer: usize, step: usize) -> &[f64] {
        let start = (outer * self.grid.steps() + step) * self.l;
        &self.db[start..start + self.l]
    }

    pub fn db_path(&self, outer: usize) -> &[f64] {
        let len = self.grid.steps() * self.l;
        &self.db[outer * len..(outer + 1) * len]
    }

    /// Node values of `W` for one path, `(steps + 1) × d`, starting at 0.
    pub fn w_path(&self, outer: usize, inner: usize) -> Vec<f64> {
        cumulate(self.dw_path(outer, inner), self.d)
    }

    /// Node values of `B` for one outer path, `(steps + 1) × l`, starting at 0.
    pub fn b_path(&self, outer: usize) -> Vec<f64> {
        cumulate(self.db_path(outer), self.l)
    }

    /// Sums consecutive increments in blocks of `factor`, giving the same
    /// paths observed on a grid with `steps / factor` steps.
    pub fn coarsen(&self, factor: usize) -> Result<NoiseBundle> {
        let n = self.grid.steps();
        if factor == 0 || !n.is_multiple_of(factor) {
            return Err(Error::invalid(
                "noise",
                "coarsening factor",
                alloc::format!("{factor} does not divide {n}"),
            ));
        }
        let coarse_n = n / factor;
        let grid = TimeGrid::new(self.grid.horizon(), coarse_n)?;
        let block = |src: &[f64], width: usize| -> Vec<f64> {
            let mut out = vec![0.0; src.len() / factor];
            for (i, chunk) in src.chunks(width * factor).enumerate() {
                for s in 0..factor {
                    for k in 0..width {
                        out[i * width + k] += chunk[s * width + k];
                    }
                }
            }
            out
        };
        Ok(NoiseBundle {
            grid,
            d: self.d,
            l: self.l,
            outer: self.outer,
            inner: self.inner,
            seed: self.seed,
            generator_id: alloc::format!("{}/coarsen{}", self.generator_id, factor),
            dw: block(&self.dw, self.d),
            db: block(&self.db, self.l),
        })
    }
}

fn cumulate(increments: &[f64], width: usize) -> Vec<f64> {
    let steps = increments.len() / width;
    let mut out = vec![0.0; (steps + 1) * width];
    for i in 0..steps {
        for k in 0..width {
            out[(i + 1) * width + k] = out[i * width + k] + increments[i * width + k];
        }
    }
    out
}

fn dot_sum(values: &[f64], increments: &[f64]) -> Result<f64> {
    if values.len() != increments.len() {
        return Err(Error::Dimension {
            module: "noise",
            context: "Itô sum",
            expected: increments.len(),
            actual: values.len(),
        });
    }
    Ok(values.iter().zip(increments).map(|(h, dx)| h * dx).sum())
}

/// `Σ_i h(t_i)·ΔW_i`, with `values[i]` the integrand at the LEFT node of
/// step `i` (laid out `steps × d` like the increments).
pub fn forward_ito_integral(values: &[f64], dw: &[f64]) -> Result<f64> {
    dot_sum(values, dw)
}

/// `Σ_i h(t_{i+1})·ΔB_i`, with `values[i]` the integrand at the RIGHT node of
/// step `i`.
pub fn backward_ito_integral(values: &[f64], db: &[f64]) -> Result<f64> {
    dot_sum(values, db)
}

/// Forward sum of a deterministic scalar integrand over steps `from..N`
/// (one component), evaluated at left nodes.
pub fn forward_ito_of<F: Fn(f64) -> f64>(grid: &TimeGrid, from: usize, h: F, dw: &[f64], width: usize) -> f64 {
    (from..grid.steps()).map(|i| h(grid.node(i)) * dw[i * width]).sum()
}

/// Backward sum of a deterministic scalar integrand over steps `from..N`
/// (one component), evaluated at right nodes.
pub fn backward_ito_of<F: Fn(f64) -> f64>(grid: &TimeGrid, from: usize, h: F, db: &[f64], width: usize) -> f64 {
    (from..grid.steps()).map(|i| h(grid.node(i + 1)) * db[i * width]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes() {
        let g = make_grid(1.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(make_grid(2.0, 1).unwrap().nodes(), vec![0.0, 2.0]);
        assert!(make_grid(1.0, 0).is_err());
        assert!(make_grid(0.0, 4).is_err());
        let g = make_grid(0.7, 3).unwrap();
        assert_eq!(g.node(3), 0.7);
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let g = make_grid(1.0, 16).unwrap();
        let a = sample_noise(g, 2, 1, 3, 5, 1).unwrap();
        let b = sample_noise(g, 2, 1, 3, 5, 1).unwrap();
        let c = sample_noise(g, 2, 1, 3, 5, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.dw_all(), c.dw_all());
        assert_ne!(a.db_all(), c.db_all());
    }

    #[test]
    fn increments_are_standardized() {
        let n = 1000;
        let g = make_grid(1.0, n).unwrap();
        let bundle = sample_noise(g, 1, 1, 1, 1, 9).unwrap();
        let sd = g.dt().sqrt();
        let mean = bundle.dw_all().iter().map(|x| x / sd).sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn telescoping_integrals() {
        let g = make_grid(1.0, 32).unwrap();
        let bundle = sample_noise(g, 1, 1, 2, 3, 4).unwrap();
        let ones = vec![1.0; 32];
        let zeros = vec![0.0; 32];
        let w = bundle.w_path(1, 2);
        let b = bundle.b_path(1);
        let fwd = forward_ito_integral(&ones, bundle.dw_path(1, 2)).unwrap();
        let bwd = backward_ito_integral(&ones, bundle.db_path(1)).unwrap();
        assert!((fwd - (w[32] - w[0])).abs() < 1e-12);
        assert!((bwd - (b[32] - b[0])).abs() < 1e-12);
        assert_eq!(forward_ito_integral(&zeros, bundle.dw_path(1, 2)).unwrap(), 0.0);
        assert_eq!(backward_ito_integral(&zeros, bundle.db_path(1)).unwrap(), 0.0);
        assert!(forward_ito_integral(&ones[..5], bundle.dw_path(0, 0)).is_err());
    }

    #[test]
    fn endpoint_conventions_differ() {
        let g = make_grid(1.0, 4).unwrap();
        let inc = [1.0, 1.0, 1.0, 1.0];
        // left nodes 0, .25, .5, .75 vs right nodes .25, .5, .75, 1
        assert_eq!(forward_ito_of(&g, 0, |t| t, &inc, 1), 1.5);
        assert_eq!(backward_ito_of(&g, 0, |t| t, &inc, 1), 2.5);
    }

    #[test]
    fn inner_paths_share_backward_noise() {
        let g = make_grid(1.0, 8).unwrap();
        let bundle = sample_noise(g, 1, 2, 2, 4, 3).unwrap();
        assert_eq!(bundle.db_all().len(), 2 * 8 * 2);
        assert_ne!(bundle.dw_path(0, 0), bundle.dw_path(0, 1));
        assert_ne!(bundle.db_path(0), bundle.db_path(1));
    }

    #[test]
    fn coarsening_preserves_node_values() {
        let g = make_grid(1.0, 16).unwrap();
        let fine = sample_noise(g, 1, 1, 2, 3, 5).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        assert_eq!(coarse.grid().steps(), 4);
        let wf = fine.w_path(1, 2);
        let wc = coarse.w_path(1, 2);
        for i in 0..=4 {
            assert!((wf[4 * i] - wc[i]).abs() < 1e-14);
        }
        assert!(fine.coarsen(3).is_err());
    }
}
