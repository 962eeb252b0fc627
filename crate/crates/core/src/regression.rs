//! Least-squares conditional expectations over an inner ensemble.
//!
//! Features are tensor Hermite polynomials `He_k(w/s)` of total degree at most
//! `degree`, where `s` is a scale (typically `√t`) that keeps the Gram matrix
//! well conditioned. The span equals that of the monomials of the same degree.
//! The intercept is handled by centring, so constant targets are reproduced
//! exactly.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Relative ridge added when the Gram matrix is numerically singular.
pub const RIDGE: f64 = 1e-12;

/// Exponent vectors of total degree `1..=degree` in `d` variables, graded.
pub fn multi_indices(d: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 1..=degree {
        let mut current = vec![0; d];
        compositions(total, 0, &mut current, &mut out);
    }
    out
}

fn compositions(left: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == current.len() {
        current[pos] = left;
        out.push(current.clone());
        return;
    }
    for k in (0..=left).rev() {
        current[pos] = k;
        compositions(left - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Probabilists' Hermite polynomials `He_0..=He_degree` at `x`.
pub fn hermite(x: f64, degree: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = x;
    }
    for k in 2..=degree {
        out[k] = x * out[k - 1] - (k - 1) as f64 * out[k - 2];
    }
}

/// Row-major design matrix without the intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    rows: usize,
    cols: usize,
    x: Vec<f64>,
}

impl Design {
    /// Hermite features of `points` (`rows × d`, row-major) divided by `scale`.
    /// A zero scale or degree yields the intercept-only design.
    pub fn hermite(points: &[f64], d: usize, degree: usize, scale: f64) -> Self {
        let rows = points.len() / d.max(1);
        if degree == 0 || !(scale > 0.0) {
            return Self::intercept(rows);
        }
        let indices = multi_indices(d, degree);
        let cols = indices.len();
        let mut x = Vec::with_capacity(rows * cols);
        let mut table = vec![0.0; d * (degree + 1)];
        for r in 0..rows {
            for k in 0..d {
                hermite(points[r * d + k] / scale, degree, &mut table[k * (degree + 1)..(k + 1) * (degree + 1)]);
            }
            for alpha in &indices {
                let mut v = 1.0;
                for (k, &a) in alpha.iter().enumerate() {
                    v *= table[k * (degree + 1) + a];
                }
                x.push(v);
            }
        }
        Self { rows, cols, x }
    }

    pub fn intercept(rows: usize) -> Self {
        Self { rows, cols: 0, x: Vec::new() }
    }

    pub fn from_rows(rows: usize, cols: usize, x: Vec<f64>) -> Result<Self> {
        if x.len() != rows * cols {
            return Err(Error::Dimension {
                module: "regression",
                context: "design matrix",
                expected: rows * cols,
                actual: x.len(),
            });
        }
        Ok(Self { rows, cols, x })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Parameter count including the intercept.
    pub fn parameters(&self) -> usize {
        self.cols + 1
    }
}

/// Factorized centred least-squares problem, reusable across targets.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    rows: usize,
    cols: usize,
    centred: Vec<f64>,
    chol: Vec<f64>,
    ridge_used: bool,
}

/// Fitted values and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub fitted: Vec<f64>,
    /// `σ̂·√(p/M)`, the typical error of a fitted value.
    pub standard_error: f64,
}

impl LeastSquares {
    pub fn new(design: &Design) -> Result<Self> {
        let (rows, cols) = (design.rows, design.cols);
        if rows < cols + 1 || rows == 0 {
            return Err(Error::invalid(
                "regression",
                "sample count",
                alloc::format!("{rows} samples for {} parameters", cols + 1),
            ));
        }
        let mut centred = design.x.clone();
        for c in 0..cols {
            let mean = (0..rows).map(|r| design.x[r * cols + c]).sum::<f64>() / rows as f64;
            for r in 0..rows {
                centred[r * cols + c] -= mean;
            }
        }
        let mut gram = vec![0.0; cols * cols];
        for r in 0..rows {
            let row = &centred[r * cols..(r + 1) * cols];
            for a in 0..cols {
                for b in 0..=a {
                    gram[a * cols + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..cols {
            for b in 0..a {
                gram[b * cols + a] = gram[a * cols + b];
            }
        }
        let (chol, ridge_used) = match cholesky(&gram, cols, true) {
            Some(l) => (l, false),
            None => {
                let scale = (0..cols).map(|a| gram[a * cols + a]).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                let mut damped = gram.clone();
                for a in 0..cols {
                    damped[a * cols + a] += RIDGE * scale;
                }
                let l = cholesky(&damped, cols, false).ok_or_else(|| {
                    Error::invalid("regression", "design matrix", "singular even after ridge damping")
                })?;
                (l, true)
            }
        };
        Ok(Self {
            rows,
            cols,
            centred,
            chol,
            ridge_used,
        })
    }

    pub fn ridge_used(&self) -> bool {
        self.ridge_used
    }

    pub fn parameters(&self) -> usize {
        self.cols + 1
    }

    /// Projects `targets` onto the feature span.
    pub fn fit(&self, targets: &[f64]) -> Result<Fit> {
        if targets.len() != self.rows {
            return Err(Error::Dimension {
                module: "regression",
                context: "targets",
                expected: self.rows,
                actual: targets.len(),
            });
        }
        let first = targets[0];
        if targets.iter().all(|&v| v == first) {
            return Ok(Fit {
                fitted: vec![first; self.rows],
                standard_error: 0.0,
            });
        }
        let mean = targets.iter().sum::<f64>() / self.rows as f64;
        let cols = self.cols;
        let mut rhs = vec![0.0; cols];
        for r in 0..self.rows {
            let dev = targets[r] - mean;
            for c in 0..cols {
                rhs[c] += self.centred[r * cols + c] * dev;
            }
        }
        let beta = cholesky_solve(&self.chol, cols, rhs);
        let mut fitted = Vec::with_capacity(self.rows);
        let mut ss = 0.0;
        for r in 0..self.rows {
            let row = &self.centred[r * cols..(r + 1) * cols];
            let v = mean + row.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>();
            ss += (targets[r] - v) * (targets[r] - v);
            fitted.push(v);
        }
        let p = self.parameters();
        let dof = (self.rows - p).max(1) as f64;
        let standard_error = (ss / dof).sqrt() * (p as f64 / self.rows as f64).sqrt();
        Ok(Fit { fitted, standard_error })
    }
}

/// One-shot projection of `targets` onto the span of `features`.
/// Returns the fitted values and whether ridge damping was needed.
pub fn conditional_expectation(features: &Design, targets: &[f64]) -> Result<(Vec<f64>, bool)> {
    let ls = LeastSquares::new(features)?;
    Ok((ls.fit(targets)?.fitted, ls.ridge_used()))
}

fn cholesky(a: &[f64], n: usize, strict: bool) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                let floor = if strict { 1e-13 * max_diag } else { 0.0 };
                if !(s > floor) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, mut b: Vec<f64>) -> Vec<f64> {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::KeyedStream;

    fn gaussian(m: usize, sd: f64, tag: u64) -> Vec<f64> {
        let mut rng = KeyedStream::new(3, tag);
        (0..m).map(|_| sd * rng.normal()).collect()
    }

    #[test]
    fn index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 3);
        assert_eq!(multi_indices(2, 3).len(), 9);
        assert_eq!(multi_indices(3, 2).len(), 9);
        assert!(multi_indices(2, 0).is_empty());
    }

    #[test]
    fn hermite_values() {
        let mut h = [0.0; 4];
        hermite(2.0, 3, &mut h);
        assert_eq!(h, [1.0, 2.0, 3.0, 2.0]);
    }

    #[test]
    fn constant_target_is_exact() {
        let w = gaussian(256, 0.5, 1);
        let design = Design::hermite(&w, 1, 3, 0.5);
        let (fit, ridge) = conditional_expectation(&design, &[0.1; 256]).unwrap();
        assert!(!ridge);
        assert!(fit.iter().all(|&v| v == 0.1));
    }

    #[test]
    fn polynomial_target_is_reproduced() {
        let w = gaussian(300, 0.7, 2);
        let design = Design::hermite(&w, 1, 3, 0.7);
        let targets: Vec<f64> = w.iter().map(|x| 1.0 - 2.0 * x + 0.5 * x * x * x).collect();
        let (fit, _) = conditional_expectation(&design, &targets).unwrap();
        for (a, b) in fit.iter().zip(&targets) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    /// E[W_{t+h} | W_t] = W_t: the fit error stays within five standard errors.
    #[test]
    fn martingale_target() {
        let (t, h, m) = (0.5, 0.1, 4000);
        let w = gaussian(m, t.sqrt(), 4);
        let step = gaussian(m, h.sqrt(), 5);
        let next: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + b).collect();
        let design = Design::hermite(&w, 1, 3, t.sqrt());
        let fit = LeastSquares::new(&design).unwrap().fit(&next).unwrap();
        let se = h.sqrt() * (4.0 / m as f64).sqrt();
        let rms = (fit.fitted.iter().zip(&w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / m as f64).sqrt();
        assert!(rms <= 5.0 * se, "rms {rms} se {se}");
        assert!((fit.standard_error - se).abs() < 0.2 * se);
    }

    #[test]
    fn two_dimensional_features() {
        let a = gaussian(500, 1.0, 6);
        let b = gaussian(500, 1.0, 7);
        let pts: Vec<f64> = a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect();
        let design = Design::hermite(&pts, 2, 2, 1.0);
        assert_eq!(design.parameters(), 6);
        let targets: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y + y).collect();
        let (fit, _) = conditional_expectation(&design, &targets).unwrap();
        for (f, t) in fit.iter().zip(&targets) {
            assert!((f - t).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicated_points_trigger_ridge() {
        let mut w = vec![0.3; 50];
        w.extend(vec![-0.2; 50]);
        let design = Design::hermite(&w, 1, 3, 1.0);
        let targets: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        let (fit, ridge) = conditional_expectation(&design, &targets).unwrap();
        assert!(ridge);
        for (f, t) in fit.iter().zip(&targets) {
            assert!((f - t).abs() < 1e-6);
        }
    }

    #[test]
    fn too_few_samples() {
        let design = Design::hermite(&[0.1, 0.2, 0.3], 1, 3, 1.0);
        assert!(LeastSquares::new(&design).is_err());
    }
}
