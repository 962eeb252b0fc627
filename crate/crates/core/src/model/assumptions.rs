//! Sampling-based falsifiers for the hypotheses H1–H10.
//!
//! A passing report means no violation was found within the budget; the
//! hypotheses quantify over all reals, so nothing stronger is possible.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use super::problem::{Hypothesis, Problem};
use crate::error::{Error, Result};
use crate::rng::KeyedStream;
#[allow(unused_imports)]
use num_traits::Float;

/// Absolute slack for every inequality check.
pub const CHECK_TOLERANCE: f64 = 1e-9;

/// Displacement and jump size used by the H7 continuity probe.
const CONTINUITY_STEP: f64 = 1e-8;
const CONTINUITY_JUMP: f64 = 1e-2;

/// Bounded sampling region; `z` bounds apply to every component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleBox {
    pub t: (f64, f64),
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl SampleBox {
    pub fn new(t: (f64, f64), y: (f64, f64), z: (f64, f64)) -> Result<Self> {
        let b = Self { t, y, z };
        b.validate()?;
        Ok(b)
    }

    /// `[0, T] × [−r, r] × [−r, r]^d`.
    pub fn centered(horizon: f64, radius: f64) -> Self {
        Self {
            t: (0.0, horizon),
            y: (-radius, radius),
            z: (-radius, radius),
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("t", self.t), ("y", self.y), ("z", self.z)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(
                    "model",
                    "sample box",
                    alloc::format!("{name} range [{lo}, {hi}] must be bounded with positive width"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; negative for a violation.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub check: String,
    pub samples_tested: usize,
    pub violations: Vec<Violation>,
    pub passed: bool,
    /// Smallest `rhs − lhs` seen, violating or not.
    pub worst_margin: f64,
}

impl AssumptionReport {
    pub(crate) fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            samples_tested: 0,
            violations: Vec::new(),
            passed: true,
            worst_margin: f64::INFINITY,
        }
    }

    /// Records `lhs ≤ rhs + slack`.
    pub(crate) fn test(&mut self, point: &[f64], lhs: f64, rhs: f64, slack: f64) {
        self.samples_tested += 1;
        let margin = rhs - lhs;
        if margin < self.worst_margin || margin.is_nan() {
            self.worst_margin = margin;
        }
        if !(lhs <= rhs + slack) {
            self.violations.push(Violation {
                point: point.to_vec(),
                lhs,
                rhs,
                margin,
            });
            self.passed = false;
        }
    }
}

struct Sampler<'a> {
    rng: KeyedStream,
    bx: &'a SampleBox,
    d: usize,
}

impl Sampler<'_> {
    fn t(&mut self) -> f64 {
        self.rng.uniform(self.bx.t.0, self.bx.t.1)
    }
    fn y(&mut self) -> f64 {
        self.rng.uniform(self.bx.y.0, self.bx.y.1)
    }
    fn z(&mut self) -> Vec<f64> {
        (0..self.d).map(|_| self.rng.uniform(self.bx.z.0, self.bx.z.1)).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn pair_point(t: f64, y1: f64, z1: &[f64], y2: f64, z2: &[f64]) -> Vec<f64> {
    let mut p = vec![t, y1];
    p.extend_from_slice(z1);
    p.push(y2);
    p.extend_from_slice(z2);
    p
}

fn single_point(t: f64, y: f64, z: &[f64]) -> Vec<f64> {
    let mut p = vec![t, y];
    p.extend_from_slice(z);
    p
}

/// Samples `budget` points (or point pairs) in `bx` and tests the defining
/// inequality of `tag`:
///
/// * H1: `|g₁ − g₂|² ≤ C|Δy|² + α|Δz|²` with the constants declared on `g`,
/// * H2 / H4: `g(t, y, z)` resp. `f(t, 0, 0)` finite,
/// * H3: `|Δf| ≤ C(|Δy| + |Δz|)`,
/// * H5: `|f(t, y, z₁) − f(t, y, z₂)| ≤ φ(|Δz|)`,
/// * H6: `f(t, y₁, z) − f(t, y₂, z) ≥ −C(y₁ − y₂)` for `y₁ ≥ y₂`,
/// * H7: no jump above 1e-2 across a 1e-8 displacement in `y` or `z`,
/// * H8 / H8′: `|f| ≤ C_f(1 + |y| + |z|)` resp. `C_f(K_t + |y| + |z|)`,
/// * H9: `f₁ ≤ f ≤ f₂`,
/// * H10: `|Δf| ≤ C|Δy| + φ(|Δz|)`.
pub fn check_assumption(
    problem: &Problem,
    tag: Hypothesis,
    budget: usize,
    bx: &SampleBox,
    seed: u64,
) -> Result<AssumptionReport> {
    if budget == 0 {
        return Err(Error::invalid("model", "budget", "at least one sample is required"));
    }
    bx.validate()?;
    let phi = match tag {
        Hypothesis::H5 | Hypothesis::H10 => Some(problem.modulus.as_ref().ok_or(Error::MissingData {
            tag,
            missing: "a modulus φ",
        })?),
        _ => None,
    };
    let bounds = match tag {
        Hypothesis::H9 => Some(problem.bounds.as_deref().ok_or(Error::MissingData {
            tag,
            missing: "a bounding pair (f₁, f₂)",
        })?),
        _ => None,
    };
    if tag == Hypothesis::H8Prime && problem.k.is_none() {
        return Err(Error::MissingData {
            tag,
            missing: "a process K_t",
        });
    }

    let f = &problem.driver;
    let g = &problem.coefficient;
    let c = problem.c;
    let mut s = Sampler {
        rng: KeyedStream::new(seed, tag as u64),
        bx,
        d: problem.d,
    };
    let mut report = AssumptionReport::new(tag.as_str().to_string());
    let tol = CHECK_TOLERANCE;
    let mut g1 = vec![0.0; problem.l];
    let mut g2 = vec![0.0; problem.l];

    for _ in 0..budget {
        let t = s.t();
        match tag {
            Hypothesis::H1 => {
                let (y1, z1, y2, z2) = (s.y(), s.z(), s.y(), s.z());
                g.eval_into(t, y1, &z1, &mut g1);
                g.eval_into(t, y2, &z2, &mut g2);
                let lhs = dist(&g1, &g2).powi(2);
                let dy = y1 - y2;
                let rhs = g.lipschitz_y * dy * dy + g.lipschitz_z_sq * dist(&z1, &z2).powi(2);
                report.test(&pair_point(t, y1, &z1, y2, &z2), lhs, rhs, tol);
            }
            Hypothesis::H2 => {
                let (y, z) = (s.y(), s.z());
                g.eval_into(t, y, &z, &mut g1);
                let lhs = norm(&g1).powi(2);
                report.test(&single_point(t, y, &z), if lhs.is_finite() { 0.0 } else { f64::INFINITY }, 0.0, tol);
            }
            Hypothesis::H3 => {
                let (y1, z1, y2, z2) = (s.y(), s.z(), s.y(), s.z());
                let lhs = (f.eval(t, y1, &z1) - f.eval(t, y2, &z2)).abs();
                let rhs = c * ((y1 - y2).abs() + dist(&z1, &z2));
                report.test(&pair_point(t, y1, &z1, y2, &z2), lhs, rhs, tol);
            }
            Hypothesis::H4 => {
                let zero = vec![0.0; problem.d];
                let v = f.eval(t, 0.0, &zero);
                report.test(&[t], if v.is_finite() { 0.0 } else { f64::INFINITY }, 0.0, tol);
            }
            Hypothesis::H5 => {
                let (y, z1, z2) = (s.y(), s.z(), s.z());
                let lhs = (f.eval(t, y, &z1) - f.eval(t, y, &z2)).abs();
                let rhs = phi.map_or(0.0, |p| p.eval(dist(&z1, &z2)));
                report.test(&pair_point(t, y, &z1, y, &z2), lhs, rhs, tol);
            }
            Hypothesis::H6 => {
                let (a, b, z) = (s.y(), s.y(), s.z());
                let (y1, y2) = if a >= b { (a, b) } else { (b, a) };
                // f(y₁) − f(y₂) ≥ −C(y₁ − y₂)  ⇔  f(y₂) − f(y₁) ≤ C(y₁ − y₂)
                let lhs = f.eval(t, y2, &z) - f.eval(t, y1, &z);
                report.test(&pair_point(t, y1, &z, y2, &z), lhs, c * (y1 - y2), tol);
            }
            Hypothesis::H7 => {
                let (y, z) = (s.y(), s.z());
                let base = f.eval(t, y, &z);
                let mut worst = (f.eval(t, y + CONTINUITY_STEP, &z) - base)
                    .abs()
                    .max((f.eval(t, y - CONTINUITY_STEP, &z) - base).abs());
                let mut zs = z.clone();
                for k in 0..problem.d {
                    for step in [CONTINUITY_STEP, -CONTINUITY_STEP] {
                        zs[k] = z[k] + step;
                        worst = worst.max((f.eval(t, y, &zs) - base).abs());
                    }
                    zs[k] = z[k];
                }
                report.test(&single_point(t, y, &z), worst, CONTINUITY_JUMP, 0.0);
            }
            Hypothesis::H8 | Hypothesis::H8Prime => {
                let (y, z) = (s.y(), s.z());
                let k = if tag == Hypothesis::H8 { 1.0 } else { problem.k_at(t) };
                let lhs = f.eval(t, y, &z).abs();
                let rhs = f.growth_constant * (k + y.abs() + norm(&z));
                report.test(&single_point(t, y, &z), lhs, rhs, tol);
            }
            Hypothesis::H9 => {
                let (y, z) = (s.y(), s.z());
                let (lo, hi) = bounds.expect("checked above");
                let v = f.eval(t, y, &z);
                let l = lo.driver.eval(t, y, &z);
                let h = hi.driver.eval(t, y, &z);
                let p = single_point(t, y, &z);
                // report whichever side is tighter
                if v - l < h - v {
                    report.test(&p, l, v, tol);
                } else {
                    report.test(&p, v, h, tol);
                }
            }
            Hypothesis::H10 => {
                let (y1, z1, y2, z2) = (s.y(), s.z(), s.y(), s.z());
                let lhs = (f.eval(t, y1, &z1) - f.eval(t, y2, &z2)).abs();
                let rhs = c * (y1 - y2).abs() + phi.map_or(0.0, |p| p.eval(dist(&z1, &z2)));
                report.test(&pair_point(t, y1, &z1, y2, &z2), lhs, rhs, tol);
            }
        }
    }
    Ok(report)
}
