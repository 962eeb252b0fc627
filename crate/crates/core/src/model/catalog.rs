//! Built-in problems with known solutions.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use super::functions::{Modulus, ScalarFunction, TerminalCondition, VectorFunction};
use super::problem::{Hypotheses, Hypothesis, Problem};
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

const NAMES: [&str; 6] = ["constant", "pure_drift", "backward_noise", "linear", "nonunique_sqrt", "heaviside"];

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

/// `Sgn(x) = 1` for `x ≥ 0`, `−1` for `x < 0`.
#[inline]
fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Catalog entry with horizon 1.
pub fn catalog_lookup(name: &str) -> Result<Problem> {
    catalog_problem(name, 1.0)
}

/// Catalog entry on `[0, horizon]`.
pub fn catalog_problem(name: &str, horizon: f64) -> Result<Problem> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::invalid("model", "horizon", alloc::format!("T = {horizon}")));
    }
    let lipschitz = Hypotheses::of(&[
        Hypothesis::H1,
        Hypothesis::H2,
        Hypothesis::H3,
        Hypothesis::H4,
        Hypothesis::H7,
        Hypothesis::H8,
    ]);
    let blank = |name: &str| Problem {
        name: name.to_string(),
        horizon,
        d: 1,
        l: 1,
        driver: ScalarFunction::constant(0.0),
        coefficient: VectorFunction::zero(1),
        terminal: TerminalCondition::constant(0.0),
        modulus: None,
        c: 1.0,
        hypotheses: lipschitz,
        bounds: None,
        k: None,
        aux: None,
    };
    let problem = match name {
        "constant" => Problem {
            terminal: TerminalCondition::constant(5.0),
            ..blank(name)
        },
        "pure_drift" => Problem {
            driver: ScalarFunction::constant(1.0),
            ..blank(name)
        },
        "backward_noise" => Problem {
            coefficient: VectorFunction::constant(vec![1.0]),
            ..blank(name)
        },
        "linear" => Problem {
            driver: ScalarFunction::new(1.0, "0.5*y + z", |_, y, z| 0.5 * y + z[0]).with_lipschitz(1.0),
            terminal: TerminalCondition::new("W_T", |p| p.w_terminal()[0])
                .with_second_moment_bound(horizon),
            ..blank(name)
        },
        "nonunique_sqrt" => nonunique_sqrt(horizon),
        "heaviside" => Problem {
            driver: ScalarFunction::new(1.0, "1{y>=0}", |_, y, _| if y >= 0.0 { 1.0 } else { 0.0 })
                .independent_of_z()
                .with_range(0.0, 1.0)
                .with_jumps(|_, y, _| y == 0.0),
            c: 0.0,
            hypotheses: Hypotheses::of(&[Hypothesis::H1, Hypothesis::H2, Hypothesis::H4, Hypothesis::H6, Hypothesis::H8]),
            ..blank(name)
        },
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(problem)
}

fn nonunique_sqrt(horizon: f64) -> Problem {
    // |4t Sgn(y)√|y|| ≤ 2T(1+|y|) and √(z⁺) ≤ (1+|z|)/2
    let growth = 2.0 * horizon + 0.5;
    let driver = ScalarFunction::new(
        growth,
        "4t*Sgn(y)*sqrt(|y|) + sqrt(z*1{z>=0}), Sgn(0) = 1",
        |t, y, z| 4.0 * t * sgn(y) * y.abs().sqrt() + z[0].max(0.0).sqrt(),
    );
    // (a + b)² ≤ 6a² + 1.2b² is the tightest split with α = 0.3
    let coefficient = VectorFunction::new(1, 6.0, 0.3, "1{y<0}*y + z/2", |_, y, z, out| {
        out[0] = if y < 0.0 { y } else { 0.0 } + 0.5 * z[0];
    });
    let bound_growth = (2.0 * horizon * horizon).max(2.0);
    let lower = ScalarFunction::new(bound_growth, "-2t^2 - 2|y| + z", |t, y, z| {
        -2.0 * t * t - 2.0 * y.abs() + z[0]
    })
    .with_lipschitz(2.0);
    let upper = ScalarFunction::new(bound_growth, "2t^2 + 2|y| + z", |t, y, z| {
        2.0 * t * t + 2.0 * y.abs() + z[0]
    })
    .with_lipschitz(2.0);
    let hypotheses = Hypotheses::of(&[
        Hypothesis::H1,
        Hypothesis::H2,
        Hypothesis::H4,
        Hypothesis::H5,
        Hypothesis::H6,
        Hypothesis::H9,
    ]);
    let mut problem = Problem {
        name: "nonunique_sqrt".to_string(),
        horizon,
        d: 1,
        l: 1,
        driver,
        coefficient,
        terminal: TerminalCondition::constant(0.0),
        modulus: Some(Modulus::new(1.5, "sqrt(x) + x", |x| x.sqrt() + x)),
        c: 2.0,
        hypotheses,
        bounds: None,
        k: None,
        aux: None,
    };
    let lo = problem.with_driver("nonunique_sqrt/lower", lower);
    let hi = problem.with_driver("nonunique_sqrt/upper", upper);
    problem.bounds = Some(Arc::new((lo, hi)));
    problem
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormValue {
    pub y: f64,
    pub z: Vec<f64>,
}

/// Exact solution values of catalog problems.
///
/// Parameters by name (the horizon defaults to 1 and may be appended):
///
/// | name             | params                 | solution                                   |
/// |------------------|------------------------|--------------------------------------------|
/// | `constant`       | `[c]` (default 5)      | `(c, 0)`                                   |
/// | `pure_drift`     | `[]`                   | `(T − t, 0)`                               |
/// | `backward_noise` | `[B_T − B_t]`          | `(B_T − B_t, 0)`                           |
/// | `linear`         | `[W_t]`                | `(e^{(T−t)/2}(W_t + T − t), e^{(T−t)/2})`  |
/// | `nonunique_sqrt` | `[c]`, `c ∈ [0, T]`    | `((c² − t²)⁺², 0)`                         |
/// | `heaviside`      | `[]`                   | `(T − t, 0)`                               |
pub fn closed_form(name: &str, params: &[f64], t: f64) -> Result<ClosedFormValue> {
    let bad = |reason: &str| Error::invalid("model", "closed-form parameters", alloc::format!("{name}: {reason}"));
    let horizon_at = |i: usize| params.get(i).copied().unwrap_or(1.0);
    let (y, z) = match name {
        "constant" => (params.first().copied().unwrap_or(5.0), 0.0),
        "pure_drift" | "heaviside" => (horizon_at(0) - t, 0.0),
        "backward_noise" => (*params.first().ok_or_else(|| bad("needs B_T − B_t"))?, 0.0),
        "linear" => {
            let w = *params.first().ok_or_else(|| bad("needs W_t"))?;
            let rem = horizon_at(1) - t;
            let growth = (0.5 * rem).exp();
            (growth * (w + rem), growth)
        }
        "nonunique_sqrt" => {
            let c = *params.first().ok_or_else(|| bad("needs c"))?;
            let horizon = horizon_at(1);
            if !(0.0..=horizon).contains(&c) {
                return Err(bad("c must lie in [0, T]"));
            }
            let base = (c * c - t * t).max(0.0);
            (base * base, 0.0)
        }
        other => return Err(Error::NoClosedForm(other.to_string())),
    };
    Ok(ClosedFormValue { y, z: vec![z] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::functions::PathView;

    #[test]
    fn every_name_resolves() {
        for name in catalog_names() {
            let p = catalog_lookup(name).unwrap();
            assert_eq!(&p.name, name);
        }
        assert!(matches!(catalog_lookup("nope"), Err(Error::UnknownCatalog(_))));
    }

    #[test]
    fn nonunique_driver_matches_formula() {
        let p = catalog_lookup("nonunique_sqrt").unwrap();
        // 4·0.5·Sgn(0.25)·0.5 + √0
        assert_eq!(p.driver.eval(0.5, 0.25, &[0.0]), 1.0);
        // Sgn(0) = 1 but √0 = 0, and negative z is clipped
        assert_eq!(p.driver.eval(0.7, 0.0, &[-3.0]), 0.0);
        assert_eq!(p.driver.eval(0.5, -0.25, &[4.0]), -1.0 + 2.0);
        assert_eq!(p.coefficient.eval(0.0, -2.0, &[1.0]), vec![-1.5]);
        assert_eq!(p.coefficient.eval(0.0, 2.0, &[1.0]), vec![0.5]);
        let (lo, hi) = p.bounds.as_deref().unwrap();
        assert_eq!(lo.driver.eval(0.5, -1.0, &[0.25]), -0.5 - 2.0 + 0.25);
        assert_eq!(hi.driver.eval(0.5, -1.0, &[0.25]), 0.5 + 2.0 + 0.25);
    }

    #[test]
    fn closed_forms() {
        let v = closed_form("nonunique_sqrt", &[1.0], 0.0).unwrap();
        assert_eq!((v.y, v.z[0]), (1.0, 0.0));
        let v = closed_form("nonunique_sqrt", &[0.5], 0.8).unwrap();
        assert_eq!((v.y, v.z[0]), (0.0, 0.0));
        let v = closed_form("nonunique_sqrt", &[1.0], 0.6).unwrap();
        assert!((v.y - 0.4096).abs() < 1e-15);
        assert!(closed_form("nonunique_sqrt", &[1.5], 0.0).is_err());
        assert!(matches!(closed_form("heat", &[], 0.0), Err(Error::NoClosedForm(_))));
        assert_eq!(closed_form("pure_drift", &[], 0.25).unwrap().y, 0.75);
    }

    /// dy/dt = −4t√y along the closed form, checked by central differences.
    #[test]
    fn nonunique_closed_form_solves_ode() {
        for &c in &[0.3, 0.7, 1.0] {
            for i in 1..50 {
                let t = i as f64 / 50.0;
                if (t - c).abs() < 0.03 {
                    continue;
                }
                let h = 1e-6;
                let yp = closed_form("nonunique_sqrt", &[c], t + h).unwrap().y;
                let ym = closed_form("nonunique_sqrt", &[c], t - h).unwrap().y;
                let y = closed_form("nonunique_sqrt", &[c], t).unwrap().y;
                let deriv = (yp - ym) / (2.0 * h);
                assert!((deriv + 4.0 * t * y.sqrt()).abs() < 1e-6, "c={c} t={t}");
            }
        }
    }

    #[test]
    fn lookups_are_deterministic() {
        let a = catalog_lookup("nonunique_sqrt").unwrap();
        let b = catalog_lookup("nonunique_sqrt").unwrap();
        for i in 0..200 {
            let t = i as f64 / 200.0;
            let y = -2.0 + 4.0 * ((i * 37) % 200) as f64 / 200.0;
            let z = [-1.0 + 2.0 * ((i * 11) % 200) as f64 / 200.0];
            assert_eq!(a.driver.eval(t, y, &z).to_bits(), b.driver.eval(t, y, &z).to_bits());
            assert_eq!(a.coefficient.eval(t, y, &z), b.coefficient.eval(t, y, &z));
        }
    }

    #[test]
    fn linear_terminal_reads_w_at_horizon() {
        let p = catalog_lookup("linear").unwrap();
        let w = [0.0, 0.4, -0.3];
        let b = [0.0, 0.0, 0.0];
        let view = PathView { w: &w, b: &b, d: 1, l: 1 };
        assert_eq!(p.terminal.eval(&view), -0.3);
    }
}
