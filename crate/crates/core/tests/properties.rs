use bdsde_core::harness::{compare, Budget, BudgetModel};
use bdsde_core::model::{catalog_lookup, ScalarFunction, TerminalCondition};
use bdsde_core::noise::{make_grid, sample_noise, NoiseBundle};
use bdsde_core::regression::{Design, LeastSquares};
use bdsde_core::regularize::{brute_force_envelope, envelope, EnvelopeKind, EnvelopeSpec};
use bdsde_core::solver::{solve, SchemeConfig};
use proptest::prelude::*;

fn base(which: usize) -> ScalarFunction {
    match which {
        0 => catalog_lookup("heaviside").unwrap().driver,
        1 => catalog_lookup("nonunique_sqrt").unwrap().driver,
        2 => ScalarFunction::new(1.0, "sgn(z) - y/2", |_, y, z| if z[0] >= 0.0 { 1.0 } else { -1.0 } - 0.5 * y),
        _ => catalog_lookup("linear").unwrap().driver,
    }
}

fn noise(seed: u64) -> NoiseBundle {
    sample_noise(make_grid(1.0, 8).unwrap(), 1, 1, 2, 64, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn duality_is_exact(which in 0usize..4, t in 0.0..1.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64, extra in 0.5..6.0f64) {
        let f = base(which);
        let n = f.growth_constant + extra;
        let sup = EnvelopeSpec::new(f.clone(), n, EnvelopeKind::SupFull).unwrap();
        let inf = EnvelopeSpec::new(f.negated(), n, EnvelopeKind::InfFull).unwrap();
        let a = envelope(&sup, t, y, &[z], 0.05).unwrap();
        let b = envelope(&inf, t, y, &[z], 0.05).unwrap();
        prop_assert_eq!(a.to_bits(), (-b).to_bits());
    }

    #[test]
    fn pruned_search_matches_exhaustive(which in 0usize..4, t in 0.0..1.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64, extra in 0.5..6.0f64, sup in any::<bool>()) {
        let f = base(which);
        let kind = if sup { EnvelopeKind::SupFull } else { EnvelopeKind::InfFull };
        let spec = EnvelopeSpec::new(f.clone(), f.growth_constant + extra, kind).unwrap();
        let a = envelope(&spec, t, y, &[z], 0.04).unwrap();
        let b = brute_force_envelope(&spec, t, y, &[z], 0.04).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn envelopes_bracket_and_increase(which in 0usize..4, t in 0.0..1.0f64, y in -2.0..2.0f64, z in -2.0..2.0f64, extra in 0.5..6.0f64) {
        let f = base(which);
        let n = f.growth_constant + extra;
        let r = 0.05;
        let value = f.eval(t, y, &[z]);
        let lo = EnvelopeSpec::new(f.clone(), n, EnvelopeKind::InfFull).unwrap();
        let lo_next = lo.reindexed(n + 1.0).unwrap();
        let hi = EnvelopeSpec::new(f.clone(), n, EnvelopeKind::SupFull).unwrap();
        let a = envelope(&lo, t, y, &[z], r).unwrap();
        let b = envelope(&lo_next, t, y, &[z], r).unwrap();
        let c = envelope(&hi, t, y, &[z], r).unwrap();
        prop_assert!(a <= b);
        prop_assert!(b <= value);
        prop_assert!(value <= c);
    }

    #[test]
    fn comparison_verdict_is_scale_invariant(seed in 1u64..500, shift in -0.2..0.2f64, power in -3i32..4) {
        let n = noise(seed);
        let p = catalog_lookup("linear").unwrap();
        let q = p.with_terminal("shifted", TerminalCondition::new("W_T + s", move |v| v.w_terminal()[0] + shift));
        let a = solve(&p, &n, &SchemeConfig::default()).unwrap();
        let b = solve(&q, &n, &SchemeConfig::default()).unwrap();
        let budget = Budget::Model(BudgetModel { floor: 0.01, ..BudgetModel::default() });
        let k = 2f64.powi(power);
        let plain = compare(&a, &b, &budget).unwrap();
        let scaled = compare(&a.scaled(k), &b.scaled(k), &budget.scaled(k)).unwrap();
        prop_assert_eq!(plain.verdict, scaled.verdict);
        prop_assert_eq!(plain.violation_fraction, scaled.violation_fraction);
    }

    #[test]
    fn solution_is_affine_in_a_linear_terminal(seed in 1u64..500, a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let n = noise(seed);
        let p = catalog_lookup("constant").unwrap();
        let unit = p.with_terminal("w", TerminalCondition::new("W_T", |v| v.w_terminal()[0]));
        let mixed = p.with_terminal("aw+b", TerminalCondition::new("a W_T + b", move |v| a * v.w_terminal()[0] + b));
        let cfg = SchemeConfig::default();
        let y1 = solve(&unit, &n, &cfg).unwrap();
        let y2 = solve(&mixed, &n, &cfg).unwrap();
        for (u, v) in y1.y_all().iter().zip(y2.y_all()) {
            prop_assert!((a * u + b - v).abs() <= 1e-9 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn regression_reproduces_polynomials(c in prop::collection::vec(-2.0..2.0f64, 4), seed in 1u64..500) {
        let n = noise(seed);
        let points: Vec<f64> = (0..n.inner()).map(|j| n.w_path(0, j)[4]).collect();
        let design = Design::hermite(&points, 1, 3, 0.5f64.sqrt());
        let ls = LeastSquares::new(&design).unwrap();
        let targets: Vec<f64> = points.iter().map(|x| c[0] + c[1] * x + c[2] * x * x + c[3] * x * x * x).collect();
        let fit = ls.fit(&targets).unwrap();
        for (f, t) in fit.fitted.iter().zip(&targets) {
            prop_assert!((f - t).abs() <= 1e-8 * (1.0 + t.abs()));
        }
    }

    #[test]
    fn noise_is_a_function_of_the_seed(seed in any::<u64>()) {
        prop_assert_eq!(noise(seed), noise(seed));
        let fine = sample_noise(make_grid(1.0, 8).unwrap(), 1, 1, 1, 4, seed).unwrap();
        let coarse = fine.coarsen(4).unwrap();
        let total: f64 = fine.dw_path(0, 2).iter().sum();
        prop_assert!((coarse.dw_path(0, 2).iter().sum::<f64>() - total).abs() < 1e-12);
    }
}
