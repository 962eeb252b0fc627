//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::Command;
use std::time::{Duration, Instant};

use bdsde::RayonExecutor;
use bdsde_core::harness::{run_property_suite, CheckRecord, SuiteConfig, SuiteName, SuiteResult};

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite(name: SuiteName, exec: &RayonExecutor) -> (SuiteResult, Duration) {
    let config = SuiteConfig { suites: vec![name], ..SuiteConfig::default() };
    let start = Instant::now();
    let mut report = run_property_suite(&config, exec);
    (report.suites.remove(0), start.elapsed())
}

fn checks(result: &SuiteResult, keep: impl Fn(&CheckRecord) -> bool) -> Vec<&CheckRecord> {
    result.checks.iter().filter(|c| keep(c)).collect()
}

fn judge(result: &SuiteResult, selected: &[&CheckRecord], took: Duration, limit: Duration) -> Outcome {
    let failed: Vec<String> = selected
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} (value {:e}, threshold {:e})", c.name, c.value, c.threshold))
        .collect();
    let worst = selected.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let mut problems = failed;
    if let Some(e) = &result.error {
        problems.push(format!("suite error: {e}"));
    }
    if selected.is_empty() {
        problems.push("no checks ran".into());
    }
    if took > limit {
        problems.push(format!("runtime {took:.1?} over {limit:?}"));
    }
    Outcome {
        passed: problems.is_empty(),
        detail: if problems.is_empty() {
            format!("{} checks, smallest margin {worst:e}, {took:.2?}", selected.len())
        } else {
            problems.join("; ")
        },
    }
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("bdsde-acceptance-{}", std::process::id()));
    let run = |threads: &str| {
        let out = dir.join(format!("threads{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_bdsde"))
            .args(["--threads", threads, "--seed", "1", "--out"])
            .arg(&out)
            .arg("verify")
            .env_remove("BDSDE_OUT_DIR")
            .status()
            .expect("binary runs");
        (status.code(), std::fs::read(out.join("verify.json")))
    };
    let start = Instant::now();
    let (code1, one) = run("1");
    let (code8, eight) = run("8");
    let took = start.elapsed();
    let _ = std::fs::remove_dir_all(&dir);
    match (one, eight) {
        (Ok(a), Ok(b)) if a == b => Outcome {
            passed: true,
            detail: format!("{} identical bytes, exit codes {code1:?}/{code8:?}, {took:.1?}", a.len()),
        },
        (Ok(a), Ok(b)) => Outcome {
            passed: false,
            detail: format!("reports differ ({} vs {} bytes)", a.len(), b.len()),
        },
        (a, b) => Outcome {
            passed: false,
            detail: format!("missing report: {:?} / {:?}", a.err(), b.err()),
        },
    }
}

fn main() {
    let exec = RayonExecutor::new(0).expect("thread pool");
    let secs = Duration::from_secs;
    let mut outcomes: Vec<(&str, Outcome)> = Vec::new();

    let (oracles, took) = suite(SuiteName::Oracles, &exec);
    let exact = checks(&oracles, |c| {
        ["constant_", "pure_drift_", "backward_noise_"].iter().any(|p| c.name.starts_with(p))
            && (c.name.ends_with("_residual") || c.name.ends_with("_closed_form"))
    });
    outcomes.push(("1 exact oracles", judge(&oracles, &exact, took, secs(10))));
    let injected = checks(&oracles, |c| c.name.starts_with("nonunique_injection"));
    outcomes.push(("2 closed-form injection", judge(&oracles, &injected, took, secs(10))));

    let (envelope, took) = suite(SuiteName::Envelope, &exec);
    let all = checks(&envelope, |_| true);
    outcomes.push(("3 envelope laws", judge(&envelope, &all, took, secs(60))));

    let (ladder, took) = suite(SuiteName::Ladder, &exec);
    let gated = checks(&ladder, |c| c.name.contains("monotone") || c.name.contains("sandwich"));
    outcomes.push(("4 ladder monotonicity", judge(&ladder, &gated, took, secs(300))));

    let (comparison, took) = suite(SuiteName::Comparison, &exec);
    let all = checks(&comparison, |_| true);
    outcomes.push(("5 comparison suite", judge(&comparison, &all, took, secs(300))));

    let (noise, took) = suite(SuiteName::Noise, &exec);
    let all = checks(&noise, |_| true);
    outcomes.push(("6 noise statistics", judge(&noise, &all, took, secs(10))));

    outcomes.push(("7 determinism", determinism()));

    let mut failures = 0;
    for (name, outcome) in &outcomes {
        println!("{} {name}: {}", if outcome.passed { "PASS" } else { "FAIL" }, outcome.detail);
        failures += usize::from(!outcome.passed);
    }
    println!("{} of {} criteria passed", outcomes.len() - failures, outcomes.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
