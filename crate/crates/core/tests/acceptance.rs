//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! Each criterion runs its experiment with default parameters, requires every check of that
//! experiment to pass, and re-applies the pinned tolerances to the returned table. Every
//! experiment is run twice; criterion 10 compares the two CSVs byte for byte.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use magflow::harness::{registry, run_experiment, ExperimentSpec, Outcome, ResultTable};

struct Run {
    outcome: Outcome,
    elapsed: Duration,
    identical: bool,
}

fn run_twice(name: &str) -> Run {
    let spec = ExperimentSpec::defaults(name).expect("registered");
    let start = Instant::now();
    let outcome = run_experiment(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
    let elapsed = start.elapsed();
    let again = run_experiment(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
    let identical = outcome.to_csv().unwrap() == again.to_csv().unwrap();
    Run { outcome, elapsed, identical }
}

fn footer(t: &ResultTable, key: &str) -> f64 {
    t.footer.iter().find(|(k, _)| k == key).map(|(_, v)| v.parse().unwrap()).unwrap_or(f64::NAN)
}

fn col(t: &ResultTable, name: &str) -> Vec<f64> {
    t.column(name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn max(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn fixed_orders(t: &ResultTable) -> (bool, String) {
    let (sx, sxi) = (footer(t, "slope_x"), footer(t, "slope_xi"));
    (
        within(sx, 1.7, 2.3) && within(sxi, 0.7, 1.3),
        format!("slope_x {sx:.3} in [1.7, 2.3], slope_xi {sxi:.3} in [0.7, 1.3]"),
    )
}

fn general_orders(t: &ResultTable) -> (bool, String) {
    let (su, sth) = (footer(t, "slope_u"), footer(t, "slope_theta"));
    (
        within(su, 1.6, 2.4) && within(sth, 0.6, 1.4),
        format!("slope_u {su:.3} in [1.6, 2.4], slope_theta {sth:.3} in [0.6, 1.4]"),
    )
}

fn oracle(t: &ResultTable) -> (bool, String) {
    let e = max(col(t, "err_x").into_iter().chain(col(t, "err_xi")));
    (e <= 1e-8, format!("sup error {e:.2e} <= 1e-8"))
}

fn conservation(t: &ResultTable) -> (bool, String) {
    let system = col(t, "system");
    let det = max(col(t, "det_minus_one").into_iter().zip(&system).filter(|(_, s)| **s != 1.0).map(|(d, _)| d));
    let drift = max(col(t, "norm_drift"));
    (det <= 1e-6 && drift <= 1e-10, format!("|det - 1| {det:.2e} <= 1e-6, norm drift {drift:.2e} <= 1e-10"))
}

fn symbol_bounds(t: &ResultTable) -> (bool, String) {
    let mut excess = f64::NEG_INFINITY;
    let mut gap = 0.0f64;
    for s in ["p", "q"] {
        let (sup, sharp, bound) =
            (col(t, &format!("sup_{s}")), col(t, &format!("sharp_{s}")), col(t, &format!("bound_{s}")));
        for i in 0..sup.len() {
            excess = excess.max(sup[i] - bound[i]);
            gap = gap.max((sup[i] - sharp[i]).abs());
        }
    }
    (excess <= 0.0 && gap <= 1e-3, format!("max(sup - bound) {excess:.3}, max |sup - sharp| {gap:.2e} <= 1e-3"))
}

fn shell_cases(t: &ResultTable) -> (bool, String) {
    let c = max(col(t, "constant_rel_err"));
    let o = max(col(t, "odd_norm"));
    (c <= 1e-6 && o <= 1e-10, format!("t^2/2 relative error {c:.2e} <= 1e-6, odd case {o:.2e} <= 1e-10"))
}

fn transfer(t: &ResultTable) -> (bool, String) {
    let rel = col(t, "relative")[0];
    let zero = col(t, "lhs_norm")[1].max(col(t, "rhs_norm")[1]);
    (rel <= 1e-4 && zero <= 1e-10, format!("relative {rel:.2e} <= 1e-4, theta-independent {zero:.2e} <= 1e-10"))
}

fn oscillatory(t: &ResultTable) -> (bool, String) {
    let gamma = 2f64.sqrt(); // ξ = (0.6, 0, 0.8)
    let (mut excess, mut equality) = (f64::NEG_INFINITY, 0.0f64);
    for r in t.rows.iter().filter(|r| r[0] == 0.0) {
        let (mode, eps, value, reference) = (r[1], r[2], r[4], r[5]);
        let bound = 2.0 * eps * gamma / mode.abs();
        excess = excess.max(value - bound);
        if (reference - bound).abs() <= 1e-14 * bound.max(1.0) + 1e-15 {
            equality = equality.max((value - bound).abs());
        }
    }
    let slope = footer(t, "slope_inhomogeneous");
    let ok = excess <= 1e-12 && equality <= 1e-12 && within(slope, 0.7, 1.3);
    (ok, format!("bound excess {excess:.1e}, equality gap {equality:.1e} <= 1e-12, slope {slope:.3} in [0.7, 1.3]"))
}

fn preparedness(t: &ResultTable) -> (bool, String) {
    let res = max(col(t, "example_residual"));
    let (ill, prep) = (footer(t, "slope_ill"), footer(t, "slope_prepared"));
    let ok = res <= 1e-10 && within(ill, -1.3, -0.7) && within(prep, -0.3, 0.3);
    (
        ok,
        format!(
            "residual {res:.2e} <= 1e-10, ill slope {ill:.3} in [-1.3, -0.7], prepared slope {prep:.3} in [-0.3, 0.3]"
        ),
    )
}

type Verdict = fn(&ResultTable) -> (bool, String);

fn main() -> ExitCode {
    let criteria: [(u32, &str, Verdict, u64); 9] = [
        (1, "converge-fixed", fixed_orders, 120),
        (2, "converge-general", general_orders, 300),
        (3, "oracle-homogeneous", oracle, 10),
        (4, "volume", conservation, 30),
        (5, "symbols", symbol_bounds, 10),
        (6, "shell", shell_cases, 10),
        (7, "transfer-identity", transfer, 60),
        (8, "osc-scaling", oscillatory, 120),
        (9, "prepared-vs-ill", preparedness, 120),
    ];
    let runs: BTreeMap<&str, Run> = registry().iter().map(|e| (e.name, run_twice(e.name))).collect();
    let mut failed = 0;
    for (id, name, verdict, budget) in criteria {
        let run = &runs[name];
        let (ok, detail) = verdict(&run.outcome.table);
        let failing: Vec<&str> = run.outcome.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        let in_time = run.elapsed <= Duration::from_secs(budget);
        let pass = ok && failing.is_empty() && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {id:>2} {} {name}: {detail}; checks failing {failing:?}; {:.2}s of {budget}s",
            if pass { "PASS" } else { "FAIL" },
            run.elapsed.as_secs_f64()
        );
    }
    let differing: Vec<&str> = runs.iter().filter(|(_, r)| !r.identical).map(|(n, _)| *n).collect();
    let pass = differing.is_empty();
    failed += usize::from(!pass);
    println!(
        "criterion 10 {} determinism: {} experiments run twice, differing {differing:?}",
        if pass { "PASS" } else { "FAIL" },
        runs.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
