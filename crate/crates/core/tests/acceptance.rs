//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;
use recallcor::estimator::EstimatorSpec;
use recallcor::sensitivity::{
    bootstrap_ci, r_factor, sensitivity_scan, BootstrapOptions, GridSpec, RFactorOptions, VariedParameter,
};
use recallcor::simulation::{run_study, standard_scenarios, NullDesign, NullDraws, Preset, STUDY_METHODS};
use recallcor::{
    build_strata, check_ordering_data, load_csv, ml_marginal_cor, stratified_marginal_cor, BiasDirection,
    CsvSchema, Dataset, Method, OutcomeModel, RecallBias, ScoreKind, StratumTable,
};

/// Published mean `log ψ̂` at n = 2000: true value, then crude, ML,
/// propensity-stratified and prognostic-stratified.
const REFERENCE: [(Preset, [[f64; 5]; 3]); 2] = [
    (
        Preset::new(false, false),
        [
            [0.000, 0.591, -0.001, 0.115, 0.040],
            [0.357, 0.919, 0.360, 0.477, 0.400],
            [0.706, 1.226, 0.704, 0.827, 0.740],
        ],
    ),
    (
        Preset::new(true, true),
        [
            [0.000, 0.262, -0.056, -0.168, -0.003],
            [0.310, 0.536, 0.250, 0.151, 0.297],
            [0.607, 0.792, 0.543, 0.467, 0.584],
        ],
    ),
];

type Outcome = Result<String, String>;

fn simulation_means() -> Outcome {
    let (n_reps, tol) = (2000, 0.05);
    let presets: Vec<Preset> = REFERENCE.iter().map(|r| r.0).collect();
    let scenarios = standard_scenarios(&presets, 2000, n_reps, 20240601).map_err(|e| e.to_string())?;
    let report = run_study(&scenarios, &STUDY_METHODS).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut misses = Vec::new();
    let mut row = 0;
    for (preset, rows) in REFERENCE {
        for r in rows {
            let got_true = report.rows[row].true_log_cor;
            if (got_true - r[0]).abs() > 5e-4 {
                misses.push(format!("{preset} true {got_true:.3} vs {:.3}", r[0]));
            }
            for (k, method) in STUDY_METHODS.iter().enumerate() {
                let s = report.summary(row, *method).ok_or("missing method")?;
                let mean = s.mean_log_psi.ok_or("no successful replicates")?;
                let d = (mean - r[k + 1]).abs();
                worst = worst.max(d);
                if d > tol {
                    misses.push(format!("{preset} true {:.3} {method}: {mean:.3} vs {:.3}", r[0], r[k + 1]));
                }
            }
            row += 1;
        }
    }
    let detail = format!("{} reps, max |diff| {worst:.3} (tol {tol})", n_reps);
    if misses.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", misses.join("; ")))
    }
}

fn rfactor_null() -> Outcome {
    let spec = EstimatorSpec::new(Method::Crude);
    let mut values = Vec::new();
    let mut skipped = 0;
    for rep in 0..25u64 {
        let data = NullDraws::draw(&NullDesign::default(), 606, rep).dataset(0.0, 0.0).map_err(|e| e.to_string())?;
        let opts = RFactorOptions::new(500, rep);
        let r = r_factor(&data, &spec, BiasDirection::OverReporting, VariedParameter::Case, 0.0, &opts)
            .map_err(|e| e.to_string())?;
        if r.initial_significant {
            skipped += 1;
            continue;
        }
        values.push(r.value.ok_or("R-factor not found")?);
    }
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let median = if m % 2 == 1 { values[m / 2] } else { 0.5 * (values[m / 2 - 1] + values[m / 2]) };
    let detail = format!("median {median:.4} over {m} datasets ({skipped} significant at zero bias)");
    if (0.03..=0.10).contains(&median) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn zero_bias() -> Outcome {
    let none = RecallBias::none();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let data = random_dataset(1000 + seed, 500, 3);
        let ml = ml_marginal_cor(&data, &none).map_err(|e| e.to_string())?;
        worst = worst.max((ml.log_psi - g_computation_log_or(&data)).abs());
        for kind in [ScoreKind::Propensity, ScoreKind::Prognostic] {
            let strata = build_strata(&data, kind, 5, &none).map_err(|e| e.to_string())?;
            let s = stratified_marginal_cor(&data, &strata, &none).map_err(|e| e.to_string())?;
            worst = worst.max((s.log_psi - plain_stratified_log_or(&data, &strata.assignment)).abs());
        }
    }
    let detail = format!("20 datasets, max |diff| {worst:.2e}");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn monotonicity() -> Outcome {
    let mut r = rng(3);
    let mut checked = 0;
    let mut violations = 0;
    for dir in [BiasDirection::OverReporting, BiasDirection::UnderReporting] {
        for which in [Perturb::Control, Perturb::Case] {
            let mut here = 0;
            while here < 1000 {
                let k = r.random_range(1..5);
                let tables: Vec<StratumTable> = (0..k)
                    .map(|_| {
                        StratumTable::new(
                            r.random_range(0..100),
                            r.random_range(0..100),
                            r.random_range(0..100),
                            r.random_range(0..100),
                        )
                    })
                    .collect();
                let c = ratio(r.random_range(0..500), 1000);
                let cs = ratio(r.random_range(0..500), 1000);
                let d = ratio(r.random_range(1..250), 1000);
                if let Some(ok) = monotone_step(&tables, dir, &c, &cs, &d, which) {
                    here += 1;
                    if !ok {
                        violations += 1;
                    }
                }
            }
            checked += here;
        }
    }
    let detail = format!("{checked} exact comparisons, {violations} violations");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn margins() -> Outcome {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for i in 0..4000 {
        let t = StratumTable::new(
            r.random_range(0..10_000),
            r.random_range(0..10_000),
            r.random_range(0..10_000),
            r.random_range(0..10_000),
        );
        let dir = if i % 2 == 0 { BiasDirection::OverReporting } else { BiasDirection::UnderReporting };
        let bias = RecallBias::new(dir, r.random_range(0.0..0.99), r.random_range(0.0..0.99)).unwrap();
        worst = worst.max(margin_error(&t, &bias));
    }
    let detail = format!("4000 tables, max margin error {worst:.2e}");
    if worst <= 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn likelihood() -> Outcome {
    let mut r = rng(7);
    let (mut norm, mut grad): (f64, f64) = (0.0, 0.0);
    for i in 0..100u64 {
        let model = if i % 2 == 0 { OutcomeModel::Shared } else { OutcomeModel::Separate };
        let params = random_params(&mut r, 2, model);
        let bias = random_bias(&mut r);
        let x = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        norm = norm.max(normalization_error(&x, &params, &bias));
        let data = random_dataset(500 + i, 80, 2);
        grad = grad.max(gradient_rel_error(&data, &params, &bias));
    }
    let detail = format!("100 points, normalization {norm:.2e}, gradient rel. error {grad:.2e}");
    if norm <= 1e-12 && grad <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ordering() -> Outcome {
    let mut r = rng(11);
    let (mut agree, mut band, mut wrong) = (0, 0, 0);
    for i in 0..500 {
        let dir = if i % 2 == 0 { BiasDirection::OverReporting } else { BiasDirection::UnderReporting };
        let bias = RecallBias::new(dir, r.random_range(0.0..0.9), r.random_range(0.0..0.9)).unwrap();
        let (m1, m0, e) = (r.random_range(0.01..0.99), r.random_range(0.01..0.99), r.random_range(0.01..0.99));
        match ordering_matches(m1, m0, e, &bias) {
            Some(true) => agree += 1,
            Some(false) => wrong += 1,
            None => band += 1,
        }
    }
    let detail = format!("500 instances: {agree} agree, {band} in equality band, {wrong} disagree");
    if wrong == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn end_to_end() -> Outcome {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/survey_synthetic.csv");
    let data: Dataset = load_csv(path, &CsvSchema::default()).map_err(|e| e.to_string())?;
    if data.p() != 7 {
        return Err(format!("expected 7 covariates, found {}", data.p()));
    }
    let case_share = data.n_cases() as f64 / data.n() as f64;
    if (case_share - 0.1).abs() > 0.005 {
        return Err(format!("case share {case_share}"));
    }
    let bias = RecallBias::under_reporting(0.2, 0.2).unwrap();
    let mut psi = Vec::new();
    for (method, n_boot) in [(Method::ML, 50), (Method::StratPrognostic, 200)] {
        let boot = BootstrapOptions::new(n_boot, 1);
        let r = bootstrap_ci(&data, &EstimatorSpec::new(method), &bias, &boot).map_err(|e| format!("{method}: {e}"))?;
        let (lo, hi) = (r.ci_low.unwrap(), r.ci_high.unwrap());
        if !(lo <= r.psi() && r.psi() <= hi && r.psi().is_finite()) {
            return Err(format!("{method}: psi {} outside [{lo}, {hi}]", r.psi()));
        }
        psi.push(format!("{method} {:.3}", r.psi()));
    }
    let spec = EstimatorSpec::new(Method::StratPrognostic);
    let diag = vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let grid = sensitivity_scan(&data, &spec, BiasDirection::UnderReporting, &GridSpec::diagonal(diag), &BootstrapOptions::new(100, 2))
        .map_err(|e| e.to_string())?;
    let estimates: Vec<f64> = grid.cells.iter().filter_map(|c| c.estimate().map(|r| r.log_psi)).collect();
    if estimates.len() < 3 {
        return Err(format!("only {} feasible diagonal cells", estimates.len()));
    }
    if estimates[0] > 0.0 && estimates.windows(2).any(|w| w[1] < w[0]) {
        return Err(format!("diagonal not nondecreasing: {estimates:?}"));
    }
    // under-reporting among controls pulls the estimate towards the null
    let rf_opts = RFactorOptions { scan_step: 0.01, ..RFactorOptions::new(100, 3) };
    let rf = r_factor(&data, &spec, BiasDirection::UnderReporting, VariedParameter::Control, 0.0, &rf_opts)
        .map_err(|e| e.to_string())?;
    if !rf.initial_significant {
        return Err("estimate not significant at zero bias".into());
    }
    let ordering = check_ordering_data(&data, &bias).map_err(|e| e.to_string())?;
    Ok(format!(
        "{}; diagonal {} of 6 feasible; R-factor {:?} {}; ordering {:?}",
        psi.join(", "),
        estimates.len(),
        rf.status,
        rf.value.map_or("-".into(), |v| format!("{v:.3}")),
        ordering.overall,
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 simulation means at n=2000", simulation_means),
        ("2 R-factor on null datasets", rfactor_null),
        ("3 zero-bias reduction", zero_bias),
        ("4 exact monotonicity of stratified estimate", monotonicity),
        ("5 margin preservation", margins),
        ("6 likelihood normalization and gradient", likelihood),
        ("7 ordering checker vs enumeration", ordering),
        ("8 end-to-end on synthetic survey data", end_to_end),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS  {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
