use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use recallcor::sensitivity::{
    bootstrap_ci, r_factor, sensitivity_scan, BootstrapOptions, GridSpec, RFactorOptions,
};
use recallcor::simulation::{
    null_sweep, parse_scenarios, run_study, standard_scenarios, NullDesign, Preset,
};
use recallcor::{
    check_ordering_data, check_ordering_marginal, load_csv, validate_bias_feasibility, BiasDirection,
    Dataset, EstimateResult, Method, RecallBias, VERSION,
};

use crate::args::{
    parse_grid, parse_pair, parse_range, CheckArgs, DataArgs, EstimateArgs, Format, OutputArgs,
    RfactorArgs, SensitivityArgs, SimulateArgs,
};

#[derive(Debug)]
pub struct CliError {
    validation: bool,
    message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            validation: true,
            message: message.into(),
        }
    }

    /// 2 for bad input, 3 for estimation failures.
    pub fn exit_code(&self) -> u8 {
        if self.validation {
            2
        } else {
            3
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<recallcor::Error> for CliError {
    fn from(e: recallcor::Error) -> Self {
        Self {
            validation: e.is_validation(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self::validation(format!("output: {e}"))
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn load(data: &DataArgs) -> Result<Dataset> {
    Ok(load_csv(&data.input, &data.schema())?)
}

fn header(command: &str, config: Value) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("tool".into(), json!("recallcor"));
    m.insert("version".into(), json!(VERSION));
    m.insert("command".into(), json!(command));
    m.insert("config".into(), config);
    m
}

fn write_out(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json_bytes(doc: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(doc).expect("serializable document");
    s.push('\n');
    s.into_bytes()
}

/// `<out>.json` next to a CSV output.
fn sidecar(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn emit_csv_with_summary(output: &OutputArgs, csv: Vec<u8>, summary: &Value) -> Result<()> {
    write_out(output.out.as_deref(), &csv)?;
    if let Some(out) = &output.out {
        write_out(Some(&sidecar(out)), &to_json_bytes(summary))?;
    }
    Ok(())
}

fn data_config(d: &DataArgs) -> Value {
    json!({
        "input": d.input.display().to_string(),
        "outcome_col": d.outcome_col,
        "exposure_col": d.exposure_col,
        "covariates": d.covariates,
        "stratum_col": d.stratum_col,
    })
}

fn result_json(r: &EstimateResult) -> Value {
    json!({
        "method": r.method,
        "psi": r.psi(),
        "log_psi": r.log_psi,
        "se_log_psi": r.se_log_psi,
        "ci": r.ci_low.zip(r.ci_high).map(|(lo, hi)| [lo, hi]),
        "bias": r.bias,
        "diagnostics": r.diagnostics,
    })
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let bias = a.bias.resolve()?;
    let seed = a.boot.require_seed()?;
    let data = load(&a.data)?;
    let spec = a.estimator.spec(data.has_strata());
    let warnings: Vec<String> = validate_bias_feasibility(&data, &bias)
        .iter()
        .map(|w| w.to_string())
        .collect();
    let opts = BootstrapOptions {
        n_boot: a.boot.boot,
        level: a.boot.level,
        seed,
        interval: a.boot.interval(),
    };
    let result = bootstrap_ci(&data, &spec, &bias, &opts)?;
    let config = json!({
        "data": data_config(&a.data),
        "estimator": spec,
        "bias": bias,
        "bootstrap": opts,
        "n_records": data.n(),
    });
    match a.output.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut doc = header("estimate", config);
            doc.insert("seed".into(), json!(a.boot.seed));
            doc.insert("result".into(), result_json(&result));
            doc.insert("warnings".into(), json!(warnings));
            write_out(a.output.out.as_deref(), &to_json_bytes(&Value::Object(doc)))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record(["method", "psi", "log_psi", "se_log_psi", "ci_low", "ci_high"])
                .and_then(|_| {
                    w.write_record([
                        result.method.to_string(),
                        result.psi().to_string(),
                        result.log_psi.to_string(),
                        opt(result.se_log_psi),
                        opt(result.ci_low),
                        opt(result.ci_high),
                    ])
                })
                .map_err(|e| CliError::validation(e.to_string()))?;
            let bytes = w.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
            let mut doc = header("estimate", config);
            doc.insert("seed".into(), json!(a.boot.seed));
            doc.insert("result".into(), result_json(&result));
            doc.insert("warnings".into(), json!(warnings));
            emit_csv_with_summary(&a.output, bytes, &Value::Object(doc))
        }
    }
}

pub fn sensitivity(a: &SensitivityArgs) -> Result<()> {
    let seed = a.boot.require_seed()?;
    let (axis0, axis1) = parse_grid(&a.grid)?;
    let grid = if a.diagonal {
        GridSpec::diagonal(axis0)
    } else {
        GridSpec::full(axis0, axis1)
    };
    let data = load(&a.data)?;
    let spec = a.estimator.spec(data.has_strata());
    let opts = BootstrapOptions {
        n_boot: a.boot.boot,
        level: a.boot.level,
        seed,
        interval: a.boot.interval(),
    };
    let direction: BiasDirection = a.direction.into();
    let g = sensitivity_scan(&data, &spec, direction, &grid, &opts)?;
    let config = json!({
        "data": data_config(&a.data),
        "estimator": spec,
        "direction": direction,
        "grid": grid,
        "bootstrap": opts,
        "n_records": data.n(),
    });
    let mut doc = header("sensitivity", config);
    doc.insert("seed".into(), json!(a.boot.seed));
    doc.insert("shape".into(), json!(g.shape()));
    doc.insert("infeasible_cells".into(), json!(g.n_infeasible()));
    doc.insert("failed_cells".into(), json!(g.n_failed()));
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            g.write_csv(&mut buf)?;
            let failures: Vec<Value> = g
                .cells
                .iter()
                .filter_map(|c| match &c.outcome {
                    recallcor::sensitivity::CellOutcome::Failed { reason } => {
                        Some(json!({"control": c.control, "case": c.case, "reason": reason}))
                    }
                    _ => None,
                })
                .collect();
            doc.insert("failures".into(), json!(failures));
            emit_csv_with_summary(&a.output, buf, &Value::Object(doc))
        }
        Format::Json => {
            doc.insert("grid".into(), json!(g));
            write_out(a.output.out.as_deref(), &to_json_bytes(&Value::Object(doc)))
        }
    }
}

pub fn rfactor(a: &RfactorArgs) -> Result<()> {
    let seed = match a.seed {
        Some(s) => s,
        None => return Err(CliError::validation("--seed is required for the R-factor search")),
    };
    if a.output.format == Some(Format::Csv) {
        return Err(CliError::validation("rfactor writes JSON only"));
    }
    let data = load(&a.data)?;
    let spec = a.estimator.spec(data.has_strata());
    let mut opts = RFactorOptions::new(a.boot, seed);
    opts.alpha = a.alpha;
    opts.scan_step = a.scan_step;
    if a.percentile {
        opts.interval = recallcor::sensitivity::IntervalKind::Percentile;
    }
    let direction: BiasDirection = a.direction.into();
    let r = r_factor(&data, &spec, direction, a.vary.into(), a.fixed, &opts)?;
    let config = json!({
        "data": data_config(&a.data),
        "estimator": spec,
        "direction": direction,
        "vary": a.vary,
        "fixed": a.fixed,
        "search": opts,
        "n_records": data.n(),
    });
    let mut doc = header("rfactor", config);
    doc.insert("seed".into(), json!(seed));
    doc.insert("result".into(), json!(r));
    write_out(a.output.out.as_deref(), &to_json_bytes(&Value::Object(doc)))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let Some(seed) = a.seed else {
        return Err(CliError::validation("--seed is required for simulate"));
    };
    if a.null_sweep {
        return simulate_null_sweep(a, seed);
    }
    let scenarios = match &a.scenarios {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
            parse_scenarios(&text, seed)?
        }
        None => {
            let presets = if a.preset.is_empty() {
                Preset::ALL.to_vec()
            } else {
                a.preset
                    .iter()
                    .map(|p| p.parse::<Preset>())
                    .collect::<std::result::Result<_, _>>()?
            };
            let (e0, e1) = parse_pair(&a.over_report)?;
            let bias = RecallBias::over_reporting(e0, e1)?;
            let mut s = standard_scenarios(&presets, a.n, a.reps, seed)?;
            s.iter_mut().for_each(|sc| sc.bias = bias.clone());
            s
        }
    };
    let methods: Vec<Method> = a.methods.iter().map(|&m| m.into()).collect();
    let report = run_study(&scenarios, &methods)?;
    let config = json!({
        "scenarios": scenarios,
        "methods": methods,
    });
    let mut doc = header("simulate", config);
    doc.insert("seed".into(), json!(seed));
    doc.insert("report".into(), json!(report.rows.iter().map(|r| json!({
        "scenario": r.scenario.name,
        "n": r.scenario.n,
        "gamma_t": r.scenario.gamma_t,
        "true_log_cor": r.true_log_cor,
        "methods": r.methods,
    })).collect::<Vec<_>>()));
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            emit_csv_with_summary(&a.output, buf, &Value::Object(doc))
        }
        Format::Json => write_out(a.output.out.as_deref(), &to_json_bytes(&Value::Object(doc))),
    }
}

fn simulate_null_sweep(a: &SimulateArgs, seed: u64) -> Result<()> {
    let grid = parse_range(&a.eta1_grid)?;
    let design = NullDesign {
        n: a.n,
        ..NullDesign::default()
    };
    let points = null_sweep(&design, &grid, a.reps, seed, a.level)?;
    let config = json!({
        "design": design,
        "eta1_grid": grid,
        "reps": a.reps,
        "level": a.level,
    });
    let mut doc = header("simulate-null-sweep", config);
    doc.insert("seed".into(), json!(seed));
    match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let row = |w: &mut csv::Writer<Vec<u8>>, rec: Vec<String>| {
                w.write_record(&rec).map_err(|e| CliError::validation(e.to_string()))
            };
            row(
                &mut w,
                ["eta1", "psi", "log_psi", "ci_low", "ci_high", "rejection_rate", "replicates"]
                    .map(String::from)
                    .to_vec(),
            )?;
            for p in &points {
                row(
                    &mut w,
                    vec![
                        p.eta1.to_string(),
                        p.mean_log_psi.exp().to_string(),
                        p.mean_log_psi.to_string(),
                        p.ci_low.to_string(),
                        p.ci_high.to_string(),
                        p.rejection_rate.to_string(),
                        p.replicates.to_string(),
                    ],
                )?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::validation(e.to_string()))?;
            emit_csv_with_summary(&a.output, bytes, &Value::Object(doc))
        }
        Format::Json => {
            doc.insert("points".into(), json!(points));
            write_out(a.output.out.as_deref(), &to_json_bytes(&Value::Object(doc)))
        }
    }
}

pub fn check_conditions(a: &CheckArgs) -> Result<()> {
    let bias = a.bias.resolve()?;
    if bias.direction == BiasDirection::None {
        return Err(CliError::validation("give --over-report or --under-report"));
    }
    if a.output.format == Some(Format::Csv) {
        return Err(CliError::validation("check-conditions writes JSON only"));
    }
    let marginal = match &a.psi_range {
        Some(r) => {
            let (lo, hi) = parse_pair(r)?;
            Some(check_ordering_marginal(lo, hi, &bias)?)
        }
        None => None,
    };
    let data = load(&a.data)?;
    let conditional = check_ordering_data(&data, &bias)?;
    let config = json!({
        "data": data_config(&a.data),
        "bias": bias,
        "psi_range": a.psi_range,
        "n_records": data.n(),
    });
    let mut doc = header("check-conditions", config);
    doc.insert("conditional".into(), json!(conditional));
    doc.insert("marginal".into(), json!(marginal));
    write_out(a.output.out.as_deref(), &to_json_bytes(&Value::Object(doc)))
}
