//! Core domain types, CSV ingestion and bias-feasibility diagnostics.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real, Scalar};
use crate::strata::StratumTable;

/// Direction of differential exposure misreporting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasDirection {
    /// Truly unexposed subjects report exposure (parameters η₀, η₁).
    OverReporting,
    /// Truly exposed subjects deny exposure (parameters ζ₀, ζ₁).
    UnderReporting,
    None,
}

impl BiasDirection {
    /// Column prefix used in grid outputs (`eta`, `zeta`).
    pub fn symbol(self) -> &'static str {
        match self {
            BiasDirection::OverReporting => "eta",
            BiasDirection::UnderReporting => "zeta",
            BiasDirection::None => "theta",
        }
    }
}

/// Recall-bias model: a direction plus the misreporting probabilities among
/// cases and controls.
///
/// For over-reporting, `theta_case = P(T*=1 | Y=1, T=0)` and
/// `theta_control = P(T*=1 | Y=0, T=0)`. For under-reporting they are
/// `P(T*=0 | Y=y, T=1)` for `y = 1, 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecallBias<F> {
    pub direction: BiasDirection,
    pub theta_case: F,
    pub theta_control: F,
}

impl<F: Scalar> RecallBias<F> {
    pub fn none() -> Self {
        Self {
            direction: BiasDirection::None,
            theta_case: F::zero(),
            theta_control: F::zero(),
        }
    }

    /// Parameters are given control first, matching the `(η₀, η₁)` convention.
    pub fn new(direction: BiasDirection, control: F, case: F) -> Result<Self> {
        let in_range = |v: &F| *v >= F::zero() && *v < F::one();
        if !in_range(&control) || !in_range(&case) {
            return Err(Error::InvalidBias(format!(
                "parameters must lie in [0, 1); got control={control:?}, case={case:?}"
            )));
        }
        if direction == BiasDirection::None && (!control.is_zero() || !case.is_zero()) {
            return Err(Error::InvalidBias(
                "direction `none` requires zero parameters".into(),
            ));
        }
        Ok(Self {
            direction,
            theta_case: case,
            theta_control: control,
        })
    }

    pub fn over_reporting(eta0: F, eta1: F) -> Result<Self> {
        Self::new(BiasDirection::OverReporting, eta0, eta1)
    }

    pub fn under_reporting(zeta0: F, zeta1: F) -> Result<Self> {
        Self::new(BiasDirection::UnderReporting, zeta0, zeta1)
    }

    /// Same direction, new parameters.
    pub fn with_params(&self, control: F, case: F) -> Result<Self> {
        Self::new(self.direction, control, case)
    }

    pub fn is_zero(&self) -> bool {
        self.theta_case.is_zero() && self.theta_control.is_zero()
    }

    pub fn to_f64(&self) -> RecallBias<f64> {
        RecallBias {
            direction: self.direction,
            theta_case: to_f64(&self.theta_case),
            theta_control: to_f64(&self.theta_control),
        }
    }
}

impl RecallBias<f64> {
    pub fn cast<G: Scalar>(&self) -> RecallBias<G> {
        RecallBias {
            direction: self.direction,
            theta_case: lit(self.theta_case),
            theta_control: lit(self.theta_control),
        }
    }
}

/// Estimation method tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Crude,
    #[serde(rename = "ml")]
    ML,
    StratPropensity,
    StratPrognostic,
    #[serde(rename = "mh")]
    MantelHaenszel,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Crude => "crude",
            Method::ML => "ml",
            Method::StratPropensity => "strat-propensity",
            Method::StratPrognostic => "strat-prognostic",
            Method::MantelHaenszel => "mh",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "crude" => Method::Crude,
            "ml" => Method::ML,
            "strat-propensity" | "s-prop" => Method::StratPropensity,
            "strat-prognostic" | "s-prog" => Method::StratPrognostic,
            "mh" | "mantel-haenszel" => Method::MantelHaenszel,
            other => return Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        })
    }
}

/// A point estimate of an odds ratio on the log scale, with optional
/// bootstrap uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub method: Method,
    pub log_psi: f64,
    pub se_log_psi: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub bias: RecallBias<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateResult {
    pub fn point(method: Method, log_psi: f64, bias: RecallBias<f64>) -> Self {
        Self {
            method,
            log_psi,
            se_log_psi: None,
            ci_low: None,
            ci_high: None,
            bias,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn psi(&self) -> f64 {
        self.log_psi.exp()
    }

    /// True when a confidence interval is present and excludes 1.
    pub fn excludes_null(&self) -> Option<bool> {
        match (self.ci_low, self.ci_high) {
            (Some(lo), Some(hi)) => Some(lo > 1.0 || hi < 1.0),
            _ => None,
        }
    }

    pub(crate) fn with_diag(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}

/// Individual-level case-control records. Immutable after construction.
///
/// Covariates are stored row-major, `p` values per record.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseControlData<F> {
    y: Vec<bool>,
    t_star: Vec<bool>,
    x: Vec<F>,
    p: usize,
    strata: Option<Vec<i64>>,
    covariate_names: Vec<String>,
}

/// Borrowed view of one record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Record<'a, F> {
    pub y: bool,
    pub t_star: bool,
    pub x: &'a [F],
    pub stratum: Option<i64>,
}

impl<F: Real> CaseControlData<F> {
    pub fn new(
        y: Vec<bool>,
        t_star: Vec<bool>,
        x_rows: Vec<Vec<F>>,
        strata: Option<Vec<i64>>,
    ) -> Result<Self> {
        let p = x_rows.first().map_or(0, Vec::len);
        if let Some(i) = x_rows.iter().position(|r| r.len() != p) {
            return Err(Error::RaggedRow {
                row: i + 1,
                expected: p,
                found: x_rows[i].len(),
            });
        }
        let x = x_rows.into_iter().flatten().collect();
        Self::from_flat(y, t_star, x, p, strata)
    }

    pub fn from_flat(
        y: Vec<bool>,
        t_star: Vec<bool>,
        x: Vec<F>,
        p: usize,
        strata: Option<Vec<i64>>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no records".into()));
        }
        if t_star.len() != n || x.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "column lengths disagree: {n} outcomes, {} exposures, {} covariate values for p={p}",
                t_star.len(),
                x.len()
            )));
        }
        if let Some(s) = &strata {
            if s.len() != n {
                return Err(Error::InvalidInput("stratum column length mismatch".into()));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariates must be finite".into()));
        }
        let covariate_names = (1..=p).map(|j| format!("x{j}")).collect();
        Ok(Self {
            y,
            t_star,
            x,
            p,
            strata,
            covariate_names,
        })
    }

    pub fn with_covariate_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::InvalidInput(format!(
                "{} covariate names for p={}",
                names.len(),
                self.p
            )));
        }
        self.covariate_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn y(&self, i: usize) -> bool {
        self.y[i]
    }

    pub fn t_star(&self, i: usize) -> bool {
        self.t_star[i]
    }

    pub fn x(&self, i: usize) -> &[F] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn stratum(&self, i: usize) -> Option<i64> {
        self.strata.as_ref().map(|s| s[i])
    }

    pub fn has_strata(&self) -> bool {
        self.strata.is_some()
    }

    pub fn outcomes(&self) -> &[bool] {
        &self.y
    }

    pub fn exposures(&self) -> &[bool] {
        &self.t_star
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn record(&self, i: usize) -> Record<'_, F> {
        Record {
            y: self.y[i],
            t_star: self.t_star[i],
            x: self.x(i),
            stratum: self.stratum(i),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = Record<'_, F>> + '_ {
        (0..self.n()).map(move |i| self.record(i))
    }

    pub fn n_cases(&self) -> usize {
        self.y.iter().filter(|&&v| v).count()
    }

    /// Errors unless both cases and controls are present.
    pub fn require_both_outcomes(&self) -> Result<()> {
        let cases = self.n_cases();
        if cases == 0 || cases == self.n() {
            return Err(Error::DegenerateInput(
                "both cases and controls are required".into(),
            ));
        }
        Ok(())
    }

    /// New dataset made of the records at `indices` (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut x = Vec::with_capacity(indices.len() * self.p);
        for &i in indices {
            x.extend_from_slice(self.x(i));
        }
        Self {
            y: indices.iter().map(|&i| self.y[i]).collect(),
            t_star: indices.iter().map(|&i| self.t_star[i]).collect(),
            x,
            p: self.p,
            strata: self
                .strata
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// The single 2×2 table of reported exposure by outcome.
    pub fn pooled_table(&self) -> StratumTable {
        StratumTable::tally(self.y.iter().copied().zip(self.t_star.iter().copied()))
    }

    /// One table per stratum label, in ascending label order; a single
    /// table when no labels are present.
    pub fn label_tables(&self) -> Vec<(Option<i64>, StratumTable)> {
        match &self.strata {
            None => vec![(None, self.pooled_table())],
            Some(labels) => {
                let mut map: BTreeMap<i64, StratumTable> = BTreeMap::new();
                for (i, &l) in labels.iter().enumerate() {
                    map.entry(l).or_default().add(self.y[i], self.t_star[i]);
                }
                map.into_iter().map(|(l, t)| (Some(l), t)).collect()
            }
        }
    }
}

/// Column mapping for [`load_csv`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvSchema {
    pub outcome: String,
    pub exposure: String,
    /// `None` selects every column not used as outcome, exposure or stratum.
    pub covariates: Option<Vec<String>>,
    pub stratum: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            outcome: "y".into(),
            exposure: "t_star".into(),
            covariates: None,
            stratum: None,
        }
    }
}

pub fn load_csv<F: Real>(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CaseControlData<F>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parses comma-delimited, headed case-control data. Rows are numbered from 1
/// (the first line after the header) in error messages.
pub fn read_csv<F: Real, R: Read>(reader: R, schema: &CsvSchema) -> Result<CaseControlData<F>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let y_col = find(&schema.outcome)?;
    let t_col = find(&schema.exposure)?;
    let s_col = schema.stratum.as_deref().map(find).transpose()?;
    let cov_names: Vec<String> = match &schema.covariates {
        Some(names) => names.clone(),
        None => header
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != y_col && *j != t_col && Some(*j) != s_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    let cov_cols = cov_names
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut y = Vec::new();
    let mut t_star = Vec::new();
    let mut x = Vec::new();
    let mut strata = s_col.map(|_| Vec::new());
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        let field = |j: usize| rec.get(j).unwrap_or("");
        y.push(parse_binary(field(y_col)).ok_or_else(|| Error::NonBinaryOutcome {
            row,
            value: field(y_col).to_string(),
        })?);
        t_star.push(parse_binary(field(t_col)).ok_or_else(|| Error::NonBinaryExposure {
            row,
            value: field(t_col).to_string(),
        })?);
        for (&j, name) in cov_cols.iter().zip(&cov_names) {
            let raw = field(j);
            let v: F = raw
                .parse()
                .ok()
                .filter(|v: &F| v.is_finite())
                .ok_or_else(|| Error::ParseValue {
                    row,
                    column: name.clone(),
                    value: raw.to_string(),
                })?;
            x.push(v);
        }
        if let (Some(j), Some(s)) = (s_col, strata.as_mut()) {
            let raw = field(j);
            s.push(raw.parse::<i64>().map_err(|_| Error::ParseValue {
                row,
                column: header[j].clone(),
                value: raw.to_string(),
            })?);
        }
    }
    CaseControlData::from_flat(y, t_star, x, cov_cols.len(), strata)?.with_covariate_names(cov_names)
}

fn parse_binary(raw: &str) -> Option<bool> {
    match raw.parse::<f64>().ok()? {
        v if v == 0.0 => Some(false),
        v if v == 1.0 => Some(true),
        _ => None,
    }
}

/// Writes the dataset with columns `y, t_star, <covariates>[, stratum]`.
///
/// Floats are written in shortest round-trip form, so reading the file back
/// with the default schema (plus `stratum`) reproduces the records exactly.
pub fn write_csv<F: Real, W: Write>(data: &CaseControlData<F>, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string(), "t_star".to_string()];
    header.extend(data.covariate_names().iter().cloned());
    if data.has_strata() {
        header.push("stratum".into());
    }
    wtr.write_record(&header)?;
    for r in data.records() {
        let mut row = vec![
            u8::from(r.y).to_string(),
            u8::from(r.t_star).to_string(),
        ];
        row.extend(r.x.iter().map(|v| v.to_string()));
        if let Some(s) = r.stratum {
            row.push(s.to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| Error::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Which column of a table would go negative under a correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableColumn {
    Case,
    Control,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityWarning {
    pub stratum: Option<i64>,
    pub column: TableColumn,
    pub parameter: f64,
    pub bound: f64,
}

impl fmt::Display for FeasibilityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let col = match self.column {
            TableColumn::Case => "case",
            TableColumn::Control => "control",
        };
        if let Some(s) = self.stratum {
            write!(f, "stratum {s}: ")?;
        }
        write!(
            f,
            "{col} parameter {} exceeds feasibility bound {:.6}",
            self.parameter, self.bound
        )
    }
}

/// Reports, per stratum label, the table columns whose corrected counts would
/// be negative under `bias`. An empty list means the correction is feasible.
pub fn validate_bias_feasibility<F: Real>(
    data: &CaseControlData<F>,
    bias: &RecallBias<F>,
) -> Vec<FeasibilityWarning> {
    let bias = bias.to_f64();
    if bias.direction == BiasDirection::None {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (label, table) in data.label_tables() {
        let (case_bound, control_bound) = table.feasibility_bounds(bias.direction);
        if bias.theta_case > case_bound {
            out.push(FeasibilityWarning {
                stratum: label,
                column: TableColumn::Case,
                parameter: bias.theta_case,
                bound: case_bound,
            });
        }
        if bias.theta_control > control_bound {
            out.push(FeasibilityWarning {
                stratum: label,
                column: TableColumn::Control,
                parameter: bias.theta_control,
                bound: control_bound,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_table(a: usize, b: usize, c: usize, d: usize) -> CaseControlData<f64> {
        let mut y = Vec::new();
        let mut t = Vec::new();
        for (yy, tt, k) in [(true, true, a), (false, true, b), (true, false, c), (false, false, d)] {
            y.extend(std::iter::repeat_n(yy, k));
            t.extend(std::iter::repeat_n(tt, k));
        }
        let n = y.len();
        CaseControlData::from_flat(y, t, vec![], 0, None).map(|d| {
            assert_eq!(d.n(), n);
            d
        })
        .unwrap()
    }

    #[test]
    fn parses_small_file() {
        let csv = "y,t_star,x1\n1,0,0.5\n0,1,1.5\n1,1,-2\n0,0,3\n";
        let d: CaseControlData<f64> = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!((d.n(), d.p()), (4, 1));
        assert_eq!(d.x(2), &[-2.0]);
        assert!(d.y(0) && !d.t_star(0));
    }

    #[test]
    fn non_binary_outcome_names_row() {
        let csv = "y,t_star,x1\n1,0,0.5\n0,1,1.5\n2,1,-2\n";
        let err = read_csv::<f64, _>(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::NonBinaryOutcome { row: 3, .. }), "{err}");
    }

    #[test]
    fn non_binary_exposure_and_ragged_rows() {
        let csv = "y,t_star,x1\n1,0.5,0.5\n";
        let err = read_csv::<f64, _>(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::NonBinaryExposure { row: 1, .. }));
        let csv = "y,t_star,x1\n1,0,0.5\n0,1\n";
        let err = read_csv::<f64, _>(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, Error::RaggedRow { row: 2, expected: 3, found: 2 }));
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "outcome,t_star\n1,0\n";
        let err = read_csv::<f64, _>(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        match err {
            Error::MissingColumn(c) => assert_eq!(c, "y"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn seven_covariates_and_strata() {
        let csv = "case,abuse,sex,age,fedu,medu,income,farm,marital,set\n\
                   1,0,1,52,12,12,30.5,0,0,1\n0,1,0,54,8,10,20,1,1,2\n";
        let schema = CsvSchema {
            outcome: "case".into(),
            exposure: "abuse".into(),
            covariates: None,
            stratum: Some("set".into()),
        };
        let d: CaseControlData<f64> = read_csv(csv.as_bytes(), &schema).unwrap();
        assert_eq!(d.p(), 7);
        assert_eq!(d.stratum(1), Some(2));
        assert_eq!(d.covariate_names()[6], "marital");
    }

    #[test]
    fn bias_parameter_validation() {
        assert!(RecallBias::over_reporting(0.1, 1.0).is_err());
        assert!(RecallBias::under_reporting(-0.1, 0.2).is_err());
        assert!(RecallBias::new(BiasDirection::None, 0.1, 0.0).is_err());
        let b = RecallBias::over_reporting(0.1, 0.3).unwrap();
        assert_eq!((b.theta_control, b.theta_case), (0.1, 0.3));
    }

    #[test]
    fn feasibility_examples() {
        let d = from_table(30, 20, 70, 80);
        assert!(validate_bias_feasibility(&d, &RecallBias::none()).is_empty());
        let ok = RecallBias::over_reporting(0.1, 0.1).unwrap();
        assert!(validate_bias_feasibility(&d, &ok).is_empty());
        let bad = RecallBias::over_reporting(0.1, 0.5).unwrap();
        let w = validate_bias_feasibility(&d, &bad);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].column, TableColumn::Case);
        assert!((w[0].bound - 0.3).abs() < 1e-12);
    }
}
