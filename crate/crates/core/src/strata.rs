//! Bias-corrected 2×2 tables, score-based strata and the stratified
//! estimators of the marginal and common odds ratios.
//!
//! Table layout per stratum, under reported exposure `T*`:
//!
//! ```text
//!                 case   control
//! exposed         a*     b*
//! not exposed     c*     d*
//! ```

use serde::Serialize;

use crate::data::{BiasDirection, CaseControlData, EstimateResult, Method, RecallBias};
use crate::error::{Error, Result};
use crate::glm::fit_logistic;
use crate::linalg::{dot, Matrix};
use crate::scalar::{lit, to_f64, Real, Scalar};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StratumTable {
    pub a_star: u64,
    pub b_star: u64,
    pub c_star: u64,
    pub d_star: u64,
}

impl StratumTable {
    pub fn new(a_star: u64, b_star: u64, c_star: u64, d_star: u64) -> Self {
        Self {
            a_star,
            b_star,
            c_star,
            d_star,
        }
    }

    /// Counts `(y, t*)` pairs.
    pub fn tally(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut t = Self::default();
        for (y, ts) in pairs {
            t.add(y, ts);
        }
        t
    }

    pub fn add(&mut self, y: bool, t_star: bool) {
        match (y, t_star) {
            (true, true) => self.a_star += 1,
            (false, true) => self.b_star += 1,
            (true, false) => self.c_star += 1,
            (false, false) => self.d_star += 1,
        }
    }

    pub fn n_star(&self) -> u64 {
        self.a_star + self.b_star + self.c_star + self.d_star
    }

    pub fn cases(&self) -> u64 {
        self.a_star + self.c_star
    }

    pub fn controls(&self) -> u64 {
        self.b_star + self.d_star
    }

    pub fn has_zero_cell(&self) -> bool {
        self.a_star == 0 || self.b_star == 0 || self.c_star == 0 || self.d_star == 0
    }

    /// Observed cells `[a*, b*, c*, d*]`, plus 0.5 each when `continuity` is
    /// set and the table has a zero cell.
    pub fn cells<F: Scalar>(&self, continuity: bool) -> [F; 4] {
        let add = if continuity && self.has_zero_cell() {
            lit::<F>(0.5)
        } else {
            F::zero()
        };
        [self.a_star, self.b_star, self.c_star, self.d_star]
            .map(|v| F::from_u64(v).expect("count fits the scalar type") + add.clone())
    }

    /// Largest `(case, control)` parameters keeping corrected counts nonnegative.
    pub fn feasibility_bounds(&self, direction: BiasDirection) -> (f64, f64) {
        let frac = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        match direction {
            BiasDirection::None => (1.0, 1.0),
            BiasDirection::OverReporting => (
                frac(self.a_star, self.cases()),
                frac(self.b_star, self.controls()),
            ),
            BiasDirection::UnderReporting => (
                frac(self.c_star, self.cases()),
                frac(self.d_star, self.controls()),
            ),
        }
    }
}

/// Counts after undoing the recall-bias model. Real-valued, never rounded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrectedTable<F> {
    pub a: F,
    pub b: F,
    pub c: F,
    pub d: F,
    pub feasible: bool,
}

impl<F: Scalar> CorrectedTable<F> {
    pub fn total(&self) -> F {
        self.a.clone() + self.b.clone() + self.c.clone() + self.d.clone()
    }

    pub fn negative_cells(&self) -> usize {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .filter(|v| ***v < F::zero())
            .count()
    }
}

pub fn correct_table<F: Scalar>(t: &StratumTable, bias: &RecallBias<F>) -> CorrectedTable<F> {
    correct_cells(t.cells(false), bias)
}

/// Applies the direction-appropriate correction to `[a*, b*, c*, d*]`.
///
/// Over-reporting moves a share `η_y` of each column's truly unexposed
/// subjects into the exposed row; under-reporting moves a share `ζ_y` of the
/// truly exposed into the unexposed row. Column margins are preserved.
pub fn correct_cells<F: Scalar>(cells: [F; 4], bias: &RecallBias<F>) -> CorrectedTable<F> {
    let [a_s, b_s, c_s, d_s] = cells;
    let one = F::one();
    let case_n = a_s.clone() + c_s.clone();
    let ctrl_n = b_s.clone() + d_s.clone();
    let (t1, t0) = (bias.theta_case.clone(), bias.theta_control.clone());
    let (a, b, c, d) = match bias.direction {
        BiasDirection::None => (a_s, b_s, c_s, d_s),
        BiasDirection::OverReporting => (
            (a_s - t1.clone() * case_n) / (one.clone() - t1.clone()),
            (b_s - t0.clone() * ctrl_n) / (one.clone() - t0.clone()),
            c_s / (one.clone() - t1),
            d_s / (one - t0),
        ),
        BiasDirection::UnderReporting => (
            a_s / (one.clone() - t1.clone()),
            b_s / (one.clone() - t0.clone()),
            (c_s - t1.clone() * case_n) / (one.clone() - t1),
            (d_s - t0.clone() * ctrl_n) / (one - t0),
        ),
    };
    let feasible = [&a, &b, &c, &d].iter().all(|v| **v >= F::zero());
    CorrectedTable {
        a,
        b,
        c,
        d,
        feasible,
    }
}

/// Score used to form strata.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    /// Quantiles of the fitted `P(T*=1 | X)` linear predictor.
    Propensity,
    /// Quantiles of `γ̂_xᵀx` from a logistic outcome model.
    Prognostic,
    /// The dataset's stratum labels.
    UserProvided,
}

/// Data used to fit the prognostic-score outcome model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrognosticFit {
    /// Reported-unexposed subset under over-reporting, full data otherwise.
    #[default]
    Auto,
    /// `Y ~ T* + X` on all records.
    FullData,
    /// `Y ~ X` on records with `T* = 0`. Under over-reporting these are truly unexposed.
    ReportedUnexposed,
}

impl PrognosticFit {
    fn resolve(self, direction: BiasDirection) -> Self {
        match (self, direction) {
            (PrognosticFit::Auto, BiasDirection::OverReporting) => PrognosticFit::ReportedUnexposed,
            (PrognosticFit::Auto, _) => PrognosticFit::FullData,
            (other, _) => other,
        }
    }
}

/// Stratum index per record, `0..n_strata`, with no empty strata.
#[derive(Clone, Debug, PartialEq)]
pub struct Strata {
    pub assignment: Vec<usize>,
    pub n_strata: usize,
    pub kind: ScoreKind,
    /// Quantile strata that received no records and were removed.
    pub dropped_empty: usize,
}

impl Strata {
    pub fn tables<F: Real>(&self, data: &CaseControlData<F>) -> Vec<StratumTable> {
        let mut out = vec![StratumTable::default(); self.n_strata];
        for (i, &s) in self.assignment.iter().enumerate() {
            out[s].add(data.y(i), data.t_star(i));
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_strata];
        for &s in &self.assignment {
            out[s] += 1;
        }
        out
    }
}

pub fn build_strata<F: Real>(
    data: &CaseControlData<F>,
    score: ScoreKind,
    n_strata: usize,
    bias: &RecallBias<F>,
) -> Result<Strata> {
    build_strata_with(data, score, n_strata, bias.direction, PrognosticFit::Auto)
}

pub fn build_strata_with<F: Real>(
    data: &CaseControlData<F>,
    score: ScoreKind,
    n_strata: usize,
    direction: BiasDirection,
    prognostic_fit: PrognosticFit,
) -> Result<Strata> {
    let (raw, kind) = match score {
        ScoreKind::UserProvided => {
            let labels: Vec<i64> = (0..data.n())
                .map(|i| data.stratum(i))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::InvalidInput("dataset has no stratum labels".into()))?;
            let mut distinct = labels.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let assignment = labels
                .iter()
                .map(|l| distinct.binary_search(l).expect("label present"))
                .collect();
            (assignment, ScoreKind::UserProvided)
        }
        ScoreKind::Propensity | ScoreKind::Prognostic => {
            if n_strata < 2 {
                return Err(Error::InvalidInput("score stratification needs at least 2 strata".into()));
            }
            let scores = match score {
                ScoreKind::Propensity => propensity_scores(data)?,
                _ => prognostic_scores(data, prognostic_fit.resolve(direction))?,
            };
            (quantile_strata(&scores, n_strata), score)
        }
    };
    let strata = compact(raw, kind);
    for (s, t) in strata.tables(data).iter().enumerate() {
        if t.cases() == 0 {
            return Err(Error::EmptyStratum { stratum: s, missing: "cases" });
        }
        if t.controls() == 0 {
            return Err(Error::EmptyStratum { stratum: s, missing: "controls" });
        }
    }
    Ok(strata)
}

/// Renumbers stratum indices to `0..k` in order, dropping empty ones.
fn compact(raw: Vec<usize>, kind: ScoreKind) -> Strata {
    let max = raw.iter().copied().max().map_or(0, |m| m + 1);
    let mut used = vec![false; max];
    for &s in &raw {
        used[s] = true;
    }
    let mut remap = vec![usize::MAX; max];
    let mut k = 0;
    for (s, &u) in used.iter().enumerate() {
        if u {
            remap[s] = k;
            k += 1;
        }
    }
    Strata {
        assignment: raw.iter().map(|&s| remap[s]).collect(),
        n_strata: k,
        kind,
        dropped_empty: max - k,
    }
}

/// Assigns each score to one of `k` strata cut at the empirical quantiles
/// `j/k` (linear interpolation between order statistics). Intervals are
/// closed on the right, so a score equal to a cut point goes to the lower
/// stratum. Indices may skip values when cut points tie.
pub fn quantile_strata<F: Real>(scores: &[F], k: usize) -> Vec<usize> {
    let breaks = quantile_breaks(scores, k);
    scores
        .iter()
        .map(|s| breaks.iter().filter(|&&b| *s > b).count())
        .collect()
}

fn quantile_breaks<F: Real>(scores: &[F], k: usize) -> Vec<F> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    (1..k)
        .map(|j| quantile_sorted(&sorted, j as f64 / k as f64))
        .collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted<F: Real>(sorted: &[F], q: f64) -> F {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = lit::<F>(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn covariate_matrix<F: Real>(data: &CaseControlData<F>, rows: &[usize], with_exposure: bool) -> Matrix<F> {
    let cols = data.p() + usize::from(with_exposure);
    let mut m = Vec::with_capacity(rows.len() * cols);
    for &i in rows {
        if with_exposure {
            m.push(if data.t_star(i) { F::one() } else { F::zero() });
        }
        m.extend_from_slice(data.x(i));
    }
    Matrix::from_row_major(rows.len(), cols, m)
}

/// Linear predictor of the `T* ~ X` logistic fit.
pub fn propensity_scores<F: Real>(data: &CaseControlData<F>) -> Result<Vec<F>> {
    let rows: Vec<usize> = (0..data.n()).collect();
    let fit = fit_logistic(&covariate_matrix(data, &rows, false), data.exposures(), None)
        .map_err(|e| Error::ScoreFitFailure(format!("propensity model: {e}")))?;
    fit.require_converged("propensity model")?;
    Ok(rows.iter().map(|&i| fit.linear_predictor(data.x(i))).collect())
}

/// `γ̂_xᵀx` for every record.
pub fn prognostic_scores<F: Real>(data: &CaseControlData<F>, how: PrognosticFit) -> Result<Vec<F>> {
    let (rows, with_exposure): (Vec<usize>, bool) = match how {
        PrognosticFit::ReportedUnexposed => ((0..data.n()).filter(|&i| !data.t_star(i)).collect(), false),
        _ => ((0..data.n()).collect(), true),
    };
    if rows.is_empty() {
        return Err(Error::ScoreFitFailure("no records with T* = 0".into()));
    }
    let y: Vec<bool> = rows.iter().map(|&i| data.y(i)).collect();
    let fit = fit_logistic(&covariate_matrix(data, &rows, with_exposure), &y, None)
        .map_err(|e| Error::ScoreFitFailure(format!("prognostic model: {e}")))?;
    fit.require_converged("prognostic model")?;
    let gamma_x = &fit.slopes()[usize::from(with_exposure)..];
    Ok((0..data.n()).map(|i| dot(gamma_x, data.x(i))).collect())
}

/// Stratum-weighted probabilities and the resulting odds ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct StratifiedValue<F> {
    pub p1: F,
    pub p0: F,
    pub psi: F,
}

fn corrected_tables<F: Scalar>(
    tables: &[StratumTable],
    bias: &RecallBias<F>,
    continuity: bool,
) -> Result<Vec<(F, CorrectedTable<F>)>> {
    let mut out = Vec::with_capacity(tables.len());
    let mut infeasible = Vec::new();
    for (s, t) in tables.iter().enumerate() {
        if t.n_star() == 0 {
            continue;
        }
        let cells = t.cells::<F>(continuity);
        let n = cells.iter().fold(F::zero(), |acc, v| acc + v.clone());
        let corrected = correct_cells(cells, bias);
        if !corrected.feasible {
            infeasible.push(s);
        }
        out.push((n, corrected));
    }
    if !infeasible.is_empty() {
        return Err(Error::InfeasibleBias { strata: infeasible });
    }
    Ok(out)
}

/// Stratified marginal odds ratio on corrected counts:
/// `p̂₁ = Σ sᵢ aᵢ/(aᵢ+bᵢ)`, `p̂₀ = Σ sᵢ cᵢ/(cᵢ+dᵢ)`, `sᵢ = nᵢ/N`.
pub fn stratified_psi<F: Scalar>(
    tables: &[StratumTable],
    bias: &RecallBias<F>,
    continuity: bool,
) -> Result<StratifiedValue<F>> {
    let corrected = corrected_tables(tables, bias, continuity)?;
    let total = corrected.iter().fold(F::zero(), |acc, (n, _)| acc + n.clone());
    if !(total > F::zero()) {
        return Err(Error::InvalidInput("no records in strata".into()));
    }
    let mut p1 = F::zero();
    let mut p0 = F::zero();
    for (s, (n, t)) in corrected.iter().enumerate() {
        let exposed = t.a.clone() + t.b.clone();
        let unexposed = t.c.clone() + t.d.clone();
        if !(exposed > F::zero()) || !(unexposed > F::zero()) {
            return Err(Error::EmptyStratumCell { stratum: s });
        }
        let w = n.clone() / total.clone();
        p1 = p1 + w.clone() * t.a.clone() / exposed;
        p0 = p0 + w * t.c.clone() / unexposed;
    }
    let inside = |p: &F| *p > F::zero() && *p < F::one();
    if !inside(&p1) || !inside(&p0) {
        return Err(Error::DegenerateMarginal {
            p1: to_f64(&p1),
            p0: to_f64(&p0),
        });
    }
    let psi = p1.clone() * (F::one() - p0.clone()) / (p0.clone() * (F::one() - p1.clone()));
    Ok(StratifiedValue { p1, p0, psi })
}

/// Classical Mantel-Haenszel common odds ratio on corrected counts,
/// `Σ aᵢdᵢ/nᵢ / Σ bᵢcᵢ/nᵢ`.
pub fn mantel_haenszel_psi<F: Scalar>(
    tables: &[StratumTable],
    bias: &RecallBias<F>,
    continuity: bool,
) -> Result<F> {
    let corrected = corrected_tables(tables, bias, continuity)?;
    let mut num = F::zero();
    let mut den = F::zero();
    for (n, t) in &corrected {
        num = num + t.a.clone() * t.d.clone() / n.clone();
        den = den + t.b.clone() * t.c.clone() / n.clone();
    }
    if !(den > F::zero()) {
        return Err(Error::ZeroDenominator);
    }
    if !(num > F::zero()) {
        return Err(Error::DegenerateMarginal { p1: 0.0, p0: 0.0 });
    }
    Ok(num / den)
}

fn label_method(kind: ScoreKind) -> Method {
    match kind {
        ScoreKind::Propensity => Method::StratPropensity,
        _ => Method::StratPrognostic,
    }
}

pub fn stratified_marginal_cor<F: Real>(
    data: &CaseControlData<F>,
    strata: &Strata,
    bias: &RecallBias<F>,
) -> Result<EstimateResult> {
    stratified_marginal_cor_with(data, strata, bias, false)
}

pub fn stratified_marginal_cor_with<F: Real>(
    data: &CaseControlData<F>,
    strata: &Strata,
    bias: &RecallBias<F>,
    continuity: bool,
) -> Result<EstimateResult> {
    let tables = strata.tables(data);
    let v = stratified_psi(&tables, bias, continuity)?;
    let mut res = EstimateResult::point(label_method(strata.kind), to_f64(&v.psi).ln(), bias.to_f64())
        .with_diag("n_strata", strata.n_strata as f64)
        .with_diag("dropped_empty_strata", strata.dropped_empty as f64)
        .with_diag("negative_cells", 0.0)
        .with_diag("p1", to_f64(&v.p1))
        .with_diag("p0", to_f64(&v.p0));
    if strata.kind == ScoreKind::UserProvided {
        res = res.with_diag("user_strata", 1.0);
    }
    Ok(res)
}

/// Common (not marginal) odds ratio across strata; see [`mantel_haenszel_psi`].
pub fn mantel_haenszel_cor<F: Real>(
    data: &CaseControlData<F>,
    strata: &Strata,
    bias: &RecallBias<F>,
) -> Result<EstimateResult> {
    mantel_haenszel_cor_with(data, strata, bias, false)
}

pub fn mantel_haenszel_cor_with<F: Real>(
    data: &CaseControlData<F>,
    strata: &Strata,
    bias: &RecallBias<F>,
    continuity: bool,
) -> Result<EstimateResult> {
    let psi = mantel_haenszel_psi(&strata.tables(data), bias, continuity)?;
    Ok(
        EstimateResult::point(Method::MantelHaenszel, to_f64(&psi).ln(), bias.to_f64())
            .with_diag("n_strata", strata.n_strata as f64)
            .with_diag("targets_common_or", 1.0),
    )
}

/// Odds ratio of the single pooled table, corrected for `bias` and with no
/// confounding adjustment. With no bias this is the raw `T*`-based sample OR.
pub fn crude_cor<F: Real>(data: &CaseControlData<F>, bias: &RecallBias<F>) -> Result<EstimateResult> {
    let table = data.pooled_table();
    let [(_, t)]: [(F, CorrectedTable<F>); 1] = corrected_tables(&[table], bias, false)?
        .try_into()
        .expect("one table");
    if !(t.b > F::zero() && t.c > F::zero() && t.a > F::zero() && t.d > F::zero()) {
        return Err(Error::EmptyStratumCell { stratum: 0 });
    }
    let psi = t.a * t.d / (t.b * t.c);
    Ok(EstimateResult::point(Method::Crude, to_f64(&psi).ln(), bias.to_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    const T: StratumTable = StratumTable {
        a_star: 30,
        b_star: 20,
        c_star: 70,
        d_star: 80,
    };

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_bias_identity() {
        let c = correct_table::<f64>(&T, &RecallBias::none());
        assert_eq!((c.a, c.b, c.c, c.d), (30.0, 20.0, 70.0, 80.0));
        assert!(c.feasible);
    }

    #[test]
    fn over_reporting_correction() {
        let c = correct_table(&T, &RecallBias::over_reporting(0.1, 0.1).unwrap());
        assert!(close(c.a, 22.2222, 1e-4) && close(c.b, 11.1111, 1e-4));
        assert!(close(c.c, 77.7778, 1e-4) && close(c.d, 88.8889, 1e-4));
        assert!(close(c.a + c.c, 100.0, 1e-9) && close(c.b + c.d, 100.0, 1e-9));
    }

    #[test]
    fn under_reporting_correction() {
        let c = correct_table(&T, &RecallBias::under_reporting(0.2, 0.2).unwrap());
        assert!(close(c.a, 37.5, 1e-12) && close(c.b, 25.0, 1e-12));
        assert!(close(c.c, 62.5, 1e-12) && close(c.d, 75.0, 1e-12));
    }

    #[test]
    fn infeasible_is_flagged_not_truncated() {
        let c = correct_table(&T, &RecallBias::over_reporting(0.1, 0.5).unwrap());
        assert!(!c.feasible);
        assert!(c.a < 0.0);
        assert_eq!(c.negative_cells(), 1);
    }

    #[test]
    fn exact_correction_in_rationals() {
        let tenth = Rational::new(1.into(), 10.into());
        let bias = RecallBias::over_reporting(tenth.clone(), tenth).unwrap();
        let c = correct_table::<Rational>(&T, &bias);
        assert_eq!(c.a, Rational::new(200.into(), 9.into()));
        assert_eq!(c.a.clone() + c.c.clone(), Rational::from_integer(100.into()));
    }

    #[test]
    fn stratified_single_table() {
        let v = stratified_psi::<f64>(&[T], &RecallBias::none(), false).unwrap();
        assert!(close(v.psi, (0.6 * 8.0 / 15.0) / ((7.0 / 15.0) * 0.4), 1e-12));
        assert!(close(v.psi, 1.7143, 1e-4));
        let v = stratified_psi(&[T], &RecallBias::over_reporting(0.1, 0.1).unwrap(), false).unwrap();
        assert!(close(v.psi, 2.2857, 1e-4));
    }

    #[test]
    fn mantel_haenszel_examples() {
        let none = RecallBias::<f64>::none();
        let one = mantel_haenszel_psi(&[T], &none, false).unwrap();
        assert!(close(one, 30.0 * 80.0 / (20.0 * 70.0), 1e-12));
        let two = mantel_haenszel_psi(&[T, T], &none, false).unwrap();
        assert!(close(two, 1.7143, 1e-4));
        let b = RecallBias::over_reporting(0.1, 0.1).unwrap();
        assert!(close(mantel_haenszel_psi(&[T], &b, false).unwrap(), 2.2857, 1e-4));
    }

    #[test]
    fn zero_cells_and_margins() {
        let none = RecallBias::<f64>::none();
        // a zero cell with positive margins is still defined
        let t = StratumTable::new(0, 5, 10, 10);
        let v = stratified_psi(&[T, t], &none, false).unwrap();
        assert!(close(v.p1, 200.0 / 225.0 * 0.6, 1e-12));
        // no exposed records in stratum 1
        let empty_row = StratumTable::new(0, 0, 10, 10);
        assert!(matches!(
            stratified_psi(&[T, empty_row], &none, false),
            Err(Error::EmptyStratumCell { stratum: 1 })
        ));
        let v = stratified_psi(&[t], &none, true).unwrap();
        // (0.5, 5.5, 10.5, 10.5)
        assert!(close(v.p1, 0.5 / 6.0, 1e-12));
    }

    #[test]
    fn mh_zero_denominator() {
        // eta0 at the control bound empties the exposed-control cell
        let bias = RecallBias::over_reporting(0.2, 0.0).unwrap();
        assert!(matches!(
            mantel_haenszel_psi::<f64>(&[T], &bias, false),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn quantile_cut_even_sizes() {
        let scores: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 / 3.0).collect();
        let s = quantile_strata(&scores, 5);
        let mut sizes = [0; 5];
        for k in s {
            sizes[k] += 1;
        }
        assert_eq!(sizes, [200; 5]);
    }

    #[test]
    fn ties_go_to_lower_stratum() {
        let scores = [1.0, 1.0, 1.0, 2.0, 3.0];
        // median break is 1.0, so every tie sits in the lower stratum
        assert_eq!(quantile_strata(&scores, 2), vec![0, 0, 0, 1, 1]);
    }

    #[test]
    fn feasibility_bounds_by_direction() {
        let (c, k) = T.feasibility_bounds(BiasDirection::OverReporting);
        assert!(close(c, 0.3, 1e-15) && close(k, 0.2, 1e-15));
        let (c, k) = T.feasibility_bounds(BiasDirection::UnderReporting);
        assert!(close(c, 0.7, 1e-15) && close(k, 0.8, 1e-15));
    }
}
