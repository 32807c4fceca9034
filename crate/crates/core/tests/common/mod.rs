//! Reference implementations written independently of the library, used as
//! oracles by the integration and acceptance tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recallcor::{BiasDirection, Dataset, RecallBias};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Plain Newton-Raphson logistic regression with an intercept prepended.
pub fn newton_logistic(rows: &[Vec<f64>], y: &[bool]) -> Vec<f64> {
    let p = rows[0].len() + 1;
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut beta = vec![0.0; p];
    for _ in 0..200 {
        let mut h = vec![vec![0.0; p]; p];
        let mut g = vec![0.0; p];
        for (x, &yi) in design.iter().zip(y) {
            let mu = sigmoid(x.iter().zip(&beta).map(|(a, b)| a * b).sum());
            let w = mu * (1.0 - mu);
            let r = f64::from(u8::from(yi)) - mu;
            for j in 0..p {
                g[j] += r * x[j];
                for k in 0..p {
                    h[j][k] += w * x[j] * x[k];
                }
            }
        }
        let step = solve(h, g);
        beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    beta
}

/// g-computation from a logistic fit of `Y ~ T* + X`.
pub fn g_computation_log_or(data: &Dataset) -> f64 {
    let rows: Vec<Vec<f64>> = (0..data.n())
        .map(|i| {
            std::iter::once(f64::from(u8::from(data.t_star(i))))
                .chain(data.x(i).iter().copied())
                .collect()
        })
        .collect();
    let coef = newton_logistic(&rows, data.outcomes());
    let lin = |t: f64, x: &[f64]| coef[0] + coef[1] * t + x.iter().zip(&coef[2..]).map(|(a, b)| a * b).sum::<f64>();
    let n = data.n() as f64;
    let p1 = (0..data.n()).map(|i| sigmoid(lin(1.0, data.x(i)))).sum::<f64>() / n;
    let p0 = (0..data.n()).map(|i| sigmoid(lin(0.0, data.x(i)))).sum::<f64>() / n;
    (p1 / (1.0 - p1)).ln() - (p0 / (1.0 - p0)).ln()
}

/// Standardised risk ratio-of-odds over strata given by `assignment`, from raw
/// counts with no correction.
pub fn plain_stratified_log_or(data: &Dataset, assignment: &[usize]) -> f64 {
    let k = assignment.iter().max().unwrap() + 1;
    // [case exposed, control exposed, case unexposed, control unexposed]
    let mut counts = vec![[0.0f64; 4]; k];
    for (i, &s) in assignment.iter().enumerate() {
        let idx = match (data.y(i), data.t_star(i)) {
            (true, true) => 0,
            (false, true) => 1,
            (true, false) => 2,
            (false, false) => 3,
        };
        counts[s][idx] += 1.0;
    }
    let n = data.n() as f64;
    let mut p1 = 0.0;
    let mut p0 = 0.0;
    for c in &counts {
        let w = c.iter().sum::<f64>() / n;
        p1 += w * c[0] / (c[0] + c[1]);
        p0 += w * c[2] / (c[2] + c[3]);
    }
    (p1 / (1.0 - p1)).ln() - (p0 / (1.0 - p0)).ln()
}

/// Logistic exposure and outcome with `p` normal covariates.
pub fn random_dataset(seed: u64, n: usize, p: usize) -> Dataset {
    let mut r = rng(seed);
    let beta: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
    let gamma: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
    let gamma_t = r.random_range(-1.0..1.5);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| r.random_range(-2.0..2.0)).collect();
        let e = sigmoid(x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() - 0.3);
        let ti = r.random::<f64>() < e;
        let lp = -0.5 + gamma_t * f64::from(u8::from(ti)) + x.iter().zip(&gamma).map(|(a, b)| a * b).sum::<f64>();
        y.push(r.random::<f64>() < sigmoid(lp));
        t.push(ti);
        rows.push(x);
    }
    Dataset::new(y, t, rows, None).unwrap()
}

/// Brute-force joint `P(Y=y, T=t, T*=s | x)` over the eight cells, indexed
/// `[y][t][s]`.
pub fn enumerate_joint(m1: f64, m0: f64, e: f64, bias: &RecallBias<f64>) -> [[[f64; 2]; 2]; 2] {
    let mut out = [[[0.0; 2]; 2]; 2];
    for y in 0..2 {
        for t in 0..2 {
            let pt = if t == 1 { e } else { 1.0 - e };
            let m = if t == 1 { m1 } else { m0 };
            let py = if y == 1 { m } else { 1.0 - m };
            let theta = if y == 1 { bias.theta_case } else { bias.theta_control };
            // probability that the report equals 1
            let report1 = match (bias.direction, t) {
                (BiasDirection::None, t) => f64::from(t as u8),
                (BiasDirection::OverReporting, 1) => 1.0,
                (BiasDirection::OverReporting, _) => theta,
                (BiasDirection::UnderReporting, 1) => 1.0 - theta,
                (BiasDirection::UnderReporting, _) => 0.0,
            };
            out[y][t][1] = pt * py * report1;
            out[y][t][0] = pt * py * (1.0 - report1);
        }
    }
    out
}

/// `log ψ(x) - log ψ*(x)`, and `(q₁*, q₀*)`, from the enumerated joint.
pub fn brute_force_gap(m1: f64, m0: f64, e: f64, bias: &RecallBias<f64>) -> (f64, f64, f64) {
    let j = enumerate_joint(m1, m0, e, bias);
    let odds = |a: f64, b: f64, c: f64, d: f64| (a * d / (b * c)).ln();
    // true exposure table, summing out the report
    let yt = |y: usize, t: usize| j[y][t][0] + j[y][t][1];
    let log_psi = odds(yt(1, 1), yt(0, 1), yt(1, 0), yt(0, 0));
    // reported exposure table, summing out the truth
    let ys = |y: usize, s: usize| j[y][0][s] + j[y][1][s];
    let log_psi_star = odds(ys(1, 1), ys(0, 1), ys(1, 0), ys(0, 0));
    let q1 = ys(1, 1) / (ys(1, 0) + ys(1, 1));
    let q0 = ys(0, 1) / (ys(0, 0) + ys(0, 1));
    (log_psi - log_psi_star, q1, q0)
}

use recallcor::strata::stratified_psi;
use recallcor::{correct_table, joint_prob, MlParams, OutcomeModel, Rational, StratumTable};
use recallcor::ml::log_likelihood;

pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Which bias parameter a monotonicity check perturbs.
#[derive(Clone, Copy, Debug)]
pub enum Perturb {
    Control,
    Case,
}

/// Exact `ψ̂_S` at `(control, case)`; `None` when the tables are infeasible or
/// the estimator is undefined there.
pub fn exact_psi(tables: &[StratumTable], dir: BiasDirection, control: &Rational, case: &Rational) -> Option<Rational> {
    let bias = RecallBias::new(dir, control.clone(), case.clone()).ok()?;
    if tables.iter().any(|t| !correct_table(t, &bias).feasible) {
        return None;
    }
    stratified_psi(tables, &bias, false).ok().map(|v| v.psi)
}

/// Checks the monotone direction of `ψ̂_S` when one parameter grows by
/// `delta`: nondecreasing in η₀ and ζ₁, nonincreasing in η₁ and ζ₀. `None`
/// when either end is infeasible or undefined.
pub fn monotone_step(
    tables: &[StratumTable],
    dir: BiasDirection,
    control: &Rational,
    case: &Rational,
    delta: &Rational,
    which: Perturb,
) -> Option<bool> {
    let lo = exact_psi(tables, dir, control, case)?;
    let (c2, k2) = match which {
        Perturb::Control => (control + delta, case.clone()),
        Perturb::Case => (control.clone(), case + delta),
    };
    let hi = exact_psi(tables, dir, &c2, &k2)?;
    let increasing = matches!(
        (dir, which),
        (BiasDirection::OverReporting, Perturb::Control) | (BiasDirection::UnderReporting, Perturb::Case)
    );
    Some(if increasing { hi >= lo } else { hi <= lo })
}

/// Largest absolute change of a case or control margin under correction.
pub fn margin_error(t: &StratumTable, bias: &RecallBias<f64>) -> f64 {
    let c = correct_table(t, bias);
    let cases = (t.a_star + t.c_star) as f64;
    let controls = (t.b_star + t.d_star) as f64;
    ((c.a + c.c) - cases).abs().max(((c.b + c.d) - controls).abs())
}

pub fn random_params(r: &mut ChaCha8Rng, p: usize, model: OutcomeModel) -> MlParams<f64> {
    let mut params = MlParams::zeros(p, model);
    params.beta.iter_mut().for_each(|v| *v = r.random_range(-1.5..1.5));
    params.gamma.iter_mut().for_each(|v| *v = r.random_range(-1.5..1.5));
    params
}

pub fn random_bias(r: &mut ChaCha8Rng) -> RecallBias<f64> {
    let (c, k) = (r.random_range(0.0..0.6), r.random_range(0.0..0.6));
    match r.random_range(0..3) {
        0 => RecallBias::none(),
        1 => RecallBias::over_reporting(c, k).unwrap(),
        _ => RecallBias::under_reporting(c, k).unwrap(),
    }
}

/// `|Σ P(y, t* | x) - 1|` over the four cells.
pub fn normalization_error(x: &[f64], params: &MlParams<f64>, bias: &RecallBias<f64>) -> f64 {
    let total: f64 = [(true, true), (true, false), (false, true), (false, false)]
        .iter()
        .map(|&(y, s)| joint_prob(y, s, x, params, bias))
        .sum();
    (total - 1.0).abs()
}

/// Largest relative disagreement between the analytic log-likelihood
/// gradient and central differences.
pub fn gradient_rel_error(data: &Dataset, params: &MlParams<f64>, bias: &RecallBias<f64>) -> f64 {
    let (_, grad) = log_likelihood(data, params, bias).unwrap();
    let nb = params.beta.len();
    let ll = |theta: &[f64]| {
        let mut q = params.clone();
        q.beta.copy_from_slice(&theta[..nb]);
        q.gamma.copy_from_slice(&theta[nb..]);
        log_likelihood(data, &q, bias).unwrap().0
    };
    let theta: Vec<f64> = params.beta.iter().chain(&params.gamma).copied().collect();
    let mut worst = 0.0f64;
    for k in 0..theta.len() {
        let h = 1e-5 * theta[k].abs().max(1.0);
        let mut up = theta.clone();
        let mut dn = theta.clone();
        up[k] += h;
        dn[k] -= h;
        let fd = (ll(&up) - ll(&dn)) / (2.0 * h);
        let err = (fd - grad[k]).abs() / grad[k].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Whether the library's pointwise verdict matches the enumerated truth.
/// `None` inside the equality band.
pub fn ordering_matches(m1: f64, m0: f64, e: f64, bias: &RecallBias<f64>) -> Option<bool> {
    use recallcor::{check_ordering_conditional, OrderingVerdict};
    let (gap, q1, q0) = brute_force_gap(m1, m0, e, bias);
    if gap.abs() <= 1e-9 {
        return None;
    }
    let verdict = check_ordering_conditional(q1, q0, bias);
    Some(match verdict {
        OrderingVerdict::PsiLePsiStar => gap < 0.0,
        OrderingVerdict::PsiGePsiStar => gap > 0.0,
        _ => false,
    })
}
