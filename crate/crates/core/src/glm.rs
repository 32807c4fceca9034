//! Weighted Bernoulli-logit regression fitted by iteratively reweighted
//! least squares.
//!
//! Used for the propensity model of reported exposure, the outcome and
//! prognostic-score models, and the `P(T*=1 | Y, X)` model behind the
//! ordering checks.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, l2_norm, sup_norm, Matrix};
use crate::scalar::{expit, lit, log_expit, Real};

/// Coefficient norm beyond which the data are treated as separated.
pub const SEPARATION_NORM: f64 = 30.0;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticFit<F> {
    /// Intercept first, then one coefficient per design column.
    pub coefficients: Vec<F>,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the weighted score `Xᵀ W (y - p̂)` at the returned coefficients.
    pub max_abs_score: F,
    /// Set when the coefficient norm exceeded [`SEPARATION_NORM`].
    pub separated: bool,
    pub log_likelihood: F,
}

impl<F: Real> LogisticFit<F> {
    pub fn intercept(&self) -> F {
        self.coefficients[0]
    }

    /// Slopes, excluding the intercept.
    pub fn slopes(&self) -> &[F] {
        &self.coefficients[1..]
    }

    pub fn linear_predictor(&self, x: &[F]) -> F {
        assert_eq!(x.len() + 1, self.coefficients.len(), "dimension mismatch");
        self.coefficients[0] + dot(&self.coefficients[1..], x)
    }

    pub fn predict_prob(&self, x: &[F]) -> F {
        expit(self.linear_predictor(x))
    }

    /// Errors unless the fit converged without separation.
    pub fn require_converged(&self, what: &str) -> Result<()> {
        if self.converged {
            Ok(())
        } else if self.separated {
            Err(Error::ScoreFitFailure(format!("{what}: separation detected")))
        } else {
            Err(Error::ScoreFitFailure(format!(
                "{what}: no convergence after {} iterations",
                self.iterations
            )))
        }
    }
}

/// `expit` of a linear predictor given coefficients with the intercept first.
pub fn predict_prob<F: Real>(fit: &LogisticFit<F>, x: &[F]) -> F {
    fit.predict_prob(x)
}

#[derive(Clone, Copy, Debug)]
pub struct IrlsOptions<F> {
    /// Score sup-norm tolerance. `None` picks `max(1e-8, 100·ε·Σw)`.
    pub tol: Option<F>,
    pub max_iter: usize,
}

impl<F> Default for IrlsOptions<F> {
    fn default() -> Self {
        Self {
            tol: None,
            max_iter: 100,
        }
    }
}

/// Fits `P(y=1 | x) = expit(b₀ + bᵀx)`. The design `x` excludes the intercept
/// column, which is added internally.
pub fn fit_logistic<F: Real>(
    x: &Matrix<F>,
    y: &[bool],
    weights: Option<&[F]>,
) -> Result<LogisticFit<F>> {
    fit_logistic_with(x, y, weights, IrlsOptions::default())
}

pub fn fit_logistic_with<F: Real>(
    x: &Matrix<F>,
    y: &[bool],
    weights: Option<&[F]>,
    opts: IrlsOptions<F>,
) -> Result<LogisticFit<F>> {
    let n = x.rows();
    let k = x.cols() + 1;
    if y.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::InvalidInput("design, response and weights disagree in length".into()));
    }
    let unit = vec![F::one(); n];
    let w = weights.unwrap_or(&unit);
    if w.iter().any(|&v| !(v >= F::zero()) || !v.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
    }
    let active = w.iter().filter(|&&v| v > F::zero()).count();
    if active < k {
        return Err(Error::DegenerateInput(format!(
            "{active} weighted rows for {k} coefficients"
        )));
    }
    let total: F = w.iter().copied().sum();
    let pos: F = w.iter().zip(y).filter(|(_, &yy)| yy).map(|(&v, _)| v).sum();
    if pos <= F::zero() || pos >= total {
        return Err(Error::DegenerateInput("response is constant".into()));
    }
    let tol = opts
        .tol
        .unwrap_or_else(|| lit::<F>(1e-8).max(lit::<F>(100.0) * F::epsilon() * total));
    let sep = lit::<F>(SEPARATION_NORM);

    let mut beta = vec![F::zero(); k];
    beta[0] = (pos / (total - pos)).ln();

    let eval = |beta: &[F]| -> (F, Vec<F>, Matrix<F>) {
        let mut ll = F::zero();
        let mut score = vec![F::zero(); k];
        let mut info = Matrix::zeros(k, k);
        for i in 0..n {
            if w[i] <= F::zero() {
                continue;
            }
            let xi = x.row(i);
            let eta = beta[0] + dot(&beta[1..], xi);
            let p = expit(eta);
            ll = ll + w[i] * if y[i] { log_expit(eta) } else { log_expit(-eta) };
            let resid = w[i] * (if y[i] { F::one() } else { F::zero() } - p);
            let v = w[i] * p * (F::one() - p);
            score[0] = score[0] + resid;
            for a in 0..x.cols() {
                score[a + 1] = score[a + 1] + resid * xi[a];
            }
            // lower triangle of XᵀWX with the implicit intercept column
            for a in 0..k {
                let xa = if a == 0 { F::one() } else { xi[a - 1] };
                for b in 0..=a {
                    let xb = if b == 0 { F::one() } else { xi[b - 1] };
                    info.set(a, b, info.get(a, b) + v * xa * xb);
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info.set(b, a, info.get(a, b));
            }
        }
        (ll, score, info)
    };

    let (mut ll, mut score, mut info) = eval(&beta);
    let mut iterations = 0;
    loop {
        let max_abs_score = sup_norm(&score);
        let separated = l2_norm(&beta) > sep;
        if max_abs_score <= tol && !separated {
            return Ok(LogisticFit {
                coefficients: beta,
                converged: true,
                iterations,
                max_abs_score,
                separated: false,
                log_likelihood: ll,
            });
        }
        if separated || iterations >= opts.max_iter {
            return Ok(LogisticFit {
                coefficients: beta,
                converged: false,
                iterations,
                max_abs_score,
                separated,
                log_likelihood: ll,
            });
        }
        let step = match cholesky_solve(&info, &score) {
            Some(s) => s,
            None if l2_norm(&beta) > lit::<F>(0.5) * sep => {
                // information collapsing along a diverging direction
                return Ok(LogisticFit {
                    coefficients: beta,
                    converged: false,
                    iterations,
                    max_abs_score,
                    separated: true,
                    log_likelihood: ll,
                });
            }
            None => return Err(Error::SingularDesign),
        };
        iterations += 1;
        let mut scale = F::one();
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Vec<F> = beta.iter().zip(&step).map(|(&b, &s)| b + scale * s).collect();
            let (cll, cscore, cinfo) = eval(&cand);
            // near the optimum the likelihood change drowns in rounding, so a
            // smaller score also counts as progress
            let slack = F::epsilon() * lit::<F>(16.0) * ll.abs().max(F::one());
            if cll.is_finite() && (cll >= ll - slack || sup_norm(&cscore) < sup_norm(&score)) {
                beta = cand;
                ll = cll;
                score = cscore;
                info = cinfo;
                accepted = true;
                break;
            }
            scale = scale * lit(0.5);
        }
        if !accepted {
            let max_abs_score = sup_norm(&score);
            return Ok(LogisticFit {
                coefficients: beta,
                converged: max_abs_score <= tol,
                iterations,
                max_abs_score,
                separated: false,
                log_likelihood: ll,
            });
        }
    }
}
