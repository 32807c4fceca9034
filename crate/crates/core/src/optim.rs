//! BFGS minimisation with a backtracking Armijo line search.

use crate::linalg::{dot, sup_norm};
use crate::scalar::{lit, Real};

#[derive(Clone, Copy, Debug)]
pub struct BfgsOptions<F> {
    pub grad_tol: F,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct Minimum<F> {
    pub x: Vec<F>,
    pub value: F,
    pub grad_sup_norm: F,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimises `f`. The objective writes the gradient into its second argument
/// and returns the value, or `None` where it is undefined; the line search
/// backs off from such points.
pub fn minimize_bfgs<F, Obj>(mut obj: Obj, x0: Vec<F>, opts: BfgsOptions<F>) -> Option<Minimum<F>>
where
    F: Real,
    Obj: FnMut(&[F], &mut [F]) -> Option<F>,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![F::zero(); n];
    let mut f = obj(&x, &mut g)?;
    if !f.is_finite() {
        return None;
    }
    // inverse Hessian approximation, row-major
    let mut h = identity::<F>(n);
    let mut first_step = true;
    let c1 = lit::<F>(1e-4);
    let mut g_new = vec![F::zero(); n];

    for iter in 0..opts.max_iter {
        let gnorm = sup_norm(&g);
        if gnorm <= opts.grad_tol {
            return Some(Minimum {
                x,
                value: f,
                grad_sup_norm: gnorm,
                iterations: iter,
                converged: true,
            });
        }
        let mut d = mat_vec(&h, &g, n);
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < F::zero()) {
            h = identity(n);
            first_step = true;
            d = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &d);
        }
        // keep the very first step short relative to the gradient
        let mut alpha = if first_step {
            F::one().min(F::one() / sup_norm(&d).max(F::epsilon()))
        } else {
            F::one()
        };
        let mut accepted = None;
        // objective differences below this are rounding; a smaller gradient
        // then decides
        let noise = lit::<F>(16.0) * F::epsilon() * f.abs().max(F::one());
        let gnorm = sup_norm(&g);
        for _ in 0..60 {
            let trial: Vec<F> = x.iter().zip(&d).map(|(&xi, &di)| xi + alpha * di).collect();
            if let Some(ft) = obj(&trial, &mut g_new) {
                let armijo = ft <= f + c1 * alpha * slope;
                let flat = ft <= f + noise && sup_norm(&g_new) < gnorm;
                if ft.is_finite() && (armijo || flat) {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha = alpha * lit(0.5);
        }
        let Some((x_new, f_new)) = accepted else {
            // line search exhausted: accept current point if it is stationary to rounding
            let gnorm = sup_norm(&g);
            return Some(Minimum {
                x,
                value: f,
                grad_sup_norm: gnorm,
                iterations: iter,
                converged: gnorm <= opts.grad_tol,
            });
        };
        let s: Vec<F> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<F> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > F::epsilon() * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_step {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().for_each(|v| *v = *v * scale);
                first_step = false;
            }
            bfgs_update(&mut h, &s, &y, sy, n);
        }
        x = x_new;
        f = f_new;
        std::mem::swap(&mut g, &mut g_new);
    }
    let gnorm = sup_norm(&g);
    Some(Minimum {
        x,
        value: f,
        grad_sup_norm: gnorm,
        iterations: opts.max_iter,
        converged: gnorm <= opts.grad_tol,
    })
}

fn identity<F: Real>(n: usize) -> Vec<F> {
    let mut m = vec![F::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = F::one();
    }
    m
}

fn mat_vec<F: Real>(m: &[F], v: &[F], n: usize) -> Vec<F> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ` with `ρ = 1/(yᵀs)`.
fn bfgs_update<F: Real>(h: &mut [F], s: &[F], y: &[F], sy: F, n: usize) {
    let rho = F::one() / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    let coef = (F::one() + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            let v = h[i * n + j] - rho * (hy[i] * s[j] + s[i] * hy[j]) + coef * s[i] * s[j];
            h[i * n + j] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let obj = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Some((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        };
        let m = minimize_bfgs(
            obj,
            vec![-1.2, 1.0],
            BfgsOptions {
                grad_tol: 1e-8,
                max_iter: 500,
            },
        )
        .unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn quadratic_in_single_precision() {
        let obj = |x: &[f32], g: &mut [f32]| {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 8.0 * (x[1] + 1.0);
            Some((x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2))
        };
        let m = minimize_bfgs(
            obj,
            vec![0.0, 0.0],
            BfgsOptions {
                grad_tol: 1e-4,
                max_iter: 100,
            },
        )
        .unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn backs_off_undefined_region() {
        // -log(x) + x, minimum at 1, undefined for x <= 0
        let obj = |x: &[f64], g: &mut [f64]| {
            if x[0] <= 0.0 {
                return None;
            }
            g[0] = -1.0 / x[0] + 1.0;
            Some(-x[0].ln() + x[0])
        };
        let m = minimize_bfgs(
            obj,
            vec![5.0],
            BfgsOptions {
                grad_tol: 1e-10,
                max_iter: 200,
            },
        )
        .unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-8);
    }
}
