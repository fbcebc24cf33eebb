//! Small bound-constrained limited-memory quasi-Newton minimizer used for the
//! inner maximization of the peak selection.
//!
//! Variables carry optional lower bounds. Each iteration fixes the variables
//! that sit on their bound with an outward-pointing gradient, takes an L-BFGS
//! direction in the remaining ones and runs a projected backtracking search.

use std::collections::VecDeque;

use crate::error::{MpaError, Result};

#[derive(Debug, Clone, Copy)]
pub struct BoundedLbfgs {
    pub memory: usize,
    pub max_iters: usize,
    /// absolute tolerance on the projected gradient norm
    pub grad_tol: f64,
}

impl Default for BoundedLbfgs {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iters: 500,
            grad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], lower: &[Option<f64>]) {
    for (xi, l) in x.iter_mut().zip(lower) {
        if let Some(l) = l {
            if *xi < *l {
                *xi = *l;
            }
        }
    }
}

fn at_bound(x: f64, g: f64, lower: Option<f64>) -> bool {
    matches!(lower, Some(l) if x <= l && g > 0.0)
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[Option<f64>]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower)
        .map(|((&xi, &gi), &l)| if at_bound(xi, gi, l) { 0.0 } else { gi })
        .collect()
}

impl BoundedLbfgs {
    /// Minimizes `f` from `x0`. `f` returns the value and writes the gradient.
    pub fn minimize<F>(&self, mut f: F, x0: &[f64], lower: &[Option<f64>]) -> Result<Minimum>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    {
        let n = x0.len();
        assert_eq!(lower.len(), n);
        let mut x = x0.to_vec();
        project(&mut x, lower);
        let mut g = vec![0.0; n];
        let mut fx = f(&x, &mut g)?;
        let mut evals = 1;
        let mut pairs: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::with_capacity(self.memory);
        let mut pg_norm = dot(&projected_gradient(&x, &g, lower), &projected_gradient(&x, &g, lower)).sqrt();
        for iter in 0..self.max_iters {
            if pg_norm <= self.grad_tol {
                return Ok(Minimum {
                    x,
                    value: fx,
                    gradient: g,
                    projected_grad_norm: pg_norm,
                    iterations: iter,
                    evaluations: evals,
                });
            }
            let free: Vec<bool> = (0..n).map(|i| !at_bound(x[i], g[i], lower[i])).collect();
            let mut d = self.two_loop(&g, &free, &pairs);
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                pairs.clear();
                d = self.two_loop(&g, &free, &pairs);
                slope = dot(&g, &d);
            }
            // projected backtracking line search
            let mut step = if pairs.is_empty() {
                (1.0 / pg_norm).min(1.0)
            } else {
                1.0
            };
            let mut g_new = vec![0.0; n];
            let mut accepted = None;
            let mut first_try = false;
            for attempt in 0..60 {
                let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
                project(&mut trial, lower);
                let f_new = f(&trial, &mut g_new)?;
                evals += 1;
                let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &moved);
                let armijo = f_new <= fx + 1e-4 * decrease;
                // below the resolution of f, judge progress by the gradient
                let noise = 64.0 * f64::EPSILON * fx.abs().max(1.0);
                let flat = decrease.abs() <= noise && (f_new - fx).abs() <= noise;
                let pg_new = projected_gradient(&trial, &g_new, lower);
                let pg_new_norm = dot(&pg_new, &pg_new).sqrt();
                if f_new.is_finite() && (armijo || (flat && pg_new_norm < pg_norm)) {
                    accepted = Some((trial, f_new, pg_new_norm));
                    first_try = attempt == 0;
                    break;
                }
                step *= 0.5;
            }
            // the first trial still descends steeply: extrapolate while the
            // sufficient decrease condition keeps holding
            if first_try {
                let mut g_try = vec![0.0; n];
                for _ in 0..60 {
                    let Some((_, f_acc, _)) = &accepted else { break };
                    if dot(&g_new, &d) >= 0.9 * slope {
                        break;
                    }
                    let next = 2.0 * step;
                    let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + next * di).collect();
                    project(&mut trial, lower);
                    let f_try = f(&trial, &mut g_try)?;
                    evals += 1;
                    let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                    if !(f_try.is_finite() && f_try < *f_acc && f_try <= fx + 1e-4 * dot(&g, &moved)) {
                        break;
                    }
                    step = next;
                    let pg = projected_gradient(&trial, &g_try, lower);
                    let pg_try = dot(&pg, &pg).sqrt();
                    g_new.copy_from_slice(&g_try);
                    accepted = Some((trial, f_try, pg_try));
                }
            }
            let Some((x_new, f_new, pg_new_norm)) = accepted else {
                return Err(MpaError::NumericFailure(format!(
                    "inner line search failed after {iter} iterations at projected gradient {pg_norm:e}"
                )));
            };
            let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
                if pairs.len() == self.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y));
            }
            x = x_new;
            fx = f_new;
            g.copy_from_slice(&g_new);
            pg_norm = pg_new_norm;
        }
        if pg_norm <= self.grad_tol {
            return Ok(Minimum {
                x,
                value: fx,
                gradient: g,
                projected_grad_norm: pg_norm,
                iterations: self.max_iters,
                evaluations: evals,
            });
        }
        Err(MpaError::NumericFailure(format!(
            "inner optimizer hit the {} iteration cap at projected gradient {pg_norm:e}",
            self.max_iters
        )))
    }

    /// `−H g` restricted to the free variables.
    fn two_loop(&self, g: &[f64], free: &[bool], pairs: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
        let mask = |v: &[f64]| -> Vec<f64> {
            v.iter().zip(free).map(|(x, &f)| if f { *x } else { 0.0 }).collect()
        };
        let mut q = mask(g);
        let masked: Vec<(Vec<f64>, Vec<f64>)> = pairs.iter().map(|(s, y)| (mask(s), mask(y))).collect();
        let mut alphas = Vec::with_capacity(masked.len());
        for (s, y) in masked.iter().rev() {
            let sy = dot(s, y);
            if sy <= 0.0 {
                alphas.push(None);
                continue;
            }
            let a = dot(s, &q) / sy;
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(Some((a, sy)));
        }
        let gamma = masked
            .iter()
            .rev()
            .find_map(|(s, y)| {
                let sy = dot(s, y);
                (sy > 0.0).then(|| sy / dot(y, y))
            })
            .unwrap_or(1.0);
        q.iter_mut().for_each(|v| *v *= gamma);
        for ((s, y), a) in masked.iter().zip(alphas.into_iter().rev()) {
            if let Some((a, sy)) = a {
                let b = dot(y, &q) / sy;
                q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_unconstrained() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
        };
        let opt = BoundedLbfgs::default();
        let r = opt.minimize(f, &[-1.2, 1.0], &[None, None]).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8, "{:?}", r.x);
        assert!(r.projected_grad_norm <= 1e-10);
    }

    #[test]
    fn distant_peak_from_concave_start() {
        // −(t²/2 − b t⁴/4) starts concave at t = 1; the minimizer is 1/√b
        let b = 1e-6;
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = -x[0] + b * x[0].powi(3);
            Ok(-0.5 * x[0] * x[0] + 0.25 * b * x[0].powi(4))
        };
        let r = BoundedLbfgs::default().minimize(f, &[1.0], &[Some(0.0)]).unwrap();
        assert!((r.x[0] - 1e3).abs() < 1e-9, "{:?}", r.x);
        assert!(r.iterations < 40);
    }

    #[test]
    fn active_bound() {
        // min (x+1)² + (y-2)² with x ≥ 0
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] + 1.0);
            g[1] = 2.0 * (x[1] - 2.0);
            Ok((x[0] + 1.0).powi(2) + (x[1] - 2.0).powi(2))
        };
        let r = BoundedLbfgs::default()
            .minimize(f, &[3.0, 0.0], &[Some(0.0), None])
            .unwrap();
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn negated_quartic_peak() {
        // max_t t²a/2 − t⁴b/4 at t = √(a/b)
        let (a, b) = (3.0, 0.7);
        let f = |x: &[f64], g: &mut [f64]| {
            let t = x[0];
            g[0] = -(t * a - t.powi(3) * b);
            Ok(-(0.5 * a * t * t - 0.25 * b * t.powi(4)))
        };
        let r = BoundedLbfgs::default().minimize(f, &[0.3], &[Some(0.0)]).unwrap();
        assert!((r.x[0] - (a / b).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn iteration_cap() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 1.0;
            Ok(x[0])
        };
        let opt = BoundedLbfgs {
            max_iters: 5,
            ..Default::default()
        };
        assert!(opt.minimize(f, &[0.0], &[None]).is_err());
    }
}
