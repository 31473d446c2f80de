//! Box-constrained limited-memory quasi-Newton minimizer.
//!
//! Projected L-BFGS: the two-loop recursion is restricted to the free
//! variables (those not pinned at a bound by the sign of the gradient), and
//! each step is projected back onto the box before an Armijo backtracking
//! test. Accepted steps therefore never increase the objective.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct BoxOptions {
    pub lower: f64,
    pub upper: f64,
    pub max_iterations: usize,
    /// Stop when `||x - P(x - g)||_inf` falls to this value.
    pub gradient_tolerance: f64,
    /// Stop when `(F_k - F_{k+1}) / max(|F_k|, |F_{k+1}|, 1)` falls to this value.
    pub relative_tolerance: f64,
    pub history_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ProjectedGradient,
    RelativeChange,
    LineSearch,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub projected_gradient: f64,
    pub reason: StopReason,
    /// Objective after each accepted iterate, starting with the initial point.
    pub history: Vec<f64>,
}

impl Minimum {
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::ProjectedGradient | StopReason::RelativeChange)
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: f64, hi: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| (xi - (xi - gi).clamp(lo, hi)).abs())
        .fold(0.0, f64::max)
}

/// Minimize `f` over `[lower, upper]^n`. `f` returns the value and writes
/// the gradient into its second argument.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BoxOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let (lo, hi) = (opts.lower, opts.upper);
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(lo, hi)).collect();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut history = vec![fx];

    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.history_size);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.history_size.max(1)];

    let mut iterations = 0;
    let reason = loop {
        let pg = projected_gradient_norm(&x, &g, lo, hi);
        if pg <= opts.gradient_tolerance {
            break StopReason::ProjectedGradient;
        }
        if iterations >= opts.max_iterations {
            break StopReason::MaxIterations;
        }

        let free: Vec<bool> = x
            .iter()
            .zip(&g)
            .map(|(&xi, &gi)| !((xi <= lo && gi > 0.0) || (xi >= hi && gi < 0.0)))
            .collect();

        // Two-loop recursion on the free subspace.
        for i in 0..n {
            d[i] = if free[i] { -g[i] } else { 0.0 };
        }
        let masked = |v: &[f64], w: &[f64]| -> f64 {
            (0..n).filter(|&i| free[i]).map(|i| v[i] * w[i]).sum()
        };
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            let a = rho * masked(s, &d);
            alpha_buf[k] = a;
            for i in 0..n {
                if free[i] {
                    d[i] -= a * y[i];
                }
            }
        }
        let gamma = match mem.back() {
            Some((s, y, _)) => {
                let yy = masked(y, y);
                if yy > 0.0 { masked(s, y) / yy } else { 1.0 }
            }
            None => {
                let gmax = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
                if gmax > 0.0 { 1.0 / gmax } else { 1.0 }
            }
        };
        let gamma = if gamma > 0.0 && gamma.is_finite() { gamma } else { 1.0 };
        for v in d.iter_mut() {
            *v *= gamma;
        }
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * masked(y, &d);
            let a = alpha_buf[k];
            for i in 0..n {
                if free[i] {
                    d[i] += (a - b) * s[i];
                }
            }
        }

        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            let gmax = g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            for i in 0..n {
                d[i] = if free[i] { -g[i] / gmax } else { 0.0 };
            }
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                break StopReason::LineSearch;
            }
        }

        // Projected backtracking line search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                x_new[i] = (x[i] + step * d[i]).clamp(lo, hi);
            }
            let decrease: f64 = (0..n).map(|i| g[i] * (x_new[i] - x[i])).sum();
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + ARMIJO * decrease && f_new <= fx {
                accepted = Some(f_new);
                break;
            }
            step *= 0.5;
        }
        let Some(f_new) = accepted else {
            break StopReason::LineSearch;
        };

        let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(f64::MIN_POSITIVE) && sy > 0.0 {
            if mem.len() == opts.history_size {
                mem.pop_front();
            }
            if opts.history_size > 0 {
                mem.push_back((s, y, 1.0 / sy));
            }
        }

        let change = (fx - f_new) / fx.abs().max(f_new.abs()).max(1.0);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        history.push(fx);
        iterations += 1;
        if change <= opts.relative_tolerance {
            break StopReason::RelativeChange;
        }
    };

    let projected_gradient = projected_gradient_norm(&x, &g, lo, hi);
    Minimum { x, value: fx, iterations, projected_gradient, reason, history }
}
