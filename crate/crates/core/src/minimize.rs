//! Limited-memory BFGS with a backtracking line search.
//!
//! Convergence is judged on the max-norm of the gradient only. The line search
//! accepts a step on the Armijo condition, or on an approximate Wolfe test once
//! energy differences are below rounding noise (near the minimum of a large
//! Coulomb sum the energy cannot resolve further progress, the gradient can).

use std::collections::VecDeque;

use crate::error::Result;

#[derive(Copy, Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when max |g_k| ≤ tolerance.
    pub tolerance: f64,
    /// Cap on the max-norm of a single step.
    pub max_step: f64,
    /// Max-norm of the first (steepest-descent) step.
    pub initial_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 12,
            max_iter: 20_000,
            tolerance: 1e-6,
            max_step: 0.1,
            initial_step: 0.01,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub max_gradient: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.9;
const APPROX_WOLFE_UPPER: f64 = 0.8;
const ROUNDING_SLACK: f64 = 1e-13;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

struct History {
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
    capacity: usize,
}

impl History {
    fn new(capacity: usize) -> Self {
        Self {
            s: VecDeque::with_capacity(capacity),
            y: VecDeque::with_capacity(capacity),
            rho: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let scale = dot(&s, &s).sqrt() * dot(&y, &y).sqrt();
        if !(sy > 1e-12 * scale) {
            return;
        }
        if self.s.len() == self.capacity {
            self.s.pop_front();
            self.y.pop_front();
            self.rho.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        self.rho.push_back(1.0 / sy);
    }

    /// Two-loop recursion: returns −H g.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let k = self.s.len();
        let mut q = g.to_vec();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= alpha[i] * yj;
            }
        }
        let gamma = dot(&self.s[k - 1], &self.y[k - 1]) / dot(&self.y[k - 1], &self.y[k - 1]);
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (alpha[i] - beta) * sj;
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }
}

/// Minimizes `objective`, which writes the gradient into its second argument
/// and returns the value. An `Err` at the starting point is returned as is;
/// at trial points it is treated as an infeasible step and the line search
/// backs off.
pub fn lbfgs<F>(x0: Vec<f64>, mut objective: F, opts: &LbfgsOptions) -> Result<Minimum>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut f = objective(&x, &mut g)?;
    let mut history = History::new(opts.memory.max(1));

    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let gmax = max_abs(&g);
        if gmax <= opts.tolerance {
            return Ok(Minimum {
                x,
                value: f,
                gradient: g,
                max_gradient: gmax,
                iterations,
                converged: true,
            });
        }
        iterations += 1;

        let steepest = |g: &[f64]| -> Vec<f64> {
            let scale = opts.initial_step / max_abs(g);
            g.iter().map(|v| -v * scale).collect()
        };
        let mut d = if history.is_empty() {
            steepest(&g)
        } else {
            history.direction(&g)
        };
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            history.clear();
            d = steepest(&g);
            slope = dot(&g, &d);
        }
        let dmax = max_abs(&d);
        if dmax > opts.max_step {
            let k = opts.max_step / dmax;
            d.iter_mut().for_each(|v| *v *= k);
            slope *= k;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            for i in 0..n {
                xt[i] = x[i] + step * d[i];
            }
            if let Ok(ft) = objective(&xt, &mut gt) {
                if ft.is_finite() {
                    let armijo = ft <= f + ARMIJO * step * slope;
                    let approx_wolfe = ft <= f + ROUNDING_SLACK * f.abs() && {
                        let slope_t = dot(&gt, &d);
                        slope_t >= CURVATURE * slope && slope_t <= -APPROX_WOLFE_UPPER * slope
                    };
                    if armijo || approx_wolfe {
                        accepted = Some(ft);
                        break;
                    }
                }
            }
            step *= 0.5;
        }

        match accepted {
            Some(ft) => {
                let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                history.push(s, y);
                std::mem::swap(&mut x, &mut xt);
                std::mem::swap(&mut g, &mut gt);
                f = ft;
            }
            None if !history.is_empty() => history.clear(),
            None => break,
        }
    }

    let gmax = max_abs(&g);
    Ok(Minimum {
        x,
        value: f,
        gradient: g,
        max_gradient: gmax,
        iterations,
        converged: gmax <= opts.tolerance,
    })
}
