//! Limited-memory BFGS with a weak-Wolfe bisection line search that
//! tolerates kinks in the objective.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsConfig {
    /// Correction pairs kept.
    pub memory: usize,
    /// Zero means no cap.
    pub max_iterations: usize,
    /// Stop when `|g| / max(1, |x|)` falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the relative decrease over `past` iterations falls below
    /// `delta`; `past = 0` disables the test.
    pub past: usize,
    pub delta: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Curvature constant of the weak Wolfe condition.
    pub wolfe: f64,
    pub max_line_search: usize,
    pub min_step: f64,
    pub max_step: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iterations: 60,
            gradient_tolerance: 1e-4,
            past: 3,
            delta: 1e-6,
            armijo: 1e-4,
            wolfe: 0.9,
            max_line_search: 64,
            min_step: 1e-20,
            max_step: 1e20,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.memory >= 1
            && self.gradient_tolerance > 0.0
            && self.delta >= 0.0
            && self.armijo > 0.0
            && self.armijo < self.wolfe
            && self.wolfe < 1.0
            && self.max_line_search >= 1
            && self.min_step > 0.0
            && self.min_step < self.max_step;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("inconsistent optimizer configuration".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsStatus {
    /// Gradient norm below tolerance.
    Converged,
    /// Relative decrease below `delta`.
    Stalled,
    MaxIterations,
    /// Line search gave up; the best point found is returned.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: LbfgsStatus,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizes `f`, which writes the gradient into its second argument and
/// returns the value.
pub fn minimize<F>(mut f: F, x0: &[f64], cfg: &LbfgsConfig) -> Result<LbfgsResult>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    cfg.validate()?;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut evaluations = 1;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("objective is not finite at the starting point".into()));
    }
    let done = |x: &[f64], g: &[f64]| norm(g) / norm(x).max(1.0) <= cfg.gradient_tolerance;
    if n == 0 || done(&x, &g) {
        return Ok(LbfgsResult {
            x,
            value: fx,
            iterations: 0,
            evaluations,
            status: LbfgsStatus::Converged,
        });
    }

    let m = cfg.memory;
    let mut s_hist = vec![vec![0.0; n]; m];
    let mut y_hist = vec![vec![0.0; n]; m];
    let mut rho = vec![0.0; m];
    let mut alpha = vec![0.0; m];
    let mut stored = 0usize;
    let mut head = 0usize;
    let mut past_values = vec![fx; cfg.past.max(1)];

    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut step = 1.0 / norm(&d);
    let mut xp = vec![0.0; n];
    let mut gp = vec![0.0; n];
    let mut k = 1usize;

    loop {
        xp.copy_from_slice(&x);
        gp.copy_from_slice(&g);
        let fp = fx;
        let ls = line_search(&mut f, &mut x, &mut fx, &mut g, &mut step, &d, &xp, cfg);
        evaluations += ls.evaluations;
        if !ls.ok {
            x.copy_from_slice(&xp);
            g.copy_from_slice(&gp);
            return Ok(LbfgsResult {
                x,
                value: fp,
                iterations: k - 1,
                evaluations,
                status: LbfgsStatus::LineSearchFailed,
            });
        }
        if done(&x, &g) {
            return Ok(LbfgsResult {
                x,
                value: fx,
                iterations: k,
                evaluations,
                status: LbfgsStatus::Converged,
            });
        }
        if cfg.past > 0 {
            if k >= cfg.past {
                let old = past_values[k % cfg.past];
                if (old - fx) / fx.abs().max(1.0) < cfg.delta {
                    return Ok(LbfgsResult {
                        x,
                        value: fx,
                        iterations: k,
                        evaluations,
                        status: LbfgsStatus::Stalled,
                    });
                }
            }
            past_values[k % cfg.past] = fx;
        }
        if cfg.max_iterations != 0 && k >= cfg.max_iterations {
            return Ok(LbfgsResult {
                x,
                value: fx,
                iterations: k,
                evaluations,
                status: LbfgsStatus::MaxIterations,
            });
        }
        k += 1;

        // curvature pair; skipped when it would break positive definiteness
        let s = &mut s_hist[head];
        let y = &mut y_hist[head];
        for i in 0..n {
            s[i] = x[i] - xp[i];
            y[i] = g[i] - gp[i];
        }
        let ys = dot(y, s);
        let yy = dot(y, y);
        if ys > 1e-12 * dot(s, s).sqrt() * yy.sqrt() && ys > 0.0 {
            rho[head] = 1.0 / ys;
            head = (head + 1) % m;
            stored = (stored + 1).min(m);
        }

        // two-loop recursion
        for (di, gi) in d.iter_mut().zip(&g) {
            *di = -gi;
        }
        let mut idx = head;
        for _ in 0..stored {
            idx = (idx + m - 1) % m;
            alpha[idx] = rho[idx] * dot(&s_hist[idx], &d);
            for (di, yi) in d.iter_mut().zip(&y_hist[idx]) {
                *di -= alpha[idx] * yi;
            }
        }
        if stored > 0 {
            let last = (head + m - 1) % m;
            let scale = 1.0 / (rho[last] * dot(&y_hist[last], &y_hist[last]));
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for _ in 0..stored {
            let beta = rho[idx] * dot(&y_hist[idx], &d);
            for (di, si) in d.iter_mut().zip(&s_hist[idx]) {
                *di += (alpha[idx] - beta) * si;
            }
            idx = (idx + 1) % m;
        }
        if dot(&d, &g) >= 0.0 {
            // numerical loss of descent; restart from steepest descent
            for (di, gi) in d.iter_mut().zip(&g) {
                *di = -gi;
            }
            stored = 0;
            step = 1.0 / norm(&d);
        } else {
            step = 1.0;
        }
    }
}

struct LineSearch {
    ok: bool,
    evaluations: usize,
}

/// Weak-Wolfe bracketing: double until the curvature condition holds or the
/// decrease condition fails, then bisect.
#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &mut [f64],
    fx: &mut f64,
    g: &mut [f64],
    step: &mut f64,
    d: &[f64],
    xp: &[f64],
    cfg: &LbfgsConfig,
) -> LineSearch
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let f0 = *fx;
    let dg0 = dot(g, d);
    let mut out = LineSearch {
        ok: false,
        evaluations: 0,
    };
    if !(dg0 < 0.0) {
        return out;
    }
    let mut lo = 0.0;
    let mut hi = cfg.max_step;
    let mut bracketed = false;
    loop {
        for i in 0..x.len() {
            x[i] = xp[i] + *step * d[i];
        }
        *fx = f(x, g);
        out.evaluations += 1;
        if !fx.is_finite() || *fx > f0 + *step * cfg.armijo * dg0 {
            hi = *step;
            bracketed = true;
        } else if dot(g, d) < cfg.wolfe * dg0 {
            lo = *step;
        } else {
            out.ok = true;
            return out;
        }
        if out.evaluations >= cfg.max_line_search {
            break;
        }
        if bracketed && hi - lo < f64::EPSILON * hi {
            break;
        }
        *step = if bracketed { 0.5 * (lo + hi) } else { 2.0 * *step };
        if *step < cfg.min_step || *step > cfg.max_step {
            break;
        }
    }
    // accept a point that at least decreased the objective
    if fx.is_finite() && *fx < f0 {
        out.ok = true;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> LbfgsConfig {
        LbfgsConfig {
            max_iterations: 2000,
            gradient_tolerance: 1e-12,
            past: 0,
            ..LbfgsConfig::default()
        }
    }

    #[test]
    fn quadratic() {
        let r = minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                (x[0] - 3.0).powi(2)
            },
            &[0.0],
            &tight(),
        )
        .unwrap();
        assert!((r.x[0] - 3.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn absolute_value_kink() {
        let r = minimize(
            |x, g| {
                g[0] = if x[0] > 0.0 {
                    1.0
                } else if x[0] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                x[0].abs()
            },
            &[1.0],
            &tight(),
        )
        .unwrap();
        assert!(r.x[0].abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            &tight(),
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn non_finite_start_is_an_error() {
        assert!(minimize(|_, _| f64::NAN, &[0.0], &LbfgsConfig::default()).is_err());
    }

    #[test]
    fn accepted_values_never_increase() {
        let mut history = Vec::new();
        let mut best = f64::INFINITY;
        let r = minimize(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                history.push(v);
                v
            },
            &[-1.2, 1.0],
            &LbfgsConfig::default(),
        )
        .unwrap();
        for v in &history {
            best = best.min(*v);
        }
        assert!(r.value <= history[0]);
        assert_eq!(r.value, best);
    }
}
