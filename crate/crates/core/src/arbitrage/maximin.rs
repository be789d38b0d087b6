//! Maximin ascent for checks whose outcome set is larger than the tuple.
//!
//! The guaranteed profit `g(p) = min_ω s_ω(p)` is concave in the log-odds of
//! `p`. It is maximized through the smooth lower bound
//! `g_τ = -τ log Σ_ω exp(-s_ω / τ)`, itself concave, by damped Newton steps
//! while `τ` is annealed towards zero.

use nalgebra::{DMatrix, DVector};

use super::{check_weights, clamp_probs, logit, min_profit_unchecked, sigmoid, ArbitrageResult, Method, SolverConfig};
use crate::checks::{condition_form, consistent_outcomes, is_consistent, ConditionForm};
use crate::error::{Error, Result};
use crate::model::{CheckKind, ResolutionOpt};

const TAU_START: f64 = 1e-1;
const TAU_END: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;

struct Objective<'a> {
    kind: CheckKind,
    offered: &'a [f64],
    weights: &'a [f64],
}

struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl Objective<'_> {
    fn probs(u: &DVector<f64>) -> Vec<f64> {
        u.iter().map(|&x| sigmoid(x)).collect()
    }

    fn profits(&self, p: &[f64]) -> Vec<f64> {
        consistent_outcomes(self.kind)
            .iter()
            .map(|w| super::outcome_profit(w, self.offered, p, self.weights))
            .collect()
    }

    fn smooth_min(s: &[f64], tau: f64) -> f64 {
        let m = s.iter().cloned().fold(f64::INFINITY, f64::min);
        if !m.is_finite() {
            return m;
        }
        m - tau * s.iter().map(|x| (-(x - m) / tau).exp()).sum::<f64>().ln()
    }

    fn value(&self, u: &DVector<f64>, tau: f64) -> f64 {
        Self::smooth_min(&self.profits(&Self::probs(u)), tau)
    }

    fn eval(&self, u: &DVector<f64>, tau: f64) -> Eval {
        let n = u.len();
        let p = Self::probs(u);
        let s = self.profits(&p);
        let value = Self::smooth_min(&s, tau);
        let m = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let raw: Vec<f64> = s.iter().map(|x| (-(x - m) / tau).exp()).collect();
        let z: f64 = raw.iter().sum();

        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        let mut second = DMatrix::zeros(n, n);
        for (omega, r) in consistent_outcomes(self.kind).iter().zip(&raw) {
            let pi = r / z;
            let g = DVector::from_fn(n, |i, _| {
                let w = self.weights[i];
                match omega[i] {
                    ResolutionOpt::True => w * (1.0 - p[i]),
                    ResolutionOpt::False => -w * p[i],
                    ResolutionOpt::NotApplicable => 0.0,
                }
            });
            for i in 0..n {
                if omega[i] != ResolutionOpt::NotApplicable {
                    hess[(i, i)] -= pi * self.weights[i] * p[i] * (1.0 - p[i]);
                }
            }
            second += &g * g.transpose() * pi;
            grad += g * pi;
        }
        hess -= (second - &grad * grad.transpose()) / tau;
        Eval { value, grad, hess }
    }
}

/// Arbitrage by maximizing the guaranteed profit directly. Works for every
/// kind; the dispatcher uses it where the equalizer does not apply.
pub fn maximin(kind: CheckKind, offered: &[f64], weights: &[f64], cfg: &SolverConfig) -> Result<ArbitrageResult> {
    kind.check_arity("offered", offered.len())?;
    check_weights(kind, weights)?;
    cfg.validate()?;
    let f = clamp_probs(offered, cfg.prob_clamp_eps)?;
    let unchanged = || ArbitrageResult {
        violation: 0.0,
        arbitraged_probs: offered.to_vec(),
        method: Method::Maximin,
    };
    // Inside the feasible region of an inequality check nothing can be earned.
    if condition_form(kind) == ConditionForm::Inequality && is_consistent(kind, offered, 0.0)? {
        return Ok(unchanged());
    }

    let obj = Objective { kind, offered: &f, weights };
    let n = f.len();
    let mut u = DVector::from_iterator(n, f.iter().map(|&p| logit(p)));
    let mut iterations = 0;
    let mut tau = TAU_START;
    while tau >= TAU_END * 0.5 {
        loop {
            iterations += 1;
            if iterations > cfg.max_iters {
                let p = Objective::probs(&u);
                return Err(Error::SolverDidNotConverge {
                    iterations: cfg.max_iters,
                    best_violation: min_profit_unchecked(kind, &f, &p, weights).max(0.0),
                    residual: obj.eval(&u, tau).grad.norm(),
                    best_probs: p,
                });
            }
            let e = obj.eval(&u, tau);
            let Some(dir) = ascent_direction(&e) else { break };
            let slope = e.grad.dot(&dir);
            if slope <= 2.0 * cfg.maximin_tol {
                break;
            }
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-12 {
                let cand = &u + &dir * step;
                let val = obj.value(&cand, tau);
                if val.is_finite() && val >= e.value + ARMIJO * step * slope {
                    accepted = Some((cand, val));
                    break;
                }
                step *= 0.5;
            }
            let Some((cand, val)) = accepted else { break };
            u = cand;
            if val - e.value < cfg.maximin_tol {
                break;
            }
        }
        tau *= 0.1;
    }

    let p = Objective::probs(&u);
    let violation = min_profit_unchecked(kind, &f, &p, weights);
    if violation <= 0.0 {
        return Ok(unchanged());
    }
    Ok(ArbitrageResult {
        violation,
        arbitraged_probs: p,
        method: Method::Maximin,
    })
}

/// Newton direction `(-H)^{-1} ∇g`, regularized until `-H` is positive definite.
fn ascent_direction(e: &Eval) -> Option<DVector<f64>> {
    let n = e.grad.len();
    let neg = -&e.hess;
    let scale = neg.diagonal().amax().max(1e-300);
    let mut mu = 0.0;
    for _ in 0..60 {
        let m = &neg + DMatrix::identity(n, n) * mu;
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&e.grad);
            if d.iter().all(|x| x.is_finite()) {
                return Some(d);
            }
        }
        mu = if mu == 0.0 { scale * 1e-12 } else { mu * 10.0 };
    }
    None
}
