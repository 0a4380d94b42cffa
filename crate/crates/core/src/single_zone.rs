//! Finite-horizon approximate pricing for a single zone.
//!
//! The controller linearizes the age dynamics around a fixed estimator
//! `delta` of the average age reduction, solves the resulting
//! linear-quadratic program through two backward recursions, and then
//! searches for a `delta` that is consistent with the age path it induces.

use serde::{Deserialize, Serialize};

use crate::cost_model::CostDistribution;
use crate::error::{Checker, Error, Result};

/// One zone's scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams {
    /// Per-slot probability that a user arrives.
    pub alpha: f64,
    /// Upper bound of private sampling costs.
    pub b: f64,
    pub rho: f64,
    /// Expected transmission delay.
    pub a0: f64,
    /// Age at `t = 0`.
    pub a_init: f64,
    pub horizon: usize,
    pub cost: CostDistribution,
}

impl ZoneParams {
    /// Uniform costs on `[0, b]`.
    pub fn new(alpha: f64, b: f64, rho: f64, a0: f64, a_init: f64, horizon: usize) -> Result<Self> {
        let p = Self {
            alpha,
            b,
            rho,
            a0,
            a_init,
            horizon,
            cost: CostDistribution::Uniform { b },
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_cost(mut self, cost: CostDistribution) -> Result<Self> {
        self.cost = cost;
        self.validate()?;
        Ok(self)
    }

    /// Arrival probability of a Poisson stream with rate `lambda` over a slot of
    /// length `slot`, using the small-slot approximation `alpha = lambda * slot`.
    pub fn alpha_from_poisson(lambda: f64, slot: f64) -> Result<f64> {
        let alpha = lambda * slot;
        let mut c = Checker::default();
        c.check(lambda.is_finite() && lambda > 0.0, "lambda", "must be > 0");
        c.check(slot.is_finite() && slot > 0.0, "slot", "must be > 0");
        c.check(alpha <= 1.0, "alpha", "lambda * slot must not exceed 1");
        c.finish()?;
        Ok(alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        check_zone(&mut c, "", self.alpha, self.a_init);
        check_shared(&mut c, "", self.b, self.rho, self.a0, self.horizon);
        if let Err(Error::Invalid(v)) = self.cost.validate() {
            for x in v {
                c.check(false, &format!("cost.{}", x.field), x.message);
            }
        }
        let cb = self.cost.upper_bound();
        c.check(
            cb == self.b,
            "cost.b",
            format!("must equal b = {} (got {cb})", self.b),
        );
        c.finish()
    }

    /// `alpha (delta + 1)^2 / b`, the curvature term shared by all recursions.
    pub(crate) fn kappa(&self, delta: f64) -> f64 {
        kappa(self.alpha, self.b, delta)
    }
}

pub(crate) fn kappa(alpha: f64, b: f64, delta: f64) -> f64 {
    alpha * (delta + 1.0) * (delta + 1.0) / b
}

pub(crate) fn check_zone(c: &mut Checker, prefix: &str, alpha: f64, a_init: f64) {
    c.check(
        alpha.is_finite() && alpha > 0.0 && alpha <= 1.0,
        &format!("{prefix}alpha"),
        "must lie in (0, 1]",
    );
    c.check(
        a_init.is_finite() && a_init >= 0.0,
        &format!("{prefix}a_init"),
        "must be >= 0",
    );
}

pub(crate) fn check_shared(c: &mut Checker, prefix: &str, b: f64, rho: f64, a0: f64, horizon: usize) {
    c.check(b.is_finite() && b > 0.0, &format!("{prefix}b"), "must be > 0");
    c.check(
        (0.0..=1.0).contains(&rho),
        &format!("{prefix}rho"),
        "must lie in [0, 1]",
    );
    c.check(
        (0.0..1.0).contains(&a0),
        &format!("{prefix}a0"),
        "must lie in [0, 1)",
    );
    c.check(horizon >= 1, &format!("{prefix}horizon"), "must be >= 1");
}

/// A solved finite-horizon policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingPlan {
    pub delta: f64,
    pub q: Vec<f64>,
    pub m: Vec<f64>,
    pub prices: Vec<f64>,
    /// Expected age planned under the linearized dynamics.
    pub ages: Vec<f64>,
    /// Discounted objective of `prices` along `ages`.
    pub cost: f64,
    pub iterations: usize,
    /// Estimator value entering each iteration.
    pub history: Vec<f64>,
    /// `|delta - weighted average of (ages - a0)|` at return.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub initial_delta: f64,
    /// Weight on the new iterate; 1 is plain iteration.
    pub relaxation: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 10_000,
            initial_delta: 0.0,
            relaxation: 1.0,
        }
    }
}

impl FixedPointOptions {
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        c.check(self.tol.is_finite() && self.tol > 0.0, "tol", "must be > 0");
        c.check(self.max_iter >= 1, "max_iter", "must be >= 1");
        c.check(
            self.initial_delta.is_finite() && self.initial_delta >= 0.0,
            "initial_delta",
            "must be >= 0",
        );
        c.check(
            self.relaxation > 0.0 && self.relaxation <= 1.0,
            "relaxation",
            "must lie in (0, 1]",
        );
        c.finish()
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "delta",
            value: delta,
            lo: 0.0,
            hi: f64::INFINITY,
        })
    }
}

/// Backward recursions for `Q` and `M` with `Q[T] = 1`, `M[T] = 0`.
pub fn backward_coeffs(params: &ZoneParams, delta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_delta(delta)?;
    Ok(backward(params.horizon, params.rho, params.kappa(delta)))
}

fn backward(horizon: usize, rho: f64, k: f64) -> (Vec<f64>, Vec<f64>) {
    let mut q = vec![0.0; horizon + 1];
    let mut m = vec![0.0; horizon + 1];
    q[horizon] = 1.0;
    for t in (0..horizon).rev() {
        let den = 1.0 + rho * q[t + 1] * k;
        q[t] = 1.0 + rho * q[t + 1] / den;
        m[t] = rho * (m[t + 1] + 2.0 * q[t + 1]) / den;
    }
    (q, m)
}

/// Unclamped optimal price for one slot given next-slot coefficients.
#[inline]
pub(crate) fn raw_price(rho: f64, k: f64, delta: f64, q_next: f64, m_next: f64, ea: f64) -> f64 {
    (rho * m_next * (delta + 1.0) + 2.0 * rho * (delta + 1.0) * q_next * (ea + 1.0))
        / (2.0 + 2.0 * rho * q_next * k)
}

/// One step of the linearized age dynamics.
#[inline]
pub(crate) fn linearized_step(ea: f64, delta: f64, alpha: f64, b: f64, p: f64) -> f64 {
    ea - delta * alpha * p / b + (1.0 - alpha * p / b)
}

/// Forward pass: price of slot `t` from the planned age, clamped to `[0, b]`.
/// Returns `(prices, ages)`, both of length `T + 1`, with `p[T] = 0`.
pub fn price_path(params: &ZoneParams, delta: f64, q: &[f64], m: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_delta(delta)?;
    let n = params.horizon;
    if q.len() != n + 1 || m.len() != n + 1 {
        return Err(Error::Precondition(format!(
            "coefficient length must be horizon + 1 = {}",
            n + 1
        )));
    }
    let ZoneParams { alpha, b, rho, .. } = *params;
    let k = params.kappa(delta);
    let mut p = vec![0.0; n + 1];
    let mut ea = vec![0.0; n + 1];
    ea[0] = params.a_init;
    for t in 0..n {
        p[t] = raw_price(rho, k, delta, q[t + 1], m[t + 1], ea[t]).clamp(0.0, b);
        ea[t + 1] = linearized_step(ea[t], delta, alpha, b, p[t]);
    }
    Ok((p, ea))
}

/// Expected age in the original (nonlinear) system under the given prices.
///
/// A slot's sample is accepted with probability `alpha * F(p)`, in which case
/// the age drops to `a0`; otherwise it grows by one.
pub fn age_path_original(params: &ZoneParams, prices: &[f64]) -> Result<Vec<f64>> {
    check_prices(params, prices)?;
    let mut ea = Vec::with_capacity(prices.len());
    ea.push(params.a_init);
    for &p in &prices[..prices.len() - 1] {
        let q = params.alpha * params.cost.cdf_unchecked(p);
        let e = *ea.last().unwrap();
        ea.push(e - (e - params.a0) * q + (1.0 - q));
    }
    Ok(ea)
}

fn check_prices(params: &ZoneParams, prices: &[f64]) -> Result<()> {
    if prices.len() != params.horizon + 1 {
        return Err(Error::Precondition(format!(
            "price path length {} != horizon + 1 = {}",
            prices.len(),
            params.horizon + 1
        )));
    }
    if let Some(&p) = prices.iter().find(|&&p| !(0.0..=params.b).contains(&p)) {
        return Err(Error::Domain {
            what: "price",
            value: p,
            lo: 0.0,
            hi: params.b,
        });
    }
    Ok(())
}

/// `sum_t rho^t (EA[t]^2 + alpha p[t]^2 / b)`.
pub fn discounted_cost(params: &ZoneParams, prices: &[f64], ages: &[f64]) -> Result<f64> {
    if prices.len() != ages.len() {
        return Err(Error::Precondition(format!(
            "price path ({}) and age path ({}) lengths differ",
            prices.len(),
            ages.len()
        )));
    }
    let (alpha, b, rho) = (params.alpha, params.b, params.rho);
    let mut disc = 1.0;
    let mut total = 0.0;
    for (&p, &a) in prices.iter().zip(ages) {
        total += disc * (a * a + alpha * p * p / b);
        disc *= rho;
    }
    Ok(total)
}

/// Objective in the original system: expected ages from
/// [`age_path_original`] and expected payment `alpha p F(p)`.
pub fn original_cost(params: &ZoneParams, prices: &[f64]) -> Result<f64> {
    let ages = age_path_original(params, prices)?;
    let mut disc = 1.0;
    let mut total = 0.0;
    for (&p, &a) in prices.iter().zip(&ages) {
        total += disc * (a * a + params.alpha * p * params.cost.cdf_unchecked(p));
        disc *= params.rho;
    }
    Ok(total)
}

/// `(1 - rho)/(1 - rho^T) * sum_{t<T} rho^t (EA[t] - a0)`; the plain mean
/// over the first `T` slots when `rho = 1`.
pub fn discounted_average(ages: &[f64], rho: f64, a0: f64) -> f64 {
    let n = ages.len() - 1;
    let head = &ages[..n];
    if rho >= 1.0 {
        return head.iter().map(|a| a - a0).sum::<f64>() / n as f64;
    }
    let mut disc = 1.0;
    let mut s = 0.0;
    for a in head {
        s += disc * (a - a0);
        disc *= rho;
    }
    // disc == rho^T here
    s * (1.0 - rho) / (1.0 - disc)
}

/// Plan for a fixed estimator, without the fixed-point search.
pub fn plan_for_delta(params: &ZoneParams, delta: f64) -> Result<PricingPlan> {
    params.validate()?;
    let (q, m) = backward_coeffs(params, delta)?;
    let (prices, ages) = price_path(params, delta, &q, &m)?;
    let cost = discounted_cost(params, &prices, &ages)?;
    let residual = (discounted_average(&ages, params.rho, params.a0) - delta).abs();
    Ok(PricingPlan {
        delta,
        q,
        m,
        prices,
        ages,
        cost,
        iterations: 0,
        history: vec![delta],
        residual,
    })
}

/// Iterates `delta -> average age reduction of the plan at delta` until two
/// successive estimates differ by at most `tol`. The returned plan is the one
/// computed at the last estimate fed in, so its residual is at most `tol`.
pub fn solve_delta_fixed_point(params: &ZoneParams, opts: &FixedPointOptions) -> Result<PricingPlan> {
    params.validate()?;
    opts.validate()?;
    let mut delta = opts.initial_delta;
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        history.push(delta);
        let (q, m) = backward(params.horizon, params.rho, params.kappa(delta));
        let (prices, ages) = price_path(params, delta, &q, &m)?;
        let next = discounted_average(&ages, params.rho, params.a0);
        residual = (next - delta).abs();
        if residual <= opts.tol {
            let cost = discounted_cost(params, &prices, &ages)?;
            return Ok(PricingPlan {
                delta,
                q,
                m,
                prices,
                ages,
                cost,
                iterations: it,
                history,
                residual,
            });
        }
        delta = (delta + opts.relaxation * (next - delta)).max(0.0);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}
