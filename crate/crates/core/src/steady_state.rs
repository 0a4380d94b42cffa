//! Infinite-horizon analysis: stationary coefficients, the simplified
//! stationary price rule and its limits, the infinite-horizon estimator,
//! and the finite/infinite cost gap.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::roots::{bisect_increasing, expand_upper};
use crate::single_zone::{
    discounted_cost, linearized_step, raw_price, solve_delta_fixed_point, FixedPointOptions,
    ZoneParams,
};

pub const DEFAULT_T_MAX: usize = 500;
const ROOT_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub delta: f64,
    pub q: f64,
    pub m: f64,
    pub p_limit: f64,
    pub ea_limit: f64,
}

fn require_discounted(rho: f64) -> Result<()> {
    if rho < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "rho",
            value: rho,
            lo: 0.0,
            hi: 1.0,
        })
    }
}

/// Fixed point of `Q = 1 + rho Q / (1 + rho Q k)`.
pub fn steady_q(params: &ZoneParams, delta: f64) -> Result<f64> {
    require_discounted(params.rho)?;
    Ok(q_closed_form(params.rho, params.kappa(delta)))
}

pub(crate) fn q_closed_form(rho: f64, k: f64) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    // Positive root of Q^2 - (1 - g) Q - u = 0; the second branch avoids
    // cancellation when 1 - g is large and negative.
    let u = 1.0 / (rho * k);
    let h = 1.0 - (1.0 - rho) * u;
    let s = (h * h + 4.0 * u).sqrt();
    if h >= 0.0 {
        0.5 * (h + s)
    } else {
        2.0 * u / (s - h)
    }
}

/// `M = 2 rho Q / (1 - rho + rho Q k)`.
pub fn steady_m(params: &ZoneParams, delta: f64, q: f64) -> Result<f64> {
    require_discounted(params.rho)?;
    let rho = params.rho;
    Ok(2.0 * rho * q / (1.0 - rho + rho * q * params.kappa(delta)))
}

/// Ratio whose unit crossing defines the infinite-horizon estimator; it
/// equals `(delta + a0)` over the limiting planned age.
pub fn stationary_ratio(params: &ZoneParams, delta: f64) -> Result<f64> {
    require_discounted(params.rho)?;
    let rho = params.rho;
    let x = rho * q_closed_form(rho, params.kappa(delta)) * params.kappa(delta);
    Ok(x * (delta + params.a0) * (1.0 - rho + x) / ((1.0 - rho) * (1.0 + x)))
}

pub fn steady_state(params: &ZoneParams, delta: f64) -> Result<SteadyState> {
    let q = steady_q(params, delta)?;
    let m = steady_m(params, delta, q)?;
    let (rho, k) = (params.rho, params.kappa(delta));
    let x = rho * q * k;
    Ok(SteadyState {
        delta,
        q,
        m,
        p_limit: params.b / (params.alpha * (delta + 1.0)),
        ea_limit: (1.0 - rho) * (1.0 + x) / (x * (1.0 - rho + x)),
    })
}

/// Root of `stationary_ratio = 1` by bisection.
pub fn solve_delta_infinite(params: &ZoneParams) -> Result<f64> {
    params.validate()?;
    require_discounted(params.rho)?;
    if params.rho == 0.0 {
        return Err(Error::Precondition(
            "rho = 0 gives a degenerate stationary ratio".into(),
        ));
    }
    let f = |d: f64| stationary_ratio(params, d).map(|v| v - 1.0).unwrap_or(f64::NAN);
    if f(0.0) >= 0.0 {
        return Err(Error::Precondition(format!(
            "stationary ratio at delta = 0 is already {} >= 1; the delay a0 = {} is too large",
            f(0.0) + 1.0,
            params.a0
        )));
    }
    let hi = expand_upper(f, 1.0, MAX_DOUBLINGS)?;
    Ok(bisect_increasing(f, 0.0, hi, ROOT_TOL))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfinitePath {
    pub steady: SteadyState,
    pub prices: Vec<f64>,
    pub ages: Vec<f64>,
}

/// Stationary price rule applied to the closed-form planned age
/// `EA(t) = r^t A(0) + c (1 - r^t) / (1 - r)`, for `t = 0..=t_max`.
pub fn price_infinite(params: &ZoneParams, delta: f64, t_max: usize) -> Result<InfinitePath> {
    let steady = steady_state(params, delta)?;
    let (rho, k) = (params.rho, params.kappa(delta));
    let x = rho * steady.q * k;
    let r = 1.0 / (1.0 + x);
    let c = (2.0 - rho * steady.m * k) / (2.0 + 2.0 * x);
    let mut ages = Vec::with_capacity(t_max + 1);
    let mut rt = 1.0;
    for _ in 0..=t_max {
        ages.push(rt * params.a_init + c * (1.0 - rt) / (1.0 - r));
        rt *= r;
    }
    let prices = ages
        .iter()
        .map(|&ea| raw_price(rho, k, delta, steady.q, steady.m, ea).clamp(0.0, params.b))
        .collect();
    Ok(InfinitePath {
        steady,
        prices,
        ages,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub horizon: usize,
    /// Estimator shared by both policies.
    pub delta: f64,
    pub u_t: f64,
    pub u_inf_t: f64,
    pub gap: f64,
}

/// Discounted cost of the finite-horizon plan versus the stationary rule run
/// for the same horizon, both evaluated in the linearized program of the
/// finite plan's estimator. The stationary price is forced to 0 at `T`.
pub fn epsilon_gap(params: &ZoneParams, opts: &FixedPointOptions) -> Result<GapPoint> {
    require_discounted(params.rho)?;
    let plan = solve_delta_fixed_point(params, opts)?;
    let delta = plan.delta;
    let n = params.horizon;
    let steady = steady_state(params, delta)?;
    let k = params.kappa(delta);
    let mut prices = vec![0.0; n + 1];
    let mut ages = vec![params.a_init; n + 1];
    for t in 0..n {
        prices[t] = raw_price(params.rho, k, delta, steady.q, steady.m, ages[t]).clamp(0.0, params.b);
        ages[t + 1] = linearized_step(ages[t], delta, params.alpha, params.b, prices[t]);
    }
    let u_inf_t = discounted_cost(params, &prices, &ages)?;
    Ok(GapPoint {
        horizon: n,
        delta,
        u_t: plan.cost,
        u_inf_t,
        gap: u_inf_t - plan.cost,
    })
}

pub fn gap_sweep(params: &ZoneParams, horizons: &[usize], opts: &FixedPointOptions) -> Result<Vec<GapPoint>> {
    horizons
        .iter()
        .map(|&horizon| epsilon_gap(&ZoneParams { horizon, ..*params }, opts))
        .collect()
}
