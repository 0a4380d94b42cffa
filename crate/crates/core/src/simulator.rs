//! Stochastic ground truth and a brute-force price oracle.
//!
//! Replication `r` of a Monte Carlo run uses a ChaCha8 generator seeded with
//! `base_seed + r`, so results do not depend on how work is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::single_zone::{original_cost, ZoneParams};

/// Distribution of the per-sample transmission delay.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// Always `a0`.
    #[default]
    Constant,
    /// Uniform on `[0, 2 a0]`, mean `a0`.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rollout {
    pub ages: Vec<f64>,
    pub accepted: Vec<bool>,
    /// `sum_t rho^t (A(t)^2 + paid(t))`.
    pub cost: f64,
}

fn check_policy(params: &ZoneParams, prices: &[f64]) -> Result<()> {
    params.validate()?;
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

/// One realization of the age process under an open-loop price path.
pub fn rollout(params: &ZoneParams, prices: &[f64], delay: DelayModel, seed: u64) -> Result<Rollout> {
    check_policy(params, prices)?;
    Ok(simulate(params, prices, delay, &mut ChaCha8Rng::seed_from_u64(seed)))
}

fn simulate(params: &ZoneParams, prices: &[f64], delay: DelayModel, rng: &mut ChaCha8Rng) -> Rollout {
    let n = params.horizon;
    let mut ages = Vec::with_capacity(n + 1);
    let mut accepted = Vec::with_capacity(n + 1);
    let mut age = params.a_init;
    let mut disc = 1.0;
    let mut cost = 0.0;
    for (t, &p) in prices.iter().enumerate() {
        ages.push(age);
        let arrived = rng.gen::<f64>() < params.alpha;
        let ok = arrived && params.cost.inverse_unchecked(rng.gen::<f64>()) <= p;
        let paid = if ok { p } else { 0.0 };
        cost += disc * (age * age + paid);
        disc *= params.rho;
        accepted.push(ok);
        if t < n {
            age = if ok {
                match delay {
                    DelayModel::Constant => params.a0,
                    DelayModel::Uniform => rng.gen_range(0.0..=2.0 * params.a0),
                }
            } else {
                age + 1.0
            };
        }
    }
    Rollout {
        ages,
        accepted,
        cost,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RolloutStats {
    pub replications: usize,
    pub mean_age: Vec<f64>,
    /// Standard error of `mean_age`.
    pub std_error: Vec<f64>,
    pub mean_sq_age: Vec<f64>,
    pub acceptances: Vec<u64>,
    pub mean_cost: f64,
    pub cost_std_error: f64,
}

/// Running mean and sum of squared deviations, merged pairwise.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

#[derive(Debug, Clone)]
struct Partial {
    age: Vec<Moments>,
    sq: Vec<Moments>,
    acc: Vec<u64>,
    cost: Moments,
}

impl Partial {
    fn new(len: usize) -> Self {
        Self {
            age: vec![Moments::default(); len],
            sq: vec![Moments::default(); len],
            acc: vec![0; len],
            cost: Moments::default(),
        }
    }

    fn merge(&mut self, o: &Partial) {
        for (a, b) in self.age.iter_mut().zip(&o.age) {
            a.merge(b);
        }
        for (a, b) in self.sq.iter_mut().zip(&o.sq) {
            a.merge(b);
        }
        for (a, b) in self.acc.iter_mut().zip(&o.acc) {
            *a += b;
        }
        self.cost.merge(&o.cost);
    }
}

const CHUNK: u64 = 1024;

/// Aggregates `reps` rollouts with seeds `base_seed..base_seed + reps`.
pub fn monte_carlo(
    params: &ZoneParams,
    prices: &[f64],
    delay: DelayModel,
    reps: usize,
    base_seed: u64,
) -> Result<RolloutStats> {
    check_policy(params, prices)?;
    if reps == 0 {
        return Err(Error::Precondition("need at least one replication".into()));
    }
    let len = prices.len();
    let reps = reps as u64;
    let chunks = reps.div_ceil(CHUNK);
    // Chunks are reduced in index order, so the result is schedule-independent.
    let parts: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut part = Partial::new(len);
            for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(r));
                let ro = simulate(params, prices, delay, &mut rng);
                for t in 0..len {
                    part.age[t].push(ro.ages[t]);
                    part.sq[t].push(ro.ages[t] * ro.ages[t]);
                    part.acc[t] += ro.accepted[t] as u64;
                }
                part.cost.push(ro.cost);
            }
            part
        })
        .collect();
    let mut total = Partial::new(len);
    for p in &parts {
        total.merge(p);
    }
    Ok(RolloutStats {
        replications: reps as usize,
        mean_age: total.age.iter().map(|m| m.mean).collect(),
        std_error: total.age.iter().map(Moments::std_error).collect(),
        mean_sq_age: total.sq.iter().map(|m| m.mean).collect(),
        acceptances: total.acc,
        mean_cost: total.cost.mean,
        cost_std_error: total.cost.std_error(),
    })
}

pub const DEFAULT_CANDIDATE_GUARD: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub tau: f64,
    pub best_prices: Vec<f64>,
    pub best_cost: f64,
    pub comparison_cost: f64,
    /// `comparison_cost - best_cost`, never negative.
    pub gap: f64,
    pub relative_gap: f64,
    /// Number of grid sequences covered by the search.
    pub candidates: f64,
}

/// Minimizes the original-dynamics objective over all open-loop price
/// sequences on the grid `{0, tau, ..., floor(b/tau) tau}` (with `p(T) = 0`).
/// The comparison sequence is an extra candidate, so `gap >= 0`.
///
/// The search is a depth-first enumeration that shares prefix work and cuts a
/// branch once its partial cost reaches the best complete cost found, which
/// is exact because every remaining term is nonnegative. Ties go to the
/// lexicographically smallest grid sequence.
pub fn exhaustive_oracle(params: &ZoneParams, tau: f64, comparison: &[f64], guard: f64) -> Result<OracleResult> {
    check_policy(params, comparison)?;
    if !(tau.is_finite() && tau > 0.0 && tau <= params.b) {
        return Err(Error::Domain {
            what: "tau",
            value: tau,
            lo: 0.0,
            hi: params.b,
        });
    }
    let levels = (params.b / tau + 1e-9).floor() as usize + 1;
    let n = params.horizon;
    let candidates = (levels as f64).powi(n as i32);
    if candidates > guard {
        return Err(Error::TooManyCandidates {
            candidates,
            limit: guard,
        });
    }
    let grid: Vec<f64> = (0..levels).map(|k| (k as f64 * tau).min(params.b)).collect();
    let accept: Vec<f64> = grid.iter().map(|&p| params.alpha * params.cost.cdf_unchecked(p)).collect();
    let pay: Vec<f64> = grid.iter().zip(&accept).map(|(p, q)| p * q).collect();
    let search = Search {
        rho: params.rho,
        a0: params.a0,
        horizon: n,
        accept: &accept,
        pay: &pay,
    };

    let comparison_cost = original_cost(params, comparison)?;
    let first: Vec<(f64, Vec<usize>)> = (0..levels)
        .into_par_iter()
        .map(|k0| {
            let mut path = vec![k0; n];
            let mut best = (f64::INFINITY, Vec::new());
            search.descend(0, params.a_init, 0.0, 1.0, &mut path, &mut best);
            best
        })
        .collect();
    let (grid_cost, grid_path) = first
        .into_iter()
        .fold((f64::INFINITY, Vec::new()), |acc, cand| {
            if cand.0 < acc.0 {
                cand
            } else {
                acc
            }
        });

    let mut best_prices: Vec<f64> = grid_path.iter().map(|&k| grid[k]).collect();
    best_prices.push(0.0);
    // Re-evaluate the winner with the same routine as the comparison.
    let mut best_cost = original_cost(params, &best_prices)?;
    debug_assert!((best_cost - grid_cost).abs() <= 1e-9 * grid_cost.max(1.0));
    if comparison_cost < best_cost {
        best_cost = comparison_cost;
        best_prices = comparison.to_vec();
    }
    let gap = comparison_cost - best_cost;
    Ok(OracleResult {
        tau,
        best_prices,
        best_cost,
        comparison_cost,
        gap,
        relative_gap: if best_cost > 0.0 { gap / best_cost } else { 0.0 },
        candidates,
    })
}

struct Search<'a> {
    rho: f64,
    a0: f64,
    horizon: usize,
    accept: &'a [f64],
    pay: &'a [f64],
}

impl Search<'_> {
    /// `path[..=t]` fixes prices up to slot `t`; `path[0]` is preset by the caller.
    fn descend(&self, t: usize, ea: f64, acc: f64, disc: f64, path: &mut [usize], best: &mut (f64, Vec<usize>)) {
        let choices: Vec<usize> = if t == 0 {
            vec![path[0]]
        } else {
            (0..self.accept.len()).collect()
        };
        let here = acc + disc * ea * ea;
        for k in choices {
            let q = self.accept[k];
            let cost = here + disc * self.pay[k];
            if cost >= best.0 {
                // pay[k] grows with k, so later choices are no better here
                break;
            }
            let next = ea - (ea - self.a0) * q + (1.0 - q);
            path[t] = k;
            if t + 1 == self.horizon {
                let total = cost + disc * self.rho * next * next;
                if total < best.0 {
                    *best = (total, path.to_vec());
                }
            } else {
                self.descend(t + 1, next, cost, disc * self.rho, path, best);
            }
        }
    }
}
