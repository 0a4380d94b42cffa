//! Decentralized pricing across coupled zones.
//!
//! Each zone cares about a weighted mix of its own age and the average age of
//! all zones. The average is replaced by a mean-field path `phi`, so every
//! zone solves a single-zone-like problem; `phi` and the per-zone estimators
//! are then iterated jointly to a fixed point.

use rand::distributions::WeightedIndex;
use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Checker, Error, Result};
use crate::single_zone::{
    check_shared, check_zone, discounted_average, kappa, linearized_step, raw_price, ZoneParams,
};

/// Parameters every zone shares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharedParams {
    pub rho: f64,
    pub b: f64,
    pub a0: f64,
    pub horizon: usize,
}

impl SharedParams {
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        check_shared(&mut c, "shared.", self.b, self.rho, self.a0, self.horizon);
        c.finish()
    }

    pub fn zone_params(&self, alpha: f64, a_init: f64) -> Result<ZoneParams> {
        ZoneParams::new(alpha, self.b, self.rho, self.a0, a_init, self.horizon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub alpha: f64,
    pub a_init: f64,
    /// Weight on the zone's own age; `1 - w` goes to the population average.
    pub w: f64,
}

fn check_spec(c: &mut Checker, prefix: &str, z: &ZoneSpec) {
    check_zone(c, prefix, z.alpha, z.a_init);
    c.check(
        (0.0..=1.0).contains(&z.w),
        &format!("{prefix}w"),
        "must lie in [0, 1]",
    );
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiZoneScenario {
    pub shared: SharedParams,
    pub zones: Vec<ZoneSpec>,
}

impl MultiZoneScenario {
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        check_shared(&mut c, "shared.", self.shared.b, self.shared.rho, self.shared.a0, self.shared.horizon);
        c.check(!self.zones.is_empty(), "zones", "must contain at least one zone");
        for (i, z) in self.zones.iter().enumerate() {
            check_spec(&mut c, &format!("zones[{i}]."), z);
        }
        c.finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeanFieldOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight on the new iterate for both `phi` and the estimators.
    pub relaxation: f64,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 10_000,
            relaxation: 1.0,
        }
    }
}

impl MeanFieldOptions {
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        c.check(self.tol.is_finite() && self.tol > 0.0, "tol", "must be > 0");
        c.check(self.max_iter >= 1, "max_iter", "must be >= 1");
        c.check(
            self.relaxation > 0.0 && self.relaxation <= 1.0,
            "relaxation",
            "must lie in (0, 1]",
        );
        c.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonePlan {
    pub delta: f64,
    pub q: Vec<f64>,
    pub m: Vec<f64>,
    pub prices: Vec<f64>,
    /// Planned expected age under the linearized dynamics.
    pub ages: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub deltas: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanFieldSolution {
    pub phi: Vec<f64>,
    pub zones: Vec<ZonePlan>,
    pub iterations: usize,
    /// Aggregate change of the estimators in the last iteration.
    pub delta_residual: f64,
    /// `sum_t |phi_new(t) - phi(t)|` in the last iteration.
    pub phi_residual: f64,
    /// Estimators entering each iteration.
    pub history: Vec<IterationRecord>,
}

/// Marginal arrival probability of zone `zone` from a joint pmf over arrival
/// indicator tuples. The result is normalized by the pmf's total mass.
pub fn marginal_arrival_rate(joint: &[(Vec<bool>, f64)], zone: usize) -> Result<f64> {
    let mut c = Checker::default();
    c.check(!joint.is_empty(), "pmf", "must not be empty");
    for (i, (s, p)) in joint.iter().enumerate() {
        c.check(zone < s.len(), &format!("pmf[{i}]"), format!("has no zone {zone}"));
        c.check(p.is_finite() && *p >= 0.0, &format!("pmf[{i}]"), "probability must be >= 0");
    }
    c.finish()?;
    let total: f64 = joint.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(vec![crate::Violation::new(
            "pmf",
            format!("probabilities sum to {total}, not 1"),
        )]));
    }
    let hit: f64 = joint.iter().filter(|(s, _)| s[zone]).map(|(_, p)| p).sum();
    Ok(hit / total)
}

/// Backward recursions with the mean-field terms:
/// `Q[T] = w^2`, `M[T] = 2 w (1 - w) phi(T)`.
pub fn mf_backward_coeffs(
    shared: &SharedParams,
    zone: &ZoneSpec,
    delta: f64,
    phi: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_phi(shared, phi)?;
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Domain {
            what: "delta",
            value: delta,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok(backward(shared, zone, delta, phi))
}

fn check_phi(shared: &SharedParams, phi: &[f64]) -> Result<()> {
    if phi.len() == shared.horizon + 1 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "phi length {} != horizon + 1 = {}",
            phi.len(),
            shared.horizon + 1
        )))
    }
}

fn backward(shared: &SharedParams, zone: &ZoneSpec, delta: f64, phi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = shared.horizon;
    let rho = shared.rho;
    let k = kappa(zone.alpha, shared.b, delta);
    let w = zone.w;
    let cross = 2.0 * w * (1.0 - w);
    let mut q = vec![0.0; n + 1];
    let mut m = vec![0.0; n + 1];
    q[n] = w * w;
    m[n] = cross * phi[n];
    for t in (0..n).rev() {
        let den = 1.0 + rho * q[t + 1] * k;
        q[t] = w * w + rho * q[t + 1] / den;
        m[t] = cross * phi[t] + rho * (m[t + 1] + 2.0 * q[t + 1]) / den;
    }
    (q, m)
}

/// Forward pass in the linearized dynamics, prices clamped to `[0, b]`.
pub fn mf_price_and_age(
    shared: &SharedParams,
    zone: &ZoneSpec,
    delta: f64,
    q: &[f64],
    m: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = shared.horizon;
    if q.len() != n + 1 || m.len() != n + 1 {
        return Err(Error::Precondition(format!(
            "coefficient length must be horizon + 1 = {}",
            n + 1
        )));
    }
    Ok(forward(shared, zone, delta, q, m))
}

fn forward(shared: &SharedParams, zone: &ZoneSpec, delta: f64, q: &[f64], m: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = shared.horizon;
    let k = kappa(zone.alpha, shared.b, delta);
    let mut p = vec![0.0; n + 1];
    let mut ea = vec![0.0; n + 1];
    ea[0] = zone.a_init;
    for t in 0..n {
        p[t] = raw_price(shared.rho, k, delta, q[t + 1], m[t + 1], ea[t]).clamp(0.0, shared.b);
        ea[t + 1] = linearized_step(ea[t], delta, zone.alpha, shared.b, p[t]);
    }
    (p, ea)
}

fn plan(shared: &SharedParams, zone: &ZoneSpec, delta: f64, phi: &[f64]) -> ZonePlan {
    let (q, m) = backward(shared, zone, delta, phi);
    let (prices, ages) = forward(shared, zone, delta, &q, &m);
    ZonePlan {
        delta,
        q,
        m,
        prices,
        ages,
    }
}

/// Joint iteration over `phi` and the per-zone estimators.
///
/// `mass` weights each zone in the `phi` update and in the estimator
/// residual; `phi(0)` is pinned to the weighted mean initial age.
fn iterate(
    shared: &SharedParams,
    zones: &[ZoneSpec],
    mass: &[f64],
    delta_weight: &[f64],
    opts: &MeanFieldOptions,
) -> Result<MeanFieldSolution> {
    let n = shared.horizon;
    let lam = opts.relaxation;
    let mut deltas = vec![0.0; zones.len()];
    let mut phi = vec![0.0; n + 1];
    phi[0] = zones.iter().zip(mass).map(|(z, w)| w * z.a_init).sum();
    let mut history = Vec::new();
    let (mut e1, mut e2) = (f64::INFINITY, f64::INFINITY);

    for it in 1..=opts.max_iter {
        history.push(IterationRecord {
            deltas: deltas.clone(),
            phi: phi.clone(),
        });
        let plans: Vec<ZonePlan> = zones
            .par_iter()
            .zip(deltas.par_iter())
            .map(|(z, &d)| plan(shared, z, d, &phi))
            .collect();

        let next_deltas: Vec<f64> = plans
            .iter()
            .map(|p| discounted_average(&p.ages, shared.rho, shared.a0))
            .collect();
        let mut next_phi = vec![0.0; n + 1];
        next_phi[0] = phi[0];
        for (p, w) in plans.iter().zip(mass) {
            for t in 1..=n {
                next_phi[t] += w * p.ages[t];
            }
        }
        e1 = next_deltas
            .iter()
            .zip(&deltas)
            .zip(delta_weight)
            .map(|((a, b), w)| w * (a - b).abs())
            .sum();
        e2 = next_phi.iter().zip(&phi).map(|(a, b)| (a - b).abs()).sum();
        if e1 <= opts.tol && e2 <= opts.tol {
            return Ok(MeanFieldSolution {
                phi,
                zones: plans,
                iterations: it,
                delta_residual: e1,
                phi_residual: e2,
                history,
            });
        }
        for (d, nd) in deltas.iter_mut().zip(&next_deltas) {
            *d = (*d + lam * (nd - *d)).max(0.0);
        }
        for t in 1..=n {
            phi[t] = (phi[t] + lam * (next_phi[t] - phi[t])).max(0.0);
        }
    }
    Err(Error::MeanFieldNoConvergence {
        iterations: opts.max_iter,
        delta_residual: e1,
        phi_residual: e2,
    })
}

/// Exact-population mode: `phi` tracks the plain average over the zones.
pub fn solve_mean_field(scenario: &MultiZoneScenario, opts: &MeanFieldOptions) -> Result<MeanFieldSolution> {
    scenario.validate()?;
    opts.validate()?;
    let n = scenario.zones.len();
    let mass = vec![1.0 / n as f64; n];
    let ones = vec![1.0; n];
    iterate(&scenario.shared, &scenario.zones, &mass, &ones, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub alpha: f64,
    pub a_init: f64,
    pub mass: f64,
}

/// Discrete joint law of `(alpha, a_init)` over a large population of zones
/// that share the weight `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationDistribution {
    pub w: f64,
    pub atoms: Vec<Atom>,
}

impl PopulationDistribution {
    pub fn validate(&self) -> Result<()> {
        let mut c = Checker::default();
        c.check((0.0..=1.0).contains(&self.w), "population.w", "must lie in [0, 1]");
        c.check(!self.atoms.is_empty(), "population.atoms", "must not be empty");
        for (i, a) in self.atoms.iter().enumerate() {
            let prefix = format!("population.atoms[{i}].");
            check_zone(&mut c, &prefix, a.alpha, a.a_init);
            c.check(a.mass.is_finite() && a.mass >= 0.0, &format!("{prefix}mass"), "must be >= 0");
        }
        let total: f64 = self.atoms.iter().map(|a| a.mass).sum();
        c.check(
            (total - 1.0).abs() <= 1e-12,
            "population.atoms",
            format!("masses sum to {total}, not 1"),
        );
        c.finish()
    }

    pub fn zone(&self, k: usize) -> ZoneSpec {
        ZoneSpec {
            alpha: self.atoms[k].alpha,
            a_init: self.atoms[k].a_init,
            w: self.w,
        }
    }

    /// Draws `n` zones i.i.d. from the atoms; returns atom indices.
    pub fn sample_zones(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
        self.validate()?;
        let dist = WeightedIndex::new(self.atoms.iter().map(|a| a.mass))
            .map_err(|e| Error::Precondition(format!("cannot sample atoms: {e}")))?;
        Ok((0..n).map(|_| dist.sample(rng)).collect())
    }
}

/// Large-population mode: `phi` is the mass-weighted expectation of the
/// per-atom planned ages. Plans are returned per atom.
pub fn large_population_phi(
    dist: &PopulationDistribution,
    shared: &SharedParams,
    opts: &MeanFieldOptions,
) -> Result<MeanFieldSolution> {
    shared.validate()?;
    dist.validate()?;
    opts.validate()?;
    let zones: Vec<ZoneSpec> = (0..dist.atoms.len()).map(|k| dist.zone(k)).collect();
    let mass: Vec<f64> = dist.atoms.iter().map(|a| a.mass).collect();
    iterate(shared, &zones, &mass, &mass, opts)
}

/// Best response of one zone to a fixed mean-field path: the estimator
/// fixed point with `phi` held constant.
pub fn best_response_plan(
    shared: &SharedParams,
    zone: &ZoneSpec,
    phi: &[f64],
    opts: &MeanFieldOptions,
) -> Result<ZonePlan> {
    shared.validate()?;
    opts.validate()?;
    let mut c = Checker::default();
    check_spec(&mut c, "zone.", zone);
    c.finish()?;
    check_phi(shared, phi)?;
    let mut delta = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let p = plan(shared, zone, delta, phi);
        let next = discounted_average(&p.ages, shared.rho, shared.a0);
        residual = (next - delta).abs();
        if residual <= opts.tol {
            return Ok(p);
        }
        delta = (delta + opts.relaxation * (next - delta)).max(0.0);
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashGap {
    pub epsilon: f64,
    pub mu: Vec<f64>,
    /// `sup_t mu(t) * sqrt((1 - rho^(T+1)) / (1 - rho))`.
    pub bound: f64,
}

/// Gap between the mean-field path and the realized average of `ages`.
pub fn nash_gap(phi: &[f64], ages: &[&[f64]], rho: f64) -> Result<NashGap> {
    if ages.is_empty() {
        return Err(Error::Precondition("need at least one age path".into()));
    }
    if ages.iter().any(|a| a.len() != phi.len()) {
        return Err(Error::Precondition("age paths must match phi in length".into()));
    }
    let n = ages.len() as f64;
    let mu: Vec<f64> = (0..phi.len())
        .map(|t| (phi[t] - ages.iter().map(|a| a[t]).sum::<f64>() / n).abs())
        .collect();
    let mut disc = 1.0;
    let mut s = 0.0;
    for m in &mu {
        s += disc * m * m;
        disc *= rho;
    }
    let sup = mu.iter().cloned().fold(0.0, f64::max);
    let horizon_mass = if rho < 1.0 {
        (1.0 - disc) / (1.0 - rho)
    } else {
        phi.len() as f64
    };
    Ok(NashGap {
        epsilon: s.sqrt(),
        mu,
        bound: sup * horizon_mass.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashPoint {
    pub n: usize,
    pub epsilon: f64,
    pub max_mu: f64,
    pub bound: f64,
}

/// Samples `n` zones for every entry of `ns` and measures how well the
/// large-population `phi` predicts their average planned age.
///
/// Every `n` draws from a fresh generator seeded with `seed`, so the samples
/// are nested prefixes of one stream. A sampled zone's best response is its
/// atom's plan, since the plan depends only on `(alpha, a_init, w, phi)`.
pub fn nash_sweep(
    dist: &PopulationDistribution,
    solution: &MeanFieldSolution,
    rho: f64,
    ns: &[usize],
    seed: u64,
) -> Result<Vec<NashPoint>> {
    if solution.zones.len() != dist.atoms.len() {
        return Err(Error::Precondition(
            "solution must come from large_population_phi on this distribution".into(),
        ));
    }
    ns.iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Precondition("sample size must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = dist.sample_zones(n, &mut rng)?;
            let ages: Vec<&[f64]> = idx.iter().map(|&k| solution.zones[k].ages.as_slice()).collect();
            let g = nash_gap(&solution.phi, &ages, rho)?;
            Ok(NashPoint {
                n,
                epsilon: g.epsilon,
                max_mu: g.mu.iter().cloned().fold(0.0, f64::max),
                bound: g.bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OriginalEvaluation {
    /// Per-zone expected age in the original dynamics.
    pub ages: Vec<Vec<f64>>,
    pub average: Vec<f64>,
    /// `max_t |phi(t) - average(t)|`.
    pub max_deviation: f64,
}

/// Runs each zone's planned prices through the nonlinear expected dynamics.
pub fn evaluate_original_mf(scenario: &MultiZoneScenario, solution: &MeanFieldSolution) -> Result<OriginalEvaluation> {
    scenario.validate()?;
    if solution.zones.len() != scenario.zones.len() {
        return Err(Error::Precondition("solution and scenario zone counts differ".into()));
    }
    let ages = scenario
        .zones
        .iter()
        .zip(&solution.zones)
        .map(|(z, p)| {
            let zp = scenario.shared.zone_params(z.alpha, z.a_init)?;
            crate::single_zone::age_path_original(&zp, &p.prices)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = ages.len() as f64;
    let average: Vec<f64> = (0..=scenario.shared.horizon)
        .map(|t| ages.iter().map(|a| a[t]).sum::<f64>() / n)
        .collect();
    let max_deviation = average
        .iter()
        .zip(&solution.phi)
        .map(|(a, f)| (a - f).abs())
        .fold(0.0, f64::max);
    Ok(OriginalEvaluation {
        ages,
        average,
        max_deviation,
    })
}

/// `sum_t rho^t [(w EA_i + (1 - w) avg_j EA_j)^2 + alpha_i p_i^2 / b]`.
pub fn zone_cost(scenario: &MultiZoneScenario, zone: usize, prices: &[f64], ages: &[&[f64]]) -> Result<f64> {
    let z = scenario
        .zones
        .get(zone)
        .ok_or_else(|| Error::Precondition(format!("no zone {zone}")))?;
    if ages.len() != scenario.zones.len() {
        return Err(Error::Precondition("need one age path per zone".into()));
    }
    let len = prices.len();
    if ages.iter().any(|a| a.len() != len) {
        return Err(Error::Precondition("age and price paths differ in length".into()));
    }
    let SharedParams { rho, b, .. } = scenario.shared;
    let n = ages.len() as f64;
    let mut disc = 1.0;
    let mut total = 0.0;
    for t in 0..len {
        let avg = ages.iter().map(|a| a[t]).sum::<f64>() / n;
        let mix = z.w * ages[zone][t] + (1.0 - z.w) * avg;
        total += disc * (mix * mix + z.alpha * prices[t] * prices[t] / b);
        disc *= rho;
    }
    Ok(total)
}
