//! Experiment configuration: one JSON document per run, tagged by `kind`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use aoi_core::{
    Atom, CostDistribution, DelayModel, Error, FixedPointOptions, LinearCdf, MeanFieldOptions,
    MultiZoneScenario, PopulationDistribution, SharedParams, Violation, ZoneParams, ZoneSpec,
};

use crate::error::CliError;

pub const KINDS: &[&str] = &[
    "single-zone",
    "steady-state",
    "gap-sweep",
    "mean-field",
    "population",
    "nash-sweep",
    "simulate",
    "oracle",
    "cost-fit",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    SingleZone(ZoneConfig),
    SteadyState(SteadyStateConfig),
    GapSweep(GapSweepConfig),
    MeanField(MeanFieldConfig),
    Population(PopulationConfig),
    NashSweep(NashSweepConfig),
    Simulate(SimulateConfig),
    Oracle(OracleConfig),
    CostFit(CostFitConfig),
}

/// Cost distribution as written in a config; `b` defaults to the scenario's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    TruncatedNormal {
        mu: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
    Linear {
        a1: f64,
        a2: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        b: Option<f64>,
    },
}

impl CostSpec {
    fn b(&self) -> Option<f64> {
        match *self {
            Self::Uniform { b } | Self::TruncatedNormal { b, .. } | Self::Linear { b, .. } => b,
        }
    }

    pub fn resolve(&self, default_b: f64) -> CostDistribution {
        let b = self.b().unwrap_or(default_b);
        match *self {
            Self::Uniform { .. } => CostDistribution::Uniform { b },
            Self::TruncatedNormal { mu, sigma, .. } => CostDistribution::TruncatedNormal {
                mean: mu,
                std_dev: sigma,
                b,
            },
            Self::Linear { a1, a2, .. } => CostDistribution::Linear(LinearCdf { a1, a2, b }),
        }
    }
}

/// Single-zone scenario plus solver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub alpha: f64,
    pub b: f64,
    pub rho: f64,
    pub a0: f64,
    pub a_init: f64,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
}

impl ZoneConfig {
    pub fn params(&self) -> ZoneParams {
        ZoneParams {
            alpha: self.alpha,
            b: self.b,
            rho: self.rho,
            a0: self.a0,
            a_init: self.a_init,
            horizon: self.horizon,
            cost: self
                .cost
                .map_or(CostDistribution::Uniform { b: self.b }, |c| c.resolve(self.b)),
        }
    }

    pub fn options(&self) -> FixedPointOptions {
        let d = FixedPointOptions::default();
        FixedPointOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            initial_delta: self.initial_delta.unwrap_or(d.initial_delta),
            relaxation: self.relaxation.unwrap_or(d.relaxation),
        }
    }

    fn check(&self, prefix: &str, v: &mut Vec<Violation>) -> Result<(), CliError> {
        let p = self.params();
        absorb(p.validate(), prefix, v)?;
        absorb(self.options().validate(), prefix, v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateConfig {
    pub scenario: ZoneConfig,
    /// Length of the emitted path; defaults to 500 slots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    /// Estimator to price at; defaults to the infinite-horizon fixed point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapSweepConfig {
    pub scenario: ZoneConfig,
    pub horizons: Vec<usize>,
    /// Repeats the sweep for each discount factor, one CSV per value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhos: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFieldMode {
    #[default]
    Exact,
    Population,
}

/// One-dimensional law used to draw atom parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarDist {
    Constant {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Choice {
        values: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl ScalarDist {
    fn check(&self, field: &str, v: &mut Vec<Violation>) {
        match self {
            Self::Constant { value } => {
                push_if(!value.is_finite(), field, "value must be finite", v);
            }
            Self::Uniform { lo, hi } => {
                push_if(!(lo.is_finite() && hi.is_finite() && lo <= hi), field, "needs finite lo <= hi", v);
            }
            Self::Choice { values, weights } => {
                push_if(values.is_empty(), field, "values must not be empty", v);
                push_if(values.iter().any(|x| !x.is_finite()), field, "values must be finite", v);
                if let Some(w) = weights {
                    push_if(w.len() != values.len(), field, "weights must match values in length", v);
                    push_if(
                        w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().sum::<f64>() <= 0.0,
                        field,
                        "weights must be >= 0 with a positive sum",
                        v,
                    );
                }
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            Self::Choice { values, weights } => {
                let i = match weights {
                    Some(w) => WeightedIndex::new(w).expect("validated weights").sample(rng),
                    None => rng.gen_range(0..values.len()),
                };
                values[i]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub n: usize,
    pub seed: u64,
    pub alpha_dist: ScalarDist,
    pub age_dist: ScalarDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + step * i as f64).collect()
    }

    fn check(&self, field: &str, v: &mut Vec<Violation>) {
        push_if(
            !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi),
            field,
            "needs finite lo <= hi",
            v,
        );
        push_if(self.points == 0, field, "points must be >= 1", v);
    }
}

/// Uniform product grid over `(alpha, a_init)` with equal masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub alpha: Axis,
    pub a_init: Axis,
}

/// A discretized population law: explicit atoms, a uniform grid, or an
/// i.i.d. sample of equal-mass atoms. Exactly one must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<Atom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<SampleSpec>,
}

impl PopulationSpec {
    fn check(&self, prefix: &str, v: &mut Vec<Violation>) -> Result<(), CliError> {
        let given = [self.atoms.is_some(), self.grid.is_some(), self.sample.is_some()];
        let count = given.iter().filter(|g| **g).count();
        if count != 1 {
            push(prefix.trim_end_matches('.'), "exactly one of atoms, grid or sample is required", v);
            return Ok(());
        }
        if let Some(g) = &self.grid {
            g.alpha.check(&format!("{prefix}grid.alpha"), v);
            g.a_init.check(&format!("{prefix}grid.a_init"), v);
        }
        if let Some(s) = &self.sample {
            push_if(s.n == 0, &format!("{prefix}sample.n"), "must be >= 1", v);
            s.alpha_dist.check(&format!("{prefix}sample.alpha_dist"), v);
            s.age_dist.check(&format!("{prefix}sample.age_dist"), v);
        }
        if v.is_empty() {
            absorb(self.distribution().validate(), prefix, v)?;
        }
        Ok(())
    }

    /// Atom set this spec describes. Assumes the spec has been validated.
    pub fn distribution(&self) -> PopulationDistribution {
        let atoms = if let Some(a) = &self.atoms {
            a.clone()
        } else if let Some(g) = &self.grid {
            let (alphas, ages) = (g.alpha.values(), g.a_init.values());
            let mass = 1.0 / (alphas.len() * ages.len()) as f64;
            alphas
                .iter()
                .flat_map(|&alpha| ages.iter().map(move |&a_init| Atom { alpha, a_init, mass }))
                .collect()
        } else if let Some(s) = &self.sample {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            let mass = 1.0 / s.n as f64;
            (0..s.n)
                .map(|_| {
                    let alpha = s.alpha_dist.sample(&mut rng);
                    let a_init = s.age_dist.sample(&mut rng);
                    Atom { alpha, a_init, mass }
                })
                .collect()
        } else {
            Vec::new()
        };
        PopulationDistribution { w: self.w, atoms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldConfig {
    pub shared: SharedParams,
    #[serde(default)]
    pub zones: Vec<ZoneSpec>,
    #[serde(default)]
    pub mode: MeanFieldMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    /// Also evaluate the plans in the original nonlinear dynamics.
    #[serde(default)]
    pub evaluate_original: bool,
}

impl MeanFieldConfig {
    pub fn options(&self) -> MeanFieldOptions {
        mf_options(self.tol, self.max_iter, self.relaxation)
    }

    pub fn scenario(&self) -> MultiZoneScenario {
        MultiZoneScenario {
            shared: self.shared,
            zones: self.zones.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub shared: SharedParams,
    pub population: PopulationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
}

impl PopulationConfig {
    pub fn options(&self) -> MeanFieldOptions {
        mf_options(self.tol, self.max_iter, self.relaxation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NashSweepConfig {
    pub shared: SharedParams,
    pub population: PopulationSpec,
    /// Sample sizes.
    pub ns: Vec<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
}

impl NashSweepConfig {
    pub fn options(&self) -> MeanFieldOptions {
        mf_options(self.tol, self.max_iter, self.relaxation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ZoneConfig,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub delay: DelayModel,
    /// Prices for `t = 0..=T`; when absent the approximate plan is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub scenario: ZoneConfig,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<f64>,
    /// Runs the oracle at each horizon instead of `scenario.horizon`,
    /// always against the approximate plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
    /// Comparison prices; when absent the approximate plan is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFitConfig {
    pub b: f64,
    pub cost: CostSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
}

impl CostFitConfig {
    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(aoi_core::cost_model::DEFAULT_FIT_POINTS)
    }
}

fn mf_options(tol: Option<f64>, max_iter: Option<usize>, relaxation: Option<f64>) -> MeanFieldOptions {
    let d = MeanFieldOptions::default();
    MeanFieldOptions {
        tol: tol.unwrap_or(d.tol),
        max_iter: max_iter.unwrap_or(d.max_iter),
        relaxation: relaxation.unwrap_or(d.relaxation),
    }
}

fn push(field: &str, message: &str, v: &mut Vec<Violation>) {
    v.push(Violation {
        field: field.to_string(),
        message: message.to_string(),
    });
}

fn push_if(bad: bool, field: &str, message: &str, v: &mut Vec<Violation>) {
    if bad {
        push(field, message, v);
    }
}

/// Folds a core validation result into `v`, prefixing field names.
fn absorb(r: aoi_core::Result<()>, prefix: &str, v: &mut Vec<Violation>) -> Result<(), CliError> {
    match r {
        Ok(()) => Ok(()),
        Err(Error::Invalid(list)) => {
            for x in list {
                let field = if x.field.starts_with(prefix) {
                    x.field
                } else {
                    format!("{prefix}{}", x.field)
                };
                v.push(Violation { field, message: x.message });
            }
            Ok(())
        }
        Err(e) => Err(e.into()),
    }
}

fn check_prices(prices: &Option<Vec<f64>>, field: &str, zone: &ZoneConfig, v: &mut Vec<Violation>) {
    if let Some(p) = prices {
        push_if(
            p.len() != zone.horizon + 1,
            field,
            &format!("needs horizon + 1 = {} prices", zone.horizon + 1),
            v,
        );
        push_if(
            p.iter().any(|x| !(x.is_finite() && (0.0..=zone.b).contains(x))),
            field,
            "prices must lie in [0, b]",
            v,
        );
    }
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::SingleZone(_) => "single-zone",
            Self::SteadyState(_) => "steady-state",
            Self::GapSweep(_) => "gap-sweep",
            Self::MeanField(_) => "mean-field",
            Self::Population(_) => "population",
            Self::NashSweep(_) => "nash-sweep",
            Self::Simulate(_) => "simulate",
            Self::Oracle(_) => "oracle",
            Self::CostFit(_) => "cost-fit",
        }
    }

    /// Parses a config. A missing `kind` is filled in from `expected`; a
    /// present one must agree with it.
    pub fn from_json(text: &str, expected: Option<&str>) -> Result<Self, CliError> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| CliError::Parse("config must be a JSON object".into()))?;
        match (obj.get("kind").and_then(|k| k.as_str()), expected) {
            (Some(k), Some(e)) if k != e => {
                return Err(CliError::Invalid(vec![Violation {
                    field: "kind".into(),
                    message: format!("config is a '{k}' experiment, expected '{e}'"),
                }]))
            }
            (Some(k), _) if !KINDS.contains(&k) => {
                return Err(CliError::Invalid(vec![Violation {
                    field: "kind".into(),
                    message: format!("unknown experiment kind '{k}'; expected one of {}", KINDS.join(", ")),
                }]))
            }
            (None, Some(e)) => {
                obj.insert("kind".into(), e.into());
            }
            (None, None) => {
                return Err(CliError::Invalid(vec![Violation {
                    field: "kind".into(),
                    message: "missing experiment kind".into(),
                }]))
            }
            _ => {}
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every numeric bound and reports all violations together.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut v = Vec::new();
        match self {
            Self::SingleZone(z) => z.check("", &mut v)?,
            Self::SteadyState(c) => {
                c.scenario.check("scenario.", &mut v)?;
                push_if(
                    c.scenario.rho >= 1.0,
                    "scenario.rho",
                    "must be < 1 for a steady state",
                    &mut v,
                );
                push_if(c.t_max == Some(0), "t_max", "must be >= 1", &mut v);
                if let Some(d) = c.delta {
                    push_if(!(d.is_finite() && d >= 0.0), "delta", "must be >= 0", &mut v);
                }
            }
            Self::GapSweep(c) => {
                c.scenario.check("scenario.", &mut v)?;
                push_if(c.horizons.is_empty(), "horizons", "must not be empty", &mut v);
                push_if(c.horizons.contains(&0), "horizons", "every horizon must be >= 1", &mut v);
                let rhos = c.rhos.clone().unwrap_or_else(|| vec![c.scenario.rho]);
                push_if(rhos.is_empty(), "rhos", "must not be empty", &mut v);
                push_if(
                    rhos.iter().any(|r| !(r.is_finite() && *r > 0.0 && *r < 1.0)),
                    if c.rhos.is_some() { "rhos" } else { "scenario.rho" },
                    "discount factors must lie in (0, 1)",
                    &mut v,
                );
            }
            Self::MeanField(c) => {
                absorb(c.options().validate(), "", &mut v)?;
                match c.mode {
                    MeanFieldMode::Exact => {
                        absorb(c.scenario().validate(), "", &mut v)?;
                        push_if(c.population.is_some(), "population", "only used in population mode", &mut v);
                    }
                    MeanFieldMode::Population => {
                        absorb(c.shared.validate(), "", &mut v)?;
                        push_if(!c.zones.is_empty(), "zones", "must be empty in population mode", &mut v);
                        push_if(c.evaluate_original, "evaluate_original", "only supported in exact mode", &mut v);
                        match &c.population {
                            Some(p) => p.check("population.", &mut v)?,
                            None => push("population", "required in population mode", &mut v),
                        }
                    }
                }
            }
            Self::Population(c) => {
                absorb(c.options().validate(), "", &mut v)?;
                absorb(c.shared.validate(), "", &mut v)?;
                c.population.check("population.", &mut v)?;
            }
            Self::NashSweep(c) => {
                absorb(c.options().validate(), "", &mut v)?;
                absorb(c.shared.validate(), "", &mut v)?;
                c.population.check("population.", &mut v)?;
                push_if(c.ns.is_empty(), "ns", "must not be empty", &mut v);
                push_if(c.ns.contains(&0), "ns", "every sample size must be >= 1", &mut v);
            }
            Self::Simulate(c) => {
                c.scenario.check("scenario.", &mut v)?;
                push_if(c.reps == 0, "reps", "must be >= 1", &mut v);
                check_prices(&c.policy, "policy", &c.scenario, &mut v);
            }
            Self::Oracle(c) => {
                c.scenario.check("scenario.", &mut v)?;
                push_if(!(c.tau.is_finite() && c.tau > 0.0), "tau", "must be > 0", &mut v);
                if let Some(g) = c.guard {
                    push_if(g.is_nan() || g < 1.0, "guard", "must be >= 1", &mut v);
                }
                if let Some(h) = &c.horizons {
                    push_if(h.is_empty(), "horizons", "must not be empty", &mut v);
                    push_if(h.contains(&0), "horizons", "every horizon must be >= 1", &mut v);
                    push_if(
                        c.compare.is_some(),
                        "compare",
                        "a horizon sweep always compares against the approximate plan",
                        &mut v,
                    );
                }
                check_prices(&c.compare, "compare", &c.scenario, &mut v);
            }
            Self::CostFit(c) => {
                push_if(!(c.b.is_finite() && c.b > 0.0), "b", "must be > 0", &mut v);
                push_if(matches!(c.cost, CostSpec::Linear { .. }), "cost.kind", "must not already be linear", &mut v);
                push_if(c.grid_points() < 2, "grid_points", "must be >= 2", &mut v);
                if c.b.is_finite() && c.b > 0.0 {
                    absorb(c.cost.resolve(c.b).validate(), "cost.", &mut v)?;
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(v))
        }
    }

    /// Replaces the seed of experiments that draw random numbers.
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::Simulate(c) => c.seed = seed,
            Self::NashSweep(c) => c.seed = seed,
            Self::MeanField(MeanFieldConfig {
                population: Some(PopulationSpec { sample: Some(s), .. }),
                ..
            })
            | Self::Population(PopulationConfig {
                population: PopulationSpec { sample: Some(s), .. },
                ..
            }) => s.seed = seed,
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZONE: &str = r#"{"alpha":1,"b":2,"rho":0.9,"a0":0,"a_init":0,"horizon":100}"#;

    fn violations(r: Result<ExperimentConfig, CliError>) -> Vec<String> {
        match r {
            Err(CliError::Invalid(v)) => v.into_iter().map(|x| x.field).collect(),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn kind_is_inferred_from_the_subcommand() {
        let c = ExperimentConfig::from_json(ZONE, Some("single-zone")).unwrap();
        assert_eq!(c.kind(), "single-zone");
        let ExperimentConfig::SingleZone(z) = c else { unreachable!() };
        assert_eq!(z.params().cost, CostDistribution::Uniform { b: 2.0 });
        assert_eq!(z.options(), FixedPointOptions::default());
    }

    #[test]
    fn mismatched_and_unknown_kinds_are_rejected() {
        let text = r#"{"kind":"oracle","scenario":{}}"#;
        assert_eq!(violations(ExperimentConfig::from_json(text, Some("simulate"))), ["kind"]);
        let text = r#"{"kind":"nope"}"#;
        assert_eq!(violations(ExperimentConfig::from_json(text, None)), ["kind"]);
        assert_eq!(violations(ExperimentConfig::from_json("{}", None)), ["kind"]);
    }

    #[test]
    fn every_bad_field_is_listed() {
        let text = r#"{"kind":"single-zone","alpha":1.5,"b":-1,"rho":0.9,"a0":0,"a_init":-2,"horizon":0,"tol":0}"#;
        let fields = violations(ExperimentConfig::from_json(text, None));
        for f in ["alpha", "b", "a_init", "horizon", "tol"] {
            assert!(fields.iter().any(|x| x == f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn bad_cost_parameters_are_listed_once() {
        let text = r#"{"alpha":1,"b":2,"rho":0.9,"a0":0,"a_init":0,"horizon":10,
                       "cost":{"kind":"truncated_normal","mu":0.5,"sigma":-1}}"#;
        let fields = violations(ExperimentConfig::from_json(text, Some("single-zone")));
        assert_eq!(fields.len(), 1, "{fields:?}");
        assert!(fields[0].starts_with("cost."), "{fields:?}");
    }

    #[test]
    fn empty_zone_list_names_the_field() {
        let text = r#"{"kind":"mean-field","shared":{"rho":0.5,"b":2,"a0":0,"horizon":20},"zones":[]}"#;
        assert_eq!(violations(ExperimentConfig::from_json(text, None)), ["zones"]);
    }

    #[test]
    fn unknown_fields_are_parse_errors() {
        let text = r#"{"kind":"single-zone","alpha":1,"b":2,"rho":0.9,"a0":0,"a_init":0,"horizon":10,"bogus":1}"#;
        assert!(matches!(ExperimentConfig::from_json(text, None), Err(CliError::Parse(_))));
    }

    #[test]
    fn cost_b_defaults_to_the_scenario() {
        let text = r#"{"alpha":1,"b":2,"rho":0.9,"a0":0,"a_init":0,"horizon":10,
                       "cost":{"kind":"truncated_normal","mu":0.5,"sigma":0.5}}"#;
        let ExperimentConfig::SingleZone(z) = ExperimentConfig::from_json(text, Some("single-zone")).unwrap() else {
            unreachable!()
        };
        assert_eq!(
            z.params().cost,
            CostDistribution::TruncatedNormal { mean: 0.5, std_dev: 0.5, b: 2.0 }
        );
        let bad = text.replace("\"sigma\":0.5}", "\"sigma\":0.5,\"b\":3}");
        assert_eq!(violations(ExperimentConfig::from_json(&bad, Some("single-zone"))), ["cost.b"]);
    }

    #[test]
    fn population_needs_exactly_one_source() {
        let base = r#"{"kind":"population","shared":{"rho":0.5,"b":2,"a0":0,"horizon":20},"population":POP}"#;
        let none = base.replace("POP", r#"{"w":0.7}"#);
        assert_eq!(violations(ExperimentConfig::from_json(&none, None)), ["population"]);
        let bad_mass = base.replace("POP", r#"{"w":0.7,"atoms":[{"alpha":0.7,"a_init":0,"mass":0.4}]}"#);
        let fields = violations(ExperimentConfig::from_json(&bad_mass, None));
        assert!(fields.iter().all(|f| f.starts_with("population.")), "{fields:?}");
    }

    #[test]
    fn grid_and_sample_produce_unit_mass() {
        let grid = PopulationSpec {
            w: 0.7,
            atoms: None,
            grid: Some(GridSpec {
                alpha: Axis { lo: 0.5, hi: 1.0, points: 6 },
                a_init: Axis { lo: 0.0, hi: 2.0, points: 3 },
            }),
            sample: None,
        };
        let d = grid.distribution();
        assert_eq!(d.atoms.len(), 18);
        assert!(d.validate().is_ok());
        assert_eq!(d.atoms[17].alpha, 1.0);
        assert_eq!(d.atoms[17].a_init, 2.0);

        let sample = PopulationSpec {
            w: 0.7,
            atoms: None,
            grid: None,
            sample: Some(SampleSpec {
                n: 50,
                seed: 9,
                alpha_dist: ScalarDist::Uniform { lo: 0.6, hi: 1.0 },
                age_dist: ScalarDist::Choice { values: vec![0.0, 2.0], weights: Some(vec![1.0, 3.0]) },
            }),
        };
        let d = sample.distribution();
        assert!(d.validate().is_ok());
        assert!(d.atoms.iter().all(|a| (0.6..=1.0).contains(&a.alpha)));
        assert_eq!(d, sample.distribution(), "same seed, same atoms");
    }

    #[test]
    fn set_seed_reaches_nested_samples() {
        let text = r#"{"kind":"population","shared":{"rho":0.5,"b":2,"a0":0,"horizon":20},
            "population":{"w":0.7,"sample":{"n":4,"seed":1,"alpha_dist":{"kind":"constant","value":0.8},
            "age_dist":{"kind":"constant","value":0}}}}"#;
        let mut c = ExperimentConfig::from_json(text, None).unwrap();
        c.set_seed(77);
        let ExperimentConfig::Population(p) = c else { unreachable!() };
        assert_eq!(p.population.sample.unwrap().seed, 77);
    }

    #[test]
    fn policy_length_is_checked() {
        let text = format!(r#"{{"kind":"simulate","scenario":{ZONE},"reps":10,"seed":1,"policy":[0.5,0.5]}}"#);
        assert_eq!(violations(ExperimentConfig::from_json(&text, None)), ["policy"]);
    }
}
