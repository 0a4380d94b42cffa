//! Age-of-information dynamic pricing.
//!
//! A platform pays mobile users to sample a point of interest and wants to
//! keep the information fresh. The modules here compute open-loop price
//! paths that trade the squared age against the expected payment:
//!
//! * [`single_zone`] – finite-horizon pricing with a fixed-point estimator,
//! * [`steady_state`] – its infinite-horizon limit,
//! * [`mean_field`] – decentralized pricing across many coupled zones,
//! * [`simulator`] – Monte Carlo rollouts and an exhaustive price oracle.

pub mod cost_model;
pub mod error;
pub mod mean_field;
pub mod single_zone;
pub mod steady_state;
mod roots;
pub mod simulator;

pub use cost_model::{fit_linear, CostDistribution, LinearCdf, LinearFit};
pub use error::{Error, Result, Violation};
pub use single_zone::{FixedPointOptions, PricingPlan, ZoneParams};
pub use steady_state::{GapPoint, SteadyState};
pub use mean_field::{
    Atom, MeanFieldOptions, MeanFieldSolution, MultiZoneScenario, NashGap, PopulationDistribution,
    SharedParams, ZonePlan, ZoneSpec,
};
pub use simulator::{DelayModel, OracleResult, Rollout, RolloutStats};
