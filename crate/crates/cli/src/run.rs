//! Experiment orchestration: solve, write artifacts, build the summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use aoi_core::mean_field::{evaluate_original_mf, large_population_phi, nash_sweep, solve_mean_field};
use aoi_core::simulator::{exhaustive_oracle, monte_carlo, DEFAULT_CANDIDATE_GUARD};
use aoi_core::single_zone::{age_path_original, original_cost, solve_delta_fixed_point};
use aoi_core::steady_state::{gap_sweep, price_infinite, solve_delta_infinite, DEFAULT_T_MAX};
use aoi_core::{fit_linear, MeanFieldSolution, PopulationDistribution, ZoneParams};

use crate::config::*;
use crate::error::CliError;
use crate::output::{fmt_num, write_json, Table};

/// Result of one run: the one-line summary and every file written.
#[derive(Debug)]
pub struct Outcome {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

struct Sink {
    dir: PathBuf,
    /// Explicit file target for single-artifact experiments.
    file: Option<PathBuf>,
    files: Vec<PathBuf>,
}

impl Sink {
    fn new(out: &Path, single_ext: Option<&str>) -> Result<Self, CliError> {
        let is_file = single_ext.is_some() && out.extension().is_some();
        let dir = if is_file {
            out.parent().map(Path::to_path_buf).unwrap_or_default()
        } else {
            out.to_path_buf()
        };
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(&dir)?;
        }
        Ok(Self {
            dir,
            file: is_file.then(|| out.to_path_buf()),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    /// The primary artifact: the explicit file if one was given.
    fn primary(&mut self, default: &str) -> PathBuf {
        match self.file.clone() {
            Some(f) => {
                self.files.push(f.clone());
                f
            }
            None => self.path(default),
        }
    }

    fn finish(mut self, summary: Value) -> Result<Outcome, CliError> {
        if self.file.is_none() {
            let p = self.path("summary.json");
            write_json(&p, &summary)?;
        }
        Ok(Outcome {
            summary,
            files: self.files,
        })
    }
}

/// Runs a validated experiment, writing its artifacts under `out`.
///
/// `out` is a directory, except for `simulate` and `oracle`, where a path
/// with an extension names the single output file.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Outcome, CliError> {
    config.validate()?;
    match config {
        ExperimentConfig::SingleZone(c) => single_zone(c, Sink::new(out, None)?),
        ExperimentConfig::SteadyState(c) => steady_state(c, Sink::new(out, None)?),
        ExperimentConfig::GapSweep(c) => gap(c, Sink::new(out, None)?),
        ExperimentConfig::MeanField(c) => mean_field(c, Sink::new(out, None)?),
        ExperimentConfig::Population(c) => {
            let dist = c.population.distribution();
            let sol = large_population_phi(&dist, &c.shared, &c.options())?;
            population(&dist, &sol, "population", Sink::new(out, None)?)
        }
        ExperimentConfig::NashSweep(c) => nash(c, Sink::new(out, None)?),
        ExperimentConfig::Simulate(c) => simulate(c, Sink::new(out, Some("csv"))?),
        ExperimentConfig::Oracle(c) => oracle(c, Sink::new(out, Some("json"))?),
        ExperimentConfig::CostFit(c) => cost_fit(c, Sink::new(out, None)?),
    }
}

fn single_zone(c: &ZoneConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let params = c.params();
    let plan = solve_delta_fixed_point(&params, &c.options())?;
    let original = age_path_original(&params, &plan.prices)?;
    Table::new()
        .index("t", plan.prices.len())
        .col("price", plan.prices.iter().copied())
        .col("ea_linearized", plan.ages.iter().copied())
        .col("ea_original", original.iter().copied())
        .write(&sink.path("plan.csv"))?;
    Table::new()
        .index("iteration", plan.history.len())
        .col("delta", plan.history.iter().copied())
        .write(&sink.path("delta_history.csv"))?;
    let summary = json!({
        "kind": "single-zone",
        "delta": plan.delta,
        "iterations": plan.iterations,
        "residual": plan.residual,
        "cost_linearized": plan.cost,
        "cost_original": original_cost(&params, &plan.prices)?,
    });
    sink.finish(summary)
}

fn steady_state(c: &SteadyStateConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let params = c.scenario.params();
    let delta = match c.delta {
        Some(d) => d,
        None => solve_delta_infinite(&params)?,
    };
    let path = price_infinite(&params, delta, c.t_max.unwrap_or(DEFAULT_T_MAX))?;
    Table::new()
        .index("t", path.prices.len())
        .col("p_inf", path.prices.iter().copied())
        .col("ea_inf", path.ages.iter().copied())
        .write(&sink.path("steady.csv"))?;
    let s = path.steady;
    let summary = json!({
        "kind": "steady-state",
        "delta": s.delta,
        "q": s.q,
        "m": s.m,
        "p_limit": s.p_limit,
        "ea_limit": s.ea_limit,
    });
    sink.finish(summary)
}

fn gap(c: &GapSweepConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let opts = c.scenario.options();
    let rhos = c.rhos.clone().unwrap_or_else(|| vec![c.scenario.rho]);
    let mut sweeps = Vec::new();
    for &rho in &rhos {
        let params = ZoneParams { rho, ..c.scenario.params() };
        let points = gap_sweep(&params, &c.horizons, &opts)?;
        let name = match c.rhos {
            Some(_) => format!("gap_rho{}.csv", fmt_num(rho)),
            None => "gap.csv".to_string(),
        };
        Table::new()
            .col("T", points.iter().map(|p| p.horizon as f64))
            .col("U_T", points.iter().map(|p| p.u_t))
            .col("U_inf_T", points.iter().map(|p| p.u_inf_t))
            .col("gap", points.iter().map(|p| p.gap))
            .write(&sink.path(&name))?;
        let (first, last) = (points[0], points[points.len() - 1]);
        sweeps.push(json!({
            "rho": rho,
            "first": {"T": first.horizon, "gap": first.gap},
            "last": {"T": last.horizon, "gap": last.gap},
        }));
    }
    sink.finish(json!({"kind": "gap-sweep", "sweeps": sweeps}))
}

fn mf_tables(sol: &MeanFieldSolution, sink: &mut Sink) -> Result<(), CliError> {
    let mut t = Table::new().index("t", sol.phi.len()).col("phi", sol.phi.iter().copied());
    for (i, z) in sol.zones.iter().enumerate() {
        t = t.col(format!("price_zone_{}", i + 1), z.prices.iter().copied());
    }
    for (i, z) in sol.zones.iter().enumerate() {
        t = t.col(format!("ea_zone_{}", i + 1), z.ages.iter().copied());
    }
    t.write(&sink.path("mean_field.csv"))?;

    let mut h = Table::new().index("iteration", sol.history.len());
    for i in 0..sol.zones.len() {
        h = h.col(format!("delta_zone_{}", i + 1), sol.history.iter().map(|r| r.deltas[i]));
    }
    for t in 0..sol.phi.len() {
        h = h.col(format!("phi_{t}"), sol.history.iter().map(|r| r.phi[t]));
    }
    h.write(&sink.path("mf_history.csv"))
}

fn mf_summary(kind: &str, sol: &MeanFieldSolution) -> Value {
    json!({
        "kind": kind,
        "iterations": sol.iterations,
        "delta_residual": sol.delta_residual,
        "phi_residual": sol.phi_residual,
        "deltas": sol.zones.iter().map(|z| z.delta).collect::<Vec<_>>(),
    })
}

fn mean_field(c: &MeanFieldConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    if c.mode == MeanFieldMode::Population {
        let dist = c.population.as_ref().expect("validated").distribution();
        let sol = large_population_phi(&dist, &c.shared, &c.options())?;
        return population(&dist, &sol, "mean-field", sink);
    }
    let scenario = c.scenario();
    let sol = solve_mean_field(&scenario, &c.options())?;
    mf_tables(&sol, &mut sink)?;
    let mut summary = mf_summary("mean-field", &sol);
    if c.evaluate_original {
        let eval = evaluate_original_mf(&scenario, &sol)?;
        let mut t = Table::new()
            .index("t", sol.phi.len())
            .col("phi", sol.phi.iter().copied())
            .col("ea_original_avg", eval.average.iter().copied());
        for (i, a) in eval.ages.iter().enumerate() {
            t = t.col(format!("ea_original_zone_{}", i + 1), a.iter().copied());
        }
        t.write(&sink.path("ea_original.csv"))?;
        summary["max_deviation_original"] = json!(eval.max_deviation);
    }
    sink.finish(summary)
}

fn atom_table(dist: &PopulationDistribution, sink: &mut Sink) -> Result<(), CliError> {
    Table::new()
        .col("alpha", dist.atoms.iter().map(|a| a.alpha))
        .col("a_init", dist.atoms.iter().map(|a| a.a_init))
        .col("mass", dist.atoms.iter().map(|a| a.mass))
        .write(&sink.path("atoms.csv"))
}

fn population(
    dist: &PopulationDistribution,
    sol: &MeanFieldSolution,
    kind: &str,
    mut sink: Sink,
) -> Result<Outcome, CliError> {
    atom_table(dist, &mut sink)?;
    mf_tables(sol, &mut sink)?;
    sink.finish(mf_summary(kind, sol))
}

fn nash(c: &NashSweepConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let dist = c.population.distribution();
    let sol = large_population_phi(&dist, &c.shared, &c.options())?;
    let points = nash_sweep(&dist, &sol, c.shared.rho, &c.ns, c.seed)?;
    atom_table(&dist, &mut sink)?;
    Table::new()
        .col("N", points.iter().map(|p| p.n as f64))
        .col("epsilon_N", points.iter().map(|p| p.epsilon))
        .write(&sink.path("nash.csv"))?;
    let summary = json!({
        "kind": "nash-sweep",
        "iterations": sol.iterations,
        "points": points,
    });
    sink.finish(summary)
}

fn approximate_prices(params: &ZoneParams, c: &ZoneConfig) -> Result<Vec<f64>, CliError> {
    Ok(solve_delta_fixed_point(params, &c.options())?.prices)
}

fn simulate(c: &SimulateConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let params = c.scenario.params();
    let prices = match &c.policy {
        Some(p) => p.clone(),
        None => approximate_prices(&params, &c.scenario)?,
    };
    let stats = monte_carlo(&params, &prices, c.delay, c.reps, c.seed)?;
    let expected = age_path_original(&params, &prices)?;
    Table::new()
        .index("t", prices.len())
        .col("price", prices.iter().copied())
        .col("mean_age", stats.mean_age.iter().copied())
        .col("std_error", stats.std_error.iter().copied())
        .col("ea_original", expected.iter().copied())
        .col("acceptances", stats.acceptances.iter().map(|&a| a as f64))
        .write(&sink.primary("stats.csv"))?;
    let max_z = stats
        .mean_age
        .iter()
        .zip(&stats.std_error)
        .zip(&expected)
        .filter(|((_, se), _)| **se > 0.0)
        .map(|((m, se), e)| (m - e).abs() / se)
        .fold(0.0, f64::max);
    let summary = json!({
        "kind": "simulate",
        "replications": stats.replications,
        "seed": c.seed,
        "mean_cost": stats.mean_cost,
        "cost_std_error": stats.cost_std_error,
        "cost_expected_dynamics": original_cost(&params, &prices)?,
        "max_z": max_z,
    });
    sink.finish(summary)
}

fn oracle(c: &OracleConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let guard = c.guard.unwrap_or(DEFAULT_CANDIDATE_GUARD);
    let base = c.scenario.params();
    let Some(horizons) = &c.horizons else {
        let compare = match &c.compare {
            Some(p) => p.clone(),
            None => approximate_prices(&base, &c.scenario)?,
        };
        let r = exhaustive_oracle(&base, c.tau, &compare, guard)?;
        write_json(&sink.primary("oracle.json"), &json!({"horizon": base.horizon, "result": r}))?;
        let summary = json!({
            "kind": "oracle",
            "horizon": base.horizon,
            "best_cost": r.best_cost,
            "comparison_cost": r.comparison_cost,
            "relative_gap": r.relative_gap,
            "candidates": r.candidates,
        });
        return sink.finish(summary);
    };
    let mut results = Vec::new();
    for &horizon in horizons {
        let params = ZoneParams { horizon, ..base };
        let compare = approximate_prices(&params, &c.scenario)?;
        results.push((horizon, exhaustive_oracle(&params, c.tau, &compare, guard)?));
    }
    let doc: Vec<Value> = results.iter().map(|(h, r)| json!({"horizon": h, "result": r})).collect();
    write_json(&sink.primary("oracle.json"), &doc)?;
    if sink.file.is_none() {
        Table::new()
            .col("T", results.iter().map(|(h, _)| *h as f64))
            .col("approx_cost", results.iter().map(|(_, r)| r.comparison_cost))
            .col("oracle_cost", results.iter().map(|(_, r)| r.best_cost))
            .col("gap", results.iter().map(|(_, r)| r.gap))
            .col("relative_gap", results.iter().map(|(_, r)| r.relative_gap))
            .write(&sink.path("oracle.csv"))?;
    }
    let gaps: Vec<Value> = results
        .iter()
        .map(|(h, r)| json!({"T": h, "relative_gap": r.relative_gap}))
        .collect();
    sink.finish(json!({"kind": "oracle", "tau": c.tau, "gaps": gaps}))
}

fn cost_fit(c: &CostFitConfig, mut sink: Sink) -> Result<Outcome, CliError> {
    let dist = c.cost.resolve(c.b);
    let n = c.grid_points();
    let fit = fit_linear(&dist, n)?;
    let grid: Vec<f64> = (0..n).map(|i| c.b * i as f64 / (n - 1) as f64).collect();
    let cdf = grid.iter().map(|&x| dist.cdf(x)).collect::<aoi_core::Result<Vec<_>>>()?;
    Table::new()
        .col("pi", grid.iter().copied())
        .col("cdf", cdf)
        .col("fit", grid.iter().map(|&x| fit.cdf.a1 + fit.cdf.a2 * x))
        .write(&sink.path("cost_fit.csv"))?;
    let summary = json!({
        "kind": "cost-fit",
        "a1": fit.cdf.a1,
        "a2": fit.cdf.a2,
        "b": fit.cdf.b,
        "residual_norm": fit.residual_norm,
        "grid_points": n,
    });
    write_json(&sink.path("cost_fit.json"), &summary)?;
    sink.finish(summary)
}
