//! JSON problem specifications and the batch pipelines run on them.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::hedging::{read_strategy_csv, verify_schedules, write_strategy_csv, LatticeRule, DynamicRule, Schedule, SemiStaticStrategy, VerifyReport};
use crate::lattice::{LatticeModel, DEFAULT_PATH_BUDGET};
use crate::lp::LpStatus;
use crate::mot_lp::{DualMode, MotProblem, QuotedOption, SuperhedgeLPSolution, GAP_TOLERANCE};
use crate::paths::{InfoSpace, PredictionSet, TradedOption};
use crate::payoffs::Payoff;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PredictionSetSpec {
    #[default]
    All,
    SupNormBall { b: f64 },
}

impl PredictionSetSpec {
    pub fn build(&self) -> Result<PredictionSet> {
        match *self {
            PredictionSetSpec::All => Ok(PredictionSet::All),
            PredictionSetSpec::SupNormBall { b } => PredictionSet::ball(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    /// Number of underlying assets.
    pub assets: usize,
    pub maturities: Vec<f64>,
    /// Lattice dates after 0; defaults to the maturities.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// `grids[k][i]`: values of coordinate `i` at the `k`-th date after 0.
    pub grids: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub band: Option<f64>,
    /// Continuously traded options (extra lattice coordinates).
    #[serde(default)]
    pub traded: Vec<TradedOption>,
    /// Statically traded quotes.
    #[serde(default)]
    pub options: Vec<QuotedOption>,
    pub payoff: Payoff,
    #[serde(default)]
    pub prediction_set: PredictionSetSpec,
    #[serde(default)]
    pub eta: f64,
    #[serde(default, alias = "penalty_N")]
    pub penalty_n: Option<f64>,
    #[serde(default)]
    pub eta_schedule: Vec<f64>,
    #[serde(default, alias = "penalty_N_list")]
    pub penalty_n_list: Vec<f64>,
    #[serde(default, alias = "mesh_N_list")]
    pub mesh_n_list: Vec<u32>,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
    #[serde(default)]
    pub path_budget: Option<usize>,
}

/// Random price perturbations for feasibility sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub trials: usize,
    /// Prices move uniformly within `[-size, size]`.
    pub size: f64,
}

impl ProblemSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn info(&self) -> Result<InfoSpace> {
        InfoSpace::new(self.assets, self.traded.clone(), self.maturities.clone())
    }

    pub fn model(&self) -> Result<LatticeModel> {
        let dates = self.times.clone().unwrap_or_else(|| self.maturities.clone());
        let mut times = vec![0.0];
        times.extend(dates);
        let maturity_indices = self
            .maturities
            .iter()
            .map(|t| times.iter().position(|u| u == t).ok_or_else(|| Error::Domain(format!("maturity {t} is not a lattice date"))))
            .collect::<Result<Vec<_>>>()?;
        let mut model = LatticeModel::new(times, maturity_indices, self.grids.clone(), self.info()?)?;
        model.band = self.band;
        Ok(model)
    }

    pub fn problem(&self) -> Result<MotProblem> {
        let model = self.model()?;
        let budget = self.path_budget.unwrap_or(DEFAULT_PATH_BUDGET);
        let paths = model.enumerate_with_budget(budget)?;
        let g = paths.evaluate(&self.payoff)?;
        MotProblem::from_values(&model, g, &self.options, &self.prediction_set.build()?)
    }

    fn etas(&self) -> Vec<f64> {
        if self.eta_schedule.is_empty() {
            vec![self.eta]
        } else {
            self.eta_schedule.clone()
        }
    }
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub quantity: String,
    pub value: f64,
    pub status: String,
}

impl ResultRow {
    fn new(quantity: impl Into<String>, value: f64, status: impl Into<String>) -> Self {
        Self { quantity: quantity.into(), value, status: status.into() }
    }
}

pub fn write_results<W: std::io::Write>(rows: &[ResultRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["quantity", "value", "status"]).map_err(crate::paths::csv_io)?;
    for r in rows {
        w.write_record([r.quantity.clone(), format!("{}", r.value), r.status.clone()]).map_err(crate::paths::csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of the bounds pipeline.
#[derive(Debug, Clone)]
pub struct BoundsOutput {
    pub rows: Vec<ResultRow>,
    /// Primal measure at the first feasible relaxation level.
    pub measure: Option<Vec<f64>>,
    /// Superhedge at the same level.
    pub superhedge: Option<SuperhedgeLPSolution>,
    /// Farkas certificate when the primal is infeasible at the spec's `eta`.
    pub certificate: Option<Vec<f64>>,
    pub infeasible: bool,
}

pub fn run_bounds(spec: &ProblemSpec, tolerance: Option<f64>) -> Result<(MotProblem, BoundsOutput)> {
    let prob = spec.problem()?;
    let tol = tolerance.unwrap_or(GAP_TOLERANCE);
    let mut rows = Vec::new();
    let mut measure = None;
    let mut superhedge = None;
    for eta in spec.etas() {
        let primal = prob.primal(eta)?;
        let dual = prob.dual(DualMode::Hard { eps: eta }, eta)?;
        rows.push(ResultRow::new(format!("primal[eta={eta}]"), primal.value, primal.status.as_str()));
        rows.push(ResultRow::new(format!("dual[eta={eta}]"), dual.value, dual.status.as_str()));
        if primal.status == LpStatus::Optimal {
            let gap = dual.value - primal.value;
            rows.push(ResultRow::new(format!("gap[eta={eta}]"), gap, if gap.abs() <= tol { "ok" } else { "open" }));
            if measure.is_none() {
                measure = Some(primal.weights.clone());
                superhedge = Some(dual.clone());
            }
        }
        if let Some(n) = spec.penalty_n {
            let pen = prob.dual(DualMode::Penalty { n }, eta)?;
            rows.push(ResultRow::new(format!("dual_penalty[eta={eta},N={n}]"), pen.value, pen.status.as_str()));
        }
    }
    let at_spec = prob.primal(spec.eta)?;
    let infeasible = at_spec.status == LpStatus::Infeasible;
    let certificate = if infeasible { at_spec.certificate.clone() } else { None };
    Ok((prob, BoundsOutput { rows, measure, superhedge, certificate, infeasible }))
}

/// Penalty, relaxation and mesh sweeps plus optional price perturbations.
pub fn run_sweep(spec: &ProblemSpec, seed: u64) -> Result<Vec<ResultRow>> {
    let prob = spec.problem()?;
    let mut rows = Vec::new();
    let n_list = if spec.penalty_n_list.is_empty() { vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0] } else { spec.penalty_n_list.clone() };
    for (n, v) in prob.penalty_sweep(&n_list)? {
        rows.push(ResultRow::new(format!("penalty_dual[N={n}]"), v, status_of(v)));
    }
    let hard = prob.dual(DualMode::Hard { eps: 0.0 }, 0.0)?;
    rows.push(ResultRow::new("hard_dual[eps=0]", hard.value, hard.status.as_str()));
    for eta in spec.etas() {
        let p = prob.primal(eta)?;
        rows.push(ResultRow::new(format!("primal[eta={eta}]"), p.value, p.status.as_str()));
    }
    for &mesh in &spec.mesh_n_list {
        let d = prob.dual_simple(DualMode::Hard { eps: 0.0 }, 0.0, mesh)?;
        rows.push(ResultRow::new(format!("simple_dual[mesh={mesh}]"), d.value, d.status.as_str()));
    }
    if let Some(pert) = spec.perturbation {
        if !(pert.size >= 0.0) {
            return domain("perturbation size must be nonnegative");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for trial in 0..pert.trials {
            let shifted: Vec<f64> = prob.prices.iter().map(|p| p + rng.gen_range(-pert.size..=pert.size)).collect();
            let perturbed = MotProblem { prices: shifted, ..prob.clone() };
            let p = perturbed.primal(0.0)?;
            let feasible = if p.status == LpStatus::Optimal { 1.0 } else { 0.0 };
            rows.push(ResultRow::new(format!("perturbed_feasible[trial={trial}]"), feasible, p.status.as_str()));
        }
    }
    Ok(rows)
}

fn status_of(v: f64) -> &'static str {
    if v == f64::NEG_INFINITY {
        LpStatus::Unbounded.as_str()
    } else {
        LpStatus::Optimal.as_str()
    }
}

/// Static part of a strategy file: cash plus one holding per quoted option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticHoldings {
    pub a0: f64,
    #[serde(default)]
    pub holdings: Vec<f64>,
}

impl StaticHoldings {
    pub fn from_solution(sol: &SuperhedgeLPSolution) -> Self {
        Self { a0: sol.a0, holdings: sol.a_x.clone() }
    }
}

/// Per-path schedules of a lattice superhedge, in enumeration order.
pub fn solution_schedules(prob: &MotProblem, sol: &SuperhedgeLPSolution) -> Result<Vec<Schedule>> {
    let rule = LatticeRule::new(&prob.paths, sol.delta.clone())?;
    prob.paths.grid_paths().iter().map(|p| rule.schedule(p)).collect()
}

pub fn write_strategy(prob: &MotProblem, sol: &SuperhedgeLPSolution, dir: &Path) -> Result<()> {
    let schedules = solution_schedules(prob, sol)?;
    write_strategy_csv(&schedules, std::fs::File::create(dir.join("strategy.csv"))?)?;
    std::fs::write(dir.join("static.json"), serde_json::to_string_pretty(&StaticHoldings::from_solution(sol))?)?;
    Ok(())
}

/// Replays a strategy on every lattice path of the spec.
pub fn run_verify(spec: &ProblemSpec, holdings: &StaticHoldings, strategy_csv: Option<&Path>) -> Result<VerifyReport> {
    let prob = spec.problem()?;
    if holdings.holdings.len() != spec.options.len() {
        return domain(format!("{} holdings for {} quoted options", holdings.holdings.len(), spec.options.len()));
    }
    let dim = prob.paths.dim;
    let schedules = match strategy_csv {
        Some(path) => read_strategy_csv(std::fs::File::open(path)?, dim)?,
        None => vec![Schedule::constant(vec![0.0; dim]); prob.num_paths()],
    };
    let strategy = SemiStaticStrategy {
        a0: holdings.a0,
        statics: spec.options.iter().cloned().zip(holdings.holdings.iter().copied()).collect(),
        ..SemiStaticStrategy::cash(0.0, dim)
    };
    verify_schedules(
        &strategy,
        &schedules,
        &spec.payoff,
        &prob.paths.grid_paths(),
        &spec.prediction_set.build()?,
        &prob.model.info,
        spec.eta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: &str = r#"{
        "assets": 1,
        "maturities": [1.0],
        "grids": [[[0.5, 1.0, 1.5]]],
        "options": [
            {"type": "put", "strike": 0.5, "maturity_index": 0, "price": 0.0},
            {"type": "put", "strike": 1.0, "maturity_index": 0, "price": 0.25},
            {"type": "put", "strike": 1.5, "maturity_index": 0, "price": 0.5}
        ],
        "payoff": {"kind": "european", "params": {"func": {"type": "call", "strike": 1.0}, "asset": 0, "time": 1.0}},
        "eta": 0.0
    }"#;

    #[test]
    fn put_pinned_call_bounds() {
        let spec = ProblemSpec::from_json(SPEC).unwrap();
        let (_, out) = run_bounds(&spec, None).unwrap();
        assert!(!out.infeasible);
        let primal = out.rows.iter().find(|r| r.quantity == "primal[eta=0]").unwrap();
        let dual = out.rows.iter().find(|r| r.quantity == "dual[eta=0]").unwrap();
        assert!((primal.value - 0.25).abs() < 1e-9 && (dual.value - 0.25).abs() < 1e-9);
    }
}
