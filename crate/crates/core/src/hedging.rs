//! Pathwise semi-static strategies: the simple integral, admissibility,
//! superhedge verification, and lifting of discrete-class rules.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretise::hat_stages;
use crate::error::{domain, Error, Result};
use crate::lattice::LatticePaths;
use crate::mot_lp::{MotProblem, QuotedOption, SuperhedgeLPSolution};
use crate::paths::{csv_io, in_fattened_set, GridPath, InfoSpace, PredictionSet};
use crate::payoffs::Payoff;
use crate::rational::{q_to_f64, Q};

const AGREEMENT_TOL: f64 = 1e-12;

/// Positions of a simple strategy along one path: `positions[j]` is held on
/// `(times[j], times[j + 1]]`, the last one up to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn constant(position: Vec<f64>) -> Self {
        Self { times: vec![0.0], positions: vec![position] }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.times.is_empty() || self.times[0] != 0.0 || self.times.len() != self.positions.len() {
            return domain("schedule must start at time 0 with one position per rebalance time");
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("rebalance times must increase strictly");
        }
        if self.positions.iter().any(|x| x.len() != dim || x.iter().any(|v| !v.is_finite())) {
            return domain(format!("positions must be finite vectors of length {dim}"));
        }
        Ok(())
    }

    /// Rebalance index in force at `t > 0`.
    fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|&r| r < t).saturating_sub(1)
    }

    pub fn max_abs_position(&self) -> f64 {
        self.positions.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Progressively measurable simple trading rule.
///
/// Implementations must decide each rebalance time and position from the
/// path observed up to that time; [`prefix_agreement`] tests this.
pub trait DynamicRule: Send + Sync {
    fn schedule(&self, p: &GridPath) -> Result<Schedule>;
}

/// The same deterministic schedule on every path.
#[derive(Debug, Clone)]
pub struct FixedRule(pub Schedule);

impl DynamicRule for FixedRule {
    fn schedule(&self, _p: &GridPath) -> Result<Schedule> {
        Ok(self.0.clone())
    }
}

pub fn zero_rule(dim: usize) -> FixedRule {
    FixedRule(Schedule::constant(vec![0.0; dim]))
}

/// `int_0^t gamma dS` for a simple schedule, evaluated both as a telescoping
/// sum and by integration by parts.
pub fn schedule_integral(s: &Schedule, p: &GridPath, t: f64) -> Result<f64> {
    s.validate(p.dim())?;
    let t = t.clamp(0.0, p.horizon());
    if t == 0.0 {
        return Ok(0.0);
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut telescoped = 0.0;
    for (j, pos) in s.positions.iter().enumerate() {
        let a = s.times[j].min(t);
        let b = s.times.get(j + 1).copied().unwrap_or(f64::INFINITY).min(t);
        if b > a {
            let ds: Vec<f64> = p.value_at(b).iter().zip(p.value_at(a)).map(|(x, y)| x - y).collect();
            telescoped += dot(pos, &ds);
        }
    }
    // gamma_t S_t - gamma_0 S_0 - int S dgamma
    let last = s.index_at(t);
    let mut by_parts = dot(&s.positions[last], &p.value_at(t)) - dot(&s.positions[0], &p.value_at(0.0));
    for j in 1..=last {
        let dg: Vec<f64> = s.positions[j].iter().zip(&s.positions[j - 1]).map(|(a, b)| a - b).collect();
        by_parts -= dot(&p.value_at(s.times[j]), &dg);
    }
    let scale = 1.0 + s.max_abs_position() * p.sup_norm() * s.times.len() as f64;
    if (telescoped - by_parts).abs() > AGREEMENT_TOL * scale {
        return Err(Error::InternalConsistency(format!(
            "integral evaluations disagree: sum {telescoped} vs by parts {by_parts}"
        )));
    }
    Ok(telescoped)
}

pub fn pathwise_integral(rule: &dyn DynamicRule, p: &GridPath, t: f64) -> Result<f64> {
    schedule_integral(&rule.schedule(p)?, p, t)
}

/// Copy of `a` up to its knot `t`, continued through `tail` (times after `t`).
pub fn splice_after(a: &GridPath, t: f64, tail: &[(f64, Vec<f64>)]) -> Result<GridPath> {
    let cut = match a.times().iter().position(|&s| s == t) {
        Some(j) => j,
        None => return domain(format!("splice time {t} is not a knot of the path")),
    };
    let mut times = a.times()[..=cut].to_vec();
    let mut values = a.values()[..=cut].to_vec();
    for (s, v) in tail {
        times.push(*s);
        values.push(v.clone());
    }
    GridPath::new(times, values)
}

/// Whether `rule` gives the same rebalance times and positions up to `t` on
/// two paths that coincide on `[0, t]`. Equality is exact.
pub fn prefix_agreement(rule: &dyn DynamicRule, a: &GridPath, b: &GridPath, t: f64) -> Result<bool> {
    let knots = a.times().iter().chain(b.times()).filter(|&&s| s <= t).copied().chain(std::iter::once(t));
    for s in knots {
        if a.value_at(s) != b.value_at(s) {
            return domain(format!("paths differ at {s} <= {t}"));
        }
    }
    let (sa, sb) = (rule.schedule(a)?, rule.schedule(b)?);
    let upto = |s: &Schedule| -> Vec<(f64, Vec<f64>)> {
        s.times.iter().zip(&s.positions).filter(|(r, _)| **r <= t).map(|(r, x)| (*r, x.clone())).collect()
    };
    Ok(upto(&sa) == upto(&sb))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    /// `min (integral + M (1 + [p > 0] sup |S|^p))` over checked times.
    pub worst_slack: f64,
    pub worst_path: Option<usize>,
    /// First time the floor is breached on the worst path.
    pub breach_time: Option<f64>,
}

/// Checks `int_0^t gamma dS >= -M (1 + [p > 0] sup_{s <= t} |S_s|^p)` at
/// every rebalance time and path knot of every path.
pub fn check_admissible(rule: &dyn DynamicRule, paths: &[GridPath], floor_m: f64, growth_p: f64) -> Result<AdmissibilityReport> {
    if !(floor_m >= 0.0) || !(growth_p >= 0.0) {
        return domain("floor and growth exponent must be nonnegative");
    }
    let per_path: Vec<(f64, Option<f64>)> = paths
        .par_iter()
        .map(|p| {
            let s = rule.schedule(p)?;
            let mut times: Vec<f64> = s.times.iter().chain(p.times()).copied().filter(|&t| t <= p.horizon()).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            let mut worst = f64::INFINITY;
            let mut breach = None;
            for t in times {
                let growth = if growth_p > 0.0 { p.running_sup(t, p.dim()).powf(growth_p) } else { 0.0 };
                let slack = schedule_integral(&s, p, t)? + floor_m * (1.0 + growth);
                if slack < 0.0 && breach.is_none() {
                    breach = Some(t);
                }
                worst = worst.min(slack);
            }
            Ok((worst, breach))
        })
        .collect::<Result<_>>()?;
    let mut report = AdmissibilityReport { admissible: true, worst_slack: f64::INFINITY, worst_path: None, breach_time: None };
    for (i, (w, b)) in per_path.into_iter().enumerate() {
        if w < report.worst_slack {
            report.worst_slack = w;
            report.worst_path = Some(i);
            report.breach_time = b;
        }
    }
    report.admissible = report.worst_slack >= 0.0;
    Ok(report)
}

/// Static cash and option holdings plus a dynamic rule.
#[derive(Clone)]
pub struct SemiStaticStrategy {
    pub a0: f64,
    pub statics: Vec<(QuotedOption, f64)>,
    pub dynamic: Arc<dyn DynamicRule>,
    pub floor_m: f64,
    pub growth_p: f64,
}

impl std::fmt::Debug for SemiStaticStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SemiStaticStrategy")
            .field("a0", &self.a0)
            .field("statics", &self.statics)
            .field("floor_m", &self.floor_m)
            .field("growth_p", &self.growth_p)
            .finish_non_exhaustive()
    }
}

impl SemiStaticStrategy {
    pub fn cash(a0: f64, dim: usize) -> Self {
        Self { a0, statics: Vec::new(), dynamic: Arc::new(zero_rule(dim)), floor_m: 0.0, growth_p: 0.0 }
    }

    /// Initial cost `a0 + sum a_i P(X_i)`.
    pub fn cost(&self) -> f64 {
        self.a0 + self.statics.iter().map(|(o, a)| a * o.price()).sum::<f64>()
    }

    /// Static payoff `a0 + sum a_i X_i` on `p`.
    pub fn static_payoff(&self, p: &GridPath, maturities: &[f64]) -> Result<f64> {
        let mut v = self.a0;
        for (o, a) in &self.statics {
            v += a * o.evaluate(p, maturities)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    /// Terminal `value - G` per path; `None` outside the checked scope.
    pub slacks: Vec<Option<f64>>,
    pub worst_slack: f64,
    pub worst_path: Option<usize>,
}

impl VerifyReport {
    pub fn superhedges(&self, tolerance: f64) -> bool {
        self.worst_slack >= -tolerance
    }

    /// CSV `path_id,slack` over checked paths.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path_id", "slack"]).map_err(csv_io)?;
        for (i, s) in self.slacks.iter().enumerate() {
            if let Some(s) = s {
                w.write_record([i.to_string(), format!("{s:.12e}")]).map_err(csv_io)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Checks `static payoff + int gamma dS >= G` on every path of the family
/// lying in the information space and within `eps` of the prediction set.
pub fn verify_superhedge(
    strategy: &SemiStaticStrategy,
    g: &Payoff,
    paths: &[GridPath],
    set: &PredictionSet,
    info: &InfoSpace,
    eps: f64,
) -> Result<VerifyReport> {
    let schedules: Vec<Schedule> = paths.par_iter().map(|p| strategy.dynamic.schedule(p)).collect::<Result<_>>()?;
    verify_schedules(strategy, &schedules, g, paths, set, info, eps)
}

/// As [`verify_superhedge`] with explicit per-path schedules (the dynamic
/// rule of `strategy` is ignored).
pub fn verify_schedules(
    strategy: &SemiStaticStrategy,
    schedules: &[Schedule],
    g: &Payoff,
    paths: &[GridPath],
    set: &PredictionSet,
    info: &InfoSpace,
    eps: f64,
) -> Result<VerifyReport> {
    if schedules.len() != paths.len() {
        return domain(format!("{} schedules for {} paths", schedules.len(), paths.len()));
    }
    let slacks: Vec<Option<f64>> = paths
        .par_iter()
        .zip(schedules)
        .map(|(p, s)| {
            if !in_fattened_set(set, info, p, eps)? {
                return Ok(None);
            }
            let value = strategy.static_payoff(p, &info.maturities)? + schedule_integral(s, p, p.horizon())?;
            Ok(Some(value - g.evaluate(p)?))
        })
        .collect::<Result<_>>()?;
    let mut report = VerifyReport { slacks, worst_slack: f64::INFINITY, worst_path: None };
    for (i, s) in report.slacks.iter().enumerate() {
        if let Some(s) = *s {
            if s < report.worst_slack {
                report.worst_slack = s;
                report.worst_path = Some(i);
            }
        }
    }
    Ok(report)
}

/// Dynamic positions read off a lattice superhedge: the position after each
/// history prefix, identified by the path values at the lattice dates.
#[derive(Debug, Clone)]
pub struct LatticeRule {
    times: Vec<f64>,
    children: HashMap<(usize, Vec<u64>), usize>,
    delta: Vec<Vec<f64>>,
}

impl LatticeRule {
    pub fn new(paths: &LatticePaths, delta: Vec<Vec<f64>>) -> Result<Self> {
        if delta.len() != paths.node_count() {
            return domain(format!("{} positions for {} nodes", delta.len(), paths.node_count()));
        }
        let mut children = HashMap::new();
        for node in 1..paths.node_count() {
            let parent = paths.node_parent(node).expect("non-root node has a parent");
            children.insert((parent, bits(paths.node_value(node))), node);
        }
        Ok(Self { times: paths.times[..paths.m].to_vec(), children, delta })
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

impl DynamicRule for LatticeRule {
    fn schedule(&self, p: &GridPath) -> Result<Schedule> {
        let mut node = 0usize;
        let mut positions = vec![self.delta[0].clone()];
        for &t in &self.times[1..] {
            let key = (node, bits(&p.value_at(t)));
            node = *self.children.get(&key).ok_or_else(|| Error::Domain(format!("path leaves the lattice at time {t}")))?;
            positions.push(self.delta[node].clone());
        }
        Ok(Schedule { times: self.times.clone(), positions })
    }
}

/// Semi-static strategy realising a lattice superhedging solution.
pub fn strategy_from_dual(prob: &MotProblem, sol: &SuperhedgeLPSolution, options: &[QuotedOption]) -> Result<SemiStaticStrategy> {
    if options.len() != sol.a_x.len() {
        return domain("one static holding per quoted option is required");
    }
    Ok(SemiStaticStrategy {
        a0: sol.a0,
        statics: options.iter().cloned().zip(sol.a_x.iter().copied()).collect(),
        dynamic: Arc::new(LatticeRule::new(&prob.paths, sol.delta.clone())?),
        floor_m: 0.0,
        growth_p: 0.0,
    })
}

/// CSV `path_id,rebalance_time,asset,position`, one row per coordinate.
pub fn write_strategy_csv<W: Write>(schedules: &[Schedule], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["path_id", "rebalance_time", "asset", "position"]).map_err(csv_io)?;
    for (id, s) in schedules.iter().enumerate() {
        for (t, x) in s.times.iter().zip(&s.positions) {
            for (i, v) in x.iter().enumerate() {
                w.write_record([id.to_string(), format!("{t}"), i.to_string(), format!("{v}")]).map_err(csv_io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_strategy_csv<R: Read>(reader: R, dim: usize) -> Result<Vec<Schedule>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out: Vec<Schedule> = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        if rec.len() != 4 {
            return Err(Error::Parse { line, message: format!("expected 4 fields, found {}", rec.len()) });
        }
        let field = |k: usize| rec[k].to_string();
        let parse_usize = |k: usize| field(k).parse::<usize>().map_err(|e| Error::Parse { line, message: format!("{}: {e}", field(k)) });
        let parse_f64 = |k: usize| field(k).parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{}: {e}", field(k)) });
        let (id, t, asset, pos) = (parse_usize(0)?, parse_f64(1)?, parse_usize(2)?, parse_f64(3)?);
        if asset >= dim {
            return Err(Error::Parse { line, message: format!("asset {asset} out of range") });
        }
        if id > out.len() {
            return Err(Error::Parse { line, message: format!("path ids must be consecutive, got {id}") });
        }
        if id == out.len() {
            out.push(Schedule { times: Vec::new(), positions: Vec::new() });
        }
        let s = &mut out[id];
        if s.times.last() != Some(&t) {
            s.times.push(t);
            s.positions.push(vec![0.0; dim]);
        }
        s.positions.last_mut().unwrap()[asset] = pos;
    }
    for (id, s) in out.iter().enumerate() {
        s.validate(dim).map_err(|e| Error::Parse { line: 0, message: format!("path {id}: {e}") })?;
    }
    Ok(out)
}

/// Predictable rule on discretised paths: the position at jump time `now`
/// given the segments `(jump_times, values)` strictly before it.
pub trait DiscreteRule: Send + Sync {
    fn position(&self, jump_times: &[Q], values: &[Vec<Q>], now: &Q) -> Vec<f64>;
}

/// Continuous-path rule holding, on each Lebesgue interval
/// `(tau_k, tau_{k+1}]`, the discrete rule evaluated on the discretised path
/// at the shifted time.
#[derive(Clone)]
pub struct LiftedRule {
    inner: Arc<dyn DiscreteRule>,
    info: InfoSpace,
    n: u32,
}

pub fn lift_strategy(rule: Arc<dyn DiscreteRule>, info: &InfoSpace, n: u32) -> LiftedRule {
    LiftedRule { inner: rule, info: info.clone(), n }
}

impl LiftedRule {
    fn bound(&self) -> f64 {
        self.n as f64
    }

    /// Positions `gamma_hat(tau_hat_k)` for `k = 0..=m`, where the last one
    /// pairs with the (empty) terminal jump.
    fn discrete_positions(&self, hat_times: &[Q], hat_values: &[Vec<Q>], horizon: &Q) -> Result<Vec<Vec<f64>>> {
        let m = hat_times.len();
        let mut out = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let now = if k < m { &hat_times[k] } else { horizon };
            let x = self.inner.position(&hat_times[..k], &hat_values[..k], now);
            if x.len() != self.info.dim() {
                return Err(Error::Contract(format!("discrete rule returned {} coordinates", x.len())));
            }
            if x.iter().any(|v: &f64| !(v.abs() <= self.bound())) {
                return Err(Error::Contract(format!("discrete rule position {x:?} exceeds the bound {}", self.n)));
            }
            out.push(x);
        }
        Ok(out)
    }
}

impl DynamicRule for LiftedRule {
    fn schedule(&self, p: &GridPath) -> Result<Schedule> {
        let st = hat_stages(p, &self.info, self.n)?;
        let m = st.partition.m();
        let gammas = self.discrete_positions(&st.hat.jump_times, &st.hat.values, &st.hat.horizon)?;
        let mut s = Schedule { times: Vec::with_capacity(m), positions: Vec::with_capacity(m) };
        for k in 0..m {
            let t = q_to_f64(&st.partition.taus[k]);
            if s.times.last() == Some(&t) {
                *s.positions.last_mut().unwrap() = gammas[k].clone();
            } else {
                s.times.push(t);
                s.positions.push(gammas[k].clone());
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MimicReport {
    /// `max_{k < m} |int_0^{tau_k} gamma dS - int_0^{tau_hat_k} gamma_hat dF_hat|`.
    pub before_last: f64,
    /// The same difference over the whole horizon.
    pub total: f64,
    /// `5 (d + K) N / 2^N`.
    pub bound_before_last: f64,
    /// `6 (d + K) N / 2^N`.
    pub bound_total: f64,
}

impl MimicReport {
    pub fn holds(&self) -> bool {
        self.before_last <= self.bound_before_last && self.total <= self.bound_total
    }
}

/// Distance between the lifted strategy's integral along `p` and the
/// discrete rule's integral along the discretised path.
pub fn integral_mimic_error(rule: Arc<dyn DiscreteRule>, p: &GridPath, info: &InfoSpace, n: u32) -> Result<MimicReport> {
    let lifted = lift_strategy(rule, info, n);
    let st = hat_stages(p, info, n)?;
    let m = st.partition.m();
    let gammas = lifted.discrete_positions(&st.hat.jump_times, &st.hat.values, &st.hat.horizon)?;
    let dot_diff = |g: &[f64], a: &[Q], b: &[Q]| -> f64 { g.iter().zip(a.iter().zip(b)).map(|(x, (u, v))| x * q_to_f64(&(u - v))).sum() };
    let s = &st.partition.values;
    let v = &st.hat.values;
    let mut cont = 0.0f64;
    let mut disc = 0.0;
    let mut before_last = 0.0f64;
    for k in 0..m {
        before_last = before_last.max((cont - disc).abs());
        cont += dot_diff(&gammas[k], &s[k + 1], &s[k]);
        if k + 1 < m {
            disc += dot_diff(&gammas[k + 1], &v[k + 1], &v[k]);
        } else {
            disc += dot_diff(&gammas[m], &st.hat.terminal, &v[m - 1]);
        }
    }
    let scale = info.dim() as f64 * n as f64 / 2f64.powi(n as i32);
    Ok(MimicReport { before_last, total: (cont - disc).abs(), bound_before_last: 5.0 * scale, bound_total: 6.0 * scale })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(times: &[f64], values: &[f64]) -> GridPath {
        GridPath::new(times.to_vec(), values.iter().map(|v| vec![*v]).collect()).unwrap()
    }

    #[test]
    fn buy_and_hold_and_single_rebalance() {
        let p = path(&[0.0, 1.0], &[1.0, 1.2]);
        let hold = FixedRule(Schedule::constant(vec![1.0]));
        assert!((pathwise_integral(&hold, &p, 1.0).unwrap() - 0.2).abs() < 1e-15);
        let p = path(&[0.0, 0.5, 1.0], &[1.0, 1.3, 0.9]);
        let once = FixedRule(Schedule { times: vec![0.0, 0.5], positions: vec![vec![2.0], vec![0.0]] });
        assert!((pathwise_integral(&once, &p, 1.0).unwrap() - 0.6).abs() < 1e-15);
        assert!((pathwise_integral(&once, &p, 0.25).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn admissibility_reports_first_breach() {
        let p = path(&[0.0, 0.5, 1.0], &[1.0, 3.0, 5.0]);
        let short = FixedRule(Schedule::constant(vec![-1.0]));
        let r = check_admissible(&short, std::slice::from_ref(&p), 1.0, 0.0).unwrap();
        assert!(!r.admissible);
        assert_eq!(r.breach_time, Some(0.5));
        let r = check_admissible(&zero_rule(1), &[p], 2.0, 0.0).unwrap();
        assert_eq!(r.worst_slack, 2.0);
    }

    #[test]
    fn strategy_csv_round_trip() {
        let s = vec![
            Schedule { times: vec![0.0, 0.5], positions: vec![vec![1.0, -0.25], vec![0.125, 3.0]] },
            Schedule::constant(vec![0.0, 1.0]),
        ];
        let mut buf = Vec::new();
        write_strategy_csv(&s, &mut buf).unwrap();
        assert_eq!(read_strategy_csv(buf.as_slice(), 2).unwrap(), s);
    }

    struct Constant(f64);
    impl DiscreteRule for Constant {
        fn position(&self, _: &[Q], _: &[Vec<Q>], _: &Q) -> Vec<f64> {
            vec![self.0]
        }
    }

    #[test]
    fn constant_discrete_rule_lifts_to_constant() {
        let info = InfoSpace::assets_only(1, vec![1.0]).unwrap();
        let p = path(&[0.0, 0.5, 1.0], &[1.0, 1.2, 0.95]);
        let lifted = lift_strategy(Arc::new(Constant(3.0)), &info, 5);
        let s = lifted.schedule(&p).unwrap();
        assert!(s.positions.iter().all(|x| x == &vec![3.0]));
        let r = integral_mimic_error(Arc::new(Constant(5.0)), &p, &info, 5).unwrap();
        assert!(r.holds(), "{r:?}");
        let flat = GridPath::constant(1.0, 1).unwrap();
        let r = integral_mimic_error(Arc::new(Constant(5.0)), &flat, &info, 5).unwrap();
        assert_eq!(r.total, 0.0);
        assert!(matches!(lift_strategy(Arc::new(Constant(9.0)), &info, 5).schedule(&p), Err(Error::Contract(_))));
    }
}
