//! Lebesgue partitions and the staged discretisation of continuous paths.
//!
//! All arithmetic here is exact. Grid paths are converted to rationals
//! (every `f64` is dyadic), crossing times of linear segments are solved in
//! closed form, and jump times of discretised paths are rationals found by a
//! Stern–Brocot search. The sup-norm error bounds checked downstream are
//! strict inequalities, so no floating-point root-finding is involved.
//!
//! Stages, for a path `S` with Lebesgue times `tau_0 < ... < tau_m = T` at
//! mesh `2^-N`:
//!
//! * `F`: holds `S(tau_k)` on `[tau_k, tau_{k+1})`.
//! * `F_check`: holds `v_k = S_0 - pi_{N+1}(S(tau_1)) + pi_{N+k+1}(S(tau_{k+1}))`
//!   on the same intervals, `pi_M` being the ceiling onto the `2^-M` grid.
//! * `F_hat`: the same values on shifted rational times `tau_hat_k` in
//!   `(tau_{k-1}, tau_k]`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::paths::{in_info_space, GridPath, InfoSpace, DEFAULT_INFO_TOL};
use crate::payoffs::Payoff;
use crate::rational::{RawQ, q_approx_f64, ceil_to_dyadic, dyadic_multiple, q_add, q_sub, format_q, parse_q, pow2, q_cmp, q_from_f64, q_int, q_to_f64, simplest_in_half_open, simplest_in_half_open_raw, Q};

/// Exact piecewise-linear path with rational knots. Unlike [`GridPath`]
/// it carries no sign or start-value invariants, so it can hold raw lifts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPath {
    times: Vec<Q>,
    values: Vec<Vec<Q>>,
}

impl ExactPath {
    pub fn new(times: Vec<Q>, values: Vec<Vec<Q>>) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return domain("exact path needs at least two knots with matching values");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("exact path knots must be strictly increasing");
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return domain("exact path values have inconsistent dimension");
        }
        Ok(Self { times, values })
    }

    pub fn from_grid(p: &GridPath) -> Result<Self> {
        let times = p.times().iter().map(|&t| q_from_f64(t)).collect::<Result<Vec<_>>>()?;
        let values = p
            .values()
            .iter()
            .map(|v| v.iter().map(|&x| q_from_f64(x)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, values)
    }

    pub fn times(&self) -> &[Q] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<Q>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> &Q {
        self.times.last().unwrap()
    }

    fn segment_of(&self, t: &Q) -> usize {
        // index j with times[j] <= t <= times[j+1]
        match self.times.binary_search_by(|x| q_cmp(x, t)) {
            Ok(j) => j.min(self.times.len() - 2),
            Err(j) => j.saturating_sub(1).min(self.times.len() - 2),
        }
    }

    fn value_on_segment(&self, j: usize, t: &Q) -> Vec<Q> {
        let dt = &self.times[j + 1] - &self.times[j];
        let w = (t - &self.times[j]) / dt;
        self.values[j].iter().zip(&self.values[j + 1]).map(|(a, b)| a + (b - a) * &w).collect()
    }

    pub fn value_at(&self, t: &Q) -> Vec<Q> {
        self.value_on_segment(self.segment_of(t), t)
    }

    /// `max_i |v_i - s_i(t)|`, unreduced.
    fn abs_diff_at(&self, v: &[Q], t: &Q) -> RawQ {
        let j = self.segment_of(t);
        let t0 = RawQ::of(&self.times[j]);
        let w = RawQ::of(t).sub(&t0).div(&RawQ::of(&self.times[j + 1]).sub(&t0));
        let mut best = RawQ::of(&Q::zero());
        for ((x, a), b) in v.iter().zip(&self.values[j]).zip(&self.values[j + 1]) {
            let a = RawQ::of(a);
            let d = RawQ::of(x).sub(&a).sub(&RawQ::of(b).sub(&a).mul(&w)).abs();
            if d.compare(&best).is_gt() {
                best = d;
            }
        }
        best
    }

    /// Coordinatewise `max(x, 0)`, with the zero crossings inserted as knots
    /// so the result is again piecewise linear on its grid.
    pub fn positive_part(&self) -> ExactPath {
        let mut times = vec![self.times[0].clone()];
        let mut values = vec![clamp0(&self.values[0])];
        for j in 0..self.times.len() - 1 {
            let (a, b) = (&self.values[j], &self.values[j + 1]);
            let mut cuts: Vec<Q> = Vec::new();
            for i in 0..self.dim() {
                if (a[i].is_negative() && b[i].is_positive()) || (a[i].is_positive() && b[i].is_negative()) {
                    let w = &a[i] / (&a[i] - &b[i]);
                    cuts.push(&self.times[j] + w * (&self.times[j + 1] - &self.times[j]));
                }
            }
            cuts.sort();
            cuts.dedup();
            for t in cuts {
                let v = self.value_on_segment(j, &t);
                times.push(t);
                values.push(clamp0(&v));
            }
            times.push(self.times[j + 1].clone());
            values.push(clamp0(b));
        }
        ExactPath { times, values }
    }

    /// Nearest `f64` grid path. Knots that collapse onto the previous time
    /// after rounding are dropped.
    pub fn to_grid(&self) -> Result<GridPath> {
        let mut times: Vec<f64> = Vec::with_capacity(self.times.len());
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(self.times.len());
        let last = self.times.len() - 1;
        for (k, (t, v)) in self.times.iter().zip(&self.values).enumerate() {
            let tf = q_to_f64(t);
            let vf: Vec<f64> = v.iter().map(q_to_f64).collect();
            if let Some(&prev) = times.last() {
                if tf <= prev {
                    if k == last {
                        *values.last_mut().unwrap() = vf;
                    }
                    continue;
                }
            }
            times.push(tf);
            values.push(vf);
        }
        GridPath::new(times, values)
    }
}

fn clamp0(v: &[Q]) -> Vec<Q> {
    v.iter().map(|x| if x.is_negative() { Q::zero() } else { x.clone() }).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LebesguePartition {
    pub n: u32,
    /// `tau_0 = 0 < ... < tau_m = T`.
    pub taus: Vec<Q>,
    /// Path values at the `taus`.
    pub values: Vec<Vec<Q>>,
    /// Whether `tau_m` is itself a genuine `2^-N` crossing rather than the
    /// horizon cap.
    pub last_is_crossing: bool,
}

impl LebesguePartition {
    pub fn m(&self) -> usize {
        self.taus.len() - 1
    }

    pub fn taus_f64(&self) -> Vec<f64> {
        self.taus.iter().map(q_to_f64).collect()
    }
}

/// Successive first times at which the max-coordinate deviation from the
/// previous partition value reaches `h`, capped at the horizon.
pub fn partition_exact(path: &ExactPath, h: &Q) -> (Vec<Q>, Vec<Vec<Q>>, bool) {
    let nseg = path.times.len() - 1;
    let horizon = path.horizon().clone();
    let mut taus = vec![path.times[0].clone()];
    let mut vals = vec![path.values[0].clone()];
    let mut c = path.values[0].clone();
    // position inside segment j as a fraction w of its length
    let mut w = RawQ::of(&Q::zero());
    let mut j = 0usize;
    let deltas: Vec<Vec<RawQ>> = (0..nseg)
        .map(|j| path.values[j].iter().zip(&path.values[j + 1]).map(|(a, b)| RawQ::of(b).sub(&RawQ::of(a))).collect())
        .collect();
    let one = RawQ::of(&Q::one());
    let h = RawQ::of(h);
    loop {
        let x0 = &path.values[j];
        let mut best: Option<RawQ> = None;
        for (i, dx) in deltas[j].iter().enumerate() {
            if dx.num.is_zero() {
                continue;
            }
            let ci = RawQ::of(&c[i]).sub(&RawQ::of(&x0[i]));
            let target = if dx.num.is_positive() { ci.add(&h) } else { ci.sub(&h) };
            let root = target.div(dx);
            if root.compare(&w).is_gt() && root.compare(&one).is_le() && best.as_ref().is_none_or(|b| root.compare(b).is_lt()) {
                best = Some(root);
            }
        }
        if let Some(r) = best {
            let (t0, t1) = (&path.times[j], &path.times[j + 1]);
            let at_end = r.compare(&one).is_eq();
            let t = if at_end {
                t1.clone()
            } else {
                let t0r = RawQ::of(t0);
                t0r.add(&r.mul(&RawQ::of(t1).sub(&t0r))).to_q()
            };
            c = if at_end {
                path.values[j + 1].clone()
            } else {
                x0.iter().zip(&deltas[j]).map(|(x, dx)| RawQ::of(x).add(&dx.mul(&r)).to_q()).collect()
            };
            taus.push(t.clone());
            vals.push(c.clone());
            if t == horizon {
                return (taus, vals, true);
            }
            w = r;
            continue;
        }
        j += 1;
        if j == nseg {
            taus.push(horizon);
            vals.push(path.values[nseg].clone());
            return (taus, vals, false);
        }
        w = RawQ::of(&Q::zero());
    }
}

pub fn lebesgue_partition(p: &GridPath, n: u32) -> Result<LebesguePartition> {
    let exact = ExactPath::from_grid(p)?;
    Ok(lebesgue_partition_exact(&exact, n))
}

pub fn lebesgue_partition_exact(p: &ExactPath, n: u32) -> LebesguePartition {
    let (taus, values, last_is_crossing) = partition_exact(p, &pow2(-(n as i64)));
    LebesguePartition { n, taus, values, last_is_crossing }
}

/// Right-continuous piecewise-constant path on `[0, T]` with exact
/// rational jump times and values.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantPath {
    pub n: u32,
    pub horizon: Q,
    /// `t_0 = 0 < t_1 < ... < t_{l-1} < T`.
    pub jump_times: Vec<Q>,
    /// `values[k]` is held on `[t_k, t_{k+1})`.
    pub values: Vec<Vec<Q>>,
    /// Value at `T`.
    pub terminal: Vec<Q>,
}

impl PiecewiseConstantPath {
    pub fn constant(n: u32, horizon: Q, dim: usize) -> Self {
        let one = vec![Q::one(); dim];
        Self { n, horizon, jump_times: vec![Q::zero()], values: vec![one.clone()], terminal: one }
    }

    pub fn dim(&self) -> usize {
        self.terminal.len()
    }

    pub fn value_at(&self, t: &Q) -> &[Q] {
        if t >= &self.horizon {
            return &self.terminal;
        }
        let k = match self.jump_times.binary_search_by(|x| q_cmp(x, t)) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        &self.values[k]
    }

    /// Jump times with nonzero jumps, and the value after each. The first
    /// entry is `(0, v_0)`.
    pub fn actual_jumps(&self) -> Vec<(Q, Vec<Q>)> {
        let mut out = vec![(Q::zero(), self.values[0].clone())];
        for k in 1..self.values.len() {
            if self.values[k] != out.last().unwrap().1 {
                out.push((self.jump_times[k].clone(), self.values[k].clone()));
            }
        }
        out
    }

    /// Number of intervals between actual jumps and the horizon.
    pub fn step_count(&self) -> usize {
        self.actual_jumps().len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&PcpJson::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: PcpJson = serde_json::from_str(s)?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum QText {
    Text(String),
    Num(f64),
}

impl QText {
    fn to_q(&self) -> Result<Q> {
        match self {
            QText::Text(s) => parse_q(s),
            QText::Num(x) => q_from_f64(*x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JumpJson {
    t: String,
    v: Vec<QText>,
}

#[derive(Serialize, Deserialize)]
struct PcpJson {
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "T")]
    horizon: String,
    jumps: Vec<JumpJson>,
    terminal: Vec<QText>,
}

impl From<&PiecewiseConstantPath> for PcpJson {
    fn from(p: &PiecewiseConstantPath) -> Self {
        let qv = |v: &[Q]| v.iter().map(|x| QText::Text(format_q(x))).collect();
        PcpJson {
            n: p.n,
            horizon: format_q(&p.horizon),
            jumps: p.jump_times.iter().zip(&p.values).map(|(t, v)| JumpJson { t: format_q(t), v: qv(v) }).collect(),
            terminal: qv(&p.terminal),
        }
    }
}

impl TryFrom<PcpJson> for PiecewiseConstantPath {
    type Error = Error;

    fn try_from(raw: PcpJson) -> Result<Self> {
        if raw.jumps.is_empty() {
            return domain("piecewise-constant path needs at least one segment");
        }
        let conv = |v: &[QText]| v.iter().map(QText::to_q).collect::<Result<Vec<_>>>();
        let mut jump_times = Vec::new();
        let mut values = Vec::new();
        for j in &raw.jumps {
            jump_times.push(parse_q(&j.t)?);
            values.push(conv(&j.v)?);
        }
        Ok(PiecewiseConstantPath {
            n: raw.n,
            horizon: parse_q(&raw.horizon)?,
            jump_times,
            values,
            terminal: conv(&raw.terminal)?,
        })
    }
}

/// `x -> 2^-M ceil(2^M x)` per coordinate.
pub fn grid_project(x: &[Q], m: u32) -> Vec<Q> {
    x.iter().map(|xi| ceil_to_dyadic(xi, m as i64)).collect()
}

/// Simplest rational in `(a, b]`; see [`simplest_in_half_open`].
pub fn shift_interval_rational(a: &Q, b: &Q) -> Result<Q> {
    let (p, q) = simplest_in_half_open(a, b)?;
    Ok(Q::new(p, q))
}

/// All three discretisation stages of one path.
#[derive(Debug, Clone)]
pub struct Stages {
    pub path: ExactPath,
    pub partition: LebesguePartition,
    pub naive: PiecewiseConstantPath,
    pub check: PiecewiseConstantPath,
    pub hat: PiecewiseConstantPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorChain {
    pub naive_vs_path: Q,
    pub check_vs_naive: Q,
    pub hat_vs_check: Q,
    pub hat_vs_path: Q,
}

impl fmt::Display for ErrorChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|F-S|={:.3e} |Fc-F|={:.3e} |Fh-Fc|={:.3e} |Fh-S|={:.3e}",
            q_to_f64(&self.naive_vs_path),
            q_to_f64(&self.check_vs_naive),
            q_to_f64(&self.hat_vs_check),
            q_to_f64(&self.hat_vs_path)
        )
    }
}

impl Stages {
    pub fn errors(&self) -> ErrorChain {
        ErrorChain {
            naive_vs_path: distance_to_linear(&self.naive, &self.path),
            check_vs_naive: distance_between(&self.check, &self.naive),
            hat_vs_check: distance_between(&self.hat, &self.check),
            hat_vs_path: distance_to_linear(&self.hat, &self.path),
        }
    }
}

/// Runs the three stages without the membership check or the information
/// space precondition.
pub fn stages(p: &GridPath, n: u32) -> Result<Stages> {
    let path = ExactPath::from_grid(p)?;
    stages_exact(path, n)
}

pub fn stages_exact(path: ExactPath, n: u32) -> Result<Stages> {
    if n < 1 {
        return domain("mesh exponent must be at least 1");
    }
    let partition = lebesgue_partition_exact(&path, n);
    let m = partition.m();
    let taus = &partition.taus;
    let s = &partition.values;
    let horizon = path.horizon().clone();
    let nn = n;

    let naive = PiecewiseConstantPath {
        n,
        horizon: horizon.clone(),
        jump_times: taus[..m].to_vec(),
        values: s[..m].to_vec(),
        terminal: s[m].clone(),
    };

    let first = grid_project(&s[1], nn + 1);
    let offset: Vec<Q> = s[0].iter().zip(&first).map(|(a, b)| q_sub(a, b)).collect();
    let values: Vec<Vec<Q>> = (0..m)
        .map(|k| {
            let proj = grid_project(&s[k + 1], nn + k as u32 + 1);
            offset.iter().zip(&proj).map(|(o, x)| q_add(o, x)).collect()
        })
        .collect();
    let terminal = values[m - 1].clone();
    let check = PiecewiseConstantPath {
        n,
        horizon: horizon.clone(),
        jump_times: taus[..m].to_vec(),
        values: values.clone(),
        terminal: terminal.clone(),
    };

    let mut tau_hat = vec![Q::zero()];
    for k in 1..m {
        let prev = &tau_hat[k - 1];
        let prev_raw = RawQ::of(prev);
        let lo = RawQ::of(&taus[k - 1]).sub(&prev_raw);
        let hi = RawQ::of(&taus[k]).sub(&prev_raw);
        let (p, q) = simplest_in_half_open_raw(&lo, &hi)?;
        tau_hat.push(prev + Q::new(p, q));
    }
    let hat = PiecewiseConstantPath { n, horizon, jump_times: tau_hat, values, terminal };
    Ok(Stages { path, partition, naive, check, hat })
}

pub fn naive_discretise(p: &GridPath, n: u32) -> Result<PiecewiseConstantPath> {
    Ok(stages(p, n)?.naive)
}

pub fn check_discretise(p: &GridPath, n: u32) -> Result<PiecewiseConstantPath> {
    Ok(stages(p, n)?.check)
}

/// Staged discretisation onto the countable class, verified for membership.
pub fn hat_discretise(p: &GridPath, info: &InfoSpace, n: u32) -> Result<PiecewiseConstantPath> {
    Ok(hat_stages(p, info, n)?.hat)
}

pub fn hat_stages(p: &GridPath, info: &InfoSpace, n: u32) -> Result<Stages> {
    if n < 4 {
        return domain(format!("mesh exponent must be at least 4, got {n}"));
    }
    if p.dim() != info.dim() {
        return domain(format!("path has {} coordinates, information space {}", p.dim(), info.dim()));
    }
    if (p.horizon() - info.horizon()).abs() > 0.0 {
        return domain("path horizon differs from the last maturity");
    }
    if !in_info_space(p, info, DEFAULT_INFO_TOL) {
        return domain("path is not in the information space");
    }
    // option coordinates of the discretised path exceed the path by less than
    // 2^{-N+1}; keep them strictly below the absorbing cap
    if info.k() > 0 {
        let cap = info.kappa() + 1.0 - 2f64.powi(-(n as i32) + 1);
        for i in info.d..info.dim() {
            if p.coord_max(i) > cap {
                return domain(format!("option coordinate {} rises above {cap}", i + 1));
            }
        }
    }
    let st = stages(p, n)?;
    let report = is_member_dhat(&st.hat, info, n);
    if !report.member {
        return Err(Error::InternalConsistency(format!("discretised path left the class: {report}")));
    }
    Ok(st)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipReport {
    pub member: bool,
    /// Number (1 to 7) of the first violated condition.
    pub violated: Option<u8>,
    pub detail: String,
}

impl fmt::Display for MembershipReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.violated {
            None => write!(f, "member"),
            Some(c) => write!(f, "condition {c} violated: {}", self.detail),
        }
    }
}

fn fail(c: u8, detail: String) -> MembershipReport {
    MembershipReport { member: false, violated: Some(c), detail }
}

/// Checks the seven defining conditions of the countable class at mesh `N`.
///
/// 1. every coordinate starts at 1;
/// 2. finitely many rational jump times in `[0, T)`, no jump at `T`;
/// 3. the k-th listed jump is an integer multiple `j 2^-(N+k+1)` with
///    `|j| <= 2^(k+1) + 1` (the range realised by staged grid projections);
/// 4. all coordinates at least `-2^(-N+3)`;
/// 5. option coordinates bounded by `kappa + 1`;
/// 6. constant after a coordinate touches the floor;
/// 7. constant after an option coordinate touches `kappa + 1`.
pub fn is_member_dhat(f: &PiecewiseConstantPath, info: &InfoSpace, n: u32) -> MembershipReport {
    let dim = info.dim();
    let l = f.values.len();
    if l == 0 || f.jump_times.len() != l {
        return fail(2, "jump times and values differ in length".into());
    }
    if f.terminal.len() != dim || f.values.iter().any(|v| v.len() != dim) {
        return fail(2, format!("expected {dim} coordinates"));
    }
    if f.values[0].iter().any(|x| !x.is_one()) {
        return fail(1, "initial value is not (1, ..., 1)".into());
    }
    let horizon = match q_from_f64(info.horizon()) {
        Ok(h) => h,
        Err(e) => return fail(2, e.to_string()),
    };
    if f.horizon != horizon {
        return fail(2, format!("horizon {} differs from last maturity", format_q(&f.horizon)));
    }
    if !f.jump_times[0].is_zero() {
        return fail(2, "first segment must start at 0".into());
    }
    if f.jump_times.windows(2).any(|w| w[1] <= w[0]) {
        return fail(2, "jump times not strictly increasing".into());
    }
    if f.jump_times[l - 1] >= horizon {
        return fail(2, "jump at or after the horizon".into());
    }
    if f.terminal != f.values[l - 1] {
        return fail(2, "terminal value differs from the last segment".into());
    }
    for k in 1..l {
        let limit = (BigInt::one() << (k + 1)) + 1;
        for i in 0..dim {
            let jump = q_sub(&f.values[k][i], &f.values[k - 1][i]);
            if dyadic_multiple(&jump, n as i64 + k as i64 + 1).is_none_or(|j| j.abs() > limit) {
                return fail(3, format!("jump {k} of coordinate {} is {}", i + 1, format_q(&jump)));
            }
        }
    }
    let floor = -pow2(-(n as i64) + 3);
    for (k, v) in f.values.iter().enumerate() {
        if let Some(i) = v.iter().position(|x| x < &floor) {
            return fail(4, format!("coordinate {} below the floor on segment {k}", i + 1));
        }
    }
    let cap = match q_from_f64(info.kappa()) {
        Ok(kappa) => kappa + q_int(1),
        Err(e) => return fail(5, e.to_string()),
    };
    for (k, v) in f.values.iter().enumerate() {
        if let Some(i) = (info.d..dim).find(|&i| v[i].abs() > cap) {
            return fail(5, format!("option coordinate {} exceeds kappa + 1 on segment {k}", i + 1));
        }
    }
    for (k, v) in f.values.iter().enumerate() {
        if v.iter().any(|x| x == &floor) && f.values[k + 1..].iter().any(|w| w != v) {
            return fail(6, format!("path moves after touching the floor on segment {k}"));
        }
        if (info.d..dim).any(|i| v[i] == cap) && f.values[k + 1..].iter().any(|w| w != v) {
            return fail(7, format!("path moves after touching the cap on segment {k}"));
        }
    }
    MembershipReport { member: true, violated: None, detail: String::new() }
}

/// Linear interpolation through the actual jumps `(t, value after jump)` and
/// `(T, terminal)`. May be negative; see [`ExactPath::positive_part`].
pub fn lift_exact(f: &PiecewiseConstantPath) -> ExactPath {
    let jumps = f.actual_jumps();
    let mut times: Vec<Q> = jumps.iter().map(|(t, _)| t.clone()).collect();
    let mut values: Vec<Vec<Q>> = jumps.into_iter().map(|(_, v)| v).collect();
    times.push(f.horizon.clone());
    values.push(f.terminal.clone());
    ExactPath { times, values }
}

/// Continuous lift `F_inv(f) v 0` of a class member.
pub fn lift_continuous(f: &PiecewiseConstantPath, info: &InfoSpace) -> Result<GridPath> {
    let report = is_member_dhat(f, info, f.n);
    if !report.member {
        return domain(format!("lift needs a class member: {report}"));
    }
    lift_exact(f).positive_part().to_grid()
}

/// `G(F_inv(f) v 0)`.
pub fn extend_payoff(g: &Payoff, f: &PiecewiseConstantPath, info: &InfoSpace) -> Result<f64> {
    g.evaluate(&lift_continuous(f, info)?)
}

/// Lebesgue step count at mesh `2^-D` of the positive part of the lift.
pub fn count_steps_on_lift(f: &PiecewiseConstantPath, d: u32) -> usize {
    let lifted = lift_exact(f).positive_part();
    partition_exact(&lifted, &pow2(-(d as i64))).0.len() - 1
}

/// Slack below the largest floating-point estimate within which candidates
/// are re-evaluated exactly.
const REFINE_SLACK: f64 = 1e-7;

/// Exact maximum over candidates, evaluating exactly only those whose
/// estimate comes within [`REFINE_SLACK`] of the best estimate.
fn refine_max(estimates: &[f64], exact: impl Fn(usize) -> RawQ) -> Q {
    let top = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = top - REFINE_SLACK * (1.0 + top.abs());
    let mut best = RawQ::of(&Q::zero());
    for (i, e) in estimates.iter().enumerate() {
        // NaN estimates are always checked exactly
        if !(*e < cut) {
            let d = exact(i);
            if d.compare(&best).is_gt() {
                best = d;
            }
        }
    }
    best.to_q()
}

fn max_abs_diff_raw(a: &[Q], b: &[Q]) -> RawQ {
    a.iter().zip(b).map(|(x, y)| RawQ::of(x).sub(&RawQ::of(y)).abs()).fold(RawQ::of(&Q::zero()), |m, d| if d.compare(&m).is_gt() { d } else { m })
}

fn to_f64s(v: &[Q]) -> Vec<f64> {
    v.iter().map(q_approx_f64).collect()
}

fn max_abs_diff_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

impl PiecewiseConstantPath {
    /// Index of the segment holding at `t`, or `None` at the horizon.
    fn segment_index(&self, t: &Q) -> Option<usize> {
        if t >= &self.horizon {
            return None;
        }
        Some(match self.jump_times.binary_search_by(|x| q_cmp(x, t)) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        })
    }
}

/// Where a candidate distance is taken on the linear path.
enum Probe<'a> {
    Time(&'a Q),
    Knot(usize),
}

/// Exact `sup_t |f(t) - s(t)|` for piecewise-constant `f` and
/// piecewise-linear `s` on the same horizon.
pub fn distance_to_linear(f: &PiecewiseConstantPath, s: &ExactPath) -> Q {
    let st: Vec<f64> = s.times.iter().map(q_approx_f64).collect();
    let sv: Vec<Vec<f64>> = s.values.iter().map(|v| to_f64s(v)).collect();
    let s_at = |t: f64| -> Vec<f64> {
        let j = st.partition_point(|&u| u <= t).clamp(1, st.len() - 1) - 1;
        let w = if st[j + 1] > st[j] { ((t - st[j]) / (st[j + 1] - st[j])).clamp(0.0, 1.0) } else { 0.0 };
        sv[j].iter().zip(&sv[j + 1]).map(|(a, b)| a + (b - a) * w).collect()
    };
    let fv: Vec<Vec<f64>> = f.values.iter().map(|v| to_f64s(v)).collect();
    let terminal = to_f64s(&f.terminal);

    // (value vector of f, where s is probed)
    let mut cands: Vec<(&[Q], Probe)> = vec![(&f.terminal, Probe::Time(&f.horizon))];
    let mut est = vec![max_abs_diff_f64(&terminal, &s_at(q_approx_f64(&f.horizon)))];
    let l = f.values.len();
    let mut knot = 0usize;
    for k in 0..l {
        let a = &f.jump_times[k];
        let b = if k + 1 < l { &f.jump_times[k + 1] } else { &f.horizon };
        let v = &f.values[k];
        // sup over [a, b) of a continuous function equals its max on [a, b]
        for t in [a, b] {
            cands.push((v, Probe::Time(t)));
            est.push(max_abs_diff_f64(&fv[k], &s_at(q_approx_f64(t))));
        }
        while knot < s.times.len() && &s.times[knot] <= a {
            knot += 1;
        }
        let mut j = knot;
        while j < s.times.len() && &s.times[j] < b {
            cands.push((v, Probe::Knot(j)));
            est.push(max_abs_diff_f64(&fv[k], &sv[j]));
            j += 1;
        }
    }
    refine_max(&est, |i| {
        let (v, probe) = &cands[i];
        match probe {
            Probe::Time(t) => s.abs_diff_at(v, t),
            Probe::Knot(j) => max_abs_diff_raw(v, &s.values[*j]),
        }
    })
}

/// Exact sup-norm distance between two piecewise-constant paths.
pub fn distance_between(f: &PiecewiseConstantPath, g: &PiecewiseConstantPath) -> Q {
    let fv: Vec<Vec<f64>> = f.values.iter().chain(std::iter::once(&f.terminal)).map(|v| to_f64s(v)).collect();
    let gv: Vec<Vec<f64>> = g.values.iter().chain(std::iter::once(&g.terminal)).map(|v| to_f64s(v)).collect();
    let mut times: Vec<&Q> = f.jump_times.iter().chain(&g.jump_times).filter(|t| *t < &f.horizon).collect();
    times.sort();
    times.dedup();
    // segment pairs, the last index standing for the terminal value
    let mut pairs = vec![(f.values.len(), g.values.len())];
    for t in times {
        pairs.push((f.segment_index(t).unwrap_or(f.values.len()), g.segment_index(t).unwrap_or(g.values.len())));
    }
    let est: Vec<f64> = pairs.iter().map(|&(i, j)| max_abs_diff_f64(&fv[i], &gv[j])).collect();
    fn pick(p: &PiecewiseConstantPath, i: usize) -> &[Q] {
        p.values.get(i).unwrap_or(&p.terminal)
    }
    refine_max(&est, |k| {
        let (i, j) = pairs[k];
        max_abs_diff_raw(pick(f, i), pick(g, j))
    })
}

/// `sup_t |lift(f)(t) - f(t)|`.
pub fn lift_error(f: &PiecewiseConstantPath) -> Q {
    distance_to_linear(f, &lift_exact(f))
}
