//! Payoff library with regularity metadata.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::discretise::PiecewiseConstantPath;
use crate::error::{domain, Error, Result};
use crate::paths::GridPath;
use crate::rational::{q_from_f64, q_to_f64, Q};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Vanilla {
    Call { strike: f64 },
    Put { strike: f64 },
    /// The price itself.
    Forward,
}

impl Vanilla {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Vanilla::Call { strike } => (x - strike).max(0.0),
            Vanilla::Put { strike } => (strike - x).max(0.0),
            Vanilla::Forward => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Sampling {
    Discrete { times: Vec<f64> },
    /// Time average over `[0, T]`.
    Continuous,
}

/// Arbitrary payoff values on a finite set of lattice paths, keyed by the
/// path values at `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableJson", into = "TableJson")]
pub struct Table {
    times: Vec<f64>,
    entries: BTreeMap<Vec<u64>, f64>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    path: Vec<Vec<f64>>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    times: Vec<f64>,
    entries: Vec<TableEntry>,
}

impl TryFrom<TableJson> for Table {
    type Error = Error;
    fn try_from(raw: TableJson) -> Result<Self> {
        let mut t = Table::new(raw.times);
        for e in raw.entries {
            t.insert(&e.path, e.value)?;
        }
        Ok(t)
    }
}

impl From<Table> for TableJson {
    fn from(t: Table) -> Self {
        let n = t.times.len();
        let entries = t
            .entries
            .iter()
            .map(|(key, &value)| {
                let dim = key.len() / n;
                let path = key.chunks(dim).map(|c| c.iter().map(|b| f64::from_bits(*b)).collect()).collect();
                TableEntry { path, value }
            })
            .collect();
        TableJson { times: t.times, entries }
    }
}

fn key_of(values: &[Vec<f64>]) -> Vec<u64> {
    // +0.0 and -0.0 share a key
    values.iter().flatten().map(|x| (x + 0.0).to_bits()).collect()
}

impl Table {
    pub fn new(times: Vec<f64>) -> Self {
        Self { times, entries: BTreeMap::new() }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, path_values: &[Vec<f64>], value: f64) -> Result<()> {
        if path_values.len() != self.times.len() {
            return domain("table entry length differs from the table times");
        }
        self.entries.insert(key_of(path_values), value);
        Ok(())
    }

    pub fn lookup(&self, p: &GridPath) -> Result<f64> {
        let sampled: Vec<Vec<f64>> = self.times.iter().map(|&t| p.value_at(t)).collect();
        self.entries.get(&key_of(&sampled)).copied().ok_or_else(|| Error::Domain("path is not in the payoff table".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum PayoffKind {
    European { func: Vanilla, asset: usize, time: f64 },
    /// `f(sum_i w_i S^(i)_time)`.
    Basket { weights: Vec<f64>, func: Vanilla, time: f64 },
    LookbackMax { asset: usize },
    AsianAverage { asset: usize, sampling: Sampling },
    TableGrid { table: Table },
    Constant { value: f64 },
    Combination { terms: Vec<(f64, Payoff)> },
    Clipped { inner: Box<Payoff>, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Modulus {
    /// `c x`.
    Linear { c: f64 },
    /// `c x^alpha`.
    Power { c: f64, alpha: f64 },
}

impl Modulus {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Modulus::Linear { c } => c * x,
            Modulus::Power { c, alpha } => c * x.powf(alpha),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    #[serde(rename = "L")]
    pub l: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    #[serde(flatten)]
    pub kind: PayoffKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<Modulus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<Growth>,
    #[serde(default, rename = "time_continuity_L", skip_serializing_if = "Option::is_none")]
    pub time_continuity_l: Option<f64>,
}

impl Payoff {
    pub fn new(kind: PayoffKind) -> Self {
        Self { kind, kappa: None, modulus: None, growth: None, time_continuity_l: None }
    }

    pub fn european(func: Vanilla, asset: usize, time: f64) -> Self {
        Self::new(PayoffKind::European { func, asset, time }).with_modulus(Modulus::Linear { c: 1.0 })
    }

    pub fn lookback_max(asset: usize) -> Self {
        Self::new(PayoffKind::LookbackMax { asset }).with_modulus(Modulus::Linear { c: 1.0 })
    }

    pub fn asian(asset: usize, sampling: Sampling) -> Self {
        Self::new(PayoffKind::AsianAverage { asset, sampling }).with_modulus(Modulus::Linear { c: 1.0 })
    }

    pub fn constant(value: f64) -> Self {
        Self::new(PayoffKind::Constant { value }).with_kappa(value.abs()).with_modulus(Modulus::Linear { c: 0.0 })
    }

    pub fn table(table: Table) -> Self {
        let kappa = table.entries.values().fold(0.0f64, |m, v| m.max(v.abs()));
        Self::new(PayoffKind::TableGrid { table }).with_kappa(kappa)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = Some(kappa);
        self
    }

    pub fn with_modulus(mut self, m: Modulus) -> Self {
        self.modulus = Some(m);
        self
    }

    pub fn with_growth(mut self, l: f64, p: f64) -> Self {
        self.growth = Some(Growth { l, p });
        self
    }

    pub fn with_time_continuity(mut self, l: f64) -> Self {
        self.time_continuity_l = Some(l);
        self
    }

    /// `sum_i c_i G_i`; metadata combines where every term declares it.
    pub fn combination(terms: Vec<(f64, Payoff)>) -> Self {
        let kappa = terms.iter().map(|(c, g)| g.kappa.map(|k| c.abs() * k)).sum::<Option<f64>>();
        let lin = terms
            .iter()
            .map(|(c, g)| match g.modulus {
                Some(Modulus::Linear { c: l }) => Some(c.abs() * l),
                _ => None,
            })
            .sum::<Option<f64>>();
        let mut out = Self::new(PayoffKind::Combination { terms });
        out.kappa = kappa;
        out.modulus = lin.map(|c| Modulus::Linear { c });
        out
    }

    pub fn evaluate(&self, p: &GridPath) -> Result<f64> {
        let v = self.eval_raw(p)?;
        if let Some(k) = self.kappa {
            debug_assert!(v.abs() <= k * (1.0 + 1e-9) + 1e-9, "payoff {v} exceeds declared bound {k}");
        }
        Ok(v)
    }

    fn eval_raw(&self, p: &GridPath) -> Result<f64> {
        let check_asset = |a: usize| {
            if a >= p.dim() {
                domain(format!("asset {a} out of range for a {}-coordinate path", p.dim()))
            } else {
                Ok(())
            }
        };
        let check_time = |t: f64| {
            if !(0.0..=p.horizon()).contains(&t) {
                domain(format!("time {t} outside [0, {}]", p.horizon()))
            } else {
                Ok(())
            }
        };
        Ok(match &self.kind {
            PayoffKind::European { func, asset, time } => {
                check_asset(*asset)?;
                check_time(*time)?;
                func.eval(p.coord_at(*asset, *time))
            }
            PayoffKind::Basket { weights, func, time } => {
                check_time(*time)?;
                if weights.len() > p.dim() {
                    return domain("basket has more weights than coordinates");
                }
                let v = p.value_at(*time);
                func.eval(weights.iter().zip(&v).map(|(w, x)| w * x).sum())
            }
            PayoffKind::LookbackMax { asset } => {
                check_asset(*asset)?;
                p.coord_max(*asset)
            }
            PayoffKind::AsianAverage { asset, sampling } => {
                check_asset(*asset)?;
                match sampling {
                    Sampling::Discrete { times } => {
                        if times.is_empty() {
                            return domain("empty sampling schedule");
                        }
                        for &t in times {
                            check_time(t)?;
                        }
                        times.iter().map(|&t| p.coord_at(*asset, t)).sum::<f64>() / times.len() as f64
                    }
                    Sampling::Continuous => {
                        let ts = p.times();
                        let vs = p.values();
                        let area: f64 = (0..ts.len() - 1)
                            .map(|j| 0.5 * (ts[j + 1] - ts[j]) * (vs[j][*asset] + vs[j + 1][*asset]))
                            .sum();
                        area / p.horizon()
                    }
                }
            }
            PayoffKind::TableGrid { table } => table.lookup(p)?,
            PayoffKind::Constant { value } => *value,
            PayoffKind::Combination { terms } => {
                let mut s = 0.0;
                for (c, g) in terms {
                    s += c * g.eval_raw(p)?;
                }
                s
            }
            PayoffKind::Clipped { inner, bound } => inner.eval_raw(p)?.clamp(-bound, *bound),
        })
    }

    /// Evaluation on a right-continuous piecewise-constant path.
    pub fn evaluate_piecewise_constant(&self, f: &PiecewiseConstantPath) -> Result<f64> {
        let at = |t: f64, i: usize| -> Result<f64> { Ok(q_to_f64(&f.value_at(&q_from_f64(t)?)[i])) };
        let horizon = q_to_f64(&f.horizon);
        Ok(match &self.kind {
            PayoffKind::European { func, asset, time } => func.eval(at(*time, *asset)?),
            PayoffKind::Basket { weights, func, time } => {
                let mut s = 0.0;
                for (i, w) in weights.iter().enumerate() {
                    s += w * at(*time, i)?;
                }
                func.eval(s)
            }
            PayoffKind::LookbackMax { asset } => {
                f.values.iter().chain(std::iter::once(&f.terminal)).map(|v| q_to_f64(&v[*asset])).fold(f64::NEG_INFINITY, f64::max)
            }
            PayoffKind::AsianAverage { asset, sampling } => match sampling {
                Sampling::Discrete { times } => {
                    let mut s = 0.0;
                    for &t in times {
                        s += at(t, *asset)?;
                    }
                    s / times.len() as f64
                }
                Sampling::Continuous => {
                    let mut area = Q::from_integer(0.into());
                    for k in 0..f.values.len() {
                        let b = if k + 1 < f.values.len() { &f.jump_times[k + 1] } else { &f.horizon };
                        area += (b - &f.jump_times[k]) * &f.values[k][*asset];
                    }
                    q_to_f64(&area) / horizon
                }
            },
            PayoffKind::TableGrid { .. } => return domain("table payoffs are defined on lattice paths only"),
            PayoffKind::Constant { value } => *value,
            PayoffKind::Combination { terms } => {
                let mut s = 0.0;
                for (c, g) in terms {
                    s += c * g.evaluate_piecewise_constant(f)?;
                }
                s
            }
            PayoffKind::Clipped { inner, bound } => inner.evaluate_piecewise_constant(f)?.clamp(-bound, *bound),
        })
    }
}

/// `G v (-D) ^ D`, bounded by `D` and inheriting the modulus of `G`.
pub fn clip_payoff(g: &Payoff, bound: f64) -> Result<Payoff> {
    if !(bound > 0.0) {
        return domain(format!("clip level must be positive, got {bound}"));
    }
    Ok(Payoff {
        kind: PayoffKind::Clipped { inner: Box::new(g.clone()), bound },
        kappa: Some(bound),
        modulus: g.modulus,
        growth: Some(Growth { l: bound, p: 0.0 }),
        time_continuity_l: g.time_continuity_l,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport {
    /// Largest `|G(a) - G(b)| / f_e(|a - b|)` over the sample.
    pub worst_ratio: f64,
    pub violations: usize,
    /// Index of the first violating pair.
    pub witness: Option<usize>,
}

impl ModulusReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

pub fn validate_modulus(g: &Payoff, pairs: &[(GridPath, GridPath)]) -> Result<ModulusReport> {
    let Some(m) = g.modulus else {
        return domain("payoff declares no modulus of continuity");
    };
    let mut report = ModulusReport { worst_ratio: 0.0, violations: 0, witness: None };
    for (k, (a, b)) in pairs.iter().enumerate() {
        let dist = crate::paths::sup_norm_distance(a, b)?;
        let diff = (g.evaluate(a)? - g.evaluate(b)?).abs();
        let allowed = m.eval(dist);
        let ratio = if allowed > 0.0 {
            diff / allowed
        } else if diff > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        report.worst_ratio = report.worst_ratio.max(ratio);
        if diff > allowed + 1e-12 {
            report.violations += 1;
            report.witness.get_or_insert(k);
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeContinuityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `|G(v) - G(v_hat)| <= L |v|^p sum |dt - dt_hat|` for two paths
/// with the same values whose segment boundaries differ only in position,
/// each maturity being a boundary of both.
pub fn check_time_continuity(
    g: &Payoff,
    base: &PiecewiseConstantPath,
    perturbed: &PiecewiseConstantPath,
    maturities: &[f64],
) -> Result<TimeContinuityReport> {
    let Some(l) = g.time_continuity_l else {
        return domain("payoff declares no time-continuity constant");
    };
    let p = g.growth.map(|gr| gr.p).unwrap_or(1.0);
    if base.values != perturbed.values || base.terminal != perturbed.terminal || base.horizon != perturbed.horizon {
        return domain("paths differ in values or horizon");
    }
    let interior: Vec<Q> = maturities[..maturities.len().saturating_sub(1)].iter().map(|&t| q_from_f64(t)).collect::<Result<_>>()?;
    for t in &interior {
        let i = base.jump_times.iter().position(|s| s == t);
        let j = perturbed.jump_times.iter().position(|s| s == t);
        if i.is_none() || i != j {
            return domain(format!("maturity {} is not a common segment boundary", q_to_f64(t)));
        }
    }
    let lengths = |f: &PiecewiseConstantPath| -> Vec<Q> {
        (0..f.jump_times.len())
            .map(|k| {
                let b = if k + 1 < f.jump_times.len() { &f.jump_times[k + 1] } else { &f.horizon };
                b - &f.jump_times[k]
            })
            .collect()
    };
    let total: f64 = lengths(base).iter().zip(lengths(perturbed)).map(|(a, b)| q_to_f64(&(a - b)).abs()).sum();
    let sup = base.values.iter().flatten().map(|x| q_to_f64(x).abs()).fold(0.0, f64::max);
    let lhs = (g.evaluate_piecewise_constant(base)? - g.evaluate_piecewise_constant(perturbed)?).abs();
    let rhs = l * sup.powf(p) * total;
    Ok(TimeContinuityReport { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn q(n: i64, d: i64) -> Q {
        Q::new(n.into(), d.into())
    }

    #[test]
    fn evaluation_examples() {
        let p = GridPath::ramp(1.0, &[1.3]).unwrap();
        let call = Payoff::european(Vanilla::Call { strike: 1.0 }, 0, 1.0);
        assert!((call.evaluate(&p).unwrap() - 0.3).abs() < 1e-12);
        let c = GridPath::constant(1.0, 1).unwrap();
        assert_eq!(Payoff::lookback_max(0).evaluate(&c).unwrap(), 1.0);
        let r = GridPath::ramp(1.0, &[1.2]).unwrap();
        let asian = Payoff::asian(0, Sampling::Discrete { times: vec![0.5, 1.0] });
        assert!((asian.evaluate(&r).unwrap() - 1.15).abs() < 1e-12);
        let cont = Payoff::asian(0, Sampling::Continuous);
        assert!((cont.evaluate(&r).unwrap() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn table_lookup() {
        let mut t = Table::new(vec![0.0, 1.0]);
        t.insert(&[vec![1.0], vec![1.5]], 2.0).unwrap();
        let g = Payoff::table(t);
        assert_eq!(g.evaluate(&GridPath::ramp(1.0, &[1.5]).unwrap()).unwrap(), 2.0);
        assert!(g.evaluate(&GridPath::ramp(1.0, &[1.4]).unwrap()).is_err());
        let json = serde_json::to_string(&g).unwrap();
        let back: Payoff = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn json_shape() {
        let raw = r#"{"kind":"european","params":{"func":{"type":"call","strike":1.0},"asset":0,"time":1.0},"kappa":5.0,"growth":{"L":1.0,"p":2.0}}"#;
        let g: Payoff = serde_json::from_str(raw).unwrap();
        assert_eq!(g.kappa, Some(5.0));
        assert!(matches!(g.kind, PayoffKind::European { .. }));
        assert_eq!(g.growth.unwrap().p, 2.0);
    }

    #[test]
    fn clipping() {
        let peak = GridPath::new(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![3.0], vec![1.0]]).unwrap();
        let g = Payoff::lookback_max(0);
        let c = clip_payoff(&g, 2.0).unwrap();
        assert_eq!(c.evaluate(&peak).unwrap(), 2.0);
        assert_eq!(clip_payoff(&g, 5.0).unwrap().evaluate(&peak).unwrap(), 3.0);
        assert_eq!(c.kappa, Some(2.0));
        assert!(clip_payoff(&g, 0.0).is_err());
    }

    #[test]
    fn modulus_witness() {
        let a = GridPath::ramp(1.0, &[1.5]).unwrap();
        let b = GridPath::ramp(1.0, &[1.2]).unwrap();
        let pairs = vec![(a, b)];
        assert!(validate_modulus(&Payoff::lookback_max(0), &pairs).unwrap().holds());
        let under = Payoff::lookback_max(0).with_modulus(Modulus::Linear { c: 0.5 });
        let r = validate_modulus(&under, &pairs).unwrap();
        assert_eq!(r.witness, Some(0));
        assert!((r.worst_ratio - 2.0).abs() < 1e-12);
    }

    fn two_step(t1: Q) -> PiecewiseConstantPath {
        PiecewiseConstantPath {
            n: 4,
            horizon: q(1, 1),
            jump_times: vec![q(0, 1), t1],
            values: vec![vec![Q::one()], vec![q(3, 2)]],
            terminal: vec![q(3, 2)],
        }
    }

    #[test]
    fn time_continuity() {
        let asian = Payoff::asian(0, Sampling::Continuous).with_time_continuity(1.0).with_growth(1.0, 1.0);
        let a = two_step(q(1, 4));
        let b = two_step(q(1, 2));
        let r = check_time_continuity(&asian, &a, &a, &[1.0]).unwrap();
        assert_eq!(r.lhs, 0.0);
        let r = check_time_continuity(&asian, &a, &b, &[1.0]).unwrap();
        // average moves by 0.5 * 0.25, bound 1 * 1.5 * 0.5
        assert!((r.lhs - 0.125).abs() < 1e-12 && r.holds);
        let euro = Payoff::european(Vanilla::Forward, 0, 1.0).with_time_continuity(0.0);
        assert_eq!(check_time_continuity(&euro, &a, &b, &[1.0]).unwrap().lhs, 0.0);
        let mut c = b.clone();
        c.values[1] = vec![q(2, 1)];
        assert!(check_time_continuity(&asian, &a, &c, &[1.0]).is_err());
    }
}
