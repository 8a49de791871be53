//! Calibration inputs and measure-level tools.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lp::{Cmp, LinearProgram, LpStatus, Sense, VarKind};
use crate::paths::{csv_io, GridPath};

pub const PROB_TOL: f64 = 1e-12;

/// Finitely supported probability measure on `R_+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarginalJson", into = "MarginalJson")]
pub struct DiscreteMarginal {
    support: Vec<f64>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MarginalJson {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<MarginalJson> for DiscreteMarginal {
    type Error = Error;
    fn try_from(m: MarginalJson) -> Result<Self> {
        DiscreteMarginal::new(m.support, m.probs)
    }
}

impl From<DiscreteMarginal> for MarginalJson {
    fn from(m: DiscreteMarginal) -> Self {
        MarginalJson { support: m.support, probs: m.probs }
    }
}

impl DiscreteMarginal {
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return domain("marginal needs a nonempty support with matching probabilities");
        }
        if support.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return domain("marginal support must lie in [0, inf)");
        }
        if support.windows(2).any(|w| w[1] <= w[0]) {
            return domain("marginal support must be strictly increasing");
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return domain("marginal probabilities must be nonnegative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return domain(format!("marginal probabilities sum to {total}"));
        }
        Ok(Self { support, probs })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![x], vec![1.0])
    }

    /// Builds a marginal from unsorted atoms, merging repeats and dropping
    /// zero masses.
    pub fn from_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        let mut sorted: Vec<(f64, f64)> = atoms.iter().copied().filter(|(_, p)| *p != 0.0).collect();
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut support: Vec<f64> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (x, p) in sorted {
            if support.last() == Some(&x) {
                *probs.last_mut().unwrap() += p;
            } else {
                support.push(x);
                probs.push(p);
            }
        }
        Self::new(support, probs)
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.support.iter().zip(&self.probs).map(|(x, p)| p * f(*x)).sum()
    }

    pub fn is_calibrated(&self) -> bool {
        (self.mean() - 1.0).abs() <= PROB_TOL
    }

    pub fn call(&self, k: f64) -> f64 {
        self.expect(|x| (x - k).max(0.0))
    }

    pub fn put(&self, k: f64) -> f64 {
        self.expect(|x| (k - x).max(0.0))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Piecewise-linear put price curve through `(0, 0)` and the given points.
#[derive(Debug, Clone, PartialEq)]
pub struct PutPriceCurve {
    strikes: Vec<f64>,
    prices: Vec<f64>,
}

impl PutPriceCurve {
    pub fn new(strikes: Vec<f64>, prices: Vec<f64>) -> Result<Self> {
        if strikes.is_empty() || strikes.len() != prices.len() {
            return domain("put curve needs matching nonempty strikes and prices");
        }
        if strikes[0] < 0.0 || strikes.windows(2).any(|w| w[1] <= w[0]) {
            return domain("strikes must be nonnegative and strictly increasing");
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return domain("non-finite put price");
        }
        Ok(Self { strikes, prices })
    }

    pub fn strikes(&self) -> &[f64] {
        &self.strikes
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// Knots including the implied origin.
    fn knots(&self) -> Vec<(f64, f64)> {
        let mut k = Vec::with_capacity(self.strikes.len() + 1);
        if self.strikes[0] > 0.0 {
            k.push((0.0, 0.0));
        }
        k.extend(self.strikes.iter().copied().zip(self.prices.iter().copied()));
        k
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        if headers.iter().collect::<Vec<_>>() != ["strike", "price"] {
            return Err(Error::Parse { line: 1, message: "header must be strike,price".into() });
        }
        let mut strikes = Vec::new();
        let mut prices = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse { line, message: "missing field".into() })?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse { line, message: format!("bad number: {e}") })
            };
            strikes.push(parse(0)?);
            prices.push(parse(1)?);
        }
        Self::new(strikes, prices).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["strike", "price"]).map_err(csv_io)?;
        for (k, p) in self.strikes.iter().zip(&self.prices) {
            w.write_record([k.to_string(), p.to_string()]).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

const CURVE_TOL: f64 = 1e-12;

/// Breeden–Litzenberger inversion: the CDF at `K` is the right derivative
/// of the put curve, so atoms sit at slope changes with the slope jump as
/// mass. The last segment must have slope 1.
pub fn marginal_from_puts(curve: &PutPriceCurve) -> Result<DiscreteMarginal> {
    let knots = curve.knots();
    if knots[0].0 == 0.0 && knots[0].1 != 0.0 {
        return Err(Error::Arbitrage(format!("put price at strike 0 is {}", knots[0].1)));
    }
    for &(k, p) in &knots {
        if p < -CURVE_TOL || p > k + CURVE_TOL {
            return Err(Error::Arbitrage(format!("put price {p} at strike {k} outside [0, K]")));
        }
    }
    if knots.len() < 2 {
        return Err(Error::Arbitrage("put curve has no slope segment".into()));
    }
    let slopes: Vec<f64> = knots.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    for (j, w) in slopes.windows(2).enumerate() {
        if w[1] < w[0] - CURVE_TOL {
            return Err(Error::Arbitrage(format!("put curve is not convex at strike {}", knots[j + 1].0)));
        }
    }
    if let Some(s) = slopes.iter().find(|s| **s > 1.0 + CURVE_TOL || **s < -CURVE_TOL) {
        return Err(Error::Arbitrage(format!("put curve slope {s} outside [0, 1]")));
    }
    let last = *slopes.last().unwrap();
    if (last - 1.0).abs() > CURVE_TOL {
        return Err(Error::Arbitrage(format!("final slope {last} leaves mass {} unaccounted", 1.0 - last)));
    }
    let mut atoms = Vec::new();
    let mut prev = 0.0;
    for (j, s) in slopes.iter().enumerate() {
        let mass = s - prev;
        if mass > CURVE_TOL {
            atoms.push((knots[j].0, mass));
        }
        prev = *s;
    }
    // renormalise away rounding in the slope differences
    let total: f64 = atoms.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Arbitrage(format!("recovered masses sum to {total}")));
    }
    if total != 1.0 {
        for a in &mut atoms {
            a.1 /= total;
        }
    }
    DiscreteMarginal::from_atoms(&atoms)
}

pub fn puts_from_marginal(mu: &DiscreteMarginal, strikes: &[f64]) -> Result<PutPriceCurve> {
    PutPriceCurve::new(strikes.to_vec(), strikes.iter().map(|&k| mu.put(k)).collect())
}

fn union_support(mu: &DiscreteMarginal, nu: &DiscreteMarginal) -> Vec<f64> {
    let mut pts: Vec<f64> = mu.support.iter().chain(&nu.support).copied().collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    pts
}

/// `mu <= nu` in convex order: equal means and call prices ordered at every
/// kink of either call transform.
pub fn convex_order_leq(mu: &DiscreteMarginal, nu: &DiscreteMarginal) -> bool {
    if (mu.mean() - nu.mean()).abs() > PROB_TOL {
        return false;
    }
    union_support(mu, nu).into_iter().all(|k| mu.call(k) <= nu.call(k) + PROB_TOL)
}

/// Every marginal has mean 1 and each asset's sequence increases in convex
/// order.
pub fn strassen_feasible(mus: &[Vec<DiscreteMarginal>]) -> bool {
    mus.iter().all(|seq| seq.iter().all(DiscreteMarginal::is_calibrated) && seq.windows(2).all(|w| convex_order_leq(&w[0], &w[1])))
}

/// Feasibility of a one-step martingale coupling from `mu` to `nu`, by LP.
pub fn martingale_coupling_feasible(mu: &DiscreteMarginal, nu: &DiscreteMarginal) -> bool {
    let (r, c) = (mu.support.len(), nu.support.len());
    let mut lp = LinearProgram::new(Sense::Minimize);
    let vars: Vec<Vec<usize>> = (0..r).map(|_| (0..c).map(|_| lp.add_var(0.0, VarKind::NonNegative)).collect()).collect();
    for j in 0..r {
        lp.add_row(vars[j].iter().map(|&v| (v, 1.0)).collect(), Cmp::Eq, mu.probs[j]);
        let x = mu.support[j];
        lp.add_row(vars[j].iter().zip(&nu.support).map(|(&v, y)| (v, y - x)).collect(), Cmp::Eq, 0.0);
    }
    for k in 0..c {
        lp.add_row((0..r).map(|j| (vars[j][k], 1.0)).collect(), Cmp::Eq, nu.probs[k]);
    }
    lp.solve().status == LpStatus::Optimal
}

/// Bounded-Lipschitz distance: sup of `|int f dnu - int f dmu|` over `f`
/// with `|f| <= 1` and Lipschitz constant 1. On the line it suffices to
/// constrain adjacent points of the union support.
pub fn bl_distance(mu: &DiscreteMarginal, nu: &DiscreteMarginal) -> Result<f64> {
    let pts = union_support(mu, nu);
    let mass = |m: &DiscreteMarginal, x: f64| m.support.iter().position(|y| *y == x).map_or(0.0, |i| m.probs[i]);
    let mut lp = LinearProgram::new(Sense::Maximize);
    let f: Vec<usize> = pts.iter().map(|&x| lp.add_var(mass(nu, x) - mass(mu, x), VarKind::Free)).collect();
    for &v in &f {
        lp.add_row(vec![(v, 1.0)], Cmp::Le, 1.0);
        lp.add_row(vec![(v, 1.0)], Cmp::Ge, -1.0);
    }
    for k in 1..pts.len() {
        let gap = pts[k] - pts[k - 1];
        lp.add_row(vec![(f[k], 1.0), (f[k - 1], -1.0)], Cmp::Le, gap);
        lp.add_row(vec![(f[k], 1.0), (f[k - 1], -1.0)], Cmp::Ge, -gap);
    }
    let sol = lp.solve();
    if sol.status != LpStatus::Optimal {
        return Err(Error::InternalConsistency(format!("bounded-Lipschitz LP ended {:?}", sol.status)));
    }
    Ok(sol.objective.max(0.0))
}

/// `(m^p + 1) 1{m + 1 >= D} + m^p / D` for `m = max_i |S^(i)|` over the
/// first `d` coordinates.
pub fn alpha_d(p: &GridPath, d: usize, big_d: f64, growth_p: f64) -> Result<f64> {
    if d == 0 || d > p.dim() {
        return domain(format!("asset count {d} invalid for a {}-coordinate path", p.dim()));
    }
    let m = (0..d).map(|i| p.values().iter().map(|v| v[i].abs()).fold(0.0, f64::max)).fold(0.0, f64::max);
    alpha_d_from_norm(m, big_d, growth_p)
}

pub fn alpha_d_from_norm(m: f64, big_d: f64, growth_p: f64) -> Result<f64> {
    if !(big_d > 1.0) || !(growth_p > 1.0) {
        return domain(format!("need D > 1 and p > 1, got D = {big_d}, p = {growth_p}"));
    }
    let mp = m.powf(growth_p);
    let ind = if m + 1.0 >= big_d { 1.0 } else { 0.0 };
    Ok((mp + 1.0) * ind + mp / big_d)
}

/// `(p/(p-1))^p sum_i (2 int_{|x| >= (p-1)/p (D-1)} |x|^p dmu_i + (1/D) int |x|^p dmu_i)`.
pub fn e2_tail_bound(mu_n: &[DiscreteMarginal], big_d: f64, growth_p: f64) -> Result<f64> {
    if !(big_d > 1.0) || !(growth_p > 1.0) {
        return domain(format!("need D > 1 and p > 1, got D = {big_d}, p = {growth_p}"));
    }
    let pp = growth_p;
    let threshold = (pp - 1.0) / pp * (big_d - 1.0);
    let sum: f64 = mu_n
        .iter()
        .map(|mu| {
            let tail = mu.expect(|x| if x.abs() >= threshold { x.abs().powf(pp) } else { 0.0 });
            2.0 * tail + mu.expect(|x| x.abs().powf(pp)) / big_d
        })
        .sum();
    Ok((pp / (pp - 1.0)).powf(pp) * sum)
}

/// Finite martingale on `steps + 1` dates, one path per terminal atom.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeMartingale {
    /// `paths[a][k]` is the value at date `k` on the path ending at atom `a`.
    pub paths: Vec<Vec<Vec<f64>>>,
    pub probs: Vec<f64>,
}

impl LatticeMartingale {
    pub fn steps(&self) -> usize {
        self.paths[0].len() - 1
    }

    /// Largest violation of the martingale property over all nodes, where a
    /// node at date `k` is a class of paths sharing their first `k + 1`
    /// values.
    pub fn martingale_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.steps() {
            let mut groups: Vec<(Vec<usize>, &[Vec<f64>])> = Vec::new();
            for (a, path) in self.paths.iter().enumerate() {
                let prefix = &path[..=k];
                match groups.iter_mut().find(|(_, p)| *p == prefix) {
                    Some(g) => g.0.push(a),
                    None => groups.push((vec![a], prefix)),
                }
            }
            for (members, prefix) in groups {
                let mass: f64 = members.iter().map(|&a| self.probs[a]).sum();
                for i in 0..prefix[k].len() {
                    let next: f64 = members.iter().map(|&a| self.probs[a] * self.paths[a][k + 1][i]).sum::<f64>() / mass;
                    worst = worst.max((next - prefix[k][i]).abs());
                }
            }
        }
        worst
    }
}

/// Lifts a joint terminal law with unit means to a martingale on `steps`
/// dates by conditional expectations along a binary splitting of the atoms.
///
/// Each split halves a cluster (by count) along its coordinate of largest
/// variance. Splits are delayed to the last `ceil(log2 n)` dates, so the
/// martingale stays at `(1, ..., 1)` before that.
pub fn conditional_lift(atoms: &[Vec<f64>], probs: &[f64], steps: usize) -> Result<LatticeMartingale> {
    if atoms.is_empty() || atoms.len() != probs.len() {
        return domain("terminal law needs matching nonempty atoms and probabilities");
    }
    let dim = atoms[0].len();
    if atoms.iter().any(|a| a.len() != dim) {
        return domain("terminal atoms have inconsistent dimension");
    }
    if probs.iter().any(|p| !(*p > 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
        return domain("terminal probabilities must be positive and sum to 1");
    }
    for i in 0..dim {
        let m: f64 = atoms.iter().zip(probs).map(|(a, p)| p * a[i]).sum();
        if (m - 1.0).abs() > 1e-12 {
            return Err(Error::Infeasible(format!("terminal mean of coordinate {} is {m}, not 1", i + 1)));
        }
    }
    let n = atoms.len();
    let rounds = (usize::BITS - (n - 1).leading_zeros()) as usize;
    if rounds > steps {
        return Err(Error::Infeasible(format!("{n} atoms need {rounds} splitting steps, only {steps} available")));
    }
    let mean_of = |members: &[usize]| -> Vec<f64> {
        let mass: f64 = members.iter().map(|&a| probs[a]).sum();
        (0..dim).map(|i| members.iter().map(|&a| probs[a] * atoms[a][i]).sum::<f64>() / mass).collect()
    };
    let mut paths: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(steps + 1); n];
    let mut clusters: Vec<Vec<usize>> = vec![(0..n).collect()];
    for k in 0..=steps {
        if k + rounds > steps {
            let mut next = Vec::new();
            for c in clusters {
                if c.len() <= 1 {
                    next.push(c);
                    continue;
                }
                let centre = mean_of(&c);
                let var = |i: usize| c.iter().map(|&a| probs[a] * (atoms[a][i] - centre[i]).powi(2)).sum::<f64>();
                let axis = (0..dim).max_by(|&x, &y| var(x).partial_cmp(&var(y)).unwrap()).unwrap();
                let mut sorted = c.clone();
                sorted.sort_by(|&a, &b| atoms[a][axis].partial_cmp(&atoms[b][axis]).unwrap().then(a.cmp(&b)));
                let (lo, hi) = sorted.split_at(sorted.len() / 2);
                next.push(lo.to_vec());
                next.push(hi.to_vec());
            }
            clusters = next;
        }
        if k == 0 {
            // the root is the common mean
            for path in paths.iter_mut() {
                path.push(vec![1.0; dim]);
            }
            continue;
        }
        for c in &clusters {
            let m = mean_of(c);
            for &a in c {
                paths[a].push(if c.len() == 1 { atoms[a].clone() } else { m.clone() });
            }
        }
    }
    let lift = LatticeMartingale { paths, probs: probs.to_vec() };
    let res = lift.martingale_residual();
    if res > 1e-12 {
        return Err(Error::InternalConsistency(format!("lift has martingale residual {res}")));
    }
    Ok(lift)
}
