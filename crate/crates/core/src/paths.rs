//! Path-space primitives.
//!
//! A [`GridPath`] is a continuous path in `R_+^{d+K}` stored by its values
//! on a finite time grid and interpolated linearly in between. The first `d`
//! coordinates are the underlying assets, the remaining `K` are the
//! normalised prices of continuously traded options.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const DEFAULT_INFO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl GridPath {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 {
            return domain("a grid path needs at least two grid times");
        }
        if times.len() != values.len() {
            return domain(format!("{} grid times but {} values", times.len(), values.len()));
        }
        if times[0] != 0.0 {
            return domain(format!("grid must start at 0, got {}", times[0]));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return domain(format!("grid times not strictly increasing at index {}", w + 1));
        }
        let dim = values[0].len();
        if dim == 0 {
            return domain("paths need at least one coordinate");
        }
        for (k, v) in values.iter().enumerate() {
            if v.len() != dim {
                return domain(format!("value {k} has {} coordinates, expected {dim}", v.len()));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return domain(format!("value {k} has coordinate {x} outside [0, inf)"));
            }
        }
        if values[0].iter().any(|&x| x != 1.0) {
            return domain("paths must start at (1, ..., 1)");
        }
        Ok(Self { times, values })
    }

    /// Linear ramp from `(1, ..., 1)` to `end` over `[0, horizon]`.
    pub fn ramp(horizon: f64, end: &[f64]) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![vec![1.0; end.len()], end.to_vec()])
    }

    pub fn constant(horizon: f64, dim: usize) -> Result<Self> {
        Self::new(vec![0.0, horizon], vec![vec![1.0; dim]; 2])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().unwrap()
    }

    /// Interpolated value at `t`, clamped to `[0, T]`.
    pub fn value_at(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| self.coord_at(i, t)).collect()
    }

    pub fn coord_at(&self, i: usize, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        let j = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(j) => return self.values[j][i],
            Err(j) => j,
        };
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let (x0, x1) = (self.values[j - 1][i], self.values[j][i]);
        let w = (t - t0) / (t1 - t0);
        x0 + w * (x1 - x0)
    }

    /// `sup_t max_i |S^{(i)}_t|`, attained on the grid.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Running sup norm of the first `coords` coordinates up to `t`.
    pub fn running_sup(&self, t: f64, coords: usize) -> f64 {
        let mut m = 0.0f64;
        for (s, v) in self.times.iter().zip(&self.values) {
            if *s > t {
                break;
            }
            m = v[..coords].iter().fold(m, |m, x| m.max(x.abs()));
        }
        let at = self.value_at(t);
        at[..coords].iter().fold(m, |m, x| m.max(x.abs()))
    }

    pub fn coord_max(&self, i: usize) -> f64 {
        self.values.iter().map(|v| v[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Reads the `t,s1,...` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        if headers.get(0) != Some("t") || headers.len() < 2 {
            return Err(Error::Parse { line: 1, message: "header must be t,s1,...".into() });
        }
        for (i, h) in headers.iter().enumerate().skip(1) {
            if h != format!("s{i}") {
                return Err(Error::Parse { line: 1, message: format!("unexpected column '{h}'") });
            }
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            if rec.len() != headers.len() {
                return Err(Error::Parse { line, message: format!("expected {} fields, got {}", headers.len(), rec.len()) });
            }
            let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.parse::<f64>()).collect();
            let nums = nums.map_err(|e| Error::Parse { line, message: format!("bad number: {e}") })?;
            if nums.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse { line, message: "non-finite number".into() });
            }
            if let Some(&last) = times.last() {
                if nums[0] <= last {
                    return Err(Error::Parse { line, message: "times must be strictly increasing".into() });
                }
            }
            if nums[1..].iter().any(|x| *x < 0.0) {
                return Err(Error::Parse { line, message: "negative price".into() });
            }
            times.push(nums[0]);
            values.push(nums[1..].to_vec());
        }
        GridPath::new(times, values)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("s{i}")));
        w.write_record(&header).map_err(csv_io)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            let mut row = vec![t.to_string()];
            row.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Merged, sorted, deduplicated union of two time grids.
pub(crate) fn merge_grids(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    all.dedup();
    all
}

/// Sup-norm distance of the piecewise-linear interpolants.
pub fn sup_norm_distance(a: &GridPath, b: &GridPath) -> Result<f64> {
    if a.horizon() != b.horizon() {
        return domain(format!("horizons differ: {} vs {}", a.horizon(), b.horizon()));
    }
    if a.dim() != b.dim() {
        return domain(format!("dimensions differ: {} vs {}", a.dim(), b.dim()));
    }
    let grid = merge_grids(a.times(), b.times());
    let mut best = 0.0f64;
    for t in grid {
        for i in 0..a.dim() {
            best = best.max((a.coord_at(i, t) - b.coord_at(i, t)).abs());
        }
    }
    Ok(best)
}

/// Terminal claim on the underlyings backing a continuously traded option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TerminalClaim {
    /// `min((s_asset - strike)^+, cap)`.
    CappedCall { asset: usize, strike: f64, cap: f64 },
    /// `(strike - s_asset)^+`.
    Put { asset: usize, strike: f64 },
    /// `min(s_asset, cap)`.
    MinCap { asset: usize, cap: f64 },
    /// `1{s_asset >= strike}`.
    Digital { asset: usize, strike: f64 },
}

impl TerminalClaim {
    pub fn asset(&self) -> usize {
        match self {
            TerminalClaim::CappedCall { asset, .. }
            | TerminalClaim::Put { asset, .. }
            | TerminalClaim::MinCap { asset, .. }
            | TerminalClaim::Digital { asset, .. } => *asset,
        }
    }

    pub fn eval(&self, s: &[f64]) -> f64 {
        match *self {
            TerminalClaim::CappedCall { asset, strike, cap } => (s[asset] - strike).max(0.0).min(cap),
            TerminalClaim::Put { asset, strike } => (strike - s[asset]).max(0.0),
            TerminalClaim::MinCap { asset, cap } => s[asset].min(cap),
            TerminalClaim::Digital { asset, strike } => {
                if s[asset] >= strike {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup |X|` over `R_+^d`.
    pub fn sup_bound(&self) -> f64 {
        match *self {
            TerminalClaim::CappedCall { cap, .. } => cap,
            TerminalClaim::Put { strike, .. } => strike.max(0.0),
            TerminalClaim::MinCap { cap, .. } => cap,
            TerminalClaim::Digital { .. } => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradedOption {
    pub claim: TerminalClaim,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoSpace {
    pub d: usize,
    #[serde(default)]
    pub options: Vec<TradedOption>,
    pub maturities: Vec<f64>,
}

impl InfoSpace {
    pub fn new(d: usize, options: Vec<TradedOption>, maturities: Vec<f64>) -> Result<Self> {
        let info = Self { d, options, maturities };
        info.validate()?;
        Ok(info)
    }

    pub fn assets_only(d: usize, maturities: Vec<f64>) -> Result<Self> {
        Self::new(d, Vec::new(), maturities)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return domain("need at least one underlying asset");
        }
        if self.maturities.is_empty() || self.maturities[0] <= 0.0 {
            return domain("maturities must be positive and nonempty");
        }
        if self.maturities.windows(2).any(|w| w[1] <= w[0]) {
            return domain("maturities must be strictly increasing");
        }
        for (i, o) in self.options.iter().enumerate() {
            if !(o.price > 0.0) {
                return domain(format!("option {i} has non-positive price {}", o.price));
            }
            if o.claim.asset() >= self.d {
                return domain(format!("option {i} refers to asset {} of {}", o.claim.asset(), self.d));
            }
            if !o.claim.sup_bound().is_finite() {
                return domain(format!("option {i} payoff is unbounded"));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.options.len()
    }

    pub fn dim(&self) -> usize {
        self.d + self.k()
    }

    pub fn horizon(&self) -> f64 {
        *self.maturities.last().unwrap()
    }

    /// `max_j sup|X_j| / P(X_j)`; zero without traded options.
    pub fn kappa(&self) -> f64 {
        self.options.iter().map(|o| o.claim.sup_bound() / o.price).fold(0.0, f64::max)
    }

    /// Normalised option coordinate values implied by terminal underlyings.
    pub fn option_coords(&self, underlyings: &[f64]) -> Vec<f64> {
        self.options.iter().map(|o| o.claim.eval(underlyings) / o.price).collect()
    }
}

pub fn in_info_space(p: &GridPath, info: &InfoSpace, tol: f64) -> bool {
    if p.dim() != info.dim() {
        return false;
    }
    let term = p.terminal();
    let implied = info.option_coords(&term[..info.d]);
    implied.iter().zip(&term[info.d..]).all(|(x, y)| (x - y).abs() <= tol)
}

/// User-supplied prediction set with bracketing distance oracle.
pub trait CustomSet: Send + Sync + fmt::Debug {
    fn contains(&self, p: &GridPath) -> bool;
    /// `(lower, upper)` bounds on the distance from `p` to the set.
    fn distance_bounds(&self, p: &GridPath) -> (f64, f64);
}

#[derive(Debug, Clone)]
pub enum PredictionSet {
    All,
    SupNormBall { b: f64 },
    Custom(Arc<dyn CustomSet>),
}

impl PredictionSet {
    pub fn ball(b: f64) -> Result<Self> {
        if !(b >= 1.0) {
            return domain(format!("ball radius must be >= 1, got {b}"));
        }
        Ok(PredictionSet::SupNormBall { b })
    }

    pub fn contains(&self, p: &GridPath) -> bool {
        match self {
            PredictionSet::All => true,
            PredictionSet::SupNormBall { b } => p.sup_norm() <= *b,
            PredictionSet::Custom(c) => c.contains(p),
        }
    }

    /// Bounds on the uncapped distance from `p` to the set. Exact (equal
    /// bounds) for the built-in kinds.
    pub fn distance_bounds(&self, p: &GridPath) -> Result<(f64, f64)> {
        match self {
            PredictionSet::All => Ok((0.0, 0.0)),
            PredictionSet::SupNormBall { b } => {
                // the clamped path min(p, b) lies in the ball and no ball path
                // gets closer at the time the sup is attained
                let d = (p.sup_norm() - b).max(0.0);
                Ok((d, d))
            }
            PredictionSet::Custom(c) => {
                let (lo, hi) = c.distance_bounds(p);
                if !(lo <= hi) || lo < 0.0 {
                    return Err(Error::Contract(format!("custom distance oracle returned lower {lo} > upper {hi}")));
                }
                Ok((lo, hi))
            }
        }
    }
}

/// `min(1, dist(p, set))`, using the lower distance bound for custom sets.
///
/// The lower bound gives the smaller penalty, which keeps penalised
/// superhedges conservative, and matches the scope used by primal
/// relaxations.
pub fn lambda_penalty(set: &PredictionSet, _info: &InfoSpace, p: &GridPath) -> Result<f64> {
    let (lo, _) = set.distance_bounds(p)?;
    Ok(lo.min(1.0))
}

pub fn in_fattened_set(set: &PredictionSet, info: &InfoSpace, p: &GridPath, eps: f64) -> Result<bool> {
    if !in_info_space(p, info, DEFAULT_INFO_TOL) {
        return Ok(false);
    }
    let (lo, _) = set.distance_bounds(p)?;
    Ok(lo <= eps)
}

/// Piecewise-linear non-decreasing map of `[0, T]` onto itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMap {
    knots: Vec<f64>,
    images: Vec<f64>,
}

impl TimeMap {
    pub fn new(knots: Vec<f64>, images: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != images.len() {
            return domain("time map needs at least two matching knots and images");
        }
        if knots[0] != 0.0 || images[0] != 0.0 {
            return domain("time map must fix 0");
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return domain("time map knots must be strictly increasing");
        }
        if images.windows(2).any(|w| w[1] < w[0]) {
            return domain("time map must be non-decreasing");
        }
        if knots.last() != images.last() {
            return domain("time map must fix the horizon");
        }
        Ok(Self { knots, images })
    }

    pub fn identity(horizon: f64) -> Self {
        Self { knots: vec![0.0, horizon], images: vec![0.0, horizon] }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    pub fn apply(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.horizon());
        match self.knots.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(j) => self.images[j],
            Err(j) => {
                let w = (t - self.knots[j - 1]) / (self.knots[j] - self.knots[j - 1]);
                self.images[j - 1] + w * (self.images[j] - self.images[j - 1])
            }
        }
    }
}

/// `t -> p(f(t))`, represented exactly on the grid of knots of `f` and
/// preimages of the grid times of `p`.
pub fn time_change(p: &GridPath, f: &TimeMap, maturities: &[f64]) -> Result<GridPath> {
    if f.horizon() != p.horizon() {
        return domain("time map and path horizons differ");
    }
    for &m in maturities {
        if (f.apply(m) - m).abs() > 1e-12 * m.max(1.0) {
            return domain(format!("time map moves maturity {m} to {}", f.apply(m)));
        }
    }
    let mut grid: Vec<f64> = f.knots.clone();
    for w in 0..f.knots.len() - 1 {
        let (s0, s1) = (f.knots[w], f.knots[w + 1]);
        let (y0, y1) = (f.images[w], f.images[w + 1]);
        if y1 <= y0 {
            continue;
        }
        for &u in p.times() {
            if u > y0 && u < y1 {
                let s = s0 + (u - y0) / (y1 - y0) * (s1 - s0);
                if s > s0 && s < s1 {
                    grid.push(s);
                }
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let values: Vec<Vec<f64>> = grid.iter().map(|&t| p.value_at(f.apply(t))).collect();
    GridPath::new(grid, values)
}
