//! Lattice martingale optimal transport: the calibrated primal, the
//! semi-static superhedging dual, and the diagnostics built on them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::discretise::{lebesgue_partition, LebesguePartition};
use crate::error::{domain, Error, Result};
use crate::lattice::{LatticeModel, LatticePaths};
use crate::lp::{Cmp, LinearProgram, LpSolution, LpStatus, Sense, VarKind};
use crate::marginals::{bl_distance, DiscreteMarginal, PutPriceCurve};
use crate::paths::{GridPath, PredictionSet};
use crate::payoffs::Payoff;
use crate::rational::{q_from_f64, Q};

pub use crate::drift::{build_full_support_prior, discrete_superhedge_penalised, DiscretePrior, DriftDuality};

/// Statically traded option quoted at a price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum QuotedOption {
    Put {
        #[serde(default)]
        asset: usize,
        strike: f64,
        /// Index into the maturity list (0 for the first maturity).
        maturity_index: usize,
        price: f64,
    },
    Call {
        #[serde(default)]
        asset: usize,
        strike: f64,
        maturity_index: usize,
        price: f64,
    },
    Custom { payoff: Payoff, price: f64 },
}

impl QuotedOption {
    pub fn put(asset: usize, strike: f64, maturity_index: usize, price: f64) -> Self {
        QuotedOption::Put { asset, strike, maturity_index, price }
    }

    pub fn call(asset: usize, strike: f64, maturity_index: usize, price: f64) -> Self {
        QuotedOption::Call { asset, strike, maturity_index, price }
    }

    pub fn price(&self) -> f64 {
        match self {
            QuotedOption::Put { price, .. } | QuotedOption::Call { price, .. } | QuotedOption::Custom { price, .. } => *price,
        }
    }

    pub fn with_price(&self, price: f64) -> Self {
        let mut o = self.clone();
        match &mut o {
            QuotedOption::Put { price: p, .. } | QuotedOption::Call { price: p, .. } | QuotedOption::Custom { price: p, .. } => *p = price,
        }
        o
    }

    fn check(&self, model: &LatticeModel) -> Result<()> {
        let n = model.info.maturities.len();
        match self {
            QuotedOption::Put { asset, maturity_index, price, .. } | QuotedOption::Call { asset, maturity_index, price, .. } => {
                if *asset >= model.info.d || *maturity_index >= n || !price.is_finite() {
                    return domain(format!("quoted option {self:?} does not fit the lattice"));
                }
            }
            QuotedOption::Custom { price, .. } => {
                if !price.is_finite() {
                    return domain("custom option price must be finite");
                }
            }
        }
        Ok(())
    }

    /// Payoff on a continuous path, reading maturity values off `maturities`.
    pub fn evaluate(&self, p: &GridPath, maturities: &[f64]) -> Result<f64> {
        let at = |asset: usize, j: usize| -> Result<f64> {
            let t = *maturities.get(j).ok_or_else(|| Error::Domain(format!("no maturity with index {j}")))?;
            Ok(p.coord_at(asset, t))
        };
        Ok(match self {
            QuotedOption::Put { asset, strike, maturity_index, .. } => (strike - at(*asset, *maturity_index)?).max(0.0),
            QuotedOption::Call { asset, strike, maturity_index, .. } => (at(*asset, *maturity_index)? - strike).max(0.0),
            QuotedOption::Custom { payoff, .. } => payoff.evaluate(p)?,
        })
    }

    fn eval(&self, model: &LatticeModel, paths: &LatticePaths, p: usize) -> Result<f64> {
        Ok(match self {
            QuotedOption::Put { asset, strike, maturity_index, .. } => {
                (strike - paths.value(p, model.maturity_indices[*maturity_index])[*asset]).max(0.0)
            }
            QuotedOption::Call { asset, strike, maturity_index, .. } => {
                (paths.value(p, model.maturity_indices[*maturity_index])[*asset] - strike).max(0.0)
            }
            QuotedOption::Custom { payoff, .. } => payoff.evaluate(&paths.grid_path(p))?,
        })
    }
}

/// Puts at every strike of `curve`, priced off the curve.
pub fn quote_puts(asset: usize, maturity_index: usize, curve: &PutPriceCurve) -> Vec<QuotedOption> {
    curve.strikes().iter().zip(curve.prices()).map(|(&k, &p)| QuotedOption::put(asset, k, maturity_index, p)).collect()
}

/// Lattice, payoff, quotes and prediction set evaluated on every path.
#[derive(Debug, Clone)]
pub struct MotProblem {
    pub model: LatticeModel,
    pub paths: LatticePaths,
    /// Payoff value per path.
    pub g: Vec<f64>,
    /// `option_values[j][p]`.
    pub option_values: Vec<Vec<f64>>,
    pub prices: Vec<f64>,
    /// Lower distance bound to the prediction set per path.
    pub dist: Vec<f64>,
    /// Whether the prediction set is the whole space.
    pub unconstrained: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DualMode {
    /// Superhedge `G - N lambda` on every path.
    Penalty { n: f64 },
    /// Superhedge `G` on paths within `eps` of the prediction set.
    Hard { eps: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct MartingaleLPSolution {
    pub value: f64,
    /// Probability per lattice path; zero off scope.
    pub weights: Vec<f64>,
    pub status: LpStatus,
    /// Farkas multipliers on the primal rows when infeasible.
    pub certificate: Option<Vec<f64>>,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuperhedgeLPSolution {
    pub value: f64,
    pub a0: f64,
    /// Static holding per quoted option.
    pub a_x: Vec<f64>,
    /// Position held after each history prefix node, one entry per coordinate.
    pub delta: Vec<Vec<f64>>,
    /// Cash released on paths outside the relaxed scope (priced at `eta`).
    pub c: f64,
    pub status: LpStatus,
    /// Smallest `portfolio - target` over in-scope paths.
    pub worst_slack: f64,
    pub worst_path: Option<usize>,
    pub scope: Vec<bool>,
    /// Primal Farkas certificate when the dual is unbounded.
    pub certificate: Option<Vec<f64>>,
}

impl SuperhedgeLPSolution {
    /// Terminal value of the semi-static portfolio along path `p`.
    pub fn portfolio(&self, prob: &MotProblem, p: usize) -> f64 {
        let mut v = self.a0;
        for (a, xs) in self.a_x.iter().zip(&prob.option_values) {
            v += a * xs[p];
        }
        v + prob.gains(&self.delta, p)
    }
}

impl MotProblem {
    pub fn new(model: &LatticeModel, g: &Payoff, options: &[QuotedOption], set: &PredictionSet) -> Result<Self> {
        let paths = model.enumerate()?;
        let gv = paths.evaluate(g)?;
        Self::from_paths(model, paths, gv, options, set)
    }

    /// Problem with payoff values given per enumerated path.
    pub fn from_values(model: &LatticeModel, g: Vec<f64>, options: &[QuotedOption], set: &PredictionSet) -> Result<Self> {
        let paths = model.enumerate()?;
        if g.len() != paths.len() {
            return domain(format!("{} payoff values for {} paths", g.len(), paths.len()));
        }
        Self::from_paths(model, paths, g, options, set)
    }

    fn from_paths(model: &LatticeModel, paths: LatticePaths, g: Vec<f64>, options: &[QuotedOption], set: &PredictionSet) -> Result<Self> {
        let mut option_values = Vec::with_capacity(options.len());
        for o in options {
            o.check(model)?;
            option_values.push((0..paths.len()).map(|p| o.eval(model, &paths, p)).collect::<Result<Vec<_>>>()?);
        }
        let dist = paths.distances(set)?;
        Ok(Self {
            model: model.clone(),
            paths,
            g,
            option_values,
            prices: options.iter().map(QuotedOption::price).collect(),
            dist,
            unconstrained: matches!(set, PredictionSet::All),
        })
    }

    /// Same lattice, quotes and set with a different payoff.
    pub fn with_payoff(&self, g: &Payoff) -> Result<Self> {
        Ok(Self { g: self.paths.evaluate(g)?, ..self.clone() })
    }

    pub fn with_values(&self, g: Vec<f64>) -> Result<Self> {
        if g.len() != self.paths.len() {
            return domain("payoff vector length does not match the path count");
        }
        Ok(Self { g, ..self.clone() })
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// `sum_k delta(node_k) . (S_{k+1} - S_k)` along path `p`.
    pub fn gains(&self, delta: &[Vec<f64>], p: usize) -> f64 {
        let mut v = 0.0;
        for k in 0..self.paths.m {
            let pos = &delta[self.paths.node(p, k)];
            for (x, dx) in pos.iter().zip(self.paths.increment(p, k)) {
                v += x * dx;
            }
        }
        v
    }

    /// Paths kept in the primal at relaxation `eta`: all of them, except that
    /// at `eta = 0` paths off the prediction set are dropped.
    fn primal_scope(&self, eta: f64) -> Vec<bool> {
        self.dist.iter().map(|&d| self.unconstrained || eta > 0.0 || d <= 0.0).collect()
    }

    fn martingale_rows(&self, var_of: &[Option<usize>]) -> Vec<Vec<(usize, f64)>> {
        let dim = self.paths.dim;
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.paths.node_count() * dim];
        for (p, v) in var_of.iter().enumerate() {
            let Some(v) = *v else { continue };
            for k in 0..self.paths.m {
                let node = self.paths.node(p, k);
                for (i, dx) in self.paths.increment(p, k).into_iter().enumerate() {
                    if dx != 0.0 {
                        rows[node * dim + i].push((v, dx));
                    }
                }
            }
        }
        rows.retain(|r| !r.is_empty());
        rows
    }

    /// Maximise `E_q[G]` over lattice martingale measures calibrated to the
    /// quotes within `eta` and putting mass at most `eta` outside the
    /// `eta`-fattened prediction set.
    pub fn primal(&self, eta: f64) -> Result<MartingaleLPSolution> {
        if !(eta >= 0.0) {
            return domain(format!("eta must be nonnegative, got {eta}"));
        }
        let scope = self.primal_scope(eta);
        let mut lp = LinearProgram::new(Sense::Maximize);
        let var_of: Vec<Option<usize>> =
            scope.iter().zip(&self.g).map(|(&s, &g)| s.then(|| lp.add_var(g, VarKind::NonNegative))).collect();
        let in_scope: Vec<(usize, usize)> = var_of.iter().enumerate().filter_map(|(p, v)| v.map(|v| (p, v))).collect();
        if in_scope.is_empty() {
            return Ok(MartingaleLPSolution {
                value: f64::NEG_INFINITY,
                weights: vec![0.0; self.num_paths()],
                status: LpStatus::Infeasible,
                certificate: None,
                eta,
            });
        }
        lp.add_row(in_scope.iter().map(|&(_, v)| (v, 1.0)).collect(), Cmp::Eq, 1.0);
        for row in self.martingale_rows(&var_of) {
            lp.add_row(row, Cmp::Eq, 0.0);
        }
        for (xs, &price) in self.option_values.iter().zip(&self.prices) {
            let row: Vec<(usize, f64)> = in_scope.iter().filter(|&&(p, _)| xs[p] != 0.0).map(|&(p, v)| (v, xs[p])).collect();
            if eta == 0.0 {
                lp.add_row(row, Cmp::Eq, price);
            } else {
                lp.add_row(row.clone(), Cmp::Le, price + eta);
                lp.add_row(row, Cmp::Ge, price - eta);
            }
        }
        if !self.unconstrained && eta > 0.0 {
            let outside: Vec<(usize, f64)> = in_scope.iter().filter(|&&(p, _)| self.dist[p] > eta).map(|&(_, v)| (v, 1.0)).collect();
            if !outside.is_empty() {
                lp.add_row(outside, Cmp::Le, eta);
            }
        }
        let sol = lp.solve();
        let mut weights = vec![0.0; self.num_paths()];
        if sol.status == LpStatus::Optimal {
            for &(p, v) in &in_scope {
                weights[p] = sol.x[v].max(0.0);
            }
        }
        Ok(MartingaleLPSolution {
            value: if sol.status == LpStatus::Optimal { sol.objective } else { f64::NEG_INFINITY },
            weights,
            status: sol.status,
            certificate: sol.farkas,
            eta,
        })
    }

    /// Cheapest semi-static superhedge with options relaxed by `eta`.
    pub fn dual(&self, mode: DualMode, eta: f64) -> Result<SuperhedgeLPSolution> {
        self.dual_restricted(mode, eta, None)
    }

    /// As [`MotProblem::dual`], with dynamic positions allowed to change at
    /// a lattice date only if the path made a `2^-mesh` Lebesgue crossing
    /// since the previous date.
    pub fn dual_simple(&self, mode: DualMode, eta: f64, mesh: u32) -> Result<SuperhedgeLPSolution> {
        let anchors = self.rebalance_anchors(mesh)?;
        self.dual_restricted(mode, eta, Some(&anchors))
    }

    /// For every node, the node whose position it carries forward.
    fn rebalance_anchors(&self, mesh: u32) -> Result<Vec<usize>> {
        let paths = &self.paths;
        let qtimes: Vec<Q> = paths.times.iter().map(|&t| q_from_f64(t)).collect::<Result<_>>()?;
        let mut allowed = vec![true; paths.node_count()];
        for p in 0..paths.len() {
            let part: LebesguePartition = lebesgue_partition(&paths.grid_path(p), mesh)?;
            let genuine = if part.last_is_crossing { &part.taus[1..] } else { &part.taus[1..part.taus.len() - 1] };
            for k in 1..paths.m {
                let hit = genuine.iter().any(|t| t > &qtimes[k - 1] && t <= &qtimes[k]);
                allowed[paths.node(p, k)] = hit;
            }
        }
        let mut anchor: Vec<usize> = (0..paths.node_count()).collect();
        // parents precede children in enumeration order
        for node in 1..paths.node_count() {
            if !allowed[node] {
                anchor[node] = anchor[paths.node_parent(node).expect("non-root node has a parent")];
            }
        }
        Ok(anchor)
    }

    fn dual_restricted(&self, mode: DualMode, eta: f64, anchors: Option<&[usize]>) -> Result<SuperhedgeLPSolution> {
        if !(eta >= 0.0) {
            return domain(format!("eta must be nonnegative, got {eta}"));
        }
        let dim = self.paths.dim;
        let n_paths = self.num_paths();
        let (scope, slack_paths, targets): (Vec<bool>, Vec<bool>, Vec<f64>) = match mode {
            DualMode::Penalty { n } => {
                if !(n >= 0.0) {
                    return domain(format!("penalty must be nonnegative, got {n}"));
                }
                let t = self.g.iter().zip(&self.dist).map(|(g, d)| g - n * d.min(1.0)).collect();
                (vec![true; n_paths], vec![false; n_paths], t)
            }
            DualMode::Hard { eps } => {
                if !(eps >= 0.0) {
                    return domain(format!("eps must be nonnegative, got {eps}"));
                }
                let inside: Vec<bool> = self.dist.iter().map(|&d| self.unconstrained || d <= eps).collect();
                let slack: Vec<bool> = inside.iter().map(|&i| !i && eta > 0.0).collect();
                let scope = inside.iter().zip(&slack).map(|(a, b)| *a || *b).collect();
                (scope, slack, self.g.clone())
            }
        };

        let mut lp = LinearProgram::new(Sense::Minimize);
        let a0 = lp.add_var(1.0, VarKind::Free);
        // static holdings: one free variable at eta = 0, a long/short pair otherwise
        let statics: Vec<(usize, Option<usize>)> = self
            .prices
            .iter()
            .map(|&price| {
                if eta == 0.0 {
                    (lp.add_var(price, VarKind::Free), None)
                } else {
                    (lp.add_var(price + eta, VarKind::NonNegative), Some(lp.add_var(-(price - eta), VarKind::NonNegative)))
                }
            })
            .collect();
        let node_count = self.paths.node_count();
        let mut delta_var = vec![usize::MAX; node_count];
        for node in 0..node_count {
            let owner = anchors.map_or(node, |a| a[node]);
            if owner == node {
                delta_var[node] = lp.num_vars();
                for _ in 0..dim {
                    lp.add_var(0.0, VarKind::Free);
                }
            }
        }
        let delta_of = |node: usize| delta_var[anchors.map_or(node, |a| a[node])];
        let c_var = slack_paths.iter().any(|&s| s).then(|| lp.add_var(eta, VarKind::NonNegative));

        let mut rows_paths = Vec::new();
        for p in 0..n_paths {
            if !scope[p] {
                continue;
            }
            let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
            coeffs.insert(a0, 1.0);
            for (j, &(long, short)) in statics.iter().enumerate() {
                let x = self.option_values[j][p];
                if x != 0.0 {
                    coeffs.insert(long, x);
                    if let Some(s) = short {
                        coeffs.insert(s, -x);
                    }
                }
            }
            for k in 0..self.paths.m {
                let base = delta_of(self.paths.node(p, k));
                for (i, dx) in self.paths.increment(p, k).into_iter().enumerate() {
                    if dx != 0.0 {
                        *coeffs.entry(base + i).or_insert(0.0) += dx;
                    }
                }
            }
            if slack_paths[p] {
                coeffs.insert(c_var.unwrap(), 1.0);
            }
            lp.add_row(coeffs.into_iter().collect(), Cmp::Ge, targets[p]);
            rows_paths.push(p);
        }

        let sol: LpSolution = lp.solve();
        let mut out = SuperhedgeLPSolution {
            value: f64::NAN,
            a0: 0.0,
            a_x: vec![0.0; self.prices.len()],
            delta: vec![vec![0.0; dim]; node_count],
            c: 0.0,
            status: sol.status,
            worst_slack: f64::INFINITY,
            worst_path: None,
            scope: scope.clone(),
            certificate: None,
        };
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => {
                out.value = f64::NEG_INFINITY;
                out.certificate = self.primal(eta)?.certificate;
                return Ok(out);
            }
            LpStatus::Infeasible => {
                return Err(Error::InternalConsistency("superhedging LP reported infeasible".into()));
            }
        }
        out.value = sol.objective;
        out.a0 = sol.x[a0];
        for (j, &(long, short)) in statics.iter().enumerate() {
            out.a_x[j] = sol.x[long] - short.map_or(0.0, |s| sol.x[s]);
        }
        for node in 0..node_count {
            let base = delta_of(node);
            out.delta[node] = sol.x[base..base + dim].to_vec();
        }
        out.c = c_var.map_or(0.0, |c| sol.x[c]);
        for &p in &rows_paths {
            let release = if slack_paths[p] { out.c } else { 0.0 };
            let slack = out.portfolio(self, p) + release - targets[p];
            if slack < out.worst_slack {
                out.worst_slack = slack;
                out.worst_path = Some(p);
            }
        }
        Ok(out)
    }

    /// Largest violation of the martingale and calibration constraints under `q`.
    pub fn residuals(&self, q: &[f64]) -> (f64, f64) {
        let dim = self.paths.dim;
        let mut mart = vec![0.0; self.paths.node_count() * dim];
        for (p, &w) in q.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for k in 0..self.paths.m {
                let node = self.paths.node(p, k);
                for (i, dx) in self.paths.increment(p, k).into_iter().enumerate() {
                    mart[node * dim + i] += w * dx;
                }
            }
        }
        let mart_res = mart.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        (mart_res, self.mispricing(q))
    }

    /// `max_j |E_q[X_j] - P(X_j)|`.
    pub fn mispricing(&self, q: &[f64]) -> f64 {
        self.option_values
            .iter()
            .zip(&self.prices)
            .map(|(xs, price)| (xs.iter().zip(q).map(|(x, w)| x * w).sum::<f64>() - price).abs())
            .fold(0.0, f64::max)
    }

    /// Mass `q` puts on paths further than `eta` from the prediction set.
    pub fn outside_mass(&self, q: &[f64], eta: f64) -> f64 {
        if self.unconstrained {
            return 0.0;
        }
        q.iter().zip(&self.dist).filter(|(_, &d)| d > eta).map(|(w, _)| w).sum()
    }

    pub fn eta_membership(&self, q: &[f64], eta: f64) -> Result<EtaMembership> {
        check_measure(q, self.num_paths())?;
        let mispricing = self.mispricing(q);
        let outside = self.outside_mass(q, eta);
        Ok(EtaMembership {
            member: mispricing < eta && outside < eta,
            radius: self.membership_radius(q, mispricing),
            mispricing,
            outside_mass: outside,
        })
    }

    /// `inf { eta : mispricing < eta and outside_mass(eta) < eta }`.
    fn membership_radius(&self, q: &[f64], mispricing: f64) -> f64 {
        if self.unconstrained {
            return mispricing;
        }
        let mut levels: Vec<f64> = self.dist.iter().zip(q).filter(|(_, &w)| w > 0.0).map(|(&d, _)| d).collect();
        levels.push(0.0);
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        // on [levels[j], levels[j+1]) the outside mass is constant
        let mut best = f64::INFINITY;
        for (j, &lo) in levels.iter().enumerate() {
            let hi = levels.get(j + 1).copied().unwrap_or(f64::INFINITY);
            let out = self.outside_mass(q, lo);
            let cand = lo.max(mispricing).max(out);
            if cand < hi {
                best = best.min(cand);
            }
        }
        best
    }

    /// Law of coordinate `asset` at lattice date `k` under `q`.
    pub fn law(&self, q: &[f64], asset: usize, k: usize) -> Result<DiscreteMarginal> {
        let mut atoms: BTreeMap<u64, f64> = BTreeMap::new();
        let total: f64 = q.iter().sum();
        for (p, &w) in q.iter().enumerate() {
            if w > 0.0 {
                *atoms.entry(self.paths.value(p, k)[asset].to_bits()).or_insert(0.0) += w / total;
            }
        }
        let pairs: Vec<(f64, f64)> = atoms.into_iter().map(|(b, w)| (f64::from_bits(b), w)).collect();
        DiscreteMarginal::from_atoms(&pairs)
    }

    /// Marginal-distance relaxation: exact terminal laws, intermediate laws
    /// within `eta` in the bounded-Lipschitz metric, and mass at least
    /// `1 - eta` within `eta` of the prediction set.
    pub fn marginal_eta_membership(&self, q: &[f64], mus: &[Vec<DiscreteMarginal>], eta: f64) -> Result<bool> {
        check_measure(q, self.num_paths())?;
        let d = self.model.info.d;
        let n = self.model.maturity_indices.len();
        if mus.len() != d || mus.iter().any(|m| m.len() != n) {
            return domain(format!("need {n} marginals for each of {d} assets"));
        }
        for (i, row) in mus.iter().enumerate() {
            for (j, mu) in row.iter().enumerate() {
                let law = self.law(q, i, self.model.maturity_indices[j])?;
                if j + 1 == n {
                    if !same_law(&law, mu, 1e-9) {
                        return Ok(false);
                    }
                } else if bl_distance(&law, mu)? > eta {
                    return Ok(false);
                }
            }
        }
        Ok(self.outside_mass(q, eta) <= eta)
    }
}

fn check_measure(q: &[f64], n: usize) -> Result<()> {
    if q.len() != n || q.iter().any(|w| !(*w >= -1e-12)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return domain("measure must be a probability vector over the lattice paths");
    }
    Ok(())
}

fn same_law(a: &DiscreteMarginal, b: &DiscreteMarginal, tol: f64) -> bool {
    let mut diff: BTreeMap<u64, f64> = BTreeMap::new();
    for (x, w) in a.support().iter().zip(a.probs()) {
        *diff.entry(x.to_bits()).or_insert(0.0) += w;
    }
    for (x, w) in b.support().iter().zip(b.probs()) {
        *diff.entry(x.to_bits()).or_insert(0.0) -= w;
    }
    diff.values().all(|d| d.abs() <= tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaMembership {
    pub member: bool,
    /// Smallest relaxation level at which membership holds (an infimum:
    /// membership itself needs a strictly larger level).
    pub radius: f64,
    pub mispricing: f64,
    pub outside_mass: f64,
}

pub fn primal_solve(model: &LatticeModel, g: &Payoff, options: &[QuotedOption], set: &PredictionSet, eta: f64) -> Result<MartingaleLPSolution> {
    MotProblem::new(model, g, options, set)?.primal(eta)
}

pub fn dual_solve(model: &LatticeModel, g: &Payoff, options: &[QuotedOption], set: &PredictionSet, mode: DualMode, eta: f64) -> Result<SuperhedgeLPSolution> {
    MotProblem::new(model, g, options, set)?.dual(mode, eta)
}

pub fn eta_membership(model: &LatticeModel, q: &[f64], options: &[QuotedOption], set: &PredictionSet, eta: f64) -> Result<EtaMembership> {
    let paths = model.enumerate()?;
    let g = vec![0.0; paths.len()];
    MotProblem::from_paths(model, paths, g, options, set)?.eta_membership(q, eta)
}

pub fn marginal_eta_membership(
    model: &LatticeModel,
    q: &[f64],
    mus: &[Vec<DiscreteMarginal>],
    set: &PredictionSet,
    eta: f64,
) -> Result<bool> {
    let paths = model.enumerate()?;
    let g = vec![0.0; paths.len()];
    MotProblem::from_paths(model, paths, g, &[], set)?.marginal_eta_membership(q, mus, eta)
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub eta: f64,
    pub primal_status: LpStatus,
    pub primal: f64,
    /// Exact dual of the relaxed primal (hard mode at `eps = eta`).
    pub dual: f64,
    /// Penalty `ceil(1/eta)`, absent at `eta = 0` or without a prediction set.
    pub penalty_n: Option<f64>,
    pub dual_penalty: Option<f64>,
    pub gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub rows: Vec<GapRow>,
    pub tolerance: f64,
}

impl DualityReport {
    /// Whether every feasible row closes its gap within tolerance.
    pub fn gaps_closed(&self) -> bool {
        self.rows.iter().filter(|r| r.primal_status == LpStatus::Optimal).all(|r| r.gap.abs() <= self.tolerance)
    }

    /// First relaxation level at which the primal becomes feasible after an
    /// infeasible one.
    pub fn feasibility_transition(&self) -> Option<f64> {
        self.rows
            .windows(2)
            .find(|w| w[0].primal_status != LpStatus::Optimal && w[1].primal_status == LpStatus::Optimal)
            .map(|w| w[1].eta)
    }
}

pub const GAP_TOLERANCE: f64 = 1e-6;

impl MotProblem {
    pub fn duality_gap(&self, eta_schedule: &[f64]) -> Result<DualityReport> {
        let mut rows = Vec::with_capacity(eta_schedule.len());
        for &eta in eta_schedule {
            let primal = self.primal(eta)?;
            let dual = self.dual(DualMode::Hard { eps: eta }, eta)?;
            let penalty_n = (eta > 0.0 && !self.unconstrained).then(|| (1.0 / eta).ceil());
            let dual_penalty = match penalty_n {
                Some(n) => Some(self.dual(DualMode::Penalty { n }, eta)?.value),
                None => None,
            };
            let gap = if primal.status == LpStatus::Optimal { dual.value - primal.value } else { f64::NAN };
            rows.push(GapRow { eta, primal_status: primal.status, primal: primal.value, dual: dual.value, penalty_n, dual_penalty, gap });
        }
        Ok(DualityReport { rows, tolerance: GAP_TOLERANCE })
    }

    /// Penalty-mode duals at `eta = 0` for increasing penalties.
    pub fn penalty_sweep(&self, n_list: &[f64]) -> Result<Vec<(f64, f64)>> {
        if n_list.windows(2).any(|w| w[1] <= w[0]) {
            return domain("penalty list must be increasing");
        }
        n_list.iter().map(|&n| Ok((n, self.dual(DualMode::Penalty { n }, 0.0)?.value))).collect()
    }
}

pub fn duality_gap(model: &LatticeModel, g: &Payoff, options: &[QuotedOption], set: &PredictionSet, eta_schedule: &[f64]) -> Result<DualityReport> {
    MotProblem::new(model, g, options, set)?.duality_gap(eta_schedule)
}

pub fn penalty_sweep(model: &LatticeModel, g: &Payoff, options: &[QuotedOption], set: &PredictionSet, n_list: &[f64]) -> Result<Vec<(f64, f64)>> {
    MotProblem::new(model, g, options, set)?.penalty_sweep(n_list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::puts_from_marginal;
    use crate::payoffs::Vanilla;

    fn two_point_problem(g: &Payoff) -> MotProblem {
        let model = LatticeModel::single_asset(vec![0.0, 1.0], vec![vec![0.5, 1.0, 1.5]]).unwrap();
        let mu = DiscreteMarginal::new(vec![0.5, 1.5], vec![0.5, 0.5]).unwrap();
        let curve = puts_from_marginal(&mu, &[0.5, 1.0, 1.5]).unwrap();
        MotProblem::new(&model, g, &quote_puts(0, 0, &curve), &PredictionSet::All).unwrap()
    }

    #[test]
    fn static_replication_of_a_call() {
        let prob = two_point_problem(&Payoff::european(Vanilla::Call { strike: 1.0 }, 0, 1.0));
        let primal = prob.primal(0.0).unwrap();
        let dual = prob.dual(DualMode::Hard { eps: 0.0 }, 0.0).unwrap();
        assert!((primal.value - 0.25).abs() < 1e-12);
        assert!((dual.value - 0.25).abs() < 1e-9);
        assert!(dual.worst_slack > -1e-9);
        let (mart, cal) = prob.residuals(&primal.weights);
        assert!(mart < 1e-12 && cal < 1e-12);
    }

    #[test]
    fn constant_payoff_needs_no_trading() {
        let prob = two_point_problem(&Payoff::constant(0.7));
        let dual = prob.dual(DualMode::Penalty { n: 0.0 }, 0.0).unwrap();
        assert!((dual.value - 0.7).abs() < 1e-9);
    }

    #[test]
    fn mean_violation_is_infeasible_with_certificate() {
        let model = LatticeModel::single_asset(vec![0.0, 1.0], vec![vec![0.5, 1.0, 1.5]]).unwrap();
        let mu = DiscreteMarginal::new(vec![1.0, 1.5], vec![0.6, 0.4]).unwrap();
        let curve = puts_from_marginal(&mu, &[0.5, 1.0, 1.5]).unwrap();
        let prob = MotProblem::new(&model, &Payoff::constant(0.0), &quote_puts(0, 0, &curve), &PredictionSet::All).unwrap();
        let primal = prob.primal(0.0).unwrap();
        assert_eq!(primal.status, LpStatus::Infeasible);
        assert!(primal.certificate.is_some());
        let dual = prob.dual(DualMode::Hard { eps: 0.0 }, 0.0).unwrap();
        assert_eq!(dual.status, LpStatus::Unbounded);
        let report = prob.duality_gap(&[0.0, 0.1, 0.2]).unwrap();
        assert_eq!(report.feasibility_transition(), Some(0.2));
        assert!(report.gaps_closed());
    }

    #[test]
    fn membership_radius() {
        let prob = two_point_problem(&Payoff::constant(0.0));
        let q = prob.primal(0.0).unwrap().weights;
        let m = prob.eta_membership(&q, 0.01).unwrap();
        assert!(m.member);
        assert!(m.radius < 1e-12);

        let ball = MotProblem { unconstrained: false, dist: vec![0.0, 0.0, 0.3], ..prob.clone() };
        let q = vec![0.4, 0.4, 0.2];
        let m = ball.eta_membership(&q, 0.2).unwrap();
        assert!(!m.member);
        assert!(m.radius >= 0.2);
    }

    #[test]
    fn simple_strategies_with_fine_mesh_match_unrestricted() {
        let model = LatticeModel::single_asset(vec![0.0, 0.5, 1.0], vec![vec![0.5, 1.5], vec![0.25, 1.0, 1.75]]).unwrap();
        let prob = MotProblem::new(&model, &Payoff::lookback_max(0), &[], &PredictionSet::All).unwrap();
        let free = prob.dual(DualMode::Hard { eps: 0.0 }, 0.0).unwrap().value;
        let fine = prob.dual_simple(DualMode::Hard { eps: 0.0 }, 0.0, 3).unwrap().value;
        let coarse = prob.dual_simple(DualMode::Hard { eps: 0.0 }, 0.0, 0).unwrap().value;
        assert!((free - fine).abs() < 1e-9);
        assert!(coarse >= fine - 1e-9);
    }
}
