//! Finite path lattices.
//!
//! A lattice fixes a time grid `0 = u_0 < ... < u_m = T_n` and, for every
//! date `k >= 1` and coordinate, a finite set of admissible values. Paths
//! start at `(1, ..., 1)` and pick one value per coordinate per date; they
//! are interpolated linearly between dates. Paths are enumerated depth-first,
//! so all paths sharing a history prefix form a contiguous block.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::paths::{in_info_space, GridPath, InfoSpace, PredictionSet, DEFAULT_INFO_TOL};
use crate::payoffs::Payoff;

pub const DEFAULT_PATH_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeModel {
    /// `u_0 = 0 < u_1 < ... < u_m`.
    pub times: Vec<f64>,
    /// Indices into `times` of the maturities, the last one being `m`.
    pub maturity_indices: Vec<usize>,
    /// `grids[k - 1][i]`: values of coordinate `i` allowed at date `k`.
    pub grids: Vec<Vec<Vec<f64>>>,
    /// Largest allowed one-step move per coordinate, if any.
    #[serde(default)]
    pub band: Option<f64>,
    pub info: InfoSpace,
}

impl LatticeModel {
    pub fn new(times: Vec<f64>, maturity_indices: Vec<usize>, grids: Vec<Vec<Vec<f64>>>, info: InfoSpace) -> Result<Self> {
        let model = Self { times, maturity_indices, grids, band: None, info };
        model.validate()?;
        Ok(model)
    }

    /// Single-asset lattice with the same value grid at every date and the
    /// last date as the only maturity.
    pub fn single_asset(times: Vec<f64>, grids: Vec<Vec<f64>>) -> Result<Self> {
        let m = times.len() - 1;
        let info = InfoSpace::assets_only(1, vec![times[m]])?;
        Self::new(times, vec![m], grids.into_iter().map(|g| vec![g]).collect(), info)
    }

    pub fn with_band(mut self, band: f64) -> Self {
        self.band = Some(band);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.info.validate()?;
        let m = self.times.len().checked_sub(1).ok_or_else(|| Error::Domain("empty time grid".into()))?;
        if m == 0 || self.times[0] != 0.0 || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return domain("lattice times must start at 0 and increase strictly");
        }
        if self.grids.len() != m {
            return domain(format!("{} grids for {m} dates", self.grids.len()));
        }
        let dim = self.info.dim();
        for (k, g) in self.grids.iter().enumerate() {
            if g.len() != dim {
                return domain(format!("date {} has {} coordinate grids, expected {dim}", k + 1, g.len()));
            }
            for (i, vals) in g.iter().enumerate() {
                if vals.is_empty() || vals.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return domain(format!("grid of coordinate {} at date {} is empty or negative", i + 1, k + 1));
                }
            }
        }
        if self.maturity_indices.len() != self.info.maturities.len() {
            return domain("one maturity index per maturity is required");
        }
        if self.maturity_indices.last() != Some(&m) || self.maturity_indices.windows(2).any(|w| w[1] <= w[0]) {
            return domain("maturity indices must increase and end at the last date");
        }
        for (&j, &t) in self.maturity_indices.iter().zip(&self.info.maturities) {
            if j == 0 || (self.times[j] - t).abs() > 1e-12 {
                return domain(format!("maturity {t} does not sit at lattice date {j}"));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.info.dim()
    }

    /// Path count before band and information-space filtering.
    pub fn raw_path_count(&self) -> u128 {
        self.grids.iter().flatten().fold(1u128, |n, g| n.saturating_mul(g.len() as u128))
    }

    pub fn enumerate(&self) -> Result<LatticePaths> {
        self.enumerate_with_budget(DEFAULT_PATH_BUDGET)
    }

    pub fn enumerate_with_budget(&self, budget: usize) -> Result<LatticePaths> {
        self.validate()?;
        let raw = self.raw_path_count();
        if self.band.is_none() && raw > budget as u128 {
            return Err(Error::Budget { paths: raw, budget });
        }
        let m = self.m();
        let dim = self.dim();
        let mut out = LatticePaths {
            times: self.times.clone(),
            dim,
            m,
            values: Vec::new(),
            nodes: Vec::new(),
            node_level: vec![0],
            node_parent: vec![usize::MAX],
            node_value: vec![vec![1.0; dim]],
        };
        let mut stack_values: Vec<Vec<f64>> = vec![vec![1.0; dim]];
        let mut stack_nodes: Vec<usize> = vec![0];
        self.descend(1, &mut stack_values, &mut stack_nodes, &mut out, budget)?;
        if out.is_empty() {
            return domain("lattice has no admissible paths");
        }
        Ok(out)
    }

    fn descend(
        &self,
        k: usize,
        stack_values: &mut Vec<Vec<f64>>,
        stack_nodes: &mut Vec<usize>,
        out: &mut LatticePaths,
        budget: usize,
    ) -> Result<()> {
        let m = self.m();
        let dim = self.dim();
        let grid = &self.grids[k - 1];
        let mut idx = vec![0usize; dim];
        loop {
            let v: Vec<f64> = (0..dim).map(|i| grid[i][idx[i]]).collect();
            let prev = stack_values.last().unwrap();
            let within_band = self.band.is_none_or(|b| v.iter().zip(prev).all(|(x, y)| (x - y).abs() <= b + 1e-12));
            if within_band {
                if k == m {
                    let term_ok = in_info_space_terminal(&self.info, &v);
                    if term_ok {
                        if out.len() >= budget {
                            return Err(Error::Budget { paths: out.len() as u128 + 1, budget });
                        }
                        for sv in stack_values.iter() {
                            out.values.extend_from_slice(sv);
                        }
                        out.values.extend_from_slice(&v);
                        out.nodes.extend_from_slice(stack_nodes);
                    }
                } else {
                    let node = out.node_level.len();
                    out.node_level.push(k);
                    out.node_parent.push(*stack_nodes.last().unwrap());
                    out.node_value.push(v.clone());
                    stack_values.push(v);
                    stack_nodes.push(node);
                    self.descend(k + 1, stack_values, stack_nodes, out, budget)?;
                    stack_values.pop();
                    stack_nodes.pop();
                }
            }
            // odometer over coordinates
            let mut i = dim;
            loop {
                if i == 0 {
                    return Ok(());
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < grid[i].len() {
                    break;
                }
                idx[i] = 0;
            }
        }
    }
}

fn in_info_space_terminal(info: &InfoSpace, v: &[f64]) -> bool {
    let implied = info.option_coords(&v[..info.d]);
    implied.iter().zip(&v[info.d..]).all(|(x, y)| (x - y).abs() <= DEFAULT_INFO_TOL)
}

/// Enumerated lattice paths with their history-prefix nodes.
///
/// Nodes are prefixes `(S_0, ..., S_k)` for `k < m`; node 0 is the root.
/// Nodes with no admissible continuation are kept but carry no paths.
#[derive(Debug, Clone)]
pub struct LatticePaths {
    pub times: Vec<f64>,
    pub dim: usize,
    pub m: usize,
    values: Vec<f64>,
    nodes: Vec<usize>,
    node_level: Vec<usize>,
    node_parent: Vec<usize>,
    node_value: Vec<Vec<f64>>,
}

impl LatticePaths {
    pub fn len(&self) -> usize {
        self.nodes.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_count(&self) -> usize {
        self.node_level.len()
    }

    pub fn node_level(&self, node: usize) -> usize {
        self.node_level[node]
    }

    pub fn node_parent(&self, node: usize) -> Option<usize> {
        let p = self.node_parent[node];
        (p != usize::MAX).then_some(p)
    }

    pub fn node_value(&self, node: usize) -> &[f64] {
        &self.node_value[node]
    }

    /// Value of path `p` at date `k`.
    pub fn value(&self, p: usize, k: usize) -> &[f64] {
        let base = (p * (self.m + 1) + k) * self.dim;
        &self.values[base..base + self.dim]
    }

    /// Node (prefix up to date `k`) of path `p`, for `k < m`.
    pub fn node(&self, p: usize, k: usize) -> usize {
        self.nodes[p * self.m + k]
    }

    pub fn increment(&self, p: usize, k: usize) -> Vec<f64> {
        self.value(p, k + 1).iter().zip(self.value(p, k)).map(|(a, b)| a - b).collect()
    }

    pub fn grid_path(&self, p: usize) -> GridPath {
        let values = (0..=self.m).map(|k| self.value(p, k).to_vec()).collect();
        GridPath::new(self.times.clone(), values).expect("lattice paths satisfy grid path invariants")
    }

    pub fn grid_paths(&self) -> Vec<GridPath> {
        (0..self.len()).into_par_iter().map(|p| self.grid_path(p)).collect()
    }

    pub fn evaluate(&self, g: &Payoff) -> Result<Vec<f64>> {
        (0..self.len()).into_par_iter().map(|p| g.evaluate(&self.grid_path(p))).collect()
    }

    /// Lower distance bound of each path to the prediction set.
    pub fn distances(&self, set: &PredictionSet) -> Result<Vec<f64>> {
        (0..self.len()).into_par_iter().map(|p| set.distance_bounds(&self.grid_path(p)).map(|b| b.0)).collect()
    }

    pub fn in_info(&self, info: &InfoSpace) -> bool {
        (0..self.len()).all(|p| in_info_space(&self.grid_path(p), info, DEFAULT_INFO_TOL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{TerminalClaim, TradedOption};

    #[test]
    fn enumeration_and_prefix_blocks() {
        let model = LatticeModel::single_asset(vec![0.0, 0.5, 1.0], vec![vec![0.5, 1.5], vec![0.0, 1.0, 2.0]]).unwrap();
        let paths = model.enumerate().unwrap();
        assert_eq!(paths.len(), 6);
        assert_eq!(paths.node_count(), 3);
        // first three paths share the prefix (1, 0.5)
        assert_eq!(paths.node(0, 1), paths.node(2, 1));
        assert_ne!(paths.node(2, 1), paths.node(3, 1));
        assert_eq!(paths.value(4, 2), &[1.0]);
        assert_eq!(paths.increment(5, 1), vec![0.5]);
    }

    #[test]
    fn budget_and_band() {
        let model = LatticeModel::single_asset(vec![0.0, 1.0, 2.0], vec![vec![0.5, 1.0, 1.5]; 2]).unwrap();
        assert!(matches!(model.enumerate_with_budget(5), Err(Error::Budget { .. })));
        let banded = model.with_band(0.5);
        // from 1: three moves; from 0.5 and 1.5: two each
        assert_eq!(banded.enumerate().unwrap().len(), 7);
    }

    #[test]
    fn option_coordinates_filtered_at_maturity() {
        let info = InfoSpace::new(1, vec![TradedOption { claim: TerminalClaim::MinCap { asset: 0, cap: 2.0 }, price: 1.0 }], vec![1.0]).unwrap();
        let model = LatticeModel::new(vec![0.0, 1.0], vec![1], vec![vec![vec![0.5, 1.5], vec![0.5, 1.5]]], info).unwrap();
        let paths = model.enumerate().unwrap();
        assert_eq!(paths.len(), 2);
        assert!(paths.in_info(&model.info));
    }
}
