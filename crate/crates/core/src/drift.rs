//! Superhedging on finite sets of piecewise-constant paths under a
//! full-support prior, and its drift-penalised dual.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::discretise::{is_member_dhat, PiecewiseConstantPath};
use crate::error::{domain, Error, Result};
use crate::lp::{Cmp, LinearProgram, LpStatus, Sense, VarKind};
use crate::paths::InfoSpace;
use crate::rational::{pow2, q_from_f64, q_int, q_to_f64, Q};

/// Full-support probability on finitely many class members.
#[derive(Debug, Clone)]
pub struct DiscretePrior {
    pub n: u32,
    pub paths: Vec<PiecewiseConstantPath>,
    pub probs: Vec<f64>,
}

impl DiscretePrior {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Largest conditional drift `|E[S_next - S_now | prefix]|` over all
    /// prefixes on the common time grid.
    pub fn martingale_residual(&self) -> f64 {
        let tree = EventTree::new(&self.paths);
        let mut drift: Vec<Vec<f64>> = vec![vec![0.0; tree.dim]; tree.node_count];
        let mut mass = vec![0.0; tree.node_count];
        for (p, &w) in self.probs.iter().enumerate() {
            for j in 0..tree.steps() {
                let node = tree.node[p][j];
                mass[node] += w;
                for (i, dx) in tree.increment(p, j).into_iter().enumerate() {
                    drift[node][i] += w * dx;
                }
            }
        }
        drift
            .iter()
            .zip(&mass)
            .filter(|(_, &m)| m > 0.0)
            .flat_map(|(d, &m)| d.iter().map(move |x| (x / m).abs()))
            .fold(0.0, f64::max)
    }
}

/// Paths observed on the union of their jump times plus the horizon, with
/// prefix nodes at every grid time before the horizon.
struct EventTree {
    dim: usize,
    /// `values[p][j]` at grid time `j`, as floats.
    values: Vec<Vec<Vec<f64>>>,
    /// `node[p][j]` for `j < steps`.
    node: Vec<Vec<usize>>,
    node_count: usize,
}

impl EventTree {
    fn new(paths: &[PiecewiseConstantPath]) -> Self {
        let dim = paths[0].dim();
        let mut grid: Vec<Q> = paths.iter().flat_map(|f| f.jump_times.iter().cloned()).collect();
        grid.sort();
        grid.dedup();
        let mut exact: Vec<Vec<Vec<Q>>> = paths.iter().map(|f| grid.iter().map(|t| f.value_at(t).to_vec()).collect()).collect();
        for (f, v) in paths.iter().zip(exact.iter_mut()) {
            v.push(f.terminal.clone());
        }
        let steps = grid.len();
        let mut ids: BTreeMap<(usize, Vec<Vec<Q>>), usize> = BTreeMap::new();
        let mut node = vec![Vec::with_capacity(steps); paths.len()];
        for (p, v) in exact.iter().enumerate() {
            for j in 0..steps {
                let next = ids.len();
                let id = *ids.entry((j, v[..=j].to_vec())).or_insert(next);
                node[p].push(id);
            }
        }
        let values = exact.iter().map(|v| v.iter().map(|x| x.iter().map(q_to_f64).collect()).collect()).collect();
        Self { dim, values, node, node_count: ids.len() }
    }

    fn steps(&self) -> usize {
        self.node.first().map_or(0, Vec::len)
    }

    fn increment(&self, p: usize, j: usize) -> Vec<f64> {
        self.values[p][j + 1].iter().zip(&self.values[p][j]).map(|(a, b)| a - b).collect()
    }
}

/// Both sides of the drift-penalised duality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftDuality {
    /// Cheapest superhedge on the support with positions bounded by `N`.
    pub superhedge: f64,
    /// `sup_Q E_Q[G - N * sum |conditional drift|]` over measures on the support.
    pub penalised: f64,
}

pub const DRIFT_TOLERANCE: f64 = 1e-6;

/// Superhedging price of `g_hat` on `support` with `|position| <= bound_n`,
/// checked against the drift-penalised supremum over measures on `support`.
pub fn discrete_superhedge_penalised(
    support: &[PiecewiseConstantPath],
    prior: &[f64],
    g_hat: &[f64],
    bound_n: f64,
) -> Result<DriftDuality> {
    if support.is_empty() {
        return domain("empty support");
    }
    if prior.len() != support.len() || g_hat.len() != support.len() {
        return domain("prior and payoff must have one entry per support path");
    }
    if prior.iter().any(|w| !(*w > 0.0)) {
        return domain("prior must charge every support path");
    }
    if !(bound_n >= 0.0) {
        return domain(format!("position bound must be nonnegative, got {bound_n}"));
    }
    let dim = support[0].dim();
    let horizon = &support[0].horizon;
    if support.iter().any(|f| f.dim() != dim || &f.horizon != horizon) {
        return domain("support paths differ in dimension or horizon");
    }
    let tree = EventTree::new(support);
    let steps = tree.steps();

    // superhedge: min x  s.t.  x + sum_j gamma(node_j) . dS_j >= G,  |gamma| <= N
    let mut lp = LinearProgram::new(Sense::Minimize);
    let x = lp.add_var(1.0, VarKind::Free);
    let gamma0 = lp.num_vars();
    for _ in 0..tree.node_count * dim {
        lp.add_var(0.0, VarKind::Free);
    }
    for v in gamma0..gamma0 + tree.node_count * dim {
        lp.add_row(vec![(v, 1.0)], Cmp::Le, bound_n);
        lp.add_row(vec![(v, 1.0)], Cmp::Ge, -bound_n);
    }
    for (p, &g) in g_hat.iter().enumerate() {
        let mut coeffs: BTreeMap<usize, f64> = BTreeMap::new();
        coeffs.insert(x, 1.0);
        for j in 0..steps {
            let base = gamma0 + tree.node[p][j] * dim;
            for (i, dx) in tree.increment(p, j).into_iter().enumerate() {
                if dx != 0.0 {
                    *coeffs.entry(base + i).or_insert(0.0) += dx;
                }
            }
        }
        lp.add_row(coeffs.into_iter().collect(), Cmp::Ge, g);
    }
    let sup = lp.solve();
    if sup.status != LpStatus::Optimal {
        return Err(Error::InternalConsistency(format!("bounded superhedging LP is {}", sup.status.as_str())));
    }

    // penalised: max sum q G - N sum t  s.t.  t >= |sum_{p through node} q dS|
    let mut lp = LinearProgram::new(Sense::Maximize);
    let q: Vec<usize> = g_hat.iter().map(|&g| lp.add_var(g, VarKind::NonNegative)).collect();
    lp.add_row(q.iter().map(|&v| (v, 1.0)).collect(), Cmp::Eq, 1.0);
    let mut drift_rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); tree.node_count * dim];
    for p in 0..support.len() {
        for j in 0..steps {
            let node = tree.node[p][j];
            for (i, dx) in tree.increment(p, j).into_iter().enumerate() {
                if dx != 0.0 {
                    drift_rows[node * dim + i].push((q[p], dx));
                }
            }
        }
    }
    for row in drift_rows.into_iter().filter(|r| !r.is_empty()) {
        let t = lp.add_var(-bound_n, VarKind::NonNegative);
        let mut up = row.clone();
        up.push((t, -1.0));
        lp.add_row(up, Cmp::Le, 0.0);
        let mut down = row;
        down.push((t, 1.0));
        lp.add_row(down, Cmp::Ge, 0.0);
    }
    let pen = lp.solve();
    if pen.status != LpStatus::Optimal {
        return Err(Error::InternalConsistency(format!("drift-penalised LP is {}", pen.status.as_str())));
    }
    let out = DriftDuality { superhedge: sup.objective, penalised: pen.objective };
    if (out.superhedge - out.penalised).abs() > DRIFT_TOLERANCE {
        return Err(Error::InternalConsistency(format!(
            "drift duality mismatch: superhedge {} vs penalised {}",
            out.superhedge, out.penalised
        )));
    }
    Ok(out)
}

/// Symmetric random-walk prior on class members at mesh `N`.
///
/// At each allowed time, while fewer than `max_jumps` jumps have occurred,
/// every coordinate independently moves by `-2^-(N+k)`, `0` or `+2^-(N+k)`
/// with probability 1/3 each, `k` being the index of the prospective jump.
/// An all-zero move is no jump.
pub fn build_full_support_prior(n: u32, max_jumps: usize, allowed_times: &[Q], info: &InfoSpace) -> Result<DiscretePrior> {
    info.validate()?;
    let horizon = q_from_f64(info.horizon())?;
    if allowed_times.windows(2).any(|w| w[1] <= w[0]) {
        return domain("allowed times must be strictly increasing");
    }
    if allowed_times.iter().any(|t| t <= &q_int(0) || t >= &horizon) {
        return domain("allowed times must lie in (0, T)");
    }
    let dim = info.dim();
    let cap = q_from_f64(info.kappa())? + q_int(1);
    let moves = 3usize.pow(dim as u32);
    let branch_prob = 1.0 / moves as f64;

    let mut out = DiscretePrior { n, paths: Vec::new(), probs: Vec::new() };
    // depth-first over (time index, jumps so far, path so far, probability)
    let mut stack = vec![(0usize, PiecewiseConstantPath::constant(n, horizon.clone(), dim), 1.0f64)];
    while let Some((idx, f, prob)) = stack.pop() {
        let jumps = f.values.len() - 1;
        if idx == allowed_times.len() || jumps == max_jumps {
            out.paths.push(f);
            out.probs.push(prob);
            continue;
        }
        let h = pow2(-(n as i64 + jumps as i64 + 1));
        let last = f.values.last().unwrap().clone();
        if info.d < dim && (info.d..dim).any(|i| &last[i] + &h >= cap) {
            return Err(Error::Construction(format!(
                "node at time {} with {jumps} jumps reaches the option cap; no mean-preserving split",
                q_to_f64(&allowed_times[idx])
            )));
        }
        for code in (0..moves).rev() {
            let mut c = code;
            let mut next = last.clone();
            let mut moved = false;
            for x in next.iter_mut() {
                match c % 3 {
                    0 => {}
                    1 => {
                        *x += &h;
                        moved = true;
                    }
                    _ => {
                        *x -= &h;
                        moved = true;
                    }
                }
                c /= 3;
            }
            let mut g = f.clone();
            if moved {
                g.jump_times.push(allowed_times[idx].clone());
                g.values.push(next.clone());
                g.terminal = next;
            }
            stack.push((idx + 1, g, prob * branch_prob));
        }
    }
    for f in &out.paths {
        let report = is_member_dhat(f, info, n);
        if !report.member {
            return Err(Error::Construction(format!("prior path left the class: {report}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a.into(), b.into())
    }

    #[test]
    fn no_jumps_gives_dirac() {
        let info = InfoSpace::assets_only(1, vec![1.0]).unwrap();
        let prior = build_full_support_prior(4, 0, &[q(1, 2)], &info).unwrap();
        assert_eq!(prior.len(), 1);
        assert_eq!(prior.probs, vec![1.0]);
    }

    #[test]
    fn one_jump_is_symmetric() {
        let info = InfoSpace::assets_only(1, vec![1.0]).unwrap();
        let prior = build_full_support_prior(4, 1, &[q(1, 2)], &info).unwrap();
        assert_eq!(prior.len(), 3);
        let jumps: Vec<Q> = prior.paths.iter().map(|f| &f.terminal[0] - q_int(1)).collect();
        assert!(jumps.contains(&q(1, 32)) && jumps.contains(&q(-1, 32)) && jumps.contains(&q(0, 1)));
        assert!(prior.martingale_residual() < 1e-15);
    }

    #[test]
    fn duality_on_small_supports() {
        let info = InfoSpace::assets_only(1, vec![1.0]).unwrap();
        let prior = build_full_support_prior(4, 2, &[q(1, 4), q(1, 2), q(3, 4)], &info).unwrap();
        let g: Vec<f64> = prior.paths.iter().map(|f| (q_to_f64(&f.terminal[0]) - 1.0).abs() * 10.0).collect();
        for bound in [0.0, 1.0, 4.0, 100.0] {
            let r = discrete_superhedge_penalised(&prior.paths, &prior.probs, &g, bound).unwrap();
            if bound == 0.0 {
                let max = g.iter().cloned().fold(f64::MIN, f64::max);
                assert!((r.superhedge - max).abs() < 1e-9);
            }
        }
        let constant = PiecewiseConstantPath::constant(4, q_int(1), 1);
        let r = discrete_superhedge_penalised(&[constant], &[1.0], &[0.3], 5.0).unwrap();
        assert!((r.superhedge - 0.3).abs() < 1e-12 && (r.penalised - 0.3).abs() < 1e-12);
    }
}
