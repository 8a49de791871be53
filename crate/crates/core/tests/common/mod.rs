//! Random calibrated lattices shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use robust_bounds::lattice::{LatticeModel, LatticePaths};
use robust_bounds::mot_lp::QuotedOption;
use robust_bounds::paths::InfoSpace;
use robust_bounds::payoffs::{Payoff, Table};

/// Lattice together with a full-support martingale measure on it.
pub struct Instance {
    pub model: LatticeModel,
    pub paths: LatticePaths,
    pub q: Vec<f64>,
}

fn dyadic<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let a = (lo * 16.0).ceil() as i64;
    let b = (hi * 16.0).floor() as i64;
    rng.gen_range(a..=b) as f64 / 16.0
}

/// Grids per date for one coordinate with hulls strictly nested around 1.
///
/// With `disjoint`, consecutive grids share no value, so no transition is
/// flat.
pub fn nested_grids<R: Rng>(rng: &mut R, steps: usize, max_values: usize, disjoint: bool) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    for _ in 0..steps {
        let new_lo = lo - dyadic(rng, 0.125, 0.3125);
        let new_hi = hi + dyadic(rng, 0.125, 0.3125);
        let count = rng.gen_range(2..=max_values.max(2));
        let mut g = vec![new_lo, new_hi];
        let mut tries = 0;
        while g.len() < count && tries < 50 {
            tries += 1;
            let x = dyadic(rng, new_lo, new_hi);
            let clash = g.contains(&x) || (disjoint && (x == 1.0 || out.last().is_some_and(|p| p.contains(&x))));
            if !clash {
                g.push(x);
            }
        }
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(g);
        lo = new_lo;
        hi = new_hi;
    }
    out
}

/// Random mean-`x` law on the sorted grid `g`, charging every point; `x`
/// must lie strictly inside the hull of `g`.
pub fn mean_preserving<R: Rng>(rng: &mut R, x: f64, g: &[f64]) -> Vec<f64> {
    let (a, b) = (g[0], g[g.len() - 1]);
    assert!(a < x && x < b, "{x} not inside [{a}, {b}]");
    let w: Vec<f64> = g.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let m: f64 = w.iter().zip(g).map(|(p, y)| p * y).sum();
    let mut out = w.clone();
    if m > x {
        let theta = (x - a) / (m - a);
        out.iter_mut().for_each(|p| *p *= theta);
        out[0] += 1.0 - theta;
    } else if m < x {
        let theta = (b - x) / (b - m);
        out.iter_mut().for_each(|p| *p *= theta);
        *out.last_mut().unwrap() += 1.0 - theta;
    }
    out
}

/// Measure on the lattice built from independent per-coordinate
/// mean-preserving kernels at every node. Points of a grid above `cap` are
/// never charged, so nodes there carry no mass.
pub fn random_martingale<R: Rng>(rng: &mut R, model: &LatticeModel, paths: &LatticePaths, cap: f64) -> Vec<f64> {
    let m = model.m();
    let dim = model.dim();
    let mut kernels: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    let mut q = vec![0.0; paths.len()];
    for (p, qp) in q.iter_mut().enumerate() {
        let mut w = 1.0;
        for k in 0..m {
            let node = paths.node(p, k);
            for i in 0..dim {
                let grid = &model.grids[k][i];
                let kern = kernels.entry((node, i)).or_insert_with(|| {
                    let x = paths.value(p, k)[i];
                    if x > cap {
                        return vec![0.0; grid.len()];
                    }
                    let allowed: Vec<f64> = grid.iter().copied().filter(|y| *y <= cap).collect();
                    let law = mean_preserving(rng, x, &allowed);
                    grid.iter().map(|y| allowed.iter().position(|z| z == y).map_or(0.0, |j| law[j])).collect()
                });
                let next = paths.value(p, k + 1)[i];
                w *= kern[grid.iter().position(|y| *y == next).unwrap()];
            }
        }
        *qp = w;
    }
    q
}

pub fn put_price(paths: &LatticePaths, q: &[f64], asset: usize, date: usize, strike: f64) -> f64 {
    q.iter().enumerate().map(|(p, w)| w * (strike - paths.value(p, date)[asset]).max(0.0)).sum()
}

/// Puts on every asset and maturity at the given fraction of grid strikes,
/// priced under `q`. At least one strike per maturity is kept.
pub fn calibrate<R: Rng>(rng: &mut R, inst: &Instance, fraction: f64) -> Vec<QuotedOption> {
    let mut out = Vec::new();
    for (mi, &date) in inst.model.maturity_indices.iter().enumerate() {
        for asset in 0..inst.model.info.d {
            let grid = &inst.model.grids[date - 1][asset];
            let mut strikes: Vec<f64> = grid.iter().copied().filter(|_| rng.gen_bool(fraction)).collect();
            if strikes.is_empty() {
                strikes.push(*grid.choose(rng).unwrap());
            }
            for k in strikes {
                out.push(QuotedOption::put(asset, k, mi, put_price(&inst.paths, &inst.q, asset, date, k)));
            }
        }
    }
    out
}

/// Random lattice with `d <= 2` assets, up to two maturities, at most
/// `max_values` grid values and `max_steps` dates, and at most `max_paths`
/// paths.
pub fn random_instance<R: Rng>(rng: &mut R, max_values: usize, max_steps: usize, max_paths: usize, disjoint: bool) -> Instance {
    loop {
        let d = rng.gen_range(1..=2);
        let steps = rng.gen_range(1..=max_steps);
        let per_coord: Vec<Vec<Vec<f64>>> = (0..d).map(|_| nested_grids(rng, steps, max_values, disjoint)).collect();
        let grids: Vec<Vec<Vec<f64>>> = (0..steps).map(|k| (0..d).map(|i| per_coord[i][k].clone()).collect()).collect();
        let raw: usize = grids.iter().flatten().map(Vec::len).product();
        if raw > max_paths {
            continue;
        }
        let times: Vec<f64> = (0..=steps).map(|k| k as f64).collect();
        let mut maturity_indices = vec![steps];
        if steps > 1 && rng.gen_bool(0.5) {
            maturity_indices.insert(0, rng.gen_range(1..steps));
        }
        let maturities = maturity_indices.iter().map(|&j| times[j]).collect();
        let info = InfoSpace::assets_only(d, maturities).unwrap();
        let model = LatticeModel::new(times, maturity_indices, grids, info).unwrap();
        let paths = model.enumerate().unwrap();
        let q = random_martingale(rng, &model, &paths, f64::INFINITY);
        return Instance { model, paths, q };
    }
}

pub fn random_table<R: Rng>(rng: &mut R, paths: &LatticePaths) -> Payoff {
    let mut table = Table::new(paths.times.clone());
    for p in 0..paths.len() {
        let values: Vec<Vec<f64>> = (0..paths.times.len()).map(|k| paths.value(p, k).to_vec()).collect();
        table.insert(&values, rng.gen_range(0.0..1.0)).unwrap();
    }
    Payoff::table(table)
}
