//! Dense two-phase primal simplex.
//!
//! Problems are stated in general form (free or nonnegative variables,
//! `<=`/`>=`/`=` rows) and solved on a dense tableau. Bland's rule is the
//! reference pivot rule; [`PivotRule::Dantzig`] picks the most negative
//! reduced cost and falls back to Bland after a run of degenerate pivots.
//!
//! Solutions carry row duals (`d objective / d rhs`) and, for infeasible
//! problems, a Farkas certificate read off the phase-one duals.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl LpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    Bland,
    Dantzig,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub rule: PivotRule,
    pub pivot_tol: f64,
    pub cost_tol: f64,
    pub feasibility_tol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            rule: PivotRule::Bland,
            pivot_tol: 1e-9,
            cost_tol: 1e-10,
            feasibility_tol: 1e-9,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    kinds: Vec<VarKind>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Per-row duals for the problem as stated.
    pub duals: Vec<f64>,
    /// Per-row Farkas multipliers `y` when infeasible: `y·b > 0`, `y·A_j <= 0`
    /// on nonnegative columns, `y·A_j = 0` on free columns, `y <= 0` on `<=`
    /// rows and `y >= 0` on `>=` rows.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self { sense, objective: Vec::new(), kinds: Vec::new(), rows: Vec::new() }
    }

    pub fn add_var(&mut self, cost: f64, kind: VarKind) -> usize {
        self.objective.push(cost);
        self.kinds.push(kind);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, cmp, rhs });
        self.rows.len() - 1
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn solve(&self) -> LpSolution {
        self.solve_with(&SimplexOptions::default())
    }

    pub fn solve_with(&self, opts: &SimplexOptions) -> LpSolution {
        Tableau::build(self).run(self, opts)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ColRole {
    Structural { var: usize, negated: bool },
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    ncols: usize,
    // (m + 2) x (ncols + 1), last column is the rhs; row m is the phase-two
    // cost row, row m + 1 the phase-one cost row
    data: Vec<f64>,
    basis: Vec<usize>,
    roles: Vec<ColRole>,
    // per row: the column that started as its identity column and the sign
    // the row was multiplied by to make the rhs nonnegative
    unit_col: Vec<usize>,
    unit_sign: Vec<f64>,
    row_flip: Vec<f64>,
}

impl Tableau {
    fn width(&self) -> usize {
        self.ncols + 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let mut roles = Vec::new();
        let mut var_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_vars()];
        for (v, kind) in lp.kinds.iter().enumerate() {
            roles.push(ColRole::Structural { var: v, negated: false });
            var_cols[v].push((roles.len() - 1, 1.0));
            if *kind == VarKind::Free {
                roles.push(ColRole::Structural { var: v, negated: true });
                var_cols[v].push((roles.len() - 1, -1.0));
            }
        }
        let mut row_flip = vec![1.0; m];
        let mut cmps = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            let (flip, cmp) = if row.rhs < 0.0 {
                (
                    -1.0,
                    match row.cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    },
                )
            } else {
                (1.0, row.cmp)
            };
            row_flip[i] = flip;
            cmps.push(cmp);
        }
        // slack / surplus columns
        let mut slack_col = vec![usize::MAX; m];
        for (i, cmp) in cmps.iter().enumerate() {
            if *cmp != Cmp::Eq {
                roles.push(ColRole::Slack);
                slack_col[i] = roles.len() - 1;
            }
        }
        let mut art_col = vec![usize::MAX; m];
        for (i, cmp) in cmps.iter().enumerate() {
            if *cmp != Cmp::Le {
                roles.push(ColRole::Artificial);
                art_col[i] = roles.len() - 1;
            }
        }
        let ncols = roles.len();
        let width = ncols + 1;
        let mut data = vec![0.0; (m + 2) * width];
        let mut basis = vec![0; m];
        let mut unit_col = vec![0; m];
        let mut unit_sign = vec![1.0; m];
        for (i, row) in lp.rows.iter().enumerate() {
            let f = row_flip[i];
            let base = i * width;
            for &(v, a) in &row.coeffs {
                for &(c, s) in &var_cols[v] {
                    data[base + c] += f * a * s;
                }
            }
            data[base + ncols] = f * row.rhs;
            match cmps[i] {
                Cmp::Le => {
                    data[base + slack_col[i]] = 1.0;
                    basis[i] = slack_col[i];
                    unit_col[i] = slack_col[i];
                }
                Cmp::Ge => {
                    data[base + slack_col[i]] = -1.0;
                    data[base + art_col[i]] = 1.0;
                    basis[i] = art_col[i];
                    unit_col[i] = art_col[i];
                }
                Cmp::Eq => {
                    data[base + art_col[i]] = 1.0;
                    basis[i] = art_col[i];
                    unit_col[i] = art_col[i];
                }
            }
            unit_sign[i] = 1.0;
        }
        // phase-two cost row (minimisation form), already priced out since
        // the initial basis has zero cost
        let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
        for (c, role) in roles.iter().enumerate() {
            if let ColRole::Structural { var, negated } = role {
                let s = if *negated { -1.0 } else { 1.0 };
                data[m * width + c] = sign * s * lp.objective[*var];
            }
        }
        // phase-one cost row: cost 1 on artificials, priced out
        for c in 0..ncols {
            if roles[c] == ColRole::Artificial {
                data[(m + 1) * width + c] = 1.0;
            }
        }
        for i in 0..m {
            if roles[basis[i]] == ColRole::Artificial {
                for c in 0..width {
                    let v = data[i * width + c];
                    data[(m + 1) * width + c] -= v;
                }
            }
        }
        Tableau { m, ncols, data, basis, roles, unit_col, unit_sign, row_flip }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width();
        let p = self.data[r * w + c];
        for k in 0..w {
            self.data[r * w + k] /= p;
        }
        self.data[r * w + c] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let update = |row: &mut [f64]| {
            let f = row[c];
            if f != 0.0 {
                for k in 0..w {
                    row[k] -= f * prow[k];
                }
                row[c] = 0.0;
            }
        };
        for row in before.chunks_mut(w) {
            update(row);
        }
        for row in after.chunks_mut(w) {
            update(row);
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations on cost row `cost_row`. Returns `false` on an
    /// unbounded direction.
    fn iterate(&mut self, cost_row: usize, allow_artificial: bool, opts: &SimplexOptions, iters: &mut usize) -> bool {
        let mut degenerate_run = 0usize;
        loop {
            if *iters >= opts.max_iterations {
                return true;
            }
            let use_bland = opts.rule == PivotRule::Bland || degenerate_run > 50;
            let mut enter = None;
            let mut best = -opts.cost_tol;
            for c in 0..self.ncols {
                if !allow_artificial && self.roles[c] == ColRole::Artificial {
                    continue;
                }
                let rc = self.at(cost_row, c);
                if rc < -opts.cost_tol {
                    if use_bland {
                        enter = Some(c);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        enter = Some(c);
                    }
                }
            }
            let Some(c) = enter else { return true };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.m {
                let a = self.at(r, c);
                if a > opts.pivot_tol {
                    let ratio = self.at(r, self.ncols) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[r] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = ratio;
                        leave = Some(r);
                    }
                }
            }
            let Some(r) = leave else { return false };
            if best_ratio.abs() <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
            *iters += 1;
        }
    }

    fn row_duals(&self, cost_row: usize, phase_one: bool) -> Vec<f64> {
        (0..self.m)
            .map(|i| {
                let c = self.unit_col[i];
                let cost = if phase_one && self.roles[c] == ColRole::Artificial { 1.0 } else { 0.0 };
                let y = (cost - self.at(cost_row, c)) / self.unit_sign[i];
                y * self.row_flip[i]
            })
            .collect()
    }

    fn run(mut self, lp: &LinearProgram, opts: &SimplexOptions) -> LpSolution {
        let m = self.m;
        let mut iters = 0;
        let rhs_scale = (0..m).map(|i| self.at(i, self.ncols).abs()).fold(1.0, f64::max);
        self.iterate(m + 1, true, opts, &mut iters);
        let infeasibility = -self.at(m + 1, self.ncols);
        if infeasibility > opts.feasibility_tol * rhs_scale {
            let farkas = self.row_duals(m + 1, true);
            return LpSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                x: vec![f64::NAN; lp.num_vars()],
                duals: vec![f64::NAN; m],
                farkas: Some(farkas),
                iterations: iters,
            };
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if self.roles[self.basis[r]] != ColRole::Artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for c in 0..self.ncols {
                if self.roles[c] == ColRole::Artificial {
                    continue;
                }
                let a = self.at(r, c).abs();
                if a > opts.pivot_tol && best.is_none_or(|(_, b)| a > b) {
                    best = Some((c, a));
                }
            }
            if let Some((c, _)) = best {
                self.pivot(r, c);
            }
        }
        let bounded = self.iterate(m, false, opts, &mut iters);
        let mut x = vec![0.0; lp.num_vars()];
        for r in 0..m {
            if let ColRole::Structural { var, negated } = self.roles[self.basis[r]] {
                let v = self.at(r, self.ncols);
                x[var] += if negated { -v } else { v };
            }
        }
        let objective: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        let mut duals = self.row_duals(m, false);
        if lp.sense == Sense::Maximize {
            for y in &mut duals {
                *y = -*y;
            }
        }
        LpSolution {
            status: if bounded { LpStatus::Optimal } else { LpStatus::Unbounded },
            objective: if bounded {
                objective
            } else if lp.sense == Sense::Maximize {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
            x,
            duals,
            farkas: None,
            iterations: iters,
        }
    }
}
