//! Dense two-phase primal simplex.
//!
//! The solver works on a condensed (Tucker) tableau: one row per constraint and
//! one column per nonbasic variable, so the slack identity block is never
//! stored. DEA multiplier problems have thousands of rows but only a handful of
//! structural variables, which keeps every pivot at `O(rows * vars)`.
//!
//! Rows and columns are equilibrated by max-abs scaling before the solve.
//! Pricing is Dantzig (most negative reduced cost) and switches to Bland's rule
//! once `bland_after` iterations have elapsed in a phase.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<VarBound>,
}

impl LpProblem {
    /// New problem with every variable nonnegative and no constraints.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let bounds = vec![VarBound::NonNegative; objective.len()];
        LpProblem {
            sense,
            objective,
            constraints: Vec::new(),
            bounds,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn set_free(&mut self, var: usize) {
        self.bounds[var] = VarBound::Free;
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if self.bounds.len() != n {
            return Err(Error::Input(format!(
                "{} variable bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Input(format!(
                    "constraint {} has {} coefficients, expected {}",
                    i,
                    c.coeffs.len(),
                    n
                )));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::Input(format!("constraint {} has a non-finite entry", i)));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint by `x`, measured after scaling each
    /// row by its max-abs coefficient.
    pub fn max_scaled_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for c in &self.constraints {
            let scale = c.coeffs.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let gap = (lhs - c.rhs) / scale;
            let viol = match c.relation {
                Relation::Le => gap.max(0.0),
                Relation::Ge => (-gap).max(0.0),
                Relation::Eq => gap.abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub objective_value: Option<f64>,
    /// Present iff `status == Optimal`.
    pub values: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            objective_value: None,
            values: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Smallest magnitude accepted as a pivot element.
    pub pivot_tol: f64,
    /// Phase-one infeasibility and reduced-cost tolerance.
    pub feasibility_tol: f64,
    /// Iterations per phase after which pricing switches to Bland's rule.
    pub bland_after: usize,
    pub max_iterations: usize,
    pub scale: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pivot_tol: 1e-10,
            feasibility_tol: 1e-9,
            bland_after: 500,
            max_iterations: 100_000,
            scale: true,
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(problem, &SolverOptions::default())
}

pub fn solve_lp_with(problem: &LpProblem, opts: &SolverOptions) -> Result<LpSolution> {
    problem.validate()?;
    let mut t = Tableau::build(problem, opts);
    let mut iterations = 0;

    if t.has_artificials {
        let outcome = t.run(PHASE_ONE, opts, &mut iterations)?;
        debug_assert!(outcome != Outcome::Unbounded);
        let infeasibility = -t.rhs(PHASE_ONE);
        if infeasibility > opts.feasibility_tol * (1.0 + t.artificial_rhs_norm) {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations));
        }
        t.expel_artificials(opts);
    }

    match t.run(PHASE_TWO, opts, &mut iterations)? {
        Outcome::Unbounded => Ok(LpSolution::without_point(LpStatus::Unbounded, iterations)),
        Outcome::Optimal => {
            let values = t.extract(problem);
            let raw: f64 = problem
                .objective
                .iter()
                .zip(&values)
                .map(|(c, v)| c * v)
                .sum();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective_value: Some(raw),
                values: Some(values),
                iterations,
            })
        }
    }
}

const PHASE_ONE: usize = 0;
const PHASE_TWO: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    /// Structural column `var` with sign +1 or -1 (free variables are split).
    Structural { var: usize, negative: bool },
    Slack,
    Artificial,
}

/// Condensed tableau. Row `r` (for `r >= 2`) reads
/// `basic[r] = rhs[r] - sum_j a[r][j] * nonbasic[j]`;
/// rows 0 and 1 hold the phase-one and phase-two objectives in the same form,
/// with the objective value in the rhs slot.
struct Tableau {
    width: usize,
    cols: usize,
    data: Vec<f64>,
    kinds: Vec<VarKind>,
    col_var: Vec<usize>,
    row_var: Vec<usize>,
    blocked: Vec<bool>,
    active: Vec<bool>,
    col_scale: Vec<f64>,
    has_artificials: bool,
    artificial_rhs_norm: f64,
}

impl Tableau {
    fn build(problem: &LpProblem, opts: &SolverOptions) -> Self {
        let n = problem.num_vars();
        let m = problem.num_constraints();

        let mut col_scale = vec![1.0; n];
        if opts.scale {
            for (j, s) in col_scale.iter_mut().enumerate() {
                let mx = problem
                    .constraints
                    .iter()
                    .fold(0.0_f64, |acc, c| acc.max(c.coeffs[j].abs()));
                if mx > 0.0 {
                    *s = mx;
                }
            }
        }

        let mut kinds = Vec::new();
        let mut struct_cols = Vec::new();
        for j in 0..n {
            struct_cols.push(kinds.len());
            kinds.push(VarKind::Structural {
                var: j,
                negative: false,
            });
            if problem.bounds[j] == VarBound::Free {
                kinds.push(VarKind::Structural {
                    var: j,
                    negative: true,
                });
            }
        }
        let n_struct_cols = kinds.len();

        // Scaled rows, flipped so that rhs >= 0 where an artificial is needed.
        struct Row {
            coeffs: Vec<f64>,
            rhs: f64,
            surplus: bool,
            artificial: bool,
        }
        let mut rows = Vec::with_capacity(m);
        for c in &problem.constraints {
            let mut coeffs: Vec<f64> = c
                .coeffs
                .iter()
                .zip(&col_scale)
                .map(|(a, s)| a / s)
                .collect();
            let mut rhs = c.rhs;
            if opts.scale {
                let mx = coeffs.iter().fold(0.0_f64, |acc, a| acc.max(a.abs()));
                if mx > 0.0 {
                    coeffs.iter_mut().for_each(|a| *a /= mx);
                    rhs /= mx;
                }
            }
            let (flip, surplus, artificial) = match c.relation {
                Relation::Le if rhs >= 0.0 => (false, false, false),
                Relation::Le => (true, true, true),
                Relation::Ge if rhs <= 0.0 => (true, false, false),
                Relation::Ge => (false, true, true),
                Relation::Eq => (rhs < 0.0, false, true),
            };
            if flip {
                coeffs.iter_mut().for_each(|a| *a = -*a);
                rhs = -rhs;
            }
            rows.push(Row {
                coeffs,
                rhs,
                surplus,
                artificial,
            });
        }

        let mut surplus_col = vec![usize::MAX; m];
        for (i, r) in rows.iter().enumerate() {
            if r.surplus {
                surplus_col[i] = kinds.len();
                kinds.push(VarKind::Slack);
            }
        }
        let cols = kinds.len();
        let width = cols + 1;

        let mut row_var = vec![usize::MAX, usize::MAX];
        let mut data = vec![0.0; (m + 2) * width];
        let mut has_artificials = false;
        let mut artificial_rhs_norm = 0.0_f64;
        for (i, r) in rows.iter().enumerate() {
            let base = (i + 2) * width;
            for j in 0..n {
                let a = r.coeffs[j];
                data[base + struct_cols[j]] = a;
                if problem.bounds[j] == VarBound::Free {
                    data[base + struct_cols[j] + 1] = -a;
                }
            }
            if r.surplus {
                // Surplus enters with coefficient -1 in the (possibly flipped) row.
                data[base + surplus_col[i]] = -1.0;
            }
            data[base + cols] = r.rhs;
            row_var.push(kinds.len());
            if r.artificial {
                kinds.push(VarKind::Artificial);
                has_artificials = true;
                artificial_rhs_norm = artificial_rhs_norm.max(r.rhs.abs());
                for j in 0..width {
                    data[PHASE_ONE * width + j] -= data[base + j];
                }
            } else {
                kinds.push(VarKind::Slack);
            }
        }

        let sign = match problem.sense {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        };
        for j in 0..n {
            let c = sign * problem.objective[j] / col_scale[j];
            data[PHASE_TWO * width + struct_cols[j]] = -c;
            if problem.bounds[j] == VarBound::Free {
                data[PHASE_TWO * width + struct_cols[j] + 1] = c;
            }
        }
        debug_assert!(n_struct_cols <= cols);

        Tableau {
            width,
            cols,
            data,
            kinds,
            col_var: (0..cols).collect(),
            row_var,
            blocked: vec![false; cols],
            active: vec![true; m + 2],
            col_scale,
            has_artificials,
            artificial_rhs_norm,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.cols]
    }

    fn n_rows(&self) -> usize {
        self.data.len() / self.width
    }

    fn run(&mut self, obj: usize, opts: &SolverOptions, iterations: &mut usize) -> Result<Outcome> {
        let mut local = 0usize;
        loop {
            let bland = local >= opts.bland_after;
            let Some(col) = self.entering(obj, opts, bland) else {
                return Ok(Outcome::Optimal);
            };
            let Some(row) = self.leaving(col, opts, bland) else {
                return Ok(Outcome::Unbounded);
            };
            self.pivot(row, col);
            local += 1;
            *iterations += 1;
            if *iterations > opts.max_iterations {
                return Err(Error::Numerical(format!(
                    "simplex exceeded {} iterations",
                    opts.max_iterations
                )));
            }
        }
    }

    fn entering(&self, obj: usize, opts: &SolverOptions, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.cols {
            if self.blocked[c] {
                continue;
            }
            let d = self.at(obj, c);
            if d >= -opts.feasibility_tol {
                continue;
            }
            best = match best {
                None => Some((c, d)),
                Some((bc, bd)) => {
                    let better = if bland {
                        self.col_var[c] < self.col_var[bc]
                    } else {
                        d < bd
                    };
                    if better {
                        Some((c, d))
                    } else {
                        Some((bc, bd))
                    }
                }
            };
        }
        best.map(|(c, _)| c)
    }

    fn leaving(&self, col: usize, opts: &SolverOptions, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64, f64)> = None;
        for r in 2..self.n_rows() {
            if !self.active[r] {
                continue;
            }
            let a = self.at(r, col);
            if a <= opts.pivot_tol {
                continue;
            }
            let ratio = self.rhs(r).max(0.0) / a;
            best = match best {
                None => Some((r, ratio, a)),
                Some((br, bratio, ba)) => {
                    let tie_band = 1e-12 * bratio.abs().max(1e-300);
                    let better = if ratio < bratio - tie_band {
                        true
                    } else if ratio <= bratio + tie_band {
                        if bland {
                            self.row_var[r] < self.row_var[br]
                        } else {
                            a > ba
                        }
                    } else {
                        false
                    };
                    if better {
                        Some((r, ratio, a))
                    } else {
                        Some((br, bratio, ba))
                    }
                }
            };
        }
        best.map(|(r, _, _)| r)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.at(row, col);
        let inv = 1.0 / p;
        {
            let prow = &mut self.data[row * w..(row + 1) * w];
            for (j, v) in prow.iter_mut().enumerate() {
                if j == col {
                    *v = inv;
                } else {
                    *v *= inv;
                }
            }
        }
        let prow: Vec<f64> = self.data[row * w..(row + 1) * w].to_vec();
        for r in 0..self.n_rows() {
            if r == row {
                continue;
            }
            let base = r * w;
            let f = self.data[base + col];
            if f == 0.0 {
                continue;
            }
            let line = &mut self.data[base..base + w];
            for (j, v) in line.iter_mut().enumerate() {
                if j == col {
                    *v = -f * inv;
                } else {
                    *v -= f * prow[j];
                }
            }
        }
        let leaving = self.row_var[row];
        self.row_var[row] = self.col_var[col];
        self.col_var[col] = leaving;
        if self.kinds[leaving] == VarKind::Artificial {
            self.blocked[col] = true;
        }
    }

    /// Pivot basic artificials (all at zero level after a feasible phase one)
    /// out of the basis; rows where that is impossible are redundant.
    fn expel_artificials(&mut self, opts: &SolverOptions) {
        for r in 2..self.n_rows() {
            if self.kinds[self.row_var[r]] != VarKind::Artificial {
                continue;
            }
            let idx = r * self.width + self.cols;
            self.data[idx] = 0.0;
            let mut best: Option<(usize, f64)> = None;
            for c in 0..self.cols {
                if self.blocked[c] {
                    continue;
                }
                let a = self.at(r, c).abs();
                if a > opts.pivot_tol && best.is_none_or(|(_, b)| a > b) {
                    best = Some((c, a));
                }
            }
            match best {
                Some((c, _)) => self.pivot(r, c),
                None => self.active[r] = false,
            }
        }
        // Any artificial still nonbasic must stay at zero.
        for c in 0..self.cols {
            if self.kinds[self.col_var[c]] == VarKind::Artificial {
                self.blocked[c] = true;
            }
        }
    }

    fn extract(&self, problem: &LpProblem) -> Vec<f64> {
        let mut col_values = vec![0.0; self.kinds.len()];
        for r in 2..self.n_rows() {
            col_values[self.row_var[r]] = self.rhs(r).max(0.0);
        }
        let mut x = vec![0.0; problem.num_vars()];
        for (id, kind) in self.kinds.iter().enumerate() {
            if let VarKind::Structural { var, negative } = *kind {
                let v = col_values[id];
                if negative {
                    x[var] -= v;
                } else {
                    x[var] += v;
                }
            }
        }
        for (v, s) in x.iter_mut().zip(&self.col_scale) {
            *v /= s;
        }
        x
    }
}
