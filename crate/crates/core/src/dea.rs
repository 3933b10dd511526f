//! Chebyshev-distance DEA and the classical CCR/BCC multiplier models.
//!
//! A DMU's Chebyshev score is `r = 1 + 2 * delta`, where `delta` is the largest
//! uniform relative perturbation of the data under which the DMU keeps its
//! classification. Scores lie in `[0, 2]`; scores below 1 are inefficient.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, Relation, Sense};

/// Optimal deltas within this distance of zero are reported as exactly zero,
/// so that units on the frontier classify as efficient.
pub const DELTA_SNAP: f64 = 1e-10;

/// Inputs and outputs of `n` decision making units, one row per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    ids: Vec<String>,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(ids: Vec<String>, inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::Input("panel has no units".into()));
        }
        if inputs.len() != n || outputs.len() != n {
            return Err(Error::Input(format!(
                "{} ids, {} input rows, {} output rows",
                n,
                inputs.len(),
                outputs.len()
            )));
        }
        let r = inputs[0].len();
        let s = outputs[0].len();
        if r == 0 || s == 0 {
            return Err(Error::Input("panel needs at least one input and one output".into()));
        }
        for (k, (x, y)) in inputs.iter().zip(&outputs).enumerate() {
            if x.len() != r || y.len() != s {
                return Err(Error::Input(format!("ragged data in row {}", k)));
            }
            if x.iter().chain(y).any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Input(format!(
                    "row {} ({}) has a negative or non-finite entry",
                    k, ids[k]
                )));
            }
        }
        Ok(Panel {
            ids,
            inputs,
            outputs,
        })
    }

    /// Panel with ids `0..n`.
    pub fn from_rows(inputs: Vec<Vec<f64>>, outputs: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..inputs.len()).map(|i| i.to_string()).collect();
        Panel::new(ids, inputs, outputs)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs[0].len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn inputs(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn outputs(&self, i: usize) -> &[f64] {
        &self.outputs[i]
    }

    /// Sub-panel of the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Result<Panel> {
        if let Some(&bad) = rows.iter().find(|&&k| k >= self.len()) {
            return Err(Error::Input(format!("row {} out of range", bad)));
        }
        Panel::new(
            rows.iter().map(|&k| self.ids[k].clone()).collect(),
            rows.iter().map(|&k| self.inputs[k].clone()).collect(),
            rows.iter().map(|&k| self.outputs[k].clone()).collect(),
        )
    }

    /// Copy with input column `j` multiplied by `factor`.
    pub fn with_scaled_input(&self, j: usize, factor: f64) -> Result<Panel> {
        let mut p = self.clone();
        p.inputs.iter_mut().for_each(|row| row[j] *= factor);
        Panel::new(p.ids, p.inputs, p.outputs)
    }

    /// Copy with output column `k` multiplied by `factor`.
    pub fn with_scaled_output(&self, k: usize, factor: f64) -> Result<Panel> {
        let mut p = self.clone();
        p.outputs.iter_mut().for_each(|row| row[k] *= factor);
        Panel::new(p.ids, p.inputs, p.outputs)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::Input(format!(
                "unit index {} out of range for panel of {}",
                i,
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReturnsToScale {
    #[default]
    Vrs,
    Crs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Linearized model, one LP per unit.
    #[default]
    Linear,
    /// Original non-linear model, solved by bisection over delta.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Efficient,
    Inefficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyScore {
    pub dmu_id: String,
    pub delta: f64,
    pub score: f64,
    pub classification: Classification,
}

impl EfficiencyScore {
    pub fn from_delta(dmu_id: impl Into<String>, delta: f64) -> Self {
        let delta = if delta.abs() <= DELTA_SNAP {
            0.0
        } else {
            delta.clamp(-0.5, 0.5)
        };
        let score = 1.0 + 2.0 * delta;
        let classification = if score < 1.0 {
            Classification::Inefficient
        } else {
            Classification::Efficient
        };
        EfficiencyScore {
            dmu_id: dmu_id.into(),
            delta,
            score,
            classification,
        }
    }

    pub fn is_efficient(&self) -> bool {
        self.classification == Classification::Efficient
    }
}

/// Linearized Chebyshev LP for unit `i`.
///
/// Variables are laid out as `[delta, nu (inputs), mu (outputs), phi]`, with
/// `phi` present only under VRS. Rows: the unit's output normalization, its
/// input normalization, then one envelopment row per peer.
pub fn build_chebyshev_lp(panel: &Panel, i: usize, rts: ReturnsToScale) -> Result<LpProblem> {
    panel.check_index(i)?;
    let r = panel.n_inputs();
    let s = panel.n_outputs();
    let vrs = rts == ReturnsToScale::Vrs;
    let nv = 1 + r + s + usize::from(vrs);
    let nu = 1;
    let mu = 1 + r;
    let phi = 1 + r + s;

    let mut objective = vec![0.0; nv];
    objective[0] = 1.0;
    let mut lp = LpProblem::new(Sense::Maximize, objective);
    lp.set_free(0);
    if vrs {
        lp.set_free(phi);
    }

    // y_i' mu - phi - 2 delta >= 1
    let mut row = vec![0.0; nv];
    row[0] = -2.0;
    row[mu..mu + s].copy_from_slice(panel.outputs(i));
    if vrs {
        row[phi] = -1.0;
    }
    lp.add_constraint(row, Relation::Ge, 1.0);

    // x_i' nu + 2 delta <= 1
    let mut row = vec![0.0; nv];
    row[0] = 2.0;
    row[nu..nu + r].copy_from_slice(panel.inputs(i));
    lp.add_constraint(row, Relation::Le, 1.0);

    // y_k' mu - x_k' nu - phi <= 0 for every peer k
    for k in (0..panel.len()).filter(|&k| k != i) {
        let mut row = vec![0.0; nv];
        for (dst, x) in row[nu..nu + r].iter_mut().zip(panel.inputs(k)) {
            *dst = -x;
        }
        row[mu..mu + s].copy_from_slice(panel.outputs(k));
        if vrs {
            row[phi] = -1.0;
        }
        lp.add_constraint(row, Relation::Le, 0.0);
    }
    Ok(lp)
}

pub fn chebyshev_score_linear(panel: &Panel, i: usize, rts: ReturnsToScale) -> Result<EfficiencyScore> {
    let lp = build_chebyshev_lp(panel, i, rts)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let delta = sol.values.as_ref().map(|v| v[0]).unwrap_or(f64::NAN);
            Ok(EfficiencyScore::from_delta(panel.id(i), delta))
        }
        status => Err(Error::Numerical(format!(
            "linear Chebyshev LP for unit {} returned {:?}",
            panel.id(i),
            status
        ))),
    }
}

/// Feasibility system of the non-linear model at a fixed `delta`, in the
/// variables `[nu, mu, phi]`.
pub fn build_exact_feasibility_lp(
    panel: &Panel,
    i: usize,
    rts: ReturnsToScale,
    delta: f64,
) -> Result<LpProblem> {
    panel.check_index(i)?;
    let r = panel.n_inputs();
    let s = panel.n_outputs();
    let vrs = rts == ReturnsToScale::Vrs;
    let nv = r + s + usize::from(vrs);
    let phi = r + s;
    let shrink = 1.0 - delta;
    let grow = 1.0 + delta;

    let mut lp = LpProblem::new(Sense::Maximize, vec![0.0; nv]);
    if vrs {
        lp.set_free(phi);
    }

    // (1 - delta) y_i' mu - phi >= 1
    let mut row = vec![0.0; nv];
    for (dst, y) in row[r..r + s].iter_mut().zip(panel.outputs(i)) {
        *dst = shrink * y;
    }
    if vrs {
        row[phi] = -1.0;
    }
    lp.add_constraint(row, Relation::Ge, 1.0);

    // (1 + delta) x_i' nu <= 1
    let mut row = vec![0.0; nv];
    for (dst, x) in row[..r].iter_mut().zip(panel.inputs(i)) {
        *dst = grow * x;
    }
    lp.add_constraint(row, Relation::Le, 1.0);

    // (1 + delta) y_k' mu - (1 - delta) x_k' nu - phi <= 0
    for k in (0..panel.len()).filter(|&k| k != i) {
        let mut row = vec![0.0; nv];
        for (dst, x) in row[..r].iter_mut().zip(panel.inputs(k)) {
            *dst = -shrink * x;
        }
        for (dst, y) in row[r..r + s].iter_mut().zip(panel.outputs(k)) {
            *dst = grow * y;
        }
        if vrs {
            row[phi] = -1.0;
        }
        lp.add_constraint(row, Relation::Le, 0.0);
    }
    Ok(lp)
}

pub fn exact_feasible(panel: &Panel, i: usize, rts: ReturnsToScale, delta: f64) -> Result<bool> {
    let lp = build_exact_feasibility_lp(panel, i, rts, delta)?;
    Ok(solve_lp(&lp)?.status == LpStatus::Optimal)
}

#[derive(Debug, Clone, Copy)]
pub struct BisectionOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        BisectionOptions {
            tolerance: 1e-7,
            max_iterations: 60,
        }
    }
}

pub fn chebyshev_score_exact(panel: &Panel, i: usize, rts: ReturnsToScale) -> Result<EfficiencyScore> {
    chebyshev_score_exact_with(panel, i, rts, BisectionOptions::default())
}

/// Bisection over `delta` in `[-0.5, 0.5]`. Feasibility is monotone
/// non-increasing in `delta`, so the returned value is the largest delta
/// verified feasible, within `tolerance` of the supremum.
pub fn chebyshev_score_exact_with(
    panel: &Panel,
    i: usize,
    rts: ReturnsToScale,
    opts: BisectionOptions,
) -> Result<EfficiencyScore> {
    panel.check_index(i)?;
    let id = panel.id(i);
    let (mut lo, mut hi) = (-0.5_f64, 0.5_f64);
    if exact_feasible(panel, i, rts, hi)? {
        return Ok(EfficiencyScore::from_delta(id, hi));
    }
    if !exact_feasible(panel, i, rts, lo)? {
        return Ok(EfficiencyScore::from_delta(id, lo));
    }
    let mut iter = 0;
    while hi - lo > opts.tolerance && iter < opts.max_iterations {
        let mid = 0.5 * (lo + hi);
        if exact_feasible(panel, i, rts, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        iter += 1;
    }
    Ok(EfficiencyScore::from_delta(id, lo))
}

/// Input-oriented CCR (CRS) or BCC (VRS) efficiency in multiplier form.
pub fn classical_efficiency(panel: &Panel, i: usize, rts: ReturnsToScale) -> Result<f64> {
    panel.check_index(i)?;
    if panel.inputs(i).iter().any(|&x| x <= 0.0) {
        return Err(Error::Domain(format!(
            "unit {} has a zero input; the classical model needs strictly positive inputs, \
             use the Chebyshev model instead",
            panel.id(i)
        )));
    }
    let r = panel.n_inputs();
    let s = panel.n_outputs();
    let vrs = rts == ReturnsToScale::Vrs;
    let nv = r + s + usize::from(vrs);
    let u0 = r + s;

    let mut objective = vec![0.0; nv];
    objective[r..r + s].copy_from_slice(panel.outputs(i));
    if vrs {
        objective[u0] = -1.0;
    }
    let mut lp = LpProblem::new(Sense::Maximize, objective);
    if vrs {
        lp.set_free(u0);
    }
    let mut row = vec![0.0; nv];
    row[..r].copy_from_slice(panel.inputs(i));
    lp.add_constraint(row, Relation::Eq, 1.0);
    for k in 0..panel.len() {
        let mut row = vec![0.0; nv];
        for (dst, x) in row[..r].iter_mut().zip(panel.inputs(k)) {
            *dst = -x;
        }
        row[r..r + s].copy_from_slice(panel.outputs(k));
        if vrs {
            row[u0] = -1.0;
        }
        lp.add_constraint(row, Relation::Le, 0.0);
    }
    let sol = solve_lp(&lp)?;
    match sol.objective_value {
        Some(theta) if sol.status == LpStatus::Optimal => Ok(theta),
        _ => Err(Error::Numerical(format!(
            "classical model for unit {} returned {:?}",
            panel.id(i),
            sol.status
        ))),
    }
}

pub fn score_dmu(panel: &Panel, i: usize, rts: ReturnsToScale, method: Method) -> Result<EfficiencyScore> {
    match method {
        Method::Linear => chebyshev_score_linear(panel, i, rts),
        Method::Exact => chebyshev_score_exact(panel, i, rts),
    }
}

/// Scores every unit; runs on the current rayon pool, output in panel order.
pub fn score_all(panel: &Panel, rts: ReturnsToScale, method: Method) -> Result<Vec<EfficiencyScore>> {
    (0..panel.len())
        .into_par_iter()
        .map(|i| score_dmu(panel, i, rts, method))
        .collect()
}
