//! Second-stage analysis of efficiency scores.
//!
//! Scores in `(0, 2)` are mapped to the real line by `ln(r / (2 - r))` and
//! regressed on environmental covariates by ordinary least squares with
//! classical i.i.d. standard errors. Also hosts Pearson correlation, Gaussian
//! kernel density estimation and the share/mean/median summary.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dea::EfficiencyScore;
use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-6;

/// `ln(c / (2 - c))` with `c` the score clamped into `[epsilon, 2 - epsilon]`.
pub fn logit_transform(score: f64, epsilon: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&score) {
        return Err(Error::Domain(format!("score {} outside [0, 2]", score)));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {} outside (0, 1)", epsilon)));
    }
    let c = score.clamp(epsilon, 2.0 - epsilon);
    Ok((c / (2.0 - c)).ln())
}

/// Transformed scores plus the number of values that had to be clamped.
pub fn logit_transform_all(scores: &[f64], epsilon: f64) -> Result<(Vec<f64>, usize)> {
    let clamped = scores
        .iter()
        .filter(|&&s| s < epsilon || s > 2.0 - epsilon)
        .count();
    let values = scores
        .iter()
        .map(|&s| logit_transform(s, epsilon))
        .collect::<Result<Vec<_>>>()?;
    Ok((values, clamped))
}

/// Inverse of [`logit_transform`]: `2 / (1 + exp(-z))`.
pub fn inverse_logit(z: f64) -> f64 {
    2.0 / (1.0 + (-z).exp())
}

/// Column-major regressor matrix with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl DesignMatrix {
    pub fn new(labels: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != columns.len() || columns.is_empty() {
            return Err(Error::Input(format!(
                "{} labels for {} columns",
                labels.len(),
                columns.len()
            )));
        }
        let n = columns[0].len();
        for (label, col) in labels.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Input(format!("column {} has {} rows, expected {}", label, col.len(), n)));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("column {} has a non-finite entry", label)));
            }
        }
        Ok(DesignMatrix { labels, columns })
    }

    /// Intercept-only design with `n` rows.
    pub fn intercept(n: usize) -> Self {
        DesignMatrix {
            labels: vec!["Intercept".into()],
            columns: vec![vec![1.0; n]],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn column(&self, l: usize) -> &[f64] {
        &self.columns[l]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn has_intercept(&self) -> bool {
        self.columns.iter().any(|c| c.iter().all(|&v| v == 1.0))
    }
}

/// Environmental design `[1, ln p, 1 / ln p, t / p]`.
pub fn build_design_matrix(population: &[f64], distance: &[f64]) -> Result<DesignMatrix> {
    if population.len() != distance.len() {
        return Err(Error::Input(format!(
            "{} populations for {} distances",
            population.len(),
            distance.len()
        )));
    }
    if let Some(p) = population.iter().find(|&&p| !(p > 1.0) || !p.is_finite()) {
        return Err(Error::Domain(format!("population {} must exceed 1", p)));
    }
    if let Some(t) = distance.iter().find(|&&t| !(t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!("distance {} must be non-negative", t)));
    }
    let n = population.len();
    let ln_p: Vec<f64> = population.iter().map(|p| p.ln()).collect();
    let inv_ln_p = ln_p.iter().map(|l| 1.0 / l).collect();
    let t_over_p = distance.iter().zip(population).map(|(t, p)| t / p).collect();
    DesignMatrix::new(
        vec!["Intercept".into(), "ln(p)".into(), "1/ln(p)".into(), "t/p".into()],
        vec![vec![1.0; n], ln_p, inv_ln_p, t_over_p],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub labels: Vec<String>,
    pub beta: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub sigma2_hat: f64,
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn df_resid(&self) -> usize {
        self.n_obs - self.beta.len()
    }
}

/// Least squares through a thin QR factorization (modified Gram-Schmidt with
/// one reorthogonalization pass).
pub fn ols_fit(design: &DesignMatrix, y: &[f64]) -> Result<RegressionFit> {
    let n = design.n_rows();
    let m = design.n_cols();
    if y.len() != n {
        return Err(Error::Input(format!("{} responses for {} rows", y.len(), n)));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite response".into()));
    }
    if n <= m {
        return Err(Error::Domain(format!("{} observations for {} regressors", n, m)));
    }

    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    for j in 0..m {
        let original = design.column(j);
        let norm0 = norm(original);
        let mut v = original.to_vec();
        for _pass in 0..2 {
            for (k, qk) in q.iter().enumerate() {
                let c = dot(qk, &v);
                r[k][j] += c;
                axpy(-c, qk, &mut v);
            }
        }
        let nv = norm(&v);
        if norm0 == 0.0 || nv <= 1e-10 * norm0 {
            let mut names: Vec<String> = (0..j)
                .filter(|&k| r[k][j].abs() > 1e-8 * norm0.max(f64::MIN_POSITIVE))
                .map(|k| design.labels()[k].clone())
                .collect();
            names.push(design.labels()[j].clone());
            return Err(Error::Singular(names));
        }
        r[j][j] = nv;
        v.iter_mut().for_each(|x| *x /= nv);
        q.push(v);
    }

    let qty: Vec<f64> = q.iter().map(|qk| dot(qk, y)).collect();
    let r_inv = upper_inverse(&r);
    let beta: Vec<f64> = (0..m)
        .map(|l| (l..m).map(|k| r_inv[l][k] * qty[k]).sum())
        .collect();

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted: f64 = (0..m).map(|l| design.column(l)[i] * beta[l]).sum();
            y[i] - fitted
        })
        .collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else if ssr == 0.0 {
        1.0
    } else {
        0.0
    };

    let df = (n - m) as f64;
    let sigma2_hat = ssr / df;
    let t_dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut std_errors = Vec::with_capacity(m);
    let mut t_stats = Vec::with_capacity(m);
    let mut p_values = Vec::with_capacity(m);
    for l in 0..m {
        let var: f64 = (l..m).map(|k| r_inv[l][k] * r_inv[l][k]).sum::<f64>() * sigma2_hat;
        let se = var.sqrt();
        let t = if se > 0.0 {
            beta[l] / se
        } else if beta[l] == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(beta[l])
        };
        let p = (2.0 * t_dist.sf(t.abs())).clamp(0.0, 1.0);
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(p);
    }

    Ok(RegressionFit {
        labels: design.labels().to_vec(),
        beta,
        std_errors,
        t_stats,
        p_values,
        r_squared,
        n_obs: n,
        sigma2_hat,
        residuals,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn upper_inverse(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = r.len();
    let mut inv = vec![vec![0.0; m]; m];
    for col in 0..m {
        for i in (0..=col).rev() {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (i + 1..=col).map(|k| r[i][k] * inv[k][col]).sum();
            inv[i][col] = (rhs - s) / r[i][i];
        }
    }
    inv
}

pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("vectors of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Domain("correlation needs at least two observations".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Domain("correlation with a constant vector".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Sample quantile with linear interpolation between order statistics
/// (R's default, type 7). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Silverman's rule `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, falling back to
/// the sd, then `|x_0|`, then 1 when the spread measures vanish.
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::Domain("bandwidth needs at least two observations".into()));
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let sd = (sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sorted = sorted_copy(sample);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut lo = sd.min(iqr / 1.34);
    if lo <= 0.0 {
        lo = sd;
    }
    if lo <= 0.0 {
        lo = sample[0].abs();
    }
    if lo <= 0.0 {
        lo = 1.0;
    }
    Ok(0.9 * lo * n.powf(-0.2))
}

/// Gaussian kernel density of `sample` at each grid point, with the given
/// bandwidth or Silverman's rule when `None`.
pub fn gaussian_kde(sample: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    if sample.is_empty() {
        return Err(Error::Domain("density of an empty sample".into()));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Domain(format!("bandwidth {} must be positive", h))),
        None => silverman_bandwidth(sample)?,
    };
    let norm = 1.0 / (sample.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok(grid
        .iter()
        .map(|&x| {
            let s: f64 = sample
                .iter()
                .map(|&xi| {
                    let u = (x - xi) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            s * norm
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl DensityCurve {
    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }
}

/// Grid padding on each side of the sample range, in bandwidths.
pub const DENSITY_PAD: f64 = 4.0;

/// Density on an even grid over `[min - 4h, max + 4h]` with spacing at most
/// `h / 8` and at least 512 points.
pub fn density_curve(sample: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve> {
    if sample.is_empty() {
        return Err(Error::Domain("density of an empty sample".into()));
    }
    let h = match bandwidth {
        Some(h) => h,
        None => silverman_bandwidth(sample)?,
    };
    let min = sample.iter().copied().fold(f64::INFINITY, f64::min);
    let max = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = min - DENSITY_PAD * h;
    let hi = max + DENSITY_PAD * h;
    let points = (((hi - lo) / (h / 8.0)).ceil() as usize + 1).clamp(512, 200_001);
    let step = (hi - lo) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|k| lo + k as f64 * step).collect();
    let values = gaussian_kde(sample, &grid, Some(h))?;
    Ok(DensityCurve {
        bandwidth: h,
        grid,
        values,
    })
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub n: usize,
    pub share_inefficient: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn summarize_values(scores: &[f64]) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::Domain("summary of an empty score set".into()));
    }
    let n = scores.len();
    let inefficient = scores.iter().filter(|&&s| s < 1.0).count();
    let sorted = sorted_copy(scores);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(ScoreSummary {
        n,
        share_inefficient: inefficient as f64 / n as f64,
        mean: scores.iter().sum::<f64>() / n as f64,
        median,
    })
}

pub fn summarize_scores(scores: &[EfficiencyScore]) -> Result<ScoreSummary> {
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    summarize_values(&values)
}
