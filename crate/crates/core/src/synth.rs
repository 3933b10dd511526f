//! Synthetic library panels with a planted environmental effect, and
//! brute-force oracles used to check the solvers.
//!
//! Each unit gets a latent transformed efficiency
//! `z = b0 + b1 ln p + b2 / ln p + b3 t / p + eps`, mapped to `(0, 2)` by the
//! inverse logit. Half of that value scales every output, so less efficient
//! units produce less from the same inputs.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

use crate::dea::{Panel, ReturnsToScale};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpProblem, LpStatus, Relation, Sense};
use crate::partition::tree::{midpoint, tie_tolerance};
use crate::partition::{FeatureTable, SplitCandidate};
use crate::records::LibraryRecord;
use crate::second_stage::inverse_logit;

/// Coefficients on (intercept, ln p, 1/ln p, t/p).
pub const PLANTED_BETA: [f64; 4] = [-24.09, 1.95, 54.34, -2.80];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_units: usize,
    /// Log-normal population: location and scale of `ln p`.
    pub population_log_mean: f64,
    pub population_log_sd: f64,
    /// Populations are rounded and floored here; must be at least 2.
    pub population_min: f64,
    pub density_log_mean: f64,
    pub density_log_sd: f64,
    /// Distance is uniform on `(0, distance_max]` except for a point mass at 0.
    pub distance_max: f64,
    pub distance_zero_share: f64,
    /// Two-year expenditure per inhabitant: log-normal location and scale.
    pub spend_log_mean: f64,
    pub spend_log_sd: f64,
    /// Population below which a library has no paid staff with this probability.
    pub small_library_population: f64,
    pub unstaffed_share: f64,
    /// Multiplicative log-normal scale of output noise around the frontier.
    pub output_noise_sd: f64,
    pub beta: [f64; 4],
    pub sigma2: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_units: 4660,
            population_log_mean: 6.4,
            population_log_sd: 1.25,
            population_min: 34.0,
            density_log_mean: -0.6,
            density_log_sd: 0.9,
            distance_max: 58.0,
            distance_zero_share: 0.03,
            spend_log_mean: 5.3,
            spend_log_sd: 0.6,
            small_library_population: 1000.0,
            unstaffed_share: 0.8,
            output_noise_sd: 0.15,
            beta: PLANTED_BETA,
            sigma2: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_units < 2 {
            return Err(Error::Input("a synthetic panel needs at least 2 units".into()));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Input(format!("sigma2 must be finite and >= 0, got {}", self.sigma2)));
        }
        if !(self.population_min >= 2.0) {
            return Err(Error::Input(format!(
                "population floor must be at least 2, got {}",
                self.population_min
            )));
        }
        if !(0.0..=1.0).contains(&self.distance_zero_share) || !(0.0..=1.0).contains(&self.unstaffed_share) {
            return Err(Error::Input("shares must lie in [0, 1]".into()));
        }
        let positive = [
            self.population_log_sd,
            self.density_log_sd,
            self.spend_log_sd,
            self.distance_max,
        ];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !(self.output_noise_sd >= 0.0) {
            return Err(Error::Input("scale parameters must be positive and finite".into()));
        }
        Ok(())
    }
}

/// What the generator planted.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub beta: [f64; 4],
    pub sigma2: f64,
    /// `z' beta + eps` per unit.
    pub latent_transformed: Vec<f64>,
    /// Inverse logit of the above, in `(0, 2)`.
    pub latent_efficiency: Vec<f64>,
}

pub fn generate_panel(config: &SynthConfig) -> Result<(Vec<LibraryRecord>, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lognormal = |m: f64, s: f64| LogNormal::new(m, s).map_err(|e| Error::Input(e.to_string()));
    let pop_dist = lognormal(config.population_log_mean, config.population_log_sd)?;
    let dens_dist = lognormal(config.density_log_mean, config.density_log_sd)?;
    let spend_dist = lognormal(config.spend_log_mean, config.spend_log_sd)?;
    let noise_dist = lognormal(0.0, config.output_noise_sd.max(f64::MIN_POSITIVE))?;
    let eps_dist = Normal::new(0.0, config.sigma2.sqrt()).map_err(|e| Error::Input(e.to_string()))?;

    let n = config.n_units;
    let mut records = Vec::with_capacity(n);
    let mut latent_transformed = Vec::with_capacity(n);
    let mut latent_efficiency = Vec::with_capacity(n);
    let b = config.beta;

    for i in 0..n {
        let p = pop_dist.sample(&mut rng).round().max(config.population_min);
        let d = dens_dist.sample(&mut rng);
        let t = if rng.random::<f64>() < config.distance_zero_share {
            0.0
        } else {
            // Recorded to the hundredth; stays positive so only the point
            // mass lands on zero.
            ((config.distance_max * (1.0 - rng.random::<f64>()) * 100.0).round() / 100.0).max(0.01)
        };
        let lp = p.ln();
        let eps = if config.sigma2 > 0.0 { eps_dist.sample(&mut rng) } else { 0.0 };
        let z = b[0] + b[1] * lp + b[2] / lp + b[3] * t / p + eps;
        let e = inverse_logit(z);
        latent_transformed.push(z);
        latent_efficiency.push(e);

        // Inputs.
        let spend = p * spend_dist.sample(&mut rng);
        let share16 = 0.45 + 0.1 * rng.random::<f64>();
        let exp16 = (spend * share16).round();
        let exp17 = (spend - exp16).round().max(0.0);
        let unstaffed =
            p < config.small_library_population && rng.random::<f64>() < config.unstaffed_share;
        let employees = if unstaffed {
            0.0
        } else {
            ((spend / 2.0 / 450_000.0) * (0.8 + 0.4 * rng.random::<f64>()) * 100.0).round() / 100.0
        };
        let coll16 = (p * (3.0 + 6.0 * rng.random::<f64>()) + 500.0).round();

        // Frontier outputs scaled by e / 2 in (0, 1).
        let f = 0.5 * e;
        let size = spend.sqrt() * (coll16 / p).sqrt();
        let out = |base: f64, rng: &mut ChaCha8Rng| -> f64 {
            let noise = if config.output_noise_sd > 0.0 {
                noise_dist.sample(rng)
            } else {
                1.0
            };
            (base * size * f * noise).round().max(0.0)
        };
        let registrations = out(0.25, &mut rng);
        let circulation = out(12.0, &mut rng);
        let events = if rng.random::<f64>() < 0.1 { 0.0 } else { out(0.6, &mut rng) };
        let additions = out(0.3, &mut rng);
        let coll17 = if rng.random::<f64>() < 0.15 {
            (coll16 - additions).max(0.0)
        } else {
            coll16 + additions
        };

        records.push(LibraryRecord {
            id: format!("S{:05}", i + 1),
            name: format!("Synthetic library {}", i + 1),
            expenditures_2016: Some(exp16),
            expenditures_2017: Some(exp17),
            employees_2017: Some(employees),
            collection_2016: Some(coll16),
            collection_2017: Some(coll17),
            registrations_2017: Some(registrations),
            circulation_2017: Some(circulation),
            event_attendance_2017: Some(events),
            population: Some(p),
            density: Some((d * 1000.0).round() / 1000.0),
            town_distance: Some(t),
        });
    }

    Ok((
        records,
        GroundTruth {
            beta: config.beta,
            sigma2: config.sigma2,
            latent_transformed,
            latent_efficiency,
        },
    ))
}

/// Per-unit ground truth as CSV: id, latent_transformed, latent_efficiency.
pub fn write_truth<W: Write>(records: &[LibraryRecord], truth: &GroundTruth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "latent_transformed", "latent_efficiency"])?;
    for ((r, z), e) in records
        .iter()
        .zip(&truth.latent_transformed)
        .zip(&truth.latent_efficiency)
    {
        w.write_record([r.id.clone(), z.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Planted coefficients as CSV: coefficient, value.
pub fn write_planted<W: Write>(truth: &GroundTruth, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["coefficient", "value"])?;
    for (name, v) in ["beta0", "beta1", "beta2", "beta3", "sigma2"]
        .iter()
        .zip(truth.beta.iter().chain(std::iter::once(&truth.sigma2)))
    {
        w.write_record([name.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Is the exact perturbation model feasible for unit `i` at `delta`?
/// Written out independently of the scoring module; variables are ordered
/// `[phi, mu (outputs), nu (inputs)]`.
fn oracle_feasible(panel: &Panel, i: usize, rts: ReturnsToScale, delta: f64) -> Result<bool> {
    let r = panel.n_inputs();
    let s = panel.n_outputs();
    let width = 1 + s + r;
    let mut lp = LpProblem::new(Sense::Maximize, vec![0.0; width]);
    lp.set_free(0);

    let row = |phi: f64, y: &[f64], ys: f64, x: &[f64], xs: f64| {
        let mut c = vec![phi];
        c.extend(y.iter().map(|v| v * ys));
        c.extend(x.iter().map(|v| v * xs));
        c
    };
    let zero_x = vec![0.0; r];
    let zero_y = vec![0.0; s];
    lp.add_constraint(row(-1.0, panel.outputs(i), 1.0 - delta, &zero_x, 0.0), Relation::Ge, 1.0);
    lp.add_constraint(row(0.0, &zero_y, 0.0, panel.inputs(i), 1.0 + delta), Relation::Le, 1.0);
    for k in (0..panel.len()).filter(|&k| k != i) {
        lp.add_constraint(
            row(-1.0, panel.outputs(k), 1.0 + delta, panel.inputs(k), -(1.0 - delta)),
            Relation::Le,
            0.0,
        );
    }
    if rts == ReturnsToScale::Crs {
        let mut c = vec![0.0; width];
        c[0] = 1.0;
        lp.add_constraint(c, Relation::Eq, 0.0);
    }
    Ok(solve_lp(&lp)?.status != LpStatus::Infeasible)
}

/// Scans `delta = -0.5 + k * step` from the top of `[-0.5, 0.5]` down and
/// returns `1 + 2 delta` for the first feasible point. If no grid point is
/// feasible the score is 0, the floor of the score range.
pub fn oracle_score_grid(panel: &Panel, i: usize, rts: ReturnsToScale, step: f64) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Input(format!("grid step must be positive, got {}", step)));
    }
    if i >= panel.len() {
        return Err(Error::Input(format!("unit {} out of range", i)));
    }
    let top = (1.0 / step).floor() as u64;
    for k in (0..=top).rev() {
        let delta = (-0.5 + k as f64 * step).min(0.5);
        if oracle_feasible(panel, i, rts, delta)? {
            return Ok(1.0 + 2.0 * delta);
        }
    }
    Ok(0.0)
}

/// Exhaustive single split with children of at least one unit.
pub fn oracle_best_split(features: &FeatureTable, target: &[f64]) -> Option<SplitCandidate> {
    oracle_best_split_min_bucket(features, target, 1)
}

/// Tries every (feature, midpoint) pair, computing each child's sum of
/// squares from scratch. Returns the largest reduction under the tree's tie
/// rule, even when that reduction is zero; `None` only when no admissible
/// threshold exists.
pub fn oracle_best_split_min_bucket(
    features: &FeatureTable,
    target: &[f64],
    min_bucket: usize,
) -> Option<SplitCandidate> {
    fn ss(values: &[f64]) -> f64 {
        let m = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().map(|v| (v - m) * (v - m)).sum()
    }
    let n = target.len();
    let min_bucket = min_bucket.max(1);
    let total = ss(target);
    let tie = tie_tolerance(total, target);
    let mut best: Option<SplitCandidate> = None;
    for f in 0..features.n_features() {
        let col = features.column(f);
        let mut distinct = col.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        for w in distinct.windows(2) {
            let threshold = midpoint(w[0], w[1]);
            let (left, right): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| col[i] < threshold);
            if left.len() < min_bucket || right.len() < min_bucket {
                continue;
            }
            let l: Vec<f64> = left.iter().map(|&i| target[i]).collect();
            let r: Vec<f64> = right.iter().map(|&i| target[i]).collect();
            let improvement = total - ss(&l) - ss(&r);
            if best.is_none_or(|b| improvement > b.improvement + tie) {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold,
                    improvement,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dea::{chebyshev_score_exact, Panel};
    use crate::records::preprocess;
    use crate::second_stage::{build_design_matrix, ols_fit};

    fn small(seed: u64, n: usize) -> SynthConfig {
        SynthConfig {
            seed,
            n_units: n,
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_records() {
        let a = generate_panel(&small(7, 50)).unwrap();
        let b = generate_panel(&small(7, 50)).unwrap();
        assert_eq!(a, b);
        let c = generate_panel(&small(8, 50)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn records_are_complete_and_valid() {
        let (records, truth) = generate_panel(&small(3, 500)).unwrap();
        let prepared = preprocess(&records).unwrap();
        assert_eq!(prepared.panel.len(), 500);
        assert!(prepared.environment.population.iter().all(|&p| p >= 34.0));
        assert!(truth.latent_efficiency.iter().all(|&e| e > 0.0 && e < 2.0));
        let zeros = prepared.environment.distance.iter().filter(|&&t| t == 0.0).count();
        assert!(zeros > 0 && zeros < 50, "{zeros}");
    }

    #[test]
    fn two_units_is_minimal() {
        assert_eq!(generate_panel(&small(1, 2)).unwrap().0.len(), 2);
        assert!(generate_panel(&small(1, 1)).is_err());
        let bad = SynthConfig {
            population_min: 1.5,
            ..small(1, 10)
        };
        assert!(generate_panel(&bad).is_err());
    }

    #[test]
    fn noiseless_latent_recovers_beta() {
        let cfg = SynthConfig {
            sigma2: 0.0,
            ..small(11, 300)
        };
        let (records, truth) = generate_panel(&cfg).unwrap();
        let pop: Vec<f64> = records.iter().map(|r| r.population.unwrap()).collect();
        let dist: Vec<f64> = records.iter().map(|r| r.town_distance.unwrap()).collect();
        let z = &truth.latent_transformed;
        let fit = ols_fit(&build_design_matrix(&pop, &dist).unwrap(), z).unwrap();
        for (est, want) in fit.beta.iter().zip(cfg.beta) {
            assert!((est - want).abs() < 1e-8, "{est} vs {want}");
        }
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_oracle_examples() {
        let one = Panel::from_rows(vec![vec![1.0]], vec![vec![1.0]]).unwrap();
        assert_eq!(oracle_score_grid(&one, 0, ReturnsToScale::Vrs, 1e-3).unwrap(), 2.0);

        let twins = Panel::from_rows(vec![vec![1.0], vec![1.0]], vec![vec![1.0], vec![1.0]]).unwrap();
        let r = oracle_score_grid(&twins, 0, ReturnsToScale::Vrs, 1e-3).unwrap();
        assert!((r - 1.0).abs() <= 2e-3, "{r}");

        let hand = Panel::from_rows(vec![vec![1.0], vec![2.0]], vec![vec![2.0], vec![1.0]]).unwrap();
        for i in 0..2 {
            let grid = oracle_score_grid(&hand, i, ReturnsToScale::Vrs, 1e-3).unwrap();
            let exact = chebyshev_score_exact(&hand, i, ReturnsToScale::Vrs).unwrap().score;
            assert!((grid - exact).abs() <= 2e-3, "{i}: {grid} vs {exact}");
        }
        let b = oracle_score_grid(&hand, 1, ReturnsToScale::Vrs, 1e-3).unwrap();
        assert!((b - 1.0 / 3.0).abs() <= 2e-3, "{b}");
    }

    #[test]
    fn split_oracle_examples() {
        let x: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let step: Vec<f64> = x.iter().map(|&v| if v < 10.0 { 0.0 } else { 1.0 }).collect();
        let table = FeatureTable::new(vec!["x".into()], vec![x.clone()]).unwrap();
        let s = oracle_best_split(&table, &step).unwrap();
        assert_eq!(s.threshold, 9.5);
        assert!((s.improvement - 5.0).abs() < 1e-12);

        let flat = vec![3.0; 20];
        assert_eq!(oracle_best_split(&table, &flat).unwrap().improvement, 0.0);
    }
}
