//! End-to-end analysis: preliminary scores, the environmental regression,
//! categorisation (tree and/or expert rules), separated scores, and the
//! comparison of all score vectors.

use std::fmt;
use std::str::FromStr;

use crate::dea::{score_all, EfficiencyScore, Method, ReturnsToScale};
use crate::error::{Error, Result, Stage, StageExt};
use crate::partition::{
    expert_assignment, fit_regression_tree, separated_scores, tree_assignment, CategoryAssignment, FeatureTable,
    RegressionTree, TreeParams,
};
use crate::records::{preprocess, DropEntry, Environment, LibraryRecord};
use crate::second_stage::{
    build_design_matrix, density_curve, logit_transform_all, ols_fit, pearson_correlation, summarize_scores,
    summarize_values, DensityCurve, RegressionFit, ScoreSummary, DEFAULT_EPSILON,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    None,
    Tree,
    Expert,
    Both,
}

impl Mode {
    pub fn uses_tree(self) -> bool {
        matches!(self, Mode::Tree | Mode::Both)
    }

    pub fn uses_expert(self) -> bool {
        matches!(self, Mode::Expert | Mode::Both)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "none" => Ok(Mode::None),
            "tree" => Ok(Mode::Tree),
            "expert" => Ok(Mode::Expert),
            "both" => Ok(Mode::Both),
            other => Err(Error::Input(format!("unknown mode `{}`", other))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::None => "none",
            Mode::Tree => "tree",
            Mode::Expert => "expert",
            Mode::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub rts: ReturnsToScale,
    pub method: Method,
    pub epsilon: f64,
    pub tree: TreeParams,
    /// Offer population density to the tree as a third feature.
    pub tree_uses_density: bool,
    /// Kernel bandwidth; `None` picks one per score set.
    pub bandwidth: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::None,
            rts: ReturnsToScale::Vrs,
            method: Method::Linear,
            epsilon: DEFAULT_EPSILON,
            tree: TreeParams::default(),
            tree_uses_density: false,
            bandwidth: None,
        }
    }
}

/// One score vector with everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    /// `preliminary`, `tree` or `expert`.
    pub name: String,
    pub scores: Vec<EfficiencyScore>,
    pub summary: ScoreSummary,
    /// Absent when there are too few units to fit the model.
    pub regression: Option<RegressionFit>,
    /// Scores moved inside `[epsilon, 2 - epsilon]` before the transform.
    pub clamped: usize,
    pub density: Option<DensityCurve>,
}

impl ScoreSet {
    pub fn values(&self) -> Vec<f64> {
        self.scores.iter().map(|s| s.score).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRow {
    pub label: String,
    pub units: usize,
    pub mean_preliminary: f64,
    /// Summary of the scores computed within the category.
    pub separated: ScoreSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryScheme {
    /// `tree` or `expert`; matches the name of its score set.
    pub name: String,
    pub assignment: CategoryAssignment,
    pub rows: Vec<CategoryRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub config: PipelineConfig,
    pub ids: Vec<String>,
    pub environment: Environment,
    pub score_sets: Vec<ScoreSet>,
    pub schemes: Vec<CategoryScheme>,
    pub tree: Option<RegressionTree>,
    /// Pearson correlations between score sets, in `score_sets` order.
    /// Entries involving a constant score vector are NaN.
    pub correlations: Vec<Vec<f64>>,
    pub drops: Vec<DropEntry>,
    pub warnings: Vec<String>,
}

impl PipelineReport {
    pub fn score_set(&self, name: &str) -> Option<&ScoreSet> {
        self.score_sets.iter().find(|s| s.name == name)
    }

    pub fn scheme(&self, name: &str) -> Option<&CategoryScheme> {
        self.schemes.iter().find(|s| s.name == name)
    }
}

pub fn tree_features(env: &Environment, with_density: bool) -> Result<FeatureTable> {
    let mut names = vec!["population".to_string(), "distance".to_string()];
    let mut columns = vec![env.population.clone(), env.distance.clone()];
    if with_density {
        names.push("density".into());
        columns.push(env.density.clone());
    }
    FeatureTable::new(names, columns)
}

fn score_set(
    name: &str,
    scores: Vec<EfficiencyScore>,
    env: &Environment,
    config: &PipelineConfig,
    warnings: &mut Vec<String>,
) -> Result<ScoreSet> {
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let summary = summarize_scores(&scores).stage(Stage::Report)?;

    let (transformed, clamped) = logit_transform_all(&values, config.epsilon).stage(Stage::Regression)?;
    if clamped > 0 {
        warnings.push(format!(
            "{}: {} score(s) clamped to [{e}, 2 - {e}] before the logit transform",
            name,
            clamped,
            e = config.epsilon
        ));
    }
    let design = build_design_matrix(&env.population, &env.distance).stage(Stage::Regression)?;
    let regression = if design.n_rows() > design.n_cols() {
        match ols_fit(&design, &transformed) {
            Ok(fit) => Some(fit),
            Err(Error::Singular(cols)) => {
                warnings.push(format!(
                    "{}: regression skipped, collinear columns: {}",
                    name,
                    cols.join(", ")
                ));
                None
            }
            Err(e) => return Err(e.at(Stage::Regression)),
        }
    } else {
        warnings.push(format!(
            "{}: {} units are too few for a {}-term regression; skipped",
            name,
            design.n_rows(),
            design.n_cols()
        ));
        None
    };

    let density = if values.len() >= 2 {
        Some(density_curve(&values, config.bandwidth).stage(Stage::Density)?)
    } else {
        warnings.push(format!("{}: a density needs at least two scores; skipped", name));
        None
    };

    Ok(ScoreSet {
        name: name.to_string(),
        scores,
        summary,
        regression,
        clamped,
        density,
    })
}

fn scheme(
    name: &str,
    assignment: CategoryAssignment,
    preliminary: &[EfficiencyScore],
    separated: &[EfficiencyScore],
) -> Result<CategoryScheme> {
    let mut rows = Vec::new();
    for (label, &units) in assignment.sizes() {
        let members = assignment.members(label);
        let prelim: Vec<f64> = members.iter().map(|&i| preliminary[i].score).collect();
        let sep: Vec<f64> = members.iter().map(|&i| separated[i].score).collect();
        rows.push(CategoryRow {
            label: label.clone(),
            units,
            mean_preliminary: summarize_values(&prelim)?.mean,
            separated: summarize_values(&sep)?,
        });
    }
    Ok(CategoryScheme {
        name: name.to_string(),
        assignment,
        rows,
    })
}

pub fn run_pipeline(records: &[LibraryRecord], config: &PipelineConfig) -> Result<PipelineReport> {
    let prepared = preprocess(records).stage(Stage::Preprocess)?;
    let panel = prepared.panel;
    let env = prepared.environment;
    let mut warnings: Vec<String> = prepared
        .drops
        .iter()
        .map(|d| format!("dropped {}: {}", d.id, d.reasons.join("; ")))
        .collect();

    let preliminary = score_all(&panel, config.rts, config.method).stage(Stage::Preliminary)?;
    let mut score_sets = vec![score_set("preliminary", preliminary.clone(), &env, config, &mut warnings)?];
    let mut schemes = Vec::new();
    let mut tree = None;

    if config.mode.uses_tree() {
        let features = tree_features(&env, config.tree_uses_density).stage(Stage::Tree)?;
        let target: Vec<f64> = preliminary.iter().map(|s| s.score).collect();
        let fitted = fit_regression_tree(&features, &target, config.tree).stage(Stage::Tree)?;
        if let Some(w) = &fitted.warning {
            warnings.push(format!("tree: {}", w));
        }
        let assignment = tree_assignment(&fitted, &features);
        let separated = separated_scores(&panel, &assignment, config.rts, config.method).stage(Stage::Tree)?;
        schemes.push(scheme("tree", assignment, &preliminary, &separated).stage(Stage::Tree)?);
        score_sets.push(score_set("tree", separated, &env, config, &mut warnings)?);
        tree = Some(fitted);
    }

    if config.mode.uses_expert() {
        let assignment = expert_assignment(&env.population, &env.distance).stage(Stage::Expert)?;
        let separated = separated_scores(&panel, &assignment, config.rts, config.method).stage(Stage::Expert)?;
        schemes.push(scheme("expert", assignment, &preliminary, &separated).stage(Stage::Expert)?);
        score_sets.push(score_set("expert", separated, &env, config, &mut warnings)?);
    }

    let k = score_sets.len();
    let vectors: Vec<Vec<f64>> = score_sets.iter().map(ScoreSet::values).collect();
    let mut correlations = vec![vec![1.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let c = match pearson_correlation(&vectors[a], &vectors[b]) {
                Ok(c) => c,
                Err(Error::Domain(msg)) => {
                    warnings.push(format!(
                        "correlation of {} and {} undefined: {}",
                        score_sets[a].name, score_sets[b].name, msg
                    ));
                    f64::NAN
                }
                Err(e) => return Err(e.at(Stage::Compare)),
            };
            correlations[a][b] = c;
            correlations[b][a] = c;
        }
    }

    Ok(PipelineReport {
        config: *config,
        ids: panel.ids().to_vec(),
        environment: env,
        score_sets,
        schemes,
        tree,
        correlations,
        drops: prepared.drops,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, x: f64, y: f64, p: f64, t: f64) -> LibraryRecord {
        LibraryRecord {
            id: id.into(),
            name: id.into(),
            expenditures_2016: Some(x),
            expenditures_2017: Some(0.0),
            employees_2017: Some(0.0),
            collection_2016: Some(0.0),
            collection_2017: Some(0.0),
            registrations_2017: Some(y),
            circulation_2017: Some(0.0),
            event_attendance_2017: Some(0.0),
            population: Some(p),
            density: Some(1.0),
            town_distance: Some(t),
        }
    }

    #[test]
    fn hand_panel_mode_none() {
        let recs = vec![record("A", 1.0, 2.0, 100.0, 5.0), record("B", 2.0, 1.0, 300.0, 20.0)];
        let report = run_pipeline(&recs, &PipelineConfig::default()).unwrap();
        let prelim = report.score_set("preliminary").unwrap();
        assert!((prelim.scores[0].score - 2.0).abs() < 1e-9);
        assert!((prelim.scores[1].score - 2.0 / 3.0).abs() < 1e-9);
        assert!(report.schemes.is_empty());
        assert_eq!(report.correlations, vec![vec![1.0]]);
        assert!(prelim.regression.is_none());
    }

    #[test]
    fn all_towns_form_one_expert_category() {
        let recs: Vec<LibraryRecord> = (0..8)
            .map(|i| {
                let f = i as f64;
                record(&format!("u{i}"), 1.0 + f, 2.0 + (f * 1.7) % 3.0, 50.0 + 100.0 * f, 0.0)
            })
            .collect();
        let config = PipelineConfig {
            mode: Mode::Expert,
            ..Default::default()
        };
        let report = run_pipeline(&recs, &config).unwrap();
        let scheme = report.scheme("expert").unwrap();
        assert_eq!(scheme.rows.len(), 1);
        assert_eq!(scheme.rows[0].label, "E11");
        assert_eq!(report.score_set("expert").unwrap().scores, report.score_set("preliminary").unwrap().scores);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("both".parse::<Mode>().unwrap(), Mode::Both);
        assert!("all".parse::<Mode>().is_err());
        assert_eq!(Mode::Expert.to_string(), "expert");
    }
}
