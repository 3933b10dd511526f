//! Category assignment and the separation method: each unit is scored only
//! against the members of its own category.

pub mod expert;
pub mod tree;

use std::collections::BTreeMap;

pub use expert::{assign_expert_category, CategoryRule, DistanceBand, EXPERT_RULES};
pub use tree::{
    assign_category, best_split, fit_regression_tree, FeatureTable, RegressionTree, SplitCandidate, TreeNode,
    TreeParams,
};

use crate::dea::{score_all, EfficiencyScore, Method, Panel, ReturnsToScale};
use crate::error::{Error, Result};

/// Category label per unit, in panel order.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryAssignment {
    labels: Vec<String>,
    sizes: BTreeMap<String, usize>,
}

impl CategoryAssignment {
    pub fn new(labels: Vec<String>) -> Self {
        let mut sizes = BTreeMap::new();
        for l in &labels {
            *sizes.entry(l.clone()).or_insert(0) += 1;
        }
        CategoryAssignment { labels, sizes }
    }

    /// Every unit in one category.
    pub fn single(n: usize, label: &str) -> Self {
        CategoryAssignment::new(vec![label.to_string(); n])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Category sizes keyed by label, in label order.
    pub fn sizes(&self) -> &BTreeMap<String, usize> {
        &self.sizes
    }

    pub fn members(&self, label: &str) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }
}

pub fn tree_assignment(tree: &RegressionTree, features: &FeatureTable) -> CategoryAssignment {
    CategoryAssignment::new(
        (0..features.len())
            .map(|i| tree.assign(&features.row(i)).to_string())
            .collect(),
    )
}

pub fn expert_assignment(population: &[f64], distance: &[f64]) -> Result<CategoryAssignment> {
    if population.len() != distance.len() {
        return Err(Error::Input(format!(
            "{} populations for {} distances",
            population.len(),
            distance.len()
        )));
    }
    for (&p, &t) in population.iter().zip(distance) {
        if !(p > 0.0) || !(t >= 0.0) || !p.is_finite() || !t.is_finite() {
            return Err(Error::Domain(format!(
                "expert categories need population > 0 and distance >= 0, got ({}, {})",
                p, t
            )));
        }
    }
    Ok(CategoryAssignment::new(
        population
            .iter()
            .zip(distance)
            .map(|(&p, &t)| assign_expert_category(p, t).to_string())
            .collect(),
    ))
}

/// Scores each unit against its own category only; output in panel order.
pub fn separated_scores(
    panel: &Panel,
    assignment: &CategoryAssignment,
    rts: ReturnsToScale,
    method: Method,
) -> Result<Vec<EfficiencyScore>> {
    if assignment.len() != panel.len() {
        return Err(Error::Input(format!(
            "assignment covers {} units, panel has {}",
            assignment.len(),
            panel.len()
        )));
    }
    let mut out: Vec<Option<EfficiencyScore>> = vec![None; panel.len()];
    for label in assignment.sizes().keys() {
        let members = assignment.members(label);
        let sub = panel.subset(&members)?;
        let scores = score_all(&sub, rts, method)?;
        for (k, s) in members.into_iter().zip(scores) {
            out[k] = Some(s);
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every unit has a category")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel() -> Panel {
        Panel::from_rows(
            vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 3.0], vec![1.5, 1.0], vec![2.5, 2.0]],
            vec![vec![1.0], vec![1.2], vec![2.0], vec![0.7], vec![1.9]],
        )
        .unwrap()
    }

    #[test]
    fn single_category_matches_full_sample() {
        let p = panel();
        let full = score_all(&p, ReturnsToScale::Vrs, Method::Linear).unwrap();
        let sep = separated_scores(&p, &CategoryAssignment::single(p.len(), "all"), ReturnsToScale::Vrs, Method::Linear)
            .unwrap();
        assert_eq!(full, sep);
    }

    #[test]
    fn singleton_category_scores_two() {
        let p = panel();
        let a = CategoryAssignment::new(vec!["a".into(), "a".into(), "b".into(), "a".into(), "a".into()]);
        let sep = separated_scores(&p, &a, ReturnsToScale::Vrs, Method::Linear).unwrap();
        assert_eq!(sep[2].score, 2.0);
        assert_eq!(a.sizes().get("a"), Some(&4));
        let full = score_all(&p, ReturnsToScale::Vrs, Method::Linear).unwrap();
        for (s, f) in sep.iter().zip(&full) {
            assert!(s.score >= f.score - 1e-9);
        }
    }

    #[test]
    fn assignment_size_mismatch() {
        let p = panel();
        assert!(separated_scores(&p, &CategoryAssignment::single(2, "x"), ReturnsToScale::Vrs, Method::Linear).is_err());
    }

    #[test]
    fn expert_assignment_validates() {
        assert!(expert_assignment(&[0.0], &[1.0]).is_err());
        assert!(expert_assignment(&[10.0], &[-1.0]).is_err());
        let a = expert_assignment(&[150.0, 2500.0, 40.0], &[10.0, 20.0, 0.0]).unwrap();
        assert_eq!(a.labels(), &["E01", "E10", "E11"]);
    }
}
