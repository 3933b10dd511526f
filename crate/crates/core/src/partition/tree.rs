//! Variance-reduction regression tree used to form operating-environment
//! categories.
//!
//! Growth is greedy: every node takes the (feature, threshold) pair with the
//! largest sum-of-squares reduction, subject to `min_bucket` units per child
//! and `max_depth`. The grown tree is then pruned back to `n_leaves` leaves by
//! repeatedly collapsing the split with the smallest improvement whose
//! children are both leaves. Leaves are labelled left to right.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Improvements within this fraction of the root sum of squares are ties.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Absolute tie band for a tree on `target` whose total sum of squares is
/// `ss`. The second term absorbs round-off on constant targets.
pub fn tie_tolerance(ss: f64, target: &[f64]) -> f64 {
    let magnitude: f64 = target.iter().map(|v| v * v).sum();
    TIE_TOLERANCE * ss + 1e-20 * magnitude
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() || names.len() != columns.len() {
            return Err(Error::Input(format!("{} names for {} feature columns", names.len(), columns.len())));
        }
        let n = columns[0].len();
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Input(format!("feature {} has {} rows, expected {}", name, col.len(), n)));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("feature {} has a non-finite value", name)));
            }
            if name.chars().any(char::is_whitespace) || name.is_empty() {
                return Err(Error::Input(format!("feature name {:?} must be a single word", name)));
            }
        }
        Ok(FeatureTable { names, columns })
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, f: usize) -> &[f64] {
        &self.columns[f]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub min_bucket: usize,
    pub max_depth: usize,
    pub n_leaves: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_bucket: 138,
            max_depth: 7,
            n_leaves: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Units with `value < threshold` go left, the rest go right.
        threshold: f64,
        n: usize,
        mean: f64,
        improvement: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        label: String,
        n: usize,
        mean: f64,
    },
}

impl TreeNode {
    pub fn n(&self) -> usize {
        match self {
            TreeNode::Split { n, .. } | TreeNode::Leaf { n, .. } => *n,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            TreeNode::Split { mean, .. } | TreeNode::Leaf { mean, .. } => *mean,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a TreeNode>) {
        match self {
            TreeNode::Leaf { .. } => out.push(self),
            TreeNode::Split { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub feature_names: Vec<String>,
    pub root: TreeNode,
    /// Set when the sample was too small to attempt any split.
    pub warning: Option<String>,
}

impl RegressionTree {
    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&TreeNode> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .filter_map(|l| match l {
                TreeNode::Leaf { label, .. } => Some(label.clone()),
                _ => None,
            })
            .collect()
    }

    /// Routes one unit's feature vector to its leaf label.
    pub fn assign(&self, features: &[f64]) -> &str {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { label, .. } => return label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if features[*feature] < *threshold { left } else { right };
                }
            }
        }
    }
}

pub fn assign_category<'a>(tree: &'a RegressionTree, features: &[f64]) -> &'a str {
    tree.assign(features)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub improvement: f64,
}

/// Best split of the units in `idx`, or `None` if no admissible split reduces
/// the sum of squares. `tie` is the absolute tolerance for treating two
/// improvements as equal; ties go to the lower feature index, then the lower
/// threshold.
pub fn best_split(
    features: &FeatureTable,
    target: &[f64],
    idx: &[usize],
    min_bucket: usize,
    tie: f64,
) -> Option<SplitCandidate> {
    let n = idx.len();
    let min_bucket = min_bucket.max(1);
    if n < 2 * min_bucket {
        return None;
    }
    let mean = idx.iter().map(|&i| target[i]).sum::<f64>() / n as f64;
    let ss: f64 = idx.iter().map(|&i| (target[i] - mean).powi(2)).sum();
    if ss <= 0.0 {
        return None;
    }

    let mut best: Option<SplitCandidate> = None;
    let mut order = idx.to_vec();
    for f in 0..features.n_features() {
        let col = features.column(f);
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
        // Centered targets: the right-hand sum is minus the left-hand sum.
        let mut left_sum = 0.0;
        for k in 1..n {
            left_sum += target[order[k - 1]] - mean;
            let lo = col[order[k - 1]];
            let hi = col[order[k]];
            if k < min_bucket || n - k < min_bucket || lo >= hi {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let improvement = left_sum * left_sum * (1.0 / nl + 1.0 / nr);
            let better = match best {
                None => true,
                Some(b) => improvement > b.improvement + tie,
            };
            if better {
                best = Some(SplitCandidate {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    improvement,
                });
            }
        }
    }
    best.filter(|b| b.improvement > tie)
}

/// Midpoint of two consecutive distinct values, kept strictly above `lo`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + 0.5 * (hi - lo);
    if mid > lo {
        mid
    } else {
        hi
    }
}

pub fn fit_regression_tree(features: &FeatureTable, target: &[f64], params: TreeParams) -> Result<RegressionTree> {
    let n = features.len();
    if target.len() != n {
        return Err(Error::Input(format!("{} targets for {} units", target.len(), n)));
    }
    if n == 0 {
        return Err(Error::Input("tree needs at least one unit".into()));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite tree target".into()));
    }
    if params.n_leaves == 0 {
        return Err(Error::Input("a tree needs at least one leaf".into()));
    }
    let idx: Vec<usize> = (0..n).collect();
    let mean = target.iter().sum::<f64>() / n as f64;
    let ss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    let tie = tie_tolerance(ss, target);

    let min_bucket = params.min_bucket.max(1);
    let warning = (n < 2 * min_bucket).then(|| {
        format!(
            "{} units cannot be split with a minimum of {} per category; using a single category",
            n, min_bucket
        )
    });

    let mut root = grow(features, target, &idx, 0, min_bucket, params.max_depth, tie);
    while count_leaves(&root) > params.n_leaves {
        let weakest = weakest_link(&root, Vec::new()).map(|(path, _)| path);
        match weakest {
            Some(path) => collapse(&mut root, &path),
            None => break,
        }
    }
    let mut counter = 0;
    relabel(&mut root, &mut counter);
    Ok(RegressionTree {
        feature_names: features.names().to_vec(),
        root,
        warning,
    })
}

fn grow(
    features: &FeatureTable,
    target: &[f64],
    idx: &[usize],
    depth: usize,
    min_bucket: usize,
    max_depth: usize,
    tie: f64,
) -> TreeNode {
    let n = idx.len();
    let mean = idx.iter().map(|&i| target[i]).sum::<f64>() / n as f64;
    let split = if depth < max_depth {
        best_split(features, target, idx, min_bucket, tie)
    } else {
        None
    };
    match split {
        None => TreeNode::Leaf {
            label: String::new(),
            n,
            mean,
        },
        Some(s) => {
            let col = features.column(s.feature);
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] < s.threshold);
            TreeNode::Split {
                feature: s.feature,
                threshold: s.threshold,
                n,
                mean,
                improvement: s.improvement,
                left: Box::new(grow(features, target, &l, depth + 1, min_bucket, max_depth, tie)),
                right: Box::new(grow(features, target, &r, depth + 1, min_bucket, max_depth, tie)),
            }
        }
    }
}

fn count_leaves(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 1,
        TreeNode::Split { left, right, .. } => count_leaves(left) + count_leaves(right),
    }
}

/// Path (false = left, true = right) to the collapsible split with the
/// smallest improvement; the first in preorder wins ties.
fn weakest_link(node: &TreeNode, path: Vec<bool>) -> Option<(Vec<bool>, f64)> {
    match node {
        TreeNode::Leaf { .. } => None,
        TreeNode::Split {
            left,
            right,
            improvement,
            ..
        } => {
            if left.is_leaf() && right.is_leaf() {
                return Some((path, *improvement));
            }
            let mut lp = path.clone();
            lp.push(false);
            let mut rp = path;
            rp.push(true);
            match (weakest_link(left, lp), weakest_link(right, rp)) {
                (Some(a), Some(b)) => Some(if b.1 < a.1 { b } else { a }),
                (a, b) => a.or(b),
            }
        }
    }
}

fn collapse(node: &mut TreeNode, path: &[bool]) {
    match (path.split_first(), node) {
        (None, node) => {
            *node = TreeNode::Leaf {
                label: String::new(),
                n: node.n(),
                mean: node.mean(),
            };
        }
        (Some((&go_right, rest)), TreeNode::Split { left, right, .. }) => {
            collapse(if go_right { right } else { left }, rest);
        }
        (Some(_), TreeNode::Leaf { .. }) => unreachable!("pruning path runs through a leaf"),
    }
}

fn relabel(node: &mut TreeNode, counter: &mut usize) {
    match node {
        TreeNode::Leaf { label, .. } => {
            *counter += 1;
            *label = format!("D{:02}", counter);
        }
        TreeNode::Split { left, right, .. } => {
            relabel(left, counter);
            relabel(right, counter);
        }
    }
}

// Text format, one node per line in preorder, two spaces of indent per level:
//
//   chebdea-tree 1
//   features population distance
//   warning <free text>                      (optional)
//   split population < 611.5 n=4660 mean=0.19 improvement=12.5
//     leaf D01 n=373 mean=0.11
//     ...
//
// Floats use Rust's shortest round-trip formatting, so parsing reproduces the
// tree bit for bit.
const TREE_MAGIC: &str = "chebdea-tree 1";

impl RegressionTree {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(TREE_MAGIC);
        out.push('\n');
        out.push_str("features");
        for name in &self.feature_names {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');
        if let Some(w) = &self.warning {
            let _ = writeln!(out, "warning {}", w.replace('\n', " "));
        }
        write_node(&self.root, &self.feature_names, 0, &mut out);
        out
    }

    pub fn from_text(text: &str) -> Result<RegressionTree> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
        if lines.next().map(str::trim) != Some(TREE_MAGIC) {
            return Err(Error::Input("not a chebdea tree file".into()));
        }
        let features = lines
            .next()
            .and_then(|l| l.strip_prefix("features"))
            .ok_or_else(|| Error::Input("tree file lacks a features line".into()))?;
        let feature_names: Vec<String> = features.split_whitespace().map(String::from).collect();
        let mut warning = None;
        if let Some(w) = lines.peek().and_then(|l| l.strip_prefix("warning ")) {
            warning = Some(w.to_string());
            lines.next();
        }
        let body: Vec<&str> = lines.collect();
        let mut pos = 0;
        let root = parse_node(&body, &mut pos, 0, &feature_names)?;
        if pos != body.len() {
            return Err(Error::Input(format!("unexpected tree line: {}", body[pos])));
        }
        Ok(RegressionTree {
            feature_names,
            root,
            warning,
        })
    }
}

fn write_node(node: &TreeNode, names: &[String], depth: usize, out: &mut String) {
    let indent = "  ".repeat(depth);
    match node {
        TreeNode::Leaf { label, n, mean } => {
            let _ = writeln!(out, "{}leaf {} n={} mean={}", indent, label, n, mean);
        }
        TreeNode::Split {
            feature,
            threshold,
            n,
            mean,
            improvement,
            left,
            right,
        } => {
            let _ = writeln!(
                out,
                "{}split {} < {} n={} mean={} improvement={}",
                indent, names[*feature], threshold, n, mean, improvement
            );
            write_node(left, names, depth + 1, out);
            write_node(right, names, depth + 1, out);
        }
    }
}

fn parse_node(lines: &[&str], pos: &mut usize, depth: usize, names: &[String]) -> Result<TreeNode> {
    let line = lines
        .get(*pos)
        .ok_or_else(|| Error::Input("truncated tree file".into()))?;
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent != 2 * depth {
        return Err(Error::Input(format!("bad indentation in tree line: {}", line)));
    }
    *pos += 1;
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let bad = || Error::Input(format!("malformed tree line: {}", line));
    let field = |tok: Option<&&str>, key: &str| -> Result<String> {
        tok.and_then(|t| t.strip_prefix(key))
            .and_then(|t| t.strip_prefix('='))
            .map(String::from)
            .ok_or_else(bad)
    };
    let num = |s: String| s.parse::<f64>().map_err(|_| bad());
    let count = |s: String| s.parse::<usize>().map_err(|_| bad());
    match tokens.first() {
        Some(&"leaf") => Ok(TreeNode::Leaf {
            label: tokens.get(1).ok_or_else(bad)?.to_string(),
            n: count(field(tokens.get(2), "n")?)?,
            mean: num(field(tokens.get(3), "mean")?)?,
        }),
        Some(&"split") => {
            let name = tokens.get(1).ok_or_else(bad)?;
            let feature = names.iter().position(|f| f == name).ok_or_else(bad)?;
            if tokens.get(2) != Some(&"<") {
                return Err(bad());
            }
            let threshold = tokens.get(3).ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
            let n = count(field(tokens.get(4), "n")?)?;
            let mean = num(field(tokens.get(5), "mean")?)?;
            let improvement = num(field(tokens.get(6), "improvement")?)?;
            let left = parse_node(lines, pos, depth + 1, names)?;
            let right = parse_node(lines, pos, depth + 1, names)?;
            Ok(TreeNode::Split {
                feature,
                threshold,
                n,
                mean,
                improvement,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        _ => Err(bad()),
    }
}
