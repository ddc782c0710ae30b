//! Projection pursuit classification trees.
//!
//! Each internal node splits the classes that reach it into two groups
//! along an optimized 1-D projection of a random subset of variables. The
//! node's cases are partitioned by class membership, so a tree fit to `G`
//! classes has exactly `G - 1` internal nodes and one leaf per class.
//!
//! Node ids are assigned in breadth-first fit order starting at 1; leaf ids
//! follow the last node id. The group whose projected mean is smaller is
//! always the left group, and a case goes left iff its projected value is
//! strictly below the split value.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ppindex::{
    multiclass_lda_direction, optimize_scatter, project_rows, IndexValue, Projection,
    TwoGroupScatter,
};
use crate::rng::stream_rng;

/// Nodes with at most this many classes try every two-group partition.
pub const EXHAUSTIVE_PARTITION_MAX_CLASSES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PPNode {
    pub id: usize,
    #[serde(flatten)]
    pub projection: Projection,
    pub split_value: f64,
    pub index_value: IndexValue,
    /// Child id (node or leaf) for cases projecting below `split_value`.
    pub left: usize,
    pub right: usize,
    pub left_classes: Vec<usize>,
    pub right_classes: Vec<usize>,
    /// Projected mean of the left group's in-bag cases.
    pub left_mean: f64,
    pub right_mean: f64,
}

impl PPNode {
    /// Number of classes present at this node.
    pub fn class_count(&self) -> usize {
        self.left_classes.len() + self.right_classes.len()
    }

    /// Classes at the node in ascending order.
    pub fn classes(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.left_classes.iter().chain(&self.right_classes).copied().collect();
        c.sort_unstable();
        c
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        self.projection.project(x) < self.split_value
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub id: usize,
    pub class: usize,
    /// Set when the leaf replaced a node whose data could not be split.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PPTreeModel {
    pub tree_id: usize,
    pub n_vars: usize,
    pub nodes: Vec<PPNode>,
    pub leaves: Vec<Leaf>,
}

/// A reference to either kind of tree element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeElement<'a> {
    Node(&'a PPNode),
    Leaf(&'a Leaf),
}

impl PPTreeModel {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_id(&self) -> usize {
        1
    }

    pub fn node(&self, id: usize) -> Result<&PPNode> {
        id.checked_sub(1)
            .and_then(|i| self.nodes.get(i))
            .ok_or(Error::UnknownNode(id))
    }

    pub fn element(&self, id: usize) -> Result<TreeElement<'_>> {
        let nn = self.nodes.len();
        if id >= 1 && id <= nn {
            Ok(TreeElement::Node(&self.nodes[id - 1]))
        } else {
            id.checked_sub(nn + 1)
                .and_then(|i| self.leaves.get(i))
                .map(TreeElement::Leaf)
                .ok_or(Error::UnknownNode(id))
        }
    }

    /// Classes present at each internal node (`cl_nd`), in node order.
    pub fn class_count_per_node(&self) -> Vec<usize> {
        self.nodes.iter().map(PPNode::class_count).collect()
    }

    /// Leaf reached by case `x` (full-length, in the training scale).
    pub fn leaf_for(&self, x: &[f64]) -> &Leaf {
        let nn = self.nodes.len();
        let mut id = self.root_id();
        while id <= nn {
            let node = &self.nodes[id - 1];
            id = if node.goes_left(x) { node.left } else { node.right };
        }
        &self.leaves[id - nn - 1]
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.leaf_for(x).class
    }

    /// Projected values of `case_ids` at node `node_id`.
    pub fn project_node(&self, node_id: usize, d: &Dataset, case_ids: &[usize]) -> Result<NodeProjection> {
        let node = self.node(node_id)?;
        self.check_width(d)?;
        Ok(NodeProjection {
            node_id,
            case_ids: case_ids.to_vec(),
            values: case_ids.iter().map(|&i| node.projection.project(d.row(i))).collect(),
            split_value: node.split_value,
            left_mean: node.left_mean,
            right_mean: node.right_mean,
        })
    }

    /// Left/right counts per true class for the cases of `case_ids` whose
    /// class is present at node `node_id`.
    pub fn node_confusion(&self, node_id: usize, d: &Dataset, case_ids: &[usize]) -> Result<NodeConfusion> {
        let node = self.node(node_id)?;
        self.check_width(d)?;
        let classes = node.classes();
        let mut left = vec![0; classes.len()];
        let mut right = vec![0; classes.len()];
        for &i in case_ids {
            if let Ok(col) = classes.binary_search(&d.labels()[i]) {
                if node.goes_left(d.row(i)) {
                    left[col] += 1;
                } else {
                    right[col] += 1;
                }
            }
        }
        Ok(NodeConfusion {
            node_id,
            classes,
            left_classes: node.left_classes.clone(),
            left,
            right,
        })
    }

    /// Coefficient importance: `Σ_nd |α_nd| / cl_nd`, indexed by variable.
    pub fn coef_importance(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_vars];
        for node in &self.nodes {
            let cl = node.class_count() as f64;
            for (&j, c) in node.projection.var_ids.iter().zip(&node.projection.coeffs) {
                imp[j] += c.abs() / cl;
            }
        }
        imp
    }

    fn check_width(&self, d: &Dataset) -> Result<()> {
        if d.p() != self.n_vars {
            return Err(Error::DimensionMismatch { expected: self.n_vars, found: d.p() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProjection {
    pub node_id: usize,
    pub case_ids: Vec<usize>,
    pub values: Vec<f64>,
    pub split_value: f64,
    pub left_mean: f64,
    pub right_mean: f64,
}

/// 2 × (classes at node) table of where each true class lands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeConfusion {
    pub node_id: usize,
    /// Column labels, ascending class ids.
    pub classes: Vec<usize>,
    /// Classes the node assigns to the left side.
    pub left_classes: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl NodeConfusion {
    /// Cases landing on the side not assigned to their class.
    pub fn misrouted(&self) -> usize {
        self.classes
            .iter()
            .enumerate()
            .map(|(c, cls)| {
                if self.left_classes.contains(cls) {
                    self.right[c]
                } else {
                    self.left[c]
                }
            })
            .sum()
    }

    pub fn total(&self) -> usize {
        self.left.iter().chain(&self.right).sum()
    }
}

enum Slot {
    Node(usize),
    Leaf(usize),
}

struct Pending {
    classes: Vec<usize>,
    cases: Vec<usize>,
    parent: Option<(usize, bool)>,
}

struct NodeDraft {
    projection: Projection,
    split_value: f64,
    index_value: IndexValue,
    left_classes: Vec<usize>,
    right_classes: Vec<usize>,
    left_mean: f64,
    right_mean: f64,
    children: [Option<Slot>; 2],
}

/// Fits a tree to the cases `case_ids` (repeats allowed) of `d`.
///
/// `vars_per_node` variables are sampled without replacement at every node.
pub fn fit_pptree<R: Rng + ?Sized>(
    d: &Dataset,
    case_ids: &[usize],
    vars_per_node: usize,
    tree_id: usize,
    rng: &mut R,
) -> Result<PPTreeModel> {
    let p = d.p();
    if vars_per_node == 0 || vars_per_node > p {
        return Err(Error::InvalidConfig(alloc::format!(
            "vars_per_node must be in 1..={p}, got {vars_per_node}"
        )));
    }
    if case_ids.is_empty() {
        return Err(Error::InvalidData("cannot fit a tree to zero cases".into()));
    }
    let mut present = vec![false; d.n_classes()];
    for &i in case_ids {
        present[d.labels()[i]] = true;
    }
    let root_classes: Vec<usize> = (0..d.n_classes()).filter(|&c| present[c]).collect();

    let mut drafts: Vec<NodeDraft> = Vec::new();
    let mut leaves: Vec<Leaf> = Vec::new();
    let mut queue = VecDeque::new();
    queue.push_back(Pending { classes: root_classes, cases: case_ids.to_vec(), parent: None });

    while let Some(item) = queue.pop_front() {
        let slot = if item.classes.len() == 1 {
            leaves.push(Leaf { id: 0, class: item.classes[0], degenerate: false });
            Slot::Leaf(leaves.len() - 1)
        } else {
            match split_node(d, &item.classes, &item.cases, vars_per_node, rng) {
                Some(draft) => {
                    let idx = drafts.len();
                    for (side, classes) in [(false, &draft.left_classes), (true, &draft.right_classes)] {
                        let cases = item
                            .cases
                            .iter()
                            .copied()
                            .filter(|&i| classes.binary_search(&d.labels()[i]).is_ok())
                            .collect();
                        queue.push_back(Pending { classes: classes.clone(), cases, parent: Some((idx, side)) });
                    }
                    drafts.push(draft);
                    Slot::Node(idx)
                }
                None => {
                    let class = majority_class(d, &item.cases);
                    leaves.push(Leaf { id: 0, class, degenerate: true });
                    Slot::Leaf(leaves.len() - 1)
                }
            }
        };
        if let Some((parent, right)) = item.parent {
            drafts[parent].children[usize::from(right)] = Some(slot);
        }
    }

    let nn = drafts.len();
    let id_of = |slot: &Option<Slot>| match slot {
        Some(Slot::Node(i)) => i + 1,
        Some(Slot::Leaf(i)) => nn + 1 + i,
        None => unreachable!("every queued child is resolved"),
    };
    for (i, leaf) in leaves.iter_mut().enumerate() {
        leaf.id = nn + 1 + i;
    }
    let nodes = drafts
        .into_iter()
        .enumerate()
        .map(|(i, dr)| PPNode {
            id: i + 1,
            left: id_of(&dr.children[0]),
            right: id_of(&dr.children[1]),
            projection: dr.projection,
            split_value: dr.split_value,
            index_value: dr.index_value,
            left_classes: dr.left_classes,
            right_classes: dr.right_classes,
            left_mean: dr.left_mean,
            right_mean: dr.right_mean,
        })
        .collect();
    Ok(PPTreeModel { tree_id, n_vars: p, nodes, leaves })
}

/// [`fit_pptree`] with a fresh generator seeded from `seed`.
pub fn fit_pptree_seeded(d: &Dataset, case_ids: &[usize], vars_per_node: usize, seed: u64) -> Result<PPTreeModel> {
    fit_pptree(d, case_ids, vars_per_node, 0, &mut stream_rng(seed, 0))
}

fn majority_class(d: &Dataset, cases: &[usize]) -> usize {
    let mut counts = vec![0usize; d.n_classes()];
    for &i in cases {
        counts[d.labels()[i]] += 1;
    }
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

/// Chooses the class bipartition and projection for one node; `None` if the
/// node's data cannot be split.
fn split_node<R: Rng + ?Sized>(
    d: &Dataset,
    classes: &[usize],
    cases: &[usize],
    vars_per_node: usize,
    rng: &mut R,
) -> Option<NodeDraft> {
    let mut vars = index::sample(rng, d.p(), vars_per_node).into_vec();
    vars.sort_unstable();
    let x = d.features().select(cases, &vars);
    let local: Vec<usize> = cases
        .iter()
        .map(|&i| classes.binary_search(&d.labels()[i]).expect("case class is at node"))
        .collect();
    let g = classes.len();

    let candidates: Vec<u64> = if g <= EXHAUSTIVE_PARTITION_MAX_CLASSES {
        // subsets containing the first class, excluding the full set
        (1u64..(1 << g) - 1).filter(|m| m & 1 == 1).collect()
    } else {
        vec![largest_gap_partition(&x, &local, g)?]
    };

    let mut best: Option<(Projection, IndexValue, Vec<usize>)> = None;
    for mask in candidates {
        let groups: Vec<usize> = local.iter().map(|&c| usize::from(mask >> c & 1 == 0)).collect();
        let Ok(scatter) = TwoGroupScatter::new(&x, &groups) else { continue };
        let Ok((proj, value)) = optimize_scatter(&scatter) else { continue };
        if best.as_ref().is_none_or(|(_, v, _)| value > *v) {
            best = Some((proj, value, groups));
        }
    }
    let (proj, index_value, groups) = best?;

    let z = project_rows(&x, &proj.coeffs);
    let (lo, hi) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !(hi > lo) {
        return None;
    }
    let mut sums = [0.0; 2];
    let mut counts = [0usize; 2];
    for (v, &grp) in z.iter().zip(&groups) {
        sums[grp] += v;
        counts[grp] += 1;
    }
    let means = [sums[0] / counts[0] as f64, sums[1] / counts[1] as f64];
    let group_classes = |grp: usize| -> Vec<usize> {
        (0..g)
            .filter(|&c| local.iter().zip(&groups).any(|(&lc, &gg)| lc == c && gg == grp))
            .map(|c| classes[c])
            .collect()
    };
    let (left, right) = if means[0] <= means[1] { (0, 1) } else { (1, 0) };
    let (left_mean, right_mean) = (means[left], means[right]);
    Some(NodeDraft {
        projection: Projection { var_ids: vars, coeffs: proj.coeffs },
        split_value: left_mean / 2.0 + right_mean / 2.0,
        index_value,
        left_classes: group_classes(left),
        right_classes: group_classes(right),
        left_mean,
        right_mean,
        children: [None, None],
    })
}

/// Bitmask of the classes below the widest gap between projected class
/// means along the leading multiclass discriminant.
fn largest_gap_partition(x: &crate::matrix::Matrix, local: &[usize], g: usize) -> Option<u64> {
    let a = multiclass_lda_direction(x, local, g).ok()?;
    let z = project_rows(x, &a);
    let mut sums = vec![0.0; g];
    let mut counts = vec![0usize; g];
    for (v, &c) in z.iter().zip(local) {
        sums[c] += v;
        counts[c] += 1;
    }
    let mut order: Vec<(f64, usize)> = (0..g).map(|c| (sums[c] / counts[c] as f64, c)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let cut = (1..g)
        .max_by(|&i, &j| {
            let gi = order[i].0 - order[i - 1].0;
            let gj = order[j].0 - order[j - 1].0;
            // earliest cut wins ties
            gi.total_cmp(&gj).then(j.cmp(&i))
        })?;
    let mut mask = 0u64;
    for &(_, c) in &order[..cut] {
        mask |= 1 << c;
    }
    Some(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use alloc::format;
    use alloc::string::String;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    /// Four well separated 2-D clusters on a square.
    fn four_clusters() -> Dataset {
        let centers = [[0.0, 0.0], [0.0, 10.0], [10.0, 0.0], [10.0, 10.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, ctr) in centers.iter().enumerate() {
            for i in 0..10 {
                let dx = (i % 3) as f64 * 0.3;
                let dy = (i % 4) as f64 * 0.2;
                rows.push([ctr[0] + dx, ctr[1] + dy]);
                labels.push(c);
            }
        }
        let names_c = (0..4).map(|c| format!("c{c}")).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, names_c, names(2)).unwrap()
    }

    fn all(d: &Dataset) -> Vec<usize> {
        (0..d.n()).collect()
    }

    #[test]
    fn four_classes_give_three_nodes_and_no_training_error() {
        let d = four_clusters();
        for seed in 0..10 {
            let t = fit_pptree_seeded(&d, &all(&d), 2, seed).unwrap();
            assert_eq!(t.n_nodes(), 3);
            assert_eq!(t.leaves.len(), 4);
            let mut leaf_classes: Vec<usize> = t.leaves.iter().map(|l| l.class).collect();
            leaf_classes.sort_unstable();
            assert_eq!(leaf_classes, vec![0, 1, 2, 3]);
            for i in 0..d.n() {
                assert_eq!(t.predict(d.row(i)), d.labels()[i]);
            }
        }
    }

    #[test]
    fn two_classes_give_one_node() {
        let x = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.5], [5.0, 2.0], [6.0, 1.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "a", "b", "b"], names(2)).unwrap();
        let t = fit_pptree_seeded(&d, &all(&d), 1, 3).unwrap();
        assert_eq!(t.n_nodes(), 1);
        assert_eq!(t.leaves.len(), 2);
    }

    #[test]
    fn split_value_is_midpoint_of_means() {
        let x = Matrix::from_rows(&[[0.0], [0.0], [10.0], [10.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "a", "b", "b"], names(1)).unwrap();
        let t = fit_pptree_seeded(&d, &all(&d), 1, 0).unwrap();
        assert_eq!(t.nodes[0].split_value, 5.0);
        assert_eq!(t.nodes[0].left_classes, vec![0]);
    }

    #[test]
    fn tie_at_split_routes_to_right_mean_side() {
        let x = Matrix::from_rows(&[[0.0], [0.0], [10.0], [10.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "a", "b", "b"], names(1)).unwrap();
        let t = fit_pptree_seeded(&d, &all(&d), 1, 0).unwrap();
        assert_eq!(t.predict(&[5.0]), 1);
        assert_eq!(t.predict(&[4.999]), 0);
    }

    #[test]
    fn confusion_columns_sum_to_class_counts() {
        let d = four_clusters();
        let t = fit_pptree_seeded(&d, &all(&d), 2, 1).unwrap();
        for node in &t.nodes {
            let conf = t.node_confusion(node.id, &d, &all(&d)).unwrap();
            for (c, cls) in conf.classes.iter().enumerate() {
                let expected = d.labels().iter().filter(|&&y| y == *cls).count();
                assert_eq!(conf.left[c] + conf.right[c], expected);
            }
            assert_eq!(conf.misrouted(), 0);
        }
        assert_eq!(t.node_confusion(99, &d, &all(&d)).unwrap_err(), Error::UnknownNode(99));
    }

    #[test]
    fn projections_straddle_split() {
        let d = four_clusters();
        let t = fit_pptree_seeded(&d, &all(&d), 2, 4).unwrap();
        for node in &t.nodes {
            let proj = t.project_node(node.id, &d, &all(&d)).unwrap();
            assert!(node.left_mean < node.split_value && node.split_value < node.right_mean);
            let at_node: Vec<f64> = proj
                .values
                .iter()
                .zip(&proj.case_ids)
                .filter(|(_, &i)| node.classes().contains(&d.labels()[i]))
                .map(|(v, _)| *v)
                .collect();
            assert!(at_node.iter().any(|&v| v < node.split_value));
            assert!(at_node.iter().any(|&v| v >= node.split_value));
        }
    }

    #[test]
    fn coef_importance_formula() {
        let t = PPTreeModel {
            tree_id: 0,
            n_vars: 5,
            nodes: vec![PPNode {
                id: 1,
                projection: Projection { var_ids: vec![1, 3], coeffs: vec![0.6, 0.8] },
                split_value: 0.0,
                index_value: IndexValue::new(1.0),
                left: 2,
                right: 3,
                left_classes: vec![0],
                right_classes: vec![1],
                left_mean: -1.0,
                right_mean: 1.0,
            }],
            leaves: vec![Leaf { id: 2, class: 0, degenerate: false }, Leaf { id: 3, class: 1, degenerate: false }],
        };
        let imp = t.coef_importance();
        let expected = [0.0, 0.3, 0.0, 0.4, 0.0];
        for (a, b) in imp.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_cases_become_a_degenerate_leaf() {
        let x = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let d = Dataset::from_labels(x, &["a", "b", "b"], names(1)).unwrap();
        let t = fit_pptree_seeded(&d, &all(&d), 1, 0).unwrap();
        assert_eq!(t.n_nodes(), 0);
        assert_eq!(t.leaves, vec![Leaf { id: 1, class: 1, degenerate: true }]);
        assert_eq!(t.predict(&[1.0]), 1);
    }

    #[test]
    fn refit_is_reproducible() {
        let d = four_clusters();
        let a = serde_json::to_string(&fit_pptree_seeded(&d, &all(&d), 1, 11).unwrap()).unwrap();
        let b = serde_json::to_string(&fit_pptree_seeded(&d, &all(&d), 1, 11).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn many_classes_use_the_gap_partition() {
        // ten classes along a line, with a wide gap after the fifth
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..10 {
            for i in 0..4 {
                let shift = if c >= 5 { 20.0 } else { 0.0 };
                rows.push([c as f64 * 3.0 + shift + i as f64 * 0.1, (i % 2) as f64]);
                labels.push(c);
            }
        }
        let names_c = (0..10).map(|c| format!("c{c}")).collect();
        let d = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, names_c, names(2)).unwrap();
        let t = fit_pptree_seeded(&d, &all(&d), 2, 0).unwrap();
        assert_eq!(t.n_nodes(), 9);
        let mut leaf_classes: Vec<usize> = t.leaves.iter().map(|l| l.class).collect();
        leaf_classes.sort_unstable();
        assert_eq!(leaf_classes, (0..10).collect::<Vec<_>>());
        assert_eq!(t.nodes[0].left_classes, vec![0, 1, 2, 3, 4]);
    }
}
