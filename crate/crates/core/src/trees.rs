//! Tree ensembles over binary coalition features.
//!
//! Two forms are kept. [`NodeEnsemble`] is the node-based interchange form
//! (what gets loaded, trained and saved). [`TreeEnsemble`] is the flattened
//! leaf-path form used for prediction on coalitions and for extraction: each
//! leaf `j` carries the features that must be absent (`L_j`) and present
//! (`R_j`) for a coalition to reach it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};

/// Split threshold assumed for binary inputs: present (1) goes right, absent (0) goes left.
pub const BINARY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        left: usize,
        right: usize,
        /// Inputs `x[feature] > threshold` go right. Absent means a pure binary split.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
    },
    Leaf {
        leaf: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTree {
    pub nodes: Vec<Node>,
}

impl NodeTree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { leaf: value }],
        }
    }

    fn route(&self, mut goes_right: impl FnMut(usize, Option<f64>) -> bool) -> f64 {
        let mut at = 0;
        // validated trees are acyclic, so this terminates within nodes.len() steps
        loop {
            match self.nodes[at] {
                Node::Leaf { leaf } => return leaf,
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } => at = if goes_right(feature, threshold) { right } else { left },
            }
        }
    }

    /// Walks the nodes with the coalition's 0/1 membership as input.
    pub fn predict_coalition(&self, coalition: &Coalition) -> f64 {
        self.route(|f, thr| {
            let x = if coalition.contains(f) { 1.0 } else { 0.0 };
            x > thr.unwrap_or(BINARY_THRESHOLD)
        })
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        self.route(|f, thr| x[f] > thr.unwrap_or(BINARY_THRESHOLD))
    }

    fn validate(&self, n: usize, tree_idx: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Parse(format!("tree {tree_idx} has no nodes")));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature, left, right, ..
            } = *node
            {
                if feature >= n {
                    return Err(Error::Parse(format!(
                        "tree {tree_idx} node {i}: feature {feature} >= n = {n}"
                    )));
                }
                for child in [left, right] {
                    if child >= self.nodes.len() || child == 0 {
                        return Err(Error::Parse(format!(
                            "tree {tree_idx} node {i}: child index {child} invalid"
                        )));
                    }
                }
            }
        }
        // reject cycles and shared children: every node has at most one parent
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(at) = stack.pop() {
            if std::mem::replace(&mut seen[at], true) {
                return Err(Error::Parse(format!("tree {tree_idx}: node {at} reachable twice")));
            }
            if let Node::Split { left, right, .. } = self.nodes[at] {
                stack.push(left);
                stack.push(right);
            }
        }
        Ok(())
    }
}

/// Node-based ensemble, the on-disk interchange form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEnsemble {
    pub n: usize,
    pub base_score: f64,
    pub trees: Vec<NodeTree>,
}

impl NodeEnsemble {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let model: NodeEnsemble = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.n, i)?;
        }
        Ok(())
    }

    pub fn predict_coalition(&self, coalition: &Coalition) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_coalition(coalition)).sum::<f64>()
    }

    pub fn predict_features(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict_features(x)).sum::<f64>()
    }

    /// Flattens every tree to leaf-path form.
    pub fn flatten(&self) -> Result<(TreeEnsemble, FlattenReport)> {
        self.validate()?;
        let mut report = FlattenReport::default();
        let trees = self
            .trees
            .iter()
            .map(|t| flatten_tree(t, self.n, &mut report))
            .collect();
        if report.dropped_leaves > 0 {
            log::warn!(
                "dropped {} unreachable leaves with contradictory paths",
                report.dropped_leaves
            );
        }
        Ok((
            TreeEnsemble {
                n: self.n,
                base_score: self.base_score,
                trees,
            },
            report,
        ))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlattenReport {
    /// Leaves whose root path requires a feature to be both present and absent.
    pub dropped_leaves: usize,
}

/// Which children of a split are reachable by 0/1 inputs.
enum Branches {
    Both,
    LeftOnly,
    RightOnly,
}

fn binary_branches(threshold: Option<f64>) -> Branches {
    let thr = threshold.unwrap_or(BINARY_THRESHOLD);
    match (1.0 > thr, 0.0 > thr) {
        (true, false) => Branches::Both,
        (false, _) => Branches::LeftOnly,
        (true, true) => Branches::RightOnly,
    }
}

fn flatten_tree(tree: &NodeTree, n: usize, report: &mut FlattenReport) -> Tree {
    let mut leaves = Vec::new();
    let mut stack = vec![(0usize, Coalition::empty(n), Coalition::empty(n))];
    while let Some((at, left_set, right_set)) = stack.pop() {
        match tree.nodes[at] {
            Node::Leaf { leaf } => leaves.push(Leaf {
                left: left_set,
                right: right_set,
                value: leaf,
            }),
            Node::Split {
                feature,
                left,
                right,
                threshold,
            } => match binary_branches(threshold) {
                Branches::LeftOnly => stack.push((left, left_set, right_set)),
                Branches::RightOnly => stack.push((right, left_set, right_set)),
                Branches::Both => {
                    // right first so the left subtree is emitted first
                    if left_set.contains(feature) {
                        report.dropped_leaves += count_leaves(tree, right);
                    } else {
                        stack.push((right, left_set.clone(), right_set.with(feature)));
                    }
                    if right_set.contains(feature) {
                        report.dropped_leaves += count_leaves(tree, left);
                    } else {
                        stack.push((left, left_set.with(feature), right_set));
                    }
                }
            },
        }
    }
    Tree { leaves }
}

fn count_leaves(tree: &NodeTree, from: usize) -> usize {
    let mut count = 0;
    let mut stack = vec![from];
    while let Some(at) = stack.pop() {
        match tree.nodes[at] {
            Node::Leaf { .. } => count += 1,
            Node::Split { left, right, .. } => {
                stack.push(left);
                stack.push(right);
            }
        }
    }
    count
}

/// A leaf reached by coalitions `T` with `R ⊆ T ⊆ N ∖ L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub left: Coalition,
    pub right: Coalition,
    pub value: f64,
}

impl Leaf {
    pub fn new(left: Coalition, right: Coalition, value: f64) -> Result<Self> {
        if left.width() != right.width() {
            return Err(Error::WidthMismatch {
                expected: left.width(),
                got: right.width(),
            });
        }
        if !left.is_disjoint(&right) {
            return Err(Error::Precondition(format!(
                "leaf sets overlap: L={left:?}, R={right:?}"
            )));
        }
        Ok(Self { left, right, value })
    }

    #[inline]
    pub fn reaches(&self, coalition: &Coalition) -> bool {
        self.right.is_subset(coalition) && coalition.is_disjoint(&self.left)
    }

    /// Path length `|L| + |R|`.
    pub fn depth(&self) -> usize {
        self.left.len() + self.right.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub leaves: Vec<Leaf>,
}

impl Tree {
    pub fn new(leaves: Vec<Leaf>) -> Self {
        Self { leaves }
    }

    pub fn predict(&self, coalition: &Coalition) -> f64 {
        self.leaves
            .iter()
            .find(|l| l.reaches(coalition))
            .map_or(0.0, |l| l.value)
    }

    /// Number of leaves reached by `coalition`; 1 for a proper partition.
    pub fn reached_count(&self, coalition: &Coalition) -> usize {
        self.leaves.iter().filter(|l| l.reaches(coalition)).count()
    }
}

/// Flattened ensemble: `ν̂(T) = base_score + Σ_j c_j·1[R_j ⊆ T ⊆ N∖L_j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    pub n: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn new(n: usize, base_score: f64, trees: Vec<Tree>) -> Self {
        Self { n, base_score, trees }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, FlattenReport)> {
        NodeEnsemble::from_json_path(path)?.flatten()
    }

    pub fn predict(&self, coalition: &Coalition) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(coalition)).sum::<f64>()
    }

    pub fn leaf_count(&self) -> usize {
        self.trees.iter().map(|t| t.leaves.len()).sum()
    }

    pub fn max_depth(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| t.leaves.iter())
            .map(Leaf::depth)
            .max()
            .unwrap_or(0)
    }
}

/// Exact tree representations of games.
impl NodeTree {
    /// Full-depth tree splitting on players `0..n` in order; the leaf for
    /// coalition mask `T` holds `value(T)`.
    pub fn lookup(n: usize, value: impl Fn(u64) -> f64) -> Self {
        assert!(n < 64, "lookup trees index coalitions by u64 masks");
        let mut nodes = Vec::with_capacity((2usize << n) - 1);
        fn grow(nodes: &mut Vec<Node>, n: usize, depth: usize, mask: u64, value: &dyn Fn(u64) -> f64) -> usize {
            let at = nodes.len();
            if depth == n {
                nodes.push(Node::Leaf { leaf: value(mask) });
                return at;
            }
            nodes.push(Node::Leaf { leaf: 0.0 });
            let left = grow(nodes, n, depth + 1, mask, value);
            let right = grow(nodes, n, depth + 1, mask | 1 << depth, value);
            nodes[at] = Node::Split {
                feature: depth,
                left,
                right,
                threshold: None,
            };
            at
        }
        grow(&mut nodes, n, 0, 0, &value);
        Self { nodes }
    }

    /// `value·1[carrier ⊆ T]` as a chain of splits on the carrier's players.
    pub fn unanimity_chain(carrier: &Coalition, value: f64) -> Self {
        let mut nodes = Vec::new();
        for p in carrier.players() {
            let at = nodes.len();
            nodes.push(Node::Split {
                feature: p,
                left: at + 1,
                right: at + 2,
                threshold: None,
            });
            nodes.push(Node::Leaf { leaf: 0.0 });
        }
        nodes.push(Node::Leaf { leaf: value });
        Self { nodes }
    }
}

impl NodeEnsemble {
    /// One chain per nonzero Möbius coefficient; the empty-set term becomes the base score.
    pub fn from_moebius(game: &crate::game::MoebiusGame) -> Self {
        use crate::game::Game;
        let n = game.n_players();
        let mut base_score = 0.0;
        let mut trees = Vec::new();
        for (carrier, &m) in game.coefficients() {
            if carrier.is_empty() {
                base_score += m;
            } else if m != 0.0 {
                trees.push(NodeTree::unanimity_chain(carrier, m));
            }
        }
        Self { n, base_score, trees }
    }
}
