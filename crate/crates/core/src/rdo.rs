//! Lagrangian split selection over the octree.
//!
//! Every node that can be coded as a leaf is coded once to learn its exact
//! payload size and distortion; a bottom-up dynamic program then picks the
//! cheapest pruning for `C = D + λ_n·R` with a per-level `λ_n`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gic::GicModel;
use crate::leaf::{encode_leaf, EncodedLeaf};
use crate::octree::{LocalPoint, Octree, OctreeNode};
use crate::pointcloud::{d1_distortion, PointCloud};

/// Bits of the 8-bit child occupancy mask sent after a split flag.
pub const CHILD_MASK_BITS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    CodeHere,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCost {
    pub rate_bits: u64,
    pub distortion: f64,
    pub cost: f64,
    pub decision: Decision,
}

impl NodeCost {
    pub fn new(rate_bits: u64, distortion: f64, lambda: f64, decision: Decision) -> Self {
        Self {
            rate_bits,
            distortion,
            cost: distortion + lambda * rate_bits as f64,
            decision,
        }
    }
}

/// A node coded as a leaf, with its local distortion: the node's D1 error
/// times its input point count, so that sums over leaves track the squared
/// error of the whole cloud.
#[derive(Debug, Clone)]
pub struct LeafEval {
    pub leaf: EncodedLeaf,
    pub distortion: f64,
}

fn to_cloud(points: &[LocalPoint]) -> PointCloud {
    PointCloud::new(points.iter().map(|p| p.map(u32::from)).collect())
}

/// Codes `node` as a leaf. `None` when the node cannot be a leaf: its points
/// do not fit the near/far surfaces, or no coder exists for its side. At the
/// deepest level the node is always coded, losing interior points.
pub fn evaluate_node(node: &OctreeNode, model: &GicModel, thickness: u8, deepest: bool) -> Result<Option<LeafEval>> {
    let leaf = match encode_leaf(&node.points, node.side, model, thickness) {
        Ok(l) => l,
        Err(Error::MissingModelEntry { .. }) if !deepest => return Ok(None),
        Err(e) => return Err(e),
    };
    if !leaf.projectable && !deepest {
        return Ok(None);
    }
    let d1 = d1_distortion(&to_cloud(&node.points), &to_cloud(&leaf.reconstruction))?;
    let distortion = d1 * node.points.len() as f64;
    Ok(Some(LeafEval { leaf, distortion }))
}

pub fn leaf_cost(eval: &LeafEval, lambda_n: f64) -> NodeCost {
    NodeCost::new(eval.leaf.bits, eval.distortion, lambda_n, Decision::CodeHere)
}

/// Leaf evaluation of every node, indexed like `tree.nodes`. Independent of λ.
pub fn evaluate_leaves(tree: &Octree, model: &GicModel, thickness: u8) -> Result<Vec<Option<LeafEval>>> {
    tree.nodes
        .par_iter()
        .map(|n| evaluate_node(n, model, thickness, n.key.level >= tree.max_level))
        .collect()
}

/// Abstract DP input: one entry per node.
#[derive(Debug, Clone)]
pub struct DpNode {
    pub lambda: f64,
    /// Split-flag bits the node sends whatever the decision (0 at the deepest level).
    pub flag_bits: u64,
    /// `(rate_bits, distortion)` when coded as a leaf.
    pub here: Option<(u64, f64)>,
    pub children: Vec<usize>,
}

/// Best subtree pruning below one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpChoice {
    pub decision: Decision,
    /// Exact bits of the whole subtree: flags, masks and payloads.
    pub rate_bits: u64,
    pub distortion: f64,
    /// Weighted Lagrangian cost of the subtree.
    pub cost: f64,
}

fn solve_node(nodes: &[DpNode], id: usize, out: &mut [Option<DpChoice>]) -> Option<DpChoice> {
    let n = &nodes[id];
    let here = n.here.map(|(r, d)| DpChoice {
        decision: Decision::CodeHere,
        rate_bits: r + n.flag_bits,
        distortion: d,
        cost: d + n.lambda * (r + n.flag_bits) as f64,
    });
    let split = if n.children.is_empty() {
        None
    } else {
        let mut acc = DpChoice {
            decision: Decision::Split,
            rate_bits: n.flag_bits + CHILD_MASK_BITS,
            distortion: 0.0,
            cost: n.lambda * (n.flag_bits + CHILD_MASK_BITS) as f64,
        };
        let mut feasible = true;
        for &c in &n.children {
            match solve_node(nodes, c, out) {
                Some(ch) => {
                    acc.rate_bits += ch.rate_bits;
                    acc.distortion += ch.distortion;
                    acc.cost += ch.cost;
                }
                None => feasible = false,
            }
        }
        feasible.then_some(acc)
    };
    let best = match (here, split) {
        (Some(h), Some(s)) => Some(if h.cost <= s.cost { h } else { s }),
        (h, s) => h.or(s),
    };
    out[id] = best;
    best
}

/// Bottom-up optimum for every node reachable from `roots`. `None` marks a
/// node that can neither be coded nor split.
pub fn solve(nodes: &[DpNode], roots: &[usize]) -> Vec<Option<DpChoice>> {
    let mut out = vec![None; nodes.len()];
    for &r in roots {
        solve_node(nodes, r, &mut out);
    }
    out
}

/// Outcome of split selection for one λ.
#[derive(Debug, Clone)]
pub struct RdoPlan {
    pub lambda: f64,
    /// Per node: the chosen decision, `None` below a coded ancestor.
    pub decisions: Vec<Option<Decision>>,
    /// Leaf node ids in canonical order.
    pub leaves: Vec<usize>,
    /// Flag, mask and payload bits of all roots (the coarse bitmap excluded).
    pub rate_bits: u64,
    /// Σ of the local distortion of the chosen leaves.
    pub distortion_sum: f64,
    pub cost: f64,
}

pub fn decide(tree: &Octree, evals: &[Option<LeafEval>], multipliers: &[f64], lambda: f64) -> Result<RdoPlan> {
    let dp: Vec<DpNode> = tree
        .nodes
        .iter()
        .zip(evals)
        .map(|(n, e)| {
            let deepest = n.key.level >= tree.max_level;
            DpNode {
                lambda: multipliers[n.key.level as usize] * lambda,
                flag_bits: if deepest { 0 } else { 1 },
                here: e.as_ref().map(|e| (e.leaf.bits, e.distortion)),
                children: if deepest { Vec::new() } else { n.children.iter().flatten().copied().collect() },
            }
        })
        .collect();
    let choices = solve(&dp, &tree.roots);
    let mut decisions = vec![None; tree.nodes.len()];
    let (mut rate_bits, mut distortion_sum, mut cost) = (0u64, 0.0, 0.0);
    let mut leaves = Vec::new();
    for &r in &tree.roots {
        let c = choices[r].ok_or_else(|| Error::Domain("octree node cannot be coded".into()))?;
        rate_bits += c.rate_bits;
        distortion_sum += c.distortion;
        cost += c.cost;
        mark(tree, &choices, r, &mut decisions, &mut leaves);
    }
    Ok(RdoPlan {
        lambda,
        decisions,
        leaves,
        rate_bits,
        distortion_sum,
        cost,
    })
}

fn mark(tree: &Octree, choices: &[Option<DpChoice>], id: usize, decisions: &mut [Option<Decision>], leaves: &mut Vec<usize>) {
    let d = choices[id].expect("reachable nodes are solved").decision;
    decisions[id] = Some(d);
    match d {
        Decision::CodeHere => leaves.push(id),
        Decision::Split => {
            for &c in tree.nodes[id].children.iter().flatten() {
                mark(tree, choices, c, decisions, leaves);
            }
        }
    }
}

/// Writes the plan's split flags into the tree.
pub fn apply(tree: &mut Octree, plan: &RdoPlan) {
    for (node, d) in tree.nodes.iter_mut().zip(&plan.decisions) {
        node.split = *d == Some(Decision::Split);
    }
}
