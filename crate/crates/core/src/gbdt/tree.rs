use serde::{Deserialize, Serialize};

use super::bins::BinMapper;
use super::split::{find_best_split, SplitCandidate};
use super::GbdtConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        bin_threshold: usize,
        threshold: f64,
        gain: f64,
        /// Position of this split in the leaf-wise growth sequence.
        order: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        count: usize,
        /// Gain of the best split this leaf offered when growth stopped.
        candidate_gain: Option<f64>,
    },
}

/// Regression tree stored as a pre-order node array (root at index 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => idx = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Depth in edges; a single leaf has depth 0.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaf_counts(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { count, .. } => Some(*count),
                _ => None,
            })
            .collect()
    }
}

enum Grow {
    Leaf {
        samples: Vec<usize>,
        depth: usize,
        candidate: Option<SplitCandidate>,
    },
    Split {
        cand: SplitCandidate,
        order: usize,
        left: usize,
        right: usize,
    },
}

/// Grows one tree leaf-wise: the frontier leaf with the largest gain is split
/// until `num_leaves` is reached or no leaf offers a positive-gain split.
/// Leaf values are Newton steps `-G / (H + lambda)` scaled by the learning rate.
/// Returns `None` if the root cannot be split.
pub(crate) fn grow_tree(
    grad: &[f64],
    hess: &[f64],
    binned: &[Vec<u16>],
    mapper: &BinMapper,
    config: &GbdtConfig,
) -> Option<Tree> {
    let n = grad.len();
    let all: Vec<usize> = (0..n).collect();
    let eligible = |depth: usize| depth < config.max_depth;
    let candidate = |samples: &[usize], depth: usize| {
        if eligible(depth) {
            find_best_split(samples, grad, hess, binned, mapper, config)
        } else {
            None
        }
    };

    let root_cand = candidate(&all, 0)?;
    let mut arena = vec![Grow::Leaf {
        samples: all,
        depth: 0,
        candidate: Some(root_cand),
    }];
    let mut n_leaves = 1;
    let mut order = 0;

    while n_leaves < config.num_leaves {
        // largest gain; earliest-created leaf wins ties
        let mut pick: Option<(usize, f64)> = None;
        for (i, node) in arena.iter().enumerate() {
            if let Grow::Leaf {
                candidate: Some(c), ..
            } = node
            {
                if pick.is_none_or(|(_, g)| c.gain > g) {
                    pick = Some((i, c.gain));
                }
            }
        }
        let Some((idx, _)) = pick else { break };

        let Grow::Leaf {
            samples,
            depth,
            candidate: Some(cand),
        } = std::mem::replace(
            &mut arena[idx],
            Grow::Leaf {
                samples: Vec::new(),
                depth: 0,
                candidate: None,
            },
        )
        else {
            unreachable!("picked node is a leaf with a candidate");
        };
        let col = &binned[cand.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| (col[i] as usize) <= cand.bin_threshold);
        let lc = candidate(&l, depth + 1);
        let rc = candidate(&r, depth + 1);
        let left = arena.len();
        arena.push(Grow::Leaf {
            samples: l,
            depth: depth + 1,
            candidate: lc,
        });
        arena.push(Grow::Leaf {
            samples: r,
            depth: depth + 1,
            candidate: rc,
        });
        arena[idx] = Grow::Split {
            cand,
            order,
            left,
            right: left + 1,
        };
        order += 1;
        n_leaves += 1;
    }

    let mut nodes = Vec::with_capacity(arena.len());
    emit_preorder(&arena, 0, grad, hess, config, &mut nodes);
    Some(Tree { nodes })
}

fn emit_preorder(
    arena: &[Grow],
    i: usize,
    grad: &[f64],
    hess: &[f64],
    config: &GbdtConfig,
    out: &mut Vec<Node>,
) -> usize {
    let at = out.len();
    match &arena[i] {
        Grow::Leaf {
            samples, candidate, ..
        } => {
            let g: f64 = samples.iter().map(|&s| grad[s]).sum();
            let h: f64 = samples.iter().map(|&s| hess[s]).sum();
            let denom = h + config.lambda_l2;
            let raw = if denom > 0.0 { -g / denom } else { 0.0 };
            out.push(Node::Leaf {
                value: config.learning_rate * raw,
                count: samples.len(),
                candidate_gain: candidate.map(|c| c.gain),
            });
        }
        Grow::Split {
            cand,
            order,
            left,
            right,
        } => {
            out.push(Node::Split {
                feature: cand.feature,
                bin_threshold: cand.bin_threshold,
                threshold: cand.threshold,
                gain: cand.gain,
                order: *order,
                left: 0,
                right: 0,
            });
            let l = emit_preorder(arena, *left, grad, hess, config, out);
            let r = emit_preorder(arena, *right, grad, hess, config, out);
            if let Node::Split { left, right, .. } = &mut out[at] {
                *left = l;
                *right = r;
            }
        }
    }
    at
}
