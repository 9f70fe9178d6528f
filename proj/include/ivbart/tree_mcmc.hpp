#pragma once

#include <vector>

#include "ivbart/rng.hpp"
#include "ivbart/tree.hpp"

namespace ivbart {

enum class MoveTag { None, Grow, Prune, Change };

// Move probabilities after dropping unavailable move types and renormalizing.
struct EffectiveMoveProbs {
  double grow = 0.0;
  double prune = 0.0;
  double change = 0.0;
};

EffectiveMoveProbs effective_move_probs(const RegressionTree& tree,
                                        const TreePriorConfig& cfg,
                                        const CutpointGrid& grid);

// A structural proposal plus the transition-kernel correction
//   log q(T | T') - log q(T' | T).
// `valid == false` marks proposals rejected outright (empty leaf, no move
// available, or a rule knocked out of range), which have acceptance zero.
struct Proposal {
  RegressionTree tree{LeafKind::Constant};
  MoveTag tag = MoveTag::None;
  bool valid = false;
  double log_q_ratio = 0.0;
  // root of the subtree the move touches: the grown leaf, the collapsed nog
  // node, or the node whose rule changed (same id in old and new tree)
  int pivot = -1;
};

// Draws one GROW / PRUNE / CHANGE proposal. `leaf_rows` is the partition of
// data rows by leaf id as produced by partition_rows(tree, grid, x).
Proposal propose_move(const RegressionTree& tree, const TreePriorConfig& cfg,
                      const CutpointGrid& grid, const Mat& x,
                      const std::vector<std::vector<int>>& leaf_rows, Rng& rng);

}  // namespace ivbart
