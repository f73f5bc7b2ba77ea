#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lbcnn/lb_operator.hpp"

namespace lbcnn {

struct Matching {
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> singletons;
};

/// Local normalized cut -Delta_ij (1/Delta_ii + 1/Delta_jj); zero for non-edges.
double normalized_cut_weight(const LBOperator& op, int i, int j);

/// Greedy matching. Vertices are visited by ascending degree; ties go to the
/// smaller index when order_seed is 0, otherwise to a permutation drawn from
/// order_seed. Each visited vertex pairs with the unmatched neighbor of largest
/// normalized cut (smaller index on ties).
Matching greedy_match(const LBOperator& op, int order_seed = 0);

/// Throws InputError unless every vertex occurs exactly once and every pair is an edge.
void check_matching(const LBOperator& op, const Matching& matching);

/// Child -> parent index. Parents are numbered in order of their smallest member.
std::vector<int> parent_map(const Matching& matching, Eigen::Index n);

/// Merge matched pairs: coarse off-diagonal weights are sums of the fine
/// weights between member sets, the diagonal is recomputed from them and the
/// coarse areas are member-area sums. lambda_max is left unset.
LBOperator coarsen_operator(const LBOperator& op, const Matching& matching);

enum class PoolMode {
  real_only,       // average over real children only
  fakes_as_zero,   // fake children count as zeros in the average
};

struct HierarchyLevel {
  /// Operator on the real vertices of this level, lambda_max estimated when it has edges.
  LBOperator op;
  /// Real child index -> real parent index on the next level; empty at the top.
  std::vector<int> parent;
  /// Padded slot -> vertex id; ids >= op.size() are fake nodes numbered after the real ones.
  std::vector<int> permutation;
  std::vector<bool> fake_mask;
  /// op re-indexed into padded order; fake rows and columns are empty with zero area.
  LBOperator padded_op;

  Eigen::Index real_size() const { return op.size(); }
  Eigen::Index padded_size() const { return static_cast<Eigen::Index>(permutation.size()); }
};

struct CoarseningHierarchy {
  std::vector<HierarchyLevel> levels;  // levels.size() == depth() + 1
  int depth() const { return static_cast<int>(levels.size()) - 1; }

  /// Real fine-level signals (rows = real vertices) into padded order; fake rows are zero.
  Eigen::MatrixXd scatter(const Eigen::MatrixXd& X) const;
  /// Padded fine-level rows back to real vertex order.
  Eigen::MatrixXd gather(const Eigen::MatrixXd& X) const;

  /// Normalized padded operator of a level.
  NormalizedOperator normalized(int level, PolyFamily family, double inflation = kDefaultLambdaInflation) const;
};

struct HierarchyOptions {
  int order_seed = 0;
  PowerIterationOptions power;
};

CoarseningHierarchy build_hierarchy(const LBOperator& op, int binary_levels, const HierarchyOptions& options = {});

/// pool_size = 2^p successive stride-2 averages starting at from_level.
Eigen::MatrixXd pool_signal(const CoarseningHierarchy& h, int from_level, const Eigen::MatrixXd& X, int pool_size,
                            PoolMode mode = PoolMode::real_only);
/// Adjoint of pool_signal: Y lives at from_level + p.
Eigen::MatrixXd unpool_signal(const CoarseningHierarchy& h, int from_level, const Eigen::MatrixXd& Y, int pool_size,
                              PoolMode mode = PoolMode::real_only);

/// log2(pool_size); throws unless pool_size is a positive power of two.
int pool_exponent(int pool_size);

}  // namespace lbcnn
