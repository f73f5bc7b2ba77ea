#include "lbcnn/coarsening.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "lbcnn/error.hpp"

namespace lbcnn {

namespace {

double diagonal_delta(const LBOperator& op, int i) {
  const double c = op.stiffness.coeff(i, i);
  if (c == 0.0) throw InputError("normalized cut: zero diagonal at vertex " + std::to_string(i));
  return c / op.areas[i];
}

std::vector<int> current_degrees(const SparseMatrix& c) {
  std::vector<int> degree(static_cast<std::size_t>(c.rows()), 0);
  for (Eigen::Index i = 0; i < c.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(c, i); it; ++it)
      if (it.col() != i && it.value() != 0.0) ++degree[i];
  return degree;
}

}  // namespace

double normalized_cut_weight(const LBOperator& op, int i, int j) {
  if (i == j) return 0.0;
  const double cij = op.stiffness.coeff(i, j);
  if (cij == 0.0) return 0.0;
  const double delta_ij = cij / op.areas[i];
  return -delta_ij * (1.0 / diagonal_delta(op, i) + 1.0 / diagonal_delta(op, j));
}

Matching greedy_match(const LBOperator& op, int order_seed) {
  const Eigen::Index n = op.size();
  const std::vector<int> degree = current_degrees(op.stiffness);

  std::vector<int> tiebreak(static_cast<std::size_t>(n));
  std::iota(tiebreak.begin(), tiebreak.end(), 0);
  if (order_seed != 0) {
    std::mt19937_64 rng(static_cast<unsigned long long>(order_seed));
    std::shuffle(tiebreak.begin(), tiebreak.end(), rng);
  }
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (degree[a] != degree[b]) return degree[a] < degree[b];
    return tiebreak[a] < tiebreak[b];
  });

  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  Matching m;
  for (int v : order) {
    if (taken[v]) continue;
    taken[v] = true;
    int best = -1;
    double best_weight = 0.0;
    for (SparseMatrix::InnerIterator it(op.stiffness, v); it; ++it) {
      const int w = static_cast<int>(it.col());
      if (w == v || taken[w] || it.value() == 0.0) continue;
      const double weight = normalized_cut_weight(op, v, w);
      // Columns are visited in ascending order, so strict '>' keeps the smaller index on ties.
      if (best < 0 || weight > best_weight) {
        best = w;
        best_weight = weight;
      }
    }
    if (best < 0) {
      m.singletons.push_back(v);
    } else {
      taken[best] = true;
      m.pairs.emplace_back(v, best);
    }
  }
  return m;
}

void check_matching(const LBOperator& op, const Matching& matching) {
  const Eigen::Index n = op.size();
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  auto mark = [&](int v) {
    if (v < 0 || v >= n) throw InputError("matching references vertex " + std::to_string(v) + " out of range");
    if (++seen[v] > 1) throw InputError("vertex " + std::to_string(v) + " appears twice in matching");
  };
  for (const auto& [a, b] : matching.pairs) {
    mark(a);
    mark(b);
    if (op.stiffness.coeff(a, b) == 0.0) {
      throw InputError("matched pair (" + std::to_string(a) + ", " + std::to_string(b) + ") is not an edge");
    }
  }
  for (int v : matching.singletons) mark(v);
  for (Eigen::Index v = 0; v < n; ++v)
    if (seen[v] == 0) throw InputError("vertex " + std::to_string(v) + " missing from matching");
}

std::vector<int> parent_map(const Matching& matching, Eigen::Index n) {
  std::vector<int> partner(static_cast<std::size_t>(n), -1);
  for (const auto& [a, b] : matching.pairs) {
    partner[a] = b;
    partner[b] = a;
  }
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (Eigen::Index v = 0; v < n; ++v) {
    if (parent[v] >= 0) continue;
    parent[v] = next;
    if (partner[v] >= 0) parent[partner[v]] = next;
    ++next;
  }
  return parent;
}

LBOperator coarsen_operator(const LBOperator& op, const Matching& matching) {
  check_matching(op, matching);
  const Eigen::Index n = op.size();
  const std::vector<int> parent = parent_map(matching, n);
  const int coarse_n = n == 0 ? 0 : *std::max_element(parent.begin(), parent.end()) + 1;

  // Each fine edge is visited once (upper triangle) and accumulated under the
  // canonical coarse key, so both coarse triangles receive identical sums.
  std::map<std::pair<int, int>, double> merged;
  for (Eigen::Index i = 0; i < op.stiffness.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(op.stiffness, i); it; ++it) {
      const Eigen::Index j = it.col();
      if (j <= i) continue;
      const int p = parent[i];
      const int q = parent[j];
      if (p == q) continue;
      merged[{std::min(p, q), std::max(p, q)}] += it.value();
    }
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(merged.size() * 2 + static_cast<std::size_t>(coarse_n));
  for (const auto& [key, w] : merged) {
    triplets.emplace_back(key.first, key.second, w);
    triplets.emplace_back(key.second, key.first, w);
  }
  for (int p = 0; p < coarse_n; ++p) triplets.emplace_back(p, p, 0.0);
  SparseMatrix c(coarse_n, coarse_n);
  c.setFromTriplets(triplets.begin(), triplets.end());
  c.makeCompressed();
  for (Eigen::Index p = 0; p < coarse_n; ++p) {
    double off = 0.0;
    for (SparseMatrix::InnerIterator it(c, p); it; ++it)
      if (it.col() != p) off += it.value();
    c.coeffRef(p, p) = -off;
  }

  Eigen::VectorXd areas = Eigen::VectorXd::Zero(coarse_n);
  for (Eigen::Index v = 0; v < n; ++v) areas[parent[v]] += op.areas[v];
  return LBOperator{op.kind, std::move(c), std::move(areas), std::nullopt};
}

namespace {

bool has_edges(const SparseMatrix& c) {
  for (Eigen::Index i = 0; i < c.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(c, i); it; ++it)
      if (it.col() != i && it.value() != 0.0) return true;
  return false;
}

LBOperator padded_operator(const LBOperator& op, const std::vector<int>& permutation) {
  const Eigen::Index real = op.size();
  const auto padded = static_cast<Eigen::Index>(permutation.size());
  std::vector<int> slot_of(static_cast<std::size_t>(real), -1);
  for (Eigen::Index s = 0; s < padded; ++s)
    if (permutation[s] < real) slot_of[permutation[s]] = static_cast<int>(s);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(op.stiffness.nonZeros()));
  for (Eigen::Index i = 0; i < op.stiffness.outerSize(); ++i)
    for (SparseMatrix::InnerIterator it(op.stiffness, i); it; ++it)
      triplets.emplace_back(slot_of[i], slot_of[it.col()], it.value());
  SparseMatrix c(padded, padded);
  c.setFromTriplets(triplets.begin(), triplets.end());
  c.makeCompressed();

  Eigen::VectorXd areas = Eigen::VectorXd::Zero(padded);
  for (Eigen::Index v = 0; v < real; ++v) areas[slot_of[v]] = op.areas[v];
  return LBOperator{op.kind, std::move(c), std::move(areas), op.lambda_max};
}

}  // namespace

CoarseningHierarchy build_hierarchy(const LBOperator& op, int binary_levels, const HierarchyOptions& options) {
  const Eigen::Index n = op.size();
  if (binary_levels < 1) throw InputError("build_hierarchy: need at least one level");
  if (n < 1) throw InputError("build_hierarchy: empty operator");
  if (binary_levels > std::log2(static_cast<double>(n)) + 2.0) {
    throw InputError("build_hierarchy: " + std::to_string(binary_levels) + " levels exceeds log2(n) + 2 for n = " +
                     std::to_string(n));
  }

  CoarseningHierarchy h;
  h.levels.resize(static_cast<std::size_t>(binary_levels) + 1);
  h.levels[0].op = op;
  h.levels[0].op.lambda_max.reset();
  for (int l = 0; l < binary_levels; ++l) {
    const Matching m = greedy_match(h.levels[l].op, options.order_seed);
    h.levels[l].parent = parent_map(m, h.levels[l].op.size());
    h.levels[l + 1].op = coarsen_operator(h.levels[l].op, m);
  }
  for (auto& level : h.levels) {
    if (has_edges(level.op.stiffness)) estimate_lambda_max_within_margin(level.op, kDefaultLambdaInflation, options.power);
  }

  // Top-down: each slot's two children are its real children in index order,
  // padded with fake ids that are numbered after the real vertices.
  HierarchyLevel& top = h.levels.back();
  top.permutation.resize(static_cast<std::size_t>(top.real_size()));
  std::iota(top.permutation.begin(), top.permutation.end(), 0);
  for (int l = binary_levels - 1; l >= 0; --l) {
    HierarchyLevel& fine = h.levels[l];
    const HierarchyLevel& coarse = h.levels[l + 1];
    std::vector<std::vector<int>> children(static_cast<std::size_t>(coarse.real_size()));
    for (Eigen::Index v = 0; v < fine.real_size(); ++v) children[fine.parent[v]].push_back(static_cast<int>(v));

    int next_fake = static_cast<int>(fine.real_size());
    fine.permutation.clear();
    fine.permutation.reserve(coarse.permutation.size() * 2);
    for (int id : coarse.permutation) {
      if (id < coarse.real_size()) {
        const auto& ch = children[id];
        fine.permutation.push_back(ch[0]);
        fine.permutation.push_back(ch.size() > 1 ? ch[1] : next_fake++);
      } else {
        fine.permutation.push_back(next_fake++);
        fine.permutation.push_back(next_fake++);
      }
    }
  }

  for (auto& level : h.levels) {
    level.fake_mask.resize(level.permutation.size());
    for (std::size_t s = 0; s < level.permutation.size(); ++s) level.fake_mask[s] = level.permutation[s] >= level.real_size();
    level.padded_op = padded_operator(level.op, level.permutation);
  }
  return h;
}

Eigen::MatrixXd CoarseningHierarchy::scatter(const Eigen::MatrixXd& X) const {
  const HierarchyLevel& fine = levels.front();
  if (X.rows() != fine.real_size()) throw InputError("scatter: row count does not match fine level");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(fine.padded_size(), X.cols());
  for (Eigen::Index s = 0; s < fine.padded_size(); ++s)
    if (!fine.fake_mask[s]) out.row(s) = X.row(fine.permutation[s]);
  return out;
}

Eigen::MatrixXd CoarseningHierarchy::gather(const Eigen::MatrixXd& X) const {
  const HierarchyLevel& fine = levels.front();
  if (X.rows() != fine.padded_size()) throw InputError("gather: row count does not match padded fine level");
  Eigen::MatrixXd out(fine.real_size(), X.cols());
  for (Eigen::Index s = 0; s < fine.padded_size(); ++s)
    if (!fine.fake_mask[s]) out.row(fine.permutation[s]) = X.row(s);
  return out;
}

NormalizedOperator CoarseningHierarchy::normalized(int level, PolyFamily family, double inflation) const {
  if (level < 0 || level > depth()) throw InputError("hierarchy level " + std::to_string(level) + " out of range");
  return NormalizedOperator(levels[level].padded_op, family, inflation);
}

int pool_exponent(int pool_size) {
  if (pool_size < 1 || (pool_size & (pool_size - 1)) != 0) {
    throw InputError("pool size " + std::to_string(pool_size) + " is not a power of two");
  }
  int p = 0;
  while ((1 << p) < pool_size) ++p;
  return p;
}

namespace {

void check_pool_range(const CoarseningHierarchy& h, int from_level, int p) {
  if (from_level < 0 || from_level + p > h.depth()) {
    throw InputError("pooling from level " + std::to_string(from_level) + " by 2^" + std::to_string(p) +
                     " overflows a hierarchy of depth " + std::to_string(h.depth()));
  }
}

// Weight each child contributes to its parent's average.
double child_weight(const HierarchyLevel& fine, Eigen::Index parent_slot, int child, PoolMode mode) {
  const Eigen::Index s = 2 * parent_slot + child;
  if (fine.fake_mask[s]) return 0.0;
  if (mode == PoolMode::fakes_as_zero) return 0.5;
  const bool sibling_real = !fine.fake_mask[2 * parent_slot + (1 - child)];
  return sibling_real ? 0.5 : 1.0;
}

}  // namespace

Eigen::MatrixXd pool_signal(const CoarseningHierarchy& h, int from_level, const Eigen::MatrixXd& X, int pool_size,
                            PoolMode mode) {
  const int p = pool_exponent(pool_size);
  check_pool_range(h, from_level, p);
  if (X.rows() != h.levels[from_level].padded_size()) throw InputError("pool_signal: row count does not match level");

  Eigen::MatrixXd cur = X;
  for (int l = from_level; l < from_level + p; ++l) {
    const HierarchyLevel& fine = h.levels[l];
    const Eigen::Index parents = fine.padded_size() / 2;
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(parents, cur.cols());
    for (Eigen::Index s = 0; s < parents; ++s) {
      const double w0 = child_weight(fine, s, 0, mode);
      const double w1 = child_weight(fine, s, 1, mode);
      if (w0 != 0.0) next.row(s) += w0 * cur.row(2 * s);
      if (w1 != 0.0) next.row(s) += w1 * cur.row(2 * s + 1);
    }
    cur = std::move(next);
  }
  return cur;
}

Eigen::MatrixXd unpool_signal(const CoarseningHierarchy& h, int from_level, const Eigen::MatrixXd& Y, int pool_size,
                              PoolMode mode) {
  const int p = pool_exponent(pool_size);
  check_pool_range(h, from_level, p);
  if (Y.rows() != h.levels[from_level + p].padded_size()) {
    throw InputError("unpool_signal: row count does not match level");
  }

  Eigen::MatrixXd cur = Y;
  for (int l = from_level + p - 1; l >= from_level; --l) {
    const HierarchyLevel& fine = h.levels[l];
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(fine.padded_size(), cur.cols());
    for (Eigen::Index s = 0; s < cur.rows(); ++s) {
      const double w0 = child_weight(fine, s, 0, mode);
      const double w1 = child_weight(fine, s, 1, mode);
      if (w0 != 0.0) next.row(2 * s) = w0 * cur.row(s);
      if (w1 != 0.0) next.row(2 * s + 1) = w1 * cur.row(s);
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace lbcnn
