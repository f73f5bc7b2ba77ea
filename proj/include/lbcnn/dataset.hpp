#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lbcnn/mesh.hpp"

namespace lbcnn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One row per sample, one column per vertex.
struct LabeledSignals {
  RowMatrix signals;
  std::vector<int> labels;
  std::vector<int> group_ids;
  int num_classes = 2;

  std::size_t size() const { return labels.size(); }
  Eigen::VectorXd sample(std::size_t i) const { return signals.row(static_cast<Eigen::Index>(i)).transpose(); }
  /// Rows selected by index, in the given order.
  LabeledSignals subset(const std::vector<std::size_t>& rows) const;
};

struct BumpParams {
  int n_per_class = 200;
  double noise_sigma = 0.3;
  /// Gaussian width in rings (hops).
  double bump_width = 3.0;
  double bump_height = 1.0;
  /// Per-subject centers are drawn from this ring radius around the class center.
  int jitter_rings = 1;
};

/// Class centers used by the generator: vertex 0 and the lowest-index vertex
/// farthest from it in ring distance.
std::pair<int, int> bump_centers(const TriMesh& mesh);

/// Two-class bump signals; class 0 around the first center, class 1 around the
/// second. Subjects contribute 1-3 samples sharing a group id and center.
/// Noise is Gaussian clipped at +-8 sigma.
LabeledSignals generate_bump_dataset(const TriMesh& mesh, const BumpParams& params, std::uint64_t seed);

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Splits {
  LabeledSignals train;
  LabeledSignals val;
  LabeledSignals test;
};

/// Group-level split stratified by class; no group crosses splits.
Splits split_grouped(const LabeledSignals& data, const SplitFractions& fractions, std::uint64_t seed);

/// CSV rows "group_id,label,v0,...,v{n-1}"; an optional header row starting with "group_id" is skipped.
LabeledSignals read_signals_csv(std::istream& in, std::size_t num_vertices);
LabeledSignals load_signals_csv(const std::string& path, const TriMesh& mesh);
void write_signals_csv(std::ostream& out, const LabeledSignals& data);
void save_signals_csv(const std::string& path, const LabeledSignals& data);

}  // namespace lbcnn
