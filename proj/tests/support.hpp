#pragma once

// Reference computations for the tests. Everything here goes through dense
// linear algebra or direct formulas, never through the library's sparse paths.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lbcnn/lb_operator.hpp"
#include "lbcnn/mesh.hpp"

namespace testing {

inline Eigen::MatrixXd dense(const lbcnn::SparseMatrix& m) { return Eigen::MatrixXd(m); }

/// scale * A^-1 C + shift * I, built densely from the raw pieces; zero areas act as zero rows.
inline Eigen::MatrixXd dense_normalized(const lbcnn::LBOperator& op, double lambda, bool chebyshev) {
  const Eigen::MatrixXd C = dense(op.stiffness);
  Eigen::MatrixXd M(C.rows(), C.cols());
  for (Eigen::Index i = 0; i < C.rows(); ++i) {
    const double inv = op.areas[i] > 0.0 ? 1.0 / op.areas[i] : 0.0;
    M.row(i) = (2.0 / lambda) * inv * C.row(i);
  }
  if (chebyshev) M -= Eigen::MatrixXd::Identity(C.rows(), C.cols());
  return M;
}

/// Generalized eigenvalues of (C, diag(A)) from Eigen's generalized solver.
inline Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> generalized_eig(const lbcnn::LBOperator& op) {
  const Eigen::MatrixXd C = dense(op.stiffness);
  const Eigen::MatrixXd A = op.areas.asDiagonal();
  return Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd>(C, A);
}

inline double dense_lambda_max(const lbcnn::LBOperator& op) {
  return generalized_eig(op).eigenvalues().maxCoeff();
}

// Closed forms written out here independently of the library.
inline double chebyshev_closed(int k, double x) { return std::cos(k * std::acos(std::clamp(x, -1.0, 1.0))); }

inline double laguerre_closed(int k, double x) {
  double sum = 0.0;
  for (int l = 0; l <= k; ++l) {
    const double binom = std::tgamma(k + 1.0) / (std::tgamma(l + 1.0) * std::tgamma(k - l + 1.0));
    sum += binom * std::pow(-x, l) / std::tgamma(l + 1.0);
  }
  return sum;
}

inline double hermite_normalized_closed(int k, double x) {
  double sum = 0.0;
  for (int l = 0; 2 * l <= k; ++l) {
    sum += std::pow(-1.0, l) * std::pow(2.0 * x, k - 2 * l) / (std::tgamma(l + 1.0) * std::tgamma(k - 2 * l + 1.0));
  }
  const double h = std::tgamma(k + 1.0) * sum;
  return h / std::sqrt(std::pow(2.0, k) * std::tgamma(k + 1.0));
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double denom = want.norm();
  return denom > 0.0 ? (got - want).norm() / denom : (got - want).norm();
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

/// Two unit equilateral triangles sharing edge (0, 1).
inline lbcnn::TriMesh equilateral_pair() {
  const double h = std::sqrt(3.0) / 2.0;
  return lbcnn::TriMesh({{0, 0, 0}, {1, 0, 0}, {0.5, h, 0}, {0.5, -h, 0}}, {{{0, 1, 2}}, {{1, 0, 3}}});
}

inline lbcnn::TriMesh icosahedron() { return lbcnn::generate_icosphere(0); }

/// Hop distances by Floyd-Warshall over the mesh edge list.
inline std::vector<std::vector<int>> all_pairs_hops(const lbcnn::TriMesh& mesh) {
  const int n = static_cast<int>(mesh.num_vertices());
  const int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& f : mesh.faces()) {
    for (int e = 0; e < 3; ++e) {
      d[f[e]][f[(e + 1) % 3]] = 1;
      d[f[(e + 1) % 3]][f[e]] = 1;
    }
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

inline lbcnn::LBOperator with_lambda(lbcnn::LBOperator op) {
  op.lambda_max = dense_lambda_max(op);
  return op;
}

}  // namespace testing
