#pragma once

#include <functional>
#include <optional>

#include <Eigen/Core>

#include "lbcnn/lb_operator.hpp"

namespace lbcnn {

/// Generalized eigenpairs of C psi = lambda diag(A) psi, ascending, with
/// A-orthonormal eigenvectors stored as columns.
struct EigenSystem {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd psis;
  Eigen::VectorXd mass;

  bool complete() const { return psis.cols() == psis.rows(); }
};

inline constexpr Eigen::Index kMaxDenseVertices = 3000;

/// Dense solve through S = A^-1/2 C A^-1/2. Returns the `count` smallest pairs
/// (all of them when unset). Each eigenvector's first entry that is
/// non-negligible is made positive.
EigenSystem eig_decompose(const StiffnessAndMass& cm, std::optional<Eigen::Index> count = std::nullopt);

/// c_j = psi_j^T diag(A) f.
Eigen::VectorXd forward_coeffs(const EigenSystem& eig, const Eigen::VectorXd& f);

/// h = sum_j g(lambda_j) c_j psi_j. Requires the full eigenbasis.
Eigen::VectorXd spectral_filter(const EigenSystem& eig, const Eigen::VectorXd& f,
                                const std::function<double(double)>& g);

}  // namespace lbcnn
