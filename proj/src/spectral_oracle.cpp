#include "lbcnn/spectral_oracle.hpp"

#include <Eigen/Eigenvalues>

#include "lbcnn/error.hpp"

namespace lbcnn {

EigenSystem eig_decompose(const StiffnessAndMass& cm, std::optional<Eigen::Index> count) {
  const Eigen::Index n = cm.stiffness.rows();
  if (n > kMaxDenseVertices) {
    throw InputError("eig_decompose: " + std::to_string(n) + " vertices exceeds the dense limit of " +
                     std::to_string(kMaxDenseVertices));
  }
  if (cm.areas.size() != n) throw InputError("eig_decompose: area vector does not match stiffness matrix");
  if ((cm.areas.array() <= 0.0).any()) throw InputError("eig_decompose: areas must be positive");
  const Eigen::Index m = count.value_or(n);
  if (m < 1 || m > n) throw InputError("eig_decompose: requested pair count out of range");

  const Eigen::VectorXd inv_sqrt = cm.areas.array().rsqrt().matrix();
  const Eigen::MatrixXd s = inv_sqrt.asDiagonal() * Eigen::MatrixXd(cm.stiffness) * inv_sqrt.asDiagonal();
  // Symmetrize away rounding so the solver sees an exactly symmetric matrix.
  const Eigen::MatrixXd sym = 0.5 * (s + s.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericalError("eig_decompose: dense eigensolver failed");

  EigenSystem eig;
  eig.mass = cm.areas;
  eig.lambdas = solver.eigenvalues().head(m);
  eig.psis = inv_sqrt.asDiagonal() * solver.eigenvectors().leftCols(m);

  for (Eigen::Index j = 0; j < m; ++j) {
    auto col = eig.psis.col(j);
    const double cutoff = 1e-8 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col[i]) > cutoff) {
        if (col[i] < 0.0) col = -col;
        break;
      }
    }
  }
  return eig;
}

Eigen::VectorXd forward_coeffs(const EigenSystem& eig, const Eigen::VectorXd& f) {
  if (f.size() != eig.psis.rows()) throw InputError("forward_coeffs: signal length does not match eigensystem");
  return eig.psis.transpose() * (eig.mass.array() * f.array()).matrix();
}

Eigen::VectorXd spectral_filter(const EigenSystem& eig, const Eigen::VectorXd& f,
                                const std::function<double(double)>& g) {
  if (!eig.complete()) throw InputError("spectral_filter: requires the full eigenbasis");
  Eigen::VectorXd c = forward_coeffs(eig, f);
  for (Eigen::Index j = 0; j < c.size(); ++j) c[j] *= g(eig.lambdas[j]);
  return eig.psis * c;
}

}  // namespace lbcnn
