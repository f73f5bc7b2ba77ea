#include <doctest.h>

#include "lbcnn/spectral_oracle.hpp"
#include "support.hpp"

using namespace lbcnn;

TEST_CASE("eigensystem invariants") {
  const LBOperator op = assemble_laplace_beltrami(generate_torus(6, 9));
  const EigenSystem eig = eig_decompose(op.stiffness_and_mass());
  REQUIRE(eig.complete());
  const Eigen::Index n = op.size();
  const double lmax = eig.lambdas[n - 1];
  CHECK(std::abs(eig.lambdas[0]) < 1e-8 * lmax);
  const Eigen::VectorXd psi0 = eig.psis.col(0);
  CHECK((psi0.array() - psi0.mean()).abs().maxCoeff() < 1e-10 * psi0.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 1; j < n; ++j) CHECK(eig.lambdas[j] >= eig.lambdas[j - 1]);

  const Eigen::MatrixXd gram = eig.psis.transpose() * op.areas.asDiagonal() * eig.psis;
  CHECK((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);

  const Eigen::MatrixXd C = testing::dense(op.stiffness);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd r = C * eig.psis.col(j) - eig.lambdas[j] * op.areas.cwiseProduct(eig.psis.col(j));
    CHECK(r.norm() <= 1e-8 * std::max(1.0, eig.lambdas[j]) * (op.areas.cwiseProduct(eig.psis.col(j))).norm() + 1e-14);
  }

  // Sign convention: first non-negligible entry positive.
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Index first = 0;
    while (std::abs(eig.psis(first, j)) < 1e-12 * eig.psis.col(j).cwiseAbs().maxCoeff()) ++first;
    CHECK(eig.psis(first, j) > 0.0);
  }
}

TEST_CASE("partial decompositions take the smallest pairs") {
  const LBOperator op = assemble_laplace_beltrami(generate_icosphere(2));
  const EigenSystem all = eig_decompose(op.stiffness_and_mass());
  const EigenSystem few = eig_decompose(op.stiffness_and_mass(), 10);
  CHECK(few.lambdas.size() == 10);
  CHECK_FALSE(few.complete());
  CHECK((few.lambdas - all.lambdas.head(10)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(spectral_filter(few, Eigen::VectorXd::Ones(op.size()), [](double) { return 1.0; }), InputError);
}

TEST_CASE("sphere eigenvalues cluster at 2") {
  const LBOperator op = assemble_laplace_beltrami(generate_icosphere(3));
  const EigenSystem eig = eig_decompose(op.stiffness_and_mass(), 5);
  for (int j = 1; j <= 3; ++j) CHECK(std::abs(eig.lambdas[j] - 2.0) < 0.06);
  CHECK(eig.lambdas[4] > 5.0);
}

TEST_CASE("two-triangle strip matches the generalized solver") {
  const LBOperator op = assemble_laplace_beltrami(testing::equilateral_pair());
  const EigenSystem eig = eig_decompose(op.stiffness_and_mass());
  const Eigen::VectorXd want = testing::generalized_eig(op).eigenvalues();
  CHECK((eig.lambdas - want).cwiseAbs().maxCoeff() < 1e-12 * want.maxCoeff());
}

TEST_CASE("forward coefficients and reconstruction") {
  const LBOperator op = assemble_laplace_beltrami(generate_torus(6, 8));
  const EigenSystem eig = eig_decompose(op.stiffness_and_mass());
  const Eigen::Index n = op.size();

  const Eigen::VectorXd c5 = forward_coeffs(eig, eig.psis.col(5));
  Eigen::VectorXd e5 = Eigen::VectorXd::Zero(n);
  e5[5] = 1.0;
  CHECK((c5 - e5).cwiseAbs().maxCoeff() < 1e-10);

  const Eigen::VectorXd c1 = forward_coeffs(eig, Eigen::VectorXd::Ones(n));
  CHECK(std::abs(c1[0]) > 1.0);
  CHECK(c1.tail(n - 1).cwiseAbs().maxCoeff() < 1e-10 * std::abs(c1[0]));

  const Eigen::VectorXd f = testing::random_matrix(n, 1, 3).col(0);
  const Eigen::VectorXd c = forward_coeffs(eig, f);
  CHECK(testing::rel_err(eig.psis * c, f) < 1e-8);
  const double energy = (op.areas.array() * f.array().square()).sum();
  CHECK(c.squaredNorm() == doctest::Approx(energy).epsilon(1e-8));
  CHECK_THROWS_AS(forward_coeffs(eig, Eigen::VectorXd::Ones(n + 1)), InputError);
}

TEST_CASE("spectral filtering") {
  const LBOperator op = assemble_laplace_beltrami(generate_torus(6, 8));
  const EigenSystem eig = eig_decompose(op.stiffness_and_mass());
  const Eigen::VectorXd f = testing::random_matrix(op.size(), 1, 13).col(0);
  CHECK(testing::rel_err(spectral_filter(eig, f, [](double) { return 1.0; }), f) < 1e-8);

  auto g = [](double l) { return std::exp(-0.1 * l); };
  const Eigen::VectorXd h = spectral_filter(eig, eig.psis.col(7), g);
  CHECK(testing::rel_err(h, g(eig.lambdas[7]) * eig.psis.col(7)) < 1e-8);
  const Eigen::VectorXd ch = forward_coeffs(eig, h);
  Eigen::VectorXd want = Eigen::VectorXd::Zero(op.size());
  want[7] = g(eig.lambdas[7]);
  CHECK((ch - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("decomposition is deterministic and guarded") {
  const LBOperator op = assemble_laplace_beltrami(generate_icosphere(2));
  const EigenSystem a = eig_decompose(op.stiffness_and_mass());
  const EigenSystem b = eig_decompose(op.stiffness_and_mass());
  CHECK(a.lambdas == b.lambdas);
  CHECK(a.psis == b.psis);

  StiffnessAndMass big;
  big.stiffness.resize(kMaxDenseVertices + 1, kMaxDenseVertices + 1);
  big.areas = Eigen::VectorXd::Ones(kMaxDenseVertices + 1);
  CHECK_THROWS_AS(eig_decompose(big), InputError);
}
