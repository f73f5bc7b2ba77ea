#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "lbcnn/family.hpp"
#include "lbcnn/lb_operator.hpp"

namespace lbcnn {

/// Three-term recurrence P_{k+1} = (a * x + b) P_k + c P_{k-1}, with P_{-1} = 0, P_0 = 1.
struct RecurrenceCoeffs {
  double a;
  double b;
  double c;
};

RecurrenceCoeffs recurrence_coeffs(PolyFamily family, int k);

/// Domain the normalized spectrum is mapped onto: [-1, 1] or [0, 2].
struct Interval {
  double lo;
  double hi;
};
Interval family_domain(PolyFamily family);

/// Closed-form P_k(lambda): cos(k acos lambda) for chebyshev, the finite sum
/// for laguerre, and H_k / sqrt(2^k k!) for hermite. Chebyshev input must lie in
/// [-1, 1] (a slack of 1e-10 absorbs rounding, clamped before acos).
double eval_poly_scalar(PolyFamily family, int k, double lambda);

/// Physicists' Hermite H_k from its explicit sum; cross-check for the normalized form.
double hermite_unnormalized(int k, double lambda);

/// P_k(lambda) by running the recurrence on a scalar.
double eval_poly_recurrence(PolyFamily family, int k, double lambda);

/// sum_k theta_k P_k(lambda).
double eval_series(PolyFamily family, std::span<const double> theta, double lambda);

struct FilterCoefficients {
  PolyFamily family = PolyFamily::chebyshev;
  std::vector<double> theta;
};

/// [P_0(M) F, ..., P_{K-1}(M) F] with M = Delta~ (or Delta~^T when transpose).
/// F may have several columns; each basis entry has the same shape as F.
std::vector<Eigen::MatrixXd> poly_basis_apply(const NormalizedOperator& op, const Eigen::MatrixXd& F, int K,
                                              bool transpose = false, Exec exec = Exec::parallel);

/// h = sum_k theta_k P_k(Delta~) f in a single recurrence pass.
Eigen::VectorXd filter_apply(const NormalizedOperator& op, const Eigen::VectorXd& f, const FilterCoefficients& coeffs,
                             Exec exec = Exec::parallel);

/// Filter response to the unit impulse at vertex j.
Eigen::VectorXd impulse_response(const NormalizedOperator& op, Eigen::Index j, const FilterCoefficients& coeffs,
                                 Exec exec = Exec::parallel);

}  // namespace lbcnn
